use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use super::DatasetError;

/// Bijection between category strings and the integer codes `0..n`.
///
/// Codes follow the sorted order of the distinct categories, so the same
/// category set always yields the same codes. The ordering is arbitrary as
/// far as the model is concerned; tree splits on these codes treat it as if
/// it meant something.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<String>", into = "Vec<String>")]
pub struct LabelEncoder {
    categories: Vec<String>,
    codes: HashMap<String, u32>,
}

pub fn fit_label_encoder<I, S>(categories: I) -> Result<LabelEncoder, DatasetError>
where
    I: IntoIterator<Item = S>,
    S: AsRef<str>,
{
    let mut cats: Vec<String> = categories
        .into_iter()
        .map(|s| s.as_ref().to_owned())
        .collect();
    cats.sort_unstable();
    cats.dedup();
    LabelEncoder::try_from(cats)
}

impl LabelEncoder {
    pub fn encode(&self, category: &str) -> Option<u32> {
        self.codes.get(category).copied()
    }

    pub fn decode(&self, code: u32) -> Option<&str> {
        self.categories.get(code as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.categories.len()
    }

    pub fn is_empty(&self) -> bool {
        self.categories.is_empty()
    }

    /// Categories in code order.
    pub fn categories(&self) -> &[String] {
        &self.categories
    }
}

impl TryFrom<Vec<String>> for LabelEncoder {
    type Error = DatasetError;

    /// Expects categories already in code order (sorted, distinct).
    fn try_from(categories: Vec<String>) -> Result<Self, DatasetError> {
        if categories.is_empty() {
            return Err(DatasetError::EmptyCategories);
        }
        if categories.windows(2).any(|w| w[0] >= w[1]) {
            return Err(DatasetError::Manifest(
                "encoder categories must be sorted and distinct".into(),
            ));
        }
        let codes = categories
            .iter()
            .enumerate()
            .map(|(i, c)| (c.clone(), i as u32))
            .collect();
        Ok(LabelEncoder { categories, codes })
    }
}

impl From<LabelEncoder> for Vec<String> {
    fn from(enc: LabelEncoder) -> Self {
        enc.categories
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn colors_get_sorted_codes() {
        let enc = fit_label_encoder(["red", "green", "blue"]).unwrap();
        assert_eq!(enc.encode("blue"), Some(0));
        assert_eq!(enc.encode("green"), Some(1));
        assert_eq!(enc.encode("red"), Some(2));
        for c in ["red", "green", "blue"] {
            assert_eq!(enc.decode(enc.encode(c).unwrap()), Some(c));
        }
        assert_eq!(enc.encode("purple"), None);
        assert_eq!(enc.decode(3), None);
    }

    #[test]
    fn single_and_empty() {
        let enc = fit_label_encoder(["x"]).unwrap();
        assert_eq!(enc.encode("x"), Some(0));
        assert!(matches!(
            fit_label_encoder(Vec::<String>::new()),
            Err(DatasetError::EmptyCategories)
        ));
    }

    #[test]
    fn serde_rejects_unsorted() {
        assert!(serde_json::from_str::<LabelEncoder>(r#"["b","a"]"#).is_err());
        let enc: LabelEncoder = serde_json::from_str(r#"["a","b"]"#).unwrap();
        assert_eq!(enc.encode("b"), Some(1));
    }

    proptest! {
        #[test]
        fn bijective_and_order_independent(labels in prop::collection::vec("[0-9A-E]{1,3}", 1..200)) {
            let enc = fit_label_encoder(&labels).unwrap();
            let mut rev = labels.clone();
            rev.reverse();
            prop_assert_eq!(&enc, &fit_label_encoder(&rev).unwrap());
            for l in &labels {
                let code = enc.encode(l).unwrap();
                prop_assert!((code as usize) < enc.len());
                prop_assert_eq!(enc.decode(code), Some(l.as_str()));
            }
            let mut distinct = labels.clone();
            distinct.sort();
            distinct.dedup();
            prop_assert_eq!(enc.len(), distinct.len());
        }
    }

    #[test]
    fn node_labels_fill_the_code_range() {
        let labels: Vec<String> = (0..133).map(|i| format!("{}", 100 + i * 3)).collect();
        let enc = fit_label_encoder(&labels).unwrap();
        assert_eq!(enc.len(), 133);
        let mut seen: Vec<u32> = labels.iter().map(|l| enc.encode(l).unwrap()).collect();
        seen.sort_unstable();
        assert_eq!(seen, (0..133).collect::<Vec<u32>>());
    }
}
