//! Participant profiles from the post-experiment questionnaire.

use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{fit_label_encoder, DatasetError, LabelEncoder};
use crate::textio::{csv_reader, csv_writer, FileError};

pub const GENDERS: &[&str] = &["Male", "Female"];
pub const EDUCATION_LEVELS: &[&str] = &[
    "High school or equivalent",
    "Bachelor's degree or equivalent",
    "Master's degree or equivalent",
    "Doctoral degree or equivalent",
];
pub const FREQUENCY_SCALE: &[&str] = &["Never", "Seldom", "Sometimes", "Often", "Very often"];
pub const FAMILIARITY_SCALE: &[&str] = &[
    "Not at all familiar",
    "A-little familiar",
    "Moderately familiar",
    "Quite-a-bit familiar",
    "Very familiar",
];
pub const EVACUATION_EXPERIENCE: &[&str] = &["No", "Yes"];
pub const DEVICES: &[&str] = &["desktop", "hmd"];

/// Profile fields in feature order.
pub const PROFILE_FIELDS: [&str; 9] = [
    "gender",
    "age",
    "height",
    "education",
    "vr_experience",
    "gaming_experience",
    "building_familiarity",
    "evacuation_experience",
    "device",
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonProfile {
    pub gender: String,
    /// Years.
    pub age: f64,
    /// Centimeters.
    pub height: f64,
    pub education: String,
    pub vr_experience: String,
    pub gaming_experience: String,
    pub building_familiarity: String,
    pub evacuation_experience: String,
    pub device: String,
}

impl PersonProfile {
    /// Categorical fields as `(name, value, vocabulary)`.
    fn categorical(&self) -> [(&'static str, &str, &'static [&'static str]); 7] {
        [
            ("gender", &self.gender, GENDERS),
            ("education", &self.education, EDUCATION_LEVELS),
            ("vr_experience", &self.vr_experience, FREQUENCY_SCALE),
            ("gaming_experience", &self.gaming_experience, FAMILIARITY_SCALE),
            ("building_familiarity", &self.building_familiarity, FAMILIARITY_SCALE),
            ("evacuation_experience", &self.evacuation_experience, EVACUATION_EXPERIENCE),
            ("device", &self.device, DEVICES),
        ]
    }

    pub fn validate(&self) -> Result<(), DatasetError> {
        for (field, value, vocab) in self.categorical() {
            if !vocab.contains(&value) {
                return Err(DatasetError::UnknownCategory {
                    field: field.to_owned(),
                    value: value.to_owned(),
                });
            }
        }
        if !(self.age.is_finite() && self.height.is_finite()) {
            return Err(DatasetError::UnknownCategory {
                field: "age/height".into(),
                value: format!("{}/{}", self.age, self.height),
            });
        }
        Ok(())
    }

    /// Value of a categorical field by name.
    pub fn category(&self, field: &str) -> Option<&str> {
        self.categorical()
            .into_iter()
            .find(|(f, _, _)| *f == field)
            .map(|(_, v, _)| v)
    }
}

/// One label encoder per categorical profile field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ProfileEncoders(pub BTreeMap<String, LabelEncoder>);

impl ProfileEncoders {
    /// Fits each field's encoder on the values observed in `profiles`.
    pub fn fit<'a>(
        profiles: impl IntoIterator<Item = &'a PersonProfile>,
    ) -> Result<Self, DatasetError> {
        let mut values: BTreeMap<&'static str, Vec<String>> = BTreeMap::new();
        for p in profiles {
            for (field, v, _) in p.categorical() {
                values.entry(field).or_default().push(v.to_owned());
            }
        }
        if values.is_empty() {
            return Err(DatasetError::EmptyCategories);
        }
        let encoders = values
            .into_iter()
            .map(|(f, vs)| Ok((f.to_owned(), fit_label_encoder(vs)?)))
            .collect::<Result<_, DatasetError>>()?;
        Ok(ProfileEncoders(encoders))
    }

    /// Profile as the nine feature values in [`PROFILE_FIELDS`] order.
    pub fn encode(&self, p: &PersonProfile) -> Result<[f64; 9], DatasetError> {
        let code = |field: &str, value: &str| -> Result<f64, DatasetError> {
            self.0
                .get(field)
                .and_then(|enc| enc.encode(value))
                .map(f64::from)
                .ok_or_else(|| DatasetError::UnknownCategory {
                    field: field.to_owned(),
                    value: value.to_owned(),
                })
        };
        Ok([
            code("gender", &p.gender)?,
            p.age,
            p.height,
            code("education", &p.education)?,
            code("vr_experience", &p.vr_experience)?,
            code("gaming_experience", &p.gaming_experience)?,
            code("building_familiarity", &p.building_familiarity)?,
            code("evacuation_experience", &p.evacuation_experience)?,
            code("device", &p.device)?,
        ])
    }
}

#[derive(Debug, Deserialize)]
struct ProfileRow {
    participant: String,
    gender: String,
    age: f64,
    height: f64,
    education: String,
    vr_experience: String,
    gaming_experience: String,
    building_familiarity: String,
    evacuation_experience: String,
    device: String,
}

pub fn read_profiles(path: &Path) -> Result<BTreeMap<String, PersonProfile>, DatasetError> {
    let mut rdr = csv_reader(path)?;
    let mut out = BTreeMap::new();
    for rec in rdr.deserialize::<ProfileRow>() {
        let row = rec.map_err(|e| FileError::csv(path, e))?;
        let profile = PersonProfile {
            gender: row.gender,
            age: row.age,
            height: row.height,
            education: row.education,
            vr_experience: row.vr_experience,
            gaming_experience: row.gaming_experience,
            building_familiarity: row.building_familiarity,
            evacuation_experience: row.evacuation_experience,
            device: row.device,
        };
        profile.validate()?;
        if out.insert(row.participant.clone(), profile).is_some() {
            return Err(FileError::new(
                path,
                None,
                format!("duplicate participant {}", row.participant),
            )
            .into());
        }
    }
    Ok(out)
}

pub fn write_profiles(
    path: &Path,
    profiles: &BTreeMap<String, PersonProfile>,
) -> Result<(), DatasetError> {
    let mut header = vec!["participant"];
    header.extend(PROFILE_FIELDS);
    let mut w = csv_writer(path, &header)?;
    for (participant, p) in profiles {
        let rec = [
            participant.clone(),
            p.gender.clone(),
            p.age.to_string(),
            p.height.to_string(),
            p.education.clone(),
            p.vr_experience.clone(),
            p.gaming_experience.clone(),
            p.building_familiarity.clone(),
            p.evacuation_experience.clone(),
            p.device.clone(),
        ];
        w.write_record(&rec).map_err(|e| FileError::csv(path, e))?;
    }
    w.flush().map_err(|e| FileError::io(path, e))?;
    Ok(())
}

#[cfg(test)]
pub(crate) fn sample_profile() -> PersonProfile {
    PersonProfile {
        gender: "Female".into(),
        age: 28.0,
        height: 168.0,
        education: "Master's degree or equivalent".into(),
        vr_experience: "Seldom".into(),
        gaming_experience: "Very familiar".into(),
        building_familiarity: "Moderately familiar".into(),
        evacuation_experience: "No".into(),
        device: "hmd".into(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn vocabulary_is_enforced() {
        let mut p = sample_profile();
        assert!(p.validate().is_ok());
        p.device = "phone".into();
        assert!(matches!(p.validate(), Err(DatasetError::UnknownCategory { field, .. }) if field == "device"));
    }

    #[test]
    fn profiles_round_trip_through_csv() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("profiles.csv");
        let mut m = BTreeMap::new();
        m.insert("P01".to_owned(), sample_profile());
        let mut other = sample_profile();
        other.gender = "Male".into();
        other.age = 41.5;
        m.insert("P02".to_owned(), other);
        write_profiles(&path, &m).unwrap();
        assert_eq!(read_profiles(&path).unwrap(), m);
    }

    #[test]
    fn encoding_is_numeric_for_age_and_height() {
        let p = sample_profile();
        let enc = ProfileEncoders::fit([&p]).unwrap();
        let v = enc.encode(&p).unwrap();
        assert_eq!(v[1], 28.0);
        assert_eq!(v[2], 168.0);
        // single observed category per field → code 0
        assert_eq!(v[0], 0.0);
        assert_eq!(v[8], 0.0);
    }
}
