//! Per-level planar similarity transforms between the virtual environment and
//! the network map frame, and the vertical band table used to pick a level.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};

use super::MappingError;
use crate::network::Point;

/// A measured correspondence between a virtual-environment point and the
/// same point on the network map.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ControlPointPair {
    pub level: i32,
    pub vx: f64,
    pub vy: f64,
    pub vz: f64,
    pub mx: f64,
    pub my: f64,
}

/// `map = scale * R(rotation) * virtual_xy + translation`, valid for virtual
/// heights in the half-open band `[z_min, z_max)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FloorTransform {
    pub level: i32,
    pub scale: f64,
    /// Radians in `[0, 2π)`.
    pub rotation: f64,
    pub translation: Point,
    pub z_min: f64,
    pub z_max: f64,
}

impl FloorTransform {
    pub fn identity(level: i32) -> Self {
        FloorTransform {
            level,
            scale: 1.0,
            rotation: 0.0,
            translation: Point::new(0.0, 0.0),
            z_min: f64::NEG_INFINITY,
            z_max: f64::INFINITY,
        }
    }

    pub fn with_z_range(mut self, z_min: f64, z_max: f64) -> Self {
        self.z_min = z_min;
        self.z_max = z_max;
        self
    }

    pub fn contains_z(&self, z: f64) -> bool {
        self.z_min <= z && z < self.z_max
    }

    /// Virtual planar coordinates to map frame.
    pub fn apply(&self, vx: f64, vy: f64) -> Point {
        let (s, c) = self.rotation.sin_cos();
        Point::new(
            self.scale * (c * vx - s * vy) + self.translation.x,
            self.scale * (s * vx + c * vy) + self.translation.y,
        )
    }

    /// Map frame back to virtual planar coordinates.
    pub fn invert(&self, p: Point) -> (f64, f64) {
        let (s, c) = self.rotation.sin_cos();
        let dx = (p.x - self.translation.x) / self.scale;
        let dy = (p.y - self.translation.y) / self.scale;
        (c * dx + s * dy, -s * dx + c * dy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Residuals {
    pub rms: f64,
    pub max: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TransformEstimate {
    /// Estimated transform; its z band is left unbounded until it joins a
    /// [`TransformSet`].
    pub transform: FloorTransform,
    /// Mean virtual height of the level's control points.
    pub floor_z: f64,
    pub residuals: Residuals,
}

/// Least-squares planar similarity transform from the control points on
/// `level` (closed form, no reflection).
pub fn estimate_transform(
    pairs: &[ControlPointPair],
    level: i32,
) -> Result<TransformEstimate, MappingError> {
    let pts: Vec<&ControlPointPair> = pairs.iter().filter(|p| p.level == level).collect();
    if pts.len() < 2 {
        return Err(MappingError::TooFewControlPoints {
            level,
            found: pts.len(),
        });
    }
    if pts
        .iter()
        .any(|p| ![p.vx, p.vy, p.vz, p.mx, p.my].iter().all(|v| v.is_finite()))
    {
        return Err(MappingError::NonFinite("control point"));
    }
    let n = pts.len() as f64;
    let mean = |f: fn(&ControlPointPair) -> f64| pts.iter().map(|p| f(p)).sum::<f64>() / n;
    let (vxm, vym, vzm) = (mean(|p| p.vx), mean(|p| p.vy), mean(|p| p.vz));
    let (mxm, mym) = (mean(|p| p.mx), mean(|p| p.my));

    let (mut spread, mut dot, mut cross) = (0.0, 0.0, 0.0);
    for p in &pts {
        let (vx, vy) = (p.vx - vxm, p.vy - vym);
        let (mx, my) = (p.mx - mxm, p.my - mym);
        spread += vx * vx + vy * vy;
        dot += vx * mx + vy * my;
        cross += vx * my - vy * mx;
    }
    let extent = pts
        .iter()
        .map(|p| p.vx.abs().max(p.vy.abs()))
        .fold(1.0, f64::max);
    if spread <= (1e-12 * extent).powi(2) * n {
        return Err(MappingError::DegenerateControlPoints { level });
    }
    let a = dot / spread;
    let b = cross / spread;
    let scale = a.hypot(b);
    if scale <= 0.0 || !scale.is_finite() {
        return Err(MappingError::DegenerateControlPoints { level });
    }
    let rotation = b.atan2(a).rem_euclid(TAU);
    let translation = Point::new(mxm - (a * vxm - b * vym), mym - (b * vxm + a * vym));
    let transform = FloorTransform {
        level,
        scale,
        rotation,
        translation,
        ..FloorTransform::identity(level)
    };

    let mut sq = 0.0;
    let mut max: f64 = 0.0;
    for p in &pts {
        let r = transform.apply(p.vx, p.vy).distance(&Point::new(p.mx, p.my));
        sq += r * r;
        max = max.max(r);
    }
    Ok(TransformEstimate {
        transform,
        floor_z: vzm,
        residuals: Residuals {
            rms: (sq / n).sqrt(),
            max,
        },
    })
}

/// Validated collection of floor transforms with pairwise-disjoint z bands,
/// ordered by band.
#[derive(Debug, Clone, PartialEq)]
pub struct TransformSet {
    transforms: Vec<FloorTransform>,
}

impl TransformSet {
    pub fn new(mut transforms: Vec<FloorTransform>) -> Result<Self, MappingError> {
        for t in &transforms {
            if !(t.scale > 0.0 && t.scale.is_finite()) {
                return Err(MappingError::InvalidScale { level: t.level });
            }
            if !(t.rotation.is_finite() && t.translation.x.is_finite() && t.translation.y.is_finite())
            {
                return Err(MappingError::NonFinite("transform"));
            }
            if t.z_min.is_nan() || t.z_max.is_nan() || t.z_min >= t.z_max {
                return Err(MappingError::InvalidBand { level: t.level });
            }
        }
        transforms.sort_by(|a, b| a.z_min.total_cmp(&b.z_min));
        for w in transforms.windows(2) {
            if w[0].z_max > w[1].z_min || w[0].level == w[1].level {
                return Err(MappingError::OverlappingBands {
                    a: w[0].level,
                    b: w[1].level,
                });
            }
        }
        Ok(TransformSet { transforms })
    }

    /// Estimates one transform per level present in `pairs` and assigns each
    /// level the band `floor_z ± band_fraction * (smallest gap between floor
    /// heights)`. A single level gets an unbounded band.
    pub fn from_control_points(
        pairs: &[ControlPointPair],
        band_fraction: f64,
    ) -> Result<Self, MappingError> {
        if !(band_fraction > 0.0 && band_fraction <= 0.5) {
            return Err(MappingError::InvalidConfig("band fraction must lie in (0, 0.5]"));
        }
        let mut levels: Vec<i32> = pairs.iter().map(|p| p.level).collect();
        levels.sort_unstable();
        levels.dedup();
        let estimates = levels
            .iter()
            .map(|&l| estimate_transform(pairs, l))
            .collect::<Result<Vec<_>, _>>()?;
        if estimates.len() == 1 {
            return Self::new(vec![estimates[0].transform]);
        }
        let mut heights: Vec<f64> = estimates.iter().map(|e| e.floor_z).collect();
        heights.sort_by(f64::total_cmp);
        let gap = heights
            .windows(2)
            .map(|w| w[1] - w[0])
            .fold(f64::INFINITY, f64::min);
        if !(gap > 0.0) {
            return Err(MappingError::InvalidConfig("levels share a floor height"));
        }
        let half = band_fraction * gap;
        Self::new(
            estimates
                .iter()
                .map(|e| e.transform.with_z_range(e.floor_z - half, e.floor_z + half))
                .collect(),
        )
    }

    pub fn transforms(&self) -> &[FloorTransform] {
        &self.transforms
    }

    pub fn for_level(&self, level: i32) -> Option<&FloorTransform> {
        self.transforms.iter().find(|t| t.level == level)
    }

    fn band_of(&self, z: f64) -> Option<&FloorTransform> {
        self.transforms.iter().find(|t| t.contains_z(z))
    }
}

/// Level whose half-open z band contains `z`.
pub fn assign_level(z: f64, transforms: &TransformSet) -> Result<i32, MappingError> {
    transforms
        .band_of(z)
        .map(|t| t.level)
        .ok_or(MappingError::OutsideBands { z })
}

/// Virtual `(x, y, z)` to map-frame position and level.
pub fn map_point(p: [f64; 3], transforms: &TransformSet) -> Result<(Point, i32), MappingError> {
    let t = transforms
        .band_of(p[2])
        .ok_or(MappingError::OutsideBands { z: p[2] })?;
    Ok((t.apply(p[0], p[1]), t.level))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pair(v: (f64, f64), m: (f64, f64)) -> ControlPointPair {
        ControlPointPair {
            level: 1,
            vx: v.0,
            vy: v.1,
            vz: 0.0,
            mx: m.0,
            my: m.1,
        }
    }

    #[test]
    fn identity_pairs_give_identity() {
        let pairs: Vec<_> = [(0.0, 0.0), (10.0, 0.0), (10.0, 5.0)]
            .iter()
            .map(|&p| pair(p, p))
            .collect();
        let e = estimate_transform(&pairs, 1).unwrap();
        assert!((e.transform.scale - 1.0).abs() < 1e-12);
        assert!(e.transform.rotation.abs() < 1e-12);
        assert!(e.transform.translation.x.abs() < 1e-12 && e.transform.translation.y.abs() < 1e-12);
        assert!(e.residuals.max < 1e-12);
    }

    #[test]
    fn recovers_pure_shift() {
        // virtual = map + (10, 5), so map = virtual - (10, 5)
        let maps = [(0.0, 0.0), (3.0, 1.0), (-2.0, 7.0)];
        let pairs: Vec<_> = maps
            .iter()
            .map(|&(x, y)| pair((x + 10.0, y + 5.0), (x, y)))
            .collect();
        let t = estimate_transform(&pairs, 1).unwrap().transform;
        assert!((t.scale - 1.0).abs() < 1e-12);
        assert!(t.rotation.abs() < 1e-12 || (t.rotation - TAU).abs() < 1e-12);
        assert!((t.translation.x + 10.0).abs() < 1e-12);
        assert!((t.translation.y + 5.0).abs() < 1e-12);
    }

    #[test]
    fn recovers_rotation_and_scale_from_four_corners() {
        let truth = FloorTransform {
            level: 1,
            scale: 2.0,
            rotation: std::f64::consts::FRAC_PI_2,
            translation: Point::new(3.0, -4.0),
            ..FloorTransform::identity(1)
        };
        // north, west, south and east corners in the map frame
        let corners = [(107.0, 12.0), (0.0, 6.0), (107.0, 0.0), (214.0, 6.0)];
        let pairs: Vec<_> = corners
            .iter()
            .map(|&(x, y)| {
                let v = truth.invert(Point::new(x, y));
                pair(v, (x, y))
            })
            .collect();
        let t = estimate_transform(&pairs, 1).unwrap().transform;
        assert!((t.scale - 2.0).abs() < 1e-9);
        assert!((t.rotation - std::f64::consts::FRAC_PI_2).abs() < 1e-9);
        assert!((t.translation.x - 3.0).abs() < 1e-9);
        assert!((t.translation.y + 4.0).abs() < 1e-9);
    }

    #[test]
    fn rejects_too_few_or_coincident_points() {
        assert!(matches!(
            estimate_transform(&[pair((0.0, 0.0), (0.0, 0.0))], 1),
            Err(MappingError::TooFewControlPoints { found: 1, .. })
        ));
        let same = [pair((1.0, 1.0), (0.0, 0.0)), pair((1.0, 1.0), (5.0, 5.0))];
        assert!(matches!(
            estimate_transform(&same, 1),
            Err(MappingError::DegenerateControlPoints { .. })
        ));
        assert!(estimate_transform(&same, 2).is_err());
    }

    fn bands() -> TransformSet {
        TransformSet::new(vec![
            FloorTransform::identity(1).with_z_range(-1.0, 1.0),
            FloorTransform::identity(2).with_z_range(3.0, 5.0),
        ])
        .unwrap()
    }

    #[test]
    fn level_assignment_is_half_open() {
        let set = bands();
        assert_eq!(assign_level(0.0, &set).unwrap(), 1);
        assert_eq!(assign_level(3.0, &set).unwrap(), 2);
        assert_eq!(assign_level(-1.0, &set).unwrap(), 1);
        assert!(assign_level(1.0, &set).is_err());
        assert!(assign_level(2.0, &set).is_err());
        assert!(assign_level(9.0, &set).is_err());
    }

    #[test]
    fn overlapping_bands_rejected() {
        let r = TransformSet::new(vec![
            FloorTransform::identity(1).with_z_range(0.0, 2.0),
            FloorTransform::identity(2).with_z_range(1.0, 3.0),
        ]);
        assert!(matches!(r, Err(MappingError::OverlappingBands { .. })));
        let mut bad = FloorTransform::identity(1);
        bad.scale = -1.0;
        assert!(TransformSet::new(vec![bad]).is_err());
    }

    #[test]
    fn map_point_applies_level_transform() {
        let set = bands();
        let (p, l) = map_point([4.0, -2.0, 0.5], &set).unwrap();
        assert_eq!((p.x, p.y, l), (4.0, -2.0, 1));
        assert!(map_point([0.0, 0.0, 2.0], &set).is_err());

        let t = FloorTransform {
            level: 1,
            scale: 0.5,
            rotation: 0.3,
            translation: Point::new(1.0, 2.0),
            ..FloorTransform::identity(1)
        };
        let set = TransformSet::new(vec![t]).unwrap();
        let (p, _) = map_point([4.0, -2.0, 0.0], &set).unwrap();
        // closed form, written out independently
        let ex = 0.5 * (0.3f64.cos() * 4.0 - 0.3f64.sin() * -2.0) + 1.0;
        let ey = 0.5 * (0.3f64.sin() * 4.0 + 0.3f64.cos() * -2.0) + 2.0;
        assert!((p.x - ex).abs() < 1e-12 && (p.y - ey).abs() < 1e-12);
    }

    #[test]
    fn bands_from_control_points() {
        let mut pairs = Vec::new();
        for (level, z) in [(1, 0.0), (2, 4.0), (3, 8.0)] {
            for (x, y) in [(0.0, 0.0), (10.0, 0.0), (0.0, 10.0)] {
                pairs.push(ControlPointPair {
                    level,
                    vx: x,
                    vy: y,
                    vz: z,
                    mx: x,
                    my: y,
                });
            }
        }
        let set = TransformSet::from_control_points(&pairs, 0.25).unwrap();
        assert_eq!(assign_level(4.0, &set).unwrap(), 2);
        assert_eq!(assign_level(8.9, &set).unwrap(), 3);
        assert!(assign_level(2.0, &set).is_err());
    }
}
