//! Piecewise-linear elastic contact with a post-fracture plateau.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ground-truth compliance; the source of primitive labels.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ComplianceClass {
    Hard,
    Soft,
}

/// Lowest stiffness an item labelled [`ComplianceClass::Hard`] may have (N/m).
pub const HARD_MIN_STIFFNESS: f64 = 800.0;
/// Highest stiffness an item labelled [`ComplianceClass::Soft`] may have (N/m).
pub const SOFT_MAX_STIFFNESS: f64 = 300.0;
/// Force left after the item fractures, as a fraction of the fracture force.
pub const POST_FRACTURE_FRACTION: f64 = 0.25;

/// Radial band `[start, end)` of the normalized elliptical radius with its
/// own stiffness multiplier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Subregion {
    pub start: f64,
    pub end: f64,
    pub multiplier: f64,
}

impl Subregion {
    pub fn uniform() -> Self {
        Subregion {
            start: 0.0,
            end: 1.0,
            multiplier: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProfile {
    /// Base spring constant (N/m); subregions scale it.
    pub stiffness: f64,
    /// Load at which the item fractures (N).
    pub fracture_force: f64,
    pub compliance_class: ComplianceClass,
    /// Depth at which the tines are engaged (m).
    pub pierce_depth: f64,
    pub subregions: Vec<Subregion>,
}

impl MaterialProfile {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(format!("material: {msg}")));
        if !(self.stiffness > 0.0 && self.stiffness.is_finite()) {
            return bad(format!("stiffness {} must be > 0", self.stiffness));
        }
        if !(self.fracture_force > 0.0 && self.fracture_force.is_finite()) {
            return bad(format!("fracture_force {} must be > 0", self.fracture_force));
        }
        match self.compliance_class {
            ComplianceClass::Hard if self.stiffness < HARD_MIN_STIFFNESS => {
                return bad(format!("hard item with stiffness {}", self.stiffness));
            }
            ComplianceClass::Soft if self.stiffness > SOFT_MAX_STIFFNESS => {
                return bad(format!("soft item with stiffness {}", self.stiffness));
            }
            _ => {}
        }
        if self.subregions.is_empty() {
            return bad("no subregions".into());
        }
        let mut edge = 0.0;
        for s in &self.subregions {
            if s.multiplier <= 0.0 {
                return bad(format!("subregion multiplier {} must be > 0", s.multiplier));
            }
            if (s.start - edge).abs() > 1e-12 || s.end <= s.start {
                return bad("subregions must partition [0, 1] in order".into());
            }
            edge = s.end;
        }
        if (edge - 1.0).abs() > 1e-12 {
            return bad("subregions must end at 1".into());
        }
        Ok(())
    }

    /// Local stiffness at a normalized elliptical radius in `[0, 1]`.
    pub fn stiffness_at(&self, radial_fraction: f64) -> f64 {
        let r = radial_fraction.clamp(0.0, 1.0);
        let mult = self
            .subregions
            .iter()
            .find(|s| r >= s.start && r < s.end)
            .or(self.subregions.last())
            .map_or(1.0, |s| s.multiplier);
        self.stiffness * mult
    }

    pub fn max_stiffness(&self) -> f64 {
        self.subregions.iter().map(|s| s.multiplier).fold(0.0, f64::max) * self.stiffness
    }

    /// Radial fraction at the center of the stiffest band.
    pub fn stiffest_radial_fraction(&self) -> f64 {
        self.subregions
            .iter()
            .max_by(|a, b| a.multiplier.total_cmp(&b.multiplier))
            .map_or(0.0, |s| 0.5 * (s.start + s.end))
    }
}

/// Force for a given local stiffness, penetration below the item top, item
/// height and plate stiffness. Once the load exceeds the fracture force it
/// falls to the post-fracture plateau; below the item the plate spring adds on.
pub fn piecewise_force(
    local_stiffness: f64,
    fracture_force: f64,
    penetration: f64,
    height: f64,
    plate_stiffness: f64,
) -> f64 {
    if penetration <= 0.0 {
        return 0.0;
    }
    let in_item = penetration.min(height);
    let elastic = local_stiffness * in_item;
    let item = if elastic > fracture_force {
        POST_FRACTURE_FRACTION * fracture_force
    } else {
        elastic
    };
    item + plate_stiffness * (penetration - height).max(0.0)
}

/// Share of the material that behaves as a stiff skin, 0 for soft flesh and
/// 1 from [`HARD_MIN_STIFFNESS`] up.
pub fn stiff_share(local_stiffness: f64) -> f64 {
    ((local_stiffness - SOFT_MAX_STIFFNESS) / (HARD_MIN_STIFFNESS - SOFT_MAX_STIFFNESS)).clamp(0.0, 1.0)
}

/// Extra load measured at the fork when stiff material is entered with
/// tilted tines.
const TILT_LOAD_GAIN: f64 = 3.0;
/// Load relief in compliant material when tines enter at an angle.
const TILT_RELIEF_GAIN: f64 = 0.45;

/// Multiplier on the item's elastic load that drives fracture at pitch `beta`.
pub fn tilt_relief(beta: f64, local_stiffness: f64) -> f64 {
    1.0 - TILT_RELIEF_GAIN * (1.0 - stiff_share(local_stiffness)) * beta.sin()
}

/// Multiplier from the fracture-driving load to the force seen by the sensor.
pub fn tilt_lift(beta: f64, local_stiffness: f64) -> f64 {
    1.0 + TILT_LOAD_GAIN * stiff_share(local_stiffness) * beta.sin()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn hard() -> MaterialProfile {
        MaterialProfile {
            stiffness: 1000.0,
            fracture_force: 60.0,
            compliance_class: ComplianceClass::Hard,
            pierce_depth: 0.005,
            subregions: vec![Subregion::uniform()],
        }
    }

    #[test]
    fn zero_penetration_is_zero_force() {
        assert_eq!(piecewise_force(1000.0, 60.0, 0.0, 0.02, 6000.0), 0.0);
    }

    #[test]
    fn hard_item_linear_branch() {
        // 1000 N/m * 0.005 m
        let f = piecewise_force(1000.0, 60.0, 0.005, 0.02, 6000.0);
        assert!((f - 5.0).abs() < 1e-12);
    }

    #[test]
    fn fracture_drops_to_plateau() {
        let f = piecewise_force(1000.0, 10.0, 0.015, 0.02, 6000.0);
        assert!((f - 2.5).abs() < 1e-12);
    }

    #[test]
    fn validation_rejects_bad_profiles() {
        assert!(hard().validate().is_ok());
        let mut m = hard();
        m.stiffness = 500.0;
        assert!(m.validate().is_err());
        let mut m = hard();
        m.subregions = vec![Subregion {
            start: 0.0,
            end: 0.5,
            multiplier: 1.0,
        }];
        assert!(m.validate().is_err());
        let mut m = hard();
        m.subregions[0].multiplier = 0.0;
        assert!(m.validate().is_err());
        let mut m = hard();
        m.compliance_class = ComplianceClass::Soft;
        assert!(m.validate().is_err());
    }

    #[test]
    fn subregion_lookup() {
        let mut m = hard();
        m.subregions = vec![
            Subregion {
                start: 0.0,
                end: 0.2,
                multiplier: 1.0,
            },
            Subregion {
                start: 0.2,
                end: 1.0,
                multiplier: 0.1,
            },
        ];
        assert_eq!(m.stiffness_at(0.1), 1000.0);
        assert!((m.stiffness_at(0.5) - 100.0).abs() < 1e-9);
        assert!((m.stiffness_at(1.0) - 100.0).abs() < 1e-9);
        assert_eq!(m.max_stiffness(), 1000.0);
        assert!((m.stiffest_radial_fraction() - 0.1).abs() < 1e-12);
    }

    #[test]
    fn tilt_factors_split_by_stiffness() {
        let beta = 65f64.to_radians();
        assert_eq!(tilt_lift(beta, 100.0), 1.0);
        assert!(tilt_relief(beta, 100.0) < 0.6);
        assert_eq!(tilt_relief(beta, 2000.0), 1.0);
        assert!(tilt_lift(beta, 2000.0) > 3.7);
        assert_eq!(tilt_lift(0.0, 2000.0), 1.0);
    }
}
