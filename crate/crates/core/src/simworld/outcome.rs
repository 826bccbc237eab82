use rand::Rng;
use serde::{Deserialize, Serialize};

use super::item::FoodItem;
use super::material::{ComplianceClass, SOFT_MAX_STIFFNESS};
use super::primitive::Primitive;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FailureMode {
    None,
    Miss,
    DropAfterSkewer,
    Unstable,
    Damage,
    DetectionMiss,
    ExceededRetries,
}

impl FailureMode {
    pub const ALL: [FailureMode; 7] = [
        FailureMode::None,
        FailureMode::Miss,
        FailureMode::DropAfterSkewer,
        FailureMode::Unstable,
        FailureMode::Damage,
        FailureMode::DetectionMiss,
        FailureMode::ExceededRetries,
    ];
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrialOutcome {
    /// 0 on success, 1 otherwise.
    pub loss: u8,
    pub failure_mode: FailureMode,
    pub peak_force: f64,
    pub insertion_depth: f64,
    pub tines_inserted: u8,
}

impl TrialOutcome {
    pub fn failure(mode: FailureMode) -> Self {
        TrialOutcome {
            loss: u8::from(mode != FailureMode::None),
            failure_mode: mode,
            peak_force: 0.0,
            insertion_depth: 0.0,
            tines_inserted: 0,
        }
    }

    pub fn is_success(&self) -> bool {
        self.loss == 0
    }
}

/// Tines that engage at a given distance from the item center.
pub fn tines_for_offset(final_offset: f64, minor_axis: f64) -> u8 {
    if final_offset <= 0.25 * minor_axis {
        4
    } else if final_offset <= 0.5 * minor_axis {
        2
    } else {
        0
    }
}

pub fn softness_score(stiffness: f64) -> f64 {
    (1.0 - stiffness / SOFT_MAX_STIFFNESS).clamp(0.0, 1.0)
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutcomeModel {
    /// Drop probability outside the vertical-on-soft case.
    pub baseline_slip: f64,
}

impl Default for OutcomeModel {
    fn default() -> Self {
        OutcomeModel { baseline_slip: 0.05 }
    }
}

impl OutcomeModel {
    pub fn p_slip(&self, item: &FoodItem, primitive: Primitive) -> f64 {
        if primitive == Primitive::VerticalSkewer && item.compliance() == ComplianceClass::Soft {
            sigmoid(4.0 * (softness_score(item.material.stiffness) - 0.5))
        } else {
            self.baseline_slip
        }
    }
}

pub fn resolve_outcome(
    item: &FoodItem,
    primitive: Primitive,
    insertion_depth: f64,
    peak_force: f64,
    final_offset: f64,
    model: &OutcomeModel,
    rng: &mut impl Rng,
) -> TrialOutcome {
    let tines = tines_for_offset(final_offset, item.minor_axis);
    let mode = if insertion_depth < item.material.pierce_depth || tines < 2 {
        FailureMode::Miss
    } else if item.compliance() == ComplianceClass::Soft && peak_force > item.material.fracture_force {
        FailureMode::Damage
    } else if rng.gen::<f64>() < model.p_slip(item, primitive) {
        FailureMode::DropAfterSkewer
    } else if tines == 2 {
        FailureMode::Unstable
    } else {
        FailureMode::None
    };
    TrialOutcome {
        loss: u8::from(mode != FailureMode::None),
        failure_mode: mode,
        peak_force,
        insertion_depth,
        tines_inserted: if insertion_depth > 0.0 { tines } else { 0 },
    }
}

#[cfg(test)]
mod tests {
    use super::super::item::Appearance;
    use super::super::material::{MaterialProfile, Subregion};
    use super::*;
    use crate::rng;

    fn item(stiffness: f64, class: ComplianceClass) -> FoodItem {
        FoodItem {
            id: 0,
            center: [0.0; 2],
            height: 0.015,
            major_axis: 0.03,
            minor_axis: 0.02,
            axis_angle: 0.0,
            material: MaterialProfile {
                stiffness,
                fracture_force: 3.0,
                compliance_class: class,
                pierce_depth: 0.005,
                subregions: vec![Subregion::uniform()],
            },
            appearance: Appearance {
                base_hue: 0.0,
                saturation: 0.5,
                shape_eccentricity: 0.3,
            },
            archetype: "t".into(),
            nominal_height: 0.015,
        }
    }

    #[test]
    fn slip_for_very_soft_item() {
        let p = OutcomeModel::default().p_slip(&item(50.0, ComplianceClass::Soft), Primitive::VerticalSkewer);
        // softness 5/6: 1 / (1 + exp(-4/3))
        assert!((p - 0.791_391_1).abs() < 1e-6, "{p}");
        let q = OutcomeModel::default().p_slip(&item(50.0, ComplianceClass::Soft), Primitive::AngledSkewer);
        assert_eq!(q, 0.05);
    }

    #[test]
    fn tine_bands() {
        assert_eq!(tines_for_offset(0.0, 0.02), 4);
        assert_eq!(tines_for_offset(0.005, 0.02), 4);
        assert_eq!(tines_for_offset(0.0075, 0.02), 2);
        assert_eq!(tines_for_offset(0.011, 0.02), 0);
    }

    #[test]
    fn nominal_success_without_slip() {
        let m = OutcomeModel { baseline_slip: 0.0 };
        let mut r = rng::stream(1, &[]);
        let o = resolve_outcome(
            &item(2000.0, ComplianceClass::Hard),
            Primitive::VerticalSkewer,
            0.01,
            5.0,
            0.0,
            &m,
            &mut r,
        );
        assert_eq!(o.failure_mode, FailureMode::None);
        assert_eq!(o.loss, 0);
    }

    #[test]
    fn ordering_of_failures() {
        let m = OutcomeModel { baseline_slip: 0.0 };
        let mut r = rng::stream(1, &[]);
        let soft = item(200.0, ComplianceClass::Soft);
        let o = resolve_outcome(&soft, Primitive::AngledSkewer, 0.001, 9.0, 0.0, &m, &mut r);
        assert_eq!(o.failure_mode, FailureMode::Miss);
        let o = resolve_outcome(&soft, Primitive::AngledSkewer, 0.01, 9.0, 0.0, &m, &mut r);
        assert_eq!(o.failure_mode, FailureMode::Damage);
        let o = resolve_outcome(&soft, Primitive::AngledSkewer, 0.01, 1.0, 0.007, &m, &mut r);
        assert_eq!(o.failure_mode, FailureMode::Unstable);
        assert_eq!(o.loss, 1);
    }

    #[test]
    fn loss_matches_mode_over_many_calls() {
        use rand::Rng;
        let m = OutcomeModel::default();
        let mut r = rng::stream(7, &[]);
        for _ in 0..10_000 {
            let soft = r.gen_bool(0.5);
            let it = if soft {
                item(r.gen_range(1.0..300.0), ComplianceClass::Soft)
            } else {
                item(r.gen_range(800.0..5000.0), ComplianceClass::Hard)
            };
            let prim = if r.gen_bool(0.5) {
                Primitive::VerticalSkewer
            } else {
                Primitive::AngledSkewer
            };
            let o = resolve_outcome(
                &it,
                prim,
                r.gen_range(0.0..0.015),
                r.gen_range(0.0..6.0),
                r.gen_range(0.0..0.015),
                &m,
                &mut r,
            );
            assert_eq!(o.loss == 0, o.failure_mode == FailureMode::None);
            if o.loss == 0 {
                assert!(o.tines_inserted >= 2 && o.insertion_depth >= it.material.pierce_depth);
            }
        }
    }
}
