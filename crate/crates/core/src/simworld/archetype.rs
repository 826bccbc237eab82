//! Archetype parameter tables, plate specs and plate spawning.

use std::collections::BTreeMap;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::item::{separated, Appearance, FoodItem, PlateState, MAX_ITEMS};
use super::material::{ComplianceClass, MaterialProfile, Subregion};
use crate::error::{Error, Result};
use crate::rng::{self, tag, SimRng};

const DEFAULT_TABLE: &str = include_str!("../../assets/archetypes.json");

/// Rejection-sampling budget for one plate.
pub const MAX_PLACEMENT_ATTEMPTS: usize = 10_000;
/// Soft items engage the tines once this fraction of their height is pierced.
pub const SOFT_PIERCE_FRACTION: f64 = 0.3;
/// Hard items count as pierced no deeper than this fraction of their height.
pub const HARD_PIERCE_CAP: f64 = 0.9;
pub const DEFAULT_PLATE_STIFFNESS: [f64; 2] = [5000.0, 8000.0];

/// Dataset confounders an archetype exhibits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Confounder {
    MisleadingPair,
    HeterogeneousContact,
    ThinPlateContact,
}

pub type Bounds = [f64; 2];

fn sample(rng: &mut SimRng, b: Bounds) -> f64 {
    if b[1] > b[0] {
        rng.gen_range(b[0]..=b[1])
    } else {
        b[0]
    }
}

fn default_subregions() -> Vec<Subregion> {
    vec![Subregion::uniform()]
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Archetype {
    pub compliance: ComplianceClass,
    pub stiffness: Bounds,
    /// Absolute fracture force bounds (N).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fracture_force: Option<Bounds>,
    /// Fracture force as a multiple of `stiffness * height`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fracture_ratio: Option<Bounds>,
    pub height: Bounds,
    pub minor_axis: Bounds,
    pub major_axis: Bounds,
    pub hue: Bounds,
    pub saturation: Bounds,
    #[serde(default = "default_subregions")]
    pub subregions: Vec<Subregion>,
    #[serde(default)]
    pub tags: Vec<Confounder>,
    /// Available for dataset generation; unseen archetypes only appear on
    /// evaluation plates.
    #[serde(default)]
    pub seen: bool,
}

impl Archetype {
    pub fn nominal_height(&self) -> f64 {
        0.5 * (self.height[0] + self.height[1])
    }

    fn validate(&self, name: &str) -> Result<()> {
        let err = |m: &str| Err(Error::Config(format!("archetype `{name}`: {m}")));
        for b in [
            self.stiffness,
            self.height,
            self.minor_axis,
            self.major_axis,
            self.saturation,
        ] {
            if !(b[0] > 0.0 && b[1] >= b[0]) {
                return err("bounds must be positive and ordered");
            }
        }
        if self.height[1] > 0.05 {
            return err("height above 0.05 m");
        }
        if self.fracture_force.is_none() == self.fracture_ratio.is_none() {
            return err("exactly one of fracture_force / fracture_ratio is required");
        }
        if self.height[1] - self.height[0] >= super::APPROACH_HEIGHT {
            return err("height spread must stay below the probe approach height");
        }
        Ok(())
    }

    /// Draws one item. Placement is done by the caller.
    pub fn sample_item(&self, name: &str, id: u32, rng: &mut SimRng) -> FoodItem {
        let stiffness = sample(rng, self.stiffness);
        let height = sample(rng, self.height);
        let minor = sample(rng, self.minor_axis);
        let major = sample(rng, self.major_axis).max(minor);
        let fracture_force = match (self.fracture_force, self.fracture_ratio) {
            (Some(f), _) => sample(rng, f),
            (None, Some(r)) => sample(rng, r) * stiffness * height,
            (None, None) => unreachable!("validated"),
        };
        let subregions = self.subregions.clone();
        let max_mult = subregions.iter().map(|s| s.multiplier).fold(0.0, f64::max);
        let pierce_depth = match self.compliance {
            ComplianceClass::Hard => (fracture_force / (stiffness * max_mult)).min(HARD_PIERCE_CAP * height),
            ComplianceClass::Soft => SOFT_PIERCE_FRACTION * height,
        };
        let hue = sample(rng, self.hue).rem_euclid(1.0);
        let saturation = sample(rng, self.saturation);
        let axis_angle = rng.gen_range(0.0..std::f64::consts::PI);
        FoodItem {
            id,
            center: [0.0, 0.0],
            height,
            major_axis: major,
            minor_axis: minor,
            axis_angle,
            material: MaterialProfile {
                stiffness,
                fracture_force,
                compliance_class: self.compliance,
                pierce_depth,
                subregions,
            },
            appearance: Appearance {
                base_hue: hue,
                saturation,
                shape_eccentricity: 1.0 - minor / major,
            },
            archetype: name.to_string(),
            nominal_height: self.nominal_height(),
        }
    }
}

/// Archetype parameter table keyed by name.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ArchetypeTable {
    pub entries: BTreeMap<String, Archetype>,
}

impl Default for ArchetypeTable {
    fn default() -> Self {
        Self::from_json(DEFAULT_TABLE).expect("bundled archetype table is valid")
    }
}

impl ArchetypeTable {
    pub fn from_json(text: &str) -> Result<Self> {
        let table: ArchetypeTable = serde_json::from_str(text).map_err(|e| Error::json("archetype table", e))?;
        table.validate()?;
        Ok(table)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, a) in &self.entries {
            a.validate(name)?;
            let probe = MaterialProfile {
                stiffness: a.stiffness[0],
                fracture_force: 1.0,
                compliance_class: a.compliance,
                pierce_depth: 0.0,
                subregions: a.subregions.clone(),
            };
            probe.validate()?;
            let mut hi = probe.clone();
            hi.stiffness = a.stiffness[1];
            hi.validate()?;
        }
        Ok(())
    }

    pub fn get(&self, name: &str) -> Result<&Archetype> {
        self.entries
            .get(name)
            .ok_or_else(|| Error::UnknownArchetype(name.to_string()))
    }

    /// Archetypes marked `seen`, in name order.
    pub fn seen(&self) -> Vec<(&str, &Archetype)> {
        self.entries
            .iter()
            .filter(|(_, a)| a.seen)
            .map(|(n, a)| (n.as_str(), a))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArchetypeCount {
    pub name: String,
    pub count: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateSpec {
    /// Label used in reports.
    #[serde(default)]
    pub label: String,
    pub archetypes: Vec<ArchetypeCount>,
    pub plate_radius: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_plate_stiffness")]
    pub plate_stiffness: Bounds,
}

fn default_plate_stiffness() -> Bounds {
    DEFAULT_PLATE_STIFFNESS
}

impl PlateSpec {
    pub fn new(label: &str, counts: &[(&str, usize)]) -> Self {
        PlateSpec {
            label: label.to_string(),
            archetypes: counts
                .iter()
                .map(|(n, c)| ArchetypeCount {
                    name: n.to_string(),
                    count: *c,
                })
                .collect(),
            plate_radius: 0.12,
            seed: 0,
            plate_stiffness: DEFAULT_PLATE_STIFFNESS,
        }
    }

    pub fn item_count(&self) -> usize {
        self.archetypes.iter().map(|a| a.count).sum()
    }

    /// The six evaluation plates: assorted seen produce, unseen tropical
    /// fruit, raw/boiled squash, broccoli florets, and two unseen mixes.
    pub fn evaluation_plates() -> Vec<PlateSpec> {
        vec![
            PlateSpec::new(
                "plate1",
                &[
                    ("banana", 2),
                    ("raw_broccoli", 2),
                    ("raw_zucchini", 2),
                    ("raw_carrot", 2),
                    ("grape", 1),
                    ("kiwi", 1),
                ],
            ),
            PlateSpec::new(
                "plate2",
                &[
                    ("pineapple", 2),
                    ("mango", 2),
                    ("dragonfruit", 2),
                    ("cantaloupe", 2),
                    ("honeydew", 1),
                    ("pear", 1),
                ],
            ),
            PlateSpec::new("plate3", &[("raw_squash", 5), ("boiled_squash", 5)]),
            PlateSpec::new("plate4", &[("raw_broccoli", 10)]),
            PlateSpec::new(
                "plate5",
                &[("pasta", 3), ("dumpling", 3), ("boiled_yam", 2), ("raw_yam", 2)],
            ),
            PlateSpec::new("plate6", &[("mochi", 3), ("snow_pea", 4), ("canned_peach", 3)]),
        ]
    }
}

/// Builds a plate for `(spec, seed)`. Items are drawn from their archetype
/// distributions in spec order and placed by rejection sampling.
pub fn spawn_plate(spec: &PlateSpec, table: &ArchetypeTable, seed: u64) -> Result<PlateState> {
    let requested = spec.item_count();
    if requested > MAX_ITEMS {
        return Err(Error::Config(format!(
            "plate spec asks for {requested} items, limit is {MAX_ITEMS}"
        )));
    }
    if !(spec.plate_radius > 0.0) {
        return Err(Error::Config("plate_radius must be > 0".into()));
    }
    let mut rng = rng::stream(seed, &[tag::PLATE]);
    let plate_stiffness = sample(&mut rng, spec.plate_stiffness);
    let mut plate = PlateState::empty(spec.plate_radius, plate_stiffness);

    let mut attempts = 0usize;
    let mut id = 0u32;
    for entry in &spec.archetypes {
        let archetype = table.get(&entry.name)?;
        for _ in 0..entry.count {
            let mut item = archetype.sample_item(&entry.name, id, &mut rng);
            let reach = spec.plate_radius - 0.5 * item.major_axis;
            loop {
                if attempts >= MAX_PLACEMENT_ATTEMPTS || reach < 0.0 {
                    return Err(Error::PlacementInfeasible {
                        attempts,
                        placed: plate.items.len(),
                        requested,
                    });
                }
                attempts += 1;
                let r = reach * rng.gen::<f64>().sqrt();
                let theta = rng.gen_range(0.0..std::f64::consts::TAU);
                item.center = [r * theta.cos(), r * theta.sin()];
                if plate.items.iter().all(|other| separated(other, &item)) {
                    break;
                }
            }
            plate.items.push(item);
            id += 1;
        }
    }
    Ok(plate)
}
