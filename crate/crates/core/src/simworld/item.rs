use serde::{Deserialize, Serialize};

use super::material::{piecewise_force, ComplianceClass, MaterialProfile};
use crate::error::{Error, Result};

/// Rendered look of an item. Paired archetypes share these distributions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Appearance {
    pub base_hue: f64,
    pub saturation: f64,
    pub shape_eccentricity: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoodItem {
    pub id: u32,
    pub center: [f64; 2],
    pub height: f64,
    pub major_axis: f64,
    pub minor_axis: f64,
    pub axis_angle: f64,
    pub material: MaterialProfile,
    pub appearance: Appearance,
    pub archetype: String,
    /// Height a depth camera would report for this archetype.
    pub nominal_height: f64,
}

impl FoodItem {
    /// Item-frame coordinates of a world point, along (major, minor) axes.
    fn local(&self, p: [f64; 2]) -> (f64, f64) {
        let dx = p[0] - self.center[0];
        let dy = p[1] - self.center[1];
        let (s, c) = self.axis_angle.sin_cos();
        (dx * c + dy * s, -dx * s + dy * c)
    }

    /// Normalized elliptical radius; `<= 1` inside the footprint.
    pub fn radial_fraction(&self, p: [f64; 2]) -> f64 {
        let (u, v) = self.local(p);
        let a = 0.5 * self.major_axis;
        let b = 0.5 * self.minor_axis;
        ((u / a).powi(2) + (v / b).powi(2)).sqrt()
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.radial_fraction(p) <= 1.0
    }

    pub fn local_stiffness(&self, p: [f64; 2]) -> f64 {
        self.material.stiffness_at(self.radial_fraction(p))
    }

    pub fn compliance(&self) -> ComplianceClass {
        self.material.compliance_class
    }

    /// Half-extents of the axis-aligned bounding box of the footprint (m).
    pub fn aabb_half_extents(&self) -> [f64; 2] {
        let a = 0.5 * self.major_axis;
        let b = 0.5 * self.minor_axis;
        let (s, c) = self.axis_angle.sin_cos();
        [
            ((a * c).powi(2) + (b * s).powi(2)).sqrt(),
            ((a * s).powi(2) + (b * c).powi(2)).sqrt(),
        ]
    }

    /// World point at a given radial fraction along the major axis.
    pub fn point_at_radial_fraction(&self, r: f64) -> [f64; 2] {
        let (s, c) = self.axis_angle.sin_cos();
        let d = r * 0.5 * self.major_axis;
        [self.center[0] + d * c, self.center[1] + d * s]
    }
}

/// Contact force between the fork tip and `item` at `contact_point`, with
/// `penetration` measured down from the item's top surface. Points outside
/// the footprint see no item force.
pub fn contact_force(item: &FoodItem, contact_point: [f64; 2], penetration: f64, plate_stiffness: f64) -> f64 {
    if !item.contains(contact_point) || penetration <= 0.0 {
        return 0.0;
    }
    piecewise_force(
        item.local_stiffness(contact_point),
        item.material.fracture_force,
        penetration,
        item.height,
        plate_stiffness,
    )
}

pub const PLATE_Z: f64 = 0.0;
pub const MAX_ITEMS: usize = 12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlateState {
    pub items: Vec<FoodItem>,
    pub plate_radius: f64,
    pub plate_z: f64,
    pub plate_stiffness: f64,
}

impl PlateState {
    pub fn empty(plate_radius: f64, plate_stiffness: f64) -> Self {
        PlateState {
            items: Vec::new(),
            plate_radius,
            plate_z: PLATE_Z,
            plate_stiffness,
        }
    }

    pub fn item(&self, id: u32) -> Option<&FoodItem> {
        self.items.iter().find(|i| i.id == id)
    }

    pub fn item_at(&self, p: [f64; 2]) -> Option<&FoodItem> {
        self.items.iter().find(|i| i.contains(p))
    }

    /// Top surface height under `p`.
    pub fn surface_z(&self, p: [f64; 2]) -> f64 {
        self.item_at(p).map_or(self.plate_z, |i| self.plate_z + i.height)
    }

    /// Height a depth sensor would report under `p`, using archetype
    /// nominal heights.
    pub fn depth_z(&self, p: [f64; 2]) -> f64 {
        self.item_at(p)
            .map_or(self.plate_z, |i| self.plate_z + i.nominal_height)
    }

    /// Force on a fork tip at `(p, z)`, item or bare plate.
    pub fn force_at(&self, p: [f64; 2], z: f64) -> f64 {
        match self.item_at(p) {
            Some(item) => contact_force(item, p, self.plate_z + item.height - z, self.plate_stiffness),
            None => self.plate_stiffness * (self.plate_z - z).max(0.0),
        }
    }

    pub fn nearest_item(&self, p: [f64; 2]) -> Option<&FoodItem> {
        self.items
            .iter()
            .min_by(|a, b| dist2(a.center, p).total_cmp(&dist2(b.center, p)))
    }

    /// Non-overlap and containment checks.
    pub fn validate(&self) -> Result<()> {
        if self.items.len() > MAX_ITEMS {
            return Err(Error::Config(format!(
                "{} items exceeds the {MAX_ITEMS}-item limit",
                self.items.len()
            )));
        }
        for (i, a) in self.items.iter().enumerate() {
            a.material.validate()?;
            if dist2(a.center, [0.0; 2]).sqrt() + 0.5 * a.major_axis > self.plate_radius + 1e-12 {
                return Err(Error::Config(format!("item {} leaves the plate", a.id)));
            }
            for b in &self.items[i + 1..] {
                if !separated(a, b) {
                    return Err(Error::Config(format!("items {} and {} overlap", a.id, b.id)));
                }
            }
        }
        Ok(())
    }
}

pub fn dist2(a: [f64; 2], b: [f64; 2]) -> f64 {
    (a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)
}

/// Center distance exceeds the sum of the minor semi-axes.
pub fn separated(a: &FoodItem, b: &FoodItem) -> bool {
    dist2(a.center, b.center).sqrt() > 0.5 * (a.minor_axis + b.minor_axis)
}

/// Takes `id` off the plate, leaving every other item untouched.
pub fn remove_item(plate: &PlateState, id: u32) -> Result<PlateState> {
    let idx = plate
        .items
        .iter()
        .position(|i| i.id == id)
        .ok_or(Error::ItemNotFound(id))?;
    let mut next = plate.clone();
    next.items.remove(idx);
    Ok(next)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ForkState {
    /// Tine midpoint in world coordinates (m).
    pub position: [f64; 3],
    pub pitch: f64,
    pub roll: f64,
    pub tine_engagement_depth: f64,
    pub tines_inserted: u8,
    /// Tine midpoint relative to the wrist camera's optical axis (m).
    /// Repeated skewering shifts the fork in its mount.
    pub mount_offset: [f64; 2],
}

impl ForkState {
    pub fn at(position: [f64; 3]) -> Self {
        ForkState {
            position,
            pitch: 0.0,
            roll: 0.0,
            tine_engagement_depth: 0.0,
            tines_inserted: 0,
            mount_offset: [0.0; 2],
        }
    }

    pub fn xy(&self) -> [f64; 2] {
        [self.position[0], self.position[1]]
    }

    /// Wrist camera optical center projected on the plate.
    pub fn camera_center(&self) -> [f64; 2] {
        [
            self.position[0] - self.mount_offset[0],
            self.position[1] - self.mount_offset[1],
        ]
    }
}
