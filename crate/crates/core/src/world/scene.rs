//! Static scene description: floorplan, fixtures and acoustic materials.

use super::geometry::{point_segment_distance, Rect, Vec2};
use super::WorldError;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::Path;

pub const SCENE_SCHEMA_VERSION: u32 = 1;

/// Number of absorption/transmission bands every material carries.
pub const BAND_COUNT: usize = 4;

/// Height of door handles above the floor, meters.
pub const DOOR_HANDLE_HEIGHT: f64 = 1.0;

/// Height of sink faucet handles above the floor, meters.
pub const SINK_HANDLE_HEIGHT: f64 = 0.9;

/// Per-band absorption and transmission coefficients of a surface.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaterialProperties {
    pub absorption: Vec<f64>,
    pub transmission: Vec<f64>,
}

impl MaterialProperties {
    pub fn uniform(absorption: f64, transmission: f64) -> Self {
        Self {
            absorption: vec![absorption; BAND_COUNT],
            transmission: vec![transmission; BAND_COUNT],
        }
    }

    fn validate(&self, id: &str) -> Result<(), WorldError> {
        if self.absorption.len() != BAND_COUNT || self.transmission.len() != BAND_COUNT {
            return Err(WorldError::InvalidMaterial(format!(
                "{id}: expected {BAND_COUNT} bands"
            )));
        }
        for (a, t) in self.absorption.iter().zip(&self.transmission) {
            let in_unit = |v: f64| (0.0..=1.0).contains(&v);
            if !in_unit(*a) || !in_unit(*t) || a + t > 1.0 + 1e-12 {
                return Err(WorldError::InvalidMaterial(format!(
                    "{id}: absorption {a} / transmission {t} out of range"
                )));
            }
        }
        Ok(())
    }
}

/// Axis-aligned wall segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Wall {
    pub a: Vec2,
    pub b: Vec2,
    pub material: String,
}

impl Wall {
    pub fn new(a: Vec2, b: Vec2, material: impl Into<String>) -> Self {
        Self {
            a,
            b,
            material: material.into(),
        }
    }

    pub fn is_axis_aligned(&self) -> bool {
        self.a.x == self.b.x || self.a.y == self.b.y
    }

    pub fn footprint(&self) -> Rect {
        Rect::from_segment(self.a, self.b)
    }
}

/// A raised support surface (table, counter, shelf).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Receptacle {
    pub id: String,
    pub top: Rect,
    /// Surface height above the floor, meters.
    pub height: f64,
}

/// A hinged door. When closed the leaf spans `hinge..leaf_end`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DoorSpec {
    pub id: String,
    pub hinge: Vec2,
    pub leaf_end: Vec2,
    pub handle: Vec2,
    /// +1 when opening rotates the leaf counter-clockwise about the hinge, -1 otherwise.
    pub swing: f64,
    pub material: String,
}

impl DoorSpec {
    pub fn footprint(&self) -> Rect {
        Rect::from_segment(self.hinge, self.leaf_end)
    }

    pub fn width(&self) -> f64 {
        self.hinge.distance(self.leaf_end)
    }

    /// Unit normal pointing to the side the door is operated from.
    pub fn interaction_normal(&self) -> Vec2 {
        let along = (self.leaf_end - self.hinge) * (1.0 / self.width());
        along.perp() * self.swing
    }

    /// Handle position for a given leaf opening angle.
    pub fn handle_at(&self, angle: f64) -> Vec2 {
        self.hinge + (self.handle - self.hinge).rotate(self.swing * angle)
    }
}

/// A floor-standing sink with a rotary faucet handle.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SinkSpec {
    pub id: String,
    pub footprint: Rect,
    pub handle_pivot: Vec2,
    /// Direction the front of the sink faces, radians.
    pub facing: f64,
}

impl SinkSpec {
    /// Builds a square sink centered at `center` with its front toward `facing`
    /// (expected to be a multiple of pi/2).
    pub fn square(id: impl Into<String>, center: Vec2, size: f64, facing: f64) -> Self {
        let front = Vec2::from_angle(facing);
        Self {
            id: id.into(),
            footprint: Rect::centered(center, size, size),
            handle_pivot: center + front * (size / 2.0),
            facing,
        }
    }

    pub fn center(&self) -> Vec2 {
        self.footprint.center()
    }

    /// Width of the sink across its facing direction.
    pub fn frontal_width(&self) -> f64 {
        let f = Vec2::from_angle(self.facing);
        if f.x.abs() > f.y.abs() {
            self.footprint.height()
        } else {
            self.footprint.width()
        }
    }

    /// Rectangle of `depth` meters directly in front of the sink.
    pub fn frontal_region(&self, depth: f64) -> Rect {
        let f = Vec2::from_angle(self.facing);
        let r = &self.footprint;
        if f.x > 0.5 {
            Rect::new(r.max.x, r.min.y, r.max.x + depth, r.max.y)
        } else if f.x < -0.5 {
            Rect::new(r.min.x - depth, r.min.y, r.min.x, r.max.y)
        } else if f.y > 0.5 {
            Rect::new(r.min.x, r.max.y, r.max.x, r.max.y + depth)
        } else {
            Rect::new(r.min.x, r.min.y - depth, r.max.x, r.min.y)
        }
    }
}

/// Rectilinear indoor scene. Immutable once built; share behind `Arc`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scene {
    pub schema_version: u32,
    pub id: String,
    pub bounds: Rect,
    pub cell_size: f64,
    pub walls: Vec<Wall>,
    pub materials: BTreeMap<String, MaterialProperties>,
    #[serde(default)]
    pub receptacles: Vec<Receptacle>,
    #[serde(default)]
    pub doors: Vec<DoorSpec>,
    #[serde(default)]
    pub sinks: Vec<SinkSpec>,
}

impl Scene {
    /// Scene with the given bounds and no geometry.
    pub fn empty(id: impl Into<String>, width: f64, height: f64, cell_size: f64) -> Self {
        Self {
            schema_version: SCENE_SCHEMA_VERSION,
            id: id.into(),
            bounds: Rect::new(0.0, 0.0, width, height),
            cell_size,
            walls: Vec::new(),
            materials: BTreeMap::new(),
            receptacles: Vec::new(),
            doors: Vec::new(),
            sinks: Vec::new(),
        }
    }

    /// Closed rectangular room whose four walls lie on the bounds.
    pub fn rectangular_room(
        id: impl Into<String>,
        width: f64,
        height: f64,
        cell_size: f64,
        material: MaterialProperties,
    ) -> Self {
        let mut scene = Scene::empty(id, width, height, cell_size);
        scene.materials.insert("wall".into(), material);
        let c = [
            Vec2::new(0.0, 0.0),
            Vec2::new(width, 0.0),
            Vec2::new(width, height),
            Vec2::new(0.0, height),
        ];
        for i in 0..4 {
            scene.walls.push(Wall::new(c[i], c[(i + 1) % 4], "wall"));
        }
        scene
    }

    pub fn material(&self, id: &str) -> Option<&MaterialProperties> {
        self.materials.get(id)
    }

    pub fn validate(&self) -> Result<(), WorldError> {
        if self.schema_version != SCENE_SCHEMA_VERSION {
            return Err(WorldError::SchemaVersion(self.schema_version));
        }
        if !(self.bounds.area() > 0.0) {
            return Err(WorldError::DegenerateScene);
        }
        if !(self.cell_size > 0.0) || !self.cell_size.is_finite() {
            return Err(WorldError::InvalidCellSize(self.cell_size));
        }
        for (id, m) in &self.materials {
            m.validate(id)?;
        }
        let resolve = |id: &str| {
            if self.materials.contains_key(id) {
                Ok(())
            } else {
                Err(WorldError::UnknownMaterial(id.to_string()))
            }
        };
        let inside = |what: &str, r: &Rect| {
            if self.bounds.contains_rect(r) {
                Ok(())
            } else {
                Err(WorldError::OutsideBounds(what.to_string()))
            }
        };
        for (i, w) in self.walls.iter().enumerate() {
            resolve(&w.material)?;
            if !w.is_axis_aligned() {
                return Err(WorldError::NotAxisAligned(format!("wall {i}")));
            }
            inside(&format!("wall {i}"), &w.footprint())?;
        }
        for r in &self.receptacles {
            if !(r.height > 0.0) {
                return Err(WorldError::InvalidFixture(format!(
                    "receptacle {} has non-positive height",
                    r.id
                )));
            }
            inside(&r.id, &r.top)?;
        }
        for d in &self.doors {
            resolve(&d.material)?;
            if d.hinge.x != d.leaf_end.x && d.hinge.y != d.leaf_end.y {
                return Err(WorldError::NotAxisAligned(d.id.clone()));
            }
            if d.swing.abs() != 1.0 {
                return Err(WorldError::InvalidFixture(format!(
                    "door {} swing must be +1 or -1",
                    d.id
                )));
            }
            if point_segment_distance(d.handle, d.hinge, d.leaf_end) > 1e-9 {
                return Err(WorldError::InvalidFixture(format!(
                    "door {} handle is off the leaf",
                    d.id
                )));
            }
            inside(&d.id, &d.footprint())?;
        }
        for s in &self.sinks {
            inside(&s.id, &s.footprint)?;
        }
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self, WorldError> {
        let scene: Scene = serde_json::from_str(text)?;
        scene.validate()?;
        Ok(scene)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serializes")
    }

    pub fn load(path: &Path) -> Result<Self, WorldError> {
        let text = std::fs::read_to_string(path)?;
        Scene::from_json(&text)
    }

    pub fn save(&self, path: &Path) -> Result<(), WorldError> {
        std::fs::write(path, self.to_json())?;
        Ok(())
    }

    /// Stable content hash (SHA-256 of the canonical JSON, truncated).
    pub fn content_hash(&self) -> u64 {
        let bytes = serde_json::to_vec(self).expect("scene serializes");
        let digest = Sha256::digest(&bytes);
        u64::from_le_bytes(digest[..8].try_into().unwrap())
    }

    pub fn find_door(&self, id: &str) -> Option<&DoorSpec> {
        self.doors.iter().find(|d| d.id == id)
    }

    /// Receptacle whose top surface contains `p`, if any.
    pub fn receptacle_at(&self, p: Vec2) -> Option<&Receptacle> {
        self.receptacles.iter().find(|r| r.top.contains(p))
    }

    /// Footprints that block movement: walls, closed doors, sinks and receptacles.
    pub fn obstacle_footprints(&self) -> Vec<Rect> {
        let mut out: Vec<Rect> = self.walls.iter().map(Wall::footprint).collect();
        out.extend(self.doors.iter().map(DoorSpec::footprint));
        out.extend(self.sinks.iter().map(|s| s.footprint));
        out.extend(self.receptacles.iter().map(|r| r.top));
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn room() -> Scene {
        Scene::rectangular_room("r", 4.0, 3.0, 0.25, MaterialProperties::uniform(0.3, 0.0))
    }

    #[test]
    fn valid_room_passes() {
        room().validate().unwrap();
    }

    #[test]
    fn zero_area_is_degenerate() {
        let s = Scene::empty("z", 4.0, 0.0, 0.25);
        assert!(matches!(s.validate(), Err(WorldError::DegenerateScene)));
    }

    #[test]
    fn unknown_material_rejected() {
        let mut s = room();
        s.walls[0].material = "nope".into();
        assert!(matches!(s.validate(), Err(WorldError::UnknownMaterial(_))));
    }

    #[test]
    fn absorption_plus_transmission_bounded() {
        let mut s = room();
        s.materials
            .insert("bad".into(), MaterialProperties::uniform(0.7, 0.5));
        assert!(matches!(s.validate(), Err(WorldError::InvalidMaterial(_))));
    }

    #[test]
    fn door_handle_must_lie_on_leaf() {
        let mut s = room();
        s.doors.push(DoorSpec {
            id: "d".into(),
            hinge: Vec2::new(1.0, 0.0),
            leaf_end: Vec2::new(2.0, 0.0),
            handle: Vec2::new(1.8, 0.1),
            swing: 1.0,
            material: "wall".into(),
        });
        assert!(matches!(s.validate(), Err(WorldError::InvalidFixture(_))));
        s.doors[0].handle = Vec2::new(1.8, 0.0);
        s.validate().unwrap();
    }

    #[test]
    fn json_round_trip_and_hash_stable() {
        let s = room();
        let back = Scene::from_json(&s.to_json()).unwrap();
        assert_eq!(s, back);
        assert_eq!(s.content_hash(), back.content_hash());
        let mut other = room();
        other.id = "other".into();
        assert_ne!(s.content_hash(), other.content_hash());
    }

    #[test]
    fn sink_frontal_region_faces_front() {
        let s = SinkSpec::square("s", Vec2::new(2.0, 2.0), 0.4, 0.0);
        let r = s.frontal_region(0.8);
        assert_eq!(r, Rect::new(2.2, 1.8, 3.0, 2.2));
        assert_eq!(s.handle_pivot, Vec2::new(2.2, 2.0));
        assert!((s.frontal_width() - 0.4).abs() < 1e-12);
    }
}
