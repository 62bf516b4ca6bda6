//! Workspace, objects and scenes, with validation and the `scene/v1` file
//! format.

use std::collections::HashSet;
use std::f64::consts::TAU;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cross, polygon_centroid, rotate, signed_area, Footprint, Vec2};

pub const SCENE_FORMAT: &str = "scene/v1";

/// Maximum allowed interpenetration between two objects of a valid scene.
pub const PENETRATION_TOL_M: f64 = 1e-4;

#[derive(Debug, Error)]
pub enum SceneError {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported scene format {found:?}, expected {SCENE_FORMAT:?}")]
    Version { found: String },
    #[error("invalid workspace: {0}")]
    Workspace(String),
    #[error("duplicate id {0}")]
    DuplicateId(u32),
    #[error("target {0} missing")]
    TargetMissing(u32),
    #[error("object {id}: invalid shape: {reason}")]
    Shape { id: u32, reason: String },
    #[error("object {id}: invalid pose: {reason}")]
    Pose { id: u32, reason: String },
    #[error("object {0} is not fully inside the workspace")]
    OutsideWorkspace(u32),
    #[error("objects {a} and {b}: penetration exceeds tolerance ({depth:.6} m)")]
    Penetration { a: u32, b: u32, depth: f64 },
    #[error("point ({x}, {y}) is outside the workspace")]
    PointOutside { x: f64, y: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WorkspaceSpec {
    pub side_m: f64,
    pub grid_n: usize,
}

impl Default for WorkspaceSpec {
    fn default() -> Self {
        Self { side_m: 0.448, grid_n: 224 }
    }
}

/// Grid cell index; `row` follows world y, `col` follows world x.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub row: usize,
    pub col: usize,
}

impl WorkspaceSpec {
    pub fn cell_size(&self) -> f64 {
        self.side_m / self.grid_n as f64
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.side_m / 2.0, self.side_m / 2.0)
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        (0.0..=self.side_m).contains(&p.x) && (0.0..=self.side_m).contains(&p.y)
    }

    pub fn world_to_grid(&self, p: &Vec2) -> Result<Cell, SceneError> {
        if !self.contains(p) {
            return Err(SceneError::PointOutside { x: p.x, y: p.y });
        }
        let h = self.cell_size();
        let last = self.grid_n - 1;
        Ok(Cell {
            row: ((p.y / h).floor() as usize).min(last),
            col: ((p.x / h).floor() as usize).min(last),
        })
    }

    /// World position of the cell centre.
    pub fn grid_to_world(&self, cell: Cell) -> Vec2 {
        let h = self.cell_size();
        Vec2::new((cell.col as f64 + 0.5) * h, (cell.row as f64 + 0.5) * h)
    }

    fn validate(&self) -> Result<(), SceneError> {
        if !(self.side_m.is_finite() && self.side_m > 0.0) {
            return Err(SceneError::Workspace(format!("side_m must be > 0, got {}", self.side_m)));
        }
        if self.grid_n == 0 {
            return Err(SceneError::Workspace("grid_n must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum ObjectShape {
    Disc { radius: f64 },
    /// Counter-clockwise, strictly convex vertices in the body frame.
    ConvexPolygon { vertices: Vec<Vec2> },
}

impl ObjectShape {
    pub fn rectangle(width: f64, height: f64) -> Self {
        let (w, h) = (width / 2.0, height / 2.0);
        ObjectShape::ConvexPolygon {
            vertices: vec![
                Vec2::new(-w, -h),
                Vec2::new(w, -h),
                Vec2::new(w, h),
                Vec2::new(-w, h),
            ],
        }
    }

    /// Regular polygon with `sides` vertices on a circle of `circumradius`.
    pub fn regular(sides: usize, circumradius: f64) -> Self {
        let vertices = (0..sides)
            .map(|k| {
                let a = TAU * k as f64 / sides as f64;
                Vec2::new(circumradius * a.cos(), circumradius * a.sin())
            })
            .collect();
        ObjectShape::ConvexPolygon { vertices }
    }

    /// Centroid in the body frame.
    pub fn body_centroid(&self) -> Vec2 {
        match self {
            ObjectShape::Disc { .. } => Vec2::zeros(),
            ObjectShape::ConvexPolygon { vertices } => polygon_centroid(vertices),
        }
    }

    fn validate(&self) -> Result<(), String> {
        match self {
            ObjectShape::Disc { radius } => {
                if !(radius.is_finite() && *radius > 0.0) {
                    return Err(format!("disc radius must be > 0, got {radius}"));
                }
            }
            ObjectShape::ConvexPolygon { vertices } => {
                if vertices.len() < 3 {
                    return Err("polygon needs at least 3 vertices".into());
                }
                if vertices.iter().any(|v| !(v.x.is_finite() && v.y.is_finite())) {
                    return Err("non-finite vertex".into());
                }
                if signed_area(vertices) <= 0.0 {
                    return Err("polygon vertices must be counter-clockwise".into());
                }
                let n = vertices.len();
                for i in 0..n {
                    let a = vertices[i];
                    let b = vertices[(i + 1) % n];
                    let c = vertices[(i + 2) % n];
                    if cross(&(b - a), &(c - b)) <= 0.0 {
                        return Err("polygon must be strictly convex".into());
                    }
                }
            }
        }
        Ok(())
    }
}

pub fn normalize_angle(theta: f64) -> f64 {
    let t = theta.rem_euclid(TAU);
    if t >= TAU {
        0.0
    } else {
        t
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pose {
    pub x: f64,
    pub y: f64,
    pub theta: f64,
}

impl Pose {
    pub fn new(x: f64, y: f64, theta: f64) -> Self {
        Self { x, y, theta: normalize_angle(theta) }
    }

    pub fn position(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    pub fn apply(&self, v: &Vec2) -> Vec2 {
        self.position() + rotate(v, self.theta)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SceneObject {
    pub id: u32,
    pub shape: ObjectShape,
    pub pose: Pose,
}

impl SceneObject {
    pub fn footprint(&self) -> Footprint {
        match &self.shape {
            ObjectShape::Disc { radius } => Footprint::Disc {
                center: self.pose.position(),
                radius: *radius,
            },
            ObjectShape::ConvexPolygon { vertices } => Footprint::Polygon {
                vertices: vertices.iter().map(|v| self.pose.apply(v)).collect(),
                centroid: self.pose.apply(&self.shape.body_centroid()),
            },
        }
    }

    pub fn centroid(&self) -> Vec2 {
        self.pose.apply(&self.shape.body_centroid())
    }
}

/// A workspace with rigid objects, one of which is the retrieval target.
/// Objects are kept in ascending id order.
#[derive(Clone, Debug, PartialEq)]
pub struct Scene {
    pub workspace: WorkspaceSpec,
    pub objects: Vec<SceneObject>,
    pub target_id: u32,
}

impl Scene {
    /// Build and validate a scene. Objects are sorted by id.
    pub fn new(
        workspace: WorkspaceSpec,
        mut objects: Vec<SceneObject>,
        target_id: u32,
    ) -> Result<Self, SceneError> {
        objects.sort_by_key(|o| o.id);
        let scene = Scene { workspace, objects, target_id };
        scene.validate()?;
        Ok(scene)
    }

    pub fn object(&self, id: u32) -> Option<&SceneObject> {
        self.objects
            .binary_search_by_key(&id, |o| o.id)
            .ok()
            .map(|i| &self.objects[i])
    }

    pub fn target(&self) -> Option<&SceneObject> {
        self.object(self.target_id)
    }

    pub fn footprints(&self) -> Vec<Footprint> {
        self.objects.iter().map(SceneObject::footprint).collect()
    }

    /// Returns the same arrangement with a different target.
    pub fn with_target(&self, target_id: u32) -> Result<Self, SceneError> {
        if self.object(target_id).is_none() {
            return Err(SceneError::TargetMissing(target_id));
        }
        Ok(Scene { target_id, ..self.clone() })
    }

    /// Checks every scene invariant and reports the first violation.
    pub fn validate(&self) -> Result<(), SceneError> {
        self.workspace.validate()?;
        let mut seen = HashSet::new();
        for o in &self.objects {
            if !seen.insert(o.id) {
                return Err(SceneError::DuplicateId(o.id));
            }
        }
        if !self.objects.windows(2).all(|w| w[0].id < w[1].id) {
            return Err(SceneError::Parse("objects must be sorted by id".into()));
        }
        if !seen.contains(&self.target_id) {
            return Err(SceneError::TargetMissing(self.target_id));
        }
        for o in &self.objects {
            o.shape
                .validate()
                .map_err(|reason| SceneError::Shape { id: o.id, reason })?;
            let p = o.pose;
            if !(p.x.is_finite() && p.y.is_finite()) {
                return Err(SceneError::Pose { id: o.id, reason: "non-finite position".into() });
            }
            if !(0.0..TAU).contains(&p.theta) {
                return Err(SceneError::Pose {
                    id: o.id,
                    reason: format!("theta {} not in [0, 2pi)", p.theta),
                });
            }
        }
        let prints = self.footprints();
        for (o, f) in self.objects.iter().zip(&prints) {
            let (lo, hi) = f.aabb();
            if !(self.workspace.contains(&lo) && self.workspace.contains(&hi)) {
                return Err(SceneError::OutsideWorkspace(o.id));
            }
        }
        for i in 0..prints.len() {
            for j in i + 1..prints.len() {
                if let Some(c) = prints[i].contact(&prints[j]) {
                    if c.depth > PENETRATION_TOL_M {
                        return Err(SceneError::Penetration {
                            a: self.objects[i].id,
                            b: self.objects[j].id,
                            depth: c.depth,
                        });
                    }
                }
            }
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct ShapeRecord {
    kind: String,
    params: Vec<f64>,
}

#[derive(Serialize, Deserialize)]
struct ObjectRecord {
    id: u32,
    shape: ShapeRecord,
    pose: Pose,
}

#[derive(Serialize, Deserialize)]
struct SceneRecord {
    format: String,
    workspace: WorkspaceSpec,
    objects: Vec<ObjectRecord>,
    target_id: u32,
}

impl From<&ObjectShape> for ShapeRecord {
    fn from(shape: &ObjectShape) -> Self {
        match shape {
            ObjectShape::Disc { radius } => ShapeRecord { kind: "disc".into(), params: vec![*radius] },
            ObjectShape::ConvexPolygon { vertices } => ShapeRecord {
                kind: "polygon".into(),
                params: vertices.iter().flat_map(|v| [v.x, v.y]).collect(),
            },
        }
    }
}

impl TryFrom<ShapeRecord> for ObjectShape {
    type Error = String;

    fn try_from(rec: ShapeRecord) -> Result<Self, String> {
        match rec.kind.as_str() {
            "disc" => match rec.params.as_slice() {
                [r] => Ok(ObjectShape::Disc { radius: *r }),
                _ => Err("disc takes exactly one parameter (radius)".into()),
            },
            "polygon" => {
                if !rec.params.len().is_multiple_of(2) {
                    return Err("polygon params must be x,y pairs".into());
                }
                let vertices = rec.params.chunks(2).map(|c| Vec2::new(c[0], c[1])).collect();
                Ok(ObjectShape::ConvexPolygon { vertices })
            }
            other => Err(format!("unknown shape kind {other:?}")),
        }
    }
}

impl Serialize for Scene {
    fn serialize<S: serde::Serializer>(&self, serializer: S) -> Result<S::Ok, S::Error> {
        SceneRecord {
            format: SCENE_FORMAT.into(),
            workspace: self.workspace,
            objects: self
                .objects
                .iter()
                .map(|o| ObjectRecord { id: o.id, shape: (&o.shape).into(), pose: o.pose })
                .collect(),
            target_id: self.target_id,
        }
        .serialize(serializer)
    }
}

impl Scene {
    /// Parse and validate a `scene/v1` document.
    pub fn from_json(text: &str) -> Result<Self, SceneError> {
        let rec: SceneRecord =
            serde_json::from_str(text).map_err(|e| SceneError::Parse(e.to_string()))?;
        Self::from_record(rec)
    }

    fn from_record(rec: SceneRecord) -> Result<Self, SceneError> {
        if rec.format != SCENE_FORMAT {
            return Err(SceneError::Version { found: rec.format });
        }
        let mut objects = Vec::with_capacity(rec.objects.len());
        for o in rec.objects {
            let shape = ObjectShape::try_from(o.shape)
                .map_err(|reason| SceneError::Shape { id: o.id, reason })?;
            objects.push(SceneObject { id: o.id, shape, pose: o.pose });
        }
        // duplicate ids must be reported before sorting hides the order
        let mut seen = HashSet::new();
        for o in &objects {
            if !seen.insert(o.id) {
                return Err(SceneError::DuplicateId(o.id));
            }
        }
        Scene::new(rec.workspace, objects, rec.target_id)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scene serialization cannot fail")
    }
}

impl<'de> Deserialize<'de> for Scene {
    fn deserialize<D: serde::Deserializer<'de>>(deserializer: D) -> Result<Self, D::Error> {
        let rec = SceneRecord::deserialize(deserializer)?;
        Scene::from_record(rec).map_err(serde::de::Error::custom)
    }
}

pub fn load_scene(path: impl AsRef<Path>) -> Result<Scene, SceneError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Scene::from_json(&text)
}

pub fn save_scene(scene: &Scene, path: impl AsRef<Path>) -> Result<(), SceneError> {
    let path = path.as_ref();
    fs::write(path, scene.to_json() + "\n").map_err(|source| SceneError::Io {
        path: path.display().to_string(),
        source,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn disc(id: u32, x: f64, y: f64, r: f64) -> SceneObject {
        SceneObject { id, shape: ObjectShape::Disc { radius: r }, pose: Pose::new(x, y, 0.0) }
    }

    #[test]
    fn minimal_scene_loads() {
        let text = r#"{"format":"scene/v1","workspace":{"side_m":0.448,"grid_n":224},
            "objects":[{"id":0,"shape":{"kind":"disc","params":[0.02]},"pose":{"x":0.2,"y":0.2,"theta":0.0}}],
            "target_id":0}"#;
        let s = Scene::from_json(text).unwrap();
        assert_eq!(s.objects.len(), 1);
    }

    #[test]
    fn duplicate_id_rejected() {
        let ws = WorkspaceSpec::default();
        let err = Scene::new(ws, vec![disc(1, 0.1, 0.1, 0.02), disc(1, 0.3, 0.3, 0.02)], 1)
            .unwrap_err();
        assert!(err.to_string().contains("duplicate id"), "{err}");
    }

    #[test]
    fn penetration_rejected() {
        // centres 35 mm apart, radius sum 40 mm: 5 mm overlap
        let ws = WorkspaceSpec::default();
        let err = Scene::new(ws, vec![disc(0, 0.2, 0.2, 0.02), disc(1, 0.235, 0.2, 0.02)], 0)
            .unwrap_err();
        assert!(err.to_string().contains("penetration exceeds tolerance"), "{err}");
        // 0.05 mm overlap is within tolerance
        Scene::new(ws, vec![disc(0, 0.2, 0.2, 0.02), disc(1, 0.23995, 0.2, 0.02)], 0).unwrap();
    }

    #[test]
    fn other_invariants() {
        let ws = WorkspaceSpec::default();
        assert!(matches!(
            Scene::new(ws, vec![disc(0, 0.2, 0.2, 0.02)], 3),
            Err(SceneError::TargetMissing(3))
        ));
        assert!(matches!(
            Scene::new(ws, vec![disc(0, 0.01, 0.2, 0.02)], 0),
            Err(SceneError::OutsideWorkspace(0))
        ));
        let cw = SceneObject {
            id: 0,
            shape: ObjectShape::ConvexPolygon {
                vertices: vec![Vec2::new(0.0, 0.0), Vec2::new(0.0, 0.01), Vec2::new(0.01, 0.0)],
            },
            pose: Pose::new(0.2, 0.2, 0.0),
        };
        assert!(matches!(Scene::new(ws, vec![cw], 0), Err(SceneError::Shape { .. })));
    }

    #[test]
    fn version_header_checked() {
        let text = r#"{"format":"scene/v0","workspace":{"side_m":0.448,"grid_n":224},"objects":[],"target_id":0}"#;
        assert!(matches!(Scene::from_json(text), Err(SceneError::Version { .. })));
    }

    #[test]
    fn grid_conversions() {
        let ws = WorkspaceSpec::default();
        assert_eq!(ws.world_to_grid(&Vec2::new(0.0, 0.0)).unwrap(), Cell { row: 0, col: 0 });
        assert_eq!(ws.world_to_grid(&ws.center()).unwrap(), Cell { row: 112, col: 112 });
        assert!(ws.world_to_grid(&Vec2::new(-0.001, 0.1)).is_err());
        assert!(ws.world_to_grid(&Vec2::new(0.1, 0.5)).is_err());
    }

    #[test]
    fn save_to_unwritable_path_fails() {
        let ws = WorkspaceSpec::default();
        let s = Scene::new(ws, vec![disc(0, 0.2, 0.2, 0.02)], 0).unwrap();
        let err = save_scene(&s, "/nonexistent-dir/x/scene.json").unwrap_err();
        assert!(matches!(err, SceneError::Io { .. }));
    }

    #[test]
    fn theta_normalized() {
        let p = Pose::new(0.0, 0.0, -0.5);
        assert!((p.theta - (TAU - 0.5)).abs() < 1e-12);
        assert_eq!(Pose::new(0.0, 0.0, TAU).theta, 0.0);
    }
}
