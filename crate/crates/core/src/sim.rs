//! Deterministic quasi-static push simulation.
//!
//! The gripper tip is a disc swept along a straight 10 cm line in small
//! substeps. After each advance, penetrations are projected out: the tip
//! displaces objects along the minimum-translation vector (with a lever-arm
//! rotation for polygons), then object pairs are separated in ascending-id
//! order. Bodies closer to the tip in the contact chain push; bodies further
//! along it move.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{cross, Contact, Footprint, Vec2};
use crate::scene::{normalize_angle, ObjectShape, Scene, SceneObject, PENETRATION_TOL_M};

pub const PUSH_LENGTH_M: f64 = 0.10;

/// Penetrations below this are considered resolved contact.
const CONTACT_SLOP_M: f64 = 1e-9;

#[derive(Debug, Error, PartialEq)]
pub enum SimError {
    #[error("object {a} and {b} overlap by {depth} m, nothing to resolve")]
    NotOverlapping { a: String, b: String, depth: f64 },
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PushAction {
    pub start: Vec2,
    pub end: Vec2,
}

impl PushAction {
    /// Push of the fixed length from `start` along `angle`.
    pub fn from_angle(start: Vec2, angle: f64) -> Self {
        let end = start + Vec2::new(angle.cos(), angle.sin()) * PUSH_LENGTH_M;
        Self { start, end }
    }

    pub fn direction(&self) -> Vec2 {
        (self.end - self.start).normalize()
    }

    /// Heading of the push in `[0, 2pi)`.
    pub fn angle(&self) -> f64 {
        let d = self.end - self.start;
        normalize_angle(d.y.atan2(d.x))
    }

    pub fn length(&self) -> f64 {
        (self.end - self.start).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TipSpec {
    pub radius: f64,
}

impl Default for TipSpec {
    fn default() -> Self {
        Self { radius: 0.005 }
    }
}

impl TipSpec {
    pub fn footprint_at(&self, p: Vec2) -> Footprint {
        Footprint::Disc { center: p, radius: self.radius }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub substep_m: f64,
    pub max_resolve_iters: usize,
    pub penetration_tol_m: f64,
    pub rotation_gain: f64,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            substep_m: 0.001,
            max_resolve_iters: 64,
            penetration_tol_m: PENETRATION_TOL_M,
            rotation_gain: 1.0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PushClass {
    Normal,
    StartCollision,
    EmptyPush,
}

/// Validity verdict for a push before it is executed.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PushValidity {
    Valid,
    StartCollision,
    EmptyPush,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PushOutcome {
    pub next_scene: Scene,
    pub contacted_ids: BTreeSet<u32>,
    pub out_of_workspace_ids: BTreeSet<u32>,
    pub classification: PushClass,
    /// Substeps actually simulated.
    pub substeps: usize,
    /// Set when resolution failed to converge and the push was cut short.
    pub truncated: bool,
}

impl PushOutcome {
    pub fn target_lost(&self, target_id: u32) -> bool {
        self.out_of_workspace_ids.contains(&target_id)
    }
}

/// True iff the two placed shapes overlap with positive area (beyond
/// floating-point contact noise).
pub fn collide(a: &Footprint, b: &Footprint) -> bool {
    a.contact(b).is_some_and(|c| c.depth > CONTACT_SLOP_M)
}

/// Smallest translation that, applied to `b`, removes its overlap with `a`.
pub fn min_translate_resolve(a: &Footprint, b: &Footprint) -> Result<Vec2, SimError> {
    match a.contact(b) {
        Some(c) => Ok(c.normal * c.depth),
        None => Err(SimError::NotOverlapping {
            a: format!("{:?}", a.centroid()),
            b: format!("{:?}", b.centroid()),
            depth: 0.0,
        }),
    }
}

fn corridor_hits(prints: &[Footprint], action: &PushAction, tip: &TipSpec) -> bool {
    let seg = [action.start, action.end];
    prints.iter().any(|f| f.distance_to_polygon(&seg) < tip.radius)
}

pub fn check_push_valid(scene: &Scene, action: &PushAction, tip: &TipSpec) -> PushValidity {
    let prints = scene.footprints();
    check_with_footprints(&prints, action, tip)
}

pub(crate) fn check_with_footprints(
    prints: &[Footprint],
    action: &PushAction,
    tip: &TipSpec,
) -> PushValidity {
    let tip_fp = tip.footprint_at(action.start);
    if prints.iter().any(|f| collide(&tip_fp, f)) {
        PushValidity::StartCollision
    } else if !corridor_hits(prints, action, tip) {
        PushValidity::EmptyPush
    } else {
        PushValidity::Valid
    }
}

struct Body {
    object: SceneObject,
    footprint: Footprint,
    /// Position in the contact chain; `u32::MAX` while untouched.
    rank: u32,
}

impl Body {
    fn moved(&self) -> bool {
        self.rank != u32::MAX
    }

    fn translate(&mut self, delta: Vec2) {
        self.object.pose.x += delta.x;
        self.object.pose.y += delta.y;
        match &mut self.footprint {
            Footprint::Disc { center, .. } => *center += delta,
            Footprint::Polygon { vertices, centroid } => {
                vertices.iter_mut().for_each(|v| *v += delta);
                *centroid += delta;
            }
        }
    }

    fn rotate_about_centroid(&mut self, dtheta: f64) {
        if dtheta == 0.0 || matches!(self.object.shape, ObjectShape::Disc { .. }) {
            return;
        }
        let c = self.object.centroid();
        let pos = self.object.pose.position();
        let rel = crate::geometry::rotate(&(pos - c), dtheta);
        self.object.pose.x = c.x + rel.x;
        self.object.pose.y = c.y + rel.y;
        self.object.pose.theta = normalize_angle(self.object.pose.theta + dtheta);
        self.footprint = self.object.footprint();
    }
}

fn lever_rotation(gain: f64, body: &Body, contact: &Contact) -> f64 {
    let r = contact.point - body.footprint.centroid();
    let r2 = r.norm_squared();
    if r2 < 1e-12 {
        return 0.0;
    }
    gain * cross(&r, &(contact.normal * contact.depth)) / r2
}

/// One projection pass sequence for a fixed tip position. Returns the
/// largest penetration left over.
fn resolve(bodies: &mut [Body], tip: &Footprint, cfg: &SimConfig, contacted: &mut BTreeSet<u32>) -> f64 {
    for _ in 0..cfg.max_resolve_iters {
        let mut worst = 0.0f64;
        for body in bodies.iter_mut() {
            if let Some(c) = tip.contact(&body.footprint) {
                if c.depth > CONTACT_SLOP_M {
                    worst = worst.max(c.depth);
                    let dtheta = lever_rotation(cfg.rotation_gain, body, &c);
                    body.translate(c.normal * c.depth);
                    body.rotate_about_centroid(dtheta);
                    body.rank = 0;
                    contacted.insert(body.object.id);
                }
            }
        }
        for i in 0..bodies.len() {
            for j in i + 1..bodies.len() {
                if !(bodies[i].moved() || bodies[j].moved()) {
                    continue;
                }
                let c = match bodies[i].footprint.contact(&bodies[j].footprint) {
                    Some(c) if c.depth > CONTACT_SLOP_M => c,
                    _ => continue,
                };
                worst = worst.max(c.depth);
                let push = c.normal * c.depth;
                let (ri, rj) = (bodies[i].rank, bodies[j].rank);
                if ri < rj {
                    bodies[j].translate(push);
                    bodies[j].rank = ri + 1;
                    contacted.insert(bodies[j].object.id);
                } else if rj < ri {
                    bodies[i].translate(-push);
                    bodies[i].rank = rj + 1;
                    contacted.insert(bodies[i].object.id);
                } else {
                    bodies[i].translate(-push * 0.5);
                    bodies[j].translate(push * 0.5);
                }
            }
        }
        if worst <= CONTACT_SLOP_M {
            return 0.0;
        }
    }
    residual_penetration(bodies, tip)
}

fn residual_penetration(bodies: &[Body], tip: &Footprint) -> f64 {
    let mut worst = 0.0f64;
    for (i, b) in bodies.iter().enumerate() {
        if let Some(c) = tip.contact(&b.footprint) {
            worst = worst.max(c.depth);
        }
        for other in &bodies[i + 1..] {
            if !(b.moved() || other.moved()) {
                continue;
            }
            if let Some(c) = b.footprint.contact(&other.footprint) {
                worst = worst.max(c.depth);
            }
        }
    }
    worst
}

/// Execute `action` on `scene`. Objects never reached by the contact chain
/// are copied unchanged; objects that end up not fully inside the workspace
/// are removed and reported.
pub fn simulate_push(scene: &Scene, action: &PushAction, tip: &TipSpec, cfg: &SimConfig) -> PushOutcome {
    let prints = scene.footprints();
    let unchanged = |classification| PushOutcome {
        next_scene: scene.clone(),
        contacted_ids: BTreeSet::new(),
        out_of_workspace_ids: BTreeSet::new(),
        classification,
        substeps: 0,
        truncated: false,
    };
    match check_with_footprints(&prints, action, tip) {
        PushValidity::StartCollision => return unchanged(PushClass::StartCollision),
        PushValidity::EmptyPush => return unchanged(PushClass::EmptyPush),
        PushValidity::Valid => {}
    }

    let mut bodies: Vec<Body> = scene
        .objects
        .iter()
        .cloned()
        .zip(prints)
        .map(|(object, footprint)| Body { object, footprint, rank: u32::MAX })
        .collect();
    let dir = action.direction();
    let length = action.length();
    let steps = (length / cfg.substep_m).ceil().max(1.0) as usize;
    let mut contacted = BTreeSet::new();
    let mut substeps = 0;
    let mut truncated = false;

    for k in 1..=steps {
        let tip_pos = if k == steps {
            action.end
        } else {
            action.start + dir * (cfg.substep_m * k as f64)
        };
        let tip_fp = tip.footprint_at(tip_pos);
        // resolving mutates only bodies the tip can reach through contacts;
        // keep a copy of their state to roll back a failed substep
        let snapshot: Vec<(SceneObject, Footprint, u32)> = bodies
            .iter()
            .map(|b| (b.object.clone(), b.footprint.clone(), b.rank))
            .collect();
        let contacted_before = contacted.clone();
        let residual = resolve(&mut bodies, &tip_fp, cfg, &mut contacted);
        if residual > cfg.penetration_tol_m {
            for (b, (o, f, r)) in bodies.iter_mut().zip(snapshot) {
                b.object = o;
                b.footprint = f;
                b.rank = r;
            }
            contacted = contacted_before;
            truncated = true;
            break;
        }
        substeps += 1;
    }

    let ws = scene.workspace;
    let mut out = BTreeSet::new();
    let mut objects = Vec::with_capacity(bodies.len());
    for b in bodies {
        if b.moved() {
            let (lo, hi) = b.footprint.aabb();
            if !(ws.contains(&lo) && ws.contains(&hi)) {
                out.insert(b.object.id);
                continue;
            }
        }
        objects.push(b.object);
    }
    PushOutcome {
        next_scene: Scene { workspace: ws, objects, target_id: scene.target_id },
        contacted_ids: contacted,
        out_of_workspace_ids: out,
        classification: PushClass::Normal,
        substeps,
        truncated,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene::{Pose, WorkspaceSpec};
    use approx::assert_abs_diff_eq;

    fn disc(id: u32, x: f64, y: f64, r: f64) -> SceneObject {
        SceneObject { id, shape: ObjectShape::Disc { radius: r }, pose: Pose::new(x, y, 0.0) }
    }

    fn scene(objects: Vec<SceneObject>) -> Scene {
        Scene::new(WorkspaceSpec::default(), objects, 0).unwrap()
    }

    fn max_penetration(s: &Scene) -> f64 {
        let f = s.footprints();
        let mut worst = 0.0f64;
        for i in 0..f.len() {
            for j in i + 1..f.len() {
                if let Some(c) = f[i].contact(&f[j]) {
                    worst = worst.max(c.depth);
                }
            }
        }
        worst
    }

    #[test]
    fn disc_pairs() {
        let a = Footprint::Disc { center: Vec2::zeros(), radius: 0.02 };
        let far = Footprint::Disc { center: Vec2::new(0.05, 0.0), radius: 0.02 };
        assert!(!collide(&a, &far));
        assert!(collide(&a, &a.clone()));
        let b = Footprint::Disc { center: Vec2::new(0.03, 0.0), radius: 0.02 };
        let v = min_translate_resolve(&a, &b).unwrap();
        assert_abs_diff_eq!(v.x, 0.01, epsilon = 1e-12);
        assert_abs_diff_eq!(v.y, 0.0, epsilon = 1e-12);
        let v = min_translate_resolve(&a, &a.clone()).unwrap();
        assert_abs_diff_eq!(v.norm(), 0.04, epsilon = 1e-12);
        assert!(v.x > 0.0);
        assert!(min_translate_resolve(&a, &far).is_err());
    }

    #[test]
    fn square_disc_resolve() {
        let sq = SceneObject {
            id: 0,
            shape: ObjectShape::rectangle(0.04, 0.04),
            pose: Pose::new(0.2, 0.2, 0.0),
        }
        .footprint();
        let d = Footprint::Disc { center: Vec2::new(0.239, 0.2), radius: 0.02 };
        let v = min_translate_resolve(&sq, &d).unwrap();
        assert_abs_diff_eq!(v.norm(), 0.001, epsilon = 1e-9);
    }

    #[test]
    fn validity_classes() {
        let s = scene(vec![disc(0, 0.2, 0.2, 0.02)]);
        let tip = TipSpec::default();
        let inside = PushAction::from_angle(Vec2::new(0.2, 0.2), 0.0);
        assert_eq!(check_push_valid(&s, &inside, &tip), PushValidity::StartCollision);
        let empty = PushAction::from_angle(Vec2::new(0.05, 0.05), 0.0);
        assert_eq!(check_push_valid(&s, &empty, &tip), PushValidity::EmptyPush);
        // passes 18 mm below the centre: tip edge reaches 13 mm, inside the 20 mm radius
        let clip = PushAction::from_angle(Vec2::new(0.12, 0.182), 0.0);
        assert_eq!(check_push_valid(&s, &clip, &tip), PushValidity::Valid);
    }

    #[test]
    fn empty_push_leaves_scene() {
        let s = scene(vec![disc(0, 0.2, 0.2, 0.02)]);
        let a = PushAction::from_angle(Vec2::new(0.05, 0.05), 0.0);
        let out = simulate_push(&s, &a, &TipSpec::default(), &SimConfig::default());
        assert_eq!(out.classification, PushClass::EmptyPush);
        assert_eq!(out.next_scene, s);
    }

    #[test]
    fn dead_centre_push_translates() {
        let s = scene(vec![disc(0, 0.2, 0.2, 0.02)]);
        let tip = TipSpec::default();
        let a = PushAction::from_angle(Vec2::new(0.2 - 0.02 - tip.radius, 0.2), 0.0);
        let out = simulate_push(&s, &a, &tip, &SimConfig::default());
        let p = out.next_scene.objects[0].pose;
        assert!((p.x - 0.3).abs() < 1e-3, "{p:?}");
        assert!((p.y - 0.2).abs() < 1e-9);
        assert_eq!(p.theta, 0.0);
        assert_eq!(out.substeps, 100);
        assert!(out.contacted_ids.contains(&0));
    }

    #[test]
    fn chain_push_and_locality() {
        let s = scene(vec![
            disc(0, 0.2, 0.2, 0.02),
            disc(1, 0.241, 0.2, 0.02),
            disc(2, 0.1, 0.35, 0.02),
        ]);
        let tip = TipSpec::default();
        let a = PushAction::from_angle(Vec2::new(0.174, 0.2), 0.0);
        let out = simulate_push(&s, &a, &tip, &SimConfig::default());
        assert_eq!(out.contacted_ids, [0, 1].into_iter().collect());
        assert_eq!(out.next_scene.objects[2], s.objects[2]);
        assert!(out.next_scene.objects[1].pose.x > 0.3);
        assert!(max_penetration(&out.next_scene) <= PENETRATION_TOL_M);
    }

    #[test]
    fn off_centre_box_rotates() {
        let s = Scene::new(
            WorkspaceSpec::default(),
            vec![SceneObject { id: 0, shape: ObjectShape::rectangle(0.04, 0.04), pose: Pose::new(0.2, 0.2, 0.0) }],
            0,
        )
        .unwrap();
        let a = PushAction::from_angle(Vec2::new(0.17, 0.213), 0.0);
        let out = simulate_push(&s, &a, &TipSpec::default(), &SimConfig::default());
        let p = out.next_scene.objects[0].pose;
        assert!(p.theta != 0.0);
        // pushing above the centroid turns the box clockwise
        assert!(p.theta > std::f64::consts::PI);
    }

    #[test]
    fn edge_push_ejects() {
        let s = scene(vec![disc(0, 0.4, 0.2, 0.02), disc(1, 0.1, 0.1, 0.02)]);
        let a = PushAction::from_angle(Vec2::new(0.374, 0.2), 0.0);
        let out = simulate_push(&s, &a, &TipSpec::default(), &SimConfig::default());
        assert!(out.target_lost(0));
        assert!(out.next_scene.object(0).is_none());
        assert_eq!(out.next_scene.objects.len(), 1);
    }

    #[test]
    fn small_direction_change_misses() {
        let s = scene(vec![disc(0, 0.3, 0.2, 0.02)]);
        let tip = TipSpec::default();
        let start = Vec2::new(0.2, 0.2);
        // the disc subtends ~14 degrees at 10 cm; a 1.9 degree change crosses its silhouette
        let edge = (0.025f64 / 0.1).asin();
        let hit = PushAction::from_angle(start, edge - 0.017);
        let miss = PushAction::from_angle(start, edge + 0.017);
        assert_eq!(check_push_valid(&s, &hit, &tip), PushValidity::Valid);
        assert_eq!(check_push_valid(&s, &miss, &tip), PushValidity::EmptyPush);
        let moved = simulate_push(&s, &hit, &tip, &SimConfig::default());
        assert_ne!(moved.next_scene, s);
    }
}
