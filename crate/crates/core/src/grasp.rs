//! Geometric grasp feasibility for a top-down parallel-jaw gripper.
//!
//! A grasp is scored by the clearance between its two finger footprints and
//! every non-target object: zero on contact, rising linearly to one at
//! `clearance_full_m`. Each target-mask cell is scored at its four sub-cell
//! centres (a lattice twice as fine as the grid) for 16 closing orientations,
//! and keeps the best.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{oriented_rect, Footprint, Vec2};
use crate::par::{self, Execution};
use crate::scene::{Cell, Scene, WorkspaceSpec};

pub const GRASP_BINS: usize = 16;

#[derive(Debug, Error, PartialEq)]
pub enum GraspError {
    #[error("target {0} missing")]
    TargetMissing(u32),
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GripperSpec {
    pub opening_m: f64,
    pub finger_len_m: f64,
    pub finger_thick_m: f64,
}

impl Default for GripperSpec {
    fn default() -> Self {
        Self { opening_m: 0.085, finger_len_m: 0.02, finger_thick_m: 0.01 }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    pub r_gstar: f64,
    pub delta: f64,
    pub clearance_full_m: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        Self { r_gstar: 0.5, delta: 0.2, clearance_full_m: 0.01 }
    }
}

impl OracleConfig {
    /// Largest reward a terminal state can produce.
    pub fn eta(&self) -> f64 {
        1.0 + self.delta
    }

    pub fn reward_from_max(&self, max_score: f64) -> f64 {
        let hit = if max_score > self.r_gstar { 1.0 } else { 0.0 };
        hit + self.delta * max_score
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct GraspAction {
    pub x: f64,
    pub y: f64,
    pub theta_bin: usize,
}

impl GraspAction {
    pub fn theta(&self) -> f64 {
        self.theta_bin as f64 * TAU / GRASP_BINS as f64
    }

    pub fn center(&self) -> Vec2 {
        Vec2::new(self.x, self.y)
    }

    /// Finger footprints as CCW rectangles.
    pub fn fingers(&self, gripper: &GripperSpec) -> [[Vec2; 4]; 2] {
        let u = Vec2::new(self.theta().cos(), self.theta().sin());
        finger_rects(&self.center(), &u, gripper)
    }
}

fn finger_rects(center: &Vec2, u: &Vec2, g: &GripperSpec) -> [[Vec2; 4]; 2] {
    let off = u * (g.opening_m / 2.0);
    [
        oriented_rect(&(center + off), u, g.finger_thick_m / 2.0, g.finger_len_m / 2.0),
        oriented_rect(&(center - off), u, g.finger_thick_m / 2.0, g.finger_len_m / 2.0),
    ]
}

/// Per-(cell, orientation) grasp scores, stored only for target-mask cells.
#[derive(Clone, Debug, PartialEq)]
pub struct GraspScoreMap {
    pub grid_n: usize,
    /// Target-mask cells in row-major order with their 16 scores.
    pub entries: Vec<(Cell, [f64; GRASP_BINS])>,
    /// Grasp centre behind each score, parallel to `entries`.
    pub centers: Vec<[Vec2; GRASP_BINS]>,
}

impl GraspScoreMap {
    pub fn get(&self, cell: Cell, bin: usize) -> f64 {
        self.entries
            .binary_search_by(|(c, _)| c.cmp(&cell))
            .map(|i| self.entries[i].1[bin])
            .unwrap_or(0.0)
    }

    pub fn max(&self) -> f64 {
        self.entries
            .iter()
            .flat_map(|(_, s)| s.iter().copied())
            .fold(0.0, f64::max)
    }

    pub fn grasp_at(&self, index: usize, bin: usize) -> GraspAction {
        let c = self.centers[index][bin];
        GraspAction { x: c.x, y: c.y, theta_bin: bin }
    }

    /// Best entry; ties go to the lowest (row, col, bin).
    pub fn argmax(&self) -> Option<(Cell, usize, f64)> {
        let mut best: Option<(Cell, usize, f64)> = None;
        for (cell, scores) in &self.entries {
            for (bin, &s) in scores.iter().enumerate() {
                if best.is_none_or(|(_, _, b)| s > b) {
                    best = Some((*cell, bin, s));
                }
            }
        }
        best
    }
}

struct Obstacle {
    footprint: Footprint,
    center: Vec2,
    radius: f64,
}

/// Precomputed per-scene state for scoring many grasps.
struct GraspEvaluator<'a> {
    target: Footprint,
    obstacles: Vec<Obstacle>,
    gripper: &'a GripperSpec,
    cfg: &'a OracleConfig,
    finger_radius: f64,
}

impl<'a> GraspEvaluator<'a> {
    /// `near_target` drops obstacles that cannot come within
    /// `clearance_full_m` of a finger for grasp centres inside the target.
    fn new(scene: &Scene, gripper: &'a GripperSpec, cfg: &'a OracleConfig, near_target: bool) -> Option<Self> {
        let target = scene.target()?.footprint();
        let finger_radius = (gripper.finger_thick_m / 2.0).hypot(gripper.finger_len_m / 2.0);
        let reach = (gripper.opening_m / 2.0 + gripper.finger_thick_m / 2.0).hypot(gripper.finger_len_m / 2.0)
            + target.bounding_radius()
            + cfg.clearance_full_m;
        let tc = target.centroid();
        let obstacles = scene
            .objects
            .iter()
            .filter(|o| o.id != scene.target_id)
            .map(|o| {
                let footprint = o.footprint();
                Obstacle { center: footprint.centroid(), radius: footprint.bounding_radius(), footprint }
            })
            .filter(|o| !near_target || (o.center - tc).norm() - o.radius < reach)
            .collect();
        Some(Self { target, obstacles, gripper, cfg, finger_radius })
    }

    fn score(&self, center: &Vec2, u: &Vec2) -> f64 {
        let g = self.gripper;
        let closing = oriented_rect(center, u, g.opening_m / 2.0, g.finger_len_m / 2.0);
        if !self.target.overlaps_polygon(&closing) {
            return 0.0;
        }
        let fingers = finger_rects(center, u, g);
        if fingers.iter().any(|f| self.target.overlaps_polygon(f)) {
            return 0.0;
        }
        let full = self.cfg.clearance_full_m;
        let mut clearance = full;
        for f in &fingers {
            let fc = (f[0] + f[2]) * 0.5;
            for o in &self.obstacles {
                let lower = (o.center - fc).norm() - o.radius - self.finger_radius;
                if lower >= clearance {
                    continue;
                }
                clearance = clearance.min(o.footprint.distance_to_polygon(f));
                if clearance <= 0.0 {
                    return 0.0;
                }
            }
        }
        (clearance / full).min(1.0)
    }

    /// Scores for the 16 bins at one centre. Bins `k` and `k + 8` describe
    /// the same jaw placement.
    fn scores_at(&self, center: &Vec2) -> [f64; GRASP_BINS] {
        let mut out = [0.0; GRASP_BINS];
        let half = GRASP_BINS / 2;
        for bin in 0..half {
            let theta = bin as f64 * TAU / GRASP_BINS as f64;
            let s = self.score(center, &Vec2::new(theta.cos(), theta.sin()));
            out[bin] = s;
            out[bin + half] = s;
        }
        out
    }

    /// Sub-cell centres of `cell` inside the target, in row-major order.
    fn sub_centers(&self, ws: &WorkspaceSpec, cell: Cell) -> Vec<Vec2> {
        let c = ws.grid_to_world(cell);
        let q = ws.cell_size() / 4.0;
        [(-q, -q), (q, -q), (-q, q), (q, q)]
            .iter()
            .map(|&(dx, dy)| Vec2::new(c.x + dx, c.y + dy))
            .filter(|p| self.target.contains(p))
            .collect()
    }

    /// Cells with at least one sub-cell centre inside the target.
    fn target_cells(&self, ws: &WorkspaceSpec) -> Vec<(Cell, Vec<Vec2>)> {
        let n = ws.grid_n;
        let h = ws.cell_size();
        let (lo, hi) = self.target.aabb();
        let r0 = ((lo.y / h - 0.5).floor().max(0.0)) as usize;
        let r1 = ((hi.y / h - 0.5).ceil().max(0.0) as usize).min(n - 1);
        let c0 = ((lo.x / h - 0.5).floor().max(0.0)) as usize;
        let c1 = ((hi.x / h - 0.5).ceil().max(0.0) as usize).min(n - 1);
        let mut cells = Vec::new();
        for row in r0..=r1 {
            for col in c0..=c1 {
                let cell = Cell { row, col };
                let subs = self.sub_centers(ws, cell);
                if !subs.is_empty() {
                    cells.push((cell, subs));
                }
            }
        }
        cells
    }

    /// Best score per bin over `centers`, with the centre that achieved it.
    /// Ties keep the earlier centre.
    fn cell_scores(&self, centers: &[Vec2]) -> ([f64; GRASP_BINS], [Vec2; GRASP_BINS]) {
        let mut best = [0.0; GRASP_BINS];
        let mut at = [centers[0]; GRASP_BINS];
        for c in centers {
            let s = self.scores_at(c);
            for bin in 0..GRASP_BINS {
                if s[bin] > best[bin] {
                    best[bin] = s[bin];
                    at[bin] = *c;
                }
            }
        }
        (best, at)
    }
}

pub fn grasp_score(scene: &Scene, grasp: &GraspAction, gripper: &GripperSpec, cfg: &OracleConfig) -> f64 {
    match GraspEvaluator::new(scene, gripper, cfg, false) {
        Some(ev) => {
            let t = grasp.theta();
            ev.score(&grasp.center(), &Vec2::new(t.cos(), t.sin()))
        }
        None => 0.0,
    }
}

pub fn grasp_score_map(scene: &Scene, gripper: &GripperSpec, cfg: &OracleConfig) -> Result<GraspScoreMap, GraspError> {
    grasp_score_map_with(scene, gripper, cfg, Execution::Sequential)
}

pub fn grasp_score_map_with(
    scene: &Scene,
    gripper: &GripperSpec,
    cfg: &OracleConfig,
    exec: Execution,
) -> Result<GraspScoreMap, GraspError> {
    let ev = GraspEvaluator::new(scene, gripper, cfg, true)
        .ok_or(GraspError::TargetMissing(scene.target_id))?;
    let ws = scene.workspace;
    let cells = ev.target_cells(&ws);
    let scored = par::map(exec, &cells, |(cell, subs)| (*cell, ev.cell_scores(subs)));
    let mut entries = Vec::with_capacity(scored.len());
    let mut centers = Vec::with_capacity(scored.len());
    for (cell, (scores, at)) in scored {
        entries.push((cell, scores));
        centers.push(at);
    }
    Ok(GraspScoreMap { grid_n: ws.grid_n, entries, centers })
}

/// Maximum of the score map, stopping early once `stop_above` is exceeded.
fn max_score(scene: &Scene, gripper: &GripperSpec, cfg: &OracleConfig, stop_above: f64) -> f64 {
    let Some(ev) = GraspEvaluator::new(scene, gripper, cfg, true) else {
        return 0.0;
    };
    let ws = scene.workspace;
    let mut best = 0.0f64;
    let half = GRASP_BINS / 2;
    for (_, subs) in ev.target_cells(&ws) {
        for c in &subs {
            for bin in 0..half {
                let theta = bin as f64 * TAU / GRASP_BINS as f64;
                best = best.max(ev.score(c, &Vec2::new(theta.cos(), theta.sin())));
                if best > stop_above {
                    return best;
                }
            }
        }
    }
    best
}

/// Map maximum and the reward it implies, computed once per state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GraspSummary {
    pub max_score: f64,
    pub terminal: bool,
    pub reward: f64,
}

pub fn summarize(scene: &Scene, gripper: &GripperSpec, cfg: &OracleConfig) -> GraspSummary {
    // scores never exceed 1, so 1.0 is final
    let max_score = max_score(scene, gripper, cfg, 1.0 - 1e-12);
    GraspSummary {
        max_score,
        terminal: max_score > cfg.r_gstar,
        reward: cfg.reward_from_max(max_score),
    }
}

pub fn is_terminal(scene: &Scene, gripper: &GripperSpec, cfg: &OracleConfig) -> bool {
    max_score(scene, gripper, cfg, cfg.r_gstar) > cfg.r_gstar
}

pub fn terminal_reward(scene: &Scene, gripper: &GripperSpec, cfg: &OracleConfig) -> f64 {
    summarize(scene, gripper, cfg).reward
}

/// Best grasp on the target; ties go to the lowest (row, col, bin). An
/// all-zero map still yields its first entry with score 0.
pub fn best_grasp(scene: &Scene, gripper: &GripperSpec, cfg: &OracleConfig) -> (GraspAction, f64) {
    let fallback = || {
        let c = scene.target().map(|t| t.centroid()).unwrap_or_else(Vec2::zeros);
        (GraspAction { x: c.x, y: c.y, theta_bin: 0 }, 0.0)
    };
    let Ok(map) = grasp_score_map(scene, gripper, cfg) else {
        return fallback();
    };
    match map.argmax() {
        Some((cell, bin, score)) => {
            let i = map.entries.binary_search_by(|(c, _)| c.cmp(&cell)).expect("argmax cell is in the map");
            (map.grasp_at(i, bin), score)
        }
        None => fallback(),
    }
}
