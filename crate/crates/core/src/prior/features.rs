//! Per-cell features of a canonical view for a rightward push starting at the cell.
//!
//! Everything is built from two summed-area tables (non-target and target
//! occupancy), so a feature vector costs a fixed number of lookups.

use sha2::{Digest, Sha256};

use crate::grid::OccupancyGrids;
use crate::scene::{Cell, WorkspaceSpec};

use super::view::{distance_to_edge, world_point};

pub const FEATURE_COUNT: usize = 19;

/// Canonical description of the feature set; its hash is stored in model files.
pub const FEATURE_SPEC: &str = "features/1;\
start_3x3_all;start_7x7_all;\
corridor_r3_c1-50_nontarget;corridor_r3_c1-50_target;\
ahead_r12_c0-62_nontarget;ahead_r12_c0-62_target;\
behind_r12_c-25--1_nontarget;\
target_dx/50;target_absdy/50;\
target_clutter_r25_nontarget;\
target_front_r15_c5-35;target_back_r15_c-35--5;target_side_r5-35_c15;\
target_centre_dist/half;target_col_offset/half;start_col_offset/half;start_target_dist/half;\
target_edge_ahead/side;start_edge_ahead/side";

pub fn feature_hash() -> [u8; 32] {
    Sha256::digest(FEATURE_SPEC.as_bytes()).into()
}

/// Summed-area table over a binary grid.
#[derive(Clone, Debug)]
pub struct Integral {
    n: usize,
    sums: Vec<u32>,
}

impl Integral {
    pub fn new(n: usize, cell: impl Fn(usize, usize) -> bool) -> Self {
        let w = n + 1;
        let mut sums = vec![0u32; w * w];
        for r in 0..n {
            let mut row = 0u32;
            for c in 0..n {
                row += cell(r, c) as u32;
                sums[(r + 1) * w + c + 1] = sums[r * w + c + 1] + row;
            }
        }
        Self { n, sums }
    }

    /// Occupied cells in rows `r0..=r1`, cols `c0..=c1`, clipped to the grid.
    pub fn count(&self, r0: i64, r1: i64, c0: i64, c1: i64) -> u32 {
        let n = self.n as i64;
        let (r0, r1, c0, c1) = (r0.max(0), r1.min(n - 1), c0.max(0), c1.min(n - 1));
        if r0 > r1 || c0 > c1 {
            return 0;
        }
        let w = self.n + 1;
        let at = |r: i64, c: i64| self.sums[r as usize * w + c as usize] as i64;
        (at(r1 + 1, c1 + 1) - at(r0, c1 + 1) - at(r1 + 1, c0) + at(r0, c0)) as u32
    }

    /// Fraction of the full (unclipped) window that is occupied.
    pub fn density(&self, r0: i64, r1: i64, c0: i64, c1: i64) -> f64 {
        let area = ((r1 - r0 + 1) * (c1 - c0 + 1)).max(1) as f64;
        self.count(r0, r1, c0, c1) as f64 / area
    }
}

#[derive(Clone, Debug)]
struct TargetInfo {
    col: f64,
    row: f64,
    front: f64,
    back: f64,
    side: f64,
    clutter: f64,
    centre_dist: f64,
    col_offset: f64,
    edge_ahead: f64,
}

/// Feature extractor for one canonical view.
#[derive(Clone, Debug)]
pub struct FeatureView {
    n: usize,
    workspace: WorkspaceSpec,
    angle: f64,
    all: Integral,
    nontarget: Integral,
    target: Integral,
    info: Option<TargetInfo>,
}

impl FeatureView {
    /// `grids` must already be in the canonical view of a push at `angle`.
    pub fn new(grids: &OccupancyGrids, angle: f64, workspace: &WorkspaceSpec) -> Self {
        let n = grids.all_objects.n();
        let a = &grids.all_objects;
        let t = &grids.target_mask;
        let all = Integral::new(n, |r, c| a.get(r, c));
        let nontarget = Integral::new(n, |r, c| a.get(r, c) && !t.get(r, c));
        let target = Integral::new(n, |r, c| t.get(r, c));
        let (mut sr, mut sc, mut k) = (0.0, 0.0, 0usize);
        for cell in t.ones() {
            sr += cell.row as f64 + 0.5;
            sc += cell.col as f64 + 0.5;
            k += 1;
        }
        let half = n as f64 / 2.0;
        let info = (k > 0).then(|| {
            let (row, col) = (sr / k as f64, sc / k as f64);
            let (tr, tc) = (row.floor() as i64, col.floor() as i64);
            let side = nontarget.count(tr + 5, tr + 35, tc - 15, tc + 15) + nontarget.count(tr - 35, tr - 5, tc - 15, tc + 15);
            let p = world_point(workspace, angle, col, row);
            TargetInfo {
                col,
                row,
                front: nontarget.density(tr - 15, tr + 15, tc + 5, tc + 35),
                back: nontarget.density(tr - 15, tr + 15, tc - 35, tc - 5),
                side: side as f64 / (2.0 * 31.0 * 31.0),
                clutter: nontarget.density(tr - 25, tr + 25, tc - 25, tc + 25),
                centre_dist: ((col - half).powi(2) + (row - half).powi(2)).sqrt() / half,
                col_offset: (col - half) / half,
                edge_ahead: distance_to_edge(workspace, &p, angle) / workspace.side_m,
            }
        });
        Self { n, workspace: *workspace, angle, all, nontarget, target, info }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn features(&self, cell: Cell) -> [f64; FEATURE_COUNT] {
        let (r, c) = (cell.row as i64, cell.col as i64);
        let half = self.n as f64 / 2.0;
        let (cr, cc) = (cell.row as f64 + 0.5, cell.col as f64 + 0.5);
        let start = world_point(&self.workspace, self.angle, cc, cr);
        let mut f = [0.0; FEATURE_COUNT];
        f[0] = self.all.density(r - 1, r + 1, c - 1, c + 1);
        f[1] = self.all.density(r - 3, r + 3, c - 3, c + 3);
        f[2] = self.nontarget.density(r - 3, r + 3, c + 1, c + 50);
        f[3] = self.target.density(r - 3, r + 3, c + 1, c + 50);
        f[4] = self.nontarget.density(r - 12, r + 12, c, c + 62);
        f[5] = self.target.density(r - 12, r + 12, c, c + 62);
        f[6] = self.nontarget.density(r - 12, r + 12, c - 25, c - 1);
        f[15] = (cc - half) / half;
        f[18] = distance_to_edge(&self.workspace, &start, self.angle) / self.workspace.side_m;
        match &self.info {
            Some(t) => {
                f[7] = ((t.col - cc) / 50.0).clamp(-3.0, 3.0);
                f[8] = ((t.row - cr).abs() / 50.0).min(3.0);
                f[9] = t.clutter;
                f[10] = t.front;
                f[11] = t.back;
                f[12] = t.side;
                f[13] = t.centre_dist;
                f[14] = t.col_offset;
                f[16] = ((t.col - cc).powi(2) + (t.row - cr).powi(2)).sqrt() / half;
                f[17] = t.edge_ahead;
            }
            None => {
                f[7] = 3.0;
                f[8] = 3.0;
                f[16] = 3.0;
            }
        }
        f
    }
}
