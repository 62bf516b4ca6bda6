//! Label construction for a logged transition.

use crate::grid::OccupancyGrids;
use crate::scene::{Cell, WorkspaceSpec};
use crate::sim::{TipSpec, PUSH_LENGTH_M};

use super::TrainingConfig;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LabeledCell {
    pub cell: Cell,
    pub label: f64,
    pub weight: f64,
}

/// Sparse label/weight grids; every cell not listed has weight 0.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledSample {
    pub grid_n: usize,
    pub cells: Vec<LabeledCell>,
}

impl LabeledSample {
    pub fn dense_label(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.grid_n * self.grid_n];
        for c in &self.cells {
            v[c.cell.row * self.grid_n + c.cell.col] = c.label;
        }
        v
    }

    pub fn dense_weight(&self) -> Vec<f64> {
        let mut v = vec![0.0; self.grid_n * self.grid_n];
        for c in &self.cells {
            v[c.cell.row * self.grid_n + c.cell.col] = c.weight;
        }
        v
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellPush {
    Valid,
    StartCollision,
    EmptyPush,
}

/// Rasterized validity of a rightward push starting at `cell`: the tip disc
/// overlapping an occupied cell centre is a start collision, a swept
/// corridor without occupied cells is an empty push.
pub fn classify_cell(grids: &OccupancyGrids, cell: Cell, ws: &WorkspaceSpec, tip: &TipSpec) -> CellPush {
    let g = &grids.all_objects;
    let n = g.n() as i64;
    let h = ws.cell_size();
    let rad = tip.radius / h;
    let len = PUSH_LENGTH_M / h;
    let reach = rad.ceil() as i64;
    let (r0, c0) = (cell.row as i64, cell.col as i64);
    let occupied = |r: i64, c: i64| r >= 0 && c >= 0 && r < n && c < n && g.get(r as usize, c as usize);
    for dr in -reach..=reach {
        for dc in -reach..=reach {
            if ((dr * dr + dc * dc) as f64) < rad * rad && occupied(r0 + dr, c0 + dc) {
                return CellPush::StartCollision;
            }
        }
    }
    let span = (len + rad).ceil() as i64;
    for dr in -reach..=reach {
        for dc in -reach..=span {
            let along = (dc as f64).clamp(0.0, len);
            let d2 = (dc as f64 - along).powi(2) + (dr * dr) as f64;
            if d2 < rad * rad && occupied(r0 + dr, c0 + dc) {
                return CellPush::Valid;
            }
        }
    }
    CellPush::EmptyPush
}

pub fn visit_weight(n_visits: u32, saturation: u32) -> f64 {
    n_visits.min(saturation) as f64 / saturation.max(1) as f64
}

/// Spread `q` over the 3x3 patch around `action_cell`; patch cells whose
/// push is invalid get label 0 with the small collision / empty weights.
pub fn make_label(
    grids: &OccupancyGrids,
    action_cell: Cell,
    q: f64,
    n_visits: u32,
    cfg: &TrainingConfig,
    ws: &WorkspaceSpec,
    tip: &TipSpec,
) -> LabeledSample {
    let n = grids.all_objects.n();
    let mut cells = Vec::with_capacity(9);
    for dr in -1i64..=1 {
        for dc in -1i64..=1 {
            let (r, c) = (action_cell.row as i64 + dr, action_cell.col as i64 + dc);
            if r < 0 || c < 0 || r >= n as i64 || c >= n as i64 {
                continue;
            }
            let cell = Cell { row: r as usize, col: c as usize };
            let (label, weight) = match classify_cell(grids, cell, ws, tip) {
                CellPush::Valid => (q, visit_weight(n_visits, cfg.visit_saturation)),
                CellPush::StartCollision => (0.0, cfg.w_collision),
                CellPush::EmptyPush => (0.0, cfg.w_empty),
            };
            cells.push(LabeledCell { cell, label, weight });
        }
    }
    LabeledSample { grid_n: n, cells }
}
