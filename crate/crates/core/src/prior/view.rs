//! Canonical push view: the scene rotated so a push at `angle` points along +col.

use crate::geometry::Vec2;
use crate::grid::{rotate_view, OccupancyGrids, ViewRotation};
use crate::scene::{Cell, WorkspaceSpec};

pub fn canonical_view(grids: &OccupancyGrids, angle: f64) -> OccupancyGrids {
    if angle == 0.0 {
        return grids.clone();
    }
    rotate_view(grids, -angle)
}

/// Cell of the canonical view holding world point `p`.
pub fn canonical_cell(ws: &WorkspaceSpec, angle: f64, p: &Vec2) -> Option<Cell> {
    let h = ws.cell_size();
    let (col, row) = ViewRotation::new(ws.grid_n, -angle).forward(p.x / h, p.y / h);
    if col < 0.0 || row < 0.0 {
        return None;
    }
    let (c, r) = (col.floor() as usize, row.floor() as usize);
    (c < ws.grid_n && r < ws.grid_n).then_some(Cell { row: r, col: c })
}

/// World point of continuous canonical coordinates (col, row).
pub fn world_point(ws: &WorkspaceSpec, angle: f64, col: f64, row: f64) -> Vec2 {
    let h = ws.cell_size();
    let (c, r) = ViewRotation::new(ws.grid_n, -angle).inverse(col, row);
    Vec2::new(c * h, r * h)
}

/// Distance from `p` to the workspace boundary travelling along `angle`;
/// zero outside the workspace.
pub fn distance_to_edge(ws: &WorkspaceSpec, p: &Vec2, angle: f64) -> f64 {
    if !ws.contains(p) {
        return 0.0;
    }
    let (s, c) = angle.sin_cos();
    let along = |x: f64, d: f64| {
        if d > 1e-12 {
            (ws.side_m - x) / d
        } else if d < -1e-12 {
            -x / d
        } else {
            f64::INFINITY
        }
    };
    along(p.x, c).min(along(p.y, s))
}
