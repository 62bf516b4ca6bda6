//! Occupancy rasterization, view rotation and run-length encoding.

use serde::{Deserialize, Serialize};

use crate::geometry::Vec2;
use crate::scene::{Cell, Scene};

/// Square binary grid stored row-major; row follows world y.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Grid {
    n: usize,
    cells: Vec<u8>,
}

impl Grid {
    pub fn zeros(n: usize) -> Self {
        Self { n, cells: vec![0; n * n] }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> bool {
        self.cells[row * self.n + col] != 0
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        self.cells[row * self.n + col] = value as u8;
    }

    pub fn at(&self, cell: Cell) -> bool {
        self.get(cell.row, cell.col)
    }

    pub fn count(&self) -> usize {
        self.cells.iter().filter(|&&c| c != 0).count()
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.cells
    }

    /// Occupied cells in row-major order.
    pub fn ones(&self) -> impl Iterator<Item = Cell> + '_ {
        let n = self.n;
        self.cells
            .iter()
            .enumerate()
            .filter(|(_, &c)| c != 0)
            .map(move |(i, _)| Cell { row: i / n, col: i % n })
    }

    /// True if every occupied cell of `self` is occupied in `other`.
    pub fn is_subset_of(&self, other: &Grid) -> bool {
        self.n == other.n && self.cells.iter().zip(&other.cells).all(|(&a, &b)| a == 0 || b != 0)
    }

    /// Run lengths alternating empty/occupied, starting with an empty run.
    pub fn encode(&self) -> EncodedGrid {
        let mut runs = Vec::new();
        let mut current = 0u8;
        let mut len = 0u32;
        for &c in &self.cells {
            let c = (c != 0) as u8;
            if c == current {
                len += 1;
            } else {
                runs.push(len);
                current = c;
                len = 1;
            }
        }
        runs.push(len);
        EncodedGrid { n: self.n, runs }
    }
}

/// Run-length encoded [`Grid`].
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedGrid {
    pub n: usize,
    pub runs: Vec<u32>,
}

impl EncodedGrid {
    pub fn decode(&self) -> Result<Grid, String> {
        let total: u64 = self.runs.iter().map(|&r| r as u64).sum();
        if total != (self.n * self.n) as u64 {
            return Err(format!("run lengths sum to {total}, expected {}", self.n * self.n));
        }
        let mut cells = Vec::with_capacity(self.n * self.n);
        for (i, &r) in self.runs.iter().enumerate() {
            cells.extend(std::iter::repeat_n((i % 2) as u8, r as usize));
        }
        Ok(Grid { n: self.n, cells })
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct OccupancyGrids {
    pub all_objects: Grid,
    pub target_mask: Grid,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct EncodedGrids {
    pub all_objects: EncodedGrid,
    pub target_mask: EncodedGrid,
}

impl OccupancyGrids {
    pub fn encode(&self) -> EncodedGrids {
        EncodedGrids {
            all_objects: self.all_objects.encode(),
            target_mask: self.target_mask.encode(),
        }
    }
}

impl EncodedGrids {
    pub fn decode(&self) -> Result<OccupancyGrids, String> {
        Ok(OccupancyGrids {
            all_objects: self.all_objects.decode()?,
            target_mask: self.target_mask.decode()?,
        })
    }
}

/// Mark every cell whose centre lies inside an object footprint.
pub fn rasterize(scene: &Scene) -> OccupancyGrids {
    let ws = scene.workspace;
    let n = ws.grid_n;
    let h = ws.cell_size();
    let mut all = Grid::zeros(n);
    let mut target = Grid::zeros(n);
    for obj in &scene.objects {
        let fp = obj.footprint();
        let (lo, hi) = fp.aabb();
        let range = |lo: f64, hi: f64| {
            let a = ((lo / h - 0.5).floor().max(0.0)) as usize;
            let b = ((hi / h - 0.5).ceil().max(0.0) as usize).min(n.saturating_sub(1));
            a..=b
        };
        let is_target = obj.id == scene.target_id;
        for row in range(lo.y, hi.y) {
            for col in range(lo.x, hi.x) {
                let p = Vec2::new((col as f64 + 0.5) * h, (row as f64 + 0.5) * h);
                if fp.contains(&p) {
                    all.set(row, col, true);
                    if is_target {
                        target.set(row, col, true);
                    }
                }
            }
        }
    }
    OccupancyGrids { all_objects: all, target_mask: target }
}

/// Maps grid coordinates through a rotation about the grid centre.
#[derive(Clone, Copy, Debug)]
pub struct ViewRotation {
    angle: f64,
    sin: f64,
    cos: f64,
    half: f64,
}

impl ViewRotation {
    pub fn new(n: usize, angle: f64) -> Self {
        let (sin, cos) = angle.sin_cos();
        Self { angle, sin, cos, half: n as f64 / 2.0 }
    }

    pub fn angle(&self) -> f64 {
        self.angle
    }

    /// Rotate a point given in continuous cell units (col, row).
    pub fn forward(&self, col: f64, row: f64) -> (f64, f64) {
        let (x, y) = (col - self.half, row - self.half);
        (
            self.cos * x - self.sin * y + self.half,
            self.sin * x + self.cos * y + self.half,
        )
    }

    pub fn inverse(&self, col: f64, row: f64) -> (f64, f64) {
        let (x, y) = (col - self.half, row - self.half);
        (
            self.cos * x + self.sin * y + self.half,
            -self.sin * x + self.cos * y + self.half,
        )
    }

    /// Cell of the rotated view that contains the rotated centre of `cell`.
    pub fn forward_cell(&self, cell: Cell, n: usize) -> Option<Cell> {
        let (c, r) = self.forward(cell.col as f64 + 0.5, cell.row as f64 + 0.5);
        to_cell(c, r, n)
    }
}

fn to_cell(col: f64, row: f64, n: usize) -> Option<Cell> {
    if col < 0.0 || row < 0.0 {
        return None;
    }
    let (c, r) = (col.floor() as usize, row.floor() as usize);
    (c < n && r < n).then_some(Cell { row: r, col: c })
}

fn rotate_grid(grid: &Grid, rot: &ViewRotation) -> Grid {
    let n = grid.n;
    let mut out = Grid::zeros(n);
    for row in 0..n {
        for col in 0..n {
            let (c, r) = rot.inverse(col as f64 + 0.5, row as f64 + 0.5);
            if let Some(src) = to_cell(c, r, n) {
                if grid.at(src) {
                    out.set(row, col, true);
                }
            }
        }
    }
    out
}

/// Rotate both grids counter-clockwise by `angle` about the workspace centre
/// with nearest-neighbour sampling. Cells that come from outside the frame
/// are empty.
pub fn rotate_view(grids: &OccupancyGrids, angle: f64) -> OccupancyGrids {
    if angle == 0.0 {
        return grids.clone();
    }
    let rot = ViewRotation::new(grids.all_objects.n, angle);
    OccupancyGrids {
        all_objects: rotate_grid(&grids.all_objects, &rot),
        target_mask: rotate_grid(&grids.target_mask, &rot),
    }
}
