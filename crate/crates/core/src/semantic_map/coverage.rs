use rand::Rng;
use serde::Serialize;

use super::pose::Pose2;
use crate::simworld::{Cell, OccupancyGrid};

/// Frontier cells get this much more proposal mass than interior unexplored
/// cells.
const FRONTIER_WEIGHT: f64 = 4.0;

/// Per-cell record of which object types have been looked for there, as a
/// bitmask over the type vocabulary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CoverageGrid {
    width: usize,
    height: usize,
    resolution: f64,
    masks: Vec<u64>,
}

impl CoverageGrid {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        Self {
            width,
            height,
            resolution,
            masks: vec![0; width * height],
        }
    }

    pub fn for_grid(grid: &OccupancyGrid) -> Self {
        Self::new(grid.width(), grid.height(), grid.resolution())
    }

    fn index(&self, cell: Cell) -> Option<usize> {
        let (c, r) = (cell.col, cell.row);
        if c < 0 || r < 0 || c as usize >= self.width || r as usize >= self.height {
            return None;
        }
        Some(r as usize * self.width + c as usize)
    }

    /// Types searched for in `cell`; zero outside the grid.
    pub fn mask(&self, cell: Cell) -> u64 {
        self.index(cell).map_or(0, |i| self.masks[i])
    }

    pub fn is_covered(&self, cell: Cell, type_index: usize) -> bool {
        self.mask(cell) & (1 << type_index) != 0
    }

    /// Marks every cell whose center lies in the sensor cone.
    pub fn mark(&mut self, pose: Pose2, range: f64, fov: f64, type_mask: u64) {
        if type_mask == 0 {
            return;
        }
        let res = self.resolution;
        let c0 = ((pose.x - range) / res).floor().max(0.0) as usize;
        let r0 = ((pose.y - range) / res).floor().max(0.0) as usize;
        let c1 = (((pose.x + range) / res).ceil() as usize).min(self.width);
        let r1 = (((pose.y + range) / res).ceil() as usize).min(self.height);
        for row in r0..r1 {
            for col in c0..c1 {
                let center = Pose2::new((col as f64 + 0.5) * res, (row as f64 + 0.5) * res, 0.0);
                if in_cone(pose, center, range, fov) {
                    let i = row * self.width + col;
                    self.masks[i] |= type_mask;
                }
            }
        }
    }

    /// Number of cells covered for the given type.
    pub fn covered_count(&self, type_index: usize) -> usize {
        self.masks.iter().filter(|m| *m & (1 << type_index) != 0).count()
    }

    /// Samples a free cell not yet searched for `type_index`, preferring
    /// cells adjacent to already-searched space.
    pub fn sample_unexplored<R: Rng>(&self, grid: &OccupancyGrid, type_index: usize, rng: &mut R) -> Option<Pose2> {
        let bit = 1u64 << type_index;
        let mut cells = Vec::new();
        let mut total = 0.0;
        for cell in grid.free_cells() {
            if self.mask(cell) & bit != 0 {
                continue;
            }
            let frontier = grid
                .neighbors(cell)
                .any(|(n, _)| self.mask(n) & bit != 0);
            let w = if frontier { FRONTIER_WEIGHT } else { 1.0 };
            total += w;
            cells.push((cell, total));
        }
        if cells.is_empty() {
            return None;
        }
        let u = rng.random::<f64>() * total;
        let k = cells.partition_point(|(_, acc)| *acc <= u).min(cells.len() - 1);
        let (x, y) = grid.cell_center(cells[k].0);
        Some(Pose2::new(x, y, 0.0))
    }
}

/// Whether `target` lies within `range` and inside the forward cone of
/// half-angle `fov / 2`.
pub fn in_cone(pose: Pose2, target: Pose2, range: f64, fov: f64) -> bool {
    let d = pose.distance(target);
    if d > range {
        return false;
    }
    d < 1e-9 || pose.bearing_to(target).abs() <= fov / 2.0
}
