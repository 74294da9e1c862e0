use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::Serialize;

use super::PolicyError;
use crate::semantic_map::Pose2;
use crate::simworld::{Cell, OccupancyGrid};

/// Collision-free 8-connected path, as cells and their centers.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Trajectory {
    pub cells: Vec<Cell>,
    pub poses: Vec<Pose2>,
    /// Meters.
    pub length: f64,
}

/// Octile distance in cells: admissible and consistent for 8-connected
/// moves costing 1 and √2.
fn octile(a: Cell, b: Cell) -> f64 {
    let dx = (a.col - b.col).abs() as f64;
    let dy = (a.row - b.row).abs() as f64;
    dx.max(dy) + (std::f64::consts::SQRT_2 - 1.0) * dx.min(dy)
}

#[derive(PartialEq)]
struct Open {
    f: f64,
    g: f64,
    index: usize,
}

impl Eq for Open {}

impl Ord for Open {
    // Min-heap on f, then prefer deeper nodes, then the lower index.
    fn cmp(&self, other: &Self) -> Ordering {
        other
            .f
            .total_cmp(&self.f)
            .then_with(|| self.g.total_cmp(&other.g))
            .then_with(|| other.index.cmp(&self.index))
    }
}

impl PartialOrd for Open {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// A* from `start` to `goal`. Cost is the Euclidean length of the steps.
pub fn plan_path(grid: &OccupancyGrid, start: Cell, goal: Cell) -> Result<Trajectory, PolicyError> {
    if !grid.is_free(start) || !grid.is_free(goal) {
        return Err(PolicyError::Unreachable);
    }
    let (si, gi) = (grid.index(start).expect("free"), grid.index(goal).expect("free"));
    let mut g = vec![f64::INFINITY; grid.len()];
    let mut parent = vec![usize::MAX; grid.len()];
    let mut closed = vec![false; grid.len()];
    let mut open = BinaryHeap::new();
    g[si] = 0.0;
    open.push(Open {
        f: octile(start, goal),
        g: 0.0,
        index: si,
    });
    while let Some(Open { index, .. }) = open.pop() {
        if closed[index] {
            continue;
        }
        closed[index] = true;
        if index == gi {
            break;
        }
        let cell = grid.cell_at(index);
        for (next, step) in grid.neighbors(cell) {
            let ni = grid.index(next).expect("neighbors are in bounds");
            let cand = g[index] + step;
            if cand < g[ni] {
                g[ni] = cand;
                parent[ni] = index;
                open.push(Open {
                    f: cand + octile(next, goal),
                    g: cand,
                    index: ni,
                });
            }
        }
    }
    if !closed[gi] {
        return Err(PolicyError::Unreachable);
    }
    let mut cells = vec![goal];
    let mut at = gi;
    while at != si {
        at = parent[at];
        cells.push(grid.cell_at(at));
    }
    cells.reverse();
    let poses = cells
        .iter()
        .map(|&c| {
            let (x, y) = grid.cell_center(c);
            Pose2::new(x, y, 0.0)
        })
        .collect();
    Ok(Trajectory {
        cells,
        poses,
        length: g[gi] * grid.resolution(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trivial_paths() {
        let grid = OccupancyGrid::new(10, 10, 1.0);
        let t = plan_path(&grid, Cell::new(3, 3), Cell::new(3, 3)).unwrap();
        assert_eq!(t.cells.len(), 1);
        assert_eq!(t.length, 0.0);
        let t = plan_path(&grid, Cell::new(0, 0), Cell::new(9, 9)).unwrap();
        assert!((t.length - 9.0 * std::f64::consts::SQRT_2).abs() < 1e-12);
        assert_eq!(t.cells.len(), 10);
    }

    #[test]
    fn walls_force_a_detour() {
        let grid = OccupancyGrid::from_rows(&[".....", ".###.", "....."], 0.5).unwrap();
        let t = plan_path(&grid, Cell::new(0, 1), Cell::new(4, 1)).unwrap();
        assert!(t.cells.iter().all(|&c| grid.is_free(c)));
        // Up one row diagonally is blocked by the wall corner, so: up, 4 across, down.
        assert!((t.length - 0.5 * 6.0).abs() < 1e-12, "{}", t.length);
        let blocked = OccupancyGrid::from_rows(&["..#..", "..#..", "..#.."], 1.0).unwrap();
        assert!(matches!(
            plan_path(&blocked, Cell::new(0, 0), Cell::new(4, 0)),
            Err(PolicyError::Unreachable)
        ));
    }
}
