use serde::{Deserialize, Serialize};

/// Integer cell coordinate (column, row).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Cell {
    pub col: i32,
    pub row: i32,
}

impl Cell {
    pub fn new(col: i32, row: i32) -> Self {
        Self { col, row }
    }
}

/// Row-major occupancy grid. Cell (0,0) covers world [0, res) x [0, res).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    width: usize,
    height: usize,
    resolution: f64,
    occupied: Vec<bool>,
}

impl OccupancyGrid {
    pub fn new(width: usize, height: usize, resolution: f64) -> Self {
        Self {
            width,
            height,
            resolution,
            occupied: vec![false; width * height],
        }
    }

    /// Builds a grid from rows of `#` (occupied) and `.` (free). The first
    /// string is the top row (highest y).
    pub fn from_rows(rows: &[&str], resolution: f64) -> Option<Self> {
        let height = rows.len();
        let width = rows.first()?.chars().count();
        let mut grid = Self::new(width, height, resolution);
        for (i, line) in rows.iter().enumerate() {
            if line.chars().count() != width {
                return None;
            }
            let row = (height - 1 - i) as i32;
            for (col, ch) in line.chars().enumerate() {
                match ch {
                    '#' => grid.set_occupied(Cell::new(col as i32, row), true),
                    '.' => {}
                    _ => return None,
                }
            }
        }
        Some(grid)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn len(&self) -> usize {
        self.occupied.len()
    }

    pub fn is_empty(&self) -> bool {
        self.occupied.is_empty()
    }

    pub fn in_bounds(&self, cell: Cell) -> bool {
        cell.col >= 0 && cell.row >= 0 && (cell.col as usize) < self.width && (cell.row as usize) < self.height
    }

    pub fn index(&self, cell: Cell) -> Option<usize> {
        self.in_bounds(cell)
            .then(|| cell.row as usize * self.width + cell.col as usize)
    }

    pub fn cell_at(&self, index: usize) -> Cell {
        Cell::new((index % self.width) as i32, (index / self.width) as i32)
    }

    pub fn is_free(&self, cell: Cell) -> bool {
        self.index(cell).is_some_and(|i| !self.occupied[i])
    }

    pub fn set_occupied(&mut self, cell: Cell, occupied: bool) {
        if let Some(i) = self.index(cell) {
            self.occupied[i] = occupied;
        }
    }

    /// Marks every cell whose center lies in the axis-aligned rectangle.
    pub fn fill_rect(&mut self, x0: f64, y0: f64, x1: f64, y1: f64) {
        for row in 0..self.height as i32 {
            for col in 0..self.width as i32 {
                let (cx, cy) = self.cell_center(Cell::new(col, row));
                if cx >= x0.min(x1) && cx <= x0.max(x1) && cy >= y0.min(y1) && cy <= y0.max(y1) {
                    self.set_occupied(Cell::new(col, row), true);
                }
            }
        }
    }

    pub fn world_to_cell(&self, x: f64, y: f64) -> Cell {
        Cell::new(
            (x / self.resolution).floor() as i32,
            (y / self.resolution).floor() as i32,
        )
    }

    pub fn cell_center(&self, cell: Cell) -> (f64, f64) {
        (
            (cell.col as f64 + 0.5) * self.resolution,
            (cell.row as f64 + 0.5) * self.resolution,
        )
    }

    /// Nearest free cell to `cell` by breadth-first ring search.
    pub fn nearest_free(&self, cell: Cell) -> Option<Cell> {
        if self.is_free(cell) {
            return Some(cell);
        }
        let max_r = self.width.max(self.height) as i32;
        for r in 1..=max_r {
            let mut best: Option<(i32, Cell)> = None;
            for dr in -r..=r {
                for dc in -r..=r {
                    if dr.abs() != r && dc.abs() != r {
                        continue;
                    }
                    let c = Cell::new(cell.col + dc, cell.row + dr);
                    if self.is_free(c) {
                        let d = dr * dr + dc * dc;
                        if best.is_none_or(|(bd, bc)| d < bd || (d == bd && c < bc)) {
                            best = Some((d, c));
                        }
                    }
                }
            }
            if let Some((_, c)) = best {
                return Some(c);
            }
        }
        None
    }

    pub fn free_cells(&self) -> impl Iterator<Item = Cell> + '_ {
        (0..self.len()).filter(|&i| !self.occupied[i]).map(|i| self.cell_at(i))
    }

    /// 8-connected neighbors that are free. Diagonal moves require both
    /// adjacent orthogonal cells to be free (no corner cutting).
    pub fn neighbors(&self, cell: Cell) -> impl Iterator<Item = (Cell, f64)> + '_ {
        const STEPS: [(i32, i32); 8] = [
            (1, 0),
            (-1, 0),
            (0, 1),
            (0, -1),
            (1, 1),
            (1, -1),
            (-1, 1),
            (-1, -1),
        ];
        STEPS.iter().filter_map(move |&(dc, dr)| {
            let next = Cell::new(cell.col + dc, cell.row + dr);
            if !self.is_free(next) {
                return None;
            }
            if dc != 0 && dr != 0 {
                let a = Cell::new(cell.col + dc, cell.row);
                let b = Cell::new(cell.col, cell.row + dr);
                if !self.is_free(a) || !self.is_free(b) {
                    return None;
                }
                Some((next, std::f64::consts::SQRT_2))
            } else {
                Some((next, 1.0))
            }
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rows_map_top_line_to_highest_row() {
        let g = OccupancyGrid::from_rows(&["#..", "..."], 0.5).unwrap();
        assert!(!g.is_free(Cell::new(0, 1)));
        assert!(g.is_free(Cell::new(0, 0)));
        assert_eq!(g.world_to_cell(0.74, 0.2), Cell::new(1, 0));
    }

    #[test]
    fn diagonal_blocked_by_corner() {
        let g = OccupancyGrid::from_rows(&[".#", ".."], 1.0).unwrap();
        let n: Vec<_> = g.neighbors(Cell::new(0, 0)).map(|(c, _)| c).collect();
        assert!(!n.contains(&Cell::new(1, 1)));
    }

    #[test]
    fn nearest_free_skips_obstacles() {
        let g = OccupancyGrid::from_rows(&["...", ".#.", "..."], 1.0).unwrap();
        let c = g.nearest_free(Cell::new(1, 1)).unwrap();
        assert!(g.is_free(c));
    }
}
