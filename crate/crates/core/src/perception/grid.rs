use crate::geometry::{Bounds, Vec2};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CellState {
    Unexplored,
    Unoccupied,
    Occupied,
}

/// Tri-state occupancy grid with per-cell observation times.
#[derive(Clone, Debug)]
pub struct OccupancyGrid {
    pub resolution: f64,
    pub cols: usize,
    pub rows: usize,
    cells: Vec<CellState>,
    /// Time of the last observation, `-inf` while unexplored.
    last_update: Vec<f64>,
}

impl OccupancyGrid {
    pub fn new(bounds: Bounds, resolution: f64) -> Self {
        assert!(resolution > 0.0);
        let cols = (bounds.width / resolution).ceil() as usize;
        let rows = (bounds.height / resolution).ceil() as usize;
        OccupancyGrid {
            resolution,
            cols,
            rows,
            cells: vec![CellState::Unexplored; cols * rows],
            last_update: vec![f64::NEG_INFINITY; cols * rows],
        }
    }

    #[inline]
    pub fn index(&self, col: usize, row: usize) -> usize {
        row * self.cols + col
    }

    #[inline]
    pub fn get(&self, col: usize, row: usize) -> CellState {
        self.cells[self.index(col, row)]
    }

    #[inline]
    pub fn last_update(&self, col: usize, row: usize) -> f64 {
        self.last_update[self.index(col, row)]
    }

    /// Cell containing `p`, if inside the grid.
    pub fn cell_of(&self, p: Vec2) -> Option<(usize, usize)> {
        if p.x < 0.0 || p.y < 0.0 {
            return None;
        }
        let c = (p.x / self.resolution) as usize;
        let r = (p.y / self.resolution) as usize;
        (c < self.cols && r < self.rows).then_some((c, r))
    }

    #[inline]
    pub fn center(&self, col: usize, row: usize) -> Vec2 {
        Vec2::new(
            (col as f64 + 0.5) * self.resolution,
            (row as f64 + 0.5) * self.resolution,
        )
    }

    pub(crate) fn observe(&mut self, col: usize, row: usize, state: CellState, time: f64) {
        debug_assert_ne!(state, CellState::Unexplored);
        let i = self.index(col, row);
        self.cells[i] = state;
        self.last_update[i] = time;
    }

    /// Test helper and debugging aid: force a cell state.
    pub fn set(&mut self, col: usize, row: usize, state: CellState, time: f64) {
        let i = self.index(col, row);
        self.cells[i] = state;
        self.last_update[i] = if state == CellState::Unexplored {
            f64::NEG_INFINITY
        } else {
            time
        };
    }

    pub fn count(&self, state: CellState) -> usize {
        self.cells.iter().filter(|&&c| c == state).count()
    }

    /// Iterates `(col, row, state, last_update)` over all cells.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, CellState, f64)> + '_ {
        self.cells
            .iter()
            .zip(&self.last_update)
            .enumerate()
            .map(move |(i, (&s, &t))| (i % self.cols, i / self.cols, s, t))
    }

    /// Renders the grid as a binary PGM (P5) image, top row first.
    /// Unexplored is light grey, free is white, occupied is black.
    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = format!("P5\n{} {}\n255\n", self.cols, self.rows).into_bytes();
        for row in (0..self.rows).rev() {
            for col in 0..self.cols {
                out.push(match self.get(col, row) {
                    CellState::Unexplored => 200,
                    CellState::Unoccupied => 255,
                    CellState::Occupied => 0,
                });
            }
        }
        out
    }
}
