use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::geo::EnuPoint;

/// Sparse 3D occupancy grid. Anything not marked is free.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OccupancyGrid {
    pub origin: EnuPoint,
    pub cell_size: f64,
    cells: BTreeSet<(i64, i64, i64)>,
}

impl Default for OccupancyGrid {
    fn default() -> Self {
        Self::new(EnuPoint::default(), 1.0)
    }
}

impl OccupancyGrid {
    pub fn new(origin: EnuPoint, cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        Self {
            origin,
            cell_size,
            cells: BTreeSet::new(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.cells.is_empty()
    }

    pub fn len(&self) -> usize {
        self.cells.len()
    }

    pub fn cell_of(&self, p: &EnuPoint) -> (i64, i64, i64) {
        let c = self.cell_size;
        (
            ((p.x - self.origin.x) / c).floor() as i64,
            ((p.y - self.origin.y) / c).floor() as i64,
            ((p.z - self.origin.z) / c).floor() as i64,
        )
    }

    pub fn mark(&mut self, p: &EnuPoint) {
        let cell = self.cell_of(p);
        self.cells.insert(cell);
    }

    /// Marks every cell overlapping the axis-aligned box `[lo, hi]`.
    pub fn mark_box(&mut self, lo: &EnuPoint, hi: &EnuPoint) {
        let a = self.cell_of(lo);
        // shrink the upper corner slightly so a box ending on a cell face
        // does not spill into the next cell
        let eps = self.cell_size * 1e-9;
        let b = self.cell_of(&EnuPoint::new(hi.x - eps, hi.y - eps, hi.z - eps));
        for i in a.0..=b.0 {
            for j in a.1..=b.1 {
                for k in a.2..=b.2 {
                    self.cells.insert((i, j, k));
                }
            }
        }
    }

    pub fn is_occupied(&self, p: &EnuPoint) -> bool {
        !self.cells.is_empty() && self.cells.contains(&self.cell_of(p))
    }

    pub fn cells(&self) -> impl Iterator<Item = &(i64, i64, i64)> {
        self.cells.iter()
    }

    /// True iff an occupied cell intersects the segment from `from` along
    /// `direction` for `range` metres. The start cell itself is included.
    pub fn occupied_ahead(&self, from: &EnuPoint, direction: (f64, f64, f64), range: f64) -> bool {
        if self.cells.is_empty() || range <= 0.0 {
            return false;
        }
        let (dx, dy, dz) = direction;
        let norm = (dx * dx + dy * dy + dz * dz).sqrt();
        if norm == 0.0 {
            return self.is_occupied(from);
        }
        let dir = [dx / norm, dy / norm, dz / norm];
        let c = self.cell_size;
        let pos = [
            (from.x - self.origin.x) / c,
            (from.y - self.origin.y) / c,
            (from.z - self.origin.z) / c,
        ];
        let mut cell = [pos[0].floor() as i64, pos[1].floor() as i64, pos[2].floor() as i64];
        let mut step = [0i64; 3];
        let mut t_max = [f64::INFINITY; 3];
        let mut t_delta = [f64::INFINITY; 3];
        for i in 0..3 {
            if dir[i] > 0.0 {
                step[i] = 1;
                t_max[i] = (cell[i] as f64 + 1.0 - pos[i]) / dir[i];
                t_delta[i] = 1.0 / dir[i];
            } else if dir[i] < 0.0 {
                step[i] = -1;
                t_max[i] = (pos[i] - cell[i] as f64) / -dir[i];
                t_delta[i] = -1.0 / dir[i];
            }
        }
        // parameter t is measured in cells along the unit direction
        let t_end = range / c;
        loop {
            if self.cells.contains(&(cell[0], cell[1], cell[2])) {
                return true;
            }
            let axis = if t_max[0] <= t_max[1] && t_max[0] <= t_max[2] {
                0
            } else if t_max[1] <= t_max[2] {
                1
            } else {
                2
            };
            if t_max[axis] > t_end {
                return false;
            }
            cell[axis] += step[axis];
            t_max[axis] += t_delta[axis];
        }
    }
}
