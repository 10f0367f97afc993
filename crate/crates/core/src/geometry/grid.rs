use std::collections::HashMap;

use super::Vec2;

pub const DEFAULT_CELL_SIZE: f64 = 25.0;

/// Uniform hash grid over a fixed point set. Immutable once built.
#[derive(Debug, Clone)]
pub struct SpatialGrid {
    cell_size: f64,
    points: Vec<Vec2>,
    buckets: HashMap<(i64, i64), Vec<usize>>,
}

impl SpatialGrid {
    pub fn new(points: Vec<Vec2>, cell_size: f64) -> Self {
        assert!(cell_size > 0.0, "cell size must be positive");
        let mut buckets: HashMap<(i64, i64), Vec<usize>> = HashMap::new();
        for (i, p) in points.iter().enumerate() {
            buckets.entry(cell_of(*p, cell_size)).or_default().push(i);
        }
        Self { cell_size, points, buckets }
    }

    pub fn with_default_cells(points: Vec<Vec2>) -> Self {
        Self::new(points, DEFAULT_CELL_SIZE)
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn points(&self) -> &[Vec2] {
        &self.points
    }

    pub fn cell_size(&self) -> f64 {
        self.cell_size
    }

    /// Indices of every point within distance `r` (inclusive) of `center`.
    pub fn query_radius(&self, center: Vec2, r: f64) -> Vec<usize> {
        let mut out = Vec::new();
        self.query_radius_into(center, r, &mut out);
        out
    }

    pub fn query_radius_into(&self, center: Vec2, r: f64, out: &mut Vec<usize>) {
        out.clear();
        if self.points.is_empty() {
            return;
        }
        let lo = cell_of(center - Vec2::new(r, r), self.cell_size);
        let hi = cell_of(center + Vec2::new(r, r), self.cell_size);
        let r2 = r * r;
        for cx in lo.0..=hi.0 {
            for cy in lo.1..=hi.1 {
                if let Some(bucket) = self.buckets.get(&(cx, cy)) {
                    out.extend(bucket.iter().copied().filter(|&i| (self.points[i] - center).norm_sq() <= r2));
                }
            }
        }
    }
}

fn cell_of(p: Vec2, cell: f64) -> (i64, i64) {
    ((p.x / cell).floor() as i64, (p.y / cell).floor() as i64)
}
