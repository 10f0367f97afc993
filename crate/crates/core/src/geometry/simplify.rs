//! Visvalingam-Whyatt decimation.
//!
//! Interior points are removed smallest-triangle-first while that smallest
//! area stays below the threshold. Areas of the two neighbours are recomputed
//! after every removal; stale heap entries are skipped lazily. Equal areas
//! break toward the lower input index so the output is deterministic.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::{cross3, Vec2};

/// One removal step, recorded in the order it happened.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Removal {
    pub index: usize,
    pub area: f64,
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    area: f64,
    index: usize,
    generation: u32,
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl Ord for Candidate {
    // BinaryHeap is a max-heap: invert so the smallest (area, index) pops first.
    fn cmp(&self, other: &Self) -> Ordering {
        other.area.total_cmp(&self.area).then_with(|| other.index.cmp(&self.index))
    }
}

fn triangle_area(a: Vec2, b: Vec2, c: Vec2) -> f64 {
    0.5 * cross3(a, b, c).abs()
}

/// Simplify `points`, keeping both endpoints and the original order.
pub fn decimate_polyline(points: &[Vec2], threshold: f64) -> Vec<Vec2> {
    let (kept, _) = decimate_with_log(points, threshold);
    kept.into_iter().map(|i| points[i]).collect()
}

/// Like [`decimate_polyline`] but returns kept indices and the removal log.
pub fn decimate_with_log(points: &[Vec2], threshold: f64) -> (Vec<usize>, Vec<Removal>) {
    let n = points.len();
    if n < 3 {
        return ((0..n).collect(), Vec::new());
    }

    const NONE: usize = usize::MAX;
    let mut prev: Vec<usize> = (0..n).map(|i| if i == 0 { NONE } else { i - 1 }).collect();
    let mut next: Vec<usize> = (0..n).map(|i| if i + 1 == n { NONE } else { i + 1 }).collect();
    let mut generation = vec![0u32; n];
    let mut removed = vec![false; n];
    let mut log = Vec::new();

    let mut heap: BinaryHeap<Candidate> = (1..n - 1)
        .map(|i| Candidate { area: triangle_area(points[i - 1], points[i], points[i + 1]), index: i, generation: 0 })
        .collect();

    while let Some(c) = heap.pop() {
        if removed[c.index] || c.generation != generation[c.index] {
            continue;
        }
        if c.area >= threshold {
            break;
        }
        let (p, q) = (prev[c.index], next[c.index]);
        removed[c.index] = true;
        log.push(Removal { index: c.index, area: c.area });
        next[p] = q;
        prev[q] = p;
        for j in [p, q] {
            if prev[j] != NONE && next[j] != NONE {
                generation[j] += 1;
                heap.push(Candidate {
                    area: triangle_area(points[prev[j]], points[j], points[next[j]]),
                    index: j,
                    generation: generation[j],
                });
            }
        }
    }

    let kept = (0..n).filter(|&i| !removed[i]).collect();
    (kept, log)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts(v: &[(f64, f64)]) -> Vec<Vec2> {
        v.iter().map(|&(x, y)| Vec2::new(x, y)).collect()
    }

    #[test]
    fn collinear_point_removed() {
        let input = pts(&[(0.0, 0.0), (1.0, 0.0), (2.0, 0.0), (2.0, 1.0)]);
        assert_eq!(decimate_polyline(&input, 0.1), pts(&[(0.0, 0.0), (2.0, 0.0), (2.0, 1.0)]));
    }

    #[test]
    fn large_triangle_kept() {
        let input = pts(&[(0.0, 0.0), (1.0, 0.5), (2.0, 0.0)]);
        // shoelace: |0*(0.5-0) + 1*(0-0) + 2*(0-0.5)| / 2 = 0.5
        let shoelace = 0.5 * (0.0f64 * (0.5 - 0.0) + 1.0 * (0.0 - 0.0) + 2.0 * (0.0 - 0.5)).abs();
        assert_eq!(shoelace, 0.5);
        assert_eq!(decimate_polyline(&input, 0.1), input);
    }

    #[test]
    fn zero_threshold_keeps_general_position() {
        let input = pts(&[(0.0, 0.0), (1.0, 0.3), (2.0, -0.2), (3.0, 0.9), (4.0, 0.0)]);
        assert_eq!(decimate_polyline(&input, 0.0), input);
    }

    #[test]
    fn two_points_unchanged() {
        let input = pts(&[(0.0, 0.0), (5.0, 5.0)]);
        assert_eq!(decimate_polyline(&input, 10.0), input);
    }

    #[test]
    fn dense_straight_line_collapses_to_endpoints() {
        let input: Vec<Vec2> = (0..=100).map(|i| Vec2::new(i as f64, 0.0)).collect();
        let out = decimate_polyline(&input, 0.1);
        assert_eq!(out, vec![input[0], input[100]]);
    }

    #[test]
    fn ties_break_toward_lower_index() {
        // All three interior triangles have area 0.1.
        let input = pts(&[(0.0, 0.0), (1.0, 0.1), (2.0, 0.0), (3.0, 0.1), (4.0, 0.0)]);
        let (_, log) = decimate_with_log(&input, 0.15);
        assert_eq!(log[0].index, 1);
    }
}
