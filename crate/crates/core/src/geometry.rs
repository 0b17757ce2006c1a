//! The circle of circumference one, identified with `[0, 1)`.
//!
//! Arcs run anticlockwise, which is the direction of increasing position.
//! Comparisons are exact floating-point comparisons; nothing here merges
//! nearby points.

use alloc::vec::Vec;

use crate::{Error, Result};

/// Tolerance on the total length of a [`GapVector`].
pub const GAP_SUM_TOL: f64 = 1e-12;

/// A point of the circle, stored as its position in `[0, 1)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd, Default)]
pub struct CirclePoint(f64);

impl CirclePoint {
    /// Reduces `x` modulo one.
    pub fn new(x: f64) -> Self {
        debug_assert!(x.is_finite(), "non-finite circle coordinate {x}");
        let mut r = x - libm::floor(x);
        // x slightly below an integer can round up to exactly 1.0
        if r >= 1.0 {
            r = 0.0;
        }
        CirclePoint(r)
    }

    pub fn position(self) -> f64 {
        self.0
    }
}

impl From<f64> for CirclePoint {
    fn from(x: f64) -> Self {
        CirclePoint::new(x)
    }
}

/// Length of the anticlockwise arc `[u, v)`; zero when `u == v`.
pub fn arc_length(u: CirclePoint, v: CirclePoint) -> f64 {
    let d = v.0 - u.0;
    if d >= 0.0 {
        d
    } else {
        d + 1.0
    }
}

/// Whether `e` lies in the half-open anticlockwise arc `[u, v)`.
///
/// `[u, u)` is empty.
pub fn in_arc(e: CirclePoint, u: CirclePoint, v: CirclePoint) -> bool {
    if u.0 < v.0 {
        u.0 <= e.0 && e.0 < v.0
    } else if u.0 > v.0 {
        e.0 >= u.0 || e.0 < v.0
    } else {
        false
    }
}

/// Arc lengths between consecutive points of an anticlockwise configuration.
///
/// Entry `i` is the arc from point `i` to point `i + 1` (indices mod `m`).
#[derive(Debug, Clone, PartialEq)]
pub struct GapVector(Vec<f64>);

impl GapVector {
    pub fn new(gaps: Vec<f64>) -> Result<Self> {
        if gaps.is_empty() {
            return Err(Error::Empty);
        }
        if gaps.iter().any(|g| !(g.is_finite() && *g > 0.0)) {
            return Err(Error::NonPositiveGap);
        }
        let sum: f64 = gaps.iter().sum();
        if (sum - 1.0).abs() > GAP_SUM_TOL {
            return Err(Error::GapSum(sum));
        }
        Ok(GapVector(gaps))
    }

    /// `m` equal gaps of length `1/m`.
    pub fn equal(m: usize) -> Result<Self> {
        if m == 0 {
            return Err(Error::Empty);
        }
        Ok(GapVector(alloc::vec![1.0 / m as f64; m]))
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Points `start, start + g_1, start + g_1 + g_2, ...` realizing these gaps.
    pub fn positions(&self, start: f64) -> Vec<CirclePoint> {
        let mut acc = start;
        let mut out = Vec::with_capacity(self.0.len());
        for g in &self.0 {
            out.push(CirclePoint::new(acc));
            acc += g;
        }
        out
    }
}

/// Sorts `points` anticlockwise from the smallest position and returns them
/// with their gap vector.
pub fn circular_sort(points: &[CirclePoint]) -> Result<(Vec<CirclePoint>, GapVector)> {
    if points.is_empty() {
        return Err(Error::Empty);
    }
    let mut sorted = points.to_vec();
    sorted.sort_by(|a, b| a.0.total_cmp(&b.0));
    if sorted.windows(2).any(|w| w[0] == w[1]) {
        return Err(Error::DuplicatePoints);
    }
    let m = sorted.len();
    let gaps = (0..m)
        .map(|i| {
            if i + 1 < m {
                sorted[i + 1].0 - sorted[i].0
            } else {
                1.0 - sorted[i].0 + sorted[0].0
            }
        })
        .collect();
    Ok((sorted, GapVector(gaps)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;
    use proptest::prelude::*;

    fn p(x: f64) -> CirclePoint {
        CirclePoint::new(x)
    }

    #[test]
    fn reduces_modulo_one() {
        assert_eq!(p(1.25).position(), 0.25);
        assert_eq!(p(-0.25).position(), 0.75);
        assert_eq!(p(-1e-18).position(), 0.0);
        assert_eq!(p(3.0).position(), 0.0);
    }

    #[test]
    fn arc_length_examples() {
        assert!((arc_length(p(0.2), p(0.7)) - 0.5).abs() < 1e-15);
        assert!((arc_length(p(0.7), p(0.2)) - 0.5).abs() < 1e-15);
        assert_eq!(arc_length(p(0.3), p(0.3)), 0.0);
    }

    #[test]
    fn in_arc_examples() {
        assert!(in_arc(p(0.5), p(0.2), p(0.7)));
        assert!(in_arc(p(0.1), p(0.7), p(0.2)));
        assert!(!in_arc(p(0.2), p(0.2), p(0.2)));
        // half-open: start included, end excluded
        assert!(in_arc(p(0.2), p(0.2), p(0.7)));
        assert!(!in_arc(p(0.7), p(0.2), p(0.7)));
    }

    #[test]
    fn circular_sort_examples() {
        let (pts, gaps) = circular_sort(&[p(0.9), p(0.1), p(0.5)]).unwrap();
        assert_eq!(pts, vec![p(0.1), p(0.5), p(0.9)]);
        let want = [0.4, 0.4, 0.2];
        for (g, w) in gaps.as_slice().iter().zip(want) {
            assert!((g - w).abs() < 1e-15);
        }

        let (pts, gaps) = circular_sort(&[p(0.25)]).unwrap();
        assert_eq!(pts, vec![p(0.25)]);
        assert_eq!(gaps.as_slice(), &[1.0]);

        let (pts, gaps) = circular_sort(&[p(0.0), p(0.5)]).unwrap();
        assert_eq!(pts, vec![p(0.0), p(0.5)]);
        assert_eq!(gaps.as_slice(), &[0.5, 0.5]);
    }

    #[test]
    fn circular_sort_rejects_duplicates_and_empty() {
        assert_eq!(circular_sort(&[p(0.3), p(0.3)]), Err(Error::DuplicatePoints));
        assert_eq!(circular_sort(&[]), Err(Error::Empty));
    }

    #[test]
    fn gap_vector_validation() {
        assert!(GapVector::new(vec![0.5, 0.5]).is_ok());
        assert!(GapVector::new(vec![0.1, 0.2, 0.7]).is_ok());
        assert!(matches!(GapVector::new(vec![0.5, 0.6]), Err(Error::GapSum(_))));
        assert_eq!(GapVector::new(vec![1.5, -0.5]), Err(Error::NonPositiveGap));
        assert_eq!(GapVector::new(vec![]), Err(Error::Empty));
    }

    proptest! {
        #[test]
        fn arcs_in_both_directions_cover_the_circle(u in 0.0f64..1.0, v in 0.0f64..1.0) {
            let (u, v) = (p(u), p(v));
            let s = arc_length(u, v) + arc_length(v, u);
            if u == v {
                prop_assert_eq!(s, 0.0);
            } else {
                prop_assert!((s - 1.0).abs() < 1e-15);
            }
        }

        #[test]
        fn complementary_arcs_partition(e in 0.0f64..1.0, u in 0.0f64..1.0, v in 0.0f64..1.0) {
            prop_assume!(u != v);
            let (e, u, v) = (p(e), p(u), p(v));
            prop_assert!(in_arc(e, u, v) ^ in_arc(e, v, u));
        }

        #[test]
        fn sorted_gaps_sum_to_one(xs in proptest::collection::vec(0.0f64..1.0, 1..40)) {
            let pts: Vec<_> = xs.iter().map(|&x| p(x)).collect();
            if let Ok((sorted, gaps)) = circular_sort(&pts) {
                let sum: f64 = gaps.as_slice().iter().sum();
                prop_assert!((sum - 1.0).abs() < GAP_SUM_TOL);
                prop_assert!(sorted.windows(2).all(|w| w[0] < w[1]));
            }
        }
    }
}
