//! Grid approximation of the Arratia flow `x ↦ φ(0, t, x)` on the circle.
//!
//! `M` coalescing particles start at `k/M`. At time `t` every surviving
//! block is a cluster: its common position is an image point `V_i` and the
//! grid start of its anticlockwise-first member stands in for the preimage
//! boundary `U_i`, so that grid points in `[U_i, U_{i+1})` are all carried
//! to `V_i`.

use alloc::vec::Vec;

use rand::Rng;

use crate::engine::{run_until_coalesced, CoalescingState, EngineConfig};
use crate::geometry::{in_arc, CirclePoint};
use crate::rng::SimRng;
use crate::stats::{replicate_map, EmpiricalSummary};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridConfig {
    pub grid_size: usize,
    pub dt: f64,
}

impl GridConfig {
    pub fn new(grid_size: usize, dt: f64) -> Result<Self> {
        if grid_size < 2 {
            return Err(Error::TooFewParticles(grid_size));
        }
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain { name: "dt", value: dt });
        }
        Ok(GridConfig { grid_size, dt })
    }

    fn engine(&self) -> EngineConfig {
        EngineConfig { dt: self.dt, rng_seed: 0, bridge_correction: true }
    }

    /// Grid start positions `k/M`.
    pub fn starts(&self) -> Vec<CirclePoint> {
        (0..self.grid_size).map(|k| CirclePoint::new(k as f64 / self.grid_size as f64)).collect()
    }
}

/// The flow's time-`t` marginal restricted to the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowSnapshot {
    pub t: f64,
    pub n_clusters: usize,
    /// `V_i`, cluster `i`'s image point.
    pub image_points: Vec<CirclePoint>,
    /// `U_i`, ascending.
    pub boundaries: Vec<CirclePoint>,
    /// Grid index -> cluster index.
    pub block_of_grid: Vec<usize>,
}

impl FlowSnapshot {
    fn from_state(state: &CoalescingState, grid_size: usize) -> Self {
        let mut clusters: Vec<(usize, usize)> =
            (0..state.alive()).map(|b| (state.block_first_rank(b), b)).collect();
        clusters.sort_unstable();
        let positions: Vec<CirclePoint> = state.block_positions().collect();
        let mut block_of_grid = alloc::vec![0; grid_size];
        let mut image_points = Vec::with_capacity(clusters.len());
        let mut boundaries = Vec::with_capacity(clusters.len());
        for (i, &(first, b)) in clusters.iter().enumerate() {
            image_points.push(positions[b]);
            boundaries.push(CirclePoint::new(first as f64 / grid_size as f64));
            for r in state.block_ranks(b) {
                block_of_grid[r] = i;
            }
        }
        FlowSnapshot {
            t: state.time(),
            n_clusters: clusters.len(),
            image_points,
            boundaries,
            block_of_grid,
        }
    }

    /// Number of clusters that contain a grid point with index divisible by
    /// `stride`: the cluster count of the coarser grid `M / stride` driven
    /// by the same flow.
    pub fn subgrid_cluster_count(&self, stride: usize) -> usize {
        let mut seen = alloc::vec![false; self.n_clusters];
        let mut count = 0;
        for k in (0..self.block_of_grid.len()).step_by(stride.max(1)) {
            let c = self.block_of_grid[k];
            if !seen[c] {
                seen[c] = true;
                count += 1;
            }
        }
        count
    }
}

/// A grid flow that can be observed at increasing times.
#[derive(Debug, Clone)]
pub struct GridFlow {
    grid: GridConfig,
    state: CoalescingState,
}

impl GridFlow {
    pub fn new(grid: GridConfig) -> Result<Self> {
        let state = CoalescingState::init(&grid.starts())?;
        Ok(GridFlow { grid, state })
    }

    pub fn advance_to<R: Rng + ?Sized>(&mut self, t: f64, rng: &mut R) {
        self.state.evolve_to(t, &self.grid.engine(), rng);
    }

    pub fn snapshot(&self) -> FlowSnapshot {
        FlowSnapshot::from_state(&self.state, self.grid.grid_size)
    }
}

pub fn flow_snapshot<R: Rng + ?Sized>(t: f64, grid: &GridConfig, rng: &mut R) -> Result<FlowSnapshot> {
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain { name: "t", value: t });
    }
    let mut flow = GridFlow::new(*grid)?;
    flow.advance_to(t, rng);
    Ok(flow.snapshot())
}

/// Time at which the grid flow's image first becomes a single point.
pub fn tau_sample<R: Rng + ?Sized>(grid: &GridConfig, rng: &mut R) -> Result<f64> {
    Ok(run_until_coalesced(&grid.starts(), &grid.engine(), rng)?.t_coalesce)
}

/// An open anticlockwise arc `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OpenArc {
    pub a: CirclePoint,
    pub b: CirclePoint,
}

impl OpenArc {
    pub fn new(a: f64, b: f64) -> Self {
        OpenArc { a: CirclePoint::new(a), b: CirclePoint::new(b) }
    }

    pub fn contains(&self, e: CirclePoint) -> bool {
        e != self.a && in_arc(e, self.a, self.b)
    }

    fn overlaps(&self, other: &OpenArc) -> bool {
        self.a == other.a || self.contains(other.a) || other.contains(self.a)
    }
}

/// Which point process of a snapshot to test.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Side {
    /// Preimage boundaries `U_i(t)`.
    Boundaries,
    /// Image points `V_i(t)`.
    Images,
}

/// Whether no point of `points` falls in the union of `arcs`.
pub fn avoids(points: &[CirclePoint], arcs: &[OpenArc]) -> bool {
    !points.iter().any(|&p| arcs.iter().any(|arc| arc.contains(p)))
}

/// Monte Carlo estimate of the avoidance function of `U(t)` or `V(t)`.
pub fn avoidance_probability(
    side: Side,
    arcs: &[OpenArc],
    t: f64,
    grid: &GridConfig,
    reps: usize,
    seed: u64,
) -> Result<EmpiricalSummary> {
    for (i, x) in arcs.iter().enumerate() {
        if arcs[i + 1..].iter().any(|y| x.overlaps(y)) {
            return Err(Error::OverlappingArcs);
        }
    }
    if !(t.is_finite() && t > 0.0) {
        return Err(Error::Domain { name: "t", value: t });
    }
    let hits = replicate_map(reps, seed, |_, rng: &mut SimRng| {
        if arcs.is_empty() {
            return 1.0;
        }
        let snap = flow_snapshot(t, grid, rng).expect("validated grid");
        let points = match side {
            Side::Boundaries => &snap.boundaries,
            Side::Images => &snap.image_points,
        };
        avoids(points, arcs) as u8 as f64
    });
    EmpiricalSummary::from_samples(&hits, false)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::replicate_rng;

    fn check_snapshot(s: &FlowSnapshot) {
        assert_eq!(s.image_points.len(), s.n_clusters);
        assert_eq!(s.boundaries.len(), s.n_clusters);
        assert!(s.boundaries.windows(2).all(|w| w[0] < w[1]));
        // circularly monotone: cluster index changes at most n_clusters times
        // around the ring, always by +1 mod n
        let m = s.block_of_grid.len();
        let n = s.n_clusters;
        let mut changes = 0;
        for k in 0..m {
            let (a, b) = (s.block_of_grid[k], s.block_of_grid[(k + 1) % m]);
            if a != b {
                assert_eq!(b, (a + 1) % n);
                changes += 1;
            }
        }
        assert_eq!(changes, if n == 1 { 0 } else { n });
        let mut imgs: Vec<f64> = s.image_points.iter().map(|p| p.position()).collect();
        imgs.sort_by(f64::total_cmp);
        imgs.dedup();
        assert_eq!(imgs.len(), n);
    }

    #[test]
    fn grid_config_validation() {
        assert!(GridConfig::new(1, 1e-4).is_err());
        assert!(GridConfig::new(2, 0.0).is_err());
        assert!(GridConfig::new(2, 1e-4).is_ok());
    }

    #[test]
    fn two_grid_points_collapse_eventually() {
        let grid = GridConfig::new(2, 1e-3).unwrap();
        let s = flow_snapshot(5.0, &grid, &mut replicate_rng(1, 0)).unwrap();
        assert_eq!(s.n_clusters, 1);
        check_snapshot(&s);
    }

    #[test]
    fn snapshots_are_circularly_monotone() {
        let grid = GridConfig::new(256, 1e-4).unwrap();
        for i in 0..20 {
            let s = flow_snapshot(0.02, &grid, &mut replicate_rng(2, i)).unwrap();
            check_snapshot(&s);
            assert!(s.subgrid_cluster_count(2) <= s.n_clusters);
            assert_eq!(s.subgrid_cluster_count(1), s.n_clusters);
        }
    }

    #[test]
    fn tau_is_positive() {
        let grid = GridConfig::new(8, 1e-4).unwrap();
        for i in 0..10 {
            assert!(tau_sample(&grid, &mut replicate_rng(3, i)).unwrap() > 0.0);
        }
    }

    #[test]
    fn open_arcs() {
        let arc = OpenArc::new(0.1, 0.3);
        assert!(arc.contains(CirclePoint::new(0.2)));
        assert!(!arc.contains(CirclePoint::new(0.1)));
        assert!(!arc.contains(CirclePoint::new(0.3)));
        let wrap = OpenArc::new(0.9, 0.1);
        assert!(wrap.contains(CirclePoint::new(0.95)) && wrap.contains(CirclePoint::new(0.0)));
        assert!(arc.overlaps(&OpenArc::new(0.2, 0.5)));
        assert!(!arc.overlaps(&OpenArc::new(0.3, 0.5)));
    }

    #[test]
    fn avoidance_edge_cases() {
        let grid = GridConfig::new(16, 1e-3).unwrap();
        let empty = avoidance_probability(Side::Images, &[], 0.1, &grid, 10, 0).unwrap();
        assert_eq!(empty.mean, 1.0);
        let overlapping = [OpenArc::new(0.1, 0.3), OpenArc::new(0.2, 0.4)];
        assert_eq!(
            avoidance_probability(Side::Images, &overlapping, 0.1, &grid, 10, 0).unwrap_err(),
            Error::OverlappingArcs
        );
        // a nearly full arc almost never avoids the boundaries
        let big = [OpenArc::new(0.0, 0.999)];
        let p = avoidance_probability(Side::Boundaries, &big, 0.05, &grid, 200, 1).unwrap();
        assert!(p.mean < 0.05);
    }
}
