//! Time-stepped circular coalescing Brownian motion.
//!
//! Particles are standard Brownian motions on the circle that stick together
//! from their first meeting. The state is stored as a ring of blocks; each
//! block is one position shared by a run of circularly consecutive particles
//! (coalescence preserves circular order, so a block is always such a run).
//!
//! One step moves every block by an independent `N(0, dt)` increment. A gap
//! between neighbouring blocks closes when it becomes non-positive at the end
//! of the step or, with bridge correction, when the Brownian bridge of the
//! gap (variance `2dt`) touches zero inside the step, which happens with
//! probability `exp(-d0·d1/dt)` for endpoint gaps `d0, d1 > 0`. Closed gaps
//! are merged at the step boundary; a merged block sits at the mean of the
//! merging positions.

use alloc::vec::Vec;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::geometry::{circular_sort, in_arc, CirclePoint};
use crate::{Error, Result};

/// Runs that have not fully coalesced by this time are abandoned.
pub const SAFETY_HORIZON: f64 = 100.0;

// exp(-37) < 1e-16: skip the uniform draw for bridges that cannot trigger.
const BRIDGE_CUTOFF: f64 = 37.0;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EngineConfig {
    pub dt: f64,
    pub rng_seed: u64,
    pub bridge_correction: bool,
}

impl EngineConfig {
    pub fn new(dt: f64, rng_seed: u64, bridge_correction: bool) -> Result<Self> {
        if !(dt.is_finite() && dt > 0.0) {
            return Err(Error::Domain { name: "dt", value: dt });
        }
        Ok(EngineConfig { dt, rng_seed, bridge_correction })
    }
}

impl Default for EngineConfig {
    fn default() -> Self {
        EngineConfig { dt: 1e-5, rng_seed: 0, bridge_correction: true }
    }
}

/// Full coalescence of a finite system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoalescenceResult {
    pub t_coalesce: f64,
    /// Zero-based index `i` of the arc `[y_i, y_{i+1})`, in anticlockwise
    /// order of the starting points, that grew to the whole circle.
    pub winner_gap_index: usize,
}

#[derive(Debug, Clone)]
pub struct CoalescingState {
    time: f64,
    /// Rank in anticlockwise order of the starting points -> caller's index.
    order: Vec<usize>,
    /// Block positions, lifted so that `pos[0] <= pos[1] <= ... < pos[0] + 1`.
    pos: Vec<f64>,
    /// First rank of each block; members are `first, first + 1, ...` mod m.
    first: Vec<usize>,
    size: Vec<usize>,
    prev: Vec<f64>,
    flags: Vec<bool>,
}

/// Probability that a variance-2 Brownian bridge over time `h` from `d0 > 0`
/// to `d1 > 0` touches zero.
pub fn bridge_hit_probability(d0: f64, d1: f64, h: f64) -> f64 {
    libm::exp(-d0 * d1 / h)
}

fn ring_gap(p: &[f64], k: usize) -> f64 {
    if k + 1 < p.len() {
        p[k + 1] - p[k]
    } else {
        p[0] + 1.0 - p[k]
    }
}

impl CoalescingState {
    /// One block per starting point, at time zero.
    pub fn init(positions: &[CirclePoint]) -> Result<Self> {
        if positions.is_empty() {
            return Err(Error::Empty);
        }
        let mut order: Vec<usize> = (0..positions.len()).collect();
        order.sort_by(|&a, &b| positions[a].position().total_cmp(&positions[b].position()));
        let pos: Vec<f64> = order.iter().map(|&i| positions[i].position()).collect();
        if pos.windows(2).any(|w| w[0] == w[1]) {
            return Err(Error::DuplicatePoints);
        }
        let m = pos.len();
        Ok(CoalescingState {
            time: 0.0,
            order,
            pos,
            first: (0..m).collect(),
            size: alloc::vec![1; m],
            prev: Vec::with_capacity(m),
            flags: Vec::with_capacity(m),
        })
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    /// Number of particles.
    pub fn particles(&self) -> usize {
        self.order.len()
    }

    /// Number of blocks.
    pub fn alive(&self) -> usize {
        self.pos.len()
    }

    pub fn is_coalesced(&self) -> bool {
        self.pos.len() == 1
    }

    /// Block positions in anticlockwise order (starting from an arbitrary block).
    pub fn block_positions(&self) -> impl Iterator<Item = CirclePoint> + '_ {
        self.pos.iter().map(|&p| CirclePoint::new(p))
    }

    /// Members of block `b`, as ranks in anticlockwise order of the starting
    /// points.
    pub fn block_ranks(&self, b: usize) -> impl Iterator<Item = usize> + '_ {
        let m = self.order.len();
        let f = self.first[b];
        (0..self.size[b]).map(move |k| (f + k) % m)
    }

    /// First rank of block `b`.
    pub fn block_first_rank(&self, b: usize) -> usize {
        self.first[b]
    }

    /// Members of block `b` as caller indices, sorted.
    pub fn block_members(&self, b: usize) -> Vec<usize> {
        let mut v: Vec<usize> = self.block_ranks(b).map(|r| self.order[r]).collect();
        v.sort_unstable();
        v
    }

    /// The induced partition of caller indices, one sorted block per entry,
    /// blocks ordered by their minimal element.
    pub fn partition(&self) -> Vec<Vec<usize>> {
        let mut blocks: Vec<Vec<usize>> = (0..self.alive()).map(|b| self.block_members(b)).collect();
        blocks.sort_by_key(|b| b[0]);
        blocks
    }

    /// Minimal caller index of every block, ascending.
    pub fn minimal_elements(&self) -> Vec<usize> {
        self.partition().into_iter().map(|b| b[0]).collect()
    }

    /// Current position of every particle, indexed by caller index.
    pub fn particle_positions(&self) -> Vec<CirclePoint> {
        let mut out = alloc::vec![CirclePoint::default(); self.order.len()];
        for b in 0..self.alive() {
            let p = CirclePoint::new(self.pos[b]);
            for r in self.block_ranks(b) {
                out[self.order[r]] = p;
            }
        }
        out
    }

    /// Length of the arc from particle rank `r` to rank `r + 1`: zero inside
    /// a block, the distance to the next block for a block's last member,
    /// and one for the last member when a single block remains.
    pub fn rank_gaps(&self) -> Vec<f64> {
        let m = self.order.len();
        let mut out = alloc::vec![0.0; m];
        for b in 0..self.alive() {
            let last = (self.first[b] + self.size[b] - 1) % m;
            out[last] = ring_gap(&self.pos, b);
        }
        out
    }

    /// Caller index of the particle at rank `r`.
    pub fn caller_index(&self, rank: usize) -> usize {
        self.order[rank]
    }

    /// Advances by one step of `cfg.dt`.
    pub fn step<R: Rng + ?Sized>(&mut self, cfg: &EngineConfig, rng: &mut R) {
        self.step_by(cfg.dt, cfg.bridge_correction, rng);
    }

    fn step_by<R: Rng + ?Sized>(&mut self, h: f64, bridge: bool, rng: &mut R) {
        let sd = libm::sqrt(h);
        let n = self.pos.len();
        if n == 1 {
            let z: f64 = rng.sample(StandardNormal);
            self.pos[0] += sd * z;
        } else {
            self.prev.clear();
            self.prev.extend_from_slice(&self.pos);
            for p in &mut self.pos {
                let z: f64 = rng.sample(StandardNormal);
                *p += sd * z;
            }
            self.flags.clear();
            let mut any = false;
            for k in 0..n {
                let d1 = ring_gap(&self.pos, k);
                let hit = if d1 <= 0.0 {
                    true
                } else if bridge {
                    let x = ring_gap(&self.prev, k) * d1 / h;
                    x < BRIDGE_CUTOFF && rng.random::<f64>() < libm::exp(-x)
                } else {
                    false
                };
                any |= hit;
                self.flags.push(hit);
            }
            if any {
                self.merge_flagged();
            }
        }
        self.normalize();
        self.time += h;
    }

    fn normalize(&mut self) {
        let shift = libm::floor(self.pos[0]);
        if shift != 0.0 {
            for p in &mut self.pos {
                *p -= shift;
            }
        }
    }

    /// Merges every run of blocks joined by a flagged gap, then repeats on
    /// any gap the merge left non-positive.
    fn merge_flagged(&mut self) {
        let m = self.order.len();
        loop {
            let n = self.pos.len();
            if self.flags.iter().all(|&f| f) {
                // the widest gap is the one that grows to the whole circle
                let mut keep = 0;
                for k in 1..n {
                    if ring_gap(&self.pos, k) > ring_gap(&self.pos, keep) {
                        keep = k;
                    }
                }
                self.flags[keep] = false;
            }
            let start = (0..n).find(|&b| !self.flags[(b + n - 1) % n]).expect("an open gap exists");

            let mut pos = Vec::with_capacity(n);
            let mut first = Vec::with_capacity(n);
            let mut size = Vec::with_capacity(n);
            let (mut sum, mut count, mut members, mut head) = (0.0, 0usize, 0usize, 0usize);
            for k in 0..n {
                let b = (start + k) % n;
                if k > 0 && !self.flags[(b + n - 1) % n] {
                    pos.push(sum / count as f64);
                    first.push(head);
                    size.push(members);
                    sum = 0.0;
                    count = 0;
                    members = 0;
                }
                if count == 0 {
                    head = self.first[b];
                }
                sum += self.pos[b] + if b < start { 1.0 } else { 0.0 };
                count += 1;
                members += self.size[b];
            }
            pos.push(sum / count as f64);
            first.push(head);
            size.push(members);
            debug_assert_eq!(size.iter().sum::<usize>(), m);

            self.pos = pos;
            self.first = first;
            self.size = size;
            self.normalize();

            let n = self.pos.len();
            if n == 1 {
                break;
            }
            self.flags.clear();
            let mut any = false;
            for k in 0..n {
                let hit = ring_gap(&self.pos, k) <= 0.0;
                any |= hit;
                self.flags.push(hit);
            }
            if !any {
                break;
            }
        }
    }

    /// Advances to `t_target` in steps of `cfg.dt`, the last one possibly
    /// shorter.
    pub fn evolve_to<R: Rng + ?Sized>(&mut self, t_target: f64, cfg: &EngineConfig, rng: &mut R) {
        let remaining = t_target - self.time;
        if remaining <= 0.0 {
            return;
        }
        let start = self.time;
        let full = libm::floor(remaining / cfg.dt) as u64;
        for _ in 0..full {
            self.step_by(cfg.dt, cfg.bridge_correction, rng);
        }
        let rest = t_target - (start + full as f64 * cfg.dt);
        if rest > 1e-12 * cfg.dt {
            self.step_by(rest, cfg.bridge_correction, rng);
        }
        self.time = t_target;
    }

    /// Steps until fewer than `target` blocks remain.
    pub fn run_until_alive_below<R: Rng + ?Sized>(
        &mut self,
        target: usize,
        cfg: &EngineConfig,
        rng: &mut R,
    ) -> Result<()> {
        while self.alive() >= target {
            if self.time > SAFETY_HORIZON {
                return Err(Error::HorizonExceeded { horizon: SAFETY_HORIZON, alive: self.alive() });
            }
            self.step(cfg, rng);
        }
        Ok(())
    }
}

/// Runs `m >= 2` coalescing particles until a single block remains.
pub fn run_until_coalesced<R: Rng + ?Sized>(
    positions: &[CirclePoint],
    cfg: &EngineConfig,
    rng: &mut R,
) -> Result<CoalescenceResult> {
    if positions.len() < 2 {
        return Err(Error::TooFewParticles(positions.len()));
    }
    let mut state = CoalescingState::init(positions)?;
    state.run_until_alive_below(2, cfg, rng)?;
    let m = state.particles();
    Ok(CoalescenceResult {
        t_coalesce: state.time(),
        winner_gap_index: (state.first[0] + m - 1) % m,
    })
}

/// One arc of a [`Fence`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ArcSpan {
    Empty,
    Full,
    Between(CirclePoint, CirclePoint),
}

impl ArcSpan {
    pub fn contains(&self, e: CirclePoint) -> bool {
        match *self {
            ArcSpan::Empty => false,
            ArcSpan::Full => true,
            ArcSpan::Between(u, v) => in_arc(e, u, v),
        }
    }
}

/// The arcs `[z_j, z_{j+1})`, `j = 1..n`, cut out by `n` points.
#[derive(Debug, Clone, PartialEq)]
pub struct Fence {
    arcs: Vec<ArcSpan>,
}

impl Fence {
    /// Fence from distinct points; columns follow their anticlockwise order.
    pub fn from_points(points: &[CirclePoint]) -> Result<Self> {
        let (sorted, _) = circular_sort(points)?;
        let n = sorted.len();
        let arcs = if n == 1 {
            alloc::vec![ArcSpan::Full]
        } else {
            (0..n).map(|j| ArcSpan::Between(sorted[j], sorted[(j + 1) % n])).collect()
        };
        Ok(Fence { arcs })
    }

    /// Fence cut out by the particles of a coalescing system, column `j`
    /// being the arc that starts at rank `j`. Arcs between coalesced
    /// particles are empty; when one block remains the surviving arc is the
    /// whole circle.
    pub fn from_state(state: &CoalescingState) -> Self {
        let gaps = state.rank_gaps();
        let pts = state.particle_positions();
        let m = gaps.len();
        let at = |r: usize| pts[state.caller_index(r)];
        let arcs = (0..m)
            .map(|r| {
                if gaps[r] <= 0.0 {
                    ArcSpan::Empty
                } else if state.is_coalesced() {
                    ArcSpan::Full
                } else {
                    ArcSpan::Between(at(r), at((r + 1) % m))
                }
            })
            .collect();
        Fence { arcs }
    }

    pub fn len(&self) -> usize {
        self.arcs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arcs.is_empty()
    }

    pub fn arcs(&self) -> &[ArcSpan] {
        &self.arcs
    }
}

/// A dense boolean matrix.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct BinaryMatrix {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BinaryMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BinaryMatrix { rows, cols, data: alloc::vec![false; rows * cols] }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, i: usize, j: usize) -> bool {
        self.data[i * self.cols + j]
    }

    pub fn set(&mut self, i: usize, j: usize, value: bool) {
        self.data[i * self.cols + j] = value;
    }

    pub fn row_sum(&self, i: usize) -> usize {
        self.data[i * self.cols..(i + 1) * self.cols].iter().filter(|&&b| b).count()
    }

    /// Row-major bit code, for matrices with at most 64 cells.
    pub fn code(&self) -> Option<u64> {
        if self.data.len() > 64 {
            return None;
        }
        Some(self.data.iter().enumerate().fold(0u64, |acc, (k, &b)| acc | ((b as u64) << k)))
    }

    /// Entrywise negation.
    pub fn complement(&self) -> Self {
        BinaryMatrix { rows: self.rows, cols: self.cols, data: self.data.iter().map(|b| !b).collect() }
    }
}

/// `I_ij = 1{particle i ∈ arc j}`.
pub fn indicator_array_with(particles: &[CirclePoint], fence: &Fence) -> BinaryMatrix {
    let mut out = BinaryMatrix::zeros(particles.len(), fence.len());
    for (i, &y) in particles.iter().enumerate() {
        for (j, arc) in fence.arcs().iter().enumerate() {
            out.set(i, j, arc.contains(y));
        }
    }
    out
}

/// `I_ij = 1{Y_i ∈ [z_j, z_{j+1})}` for distinct fence points `z`, taken in
/// anticlockwise order.
pub fn indicator_array(particles: &[CirclePoint], fence: &[CirclePoint]) -> Result<BinaryMatrix> {
    Ok(indicator_array_with(particles, &Fence::from_points(fence)?))
}
