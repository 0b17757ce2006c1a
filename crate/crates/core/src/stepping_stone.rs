//! Step-function representation of the stepping-stone model with circular
//! Brownian migration.
//!
//! A state is a right-continuous step function from the circle to types in
//! `[0, 1]`. Its piece boundaries move as a circular coalescing Brownian
//! motion; a piece whose two boundaries meet disappears, and labels are
//! never created or changed. Started from a general initial condition `μ`,
//! the state at a small time `ε` is built from the Arratia flow: the
//! preimage intervals `[U_i, U_{i+1})` carry independent types drawn from
//! `μ(V_i)`.
//!
//! Read as a measure-valued process, each site carries a point mass on its
//! type, so the model can also be viewed as a multi-type voter model on the
//! circle.

use alloc::vec::Vec;

use rand::{Rng, RngCore};

use crate::engine::{CoalescingState, EngineConfig, SAFETY_HORIZON};
use crate::flow::{flow_snapshot, GridConfig};
use crate::geometry::{in_arc, CirclePoint};
use crate::rng::{derive_seed, SimRng};
use crate::stats::{replicate_map, EmpiricalSummary};
use crate::{Error, GapVector, Result};

/// A type in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct TypeLabel(f64);

impl TypeLabel {
    pub fn new(value: f64) -> Result<Self> {
        if (0.0..=1.0).contains(&value) {
            Ok(TypeLabel(value))
        } else {
            Err(Error::Domain { name: "type label", value })
        }
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Right-continuous step function on the circle.
///
/// Piece `i` covers `[start_i, start_{i+1})` (the last one wraps). Starts are
/// strictly increasing and circularly adjacent pieces carry distinct labels.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    pieces: Vec<(CirclePoint, TypeLabel)>,
}

impl StepFunction {
    /// Sorts the pieces by start and merges circular neighbours with equal
    /// labels.
    pub fn new(mut pieces: Vec<(CirclePoint, TypeLabel)>) -> Result<Self> {
        if pieces.is_empty() {
            return Err(Error::Empty);
        }
        pieces.sort_by(|a, b| a.0.position().total_cmp(&b.0.position()));
        if pieces.windows(2).any(|w| w[0].0 == w[1].0) {
            return Err(Error::DuplicatePoints);
        }
        let n = pieces.len();
        let all_same = pieces.iter().all(|p| p.1 == pieces[0].1);
        let pieces = if all_same {
            alloc::vec![pieces[0]]
        } else {
            (0..n).filter(|&i| pieces[i].1 != pieces[(i + n - 1) % n].1).map(|i| pieces[i]).collect()
        };
        Ok(StepFunction { pieces })
    }

    pub fn constant(label: TypeLabel) -> Self {
        StepFunction { pieces: alloc::vec![(CirclePoint::default(), label)] }
    }

    /// Pieces of lengths `gaps` laid out anticlockwise from `start`.
    pub fn from_gaps(gaps: &GapVector, start: f64, labels: &[TypeLabel]) -> Result<Self> {
        if labels.len() != gaps.len() {
            return Err(Error::ShapeMismatch(1, gaps.len(), 1, labels.len()));
        }
        StepFunction::new(gaps.positions(start).into_iter().zip(labels.iter().copied()).collect())
    }

    pub fn pieces(&self) -> &[(CirclePoint, TypeLabel)] {
        &self.pieces
    }

    pub fn len(&self) -> usize {
        self.pieces.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pieces.is_empty()
    }

    pub fn starts(&self) -> Vec<CirclePoint> {
        self.pieces.iter().map(|p| p.0).collect()
    }

    /// Index of the piece whose arc contains `e`.
    pub fn piece_containing(&self, e: CirclePoint) -> usize {
        let k = self.pieces.partition_point(|p| p.0 <= e);
        if k == 0 {
            self.pieces.len() - 1
        } else {
            k - 1
        }
    }

    pub fn evaluate(&self, e: CirclePoint) -> TypeLabel {
        self.pieces[self.piece_containing(e)].1
    }

    /// `[start_i, start_{i+1})` of piece `i`; both ends equal for a constant.
    pub fn piece_arc(&self, i: usize) -> (CirclePoint, CirclePoint) {
        let n = self.pieces.len();
        (self.pieces[i].0, self.pieces[(i + 1) % n].0)
    }

    /// Length of piece `i`.
    pub fn piece_width(&self, i: usize) -> f64 {
        match self.piece_arc(i) {
            _ if self.pieces.len() == 1 => 1.0,
            (u, v) => crate::geometry::arc_length(u, v),
        }
    }

    pub fn distinct_labels(&self) -> usize {
        let mut labels: Vec<f64> = self.pieces.iter().map(|p| p.1 .0).collect();
        labels.sort_by(f64::total_cmp);
        labels.dedup();
        labels.len()
    }

    /// The step function read off a coalescing system of its boundaries:
    /// pieces whose arc collapsed are dropped.
    fn read_boundaries(&self, state: &CoalescingState) -> Result<Self> {
        let gaps = state.rank_gaps();
        let positions = state.particle_positions();
        let pieces = (0..gaps.len())
            .filter(|&r| gaps[r] > 0.0)
            .map(|r| {
                let i = state.caller_index(r);
                (positions[i], self.pieces[i].1)
            })
            .collect();
        StepFunction::new(pieces)
    }
}

/// Site-indexed law of the initial types for a diffuse initial condition.
#[derive(Debug, Clone, Copy)]
pub enum LabelSampler {
    /// Uniform on `[0, 1]` at every site.
    Uniform,
    /// Uniform on `[(1 - w)·e, (1 - w)·e + w]` at site `e`.
    SiteWindow { width: f64 },
    Custom(fn(CirclePoint, &mut dyn RngCore) -> TypeLabel),
}

impl LabelSampler {
    pub fn sample<R: Rng>(&self, site: CirclePoint, rng: &mut R) -> TypeLabel {
        match *self {
            LabelSampler::Uniform => TypeLabel(rng.random::<f64>()),
            LabelSampler::SiteWindow { width } => {
                let lo = (1.0 - width) * site.position();
                TypeLabel((lo + width * rng.random::<f64>()).min(1.0))
            }
            LabelSampler::Custom(f) => f(site, rng),
        }
    }
}

#[derive(Debug, Clone)]
pub enum InitialCondition {
    Atomic(StepFunction),
    Diffuse(LabelSampler),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FixationOutcome {
    /// First time a single type occupies the whole circle.
    pub t: f64,
    /// The surviving type.
    pub kappa: TypeLabel,
}

/// State at time `ε`: flow preimage intervals carrying types read from the
/// initial condition at the image points.
pub fn entrance<R: Rng>(mu: &InitialCondition, eps: f64, grid: &GridConfig, rng: &mut R) -> Result<StepFunction> {
    let snap = flow_snapshot(eps, grid, rng)?;
    let pieces = snap
        .boundaries
        .iter()
        .zip(&snap.image_points)
        .map(|(&u, &v)| {
            let label = match mu {
                InitialCondition::Atomic(nu) => nu.evaluate(v),
                InitialCondition::Diffuse(sampler) => sampler.sample(v, rng),
            };
            (u, label)
        })
        .collect();
    StepFunction::new(pieces)
}

/// Moves the boundaries of `x` for time `duration` as a coalescing system.
pub fn evolve<R: Rng + ?Sized>(x: &StepFunction, duration: f64, cfg: &EngineConfig, rng: &mut R) -> Result<StepFunction> {
    if duration.is_nan() || duration < 0.0 {
        return Err(Error::Domain { name: "duration", value: duration });
    }
    if x.len() == 1 {
        return Ok(x.clone());
    }
    let mut state = CoalescingState::init(&x.starts())?;
    state.evolve_to(duration, cfg, rng);
    x.read_boundaries(&state)
}

/// Evolves `x` from time `t0` until a single type is left.
pub fn fixation_from<R: Rng + ?Sized>(
    x: &StepFunction,
    t0: f64,
    cfg: &EngineConfig,
    rng: &mut R,
) -> Result<FixationOutcome> {
    let mut x = x.clone();
    let mut t = t0;
    while x.len() > 1 {
        let mut state = CoalescingState::init(&x.starts())?;
        let n = state.alive();
        while state.alive() == n {
            if t + state.time() > SAFETY_HORIZON {
                return Err(Error::HorizonExceeded { horizon: SAFETY_HORIZON, alive: n });
            }
            state.step(cfg, rng);
        }
        t += state.time();
        x = x.read_boundaries(&state)?;
    }
    Ok(FixationOutcome { t, kappa: x.pieces[0].1 })
}

/// Fixation together with the state it started from.
#[derive(Debug, Clone, PartialEq)]
pub struct FixationRecord {
    pub outcome: FixationOutcome,
    /// The entrance state at `ε` (diffuse) or the atomic initial state.
    pub start: StepFunction,
}

impl FixationRecord {
    /// Arc of the starting piece whose type prevails.
    pub fn prevailing_interval(&self) -> (CirclePoint, CirclePoint) {
        let i = self
            .start
            .pieces()
            .iter()
            .position(|p| p.1 == self.outcome.kappa)
            .expect("the survivor is one of the starting labels");
        self.start.piece_arc(i)
    }
}

pub fn run_fixation_record<R: Rng>(
    mu: &InitialCondition,
    eps: f64,
    grid: &GridConfig,
    cfg: &EngineConfig,
    rng: &mut R,
) -> Result<FixationRecord> {
    let (start, t0) = match mu {
        InitialCondition::Atomic(nu) => (nu.clone(), 0.0),
        InitialCondition::Diffuse(_) => {
            if !(eps.is_finite() && eps > 0.0) {
                return Err(Error::Domain { name: "eps", value: eps });
            }
            (entrance(mu, eps, grid, rng)?, eps)
        }
    };
    let outcome = fixation_from(&start, t0, cfg, rng)?;
    Ok(FixationRecord { outcome, start })
}

/// Fixation time and surviving type. For a diffuse `μ` the run starts from
/// the entrance state at `ε`; an atomic initial state evolves from time 0
/// and ignores `ε`.
pub fn run_fixation<R: Rng>(
    mu: &InitialCondition,
    eps: f64,
    grid: &GridConfig,
    cfg: &EngineConfig,
    rng: &mut R,
) -> Result<FixationOutcome> {
    Ok(run_fixation_record(mu, eps, grid, cfg, rng)?.outcome)
}

/// The entrance interval `[U′, U″)` whose type eventually prevails.
pub fn prevailing_interval<R: Rng>(
    sampler: LabelSampler,
    eps: f64,
    grid: &GridConfig,
    cfg: &EngineConfig,
    rng: &mut R,
) -> Result<(CirclePoint, CirclePoint)> {
    let mu = InitialCondition::Diffuse(sampler);
    Ok(run_fixation_record(&mu, eps, grid, cfg, rng)?.prevailing_interval())
}

/// A probe `X_t(z) = k`.
pub type Probe = (CirclePoint, TypeLabel);

/// Monte Carlo estimates of both sides of
/// `P{X_t(z_j) = k_j ∀j | X_s = ν} = P{ν(Z_j(t - s)) = k_j ∀j}`, where `Z`
/// is a coalescing system started at the probe sites. The two sides use
/// independent streams derived from `seed`.
pub fn moment_duality_check(
    nu: &StepFunction,
    s: f64,
    t: f64,
    probes: &[Probe],
    cfg: &EngineConfig,
    reps: usize,
    seed: u64,
) -> Result<(EmpiricalSummary, EmpiricalSummary)> {
    if !(s >= 0.0 && t > s && t.is_finite()) {
        return Err(Error::Domain { name: "t - s", value: t - s });
    }
    if probes.is_empty() {
        return Err(Error::Empty);
    }
    let sites: Vec<CirclePoint> = probes.iter().map(|p| p.0).collect();
    let backward_start = CoalescingState::init(&sites)?;
    let dur = t - s;

    let forward = replicate_map(reps, derive_seed(seed, 1), |_, rng: &mut SimRng| {
        let x = evolve(nu, dur, cfg, rng).expect("valid step function");
        probes.iter().all(|&(z, k)| x.evaluate(z) == k) as u8 as f64
    });
    let backward = replicate_map(reps, derive_seed(seed, 2), |_, rng: &mut SimRng| {
        let mut state = backward_start.clone();
        state.evolve_to(dur, cfg, rng);
        let at = state.particle_positions();
        probes.iter().zip(&at).all(|(&(_, k), &p)| nu.evaluate(p) == k) as u8 as f64
    });
    Ok((EmpiricalSummary::from_samples(&forward, false)?, EmpiricalSummary::from_samples(&backward, false)?))
}

/// Whether `e` lies in piece `i` of `x`.
pub fn in_piece(x: &StepFunction, i: usize, e: CirclePoint) -> bool {
    if x.len() == 1 {
        return true;
    }
    let (u, v) = x.piece_arc(i);
    in_arc(e, u, v)
}
