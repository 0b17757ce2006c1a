use thiserror::Error;

pub type Result<T> = core::result::Result<T, Error>;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("point set is empty")]
    Empty,
    #[error("duplicate points on the circle (degenerate configuration)")]
    DuplicatePoints,
    #[error("gaps must be positive and finite")]
    NonPositiveGap,
    #[error("gaps must sum to 1 (sum is {0})")]
    GapSum(f64),
    #[error("{name} = {value} is outside its domain")]
    Domain { name: &'static str, value: f64 },
    #[error("at least two particles are required, got {0}")]
    TooFewParticles(usize),
    #[error("at least two replicates are required, got {0}")]
    TooFewReplicates(usize),
    #[error(
        "series did not reach tolerance {tol:e} within {terms} terms (remainder bound {bound:e})"
    )]
    SeriesTruncation { tol: f64, terms: u32, bound: f64 },
    #[error("no fixation before the safety horizon t = {horizon} ({alive} blocks alive)")]
    HorizonExceeded { horizon: f64, alive: usize },
    #[error("matrix shapes differ: {0}x{1} vs {2}x{3}")]
    ShapeMismatch(usize, usize, usize, usize),
    #[error("joint law over {0} cells is too large (at most 12 cells)")]
    TooManyCells(usize),
    #[error("test arcs overlap")]
    OverlappingArcs,
}
