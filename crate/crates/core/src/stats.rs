//! Replicate drivers, Monte Carlo summaries and the tests that turn
//! distributional identities into pass/fail reports.
//!
//! Replicate `i` of a run always draws from stream `i` of the run's master
//! seed (see [`crate::rng`]) and results are gathered in replicate order, so
//! every summary is bit-reproducible whatever the worker count.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use crate::analytics::{cdf_tm, mean_tm, SeriesControl};
use crate::engine::BinaryMatrix;
use crate::rng::{replicate_rng, SimRng};
use crate::{Error, GapVector, Result};

/// Runs `f` for replicates `0..reps` and returns the results in order.
#[cfg(feature = "parallel")]
pub fn replicate_map<T, F>(reps: usize, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, &mut SimRng) -> T + Sync + Send,
{
    use rayon::prelude::*;
    (0..reps as u64)
        .into_par_iter()
        .map(|i| f(i, &mut replicate_rng(master_seed, i)))
        .collect()
}

/// Runs `f` for replicates `0..reps` and returns the results in order.
#[cfg(not(feature = "parallel"))]
pub fn replicate_map<T, F>(reps: usize, master_seed: u64, f: F) -> Vec<T>
where
    F: Fn(u64, &mut SimRng) -> T,
{
    (0..reps as u64).map(|i| f(i, &mut replicate_rng(master_seed, i))).collect()
}

/// Mean and standard error of `sampler` over `reps` seeded replicates.
pub fn mc_estimate<F>(sampler: F, reps: usize, master_seed: u64) -> Result<EmpiricalSummary>
where
    F: Fn(&mut SimRng) -> f64 + Sync + Send,
{
    if reps < 2 {
        return Err(Error::TooFewReplicates(reps));
    }
    let xs = replicate_map(reps, master_seed, |_, rng| sampler(rng));
    EmpiricalSummary::from_samples(&xs, false)
}

/// Pairwise (cascade) summation.
pub fn pairwise_sum(xs: &[f64]) -> f64 {
    if xs.len() <= 16 {
        xs.iter().sum()
    } else {
        let (a, b) = xs.split_at(xs.len() / 2);
        pairwise_sum(a) + pairwise_sum(b)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EmpiricalSummary {
    pub n: usize,
    pub mean: f64,
    /// Sample standard deviation over `√n`.
    pub stderr: f64,
    /// Sorted samples, when requested.
    pub ecdf: Option<Vec<f64>>,
}

impl EmpiricalSummary {
    pub fn from_samples(samples: &[f64], keep_ecdf: bool) -> Result<Self> {
        let n = samples.len();
        if n < 2 {
            return Err(Error::TooFewReplicates(n));
        }
        let mean = pairwise_sum(samples) / n as f64;
        let sq: Vec<f64> = samples.iter().map(|x| (x - mean) * (x - mean)).collect();
        let var = pairwise_sum(&sq) / (n - 1) as f64;
        let ecdf = keep_ecdf.then(|| {
            let mut s = samples.to_vec();
            s.sort_by(f64::total_cmp);
            s
        });
        Ok(EmpiricalSummary { n, mean, stderr: libm::sqrt(var / n as f64), ecdf })
    }

    /// `|mean - expected| / stderr`; infinite for a mismatched zero-variance
    /// estimate.
    pub fn z_score(&self, expected: f64) -> f64 {
        let d = (self.mean - expected).abs();
        if d == 0.0 {
            0.0
        } else {
            d / self.stderr
        }
    }

    /// Empirical CDF at `x`, if samples were kept.
    pub fn ecdf_at(&self, x: f64) -> Option<f64> {
        let s = self.ecdf.as_ref()?;
        Some(s.partition_point(|&v| v <= x) as f64 / s.len() as f64)
    }
}

/// Outcome of one gated check: `passed ⇔ statistic ≤ threshold`.
#[derive(Debug, Clone, PartialEq)]
pub struct TestReport {
    pub statistic: f64,
    pub threshold: f64,
    pub passed: bool,
    pub description: String,
}

impl TestReport {
    pub fn new(statistic: f64, threshold: f64, description: impl Into<String>) -> Self {
        TestReport { statistic, threshold, passed: statistic <= threshold, description: description.into() }
    }

    /// `|estimate - expected|` against `k` standard errors.
    pub fn within_stderr(est: &EmpiricalSummary, expected: f64, k: f64, description: impl Into<String>) -> Self {
        TestReport::new((est.mean - expected).abs(), k * est.stderr, description)
    }

    /// `|a - b|` against `k` combined standard errors.
    pub fn agree(a: &EmpiricalSummary, b: &EmpiricalSummary, k: f64, description: impl Into<String>) -> Self {
        let se = libm::sqrt(a.stderr * a.stderr + b.stderr * b.stderr);
        TestReport::new((a.mean - b.mean).abs(), k * se, description)
    }
}

/// Multiple of standard errors used for mean checks.
pub const STDERR_MULTIPLE: f64 = 3.0;

/// KS budget: 0.02 at `n ≥ 20 000`, widened for smaller samples to keep the
/// 1% critical value `1.628/√n` plus a fixed 0.0084 discretization
/// allowance.
pub fn default_ks_threshold(n: usize) -> f64 {
    let crit = 1.628 / libm::sqrt(n as f64) + 0.0084;
    if crit > 0.02 {
        crit
    } else {
        0.02
    }
}

/// Kolmogorov–Smirnov distance between the samples and `cdf`.
pub fn ks_statistic(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    let mut d: f64 = 0.0;
    for (i, &x) in s.iter().enumerate() {
        let f = cdf(x);
        d = d.max((i as f64 + 1.0) / n - f).max(f - i as f64 / n);
    }
    d
}

pub fn ks_compare(samples: &[f64], cdf: impl Fn(f64) -> f64, threshold: f64, description: impl Into<String>) -> TestReport {
    TestReport::new(ks_statistic(samples, cdf), threshold, description)
}

/// Largest number of cells a joint binary law may have.
pub const MAX_JOINT_CELLS: usize = 12;

/// Multiplier `C` in the TV threshold `C·√(cells/reps)`.
pub const TV_THRESHOLD_SCALE: f64 = 3.0;

/// Empirical joint laws of two random binary matrices and their total
/// variation distance.
#[derive(Debug, Clone, PartialEq)]
pub struct JointComparison {
    pub rows: usize,
    pub cols: usize,
    pub tv: f64,
    /// Distinct cells observed on either side.
    pub cells: usize,
    pub report: TestReport,
}

/// Compares the laws of two matrix-valued samplers (independent streams
/// `seed_a`, `seed_b`) by total variation over the observed cells.
pub fn joint_binary_compare<FA, FB>(
    sampler_a: FA,
    sampler_b: FB,
    reps: usize,
    seed_a: u64,
    seed_b: u64,
) -> Result<JointComparison>
where
    FA: Fn(u64, &mut SimRng) -> BinaryMatrix + Sync + Send,
    FB: Fn(u64, &mut SimRng) -> BinaryMatrix + Sync + Send,
{
    if reps < 2 {
        return Err(Error::TooFewReplicates(reps));
    }
    let a = replicate_map(reps, seed_a, sampler_a);
    let b = replicate_map(reps, seed_b, sampler_b);
    compare_matrix_samples(&a, &b)
}

/// TV distance between the empirical laws of two equally shaped matrix samples.
pub fn compare_matrix_samples(a: &[BinaryMatrix], b: &[BinaryMatrix]) -> Result<JointComparison> {
    let first = a.first().or(b.first()).ok_or(Error::TooFewReplicates(0))?;
    let (rows, cols) = (first.rows(), first.cols());
    let cells = rows * cols;
    if cells > MAX_JOINT_CELLS {
        return Err(Error::TooManyCells(cells));
    }
    let mut counts_a = alloc::vec![0u64; 1 << cells];
    let mut counts_b = alloc::vec![0u64; 1 << cells];
    for (sample, counts) in [(a, &mut counts_a), (b, &mut counts_b)] {
        for m in sample {
            if (m.rows(), m.cols()) != (rows, cols) {
                return Err(Error::ShapeMismatch(rows, cols, m.rows(), m.cols()));
            }
            counts[m.code().expect("at most 12 cells") as usize] += 1;
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let mut tv = 0.0;
    let mut observed = 0;
    for (ca, cb) in counts_a.iter().zip(&counts_b) {
        if *ca > 0 || *cb > 0 {
            observed += 1;
        }
        tv += (*ca as f64 / na - *cb as f64 / nb).abs();
    }
    tv *= 0.5;
    let reps = a.len().min(b.len()) as f64;
    let threshold = TV_THRESHOLD_SCALE * libm::sqrt(observed as f64 / reps);
    let report = TestReport::new(tv, threshold, format!("TV distance of {rows}x{cols} indicator-array laws"));
    Ok(JointComparison { rows, cols, tv, cells: observed, report })
}

/// Pearson chi-square statistic of `samples` in `[0, 1)` against the uniform
/// law on `bins` equal bins.
pub fn chi_square_uniform(samples: &[f64], bins: usize) -> f64 {
    let mut counts = alloc::vec![0u64; bins];
    for &x in samples {
        let k = ((x * bins as f64) as usize).min(bins - 1);
        counts[k] += 1;
    }
    let expected = samples.len() as f64 / bins as f64;
    counts.iter().map(|&c| (c as f64 - expected) * (c as f64 - expected) / expected).sum()
}

/// Wilson–Hilferty approximation of the upper chi-square quantile with
/// `dof` degrees of freedom at standard-normal quantile `z`.
pub fn chi_square_critical(dof: usize, z: f64) -> f64 {
    let k = dof as f64;
    let c = 2.0 / (9.0 * k);
    let base = 1.0 - c + z * libm::sqrt(c);
    k * base * base * base
}

/// Standard-normal 0.99 quantile.
pub const Z_99: f64 = 2.326_347_874_040_841;

/// One configuration of a spacing scan.
#[derive(Debug, Clone, PartialEq)]
pub struct SpacingRow {
    pub gaps: GapVector,
    pub mean_tm: f64,
    /// `P{T_m ≤ t}` for each scanned `t`.
    pub cdf: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpacingScan {
    pub t_list: Vec<f64>,
    pub rows: Vec<SpacingRow>,
    /// Per `t`, the row index minimizing `P{T_m ≤ t}`.
    pub cdf_argmin: Vec<usize>,
    pub cdf_argmax: Vec<usize>,
    pub mean_argmax: usize,
    /// `max_config mean_tm - mean_tm(equal spacing)`, which must be `≤ 0`.
    pub mean_report: TestReport,
}

/// Closed-form scan of `E[T_m]` and `P{T_m ≤ t}` over gap configurations.
///
/// Only the maximality of the mean at equal spacing is gated; the CDF
/// extremes are reported for exploration.
pub fn spacing_scan(configs: &[GapVector], t_list: &[f64], ctrl: &SeriesControl) -> Result<SpacingScan> {
    let m = configs.first().ok_or(Error::Empty)?.len();
    let mut rows = Vec::with_capacity(configs.len());
    for g in configs {
        if g.len() != m {
            return Err(Error::ShapeMismatch(1, m, 1, g.len()));
        }
        let cdf = t_list.iter().map(|&t| cdf_tm(t, g, ctrl)).collect::<Result<Vec<_>>>()?;
        rows.push(SpacingRow { gaps: g.clone(), mean_tm: mean_tm(g)?, cdf });
    }
    let argbest = |key: &dyn Fn(&SpacingRow) -> f64, max: bool| {
        let mut best = 0;
        for (i, r) in rows.iter().enumerate() {
            let (v, b) = (key(r), key(&rows[best]));
            if (max && v > b) || (!max && v < b) {
                best = i;
            }
        }
        best
    };
    let cdf_argmin = (0..t_list.len()).map(|k| argbest(&|r: &SpacingRow| r.cdf[k], false)).collect();
    let cdf_argmax = (0..t_list.len()).map(|k| argbest(&|r: &SpacingRow| r.cdf[k], true)).collect();
    let mean_argmax = argbest(&|r: &SpacingRow| r.mean_tm, true);
    let equal = mean_tm(&GapVector::equal(m)?)?;
    let excess = rows[mean_argmax].mean_tm - equal;
    let mean_report = TestReport::new(
        excess,
        1e-15,
        format!("E[T_{m}] over {} configurations never exceeds its equal-spacing value", rows.len()),
    );
    Ok(SpacingScan { t_list: t_list.to_vec(), rows, cdf_argmin, cdf_argmax, mean_argmax, mean_report })
}

/// All gap vectors `(k_1/d, ..., k_m/d)` with positive integers `k_i`
/// summing to `d`.
pub fn composition_grid(m: usize, density: usize) -> Result<Vec<GapVector>> {
    if m == 0 || density < m {
        return Err(Error::Domain { name: "grid_density", value: density as f64 });
    }
    let mut out = Vec::new();
    let mut parts = alloc::vec![1usize; m];
    fn rec(i: usize, left: usize, parts: &mut [usize], density: usize, out: &mut Vec<GapVector>) {
        let m = parts.len();
        if i == m - 1 {
            parts[i] = left;
            let mut g: Vec<f64> = parts.iter().map(|&k| k as f64 / density as f64).collect();
            let rest: f64 = g[..m - 1].iter().sum();
            g[m - 1] = 1.0 - rest;
            out.push(GapVector::new(g).expect("positive composition"));
            return;
        }
        for k in 1..=left - (m - 1 - i) {
            parts[i] = k;
            rec(i + 1, left - k, parts, density, out);
        }
    }
    rec(0, density, &mut parts, density, &mut out);
    Ok(out)
}
