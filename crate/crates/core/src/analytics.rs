//! Closed forms for circular coalescing Brownian motion.
//!
//! All particles are standard Brownian motions, so the gap between two
//! neighbours diffuses with variance `2t`. Gap `g` "wins" when it grows to
//! the whole circle before collapsing; its Laplace transform is
//! `sinh(g√λ)/sinh(√λ)` and the events "gap i wins" are disjoint, which gives
//! the full-coalescence time `T_m` of `m` particles.
//!
//! The infinite sums are theta series in `exp(-n²π²t)`. They are truncated
//! once a geometric bound on the remainder drops below
//! [`SeriesControl::abs_tol`].

use core::f64::consts::PI;

use crate::{Error, GapVector, Result};

const PI2: f64 = PI * PI;

/// Truncation policy for theta series.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesControl {
    pub abs_tol: f64,
    pub max_terms: u32,
}

impl SeriesControl {
    pub fn new(abs_tol: f64, max_terms: u32) -> Result<Self> {
        if !(abs_tol.is_finite() && abs_tol > 0.0) {
            return Err(Error::Domain { name: "abs_tol", value: abs_tol });
        }
        if max_terms == 0 {
            return Err(Error::Domain { name: "max_terms", value: 0.0 });
        }
        Ok(SeriesControl { abs_tol, max_terms })
    }
}

impl Default for SeriesControl {
    fn default() -> Self {
        SeriesControl { abs_tol: 1e-12, max_terms: 10_000 }
    }
}

fn check_positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::Domain { name, value })
    }
}

fn check_gap(g: f64) -> Result<()> {
    if g.is_finite() && g > 0.0 && g < 1.0 {
        Ok(())
    } else {
        Err(Error::Domain { name: "g", value: g })
    }
}

fn check_multi(gaps: &GapVector) -> Result<()> {
    if gaps.len() < 2 {
        Err(Error::TooFewParticles(gaps.len()))
    } else {
        Ok(())
    }
}

/// `Σ_{n≥1} coef(n)·exp(-n²π²t)` where `|coef(n)| ≤ coef_bound`.
///
/// Stops after term `N` once the remainder bound
/// `coef_bound·e^{-(N+1)²π²t} / (1 - e^{-(2N+3)π²t})` is below the tolerance.
fn theta_sum(t: f64, ctrl: &SeriesControl, coef_bound: f64, coef: impl Fn(u32) -> f64) -> Result<f64> {
    let mut sum = 0.0;
    let mut bound = f64::INFINITY;
    for n in 1..=ctrl.max_terms {
        let nf = n as f64;
        sum += coef(n) * libm::exp(-nf * nf * PI2 * t);
        let next = nf + 1.0;
        let ratio = libm::exp(-(2.0 * next + 1.0) * PI2 * t);
        bound = coef_bound * libm::exp(-next * next * PI2 * t) / (1.0 - ratio);
        if bound < ctrl.abs_tol {
            return Ok(sum);
        }
    }
    Err(Error::SeriesTruncation { tol: ctrl.abs_tol, terms: ctrl.max_terms, bound })
}

/// `E[exp(-λ S)]` on the event that a gap of length `g` wins:
/// `sinh(g√λ)/sinh(√λ)`.
pub fn laplace_gap_win(lambda: f64, g: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    check_gap(g)?;
    // sinh(gs)/sinh(s) = e^{-(1-g)s} (1 - e^{-2gs}) / (1 - e^{-2s}), stable for all s
    let s = libm::sqrt(lambda);
    Ok(libm::exp(-(1.0 - g) * s) * libm::expm1(-2.0 * g * s) / libm::expm1(-2.0 * s))
}

/// `E[exp(-λ T_m)] = Σ_i sinh(g_i√λ)/sinh(√λ)`.
pub fn laplace_tm(lambda: f64, gaps: &GapVector) -> Result<f64> {
    check_multi(gaps)?;
    let mut total = 0.0;
    for &g in gaps.as_slice() {
        total += laplace_gap_win(lambda, g)?;
    }
    Ok(total)
}

/// `E[T_m] = (1 - Σ g_i³)/6`.
///
/// Maximal, with value `(1 - 1/m²)/6`, exactly at equal spacing.
pub fn mean_tm(gaps: &GapVector) -> Result<f64> {
    check_multi(gaps)?;
    let cubes: f64 = gaps.as_slice().iter().map(|g| g * g * g).sum();
    Ok((1.0 - cubes) / 6.0)
}

/// `P{gap g wins by time t} = g + (2/π) Σ (-1)ⁿ/n · sin(nπg) · e^{-n²π²t}`.
pub fn cdf_gap_win(t: f64, g: f64, ctrl: &SeriesControl) -> Result<f64> {
    check_positive("t", t)?;
    check_gap(g)?;
    let tail = theta_sum(t, ctrl, 2.0 / PI, |n| {
        let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
        2.0 / PI * sign / n as f64 * libm::sin(n as f64 * PI * g)
    })?;
    Ok((g + tail).clamp(0.0, g))
}

/// `P{T_m ≤ t} = Σ_i P{gap i wins by t}`.
pub fn cdf_tm(t: f64, gaps: &GapVector, ctrl: &SeriesControl) -> Result<f64> {
    check_multi(gaps)?;
    let mut total = 0.0;
    for &g in gaps.as_slice() {
        total += cdf_gap_win(t, g, ctrl)?;
    }
    Ok(total.clamp(0.0, 1.0))
}

/// Laplace transform of the fixation time for diffuse initial types:
/// `√λ / sinh(√λ)`.
pub fn laplace_fixation(lambda: f64) -> Result<f64> {
    check_positive("lambda", lambda)?;
    let s = libm::sqrt(lambda);
    // 2s e^{-s} / (1 - e^{-2s})
    Ok(-2.0 * s * libm::exp(-s) / libm::expm1(-2.0 * s))
}

/// `P{T ≤ t} = 1 + 2 Σ (-1)ⁿ e^{-n²π²t}` for diffuse initial types; also the
/// law of the time the Arratia flow's image collapses to a single point.
pub fn cdf_fixation(t: f64, ctrl: &SeriesControl) -> Result<f64> {
    check_positive("t", t)?;
    let tail = theta_sum(t, ctrl, 2.0, |n| if n % 2 == 0 { 2.0 } else { -2.0 })?;
    Ok((1.0 + tail).clamp(0.0, 1.0))
}

/// Lower bound on `P{T ≤ t}` valid for every initial condition.
///
/// Same series as [`cdf_fixation`]; diffuse initial types attain it.
pub fn cdf_fixation_lower_bound(t: f64, ctrl: &SeriesControl) -> Result<f64> {
    cdf_fixation(t, ctrl)
}

/// Expected number of Arratia-flow clusters at time `t`:
/// `1 + 2 Σ e^{-n²π²t}`.
pub fn mean_cluster_count(t: f64, ctrl: &SeriesControl) -> Result<f64> {
    check_positive("t", t)?;
    let tail = theta_sum(t, ctrl, 2.0, |_| 2.0)?;
    Ok(1.0 + tail)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec::Vec;
    use proptest::prelude::*;

    fn ctrl() -> SeriesControl {
        SeriesControl::default()
    }

    fn gaps(g: &[f64]) -> GapVector {
        GapVector::new(g.to_vec()).unwrap()
    }

    // Method-of-images form of P{gap g wins by t}: independent of the
    // eigenfunction series used by `cdf_gap_win`.
    fn cdf_gap_images(t: f64, g: f64) -> f64 {
        let s = 2.0 * t.sqrt();
        (0..200)
            .map(|k| {
                let k = k as f64;
                libm::erfc((2.0 * k + 1.0 - g) / s) - libm::erfc((2.0 * k + 1.0 + g) / s)
            })
            .sum()
    }

    // Poisson-dual forms of the theta series.
    fn cdf_fixation_dual(t: f64) -> f64 {
        2.0 / (PI * t).sqrt()
            * (0..200)
                .map(|k| {
                    let o = 2.0 * k as f64 + 1.0;
                    (-o * o / (4.0 * t)).exp()
                })
                .sum::<f64>()
    }

    fn mean_cluster_dual(t: f64) -> f64 {
        1.0 / (PI * t).sqrt()
            * (-200..=200)
                .map(|k| {
                    let k = k as f64;
                    (-k * k / t).exp()
                })
                .sum::<f64>()
    }

    #[test]
    fn laplace_values() {
        // mpmath, 30 digits
        assert!((laplace_gap_win(1.0, 0.5).unwrap() - 0.443409441985037).abs() < 1e-14);
        assert!((laplace_tm(1.0, &gaps(&[0.5, 0.5])).unwrap() - 0.886818883970074).abs() < 1e-14);
        assert!((laplace_tm(1.0, &gaps(&[0.3, 0.7])).unwrap() - 0.904614461793083).abs() < 1e-14);
        assert!((laplace_fixation(1.0).unwrap() - 0.850918128239322).abs() < 1e-14);
    }

    #[test]
    fn laplace_limits() {
        assert!((laplace_gap_win(1e-12, 0.3).unwrap() - 0.3).abs() < 1e-9);
        assert!((laplace_gap_win(1.0, 1.0 - 1e-12).unwrap() - 1.0).abs() < 1e-9);
        assert!((laplace_tm(1e-12, &gaps(&[0.2, 0.3, 0.5])).unwrap() - 1.0).abs() < 1e-9);
        assert!((laplace_fixation(1e-12).unwrap() - 1.0).abs() < 1e-9);
        // no overflow for huge λ
        let v = laplace_gap_win(1e8, 0.5).unwrap();
        assert!((0.0..1e-100).contains(&v));
        assert!(laplace_fixation(1e8).unwrap().is_finite());
    }

    #[test]
    fn laplace_fixation_slope_at_zero_is_one_sixth() {
        let h = 1e-5;
        let slope = (1.0 - laplace_fixation(h).unwrap()) / h;
        assert!((slope - 1.0 / 6.0).abs() < 1e-5);
    }

    #[test]
    fn domain_errors() {
        assert!(matches!(laplace_gap_win(0.0, 0.5), Err(Error::Domain { name: "lambda", .. })));
        assert!(matches!(laplace_gap_win(1.0, 1.0), Err(Error::Domain { name: "g", .. })));
        assert!(matches!(laplace_gap_win(1.0, 0.0), Err(Error::Domain { name: "g", .. })));
        assert!(matches!(cdf_fixation(-1.0, &ctrl()), Err(Error::Domain { name: "t", .. })));
        assert_eq!(laplace_tm(1.0, &gaps(&[1.0])), Err(Error::TooFewParticles(1)));
        assert_eq!(mean_tm(&gaps(&[1.0])), Err(Error::TooFewParticles(1)));
        assert!(SeriesControl::new(0.0, 10).is_err());
        assert!(SeriesControl::new(1e-12, 0).is_err());
    }

    #[test]
    fn mean_tm_matches_two_particle_absorption() {
        // variance-2 gap absorbed at 0 or 1 from g: mean exit time g(1-g)/2
        for g in [0.1, 0.2, 0.3, 0.5] {
            let m = mean_tm(&gaps(&[g, 1.0 - g])).unwrap();
            assert!((m - g * (1.0 - g) / 2.0).abs() < 1e-15);
        }
        assert!((mean_tm(&gaps(&[0.5, 0.5])).unwrap() - 0.125).abs() < 1e-15);
        let eq3 = mean_tm(&GapVector::equal(3).unwrap()).unwrap();
        assert!((eq3 - (1.0 - 1.0 / 9.0) / 6.0).abs() < 1e-15);
        assert!((eq3 - 0.148148).abs() < 1e-6);
    }

    #[test]
    fn mean_tm_is_minus_laplace_slope() {
        let gv = gaps(&[0.2, 0.3, 0.5]);
        let h = 1e-6;
        let slope = (1.0 - laplace_tm(h, &gv).unwrap()) / h;
        assert!((slope - mean_tm(&gv).unwrap()).abs() < 1e-6);
    }

    #[test]
    fn cdf_gap_win_against_images() {
        for &(t, g) in &[(0.1, 0.5), (0.05, 0.2), (0.3, 0.3), (0.01, 0.5), (0.002, 0.9), (2.0, 0.7)] {
            let series = cdf_gap_win(t, g, &ctrl()).unwrap();
            assert!((series - cdf_gap_images(t, g)).abs() < 1e-11, "t={t} g={g}");
        }
        // mpmath (Talbot inversion of sinh(g√λ)/(λ sinh √λ))
        assert!((cdf_gap_win(0.1, 0.5, &ctrl()).unwrap() - 0.262756269810125).abs() < 1e-11);
        assert!((cdf_gap_win(0.05, 0.2, &ctrl()).unwrap() - 0.0112642340756672).abs() < 1e-11);
    }

    #[test]
    fn cdf_gap_win_limits() {
        assert!((cdf_gap_win(50.0, 0.3, &ctrl()).unwrap() - 0.3).abs() < 1e-12);
        assert!(cdf_gap_win(1e-4, 0.5, &ctrl()).unwrap() < 1e-12);
    }

    #[test]
    fn cdf_tm_values() {
        let two = gaps(&[0.5, 0.5]);
        assert!((cdf_tm(0.1, &two, &ctrl()).unwrap() - 0.525512539620251).abs() < 1e-11);
        assert!((cdf_tm(0.1, &gaps(&[0.2, 0.8]), &ctrl()).unwrap() - 0.721012632635625).abs() < 1e-11);
        assert!((cdf_tm(60.0, &gaps(&[0.2, 0.3, 0.5]), &ctrl()).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn fixation_and_cluster_series() {
        assert!((cdf_fixation(0.1, &ctrl()).unwrap() - 0.292899651842241).abs() < 1e-11);
        assert!((cdf_fixation(0.05, &ctrl()).unwrap() - 0.0340014664100814).abs() < 1e-11);
        assert!((cdf_fixation(60.0, &ctrl()).unwrap() - 1.0).abs() < 1e-12);
        assert!(cdf_fixation(1e-3, &ctrl()).unwrap() < 1e-12);
        assert_eq!(cdf_fixation(0.2, &ctrl()), cdf_fixation_lower_bound(0.2, &ctrl()));

        assert!((mean_cluster_count(0.1, &ctrl()).unwrap() - 1.78428611437189).abs() < 1e-11);
        assert!((mean_cluster_count(0.05, &ctrl()).unwrap() - 2.52313253242129).abs() < 1e-11);
        assert!((mean_cluster_count(0.5, &ctrl()).unwrap() - 1.01438377206223).abs() < 1e-11);
        assert!((mean_cluster_count(60.0, &ctrl()).unwrap() - 1.0).abs() < 1e-12);

        for t in [1e-3, 0.01, 0.05, 0.1, 0.3, 1.0] {
            assert!((cdf_fixation(t, &ctrl()).unwrap() - cdf_fixation_dual(t)).abs() < 1e-10, "t={t}");
            assert!((mean_cluster_count(t, &ctrl()).unwrap() - mean_cluster_dual(t)).abs() < 1e-10, "t={t}");
        }
    }

    #[test]
    fn cdf_fixation_integrates_to_mean_one_sixth() {
        // ∫ (1 - F) dt by composite Simpson on [0, 4]; the tail is below 1e-16
        let n = 40_000;
        let h = 4.0 / n as f64;
        let f = |t: f64| if t == 0.0 { 1.0 } else { 1.0 - cdf_fixation(t, &ctrl()).unwrap() };
        let mut s = f(0.0) + f(4.0);
        for i in 1..n {
            s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        assert!((s * h / 3.0 - 1.0 / 6.0).abs() < 1e-8);
    }

    #[test]
    fn truncation_failure_reports_bound() {
        let tight = SeriesControl::new(1e-12, 3).unwrap();
        match cdf_fixation(1e-3, &tight) {
            Err(Error::SeriesTruncation { terms: 3, bound, .. }) => assert!(bound > 1e-12),
            other => panic!("expected truncation error, got {other:?}"),
        }
    }

    #[test]
    fn few_terms_needed_beyond_one_millisecond() {
        let c = SeriesControl::new(1e-12, 60).unwrap();
        assert!(cdf_fixation(1e-3, &c).is_ok());
        assert!(mean_cluster_count(1e-3, &c).is_ok());
        assert!(cdf_gap_win(1e-3, 0.5, &c).is_ok());
    }

    #[test]
    fn dense_equal_gaps_approach_fixation_law() {
        let eq = GapVector::equal(64).unwrap();
        for t in [0.05, 0.1, 0.5] {
            let d = (cdf_tm(t, &eq, &ctrl()).unwrap() - cdf_fixation(t, &ctrl()).unwrap()).abs();
            assert!(d < 2e-3, "t={t} d={d}");
        }
    }

    fn simplex(raw: Vec<f64>) -> GapVector {
        let s: f64 = raw.iter().sum();
        let mut g: Vec<f64> = raw.iter().map(|x| x / s).collect();
        let rest: f64 = g[1..].iter().sum();
        g[0] = 1.0 - rest;
        GapVector::new(g).unwrap()
    }

    proptest! {
        #[test]
        fn equal_spacing_maximizes_mean(raw in proptest::collection::vec(0.01f64..1.0, 2..10)) {
            let gv = simplex(raw);
            let eq = GapVector::equal(gv.len()).unwrap();
            prop_assert!(mean_tm(&gv).unwrap() <= mean_tm(&eq).unwrap() + 1e-15);
        }

        #[test]
        fn cdfs_monotone_and_bounded(
            raw in proptest::collection::vec(0.01f64..1.0, 2..6),
            t1 in 0.005f64..2.0,
            dt in 0.0f64..1.0,
        ) {
            let gv = simplex(raw);
            let t2 = t1 + dt;
            let (a, b) = (cdf_tm(t1, &gv, &ctrl()).unwrap(), cdf_tm(t2, &gv, &ctrl()).unwrap());
            prop_assert!((0.0..=1.0).contains(&a) && (0.0..=1.0).contains(&b));
            prop_assert!(a <= b + 1e-12);
            let (c, d) = (cdf_fixation(t1, &ctrl()).unwrap(), cdf_fixation(t2, &ctrl()).unwrap());
            prop_assert!(c <= d + 1e-12);
            prop_assert!(mean_cluster_count(t1, &ctrl()).unwrap() >= mean_cluster_count(t2, &ctrl()).unwrap() - 1e-12);
        }

        #[test]
        fn laplace_decreasing_in_lambda(
            raw in proptest::collection::vec(0.01f64..1.0, 2..6),
            l1 in 0.01f64..20.0,
            dl in 0.0f64..5.0,
        ) {
            let gv = simplex(raw);
            let l2 = l1 + dl;
            prop_assert!(laplace_tm(l1, &gv).unwrap() >= laplace_tm(l2, &gv).unwrap() - 1e-15);
            prop_assert!(laplace_fixation(l1).unwrap() >= laplace_fixation(l2).unwrap() - 1e-15);
        }
    }
}
