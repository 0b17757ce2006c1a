//! One function per subcommand: validate, simulate, tabulate.

use circoal::analytics::{
    cdf_fixation, cdf_gap_win, laplace_fixation, laplace_tm, mean_cluster_count, mean_tm, SeriesControl,
};
use circoal::engine::{indicator_array, indicator_array_with, run_until_coalesced, CoalescingState, EngineConfig, Fence};
use circoal::flow::{avoidance_probability, GridConfig, GridFlow, OpenArc, Side};
use circoal::rng::{derive_seed, SimRng};
use circoal::stats::{
    self, chi_square_critical, chi_square_uniform, compare_matrix_samples, default_ks_threshold, ks_compare,
    replicate_map, EmpiricalSummary, TestReport, MAX_JOINT_CELLS, Z_99,
};
use circoal::stepping_stone::{
    moment_duality_check, run_fixation_record, InitialCondition, LabelSampler, Probe, StepFunction, TypeLabel,
};
use circoal::{CirclePoint, GapVector};

use crate::output::{Output, Row, Samples};
use crate::{ArratiaArgs, CoalesceTimeArgs, Common, DualityArgs, FixationArgs, SpacingScanArgs};

/// Runs with fewer replicates report advisory results only.
pub const LOW_POWER_REPS: usize = 1000;

type CmdResult = Result<Output, String>;

fn err(e: circoal::Error) -> String {
    e.to_string()
}

fn positive(name: &str, v: f64) -> Result<(), String> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(format!("{name} must be positive and finite, got {v}"))
    }
}

fn reps_ok(reps: usize) -> Result<(), String> {
    if reps < 2 {
        Err(format!("reps must be at least 2, got {reps}"))
    } else {
        Ok(())
    }
}

pub fn check_common(c: &Common) -> Result<(), String> {
    positive("stderr-multiple", c.stderr_multiple)?;
    if c.threads == Some(0) {
        return Err("threads must be at least 1".into());
    }
    if c.out.as_os_str().is_empty() {
        return Err("out must be a file path".into());
    }
    Ok(())
}

fn summary(xs: &[f64]) -> EmpiricalSummary {
    EmpiricalSummary::from_samples(xs, false).expect("reps >= 2")
}

fn join(xs: &[f64]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(";")
}

fn header(out: &mut Output, c: &Common) {
    out.config("seed", c.seed);
    out.config("stderr_multiple", c.stderr_multiple);
}

fn indicator_summary(hits: impl Iterator<Item = bool>) -> EmpiricalSummary {
    let xs: Vec<f64> = hits.map(|b| b as u8 as f64).collect();
    summary(&xs)
}

pub fn coalesce_time(a: &CoalesceTimeArgs) -> CmdResult {
    let gaps = match (&a.gaps, a.m) {
        (Some(g), _) => GapVector::new(g.clone()).map_err(err)?,
        (None, Some(m)) if m >= 2 => GapVector::equal(m).map_err(err)?,
        (None, Some(m)) => return Err(format!("m must be at least 2, got {m}")),
        (None, None) => return Err("give --gaps or --m with --equal".into()),
    };
    if gaps.len() < 2 {
        return Err("at least two gaps are required".into());
    }
    positive("dt", a.dt)?;
    reps_ok(a.reps)?;
    for &l in &a.lambda_list {
        if !(l.is_finite() && l >= 0.0) {
            return Err(format!("lambda must be nonnegative and finite, got {l}"));
        }
    }
    let cfg = EngineConfig::new(a.dt, a.common.seed, !a.no_bridge).map_err(err)?;
    let k = a.common.stderr_multiple;

    let mut out = Output::new("coalesce-time");
    header(&mut out, &a.common);
    out.config("gaps", join(gaps.as_slice()));
    out.config("dt", a.dt);
    out.config("reps", a.reps);
    out.config("lambda", join(&a.lambda_list));
    out.config("bridge_correction", !a.no_bridge);
    out.low_power = a.reps < LOW_POWER_REPS;

    let starts = gaps.positions(0.0);
    let runs = replicate_map(a.reps, a.common.seed, |_, rng: &mut SimRng| {
        run_until_coalesced(&starts, &cfg, rng).map(|r| (r.t_coalesce, r.winner_gap_index))
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(err)?;
    let ts: Vec<f64> = runs.iter().map(|r| r.0).collect();

    for &lambda in &a.lambda_list {
        let xs: Vec<f64> = ts.iter().map(|t| (-lambda * t).exp()).collect();
        let est = summary(&xs);
        let exact = laplace_tm(lambda, &gaps).map_err(err)?;
        out.rows.push(Row::new("laplace", lambda).empirical(est.mean, est.stderr).expected(exact));
        out.gate(TestReport::within_stderr(&est, exact, k, format!("E exp(-{lambda} T_m) vs closed form")));
    }
    let est = summary(&ts);
    let exact = mean_tm(&gaps).map_err(err)?;
    out.rows.push(Row::new("mean", 0.0).no_x().empirical(est.mean, est.stderr).expected(exact));
    out.gate(TestReport::within_stderr(&est, exact, k, "E T_m vs (1 - sum g^3)/6"));
    for (i, &g) in gaps.as_slice().iter().enumerate() {
        let est = indicator_summary(runs.iter().map(|r| r.1 == i));
        out.rows.push(Row::new("winner", i as f64).empirical(est.mean, est.stderr).expected(g));
        out.gate(TestReport::within_stderr(&est, g, k, format!("winner frequency of gap {i} vs its length")));
    }
    Ok(out)
}

pub fn fixation(a: &FixationArgs) -> CmdResult {
    positive("eps", a.eps)?;
    positive("dt", a.dt)?;
    reps_ok(a.reps)?;
    if a.bins < 2 {
        return Err(format!("bins must be at least 2, got {}", a.bins));
    }
    let grid = GridConfig::new(a.grid_size, a.dt).map_err(err)?;
    let cfg = EngineConfig::new(a.dt, a.common.seed, true).map_err(err)?;
    let ks_threshold = a.ks_threshold.unwrap_or_else(|| default_ks_threshold(a.reps));
    positive("ks-threshold", ks_threshold)?;
    let k = a.common.stderr_multiple;

    let mut out = Output::new("fixation");
    header(&mut out, &a.common);
    out.config("eps", a.eps);
    out.config("grid_size", a.grid_size);
    out.config("dt", a.dt);
    out.config("reps", a.reps);
    out.config("bins", a.bins);
    out.config("ks_threshold", ks_threshold);
    out.low_power = a.reps < LOW_POWER_REPS;

    let mu = InitialCondition::Diffuse(LabelSampler::Uniform);
    let records = replicate_map(a.reps, a.common.seed, |_, rng: &mut SimRng| {
        run_fixation_record(&mu, a.eps, &grid, &cfg, rng)
    })
    .into_iter()
    .collect::<Result<Vec<_>, _>>()
    .map_err(err)?;
    let ts: Vec<f64> = records.iter().map(|r| r.outcome.t).collect();
    let kappa: Vec<f64> = records.iter().map(|r| r.outcome.kappa.value()).collect();
    let u: Vec<f64> = records.iter().map(|r| r.prevailing_interval().0.position()).collect();

    let ctrl = SeriesControl::default();
    let cdf = |t: f64| if t <= 0.0 { 0.0 } else { cdf_fixation(t, &ctrl).expect("default control") };
    let full = EmpiricalSummary::from_samples(&ts, true).expect("reps >= 2");
    let n = a.reps as f64;
    for i in 1..=24 {
        let t = 0.025 * i as f64;
        let p = full.ecdf_at(t).expect("kept");
        out.rows.push(Row::new("ecdf", t).empirical(p, (p * (1.0 - p) / n).sqrt()).expected(cdf(t)));
    }
    out.rows.push(Row::new("mean", 0.0).no_x().empirical(full.mean, full.stderr).expected(1.0 / 6.0));
    let lap = summary(&ts.iter().map(|t| (-t).exp()).collect::<Vec<_>>());
    let lap_exact = laplace_fixation(1.0).map_err(err)?;
    out.rows.push(Row::new("laplace", 1.0).empirical(lap.mean, lap.stderr).expected(lap_exact));

    let mut counts = vec![0usize; a.bins];
    for &x in &kappa {
        counts[((x * a.bins as f64) as usize).min(a.bins - 1)] += 1;
    }
    for (b, &c) in counts.iter().enumerate() {
        let p = c as f64 / n;
        let center = (b as f64 + 0.5) / a.bins as f64;
        out.rows
            .push(Row::new("kappa", center).empirical(p, (p * (1.0 - p) / n).sqrt()).expected(1.0 / a.bins as f64));
    }

    out.gate(ks_compare(&ts, cdf, ks_threshold, "KS distance of fixation times to the theta-series CDF"));
    out.gate(TestReport::within_stderr(&full, 1.0 / 6.0, k, "mean fixation time vs 1/6"));
    out.gate(TestReport::within_stderr(&lap, lap_exact, k, "E exp(-T) vs 1/sinh(1)"));
    let chi = chi_square_uniform(&kappa, a.bins);
    out.gate(TestReport::new(
        chi,
        chi_square_critical(a.bins - 1, Z_99),
        format!("chi-square of the surviving type over {} bins vs uniform", a.bins),
    ));
    out.gate(ks_compare(
        &u,
        |x| x.clamp(0.0, 1.0),
        ks_threshold,
        "KS distance of the prevailing interval's left end to uniform",
    ));
    out.samples = Some(Samples {
        columns: vec!["t", "kappa", "u_prime"],
        data: records.iter().zip(&u).map(|(r, &u)| vec![r.outcome.t, r.outcome.kappa.value(), u]).collect(),
    });
    Ok(out)
}

/// The built-in battery of disjoint open arcs.
pub fn avoidance_battery() -> Vec<Vec<OpenArc>> {
    vec![vec![OpenArc::new(0.1, 0.3)], vec![OpenArc::new(0.1, 0.3), OpenArc::new(0.6, 0.7)]]
}

fn arcs_key(arcs: &[OpenArc]) -> String {
    arcs.iter().map(|a| format!("({},{})", a.a.position(), a.b.position())).collect::<Vec<_>>().join("+")
}

pub fn arratia(a: &ArratiaArgs) -> CmdResult {
    if a.t_list.is_empty() {
        return Err("t list is empty".into());
    }
    for &t in &a.t_list {
        positive("t", t)?;
    }
    positive("avoid-t", a.avoid_t)?;
    positive("grid-allowance", a.grid_allowance)?;
    reps_ok(a.reps)?;
    let grid = GridConfig::new(a.grid_size, a.dt).map_err(err)?;
    let fine = GridConfig::new(2 * a.grid_size, a.dt).map_err(err)?;
    let k = a.common.stderr_multiple;

    let mut out = Output::new("arratia");
    header(&mut out, &a.common);
    out.config("t", join(&a.t_list));
    out.config("grid_size", a.grid_size);
    out.config("dt", a.dt);
    out.config("reps", a.reps);
    out.config("avoid_t", a.avoid_t);
    out.config("grid_allowance", a.grid_allowance);
    out.low_power = a.reps < LOW_POWER_REPS;

    // one 2M-point flow per replicate; the M grid is its even-indexed points
    let mut times = a.t_list.clone();
    times.sort_by(f64::total_cmp);
    let counts = replicate_map(a.reps, derive_seed(a.common.seed, 1), |_, rng: &mut SimRng| {
        let mut flow = GridFlow::new(fine).expect("validated grid");
        times
            .iter()
            .map(|&t| {
                flow.advance_to(t, rng);
                let s = flow.snapshot();
                (s.subgrid_cluster_count(2) as f64, s.n_clusters as f64)
            })
            .collect::<Vec<_>>()
    });
    let ctrl = SeriesControl::default();
    for (i, &t) in times.iter().enumerate() {
        let coarse = summary(&counts.iter().map(|r| r[i].0).collect::<Vec<_>>());
        let twice = summary(&counts.iter().map(|r| r[i].1).collect::<Vec<_>>());
        let allowance = summary(&counts.iter().map(|r| r[i].1 - r[i].0).collect::<Vec<_>>()).mean.abs();
        let exact = mean_cluster_count(t, &ctrl).map_err(err)?;
        out.rows.push(Row::new("clusters", t).key(format!("M={}", a.grid_size)).empirical(coarse.mean, coarse.stderr).expected(exact));
        out.rows.push(Row::new("clusters", t).key(format!("M={}", 2 * a.grid_size)).empirical(twice.mean, twice.stderr).expected(exact));
        out.gate(TestReport::new(
            (coarse.mean - exact).abs(),
            k * coarse.stderr + allowance,
            format!("mean cluster count at t = {t} vs theta series (stderr plus grid allowance)"),
        ));
        out.gate(TestReport::new(
            allowance,
            a.grid_allowance,
            format!("grid resolution |mean_M - mean_2M| at t = {t}"),
        ));
    }

    for (b, arcs) in avoidance_battery().iter().enumerate() {
        let b = b as u64;
        let s_u = derive_seed(a.common.seed, 10 + 2 * b);
        let s_v = derive_seed(a.common.seed, 11 + 2 * b);
        let pu = avoidance_probability(Side::Boundaries, arcs, a.avoid_t, &grid, a.reps, s_u).map_err(err)?;
        let pv = avoidance_probability(Side::Images, arcs, a.avoid_t, &grid, a.reps, s_v).map_err(err)?;
        let key = arcs_key(arcs);
        // a single arc (a, b) is avoided when the particles from a and b
        // meet across it: the complementary gap wins
        let exact = match arcs.as_slice() {
            [arc] => Some(cdf_gap_win(a.avoid_t, 1.0 - circoal::arc_length(arc.a, arc.b), &ctrl).map_err(err)?),
            _ => None,
        };
        for (side, p) in [("U", &pu), ("V", &pv)] {
            let mut row = Row::new("avoidance", a.avoid_t).key(format!("{side}:{key}")).empirical(p.mean, p.stderr);
            row.expected = exact;
            out.rows.push(row);
        }
        out.gate(TestReport::agree(&pu, &pv, k, format!("avoidance of {key} by U and by V")));
        if let Some(exact) = exact {
            out.gate(TestReport::within_stderr(&pv, exact, k, format!("avoidance of {key} by V vs gap-win CDF")));
        }
    }
    Ok(out)
}

fn spread(count: usize, offset: f64) -> Vec<CirclePoint> {
    (0..count).map(|i| CirclePoint::new((i as f64 + offset) / count as f64)).collect()
}

/// Fixed probe battery for the moment duality.
fn probe_battery() -> (StepFunction, Vec<Vec<Probe>>) {
    let l = |x: f64| TypeLabel::new(x).expect("in [0, 1]");
    let nu = StepFunction::from_gaps(
        &GapVector::new(vec![0.2, 0.3, 0.5]).expect("sums to 1"),
        0.0,
        &[l(0.1), l(0.5), l(0.9)],
    )
    .expect("distinct starts");
    let p = |x: f64, k: f64| (CirclePoint::new(x), l(k));
    let battery = vec![
        vec![p(0.1, 0.1)],
        vec![p(0.1, 0.1), p(0.6, 0.9)],
        vec![p(0.05, 0.1), p(0.35, 0.5), p(0.8, 0.9)],
        vec![p(0.25, 0.5), p(0.45, 0.5), p(0.7, 0.9), p(0.9, 0.9)],
    ];
    (nu, battery)
}

pub fn duality(a: &DualityArgs) -> CmdResult {
    if a.m == 0 || a.n == 0 {
        return Err("m and n must be at least 1".into());
    }
    let cells = a.m * a.n;
    if cells > MAX_JOINT_CELLS {
        return Err(format!("m*n = {cells} exceeds the cap of {MAX_JOINT_CELLS} cells"));
    }
    positive("t", a.t)?;
    positive("dt", a.dt)?;
    reps_ok(a.reps)?;
    if (1u64 << cells) as f64 > a.reps as f64 / 100.0 {
        eprintln!(
            "warning: 2^{cells} = {} cells exceeds reps/100 = {}; the joint law is thinly sampled",
            1u64 << cells,
            a.reps / 100
        );
    }
    let cfg = EngineConfig::new(a.dt, a.common.seed, true).map_err(err)?;
    let k = a.common.stderr_multiple;

    let mut out = Output::new("duality");
    header(&mut out, &a.common);
    out.config("m", a.m);
    out.config("n", a.n);
    out.config("t", a.t);
    out.config("dt", a.dt);
    out.config("reps", a.reps);
    out.low_power = a.reps < LOW_POWER_REPS;

    let y = spread(a.m, 0.25);
    let z = spread(a.n, 0.5);
    out.config("y", join(&y.iter().map(|p| p.position()).collect::<Vec<_>>()));
    out.config("z", join(&z.iter().map(|p| p.position()).collect::<Vec<_>>()));
    let forward = replicate_map(a.reps, derive_seed(a.common.seed, 1), |_, rng: &mut SimRng| {
        let mut ys = CoalescingState::init(&y).expect("distinct points");
        ys.evolve_to(a.t, &cfg, rng);
        indicator_array(&ys.particle_positions(), &z).expect("distinct fence")
    });
    let backward = replicate_map(a.reps, derive_seed(a.common.seed, 2), |_, rng: &mut SimRng| {
        let mut zs = CoalescingState::init(&z).expect("distinct points");
        zs.evolve_to(a.t, &cfg, rng);
        indicator_array_with(&y, &Fence::from_state(&zs))
    });
    let cmp = compare_matrix_samples(&forward, &backward).map_err(err)?;
    let mut fwd = vec![0usize; 1 << cells];
    let mut bwd = vec![0usize; 1 << cells];
    for m in &forward {
        fwd[m.code().expect("small") as usize] += 1;
    }
    for m in &backward {
        bwd[m.code().expect("small") as usize] += 1;
    }
    let n = a.reps as f64;
    for code in 0..1usize << cells {
        if fwd[code] + bwd[code] == 0 {
            continue;
        }
        let p = fwd[code] as f64 / n;
        out.rows.push(
            Row::new("joint_law", code as f64)
                .key(format!("{code:0width$b}", width = cells))
                .empirical(p, (p * (1.0 - p) / n).sqrt())
                .expected(bwd[code] as f64 / n),
        );
    }
    out.gate(cmp.report);

    let (nu, battery) = probe_battery();
    for (i, probes) in battery.iter().enumerate() {
        let seed = derive_seed(a.common.seed, 100 + i as u64);
        let (f, b) = moment_duality_check(&nu, 0.0, a.t, probes, &cfg, a.reps, seed).map_err(err)?;
        let key = probes.iter().map(|(z, l)| format!("{}={}", z.position(), l.value())).collect::<Vec<_>>().join("&");
        out.rows.push(Row::new("moment", i as f64).key(key.clone()).empirical(f.mean, f.stderr).expected(b.mean));
        out.gate(TestReport::agree(&f, &b, k, format!("moment duality, forward vs backward, probes {key}")));
    }
    Ok(out)
}

pub fn spacing_scan(a: &SpacingScanArgs) -> CmdResult {
    if a.m < 2 {
        return Err(format!("m must be at least 2, got {}", a.m));
    }
    if a.t_list.is_empty() {
        return Err("t list is empty".into());
    }
    for &t in &a.t_list {
        positive("t", t)?;
    }
    let mut configs = stats::composition_grid(a.m, a.grid_density).map_err(err)?;
    if !a.grid_density.is_multiple_of(a.m) {
        configs.push(GapVector::equal(a.m).map_err(err)?);
    }
    let scan = stats::spacing_scan(&configs, &a.t_list, &SeriesControl::default()).map_err(err)?;

    let mut out = Output::new("spacing-scan");
    header(&mut out, &a.common);
    out.config("m", a.m);
    out.config("grid_density", a.grid_density);
    out.config("t", join(&a.t_list));
    for (i, r) in scan.rows.iter().enumerate() {
        let key = join(r.gaps.as_slice());
        out.rows.push(Row::new("mean_tm", i as f64).key(key.clone()).expected(r.mean_tm));
        for (&t, &p) in scan.t_list.iter().zip(&r.cdf) {
            out.rows.push(Row::new("cdf_tm", t).key(key.clone()).expected(p));
        }
    }
    for (j, &t) in scan.t_list.iter().enumerate() {
        for (table, idx) in [("cdf_argmin", scan.cdf_argmin[j]), ("cdf_argmax", scan.cdf_argmax[j])] {
            let r = &scan.rows[idx];
            out.rows.push(Row::new(table, t).key(join(r.gaps.as_slice())).expected(r.cdf[j]));
        }
    }
    let r = &scan.rows[scan.mean_argmax];
    out.rows.push(Row::new("mean_argmax", 0.0).no_x().key(join(r.gaps.as_slice())).expected(r.mean_tm));
    out.advisory(scan.mean_report);
    Ok(out)
}
