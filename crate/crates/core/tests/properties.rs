use circoal::analytics::{cdf_fixation, cdf_tm, SeriesControl};
use circoal::engine::{run_until_coalesced, BinaryMatrix, EngineConfig};
use circoal::flow::{tau_sample, GridConfig};
use circoal::rng::SimRng;
use circoal::stats::{default_ks_threshold, joint_binary_compare, ks_compare, mc_estimate, replicate_map, TestReport};
use circoal::stepping_stone::{moment_duality_check, StepFunction, TypeLabel};
use circoal::{CirclePoint, GapVector};
use rand::Rng;

fn in_pool<T: Send>(threads: usize, f: impl FnOnce() -> T + Send) -> T {
    rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap().install(f)
}

#[test]
fn mc_estimate_ignores_worker_count() {
    let cfg = EngineConfig::new(1e-3, 0, true).unwrap();
    let starts = GapVector::new(vec![0.3, 0.7]).unwrap().positions(0.25);
    let run = || {
        mc_estimate(|rng| run_until_coalesced(&starts, &cfg, rng).unwrap().t_coalesce, 400, 99).unwrap()
    };
    let one = in_pool(1, run);
    let four = in_pool(4, run);
    assert_eq!(one, four);
    assert_eq!(one.mean.to_bits(), four.mean.to_bits());
}

#[test]
fn replicate_streams_do_not_depend_on_run_length() {
    let a = replicate_map(10, 5, |_, rng: &mut SimRng| rng.random::<u64>());
    let b = replicate_map(20, 5, |_, rng: &mut SimRng| rng.random::<u64>());
    assert_eq!(a[..], b[..10]);
}

#[test]
fn joint_compare_is_symmetric() {
    let a = |_: u64, rng: &mut SimRng| {
        let mut m = BinaryMatrix::zeros(2, 2);
        for k in 0..4 {
            m.set(k / 2, k % 2, rng.random_bool(0.3));
        }
        m
    };
    let b = |_: u64, rng: &mut SimRng| {
        let mut m = BinaryMatrix::zeros(2, 2);
        for k in 0..4 {
            m.set(k / 2, k % 2, rng.random_bool(0.5));
        }
        m
    };
    let ab = joint_binary_compare(a, b, 3000, 1, 2).unwrap();
    let ba = joint_binary_compare(b, a, 3000, 2, 1).unwrap();
    assert_eq!(ab.tv, ba.tv);
    assert!(!ab.report.passed);
}

#[test]
fn tau_matches_fixation_law() {
    let grid = GridConfig::new(512, 1e-4).unwrap();
    let reps = 3000;
    let taus = replicate_map(reps, 17, |_, rng: &mut SimRng| tau_sample(&grid, rng).unwrap());
    let c = SeriesControl::default();
    let r = ks_compare(&taus, |t| cdf_fixation(t, &c).unwrap(), default_ks_threshold(reps), "tau");
    assert!(r.passed, "{r:?}");
}

#[test]
fn coalescence_time_cdf_matches_series() {
    let gaps = GapVector::new(vec![0.2, 0.3, 0.5]).unwrap();
    let cfg = EngineConfig::new(1e-4, 0, true).unwrap();
    let starts = gaps.positions(0.6);
    let reps = 4000;
    let ts = replicate_map(reps, 23, |_, rng: &mut SimRng| run_until_coalesced(&starts, &cfg, rng).unwrap().t_coalesce);
    let c = SeriesControl::default();
    let r = ks_compare(&ts, |t| if t <= 0.0 { 0.0 } else { cdf_tm(t, &gaps, &c).unwrap() }, default_ks_threshold(reps), "T_3");
    assert!(r.passed, "{r:?}");
}

#[test]
fn moment_duality_battery() {
    let l = |x| TypeLabel::new(x).unwrap();
    let nu = StepFunction::from_gaps(&GapVector::new(vec![0.25, 0.25, 0.5]).unwrap(), 0.1, &[l(0.0), l(0.5), l(1.0)])
        .unwrap();
    let cfg = EngineConfig::new(1e-4, 0, true).unwrap();
    let p = |x, k| (CirclePoint::new(x), l(k));
    for (i, probes) in [vec![p(0.2, 0.0)], vec![p(0.2, 0.0), p(0.7, 1.0)], vec![p(0.05, 1.0), p(0.3, 0.0), p(0.5, 0.5)]]
        .iter()
        .enumerate()
    {
        let (f, b) = moment_duality_check(&nu, 0.02, 0.07, probes, &cfg, 4000, 40 + i as u64).unwrap();
        let r = TestReport::agree(&f, &b, 3.0, "moment duality");
        assert!(r.passed, "probe set {i}: {r:?}");
        assert!(f.mean > 0.0 && b.mean > 0.0);
    }
}
