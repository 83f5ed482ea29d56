//! One-time calibration run for the thresholds asserted by the test suite.
//!
//! Uses seeds disjoint from the ones the tests use (pilot seeds start at
//! `PILOT_SEED_BASE`, test seeds at 0) and writes
//! `crates/core/tests/fixtures/pilot.json`.
//!
//! ```text
//! cargo run --release -p colnorm-core --example pilot
//! ```

use std::path::PathBuf;

use colnorm::geometry::{inradius, symmetric_eigenvalues, InradiusBudget};
use colnorm::harness::{
    linear_form_norm, run_positive_control, run_sweep, run_trials, sign_matrix, EnsembleKind,
    ExperimentConfig,
};
use colnorm::recovery::{CertifyMode, WitnessVerdict};
use colnorm::spike::{linear_form_even_moment, SpikeParams};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::Serialize;

const PILOT_SEED_BASE: u64 = 1_000_000;
const TEST_SEED_BASE: u64 = 0;

#[derive(Serialize)]
struct RateThreshold {
    pilot_trials: usize,
    pilot_rate: f64,
    test_trials: usize,
    /// `floor_{0.01}(rate − 3·√(rate(1−rate)/test_trials))`.
    threshold: f64,
}

#[derive(Serialize)]
struct Pilot {
    command: &'static str,
    pilot_seed_base: u64,
    test_seed_base: u64,
    counterexample_break: RateThreshold,
    counterexample_seed: u64,
    cross_check_seed: u64,
    cross_check_delta: f64,
    positive_control: RateThreshold,
    monotonicity_rate_m3: f64,
    monotonicity_rate_m8: f64,
    monotonicity_trials: usize,
    moment_max_ratio_exact: f64,
    moment_max_ratio_mc: f64,
    moment_bound: f64,
    c0_measured: f64,
    c0: f64,
    /// Fraction of `5 × 10` sign matrices without full row rank (radius 0).
    inradius_rank_deficient_fraction: f64,
    /// Smallest radius among full-rank instances.
    inradius_min_full_rank: f64,
    inradius_lower_bound: f64,
}

fn threshold(pilot_trials: usize, pilot_rate: f64, test_trials: usize) -> RateThreshold {
    let se = (pilot_rate * (1.0 - pilot_rate) / test_trials as f64).sqrt();
    RateThreshold {
        pilot_trials,
        pilot_rate,
        test_trials,
        threshold: ((pilot_rate - 3.0 * se) * 100.0).floor().max(0.0) / 100.0,
    }
}

fn unit_gaussian(support: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut t: Vec<f64> = (0..support).map(|_| StandardNormal.sample(rng)).collect();
    let n = t.iter().map(|x| x * x).sum::<f64>().sqrt();
    t.iter_mut().for_each(|x| *x /= n);
    t
}

fn full_row_rank(a: &ndarray::Array2<f64>) -> bool {
    let gram = a.dot(&a.t());
    symmetric_eigenvalues(gram, 1e-12).into_iter().fold(f64::INFINITY, f64::min) > 1e-9
}

fn main() {
    // Counterexample break rate among event-firing trials.
    let cfg = ExperimentConfig { m: Some(5), trials: 1000, seed_base: PILOT_SEED_BASE, ..Default::default() };
    let trials = run_trials(&cfg).expect("pilot trials");
    let firing: Vec<_> = trials.iter().filter(|t| t.found_1 && t.found_2).collect();
    let broken = firing.iter().filter(|t| t.verdict == WitnessVerdict::Erp2Broken).count();
    let counterexample_break = threshold(firing.len(), broken as f64 / firing.len() as f64, 200);
    let counterexample_seed = firing
        .iter()
        .find(|t| t.verdict == WitnessVerdict::Erp2Broken)
        .map(|t| t.seed)
        .expect("some pilot trial breaks");
    eprintln!("break rate {:.4} over {} firing trials", counterexample_break.pilot_rate, firing.len());

    // Cross-check configuration at d = 24.
    let cross_check_delta = 2.0 / 24.0;
    let cfg24 = ExperimentConfig {
        d: 24,
        m: Some(3),
        delta_override: Some(cross_check_delta),
        trials: 50,
        seed_base: PILOT_SEED_BASE,
        ..Default::default()
    };
    let cross = run_trials(&cfg24).expect("d = 24 pilot");
    let cross_check_seed = cross
        .iter()
        .find(|t| t.verdict == WitnessVerdict::Erp2Broken)
        .map(|t| t.seed)
        .expect("some d = 24 trial breaks");

    // Positive control.
    let pc = run_positive_control(24, 2, 16, 100, EnsembleKind::Gaussian, PILOT_SEED_BASE, CertifyMode::Float)
        .expect("positive control pilot");
    let positive_control = threshold(100, pc.rate, 100);
    eprintln!("positive control rate {:.3}", pc.rate);

    // Break rate at m = 3 versus m = 8.
    let sweep_cfg = ExperimentConfig { m_list: vec![3, 8], trials: 1000, seed_base: PILOT_SEED_BASE, ..Default::default() };
    let sweep = run_sweep(&sweep_cfg).expect("monotonicity pilot");

    // Moment ratios at (δ, R) = (0.02, 7.5233).
    let params = SpikeParams::new(0.02, 7.5233).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(PILOT_SEED_BASE);
    let mut exact_max = f64::NEG_INFINITY;
    let mut mc_max = f64::NEG_INFINITY;
    let mut c0_measured = f64::NEG_INFINITY;
    let l_star = [2.0f64, 4.0]
        .iter()
        .map(|&q| 7.5233 * 0.02f64.powf(q.recip()) / q.sqrt())
        .fold(1.0, f64::max);
    for _ in 0..200 {
        let t = unit_gaussian(10, &mut rng);
        for q in [2u32, 4] {
            let lq = linear_form_even_moment(&t, &params, q).unwrap().powf(1.0 / q as f64);
            let l2 = params.c1_norm();
            exact_max = exact_max.max(lq / ((q as f64).sqrt() * l2));
            c0_measured = c0_measured.max(lq / (l_star * (q as f64).sqrt() * l2));
        }
    }
    for _ in 0..10 {
        let t = unit_gaussian(16, &mut rng);
        for q in [2.0, 4.0] {
            let (lq, _) = linear_form_norm(&t, &params, q, 1_000_000, &mut rng).unwrap();
            mc_max = mc_max.max(lq / (q.sqrt() * params.c1_norm()));
        }
    }
    let spec_bound = 1.5;
    let moment_bound = if exact_max.max(mc_max) <= spec_bound { spec_bound } else { f64::NAN };
    eprintln!("moment ratios exact {exact_max:.4} mc {mc_max:.4}; c0 {c0_measured:.4}");

    // Inradius of m = 5, |J| = 10 sign matrices.
    let budget = InradiusBudget::default();
    let mut deficient = 0usize;
    let mut inradius_min_full_rank = f64::INFINITY;
    for i in 0..1000u64 {
        let a = sign_matrix(5, 10, PILOT_SEED_BASE + i);
        if !full_row_rank(&a) {
            deficient += 1;
            continue;
        }
        inradius_min_full_rank = inradius_min_full_rank.min(inradius(&a, &budget).unwrap().radius);
    }
    let inradius_lower_bound = (inradius_min_full_rank * 100.0).floor() / 100.0;
    eprintln!("inradius: {deficient} rank deficient, full-rank min {inradius_min_full_rank:.4}");

    let pilot = Pilot {
        command: "cargo run --release -p colnorm-core --example pilot",
        pilot_seed_base: PILOT_SEED_BASE,
        test_seed_base: TEST_SEED_BASE,
        counterexample_break,
        counterexample_seed,
        cross_check_seed,
        cross_check_delta,
        positive_control,
        monotonicity_rate_m3: sweep[0].break_rate,
        monotonicity_rate_m8: sweep[1].break_rate,
        monotonicity_trials: 1000,
        moment_max_ratio_exact: exact_max,
        moment_max_ratio_mc: mc_max,
        moment_bound,
        c0_measured,
        c0: (c0_measured * 10.0).ceil() / 10.0,
        inradius_rank_deficient_fraction: deficient as f64 / 1000.0,
        inradius_min_full_rank,
        inradius_lower_bound,
    };
    let path = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/pilot.json");
    std::fs::create_dir_all(path.parent().unwrap()).unwrap();
    std::fs::write(&path, serde_json::to_string_pretty(&pilot).unwrap() + "\n").unwrap();
    eprintln!("wrote {}", path.display());
}
