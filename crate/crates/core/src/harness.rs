//! Experiment orchestration: parameter derivation, seeded trials, sweeps,
//! moment experiments and positive controls.
//!
//! Defaults: `δ = 4/d`, `R = √p·d^{1/p}`, `m = ⌊0.7·√p·d^{1/p}⌋`. Trial `i`
//! uses seed `seed_base + i`. Trials run in parallel and are reassembled in
//! index order, so reports do not depend on scheduling.

use std::path::PathBuf;
use std::time::Instant;

use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{
    detect_events, draw, event_expectations, event_probabilities, gaussian_matrix, normalize_columns, EnsembleDraw,
    EnsembleError,
};
use crate::geometry::{check_ball_inclusion, GeometryError, InradiusBudget};
use crate::recovery::{certify_erp, construct_witness, mat_vec, CertifyMode, RecoveryError, WitnessVerdict};
use crate::report::{ReportError, ReportFormat, ReportHeader, ReportRow};
use crate::spike::{
    abs_moment, linear_form_even_moment, phi_decreasing_check, sample_x, SpikeError, SpikeParams,
};

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("config refused: {0}")]
    ConfigRefused(String),
    #[error(transparent)]
    Spike(#[from] SpikeError),
    #[error(transparent)]
    Ensemble(#[from] EnsembleError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("cross-check failed: {0}")]
    Consistency(String),
}

impl HarnessError {
    /// 2 for refused configurations, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::ConfigRefused(_) => 2,
            _ => 1,
        }
    }
}

/// Total trials a sweep may request.
pub const SWEEP_TRIAL_BUDGET: usize = 10_000;
/// Largest `d` for which positive controls run the full certification.
pub const POSITIVE_CONTROL_MAX_D: usize = 30;
/// Support size up to which even moments use the exact recursion.
pub const EXACT_MOMENT_MAX_SUPPORT: usize = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EnsembleKind {
    #[default]
    Gaussian,
    Rademacher,
    Spike,
}

impl std::str::FromStr for EnsembleKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "gaussian" => Ok(Self::Gaussian),
            "rademacher" => Ok(Self::Rademacher),
            "spike" => Ok(Self::Spike),
            other => Err(format!("unknown ensemble {other:?}")),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub d: usize,
    pub p: f64,
    pub m: Option<usize>,
    pub m_list: Vec<usize>,
    pub trials: usize,
    pub seed_base: u64,
    pub delta_override: Option<f64>,
    pub r_override: Option<f64>,
    /// Run every certification LP in exact arithmetic.
    pub exact: bool,
    /// Trials with `d` at most this also run the full order-2 certification.
    pub certify_max_d: usize,
    /// Timing is off by default so reports stay byte-identical.
    pub record_timing: bool,
    /// Sparsity order for `erp-check` and positive controls.
    pub s: usize,
    pub ensemble: EnsembleKind,
    pub q_list: Vec<f64>,
    pub n_vectors: usize,
    pub t_support: usize,
    pub moment_bound: f64,
    pub mc_samples: usize,
    pub inradius_starts: usize,
    pub inradius_steps: usize,
    pub out: Option<PathBuf>,
    pub format: ReportFormat,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            d: 200,
            p: 4.0,
            m: None,
            m_list: Vec::new(),
            trials: 200,
            seed_base: 0,
            delta_override: None,
            r_override: None,
            exact: false,
            certify_max_d: 30,
            record_timing: false,
            s: 2,
            ensemble: EnsembleKind::Gaussian,
            q_list: vec![2.0, 4.0],
            n_vectors: 200,
            t_support: 10,
            moment_bound: 1.5,
            mc_samples: 1_000_000,
            inradius_starts: 256,
            inradius_steps: 2000,
            out: None,
            format: ReportFormat::Csv,
        }
    }
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self, HarnessError> {
        serde_json::from_str(text).map_err(|e| HarnessError::ConfigRefused(format!("config: {e}")))
    }

    pub fn mode(&self) -> CertifyMode {
        if self.exact {
            CertifyMode::Exact
        } else {
            CertifyMode::Float
        }
    }

    pub fn header(&self, command: &str) -> ReportHeader {
        ReportHeader {
            version: crate::VERSION.to_string(),
            command: command.to_string(),
            config: serde_json::to_value(ExperimentConfig { out: None, ..self.clone() }).expect("config serializes"),
            seeds: format!("seed_base={} trials={}", self.seed_base, self.trials),
        }
    }

    fn budget(&self) -> InradiusBudget {
        InradiusBudget {
            starts: self.inradius_starts,
            steps: self.inradius_steps,
            ..InradiusBudget::default()
        }
    }
}

/// Parameters after defaults and guards are applied.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DerivedParams {
    pub d: usize,
    pub p: f64,
    pub m: usize,
    pub delta: f64,
    pub r: f64,
    /// `δ·d`, the constant in `δ = c/d`.
    pub delta_constant: f64,
    pub c1_norm: f64,
}

impl DerivedParams {
    pub fn spike(&self) -> SpikeParams<f64> {
        SpikeParams::new(self.delta, self.r).expect("validated on derivation")
    }
}

/// `√p·d^{1/p}`.
pub fn default_r(d: usize, p: f64) -> f64 {
    p.sqrt() * (d as f64).powf(p.recip())
}

pub fn default_delta(d: usize) -> f64 {
    4.0 / d as f64
}

pub fn default_m(d: usize, p: f64) -> usize {
    ((0.7 * default_r(d, p)).floor() as usize).max(1)
}

/// Applies defaults and refuses configurations outside the supported regime,
/// before any sampling happens.
pub fn derive(cfg: &ExperimentConfig) -> Result<DerivedParams, HarnessError> {
    let refuse = |msg: String| Err(HarnessError::ConfigRefused(msg));
    if cfg.d < 2 {
        return refuse(format!("d = {} must be at least 2", cfg.d));
    }
    if !(cfg.p >= 2.0) || !cfg.p.is_finite() {
        return refuse(format!("p = {} must be finite and >= 2", cfg.p));
    }
    let delta = cfg.delta_override.unwrap_or_else(|| default_delta(cfg.d));
    if !(0.0..=0.5).contains(&delta) {
        return refuse(format!("delta = {delta} must lie in [0, 1/2]"));
    }
    let r = cfg.r_override.unwrap_or_else(|| default_r(cfg.d, cfg.p));
    if !(r >= 1.0) || !r.is_finite() {
        return refuse(format!("R = {r} must be finite and >= 1"));
    }
    let m = cfg.m.unwrap_or_else(|| default_m(cfg.d, cfg.p));
    if m == 0 || m > cfg.d {
        return refuse(format!("m = {m} must satisfy 1 <= m <= d = {}", cfg.d));
    }
    let delta_constant = delta * cfg.d as f64;
    if delta > 0.0 {
        match phi_decreasing_check(cfg.d as u64, delta_constant, cfg.p) {
            Ok(true) => {}
            Ok(false) => {
                return refuse(format!(
                    "p = {} exceeds 2 log(d / (delta d)) = {:.6}; R delta^(1/q) <= sqrt(q) is not guaranteed on [2, p]",
                    cfg.p,
                    2.0 * (cfg.d as f64 / delta_constant).ln()
                ))
            }
            Err(e) => return refuse(format!("moment-growth guard: {e}")),
        }
    }
    let params = SpikeParams::new(delta, r).map_err(|e| HarnessError::ConfigRefused(e.to_string()))?;
    Ok(DerivedParams {
        d: cfg.d,
        p: cfg.p,
        m,
        delta,
        r,
        delta_constant,
        c1_norm: params.c1_norm(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub trial: usize,
    pub seed: u64,
    pub m: usize,
    pub d: usize,
    pub found_1: bool,
    pub found_2: bool,
    pub verdict: WitnessVerdict,
    pub z_norm1: Option<f64>,
    pub margin: Option<f64>,
    /// Order-2 certification of `Γ̃`, when `d ≤ certify_max_d`.
    pub erp2_violated: Option<bool>,
    pub exact_resolved: bool,
    pub spikes: usize,
    pub single_spike_cols: usize,
    pub spike_free_cols: usize,
    pub elapsed_ms: Option<f64>,
}

impl ReportRow for TrialReport {
    const COLUMNS: &'static [&'static str] = &[
        "trial",
        "seed",
        "m",
        "d",
        "found_1",
        "found_2",
        "verdict",
        "z_norm1",
        "margin",
        "erp2_violated",
        "exact_resolved",
        "spikes",
        "single_spike_cols",
        "spike_free_cols",
        "elapsed_ms",
    ];
}

fn column_counts(eta: &Array2<u8>) -> (usize, usize) {
    let mut single = 0;
    let mut free = 0;
    for col in eta.columns() {
        match col.iter().filter(|&&e| e == 1).count() {
            0 => free += 1,
            1 => single += 1,
            _ => {}
        }
    }
    (single, free)
}

/// Draws, normalizes, builds the witness and (for small `d`) certifies.
pub fn run_counterexample_trial(cfg: &ExperimentConfig, trial_index: usize) -> Result<TrialReport, HarnessError> {
    let derived = derive(cfg)?;
    run_trial_with(cfg, &derived, trial_index)
}

fn run_trial_with(cfg: &ExperimentConfig, derived: &DerivedParams, trial_index: usize) -> Result<TrialReport, HarnessError> {
    let start = Instant::now();
    let seed = cfg.seed_base.wrapping_add(trial_index as u64);
    let dr = draw(derived.m, derived.d, derived.spike(), seed)?;
    let normalized = dr.normalize()?;
    let report = construct_witness(&dr, &normalized)?;

    if report.verdict == WitnessVerdict::Erp2Broken {
        let gt = &normalized.gamma_tilde;
        let gz = mat_vec(gt, &report.z);
        let gv = mat_vec(gt, &report.v);
        let residual = gz.iter().zip(&gv).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        let z_l1: f64 = report.z.iter().map(|x| x.abs()).sum();
        let cols = report.events.zero_cols.as_deref().unwrap_or(&[]);
        let off_support = report.z.iter().enumerate().any(|(j, &x)| x != 0.0 && !cols.contains(&j));
        if residual > 1e-8 || z_l1 > 1.0 + 1e-9 || off_support {
            return Err(HarnessError::Consistency(format!(
                "seed {seed}: witness z fails its invariants (residual {residual:e}, |z|_1 {z_l1})"
            )));
        }
    }

    let erp2_violated = if derived.d <= cfg.certify_max_d {
        let verdict = certify_erp(&normalized.gamma_tilde, 2, cfg.mode())?;
        if report.verdict == WitnessVerdict::Erp2Broken && verdict.holds {
            return Err(HarnessError::Consistency(format!(
                "seed {seed}: witness breaks order 2 but certification says it holds"
            )));
        }
        Some(!verdict.holds)
    } else {
        None
    };

    let (single_spike_cols, spike_free_cols) = column_counts(&dr.eta);
    Ok(TrialReport {
        trial: trial_index,
        seed,
        m: derived.m,
        d: derived.d,
        found_1: report.events.found_1,
        found_2: report.events.found_2,
        verdict: report.verdict,
        z_norm1: report.z_norm1,
        margin: report.margin(),
        erp2_violated,
        exact_resolved: report.exact_resolved,
        spikes: dr.spike_count(),
        single_spike_cols,
        spike_free_cols,
        elapsed_ms: cfg.record_timing.then(|| start.elapsed().as_secs_f64() * 1e3),
    })
}

/// Runs `cfg.trials` trials in parallel, returned in trial order.
pub fn run_trials(cfg: &ExperimentConfig) -> Result<Vec<TrialReport>, HarnessError> {
    let derived = derive(cfg)?;
    (0..cfg.trials)
        .into_par_iter()
        .map(|i| run_trial_with(cfg, &derived, i))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub m: usize,
    pub d: usize,
    pub p: f64,
    pub delta: f64,
    pub r: f64,
    pub trials: usize,
    pub event1_rate: f64,
    pub event2_rate: f64,
    pub joint_rate: f64,
    pub break_rate: f64,
    pub break_rate_given_events: Option<f64>,
    pub mean_margin: Option<f64>,
    /// Fraction of columns with exactly one spike, over all trials.
    pub single_col_rate: f64,
    /// Fraction of spike-free columns, over all trials.
    pub zero_col_rate: f64,
    pub expected_y: f64,
    pub expected_z: f64,
    pub expected_event1: f64,
    pub expected_event2: f64,
    pub expected_joint: f64,
}

impl ReportRow for SweepRow {
    const COLUMNS: &'static [&'static str] = &[
        "m",
        "d",
        "p",
        "delta",
        "r",
        "trials",
        "event1_rate",
        "event2_rate",
        "joint_rate",
        "break_rate",
        "break_rate_given_events",
        "mean_margin",
        "single_col_rate",
        "zero_col_rate",
        "expected_y",
        "expected_z",
        "expected_event1",
        "expected_event2",
        "expected_joint",
    ];
}

/// Aggregates trial reports (in trial order) into one sweep row.
pub fn aggregate(derived: &DerivedParams, trials: &[TrialReport]) -> SweepRow {
    let n = trials.len();
    let rate = |pred: &dyn Fn(&TrialReport) -> bool| {
        if n == 0 {
            0.0
        } else {
            trials.iter().filter(|t| pred(t)).count() as f64 / n as f64
        }
    };
    let joint: Vec<&TrialReport> = trials.iter().filter(|t| t.found_1 && t.found_2).collect();
    let broken = |t: &TrialReport| t.verdict == WitnessVerdict::Erp2Broken;
    let margins: Vec<f64> = joint.iter().filter_map(|t| t.margin).collect();
    let cells = (n * derived.d).max(1) as f64;
    let (ey, ez) = event_expectations(derived.m, derived.delta);
    let probs = event_probabilities(derived.m, derived.d, derived.delta);
    SweepRow {
        m: derived.m,
        d: derived.d,
        p: derived.p,
        delta: derived.delta,
        r: derived.r,
        trials: n,
        event1_rate: rate(&|t| t.found_1),
        event2_rate: rate(&|t| t.found_2),
        joint_rate: rate(&|t| t.found_1 && t.found_2),
        break_rate: rate(&broken),
        break_rate_given_events: (!joint.is_empty())
            .then(|| joint.iter().filter(|t| broken(t)).count() as f64 / joint.len() as f64),
        mean_margin: (!margins.is_empty()).then(|| margins.iter().sum::<f64>() / margins.len() as f64),
        single_col_rate: trials.iter().map(|t| t.single_spike_cols).sum::<usize>() as f64 / cells,
        zero_col_rate: trials.iter().map(|t| t.spike_free_cols).sum::<usize>() as f64 / cells,
        expected_y: ey,
        expected_z: ez,
        expected_event1: probs.spike_pair,
        expected_event2: probs.zero_columns,
        expected_joint: probs.joint,
    }
}

/// One row per `m` in `cfg.m_list` (or the derived default `m`).
pub fn run_sweep(cfg: &ExperimentConfig) -> Result<Vec<SweepRow>, HarnessError> {
    let ms: Vec<Option<usize>> = if cfg.m_list.is_empty() {
        vec![cfg.m]
    } else {
        cfg.m_list.iter().copied().map(Some).collect()
    };
    let total = ms.len() * cfg.trials;
    if total > SWEEP_TRIAL_BUDGET {
        return Err(HarnessError::ConfigRefused(format!(
            "sweep requests {total} trials, budget is {SWEEP_TRIAL_BUDGET}"
        )));
    }
    let cells: Vec<(ExperimentConfig, DerivedParams)> = ms
        .into_iter()
        .map(|m| {
            let cell = ExperimentConfig { m, ..cfg.clone() };
            derive(&cell).map(|d| (cell, d))
        })
        .collect::<Result<_, _>>()?;
    cells
        .iter()
        .map(|(cell, derived)| {
            let trials: Vec<TrialReport> = (0..cell.trials)
                .into_par_iter()
                .map(|i| run_trial_with(cell, derived, i))
                .collect::<Result<_, _>>()?;
            Ok(aggregate(derived, &trials))
        })
        .collect()
}

/// How test directions `t` are chosen.
#[derive(Debug, Clone, PartialEq)]
pub enum TSampler {
    /// The first standard basis vector.
    Basis,
    /// Gaussian entries on `support` coordinates, normalized to the sphere.
    SparseGaussian { support: usize },
    Fixed(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MomentMethod {
    ExactRecursion,
    MonteCarlo,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MomentRow {
    pub q: f64,
    pub n_vectors: usize,
    /// `max_t ‖⟨X,t⟩‖_{L_q} / (√q·‖⟨X,t⟩‖_{L_2})`.
    pub max_ratio: f64,
    pub bound: f64,
    pub within_bound: bool,
    pub method: MomentMethod,
    pub delta: f64,
    pub r: f64,
}

impl ReportRow for MomentRow {
    const COLUMNS: &'static [&'static str] =
        &["q", "n_vectors", "max_ratio", "bound", "within_bound", "method", "delta", "r"];
}

fn sample_directions(sampler: &TSampler, n_vectors: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    match sampler {
        TSampler::Basis => vec![vec![1.0]],
        TSampler::Fixed(t) => vec![t.clone()],
        TSampler::SparseGaussian { support } => (0..n_vectors)
            .map(|_| {
                let mut t: Vec<f64> = (0..(*support).max(1)).map(|_| StandardNormal.sample(rng)).collect();
                let n = t.iter().map(|x| x * x).sum::<f64>().sqrt();
                t.iter_mut().for_each(|x| *x /= n);
                t
            })
            .collect(),
    }
}

/// `‖⟨X,t⟩‖_{L_q}`: exact recursion for even integer `q` on small supports,
/// Monte Carlo otherwise.
pub fn linear_form_norm(
    t: &[f64],
    params: &SpikeParams<f64>,
    q: f64,
    mc_samples: usize,
    rng: &mut ChaCha8Rng,
) -> Result<(f64, MomentMethod), HarnessError> {
    let even = q.fract() == 0.0 && (q as u32) % 2 == 0 && q >= 2.0;
    if even && t.len() <= EXACT_MOMENT_MAX_SUPPORT {
        let mom = linear_form_even_moment(t, params, q as u32)?;
        return Ok((mom.powf(q.recip()), MomentMethod::ExactRecursion));
    }
    let mut acc = 0.0;
    for _ in 0..mc_samples.max(1) {
        let s: f64 = t.iter().map(|&tj| tj * sample_x(params, rng)).sum();
        acc += s.abs().powf(q);
    }
    Ok(((acc / mc_samples.max(1) as f64).powf(q.recip()), MomentMethod::MonteCarlo))
}

/// Largest normalized moment ratio per `q` over sampled directions.
pub fn run_moment_experiment(
    cfg: &ExperimentConfig,
    q_list: &[f64],
    sampler: &TSampler,
    n_vectors: usize,
) -> Result<Vec<MomentRow>, HarnessError> {
    let derived = derive(cfg)?;
    let params = derived.spike();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed_base);
    let dirs = sample_directions(sampler, n_vectors, &mut rng);
    q_list
        .iter()
        .map(|&q| {
            if !(q >= 2.0) {
                return Err(HarnessError::ConfigRefused(format!("moment order q = {q} must be >= 2")));
            }
            let mut max_ratio = f64::NEG_INFINITY;
            let mut method = MomentMethod::ExactRecursion;
            for t in &dirs {
                let (lq, how) = linear_form_norm(t, &params, q, cfg.mc_samples, &mut rng)?;
                let l2 = params.c1_norm() * t.iter().map(|x| x * x).sum::<f64>().sqrt();
                max_ratio = max_ratio.max(lq / (q.sqrt() * l2));
                if how == MomentMethod::MonteCarlo {
                    method = how;
                }
            }
            Ok(MomentRow {
                q,
                n_vectors: dirs.len(),
                max_ratio,
                bound: cfg.moment_bound,
                within_bound: max_ratio <= cfg.moment_bound,
                method,
                delta: derived.delta,
                r: derived.r,
            })
        })
        .collect()
}

/// Closed-form single-coordinate ratio `(E|x|^q)^{1/q} / (√q·c₁)`.
pub fn single_coordinate_ratio(params: &SpikeParams<f64>, q: f64) -> Result<f64, HarnessError> {
    Ok(abs_moment(params, q)?.powf(q.recip()) / (q.sqrt() * params.c1_norm()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PositiveControlRow {
    pub d: usize,
    pub s: usize,
    pub m: usize,
    pub trials: usize,
    pub ensemble: EnsembleKind,
    pub seed: u64,
    /// Fraction where order `s` holds for both `Γ` and `Γ̃`.
    pub rate: f64,
    pub rate_raw: f64,
    pub rate_normalized: f64,
}

impl ReportRow for PositiveControlRow {
    const COLUMNS: &'static [&'static str] =
        &["d", "s", "m", "trials", "ensemble", "seed", "rate", "rate_raw", "rate_normalized"];
}

fn control_matrix(kind: EnsembleKind, m: usize, d: usize, seed: u64, spike: Option<SpikeParams<f64>>) -> Result<Array2<f64>, HarnessError> {
    Ok(match kind {
        EnsembleKind::Gaussian => gaussian_matrix(m, d, seed),
        EnsembleKind::Rademacher => draw(m, d, SpikeParams::rademacher(), seed)?.gamma,
        EnsembleKind::Spike => {
            let params = spike.ok_or_else(|| HarnessError::ConfigRefused("spike ensemble needs parameters".into()))?;
            draw(m, d, params, seed)?.gamma
        }
    })
}

/// Certifies order `s` on `trials` independent matrices and their
/// column-normalized versions.
pub fn run_positive_control(
    d: usize,
    s: usize,
    m: usize,
    trials: usize,
    ensemble: EnsembleKind,
    seed: u64,
    mode: CertifyMode,
) -> Result<PositiveControlRow, HarnessError> {
    if d > POSITIVE_CONTROL_MAX_D {
        return Err(HarnessError::ConfigRefused(format!("positive control needs d <= {POSITIVE_CONTROL_MAX_D}")));
    }
    if s == 0 || m < s || s > d {
        return Err(HarnessError::ConfigRefused(format!("need 1 <= s <= m and s <= d (s = {s}, m = {m}, d = {d})")));
    }
    if ensemble == EnsembleKind::Spike {
        return Err(HarnessError::ConfigRefused("positive controls use gaussian or rademacher matrices".into()));
    }
    let outcomes: Vec<(bool, bool)> = (0..trials)
        .into_par_iter()
        .map(|i| {
            let a = control_matrix(ensemble, m, d, seed.wrapping_add(i as u64), None)?;
            let raw = certify_erp(&a, s, mode)?.holds;
            let normalized = match normalize_columns(&a) {
                Ok(n) => certify_erp(&n.gamma_tilde, s, mode)?.holds,
                Err(EnsembleError::ZeroColumn(_)) => false,
                Err(e) => return Err(e.into()),
            };
            Ok((raw, normalized))
        })
        .collect::<Result<_, HarnessError>>()?;
    let n = trials.max(1) as f64;
    let count = |f: &dyn Fn(&(bool, bool)) -> bool| outcomes.iter().filter(|o| f(o)).count() as f64 / n;
    Ok(PositiveControlRow {
        d,
        s,
        m,
        trials,
        ensemble,
        seed,
        rate: count(&|o| o.0 && o.1),
        rate_raw: count(&|o| o.0),
        rate_normalized: count(&|o| o.1),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpCheckRow {
    pub m: usize,
    pub d: usize,
    pub s: usize,
    pub seed: u64,
    pub normalized: bool,
    pub holds: bool,
    /// `None` when the worst null-space LP is unbounded.
    pub max_value: Option<f64>,
    pub violating_support: Option<String>,
    pub lp_solves: usize,
    pub exact_solves: usize,
}

impl ReportRow for ErpCheckRow {
    const COLUMNS: &'static [&'static str] = &[
        "m",
        "d",
        "s",
        "seed",
        "normalized",
        "holds",
        "max_value",
        "violating_support",
        "lp_solves",
        "exact_solves",
    ];
}

/// Certifies order `s` for a matrix and its column normalization.
pub fn erp_check_matrix(matrix: &Array2<f64>, s: usize, seed: u64, mode: CertifyMode) -> Result<Vec<ErpCheckRow>, HarnessError> {
    let (m, d) = matrix.dim();
    let normalized = normalize_columns(matrix)?;
    [(false, matrix), (true, &normalized.gamma_tilde)]
        .into_iter()
        .map(|(is_norm, a)| {
            let v = certify_erp(a, s, mode)?;
            Ok(ErpCheckRow {
                m,
                d,
                s,
                seed,
                normalized: is_norm,
                holds: v.holds,
                max_value: v.max_value.is_finite().then_some(v.max_value),
                violating_support: v.violation.as_ref().map(|x| {
                    x.support.iter().map(usize::to_string).collect::<Vec<_>>().join(" ")
                }),
                lp_solves: v.lp_solves,
                exact_solves: v.exact_solves,
            })
        })
        .collect()
}

/// Draws the configured spike matrix and certifies it.
pub fn run_erp_check(cfg: &ExperimentConfig) -> Result<(EnsembleDraw<f64>, Vec<ErpCheckRow>), HarnessError> {
    let derived = derive(cfg)?;
    let dr = draw(derived.m, derived.d, derived.spike(), cfg.seed_base)?;
    let rows = erp_check_matrix(&dr.gamma, cfg.s, cfg.seed_base, cfg.mode())?;
    Ok((dr, rows))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InradiusRow {
    pub m: usize,
    pub d: usize,
    pub seed: u64,
    pub columns: usize,
    pub radius: f64,
    pub normalized_radius: f64,
    pub witness_bound: f64,
    pub witness_fits: bool,
    pub certificate_gap: f64,
}

impl ReportRow for InradiusRow {
    const COLUMNS: &'static [&'static str] = &[
        "m",
        "d",
        "seed",
        "columns",
        "radius",
        "normalized_radius",
        "witness_bound",
        "witness_fits",
        "certificate_gap",
    ];
}

/// Inradius of the spike-free block `Γᴶ` of one draw per trial.
pub fn run_inradius(cfg: &ExperimentConfig) -> Result<Vec<InradiusRow>, HarnessError> {
    let derived = derive(cfg)?;
    let budget = cfg.budget();
    let trials = cfg.trials.max(1);
    let rows: Vec<Option<InradiusRow>> = (0..trials)
        .map(|i| {
            let seed = cfg.seed_base.wrapping_add(i as u64);
            let dr = draw(derived.m, derived.d, derived.spike(), seed)?;
            let events = detect_events(&dr.eta);
            let Some(cols) = events.zero_cols else {
                return Ok(None);
            };
            let sub = dr.gamma.select(ndarray::Axis(1), &cols);
            let res = crate::geometry::inradius(&sub, &budget)?;
            let inc = check_ball_inclusion(&dr, &cols, 0.0, &budget)?;
            Ok(Some(InradiusRow {
                m: derived.m,
                d: derived.d,
                seed,
                columns: cols.len(),
                radius: res.radius,
                normalized_radius: inc.normalized_radius,
                witness_bound: inc.witness_bound,
                witness_fits: inc.witness_fits,
                certificate_gap: res.certificate_gap,
            }))
        })
        .collect::<Result<_, HarnessError>>()?;
    Ok(rows.into_iter().flatten().collect())
}

/// Random ±1 matrix, used by tests and pilots.
pub fn sign_matrix(m: usize, d: usize, seed: u64) -> Array2<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((m, d), || if rng.gen::<bool>() { 1.0 } else { -1.0 })
}
