//! Basis pursuit, exact-reconstruction certification and the explicit
//! two-sparse witness.
//!
//! Certification uses the null-space characterization: every `v` supported
//! on `S` with sign pattern `σ` is the unique `ℓ₁` minimizer for its own
//! measurements iff `Σ_{j∈S} σⱼhⱼ < Σ_{j∉S} |hⱼ|` for every nonzero kernel
//! vector `h`. For each `(S, σ)` that is one LP:
//! `max Σ σⱼhⱼ  s.t.  A h = 0,  Σ_{j∉S} |hⱼ| ≤ 1`, and order `s` holds iff
//! every optimum is strictly below 1.

use ndarray::{Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ensemble::{EnsembleDraw, EventFindings, NormalizedMatrix, detect_events};
use crate::lp::{solve, LpError, LpInstance, LpStatus, LpTolerances};
use crate::scalar::{LpScalar, Rational, Real};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("measurements are not in the range of the matrix")]
    Infeasible,
    #[error("basis pursuit LP reported unbounded, which is impossible for a nonnegative objective")]
    Unbounded,
    #[error("certification needs {needed} LP solves, budget is {budget}")]
    BudgetExceeded { needed: f64, budget: usize },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("witness structure violated: {0}")]
    WitnessStructure(String),
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Maximum number of null-space LPs a certification may run.
pub const LP_BUDGET: usize = 1_000_000;
/// Exact-rational solves are limited to matrices with at most this many columns.
pub const EXACT_MAX_COLUMNS: usize = 64;
/// Float optima within this distance of 1 are re-solved exactly.
pub const BOUNDARY_BAND: f64 = 1e-6;
const FACE_SEED: u64 = 0x5eed_f00d;

/// A sparse recovery instance: `y = A v`.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveryProblem<T> {
    pub matrix: Array2<T>,
    pub target: Vec<T>,
    pub measurements: Vec<T>,
}

impl<T: LpScalar> RecoveryProblem<T> {
    pub fn new(matrix: Array2<T>, target: Vec<T>) -> Self {
        let measurements = mat_vec(&matrix, &target);
        Self { matrix, target, measurements }
    }
}

pub(crate) fn mat_vec<T: LpScalar>(a: &Array2<T>, x: &[T]) -> Vec<T> {
    a.rows()
        .into_iter()
        .map(|row| {
            row.iter()
                .zip(x)
                .filter(|(_, xj)| !xj.is_zero())
                .fold(T::zero(), |acc, (aij, xj)| acc + aij.clone() * xj.clone())
        })
        .collect()
}

fn norm1<T: LpScalar>(x: &[T]) -> T {
    x.iter().fold(T::zero(), |acc, v| acc + v.abs())
}

#[derive(Debug, Clone, PartialEq)]
pub struct BpSolution<T> {
    pub t_star: Vec<T>,
    pub value: T,
    /// Raw LP signal: a nonbasic variable with zero reduced cost.
    pub dual_degenerate: bool,
    /// Confirmed: the optimal face contains a second point.
    pub nonunique: bool,
}

impl<T> BpSolution<T> {
    pub fn maybe_nonunique(&self) -> bool {
        self.nonunique
    }
}

fn bp_instance<T: LpScalar>(matrix: &Array2<T>, y: &[T]) -> LpInstance<T> {
    let (m, d) = matrix.dim();
    let mut lhs = Array2::<T>::zeros((m, 2 * d));
    for i in 0..m {
        for j in 0..d {
            let a = matrix[[i, j]].clone();
            lhs[[i, d + j]] = -a.clone();
            lhs[[i, j]] = a;
        }
    }
    LpInstance::new(vec![T::one(); 2 * d], lhs, y.to_vec())
}

/// `min ‖t‖₁ s.t. A t = y` via the split `t = t⁺ − t⁻`.
///
/// Uniqueness is checked whenever the LP is dual degenerate: over the optimal
/// face `{A t = y, ‖t‖₁ ≤ value}` a seeded random linear functional is both
/// minimized and maximized, and a spread between the two confirms a second
/// optimum.
pub fn basis_pursuit<T: LpScalar>(matrix: &Array2<T>, y: &[T], tol: &LpTolerances<T>) -> Result<BpSolution<T>, RecoveryError> {
    let (m, d) = matrix.dim();
    if y.len() != m {
        return Err(RecoveryError::InvalidParameter(format!("{} measurements for {m} rows", y.len())));
    }
    let inst = bp_instance(matrix, y);
    let res = solve(&inst, tol)?;
    match res.status {
        LpStatus::Infeasible => return Err(RecoveryError::Infeasible),
        LpStatus::Unbounded => return Err(RecoveryError::Unbounded),
        LpStatus::Optimal => {}
    }
    let t_star: Vec<T> = (0..d).map(|j| res.point[j].clone() - res.point[d + j].clone()).collect();
    let value = res.value.clone();
    let nonunique = res.dual_degenerate && optimal_face_has_spread(&inst, &t_star, &value, tol)?;
    Ok(BpSolution {
        t_star,
        value,
        dual_degenerate: res.dual_degenerate,
        nonunique,
    })
}

fn optimal_face_has_spread<T: LpScalar>(
    bp: &LpInstance<T>,
    t_star: &[T],
    value: &T,
    tol: &LpTolerances<T>,
) -> Result<bool, RecoveryError> {
    let d = t_star.len();
    let m = bp.n_rows();
    let mut rng = ChaCha8Rng::seed_from_u64(FACE_SEED);
    let dir: Vec<T> = (0..d).map(|_| T::of_f64(rng.gen_range(-1.0..1.0))).collect();

    // Variables: t⁺ (d), t⁻ (d), slack on the ℓ₁ budget.
    let mut lhs = Array2::<T>::zeros((m + 1, 2 * d + 1));
    lhs.slice_mut(ndarray::s![..m, ..2 * d]).assign(&bp.eq_lhs);
    for j in 0..=2 * d {
        lhs[[m, j]] = T::one();
    }
    let slack_tol = if T::EXACT {
        T::zero()
    } else {
        tol.feasibility.clone() * (T::one() + value.abs())
    };
    let mut rhs = bp.eq_rhs.clone();
    rhs.push(value.clone() + slack_tol);

    let mut extent = Vec::with_capacity(2);
    for sign in [T::one(), -T::one()] {
        let mut obj: Vec<T> = dir.iter().map(|r| sign.clone() * r.clone()).collect();
        obj.extend(dir.iter().map(|r| -(sign.clone() * r.clone())));
        obj.push(T::zero());
        let res = solve(&LpInstance::new(obj, lhs.clone(), rhs.clone()), tol)?;
        if !res.is_optimal() {
            return Ok(false);
        }
        extent.push(sign * res.value);
    }
    let spread = extent[1].clone() - extent[0].clone();
    if T::EXACT {
        Ok(spread > T::zero())
    } else {
        let scale = 1.0 + norm1(t_star).as_f64();
        Ok(spread.as_f64() > 1e-6 * scale)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CertifyMode {
    /// Floating point, with exact re-solves inside the boundary band.
    Float,
    /// Every LP in exact rational arithmetic.
    Exact,
}

/// A support/sign pattern whose null-space optimum reaches 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpViolation {
    pub support: Vec<usize>,
    pub signs: Vec<i8>,
    pub h: Vec<f64>,
    /// `f64::INFINITY` when the LP is unbounded (a kernel vector lives on `S`).
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErpVerdict {
    pub order: usize,
    pub holds: bool,
    pub violation: Option<ErpViolation>,
    /// Largest null-space optimum seen (`Σ σⱼhⱼ`); below 1 when `holds`.
    pub max_value: f64,
    pub lp_solves: usize,
    pub exact_solves: usize,
}

/// Number of null-space LPs, `C(d, s)·2^{s−1}`, as a float to avoid
/// overflow. Patterns `σ` and `−σ` share an optimum (`h ↦ −h`), so only
/// patterns starting with `−1` are solved.
pub fn certification_cost(d: usize, s: usize) -> f64 {
    if s > d {
        return 0.0;
    }
    let mut c = 1.0f64;
    for i in 0..s {
        c = c * (d - i) as f64 / (i + 1) as f64;
    }
    c * 2f64.powi(s as i32 - 1)
}

/// All `k`-subsets of `0..n` in lexicographic order.
pub fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

/// Sign patterns in lexicographic order with `−1 < +1`.
fn sign_patterns(s: usize) -> impl Iterator<Item = Vec<i8>> {
    (0..1u64 << s).map(move |mask| (0..s).map(|i| if mask >> (s - 1 - i) & 1 == 1 { 1 } else { -1 }).collect())
}

struct NspOutcome<T> {
    value: Option<T>,
    h: Vec<T>,
}

/// `max Σ σⱼhⱼ s.t. A h = 0, Σ_{j∉S}|hⱼ| ≤ 1`.
fn nsp_lp<T: LpScalar>(a: &Array2<T>, support: &[usize], signs: &[i8], tol: &LpTolerances<T>) -> Result<NspOutcome<T>, RecoveryError> {
    let (m, d) = a.dim();
    let s = support.len();
    let off: Vec<usize> = (0..d).filter(|j| !support.contains(j)).collect();
    let k = off.len();
    // Columns: h_S (free, s), u (k), w (k), slack.
    let n = s + 2 * k + 1;
    let mut lhs = Array2::<T>::zeros((m + 1, n));
    for i in 0..m {
        for (c, &j) in support.iter().enumerate() {
            lhs[[i, c]] = a[[i, j]].clone();
        }
        for (c, &j) in off.iter().enumerate() {
            lhs[[i, s + c]] = a[[i, j]].clone();
            lhs[[i, s + k + c]] = -a[[i, j]].clone();
        }
    }
    for c in s..n {
        lhs[[m, c]] = T::one();
    }
    let mut rhs = vec![T::zero(); m];
    rhs.push(T::one());
    let mut obj = vec![T::zero(); n];
    for (c, &sg) in signs.iter().enumerate() {
        obj[c] = if sg > 0 { -T::one() } else { T::one() };
    }
    let mut inst = LpInstance::new(obj, lhs, rhs);
    for c in 0..s {
        inst = inst.free(c);
    }
    let res = solve(&inst, tol)?;
    let assemble = |x: &[T], with_off: bool| {
        let mut h = vec![T::zero(); d];
        for (c, &j) in support.iter().enumerate() {
            h[j] = x[c].clone();
        }
        if with_off {
            for (c, &j) in off.iter().enumerate() {
                h[j] = x[s + c].clone() - x[s + k + c].clone();
            }
        }
        h
    };
    match res.status {
        LpStatus::Optimal => Ok(NspOutcome {
            value: Some(-res.value.clone()),
            h: assemble(&res.point, true),
        }),
        LpStatus::Unbounded => {
            // The ray is a kernel vector supported on S; scale it so that
            // Σ σⱼhⱼ = 1.
            let ray = res.ray.expect("unbounded result carries a ray");
            let h = assemble(&ray, false);
            let gain = support
                .iter()
                .zip(signs)
                .fold(T::zero(), |acc, (&j, &sg)| if sg > 0 { acc + h[j].clone() } else { acc - h[j].clone() });
            let h = h.into_iter().map(|v| v / gain.clone()).collect();
            Ok(NspOutcome { value: None, h })
        }
        LpStatus::Infeasible => Err(RecoveryError::Lp(LpError::Dimension(
            "null-space LP infeasible although h = 0 is feasible".into(),
        ))),
    }
}

enum PatternResult {
    Fine { value: f64, exact: bool },
    Violated { violation: ErpViolation, exact: bool },
}

fn check_pattern<T: LpScalar>(
    a: &Array2<T>,
    exact_a: Option<&Array2<Rational>>,
    support: &[usize],
    signs: &[i8],
    mode: CertifyMode,
) -> Result<PatternResult, RecoveryError> {
    let to_violation = |h: Vec<f64>, value: f64| ErpViolation {
        support: support.to_vec(),
        signs: signs.to_vec(),
        h,
        value,
    };
    let exact_solve = |ra: &Array2<Rational>| -> Result<PatternResult, RecoveryError> {
        let out = nsp_lp(ra, support, signs, &LpTolerances::default())?;
        let h: Vec<f64> = out.h.iter().map(LpScalar::as_f64).collect();
        Ok(match out.value {
            None => PatternResult::Violated { violation: to_violation(h, f64::INFINITY), exact: true },
            Some(v) if v >= Rational::from_integer(1.into()) => {
                PatternResult::Violated { violation: to_violation(h, v.as_f64()), exact: true }
            }
            Some(v) => PatternResult::Fine { value: v.as_f64(), exact: true },
        })
    };

    if mode == CertifyMode::Exact && !T::EXACT {
        return exact_solve(exact_a.expect("exact matrix prepared"));
    }
    let out = nsp_lp(a, support, signs, &LpTolerances::default())?;
    let h: Vec<f64> = out.h.iter().map(LpScalar::as_f64).collect();
    match out.value {
        None => Ok(PatternResult::Violated { violation: to_violation(h, f64::INFINITY), exact: T::EXACT }),
        Some(v) if T::EXACT => {
            if v >= T::one() {
                Ok(PatternResult::Violated { violation: to_violation(h, v.as_f64()), exact: true })
            } else {
                Ok(PatternResult::Fine { value: v.as_f64(), exact: true })
            }
        }
        Some(v) => {
            let vf = v.as_f64();
            if (vf - 1.0).abs() <= BOUNDARY_BAND {
                match exact_a {
                    Some(ra) => exact_solve(ra),
                    None => Ok(if vf >= 1.0 - 1e-7 {
                        PatternResult::Violated { violation: to_violation(h, vf), exact: false }
                    } else {
                        PatternResult::Fine { value: vf, exact: false }
                    }),
                }
            } else if vf > 1.0 {
                Ok(PatternResult::Violated { violation: to_violation(h, vf), exact: false })
            } else {
                Ok(PatternResult::Fine { value: vf, exact: false })
            }
        }
    }
}

/// Decides the exact reconstruction property of order `s`.
///
/// Supports and sign patterns are processed in parallel; the reported
/// violation is always the first in lexicographic `(S, σ)` order.
pub fn certify_erp<T: LpScalar>(matrix: &Array2<T>, s: usize, mode: CertifyMode) -> Result<ErpVerdict, RecoveryError> {
    let (m, d) = matrix.dim();
    if s == 0 || s > d {
        return Err(RecoveryError::InvalidParameter(format!("order s = {s} must be in 1..={d}")));
    }
    let needed = certification_cost(d, s);
    if needed > LP_BUDGET as f64 {
        return Err(RecoveryError::BudgetExceeded { needed, budget: LP_BUDGET });
    }
    let exact_a = if !T::EXACT && d <= EXACT_MAX_COLUMNS {
        Some(matrix.mapv(|v| v.to_rational()))
    } else if mode == CertifyMode::Exact && !T::EXACT {
        return Err(RecoveryError::InvalidParameter(format!(
            "exact mode supports at most {EXACT_MAX_COLUMNS} columns, got {d}"
        )));
    } else {
        None
    };
    let _ = m;

    let supports = combinations(d, s);
    let patterns: Vec<Vec<i8>> = sign_patterns(s).take(1 << (s - 1)).collect();
    let per_support: Vec<Result<(Option<ErpViolation>, f64, usize, usize), RecoveryError>> = supports
        .par_iter()
        .map(|support| {
            let mut best = f64::NEG_INFINITY;
            let mut solves = 0;
            let mut exact = 0;
            for signs in &patterns {
                solves += 1;
                match check_pattern(matrix, exact_a.as_ref(), support, signs, mode)? {
                    PatternResult::Fine { value, exact: e } => {
                        exact += usize::from(e && !T::EXACT);
                        best = best.max(value);
                    }
                    PatternResult::Violated { violation, exact: e } => {
                        exact += usize::from(e && !T::EXACT);
                        let v = violation.value;
                        return Ok((Some(violation), best.max(v), solves, exact));
                    }
                }
            }
            Ok((None, best, solves, exact))
        })
        .collect();

    let mut verdict = ErpVerdict {
        order: s,
        holds: true,
        violation: None,
        max_value: f64::NEG_INFINITY,
        lp_solves: 0,
        exact_solves: 0,
    };
    for r in per_support {
        let (violation, best, solves, exact) = r?;
        verdict.lp_solves += solves;
        verdict.exact_solves += exact;
        verdict.max_value = verdict.max_value.max(best);
        if verdict.holds {
            if let Some(v) = violation {
                verdict.holds = false;
                verdict.violation = Some(v);
            }
        }
    }
    Ok(verdict)
}

/// Independent check of [`certify_erp`] by actually running basis pursuit.
///
/// For every support, sign pattern and `trials` random magnitude vectors,
/// `v` must come back from basis pursuit to `1e-7` with a unique optimum.
pub fn erp_bruteforce_oracle(matrix: &Array2<f64>, s: usize, trials: usize, seed: u64) -> Result<bool, RecoveryError> {
    let d = matrix.ncols();
    if d > 12 {
        return Err(RecoveryError::InvalidParameter(format!("oracle limited to d <= 12, got {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let tol = LpTolerances::default();
    for support in combinations(d, s) {
        for signs in sign_patterns(s) {
            for _ in 0..trials.max(1) {
                let mut v = vec![0.0; d];
                for (&j, &sg) in support.iter().zip(&signs) {
                    v[j] = f64::from(sg) * rng.gen_range(0.5..2.0);
                }
                let y = mat_vec(matrix, &v);
                let sol = basis_pursuit(matrix, &y, &tol)?;
                let err = sol.t_star.iter().zip(&v).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
                if err > 1e-7 || sol.nonunique {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WitnessVerdict {
    /// `Γ̃v` is reached by some `z` on `J` with `‖z‖₁ ≤ 1 = ‖v‖₁`.
    Erp2Broken,
    /// The structural events did not both occur.
    WitnessUnavailable,
    /// The `J` columns do not reach `Γ̃v` inside the unit `ℓ₁` ball (or at all).
    FeasibilityFailed,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WitnessReport<T> {
    pub events: EventFindings,
    pub v: Vec<T>,
    pub z: Vec<T>,
    /// `None` when the feasibility LP is infeasible or no witness exists.
    pub z_norm1: Option<T>,
    pub verdict: WitnessVerdict,
    /// Whether the boundary case was settled in exact arithmetic.
    pub exact_resolved: bool,
}

impl<T: Real> WitnessReport<T> {
    /// `1 − ‖z‖₁`.
    pub fn margin(&self) -> Option<T> {
        self.z_norm1.map(|z| T::one() - z)
    }
}

/// Builds the two-sparse witness from the spike structure of `draw`.
///
/// With `j1, j2` the same-row single-spike columns, `v = (e_{j1} + e_{j2})/2`
/// when the spike signs differ and `(e_{j1} − e_{j2})/2` otherwise, so
/// `(Γ̃v)_ℓ = 0`. Then `min ‖z‖₁ s.t. Γ̃z = Γ̃v, supp z ⊆ J` decides the verdict.
pub fn construct_witness<T: Real>(draw: &EnsembleDraw<T>, normalized: &NormalizedMatrix<T>) -> Result<WitnessReport<T>, RecoveryError> {
    let events = detect_events(&draw.eta);
    let d = draw.d;
    let m = draw.m;
    let unavailable = |events: EventFindings| WitnessReport {
        events,
        v: vec![T::zero(); d],
        z: vec![T::zero(); d],
        z_norm1: None,
        verdict: WitnessVerdict::WitnessUnavailable,
        exact_resolved: false,
    };
    let (Some(pair), Some(cols)) = (events.spike_pair, events.zero_cols.clone()) else {
        return Ok(unavailable(events));
    };

    let half = T::lit(0.5);
    let mut v = vec![T::zero(); d];
    v[pair.j1] = half;
    v[pair.j2] = if draw.eps[[pair.row, pair.j1]] != draw.eps[[pair.row, pair.j2]] { half } else { -half };

    let gt = &normalized.gamma_tilde;
    let w = mat_vec(gt, &v);
    let r = draw.params.r();
    let mm = T::from_usize(m).unwrap();
    if !w[pair.row].is_zero() {
        return Err(RecoveryError::WitnessStructure(format!("w_l = {} is not zero", w[pair.row])));
    }
    let cap = (r * r + mm - T::one()).sqrt().recip();
    let slack = T::lit(1e-12);
    if let Some((i, wi)) = w.iter().enumerate().find(|(i, wi)| *i != pair.row && wi.abs() > cap + slack) {
        return Err(RecoveryError::WitnessStructure(format!("|w_{i}| = {wi} exceeds {cap}")));
    }
    let w_norm = w.iter().map(|&x| x * x).sum::<T>().sqrt();
    if w_norm > mm.sqrt() / r + T::lit(1e-9) {
        return Err(RecoveryError::WitnessStructure(format!("|w|_2 = {w_norm} exceeds sqrt(m)/R")));
    }

    let sub = gt.select(Axis(1), &cols);
    let tol = LpTolerances::<T>::default();
    let solved = match basis_pursuit(&sub, &w, &tol) {
        Ok(sol) => Some(sol),
        Err(RecoveryError::Infeasible) => None,
        Err(e) => return Err(e),
    };
    let Some(sol) = solved else {
        return Ok(WitnessReport {
            events,
            v,
            z: vec![T::zero(); d],
            z_norm1: None,
            verdict: WitnessVerdict::FeasibilityFailed,
            exact_resolved: false,
        });
    };

    let mut z = vec![T::zero(); d];
    for (c, &j) in cols.iter().enumerate() {
        z[j] = sol.t_star[c];
    }
    let mut z_norm1 = sol.value;
    let mut exact_resolved = false;
    let one = T::one();
    let broken = if (z_norm1 - one).abs() <= T::lit(1e-7) {
        exact_resolved = true;
        let rsub = sub.mapv(|x| x.to_rational());
        let rw: Vec<Rational> = mat_vec(&gt.mapv(|x| x.to_rational()), &v.iter().map(|x| x.to_rational()).collect::<Vec<_>>());
        match basis_pursuit(&rsub, &rw, &LpTolerances::default()) {
            Ok(exact) => {
                z_norm1 = T::lit(exact.value.as_f64());
                exact.value <= Rational::from_integer(1.into())
            }
            Err(RecoveryError::Infeasible) => false,
            Err(e) => return Err(e),
        }
    } else {
        z_norm1 <= one
    };

    Ok(WitnessReport {
        events,
        v,
        z,
        z_norm1: Some(z_norm1),
        verdict: if broken { WitnessVerdict::Erp2Broken } else { WitnessVerdict::FeasibilityFailed },
        exact_resolved,
    })
}

/// Confirms a broken witness by running basis pursuit on the full matrix:
/// the optimum must not exceed `‖v‖₁ = 1` and `v` must not be the unique
/// minimizer. Reports that are not `Erp2Broken` return `false`.
pub fn witness_consistency<T: Real>(matrix_tilde: &Array2<T>, report: &WitnessReport<T>) -> Result<bool, RecoveryError> {
    if report.verdict != WitnessVerdict::Erp2Broken {
        return Ok(false);
    }
    let y = mat_vec(matrix_tilde, &report.v);
    let sol = basis_pursuit(matrix_tilde, &y, &LpTolerances::default())?;
    let value_ok = sol.value.as_f64() <= 1.0 + 1e-8;
    let differs = sol
        .t_star
        .iter()
        .zip(&report.v)
        .any(|(a, b)| (*a - *b).abs().as_f64() > 1e-7);
    Ok(value_ok && (sol.nonunique || differs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn tol() -> LpTolerances<f64> {
        LpTolerances::default()
    }

    #[test]
    fn bp_identity_returns_measurements() {
        let a = Array2::<f64>::eye(4);
        let y = vec![1.5, -2.0, 0.0, 0.25];
        let sol = basis_pursuit(&a, &y, &tol()).unwrap();
        assert_eq!(sol.t_star, y);
        assert!((sol.value - 3.75).abs() < 1e-12);
        assert!(!sol.nonunique);
    }

    #[test]
    fn bp_prefers_shared_column() {
        let a = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        let sol = basis_pursuit(&a, &[1.0, 1.0], &tol()).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        for (got, want) in sol.t_star.iter().zip([0.0, 0.0, 1.0]) {
            assert!((got - want).abs() < 1e-12);
        }
        assert!(!sol.nonunique);
    }

    #[test]
    fn bp_flags_tied_optimum() {
        let a = array![[1.0, 1.0]];
        let sol = basis_pursuit(&a, &[2.0], &tol()).unwrap();
        assert!((sol.value - 2.0).abs() < 1e-12);
        assert!(sol.dual_degenerate);
        assert!(sol.maybe_nonunique());
    }

    #[test]
    fn bp_infeasible_measurements() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert_eq!(basis_pursuit(&a, &[1.0, 2.0], &tol()), Err(RecoveryError::Infeasible));
    }

    #[test]
    fn bp_value_at_most_target_norm() {
        let a = array![[1.0, -1.0, 2.0, 0.5], [0.0, 1.0, 1.0, -1.0]];
        let p = RecoveryProblem::new(a.clone(), vec![0.0, 1.0, 0.0, -2.0]);
        let sol = basis_pursuit(&p.matrix, &p.measurements, &tol()).unwrap();
        assert!(sol.value <= 3.0 + 1e-9);
    }

    #[test]
    fn combinations_are_lexicographic() {
        assert_eq!(combinations(4, 2), vec![vec![0, 1], vec![0, 2], vec![0, 3], vec![1, 2], vec![1, 3], vec![2, 3]]);
        assert_eq!(combinations(3, 0), vec![Vec::<usize>::new()]);
        assert!(combinations(2, 3).is_empty());
        assert_eq!(sign_patterns(2).collect::<Vec<_>>(), vec![vec![-1, -1], vec![-1, 1], vec![1, -1], vec![1, 1]]);
    }

    #[test]
    fn certify_identity_holds() {
        let a = Array2::<f64>::eye(5);
        for s in 1..=3 {
            let v = certify_erp(&a, s, CertifyMode::Float).unwrap();
            assert!(v.holds);
            assert!(v.max_value <= 0.0 + 1e-12);
        }
    }

    #[test]
    fn certify_two_column_boundary() {
        let a = array![[1.0, 1.0]];
        let v = certify_erp(&a, 1, CertifyMode::Float).unwrap();
        assert!(!v.holds);
        let viol = v.violation.unwrap();
        assert_eq!(viol.support, vec![0]);
        assert_eq!(viol.value, 1.0);
        assert_eq!(viol.h, vec![-1.0, 1.0]);
        assert!(v.exact_solves >= 1);
        let exact = certify_erp(&a, 1, CertifyMode::Exact).unwrap();
        assert!(!exact.holds);
    }

    #[test]
    fn certify_shared_column_holds_order_one() {
        let a = array![[1.0, 0.0, 1.0], [0.0, 1.0, 1.0]];
        let v = certify_erp(&a, 1, CertifyMode::Float).unwrap();
        assert!(v.holds);
        assert!((v.max_value - 0.5).abs() < 1e-9, "{}", v.max_value);
    }

    #[test]
    fn certify_detects_kernel_on_support() {
        // Columns 0 and 1 are equal: h = e0 − e1 lives on S = {0, 1}.
        let a = array![[1.0, 1.0, 0.0], [2.0, 2.0, 1.0]];
        let v = certify_erp(&a, 2, CertifyMode::Float).unwrap();
        assert!(!v.holds);
        let viol = v.violation.unwrap();
        assert_eq!(viol.value, f64::INFINITY);
        let ah = mat_vec(&a, &viol.h);
        assert!(ah.iter().all(|x| x.abs() < 1e-12));
    }

    #[test]
    fn certify_refuses_over_budget() {
        let a = Array2::<f64>::zeros((2, 200));
        assert!(matches!(certify_erp(&a, 4, CertifyMode::Float), Err(RecoveryError::BudgetExceeded { .. })));
    }

    #[test]
    fn oracle_examples() {
        assert!(erp_bruteforce_oracle(&Array2::eye(4), 2, 2, 1).unwrap());
        assert!(!erp_bruteforce_oracle(&array![[1.0, 1.0]], 1, 2, 1).unwrap());
    }

    #[test]
    fn duplicate_column_is_not_unique() {
        let h = 0.5f64.sqrt();
        let gt = array![[1.0, 0.0, h, h], [0.0, 1.0, h, h]];
        let y = mat_vec(&gt, &[0.0, 0.0, 1.0, 0.0]);
        let sol = basis_pursuit(&gt, &y, &tol()).unwrap();
        assert!((sol.value - 1.0).abs() < 1e-12);
        assert!(sol.nonunique);
    }
}
