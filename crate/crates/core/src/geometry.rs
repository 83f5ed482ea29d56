//! Polytope and spectral geometry.
//!
//! The inradius of `A·B₁ⁿ = conv{±aⱼ}` is the minimum over unit `w` of its
//! support function `max_j |⟨aⱼ, w⟩| = ‖Aᵀw‖_∞`.

use ndarray::{Array2, Axis};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use thiserror::Error;

use crate::ensemble::{EnsembleDraw, NormalizedMatrix};
use crate::lp::{solve, LpError, LpInstance, LpTolerances};
use crate::recovery::{certification_cost, combinations, mat_vec, LP_BUDGET};
use crate::scalar::Real;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("column {0} of the selected set carries a spike")]
    SpikedColumn(usize),
    #[error("enumeration needs {needed} subsets, budget is {budget}")]
    BudgetExceeded { needed: f64, budget: usize },
    #[error("multi-start radius {search} disagrees with grid oracle {oracle}")]
    OracleDisagreement { search: f64, oracle: f64 },
    #[error(transparent)]
    Lp(#[from] LpError),
}

/// Largest supported row count for [`inradius`].
pub const INRADIUS_MAX_ROWS: usize = 20;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InradiusBudget {
    pub starts: usize,
    pub steps: usize,
    pub seed: u64,
    /// Tangent-plane LP refinements after the subgradient phase.
    pub polish_rounds: usize,
}

impl Default for InradiusBudget {
    fn default() -> Self {
        Self { starts: 256, steps: 2000, seed: 0x1a7a_d105, polish_rounds: 30 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct InradiusResult<T> {
    pub radius: T,
    pub minimizing_direction: Vec<T>,
    /// Best sampled value minus the refined value (nonnegative).
    pub certificate_gap: T,
    /// Grid-oracle value, computed for `m ≤ 3`.
    pub oracle_radius: Option<T>,
}

fn support_value<T: Real>(a: &Array2<T>, w: &[T]) -> (T, usize, T) {
    let mut best = T::neg_infinity();
    let mut arg = 0;
    let mut sign = T::one();
    for (j, col) in a.columns().into_iter().enumerate() {
        let dot: T = col.iter().zip(w).map(|(&x, &y)| x * y).sum();
        if dot.abs() > best {
            best = dot.abs();
            arg = j;
            sign = if dot < T::zero() { -T::one() } else { T::one() };
        }
    }
    (best, arg, sign)
}

fn normalize<T: Real>(w: &mut [T]) -> T {
    let n = w.iter().map(|&x| x * x).sum::<T>().sqrt();
    if n > T::zero() {
        w.iter_mut().for_each(|x| *x = *x / n);
    }
    n
}

fn random_unit<T: Real>(m: usize, rng: &mut ChaCha8Rng) -> Vec<T> {
    loop {
        let mut w: Vec<T> = (0..m)
            .map(|_| {
                let g: f64 = StandardNormal.sample(rng);
                T::lit(g)
            })
            .collect();
        if normalize(&mut w) > T::lit(1e-8) {
            return w;
        }
    }
}

/// Projected subgradient descent from one start with `1/√k` step decay.
fn descend<T: Real>(a: &Array2<T>, mut w: Vec<T>, steps: usize) -> (T, Vec<T>) {
    let m = w.len();
    let (mut best, _, _) = support_value(a, &w);
    let mut best_w = w.clone();
    let step0 = T::lit(0.5);
    for k in 1..=steps {
        let (_, j, sign) = support_value(a, &w);
        let col = a.column(j);
        // Tangent component of the subgradient.
        let radial: T = col.iter().zip(&w).map(|(&x, &y)| x * y).sum();
        let mut g: Vec<T> = (0..m).map(|i| sign * (col[i] - radial * w[i])).collect();
        let gn = normalize(&mut g);
        if gn <= T::epsilon() {
            break;
        }
        let eta = step0 / T::from_usize(k).unwrap().sqrt();
        for i in 0..m {
            w[i] = w[i] - eta * g[i];
        }
        normalize(&mut w);
        let (f, _, _) = support_value(a, &w);
        if f < best {
            best = f;
            best_w.clone_from(&w);
        }
    }
    (best, best_w)
}

/// One refinement: minimize `‖Aᵀu‖_∞` over the tangent plane `⟨w₀, u⟩ = 1`,
/// then rescale `u` back to the sphere. The value can only decrease.
fn polish_step<T: Real>(a: &Array2<T>, w0: &[T]) -> Result<Option<(T, Vec<T>)>, GeometryError> {
    let (m, n) = a.dim();
    // Variables: u (m, free), tau (>= 0), slacks (2n, >= 0).
    let nv = m + 1 + 2 * n;
    let mut lhs = Array2::<T>::zeros((2 * n + 1, nv));
    for j in 0..n {
        for i in 0..m {
            lhs[[2 * j, i]] = a[[i, j]];
            lhs[[2 * j + 1, i]] = -a[[i, j]];
        }
        lhs[[2 * j, m]] = -T::one();
        lhs[[2 * j + 1, m]] = -T::one();
        lhs[[2 * j, m + 1 + 2 * j]] = T::one();
        lhs[[2 * j + 1, m + 2 + 2 * j]] = T::one();
    }
    for i in 0..m {
        lhs[[2 * n, i]] = w0[i];
    }
    let mut rhs = vec![T::zero(); 2 * n];
    rhs.push(T::one());
    let mut obj = vec![T::zero(); nv];
    obj[m] = T::one();
    let mut inst = LpInstance::new(obj, lhs, rhs);
    for i in 0..m {
        inst = inst.free(i);
    }
    let res = solve(&inst, &LpTolerances::default())?;
    if !res.is_optimal() {
        return Ok(None);
    }
    let mut u = res.point[..m].to_vec();
    if normalize(&mut u) <= T::zero() {
        return Ok(None);
    }
    let (f, _, _) = support_value(a, &u);
    Ok(Some((f, u)))
}

/// `max{c : c·B₂^m ⊆ A·B₁ⁿ}` by multi-start subgradient search plus LP
/// polish. For `m ≤ 3` the result is cross-checked against
/// [`angular_grid_inradius`] at `1e-3` relative.
pub fn inradius<T: Real>(a: &Array2<T>, budget: &InradiusBudget) -> Result<InradiusResult<T>, GeometryError> {
    let (m, n) = a.dim();
    if budget.starts == 0 {
        return Err(GeometryError::InvalidParameter("inradius needs at least one start".into()));
    }
    if m == 0 || n == 0 {
        return Err(GeometryError::InvalidParameter("empty matrix".into()));
    }
    if m > INRADIUS_MAX_ROWS {
        return Err(GeometryError::InvalidParameter(format!("m = {m} exceeds {INRADIUS_MAX_ROWS}")));
    }
    if a.iter().all(|v| v.is_zero()) {
        let mut e1 = vec![T::zero(); m];
        e1[0] = T::one();
        return Ok(InradiusResult {
            radius: T::zero(),
            minimizing_direction: e1,
            certificate_gap: T::zero(),
            oracle_radius: None,
        });
    }

    let runs: Vec<(T, Vec<T>)> = (0..budget.starts)
        .into_par_iter()
        .map(|start| {
            let mut rng = ChaCha8Rng::seed_from_u64(budget.seed.wrapping_add(start as u64));
            let w0 = random_unit(m, &mut rng);
            descend(a, w0, budget.steps)
        })
        .collect();
    // Ties go to the lowest start index.
    let (sampled, mut w) = runs
        .into_iter()
        .reduce(|best, cur| if cur.0 < best.0 { cur } else { best })
        .expect("at least one start");

    let mut radius = sampled;
    for _ in 0..budget.polish_rounds {
        match polish_step(a, &w)? {
            Some((f, u)) if f < radius * (T::one() - T::lit(1e-15)) => {
                radius = f;
                w = u;
            }
            _ => break,
        }
    }
    let (radius, _, _) = support_value(a, &w);

    let oracle_radius = if m <= 3 {
        let (oracle, _) = angular_grid_inradius(a);
        let scale = oracle.abs().max(T::lit(1e-300));
        if ((radius - oracle) / scale).abs() > T::lit(1e-3) {
            return Err(GeometryError::OracleDisagreement { search: radius.as_f64(), oracle: oracle.as_f64() });
        }
        Some(oracle)
    } else {
        None
    };

    Ok(InradiusResult {
        radius,
        minimizing_direction: w,
        certificate_gap: (sampled - radius).max(T::zero()),
        oracle_radius,
    })
}

fn spherical<T: Real>(m: usize, angles: &[f64]) -> Vec<T> {
    match m {
        1 => vec![T::one()],
        2 => vec![T::lit(angles[0].cos()), T::lit(angles[0].sin())],
        _ => {
            let (th, ph) = (angles[0], angles[1]);
            vec![
                T::lit(th.sin() * ph.cos()),
                T::lit(th.sin() * ph.sin()),
                T::lit(th.cos()),
            ]
        }
    }
}

/// Dense angular grid over the half-sphere (`f(w) = f(−w)`) followed by
/// successive zooms around the best cells. Only for `m ≤ 3`.
pub fn angular_grid_inradius<T: Real>(a: &Array2<T>) -> (T, Vec<T>) {
    let m = a.nrows();
    assert!((1..=3).contains(&m), "angular grid oracle needs 1 <= m <= 3");
    let eval = |angles: &[f64]| {
        let w = spherical::<T>(m, angles);
        (support_value(a, &w).0, w)
    };
    if m == 1 {
        return eval(&[]);
    }
    let pi = std::f64::consts::PI;
    let (coarse, dims): (Vec<Vec<f64>>, usize) = if m == 2 {
        let k = 20_000;
        ((0..k).map(|i| vec![pi * i as f64 / k as f64]).collect(), 1)
    } else {
        let (kt, kp) = (300, 600);
        let mut pts = Vec::with_capacity((kt + 1) * kp);
        for i in 0..=kt {
            for j in 0..kp {
                pts.push(vec![pi * i as f64 / kt as f64, 2.0 * pi * j as f64 / kp as f64]);
            }
        }
        (pts, 2)
    };
    let mut spacing = if m == 2 { pi / 20_000.0 } else { pi / 300.0 };
    let mut scored: Vec<(T, Vec<f64>)> = coarse.into_iter().map(|p| (eval(&p).0, p)).collect();
    scored.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
    let mut centers: Vec<Vec<f64>> = scored.into_iter().take(24).map(|(_, p)| p).collect();

    let sub = if dims == 1 { 64 } else { 24 };
    for _ in 0..6 {
        let mut cand: Vec<(T, Vec<f64>)> = Vec::new();
        for c in &centers {
            if dims == 1 {
                for i in 0..=sub {
                    let p = vec![c[0] + spacing * (2.0 * i as f64 / sub as f64 - 1.0)];
                    cand.push((eval(&p).0, p));
                }
            } else {
                for i in 0..=sub {
                    for j in 0..=sub {
                        let p = vec![
                            c[0] + spacing * (2.0 * i as f64 / sub as f64 - 1.0),
                            c[1] + spacing * (2.0 * j as f64 / sub as f64 - 1.0),
                        ];
                        cand.push((eval(&p).0, p));
                    }
                }
            }
        }
        cand.sort_by(|x, y| x.0.partial_cmp(&y.0).unwrap_or(std::cmp::Ordering::Equal));
        centers = cand.into_iter().take(8).map(|(_, p)| p).collect();
        spacing *= 4.0 / sub as f64;
    }
    eval(&centers[0])
}

#[derive(Debug, Clone, PartialEq)]
pub struct BallInclusion<T> {
    pub holds: bool,
    /// Inradius of the unnormalized sign block `Γᴶ`.
    pub radius: T,
    /// Inradius of `Γ̃ᴶ = Γᴶ/√m`.
    pub normalized_radius: T,
    /// `√m/R`, the bound on `‖Γ̃v‖₂` for the witness `v`.
    pub witness_bound: T,
    /// `√m/R ≤ radius/√m`: the witness image lies inside `Γ̃B₁ᴶ`.
    pub witness_fits: bool,
}

/// Tests `c·B₂^m ⊆ Γᴶ·B₁ᴶ` on spike-free columns `J`.
pub fn check_ball_inclusion<T: Real>(
    draw: &EnsembleDraw<T>,
    cols: &[usize],
    c: T,
    budget: &InradiusBudget,
) -> Result<BallInclusion<T>, GeometryError> {
    if let Some(&j) = cols.iter().find(|&&j| j >= draw.d || !draw.is_spike_free(j)) {
        return Err(GeometryError::SpikedColumn(j));
    }
    let sub = draw.gamma.select(Axis(1), cols);
    let res = inradius(&sub, budget)?;
    let sqrt_m = T::from_usize(draw.m).unwrap().sqrt();
    let normalized_radius = res.radius / sqrt_m;
    let witness_bound = sqrt_m / draw.params.r();
    Ok(BallInclusion {
        holds: res.radius >= c,
        radius: res.radius,
        normalized_radius,
        witness_bound,
        witness_fits: witness_bound <= normalized_radius,
    })
}

/// Eigenvalues of a symmetric matrix by cyclic Jacobi rotations.
pub fn symmetric_eigenvalues<T: Real>(mut s: Array2<T>, tol: T) -> Vec<T> {
    let n = s.nrows();
    for _sweep in 0..100 {
        let off: T = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| s[[i, j]] * s[[i, j]])
            .sum::<T>()
            .sqrt();
        if off <= tol {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = s[[p, q]];
                if apq.is_zero() {
                    continue;
                }
                let theta = (s[[q, q]] - s[[p, p]]) / (T::lit(2.0) * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let t = if theta.is_zero() { T::one() } else { t };
                let c = (t * t + T::one()).sqrt().recip();
                let sn = t * c;
                for k in 0..n {
                    let skp = s[[k, p]];
                    let skq = s[[k, q]];
                    s[[k, p]] = c * skp - sn * skq;
                    s[[k, q]] = sn * skp + c * skq;
                }
                for k in 0..n {
                    let spk = s[[p, k]];
                    let sqk = s[[q, k]];
                    s[[p, k]] = c * spk - sn * sqk;
                    s[[q, k]] = sn * spk + c * sqk;
                }
            }
        }
    }
    let mut ev: Vec<T> = (0..n).map(|i| s[[i, i]]).collect();
    ev.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    ev
}

#[derive(Debug, Clone, PartialEq)]
pub struct RestrictedSingular<T> {
    pub alpha: T,
    pub worst_support: Vec<usize>,
}

const JACOBI_TOL: f64 = 1e-11;

/// `α = min_{|S| = s} σ_min(A_S)`, the restricted lower bound
/// `‖Ax‖₂ ≥ α‖x‖₂` over `s`-sparse `x`.
pub fn restricted_min_singular<T: Real>(matrix: &Array2<T>, s: usize) -> Result<RestrictedSingular<T>, GeometryError> {
    let d = matrix.ncols();
    if s == 0 || s > d {
        return Err(GeometryError::InvalidParameter(format!("s = {s} must be in 1..={d}")));
    }
    let needed = certification_cost(d, s) / 2f64.powi(s as i32 - 1);
    if needed > LP_BUDGET as f64 {
        return Err(GeometryError::BudgetExceeded { needed, budget: LP_BUDGET });
    }
    let supports = combinations(d, s);
    let values: Vec<T> = supports
        .par_iter()
        .map(|support| {
            let sub = matrix.select(Axis(1), support);
            let gram = Array2::from_shape_fn((s, s), |(i, j)| {
                sub.column(i).iter().zip(sub.column(j)).map(|(&x, &y)| x * y).sum::<T>()
            });
            let lo = symmetric_eigenvalues(gram, T::lit(JACOBI_TOL))[0];
            lo.max(T::zero()).sqrt()
        })
        .collect();
    let (idx, alpha) = values
        .iter()
        .enumerate()
        .fold((0, T::infinity()), |(bi, bv), (i, &v)| if v < bv { (i, v) } else { (bi, bv) });
    Ok(RestrictedSingular { alpha, worst_support: supports[idx].clone() })
}

/// `⌊α²(s−1)/(4β²)⌋ − 1`; values below 1 mean no order is guaranteed.
pub fn lemma16_order<T: Real>(alpha: T, beta: T, s: usize) -> Result<i64, GeometryError> {
    if !(beta > T::zero()) {
        return Err(GeometryError::InvalidParameter(format!("beta = {beta} must be positive")));
    }
    if alpha < T::zero() || s == 0 {
        return Err(GeometryError::InvalidParameter("need alpha >= 0 and s >= 1".into()));
    }
    let x = alpha * alpha * T::from_usize(s - 1).unwrap() / (T::lit(4.0) * beta * beta);
    Ok(x.floor().to_i64().unwrap_or(i64::MAX) - 1)
}

/// Largest column norm of `matrix`.
pub fn max_column_norm<T: Real>(matrix: &Array2<T>) -> T {
    matrix
        .columns()
        .into_iter()
        .map(|c| c.iter().map(|&v| v * v).sum::<T>().sqrt())
        .fold(T::zero(), T::max)
}

/// `‖Γ̃t − Γt̃‖_∞` with `t̃ⱼ = tⱼ / ‖Γeⱼ‖₂`.
pub fn rescaling_identity_check<T: Real>(draw: &EnsembleDraw<T>, normalized: &NormalizedMatrix<T>, t: &[T]) -> T {
    let t_tilde: Vec<T> = t.iter().zip(&normalized.col_norms).map(|(&tj, &n)| tj / n).collect();
    let lhs = mat_vec(&normalized.gamma_tilde, t);
    let rhs = mat_vec(&draw.gamma, &t_tilde);
    lhs.iter().zip(&rhs).map(|(a, b)| (*a - *b).abs()).fold(T::zero(), T::max)
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    fn quick() -> InradiusBudget {
        InradiusBudget { starts: 32, steps: 400, ..Default::default() }
    }

    #[test]
    fn identity_inradius() {
        for m in 2..=4 {
            let r = inradius(&Array2::<f64>::eye(m), &quick()).unwrap();
            assert!((r.radius - 1.0 / (m as f64).sqrt()).abs() < 1e-9, "m = {m}: {}", r.radius);
            let norm: f64 = r.minimizing_direction.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((norm - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn rotated_square_has_radius_one() {
        let r = inradius(&array![[1.0f64, 1.0], [1.0, -1.0]], &quick()).unwrap();
        assert!((r.radius - 1.0).abs() < 1e-9, "{}", r.radius);
    }

    #[test]
    fn scalar_matrix() {
        let r = inradius(&array![[5.0f64]], &quick()).unwrap();
        assert!((r.radius - 5.0).abs() < 1e-12);
    }

    #[test]
    fn zero_matrix_has_zero_radius() {
        let r = inradius(&Array2::<f64>::zeros((3, 4)), &quick()).unwrap();
        assert_eq!(r.radius, 0.0);
        assert_eq!(r.certificate_gap, 0.0);
    }

    #[test]
    fn zero_budget_rejected() {
        let b = InradiusBudget { starts: 0, ..Default::default() };
        assert!(inradius(&Array2::<f64>::eye(2), &b).is_err());
    }

    #[test]
    fn jacobi_matches_closed_form() {
        let s = array![[2.0f64, 1.0], [1.0, 2.0]];
        let ev = symmetric_eigenvalues(s, 1e-14);
        assert!((ev[0] - 1.0).abs() < 1e-12 && (ev[1] - 3.0).abs() < 1e-12);
    }

    #[test]
    fn restricted_singular_examples() {
        let r = restricted_min_singular(&Array2::<f64>::eye(4), 2).unwrap();
        assert!((r.alpha - 1.0).abs() < 1e-12);
        let dup = array![[1.0f64, 0.0, 1.0], [0.0, 1.0, 0.0]];
        let r = restricted_min_singular(&dup, 2).unwrap();
        assert!(r.alpha.abs() < 1e-7);
        assert_eq!(r.worst_support, vec![0, 2]);
    }

    #[test]
    fn order_formula() {
        assert_eq!(lemma16_order(1.0, 1.0, 9).unwrap(), 1);
        assert_eq!(lemma16_order(2.0, 1.0, 6).unwrap(), 4);
        assert_eq!(lemma16_order(3.0, 0.5, 1).unwrap(), -1);
        assert!(lemma16_order(1.0, 0.0, 4).is_err());
    }
}
