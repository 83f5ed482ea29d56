//! The simplex solver against vertex enumeration, rational arithmetic and
//! random feasible points.

use colnorm::lp::{solve_default, LpInstance, LpStatus};
use colnorm::scalar::LpScalar;
use colnorm::Rational;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Bounded instance: `k` random rows plus `Σx + slack = cap`, `x ≥ 0`.
fn random_instance(rng: &mut ChaCha8Rng, n: usize, k: usize) -> LpInstance<f64> {
    let cols = n + 1;
    let mut a = Array2::<f64>::zeros((k + 1, cols));
    let mut b = vec![0.0; k + 1];
    // A feasible point keeps roughly half the instances feasible.
    let x0: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..2.0)).collect();
    for i in 0..k {
        for j in 0..n {
            a[[i, j]] = rng.gen_range(-3i32..=3) as f64;
        }
        let ax: f64 = (0..n).map(|j| a[[i, j]] * x0[j]).sum();
        b[i] = if rng.gen_bool(0.8) { ax.round() } else { rng.gen_range(-5i32..=5) as f64 };
    }
    for j in 0..cols {
        a[[k, j]] = 1.0;
    }
    b[k] = rng.gen_range(4i32..=12) as f64;
    let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(-4i32..=4) as f64).collect();
    c.push(0.0);
    LpInstance::new(c, a, b)
}

/// Solves the square system by Gaussian elimination; `None` if singular.
fn solve_square(mut m: Vec<Vec<f64>>, mut rhs: Vec<f64>) -> Option<Vec<f64>> {
    let n = rhs.len();
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() < 1e-10 {
            return None;
        }
        m.swap(col, piv);
        rhs.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..n {
                    m[r][c] -= f * m[col][c];
                }
                rhs[r] -= f * rhs[col];
            }
        }
    }
    Some((0..n).map(|i| rhs[i] / m[i][i]).collect())
}

fn combinations(n: usize, k: usize) -> Vec<Vec<usize>> {
    if k == 0 {
        return vec![vec![]];
    }
    if n < k {
        return vec![];
    }
    let mut out = combinations(n - 1, k);
    for mut c in combinations(n - 1, k - 1) {
        c.push(n - 1);
        out.push(c);
    }
    out
}

/// Minimum over basic feasible solutions, trying every row subset of full
/// rank so redundant rows are handled.
fn vertex_enumeration(inst: &LpInstance<f64>) -> Option<f64> {
    let (k, n) = inst.eq_lhs.dim();
    let mut best: Option<f64> = None;
    for rank in (1..=k).rev() {
        for rows in combinations(k, rank) {
            for cols in combinations(n, rank) {
                let m: Vec<Vec<f64>> = rows.iter().map(|&i| cols.iter().map(|&j| inst.eq_lhs[[i, j]]).collect()).collect();
                let rhs: Vec<f64> = rows.iter().map(|&i| inst.eq_rhs[i]).collect();
                let Some(xb) = solve_square(m, rhs) else { continue };
                if xb.iter().any(|&v| v < -1e-9) {
                    continue;
                }
                let mut x = vec![0.0; n];
                for (&j, &v) in cols.iter().zip(&xb) {
                    x[j] = v.max(0.0);
                }
                if inst.residual(&x) > 1e-8 {
                    continue;
                }
                let val = inst.objective_value(&x);
                best = Some(best.map_or(val, |b: f64| b.min(val)));
            }
        }
        if best.is_some() {
            return best;
        }
    }
    // The zero vector is the only candidate when no row subset works.
    let zero = vec![0.0; n];
    (inst.residual(&zero) < 1e-12).then_some(0.0)
}

#[test]
fn matches_vertex_enumeration_on_100_instances() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut optimal = 0;
    for case in 0..100 {
        let n = rng.gen_range(2..=5);
        let k = rng.gen_range(1..=2);
        let inst = random_instance(&mut rng, n, k);
        let res = solve_default(&inst).unwrap();
        match vertex_enumeration(&inst) {
            Some(v) => {
                assert_eq!(res.status, LpStatus::Optimal, "case {case}");
                assert!((res.value - v).abs() <= 1e-8 * (1.0 + v.abs()), "case {case}: {} vs {v}", res.value);
                assert!(inst.residual(&res.point) < 1e-8);
                assert!(res.point.iter().all(|&x| x >= 0.0));
                optimal += 1;
            }
            None => assert_eq!(res.status, LpStatus::Infeasible, "case {case}"),
        }
    }
    assert!(optimal >= 50, "only {optimal} feasible instances");
}

#[test]
fn rational_solver_agrees_with_float() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for _ in 0..40 {
        let n = rng.gen_range(2..=6);
        let inst = random_instance(&mut rng, n, 3);
        let exact = LpInstance::new(
            inst.objective.iter().map(LpScalar::to_rational).collect(),
            inst.eq_lhs.mapv(|v| v.to_rational()),
            inst.eq_rhs.iter().map(LpScalar::to_rational).collect(),
        );
        let rf = solve_default(&inst).unwrap();
        let rq = solve_default::<Rational>(&exact).unwrap();
        assert_eq!(rf.status, rq.status);
        if rq.is_optimal() {
            assert!((rf.value - rq.value.as_f64()).abs() < 1e-8);
            assert_eq!(exact.residual(&rq.point), 0.0);
        }
    }
}

#[test]
fn f32_solver_agrees_with_f64() {
    let mut rng = ChaCha8Rng::seed_from_u64(13);
    for _ in 0..40 {
        let inst = random_instance(&mut rng, 4, 2);
        let single = LpInstance::new(
            inst.objective.iter().map(|&v| v as f32).collect(),
            inst.eq_lhs.mapv(|v| v as f32),
            inst.eq_rhs.iter().map(|&v| v as f32).collect(),
        );
        let r64 = solve_default(&inst).unwrap();
        let r32 = solve_default(&single).unwrap();
        assert_eq!(r64.status, r32.status);
        if r64.is_optimal() {
            assert!((r64.value - r32.value as f64).abs() < 1e-3 * (1.0 + r64.value.abs()));
        }
    }
}

#[test]
fn solve_is_deterministic() {
    let mut rng = ChaCha8Rng::seed_from_u64(14);
    let inst = random_instance(&mut rng, 6, 3);
    assert_eq!(solve_default(&inst).unwrap(), solve_default(&inst).unwrap());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    /// No feasible point beats the reported optimum: `b` is built from a
    /// random nonnegative `x0`, so `x0` is feasible by construction.
    #[test]
    fn optimum_bounds_feasible_points(
        x0 in prop::collection::vec(0.0f64..3.0, 5),
        a in prop::collection::vec(-3i32..=3, 15),
        c in prop::collection::vec(-4i32..=4, 5),
    ) {
        let lhs = Array2::from_shape_fn((3, 5), |(i, j)| a[i * 5 + j] as f64);
        // Bound the region so the optimum is finite.
        let mut full = Array2::zeros((4, 6));
        full.slice_mut(ndarray::s![..3, ..5]).assign(&lhs);
        full.row_mut(3).fill(1.0);
        let cap = x0.iter().sum::<f64>() + 1.0;
        let mut x = x0.clone();
        x.push(1.0);
        let mut b: Vec<f64> = (0..3).map(|i| (0..5).map(|j| lhs[[i, j]] * x0[j]).sum()).collect();
        b.push(cap);
        let mut cost: Vec<f64> = c.iter().map(|&v| v as f64).collect();
        cost.push(0.0);
        let inst = LpInstance::new(cost, full, b);
        let res = solve_default(&inst).unwrap();
        prop_assert_eq!(res.status, LpStatus::Optimal);
        prop_assert!(res.value <= inst.objective_value(&x) + 1e-8);
        prop_assert!(inst.residual(&res.point) < 1e-8);
    }

    /// Duplicating a row never changes the optimum.
    #[test]
    fn duplicated_rows_are_harmless(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let inst = random_instance(&mut rng, 4, 2);
        let k = inst.eq_lhs.nrows();
        let mut a = Array2::zeros((k + 1, inst.n_vars()));
        a.slice_mut(ndarray::s![..k, ..]).assign(&inst.eq_lhs);
        a.row_mut(k).assign(&inst.eq_lhs.row(0).mapv(|v| 2.0 * v));
        let mut b = inst.eq_rhs.clone();
        b.push(2.0 * inst.eq_rhs[0]);
        let dup = LpInstance::new(inst.objective.clone(), a, b);
        let r1 = solve_default(&inst).unwrap();
        let r2 = solve_default(&dup).unwrap();
        prop_assert_eq!(r1.status, r2.status);
        if r1.is_optimal() {
            prop_assert!((r1.value - r2.value).abs() < 1e-8);
        }
    }
}
