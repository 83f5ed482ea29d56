//! Dense two-phase simplex solver.
//!
//! Solves `min cᵀx` subject to `A x = b` and per-variable bounds (either side
//! may be infinite). Pivoting follows the smallest-index rule on both the
//! entering and the leaving variable, so the solver never cycles and a given
//! instance always takes the same pivot sequence. The solver is generic over
//! [`LpScalar`]; instantiating it with [`Rational`](crate::Rational) gives an
//! exact solver with all tolerances equal to zero.

use ndarray::Array2;
use thiserror::Error;

use crate::scalar::LpScalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LpError {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("non-finite coefficient in {0}")]
    NonFinite(&'static str),
    #[error("simplex did not terminate within {limit} pivots (phase {phase})")]
    IterationLimit { phase: u8, limit: usize },
    #[error("optimal point violates equality constraints by {residual:e}")]
    Residual { residual: f64 },
}

/// A linear program in equality form with variable bounds.
///
/// `None` in `lower` / `upper` means −∞ / +∞.
#[derive(Debug, Clone, PartialEq)]
pub struct LpInstance<T> {
    pub objective: Vec<T>,
    pub eq_lhs: Array2<T>,
    pub eq_rhs: Vec<T>,
    pub lower: Vec<Option<T>>,
    pub upper: Vec<Option<T>>,
}

impl<T: LpScalar> LpInstance<T> {
    /// Builds an instance with every variable constrained to `x ≥ 0`.
    pub fn new(objective: Vec<T>, eq_lhs: Array2<T>, eq_rhs: Vec<T>) -> Self {
        let n = objective.len();
        Self {
            objective,
            eq_lhs,
            eq_rhs,
            lower: vec![Some(T::zero()); n],
            upper: vec![None; n],
        }
    }

    pub fn with_bounds(mut self, j: usize, lower: Option<T>, upper: Option<T>) -> Self {
        self.lower[j] = lower;
        self.upper[j] = upper;
        self
    }

    pub fn free(self, j: usize) -> Self {
        self.with_bounds(j, None, None)
    }

    pub fn n_vars(&self) -> usize {
        self.objective.len()
    }

    pub fn n_rows(&self) -> usize {
        self.eq_rhs.len()
    }

    fn validate(&self) -> Result<(), LpError> {
        let n = self.n_vars();
        if self.eq_lhs.ncols() != n && self.eq_lhs.nrows() > 0 {
            return Err(LpError::Dimension(format!(
                "{} objective coefficients but {} matrix columns",
                n,
                self.eq_lhs.ncols()
            )));
        }
        if self.eq_lhs.nrows() != self.eq_rhs.len() {
            return Err(LpError::Dimension(format!(
                "{} matrix rows but {} right-hand sides",
                self.eq_lhs.nrows(),
                self.eq_rhs.len()
            )));
        }
        if self.lower.len() != n || self.upper.len() != n {
            return Err(LpError::Dimension("bounds length".into()));
        }
        let finite = |x: &T| x.as_f64().is_finite() || T::EXACT;
        if !self.objective.iter().all(finite) {
            return Err(LpError::NonFinite("objective"));
        }
        if !self.eq_lhs.iter().all(finite) {
            return Err(LpError::NonFinite("constraint matrix"));
        }
        if !self.eq_rhs.iter().all(finite) {
            return Err(LpError::NonFinite("right-hand side"));
        }
        let bounds_ok = self
            .lower
            .iter()
            .chain(self.upper.iter())
            .all(|b| b.as_ref().map_or(true, finite));
        if !bounds_ok {
            return Err(LpError::NonFinite("bounds"));
        }
        Ok(())
    }

    /// `‖A x − b‖_∞` in `f64`.
    pub fn residual(&self, x: &[T]) -> f64 {
        self.eq_lhs
            .rows()
            .into_iter()
            .zip(&self.eq_rhs)
            .map(|(row, b)| {
                let ax = row
                    .iter()
                    .zip(x)
                    .fold(T::zero(), |acc, (a, xj)| acc + a.clone() * xj.clone());
                (ax - b.clone()).abs().as_f64()
            })
            .fold(0.0, f64::max)
    }

    pub fn objective_value(&self, x: &[T]) -> T {
        self.objective
            .iter()
            .zip(x)
            .fold(T::zero(), |acc, (c, xj)| acc + c.clone() * xj.clone())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpTolerances<T> {
    pub feasibility: T,
    pub optimality: T,
    pub pivot: T,
    /// Pivot budget per phase is `max_iter_factor · (n + k)` on the
    /// standard-form problem.
    pub max_iter_factor: usize,
}

impl<T: LpScalar> Default for LpTolerances<T> {
    fn default() -> Self {
        Self {
            feasibility: T::of_f64(T::default_tolerance()),
            optimality: T::of_f64(T::default_tolerance()),
            pivot: T::of_f64(T::default_pivot_tolerance()),
            max_iter_factor: 50,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LpStatus {
    Optimal,
    Infeasible,
    Unbounded,
}

/// Solver output.
///
/// For `Optimal`, `point` is an optimal vertex and `value = cᵀpoint`. For
/// `Unbounded`, `point` is the last feasible vertex visited and `ray` a
/// direction along which the objective decreases without bound. For
/// `Infeasible`, `point` is empty.
#[derive(Debug, Clone, PartialEq)]
pub struct LpResult<T> {
    pub status: LpStatus,
    pub value: T,
    pub point: Vec<T>,
    /// Set when some nonbasic variable has zero reduced cost at the optimum,
    /// which is necessary for the optimum to be non-unique.
    pub dual_degenerate: bool,
    pub ray: Option<Vec<T>>,
    pub pivots: usize,
}

impl<T> LpResult<T> {
    pub fn is_optimal(&self) -> bool {
        self.status == LpStatus::Optimal
    }
}

/// How an original variable is expressed through nonnegative standard-form
/// columns.
#[derive(Debug, Clone)]
enum VarMap<T> {
    /// `x = lower + x'`
    Shift { col: usize, lower: T },
    /// `x = upper − x'`
    Reflect { col: usize, upper: T },
    /// `x = x⁺ − x⁻`
    Split { pos: usize, neg: usize },
}

struct StandardForm<T> {
    a: Vec<Vec<T>>,
    b: Vec<T>,
    c: Vec<T>,
    maps: Vec<VarMap<T>>,
    /// `mirror[col]` is the other half of a split free variable.
    mirror: Vec<Option<usize>>,
}

fn to_standard_form<T: LpScalar>(inst: &LpInstance<T>) -> Result<StandardForm<T>, LpStatus> {
    let n = inst.n_vars();
    let k = inst.n_rows();
    let mut maps = Vec::with_capacity(n);
    let mut ncols = 0usize;
    let mut mirror = Vec::new();
    let mut upper_rows: Vec<(usize, T)> = Vec::new();

    for j in 0..n {
        match (&inst.lower[j], &inst.upper[j]) {
            (Some(l), up) => {
                if let Some(u) = up {
                    if u < l {
                        return Err(LpStatus::Infeasible);
                    }
                    upper_rows.push((ncols, u.clone() - l.clone()));
                }
                maps.push(VarMap::Shift { col: ncols, lower: l.clone() });
                mirror.push(None);
                ncols += 1;
            }
            (None, Some(u)) => {
                maps.push(VarMap::Reflect { col: ncols, upper: u.clone() });
                mirror.push(None);
                ncols += 1;
            }
            (None, None) => {
                maps.push(VarMap::Split { pos: ncols, neg: ncols + 1 });
                mirror.push(Some(ncols + 1));
                mirror.push(Some(ncols));
                ncols += 2;
            }
        }
    }
    let n_slack = upper_rows.len();
    let total = ncols + n_slack;
    mirror.resize(total, None);

    let mut a = vec![vec![T::zero(); total]; k + n_slack];
    let mut b: Vec<T> = inst.eq_rhs.clone();
    let mut c = vec![T::zero(); total];

    for (j, map) in maps.iter().enumerate() {
        let cj = inst.objective[j].clone();
        match map {
            VarMap::Shift { col, lower } => {
                c[*col] = cj;
                for i in 0..k {
                    let aij = inst.eq_lhs[[i, j]].clone();
                    if !lower.is_zero() {
                        b[i] = b[i].clone() - aij.clone() * lower.clone();
                    }
                    a[i][*col] = aij;
                }
            }
            VarMap::Reflect { col, upper } => {
                c[*col] = -cj;
                for i in 0..k {
                    let aij = inst.eq_lhs[[i, j]].clone();
                    b[i] = b[i].clone() - aij.clone() * upper.clone();
                    a[i][*col] = -aij;
                }
            }
            VarMap::Split { pos, neg } => {
                c[*pos] = cj.clone();
                c[*neg] = -cj;
                for i in 0..k {
                    let aij = inst.eq_lhs[[i, j]].clone();
                    a[i][*pos] = aij.clone();
                    a[i][*neg] = -aij;
                }
            }
        }
    }
    for (r, (col, width)) in upper_rows.into_iter().enumerate() {
        a[k + r][col] = T::one();
        a[k + r][ncols + r] = T::one();
        b.push(width);
    }

    Ok(StandardForm { a, b, c, maps, mirror })
}

/// Dense tableau: `rows` constraint rows plus one reduced-cost row, each of
/// width `cols + 1` (last entry is the right-hand side).
struct Tableau<T> {
    rows: usize,
    width: usize,
    data: Vec<T>,
    cost: Vec<T>,
    basis: Vec<usize>,
    /// Initial tableau rows, for refactoring in floating point.
    orig: Vec<T>,
    orig_rows: usize,
    /// Cost vector of the current phase (width entries, rhs slot zero).
    phase_cost: Vec<T>,
}

/// Pivots between refactorizations of a floating-point tableau.
const REINVERT_EVERY: usize = 64;
/// Consecutive degenerate pivots after which pricing falls back to the
/// smallest-index rule until the objective moves again.
const DEGENERATE_STREAK: usize = 8;

impl<T: LpScalar> Tableau<T> {
    fn at(&self, i: usize, j: usize) -> &T {
        &self.data[i * self.width + j]
    }

    fn rhs(&self, i: usize) -> &T {
        self.at(i, self.width - 1)
    }

    fn pivot(&mut self, r: usize, q: usize) {
        let w = self.width;
        let p = self.data[r * w + q].clone();
        for j in 0..w {
            let v = self.data[r * w + j].clone();
            if !v.is_zero() {
                self.data[r * w + j] = v / p.clone();
            }
        }
        self.data[r * w + q] = T::one();
        let pivot_row: Vec<T> = self.data[r * w..(r + 1) * w].to_vec();

        let eliminate = |row: &mut [T]| {
            let f = row[q].clone();
            if f.is_zero() {
                return;
            }
            for (x, pv) in row.iter_mut().zip(&pivot_row) {
                if !pv.is_zero() {
                    *x = (x.clone() - f.clone() * pv.clone()).clean();
                }
            }
            row[q] = T::zero();
        };
        for i in 0..self.rows {
            if i != r {
                eliminate(&mut self.data[i * w..(i + 1) * w]);
            }
        }
        eliminate(&mut self.cost);
        self.basis[r] = q;
    }

    /// Rebuilds the tableau as `B⁻¹·orig` for the current basis, with partial
    /// pivoting over the original rows. Returns false (leaving the tableau
    /// untouched) if the basis looks singular.
    fn reinvert(&mut self, pivot_tol: &T) -> bool {
        let w = self.width;
        let mut m = self.orig.clone();
        let mut used = vec![false; self.orig_rows];
        let mut order = Vec::with_capacity(self.basis.len());
        for &q in &self.basis {
            let mut best: Option<(usize, T)> = None;
            for r in (0..self.orig_rows).filter(|&r| !used[r]) {
                let v = m[r * w + q].abs();
                if best.as_ref().map_or(true, |(_, b)| v > *b) {
                    best = Some((r, v));
                }
            }
            let Some((r, mag)) = best else { return false };
            if mag <= *pivot_tol {
                return false;
            }
            let p = m[r * w + q].clone();
            for j in 0..w {
                m[r * w + j] = m[r * w + j].clone() / p.clone();
            }
            m[r * w + q] = T::one();
            for i in (0..self.orig_rows).filter(|&i| i != r) {
                let f = m[i * w + q].clone();
                if f.is_zero() {
                    continue;
                }
                for j in 0..w {
                    let pv = m[r * w + j].clone();
                    if !pv.is_zero() {
                        m[i * w + j] = (m[i * w + j].clone() - f.clone() * pv).clean();
                    }
                }
                m[i * w + q] = T::zero();
            }
            used[r] = true;
            order.push(r);
        }
        self.data = order.iter().flat_map(|&r| m[r * w..(r + 1) * w].iter().cloned()).collect();
        self.reset_cost();
        true
    }

    /// Reduced costs of `phase_cost` for the current basis.
    fn reset_cost(&mut self) {
        let w = self.width;
        let mut cost = self.phase_cost.clone();
        for i in 0..self.rows {
            let cb = self.phase_cost[self.basis[i]].clone();
            if cb.is_zero() {
                continue;
            }
            for j in 0..w {
                let v = self.at(i, j).clone();
                if !v.is_zero() {
                    cost[j] = cost[j].clone() - cb.clone() * v;
                }
            }
        }
        self.cost = cost;
    }

    fn remove_row(&mut self, r: usize) {
        let w = self.width;
        self.data.drain(r * w..(r + 1) * w);
        self.basis.remove(r);
        self.rows -= 1;
    }

    /// Runs the simplex method until optimal or unbounded. Columns with
    /// `allowed[j] == false` never enter. Returns the entering column on
    /// unboundedness.
    ///
    /// Entering columns follow the most negative reduced cost; after a run of
    /// degenerate pivots the smallest-index rule takes over until the next
    /// nondegenerate pivot, which rules out cycling. Leaving-row ties go to
    /// the smallest basic index in both modes.
    fn run(
        &mut self,
        allowed: &[bool],
        tol: &LpTolerances<T>,
        limit: usize,
        phase: u8,
        pivots: &mut usize,
    ) -> Result<Option<usize>, LpError> {
        let neg_opt = -tol.optimality.clone();
        let mut local = 0usize;
        let mut since_reinvert = 0usize;
        let mut streak = 0usize;
        loop {
            if phase == 1 && -self.cost[self.width - 1].clone() <= tol.feasibility {
                return Ok(None);
            }
            let entering = if streak >= DEGENERATE_STREAK {
                (0..self.width - 1).find(|&j| allowed[j] && self.cost[j] < neg_opt)
            } else {
                let mut best: Option<usize> = None;
                for j in (0..self.width - 1).filter(|&j| allowed[j] && self.cost[j] < neg_opt) {
                    if best.map_or(true, |b| self.cost[j] < self.cost[b]) {
                        best = Some(j);
                    }
                }
                best
            };
            let Some(q) = entering else {
                if !T::EXACT && phase == 2 && since_reinvert > 0 && self.reinvert(&tol.pivot) {
                    since_reinvert = 0;
                    continue;
                }
                return Ok(None);
            };
            let mut leave: Option<(usize, T)> = None;
            for i in 0..self.rows {
                let a = self.at(i, q);
                if *a <= tol.pivot {
                    continue;
                }
                let ratio = self.rhs(i).clone() / a.clone();
                leave = match leave {
                    None => Some((i, ratio)),
                    Some((bi, best)) => {
                        let diff = ratio.clone() - best.clone();
                        if diff < -tol.feasibility.clone() {
                            Some((i, ratio))
                        } else if diff <= tol.feasibility && self.basis[i] < self.basis[bi] {
                            Some((i, ratio))
                        } else {
                            Some((bi, best))
                        }
                    }
                };
            }
            let Some((r, step)) = leave else {
                if !T::EXACT && since_reinvert > 0 && self.reinvert(&tol.pivot) {
                    since_reinvert = 0;
                    continue;
                }
                return Ok(Some(q));
            };
            if step <= tol.feasibility {
                streak += 1;
            } else {
                streak = 0;
            }
            self.pivot(r, q);
            *pivots += 1;
            local += 1;
            since_reinvert += 1;
            if !T::EXACT && since_reinvert >= REINVERT_EVERY && self.reinvert(&tol.pivot) {
                since_reinvert = 0;
            }
            if local > limit {
                return Err(LpError::IterationLimit { phase, limit });
            }
        }
    }
}

/// Solves `inst` with the given tolerances.
pub fn solve<T: LpScalar>(inst: &LpInstance<T>, tol: &LpTolerances<T>) -> Result<LpResult<T>, LpError> {
    inst.validate()?;
    let n = inst.n_vars();
    let infeasible = LpResult {
        status: LpStatus::Infeasible,
        value: T::zero(),
        point: Vec::new(),
        dual_degenerate: false,
        ray: None,
        pivots: 0,
    };

    let sf = match to_standard_form(inst) {
        Ok(sf) => sf,
        Err(_) => return Ok(infeasible),
    };
    let rows = sf.b.len();
    let ncols = sf.c.len();
    let width = ncols + rows + 1;
    let limit = tol.max_iter_factor.max(1) * (ncols + rows).max(1);

    let mut data = vec![T::zero(); rows * width];
    let mut b_scale = 0.0f64;
    for i in 0..rows {
        let flip = sf.b[i] < T::zero();
        for j in 0..ncols {
            let v = sf.a[i][j].clone();
            data[i * width + j] = if flip { -v } else { v };
        }
        data[i * width + ncols + i] = T::one();
        let bi = if flip { -sf.b[i].clone() } else { sf.b[i].clone() };
        b_scale = b_scale.max(bi.as_f64().abs());
        data[i * width + width - 1] = bi;
    }

    // Crash basis: a column that is a positive multiple of a unit vector
    // starts basic in its row instead of the artificial.
    let mut basis: Vec<usize> = (ncols..ncols + rows).collect();
    let mut taken = vec![false; ncols];
    for (i, slot) in basis.iter_mut().enumerate() {
        let unit = (0..ncols).find(|&j| {
            !taken[j] && data[i * width + j] > T::zero() && (0..rows).all(|r| r == i || data[r * width + j].is_zero())
        });
        if let Some(j) = unit {
            let p = data[i * width + j].clone();
            for v in &mut data[i * width..(i + 1) * width] {
                *v = v.clone() / p.clone();
            }
            data[i * width + j] = T::one();
            taken[j] = true;
            *slot = j;
        }
    }

    // Phase 1: minimize the sum of artificials.
    let mut phase_cost = vec![T::zero(); width];
    for c in &mut phase_cost[ncols..ncols + rows] {
        *c = T::one();
    }
    let mut tab = Tableau {
        rows,
        width,
        orig: data.clone(),
        data,
        cost: Vec::new(),
        basis,
        orig_rows: rows,
        phase_cost,
    };
    tab.reset_cost();
    let mut pivots = 0usize;
    let all_allowed: Vec<bool> = (0..width - 1).map(|j| j < ncols).collect();
    let phase1_allowed: Vec<bool> = vec![true; width - 1];
    tab.run(&phase1_allowed, tol, limit, 1, &mut pivots)?;

    let infeas = -tab.cost[width - 1].clone();
    let feas_scale = T::of_f64(1.0 + b_scale);
    if infeas > tol.feasibility.clone() * feas_scale {
        return Ok(LpResult { pivots, ..infeasible });
    }

    // Drive artificials out of the basis; rows where that is impossible are
    // redundant and dropped.
    let mut r = 0;
    while r < tab.rows {
        if tab.basis[r] >= ncols {
            let mut replacement: Option<(usize, T)> = None;
            for j in 0..ncols {
                let v = tab.at(r, j).abs();
                if v > tol.pivot && replacement.as_ref().map_or(true, |(_, b)| v > *b) {
                    replacement = Some((j, v));
                }
            }
            match replacement {
                Some((j, _)) => {
                    tab.pivot(r, j);
                    pivots += 1;
                    r += 1;
                }
                None => tab.remove_row(r),
            }
        } else {
            r += 1;
        }
    }

    // Phase 2 reduced costs.
    let mut phase_cost = vec![T::zero(); width];
    phase_cost[..ncols].clone_from_slice(&sf.c);
    tab.phase_cost = phase_cost;
    if T::EXACT || !tab.reinvert(&tol.pivot) {
        tab.reset_cost();
    }
    let unbounded_col = tab.run(&all_allowed, tol, limit, 2, &mut pivots)?;

    let mut x_std = vec![T::zero(); ncols];
    for i in 0..tab.rows {
        let v = tab.rhs(i).clone();
        x_std[tab.basis[i]] = if !T::EXACT && v < T::zero() { T::zero() } else { v };
    }
    let point = map_back(&sf.maps, &x_std, n, true);
    let value = inst.objective_value(&point);

    if let Some(q) = unbounded_col {
        let mut d_std = vec![T::zero(); ncols];
        d_std[q] = T::one();
        for i in 0..tab.rows {
            d_std[tab.basis[i]] = -tab.at(i, q).clone();
        }
        let ray = map_back(&sf.maps, &d_std, n, false);
        return Ok(LpResult {
            status: LpStatus::Unbounded,
            value,
            point,
            dual_degenerate: false,
            ray: Some(ray),
            pivots,
        });
    }

    // Basic values may sit up to the ratio-test tolerance below zero before
    // clipping, so the check allows a small multiple of it, relative to the
    // size of the terms in each row.
    let residual = inst.residual(&point);
    let term_scale = inst
        .eq_lhs
        .rows()
        .into_iter()
        .map(|row| row.iter().zip(&point).map(|(a, x)| (a.as_f64() * x.as_f64()).abs()).sum::<f64>())
        .fold(0.0, f64::max);
    let inst_scale = 1.0 + term_scale + inst.eq_rhs.iter().map(|v| v.as_f64().abs()).fold(0.0, f64::max);
    if !T::EXACT && residual > 10.0 * tol.feasibility.as_f64() * inst_scale {
        return Err(LpError::Residual { residual });
    }

    let mut in_basis = vec![false; ncols];
    for &bcol in &tab.basis {
        in_basis[bcol] = true;
    }
    let dual_degenerate = (0..ncols).any(|j| {
        !in_basis[j]
            && sf.mirror[j].map_or(true, |m| !in_basis[m])
            && tab.cost[j].abs() <= tol.optimality
    });

    Ok(LpResult {
        status: LpStatus::Optimal,
        value,
        point,
        dual_degenerate,
        ray: None,
        pivots,
    })
}

/// Solves with default tolerances for `T`.
pub fn solve_default<T: LpScalar>(inst: &LpInstance<T>) -> Result<LpResult<T>, LpError> {
    solve(inst, &LpTolerances::default())
}

fn map_back<T: LpScalar>(maps: &[VarMap<T>], x_std: &[T], n: usize, with_offset: bool) -> Vec<T> {
    let mut x = Vec::with_capacity(n);
    for map in maps {
        let v = match map {
            VarMap::Shift { col, lower } => {
                if with_offset {
                    lower.clone() + x_std[*col].clone()
                } else {
                    x_std[*col].clone()
                }
            }
            VarMap::Reflect { col, upper } => {
                if with_offset {
                    upper.clone() - x_std[*col].clone()
                } else {
                    -x_std[*col].clone()
                }
            }
            VarMap::Split { pos, neg } => x_std[*pos].clone() - x_std[*neg].clone(),
        };
        x.push(v);
    }
    x
}
