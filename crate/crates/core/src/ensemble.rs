//! Random measurement matrices generated by the spike variable.
//!
//! A draw keeps the latent sign matrix `ε` and indicator matrix `η` next to
//! `Γ`, so the structural events used by the witness construction can be
//! read off exactly instead of being inferred from magnitudes.
//!
//! RNG: every draw seeds a `ChaCha8Rng` with `seed_from_u64(seed)` and
//! consumes entries row by row, columns ascending; each entry takes one
//! `bool` (sign) then one `f64` (spike indicator).

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use thiserror::Error;

use crate::scalar::Real;
use crate::spike::{compose, sample_components, SpikeError, SpikeParams};

#[derive(Debug, Error)]
pub enum EnsembleError {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error(transparent)]
    Spike(#[from] SpikeError),
    #[error("column {0} has zero Euclidean norm")]
    ZeroColumn(usize),
    #[error("malformed matrix dump: {0}")]
    Format(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

/// A sampled `m × d` spike matrix with its latent structure.
#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleDraw<T> {
    pub m: usize,
    pub d: usize,
    pub gamma: Array2<T>,
    pub eps: Array2<i8>,
    pub eta: Array2<u8>,
    pub params: SpikeParams<T>,
    pub seed: u64,
}

/// Samples `Γ = (x_ij)` with `1 ≤ m ≤ d`.
pub fn draw<T: Real>(m: usize, d: usize, params: SpikeParams<T>, seed: u64) -> Result<EnsembleDraw<T>, EnsembleError> {
    if m == 0 || m > d {
        return Err(EnsembleError::InvalidParameter(format!("need 1 <= m <= d, got m = {m}, d = {d}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut gamma = Array2::<T>::zeros((m, d));
    let mut eps = Array2::<i8>::zeros((m, d));
    let mut eta = Array2::<u8>::zeros((m, d));
    for i in 0..m {
        for j in 0..d {
            let (sign, spike) = sample_components(&params, &mut rng);
            eps[[i, j]] = sign;
            eta[[i, j]] = u8::from(spike);
            gamma[[i, j]] = compose(&params, sign, spike);
        }
    }
    Ok(EnsembleDraw { m, d, gamma, eps, eta, params, seed })
}

impl<T: Real> EnsembleDraw<T> {
    /// Checks `Γ = ε ⊙ max(1, ηR)` entrywise.
    pub fn reconstruction_holds(&self) -> bool {
        self.gamma.indexed_iter().all(|((i, j), &g)| {
            g == compose(&self.params, self.eps[[i, j]], self.eta[[i, j]] == 1)
        })
    }

    pub fn spike_count(&self) -> usize {
        self.eta.iter().filter(|&&e| e == 1).count()
    }

    pub fn normalize(&self) -> Result<NormalizedMatrix<T>, EnsembleError> {
        normalize_columns(&self.gamma)
    }

    pub fn is_spike_free(&self, j: usize) -> bool {
        self.eta.column(j).iter().all(|&e| e == 0)
    }
}

/// Dense i.i.d. standard Gaussian matrix, used as a reference ensemble.
pub fn gaussian_matrix<T: Real>(m: usize, d: usize, seed: u64) -> Array2<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Array2::from_shape_simple_fn((m, d), || {
        let g: f64 = StandardNormal.sample(&mut rng);
        T::lit(g)
    })
}

/// Column-normalized matrix `Γ̃` with the norms it was divided by.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalizedMatrix<T> {
    pub gamma_tilde: Array2<T>,
    pub col_norms: Vec<T>,
}

impl<T: Real> NormalizedMatrix<T> {
    /// `Γ̃ · diag(col_norms)`.
    pub fn rescaled(&self) -> Array2<T> {
        let mut out = self.gamma_tilde.clone();
        for (j, mut col) in out.columns_mut().into_iter().enumerate() {
            col.mapv_inplace(|v| v * self.col_norms[j]);
        }
        out
    }
}

/// Divides each column by its Euclidean norm.
pub fn normalize_columns<T: Real>(matrix: &Array2<T>) -> Result<NormalizedMatrix<T>, EnsembleError> {
    let mut gamma_tilde = matrix.clone();
    let mut col_norms = Vec::with_capacity(matrix.ncols());
    for (j, mut col) in gamma_tilde.columns_mut().into_iter().enumerate() {
        let norm = col.iter().map(|&v| v * v).sum::<T>().sqrt();
        if norm.is_zero() {
            return Err(EnsembleError::ZeroColumn(j));
        }
        col.mapv_inplace(|v| v / norm);
        col_norms.push(norm);
    }
    Ok(NormalizedMatrix { gamma_tilde, col_norms })
}

/// Two columns whose only spikes sit in the same row.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct SpikePair {
    pub j1: usize,
    pub j2: usize,
    pub row: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EventFindings {
    pub spike_pair: Option<SpikePair>,
    /// `2m` spike-free columns, the first in column order.
    pub zero_cols: Option<Vec<usize>>,
    pub found_1: bool,
    pub found_2: bool,
}

impl EventFindings {
    pub fn both(&self) -> bool {
        self.found_1 && self.found_2
    }
}

/// Looks for the two structural events in an indicator matrix.
///
/// Event 1: two distinct columns each with exactly one spike, in the same
/// row; the lexicographically smallest `(j1, j2)` is reported. Event 2: at
/// least `2m` spike-free columns other than `j1, j2`.
pub fn detect_events(eta: &Array2<u8>) -> EventFindings {
    let (m, d) = eta.dim();
    let mut per_row: Vec<Vec<usize>> = vec![Vec::new(); m];
    let mut spike_free = Vec::new();
    for j in 0..d {
        let col = eta.column(j);
        let count = col.iter().filter(|&&e| e == 1).count();
        match count {
            0 => spike_free.push(j),
            1 => {
                let row = col.iter().position(|&e| e == 1).expect("one spike");
                per_row[row].push(j);
            }
            _ => {}
        }
    }
    let spike_pair = per_row
        .iter()
        .enumerate()
        .filter(|(_, cols)| cols.len() >= 2)
        .map(|(row, cols)| SpikePair { j1: cols[0], j2: cols[1], row })
        .min_by_key(|p| (p.j1, p.j2));

    let excluded = |j: usize| spike_pair.is_some_and(|p| p.j1 == j || p.j2 == j);
    let candidates: Vec<usize> = spike_free.into_iter().filter(|&j| !excluded(j)).collect();
    let zero_cols = (candidates.len() >= 2 * m).then(|| candidates[..2 * m].to_vec());

    EventFindings {
        found_1: spike_pair.is_some(),
        found_2: zero_cols.is_some(),
        spike_pair,
        zero_cols,
    }
}

/// Per-column probabilities `(E Y, E Z) = (mδ(1−δ)^{m−1}, (1−δ)^m)`: a column
/// has exactly one spike, resp. none.
pub fn event_expectations<T: Real>(m: usize, delta: T) -> (T, T) {
    let mm = T::from_usize(m).unwrap();
    let q = T::one() - delta;
    let exp_y = mm * delta * q.powi(m as i32 - 1);
    let exp_z = q.powi(m as i32);
    (exp_y, exp_z)
}

/// The two sufficient conditions `mδ(1−δ)^{m−1} ≥ 2m/d` and
/// `(1−δ)^m ≥ 4m/d`.
pub fn conditions_hold<T: Real>(m: usize, d: usize, delta: T) -> (bool, bool) {
    let (exp_y, exp_z) = event_expectations(m, delta);
    let mm = T::from_usize(m).unwrap();
    let dd = T::from_usize(d).unwrap();
    (exp_y >= T::lit(2.0) * mm / dd, exp_z >= T::lit(4.0) * mm / dd)
}

/// Exact probabilities of the events reported by [`detect_events`].
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct EventProbabilities {
    pub spike_pair: f64,
    pub zero_columns: f64,
    pub joint: f64,
}

fn ln_pow(base: f64, exp: usize) -> f64 {
    if exp == 0 {
        0.0
    } else {
        exp as f64 * base.ln()
    }
}

/// Columns are i.i.d. and fall into one of: spike-free (`z`), single spike in
/// a given row (`a` each), or several spikes (`o`). Event 1 fails iff every
/// row holds at most one single-spike column, which gives a multinomial sum.
pub fn event_probabilities(m: usize, d: usize, delta: f64) -> EventProbabilities {
    let q = 1.0 - delta;
    let z = q.powi(m as i32);
    let a = delta * q.powi(m as i32 - 1);
    let o = (1.0 - z - m as f64 * a).max(0.0);
    let ln_fact: Vec<f64> = std::iter::once(0.0)
        .chain((1..=d).scan(0.0, |acc, k| {
            *acc += (k as f64).ln();
            Some(*acc)
        }))
        .collect();
    let ln_choose = |n: usize, k: usize| ln_fact[n] - ln_fact[k] - ln_fact[n - k];
    let ln_falling = |n: usize, k: usize| ln_fact[n] - ln_fact[n - k];

    // P(no row has two single-spike columns | `rest` columns, none spike-free)
    // with conditional weights a' = a/(1−z) per row and o' = o/(1−z).
    let no_pair = |rest: usize, single: f64, other: f64| -> f64 {
        (0..=m.min(rest))
            .map(|j| {
                let ln_term = ln_choose(rest, j) + ln_falling(m, j) + ln_pow(single, j) + ln_pow(other, rest - j);
                ln_term.exp()
            })
            .sum()
    };

    let p_no_pair = no_pair(d, a, 1.0 - m as f64 * a);
    let mut p_zero = 0.0;
    let mut p_zero_no_pair = 0.0;
    for k in (2 * m)..=d {
        let ln_pk = ln_choose(d, k) + ln_pow(z, k) + ln_pow(1.0 - z, d - k);
        let pk = ln_pk.exp();
        p_zero += pk;
        if pk > 0.0 {
            let denom = 1.0 - z;
            let inner = if d - k == 0 {
                1.0
            } else if denom <= 0.0 {
                0.0
            } else {
                no_pair(d - k, a / denom, o / denom)
            };
            p_zero_no_pair += pk * inner;
        }
    }
    EventProbabilities {
        spike_pair: (1.0 - p_no_pair).clamp(0.0, 1.0),
        zero_columns: p_zero.clamp(0.0, 1.0),
        joint: (p_zero - p_zero_no_pair).clamp(0.0, 1.0),
    }
}

fn fmt_matrix<T: std::fmt::Display>(out: &mut String, header: &str, rows: impl Iterator<Item = Vec<T>>) {
    out.push_str(header);
    out.push('\n');
    for row in rows {
        let mut first = true;
        for v in row {
            if !first {
                out.push(' ');
            }
            first = false;
            write!(out, "{v}").expect("write to string");
        }
        out.push('\n');
    }
}

/// Text dump of `Γ` and the companion indicator matrix.
///
/// Both start with the header `m d delta R seed`; values use the shortest
/// decimal that round-trips.
pub fn dump_strings<T: Real>(draw: &EnsembleDraw<T>) -> (String, String) {
    let header = format!("{} {} {} {} {}", draw.m, draw.d, draw.params.delta(), draw.params.r(), draw.seed);
    let mut gamma = String::new();
    fmt_matrix(&mut gamma, &header, draw.gamma.rows().into_iter().map(|r| r.to_vec()));
    let mut eta = String::new();
    fmt_matrix(&mut eta, &header, draw.eta.rows().into_iter().map(|r| r.to_vec()));
    (gamma, eta)
}

struct Header<T> {
    m: usize,
    d: usize,
    delta: T,
    r: T,
    seed: u64,
}

fn parse_header<T: Real>(line: Option<&str>) -> Result<Header<T>, EnsembleError> {
    let line = line.ok_or_else(|| EnsembleError::Format("missing header".into()))?;
    let f: Vec<&str> = line.split_whitespace().collect();
    if f.len() != 5 {
        return Err(EnsembleError::Format(format!("header needs 5 fields, got {}", f.len())));
    }
    let bad = |what: &str| EnsembleError::Format(format!("bad {what} in header"));
    Ok(Header {
        m: f[0].parse().map_err(|_| bad("m"))?,
        d: f[1].parse().map_err(|_| bad("d"))?,
        delta: f[2].parse().map_err(|_| bad("delta"))?,
        r: f[3].parse().map_err(|_| bad("R"))?,
        seed: f[4].parse().map_err(|_| bad("seed"))?,
    })
}

fn parse_body<V: std::str::FromStr>(lines: &mut std::str::Lines<'_>, m: usize, d: usize) -> Result<Array2<V>, EnsembleError> {
    let mut data = Vec::with_capacity(m * d);
    for i in 0..m {
        let line = lines.next().ok_or_else(|| EnsembleError::Format(format!("missing row {i}")))?;
        let before = data.len();
        for tok in line.split_whitespace() {
            data.push(tok.parse::<V>().map_err(|_| EnsembleError::Format(format!("bad entry {tok:?} in row {i}")))?);
        }
        if data.len() - before != d {
            return Err(EnsembleError::Format(format!("row {i} has {} entries, expected {d}", data.len() - before)));
        }
    }
    if lines.any(|l| !l.trim().is_empty()) {
        return Err(EnsembleError::Format("trailing data after last row".into()));
    }
    Array2::from_shape_vec((m, d), data).map_err(|e| EnsembleError::Format(e.to_string()))
}

/// Inverse of [`dump_strings`]. Signs are recovered from `Γ`; the
/// reconstruction identity is re-checked.
pub fn parse_dump<T: Real>(gamma_text: &str, eta_text: &str) -> Result<EnsembleDraw<T>, EnsembleError> {
    let mut g_lines = gamma_text.lines();
    let mut e_lines = eta_text.lines();
    let header: Header<T> = parse_header(g_lines.next())?;
    let eta_header: Header<T> = parse_header(e_lines.next())?;
    if (header.m, header.d, header.seed) != (eta_header.m, eta_header.d, eta_header.seed) {
        return Err(EnsembleError::Format("matrix and indicator headers disagree".into()));
    }
    let gamma: Array2<T> = parse_body(&mut g_lines, header.m, header.d)?;
    let eta: Array2<u8> = parse_body(&mut e_lines, header.m, header.d)?;
    if eta.iter().any(|&e| e > 1) {
        return Err(EnsembleError::Format("indicator entries must be 0 or 1".into()));
    }
    let eps = gamma.mapv(|g| if g < T::zero() { -1i8 } else { 1 });
    let params = SpikeParams::new(header.delta, header.r)?;
    let out = EnsembleDraw {
        m: header.m,
        d: header.d,
        gamma,
        eps,
        eta,
        params,
        seed: header.seed,
    };
    if !out.reconstruction_holds() {
        return Err(EnsembleError::Format("matrix entries disagree with indicator matrix".into()));
    }
    Ok(out)
}

/// Companion path: `draw.mat` → `draw.eta`.
pub fn eta_path(path: &Path) -> PathBuf {
    path.with_extension("eta")
}

fn io_err(p: &Path) -> impl Fn(std::io::Error) -> EnsembleError + '_ {
    move |source| EnsembleError::Io { path: p.to_path_buf(), source }
}

pub fn write_dump<T: Real>(draw: &EnsembleDraw<T>, path: &Path) -> Result<(), EnsembleError> {
    let (g, e) = dump_strings(draw);
    fs::write(path, g).map_err(io_err(path))?;
    let ep = eta_path(path);
    fs::write(&ep, e).map_err(io_err(&ep))
}

pub fn read_dump<T: Real>(path: &Path) -> Result<EnsembleDraw<T>, EnsembleError> {
    let g = fs::read_to_string(path).map_err(io_err(path))?;
    let ep = eta_path(path);
    let e = fs::read_to_string(&ep).map_err(io_err(&ep))?;
    parse_dump(&g, &e)
}
