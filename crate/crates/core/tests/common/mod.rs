#![allow(dead_code)]

use colnorm::ensemble::gaussian_matrix;
use colnorm::spike::gaussian_even_moment;
use colnorm::SpikeParams64;
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

pub fn pilot() -> Value {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/tests/fixtures/pilot.json");
    serde_json::from_str(&std::fs::read_to_string(path).expect("pilot fixture")).expect("pilot json")
}

pub fn pilot_f64(v: &Value, path: &[&str]) -> f64 {
    path.iter().fold(v, |v, k| &v[*k]).as_f64().unwrap_or_else(|| panic!("missing {path:?}"))
}

/// Tall `m × d` matrix whose columns are orthonormal up to a small Gaussian
/// perturbation, so restricted singular values stay close to 1.
pub fn near_orthonormal(m: usize, d: usize, noise: f64, seed: u64) -> Array2<f64> {
    assert!(m >= d);
    let mut q: Array2<f64> = gaussian_matrix(m, d, seed);
    for j in 0..d {
        for k in 0..j {
            let dot: f64 = q.column(j).dot(&q.column(k));
            let prev = q.column(k).to_owned();
            q.column_mut(j).scaled_add(-dot, &prev);
        }
        let n = q.column(j).dot(&q.column(j)).sqrt();
        q.column_mut(j).mapv_inplace(|v| v / n);
    }
    let g: Array2<f64> = gaussian_matrix(m, d, seed ^ 0x5eed);
    q + g * noise
}

/// `E(Σ tⱼxⱼ)^q` by summing over all `4^d` outcomes of `(ε, η)`.
pub fn brute_force_moment(t: &[f64], delta: f64, r: f64, q: u32) -> f64 {
    let d = t.len();
    let values = [(1.0, (1.0 - delta) / 2.0), (-1.0, (1.0 - delta) / 2.0), (r, delta / 2.0), (-r, delta / 2.0)];
    let mut total = 0.0;
    for code in 0..4usize.pow(d as u32) {
        let mut c = code;
        let mut sum = 0.0;
        let mut prob = 1.0;
        for &tj in t {
            let (x, p) = values[c % 4];
            c /= 4;
            sum += tj * x;
            prob *= p;
        }
        total += prob * sum.powi(q as i32);
    }
    total
}

/// `(δ, R, L)` drawn until the per-coordinate hypothesis holds at every even
/// order up to `q`.
pub fn precondition_inputs(count: usize, q: u32, seed: u64) -> Vec<(Vec<f64>, SpikeParams64, f64)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    while out.len() < count {
        let delta: f64 = rng.gen_range(0.0..0.3);
        let r: f64 = rng.gen_range(1.0..6.0);
        let l = rng.gen_range(1.0..3.0);
        let params = SpikeParams64::new(delta, r).unwrap();
        let ok = (2..=q).step_by(2).all(|k| {
            let lhs = ((1.0 - delta) + delta * r.powi(k as i32)).powf(1.0 / k as f64);
            let rhs = l * gaussian_even_moment::<f64>(k).unwrap().powf(1.0 / k as f64);
            lhs <= rhs * (1.0 - 1e-9)
        });
        if !ok {
            continue;
        }
        let d = rng.gen_range(1..=8);
        let t: Vec<f64> = (0..d).map(|_| rng.gen_range(-1.0..1.0)).collect();
        out.push((t, params, l));
    }
    out
}
