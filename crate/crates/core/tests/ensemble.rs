use colnorm::ensemble::{
    detect_events, draw, dump_strings, event_expectations, event_probabilities, eta_path, normalize_columns,
    parse_dump, read_dump, write_dump,
};
use colnorm::{EnsembleDraw64, SpikeParams64};
use ndarray::Array2;
use proptest::prelude::*;

/// Event probabilities by summing over every indicator matrix.
fn enumerate_events(m: usize, d: usize, delta: f64) -> (f64, f64, f64) {
    let cells = m * d;
    let (mut p1, mut p2, mut joint) = (0.0, 0.0, 0.0);
    for code in 0u64..(1 << cells) {
        let eta = Array2::from_shape_fn((m, d), |(i, j)| ((code >> (i * d + j)) & 1) as u8);
        let k = code.count_ones() as i32;
        let prob = delta.powi(k) * (1.0 - delta).powi(cells as i32 - k);
        let ev = detect_events(&eta);
        if ev.found_1 {
            p1 += prob;
        }
        if ev.found_2 {
            p2 += prob;
        }
        if ev.both() {
            joint += prob;
        }
    }
    (p1, p2, joint)
}

#[test]
fn event_probabilities_match_enumeration() {
    for &(m, d) in &[(1, 3), (1, 5), (2, 4), (2, 6), (2, 7), (3, 6)] {
        for &delta in &[0.05, 0.3, 0.6] {
            let (p1, p2, joint) = enumerate_events(m, d, delta);
            let fast = event_probabilities(m, d, delta);
            assert!((fast.spike_pair - p1).abs() < 1e-12, "m={m} d={d} δ={delta}: {} vs {p1}", fast.spike_pair);
            assert!((fast.zero_columns - p2).abs() < 1e-12, "m={m} d={d} δ={delta}: {} vs {p2}", fast.zero_columns);
            assert!((fast.joint - joint).abs() < 1e-12, "m={m} d={d} δ={delta}: {} vs {joint}", fast.joint);
        }
    }
}

#[test]
fn spike_frequency_and_sign_balance() {
    let params = SpikeParams64::new(0.1, 3.0).unwrap();
    let dr = draw(50, 400, params, 31).unwrap();
    let n = (50 * 400) as f64;
    let spikes = dr.spike_count() as f64 / n;
    let se = (0.1 * 0.9 / n).sqrt();
    assert!((spikes - 0.1).abs() < 4.0 * se, "{spikes}");
    let positive = dr.eps.iter().filter(|&&e| e > 0).count() as f64 / n;
    assert!((positive - 0.5).abs() < 4.0 * (0.25 / n).sqrt(), "{positive}");
    assert!(dr.reconstruction_holds());
}

#[test]
fn per_column_rates_match_expectations() {
    let params = SpikeParams64::new(0.02, 7.5).unwrap();
    let (ey, ez) = event_expectations(5, 0.02);
    let (mut y, mut z, mut n) = (0usize, 0usize, 0usize);
    for seed in 0..40 {
        let dr = draw(5, 200, params, seed).unwrap();
        for col in dr.eta.columns() {
            match col.iter().filter(|&&e| e == 1).count() {
                0 => z += 1,
                1 => y += 1,
                _ => {}
            }
            n += 1;
        }
    }
    let nf = n as f64;
    assert!((y as f64 / nf - ey).abs() < 4.0 * (ey * (1.0 - ey) / nf).sqrt());
    assert!((z as f64 / nf - ez).abs() < 4.0 * (ez * (1.0 - ez) / nf).sqrt());
}

#[test]
fn draw_is_seed_deterministic() {
    let params = SpikeParams64::new(0.02, 7.5).unwrap();
    let a = draw(5, 200, params, 7).unwrap();
    let b = draw(5, 200, params, 7).unwrap();
    let c = draw(5, 200, params, 8).unwrap();
    assert_eq!(a.gamma, b.gamma);
    assert_eq!(a.eta, b.eta);
    assert_ne!(a.gamma, c.gamma);
}

#[test]
fn dump_round_trip_is_lossless() {
    let params = SpikeParams64::new(0.02, 2.0 * 200f64.powf(0.25)).unwrap();
    let dr = draw(5, 200, params, 3).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("draw.mat");
    write_dump(&dr, &path).unwrap();
    assert!(eta_path(&path).exists());
    let back: EnsembleDraw64 = read_dump(&path).unwrap();
    assert_eq!(back.gamma, dr.gamma);
    assert_eq!(back.eta, dr.eta);
    assert_eq!(back.eps, dr.eps);
    assert_eq!(back.seed, dr.seed);
    assert_eq!(back.params.r().to_bits(), dr.params.r().to_bits());
    assert_eq!(dump_strings(&back), dump_strings(&dr));
}

#[test]
fn missing_dump_reports_path() {
    let err = read_dump::<f64>(std::path::Path::new("/nonexistent/draw.mat")).unwrap_err();
    assert!(err.to_string().contains("/nonexistent/draw.mat"));
}

#[test]
fn corrupted_dump_is_rejected() {
    let params = SpikeParams64::new(0.1, 3.0).unwrap();
    let dr = draw(2, 4, params, 1).unwrap();
    let (g, e) = dump_strings(&dr);
    let truncated: String = g.lines().take(2).collect::<Vec<_>>().join("\n");
    assert!(parse_dump::<f64>(&truncated, &e).is_err());
    assert!(parse_dump::<f64>(&g, "garbage").is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalized_columns_have_unit_norm(seed in any::<u64>(), m in 1usize..8, extra in 0usize..10, delta in 0.0f64..0.5, r in 1.0f64..20.0) {
        let params = SpikeParams64::new(delta, r).unwrap();
        let dr = draw(m, m + extra, params, seed).unwrap();
        let n = dr.normalize().unwrap();
        for col in n.gamma_tilde.columns() {
            let norm = col.iter().map(|v| v * v).sum::<f64>().sqrt();
            prop_assert!((norm - 1.0).abs() < 1e-12);
        }
        let back = n.rescaled();
        for (a, b) in back.iter().zip(dr.gamma.iter()) {
            prop_assert!((a - b).abs() < 1e-12 * b.abs().max(1.0));
        }
    }

    #[test]
    fn events_are_consistent_with_indicators(seed in any::<u64>(), m in 1usize..6, delta in 0.01f64..0.4) {
        let params = SpikeParams64::new(delta, 5.0).unwrap();
        let dr = draw(m, 40, params, seed).unwrap();
        let ev = detect_events(&dr.eta);
        if let Some(p) = ev.spike_pair {
            prop_assert!(p.j1 < p.j2);
            for j in [p.j1, p.j2] {
                let col = dr.eta.column(j);
                prop_assert_eq!(col.iter().filter(|&&e| e == 1).count(), 1);
                prop_assert_eq!(col[p.row], 1);
            }
        }
        if let Some(cols) = &ev.zero_cols {
            prop_assert_eq!(cols.len(), 2 * m);
            for &j in cols {
                prop_assert!(dr.is_spike_free(j));
                prop_assert!(ev.spike_pair.map_or(true, |p| p.j1 != j && p.j2 != j));
            }
        }
    }

    #[test]
    fn normalization_rejects_zero_columns(m in 1usize..5, d in 1usize..5, zero in 0usize..5) {
        let mut a = Array2::<f64>::ones((m, d));
        let z = zero % d;
        a.column_mut(z).fill(0.0);
        prop_assert!(normalize_columns(&a).is_err());
    }
}
