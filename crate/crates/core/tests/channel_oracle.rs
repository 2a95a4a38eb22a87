//! Frequency-domain model against the sampled time-domain oracle.

use num_complex::Complex64;
use ofdmradar::channel::{
    apply_channel_time, delay_steering, model_received_frame_fd, phi_apply, DopplerModel, TargetDerived,
};
use ofdmradar::config::{derive_params, DerivedParams, OfdmConfig};
use ofdmradar::grid::ComplexGrid;
use ofdmradar::rxproc::demodulate;
use ofdmradar::waveform::{generate_data_frame, synthesize_time_signal, SymbolFrame};
use proptest::prelude::*;
use std::f64::consts::PI;

fn cfg(n: usize, ncp: usize, m: usize) -> (OfdmConfig, DerivedParams) {
    let cfg = OfdmConfig {
        subcarriers: n,
        cp_length: ncp,
        symbols: m,
        ..OfdmConfig::desk_scale()
    };
    let p = derive_params(&cfg).unwrap();
    (cfg, p)
}

fn oracle_frame(cfg: &OfdmConfig, frame: &SymbolFrame, targets: &[TargetDerived], cols: usize) -> ComplexGrid {
    let tx = synthesize_time_signal(frame, cfg).unwrap();
    let rx = apply_channel_time(&tx, targets, cfg.tx_power_w, 0.0, 0).unwrap();
    demodulate(&rx, 0, cols).unwrap()
}

fn rel_err(a: &ComplexGrid, b: &ComplexGrid) -> f64 {
    a.max_abs_diff(b) / b.max_abs()
}

/// Dense Φ from its entrywise definition: φ_{p,k} = (1/N) Σ_{i=i0}^{N−1} e^{j2π(k−p)i/N}.
fn phi_dense(n: usize, i0: usize) -> Vec<Vec<Complex64>> {
    (0..n)
        .map(|p| {
            (0..n)
                .map(|k| {
                    (i0..n)
                        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * (k as f64 - p as f64) * i as f64 / n as f64))
                        .sum::<Complex64>()
                        / n as f64
                })
                .collect()
        })
        .collect()
}

#[test]
fn phi_apply_matches_dense_matrix_exhaustively() {
    let mut worst: f64 = 0.0;
    for n in [2usize, 3, 5, 8, 13, 16, 31, 32, 48, 64] {
        for ncp in [0usize, 1, n / 4, n / 2, n - 1].into_iter().filter(|&c| c < n) {
            for nh in 0..=(n + ncp) {
                let v: Vec<Complex64> = (0..n)
                    .map(|k| Complex64::new((0.7 * k as f64).sin(), (1.3 * k as f64 + nh as f64).cos()))
                    .collect();
                let got = phi_apply(nh as f64, ncp, &v);
                if nh <= ncp {
                    assert!(got.iter().all(|x| x.norm() == 0.0));
                    continue;
                }
                let dense = phi_dense(n, nh - ncp);
                for p in 0..n {
                    let want: Complex64 = (0..n).map(|k| dense[p][k] * v[k]).sum();
                    worst = worst.max((got[p] - want).norm());
                }
                // Diagonal equals the captured fraction (N − N_h + N_cp)/N.
                let diag = dense[0][0].re;
                assert!((diag - (n + ncp - nh) as f64 / n as f64).abs() < 1e-12);
            }
        }
    }
    assert!(worst < 1e-10, "worst {worst}");
}

#[test]
fn in_cp_integer_delay_shows_phase_ramp() {
    let (cfg, p) = cfg(64, 16, 4);
    let frame = generate_data_frame(&cfg, 2, false);
    let a = Complex64::new(cfg.tx_power_w.sqrt(), 0.0);
    let t = TargetDerived::new(5.0 * p.sample_period, 0.0, a, &p);
    let y = oracle_frame(&cfg, &frame, &[t], 4);
    for m in 0..4 {
        for k in 0..64 {
            let want = a * frame.data.get(k, m) * Complex64::from_polar(1.0, -2.0 * PI * (5 * k) as f64 / 64.0);
            assert!((y.get(k, m) - want).norm() < 1e-9 * a.norm());
        }
    }
}

#[test]
fn model_matches_oracle_one_and_a_half_cp() {
    let (cfg, p) = cfg(64, 16, 8);
    let frame = generate_data_frame(&cfg, 4, false);
    let t = TargetDerived::new(24.0 * p.sample_period, 0.0, Complex64::from_polar(0.3, 0.4), &p);
    let y = oracle_frame(&cfg, &frame, &[t], 8);
    let model = model_received_frame_fd(&frame, &[t], &p, DopplerModel::PerSymbol, 8).unwrap();
    assert!(rel_err(&model, &y) < 1e-9);
    // The first symbol has no predecessor, so its window holds zeros before the echo.
    assert!(model.col(0).iter().any(|v| v.norm() > 0.0));
}

/// Literal forms built from the printed Φ: `free + Φ(prev)J + Φ(free)` and
/// `free + Φ(prev)J − Φ(free)`. Both differ from the oracle, while the
/// complement form `free + Φ_c(prev)J − Φ_c(free)` matches.
#[test]
fn chosen_isi_ici_form_is_the_only_one_matching_the_oracle() {
    let (cfg, p) = cfg(64, 16, 6);
    let frame = generate_data_frame(&cfg, 11, false);
    let nh = 37.4;
    let t = TargetDerived::new(nh * p.sample_period, 0.0, Complex64::new(1.0, 0.0), &p);
    let y = oracle_frame(&cfg, &frame, &[t], 6);
    let b = delay_steering(nh, 64);
    let bp = delay_steering(nh - 16.0, 64);
    let build = |variant: u8| {
        let mut g = ComplexGrid::zeros(64, 6);
        for m in 0..6 {
            let free: Vec<Complex64> = (0..64).map(|k| b[k] * frame.data.get(k, m)).collect();
            let prev: Vec<Complex64> = if m == 0 {
                vec![Complex64::new(0.0, 0.0); 64]
            } else {
                (0..64).map(|k| bp[k] * frame.data.get(k, m - 1)).collect()
            };
            let phi_f = phi_apply(nh, 16, &free);
            let phi_p = phi_apply(nh, 16, &prev);
            for k in 0..64 {
                let v = match variant {
                    0 => free[k] + (prev[k] - phi_p[k]) - (free[k] - phi_f[k]),
                    1 => free[k] + phi_p[k] + phi_f[k],
                    _ => free[k] + phi_p[k] - phi_f[k],
                };
                g.set(k, m, v);
            }
        }
        g
    };
    assert!(rel_err(&build(0), &y) < 1e-9);
    assert!(rel_err(&build(1), &y) > 0.1);
    assert!(rel_err(&build(2), &y) > 0.1);
    let model = model_received_frame_fd(&frame, &[t], &p, DopplerModel::PerSymbol, 6).unwrap();
    assert!(rel_err(&model, &build(0)) < 1e-12);
}

#[test]
fn intra_symbol_doppler_model_matches_oracle_for_moving_targets() {
    let (cfg, p) = cfg(64, 16, 8);
    let frame = generate_data_frame(&cfg, 5, true);
    let targets = [
        TargetDerived::new(30.3 * p.sample_period, 0.1 * p.subcarrier_spacing, Complex64::from_polar(1.0, 1.0), &p),
        TargetDerived::new(7.6 * p.sample_period, -0.07 * p.subcarrier_spacing, Complex64::from_polar(0.5, -2.0), &p),
    ];
    let y = oracle_frame(&cfg, &frame, &targets, 9);
    let model = model_received_frame_fd(&frame, &targets, &p, DopplerModel::IntraSymbol, 9).unwrap();
    assert!(rel_err(&model, &y) < 1e-9);
    // Dropping the intra-symbol phase leaves an ICI-sized error, not a numerical one.
    let coarse = model_received_frame_fd(&frame, &targets, &p, DopplerModel::PerSymbol, 9).unwrap();
    let e = rel_err(&coarse, &y);
    assert!(e > 1e-3 && e < 0.5, "{e}");
}

#[test]
fn trailing_column_holds_only_the_spill_of_the_last_symbol() {
    let (cfg, p) = cfg(32, 8, 4);
    let frame = generate_data_frame(&cfg, 6, false);
    let t = TargetDerived::new(20.0 * p.sample_period, 0.0, Complex64::new(1.0, 0.0), &p);
    let y = oracle_frame(&cfg, &frame, &[t], 5);
    let model = model_received_frame_fd(&frame, &[t], &p, DopplerModel::PerSymbol, 5).unwrap();
    assert!(rel_err(&model, &y) < 1e-9);
}

#[test]
fn superposition() {
    let (cfg, p) = cfg(32, 8, 4);
    let frame = generate_data_frame(&cfg, 6, false);
    let a = TargetDerived::new(12.2 * p.sample_period, 300.0, Complex64::new(1.0, 0.5), &p);
    let b = TargetDerived::new(3.0 * p.sample_period, -200.0, Complex64::new(-0.2, 0.1), &p);
    for model in [DopplerModel::PerSymbol, DopplerModel::IntraSymbol] {
        let ab = model_received_frame_fd(&frame, &[a, b], &p, model, 4).unwrap();
        let mut sum = model_received_frame_fd(&frame, &[a], &p, model, 4).unwrap();
        sum += &model_received_frame_fd(&frame, &[b], &p, model, 4).unwrap();
        assert!(ab.max_abs_diff(&sum) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn static_targets_agree_with_oracle(
        n in 8usize..=64,
        cp_frac in 0.0f64..0.9,
        m_half in 1usize..=4,
        frac_delay in 0.0f64..0.999,
        phase in -PI..PI,
        seed in any::<u64>(),
    ) {
        let ncp = ((n as f64) * cp_frac) as usize;
        let m = 2 * m_half;
        let (cfg, p) = cfg(n, ncp, m);
        let frame = generate_data_frame(&cfg, seed, false);
        let nh = frac_delay * (n + ncp) as f64;
        let t = TargetDerived::new(nh * p.sample_period, 0.0, Complex64::from_polar(1.0, phase), &p);
        let y = oracle_frame(&cfg, &frame, &[t], m);
        let model = model_received_frame_fd(&frame, &[t], &p, DopplerModel::PerSymbol, m).unwrap();
        prop_assert!(rel_err(&model, &y) < 1e-9, "N={} Ncp={} Nh={} err={}", n, ncp, nh, rel_err(&model, &y));
    }
}
