use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use ofdmradar::channel::{apply_channel_time, delay_steering, doppler_steering, target_derived, TargetDerived};
use ofdmradar::config::{derive_params, DerivedParams, OfdmConfig};
use ofdmradar::grid::ComplexGrid;
use ofdmradar::linkbudget::{ideal_snr, thermal_noise_power, TargetSpec};
use ofdmradar::rxproc::{
    demodulate, doppler_shift_columns, equalize_and_window, image_metrics, range_doppler_image, WindowKind,
    WindowSpec,
};
use ofdmradar::units::lin_to_db;
use ofdmradar::waveform::{generate_data_frame, synthesize_time_signal, Modulation, SymbolFrame};

fn setup(n: usize, ncp: usize, m: usize) -> (OfdmConfig, DerivedParams) {
    let cfg = OfdmConfig {
        subcarriers: n,
        cp_length: ncp,
        symbols: m,
        ..OfdmConfig::desk_scale()
    };
    let p = derive_params(&cfg).unwrap();
    (cfg, p)
}

fn random_grid(n: usize, m: usize, seed: u64) -> ComplexGrid {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    ComplexGrid::from_fn(n, m, |_, _| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
}

/// Noiseless equalised channel of one target on the given bins.
fn point_channel(range_bin: f64, doppler_bin: f64, p: &DerivedParams, window: &WindowSpec) -> ComplexGrid {
    let (n, m) = (p.subcarriers, p.symbols);
    let b = delay_steering(range_bin, n);
    let c = doppler_steering(doppler_bin / (m as f64 * p.symbol_duration), m, p.symbol_duration);
    ComplexGrid::from_fn(n, m, |k, j| b[k] * c[j] * window.w_r[k] * window.w_d[j])
}

fn peak(img: &ComplexGrid) -> (usize, usize, f64) {
    let (n, m) = img.shape();
    let mut best = (0, 0, 0.0);
    for d in 0..m {
        for r in 0..n {
            let v = img.get(r, d).norm_sqr();
            if v > best.2 {
                best = (r, d, v);
            }
        }
    }
    best
}

#[test]
fn demodulation_inverts_synthesis() {
    let (cfg, p) = setup(128, 16, 8);
    let frame = generate_data_frame(&cfg, 3, false);
    let tx = synthesize_time_signal(&frame, &cfg).unwrap();
    let y = demodulate(&tx, 0, p.symbols).unwrap();
    let g = cfg.tx_power_w.sqrt();
    for c in 0..p.symbols {
        for r in 0..p.subcarriers {
            assert!((y.get(r, c) - frame.data.get(r, c) * g).norm() < 1e-9 * g);
        }
    }
    assert!(demodulate(&tx, tx.len(), 1).is_err());
}

#[test]
fn window_offset_shifts_apparent_delay_by_whole_cps() {
    let (cfg, p) = setup(64, 16, 4);
    let frame = generate_data_frame(&cfg, 4, true);
    let tx = synthesize_time_signal(&frame, &cfg).unwrap();
    let target = TargetDerived::new(20.0 * p.sample_period, 0.0, Complex64::new(1.0, 0.0), &p);
    let rx = apply_channel_time(&tx, &[target], cfg.tx_power_w, 0.0, 0).unwrap();
    let h = equalize_and_window(&demodulate(&rx, 16, 4).unwrap(), &frame, &WindowSpec::rectangular(64, 4)).unwrap();
    let want = delay_steering(4.0, 64);
    for c in 0..4 {
        for (k, w) in want.iter().enumerate() {
            assert!((h.get(k, c) - w).norm() < 1e-9, "({k}, {c})");
        }
    }
}

#[test]
fn all_ones_frame_and_rectangular_window_leave_y_unchanged() {
    let y = random_grid(32, 8, 1);
    let ones = SymbolFrame {
        data: ComplexGrid::from_fn(32, 8, |_, _| Complex64::new(1.0, 0.0)),
        modulation: Modulation::Qpsk,
        seed: 0,
    };
    assert_eq!(equalize_and_window(&y, &ones, &WindowSpec::rectangular(32, 8)).unwrap(), y);

    let w = WindowSpec::new(WindowKind::Hamming, 32, 8);
    let h = equalize_and_window(&y, &ones, &w).unwrap();
    for c in 0..8 {
        for r in 0..32 {
            let ratio = h.get(r, c) / y.get(r, c);
            assert!((ratio - Complex64::new(w.w_r[r] * w.w_d[c], 0.0)).norm() < 1e-12);
        }
    }

    let mut zero = ones.clone();
    zero.data.set(3, 2, Complex64::new(0.0, 0.0));
    assert!(equalize_and_window(&y, &zero, &WindowSpec::rectangular(32, 8)).is_err());
}

#[test]
fn on_grid_peak_equals_processing_gain_times_window_loss() {
    let (_, p) = setup(256, 32, 64);
    for kind in [
        WindowKind::Rectangular,
        WindowKind::Chebyshev { sidelobe_db: 60.0 },
        WindowKind::Hamming,
    ] {
        let w = WindowSpec::new(kind, 256, 64);
        let img = range_doppler_image(&point_channel(40.0, 0.0, &p, &w), &p).unwrap();
        let (r, d, v) = peak(&img.data);
        assert_eq!((r, d), (40, 32));
        let want = p.processing_gain * w.loss;
        assert!(lin_to_db(v / want).abs() < 0.1, "{kind:?}: {} dB off", lin_to_db(v / want));
    }
    assert_eq!(WindowSpec::rectangular(256, 64).loss, 1.0);
}

#[test]
fn chebyshev_sidelobes_stay_sixty_db_down() {
    let (_, p) = setup(256, 32, 64);
    let w = WindowSpec::new(WindowKind::Chebyshev { sidelobe_db: 60.0 }, 256, 64);
    let img = range_doppler_image(&point_channel(100.0, 7.0, &p, &w), &p).unwrap();
    let (r0, d0, pk) = peak(&img.data);
    // Main lobe extent: walk outwards while the power keeps falling.
    let extent = |len: usize, at: &dyn Fn(usize) -> f64, start: usize| {
        let mut k = 0;
        while k + 1 < len / 2 && at((start + k + 1) % len) < at((start + k) % len) {
            k += 1;
        }
        k
    };
    let er = extent(256, &|r| img.power(r, d0), r0);
    let ed = extent(64, &|d| img.power(r0, d), d0);
    let mut worst = 0.0f64;
    for d in 0..64usize {
        for r in 0..256usize {
            let dr = r.abs_diff(r0).min(256 - r.abs_diff(r0));
            let dd = d.abs_diff(d0).min(64 - d.abs_diff(d0));
            if dr > er || dd > ed {
                worst = worst.max(img.power(r, d) / pk);
            }
        }
    }
    assert!(lin_to_db(worst) <= -60.0 + 1e-6, "{} dB", lin_to_db(worst));
}

#[test]
fn half_bin_target_leaks_symmetrically() {
    let (_, p) = setup(128, 16, 16);
    let img = range_doppler_image(&point_channel(30.5, 0.0, &p, &WindowSpec::rectangular(128, 16)), &p).unwrap();
    let (a, b) = (img.power(30, 8), img.power(31, 8));
    assert!((a / b - 1.0).abs() < 1e-9);
    assert!((img.power(29, 8) / img.power(32, 8) - 1.0).abs() < 1e-9);
}

#[test]
fn velocity_axis_is_centred_and_axes_match_the_matrix() {
    let (_, p) = setup(128, 16, 16);
    let img = range_doppler_image(&random_grid(128, 16, 2), &p).unwrap();
    assert_eq!(img.range_axis.len(), 128);
    assert_eq!(img.velocity_axis.len(), 16);
    assert_eq!(img.velocity_axis[8], 0.0);
    assert!((img.range_axis[1] - p.range_resolution).abs() < 1e-12);
    assert!(range_doppler_image(&random_grid(128, 15, 2), &p).is_err());
}

#[test]
fn image_is_the_same_on_any_thread_count() {
    let (_, p) = setup(256, 32, 32);
    let h = random_grid(256, 32, 5);
    let on = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| range_doppler_image(&h, &p).unwrap())
    };
    assert_eq!(on(1).data, on(3).data);
}

#[test]
fn noise_only_floor_matches_noise_power() {
    let (cfg, p) = setup(256, 32, 32);
    let frame = generate_data_frame(&cfg, 1, false);
    let tx = synthesize_time_signal(&frame, &cfg).unwrap();
    let sigma2 = thermal_noise_power(&cfg);
    let w = WindowSpec::rectangular(256, 32);
    let mut total = 0.0;
    for trial in 0..20 {
        let rx = apply_channel_time(&tx, &[], cfg.tx_power_w, sigma2, 100 + trial).unwrap();
        let h = equalize_and_window(&demodulate(&rx, 0, 32).unwrap(), &frame, &w).unwrap();
        let img = range_doppler_image(&h, &p).unwrap();
        let m = image_metrics(&img, &[], (4, 4)).unwrap();
        assert!(lin_to_db(m.floor_w / sigma2).abs() < 0.5);
        total += m.floor_w;
    }
    assert!(lin_to_db(total / 20.0 / sigma2).abs() < 0.1);
}

#[test]
fn noiseless_target_sinr_is_limited_by_arithmetic_only() {
    let (_, p) = setup(256, 32, 32);
    let img = range_doppler_image(&point_channel(50.0, 3.0, &p, &WindowSpec::rectangular(256, 32)), &p).unwrap();
    let m = image_metrics(&img, &[(50, 19)], (4, 4)).unwrap();
    assert!(m.peaks[0].sinr_db > 250.0, "{}", m.peaks[0].sinr_db);
    assert!(image_metrics(&img, &[(256, 0)], (4, 4)).is_err());
}

#[test]
fn in_cp_target_reaches_its_ideal_snr() {
    let cfg = OfdmConfig::desk_scale();
    let p = derive_params(&cfg).unwrap();
    // 64 range bins: inside the CP and on the grid.
    let spec = TargetSpec::with_rcs_dbsm(64.0 * p.range_resolution, 0.0, 10.0);
    let t = target_derived(&spec, &cfg, &p).unwrap();
    let frame = generate_data_frame(&cfg, 8, false);
    let tx = synthesize_time_signal(&frame, &cfg).unwrap();
    let rx = apply_channel_time(&tx, &[t], cfg.tx_power_w, thermal_noise_power(&cfg), 9).unwrap();
    let w = WindowSpec::rectangular(p.subcarriers, p.symbols);
    let h = equalize_and_window(&demodulate(&rx, 0, p.symbols).unwrap(), &frame, &w).unwrap();
    let img = range_doppler_image(&h, &p).unwrap();
    let m = image_metrics(&img, &[(64, p.symbols / 2)], (4, 4)).unwrap();
    let want = lin_to_db(ideal_snr(&spec, &cfg, &p).unwrap());
    assert!((m.peaks[0].sinr_db - want).abs() < 0.5, "{} vs {want}", m.peaks[0].sinr_db);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn image_preserves_energy(seed in any::<u64>()) {
        let (_, p) = setup(64, 8, 16);
        let h = random_grid(64, 16, seed);
        let img = range_doppler_image(&h, &p).unwrap();
        let e_h: f64 = h.as_slice().iter().map(|v| v.norm_sqr()).sum();
        let e_i: f64 = img.data.as_slice().iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((e_i / e_h - 1.0).abs() < 1e-9);
    }

    #[test]
    fn image_is_linear(seed in any::<u64>(), a in -3.0f64..3.0, b in -3.0f64..3.0) {
        let (_, p) = setup(64, 8, 16);
        let (x, y) = (random_grid(64, 16, seed), random_grid(64, 16, seed ^ 0x5555));
        let sum = ComplexGrid::from_fn(64, 16, |r, c| x.get(r, c) * a + y.get(r, c) * b);
        let (ix, iy, is) = (
            range_doppler_image(&x, &p).unwrap(),
            range_doppler_image(&y, &p).unwrap(),
            range_doppler_image(&sum, &p).unwrap(),
        );
        for (k, v) in is.data.as_slice().iter().enumerate() {
            let want = ix.data.as_slice()[k] * a + iy.data.as_slice()[k] * b;
            prop_assert!((v - want).norm() < 1e-9);
        }
    }

    #[test]
    fn doppler_permutation_is_an_involution(seed in any::<u64>(), half in 1usize..12) {
        let g = random_grid(5, 2 * half, seed);
        prop_assert_eq!(doppler_shift_columns(&doppler_shift_columns(&g)), g);
    }
}
