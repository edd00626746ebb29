use approx::assert_relative_eq;
use ndarray::Array2;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};

use nfdps::estimator::{decouple_angle, decouple_distance, decouple_range, run_dps};
use nfdps::frontend::{observe, random_combiner};
use nfdps::harness::{nmse, stream, ExplicitPath, SimConfig, Stream};
use nfdps::model::{
    apply_impairments, delay_steering, read_complex_matrix, synthesize_channel_exact,
    write_complex_matrix,
};
use nfdps::runtime::{run_distributed, RuntimeConfig};
use nfdps::{
    ArrayGeometry, Complex64, DelayDictionary, DpsConfig, Impairments, PathParams, StoppingRule,
    SubcarrierGrid, WidebandChannel, SPEED_OF_LIGHT,
};

fn complex_matrix(rows: usize, cols: usize) -> impl Strategy<Value = Array2<Complex64>> {
    prop::collection::vec((-1e3f64..1e3, -1e3f64..1e3), rows * cols).prop_map(move |v| {
        Array2::from_shape_vec(
            (rows, cols),
            v.into_iter().map(|(a, b)| Complex64::new(a, b)).collect(),
        )
        .unwrap()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn decoupling_inverts_the_second_order_model(
        theta in -0.95f64..0.95,
        d in 5.0f64..60.0,
        r in 0.0f64..40.0,
        k_half in 2usize..64,
    ) {
        let k = 2 * k_half;
        let geom = ArrayGeometry::new(4 * k, k, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(512, 400e6).unwrap();
        let sp = geom.subarray_pitch();
        let delays: Vec<f64> = (0..k)
            .map(|i| {
                let x = (i as f64 - (k as f64 - 1.0) / 2.0) * sp;
                grid.spacing_hz() * (r + d - x * theta + x * x * (1.0 - theta * theta) / (2.0 * d)) / SPEED_OF_LIGHT
            })
            .collect();
        let th = decouple_angle(&delays, &geom, &grid).unwrap().value;
        let dh = decouple_distance(&delays, th, &geom, &grid).unwrap();
        let rh = decouple_range(&delays, th, dh, &geom, &grid).unwrap();
        prop_assert!((th - theta).abs() < 1e-9);
        assert_relative_eq!(dh, d, max_relative = 1e-8);
        prop_assert!((rh - r).abs() < 1e-7 * (r + d));
    }

    #[test]
    fn on_grid_atom_is_detected_with_full_score(log_m in 2u32..11, frac in 0.0f64..1.0, phase in 0.0f64..std::f64::consts::TAU, amp in 0.1f64..10.0) {
        let m = 1usize << log_m;
        let i = ((frac * m as f64) as usize).min(m - 1);
        let dict = DelayDictionary::new(m).unwrap();
        let g = Complex64::from_polar(amp, phase);
        let y: Vec<Complex64> = delay_steering(dict.grid_delay(i as i64), m).iter().map(|v| v * g).collect();
        let det = dict.detect(&y);
        prop_assert_eq!(det.index, i);
        assert_relative_eq!(det.score, amp * amp * m as f64, max_relative = 1e-9);
    }

    #[test]
    fn nmse_is_scale_invariant(h in complex_matrix(4, 6), e in complex_matrix(4, 6), s in 0.01f64..100.0) {
        prop_assume!(h.iter().any(|v| v.norm() > 1e-3));
        let geom = ArrayGeometry::new(4, 2, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(6, 1e6).unwrap();
        let a = WidebandChannel::from_entries(h.clone(), geom, grid).unwrap();
        let b = WidebandChannel::from_entries(e.clone(), geom, grid).unwrap();
        let sa = WidebandChannel::from_entries(h.mapv(|v| v * s), geom, grid).unwrap();
        let sb = WidebandChannel::from_entries(e.mapv(|v| v * s), geom, grid).unwrap();
        assert_relative_eq!(nmse(&a, &b).unwrap(), nmse(&sa, &sb).unwrap(), max_relative = 1e-9);
        prop_assert_eq!(nmse(&a, &a).unwrap(), 0.0);
    }

    #[test]
    fn complex_matrix_bytes_round_trip(m in complex_matrix(3, 5)) {
        let mut buf = Vec::new();
        write_complex_matrix(&mut buf, &m.view()).unwrap();
        prop_assert_eq!(buf.len(), 3 * 5 * 16);
        prop_assert_eq!(read_complex_matrix(&buf[..], 3, 5).unwrap(), m);
    }

    #[test]
    fn streams_are_reproducible_and_separated(seed in any::<u64>(), trial in 0u64..1 << 20) {
        let draw = |w| stream(seed, trial, w).random::<u64>();
        prop_assert_eq!(draw(Stream::Paths), draw(Stream::Paths));
        prop_assert_ne!(draw(Stream::Paths), draw(Stream::Combiner));
        prop_assert_ne!(draw(Stream::Noise(0)), draw(Stream::Noise(1)));
        prop_assert_ne!(stream(seed, trial, Stream::Paths).random::<u64>(), stream(seed, trial + 1, Stream::Paths).random::<u64>());
    }

    #[test]
    fn config_survives_toml_and_file_round_trip(
        n_log in 4u32..10,
        seed in any::<u64>(),
        snr in prop::collection::vec(-10.0f64..30.0, 1..5),
        theta in -0.9f64..0.9,
    ) {
        let mut cfg = SimConfig::default();
        cfg.geometry.num_antennas = 1 << n_log;
        cfg.geometry.num_subarrays = 1 << (n_log - 2);
        cfg.run.seed = seed;
        cfg.run.snr_db = snr;
        cfg.paths.explicit = vec![ExplicitPath::from_params(&PathParams::new(Complex64::new(0.5, -0.25), theta, 12.0, 7.0))];
        let text = cfg.to_toml_string().unwrap();
        prop_assert_eq!(&SimConfig::from_toml_str(&text).unwrap(), &cfg);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sim.toml");
        std::fs::write(&path, &text).unwrap();
        prop_assert_eq!(SimConfig::from_file(&path).unwrap(), cfg);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    /// Serial and message-passing runs agree, and per-subarray gain factors
    /// never move a delay index.
    #[test]
    fn runtime_equivalence_and_gain_invariance(seed in any::<u64>(), l in 1usize..4, snr_db in 0.0f64..30.0) {
        let geom = ArrayGeometry::new(128, 32, 7e9).unwrap();
        let grid = SubcarrierGrid::from_bandwidth(128, 400e6).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let paths: Vec<PathParams> = (0..l)
            .map(|_| {
                PathParams::new(
                    Complex64::from_polar(1.0, rng.random_range(0.0..std::f64::consts::TAU)),
                    rng.random_range(-0.9..0.9),
                    rng.random_range(10.0..20.0),
                    rng.random_range(10.0..20.0),
                )
            })
            .collect();
        let h = synthesize_channel_exact(&paths, &geom, &grid);
        let comb = random_combiner(&geom, &mut rng);
        let s2 = nfdps::frontend::noise_variance_for_snr(&h, &comb, 1.0, snr_db).unwrap();
        let y = observe(&h, &comb, 1.0, s2, &mut rng).unwrap();
        let rule = StoppingRule::new(s2, 128, 1e-3).unwrap();
        let cfg = DpsConfig { max_paths: 6, ..Default::default() };
        let serial = run_dps(&y, &comb, &geom, &grid, &rule, &cfg).unwrap();
        let rt = RuntimeConfig { trace: true, parallel: seed % 2 == 0 };
        let dist = run_distributed(&y, &comb, &geom, &grid, &rule, &cfg, &rt).unwrap();
        prop_assert_eq!(&dist.output, &serial);
        prop_assert!(dist.trace.unwrap().max_payload_len() < 128);

        let mut noiseless = observe(&h, &comb, 1.0, 0.0, &mut rng).unwrap();
        noiseless.noise_variance = s2;
        let imp = Impairments { clock_offsets: vec![0.0; 32], gain_factors: (0..32).map(|_| rng.random_range(0.05..=1.0)).collect() };
        let scaled = nfdps::ReceivedSignal { rows: apply_impairments(&noiseless.rows, &imp, 7e9, &grid).unwrap(), ..noiseless.clone() };
        let zero = StoppingRule::new(1e-300, 128, 1e-3).unwrap();
        let a = run_dps(&noiseless, &comb, &geom, &grid, &zero, &cfg).unwrap();
        let b = run_dps(&scaled, &comb, &geom, &grid, &zero, &cfg).unwrap();
        let tracks = |o: &nfdps::DpsOutput| o.paths.iter().map(|p| p.track.clone()).collect::<Vec<_>>();
        prop_assert_eq!(tracks(&a), tracks(&b));
    }
}
