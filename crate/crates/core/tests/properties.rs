use faer::Mat;
use proptest::prelude::*;

use hengrc::bench::SystemSpec;
use hengrc::dynsys::{ks_rhs_spectral, KsParams, LyapunovEstimate};
use hengrc::features::{
    assemble, build_heng_nonlinear, build_linear, build_ngrc_nonlinear, featurize_series, plan_features, DelayWindow,
    FeatureConfig, FeatureFamily, HengVariant, NeighborWrap, Tap, Term,
};
use hengrc::metrics::{normalized_error, valid_time};
use hengrc::readout::{
    esn_step, esn_train, predict_closed_loop, read_model, ridge_solve, train, write_model, EsnConfig, EsnState,
    GramAccumulator, ReadoutModel, Reservoir, TargetMode, TrainConfig,
};
use hengrc::TimeSeries;

fn feature_config() -> impl Strategy<Value = FeatureConfig> {
    (
        prop_oneof![Just(FeatureFamily::HengRc), Just(FeatureFamily::NgRc)],
        1usize..10,
        1usize..4,
        any::<bool>(),
        -2.0f64..2.0,
        prop_oneof![Just(NeighborWrap::Periodic), Just(NeighborWrap::Clamped)],
        prop_oneof![Just(HengVariant::Full), Just(HengVariant::FirstDimOnly)],
        0usize..3,
    )
        .prop_map(|(family, q, k, constant, value, wrap, variant, offset)| FeatureConfig {
            family,
            q,
            k,
            include_constant: constant,
            constant_value: value,
            neighbor_wrap: wrap,
            heng_variant: variant,
            delay_offset: offset,
        })
        .prop_filter("valid config", |c| c.validate().is_ok())
}

fn config_and_window() -> impl Strategy<Value = (FeatureConfig, Vec<f64>)> {
    feature_config().prop_flat_map(|c| {
        let n = c.q * (c.history_depth() + 1);
        (Just(c), prop::collection::vec(-3.0f64..3.0, n))
    })
}

fn window(values: &[f64], q: usize) -> DelayWindow<'_> {
    DelayWindow::new(values.chunks(q).collect()).unwrap()
}

proptest! {
    #[test]
    fn count_laws((cfg, values) in config_and_window()) {
        let map = plan_features(&cfg).unwrap();
        let w = window(&values, cfg.q);
        let v = assemble(&w, &map).unwrap();
        prop_assert_eq!(v.len(), map.total_dim);
        prop_assert_eq!(map.term_index.len(), map.total_dim);
        let linear = build_linear(&w, &cfg).unwrap();
        prop_assert_eq!(linear.len(), cfg.q * (cfg.k + 1));
        match cfg.family {
            FeatureFamily::HengRc => {
                let dims = if cfg.heng_variant == HengVariant::Full { cfg.q } else { 1 };
                prop_assert_eq!(build_heng_nonlinear(&w, &cfg).unwrap().len(), 6 * dims * cfg.k);
                prop_assert_eq!(map.dim_nonlinear, 6 * dims * cfg.k);
            }
            _ => {
                let d = linear.len();
                prop_assert_eq!(build_ngrc_nonlinear(&linear).len(), d * (d + 1) / 2);
                prop_assert_eq!(map.dim_nonlinear, d * (d + 1) / 2);
            }
        }
        prop_assert_eq!(map.dim_constant + map.dim_linear + map.dim_nonlinear, map.total_dim);
    }

    #[test]
    fn assembly_is_deterministic_and_matches_term_index((cfg, values) in config_and_window()) {
        let map = plan_features(&cfg).unwrap();
        let w = window(&values, cfg.q);
        let a = assemble(&w, &map).unwrap();
        let b = assemble(&w, &plan_features(&cfg).unwrap()).unwrap();
        prop_assert_eq!(a.iter().map(|x| x.to_bits()).collect::<Vec<_>>(), b.iter().map(|x| x.to_bits()).collect::<Vec<_>>());
        for (slot, term) in a.iter().zip(&map.term_index) {
            prop_assert_eq!(slot.to_bits(), term.evaluate(&w, cfg.constant_value).to_bits());
        }
    }

    #[test]
    fn heng_perturbation_is_local(
        (cfg, values) in config_and_window().prop_filter("heng", |(c, _)| c.family == FeatureFamily::HengRc),
        pick in any::<prop::sample::Index>(),
        bump in 0.5f64..2.0,
    ) {
        let map = plan_features(&cfg).unwrap();
        let at = pick.index(values.len());
        let tap = Tap::new(at / cfg.q, at % cfg.q);
        let mut moved = values.clone();
        moved[at] += bump;
        let before = assemble(&window(&values, cfg.q), &map).unwrap();
        let after = assemble(&window(&moved, cfg.q), &map).unwrap();
        for ((x, y), term) in before.iter().zip(&after).zip(&map.term_index) {
            if x != y {
                prop_assert!(term.reads(tap), "{:?} changed without reading {:?}", term, tap);
            }
        }
    }

    #[test]
    fn ngrc_quadratics_ignore_sign(linear in prop::collection::vec(-5.0f64..5.0, 1..40)) {
        let neg: Vec<f64> = linear.iter().map(|v| -v).collect();
        prop_assert_eq!(build_ngrc_nonlinear(&linear), build_ngrc_nonlinear(&neg));
    }

    #[test]
    fn featurized_columns_equal_sliced_windows(
        cfg in feature_config(),
        extra in 2usize..20,
        seed in any::<u64>(),
        pick in any::<prop::sample::Index>(),
    ) {
        let depth = cfg.history_depth();
        let len = depth + extra;
        let data: Vec<f64> = (0..cfg.q * len).map(|i| ((i as u64 ^ seed) % 997) as f64 / 500.0 - 1.0).collect();
        let series = TimeSeries::new(cfg.q, 0.1, 0.0, data).unwrap();
        let map = plan_features(&cfg).unwrap();
        let set = featurize_series(&series, &map).unwrap();
        prop_assert_eq!(set.n_samples(), len - 1 - depth);
        let c = pick.index(set.n_samples());
        let t = set.first_step + c;
        let expect = assemble(&DelayWindow::from_series(&series, t, depth).unwrap(), &map).unwrap();
        for (r, v) in expect.iter().enumerate() {
            prop_assert_eq!(set.features[(r, c)].to_bits(), v.to_bits());
        }
        for i in 0..cfg.q {
            prop_assert_eq!(set.targets[(i, c)].to_bits(), series.get(i, t + 1).to_bits());
        }
    }
}

#[test]
fn heng_is_smaller_than_ngrc_for_paper_configs() {
    for (q, k) in [(3, 1), (64, 1), (64, 2), (256, 2), (512, 2)] {
        let d = q * (k + 1);
        assert!(6 * q * k < d * (d + 1) / 2, "q {q} k {k}");
        let heng = plan_features(&FeatureConfig::heng_rc(q, k)).unwrap();
        assert_eq!(heng.dim_nonlinear, 6 * q * k);
    }
}

fn series_pair() -> impl Strategy<Value = (TimeSeries, TimeSeries)> {
    (2usize..60).prop_flat_map(|t| {
        (prop::collection::vec(-10.0f64..10.0, 3 * t), prop::collection::vec(-10.0f64..10.0, 3 * t)).prop_map(
            |(a, b)| (TimeSeries::new(3, 0.02, 0.0, a).unwrap(), TimeSeries::new(3, 0.02, 0.0, b).unwrap()),
        )
    })
}

fn rotate(s: &TimeSeries, r: &[[f64; 3]; 3]) -> TimeSeries {
    let data = s
        .columns()
        .flat_map(|c| (0..3).map(move |i| (0..3).map(|j| r[i][j] * c[j]).sum::<f64>()))
        .collect();
    TimeSeries::new(3, s.dt(), 0.0, data).unwrap()
}

fn rotation(a: f64, b: f64, c: f64) -> [[f64; 3]; 3] {
    let rz = [[a.cos(), -a.sin(), 0.0], [a.sin(), a.cos(), 0.0], [0.0, 0.0, 1.0]];
    let ry = [[b.cos(), 0.0, b.sin()], [0.0, 1.0, 0.0], [-b.sin(), 0.0, b.cos()]];
    let rx = [[1.0, 0.0, 0.0], [0.0, c.cos(), -c.sin()], [0.0, c.sin(), c.cos()]];
    let mul = |x: [[f64; 3]; 3], y: [[f64; 3]; 3]| {
        let mut m = [[0.0; 3]; 3];
        for i in 0..3 {
            for j in 0..3 {
                m[i][j] = (0..3).map(|n| x[i][n] * y[n][j]).sum();
            }
        }
        m
    };
    mul(mul(rz, ry), rx)
}

proptest! {
    #[test]
    fn valid_steps_monotone_in_threshold((truth, pred) in series_pair(), a in 0.01f64..3.0, b in 0.01f64..3.0) {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        let l = valid_time(&truth, &pred, lo, None).unwrap();
        let h = valid_time(&truth, &pred, hi, None).unwrap();
        prop_assert!(l.valid_steps <= h.valid_steps);
    }

    #[test]
    fn lyapunov_times_are_seconds_times_exponent((truth, pred) in series_pair(), theta in 0.05f64..2.0, lambda in 0.01f64..2.0) {
        let est = LyapunovEstimate::from_lambda(lambda, 0);
        let r = valid_time(&truth, &pred, theta, Some(&est)).unwrap();
        prop_assert_eq!(r.valid_lyapunov_times, Some(r.valid_seconds * lambda));
    }

    #[test]
    fn error_invariant_under_rotation((truth, pred) in series_pair(), a in 0.0f64..6.3, b in 0.0f64..6.3, c in 0.0f64..6.3) {
        let r = rotation(a, b, c);
        let plain = normalized_error(&truth, &pred).unwrap();
        let turned = normalized_error(&rotate(&truth, &r), &rotate(&pred, &r)).unwrap();
        for (x, y) in plain.iter().zip(&turned) {
            prop_assert!((x - y).abs() <= 1e-10 * x.abs().max(1.0), "{} vs {}", x, y);
        }
    }

    #[test]
    fn ks_rhs_has_zero_mean(profile in prop::collection::vec(-4.0f64..4.0, 32)) {
        let rhs = ks_rhs_spectral(&profile, &KsParams::new(22.0, 32)).unwrap();
        let mean = rhs.iter().sum::<f64>() / rhs.len() as f64;
        let scale = profile.iter().fold(1.0f64, |m, v| m.max(v.abs()));
        prop_assert!(mean.abs() < 1e-12 * scale, "mean {}", mean);
    }
}

fn mat(rows: usize, cols: usize, values: &[f64]) -> Mat<f64> {
    Mat::from_fn(rows, cols, |i, j| values[i * cols + j])
}

fn frob(m: &Mat<f64>) -> f64 {
    let mut s = 0.0;
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            s += m[(i, j)] * m[(i, j)];
        }
    }
    s.sqrt()
}

fn ridge_instance() -> impl Strategy<Value = (usize, usize, usize, Vec<f64>, Vec<f64>, f64)> {
    (1usize..25, 0usize..150, 1usize..4, prop_oneof![Just(0.0), 1e-8f64..1.0]).prop_flat_map(|(f, extra, q, lambda)| {
        let t = f + 5 + extra;
        (
            Just(f),
            Just(t),
            Just(q),
            prop::collection::vec(-1.0f64..1.0, f * t),
            prop::collection::vec(-1.0f64..1.0, q * t),
            Just(lambda),
        )
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn ridge_normal_equation_residual((f, t, q, s, y, lambda) in ridge_instance()) {
        let s = mat(f, t, &s);
        let y = mat(q, t, &y);
        let w = ridge_solve(s.as_ref(), y.as_ref(), lambda).unwrap();
        // || W (S S^T + lambda I) - Y S^T || / || Y S^T ||
        let mut lhs = &w * (&s * s.transpose());
        for i in 0..q {
            for j in 0..f {
                lhs[(i, j)] += lambda * w[(i, j)];
            }
        }
        let rhs = &y * s.transpose();
        let rel = frob(&(&lhs - &rhs)) / frob(&rhs);
        prop_assert!(rel <= 1e-8, "residual {}", rel);
    }

    #[test]
    fn streamed_gram_equals_materialized(
        (f, t, q, s, y, _) in ridge_instance(),
        cuts in prop::collection::vec(any::<prop::sample::Index>(), 0..5),
    ) {
        let s = mat(f, t, &s);
        let y = mat(q, t, &y);
        let mut bounds: Vec<usize> = cuts.iter().map(|c| c.index(t)).chain([0, t]).collect();
        bounds.sort_unstable();
        bounds.dedup();
        let mut acc = GramAccumulator::new(f, q);
        for w in bounds.windows(2) {
            acc.add(s.as_ref().subcols(w[0], w[1] - w[0]), y.as_ref().subcols(w[0], w[1] - w[0])).unwrap();
        }
        prop_assert_eq!(acc.n_samples(), t);
        let gram = &s * s.transpose();
        let cross = &y * s.transpose();
        prop_assert!(frob(&(&acc.gram() - &gram)) <= 1e-12 * frob(&gram));
        prop_assert!(frob(&(acc.cross().to_owned() - &cross)) <= 1e-12 * frob(&cross));
    }
}

fn lorenz(steps: usize, seed: u64) -> TimeSeries {
    SystemSpec::lorenz().generate(steps, seed).unwrap()
}

fn bits(s: &TimeSeries) -> Vec<u64> {
    s.as_slice().iter().map(|v| v.to_bits()).collect()
}

fn round_trip(model: &ReadoutModel) -> ReadoutModel {
    let mut buf = Vec::new();
    write_model(model, &mut buf).unwrap();
    read_model(buf.as_slice()).unwrap()
}

fn lorenz_model() -> impl Strategy<Value = (FeatureConfig, TrainConfig, u64)> {
    (
        prop_oneof![Just(FeatureFamily::HengRc), Just(FeatureFamily::NgRc)],
        1usize..3,
        0usize..2,
        any::<bool>(),
        prop_oneof![Just(TargetMode::NextState), Just(TargetMode::Delta)],
        -7.0f64..-2.0,
        any::<bool>(),
        any::<u64>(),
    )
        .prop_map(|(family, k, offset, constant, mode, log_lambda, normalize, seed)| {
            let cfg = FeatureConfig {
                family,
                k,
                ..FeatureConfig::heng_rc(3, k)
            }
            .with_offset(offset)
            .with_constant(constant);
            (cfg, TrainConfig::new(10f64.powf(log_lambda), mode).normalized(normalize), seed)
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn closed_loop_is_bitwise_deterministic((cfg, tc, seed) in lorenz_model()) {
        let data = lorenz(300, seed);
        let map = plan_features(&cfg).unwrap();
        // Near-zero lambda on raw NG-RC features can be numerically singular;
        // that outcome must be reproducible too.
        let (m1, m2) = match (train(&data, &map, &tc), train(&data, &map, &tc)) {
            (Ok((m1, _)), Ok((m2, _))) => (m1, m2),
            (Err(a), Err(b)) => {
                prop_assert_eq!(a.to_string(), b.to_string());
                return Ok(());
            }
            _ => return Err(TestCaseError::fail("training succeeded only once")),
        };
        let a = predict_closed_loop(&m1, &data, 120).unwrap();
        let b = predict_closed_loop(&m1, &data, 120).unwrap();
        let c = predict_closed_loop(&m2, &data, 120).unwrap();
        prop_assert_eq!(bits(&a.series), bits(&b.series));
        prop_assert_eq!(bits(&a.series), bits(&c.series));
        prop_assert_eq!(a.blow_up_step, c.blow_up_step);
    }

    #[test]
    fn snapshot_round_trip_predicts_identically((cfg, tc, seed) in lorenz_model()) {
        let data = lorenz(300, seed);
        let Ok((model, _)) = train(&data, &plan_features(&cfg).unwrap(), &tc) else {
            return Ok(());
        };
        let back = round_trip(&model);
        let a = predict_closed_loop(&model, &data, 120).unwrap();
        let b = predict_closed_loop(&back, &data, 120).unwrap();
        prop_assert_eq!(bits(&a.series), bits(&b.series));
    }

    #[test]
    fn esn_snapshot_round_trip(nodes in 5usize..40, seed in any::<u64>(), leak in 0.1f64..1.0, normalize in any::<bool>()) {
        let data = lorenz(250, seed);
        let cfg = EsnConfig { seed, leak_rate: leak, ..EsnConfig::with_nodes(nodes) };
        let tc = TrainConfig::new(1e-6, TargetMode::NextState).normalized(normalize);
        let (model, _) = esn_train(&data, &cfg, &tc, 20).unwrap();
        let a = predict_closed_loop(&model, &data, 80).unwrap();
        let b = predict_closed_loop(&round_trip(&model), &data, 80).unwrap();
        prop_assert_eq!(bits(&a.series), bits(&b.series));
    }

    #[test]
    fn esn_state_stays_in_unit_box(
        nodes in 3usize..50,
        seed in any::<u64>(),
        leak in 0.01f64..=1.0,
        radius in 0.1f64..2.0,
        inputs in prop::collection::vec(-100.0f64..100.0, 3 * 30),
    ) {
        let cfg = EsnConfig { seed, leak_rate: leak, spectral_radius: radius, ..EsnConfig::with_nodes(nodes) };
        let reservoir = Reservoir::new(&cfg, 3).unwrap();
        let mut state = EsnState::zeros(nodes);
        for u in inputs.chunks(3) {
            state = esn_step(&state, u, &reservoir).unwrap();
            prop_assert!(state.s.iter().all(|v| v.abs() <= 1.0));
        }
    }

    #[test]
    fn generation_is_reproducible(seed in any::<u64>()) {
        let ks = SystemSpec::Ks { params: KsParams { transient_steps: 50, ..KsParams::new(22.0, 32) } };
        prop_assert_eq!(bits(&ks.generate(40, seed).unwrap()), bits(&ks.generate(40, seed).unwrap()));
        prop_assert_eq!(bits(&lorenz(100, seed)), bits(&lorenz(100, seed)));
    }
}

#[test]
fn term_index_has_no_constant_unless_asked() {
    let map = plan_features(&FeatureConfig::heng_rc(4, 2)).unwrap();
    assert!(!map.term_index.iter().any(|t| matches!(t, Term::Constant)));
    let map = plan_features(&FeatureConfig::heng_rc(4, 2).with_constant(true)).unwrap();
    assert!(matches!(map.term_index[0], Term::Constant));
}
