use std::sync::Arc;

use langevin_core::harness::{
    coupled_pair, fit_order, run_reference, run_scheme_coupled, strong_error_experiment, Coupling, ExactFlow,
    ExperimentConfig, ReferenceMethod,
};
use langevin_core::linalg::Matrix;
use langevin_core::models::{harmonic_model, LinearSde, ModelConfig};
use langevin_core::noise::{generate_path, LegendrePath};
use langevin_core::{Error, LangevinModel, PhaseState, SchemeKind};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pow2(k: i32) -> f64 {
    2f64.powi(k)
}

fn pendulum_config(
    schemes: Vec<SchemeKind>,
    dts: Vec<f64>,
    ref_dt: f64,
    n_paths: usize,
    seed: u64,
) -> ExperimentConfig {
    ExperimentConfig::new(ModelConfig::named("pendulum"), schemes, dts, ref_dt, n_paths, seed)
}

#[test]
fn noise_free_reference_is_deterministic_euler() {
    let model = harmonic_model(1.3).with_sigma(Matrix::zeros(1, 1)).unwrap();
    let path = generate_path(1, 1.0, pow2(-8), 3).unwrap();
    let s0 = PhaseState::from_slices(&[0.7], &[-0.2]);
    let out = run_reference(&model, &s0, &path).unwrap();
    let (mut x, mut v) = (0.7f64, -0.2f64);
    let h = pow2(-8);
    for _ in 0..256 {
        let a = -1.69 * x - v;
        x += h * v;
        v += h * a;
    }
    assert!((out.x[0] - x).abs() < 1e-13 && (out.v[0] - v).abs() < 1e-13);
}

#[test]
fn reference_is_reproducible_and_matches_taylor1_on_its_grid() {
    let model = langevin_core::models::pendulum_model();
    let s0 = PhaseState::from_slices(&[1.0], &[0.0]);
    let path = generate_path(1, 1.0, pow2(-9), 17).unwrap();
    let a = run_reference(&model, &s0, &path).unwrap();
    let b = run_reference(&model, &s0, &path).unwrap();
    assert_eq!(a, b);
    let t1 = run_scheme_coupled(&model, SchemeKind::Taylor1, &s0, &path, pow2(-9)).unwrap();
    assert_eq!(a, t1);
}

#[test]
fn euler_reference_self_error_decays_at_order_one() {
    let model = harmonic_model(1.0);
    let s0 = PhaseState::from_slices(&[1.0], &[0.0]);
    let dts: Vec<f64> = (5..=9).map(|k| pow2(-k)).collect();
    let mut errors = vec![0.0; dts.len()];
    let paths = 100;
    for p in 0..paths {
        let path = generate_path(1, 1.0, pow2(-14), 100 + p).unwrap();
        let fine = run_reference(&model, &s0, &path).unwrap();
        for (e, &dt) in errors.iter_mut().zip(&dts) {
            let coarse = run_scheme_coupled(&model, SchemeKind::Taylor1, &s0, &path, dt).unwrap();
            *e += coarse.distance(&fine) / paths as f64;
        }
    }
    let fit = fit_order(&dts, &errors).unwrap();
    assert!(fit.slope >= 0.8, "slope {}", fit.slope);
}

#[test]
fn halving_ratios_on_the_pendulum() {
    let cfg = pendulum_config(
        vec![SchemeKind::Trunc2Sym, SchemeKind::Trunc3Neri],
        vec![pow2(-5), pow2(-6)],
        pow2(-12),
        100,
        5,
    );
    let report = strong_error_experiment(&cfg, None).unwrap();
    let ratio = |k| {
        let r = report.result(k).unwrap();
        r.errors[0].unwrap() / r.errors[1].unwrap()
    };
    let r2 = ratio(SchemeKind::Trunc2Sym);
    let r3 = ratio(SchemeKind::Trunc3Neri);
    assert!((3.0..5.5).contains(&r2), "trunc II symmetric ratio {r2}");
    assert!((5.5..11.5).contains(&r3), "trunc III Neri ratio {r3}");
}

#[test]
fn single_path_has_no_standard_errors() {
    let cfg = pendulum_config(
        vec![SchemeKind::Svv],
        vec![pow2(-4), pow2(-5), pow2(-6)],
        pow2(-10),
        1,
        9,
    );
    let report = strong_error_experiment(&cfg, Some(1)).unwrap();
    let r = report.result(SchemeKind::Svv).unwrap();
    assert!(r.stderrs.iter().all(Option::is_none));
    assert!(r.errors.iter().all(|e| e.unwrap() > 0.0));
    assert!(r.slope.is_some());
    assert_eq!(report.provenance.path_seeds.len(), 1);
}

#[test]
fn noisy_cubic_fit() {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let dts: Vec<f64> = (3..=9).map(|k| pow2(-k)).collect();
    let errs: Vec<f64> = dts
        .iter()
        .map(|d| 0.3 * d.powi(3) * (1.0 + 0.01 * (2.0 * rng.random::<f64>() - 1.0)))
        .collect();
    let fit = fit_order(&dts, &errs).unwrap();
    assert!((fit.slope - 3.0).abs() < 0.1);
    assert!(fit.stderr.unwrap() < 0.01);
}

#[test]
fn fresh_seed_moves_states_but_not_slopes() {
    let schemes = vec![SchemeKind::Trunc1Sym, SchemeKind::Trunc2Sym];
    let dts = vec![pow2(-4), pow2(-5), pow2(-6), pow2(-7)];
    let a = strong_error_experiment(&pendulum_config(schemes.clone(), dts.clone(), pow2(-12), 60, 1), None).unwrap();
    let b = strong_error_experiment(&pendulum_config(schemes, dts, pow2(-12), 60, 2), None).unwrap();
    for (ra, rb) in a.results.iter().zip(&b.results) {
        assert_ne!(ra.errors, rb.errors);
        let expected = ra.scheme.expected_order();
        assert!((ra.slope.unwrap() - expected).abs() < 0.25);
        assert!((rb.slope.unwrap() - expected).abs() < 0.25);
    }
    let cfg = pendulum_config(vec![SchemeKind::Svv], vec![pow2(-4)], pow2(-10), 3, 1);
    let (ref_a, y_a) = coupled_pair(&cfg, SchemeKind::Svv, pow2(-4), 0).unwrap();
    let (ref_b, y_b) = coupled_pair(&cfg, SchemeKind::Svv, pow2(-4), 1).unwrap();
    assert_ne!(ref_a, ref_b);
    assert_ne!(y_a, y_b);
}

#[test]
fn errors_decrease_with_step_size() {
    let cfg = pendulum_config(
        SchemeKind::ALL.to_vec(),
        (4..=7).map(|k| pow2(-k)).collect(),
        pow2(-12),
        50,
        77,
    );
    let report = strong_error_experiment(&cfg, None).unwrap();
    for r in &report.results {
        for w in r.cells.windows(2) {
            let (big, small) = (&w[0], &w[1]);
            let slack = 2.0 * big.std_error.unwrap().hypot(small.std_error.unwrap());
            assert!(
                small.mean_error.unwrap() <= big.mean_error.unwrap() + slack,
                "{} not monotone at dt = {}",
                r.scheme,
                small.dt
            );
        }
    }
}

#[test]
fn thread_count_does_not_change_reports() {
    let cfg = pendulum_config(
        vec![SchemeKind::DirectSym, SchemeKind::Trunc3Neri],
        vec![pow2(-4), pow2(-5), pow2(-6)],
        pow2(-10),
        12,
        3,
    );
    let one = serde_json::to_string(&strong_error_experiment(&cfg, Some(1)).unwrap()).unwrap();
    let three = serde_json::to_string(&strong_error_experiment(&cfg, Some(3)).unwrap()).unwrap();
    assert_eq!(one, three);
}

#[test]
fn collisions_are_excluded_and_reported() {
    // a collision radius just below the bond length trips on thermal motion
    let mut model = ModelConfig::named("lj7");
    model.collision_radius = Some(1.0);
    let cfg = ExperimentConfig::new(
        model,
        vec![SchemeKind::Taylor1],
        vec![pow2(-4), pow2(-5), pow2(-6)],
        pow2(-10),
        8,
        1,
    );
    match strong_error_experiment(&cfg, None) {
        Ok(report) => {
            assert!(!report.exclusions.is_empty());
            assert!(report.exclusions.iter().all(|e| e.reason.contains("collided")));
            let cell = &report.results[0].cells[0];
            assert_eq!(cell.n_excluded + cell.n_paths_used, 8);
        }
        Err(e) => assert!(matches!(e, Error::AllPathsExcluded { .. }), "{e}"),
    }
}

#[test]
fn exact_flow_without_noise_is_the_mean_propagator() {
    let model = harmonic_model(2.0).with_sigma(Matrix::zeros(1, 1)).unwrap();
    let lin = LinearSde::from_model(&model).unwrap();
    let h = pow2(-6);
    let order = ExactFlow::order_for(&lin, &model.gamma, h);
    let flow = ExactFlow::new(&lin, h, order).unwrap();
    let path = LegendrePath::generate(1, 1.0, h, order, 8).unwrap();
    let s0 = PhaseState::from_slices(&[0.3], &[1.0]);
    let out = flow.run(&s0, &path).unwrap();
    let expected = lin.mean_propagator(1.0).unwrap() * LinearSde::stack(&s0);
    assert!((LinearSde::stack(&out) - expected).amax() < 1e-12);
}

#[test]
fn legendre_coupling_requires_linear_model() {
    let mut cfg = pendulum_config(
        vec![SchemeKind::Taylor1],
        vec![pow2(-4), pow2(-5), pow2(-6)],
        pow2(-6),
        2,
        1,
    );
    cfg.coupling = Coupling::Legendre;
    cfg.reference = ReferenceMethod::Exact;
    assert!(strong_error_experiment(&cfg, None).is_err());
    cfg.model = ModelConfig::named("harmonic");
    let report = strong_error_experiment(&cfg, None).unwrap();
    assert!(report.results[0].errors.iter().all(|e| e.unwrap() > 0.0));
}

#[test]
fn custom_force_fields_run_through_the_steppers() {
    let f = langevin_core::model::FnForce::new(2, |x: &langevin_core::linalg::Vector| -x * 0.5);
    let model = LangevinModel::new("custom", Arc::new(f), Matrix::identity(2, 2), Matrix::identity(2, 2)).unwrap();
    let s0 = PhaseState::from_slices(&[1.0, 0.0], &[0.0, 1.0]);
    let path = generate_path(2, 1.0, pow2(-9), 2).unwrap();
    for k in SchemeKind::ALL {
        let out = run_scheme_coupled(&model, k, &s0, &path, pow2(-5)).unwrap();
        assert!(out.is_finite(), "{k}");
    }
}
