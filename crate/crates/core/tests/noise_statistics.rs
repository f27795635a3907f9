use langevin_core::diagnostics::identity_residual;
use langevin_core::noise::{
    generate_path, increment_covariance, integrals_from_path, sample_increments, IncrementSampler, PathQuadrature,
    RngStream, StepIncrements,
};
use proptest::prelude::*;

/// Mean of `xs` and its standard error.
fn mean_se(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (n - 1.0);
    (m, (v / n).sqrt())
}

type Moment = fn(&StepIncrements) -> f64;

fn z(xs: &[f64], expected: f64) -> f64 {
    let (m, se) = mean_se(xs);
    (m - expected) / se
}

fn sampled(dt: f64, count: usize, seed: u64) -> Vec<StepIncrements> {
    let sampler = IncrementSampler::new(1, dt).unwrap();
    let mut rng = RngStream::new(seed, 0).step_rng(0);
    (0..count).map(|_| sampler.sample(&mut rng)).collect()
}

fn quadrature(dt: f64, ratio: usize, count: usize, seed: u64) -> Vec<StepIncrements> {
    let delta = dt / ratio as f64;
    let path = generate_path(1, dt * count as f64, delta, seed).unwrap();
    let quad = PathQuadrature::new(delta, dt).unwrap();
    (0..count).map(|k| quad.increments(&path, k).unwrap()).collect()
}

fn products(incs: &[StepIncrements], f: impl Fn(&StepIncrements) -> f64) -> Vec<f64> {
    incs.iter().map(f).collect()
}

#[test]
fn wiener_and_area_are_uncorrelated() {
    let incs = sampled(0.1, 200_000, 11);
    let p = products(&incs, |i| i.dw[0] * i.du().unwrap()[0]);
    assert!(z(&p, 0.0).abs() < 3.0);
    let q = quadrature(0.1, 32, 100_000, 12);
    let p = products(&q, |i| i.dw[0] * i.du().unwrap()[0]);
    assert!(z(&p, 0.0).abs() < 3.0);
}

#[test]
fn terminal_variance_of_generated_paths() {
    let finals: Vec<f64> = (0..100_000u64)
        .map(|s| {
            let p = generate_path(1, 1.0, 0.125, s).unwrap();
            assert_eq!(p.values().len(), 9);
            p.at(8)[0].powi(2)
        })
        .collect();
    assert!(z(&finals, 1.0).abs() < 3.0);
}

#[test]
fn variance_of_time_integral_from_quadrature() {
    let dt = 0.125;
    let q = quadrature(dt, 64, 100_000, 21);
    let sq = products(&q, |i| i.i_j0().unwrap()[0].powi(2));
    let zz = z(&sq, dt.powi(3) / 3.0);
    assert!(zz.abs() < 3.0, "z = {zz}");
    let ito = products(&q, |i| i.dw[0] * i.i_0j.as_ref().unwrap()[0]);
    assert!(z(&ito, dt * dt / 2.0).abs() < 3.0);
}

#[test]
fn scaling_law() {
    // increments at c·dt match (√c ΔW, c^{3/2} ΔU, c^{5/2} ΔV) at dt
    let (dt, c) = (0.05, 4.0);
    let small = sampled(dt, 200_000, 31);
    let large = sampled(c * dt, 200_000, 32);
    let moments: [(Moment, f64); 3] = [
        (|i| i.du().unwrap()[0].powi(2), 3.0),
        (|i| i.dv().unwrap()[0].powi(2), 5.0),
        (|i| i.du().unwrap()[0] * i.dv().unwrap()[0], 4.0),
    ];
    for (f, power) in moments {
        let a: Vec<f64> = small.iter().map(|i| f(i) * c.powf(power)).collect();
        let b = products(&large, f);
        let (ma, sa) = mean_se(&a);
        let (mb, sb) = mean_se(&b);
        let zz = (ma - mb) / (sa * sa + sb * sb).sqrt();
        assert!(zz.abs() < 3.0, "power {power}: z = {zz}");
    }
}

#[test]
fn sampling_and_quadrature_agree() {
    let dt = 0.1;
    let s = sampled(dt, 100_000, 41);
    let q = quadrature(dt, 64, 100_000, 42);
    let moments: [Moment; 3] = [
        |i| i.du().unwrap()[0].powi(2),
        |i| i.dv().unwrap()[0].powi(2),
        |i| i.du().unwrap()[0] * i.dv().unwrap()[0],
    ];
    let cov = increment_covariance(dt).unwrap();
    for (k, f) in moments.into_iter().enumerate() {
        let (ma, sa) = mean_se(&products(&s, f));
        let (mb, sb) = mean_se(&products(&q, f));
        let zz = (ma - mb) / (sa * sa + sb * sb).sqrt();
        assert!(zz.abs() < 3.0, "moment {k}: {ma:e} vs {mb:e}");
        let expected = [cov[(1, 1)], cov[(2, 2)], cov[(1, 2)]][k];
        assert!(((ma - expected) / sa).abs() < 3.0);
    }
}

#[test]
fn free_function_matches_quadrature_table() {
    let path = generate_path(2, 1.0, 1.0 / 256.0, 5).unwrap();
    let quad = PathQuadrature::new(1.0 / 256.0, 1.0 / 16.0).unwrap();
    for k in 0..16 {
        assert_eq!(
            integrals_from_path(&path, k, 1.0 / 16.0).unwrap(),
            quad.increments(&path, k).unwrap()
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn identity_holds_in_both_modes(seed in any::<u64>(), k in 0usize..8, log_dt in -6i32..=0) {
        let dt = 2f64.powi(log_dt);
        let mut rng = RngStream::new(seed, 1).step_rng(k as u64);
        let s = sample_increments(3, dt, &mut rng).unwrap();
        let i_0j = s.i_0j.clone().unwrap();
        let i_j0 = s.i_j0().unwrap();
        // I_(j,0) is assigned as Δt ΔW − I_(0,j), so the sum is exact up to one rounding
        prop_assert_eq!(i_j0, &(&s.dw * dt - &i_0j));
        for j in 0..3 {
            let bound = 2.0 * f64::EPSILON * (i_0j[j].abs() + i_j0[j].abs() + (s.dw[j] * dt).abs());
            prop_assert!((i_0j[j] + i_j0[j] - s.dw[j] * dt).abs() <= bound);
        }
        let delta = dt / 32.0;
        let path = generate_path(3, 8.0 * dt, delta, seed).unwrap();
        let q = PathQuadrature::new(delta, dt).unwrap().increments(&path, k).unwrap();
        prop_assert!(identity_residual(&q).unwrap() <= 1e-10);
    }
}
