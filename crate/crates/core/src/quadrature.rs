//! Gauss–Legendre rules and shifted Legendre polynomials on `[0, 1]`.

use std::f64::consts::PI;

/// Nodes and weights of the `m`-point Gauss–Legendre rule mapped to `[0, 1]`.
#[derive(Debug, Clone)]
pub struct GaussLegendre {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussLegendre {
    pub fn new(m: usize) -> Self {
        assert!(m > 0, "rule needs at least one node");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            // Tricomi initial guess, then Newton on P_m
            let mut z = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, d) = legendre_with_derivative(m, z);
                let step = p / d;
                z -= step;
                if step.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre_with_derivative(m, z);
            let w = 2.0 / ((1.0 - z * z) * dp * dp);
            // map [-1, 1] → [0, 1]
            nodes[i] = 0.5 * (1.0 - z);
            nodes[m - 1 - i] = 0.5 * (1.0 + z);
            weights[i] = 0.5 * w;
            weights[m - 1 - i] = 0.5 * w;
        }
        GaussLegendre { nodes, weights }
    }

    /// ∫₀¹ g(u) du.
    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&u, &w)| w * g(u)).sum()
    }
}

/// `(P_m(z), P_m'(z))` on `[-1, 1]` by the three-term recurrence.
fn legendre_with_derivative(m: usize, z: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, z);
    if m == 0 {
        return (1.0, 0.0);
    }
    for k in 2..=m {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * z * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    let d = m as f64 * (z * p1 - p0) / (z * z - 1.0);
    (p1, d)
}

/// Shifted Legendre polynomials `P_0..=P_k` evaluated at `u ∈ [0, 1]`.
pub fn shifted_legendre(k: usize, u: f64) -> Vec<f64> {
    let z = 2.0 * u - 1.0;
    let mut out = Vec::with_capacity(k + 1);
    out.push(1.0);
    if k >= 1 {
        out.push(z);
    }
    for j in 2..=k {
        let jf = j as f64;
        let p = ((2.0 * jf - 1.0) * z * out[j - 1] - (jf - 1.0) * out[j - 2]) / jf;
        out.push(p);
    }
    out
}
