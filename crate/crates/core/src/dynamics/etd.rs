//! Per-mode exponential-integrator coefficients.
//!
//! For a mode with generator `G` and forcing entering the velocity row, one
//! step of size `h` needs `exp(hG)`, `h·φ₁(hG)e₂` and `h·φ₂(hG)e₂`. The φ
//! columns are read off the exponential of the augmented 4×4 matrix
//! `[[hG, e₂, 0], [0, 0, 1], [0, 0, 0]]`, whose last two columns carry
//! `φ₁(hG)e₂` and `φ₂(hG)e₂`. The exponential is evaluated by scaling and
//! squaring around a truncated Taylor series, which avoids the cancellation
//! that the closed forms `(hG)⁻¹(e^{hG} − I)` suffer for small `h`.

use std::collections::HashMap;
use std::num::NonZeroUsize;

use gauss_quad::legendre::GaussLegendre;

use super::propagator::{generator, mode_propagator};

type Mat4 = [[f64; 4]; 4];

fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut out = [[0.0; 4]; 4];
    for i in 0..4 {
        for k in 0..4 {
            let aik = a[i][k];
            if aik != 0.0 {
                for j in 0..4 {
                    out[i][j] += aik * b[k][j];
                }
            }
        }
    }
    out
}

fn expm4(m: &Mat4) -> Mat4 {
    let norm = (0..4).map(|j| (0..4).map(|i| m[i][j].abs()).sum::<f64>()).fold(0.0, f64::max);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scale = 0.5f64.powi(squarings);
    let a: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| m[i][j] * scale));
    let mut sum: Mat4 = std::array::from_fn(|i| std::array::from_fn(|j| if i == j { 1.0 } else { 0.0 }));
    let mut term = sum;
    for k in 1..=20 {
        term = mat4_mul(&term, &a);
        for row in term.iter_mut() {
            for x in row.iter_mut() {
                *x /= k as f64;
            }
        }
        for i in 0..4 {
            for j in 0..4 {
                sum[i][j] += term[i][j];
            }
        }
    }
    for _ in 0..squarings {
        sum = mat4_mul(&sum, &sum);
    }
    sum
}

/// `(φ₁(hG)e₂, φ₂(hG)e₂)`.
pub fn phi_columns(lambda: f64, h: f64) -> ([f64; 2], [f64; 2]) {
    let g = generator(lambda);
    let mut m = [[0.0; 4]; 4];
    for i in 0..2 {
        for j in 0..2 {
            m[i][j] = h * g[i][j];
        }
    }
    m[1][2] = 1.0;
    m[2][3] = 1.0;
    let e = expm4(&m);
    ([e[0][2], e[1][2]], [e[0][3], e[1][3]])
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeCoefficients {
    pub exp: [[f64; 2]; 2],
    /// `h·φ₁(hG)e₂`
    pub phi1: [f64; 2],
    /// `h·φ₂(hG)e₂`
    pub phi2: [f64; 2],
}

impl ModeCoefficients {
    pub fn new(lambda: f64, h: f64) -> Self {
        let (p1, p2) = phi_columns(lambda, h);
        Self {
            exp: mode_propagator(lambda, h).m,
            phi1: [h * p1[0], h * p1[1]],
            phi2: [h * p2[0], h * p2[1]],
        }
    }
}

/// `∫₀ʰ λ b(s)b(s)ᵀ ds`, where `b(s)·(w, v, n_a, n_b − n_a)` is the velocity of
/// the dense output `E(s)x + sφ₁(sG)e₂n_a + (s²/h)φ₂(sG)e₂(n_b − n_a)`.
/// Panels are sized so that `λ·panel ≤ 2`.
pub fn dissipation_gram(lambda: f64, h: f64, rule: &GaussLegendre) -> [[f64; 4]; 4] {
    let panels = (lambda * h / 2.0).ceil().max(1.0) as usize;
    let width = h / panels as f64;
    let mut gram = [[0.0; 4]; 4];
    for p in 0..panels {
        let a = p as f64 * width;
        for &(x, wt) in rule.as_node_weight_pairs() {
            let s = a + 0.5 * width * (x + 1.0);
            let e = mode_propagator(lambda, s).m;
            let (p1, p2) = phi_columns(lambda, s);
            let b = [e[1][0], e[1][1], s * p1[1], s * s / h * p2[1]];
            let weight = 0.5 * width * wt * lambda;
            for i in 0..4 {
                for j in 0..4 {
                    gram[i][j] += weight * b[i] * b[j];
                }
            }
        }
    }
    gram
}

/// Coefficients for every slot of a basis, shared between equal eigenvalues,
/// at the full step and at the half step used for dense output.
#[derive(Debug, Clone)]
pub struct EtdTable {
    dt: f64,
    slots: Vec<usize>,
    table: Vec<ModeCoefficients>,
    half: Vec<ModeCoefficients>,
    grams: Vec<[[f64; 4]; 4]>,
}

impl EtdTable {
    pub fn new(eigenvalues: &[f64], dt: f64) -> Self {
        let mut seen: HashMap<u64, usize> = HashMap::new();
        let rule = GaussLegendre::new(NonZeroUsize::new(16).expect("nonzero"));
        let (mut table, mut half, mut grams) = (Vec::new(), Vec::new(), Vec::new());
        let slots = eigenvalues
            .iter()
            .map(|&lambda| {
                *seen.entry(lambda.to_bits()).or_insert_with(|| {
                    table.push(ModeCoefficients::new(lambda, dt));
                    half.push(ModeCoefficients::new(lambda, 0.5 * dt));
                    grams.push(dissipation_gram(lambda, dt, &rule));
                    table.len() - 1
                })
            })
            .collect();
        Self { dt, slots, table, half, grams }
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    #[inline]
    pub fn get(&self, index: usize) -> &ModeCoefficients {
        &self.table[self.slots[index]]
    }

    #[inline]
    pub fn get_half(&self, index: usize) -> &ModeCoefficients {
        &self.half[self.slots[index]]
    }

    #[inline]
    pub fn gram(&self, index: usize) -> &[[f64; 4]; 4] {
        &self.grams[self.slots[index]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Composite Gauss-Legendre quadrature of `∫_0^1 e^{(1−θ)hG} e₂ ψ(θ) dθ`
    /// using the closed-form propagator.
    fn quadrature_oracle(lambda: f64, h: f64, weight: impl Fn(f64) -> f64) -> [f64; 2] {
        let nodes = [-0.906179845938664, -0.5384693101056831, 0.0, 0.5384693101056831, 0.906179845938664];
        let weights = [0.23692688505618908, 0.47862867049936647, 0.5688888888888889, 0.47862867049936647, 0.23692688505618908];
        let panels = 4000;
        let mut acc = [0.0; 2];
        for p in 0..panels {
            let (a, b) = (p as f64 / panels as f64, (p + 1) as f64 / panels as f64);
            for (x, wq) in nodes.iter().zip(weights) {
                let theta = 0.5 * (a + b) + 0.5 * (b - a) * x;
                let m = mode_propagator(lambda, (1.0 - theta) * h).m;
                let scale = wq * 0.5 * (b - a) * weight(theta);
                acc[0] += scale * m[0][1];
                acc[1] += scale * m[1][1];
            }
        }
        acc
    }

    #[test]
    fn phi_functions_match_quadrature() {
        for lambda in [1.0, 3.0, 4.0, 9.0, 256.0, 3000.0] {
            for h in [1e-4, 1e-3, 0.05, 0.5] {
                let (p1, p2) = phi_columns(lambda, h);
                let q1 = quadrature_oracle(lambda, h, |_| 1.0);
                let q2 = quadrature_oracle(lambda, h, |t| t);
                for i in 0..2 {
                    let scale = q1[i].abs().max(1e-3);
                    assert!((p1[i] - q1[i]).abs() < 1e-11 * scale.max(1.0), "φ1 λ={lambda} h={h}: {p1:?} {q1:?}");
                    assert!((p2[i] - q2[i]).abs() < 1e-11 * scale.max(1.0), "φ2 λ={lambda} h={h}: {p2:?} {q2:?}");
                }
            }
        }
    }

    #[test]
    fn phi_limits_at_small_step() {
        // φ₁(0) = I and φ₂(0) = I/2
        let (p1, p2) = phi_columns(5.0, 1e-12);
        assert!((p1[1] - 1.0).abs() < 1e-10 && p1[0].abs() < 1e-10);
        assert!((p2[1] - 0.5).abs() < 1e-10 && p2[0].abs() < 1e-10);
    }

    #[test]
    fn table_shares_equal_eigenvalues() {
        let table = EtdTable::new(&[2.0, 5.0, 5.0, 8.0], 0.01);
        assert_eq!(table.table.len(), 3);
        assert_eq!(table.get(1), table.get(2));
    }

    #[test]
    fn gram_integrates_constant_forcing_exactly() {
        // with constant n the solution is E(s)(w − n/λ, v) + (n/λ, 0)
        let rule = GaussLegendre::new(NonZeroUsize::new(16).unwrap());
        for (lambda, h) in [(1.0, 0.1), (37.0, 0.02), (900.0, 0.01)] {
            let (w, v, n) = (0.3, -1.1, 2.5);
            let m = dissipation_gram(lambda, h, &rule);
            let z = [w, v, n, 0.0];
            let quad: f64 = (0..4).flat_map(|a| (0..4).map(move |b| (a, b))).map(|(a, b)| z[a] * m[a][b] * z[b]).sum();
            let panels = 20000;
            let velocity = |s: f64| mode_propagator(lambda, s).apply(w - n / lambda, v).1;
            let mut oracle = 0.0;
            for p in 0..panels {
                let (a, b) = (p as f64 * h / panels as f64, (p + 1) as f64 * h / panels as f64);
                let f = |s: f64| lambda * velocity(s).powi(2);
                oracle += (b - a) / 6.0 * (f(a) + 4.0 * f(0.5 * (a + b)) + f(b));
            }
            assert!((quad - oracle).abs() <= 1e-10 * oracle.abs(), "λ={lambda}: {quad} vs {oracle}");
        }
    }
}
