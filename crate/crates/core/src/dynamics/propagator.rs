use std::collections::HashMap;

use super::State;

/// `exp(t·G)` for the single-mode generator `G = [[0, 1], [-λ, -λ]]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModePropagator {
    pub lambda: f64,
    pub t: f64,
    pub m: [[f64; 2]; 2],
}

impl ModePropagator {
    pub fn determinant(&self) -> f64 {
        self.m[0][0] * self.m[1][1] - self.m[0][1] * self.m[1][0]
    }

    #[inline]
    pub fn apply(&self, w: f64, v: f64) -> (f64, f64) {
        (self.m[0][0] * w + self.m[0][1] * v, self.m[1][0] * w + self.m[1][1] * v)
    }
}

/// Generator of a single mode.
pub fn generator(lambda: f64) -> [[f64; 2]; 2] {
    [[0.0, 1.0], [-lambda, -lambda]]
}

/// Roots `μ± = (−λ ± √(λ² − 4λ))/2` of `μ² + λμ + λ`, as (re, im) pairs.
pub fn characteristic_roots(lambda: f64) -> [(f64, f64); 2] {
    let disc = lambda * (lambda - 4.0);
    if disc < 0.0 {
        let im = (-disc).sqrt() / 2.0;
        [(-lambda / 2.0, im), (-lambda / 2.0, -im)]
    } else {
        let fast = (-lambda - disc.sqrt()) / 2.0;
        [(lambda / fast, 0.0), (fast, 0.0)]
    }
}

/// Decay rate `|Re μ_slow(λ)|` of the slowest component of a mode.
pub fn slow_rate(lambda: f64) -> f64 {
    let [(slow, _), _] = characteristic_roots(lambda);
    slow.abs()
}

/// `C(z) = Σ z^m/(2m)!` and `S(z) = Σ z^m/(2m+1)!` for `|z| < 1`.
fn even_odd_series(z: f64) -> (f64, f64) {
    let (mut c, mut s) = (0.0, 0.0);
    let mut term_c = 1.0;
    let mut term_s = 1.0;
    for m in 0..24 {
        c += term_c;
        s += term_s;
        let m = m as f64;
        term_c *= z / ((2.0 * m + 1.0) * (2.0 * m + 2.0));
        term_s *= z / ((2.0 * m + 2.0) * (2.0 * m + 3.0));
    }
    (c, s)
}

/// Exact `exp(t·G)`.
///
/// With `B = G + (λ/2)I` and `B² = δ²I`, `δ² = λ(λ−4)/4`, the exponential is
/// `e^{−λt/2}(C·I + S·B)` where `(C, S)` are `(cos ωt, sin(ωt)/ω)` in the
/// oscillatory regime `λ < 4` and `(cosh δt, sinh(δt)/δ)` in the overdamped
/// regime `λ > 4`. Near the double root `λ = 4` (any `|δt| < 1`) the pair is
/// summed as a power series in `δ²t²`, which keeps the three regimes
/// continuous to rounding. The overdamped regime is evaluated through the two
/// real exponentials so that neither factor overflows.
pub fn mode_propagator(lambda: f64, t: f64) -> ModePropagator {
    debug_assert!(lambda > 0.0 && t >= 0.0);
    let delta_sq = lambda * (lambda - 4.0) / 4.0;
    let z = delta_sq * t * t;
    let (ec, es) = if z.abs() < 1.0 {
        let e = (-lambda * t / 2.0).exp();
        let (c, s) = even_odd_series(z);
        (e * c, e * s * t)
    } else if delta_sq < 0.0 {
        let e = (-lambda * t / 2.0).exp();
        let omega = (-delta_sq).sqrt();
        (e * (omega * t).cos(), e * (omega * t).sin() / omega)
    } else {
        let fast = (-lambda - (4.0 * delta_sq).sqrt()) / 2.0;
        let slow = lambda / fast;
        let (ep, em) = ((slow * t).exp(), (fast * t).exp());
        ((ep + em) / 2.0, (ep - em) / (slow - fast))
    };
    let half = lambda / 2.0;
    ModePropagator {
        lambda,
        t,
        m: [[ec + es * half, es], [-es * lambda, ec - es * half]],
    }
}

/// Propagators keyed by the (integer) eigenvalue.
pub(crate) struct PropagatorCache {
    slots: Vec<usize>,
    table: Vec<ModePropagator>,
}

impl PropagatorCache {
    pub(crate) fn new(eigenvalues: &[f64], t: f64) -> Self {
        let mut seen: HashMap<u64, usize> = HashMap::new();
        let mut table = Vec::new();
        let slots = eigenvalues
            .iter()
            .map(|&lambda| {
                *seen.entry(lambda.to_bits()).or_insert_with(|| {
                    table.push(mode_propagator(lambda, t));
                    table.len() - 1
                })
            })
            .collect();
        Self { slots, table }
    }

    #[inline]
    pub(crate) fn get(&self, index: usize) -> &ModePropagator {
        &self.table[self.slots[index]]
    }
}

/// Linear semigroup `U(t)` of `u_tt − Δu_t − Δu = 0`, applied mode by mode.
pub fn apply_u(s: &State, t: f64) -> State {
    let basis = *s.basis();
    let eigenvalues = basis.eigenvalues();
    let cache = PropagatorCache::new(&eigenvalues, t);
    let mut out = s.clone();
    let (w, v) = (s.w.coeffs(), s.v.coeffs());
    let (ow, ov) = out.split_mut();
    for i in 0..w.len() {
        let (a, b) = cache.get(i).apply(w[i], v[i]);
        ow[i] = a;
        ov[i] = b;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    /// Scaled Taylor polynomial of degree 12 followed by repeated squaring.
    fn taylor_oracle(lambda: f64, t: f64) -> [[f64; 2]; 2] {
        let g = generator(lambda);
        let squarings = 10;
        let scale = t / f64::from(1u32 << squarings);
        let a = [[g[0][0] * scale, g[0][1] * scale], [g[1][0] * scale, g[1][1] * scale]];
        let mul = |x: [[f64; 2]; 2], y: [[f64; 2]; 2]| {
            let mut r = [[0.0; 2]; 2];
            for i in 0..2 {
                for j in 0..2 {
                    r[i][j] = x[i][0] * y[0][j] + x[i][1] * y[1][j];
                }
            }
            r
        };
        let mut sum = [[1.0, 0.0], [0.0, 1.0]];
        let mut term = sum;
        for k in 1..=12 {
            term = mul(term, a);
            for row in term.iter_mut() {
                for x in row.iter_mut() {
                    *x /= k as f64;
                }
            }
            for i in 0..2 {
                for j in 0..2 {
                    sum[i][j] += term[i][j];
                }
            }
        }
        for _ in 0..squarings {
            sum = mul(sum, sum);
        }
        sum
    }

    fn assert_close(m: [[f64; 2]; 2], oracle: [[f64; 2]; 2], tol: f64) {
        for i in 0..2 {
            for j in 0..2 {
                assert!((m[i][j] - oracle[i][j]).abs() < tol, "{m:?} vs {oracle:?}");
            }
        }
    }

    #[test]
    fn identity_at_zero() {
        for lambda in [0.5, 1.0, 4.0, 9.0, 1000.0] {
            assert_eq!(mode_propagator(lambda, 0.0).m, [[1.0, 0.0], [0.0, 1.0]]);
        }
    }

    #[test]
    fn double_root_matches_taylor_oracle() {
        let p = mode_propagator(4.0, 1.0);
        assert_close(p.m, taylor_oracle(4.0, 1.0), 1e-12);
        // closed double-root form e^{-2t}(I + t(G + 2I))
        let e = (-2.0f64).exp();
        assert_close(p.m, [[e * 3.0, e], [-4.0 * e, -e]], 1e-15);
    }

    #[test]
    fn all_branches_match_taylor_oracle() {
        for lambda in [1.0, 2.0, 3.0, 3.999, 4.0, 4.001, 5.0, 9.0, 17.0, 64.0] {
            for t in [1e-3, 0.1, 0.7, 2.0] {
                let scale = mode_propagator(lambda, t).m.iter().flatten().fold(1.0f64, |m, x| m.max(x.abs()));
                assert_close(mode_propagator(lambda, t).m, taylor_oracle(lambda, t), 1e-12 * scale);
            }
        }
    }

    #[test]
    fn oscillatory_branch_for_unit_eigenvalue() {
        // ω = √3/2, envelope e^{-t/2}; t = 2π/√3 is half an oscillation
        let half = 2.0 * PI / 3f64.sqrt();
        let envelope = (-PI / 3f64.sqrt()).exp();
        let p = mode_propagator(1.0, half);
        assert_close(p.m, [[-envelope, 0.0], [0.0, -envelope]], 1e-15);
        let (w, v) = p.apply(1.0, 0.0);
        assert!((w.abs() - 0.16303).abs() < 1e-5);
        assert!(v.abs() < 1e-15);

        let full = mode_propagator(1.0, 2.0 * half);
        let (w, v) = full.apply(1.0, 0.0);
        assert!((w - envelope * envelope).abs() < 1e-15);
        assert!(v.abs() < 1e-15);
    }

    #[test]
    fn continuous_across_double_root() {
        for t in [0.5, 3.0, 20.0] {
            let below = mode_propagator(4.0 - 1e-9, t).m;
            let at = mode_propagator(4.0, t).m;
            let above = mode_propagator(4.0 + 1e-9, t).m;
            assert_close(below, at, 1e-8 * t);
            assert_close(above, at, 1e-8 * t);
        }
        // regime switch at |δt| = 1 is seamless
        let lambda: f64 = 4.0 + 1e-3;
        let delta = (lambda * (lambda - 4.0)).sqrt() / 2.0;
        let t0 = 1.0 / delta;
        let a = mode_propagator(lambda, t0 * (1.0 - 1e-12)).m;
        let b = mode_propagator(lambda, t0 * (1.0 + 1e-12)).m;
        assert_close(a, b, 1e-12);
    }

    #[test]
    fn liouville_determinant() {
        for lambda in [1.0, 3.0, 4.0, 6.0, 50.0, 400.0] {
            for t in [0.01, 0.5, 1.0, 3.0] {
                let p = mode_propagator(lambda, t);
                let expected = (-lambda * t).exp();
                assert!((p.determinant() - expected).abs() < 1e-13, "λ={lambda} t={t}");
            }
        }
    }

    #[test]
    fn slow_rates() {
        assert!((slow_rate(1.0) - 0.5).abs() < 1e-15);
        assert!((slow_rate(3.0) - 1.5).abs() < 1e-15);
        assert!((slow_rate(4.0) - 2.0).abs() < 1e-15);
        assert!((slow_rate(9.0) - (9.0 - 45f64.sqrt()) / 2.0).abs() < 1e-14);
        assert!((slow_rate(1e6) - 1.0).abs() < 1e-5);
    }
}
