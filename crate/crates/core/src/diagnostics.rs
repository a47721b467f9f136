//! Energy functionals and quantitative audits of trajectories and of the
//! linear semigroup.

use rayon::prelude::*;
use serde::Serialize;

use crate::dynamics::{apply_u, mode_propagator, simulate, slow_rate, DynamicsError, SolverConfig, State, TrajectoryRecord};
use crate::model::{functional_integral, ModelError, ModelSpec};
use crate::sampling::{self, Ball};
use crate::spectral::{BasisSpec, GridField, SpectralField};

/// `E = ½(‖∇w‖² + ‖w_t‖²)`.
pub fn energy(s: &State) -> f64 {
    let l = s.basis().eigenvalues();
    0.5 * (s.w.weighted_square(&l, 1) + s.v.weighted_square(&l, 0))
}

/// `L = E + ∫F(w) − ⟨g, w⟩`.
pub fn lyapunov(model: &ModelSpec, s: &State) -> Result<f64, ModelError> {
    let big_f = &model.nonlinearity().big_f;
    let potential = if big_f.coeffs().is_empty() { 0.0 } else { functional_integral(|x| big_f.eval(x), &s.w)? };
    let work = model.forcing().inner_product(&s.w)?;
    Ok(energy(s) + potential - work)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnergyLedger {
    pub times: Vec<f64>,
    pub energy: Vec<f64>,
    pub lyapunov: Vec<f64>,
    pub diss_grad: Vec<f64>,
    pub diss_sigma: Vec<f64>,
    /// `|L(t) + D(t) − L(0)|` with `D` the accumulated dissipation.
    pub residual: Vec<f64>,
    /// Same balance over each snapshot interval; the first entry is 0.
    pub interval_residual: Vec<f64>,
    pub max_residual: f64,
    pub max_interval_residual: f64,
}

pub fn audit_energy_equality(model: &ModelSpec, rec: &TrajectoryRecord) -> Result<EnergyLedger, ModelError> {
    let energy: Vec<f64> = rec.states.iter().map(energy).collect();
    let lyapunov = rec.states.iter().map(|s| lyapunov(model, s)).collect::<Result<Vec<_>, _>>()?;
    let dissipated: Vec<f64> = rec.diss_grad.iter().zip(&rec.diss_sigma).map(|(a, b)| a + b).collect();
    let l0 = lyapunov[0];
    let residual: Vec<f64> = lyapunov.iter().zip(&dissipated).map(|(l, d)| (l + d - l0).abs()).collect();
    let mut interval_residual = vec![0.0];
    for j in 1..lyapunov.len() {
        interval_residual.push((lyapunov[j] - lyapunov[j - 1] + dissipated[j] - dissipated[j - 1]).abs());
    }
    Ok(EnergyLedger {
        times: rec.times.clone(),
        max_residual: residual.iter().copied().fold(0.0, f64::max),
        max_interval_residual: interval_residual.iter().copied().fold(0.0, f64::max),
        energy,
        lyapunov,
        diss_grad: rec.diss_grad.clone(),
        diss_sigma: rec.diss_sigma.clone(),
        residual,
        interval_residual,
    })
}

/// Max energy residual over a common horizon for a ladder of step sizes.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OrderStudy {
    pub dts: Vec<f64>,
    pub max_residuals: Vec<f64>,
    /// `residual(dt_j) / residual(dt_{j+1})`
    pub ratios: Vec<f64>,
    pub orders: Vec<f64>,
}

impl OrderStudy {
    fn from_errors(dts: Vec<f64>, errors: Vec<f64>) -> Self {
        let ratios: Vec<f64> = errors.windows(2).map(|p| p[0] / p[1]).collect();
        let orders = ratios.iter().zip(dts.windows(2)).map(|(r, d)| r.ln() / (d[0] / d[1]).ln()).collect();
        Self { dts, max_residuals: errors, ratios, orders }
    }

    pub fn min_ratio(&self) -> f64 {
        self.ratios.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

pub fn energy_order_study(model: &ModelSpec, s0: &State, horizon: f64, dts: &[f64]) -> Result<OrderStudy, DynamicsError> {
    let errors = dts
        .par_iter()
        .map(|&dt| {
            let rec = simulate(model, s0, &SolverConfig::new(dt, horizon))?;
            Ok(audit_energy_equality(model, &rec)?.max_residual)
        })
        .collect::<Result<Vec<_>, DynamicsError>>()?;
    Ok(OrderStudy::from_errors(dts.to_vec(), errors))
}

/// Step-by-step check of the Lyapunov descent and of the dissipation identity
/// against the slack `c·dt²·(1 + ‖s‖_H⁴)`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LyapunovAudit {
    pub slack_constant: f64,
    /// Largest `L(t_{n+1}) − L(t_n) − slack_n`; nonpositive when descent holds.
    pub max_increase_excess: f64,
    /// Largest `|ΔL + ΔD| − slack_n`.
    pub max_identity_excess: f64,
    pub passed: bool,
}

pub fn lyapunov_audit(model: &ModelSpec, rec: &TrajectoryRecord, slack_constant: f64) -> Result<LyapunovAudit, ModelError> {
    let ledger = audit_energy_equality(model, rec)?;
    let (mut inc, mut ident) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    for j in 1..rec.len() {
        let h = rec.times[j] - rec.times[j - 1];
        let norm = rec.states[j - 1].h_norm().max(rec.states[j].h_norm());
        let slack = slack_constant * h * h * (1.0 + norm.powi(4));
        inc = inc.max(ledger.lyapunov[j] - ledger.lyapunov[j - 1] - slack);
        ident = ident.max(ledger.interval_residual[j] - slack);
    }
    Ok(LyapunovAudit {
        slack_constant,
        max_increase_excess: inc,
        max_identity_excess: ident,
        passed: inc <= 0.0 && ident <= 0.0,
    })
}

/// `‖D_out M D_in⁻¹‖₂` for a 2×2 mode matrix.
fn weighted_norm(m: &[[f64; 2]; 2], out: [f64; 2], inv_in: [f64; 2]) -> f64 {
    let a = out[0] * m[0][0] * inv_in[0];
    let b = out[0] * m[0][1] * inv_in[1];
    let c = out[1] * m[1][0] * inv_in[0];
    let d = out[1] * m[1][1] * inv_in[1];
    let fro = a * a + b * b + c * c + d * d;
    let det = a * d - b * c;
    let disc = (fro * fro - 4.0 * det * det).max(0.0).sqrt();
    (0.5 * (fro + disc)).sqrt()
}

/// Norm of `U(t)` on `H₁ = (H² ∩ H¹₀) × H¹₀` restricted to one mode.
pub fn mode_norm_h1(lambda: f64, t: f64) -> f64 {
    let s = lambda.sqrt();
    weighted_norm(&mode_propagator(lambda, t).m, [lambda, s], [1.0 / lambda, 1.0 / s])
}

/// Norm of `U(t)` from `(H² ∩ H¹₀) × L₂` to `H₁` restricted to one mode.
pub fn mode_smoothing_norm(lambda: f64, t: f64) -> f64 {
    weighted_norm(&mode_propagator(lambda, t).m, [lambda, lambda.sqrt()], [1.0 / lambda, 1.0])
}

fn distinct_eigenvalues(basis: &BasisSpec) -> Vec<f64> {
    let mut l = basis.eigenvalues();
    l.sort_by(f64::total_cmp);
    l.dedup();
    l
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DecayReport {
    pub probes: usize,
    pub horizon: f64,
    /// `min_k |Re μ_slow(λ_k)|`
    pub analytic_rate: f64,
    pub fitted_rate: f64,
    /// `exp` of the intercept of the tail fit.
    pub prefactor: f64,
    /// `sup_t e^{ω t}·max_probe ‖U(t)φ‖_{H₁}` with the analytic `ω`.
    pub peak_prefactor: f64,
    /// `(λ, |Re μ_slow(λ)|)` per distinct eigenvalue.
    pub mode_rates: Vec<(f64, f64)>,
    pub max_relative_deviation: f64,
    pub times: Vec<f64>,
    pub amplitudes: Vec<f64>,
}

/// Least squares line through `(x, y)`; returns `(slope, intercept)`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Evolve random unit `H₁` probes under `U` and fit the decay of the largest
/// response over the last half of the horizon.
pub fn measure_decay(basis: BasisSpec, probes: usize, horizon: f64, seed: u64) -> DecayReport {
    let mode_rates: Vec<(f64, f64)> = distinct_eigenvalues(&basis).into_iter().map(|l| (l, slow_rate(l))).collect();
    let analytic_rate = mode_rates.iter().map(|m| m.1).fold(f64::INFINITY, f64::min);
    let mut rng = sampling::rng(seed);
    let probe_states: Vec<State> =
        (0..probes.max(1)).map(|_| sampling::random_direction(basis, Ball::Regular, &mut rng)).collect();
    let samples = 2000;
    let times: Vec<f64> = (0..=samples).map(|i| horizon * i as f64 / samples as f64).collect();
    let amplitudes: Vec<f64> = times
        .par_iter()
        .map(|&t| probe_states.iter().map(|p| apply_u(p, t).h1_norm()).fold(0.0, f64::max))
        .collect();
    let tail = samples / 2;
    let logs: Vec<f64> = amplitudes[tail..].iter().map(|a| a.ln()).collect();
    let (slope, intercept) = linear_fit(&times[tail..], &logs);
    let fitted_rate = -slope;
    let peak_prefactor =
        times.iter().zip(&amplitudes).map(|(t, a)| a * (analytic_rate * t).exp()).fold(0.0, f64::max);
    DecayReport {
        probes,
        horizon,
        analytic_rate,
        fitted_rate,
        prefactor: intercept.exp(),
        peak_prefactor,
        mode_rates,
        max_relative_deviation: (fitted_rate - analytic_rate).abs() / analytic_rate,
        times,
        amplitudes,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SmoothingReport {
    pub times: Vec<f64>,
    /// `A(t) = ‖U(t)‖` from `(H² ∩ H¹₀) × L₂` to `H₁`.
    pub amplification: Vec<f64>,
    /// Same with the velocity component of the probe set to zero.
    pub position_amplification: Vec<f64>,
    pub sup_scaled: f64,
    pub argmax_time: f64,
}

/// Exact amplification from the mode matrices; the operator is block
/// diagonal so its norm is the largest mode norm.
pub fn measure_smoothing(basis: BasisSpec, times: &[f64]) -> SmoothingReport {
    let eigs = distinct_eigenvalues(&basis);
    let amplification: Vec<f64> =
        times.iter().map(|&t| eigs.iter().map(|&l| mode_smoothing_norm(l, t)).fold(0.0, f64::max)).collect();
    let position_amplification = times
        .iter()
        .map(|&t| {
            eigs.iter()
                .map(|&l| {
                    let m = mode_propagator(l, t).m;
                    (m[0][0].powi(2) + m[1][0].powi(2) / l).sqrt()
                })
                .fold(0.0, f64::max)
        })
        .collect();
    let (mut sup_scaled, mut argmax_time) = (0.0, f64::NAN);
    for (t, a) in times.iter().zip(&amplification) {
        if t.sqrt() * a > sup_scaled {
            sup_scaled = t.sqrt() * a;
            argmax_time = *t;
        }
    }
    SmoothingReport { times: times.to_vec(), amplification, position_amplification, sup_scaled, argmax_time }
}

/// `count` times spaced evenly in `log t` over `[lo, hi]`.
pub fn log_times(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    let (a, b) = (lo.ln(), hi.ln());
    (0..count).map(|i| (a + (b - a) * i as f64 / (count - 1) as f64).exp()).collect()
}

/// `(‖w‖²_{H¹} + ‖v‖²_{H⁻¹})^{1/2}`.
pub fn weak_norm(s: &State) -> f64 {
    let l = s.basis().eigenvalues();
    (s.w.weighted_square(&l, 1) + s.v.weighted_square(&l, -1)).sqrt()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DependenceReport {
    pub horizon: f64,
    pub deltas: Vec<f64>,
    /// `‖w − ŵ‖²_{H¹}(T) + ‖w_t − ŵ_t‖²_{H⁻¹}(T)`
    pub responses: Vec<f64>,
    pub ratios: Vec<f64>,
    /// `r_j / δ_j²`; constant when the flow is Lipschitz in the perturbation.
    pub quadratic_ratios: Vec<f64>,
    pub max_over_min: f64,
    /// Response for two runs from the same data.
    pub identical_response: f64,
}

/// Compare runs from `s0` and `s0 + δ_j·direction` with `δ_j = δ₀·2^{−j}`.
pub fn continuous_dependence(
    model: &ModelSpec,
    s0: &State,
    direction: &State,
    horizon: f64,
    ladder: usize,
    delta0: f64,
    dt: f64,
) -> Result<DependenceReport, DynamicsError> {
    if ladder < 1 {
        return Err(DynamicsError::Config("ladder needs at least one rung".into()));
    }
    let dir = direction.scaled(1.0 / weak_norm(direction));
    let cfg = SolverConfig::new(dt, horizon).with_stride(usize::MAX);
    let reference = simulate(model, s0, &cfg)?;
    let twin = simulate(model, s0, &cfg)?;
    let response = |other: &State| weak_norm(&reference.last().sub(other)).powi(2);
    let deltas: Vec<f64> = (0..ladder).map(|j| delta0 * 0.5f64.powi(j as i32)).collect();
    let responses = deltas
        .par_iter()
        .map(|&d| {
            let mut start = s0.clone();
            start.axpy(d, &dir);
            Ok(response(simulate(model, &start, &cfg)?.last()))
        })
        .collect::<Result<Vec<_>, DynamicsError>>()?;
    let ratios: Vec<f64> = responses.iter().zip(&deltas).map(|(r, d)| r / d).collect();
    let quadratic_ratios = responses.iter().zip(&deltas).map(|(r, d)| r / (d * d)).collect();
    let max = ratios.iter().copied().fold(0.0, f64::max);
    let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(DependenceReport {
        horizon,
        identical_response: response(twin.last()),
        deltas,
        responses,
        ratios,
        quadratic_ratios,
        max_over_min: max / min,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NemytskiiReport {
    pub exponent: f64,
    /// `‖v_n − v‖_{L₆}`
    pub input_distances: Vec<f64>,
    /// `‖φ(v_n) − φ(v)‖_{L_{6/r}}`
    pub distances: Vec<f64>,
    pub monotone: bool,
    pub passed: bool,
}

/// Composed distances along `sequence → v` on the grid; passes when they
/// decrease and the last one is below `tol`.
pub fn nemytskii_continuity_check(
    phi: impl Fn(f64) -> f64,
    v: &GridField,
    sequence: &[GridField],
    r: f64,
    tol: f64,
) -> NemytskiiReport {
    let target = v.map(&phi);
    let p = 6.0 / r;
    let diff = |a: &GridField, b: &GridField| {
        let values = a.values().iter().zip(b.values()).map(|(x, y)| x - y).collect();
        GridField::from_values(*a.basis(), values).expect("same grid")
    };
    let input_distances = sequence.iter().map(|vn| diff(vn, v).lp_norm(6.0)).collect();
    let distances: Vec<f64> = sequence.iter().map(|vn| diff(&vn.map(&phi), &target).lp_norm(p)).collect();
    let monotone = distances.windows(2).all(|d| d[1] <= d[0]);
    let last = distances.last().copied().unwrap_or(f64::INFINITY);
    NemytskiiReport { exponent: r, input_distances, distances, monotone, passed: monotone && last < tol }
}

/// `v_n = v + 10^{−n}·h` for a seeded random `h` of unit `L₆` norm, `n = 1..=steps`.
pub fn nemytskii_sequence(v: &SpectralField, steps: usize, seed: u64) -> Vec<GridField> {
    let mut rng = sampling::rng(seed);
    let basis = *v.basis();
    let h = sampling::random_field(basis, 1.0, &mut rng).to_grid();
    let h = h.map(|x| x / h.lp_norm(6.0));
    let base = v.to_grid();
    (1..=steps)
        .map(|n| {
            let eps = 10f64.powi(-(n as i32));
            let values = base.values().iter().zip(h.values()).map(|(a, b)| a + eps * b).collect();
            GridField::from_values(basis, values).expect("same grid")
        })
        .collect()
}

/// Running supremum of `‖(w, w_t)‖_{H₁}` and the functional
/// `Φ = ½‖∇w_t‖² + ½(1+μ)‖Δw‖² + μ⟨∇w_t, ∇w⟩ + ⟨g, Δw⟩`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BoundTracker {
    pub mu: f64,
    pub times: Vec<f64>,
    pub norms: Vec<f64>,
    pub running_sup: Vec<f64>,
    pub phi: Vec<f64>,
}

pub const DEFAULT_MU: f64 = 0.1;

impl BoundTracker {
    pub fn new(mu: f64) -> Self {
        Self { mu, times: Vec::new(), norms: Vec::new(), running_sup: Vec::new(), phi: Vec::new() }
    }

    pub fn from_record(model: &ModelSpec, rec: &TrajectoryRecord, mu: f64) -> Self {
        let mut tracker = Self::new(mu);
        for (t, s) in rec.times.iter().zip(&rec.states) {
            tracker.observe(model, *t, s);
        }
        tracker
    }

    pub fn observe(&mut self, model: &ModelSpec, t: f64, s: &State) {
        let l = s.basis().eigenvalues();
        let norm = s.h1_norm();
        let cross: f64 = s.w.coeffs().iter().zip(s.v.coeffs()).zip(&l).map(|((w, v), l)| l * w * v).sum();
        let forcing: f64 = model.forcing().coeffs().iter().zip(s.w.coeffs()).zip(&l).map(|((g, w), l)| -l * g * w).sum();
        let phi = 0.5 * s.v.weighted_square(&l, 1) + 0.5 * (1.0 + self.mu) * s.w.weighted_square(&l, 2)
            + self.mu * cross
            + forcing;
        let sup = self.running_sup.last().copied().unwrap_or(0.0).max(norm);
        self.times.push(t);
        self.norms.push(norm);
        self.running_sup.push(sup);
        self.phi.push(phi);
    }

    pub fn sup(&self) -> f64 {
        self.running_sup.last().copied().unwrap_or(0.0)
    }

    /// Running supremum at the first sample at or after half the final time.
    pub fn half_time_sup(&self) -> f64 {
        let half = 0.5 * self.times.last().copied().unwrap_or(0.0);
        let idx = self.times.iter().position(|&t| t >= half).unwrap_or(0);
        self.running_sup.get(idx).copied().unwrap_or(0.0)
    }

    /// `sup_{[0,T]} / sup_{[0,T/2]}`; close to 1 once the bound has settled.
    pub fn growth_ratio(&self) -> f64 {
        self.sup() / self.half_time_sup()
    }

    pub fn is_finite(&self) -> bool {
        self.norms.iter().chain(&self.phi).all(|x| x.is_finite())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{DampingSpec, SourceSpec};
    use crate::spectral::MultiIndex;
    use std::f64::consts::PI;

    #[test]
    fn energy_of_unit_first_mode() {
        let b = BasisSpec::new(1, 4).unwrap();
        let w = SpectralField::unit(b, &MultiIndex::new(&[1]).unwrap()).unwrap();
        let s = State::new(w, SpectralField::zeros(b)).unwrap();
        assert!((energy(&s) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn lyapunov_of_zero_and_of_sine() {
        let b = BasisSpec::new(1, 8).unwrap();
        let cubic = ModelSpec::new(b, SourceSpec::Cubic { a: 0.0 }, DampingSpec::Zero, SpectralField::zeros(b)).unwrap();
        assert_eq!(lyapunov(&cubic, &State::zeros(b)).unwrap(), 0.0);
        let mut w = SpectralField::zeros(b);
        w.coeffs_mut()[0] = (PI / 2.0).sqrt();
        let s = State::new(w, SpectralField::zeros(b)).unwrap();
        let expected = PI / 4.0 + 3.0 * PI / 32.0;
        assert!((lyapunov(&cubic, &s).unwrap() - expected).abs() < 1e-12);
        assert!((expected - 1.079922).abs() < 1e-6);
    }

    #[test]
    fn linear_mode_dissipation_matches_closed_form() {
        let b = BasisSpec::new(1, 3).unwrap();
        let model = ModelSpec::linear(b);
        let mut w = SpectralField::zeros(b);
        w.coeffs_mut()[1] = 1.0;
        let s0 = State::new(w, SpectralField::zeros(b)).unwrap();
        let rec = simulate(&model, &s0, &SolverConfig::new(1e-3, 2.0).with_stride(100)).unwrap();
        let ledger = audit_energy_equality(&model, &rec).unwrap();
        assert!(ledger.max_residual < 1e-6, "{}", ledger.max_residual);
        // L(0) − L(T) is the exact dissipated amount for the linear flow
        let exact = ledger.lyapunov[0] - ledger.lyapunov.last().unwrap();
        assert!((rec.diss_grad.last().unwrap() - exact).abs() < 1e-6);
    }

    #[test]
    fn equilibrium_has_zero_residual() {
        let b = BasisSpec::new(1, 4).unwrap();
        let model = ModelSpec::linear(b);
        let rec = simulate(&model, &State::zeros(b), &SolverConfig::new(0.01, 1.0)).unwrap();
        let ledger = audit_energy_equality(&model, &rec).unwrap();
        assert_eq!(ledger.max_residual, 0.0);
    }

    #[test]
    fn residual_converges_at_second_order() {
        let b = BasisSpec::new(1, 8).unwrap();
        let model = ModelSpec::cubic_quartic(b, 1.0);
        let s0 = sampling::ensemble(b, Ball::Regular, 2.0, 1, 5).remove(0);
        let study = energy_order_study(&model, &s0, 2.0, &[0.02, 0.01, 0.005]).unwrap();
        assert!(study.min_ratio() >= 3.5, "{study:?}");
    }

    #[test]
    fn decay_rates_of_single_modes() {
        for (d, rate) in [(1, 0.5), (3, 1.5)] {
            let b = BasisSpec::new(d, 1).unwrap();
            let report = measure_decay(b, 16, 40.0 / rate, 7);
            assert_eq!(report.analytic_rate, rate);
            assert!(report.max_relative_deviation < 0.02, "{report:?}");
            assert!(report.prefactor >= 1.0 && report.prefactor <= 3.0, "{}", report.prefactor);
        }
        let report = measure_decay(BasisSpec::new(1, 4).unwrap(), 16, 80.0, 7);
        assert_eq!(report.analytic_rate, 0.5);
    }

    #[test]
    fn smoothing_is_finite_and_stable_in_n() {
        let times = log_times(1e-4, 1.0, 400);
        let coarse = measure_smoothing(BasisSpec::new(1, 16).unwrap(), &times);
        let fine = measure_smoothing(BasisSpec::new(1, 32).unwrap(), &times);
        assert!(coarse.sup_scaled.is_finite());
        assert!((fine.sup_scaled / coarse.sup_scaled - 1.0).abs() < 0.05);
        let pos = coarse.position_amplification.iter().copied().fold(0.0, f64::max);
        assert!(pos <= 2.0, "{pos}");
    }

    #[test]
    fn mode_norms_at_zero_time() {
        for l in [1.0, 4.0, 30.0] {
            assert!((mode_norm_h1(l, 0.0) - 1.0).abs() < 1e-14);
        }
        // identity from H² × L₂ into H₁ has norm √λ on the velocity
        assert!((mode_smoothing_norm(9.0, 0.0) - 3.0).abs() < 1e-14);
    }

    #[test]
    fn dependence_of_linear_flow_is_quadratic() {
        let b = BasisSpec::new(1, 6).unwrap();
        let model = ModelSpec::linear(b);
        let mut rng = sampling::rng(2);
        let s0 = sampling::random_state(b, Ball::Energy, 1.0, &mut rng);
        let dir = sampling::random_direction(b, Ball::Energy, &mut rng);
        let report = continuous_dependence(&model, &s0, &dir, 1.0, 5, 1e-2, 1e-2).unwrap();
        assert_eq!(report.identical_response, 0.0);
        let q = &report.quadratic_ratios;
        assert!(q.iter().all(|r| (r / q[0] - 1.0).abs() < 1e-6), "{q:?}");
        assert!(report.ratios.windows(2).all(|p| p[1] < p[0]));
    }

    #[test]
    fn nemytskii_identity_and_constants() {
        let b = BasisSpec::new(3, 4).unwrap();
        let v = GridField::from_values(b, vec![0.3; b.grid_len()]).unwrap();
        let seq: Vec<GridField> =
            (1..=8).map(|n| GridField::from_values(b, vec![0.3 + 1.0 / n as f64; b.grid_len()]).unwrap()).collect();
        let id = nemytskii_continuity_check(|s| s, &v, &seq, 1.0, 1e-6);
        for (a, b) in id.distances.iter().zip(&id.input_distances) {
            assert_eq!(a, b);
        }
        let quartic = nemytskii_continuity_check(|s| s.powi(4), &v, &seq, 4.0, 1.0);
        let vol = v.volume();
        for (n, d) in quartic.distances.iter().enumerate() {
            let c = 0.3 + 1.0 / (n + 1) as f64;
            let exact = (c.powi(4) - 0.3f64.powi(4)) * vol.powf(2.0 / 3.0);
            assert!((d - exact).abs() < 1e-12 * exact, "{d} {exact}");
        }
        assert!(quartic.monotone);
    }

    #[test]
    fn bound_tracker_on_zero_trajectory() {
        let b = BasisSpec::new(1, 4).unwrap();
        let model = ModelSpec::cubic_quartic(b, 0.0);
        let rec = simulate(&model, &State::zeros(b), &SolverConfig::new(0.01, 1.0)).unwrap();
        let tracker = BoundTracker::from_record(&model, &rec, DEFAULT_MU);
        assert_eq!(tracker.sup(), 0.0);
        assert!(tracker.phi.iter().all(|&p| p == 0.0));
    }
}
