//! Time evolution of the Galerkin system
//!
//! `w_tt − Δw_t + σ(w)w_t − Δw + f(w) = g`
//!
//! Each mode is a 2×2 linear system `x' = Gx + (0, n)` with
//! `G = [[0, 1], [−λ, −λ]]`; the linear part is propagated exactly and the
//! pseudospectral forcing `n = g − P(f(w) + σ(w)w_t)` by an exponential
//! Runge-Kutta rule.

mod etd;
mod propagator;
mod split;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{ModelError, ModelSpec};
use crate::spectral::{BasisSpec, SpectralError, SpectralField};

pub use etd::{dissipation_gram, phi_columns, EtdTable, ModeCoefficients};
pub use propagator::{apply_u, characteristic_roots, generator, mode_propagator, slow_rate, ModePropagator};
pub use split::{integrate_split, SplitTrajectories};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DynamicsError {
    #[error("solution blew up at t = {time}")]
    BlowUp { time: f64 },
    #[error("invalid solver configuration: {0}")]
    Config(String),
    #[error("no trajectory sample at t = {time} for step {dt}")]
    MissingSamples { time: f64, dt: f64 },
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

/// Position and velocity on a shared basis.
#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub w: SpectralField,
    pub v: SpectralField,
}

impl State {
    pub fn new(w: SpectralField, v: SpectralField) -> Result<Self, SpectralError> {
        if w.basis() != v.basis() {
            return Err(SpectralError::BasisMismatch);
        }
        Ok(Self { w, v })
    }

    pub fn zeros(basis: BasisSpec) -> Self {
        Self { w: SpectralField::zeros(basis), v: SpectralField::zeros(basis) }
    }

    pub fn basis(&self) -> &BasisSpec {
        self.w.basis()
    }

    pub fn is_finite(&self) -> bool {
        self.w.is_finite() && self.v.is_finite()
    }

    pub(crate) fn split_mut(&mut self) -> (&mut [f64], &mut [f64]) {
        (self.w.coeffs_mut(), self.v.coeffs_mut())
    }

    /// `‖(w, v)‖_H = (‖∇w‖² + ‖v‖²)^{1/2}`.
    pub fn h_norm(&self) -> f64 {
        let l = self.basis().eigenvalues();
        (self.w.weighted_square(&l, 1) + self.v.weighted_square(&l, 0)).sqrt()
    }

    /// `‖(w, v)‖_{H₁} = (‖Δw‖² + ‖∇v‖²)^{1/2}`.
    pub fn h1_norm(&self) -> f64 {
        let l = self.basis().eigenvalues();
        (self.w.weighted_square(&l, 2) + self.v.weighted_square(&l, 1)).sqrt()
    }

    pub fn axpy(&mut self, a: f64, other: &State) {
        self.w.axpy(a, &other.w);
        self.v.axpy(a, &other.v);
    }

    pub fn sub(&self, other: &State) -> State {
        State { w: self.w.sub(&other.w), v: self.v.sub(&other.v) }
    }

    pub fn add(&self, other: &State) -> State {
        State { w: self.w.add(&other.w), v: self.v.add(&other.v) }
    }

    pub fn scaled(&self, a: f64) -> State {
        State { w: self.w.scaled(a), v: self.v.scaled(a) }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scheme {
    /// Exponential Runge-Kutta of order 2.
    #[default]
    Etd2,
    /// Exponential Euler.
    Etd1,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverConfig {
    pub dt: f64,
    pub scheme: Scheme,
    pub horizon: f64,
    pub snapshot_stride: usize,
}

impl SolverConfig {
    pub fn new(dt: f64, horizon: f64) -> Self {
        Self { dt, scheme: Scheme::Etd2, horizon, snapshot_stride: 1 }
    }

    pub fn with_stride(mut self, stride: usize) -> Self {
        self.snapshot_stride = stride;
        self
    }

    pub fn with_scheme(mut self, scheme: Scheme) -> Self {
        self.scheme = scheme;
        self
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(DynamicsError::Config(format!("dt must be positive (got {})", self.dt)));
        }
        if !(self.horizon.is_finite() && self.horizon >= self.dt) {
            return Err(DynamicsError::Config(format!(
                "horizon {} must be at least dt {}",
                self.horizon, self.dt
            )));
        }
        if self.snapshot_stride == 0 {
            return Err(DynamicsError::Config("snapshot stride must be at least 1".into()));
        }
        Ok(())
    }

    pub fn steps(&self) -> Result<usize, DynamicsError> {
        self.validate()?;
        steps_for(self.horizon, self.dt)
    }
}

/// Number of steps of size `dt` covering `horizon` exactly.
pub fn steps_for(horizon: f64, dt: f64) -> Result<usize, DynamicsError> {
    let n = (horizon / dt).round();
    if n < 0.0 || (n * dt - horizon).abs() > 1e-9 * horizon.abs().max(1.0) {
        return Err(DynamicsError::MissingSamples { time: horizon, dt });
    }
    Ok(n as usize)
}

/// Snapshots of a run plus running dissipation integrals
/// `∫‖∇w_t‖²` and `∫⟨σ(w)w_t, w_t⟩`. The first is integrated exactly along the
/// per-step dense output, the second by Simpson's rule with the dense-output midpoint.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRecord {
    pub times: Vec<f64>,
    pub states: Vec<State>,
    pub diss_grad: Vec<f64>,
    pub diss_sigma: Vec<f64>,
    pub dt: f64,
    pub scheme: Scheme,
    /// Largest `|w|` seen on the collocation grid over all steps.
    pub sup_abs_position: f64,
}

impl TrajectoryRecord {
    fn start(t0: f64, s0: &State, cfg: &SolverConfig) -> Self {
        Self {
            times: vec![t0],
            states: vec![s0.clone()],
            diss_grad: vec![0.0],
            diss_sigma: vec![0.0],
            dt: cfg.dt,
            scheme: cfg.scheme,
            sup_abs_position: 0.0,
        }
    }

    fn push(&mut self, t: f64, s: &State, grad: f64, sigma: f64) {
        self.times.push(t);
        self.states.push(s.clone());
        self.diss_grad.push(grad);
        self.diss_sigma.push(sigma);
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn last(&self) -> &State {
        self.states.last().expect("records start with the initial state")
    }
}

/// Forcing and diagnostics at one state.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub force: SpectralField,
    /// `⟨σ(w)w_t, w_t⟩` by grid quadrature.
    pub sigma_dissipation: f64,
    pub sup_abs_position: f64,
}

/// One-step exponential integrator for a fixed model and step size.
#[derive(Debug, Clone)]
pub struct Integrator<'m> {
    model: &'m ModelSpec,
    table: EtdTable,
    scheme: Scheme,
    eigenvalues: Vec<f64>,
}

impl<'m> Integrator<'m> {
    pub fn new(model: &'m ModelSpec, dt: f64, scheme: Scheme) -> Self {
        let eigenvalues = model.basis().eigenvalues();
        Self { model, table: EtdTable::new(&eigenvalues, dt), scheme, eigenvalues }
    }

    pub fn dt(&self) -> f64 {
        self.table.dt()
    }

    pub fn table(&self) -> &EtdTable {
        &self.table
    }

    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// `n = g − P(f(w) + σ(w)v)` and the damping dissipation density.
    pub fn evaluate(&self, s: &State) -> Result<Evaluation, ModelError> {
        let nl = self.model.nonlinearity();
        let has_f = !nl.f.coeffs().is_empty();
        let has_sigma = !nl.sigma.coeffs().is_empty();
        if !has_f && !has_sigma {
            return Ok(Evaluation {
                force: self.model.forcing().clone(),
                sigma_dissipation: 0.0,
                sup_abs_position: 0.0,
            });
        }
        let mut wg = s.w.to_grid();
        let sup = wg.max_abs();
        let mut dissipation = 0.0;
        if has_sigma {
            let vg = s.v.to_grid();
            for (w, &v) in wg.values_mut().iter_mut().zip(vg.values()) {
                let sigma = nl.sigma.eval(*w);
                dissipation += sigma * v * v;
                *w = nl.f.eval(*w) + sigma * v;
            }
        } else {
            for w in wg.values_mut() {
                *w = nl.f.eval(*w);
            }
        }
        if wg.values().iter().any(|x| !x.is_finite()) {
            return Err(ModelError::NonFinite);
        }
        let projected = wg.to_coeffs();
        let mut force = self.model.forcing().clone();
        force.axpy(-1.0, &projected);
        Ok(Evaluation {
            force,
            sigma_dissipation: dissipation * self.model.basis().quadrature_weight(),
            sup_abs_position: sup,
        })
    }

    /// `E·x + hφ₁ n` mode by mode.
    pub(crate) fn linear_plus_phi1(&self, s: &State, force: &[f64]) -> State {
        let mut out = s.clone();
        let (w, v) = (s.w.coeffs(), s.v.coeffs());
        let (ow, ov) = out.split_mut();
        for i in 0..w.len() {
            let c = self.table.get(i);
            ow[i] = c.exp[0][0] * w[i] + c.exp[0][1] * v[i] + c.phi1[0] * force[i];
            ov[i] = c.exp[1][0] * w[i] + c.exp[1][1] * v[i] + c.phi1[1] * force[i];
        }
        out
    }

    /// `x += hφ₂ (n_b − n_a)` mode by mode.
    pub(crate) fn add_phi2(&self, s: &mut State, force_new: &[f64], force_old: &[f64]) {
        let (ow, ov) = s.split_mut();
        for i in 0..ow.len() {
            let c = self.table.get(i);
            let d = force_new[i] - force_old[i];
            ow[i] += c.phi2[0] * d;
            ov[i] += c.phi2[1] * d;
        }
    }

    /// Advance one step given the evaluation at the current state.
    pub fn advance(&self, s: &State, current: &Evaluation) -> Result<State, ModelError> {
        Ok(self.advance_staged(s, current)?.0)
    }

    /// As `advance`, also returning the ETD2 stage forcing.
    fn advance_staged(&self, s: &State, current: &Evaluation) -> Result<(State, Option<SpectralField>), ModelError> {
        let mut next = self.linear_plus_phi1(s, current.force.coeffs());
        let mut stage_force = None;
        if self.scheme == Scheme::Etd2 {
            let stage = self.evaluate(&next)?;
            self.add_phi2(&mut next, stage.force.coeffs(), current.force.coeffs());
            stage_force = Some(stage.force);
        }
        if !next.is_finite() {
            return Err(ModelError::NonFinite);
        }
        Ok((next, stage_force))
    }

    /// Dense output at the half step, with the forcing interpolated linearly
    /// between `force` and `stage`.
    pub(crate) fn midpoint(&self, s: &State, force: &[f64], stage: Option<&[f64]>) -> State {
        let mut out = s.clone();
        let (w, v) = (s.w.coeffs(), s.v.coeffs());
        let (ow, ov) = out.split_mut();
        for i in 0..w.len() {
            let c = self.table.get_half(i);
            let d = stage.map_or(0.0, |st| 0.5 * (st[i] - force[i]));
            ow[i] = c.exp[0][0] * w[i] + c.exp[0][1] * v[i] + c.phi1[0] * force[i] + c.phi2[0] * d;
            ov[i] = c.exp[1][0] * w[i] + c.exp[1][1] * v[i] + c.phi1[1] * force[i] + c.phi2[1] * d;
        }
        out
    }

    /// `∫‖∇w_t‖²` over one step along the dense output.
    pub(crate) fn grad_dissipation(&self, s: &State, force: &[f64], stage: Option<&[f64]>) -> f64 {
        let (w, v) = (s.w.coeffs(), s.v.coeffs());
        let mut total = 0.0;
        for i in 0..w.len() {
            let z = [w[i], v[i], force[i], stage.map_or(0.0, |st| st[i] - force[i])];
            let m = self.table.gram(i);
            for a in 0..4 {
                for b in 0..4 {
                    total += z[a] * m[a][b] * z[b];
                }
            }
        }
        total
    }

    /// `⟨σ(w)w_t, w_t⟩` by grid quadrature.
    pub(crate) fn sigma_density(&self, s: &State) -> Result<f64, ModelError> {
        let sigma = &self.model.nonlinearity().sigma;
        if sigma.coeffs().is_empty() {
            return Ok(0.0);
        }
        let (wg, vg) = (s.w.to_grid(), s.v.to_grid());
        let total: f64 = wg.values().iter().zip(vg.values()).map(|(&w, &v)| sigma.eval(w) * v * v).sum();
        if !total.is_finite() {
            return Err(ModelError::NonFinite);
        }
        Ok(total * self.model.basis().quadrature_weight())
    }

    pub fn step(&self, s: &State) -> Result<State, ModelError> {
        let current = self.evaluate(s)?;
        self.advance(s, &current)
    }

    pub(crate) fn grad_density(&self, s: &State) -> f64 {
        s.v.weighted_square(&self.eigenvalues, 1)
    }
}

/// One ETD2 step of size `dt`.
pub fn step(model: &ModelSpec, s: &State, dt: f64) -> Result<State, DynamicsError> {
    Integrator::new(model, dt, Scheme::Etd2)
        .step(s)
        .map_err(|_| DynamicsError::BlowUp { time: dt })
}

pub fn simulate(model: &ModelSpec, s0: &State, cfg: &SolverConfig) -> Result<TrajectoryRecord, DynamicsError> {
    simulate_from(model, s0, 0.0, cfg)
}

/// Run `cfg.horizon / cfg.dt` steps starting at time `t0`.
pub fn simulate_from(
    model: &ModelSpec,
    s0: &State,
    t0: f64,
    cfg: &SolverConfig,
) -> Result<TrajectoryRecord, DynamicsError> {
    if s0.basis() != model.basis() {
        return Err(SpectralError::BasisMismatch.into());
    }
    let n_steps = cfg.steps()?;
    let integ = Integrator::new(model, cfg.dt, cfg.scheme);
    let blow_up = |n: usize| DynamicsError::BlowUp { time: t0 + n as f64 * cfg.dt };

    let mut rec = TrajectoryRecord::start(t0, s0, cfg);
    let mut x = s0.clone();
    let mut ev = integ.evaluate(&x).map_err(|_| blow_up(0))?;
    let (mut diss_grad, mut diss_sigma) = (0.0, 0.0);
    let mut sup = ev.sup_abs_position;
    for n in 1..=n_steps {
        let (x_next, stage) = integ.advance_staged(&x, &ev).map_err(|_| blow_up(n))?;
        let stage = stage.as_ref().map(SpectralField::coeffs);
        let mid = integ.midpoint(&x, ev.force.coeffs(), stage);
        let mid_sigma = integ.sigma_density(&mid).map_err(|_| blow_up(n))?;
        diss_grad += integ.grad_dissipation(&x, ev.force.coeffs(), stage);
        x = x_next;
        let next = integ.evaluate(&x).map_err(|_| blow_up(n))?;
        diss_sigma += cfg.dt / 6.0 * (ev.sigma_dissipation + 4.0 * mid_sigma + next.sigma_dissipation);
        sup = sup.max(next.sup_abs_position);
        ev = next;
        if n % cfg.snapshot_stride == 0 || n == n_steps {
            rec.push(t0 + n as f64 * cfg.dt, &x, diss_grad, diss_sigma);
        }
    }
    rec.sup_abs_position = sup;
    Ok(rec)
}

/// `S(t)s₀` split as `U(t)s₀ + C(t)s₀`.
#[derive(Debug, Clone, PartialEq)]
pub struct DuhamelSplit {
    pub full: State,
    pub linear: State,
    pub nonlinear: State,
}

impl DuhamelSplit {
    /// `‖S(t)s₀ − U(t)s₀ − C(t)s₀‖_H`.
    pub fn defect(&self) -> f64 {
        self.full.sub(&self.linear).sub(&self.nonlinear).h_norm()
    }
}

/// `C(t)s₀ = ∫_0^t U(t−s)(0, Φ(s)) ds` with `Φ = g − f(w) − σ(w)w_t` along the
/// ETD2 trajectory at resolution `dt`. `Φ` is interpolated linearly between
/// samples and each panel is integrated exactly against the semigroup.
pub fn duhamel_c(model: &ModelSpec, s0: &State, t: f64, dt: f64) -> Result<State, DynamicsError> {
    Ok(duhamel_split(model, s0, t, dt)?.nonlinear)
}

pub fn duhamel_split(model: &ModelSpec, s0: &State, t: f64, dt: f64) -> Result<DuhamelSplit, DynamicsError> {
    if t == 0.0 {
        return Ok(DuhamelSplit { full: s0.clone(), linear: s0.clone(), nonlinear: State::zeros(*s0.basis()) });
    }
    if !(dt > 0.0) {
        return Err(DynamicsError::Config(format!("dt must be positive (got {dt})")));
    }
    let n_steps = steps_for(t, dt)?;
    let integ = Integrator::new(model, dt, Scheme::Etd2);
    let blow_up = |n: usize| DynamicsError::BlowUp { time: n as f64 * dt };
    let mut x = s0.clone();
    let mut ev = integ.evaluate(&x).map_err(|_| blow_up(0))?;
    let mut c = State::zeros(*s0.basis());
    for n in 1..=n_steps {
        x = integ.advance(&x, &ev).map_err(|_| blow_up(n))?;
        let next = integ.evaluate(&x).map_err(|_| blow_up(n))?;
        let mut c_next = integ.linear_plus_phi1(&c, ev.force.coeffs());
        integ.add_phi2(&mut c_next, next.force.coeffs(), ev.force.coeffs());
        c = c_next;
        ev = next;
    }
    Ok(DuhamelSplit { full: x, linear: apply_u(s0, n_steps as f64 * dt), nonlinear: c })
}
