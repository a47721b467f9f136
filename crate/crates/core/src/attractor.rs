//! Equilibria, convergence of trajectories to them, basins, and the
//! truncation split of a trajectory near the attractor.

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use rayon::prelude::*;
use serde::{Serialize, Serializer};
use thiserror::Error;

use crate::diagnostics::{energy, linear_fit, lyapunov};
use crate::dynamics::{integrate_split, simulate, DynamicsError, Integrator, SolverConfig, State};
use crate::model::{nemytskii, ModelError, ModelSpec};
use crate::sampling::{self, Ball};
use crate::spectral::{MultiIndex, SpectralField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AttractorError {
    #[error("Newton did not converge in {iterations} iterations (residual {residual:e})")]
    MaxIterations { iterations: usize, residual: f64 },
    #[error("singular Jacobian (condition estimate {condition:e})")]
    Singular { condition: f64 },
    #[error("invalid argument: {0}")]
    Argument(String),
    #[error(transparent)]
    Dynamics(#[from] DynamicsError),
    #[error(transparent)]
    Model(#[from] ModelError),
}

fn coeffs<S: Serializer>(f: &SpectralField, s: S) -> Result<S::Ok, S::Error> {
    f.coeffs().serialize(s)
}

/// Radius in `H¹` below which two equilibria are identified.
pub const DEDUP_RADIUS: f64 = 1e-6;
/// Number of eigenvalues of the linearization inspected for the index.
pub const INDEX_EIGENVALUES: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Equilibrium {
    #[serde(serialize_with = "coeffs")]
    pub w: SpectralField,
    /// `‖−Δw + P f(w) − g‖_{L₂}`
    pub residual: f64,
    pub lyapunov: f64,
    /// Negative eigenvalues of `−Δ + P f′(w)`.
    pub stability_index: usize,
    /// Smallest eigenvalues of the linearization, ascending.
    pub spectrum: Vec<f64>,
    pub iterations: usize,
}

impl Equilibrium {
    pub fn state(&self) -> State {
        State::new(self.w.clone(), SpectralField::zeros(*self.w.basis())).expect("shared basis")
    }
}

/// `G(w) = −Δw + P f(w) − g`.
pub fn stationary_residual(model: &ModelSpec, w: &SpectralField) -> Result<SpectralField, ModelError> {
    let f = &model.nonlinearity().f;
    let mut r = w.neg_laplacian();
    if !f.coeffs().is_empty() {
        r = r.add(&nemytskii(|s| f.eval(s), w)?);
    }
    Ok(r.sub(model.forcing()))
}

/// `−Δ + P f′(w)` with the multiplication operator assembled on the grid.
fn jacobian(model: &ModelSpec, w: &SpectralField) -> Result<DMatrix<f64>, ModelError> {
    let basis = *w.basis();
    let n = basis.len();
    let df = model.nonlinearity().f.derivative();
    let eigs = basis.eigenvalues();
    let mut j = DMatrix::from_diagonal(&DVector::from_vec(eigs));
    if df.coeffs().is_empty() {
        return Ok(j);
    }
    let weight = w.to_grid().map(|s| df.eval(s));
    for col in 0..n {
        let e = SpectralField::unit(basis, &basis.multi_index(col)).expect("index in range").to_grid();
        let values = e.values().iter().zip(weight.values()).map(|(a, b)| a * b).collect();
        let projected = crate::spectral::GridField::from_values(basis, values).expect("same grid").to_coeffs();
        if !projected.is_finite() {
            return Err(ModelError::NonFinite);
        }
        for (row, v) in projected.coeffs().iter().enumerate() {
            j[(row, col)] += v;
        }
    }
    Ok(j)
}

/// Central finite differences of `w ↦ −Δw + P f(w)`, symmetrized.
pub fn fd_linearization(model: &ModelSpec, w: &SpectralField) -> Result<DMatrix<f64>, ModelError> {
    let basis = *w.basis();
    let n = basis.len();
    let mut j = DMatrix::zeros(n, n);
    let scale = 1.0 + w.to_grid().max_abs();
    let h = 1e-6 * scale;
    for col in 0..n {
        let mut plus = w.clone();
        plus.coeffs_mut()[col] += h;
        let mut minus = w.clone();
        minus.coeffs_mut()[col] -= h;
        let d = stationary_residual(model, &plus)?.sub(&stationary_residual(model, &minus)?);
        for (row, v) in d.coeffs().iter().enumerate() {
            j[(row, col)] = v / (2.0 * h);
        }
    }
    Ok((&j + j.transpose()) * 0.5)
}

fn smallest_eigenvalues(m: DMatrix<f64>, count: usize) -> Vec<f64> {
    let mut eig: Vec<f64> = SymmetricEigen::new(m).eigenvalues.iter().copied().collect();
    eig.sort_by(f64::total_cmp);
    eig.truncate(count);
    eig
}

/// Damped Newton iteration for `G(w) = 0` from `guess`.
pub fn newton_equilibrium(
    model: &ModelSpec,
    guess: &SpectralField,
    tol: f64,
    max_iter: usize,
) -> Result<Equilibrium, AttractorError> {
    if !(tol > 0.0) {
        return Err(AttractorError::Argument(format!("tolerance must be positive (got {tol})")));
    }
    let mut w = guess.clone();
    let mut g = stationary_residual(model, &w)?;
    let mut norm = g.l2_norm();
    let mut iterations = 0;
    while norm >= tol {
        if iterations == max_iter {
            return Err(AttractorError::MaxIterations { iterations, residual: norm });
        }
        iterations += 1;
        let jac = jacobian(model, &w)?;
        let rhs = DVector::from_column_slice(g.coeffs());
        let step = match jac.clone().lu().solve(&rhs) {
            Some(s) if s.iter().all(|x| x.is_finite()) => s,
            _ => {
                let eig = SymmetricEigen::new((&jac + jac.transpose()) * 0.5).eigenvalues;
                let max = eig.iter().fold(0.0f64, |m, x| m.max(x.abs()));
                let min = eig.iter().fold(f64::INFINITY, |m, x| m.min(x.abs()));
                return Err(AttractorError::Singular { condition: max / min });
            }
        };
        let mut alpha = 1.0;
        loop {
            let mut trial = w.clone();
            for (c, s) in trial.coeffs_mut().iter_mut().zip(step.iter()) {
                *c -= alpha * s;
            }
            let trial_g = stationary_residual(model, &trial);
            if let Ok(tg) = trial_g {
                let tn = tg.l2_norm();
                if tn < (1.0 - 1e-4 * alpha) * norm || alpha < 1e-10 {
                    w = trial;
                    g = tg;
                    norm = tn;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-12 {
                return Err(AttractorError::MaxIterations { iterations, residual: norm });
            }
        }
    }
    let spectrum = smallest_eigenvalues(fd_linearization(model, &w)?, INDEX_EIGENVALUES);
    let stability_index = spectrum.iter().filter(|&&e| e < 0.0).count();
    let state = State::new(w.clone(), SpectralField::zeros(*w.basis())).expect("shared basis");
    Ok(Equilibrium { lyapunov: lyapunov(model, &state)?, w, residual: norm, stability_index, spectrum, iterations })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EquilibriumSet {
    pub equilibria: Vec<Equilibrium>,
    /// Pairwise `H¹` distances.
    pub distances: Vec<Vec<f64>>,
    pub attempted: usize,
    /// Starts that did not converge.
    pub dropped: usize,
}

fn h1_distance(a: &SpectralField, b: &SpectralField) -> f64 {
    let eigs = a.basis().eigenvalues();
    a.sub(b).weighted_square(&eigs, 1).sqrt()
}

impl EquilibriumSet {
    /// Deduplicate and order by Lyapunov value, then by coefficients.
    pub fn from_candidates(candidates: Vec<Equilibrium>, attempted: usize, dropped: usize) -> Self {
        let mut kept: Vec<Equilibrium> = Vec::new();
        for c in candidates {
            match kept.iter_mut().find(|k| h1_distance(&k.w, &c.w) <= DEDUP_RADIUS) {
                Some(k) if c.residual < k.residual => *k = c,
                Some(_) => {}
                None => kept.push(c),
            }
        }
        kept.sort_by(|a, b| {
            let tie = 1e-12 * (1.0 + a.lyapunov.abs().max(b.lyapunov.abs()));
            if (a.lyapunov - b.lyapunov).abs() > tie {
                a.lyapunov.total_cmp(&b.lyapunov)
            } else {
                a.w.coeffs()
                    .iter()
                    .zip(b.w.coeffs())
                    .map(|(x, y)| x.total_cmp(y))
                    .find(|o| o.is_ne())
                    .unwrap_or(std::cmp::Ordering::Equal)
            }
        });
        let distances =
            kept.iter().map(|a| kept.iter().map(|b| h1_distance(&a.w, &b.w)).collect()).collect();
        Self { equilibria: kept, distances, attempted, dropped }
    }

    pub fn len(&self) -> usize {
        self.equilibria.len()
    }

    pub fn is_empty(&self) -> bool {
        self.equilibria.is_empty()
    }

    /// Index and `H¹` distance of the equilibrium closest to `w`.
    pub fn nearest(&self, w: &SpectralField) -> Option<(usize, f64)> {
        self.equilibria
            .iter()
            .enumerate()
            .map(|(i, e)| (i, h1_distance(&e.w, w)))
            .min_by(|a, b| a.1.total_cmp(&b.1))
    }
}

pub const NEWTON_TOL: f64 = 1e-10;
pub const NEWTON_MAX_ITER: usize = 60;

/// Multi-start Newton: the zero guess, `±a·e₁` for a few amplitudes, and
/// `starts` seeded random guesses.
pub fn find_equilibria(model: &ModelSpec, starts: usize, seed: u64) -> Result<EquilibriumSet, AttractorError> {
    if starts < 1 {
        return Err(AttractorError::Argument("at least one start is required".into()));
    }
    let basis = *model.basis();
    let first = SpectralField::unit(basis, &MultiIndex::new(&vec![1; basis.dimension()]).expect("valid index"))
        .expect("first mode exists");
    let mut guesses = vec![SpectralField::zeros(basis)];
    for a in [0.5, 1.0, 2.0] {
        guesses.push(first.scaled(a));
        guesses.push(first.scaled(-a));
    }
    let mut rng = sampling::rng(seed);
    for _ in 0..starts {
        guesses.push(sampling::random_state(basis, Ball::Energy, 3.0, &mut rng).w);
    }
    let results: Vec<Option<Equilibrium>> =
        guesses.par_iter().map(|g| newton_equilibrium(model, g, NEWTON_TOL, NEWTON_MAX_ITER).ok()).collect();
    let attempted = results.len();
    let converged: Vec<Equilibrium> = results.into_iter().flatten().collect();
    let dropped = attempted - converged.len();
    Ok(EquilibriumSet::from_candidates(converged, attempted, dropped))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OmegaOptions {
    /// Convergence is declared once `‖w_t‖_{L₂}` stays below this.
    pub velocity_threshold: f64,
    /// For this long.
    pub dwell: f64,
    /// `H¹` distance within which the terminal state matches an equilibrium.
    pub match_tolerance: f64,
}

impl Default for OmegaOptions {
    fn default() -> Self {
        Self { velocity_threshold: 1e-8, dwell: 1.0, match_tolerance: 1e-4 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OmegaLimitReport {
    pub converged: bool,
    pub final_time: f64,
    pub terminal_velocity: f64,
    pub matched: Option<usize>,
    pub distance: Option<f64>,
    pub initial_lyapunov: f64,
    /// `L` at the terminal state.
    pub lyapunov_plateau: f64,
}

/// Run until the velocity settles below threshold or the horizon is reached,
/// then locate the terminal position among `eq_set`.
pub fn omega_limit(
    model: &ModelSpec,
    s0: &State,
    cfg: &SolverConfig,
    eq_set: &EquilibriumSet,
    opts: &OmegaOptions,
) -> Result<OmegaLimitReport, AttractorError> {
    let n_steps = cfg.steps()?;
    let integ = Integrator::new(model, cfg.dt, cfg.scheme);
    let dwell_steps = ((opts.dwell.min(cfg.horizon) / cfg.dt).round() as usize).max(1);
    let mut x = s0.clone();
    let mut quiet = if x.v.l2_norm() < opts.velocity_threshold { 1 } else { 0 };
    let mut n = 0;
    while n < n_steps && quiet < dwell_steps {
        x = integ.step(&x).map_err(|_| DynamicsError::BlowUp { time: (n + 1) as f64 * cfg.dt })?;
        n += 1;
        if x.v.l2_norm() < opts.velocity_threshold {
            quiet += 1;
        } else {
            quiet = 0;
        }
    }
    let terminal_velocity = x.v.l2_norm();
    let converged = quiet >= dwell_steps || (n_steps == 0 && terminal_velocity < opts.velocity_threshold);
    let nearest = eq_set.nearest(&x.w);
    let matched = nearest.filter(|&(_, d)| converged && d <= opts.match_tolerance).map(|(i, _)| i);
    Ok(OmegaLimitReport {
        converged,
        final_time: n as f64 * cfg.dt,
        terminal_velocity,
        matched,
        distance: nearest.map(|n| n.1),
        initial_lyapunov: lyapunov(model, s0)?,
        lyapunov_plateau: lyapunov(model, &x)?,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasinTally {
    pub radius: f64,
    /// Hits per equilibrium, in the order of the set.
    pub counts: Vec<usize>,
    /// Converged runs that ended away from every equilibrium.
    pub unmatched: usize,
    /// Runs that did not settle within the horizon.
    pub inconclusive: usize,
    pub runs: Vec<OmegaLimitReport>,
}

/// `omega_limit` over an ensemble of random initial data of `H`-norm at most `radius`.
pub fn basin_sample(
    model: &ModelSpec,
    ensemble: usize,
    radius: f64,
    seed: u64,
    cfg: &SolverConfig,
    eq_set: &EquilibriumSet,
    opts: &OmegaOptions,
) -> Result<BasinTally, AttractorError> {
    if ensemble < 1 {
        return Err(AttractorError::Argument("ensemble must be at least 1".into()));
    }
    let starts = sampling::ensemble(*model.basis(), Ball::Energy, radius, ensemble, seed);
    let runs = starts
        .par_iter()
        .map(|s| omega_limit(model, s, cfg, eq_set, opts))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(tally(radius, eq_set.len(), runs))
}

/// Tally of an ensemble of finished runs.
pub fn tally(radius: f64, equilibria: usize, runs: Vec<OmegaLimitReport>) -> BasinTally {
    let mut counts = vec![0; equilibria];
    let (mut unmatched, mut inconclusive) = (0, 0);
    for r in &runs {
        match (r.converged, r.matched) {
            (false, _) => inconclusive += 1,
            (true, Some(i)) => counts[i] += 1,
            (true, None) => unmatched += 1,
        }
    }
    BasinTally { radius, counts, unmatched, inconclusive, runs }
}

/// State after running `time` units from `s0`.
pub fn burn_in(model: &ModelSpec, s0: &State, time: f64, dt: f64) -> Result<State, DynamicsError> {
    if time == 0.0 {
        return Ok(s0.clone());
    }
    let rec = simulate(model, s0, &SolverConfig::new(dt, time).with_stride(usize::MAX))?;
    Ok(rec.last().clone())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SplittingReport {
    pub k: f64,
    pub horizon: f64,
    pub burn_in: f64,
    /// `sup |w|` on the grid along the background trajectory.
    pub trajectory_sup: f64,
    /// `max_t ‖v_k‖_{H²} + ‖v_kt‖_{H¹}`
    pub v_regular_sup: f64,
    pub times: Vec<f64>,
    pub u_energy: Vec<f64>,
    /// Decay rate of `E(u_k)` fitted on `log E` above the rounding floor.
    pub u_energy_rate: f64,
    /// `E(u_k(T)) / E(u_k(0))`
    pub u_energy_ratio: f64,
    pub reconstruction_error: f64,
}

fn regular_split_norm(s: &State) -> f64 {
    let l = s.basis().eigenvalues();
    s.w.weighted_square(&l, 2).sqrt() + s.v.weighted_square(&l, 1).sqrt()
}

/// Integrate the `v_k`/`u_k` split from `start` for each `k`.
pub fn splitting_experiment(
    model: &ModelSpec,
    k_list: &[f64],
    start: &State,
    cfg: &SolverConfig,
    burn_in_time: f64,
) -> Result<Vec<SplittingReport>, AttractorError> {
    k_list
        .par_iter()
        .map(|&k| {
            let split = integrate_split(model, k, start, cfg)?;
            let u_energy: Vec<f64> = split.u.states.iter().map(energy).collect();
            let e0 = u_energy[0];
            let (xs, ys): (Vec<f64>, Vec<f64>) = split
                .u
                .times
                .iter()
                .zip(&u_energy)
                .filter(|(_, &e)| e > 1e-24 * e0 && e > 0.0)
                .map(|(t, e)| (*t, e.ln()))
                .unzip();
            let u_energy_rate = if xs.len() >= 2 { -linear_fit(&xs, &ys).0 } else { f64::NAN };
            Ok(SplittingReport {
                k,
                horizon: cfg.horizon,
                burn_in: burn_in_time,
                trajectory_sup: split.background.sup_abs_position,
                v_regular_sup: split.v.states.iter().map(regular_split_norm).fold(0.0, f64::max),
                times: split.u.times.clone(),
                u_energy_ratio: if e0 > 0.0 { u_energy.last().unwrap() / e0 } else { 0.0 },
                u_energy,
                u_energy_rate,
                reconstruction_error: split.reconstruction_error(),
            })
        })
        .collect()
}

/// Smallest tested `k` whose `u_k` energy ratio drops below `threshold`.
pub fn k0(reports: &[SplittingReport], threshold: f64) -> Option<f64> {
    reports.iter().filter(|r| r.u_energy_ratio < threshold).map(|r| r.k).fold(None, |m, k| match m {
        None => Some(k),
        Some(x) => Some(f64::min(x, k)),
    })
}
