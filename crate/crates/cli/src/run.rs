//! Experiment dispatch and the run manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{Context, Result};
use log::info;
use serde::Serialize;
use serde_json::{json, Value};

use sdwave_core::attractor::{
    basin_sample, burn_in, find_equilibria, k0, omega_limit, splitting_experiment, EquilibriumSet, OmegaOptions,
    NEWTON_TOL,
};
use sdwave_core::diagnostics::{
    audit_energy_equality, continuous_dependence, energy_order_study, log_times, measure_decay, measure_smoothing,
};
use sdwave_core::dynamics::{simulate, slow_rate, SolverConfig, TrajectoryRecord};
use sdwave_core::model::{validate_conditions, ModelError};
use sdwave_core::sampling::{self, Ball};
use sdwave_core::spectral::BasisSpec;
use sdwave_core::State;

use crate::config::{Experiment, ForcingConfig, Format, InitialData, RunConfig};
use crate::output::{self, Row};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Status {
    Pass,
    Fail,
    Inconclusive,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Verdict {
    pub name: String,
    pub status: Status,
    pub detail: String,
}

fn verdict(name: &str, ok: bool, detail: String) -> Verdict {
    Verdict { name: name.into(), status: if ok { Status::Pass } else { Status::Fail }, detail }
}

/// What an experiment produced, before anything is written.
#[derive(Debug, Clone, Default)]
pub struct Outcome {
    pub summary: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub report: Value,
    pub rows: Option<Vec<Row>>,
    pub trajectory: Option<TrajectoryRecord>,
}

impl Outcome {
    fn scalar(&mut self, key: &str, value: f64) {
        self.summary.insert(key.into(), value);
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.status != Status::Fail)
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub experiment: &'static str,
    pub config: RunConfig,
    pub wall_clock_seconds: f64,
    pub summary: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub outputs: Vec<String>,
    pub passed: bool,
}

fn analytic_rate(basis: &BasisSpec) -> f64 {
    basis.eigenvalues().into_iter().map(slow_rate).fold(f64::INFINITY, f64::min)
}

/// Fill every default that depends on other fields, so the echo is complete.
pub fn resolve(cfg: &RunConfig) -> Result<RunConfig> {
    let mut out = cfg.clone();
    let ones = vec![1; cfg.model.dimension];
    if let ForcingConfig::Mode { index, .. } = &mut out.model.forcing {
        index.get_or_insert_with(|| ones.clone());
    }
    let basis = cfg.basis()?;
    match &mut out.experiment {
        Experiment::Simulate { initial }
        | Experiment::AuditEnergy { initial, .. }
        | Experiment::Compare { initial, .. }
        | Experiment::OmegaLimit { initial, .. }
        | Experiment::Split { initial, .. } => {
            if let InitialData::Mode { index, .. } = initial {
                index.get_or_insert_with(|| ones.clone());
            }
        }
        Experiment::LinearDecay { horizon, .. } => {
            horizon.get_or_insert_with(|| 40.0 / analytic_rate(&basis));
        }
        _ => {}
    }
    Ok(out)
}

fn omega_options(velocity_threshold: f64, dwell: f64, match_tolerance: f64) -> OmegaOptions {
    OmegaOptions { velocity_threshold, dwell, match_tolerance }
}

fn equilibria_summary(out: &mut Outcome, set: &EquilibriumSet) {
    out.scalar("equilibria", set.len() as f64);
    out.scalar("dropped_starts", set.dropped as f64);
}

/// Run the configured experiment without touching the filesystem.
pub fn execute(cfg: &RunConfig) -> Result<Outcome> {
    let model = cfg.model_spec()?;
    let basis = *model.basis();
    let solver = cfg.solver.solver_config();
    let mut out = Outcome::default();
    match &cfg.experiment {
        Experiment::Simulate { initial } => {
            let s0 = cfg.initial_state(initial, 0)?;
            let rec = simulate(&model, &s0, &solver)?;
            let ledger = audit_energy_equality(&model, &rec)?;
            out.scalar("final_time", *rec.times.last().unwrap());
            out.scalar("max_residual", ledger.max_residual);
            out.scalar("final_energy", *ledger.energy.last().unwrap());
            out.scalar("final_lyapunov", *ledger.lyapunov.last().unwrap());
            out.scalar("sup_abs_position", rec.sup_abs_position);
            let finite = rec.states.iter().all(State::is_finite);
            out.verdicts.push(verdict("finite", finite, "all snapshots finite".into()));
            let monotone = rec.diss_grad.windows(2).all(|p| p[1] >= p[0]) && rec.diss_sigma.windows(2).all(|p| p[1] >= p[0]);
            out.verdicts.push(verdict("dissipation-nondecreasing", monotone, "accumulated integrals".into()));
            out.report = json!({ "ledger": ledger });
            out.rows = Some(output::trajectory_rows(&model, &rec));
            out.trajectory = Some(rec);
        }
        Experiment::AuditEnergy { initial, levels } => {
            let s0 = cfg.initial_state(initial, 0)?;
            let dts: Vec<f64> = (0..*levels).map(|j| solver.dt * 2f64.powi((levels - 1 - j) as i32)).collect();
            let study = energy_order_study(&model, &s0, solver.horizon, &dts)?;
            let rec = simulate(&model, &s0, &solver)?;
            out.scalar("max_residual", *study.max_residuals.last().unwrap());
            out.scalar("min_halving_ratio", study.min_ratio());
            let order = study.orders.iter().copied().fold(f64::INFINITY, f64::min);
            out.scalar("order_estimate", order);
            out.verdicts.push(verdict(
                "residual-order-2",
                study.min_ratio() >= 3.5,
                format!("residual ratios {:?} under dt halving", study.ratios),
            ));
            out.report = json!({ "study": study });
            out.rows = Some(output::trajectory_rows(&model, &rec));
            out.trajectory = Some(rec);
        }
        Experiment::LinearDecay { probes, horizon } => {
            let horizon = horizon.unwrap_or(40.0 / analytic_rate(&basis));
            let report = measure_decay(basis, *probes, horizon, cfg.seed);
            out.scalar("analytic_rate", report.analytic_rate);
            out.scalar("fitted_rate", report.fitted_rate);
            out.scalar("prefactor", report.prefactor);
            out.scalar("peak_prefactor", report.peak_prefactor);
            out.verdicts.push(verdict(
                "rate-within-2pct",
                report.max_relative_deviation < 0.02,
                format!("relative deviation {:e}", report.max_relative_deviation),
            ));
            out.verdicts.push(verdict("prefactor-at-most-3", report.prefactor <= 3.0, format!("M = {}", report.prefactor)));
            out.report = json!({ "decay": report });
        }
        Experiment::Smoothing { t_min, t_max, samples } => {
            let times = log_times(*t_min, *t_max, *samples);
            let report = measure_smoothing(basis, &times);
            let doubled = BasisSpec::with_oversampling(basis.dimension(), 2 * basis.modes(), basis.oversampling())?;
            let fine = measure_smoothing(doubled, &times);
            let change = (fine.sup_scaled / report.sup_scaled - 1.0).abs();
            out.scalar("sup_scaled", report.sup_scaled);
            out.scalar("sup_scaled_doubled", fine.sup_scaled);
            out.scalar("relative_change", change);
            out.verdicts.push(verdict("finite", report.amplification.iter().all(|a| a.is_finite()), String::new()));
            out.verdicts.push(verdict("stable-under-doubling", change < 0.05, format!("relative change {change:e}")));
            out.report = json!({ "smoothing": report, "doubled": fine });
        }
        Experiment::Compare { initial, ladder, delta0 } => {
            let s0 = cfg.initial_state(initial, 0)?;
            let mut rng = sampling::rng(cfg.seed.wrapping_add(1));
            let direction = sampling::random_direction(basis, Ball::Energy, &mut rng);
            let report = continuous_dependence(&model, &s0, &direction, solver.horizon, *ladder, *delta0, solver.dt)?;
            out.scalar("max_over_min", report.max_over_min);
            out.scalar("identical_response", report.identical_response);
            let q = &report.quadratic_ratios;
            let qmax = q.iter().copied().fold(0.0, f64::max);
            let qmin = q.iter().copied().fold(f64::INFINITY, f64::min);
            out.scalar("quadratic_max_over_min", qmax / qmin);
            out.verdicts.push(verdict("identical-data", report.identical_response == 0.0, String::new()));
            out.verdicts.push(verdict(
                "ratio-ladder-bounded",
                report.max_over_min < 10.0,
                format!("max/min of r/δ = {}", report.max_over_min),
            ));
            out.report = json!({ "dependence": report });
        }
        Experiment::Equilibria { starts } => {
            let set = find_equilibria(&model, *starts, cfg.seed)?;
            equilibria_summary(&mut out, &set);
            let residual_ok = set.equilibria.iter().all(|e| e.residual < NEWTON_TOL);
            out.verdicts.push(verdict("residuals", residual_ok, format!("tolerance {NEWTON_TOL:e}")));
            let mut drift: f64 = 0.0;
            for e in &set.equilibria {
                let end = burn_in(&model, &e.state(), 1.0, solver.dt.min(1e-2))?;
                drift = drift.max(end.sub(&e.state()).h_norm());
            }
            out.scalar("max_drift", drift);
            out.verdicts.push(verdict("stationary", drift < 10.0 * NEWTON_TOL, format!("drift {drift:e} over unit time")));
            out.report = json!({ "equilibria": set });
        }
        Experiment::OmegaLimit { initial, starts, velocity_threshold, dwell, match_tolerance } => {
            let set = find_equilibria(&model, *starts, cfg.seed)?;
            equilibria_summary(&mut out, &set);
            let s0 = cfg.initial_state(initial, 0)?;
            let opts = omega_options(*velocity_threshold, *dwell, *match_tolerance);
            let report = omega_limit(&model, &s0, &solver, &set, &opts)?;
            out.scalar("terminal_velocity", report.terminal_velocity);
            out.scalar("final_time", report.final_time);
            if let Some(d) = report.distance {
                out.scalar("distance", d);
            }
            if report.converged {
                out.verdicts.push(verdict("matched", report.matched.is_some(), format!("distance {:?}", report.distance)));
                let descent = report.lyapunov_plateau <= report.initial_lyapunov + 1e-12;
                out.verdicts.push(verdict("lyapunov-descent", descent, String::new()));
            } else {
                out.verdicts.push(Verdict {
                    name: "converged".into(),
                    status: Status::Inconclusive,
                    detail: format!("velocity {:e} at the horizon", report.terminal_velocity),
                });
            }
            out.report = json!({ "omega_limit": report, "equilibria": set });
        }
        Experiment::Basins { ensemble, radius, starts, velocity_threshold, dwell, match_tolerance } => {
            let set = find_equilibria(&model, *starts, cfg.seed)?;
            equilibria_summary(&mut out, &set);
            let opts = omega_options(*velocity_threshold, *dwell, *match_tolerance);
            let tally = basin_sample(&model, *ensemble, *radius, cfg.seed.wrapping_add(1), &solver, &set, &opts)?;
            out.scalar("inconclusive", tally.inconclusive as f64);
            out.scalar("unmatched", tally.unmatched as f64);
            for (i, c) in tally.counts.iter().enumerate() {
                out.scalar(&format!("hits_{i}"), *c as f64);
            }
            out.verdicts.push(verdict("attraction", tally.unmatched == 0, format!("counts {:?}", tally.counts)));
            let descent = tally.runs.iter().filter(|r| r.converged).all(|r| r.lyapunov_plateau <= r.initial_lyapunov + 1e-12);
            out.verdicts.push(verdict("lyapunov-descent", descent, String::new()));
            out.report = json!({ "basins": tally, "equilibria": set });
        }
        Experiment::Split { initial, burn_in: burn, k_factors } => {
            let s0 = cfg.initial_state(initial, 0)?;
            let start = burn_in(&model, &s0, *burn, solver.dt)?;
            let dry = simulate(&model, &start, &SolverConfig { snapshot_stride: usize::MAX, ..solver })?;
            let sup = dry.sup_abs_position;
            let scale = if sup > 0.0 { sup } else { 1.0 };
            let ks: Vec<f64> = k_factors.iter().map(|f| f * scale).collect();
            let reports = splitting_experiment(&model, &ks, &start, &solver, *burn)?;
            let h1 = start.h1_norm();
            out.scalar("trajectory_sup", sup);
            out.scalar("burn_in_h1_norm", h1);
            if let Some(k) = k0(&reports, 1e-6) {
                out.scalar("k0", k);
            }
            let large: Vec<_> = reports.iter().filter(|r| r.k >= 2.0 * sup).collect();
            let decay = large.iter().all(|r| r.u_energy_ratio < 1e-6);
            out.verdicts.push(verdict(
                "u-energy-decay",
                decay && !large.is_empty(),
                format!("E(u_k(T))/E(u_k(0)) for k >= 2 sup|w|: {:?}", large.iter().map(|r| r.u_energy_ratio).collect::<Vec<_>>()),
            ));
            let bounded = large.iter().all(|r| r.v_regular_sup <= 10.0 * h1);
            out.verdicts.push(verdict("v-bounded", bounded && !large.is_empty(), format!("burn-in H1 norm {h1}")));
            let finite = reports.iter().all(|r| r.reconstruction_error.is_finite() && r.v_regular_sup.is_finite());
            out.verdicts.push(verdict("finite", finite, String::new()));
            out.report = json!({ "split": reports });
        }
        Experiment::ValidateModel { samples } => {
            let report = match validate_conditions(&model, *samples) {
                Ok(r) => r,
                Err(ModelError::Rejected(r)) => *r,
                Err(e) => return Err(e.into()),
            };
            out.scalar("violations", report.violations.len() as f64);
            out.verdicts.push(verdict("conditions", report.passed, report.warnings.join("; ")));
            out.report = json!({ "validation": report });
        }
    }
    Ok(out)
}

/// Execute and write outputs into `dir`; the manifest is written last.
pub fn run(cfg: &RunConfig, dir: &Path) -> Result<RunManifest> {
    let started = Instant::now();
    let resolved = resolve(cfg)?;
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    info!("running {} into {}", cfg.experiment.name(), dir.display());
    let outcome = execute(&resolved)?;
    let mut outputs = Vec::new();
    let mut emit = |name: &str, write: &dyn Fn(&PathBuf) -> std::io::Result<()>| -> Result<()> {
        let path = dir.join(name);
        write(&path).with_context(|| format!("writing {}", path.display()))?;
        outputs.push(name.to_string());
        Ok(())
    };
    let formats = &resolved.output.formats;
    if formats.contains(&Format::Csv) {
        if let Some(rows) = &outcome.rows {
            let text = output::render_csv(rows);
            emit("trajectory.csv", &|p| output::write_text(p, &text))?;
        }
    }
    if formats.contains(&Format::Json) {
        let text = output::to_json(&json!({
            "experiment": resolved.experiment.name(),
            "summary": outcome.summary,
            "verdicts": outcome.verdicts,
            "report": outcome.report,
        }))?;
        emit("report.json", &|p| output::write_text(p, &text))?;
    }
    if formats.contains(&Format::Binary) {
        if let Some(rec) = &outcome.trajectory {
            let bytes = output::encode_snapshots(rec.last().basis(), &rec.times, &rec.states);
            emit("snapshots.bin", &|p| fs::write(p, &bytes))?;
        }
    }
    let manifest = RunManifest {
        tool: "sdwave",
        version: env!("CARGO_PKG_VERSION"),
        experiment: resolved.experiment.name(),
        passed: outcome.passed(),
        config: resolved,
        wall_clock_seconds: started.elapsed().as_secs_f64(),
        summary: outcome.summary,
        verdicts: outcome.verdicts,
        outputs,
    };
    output::write_atomic(&dir.join("manifest.json"), &output::to_json(&manifest)?)?;
    Ok(manifest)
}
