use sdwave_core::attractor::{basin_sample, find_equilibria, splitting_experiment, OmegaOptions};
use sdwave_core::diagnostics::{audit_energy_equality, continuous_dependence};
use sdwave_core::dynamics::{integrate_split, simulate};
use sdwave_core::model::{DampingSpec, SourceSpec};
use sdwave_core::sampling::{self, Ball};
use sdwave_core::{BasisSpec, ModelSpec, SolverConfig, SpectralField, State};

fn unforced_cubic(b: BasisSpec) -> ModelSpec {
    ModelSpec::new(b, SourceSpec::Cubic { a: 0.0 }, DampingSpec::Zero, SpectralField::zeros(b)).unwrap()
}

#[test]
fn h_norm_decays_for_unforced_cubic() {
    let b = BasisSpec::new(1, 12).unwrap();
    let model = unforced_cubic(b);
    let s0 = sampling::ensemble(b, Ball::Energy, 2.0, 1, 9).remove(0);
    let dt = 2e-3;
    let rec = simulate(&model, &s0, &SolverConfig::new(dt, 5.0).with_stride(5)).unwrap();
    let ledger = audit_energy_equality(&model, &rec).unwrap();
    for p in ledger.lyapunov.windows(2) {
        assert!(p[1] <= p[0] + dt * dt);
    }
    assert!(rec.last().h_norm() < s0.h_norm());
}

#[test]
fn cubic_basins_all_reach_zero() {
    let b = BasisSpec::new(1, 8).unwrap();
    let model = ModelSpec::cubic_quartic(b, 0.0);
    let set = find_equilibria(&model, 4, 0).unwrap();
    assert_eq!(set.len(), 1);
    let cfg = SolverConfig::new(1e-2, 80.0);
    let tally = basin_sample(&model, 6, 1.0, 3, &cfg, &set, &OmegaOptions::default()).unwrap();
    assert_eq!(tally.counts, vec![6]);
}

#[test]
fn pitchfork_basins_split_between_branches() {
    let b = BasisSpec::new(1, 6).unwrap();
    let model = ModelSpec::pitchfork(b, 1.3).unwrap();
    let set = find_equilibria(&model, 4, 0).unwrap();
    assert_eq!(set.len(), 3);
    let cfg = SolverConfig::new(1e-2, 200.0);
    let tally = basin_sample(&model, 16, 0.05, 1, &cfg, &set, &OmegaOptions::default()).unwrap();
    assert_eq!(tally.inconclusive, 0);
    assert_eq!(tally.counts[2], 0, "zero is unstable");
    assert!(tally.counts[0] > 0 && tally.counts[1] > 0, "{:?}", tally.counts);
}

#[test]
fn untruncated_split_tracks_the_flow() {
    let b = BasisSpec::new(1, 8).unwrap();
    let model = ModelSpec::cubic_quartic(b, 1.0);
    let s0 = sampling::ensemble(b, Ball::Regular, 2.0, 1, 4).remove(0);
    let cfg = SolverConfig::new(1e-2, 20.0).with_stride(50);
    let split = integrate_split(&model, 100.0, &s0, &cfg).unwrap();
    let gap = split.v.last().sub(split.background.last()).h_norm();
    assert!(gap < 1e-5, "{gap}");
    let reports = splitting_experiment(&model, &[100.0], &s0, &cfg, 0.0).unwrap();
    assert!(reports[0].u_energy_ratio < 1e-6);
}

#[test]
fn dependence_ratios_stay_bounded() {
    let b = BasisSpec::new(1, 8).unwrap();
    let model = ModelSpec::cubic_quartic(b, 1.0);
    let mut rng = sampling::rng(6);
    let s0 = sampling::random_state(b, Ball::Regular, 1.0, &mut rng);
    let dir = sampling::random_direction(b, Ball::Energy, &mut rng);
    let report = continuous_dependence(&model, &s0, &dir, 1.0, 5, 1e-2, 1e-2).unwrap();
    assert_eq!(report.identical_response, 0.0);
    assert!(report.ratios.windows(2).all(|p| p[1] <= p[0] * 1.01));
    let zero = State::zeros(b);
    assert!(report.responses.iter().all(|r| r.is_finite()) && zero.h_norm() == 0.0);
}
