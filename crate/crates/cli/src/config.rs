//! Run configuration: JSON in, validated `RunConfig` out.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use sdwave_core::dynamics::{Scheme, SolverConfig};
use sdwave_core::model::{DampingSpec, SourceSpec};
use sdwave_core::sampling::{self, Ball};
use sdwave_core::spectral::{BasisSpec, MultiIndex, SpectralField};
use sdwave_core::{ModelSpec, State};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("syntax error at line {line}, column {column}: {message}")]
    Syntax { line: usize, column: usize, message: String },
    #[error("{path}: {message}")]
    Invalid { path: String, message: String },
}

impl ConfigError {
    fn at(path: &str, message: impl Into<String>) -> Self {
        ConfigError::Invalid { path: path.into(), message: message.into() }
    }

    pub fn path(&self) -> Option<&str> {
        match self {
            ConfigError::Invalid { path, .. } => Some(path),
            ConfigError::Syntax { .. } => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub model: ModelConfig,
    #[serde(default)]
    pub solver: SolverBlock,
    pub experiment: Experiment,
    #[serde(default)]
    pub output: OutputBlock,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub dimension: usize,
    pub modes_per_dim: usize,
    #[serde(default = "default_oversampling")]
    pub oversampling: f64,
    #[serde(default = "default_source")]
    pub source: SourceConfig,
    #[serde(default = "default_damping")]
    pub damping: DampingConfig,
    #[serde(default)]
    pub forcing: ForcingConfig,
}

fn default_oversampling() -> f64 {
    1.5
}

fn default_source() -> SourceConfig {
    SourceConfig::Cubic { a: 0.0 }
}

fn default_damping() -> DampingConfig {
    DampingConfig::Quartic { b: 1.0 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum SourceConfig {
    Zero,
    Cubic {
        #[serde(default)]
        a: f64,
    },
    Quintic {
        #[serde(default)]
        a: f64,
    },
    OddPolynomial { coeffs: Vec<f64> },
}

impl From<&SourceConfig> for SourceSpec {
    fn from(c: &SourceConfig) -> Self {
        match c {
            SourceConfig::Zero => SourceSpec::Zero,
            SourceConfig::Cubic { a } => SourceSpec::Cubic { a: *a },
            SourceConfig::Quintic { a } => SourceSpec::Quintic { a: *a },
            SourceConfig::OddPolynomial { coeffs } => SourceSpec::OddPolynomial { coeffs: coeffs.clone() },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", content = "params", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DampingConfig {
    Zero,
    Quartic {
        #[serde(default = "one")]
        b: f64,
    },
    EvenPolynomial { coeffs: Vec<f64> },
    Constant { c: f64 },
}

fn one() -> f64 {
    1.0
}

impl From<&DampingConfig> for DampingSpec {
    fn from(c: &DampingConfig) -> Self {
        match c {
            DampingConfig::Zero => DampingSpec::Zero,
            DampingConfig::Quartic { b } => DampingSpec::Quartic { b: *b },
            DampingConfig::EvenPolynomial { coeffs } => DampingSpec::EvenPolynomial { coeffs: coeffs.clone() },
            DampingConfig::Constant { c } => DampingSpec::Constant { c: *c },
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum ForcingConfig {
    #[default]
    Zero,
    /// `amplitude·e_k`; `index` defaults to the first mode.
    Mode {
        #[serde(default)]
        index: Option<Vec<usize>>,
        amplitude: f64,
    },
    Coefficients { values: Vec<f64> },
}

/// Initial data for the experiments that start from a single state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum InitialData {
    #[default]
    Zero,
    /// Drawn from the experiment seed; `regular` selects the `H₁` ball.
    Random {
        radius: f64,
        #[serde(default)]
        regular: bool,
    },
    Mode {
        #[serde(default)]
        index: Option<Vec<usize>>,
        amplitude: f64,
        #[serde(default)]
        velocity: f64,
    },
    Coefficients { w: Vec<f64>, v: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverBlock {
    #[serde(default = "default_dt")]
    pub dt: f64,
    #[serde(default = "default_horizon")]
    pub horizon: f64,
    #[serde(default)]
    pub scheme: Scheme,
    #[serde(default = "default_stride")]
    pub snapshot_stride: usize,
}

fn default_dt() -> f64 {
    1e-3
}

fn default_horizon() -> f64 {
    1.0
}

fn default_stride() -> usize {
    1
}

impl Default for SolverBlock {
    fn default() -> Self {
        Self { dt: default_dt(), horizon: default_horizon(), scheme: Scheme::Etd2, snapshot_stride: default_stride() }
    }
}

impl SolverBlock {
    pub fn solver_config(&self) -> SolverConfig {
        SolverConfig { dt: self.dt, scheme: self.scheme, horizon: self.horizon, snapshot_stride: self.snapshot_stride }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    Binary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputBlock {
    #[serde(default = "default_directory")]
    pub directory: String,
    #[serde(default = "default_formats")]
    pub formats: Vec<Format>,
}

fn default_directory() -> String {
    "output".into()
}

fn default_formats() -> Vec<Format> {
    vec![Format::Csv, Format::Json]
}

impl Default for OutputBlock {
    fn default() -> Self {
        Self { directory: default_directory(), formats: default_formats() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Experiment {
    Simulate {
        #[serde(default)]
        initial: InitialData,
    },
    /// Energy balance at `dt·2^{levels−1}, …, 2dt, dt`.
    AuditEnergy {
        #[serde(default)]
        initial: InitialData,
        #[serde(default = "default_levels")]
        levels: usize,
    },
    LinearDecay {
        #[serde(default = "default_probes")]
        probes: usize,
        /// Defaults to `40/ω̂`.
        #[serde(default)]
        horizon: Option<f64>,
    },
    Smoothing {
        #[serde(default = "default_t_min")]
        t_min: f64,
        #[serde(default = "one")]
        t_max: f64,
        #[serde(default = "default_samples")]
        samples: usize,
    },
    /// Continuous dependence on initial data at the solver horizon.
    Compare {
        #[serde(default)]
        initial: InitialData,
        #[serde(default = "default_ladder")]
        ladder: usize,
        #[serde(default = "default_delta0")]
        delta0: f64,
    },
    Equilibria {
        #[serde(default = "default_starts")]
        starts: usize,
    },
    OmegaLimit {
        #[serde(default)]
        initial: InitialData,
        #[serde(default = "default_starts")]
        starts: usize,
        #[serde(default = "default_threshold")]
        velocity_threshold: f64,
        #[serde(default = "one")]
        dwell: f64,
        #[serde(default = "default_match")]
        match_tolerance: f64,
    },
    Basins {
        #[serde(default = "default_ensemble")]
        ensemble: usize,
        #[serde(default = "one")]
        radius: f64,
        #[serde(default = "default_starts")]
        starts: usize,
        #[serde(default = "default_threshold")]
        velocity_threshold: f64,
        #[serde(default = "one")]
        dwell: f64,
        #[serde(default = "default_match")]
        match_tolerance: f64,
    },
    Split {
        #[serde(default)]
        initial: InitialData,
        #[serde(default = "default_burn_in")]
        burn_in: f64,
        /// Truncation levels as multiples of the trajectory sup-norm.
        #[serde(default = "default_k_factors")]
        k_factors: Vec<f64>,
    },
    ValidateModel {
        #[serde(default = "default_validation_samples")]
        samples: usize,
    },
}

fn default_levels() -> usize {
    3
}
fn default_probes() -> usize {
    32
}
fn default_t_min() -> f64 {
    1e-4
}
fn default_samples() -> usize {
    400
}
fn default_ladder() -> usize {
    7
}
fn default_delta0() -> f64 {
    1e-2
}
fn default_starts() -> usize {
    16
}
fn default_threshold() -> f64 {
    1e-8
}
fn default_match() -> f64 {
    1e-4
}
fn default_ensemble() -> usize {
    20
}
fn default_burn_in() -> f64 {
    20.0
}
fn default_k_factors() -> Vec<f64> {
    vec![0.5, 1.0, 2.0, 4.0]
}
fn default_validation_samples() -> usize {
    2001
}

impl Experiment {
    pub fn name(&self) -> &'static str {
        match self {
            Experiment::Simulate { .. } => "simulate",
            Experiment::AuditEnergy { .. } => "audit-energy",
            Experiment::LinearDecay { .. } => "linear-decay",
            Experiment::Smoothing { .. } => "smoothing",
            Experiment::Compare { .. } => "compare",
            Experiment::Equilibria { .. } => "equilibria",
            Experiment::OmegaLimit { .. } => "omega-limit",
            Experiment::Basins { .. } => "basins",
            Experiment::Split { .. } => "split",
            Experiment::ValidateModel { .. } => "validate-model",
        }
    }
}

/// Parse and validate a JSON document.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let cfg: RunConfig = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        if inner.is_syntax() || inner.is_eof() {
            ConfigError::Syntax { line: inner.line(), column: inner.column(), message: inner.to_string() }
        } else {
            let message = inner.to_string();
            let message = match message.find(" at line ") {
                Some(i) => message[..i].to_string(),
                None => message,
            };
            ConfigError::Invalid { path, message }
        }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

fn positive(path: &str, x: f64) -> Result<(), ConfigError> {
    if x.is_finite() && x > 0.0 {
        Ok(())
    } else {
        Err(ConfigError::at(path, format!("must be positive (got {x})")))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let m = &self.model;
        if !(1..=3).contains(&m.dimension) {
            return Err(ConfigError::at("model.dimension", format!("must be 1, 2 or 3 (got {})", m.dimension)));
        }
        if m.modes_per_dim == 0 {
            return Err(ConfigError::at("model.modes_per_dim", "must be at least 1"));
        }
        if !(m.oversampling.is_finite() && m.oversampling >= 1.0) {
            return Err(ConfigError::at("model.oversampling", format!("must be at least 1 (got {})", m.oversampling)));
        }
        let s = &self.solver;
        positive("solver.dt", s.dt)?;
        positive("solver.horizon", s.horizon)?;
        if s.dt > s.horizon {
            return Err(ConfigError::at("solver.dt", format!("exceeds the horizon {}", s.horizon)));
        }
        if s.snapshot_stride == 0 {
            return Err(ConfigError::at("solver.snapshot_stride", "must be at least 1"));
        }
        if self.output.formats.is_empty() {
            return Err(ConfigError::at("output.formats", "at least one format is required"));
        }
        self.model_spec()?;
        let e = "experiment";
        match &self.experiment {
            Experiment::Simulate { initial } => self.initial_state(initial, 0).map(|_| ())?,
            Experiment::AuditEnergy { initial, levels } => {
                self.initial_state(initial, 0)?;
                if *levels < 2 {
                    return Err(ConfigError::at(&format!("{e}.levels"), "needs at least 2 step sizes"));
                }
            }
            Experiment::LinearDecay { probes, horizon } => {
                if *probes < 10 {
                    return Err(ConfigError::at(&format!("{e}.probes"), "must be at least 10"));
                }
                if let Some(h) = horizon {
                    positive(&format!("{e}.horizon"), *h)?;
                }
            }
            Experiment::Smoothing { t_min, t_max, samples } => {
                positive(&format!("{e}.t_min"), *t_min)?;
                positive(&format!("{e}.t_max"), *t_max)?;
                if t_min >= t_max || *samples < 2 {
                    return Err(ConfigError::at(&format!("{e}.samples"), "need t_min < t_max and at least 2 samples"));
                }
            }
            Experiment::Compare { initial, ladder, delta0 } => {
                self.initial_state(initial, 0)?;
                if *ladder < 4 {
                    return Err(ConfigError::at(&format!("{e}.ladder"), "must be at least 4"));
                }
                positive(&format!("{e}.delta0"), *delta0)?;
            }
            Experiment::Equilibria { starts } => {
                if *starts < 1 {
                    return Err(ConfigError::at(&format!("{e}.starts"), "must be at least 1"));
                }
            }
            Experiment::OmegaLimit { initial, velocity_threshold, dwell, match_tolerance, .. } => {
                self.initial_state(initial, 0)?;
                positive(&format!("{e}.velocity_threshold"), *velocity_threshold)?;
                positive(&format!("{e}.dwell"), *dwell)?;
                positive(&format!("{e}.match_tolerance"), *match_tolerance)?;
            }
            Experiment::Basins { ensemble, radius, velocity_threshold, dwell, match_tolerance, .. } => {
                if *ensemble < 1 {
                    return Err(ConfigError::at(&format!("{e}.ensemble"), "must be at least 1"));
                }
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(ConfigError::at(&format!("{e}.radius"), "must be nonnegative"));
                }
                positive(&format!("{e}.velocity_threshold"), *velocity_threshold)?;
                positive(&format!("{e}.dwell"), *dwell)?;
                positive(&format!("{e}.match_tolerance"), *match_tolerance)?;
            }
            Experiment::Split { initial, burn_in, k_factors } => {
                self.initial_state(initial, 0)?;
                if !(burn_in.is_finite() && *burn_in >= 0.0) {
                    return Err(ConfigError::at(&format!("{e}.burn_in"), "must be nonnegative"));
                }
                if k_factors.is_empty() || k_factors.iter().any(|k| !(k.is_finite() && *k > 0.0)) {
                    return Err(ConfigError::at(&format!("{e}.k_factors"), "must be a nonempty list of positive numbers"));
                }
            }
            Experiment::ValidateModel { samples } => {
                if *samples < 100 {
                    return Err(ConfigError::at(&format!("{e}.samples"), "must be at least 100"));
                }
            }
        }
        Ok(())
    }

    pub fn basis(&self) -> Result<BasisSpec, ConfigError> {
        BasisSpec::with_oversampling(self.model.dimension, self.model.modes_per_dim, self.model.oversampling)
            .map_err(|e| ConfigError::at("model", e.to_string()))
    }

    fn mode_index(&self, path: &str, index: &Option<Vec<usize>>) -> Result<MultiIndex, ConfigError> {
        let d = self.model.dimension;
        let k = index.clone().unwrap_or_else(|| vec![1; d]);
        if k.len() != d || k.iter().any(|&c| c == 0 || c > self.model.modes_per_dim) {
            return Err(ConfigError::at(path, format!("{k:?} is not a mode of the basis")));
        }
        MultiIndex::new(&k).map_err(|e| ConfigError::at(path, e.to_string()))
    }

    fn coefficient_field(&self, path: &str, values: &[f64]) -> Result<SpectralField, ConfigError> {
        SpectralField::from_coeffs(self.basis()?, values.to_vec()).map_err(|e| ConfigError::at(path, e.to_string()))
    }

    pub fn model_spec(&self) -> Result<ModelSpec, ConfigError> {
        let basis = self.basis()?;
        let forcing = match &self.model.forcing {
            ForcingConfig::Zero => SpectralField::zeros(basis),
            ForcingConfig::Mode { index, amplitude } => {
                let k = self.mode_index("model.forcing.index", index)?;
                SpectralField::unit(basis, &k).expect("checked index").scaled(*amplitude)
            }
            ForcingConfig::Coefficients { values } => self.coefficient_field("model.forcing.values", values)?,
        };
        let source = SourceSpec::from(&self.model.source);
        source.check().map_err(|e| ConfigError::at("model.source.params", e.to_string()))?;
        let damping = DampingSpec::from(&self.model.damping);
        damping.check().map_err(|e| ConfigError::at("model.damping.params", e.to_string()))?;
        ModelSpec::new(basis, source, damping, forcing).map_err(|e| ConfigError::at("model", e.to_string()))
    }

    /// Initial state; random data draw from `seed` combined with `stream`.
    pub fn initial_state(&self, initial: &InitialData, stream: u64) -> Result<State, ConfigError> {
        let basis = self.basis()?;
        let path = "experiment.initial";
        match initial {
            InitialData::Zero => Ok(State::zeros(basis)),
            InitialData::Random { radius, regular } => {
                if !(radius.is_finite() && *radius >= 0.0) {
                    return Err(ConfigError::at(&format!("{path}.radius"), "must be nonnegative"));
                }
                let ball = if *regular { Ball::Regular } else { Ball::Energy };
                let mut rng = sampling::rng(self.seed.wrapping_add(stream));
                Ok(sampling::random_state(basis, ball, *radius, &mut rng))
            }
            InitialData::Mode { index, amplitude, velocity } => {
                let k = self.mode_index(&format!("{path}.index"), index)?;
                let e = SpectralField::unit(basis, &k).expect("checked index");
                Ok(State::new(e.scaled(*amplitude), e.scaled(*velocity)).expect("shared basis"))
            }
            InitialData::Coefficients { w, v } => {
                let w = self.coefficient_field(&format!("{path}.w"), w)?;
                let v = self.coefficient_field(&format!("{path}.v"), v)?;
                Ok(State::new(w, v).expect("shared basis"))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const MINIMAL: &str = r#"{"model": {"dimension": 1, "modes_per_dim": 8}, "experiment": {"kind": "simulate"}}"#;

    #[test]
    fn minimal_document_gets_defaults() {
        let cfg = parse_config(MINIMAL).unwrap();
        assert_eq!(cfg.solver.dt, 1e-3);
        assert_eq!(cfg.model.oversampling, 1.5);
        assert_eq!(cfg.seed, 0);
        assert_eq!(cfg.model.source, SourceConfig::Cubic { a: 0.0 });
        assert_eq!(cfg.experiment, Experiment::Simulate { initial: InitialData::Zero });
    }

    #[test]
    fn negative_dt_names_the_field() {
        let text = r#"{"model": {"dimension": 1, "modes_per_dim": 8}, "solver": {"dt": -0.1}, "experiment": {"kind": "simulate"}}"#;
        let err = parse_config(text).unwrap_err();
        assert_eq!(err.path(), Some("solver.dt"));
    }

    #[test]
    fn unknown_family_lists_the_alternatives() {
        let text = r#"{"model": {"dimension": 1, "modes_per_dim": 8, "source": {"family": "septic"}}, "experiment": {"kind": "simulate"}}"#;
        let msg = parse_config(text).unwrap_err().to_string();
        for family in SourceSpec::FAMILIES {
            assert!(msg.contains(family), "{msg}");
        }
        assert!(msg.starts_with("model.source"), "{msg}");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = r#"{"model": {"dimension": 1, "modes_per_dim": 8, "colour": 3}, "experiment": {"kind": "simulate"}}"#;
        let err = parse_config(text).unwrap_err();
        assert!(err.to_string().contains("colour"));
        let text = r#"{"model": {"dimension": 1, "modes_per_dim": 8, "source": {"family": "cubic", "params": {"q": 1}}}, "experiment": {"kind": "simulate"}}"#;
        assert!(parse_config(text).is_err());
    }

    #[test]
    fn syntax_errors_carry_the_line() {
        let text = "{\n  \"model\": {\n    \"dimension\": 1,,\n  }\n}";
        match parse_config(text).unwrap_err() {
            ConfigError::Syntax { line, .. } => assert_eq!(line, 3),
            other => panic!("{other}"),
        }
    }

    #[test]
    fn bad_mode_index() {
        let text = r#"{"model": {"dimension": 2, "modes_per_dim": 3, "forcing": {"kind": "mode", "index": [4, 1], "amplitude": 1}}, "experiment": {"kind": "simulate"}}"#;
        assert_eq!(parse_config(text).unwrap_err().path(), Some("model.forcing.index"));
    }

    #[test]
    fn echo_round_trips() {
        let cfg = parse_config(MINIMAL).unwrap();
        let echo = serde_json::to_string(&cfg).unwrap();
        assert_eq!(parse_config(&echo).unwrap(), cfg);
    }
}
