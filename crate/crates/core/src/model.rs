//! Source and damping nonlinearities, their antiderivatives and truncations,
//! the pseudospectral Nemytskii map, and the growth-condition validator.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::spectral::{BasisSpec, GridField, SpectralError, SpectralField};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("non-finite value produced on the collocation grid")]
    NonFinite,
    #[error("invalid parameter for {family}: {reason}")]
    BadParameter { family: &'static str, reason: String },
    #[error("forcing lives on a different basis than the model")]
    ForcingBasis,
    #[error("model rejected: {}", summarize(.0))]
    Rejected(Box<ValidationReport>),
    #[error("validator needs at least 100 samples (got {0})")]
    TooFewSamples(usize),
    #[error(transparent)]
    Spectral(#[from] SpectralError),
}

fn summarize(report: &ValidationReport) -> String {
    report
        .violations
        .iter()
        .map(|v| v.condition.to_string())
        .collect::<Vec<_>>()
        .join(", ")
}

/// Dense polynomial `Σ c_p s^p`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Poly(Vec<f64>);

impl Poly {
    pub fn new(coeffs: Vec<f64>) -> Self {
        let mut coeffs = coeffs;
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self(coeffs)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len().saturating_sub(1)
    }

    pub fn eval(&self, s: f64) -> f64 {
        self.0.iter().rev().fold(0.0, |acc, &c| acc * s + c)
    }

    /// `∫_0^s p(u) du`.
    pub fn antiderivative(&self) -> Poly {
        let mut out = vec![0.0];
        out.extend(self.0.iter().enumerate().map(|(p, c)| c / (p + 1) as f64));
        Poly::new(out)
    }

    pub fn derivative(&self) -> Poly {
        Poly::new(self.0.iter().enumerate().skip(1).map(|(p, c)| c * p as f64).collect())
    }

    /// `s · p(s)`.
    pub fn times_s(&self) -> Poly {
        let mut out = vec![0.0];
        out.extend_from_slice(&self.0);
        Poly::new(out)
    }
}

/// Source term `f` and its antiderivative `F(s) = ∫_0^s f`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum SourceSpec {
    Zero,
    /// `s³ − a·s`
    Cubic { a: f64 },
    /// `|s|⁴ s − a·s`
    Quintic { a: f64 },
    /// `Σ c_j s^{2j+1}`
    OddPolynomial { coeffs: Vec<f64> },
}

impl SourceSpec {
    pub const FAMILIES: &'static [&'static str] = &["zero", "cubic", "quintic", "odd-polynomial"];

    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |family, reason: &str| ModelError::BadParameter { family, reason: reason.into() };
        match self {
            SourceSpec::Zero => Ok(()),
            SourceSpec::Cubic { a } | SourceSpec::Quintic { a } => {
                let family = if matches!(self, SourceSpec::Cubic { .. }) { "cubic" } else { "quintic" };
                if !a.is_finite() || *a < 0.0 {
                    Err(bad(family, "a must be finite and >= 0"))
                } else {
                    Ok(())
                }
            }
            SourceSpec::OddPolynomial { coeffs } => {
                if coeffs.iter().any(|c| !c.is_finite()) {
                    return Err(bad("odd-polynomial", "coefficients must be finite"));
                }
                match coeffs.iter().rev().find(|&&c| c != 0.0) {
                    Some(&lead) if lead < 0.0 && coeffs.len() > 1 => {
                        Err(bad("odd-polynomial", "leading coefficient must be positive"))
                    }
                    _ => Ok(()),
                }
            }
        }
    }

    pub fn poly(&self) -> Poly {
        match self {
            SourceSpec::Zero => Poly::new(vec![]),
            SourceSpec::Cubic { a } => Poly::new(vec![0.0, -a, 0.0, 1.0]),
            SourceSpec::Quintic { a } => Poly::new(vec![0.0, -a, 0.0, 0.0, 0.0, 1.0]),
            SourceSpec::OddPolynomial { coeffs } => {
                let mut dense = vec![0.0; 2 * coeffs.len()];
                for (j, c) in coeffs.iter().enumerate() {
                    dense[2 * j + 1] = *c;
                }
                Poly::new(dense)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            SourceSpec::Zero => "zero",
            SourceSpec::Cubic { .. } => "cubic",
            SourceSpec::Quintic { .. } => "quintic",
            SourceSpec::OddPolynomial { .. } => "odd-polynomial",
        }
    }
}

/// Damping coefficient `σ ≥ 0` with `Σ(s) = ∫_0^s σ` and `Σ̂(s) = ∫_0^s u σ(u) du`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum DampingSpec {
    Zero,
    /// `b·s⁴`
    Quartic { b: f64 },
    /// `Σ c_j s^{2j}`
    EvenPolynomial { coeffs: Vec<f64> },
    Constant { c: f64 },
}

impl DampingSpec {
    pub const FAMILIES: &'static [&'static str] = &["zero", "quartic", "even-polynomial", "constant"];

    pub fn check(&self) -> Result<(), ModelError> {
        let bad = |family, reason: &str| ModelError::BadParameter { family, reason: reason.into() };
        match self {
            DampingSpec::Zero => Ok(()),
            DampingSpec::Quartic { b } if !b.is_finite() || *b < 0.0 => {
                Err(bad("quartic", "b must be finite and >= 0"))
            }
            DampingSpec::Constant { c } if !c.is_finite() => Err(bad("constant", "c must be finite")),
            DampingSpec::EvenPolynomial { coeffs } if coeffs.iter().any(|c| !c.is_finite()) => {
                Err(bad("even-polynomial", "coefficients must be finite"))
            }
            _ => Ok(()),
        }
    }

    pub fn poly(&self) -> Poly {
        match self {
            DampingSpec::Zero => Poly::new(vec![]),
            DampingSpec::Quartic { b } => Poly::new(vec![0.0, 0.0, 0.0, 0.0, *b]),
            DampingSpec::Constant { c } => Poly::new(vec![*c]),
            DampingSpec::EvenPolynomial { coeffs } => {
                let mut dense = vec![0.0; 2 * coeffs.len()];
                for (j, c) in coeffs.iter().enumerate() {
                    dense[2 * j] = *c;
                }
                Poly::new(dense)
            }
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            DampingSpec::Zero => "zero",
            DampingSpec::Quartic { .. } => "quartic",
            DampingSpec::EvenPolynomial { .. } => "even-polynomial",
            DampingSpec::Constant { .. } => "constant",
        }
    }
}

/// Evaluated nonlinearities; polynomials are expanded once so the hot loops
/// only run Horner.
#[derive(Debug, Clone, PartialEq)]
pub struct Nonlinearity {
    pub f: Poly,
    pub big_f: Poly,
    pub sigma: Poly,
    pub big_sigma: Poly,
    pub sigma_hat: Poly,
}

impl Nonlinearity {
    fn new(source: &SourceSpec, damping: &DampingSpec) -> Self {
        let f = source.poly();
        let sigma = damping.poly();
        Self {
            big_f: f.antiderivative(),
            big_sigma: sigma.antiderivative(),
            sigma_hat: sigma.times_s().antiderivative(),
            f,
            sigma,
        }
    }
}

/// Data of the damped wave problem on a Galerkin basis.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSpec {
    basis: BasisSpec,
    source: SourceSpec,
    damping: DampingSpec,
    forcing: SpectralField,
    nl: Nonlinearity,
}

impl ModelSpec {
    pub fn new(
        basis: BasisSpec,
        source: SourceSpec,
        damping: DampingSpec,
        forcing: SpectralField,
    ) -> Result<Self, ModelError> {
        source.check()?;
        damping.check()?;
        if *forcing.basis() != basis {
            return Err(ModelError::ForcingBasis);
        }
        if !forcing.is_finite() {
            return Err(ModelError::NonFinite);
        }
        let nl = Nonlinearity::new(&source, &damping);
        Ok(Self { basis, source, damping, forcing, nl })
    }

    /// `f(s) = s³`, `σ(s) = s⁴`, forcing `amplitude · e_(1,…,1)`.
    pub fn cubic_quartic(basis: BasisSpec, amplitude: f64) -> Self {
        let mut g = SpectralField::zeros(basis);
        g.coeffs_mut()[0] = amplitude;
        Self::new(basis, SourceSpec::Cubic { a: 0.0 }, DampingSpec::Quartic { b: 1.0 }, g)
            .expect("built-in model is valid")
    }

    /// `f(s) = s³ − a·s`, no damping nonlinearity, `g = 0`.
    pub fn pitchfork(basis: BasisSpec, a: f64) -> Result<Self, ModelError> {
        Self::new(basis, SourceSpec::Cubic { a }, DampingSpec::Zero, SpectralField::zeros(basis))
    }

    /// `f = σ = 0`, `g = 0`.
    pub fn linear(basis: BasisSpec) -> Self {
        Self::new(basis, SourceSpec::Zero, DampingSpec::Zero, SpectralField::zeros(basis))
            .expect("built-in model is valid")
    }

    pub fn with_forcing(&self, forcing: SpectralField) -> Result<Self, ModelError> {
        Self::new(self.basis, self.source.clone(), self.damping.clone(), forcing)
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn source(&self) -> &SourceSpec {
        &self.source
    }

    pub fn damping(&self) -> &DampingSpec {
        &self.damping
    }

    pub fn forcing(&self) -> &SpectralField {
        &self.forcing
    }

    pub fn nonlinearity(&self) -> &Nonlinearity {
        &self.nl
    }

    pub fn f(&self, s: f64) -> f64 {
        self.nl.f.eval(s)
    }

    pub fn big_f(&self, s: f64) -> f64 {
        self.nl.big_f.eval(s)
    }

    pub fn sigma(&self, s: f64) -> f64 {
        self.nl.sigma.eval(s)
    }

    pub fn big_sigma(&self, s: f64) -> f64 {
        self.nl.big_sigma.eval(s)
    }

    pub fn sigma_hat(&self, s: f64) -> f64 {
        self.nl.sigma_hat.eval(s)
    }

    /// Largest polynomial degree appearing in `f(w)` and `σ(w)·w_t`.
    pub fn nonlinear_degree(&self) -> usize {
        let sigma_v = if self.nl.sigma.coeffs().is_empty() { 0 } else { self.nl.sigma.degree() + 1 };
        self.nl.f.degree().max(sigma_v)
    }
}

/// Dealiased projection of `φ∘f`: evaluate on the oversampled grid, transform back.
pub fn nemytskii(phi: impl Fn(f64) -> f64, f: &SpectralField) -> Result<SpectralField, ModelError> {
    let grid = f.to_grid().map(phi);
    if grid.values().iter().any(|v| !v.is_finite()) {
        return Err(ModelError::NonFinite);
    }
    Ok(grid.to_coeffs())
}

/// `f_k(s) = f(clamp(s, -k, k))`.
pub fn truncate_source(spec: &SourceSpec, k: f64) -> impl Fn(f64) -> f64 + Clone + Send + Sync {
    let f = spec.poly();
    move |s| f.eval(s.clamp(-k, k))
}

/// `σ_k(s) = σ(clamp(s, -k, k))`.
pub fn truncate_damping(spec: &DampingSpec, k: f64) -> impl Fn(f64) -> f64 + Clone + Send + Sync {
    let sigma = spec.poly();
    move |s| sigma.eval(s.clamp(-k, k))
}

/// `sign(s)·max(|s| − m, 0)`.
pub fn cutoff_value(s: f64, m: f64) -> f64 {
    if s > m {
        s - m
    } else if s < -m {
        s + m
    } else {
        0.0
    }
}

pub fn cutoff_grid(g: &GridField, m: f64) -> GridField {
    g.map(|s| cutoff_value(s, m))
}

/// Pointwise cutoff on the grid, re-projected onto the basis.
pub fn cutoff(f: &SpectralField, m: f64) -> SpectralField {
    cutoff_grid(&f.to_grid(), m).to_coeffs()
}

/// Grid quadrature of `anti(w(x))` over the box.
pub fn functional_integral(anti: impl Fn(f64) -> f64, f: &SpectralField) -> Result<f64, ModelError> {
    let grid = f.to_grid().map(anti);
    let value = grid.integral();
    if value.is_finite() {
        Ok(value)
    } else {
        Err(ModelError::NonFinite)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Condition {
    /// `|f(s) − f(t)| ≤ c(1 + |s|⁴ + |t|⁴)|s − t|`
    SourceGrowth,
    /// `liminf f(s)/s > −λ₁`
    SourceSign,
    DampingNonnegative,
    /// `|σ(s)| ≤ c(1 + |s|⁴)`
    DampingGrowth,
    /// `F' = f` at sampled points
    Antiderivative,
}

impl std::fmt::Display for Condition {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        let name = match self {
            Condition::SourceGrowth => "source growth",
            Condition::SourceSign => "source sign",
            Condition::DampingNonnegative => "damping nonnegativity",
            Condition::DampingGrowth => "damping growth",
            Condition::Antiderivative => "antiderivative consistency",
        };
        f.write_str(name)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub condition: Condition,
    pub s: f64,
    pub t: Option<f64>,
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationOptions {
    /// Samples are drawn from `[-range, range]`.
    pub range: f64,
    /// The sign condition is checked for `|s|` in `[sign_window_start, range]`.
    pub sign_window_start: f64,
    pub sign_margin: f64,
    /// Growth constants on `[-range, range]` may exceed those on
    /// `[-range/2, range/2]` by at most this factor.
    pub growth_tolerance: f64,
}

impl Default for ValidationOptions {
    fn default() -> Self {
        Self { range: 10.0, sign_window_start: 5.0, sign_margin: 1e-3, growth_tolerance: 1.5 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub passed: bool,
    pub options: ValidationOptions,
    pub sample_count: usize,
    /// Smallest `c` for the source growth bound on the full window.
    pub source_constant: f64,
    pub source_constant_half_window: f64,
    /// Smallest `c` for the damping growth bound on the full window.
    pub damping_constant: f64,
    pub damping_constant_half_window: f64,
    pub min_source_ratio: f64,
    pub first_eigenvalue: f64,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
}

pub fn validate_conditions(model: &ModelSpec, sample_count: usize) -> Result<ValidationReport, ModelError> {
    validate_conditions_with(model, sample_count, &ValidationOptions::default())
}

pub fn validate_conditions_with(
    model: &ModelSpec,
    sample_count: usize,
    opts: &ValidationOptions,
) -> Result<ValidationReport, ModelError> {
    if sample_count < 100 {
        return Err(ModelError::TooFewSamples(sample_count));
    }
    let range = opts.range;
    let samples: Vec<f64> = (0..sample_count)
        .map(|i| -range + 2.0 * range * i as f64 / (sample_count - 1) as f64)
        .collect();
    let nl = model.nonlinearity();
    let mut violations = Vec::new();

    // source growth: smallest admissible c over all sample pairs
    let mut source_c = [0.0f64; 2];
    let mut source_witness = (0.0, 0.0);
    for (i, &s) in samples.iter().enumerate() {
        for &t in &samples[i + 1..] {
            let ratio = (nl.f.eval(s) - nl.f.eval(t)).abs()
                / ((1.0 + s.powi(4) + t.powi(4)) * (s - t).abs());
            if ratio > source_c[0] {
                source_c[0] = ratio;
                source_witness = (s, t);
            }
            if s.abs() <= range / 2.0 && t.abs() <= range / 2.0 {
                source_c[1] = source_c[1].max(ratio);
            }
        }
    }
    if !source_c[0].is_finite() || source_c[0] > opts.growth_tolerance * source_c[1].max(f64::MIN_POSITIVE) {
        violations.push(Violation {
            condition: Condition::SourceGrowth,
            s: source_witness.0,
            t: Some(source_witness.1),
            value: source_c[0],
        });
    }

    let lambda1 = model.basis().first_eigenvalue();
    let mut min_ratio = f64::INFINITY;
    for &s in samples.iter().filter(|s| s.abs() >= opts.sign_window_start) {
        let ratio = nl.f.eval(s) / s;
        min_ratio = min_ratio.min(ratio);
        if ratio <= -lambda1 + opts.sign_margin {
            violations.push(Violation { condition: Condition::SourceSign, s, t: None, value: ratio });
        }
    }

    let mut damping_c = [0.0f64; 2];
    let mut damping_witness = 0.0;
    for &s in &samples {
        let sigma = nl.sigma.eval(s);
        if sigma < 0.0 {
            violations.push(Violation { condition: Condition::DampingNonnegative, s, t: None, value: sigma });
        }
        let ratio = sigma.abs() / (1.0 + s.powi(4));
        if ratio > damping_c[0] {
            damping_c[0] = ratio;
            damping_witness = s;
        }
        if s.abs() <= range / 2.0 {
            damping_c[1] = damping_c[1].max(ratio);
        }
    }
    if damping_c[0] > opts.growth_tolerance * damping_c[1] && damping_c[0] > 0.0 {
        violations.push(Violation {
            condition: Condition::DampingGrowth,
            s: damping_witness,
            t: None,
            value: damping_c[0],
        });
    }

    // F' = f and Σ' = σ by central differences
    for &s in samples.iter().step_by((sample_count / 50).max(1)) {
        let h = 1e-5 * (1.0 + s.abs());
        let df = (nl.big_f.eval(s + h) - nl.big_f.eval(s - h)) / (2.0 * h);
        let ds = (nl.big_sigma.eval(s + h) - nl.big_sigma.eval(s - h)) / (2.0 * h);
        let scale_f = 1.0 + nl.f.eval(s).abs();
        let scale_s = 1.0 + nl.sigma.eval(s).abs();
        let err = ((df - nl.f.eval(s)).abs() / scale_f).max((ds - nl.sigma.eval(s)).abs() / scale_s);
        if err > 1e-6 {
            violations.push(Violation { condition: Condition::Antiderivative, s, t: None, value: err });
        }
    }

    let mut warnings = Vec::new();
    let degree = model.nonlinear_degree();
    let needed = (degree as f64 + 1.0) / 2.0;
    if degree > 1 && model.basis().oversampling() < needed {
        warnings.push(format!(
            "oversampling {} is below ({} + 1)/2 = {}; products of degree {} alias on the grid",
            model.basis().oversampling(),
            degree,
            needed,
            degree
        ));
    }

    let report = ValidationReport {
        passed: violations.is_empty(),
        options: opts.clone(),
        sample_count,
        source_constant: source_c[0],
        source_constant_half_window: source_c[1],
        damping_constant: damping_c[0],
        damping_constant_half_window: damping_c[1],
        min_source_ratio: min_ratio,
        first_eigenvalue: lambda1,
        violations,
        warnings,
    };
    if report.passed {
        Ok(report)
    } else {
        Err(ModelError::Rejected(Box::new(report)))
    }
}
