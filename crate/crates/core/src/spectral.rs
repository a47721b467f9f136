//! Dirichlet sine eigenbasis on the box `(0, π)^d`.
//!
//! Coefficients are stored in the orthonormal basis
//! `e_k(x) = (2/π)^{d/2} Π sin(k_i x_i)`, so Parseval is the plain Euclidean
//! inner product on the coefficient vector. Coefficient and grid arrays are
//! row-major with the last axis fastest.
//!
//! Pointwise work happens on an interior collocation grid with `P` points per
//! axis at `x_j = jπ/(P+1)`. Coefficients and grid values are connected by a
//! type-I discrete sine transform along each axis; the grid quadrature with
//! equal weights `(π/(P+1))^d` is exact for sine products of total frequency
//! below `2(P+1)` per axis.

use std::cell::RefCell;
use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use rustdct::{Dst1, DctPlanner};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const MAX_DIMENSION: usize = 3;

/// Default per-axis grid oversampling.
pub const DEFAULT_OVERSAMPLING: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SpectralError {
    #[error("dimension must be 1, 2 or 3 (got {0})")]
    BadDimension(usize),
    #[error("modes per dimension must be at least 1")]
    NoModes,
    #[error("oversampling factor must be a finite number >= 1 (got {0})")]
    BadOversampling(f64),
    #[error("shape mismatch: expected {expected} values, got {got}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("fields live on different bases")]
    BasisMismatch,
    #[error("Sobolev order {0} outside [-2, 2]")]
    OrderOutOfRange(f64),
    #[error("multi-index {0:?} is not admissible for this basis")]
    BadMultiIndex(Vec<usize>),
    #[error("non-finite coefficient at index {0}")]
    NonFinite(usize),
}

/// Dimension, modes per axis, and grid oversampling of a sine basis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    dimension: usize,
    modes: usize,
    oversampling: f64,
}

impl BasisSpec {
    pub fn new(dimension: usize, modes: usize) -> Result<Self, SpectralError> {
        Self::with_oversampling(dimension, modes, DEFAULT_OVERSAMPLING)
    }

    pub fn with_oversampling(
        dimension: usize,
        modes: usize,
        oversampling: f64,
    ) -> Result<Self, SpectralError> {
        if dimension == 0 || dimension > MAX_DIMENSION {
            return Err(SpectralError::BadDimension(dimension));
        }
        if modes == 0 {
            return Err(SpectralError::NoModes);
        }
        if !oversampling.is_finite() || oversampling < 1.0 {
            return Err(SpectralError::BadOversampling(oversampling));
        }
        Ok(Self { dimension, modes, oversampling })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    pub fn oversampling(&self) -> f64 {
        self.oversampling
    }

    /// Interior collocation points per axis, `ceil(q·N)`.
    pub fn grid_points(&self) -> usize {
        let raw = self.oversampling * self.modes as f64;
        // guard against 1.5 * 8 = 12.000000000000002 style rounding
        ((raw - 1e-9).ceil() as usize).max(self.modes)
    }

    /// Number of coefficients, `N^d`.
    pub fn len(&self) -> usize {
        self.modes.pow(self.dimension as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn grid_len(&self) -> usize {
        self.grid_points().pow(self.dimension as u32)
    }

    /// Grid spacing `π/(P+1)`.
    pub fn spacing(&self) -> f64 {
        PI / (self.grid_points() + 1) as f64
    }

    /// Equal quadrature weight `(π/(P+1))^d`.
    pub fn quadrature_weight(&self) -> f64 {
        self.spacing().powi(self.dimension as i32)
    }

    /// Normalization `(2/π)^{d/2}` of the product-sine basis.
    pub fn normalization(&self) -> f64 {
        (2.0 / PI).powf(self.dimension as f64 / 2.0)
    }

    pub fn multi_index(&self, index: usize) -> MultiIndex {
        let mut k = [0usize; MAX_DIMENSION];
        let mut rest = index;
        for axis in (0..self.dimension).rev() {
            k[axis] = rest % self.modes + 1;
            rest /= self.modes;
        }
        MultiIndex { k, dimension: self.dimension }
    }

    pub fn index_of(&self, k: &MultiIndex) -> Result<usize, SpectralError> {
        if k.dimension != self.dimension || k.components().iter().any(|&c| c == 0 || c > self.modes)
        {
            return Err(SpectralError::BadMultiIndex(k.components().to_vec()));
        }
        Ok(k.components().iter().fold(0, |acc, &c| acc * self.modes + (c - 1)))
    }

    /// `λ_k` for every coefficient slot, in storage order.
    pub fn eigenvalues(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.multi_index(i).eigenvalue()).collect()
    }

    /// Smallest Dirichlet eigenvalue of the box, which is `d`.
    pub fn first_eigenvalue(&self) -> f64 {
        (0..self.len())
            .map(|i| self.multi_index(i).eigenvalue())
            .fold(f64::INFINITY, f64::min)
    }

    /// Coordinates of the grid point with flat index `index`.
    pub fn grid_point(&self, index: usize) -> [f64; MAX_DIMENSION] {
        let p = self.grid_points();
        let h = self.spacing();
        let mut x = [0.0; MAX_DIMENSION];
        let mut rest = index;
        for axis in (0..self.dimension).rev() {
            x[axis] = ((rest % p) + 1) as f64 * h;
            rest /= p;
        }
        x
    }
}

/// Multi-index `k = (k_1, …, k_d)` with every component at least 1.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct MultiIndex {
    k: [usize; MAX_DIMENSION],
    dimension: usize,
}

impl MultiIndex {
    pub fn new(components: &[usize]) -> Result<Self, SpectralError> {
        if components.is_empty() || components.len() > MAX_DIMENSION || components.contains(&0) {
            return Err(SpectralError::BadMultiIndex(components.to_vec()));
        }
        let mut k = [0usize; MAX_DIMENSION];
        k[..components.len()].copy_from_slice(components);
        Ok(Self { k, dimension: components.len() })
    }

    pub fn components(&self) -> &[usize] {
        &self.k[..self.dimension]
    }

    /// `λ_k = Σ k_i²`.
    pub fn eigenvalue(&self) -> f64 {
        self.components().iter().map(|&c| (c * c) as f64).sum()
    }
}

pub fn eigenvalue(k: &MultiIndex) -> f64 {
    k.eigenvalue()
}

pub fn first_eigenvalue(basis: &BasisSpec) -> f64 {
    basis.first_eigenvalue()
}

/// Which sine-transform realization to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransformKind {
    /// FFT-based type-I DST per axis.
    Fast,
    /// Explicit dense sine matrix per axis.
    Dense,
}

thread_local! {
    static PLANNER: RefCell<(DctPlanner<f64>, HashMap<usize, Arc<dyn Dst1<f64>>>)> =
        RefCell::new((DctPlanner::new(), HashMap::new()));
}

fn dst1_plan(len: usize) -> Arc<dyn Dst1<f64>> {
    PLANNER.with(|cell| {
        let mut guard = cell.borrow_mut();
        let (planner, cache) = &mut *guard;
        cache.entry(len).or_insert_with(|| planner.plan_dst1(len)).clone()
    })
}

fn dense_dst1(line: &mut [f64], scratch: &mut Vec<f64>) {
    let n = line.len();
    let h = PI / (n + 1) as f64;
    scratch.clear();
    scratch.extend_from_slice(line);
    for (k, out) in line.iter_mut().enumerate() {
        *out = scratch
            .iter()
            .enumerate()
            .map(|(j, &x)| x * (((j + 1) * (k + 1)) as f64 * h).sin())
            .sum();
    }
}

/// Unnormalized DST-I along every axis of a `side^d` cube.
fn sine_transform_cube(data: &mut [f64], side: usize, dimension: usize, kind: TransformKind) {
    let plan = match kind {
        TransformKind::Fast => Some(dst1_plan(side)),
        TransformKind::Dense => None,
    };
    let mut line = vec![0.0; side];
    let mut scratch = vec![0.0; plan.as_ref().map_or(side, |p| p.get_scratch_len())];
    for axis in 0..dimension {
        let stride = side.pow((dimension - 1 - axis) as u32);
        let block = stride * side;
        for outer in (0..data.len()).step_by(block) {
            for inner in 0..stride {
                let base = outer + inner;
                for (j, slot) in line.iter_mut().enumerate() {
                    *slot = data[base + j * stride];
                }
                match &plan {
                    Some(p) => p.process_dst1_with_scratch(&mut line, &mut scratch),
                    None => dense_dst1(&mut line, &mut scratch),
                }
                for (j, &value) in line.iter().enumerate() {
                    data[base + j * stride] = value;
                }
            }
        }
    }
}

/// Map a coefficient slot to its position in the `P^d` cube.
fn cube_index(basis: &BasisSpec, index: usize) -> usize {
    let p = basis.grid_points();
    basis
        .multi_index(index)
        .components()
        .iter()
        .fold(0, |acc, &c| acc * p + (c - 1))
}

/// Real coefficients over the orthonormal sine basis.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralField {
    basis: BasisSpec,
    coeffs: Vec<f64>,
}

impl SpectralField {
    pub fn zeros(basis: BasisSpec) -> Self {
        Self { coeffs: vec![0.0; basis.len()], basis }
    }

    pub fn from_coeffs(basis: BasisSpec, coeffs: Vec<f64>) -> Result<Self, SpectralError> {
        if coeffs.len() != basis.len() {
            return Err(SpectralError::ShapeMismatch { expected: basis.len(), got: coeffs.len() });
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(SpectralError::NonFinite(i));
        }
        Ok(Self { basis, coeffs })
    }

    /// Unit coefficient on a single mode.
    pub fn unit(basis: BasisSpec, k: &MultiIndex) -> Result<Self, SpectralError> {
        let index = basis.index_of(k)?;
        let mut field = Self::zeros(basis);
        field.coeffs[index] = 1.0;
        Ok(field)
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn is_finite(&self) -> bool {
        self.coeffs.iter().all(|c| c.is_finite())
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&c| c == 0.0)
    }

    pub fn scaled(&self, factor: f64) -> Self {
        Self { basis: self.basis, coeffs: self.coeffs.iter().map(|c| c * factor).collect() }
    }

    /// `self += a * other`.
    pub fn axpy(&mut self, a: f64, other: &SpectralField) {
        debug_assert_eq!(self.basis, other.basis);
        for (x, y) in self.coeffs.iter_mut().zip(&other.coeffs) {
            *x += a * y;
        }
    }

    pub fn add(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(1.0, other);
        out
    }

    pub fn sub(&self, other: &SpectralField) -> Self {
        let mut out = self.clone();
        out.axpy(-1.0, other);
        out
    }

    /// Multiply coefficient `k` by `λ_k^power`.
    pub fn apply_laplacian_power(&self, power: f64) -> Self {
        let coeffs = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| c * self.basis.multi_index(i).eigenvalue().powf(power))
            .collect();
        Self { basis: self.basis, coeffs }
    }

    /// `-Δ` applied spectrally.
    pub fn neg_laplacian(&self) -> Self {
        self.apply_laplacian_power(1.0)
    }

    pub fn inner_product(&self, other: &SpectralField) -> Result<f64, SpectralError> {
        if self.basis != other.basis {
            return Err(SpectralError::BasisMismatch);
        }
        Ok(self.coeffs.iter().zip(&other.coeffs).map(|(a, b)| a * b).sum())
    }

    /// `(Σ λ_k^s c_k²)^{1/2}` for `s ∈ [-2, 2]`.
    pub fn sobolev_norm(&self, s: f64) -> Result<f64, SpectralError> {
        if !(-2.0..=2.0).contains(&s) {
            return Err(SpectralError::OrderOutOfRange(s));
        }
        let sum: f64 = self
            .coeffs
            .iter()
            .enumerate()
            .map(|(i, c)| self.basis.multi_index(i).eigenvalue().powf(s) * c * c)
            .sum();
        Ok(sum.sqrt())
    }

    /// Seminorm of integer order without the `powf` call; used in hot loops.
    pub(crate) fn weighted_square(&self, eigenvalues: &[f64], order: i32) -> f64 {
        self.coeffs
            .iter()
            .zip(eigenvalues)
            .map(|(c, l)| l.powi(order) * c * c)
            .sum()
    }

    pub fn l2_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn to_grid(&self) -> GridField {
        self.to_grid_with(TransformKind::Fast)
    }

    pub fn to_grid_with(&self, kind: TransformKind) -> GridField {
        let basis = self.basis;
        let mut cube = vec![0.0; basis.grid_len()];
        for (i, &c) in self.coeffs.iter().enumerate() {
            cube[cube_index(&basis, i)] = c;
        }
        sine_transform_cube(&mut cube, basis.grid_points(), basis.dimension(), kind);
        let scale = basis.normalization();
        cube.iter_mut().for_each(|v| *v *= scale);
        GridField { basis, values: cube }
    }
}

/// Values on the interior collocation grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridField {
    basis: BasisSpec,
    values: Vec<f64>,
}

impl GridField {
    pub fn zeros(basis: BasisSpec) -> Self {
        Self { values: vec![0.0; basis.grid_len()], basis }
    }

    pub fn from_values(basis: BasisSpec, values: Vec<f64>) -> Result<Self, SpectralError> {
        if values.len() != basis.grid_len() {
            return Err(SpectralError::ShapeMismatch { expected: basis.grid_len(), got: values.len() });
        }
        Ok(Self { basis, values })
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn map(&self, phi: impl Fn(f64) -> f64) -> Self {
        Self { basis: self.basis, values: self.values.iter().map(|&v| phi(v)).collect() }
    }

    /// Grid quadrature `∫ u dx`.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.basis.quadrature_weight()
    }

    /// Discrete `L_p` norm with the grid quadrature weights.
    pub fn lp_norm(&self, p: f64) -> f64 {
        let sum: f64 = self.values.iter().map(|v| v.abs().powf(p)).sum();
        (sum * self.basis.quadrature_weight()).powf(1.0 / p)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Measure of the grid, `(P·π/(P+1))^d`; what the quadrature assigns to
    /// the constant function 1.
    pub fn volume(&self) -> f64 {
        self.basis.grid_len() as f64 * self.basis.quadrature_weight()
    }

    pub fn to_coeffs(&self) -> SpectralField {
        self.to_coeffs_with(TransformKind::Fast)
    }

    pub fn to_coeffs_with(&self, kind: TransformKind) -> SpectralField {
        let basis = self.basis;
        let mut cube = self.values.clone();
        sine_transform_cube(&mut cube, basis.grid_points(), basis.dimension(), kind);
        let scale = basis.normalization() * basis.quadrature_weight();
        let coeffs = (0..basis.len()).map(|i| cube[cube_index(&basis, i)] * scale).collect();
        SpectralField { basis, coeffs }
    }
}

pub fn to_grid(f: &SpectralField) -> GridField {
    f.to_grid()
}

pub fn to_coeffs(g: &GridField) -> SpectralField {
    g.to_coeffs()
}

pub fn sobolev_norm(f: &SpectralField, s: f64) -> Result<f64, SpectralError> {
    f.sobolev_norm(s)
}

pub fn inner_product(f: &SpectralField, g: &SpectralField) -> Result<f64, SpectralError> {
    f.inner_product(g)
}
