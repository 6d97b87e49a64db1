//! Dense matrices of `∂`, `x·`, translations and the SPDE generators in the
//! truncated Hermite basis.
//!
//! With `∂h_n = sqrt(n/2)h_{n−1} − sqrt((n+1)/2)h_{n+1}` and
//! `x h_n = sqrt(n/2)h_{n−1} + sqrt((n+1)/2)h_{n+1}`, column `n` of each
//! matrix holds the coefficients of the image of `h_n`.

use std::fmt;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};
use crate::hermite_basis::{sobolev_weights, BasisSpec, CoeffVector};
use crate::levy_sde::LevyModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum OperatorLabel {
    D,
    M,
    /// `T(y)`.
    Translation(f64),
    Astar,
    Lstar,
    Ltest,
    JumpGen,
    /// `∫(T(F(0,x)) − I)ν(dx)`.
    JumpCompensator,
    /// `T(y) − I`.
    JumpOp(f64),
    Custom,
}

impl fmt::Display for OperatorLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            OperatorLabel::Translation(y) => write!(f, "T({y})"),
            OperatorLabel::JumpOp(y) => write!(f, "JumpOp({y})"),
            other => write!(f, "{other:?}"),
        }
    }
}

/// An `N×N` operator in the Hermite basis.
#[derive(Debug, Clone, PartialEq)]
pub struct OperatorMatrix {
    entries: DMatrix<f64>,
    basis: BasisSpec,
    label: OperatorLabel,
}

impl OperatorMatrix {
    pub fn new(entries: DMatrix<f64>, basis: BasisSpec, label: OperatorLabel) -> Result<Self> {
        if entries.nrows() != basis.n() || entries.ncols() != basis.n() {
            return Err(Error::InvalidInput(format!(
                "operator must be {0}x{0}, got {1}x{2}",
                basis.n(),
                entries.nrows(),
                entries.ncols()
            )));
        }
        if entries.iter().any(|v| !v.is_finite()) {
            return Err(Error::Numerical(format!("{label} has non-finite entries")));
        }
        Ok(Self { entries, basis, label })
    }

    pub fn entries(&self) -> &DMatrix<f64> {
        &self.entries
    }

    pub fn into_entries(self) -> DMatrix<f64> {
        self.entries
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn label(&self) -> OperatorLabel {
        self.label
    }

    pub fn get(&self, m: usize, n: usize) -> f64 {
        self.entries[(m, n)]
    }

    pub fn apply_slice(&self, u: &[f64]) -> Vec<f64> {
        let v = &self.entries * DVector::from_column_slice(u);
        v.as_slice().to_vec()
    }

    pub fn apply(&self, u: &CoeffVector) -> Result<CoeffVector> {
        if u.len() != self.basis.n() {
            return Err(Error::InvalidInput(format!(
                "vector of length {} for {} operator of size {}",
                u.len(),
                self.label,
                self.basis.n()
            )));
        }
        CoeffVector::new(self.basis, self.apply_slice(u.as_slice()))
    }

    pub fn transpose(&self) -> OperatorMatrix {
        OperatorMatrix { entries: self.entries.transpose(), basis: self.basis, label: OperatorLabel::Custom }
    }

    /// Largest entry gap on the `(N−B)×(N−B)` block.
    pub fn active_gap(&self, other: &DMatrix<f64>) -> f64 {
        let k = self.basis.active();
        let mut worst: f64 = 0.0;
        for j in 0..k {
            for i in 0..k {
                worst = worst.max((self.entries[(i, j)] - other[(i, j)]).abs());
            }
        }
        worst
    }
}

/// Matrix of `∂`; skew-symmetric.
pub fn derivative_matrix(spec: &BasisSpec) -> OperatorMatrix {
    let n = spec.n();
    let mut d = DMatrix::zeros(n, n);
    for k in 1..n {
        let a = (k as f64 / 2.0).sqrt();
        d[(k - 1, k)] = a;
        d[(k, k - 1)] = -a;
    }
    OperatorMatrix { entries: d, basis: *spec, label: OperatorLabel::D }
}

/// Matrix of multiplication by `x`; symmetric.
pub fn multiplication_matrix(spec: &BasisSpec) -> OperatorMatrix {
    let n = spec.n();
    let mut m = DMatrix::zeros(n, n);
    for k in 1..n {
        let a = (k as f64 / 2.0).sqrt();
        m[(k - 1, k)] = a;
        m[(k, k - 1)] = a;
    }
    OperatorMatrix { entries: m, basis: *spec, label: OperatorLabel::M }
}

fn check_shift(y: f64, spec: &BasisSpec) -> Result<()> {
    let limit = 2.0 * spec.quad_halfwidth();
    if !y.is_finite() || y.abs() > limit {
        return Err(Error::Range(format!("translation |y| = {} exceeds 2L = {limit}", y.abs())));
    }
    Ok(())
}

fn norm_one(a: &DMatrix<f64>) -> f64 {
    a.column_iter().map(|c| c.iter().map(|v| v.abs()).sum::<f64>()).fold(0.0, f64::max)
}

/// `exp(A)` by scaling and squaring with a truncated Taylor series.
pub fn expm(a: &DMatrix<f64>, tolerance: f64) -> DMatrix<f64> {
    let n = a.nrows();
    let norm = norm_one(a);
    let squarings = if norm > 0.5 { (norm / 0.5).log2().ceil() as i32 } else { 0 };
    let scaled = a / 2f64.powi(squarings);
    // each squaring doubles the relative error of the scaled exponential
    let term_tol = tolerance / 2f64.powi(squarings);
    let mut result = DMatrix::identity(n, n);
    let mut term = DMatrix::identity(n, n);
    for k in 1..64 {
        term = &term * &scaled / k as f64;
        result += &term;
        if norm_one(&term) <= term_tol * norm_one(&result) {
            break;
        }
    }
    for _ in 0..squarings {
        result = &result * &result;
    }
    result
}

/// `T(y) = exp(−y·D)`, the coefficient action of `g ↦ g(· − y)`.
pub fn translation_matrix(y: f64, spec: &BasisSpec) -> Result<OperatorMatrix> {
    check_shift(y, spec)?;
    if y == 0.0 {
        return OperatorMatrix::new(DMatrix::identity(spec.n(), spec.n()), *spec, OperatorLabel::Translation(0.0));
    }
    let d = derivative_matrix(spec).entries * (-y);
    OperatorMatrix::new(expm(&d, 1e-12), *spec, OperatorLabel::Translation(y))
}

/// `T(y) − I`.
pub fn jump_operator_matrix(y: f64, spec: &BasisSpec) -> Result<OperatorMatrix> {
    let t = translation_matrix(y, spec)?;
    let n = spec.n();
    OperatorMatrix::new(t.entries - DMatrix::identity(n, n), *spec, OperatorLabel::JumpOp(y))
}

/// Translations through the eigenbasis of the multiplication matrix.
///
/// `D = i·U·M·U*` with `U = diag(iⁿ)`, so with `M = VΛVᵀ` the matrix
/// `exp(−yD)` has entries `Re(i^{m−n}·(V e^{−iyΛ} Vᵀ)[m,n])`. Weighted sums of
/// translations then cost two matrix products regardless of the number of shifts.
#[derive(Debug, Clone)]
pub struct TranslationSpectrum {
    basis: BasisSpec,
    vectors: DMatrix<f64>,
    values: DVector<f64>,
}

impl TranslationSpectrum {
    pub fn new(spec: &BasisSpec) -> Result<Self> {
        let m = multiplication_matrix(spec).entries;
        let eig = SymmetricEigen::try_new(m, 1e-15, 10_000)
            .ok_or_else(|| Error::Numerical("eigen decomposition of M did not converge".into()))?;
        Ok(Self { basis: *spec, vectors: eig.eigenvectors, values: eig.eigenvalues })
    }

    /// `Σ_a w_a T(y_a)`.
    pub fn weighted_sum(&self, shifts: &[(f64, f64)]) -> Result<DMatrix<f64>> {
        let n = self.basis.n();
        let mut re = DVector::zeros(n);
        let mut im = DVector::zeros(n);
        for &(y, w) in shifts {
            check_shift(y, &self.basis)?;
            for k in 0..n {
                let (s, c) = (-y * self.values[k]).sin_cos();
                re[k] += w * c;
                im[k] += w * s;
            }
        }
        let v = &self.vectors;
        let re_s = v * DMatrix::from_diagonal(&re) * v.transpose();
        let im_s = v * DMatrix::from_diagonal(&im) * v.transpose();
        Ok(DMatrix::from_fn(n, n, |i, j| match (i + 4 - j % 4) % 4 {
            0 => re_s[(i, j)],
            1 => -im_s[(i, j)],
            2 => -re_s[(i, j)],
            _ => im_s[(i, j)],
        }))
    }

    pub fn translation(&self, y: f64) -> Result<OperatorMatrix> {
        OperatorMatrix::new(self.weighted_sum(&[(y, 1.0)])?, self.basis, OperatorLabel::Translation(y))
    }
}

/// `A* = −σD`.
pub fn adjoint_a_matrix(model: &LevyModel, spec: &BasisSpec) -> Result<OperatorMatrix> {
    model.require_affine("A*")?;
    let d = derivative_matrix(spec).entries;
    OperatorMatrix::new(d * (-model.sigma()), *spec, OperatorLabel::Astar)
}

fn drift_factor(model: &LevyModel, spec: &BasisSpec) -> DMatrix<f64> {
    let n = spec.n();
    multiplication_matrix(spec).entries * model.slope() + DMatrix::identity(n, n) * model.intercept()
}

/// `L* = ½σ²D² − D(CM + KI)`.
pub fn adjoint_l_matrix(model: &LevyModel, spec: &BasisSpec) -> Result<OperatorMatrix> {
    model.require_affine("L*")?;
    let d = derivative_matrix(spec).entries;
    let s2 = model.sigma() * model.sigma();
    let entries = &d * &d * (0.5 * s2) - &d * drift_factor(model, spec);
    OperatorMatrix::new(entries, *spec, OperatorLabel::Lstar)
}

/// `L = ½σ²D² + (CM + KI)D`, acting on test functions.
pub fn test_l_matrix(model: &LevyModel, spec: &BasisSpec) -> Result<OperatorMatrix> {
    model.require_affine("L")?;
    let d = derivative_matrix(spec).entries;
    let s2 = model.sigma() * model.sigma();
    let entries = &d * &d * (0.5 * s2) + drift_factor(model, spec) * &d;
    OperatorMatrix::new(entries, *spec, OperatorLabel::Ltest)
}

fn small_jump_shifts(model: &LevyModel) -> Vec<(f64, f64)> {
    let small = model.small_jumps();
    small.atoms().iter().map(|a| (small.jump_size(a.mark), a.mass)).collect()
}

fn check_jump_integrability(model: &LevyModel) -> Result<()> {
    let small = model.small_jumps();
    let (m2, sup) = (small.second_moment(), small.sup_jump());
    if !(m2.is_finite() && sup.is_finite()) {
        return Err(Error::Model(format!("jump map not integrable: ∫F² dν = {m2}, sup|F| = {sup}")));
    }
    Ok(())
}

/// `∫(T(F(0,x)) − I)ν(dx)`.
pub fn jump_compensator_matrix(model: &LevyModel, spec: &BasisSpec) -> Result<OperatorMatrix> {
    model.require_affine("jump generator")?;
    check_jump_integrability(model)?;
    let n = spec.n();
    let small = model.small_jumps();
    if small.is_zero() {
        return OperatorMatrix::new(DMatrix::zeros(n, n), *spec, OperatorLabel::JumpCompensator);
    }
    let sum = TranslationSpectrum::new(spec)?.weighted_sum(&small_jump_shifts(model))?;
    let entries = sum - DMatrix::identity(n, n) * small.total_rate();
    OperatorMatrix::new(entries, *spec, OperatorLabel::JumpCompensator)
}

/// `∫(T(F(0,x)) − I + F(0,x)D)ν(dx)`.
pub fn jump_generator_matrix(model: &LevyModel, spec: &BasisSpec) -> Result<OperatorMatrix> {
    let comp = jump_compensator_matrix(model, spec)?;
    let d = derivative_matrix(spec).entries;
    let entries = comp.entries + d * model.small_jumps().compensator();
    OperatorMatrix::new(entries, *spec, OperatorLabel::JumpGen)
}

/// `sup ‖Au‖_{q}/‖u‖_{p}` over `u` supported on the first `support` modes,
/// from the largest eigenvalue of `W_p^{-1/2}AᵀW_qAW_p^{-1/2}`.
pub fn sobolev_operator_norm(op: &DMatrix<f64>, p: f64, q: f64, support: usize) -> Result<f64> {
    let n = op.nrows();
    if support == 0 || support > op.ncols() {
        return Err(Error::InvalidInput(format!("support {support} outside 1..={}", op.ncols())));
    }
    let wp = sobolev_weights(support, p);
    let wq = sobolev_weights(n, q);
    let a = op.columns(0, support);
    let scaled = DMatrix::from_fn(n, support, |i, j| wq[i].sqrt() * a[(i, j)] / wp[j].sqrt());
    let gram = scaled.transpose() * &scaled;
    let eig = SymmetricEigen::try_new(gram, 1e-14, 10_000)
        .ok_or_else(|| Error::Numerical("operator norm eigensolve did not converge".into()))?;
    Ok(eig.eigenvalues.iter().cloned().fold(0.0, f64::max).sqrt())
}
