//! Numerical certificates for the coercivity estimates behind uniqueness.
//!
//! Everything is computed on the active (unbuffered) block of a truncated
//! basis. Pairings in `S_{−p−1}` go through [`sobolev_inner`] or
//! [`weighted_dot`] with [`sobolev_weights`], so a single summation routine
//! backs every weighted inner product.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::hermite_basis::{sobolev_inner, sobolev_weights, weighted_dot, BasisSpec, CoeffVector};
use crate::levy_sde::{derive_seed, stream_rng, LevyModel};
use crate::par;
use crate::schwartz_ops::{
    adjoint_a_matrix, adjoint_l_matrix, derivative_matrix, sobolev_operator_norm, translation_matrix,
};

/// Smallest truncation accepted by [`monotone_constant_estimate`].
pub const MIN_LEVEL: usize = 32;
/// Relative drift of `λ_max` between the top two levels regarded as stable.
pub const STABILITY_DRIFT: f64 = 0.10;
/// Seed used by the unseeded Monte Carlo checks.
pub const DEFAULT_PROBE_SEED: u64 = 0x5eed;

const PROBE_STREAM: u64 = 5;
const EIGEN_TOL: f64 = 1e-14;
const EIGEN_ITERS: usize = 10_000;

/// Buffer used at truncation `n`: a quarter of the modes.
pub fn level_buffer(n: usize) -> usize {
    n / 4
}

fn check_active_support(phi: &CoeffVector) -> Result<()> {
    let active = phi.basis().active();
    match phi.as_slice()[active..].iter().position(|c| *c != 0.0) {
        Some(i) => Err(Error::InvalidInput(format!("phi has weight on buffered mode {}", active + i))),
        None => Ok(()),
    }
}

/// `2⟨φ, L*φ⟩_{−p−1} + ‖A*φ‖²_{−p−1}`.
pub fn monotone_form_value(phi: &CoeffVector, model: &LevyModel, p: f64) -> Result<f64> {
    check_active_support(phi)?;
    let spec = *phi.basis();
    let lstar = adjoint_l_matrix(model, &spec)?.apply(phi)?;
    let astar = adjoint_a_matrix(model, &spec)?.apply(phi)?;
    let q = -p - 1.0;
    Ok(2.0 * sobolev_inner(phi, &lstar, q)? + sobolev_inner(&astar, &astar, q)?)
}

/// Per-level results of [`monotone_constant_estimate`].
#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    pub p: f64,
    pub levels: Vec<usize>,
    /// Largest eigenvalue of `S v = λ W v` on the active block, per level.
    pub lambda_max: Vec<f64>,
    /// `|λ_top − λ_prev| / max(|λ_top|, |λ_prev|)`; `None` with a single level.
    pub drift: Option<f64>,
    pub stable: bool,
    /// Unit `‖·‖_{−p−1}` maximizer, per level.
    pub witness: Vec<CoeffVector>,
}

/// Matrix of `φ ↦ 2⟨φ, L*φ⟩_w + ‖A*φ‖²_w` on the first `active` modes.
fn form_matrix(model: &LevyModel, spec: &BasisSpec, w: &[f64]) -> Result<DMatrix<f64>> {
    let l = adjoint_l_matrix(model, spec)?.into_entries();
    let a = adjoint_a_matrix(model, spec)?.into_entries();
    let n = spec.n();
    let k = spec.active();
    let wl = DMatrix::from_fn(n, n, |i, j| w[i] * l[(i, j)]);
    let wa = DMatrix::from_fn(n, n, |i, j| w[i] * a[(i, j)]);
    let full = &wl + wl.transpose() + a.transpose() * wa;
    Ok(full.view((0, 0), (k, k)).into_owned())
}

fn level_eigen(model: &LevyModel, p: f64, n: usize) -> Result<(f64, CoeffVector)> {
    let spec = BasisSpec::new(n, level_buffer(n))?;
    let k = spec.active();
    let w = sobolev_weights(n, -p - 1.0);
    let s = form_matrix(model, &spec, &w)?;
    let scale: Vec<f64> = w[..k].iter().map(|x| x.sqrt().recip()).collect();
    let reduced = DMatrix::from_fn(k, k, |i, j| scale[i] * s[(i, j)] * scale[j]);
    let eig = SymmetricEigen::try_new(reduced, EIGEN_TOL, EIGEN_ITERS)
        .ok_or_else(|| Error::Numerical(format!("eigensolve failed at level N={n}")))?;
    let top = eig.eigenvalues.imax();
    let lambda = eig.eigenvalues[top];
    if !lambda.is_finite() {
        return Err(Error::Numerical(format!("non-finite eigenvalue at level N={n}")));
    }
    let mut coeffs = vec![0.0; n];
    for i in 0..k {
        coeffs[i] = scale[i] * eig.eigenvectors[(i, top)];
    }
    Ok((lambda, CoeffVector::new(spec, coeffs)?))
}

/// Certified surrogate for the monotonicity constant at each truncation level.
pub fn monotone_constant_estimate(model: &LevyModel, p: f64, levels: &[usize]) -> Result<MonotonicityReport> {
    model.require_affine("monotonicity estimate")?;
    if !p.is_finite() {
        return Err(Error::InvalidInput(format!("p must be finite, got {p}")));
    }
    if levels.is_empty() {
        return Err(Error::InvalidInput("at least one level is required".into()));
    }
    if let Some(&n) = levels.iter().find(|&&n| n < MIN_LEVEL) {
        return Err(Error::InvalidInput(format!("level {n} below the minimum {MIN_LEVEL}")));
    }
    if levels.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("levels must be strictly increasing".into()));
    }
    let results = par::try_map_range(levels.len(), |i| level_eigen(model, p, levels[i]))?;
    let (lambda_max, witness): (Vec<f64>, Vec<CoeffVector>) = results.into_iter().unzip();
    let drift = match lambda_max.as_slice() {
        [.., a, b] => {
            let denom = a.abs().max(b.abs());
            Some(if denom == 0.0 { 0.0 } else { (b - a).abs() / denom })
        }
        _ => None,
    };
    Ok(MonotonicityReport {
        p,
        levels: levels.to_vec(),
        lambda_max,
        stable: drift.is_some_and(|d| d < STABILITY_DRIFT),
        drift,
        witness,
    })
}

/// Standard normal coefficients on the active modes, scaled to unit `‖·‖_q`.
pub fn random_unit_vector(spec: &BasisSpec, q: f64, seed: u64) -> Result<CoeffVector> {
    let mut rng = stream_rng(seed, PROBE_STREAM);
    let mut coeffs = vec![0.0; spec.n()];
    for c in coeffs[..spec.active()].iter_mut() {
        *c = StandardNormal.sample(&mut rng);
    }
    let w = sobolev_weights(spec.n(), q);
    let norm = weighted_dot(&coeffs, &coeffs, &w).sqrt();
    coeffs.iter_mut().for_each(|c| *c /= norm);
    CoeffVector::new(*spec, coeffs)
}

/// Output of [`translation_growth_check`].
#[derive(Debug, Clone, PartialEq)]
pub struct GrowthReport {
    pub p: f64,
    pub xs: Vec<f64>,
    /// Monte Carlo `max ‖T(x)φ‖_p / ‖φ‖_p`.
    pub rho: Vec<f64>,
    /// Operator norm of `T(x)` from the active block into `S_p`.
    pub rho_exact: Vec<f64>,
    /// Least-squares slope of `log ρ` against `log x` over the positive `x`.
    pub slope: f64,
    pub slope_exact: f64,
    /// `2(⌊|p+1|⌋ + 1)`.
    pub degree_bound: f64,
    pub within_bound: bool,
}

/// `2(⌊|p+1|⌋ + 1)`.
pub fn growth_degree(p: f64) -> f64 {
    2.0 * ((p + 1.0).abs().floor() + 1.0)
}

fn log_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let pts: Vec<(f64, f64)> = xs.iter().zip(ys).filter(|(x, _)| **x > 0.0).map(|(x, y)| (x.ln(), y.ln())).collect();
    if pts.len() < 2 {
        return 0.0;
    }
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = pts.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    num / den
}

pub fn translation_growth_check(p: f64, xs: &[f64], trials: usize, spec: &BasisSpec) -> Result<GrowthReport> {
    translation_growth_check_seeded(p, xs, trials, spec, DEFAULT_PROBE_SEED)
}

/// Translation growth with an explicit probe seed. The same probe vectors are
/// reused for every `x`.
pub fn translation_growth_check_seeded(
    p: f64,
    xs: &[f64],
    trials: usize,
    spec: &BasisSpec,
    seed: u64,
) -> Result<GrowthReport> {
    if trials < 100 {
        return Err(Error::InvalidInput(format!("trials must be >= 100, got {trials}")));
    }
    if xs.is_empty() || xs.iter().any(|x| !x.is_finite() || *x < 0.0) || xs.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::InvalidInput("xs must be non-negative and strictly increasing".into()));
    }
    let n = spec.n();
    let w = sobolev_weights(n, p);
    let probes = par::try_map_range(trials, |i| random_unit_vector(spec, p, derive_seed(seed, i as u64)))?;
    let mut rho = Vec::with_capacity(xs.len());
    let mut rho_exact = Vec::with_capacity(xs.len());
    for &x in xs {
        if x == 0.0 {
            rho.push(1.0);
            rho_exact.push(1.0);
            continue;
        }
        let t = translation_matrix(x, spec)?;
        let ratios = par::map_range(trials, |i| {
            let moved = t.apply_slice(probes[i].as_slice());
            weighted_dot(&moved, &moved, &w).sqrt()
        });
        rho.push(ratios.into_iter().fold(0.0, f64::max));
        rho_exact.push(sobolev_operator_norm(t.entries(), p, p, spec.active())?);
    }
    let slope = log_slope(xs, &rho);
    let degree_bound = growth_degree(p);
    Ok(GrowthReport {
        p,
        xs: xs.to_vec(),
        slope_exact: log_slope(xs, &rho_exact),
        within_bound: slope <= degree_bound,
        rho,
        rho_exact,
        slope,
        degree_bound,
    })
}

pub fn first_order_form_check(p: f64, trials: usize, spec: &BasisSpec) -> Result<f64> {
    first_order_form_check_seeded(p, trials, spec, DEFAULT_PROBE_SEED)
}

/// `max |⟨φ, Dφ⟩_{−p−1}|` over random unit `‖·‖_{−p−1}` vectors on the active modes.
pub fn first_order_form_check_seeded(p: f64, trials: usize, spec: &BasisSpec, seed: u64) -> Result<f64> {
    if trials < 100 {
        return Err(Error::InvalidInput(format!("trials must be >= 100, got {trials}")));
    }
    let d = derivative_matrix(spec);
    let q = -p - 1.0;
    let values = par::try_map_range(trials, |i| -> Result<f64> {
        let phi = random_unit_vector(spec, q, derive_seed(seed, i as u64))?;
        let dphi = d.apply(&phi)?;
        Ok(sobolev_inner(&phi, &dphi, q)?.abs())
    })?;
    Ok(values.into_iter().fold(0.0, f64::max))
}

/// Exact maximum of `|⟨φ, Dφ⟩_{−p−1}|` over unit vectors on the active modes.
pub fn first_order_form_bound(p: f64, spec: &BasisSpec) -> Result<f64> {
    let k = spec.active();
    let d = derivative_matrix(spec).into_entries();
    let w = sobolev_weights(spec.n(), -p - 1.0);
    let sym = DMatrix::from_fn(k, k, |i, j| {
        0.5 * (w[i] * d[(i, j)] + w[j] * d[(j, i)]) / (w[i] * w[j]).sqrt()
    });
    let eig = SymmetricEigen::try_new(sym, EIGEN_TOL, EIGEN_ITERS)
        .ok_or_else(|| Error::Numerical("first-order form eigensolve failed".into()))?;
    Ok(eig.eigenvalues.iter().fold(0.0, |m, v| m.max(v.abs())))
}
