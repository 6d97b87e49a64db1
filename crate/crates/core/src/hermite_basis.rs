//! Hermite functions, trapezoid quadrature on a symmetric window, projection
//! onto the truncated basis and Hermite–Sobolev inner products.
//!
//! Convention: `h_0(x) = π^{-1/4} e^{-x²/2}` and
//! `h_{n+1}(x) = x·sqrt(2/(n+1))·h_n(x) − sqrt(n/(n+1))·h_{n−1}(x)`,
//! the L²-normalized physicists' functions with positive leading coefficient.
//! Sobolev weights are `(2n+1)^{2p}`.

use crate::error::{ensure_finite, Error, Result};

/// Default number of retained modes.
pub const DEFAULT_MODES: usize = 64;
/// Default number of top modes excluded from assertions.
pub const DEFAULT_BUFFER: usize = 16;

const GRAM_TOLERANCE: f64 = 1e-8;
const TAIL_WARN: f64 = 1e-6;

/// Truncation and quadrature parameters of the Hermite basis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisSpec {
    n: usize,
    buffer: usize,
    quad_points: usize,
    quad_halfwidth: f64,
}

impl BasisSpec {
    /// Basis with `n` modes, `buffer` contaminated top modes and the default
    /// quadrature (`L = sqrt(4n+6)+4`, `16n+200` points).
    pub fn new(n: usize, buffer: usize) -> Result<Self> {
        Self::with_quadrature(n, buffer, 16 * n + 200, Self::min_halfwidth(n))
    }

    pub fn with_quadrature(
        n: usize,
        buffer: usize,
        quad_points: usize,
        quad_halfwidth: f64,
    ) -> Result<Self> {
        if n < 8 {
            return Err(Error::InvalidInput(format!("N must be >= 8, got {n}")));
        }
        if buffer >= n {
            return Err(Error::InvalidInput(format!("buffer B={buffer} must be < N={n}")));
        }
        if n >= 32 && buffer < 8 {
            return Err(Error::InvalidInput(format!(
                "buffer B must be >= 8 when N >= 32, got B={buffer}"
            )));
        }
        if !(quad_halfwidth >= Self::min_halfwidth(n)) {
            return Err(Error::InvalidInput(format!(
                "quad_halfwidth must be >= sqrt(4N+6)+4 = {}, got {quad_halfwidth}",
                Self::min_halfwidth(n)
            )));
        }
        if quad_points < 16 * n + 200 {
            return Err(Error::InvalidInput(format!(
                "quad_points must be >= 16N+200 = {}, got {quad_points}",
                16 * n + 200
            )));
        }
        Ok(Self { n, buffer, quad_points, quad_halfwidth })
    }

    fn min_halfwidth(n: usize) -> f64 {
        (4.0 * n as f64 + 6.0).sqrt() + 4.0
    }

    /// Number of modes `N`.
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn buffer(&self) -> usize {
        self.buffer
    }

    /// Number of trusted modes `N − B`.
    pub fn active(&self) -> usize {
        self.n - self.buffer
    }

    pub fn quad_points(&self) -> usize {
        self.quad_points
    }

    pub fn quad_halfwidth(&self) -> f64 {
        self.quad_halfwidth
    }
}

impl Default for BasisSpec {
    fn default() -> Self {
        Self::new(DEFAULT_MODES, DEFAULT_BUFFER).expect("default basis is valid")
    }
}

/// `π^{−1/4}`.
const PI_MINUS_QUARTER: f64 = 0.751_125_544_464_942_5;

/// Writes `h_0(x), …, h_{len-1}(x)` into `out`.
///
/// Underflows to zero once `x²/2` exceeds the double range (|x| ≳ 38).
pub fn hermite_values_into(x: f64, out: &mut [f64]) {
    if out.is_empty() {
        return;
    }
    let h0 = PI_MINUS_QUARTER * (-0.5 * x * x).exp();
    out[0] = h0;
    if out.len() == 1 {
        return;
    }
    out[1] = std::f64::consts::SQRT_2 * x * h0;
    for k in 1..out.len() - 1 {
        let kf = k as f64;
        out[k + 1] = x * (2.0 / (kf + 1.0)).sqrt() * out[k] - (kf / (kf + 1.0)).sqrt() * out[k - 1];
    }
}

/// `Σ c_n h_n(x)` with the recurrence factors precomputed; no allocation per point.
#[derive(Debug, Clone, PartialEq)]
pub struct HermiteSeries {
    coeffs: Vec<f64>,
    // h_{k+1} = a_k·x·h_k − b_k·h_{k−1}
    a: Vec<f64>,
    b: Vec<f64>,
}

impl HermiteSeries {
    pub fn new(coeffs: &[f64]) -> Self {
        let n = coeffs.len();
        let a = (0..n).map(|k| (2.0 / (k as f64 + 1.0)).sqrt()).collect();
        let b = (0..n).map(|k| (k as f64 / (k as f64 + 1.0)).sqrt()).collect();
        Self { coeffs: coeffs.to_vec(), a, b }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let c = &self.coeffs;
        if c.is_empty() {
            return 0.0;
        }
        let mut prev = 0.0;
        let mut cur = PI_MINUS_QUARTER * (-0.5 * x * x).exp();
        let mut sum = c[0] * cur;
        for k in 0..c.len() - 1 {
            let next = self.a[k] * x * cur - self.b[k] * prev;
            prev = cur;
            cur = next;
            sum += c[k + 1] * cur;
        }
        sum
    }
}

/// `[h_0(x), …, h_{N−1}(x)]`.
pub fn hermite_eval_all(x: f64, spec: &BasisSpec) -> Result<Vec<f64>> {
    ensure_finite(x, "x")?;
    let mut out = vec![0.0; spec.n()];
    hermite_values_into(x, &mut out);
    Ok(out)
}

/// `∫ h_n(x) dx` for `n < len`: zero for odd `n`, and
/// `m_{n+1} = sqrt(n/(n+1))·m_{n−1}` from `m_0 = sqrt(2)·π^{1/4}`.
pub fn hermite_integrals(len: usize) -> Vec<f64> {
    let mut m = vec![0.0; len];
    if len == 0 {
        return m;
    }
    m[0] = std::f64::consts::SQRT_2 * std::f64::consts::PI.powf(0.25);
    let mut k = 1;
    while k + 1 < len {
        let kf = k as f64;
        m[k + 1] = (kf / (kf + 1.0)).sqrt() * m[k - 1];
        k += 2;
    }
    m
}

/// Uniform trapezoid grid on `[−L, L]` with a cached Hermite table.
#[derive(Debug, Clone)]
pub struct QuadratureGrid {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    modes: usize,
    // row i holds h_0(x_i) .. h_{N-1}(x_i)
    table: Vec<f64>,
}

impl QuadratureGrid {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn modes(&self) -> usize {
        self.modes
    }

    /// Hermite values at node `i`.
    pub fn hermite_row(&self, i: usize) -> &[f64] {
        &self.table[i * self.modes..(i + 1) * self.modes]
    }

    /// `Σ_i w_i g(x_i)`.
    pub fn integrate(&self, g: impl Fn(f64) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&x, &w)| w * g(x)).sum()
    }

    /// Largest `|Σ_i w_i h_m(x_i) h_n(x_i) − δ_{mn}|` over `m, n < limit`,
    /// together with the offending pair.
    pub fn gram_residual(&self, limit: usize) -> (f64, usize, usize) {
        let limit = limit.min(self.modes);
        let mut gram = vec![0.0; limit * limit];
        for i in 0..self.len() {
            let w = self.weights[i];
            let row = self.hermite_row(i);
            for m in 0..limit {
                let wm = w * row[m];
                if wm == 0.0 {
                    continue;
                }
                for n in m..limit {
                    gram[m * limit + n] += wm * row[n];
                }
            }
        }
        let mut worst = (0.0, 0, 0);
        for m in 0..limit {
            for n in m..limit {
                let target = if m == n { 1.0 } else { 0.0 };
                let r = (gram[m * limit + n] - target).abs();
                if r > worst.0 {
                    worst = (r, m, n);
                }
            }
        }
        worst
    }
}

/// Builds the trapezoid grid for `spec` and verifies the Gram residual on the
/// trusted block.
pub fn make_quadrature(spec: &BasisSpec) -> Result<QuadratureGrid> {
    let points = spec.quad_points();
    let half = spec.quad_halfwidth();
    let step = 2.0 * half / (points - 1) as f64;
    let mut nodes = vec![0.0; points];
    for i in 0..points.div_ceil(2) {
        let x = -half + i as f64 * step;
        nodes[i] = x;
        nodes[points - 1 - i] = -x;
    }
    if points % 2 == 1 {
        nodes[points / 2] = 0.0;
    }
    let mut weights = vec![step; points];
    weights[0] = 0.5 * step;
    weights[points - 1] = 0.5 * step;

    let modes = spec.n();
    let mut table = vec![0.0; points * modes];
    for (i, &x) in nodes.iter().enumerate() {
        hermite_values_into(x, &mut table[i * modes..(i + 1) * modes]);
    }
    let grid = QuadratureGrid { nodes, weights, modes, table };
    let (residual, m, n) = grid.gram_residual(spec.active());
    if !(residual < GRAM_TOLERANCE) {
        return Err(Error::Quadrature { m, n, residual });
    }
    Ok(grid)
}

/// Truncated Hermite coefficients `c_n = ⟨φ, h_n⟩` of a tempered distribution.
#[derive(Debug, Clone, PartialEq)]
pub struct CoeffVector {
    coeffs: Vec<f64>,
    basis: BasisSpec,
}

impl CoeffVector {
    pub fn new(basis: BasisSpec, coeffs: Vec<f64>) -> Result<Self> {
        if coeffs.len() != basis.n() {
            return Err(Error::InvalidInput(format!(
                "expected {} coefficients, got {}",
                basis.n(),
                coeffs.len()
            )));
        }
        if let Some(i) = coeffs.iter().position(|c| !c.is_finite()) {
            return Err(Error::InvalidInput(format!("coefficient {i} is not finite")));
        }
        Ok(Self { coeffs, basis })
    }

    pub fn zeros(basis: BasisSpec) -> Self {
        Self { coeffs: vec![0.0; basis.n()], basis }
    }

    /// Unit coordinate vector `e_k`.
    pub fn unit(basis: BasisSpec, k: usize) -> Result<Self> {
        if k >= basis.n() {
            return Err(Error::InvalidInput(format!("mode {k} outside basis of size {}", basis.n())));
        }
        let mut v = Self::zeros(basis);
        v.coeffs[k] = 1.0;
        Ok(v)
    }

    pub fn basis(&self) -> &BasisSpec {
        &self.basis
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// L² pairing `Σ u_n v_n`.
    pub fn dot(&self, other: &CoeffVector) -> Result<f64> {
        sobolev_inner(self, other, 0.0)
    }

    /// Integral of the truncated expansion, `Σ c_n ∫h_n`.
    pub fn mass(&self) -> f64 {
        hermite_integrals(self.len()).iter().zip(&self.coeffs).map(|(m, c)| m * c).sum()
    }

    /// Evaluates `Σ c_n h_n(x)`.
    pub fn synthesize(&self, x: f64) -> f64 {
        HermiteSeries::new(&self.coeffs).eval(x)
    }

    /// Largest absolute coefficient gap on the trusted modes.
    pub fn max_active_gap(&self, other: &CoeffVector) -> f64 {
        let k = self.basis.active().min(other.basis.active());
        self.coeffs[..k]
            .iter()
            .zip(&other.coeffs[..k])
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Weights `(2n+1)^{2p}` for `n < len`.
pub fn sobolev_weights(len: usize, p: f64) -> Vec<f64> {
    (0..len).map(|n| (2.0 * n as f64 + 1.0).powf(2.0 * p)).collect()
}

/// `Σ w_n u_n v_n`; the single summation routine behind every Sobolev pairing.
pub fn weighted_dot(u: &[f64], v: &[f64], weights: &[f64]) -> f64 {
    u.iter().zip(v).zip(weights).map(|((a, b), w)| w * a * b).sum()
}

/// `⟨u, v⟩_p = Σ (2n+1)^{2p} u_n v_n`.
pub fn sobolev_inner(u: &CoeffVector, v: &CoeffVector, p: f64) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::InvalidInput(format!(
            "basis size mismatch: {} vs {}",
            u.len(),
            v.len()
        )));
    }
    ensure_finite(p, "p")?;
    let w = sobolev_weights(u.len(), p);
    let value = weighted_dot(&u.coeffs, &v.coeffs, &w);
    if value.is_nan() {
        return Err(Error::Numerical("Sobolev inner product is NaN".into()));
    }
    Ok(value)
}

pub fn sobolev_norm(u: &CoeffVector, p: f64) -> Result<f64> {
    Ok(sobolev_inner(u, u, p)?.max(0.0).sqrt())
}

/// Coefficients of `δ_z`: `c_n = h_n(z)`.
pub fn delta_coeffs(z: f64, spec: &BasisSpec) -> Result<CoeffVector> {
    Ok(CoeffVector { coeffs: hermite_eval_all(z, spec)?, basis: *spec })
}

/// Function values at `±L` that exceeded the tail threshold.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailWarning {
    pub left: f64,
    pub right: f64,
}

/// Result of projecting a function onto the basis.
#[derive(Debug, Clone)]
pub struct Projection {
    pub coeffs: CoeffVector,
    pub tail_warning: Option<TailWarning>,
}

/// Projects sampled values `f(x_i)` (one per grid node).
pub fn project_samples(values: &[f64], grid: &QuadratureGrid, spec: &BasisSpec) -> Result<Projection> {
    if values.len() != grid.len() {
        return Err(Error::InvalidInput(format!(
            "expected {} samples, got {}",
            grid.len(),
            values.len()
        )));
    }
    if grid.modes() != spec.n() {
        return Err(Error::InvalidInput("grid built for a different basis".into()));
    }
    let n = spec.n();
    let mut coeffs = vec![0.0; n];
    for (i, (&f, &w)) in values.iter().zip(grid.weights()).enumerate() {
        let wf = w * f;
        if wf == 0.0 {
            continue;
        }
        for (c, h) in coeffs.iter_mut().zip(grid.hermite_row(i)) {
            *c += wf * h;
        }
    }
    let (left, right) = (values[0], values[values.len() - 1]);
    let tail_warning = (left.abs() > TAIL_WARN || right.abs() > TAIL_WARN)
        .then_some(TailWarning { left, right });
    Ok(Projection { coeffs: CoeffVector::new(*spec, coeffs)?, tail_warning })
}

/// `c_n = Σ_i w_i f(x_i) h_n(x_i)`.
pub fn project_function(
    f: impl Fn(f64) -> f64,
    grid: &QuadratureGrid,
    spec: &BasisSpec,
) -> Result<Projection> {
    let values: Vec<f64> = grid.nodes().iter().map(|&x| f(x)).collect();
    project_samples(&values, grid, spec)
}
