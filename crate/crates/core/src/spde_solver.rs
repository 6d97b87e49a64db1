//! Distribution-valued solutions `Y_t(ψ)` of the linear SPDE driven by an
//! affine Lévy flow, computed along one noise path by four routes:
//! closed form `e^{−tC}ψ(e^{−tC}(· − Z⁰_t))`, the dual pairing
//! `∫ψ(z)δ_{Z^z_t}dz`, a coefficient-space Euler scheme, and interlacing of
//! large jumps by restarts of the closed form.

use std::collections::HashMap;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::hermite_basis::{
    hermite_values_into, make_quadrature, project_function, BasisSpec, CoeffVector, HermiteSeries, Projection,
    QuadratureGrid,
};
use crate::levy_sde::{simulate_affine, JumpKind, LevyModel, NoisePath, ScalarFn};
use crate::schwartz_ops::{
    adjoint_a_matrix, adjoint_l_matrix, jump_compensator_matrix,
    jump_generator_matrix, test_l_matrix, translation_matrix,
};

/// Coefficient norm beyond which the Euler route is declared divergent.
pub const SPECTRAL_BLOWUP: f64 = 1e8;
const DATUM_TAIL: f64 = 1e-10;
const RANGE_MARGIN: f64 = 4.0;

/// `x ↦ amplitude·exp(−(x − mean)²/(2·width²))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianShape {
    pub mean: f64,
    pub width: f64,
    pub amplitude: f64,
}

impl GaussianShape {
    pub fn eval(&self, x: f64) -> f64 {
        let u = (x - self.mean) / self.width;
        self.amplitude * (-0.5 * u * u).exp()
    }

    pub fn mass(&self) -> f64 {
        self.amplitude * self.width * (2.0 * std::f64::consts::PI).sqrt()
    }

    /// Shape of `y ↦ e^{−tC}ψ(e^{−tC}(y − shift))`.
    pub fn transported(&self, t: f64, slope: f64, shift: f64) -> GaussianShape {
        let g = (t * slope).exp();
        GaussianShape { mean: shift + g * self.mean, width: g * self.width, amplitude: self.amplitude / g }
    }
}

/// Integrable initial condition `ψ`.
#[derive(Clone)]
pub struct InitialDatum {
    f: ScalarFn,
    gaussian: Option<GaussianShape>,
}

impl std::fmt::Debug for InitialDatum {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("InitialDatum").field("gaussian", &self.gaussian).finish_non_exhaustive()
    }
}

impl InitialDatum {
    pub fn from_fn(f: ScalarFn) -> Self {
        Self { f, gaussian: None }
    }

    pub fn gaussian(mean: f64, width: f64, amplitude: f64) -> Result<Self> {
        if !(mean.is_finite() && amplitude.is_finite() && width.is_finite() && width > 0.0) {
            return Err(Error::InvalidInput(format!(
                "Gaussian datum needs finite mean/amplitude and width > 0, got ({mean}, {width}, {amplitude})"
            )));
        }
        let shape = GaussianShape { mean, width, amplitude };
        Ok(Self { f: Arc::new(move |x| shape.eval(x)), gaussian: Some(shape) })
    }

    /// The function `Σ c_n h_n` synthesized from coefficients.
    pub fn from_coeffs(coeffs: &CoeffVector) -> Self {
        let series = HermiteSeries::new(coeffs.as_slice());
        Self::from_fn(Arc::new(move |x| series.eval(x)))
    }

    pub fn eval(&self, x: f64) -> f64 {
        (self.f)(x)
    }

    pub fn shape(&self) -> Option<GaussianShape> {
        self.gaussian
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Route {
    Closed,
    Dual,
    Spectral,
    Interlaced,
}

/// `Y_t` at one node of a path.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionState {
    pub t: f64,
    pub coeffs: CoeffVector,
    pub route: Route,
    /// Flow base point `Z⁰_t` (relative to the last restart for interlaced states).
    pub z0: Option<f64>,
    /// State just before a jump at this node, when one occurred.
    pub left_limit: Option<CoeffVector>,
}

/// Result of the dual route.
#[derive(Debug, Clone)]
pub struct DualProjection {
    pub coeffs: CoeffVector,
    /// Largest `|Z^z_t|` over the quadrature core, when it left `±(L − 4)`.
    pub range_warning: Option<f64>,
}

/// Quadrature grid and operator matrices for one `(model, basis)` pair.
#[derive(Debug, Clone)]
pub struct SpdeSolver {
    model: LevyModel,
    spec: BasisSpec,
    grid: Arc<QuadratureGrid>,
    astar: DMatrix<f64>,
    /// `L* + JumpGen − ∫(T(F) − I)ν`, the deterministic part of the Euler step.
    euler_drift: DMatrix<f64>,
    ltest: DMatrix<f64>,
    jump_drift: DMatrix<f64>,
}

impl SpdeSolver {
    pub fn new(model: &LevyModel, spec: &BasisSpec) -> Result<Self> {
        let grid = Arc::new(make_quadrature(spec)?);
        Self::with_grid(model, spec, grid)
    }

    pub fn with_grid(model: &LevyModel, spec: &BasisSpec, grid: Arc<QuadratureGrid>) -> Result<Self> {
        model.require_affine("the SPDE solver")?;
        if grid.modes() != spec.n() {
            return Err(Error::InvalidInput("quadrature grid built for a different basis".into()));
        }
        let astar = adjoint_a_matrix(model, spec)?.into_entries();
        let lstar = adjoint_l_matrix(model, spec)?.into_entries();
        let ltest = test_l_matrix(model, spec)?.into_entries();
        let (jump_drift, euler_drift) = if model.small_jumps().is_zero() {
            let n = spec.n();
            (DMatrix::zeros(n, n), lstar)
        } else {
            let gen = jump_generator_matrix(model, spec)?.into_entries();
            let comp = jump_compensator_matrix(model, spec)?.into_entries();
            let jd = gen - comp;
            let drift = &lstar + &jd;
            (jd, drift)
        };
        Ok(Self { model: model.clone(), spec: *spec, grid, astar, euler_drift, ltest, jump_drift })
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn grid(&self) -> &QuadratureGrid {
        &self.grid
    }

    pub fn model(&self) -> &LevyModel {
        &self.model
    }

    fn check_datum(&self, psi: &InitialDatum) -> Result<()> {
        let l = self.spec.quad_halfwidth();
        let tail = psi.eval(-l).abs().max(psi.eval(l).abs());
        if !(tail < DATUM_TAIL) {
            return Err(Error::InvalidInput(format!(
                "initial datum is {tail:e} at ±L = {l}; it must decay below {DATUM_TAIL:e}"
            )));
        }
        Ok(())
    }

    /// Projection of `y ↦ e^{−tC}ψ(e^{−tC}(y − z0))`.
    pub fn closed_form(&self, psi: &InitialDatum, t: f64, z0: f64) -> Result<Projection> {
        let s = (-t * self.model.slope()).exp();
        if !s.is_finite() || !z0.is_finite() {
            return Err(Error::InvalidInput(format!("non-finite transport at t={t}, Z0={z0}")));
        }
        project_function(|y| s * psi.eval(s * (y - z0)), &self.grid, &self.spec)
    }

    /// `Σ_i w_i ψ(z_i)·[h_n(Z⁰_t + e^{tC}z_i)]_n` on the path's flow.
    pub fn dual(&self, psi: &InitialDatum, path: &NoisePath, t: f64) -> Result<DualProjection> {
        let flow = simulate_affine(&self.model, 0.0, path)?;
        let z0 = flow.values[node_at(path, t)?];
        Ok(self.dual_at(psi, t, z0))
    }

    fn dual_at(&self, psi: &InitialDatum, t: f64, z0: f64) -> DualProjection {
        let g = (t * self.model.slope()).exp();
        let n = self.spec.n();
        let values: Vec<f64> = self.grid.nodes().iter().map(|&z| psi.eval(z)).collect();
        let peak = values.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let limit = self.spec.quad_halfwidth() - RANGE_MARGIN;
        let mut coeffs = vec![0.0; n];
        let mut h = vec![0.0; n];
        let mut worst: f64 = 0.0;
        for ((&z, &w), &f) in self.grid.nodes().iter().zip(self.grid.weights()).zip(&values) {
            if f == 0.0 {
                continue;
            }
            let image = z0 + g * z;
            if f.abs() > 1e-12 * peak {
                worst = worst.max(image.abs());
            }
            hermite_values_into(image, &mut h);
            for (c, hv) in coeffs.iter_mut().zip(&h) {
                *c += w * f * hv;
            }
        }
        DualProjection {
            coeffs: CoeffVector::new(self.spec, coeffs).expect("finite quadrature sums"),
            range_warning: (worst > limit).then_some(worst),
        }
    }

    /// Closed-form states at every node of the path.
    pub fn closed_form_states(&self, psi: &InitialDatum, path: &NoisePath) -> Result<Vec<SolutionState>> {
        self.check_datum(psi)?;
        let flow = simulate_affine(&self.model, 0.0, path)?;
        flow.times
            .iter()
            .zip(&flow.values)
            .map(|(&t, &z0)| {
                Ok(SolutionState {
                    t,
                    coeffs: self.closed_form(psi, t, z0)?.coeffs,
                    route: Route::Closed,
                    z0: Some(z0),
                    left_limit: None,
                })
            })
            .collect()
    }

    /// Coefficient-space Euler scheme on the merged grid.
    ///
    /// `Y ← Y + (L* + JumpGen − Comp)Y·h + A*Y·ΔB`, then `Y ← T(F(0,x))Y` when
    /// the interval ends at a small-jump event. Large-jump events are ignored.
    pub fn spectral_euler(&self, psi: &InitialDatum, path: &NoisePath) -> Result<Vec<SolutionState>> {
        self.check_datum(psi)?;
        let mut y = DVector::from_vec(self.closed_form(psi, 0.0, 0.0)?.coeffs.into_vec());
        let mut cache: HashMap<u64, DMatrix<f64>> = HashMap::new();
        let mut states = Vec::with_capacity(path.nodes.len());
        states.push(self.state(0.0, &y, Route::Spectral, None, None));
        for k in 0..path.intervals() {
            let h = path.step(k);
            let next = &y + &self.euler_drift * &y * h + &self.astar * &y * path.db[k];
            let node = path.nodes[k + 1];
            let (next, left) = match node.jump {
                Some(j) if j.kind == JumpKind::Small => {
                    let shift = self.model.small_jumps().jump_size(j.mark);
                    let t = match cache.get(&shift.to_bits()) {
                        Some(t) => t,
                        None => {
                            let m = translation_matrix(shift, &self.spec)?.into_entries();
                            cache.entry(shift.to_bits()).or_insert(m)
                        }
                    };
                    (t * &next, Some(next))
                }
                _ => (next, None),
            };
            let norm = next.norm();
            if !norm.is_finite() || norm > SPECTRAL_BLOWUP {
                return Err(Error::Divergence { t: node.t, value: norm });
            }
            y = next;
            states.push(self.state(node.t, &y, Route::Spectral, None, left.as_ref()));
        }
        Ok(states)
    }

    fn state(
        &self,
        t: f64,
        y: &DVector<f64>,
        route: Route,
        z0: Option<f64>,
        left: Option<&DVector<f64>>,
    ) -> SolutionState {
        let wrap = |v: &DVector<f64>| CoeffVector::new(self.spec, v.as_slice().to_vec()).expect("finite state");
        SolutionState { t, coeffs: wrap(y), route, z0, left_limit: left.map(wrap) }
    }

    /// Defect of the weak form along the path with `Y` taken from the closed form:
    ///
    /// `R = ⟨Y_T,φ⟩ − ⟨ψ,φ⟩ − Σ_k [⟨Y_k, Lφ⟩h_k + ⟨Y_k, σDφ⟩ΔB_k + ⟨Y_k, (JumpGen − Comp)ᵀφ⟩h_k]
    ///   − Σ_τ ⟨Y_{τ−}, (T(−F(0,x)) − I)φ⟩`.
    ///
    /// Returns `|R|`.
    pub fn weak_residual(&self, psi: &InitialDatum, phi: &CoeffVector, path: &NoisePath) -> Result<f64> {
        Ok(self.weak_residuals(psi, std::slice::from_ref(phi), path)?[0])
    }

    /// [`weak_residual`](Self::weak_residual) for several test functions on one pass.
    pub fn weak_residuals(&self, psi: &InitialDatum, phis: &[CoeffVector], path: &NoisePath) -> Result<Vec<f64>> {
        self.check_datum(psi)?;
        let active = self.spec.active();
        for phi in phis {
            if phi.len() != self.spec.n() {
                return Err(Error::InvalidInput("test function built for a different basis".into()));
            }
            if let Some(i) = phi.as_slice()[active..].iter().position(|c| *c != 0.0) {
                return Err(Error::InvalidInput(format!(
                    "test function has weight on buffered mode {}",
                    active + i
                )));
            }
        }
        let flow = simulate_affine(&self.model, 0.0, path)?;
        let pairing = Pairing::new(self, psi);

        let phi_vs: Vec<DVector<f64>> = phis.iter().map(|p| DVector::from_column_slice(p.as_slice())).collect();
        // per test function: φ, Lφ, σDφ, (JumpGen − Comp)ᵀφ, synthesized on the grid
        let mut fields = Vec::with_capacity(4 * phis.len());
        for v in &phi_vs {
            fields.push(pairing.synthesize(v));
            fields.push(pairing.synthesize(&(&self.ltest * v)));
            fields.push(pairing.synthesize(&(self.astar.transpose() * v)));
            fields.push(pairing.synthesize(&(self.jump_drift.transpose() * v)));
        }
        let count = phis.len();
        let pick = |slot: usize| -> Vec<&[f64]> { (0..count).map(|j| fields[4 * j + slot].as_slice()).collect() };
        let (phi_f, l_f, a_f, j_f) = (pick(0), pick(1), pick(2), pick(3));
        let drift_f: Vec<&[f64]> = l_f.iter().chain(&a_f).chain(&j_f).cloned().collect();

        let mut jump_cache: HashMap<u64, Vec<Vec<f64>>> = HashMap::new();
        let start = pairing.pair(0.0, 0.0, &phi_f);
        let mut integral = vec![0.0; count];
        for k in 0..path.intervals() {
            let h = path.step(k);
            let p = pairing.pair(flow.times[k], flow.values[k], &drift_f);
            for j in 0..count {
                integral[j] += p[j] * h + p[count + j] * path.db[k] + p[2 * count + j] * h;
            }
            if let Some(jump) = path.nodes[k + 1].jump.filter(|j| j.kind == JumpKind::Small) {
                let shift = self.model.small_jumps().jump_size(jump.mark);
                if let std::collections::hash_map::Entry::Vacant(e) = jump_cache.entry(shift.to_bits()) {
                    let back = translation_matrix(-shift, &self.spec)?.into_entries();
                    let vs = phi_vs.iter().map(|v| pairing.synthesize(&(&back * v - v))).collect();
                    e.insert(vs);
                }
                let vs: Vec<&[f64]> = jump_cache[&shift.to_bits()].iter().map(|v| v.as_slice()).collect();
                let left = flow.values[k + 1] - shift;
                let p = pairing.pair(flow.times[k + 1], left, &vs);
                for j in 0..count {
                    integral[j] += p[j];
                }
            }
        }
        let last = flow.values.len() - 1;
        let end = pairing.pair(flow.times[last], flow.values[last], &phi_f);
        Ok((0..count).map(|j| (end[j] - start[j] - integral[j]).abs()).collect())
    }

    /// Splits `path` at its large-jump arrivals. Each segment carries its
    /// starting datum: `ψ` first, then `T(G(x_n))·Y_{τ_n−}` synthesized as a function.
    pub fn interlaced_segments(&self, psi: &InitialDatum, path: &NoisePath) -> Result<Vec<Segment>> {
        self.check_datum(psi)?;
        let last = path.nodes.len() - 1;
        let mut segments = Vec::new();
        let mut datum = psi.clone();
        let mut start = 0usize;
        for (stop, node) in path.nodes.iter().enumerate() {
            let large = node.jump.filter(|j| j.kind == JumpKind::Large);
            if stop != last && large.is_none() || stop == 0 {
                continue;
            }
            let window = path.window(start, stop)?;
            let mut segment = Segment { start, stop, datum: datum.clone(), path: window, left_limit: None, restart: None };
            if let Some(j) = large {
                let flow = simulate_affine(&self.model, 0.0, &segment.path)?;
                let left = self.closed_form(&datum, flow.times[flow.times.len() - 1], flow.terminal())?.coeffs;
                let shift = self.model.large_jumps().jump_size(j.mark)?;
                let moved = translation_matrix(shift, &self.spec)?.apply(&left)?;
                datum = InitialDatum::from_coeffs(&moved);
                segment.left_limit = Some(left);
                segment.restart = Some(moved);
                start = stop;
            }
            segments.push(segment);
        }
        Ok(segments)
    }

    /// Closed-form evolution between large-jump arrivals, restarted at each
    /// arrival from `T(G(x_n))·Y_{τ_n−}` synthesized as a function.
    pub fn interlaced(&self, psi: &InitialDatum, path: &NoisePath) -> Result<Vec<SolutionState>> {
        let mut states = Vec::with_capacity(path.nodes.len());
        for seg in self.interlaced_segments(psi, path)? {
            let flow = simulate_affine(&self.model, 0.0, &seg.path)?;
            let t0 = path.nodes[seg.start].t;
            let first = if seg.start == 0 { 0 } else { 1 };
            let end = flow.values.len() - usize::from(seg.restart.is_some());
            for i in first..end {
                let (tau, z) = (flow.times[i], flow.values[i]);
                states.push(SolutionState {
                    t: t0 + tau,
                    coeffs: self.closed_form(&seg.datum, tau, z)?.coeffs,
                    route: Route::Interlaced,
                    z0: Some(z),
                    left_limit: None,
                });
            }
            if let (Some(left), Some(moved)) = (seg.left_limit, seg.restart) {
                states.push(SolutionState {
                    t: path.nodes[seg.stop].t,
                    coeffs: moved,
                    route: Route::Interlaced,
                    z0: Some(flow.terminal()),
                    left_limit: Some(left),
                });
            }
        }
        Ok(states)
    }
}

/// Stretch of a path between consecutive large-jump arrivals.
#[derive(Debug, Clone)]
pub struct Segment {
    /// Node indices of the segment ends in the full path.
    pub start: usize,
    pub stop: usize,
    pub datum: InitialDatum,
    /// The window `[start, stop]`, re-based to time 0.
    pub path: NoisePath,
    /// `Y_{τ−}` at `stop`, when a large jump ends the segment.
    pub left_limit: Option<CoeffVector>,
    /// `T(G(x))·Y_{τ−}`.
    pub restart: Option<CoeffVector>,
}

// Quadrature pairings ⟨Y_t, v⟩ of the closed-form solution with fields
// synthesized on the grid; nodes where ψ is negligible are skipped.
struct Pairing<'a> {
    solver: &'a SpdeSolver,
    psi: &'a InitialDatum,
    lo: f64,
    hi: f64,
}

impl<'a> Pairing<'a> {
    fn new(solver: &'a SpdeSolver, psi: &'a InitialDatum) -> Self {
        let nodes = solver.grid.nodes();
        let values: Vec<f64> = nodes.iter().map(|&z| psi.eval(z).abs()).collect();
        let peak = values.iter().cloned().fold(0.0, f64::max);
        let cut = 1e-16 * peak;
        let first = values.iter().position(|&v| v > cut).unwrap_or(0);
        let last = values.iter().rposition(|&v| v > cut).unwrap_or(nodes.len() - 1);
        let spacing = nodes[1] - nodes[0];
        Self { solver, psi, lo: nodes[first] - spacing, hi: nodes[last] + spacing }
    }

    fn synthesize(&self, v: &DVector<f64>) -> Vec<f64> {
        let grid = &self.solver.grid;
        (0..grid.len()).map(|i| grid.hermite_row(i).iter().zip(v.iter()).map(|(h, c)| h * c).sum()).collect()
    }

    fn pair(&self, t: f64, z0: f64, fields: &[&[f64]]) -> Vec<f64> {
        let s = (-t * self.solver.model.slope()).exp();
        let grid = &self.solver.grid;
        let nodes = grid.nodes();
        let (a, b) = (z0 + self.lo / s, z0 + self.hi / s);
        let from = nodes.partition_point(|&y| y < a);
        let to = nodes.partition_point(|&y| y <= b);
        let mut out = vec![0.0; fields.len()];
        for i in from..to {
            let f = grid.weights()[i] * s * self.psi.eval(s * (nodes[i] - z0));
            for (o, field) in out.iter_mut().zip(fields) {
                *o += f * field[i];
            }
        }
        out
    }
}

fn node_at(path: &NoisePath, t: f64) -> Result<usize> {
    let i = path.node_index_at(t);
    if (path.nodes[i].t - t).abs() > 1e-9 {
        return Err(Error::InvalidInput(format!("t={t} is not a node of the path")));
    }
    Ok(i)
}

/// Closed-form coefficients of `Y_t` given the flow base point `Z⁰_t`.
pub fn closed_form_coeffs(
    psi: &InitialDatum,
    t: f64,
    z0: f64,
    model: &LevyModel,
    spec: &BasisSpec,
) -> Result<Projection> {
    SpdeSolver::new(model, spec)?.closed_form(psi, t, z0)
}

/// Dual-route coefficients of `Y_t` on the given path.
pub fn dual_quadrature_coeffs(
    psi: &InitialDatum,
    path: &NoisePath,
    t: f64,
    model: &LevyModel,
    spec: &BasisSpec,
) -> Result<DualProjection> {
    SpdeSolver::new(model, spec)?.dual(psi, path, t)
}

pub fn spectral_euler_evolve(
    psi: &InitialDatum,
    path: &NoisePath,
    model: &LevyModel,
    spec: &BasisSpec,
) -> Result<Vec<SolutionState>> {
    SpdeSolver::new(model, spec)?.spectral_euler(psi, path)
}

pub fn weak_form_residual(
    psi: &InitialDatum,
    phi: &CoeffVector,
    path: &NoisePath,
    model: &LevyModel,
    spec: &BasisSpec,
) -> Result<f64> {
    SpdeSolver::new(model, spec)?.weak_residual(psi, phi, path)
}

pub fn interlaced_spde(
    psi: &InitialDatum,
    path: &NoisePath,
    model: &LevyModel,
    spec: &BasisSpec,
) -> Result<Vec<SolutionState>> {
    SpdeSolver::new(model, spec)?.interlaced(psi, path)
}

/// `exp(t·A)·u` for the generator `A`, used as a semigroup reference.
pub fn semigroup_apply(generator: &DMatrix<f64>, t: f64, u: &[f64]) -> Vec<f64> {
    let e = crate::schwartz_ops::expm(&(generator * t), 1e-13);
    (e * DVector::from_column_slice(u)).as_slice().to_vec()
}
