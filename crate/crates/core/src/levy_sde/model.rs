use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Scalar map `x ↦ f(x)`.
pub type ScalarFn = Arc<dyn Fn(f64) -> f64 + Send + Sync>;
/// State-dependent jump map `(z, x) ↦ F(z, x)`.
pub type StateJumpFn = Arc<dyn Fn(f64, f64) -> f64 + Send + Sync>;

/// Panels per side used to discretize an absolutely continuous Lévy density.
pub const DENSITY_PANELS: usize = 512;
/// Default small-jump cutoff for densities.
pub const DEFAULT_CUTOFF: f64 = 1e-3;

/// Jump map depending only on the mark: `F(0, x)` or `G(x)`.
#[derive(Clone)]
pub enum JumpMap {
    /// `x ↦ s·x`.
    Scaled(f64),
    Custom(ScalarFn),
}

impl JumpMap {
    pub fn identity() -> Self {
        JumpMap::Scaled(1.0)
    }

    pub fn apply(&self, x: f64) -> f64 {
        match self {
            JumpMap::Scaled(s) => s * x,
            JumpMap::Custom(f) => f(x),
        }
    }
}

impl fmt::Debug for JumpMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            JumpMap::Scaled(s) => write!(f, "Scaled({s})"),
            JumpMap::Custom(_) => write!(f, "Custom(..)"),
        }
    }
}

/// Lévy measure restricted to `0 < |x| < 1`.
#[derive(Clone)]
pub enum LevyMeasure {
    Zero,
    /// Point masses `(mark, mass)`.
    Atoms(Vec<(f64, f64)>),
    /// Density on `cutoff ≤ |x| < 1`; the band below the cutoff is dropped and
    /// its variance contribution reported.
    Density { density: ScalarFn, cutoff: f64 },
}

impl fmt::Debug for LevyMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            LevyMeasure::Zero => write!(f, "Zero"),
            LevyMeasure::Atoms(a) => f.debug_tuple("Atoms").field(a).finish(),
            LevyMeasure::Density { cutoff, .. } => write!(f, "Density {{ cutoff: {cutoff} }}"),
        }
    }
}

/// A point mass of the (discretized) small-jump measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Atom {
    pub mark: f64,
    pub mass: f64,
}

/// Small-jump component: `ν` on `0 < |x| < 1` together with `F(0, ·)`.
///
/// Densities are replaced by their composite-midpoint discretization, so
/// simulation, compensators and operator integrals all see the same measure.
#[derive(Debug, Clone)]
pub struct SmallJumps {
    measure: LevyMeasure,
    map: JumpMap,
    atoms: Vec<Atom>,
    truncated_variance: f64,
    second_moment: f64,
    sup_map: f64,
}

fn midpoint_atoms(density: &ScalarFn, lo: f64, hi: f64, panels: usize) -> Vec<Atom> {
    let width = (hi - lo) / panels as f64;
    let mut atoms = Vec::with_capacity(2 * panels);
    for i in 0..panels {
        let x = lo + (i as f64 + 0.5) * width;
        atoms.push(Atom { mark: -x, mass: density(-x) * width });
        atoms.push(Atom { mark: x, mass: density(x) * width });
    }
    atoms
}

impl SmallJumps {
    pub fn none() -> Self {
        Self::new(LevyMeasure::Zero, JumpMap::identity()).expect("empty measure is valid")
    }

    /// Symmetric unit masses at `±a` with `F(0, x) = x`.
    pub fn symmetric_pair(a: f64) -> Result<Self> {
        Self::new(LevyMeasure::Atoms(vec![(a, 1.0), (-a, 1.0)]), JumpMap::identity())
    }

    pub fn new(measure: LevyMeasure, map: JumpMap) -> Result<Self> {
        let (atoms, truncated_variance) = match &measure {
            LevyMeasure::Zero => (Vec::new(), 0.0),
            LevyMeasure::Atoms(list) => {
                let mut atoms = Vec::with_capacity(list.len());
                for &(mark, mass) in list {
                    if !(mark.is_finite() && mark != 0.0 && mark.abs() < 1.0) {
                        return Err(Error::Model(format!(
                            "small-jump mark {mark} must satisfy 0 < |x| < 1"
                        )));
                    }
                    if !(mass.is_finite() && mass >= 0.0) {
                        return Err(Error::Model(format!("atom mass {mass} must be finite and >= 0")));
                    }
                    atoms.push(Atom { mark, mass });
                }
                (atoms, 0.0)
            }
            LevyMeasure::Density { density, cutoff } => {
                if !(cutoff.is_finite() && *cutoff >= 0.0 && *cutoff < 1.0) {
                    return Err(Error::Model(format!("cutoff {cutoff} must lie in [0, 1)")));
                }
                let atoms = midpoint_atoms(density, *cutoff, 1.0, DENSITY_PANELS);
                let dropped = if *cutoff > 0.0 {
                    midpoint_atoms(density, 0.0, *cutoff, DENSITY_PANELS)
                        .iter()
                        .map(|a| map.apply(a.mark).powi(2) * a.mass)
                        .sum()
                } else {
                    0.0
                };
                if let Some(a) = atoms.iter().find(|a| !(a.mass.is_finite() && a.mass >= 0.0)) {
                    return Err(Error::Model(format!("density invalid at x={}", a.mark)));
                }
                (atoms, dropped)
            }
        };
        let mut second_moment = 0.0;
        let mut sup_map: f64 = 0.0;
        for a in &atoms {
            let f = map.apply(a.mark);
            if !f.is_finite() {
                return Err(Error::Model(format!("F(0, {}) is not finite", a.mark)));
            }
            second_moment += f * f * a.mass;
            sup_map = sup_map.max(f.abs());
        }
        if !(second_moment.is_finite() && truncated_variance.is_finite()) {
            return Err(Error::Model("∫|F(0,x)|²ν(dx) is not finite".into()));
        }
        Ok(Self { measure, map, atoms, truncated_variance, second_moment, sup_map })
    }

    pub fn measure(&self) -> &LevyMeasure {
        &self.measure
    }

    pub fn map(&self) -> &JumpMap {
        &self.map
    }

    /// Atoms actually simulated (after discretization and cutoff).
    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn is_zero(&self) -> bool {
        self.total_rate() == 0.0
    }

    /// Total intensity of the simulated band.
    pub fn total_rate(&self) -> f64 {
        self.atoms.iter().map(|a| a.mass).sum()
    }

    /// `F(0, x)`.
    pub fn jump_size(&self, mark: f64) -> f64 {
        self.map.apply(mark)
    }

    /// `∫ F(0, x) ν(dx)` over the simulated band.
    pub fn compensator(&self) -> f64 {
        self.atoms.iter().map(|a| self.map.apply(a.mark) * a.mass).sum()
    }

    /// `∫ |F(0, x)|² ν(dx)` over the simulated band.
    pub fn second_moment(&self) -> f64 {
        self.second_moment
    }

    /// `sup |F(0, x)|` over the simulated atoms.
    pub fn sup_jump(&self) -> f64 {
        self.sup_map
    }

    /// `∫_{|x|<cutoff} F(0,x)² ν(dx)`, the variance discarded by the cutoff.
    pub fn truncated_variance(&self) -> f64 {
        self.truncated_variance
    }
}

/// Distribution of the large-jump marks `|x| ≥ 1`.
#[derive(Debug, Clone)]
pub enum LargeJumpSizes {
    /// `(mark, weight)`; weights are normalized.
    Atoms(Vec<(f64, f64)>),
    /// Symmetric: sign uniform, magnitude uniform on `[lo, hi]`.
    SymmetricUniform { lo: f64, hi: f64 },
}

/// Large-jump component: arrival rate `λ = ν({|x| ≥ 1})`, mark law and map `G`.
#[derive(Debug, Clone)]
pub struct LargeJumps {
    rate: f64,
    sizes: LargeJumpSizes,
    map: JumpMap,
}

impl LargeJumps {
    pub fn none() -> Self {
        Self { rate: 0.0, sizes: LargeJumpSizes::Atoms(vec![(1.0, 1.0)]), map: JumpMap::identity() }
    }

    pub fn new(rate: f64, sizes: LargeJumpSizes, map: JumpMap) -> Result<Self> {
        if !(rate.is_finite() && rate >= 0.0) {
            return Err(Error::Model(format!("large-jump rate {rate} must be finite and >= 0")));
        }
        match &sizes {
            LargeJumpSizes::Atoms(list) => {
                if list.is_empty() {
                    return Err(Error::Model("large-jump atoms must be non-empty".into()));
                }
                let mut total = 0.0;
                for &(mark, w) in list {
                    if !(mark.is_finite() && mark.abs() >= 1.0) {
                        return Err(Error::Model(format!("large-jump mark {mark} must satisfy |x| >= 1")));
                    }
                    if !(w.is_finite() && w >= 0.0) {
                        return Err(Error::Model(format!("large-jump weight {w} must be >= 0")));
                    }
                    total += w;
                }
                if total <= 0.0 {
                    return Err(Error::Model("large-jump weights sum to zero".into()));
                }
            }
            LargeJumpSizes::SymmetricUniform { lo, hi } => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 1.0 && hi >= lo) {
                    return Err(Error::Model(format!("need 1 <= lo <= hi, got [{lo}, {hi}]")));
                }
            }
        }
        Ok(Self { rate, sizes, map })
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn sizes(&self) -> &LargeJumpSizes {
        &self.sizes
    }

    pub fn map(&self) -> &JumpMap {
        &self.map
    }

    /// `G(x)`; errors when the map is not finite at `x`.
    pub fn jump_size(&self, mark: f64) -> Result<f64> {
        let g = self.map.apply(mark);
        if g.is_finite() {
            Ok(g)
        } else {
            Err(Error::Model(format!("G({mark}) is not finite")))
        }
    }
}

/// Constants of the Lipschitz and linear-growth conditions, as far as they
/// could be established.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelValidation {
    pub affine: bool,
    /// `K₁`; exact for affine models, a sampled estimate otherwise.
    pub lipschitz: f64,
    /// `K₂` for affine models.
    pub growth: Option<f64>,
}

/// Coefficients of the one-dimensional flow
/// `dZ = b(Z)dt + σ dB + ∫F(Z,x)Ñ(dt,dx) + ∫G(x)N(dt,dx)`.
///
/// Without nonlinear overrides `b(z) = Cz + K` and `F(z, x) = F(0, x)`.
#[derive(Clone)]
pub struct LevyModel {
    sigma: f64,
    slope: f64,
    intercept: f64,
    small: SmallJumps,
    large: LargeJumps,
    nonlinear_drift: Option<ScalarFn>,
    nonlinear_jump: Option<StateJumpFn>,
    validation: ModelValidation,
}

impl fmt::Debug for LevyModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("LevyModel")
            .field("sigma", &self.sigma)
            .field("C", &self.slope)
            .field("K", &self.intercept)
            .field("small", &self.small)
            .field("large", &self.large)
            .field("nonlinear_drift", &self.nonlinear_drift.is_some())
            .field("nonlinear_jump", &self.nonlinear_jump.is_some())
            .finish()
    }
}

impl LevyModel {
    /// Affine model with no jumps.
    pub fn affine(sigma: f64, slope: f64, intercept: f64) -> Result<Self> {
        for (name, v) in [("sigma", sigma), ("C", slope), ("K", intercept)] {
            if !v.is_finite() {
                return Err(Error::Model(format!("{name} must be finite, got {v}")));
            }
        }
        let mut model = Self {
            sigma,
            slope,
            intercept,
            small: SmallJumps::none(),
            large: LargeJumps::none(),
            nonlinear_drift: None,
            nonlinear_jump: None,
            validation: ModelValidation { affine: true, lipschitz: 0.0, growth: None },
        };
        model.revalidate();
        Ok(model)
    }

    /// `σ = C = K = 0`, no jumps.
    pub fn zero() -> Self {
        Self::affine(0.0, 0.0, 0.0).expect("zero model is valid")
    }

    pub fn with_small_jumps(mut self, small: SmallJumps) -> Self {
        self.small = small;
        self.revalidate();
        self
    }

    pub fn with_large_jumps(mut self, large: LargeJumps) -> Self {
        self.large = large;
        self
    }

    /// Replaces the affine drift by `b`.
    pub fn with_nonlinear_drift(mut self, b: ScalarFn) -> Self {
        self.nonlinear_drift = Some(b);
        self.revalidate();
        self
    }

    /// Replaces `F(0, x)` by a state-dependent `F(z, x)`.
    pub fn with_nonlinear_jump(mut self, f: StateJumpFn) -> Self {
        self.nonlinear_jump = Some(f);
        self.revalidate();
        self
    }

    fn revalidate(&mut self) {
        let affine = self.is_affine();
        self.validation = if affine {
            // |b(z1)-b(z2)|² = C²|z1-z2|²; the σ and F terms vanish for constant σ, F(0,·)
            let lipschitz = self.slope * self.slope;
            let growth = (2.0 * self.slope * self.slope).max(
                2.0 * self.intercept * self.intercept
                    + self.sigma.powi(4)
                    + self.small.second_moment(),
            );
            ModelValidation { affine, lipschitz, growth: Some(growth) }
        } else {
            ModelValidation { affine, lipschitz: self.sampled_lipschitz(), growth: None }
        };
    }

    // sup over a grid of |b(z1)-b(z2)|² + ∫|F(z1,x)-F(z2,x)|²ν / |z1-z2|² on [-10, 10]
    fn sampled_lipschitz(&self) -> f64 {
        let mut worst: f64 = 0.0;
        let h = 1e-3;
        for i in 0..=400 {
            let z = -10.0 + 0.05 * i as f64;
            let db = (self.drift(z + h) - self.drift(z)) / h;
            let jump: f64 = self
                .small
                .atoms()
                .iter()
                .map(|a| ((self.jump(z + h, a.mark) - self.jump(z, a.mark)) / h).powi(2) * a.mass)
                .sum();
            worst = worst.max(db * db + jump);
        }
        worst
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// Drift slope `C`.
    pub fn slope(&self) -> f64 {
        self.slope
    }

    /// Drift intercept `K`.
    pub fn intercept(&self) -> f64 {
        self.intercept
    }

    pub fn small_jumps(&self) -> &SmallJumps {
        &self.small
    }

    pub fn large_jumps(&self) -> &LargeJumps {
        &self.large
    }

    pub fn validation(&self) -> ModelValidation {
        self.validation
    }

    pub fn is_affine(&self) -> bool {
        self.nonlinear_drift.is_none() && self.nonlinear_jump.is_none()
    }

    pub(crate) fn require_affine(&self, what: &str) -> Result<()> {
        if self.is_affine() {
            Ok(())
        } else {
            Err(Error::InvalidInput(format!("{what} requires an affine model")))
        }
    }

    /// `b(z)`.
    pub fn drift(&self, z: f64) -> f64 {
        match &self.nonlinear_drift {
            Some(b) => b(z),
            None => self.slope * z + self.intercept,
        }
    }

    /// `F(z, x)` for a small-jump mark.
    pub fn jump(&self, z: f64, mark: f64) -> f64 {
        match &self.nonlinear_jump {
            Some(f) => f(z, mark),
            None => self.small.jump_size(mark),
        }
    }

    /// `∫ F(z, x) ν(dx)`.
    pub fn compensator_at(&self, z: f64) -> f64 {
        match &self.nonlinear_jump {
            Some(f) => self.small.atoms().iter().map(|a| f(z, a.mark) * a.mass).sum(),
            None => self.small.compensator(),
        }
    }
}
