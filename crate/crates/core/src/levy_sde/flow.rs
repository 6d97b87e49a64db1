use super::model::LevyModel;
use super::noise::{JumpKind, NoisePath};
use crate::error::{Error, Result};

/// Magnitude beyond which an Euler path is declared divergent.
pub const DIVERGENCE_BOUND: f64 = 1e12;

/// Trajectory of `Z^z` at the nodes of a [`NoisePath`].
#[derive(Debug, Clone, PartialEq)]
pub struct FlowResult {
    pub times: Vec<f64>,
    /// Post-jump values, one per node.
    pub values: Vec<f64>,
    /// `sup_t |Z^z_t − Z^0_t − e^{tC}z|`, filled in by coupled diagnostics.
    pub deviation: Option<f64>,
}

impl FlowResult {
    pub fn terminal(&self) -> f64 {
        *self.values.last().expect("a flow has at least one node")
    }
}

/// `expm1(x)/x`, equal to 1 at 0.
pub(crate) fn phi1(x: f64) -> f64 {
    if x.abs() < 1e-8 {
        1.0 + 0.5 * x
    } else {
        x.exp_m1() / x
    }
}

/// Conditional variance factor `h·(φ₁(2x) − φ₁(x)²)` of
/// `∫₀ʰ e^{C(h−s)} dB_s` given `B_h`, with `x = C·h`.
pub(crate) fn residual_variance(h: f64, x: f64) -> f64 {
    if x.abs() < 1e-2 {
        let x2 = x * x;
        h * x2 * (1.0 / 12.0 + x / 12.0 + 17.0 * x2 / 360.0)
    } else {
        let a = phi1(x);
        (h * (phi1(2.0 * x) - a * a)).max(0.0)
    }
}

/// Exact transition of the affine part over one interval.
///
/// `z' = e^{x}z + (K − c)hφ₁(x) + σ(φ₁(x)ΔB + sqrt(v)·ξ)` with `x = Ch`, where
/// `c` is the small-jump compensator and `ξ` the auxiliary normal.
pub(crate) fn affine_step(model: &LevyModel, z: f64, h: f64, db: f64, aux: f64) -> f64 {
    let x = model.slope() * h;
    let a = phi1(x);
    let drift = (model.intercept() - model.small_jumps().compensator()) * h * a;
    let noise = model.sigma() * (a * db + residual_variance(h, x).sqrt() * aux);
    x.exp() * z + drift + noise
}

fn run_exact(model: &LevyModel, z: f64, path: &NoisePath, with_large: bool) -> Result<FlowResult> {
    model.require_affine("exact propagation")?;
    let large = model.large_jumps();
    let mut values = Vec::with_capacity(path.nodes.len());
    let mut state = z;
    values.push(state);
    for k in 0..path.intervals() {
        state = affine_step(model, state, path.step(k), path.db[k], path.aux[k]);
        if let Some(jump) = path.nodes[k + 1].jump {
            match jump.kind {
                JumpKind::Small => state += model.small_jumps().jump_size(jump.mark),
                JumpKind::Large if with_large => state += large.jump_size(jump.mark)?,
                JumpKind::Large => {}
            }
        }
        values.push(state);
    }
    Ok(FlowResult { times: path.times(), values, deviation: None })
}

/// Exact propagation of an affine flow with compensated small jumps.
///
/// Large-jump events on the path are ignored; see [`interlaced_flow`].
pub fn simulate_affine(model: &LevyModel, z: f64, path: &NoisePath) -> Result<FlowResult> {
    run_exact(model, z, path, false)
}

/// Left-point Euler scheme on the merged grid.
///
/// Small jumps use the state just before the event. Large-jump events are
/// ignored, as in [`simulate_affine`].
pub fn simulate_flow_euler(model: &LevyModel, z: f64, path: &NoisePath) -> Result<FlowResult> {
    let sigma = model.sigma();
    let mut values = Vec::with_capacity(path.nodes.len());
    let mut state = z;
    values.push(state);
    for k in 0..path.intervals() {
        let h = path.step(k);
        state += (model.drift(state) - model.compensator_at(state)) * h + sigma * path.db[k];
        let node = path.nodes[k + 1];
        if let Some(jump) = node.jump {
            if jump.kind == JumpKind::Small {
                state += model.jump(state, jump.mark);
            }
        }
        if !state.is_finite() || state.abs() > DIVERGENCE_BOUND {
            return Err(Error::Divergence { t: node.t, value: state.abs() });
        }
        values.push(state);
    }
    Ok(FlowResult { times: path.times(), values, deviation: None })
}

/// Exact affine propagation between large-jump arrivals, with `Z ← Z + G(x_n)`
/// at each arrival `τ_n`.
pub fn interlaced_flow(model: &LevyModel, z: f64, path: &NoisePath) -> Result<FlowResult> {
    run_exact(model, z, path, true)
}
