use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp, StandardNormal};

use super::model::{LargeJumpSizes, LevyModel};
use crate::error::{Error, Result};

const STREAM_BROWNIAN: u64 = 1;
const STREAM_AUX: u64 = 2;
const STREAM_SMALL: u64 = 3;
const STREAM_LARGE: u64 = 4;

/// Independent generator for `(seed, purpose)`.
pub fn stream_rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(purpose);
    rng
}

/// Seed of the `index`-th path under base seed `base`.
///
/// `splitmix64(base + (index + 1)·0x9E3779B97F4A7C15)`: each derived seed
/// depends only on `(base, index)`, so adding paths never perturbs earlier ones.
pub fn derive_seed(base: u64, index: u64) -> u64 {
    let mut z = base.wrapping_add((index.wrapping_add(1)).wrapping_mul(0x9E37_79B9_7F4A_7C15));
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum JumpKind {
    Small,
    Large,
}

/// A jump occurring at a node; the node's state is the post-jump value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jump {
    pub kind: JumpKind,
    pub mark: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PathNode {
    pub t: f64,
    pub jump: Option<Jump>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpEvent {
    pub time: f64,
    pub mark: f64,
}

/// One realization of the driving noise on `[0, T]`.
///
/// `nodes` is the uniform grid of step `dt` merged with all jump times;
/// `db[k]` and `aux[k]` belong to the interval `nodes[k] → nodes[k+1]`.
/// `db[k] ~ N(0, h_k)` drives the Brownian motion and `aux[k] ~ N(0, 1)` is
/// the independent component used by the exact affine propagator.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisePath {
    pub horizon: f64,
    pub dt: f64,
    pub seed: u64,
    pub nodes: Vec<PathNode>,
    pub db: Vec<f64>,
    pub aux: Vec<f64>,
    pub small_events: Vec<JumpEvent>,
    pub large_events: Vec<JumpEvent>,
    /// `∫ F(0,x) ν(dx)` over the simulated band.
    pub compensator_drift: f64,
    /// Variance discarded below the small-jump cutoff.
    pub truncated_variance: f64,
}

fn poisson_times(rng: &mut ChaCha8Rng, rate: f64, horizon: f64) -> Vec<f64> {
    let mut times = Vec::new();
    if rate <= 0.0 {
        return times;
    }
    let gaps = Exp::new(rate).expect("positive rate");
    let mut t = 0.0;
    loop {
        t += gaps.sample(rng);
        if t >= horizon {
            break;
        }
        times.push(t);
    }
    times
}

fn check_steps(horizon: f64, dt: f64) -> Result<()> {
    if !(horizon.is_finite() && horizon > 0.0) {
        return Err(Error::InvalidInput(format!("horizon must be > 0, got {horizon}")));
    }
    if !(dt.is_finite() && dt > 0.0 && dt <= horizon) {
        return Err(Error::InvalidInput(format!("dt must satisfy 0 < dt <= T, got {dt}")));
    }
    Ok(())
}

/// Samples Brownian increments, small-jump events from `ν` on the simulated
/// band and large-jump arrivals with `Exp(λ)` gaps, each from its own stream.
pub fn sample_noise_path(model: &LevyModel, horizon: f64, dt: f64, seed: u64) -> Result<NoisePath> {
    check_steps(horizon, dt)?;
    let small = model.small_jumps();
    let mut small_rng = stream_rng(seed, STREAM_SMALL);
    let small_events: Vec<JumpEvent> = {
        let times = poisson_times(&mut small_rng, small.total_rate(), horizon);
        if times.is_empty() {
            Vec::new()
        } else {
            let atoms = small.atoms();
            let pick = WeightedIndex::new(atoms.iter().map(|a| a.mass))
                .map_err(|e| Error::Model(format!("small-jump weights: {e}")))?;
            times
                .into_iter()
                .map(|time| JumpEvent { time, mark: atoms[pick.sample(&mut small_rng)].mark })
                .collect()
        }
    };

    let large = model.large_jumps();
    let mut large_rng = stream_rng(seed, STREAM_LARGE);
    let large_times = poisson_times(&mut large_rng, large.rate(), horizon);
    let large_events: Vec<JumpEvent> = match large.sizes() {
        LargeJumpSizes::Atoms(list) => {
            if large_times.is_empty() {
                Vec::new()
            } else {
                let pick = WeightedIndex::new(list.iter().map(|a| a.1))
                    .map_err(|e| Error::Model(format!("large-jump weights: {e}")))?;
                large_times
                    .into_iter()
                    .map(|time| JumpEvent { time, mark: list[pick.sample(&mut large_rng)].0 })
                    .collect()
            }
        }
        LargeJumpSizes::SymmetricUniform { lo, hi } => large_times
            .into_iter()
            .map(|time| {
                let magnitude = lo + (hi - lo) * large_rng.random::<f64>();
                let sign = if large_rng.random::<bool>() { 1.0 } else { -1.0 };
                JumpEvent { time, mark: sign * magnitude }
            })
            .collect(),
    };

    assemble(model, horizon, dt, seed, small_events, large_events)
}

fn check_events(events: &[JumpEvent], horizon: f64, what: &str) -> Result<()> {
    for e in events {
        if !(e.time > 0.0 && e.time < horizon) || !e.mark.is_finite() {
            return Err(Error::InvalidInput(format!(
                "{what} event at t={} (mark {}) outside (0, {horizon})",
                e.time, e.mark
            )));
        }
    }
    if events.windows(2).any(|w| w[0].time >= w[1].time) {
        return Err(Error::InvalidInput(format!("{what} event times must be strictly increasing")));
    }
    Ok(())
}

// merges the events into the uniform grid and draws the Gaussian increments
fn assemble(
    model: &LevyModel,
    horizon: f64,
    dt: f64,
    seed: u64,
    small_events: Vec<JumpEvent>,
    large_events: Vec<JumpEvent>,
) -> Result<NoisePath> {
    let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
    let mut nodes: Vec<PathNode> = (0..=steps)
        .map(|k| PathNode { t: if k == steps { horizon } else { k as f64 * dt }, jump: None })
        .collect();
    nodes.extend(small_events.iter().map(|e| PathNode {
        t: e.time,
        jump: Some(Jump { kind: JumpKind::Small, mark: e.mark }),
    }));
    nodes.extend(large_events.iter().map(|e| PathNode {
        t: e.time,
        jump: Some(Jump { kind: JumpKind::Large, mark: e.mark }),
    }));
    // grid nodes sort before an event at the same instant
    nodes.sort_by(|a, b| a.t.total_cmp(&b.t).then(a.jump.is_some().cmp(&b.jump.is_some())));

    let mut brownian = stream_rng(seed, STREAM_BROWNIAN);
    let mut aux_rng = stream_rng(seed, STREAM_AUX);
    let mut db = Vec::with_capacity(nodes.len() - 1);
    let mut aux = Vec::with_capacity(nodes.len() - 1);
    for w in nodes.windows(2) {
        let h = w[1].t - w[0].t;
        let n: f64 = brownian.sample(StandardNormal);
        db.push(n * h.sqrt());
        aux.push(aux_rng.sample(StandardNormal));
    }

    let small = model.small_jumps();
    Ok(NoisePath {
        horizon,
        dt,
        seed,
        nodes,
        db,
        aux,
        small_events,
        large_events,
        compensator_drift: small.compensator(),
        truncated_variance: small.truncated_variance(),
    })
}

impl NoisePath {
    /// Path with prescribed jump events and sampled Gaussian increments.
    pub fn from_events(
        model: &LevyModel,
        horizon: f64,
        dt: f64,
        seed: u64,
        small_events: Vec<JumpEvent>,
        large_events: Vec<JumpEvent>,
    ) -> Result<NoisePath> {
        check_steps(horizon, dt)?;
        check_events(&small_events, horizon, "small")?;
        check_events(&large_events, horizon, "large")?;
        assemble(model, horizon, dt, seed, small_events, large_events)
    }

    pub fn times(&self) -> Vec<f64> {
        self.nodes.iter().map(|n| n.t).collect()
    }

    pub fn intervals(&self) -> usize {
        self.db.len()
    }

    /// Width of interval `k`.
    pub fn step(&self, k: usize) -> f64 {
        self.nodes[k + 1].t - self.nodes[k].t
    }

    /// Brownian motion at every node.
    pub fn brownian(&self) -> Vec<f64> {
        let mut b = Vec::with_capacity(self.nodes.len());
        let mut acc = 0.0;
        b.push(0.0);
        for d in &self.db {
            acc += d;
            b.push(acc);
        }
        b
    }

    /// Index of the last node with `t_node ≤ t` (within 1e-12).
    pub fn node_index_at(&self, t: f64) -> usize {
        self.nodes.iter().rposition(|n| n.t <= t + 1e-12).unwrap_or_default()
    }

    /// Path with every `factor` uniform steps merged; event nodes are kept.
    ///
    /// Brownian increments are summed, so the coarse and fine paths share the
    /// same Brownian motion at the retained nodes. The auxiliary normals are
    /// recombined as `Σ aux_j·sqrt(h_j/H)`, which keeps them standard normal.
    pub fn coarsen(&self, factor: usize) -> Result<NoisePath> {
        if factor == 0 {
            return Err(Error::InvalidInput("coarsening factor must be >= 1".into()));
        }
        if factor == 1 {
            return Ok(self.clone());
        }
        let last = self.nodes.len() - 1;
        let keep: Vec<bool> = self
            .nodes
            .iter()
            .enumerate()
            .map(|(i, n)| {
                i == 0
                    || i == last
                    || n.jump.is_some()
                    || ((n.t / self.dt).round() as u64).is_multiple_of(factor as u64)
            })
            .collect();
        let mut nodes = vec![self.nodes[0]];
        let mut db = Vec::new();
        let mut aux = Vec::new();
        let (mut sum_db, mut sum_aux, mut width) = (0.0, 0.0, 0.0);
        for k in 0..self.intervals() {
            let h = self.step(k);
            sum_db += self.db[k];
            sum_aux += self.aux[k] * h.sqrt();
            width += h;
            if keep[k + 1] {
                nodes.push(self.nodes[k + 1]);
                db.push(sum_db);
                aux.push(if width > 0.0 { sum_aux / width.sqrt() } else { 0.0 });
                sum_db = 0.0;
                sum_aux = 0.0;
                width = 0.0;
            }
        }
        Ok(NoisePath { dt: self.dt * factor as f64, nodes, db, aux, ..self.clone() })
    }

    /// Sub-path between node indices `start ≤ end`, re-based to start at 0.
    ///
    /// A jump sitting on the start node is dropped (it belongs to the state
    /// the window starts from).
    pub fn window(&self, start: usize, end: usize) -> Result<NoisePath> {
        if start > end || end >= self.nodes.len() {
            return Err(Error::InvalidInput(format!(
                "invalid window [{start}, {end}] for {} nodes",
                self.nodes.len()
            )));
        }
        let t0 = self.nodes[start].t;
        let mut nodes: Vec<PathNode> = self.nodes[start..=end]
            .iter()
            .map(|n| PathNode { t: n.t - t0, jump: n.jump })
            .collect();
        nodes[0].jump = None;
        let t1 = self.nodes[end].t;
        let within = |e: &&JumpEvent| e.time > t0 && e.time <= t1;
        let shift = |e: &JumpEvent| JumpEvent { time: e.time - t0, mark: e.mark };
        Ok(NoisePath {
            horizon: t1 - t0,
            dt: self.dt,
            seed: self.seed,
            nodes,
            db: self.db[start..end].to_vec(),
            aux: self.aux[start..end].to_vec(),
            small_events: self.small_events.iter().filter(within).map(shift).collect(),
            large_events: self.large_events.iter().filter(within).map(shift).collect(),
            compensator_drift: self.compensator_drift,
            truncated_variance: self.truncated_variance,
        })
    }

    /// The path observed up to time `t`.
    pub fn truncate(&self, t: f64) -> Result<NoisePath> {
        let end = self.node_index_at(t);
        let mut p = self.window(0, end)?;
        p.horizon = self.nodes[end].t;
        Ok(p)
    }
}
