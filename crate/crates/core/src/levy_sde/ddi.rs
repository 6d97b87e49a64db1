use super::flow::{simulate_affine, simulate_flow_euler, FlowResult};
use super::model::LevyModel;
use super::noise::{derive_seed, sample_noise_path};
use crate::error::{Error, Result};
use crate::par;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scheme {
    Exact,
    Euler,
}

impl Scheme {
    pub fn simulate(self, model: &LevyModel, z: f64, path: &super::NoisePath) -> Result<FlowResult> {
        match self {
            Scheme::Exact => simulate_affine(model, z, path),
            Scheme::Euler => simulate_flow_euler(model, z, path),
        }
    }
}

/// Coupled-noise statistics of `Z^z − Z^0`.
#[derive(Debug, Clone, PartialEq)]
pub struct DdiReport {
    pub scheme: Scheme,
    pub zs: Vec<f64>,
    pub n_seeds: usize,
    /// `max_{seed,t,z} |Z^z_t − Z^0_t − e^{tC}z|`; affine models only.
    pub max_deviation: Option<f64>,
    /// Across-seed standard deviation of `Z^z_T − Z^0_T`, one per `z`.
    pub spread: Vec<f64>,
    /// Across-seed mean of `Z^z_T − Z^0_T`, one per `z`.
    pub mean_gap: Vec<f64>,
}

impl DdiReport {
    pub fn max_spread(&self) -> f64 {
        self.spread.iter().cloned().fold(0.0, f64::max)
    }
}

/// Runs `Z^z` and `Z^0` on the same path for every seed and `z`.
pub fn ddi_check(
    model: &LevyModel,
    zs: &[f64],
    n_seeds: usize,
    horizon: f64,
    dt: f64,
    scheme: Scheme,
    base_seed: u64,
) -> Result<DdiReport> {
    if n_seeds < 2 {
        return Err(Error::InvalidInput(format!("n_seeds must be >= 2, got {n_seeds}")));
    }
    if zs.is_empty() {
        return Err(Error::InvalidInput("at least one initial point is required".into()));
    }
    let affine = model.is_affine();
    let c = model.slope();
    // per seed: (max deviation, terminal gaps)
    let per_seed = par::try_map_range(n_seeds, |i| -> Result<(f64, Vec<f64>)> {
        let path = sample_noise_path(model, horizon, dt, derive_seed(base_seed, i as u64))?;
        let base = scheme.simulate(model, 0.0, &path)?;
        let mut worst: f64 = 0.0;
        let mut gaps = Vec::with_capacity(zs.len());
        for &z in zs {
            let run = scheme.simulate(model, z, &path)?;
            if affine {
                for ((t, a), b) in run.times.iter().zip(&run.values).zip(&base.values) {
                    worst = worst.max((a - b - (t * c).exp() * z).abs());
                }
            }
            gaps.push(run.terminal() - base.terminal());
        }
        Ok((worst, gaps))
    })?;

    let n = n_seeds as f64;
    let mut spread = Vec::with_capacity(zs.len());
    let mut mean_gap = Vec::with_capacity(zs.len());
    for j in 0..zs.len() {
        let mean = per_seed.iter().map(|s| s.1[j]).sum::<f64>() / n;
        let var = per_seed.iter().map(|s| (s.1[j] - mean).powi(2)).sum::<f64>() / (n - 1.0);
        mean_gap.push(mean);
        spread.push(var.sqrt());
    }
    Ok(DdiReport {
        scheme,
        zs: zs.to_vec(),
        n_seeds,
        max_deviation: affine.then(|| per_seed.iter().map(|s| s.0).fold(0.0, f64::max)),
        spread,
        mean_gap,
    })
}
