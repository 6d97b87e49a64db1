use super::config::{Experiment, ExperimentConfig, SchemeTag};
use super::csv::{Cell, CsvArtifact};
use crate::error::{Error, Result};
use crate::hermite_basis::{BasisSpec, CoeffVector};
use crate::levy_sde::{
    derive_seed, interlaced_flow, sample_noise_path, simulate_affine, simulate_flow_euler, FlowResult, JumpKind,
    LevyModel, NoisePath,
};
use crate::monotonicity::{monotone_constant_estimate, translation_growth_check_seeded};
use crate::par;
use crate::schwartz_ops::translation_matrix;
use crate::spde_solver::{InitialDatum, SolutionState, SpdeSolver};

/// Column names of the CSV written for each experiment.
pub fn schema(experiment: Experiment) -> &'static [&'static str] {
    match experiment {
        Experiment::Ddi => &["seed", "z", "statistic_a", "statistic_b"],
        Experiment::Flow => &["seed", "z", "t", "value"],
        Experiment::SpdeRoutes => &["t", "mode_index", "closed", "dual", "spectral", "abs_gap_cd", "abs_gap_cs"],
        Experiment::WeakResidual => &["seed", "dt", "phi_index", "residual"],
        Experiment::Interlace => &["seed", "t", "large_jump", "z0", "mass", "jump_gap"],
        Experiment::Monotonicity => &["N", "lambda_max"],
        Experiment::TranslationGrowth => &["x", "rho", "rho_exact"],
    }
}

/// Runs the experiment with the config's resolved seed.
pub fn run_experiment(cfg: &ExperimentConfig) -> std::result::Result<CsvArtifact, super::CliError> {
    let wrap = |source: Error| super::CliError::Run { experiment: cfg.experiment, source };
    let model = cfg.model.build().map_err(wrap)?;
    let spec = cfg.basis.build().map_err(wrap)?;
    let seed = cfg.seed();
    let mut out = CsvArtifact::new(schema(cfg.experiment), cfg.clone(), seed);
    let ctx = Ctx { cfg, model: &model, spec, seed };
    match cfg.experiment {
        Experiment::Ddi => ctx.ddi(&mut out),
        Experiment::Flow => ctx.flow(&mut out),
        Experiment::SpdeRoutes => ctx.spde_routes(&mut out),
        Experiment::WeakResidual => ctx.weak_residual(&mut out),
        Experiment::Interlace => ctx.interlace(&mut out),
        Experiment::Monotonicity => ctx.monotonicity(&mut out),
        Experiment::TranslationGrowth => ctx.translation_growth(&mut out),
    }
    .map_err(wrap)?;
    Ok(out)
}

struct Ctx<'a> {
    cfg: &'a ExperimentConfig,
    model: &'a LevyModel,
    spec: BasisSpec,
    seed: u64,
}

fn median(mut v: Vec<f64>) -> f64 {
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| format!("{x:.16e}")).collect::<Vec<_>>().join(" ")
}

impl Ctx<'_> {
    fn path(&self, i: usize) -> Result<(u64, NoisePath)> {
        let s = derive_seed(self.seed, i as u64);
        let run = &self.cfg.run;
        Ok((s, sample_noise_path(self.model, run.horizon, run.dt, s)?))
    }

    fn simulate(&self, z: f64, path: &NoisePath) -> Result<FlowResult> {
        match self.cfg.run.scheme {
            SchemeTag::Exact => simulate_affine(self.model, z, path),
            SchemeTag::Euler => simulate_flow_euler(self.model, z, path),
            SchemeTag::Interlaced => interlaced_flow(self.model, z, path),
        }
    }

    fn psi(&self) -> Result<InitialDatum> {
        InitialDatum::gaussian(self.cfg.run.psi_mean, self.cfg.run.psi_width, 1.0)
    }

    fn ddi(&self, out: &mut CsvArtifact) -> Result<()> {
        let zs = &self.cfg.run.z;
        let affine = self.model.is_affine();
        let c = self.model.slope();
        let per_seed = par::try_map_range(self.cfg.run.seeds, |i| -> Result<(u64, Vec<(f64, f64)>)> {
            let (s, path) = self.path(i)?;
            let base = self.simulate(0.0, &path)?;
            let mut stats = Vec::with_capacity(zs.len());
            for &z in zs {
                let run = self.simulate(z, &path)?;
                let a = if affine {
                    run.times
                        .iter()
                        .zip(run.values.iter().zip(&base.values))
                        .map(|(t, (x, y))| (x - y - (t * c).exp() * z).abs())
                        .fold(0.0, f64::max)
                } else {
                    f64::NAN
                };
                stats.push((a, run.terminal() - base.terminal()));
            }
            Ok((s, stats))
        })?;
        for (s, stats) in &per_seed {
            for (&z, &(a, b)) in zs.iter().zip(stats) {
                out.push(vec![Cell::from(*s), z.into(), a.into(), b.into()]);
            }
        }
        let n = per_seed.len() as f64;
        let spread: Vec<f64> = (0..zs.len())
            .map(|j| {
                let mean = per_seed.iter().map(|r| r.1[j].1).sum::<f64>() / n;
                (per_seed.iter().map(|r| (r.1[j].1 - mean).powi(2)).sum::<f64>() / (n - 1.0).max(1.0)).sqrt()
            })
            .collect();
        out.note("spread_statistic_b", fmt_list(&spread));
        Ok(())
    }

    fn flow(&self, out: &mut CsvArtifact) -> Result<()> {
        let zs = &self.cfg.run.z;
        let per_seed = par::try_map_range(self.cfg.run.seeds, |i| -> Result<(u64, Vec<FlowResult>)> {
            let (s, path) = self.path(i)?;
            Ok((s, zs.iter().map(|&z| self.simulate(z, &path)).collect::<Result<_>>()?))
        })?;
        for (s, runs) in &per_seed {
            for (&z, run) in zs.iter().zip(runs) {
                for (t, v) in run.times.iter().zip(&run.values) {
                    out.push(vec![Cell::from(*s), z.into(), (*t).into(), (*v).into()]);
                }
            }
        }
        Ok(())
    }

    fn spde_routes(&self, out: &mut CsvArtifact) -> Result<()> {
        let solver = SpdeSolver::new(self.model, &self.spec)?;
        let psi = self.psi()?;
        let (_, path) = self.path(0)?;
        let closed = solver.closed_form_states(&psi, &path)?;
        let spectral = solver.spectral_euler(&psi, &path)?;
        let find = |states: &[SolutionState], t: f64| -> Result<usize> {
            states
                .iter()
                .position(|s| (s.t - t).abs() <= 1e-9 * t.abs().max(1.0))
                .ok_or_else(|| Error::InvalidInput(format!("t = {t} is not a node of the path")))
        };
        for &t in &self.cfg.run.times {
            let k = find(&closed, t)?;
            let dual = solver.dual(&psi, &path, closed[k].t)?;
            let (c, d, s) = (closed[k].coeffs.as_slice(), dual.coeffs.as_slice(), spectral[k].coeffs.as_slice());
            for m in 0..self.spec.active() {
                out.push(vec![
                    t.into(),
                    m.into(),
                    c[m].into(),
                    d[m].into(),
                    s[m].into(),
                    (c[m] - d[m]).abs().into(),
                    (c[m] - s[m]).abs().into(),
                ]);
            }
        }
        Ok(())
    }

    fn weak_residual(&self, out: &mut CsvArtifact) -> Result<()> {
        let solver = SpdeSolver::new(self.model, &self.spec)?;
        let psi = self.psi()?;
        let run = &self.cfg.run;
        let phis = run.phi.iter().map(|&k| CoeffVector::unit(self.spec, k)).collect::<Result<Vec<_>>>()?;
        let factors: Vec<usize> = (0..=run.halvings).rev().map(|j| 1usize << j).collect();
        let per_seed = par::try_map_range(run.seeds, |i| -> Result<(u64, Vec<Vec<f64>>)> {
            let (s, fine) = self.path(i)?;
            let mut levels = Vec::with_capacity(factors.len());
            for &f in &factors {
                let path = if f == 1 { fine.clone() } else { fine.coarsen(f)? };
                levels.push(solver.weak_residuals(&psi, &phis, &path)?);
            }
            Ok((s, levels))
        })?;
        for (s, levels) in &per_seed {
            for (&f, res) in factors.iter().zip(levels) {
                for (&k, r) in run.phi.iter().zip(res) {
                    out.push(vec![Cell::from(*s), (run.dt * f as f64).into(), k.into(), (*r).into()]);
                }
            }
        }
        for (j, &k) in run.phi.iter().enumerate() {
            let medians: Vec<f64> =
                (0..factors.len()).map(|l| median(per_seed.iter().map(|r| r.1[l][j]).collect())).collect();
            out.note(&format!("median_residual_phi{k}"), fmt_list(&medians));
        }
        Ok(())
    }

    fn interlace(&self, out: &mut CsvArtifact) -> Result<()> {
        let solver = SpdeSolver::new(self.model, &self.spec)?;
        let psi = self.psi()?;
        let active = self.spec.active();
        let per_seed = par::try_map_range(self.cfg.run.seeds, |i| -> Result<(u64, Vec<Vec<Cell>>)> {
            let (s, path) = self.path(i)?;
            let states = solver.interlaced(&psi, &path)?;
            let mut rows = Vec::with_capacity(states.len());
            for (node, state) in path.nodes.iter().zip(&states) {
                let large = node.jump.filter(|j| j.kind == JumpKind::Large);
                let gap = match (large, &state.left_limit) {
                    (Some(j), Some(left)) => {
                        let g = self.model.large_jumps().jump_size(j.mark)?;
                        let moved = translation_matrix(g, &self.spec)?.apply(left)?;
                        (0..active)
                            .map(|m| (state.coeffs.as_slice()[m] - moved.as_slice()[m]).abs())
                            .fold(0.0, f64::max)
                    }
                    _ => 0.0,
                };
                rows.push(vec![
                    Cell::from(s),
                    state.t.into(),
                    Cell::from(large.is_some() as u64),
                    state.z0.unwrap_or(f64::NAN).into(),
                    state.coeffs.mass().into(),
                    gap.into(),
                ]);
            }
            Ok((s, rows))
        })?;
        for (_, rows) in per_seed {
            for row in rows {
                out.push(row);
            }
        }
        Ok(())
    }

    fn monotonicity(&self, out: &mut CsvArtifact) -> Result<()> {
        let r = monotone_constant_estimate(self.model, self.cfg.run.p, &self.cfg.run.levels)?;
        for (&n, &l) in r.levels.iter().zip(&r.lambda_max) {
            out.push(vec![n.into(), l.into()]);
        }
        out.note("drift", r.drift.map_or("none".to_string(), |d| format!("{d:.16e}")));
        out.note("stable", r.stable);
        Ok(())
    }

    fn translation_growth(&self, out: &mut CsvArtifact) -> Result<()> {
        let run = &self.cfg.run;
        let g = translation_growth_check_seeded(run.p, &run.xs, run.trials, &self.spec, self.seed)?;
        for ((&x, &r), &e) in g.xs.iter().zip(&g.rho).zip(&g.rho_exact) {
            out.push(vec![x.into(), r.into(), e.into()]);
        }
        out.note("slope", format!("{:.16e}", g.slope));
        out.note("slope_exact", format!("{:.16e}", g.slope_exact));
        out.note("degree_bound", g.degree_bound);
        out.note("within_bound", g.within_bound);
        Ok(())
    }
}
