use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use crate::hermite_basis::BasisSpec;
use crate::levy_sde::{JumpMap, LargeJumpSizes, LargeJumps, LevyMeasure, LevyModel, SmallJumps};

/// Seed used when neither the flag, the config nor `LEVYFLOW_SEED` sets one.
pub const DEFAULT_SEED: u64 = 0;
/// Environment variable consulted last when resolving the seed.
pub const SEED_ENV: &str = "LEVYFLOW_SEED";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Experiment {
    Ddi,
    Flow,
    SpdeRoutes,
    WeakResidual,
    Interlace,
    Monotonicity,
    TranslationGrowth,
}

impl Experiment {
    pub const ALL: [Experiment; 7] = [
        Experiment::Ddi,
        Experiment::Flow,
        Experiment::SpdeRoutes,
        Experiment::WeakResidual,
        Experiment::Interlace,
        Experiment::Monotonicity,
        Experiment::TranslationGrowth,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Experiment::Ddi => "ddi",
            Experiment::Flow => "flow",
            Experiment::SpdeRoutes => "spde_routes",
            Experiment::WeakResidual => "weak_residual",
            Experiment::Interlace => "interlace",
            Experiment::Monotonicity => "monotonicity",
            Experiment::TranslationGrowth => "translation_growth",
        }
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Experiment {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.tag() == s)
            .ok_or_else(|| format!("unknown experiment `{s}`"))
    }
}

/// Path simulation scheme for the `ddi` and `flow` experiments.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SchemeTag {
    Exact,
    Euler,
    Interlaced,
}

impl SchemeTag {
    fn tag(self) -> &'static str {
        match self {
            SchemeTag::Exact => "exact",
            SchemeTag::Euler => "euler",
            SchemeTag::Interlaced => "interlaced",
        }
    }
}

impl FromStr for SchemeTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "exact" => Ok(SchemeTag::Exact),
            "euler" => Ok(SchemeTag::Euler),
            "interlaced" => Ok(SchemeTag::Interlaced),
            _ => Err(format!("unknown scheme `{s}` (exact, euler, interlaced)")),
        }
    }
}

/// Model coefficients. Jump maps are linear: `F(0,x) = small_scale·x`, `G(x) = large_scale·x`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelConfig {
    pub sigma: f64,
    pub c: f64,
    pub k: f64,
    /// `(mark, mass)` atoms of the small-jump measure.
    pub small_atoms: Vec<(f64, f64)>,
    pub small_scale: f64,
    pub large_rate: f64,
    /// `(mark, weight)` law of the large-jump marks.
    pub large_atoms: Vec<(f64, f64)>,
    pub large_scale: f64,
    /// Adds `a·sin z` to the drift; any non-zero value makes the model nonlinear.
    pub sin_amplitude: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            sigma: 0.0,
            c: 0.0,
            k: 0.0,
            small_atoms: Vec::new(),
            small_scale: 1.0,
            large_rate: 0.0,
            large_atoms: vec![(1.5, 1.0), (-1.5, 1.0)],
            large_scale: 1.0,
            sin_amplitude: 0.0,
        }
    }
}

impl ModelConfig {
    pub fn build(&self) -> crate::Result<LevyModel> {
        let mut model = LevyModel::affine(self.sigma, self.c, self.k)?;
        if !self.small_atoms.is_empty() {
            let measure = LevyMeasure::Atoms(self.small_atoms.clone());
            model = model.with_small_jumps(SmallJumps::new(measure, JumpMap::Scaled(self.small_scale))?);
        }
        if self.large_rate > 0.0 {
            let sizes = LargeJumpSizes::Atoms(self.large_atoms.clone());
            model = model.with_large_jumps(LargeJumps::new(self.large_rate, sizes, JumpMap::Scaled(self.large_scale))?);
        }
        if self.sin_amplitude != 0.0 {
            let (c, k, a) = (self.c, self.k, self.sin_amplitude);
            model = model.with_nonlinear_drift(Arc::new(move |z: f64| c * z + k + a * z.sin()));
        }
        Ok(model)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisConfig {
    pub n: usize,
    pub buffer: usize,
}

impl Default for BasisConfig {
    fn default() -> Self {
        Self { n: 64, buffer: 16 }
    }
}

impl BasisConfig {
    pub fn build(&self) -> crate::Result<BasisSpec> {
        BasisSpec::new(self.n, self.buffer)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub horizon: f64,
    pub dt: f64,
    pub seeds: usize,
    pub seed: Option<u64>,
    pub z: Vec<f64>,
    pub p: f64,
    pub scheme: SchemeTag,
    pub times: Vec<f64>,
    pub psi_mean: f64,
    pub psi_width: f64,
    pub phi: Vec<usize>,
    pub halvings: usize,
    pub levels: Vec<usize>,
    pub xs: Vec<f64>,
    pub trials: usize,
    pub output: Option<String>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            horizon: 1.0,
            dt: 0.01,
            seeds: 20,
            seed: None,
            z: vec![-2.0, -1.0, 1.0, 2.0],
            p: 0.3,
            scheme: SchemeTag::Exact,
            times: vec![0.25, 0.5, 1.0],
            psi_mean: 0.0,
            psi_width: 1.0,
            phi: vec![0, 3],
            halvings: 3,
            levels: vec![32, 64],
            xs: vec![1.0, 2.0, 4.0, 8.0],
            trials: 1000,
            output: None,
        }
    }
}

/// Fully validated experiment description.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub model: ModelConfig,
    pub basis: BasisConfig,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// All defaults for `experiment`.
    pub fn defaults(experiment: Experiment) -> Self {
        Self {
            experiment,
            model: ModelConfig::default(),
            basis: BasisConfig::default(),
            run: RunConfig::default(),
        }
    }

    /// Seed precedence: explicit flag, then the config, then `env`, then [`DEFAULT_SEED`].
    pub fn resolve_seed(&self, flag: Option<u64>, env: Option<&str>) -> Result<u64, ConfigError> {
        if let Some(s) = flag.or(self.run.seed) {
            return Ok(s);
        }
        match env {
            Some(v) => v.trim().parse().map_err(|_| ConfigError {
                key: SEED_ENV.into(),
                line: 0,
                message: format!("`{v}` is not an unsigned 64-bit integer"),
            }),
            None => Ok(DEFAULT_SEED),
        }
    }

    pub fn seed(&self) -> u64 {
        self.run.seed.unwrap_or(DEFAULT_SEED)
    }

    /// Canonical document with every key spelled out; parses back to `self`.
    pub fn render(&self) -> String {
        let m = &self.model;
        let r = &self.run;
        let mut out = format!("experiment = {}\n\n[model]\n", self.experiment);
        out += &format!("sigma = {:?}\nC = {:?}\nK = {:?}\n", m.sigma, m.c, m.k);
        out += &format!("small_atoms = {}\nsmall_scale = {:?}\n", pairs(&m.small_atoms), m.small_scale);
        out += &format!("large_rate = {:?}\nlarge_atoms = {}\n", m.large_rate, pairs(&m.large_atoms));
        out += &format!("large_scale = {:?}\nsin_amplitude = {:?}\n", m.large_scale, m.sin_amplitude);
        out += &format!("\n[basis]\nN = {}\nB = {}\n", self.basis.n, self.basis.buffer);
        out += &format!("\n[run]\nT = {:?}\ndt = {:?}\nseeds = {}\n", r.horizon, r.dt, r.seeds);
        if let Some(s) = r.seed {
            out += &format!("seed = {s}\n");
        }
        out += &format!("z = {}\np = {:?}\nscheme = {}\n", list(&r.z), r.p, r.scheme.tag());
        out += &format!("times = {}\npsi_mean = {:?}\npsi_width = {:?}\n", list(&r.times), r.psi_mean, r.psi_width);
        out += &format!("phi = {}\nhalvings = {}\nlevels = {}\n", list(&r.phi), r.halvings, list(&r.levels));
        out += &format!("xs = {}\ntrials = {}\n", list(&r.xs), r.trials);
        if let Some(o) = &r.output {
            out += &format!("output = {o}\n");
        }
        out
    }
}

fn list<T: fmt::Debug>(v: &[T]) -> String {
    v.iter().map(|x| format!("{x:?}")).collect::<Vec<_>>().join(", ")
}

fn pairs(v: &[(f64, f64)]) -> String {
    v.iter().map(|(a, b)| format!("{a:?}:{b:?}")).collect::<Vec<_>>().join(", ")
}

/// Parse or validation failure, tied to a key and a 1-based line (0 when not
/// attributable to one line).
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("line {line}: `{key}`: {message}")]
pub struct ConfigError {
    pub key: String,
    pub line: usize,
    pub message: String,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
enum Section {
    Top,
    Model,
    Basis,
    Run,
}

/// Parses a sectioned `key = value` document; `experiment` is required.
pub fn parse_config(text: &str) -> Result<ExperimentConfig, ConfigError> {
    parse_config_with(text, None)
}

/// Like [`parse_config`], with `experiment` supplied by the caller when the
/// document omits it. A conflicting value in the document is an error.
pub fn parse_config_with(text: &str, experiment: Option<Experiment>) -> Result<ExperimentConfig, ConfigError> {
    let mut cfg = ExperimentConfig::defaults(experiment.unwrap_or(Experiment::Ddi));
    let mut seen_experiment = false;
    let mut section = Section::Top;
    let mut section_lines = [0usize; 4];
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        if let Some(name) = content.strip_prefix('[').and_then(|s| s.strip_suffix(']')) {
            section = match name.trim() {
                "model" => Section::Model,
                "basis" => Section::Basis,
                "run" => Section::Run,
                other => return Err(err(other, line, "unknown section")),
            };
            section_lines[section as usize] = line;
            continue;
        }
        let (key, value) = content
            .split_once('=')
            .map(|(k, v)| (k.trim(), v.trim()))
            .ok_or_else(|| err(content, line, "expected `key = value`"))?;
        if section == Section::Top && key == "experiment" {
            let tag: Experiment = value.parse().map_err(|e: String| err(key, line, &e))?;
            if let Some(e) = experiment.filter(|e| *e != tag) {
                return Err(err(key, line, &format!("config says `{tag}` but `{e}` was requested")));
            }
            cfg.experiment = tag;
            seen_experiment = true;
            continue;
        }
        assign(&mut cfg, section, key, value, line)?;
    }
    if !seen_experiment && experiment.is_none() {
        return Err(err("experiment", 0, "missing required key"));
    }
    validate(&cfg, &section_lines)?;
    Ok(cfg)
}

fn err(key: &str, line: usize, message: &str) -> ConfigError {
    ConfigError { key: key.into(), line, message: message.into() }
}

fn value<T: FromStr>(key: &str, v: &str, line: usize) -> Result<T, ConfigError> {
    v.parse().map_err(|_| err(key, line, &format!("cannot parse `{v}`")))
}

fn value_list<T: FromStr>(key: &str, v: &str, line: usize) -> Result<Vec<T>, ConfigError> {
    v.split(',').map(str::trim).filter(|s| !s.is_empty()).map(|s| value(key, s, line)).collect()
}

fn pair_list(key: &str, v: &str, line: usize) -> Result<Vec<(f64, f64)>, ConfigError> {
    v.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| {
            let (a, b) = s.split_once(':').ok_or_else(|| err(key, line, &format!("expected `mark:mass`, got `{s}`")))?;
            Ok((value(key, a.trim(), line)?, value(key, b.trim(), line)?))
        })
        .collect()
}

fn check(ok: bool, key: &str, line: usize, constraint: &str) -> Result<(), ConfigError> {
    if ok {
        Ok(())
    } else {
        Err(err(key, line, &format!("constraint violated: {constraint}")))
    }
}

fn finite(key: &str, v: &str, line: usize) -> Result<f64, ConfigError> {
    let x: f64 = value(key, v, line)?;
    check(x.is_finite(), key, line, &format!("{key} finite"))?;
    Ok(x)
}

fn assign(cfg: &mut ExperimentConfig, section: Section, key: &str, v: &str, line: usize) -> Result<(), ConfigError> {
    let m = &mut cfg.model;
    let r = &mut cfg.run;
    match (section, key) {
        (Section::Model, "sigma") => {
            m.sigma = finite(key, v, line)?;
            check(m.sigma >= 0.0, key, line, "sigma >= 0")?;
        }
        (Section::Model, "C") => m.c = finite(key, v, line)?,
        (Section::Model, "K") => m.k = finite(key, v, line)?,
        (Section::Model, "small_atoms") => m.small_atoms = pair_list(key, v, line)?,
        (Section::Model, "small_scale") => m.small_scale = finite(key, v, line)?,
        (Section::Model, "large_rate") => {
            m.large_rate = finite(key, v, line)?;
            check(m.large_rate >= 0.0, key, line, "large_rate >= 0")?;
        }
        (Section::Model, "large_atoms") => m.large_atoms = pair_list(key, v, line)?,
        (Section::Model, "large_scale") => m.large_scale = finite(key, v, line)?,
        (Section::Model, "sin_amplitude") => m.sin_amplitude = finite(key, v, line)?,
        (Section::Basis, "N") => cfg.basis.n = value(key, v, line)?,
        (Section::Basis, "B") => cfg.basis.buffer = value(key, v, line)?,
        (Section::Run, "T") => {
            r.horizon = finite(key, v, line)?;
            check(r.horizon > 0.0, key, line, "T > 0")?;
        }
        (Section::Run, "dt") => {
            r.dt = finite(key, v, line)?;
            check(r.dt > 0.0, key, line, "dt > 0")?;
        }
        (Section::Run, "seeds") => {
            r.seeds = value(key, v, line)?;
            check(r.seeds >= 1, key, line, "seeds >= 1")?;
        }
        (Section::Run, "seed") => r.seed = Some(value(key, v, line)?),
        (Section::Run, "z") => r.z = value_list(key, v, line)?,
        (Section::Run, "p") => r.p = finite(key, v, line)?,
        (Section::Run, "scheme") => r.scheme = v.parse().map_err(|e: String| err(key, line, &e))?,
        (Section::Run, "times") => r.times = value_list(key, v, line)?,
        (Section::Run, "psi_mean") => r.psi_mean = finite(key, v, line)?,
        (Section::Run, "psi_width") => {
            r.psi_width = finite(key, v, line)?;
            check(r.psi_width > 0.0, key, line, "psi_width > 0")?;
        }
        (Section::Run, "phi") => r.phi = value_list(key, v, line)?,
        (Section::Run, "halvings") => r.halvings = value(key, v, line)?,
        (Section::Run, "levels") => r.levels = value_list(key, v, line)?,
        (Section::Run, "xs") => r.xs = value_list(key, v, line)?,
        (Section::Run, "trials") => r.trials = value(key, v, line)?,
        (Section::Run, "output") => r.output = Some(v.to_string()),
        _ => return Err(err(key, line, "unknown key")),
    }
    Ok(())
}

fn validate(cfg: &ExperimentConfig, section_lines: &[usize; 4]) -> Result<(), ConfigError> {
    let r = &cfg.run;
    let run_line = section_lines[Section::Run as usize];
    check(r.dt <= r.horizon, "dt", run_line, "dt <= T")?;
    check(r.times.iter().all(|t| *t >= 0.0 && *t <= r.horizon), "times", run_line, "0 <= t <= T")?;
    check(!r.z.is_empty(), "z", run_line, "at least one initial point")?;
    cfg.model
        .build()
        .map_err(|e| err("model", section_lines[Section::Model as usize], &e.to_string()))?;
    cfg.basis
        .build()
        .map_err(|e| err("basis", section_lines[Section::Basis as usize], &e.to_string()))?;
    Ok(())
}
