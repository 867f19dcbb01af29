//! Run configuration: flat dotted keys in TOML syntax.
//!
//! Nested tables and dotted keys are equivalent (`[als] sweeps = 3` is
//! `als.sweeps = 3`). Unknown keys are rejected; `seed` is mandatory.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;
use std::str::FromStr;
use std::sync::Arc;

use toml::Value;

use crate::als::AlsConfig;
use crate::dynamics::ResampleScheme;
use crate::error::{Error, Result};
use crate::targets::{self, Energy, Gaussian, GroundTruthSampler, ManyWell, ManyWellSampler};

/// The four sampler variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Method {
    /// Transport only.
    Flow,
    /// Transport, then one resampling and Langevin round at `t = 1`.
    FlowPlus,
    /// Resampling and Langevin after every transport step, in training and sampling.
    FlowPlusStochastic,
    /// Resampling and Langevin only; no learned field.
    Stochastic,
}

impl Method {
    pub const ALL: [Method; 4] = [Method::Flow, Method::FlowPlus, Method::FlowPlusStochastic, Method::Stochastic];

    /// Whether training interleaves resampling and Langevin steps.
    pub fn stochastic_training(self) -> bool {
        matches!(self, Method::FlowPlusStochastic)
    }

    pub fn uses_fields(self) -> bool {
        !matches!(self, Method::Stochastic)
    }

    /// Whether a model trained with `trained` can be sampled as `self`.
    pub fn compatible_with(self, trained: Method) -> bool {
        match self {
            Method::Stochastic => true,
            Method::Flow | Method::FlowPlus => matches!(trained, Method::Flow | Method::FlowPlus),
            Method::FlowPlusStochastic => trained == Method::FlowPlusStochastic,
        }
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "flow" => Ok(Method::Flow),
            "flow+" => Ok(Method::FlowPlus),
            "flow+stochastic" => Ok(Method::FlowPlusStochastic),
            "stochastic" => Ok(Method::Stochastic),
            other => Err(Error::Config(format!(
                "unknown method `{other}` (expected flow, flow+, flow+stochastic or stochastic)"
            ))),
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Method::Flow => "flow",
            Method::FlowPlus => "flow+",
            Method::FlowPlusStochastic => "flow+stochastic",
            Method::Stochastic => "stochastic",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TargetSpec {
    Gm2,
    Gm40,
    ManyWell { wells: usize, dim: usize },
}

impl TargetSpec {
    pub fn dim(&self) -> usize {
        match self {
            TargetSpec::Gm2 | TargetSpec::Gm40 => 2,
            TargetSpec::ManyWell { dim, .. } => *dim,
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            TargetSpec::Gm2 => "gm2",
            TargetSpec::Gm40 => "gm40",
            TargetSpec::ManyWell { .. } => "manywell",
        }
    }

    pub fn energy(&self) -> Result<Arc<dyn Energy>> {
        Ok(match *self {
            TargetSpec::Gm2 => Arc::new(targets::gm2()),
            TargetSpec::Gm40 => Arc::new(targets::gm40()),
            TargetSpec::ManyWell { wells, dim } => Arc::new(ManyWell::new(wells, dim)?),
        })
    }

    pub fn sampler(&self) -> Result<Box<dyn GroundTruthSampler>> {
        Ok(match *self {
            TargetSpec::Gm2 => Box::new(targets::gm2()),
            TargetSpec::Gm40 => Box::new(targets::gm40()),
            TargetSpec::ManyWell { wells, dim } => Box::new(ManyWellSampler::new(ManyWell::new(wells, dim)?)),
        })
    }
}

/// Time at which path quantities are evaluated for the field of `[t_{k-1}, t_k]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PathTime {
    Left,
    Mid,
}

impl FromStr for PathTime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "left" => Ok(PathTime::Left),
            "mid" => Ok(PathTime::Mid),
            other => Err(Error::Config(format!("unknown time.eval `{other}` (expected left or mid)"))),
        }
    }
}

impl fmt::Display for PathTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            PathTime::Left => "left",
            PathTime::Mid => "mid",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub seed: u64,
    pub threads: Option<usize>,
    pub target: TargetSpec,
    pub latent_std: f64,
    pub method: Method,
    pub steps: usize,
    pub path_time: PathTime,
    pub samples: usize,
    pub iterations: usize,
    pub basis_size: usize,
    pub domain: (f64, f64),
    pub als: AlsConfig,
    pub init_rank: usize,
    pub init_scale: f64,
    pub ema_alpha: f64,
    pub round_tol: f64,
    pub max_rank: usize,
    pub ode_substeps: usize,
    pub ode_safety: f64,
    /// `None` means `1e-3 * (width / 10)^2`.
    pub langevin_h: Option<f64>,
    pub langevin_steps: usize,
    pub langevin_pre: bool,
    pub resample_scheme: ResampleScheme,
    pub ess_floor: f64,
    /// Points drawn per outer iteration for early stopping; 0 disables it.
    pub validation_count: usize,
}

impl RunConfig {
    /// Defaults for everything except the seed.
    pub fn new(seed: u64, target: TargetSpec) -> Self {
        Self {
            seed,
            threads: None,
            target,
            latent_std: 1.0,
            method: Method::FlowPlusStochastic,
            steps: 20,
            path_time: PathTime::Mid,
            samples: 5000,
            iterations: 5,
            basis_size: 10,
            domain: (-5.0, 5.0),
            als: AlsConfig::default(),
            init_rank: 1,
            init_scale: 1e-3,
            ema_alpha: 0.5,
            round_tol: 1e-8,
            max_rank: 20,
            ode_substeps: 4,
            ode_safety: 10.0,
            langevin_h: None,
            langevin_steps: 10,
            langevin_pre: false,
            resample_scheme: ResampleScheme::Multinomial,
            ess_floor: 1.0,
            validation_count: 0,
        }
    }

    pub fn dim(&self) -> usize {
        self.target.dim()
    }

    pub fn langevin_step_size(&self) -> f64 {
        let w = self.domain.1 - self.domain.0;
        self.langevin_h.unwrap_or(1e-3 * (w / 10.0).powi(2))
    }

    pub fn latent(&self) -> Gaussian {
        Gaussian::new(vec![0.0; self.dim()], self.latent_std).expect("validated latent std")
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        let table: toml::Table = text.parse().map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        let mut flat = BTreeMap::new();
        flatten("", &table, &mut flat);
        Self::from_pairs(flat)
    }

    fn from_pairs(kv: BTreeMap<String, Value>) -> Result<Self> {
        let unknown: Vec<&str> = kv.keys().map(String::as_str).filter(|k| !KNOWN_KEYS.contains(k)).collect();
        if !unknown.is_empty() {
            return Err(Error::Config(format!("unknown config key(s): {}", unknown.join(", "))));
        }
        let r = Reader { kv: &kv };
        let seed = r.uint("seed")?.ok_or_else(|| Error::Config("missing required key `seed`".into()))?;
        let target = match r.string("target")?.as_deref().unwrap_or("gm2") {
            "gm2" => TargetSpec::Gm2,
            "gm40" => TargetSpec::Gm40,
            "manywell" => TargetSpec::ManyWell {
                wells: r.usize("manywell.m")?.unwrap_or(2),
                dim: r.usize("manywell.d")?.unwrap_or(6),
            },
            other => return Err(Error::Config(format!("unknown target `{other}` (expected gm2, gm40 or manywell)"))),
        };
        let mut c = RunConfig::new(seed, target);
        c.threads = r.usize("threads")?;
        set(&mut c.latent_std, r.float("latent.std")?);
        if let Some(m) = r.string("method")? {
            c.method = m.parse()?;
        }
        set(&mut c.steps, r.usize("time.steps")?);
        if let Some(s) = r.string("time.eval")? {
            c.path_time = s.parse()?;
        }
        set(&mut c.samples, r.usize("train.samples")?);
        set(&mut c.iterations, r.usize("train.iterations")?);
        set(&mut c.basis_size, r.usize("basis.n")?);
        set(&mut c.domain.0, r.float("domain.lo")?);
        set(&mut c.domain.1, r.float("domain.hi")?);
        set(&mut c.als.sweeps, r.usize("als.sweeps")?);
        if let Some(v) = r.float("als.ridge")? {
            c.als.ridge = Some(v);
        }
        set(&mut c.als.tol, r.float("als.tol")?);
        set(&mut c.als.estimate_ct, r.bool("als.estimate_ct")?);
        set(&mut c.als.c_t, r.float("als.c_t")?);
        set(&mut c.init_rank, r.usize("als.init_rank")?);
        set(&mut c.init_scale, r.float("als.init_scale")?);
        set(&mut c.ema_alpha, r.float("ema.alpha")?);
        set(&mut c.round_tol, r.float("round.tol")?);
        set(&mut c.max_rank, r.usize("round.max_rank")?);
        set(&mut c.ode_substeps, r.usize("ode.substeps")?);
        set(&mut c.ode_safety, r.float("ode.safety")?);
        c.langevin_h = r.float("langevin.h")?;
        set(&mut c.langevin_steps, r.usize("langevin.steps")?);
        set(&mut c.langevin_pre, r.bool("langevin.pre")?);
        if let Some(s) = r.string("resample.scheme")? {
            c.resample_scheme = s.parse()?;
        }
        set(&mut c.ess_floor, r.float("resample.ess_floor")?);
        set(&mut c.validation_count, r.usize("validation.count")?);
        r.string("checkpoint.sha1")?;
        if !matches!(target, TargetSpec::ManyWell { .. }) {
            for k in ["manywell.m", "manywell.d"] {
                if kv.contains_key(k) {
                    return Err(Error::Config(format!("`{k}` is only valid with target = \"manywell\"")));
                }
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if let TargetSpec::ManyWell { wells, dim } = self.target {
            if dim == 0 || 2 * wells > dim {
                return bad(format!("manywell needs 2*m <= d and d >= 1, got m={wells}, d={dim}"));
            }
        }
        if !(self.latent_std > 0.0 && self.latent_std.is_finite()) {
            return bad(format!("latent.std must be positive, got {}", self.latent_std));
        }
        if self.steps == 0 {
            return bad("time.steps must be >= 1".into());
        }
        if self.samples < 2 {
            return bad(format!("train.samples must be >= 2, got {}", self.samples));
        }
        if self.iterations == 0 {
            return bad("train.iterations must be >= 1".into());
        }
        if self.basis_size == 0 || self.basis_size > crate::basis::DEFAULT_MAX_SIZE {
            return bad(format!("basis.n must be in 1..={}, got {}", crate::basis::DEFAULT_MAX_SIZE, self.basis_size));
        }
        if !(self.domain.0 < self.domain.1) || !self.domain.0.is_finite() || !self.domain.1.is_finite() {
            return bad(format!("domain.lo < domain.hi required, got {:?}", self.domain));
        }
        if self.als.sweeps == 0 {
            return bad("als.sweeps must be >= 1".into());
        }
        if let Some(l) = self.als.ridge {
            if !(l >= 0.0) {
                return bad(format!("als.ridge must be >= 0, got {l}"));
            }
        }
        if self.init_rank == 0 || self.max_rank == 0 {
            return bad("als.init_rank and round.max_rank must be >= 1".into());
        }
        if !(0.0..1.0).contains(&self.ema_alpha) {
            return bad(format!("ema.alpha must be in [0, 1), got {}", self.ema_alpha));
        }
        if !(self.round_tol >= 0.0) {
            return bad(format!("round.tol must be >= 0, got {}", self.round_tol));
        }
        if self.ode_substeps == 0 {
            return bad("ode.substeps must be >= 1".into());
        }
        if !(self.ode_safety >= 1.0) {
            return bad(format!("ode.safety must be >= 1, got {}", self.ode_safety));
        }
        if !(self.langevin_step_size() > 0.0) {
            return bad(format!("langevin.h must be positive, got {}", self.langevin_step_size()));
        }
        if !(0.0..=1.0).contains(&self.ess_floor) {
            return bad(format!("resample.ess_floor must be in [0, 1], got {}", self.ess_floor));
        }
        if self.threads == Some(0) {
            return bad("threads must be >= 1".into());
        }
        Ok(())
    }

    /// Fully resolved key/value view, used for manifests.
    pub fn to_pairs(&self) -> Vec<(&'static str, Value)> {
        let f = Value::Float;
        let i = |v: usize| Value::Integer(v as i64);
        let s = |v: String| Value::String(v);
        let mut out = vec![
            ("seed", Value::Integer(self.seed as i64)),
            ("target", s(self.target.name().into())),
        ];
        if let TargetSpec::ManyWell { wells, dim } = self.target {
            out.push(("manywell.m", i(wells)));
            out.push(("manywell.d", i(dim)));
        }
        if let Some(t) = self.threads {
            out.push(("threads", i(t)));
        }
        out.extend([
            ("latent.std", f(self.latent_std)),
            ("method", s(self.method.to_string())),
            ("time.steps", i(self.steps)),
            ("time.eval", s(self.path_time.to_string())),
            ("train.samples", i(self.samples)),
            ("train.iterations", i(self.iterations)),
            ("basis.n", i(self.basis_size)),
            ("domain.lo", f(self.domain.0)),
            ("domain.hi", f(self.domain.1)),
            ("als.sweeps", i(self.als.sweeps)),
            ("als.ridge", f(self.als.ridge_for(self.samples))),
            ("als.tol", f(self.als.tol)),
            ("als.estimate_ct", Value::Boolean(self.als.estimate_ct)),
            ("als.c_t", f(self.als.c_t)),
            ("als.init_rank", i(self.init_rank)),
            ("als.init_scale", f(self.init_scale)),
            ("ema.alpha", f(self.ema_alpha)),
            ("round.tol", f(self.round_tol)),
            ("round.max_rank", i(self.max_rank)),
            ("ode.substeps", i(self.ode_substeps)),
            ("ode.safety", f(self.ode_safety)),
            ("langevin.h", f(self.langevin_step_size())),
            ("langevin.steps", i(self.langevin_steps)),
            ("langevin.pre", Value::Boolean(self.langevin_pre)),
            ("resample.scheme", s(self.resample_scheme.to_string())),
            ("resample.ess_floor", f(self.ess_floor)),
            ("validation.count", i(self.validation_count)),
        ]);
        out
    }
}

/// Every accepted key.
pub const KNOWN_KEYS: &[&str] = &[
    "seed",
    "threads",
    "target",
    "manywell.m",
    "manywell.d",
    "latent.std",
    "method",
    "time.steps",
    "time.eval",
    "train.samples",
    "train.iterations",
    "basis.n",
    "domain.lo",
    "domain.hi",
    "als.sweeps",
    "als.ridge",
    "als.tol",
    "als.estimate_ct",
    "als.c_t",
    "als.init_rank",
    "als.init_scale",
    "ema.alpha",
    "round.tol",
    "round.max_rank",
    "ode.substeps",
    "ode.safety",
    "langevin.h",
    "langevin.steps",
    "langevin.pre",
    "resample.scheme",
    "resample.ess_floor",
    "validation.count",
    "checkpoint.sha1",
];

fn flatten(prefix: &str, table: &toml::Table, out: &mut BTreeMap<String, Value>) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            Value::Table(t) => flatten(&key, t, out),
            other => {
                out.insert(key, other.clone());
            }
        }
    }
}

fn set<T>(slot: &mut T, value: Option<T>) {
    if let Some(v) = value {
        *slot = v;
    }
}

struct Reader<'a> {
    kv: &'a BTreeMap<String, Value>,
}

impl Reader<'_> {
    fn typed(key: &str, want: &str, v: &Value) -> Error {
        Error::Config(format!("key `{key}` expects {want}, got {}", v.type_str()))
    }

    fn uint(&self, key: &str) -> Result<Option<u64>> {
        match self.kv.get(key) {
            None => Ok(None),
            Some(Value::Integer(i)) if *i >= 0 => Ok(Some(*i as u64)),
            Some(v) => Err(Self::typed(key, "a non-negative integer", v)),
        }
    }

    fn usize(&self, key: &str) -> Result<Option<usize>> {
        self.uint(key).map(|v| v.map(|u| u as usize))
    }

    fn float(&self, key: &str) -> Result<Option<f64>> {
        match self.kv.get(key) {
            None => Ok(None),
            Some(Value::Float(f)) => Ok(Some(*f)),
            Some(Value::Integer(i)) => Ok(Some(*i as f64)),
            Some(v) => Err(Self::typed(key, "a number", v)),
        }
    }

    fn bool(&self, key: &str) -> Result<Option<bool>> {
        match self.kv.get(key) {
            None => Ok(None),
            Some(Value::Boolean(b)) => Ok(Some(*b)),
            Some(v) => Err(Self::typed(key, "a boolean", v)),
        }
    }

    fn string(&self, key: &str) -> Result<Option<String>> {
        match self.kv.get(key) {
            None => Ok(None),
            Some(Value::String(s)) => Ok(Some(s.clone())),
            Some(v) => Err(Self::typed(key, "a string", v)),
        }
    }
}
