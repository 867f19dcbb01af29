//! Time grid, outer training loop, EMA field updates and the sampler variants.

use std::sync::Arc;

use log::{debug, info};
use serde::Serialize;

use crate::als::{als_fit, TrainingBatch};
use crate::basis::BasisSet;
use crate::checkpoint::Checkpoint;
use crate::config::{Method, PathTime, RunConfig};
use crate::dynamics::{
    effective_sample_size, langevin_step, log_weights, ode_solve, resampling_step, ParticleEnsemble, SafetyBox,
};
use crate::error::{Error, Result};
use crate::field::FttVectorField;
use crate::metrics::energy_distance;
use crate::points::Points;
use crate::rng::Streams;
use crate::targets::{Energy, EnergyPath, Gaussian, GroundTruthSampler};
use crate::tt::TensorTrain;

// stream tags
const TRAIN: u64 = 1;
const SAMPLE: u64 = 2;
const VALIDATE: u64 = 3;
const LATENT: u64 = 10;
const INIT: u64 = 11;
const RESAMPLE: u64 = 12;
const LANGEVIN: u64 = 13;
const LANGEVIN_PRE: u64 = 14;
const FINAL: u64 = 15;
const REFERENCE: u64 = 16;

/// Uniform grid `t_m = m / M`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Schedule {
    steps: usize,
}

impl Schedule {
    pub fn new(steps: usize) -> Result<Self> {
        if steps == 0 {
            return Err(Error::InvalidArgument("schedule needs at least one step".into()));
        }
        Ok(Self { steps })
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn time(&self, m: usize) -> f64 {
        if m == self.steps {
            1.0
        } else {
            m as f64 / self.steps as f64
        }
    }

    /// `[t_{k-1}, t_k]` for `k` in `1..=M`.
    pub fn interval(&self, k: usize) -> (f64, f64) {
        (self.time(k - 1), self.time(k))
    }
}

/// `round(α old + (1 - α) new)`, or `round(new)` without an old field.
pub fn update_tt(
    old: Option<&TensorTrain>,
    new: &TensorTrain,
    alpha: f64,
    tol: f64,
    max_rank: usize,
) -> Result<TensorTrain> {
    if !(0.0..1.0).contains(&alpha) {
        return Err(Error::InvalidArgument(format!("EMA weight {alpha} outside [0, 1)")));
    }
    let combined = match old {
        Some(old) if alpha > 0.0 => old.scale(alpha).add(&new.scale(1.0 - alpha))?,
        Some(old) => {
            if old.modes() != new.modes() || old.output_dim() != new.output_dim() {
                return Err(Error::Shape("old and new fields differ in shape".into()));
            }
            new.clone()
        }
        None => new.clone(),
    };
    Ok(combined.round(tol, max_rank))
}

/// Diagnostics for one `(iteration, step)` of training.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct StepRecord {
    pub iteration: usize,
    pub step: usize,
    /// Mean squared continuity residual of the ALS fit.
    pub loss: f64,
    /// ESS of `p_{t_k} / q` after transport, before any resampling.
    pub ess: f64,
    pub c_t: f64,
    pub max_rank: usize,
    pub sweeps: usize,
    /// Training points outside the basis interval.
    pub outside: usize,
    /// Trajectories frozen at the safety box.
    pub frozen: usize,
}

/// A trained flow with its training diagnostics.
#[derive(Debug, Clone)]
pub struct FlowModel {
    pub checkpoint: Checkpoint,
    pub method: Method,
    pub history: Vec<StepRecord>,
    /// Validation energy distance after each outer iteration, when enabled.
    pub validation: Vec<f64>,
    pub iterations_run: usize,
}

fn check_model(model: &Checkpoint, cfg: &RunConfig, dim: usize) -> Result<()> {
    let (lo, hi) = model.basis.interval();
    if model.dim() != dim
        || model.steps() != cfg.steps
        || model.basis.size() != cfg.basis_size
        || (lo, hi) != cfg.domain
    {
        return Err(Error::InvalidArgument(format!(
            "checkpoint (d={}, M={}, n={}, domain=[{lo}, {hi}]) does not match config (d={}, M={}, n={}, domain=[{}, {}])",
            model.dim(),
            model.steps(),
            model.basis.size(),
            dim,
            cfg.steps,
            cfg.basis_size,
            cfg.domain.0,
            cfg.domain.1
        )));
    }
    Ok(())
}

/// A Gaussian latent and the linear energy path from it to a target.
#[derive(Debug, Clone)]
pub struct Problem {
    latent: Gaussian,
    path: EnergyPath,
}

impl Problem {
    pub fn new(latent: Gaussian, target: Arc<dyn Energy>) -> Result<Self> {
        let path = EnergyPath::new(Arc::new(latent.clone()), target)?;
        Ok(Self { latent, path })
    }

    /// Latent and target named by `cfg`.
    pub fn from_config(cfg: &RunConfig) -> Result<Self> {
        Self::new(cfg.latent(), cfg.target.energy()?)
    }

    pub fn latent(&self) -> &Gaussian {
        &self.latent
    }

    pub fn path(&self) -> &EnergyPath {
        &self.path
    }

    pub fn dim(&self) -> usize {
        self.path.dim()
    }
}

fn latent_ensemble(problem: &Problem, count: usize, streams: &Streams) -> Result<ParticleEnsemble> {
    let points = problem.latent.sample(count, &mut streams.derive(&[LATENT]).master());
    ParticleEnsemble::from_energy(points, &problem.latent)
}

/// Resampling towards `f_t` followed by Langevin steps targeting `f_t`.
///
/// After a resampling the log-density is re-evaluated at the moved points.
fn stochastic_round(
    ens: &mut ParticleEnsemble,
    path: &EnergyPath,
    t: f64,
    cfg: &RunConfig,
    streams: &Streams,
) -> Result<f64> {
    let at = path.at(t)?;
    let h = cfg.langevin_step_size();
    if cfg.langevin_pre {
        langevin_step(ens, &at, h, cfg.langevin_steps, &streams.derive(&[LANGEVIN_PRE]))?;
    }
    let report = resampling_step(
        ens,
        &|x: &[f64]| -at.value(x),
        cfg.resample_scheme,
        cfg.ess_floor,
        &mut streams.derive(&[RESAMPLE]).master(),
    )?;
    langevin_step(ens, &at, h, cfg.langevin_steps, &streams.derive(&[LANGEVIN]))?;
    if report.resampled {
        ens.reset_log_density(&at);
    }
    Ok(report.ess)
}

fn ess_against(ens: &ParticleEnsemble, energy: &dyn Energy) -> f64 {
    effective_sample_size(&log_weights(ens, &|x: &[f64]| -energy.value(x)))
}

fn safety(cfg: &RunConfig) -> SafetyBox {
    SafetyBox::around(cfg.domain.0, cfg.domain.1, cfg.ode_safety)
}

/// Runs the outer loop of the training algorithm on the configured target.
pub fn train(cfg: &RunConfig) -> Result<FlowModel> {
    let truth = cfg.target.sampler()?;
    train_on(cfg, &Problem::from_config(cfg)?, Some(truth.as_ref()))
}

/// [`train`] on an explicit problem; `truth` is only used for validation-based early stopping.
///
/// The target and latent keys of `cfg` are ignored.
pub fn train_on(cfg: &RunConfig, problem: &Problem, truth: Option<&dyn GroundTruthSampler>) -> Result<FlowModel> {
    cfg.validate()?;
    let (path, d) = (problem.path(), problem.dim());
    let schedule = Schedule::new(cfg.steps)?;
    let basis = BasisSet::fourier_h2(cfg.domain.0, cfg.domain.1, cfg.basis_size)?;
    let root = Streams::new(cfg.seed).derive(&[TRAIN]);

    let mut fields: Vec<Option<TensorTrain>> = vec![None; schedule.steps()];
    let mut c_t = vec![0.0; schedule.steps()];
    let mut history = Vec::new();
    let mut validation: Vec<f64> = Vec::new();
    let mut iterations_run = 0;
    let init_rank = cfg.init_rank.min(cfg.max_rank).min(cfg.basis_size);

    for it in 0..cfg.iterations {
        let it_streams = root.derive(&[it as u64]);
        let mut ens = latent_ensemble(problem, cfg.samples, &it_streams)?;
        for k in 1..=schedule.steps() {
            let step_streams = it_streams.derive(&[k as u64]);
            let wrap = |e: Error| Error::Step {
                iteration: it,
                step: k,
                source: Box::new(e),
            };
            let (t0, t1) = schedule.interval(k);
            let t_fit = match cfg.path_time {
                PathTime::Left => t0,
                PathTime::Mid => 0.5 * (t0 + t1),
            };
            let batch = TrainingBatch::from_path(ens.points().clone(), path, t_fit, &basis).map_err(wrap)?;
            let init = match &fields[k - 1] {
                Some(tt) => tt.clone(),
                None => TensorTrain::random(
                    d,
                    &vec![cfg.basis_size; d],
                    &vec![init_rank; d - 1],
                    cfg.init_scale,
                    &mut step_streams.derive(&[INIT]).master(),
                )
                .map_err(wrap)?,
            };
            let fit = als_fit(&batch, &basis, &init, &cfg.als).map_err(wrap)?;
            let updated =
                update_tt(fields[k - 1].as_ref(), &fit.tt, cfg.ema_alpha, cfg.round_tol, cfg.max_rank).map_err(wrap)?;
            let field = FttVectorField::new(updated, basis.clone()).map_err(wrap)?;
            let report = ode_solve(&mut ens, &field, t0, t1, cfg.ode_substeps, Some(safety(cfg))).map_err(wrap)?;
            let at = path.at(t1).map_err(wrap)?;
            let ess = ess_against(&ens, &at);
            if cfg.method.stochastic_training() {
                stochastic_round(&mut ens, path, t1, cfg, &step_streams).map_err(wrap)?;
            }
            let record = StepRecord {
                iteration: it,
                step: k,
                loss: fit.residual_sq / batch.len() as f64,
                ess,
                c_t: fit.c_t,
                max_rank: field.tt().max_rank(),
                sweeps: fit.sweeps,
                outside: batch.outside_count(),
                frozen: report.frozen,
            };
            debug!(
                "iteration {it} step {k}: loss {:.3e}, ESS {:.1}, C_t {:.4}, rank {}",
                record.loss, record.ess, record.c_t, record.max_rank
            );
            history.push(record);
            c_t[k - 1] = fit.c_t;
            fields[k - 1] = Some(field.into_tt());
        }
        iterations_run = it + 1;
        info!(
            "iteration {it} done: mean loss {:.3e}",
            history[history.len() - schedule.steps()..].iter().map(|r| r.loss).sum::<f64>() / schedule.steps() as f64
        );

        if let (Some(truth), true) = (truth, cfg.validation_count >= 2) {
            let ckpt = checkpoint_from(&basis, &fields, &c_t)?;
            let vs = Streams::new(cfg.seed).derive(&[VALIDATE, it as u64]);
            let (xs, _) = run_sampler(Some(&ckpt), cfg, problem, cfg.method, cfg.validation_count, &vs)?;
            let ys = truth.draw(cfg.validation_count, &mut vs.derive(&[REFERENCE]).master());
            let ed = energy_distance(&xs, &ys)?;
            info!("iteration {it}: validation energy distance {ed:.3e}");
            let stop = validation.last().is_some_and(|&prev| prev - ed < 0.01 * prev);
            validation.push(ed);
            if stop {
                break;
            }
        }
    }

    Ok(FlowModel {
        checkpoint: checkpoint_from(&basis, &fields, &c_t)?,
        method: cfg.method,
        history,
        validation,
        iterations_run,
    })
}

fn checkpoint_from(basis: &BasisSet, fields: &[Option<TensorTrain>], c_t: &[f64]) -> Result<Checkpoint> {
    let fields = fields
        .iter()
        .map(|f| FttVectorField::new(f.clone().expect("all steps trained"), basis.clone()))
        .collect::<Result<Vec<_>>>()?;
    Checkpoint::new(basis.clone(), fields, c_t.to_vec())
}

/// Per-run diagnostics of [`sample`].
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct SampleInfo {
    /// ESS before each resampling step.
    pub ess: Vec<f64>,
    pub frozen: usize,
}

/// Draws `count` points with the given variant.
///
/// `model` may be `None` only for [`Method::Stochastic`].
pub fn sample(
    model: Option<&Checkpoint>,
    cfg: &RunConfig,
    variant: Method,
    count: usize,
    seed: u64,
) -> Result<(Points, SampleInfo)> {
    sample_on(model, cfg, &Problem::from_config(cfg)?, variant, count, seed)
}

/// [`sample`] for an explicit problem.
pub fn sample_on(
    model: Option<&Checkpoint>,
    cfg: &RunConfig,
    problem: &Problem,
    variant: Method,
    count: usize,
    seed: u64,
) -> Result<(Points, SampleInfo)> {
    run_sampler(model, cfg, problem, variant, count, &Streams::new(seed).derive(&[SAMPLE]))
}

fn run_sampler(
    model: Option<&Checkpoint>,
    cfg: &RunConfig,
    problem: &Problem,
    variant: Method,
    count: usize,
    streams: &Streams,
) -> Result<(Points, SampleInfo)> {
    cfg.validate()?;
    if let Some(m) = model {
        check_model(m, cfg, problem.dim())?;
    }
    let fields = match (variant.uses_fields(), model) {
        (true, Some(m)) => Some(&m.fields),
        (true, None) => return Err(Error::InvalidArgument(format!("variant `{variant}` needs a trained checkpoint"))),
        (false, _) => None,
    };
    let mut info = SampleInfo::default();
    if count == 0 {
        return Ok((Points::zeros(0, problem.dim()), info));
    }
    let path = problem.path();
    let schedule = Schedule::new(cfg.steps)?;
    let mut ens = latent_ensemble(problem, count, streams)?;
    for k in 1..=schedule.steps() {
        let (t0, t1) = schedule.interval(k);
        let wrap = |e: Error| Error::Step {
            iteration: 0,
            step: k,
            source: Box::new(e),
        };
        if let Some(fields) = fields {
            let report = ode_solve(&mut ens, &fields[k - 1], t0, t1, cfg.ode_substeps, Some(safety(cfg))).map_err(wrap)?;
            info.frozen += report.frozen;
        }
        if matches!(variant, Method::FlowPlusStochastic | Method::Stochastic) {
            let ess = stochastic_round(&mut ens, path, t1, cfg, &streams.derive(&[k as u64])).map_err(wrap)?;
            info.ess.push(ess);
        }
    }
    if variant == Method::FlowPlus {
        let ess = stochastic_round(&mut ens, path, 1.0, cfg, &streams.derive(&[FINAL])).map_err(|e| Error::Step {
            iteration: 0,
            step: schedule.steps(),
            source: Box::new(e),
        })?;
        info.ess.push(ess);
    }
    Ok((ens.into_points(), info))
}
