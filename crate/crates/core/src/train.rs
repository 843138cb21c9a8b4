//! Adam, full-batch training loops, the phase-wise boundary schedule and
//! multi-seed aggregation.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::FekanModel;
use crate::physics::{relative_l2, Batches, CondSample, LorenzPi, LossTerms, PdeProblem, PinnEvaluator};
use crate::separable::{AxisGrid, SeparableModel, SeparablePinn};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("parameter and gradient lengths differ: {params} vs {grads}")]
    Shape { params: usize, grads: usize },
    #[error("training diverged at epoch {epoch}")]
    Diverged { epoch: usize },
    #[error("need at least one seed")]
    NoSeeds,
    #[error("schedule needs a rectangular domain with {want} faces, problem has {got}")]
    Faces { got: usize, want: usize },
    #[error("{0}")]
    Invalid(String),
}

/// Losses at or above this are treated as divergence.
pub const DIVERGENCE_LOSS: f64 = 1e12;

/// Bias-corrected Adam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub step: u64,
    m: Vec<f64>,
    v: Vec<f64>,
}

impl Adam {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            step: 0,
            m: vec![0.0; n],
            v: vec![0.0; n],
        }
    }

    /// One update. Non-finite gradients leave the parameters untouched and
    /// report a divergence at the current step.
    pub fn update(&mut self, params: &mut [f64], grads: &[f64]) -> Result<(), TrainError> {
        self.update_chunks(vec![params], grads)
    }

    /// As [`Adam::update`] for parameters split over consecutive chunks.
    pub fn update_chunks(&mut self, mut chunks: Vec<&mut [f64]>, grads: &[f64]) -> Result<(), TrainError> {
        let len: usize = chunks.iter().map(|c| c.len()).sum();
        if len != grads.len() || len != self.m.len() {
            return Err(TrainError::Shape {
                params: len,
                grads: grads.len(),
            });
        }
        if grads.iter().any(|g| !g.is_finite()) {
            return Err(TrainError::Diverged {
                epoch: self.step as usize,
            });
        }
        self.step += 1;
        let t = self.step as i32;
        let c1 = 1.0 - self.beta1.powi(t);
        let c2 = 1.0 - self.beta2.powi(t);
        let mut i = 0;
        for chunk in chunks.iter_mut() {
            for p in chunk.iter_mut() {
                let g = grads[i];
                self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
                self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
                let mh = self.m[i] / c1;
                let vh = self.v[i] / c2;
                *p -= self.lr * mh / (vh.sqrt() + self.eps);
                i += 1;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DivergencePolicy {
    /// Return [`TrainError::Diverged`].
    Halt,
    /// Stop training and mark the run as diverged.
    #[default]
    Record,
}

/// Stop when the training loss has not improved by a relative `min_delta`
/// for `patience` epochs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EarlyStop {
    pub patience: usize,
    pub min_delta: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub epochs: usize,
    #[serde(default = "default_lr")]
    pub lr: f64,
    #[serde(default = "default_log_every")]
    pub log_every: usize,
    #[serde(default)]
    pub early_stop: Option<EarlyStop>,
    #[serde(default)]
    pub divergence: DivergencePolicy,
}

fn default_lr() -> f64 {
    1e-3
}

fn default_log_every() -> usize {
    1000
}

impl TrainConfig {
    pub fn new(epochs: usize) -> Self {
        Self {
            epochs,
            lr: default_lr(),
            log_every: default_log_every(),
            early_stop: None,
            divergence: DivergencePolicy::Record,
        }
    }

    pub fn with_lr(mut self, lr: f64) -> Self {
        self.lr = lr;
        self
    }

    pub fn log_every(mut self, n: usize) -> Self {
        self.log_every = n.max(1);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainRecord {
    pub epoch: usize,
    pub loss: f64,
    pub l_res: f64,
    pub l_bc: f64,
    pub l_ic: f64,
    pub rel_l2: Option<f64>,
    pub sec_per_iter: f64,
    pub diverged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunOutcome {
    pub records: Vec<TrainRecord>,
    pub diverged_at: Option<usize>,
    pub epochs_run: usize,
    pub sec_per_iter: f64,
}

impl RunOutcome {
    pub fn final_record(&self) -> Option<&TrainRecord> {
        self.records.last()
    }

    /// Final relative L2 error of a completed run.
    pub fn final_rel_l2(&self) -> Option<f64> {
        if self.diverged_at.is_some() {
            return None;
        }
        self.final_record().and_then(|r| r.rel_l2)
    }
}

/// Parameter access for anything the loop can optimize.
pub trait Trainable {
    fn param_len(&self) -> usize;
    /// Parameters as consecutive chunks, in gradient order.
    fn param_chunks_mut(&mut self) -> Vec<&mut [f64]>;
}

impl Trainable for FekanModel {
    fn param_len(&self) -> usize {
        self.params.len()
    }

    fn param_chunks_mut(&mut self) -> Vec<&mut [f64]> {
        vec![&mut self.params]
    }
}

fn is_diverged(t: &LossTerms) -> bool {
    !t.loss.is_finite() || t.loss >= DIVERGENCE_LOSS
}

/// Generic full-batch Adam loop. `loss_grad` writes the gradient of the
/// loss at the model's parameters; `metric` is evaluated at log epochs.
pub fn fit<M: Trainable>(
    model: &mut M,
    cfg: &TrainConfig,
    adam: &mut Adam,
    mut loss_grad: impl FnMut(&M, &mut [f64]) -> LossTerms,
    mut metric: impl FnMut(&M) -> Option<f64>,
) -> Result<RunOutcome, TrainError> {
    let n = model.param_len();
    let mut grads = vec![0.0; n];
    let mut records = Vec::new();
    let log_every = cfg.log_every.max(1);
    let mut best = f64::INFINITY;
    let mut since_best = 0usize;
    let mut elapsed = 0.0;
    let mut steps = 0usize;
    let mut diverged_at = None;
    let mut epoch = 0;
    let sec = |elapsed: f64, steps: usize| if steps == 0 { 0.0 } else { elapsed / steps as f64 };
    while epoch < cfg.epochs {
        let start = Instant::now();
        let terms = loss_grad(model, &mut grads);
        let mut diverged = is_diverged(&terms);
        if !diverged {
            match adam.update_chunks(model.param_chunks_mut(), &grads) {
                Ok(()) => {}
                Err(TrainError::Diverged { .. }) => diverged = true,
                Err(e) => return Err(e),
            }
        }
        elapsed += start.elapsed().as_secs_f64();
        if diverged {
            diverged_at = Some(epoch);
            records.push(TrainRecord {
                epoch,
                loss: terms.loss,
                l_res: terms.l_res,
                l_bc: terms.l_bc,
                l_ic: terms.l_ic,
                rel_l2: None,
                sec_per_iter: sec(elapsed, steps.max(1)),
                diverged: true,
            });
            if cfg.divergence == DivergencePolicy::Halt {
                return Err(TrainError::Diverged { epoch });
            }
            break;
        }
        steps += 1;
        if epoch % log_every == 0 {
            records.push(TrainRecord {
                epoch,
                loss: terms.loss,
                l_res: terms.l_res,
                l_bc: terms.l_bc,
                l_ic: terms.l_ic,
                rel_l2: metric(model),
                sec_per_iter: sec(elapsed, steps),
                diverged: false,
            });
        }
        epoch += 1;
        if let Some(es) = cfg.early_stop {
            if terms.loss < best * (1.0 - es.min_delta) {
                best = terms.loss;
                since_best = 0;
            } else {
                since_best += 1;
                if since_best >= es.patience {
                    break;
                }
            }
        }
    }
    if diverged_at.is_none() {
        let terms = loss_grad(model, &mut grads);
        if is_diverged(&terms) {
            diverged_at = Some(epoch);
            if cfg.divergence == DivergencePolicy::Halt {
                return Err(TrainError::Diverged { epoch });
            }
        }
        records.push(TrainRecord {
            epoch,
            loss: terms.loss,
            l_res: terms.l_res,
            l_bc: terms.l_bc,
            l_ic: terms.l_ic,
            rel_l2: if diverged_at.is_some() { None } else { metric(model) },
            sec_per_iter: sec(elapsed, steps),
            diverged: diverged_at.is_some(),
        });
    }
    Ok(RunOutcome {
        records,
        diverged_at,
        epochs_run: steps,
        sec_per_iter: sec(elapsed, steps),
    })
}

/// Mean-squared error of a scalar model on `(points, targets)` with its
/// gradient written into `grads`.
pub fn mse_loss_grad(model: &FekanModel, ws: &mut crate::model::Workspace, points: &[Vec<f64>], targets: &[f64], grads: &mut [f64]) -> f64 {
    grads.fill(0.0);
    let n = points.len() as f64;
    let mut total = 0.0;
    for (x, &y) in points.iter().zip(targets) {
        model.eval_ws(x, ws);
        let e = ws.out_value()[0] - y;
        total += e * e;
        model.backward_value_ws(ws, &[2.0 * e / n], grads);
    }
    total / n
}

/// Predictions of a scalar model at `points`.
pub fn predict(model: &FekanModel, points: &[Vec<f64>]) -> Vec<f64> {
    let mut ws = model.workspace(0);
    points
        .iter()
        .map(|x| {
            model.eval_ws(x, &mut ws);
            ws.out_value()[0]
        })
        .collect()
}

/// Relative L2 error of a scalar model on an evaluation set; `None` when
/// the prediction is not finite.
pub fn eval_rel_l2(model: &FekanModel, points: &[Vec<f64>], exact: &[f64]) -> Option<f64> {
    let p = predict(model, points);
    relative_l2(&p, exact).ok().filter(|v| v.is_finite())
}

/// Full-batch MSE regression on `(points, targets)`; the metric is the
/// relative L2 error on `eval` (or on the training set when `None`).
pub fn train_regression(
    model: &mut FekanModel,
    points: &[Vec<f64>],
    targets: &[f64],
    eval: Option<(&[Vec<f64>], &[f64])>,
    cfg: &TrainConfig,
) -> Result<RunOutcome, TrainError> {
    if points.len() != targets.len() {
        return Err(TrainError::Invalid(format!("{} points, {} targets", points.len(), targets.len())));
    }
    let mut ws = model.workspace(0);
    let mut adam = Adam::new(model.param_count(), cfg.lr);
    let (ep, ev) = eval.unwrap_or((points, targets));
    fit(
        model,
        cfg,
        &mut adam,
        |m, g| {
            let loss = mse_loss_grad(m, &mut ws, points, targets, g);
            LossTerms {
                loss,
                l_res: loss,
                l_bc: 0.0,
                l_ic: 0.0,
            }
        },
        |m| eval_rel_l2(m, ep, ev),
    )
}

/// Physics-informed training on a fixed collocation set.
pub fn train_pinn(
    model: &mut FekanModel,
    problem: &PdeProblem,
    batches: &Batches,
    eval: Option<(&[Vec<f64>], &[f64])>,
    cfg: &TrainConfig,
) -> Result<RunOutcome, TrainError> {
    let mut adam = Adam::new(model.param_count(), cfg.lr);
    train_pinn_with(model, problem, batches, eval, cfg, &mut adam)
}

/// As [`train_pinn`] with caller-owned optimizer state.
pub fn train_pinn_with(
    model: &mut FekanModel,
    problem: &PdeProblem,
    batches: &Batches,
    eval: Option<(&[Vec<f64>], &[f64])>,
    cfg: &TrainConfig,
    adam: &mut Adam,
) -> Result<RunOutcome, TrainError> {
    if model.in_dim() != problem.dim() {
        return Err(TrainError::Invalid(format!(
            "model takes {} inputs, problem has {}",
            model.in_dim(),
            problem.dim()
        )));
    }
    let mut ev = PinnEvaluator::new(model);
    fit(
        model,
        cfg,
        adam,
        |m, g| ev.loss(m, problem, batches, Some(g)),
        |m| eval.and_then(|(p, e)| eval_rel_l2(m, p, e)),
    )
}

/// Autoregressive rollout of a state-to-state model for `steps` steps.
pub fn rollout(model: &FekanModel, state0: &[f64], steps: usize) -> Vec<Vec<f64>> {
    let mut ws = model.workspace(0);
    let mut s = state0.to_vec();
    let mut out = Vec::with_capacity(steps + 1);
    out.push(s.clone());
    for _ in 0..steps {
        model.eval_ws(&s, &mut ws);
        s = ws.out_value().to_vec();
        out.push(s.clone());
    }
    out
}

/// Relative L2 error between a rollout from `traj[0]` and `traj`, over all
/// components.
pub fn rollout_rel_l2(model: &FekanModel, traj: &[Vec<f64>]) -> Option<f64> {
    let pred: Vec<f64> = rollout(model, &traj[0], traj.len() - 1).concat();
    let exact: Vec<f64> = traj.concat();
    relative_l2(&pred, &exact).ok().filter(|v| v.is_finite())
}

/// One-step map training: epoch `e` fits the consecutive pairs of
/// trajectory `e mod len`; the metric is the rollout error on `held_out`.
pub fn train_lorenz_onestep(
    model: &mut FekanModel,
    trajectories: &[Vec<Vec<f64>>],
    held_out: Option<&[Vec<f64>]>,
    cfg: &TrainConfig,
) -> Result<RunOutcome, TrainError> {
    if trajectories.is_empty() || trajectories.iter().any(|t| t.len() < 2) {
        return Err(TrainError::Invalid("need trajectories with at least two states".into()));
    }
    let out = model.out_dim();
    if model.in_dim() != out {
        return Err(TrainError::Invalid("one-step map needs equal input and output width".into()));
    }
    let mut ws = model.workspace(0);
    let mut adam = Adam::new(model.param_count(), cfg.lr);
    let mut epoch = 0usize;
    let mut up = vec![0.0; out];
    fit(
        model,
        cfg,
        &mut adam,
        |m, g| {
            g.fill(0.0);
            let traj = &trajectories[epoch % trajectories.len()];
            epoch += 1;
            let n = (traj.len() - 1) as f64;
            let mut total = 0.0;
            for pair in traj.windows(2) {
                m.eval_ws(&pair[0], &mut ws);
                for c in 0..out {
                    let e = ws.out_value()[c] - pair[1][c];
                    total += e * e;
                    up[c] = 2.0 * e / n;
                }
                m.backward_value_ws(&mut ws, &up, g);
            }
            let loss = total / n;
            LossTerms {
                loss,
                l_res: loss,
                l_bc: 0.0,
                l_ic: 0.0,
            }
        },
        |m| held_out.and_then(|t| rollout_rel_l2(m, t)),
    )
}

/// Separable physics-informed training; the metric is the relative L2
/// error of `forward_grid` on `eval`.
pub fn train_separable(
    model: &mut SeparableModel,
    pinn: &SeparablePinn,
    eval: Option<(&AxisGrid, &[f64])>,
    cfg: &TrainConfig,
) -> Result<RunOutcome, TrainError> {
    if model.dim() != pinn.problem.dim() {
        return Err(TrainError::Invalid(format!(
            "model has {} bodies, problem has {} coordinates",
            model.dim(),
            pinn.problem.dim()
        )));
    }
    let mut adam = Adam::new(model.param_count(), cfg.lr);
    fit(
        model,
        cfg,
        &mut adam,
        |m, g| {
            pinn.loss(m, Some(g)).unwrap_or(LossTerms {
                loss: f64::NAN,
                l_res: f64::NAN,
                l_bc: f64::NAN,
                l_ic: f64::NAN,
            })
        },
        |m| {
            let (grid, exact) = eval?;
            let pred = m.forward_grid(grid).ok()?;
            relative_l2(&pred, exact).ok().filter(|v| v.is_finite())
        },
    )
}

/// Result of window-by-window Lorenz training.
#[derive(Debug, Clone, PartialEq)]
pub struct LorenzPiOutcome {
    /// Snapshot of the model after each window; inputs are local times.
    pub windows: Vec<FekanModel>,
    pub runs: Vec<RunOutcome>,
    /// Relative L2 error of the stitched prediction against `reference`.
    pub rel_l2: Option<f64>,
}

impl LorenzPiOutcome {
    /// Stitched prediction at absolute time `t`.
    pub fn predict(&self, lp: &LorenzPi, t: f64) -> Vec<f64> {
        let last = self.windows.len().saturating_sub(1);
        let w = ((t / lp.window).floor().max(0.0) as usize).min(last);
        let (t0, _) = lp.window_bounds(w);
        self.windows[w].forward(&[t - t0]).unwrap_or_else(|_| vec![f64::NAN; 3])
    }
}

/// Trains a `t ↦ (x, y, z)` model on consecutive windows. Each window
/// starts from the previous window's parameters and uses the previous
/// window's predicted terminal state as its soft initial condition. The
/// model takes time relative to the window start.
pub fn train_lorenz_pi(
    model: &mut FekanModel,
    lp: &LorenzPi,
    reference: Option<(f64, &[Vec<f64>])>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<LorenzPiOutcome, TrainError> {
    if model.in_dim() != 1 || model.out_dim() != 3 {
        return Err(TrainError::Invalid("Lorenz model maps time to three states".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut ws = model.workspace(1);
    let mut s0 = lp.state0;
    let mut windows = Vec::new();
    let mut runs = Vec::new();
    for _ in 0..lp.windows() {
        let times: Vec<f64> = (0..lp.n_res).map(|_| rng.random_range(0.0..lp.window)).collect();
        let mut adam = Adam::new(model.param_count(), cfg.lr);
        let start = s0;
        let run = fit(
            model,
            cfg,
            &mut adam,
            |m, g| lp.window_loss(m, &mut ws, &times, 0.0, &start, Some(g)),
            |_| None,
        )?;
        let diverged = run.diverged_at.is_some();
        runs.push(run);
        windows.push(model.clone());
        if diverged {
            break;
        }
        let end = model.forward(&[lp.window]).map_err(|e| TrainError::Invalid(e.to_string()))?;
        s0 = [end[0], end[1], end[2]];
    }
    let mut out = LorenzPiOutcome {
        windows,
        runs,
        rel_l2: None,
    };
    if let Some((dt, traj)) = reference {
        if out.runs.iter().all(|r| r.diverged_at.is_none()) {
            let pred: Vec<f64> = (0..traj.len()).flat_map(|i| out.predict(lp, i as f64 * dt)).collect();
            out.rel_l2 = relative_l2(&pred, &traj.concat()).ok().filter(|v| v.is_finite());
        }
    }
    Ok(out)
}

/// Boundary conditions active in each phase of the sequential protocol.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseSchedule {
    /// `phases[p]` = every sample on face `p` plus one anchor per other face.
    pub phases: Vec<Vec<CondSample>>,
    /// All boundary samples grouped by face, for retention metrics.
    pub faces: Vec<Vec<CondSample>>,
}

/// Epoch budget of the four phases.
pub const PHASE_EPOCHS: [usize; 4] = [20_000, 20_000, 20_000, 45_000];

/// Splits the face-indexed boundary samples of `batches` into `phases`
/// phases. Face `p` (`2·dim + side`) is active in phase `p`; anchors are
/// drawn from the inactive faces with `seed`.
pub fn phase_schedule(problem: &PdeProblem, batches: &Batches, phases: usize, seed: u64) -> Result<PhaseSchedule, TrainError> {
    let nf = problem.faces();
    if nf != phases || problem.time_dim.is_some() {
        return Err(TrainError::Faces { got: nf, want: phases });
    }
    let mut faces = vec![Vec::new(); nf];
    for s in &batches.bc {
        match s.face {
            Some(f) if f < nf => faces[f].push(s.clone()),
            _ => return Err(TrainError::Invalid("boundary sample without face".into())),
        }
    }
    if faces.iter().any(|f| f.is_empty()) {
        return Err(TrainError::Invalid("every face needs boundary samples".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let anchors: Vec<CondSample> = faces.iter().map(|f| f[rng.random_range(0..f.len())].clone()).collect();
    let phases = (0..nf)
        .map(|p| {
            let mut set = faces[p].clone();
            set.extend((0..nf).filter(|&q| q != p).map(|q| anchors[q].clone()));
            set
        })
        .collect();
    Ok(PhaseSchedule { phases, faces })
}

/// Result of sequential phase training.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseOutcome {
    /// `face_mse[p][q]`: MSE on face `q` after phase `p`.
    pub face_mse: Vec<Vec<f64>>,
    pub runs: Vec<RunOutcome>,
}

/// Trains through the phases of `schedule`, carrying the optimizer state
/// across phases, and logs per-face boundary MSE after each phase.
pub fn train_phases(
    model: &mut FekanModel,
    problem: &PdeProblem,
    batches: &Batches,
    schedule: &PhaseSchedule,
    epochs: &[usize],
    cfg: &TrainConfig,
    eval: Option<(&[Vec<f64>], &[f64])>,
) -> Result<PhaseOutcome, TrainError> {
    if epochs.len() != schedule.phases.len() {
        return Err(TrainError::Invalid("one epoch budget per phase".into()));
    }
    let mut adam = Adam::new(model.param_count(), cfg.lr);
    let mut ev = PinnEvaluator::new(model);
    let mut face_mse = Vec::new();
    let mut runs = Vec::new();
    for (p, set) in schedule.phases.iter().enumerate() {
        let phase_batches = Batches {
            interior: batches.interior.clone(),
            bc: set.clone(),
            ic: Vec::new(),
        };
        let mut c = cfg.clone();
        c.epochs = epochs[p];
        let run = train_pinn_with(model, problem, &phase_batches, eval, &c, &mut adam)?;
        let diverged = run.diverged_at.is_some();
        runs.push(run);
        face_mse.push(
            schedule
                .faces
                .iter()
                .map(|f| ev.condition_loss(model, f, 0.0, None))
                .collect(),
        );
        if diverged {
            break;
        }
    }
    Ok(PhaseOutcome { face_mse, runs })
}

/// Aggregate over seeds. `std` is the population standard deviation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MultiSeed {
    pub seeds: Vec<u64>,
    pub mean: Option<f64>,
    pub std: Option<f64>,
    pub completed: usize,
    pub diverged: usize,
    pub per_seed: Vec<Option<f64>>,
    pub sec_per_iter: f64,
}

pub fn mean_std(values: &[f64]) -> Option<(f64, f64)> {
    if values.is_empty() {
        return None;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    Some((mean, var.sqrt()))
}

/// Summarizes per-seed outcomes by final relative L2 error.
pub fn summarize(seeds: &[u64], outcomes: &[RunOutcome]) -> MultiSeed {
    let per_seed: Vec<Option<f64>> = outcomes.iter().map(RunOutcome::final_rel_l2).collect();
    let done: Vec<f64> = per_seed.iter().flatten().copied().collect();
    let diverged = outcomes.iter().filter(|o| o.diverged_at.is_some()).count();
    let ms = mean_std(&done);
    let timed: Vec<f64> = outcomes.iter().map(|o| o.sec_per_iter).collect();
    MultiSeed {
        seeds: seeds.to_vec(),
        mean: ms.map(|m| m.0),
        std: ms.map(|m| m.1),
        completed: outcomes.len() - diverged,
        diverged,
        per_seed,
        sec_per_iter: mean_std(&timed).map(|m| m.0).unwrap_or(0.0),
    }
}

/// Runs `run` for every seed and summarizes.
pub fn run_multiseed(
    seeds: &[u64],
    mut run: impl FnMut(u64) -> Result<RunOutcome, TrainError>,
) -> Result<(MultiSeed, Vec<RunOutcome>), TrainError> {
    if seeds.is_empty() {
        return Err(TrainError::NoSeeds);
    }
    let outcomes = seeds.iter().map(|&s| run(s)).collect::<Result<Vec<_>, _>>()?;
    Ok((summarize(seeds, &outcomes), outcomes))
}

/// Mean and standard deviation of the logged loss across seeds, truncated
/// at the earliest divergence.
pub fn aggregate_curves(outcomes: &[RunOutcome]) -> Vec<(usize, f64, f64)> {
    let cut = outcomes.iter().filter_map(|o| o.diverged_at).min().unwrap_or(usize::MAX);
    let Some(first) = outcomes.first() else {
        return Vec::new();
    };
    first
        .records
        .iter()
        .filter(|r| r.epoch < cut && !r.diverged)
        .filter_map(|r| {
            let vals: Vec<f64> = outcomes
                .iter()
                .filter_map(|o| o.records.iter().find(|q| q.epoch == r.epoch && !q.diverged).map(|q| q.loss))
                .collect();
            (vals.len() == outcomes.len()).then(|| {
                let (m, s) = mean_std(&vals).expect("non-empty");
                (r.epoch, m, s)
            })
        })
        .collect()
}
