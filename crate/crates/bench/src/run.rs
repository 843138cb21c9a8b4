//! Per-seed experiment runners and the seed worker pool.

use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use fekan_core::model::FekanModel;
use fekan_core::ntk::{acr, mid_spectrum_ratio, ntk_drift, Spectrum};
use fekan_core::physics::allen_cahn::{self, Reference};
use fekan_core::physics::{
    eval_grid, linspace, lorenz_trajectory, sample_collocation, Counts, HighFreq, LorenzParams, LorenzPi, PdeProblem,
};
use fekan_core::separable::{AxisGrid, SeparableModel, SeparablePinn};
use fekan_core::train::{
    eval_rel_l2, fit, mse_loss_grad, phase_schedule, train_lorenz_onestep, train_lorenz_pi, train_phases, train_pinn,
    train_regression, train_separable, Adam, RunOutcome, Trainable,
};
use fekan_core::physics::LossTerms;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::preset::{Experiment, ProblemName, RunConfig};
use crate::BenchError;

/// Interval of the function-fitting target.
pub const FIT_INTERVAL: (f64, f64) = (0.0, 0.02);

/// Per-seed NTK diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtkReport {
    pub seed: u64,
    pub taus: Vec<usize>,
    pub acr: Vec<f64>,
    /// `λ_{N/2} / λ_1` per checkpoint.
    pub mid_ratio: Vec<f64>,
    pub distance_to_final: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SeedResult {
    pub seed: u64,
    pub params: usize,
    pub outcome: RunOutcome,
    /// Per-face boundary MSE after each phase (forgetting runs).
    pub face_mse: Option<Vec<Vec<f64>>>,
    pub ntk: Option<(NtkReport, Vec<Spectrum>)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunResult {
    /// The configuration as run, after overrides.
    pub config: RunConfig,
    pub seeds: Vec<SeedResult>,
}

/// File name of the stored reference for `problem`.
pub fn reference_file(problem: ProblemName) -> String {
    format!("reference_{}.csv", problem.slug())
}

/// Spectral reference used for Allen–Cahn evaluation.
pub fn allen_cahn_reference() -> Result<Reference, BenchError> {
    let p = fekan_core::physics::allen_cahn();
    let (eps, gamma) = match p.operator {
        fekan_core::physics::Operator::AllenCahn { eps, gamma } => (eps, gamma),
        _ => unreachable!("allen_cahn() is an Allen–Cahn problem"),
    };
    Ok(allen_cahn::solve(eps, gamma, 512, 2.5e-4, 1.0, 201)?)
}

/// Runs every seed of `cfg`, spreading seeds over the available cores.
/// `out_root` is where shared inputs such as reference files live.
pub fn run_config(cfg: &RunConfig, out_root: &Path) -> Result<RunResult, BenchError> {
    cfg.validate()?;
    let workers = std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1).min(cfg.seeds.len());
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<Result<SeedResult, BenchError>>>> = cfg.seeds.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= cfg.seeds.len() {
                    break;
                }
                let r = run_seed(cfg, cfg.seeds[i], out_root);
                *slots[i].lock().expect("slot lock") = Some(r);
            });
        }
    });
    let seeds = slots
        .into_iter()
        .map(|m| m.into_inner().expect("slot lock").expect("every seed ran"))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(RunResult {
        config: cfg.clone(),
        seeds,
    })
}

pub fn run_seed(cfg: &RunConfig, seed: u64, out_root: &Path) -> Result<SeedResult, BenchError> {
    match cfg.experiment {
        Experiment::FitFunction => fit_function(cfg, seed),
        Experiment::Ntk => ntk_run(cfg, seed),
        Experiment::LorenzMap => lorenz_map(cfg, seed),
        Experiment::SolvePde => solve_pde(cfg, seed, out_root),
        Experiment::SolveSeparable => solve_separable(cfg, seed),
        Experiment::LorenzPi => lorenz_pi_run(cfg, seed),
        Experiment::Forgetting => forgetting(cfg, seed),
    }
}

fn plain(outcome: RunOutcome, params: usize, seed: u64) -> SeedResult {
    SeedResult {
        seed,
        params,
        outcome,
        face_mse: None,
        ntk: None,
    }
}

/// Training grid and held-out midpoints on the fitting interval.
pub fn fit_data(n_train: usize, n_eval: usize) -> (Vec<Vec<f64>>, Vec<f64>, Vec<Vec<f64>>, Vec<f64>) {
    let f = HighFreq::default();
    let (lo, hi) = FIT_INTERVAL;
    let pts: Vec<Vec<f64>> = linspace(lo, hi, n_train).into_iter().map(|x| vec![x]).collect();
    let ys = pts.iter().map(|x| f.eval(x[0])).collect();
    let ep: Vec<Vec<f64>> = (0..n_eval).map(|i| vec![lo + (hi - lo) * (i as f64 + 0.5) / n_eval as f64]).collect();
    let ey = ep.iter().map(|x| f.eval(x[0])).collect();
    (pts, ys, ep, ey)
}

fn fit_model(cfg: &RunConfig, seed: u64) -> Result<FekanModel, BenchError> {
    let map = cfg.model.map.build(&[FIT_INTERVAL], seed)?;
    Ok(FekanModel::init(&cfg.model.widths, cfg.model.basis, map, seed)?)
}

fn fit_function(cfg: &RunConfig, seed: u64) -> Result<SeedResult, BenchError> {
    let (pts, ys, ep, ey) = fit_data(cfg.data.n_train, cfg.data.n_eval);
    let mut m = fit_model(cfg, seed)?;
    let out = train_regression(&mut m, &pts, &ys, Some((&ep, &ey)), &cfg.train)?;
    Ok(plain(out, m.param_count(), seed))
}

fn ntk_run(cfg: &RunConfig, seed: u64) -> Result<SeedResult, BenchError> {
    let spec = cfg.ntk.as_ref().ok_or_else(|| BenchError::Config("missing ntk settings".into()))?;
    let (pts, ys, ep, ey) = fit_data(cfg.data.n_train, cfg.data.n_eval);
    let mut m = fit_model(cfg, seed)?;
    let e = cfg.train.epochs;
    let mut taus: Vec<usize> = spec.checkpoints.iter().map(|f| (f * e as f64).round() as usize).collect();
    taus.sort_unstable();
    taus.dedup();
    let mut snaps: Vec<(usize, FekanModel)> = Vec::new();
    let mut ws = m.workspace(0);
    let mut adam = Adam::new(m.param_count(), cfg.train.lr);
    let mut calls = 0usize;
    let out = fit(
        &mut m,
        &cfg.train,
        &mut adam,
        |model, g| {
            // the n-th call sees the model after n updates
            if taus.contains(&calls) && snaps.last().is_none_or(|s| s.0 != calls) {
                snaps.push((calls, model.clone()));
            }
            calls += 1;
            let loss = mse_loss_grad(model, &mut ws, &pts, &ys, g);
            LossTerms {
                loss,
                l_res: loss,
                l_bc: 0.0,
                l_ic: 0.0,
            }
        },
        |model| eval_rel_l2(model, &ep, &ey),
    )?;
    let (lo, hi) = crate::run::FIT_INTERVAL;
    let probe: Vec<Vec<f64>> = (0..spec.points)
        .map(|i| vec![lo + (hi - lo) * (i as f64 + 0.5) / spec.points as f64])
        .collect();
    let drift = ntk_drift(&snaps, &probe)?;
    let report = NtkReport {
        seed,
        taus: drift.spectra.iter().map(|s| s.tau).collect(),
        acr: drift.spectra.iter().map(acr).collect::<Result<_, _>>()?,
        mid_ratio: drift.spectra.iter().map(mid_spectrum_ratio).collect(),
        distance_to_final: drift.distance_to_final.clone(),
    };
    Ok(SeedResult {
        seed,
        params: m.param_count(),
        outcome: out,
        face_mse: None,
        ntk: Some((report, drift.spectra)),
    })
}

/// Bounds used to scale Lorenz states to `[-1, 1]`.
pub const LORENZ_BOX: [(f64, f64); 3] = [(-25.0, 25.0), (-35.0, 35.0), (0.0, 60.0)];
pub const LORENZ_DT: f64 = 0.01;

fn scale_state(s: &[f64]) -> Vec<f64> {
    s.iter().zip(LORENZ_BOX).map(|(v, (lo, hi))| 2.0 * (v - lo) / (hi - lo) - 1.0).collect()
}

/// `n` scaled trajectories of `steps` steps from random initial states,
/// followed by one held-out trajectory.
pub fn lorenz_data(n: usize, steps: usize, seed: u64) -> Result<(Vec<Vec<Vec<f64>>>, Vec<Vec<f64>>), BenchError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let p = LorenzParams::default();
    let mut draw = || -> Result<Vec<Vec<f64>>, BenchError> {
        let s0 = [rng.random_range(-15.0..15.0), rng.random_range(-20.0..20.0), rng.random_range(5.0..40.0)];
        Ok(lorenz_trajectory(&p, s0, LORENZ_DT, steps)?.iter().map(|s| scale_state(s)).collect())
    };
    let train = (0..n).map(|_| draw()).collect::<Result<Vec<_>, _>>()?;
    let held = draw()?;
    Ok((train, held))
}

fn lorenz_map(cfg: &RunConfig, seed: u64) -> Result<SeedResult, BenchError> {
    let (train, held) = lorenz_data(cfg.data.n_train, cfg.data.n_eval, seed)?;
    let map = cfg.model.map.build(&[(-1.0, 1.0); 3], seed)?;
    let mut m = FekanModel::init(&cfg.model.widths, cfg.model.basis, map, seed)?;
    let out = train_lorenz_onestep(&mut m, &train, Some(&held), &cfg.train)?;
    Ok(plain(out, m.param_count(), seed))
}

fn problem_of(cfg: &RunConfig) -> Result<(ProblemName, PdeProblem), BenchError> {
    let name = cfg.problem.ok_or_else(|| BenchError::Config(format!("{}: missing problem", cfg.name)))?;
    let counts = Counts {
        n_res: cfg.data.n_res,
        n_bc: cfg.data.n_bc,
        n_ic: cfg.data.n_ic,
    };
    Ok((name, name.problem().with_counts(counts)))
}

/// Evaluation points and exact values: the closed form on a tensor grid
/// when there is one, otherwise the stored reference under `out_root`.
pub fn eval_set(
    name: ProblemName,
    problem: &PdeProblem,
    n_eval: usize,
    out_root: &Path,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), BenchError> {
    if name == ProblemName::AllenCahn {
        let path: PathBuf = out_root.join(reference_file(name));
        if !path.exists() {
            return Err(BenchError::MissingReference {
                path,
                hint: "create it with `fekan make-reference --problem allen-cahn` (same output root)".into(),
            });
        }
        let r = Reference::read_csv(&path)?;
        return Ok(r.sample(4, 2));
    }
    let pts = eval_grid(&problem.bounds, n_eval);
    let exact = pts
        .iter()
        .map(|p| problem.operator.exact(p))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| BenchError::Config(format!("{} has no closed-form solution", problem.name)))?;
    Ok((pts, exact))
}

fn solve_pde(cfg: &RunConfig, seed: u64, out_root: &Path) -> Result<SeedResult, BenchError> {
    let (name, problem) = problem_of(cfg)?;
    let (ep, ey) = eval_set(name, &problem, cfg.data.n_eval, out_root)?;
    let batches = sample_collocation(&problem, seed);
    let map = cfg.model.map.build(&problem.bounds, seed)?;
    let mut m = FekanModel::init(&cfg.model.widths, cfg.model.basis, map, seed)?;
    let out = train_pinn(&mut m, &problem, &batches, Some((&ep, &ey)), &cfg.train)?;
    Ok(plain(out, m.param_count(), seed))
}

fn solve_separable(cfg: &RunConfig, seed: u64) -> Result<SeedResult, BenchError> {
    let (_, problem) = problem_of(cfg)?;
    let maps = problem
        .bounds
        .iter()
        .map(|&b| cfg.model.map.build(&[b], seed))
        .collect::<Result<Vec<_>, _>>()?;
    let w = &cfg.model.widths;
    let rank = *w.last().expect("validated widths");
    let mut m = SeparableModel::init(maps, &w[1..w.len() - 1], rank, cfg.model.basis, seed)?;
    let pinn = SeparablePinn::sample(&problem, cfg.data.n_res, cfg.data.n_bc, seed)?;
    let grid = AxisGrid::new(problem.bounds.iter().map(|&(lo, hi)| linspace(lo, hi, cfg.data.n_eval)).collect())?;
    let exact = grid
        .points()
        .iter()
        .map(|p| problem.operator.exact(p))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(|| BenchError::Config(format!("{} has no closed-form solution", problem.name)))?;
    let out = train_separable(&mut m, &pinn, Some((&grid, &exact)), &cfg.train)?;
    Ok(plain(out, m.param_len(), seed))
}

/// Concatenates consecutive runs into one record stream with cumulative
/// epochs; the last run's final metric is kept.
pub fn concat_runs(runs: &[RunOutcome]) -> RunOutcome {
    let mut records = Vec::new();
    let mut offset = 0;
    let mut diverged_at = None;
    let mut time = 0.0;
    for r in runs {
        records.extend(r.records.iter().map(|rec| {
            let mut rec = *rec;
            rec.epoch += offset;
            rec
        }));
        if diverged_at.is_none() {
            diverged_at = r.diverged_at.map(|e| e + offset);
        }
        time += r.sec_per_iter * r.epochs_run as f64;
        offset += r.epochs_run;
    }
    RunOutcome {
        records,
        diverged_at,
        epochs_run: offset,
        sec_per_iter: if offset == 0 { 0.0 } else { time / offset as f64 },
    }
}

fn lorenz_pi_run(cfg: &RunConfig, seed: u64) -> Result<SeedResult, BenchError> {
    let lp = LorenzPi {
        n_res: cfg.data.n_res,
        ..LorenzPi::default()
    };
    let n = cfg.data.n_eval.max(2);
    let dt = lp.t_end / (n - 1) as f64;
    let reference = lp.reference(dt)?;
    let map = cfg.model.map.build(&[(0.0, lp.window)], seed)?;
    let mut m = FekanModel::init(&cfg.model.widths, cfg.model.basis, map, seed)?;
    let out = train_lorenz_pi(&mut m, &lp, Some((dt, &reference)), &cfg.train, seed)?;
    let mut merged = concat_runs(&out.runs);
    if let Some(last) = merged.records.last_mut() {
        last.rel_l2 = out.rel_l2;
    }
    Ok(plain(merged, m.param_count(), seed))
}

fn forgetting(cfg: &RunConfig, seed: u64) -> Result<SeedResult, BenchError> {
    let (name, problem) = problem_of(cfg)?;
    let (ep, ey) = eval_set(name, &problem, cfg.data.n_eval, Path::new("."))?;
    let batches = sample_collocation(&problem, seed);
    let schedule = phase_schedule(&problem, &batches, 4, seed)?;
    let map = cfg.model.map.build(&problem.bounds, seed)?;
    let mut m = FekanModel::init(&cfg.model.widths, cfg.model.basis, map, seed)?;
    let phases = cfg.phases.clone().ok_or_else(|| BenchError::Config("missing phases".into()))?;
    let out = train_phases(&mut m, &problem, &batches, &schedule, &phases, &cfg.train, Some((&ep, &ey)))?;
    Ok(SeedResult {
        seed,
        params: m.param_count(),
        outcome: concat_runs(&out.runs),
        face_mse: Some(out.face_mse),
        ntk: None,
    })
}
