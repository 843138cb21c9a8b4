//! Run configurations and the built-in preset table.

use std::collections::BTreeMap;
use std::path::PathBuf;

use fekan_core::basis::{BasisKind, BasisSpec};
use fekan_core::enrich::{five_per_dim, nine_term_1d, seven_per_dim, FeatureMap};
use fekan_core::physics::{allen_cahn, helmholtz2d, helmholtz3d, klein_gordon, poisson1d, PdeProblem};
use fekan_core::train::{EarlyStop, TrainConfig, PHASE_EPOCHS};
use serde::{Deserialize, Serialize};

use crate::BenchError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    FitFunction,
    LorenzMap,
    SolvePde,
    SolveSeparable,
    LorenzPi,
    Forgetting,
    Ntk,
}

impl Experiment {
    pub fn command(self) -> &'static str {
        match self {
            Experiment::FitFunction => "fit-function",
            Experiment::LorenzMap => "lorenz-map",
            Experiment::SolvePde => "solve-pde",
            Experiment::SolveSeparable => "solve-separable",
            Experiment::LorenzPi => "lorenz-pi",
            Experiment::Forgetting => "forgetting",
            Experiment::Ntk => "ntk",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ProblemName {
    Poisson1d,
    Helmholtz2d,
    Helmholtz3d,
    AllenCahn,
    KleinGordon,
}

impl ProblemName {
    pub fn problem(self) -> PdeProblem {
        match self {
            ProblemName::Poisson1d => poisson1d(),
            ProblemName::Helmholtz2d => helmholtz2d(),
            ProblemName::Helmholtz3d => helmholtz3d(),
            ProblemName::AllenCahn => allen_cahn(),
            ProblemName::KleinGordon => klein_gordon(),
        }
    }

    pub fn slug(self) -> &'static str {
        match self {
            ProblemName::Poisson1d => "poisson1d",
            ProblemName::Helmholtz2d => "helmholtz2d",
            ProblemName::Helmholtz3d => "helmholtz3d",
            ProblemName::AllenCahn => "allen_cahn",
            ProblemName::KleinGordon => "klein_gordon",
        }
    }
}

/// Enrichment front end of a model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum MapKind {
    Identity,
    /// `[1, cos πy, sin πy, …, cos 4πy, sin 4πy]` on one coordinate.
    NineTerm,
    /// `{1, cos ky, sin ky}` for k = 1, 2, 3 on every coordinate.
    SevenPerDim,
    /// `{1, cos ky, sin ky}` for k = 1, 2 on every coordinate.
    FivePerDim,
    /// `m` random frequencies per coordinate drawn from `N(0, σ²)` with the run seed.
    Rff { sigma: f64, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MapSpec {
    #[serde(flatten)]
    pub kind: MapKind,
    /// Send each coordinate's bounds to `[-1, 1]` before the terms.
    #[serde(default)]
    pub normalize: bool,
}

impl MapSpec {
    pub fn identity() -> Self {
        Self {
            kind: MapKind::Identity,
            normalize: true,
        }
    }

    pub fn raw(kind: MapKind) -> Self {
        Self { kind, normalize: false }
    }

    pub fn normalized(kind: MapKind) -> Self {
        Self { kind, normalize: true }
    }

    pub fn is_identity(&self) -> bool {
        self.kind == MapKind::Identity
    }

    /// Builds the map for coordinates with the given bounds.
    pub fn build(&self, bounds: &[(f64, f64)], seed: u64) -> Result<FeatureMap, BenchError> {
        let d = bounds.len();
        let map = match self.kind {
            MapKind::Identity => FeatureMap::identity(d),
            MapKind::NineTerm if d == 1 => nine_term_1d(),
            MapKind::NineTerm => return Err(BenchError::Config("the nine-term map is one-dimensional".into())),
            MapKind::SevenPerDim => seven_per_dim(d),
            MapKind::FivePerDim => five_per_dim(d),
            MapKind::Rff { sigma, m } => FeatureMap::build_rff(sigma, m, d, &(0..d).collect::<Vec<_>>(), seed)?,
        };
        Ok(if self.normalize { map.normalizing(bounds)? } else { map })
    }

    /// Output width for `d` input coordinates.
    pub fn width(&self, d: usize) -> usize {
        match self.kind {
            MapKind::Identity => d,
            MapKind::NineTerm => 9,
            MapKind::SevenPerDim => 7 * d,
            MapKind::FivePerDim => 5 * d,
            MapKind::Rff { m, .. } => (2 * m + 1) * d,
        }
    }
}

/// Network shape. For separable runs `widths` describes one body network
/// and the rank is its output width.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub widths: Vec<usize>,
    pub basis: BasisSpec,
    pub map: MapSpec,
}

/// Data sizes. Meaning per experiment:
/// fit-function and ntk use `n_train` grid points and `n_eval` held-out
/// points; lorenz-map uses `n_train` trajectories of `n_eval` steps; PDE runs
/// use `n_res`, `n_bc` (per face) and `n_ic`, and an evaluation grid of
/// `n_eval` points per coordinate; separable runs read `n_res` and `n_bc`
/// as points per axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DataSpec {
    #[serde(default)]
    pub n_train: usize,
    #[serde(default)]
    pub n_eval: usize,
    #[serde(default)]
    pub n_res: usize,
    #[serde(default)]
    pub n_bc: usize,
    #[serde(default)]
    pub n_ic: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtkSpec {
    /// Sample-set size, at most 128.
    pub points: usize,
    /// Checkpoint epochs, as fractions of the epoch budget.
    pub checkpoints: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub name: String,
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub problem: Option<ProblemName>,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub seeds: Vec<u64>,
    pub data: DataSpec,
    /// Phase budgets of the forgetting protocol.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub phases: Option<Vec<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ntk: Option<NtkSpec>,
    /// Provenance note per setting: published value or local default.
    #[serde(default)]
    pub sources: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub out_dir: Option<PathBuf>,
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), BenchError> {
        let bad = |m: String| Err(BenchError::Config(format!("{}: {m}", self.name)));
        if self.seeds.is_empty() {
            return bad("no seeds".into());
        }
        if self.model.widths.len() < 2 {
            return bad("need at least input and output widths".into());
        }
        self.model.basis.validate().map_err(|e| BenchError::Config(e.to_string()))?;
        let needs_problem = matches!(
            self.experiment,
            Experiment::SolvePde | Experiment::SolveSeparable | Experiment::Forgetting
        );
        if needs_problem && self.problem.is_none() {
            return bad("missing problem".into());
        }
        let d = match self.experiment {
            Experiment::FitFunction | Experiment::Ntk | Experiment::LorenzPi => 1,
            Experiment::LorenzMap => 3,
            Experiment::SolveSeparable => 1,
            Experiment::SolvePde | Experiment::Forgetting => self.problem.map(|p| p.problem().dim()).unwrap_or(0),
        };
        let want = self.model.map.width(d);
        if self.model.widths[0] != want {
            return bad(format!("input width {} but the map emits {want}", self.model.widths[0]));
        }
        if self.experiment == Experiment::Forgetting && self.phases.as_ref().is_none_or(|p| p.len() != 4) {
            return bad("forgetting needs four phase budgets".into());
        }
        if self.experiment == Experiment::Ntk {
            match &self.ntk {
                Some(n) if n.points >= 2 && n.points <= 128 && n.checkpoints.len() >= 2 => {}
                _ => return bad("ntk needs 2..=128 points and at least two checkpoints".into()),
            }
        }
        Ok(())
    }

    /// Applies desk-scale overrides. Phase budgets scale with `epochs`
    /// relative to the preset total.
    pub fn with_overrides(&self, epochs: Option<usize>, n_res: Option<usize>) -> RunConfig {
        let mut c = self.clone();
        if let Some(e) = epochs {
            if let Some(phases) = &self.phases {
                let total: usize = phases.iter().sum();
                let scaled: Vec<usize> = phases.iter().map(|&p| ((p as f64 * e as f64 / total as f64).round() as usize).max(1)).collect();
                c.train.epochs = scaled.iter().sum();
                c.phases = Some(scaled);
            } else {
                c.train.epochs = e;
            }
            c.train.log_every = c.train.log_every.min(e.max(1));
        }
        if let Some(n) = n_res {
            c.data.n_res = n;
        }
        c
    }

    pub fn architecture(&self) -> String {
        let core = if self.model.map.is_identity() { "KAN" } else { "FEKAN" };
        match self.experiment {
            Experiment::SolvePde | Experiment::LorenzPi | Experiment::Forgetting => format!("PI-{core}"),
            Experiment::SolveSeparable => format!("SPI-{core}"),
            _ => core.to_string(),
        }
    }
}

pub fn basis_label(spec: &BasisSpec) -> (&'static str, String) {
    match spec.kind {
        BasisKind::Spline { k, g } => ("Spline", format!("k={k}, G={g}")),
        BasisKind::Fourier { n } => ("Fourier", format!("N={n}")),
        BasisKind::Chebyshev { k } => ("Chebyshev", format!("k={k}")),
        BasisKind::Rbf { n_f } => ("RBF", format!("N_f={n_f}")),
        BasisKind::Relu { k, g } => ("ReLU", format!("k={k}, G={g}")),
        BasisKind::HRelu { k, g, n } => ("ReLU^n", format!("k={k}, G={g}, n={n}")),
        BasisKind::WaveletDoG => ("DoG", "-".into()),
    }
}

const PUBLISHED: &str = "published setting";
const LOCAL: &str = "local default (not stated in the source)";

fn sources(pairs: &[(&str, &str)]) -> BTreeMap<String, String> {
    pairs.iter().map(|(k, v)| (k.to_string(), v.to_string())).collect()
}

fn train(epochs: usize, log_every: usize) -> TrainConfig {
    TrainConfig::new(epochs).log_every(log_every)
}

/// The seven basis families at the sizes used for 1D function fitting
/// (`fit`) and for the 2D Helmholtz problem (`pde`).
fn families(pde: bool) -> Vec<(&'static str, BasisSpec)> {
    let (k, g) = if pde { (3, 5) } else { (2, 15) };
    let n = if pde { 10 } else { 50 };
    vec![
        ("spline", BasisSpec::spline(k, g)),
        ("fourier", BasisSpec::fourier(n)),
        ("cheby", BasisSpec::chebyshev(4)),
        ("rbf", BasisSpec::rbf(n)),
        ("relu", BasisSpec::relu(k, g)),
        ("hrelu", BasisSpec::hrelu(k, g, 3)),
        ("wavelet", BasisSpec::wavelet()),
    ]
}

fn early_stop_for(spec: &BasisSpec) -> Option<EarlyStop> {
    matches!(spec.kind, BasisKind::Relu { .. } | BasisKind::HRelu { .. }).then_some(EarlyStop {
        patience: 2000,
        min_delta: 1e-4,
    })
}

/// Every built-in preset, keyed by name.
pub fn load_presets() -> BTreeMap<String, RunConfig> {
    let mut out = BTreeMap::new();
    let mut add = |c: RunConfig| {
        out.insert(c.name.clone(), c);
    };

    for (tag, basis) in families(false) {
        for fe in [false, true] {
            let map = if fe { MapSpec::normalized(MapKind::NineTerm) } else { MapSpec::identity() };
            add(RunConfig {
                name: format!("funfit-{}-{tag}", if fe { "fekan" } else { "kan" }),
                experiment: Experiment::FitFunction,
                problem: None,
                model: ModelSpec {
                    widths: vec![map.width(1), 6, 1],
                    basis,
                    map,
                },
                train: train(50_000, 1000),
                seeds: (0..10).collect(),
                data: DataSpec {
                    n_train: 1000,
                    n_eval: 5000,
                    n_res: 0,
                    n_bc: 0,
                    n_ic: 0,
                },
                phases: None,
                ntk: None,
                sources: sources(&[
                    ("widths", PUBLISHED),
                    ("basis", PUBLISHED),
                    ("map", PUBLISHED),
                    ("epochs", PUBLISHED),
                    ("lr", PUBLISHED),
                    ("seeds", PUBLISHED),
                    ("interval", "local default: x in [0, 0.02], mapped to [-1, 1] before the terms"),
                    ("n_train", LOCAL),
                    ("n_eval", LOCAL),
                ]),
                out_dir: None,
            });
        }
    }

    for fe in [false, true] {
        let map = if fe { MapSpec::normalized(MapKind::NineTerm) } else { MapSpec::identity() };
        add(RunConfig {
            name: format!("ntk-{}-spline", if fe { "fekan" } else { "kan" }),
            experiment: Experiment::Ntk,
            problem: None,
            model: ModelSpec {
                widths: vec![map.width(1), 6, 1],
                basis: BasisSpec::spline(2, 15),
                map,
            },
            train: train(50_000, 1000),
            seeds: vec![0, 1, 2],
            data: DataSpec {
                n_train: 1000,
                n_eval: 5000,
                n_res: 0,
                n_bc: 0,
                n_ic: 0,
            },
            phases: None,
            ntk: Some(NtkSpec {
                points: 128,
                checkpoints: vec![0.0, 0.25, 0.5, 1.0],
            }),
            sources: sources(&[
                ("widths", PUBLISHED),
                ("basis", PUBLISHED),
                ("map", PUBLISHED),
                ("ntk.points", "local cap of 128 points"),
                ("ntk.checkpoints", LOCAL),
            ]),
            out_dir: None,
        });
    }

    for fe in [false, true] {
        let map = if fe { MapSpec::raw(MapKind::SevenPerDim) } else { MapSpec::raw(MapKind::Identity) };
        add(RunConfig {
            name: format!("lorenz-{}-spline", if fe { "fekan" } else { "kan" }),
            experiment: Experiment::LorenzMap,
            problem: None,
            model: ModelSpec {
                widths: vec![map.width(3), 6, 3],
                basis: BasisSpec::spline(2, 7),
                map,
            },
            train: train(20_000, 1000),
            seeds: vec![0, 1, 2],
            data: DataSpec {
                n_train: 50,
                n_eval: 200,
                n_res: 0,
                n_bc: 0,
                n_ic: 0,
            },
            phases: None,
            ntk: None,
            sources: sources(&[
                ("basis", PUBLISHED),
                ("lorenz parameters", PUBLISHED),
                ("widths", LOCAL),
                ("map", LOCAL),
                ("epochs", LOCAL),
                ("trajectories", "local default: 50 trajectories of 200 steps, dt = 0.01, states scaled to [-1, 1]"),
            ]),
            out_dir: None,
        });
    }

    for (tag, basis) in families(true) {
        for fe in [false, true] {
            let map = if fe { MapSpec::raw(MapKind::SevenPerDim) } else { MapSpec::raw(MapKind::Identity) };
            let mut train = train(100_000, 1000);
            train.early_stop = early_stop_for(&basis);
            add(RunConfig {
                name: format!("helm2d-{}-{tag}", if fe { "fekan" } else { "kan" }),
                experiment: Experiment::SolvePde,
                problem: Some(ProblemName::Helmholtz2d),
                model: ModelSpec {
                    widths: vec![map.width(2), 7, 7, 1],
                    basis,
                    map,
                },
                train,
                seeds: (0..5).collect(),
                data: DataSpec {
                    n_train: 0,
                    n_eval: 101,
                    n_res: 10_000,
                    n_bc: 400,
                    n_ic: 0,
                },
                phases: None,
                ntk: None,
                sources: sources(&[
                    ("widths", PUBLISHED),
                    ("basis", PUBLISHED),
                    ("map", PUBLISHED),
                    ("epochs", PUBLISHED),
                    ("seeds", PUBLISHED),
                    ("helmholtz a1, a2, k", PUBLISHED),
                    ("n_res", LOCAL),
                    ("n_bc", LOCAL),
                    ("n_eval", LOCAL),
                    ("early_stop", "local patience for ReLU-family bases"),
                ]),
                out_dir: None,
            });
        }
    }
    for (sigma, basis_tag, basis) in [
        (2.0, "spline", BasisSpec::spline(3, 5)),
        (10.0, "spline", BasisSpec::spline(3, 5)),
        (2.0, "cheby", BasisSpec::chebyshev(4)),
        (10.0, "cheby", BasisSpec::chebyshev(4)),
    ] {
        let map = MapSpec::raw(MapKind::Rff { sigma, m: 3 });
        add(RunConfig {
            name: format!("helm2d-fekan-{basis_tag}-rff{sigma}"),
            experiment: Experiment::SolvePde,
            problem: Some(ProblemName::Helmholtz2d),
            model: ModelSpec {
                widths: vec![map.width(2), 7, 7, 1],
                basis,
                map,
            },
            train: train(100_000, 1000),
            seeds: (0..5).collect(),
            data: DataSpec {
                n_train: 0,
                n_eval: 101,
                n_res: 10_000,
                n_bc: 400,
                n_ic: 0,
            },
            phases: None,
            ntk: None,
            sources: sources(&[
                ("widths", PUBLISHED),
                ("basis", PUBLISHED),
                ("sigma", PUBLISHED),
                ("terms per coordinate", PUBLISHED),
                ("epochs", PUBLISHED),
                ("n_res", LOCAL),
                ("n_bc", LOCAL),
            ]),
            out_dir: None,
        });
    }

    for n_res in [6000, 10_000, 15_000] {
        for fe in [false, true] {
            let map = if fe { MapSpec::raw(MapKind::SevenPerDim) } else { MapSpec::raw(MapKind::Identity) };
            add(RunConfig {
                name: format!("ac-{}-spline-{n_res}", if fe { "fekan" } else { "kan" }),
                experiment: Experiment::SolvePde,
                problem: Some(ProblemName::AllenCahn),
                model: ModelSpec {
                    widths: vec![map.width(2), 7, 7, 1],
                    basis: BasisSpec::spline(3, 6),
                    map,
                },
                train: train(100_000, 1000),
                seeds: (0..5).collect(),
                data: DataSpec {
                    n_train: 0,
                    n_eval: 0,
                    n_res,
                    n_bc: 400,
                    n_ic: 800,
                },
                phases: None,
                ntk: None,
                sources: sources(&[
                    ("widths", PUBLISHED),
                    ("basis", PUBLISHED),
                    ("n_res", PUBLISHED),
                    ("epochs", LOCAL),
                    ("n_bc", LOCAL),
                    ("n_ic", LOCAL),
                    ("boundary", "local choice: periodic in x"),
                ]),
                out_dir: None,
            });
        }
    }

    for g in [3, 6] {
        for fe in [false, true] {
            let map = if fe { MapSpec::raw(MapKind::SevenPerDim) } else { MapSpec::raw(MapKind::Identity) };
            add(RunConfig {
                name: format!("forget-{}-spline-g{g}", if fe { "fekan" } else { "kan" }),
                experiment: Experiment::Forgetting,
                problem: Some(ProblemName::Helmholtz2d),
                model: ModelSpec {
                    widths: vec![map.width(2), 7, 7, 1],
                    basis: BasisSpec::spline(3, g),
                    map,
                },
                train: train(PHASE_EPOCHS.iter().sum(), 1000),
                seeds: vec![0, 1, 2],
                data: DataSpec {
                    n_train: 0,
                    n_eval: 101,
                    n_res: 10_000,
                    n_bc: 400,
                    n_ic: 0,
                },
                phases: Some(PHASE_EPOCHS.to_vec()),
                ntk: None,
                sources: sources(&[
                    ("basis.g", PUBLISHED),
                    ("map", PUBLISHED),
                    ("phases", PUBLISHED),
                    ("anchors", PUBLISHED),
                    ("widths", "local default: the Helmholtz widths"),
                    ("basis.k", LOCAL),
                    ("n_res", LOCAL),
                    ("n_bc", LOCAL),
                ]),
                out_dir: None,
            });
        }
    }

    for (basis_tag, basis) in [("spline", BasisSpec::spline(3, 5)), ("cheby", BasisSpec::chebyshev(4))] {
        for fe in [false, true] {
            let map = if fe { MapSpec::normalized(MapKind::FivePerDim) } else { MapSpec::identity() };
            add(RunConfig {
                name: format!("lorenzpi-{}-{basis_tag}", if fe { "fekan" } else { "kan" }),
                experiment: Experiment::LorenzPi,
                problem: None,
                model: ModelSpec {
                    widths: vec![map.width(1), 7, 7, 3],
                    basis,
                    map,
                },
                train: train(10_000, 1000),
                seeds: vec![0, 1, 2],
                data: DataSpec {
                    n_train: 0,
                    n_eval: 401,
                    n_res: 200,
                    n_bc: 0,
                    n_ic: 1,
                },
                phases: None,
                ntk: None,
                sources: sources(&[
                    ("initial state", PUBLISHED),
                    ("interval and window", PUBLISHED),
                    ("widths", LOCAL),
                    ("basis", LOCAL),
                    ("map", "local default: five terms on time mapped to [-1, 1]"),
                    ("epochs per window", LOCAL),
                    ("n_res per window", LOCAL),
                ]),
                out_dir: None,
            });
        }
    }
    for (problem, slug) in [(ProblemName::Helmholtz3d, "helm3d"), (ProblemName::KleinGordon, "kg")] {
        for (basis_tag, basis) in [("spline", BasisSpec::spline(3, 3)), ("cheby", BasisSpec::chebyshev(4))] {
            for fe in [false, true] {
                let map = if fe { MapSpec::raw(MapKind::FivePerDim) } else { MapSpec::raw(MapKind::Identity) };
                add(RunConfig {
                    name: format!("{slug}-sep-{}-{basis_tag}", if fe { "fekan" } else { "kan" }),
                    experiment: Experiment::SolveSeparable,
                    problem: Some(problem),
                    model: ModelSpec {
                        widths: vec![map.width(1), 5, 10],
                        basis,
                        map,
                    },
                    train: train(50_000, 1000),
                    seeds: (0..10).collect(),
                    data: DataSpec {
                        n_train: 0,
                        n_eval: 21,
                        n_res: 16,
                        n_bc: 16,
                        n_ic: 0,
                    },
                    phases: None,
                    ntk: None,
                    sources: sources(&[
                        ("bodies", PUBLISHED),
                        ("widths", PUBLISHED),
                        ("basis", PUBLISHED),
                        ("map", PUBLISHED),
                        ("epochs", PUBLISHED),
                        ("seeds", PUBLISHED),
                        ("rank", "reads the embedding width 10 as the rank"),
                        ("n_res per axis", LOCAL),
                        ("n_bc per axis", LOCAL),
                        ("n_eval per axis", LOCAL),
                    ]),
                    out_dir: None,
                });
            }
        }
    }
    out
}
