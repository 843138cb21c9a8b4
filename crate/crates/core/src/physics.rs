//! Targets, ODE/PDE problem definitions, collocation sampling and the
//! physics-informed loss.
//!
//! Coordinates are ordered space first, then time. A residual operator sees
//! the model output jet `(u, ∇u, diag ∇²u)` at a point and returns the
//! residual together with its partial derivatives in those channels, which is
//! all the reverse pass needs.

pub mod allen_cahn;

use std::f64::consts::PI;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FekanModel, ParamGrads, Workspace};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PhysicsError {
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("reference has zero norm")]
    ZeroNorm,
    #[error("non-finite state at step {step}")]
    NonFiniteState { step: usize },
    #[error("time step must be positive, got {0}")]
    BadStep(f64),
    #[error("model takes {model} inputs but problem has {problem} coordinates")]
    DimMismatch { model: usize, problem: usize },
}

/// `‖pred − exact‖₂ / ‖exact‖₂`.
pub fn relative_l2(pred: &[f64], exact: &[f64]) -> Result<f64, PhysicsError> {
    if pred.len() != exact.len() {
        return Err(PhysicsError::LengthMismatch(pred.len(), exact.len()));
    }
    let den: f64 = exact.iter().map(|e| e * e).sum::<f64>().sqrt();
    if den == 0.0 {
        return Err(PhysicsError::ZeroNorm);
    }
    let num: f64 = pred.iter().zip(exact).map(|(p, e)| (p - e) * (p - e)).sum::<f64>().sqrt();
    Ok(num / den)
}

/// Piecewise high-frequency test function with a jump at `x = 0.01`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HighFreq {
    pub w1: f64,
    pub w2: f64,
    pub w3: f64,
}

impl Default for HighFreq {
    fn default() -> Self {
        Self {
            w1: 350.0,
            w2: 6000.0,
            w3: 150.0,
        }
    }
}

impl HighFreq {
    pub fn eval(&self, x: f64) -> f64 {
        if x < 0.01 {
            20.0 * (2.0 * PI * self.w1 * x).sin() + 1.5 * (2.0 * PI * self.w2 * x).sin() + 70.0
        } else {
            10.0 * (2.0 * PI * self.w3 * x).sin() + 30.0
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LorenzParams {
    pub sigma: f64,
    pub rho: f64,
    pub beta: f64,
}

impl Default for LorenzParams {
    fn default() -> Self {
        Self {
            sigma: 10.0,
            rho: 28.0,
            beta: 8.0 / 3.0,
        }
    }
}

pub fn lorenz_rhs(s: &[f64], p: &LorenzParams) -> [f64; 3] {
    let (x, y, z) = (s[0], s[1], s[2]);
    [p.sigma * (y - x), x * (p.rho - z) - y, x * y - p.beta * z]
}

/// Classical RK4 trajectory of `steps + 1` states starting at `state0`.
pub fn integrate_rk4(
    rhs: impl Fn(&[f64]) -> Vec<f64>,
    state0: &[f64],
    dt: f64,
    steps: usize,
) -> Result<Vec<Vec<f64>>, PhysicsError> {
    if !(dt > 0.0) {
        return Err(PhysicsError::BadStep(dt));
    }
    let n = state0.len();
    let mut traj = Vec::with_capacity(steps + 1);
    traj.push(state0.to_vec());
    let mut s = state0.to_vec();
    let mut tmp = vec![0.0; n];
    for step in 0..steps {
        let k1 = rhs(&s);
        tmp.iter_mut().enumerate().for_each(|(i, t)| *t = s[i] + 0.5 * dt * k1[i]);
        let k2 = rhs(&tmp);
        tmp.iter_mut().enumerate().for_each(|(i, t)| *t = s[i] + 0.5 * dt * k2[i]);
        let k3 = rhs(&tmp);
        tmp.iter_mut().enumerate().for_each(|(i, t)| *t = s[i] + dt * k3[i]);
        let k4 = rhs(&tmp);
        for i in 0..n {
            s[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
        }
        if s.iter().any(|v| !v.is_finite()) {
            return Err(PhysicsError::NonFiniteState { step: step + 1 });
        }
        traj.push(s.clone());
    }
    Ok(traj)
}

/// Lorenz trajectory from `state0` with RK4.
pub fn lorenz_trajectory(p: &LorenzParams, state0: [f64; 3], dt: f64, steps: usize) -> Result<Vec<Vec<f64>>, PhysicsError> {
    integrate_rk4(|s| lorenz_rhs(s, p).to_vec(), &state0, dt, steps)
}

/// Residual value and its sensitivities to the output jet channels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualLin {
    pub r: f64,
    pub dv: f64,
    pub dg: [f64; 4],
    pub dh: [f64; 4],
}

/// PDE operators. Each has a closed-form solution used for forcing,
/// boundary data and errors, except Allen–Cahn, whose reference comes from
/// [`allen_cahn::solve`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Operator {
    /// `u'' = −π² sin(πx)` on `[−1, 1]`, solution `sin(πx)`.
    Poisson1d,
    /// `Δu + k²u = q`, solution `Π sin(a_i π x_i)`.
    Helmholtz { a: Vec<f64>, k: f64 },
    /// `u_t − ε u_xx + γu³ − γu = 0`.
    AllenCahn { eps: f64, gamma: f64 },
    /// `u_tt − Δu + u² = f`, solution `(x₁+x₂)cos t + x₁x₂ sin t`.
    KleinGordon,
}

impl Operator {
    pub fn exact(&self, x: &[f64]) -> Option<f64> {
        match self {
            Operator::Poisson1d => Some((PI * x[0]).sin()),
            Operator::Helmholtz { a, .. } => Some(a.iter().zip(x).map(|(ai, xi)| (ai * PI * xi).sin()).product()),
            Operator::AllenCahn { .. } => None,
            Operator::KleinGordon => {
                let (x1, x2, t) = (x[0], x[1], x[2]);
                Some((x1 + x2) * t.cos() + x1 * x2 * t.sin())
            }
        }
    }

    /// Right-hand side of the manufactured problem.
    pub fn forcing(&self, x: &[f64]) -> f64 {
        match self {
            Operator::Poisson1d => -PI * PI * (PI * x[0]).sin(),
            Operator::Helmholtz { a, k } => {
                let u = self.exact(x).expect("closed form");
                (k * k - PI * PI * a.iter().map(|v| v * v).sum::<f64>()) * u
            }
            Operator::AllenCahn { .. } => 0.0,
            Operator::KleinGordon => {
                let u = self.exact(x).expect("closed form");
                u * u - u
            }
        }
    }

    /// Residual at `x` for a field with value `v`, gradient `g` and pure
    /// second derivatives `h`.
    pub fn residual(&self, x: &[f64], v: f64, g: &[f64], h: &[f64]) -> ResidualLin {
        let mut dg = [0.0; 4];
        let mut dh = [0.0; 4];
        match self {
            Operator::Poisson1d => {
                dh[0] = 1.0;
                ResidualLin {
                    r: h[0] - self.forcing(x),
                    dv: 0.0,
                    dg,
                    dh,
                }
            }
            Operator::Helmholtz { a, k } => {
                let mut r = k * k * v - self.forcing(x);
                for i in 0..a.len() {
                    r += h[i];
                    dh[i] = 1.0;
                }
                ResidualLin { r, dv: k * k, dg, dh }
            }
            Operator::AllenCahn { eps, gamma } => {
                dg[1] = 1.0;
                dh[0] = -eps;
                ResidualLin {
                    r: g[1] - eps * h[0] + gamma * v * v * v - gamma * v,
                    dv: 3.0 * gamma * v * v - gamma,
                    dg,
                    dh,
                }
            }
            Operator::KleinGordon => {
                dh[0] = -1.0;
                dh[1] = -1.0;
                dh[2] = 1.0;
                ResidualLin {
                    r: h[2] - h[0] - h[1] + v * v - self.forcing(x),
                    dv: 2.0 * v,
                    dg,
                    dh,
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BoundaryKind {
    /// `u = exact` on every spatial face.
    Dirichlet,
    /// `u` and `u_x` match across the two ends of coordinate `dim`.
    Periodic { dim: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InitialKind {
    Value,
    ValueAndVelocity,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Counts {
    pub n_res: usize,
    /// Boundary points per face (pairs for periodic boundaries).
    pub n_bc: usize,
    pub n_ic: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Weights {
    pub res: f64,
    pub bc: f64,
    pub ic: f64,
}

impl Default for Weights {
    fn default() -> Self {
        Self {
            res: 1.0,
            bc: 1.0,
            ic: 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PdeProblem {
    pub name: String,
    /// Bounds of every coordinate, space first, then time.
    pub bounds: Vec<(f64, f64)>,
    pub time_dim: Option<usize>,
    pub operator: Operator,
    pub boundary: BoundaryKind,
    pub initial: Option<InitialKind>,
    pub counts: Counts,
    pub weights: Weights,
}

/// Allen–Cahn initial profile `x² cos(πx)`.
pub fn allen_cahn_ic(x: f64) -> f64 {
    x * x * (PI * x).cos()
}

/// Poisson toy: `u'' = −π² sin(πx)` on `[−1, 1]`, `u(±1) = 0`.
pub fn poisson1d() -> PdeProblem {
    PdeProblem {
        name: "poisson1d".into(),
        bounds: vec![(-1.0, 1.0)],
        time_dim: None,
        operator: Operator::Poisson1d,
        boundary: BoundaryKind::Dirichlet,
        initial: None,
        counts: Counts {
            n_res: 64,
            n_bc: 1,
            n_ic: 0,
        },
        weights: Weights::default(),
    }
}

/// `Δu + k²u = q` on `[−1, 1]²` with `a = (4, 4)`, `k = 1`.
pub fn helmholtz2d() -> PdeProblem {
    PdeProblem {
        name: "helmholtz2d".into(),
        bounds: vec![(-1.0, 1.0); 2],
        time_dim: None,
        operator: Operator::Helmholtz {
            a: vec![4.0, 4.0],
            k: 1.0,
        },
        boundary: BoundaryKind::Dirichlet,
        initial: None,
        counts: Counts {
            n_res: 10000,
            n_bc: 400,
            n_ic: 0,
        },
        weights: Weights::default(),
    }
}

/// `Δu + k²u = q` on `[−1, 1]³` with `a = (6, 6, 6)`, `k = 1`.
pub fn helmholtz3d() -> PdeProblem {
    PdeProblem {
        name: "helmholtz3d".into(),
        bounds: vec![(-1.0, 1.0); 3],
        time_dim: None,
        operator: Operator::Helmholtz {
            a: vec![6.0, 6.0, 6.0],
            k: 1.0,
        },
        boundary: BoundaryKind::Dirichlet,
        initial: None,
        counts: Counts {
            n_res: 10000,
            n_bc: 400,
            n_ic: 0,
        },
        weights: Weights::default(),
    }
}

/// Allen–Cahn on `[−1, 1] × [0, 1]` with periodic ends.
pub fn allen_cahn() -> PdeProblem {
    PdeProblem {
        name: "allen_cahn".into(),
        bounds: vec![(-1.0, 1.0), (0.0, 1.0)],
        time_dim: Some(1),
        operator: Operator::AllenCahn { eps: 1e-4, gamma: 5.0 },
        boundary: BoundaryKind::Periodic { dim: 0 },
        initial: Some(InitialKind::Value),
        counts: Counts {
            n_res: 10000,
            n_bc: 400,
            n_ic: 800,
        },
        weights: Weights::default(),
    }
}

/// Klein–Gordon on `[−1, 1]² × [0, 10]` with the manufactured solution.
pub fn klein_gordon() -> PdeProblem {
    PdeProblem {
        name: "klein_gordon".into(),
        bounds: vec![(-1.0, 1.0), (-1.0, 1.0), (0.0, 10.0)],
        time_dim: Some(2),
        operator: Operator::KleinGordon,
        boundary: BoundaryKind::Dirichlet,
        initial: Some(InitialKind::ValueAndVelocity),
        counts: Counts {
            n_res: 10000,
            n_bc: 400,
            n_ic: 800,
        },
        weights: Weights::default(),
    }
}

impl PdeProblem {
    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn spatial_dims(&self) -> usize {
        self.dim() - self.time_dim.is_some() as usize
    }

    /// Number of boundary faces (two per spatial coordinate).
    pub fn faces(&self) -> usize {
        2 * self.spatial_dims()
    }

    /// Dirichlet data at a boundary point.
    pub fn boundary_value(&self, x: &[f64]) -> f64 {
        self.operator.exact(x).unwrap_or(0.0)
    }

    /// Initial value and velocity at a point on the initial slice.
    pub fn initial_value(&self, x: &[f64]) -> (f64, f64) {
        match self.operator {
            Operator::AllenCahn { .. } => (allen_cahn_ic(x[0]), 0.0),
            Operator::KleinGordon => (x[0] + x[1], x[0] * x[1]),
            _ => (self.operator.exact(x).unwrap_or(0.0), 0.0),
        }
    }

    pub fn with_counts(mut self, counts: Counts) -> Self {
        self.counts = counts;
        self
    }
}

/// Which output channel a condition constrains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Probe {
    Value,
    Grad(usize),
}

/// One scalar condition `Σ coef·probe(u at point) − target`.
#[derive(Debug, Clone, PartialEq)]
pub struct CondSample {
    pub terms: Vec<(Vec<f64>, Probe, f64)>,
    pub target: f64,
    /// Boundary face index (`2·dim + side`), when the sample lies on one.
    pub face: Option<usize>,
}

impl CondSample {
    pub fn dirichlet(x: Vec<f64>, target: f64, face: Option<usize>) -> Self {
        Self {
            terms: vec![(x, Probe::Value, 1.0)],
            target,
            face,
        }
    }
}

/// A fixed collocation set.
#[derive(Debug, Clone, PartialEq)]
pub struct Batches {
    pub interior: Vec<Vec<f64>>,
    pub bc: Vec<CondSample>,
    pub ic: Vec<CondSample>,
}

fn uniform_point(rng: &mut ChaCha8Rng, bounds: &[(f64, f64)]) -> Vec<f64> {
    bounds
        .iter()
        .map(|&(lo, hi)| loop {
            let v = rng.random_range(lo..hi);
            if v > lo {
                break v;
            }
        })
        .collect()
}

/// Points on face `face` (`2·dim + side`), `n` of them, uniform in the
/// remaining coordinates.
pub fn face_points(problem: &PdeProblem, face: usize, n: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let (dim, side) = (face / 2, face % 2);
    let (lo, hi) = problem.bounds[dim];
    (0..n)
        .map(|_| {
            let mut p = uniform_point(rng, &problem.bounds);
            p[dim] = if side == 0 { lo } else { hi };
            p
        })
        .collect()
}

/// Deterministic collocation set for `problem`, fixed for a whole run.
pub fn sample_collocation(problem: &PdeProblem, seed: u64) -> Batches {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = problem.counts;
    let interior = (0..c.n_res).map(|_| uniform_point(&mut rng, &problem.bounds)).collect();
    let mut bc = Vec::new();
    match problem.boundary {
        BoundaryKind::Dirichlet => {
            for face in 0..problem.faces() {
                for p in face_points(problem, face, c.n_bc, &mut rng) {
                    let v = problem.boundary_value(&p);
                    bc.push(CondSample::dirichlet(p, v, Some(face)));
                }
            }
        }
        BoundaryKind::Periodic { dim } => {
            let (lo, hi) = problem.bounds[dim];
            for _ in 0..c.n_bc {
                let mut a = uniform_point(&mut rng, &problem.bounds);
                a[dim] = lo;
                let mut b = a.clone();
                b[dim] = hi;
                for probe in [Probe::Value, Probe::Grad(dim)] {
                    bc.push(CondSample {
                        terms: vec![(a.clone(), probe, 1.0), (b.clone(), probe, -1.0)],
                        target: 0.0,
                        face: None,
                    });
                }
            }
        }
    }
    let mut ic = Vec::new();
    if let (Some(kind), Some(td)) = (problem.initial, problem.time_dim) {
        for _ in 0..c.n_ic {
            let mut p = uniform_point(&mut rng, &problem.bounds);
            p[td] = problem.bounds[td].0;
            let (u0, v0) = problem.initial_value(&p);
            if kind == InitialKind::ValueAndVelocity {
                ic.push(CondSample {
                    terms: vec![(p.clone(), Probe::Grad(td), 1.0)],
                    target: v0,
                    face: None,
                });
            }
            ic.push(CondSample::dirichlet(p, u0, None));
        }
    }
    Batches { interior, bc, ic }
}

/// Loss value and its parts.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossTerms {
    pub loss: f64,
    pub l_res: f64,
    pub l_bc: f64,
    pub l_ic: f64,
}

/// Reusable buffers for repeated PINN loss evaluations of one model shape.
pub struct PinnEvaluator {
    jet: Workspace,
    plain: Workspace,
}

impl PinnEvaluator {
    pub fn new(model: &FekanModel) -> Self {
        let d = model.in_dim();
        Self {
            jet: model.workspace(d),
            plain: model.workspace(0),
        }
    }

    /// Mean-squared condition loss over `samples`, scaled by `weight`.
    /// Accumulates gradients when `grads` is given.
    pub fn condition_loss(
        &mut self,
        model: &FekanModel,
        samples: &[CondSample],
        weight: f64,
        mut grads: Option<&mut [f64]>,
    ) -> f64 {
        if samples.is_empty() {
            return 0.0;
        }
        let n = samples.len() as f64;
        let mut total = 0.0;
        for s in samples {
            let mut r = -s.target;
            for (x, probe, coef) in &s.terms {
                r += coef * self.probe(model, x, *probe);
            }
            total += r * r;
            if weight != 0.0 {
                if let Some(g) = grads.as_deref_mut() {
                    for (x, probe, coef) in &s.terms {
                        self.probe_backward(model, x, *probe, weight * 2.0 * r * coef / n, g);
                    }
                }
            }
        }
        total / n
    }

    fn probe(&mut self, model: &FekanModel, x: &[f64], probe: Probe) -> f64 {
        match probe {
            Probe::Value => {
                model.eval_ws(x, &mut self.plain);
                self.plain.out_value()[0]
            }
            Probe::Grad(k) => {
                model.eval_ws(x, &mut self.jet);
                self.jet.out_grad()[k]
            }
        }
    }

    fn probe_backward(&mut self, model: &FekanModel, x: &[f64], probe: Probe, up: f64, grads: &mut [f64]) {
        match probe {
            Probe::Value => {
                model.eval_ws(x, &mut self.plain);
                model.backward_value_ws(&mut self.plain, &[up], grads);
            }
            Probe::Grad(k) => {
                model.eval_ws(x, &mut self.jet);
                let (cv, cg, ch) = model.cotangent_buffers(&mut self.jet);
                cv.fill(0.0);
                cg.fill(0.0);
                ch.fill(0.0);
                cg[k] = up;
                model.backward_seeded_ws(&mut self.jet, grads);
            }
        }
    }

    /// Mean squared residual over `points`, scaled by `weight`, with
    /// gradient accumulation when `grads` is given.
    pub fn residual_loss(
        &mut self,
        model: &FekanModel,
        op: &Operator,
        points: &[Vec<f64>],
        weight: f64,
        mut grads: Option<&mut [f64]>,
    ) -> f64 {
        if points.is_empty() {
            return 0.0;
        }
        let n = points.len() as f64;
        let d = self.jet.jet_dim();
        let mut total = 0.0;
        for x in points {
            model.eval_ws(x, &mut self.jet);
            let lin = op.residual(x, self.jet.out_value()[0], self.jet.out_grad(), self.jet.out_diag2());
            total += lin.r * lin.r;
            if weight != 0.0 {
                if let Some(g) = grads.as_deref_mut() {
                    let s = weight * 2.0 * lin.r / n;
                    let (cv, cg, ch) = model.cotangent_buffers(&mut self.jet);
                    cv[0] = s * lin.dv;
                    for k in 0..d {
                        cg[k] = s * lin.dg[k];
                        ch[k] = s * lin.dh[k];
                    }
                    model.backward_seeded_ws(&mut self.jet, g);
                }
            }
        }
        total / n
    }

    /// Full weighted loss; gradients are written (not accumulated) into
    /// `grads` when given.
    pub fn loss(
        &mut self,
        model: &FekanModel,
        problem: &PdeProblem,
        batches: &Batches,
        mut grads: Option<&mut [f64]>,
    ) -> LossTerms {
        if let Some(g) = grads.as_deref_mut() {
            g.fill(0.0);
        }
        let w = problem.weights;
        let l_res = self.residual_loss(model, &problem.operator, &batches.interior, w.res, grads.as_deref_mut());
        let l_bc = self.condition_loss(model, &batches.bc, w.bc, grads.as_deref_mut());
        let l_ic = self.condition_loss(model, &batches.ic, w.ic, grads.as_deref_mut());
        LossTerms {
            loss: w.res * l_res + w.bc * l_bc + w.ic * l_ic,
            l_res,
            l_bc,
            l_ic,
        }
    }
}

/// Weighted PINN loss, its parts and its parameter gradient.
pub fn pinn_loss(
    model: &FekanModel,
    problem: &PdeProblem,
    batches: &Batches,
) -> Result<(LossTerms, ParamGrads), PhysicsError> {
    if model.in_dim() != problem.dim() {
        return Err(PhysicsError::DimMismatch {
            model: model.in_dim(),
            problem: problem.dim(),
        });
    }
    let mut ev = PinnEvaluator::new(model);
    let mut g = ParamGrads::zeros(model.param_count());
    let terms = ev.loss(model, problem, batches, Some(&mut g.0));
    Ok((terms, g))
}

/// Tensor-product evaluation grid with `n` points per coordinate, including
/// the endpoints.
pub fn eval_grid(bounds: &[(f64, f64)], n: usize) -> Vec<Vec<f64>> {
    let axes: Vec<Vec<f64>> = bounds.iter().map(|&(lo, hi)| linspace(lo, hi, n)).collect();
    let total = n.pow(bounds.len() as u32);
    (0..total)
        .map(|mut idx| {
            let mut p = vec![0.0; bounds.len()];
            for k in (0..bounds.len()).rev() {
                p[k] = axes[k][idx % n];
                idx /= n;
            }
            p
        })
        .collect()
}

pub fn linspace(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    if n == 1 {
        return vec![lo];
    }
    (0..n).map(|i| lo + (hi - lo) * i as f64 / (n - 1) as f64).collect()
}

/// Lorenz time-to-state problem split into equal windows.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LorenzPi {
    pub params: LorenzParams,
    pub state0: [f64; 3],
    pub t_end: f64,
    pub window: f64,
    pub n_res: usize,
    pub ic_weight: f64,
}

impl Default for LorenzPi {
    fn default() -> Self {
        Self {
            params: LorenzParams::default(),
            state0: [1.0, 1.0, 1.0],
            t_end: 4.0,
            window: 0.5,
            n_res: 200,
            ic_weight: 1.0,
        }
    }
}

pub fn lorenz_pi() -> LorenzPi {
    LorenzPi::default()
}

impl LorenzPi {
    pub fn windows(&self) -> usize {
        (self.t_end / self.window).round() as usize
    }

    pub fn window_bounds(&self, w: usize) -> (f64, f64) {
        let t0 = w as f64 * self.window;
        (t0, t0 + self.window)
    }

    /// RK4 reference sampled every `dt` over `[0, t_end]`.
    pub fn reference(&self, dt: f64) -> Result<Vec<Vec<f64>>, PhysicsError> {
        let steps = (self.t_end / dt).round() as usize;
        lorenz_trajectory(&self.params, self.state0, dt, steps)
    }

    /// Loss on one window: mean over `times` of the squared ODE residual
    /// summed over components, plus `ic_weight·Σ(u(t0) − s0)²`.
    /// Gradients are written into `grads` when given.
    pub fn window_loss(
        &self,
        model: &FekanModel,
        ws: &mut Workspace,
        times: &[f64],
        t0: f64,
        s0: &[f64; 3],
        mut grads: Option<&mut [f64]>,
    ) -> LossTerms {
        if let Some(g) = grads.as_deref_mut() {
            g.fill(0.0);
        }
        let p = &self.params;
        let n = times.len() as f64;
        let mut l_res = 0.0;
        for &t in times {
            model.eval_ws(&[t], ws);
            let u = ws.out_value();
            let (x, y, z) = (u[0], u[1], u[2]);
            let du = ws.out_grad();
            let r = [
                du[0] - p.sigma * (y - x),
                du[1] - (x * (p.rho - z) - y),
                du[2] - (x * y - p.beta * z),
            ];
            l_res += r.iter().map(|v| v * v).sum::<f64>();
            if let Some(g) = grads.as_deref_mut() {
                let s: Vec<f64> = r.iter().map(|v| 2.0 * v / n).collect();
                let (cv, cg, ch) = model.cotangent_buffers(ws);
                ch.fill(0.0);
                cg.copy_from_slice(&s);
                // ∂r/∂(x, y, z) contracted with s
                cv[0] = s[0] * p.sigma - s[1] * (p.rho - z) - s[2] * y;
                cv[1] = -s[0] * p.sigma + s[1] - s[2] * x;
                cv[2] = s[1] * x + s[2] * p.beta;
                model.backward_seeded_ws(ws, g);
            }
        }
        l_res /= n;
        model.eval_ws(&[t0], ws);
        let e: Vec<f64> = ws.out_value().iter().zip(s0).map(|(a, b)| a - b).collect();
        let l_ic = e.iter().map(|v| v * v).sum::<f64>();
        if let Some(g) = grads.as_deref_mut() {
            let (cv, cg, ch) = model.cotangent_buffers(ws);
            cg.fill(0.0);
            ch.fill(0.0);
            for c in 0..3 {
                cv[c] = self.ic_weight * 2.0 * e[c];
            }
            model.backward_seeded_ws(ws, g);
        }
        LossTerms {
            loss: l_res + self.ic_weight * l_ic,
            l_res,
            l_bc: 0.0,
            l_ic,
        }
    }
}
