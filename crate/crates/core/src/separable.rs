//! Separable product-sum models `û(x) = Σ_j Π_k f_j^(k)(x_k)` evaluated on
//! tensor-product grids, and their physics-informed loss.
//!
//! Tensors are row-major over the grid axes (axis 0 slowest). Body rows are
//! stored `[j][i]`, component-major.

use std::sync::atomic::{AtomicUsize, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::BasisSpec;
use crate::enrich::FeatureMap;
use crate::model::{FekanModel, ModelError, ParamGrads};
use crate::physics::{LossTerms, PdeProblem};
use crate::train::Trainable;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SeparableError {
    #[error("separable models need at least two bodies")]
    TooFewBodies,
    #[error("body {body} must map 1 input to {rank} outputs, has {inputs} -> {outputs}")]
    BodyShape { body: usize, rank: usize, inputs: usize, outputs: usize },
    #[error("grid has {got} axes, model has {want} bodies")]
    AxisCount { got: usize, want: usize },
    #[error("axis {0} must be non-empty and strictly increasing")]
    BadAxis(usize),
    #[error("invalid axis {axis} or order {order}")]
    BadDerivative { axis: usize, order: usize },
    #[error("tensor has {got} entries, grid has {want}")]
    Shape { got: usize, want: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Per-axis coordinates of a tensor-product grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisGrid {
    axes: Vec<Vec<f64>>,
}

impl AxisGrid {
    pub fn new(axes: Vec<Vec<f64>>) -> Result<Self, SeparableError> {
        for (k, a) in axes.iter().enumerate() {
            if a.is_empty() || a.windows(2).any(|w| !(w[0] < w[1])) || a.iter().any(|v| !v.is_finite()) {
                return Err(SeparableError::BadAxis(k));
            }
        }
        Ok(Self { axes })
    }

    pub fn axes(&self) -> &[Vec<f64>] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(Vec::len).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(Vec::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Coordinates of the point with flat index `idx`.
    pub fn point(&self, mut idx: usize) -> Vec<f64> {
        let mut p = vec![0.0; self.dim()];
        for k in (0..self.dim()).rev() {
            let n = self.axes[k].len();
            p[k] = self.axes[k][idx % n];
            idx /= n;
        }
        p
    }

    /// Every grid point in flat order.
    pub fn points(&self) -> Vec<Vec<f64>> {
        (0..self.len()).map(|i| self.point(i)).collect()
    }
}

/// Body outputs and their first and second derivatives over one grid.
#[derive(Debug, Clone, PartialEq)]
pub struct GridJets {
    shape: Vec<usize>,
    rank: usize,
    /// `rows[k][o]` holds order-`o` rows of body `k`, `[j][i]`.
    rows: Vec<[Vec<f64>; 3]>,
}

impl GridJets {
    pub fn rows(&self, body: usize, order: usize) -> &[f64] {
        &self.rows[body][order]
    }

    fn factors(&self, j: usize, deriv: Option<(usize, usize)>) -> Vec<&[f64]> {
        (0..self.shape.len())
            .map(|k| {
                let o = match deriv {
                    Some((a, o)) if a == k => o,
                    _ => 0,
                };
                let n = self.shape[k];
                &self.rows[k][o][j * n..(j + 1) * n]
            })
            .collect()
    }

    /// `Σ_j Π_k B_k[j]` with body `axis` replaced by its order-`order`
    /// derivative rows when `deriv = Some((axis, order))`.
    pub fn tensor(&self, deriv: Option<(usize, usize)>) -> Vec<f64> {
        let mut out = vec![0.0; self.shape.iter().product()];
        for j in 0..self.rank {
            add_outer(&self.shape, &self.factors(j, deriv), &mut out);
        }
        out
    }
}

fn add_outer(shape: &[usize], f: &[&[f64]], out: &mut [f64]) {
    fn rec(level: usize, prod: f64, offset: usize, shape: &[usize], f: &[&[f64]], out: &mut [f64]) {
        let n = shape[level];
        if level + 1 == shape.len() {
            let row = &mut out[offset * n..(offset + 1) * n];
            for (o, v) in row.iter_mut().zip(f[level]) {
                *o += prod * v;
            }
            return;
        }
        for i in 0..n {
            let p = prod * f[level][i];
            if p != 0.0 {
                rec(level + 1, p, offset * n + i, shape, f, out);
            }
        }
    }
    rec(0, 1.0, 0, shape, f, out);
}

/// `out[i_k] += Σ_{other indices} cot[idx] · Π_{l≠k} f[l][i_l]`.
fn contract(shape: &[usize], cot: &[f64], k: usize, f: &[&[f64]], out: &mut [f64]) {
    #[allow(clippy::too_many_arguments)]
    fn rec(level: usize, prod: f64, offset: usize, ik: usize, k: usize, shape: &[usize], cot: &[f64], f: &[&[f64]], out: &mut [f64]) {
        let n = shape[level];
        let last = level + 1 == shape.len();
        for i in 0..n {
            let (p, ik) = if level == k { (prod, i) } else { (prod * f[level][i], ik) };
            let off = offset * n + i;
            if last {
                out[ik] += cot[off] * p;
            } else if p != 0.0 {
                rec(level + 1, p, off, ik, k, shape, cot, f, out);
            }
        }
    }
    rec(0, 1.0, 0, 0, k, shape, cot, f, out);
}

/// Product-sum model of `d` single-input bodies with `r` outputs each.
#[derive(Debug, Serialize, Deserialize)]
#[serde(try_from = "SeparableCheckpoint", into = "SeparableCheckpoint")]
pub struct SeparableModel {
    bodies: Vec<FekanModel>,
    rank: usize,
    evals: AtomicUsize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SeparableCheckpoint {
    pub rank: usize,
    pub dim: usize,
    pub bodies: Vec<FekanModel>,
}

impl TryFrom<SeparableCheckpoint> for SeparableModel {
    type Error = SeparableError;

    fn try_from(c: SeparableCheckpoint) -> Result<Self, Self::Error> {
        if c.bodies.len() != c.dim {
            return Err(SeparableError::AxisCount {
                got: c.bodies.len(),
                want: c.dim,
            });
        }
        let m = Self::new(c.bodies)?;
        if m.rank != c.rank {
            return Err(SeparableError::BodyShape {
                body: 0,
                rank: c.rank,
                inputs: 1,
                outputs: m.rank,
            });
        }
        Ok(m)
    }
}

impl From<SeparableModel> for SeparableCheckpoint {
    fn from(m: SeparableModel) -> Self {
        Self {
            rank: m.rank,
            dim: m.bodies.len(),
            bodies: m.bodies,
        }
    }
}

impl Clone for SeparableModel {
    fn clone(&self) -> Self {
        Self {
            bodies: self.bodies.clone(),
            rank: self.rank,
            evals: AtomicUsize::new(self.evals.load(Ordering::Relaxed)),
        }
    }
}

impl PartialEq for SeparableModel {
    fn eq(&self, other: &Self) -> bool {
        self.rank == other.rank && self.bodies == other.bodies
    }
}

impl SeparableModel {
    pub fn new(bodies: Vec<FekanModel>) -> Result<Self, SeparableError> {
        if bodies.len() < 2 {
            return Err(SeparableError::TooFewBodies);
        }
        let rank = bodies[0].out_dim();
        for (b, m) in bodies.iter().enumerate() {
            if m.in_dim() != 1 || m.out_dim() != rank {
                return Err(SeparableError::BodyShape {
                    body: b,
                    rank,
                    inputs: m.in_dim(),
                    outputs: m.out_dim(),
                });
            }
        }
        Ok(Self {
            bodies,
            rank,
            evals: AtomicUsize::new(0),
        })
    }

    /// Bodies `[map width, hidden.., rank]`, one per feature map, with
    /// initial parameters drawn from `seed` and the body index.
    pub fn init(maps: Vec<FeatureMap>, hidden: &[usize], rank: usize, spec: BasisSpec, seed: u64) -> Result<Self, SeparableError> {
        let bodies = maps
            .into_iter()
            .enumerate()
            .map(|(k, map)| {
                let mut widths = vec![map.out_width()];
                widths.extend_from_slice(hidden);
                widths.push(rank);
                FekanModel::init(&widths, spec, map, seed.wrapping_mul(1_000_003).wrapping_add(k as u64))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(bodies)
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn dim(&self) -> usize {
        self.bodies.len()
    }

    pub fn bodies(&self) -> &[FekanModel] {
        &self.bodies
    }

    pub fn bodies_mut(&mut self) -> &mut [FekanModel] {
        &mut self.bodies
    }

    pub fn param_count(&self) -> usize {
        self.bodies.iter().map(FekanModel::param_count).sum()
    }

    /// Start of each body's parameters in the concatenated vector.
    pub fn param_offsets(&self) -> Vec<usize> {
        self.bodies
            .iter()
            .scan(0, |acc, b| {
                let o = *acc;
                *acc += b.param_count();
                Some(o)
            })
            .collect()
    }

    /// Body forward invocations since construction or the last reset.
    pub fn body_evaluations(&self) -> usize {
        self.evals.load(Ordering::Relaxed)
    }

    pub fn reset_evaluations(&self) {
        self.evals.store(0, Ordering::Relaxed);
    }

    fn check(&self, grid: &AxisGrid) -> Result<(), SeparableError> {
        if grid.dim() != self.dim() {
            return Err(SeparableError::AxisCount {
                got: grid.dim(),
                want: self.dim(),
            });
        }
        Ok(())
    }

    /// Body rows over `grid`; `jets` also fills first and second derivatives.
    pub fn grid_jets(&self, grid: &AxisGrid, jets: bool) -> Result<GridJets, SeparableError> {
        self.check(grid)?;
        let r = self.rank;
        let rows = self
            .bodies
            .iter()
            .zip(grid.axes())
            .map(|(body, axis)| {
                let n = axis.len();
                let mut ws = body.workspace(jets as usize);
                let mut out = [vec![0.0; r * n], vec![0.0; if jets { r * n } else { 0 }], vec![0.0; if jets { r * n } else { 0 }]];
                for (i, &x) in axis.iter().enumerate() {
                    body.eval_ws(&[x], &mut ws);
                    for j in 0..r {
                        out[0][j * n + i] = ws.out_value()[j];
                        if jets {
                            out[1][j * n + i] = ws.out_grad()[j];
                            out[2][j * n + i] = ws.out_diag2()[j];
                        }
                    }
                }
                self.evals.fetch_add(n, Ordering::Relaxed);
                out
            })
            .collect();
        Ok(GridJets {
            shape: grid.shape(),
            rank: r,
            rows,
        })
    }

    /// `U[i_1..i_d] = Σ_j Π_k B_k[j][i_k]`.
    pub fn forward_grid(&self, grid: &AxisGrid) -> Result<Vec<f64>, SeparableError> {
        Ok(self.grid_jets(grid, false)?.tensor(None))
    }

    /// Order-1 or order-2 derivative of the value tensor along `axis`.
    pub fn derivative_grid(&self, grid: &AxisGrid, axis: usize, order: usize) -> Result<Vec<f64>, SeparableError> {
        if axis >= self.dim() || !(1..=2).contains(&order) {
            return Err(SeparableError::BadDerivative { axis, order });
        }
        Ok(self.grid_jets(grid, true)?.tensor(Some((axis, order))))
    }

    /// Pointwise evaluation `Σ_j Π_k f_j^(k)(x_k)`.
    pub fn forward_point(&self, x: &[f64]) -> Result<f64, SeparableError> {
        if x.len() != self.dim() {
            return Err(SeparableError::AxisCount {
                got: x.len(),
                want: self.dim(),
            });
        }
        let outs = self
            .bodies
            .iter()
            .zip(x)
            .map(|(b, &xi)| b.forward(&[xi]))
            .collect::<Result<Vec<_>, _>>()?;
        Ok((0..self.rank).map(|j| outs.iter().map(|o| o[j]).product::<f64>()).sum())
    }

    /// Accumulates into `grads` (concatenated over bodies) the gradient of
    /// `Σ_t ⟨cot_t, tensor(deriv_t)⟩` over the given terms.
    pub fn backward_terms(
        &self,
        grid: &AxisGrid,
        jets: &GridJets,
        terms: &[(Option<(usize, usize)>, &[f64])],
        grads: &mut [f64],
    ) -> Result<(), SeparableError> {
        self.check(grid)?;
        let total = grid.len();
        for (_, c) in terms {
            if c.len() != total {
                return Err(SeparableError::Shape { got: c.len(), want: total });
            }
        }
        let shape = grid.shape();
        let r = self.rank;
        let offsets = self.param_offsets();
        let needs_jets = terms.iter().any(|(d, _)| d.is_some());
        for (k, body) in self.bodies.iter().enumerate() {
            let n = shape[k];
            // cotangents of body k's rows, [order][j][i]
            let mut cb = [vec![0.0; r * n], vec![0.0; r * n], vec![0.0; r * n]];
            for (deriv, cot) in terms {
                let (o, dk) = match *deriv {
                    Some((a, o)) if a == k => (o, None),
                    other => (0, other),
                };
                for j in 0..r {
                    let f = jets.factors(j, dk);
                    contract(&shape, cot, k, &f, &mut cb[o][j * n..(j + 1) * n]);
                }
            }
            let mut ws = body.workspace(needs_jets as usize);
            let g = &mut grads[offsets[k]..offsets[k] + body.param_count()];
            for (i, &x) in grid.axes()[k].iter().enumerate() {
                body.eval_ws(&[x], &mut ws);
                let (cv, cg, ch) = body.cotangent_buffers(&mut ws);
                for j in 0..r {
                    cv[j] = cb[0][j * n + i];
                    if needs_jets {
                        cg[j] = cb[1][j * n + i];
                        ch[j] = cb[2][j * n + i];
                    }
                }
                body.backward_seeded_ws(&mut ws, g);
            }
        }
        Ok(())
    }

    /// Per-body parameter gradients of `⟨upstream, forward_grid(grid)⟩`.
    pub fn backward_grid(&self, grid: &AxisGrid, upstream: &[f64]) -> Result<Vec<ParamGrads>, SeparableError> {
        let jets = self.grid_jets(grid, false)?;
        let mut flat = vec![0.0; self.param_count()];
        self.backward_terms(grid, &jets, &[(None, upstream)], &mut flat)?;
        let offsets = self.param_offsets();
        Ok(self
            .bodies
            .iter()
            .zip(offsets)
            .map(|(b, o)| ParamGrads(flat[o..o + b.param_count()].to_vec()))
            .collect())
    }
}

impl Trainable for SeparableModel {
    fn param_len(&self) -> usize {
        self.param_count()
    }

    fn param_chunks_mut(&mut self) -> Vec<&mut [f64]> {
        self.bodies.iter_mut().map(|b| b.params.as_mut_slice()).collect()
    }
}

/// A condition imposed on a boundary-restricted grid: the value (or the
/// first derivative along `deriv_axis`) should equal `target` pointwise.
#[derive(Debug, Clone, PartialEq)]
pub struct GridCondition {
    pub grid: AxisGrid,
    pub deriv_axis: Option<usize>,
    pub target: Vec<f64>,
    pub face: Option<usize>,
}

/// Collocation grids of a separable physics-informed problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SeparablePinn {
    pub problem: PdeProblem,
    pub interior: AxisGrid,
    pub bc: Vec<GridCondition>,
    pub ic: Vec<GridCondition>,
}

fn sorted_uniform(rng: &mut ChaCha8Rng, lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let mut v: Vec<f64> = (0..n)
        .map(|_| loop {
            let x = rng.random_range(lo..hi);
            if x > lo {
                break x;
            }
        })
        .collect();
    v.sort_by(f64::total_cmp);
    v.dedup();
    v
}

impl SeparablePinn {
    /// Random sorted axes with `n_res` interior points per axis and
    /// `n_bc` points per axis on every boundary-restricted grid.
    pub fn sample(problem: &PdeProblem, n_res: usize, n_bc: usize, seed: u64) -> Result<Self, SeparableError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = &problem.bounds;
        let interior = AxisGrid::new(b.iter().map(|&(lo, hi)| sorted_uniform(&mut rng, lo, hi, n_res)).collect())?;
        let restricted = |fixed: usize, at: f64, rng: &mut ChaCha8Rng| {
            AxisGrid::new(
                b.iter()
                    .enumerate()
                    .map(|(k, &(lo, hi))| if k == fixed { vec![at] } else { sorted_uniform(rng, lo, hi, n_bc) })
                    .collect(),
            )
        };
        let mut bc = Vec::new();
        for face in 0..problem.faces() {
            let (axis, side) = (face / 2, face % 2);
            let at = if side == 0 { b[axis].0 } else { b[axis].1 };
            let grid = restricted(axis, at, &mut rng)?;
            let target = grid.points().iter().map(|p| problem.boundary_value(p)).collect();
            bc.push(GridCondition {
                grid,
                deriv_axis: None,
                target,
                face: Some(face),
            });
        }
        let mut ic = Vec::new();
        if let (Some(kind), Some(td)) = (problem.initial, problem.time_dim) {
            let grid = restricted(td, b[td].0, &mut rng)?;
            let pts = grid.points();
            let init: Vec<(f64, f64)> = pts.iter().map(|p| problem.initial_value(p)).collect();
            ic.push(GridCondition {
                grid: grid.clone(),
                deriv_axis: None,
                target: init.iter().map(|v| v.0).collect(),
                face: None,
            });
            if kind == crate::physics::InitialKind::ValueAndVelocity {
                ic.push(GridCondition {
                    grid,
                    deriv_axis: Some(td),
                    target: init.iter().map(|v| v.1).collect(),
                    face: None,
                });
            }
        }
        Ok(Self {
            problem: problem.clone(),
            interior,
            bc,
            ic,
        })
    }

    fn conditions_loss(model: &SeparableModel, conds: &[GridCondition], weight: f64, mut grads: Option<&mut [f64]>) -> Result<f64, SeparableError> {
        let total: usize = conds.iter().map(|c| c.grid.len()).sum();
        if total == 0 {
            return Ok(0.0);
        }
        let n = total as f64;
        let mut sum = 0.0;
        for c in conds {
            let jets = model.grid_jets(&c.grid, c.deriv_axis.is_some())?;
            let deriv = c.deriv_axis.map(|a| (a, 1));
            let u = jets.tensor(deriv);
            let e: Vec<f64> = u.iter().zip(&c.target).map(|(a, b)| a - b).collect();
            sum += e.iter().map(|v| v * v).sum::<f64>();
            if let Some(g) = grads.as_deref_mut() {
                let cot: Vec<f64> = e.iter().map(|v| weight * 2.0 * v / n).collect();
                model.backward_terms(&c.grid, &jets, &[(deriv, &cot)], g)?;
            }
        }
        Ok(sum / n)
    }

    /// Weighted loss with gradients written into `grads` (concatenated over
    /// bodies) when given.
    pub fn loss(&self, model: &SeparableModel, mut grads: Option<&mut [f64]>) -> Result<LossTerms, SeparableError> {
        if let Some(g) = grads.as_deref_mut() {
            g.fill(0.0);
        }
        let d = model.dim();
        let grid = &self.interior;
        let jets = model.grid_jets(grid, true)?;
        let v = jets.tensor(None);
        let gt: Vec<Vec<f64>> = (0..d).map(|k| jets.tensor(Some((k, 1)))).collect();
        let ht: Vec<Vec<f64>> = (0..d).map(|k| jets.tensor(Some((k, 2)))).collect();
        let n = grid.len();
        let w = self.problem.weights;
        let mut cv = vec![0.0; n];
        let mut cg = vec![vec![0.0; n]; d];
        let mut ch = vec![vec![0.0; n]; d];
        let mut uses_g = vec![false; d];
        let mut uses_h = vec![false; d];
        let mut sum = 0.0;
        let (mut g, mut h) = (vec![0.0; d], vec![0.0; d]);
        for idx in 0..n {
            for k in 0..d {
                g[k] = gt[k][idx];
                h[k] = ht[k][idx];
            }
            let x = grid.point(idx);
            let lin = self.problem.operator.residual(&x, v[idx], &g, &h);
            sum += lin.r * lin.r;
            let s = w.res * 2.0 * lin.r / n as f64;
            cv[idx] = s * lin.dv;
            for k in 0..d {
                cg[k][idx] = s * lin.dg[k];
                ch[k][idx] = s * lin.dh[k];
                uses_g[k] |= lin.dg[k] != 0.0;
                uses_h[k] |= lin.dh[k] != 0.0;
            }
        }
        let l_res = sum / n as f64;
        if let Some(gr) = grads.as_deref_mut() {
            let mut terms: Vec<(Option<(usize, usize)>, &[f64])> = vec![(None, &cv)];
            for k in 0..d {
                if uses_g[k] {
                    terms.push((Some((k, 1)), &cg[k]));
                }
                if uses_h[k] {
                    terms.push((Some((k, 2)), &ch[k]));
                }
            }
            model.backward_terms(grid, &jets, &terms, gr)?;
        }
        let l_bc = Self::conditions_loss(model, &self.bc, w.bc, grads.as_deref_mut())?;
        let l_ic = Self::conditions_loss(model, &self.ic, w.ic, grads.as_deref_mut())?;
        Ok(LossTerms {
            loss: w.res * l_res + w.bc * l_bc + w.ic * l_ic,
            l_res,
            l_bc,
            l_ic,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::close;
    use crate::enrich::five_per_dim;
    use crate::gradcheck::{loss_grad_pairs, max_scaled_error};

    /// Body with outputs `[x, 0, ..]`: degree-1 hats on [−1, 1] weighted by
    /// their knot abscissae reproduce `x`.
    fn identity_body(rank: usize) -> FekanModel {
        let spec = BasisSpec::spline(1, 2);
        let mut m = FekanModel::zeroed(&[1, rank], spec, FeatureMap::identity(1), false).unwrap();
        let knots = [-1.0, 0.0, 1.0];
        for (b, &t) in knots.iter().enumerate() {
            let k = m.coeff_index(0, 0, 0, b);
            m.params[k] = t;
        }
        m
    }

    fn random_sep(d: usize, rank: usize, seed: u64) -> SeparableModel {
        let maps = (0..d).map(|_| five_per_dim(1)).collect();
        let mut m = SeparableModel::init(maps, &[4], rank, BasisSpec::spline(3, 4), seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed + 77);
        for b in m.bodies_mut() {
            for p in b.params.iter_mut() {
                *p += rng.random_range(-0.3..0.3);
            }
        }
        m
    }

    fn grid3(n: usize) -> AxisGrid {
        AxisGrid::new(
            (0..3)
                .map(|k| (0..n).map(|i| -0.8 + 1.5 * i as f64 / n as f64 + 0.03 * k as f64).collect())
                .collect(),
        )
        .unwrap()
    }

    #[test]
    fn identity_bodies_give_outer_product() {
        let m = SeparableModel::new(vec![identity_body(1); 3]).unwrap();
        let g = grid3(3);
        let u = m.forward_grid(&g).unwrap();
        for (idx, p) in g.points().iter().enumerate() {
            assert!((u[idx] - p[0] * p[1] * p[2]).abs() < 1e-14);
        }
        let dx = m.derivative_grid(&g, 0, 1).unwrap();
        for (idx, p) in g.points().iter().enumerate() {
            assert!((dx[idx] - p[1] * p[2]).abs() < 1e-14);
        }
        assert!(m.derivative_grid(&g, 0, 2).unwrap().iter().all(|v| *v == 0.0));
    }

    #[test]
    fn zero_component_matches_rank_one() {
        let one = SeparableModel::new(vec![identity_body(1); 2]).unwrap();
        let b = identity_body(2);
        let two = SeparableModel::new(vec![b.clone(), b]).unwrap();
        let g = AxisGrid::new(vec![vec![-0.5, 0.1, 0.7], vec![-0.2, 0.4]]).unwrap();
        assert_eq!(one.forward_grid(&g).unwrap(), two.forward_grid(&g).unwrap());
    }

    #[test]
    fn grid_matches_pointwise_and_counts_evaluations() {
        let m = random_sep(3, 3, 1);
        let g = AxisGrid::new(vec![vec![-0.9, -0.1, 0.3, 0.8], vec![-0.5, 0.0, 0.2, 0.6], vec![-0.7, -0.3, 0.4, 0.95]]).unwrap();
        m.reset_evaluations();
        let u = m.forward_grid(&g).unwrap();
        assert_eq!(m.body_evaluations(), 12);
        for (idx, p) in g.points().iter().enumerate() {
            assert!((u[idx] - m.forward_point(p).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn derivative_matches_finite_differences() {
        let m = random_sep(3, 3, 2);
        let g = grid3(3);
        for axis in 0..3 {
            let d1 = m.derivative_grid(&g, axis, 1).unwrap();
            let d2 = m.derivative_grid(&g, axis, 2).unwrap();
            for (idx, p) in g.points().iter().enumerate() {
                let h = 1e-4;
                let f = |s: f64| {
                    let mut q = p.clone();
                    q[axis] += s;
                    m.forward_point(&q).unwrap()
                };
                let fd1 = (f(h) - f(-h)) / (2.0 * h);
                let fd2 = (f(h) - 2.0 * f(0.0) + f(-h)) / (h * h);
                assert!(close(d1[idx], fd1, 1e-5, 1e-7), "{} {}", d1[idx], fd1);
                assert!(close(d2[idx], fd2, 1e-3, 1e-4), "{} {}", d2[idx], fd2);
            }
        }
    }

    #[test]
    fn backward_examples() {
        let m = random_sep(2, 2, 3);
        let g = AxisGrid::new(vec![vec![0.3], vec![-0.4]]).unwrap();
        let z = m.backward_grid(&g, &[0.0]).unwrap();
        assert!(z.iter().all(|p| p.0.iter().all(|v| *v == 0.0)));
        // rank-1 product rule on a single point
        let m1 = random_sep(2, 1, 4);
        let gr = m1.backward_grid(&g, &[1.0]).unwrap();
        let f = m1.bodies()[0].forward(&[0.3]).unwrap()[0];
        let h = m1.bodies()[1].forward(&[-0.4]).unwrap()[0];
        let df = m1.bodies()[0].backward(&[0.3], &[1.0]).unwrap();
        let dh = m1.bodies()[1].backward(&[-0.4], &[1.0]).unwrap();
        for (a, b) in gr[0].0.iter().zip(&df.0) {
            assert!((a - h * b).abs() < 1e-14);
        }
        for (a, b) in gr[1].0.iter().zip(&dh.0) {
            assert!((a - f * b).abs() < 1e-14);
        }
    }

    #[test]
    fn backward_matches_finite_differences() {
        let m = random_sep(3, 3, 5);
        let g = grid3(3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let up: Vec<f64> = (0..g.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let analytic: Vec<f64> = m.backward_grid(&g, &up).unwrap().into_iter().flat_map(|p| p.0).collect();
        let offsets = m.param_offsets();
        let mut flat: Vec<f64> = m.bodies().iter().flat_map(|b| b.params.clone()).collect();
        let (a, fd) = loss_grad_pairs(
            &mut flat,
            &analytic,
            |p| {
                let mut mm = m.clone();
                for (k, b) in mm.bodies_mut().iter_mut().enumerate() {
                    let n = b.param_count();
                    b.params.copy_from_slice(&p[offsets[k]..offsets[k] + n]);
                }
                mm.forward_grid(&g).unwrap().iter().zip(&up).map(|(u, c)| u * c).sum()
            },
            80,
            9,
            1e-6,
        );
        assert!(max_scaled_error(&a, &fd, 1e-3) < 1e-4);
    }

    #[test]
    fn errors() {
        let m = random_sep(2, 2, 0);
        assert!(matches!(m.forward_grid(&grid3(2)), Err(SeparableError::AxisCount { .. })));
        assert!(AxisGrid::new(vec![vec![0.0, 0.0]]).is_err());
        assert!(AxisGrid::new(vec![vec![]]).is_err());
        let g = AxisGrid::new(vec![vec![0.0], vec![0.1]]).unwrap();
        assert!(m.derivative_grid(&g, 2, 1).is_err());
        assert!(m.derivative_grid(&g, 0, 3).is_err());
        assert!(m.backward_grid(&g, &[1.0, 2.0]).is_err());
        assert!(SeparableModel::new(vec![identity_body(1)]).is_err());
    }

    #[test]
    fn checkpoint_round_trip() {
        let m = random_sep(3, 2, 8);
        let s = serde_json::to_string(&m).unwrap();
        let back: SeparableModel = serde_json::from_str(&s).unwrap();
        assert_eq!(back, m);
    }
}
