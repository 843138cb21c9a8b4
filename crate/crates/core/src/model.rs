//! KAN layers stacked behind a feature map.
//!
//! Parameters live in one flat vector. Per layer the layout is
//! `coeff[out][in][card]`, then `base_weight[out][in]` when the SiLU
//! residual path is on, then `tau[out][in]` and `scale[out][in]` for the
//! wavelet family. [`ParamGrads`] uses the same layout.
//!
//! Evaluation always carries second-order jets with respect to the raw
//! inputs; with zero jet width it degenerates to plain evaluation, so the
//! value channel of [`FekanModel::forward_jet`] is computed by exactly the
//! same arithmetic as [`FekanModel::forward`].

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::basis::{dog, BasisError, BasisKind, BasisSpec, Window};
use crate::diffcore::Jet2;
use crate::enrich::{EnrichError, FeatureMap};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("layer widths must be non-empty and positive, got {0:?}")]
    BadWidths(Vec<usize>),
    #[error("feature map emits {map} features but the first layer takes {layer}")]
    MapWidth { map: usize, layer: usize },
    #[error("input has {got} coordinates, model expects {want}")]
    InputDim { got: usize, want: usize },
    #[error("non-finite activation after layer {layer}")]
    NonFinite { layer: usize },
    #[error("shape mismatch: {what} has length {got}, expected {want}")]
    Shape { what: &'static str, got: usize, want: usize },
    #[error(transparent)]
    Basis(#[from] BasisError),
    #[error(transparent)]
    Enrich(#[from] EnrichError),
}

/// Gradient of a scalar with respect to every model parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrads(pub Vec<f64>);

impl ParamGrads {
    pub fn zeros(n: usize) -> Self {
        Self(vec![0.0; n])
    }

    pub fn dot(&self, other: &ParamGrads) -> f64 {
        self.0.iter().zip(&other.0).map(|(a, b)| a * b).sum()
    }
}

/// Selects one jet channel of every output.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Channel {
    Value,
    Grad(usize),
    Diag2(usize),
}

/// Upstream sensitivities for every channel of the output jets.
/// `grad` and `diag2` are `[out][d]` row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct JetCotangent {
    pub value: Vec<f64>,
    pub grad: Vec<f64>,
    pub diag2: Vec<f64>,
}

impl JetCotangent {
    pub fn zeros(out: usize, d: usize) -> Self {
        Self {
            value: vec![0.0; out],
            grad: vec![0.0; out * d],
            diag2: vec![0.0; out * d],
        }
    }

    /// `upstream[j]` placed on `channel` of output `j`.
    pub fn on_channel(channel: Channel, upstream: &[f64], d: usize) -> Self {
        let mut c = Self::zeros(upstream.len(), d);
        for (j, &u) in upstream.iter().enumerate() {
            match channel {
                Channel::Value => c.value[j] = u,
                Channel::Grad(k) => c.grad[j * d + k] = u,
                Channel::Diag2(k) => c.diag2[j * d + k] = u,
            }
        }
        c
    }
}

/// `[silu, silu', silu'', silu''']` at `z`.
#[inline]
pub fn silu(z: f64) -> [f64; 4] {
    let s = 1.0 / (1.0 + (-z).exp());
    let sp = s * (1.0 - s);
    let a = 1.0 - 2.0 * s;
    [
        z * s,
        s + z * sp,
        sp * (2.0 + z * a),
        sp * (a * (3.0 + z * a) - 2.0 * z * sp),
    ]
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct LayerLayout {
    inw: usize,
    outw: usize,
    coeff: usize,
    base: Option<usize>,
    tau: Option<usize>,
    scale: Option<usize>,
    end: usize,
}

/// Serialized form: header plus the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub widths: Vec<usize>,
    pub spec: BasisSpec,
    pub map: FeatureMap,
    pub base: bool,
    pub params: Vec<f64>,
}

/// A KAN (identity map) or FEKAN (enriching map).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Checkpoint", into = "Checkpoint")]
pub struct FekanModel {
    map: FeatureMap,
    widths: Vec<usize>,
    spec: BasisSpec,
    base: bool,
    layout: Vec<LayerLayout>,
    pub params: Vec<f64>,
}

impl From<FekanModel> for Checkpoint {
    fn from(m: FekanModel) -> Self {
        Self {
            widths: m.widths,
            spec: m.spec,
            map: m.map,
            base: m.base,
            params: m.params,
        }
    }
}

impl TryFrom<Checkpoint> for FekanModel {
    type Error = ModelError;

    fn try_from(c: Checkpoint) -> Result<Self, Self::Error> {
        let mut m = Self::zeroed(&c.widths, c.spec, c.map, c.base)?;
        if c.params.len() != m.params.len() {
            return Err(ModelError::Shape {
                what: "params",
                got: c.params.len(),
                want: m.params.len(),
            });
        }
        m.params = c.params;
        Ok(m)
    }
}

/// Whether the SiLU residual path is on by default for `spec`.
pub fn default_base(spec: &BasisSpec) -> bool {
    matches!(spec.kind, BasisKind::Spline { .. })
}

impl FekanModel {
    /// A model with every parameter zero except wavelet scales, which are 1.
    /// `widths[0]` is the feature-map output width.
    pub fn zeroed(widths: &[usize], spec: BasisSpec, map: FeatureMap, base: bool) -> Result<Self, ModelError> {
        if widths.len() < 2 || widths.contains(&0) {
            return Err(ModelError::BadWidths(widths.to_vec()));
        }
        if map.out_width() != widths[0] {
            return Err(ModelError::MapWidth {
                map: map.out_width(),
                layer: widths[0],
            });
        }
        spec.validate()?;
        let card = spec.cardinality();
        let wavelet = spec.kind == BasisKind::WaveletDoG;
        let mut off = 0;
        let mut layout = Vec::with_capacity(widths.len() - 1);
        for w in widths.windows(2) {
            let (inw, outw) = (w[0], w[1]);
            let edges = inw * outw;
            let coeff = off;
            off += edges * card;
            let base_off = base.then(|| {
                off += edges;
                off - edges
            });
            let (tau, scale) = if wavelet {
                off += 2 * edges;
                (Some(off - 2 * edges), Some(off - edges))
            } else {
                (None, None)
            };
            layout.push(LayerLayout {
                inw,
                outw,
                coeff,
                base: base_off,
                tau,
                scale,
                end: off,
            });
        }
        let mut params = vec![0.0; off];
        for l in &layout {
            if let Some(s) = l.scale {
                params[s..s + l.inw * l.outw].fill(1.0);
            }
        }
        Ok(Self {
            map,
            widths: widths.to_vec(),
            spec,
            base,
            layout,
            params,
        })
    }

    /// Seeded random initialization.
    ///
    /// Coefficients are drawn from `N(0, (0.1/√card)²)`, base weights from
    /// `U(−a, a)` with `a = √(6/(in+out))`, wavelet translations start at 0
    /// and scales at 1.
    pub fn init(widths: &[usize], spec: BasisSpec, map: FeatureMap, seed: u64) -> Result<Self, ModelError> {
        Self::init_with_base(widths, spec, map, default_base(&spec), seed)
    }

    pub fn init_with_base(
        widths: &[usize],
        spec: BasisSpec,
        map: FeatureMap,
        base: bool,
        seed: u64,
    ) -> Result<Self, ModelError> {
        let mut m = Self::zeroed(widths, spec, map, base)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let sd = 0.1 / (spec.cardinality() as f64).sqrt();
        let normal = Normal::new(0.0, sd).expect("positive std");
        for l in m.layout.clone() {
            let edges = l.inw * l.outw;
            let end = l.coeff + edges * spec.cardinality();
            for p in &mut m.params[l.coeff..end] {
                *p = normal.sample(&mut rng);
            }
            if let Some(b) = l.base {
                let a = (6.0 / (l.inw + l.outw) as f64).sqrt();
                for p in &mut m.params[b..b + edges] {
                    *p = rng.random_range(-a..a);
                }
            }
        }
        Ok(m)
    }

    pub fn widths(&self) -> &[usize] {
        &self.widths
    }

    pub fn spec(&self) -> &BasisSpec {
        &self.spec
    }

    pub fn map(&self) -> &FeatureMap {
        &self.map
    }

    pub fn has_base(&self) -> bool {
        self.base
    }

    pub fn in_dim(&self) -> usize {
        self.map.in_dim()
    }

    pub fn out_dim(&self) -> usize {
        *self.widths.last().expect("at least two widths")
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn num_layers(&self) -> usize {
        self.layout.len()
    }

    /// Flat index of `coeff[j][i][b]` in layer `l`.
    pub fn coeff_index(&self, l: usize, j: usize, i: usize, b: usize) -> usize {
        let ly = &self.layout[l];
        ly.coeff + (j * ly.inw + i) * self.spec.cardinality() + b
    }

    pub fn base_index(&self, l: usize, j: usize, i: usize) -> Option<usize> {
        let ly = &self.layout[l];
        ly.base.map(|o| o + j * ly.inw + i)
    }

    pub fn tau_index(&self, l: usize, j: usize, i: usize) -> Option<usize> {
        let ly = &self.layout[l];
        ly.tau.map(|o| o + j * ly.inw + i)
    }

    pub fn scale_index(&self, l: usize, j: usize, i: usize) -> Option<usize> {
        let ly = &self.layout[l];
        ly.scale.map(|o| o + j * ly.inw + i)
    }

    /// Parameter range owned by layer `l`.
    pub fn layer_range(&self, l: usize) -> std::ops::Range<usize> {
        let start = if l == 0 { 0 } else { self.layout[l - 1].end };
        start..self.layout[l].end
    }

    /// Scratch space for evaluating this model with jets of width `d`
    /// (`d = 0` for plain evaluation).
    pub fn workspace(&self, d: usize) -> Workspace {
        Workspace {
            d,
            v: self.widths.iter().map(|&w| vec![0.0; w]).collect(),
            g: self.widths.iter().map(|&w| vec![0.0; w * d]).collect(),
            h: self.widths.iter().map(|&w| vec![0.0; w * d]).collect(),
            windows: self.widths[..self.widths.len() - 1]
                .iter()
                .map(|&w| (0..w).map(|_| self.spec.new_window()).collect())
                .collect(),
            silu: self.widths[..self.widths.len() - 1]
                .iter()
                .map(|&w| vec![[0.0; 4]; w])
                .collect(),
            edge: self.layout.iter().map(|l| vec![[0.0; 4]; l.inw * l.outw]).collect(),
            wav: self.layout.iter().map(|l| vec![[0.0; 5]; l.inw * l.outw]).collect(),
            cv: self.widths.iter().map(|&w| vec![0.0; w]).collect(),
            cg: self.widths.iter().map(|&w| vec![0.0; w * d]).collect(),
            ch: self.widths.iter().map(|&w| vec![0.0; w * d]).collect(),
            feat_d1: vec![0.0; self.widths[0]],
            feat_d2: vec![0.0; self.widths[0]],
        }
    }

    /// Evaluates the model at `x` into `ws`, carrying jets of width `ws.d`.
    /// No finiteness checks; outputs are `ws.out_value()` etc.
    pub fn eval_ws(&self, x: &[f64], ws: &mut Workspace) {
        let d = ws.d;
        let w0 = self.widths[0];
        self.map.apply_into(x, &mut ws.v[0], &mut ws.feat_d1, &mut ws.feat_d2);
        if d > 0 {
            ws.g[0].fill(0.0);
            ws.h[0].fill(0.0);
            for f in 0..w0 {
                let k = self.map.source(f);
                ws.g[0][f * d + k] = ws.feat_d1[f];
                ws.h[0][f * d + k] = ws.feat_d2[f];
            }
        }
        let card = self.spec.cardinality();
        let wavelet = self.spec.kind == BasisKind::WaveletDoG;
        let order = if d > 0 { 3 } else { 1 };
        for (l, ly) in self.layout.iter().enumerate() {
            let (lower, upper) = ws.v.split_at_mut(l + 1);
            let zin = &lower[l];
            let zout = &mut upper[0];
            let (gl, gu) = ws.g.split_at_mut(l + 1);
            let (gin, gout) = (&gl[l], &mut gu[0]);
            let (hl, hu) = ws.h.split_at_mut(l + 1);
            let (hin, hout) = (&hl[l], &mut hu[0]);
            let windows = &mut ws.windows[l];
            let silus = &mut ws.silu[l];
            for i in 0..ly.inw {
                if !wavelet {
                    self.spec.eval_window_to(zin[i], order, &mut windows[i]);
                }
                if ly.base.is_some() {
                    silus[i] = silu(zin[i]);
                }
            }
            zout.fill(0.0);
            gout.fill(0.0);
            hout.fill(0.0);
            let edge = &mut ws.edge[l];
            let wav = &mut ws.wav[l];
            for j in 0..ly.outw {
                let mut acc = 0.0;
                for i in 0..ly.inw {
                    let e = j * ly.inw + i;
                    let mut s = [0.0; 4];
                    if wavelet {
                        let c = self.params[ly.coeff + e];
                        let tau = self.params[ly.tau.expect("wavelet layout") + e];
                        let sc = self.params[ly.scale.expect("wavelet layout") + e];
                        let u = (zin[i] - tau) / sc;
                        let psi = dog(u);
                        let inv = 1.0 / sc;
                        s = [c * psi[0], c * psi[1] * inv, c * psi[2] * inv * inv, c * psi[3] * inv * inv * inv];
                        wav[e] = [u, psi[0], psi[1], psi[2], psi[3]];
                    } else {
                        let w = &windows[i];
                        let cs = &self.params[ly.coeff + e * card + w.start..ly.coeff + e * card + w.start + w.len];
                        for (r, &c) in cs.iter().enumerate() {
                            s[0] += c * w.phi[r];
                            s[1] += c * w.d1[r];
                            s[2] += c * w.d2[r];
                            s[3] += c * w.d3[r];
                        }
                    }
                    if let Some(b) = ly.base {
                        let wb = self.params[b + e];
                        let sl = &silus[i];
                        for m in 0..4 {
                            s[m] += wb * sl[m];
                        }
                    }
                    edge[e] = s;
                    acc += s[0];
                    if d > 0 {
                        let gi = &gin[i * d..(i + 1) * d];
                        let hi = &hin[i * d..(i + 1) * d];
                        let go = &mut gout[j * d..(j + 1) * d];
                        let ho = &mut hout[j * d..(j + 1) * d];
                        for k in 0..d {
                            go[k] += s[1] * gi[k];
                            ho[k] += s[2] * gi[k] * gi[k] + s[1] * hi[k];
                        }
                    }
                }
                zout[j] = acc;
            }
        }
    }

    /// Accumulates into `grads` the parameter gradient of
    /// `⟨cotangent, output jets⟩` for the point last evaluated in `ws`.
    pub fn backward_ws(&self, ws: &mut Workspace, cot: &JetCotangent, grads: &mut [f64]) {
        let nl = self.layout.len();
        let d = ws.d;
        ws.cv[nl].copy_from_slice(&cot.value);
        ws.cg[nl].copy_from_slice(&cot.grad);
        ws.ch[nl].copy_from_slice(&cot.diag2);
        self.backward_from_ws(ws, grads, d);
    }

    /// As [`FekanModel::backward_ws`] with a value-only cotangent.
    pub fn backward_value_ws(&self, ws: &mut Workspace, upstream: &[f64], grads: &mut [f64]) {
        let nl = self.layout.len();
        let d = ws.d;
        ws.cv[nl].copy_from_slice(upstream);
        ws.cg[nl].fill(0.0);
        ws.ch[nl].fill(0.0);
        self.backward_from_ws(ws, grads, d);
    }

    /// Mutable access to the output cotangent buffers `(value, grad, diag2)`;
    /// fill them, then call [`FekanModel::backward_seeded_ws`].
    pub fn cotangent_buffers<'a>(&self, ws: &'a mut Workspace) -> (&'a mut [f64], &'a mut [f64], &'a mut [f64]) {
        let nl = self.layout.len();
        (&mut ws.cv[nl], &mut ws.cg[nl], &mut ws.ch[nl])
    }

    pub fn backward_seeded_ws(&self, ws: &mut Workspace, grads: &mut [f64]) {
        let d = ws.d;
        self.backward_from_ws(ws, grads, d);
    }

    fn backward_from_ws(&self, ws: &mut Workspace, grads: &mut [f64], d: usize) {
        let card = self.spec.cardinality();
        let wavelet = self.spec.kind == BasisKind::WaveletDoG;
        for l in (0..self.layout.len()).rev() {
            let ly = &self.layout[l];
            let need_input = l > 0;
            let (cvl, cvu) = ws.cv.split_at_mut(l + 1);
            let (zv, yv) = (&mut cvl[l], &cvu[0]);
            let (cgl, cgu) = ws.cg.split_at_mut(l + 1);
            let (zg, yg) = (&mut cgl[l], &cgu[0]);
            let (chl, chu) = ws.ch.split_at_mut(l + 1);
            let (zh, yh) = (&mut chl[l], &chu[0]);
            if need_input {
                zv.fill(0.0);
                zg.fill(0.0);
                zh.fill(0.0);
            }
            let gin = &ws.g[l];
            let hin = &ws.h[l];
            let windows = &ws.windows[l];
            let silus = &ws.silu[l];
            let edge = &ws.edge[l];
            let wav = &ws.wav[l];
            for j in 0..ly.outw {
                let vbar = yv[j];
                let gbar = &yg[j * d..(j + 1) * d];
                let hbar = &yh[j * d..(j + 1) * d];
                for i in 0..ly.inw {
                    let e = j * ly.inw + i;
                    let gi = &gin[i * d..(i + 1) * d];
                    let hi = &hin[i * d..(i + 1) * d];
                    let mut s1b = 0.0;
                    let mut s2b = 0.0;
                    for k in 0..d {
                        s1b += gbar[k] * gi[k] + hbar[k] * hi[k];
                        s2b += hbar[k] * gi[k] * gi[k];
                    }
                    let s0b = vbar;
                    if wavelet {
                        let c = self.params[ly.coeff + e];
                        let sc = self.params[ly.scale.expect("wavelet layout") + e];
                        let [u, p0, p1, p2, p3] = wav[e];
                        let inv = 1.0 / sc;
                        grads[ly.coeff + e] += s0b * p0 + s1b * p1 * inv + s2b * p2 * inv * inv;
                        // S_m = c ψ^(m)(u) / s^m with u = (z − τ)/s
                        let ws_ = [c * p0, c * p1 * inv, c * p2 * inv * inv, c * p3 * inv * inv * inv];
                        grads[ly.tau.expect("wavelet layout") + e] -= s0b * ws_[1] + s1b * ws_[2] + s2b * ws_[3];
                        let ds0 = -c * inv * (u * p1);
                        let ds1 = -c * inv * inv * (u * p2 + p1);
                        let ds2 = -c * inv * inv * inv * (u * p3 + 2.0 * p2);
                        grads[ly.scale.expect("wavelet layout") + e] += s0b * ds0 + s1b * ds1 + s2b * ds2;
                    } else {
                        let w = &windows[i];
                        let g = &mut grads[ly.coeff + e * card + w.start..ly.coeff + e * card + w.start + w.len];
                        for (r, gr) in g.iter_mut().enumerate() {
                            *gr += s0b * w.phi[r] + s1b * w.d1[r] + s2b * w.d2[r];
                        }
                    }
                    if let Some(b) = ly.base {
                        let sl = &silus[i];
                        grads[b + e] += s0b * sl[0] + s1b * sl[1] + s2b * sl[2];
                    }
                    if need_input {
                        let s = &edge[e];
                        zv[i] += s0b * s[1] + s1b * s[2] + s2b * s[3];
                        let zgi = &mut zg[i * d..(i + 1) * d];
                        let zhi = &mut zh[i * d..(i + 1) * d];
                        for k in 0..d {
                            zgi[k] += gbar[k] * s[1] + 2.0 * hbar[k] * s[2] * gi[k];
                            zhi[k] += hbar[k] * s[1];
                        }
                    }
                }
            }
        }
    }

    fn check_input(&self, x: &[f64]) -> Result<(), ModelError> {
        if x.len() != self.in_dim() {
            return Err(ModelError::InputDim {
                got: x.len(),
                want: self.in_dim(),
            });
        }
        Ok(())
    }

    fn check_finite(&self, ws: &Workspace) -> Result<(), ModelError> {
        for l in 1..ws.v.len() {
            let finite = ws.v[l].iter().chain(&ws.g[l]).chain(&ws.h[l]).all(|v| v.is_finite());
            if !finite {
                return Err(ModelError::NonFinite { layer: l - 1 });
            }
        }
        Ok(())
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, ModelError> {
        self.check_input(x)?;
        let mut ws = self.workspace(0);
        self.eval_ws(x, &mut ws);
        self.check_finite(&ws)?;
        Ok(ws.out_value().to_vec())
    }

    pub fn forward_jet(&self, x: &[f64]) -> Result<Vec<Jet2>, ModelError> {
        self.check_input(x)?;
        let mut ws = self.workspace(x.len());
        self.eval_ws(x, &mut ws);
        self.check_finite(&ws)?;
        Ok(ws.out_jets())
    }

    /// Gradient of `upstream · forward(x)` with respect to every parameter.
    pub fn backward(&self, x: &[f64], upstream: &[f64]) -> Result<ParamGrads, ModelError> {
        self.check_input(x)?;
        if upstream.len() != self.out_dim() {
            return Err(ModelError::Shape {
                what: "upstream",
                got: upstream.len(),
                want: self.out_dim(),
            });
        }
        let mut ws = self.workspace(0);
        self.eval_ws(x, &mut ws);
        let mut g = ParamGrads::zeros(self.param_count());
        self.backward_value_ws(&mut ws, upstream, &mut g.0);
        Ok(g)
    }

    /// Gradient of `⟨cot, forward_jet(x)⟩` with respect to every parameter.
    pub fn backward_through_jets(&self, x: &[f64], cot: &JetCotangent) -> Result<ParamGrads, ModelError> {
        self.check_input(x)?;
        let (out, d) = (self.out_dim(), x.len());
        for (what, got, want) in [
            ("cotangent value", cot.value.len(), out),
            ("cotangent grad", cot.grad.len(), out * d),
            ("cotangent diag2", cot.diag2.len(), out * d),
        ] {
            if got != want {
                return Err(ModelError::Shape { what, got, want });
            }
        }
        let mut ws = self.workspace(d);
        self.eval_ws(x, &mut ws);
        let mut g = ParamGrads::zeros(self.param_count());
        self.backward_ws(&mut ws, cot, &mut g.0);
        Ok(g)
    }

    /// Gradient of one jet channel, weighted per output by `upstream`.
    pub fn backward_channel(&self, x: &[f64], channel: Channel, upstream: &[f64]) -> Result<ParamGrads, ModelError> {
        self.backward_through_jets(x, &JetCotangent::on_channel(channel, upstream, x.len()))
    }
}

/// Preallocated buffers for one evaluation and its reverse pass.
#[derive(Debug, Clone)]
pub struct Workspace {
    d: usize,
    v: Vec<Vec<f64>>,
    g: Vec<Vec<f64>>,
    h: Vec<Vec<f64>>,
    windows: Vec<Vec<Window>>,
    silu: Vec<Vec<[f64; 4]>>,
    edge: Vec<Vec<[f64; 4]>>,
    wav: Vec<Vec<[f64; 5]>>,
    cv: Vec<Vec<f64>>,
    cg: Vec<Vec<f64>>,
    ch: Vec<Vec<f64>>,
    feat_d1: Vec<f64>,
    feat_d2: Vec<f64>,
}

impl Workspace {
    pub fn jet_dim(&self) -> usize {
        self.d
    }

    pub fn out_value(&self) -> &[f64] {
        self.v.last().expect("non-empty")
    }

    /// Output gradients, `[out][d]` row-major.
    pub fn out_grad(&self) -> &[f64] {
        self.g.last().expect("non-empty")
    }

    /// Output pure second derivatives, `[out][d]` row-major.
    pub fn out_diag2(&self) -> &[f64] {
        self.h.last().expect("non-empty")
    }

    pub fn out_jets(&self) -> Vec<Jet2> {
        let d = self.d;
        let (v, g, h) = (self.out_value(), self.out_grad(), self.out_diag2());
        (0..v.len())
            .map(|j| Jet2 {
                value: v[j],
                grad: g[j * d..(j + 1) * d].to_vec(),
                diag2: h[j * d..(j + 1) * d].to_vec(),
            })
            .collect()
    }
}
