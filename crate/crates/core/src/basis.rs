//! Univariate basis families used on KAN edges.
//!
//! Every family is evaluated analytically together with its first three
//! derivatives. The third derivative is needed by the reverse pass through
//! second-order jets. Evaluation is "windowed": only the contiguous block of
//! possibly-nonzero functions is written, which keeps the compact-support
//! families cheap at large grid sizes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::Jet2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum BasisError {
    #[error("non-finite basis input {0}")]
    NonFinite(f64),
    #[error("invalid basis parameters: {0}")]
    InvalidSpec(String),
    #[error("non-finite derivative of basis function {index} at x={x}")]
    NonFiniteDerivative { index: usize, x: f64 },
}

/// Family and family-specific sizes.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BasisKind {
    Spline { k: usize, g: usize },
    Fourier { n: usize },
    Chebyshev { k: usize },
    Rbf { n_f: usize },
    Relu { k: usize, g: usize },
    #[serde(rename = "hrelu")]
    HRelu { k: usize, g: usize, n: u32 },
    #[serde(rename = "wavelet_dog")]
    WaveletDoG,
}

fn default_lo() -> f64 {
    -1.0
}

fn default_hi() -> f64 {
    1.0
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BasisSpec {
    #[serde(flatten)]
    pub kind: BasisKind,
    #[serde(default = "default_lo")]
    pub domain_lo: f64,
    #[serde(default = "default_hi")]
    pub domain_hi: f64,
}

/// Full-length basis values and derivatives at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisValues {
    pub phi: Vec<f64>,
    pub dphi: Vec<f64>,
    pub d2phi: Vec<f64>,
}

/// Values and derivatives of the block `start..start+len` of basis functions.
/// Functions outside the block are zero at the evaluation point.
#[derive(Debug, Clone)]
pub struct Window {
    pub start: usize,
    pub len: usize,
    pub phi: Vec<f64>,
    pub d1: Vec<f64>,
    pub d2: Vec<f64>,
    pub d3: Vec<f64>,
    scratch: Vec<f64>,
}

impl Window {
    pub fn new(capacity: usize) -> Self {
        Self {
            start: 0,
            len: 0,
            phi: vec![0.0; capacity],
            d1: vec![0.0; capacity],
            d2: vec![0.0; capacity],
            d3: vec![0.0; capacity],
            scratch: Vec::new(),
        }
    }

    fn fill_nan(&mut self, len: usize) {
        self.start = 0;
        self.len = len;
        for buf in [&mut self.phi, &mut self.d1, &mut self.d2, &mut self.d3] {
            buf[..len].iter_mut().for_each(|v| *v = f64::NAN);
        }
    }
}

/// `ψ(u) = −u·exp(−u²/2)` and its first three derivatives.
pub fn dog(u: f64) -> [f64; 4] {
    let e = (-0.5 * u * u).exp();
    let u2 = u * u;
    [
        -u * e,
        (u2 - 1.0) * e,
        (3.0 * u - u2 * u) * e,
        (u2 * u2 - 6.0 * u2 + 3.0) * e,
    ]
}

/// Uniform knots on `[lo, hi]` extended by `k` knots on each side.
pub fn spline_knots(g: usize, k: usize, lo: f64, hi: f64) -> Result<Vec<f64>, BasisError> {
    if g < 1 || k < 1 {
        return Err(BasisError::InvalidSpec(format!("spline needs G>=1, k>=1, got G={g}, k={k}")));
    }
    if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
        return Err(BasisError::InvalidSpec(format!("invalid bounds [{lo}, {hi}]")));
    }
    let h = (hi - lo) / g as f64;
    Ok((0..g + 2 * k + 1)
        .map(|j| lo + (j as f64 - k as f64) * h)
        .collect())
}

impl BasisSpec {
    pub fn new(kind: BasisKind) -> Self {
        Self {
            kind,
            domain_lo: -1.0,
            domain_hi: 1.0,
        }
    }

    pub fn spline(k: usize, g: usize) -> Self {
        Self::new(BasisKind::Spline { k, g })
    }

    pub fn fourier(n: usize) -> Self {
        Self::new(BasisKind::Fourier { n })
    }

    pub fn chebyshev(k: usize) -> Self {
        Self::new(BasisKind::Chebyshev { k })
    }

    pub fn rbf(n_f: usize) -> Self {
        Self::new(BasisKind::Rbf { n_f })
    }

    pub fn relu(k: usize, g: usize) -> Self {
        Self::new(BasisKind::Relu { k, g })
    }

    pub fn hrelu(k: usize, g: usize, n: u32) -> Self {
        Self::new(BasisKind::HRelu { k, g, n })
    }

    pub fn wavelet() -> Self {
        Self::new(BasisKind::WaveletDoG)
    }

    pub fn with_domain(mut self, lo: f64, hi: f64) -> Self {
        self.domain_lo = lo;
        self.domain_hi = hi;
        self
    }

    pub fn validate(&self) -> Result<(), BasisError> {
        let bad = |msg: String| Err(BasisError::InvalidSpec(msg));
        if !(self.domain_lo < self.domain_hi) {
            return bad(format!("domain [{}, {}]", self.domain_lo, self.domain_hi));
        }
        match self.kind {
            BasisKind::Spline { k, g } | BasisKind::Relu { k, g } if k < 1 || g < 1 => {
                bad(format!("k={k}, G={g}"))
            }
            BasisKind::HRelu { k, g, n } if k < 1 || g < 1 || n < 2 => {
                bad(format!("k={k}, G={g}, n={n}"))
            }
            BasisKind::Rbf { n_f } if n_f < 2 => bad(format!("N_f={n_f}")),
            _ => Ok(()),
        }
    }

    pub fn cardinality(&self) -> usize {
        match self.kind {
            BasisKind::Spline { k, g } | BasisKind::Relu { k, g } | BasisKind::HRelu { k, g, .. } => g + k,
            BasisKind::Fourier { n } => 2 * n + 1,
            BasisKind::Chebyshev { k } => k + 1,
            BasisKind::Rbf { n_f } => n_f,
            BasisKind::WaveletDoG => 1,
        }
    }

    /// Upper bound on the window length returned by [`BasisSpec::eval_window`].
    pub fn window_capacity(&self) -> usize {
        match self.kind {
            BasisKind::Spline { k, .. } | BasisKind::Relu { k, .. } | BasisKind::HRelu { k, .. } => {
                (k + 1).min(self.cardinality())
            }
            _ => self.cardinality(),
        }
    }

    pub fn new_window(&self) -> Window {
        Window::new(self.window_capacity())
    }

    /// Whether inputs are clamped to the domain before evaluation.
    pub fn clamps(&self) -> bool {
        matches!(
            self.kind,
            BasisKind::Spline { .. } | BasisKind::Relu { .. } | BasisKind::HRelu { .. } | BasisKind::Rbf { .. }
        )
    }

    /// Writes the active block of basis values and derivatives at `x`.
    ///
    /// Never fails: a non-finite `x` yields NaN outputs, and Chebyshev
    /// derivatives become NaN once `tanh(x)` rounds to ±1. Callers on the
    /// training path detect these through the loss.
    pub fn eval_window(&self, x: f64, w: &mut Window) {
        self.eval_window_to(x, 3, w);
    }

    /// As [`BasisSpec::eval_window`], but spline derivatives above `order`
    /// are left at zero.
    pub fn eval_window_to(&self, x: f64, order: usize, w: &mut Window) {
        if x.is_nan() {
            w.fill_nan(self.window_capacity());
            return;
        }
        let (lo, hi) = (self.domain_lo, self.domain_hi);
        let inside = x >= lo && x <= hi;
        let xc = if self.clamps() { x.clamp(lo, hi) } else { x };
        match self.kind {
            BasisKind::Spline { k, g } => self.spline_window(xc, k, g, order, w),
            BasisKind::Relu { k, g } => self.relu_window(xc, k, g, 2, w),
            BasisKind::HRelu { k, g, n } => self.relu_window(xc, k, g, n, w),
            BasisKind::Rbf { n_f } => self.rbf_window(xc, n_f, w),
            BasisKind::Fourier { n } => self.fourier_window(x, n, w),
            BasisKind::Chebyshev { k } => chebyshev_window(x, k, w),
            BasisKind::WaveletDoG => {
                let [p, d1, d2, d3] = dog(x);
                w.start = 0;
                w.len = 1;
                w.phi[0] = p;
                w.d1[0] = d1;
                w.d2[0] = d2;
                w.d3[0] = d3;
            }
        }
        if self.clamps() && !inside {
            // the clamped map is constant outside the domain
            for buf in [&mut w.d1, &mut w.d2, &mut w.d3] {
                buf[..w.len].iter_mut().for_each(|v| *v = 0.0);
            }
        }
    }

    fn spline_window(&self, x: f64, k: usize, g: usize, order: usize, w: &mut Window) {
        let h = (self.domain_hi - self.domain_lo) / g as f64;
        let xi = (x - self.domain_lo) / h;
        let cell = (xi.floor().max(0.0) as usize).min(g - 1);
        let u = xi - cell as f64;
        // interval index in the extended knot vector is m = cell + k;
        // the degree-k window starts at m - k = cell
        w.start = cell;
        w.len = k + 1;

        // triangle[p] holds the k+1 possibly nonzero degree-p values
        let stride = k + 1;
        let tri = &mut w.scratch;
        if tri.len() < stride * stride {
            tri.resize(stride * stride, 0.0);
        }
        tri[0] = 1.0;
        for p in 1..=k {
            let inv_p = 1.0 / p as f64;
            let (prev, cur) = tri.split_at_mut(p * stride);
            let prev = &prev[(p - 1) * stride..];
            let cur = &mut cur[..=p];
            cur[0] = (1.0 - u) * inv_p * prev[0];
            for r in 1..p {
                let rf = r as f64;
                cur[r] = ((u + p as f64 - rf) * prev[r - 1] + (1.0 + rf - u) * prev[r]) * inv_p;
            }
            cur[p] = u * inv_p * prev[p - 1];
        }
        let tri = &w.scratch;
        w.phi[..=k].copy_from_slice(&tri[k * stride..k * stride + k + 1]);
        // q-th derivative: h^-q Σ_s (-1)^s C(q,s) B_{i+s, k-q}
        const STENCIL: [[f64; 4]; 3] = [[1.0, -1.0, 0.0, 0.0], [1.0, -2.0, 1.0, 0.0], [1.0, -3.0, 3.0, -1.0]];
        let inv_h = 1.0 / h;
        let mut scale = 1.0;
        for (q, out) in [&mut w.d1, &mut w.d2, &mut w.d3].into_iter().enumerate() {
            let q = q + 1;
            scale *= inv_h;
            if q > order || q > k {
                out[..=k].iter_mut().for_each(|v| *v = 0.0);
                continue;
            }
            let deg = k - q;
            let row = &tri[deg * stride..deg * stride + deg + 1];
            for r in 0..=k {
                let mut acc = 0.0;
                for s in 0..=q {
                    let idx = r + s;
                    if idx >= q && idx - q <= deg {
                        acc += STENCIL[q - 1][s] * row[idx - q];
                    }
                }
                out[r] = acc * scale;
            }
        }
    }

    fn relu_window(&self, x: f64, k: usize, g: usize, n: u32, w: &mut Window) {
        let h = (self.domain_hi - self.domain_lo) / g as f64;
        let xi = (x - self.domain_lo) / h;
        let start = (xi.floor().max(0.0) as usize).min(g - 1);
        w.start = start;
        w.len = k + 1;
        let width = (k + 1) as f64 * h;
        let r = 4.0 / (width * width);
        let nf = n as f64;
        for j in 0..=k {
            let b = start + j;
            let s = self.domain_lo + (b as f64 - k as f64) * h;
            let e = s + width;
            let p = (x - s).max(0.0) * (e - x).max(0.0);
            if p <= 0.0 {
                w.phi[j] = 0.0;
                w.d1[j] = 0.0;
                w.d2[j] = 0.0;
                w.d3[j] = 0.0;
                continue;
            }
            let q = r * p;
            let dp = e + s - 2.0 * x;
            let ddp = -2.0;
            let qn1 = q.powi(n as i32 - 1);
            let qn2 = q.powi(n as i32 - 2);
            w.phi[j] = qn1 * q;
            w.d1[j] = nf * qn1 * r * dp;
            w.d2[j] = nf * (nf - 1.0) * qn2 * r * r * dp * dp + nf * qn1 * r * ddp;
            let t3 = if n >= 3 {
                nf * (nf - 1.0) * (nf - 2.0) * q.powi(n as i32 - 3) * r.powi(3) * dp.powi(3)
            } else {
                0.0
            };
            w.d3[j] = t3 + 3.0 * nf * (nf - 1.0) * qn2 * r * r * dp * ddp;
        }
    }

    fn rbf_window(&self, x: f64, n_f: usize, w: &mut Window) {
        let h = (self.domain_hi - self.domain_lo) / (n_f - 1) as f64;
        w.start = 0;
        w.len = n_f;
        for j in 0..n_f {
            let c = self.domain_lo + j as f64 * h;
            let q = (x - c) / h;
            let e = (-q * q).exp();
            w.phi[j] = e;
            w.d1[j] = -2.0 * q / h * e;
            w.d2[j] = (4.0 * q * q - 2.0) / (h * h) * e;
            w.d3[j] = (12.0 * q - 8.0 * q * q * q) / (h * h * h) * e;
        }
    }

    fn fourier_window(&self, x: f64, n: usize, w: &mut Window) {
        let alpha = 2.0 / (self.domain_hi - self.domain_lo);
        let u = alpha * (x - self.domain_lo) - 1.0;
        w.start = 0;
        w.len = 2 * n + 1;
        w.phi[0] = 1.0;
        w.d1[0] = 0.0;
        w.d2[0] = 0.0;
        w.d3[0] = 0.0;
        for j in 1..=n {
            let a = j as f64 * std::f64::consts::PI;
            let om = a * alpha;
            let (s, c) = (a * u).sin_cos();
            let (ic, is) = (2 * j - 1, 2 * j);
            w.phi[ic] = c;
            w.d1[ic] = -om * s;
            w.d2[ic] = -om * om * c;
            w.d3[ic] = om * om * om * s;
            w.phi[is] = s;
            w.d1[is] = om * c;
            w.d2[is] = -om * om * s;
            w.d3[is] = -om * om * om * c;
        }
    }

    /// Full-length values and derivatives at `x`.
    pub fn eval(&self, x: f64) -> Result<BasisValues, BasisError> {
        self.validate()?;
        if !x.is_finite() {
            return Err(BasisError::NonFinite(x));
        }
        let mut w = self.new_window();
        self.eval_window(x, &mut w);
        let n = self.cardinality();
        let mut out = BasisValues {
            phi: vec![0.0; n],
            dphi: vec![0.0; n],
            d2phi: vec![0.0; n],
        };
        for r in 0..w.len {
            let b = w.start + r;
            out.phi[b] = w.phi[r];
            out.dphi[b] = w.d1[r];
            out.d2phi[b] = w.d2[r];
        }
        Ok(out)
    }

    /// Chain-rule lift of [`BasisSpec::eval`] to a jet argument.
    pub fn eval_jet(&self, x: &Jet2) -> Result<Vec<Jet2>, BasisError> {
        let v = self.eval(x.value)?;
        (0..self.cardinality())
            .map(|b| {
                let (p, d1, d2) = (v.phi[b], v.dphi[b], v.d2phi[b]);
                if !(p.is_finite() && d1.is_finite() && d2.is_finite()) {
                    return Err(BasisError::NonFiniteDerivative { index: b, x: x.value });
                }
                Ok(x.chain(p, d1, d2))
            })
            .collect()
    }
}

/// `cos(j·acos(tanh x))` for `j = 0..=k`.
///
/// Derivatives follow the chain tanh → acos → cos with every factor taken
/// from the rounded `t = tanh(x)`, so once `t` rounds to ±1 the acos factor
/// is infinite and the derivatives are NaN.
fn chebyshev_window(x: f64, k: usize, w: &mut Window) {
    let t = x.tanh();
    let om = 1.0 - t * t;
    // dt/dx and higher
    let t1 = om;
    let t2 = -2.0 * t * om;
    let t3 = om * (6.0 * t * t - 2.0);
    // acos derivatives in t
    let sq = om.sqrt();
    let a1 = -1.0 / sq;
    let a2 = -t / (om * sq);
    let a3 = -(1.0 + 2.0 * t * t) / (om * om * sq);
    let th = t.acos();
    let th1 = a1 * t1;
    let th2 = a2 * t1 * t1 + a1 * t2;
    let th3 = a3 * t1 * t1 * t1 + 3.0 * a2 * t1 * t2 + a1 * t3;
    w.start = 0;
    w.len = k + 1;
    for j in 0..=k {
        let jf = j as f64;
        let (s, c) = (jf * th).sin_cos();
        w.phi[j] = c;
        if j == 0 {
            w.d1[0] = 0.0;
            w.d2[0] = 0.0;
            w.d3[0] = 0.0;
            continue;
        }
        w.d1[j] = -jf * s * th1;
        w.d2[j] = -jf * jf * c * th1 * th1 - jf * s * th2;
        w.d3[j] = jf * jf * jf * s * th1 * th1 * th1 - 3.0 * jf * jf * c * th1 * th2 - jf * s * th3;
    }
}
