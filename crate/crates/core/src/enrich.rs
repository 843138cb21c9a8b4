//! Parameter-free input feature maps.
//!
//! Each raw coordinate is first passed through a fixed affine map
//! `y = scale·x + shift` (identity unless set), then either expanded into a
//! term list `[1, cos(a₁y), sin(a₁y), …]` or passed through unchanged.
//! Expanded blocks are concatenated in coordinate order.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::diffcore::Jet2;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnrichError {
    #[error("enriched input dimension {0} has an empty term list")]
    EmptyTerms(usize),
    #[error("input has {got} coordinates, feature map expects {want}")]
    DimensionMismatch { got: usize, want: usize },
    #[error("enrich_dims entry {dim} out of range for {in_dim} inputs")]
    BadDim { dim: usize, in_dim: usize },
    #[error("non-finite frequency or affine coefficient")]
    NonFinite,
    #[error("invalid random feature parameters: sigma={sigma}, m={m}")]
    InvalidRff { sigma: f64, m: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Term {
    Identity,
    One,
    Cos(f64),
    Sin(f64),
}

impl Term {
    /// Value and first two derivatives in `y`.
    #[inline]
    pub fn eval(self, y: f64) -> (f64, f64, f64) {
        match self {
            Term::Identity => (y, 1.0, 0.0),
            Term::One => (1.0, 0.0, 0.0),
            Term::Cos(a) => {
                let (s, c) = (a * y).sin_cos();
                (c, -a * s, -a * a * c)
            }
            Term::Sin(a) => {
                let (s, c) = (a * y).sin_cos();
                (s, a * c, -a * a * s)
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RffParams {
    pub sigma: f64,
    pub m: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Identity,
    Deterministic,
    Rff,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Freqs {
    PerDim(Vec<Vec<f64>>),
    Random(RffParams),
}

/// On-disk form of a [`FeatureMap`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMapConfig {
    pub mode: Mode,
    pub in_dim: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub freqs: Option<Freqs>,
    #[serde(default)]
    pub enrich_dims: Vec<usize>,
    #[serde(default = "yes")]
    pub include_one: bool,
    #[serde(default)]
    pub include_identity: bool,
    /// Per-coordinate `[scale, shift]`; identity when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub affine: Option<Vec<[f64; 2]>>,
}

fn yes() -> bool {
    true
}

/// A frozen enrichment map. Contributes no trainable parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "FeatureMapConfig", into = "FeatureMapConfig")]
pub struct FeatureMap {
    config: FeatureMapConfig,
    affine: Vec<(f64, f64)>,
    /// Per input coordinate: `None` for pass-through, else the term list.
    terms: Vec<Option<Vec<Term>>>,
    /// Output feature index → source coordinate.
    source: Vec<usize>,
}

impl From<FeatureMap> for FeatureMapConfig {
    fn from(m: FeatureMap) -> Self {
        m.config
    }
}

impl TryFrom<FeatureMapConfig> for FeatureMap {
    type Error = EnrichError;

    fn try_from(config: FeatureMapConfig) -> Result<Self, Self::Error> {
        let d = config.in_dim;
        if let Some(&dim) = config.enrich_dims.iter().find(|&&k| k >= d) {
            return Err(EnrichError::BadDim { dim, in_dim: d });
        }
        let affine: Vec<(f64, f64)> = match &config.affine {
            Some(a) if a.len() != d => {
                return Err(EnrichError::DimensionMismatch { got: a.len(), want: d });
            }
            Some(a) => a.iter().map(|&[s, t]| (s, t)).collect(),
            None => vec![(1.0, 0.0); d],
        };
        if affine.iter().any(|(s, t)| !s.is_finite() || !t.is_finite()) {
            return Err(EnrichError::NonFinite);
        }
        let per_dim_freqs: Vec<Vec<f64>> = match (&config.mode, &config.freqs) {
            (Mode::Identity, _) => vec![Vec::new(); d],
            (Mode::Deterministic, Some(Freqs::PerDim(f))) => {
                if f.len() != d {
                    return Err(EnrichError::DimensionMismatch { got: f.len(), want: d });
                }
                f.clone()
            }
            (Mode::Rff, Some(Freqs::Random(p))) => draw_rff(p, d, &config.enrich_dims)?,
            _ => return Err(EnrichError::EmptyTerms(0)),
        };
        if per_dim_freqs.iter().flatten().any(|a| !a.is_finite()) {
            return Err(EnrichError::NonFinite);
        }
        let mut terms = vec![None; d];
        if config.mode != Mode::Identity {
            for &k in &config.enrich_dims {
                let mut list = Vec::new();
                if config.include_one {
                    list.push(Term::One);
                }
                if config.include_identity {
                    list.push(Term::Identity);
                }
                for &a in &per_dim_freqs[k] {
                    list.push(Term::Cos(a));
                    list.push(Term::Sin(a));
                }
                if list.is_empty() {
                    return Err(EnrichError::EmptyTerms(k));
                }
                terms[k] = Some(list);
            }
        }
        let source = terms
            .iter()
            .enumerate()
            .flat_map(|(k, t)| std::iter::repeat_n(k, t.as_ref().map_or(1, Vec::len)))
            .collect();
        Ok(Self {
            config,
            affine,
            terms,
            source,
        })
    }
}

/// Draws `m` frequencies from `N(0, σ²)` for each enriched dim, in ascending
/// dim order, from one ChaCha8 stream.
fn draw_rff(p: &RffParams, d: usize, dims: &[usize]) -> Result<Vec<Vec<f64>>, EnrichError> {
    if !(p.sigma >= 0.0) || !p.sigma.is_finite() || p.m < 1 {
        return Err(EnrichError::InvalidRff { sigma: p.sigma, m: p.m });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(p.seed);
    let normal = Normal::new(0.0, p.sigma).map_err(|_| EnrichError::InvalidRff { sigma: p.sigma, m: p.m })?;
    let mut sorted = dims.to_vec();
    sorted.sort_unstable();
    sorted.dedup();
    let mut out = vec![Vec::new(); d];
    for k in sorted {
        out[k] = (0..p.m).map(|_| normal.sample(&mut rng)).collect();
    }
    Ok(out)
}

impl FeatureMap {
    /// Pass-through map (plain KAN front end).
    pub fn identity(in_dim: usize) -> Self {
        Self::try_from(FeatureMapConfig {
            mode: Mode::Identity,
            in_dim,
            freqs: None,
            enrich_dims: Vec::new(),
            include_one: true,
            include_identity: false,
            affine: None,
        })
        .expect("identity map is always valid")
    }

    /// Deterministic trig terms; every coordinate is enriched.
    pub fn build_deterministic(
        freqs: Vec<Vec<f64>>,
        include_one: bool,
        include_identity: bool,
    ) -> Result<Self, EnrichError> {
        let in_dim = freqs.len();
        Self::try_from(FeatureMapConfig {
            mode: Mode::Deterministic,
            in_dim,
            freqs: Some(Freqs::PerDim(freqs)),
            enrich_dims: (0..in_dim).collect(),
            include_one,
            include_identity,
            affine: None,
        })
    }

    /// Random Fourier terms `[1, cos(a_j y), sin(a_j y)]_{j≤m}` with
    /// `a_j ~ N(0, σ²)` on the coordinates in `dims`.
    pub fn build_rff(sigma: f64, m: usize, in_dim: usize, dims: &[usize], seed: u64) -> Result<Self, EnrichError> {
        Self::try_from(FeatureMapConfig {
            mode: Mode::Rff,
            in_dim,
            freqs: Some(Freqs::Random(RffParams { sigma, m, seed })),
            enrich_dims: dims.to_vec(),
            include_one: true,
            include_identity: false,
            affine: None,
        })
    }

    /// The same integer frequency list on every one of `in_dim` coordinates.
    pub fn uniform_freqs(in_dim: usize, freqs: &[f64]) -> Self {
        Self::build_deterministic(vec![freqs.to_vec(); in_dim], true, false).expect("constant term keeps lists non-empty")
    }

    /// Restricts enrichment to `dims`; other coordinates pass through.
    pub fn with_enrich_dims(self, dims: &[usize]) -> Result<Self, EnrichError> {
        let mut config = self.config;
        config.enrich_dims = dims.to_vec();
        Self::try_from(config)
    }

    /// Applies `y = scale·x + shift` per coordinate before the terms.
    pub fn with_affine(self, affine: Vec<[f64; 2]>) -> Result<Self, EnrichError> {
        let mut config = self.config;
        config.affine = Some(affine);
        Self::try_from(config)
    }

    /// Affine map sending `[lo, hi]` to `[-1, 1]` per coordinate.
    pub fn normalizing(self, bounds: &[(f64, f64)]) -> Result<Self, EnrichError> {
        let affine = bounds
            .iter()
            .map(|&(lo, hi)| {
                let s = 2.0 / (hi - lo);
                [s, -1.0 - s * lo]
            })
            .collect();
        self.with_affine(affine)
    }

    pub fn config(&self) -> &FeatureMapConfig {
        &self.config
    }

    pub fn in_dim(&self) -> usize {
        self.config.in_dim
    }

    pub fn out_width(&self) -> usize {
        self.source.len()
    }

    /// Coordinate feeding output feature `f`.
    pub fn source(&self, f: usize) -> usize {
        self.source[f]
    }

    pub fn is_identity(&self) -> bool {
        self.terms.iter().all(Option::is_none) && self.affine.iter().all(|&a| a == (1.0, 0.0))
    }

    /// Frequencies in use on coordinate `k` (empty if passed through).
    pub fn frequencies(&self, k: usize) -> Vec<f64> {
        self.terms[k]
            .iter()
            .flatten()
            .filter_map(|t| match t {
                Term::Cos(a) => Some(*a),
                _ => None,
            })
            .collect()
    }

    pub fn terms(&self, k: usize) -> Option<&[Term]> {
        self.terms[k].as_deref()
    }

    fn check(&self, n: usize) -> Result<(), EnrichError> {
        if n != self.in_dim() {
            return Err(EnrichError::DimensionMismatch { got: n, want: self.in_dim() });
        }
        Ok(())
    }

    /// Writes each feature's value and its first and second derivative with
    /// respect to its own source coordinate.
    pub fn apply_into(&self, x: &[f64], v: &mut [f64], d1: &mut [f64], d2: &mut [f64]) {
        let mut f = 0;
        for (k, &xk) in x.iter().enumerate() {
            let (s, t) = self.affine[k];
            let y = s * xk + t;
            match &self.terms[k] {
                None => {
                    v[f] = y;
                    d1[f] = s;
                    d2[f] = 0.0;
                    f += 1;
                }
                Some(list) => {
                    for term in list {
                        let (a, b, c) = term.eval(y);
                        v[f] = a;
                        d1[f] = b * s;
                        d2[f] = c * s * s;
                        f += 1;
                    }
                }
            }
        }
    }

    pub fn apply(&self, x: &[f64]) -> Result<Vec<f64>, EnrichError> {
        self.check(x.len())?;
        let n = self.out_width();
        let (mut v, mut d1, mut d2) = (vec![0.0; n], vec![0.0; n], vec![0.0; n]);
        self.apply_into(x, &mut v, &mut d1, &mut d2);
        Ok(v)
    }

    pub fn apply_jet(&self, x: &[Jet2]) -> Result<Vec<Jet2>, EnrichError> {
        self.check(x.len())?;
        let mut out = Vec::with_capacity(self.out_width());
        for (k, xk) in x.iter().enumerate() {
            let (s, t) = self.affine[k];
            let y = xk.scale(s);
            let y = Jet2 {
                value: y.value + t,
                ..y
            };
            match &self.terms[k] {
                None => out.push(y),
                Some(list) => out.extend(list.iter().map(|term| {
                    let (a, b, c) = term.eval(y.value);
                    y.chain(a, b, c)
                })),
            }
        }
        Ok(out)
    }
}

/// The nine-term 1D map `[1, cos πx, sin πx, …, cos 4πx, sin 4πx]`.
pub fn nine_term_1d() -> FeatureMap {
    let pi = std::f64::consts::PI;
    FeatureMap::uniform_freqs(1, &[pi, 2.0 * pi, 3.0 * pi, 4.0 * pi])
}

/// Seven terms per coordinate with frequencies 1, 2, 3.
pub fn seven_per_dim(in_dim: usize) -> FeatureMap {
    FeatureMap::uniform_freqs(in_dim, &[1.0, 2.0, 3.0])
}

/// Five terms per coordinate with frequencies 1, 2.
pub fn five_per_dim(in_dim: usize) -> FeatureMap {
    FeatureMap::uniform_freqs(in_dim, &[1.0, 2.0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::diffcore::fd_check;
    use proptest::prelude::*;

    #[test]
    fn nine_term_order() {
        let m = nine_term_1d();
        assert_eq!(m.out_width(), 9);
        let pi = std::f64::consts::PI;
        let x = 0.3;
        let mut want = vec![1.0];
        for j in 1..=4 {
            let a = j as f64 * pi;
            want.push((a * x).cos());
            want.push((a * x).sin());
        }
        assert_eq!(m.apply(&[x]).unwrap(), want);
    }

    #[test]
    fn two_dim_blocks() {
        let m = seven_per_dim(2);
        assert_eq!(m.out_width(), 14);
        let v = m.apply(&[0.0, 0.0]).unwrap();
        let block = [1.0, 1.0, 0.0, 1.0, 0.0, 1.0, 0.0];
        assert_eq!(&v[..7], &block);
        assert_eq!(&v[7..], &block);
        let (x, y) = (0.4, -0.9);
        let v = m.apply(&[x, y]).unwrap();
        assert_eq!(v[3], (2.0 * x).cos());
        assert_eq!(v[7 + 6], (3.0 * y).sin());
    }

    #[test]
    fn identity_only_is_identity() {
        let m = FeatureMap::build_deterministic(vec![vec![], vec![]], false, true).unwrap();
        assert_eq!(m.apply(&[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
        let id = FeatureMap::identity(2);
        assert!(id.is_identity());
        assert_eq!(id.apply(&[0.3, -0.2]).unwrap(), vec![0.3, -0.2]);
    }

    #[test]
    fn empty_terms_rejected() {
        let err = FeatureMap::build_deterministic(vec![vec![]], false, false).unwrap_err();
        assert_eq!(err, EnrichError::EmptyTerms(0));
    }

    #[test]
    fn time_passes_through() {
        let m = FeatureMap::uniform_freqs(2, &[1.0, 2.0]).with_enrich_dims(&[0]).unwrap();
        let v = m.apply(&[0.0, 0.7]).unwrap();
        assert_eq!(v, vec![1.0, 1.0, 0.0, 1.0, 0.0, 0.7]);
    }

    #[test]
    fn dimension_mismatch() {
        let m = seven_per_dim(2);
        assert!(matches!(m.apply(&[0.0]), Err(EnrichError::DimensionMismatch { got: 1, want: 2 })));
    }

    #[test]
    fn rff_zero_sigma() {
        let m = FeatureMap::build_rff(0.0, 2, 1, &[0], 7).unwrap();
        assert_eq!(m.apply(&[0.37]).unwrap(), vec![1.0, 1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn rff_deterministic() {
        let a = FeatureMap::build_rff(2.0, 3, 2, &[0, 1], 11).unwrap();
        let b = FeatureMap::build_rff(2.0, 3, 2, &[0, 1], 11).unwrap();
        assert_eq!(a.frequencies(0), b.frequencies(0));
        assert_eq!(a.frequencies(1), b.frequencies(1));
        assert_ne!(a.frequencies(0), a.frequencies(1));
        let c = FeatureMap::build_rff(2.0, 3, 2, &[0, 1], 12).unwrap();
        assert_ne!(a.frequencies(0), c.frequencies(0));
    }

    #[test]
    fn rff_sample_variance() {
        let m = FeatureMap::build_rff(2.0, 10000, 1, &[0], 3).unwrap();
        let a = m.frequencies(0);
        let n = a.len() as f64;
        let mean = a.iter().sum::<f64>() / n;
        let var = a.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
        assert!((var - 4.0).abs() < 0.2, "var={var}");
    }

    #[test]
    fn jet_examples() {
        let a = 2.5;
        let m = FeatureMap::build_deterministic(vec![vec![a]], false, true).unwrap();
        let out = m.apply_jet(&[Jet2::seed(0.0, 0, 1)]).unwrap();
        assert_eq!(out[0], Jet2::seed(0.0, 0, 1));
        assert_eq!(out[1].value, 1.0);
        assert_eq!(out[1].grad, vec![-0.0]);
        assert_eq!(out[1].diag2, vec![-a * a]);
    }

    #[test]
    fn config_round_trip() {
        let maps = [
            nine_term_1d(),
            seven_per_dim(2),
            FeatureMap::build_rff(10.0, 3, 2, &[0, 1], 5).unwrap(),
            five_per_dim(3).with_enrich_dims(&[0, 1]).unwrap().normalizing(&[(-1.0, 1.0), (0.0, 2.0), (0.0, 10.0)]).unwrap(),
            FeatureMap::identity(3),
        ];
        for m in maps {
            let s = serde_json::to_string(&m).unwrap();
            let back: FeatureMap = serde_json::from_str(&s).unwrap();
            assert_eq!(back, m);
            assert_eq!(serde_json::to_string(&back).unwrap(), s);
        }
        let j = r#"{"mode":"rff","in_dim":2,"freqs":{"sigma":2.0,"m":3,"seed":9},"enrich_dims":[0,1]}"#;
        let m: FeatureMap = serde_json::from_str(j).unwrap();
        assert_eq!(m.out_width(), 14);
    }

    proptest! {
        #[test]
        fn width_law(n in 1usize..4, m in 0usize..5, mask in 0u8..16, one: bool, ident: bool) {
            prop_assume!(one || ident || m > 0);
            let dims: Vec<usize> = (0..n).filter(|k| mask & (1 << k) != 0).collect();
            let map = FeatureMap::build_deterministic(vec![(1..=m).map(|j| j as f64).collect(); n], one, ident)
                .unwrap()
                .with_enrich_dims(&dims)
                .unwrap();
            let per = one as usize + ident as usize + 2 * m;
            prop_assert_eq!(map.out_width(), dims.len() * per + (n - dims.len()));
        }

        #[test]
        fn jets_match_finite_differences(x in -1.0f64..1.0, y in -1.0f64..1.0) {
            let map = seven_per_dim(2).with_affine(vec![[1.5, 0.2], [0.7, -0.1]]).unwrap();
            let jets = map.apply_jet(&Jet2::seeds(&[x, y])).unwrap();
            for (f, j) in jets.iter().enumerate() {
                let (g, h) = fd_check(|p| map.apply(p).unwrap()[f], &[x, y], 1e-4);
                for i in 0..2 {
                    prop_assert!((j.grad[i] - g[i]).abs() <= 1e-5 * j.grad[i].abs().max(1.0));
                    prop_assert!((j.diag2[i] - h[i]).abs() <= 1e-5 * j.diag2[i].abs().max(1.0) * 10.0);
                }
            }
        }
    }
}
