//! Finite-difference comparisons for models.
//!
//! Each check returns the worst scaled error
//! `|analytic − fd| / max(|analytic|, |fd|, floor)` where `floor` is a small
//! fraction of the largest entry compared, so entries that are zero up to
//! rounding do not dominate.

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::diffcore::fd_check;
use crate::model::{FekanModel, JetCotangent};

/// Worst scaled error between `a` and `b`.
pub fn max_scaled_error(a: &[f64], b: &[f64], floor_frac: f64) -> f64 {
    let peak = a.iter().chain(b).fold(0.0f64, |m, v| m.max(v.abs()));
    let floor = (floor_frac * peak).max(f64::MIN_POSITIVE);
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - y).abs() / x.abs().max(y.abs()).max(floor))
        .fold(0.0, f64::max)
}

/// Central differences at steps `h` and `h/2` combined by Richardson
/// extrapolation, cancelling the leading `O(h²)` truncation term.
pub fn fd_richardson(f: impl Fn(&[f64]) -> f64, x: &[f64], h: f64) -> (Vec<f64>, Vec<f64>) {
    let (g1, d1) = fd_check(&f, x, h);
    let (g2, d2) = fd_check(&f, x, 0.5 * h);
    let extrapolate = |a: Vec<f64>, b: Vec<f64>| a.iter().zip(&b).map(|(c, f)| (4.0 * f - c) / 3.0).collect();
    (extrapolate(g1, g2), extrapolate(d1, d2))
}

/// `(grad error, diag2 error)` of every output jet against extrapolated
/// central differences of the plain forward pass with step `h`.
pub fn input_jet_error(model: &FekanModel, x: &[f64], h: f64) -> (f64, f64) {
    let jets = model.forward_jet(x).expect("finite model");
    let (mut eg, mut eh) = (0.0f64, 0.0f64);
    for (j, jet) in jets.iter().enumerate() {
        let (g, d2) = fd_richardson(|p| model.forward(p).expect("finite model")[j], x, h);
        eg = eg.max(max_scaled_error(&jet.grad, &g, 1e-3));
        eh = eh.max(max_scaled_error(&jet.diag2, &d2, 1e-3));
    }
    (eg, eh)
}

/// `⟨cot, forward_jet(x)⟩` at the model's current parameters.
pub fn jet_objective(model: &FekanModel, x: &[f64], cot: &JetCotangent) -> f64 {
    let mut ws = model.workspace(x.len());
    model.eval_ws(x, &mut ws);
    let dot = |a: &[f64], b: &[f64]| a.iter().zip(b).map(|(p, q)| p * q).sum::<f64>();
    dot(ws.out_value(), &cot.value) + dot(ws.out_grad(), &cot.grad) + dot(ws.out_diag2(), &cot.diag2)
}

/// Compares [`FekanModel::backward_through_jets`] with central differences
/// over `count` randomly chosen parameters.
pub fn param_grad_error(model: &FekanModel, x: &[f64], cot: &JetCotangent, count: usize, seed: u64, h: f64) -> f64 {
    let analytic = model.backward_through_jets(x, cot).expect("shapes match").0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = model.param_count();
    let idx = sample(&mut rng, n, count.min(n)).into_vec();
    let mut m = model.clone();
    let fd: Vec<f64> = idx
        .iter()
        .map(|&p| {
            let orig = m.params[p];
            m.params[p] = orig + h;
            let fp = jet_objective(&m, x, cot);
            m.params[p] = orig - h;
            let fm = jet_objective(&m, x, cot);
            m.params[p] = orig;
            (fp - fm) / (2.0 * h)
        })
        .collect();
    let an: Vec<f64> = idx.iter().map(|&p| analytic[p]).collect();
    max_scaled_error(&an, &fd, 1e-3)
}

/// Central-difference gradient of an arbitrary scalar loss over `count`
/// random parameters, paired with the analytic entries.
pub fn loss_grad_pairs(
    params: &mut [f64],
    analytic: &[f64],
    loss: impl Fn(&[f64]) -> f64,
    count: usize,
    seed: u64,
    h: f64,
) -> (Vec<f64>, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let idx = sample(&mut rng, params.len(), count.min(params.len())).into_vec();
    let mut fd = Vec::with_capacity(idx.len());
    for &p in &idx {
        let orig = params[p];
        params[p] = orig + h;
        let fp = loss(params);
        params[p] = orig - h;
        let fm = loss(params);
        params[p] = orig;
        fd.push((fp - fm) / (2.0 * h));
    }
    (idx.iter().map(|&p| analytic[p]).collect(), fd)
}
