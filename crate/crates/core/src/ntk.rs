//! Empirical neural tangent kernels and their spectra.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::FekanModel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NtkError {
    #[error("kernel needs a scalar-output model, got {0} outputs")]
    MultiOutput(usize),
    #[error("matrix is not symmetric: |K[{i}][{j}] − K[{j}][{i}]| = {gap}")]
    Asymmetric { i: usize, j: usize, gap: f64 },
    #[error("matrix has {got} entries, expected {n}×{n}")]
    Shape { got: usize, n: usize },
    #[error("learning rate must be non-negative, got {0}")]
    NegativeEta(f64),
    #[error("need at least {0} inputs")]
    Empty(usize),
    #[error("point {0} has the wrong dimension")]
    Point(usize),
}

/// Row-major symmetric kernel matrix tagged with the epoch it was taken at.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NtkMatrix {
    pub n: usize,
    pub k: Vec<f64>,
    pub tau: usize,
}

impl NtkMatrix {
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.k[i * self.n + j]
    }

    pub fn trace(&self) -> f64 {
        (0..self.n).map(|i| self.at(i, i)).sum()
    }

    pub fn frobenius_distance(&self, other: &NtkMatrix) -> f64 {
        self.k.iter().zip(&other.k).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
    }
}

/// Eigenvalues sorted descending, with eigenvectors as columns of a
/// row-major `n×n` matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub values: Vec<f64>,
    pub vectors: Option<Vec<f64>>,
    pub tau: usize,
}

/// Parameter gradients of a scalar model at each point, one row per point.
pub fn jacobian(model: &FekanModel, points: &[Vec<f64>]) -> Result<Vec<Vec<f64>>, NtkError> {
    if model.out_dim() != 1 {
        return Err(NtkError::MultiOutput(model.out_dim()));
    }
    let mut ws = model.workspace(0);
    points
        .iter()
        .enumerate()
        .map(|(i, x)| {
            if x.len() != model.in_dim() {
                return Err(NtkError::Point(i));
            }
            let mut g = vec![0.0; model.param_count()];
            model.eval_ws(x, &mut ws);
            model.backward_value_ws(&mut ws, &[1.0], &mut g);
            Ok(g)
        })
        .collect()
}

/// `K_ij = ⟨∂f/∂θ(x_i), ∂f/∂θ(x_j)⟩`.
pub fn ntk_matrix(model: &FekanModel, points: &[Vec<f64>], tau: usize) -> Result<NtkMatrix, NtkError> {
    let jac = jacobian(model, points)?;
    Ok(gram(&jac, tau))
}

/// Gram matrix of the given rows.
pub fn gram(rows: &[Vec<f64>], tau: usize) -> NtkMatrix {
    let n = rows.len();
    let mut k = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v: f64 = rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum();
            k[i * n + j] = v;
            k[j * n + i] = v;
        }
    }
    NtkMatrix { n, k, tau }
}

fn check_symmetric(k: &[f64], n: usize) -> Result<(), NtkError> {
    if k.len() != n * n {
        return Err(NtkError::Shape { got: k.len(), n });
    }
    let scale = k.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(1.0);
    for i in 0..n {
        for j in i + 1..n {
            let gap = (k[i * n + j] - k[j * n + i]).abs();
            if gap > 1e-10 * scale {
                return Err(NtkError::Asymmetric { i, j, gap });
            }
        }
    }
    Ok(())
}

/// Cyclic Jacobi eigendecomposition of a symmetric matrix. Sweeps until the
/// off-diagonal Frobenius norm falls below `1e−12·‖K‖_F`.
pub fn jacobi_eigen(k: &[f64], n: usize) -> Result<(Vec<f64>, Vec<f64>), NtkError> {
    check_symmetric(k, n)?;
    let mut a = k.to_vec();
    let mut v = vec![0.0; n * n];
    for i in 0..n {
        v[i * n + i] = 1.0;
    }
    let norm = a.iter().map(|x| x * x).sum::<f64>().sqrt();
    let off = |a: &[f64]| {
        let mut s = 0.0;
        for i in 0..n {
            for j in 0..n {
                if i != j {
                    s += a[i * n + j] * a[i * n + j];
                }
            }
        }
        s.sqrt()
    };
    for _sweep in 0..100 {
        if off(&a) <= 1e-12 * norm {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                let apq = a[p * n + q];
                if apq == 0.0 {
                    continue;
                }
                let app = a[p * n + p];
                let aqq = a[q * n + q];
                let theta = (aqq - app) / (2.0 * apq);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for r in 0..n {
                    let arp = a[r * n + p];
                    let arq = a[r * n + q];
                    a[r * n + p] = c * arp - s * arq;
                    a[r * n + q] = s * arp + c * arq;
                }
                for r in 0..n {
                    let apr = a[p * n + r];
                    let aqr = a[q * n + r];
                    a[p * n + r] = c * apr - s * aqr;
                    a[q * n + r] = s * apr + c * aqr;
                }
                for r in 0..n {
                    let vrp = v[r * n + p];
                    let vrq = v[r * n + q];
                    v[r * n + p] = c * vrp - s * vrq;
                    v[r * n + q] = s * vrp + c * vrq;
                }
            }
        }
    }
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[j * n + j].total_cmp(&a[i * n + i]));
    let values = order.iter().map(|&i| a[i * n + i]).collect();
    let mut vectors = vec![0.0; n * n];
    for (c, &i) in order.iter().enumerate() {
        for r in 0..n {
            vectors[r * n + c] = v[r * n + i];
        }
    }
    Ok((values, vectors))
}

pub fn eigen_spectrum(k: &NtkMatrix) -> Result<Spectrum, NtkError> {
    let (values, vectors) = jacobi_eigen(&k.k, k.n)?;
    Ok(Spectrum {
        values,
        vectors: Some(vectors),
        tau: k.tau,
    })
}

/// Average convergence rate: the mean eigenvalue.
pub fn acr(s: &Spectrum) -> Result<f64, NtkError> {
    if s.values.is_empty() {
        return Err(NtkError::Empty(1));
    }
    Ok(s.values.iter().sum::<f64>() / s.values.len() as f64)
}

/// `λ_i / λ_1`.
pub fn normalized_eigenvalue(s: &Spectrum, i: usize) -> f64 {
    s.values[i] / s.values[0]
}

/// `λ_{N/2} / λ_1`, with eigenvalues counted from 1.
pub fn mid_spectrum_ratio(s: &Spectrum) -> f64 {
    normalized_eigenvalue(s, (s.values.len() / 2).max(1) - 1)
}

/// Spectral-bias comparator: the normalized eigenvalue at the middle of the
/// spectrum is larger for `enriched` than for `plain`, i.e. its spectrum
/// decays more slowly.
pub fn decays_slower(enriched: &Spectrum, plain: &Spectrum) -> bool {
    mid_spectrum_ratio(enriched) > mid_spectrum_ratio(plain)
}

/// Kernel spectra over training and the Frobenius distance of each kernel
/// to the last one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Drift {
    pub spectra: Vec<Spectrum>,
    pub distance_to_final: Vec<f64>,
}

pub fn ntk_drift(checkpoints: &[(usize, FekanModel)], points: &[Vec<f64>]) -> Result<Drift, NtkError> {
    if checkpoints.len() < 2 {
        return Err(NtkError::Empty(2));
    }
    let ks = checkpoints
        .iter()
        .map(|(tau, m)| ntk_matrix(m, points, *tau))
        .collect::<Result<Vec<_>, _>>()?;
    let last = ks.last().expect("at least two");
    let distance_to_final = ks.iter().map(|k| k.frobenius_distance(last)).collect();
    let spectra = ks.iter().map(eigen_spectrum).collect::<Result<Vec<_>, _>>()?;
    Ok(Drift {
        spectra,
        distance_to_final,
    })
}

/// `|Qᵀ(ŷ(τ) − y)|_i = e^{−η λ_i τ} |Qᵀ y|_i` under linearized gradient flow
/// from a zero-output start.
pub fn predicted_error_decay(k: &NtkMatrix, eta: f64, tau: f64, y: &[f64]) -> Result<Vec<f64>, NtkError> {
    if eta < 0.0 {
        return Err(NtkError::NegativeEta(eta));
    }
    if y.len() != k.n {
        return Err(NtkError::Shape { got: y.len(), n: k.n });
    }
    let s = eigen_spectrum(k)?;
    let q = s.vectors.as_ref().expect("computed with vectors");
    let n = k.n;
    Ok((0..n)
        .map(|c| {
            let proj: f64 = (0..n).map(|r| q[r * n + c] * y[r]).sum();
            (-eta * s.values[c] * tau).exp() * proj.abs()
        })
        .collect())
}
