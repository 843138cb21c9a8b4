//! Fourier-spectral reference solution of the periodic Allen–Cahn problem,
//! integrated with fourth-order exponential time differencing (ETDRK4,
//! coefficients by contour integrals).

use std::f64::consts::PI;
use std::fs;
use std::io;
use std::path::Path;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::{allen_cahn_ic, PhysicsError};

type C = Complex<f64>;

/// Solution snapshots on a uniform periodic grid.
#[derive(Debug, Clone, PartialEq)]
pub struct Reference {
    pub x: Vec<f64>,
    pub t: Vec<f64>,
    /// `u[ti * x.len() + xi]`.
    pub u: Vec<f64>,
}

/// Solves `u_t = ε u_xx + γ(u − u³)` on `[−1, 1)` with `u(x, 0) = x² cos(πx)`,
/// `n` grid points, step `dt`, storing `n_out` equally spaced snapshots on
/// `[0, t_end]`.
pub fn solve(eps: f64, gamma: f64, n: usize, dt: f64, t_end: f64, n_out: usize) -> Result<Reference, PhysicsError> {
    if !(dt > 0.0) {
        return Err(PhysicsError::BadStep(dt));
    }
    let steps = (t_end / dt).round() as usize;
    let out_every = steps / (n_out - 1);
    if out_every * (n_out - 1) != steps {
        return Err(PhysicsError::BadStep(dt));
    }
    let x: Vec<f64> = (0..n).map(|j| -1.0 + 2.0 * j as f64 / n as f64).collect();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(n);
    let inv = planner.plan_fft_inverse(n);
    let scale = 1.0 / n as f64;

    let lin: Vec<f64> = (0..n)
        .map(|m| {
            let m = if m < n / 2 { m as f64 } else { m as f64 - n as f64 };
            let k = PI * m;
            -eps * k * k + gamma
        })
        .collect();
    let coef = Coefficients::new(&lin, dt);

    let mut v: Vec<C> = x.iter().map(|&xi| C::new(allen_cahn_ic(xi), 0.0)).collect();
    fwd.process(&mut v);

    let mut buf = vec![C::new(0.0, 0.0); n];
    let nonlinear = |vh: &[C], out: &mut Vec<C>| {
        out.copy_from_slice(vh);
        inv.process(out);
        for z in out.iter_mut() {
            let u = z.re * scale;
            *z = C::new(-gamma * u * u * u, 0.0);
        }
        fwd.process(out);
    };

    let mut u = Vec::with_capacity(n * n_out);
    let mut snapshot = |vh: &[C], u: &mut Vec<f64>| {
        buf.copy_from_slice(vh);
        inv.process(&mut buf);
        u.extend(buf.iter().map(|z| z.re * scale));
    };
    snapshot(&v, &mut u);

    let (mut nv, mut na, mut nb, mut nc) = (vec![C::default(); n], vec![C::default(); n], vec![C::default(); n], vec![C::default(); n]);
    let (mut a, mut b, mut c) = (vec![C::default(); n], vec![C::default(); n], vec![C::default(); n]);
    for step in 1..=steps {
        nonlinear(&v, &mut nv);
        for m in 0..n {
            a[m] = coef.e2[m] * v[m] + coef.q[m] * nv[m];
        }
        nonlinear(&a, &mut na);
        for m in 0..n {
            b[m] = coef.e2[m] * v[m] + coef.q[m] * na[m];
        }
        nonlinear(&b, &mut nb);
        for m in 0..n {
            c[m] = coef.e2[m] * a[m] + coef.q[m] * (2.0 * nb[m] - nv[m]);
        }
        nonlinear(&c, &mut nc);
        for m in 0..n {
            v[m] = coef.e[m] * v[m] + nv[m] * coef.f1[m] + 2.0 * (na[m] + nb[m]) * coef.f2[m] + nc[m] * coef.f3[m];
        }
        if v.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(PhysicsError::NonFiniteState { step });
        }
        if step % out_every == 0 {
            snapshot(&v, &mut u);
        }
    }
    let t = (0..n_out).map(|i| t_end * i as f64 / (n_out - 1) as f64).collect();
    Ok(Reference { x, t, u })
}

struct Coefficients {
    e: Vec<f64>,
    e2: Vec<f64>,
    q: Vec<f64>,
    f1: Vec<f64>,
    f2: Vec<f64>,
    f3: Vec<f64>,
}

impl Coefficients {
    fn new(lin: &[f64], h: f64) -> Self {
        const M: usize = 32;
        let roots: Vec<C> = (1..=M).map(|j| C::from_polar(1.0, PI * (j as f64 - 0.5) / M as f64)).collect();
        let mean = |l: f64, f: &dyn Fn(C) -> C| -> f64 {
            roots.iter().map(|&r| f(C::new(h * l, 0.0) + r).re).sum::<f64>() / M as f64
        };
        let mut s = Self {
            e: vec![],
            e2: vec![],
            q: vec![],
            f1: vec![],
            f2: vec![],
            f3: vec![],
        };
        for &l in lin {
            s.e.push((h * l).exp());
            s.e2.push((0.5 * h * l).exp());
            s.q.push(h * mean(l, &|z| ((z / 2.0).exp() - 1.0) / z));
            s.f1.push(h * mean(l, &|z| (-4.0 - z + z.exp() * (4.0 - 3.0 * z + z * z)) / (z * z * z)));
            s.f2.push(h * mean(l, &|z| (2.0 + z + z.exp() * (-2.0 + z)) / (z * z * z)));
            s.f3.push(h * mean(l, &|z| (-4.0 - 3.0 * z - z * z + z.exp() * (4.0 - z)) / (z * z * z)));
        }
        s
    }
}

impl Reference {
    pub fn at(&self, ti: usize, xi: usize) -> f64 {
        self.u[ti * self.x.len() + xi]
    }

    /// Points `(x, t)` and values on the sub-grid taking every
    /// `stride_x`-th spatial and `stride_t`-th temporal node.
    pub fn sample(&self, stride_x: usize, stride_t: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
        let mut pts = Vec::new();
        let mut vals = Vec::new();
        for ti in (0..self.t.len()).step_by(stride_t) {
            for xi in (0..self.x.len()).step_by(stride_x) {
                pts.push(vec![self.x[xi], self.t[ti]]);
                vals.push(self.at(ti, xi));
            }
        }
        (pts, vals)
    }

    /// Writes the grid as CSV: axis sizes, the `t` axis, the `x` axis, then
    /// one row of `u` per time.
    pub fn write_csv(&self, path: &Path) -> io::Result<()> {
        let join = |v: &[f64]| v.iter().map(|a| format!("{a:e}")).collect::<Vec<_>>().join(",");
        let mut s = format!("{},{}\n{}\n{}\n", self.t.len(), self.x.len(), join(&self.t), join(&self.x));
        for row in self.u.chunks(self.x.len()) {
            s.push_str(&join(row));
            s.push('\n');
        }
        fs::write(path, s)
    }

    pub fn read_csv(path: &Path) -> io::Result<Self> {
        let text = fs::read_to_string(path)?;
        let bad = |m: &str| io::Error::new(io::ErrorKind::InvalidData, m.to_string());
        let parse = |line: &str| -> io::Result<Vec<f64>> {
            line.split(',').map(|v| v.trim().parse::<f64>().map_err(|_| bad("bad number"))).collect()
        };
        let mut lines = text.lines();
        let sizes = parse(lines.next().ok_or_else(|| bad("empty"))?)?;
        if sizes.len() != 2 {
            return Err(bad("header needs two sizes"));
        }
        let (nt, nx) = (sizes[0] as usize, sizes[1] as usize);
        let t = parse(lines.next().ok_or_else(|| bad("missing t axis"))?)?;
        let x = parse(lines.next().ok_or_else(|| bad("missing x axis"))?)?;
        let mut u = Vec::with_capacity(nt * nx);
        for l in lines.filter(|l| !l.is_empty()) {
            u.extend(parse(l)?);
        }
        if t.len() != nt || x.len() != nx || u.len() != nt * nx {
            return Err(bad("sizes do not match header"));
        }
        Ok(Self { x, t, u })
    }
}
