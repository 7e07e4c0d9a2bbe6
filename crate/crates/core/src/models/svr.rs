//! Epsilon-SVR trained by sequential minimal optimization.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const TAU: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Kernel {
    Linear,
    Rbf { gamma: f64 },
    Poly { gamma: f64, degree: u32 },
}

impl Kernel {
    pub fn eval(&self, a: &[f64], b: &[f64]) -> f64 {
        match *self {
            Kernel::Linear => dot(a, b),
            Kernel::Rbf { gamma } => {
                let d2: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
                (-gamma * d2).exp()
            }
            Kernel::Poly { gamma, degree } => (gamma * dot(a, b) + 1.0).powi(degree as i32),
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1 / (d * var(X))` over all entries, 1 when the matrix is constant.
pub fn default_gamma(x: &DMatrix<f64>) -> f64 {
    let n = x.len() as f64;
    if n == 0.0 {
        return 1.0;
    }
    let m = x.iter().sum::<f64>() / n;
    let var = x.iter().map(|v| (v - m).powi(2)).sum::<f64>() / n;
    if var > 0.0 {
        1.0 / (x.ncols() as f64 * var)
    } else {
        1.0
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SvrModel {
    pub kernel: Kernel,
    /// Rows are support vectors.
    pub support_vectors: Vec<Vec<f64>>,
    pub dual_coef: Vec<f64>,
    pub bias: f64,
}

impl SvrModel {
    pub fn n_features(&self) -> Option<usize> {
        self.support_vectors.first().map(|v| v.len())
    }

    pub fn predict_row(&self, x: &[f64]) -> f64 {
        self.bias
            + self
                .support_vectors
                .iter()
                .zip(&self.dual_coef)
                .map(|(sv, c)| c * self.kernel.eval(sv, x))
                .sum::<f64>()
    }

    pub fn predict(&self, x: &DMatrix<f64>, n_features: usize) -> Result<Vec<f64>> {
        if x.ncols() != n_features {
            return Err(Error::DimensionMismatch { expected: n_features, got: x.ncols() });
        }
        Ok((0..x.nrows())
            .map(|i| {
                let row: Vec<f64> = x.row(i).iter().cloned().collect();
                self.predict_row(&row)
            })
            .collect())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmoReport {
    pub converged: bool,
    pub iterations: usize,
    /// Maximal KKT violation at exit.
    pub violation: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrParams {
    pub kernel: Kernel,
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
    pub max_iter: usize,
}

struct Solver {
    q: Vec<f64>,
    n: usize,
    sign: Vec<f64>,
    alpha: Vec<f64>,
    grad: Vec<f64>,
    c: f64,
}

impl Solver {
    fn k(&self, t: usize, s: usize) -> f64 {
        self.q[(t % self.n) * self.n + s % self.n]
    }

    fn qts(&self, t: usize, s: usize) -> f64 {
        self.sign[t] * self.sign[s] * self.k(t, s)
    }

    fn is_upper(&self, t: usize) -> bool {
        self.alpha[t] >= self.c
    }

    fn is_lower(&self, t: usize) -> bool {
        self.alpha[t] <= 0.0
    }

    fn in_up(&self, t: usize) -> bool {
        if self.sign[t] > 0.0 {
            !self.is_upper(t)
        } else {
            !self.is_lower(t)
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.sign[t] > 0.0 {
            !self.is_lower(t)
        } else {
            !self.is_upper(t)
        }
    }

    /// Second-order working set selection; `None` once optimal within `tol`.
    fn select(&self, tol: f64) -> (Option<(usize, usize)>, f64) {
        let m = self.alpha.len();
        let mut gmax = f64::NEG_INFINITY;
        let mut i = None;
        for t in 0..m {
            if self.in_up(t) {
                let v = -self.sign[t] * self.grad[t];
                if v >= gmax {
                    gmax = v;
                    i = Some(t);
                }
            }
        }
        let Some(i) = i else {
            return (None, 0.0);
        };
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = None;
        let mut best = f64::INFINITY;
        for t in 0..m {
            if !self.in_low(t) {
                continue;
            }
            let yg = self.sign[t] * self.grad[t];
            gmax2 = gmax2.max(yg);
            let b = gmax + yg;
            if b > 0.0 {
                let a = self.k(i, i) + self.k(t, t) - 2.0 * self.sign[i] * self.sign[t] * self.qts(i, t);
                let a = if a > 0.0 { a } else { TAU };
                let obj = -(b * b) / a;
                if obj <= best {
                    best = obj;
                    j = Some(t);
                }
            }
        }
        let violation = gmax + gmax2;
        if violation < tol {
            return (None, violation);
        }
        (j.map(|j| (i, j)), violation)
    }

    fn update(&mut self, i: usize, j: usize) {
        let c = self.c;
        let (old_i, old_j) = (self.alpha[i], self.alpha[j]);
        let qij = self.qts(i, j);
        let (qii, qjj) = (self.k(i, i), self.k(j, j));
        if self.sign[i] != self.sign[j] {
            let a = (qii + qjj + 2.0 * qij).max(TAU);
            let delta = (-self.grad[i] - self.grad[j]) / a;
            let diff = old_i - old_j;
            let (mut ai, mut aj) = (old_i + delta, old_j + delta);
            if diff > 0.0 {
                if aj < 0.0 {
                    aj = 0.0;
                    ai = diff;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = -diff;
            }
            if diff > 0.0 {
                if ai > c {
                    ai = c;
                    aj = c - diff;
                }
            } else if aj > c {
                aj = c;
                ai = c + diff;
            }
            self.alpha[i] = ai;
            self.alpha[j] = aj;
        } else {
            let a = (qii + qjj - 2.0 * qij).max(TAU);
            let delta = (self.grad[i] - self.grad[j]) / a;
            let sum = old_i + old_j;
            let (mut ai, mut aj) = (old_i - delta, old_j + delta);
            if sum > c {
                if ai > c {
                    ai = c;
                    aj = sum - c;
                }
            } else if aj < 0.0 {
                aj = 0.0;
                ai = sum;
            }
            if sum > c {
                if aj > c {
                    aj = c;
                    ai = sum - c;
                }
            } else if ai < 0.0 {
                ai = 0.0;
                aj = sum;
            }
            self.alpha[i] = ai;
            self.alpha[j] = aj;
        }
        let (di, dj) = (self.alpha[i] - old_i, self.alpha[j] - old_j);
        for t in 0..self.alpha.len() {
            self.grad[t] += self.qts(t, i) * di + self.qts(t, j) * dj;
        }
    }

    fn rho(&self) -> f64 {
        let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
        let (mut sum, mut n_free) = (0.0, 0usize);
        for t in 0..self.alpha.len() {
            let yg = self.sign[t] * self.grad[t];
            if self.is_upper(t) {
                if self.sign[t] < 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else if self.is_lower(t) {
                if self.sign[t] > 0.0 {
                    ub = ub.min(yg);
                } else {
                    lb = lb.max(yg);
                }
            } else {
                n_free += 1;
                sum += yg;
            }
        }
        if n_free > 0 {
            sum / n_free as f64
        } else {
            (ub + lb) / 2.0
        }
    }
}

pub fn fit_svr(x: &DMatrix<f64>, y: &[f64], params: &SvrParams) -> Result<(SvrModel, SmoReport)> {
    let n = x.nrows();
    if n != y.len() {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n == 0 {
        return Err(Error::InvalidArgument("no training rows".into()));
    }
    if !(params.c > 0.0) || !(params.epsilon >= 0.0) || !(params.tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "C {}, epsilon {}, tol {}",
            params.c, params.epsilon, params.tol
        )));
    }
    let rows: Vec<Vec<f64>> = (0..n).map(|i| x.row(i).iter().cloned().collect()).collect();
    let mut q = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = params.kernel.eval(&rows[i], &rows[j]);
            q[i * n + j] = v;
            q[j * n + i] = v;
        }
    }
    let mut sign = vec![1.0; 2 * n];
    sign[n..].fill(-1.0);
    let grad: Vec<f64> = (0..2 * n)
        .map(|t| if t < n { params.epsilon - y[t] } else { params.epsilon + y[t - n] })
        .collect();
    let mut s = Solver { q, n, sign, alpha: vec![0.0; 2 * n], grad, c: params.c };

    let mut report = SmoReport { converged: false, iterations: 0, violation: f64::INFINITY };
    loop {
        let (ws, violation) = s.select(params.tol);
        report.violation = violation;
        match ws {
            None => {
                report.converged = true;
                break;
            }
            Some((i, j)) => {
                if report.iterations >= params.max_iter {
                    break;
                }
                s.update(i, j);
                report.iterations += 1;
            }
        }
    }
    if !report.converged {
        log::warn!(
            "SMO stopped after {} iterations with KKT violation {:.3e}",
            report.iterations,
            report.violation
        );
    }
    let bias = -s.rho();
    let mut support_vectors = Vec::new();
    let mut dual_coef = Vec::new();
    for (i, row) in rows.into_iter().enumerate() {
        let coef = s.alpha[i] - s.alpha[i + n];
        if coef != 0.0 {
            support_vectors.push(row);
            dual_coef.push(coef);
        }
    }
    Ok((SvrModel { kernel: params.kernel, support_vectors, dual_coef, bias }, report))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(kernel: Kernel) -> SvrParams {
        SvrParams { kernel, c: 1.0, epsilon: 0.1, tol: 1e-3, max_iter: 100_000 }
    }

    #[test]
    fn rbf_self_similarity() {
        let k = Kernel::Rbf { gamma: 0.7 };
        assert_eq!(k.eval(&[1.0, -2.0, 3.5], &[1.0, -2.0, 3.5]), 1.0);
    }

    #[test]
    fn constant_target_stays_in_tube() {
        let x = DMatrix::from_fn(8, 2, |i, j| (i * 2 + j) as f64 * 0.3);
        let (m, rep) = fit_svr(&x, &[0.4; 8], &params(Kernel::Rbf { gamma: 0.5 })).unwrap();
        assert!(rep.converged);
        assert!(m.dual_coef.is_empty());
        assert!((m.bias - 0.4).abs() < 1e-15);
        assert!(m.predict(&x, 2).unwrap().iter().all(|p| (p - 0.4).abs() < 1e-15));
    }

    #[test]
    fn linear_slope() {
        let xs: Vec<f64> = (0..30).map(|i| i as f64 / 10.0 - 1.5).collect();
        let y: Vec<f64> = xs.iter().map(|v| 2.0 * v).collect();
        let x = DMatrix::from_column_slice(30, 1, &xs);
        let p = SvrParams { c: 100.0, epsilon: 0.01, ..params(Kernel::Linear) };
        let (m, _) = fit_svr(&x, &y, &p).unwrap();
        let slope: f64 = m.support_vectors.iter().zip(&m.dual_coef).map(|(sv, c)| sv[0] * c).sum();
        assert!((slope - 2.0).abs() < 0.05, "{slope}");
    }
}
