//! Least squares and L1/L2-penalized linear models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub coef: Vec<f64>,
    pub intercept: f64,
}

impl LinearModel {
    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.coef.len() {
            return Err(Error::DimensionMismatch { expected: self.coef.len(), got: x.ncols() });
        }
        Ok(x.row_iter()
            .map(|r| self.intercept + r.iter().zip(&self.coef).map(|(a, b)| a * b).sum::<f64>())
            .collect())
    }
}

/// Coordinate-descent outcome.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CdReport {
    pub converged: bool,
    pub sweeps: usize,
    pub max_update: f64,
    pub duality_gap: f64,
}

fn check_xy(x: &DMatrix<f64>, y: &[f64]) -> Result<()> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if x.nrows() == 0 {
        return Err(Error::InvalidArgument("no training rows".into()));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::InvalidArgument("non-finite training value".into()));
    }
    Ok(())
}

fn centered(x: &DMatrix<f64>, y: &[f64]) -> (DMatrix<f64>, DVector<f64>, DVector<f64>, f64) {
    let means = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-means[j]);
    }
    let ym = y.iter().sum::<f64>() / y.len() as f64;
    let yc = DVector::from_iterator(y.len(), y.iter().map(|v| v - ym));
    (xc, yc, means, ym)
}

/// Minimum-norm least squares with an unpenalized intercept.
pub fn fit_ols(x: &DMatrix<f64>, y: &[f64]) -> Result<LinearModel> {
    check_xy(x, y)?;
    let (xc, yc, means, ym) = centered(x, y);
    let (n, d) = xc.shape();
    let svd = xc.svd(true, true);
    let smax = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let w = if smax == 0.0 {
        DVector::zeros(d)
    } else {
        let eps = smax * f64::EPSILON * n.max(d) as f64;
        svd.solve(&yc, eps).map_err(|e| Error::InvalidArgument(e.to_string()))?.column(0).into_owned()
    };
    let intercept = ym - w.dot(&means);
    Ok(LinearModel { coef: w.iter().cloned().collect(), intercept })
}

fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// Cyclic coordinate descent for
/// `(1/2n)|y - Xw - b|^2 + alpha*l1_ratio*|w|_1 + alpha*(1-l1_ratio)/2*|w|^2`.
pub fn fit_elasticnet(
    x: &DMatrix<f64>,
    y: &[f64],
    alpha: f64,
    l1_ratio: f64,
    tol: f64,
    max_sweeps: usize,
) -> Result<(LinearModel, CdReport)> {
    check_xy(x, y)?;
    if !(alpha >= 0.0) || !(0.0..=1.0).contains(&l1_ratio) {
        return Err(Error::InvalidArgument(format!("alpha {alpha}, l1_ratio {l1_ratio}")));
    }
    let (xc, yc, means, ym) = centered(x, y);
    let (n, d) = xc.shape();
    let nf = n as f64;
    let l1 = alpha * l1_ratio;
    let l2 = alpha * (1.0 - l1_ratio);
    let sq_norms: Vec<f64> = xc.column_iter().map(|c| c.norm_squared() / nf).collect();

    let mut w = DVector::<f64>::zeros(d);
    let mut r = yc.clone();
    let mut report = CdReport { converged: false, sweeps: 0, max_update: f64::INFINITY, duality_gap: f64::NAN };
    for sweep in 1..=max_sweeps {
        let mut max_update = 0.0f64;
        for j in 0..d {
            if sq_norms[j] == 0.0 {
                continue;
            }
            let col = xc.column(j);
            let old = w[j];
            let rho = col.dot(&r) / nf + sq_norms[j] * old;
            let new = soft_threshold(rho, l1) / (sq_norms[j] + l2);
            if new != old {
                r.axpy(old - new, &col, 1.0);
                w[j] = new;
                max_update = max_update.max((new - old).abs());
            }
        }
        report.sweeps = sweep;
        report.max_update = max_update;
        if max_update < tol {
            report.converged = true;
            break;
        }
    }
    report.duality_gap = duality_gap(&xc, &yc, &w, &r, l1, l2);
    if !report.converged {
        log::warn!(
            "coordinate descent stopped after {} sweeps (max update {:.3e}, gap {:.3e})",
            report.sweeps,
            report.max_update,
            report.duality_gap
        );
    }
    let intercept = ym - w.dot(&means);
    Ok((LinearModel { coef: w.iter().cloned().collect(), intercept }, report))
}

pub fn fit_lasso(x: &DMatrix<f64>, y: &[f64], alpha: f64, tol: f64, max_sweeps: usize) -> Result<(LinearModel, CdReport)> {
    fit_elasticnet(x, y, alpha, 1.0, tol, max_sweeps)
}

/// Primal minus dual objective, per sample.
fn duality_gap(xc: &DMatrix<f64>, yc: &DVector<f64>, w: &DVector<f64>, r: &DVector<f64>, l1: f64, l2: f64) -> f64 {
    let nf = xc.nrows() as f64;
    let xt_a = xc.transpose() * r - w * (nf * l2);
    let dual_norm = xt_a.amax();
    let r2 = r.norm_squared();
    let w1: f64 = w.iter().map(|v| v.abs()).sum();
    let (c, mut gap) = if dual_norm > nf * l1 {
        let c = nf * l1 / dual_norm;
        (c, 0.5 * (r2 + r2 * c * c))
    } else {
        (1.0, r2)
    };
    gap += nf * l1 * w1 - c * r.dot(yc) + 0.5 * nf * l2 * (1.0 + c * c) * w.norm_squared();
    gap / nf
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_line() {
        let x = DMatrix::from_column_slice(3, 1, &[1.0, 2.0, 3.0]);
        let m = fit_ols(&x, &[2.0, 4.0, 6.0]).unwrap();
        assert!((m.coef[0] - 2.0).abs() < 1e-10);
        assert!(m.intercept.abs() < 1e-10);
        assert_eq!(m.predict(&DMatrix::from_element(1, 1, 5.0)).unwrap().len(), 1);
    }

    #[test]
    fn constant_target() {
        let x = DMatrix::from_column_slice(4, 2, &[1.0, 2.0, 3.0, 5.0, 0.0, 1.0, 0.0, 1.0]);
        let m = fit_ols(&x, &[1.5; 4]).unwrap();
        assert!(m.coef.iter().all(|w| w.abs() < 1e-12));
        assert!((m.intercept - 1.5).abs() < 1e-12);
    }

    #[test]
    fn single_row() {
        let x = DMatrix::from_row_slice(1, 2, &[1.0, 2.0]);
        let m = fit_ols(&x, &[3.0]).unwrap();
        assert_eq!(m.coef, vec![0.0, 0.0]);
        assert_eq!(m.intercept, 3.0);
    }

    #[test]
    fn soft_threshold_regions() {
        assert_eq!(soft_threshold(3.0, 1.0), 2.0);
        assert_eq!(soft_threshold(-3.0, 1.0), -2.0);
        assert_eq!(soft_threshold(0.5, 1.0), 0.0);
    }
}
