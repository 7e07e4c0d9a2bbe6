use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use super::stats::f_survival;
use crate::error::{Error, Result};

/// F statistic assigned to a feature perfectly correlated with the target.
pub const F_SENTINEL: f64 = 1e12;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionScores {
    pub f_stats: Vec<f64>,
    pub p_values: Vec<f64>,
    pub selected_indices: Vec<usize>,
}

/// Univariate linear-regression F test of every column against `y`.
pub fn f_regression_scores(x: &DMatrix<f64>, y: &[f64]) -> Result<SelectionScores> {
    let n = x.nrows();
    if y.len() != n {
        return Err(Error::LengthMismatch { left: n, right: y.len() });
    }
    if n < 3 {
        return Err(Error::InvalidArgument(format!("F test needs at least 3 rows, got {n}")));
    }
    let my = y.iter().sum::<f64>() / n as f64;
    let cy: Vec<f64> = y.iter().map(|v| v - my).collect();
    let syy: f64 = cy.iter().map(|v| v * v).sum();
    if !(syy > 0.0) {
        return Err(Error::ConstantTarget);
    }
    let df = (n - 2) as f64;
    let mut f_stats = Vec::with_capacity(x.ncols());
    let mut p_values = Vec::with_capacity(x.ncols());
    for col in x.column_iter() {
        let mx = col.mean();
        let (mut sxx, mut sxy) = (0.0, 0.0);
        for (v, c) in col.iter().zip(&cy) {
            let d = v - mx;
            sxx += d * d;
            sxy += d * c;
        }
        let (f, p) = if !(sxx > 0.0) {
            (0.0, 1.0)
        } else {
            let resid = sxx * syy - sxy * sxy;
            if resid <= 1e-15 * sxx * syy {
                (F_SENTINEL, 0.0)
            } else {
                let f = (df * sxy * sxy / resid).min(F_SENTINEL);
                (f, f_survival(f, 1.0, df))
            }
        };
        f_stats.push(f);
        p_values.push(p);
    }
    Ok(SelectionScores { f_stats, p_values, selected_indices: Vec::new() })
}

/// Indices of the `k` largest F statistics, lower index first on ties, returned ascending.
pub fn select_k_best(scores: &SelectionScores, k: usize) -> Result<SelectionScores> {
    let max = scores.f_stats.len();
    if k == 0 || k > max {
        return Err(Error::BadK { k, max });
    }
    let mut order: Vec<usize> = (0..max).collect();
    order.sort_by(|&a, &b| scores.f_stats[b].total_cmp(&scores.f_stats[a]).then(a.cmp(&b)));
    let mut selected = order[..k].to_vec();
    selected.sort_unstable();
    Ok(SelectionScores { selected_indices: selected, ..scores.clone() })
}
