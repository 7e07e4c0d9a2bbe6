use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Per-column z-score transform.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scaler {
    pub means: DVector<f64>,
    pub stds: DVector<f64>,
}

/// Column means and sample standard deviations; constant columns get std 1.
pub fn fit_scaler(x: &DMatrix<f64>) -> Result<Scaler> {
    let n = x.nrows();
    if n < 2 {
        return Err(Error::InvalidArgument(format!("scaler needs at least 2 rows, got {n}")));
    }
    let means = DVector::from_iterator(x.ncols(), x.column_iter().map(|c| c.mean()));
    let stds = DVector::from_iterator(
        x.ncols(),
        x.column_iter().zip(means.iter()).map(|(c, m)| {
            let ss: f64 = c.iter().map(|v| (v - m).powi(2)).sum();
            let s = (ss / (n - 1) as f64).sqrt();
            if s > 0.0 && s.is_finite() {
                s
            } else {
                1.0
            }
        }),
    );
    Ok(Scaler { means, stds })
}

impl Scaler {
    pub fn n_features(&self) -> usize {
        self.means.len()
    }

    fn check(&self, x: &DMatrix<f64>) -> Result<()> {
        if x.ncols() != self.n_features() {
            return Err(Error::DimensionMismatch { expected: self.n_features(), got: x.ncols() });
        }
        Ok(())
    }

    pub fn transform(&self, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(x)?;
        let mut out = x.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.apply(|v| *v = (*v - m) / s);
        }
        Ok(out)
    }

    pub fn inverse_transform(&self, z: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        self.check(z)?;
        let mut out = z.clone();
        for (j, mut col) in out.column_iter_mut().enumerate() {
            let (m, s) = (self.means[j], self.stds[j]);
            col.apply(|v| *v = *v * s + m);
        }
        Ok(out)
    }
}
