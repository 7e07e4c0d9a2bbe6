use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PcaModel {
    /// One orthonormal component per row.
    pub components: DMatrix<f64>,
    pub explained_variance_ratio: Vec<f64>,
    pub center: DVector<f64>,
}

impl PcaModel {
    pub fn n_components(&self) -> usize {
        self.components.nrows()
    }

    pub fn n_features(&self) -> usize {
        self.center.len()
    }
}

/// Keeps the fewest leading components whose cumulative variance ratio reaches `variance_target`.
pub fn pca_fit(x: &DMatrix<f64>, variance_target: f64) -> Result<PcaModel> {
    if !(variance_target > 0.0 && variance_target <= 1.0) {
        return Err(Error::InvalidArgument(format!("variance target {variance_target} outside (0, 1]")));
    }
    let (n, p) = x.shape();
    if n < 2 || p == 0 {
        return Err(Error::InvalidArgument(format!("PCA needs at least 2 rows, got {n}x{p}")));
    }
    let center = DVector::from_iterator(p, x.column_iter().map(|c| c.mean()));
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-center[j]);
    }
    let scale = xc.abs().max();
    let svd = xc.svd(false, true);
    let v_t = svd.v_t.ok_or(Error::DegenerateMatrix)?;
    let s = &svd.singular_values;
    let total: f64 = s.iter().map(|v| v * v).sum();
    let max_s = s.iter().cloned().fold(0.0, f64::max);
    if !(total > 0.0) || max_s <= f64::EPSILON * scale * (n.max(p) as f64) {
        return Err(Error::DegenerateMatrix);
    }

    let mut order: Vec<usize> = (0..s.len()).collect();
    order.sort_by(|&a, &b| s[b].total_cmp(&s[a]).then(a.cmp(&b)));

    let mut ratios = Vec::new();
    let mut cum = 0.0;
    for &i in &order {
        let r = s[i] * s[i] / total;
        ratios.push(r);
        cum += r;
        if cum >= variance_target - 1e-12 {
            break;
        }
    }
    let d = ratios.len();
    let mut components = DMatrix::zeros(d, p);
    for (row, &i) in order.iter().take(d).enumerate() {
        let mut v = v_t.row(i).clone_owned();
        let pivot = (0..p)
            .max_by(|&a, &b| v[a].abs().total_cmp(&v[b].abs()).then(b.cmp(&a)))
            .unwrap();
        if v[pivot] < 0.0 {
            v.neg_mut();
        }
        components.set_row(row, &v);
    }
    Ok(PcaModel { components, explained_variance_ratio: ratios, center })
}

/// `(X - center) * components^T`.
pub fn pca_transform(model: &PcaModel, x: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    if x.ncols() != model.n_features() {
        return Err(Error::DimensionMismatch { expected: model.n_features(), got: x.ncols() });
    }
    let mut xc = x.clone();
    for (j, mut col) in xc.column_iter_mut().enumerate() {
        col.add_scalar_mut(-model.center[j]);
    }
    Ok(xc * model.components.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn points_on_a_line() {
        let x = DMatrix::from_fn(6, 3, |i, j| (i as f64 - 2.0) * [1.0, -2.0, 0.5][j] + j as f64);
        let m = pca_fit(&x, 0.9).unwrap();
        assert_eq!(m.n_components(), 1);
        assert!((m.explained_variance_ratio[0] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn constant_matrix_is_degenerate() {
        let x = DMatrix::from_element(5, 3, 2.5);
        assert!(matches!(pca_fit(&x, 0.9), Err(Error::DegenerateMatrix)));
    }

    #[test]
    fn center_maps_to_origin() {
        let x = DMatrix::from_fn(8, 4, |i, j| ((i * 7 + j * 3) % 5) as f64 + (i * j) as f64 * 0.1);
        let m = pca_fit(&x, 1.0).unwrap();
        let c = DMatrix::from_row_slice(1, 4, m.center.as_slice());
        assert!(pca_transform(&m, &c).unwrap().abs().max() < 1e-12);
        assert!(pca_transform(&m, &DMatrix::zeros(1, 3)).is_err());
    }
}
