//! Correlation statistics and the distribution tails they need.

use std::io::Write;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LANCZOS_G: f64 = 7.0;
const LANCZOS: [f64; 9] = [
    0.999_999_999_999_809_9,
    676.520_368_121_885_1,
    -1_259.139_216_722_402_8,
    771.323_428_777_653_1,
    -176.615_029_162_140_6,
    12.507_343_278_686_905,
    -0.138_571_095_265_720_12,
    9.984_369_578_019_572e-6,
    1.505_632_735_149_311_6e-7,
];

pub fn ln_gamma(x: f64) -> f64 {
    if x < 0.5 {
        // reflection
        let pi = std::f64::consts::PI;
        return (pi / (pi * x).sin()).ln() - ln_gamma(1.0 - x);
    }
    let x = x - 1.0;
    let mut a = LANCZOS[0];
    let t = x + LANCZOS_G + 0.5;
    for (i, c) in LANCZOS.iter().enumerate().skip(1) {
        a += c / (x + i as f64);
    }
    0.5 * (2.0 * std::f64::consts::PI).ln() + (x + 0.5) * t.ln() - t + a.ln()
}

fn beta_cf(a: f64, b: f64, x: f64) -> f64 {
    const TINY: f64 = 1e-300;
    let (qab, qap, qam) = (a + b, a + 1.0, a - 1.0);
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..=500 {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let del = d * c;
        h *= del;
        if (del - 1.0).abs() < 1e-15 {
            break;
        }
    }
    h
}

/// Regularized incomplete beta function I_x(a, b).
pub fn beta_reg(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x >= 1.0 {
        return 1.0;
    }
    let ln_front = ln_gamma(a + b) - ln_gamma(a) - ln_gamma(b) + a * x.ln() + b * (1.0 - x).ln();
    let front = ln_front.exp();
    if x < (a + 1.0) / (a + b + 2.0) {
        front * beta_cf(a, b, x) / a
    } else {
        1.0 - front * beta_cf(b, a, 1.0 - x) / b
    }
}

/// Upper tail P(F > f) of the F(d1, d2) distribution.
pub fn f_survival(f: f64, d1: f64, d2: f64) -> f64 {
    if f.is_nan() {
        return f64::NAN;
    }
    if f <= 0.0 {
        return 1.0;
    }
    if f.is_infinite() {
        return 0.0;
    }
    beta_reg(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)).clamp(0.0, 1.0)
}

/// Two-sided P(|T| > |t|) for Student's t with `df` degrees of freedom.
pub fn t_two_sided(t: f64, df: f64) -> f64 {
    if t.is_infinite() {
        return 0.0;
    }
    beta_reg(df / 2.0, 0.5, df / (df + t * t)).clamp(0.0, 1.0)
}

fn centered_norm(v: &[f64]) -> (Vec<f64>, f64) {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    let c: Vec<f64> = v.iter().map(|x| x - m).collect();
    let ss = c.iter().map(|x| x * x).sum::<f64>().sqrt();
    (c, ss)
}

/// Product-moment correlation and its two-sided p-value.
pub fn pearson(x: &[f64], y: &[f64]) -> Result<(f64, f64)> {
    if x.len() != y.len() {
        return Err(Error::LengthMismatch { left: x.len(), right: y.len() });
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidArgument(format!("pearson needs at least 3 points, got {n}")));
    }
    let (cx, sx) = centered_norm(x);
    let (cy, sy) = centered_norm(y);
    if sx == 0.0 || sy == 0.0 || !sx.is_finite() || !sy.is_finite() {
        return Err(Error::ConstantInput);
    }
    let r = (cx.iter().zip(&cy).map(|(a, b)| a * b).sum::<f64>() / (sx * sy)).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if r.abs() >= 1.0 {
        0.0
    } else {
        t_two_sided(r * (df / (1.0 - r * r)).sqrt(), df)
    };
    Ok((r, p))
}

/// Pairwise column correlations. Constant columns are zero off the diagonal.
pub fn correlation_matrix(x: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, p) = x.shape();
    let cols: Vec<(Vec<f64>, f64)> = x.column_iter().map(|c| centered_norm(c.as_slice())).collect();
    let mut out = DMatrix::identity(p, p);
    for i in 0..p {
        for j in i + 1..p {
            let (ci, si) = &cols[i];
            let (cj, sj) = &cols[j];
            let r = if *si > 0.0 && *sj > 0.0 && n > 0 {
                (ci.iter().zip(cj).map(|(a, b)| a * b).sum::<f64>() / (si * sj)).clamp(-1.0, 1.0)
            } else {
                0.0
            };
            out[(i, j)] = r;
            out[(j, i)] = r;
        }
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrelationReport {
    pub feature_corr: DMatrix<f64>,
    pub av_pearson_r: f64,
    pub av_p_value: f64,
}

impl CorrelationReport {
    pub fn new(x: &DMatrix<f64>, arousal: &[f64], valence: &[f64]) -> Result<Self> {
        if x.nrows() < 3 {
            return Err(Error::InvalidArgument(format!("need at least 3 rows, got {}", x.nrows())));
        }
        if arousal.len() != x.nrows() {
            return Err(Error::LengthMismatch { left: x.nrows(), right: arousal.len() });
        }
        let (r, p) = pearson(arousal, valence)?;
        Ok(CorrelationReport { feature_corr: correlation_matrix(x), av_pearson_r: r, av_p_value: p })
    }

    /// Square matrix with a header row and column of feature names.
    pub fn write_heatmap_csv<W: Write>(&self, names: &[String], out: W) -> Result<()> {
        let p = self.feature_corr.nrows();
        if names.len() != p {
            return Err(Error::DimensionMismatch { expected: p, got: names.len() });
        }
        let mut w = csv::Writer::from_writer(out);
        let mut header = vec![String::from("feature")];
        header.extend(names.iter().cloned());
        w.write_record(&header)?;
        for (i, name) in names.iter().enumerate() {
            let mut rec = vec![name.clone()];
            rec.extend((0..p).map(|j| format!("{}", self.feature_corr[(i, j)])));
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// `clip_id,arousal,valence` rows.
pub fn write_scatter_csv<W: Write>(ids: &[String], arousal: &[f64], valence: &[f64], out: W) -> Result<()> {
    if ids.len() != arousal.len() || ids.len() != valence.len() {
        return Err(Error::LengthMismatch { left: ids.len(), right: arousal.len().min(valence.len()) });
    }
    let mut w = csv::Writer::from_writer(out);
    w.write_record(["clip_id", "arousal", "valence"])?;
    for ((id, a), v) in ids.iter().zip(arousal).zip(valence) {
        w.write_record([id.clone(), a.to_string(), v.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gamma_at_integers() {
        let mut fact = 1.0f64;
        for k in 1..20 {
            assert!((ln_gamma(k as f64) - fact.ln()).abs() < 1e-12, "{k}");
            fact *= k as f64;
        }
        assert!((ln_gamma(0.5) - std::f64::consts::PI.sqrt().ln()).abs() < 1e-13);
    }

    #[test]
    fn beta_closed_forms() {
        // I_x(1, 1) = x, I_x(a, 1) = x^a
        for x in [0.1, 0.35, 0.8] {
            assert!((beta_reg(1.0, 1.0, x) - x).abs() < 1e-14);
            assert!((beta_reg(3.0, 1.0, x) - x.powi(3)).abs() < 1e-14);
        }
    }

    #[test]
    fn self_and_negated_correlation() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        let neg: Vec<f64> = x.iter().map(|v| -v).collect();
        assert_eq!(pearson(&x, &x).unwrap(), (1.0, 0.0));
        assert_eq!(pearson(&x, &neg).unwrap().0, -1.0);
        assert!(matches!(pearson(&x, &[2.0; 5]), Err(Error::ConstantInput)));
    }

    #[test]
    fn duplicated_and_constant_columns() {
        let x = DMatrix::from_row_slice(4, 3, &[1.0, 1.0, 3.0, 2.0, 2.0, 3.0, 4.0, 4.0, 3.0, 3.0, 3.0, 3.0]);
        let c = correlation_matrix(&x);
        assert!((c[(0, 1)] - 1.0).abs() < 1e-15);
        assert_eq!(c[(2, 2)], 1.0);
        assert_eq!(c[(0, 2)], 0.0);
        assert_eq!(c, c.transpose());
    }
}
