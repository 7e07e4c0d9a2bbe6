use crate::error::{Error, Result};

fn check(y: &[f64], yhat: &[f64]) -> Result<()> {
    if y.len() != yhat.len() {
        return Err(Error::LengthMismatch { left: y.len(), right: yhat.len() });
    }
    if y.is_empty() {
        return Err(Error::InvalidArgument("empty prediction".into()));
    }
    Ok(())
}

fn sse(y: &[f64], yhat: &[f64]) -> f64 {
    y.iter().zip(yhat).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn rmse(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    Ok((sse(y, yhat) / y.len() as f64).sqrt())
}

/// Coefficient of determination; negative when worse than predicting the mean.
pub fn r2(y: &[f64], yhat: &[f64]) -> Result<f64> {
    check(y, yhat)?;
    let mean = y.iter().sum::<f64>() / y.len() as f64;
    let sst: f64 = y.iter().map(|v| (v - mean) * (v - mean)).sum();
    if !(sst > 0.0) {
        return Err(Error::ConstantTarget);
    }
    Ok(1.0 - sse(y, yhat) / sst)
}
