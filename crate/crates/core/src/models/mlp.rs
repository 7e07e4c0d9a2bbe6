//! One-hidden-layer tanh network with a linear output.

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp {
    /// hidden x inputs
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MlpGrad {
    pub w1: DMatrix<f64>,
    pub b1: DVector<f64>,
    pub w2: DVector<f64>,
    pub b2: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    Gd,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MlpParams {
    pub hidden_units: usize,
    pub epochs: usize,
    pub learning_rate: f64,
    pub optimizer: Optimizer,
    pub seed: u64,
}

impl Mlp {
    /// Weights drawn from U(-1/sqrt(fan_in), 1/sqrt(fan_in)).
    pub fn init(n_inputs: usize, hidden: usize, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a1 = 1.0 / (n_inputs.max(1) as f64).sqrt();
        let a2 = 1.0 / (hidden.max(1) as f64).sqrt();
        let w1 = DMatrix::from_fn(hidden, n_inputs, |_, _| rng.gen_range(-a1..=a1));
        let b1 = DVector::from_fn(hidden, |_, _| rng.gen_range(-a1..=a1));
        let w2 = DVector::from_fn(hidden, |_, _| rng.gen_range(-a2..=a2));
        let b2 = rng.gen_range(-a2..=a2);
        Mlp { w1, b1, w2, b2 }
    }

    pub fn n_inputs(&self) -> usize {
        self.w1.ncols()
    }

    fn hidden(&self, x: &DMatrix<f64>) -> DMatrix<f64> {
        let mut h = x * self.w1.transpose();
        for mut row in h.row_iter_mut() {
            for (v, b) in row.iter_mut().zip(self.b1.iter()) {
                *v = (*v + b).tanh();
            }
        }
        h
    }

    pub fn predict(&self, x: &DMatrix<f64>) -> Result<Vec<f64>> {
        if x.ncols() != self.n_inputs() {
            return Err(Error::DimensionMismatch { expected: self.n_inputs(), got: x.ncols() });
        }
        let out = self.hidden(x) * &self.w2;
        Ok(out.iter().map(|v| v + self.b2).collect())
    }

    /// Mean squared error and its gradient with respect to every parameter.
    pub fn loss_and_grad(&self, x: &DMatrix<f64>, y: &[f64]) -> (f64, MlpGrad) {
        let n = x.nrows() as f64;
        let h = self.hidden(x);
        let out = &h * &self.w2;
        let err = DVector::from_iterator(y.len(), out.iter().zip(y).map(|(o, t)| o + self.b2 - t));
        let loss = err.norm_squared() / n;
        let d_out = err * (2.0 / n);
        let w2 = h.transpose() * &d_out;
        let b2 = d_out.sum();
        let mut dh = &d_out * self.w2.transpose();
        dh.zip_apply(&h, |g, hv| *g *= 1.0 - hv * hv);
        let w1 = dh.transpose() * x;
        let b1 = DVector::from_iterator(dh.ncols(), dh.column_iter().map(|c| c.sum()));
        (loss, MlpGrad { w1, b1, w2, b2 })
    }

    fn params_mut(&mut self) -> [&mut [f64]; 3] {
        [self.w1.as_mut_slice(), self.b1.as_mut_slice(), self.w2.as_mut_slice()]
    }
}

struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
}

impl Adam {
    const B1: f64 = 0.9;
    const B2: f64 = 0.999;
    const EPS: f64 = 1e-8;

    fn new(n: usize) -> Self {
        Adam { m: vec![0.0; n], v: vec![0.0; n], t: 0 }
    }

    fn step(&mut self, params: &mut [&mut f64], grads: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - Self::B1.powi(self.t);
        let c2 = 1.0 - Self::B2.powi(self.t);
        for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
            self.m[k] = Self::B1 * self.m[k] + (1.0 - Self::B1) * g;
            self.v[k] = Self::B2 * self.v[k] + (1.0 - Self::B2) * g * g;
            **p -= lr * (self.m[k] / c1) / ((self.v[k] / c2).sqrt() + Self::EPS);
        }
    }
}

/// Full-batch training. Returns the network and the loss before each epoch plus the final loss.
pub fn fit_mlp(x: &DMatrix<f64>, y: &[f64], params: &MlpParams) -> Result<(Mlp, Vec<f64>)> {
    if x.nrows() != y.len() {
        return Err(Error::LengthMismatch { left: x.nrows(), right: y.len() });
    }
    if x.nrows() == 0 || params.hidden_units == 0 {
        return Err(Error::InvalidArgument("empty training set or hidden layer".into()));
    }
    let mut net = Mlp::init(x.ncols(), params.hidden_units, params.seed);
    let n_params = net.w1.len() + net.b1.len() + net.w2.len() + 1;
    let mut adam = Adam::new(n_params);
    let mut trace = Vec::with_capacity(params.epochs + 1);
    for epoch in 0..params.epochs {
        let (loss, g) = net.loss_and_grad(x, y);
        if !loss.is_finite() {
            return Err(Error::DivergedLoss { epoch });
        }
        trace.push(loss);
        let grads: Vec<f64> = g
            .w1
            .iter()
            .chain(g.b1.iter())
            .chain(g.w2.iter())
            .cloned()
            .chain(std::iter::once(g.b2))
            .collect();
        let mut b2 = net.b2;
        {
            let [w1, b1, w2] = net.params_mut();
            let mut refs: Vec<&mut f64> = w1.iter_mut().chain(b1.iter_mut()).chain(w2.iter_mut()).collect();
            refs.push(&mut b2);
            match params.optimizer {
                Optimizer::Gd => {
                    for (p, g) in refs.into_iter().zip(&grads) {
                        *p -= params.learning_rate * g;
                    }
                }
                Optimizer::Adam => adam.step(&mut refs, &grads, params.learning_rate),
            }
        }
        net.b2 = b2;
    }
    let (loss, _) = net.loss_and_grad(x, y);
    if !loss.is_finite() {
        return Err(Error::DivergedLoss { epoch: params.epochs });
    }
    trace.push(loss);
    Ok((net, trace))
}
