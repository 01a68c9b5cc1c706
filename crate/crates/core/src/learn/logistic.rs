use ndarray::{Array1, Array2, ArrayView1, ArrayView2, Axis};
use serde::{Deserialize, Serialize};

use super::LearnError;

pub const MAX_ITERATIONS: usize = 10_000;
pub const GRAD_TOLERANCE: f64 = 1e-8;
/// Relative loss decrease below which an iteration counts as flat.
pub const LOSS_TOLERANCE: f64 = 1e-13;
/// Consecutive flat iterations that end the fit.
const FLAT_ITERATIONS: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingMeta {
    pub iterations: usize,
    pub final_loss: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogisticModel {
    pub weights: Vec<f64>,
    pub bias: f64,
    pub feature_layout_version: String,
    pub l2: f64,
    pub training_meta: TrainingMeta,
}

impl LogisticModel {
    pub fn decision(&self, x: ArrayView1<f64>) -> f64 {
        self.bias + x.iter().zip(&self.weights).map(|(a, w)| a * w).sum::<f64>()
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        sigmoid(self.decision(x))
    }

    pub fn predict_all(&self, x: ArrayView2<f64>) -> Vec<f64> {
        x.rows().into_iter().map(|r| self.predict(r)).collect()
    }
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// `log(1 + e^z)` without overflow.
fn softplus(z: f64) -> f64 {
    if z > 0.0 {
        z + (-z).exp().ln_1p()
    } else {
        z.exp().ln_1p()
    }
}

/// Regularized loss `sum_i nll_i + l2/2 * |w|^2` (bias unpenalized) and its
/// gradient with respect to `(w, b)`.
pub fn logistic_loss_and_grad(
    x: ArrayView2<f64>,
    y: &[bool],
    w: ArrayView1<f64>,
    b: f64,
    l2: f64,
) -> (f64, Array1<f64>, f64) {
    let z = x.dot(&w) + b;
    let mut loss = 0.5 * l2 * w.dot(&w);
    let mut resid = Array1::zeros(y.len());
    for (i, (&zi, &yi)) in z.iter().zip(y).enumerate() {
        let t = if yi { 1.0 } else { 0.0 };
        loss += softplus(zi) - t * zi;
        resid[i] = sigmoid(zi) - t;
    }
    let gw = x.t().dot(&resid) + &(&w * l2);
    let gb = resid.sum();
    (loss, gw, gb)
}

pub(crate) fn validate(x: ArrayView2<f64>, y: &[bool]) -> Result<(), LearnError> {
    if x.nrows() != y.len() {
        return Err(LearnError::DimensionMismatch {
            rows: x.nrows(),
            labels: y.len(),
        });
    }
    if y.len() < 2 {
        return Err(LearnError::TooFewSamples(y.len()));
    }
    if y.iter().all(|&v| v) || y.iter().all(|&v| !v) {
        return Err(LearnError::SingleClass);
    }
    for ((row, col), v) in x.indexed_iter() {
        if !v.is_finite() {
            return Err(LearnError::NonFiniteFeature { row, col });
        }
    }
    Ok(())
}

/// Fit by full-batch gradient descent from zero. Steps start at the
/// Barzilai-Borwein estimate and backtrack until the Armijo condition holds.
/// Stops once the largest gradient entry is below [`GRAD_TOLERANCE`] or the
/// relative loss decrease stays under [`LOSS_TOLERANCE`] for ten iterations.
pub fn fit_logistic(x: ArrayView2<f64>, y: &[bool], l2: f64) -> Result<LogisticModel, LearnError> {
    validate(x, y)?;
    if !(l2 >= 0.0 && l2.is_finite()) {
        return Err(LearnError::InvalidParameter(format!("l2 = {l2}")));
    }
    let d = x.ncols();
    let mut w = Array1::<f64>::zeros(d);
    let mut b = 0.0;
    let (mut loss, mut gw, mut gb) = logistic_loss_and_grad(x, y, w.view(), b, l2);
    // first step 1/L, with L bounded by the Hessian trace
    let lip = 0.25 * x.rows().into_iter().map(|r| r.dot(&r) + 1.0).sum::<f64>() + l2;
    let mut step = 1.0 / lip.max(1e-12);
    let mut iterations = 0;
    let mut converged = false;
    let mut flat = 0;
    while iterations < MAX_ITERATIONS {
        let gmax = gw.iter().fold(gb.abs(), |m, g| m.max(g.abs()));
        if gmax < GRAD_TOLERANCE {
            converged = true;
            break;
        }
        let gnorm2 = gw.dot(&gw) + gb * gb;
        let mut t = step;
        let (nw, nb, nloss, ngw, ngb) = loop {
            let nw = &w - &(&gw * t);
            let nb = b - t * gb;
            let (nl, ngw, ngb) = logistic_loss_and_grad(x, y, nw.view(), nb, l2);
            if nl <= loss - 1e-4 * t * gnorm2 || t < 1e-20 {
                break (nw, nb, nl, ngw, ngb);
            }
            t *= 0.5;
        };
        let sw = &nw - &w;
        let sb = nb - b;
        let yw = &ngw - &gw;
        let yb = ngb - gb;
        let sy = sw.dot(&yw) + sb * yb;
        let ss = sw.dot(&sw) + sb * sb;
        step = if sy > 0.0 { ss / sy } else { t };
        let stalled = nloss == loss && ss == 0.0;
        if loss - nloss <= LOSS_TOLERANCE * loss.abs().max(1.0) {
            flat += 1;
        } else {
            flat = 0;
        }
        w = nw;
        b = nb;
        loss = nloss;
        gw = ngw;
        gb = ngb;
        iterations += 1;
        if stalled {
            break;
        }
        if flat >= FLAT_ITERATIONS {
            converged = true;
            break;
        }
    }
    Ok(LogisticModel {
        weights: w.to_vec(),
        bias: b,
        feature_layout_version: String::new(),
        l2,
        training_meta: TrainingMeta {
            iterations,
            final_loss: loss,
            converged,
        },
    })
}

/// Column means and population SDs; zero-variance columns scale by 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub means: Vec<f64>,
    pub sds: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: ArrayView2<f64>) -> Self {
        let n = x.nrows().max(1) as f64;
        let means: Vec<f64> = x.sum_axis(Axis(0)).iter().map(|s| s / n).collect();
        let sds = x
            .columns()
            .into_iter()
            .zip(&means)
            .map(|(c, m)| {
                let v = c.iter().map(|a| (a - m) * (a - m)).sum::<f64>() / n;
                if v > 0.0 {
                    v.sqrt()
                } else {
                    1.0
                }
            })
            .collect();
        Self { means, sds }
    }

    pub fn transform(&self, x: ArrayView2<f64>) -> Array2<f64> {
        let mut out = x.to_owned();
        for mut row in out.rows_mut() {
            for (j, v) in row.iter_mut().enumerate() {
                *v = (*v - self.means[j]) / self.sds[j];
            }
        }
        out
    }

    pub fn transform_row(&self, x: ArrayView1<f64>) -> Array1<f64> {
        Array1::from_iter(x.iter().enumerate().map(|(j, v)| (v - self.means[j]) / self.sds[j]))
    }
}

/// Logistic model over standardized inputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScaledLogistic {
    pub scaler: Standardizer,
    pub model: LogisticModel,
}

impl ScaledLogistic {
    pub fn fit(x: ArrayView2<f64>, y: &[bool], l2: f64) -> Result<Self, LearnError> {
        validate(x, y)?;
        let scaler = Standardizer::fit(x);
        let model = fit_logistic(scaler.transform(x).view(), y, l2)?;
        Ok(Self { scaler, model })
    }

    pub fn predict(&self, x: ArrayView1<f64>) -> f64 {
        self.model.predict(self.scaler.transform_row(x).view())
    }

    pub fn predict_all(&self, x: ArrayView2<f64>) -> Vec<f64> {
        self.model.predict_all(self.scaler.transform(x).view())
    }
}
