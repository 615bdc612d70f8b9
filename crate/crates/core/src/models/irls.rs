//! Newton-Raphson (IRLS) for logistic regression on aggregated design rows.

use nalgebra::{DMatrix, DVector};

pub(crate) const MAX_ITERATIONS: usize = 100;
const STEP_TOL: f64 = 1e-10;
const LL_TOL: f64 = 1e-12;
/// Coefficients beyond this magnitude mean the likelihood has no finite maximum.
pub(crate) const SEPARATION_BOUND: f64 = 30.0;

/// A unique covariate pattern with its frequency and event count.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct DesignRow {
    /// Leading 1.0 for the intercept.
    pub x: Vec<f64>,
    pub n: f64,
    pub events: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) enum IrlsFailure {
    Singular { iterations: usize },
    Separation { iterations: usize, coefficient: usize, value: f64 },
    NoConvergence { iterations: usize, log_likelihood: f64 },
}

#[derive(Debug, Clone, PartialEq)]
pub(crate) struct IrlsFit {
    pub beta: Vec<f64>,
    pub iterations: usize,
    pub log_likelihood: f64,
}

pub(crate) fn sigmoid(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

/// `ln(1 + e^x)` without overflow.
fn softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

fn eta(x: &[f64], beta: &[f64]) -> f64 {
    x.iter().zip(beta).map(|(a, b)| a * b).sum()
}

pub(crate) fn log_likelihood(rows: &[DesignRow], beta: &[f64]) -> f64 {
    rows.iter()
        .map(|r| {
            let e = eta(&r.x, beta);
            r.events * e - r.n * softplus(e)
        })
        .sum()
}

#[cfg(test)]
fn gradient(rows: &[DesignRow], beta: &[f64]) -> Vec<f64> {
    let mut g = vec![0.0; beta.len()];
    for r in rows {
        let resid = r.events - r.n * sigmoid(eta(&r.x, beta));
        for (gj, xj) in g.iter_mut().zip(&r.x) {
            *gj += resid * xj;
        }
    }
    g
}

pub(crate) fn fit(rows: &[DesignRow], p: usize) -> Result<IrlsFit, IrlsFailure> {
    let mut beta = vec![0.0; p];
    let mut ll = log_likelihood(rows, &beta);
    for iteration in 1..=MAX_ITERATIONS {
        let mut h = DMatrix::<f64>::zeros(p, p);
        let mut g = DVector::<f64>::zeros(p);
        for r in rows {
            let mu = sigmoid(eta(&r.x, &beta));
            let w = r.n * mu * (1.0 - mu);
            let resid = r.events - r.n * mu;
            for i in 0..p {
                g[i] += resid * r.x[i];
                for j in 0..=i {
                    h[(i, j)] += w * r.x[i] * r.x[j];
                }
            }
        }
        for i in 0..p {
            for j in 0..i {
                h[(j, i)] = h[(i, j)];
            }
        }
        let step = match h.cholesky() {
            Some(c) => c.solve(&g),
            None => return Err(IrlsFailure::Singular { iterations: iteration }),
        };
        if step.iter().any(|s| !s.is_finite()) {
            return Err(IrlsFailure::Singular { iterations: iteration });
        }
        for (b, s) in beta.iter_mut().zip(step.iter()) {
            *b += s;
        }
        if let Some((coefficient, &value)) = beta
            .iter()
            .enumerate()
            .find(|(_, b)| b.abs() > SEPARATION_BOUND)
        {
            return Err(IrlsFailure::Separation {
                iterations: iteration,
                coefficient,
                value,
            });
        }
        let new_ll = log_likelihood(rows, &beta);
        let max_step = step.iter().fold(0.0f64, |m, s| m.max(s.abs()));
        if max_step < STEP_TOL || (new_ll - ll).abs() < LL_TOL {
            return Ok(IrlsFit {
                beta,
                iterations: iteration,
                log_likelihood: new_ll,
            });
        }
        ll = new_ll;
    }
    Err(IrlsFailure::NoConvergence {
        iterations: MAX_ITERATIONS,
        log_likelihood: ll,
    })
}
