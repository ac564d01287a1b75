//! Accuracy model `Acc = β·exp(−N₀·e^(−αp·t)·k_dis) + c` and its
//! Levenberg–Marquardt fit.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::label::calibrated_bleach_rate;

/// One observation: initial molecule count, illumination time (s) and the
/// measured accuracy.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyPoint {
    pub n0: f64,
    pub t: f64,
    pub accuracy: f64,
}

pub fn accuracy_model(beta: f64, k_dis: f64, c: f64, alpha_p: f64, n0: f64, t: f64) -> f64 {
    beta * (-n0 * (-alpha_p * t).exp() * k_dis).exp() + c
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Fit `c` too instead of holding it at 1.
    pub free_c: bool,
    /// Starting (and, when the data has a single `t`, fixed) value of α·p.
    pub alpha_p_init: f64,
    /// Used for the starting value β₀ = −(1 − 1/classes).
    pub classes: usize,
    pub max_iterations: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            free_c: false,
            alpha_p_init: calibrated_bleach_rate(),
            classes: 36,
            max_iterations: 500,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AccuracyModelFit {
    pub beta: f64,
    pub k_dis: f64,
    pub c: f64,
    pub alpha_p: f64,
    /// α·p was held at its starting value because every point shares one `t`.
    pub alpha_p_fixed: bool,
    pub residual_r2: f64,
    pub iterations: usize,
    pub points: usize,
}

impl AccuracyModelFit {
    pub fn predict(&self, n0: f64, t: f64) -> f64 {
        accuracy_model(self.beta, self.k_dis, self.c, self.alpha_p, n0, t)
    }
}

/// Which parameters are free, in vector order: β, ln k_dis, [ln αp], [c].
struct Layout {
    alpha_free: bool,
    c_free: bool,
    alpha_p: f64,
    c: f64,
}

impl Layout {
    fn len(&self) -> usize {
        2 + self.alpha_free as usize + self.c_free as usize
    }

    fn unpack(&self, p: &[f64]) -> (f64, f64, f64, f64) {
        let mut i = 2;
        let alpha_p = if self.alpha_free {
            i += 1;
            p[2].exp()
        } else {
            self.alpha_p
        };
        let c = if self.c_free { p[i] } else { self.c };
        (p[0], p[1].exp(), alpha_p, c)
    }

    /// Model value and its gradient with respect to the packed parameters.
    fn eval(&self, p: &[f64], pt: &AccuracyPoint, grad: &mut [f64]) -> f64 {
        let (beta, k, ap, c) = self.unpack(p);
        let x = pt.n0 * (-ap * pt.t).exp();
        let e = (-k * x).exp();
        grad[0] = e;
        grad[1] = -beta * e * x * k;
        let mut i = 2;
        if self.alpha_free {
            grad[2] = beta * e * k * x * pt.t * ap;
            i += 1;
        }
        if self.c_free {
            grad[i] = 1.0;
        }
        beta * e + c
    }
}

/// Solves the small dense system `a·x = b` by Gaussian elimination with
/// partial pivoting. `None` if singular.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Option<Vec<f64>> {
    let n = b.len();
    for col in 0..n {
        let pivot = (col..n).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))?;
        if a[pivot][col].abs() < 1e-300 {
            return None;
        }
        a.swap(col, pivot);
        b.swap(col, pivot);
        for row in col + 1..n {
            let f = a[row][col] / a[col][col];
            for k in col..n {
                a[row][k] -= f * a[col][k];
            }
            b[row] -= f * b[col];
        }
    }
    let mut x = vec![0.0; n];
    for row in (0..n).rev() {
        let s: f64 = (row + 1..n).map(|k| a[row][k] * x[k]).sum();
        x[row] = (b[row] - s) / a[row][row];
    }
    x.iter().all(|v| v.is_finite()).then_some(x)
}

fn cost(layout: &Layout, p: &[f64], data: &[AccuracyPoint]) -> f64 {
    let mut g = vec![0.0; layout.len()];
    data.iter()
        .map(|pt| {
            let r = pt.accuracy - layout.eval(p, pt, &mut g);
            r * r
        })
        .sum()
}

/// Least-squares fit of the accuracy model.
///
/// β, k_dis and α·p are free with `c` held at 1 unless `options.free_c`.
/// When every point shares one illumination time only the product
/// `k_dis·e^(−αp·t)` is identifiable, so α·p stays at `options.alpha_p_init`.
pub fn fit_accuracy_model(data: &[AccuracyPoint], options: &FitOptions) -> Result<AccuracyModelFit> {
    if data.len() < 4 {
        return Err(Error::InsufficientData(format!("{} points, need at least 4", data.len())));
    }
    for pt in data {
        if !(pt.n0 >= 0.0 && pt.t >= 0.0 && pt.accuracy.is_finite() && pt.n0.is_finite() && pt.t.is_finite()) {
            return Err(Error::Format {
                what: "accuracy data",
                detail: format!("invalid point {pt:?}"),
            });
        }
    }
    if !(options.alpha_p_init > 0.0) {
        return Err(Error::domain("alpha_p_init", options.alpha_p_init, "> 0"));
    }
    let x0: Vec<f64> = data.iter().map(|p| p.n0 * (-options.alpha_p_init * p.t).exp()).collect();
    let distinct = {
        let mut xs = x0.clone();
        xs.sort_by(f64::total_cmp);
        xs.dedup_by(|a, b| (*a - *b).abs() <= 1e-12 * b.abs().max(1.0));
        xs.len()
    };
    if distinct < 2 {
        return Err(Error::InsufficientData("need at least two distinct N0·exp(-αp·t) values".into()));
    }
    let (lo, hi) = data
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), p| (lo.min(p.accuracy), hi.max(p.accuracy)));
    if hi - lo <= 1e-12 {
        return Err(Error::DegenerateData("accuracy is constant, k_dis is unidentifiable".into()));
    }

    let t_first = data[0].t;
    let alpha_free = data.iter().any(|p| (p.t - t_first).abs() > 1e-12);
    let layout = Layout {
        alpha_free,
        c_free: options.free_c,
        alpha_p: options.alpha_p_init,
        c: 1.0,
    };

    let beta0 = -(1.0 - 1.0 / options.classes.max(1) as f64);
    // ln((c − acc)/(−β₀)) = −k·x, regressed through the origin.
    let (sxy, sxx) = data.iter().zip(&x0).fold((0.0, 0.0), |(sxy, sxx), (p, &x)| {
        let ratio = (1.0 - p.accuracy) / -beta0;
        if ratio > 0.0 && ratio < 1.0 && x > 0.0 {
            (sxy + x * -ratio.ln(), sxx + x * x)
        } else {
            (sxy, sxx)
        }
    });
    let mean_x = x0.iter().sum::<f64>() / x0.len() as f64;
    let k0 = if sxx > 0.0 && sxy > 0.0 { sxy / sxx } else { 1.0 / mean_x.max(1e-9) };

    let mut p = vec![beta0, k0.ln()];
    if alpha_free {
        p.push(options.alpha_p_init.ln());
    }
    if options.free_c {
        p.push(1.0);
    }

    let m = layout.len();
    let mut lambda = 1e-3;
    let mut current = cost(&layout, &p, data);
    let mut grad = vec![0.0; m];
    let mut converged = false;
    let mut iterations = 0;
    while iterations < options.max_iterations {
        iterations += 1;
        let mut jtj = vec![vec![0.0; m]; m];
        let mut jtr = vec![0.0; m];
        for pt in data {
            let r = pt.accuracy - layout.eval(&p, pt, &mut grad);
            for i in 0..m {
                jtr[i] += grad[i] * r;
                for j in 0..m {
                    jtj[i][j] += grad[i] * grad[j];
                }
            }
        }
        let grad_norm = jtr.iter().map(|g| g.abs()).fold(0.0, f64::max);
        if grad_norm < 1e-15 || current < 1e-30 {
            converged = true;
            break;
        }
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = jtj.clone();
            for (i, row) in damped.iter_mut().enumerate() {
                row[i] += lambda * jtj[i][i].max(1e-12);
            }
            if let Some(step) = solve(damped, jtr.clone()) {
                let trial: Vec<f64> = p.iter().zip(&step).map(|(a, d)| a + d).collect();
                let c = cost(&layout, &trial, data);
                if c.is_finite() && c <= current {
                    let small_step = step
                        .iter()
                        .zip(&p)
                        .all(|(d, v)| d.abs() <= 1e-12 * (1.0 + v.abs()));
                    let small_gain = current - c <= 1e-15 * current.max(1e-300);
                    p = trial;
                    current = c;
                    lambda = (lambda * 0.3).max(1e-12);
                    accepted = true;
                    if small_step || small_gain {
                        converged = true;
                    }
                    break;
                }
            }
            lambda *= 10.0;
        }
        if !accepted {
            // No descent direction left at any damping: a stationary point.
            converged = true;
        }
        if converged {
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { iterations });
    }

    let (beta, k_dis, alpha_p, c) = layout.unpack(&p);
    let mean = data.iter().map(|d| d.accuracy).sum::<f64>() / data.len() as f64;
    let ss_tot: f64 = data.iter().map(|d| (d.accuracy - mean).powi(2)).sum();
    let residual_r2 = (1.0 - current / ss_tot).clamp(0.0, 1.0);
    Ok(AccuracyModelFit {
        beta,
        k_dis,
        c,
        alpha_p,
        alpha_p_fixed: !alpha_free,
        residual_r2,
        iterations,
        points: data.len(),
    })
}
