//! Bounded Levenberg–Marquardt with a forward-difference Jacobian.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LmSettings {
    pub max_iterations: usize,
    /// Converged when an accepted step improves the cost by less than this fraction.
    pub cost_rel_tol: f64,
    /// Converged when the scaled step norm drops below this.
    pub step_tol: f64,
    /// Forward-difference step, relative to each parameter's scale.
    pub diff_step: f64,
}

impl Default for LmSettings {
    fn default() -> Self {
        Self {
            max_iterations: 500,
            cost_rel_tol: 1e-10,
            step_tol: 1e-8,
            diff_step: 1e-6,
        }
    }
}

#[derive(Debug, Clone)]
pub struct LmOutcome {
    pub params: Vec<f64>,
    /// Sum of squared residuals at `params`.
    pub cost: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Parameters pinned at a bound at exit.
    pub at_bound: Vec<bool>,
}

pub struct Problem<'a, F> {
    pub residuals: F,
    /// Typical magnitude of each parameter; sets difference steps and step norms.
    pub scale: &'a [f64],
    pub lower: &'a [f64],
    pub upper: &'a [f64],
}

fn cost_of(r: &[f64]) -> f64 {
    r.iter().map(|v| v * v).sum()
}

impl<'a, F> Problem<'a, F>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }

    fn jacobian(&self, x: &[f64], r0: &[f64], rel_step: f64) -> Result<DMatrix<f64>> {
        let m = r0.len();
        let n = x.len();
        let mut jac = DMatrix::zeros(m, n);
        let mut probe = x.to_vec();
        for j in 0..n {
            let mut h = rel_step * self.scale[j].max(x[j].abs());
            // Step inward when sitting on the upper bound.
            if x[j] + h > self.upper[j] {
                h = -h;
            }
            probe[j] = x[j] + h;
            let r = (self.residuals)(&probe)?;
            for i in 0..m {
                jac[(i, j)] = (r[i] - r0[i]) / h;
            }
            probe[j] = x[j];
        }
        Ok(jac)
    }

    pub fn minimize(&self, x0: &[f64], settings: &LmSettings) -> Result<LmOutcome> {
        let n = x0.len();
        let mut x = x0.to_vec();
        self.clamp(&mut x);
        let mut r = (self.residuals)(&x)?;
        let mut cost = cost_of(&r);
        let mut lambda = 1e-3;
        let mut converged = cost == 0.0;
        let mut iterations = 0;

        while !converged && iterations < settings.max_iterations {
            iterations += 1;
            let jac = self.jacobian(&x, &r, settings.diff_step)?;
            let jt = jac.transpose();
            let a = &jt * &jac;
            let g = &jt * DVector::from_column_slice(&r);

            let mut accepted = false;
            while lambda < 1e16 {
                let mut lhs = a.clone();
                for i in 0..n {
                    let d = a[(i, i)].max(1e-30);
                    lhs[(i, i)] += lambda * d;
                }
                let Some(step) = lhs.lu().solve(&(-&g)) else {
                    lambda *= 10.0;
                    continue;
                };
                let mut trial: Vec<f64> = x.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
                self.clamp(&mut trial);
                let r_trial = (self.residuals)(&trial)?;
                let c_trial = cost_of(&r_trial);
                if c_trial.is_finite() && c_trial < cost {
                    let step_norm = trial
                        .iter()
                        .zip(&x)
                        .enumerate()
                        .map(|(i, (t, o))| ((t - o) / self.scale[i].max(o.abs())).powi(2))
                        .sum::<f64>()
                        .sqrt();
                    let improvement = (cost - c_trial) / cost;
                    x = trial;
                    r = r_trial;
                    cost = c_trial;
                    lambda = (lambda / 10.0).max(1e-12);
                    accepted = true;
                    if improvement < settings.cost_rel_tol
                        || step_norm < settings.step_tol
                        || cost == 0.0
                    {
                        converged = true;
                    }
                    break;
                }
                lambda *= 10.0;
            }
            if !accepted {
                // No descent direction left at any damping: a (bounded) minimum.
                converged = true;
            }
        }

        let at_bound = x
            .iter()
            .enumerate()
            .map(|(i, v)| *v <= self.lower[i] || *v >= self.upper[i])
            .collect();
        if !cost.is_finite() {
            return Err(Error::InvalidArgument("non-finite residuals".into()));
        }
        Ok(LmOutcome {
            params: x,
            cost,
            iterations,
            converged,
            at_bound,
        })
    }
}
