//! Bounded Levenberg–Marquardt on scaled parameters with a centered-difference
//! Jacobian. Falls back to Nelder–Mead when the Jacobian loses rank.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::simplex::{nelder_mead, SimplexOptions};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LsqOptions {
    pub max_iterations: usize,
    /// Stop when (cost − cost′)/cost falls below this.
    pub cost_tol: f64,
    /// Stop when the scaled step norm falls below this.
    pub step_tol: f64,
    /// Relative step for the centered-difference Jacobian.
    pub jacobian_step: f64,
    /// Smallest accepted σ_min/σ_max of the scaled Jacobian.
    pub rank_tol: f64,
}

impl Default for LsqOptions {
    fn default() -> Self {
        Self { max_iterations: 200, cost_tol: 1e-10, step_tol: 1e-12, jacobian_step: 1e-6, rank_tol: 1e-10 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    LevenbergMarquardt,
    NelderMead,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LsqOutcome {
    pub x: Vec<f64>,
    /// ½ Σ r²
    pub cost: f64,
    pub initial_cost: f64,
    pub residuals: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub method: Method,
    /// Unscaled Jacobian at `x`, m × n.
    pub jacobian: DMatrix<f64>,
}

impl LsqOutcome {
    /// Parameter covariance (JᵀJ)⁻¹ scaled by the reduced χ².
    pub fn covariance(&self) -> Option<DMatrix<f64>> {
        let (m, n) = self.jacobian.shape();
        if n == 0 {
            return Some(DMatrix::zeros(0, 0));
        }
        let jtj = self.jacobian.transpose() * &self.jacobian;
        let inv = jtj.try_inverse()?;
        let dof = m.saturating_sub(n).max(1) as f64;
        Some(inv * (2.0 * self.cost / dof))
    }
}

/// Box bounds and characteristic scales for each parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamSpace {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
    pub scale: Vec<f64>,
}

impl ParamSpace {
    /// Scales taken from |x0|, or a tenth of the bound width when x0 is zero.
    pub fn new(x0: &[f64], lower: Vec<f64>, upper: Vec<f64>) -> Result<Self> {
        if lower.len() != x0.len() || upper.len() != x0.len() {
            return Err(Error::invalid("bounds", "length mismatch"));
        }
        let mut scale = Vec::with_capacity(x0.len());
        for i in 0..x0.len() {
            if !(lower[i].is_finite() && upper[i].is_finite() && lower[i] < upper[i]) {
                return Err(Error::invalid("bounds", format!("parameter {i} needs finite lo < hi")));
            }
            if !(x0[i] >= lower[i] && x0[i] <= upper[i]) {
                return Err(Error::invalid("initial guess", format!("parameter {i} outside its bounds")));
            }
            let s = if x0[i] != 0.0 { x0[i].abs() } else { 0.1 * (upper[i] - lower[i]) };
            scale.push(s);
        }
        Ok(Self { lower, upper, scale })
    }

    pub fn clamp(&self, x: &mut [f64]) {
        for (i, v) in x.iter_mut().enumerate() {
            *v = v.clamp(self.lower[i], self.upper[i]);
        }
    }
}

fn cost_of(r: &[f64]) -> f64 {
    0.5 * r.iter().map(|v| v * v).sum::<f64>()
}

/// Centered-difference Jacobian, m × n. Steps shrink to stay inside bounds.
pub fn numeric_jacobian<F>(f: &F, x: &[f64], space: &ParamSpace, rel_step: f64) -> Result<DMatrix<f64>>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let r0 = f(x)?;
    let mut jac = DMatrix::zeros(r0.len(), x.len());
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(space.scale[j]);
        let up = (x[j] + h).min(space.upper[j]);
        let down = (x[j] - h).max(space.lower[j]);
        xp[j] = up;
        let rp = f(&xp)?;
        xp[j] = down;
        let rm = f(&xp)?;
        xp[j] = x[j];
        let width = up - down;
        for i in 0..r0.len() {
            jac[(i, j)] = (rp[i] - rm[i]) / width;
        }
    }
    Ok(jac)
}

/// Largest difference between Jᵀr (numeric J) and a centered difference of
/// the cost itself, relative to the largest gradient component.
pub fn gradient_consistency<F>(f: &F, x: &[f64], space: &ParamSpace, rel_step: f64) -> Result<f64>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let r = DVector::from_vec(f(x)?);
    let jac = numeric_jacobian(f, x, space, rel_step)?;
    let grad = jac.transpose() * r;
    let mut fd = vec![0.0; x.len()];
    let mut xp = x.to_vec();
    for j in 0..x.len() {
        let h = rel_step * x[j].abs().max(space.scale[j]);
        xp[j] = x[j] + h;
        let cp = cost_of(&f(&xp)?);
        xp[j] = x[j] - h;
        let cm = cost_of(&f(&xp)?);
        xp[j] = x[j];
        fd[j] = (cp - cm) / (2.0 * h);
    }
    let norm = grad.iter().chain(&fd).fold(f64::MIN_POSITIVE, |m, v| m.max(v.abs()));
    Ok(grad.iter().zip(&fd).map(|(g, d)| (g - d).abs() / norm).fold(0.0, f64::max))
}

/// Right singular vector of the smallest singular value when the scaled
/// Jacobian is rank deficient.
fn degenerate_direction(jac: &DMatrix<f64>, space: &ParamSpace, rank_tol: f64) -> Option<Vec<f64>> {
    let n = jac.ncols();
    if n == 0 {
        return None;
    }
    let scaled = jac * DMatrix::from_diagonal(&DVector::from_vec(space.scale.clone()));
    if jac.nrows() < n {
        return Some(vec![1.0 / (n as f64).sqrt(); n]);
    }
    let svd = scaled.svd(false, true);
    let s = &svd.singular_values;
    let (imin, smin) = s.iter().copied().enumerate().min_by(|a, b| a.1.total_cmp(&b.1))?;
    let smax = s.iter().copied().fold(0.0, f64::max);
    if smax == 0.0 || smin <= rank_tol * smax {
        let vt = svd.v_t?;
        Some(vt.row(imin).iter().copied().collect())
    } else {
        None
    }
}

/// Minimize ½‖f(x)‖² inside the box of `space`.
///
/// Returns `SingularJacobian` only when the Jacobian is still rank deficient
/// after the simplex fallback, since no covariance exists there.
pub fn levenberg_marquardt<F>(f: &F, x0: &[f64], space: &ParamSpace, opts: &LsqOptions) -> Result<LsqOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let n = x0.len();
    let mut x = x0.to_vec();
    let mut r = f(&x)?;
    let mut cost = cost_of(&r);
    let initial_cost = cost;
    if n == 0 {
        return Ok(LsqOutcome {
            x,
            cost,
            initial_cost,
            residuals: r.clone(),
            iterations: 0,
            converged: true,
            method: Method::LevenbergMarquardt,
            jacobian: DMatrix::zeros(r.len(), 0),
        });
    }
    let scale = DVector::from_vec(space.scale.clone());
    let mut lambda = 1e-3;
    let mut converged = cost == 0.0;
    let mut iterations = 0;
    let mut jac = numeric_jacobian(f, &x, space, opts.jacobian_step)?;
    while !converged && iterations < opts.max_iterations {
        if let Some(_dir) = degenerate_direction(&jac, space, opts.rank_tol) {
            return simplex_fallback(f, &x, space, opts, initial_cost, iterations);
        }
        iterations += 1;
        let js = &jac * DMatrix::from_diagonal(&scale);
        let a = js.transpose() * &js;
        let g = js.transpose() * DVector::from_column_slice(&r);
        let diag_floor = a.diagonal().max() * 1e-15;
        let mut accepted = false;
        while lambda < 1e16 {
            let mut damped = a.clone();
            for i in 0..n {
                damped[(i, i)] += lambda * a[(i, i)].max(diag_floor);
            }
            let Some(chol) = damped.cholesky() else {
                lambda *= 10.0;
                continue;
            };
            let step = chol.solve(&(-&g));
            let mut trial: Vec<f64> = (0..n).map(|i| x[i] + scale[i] * step[i]).collect();
            space.clamp(&mut trial);
            let taken: f64 = (0..n).map(|i| ((trial[i] - x[i]) / scale[i]).powi(2)).sum::<f64>().sqrt();
            let trial_r = match f(&trial) {
                Ok(v) => v,
                Err(Error::ModelEvalFailure { .. }) => {
                    lambda *= 10.0;
                    continue;
                }
                Err(e) => return Err(e),
            };
            let trial_cost = cost_of(&trial_r);
            if trial_cost < cost {
                let decrease = (cost - trial_cost) / cost;
                x = trial;
                r = trial_r;
                cost = trial_cost;
                lambda = (lambda / 3.0).max(1e-12);
                accepted = true;
                if decrease < opts.cost_tol || taken < opts.step_tol || cost == 0.0 {
                    converged = true;
                }
                break;
            }
            if taken < opts.step_tol {
                // the box or round-off pins us here
                converged = true;
                break;
            }
            lambda *= 4.0;
        }
        if !accepted && !converged {
            // damping exhausted without a decrease: local minimum to round-off
            converged = true;
        }
        jac = numeric_jacobian(f, &x, space, opts.jacobian_step)?;
    }
    if !converged {
        return Err(Error::MaxIterations(opts.max_iterations));
    }
    Ok(LsqOutcome {
        x,
        cost,
        initial_cost,
        residuals: r,
        iterations,
        converged,
        method: Method::LevenbergMarquardt,
        jacobian: jac,
    })
}

fn simplex_fallback<F>(
    f: &F,
    x: &[f64],
    space: &ParamSpace,
    opts: &LsqOptions,
    initial_cost: f64,
    done: usize,
) -> Result<LsqOutcome>
where
    F: Fn(&[f64]) -> Result<Vec<f64>>,
{
    let objective = |p: &[f64]| match f(p) {
        Ok(r) => cost_of(&r),
        Err(_) => f64::INFINITY,
    };
    let sopts = SimplexOptions { max_evaluations: 200 * (x.len() + 1) * 10, ..SimplexOptions::default() };
    let out = nelder_mead(&objective, x, space, &sopts);
    let residuals = f(&out.x)?;
    let jacobian = numeric_jacobian(f, &out.x, space, opts.jacobian_step)?;
    if let Some(dir) = degenerate_direction(&jacobian, space, opts.rank_tol) {
        return Err(Error::SingularJacobian {
            direction: dir.into_iter().enumerate().map(|(i, v)| (format!("p{i}"), v)).collect(),
        });
    }
    Ok(LsqOutcome {
        cost: cost_of(&residuals),
        x: out.x,
        initial_cost,
        residuals,
        iterations: done + out.iterations,
        converged: out.converged,
        method: Method::NelderMead,
        jacobian,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn exp_model(t: &[f64], y: &[f64]) -> impl Fn(&[f64]) -> Result<Vec<f64>> {
        let (t, y) = (t.to_vec(), y.to_vec());
        move |p: &[f64]| Ok(t.iter().zip(&y).map(|(t, y)| p[0] * (-p[1] * t).exp() + p[2] - y).collect())
    }

    #[test]
    fn recovers_exponential() {
        let t: Vec<f64> = (0..40).map(|i| i as f64 * 0.1).collect();
        let y: Vec<f64> = t.iter().map(|t| 2.5 * (-1.3 * t).exp() + 0.4).collect();
        let f = exp_model(&t, &y);
        let x0 = [1.0, 0.5, 0.0];
        let space = ParamSpace::new(&x0, vec![0.0, 0.01, -5.0], vec![10.0, 10.0, 5.0]).unwrap();
        let out = levenberg_marquardt(&f, &x0, &space, &LsqOptions::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.method, Method::LevenbergMarquardt);
        for (a, b) in out.x.iter().zip([2.5, 1.3, 0.4]) {
            assert!((a - b).abs() < 1e-7, "{:?}", out.x);
        }
        assert!(out.cost <= out.initial_cost);
    }

    #[test]
    fn rosenbrock_residuals() {
        let f = |p: &[f64]| Ok(vec![10.0 * (p[1] - p[0] * p[0]), 1.0 - p[0]]);
        let x0 = [-1.2, 1.0];
        let space = ParamSpace::new(&x0, vec![-5.0, -5.0], vec![5.0, 5.0]).unwrap();
        let out = levenberg_marquardt(&f, &x0, &space, &LsqOptions::default()).unwrap();
        assert!((out.x[0] - 1.0).abs() < 1e-6 && (out.x[1] - 1.0).abs() < 1e-6, "{:?}", out.x);
    }

    #[test]
    fn respects_bounds() {
        let f = |p: &[f64]| Ok(vec![p[0] - 3.0]);
        let x0 = [0.5];
        let space = ParamSpace::new(&x0, vec![0.0], vec![1.0]).unwrap();
        let out = levenberg_marquardt(&f, &x0, &space, &LsqOptions::default()).unwrap();
        assert_eq!(out.x[0], 1.0);
    }

    #[test]
    fn degenerate_pair_reports_direction() {
        // only the sum a + b is observable
        let f = |p: &[f64]| Ok((0..10).map(|i| (p[0] + p[1]) * i as f64 - 3.0 * i as f64).collect());
        let x0 = [1.0, 1.0];
        let space = ParamSpace::new(&x0, vec![-10.0, -10.0], vec![10.0, 10.0]).unwrap();
        match levenberg_marquardt(&f, &x0, &space, &LsqOptions::default()) {
            Err(Error::SingularJacobian { direction }) => {
                let (a, b) = (direction[0].1, direction[1].1);
                assert!((a + b).abs() < 1e-6, "{direction:?}");
            }
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn no_free_parameters() {
        let f = |_: &[f64]| Ok(vec![3.0, 4.0]);
        let space = ParamSpace::new(&[], vec![], vec![]).unwrap();
        let out = levenberg_marquardt(&f, &[], &space, &LsqOptions::default()).unwrap();
        assert_eq!(out.iterations, 0);
        assert_eq!(out.cost, 12.5);
    }

    #[test]
    fn covariance_of_linear_fit() {
        // y = a + b t with unit residual scale; compare with normal equations
        let t: Vec<f64> = (0..20).map(|i| i as f64).collect();
        let y: Vec<f64> =
            t.iter().enumerate().map(|(i, t)| 1.0 + 0.5 * t + if i % 2 == 0 { 0.1 } else { -0.1 }).collect();
        let (tt, yy) = (t.clone(), y.clone());
        let f = move |p: &[f64]| Ok(tt.iter().zip(&yy).map(|(t, y)| p[0] + p[1] * t - y).collect());
        let x0 = [0.0, 0.0];
        let space = ParamSpace::new(&x0, vec![-10.0, -10.0], vec![10.0, 10.0]).unwrap();
        let out = levenberg_marquardt(&f, &x0, &space, &LsqOptions::default()).unwrap();
        let cov = out.covariance().unwrap();
        let x = DMatrix::from_fn(20, 2, |i, j| if j == 0 { 1.0 } else { t[i] });
        let s2 = 2.0 * out.cost / 18.0;
        let oracle = (x.transpose() * &x).try_inverse().unwrap() * s2;
        assert!((cov - oracle).abs().max() < 1e-8);
    }

    proptest! {
        #[test]
        fn jacobian_gradient_consistent(a in 0.5f64..5.0, k in 0.1f64..3.0, c in -1.0f64..1.0) {
            let t: Vec<f64> = (0..30).map(|i| i as f64 * 0.1).collect();
            let y: Vec<f64> = t.iter().map(|t| 2.0 * (-1.0 * t).exp() + 0.3 + 0.01 * (7.0 * t).sin()).collect();
            let f = exp_model(&t, &y);
            let x = [a, k, c];
            let space = ParamSpace::new(&x, vec![0.0, 0.0, -5.0], vec![10.0, 10.0, 5.0]).unwrap();
            let worst = gradient_consistency(&f, &x, &space, 1e-6).unwrap();
            prop_assert!(worst <= 1e-6, "{worst}");
        }
    }
}
