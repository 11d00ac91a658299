//! Bounded Nelder–Mead direct search in scaled coordinates.

use std::cell::Cell;

use super::lm::ParamSpace;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SimplexOptions {
    pub max_evaluations: usize,
    /// Spread of objective values across the simplex, relative.
    pub f_tol: f64,
    /// Simplex diameter in scaled units.
    pub x_tol: f64,
    /// Initial edge length in scaled units.
    pub initial_step: f64,
}

impl Default for SimplexOptions {
    fn default() -> Self {
        Self { max_evaluations: 4000, f_tol: 1e-14, x_tol: 1e-10, initial_step: 0.05 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimplexOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub iterations: usize,
    pub evaluations: usize,
    pub converged: bool,
}

pub fn nelder_mead<F>(f: &F, x0: &[f64], space: &ParamSpace, opts: &SimplexOptions) -> SimplexOutcome
where
    F: Fn(&[f64]) -> f64,
{
    let n = x0.len();
    let to_x = |u: &[f64]| {
        let mut x: Vec<f64> = u.iter().zip(&space.scale).map(|(u, s)| u * s).collect();
        space.clamp(&mut x);
        x
    };
    let evals = Cell::new(0usize);
    let eval = |u: &[f64]| {
        evals.set(evals.get() + 1);
        f(&to_x(u))
    };
    let u0: Vec<f64> = x0.iter().zip(&space.scale).map(|(x, s)| x / s).collect();
    let mut simplex = vec![u0.clone()];
    for i in 0..n {
        let mut u = u0.clone();
        u[i] += opts.initial_step * if u[i] >= 0.0 { 1.0 } else { -1.0 };
        simplex.push(u);
    }
    let mut values: Vec<f64> = simplex.iter().map(|u| eval(u)).collect();
    let mut iterations = 0;
    let mut converged = n == 0;
    while !converged && evals.get() < opts.max_evaluations {
        iterations += 1;
        let mut order: Vec<usize> = (0..=n).collect();
        order.sort_by(|&a, &b| values[a].total_cmp(&values[b]));
        simplex = order.iter().map(|&i| simplex[i].clone()).collect();
        values = order.iter().map(|&i| values[i]).collect();

        let spread = (values[n] - values[0]).abs();
        let diameter = simplex[1..]
            .iter()
            .map(|u| u.iter().zip(&simplex[0]).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max))
            .fold(0.0, f64::max);
        if diameter <= opts.x_tol || spread <= opts.f_tol * values[0].abs() || values[0] == 0.0 && spread == 0.0 {
            converged = true;
            break;
        }

        let centroid: Vec<f64> = (0..n).map(|j| simplex[..n].iter().map(|u| u[j]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> { (0..n).map(|j| centroid[j] + t * (simplex[n][j] - centroid[j])).collect() };
        let reflected = along(-1.0);
        let fr = eval(&reflected);
        if fr < values[0] {
            let expanded = along(-2.0);
            let fe = eval(&expanded);
            if fe < fr {
                simplex[n] = expanded;
                values[n] = fe;
            } else {
                simplex[n] = reflected;
                values[n] = fr;
            }
        } else if fr < values[n - 1] {
            simplex[n] = reflected;
            values[n] = fr;
        } else {
            let (contracted, fc) = if fr < values[n] {
                let c = along(-0.5);
                let v = eval(&c);
                (c, v)
            } else {
                let c = along(0.5);
                let v = eval(&c);
                (c, v)
            };
            if fc < values[n].min(fr) {
                simplex[n] = contracted;
                values[n] = fc;
            } else {
                for i in 1..=n {
                    let shrunk: Vec<f64> =
                        (0..n).map(|j| simplex[0][j] + 0.5 * (simplex[i][j] - simplex[0][j])).collect();
                    values[i] = eval(&shrunk);
                    simplex[i] = shrunk;
                }
            }
        }
    }
    let best = (0..=n).min_by(|&a, &b| values[a].total_cmp(&values[b])).unwrap_or(0);
    SimplexOutcome { x: to_x(&simplex[best]), value: values[best], iterations, evaluations: evals.get(), converged }
}
