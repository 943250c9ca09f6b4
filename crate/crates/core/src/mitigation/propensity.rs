//! Logistic inclusion-propensity model fitted by Newton-IRLS.
//!
//! Maximizes the penalized log-likelihood
//!
//! ```text
//! sum_i [ r_i eta_i - log(1 + exp(eta_i)) ] - ridge / 2 * sum_{j >= 1} beta_j^2
//! ```
//!
//! over the whole population frame, where `r_i` is the inclusion indicator
//! and `eta_i = x_i' beta` with an unpenalized intercept. Each Newton step is
//! halved until the objective does not decrease (up to its own rounding
//! error), so the recorded objective trace is monotone.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::population::{Population, SampleMembership, Unit};
use crate::summation::NeumaierSum;

pub const DEFAULT_RIDGE: f64 = 1e-6;
pub const DEFAULT_TOL: f64 = 1e-8;
pub const DEFAULT_MAX_ITER: usize = 100;

const MAX_HALVINGS: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitOptions {
    /// Penalty on non-intercept coefficients.
    pub ridge: f64,
    /// Convergence threshold on the max-norm of the penalized gradient.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            ridge: DEFAULT_RIDGE,
            tol: DEFAULT_TOL,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PropensityModel {
    /// Intercept first, then one coefficient per entry of `covariates`.
    pub coefficients: Vec<f64>,
    /// From the inverse penalized information at the solution.
    pub std_errors: Vec<f64>,
    pub covariates: Vec<String>,
    /// Covariate column indices into the population the model was fitted on.
    pub columns: Vec<usize>,
    pub converged: bool,
    pub iterations: usize,
    pub ridge: f64,
    pub tol: f64,
    pub gradient_norm: f64,
    /// Penalized log-likelihood at the start and after every iteration.
    pub objective_trace: Vec<f64>,
}

#[inline]
pub fn logistic(eta: f64) -> f64 {
    if eta >= 0.0 {
        1.0 / (1.0 + (-eta).exp())
    } else {
        let e = eta.exp();
        e / (1.0 + e)
    }
}

#[inline]
fn softplus(eta: f64) -> f64 {
    eta.max(0.0) + (-eta.abs()).exp().ln_1p()
}

/// Keeps fitted probabilities strictly inside (0, 1).
#[inline]
fn clamp_probability(p: f64) -> f64 {
    p.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

impl PropensityModel {
    pub fn linear_predictor(&self, unit: &Unit) -> f64 {
        self.coefficients[0]
            + self
                .columns
                .iter()
                .zip(&self.coefficients[1..])
                .map(|(&c, b)| unit.covariates[c] * b)
                .sum::<f64>()
    }

    pub fn predict_unit(&self, unit: &Unit) -> f64 {
        clamp_probability(logistic(self.linear_predictor(unit)))
    }

    /// Fitted inclusion probabilities for every unit of `pop`.
    pub fn predict(&self, pop: &Population) -> Result<Vec<f64>> {
        self.check_population(pop)?;
        Ok(pop.units().iter().map(|u| self.predict_unit(u)).collect())
    }

    pub(crate) fn check_population(&self, pop: &Population) -> Result<()> {
        if let Some(&c) = self.columns.iter().find(|&&c| c >= pop.covariate_dim()) {
            return Err(Error::invalid(format!(
                "model uses covariate column {c} but the population has {}",
                pop.covariate_dim()
            )));
        }
        Ok(())
    }
}

struct Design<'a> {
    pop: &'a Population,
    columns: &'a [usize],
    response: Vec<f64>,
}

struct Evaluation {
    objective: f64,
    /// Rounding bound on `objective`.
    slack: f64,
    gradient: DVector<f64>,
}

impl Design<'_> {
    fn dim(&self) -> usize {
        self.columns.len() + 1
    }

    fn row(&self, i: usize, out: &mut [f64]) {
        out[0] = 1.0;
        let cov = &self.pop.unit(i).covariates;
        for (slot, &c) in out[1..].iter_mut().zip(self.columns) {
            *slot = cov[c];
        }
    }

    fn penalty(&self, beta: &DVector<f64>, ridge: f64) -> f64 {
        0.5 * ridge * beta.iter().skip(1).map(|b| b * b).sum::<f64>()
    }

    fn evaluate(&self, beta: &DVector<f64>, ridge: f64) -> Evaluation {
        let p = self.dim();
        let mut x = vec![0.0; p];
        let mut ll = NeumaierSum::new();
        let mut magnitude = 0.0;
        let mut grad: Vec<NeumaierSum> = vec![NeumaierSum::new(); p];
        for (i, &r) in self.response.iter().enumerate() {
            self.row(i, &mut x);
            let eta: f64 = x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let term = r * eta - softplus(eta);
            ll.add(term);
            magnitude += term.abs() + eta.abs();
            let resid = r - logistic(eta);
            for (g, &xj) in grad.iter_mut().zip(&x) {
                g.add(resid * xj);
            }
        }
        let mut gradient = DVector::from_iterator(p, grad.iter().map(NeumaierSum::total));
        for j in 1..p {
            gradient[j] -= ridge * beta[j];
        }
        Evaluation {
            objective: ll.total() - self.penalty(beta, ridge),
            slack: 16.0 * f64::EPSILON * magnitude,
            gradient,
        }
    }

    fn hessian(&self, beta: &DVector<f64>, ridge: f64) -> DMatrix<f64> {
        let p = self.dim();
        let mut x = vec![0.0; p];
        let mut h = DMatrix::<f64>::zeros(p, p);
        for i in 0..self.response.len() {
            self.row(i, &mut x);
            let eta: f64 = x.iter().zip(beta.iter()).map(|(a, b)| a * b).sum();
            let mu = logistic(eta);
            let w = mu * (1.0 - mu);
            for a in 0..p {
                let wa = w * x[a];
                for b in a..p {
                    h[(a, b)] += wa * x[b];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                h[(a, b)] = h[(b, a)];
            }
        }
        for j in 1..p {
            h[(j, j)] += ridge;
        }
        h
    }
}

fn solve(h: &DMatrix<f64>, g: &DVector<f64>) -> Option<DVector<f64>> {
    match h.clone().cholesky() {
        Some(chol) => Some(chol.solve(g)),
        None => h.clone().lu().solve(g),
    }
}

fn inverse_diagonal(h: &DMatrix<f64>) -> Vec<f64> {
    let inv = h
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| h.clone().try_inverse());
    match inv {
        Some(m) => (0..h.nrows()).map(|j| m[(j, j)].max(0.0).sqrt()).collect(),
        None => vec![f64::NAN; h.nrows()],
    }
}

/// Fits on every covariate of the population.
pub fn fit_propensity(
    pop: &Population,
    membership: &SampleMembership,
    opts: &FitOptions,
) -> Result<PropensityModel> {
    if !pop.has_covariates() {
        return Err(Error::MissingCovariates);
    }
    let columns: Vec<usize> = (0..pop.covariate_dim()).collect();
    fit_propensity_on(pop, membership, &columns, opts)
}

/// Fits on the listed covariate columns; an empty list gives the
/// intercept-only model.
pub fn fit_propensity_on(
    pop: &Population,
    membership: &SampleMembership,
    columns: &[usize],
    opts: &FitOptions,
) -> Result<PropensityModel> {
    membership.check_aligned(pop)?;
    let n = membership.n();
    if n == 0 || n == pop.len() {
        return Err(Error::NoSamplingVariation {
            n,
            population: pop.len(),
        });
    }
    if let Some(&c) = columns.iter().find(|&&c| c >= pop.covariate_dim()) {
        return Err(Error::invalid(format!("no covariate column {c}")));
    }
    if !(opts.ridge >= 0.0) || !(opts.tol > 0.0) {
        return Err(Error::invalid("ridge must be >= 0 and tol > 0"));
    }

    let design = Design {
        pop,
        columns,
        response: membership
            .flags()
            .iter()
            .map(|&s| if s { 1.0 } else { 0.0 })
            .collect(),
    };
    let dim = design.dim();
    let f = n as f64 / pop.len() as f64;
    let mut beta = DVector::<f64>::zeros(dim);
    beta[0] = (f / (1.0 - f)).ln();

    let mut current = design.evaluate(&beta, opts.ridge);
    let mut trace = vec![current.objective];
    let mut iterations = 0;
    let mut converged = current.gradient.amax() <= opts.tol;

    while !converged && iterations < opts.max_iter {
        iterations += 1;
        let h = design.hessian(&beta, opts.ridge);
        let Some(direction) = solve(&h, &current.gradient) else {
            break;
        };
        let mut step = 1.0;
        let mut accepted = None;
        for _ in 0..MAX_HALVINGS {
            let candidate = &beta + &direction * step;
            let eval = design.evaluate(&candidate, opts.ridge);
            let floor = current.objective - current.slack.max(eval.slack);
            if eval.objective.is_finite() && eval.objective >= floor {
                accepted = Some((candidate, eval));
                break;
            }
            step *= 0.5;
        }
        let Some((next_beta, next)) = accepted else {
            break;
        };
        beta = next_beta;
        current = next;
        trace.push(current.objective);
        converged = current.gradient.amax() <= opts.tol;
    }

    let h = design.hessian(&beta, opts.ridge);
    Ok(PropensityModel {
        coefficients: beta.iter().copied().collect(),
        std_errors: inverse_diagonal(&h),
        covariates: columns
            .iter()
            .map(|&c| pop.covariate_names()[c].clone())
            .collect(),
        columns: columns.to_vec(),
        converged,
        iterations,
        ridge: opts.ridge,
        tol: opts.tol,
        gradient_norm: current.gradient.amax(),
        objective_trace: trace,
    })
}
