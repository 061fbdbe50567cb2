//! Likelihood layer: exponential-family definitions, IRLS fitting of the
//! truncated null model (intercept, scalar covariates, leading eigenbasis
//! scores), AIC-based truncation selection, and the Poisson intercept
//! identity used by the scan closed forms.

use crate::fda::{eigenfunction_eval, BasisSystem, FdaError, FunctionalDesign};
use crate::linalg;
use nalgebra::{DMatrix, DVector};
use ndarray::{Array1, Array2};
use rand::Rng;
use rand_distr::Distribution;
use thiserror::Error;

const MAX_ITERATIONS: usize = 100;
const LOGLIK_REL_TOL: f64 = 1e-10;
const SCORE_REL_TOL: f64 = 1e-9;
const CORRELATION_LIMIT: f64 = 0.9999;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Family {
    Poisson,
    Bernoulli,
    Gaussian,
}

impl std::fmt::Display for Family {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Family::Poisson => "poisson",
            Family::Bernoulli => "bernoulli",
            Family::Gaussian => "gaussian",
        })
    }
}

impl std::str::FromStr for Family {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "poisson" => Ok(Family::Poisson),
            "bernoulli" => Ok(Family::Bernoulli),
            "gaussian" => Ok(Family::Gaussian),
            other => Err(format!(
                "unknown family {other:?}; expected poisson, bernoulli, or gaussian"
            )),
        }
    }
}

impl Family {
    /// Canonical inverse link: exp, logistic, identity.
    pub fn inverse_link(&self, eta: f64) -> f64 {
        match self {
            Family::Poisson => eta.clamp(-700.0, 700.0).exp(),
            Family::Bernoulli => {
                let e = eta.clamp(-700.0, 700.0);
                1.0 / (1.0 + (-e).exp())
            }
            Family::Gaussian => eta,
        }
    }

    /// Variance function evaluated at the mean.
    pub fn variance(&self, mu: f64) -> f64 {
        match self {
            Family::Poisson => mu.max(1e-300),
            Family::Bernoulli => (mu * (1.0 - mu)).clamp(1e-12, 0.25),
            Family::Gaussian => 1.0,
        }
    }

    fn initial_mean(&self, y: f64) -> f64 {
        match self {
            Family::Poisson => y + 0.5,
            Family::Bernoulli => (y + 0.5) / 2.0,
            Family::Gaussian => y,
        }
    }

    fn link(&self, mu: f64) -> f64 {
        match self {
            Family::Poisson => mu.max(1e-300).ln(),
            Family::Bernoulli => {
                let m = mu.clamp(1e-12, 1.0 - 1e-12);
                (m / (1.0 - m)).ln()
            }
            Family::Gaussian => mu,
        }
    }

    fn validate_response(&self, y: &Array1<f64>) -> Result<(), GlmError> {
        for (index, &value) in y.iter().enumerate() {
            let ok = match self {
                Family::Poisson => value.is_finite() && value >= 0.0 && value.fract() == 0.0,
                Family::Bernoulli => value == 0.0 || value == 1.0,
                Family::Gaussian => value.is_finite(),
            };
            if !ok {
                return Err(GlmError::InvalidResponse {
                    family: *self,
                    index,
                    value,
                });
            }
        }
        Ok(())
    }

    /// Draws one outcome with the given mean (and dispersion, Gaussian only).
    pub fn sample<R: Rng + ?Sized>(&self, mu: f64, dispersion: Option<f64>, rng: &mut R) -> f64 {
        match self {
            Family::Poisson => {
                if mu <= 0.0 {
                    0.0
                } else {
                    rand_distr::Poisson::new(mu)
                        .expect("positive finite mean")
                        .sample(rng)
                }
            }
            Family::Bernoulli => {
                let p = mu.clamp(0.0, 1.0);
                if rng.random_bool(p) {
                    1.0
                } else {
                    0.0
                }
            }
            Family::Gaussian => {
                let sd = dispersion.unwrap_or(1.0).max(0.0).sqrt();
                rand_distr::Normal::new(mu, sd)
                    .expect("finite mean and sd")
                    .sample(rng)
            }
        }
    }
}

/// Full log-likelihood of independent observations with means `mu`.
/// Gaussian uses `dispersion` when given, otherwise the profiled MLE
/// variance RSS/n. Conventions: 0*log(0) = 0.
pub fn log_likelihood(
    y: &Array1<f64>,
    mu: &Array1<f64>,
    family: Family,
    dispersion: Option<f64>,
) -> f64 {
    match family {
        Family::Poisson => y
            .iter()
            .zip(mu.iter())
            .map(|(&yi, &mi)| {
                let term = if yi == 0.0 { 0.0 } else { yi * mi.max(1e-300).ln() };
                term - mi - statrs::function::gamma::ln_gamma(yi + 1.0)
            })
            .sum(),
        Family::Bernoulli => y
            .iter()
            .zip(mu.iter())
            .map(|(&yi, &mi)| {
                let m = mi.clamp(1e-300, 1.0 - 1e-16);
                let a = if yi == 0.0 { 0.0 } else { yi * m.ln() };
                let b = if yi == 1.0 { 0.0 } else { (1.0 - yi) * (1.0 - m).ln() };
                a + b
            })
            .sum(),
        Family::Gaussian => {
            let n = y.len() as f64;
            let rss: f64 = y
                .iter()
                .zip(mu.iter())
                .map(|(&yi, &mi)| (yi - mi).powi(2))
                .sum();
            match dispersion {
                Some(s2) => {
                    let s2 = s2.max(1e-290);
                    -0.5 * n * (2.0 * std::f64::consts::PI * s2).ln() - rss / (2.0 * s2)
                }
                None => {
                    let s2 = (rss / n).max(1e-290);
                    -0.5 * n * ((2.0 * std::f64::consts::PI * s2).ln() + 1.0)
                }
            }
        }
    }
}

#[derive(Debug, Error)]
pub enum GlmError {
    #[error("{what}: expected {expected} rows, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("design matrix has no columns")]
    EmptyDesign,
    #[error("design has {rows} rows but {cols} columns; need at least as many rows")]
    TooFewRows { rows: usize, cols: usize },
    #[error("invalid response for {family} family at index {index}: {value}")]
    InvalidResponse {
        family: Family,
        index: usize,
        value: f64,
    },
    #[error("population at index {index} must be positive and finite, got {value}")]
    InvalidPopulation { index: usize, value: f64 },
    #[error("non-finite design entry at row {row}, column {col}")]
    NonFiniteDesign { row: usize, col: usize },
    #[error("collinear design columns: {0}")]
    Collinear(String),
    #[error("weighted least-squares system singular at iteration {iteration}")]
    SingularSystem { iteration: usize },
    #[error("log-likelihood became non-finite at iteration {iteration}")]
    Diverged { iteration: usize },
    #[error("model requires functional scores but none were supplied")]
    MissingScores,
    #[error("inertia cap must lie in (0, 1], got {0}")]
    InvalidInertiaCap(f64),
    #[error("truncation {requested} exceeds the {available} available components")]
    TruncationTooLarge { requested: usize, available: usize },
    #[error("eigenvalues sum to zero; truncation candidates undefined")]
    DegenerateEigenvalues,
    #[error("every truncation candidate failed: {0}")]
    AllCandidatesFailed(String),
    #[error("degenerate response: {0}")]
    DegenerateResponse(&'static str),
    #[error("intercept identity violated after refit: relative error {rel_error:.3e}")]
    InterceptIdentity { rel_error: f64 },
}

/// Outcome of one IRLS maximization.
#[derive(Debug, Clone)]
pub struct GlmFit {
    pub coefficients: Array1<f64>,
    /// Fitted means including any offset.
    pub fitted: Array1<f64>,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Gaussian MLE variance RSS/n; None for the other families.
    pub dispersion: Option<f64>,
}

/// Maximizes the family log-likelihood over coefficients of `design` by
/// iteratively reweighted least squares, with an optional offset added to
/// the linear predictor. Convergence requires both a relative log-likelihood
/// change below 1e-10 and near-zero score equations; stops at 100 iterations
/// and reports the flag either way.
///
/// # Errors
/// Shape problems, invalid responses, collinear columns (pairwise
/// correlation above 0.9999), singular weighted systems, or a non-finite
/// log-likelihood.
pub fn fit_glm(
    y: &Array1<f64>,
    design: &Array2<f64>,
    family: Family,
    offset: Option<&Array1<f64>>,
) -> Result<GlmFit, GlmError> {
    let n = y.len();
    let p = design.ncols();
    if design.nrows() != n {
        return Err(GlmError::LengthMismatch {
            what: "design matrix",
            expected: n,
            got: design.nrows(),
        });
    }
    if p == 0 {
        return Err(GlmError::EmptyDesign);
    }
    if n < p {
        return Err(GlmError::TooFewRows { rows: n, cols: p });
    }
    if let Some(off) = offset {
        if off.len() != n {
            return Err(GlmError::LengthMismatch {
                what: "offset",
                expected: n,
                got: off.len(),
            });
        }
    }
    for ((row, col), &v) in design.indexed_iter() {
        if !v.is_finite() {
            return Err(GlmError::NonFiniteDesign { row, col });
        }
    }
    family.validate_response(y)?;
    check_collinearity(design)?;

    let zeros;
    let off: &Array1<f64> = match offset {
        Some(o) => o,
        None => {
            zeros = Array1::zeros(n);
            &zeros
        }
    };

    // initialize on the mean scale, then pull back through the link
    let mut mu = y.mapv(|v| family.initial_mean(v));
    let mut eta: Array1<f64> = Array1::from_shape_fn(n, |i| family.link(mu[i]) - off[i]);
    let mut coefficients = Array1::zeros(p);
    let mut loglik = f64::NEG_INFINITY;
    let mut converged = false;
    let mut iterations = 0;

    let sum_abs_y: f64 = y.iter().map(|v| v.abs()).sum();
    let score_tol = SCORE_REL_TOL * (1.0 + sum_abs_y);

    for iteration in 1..=MAX_ITERATIONS {
        iterations = iteration;
        // canonical link: working weight = variance, working response
        // z = eta + (y - mu)/variance
        let mut xtwx = DMatrix::<f64>::zeros(p, p);
        let mut xtwz = DVector::<f64>::zeros(p);
        for i in 0..n {
            let w = family.variance(mu[i]);
            let z = eta[i] + (y[i] - mu[i]) / w;
            for a in 0..p {
                let xa = design[[i, a]];
                if xa == 0.0 {
                    continue;
                }
                xtwz[a] += w * xa * z;
                for b in a..p {
                    xtwx[(a, b)] += w * xa * design[[i, b]];
                }
            }
        }
        for a in 0..p {
            for b in 0..a {
                xtwx[(a, b)] = xtwx[(b, a)];
            }
        }
        let solution = linalg::solve_sym(xtwx, xtwz)
            .ok_or(GlmError::SingularSystem { iteration })?;
        let mut proposal = linalg::to_ndarray_vec(&solution);

        // step halving toward the previous iterate if the likelihood drops
        let mut step = 1.0;
        let (mut new_eta, mut new_mu, mut new_ll) =
            evaluate(design, &proposal, off, family, y);
        if loglik.is_finite() {
            let mut halvings = 0;
            while new_ll < loglik - 1e-8 * (1.0 + loglik.abs()) && halvings < 10 {
                step *= 0.5;
                halvings += 1;
                proposal = (1.0 - step) * &coefficients + step * &proposal;
                let r = evaluate(design, &proposal, off, family, y);
                new_eta = r.0;
                new_mu = r.1;
                new_ll = r.2;
            }
        }
        if !new_ll.is_finite() {
            return Err(GlmError::Diverged { iteration });
        }

        let ll_change = (new_ll - loglik).abs();
        let ll_ok = loglik.is_finite() && ll_change <= LOGLIK_REL_TOL * (1.0 + loglik.abs());
        coefficients = proposal;
        eta = new_eta;
        mu = new_mu;
        loglik = new_ll;

        let score_ok = max_score(design, y, &mu) <= score_tol;
        if ll_ok && score_ok {
            converged = true;
            break;
        }
    }

    let dispersion = match family {
        Family::Gaussian => {
            let rss: f64 = y
                .iter()
                .zip(mu.iter())
                .map(|(&yi, &mi)| (yi - mi).powi(2))
                .sum();
            Some(rss / n as f64)
        }
        _ => None,
    };

    Ok(GlmFit {
        coefficients,
        fitted: mu,
        loglik,
        converged,
        iterations,
        dispersion,
    })
}

fn evaluate(
    design: &Array2<f64>,
    coefficients: &Array1<f64>,
    offset: &Array1<f64>,
    family: Family,
    y: &Array1<f64>,
) -> (Array1<f64>, Array1<f64>, f64) {
    let eta = design.dot(coefficients);
    let mu = Array1::from_shape_fn(eta.len(), |i| family.inverse_link(eta[i] + offset[i]));
    let ll = log_likelihood(y, &mu, family, None);
    (eta, mu, ll)
}

/// Largest absolute canonical score component X'(y - mu).
fn max_score(design: &Array2<f64>, y: &Array1<f64>, mu: &Array1<f64>) -> f64 {
    let residual = y - mu;
    design
        .t()
        .dot(&residual)
        .iter()
        .fold(0.0f64, |acc, v| acc.max(v.abs()))
}

/// Rejects designs containing a pair of columns with |correlation| > 0.9999,
/// or more than one constant column.
fn check_collinearity(design: &Array2<f64>) -> Result<(), GlmError> {
    let n = design.nrows() as f64;
    let p = design.ncols();
    let means: Vec<f64> = (0..p).map(|j| design.column(j).sum() / n).collect();
    let sds: Vec<f64> = (0..p)
        .map(|j| {
            let m = means[j];
            (design.column(j).iter().map(|&v| (v - m).powi(2)).sum::<f64>() / n).sqrt()
        })
        .collect();
    let constant: Vec<bool> = (0..p)
        .map(|j| sds[j] <= 1e-12 * (1.0 + means[j].abs()))
        .collect();
    let mut offenders = Vec::new();
    for a in 0..p {
        for b in (a + 1)..p {
            if constant[a] && constant[b] {
                offenders.push(format!("{a} and {b} (both constant)"));
                continue;
            }
            if constant[a] || constant[b] {
                continue;
            }
            let cov: f64 = design
                .column(a)
                .iter()
                .zip(design.column(b))
                .map(|(&x, &y)| (x - means[a]) * (y - means[b]))
                .sum::<f64>()
                / n;
            let corr = cov / (sds[a] * sds[b]);
            if corr.abs() > CORRELATION_LIMIT {
                offenders.push(format!("{a} and {b} (|corr|={:.6})", corr.abs()));
            }
        }
    }
    if offenders.is_empty() {
        Ok(())
    } else {
        Err(GlmError::Collinear(offenders.join("; ")))
    }
}

/// Analysis-ready data for one model: outcomes, optional Poisson exposures,
/// optional scalar covariates, and optional eigenbasis scores with their
/// eigenvalues (needed for truncation selection).
#[derive(Debug, Clone)]
pub struct Dataset {
    pub y: Array1<f64>,
    pub populations: Option<Array1<f64>>,
    pub scalar_covariates: Option<Array2<f64>>,
    pub scores: Option<Array2<f64>>,
    pub eigenvalues: Option<Array1<f64>>,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn n_scalar(&self) -> usize {
        self.scalar_covariates.as_ref().map_or(0, |z| z.ncols())
    }

    pub fn n_components(&self) -> usize {
        self.scores.as_ref().map_or(0, |c| c.ncols())
    }

    pub fn validate(&self) -> Result<(), GlmError> {
        let n = self.n();
        if let Some(pop) = &self.populations {
            if pop.len() != n {
                return Err(GlmError::LengthMismatch {
                    what: "populations",
                    expected: n,
                    got: pop.len(),
                });
            }
            for (index, &value) in pop.iter().enumerate() {
                if !(value.is_finite() && value > 0.0) {
                    return Err(GlmError::InvalidPopulation { index, value });
                }
            }
        }
        if let Some(z) = &self.scalar_covariates {
            if z.nrows() != n {
                return Err(GlmError::LengthMismatch {
                    what: "scalar covariates",
                    expected: n,
                    got: z.nrows(),
                });
            }
        }
        if let Some(c) = &self.scores {
            if c.nrows() != n {
                return Err(GlmError::LengthMismatch {
                    what: "scores",
                    expected: n,
                    got: c.nrows(),
                });
            }
            if let Some(ev) = &self.eigenvalues {
                if ev.len() != c.ncols() {
                    return Err(GlmError::LengthMismatch {
                        what: "eigenvalues",
                        expected: c.ncols(),
                        got: ev.len(),
                    });
                }
            }
        }
        Ok(())
    }

    /// Same covariate structure, new response.
    pub fn with_response(&self, y: Array1<f64>) -> Dataset {
        Dataset {
            y,
            populations: self.populations.clone(),
            scalar_covariates: self.scalar_covariates.clone(),
            scores: self.scores.clone(),
            eigenvalues: self.eigenvalues.clone(),
        }
    }

    /// Design matrix [1 | Z | C_1..J].
    fn design(&self, truncation: usize) -> Result<Array2<f64>, GlmError> {
        let available = self.n_components();
        if truncation > available {
            return Err(GlmError::TruncationTooLarge {
                requested: truncation,
                available,
            });
        }
        let n = self.n();
        let p = self.n_scalar();
        let mut design = Array2::zeros((n, 1 + p + truncation));
        design.column_mut(0).fill(1.0);
        if let Some(z) = &self.scalar_covariates {
            design
                .slice_mut(ndarray::s![.., 1..1 + p])
                .assign(&z.view());
        }
        if truncation > 0 {
            let c = self.scores.as_ref().ok_or(GlmError::MissingScores)?;
            design
                .slice_mut(ndarray::s![.., 1 + p..])
                .assign(&c.slice(ndarray::s![.., ..truncation]));
        }
        Ok(design)
    }

    /// log populations for Poisson; None otherwise (exposure 1).
    fn offset(&self, family: Family) -> Option<Array1<f64>> {
        match family {
            Family::Poisson => self.populations.as_ref().map(|p| p.mapv(f64::ln)),
            _ => None,
        }
    }
}

/// The fitted null model: no cluster effect, covariates in, truncated
/// eigenbasis expansion of the parameter function.
#[derive(Debug, Clone)]
pub struct NullFit {
    pub family: Family,
    pub alpha: f64,
    /// Scalar-covariate coefficients (length p).
    pub beta: Array1<f64>,
    /// Eigenbasis coefficients of the parameter function (length J).
    pub theta: Array1<f64>,
    pub truncation: usize,
    pub loglik: f64,
    pub converged: bool,
    pub iterations: usize,
    /// Z_i' beta + C_i' theta per location (zero with no covariates).
    pub covariate_offsets: Array1<f64>,
    /// Poisson only: N_i * exp(covariate offset), the adjusted population.
    pub adjusted_populations: Option<Array1<f64>>,
    /// Fitted means under the null, used to simulate replicates.
    pub fitted: Array1<f64>,
    /// Gaussian only: MLE variance of the null fit.
    pub dispersion: Option<f64>,
}

/// Fits the null model with the first `truncation` score columns.
///
/// For Poisson the intercept is recentered exactly so that
/// exp(alpha) * sum(adjusted populations) = sum(counts); this is the
/// closed-form profile maximum in the intercept and never lowers the
/// likelihood. The identity is then verified to 1e-8 relative.
///
/// # Errors
/// Propagated from `fit_glm`, plus degenerate all-zero Poisson counts.
pub fn fit_null(
    dataset: &Dataset,
    family: Family,
    truncation: usize,
) -> Result<NullFit, GlmError> {
    dataset.validate()?;
    let n = dataset.n();
    let p = dataset.n_scalar();
    if family == Family::Poisson && dataset.y.sum() == 0.0 {
        return Err(GlmError::DegenerateResponse(
            "all counts are zero; the Poisson null rate is degenerate",
        ));
    }
    let design = dataset.design(truncation)?;
    let offset = dataset.offset(family);
    let fit = fit_glm(&dataset.y, &design, family, offset.as_ref())?;

    let mut alpha = fit.coefficients[0];
    let mut fitted = fit.fitted;
    let mut loglik = fit.loglik;
    if family == Family::Poisson {
        // exact profile maximum in the intercept
        let scale = dataset.y.sum() / fitted.sum();
        alpha += scale.ln();
        fitted *= scale;
        loglik = log_likelihood(&dataset.y, &fitted, family, None);
    }

    let beta = Array1::from_iter(fit.coefficients.iter().skip(1).take(p).copied());
    let theta = Array1::from_iter(fit.coefficients.iter().skip(1 + p).copied());
    let covariate_offsets = if design.ncols() > 1 {
        design
            .slice(ndarray::s![.., 1..])
            .dot(&Array1::from_iter(fit.coefficients.iter().skip(1).copied()))
    } else {
        Array1::zeros(n)
    };

    let adjusted_populations = match family {
        Family::Poisson => {
            let base = dataset
                .populations
                .clone()
                .unwrap_or_else(|| Array1::ones(n));
            let adjusted = Array1::from_shape_fn(n, |i| base[i] * covariate_offsets[i].exp());
            let identity = alpha.exp() * adjusted.sum();
            let rel_error = (identity - dataset.y.sum()).abs() / dataset.y.sum();
            if rel_error > 1e-8 {
                return Err(GlmError::InterceptIdentity { rel_error });
            }
            Some(adjusted)
        }
        _ => None,
    };

    Ok(NullFit {
        family,
        alpha,
        beta,
        theta,
        truncation,
        loglik,
        converged: fit.converged,
        iterations: fit.iterations,
        covariate_offsets,
        adjusted_populations,
        fitted,
        dispersion: fit.dispersion,
    })
}

/// One truncation candidate's outcome during selection.
#[derive(Debug, Clone)]
pub struct CandidateFit {
    pub truncation: usize,
    pub aic: Option<f64>,
    pub converged: bool,
    pub error: Option<String>,
}

#[derive(Debug, Clone)]
pub struct TruncationSelection {
    pub selected: usize,
    pub candidates: Vec<CandidateFit>,
}

/// AIC with 1 + p + J mean parameters, plus one variance parameter for the
/// Gaussian family.
pub fn aic(loglik: f64, p: usize, truncation: usize, family: Family) -> f64 {
    let mean_params = (1 + p + truncation) as f64;
    let dispersion_params = if family == Family::Gaussian { 1.0 } else { 0.0 };
    -2.0 * loglik + 2.0 * (mean_params + dispersion_params)
}

/// Chooses the truncation J*: candidates are every J whose cumulative
/// inertia stays within `inertia_cap`, plus the first J exceeding the cap;
/// the AIC-minimal candidate wins, ties going to the smaller J.
///
/// # Errors
/// Missing scores/eigenvalues, an out-of-range cap, zero total inertia, or
/// failure of every candidate fit (individual failures are recorded).
pub fn select_truncation(
    dataset: &Dataset,
    family: Family,
    inertia_cap: f64,
) -> Result<TruncationSelection, GlmError> {
    dataset.validate()?;
    if !(inertia_cap > 0.0 && inertia_cap <= 1.0) {
        return Err(GlmError::InvalidInertiaCap(inertia_cap));
    }
    let eigenvalues = dataset
        .eigenvalues
        .as_ref()
        .ok_or(GlmError::MissingScores)?;
    if dataset.scores.is_none() {
        return Err(GlmError::MissingScores);
    }
    let k = eigenvalues.len();
    let total: f64 = eigenvalues.sum();
    if !(total > 0.0) {
        return Err(GlmError::DegenerateEigenvalues);
    }

    let mut candidates_j = Vec::new();
    let mut acc = 0.0;
    for j in 1..=k {
        acc += eigenvalues[j - 1];
        let cumulative = acc / total;
        if cumulative <= inertia_cap + 1e-12 {
            candidates_j.push(j);
        } else {
            // boundary candidate: first J exceeding the cap
            candidates_j.push(j);
            break;
        }
    }

    let p = dataset.n_scalar();
    let mut candidates = Vec::with_capacity(candidates_j.len());
    let mut best: Option<(f64, usize)> = None;
    for &j in &candidates_j {
        match fit_null(dataset, family, j) {
            Ok(fit) => {
                let a = aic(fit.loglik, p, j, family);
                if best.map_or(true, |(ba, bj)| (a, j) < (ba, bj)) {
                    best = Some((a, j));
                }
                candidates.push(CandidateFit {
                    truncation: j,
                    aic: Some(a),
                    converged: fit.converged,
                    error: None,
                });
            }
            Err(err) => candidates.push(CandidateFit {
                truncation: j,
                aic: None,
                converged: false,
                error: Some(err.to_string()),
            }),
        }
    }

    match best {
        Some((_, selected)) => Ok(TruncationSelection {
            selected,
            candidates,
        }),
        None => {
            let details: Vec<String> = candidates
                .iter()
                .map(|c| {
                    format!(
                        "J={}: {}",
                        c.truncation,
                        c.error.as_deref().unwrap_or("unknown")
                    )
                })
                .collect();
            Err(GlmError::AllCandidatesFailed(details.join("; ")))
        }
    }
}

/// Evaluates the fitted parameter function, the truncated eigenbasis
/// expansion with the null fit's theta coefficients, on a time grid.
///
/// # Errors
/// Grid points outside the basis domain.
pub fn parameter_function(
    null_fit: &NullFit,
    design: &FunctionalDesign,
    basis: &BasisSystem,
    grid: &[f64],
) -> Result<Vec<(f64, f64)>, FdaError> {
    let mut out = Vec::with_capacity(grid.len());
    for &t in grid {
        let mut value = 0.0;
        for j in 0..null_fit.truncation {
            value += null_fit.theta[j] * eigenfunction_eval(design, basis, j, t)?;
        }
        out.push((t, value));
    }
    Ok(out)
}
