//! Scan layer: per-window alternative fits, the maximum log-likelihood-ratio
//! cluster, Monte Carlo significance by rank, and greedy secondary-cluster
//! reporting.

use crate::geo::PotentialCluster;
use crate::glm::{self, Dataset, Family, GlmError, NullFit};
use crate::linalg::derive_seed;
use ndarray::{Array1, Array2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

/// Which departures from the null compete for the maximum.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Sidedness {
    /// High- and low-risk windows compete in one max (default).
    Both,
    High,
    Low,
}

impl Default for Sidedness {
    fn default() -> Self {
        Sidedness::Both
    }
}

impl std::str::FromStr for Sidedness {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "both" => Ok(Sidedness::Both),
            "high" => Ok(Sidedness::High),
            "low" => Ok(Sidedness::Low),
            other => Err(format!(
                "unknown sidedness {other:?}; expected both, high, or low"
            )),
        }
    }
}

/// Sign of the fitted log relative risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    High,
    Low,
    Flat,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::High => "high",
            Direction::Low => "low",
            Direction::Flat => "flat",
        })
    }
}

#[derive(Debug, Error)]
pub enum ScanError {
    #[error("no windows supplied")]
    NoWindows,
    #[error("window {window} references location {index}, but the region has {n} locations")]
    WindowOutOfRange { window: usize, index: usize, n: usize },
    #[error("window {window} covers every location; the outside aggregate is empty")]
    WindowCoversRegion { window: usize },
    #[error("window {window} has no members")]
    EmptyWindow { window: usize },
    #[error("adjusted populations must be positive; index {index} is {value}")]
    InvalidAdjustedPopulation { index: usize, value: f64 },
    #[error("{what}: expected {expected} values, got {got}")]
    LengthMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },
    #[error("every window fit failed ({failures} failures)")]
    AllWindowsFailed { failures: usize },
    #[error("Monte Carlo needs at least one replicate")]
    NoReplicates,
    #[error(transparent)]
    Glm(#[from] GlmError),
}

/// The fitted alternative for one window.
#[derive(Debug, Clone)]
pub struct WindowFit {
    /// Index into the window list.
    pub window: usize,
    /// Baseline (outside) parameter of the two-parameter alternative.
    pub alpha: f64,
    /// Log relative risk inside the window; -inf when no case falls inside,
    /// +inf when every case does.
    pub delta: f64,
    /// Log-likelihood ratio against the null; always >= 0.
    pub llr: f64,
    /// Sum of observed outcomes inside the window.
    pub observed_inside: f64,
    /// Poisson: adjusted population inside the window. Other families:
    /// number of member locations.
    pub adjusted_inside: f64,
    pub converged: bool,
}

impl WindowFit {
    pub fn direction(&self) -> Direction {
        if self.delta > 0.0 {
            Direction::High
        } else if self.delta < 0.0 {
            Direction::Low
        } else {
            Direction::Flat
        }
    }

    fn allowed(&self, sidedness: Sidedness) -> bool {
        match (sidedness, self.direction()) {
            (Sidedness::Both, _) => true,
            (_, Direction::Flat) => true,
            (Sidedness::High, Direction::High) => true,
            (Sidedness::Low, Direction::Low) => true,
            _ => false,
        }
    }
}

fn xlogy(x: f64, y: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * y.ln()
    }
}

fn validate_window(
    window: &PotentialCluster,
    window_index: usize,
    n: usize,
) -> Result<(), ScanError> {
    if window.members.is_empty() {
        return Err(ScanError::EmptyWindow {
            window: window_index,
        });
    }
    if let Some(&bad) = window.members.iter().find(|&&m| m >= n) {
        return Err(ScanError::WindowOutOfRange {
            window: window_index,
            index: bad,
            n,
        });
    }
    if window.members.len() >= n {
        return Err(ScanError::WindowCoversRegion {
            window: window_index,
        });
    }
    Ok(())
}

/// Closed-form Poisson window fit over adjusted populations.
///
/// With O/O_k the total/inside counts and A/A_k the total/inside adjusted
/// populations: alpha = log((O-O_k)/(A-A_k)), delta = log of the inside/
/// outside rate ratio, and the LLR uses the 0*log(0) = 0 convention.
///
/// # Errors
/// Window invalid (empty, out of range, or covering the whole region) or
/// non-positive adjusted populations.
pub fn poisson_window_fit(
    window: &PotentialCluster,
    y: &Array1<f64>,
    adjusted_populations: &Array1<f64>,
) -> Result<WindowFit, ScanError> {
    poisson_window_fit_indexed(window, 0, y, adjusted_populations)
}

fn poisson_window_fit_indexed(
    window: &PotentialCluster,
    window_index: usize,
    y: &Array1<f64>,
    adjusted_populations: &Array1<f64>,
) -> Result<WindowFit, ScanError> {
    let n = y.len();
    if adjusted_populations.len() != n {
        return Err(ScanError::LengthMismatch {
            what: "adjusted populations",
            expected: n,
            got: adjusted_populations.len(),
        });
    }
    validate_window(window, window_index, n)?;
    if let Some((index, &value)) = adjusted_populations
        .iter()
        .enumerate()
        .find(|(_, &v)| !(v.is_finite() && v > 0.0))
    {
        return Err(ScanError::InvalidAdjustedPopulation { index, value });
    }

    let total_obs: f64 = y.sum();
    let total_adj: f64 = adjusted_populations.sum();
    let mut inside_obs = 0.0;
    let mut inside_adj = 0.0;
    for &i in &window.members {
        inside_obs += y[i];
        inside_adj += adjusted_populations[i];
    }
    let outside_obs = total_obs - inside_obs;
    let outside_adj = total_adj - inside_adj;

    let alpha = if outside_obs == 0.0 {
        f64::NEG_INFINITY
    } else {
        (outside_obs / outside_adj).ln()
    };
    let delta = if inside_obs == 0.0 {
        f64::NEG_INFINITY
    } else if outside_obs == 0.0 {
        f64::INFINITY
    } else {
        ((inside_obs / inside_adj) * (outside_adj / outside_obs)).ln()
    };
    let llr = xlogy(inside_obs, inside_obs / inside_adj)
        + xlogy(outside_obs, outside_obs / outside_adj)
        - xlogy(total_obs, total_obs / total_adj);

    Ok(WindowFit {
        window: window_index,
        alpha,
        delta,
        llr: llr.max(0.0),
        observed_inside: inside_obs,
        adjusted_inside: inside_adj,
        converged: true,
    })
}

/// Numeric two-parameter window fit for any family: maximizes the likelihood
/// over (alpha, delta) with the window indicator as covariate and the null
/// fit's covariate effects (plus log populations for Poisson) as a fixed
/// offset. The Gaussian LLR freezes the variance at the null fit's value.
///
/// # Errors
/// Invalid windows or propagated fit errors (callers running whole scans
/// catch these and flag the window instead).
pub fn generic_window_fit(
    window: &PotentialCluster,
    dataset: &Dataset,
    family: Family,
    null_fit: &NullFit,
) -> Result<WindowFit, ScanError> {
    generic_window_fit_indexed(window, 0, dataset, family, null_fit)
}

fn generic_window_fit_indexed(
    window: &PotentialCluster,
    window_index: usize,
    dataset: &Dataset,
    family: Family,
    null_fit: &NullFit,
) -> Result<WindowFit, ScanError> {
    let n = dataset.n();
    validate_window(window, window_index, n)?;

    let mut offset = null_fit.covariate_offsets.clone();
    if family == Family::Poisson {
        if let Some(pops) = &dataset.populations {
            for i in 0..n {
                offset[i] += pops[i].ln();
            }
        }
    }
    let mut design = Array2::zeros((n, 2));
    design.column_mut(0).fill(1.0);
    for &i in &window.members {
        design[[i, 1]] = 1.0;
    }
    let fit = glm::fit_glm(&dataset.y, &design, family, Some(&offset))?;
    let ll1 = glm::log_likelihood(&dataset.y, &fit.fitted, family, null_fit.dispersion);
    let llr = (ll1 - null_fit.loglik).max(0.0);

    let inside_obs: f64 = window.members.iter().map(|&i| dataset.y[i]).sum();
    let adjusted_inside = match (&family, &null_fit.adjusted_populations) {
        (Family::Poisson, Some(adj)) => window.members.iter().map(|&i| adj[i]).sum(),
        _ => window.members.len() as f64,
    };

    Ok(WindowFit {
        window: window_index,
        alpha: fit.coefficients[0],
        delta: fit.coefficients[1],
        llr,
        observed_inside: inside_obs,
        adjusted_inside,
        converged: fit.converged,
    })
}

/// Result of scanning every window against one dataset.
#[derive(Debug, Clone)]
pub struct ScanResult {
    /// One fit per window, same order as the window list.
    pub fits: Vec<WindowFit>,
    /// Index of the most likely cluster among windows admitted by the
    /// sidedness rule; None only when sidedness excludes every window.
    pub mlc: Option<usize>,
    /// The scan statistic: max admitted LLR (0 when no window is admitted).
    pub lambda: f64,
    /// Windows whose numeric fit failed or did not converge (excluded from
    /// the max).
    pub failed_windows: usize,
}

/// Fits every window and takes the maximum LLR. Poisson uses the closed
/// form over adjusted populations; other families the numeric fit. Ties
/// break toward smaller windows, then lower center index. Windows whose fit
/// fails are flagged and excluded rather than aborting the scan.
///
/// # Errors
/// No windows, invalid windows, or every fit failing.
pub fn run_scan(
    dataset: &Dataset,
    family: Family,
    windows: &[PotentialCluster],
    null_fit: &NullFit,
    sidedness: Sidedness,
) -> Result<ScanResult, ScanError> {
    if windows.is_empty() {
        return Err(ScanError::NoWindows);
    }
    let n = dataset.n();
    let mut fits = Vec::with_capacity(windows.len());
    let mut failed = 0usize;

    match family {
        Family::Poisson => {
            let ones;
            let adjusted = match &null_fit.adjusted_populations {
                Some(adj) => adj,
                None => {
                    ones = Array1::ones(n);
                    &ones
                }
            };
            for (k, w) in windows.iter().enumerate() {
                fits.push(poisson_window_fit_indexed(w, k, &dataset.y, adjusted)?);
            }
        }
        _ => {
            for (k, w) in windows.iter().enumerate() {
                validate_window(w, k, n)?;
                match generic_window_fit_indexed(w, k, dataset, family, null_fit) {
                    Ok(fit) => {
                        if !fit.converged {
                            failed += 1;
                        }
                        fits.push(fit);
                    }
                    Err(ScanError::Glm(_)) => {
                        failed += 1;
                        fits.push(WindowFit {
                            window: k,
                            alpha: f64::NAN,
                            delta: 0.0,
                            llr: 0.0,
                            observed_inside: f64::NAN,
                            adjusted_inside: f64::NAN,
                            converged: false,
                        });
                    }
                    Err(other) => return Err(other),
                }
            }
            if failed == windows.len() {
                return Err(ScanError::AllWindowsFailed { failures: failed });
            }
        }
    }

    let mut mlc: Option<usize> = None;
    for (k, fit) in fits.iter().enumerate() {
        if !fit.converged || !fit.allowed(sidedness) {
            continue;
        }
        let better = match mlc {
            None => true,
            Some(best) => {
                let b = &fits[best];
                let key = (fit.llr, std::cmp::Reverse(windows[k].len()));
                let best_key = (b.llr, std::cmp::Reverse(windows[best].len()));
                key > best_key
                    || (fit.llr == b.llr
                        && windows[k].len() == windows[best].len()
                        && windows[k].center < windows[best].center)
            }
        };
        if better {
            mlc = Some(k);
        }
    }
    let lambda = mlc.map_or(0.0, |k| fits[k].llr);

    Ok(ScanResult {
        fits,
        mlc,
        lambda,
        failed_windows: failed,
    })
}

/// Distribution of the scan statistic under the fitted null.
#[derive(Debug, Clone)]
pub struct MonteCarloResult {
    /// One replicate statistic per replicate, in replicate order.
    pub lambdas: Vec<f64>,
    /// Replicates that failed twice and were scored +inf (conservative).
    pub warnings: usize,
}

impl MonteCarloResult {
    /// Rank-based p-value: (1 + #{replicates >= statistic}) / (M + 1).
    pub fn p_value(&self, statistic: f64) -> f64 {
        let exceed = self.lambdas.iter().filter(|&&l| l >= statistic).count();
        (1 + exceed) as f64 / (self.lambdas.len() + 1) as f64
    }
}

#[derive(Debug, Clone, Copy)]
pub struct MonteCarloConfig {
    pub replicates: usize,
    pub seed: u64,
    /// Refit the full null (same truncation) on each replicate (default);
    /// false freezes the observed fit's covariate offsets.
    pub refit: bool,
    pub sidedness: Sidedness,
}

/// Simulates `replicates` datasets from the fitted null, rescans each, and
/// returns the replicate scan statistics. Each replicate owns a private
/// random stream derived from (seed, replicate index), so results do not
/// depend on thread scheduling. A replicate whose fit fails is resampled
/// once from a fresh stream, then scored +inf with a warning.
///
/// # Errors
/// Zero replicates requested.
pub fn monte_carlo(
    dataset: &Dataset,
    family: Family,
    windows: &[PotentialCluster],
    null_fit: &NullFit,
    config: MonteCarloConfig,
) -> Result<MonteCarloResult, ScanError> {
    if config.replicates == 0 {
        return Err(ScanError::NoReplicates);
    }
    let m = config.replicates;
    let results: Vec<Option<f64>> = (0..m)
        .into_par_iter()
        .map(|rep| {
            replicate_lambda(dataset, family, windows, null_fit, &config, rep as u64).or_else(
                || {
                    replicate_lambda(
                        dataset,
                        family,
                        windows,
                        null_fit,
                        &config,
                        (m + rep) as u64,
                    )
                },
            )
        })
        .collect();

    let warnings = results.iter().filter(|r| r.is_none()).count();
    let lambdas = results
        .into_iter()
        .map(|r| r.unwrap_or(f64::INFINITY))
        .collect();
    Ok(MonteCarloResult { lambdas, warnings })
}

fn replicate_lambda(
    dataset: &Dataset,
    family: Family,
    windows: &[PotentialCluster],
    null_fit: &NullFit,
    config: &MonteCarloConfig,
    stream: u64,
) -> Option<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(config.seed, stream));
    let y_star = Array1::from_shape_fn(dataset.n(), |i| {
        family.sample(null_fit.fitted[i], null_fit.dispersion, &mut rng)
    });
    let replicate = dataset.with_response(y_star);
    if config.refit {
        let refit = glm::fit_null(&replicate, family, null_fit.truncation).ok()?;
        run_scan(&replicate, family, windows, &refit, config.sidedness)
            .ok()
            .map(|s| s.lambda)
    } else {
        run_scan(&replicate, family, windows, null_fit, config.sidedness)
            .ok()
            .map(|s| s.lambda)
    }
}

/// One reported cluster (the MLC or a secondary cluster).
#[derive(Debug, Clone)]
pub struct ClusterReport {
    /// 1-based rank in decreasing LLR order.
    pub rank: usize,
    /// Index into the window list.
    pub window: usize,
    pub center: usize,
    pub members: Vec<usize>,
    /// exp(delta); 0 when no case lies inside, +inf when all do.
    pub relative_risk: f64,
    pub llr: f64,
    pub p_value: f64,
    pub direction: Direction,
}

/// Reports the MLC (always, with its p-value) followed by secondary
/// clusters: windows taken in decreasing LLR whose members are disjoint
/// from everything already reported, while their rank p-value stays within
/// `threshold`.
pub fn secondary_clusters(
    windows: &[PotentialCluster],
    scan: &ScanResult,
    mc: &MonteCarloResult,
    sidedness: Sidedness,
    threshold: f64,
) -> Vec<ClusterReport> {
    let mut order: Vec<usize> = (0..scan.fits.len())
        .filter(|&k| scan.fits[k].converged && scan.fits[k].allowed(sidedness))
        .collect();
    order.sort_by(|&a, &b| {
        scan.fits[b]
            .llr
            .partial_cmp(&scan.fits[a].llr)
            .expect("finite LLR")
            .then(windows[a].len().cmp(&windows[b].len()))
            .then(windows[a].center.cmp(&windows[b].center))
    });

    let mut reports: Vec<ClusterReport> = Vec::new();
    for &k in &order {
        let disjoint = reports
            .iter()
            .all(|r| windows[r.window].disjoint_from(&windows[k]));
        if !disjoint {
            continue;
        }
        let p_value = mc.p_value(scan.fits[k].llr);
        if !reports.is_empty() && p_value > threshold {
            // later windows have lower LLR, hence no smaller p-value
            break;
        }
        reports.push(ClusterReport {
            rank: reports.len() + 1,
            window: k,
            center: windows[k].center,
            members: windows[k].members.clone(),
            relative_risk: scan.fits[k].delta.exp(),
            llr: scan.fits[k].llr,
            p_value,
            direction: scan.fits[k].direction(),
        });
    }
    reports
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    fn window(center: usize, members: Vec<usize>) -> PotentialCluster {
        PotentialCluster {
            center,
            radius: 0.0,
            members,
        }
    }

    fn null_fit_without_covariates(
        y: &Array1<f64>,
        populations: &Array1<f64>,
    ) -> (Dataset, NullFit) {
        let ds = Dataset {
            y: y.clone(),
            populations: Some(populations.clone()),
            scalar_covariates: None,
            scores: None,
            eigenvalues: None,
        };
        let nf = glm::fit_null(&ds, Family::Poisson, 0).unwrap();
        (ds, nf)
    }

    #[test]
    fn hand_checked_two_location_example() {
        let y = array![2.0, 1.0];
        let adjusted = array![1.0, 1.0];
        let fit = poisson_window_fit(&window(0, vec![0]), &y, &adjusted).unwrap();
        assert_abs_diff_eq!(fit.delta, 2.0f64.ln(), epsilon = 1e-12);
        assert_abs_diff_eq!(fit.alpha, 0.0, epsilon = 1e-12);
        let expect = 2.0 * 2.0f64.ln() - 3.0 * 1.5f64.ln();
        assert_abs_diff_eq!(fit.llr, expect, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.llr, 0.1699, epsilon = 5e-5);
    }

    #[test]
    fn null_consistent_window_has_zero_llr() {
        // equal inside and outside rates
        let y = array![2.0, 4.0, 3.0];
        let adjusted = array![2.0, 4.0, 3.0];
        let fit = poisson_window_fit(&window(1, vec![1]), &y, &adjusted).unwrap();
        assert_abs_diff_eq!(fit.delta, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(fit.llr, 0.0, epsilon = 1e-12);
    }

    #[test]
    fn empty_inside_uses_zero_log_convention() {
        let y = array![0.0, 5.0, 3.0];
        let adjusted = array![1.0, 2.0, 2.0];
        let fit = poisson_window_fit(&window(0, vec![0]), &y, &adjusted).unwrap();
        assert_eq!(fit.delta, f64::NEG_INFINITY);
        assert_eq!(fit.direction(), Direction::Low);
        // remaining terms: O log(O/(A - A_k)) - O log(O/A)
        let o = 8.0;
        let expect = o * (o / 4.0f64).ln() - o * (o / 5.0f64).ln();
        assert_abs_diff_eq!(fit.llr, expect, epsilon = 1e-12);
    }

    #[test]
    fn window_covering_region_rejected() {
        let y = array![1.0, 2.0];
        let adjusted = array![1.0, 1.0];
        assert!(matches!(
            poisson_window_fit(&window(0, vec![0, 1]), &y, &adjusted),
            Err(ScanError::WindowCoversRegion { .. })
        ));
    }

    #[test]
    fn generic_agrees_with_closed_form() {
        let y = array![7.0, 2.0, 4.0, 1.0, 9.0, 3.0];
        let pops = array![10.0, 8.0, 12.0, 6.0, 15.0, 9.0];
        let (ds, nf) = null_fit_without_covariates(&y, &pops);
        for members in [vec![0], vec![0, 1], vec![2, 3, 4], vec![5]] {
            let w = window(members[0], members.clone());
            let closed =
                poisson_window_fit(&w, &y, nf.adjusted_populations.as_ref().unwrap()).unwrap();
            let numeric = generic_window_fit(&w, &ds, Family::Poisson, &nf).unwrap();
            assert!(
                (closed.llr - numeric.llr).abs() < 1e-6,
                "members {members:?}: closed {} vs numeric {}",
                closed.llr,
                numeric.llr
            );
            assert_abs_diff_eq!(closed.delta, numeric.delta, epsilon = 1e-5);
        }
    }

    #[test]
    fn gaussian_window_at_overall_mean_has_flat_delta() {
        let y = array![1.0, 3.0, 2.0, 2.0, 1.0, 3.0];
        let ds = Dataset {
            y: y.clone(),
            populations: None,
            scalar_covariates: None,
            scores: None,
            eigenvalues: None,
        };
        let nf = glm::fit_null(&ds, Family::Gaussian, 0).unwrap();
        // members {2,3} average 2.0 = overall mean
        let fit = generic_window_fit(&window(2, vec![2, 3]), &ds, Family::Gaussian, &nf).unwrap();
        assert_abs_diff_eq!(fit.delta, 0.0, epsilon = 1e-8);
        assert_abs_diff_eq!(fit.llr, 0.0, epsilon = 1e-8);
    }

    #[test]
    fn offset_shift_leaves_window_fits_unchanged() {
        let y = array![5.0, 2.0, 7.0, 1.0, 4.0];
        let pops = array![6.0, 5.0, 9.0, 4.0, 7.0];
        let (_ds, nf) = null_fit_without_covariates(&y, &pops);
        let mut shifted = nf.clone();
        let c = 0.37;
        shifted.covariate_offsets.mapv_inplace(|v| v + c);
        shifted.adjusted_populations = Some(
            shifted
                .adjusted_populations
                .unwrap()
                .mapv(|v| v * c.exp()),
        );
        shifted.alpha -= c;
        shifted.fitted = Array1::from_shape_fn(5, |i| {
            shifted.adjusted_populations.as_ref().unwrap()[i] * shifted.alpha.exp()
        });
        for members in [vec![0], vec![1, 2], vec![3, 4]] {
            let w = window(members[0], members.clone());
            let base =
                poisson_window_fit(&w, &y, nf.adjusted_populations.as_ref().unwrap()).unwrap();
            let moved = poisson_window_fit(&w, &y, shifted.adjusted_populations.as_ref().unwrap())
                .unwrap();
            assert_abs_diff_eq!(base.delta, moved.delta, epsilon = 1e-8);
            assert_abs_diff_eq!(base.llr, moved.llr, epsilon = 1e-8);
        }
    }

    #[test]
    fn scan_max_and_tie_breaking() {
        let y = array![9.0, 1.0, 1.0, 1.0];
        let pops = array![1.0, 1.0, 1.0, 1.0];
        let (ds, nf) = null_fit_without_covariates(&y, &pops);
        let windows = vec![
            window(0, vec![0]),
            window(1, vec![1]),
            window(2, vec![2, 3]),
        ];
        let scan = run_scan(&ds, Family::Poisson, &windows, &nf, Sidedness::Both).unwrap();
        assert_eq!(scan.mlc, Some(0));
        assert_abs_diff_eq!(scan.lambda, scan.fits[0].llr);
        assert!(scan.lambda > 0.0);
        // lambda equals the max over all fits
        let max = scan.fits.iter().map(|f| f.llr).fold(0.0f64, f64::max);
        assert_abs_diff_eq!(scan.lambda, max);
    }

    #[test]
    fn sidedness_filters_directions() {
        let y = array![9.0, 1.0, 0.0, 1.0];
        let pops = array![1.0, 1.0, 2.0, 1.0];
        let (ds, nf) = null_fit_without_covariates(&y, &pops);
        let windows = vec![window(0, vec![0]), window(2, vec![2])];
        let both = run_scan(&ds, Family::Poisson, &windows, &nf, Sidedness::Both).unwrap();
        assert_eq!(both.mlc, Some(0));
        let low = run_scan(&ds, Family::Poisson, &windows, &nf, Sidedness::Low).unwrap();
        assert_eq!(low.mlc, Some(1));
        assert!(low.lambda < both.lambda);
    }

    #[test]
    fn lambda_invariant_under_reindexing() {
        let y = array![5.0, 2.0, 8.0, 1.0];
        let pops = array![4.0, 3.0, 6.0, 2.0];
        let (ds, nf) = null_fit_without_covariates(&y, &pops);
        let windows = vec![window(0, vec![0, 1]), window(2, vec![2]), window(3, vec![3])];
        let scan = run_scan(&ds, Family::Poisson, &windows, &nf, Sidedness::Both).unwrap();

        // permute locations by reversal
        let perm = [3usize, 2, 1, 0];
        let y2 = Array1::from_shape_fn(4, |i| y[perm[i]]);
        let pops2 = Array1::from_shape_fn(4, |i| pops[perm[i]]);
        let (ds2, nf2) = null_fit_without_covariates(&y2, &pops2);
        let inv = |m: &[usize]| {
            let mut v: Vec<usize> = m.iter().map(|&i| 3 - i).collect();
            v.sort_unstable();
            v
        };
        let windows2 = vec![
            window(3, inv(&[0, 1])),
            window(1, inv(&[2])),
            window(0, inv(&[3])),
        ];
        let scan2 = run_scan(&ds2, Family::Poisson, &windows2, &nf2, Sidedness::Both).unwrap();
        assert_abs_diff_eq!(scan.lambda, scan2.lambda, epsilon = 1e-12);
    }

    #[test]
    fn p_value_counting_forms() {
        let mc = MonteCarloResult {
            lambdas: vec![5.0, 3.0, 8.0, 1.0],
            warnings: 0,
        };
        assert_abs_diff_eq!(mc.p_value(6.0), 0.4);
        assert_abs_diff_eq!(mc.p_value(9.0), 0.2); // above all: 1/(M+1)
        assert_abs_diff_eq!(mc.p_value(0.5), 1.0); // below all
        assert_abs_diff_eq!(mc.p_value(5.0), 0.6); // ties count as exceedance
    }

    #[test]
    fn monte_carlo_is_deterministic_and_in_range() {
        let y = array![6.0, 2.0, 3.0, 1.0, 4.0, 2.0];
        let pops = array![5.0, 4.0, 4.0, 3.0, 5.0, 4.0];
        let (ds, nf) = null_fit_without_covariates(&y, &pops);
        let windows = vec![
            window(0, vec![0]),
            window(1, vec![1, 2]),
            window(4, vec![4, 5]),
        ];
        let config = MonteCarloConfig {
            replicates: 25,
            seed: 99,
            refit: true,
            sidedness: Sidedness::Both,
        };
        let a = monte_carlo(&ds, Family::Poisson, &windows, &nf, config).unwrap();
        let b = monte_carlo(&ds, Family::Poisson, &windows, &nf, config).unwrap();
        assert_eq!(a.lambdas, b.lambdas);
        assert_eq!(a.warnings, 0);
        assert!(a.lambdas.iter().all(|l| *l >= 0.0));
        let scan = run_scan(&ds, Family::Poisson, &windows, &nf, Sidedness::Both).unwrap();
        let p = a.p_value(scan.lambda);
        assert!((1.0 / 26.0..=1.0).contains(&p));
    }

    #[test]
    fn frozen_offsets_mode_runs() {
        let y = array![6.0, 2.0, 3.0, 1.0];
        let pops = array![5.0, 4.0, 4.0, 3.0];
        let (ds, nf) = null_fit_without_covariates(&y, &pops);
        let windows = vec![window(0, vec![0]), window(2, vec![2, 3])];
        let config = MonteCarloConfig {
            replicates: 10,
            seed: 5,
            refit: false,
            sidedness: Sidedness::Both,
        };
        let mc = monte_carlo(&ds, Family::Poisson, &windows, &nf, config).unwrap();
        assert_eq!(mc.lambdas.len(), 10);
    }

    #[test]
    fn secondary_clusters_disjoint_and_ordered() {
        // window LLRs here: {0} 16.54 (high), {1} 6.27 (low), {0,1} 4.06,
        // {3} 2.63. With replicates pinned at 5.0, {0} and {1} are
        // significant, {0,1} overlaps {0}, and the walk stops at {3}.
        let y = array![30.0, 2.0, 2.0, 18.0, 2.0];
        let pops = array![2.0, 2.0, 2.0, 2.0, 2.0];
        let (ds, nf) = null_fit_without_covariates(&y, &pops);
        let windows = vec![
            window(0, vec![0]),
            window(0, vec![0, 1]),
            window(3, vec![3]),
            window(1, vec![1]),
        ];
        let scan = run_scan(&ds, Family::Poisson, &windows, &nf, Sidedness::Both).unwrap();
        let mc = MonteCarloResult {
            lambdas: vec![5.0; 99],
            warnings: 0,
        };
        let reports = secondary_clusters(&windows, &scan, &mc, Sidedness::Both, 0.05);
        assert_eq!(reports.len(), 2);
        assert_eq!(reports[0].members, vec![0]);
        assert_eq!(reports[0].direction, Direction::High);
        assert_eq!(reports[1].members, vec![1]);
        assert_eq!(reports[1].direction, Direction::Low);
        assert!(reports[0].llr >= reports[1].llr);
        assert_eq!(reports[0].rank, 1);
        assert_eq!(reports[1].rank, 2);
        for r in &reports {
            assert_abs_diff_eq!(r.p_value, 0.01);
        }
    }

    #[test]
    fn insignificant_secondaries_not_reported_but_mlc_always_is() {
        let y = array![9.0, 1.0, 1.0, 8.0];
        let pops = array![2.0, 2.0, 2.0, 2.0];
        let (ds, nf) = null_fit_without_covariates(&y, &pops);
        let windows = vec![window(0, vec![0]), window(3, vec![3])];
        let scan = run_scan(&ds, Family::Poisson, &windows, &nf, Sidedness::Both).unwrap();
        // replicate distribution dominating both windows: nothing significant
        let mc = MonteCarloResult {
            lambdas: vec![1e6; 9],
            warnings: 0,
        };
        let reports = secondary_clusters(&windows, &scan, &mc, Sidedness::Both, 0.05);
        assert_eq!(reports.len(), 1, "MLC reported even when insignificant");
        assert_abs_diff_eq!(reports[0].p_value, 1.0);
    }
}
