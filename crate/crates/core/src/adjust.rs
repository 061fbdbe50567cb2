//! Covariate-adjustment strategies: how longitudinal observations enter the
//! null model. They can be ignored, collapsed to one summary statistic,
//! treated as per-time-point covariates reduced by PCA, or smoothed into
//! functional covariates reduced by FPCA. Scalar covariates always enter
//! as-is; the mode only governs the longitudinal part.

use crate::fda::{self, BasisSystem, FdaError, FunctionalDesign, LongitudinalSeries};
use crate::glm::{self, Dataset, Family, GlmError, TruncationSelection};
use ndarray::{Array1, Array2};
use thiserror::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdjustmentMode {
    /// Longitudinal data ignored.
    None,
    /// One scalar summary (mean or median) per series.
    Univariate,
    /// One covariate per time point, reduced by PCA; requires a common
    /// time grid rather than imputing missing observations.
    Multivariate,
    /// Smoothed curves as a functional covariate, reduced by FPCA.
    Functional,
}

impl std::fmt::Display for AdjustmentMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            AdjustmentMode::None => "none",
            AdjustmentMode::Univariate => "univariate",
            AdjustmentMode::Multivariate => "multivariate",
            AdjustmentMode::Functional => "functional",
        })
    }
}

impl std::str::FromStr for AdjustmentMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "none" => Ok(AdjustmentMode::None),
            "univariate" => Ok(AdjustmentMode::Univariate),
            "multivariate" => Ok(AdjustmentMode::Multivariate),
            "functional" => Ok(AdjustmentMode::Functional),
            other => Err(format!(
                "unknown adjustment mode {other:?} (expected none, univariate, multivariate, or functional)"
            )),
        }
    }
}

/// Summary statistic for univariate mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SummaryStat {
    Mean,
    Median,
}

impl std::str::FromStr for SummaryStat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "mean" => Ok(SummaryStat::Mean),
            "median" => Ok(SummaryStat::Median),
            other => Err(format!("unknown summary statistic {other:?} (expected mean or median)")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BasisKind {
    Bspline,
    Fourier,
}

impl std::str::FromStr for BasisKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "bspline" => Ok(BasisKind::Bspline),
            "fourier" => Ok(BasisKind::Fourier),
            other => Err(format!(
                "unknown basis kind {other:?}; expected bspline or fourier"
            )),
        }
    }
}

/// Recipe for the smoothing basis; the domain defaults to the span of the
/// observed times.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct BasisSpec {
    pub kind: BasisKind,
    /// Spline degree (ignored for Fourier).
    pub degree: usize,
    /// Number of equally spaced break points, endpoints included (B-spline
    /// only). Dimension is n_breaks + degree - 1.
    pub n_breaks: usize,
    /// Fourier dimension (ignored for B-splines).
    pub dimension: usize,
    pub domain: Option<(f64, f64)>,
}

impl Default for BasisSpec {
    /// Cubic B-splines on 13 equally spaced break points.
    fn default() -> Self {
        BasisSpec {
            kind: BasisKind::Bspline,
            degree: 3,
            n_breaks: 13,
            dimension: 11,
            domain: None,
        }
    }
}

impl BasisSpec {
    /// Builds the basis, inferring the domain from the data when not given.
    ///
    /// # Errors
    /// No series to infer a domain from, or invalid basis parameters.
    pub fn build(&self, series: &[LongitudinalSeries]) -> Result<BasisSystem, AdjustError> {
        let domain = match self.domain {
            Some(d) => d,
            None => {
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                for s in series {
                    for &t in &s.times {
                        lo = lo.min(t);
                        hi = hi.max(t);
                    }
                }
                if !(lo < hi) {
                    return Err(AdjustError::EmptyDomain);
                }
                (lo, hi)
            }
        };
        let basis = match self.kind {
            BasisKind::Bspline => BasisSystem::bspline(domain, self.degree, self.n_breaks)?,
            BasisKind::Fourier => BasisSystem::fourier(domain, self.dimension, None)?,
        };
        Ok(basis)
    }
}

#[derive(Debug, Clone)]
pub struct AdjustOptions {
    pub family: Family,
    pub basis: BasisSpec,
    /// Cumulative-inertia cap bounding the truncation candidates.
    pub inertia_cap: f64,
    pub summary: SummaryStat,
}

impl Default for AdjustOptions {
    fn default() -> Self {
        AdjustOptions {
            family: Family::Poisson,
            basis: BasisSpec::default(),
            inertia_cap: 0.95,
            summary: SummaryStat::Mean,
        }
    }
}

/// Functional-mode artifacts needed to report the fitted parameter function.
#[derive(Debug, Clone)]
pub struct FunctionalBlock {
    pub basis: BasisSystem,
    pub design: FunctionalDesign,
}

/// A dataset wired for `fit_null`, with the truncation already selected.
#[derive(Debug, Clone)]
pub struct AdjustedModel {
    pub mode: AdjustmentMode,
    pub dataset: Dataset,
    /// Number of score columns entering the model (0 for none/univariate).
    pub truncation: usize,
    pub selection: Option<TruncationSelection>,
    pub functional: Option<FunctionalBlock>,
}

#[derive(Debug, Error)]
pub enum AdjustError {
    #[error("adjustment mode {0} needs longitudinal data, but none were supplied")]
    MissingSeries(AdjustmentMode),
    #[error("expected {expected} longitudinal series (one per location), got {got}")]
    SeriesCount { expected: usize, got: usize },
    #[error("series {id:?} is empty; cannot summarize it")]
    EmptySeries { id: String },
    #[error("series {id:?} contains a non-finite value")]
    NonFiniteSeries { id: String },
    #[error(
        "per-time-point adjustment needs one common time grid across locations; \
         series {first:?} and {other:?} have different grids"
    )]
    IrregularGrid { first: String, other: String },
    #[error("cannot infer a time domain: no observations")]
    EmptyDomain,
    #[error(transparent)]
    Fda(#[from] FdaError),
    #[error(transparent)]
    Glm(#[from] GlmError),
}

fn require_series<'a>(
    series: Option<&'a [LongitudinalSeries]>,
    mode: AdjustmentMode,
    n: usize,
) -> Result<&'a [LongitudinalSeries], AdjustError> {
    let series = series.ok_or(AdjustError::MissingSeries(mode))?;
    if series.len() != n {
        return Err(AdjustError::SeriesCount {
            expected: n,
            got: series.len(),
        });
    }
    Ok(series)
}

fn summarize(series: &LongitudinalSeries, stat: SummaryStat) -> Result<f64, AdjustError> {
    if series.values.is_empty() {
        return Err(AdjustError::EmptySeries {
            id: series.id.clone(),
        });
    }
    if series.values.iter().any(|v| !v.is_finite()) {
        return Err(AdjustError::NonFiniteSeries {
            id: series.id.clone(),
        });
    }
    Ok(match stat {
        SummaryStat::Mean => series.values.iter().sum::<f64>() / series.values.len() as f64,
        SummaryStat::Median => {
            let mut sorted = series.values.clone();
            sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite values"));
            let m = sorted.len();
            if m % 2 == 1 {
                sorted[m / 2]
            } else {
                0.5 * (sorted[m / 2 - 1] + sorted[m / 2])
            }
        }
    })
}

fn append_column(base: Option<&Array2<f64>>, column: Array1<f64>) -> Array2<f64> {
    let n = column.len();
    let p = base.map_or(0, |z| z.ncols());
    let mut out = Array2::zeros((n, p + 1));
    if let Some(z) = base {
        out.slice_mut(ndarray::s![.., ..p]).assign(z);
    }
    out.column_mut(p).assign(&column);
    out
}

/// Matrix of raw values on the common grid, or an error naming the first
/// two locations whose grids differ.
fn common_grid_matrix(series: &[LongitudinalSeries]) -> Result<Array2<f64>, AdjustError> {
    let first = &series[0];
    if first.times.is_empty() {
        return Err(AdjustError::EmptySeries {
            id: first.id.clone(),
        });
    }
    for s in series.iter().skip(1) {
        if s.times != first.times {
            return Err(AdjustError::IrregularGrid {
                first: first.id.clone(),
                other: s.id.clone(),
            });
        }
    }
    let m = first.times.len();
    let mut a = Array2::zeros((series.len(), m));
    for (i, s) in series.iter().enumerate() {
        if s.values.len() != m {
            return Err(AdjustError::Fda(FdaError::SeriesLengthMismatch {
                id: s.id.clone(),
                times: s.times.len(),
                values: s.values.len(),
            }));
        }
        if s.values.iter().any(|v| !v.is_finite()) {
            return Err(AdjustError::NonFiniteSeries { id: s.id.clone() });
        }
        for (j, &v) in s.values.iter().enumerate() {
            a[[i, j]] = v;
        }
    }
    Ok(a)
}

/// Builds the dataset for one adjustment mode and selects the truncation
/// where scores are involved (AIC under the cumulative-inertia cap).
///
/// # Errors
/// Missing or inconsistent longitudinal data, or propagated smoothing /
/// decomposition / selection failures.
pub fn build_adjusted_model(
    y: &Array1<f64>,
    populations: Option<&Array1<f64>>,
    scalar_covariates: Option<&Array2<f64>>,
    series: Option<&[LongitudinalSeries]>,
    mode: AdjustmentMode,
    options: &AdjustOptions,
) -> Result<AdjustedModel, AdjustError> {
    let n = y.len();
    let base = Dataset {
        y: y.clone(),
        populations: populations.cloned(),
        scalar_covariates: scalar_covariates.cloned(),
        scores: None,
        eigenvalues: None,
    };

    match mode {
        AdjustmentMode::None => Ok(AdjustedModel {
            mode,
            dataset: base,
            truncation: 0,
            selection: None,
            functional: None,
        }),
        AdjustmentMode::Univariate => {
            let series = require_series(series, mode, n)?;
            let summary = series
                .iter()
                .map(|s| summarize(s, options.summary))
                .collect::<Result<Vec<f64>, _>>()?;
            let dataset = Dataset {
                scalar_covariates: Some(append_column(
                    scalar_covariates,
                    Array1::from_vec(summary),
                )),
                ..base
            };
            Ok(AdjustedModel {
                mode,
                dataset,
                truncation: 0,
                selection: None,
                functional: None,
            })
        }
        AdjustmentMode::Multivariate => {
            let series = require_series(series, mode, n)?;
            let raw = common_grid_matrix(series)?;
            let identity = Array2::eye(raw.ncols());
            let design = fda::functional_pca(&raw, &identity)?;
            let dataset = Dataset {
                scores: Some(design.scores.clone()),
                eigenvalues: Some(design.eigenvalues.clone()),
                ..base
            };
            let selection = glm::select_truncation(&dataset, options.family, options.inertia_cap)?;
            Ok(AdjustedModel {
                mode,
                dataset,
                truncation: selection.selected,
                selection: Some(selection),
                functional: None,
            })
        }
        AdjustmentMode::Functional => {
            let series = require_series(series, mode, n)?;
            let basis = options.basis.build(series)?;
            let coefficients = fda::smooth_series(series, &basis)?;
            let gram = fda::gram_matrix(&basis);
            let design = fda::functional_pca(&coefficients, &gram)?;
            let dataset = Dataset {
                scores: Some(design.scores.clone()),
                eigenvalues: Some(design.eigenvalues.clone()),
                ..base
            };
            let selection = glm::select_truncation(&dataset, options.family, options.inertia_cap)?;
            Ok(AdjustedModel {
                mode,
                dataset,
                truncation: selection.selected,
                selection: Some(selection),
                functional: Some(FunctionalBlock { basis, design }),
            })
        }
    }
}
