//! Functional-data layer: basis systems (B-spline, Fourier), least-squares
//! smoothing of longitudinal series into coefficient rows, the basis Gram
//! matrix, and functional PCA producing an orthonormal eigenbasis and scores.

use crate::linalg;
use ndarray::{Array1, Array2, Axis};
use thiserror::Error;

/// Observations of one location's longitudinal covariate: values sampled at
/// strictly increasing times inside the study interval.
#[derive(Debug, Clone, PartialEq)]
pub struct LongitudinalSeries {
    pub id: String,
    pub times: Vec<f64>,
    pub values: Vec<f64>,
}

impl LongitudinalSeries {
    pub fn new(id: impl Into<String>, times: Vec<f64>, values: Vec<f64>) -> Self {
        Self {
            id: id.into(),
            times,
            values,
        }
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }
}

#[derive(Debug, Error)]
pub enum FdaError {
    #[error("domain must satisfy lo < hi with finite bounds, got [{lo}, {hi}]")]
    InvalidDomain { lo: f64, hi: f64 },
    #[error("need at least 2 break points (domain endpoints), got {0}")]
    TooFewBreaks(usize),
    #[error("break points must be strictly increasing and span exactly the domain")]
    InvalidBreaks,
    #[error("basis dimension must be at least 1, got {0}")]
    InvalidDimension(usize),
    #[error("Fourier period must be positive and finite, got {0}")]
    InvalidPeriod(f64),
    #[error("t = {t} outside the basis domain [{lo}, {hi}]")]
    OutsideDomain { t: f64, lo: f64, hi: f64 },
    #[error("series {id:?}: {times} times but {values} values")]
    SeriesLengthMismatch { id: String, times: usize, values: usize },
    #[error("series {id:?}: times must be strictly increasing")]
    NonIncreasingTimes { id: String },
    #[error("series {id:?}: non-finite time or value")]
    NonFiniteSeries { id: String },
    #[error(
        "series {id:?} has {len} observations but the basis dimension is {dimension}; \
         least squares needs at least as many observations as basis functions"
    )]
    SeriesTooShort { id: String, len: usize, dimension: usize },
    #[error("series {id:?}: smoothing design matrix is rank deficient (observations may all fall in one knot span)")]
    SmoothingSingular { id: String },
    #[error("Gram matrix numerically singular: smallest eigenvalue {min_eigenvalue:.3e}")]
    GramSingular { min_eigenvalue: f64 },
    #[error("coefficient matrix has {cols} columns but the Gram matrix is {k}x{k}")]
    GramShapeMismatch { cols: usize, k: usize },
    #[error("functional PCA needs at least 2 rows, got {0}")]
    TooFewRows(usize),
    #[error("component index {index} out of range for dimension {dimension}")]
    ComponentOutOfRange { index: usize, dimension: usize },
    #[error("total inertia is zero; no principal components are defined")]
    ZeroInertia,
}

#[derive(Debug, Clone, PartialEq)]
enum BasisKind {
    /// Clamped B-splines of the given degree over `breaks` (domain endpoints
    /// included once; the knot vector repeats them degree+1 times).
    BSpline { degree: usize, breaks: Vec<f64> },
    /// Truncated Fourier sequence 1, sin(w t'), cos(w t'), sin(2 w t'), ...
    /// with w = 2 pi / period, t' measured from the domain start, normalized
    /// so the system is orthonormal over one full period.
    Fourier { period: f64 },
}

/// A finite basis system over a closed interval.
#[derive(Debug, Clone, PartialEq)]
pub struct BasisSystem {
    kind: BasisKind,
    domain: (f64, f64),
    dimension: usize,
    /// Full clamped knot vector (B-spline only), length dimension + degree + 1.
    knots: Vec<f64>,
}

impl BasisSystem {
    /// B-spline basis with `n_breaks` equally spaced break points spanning
    /// `domain` (endpoints included). Dimension is n_breaks + degree - 1.
    pub fn bspline(domain: (f64, f64), degree: usize, n_breaks: usize) -> Result<Self, FdaError> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FdaError::InvalidDomain { lo, hi });
        }
        if n_breaks < 2 {
            return Err(FdaError::TooFewBreaks(n_breaks));
        }
        let step = (hi - lo) / (n_breaks - 1) as f64;
        let mut breaks: Vec<f64> = (0..n_breaks).map(|i| lo + step * i as f64).collect();
        breaks[n_breaks - 1] = hi;
        Self::bspline_with_breaks(domain, degree, breaks)
    }

    /// B-spline basis over explicit break points. The first and last break
    /// must equal the domain endpoints; interior breaks strictly increasing.
    pub fn bspline_with_breaks(
        domain: (f64, f64),
        degree: usize,
        breaks: Vec<f64>,
    ) -> Result<Self, FdaError> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FdaError::InvalidDomain { lo, hi });
        }
        if breaks.len() < 2 {
            return Err(FdaError::TooFewBreaks(breaks.len()));
        }
        let increasing = breaks.windows(2).all(|w| w[0] < w[1]);
        if !increasing || breaks[0] != lo || *breaks.last().unwrap() != hi {
            return Err(FdaError::InvalidBreaks);
        }
        let dimension = breaks.len() + degree - 1;
        let mut knots = Vec::with_capacity(dimension + degree + 1);
        knots.extend(std::iter::repeat(lo).take(degree + 1));
        knots.extend_from_slice(&breaks[1..breaks.len() - 1]);
        knots.extend(std::iter::repeat(hi).take(degree + 1));
        debug_assert_eq!(knots.len(), dimension + degree + 1);
        Ok(Self {
            kind: BasisKind::BSpline { degree, breaks },
            domain,
            dimension,
            knots,
        })
    }

    /// Fourier basis of the given dimension; `period` defaults to the domain
    /// length when `None`.
    pub fn fourier(
        domain: (f64, f64),
        dimension: usize,
        period: Option<f64>,
    ) -> Result<Self, FdaError> {
        let (lo, hi) = domain;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(FdaError::InvalidDomain { lo, hi });
        }
        if dimension < 1 {
            return Err(FdaError::InvalidDimension(dimension));
        }
        let period = period.unwrap_or(hi - lo);
        if !(period.is_finite() && period > 0.0) {
            return Err(FdaError::InvalidPeriod(period));
        }
        Ok(Self {
            kind: BasisKind::Fourier { period },
            domain,
            dimension,
            knots: Vec::new(),
        })
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn domain(&self) -> (f64, f64) {
        self.domain
    }

    /// Break points (B-spline) or panel boundaries (Fourier) used by the
    /// exact/composite quadrature in `gram_matrix`.
    fn quadrature_breaks(&self) -> Vec<f64> {
        match &self.kind {
            BasisKind::BSpline { breaks, .. } => breaks.clone(),
            BasisKind::Fourier { .. } => {
                let (lo, hi) = self.domain;
                let panels = (8 * self.dimension).max(32);
                (0..=panels)
                    .map(|i| lo + (hi - lo) * i as f64 / panels as f64)
                    .collect()
            }
        }
    }

    fn quadrature_order(&self) -> usize {
        match &self.kind {
            // product of two degree-d polynomials: degree 2d, exact with d+1 nodes
            BasisKind::BSpline { degree, .. } => degree + 1,
            BasisKind::Fourier { .. } => 8,
        }
    }

    /// Evaluates every basis function at `t`.
    ///
    /// # Errors
    /// `t` outside the domain.
    pub fn eval(&self, t: f64) -> Result<Array1<f64>, FdaError> {
        let (lo, hi) = self.domain;
        if !(t >= lo && t <= hi) {
            return Err(FdaError::OutsideDomain { t, lo, hi });
        }
        match &self.kind {
            BasisKind::BSpline { degree, .. } => Ok(self.eval_bspline(*degree, t)),
            BasisKind::Fourier { period } => Ok(self.eval_fourier(*period, t)),
        }
    }

    /// Cox-de Boor recurrence over the clamped knot vector, computed as the
    /// iterative triangle over all degree-0 indicators.
    fn eval_bspline(&self, degree: usize, t: f64) -> Array1<f64> {
        let knots = &self.knots;
        let spans = knots.len() - 1;
        // active span: half-open [U_j, U_{j+1}), except t at the right
        // endpoint, which belongs to the last nonempty span
        let span = if t >= self.domain.1 {
            (0..spans).rev().find(|&j| knots[j] < knots[j + 1]).unwrap()
        } else {
            (0..spans)
                .rev()
                .find(|&j| knots[j] <= t && t < knots[j + 1])
                .unwrap()
        };
        let mut values = vec![0.0; spans];
        values[span] = 1.0;
        for d in 1..=degree {
            for j in 0..spans - d {
                let mut v = 0.0;
                let left = knots[j + d] - knots[j];
                if left > 0.0 {
                    v += (t - knots[j]) / left * values[j];
                }
                let right = knots[j + d + 1] - knots[j + 1];
                if right > 0.0 {
                    v += (knots[j + d + 1] - t) / right * values[j + 1];
                }
                values[j] = v;
            }
        }
        Array1::from_iter(values[..self.dimension].iter().copied())
    }

    fn eval_fourier(&self, period: f64, t: f64) -> Array1<f64> {
        let omega = 2.0 * std::f64::consts::PI / period;
        let shifted = t - self.domain.0;
        let constant = 1.0 / period.sqrt();
        let amp = (2.0 / period).sqrt();
        Array1::from_shape_fn(self.dimension, |j| {
            if j == 0 {
                constant
            } else {
                let harmonic = ((j + 1) / 2) as f64;
                if j % 2 == 1 {
                    amp * (harmonic * omega * shifted).sin()
                } else {
                    amp * (harmonic * omega * shifted).cos()
                }
            }
        })
    }
}

/// Least-squares coefficient matrix A: row i holds the basis coefficients of
/// series i. Exact interpolation falls out when a series has exactly
/// `dimension` observations and a nonsingular design.
///
/// # Errors
/// Inconsistent or non-finite series, too few observations, or a rank
/// deficient design (all named with the offending location id).
pub fn smooth_series(
    series: &[LongitudinalSeries],
    basis: &BasisSystem,
) -> Result<Array2<f64>, FdaError> {
    let k = basis.dimension();
    let mut a = Array2::zeros((series.len(), k));
    for (i, s) in series.iter().enumerate() {
        if s.times.len() != s.values.len() {
            return Err(FdaError::SeriesLengthMismatch {
                id: s.id.clone(),
                times: s.times.len(),
                values: s.values.len(),
            });
        }
        if s.times.iter().chain(&s.values).any(|v| !v.is_finite()) {
            return Err(FdaError::NonFiniteSeries { id: s.id.clone() });
        }
        if !s.times.windows(2).all(|w| w[0] < w[1]) {
            return Err(FdaError::NonIncreasingTimes { id: s.id.clone() });
        }
        if s.times.len() < k {
            return Err(FdaError::SeriesTooShort {
                id: s.id.clone(),
                len: s.times.len(),
                dimension: k,
            });
        }
        let mut design = Array2::zeros((s.times.len(), k));
        for (row, &t) in s.times.iter().enumerate() {
            design.row_mut(row).assign(&basis.eval(t)?);
        }
        let values = Array1::from_iter(s.values.iter().copied());
        let coeffs = linalg::least_squares(&design, &values, 1e-10)
            .ok_or_else(|| FdaError::SmoothingSingular { id: s.id.clone() })?;
        a.row_mut(i).assign(&coeffs);
    }
    Ok(a)
}

/// Gram matrix of the basis: entries are the pairwise L2 inner products of
/// basis functions over the domain, by per-span Gauss-Legendre quadrature
/// (exact for the B-spline polynomial degree).
pub fn gram_matrix(basis: &BasisSystem) -> Array2<f64> {
    let k = basis.dimension();
    let breaks = basis.quadrature_breaks();
    let (nodes, weights) = linalg::gauss_legendre(basis.quadrature_order());
    let mut gram = Array2::zeros((k, k));
    for span in breaks.windows(2) {
        let half = 0.5 * (span[1] - span[0]);
        let mid = 0.5 * (span[1] + span[0]);
        for (&x, &w) in nodes.iter().zip(&weights) {
            let phi = basis
                .eval(mid + half * x)
                .expect("quadrature nodes lie inside the domain");
            let scale = w * half;
            for r in 0..k {
                if phi[r] == 0.0 {
                    continue;
                }
                for c in r..k {
                    gram[[r, c]] += scale * phi[r] * phi[c];
                }
            }
        }
    }
    for r in 0..k {
        for c in 0..r {
            gram[[r, c]] = gram[[c, r]];
        }
    }
    gram
}

/// FPCA of a coefficient matrix under the Gram inner product. Rows of A are
/// centered, the covariance of (A - mean) Gram^{1/2} is eigendecomposed, and
/// scores/harmonics are expressed back in the original basis.
#[derive(Debug, Clone)]
pub struct FunctionalDesign {
    /// Column means of A: coefficients of the mean function.
    pub mean_coefficients: Array1<f64>,
    /// Nonincreasing, nonnegative; sample variances of the score columns.
    pub eigenvalues: Array1<f64>,
    /// K x K matrix whose column j holds the basis coefficients of
    /// eigenfunction j (orthonormal under the Gram metric).
    pub harmonics: Array2<f64>,
    /// n x K score matrix: coordinates of each centered curve in the
    /// eigenbasis.
    pub scores: Array2<f64>,
    /// The Gram matrix the decomposition was computed under.
    pub gram: Array2<f64>,
}

impl FunctionalDesign {
    pub fn dimension(&self) -> usize {
        self.harmonics.ncols()
    }

    pub fn n(&self) -> usize {
        self.scores.nrows()
    }

    /// Cumulative inertia: share of total variance carried by the first
    /// 1..=K components. Monotone nondecreasing, reaching 1 at K.
    ///
    /// # Errors
    /// All eigenvalues zero (no variation in the data).
    pub fn cumulative_inertia(&self) -> Result<Array1<f64>, FdaError> {
        let total: f64 = self.eigenvalues.sum();
        if total <= 0.0 {
            return Err(FdaError::ZeroInertia);
        }
        let mut acc = 0.0;
        Ok(Array1::from_iter(self.eigenvalues.iter().map(|&v| {
            acc += v;
            acc / total
        })))
    }
}

/// Runs FPCA on a coefficient matrix `a` (n x K) under `gram` (K x K).
///
/// Sign convention: each harmonic is flipped so its largest-magnitude
/// coefficient is positive, making the decomposition deterministic.
///
/// # Errors
/// Shape mismatch, fewer than 2 rows, or a numerically singular Gram matrix
/// (smallest eigenvalue reported).
pub fn functional_pca(a: &Array2<f64>, gram: &Array2<f64>) -> Result<FunctionalDesign, FdaError> {
    let n = a.nrows();
    let k = a.ncols();
    if gram.nrows() != k || gram.ncols() != k {
        return Err(FdaError::GramShapeMismatch {
            cols: k,
            k: gram.nrows(),
        });
    }
    if n < 2 {
        return Err(FdaError::TooFewRows(n));
    }
    let roots = linalg::sym_sqrt(gram, 1e-12)
        .map_err(|min_eigenvalue| FdaError::GramSingular { min_eigenvalue })?;

    let mean_coefficients = a.mean_axis(Axis(0)).expect("n >= 2");
    let centered = a - &mean_coefficients.view().insert_axis(Axis(0));
    let b = centered.dot(&roots.sqrt);
    let covariance = b.t().dot(&b) / (n as f64 - 1.0);
    let eig = crate::linalg::sym_eigen(&covariance);
    let eigenvalues = eig.values.mapv(|v| v.max(0.0));

    let mut g = eig.vectors;
    let mut harmonics = roots.inv_sqrt.dot(&g);
    // deterministic signs: largest-|coefficient| entry of each harmonic positive
    for j in 0..k {
        let col = harmonics.column(j);
        let lead = col
            .iter()
            .enumerate()
            .max_by(|(ai, av), (bi, bv)| {
                av.abs()
                    .partial_cmp(&bv.abs())
                    .expect("finite harmonics")
                    .then(bi.cmp(ai))
            })
            .map(|(i, _)| i)
            .expect("k >= 1");
        if harmonics[[lead, j]] < 0.0 {
            harmonics.column_mut(j).mapv_inplace(|v| -v);
            g.column_mut(j).mapv_inplace(|v| -v);
        }
    }
    let scores = b.dot(&g);

    Ok(FunctionalDesign {
        mean_coefficients,
        eigenvalues,
        harmonics,
        scores,
        gram: gram.clone(),
    })
}

/// Evaluates eigenfunction `component` (0-based) at `t`.
///
/// # Errors
/// Component index out of range or `t` outside the domain.
pub fn eigenfunction_eval(
    design: &FunctionalDesign,
    basis: &BasisSystem,
    component: usize,
    t: f64,
) -> Result<f64, FdaError> {
    let k = design.dimension();
    if component >= k {
        return Err(FdaError::ComponentOutOfRange {
            index: component,
            dimension: k,
        });
    }
    let phi = basis.eval(t)?;
    Ok(design.harmonics.column(component).dot(&phi))
}

/// Evaluates the mean function at `t`.
pub fn mean_function_eval(
    design: &FunctionalDesign,
    basis: &BasisSystem,
    t: f64,
) -> Result<f64, FdaError> {
    let phi = basis.eval(t)?;
    Ok(design.mean_coefficients.dot(&phi))
}
