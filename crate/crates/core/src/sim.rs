//! Simulation harness: synthetic areal datasets with a true cluster (pure
//! intensity) and a fake cluster (driven entirely by a longitudinal
//! confounder), plus a study runner measuring detection power and overlap
//! rates under each adjustment mode.

use crate::adjust::{
    build_adjusted_model, AdjustError, AdjustmentMode, AdjustOptions, BasisSpec,
};
use crate::fda::LongitudinalSeries;
use crate::geo::{self, GeoError, Location, PotentialCluster};
use crate::glm::{self, Family, GlmError};
use crate::linalg::{derive_seed, gauss_legendre};
use crate::scan::{self, MonteCarloConfig, ScanError, Sidedness};
use ndarray::Array1;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use std::path::Path;
use std::sync::OnceLock;
use thiserror::Error;

/// Baseline log incidence: roughly 1e-5 cases per capita.
pub const DEFAULT_INTERCEPT: f64 = -11.51;

/// Triangular bump centered at t = 11 with half-width 6.
pub fn tent(t: f64) -> f64 {
    (6.0 - (t - 11.0).abs()).max(0.0)
}

/// Shape of the confounding coefficient function: (t/9) sin(pi t/9 + pi).
/// Applied at the calibrated scale `effect_scale()` in the generator.
pub fn coefficient_shape(t: f64) -> f64 {
    (t / 9.0) * (std::f64::consts::PI * t / 9.0 + std::f64::consts::PI).sin()
}

/// Integrals of the coefficient shape against the three tent profiles over
/// the study interval.
#[derive(Debug, Clone, Copy)]
pub struct CurveIntegrals {
    /// Against tent(t) (shared component).
    pub center: f64,
    /// Against tent(t + 4) (component outside the fake cluster).
    pub outside: f64,
    /// Against tent(t - 4) (component inside the fake cluster).
    pub inside: f64,
}

/// Study interval for the synthetic curves.
pub const DOMAIN: (f64, f64) = (0.0, 21.0);

/// Integrates shape(t) * tent(t + shift) over the domain exactly: panels are
/// split at the tent's kinks and each smooth piece gets high-order
/// Gauss-Legendre quadrature.
fn shape_tent_integral(shift: f64) -> f64 {
    let (lo, hi) = DOMAIN;
    let mut cuts = vec![lo, hi];
    for kink in [5.0 - shift, 11.0 - shift, 17.0 - shift] {
        if kink > lo && kink < hi {
            cuts.push(kink);
        }
    }
    cuts.sort_by(|a, b| a.partial_cmp(b).expect("finite cuts"));
    let (nodes, weights) = gauss_legendre(16);
    let mut total = 0.0;
    for pair in cuts.windows(2) {
        let subpanels = 8;
        let step = (pair[1] - pair[0]) / subpanels as f64;
        for s in 0..subpanels {
            let a = pair[0] + s as f64 * step;
            let half = 0.5 * step;
            let mid = a + half;
            for (&x, &w) in nodes.iter().zip(&weights) {
                let t = mid + half * x;
                total += w * half * coefficient_shape(t) * tent(t + shift);
            }
        }
    }
    total
}

/// Cached shape-times-tent integrals.
pub fn curve_integrals() -> CurveIntegrals {
    static CACHE: OnceLock<CurveIntegrals> = OnceLock::new();
    *CACHE.get_or_init(|| CurveIntegrals {
        center: shape_tent_integral(0.0),
        outside: shape_tent_integral(4.0),
        inside: shape_tent_integral(-4.0),
    })
}

/// Mean of exp(c (U a + (1-U) b)) over U ~ Uniform(0, 1).
fn mixture_mean_factor(c: f64, a: f64, b: f64) -> f64 {
    let spread = c * (a - b);
    if spread.abs() < 1e-12 {
        (c * b).exp()
    } else {
        ((c * a).exp() - (c * b).exp()) / spread
    }
}

/// Scale applied to the coefficient shape so that the expected per-capita
/// outcome is exactly twice as high inside the fake cluster as outside.
/// Solved once by bisection on the closed-form mean ratio.
pub fn effect_scale() -> f64 {
    static CACHE: OnceLock<f64> = OnceLock::new();
    *CACHE.get_or_init(|| {
        let ints = curve_integrals();
        let ratio = |c: f64| {
            mixture_mean_factor(c, ints.center, ints.inside)
                / mixture_mean_factor(c, ints.center, ints.outside)
        };
        let mut lo = 1e-8;
        let mut hi = 1.0;
        debug_assert!(ratio(lo) < 2.0 && ratio(hi) > 2.0);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if ratio(mid) < 2.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    })
}

/// Synthetic study geometry: 94 areal units with at-risk populations.
#[derive(Debug, Clone)]
pub struct Geometry {
    pub locations: Vec<Location>,
    pub populations: Vec<f64>,
}

impl Geometry {
    pub fn n(&self) -> usize {
        self.locations.len()
    }

    pub fn ids(&self) -> Vec<String> {
        self.locations.iter().map(|l| l.id.clone()).collect()
    }
}

/// The bundled 94-unit geometry (kilometer coordinates, census-scale
/// populations) used by the simulation study.
pub fn bundled_geometry() -> Geometry {
    static RAW: &str = include_str!("../data/locations94.csv");
    let mut reader = csv::Reader::from_reader(RAW.as_bytes());
    let mut locations = Vec::new();
    let mut populations = Vec::new();
    for record in reader.records() {
        let record = record.expect("bundled geometry is well-formed");
        let id = record.get(0).expect("id column").to_string();
        let x: f64 = record.get(1).expect("x column").parse().expect("numeric x");
        let y: f64 = record.get(2).expect("y column").parse().expect("numeric y");
        let pop: f64 = record
            .get(3)
            .expect("population column")
            .parse()
            .expect("numeric population");
        locations.push(Location::new(id, x, y));
        populations.push(pop);
    }
    Geometry {
        locations,
        populations,
    }
}

/// Default cluster pair: the ball of `size` locations around the
/// southernmost unit (true cluster) and around the northernmost unit (fake
/// cluster). Indices are sorted; the pair must come out disjoint.
///
/// # Errors
/// Geometry too small or the two balls overlapping.
pub fn default_clusters(
    geometry: &Geometry,
    size: usize,
) -> Result<(Vec<usize>, Vec<usize>), SimError> {
    let n = geometry.n();
    if size == 0 || 2 * size > n {
        return Err(SimError::ClusterSize { size, n });
    }
    let ball = |seed: usize| -> Vec<usize> {
        let sx = geometry.locations[seed].x;
        let sy = geometry.locations[seed].y;
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| {
            let da = (geometry.locations[a].x - sx).hypot(geometry.locations[a].y - sy);
            let db = (geometry.locations[b].x - sx).hypot(geometry.locations[b].y - sy);
            da.partial_cmp(&db).expect("finite distances").then(a.cmp(&b))
        });
        let mut members: Vec<usize> = order.into_iter().take(size).collect();
        members.sort_unstable();
        members
    };
    let south = (0..n)
        .min_by(|&a, &b| {
            geometry.locations[a]
                .y
                .partial_cmp(&geometry.locations[b].y)
                .expect("finite y")
        })
        .expect("nonempty geometry");
    let north = (0..n)
        .max_by(|&a, &b| {
            geometry.locations[a]
                .y
                .partial_cmp(&geometry.locations[b].y)
                .expect("finite y")
        })
        .expect("nonempty geometry");
    let true_cluster = ball(south);
    let fake_cluster = ball(north);
    let mut merged = true_cluster.clone();
    merged.extend(&fake_cluster);
    merged.sort_unstable();
    merged.dedup();
    if merged.len() != true_cluster.len() + fake_cluster.len() {
        return Err(SimError::ClustersOverlap);
    }
    Ok((true_cluster, fake_cluster))
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct SimulationConfig {
    /// Relative-risk grid exp(delta) for the true cluster.
    pub relative_risks: Vec<f64>,
    /// Datasets per grid point.
    pub replicates: usize,
    /// Monte Carlo replicates per dataset.
    pub mc_replicates: usize,
    /// Significance level for the scan test.
    pub level: f64,
    /// Number of equally spaced observation times on the domain.
    pub n_times: usize,
    /// Observation noise standard deviation.
    pub noise_sd: f64,
    pub seed: u64,
    /// Sorted location indices of the intensity-driven cluster.
    pub true_cluster: Vec<usize>,
    /// Sorted location indices of the covariate-driven cluster.
    pub fake_cluster: Vec<usize>,
    pub modes: Vec<AdjustmentMode>,
    pub max_fraction: f64,
    pub inertia_cap: f64,
    /// Scale on the coefficient shape; None means the calibrated value,
    /// Some(0.0) switches the confounder off.
    pub coefficient_scale: Option<f64>,
    pub intercept: f64,
}

impl SimulationConfig {
    /// Desk-scale defaults: 200 replicates with M = 99, all three adjusted
    /// modes, clusters from the bundled geometry.
    pub fn desk_scale() -> Self {
        let geometry = bundled_geometry();
        let (true_cluster, fake_cluster) =
            default_clusters(&geometry, 8).expect("bundled clusters are disjoint");
        SimulationConfig {
            relative_risks: vec![1.0, 1.2, 1.4, 1.6, 1.8, 2.0],
            replicates: 200,
            mc_replicates: 99,
            level: 0.05,
            n_times: 70,
            noise_sd: 0.25,
            seed: 20260814,
            true_cluster,
            fake_cluster,
            modes: vec![
                AdjustmentMode::Univariate,
                AdjustmentMode::Multivariate,
                AdjustmentMode::Functional,
            ],
            max_fraction: 0.5,
            inertia_cap: 0.95,
            coefficient_scale: None,
            intercept: DEFAULT_INTERCEPT,
        }
    }

    /// Full-scale defaults: 1000 replicates with M = 999.
    pub fn full_scale() -> Self {
        SimulationConfig {
            replicates: 1000,
            mc_replicates: 999,
            ..SimulationConfig::desk_scale()
        }
    }

    /// Observation times: `n_times` equally spaced points on the domain,
    /// endpoints included.
    pub fn time_grid(&self) -> Vec<f64> {
        let (lo, hi) = DOMAIN;
        let m = self.n_times;
        (0..m)
            .map(|j| lo + (hi - lo) * j as f64 / (m - 1) as f64)
            .collect()
    }

    fn validate(&self, n: usize) -> Result<(), SimError> {
        if self.relative_risks.is_empty() || self.modes.is_empty() {
            return Err(SimError::EmptyGrid);
        }
        if self.relative_risks.iter().any(|&r| !(r.is_finite() && r > 0.0)) {
            return Err(SimError::InvalidRelativeRisk);
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(SimError::InvalidLevel(self.level));
        }
        if self.n_times < 2 {
            return Err(SimError::TooFewTimes(self.n_times));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(SimError::InvalidNoise(self.noise_sd));
        }
        if self.replicates == 0 || self.mc_replicates == 0 {
            return Err(SimError::EmptyGrid);
        }
        if !self.intercept.is_finite() {
            return Err(SimError::InvalidIntercept(self.intercept));
        }
        for cluster in [&self.true_cluster, &self.fake_cluster] {
            if cluster.is_empty() {
                return Err(SimError::EmptyCluster);
            }
            if let Some(&bad) = cluster.iter().find(|&&i| i >= n) {
                return Err(SimError::ClusterIndexOutOfRange { index: bad, n });
            }
        }
        let mut merged = self.true_cluster.clone();
        merged.extend(&self.fake_cluster);
        merged.sort_unstable();
        merged.dedup();
        if merged.len() != self.true_cluster.len() + self.fake_cluster.len() {
            return Err(SimError::ClustersOverlap);
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum SimError {
    #[error("relative-risk grid, mode list, and replicate counts must be non-empty")]
    EmptyGrid,
    #[error("relative risks must be positive and finite")]
    InvalidRelativeRisk,
    #[error("significance level must lie in (0, 1), got {0}")]
    InvalidLevel(f64),
    #[error("need at least 2 observation times, got {0}")]
    TooFewTimes(usize),
    #[error("noise standard deviation must be nonnegative, got {0}")]
    InvalidNoise(f64),
    #[error("intercept must be finite, got {0}")]
    InvalidIntercept(f64),
    #[error("cluster size {size} does not fit twice into {n} locations")]
    ClusterSize { size: usize, n: usize },
    #[error("true and fake clusters must be disjoint")]
    ClustersOverlap,
    #[error("cluster index {index} out of range for {n} locations")]
    ClusterIndexOutOfRange { index: usize, n: usize },
    #[error("clusters must be non-empty")]
    EmptyCluster,
    #[error("no most likely cluster (every window excluded)")]
    NoMlc,
    #[error(transparent)]
    Geo(#[from] GeoError),
    #[error(transparent)]
    Glm(#[from] GlmError),
    #[error(transparent)]
    Adjust(#[from] AdjustError),
    #[error(transparent)]
    Scan(#[from] ScanError),
    #[error("writing output: {0}")]
    Io(#[from] std::io::Error),
    #[error("writing csv: {0}")]
    Csv(#[from] csv::Error),
}

/// One simulated dataset: recorded noisy curves and Poisson counts.
#[derive(Debug, Clone)]
pub struct SimulatedData {
    pub series: Vec<LongitudinalSeries>,
    pub y: Array1<f64>,
    /// True Poisson means, kept for diagnostics.
    pub means: Array1<f64>,
}

/// Draws one dataset: per location, a uniform mixture weight over the two
/// tent profiles, Gaussian observation noise on the recorded curve, and a
/// Poisson count whose log mean adds the intercept, the true-cluster
/// intensity, and the integral of the coefficient function against the
/// noiseless curve (closed form via the precomputed tent integrals).
///
/// The draw order (all mixture weights, then all noise, then all counts) is
/// part of the reproducibility contract.
pub fn generate_dataset(
    config: &SimulationConfig,
    geometry: &Geometry,
    exp_delta: f64,
    scale: f64,
    rng: &mut impl Rng,
) -> SimulatedData {
    let n = geometry.n();
    let times = config.time_grid();
    let ints = curve_integrals();
    let delta = exp_delta.ln();
    let in_true: Vec<bool> = membership(n, &config.true_cluster);
    let in_fake: Vec<bool> = membership(n, &config.fake_cluster);

    let weights: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();
    let noise = Normal::new(0.0, config.noise_sd).expect("validated noise scale");
    let mut series = Vec::with_capacity(n);
    for i in 0..n {
        let shift = if in_fake[i] { -4.0 } else { 4.0 };
        let values: Vec<f64> = times
            .iter()
            .map(|&t| {
                weights[i] * tent(t) + (1.0 - weights[i]) * tent(t + shift) + noise.sample(rng)
            })
            .collect();
        series.push(LongitudinalSeries::new(
            geometry.locations[i].id.clone(),
            times.clone(),
            values,
        ));
    }

    let mut means = Array1::zeros(n);
    for i in 0..n {
        let mix = if in_fake[i] { ints.inside } else { ints.outside };
        let integral = scale * (weights[i] * ints.center + (1.0 - weights[i]) * mix);
        let xi = if in_true[i] { delta } else { 0.0 };
        means[i] = geometry.populations[i] * (config.intercept + xi + integral).exp();
    }
    let y = Array1::from_shape_fn(n, |i| Family::Poisson.sample(means[i], None, rng));

    SimulatedData { series, y, means }
}

fn membership(n: usize, cluster: &[usize]) -> Vec<bool> {
    let mut mask = vec![false; n];
    for &i in cluster {
        mask[i] = true;
    }
    mask
}

/// Location-overlap rates of a detected window against a target cluster:
/// TP = |window and target| / |target|, FP = |window minus target| /
/// (n - |target|). Both inputs sorted.
pub fn overlap_rates(members: &[usize], target: &[usize], n: usize) -> (f64, f64) {
    let mut hits = 0usize;
    let mut ti = 0usize;
    for &m in members {
        while ti < target.len() && target[ti] < m {
            ti += 1;
        }
        if ti < target.len() && target[ti] == m {
            hits += 1;
        }
    }
    let tp = hits as f64 / target.len() as f64;
    let fp = (members.len() - hits) as f64 / (n - target.len()) as f64;
    (tp, fp)
}

/// Which planted cluster a metrics row refers to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TargetCluster {
    True,
    Fake,
}

impl std::fmt::Display for TargetCluster {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            TargetCluster::True => "true",
            TargetCluster::Fake => "fake",
        })
    }
}

/// Aggregated study metrics for one (mode, relative risk, target) cell.
/// `power` is the fraction of replicates whose MLC is significant and
/// intersects the target; `tp`/`fp` average the overlap rates over all
/// replicates, and the `_significant` variants over significant replicates
/// only (None when nothing was significant).
#[derive(Debug, Clone)]
pub struct MetricsRow {
    pub mode: AdjustmentMode,
    pub exp_delta: f64,
    pub target: TargetCluster,
    pub power: f64,
    pub tp: f64,
    pub fp: f64,
    pub tp_significant: Option<f64>,
    pub fp_significant: Option<f64>,
}

/// Outcome of one analysis (one dataset under one adjustment mode).
#[derive(Debug, Clone)]
pub struct ReplicateRecord {
    pub mode: AdjustmentMode,
    pub exp_delta: f64,
    pub replicate: usize,
    pub lambda: f64,
    pub p_value: f64,
    pub significant: bool,
    pub truncation: usize,
    pub mlc_center: String,
    pub mlc_size: usize,
    pub tp_true: f64,
    pub fp_true: f64,
    pub tp_fake: f64,
    pub fp_fake: f64,
}

#[derive(Debug, Clone)]
pub struct StudyResult {
    pub metrics: Vec<MetricsRow>,
    pub replicates: Vec<ReplicateRecord>,
    /// Human-readable descriptions of replicate analyses that failed.
    pub failures: Vec<String>,
}

/// Runs the full study on the bundled geometry.
///
/// # Errors
/// Invalid configuration or window enumeration failure; per-replicate
/// analysis failures are collected, not propagated.
pub fn run_study(config: &SimulationConfig) -> Result<StudyResult, SimError> {
    run_study_with_geometry(config, &bundled_geometry())
}

/// `run_study` on explicit geometry. Replicate datasets are paired across
/// modes (the data seed depends only on the grid point and replicate), so
/// mode comparisons see identical data.
pub fn run_study_with_geometry(
    config: &SimulationConfig,
    geometry: &Geometry,
) -> Result<StudyResult, SimError> {
    let n = geometry.n();
    config.validate(n)?;
    let scale = config.coefficient_scale.unwrap_or_else(effect_scale);
    let distances = geo::distance_matrix(&geometry.locations)?;
    let windows = geo::enumerate_windows(&distances, config.max_fraction)?;
    let populations = Array1::from_vec(geometry.populations.clone());
    let options = AdjustOptions {
        family: Family::Poisson,
        basis: BasisSpec {
            domain: Some(DOMAIN),
            ..BasisSpec::default()
        },
        inertia_cap: config.inertia_cap,
        ..AdjustOptions::default()
    };

    let jobs: Vec<(usize, usize)> = (0..config.relative_risks.len())
        .flat_map(|ri| (0..config.replicates).map(move |rep| (ri, rep)))
        .collect();

    let per_job: Vec<Vec<Result<ReplicateRecord, String>>> = jobs
        .par_iter()
        .map(|&(ri, rep)| {
            let exp_delta = config.relative_risks[ri];
            let data_seed = derive_seed(config.seed, (ri * config.replicates + rep) as u64);
            let mut rng = ChaCha8Rng::seed_from_u64(data_seed);
            let data = generate_dataset(config, geometry, exp_delta, scale, &mut rng);
            config
                .modes
                .iter()
                .enumerate()
                .map(|(mi, &mode)| {
                    analyze_replicate(
                        &data,
                        &populations,
                        &windows,
                        mode,
                        &options,
                        config,
                        geometry,
                        derive_seed(data_seed, 1000 + mi as u64),
                    )
                    .map(|mut record| {
                        record.mode = mode;
                        record.exp_delta = exp_delta;
                        record.replicate = rep;
                        record
                    })
                    .map_err(|e| format!("mode={mode} exp_delta={exp_delta} replicate={rep}: {e}"))
                })
                .collect()
        })
        .collect();

    let mut replicates = Vec::new();
    let mut failures = Vec::new();
    for job in per_job {
        for outcome in job {
            match outcome {
                Ok(record) => replicates.push(record),
                Err(message) => failures.push(message),
            }
        }
    }

    let mut metrics = Vec::new();
    for &mode in &config.modes {
        for &exp_delta in &config.relative_risks {
            let cell: Vec<&ReplicateRecord> = replicates
                .iter()
                .filter(|r| r.mode == mode && r.exp_delta == exp_delta)
                .collect();
            if cell.is_empty() {
                continue;
            }
            for target in [TargetCluster::True, TargetCluster::Fake] {
                metrics.push(aggregate_cell(&cell, mode, exp_delta, target));
            }
        }
    }

    Ok(StudyResult {
        metrics,
        replicates,
        failures,
    })
}

fn aggregate_cell(
    cell: &[&ReplicateRecord],
    mode: AdjustmentMode,
    exp_delta: f64,
    target: TargetCluster,
) -> MetricsRow {
    let pick = |r: &ReplicateRecord| match target {
        TargetCluster::True => (r.tp_true, r.fp_true),
        TargetCluster::Fake => (r.tp_fake, r.fp_fake),
    };
    let n_all = cell.len() as f64;
    let mut power_hits = 0usize;
    let mut tp_sum = 0.0;
    let mut fp_sum = 0.0;
    let mut sig_tp_sum = 0.0;
    let mut sig_fp_sum = 0.0;
    let mut sig_count = 0usize;
    for r in cell {
        let (tp, fp) = pick(r);
        tp_sum += tp;
        fp_sum += fp;
        if r.significant {
            sig_count += 1;
            sig_tp_sum += tp;
            sig_fp_sum += fp;
            if tp > 0.0 {
                power_hits += 1;
            }
        }
    }
    MetricsRow {
        mode,
        exp_delta,
        target,
        power: power_hits as f64 / n_all,
        tp: tp_sum / n_all,
        fp: fp_sum / n_all,
        tp_significant: (sig_count > 0).then(|| sig_tp_sum / sig_count as f64),
        fp_significant: (sig_count > 0).then(|| sig_fp_sum / sig_count as f64),
    }
}

#[allow(clippy::too_many_arguments)]
fn analyze_replicate(
    data: &SimulatedData,
    populations: &Array1<f64>,
    windows: &[PotentialCluster],
    mode: AdjustmentMode,
    options: &AdjustOptions,
    config: &SimulationConfig,
    geometry: &Geometry,
    mc_seed: u64,
) -> Result<ReplicateRecord, SimError> {
    let model = build_adjusted_model(
        &data.y,
        Some(populations),
        None,
        Some(&data.series),
        mode,
        options,
    )?;
    let null_fit = glm::fit_null(&model.dataset, Family::Poisson, model.truncation)?;
    let scan_result = scan::run_scan(
        &model.dataset,
        Family::Poisson,
        windows,
        &null_fit,
        Sidedness::Both,
    )?;
    let mlc = scan_result.mlc.ok_or(SimError::NoMlc)?;
    let mc = scan::monte_carlo(
        &model.dataset,
        Family::Poisson,
        windows,
        &null_fit,
        MonteCarloConfig {
            replicates: config.mc_replicates,
            seed: mc_seed,
            refit: true,
            sidedness: Sidedness::Both,
        },
    )?;
    let p_value = mc.p_value(scan_result.lambda);
    let members = &windows[mlc].members;
    let n = data.y.len();
    let (tp_true, fp_true) = overlap_rates(members, &config.true_cluster, n);
    let (tp_fake, fp_fake) = overlap_rates(members, &config.fake_cluster, n);

    Ok(ReplicateRecord {
        mode,
        exp_delta: 0.0, // overwritten by the caller
        replicate: 0,
        lambda: scan_result.lambda,
        p_value,
        significant: p_value <= config.level,
        truncation: model.truncation,
        mlc_center: geometry.locations[windows[mlc].center].id.clone(),
        mlc_size: members.len(),
        tp_true,
        fp_true,
        tp_fake,
        fp_fake,
    })
}

/// Writes the aggregated metrics table (one row per mode, relative risk,
/// and target; significant-only averages empty when nothing was
/// significant).
pub fn write_power_curves(path: &Path, metrics: &[MetricsRow]) -> Result<(), SimError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "mode",
        "exp_delta",
        "target",
        "power",
        "tp",
        "fp",
        "tp_significant",
        "fp_significant",
    ])?;
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    for row in metrics {
        writer.write_record([
            row.mode.to_string(),
            row.exp_delta.to_string(),
            row.target.to_string(),
            row.power.to_string(),
            row.tp.to_string(),
            row.fp.to_string(),
            opt(row.tp_significant),
            opt(row.fp_significant),
        ])?;
    }
    writer.flush()?;
    Ok(())
}

/// Writes the per-replicate audit table.
pub fn write_replicate_details(path: &Path, records: &[ReplicateRecord]) -> Result<(), SimError> {
    let mut writer = csv::Writer::from_path(path)?;
    writer.write_record([
        "mode",
        "exp_delta",
        "replicate",
        "lambda",
        "p_value",
        "significant",
        "truncation",
        "mlc_center",
        "mlc_size",
        "tp_true",
        "fp_true",
        "tp_fake",
        "fp_fake",
    ])?;
    for r in records {
        writer.write_record([
            r.mode.to_string(),
            r.exp_delta.to_string(),
            r.replicate.to_string(),
            r.lambda.to_string(),
            r.p_value.to_string(),
            r.significant.to_string(),
            r.truncation.to_string(),
            r.mlc_center.clone(),
            r.mlc_size.to_string(),
            r.tp_true.to_string(),
            r.fp_true.to_string(),
            r.tp_fake.to_string(),
            r.fp_fake.to_string(),
        ])?;
    }
    writer.flush()?;
    Ok(())
}
