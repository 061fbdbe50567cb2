//! Orchestration: smooth, reduce, select, fit the null, scan, simulate,
//! report. One mode per `scan` run; `compare` reuses the same analysis per
//! mode.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, ClusterRow};
use crate::region::StudyRegion;
use funscan::adjust::{self, AdjustmentMode, AdjustOptions};
use funscan::geo::{self, PotentialCluster};
use funscan::glm::{self};
use funscan::scan::{self, ClusterReport, MonteCarloConfig};
use serde::Serialize;
use std::path::Path;

/// Everything one adjustment mode produces.
#[derive(Debug, Clone)]
pub struct ModeAnalysis {
    pub mode: AdjustmentMode,
    pub truncation: usize,
    pub lambda: f64,
    pub p_value: f64,
    pub significant: bool,
    pub reports: Vec<ClusterReport>,
    pub mc_lambdas: Vec<f64>,
    pub mc_warnings: usize,
    /// Fitted coefficient function on the configured grid (functional mode).
    pub theta: Option<Vec<(f64, f64)>>,
}

/// Runs the full analysis for one adjustment mode over precomputed windows.
pub fn analyze(
    config: &RunConfig,
    region: &StudyRegion,
    windows: &[PotentialCluster],
    mode: AdjustmentMode,
) -> Result<ModeAnalysis, CliError> {
    let options = AdjustOptions {
        family: config.family,
        basis: config.basis_spec(),
        inertia_cap: config.inertia_cap,
        summary: config.summary,
    };
    let model = adjust::build_adjusted_model(
        &region.y,
        Some(&region.populations),
        region.covariates.as_ref(),
        region.series.as_deref(),
        mode,
        &options,
    )?;
    let null_fit = glm::fit_null(&model.dataset, config.family, model.truncation)?;
    let result = scan::run_scan(
        &model.dataset,
        config.family,
        windows,
        &null_fit,
        config.sidedness,
    )?;
    let mc = scan::monte_carlo(
        &model.dataset,
        config.family,
        windows,
        &null_fit,
        MonteCarloConfig {
            replicates: config.mc_replicates,
            seed: config.seed,
            refit: true,
            sidedness: config.sidedness,
        },
    )?;
    let p_value = mc.p_value(result.lambda);
    let reports = scan::secondary_clusters(windows, &result, &mc, config.sidedness, config.level);

    let theta = match (&model.functional, null_fit.truncation) {
        (Some(block), j) if j > 0 => {
            let (lo, hi) = block.basis.domain();
            let g = config.theta_grid;
            let grid: Vec<f64> = (0..g)
                .map(|k| lo + (hi - lo) * k as f64 / (g - 1) as f64)
                .collect();
            Some(glm::parameter_function(
                &null_fit,
                &block.design,
                &block.basis,
                &grid,
            )?)
        }
        _ => None,
    };

    Ok(ModeAnalysis {
        mode,
        truncation: null_fit.truncation,
        lambda: result.lambda,
        p_value,
        significant: p_value <= config.level,
        reports,
        mc_lambdas: mc.lambdas,
        mc_warnings: mc.warnings,
        theta,
    })
}

/// Resolves report indices to location ids for emission.
pub fn cluster_rows(reports: &[ClusterReport], region: &StudyRegion) -> Vec<ClusterRow> {
    reports
        .iter()
        .map(|r| ClusterRow {
            cluster_rank: r.rank,
            center_id: region.locations[r.center].id.clone(),
            n_members: r.members.len(),
            member_ids: r
                .members
                .iter()
                .map(|&i| region.locations[i].id.as_str())
                .collect::<Vec<_>>()
                .join(";"),
            relative_risk: r.relative_risk,
            llr: r.llr,
            p_value: r.p_value,
        })
        .collect()
}

#[derive(Debug, Serialize)]
pub struct ModeSummary {
    pub mode: String,
    pub ok: bool,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub truncation: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub lambda: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p_value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub significant: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub reported_clusters: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mc_warnings: Option<usize>,
}

impl ModeSummary {
    pub fn completed(analysis: &ModeAnalysis) -> Self {
        ModeSummary {
            mode: analysis.mode.to_string(),
            ok: true,
            error: None,
            truncation: Some(analysis.truncation),
            lambda: Some(analysis.lambda),
            p_value: Some(analysis.p_value),
            significant: Some(analysis.significant),
            reported_clusters: Some(analysis.reports.len()),
            mc_warnings: Some(analysis.mc_warnings),
        }
    }

    pub fn failed(mode: AdjustmentMode, error: &CliError) -> Self {
        ModeSummary {
            mode: mode.to_string(),
            ok: false,
            error: Some(error.to_string()),
            truncation: None,
            lambda: None,
            p_value: None,
            significant: None,
            reported_clusters: None,
            mc_warnings: None,
        }
    }
}

/// Run record written next to every output set; no timestamps, so repeated
/// runs stay byte-identical.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub ok: bool,
    /// Echo of the effective configuration (scan config or study config).
    pub config: serde_json::Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_locations: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n_windows: Option<usize>,
    pub modes: Vec<ModeSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub study_failures: Option<Vec<String>>,
    pub outputs: Vec<String>,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize) -> Self {
        Manifest {
            tool: "funscan".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            ok: false,
            // plain data structs with string keys cannot fail to serialize
            config: serde_json::to_value(config).expect("config serializes"),
            n_locations: None,
            n_windows: None,
            modes: Vec::new(),
            study_failures: None,
            outputs: Vec::new(),
        }
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        io::write_json(&dir.join("manifest.json"), self)
    }
}

#[derive(Debug, Serialize)]
struct ErrorDoc<'a> {
    kind: &'a str,
    error: String,
}

/// `error.json`: machine-readable failure record.
pub fn write_error(dir: &Path, error: &CliError) -> Result<(), CliError> {
    io::write_json(
        &dir.join("error.json"),
        &ErrorDoc {
            kind: error.kind(),
            error: error.to_string(),
        },
    )
}

/// Records a failure that precedes the pipeline (config loading or
/// validation): manifest with ok = false plus error.json, so even rejected
/// runs leave a machine-readable trace.
pub fn write_config_failure(
    dir: &Path,
    command: &str,
    config: &impl Serialize,
    error: &CliError,
) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|source| CliError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    Manifest::new(command, config).write(dir)?;
    write_error(dir, error)
}

fn create_output_dir(config: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.output).map_err(|source| CliError::Io {
        path: config.output.clone(),
        source,
    })
}

/// The `scan` verb: one adjustment mode, full artifact set. The manifest is
/// written even when the run fails.
pub fn execute_scan(config: &RunConfig) -> Result<(), CliError> {
    create_output_dir(config)?;
    let mut manifest = Manifest::new("scan", config);
    match scan_inner(config, &mut manifest) {
        Ok(()) => {
            manifest.ok = true;
            manifest.write(&config.output)
        }
        Err(error) => {
            manifest.ok = false;
            manifest.modes.push(ModeSummary::failed(config.mode, &error));
            manifest.write(&config.output)?;
            write_error(&config.output, &error)?;
            Err(error)
        }
    }
}

fn scan_inner(config: &RunConfig, manifest: &mut Manifest) -> Result<(), CliError> {
    let region = crate::region::ingest(config)?;
    let distances = geo::distance_matrix(&region.locations)?;
    let windows = geo::enumerate_windows(&distances, config.max_fraction)?;
    manifest.n_locations = Some(region.n());
    manifest.n_windows = Some(windows.len());

    let analysis = analyze(config, &region, &windows, config.mode)?;
    let rows = cluster_rows(&analysis.reports, &region);
    let members: Vec<Vec<usize>> = analysis.reports.iter().map(|r| r.members.clone()).collect();

    let dir = &config.output;
    io::write_clusters_csv(&dir.join("clusters.csv"), &rows)?;
    io::write_geojson(&dir.join("clusters.geojson"), &rows, &members, &region.locations)?;
    io::write_lambdas_csv(&dir.join("mc_lambdas.csv"), &analysis.mc_lambdas)?;
    manifest.outputs = vec![
        "clusters.csv".into(),
        "clusters.geojson".into(),
        "mc_lambdas.csv".into(),
    ];
    if let Some(theta) = &analysis.theta {
        io::write_theta_csv(&dir.join("theta.csv"), theta)?;
        manifest.outputs.push("theta.csv".into());
    }
    manifest.outputs.push("manifest.json".into());
    manifest.modes.push(ModeSummary::completed(&analysis));
    Ok(())
}

/// The `windows` verb: dump the enumerated window collection.
pub fn execute_windows(config: &RunConfig) -> Result<(), CliError> {
    create_output_dir(config)?;
    let mut manifest = Manifest::new("windows", config);
    let result = windows_inner(config, &mut manifest);
    match result {
        Ok(()) => {
            manifest.ok = true;
            manifest.write(&config.output)
        }
        Err(error) => {
            manifest.write(&config.output)?;
            write_error(&config.output, &error)?;
            Err(error)
        }
    }
}

fn windows_inner(config: &RunConfig, manifest: &mut Manifest) -> Result<(), CliError> {
    let locations = io::read_locations(&config.locations)?;
    let distances = geo::distance_matrix(&locations)?;
    let windows = geo::enumerate_windows(&distances, config.max_fraction)?;
    manifest.n_locations = Some(locations.len());
    manifest.n_windows = Some(windows.len());

    let path = config.output.join("windows.csv");
    let mut writer = csv::Writer::from_path(&path).map_err(|e| CliError::Row {
        table: "windows",
        line: 0,
        message: e.to_string(),
    })?;
    writer
        .write_record(["window", "center_id", "radius", "n_members", "member_ids"])
        .and_then(|()| {
            for (k, w) in windows.iter().enumerate() {
                writer.write_record([
                    k.to_string(),
                    locations[w.center].id.clone(),
                    io::format_float(w.radius),
                    w.members.len().to_string(),
                    w.members
                        .iter()
                        .map(|&i| locations[i].id.as_str())
                        .collect::<Vec<_>>()
                        .join(";"),
                ])?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliError::Row {
            table: "windows",
            line: 0,
            message: e.to_string(),
        })?;
    manifest.outputs = vec!["windows.csv".into(), "manifest.json".into()];
    Ok(())
}
