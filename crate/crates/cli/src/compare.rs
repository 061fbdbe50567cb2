//! Side-by-side run of the four adjustment modes on identical data and
//! seed, with per-mode failures isolated.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io::{self, ClusterRow};
use crate::pipeline::{self, Manifest, ModeSummary};
use funscan::adjust::AdjustmentMode;
use funscan::geo;
use std::path::Path;

pub const COMPARED_MODES: [AdjustmentMode; 4] = [
    AdjustmentMode::None,
    AdjustmentMode::Univariate,
    AdjustmentMode::Multivariate,
    AdjustmentMode::Functional,
];

/// One row of the combined table: a reported cluster under one model.
#[derive(Debug, Clone)]
pub struct CompareRow {
    pub model: String,
    pub cluster: ClusterRow,
}

/// Combined-table CSV:
/// `model,cluster_rank,center_id,n_members,member_ids,relative_risk,llr,p_value`.
pub fn write_compare_csv(path: &Path, rows: &[CompareRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Row {
        table: "compare",
        line: 0,
        message: e.to_string(),
    })?;
    writer
        .write_record([
            "model",
            "cluster_rank",
            "center_id",
            "n_members",
            "member_ids",
            "relative_risk",
            "llr",
            "p_value",
        ])
        .and_then(|()| {
            for row in rows {
                writer.write_record([
                    row.model.clone(),
                    row.cluster.cluster_rank.to_string(),
                    row.cluster.center_id.clone(),
                    row.cluster.n_members.to_string(),
                    row.cluster.member_ids.clone(),
                    io::format_float(row.cluster.relative_risk),
                    io::format_float(row.cluster.llr),
                    io::format_float(row.cluster.p_value),
                ])?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliError::Row {
            table: "compare",
            line: 0,
            message: e.to_string(),
        })
}

/// The `compare` verb. All four modes run on the same ingested data and the
/// same seed; a mode that fails is recorded in the manifest and skipped in
/// the table. Exit is nonzero unless every mode completed.
pub fn execute_compare(config: &RunConfig) -> Result<(), CliError> {
    std::fs::create_dir_all(&config.output).map_err(|source| CliError::Io {
        path: config.output.clone(),
        source,
    })?;
    let mut manifest = Manifest::new("compare", config);
    match compare_inner(config, &mut manifest) {
        Ok(first_failure) => {
            manifest.ok = first_failure.is_none();
            manifest.write(&config.output)?;
            match first_failure {
                None => Ok(()),
                Some(error) => {
                    pipeline::write_error(&config.output, &error)?;
                    Err(error)
                }
            }
        }
        Err(error) => {
            manifest.write(&config.output)?;
            pipeline::write_error(&config.output, &error)?;
            Err(error)
        }
    }
}

/// Runs the four modes; hard errors (ingestion, window enumeration) abort,
/// per-mode analysis errors are isolated. Returns the first mode failure.
fn compare_inner(
    config: &RunConfig,
    manifest: &mut Manifest,
) -> Result<Option<CliError>, CliError> {
    let region = crate::region::ingest(config)?;
    let distances = geo::distance_matrix(&region.locations)?;
    let windows = geo::enumerate_windows(&distances, config.max_fraction)?;
    manifest.n_locations = Some(region.n());
    manifest.n_windows = Some(windows.len());

    let mut rows: Vec<CompareRow> = Vec::new();
    let mut first_failure = None;
    for mode in COMPARED_MODES {
        match pipeline::analyze(config, &region, &windows, mode) {
            Ok(analysis) => {
                manifest.modes.push(ModeSummary::completed(&analysis));
                for cluster in pipeline::cluster_rows(&analysis.reports, &region) {
                    rows.push(CompareRow {
                        model: mode.to_string(),
                        cluster,
                    });
                }
            }
            Err(error) => {
                manifest.modes.push(ModeSummary::failed(mode, &error));
                if first_failure.is_none() {
                    first_failure = Some(error);
                }
            }
        }
    }

    write_compare_csv(&config.output.join("compare.csv"), &rows)?;
    manifest.outputs = vec!["compare.csv".into(), "manifest.json".into()];
    Ok(first_failure)
}
