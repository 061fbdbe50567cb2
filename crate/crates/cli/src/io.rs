//! CSV, GeoJSON, and JSON artifacts. All writers format numbers with the
//! shortest round-trip representation, so identical runs produce identical
//! bytes.

use crate::error::CliError;
use funscan::fda::LongitudinalSeries;
use funscan::geo::Location;
use serde::Serialize;
use std::collections::HashSet;
use std::path::Path;

fn open_reader(table: &'static str, path: &Path) -> Result<csv::Reader<std::fs::File>, CliError> {
    csv::ReaderBuilder::new()
        .has_headers(true)
        .from_path(path)
        .map_err(|e| CliError::Row {
            table,
            line: 0,
            message: e.to_string(),
        })
}

fn check_header(
    table: &'static str,
    reader: &mut csv::Reader<std::fs::File>,
    expected: &[&str],
) -> Result<(), CliError> {
    let got = reader
        .headers()
        .map_err(|e| CliError::Row {
            table,
            line: 1,
            message: e.to_string(),
        })?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    if got != expected {
        return Err(CliError::BadHeader {
            table,
            expected: expected.join(","),
            got: got.join(","),
        });
    }
    Ok(())
}

fn parse_field<T: std::str::FromStr>(
    table: &'static str,
    line: u64,
    name: &str,
    raw: &str,
) -> Result<T, CliError> {
    raw.trim().parse().map_err(|_| CliError::Row {
        table,
        line,
        message: format!("cannot parse {name} from {raw:?}"),
    })
}

/// Locations CSV: header `id,x,y`.
pub fn read_locations(path: &Path) -> Result<Vec<Location>, CliError> {
    const TABLE: &str = "locations";
    let mut reader = open_reader(TABLE, path)?;
    check_header(TABLE, &mut reader, &["id", "x", "y"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Row {
            table: TABLE,
            line: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").trim().to_string();
        if id.is_empty() {
            return Err(CliError::Row {
                table: TABLE,
                line,
                message: "empty id".into(),
            });
        }
        if !seen.insert(id.clone()) {
            return Err(CliError::DuplicateId { table: TABLE, id });
        }
        let x = parse_field(TABLE, line, "x", record.get(1).unwrap_or(""))?;
        let y = parse_field(TABLE, line, "y", record.get(2).unwrap_or(""))?;
        out.push(Location::new(id, x, y));
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CountRow {
    pub id: String,
    pub cases: f64,
    pub population: f64,
}

/// Counts CSV: header `id,cases,population`.
pub fn read_counts(path: &Path) -> Result<Vec<CountRow>, CliError> {
    const TABLE: &str = "counts";
    let mut reader = open_reader(TABLE, path)?;
    check_header(TABLE, &mut reader, &["id", "cases", "population"])?;
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Row {
            table: TABLE,
            line: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(CliError::DuplicateId { table: TABLE, id });
        }
        out.push(CountRow {
            id,
            cases: parse_field(TABLE, line, "cases", record.get(1).unwrap_or(""))?,
            population: parse_field(TABLE, line, "population", record.get(2).unwrap_or(""))?,
        });
    }
    Ok(out)
}

#[derive(Debug, Clone)]
pub struct CovariateTable {
    pub names: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

/// Scalar covariates CSV: header `id,<name>,...`; any covariate names.
pub fn read_covariates(path: &Path) -> Result<CovariateTable, CliError> {
    const TABLE: &str = "covariates";
    let mut reader = open_reader(TABLE, path)?;
    let header = reader
        .headers()
        .map_err(|e| CliError::Row {
            table: TABLE,
            line: 1,
            message: e.to_string(),
        })?
        .clone();
    if header.get(0) != Some("id") || header.len() < 2 {
        return Err(CliError::BadHeader {
            table: TABLE,
            expected: "id,z1,...,zp".into(),
            got: header.iter().collect::<Vec<_>>().join(","),
        });
    }
    let names: Vec<String> = header.iter().skip(1).map(str::to_string).collect();
    let mut seen = HashSet::new();
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Row {
            table: TABLE,
            line: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").trim().to_string();
        if !seen.insert(id.clone()) {
            return Err(CliError::DuplicateId { table: TABLE, id });
        }
        let mut values = Vec::with_capacity(names.len());
        for (j, name) in names.iter().enumerate() {
            values.push(parse_field(TABLE, line, name, record.get(j + 1).unwrap_or(""))?);
        }
        rows.push((id, values));
    }
    Ok(CovariateTable { names, rows })
}

/// Long-format longitudinal CSV: header `id,t,value`; one row per
/// observation, grouped by first appearance of each id.
pub fn read_series(path: &Path) -> Result<Vec<LongitudinalSeries>, CliError> {
    const TABLE: &str = "series";
    let mut reader = open_reader(TABLE, path)?;
    check_header(TABLE, &mut reader, &["id", "t", "value"])?;
    let mut order: Vec<String> = Vec::new();
    let mut index: std::collections::HashMap<String, usize> = std::collections::HashMap::new();
    let mut series: Vec<(Vec<f64>, Vec<f64>)> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Row {
            table: TABLE,
            line: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        let id = record.get(0).unwrap_or("").trim().to_string();
        let t = parse_field(TABLE, line, "t", record.get(1).unwrap_or(""))?;
        let value = parse_field(TABLE, line, "value", record.get(2).unwrap_or(""))?;
        let slot = *index.entry(id.clone()).or_insert_with(|| {
            order.push(id);
            series.push((Vec::new(), Vec::new()));
            series.len() - 1
        });
        series[slot].0.push(t);
        series[slot].1.push(value);
    }
    Ok(order
        .into_iter()
        .zip(series)
        .map(|(id, (times, values))| LongitudinalSeries::new(id, times, values))
        .collect())
}

/// One reported cluster with ids resolved, ready for CSV/GeoJSON emission.
#[derive(Debug, Clone, Serialize)]
pub struct ClusterRow {
    pub cluster_rank: usize,
    pub center_id: String,
    pub n_members: usize,
    /// Semicolon-joined member ids.
    pub member_ids: String,
    pub relative_risk: f64,
    pub llr: f64,
    pub p_value: f64,
}

/// Cluster report CSV:
/// `cluster_rank,center_id,n_members,member_ids,relative_risk,llr,p_value`.
pub fn write_clusters_csv(path: &Path, rows: &[ClusterRow]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Row {
        table: "clusters",
        line: 0,
        message: e.to_string(),
    })?;
    writer
        .write_record([
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
                    row.cluster_rank.to_string(),
                    row.center_id.clone(),
                    row.n_members.to_string(),
                    row.member_ids.clone(),
                    format_float(row.relative_risk),
                    format_float(row.llr),
                    format_float(row.p_value),
                ])?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliError::Row {
            table: "clusters",
            line: 0,
            message: e.to_string(),
        })
}

/// Reads back an emitted cluster CSV; used by the comparison verb's
/// round-trip guarantee and by tests.
pub fn read_clusters_csv(path: &Path) -> Result<Vec<ClusterRow>, CliError> {
    const TABLE: &str = "clusters";
    let mut reader = open_reader(TABLE, path)?;
    check_header(
        TABLE,
        &mut reader,
        &[
            "cluster_rank",
            "center_id",
            "n_members",
            "member_ids",
            "relative_risk",
            "llr",
            "p_value",
        ],
    )?;
    let mut out = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Row {
            table: TABLE,
            line: 0,
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        out.push(ClusterRow {
            cluster_rank: parse_field(TABLE, line, "cluster_rank", record.get(0).unwrap_or(""))?,
            center_id: record.get(1).unwrap_or("").to_string(),
            n_members: parse_field(TABLE, line, "n_members", record.get(2).unwrap_or(""))?,
            member_ids: record.get(3).unwrap_or("").to_string(),
            relative_risk: parse_field(TABLE, line, "relative_risk", record.get(4).unwrap_or(""))?,
            llr: parse_field(TABLE, line, "llr", record.get(5).unwrap_or(""))?,
            p_value: parse_field(TABLE, line, "p_value", record.get(6).unwrap_or(""))?,
        });
    }
    Ok(out)
}

/// GeoJSON FeatureCollection: one MultiPoint feature per reported cluster,
/// member ids and test results in `properties`.
pub fn write_geojson(
    path: &Path,
    rows: &[ClusterRow],
    members: &[Vec<usize>],
    locations: &[Location],
) -> Result<(), CliError> {
    let features: Vec<serde_json::Value> = rows
        .iter()
        .zip(members)
        .map(|(row, member_indices)| {
            let coordinates: Vec<[f64; 2]> = member_indices
                .iter()
                .map(|&i| [locations[i].x, locations[i].y])
                .collect();
            let ids: Vec<&str> = member_indices
                .iter()
                .map(|&i| locations[i].id.as_str())
                .collect();
            serde_json::json!({
                "type": "Feature",
                "geometry": { "type": "MultiPoint", "coordinates": coordinates },
                "properties": {
                    "cluster_rank": row.cluster_rank,
                    "center_id": row.center_id,
                    "n_members": row.n_members,
                    "member_ids": ids,
                    "relative_risk": row.relative_risk,
                    "llr": row.llr,
                    "p_value": row.p_value,
                },
            })
        })
        .collect();
    let doc = serde_json::json!({ "type": "FeatureCollection", "features": features });
    write_json(path, &doc)
}

/// Replicate scan statistics: header `replicate,lambda`, 1-based index.
pub fn write_lambdas_csv(path: &Path, lambdas: &[f64]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Row {
        table: "mc_lambdas",
        line: 0,
        message: e.to_string(),
    })?;
    writer
        .write_record(["replicate", "lambda"])
        .and_then(|()| {
            for (m, &lambda) in lambdas.iter().enumerate() {
                writer.write_record([(m + 1).to_string(), format_float(lambda)])?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliError::Row {
            table: "mc_lambdas",
            line: 0,
            message: e.to_string(),
        })
}

/// Fitted coefficient function on a grid: header `t,theta`.
pub fn write_theta_csv(path: &Path, curve: &[(f64, f64)]) -> Result<(), CliError> {
    let mut writer = csv::Writer::from_path(path).map_err(|e| CliError::Row {
        table: "theta",
        line: 0,
        message: e.to_string(),
    })?;
    writer
        .write_record(["t", "theta"])
        .and_then(|()| {
            for &(t, value) in curve {
                writer.write_record([format_float(t), format_float(value)])?;
            }
            writer.flush().map_err(csv::Error::from)
        })
        .map_err(|e| CliError::Row {
            table: "theta",
            line: 0,
            message: e.to_string(),
        })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Json {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    text.push('\n');
    std::fs::write(path, text).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Shortest representation that round-trips; integers keep a trailing `.0`
/// so the column stays visibly numeric.
pub fn format_float(v: f64) -> String {
    if v.is_finite() && v == v.trunc() && v.abs() < 1e15 {
        format!("{v:.1}")
    } else {
        format!("{v}")
    }
}
