//! Joined study data: all input tables aligned to the locations-file order.

use crate::config::RunConfig;
use crate::error::CliError;
use crate::io;
use funscan::fda::LongitudinalSeries;
use funscan::geo::Location;
use ndarray::{Array1, Array2};
use std::collections::HashMap;

#[derive(Debug, Clone)]
pub struct StudyRegion {
    pub locations: Vec<Location>,
    pub y: Array1<f64>,
    pub populations: Array1<f64>,
    pub covariates: Option<Array2<f64>>,
    pub covariate_names: Vec<String>,
    /// One series per location, in location order.
    pub series: Option<Vec<LongitudinalSeries>>,
}

impl StudyRegion {
    pub fn n(&self) -> usize {
        self.locations.len()
    }

    /// Observations per location, in location order (functional modes need
    /// these to exceed the basis dimension).
    pub fn series_lengths(&self) -> Option<Vec<(String, usize)>> {
        self.series.as_ref().map(|series| {
            series
                .iter()
                .map(|s| (s.id.clone(), s.times.len()))
                .collect()
        })
    }
}

fn index_by_id(locations: &[Location]) -> HashMap<&str, usize> {
    locations
        .iter()
        .enumerate()
        .map(|(i, l)| (l.id.as_str(), i))
        .collect()
}

/// Aligns rows of `table` to the location order; every location must appear
/// exactly once and no foreign ids are allowed.
fn align<T>(
    table: &'static str,
    locations: &[Location],
    rows: Vec<(String, T)>,
) -> Result<Vec<T>, CliError> {
    let index = index_by_id(locations);
    let mut slots: Vec<Option<T>> = (0..locations.len()).map(|_| None).collect();
    let mut unknown = Vec::new();
    for (id, value) in rows {
        match index.get(id.as_str()) {
            Some(&i) => {
                if slots[i].is_some() {
                    return Err(CliError::DuplicateId { table, id });
                }
                slots[i] = Some(value);
            }
            None => unknown.push(id),
        }
    }
    if !unknown.is_empty() {
        return Err(CliError::UnknownIds { table, ids: unknown });
    }
    let missing: Vec<String> = slots
        .iter()
        .zip(locations)
        .filter_map(|(slot, l)| slot.is_none().then(|| l.id.clone()))
        .collect();
    if !missing.is_empty() {
        return Err(CliError::MissingIds { table, ids: missing });
    }
    Ok(slots.into_iter().map(|s| s.unwrap()).collect())
}

/// Reads every configured table and joins them on location id.
pub fn ingest(config: &RunConfig) -> Result<StudyRegion, CliError> {
    let locations = io::read_locations(&config.locations)?;
    let counts = io::read_counts(&config.counts)?;
    let count_rows: Vec<(String, (f64, f64))> = counts
        .into_iter()
        .map(|row| (row.id, (row.cases, row.population)))
        .collect();
    let aligned = align("counts", &locations, count_rows)?;
    let y = Array1::from_iter(aligned.iter().map(|&(cases, _)| cases));
    let populations = Array1::from_iter(aligned.iter().map(|&(_, population)| population));

    let (covariates, covariate_names) = match &config.covariates {
        Some(path) => {
            let table = io::read_covariates(path)?;
            let names = table.names.clone();
            let p = names.len();
            let rows = align("covariates", &locations, table.rows)?;
            let z = Array2::from_shape_fn((locations.len(), p), |(i, j)| rows[i][j]);
            (Some(z), names)
        }
        None => (None, Vec::new()),
    };

    let series = match &config.series {
        Some(path) => {
            let raw = io::read_series(path)?;
            let rows: Vec<(String, LongitudinalSeries)> =
                raw.into_iter().map(|s| (s.id.clone(), s)).collect();
            Some(align("series", &locations, rows)?)
        }
        None => None,
    };

    Ok(StudyRegion {
        locations,
        y,
        populations,
        covariates,
        covariate_names,
        series,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::path::PathBuf;

    fn write(dir: &std::path::Path, name: &str, text: &str) -> PathBuf {
        let path = dir.join(name);
        std::fs::write(&path, text).unwrap();
        path
    }

    fn toy_config(dir: &std::path::Path) -> RunConfig {
        RunConfig {
            locations: write(dir, "loc.csv", "id,x,y\na,0,0\nb,1,0\nc,0,1\n"),
            counts: write(
                dir,
                "counts.csv",
                "id,cases,population\nb,2,200\na,1,100\nc,3,300\n",
            ),
            ..RunConfig::default()
        }
    }

    #[test]
    fn three_location_fixture_joins_on_id() {
        let dir = tempfile::tempdir().unwrap();
        let config = toy_config(dir.path());
        let region = ingest(&config).unwrap();
        assert_eq!(region.n(), 3);
        // counts arrive in file order b,a,c but align to locations order a,b,c
        assert_eq!(region.y.as_slice().unwrap(), &[1.0, 2.0, 3.0]);
        assert_eq!(region.populations[2], 300.0);
        assert!(region.series.is_none());
    }

    #[test]
    fn missing_count_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path());
        config.counts = write(
            dir.path(),
            "counts2.csv",
            "id,cases,population\na,1,100\nc,3,300\n",
        );
        let err = ingest(&config).unwrap_err();
        match err {
            CliError::MissingIds { table, ids } => {
                assert_eq!(table, "counts");
                assert_eq!(ids, vec!["b".to_string()]);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn foreign_series_id_is_named() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path());
        config.series = Some(write(
            dir.path(),
            "series.csv",
            "id,t,value\na,0,1\nb,0,1\nc,0,1\nzz,0,9\n",
        ));
        let err = ingest(&config).unwrap_err();
        match err {
            CliError::UnknownIds { table, ids } => {
                assert_eq!(table, "series");
                assert_eq!(ids, vec!["zz".to_string()]);
            }
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn series_align_to_location_order() {
        let dir = tempfile::tempdir().unwrap();
        let mut config = toy_config(dir.path());
        config.series = Some(write(
            dir.path(),
            "series.csv",
            "id,t,value\nc,0,30\nc,1,31\na,0,10\nb,0,20\na,1,11\nb,1,21\n",
        ));
        let region = ingest(&config).unwrap();
        let series = region.series.unwrap();
        assert_eq!(series[0].id, "a");
        assert_eq!(series[2].values, vec![30.0, 31.0]);
        assert_eq!(
            region.covariate_names,
            Vec::<String>::new()
        );
    }
}
