//! Run configuration: one JSON document; every key can be overridden by a
//! command-line flag of the same name.

use crate::error::CliError;
use funscan::adjust::{AdjustmentMode, BasisKind, BasisSpec, SummaryStat};
use funscan::glm::Family;
use funscan::scan::Sidedness;
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Locations CSV (`id,x,y`).
    pub locations: PathBuf,
    /// Counts CSV (`id,cases,population`).
    pub counts: PathBuf,
    /// Optional scalar-covariate CSV (`id,z1,...,zp`).
    pub covariates: Option<PathBuf>,
    /// Optional long-format longitudinal CSV (`id,t,value`).
    pub series: Option<PathBuf>,
    pub basis_kind: BasisKind,
    pub basis_degree: usize,
    /// Break points, endpoints included (B-spline only).
    pub basis_breaks: usize,
    /// Basis dimension (Fourier only).
    pub basis_dimension: usize,
    /// Defaults to the span of the observed times.
    pub basis_domain: Option<(f64, f64)>,
    pub inertia_cap: f64,
    pub max_fraction: f64,
    pub family: Family,
    /// Monte Carlo replicates M.
    pub mc_replicates: usize,
    /// Significance level for reporting clusters.
    pub level: f64,
    pub seed: u64,
    pub mode: AdjustmentMode,
    pub sidedness: Sidedness,
    /// Summary statistic for univariate mode.
    pub summary: SummaryStat,
    /// Grid size for the fitted-coefficient-function CSV.
    pub theta_grid: usize,
    /// Output directory; created if absent.
    pub output: PathBuf,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            locations: PathBuf::new(),
            counts: PathBuf::new(),
            covariates: None,
            series: None,
            basis_kind: BasisKind::Bspline,
            basis_degree: 3,
            basis_breaks: 13,
            basis_dimension: 11,
            basis_domain: None,
            inertia_cap: 0.95,
            max_fraction: 0.5,
            family: Family::Poisson,
            mc_replicates: 999,
            level: 0.05,
            seed: 0,
            mode: AdjustmentMode::None,
            sidedness: Sidedness::Both,
            summary: SummaryStat::Mean,
            theta_grid: 201,
            output: PathBuf::from("out"),
        }
    }
}

/// Flag-level overrides; `None` keeps the config-file (or default) value.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub locations: Option<PathBuf>,
    pub counts: Option<PathBuf>,
    pub covariates: Option<PathBuf>,
    pub series: Option<PathBuf>,
    pub basis_kind: Option<BasisKind>,
    pub basis_degree: Option<usize>,
    pub basis_breaks: Option<usize>,
    pub basis_dimension: Option<usize>,
    pub basis_domain: Option<(f64, f64)>,
    pub inertia_cap: Option<f64>,
    pub max_fraction: Option<f64>,
    pub family: Option<Family>,
    pub mc_replicates: Option<usize>,
    pub level: Option<f64>,
    pub seed: Option<u64>,
    pub mode: Option<AdjustmentMode>,
    pub sidedness: Option<Sidedness>,
    pub summary: Option<SummaryStat>,
    pub theta_grid: Option<usize>,
    pub output: Option<PathBuf>,
}

/// Which inputs a verb needs; validation is scoped accordingly.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Verb {
    Scan,
    Compare,
    Windows,
}

impl Verb {
    pub fn name(self) -> &'static str {
        match self {
            Verb::Scan => "scan",
            Verb::Compare => "compare",
            Verb::Windows => "windows",
        }
    }
}

impl RunConfig {
    /// Reads the JSON config file, if any, and layers flag overrides on top.
    pub fn load(path: Option<&Path>, overrides: Overrides) -> Result<Self, CliError> {
        let mut config = match path {
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|source| CliError::Io {
                    path: p.to_path_buf(),
                    source,
                })?;
                serde_json::from_str(&text).map_err(|e| CliError::Json {
                    path: p.to_path_buf(),
                    message: e.to_string(),
                })?
            }
            None => RunConfig::default(),
        };
        config.apply(overrides);
        Ok(config)
    }

    fn apply(&mut self, o: Overrides) {
        macro_rules! set {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field { self.$field = Some(v); })*
            };
        }
        macro_rules! put {
            ($($field:ident),*) => {
                $(if let Some(v) = o.$field { self.$field = v; })*
            };
        }
        put!(
            locations,
            counts,
            basis_kind,
            basis_degree,
            basis_breaks,
            basis_dimension,
            inertia_cap,
            max_fraction,
            family,
            mc_replicates,
            level,
            seed,
            mode,
            sidedness,
            summary,
            theta_grid,
            output
        );
        set!(covariates, series, basis_domain);
    }

    pub fn basis_spec(&self) -> BasisSpec {
        BasisSpec {
            kind: self.basis_kind,
            degree: self.basis_degree,
            n_breaks: self.basis_breaks,
            dimension: self.basis_dimension,
            domain: self.basis_domain,
        }
    }

    /// Range and existence checks scoped to what the verb touches.
    pub fn validate(&self, verb: Verb) -> Result<(), CliError> {
        require_file("locations", &self.locations)?;
        if !(self.max_fraction > 0.0 && self.max_fraction <= 0.5) {
            return Err(CliError::Config(format!(
                "max_fraction must lie in (0, 0.5], got {}",
                self.max_fraction
            )));
        }
        if verb == Verb::Windows {
            return Ok(());
        }
        require_file("counts", &self.counts)?;
        if let Some(p) = &self.covariates {
            require_file("covariates", p)?;
        }
        if let Some(p) = &self.series {
            require_file("series", p)?;
        }
        if !(self.inertia_cap > 0.0 && self.inertia_cap <= 1.0) {
            return Err(CliError::Config(format!(
                "inertia_cap must lie in (0, 1], got {}",
                self.inertia_cap
            )));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(CliError::Config(format!(
                "level must lie in (0, 1), got {}",
                self.level
            )));
        }
        if self.mc_replicates == 0 {
            return Err(CliError::Config("mc_replicates must be positive".into()));
        }
        if self.theta_grid < 2 {
            return Err(CliError::Config(format!(
                "theta_grid needs at least 2 points, got {}",
                self.theta_grid
            )));
        }
        match self.basis_kind {
            BasisKind::Bspline => {
                if self.basis_degree == 0 || self.basis_breaks < 2 {
                    return Err(CliError::Config(format!(
                        "B-spline basis needs degree >= 1 and >= 2 break points, \
                         got degree {} with {} breaks",
                        self.basis_degree, self.basis_breaks
                    )));
                }
            }
            BasisKind::Fourier => {
                if self.basis_dimension == 0 {
                    return Err(CliError::Config(
                        "Fourier basis needs a positive dimension".into(),
                    ));
                }
            }
        }
        let needs_series = match verb {
            Verb::Compare => true,
            Verb::Scan => self.mode != AdjustmentMode::None,
            Verb::Windows => false,
        };
        if needs_series && self.series.is_none() {
            return Err(CliError::Config(format!(
                "mode {} needs a longitudinal series file (key `series`)",
                if verb == Verb::Compare {
                    "comparison".to_string()
                } else {
                    self.mode.to_string()
                }
            )));
        }
        Ok(())
    }
}

fn require_file(role: &'static str, path: &Path) -> Result<(), CliError> {
    if path.as_os_str().is_empty() {
        return Err(CliError::Config(format!("no {role} file configured")));
    }
    if !path.is_file() {
        return Err(CliError::MissingInput {
            role,
            path: path.to_path_buf(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_match_documented_values() {
        let c = RunConfig::default();
        assert_eq!(c.inertia_cap, 0.95);
        assert_eq!(c.max_fraction, 0.5);
        assert_eq!(c.family, Family::Poisson);
        assert_eq!(c.mc_replicates, 999);
        assert_eq!(c.level, 0.05);
        assert_eq!(c.mode, AdjustmentMode::None);
        assert_eq!(c.basis_degree, 3);
        assert_eq!(c.basis_breaks, 13);
    }

    #[test]
    fn overrides_win_over_file_values() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"seed": 7, "mc_replicates": 99}"#).unwrap();
        let config = RunConfig::load(
            Some(&path),
            Overrides {
                seed: Some(11),
                ..Overrides::default()
            },
        )
        .unwrap();
        assert_eq!(config.seed, 11);
        assert_eq!(config.mc_replicates, 99);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("config.json");
        std::fs::write(&path, r#"{"sed": 7}"#).unwrap();
        let err = RunConfig::load(Some(&path), Overrides::default()).unwrap_err();
        assert!(matches!(err, CliError::Json { .. }), "{err}");
    }

    #[test]
    fn validation_catches_out_of_range_values() {
        let dir = tempfile::tempdir().unwrap();
        let loc = dir.path().join("loc.csv");
        let counts = dir.path().join("counts.csv");
        std::fs::write(&loc, "id,x,y\na,0,0\nb,1,0\n").unwrap();
        std::fs::write(&counts, "id,cases,population\na,1,10\nb,2,20\n").unwrap();
        let mut config = RunConfig {
            locations: loc,
            counts,
            ..RunConfig::default()
        };
        config.validate(Verb::Scan).unwrap();
        config.max_fraction = 0.6;
        assert!(config.validate(Verb::Scan).is_err());
        config.max_fraction = 0.5;
        config.level = 1.0;
        assert!(config.validate(Verb::Scan).is_err());
        config.level = 0.05;
        config.mode = AdjustmentMode::Functional;
        let err = config.validate(Verb::Scan).unwrap_err();
        assert!(err.to_string().contains("series"), "{err}");
    }
}
