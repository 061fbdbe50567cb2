//! The `simulate` verb: the power-study harness on the bundled geometry.

use crate::error::CliError;
use crate::pipeline::Manifest;
use funscan::adjust::AdjustmentMode;
use funscan::sim::{self, SimulationConfig};
use std::path::{Path, PathBuf};

/// Flag-level knobs; everything else comes from the scale preset or the
/// JSON config file.
#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub config: Option<PathBuf>,
    /// Start from the full-scale preset (1000 replicates, M = 999) instead
    /// of the desk-scale one (200 replicates, M = 99).
    pub full_scale: bool,
    pub seed: Option<u64>,
    pub replicates: Option<usize>,
    pub mc_replicates: Option<usize>,
    pub relative_risks: Option<Vec<f64>>,
    pub modes: Option<Vec<AdjustmentMode>>,
    pub level: Option<f64>,
    pub noise_sd: Option<f64>,
    pub output: PathBuf,
}

/// Deep-merges `patch` onto `base`: objects merge key-wise, everything else
/// replaces. Lets a config file override any subset of study keys.
fn merge(base: &mut serde_json::Value, patch: serde_json::Value) {
    match (base, patch) {
        (serde_json::Value::Object(b), serde_json::Value::Object(p)) => {
            for (key, value) in p {
                match b.get_mut(&key) {
                    Some(slot) => merge(slot, value),
                    None => {
                        b.insert(key, value);
                    }
                }
            }
        }
        (slot, value) => *slot = value,
    }
}

/// Builds the effective study configuration: preset, then config file, then
/// flags.
pub fn effective_config(options: &SimulateOptions) -> Result<SimulationConfig, CliError> {
    let base = if options.full_scale {
        SimulationConfig::full_scale()
    } else {
        SimulationConfig::desk_scale()
    };
    let mut value = serde_json::to_value(&base).expect("config serializes");
    if let Some(path) = &options.config {
        let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
            path: path.clone(),
            source,
        })?;
        let patch: serde_json::Value =
            serde_json::from_str(&text).map_err(|e| CliError::Json {
                path: path.clone(),
                message: e.to_string(),
            })?;
        merge(&mut value, patch);
    }
    let mut config: SimulationConfig =
        serde_json::from_value(value).map_err(|e| CliError::Json {
            path: options.config.clone().unwrap_or_default(),
            message: e.to_string(),
        })?;
    if let Some(seed) = options.seed {
        config.seed = seed;
    }
    if let Some(replicates) = options.replicates {
        config.replicates = replicates;
    }
    if let Some(mc) = options.mc_replicates {
        config.mc_replicates = mc;
    }
    if let Some(rr) = &options.relative_risks {
        config.relative_risks = rr.clone();
    }
    if let Some(modes) = &options.modes {
        config.modes = modes.clone();
    }
    if let Some(level) = options.level {
        config.level = level;
    }
    if let Some(noise) = options.noise_sd {
        config.noise_sd = noise;
    }
    Ok(config)
}

pub fn execute_simulate(options: &SimulateOptions) -> Result<(), CliError> {
    std::fs::create_dir_all(&options.output).map_err(|source| CliError::Io {
        path: options.output.clone(),
        source,
    })?;
    let config = match effective_config(options) {
        Ok(config) => config,
        Err(error) => {
            // no effective config to echo; record the failure and bail
            let manifest = Manifest::new("simulate", &serde_json::Value::Null);
            manifest.write(&options.output)?;
            crate::pipeline::write_error(&options.output, &error)?;
            return Err(error);
        }
    };
    let mut manifest = Manifest::new("simulate", &config);
    match simulate_inner(&config, &options.output, &mut manifest) {
        Ok(()) => {
            manifest.ok = true;
            manifest.write(&options.output)
        }
        Err(error) => {
            manifest.write(&options.output)?;
            crate::pipeline::write_error(&options.output, &error)?;
            Err(error)
        }
    }
}

fn simulate_inner(
    config: &SimulationConfig,
    output: &Path,
    manifest: &mut Manifest,
) -> Result<(), CliError> {
    let result = sim::run_study(config)?;
    sim::write_power_curves(&output.join("power_curves.csv"), &result.metrics)?;
    sim::write_replicate_details(&output.join("replicate_details.csv"), &result.replicates)?;
    manifest.study_failures = Some(result.failures);
    manifest.outputs = vec![
        "power_curves.csv".into(),
        "replicate_details.csv".into(),
        "manifest.json".into(),
    ];
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_and_overrides_compose() {
        let options = SimulateOptions {
            seed: Some(5),
            replicates: Some(3),
            relative_risks: Some(vec![1.0, 2.0]),
            modes: Some(vec![AdjustmentMode::Univariate]),
            output: PathBuf::from("unused"),
            ..SimulateOptions::default()
        };
        let config = effective_config(&options).unwrap();
        assert_eq!(config.seed, 5);
        assert_eq!(config.replicates, 3);
        assert_eq!(config.mc_replicates, 99, "desk preset keeps M = 99");
        assert_eq!(config.relative_risks, vec![1.0, 2.0]);
        assert_eq!(config.modes, vec![AdjustmentMode::Univariate]);
    }

    #[test]
    fn config_file_overrides_preset_and_flags_win() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("study.json");
        std::fs::write(&path, r#"{"replicates": 7, "noise_sd": 0.5}"#).unwrap();
        let options = SimulateOptions {
            config: Some(path),
            replicates: Some(9),
            output: PathBuf::from("unused"),
            ..SimulateOptions::default()
        };
        let config = effective_config(&options).unwrap();
        assert_eq!(config.replicates, 9, "flag beats file");
        assert_eq!(config.noise_sd, 0.5, "file beats preset");
        assert_eq!(config.n_times, 70, "preset fills the rest");
    }

    #[test]
    fn full_scale_preset() {
        let options = SimulateOptions {
            full_scale: true,
            output: PathBuf::from("unused"),
            ..SimulateOptions::default()
        };
        let config = effective_config(&options).unwrap();
        assert_eq!(config.replicates, 1000);
        assert_eq!(config.mc_replicates, 999);
    }
}
