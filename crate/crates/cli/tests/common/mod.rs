//! Shared fixture generation: synthetic study files produced by the
//! simulation module's generator on the bundled geometry.

use funscan::sim::{self, SimulationConfig};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeSet;
use std::path::{Path, PathBuf};
use std::process::Command;

pub struct Fixture {
    pub locations: PathBuf,
    pub counts: PathBuf,
    pub series: PathBuf,
    /// Ids of the planted intensity-driven cluster.
    #[allow(dead_code)] // read by some test targets only
    pub true_ids: BTreeSet<String>,
    /// Ids of the planted covariate-driven cluster.
    #[allow(dead_code)]
    pub fake_ids: BTreeSet<String>,
}

/// Writes locations/counts/series CSVs for one simulated dataset.
/// `scale = 0.0` switches the longitudinal effect off (counts independent
/// of the curves); `sim::effect_scale()` gives the calibrated confounder.
pub fn write_fixture(
    dir: &Path,
    exp_delta: f64,
    scale: f64,
    n_times: usize,
    seed: u64,
) -> Fixture {
    let mut config = SimulationConfig::desk_scale();
    config.n_times = n_times;
    let geometry = sim::bundled_geometry();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = sim::generate_dataset(&config, &geometry, exp_delta, scale, &mut rng);

    let locations = dir.join("locations.csv");
    let mut text = String::from("id,x,y\n");
    for l in &geometry.locations {
        text.push_str(&format!("{},{},{}\n", l.id, l.x, l.y));
    }
    std::fs::write(&locations, text).unwrap();

    let counts = dir.join("counts.csv");
    let mut text = String::from("id,cases,population\n");
    for (i, l) in geometry.locations.iter().enumerate() {
        text.push_str(&format!(
            "{},{},{}\n",
            l.id, data.y[i] as u64, geometry.populations[i]
        ));
    }
    std::fs::write(&counts, text).unwrap();

    let series = dir.join("series.csv");
    let mut text = String::from("id,t,value\n");
    for s in &data.series {
        for (&t, &v) in s.times.iter().zip(&s.values) {
            text.push_str(&format!("{},{},{}\n", s.id, t, v));
        }
    }
    std::fs::write(&series, text).unwrap();

    let ids = |cluster: &[usize]| {
        cluster
            .iter()
            .map(|&i| geometry.locations[i].id.clone())
            .collect::<BTreeSet<String>>()
    };
    Fixture {
        locations,
        counts,
        series,
        true_ids: ids(&config.true_cluster),
        fake_ids: ids(&config.fake_cluster),
    }
}

pub fn funscan() -> Command {
    Command::new(env!("CARGO_BIN_EXE_funscan"))
}

pub fn read_json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}
