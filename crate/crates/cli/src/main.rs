use clap::{Args, Parser, Subcommand};
use funscan::adjust::{AdjustmentMode, BasisKind, SummaryStat};
use funscan::glm::Family;
use funscan::scan::Sidedness;
use funscan_cli::config::{Overrides, RunConfig, Verb};
use funscan_cli::simulate::SimulateOptions;
use funscan_cli::{compare, pipeline, simulate};
use std::path::PathBuf;
use std::str::FromStr;

#[derive(Parser)]
#[command(
    name = "funscan",
    version,
    about = "Spatial cluster detection in count data, adjusted for scalar and longitudinal covariates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one scan analysis and write the report files
    Scan(ScanArgs),
    /// Run all four adjustment modes on identical data and seed
    Compare(ScanArgs),
    /// Run the power-study harness on the bundled geometry
    Simulate(SimulateArgs),
    /// Dump the enumerated spatial windows
    Windows(ScanArgs),
}

/// Flags mirror the JSON config keys; any flag overrides the file value.
#[derive(Args)]
struct ScanArgs {
    /// JSON configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Locations CSV (id,x,y)
    #[arg(long)]
    locations: Option<PathBuf>,
    /// Counts CSV (id,cases,population)
    #[arg(long)]
    counts: Option<PathBuf>,
    /// Scalar covariates CSV (id,z1,...,zp)
    #[arg(long)]
    covariates: Option<PathBuf>,
    /// Long-format longitudinal CSV (id,t,value)
    #[arg(long)]
    series: Option<PathBuf>,
    /// bspline or fourier
    #[arg(long, value_parser = BasisKind::from_str)]
    basis_kind: Option<BasisKind>,
    #[arg(long)]
    basis_degree: Option<usize>,
    #[arg(long)]
    basis_breaks: Option<usize>,
    #[arg(long)]
    basis_dimension: Option<usize>,
    /// Two numbers: domain low and high
    #[arg(long, num_args = 2, value_names = ["LO", "HI"])]
    basis_domain: Option<Vec<f64>>,
    #[arg(long)]
    inertia_cap: Option<f64>,
    #[arg(long)]
    max_fraction: Option<f64>,
    /// poisson, bernoulli, or gaussian
    #[arg(long, value_parser = Family::from_str)]
    family: Option<Family>,
    /// Monte Carlo replicates M
    #[arg(long)]
    mc_replicates: Option<usize>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    /// none, univariate, multivariate, or functional
    #[arg(long, value_parser = AdjustmentMode::from_str)]
    mode: Option<AdjustmentMode>,
    /// both, high, or low
    #[arg(long, value_parser = Sidedness::from_str)]
    sidedness: Option<Sidedness>,
    /// mean or median (univariate mode)
    #[arg(long, value_parser = SummaryStat::from_str)]
    summary: Option<SummaryStat>,
    /// Points in the emitted coefficient-function grid
    #[arg(long)]
    theta_grid: Option<usize>,
    /// Output directory
    #[arg(long)]
    output: Option<PathBuf>,
}

impl ScanArgs {
    /// Builds the effective configuration and hands it to the verb's
    /// executor; a config that fails to load or validate still leaves a
    /// manifest and error.json in the best-known output directory.
    fn run(
        self,
        verb: Verb,
        exec: impl FnOnce(&RunConfig) -> Result<(), funscan_cli::CliError>,
    ) -> Result<(), funscan_cli::CliError> {
        let fallback_output = self.output.clone().unwrap_or_else(|| PathBuf::from("out"));
        let config = match self.into_config(verb) {
            Ok(config) => config,
            Err((echo, error)) => {
                let dir = echo
                    .as_ref()
                    .map_or(fallback_output, |config| config.output.clone());
                let echo = serde_json::to_value(&echo).expect("config serializes");
                pipeline::write_config_failure(&dir, verb.name(), &echo, &error)?;
                return Err(error);
            }
        };
        exec(&config)
    }

    fn into_config(
        self,
        verb: Verb,
    ) -> Result<RunConfig, (Option<RunConfig>, funscan_cli::CliError)> {
        let overrides = Overrides {
            locations: self.locations,
            counts: self.counts,
            covariates: self.covariates,
            series: self.series,
            basis_kind: self.basis_kind,
            basis_degree: self.basis_degree,
            basis_breaks: self.basis_breaks,
            basis_dimension: self.basis_dimension,
            basis_domain: self.basis_domain.map(|v| (v[0], v[1])),
            inertia_cap: self.inertia_cap,
            max_fraction: self.max_fraction,
            family: self.family,
            mc_replicates: self.mc_replicates,
            level: self.level,
            seed: self.seed,
            mode: self.mode,
            sidedness: self.sidedness,
            summary: self.summary,
            theta_grid: self.theta_grid,
            output: self.output,
        };
        let config = match RunConfig::load(self.config.as_deref(), overrides) {
            Ok(config) => config,
            Err(error) => return Err((None, error)),
        };
        if let Err(error) = config.validate(verb) {
            return Err((Some(config), error));
        }
        Ok(config)
    }
}

#[derive(Args)]
struct SimulateArgs {
    /// JSON study configuration; any subset of keys
    #[arg(long)]
    config: Option<PathBuf>,
    /// Full-scale preset: 1000 replicates, M = 999
    #[arg(long)]
    full_scale: bool,
    #[arg(long)]
    seed: Option<u64>,
    /// Datasets per relative-risk grid point
    #[arg(long)]
    replicates: Option<usize>,
    /// Monte Carlo replicates M per dataset
    #[arg(long)]
    mc_replicates: Option<usize>,
    /// Comma-separated exp(delta) grid
    #[arg(long, value_delimiter = ',')]
    relative_risks: Option<Vec<f64>>,
    /// Comma-separated adjustment modes
    #[arg(long, value_delimiter = ',', value_parser = AdjustmentMode::from_str)]
    modes: Option<Vec<AdjustmentMode>>,
    #[arg(long)]
    level: Option<f64>,
    #[arg(long)]
    noise_sd: Option<f64>,
    /// Output directory
    #[arg(long, default_value = "out")]
    output: PathBuf,
}

fn run() -> Result<(), funscan_cli::CliError> {
    match Cli::parse().command {
        Command::Scan(args) => args.run(Verb::Scan, pipeline::execute_scan),
        Command::Compare(args) => args.run(Verb::Compare, compare::execute_compare),
        Command::Windows(args) => args.run(Verb::Windows, pipeline::execute_windows),
        Command::Simulate(args) => {
            let options = SimulateOptions {
                config: args.config,
                full_scale: args.full_scale,
                seed: args.seed,
                replicates: args.replicates,
                mc_replicates: args.mc_replicates,
                relative_risks: args.relative_risks,
                modes: args.modes,
                level: args.level,
                noise_sd: args.noise_sd,
                output: args.output,
            };
            simulate::execute_simulate(&options)
        }
    }
}

fn main() {
    if let Err(error) = run() {
        eprintln!("error: {error}");
        std::process::exit(1);
    }
}
