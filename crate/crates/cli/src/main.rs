mod io;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use gammask::deconvolution::{deconvolve, grid_with_points};
use gammask::evaluation::{run_study, Law, StudyConfig};
use gammask::optimizer::select;
use gammask::{BiasConstant, DatasetSummary, GammaNoiseParams, MeasureTable, PrivacyBudget, ShapeGrid};
use serde::Serialize;
use serde_json::json;

use crate::io::{read_column, sibling, write_json, write_table, DataError};

const EXIT_DATA: u8 = 3;
const EXIT_NUMERICAL: u8 = 4;

/// Choose, apply and invert two-sided Gamma noise for masking a numeric column.
#[derive(Debug, Parser)]
#[command(name = "gammask", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Sweep noise shapes, calibrate each to the budget and pick the pair
    /// with the smallest estimation penalty.
    Select(SelectArgs),
    /// Add noise to a column.
    Obfuscate(NoiseArgs),
    /// Estimate the density and CDF of the original data from a masked column.
    Estimate(NoiseArgs),
    /// Plug-in confidentiality level of the data under the given noise.
    Measure(NoiseArgs),
    /// Monte Carlo comparison of no noise, Laplace noise and the selected noise.
    Simulate(SimulateArgs),
}

#[derive(Debug, Clone, Args, Serialize)]
struct Common {
    /// Single-column CSV input.
    #[arg(long)]
    input: Option<PathBuf>,
    #[arg(long)]
    output: PathBuf,
    /// Seed for all randomness; drawn from the OS and recorded when absent.
    #[arg(long)]
    seed: Option<u64>,
    /// Deviation multiplier, in data standard deviations.
    #[arg(long, default_value_t = 0.75)]
    q: f64,
    /// Conditional probability level.
    #[arg(long, default_value_t = 0.9)]
    delta: f64,
    /// Shape grid as start:stop:step.
    #[arg(long, default_value = "0.05:1:0.05")]
    theta_grid: ShapeGrid,
    /// Points in the estimation grid.
    #[arg(long, default_value_t = 201)]
    grid_size: usize,
    #[arg(long, default_value = "paper", value_parser = ["paper", "kernel"])]
    bias_constant: String,
}

#[derive(Debug, Args)]
struct SelectArgs {
    #[command(flatten)]
    common: Common,
}

#[derive(Debug, Args)]
struct NoiseArgs {
    #[command(flatten)]
    common: Common,
    #[arg(long)]
    theta: f64,
    #[arg(long)]
    eta: f64,
}

#[derive(Debug, Args)]
struct SimulateArgs {
    #[command(flatten)]
    common: Common,
    /// One of exponential, normal, laplace, uniform.
    #[arg(long, value_parser = parse_law)]
    distribution: Law,
    #[arg(long, default_value_t = 1000)]
    n: usize,
    #[arg(long, default_value_t = 100)]
    reps: usize,
    /// Select the noise once, from the first replication.
    #[arg(long)]
    fast: bool,
}

fn parse_law(s: &str) -> Result<Law, String> {
    s.parse().map_err(|e: gammask::Error| e.to_string())
}

#[derive(Debug)]
enum Failure {
    Usage(String),
    Data(String),
    Numerical(String),
}

impl From<DataError> for Failure {
    fn from(e: DataError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<gammask::Error> for Failure {
    fn from(e: gammask::Error) -> Self {
        use gammask::Error::*;
        match e {
            InvalidParameter(_) | UnsupportedShape(_) => Failure::Usage(e.to_string()),
            DegenerateData(_) => Failure::Data(e.to_string()),
            _ => Failure::Numerical(e.to_string()),
        }
    }
}

struct Resolved {
    budget: PrivacyBudget,
    bias: BiasConstant,
    seed: u64,
}

impl Common {
    fn resolve(&self) -> Result<Resolved, Failure> {
        let budget = PrivacyBudget::new(self.q, self.delta)?;
        let bias = self.bias_constant.parse::<BiasConstant>()?;
        let seed = self.seed.unwrap_or_else(rand::random);
        if self.grid_size < 2 {
            return Err(Failure::Usage("--grid-size must be at least 2".into()));
        }
        Ok(Resolved { budget, bias, seed })
    }

    fn input(&self) -> Result<&Path, Failure> {
        self.input.as_deref().ok_or_else(|| Failure::Usage("--input is required for this command".into()))
    }
}

/// Metadata every report carries so that a run can be repeated from it.
fn envelope(command: &str, common: &Common, resolved: &Resolved, extra: serde_json::Value) -> serde_json::Value {
    json!({
        "tool": "gammask",
        "version": env!("CARGO_PKG_VERSION"),
        "command": command,
        "seed": resolved.seed,
        "bias_constant": { "name": common.bias_constant, "value": resolved.bias.value() },
        "config": common,
        "parameters": extra,
    })
}

fn params(theta: f64, eta: f64) -> Result<GammaNoiseParams, Failure> {
    Ok(GammaNoiseParams::new(theta, eta)?)
}

fn cmd_select(args: &SelectArgs) -> Result<(), Failure> {
    let c = &args.common;
    let r = c.resolve()?;
    let data = DatasetSummary::new(read_column(c.input()?)?)?;
    let report = select(&data, &r.budget, &c.theta_grid.values(), r.bias)?;
    let rows = report.frontier.iter().map(|p| vec![p.shape, p.calibrated_scale, p.bandwidth, p.objective]);
    write_table(&sibling(&c.output, "frontier.csv"), &["theta", "eta", "bandwidth", "objective"], rows)?;
    let mut doc = envelope("select", c, &r, json!({ "n": data.n() }));
    doc["report"] = serde_json::to_value(&report).map_err(DataError::Json)?;
    write_json(&c.output, &doc)?;
    Ok(())
}

fn cmd_obfuscate(args: &NoiseArgs) -> Result<(), Failure> {
    let c = &args.common;
    let r = c.resolve()?;
    let noise = params(args.theta, args.eta)?;
    let x = read_column(c.input()?)?;
    let y = noise.sample(x.len(), r.seed);
    write_table(&c.output, &[], x.iter().zip(&y).map(|(a, b)| vec![a + b]))?;
    let doc = envelope("obfuscate", c, &r, json!({ "noise": noise, "n": x.len() }));
    write_json(&sibling(&c.output, "json"), &doc)?;
    Ok(())
}

fn cmd_estimate(args: &NoiseArgs) -> Result<(), Failure> {
    let c = &args.common;
    let r = c.resolve()?;
    let noise = params(args.theta, args.eta)?;
    let z = read_column(c.input()?)?;
    let grid = grid_with_points(&z, c.grid_size)?;
    let (est, sel) = deconvolve(&z, &noise, &grid, r.bias)?;
    let rows = (0..est.grid.len()).map(|i| vec![est.grid[i], est.density[i], est.cdf[i]]);
    write_table(&c.output, &["x", "g_hat", "G_hat"], rows)?;
    let doc = envelope(
        "estimate",
        c,
        &r,
        json!({
            "noise": noise,
            "n": z.len(),
            "bandwidth": sel,
            "mass": est.mass,
            "cdf_overshoot": est.cdf_overshoot,
        }),
    );
    write_json(&sibling(&c.output, "json"), &doc)?;
    Ok(())
}

fn cmd_measure(args: &NoiseArgs) -> Result<(), Failure> {
    let c = &args.common;
    let r = c.resolve()?;
    let noise = params(args.theta, args.eta)?;
    let data = DatasetSummary::new(read_column(c.input()?)?)?;
    let table = MeasureTable::new(&data);
    let mu = table.mu(&noise, r.budget.level())?;
    let curve = table.curve(&noise, mu);
    let rows = curve.z_grid.iter().zip(&curve.values).map(|(&z, &m)| vec![z, m]);
    write_table(&c.output, &["z", "m_hat"], rows)?;
    let doc = envelope(
        "measure",
        c,
        &r,
        json!({ "noise": noise, "n": data.n(), "data_sd": data.sd(), "mu_hat": mu, "sup_m_hat": table.sup(&noise, mu) }),
    );
    write_json(&sibling(&c.output, "json"), &doc)?;
    Ok(())
}

fn cmd_simulate(args: &SimulateArgs) -> Result<(), Failure> {
    let c = &args.common;
    let r = c.resolve()?;
    let mut config = StudyConfig::new(args.distribution, args.n, args.reps, r.seed);
    config.budget = r.budget;
    config.shape_grid = c.theta_grid;
    config.bias = r.bias;
    config.reselect_per_replication = !args.fast;
    config.estimate_grid_points = c.grid_size;
    let report = run_study(&config)?;
    let rows = report.trace.iter().map(|t| vec![t.rep as f64, t.sampling_error, t.laplace_error, t.optimal_error, t.theta_star, t.eta_star]);
    write_table(&sibling(&c.output, "trace.csv"), &["rep", "S_e", "L_e", "O_e", "theta_star", "eta_star"], rows)?;
    let mut doc = envelope("simulate", c, &r, json!({ "study": config }));
    doc["report"] = serde_json::to_value(&report).map_err(DataError::Json)?;
    write_json(&c.output, &doc)?;
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Select(a) => cmd_select(a),
        Command::Obfuscate(a) => cmd_obfuscate(a),
        Command::Estimate(a) => cmd_estimate(a),
        Command::Measure(a) => cmd_measure(a),
        Command::Simulate(a) => cmd_simulate(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(2)
        }
        Err(Failure::Data(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_DATA)
        }
        Err(Failure::Numerical(m)) => {
            eprintln!("error: {m}");
            ExitCode::from(EXIT_NUMERICAL)
        }
    }
}
