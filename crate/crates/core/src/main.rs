use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use so3_frechet::harness::{self, selftest, RunConfig};
use so3_frechet::predictor::VariantFlag;
use so3_frechet::Result;

#[derive(Parser)]
#[command(name = "so3-frechet", version, about = "Fréchet mean prediction for diffusions on SO(3)")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate the SDE ensemble and write one CSV per time slice.
    Simulate(RunArgs),
    /// Integrate the mean/covariance ODE and write prediction.csv.
    Predict(RunArgs),
    /// Run both sides and write report.json.
    Compare {
        #[command(flatten)]
        run: RunArgs,
        /// Also write and compare every time slice.
        #[arg(long)]
        all_slices: bool,
    },
    /// Render figure.svg from the outputs of `compare`.
    Figure(RunArgs),
    /// Run the built-in invariant checks.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// JSON run configuration; defaults are used for missing keys.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Overrides the configured seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the configured covariance law.
    #[arg(long, value_parser = parse_variant)]
    variant: Option<VariantFlag>,
}

fn parse_variant(s: &str) -> std::result::Result<VariantFlag, String> {
    s.parse().map_err(|e: so3_frechet::Error| e.to_string())
}

impl RunArgs {
    fn resolve(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => RunConfig::load(path)?,
            None => RunConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(variant) = self.variant {
            cfg.variant = variant;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Simulate(args) => {
            let s = harness::cmd_simulate(&args.resolve()?, &args.out)?;
            println!("wrote {} slices of {} paths ({} stopped)", s.slices, s.paths, s.stopped_paths);
        }
        Command::Predict(args) => {
            let traj = harness::cmd_predict(&args.resolve()?, &args.out)?;
            println!("wrote {} states to {}", traj.len(), args.out.join("prediction.csv").display());
        }
        Command::Compare { run, all_slices } => {
            let r = harness::cmd_compare(&run.resolve()?, &run.out, all_slices)?;
            println!("mean distance      {:.6e}", r.mean_distance);
            println!("cov relative error {:.6e}", r.cov_rel_error);
            println!("stopped paths      {}", r.stopped_paths);
            println!("frechet iterations {}", r.frechet_iterations);
        }
        Command::Figure(args) => {
            let path = harness::cmd_figure(&args.resolve()?, &args.out)?;
            println!("wrote {}", path.display());
        }
        Command::Selftest => {
            let report = selftest::run();
            println!("{report}");
            return Ok(report.all_passed());
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(2) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(3),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
