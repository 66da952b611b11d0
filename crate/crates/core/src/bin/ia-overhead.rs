use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Context;
use clap::{Args, Parser, Subcommand};
use ia_overhead::experiment::{
    run_sweep, run_validate, ExperimentSpec, Formulas, GridScale, SweepKind,
};

#[derive(Parser)]
#[command(
    name = "ia-overhead",
    version,
    about = "Interference alignment overhead sweeps and self-checks"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a parameter sweep and write CSV.
    Sweep(Overrides),
    /// Run the Monte Carlo and closed-form self-checks; exits 1 on failure.
    Validate(Overrides),
}

#[derive(Args)]
struct Overrides {
    /// TOML experiment file; flags below override its values.
    #[arg(short, long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    kind: Option<SweepKind>,
    #[arg(long)]
    min: Option<f64>,
    #[arg(long)]
    max: Option<f64>,
    #[arg(long)]
    points: Option<usize>,
    #[arg(long, value_enum)]
    scale: Option<GridScale>,
    #[arg(long)]
    users: Option<usize>,
    #[arg(long)]
    tx_antennas: Option<usize>,
    #[arg(long)]
    rx_antennas: Option<usize>,
    #[arg(long)]
    streams: Option<usize>,
    /// Per-stream SNR in dB.
    #[arg(long)]
    snr_db: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    doppler: Option<f64>,
    #[arg(long)]
    max_users: Option<usize>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
    /// Trials for the direct-gain checks (validate only).
    #[arg(long)]
    gain_trials: Option<u64>,
    /// Trials for the CSI error checks (validate only).
    #[arg(long)]
    csi_trials: Option<u64>,
    /// Random channel draws for the alignment check (validate only).
    #[arg(long)]
    ia_draws: Option<u64>,
}

macro_rules! apply {
    ($target:expr, $value:expr) => {
        if let Some(v) = $value {
            $target = v;
        }
    };
}

impl Overrides {
    fn spec(self) -> anyhow::Result<ExperimentSpec> {
        let mut spec = match &self.config {
            Some(path) => {
                let text = fs::read_to_string(path)
                    .with_context(|| format!("reading {}", path.display()))?;
                ExperimentSpec::from_toml(&text)?
            }
            None => ExperimentSpec::default(),
        };
        apply!(spec.kind, self.kind);
        apply!(spec.grid.min, self.min);
        apply!(spec.grid.max, self.max);
        apply!(spec.grid.points, self.points);
        apply!(spec.grid.scale, self.scale);
        apply!(spec.network.users, self.users);
        apply!(spec.network.tx_antennas, self.tx_antennas);
        apply!(spec.network.rx_antennas, self.rx_antennas);
        apply!(spec.network.streams, self.streams);
        apply!(spec.link.snr_db, self.snr_db);
        apply!(spec.link.gamma, self.gamma);
        apply!(spec.link.doppler, self.doppler);
        apply!(spec.max_users, self.max_users);
        apply!(spec.trials, self.trials);
        apply!(spec.seed, self.seed);
        apply!(spec.validate.gain_trials, self.gain_trials);
        apply!(spec.validate.csi_trials, self.csi_trials);
        apply!(spec.validate.ia_draws, self.ia_draws);
        if self.output.is_some() {
            spec.output = self.output;
        }
        Ok(spec)
    }
}

fn emit(spec: &ExperimentSpec, text: &str) -> anyhow::Result<()> {
    match &spec.output {
        Some(path) => fs::write(path, text).with_context(|| format!("writing {}", path.display())),
        None => {
            print!("{text}");
            Ok(())
        }
    }
}

fn run() -> anyhow::Result<ExitCode> {
    match Cli::parse().command {
        Command::Sweep(o) => {
            let spec = o.spec()?;
            if spec.kind == SweepKind::Validate {
                anyhow::bail!("kind = validate: use the validate subcommand");
            }
            let table = run_sweep(&spec)?;
            emit(&spec, &table.to_csv(&spec))?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Validate(o) => {
            let mut spec = o.spec()?;
            spec.kind = SweepKind::Validate;
            let report = run_validate(&spec, &spec.validate, &Formulas::default())?;
            for r in &report.outcomes {
                eprintln!(
                    "{} {}: {}",
                    if r.passed { "PASS" } else { "FAIL" },
                    r.check,
                    r.detail
                );
            }
            emit(&spec, &report.to_csv())?;
            Ok(if report.passed() {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
    }
}

fn main() -> ExitCode {
    match run() {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
