use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::str::FromStr;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use impedance_cli::{commands, CliError, FileConfig};

/// Antenna impedance estimation in correlated Rayleigh fading: Monte Carlo
/// sweeps, Cramér-Rao bound tables and single-trial diagnostics.
#[derive(Debug, Parser)]
#[command(name = "impedance", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Relative RMSE of the ML and MM estimators against the CRB, per SNR.
    Sweep(RunArgs),
    /// Fisher information and relative CRB of F, per SNR.
    Crb(RunArgs),
    /// Run and print a single seeded trial.
    Trial {
        #[command(flatten)]
        run: RunArgs,
        /// Index into `snr_db`.
        #[arg(long, default_value_t = 0)]
        snr_index: usize,
        #[arg(long, default_value_t = 0)]
        trial_index: usize,
    },
}

#[derive(Debug, Args)]
struct RunArgs {
    /// TOML experiment description.
    #[arg(long)]
    config: PathBuf,
    /// Output file; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override a config key, e.g. `--set packets=5`. Repeatable; last wins.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Worker threads, or `auto` for all available cores.
    #[arg(long, default_value = "auto")]
    threads: Threads,
    /// Master seed, overriding the config.
    #[arg(long)]
    seed: Option<u64>,
    /// Disable receiver noise.
    #[arg(long)]
    zero_noise: bool,
    /// Print the effective configuration and exit.
    #[arg(long)]
    dump_config: bool,
    /// Progress and timing on standard error.
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

#[derive(Debug, Clone, Copy)]
struct Threads(Option<usize>);

impl FromStr for Threads {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "auto" {
            return Ok(Threads(None));
        }
        match s.parse::<usize>() {
            Ok(n) if n > 0 => Ok(Threads(Some(n))),
            _ => Err(format!("expected a positive thread count or `auto`, got `{s}`")),
        }
    }
}

impl RunArgs {
    fn load(&self, section: &str) -> Result<FileConfig, CliError> {
        let mut sets = self.sets.clone();
        if let Some(seed) = self.seed {
            sets.push(format!("seed={seed}"));
        }
        if self.zero_noise {
            sets.push("zero_noise=true".into());
        }
        FileConfig::from_path(&self.config, section, &sets)
    }
}

fn write_output(path: Option<&Path>, text: &str) -> Result<(), CliError> {
    match path {
        Some(p) => std::fs::write(p, text).map_err(|e| CliError::Io(format!("cannot write {}: {e}", p.display()))),
        None => std::io::stdout()
            .lock()
            .write_all(text.as_bytes())
            .map_err(|e| CliError::Io(format!("cannot write to stdout: {e}"))),
    }
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (section, args) = match &cli.command {
        Command::Sweep(a) => ("sweep", a),
        Command::Crb(a) => ("crb", a),
        Command::Trial { run, .. } => ("trial", run),
    };
    let file = args.load(section)?;
    if args.dump_config {
        return write_output(args.out.as_deref(), &file.dump());
    }
    let cfg = file.experiment()?;
    if args.verbose > 0 {
        eprintln!(
            "{section}: N={} K={} L={} fading={:?} F={} trials={} seed={} snr_db={:?}",
            cfg.antennas, cfg.symbols, cfg.packets, cfg.fading, cfg.f_true, cfg.trials, cfg.master_seed, cfg.snr_db
        );
    }
    let start = Instant::now();
    let text = match &cli.command {
        Command::Sweep(_) => {
            let (text, result) = commands::sweep(&cfg, args.threads.0)?;
            for p in result.points.iter().filter(|p| p.failed_count > 0) {
                eprintln!(
                    "warning: {} of {} trials failed at {} dB and were skipped",
                    p.failed_count, p.trials, p.snr_db
                );
            }
            text
        }
        Command::Crb(_) => commands::crb(&cfg)?,
        Command::Trial {
            snr_index, trial_index, ..
        } => commands::trial(&cfg, *snr_index, *trial_index)?,
    };
    if args.verbose > 0 {
        eprintln!("{section}: done in {:.2?}", start.elapsed());
    }
    write_output(args.out.as_deref(), &text)
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("impedance: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
