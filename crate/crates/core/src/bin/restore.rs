use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use framerestore::experiment::{
    emit_report, format_table, lambda_sweep, run_experiment, ExperimentConfig,
};
use framerestore::image::{psnr, shepp_logan, PsnrMode};
use framerestore::pgm;

#[derive(Parser)]
#[command(
    name = "restore",
    version,
    about = "Frame-based sparse image restoration"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's output directory.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the configured method over a grid of regularization weights.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        lambda: Vec<f64>,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Peak signal-to-noise ratio of an image against a reference.
    Psnr {
        image: PathBuf,
        reference: PathBuf,
        #[arg(long, value_enum, default_value = "peak255")]
        mode: Mode,
    },
    /// Write a Shepp-Logan phantom as a 16-bit PGM.
    Phantom {
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Mode {
    Ct,
    Gray255,
    Peak255,
}

impl From<Mode> for PsnrMode {
    fn from(m: Mode) -> Self {
        match m {
            Mode::Ct => PsnrMode::Ct,
            Mode::Gray255 => PsnrMode::Gray255,
            Mode::Peak255 => PsnrMode::Peak255,
        }
    }
}

enum Outcome {
    Done,
    NotConverged,
}

fn load_config(path: &PathBuf, out: Option<PathBuf>) -> framerestore::Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_json(&std::fs::read_to_string(path)?)?;
    if out.is_some() {
        cfg.output_dir = out;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> framerestore::Result<Outcome> {
    match cli.command {
        Command::Run { config, out } => {
            let cfg = load_config(&config, out)?;
            let res = run_experiment(&cfg)?;
            print!("{}", format_table(std::slice::from_ref(&res.row)));
            Ok(if res.converged {
                Outcome::Done
            } else {
                Outcome::NotConverged
            })
        }
        Command::Sweep {
            config,
            lambda,
            out,
        } => {
            let cfg = load_config(&config, out)?;
            let sweep = lambda_sweep(&cfg, &lambda)?;
            print!("{}", format_table(&sweep.rows));
            println!(
                "best lambda {:e}: {:.2} dB",
                sweep.best.lambda, sweep.best.psnr_db
            );
            if let Some(dir) = &cfg.output_dir {
                emit_report(std::slice::from_ref(&sweep.best), &dir.join("best.csv"))?;
            }
            Ok(if sweep.all_converged {
                Outcome::Done
            } else {
                Outcome::NotConverged
            })
        }
        Command::Psnr {
            image,
            reference,
            mode,
        } => {
            let a = pgm::read(&image)?;
            let b = pgm::read(&reference)?;
            let (a, b) = match mode {
                Mode::Ct => (
                    a.image.map(|v| v / a.maxval as f64),
                    b.image.map(|v| v / b.maxval as f64),
                ),
                _ => (a.image, b.image),
            };
            println!("{:.4}", psnr(&a, &b, mode.into())?);
            Ok(Outcome::Done)
        }
        Command::Phantom { size, out } => {
            let img = shepp_logan(size)?;
            pgm::write(&out, &img.map(|v| v * 65535.0), 65535)?;
            Ok(Outcome::Done)
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    if let Some(n) = std::env::var("RESTORE_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
    {
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    match run(cli) {
        Ok(Outcome::Done) => ExitCode::SUCCESS,
        Ok(Outcome::NotConverged) => {
            eprintln!("warning: solver stopped at its iteration cap before converging");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
