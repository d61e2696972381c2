use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use mtlab::config::{ExperimentConfig, Overrides};
use mtlab::{experiments, golden};

#[derive(Parser)]
#[command(name = "mtlab", version, about = "Run Markov-structure experiments on spin-chain Gibbs states")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one experiment config and write its report.
    Run {
        config: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        max_dim: Option<usize>,
        #[arg(long)]
        workers: Option<usize>,
        /// Output directory (default: `output.dir`, else next to the config).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Recompute every golden under a directory and diff it.
    VerifyGolden {
        dir: PathBuf,
        /// Rewrite `expected.csv` files and print what changed.
        #[arg(long)]
        update: bool,
    },
    /// Model presets.
    Preset {
        #[command(subcommand)]
        cmd: PresetCmd,
    },
}

#[derive(Subcommand)]
enum PresetCmd {
    List,
}

const PRESET_HELP: &[(&str, &str)] = &[
    ("tfim", "g (default 1): -Σ Z_i Z_{i+1} - g Σ X_i"),
    ("heisenberg", "jx, jy, jz (1), h (0): Σ (jx XX + jy YY + jz ZZ) - h Σ Z"),
    ("random-nn", "norm (1), seed: random two-site terms of the given operator norm"),
    ("classical-ising", "j (1), h (0): -j Σ Z_i Z_{i+1} - h Σ Z_i"),
    ("uncoupled", "h (1): -h Σ X_i"),
];

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.cmd {
        Cmd::Run { config, seed, max_dim, workers, out } => {
            let mut cfg = match ExperimentConfig::load(&config) {
                Ok(c) => c,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let out = out.map(|o| std::env::current_dir().map(|d| d.join(&o)).unwrap_or(o));
            cfg.apply(&Overrides { seed, max_dim, workers, out });
            let report = match experiments::run(&cfg) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("error: {e}");
                    return ExitCode::from(2);
                }
            };
            let dir = mtlab::output_dir(&cfg);
            match mtlab::write_report(&report, &dir, &cfg.stem()) {
                Ok(files) => {
                    for f in files {
                        println!("wrote {}", f.display());
                    }
                }
                Err(e) => {
                    eprintln!("error: writing to {}: {e}", dir.display());
                    return ExitCode::from(2);
                }
            }
            print!("{report}");
            if report.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) }
        }
        Cmd::VerifyGolden { dir, update } => match golden::verify_golden(&dir, update) {
            Ok(r) => {
                print!("{r}");
                if r.all_pass() { ExitCode::SUCCESS } else { ExitCode::from(1) }
            }
            Err(e) => {
                eprintln!("error: {e}");
                ExitCode::from(2)
            }
        },
        Cmd::Preset { cmd: PresetCmd::List } => {
            for name in mtlab_core::thermal::PRESETS {
                let help = PRESET_HELP.iter().find(|(n, _)| n == name).map_or("", |(_, h)| h);
                println!("{name:<16} {help}");
            }
            ExitCode::SUCCESS
        }
    }
}
