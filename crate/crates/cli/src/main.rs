use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use entlab_cli::config::{apply_suite_file, config_from_file_text, CommandKind, Format, RGrid};
use entlab_cli::{run, ConfigError, RunConfig, EXIT_USAGE};

/// Numerical lab for information-constrained optimal transport and
/// dimensional transport-entropy bounds.
///
/// Set ENTLAB_THREADS to cap the worker threads.
/// Exit codes: 0 success, 1 bound or invariant violated, 2 usage error,
/// 3 numerical failure.
#[derive(Parser)]
#[command(name = "entlab", version, about, long_about)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Args)]
struct Common {
    /// Output format.
    #[arg(long, default_value = "csv", value_parser = ["csv", "json"])]
    format: String,
    /// Write the table here instead of stdout.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Override a named tolerance, e.g. --tol scenario=1e-2 (repeatable).
    #[arg(long = "tol", value_name = "NAME=VALUE")]
    tol: Vec<String>,
    /// Print the canonical config string and exit.
    #[arg(long)]
    print_config: bool,
}

#[derive(Subcommand)]
enum Cmd {
    /// Tabulate C(R), the entropy-power saturation term, over an R grid.
    CCurve {
        /// Law of Y, e.g. gaussian:mean=0,var=1 or mixture:w=0.5;0.5,mean=-2;2,var=1;1.
        #[arg(long)]
        dist: String,
        /// Budgets: min:max:steps (inclusive) or a comma list.
        #[arg(long, default_value = entlab_cli::DEFAULT_C_GRID)]
        r: String,
        /// auto, closed-form, scaled-copy or gaussian-noise.
        #[arg(long, default_value = "auto")]
        strategy: String,
        /// Grid points (default: chosen per law and refined automatically).
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Constrained distance against the requested bounds over an R grid.
    Bounds {
        /// Reference potential: potential:quadratic,lambda=<f> or potential:fig2.
        #[arg(long)]
        pot: String,
        /// Law of Y.
        #[arg(long)]
        py: String,
        /// Budgets: min:max:steps (inclusive) or a comma list.
        #[arg(long)]
        r: String,
        /// Comma list from classical, dim_gaussian, bolley, bai, hwi, thm3, thm4 (default: all).
        #[arg(long)]
        which: Option<String>,
        /// Grid points for both laws.
        #[arg(long)]
        grid: Option<usize>,
        #[command(flatten)]
        common: Common,
    },
    /// Run the invariant suites; exit 0 iff every check passes.
    Verify {
        /// Comma list from dist, info, deconvolution, transport, bounds, concentration.
        #[arg(long)]
        only: Option<String>,
        /// TOML suite file with `only = [...]` and a `[tolerances]` table.
        #[arg(long)]
        suite: Option<PathBuf>,
        /// Write the JSON report here (same as --format json --output PATH).
        #[arg(long)]
        report: Option<PathBuf>,
        #[command(flatten)]
        common: Common,
    },
    /// Monte Carlo mu(A_r) for A = (-inf, a] against the concentration bound.
    Concentration {
        /// Reference potential.
        #[arg(long)]
        pot: String,
        /// Half-line end point (default: the mode of the potential).
        #[arg(long, allow_negative_numbers = true)]
        a: Option<f64>,
        /// Saturation constant C in (0, 1].
        #[arg(long)]
        c: Option<f64>,
        /// Distances r (default: 8 points from c_A upward).
        #[arg(long)]
        r: Option<String>,
        /// Monte Carlo sample count.
        #[arg(long, default_value_t = 1_000_000)]
        samples: usize,
        /// Random seed.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[command(flatten)]
        common: Common,
    },
    /// Re-run a config: a file holding a canonical config string, or an
    /// output table with a `# config:` line.
    Run {
        config: PathBuf,
        /// Print the canonical config string and exit.
        #[arg(long)]
        print_config: bool,
    },
}

fn apply_common(cfg: &mut RunConfig, c: Common) -> Result<bool, ConfigError> {
    cfg.format = c.format.parse()?;
    cfg.output = c.output;
    for t in &c.tol {
        cfg.tolerances.set_pair(t)?;
    }
    Ok(c.print_config)
}

fn build(cmd: Cmd) -> Result<(RunConfig, bool), ConfigError> {
    let strategy = |s: &str| s.parse().map_err(|e| ConfigError(format!("{e}")));
    let (mut cfg, common) = match cmd {
        Cmd::CCurve { dist, r, strategy: st, grid, common } => {
            let mut cfg = RunConfig::new(CommandKind::CCurve);
            RunConfig::set_dist(&mut cfg.dist, &dist)?;
            cfg.r = Some(r.parse::<RGrid>()?);
            cfg.strategy = Some(strategy(&st)?);
            cfg.grid_points = grid;
            (cfg, common)
        }
        Cmd::Bounds { pot, py, r, which, grid, common } => {
            let mut cfg = RunConfig::new(CommandKind::Bounds);
            cfg.set_pot(&pot)?;
            RunConfig::set_dist(&mut cfg.py, &py)?;
            cfg.r = Some(r.parse()?);
            if let Some(w) = which {
                cfg.set_which(&w)?;
            }
            cfg.grid_points = grid;
            (cfg, common)
        }
        Cmd::Verify { only, suite, report, common } => {
            let mut cfg = RunConfig::new(CommandKind::Verify);
            if let Some(path) = suite {
                let text = std::fs::read_to_string(&path)
                    .map_err(|e| ConfigError(format!("cannot read {}: {e}", path.display())))?;
                apply_suite_file(&mut cfg, &text)?;
            }
            if let Some(o) = only {
                cfg.set_only(&o)?;
            }
            let print = apply_common(&mut cfg, common)?;
            if let Some(p) = report {
                cfg.output = Some(p);
                cfg.format = Format::Json;
            }
            cfg.validate()?;
            return Ok((cfg, print));
        }
        Cmd::Concentration { pot, a, c, r, samples, seed, common } => {
            let mut cfg = RunConfig::new(CommandKind::Concentration);
            cfg.set_pot(&pot)?;
            cfg.a = a;
            cfg.c = c;
            cfg.r = r.map(|s| s.parse()).transpose()?;
            cfg.samples = Some(samples);
            cfg.seed = seed;
            (cfg, common)
        }
        Cmd::Run { config, print_config } => {
            let text = std::fs::read_to_string(&config)
                .map_err(|e| ConfigError(format!("cannot read {}: {e}", config.display())))?;
            return Ok((config_from_file_text(&text)?, print_config));
        }
    };
    let print = apply_common(&mut cfg, common)?;
    cfg.validate()?;
    Ok((cfg, print))
}

fn threads() -> Result<(), String> {
    let Ok(v) = std::env::var("ENTLAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v.trim().parse().ok().filter(|n| *n > 0).ok_or(format!("ENTLAB_THREADS must be a positive integer, got '{v}'"))?;
    rayon::ThreadPoolBuilder::new().num_threads(n).build_global().map_err(|e| e.to_string())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Err(e) = threads() {
        eprintln!("error: {e}");
        return ExitCode::from(EXIT_USAGE as u8);
    }
    let (cfg, print) = match build(cli.command) {
        Ok(v) => v,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    if print {
        println!("{}", cfg.canonical());
        return ExitCode::SUCCESS;
    }
    match run(&cfg) {
        Ok(code) => ExitCode::from(code as u8),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
