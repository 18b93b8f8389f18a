//! `prandtl` command line: run scenarios, sweep parameters, verify bounds
//! and run comparison studies over the boundary-layer laboratory.

mod commands;
mod config;
mod manifest;

use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};

use config::RunConfig;

#[derive(Parser)]
#[command(name = "prandtl", version, about = "Boundary-layer vorticity laboratory")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

/// Flags mirroring the config keys; any value given here overrides the file.
#[derive(Args, Debug, Clone, Default)]
struct Overrides {
    #[arg(long)]
    nx: Option<usize>,
    #[arg(long)]
    ny: Option<usize>,
    #[arg(long = "Y")]
    y_max: Option<f64>,
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long = "T")]
    t_end: Option<f64>,
    #[arg(long)]
    eps: Option<f64>,
    #[arg(long = "R")]
    r: Option<f64>,
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    gamma: Option<f64>,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    delta: Option<f64>,
    #[arg(long)]
    amplitude: Option<f64>,
    #[arg(long)]
    integrator: Option<String>,
    #[arg(long)]
    grading: Option<String>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    sample_every: Option<usize>,
}

impl Overrides {
    fn apply(&self, cfg: &mut RunConfig) {
        if let Some(v) = self.nx {
            cfg.grid.nx = v;
        }
        if let Some(v) = self.ny {
            cfg.grid.ny = v;
        }
        if let Some(v) = self.y_max {
            cfg.grid.y_max = v;
        }
        if let Some(v) = self.dt {
            cfg.scheme.dt = v;
        }
        if let Some(v) = self.t_end {
            cfg.scheme.t_end = v;
        }
        if let Some(v) = self.eps {
            cfg.paper.epsilon = v;
        }
        if let Some(v) = self.r {
            cfg.paper.r = Some(v);
        }
        if let Some(v) = self.s {
            cfg.paper.s = v;
        }
        if let Some(v) = self.gamma {
            cfg.paper.gamma = v;
        }
        if let Some(v) = self.sigma {
            cfg.paper.sigma = v;
        }
        if let Some(v) = self.delta {
            cfg.paper.delta = v;
        }
        if let Some(v) = self.amplitude {
            cfg.datum.amplitude = v;
        }
        if let Some(v) = &self.integrator {
            cfg.scheme.integrator = v.clone();
        }
        if let Some(v) = &self.grading {
            cfg.grid.grading = v.clone();
        }
        if let Some(v) = self.beta {
            cfg.grid.beta = v;
        }
        if let Some(v) = self.sample_every {
            cfg.output.sample_every = v;
        }
    }
}

#[derive(Subcommand)]
enum Command {
    /// Execute one scenario and write manifest, snapshots and trace.
    Run {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Cartesian sweep over the parameter grids in the config's [sweep] table.
    Sweep {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a verification suite (inequalities|monitors|structure|compare|convergence).
    Verify {
        #[arg(long)]
        suite: String,
        /// Run directory for the trace/snapshot-consuming suites.
        #[arg(long)]
        run: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
    /// Coupled two-solution comparison (uniqueness + Gronwall stability).
    Compare {
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
        #[arg(long)]
        out: PathBuf,
    },
}

fn load_config(path: &Option<PathBuf>, overrides: &Overrides) -> Result<RunConfig, i32> {
    let mut cfg = match path {
        Some(p) => RunConfig::from_path(p).map_err(|e| {
            eprintln!("error: {e}");
            commands::EXIT_ERROR
        })?,
        None => RunConfig::default(),
    };
    overrides.apply(&mut cfg);
    if let Err(e) = cfg.validate() {
        eprintln!("error: {e}");
        return Err(commands::EXIT_ERROR);
    }
    Ok(cfg)
}

fn main() {
    let cli = Cli::parse();
    let code = match cli.command {
        Command::Run { config, overrides, out } => match load_config(&config, &overrides) {
            Ok(cfg) => commands::cmd_run(&cfg, &out),
            Err(code) => code,
        },
        Command::Sweep { config, overrides, out } => match load_config(&config, &overrides) {
            Ok(cfg) => commands::cmd_sweep(&cfg, &out),
            Err(code) => code,
        },
        Command::Verify { suite, run, config, overrides, out } => {
            match load_config(&config, &overrides) {
                Ok(cfg) => commands::cmd_verify(&suite, run.as_deref(), &cfg, &out),
                Err(code) => code,
            }
        }
        Command::Compare { config, overrides, out } => match load_config(&config, &overrides) {
            Ok(cfg) => commands::cmd_compare(&cfg, &out),
            Err(code) => code,
        },
    };
    std::process::exit(code);
}
