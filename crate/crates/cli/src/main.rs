use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ghostfem::config::{parse_config, ConfigError, RunConfig};
use ghostfem::driver::{phi6_amplitude_scan, sweep, DriverError, SweepPoint};
use ghostfem::mms::{convergence_study, mms_mesh, write_convergence_csv, MmsError};
use ghostfem::{evolve, Dims, NewtonOptions};

const DEFAULT_OUT: &str = "out";

#[derive(Parser)]
#[command(name = "ghostfem", version, about = "Spacetime finite element runs for coupled normal and ghost scalar fields")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve one configuration until blow-up or max_slabs.
    Run(RunArgs),
    /// Run one evolution per value of a config key and tabulate lifetimes.
    Sweep {
        #[command(flatten)]
        run: RunArgs,
        /// Dotted config key, e.g. ic.A or model.gamma.
        #[arg(long)]
        axis: String,
        /// Comma-separated values for the axis.
        #[arg(long, value_delimiter = ',', required = true)]
        values: Vec<String>,
    },
    /// Manufactured-solution convergence study.
    Mms {
        /// 1+1 or 2+1.
        #[arg(long, default_value = "1+1")]
        dims: Dims,
        /// Cells per direction on each level; each must double the previous.
        #[arg(long, value_delimiter = ',', default_value = "100,200,400")]
        levels: Vec<usize>,
        /// Output directory for mms.csv [default: out].
        #[arg(long)]
        out: Option<PathBuf>,
        /// Newton relative tolerance.
        #[arg(long)]
        rtol: Option<f64>,
        /// Newton iteration cap.
        #[arg(long)]
        max_iters: Option<usize>,
    },
    /// Lifetime against oscillon amplitude for the lifted sextic potential.
    Phi6Scan {
        #[command(flatten)]
        run: RunArgs,
        /// Comma-separated oscillon amplitudes.
        #[arg(long, value_delimiter = ',', required = true)]
        amplitudes: Vec<f64>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration; defaults apply when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. --set model.gamma=+1. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; overrides output_dir from the file.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Same as --set solver.rtol=...
    #[arg(long)]
    rtol: Option<f64>,
    /// Same as --set solver.max_iters=...
    #[arg(long)]
    max_iters: Option<usize>,
    /// Same as --set max_slabs=...
    #[arg(long)]
    max_slabs: Option<usize>,
}

enum Failure {
    Config(String),
    Run(String),
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(e.to_string())
    }
}

impl From<DriverError> for Failure {
    fn from(e: DriverError) -> Self {
        match e {
            DriverError::Config(c) => c.into(),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<MmsError> for Failure {
    fn from(e: MmsError) -> Self {
        match e {
            MmsError::Config(m) => Failure::Config(m),
            other => Failure::Run(other.to_string()),
        }
    }
}

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::Run(e.to_string())
    }
}

fn load(args: &RunArgs) -> Result<RunConfig, Failure> {
    let mut overrides = args.overrides.clone();
    if let Some(v) = args.rtol {
        overrides.push(format!("solver.rtol={v:e}"));
    }
    if let Some(v) = args.max_iters {
        overrides.push(format!("solver.max_iters={v}"));
    }
    if let Some(v) = args.max_slabs {
        overrides.push(format!("max_slabs={v}"));
    }
    let mut cfg = match &args.config {
        Some(path) => parse_config(path, &overrides)?,
        None => ghostfem::parse_config_str("", &overrides)?,
    };
    if let Some(out) = &args.out {
        cfg.output_dir = Some(out.clone());
    }
    if cfg.output_dir.is_none() {
        cfg.output_dir = Some(PathBuf::from(DEFAULT_OUT));
    }
    Ok(cfg)
}

fn print_points(points: &[SweepPoint], dir: &Path) {
    for p in points {
        println!("{} t_long_lived={} terminated_by={}", p.axis_value, p.t_long_lived, p.terminated_by.as_str());
    }
    println!("wrote {}", dir.join("lifetimes.csv").display());
}

fn dispatch(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let cfg = load(&args)?;
            let rep = evolve(&cfg)?;
            let dir = cfg.output_dir.unwrap_or_default();
            println!(
                "t_long_lived={} terminated_by={} out={}",
                rep.t_long_lived,
                rep.terminated_by.as_str(),
                dir.display()
            );
        }
        Command::Sweep { run, axis, values } => {
            let cfg = load(&run)?;
            let points = sweep(&cfg, &axis, &values)?;
            print_points(&points, cfg.output_dir.as_deref().unwrap_or(Path::new(DEFAULT_OUT)));
        }
        Command::Phi6Scan { run, amplitudes } => {
            let cfg = load(&run)?;
            let points = phi6_amplitude_scan(&cfg, &amplitudes)?;
            print_points(&points, cfg.output_dir.as_deref().unwrap_or(Path::new(DEFAULT_OUT)));
        }
        Command::Mms { dims, levels, out, rtol, max_iters } => {
            let mut opts = NewtonOptions::default();
            if let Some(r) = rtol {
                opts.rtol = r;
            }
            if let Some(m) = max_iters {
                opts.max_iters = m;
            }
            opts.validate().map_err(Failure::Config)?;
            let meshes: Vec<_> = levels.iter().map(|&n| mms_mesh(dims, n)).collect();
            let rows = convergence_study(&meshes, &opts)?;
            let dir = out.unwrap_or_else(|| PathBuf::from(DEFAULT_OUT));
            std::fs::create_dir_all(&dir)?;
            let path = dir.join("mms.csv");
            write_convergence_csv(&rows, &path)?;
            let rate = |r: Option<f64>| r.map(|v| format!("{v:.4}")).unwrap_or_else(|| "-".into());
            for r in &rows {
                println!(
                    "{} err_phi={:.4e} rate_phi={} err_chi={:.4e} rate_chi={}",
                    r.mesh_label,
                    r.l2_err_phi,
                    rate(r.rate_phi),
                    r.l2_err_chi,
                    rate(r.rate_chi)
                );
            }
            println!("wrote {}", path.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Config(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(Failure::Run(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
