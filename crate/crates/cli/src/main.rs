//! Batch front end for the toric Monge-Ampere ray laboratory.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 configuration error,
//! 3 numerical failure.

mod commands;
mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use config::ExperimentConfig;

#[derive(Parser)]
#[command(
    name = "hrma",
    version,
    about = "Geodesic-ray laboratory for toric Monge-Ampere Cauchy data",
    long_about = "Computes Legendre-transform geodesic rays from convex Cauchy data, their \
convex lifespan, the Moser flow and its caustics, Alexandrov weak-solution \
diagnostics, and strip-harmonic obstruction data.\n\n\
Output directory precedence: --out flag, then HRMA_OUT_DIR, then the config's \
out_dir, then ./out.\n\n\
CSV columns: leaves.csv (seed_id, s, x0[, x1]); characteristics.csv (seed_id, \
s, x..., z, p_sigma, p_xi...); flow_map.csv (s, x_in..., x_out..., jac_det); \
lift.csv (s, x0, phi); spectrum_kernel.csv (xi, re, im, log_abs). Grid files \
are a JSON header line followed by coordinate,value rows."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Convex lifespan of the Cauchy data (Hessian-pencil scan)
    Lifespan(CommonArgs),
    /// Legendre-transform ray: slices, admissibility flags, relative potential
    Ray(CommonArgs),
    /// Moser flow: leaves, characteristics, caustic, conservation law
    Flow(CommonArgs),
    /// Weak-solution verification: mass decay, gradient graph, residual
    Verify(CommonArgs),
    /// Strip harmonic analysis: leafwise obstruction and decay-rate battery
    Obstruction(CommonArgs),
}

#[derive(clap::Args)]
struct CommonArgs {
    /// Path to the experiment configuration (JSON)
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides HRMA_OUT_DIR and the config)
    #[arg(long)]
    out: Option<PathBuf>,
    /// Override the number of flow seeds
    #[arg(long)]
    seed_count: Option<usize>,
    /// Multiply the check tolerances by this factor
    #[arg(long)]
    tol_scale: Option<f64>,
}

fn resolve_out_dir(args: &CommonArgs, cfg: &ExperimentConfig) -> PathBuf {
    if let Some(out) = &args.out {
        return out.clone();
    }
    if let Ok(env) = std::env::var("HRMA_OUT_DIR") {
        if !env.is_empty() {
            return PathBuf::from(env);
        }
    }
    cfg.out_dir.clone().unwrap_or_else(|| PathBuf::from("out"))
}

fn execute(cmd: &Command) -> anyhow::Result<bool> {
    let (name, args): (&str, &CommonArgs) = match cmd {
        Command::Lifespan(a) => ("lifespan", a),
        Command::Ray(a) => ("ray", a),
        Command::Flow(a) => ("flow", a),
        Command::Verify(a) => ("verify", a),
        Command::Obstruction(a) => ("obstruction", a),
    };
    let mut cfg = ExperimentConfig::load(&args.config)?;
    if let Some(n) = args.seed_count {
        cfg.seed_count = Some(n);
    }
    let tol = cfg.tolerances.scaled(args.tol_scale.unwrap_or(1.0));
    let base = args
        .config
        .parent()
        .map(Path::to_path_buf)
        .unwrap_or_else(|| PathBuf::from("."));
    let out = resolve_out_dir(args, &cfg);
    match name {
        "lifespan" => commands::cmd_lifespan(&cfg, &base, &out, tol),
        "ray" => commands::cmd_ray(&cfg, &base, &out, tol),
        "flow" => commands::cmd_flow(&cfg, &base, &out, tol),
        "verify" => commands::cmd_verify(&cfg, &base, &out, tol),
        _ => commands::cmd_obstruction(&cfg, &base, &out, tol),
    }
}

fn classify(err: &anyhow::Error) -> u8 {
    // configuration and input problems exit 2, numerical failures exit 3
    for cause in err.chain() {
        if let Some(core) = cause.downcast_ref::<hrma_core::Error>() {
            return match core {
                hrma_core::Error::NewtonDiverged { .. }
                | hrma_core::Error::NotStrictlyConvex { .. }
                | hrma_core::Error::MoserNotInvertible { .. }
                | hrma_core::Error::NotJointlyConvex { .. }
                | hrma_core::Error::GradientEscapesDual { .. }
                | hrma_core::Error::InsufficientResolution => 3,
                _ => 2,
            };
        }
    }
    2
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(&cli.command) {
        Ok(true) => ExitCode::from(0),
        Ok(false) => {
            eprintln!("one or more checks failed (see manifest.json)");
            ExitCode::from(1)
        }
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(classify(&err))
        }
    }
}
