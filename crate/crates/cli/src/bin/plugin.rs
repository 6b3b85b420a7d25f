//! Reference plugin speaking the subprocess protocol on stdin/stdout.
//!
//! `mlgrowth-plugin gaussian --mu ref.img --s0 0.1` answers noise requests
//! with the analytic Gaussian predictor; `mlgrowth-plugin soft-area --brain
//! brain.img` answers regressor requests with the soft tumor fraction.

use std::io::{stdin, stdout, BufReader, BufWriter};
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mlgrowth::diffusion::plugin::{serve, Request, RequestKind, Response};
use mlgrowth::diffusion::{gaussian_optimal_eps, make_schedule, soft_tumor_fraction, SoftAreaRegressor};
use mlgrowth::pipeline::{DEFAULT_S0, DEFAULT_SOFTNESS, DEFAULT_TAU};
use mlgrowth::{BinaryMask, Error, Image2D, Result};

#[derive(Parser)]
#[command(name = "mlgrowth-plugin")]
struct Cli {
    #[command(subcommand)]
    backend: Backend,
}

#[derive(Subcommand)]
enum Backend {
    Gaussian {
        #[arg(long)]
        mu: PathBuf,
        #[arg(long, default_value_t = DEFAULT_S0)]
        s0: f64,
        #[arg(long, default_value_t = 1000)]
        steps: usize,
        #[arg(long, default_value_t = 1e-4)]
        beta_start: f64,
        #[arg(long, default_value_t = 0.02)]
        beta_end: f64,
    },
    SoftArea {
        #[arg(long)]
        brain: PathBuf,
        #[arg(long, default_value_t = DEFAULT_TAU)]
        tau: f64,
        #[arg(long, default_value_t = DEFAULT_SOFTNESS)]
        softness: f64,
    },
}

fn wrong_kind(req: &Request) -> Error {
    Error::InvalidInput(format!("this backend cannot answer {:?} requests", req.kind))
}

fn run(cli: Cli) -> Result<()> {
    let input = BufReader::new(stdin().lock());
    let output = BufWriter::new(stdout().lock());
    match cli.backend {
        Backend::Gaussian { mu, s0, steps, beta_start, beta_end } => {
            let mu = Image2D::load(mu)?;
            let sched = make_schedule(steps, beta_start, beta_end)?;
            serve(input, output, |req| match req.kind {
                RequestKind::Eps => {
                    gaussian_optimal_eps(&req.image, req.step as usize, &sched, &mu, s0).map(Response::Eps)
                }
                RequestKind::Regress => Err(wrong_kind(req)),
            })
        }
        Backend::SoftArea { brain, tau, softness } => {
            let brain = BinaryMask::from_image(&Image2D::load(brain)?);
            let reg = SoftAreaRegressor::new(tau, softness, brain)?;
            serve(input, output, |req| match req.kind {
                RequestKind::Regress => {
                    let (value, grad) = soft_tumor_fraction(&req.image, &reg)?;
                    Ok(Response::Regress { value, grad })
                }
                RequestKind::Eps => Err(wrong_kind(req)),
            })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("mlgrowth-plugin: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
