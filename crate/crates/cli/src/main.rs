#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod commands;
mod config;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use sigmalab::{Error, ErrorCategory};

use config::{RunConfig, COMMANDS};

const EXIT_CONFIG: u8 = 2;
const EXIT_NUMERICAL: u8 = 3;
const EXIT_HYPOTHESIS: u8 = 4;

/// Meshes, elliptic solves and injectivity checks for sigma-harmonic maps.
#[derive(Debug, Parser)]
#[command(name = "sigmalab", version)]
struct Cli {
    /// One of: mesh, solve, solve-nd, map, verify, meyers, beltrami, unimodal.
    #[arg(value_parser = COMMANDS)]
    command: Option<String>,
    /// JSON run configuration; flags override its fields.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    out: Option<String>,
    /// disk:r=..,cx=..,cy=.. | annulus:r_in=..,r_out=.. | rect:x0=..,y0=..,x1=..,y1=..
    #[arg(long)]
    domain: Option<String>,
    #[arg(long)]
    h: Option<f64>,
    #[arg(long)]
    spacing: Option<f64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    sigma: Option<String>,
    #[arg(long)]
    g: Option<String>,
    #[arg(long)]
    oracle: Option<String>,
    /// fem or fd.
    #[arg(long)]
    solver: Option<String>,
    #[arg(long)]
    refinements: Option<usize>,
    #[arg(long)]
    margin: Option<f64>,
    #[arg(long)]
    directions: Option<usize>,
    #[arg(long)]
    tie_tolerance: Option<f64>,
    #[arg(long)]
    rel_tol: Option<f64>,
    #[arg(long)]
    probe_radius: Option<f64>,
    #[arg(long)]
    levels: Option<usize>,
    /// Comma-separated cyclic sequence for the unimodal command.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    values: Option<Vec<f64>>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, overrides_with = "no_svg")]
    svg: bool,
    #[arg(long, overrides_with = "svg")]
    no_svg: bool,
}

impl Cli {
    fn into_config(self) -> sigmalab::Result<RunConfig> {
        let mut c = match &self.config {
            Some(path) => RunConfig::from_json(&std::fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        macro_rules! set {
            ($($field:ident),*) => {$(
                if let Some(v) = self.$field { c.$field = v; }
            )*};
        }
        macro_rules! set_opt {
            ($($field:ident),*) => {$(
                if self.$field.is_some() { c.$field = self.$field; }
            )*};
        }
        set!(
            out,
            spacing,
            alpha,
            sigma,
            solver,
            refinements,
            margin,
            directions,
            tie_tolerance,
            rel_tol,
            levels,
            seed
        );
        set_opt!(command, domain, h, g, oracle, probe_radius, values);
        if self.svg {
            c.svg = true;
        }
        if self.no_svg {
            c.svg = false;
        }
        c.resolve()
    }
}

fn fail(e: &Error) -> ExitCode {
    let (label, code) = match e.category() {
        ErrorCategory::Config => ("config error", EXIT_CONFIG),
        ErrorCategory::Numerical => ("numerical failure", EXIT_NUMERICAL),
        ErrorCategory::Hypothesis => ("hypothesis failure", EXIT_HYPOTHESIS),
    };
    eprintln!("{label}: {e}");
    ExitCode::from(code)
}

fn main() -> ExitCode {
    let cfg = match Cli::parse().into_config() {
        Ok(c) => c,
        Err(e) => return fail(&e),
    };
    let run = match commands::run(&cfg) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    if let Err(e) = run.outputs.commit(std::path::Path::new(&cfg.out)) {
        return fail(&Error::Io(e));
    }
    println!("{}", run.summary);
    ExitCode::from(run.exit as u8)
}
