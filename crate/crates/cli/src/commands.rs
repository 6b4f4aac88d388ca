use std::fs::File;
use std::io::{self, BufReader, BufWriter, Read, Write};
use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use factor_order::simulate::GENERATOR_VERSION;
use factor_order::{
    estimate_orders_with_spectra, generate_panel, predict_outlier_counts, FactorStrength,
    ModelConfig, RmtContext,
};

use crate::csv_io::{read_panel, write_panel};
use crate::report::{predict_lags, ReportJson, VERSION};

#[derive(Debug, Parser)]
#[command(
    name = "factor-order",
    version,
    about = "Estimate the number of factors and lags of a dynamic factor panel"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate a panel from the dynamic factor model and write it as CSV
    Simulate(SimulateArgs),
    /// Estimate (k, q) from a CSV panel and print a JSON report
    Estimate(EstimateArgs),
    /// Tabulate the limiting spectral laws
    Rmt(RmtArgs),
    /// Predict per-lag outlier counts for given (k, q)
    Predict(PredictArgs),
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[arg(long, default_value_t = 450)]
    pub n: usize,
    #[arg(long, default_value_t = 500)]
    pub t: usize,
    #[arg(long, default_value_t = 2)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub q: usize,
    #[arg(long, default_value_t = 1.0)]
    pub beta: f64,
    #[arg(long, default_value_t = 4.0)]
    pub sigma_f2: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, default_value_t = 0.25)]
    pub sigma_eps2: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Extra columns beyond T, so lags up to this value can share T
    #[arg(long, default_value_t = 5)]
    pub tau_max: usize,
    /// Write to this file instead of stdout
    #[arg(long)]
    pub out: Option<PathBuf>,
}

impl SimulateArgs {
    pub fn config(&self) -> ModelConfig {
        ModelConfig {
            n: self.n,
            t: self.t,
            k: self.k,
            q: self.q,
            beta: self.beta,
            sigma_f2: self.sigma_f2,
            sigma2: self.sigma2,
            sigma_eps2: self.sigma_eps2,
            seed: self.seed,
            tau_max: self.tau_max,
        }
    }
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// CSV panel, rows are series; `-` reads stdin
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub tau_max: usize,
    /// Known noise variance; estimated from the lag-0 spectrum when absent
    #[arg(long)]
    pub sigma2: Option<f64>,
    /// Number of leading eigenvalues reported per lag
    #[arg(long, default_value_t = 13)]
    pub report_eigs: usize,
    /// Skip the first non-comment line
    #[arg(long)]
    pub header: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Law {
    Density,
    Cdf,
    Stieltjes,
    Support,
    Edges,
}

#[derive(Debug, Args)]
pub struct RmtArgs {
    #[arg(long)]
    pub c: f64,
    #[arg(long, default_value_t = 1.0)]
    pub sigma2: f64,
    #[arg(long, value_enum)]
    pub what: Law,
    /// Number of grid points
    #[arg(long, default_value_t = 201)]
    pub grid: usize,
    /// Evaluate at a single point instead of a grid
    #[arg(long, allow_negative_numbers = true)]
    pub at: Option<f64>,
}

#[derive(Debug, Args)]
pub struct PredictArgs {
    #[arg(long)]
    pub k: usize,
    #[arg(long)]
    pub q: usize,
    #[arg(long)]
    pub c: f64,
    #[arg(long, default_value_t = 5)]
    pub tau_max: usize,
    /// Factor strength relative to the noise variance; `inf` for strong factors
    #[arg(long, default_value = "inf", allow_negative_numbers = true)]
    pub lambda: f64,
}

pub fn run(cli: &Cli, stdout: &mut dyn Write) -> Result<()> {
    match &cli.command {
        Command::Simulate(a) => simulate(a, stdout),
        Command::Estimate(a) => estimate(a, stdout),
        Command::Rmt(a) => rmt(a, stdout),
        Command::Predict(a) => predict(a, stdout),
    }
}

fn simulate(args: &SimulateArgs, stdout: &mut dyn Write) -> Result<()> {
    let cfg = args.config();
    let panel = generate_panel(&cfg)?;
    let comments = vec![
        format!(
            "factor-order {VERSION} simulate n={} t={} k={} q={} beta={} sigma_f2={} sigma2={} sigma_eps2={} seed={} tau_max={}",
            cfg.n, cfg.t, cfg.k, cfg.q, cfg.beta, cfg.sigma_f2, cfg.sigma2, cfg.sigma_eps2, cfg.seed, cfg.tau_max
        ),
        format!("generator={GENERATOR_VERSION} rows={} columns={}", panel.n(), panel.cols()),
    ];
    match &args.out {
        Some(path) => {
            let file =
                File::create(path).with_context(|| format!("creating {}", path.display()))?;
            write_panel(BufWriter::new(file), &panel, &comments)?;
        }
        None => {
            let mut buf = Vec::new();
            write_panel(&mut buf, &panel, &comments)?;
            stdout.write_all(&buf)?;
        }
    }
    Ok(())
}

fn open_input(path: &PathBuf) -> Result<Box<dyn Read>> {
    if path.as_os_str() == "-" {
        Ok(Box::new(io::stdin().lock()))
    } else {
        let file = File::open(path).with_context(|| format!("opening {}", path.display()))?;
        Ok(Box::new(BufReader::new(file)))
    }
}

fn estimate(args: &EstimateArgs, stdout: &mut dyn Write) -> Result<()> {
    let panel = read_panel(open_input(&args.input)?, args.header)?;
    let (est, spectra) = estimate_orders_with_spectra(&panel, args.tau_max, args.sigma2)?;
    let report = ReportJson::new(&est, &spectra, args.report_eigs);
    let mut text = serde_json::to_string_pretty(&report)?;
    text.push('\n');
    stdout.write_all(text.as_bytes())?;
    Ok(())
}

fn rmt(args: &RmtArgs, stdout: &mut dyn Write) -> Result<()> {
    let ctx = RmtContext::new(args.c, args.sigma2)?;
    let mut out = String::new();
    let a = ctx.lsd_support();
    let grid = args.grid.max(2);
    match args.what {
        Law::Support => out.push_str(&format!("{a}\n")),
        Law::Edges => {
            let (lo, hi) = ctx.mp_edges();
            out.push_str(&format!("{lo}\t{hi}\n"));
        }
        Law::Density | Law::Cdf => {
            let eval = |x: f64| {
                if args.what == Law::Density {
                    ctx.lsd_density(x)
                } else {
                    ctx.lsd_cdf(x)
                }
            };
            let name = if args.what == Law::Density {
                "density"
            } else {
                "cdf"
            };
            out.push_str(&format!("# x\t{name}\n"));
            let points: Vec<f64> = match args.at {
                Some(x) => vec![x],
                None => (0..grid)
                    .map(|i| -a + 2.0 * a * i as f64 / (grid - 1) as f64)
                    .collect(),
            };
            for x in points {
                out.push_str(&format!("{x}\t{}\n", eval(x)));
            }
        }
        Law::Stieltjes => {
            out.push_str("# ell\tstieltjes\n");
            let points: Vec<f64> = match args.at {
                Some(l) => vec![l],
                None => (1..=grid)
                    .map(|i| a * (1.0 + 4.0 * i as f64 / grid as f64))
                    .collect(),
            };
            for l in points {
                out.push_str(&format!("{l}\t{}\n", ctx.lsd_stieltjes(l)?));
            }
        }
    }
    stdout.write_all(out.as_bytes())?;
    Ok(())
}

fn predict(args: &PredictArgs, stdout: &mut dyn Write) -> Result<()> {
    let ctx = RmtContext::unit(args.c)?;
    let strength = if args.lambda.is_infinite() && args.lambda > 0.0 {
        FactorStrength::Strong
    } else {
        FactorStrength::Uniform(args.lambda)
    };
    let preds = predict_outlier_counts(args.k, args.q, args.tau_max, &ctx, &strength)?;
    let mut text = serde_json::to_string_pretty(&predict_lags(preds))?;
    text.push('\n');
    stdout.write_all(text.as_bytes())?;
    Ok(())
}
