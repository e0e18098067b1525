//! Command-line planner for drone-delivery tube networks.

mod commands;
mod output;
mod svg;

use clap::{Args, Parser, Subcommand};
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "tubeplan", version, about = "Plan spatially separated drone route networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct WeightArgs {
    /// Risk cost weight.
    #[arg(long, default_value_t = 1.0)]
    omega_r: f64,
    /// Space (airspace utilization) cost weight.
    #[arg(long, default_value_t = 1.0)]
    omega_p: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_turning: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_climbing: f64,
    #[arg(long, default_value_t = 0.0)]
    lambda_descending: f64,
    /// Fixed risk scaling; omit to calibrate per OD.
    #[arg(long)]
    lambda_r: Option<f64>,
    /// Fixed space scaling; omit to calibrate per OD.
    #[arg(long)]
    lambda_p: Option<f64>,
}

#[derive(Args, Debug, Clone)]
struct GridArgs {
    /// Cell size in meters: one value or dx,dy,dz.
    #[arg(long, default_value = "10", value_parser = parse_triple_f64)]
    cell_size: [f64; 3],
    /// Buffer radius in cells: one value or rx,ry,rz.
    #[arg(long, default_value = "1", value_parser = parse_triple_usize)]
    r_buf: [usize; 3],
    /// Path cross-section in cells: one value or tx,ty,tz.
    #[arg(long, default_value = "1", value_parser = parse_triple_usize)]
    thickness: [usize; 3],
    /// Obstacle clearance in meters; defaults to r_buf * cell_size.
    #[arg(long)]
    obstacle_margin: Option<f64>,
    /// `flat` collapses the flyable band into a single cell layer.
    #[arg(long, default_value = "metric")]
    mode: String,
}

fn parse_triple_f64(s: &str) -> Result<[f64; 3], String> {
    parse_triple(s, |v| v.parse::<f64>().map_err(|e| e.to_string()))
}

fn parse_triple_usize(s: &str) -> Result<[usize; 3], String> {
    parse_triple(s, |v| v.parse::<usize>().map_err(|e| e.to_string()))
}

fn parse_triple<T: Copy>(s: &str, f: impl Fn(&str) -> Result<T, String>) -> Result<[T; 3], String> {
    let parts: Vec<&str> = s.split(',').collect();
    match parts.len() {
        1 => {
            let v = f(parts[0])?;
            Ok([v, v, v])
        }
        3 => Ok([f(parts[0])?, f(parts[1])?, f(parts[2])?]),
        n => Err(format!("expected 1 or 3 comma-separated values, got {n}")),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Plan a route network for a scenario and demand set.
    Plan {
        #[arg(long)]
        scenario: PathBuf,
        /// Separate demand document; overrides demand embedded in the scenario.
        #[arg(long)]
        demand: Option<PathBuf>,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        grid: GridArgs,
        /// Profit segmentation threshold.
        #[arg(long, default_value_t = 1000.0)]
        eps_v: f64,
        /// Number of shuffled planning sequences.
        #[arg(short = 'K', long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Risk acceptance threshold on a route's mean cell theta.
        #[arg(long, default_value_t = 1.5)]
        theta_max: f64,
        /// Evaluate sequences on a thread pool.
        #[arg(long)]
        parallel: bool,
        /// Write per-layer ASCII dumps of the final overlay.
        #[arg(long)]
        dump_overlay: bool,
        /// Skip the SVG rendering.
        #[arg(long)]
        no_svg: bool,
        #[arg(long)]
        out: PathBuf,
    },
    /// Compare the sequential planner against the exact solvers on a 2D map.
    Benchmark {
        /// MovingAI-style octile `.map` file.
        #[arg(long)]
        map: PathBuf,
        /// Plan route counts 1..=N.
        #[arg(long)]
        routes: usize,
        /// Comma-separated subset of seq,cbs,brute.
        #[arg(long, default_value = "seq,cbs,brute")]
        solvers: String,
        /// Per-solver timeout per route count, in seconds.
        #[arg(long, default_value_t = 60.0)]
        timeout: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Re-plan while sweeping one parameter and record the metrics.
    Sweep {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        demand: Option<PathBuf>,
        /// One of omega_p, omega_r, k, eps_v.
        #[arg(long)]
        param: String,
        /// Comma-separated parameter values.
        #[arg(long)]
        values: String,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        grid: GridArgs,
        #[arg(long, default_value_t = 1000.0)]
        eps_v: f64,
        #[arg(short = 'K', long, default_value_t = 1)]
        k: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = 1.5)]
        theta_max: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the calibrated cost scaling factors for one OD.
    Calibrate {
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long)]
        demand: Option<PathBuf>,
        /// Request id to calibrate.
        #[arg(long)]
        od: String,
        #[command(flatten)]
        weights: WeightArgs,
        #[command(flatten)]
        grid: GridArgs,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Plan {
            scenario,
            demand,
            weights,
            grid,
            eps_v,
            k,
            seed,
            theta_max,
            parallel,
            dump_overlay,
            no_svg,
            out,
        } => commands::plan(commands::PlanOpts {
            scenario,
            demand,
            weights,
            grid,
            eps_v,
            k,
            seed,
            theta_max,
            parallel,
            dump_overlay,
            svg: !no_svg,
            out,
        }),
        Command::Benchmark {
            map,
            routes,
            solvers,
            timeout,
            seed,
            out,
        } => commands::benchmark(map, routes, &solvers, timeout, seed, out),
        Command::Sweep {
            scenario,
            demand,
            param,
            values,
            weights,
            grid,
            eps_v,
            k,
            seed,
            theta_max,
            out,
        } => commands::sweep(commands::SweepOpts {
            scenario,
            demand,
            param,
            values,
            weights,
            grid,
            eps_v,
            k,
            seed,
            theta_max,
            out,
        }),
        Command::Calibrate {
            scenario,
            demand,
            od,
            weights,
            grid,
        } => commands::calibrate(scenario, demand, &od, weights, grid),
    };
    match result {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(1)
        }
    }
}
