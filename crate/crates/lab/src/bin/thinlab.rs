use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Result;
use clap::{Args, Parser, Subcommand};
use thinlab::commands::{self, AnnulusKind, Fill, PolymerWindow};
use thinlab::format::parse_grid;
use thinlab::manifest::{write_table, RunManifest, Table};
use thinlab::parallel::{self, WORKERS_ENV};
use thinlab::verify::{self, Suite, VerifyOptions};

/// Exact counts, polymer checks and Monte Carlo runs for the locally thinned
/// Bernoulli field. Every command writes CSV tables with a manifest header.
#[derive(Parser, Debug)]
#[command(name = "thinlab", version)]
struct Cli {
    /// Directory receiving the CSV outputs.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Worker threads; defaults to the available parallelism.
    #[arg(long, global = true, env = WORKERS_ENV)]
    workers: Option<usize>,
    /// Seed of every random stream.
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Critical densities of the three uniqueness criteria for d = 2..=dmax.
    Thresholds {
        #[arg(long, default_value_t = 10)]
        dmax: usize,
    },
    /// Total-variation curves between the d = 2 admissibility classes.
    TvCurves {
        #[arg(long, default_value_t = 0.001)]
        step: f64,
    },
    /// Conditional probability of an isolated origin in a k x k box under
    /// vacant and occupied exteriors.
    BoxConditional {
        #[arg(long, default_value_t = 3)]
        k: usize,
        /// `start:stop:step` or a comma-separated list of densities.
        #[arg(long, default_value = "0:1:0.005")]
        grid: String,
        /// Value of the origin in the conditioned thinned image.
        #[arg(long, value_enum, default_value_t = Fill::Occupied)]
        center: Fill,
        /// Thinned image on the annulus around the origin.
        #[arg(long, value_enum, default_value_t = AnnulusKind::Zero)]
        annulus: AnnulusKind,
    },
    /// Polymer weights, convergence scans and weight bounds.
    #[command(subcommand)]
    Polymer(PolymerCommand),
    /// Monte Carlo runs.
    #[command(subcommand)]
    Simulate(SimulateCommand),
    /// Runs an invariant suite; exits with 1 if any check fails.
    Verify {
        #[arg(value_enum)]
        suite: Suite,
        /// Samples per marginal and sweeps per stationary chain.
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
        /// Largest polymer size in the kp suite.
        #[arg(long, default_value_t = 4)]
        truncation: usize,
    },
}

#[derive(Args, Debug, Clone, Copy)]
struct WindowArgs {
    /// Side of the centred square window.
    #[arg(long, default_value_t = 7)]
    side: usize,
    /// Use the origin as inner region instead of an empty one.
    #[arg(long)]
    origin_inside: bool,
    /// Fill of the inner boundary.
    #[arg(long, value_enum, default_value_t = Fill::Vacant)]
    inner: Fill,
    /// Fill outside the window.
    #[arg(long, value_enum, default_value_t = Fill::Vacant)]
    exterior: Fill,
}

impl WindowArgs {
    fn window(self) -> PolymerWindow {
        PolymerWindow { side: self.side, origin_inside: self.origin_inside, inner: self.inner, exterior: self.exterior }
    }

    fn record(self, m: RunManifest) -> RunManifest {
        m.param("side", self.side)
            .param("origin_inside", self.origin_inside)
            .param("inner", format!("{:?}", self.inner).to_lowercase())
            .param("exterior", format!("{:?}", self.exterior).to_lowercase())
    }
}

#[derive(Subcommand, Debug)]
enum PolymerCommand {
    /// Exact weight of every polymer up to a size at one density.
    Weights {
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value_t = 3)]
        max_size: usize,
        #[arg(long, default_value_t = 0.05)]
        p: f64,
    },
    /// Truncated convergence condition on a log-spaced grid.
    KpScan {
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value_t = 4)]
        truncation: usize,
        /// Largest density of the grid.
        #[arg(long, default_value_t = 0.01)]
        top: f64,
    },
    /// Weight bound over all polymers up to a size.
    BoundScan {
        #[command(flatten)]
        window: WindowArgs,
        #[arg(long, default_value_t = 6)]
        max_size: usize,
        #[arg(long, default_value = "0.05:0.95:0.05")]
        grid: String,
    },
}

#[derive(Subcommand, Debug)]
enum SimulateCommand {
    /// Empirical survival probability of the origin.
    Marginal {
        #[arg(long, default_value_t = 2)]
        d: usize,
        #[arg(long, default_value = "0.1:0.9:0.1")]
        grid: String,
        #[arg(long, default_value_t = 1_000_000)]
        samples: u64,
    },
    /// Disagreement of chains coupled under vacant and occupied boundaries.
    Coupled {
        #[arg(long, default_value_t = 0.95)]
        p: f64,
        #[arg(long, default_value_t = 6)]
        width: u32,
        #[arg(long, default_value_t = 200)]
        sweeps: usize,
    },
}

fn emit(dir: &Path, manifest: &RunManifest, tables: &[(&str, &Table)]) -> Result<()> {
    for (name, table) in tables {
        let path = write_table(dir, name, manifest, table)?;
        println!("wrote {}", path.display());
    }
    Ok(())
}

fn manifest(command: &str, seed: u64, outputs: &[&str]) -> RunManifest {
    outputs.iter().fold(RunManifest::new(command, seed), |m, o| m.output(o))
}

/// Runs the command; `Ok(false)` means a verification check failed.
fn run(cli: Cli) -> Result<bool> {
    let out = cli.out.as_path();
    let seed = cli.seed;
    match cli.command {
        Command::Thresholds { dmax } => {
            let table = commands::thresholds(dmax)?;
            let m = manifest("thresholds", seed, &["thresholds.csv"]).param("dmax", dmax);
            emit(out, &m, &[("thresholds.csv", &table)])?;
        }
        Command::TvCurves { step } => {
            let tv = commands::tv_curves(step)?;
            let m = manifest("tv-curves", seed, &["tv_curves.csv", "tv_census.csv", "tv_pairs.csv"])
                .param("step", step)
                .param("tolerance", commands::CURVE_TOLERANCE);
            emit(out, &m, &[("tv_curves.csv", &tv.curves), ("tv_census.csv", &tv.census), ("tv_pairs.csv", &tv.pairs)])?;
            println!(
                "{} classes, {} distinct curves on [0,1], {} on [{},1]",
                tv.classes.len(),
                tv.groups.len(),
                tv.groups_high.len(),
                commands::HIGH_DENSITY
            );
        }
        Command::BoxConditional { k, grid, center, annulus } => {
            let densities = parse_grid(&grid)?;
            let rows = commands::box_conditional(k, &densities, center, annulus)?;
            let name = format!("box_conditional_k{k}.csv");
            let m = manifest("box-conditional", seed, &[&name])
                .param("k", k)
                .param("grid", &grid)
                .param("center", format!("{center:?}").to_lowercase())
                .param("annulus", format!("{annulus:?}").to_lowercase());
            emit(out, &m, &[(&name, &commands::sweep_table(&rows))])?;
        }
        Command::Polymer(PolymerCommand::Weights { window, max_size, p }) => {
            let table = commands::polymer_weights(&window.window(), max_size, p)?;
            let m = window
                .record(manifest("polymer weights", seed, &["polymer_weights.csv"]))
                .param("max_size", max_size)
                .param("p", p);
            emit(out, &m, &[("polymer_weights.csv", &table)])?;
        }
        Command::Polymer(PolymerCommand::KpScan { window, truncation, top }) => {
            let ctx = window.window().context()?;
            let scan = commands::kp_scan(&ctx, truncation, &commands::kp_grid(top))?;
            let m = window
                .record(manifest("polymer kp-scan", seed, &["kp_scan.csv"]))
                .param("truncation", truncation)
                .param("top", top);
            emit(out, &m, &[("kp_scan.csv", &scan.table)])?;
            match scan.estimate {
                Some(p) => {
                    let (direct, ok) = commands::kp_certificate(&ctx, &scan.weighted, p, 4);
                    println!("truncated q1 estimate {p:.6e}; targets up to size 4 ({direct} direct): {ok}");
                }
                None => println!("condition fails on the whole grid"),
            }
        }
        Command::Polymer(PolymerCommand::BoundScan { window, max_size, grid }) => {
            let table = commands::bound_scan(&window.window(), max_size, &parse_grid(&grid)?)?;
            let m = window
                .record(manifest("polymer bound-scan", seed, &["bound_scan.csv"]))
                .param("max_size", max_size)
                .param("grid", &grid);
            emit(out, &m, &[("bound_scan.csv", &table)])?;
        }
        Command::Simulate(SimulateCommand::Marginal { d, grid, samples }) => {
            let table = commands::marginal_table(d, &parse_grid(&grid)?, samples, seed)?;
            let m = manifest("simulate marginal", seed, &["marginal.csv"])
                .param("d", d)
                .param("grid", &grid)
                .param("samples", samples);
            emit(out, &m, &[("marginal.csv", &table)])?;
        }
        Command::Simulate(SimulateCommand::Coupled { p, width, sweeps }) => {
            let table = commands::coupled_table(p, width, sweeps, seed)?;
            let m = manifest("simulate coupled", seed, &["coupled.csv"])
                .param("p", p)
                .param("width", width)
                .param("sweeps", sweeps);
            emit(out, &m, &[("coupled.csv", &table)])?;
        }
        Command::Verify { suite, samples, truncation } => {
            let opts = VerifyOptions { seed, samples, kp_truncation: truncation };
            let report = verify::run_suite(suite, &opts)?;
            for check in &report.checks {
                println!("{check}");
            }
            let name = format!("verify_{}.csv", suite.name());
            let m = manifest("verify", seed, &[&name])
                .param("suite", suite.name())
                .param("samples", samples)
                .param("truncation", truncation);
            emit(out, &m, &[(&name, &report.table())])?;
            let passed = report.passed();
            println!("{}: {}", suite.name(), if passed { "PASS" } else { "FAIL" });
            return Ok(passed);
        }
    }
    Ok(true)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = parallel::resolve_workers(cli.workers);
    let result = parallel::pool(workers).and_then(|pool| pool.install(|| run(cli)));
    if let Err(e) = &result {
        eprintln!("error: {e:#}");
    }
    ExitCode::from(thinlab::exit_code(&result))
}
