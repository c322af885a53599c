use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use padelab::pade::{pade_pair, ResidualOrder};
use padelab::potential::{energy_oracle, solve_equilibrium, IntervalSystem};

use padelab_cli::config::ExperimentConfig;
use padelab_cli::runner::{reference_system, run_experiment, RunError};

#[derive(Parser)]
#[command(name = "padelab", about = "Diagonal Pade sweeps for algebraic functions")]
struct Cli {
    /// Emit machine-readable JSON instead of text.
    #[arg(long, global = true)]
    json: bool,
    /// Size of the worker thread pool (default: all cores).
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Cache directory for germs and Pade pairs.
    #[arg(long, global = true)]
    cache: Option<PathBuf>,
    /// Output directory for sweep artifacts.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the Laurent germ at infinity of the configured function.
    Germ {
        #[arg(long)]
        config: PathBuf,
        /// Series order (coefficients c_0 .. c_order).
        #[arg(long)]
        order: usize,
    },
    /// Compute one diagonal Pade pair and print its coefficients.
    Pade {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        n: usize,
    },
    /// Solve the equilibrium problem for the configured compact (or an
    /// explicit endpoint list) and print capacity, Robin constant, masses.
    Equilibrium {
        #[arg(long)]
        config: Option<PathBuf>,
        /// Comma-separated endpoints, e.g. "-1,1" or "-2,-1,1,2".
        #[arg(long, allow_hyphen_values = true)]
        endpoints: Option<String>,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
    },
    /// Evaluate the Green's function at points "re,im;re,im;...".
    Green {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        endpoints: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        points: String,
        #[arg(long, default_value_t = 64)]
        nodes: usize,
    },
    /// Run the full convergence sweep and write the report files.
    Verify {
        #[arg(long)]
        config: PathBuf,
        /// Check the limit-law thresholds; exit 1 on violation.
        #[arg(long)]
        assert: bool,
        /// Tolerance scale for --assert (eg 1.5 for spread-out compacts).
        #[arg(long, default_value_t = 1.0)]
        relax: f64,
    },
    /// Independent energy-minimization estimate of capacity.
    Oracle {
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long, allow_hyphen_values = true)]
        endpoints: Option<String>,
        #[arg(long, default_value_t = 400)]
        grid: usize,
    },
}

fn parse_endpoints(s: &str) -> Result<IntervalSystem, RunError> {
    let vals: Result<Vec<f64>, _> = s.split(',').map(|t| t.trim().parse::<f64>()).collect();
    let vals = vals.map_err(|e| RunError::Numerical(format!("bad endpoint list: {e}")))?;
    IntervalSystem::new(vals).map_err(|e| RunError::Numerical(e.to_string()))
}

fn system_from(
    config: &Option<PathBuf>,
    endpoints: &Option<String>,
) -> Result<IntervalSystem, RunError> {
    match (config, endpoints) {
        (_, Some(e)) => parse_endpoints(e),
        (Some(path), None) => {
            let cfg = ExperimentConfig::load(path)?;
            Ok(reference_system(&cfg)?.0)
        }
        (None, None) => Err(RunError::Config(
            padelab_cli::config::ConfigError::Invalid(
                "need --config or --endpoints".into(),
            ),
        )),
    }
}

fn coeff_json(c: &padelab::bigseries::BigComplex) -> serde_json::Value {
    let (re, im) = c.to_decimal_parts();
    serde_json::json!({ "re": re, "im": im })
}

fn run(cli: &Cli) -> Result<(), RunError> {
    match &cli.cmd {
        Cmd::Germ { config, order } => {
            let cfg = ExperimentConfig::load(config)?;
            let germ = cfg
                .spec
                .germ_at_infinity(*order, cfg.precision_bits)
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            if cli.json {
                let cs: Vec<_> = germ.coeffs().iter().map(coeff_json).collect();
                println!(
                    "{}",
                    serde_json::json!({ "prec": germ.prec(), "coeffs": cs })
                );
            } else {
                for (k, c) in germ.coeffs().iter().enumerate() {
                    let (re, im) = c.to_decimal_parts();
                    println!("c_{k} = {re} + {im} i");
                }
            }
        }
        Cmd::Pade { config, n } => {
            let cfg = ExperimentConfig::load(config)?;
            let germ = cfg
                .spec
                .germ_at_infinity(2 * n, cfg.precision_bits)
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            let pair = pade_pair(&germ, *n).map_err(|e| RunError::Numerical(e.to_string()))?;
            let res = pair.residual_order(&germ);
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "n": pair.n,
                        "k_n": pair.denominator_degree(),
                        "unique": pair.unique,
                        "rank_margin": pair.rank_margin,
                        "p": pair.p.iter().map(coeff_json).collect::<Vec<_>>(),
                        "q": pair.q.iter().map(coeff_json).collect::<Vec<_>>(),
                        "residual": format!("{res:?}"),
                    })
                );
            } else {
                println!("[{n}/{n}] pade pair, k_n = {}", pair.denominator_degree());
                println!("unique: {}, rank margin: {:.1} bits", pair.unique, pair.rank_margin);
                for (k, c) in pair.q.iter().enumerate() {
                    let (re, im) = c.to_decimal_parts();
                    println!("q_{k} = {re} + {im} i");
                }
                for (k, c) in pair.p.iter().enumerate() {
                    let (re, im) = c.to_decimal_parts();
                    println!("p_{k} = {re} + {im} i");
                }
                match res {
                    ResidualOrder::Exact => println!("residual: exact (R_n = 0)"),
                    ResidualOrder::Finite { order, magnitude } => {
                        println!("residual: first nonzero at z^-{order}, |.| = {magnitude:.3e}")
                    }
                }
            }
        }
        Cmd::Equilibrium {
            config,
            endpoints,
            nodes,
        } => {
            let system = system_from(config, endpoints)?;
            let eq = solve_equilibrium(&system, *nodes)
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            if cli.json {
                println!("{}", eq.to_json());
            } else {
                println!("capacity        = {:.15}", eq.capacity());
                println!("robin constant  = {:.15}", eq.gamma());
                println!("frostman dev    = {:.3e}", eq.frostman_deviation());
                for (i, m) in eq.interval_mass().iter().enumerate() {
                    println!("mass interval {i} = {m:.15}");
                }
            }
        }
        Cmd::Green {
            config,
            endpoints,
            points,
            nodes,
        } => {
            let system = system_from(config, endpoints)?;
            let eq = solve_equilibrium(&system, *nodes)
                .map_err(|e| RunError::Numerical(e.to_string()))?;
            let mut vals = Vec::new();
            for part in points.split(';').filter(|p| !p.trim().is_empty()) {
                let mut it = part.split(',');
                let re: f64 = it
                    .next()
                    .and_then(|t| t.trim().parse().ok())
                    .ok_or_else(|| RunError::Numerical(format!("bad point {part:?}")))?;
                let im: f64 = it
                    .next()
                    .map(|t| t.trim().parse())
                    .transpose()
                    .map_err(|e| RunError::Numerical(format!("bad point {part:?}: {e}")))?
                    .unwrap_or(0.0);
                vals.push((re, im, eq.green_f64(re, im)));
            }
            if cli.json {
                let arr: Vec<_> = vals
                    .iter()
                    .map(|(re, im, g)| serde_json::json!({"re": re, "im": im, "g": g}))
                    .collect();
                println!("{}", serde_json::Value::Array(arr));
            } else {
                for (re, im, g) in vals {
                    println!("g({re}, {im}) = {g:.15}");
                }
            }
        }
        Cmd::Verify {
            config,
            assert,
            relax,
        } => {
            let cfg = ExperimentConfig::load(config)?;
            let out_dir = cli
                .out
                .clone()
                .unwrap_or_else(|| PathBuf::from(format!("padelab-out-{}", &cfg.hash()[..12])));
            let outcome = run_experiment(
                &cfg,
                &out_dir,
                cli.cache.as_deref(),
                assert.then_some(*relax),
            )?;
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "out_dir": outcome.out_dir,
                        "rows": outcome.report.rows.len(),
                        "files": outcome.files.iter().map(|(n, h)| {
                            serde_json::json!({"name": n, "sha256": h})
                        }).collect::<Vec<_>>(),
                        "assertion_failures": outcome.assertion_failures,
                    })
                );
            } else {
                println!(
                    "sweep complete: {} rows, artifacts in {}",
                    outcome.report.rows.len(),
                    outcome.out_dir.display()
                );
                for f in &outcome.assertion_failures {
                    eprintln!("ASSERT FAIL: {f}");
                }
            }
            if !outcome.assertion_failures.is_empty() {
                std::process::exit(1);
            }
        }
        Cmd::Oracle {
            config,
            endpoints,
            grid,
        } => {
            let system = system_from(config, endpoints)?;
            let oracle =
                energy_oracle(&system, *grid).map_err(|e| RunError::Numerical(e.to_string()))?;
            if cli.json {
                println!(
                    "{}",
                    serde_json::json!({
                        "gamma_hat": oracle.gamma_hat,
                        "capacity_hat": oracle.capacity_hat,
                        "converged": oracle.converged,
                        "iterations": oracle.iterations,
                    })
                );
            } else {
                println!("gamma_hat    = {:.8}", oracle.gamma_hat);
                println!("capacity_hat = {:.8}", oracle.capacity_hat);
                println!(
                    "converged    = {} ({} iterations)",
                    oracle.converged, oracle.iterations
                );
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(w) = cli.workers {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(w).build_global();
    }
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
