mod budget;
mod output;

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use misorate::channel::{rate_vector, CovarianceSet, MisoNetwork};
use misorate::region::{
    project_2d, projection_csv, region_csv, trace_region, ProjectionMode, RegionGrid, TraceOptions,
};
use misorate::solver::{solve_user, UserSolve};
use misorate::verify::{run_selected, SuiteKind, Tolerances};
use output::{BudgetEntry, SolveOutput, UserOutput, VerifyOutput};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

/// Achievable-rate region tool for multi-antenna interference networks with
/// interference-as-noise receivers.
#[derive(Parser)]
#[command(name = "misorate", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve every transmitter's covariance program under fixed caps and
    /// certify the solutions
    Solve {
        /// Network description (JSON)
        #[arg(long)]
        network: PathBuf,
        /// Interference caps: `inf` or `z12=0.5,z21=inf,...`
        #[arg(long, default_value = "inf")]
        budget: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Worker cap (0 = one per core)
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Sweep interference caps and emit the Pareto frontier (plus 2-D
    /// projections for three-user networks)
    Trace {
        #[arg(long)]
        network: PathBuf,
        /// Log-spaced cap samples per pair (plus exact 0 and inf)
        #[arg(long, default_value_t = 8)]
        grid: usize,
        /// Cap-tuple sample budget for more than three users
        #[arg(long, default_value_t = 1024)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, default_value_t = 0)]
        threads: usize,
    },
    /// Run the randomized self-check suites
    Verify {
        /// One of: rank1, lemma2, reduction, inertia, sandwich, monotonicity
        /// (default: all)
        #[arg(long)]
        suite: Option<String>,
        /// Trials per suite (default: per-suite builtin)
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long, hide = true)]
        inject_fault: bool,
    },
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(err)
            if matches!(
                err.kind(),
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion
            ) =>
        {
            print!("{err}");
            return ExitCode::SUCCESS;
        }
        Err(err) => {
            eprint!("{err}");
            return ExitCode::from(1);
        }
    };
    let outcome = match cli.command {
        Command::Solve {
            network,
            budget,
            seed,
            out,
            threads,
        } => cmd_solve(&network, &budget, seed, &out, threads),
        Command::Trace {
            network,
            grid,
            samples,
            seed,
            out,
            threads,
        } => cmd_trace(&network, grid, samples, seed, &out, threads),
        Command::Verify {
            suite,
            trials,
            seed,
            out,
            inject_fault,
        } => cmd_verify(suite.as_deref(), trials, seed, &out, inject_fault),
    };
    match outcome {
        Ok(code) => code,
        Err(message) => {
            eprintln!("error: {message}");
            ExitCode::from(1)
        }
    }
}

fn load_network(path: &Path) -> Result<MisoNetwork, String> {
    MisoNetwork::load(path).map_err(|e| format!("cannot load network {}: {e}", path.display()))
}

fn write_file(path: &Path, contents: &str) -> Result<(), String> {
    std::fs::write(path, contents).map_err(|e| format!("cannot write {}: {e}", path.display()))?;
    println!("wrote {}", path.display());
    Ok(())
}

fn cmd_solve(
    network: &Path,
    budget_spec: &str,
    seed: u64,
    out: &Path,
    threads: usize,
) -> Result<ExitCode, String> {
    let net = load_network(network)?;
    let caps = budget::parse_budget(budget_spec, net.m())?;

    let users: Vec<usize> = (0..net.m()).collect();
    let workers = if threads == 0 {
        std::thread::available_parallelism()
            .map(|n| n.get())
            .unwrap_or(1)
    } else {
        threads
    }
    .min(net.m());
    let mut solves: Vec<Option<UserSolve>> = (0..net.m()).map(|_| None).collect();
    std::thread::scope(|scope| {
        let chunk = users.len().div_ceil(workers);
        for (inputs, outputs) in users.chunks(chunk).zip(solves.chunks_mut(chunk)) {
            let net = &net;
            let caps = &caps;
            scope.spawn(move || {
                for (&user, slot) in inputs.iter().zip(outputs.iter_mut()) {
                    *slot = solve_user(net, user, caps).ok();
                }
            });
        }
    });
    let solves: Vec<UserSolve> = solves
        .into_iter()
        .map(|s| s.ok_or_else(|| "solver failed".to_string()))
        .collect::<Result<_, _>>()?;

    let beams: Vec<_> = solves.iter().map(|s| s.beamformer.clone()).collect();
    let cov = CovarianceSet::from_beamformers(&net, &beams).map_err(|e| e.to_string())?;
    let realized = rate_vector(&net, &cov).map_err(|e| e.to_string())?;
    let all_pass = solves.iter().all(|s| s.certificate.passed);

    let mut budget_entries = Vec::new();
    for tx in 0..net.m() {
        for rx in 0..net.m() {
            if tx != rx && caps.cap(tx, rx).is_finite() {
                budget_entries.push(BudgetEntry {
                    tx: tx + 1,
                    rx: rx + 1,
                    cap: caps.cap(tx, rx),
                });
            }
        }
    }
    let doc = SolveOutput {
        network: network.display().to_string(),
        seed,
        budget: budget_entries,
        rates_single_user: solves.iter().map(|s| s.rate_single_user()).collect(),
        rates_realized: realized.rates.clone(),
        users: solves.iter().map(UserOutput::from_solve).collect(),
        all_certificates_pass: all_pass,
    };

    std::fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let path = out.join("solve.json");
    let json = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
    write_file(&path, &format!("{json}\n"))?;

    for solve in &solves {
        println!(
            "user {}: rate {:.4} bits (single-user), signal {:.6}, certificate {}",
            solve.user + 1,
            solve.rate_single_user(),
            solve.signal_power,
            solve.certificate.verdict()
        );
    }
    Ok(if all_pass {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}

fn cmd_trace(
    network: &Path,
    grid_size: usize,
    samples: usize,
    seed: u64,
    out: &Path,
    threads: usize,
) -> Result<ExitCode, String> {
    if grid_size < 2 {
        return Err("grid must be at least 2".into());
    }
    let net = load_network(network)?;
    let grid = RegionGrid::log_spaced(&net, grid_size);
    let opts = TraceOptions {
        threads,
        sample_budget: samples,
        seed,
        silenced: None,
    };
    let set = trace_region(&net, &grid, &opts).map_err(|e| e.to_string())?;

    std::fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    write_file(&out.join("region.csv"), &region_csv(&net, &set))?;

    if net.m() == 3 {
        for user in 0..3 {
            for (mode, tag) in [
                (ProjectionMode::Inactive, "inactive"),
                (ProjectionMode::AtMax, "atmax"),
            ] {
                let proj =
                    project_2d(&net, &grid, &set, user, mode, &opts).map_err(|e| e.to_string())?;
                if let Some(warning) = &proj.warning {
                    eprintln!("warning: {warning}");
                }
                let name = format!("projection_user{}_{tag}.csv", user + 1);
                write_file(&out.join(name), &projection_csv(&proj))?;
            }
        }
    }
    println!(
        "traced {} Pareto points over a grid of {} cap samples per pair (seed {seed})",
        set.points.len(),
        grid_size + 2
    );
    Ok(ExitCode::SUCCESS)
}

fn cmd_verify(
    suite: Option<&str>,
    trials: Option<usize>,
    seed: u64,
    out: &Path,
    inject_fault: bool,
) -> Result<ExitCode, String> {
    let suites: Vec<SuiteKind> = match suite {
        None => SuiteKind::ALL.to_vec(),
        Some(name) => {
            vec![SuiteKind::parse(name).ok_or_else(|| format!("unknown suite '{name}'"))?]
        }
    };
    let tolerances = if inject_fault {
        Tolerances::impossible()
    } else {
        Tolerances::default()
    };
    let reports = run_selected(&suites, trials, seed, tolerances).map_err(|e| e.to_string())?;
    for report in &reports {
        println!(
            "[{}] {}: {} trials, {} failures, worst margin {:.3e}",
            if report.passed { "PASS" } else { "FAIL" },
            report.name,
            report.trials,
            report.failures,
            report.worst
        );
    }
    let all_passed = reports.iter().all(|r| r.passed);
    let doc = VerifyOutput {
        seed,
        trials_override: trials,
        suites: reports,
        all_passed,
    };
    std::fs::create_dir_all(out).map_err(|e| format!("cannot create {}: {e}", out.display()))?;
    let json = serde_json::to_string_pretty(&doc).map_err(|e| e.to_string())?;
    write_file(&out.join("verify.json"), &format!("{json}\n"))?;
    Ok(if all_passed {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    })
}
