//! Command-line front end: mesh generation, minimization, diagnostics,
//! oracles, level-curve and ellipticity studies.
//!
//! Exit codes: 0 success, 2 validation error, 3 numerical failure. Errors are
//! also emitted as machine-readable JSON on stderr. All randomness flows from
//! a single --seed through named substreams, and artifacts are byte-identical
//! across reruns and thread counts.

mod commands;
mod config;

use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "conformal-lab", version, about = "Conformal energy minimization on the disk")]
struct Cli {
    /// Worker-thread cap (fallback: env CONFORMAL_LAB_THREADS, then all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// Config file with key=value lines; explicit flags override it.
    #[arg(long, global = true)]
    config: Option<std::path::PathBuf>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Build a disk mesh and write it to a run directory.
    Mesh {
        #[arg(long)]
        level: Option<u32>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Minimize the conformal energy for a boundary homeomorphism.
    Minimize {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        level: Option<u32>,
        /// Boundary spec: sine:eps=0.3,m=1 | rot:alpha=0.7 | mobius:a=0.3+0.1i | id
        #[arg(long)]
        boundary: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        #[arg(long)]
        restarts: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long = "jac-floor")]
        jac_floor: Option<f64>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Run stationarity / Hopf / Beltrami diagnostics on a finished run.
    Diagnose {
        #[arg(long)]
        run: std::path::PathBuf,
        /// Comma list from: inner,weak15,weak18,hopf,beltrami
        #[arg(long)]
        tests: Option<String>,
        #[arg(long = "n-fields")]
        n_fields: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        delta: Option<f64>,
        #[arg(long = "grad-bound")]
        grad_bound: Option<f64>,
        #[arg(long = "k-convention")]
        k_convention: Option<String>,
        /// Also dump (barycenter, Re Phi, Im Phi) rows next to the report.
        #[arg(long = "hopf-csv", default_value_t = false)]
        hopf_csv: bool,
    },
    /// Sample a level curve y = A_k(x) to CSV.
    Levelcurve {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        k: Option<f64>,
        #[arg(long = "x-min")]
        x_min: Option<f64>,
        #[arg(long = "x-max")]
        x_max: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Seeded sweep of the Beltrami ellipticity bounds.
    Ellipticity {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        n: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Sample a reference map (fem | poisson | mobius | rotation | linear).
    Oracle {
        #[arg(long)]
        kind: String,
        #[arg(long)]
        boundary: Option<String>,
        #[arg(long)]
        level: Option<u32>,
        #[arg(long = "n-quad")]
        n_quad: Option<usize>,
        /// Moebius / linear parameter a (complex, e.g. 0.3+0.1i).
        #[arg(long)]
        a: Option<String>,
        #[arg(long)]
        alpha: Option<f64>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
    /// Duality diagnostics E*_A(h) vs E_A(h^{-1}) for a run or map file.
    Duality {
        #[arg(long)]
        run: Option<std::path::PathBuf>,
        #[arg(long)]
        map: Option<std::path::PathBuf>,
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        level: Option<u32>,
    },
    /// Pipeline: minimize, diagnose, duality over one or more levels.
    All {
        #[arg(long)]
        p: Option<f64>,
        #[arg(long)]
        boundary: Option<String>,
        /// Comma list of refinement levels, e.g. 4,5,6 (alias: --level).
        #[arg(long, alias = "level")]
        levels: Option<String>,
        #[arg(long)]
        tol: Option<f64>,
        #[arg(long = "max-iter")]
        max_iter: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: std::path::PathBuf,
    },
}

fn main() {
    let cli = Cli::parse();
    let cfg = match config::ConfigFile::load(cli.config.as_deref()) {
        Ok(c) => c,
        Err(e) => exit_with(&e),
    };
    let threads = cli
        .threads
        .or_else(|| cfg.get_parse::<usize>("threads"))
        .or_else(|| std::env::var("CONFORMAL_LAB_THREADS").ok().and_then(|v| v.parse().ok()));
    if let Some(n) = threads {
        // Ignore the error if a pool already exists (repeat calls in tests).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let threads_used = threads.unwrap_or(0);

    let result = match cli.cmd {
        Cmd::Mesh { level, out } => commands::mesh(&cfg, level, &out, threads_used),
        Cmd::Minimize { p, level, boundary, tol, max_iter, restarts, seed, jac_floor, out } => {
            commands::minimize_cmd(
                &cfg,
                commands::MinimizeArgs {
                    p,
                    level,
                    boundary,
                    tol,
                    max_iter,
                    restarts,
                    seed,
                    jac_floor,
                },
                &out,
                threads_used,
            )
        }
        Cmd::Diagnose { run, tests, n_fields, seed, delta, grad_bound, k_convention, hopf_csv } => {
            commands::diagnose(
                &cfg,
                &run,
                commands::DiagnoseArgs { tests, n_fields, seed, delta, grad_bound, k_convention, hopf_csv },
            )
        }
        Cmd::Levelcurve { p, k, x_min, x_max, n, out } => {
            commands::levelcurve(&cfg, p, k, x_min, x_max, n, &out)
        }
        Cmd::Ellipticity { p, n, seed, out } => commands::ellipticity(&cfg, p, n, seed, &out),
        Cmd::Oracle { kind, boundary, level, n_quad, a, alpha, out } => {
            commands::oracle(&cfg, &kind, boundary, level, n_quad, a, alpha, &out)
        }
        Cmd::Duality { run, map, p, level } => commands::duality(&cfg, run, map, p, level),
        Cmd::All { p, boundary, levels, tol, max_iter, seed, out } => commands::all_pipeline(
            &cfg,
            commands::AllArgs { p, boundary, levels, tol, max_iter, seed },
            &out,
            threads_used,
        ),
    };
    if let Err(e) = result {
        exit_with(&e);
    }
}

fn exit_with(e: &conformal_lab::Error) -> ! {
    let kind = if e.is_validation() { "validation" } else { "numerical" };
    eprintln!(
        "{}",
        serde_json::json!({ "error": kind, "message": e.to_string() })
    );
    std::process::exit(if e.is_validation() { 2 } else { 3 });
}
