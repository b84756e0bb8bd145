//! Benchmark CLI: single runs and convergence studies.

use clap::Parser;
use std::path::PathBuf;
use thinc_scaling::cli::{convergence_study, run, MeshChoice, ReinitMode, RunConfig};
use thinc_scaling::velocity::CaseId;
use thinc_scaling::{Error, Result};

#[derive(Parser, Debug)]
#[command(
    name = "thinc-bench",
    about = "Interface-capturing advection benchmarks (VOF + level set via tanh reconstructions)",
    after_help = "Every flag overrides the matching field of the JSON config given by --config."
)]
struct Args {
    /// JSON config file mirroring the flag names.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Benchmark case: zalesak | vortex2d | deform3d | shear3d.
    #[arg(long)]
    case: Option<String>,
    /// Mesh kind: cartesian | tri-internal | msh:PATH.
    #[arg(long)]
    mesh: Option<String>,
    /// Resolution (cells per unit edge, or boundary nodes for tri-internal).
    #[arg(long)]
    n: Option<usize>,
    /// Courant number (default 0.25 in 2D, 0.1 in 3D).
    #[arg(long)]
    cfl: Option<f64>,
    /// Triangle quadrature points for conservation solves: 6 | 12.
    #[arg(long)]
    gp: Option<usize>,
    /// Steepness: "auto" for the 6/delta rule, or a fixed number.
    #[arg(long)]
    beta: Option<String>,
    /// Run length in periods (revolutions for zalesak).
    #[arg(long)]
    periods: Option<f64>,
    /// Reinitialization cadence: per-substep | per-step.
    #[arg(long)]
    reinit: Option<String>,
    /// Output directory for CSV and VTK artifacts.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Field snapshot cadence in steps (0 = none).
    #[arg(long = "vtk-every")]
    vtk_every: Option<usize>,
    /// Comma-separated resolutions for a convergence study, e.g. "32,64,128".
    #[arg(long)]
    study: Option<String>,
    /// Suppress progress output.
    #[arg(long)]
    quiet: bool,
}

fn build_config(args: &Args) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .map_err(|source| Error::Io { path: path.clone(), source })?;
            serde_json::from_str::<RunConfig>(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?
        }
        None => RunConfig::default(),
    };
    if let Some(case) = &args.case {
        cfg.case = CaseId::parse(case)?;
    }
    if let Some(mesh) = &args.mesh {
        cfg.mesh = MeshChoice::parse(mesh)?;
    }
    if let Some(n) = args.n {
        cfg.n = n;
    }
    if let Some(cfl) = args.cfl {
        cfg.cfl = Some(cfl);
    }
    if let Some(gp) = args.gp {
        cfg.gp = gp;
    }
    if let Some(beta) = &args.beta {
        cfg.beta = match beta.as_str() {
            "auto" => None,
            value => Some(value.parse().map_err(|_| {
                Error::Config(format!("--beta expects 'auto' or a number, got '{value}'"))
            })?),
        };
    }
    if let Some(periods) = args.periods {
        cfg.periods = periods;
    }
    if let Some(reinit) = &args.reinit {
        cfg.reinit = match reinit.as_str() {
            "per-substep" => ReinitMode::PerSubstep,
            "per-step" => ReinitMode::PerStep,
            other => {
                return Err(Error::Config(format!(
                    "unknown reinit cadence '{other}' (expected per-substep|per-step)"
                )))
            }
        };
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(k) = args.vtk_every {
        cfg.vtk_every = k;
    }
    cfg.verbose = !args.quiet;
    Ok(cfg)
}

fn main_inner(args: &Args) -> Result<()> {
    let cfg = build_config(args)?;
    match &args.study {
        Some(list) => {
            let resolutions: Vec<usize> = list
                .split(',')
                .map(|tok| {
                    tok.trim().parse::<usize>().map_err(|_| {
                        Error::Config(format!(
                            "--study expects comma-separated integers, got '{tok}'"
                        ))
                    })
                })
                .collect::<Result<_>>()?;
            let reports = convergence_study(&cfg, &resolutions)?;
            println!(
                "case      mesh         n     cells      E(L1)      E_r        E_sd       order"
            );
            for (i, r) in reports.iter().enumerate() {
                let order = if i > 0 {
                    format!(
                        "{:.2}",
                        thinc_scaling::diagnostics::convergence_order(
                            reports[i - 1].e_l1,
                            r.e_l1,
                            reports[i - 1].n,
                            r.n
                        )
                    )
                } else {
                    "-".into()
                };
                println!(
                    "{:<9} {:<12} {:<5} {:<10} {:.4e} {:.4e} {:.4e} {order}",
                    r.case, r.mesh, r.n, r.cells, r.e_l1, r.e_r, r.e_sd
                );
            }
        }
        None => {
            let out = run(&cfg)?;
            let r = &out.report;
            println!(
                "case={} mesh={} n={} cells={} steps={}",
                r.case, r.mesh, r.n, r.cells, r.steps
            );
            println!("E(L1)={:.6e} E_r={:.6e} E_sd={:.6e}", r.e_l1, r.e_r, r.e_sd);
            println!(
                "vof_drift={:.3e} clipped_mass={:.3e} newton_iters=[{:.2},{:.2},{:.2}]",
                r.vof_drift, r.clipped_mass, r.newton_avg_min, r.newton_avg_iters, r.newton_avg_max
            );
        }
    }
    Ok(())
}

fn main() {
    let args = Args::parse();
    if let Err(err) = main_inner(&args) {
        eprintln!("{}: {err}", err.category());
        std::process::exit(1);
    }
}
