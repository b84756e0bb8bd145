//! Benchmark configuration and end-to-end runs.

use crate::diagnostics::{
    error_l1, error_relative, error_symmetric_difference, extract_psi, write_csv, write_vtk,
    write_vtk_psi, ErrorReport, SYM_DIFF_SUBDIV,
};
use crate::mesh::{build_cartesian, build_triangular, load_gmsh, Mesh};
use crate::quadrature::RuleChoice;
use crate::transport::{auto_betas, clamp_dt, ReinitFrequency, Solver, StepState, TransportConfig};
use crate::velocity::{initial_fields, BenchmarkCase, CaseId};
use crate::{Error, Result};
use serde::{Deserialize, Serialize};
use std::fmt::Write as _;
use std::path::PathBuf;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum MeshChoice {
    Cartesian,
    TriInternal,
    Msh(PathBuf),
}

impl From<MeshChoice> for String {
    fn from(m: MeshChoice) -> String {
        match m {
            MeshChoice::Cartesian => "cartesian".into(),
            MeshChoice::TriInternal => "tri-internal".into(),
            MeshChoice::Msh(p) => format!("msh:{}", p.display()),
        }
    }
}

impl TryFrom<String> for MeshChoice {
    type Error = String;
    fn try_from(s: String) -> std::result::Result<Self, String> {
        MeshChoice::parse(&s).map_err(|e| e.to_string())
    }
}

impl MeshChoice {
    pub fn parse(s: &str) -> Result<MeshChoice> {
        match s {
            "cartesian" => Ok(MeshChoice::Cartesian),
            "tri-internal" => Ok(MeshChoice::TriInternal),
            other => match other.strip_prefix("msh:") {
                Some(path) if !path.is_empty() => Ok(MeshChoice::Msh(PathBuf::from(path))),
                _ => Err(Error::Config(format!(
                    "unknown mesh choice '{other}' (expected cartesian|tri-internal|msh:PATH)"
                ))),
            },
        }
    }

    fn describe(&self) -> String {
        match self {
            MeshChoice::Cartesian => "cartesian".into(),
            MeshChoice::TriInternal => "tri-internal".into(),
            MeshChoice::Msh(_) => "msh".into(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ReinitMode {
    #[serde(rename = "per-substep")]
    PerSubstep,
    #[serde(rename = "per-step")]
    PerStep,
}

/// One benchmark run. The JSON config file mirrors these field names and
/// every field can also be set from a command-line flag.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    pub case: CaseId,
    pub mesh: MeshChoice,
    /// Resolution: Cartesian cells per unit edge, or boundary nodes per edge
    /// for the internal triangulator.
    pub n: usize,
    /// Courant number; default 0.25 in 2D and 0.1 in 3D.
    pub cfl: Option<f64>,
    /// Fixed steepness; default is the 6/delta rule per cell.
    pub beta: Option<f64>,
    /// Triangle quadrature points for the conservation solve: 6 or 12.
    pub gp: usize,
    /// Run duration in periods (revolutions for the rotating disk).
    pub periods: f64,
    pub reinit: ReinitMode,
    pub out: Option<PathBuf>,
    /// Snapshot cadence in steps; 0 disables snapshots.
    pub vtk_every: usize,
    pub max_dt: f64,
    /// Progress lines on stderr.
    pub verbose: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            case: CaseId::Zalesak,
            mesh: MeshChoice::Cartesian,
            n: 64,
            cfl: None,
            beta: None,
            gp: 6,
            periods: 1.0,
            reinit: ReinitMode::PerSubstep,
            out: None,
            vtk_every: 0,
            max_dt: 0.1,
            verbose: false,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::Config(format!("resolution n must be at least 2, got {}", self.n)));
        }
        if self.gp != 6 && self.gp != 12 {
            return Err(Error::Config(format!("gp must be 6 or 12, got {}", self.gp)));
        }
        if self.periods < 0.0 {
            return Err(Error::Config("periods must be nonnegative".into()));
        }
        if let Some(cfl) = self.cfl {
            if cfl <= 0.0 {
                return Err(Error::Config("cfl must be positive".into()));
            }
        }
        if let Some(beta) = self.beta {
            if beta <= 0.0 {
                return Err(Error::Config("beta must be positive".into()));
            }
        }
        if self.max_dt <= 0.0 {
            return Err(Error::Config("max_dt must be positive".into()));
        }
        let case = BenchmarkCase::new(self.case);
        if case.dim() == 3 && self.mesh != MeshChoice::Cartesian {
            return Err(Error::Config(format!(
                "case '{}' is 3D; only cartesian meshes are supported there",
                case.id.name()
            )));
        }
        Ok(())
    }

    fn rule(&self) -> RuleChoice {
        if self.gp == 12 {
            RuleChoice::Gp12Triangle
        } else {
            RuleChoice::Default
        }
    }

    pub fn build_mesh(&self) -> Result<Mesh> {
        let case = BenchmarkCase::new(self.case);
        match &self.mesh {
            MeshChoice::Cartesian => {
                build_cartesian(&case.domain_extents(), &case.mesh_counts(self.n))
            }
            MeshChoice::TriInternal => build_triangular(&case.domain_extents(), self.n),
            MeshChoice::Msh(path) => load_gmsh(path),
        }
    }
}

/// Everything a run produces, for callers that want more than the report.
pub struct RunOutput {
    pub report: ErrorReport,
    pub mesh: Mesh,
    pub state: StepState,
    pub exact_h: Vec<f64>,
    /// Per-step average Newton iteration counts.
    pub newton_step_avgs: Vec<f64>,
}

/// Execute one configured benchmark run and compute its error report
/// against the exact reference (the initial shape, which every benchmark
/// restores at full periods).
pub fn run(cfg: &RunConfig) -> Result<RunOutput> {
    cfg.validate()?;
    let case = BenchmarkCase::new(cfg.case);
    let mesh = cfg.build_mesh()?;
    let betas = match cfg.beta {
        Some(b) => vec![b; mesh.n_cells()],
        None => auto_betas(&mesh),
    };
    let tconfig = TransportConfig {
        cfl: cfg.cfl.unwrap_or_else(|| case.default_cfl()),
        max_dt: cfg.max_dt,
        reinit: match cfg.reinit {
            ReinitMode::PerSubstep => ReinitFrequency::EverySubstep,
            ReinitMode::PerStep => ReinitFrequency::OncePerStep,
        },
        rule: cfg.rule(),
    };

    if let Some(out) = &cfg.out {
        std::fs::create_dir_all(out)
            .map_err(|source| Error::Io { path: out.clone(), source })?;
    }

    let (h0, phi0) = initial_fields(&case, &mesh)?;
    let solver = Solver::new(&mesh, case, betas, tconfig);
    let mut state = StepState { t: 0.0, h_bar: h0.clone(), phi: phi0 };

    let total0: f64 = h0.iter().zip(&mesh.cells).map(|(h, c)| h * c.volume).sum();
    let t_end = cfg.periods * case.period();
    let dt0 = solver.compute_dt(0.0);

    let mut steps = 0usize;
    let mut max_drift = 0.0_f64;
    let mut clipped = 0.0_f64;
    let mut newton_step_avgs = Vec::new();
    let mut step_log = String::from("step,t,dt,total_vof,drift_rel,clipped_cum,newton_avg\n");

    while state.t < t_end - 1e-12 * t_end.max(1.0) {
        let dt = clamp_dt(dt0, state.t, t_end);
        if dt <= 0.0 {
            break;
        }
        let stats = solver.rk3_step(&mut state, dt)?;
        steps += 1;
        clipped += stats.clipped_mass;
        let total: f64 = state.h_bar.iter().zip(&mesh.cells).map(|(h, c)| h * c.volume).sum();
        let drift = ((total - total0) / total0).abs();
        max_drift = max_drift.max(drift);
        if stats.newton_solves > 0 {
            newton_step_avgs.push(stats.newton_avg());
        }
        let _ = writeln!(
            step_log,
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e},{:.6}",
            steps,
            state.t,
            dt,
            total,
            drift,
            clipped / total0,
            stats.newton_avg()
        );
        if cfg.verbose && steps % 200 == 0 {
            eprintln!(
                "[{}] step {steps}: t = {:.4}/{:.4}, drift = {:.2e}, newton = {:.2}",
                case.id.name(),
                state.t,
                t_end,
                drift,
                stats.newton_avg()
            );
        }
        if cfg.vtk_every > 0 && steps % cfg.vtk_every == 0 {
            if let Some(out) = &cfg.out {
                let path = out.join(format!("fields_{steps:06}.vtk"));
                write_vtk(&mesh, &[("vof", &state.h_bar), ("phi", &state.phi)], &path)?;
            }
        }
    }

    // Final reconstructions feed both the symmetric-difference metric and
    // the PSI output.
    let (polys, _, _) = solver.build_reconstructions(&state.h_bar, &state.phi)?;
    let (exact_h, _) = initial_fields(&case, &mesh)?;
    let e_l1 = error_l1(&state.h_bar, &exact_h, &mesh)?;
    let e_r = error_relative(&state.h_bar, &exact_h, &mesh)?;
    let sdf = move |p| case.initial_level_set(p);
    let e_sd =
        error_symmetric_difference(&state.h_bar, &polys, &sdf, &exact_h, &mesh, SYM_DIFF_SUBDIV)?;

    let (mut nmin, mut nmax, mut nsum) = (f64::INFINITY, 0.0_f64, 0.0_f64);
    for &a in &newton_step_avgs {
        nmin = nmin.min(a);
        nmax = nmax.max(a);
        nsum += a;
    }
    let report = ErrorReport {
        case: case.id.name().into(),
        mesh: cfg.mesh.describe(),
        n: cfg.n,
        cells: mesh.n_cells(),
        e_l1,
        e_r,
        e_sd,
        vof_drift: max_drift,
        clipped_mass: clipped / total0,
        newton_avg_iters: if newton_step_avgs.is_empty() {
            0.0
        } else {
            nsum / newton_step_avgs.len() as f64
        },
        newton_avg_min: if newton_step_avgs.is_empty() { 0.0 } else { nmin },
        newton_avg_max: nmax,
        steps,
    };

    if let Some(out) = &cfg.out {
        let steps_path = out.join("steps.csv");
        std::fs::write(&steps_path, step_log)
            .map_err(|source| Error::Io { path: steps_path, source })?;
        write_csv(std::slice::from_ref(&report), &out.join("report.csv"))?;
        write_vtk(&mesh, &[("vof", &state.h_bar), ("phi", &state.phi)], &out.join("fields_final.vtk"))?;
        write_vtk_psi(&extract_psi(&polys, &mesh, 5), &out.join("psi_final.vtk"))?;
    }

    Ok(RunOutput { report, mesh, state, exact_h, newton_step_avgs })
}

/// Run the same configuration over several resolutions and tabulate errors
/// with pairwise convergence orders.
pub fn convergence_study(cfg: &RunConfig, resolutions: &[usize]) -> Result<Vec<ErrorReport>> {
    if resolutions.len() < 2 {
        return Err(Error::Config("a convergence study needs at least 2 resolutions".into()));
    }
    let mut reports = Vec::with_capacity(resolutions.len());
    for &n in resolutions {
        let mut sub = cfg.clone();
        sub.n = n;
        sub.out = cfg.out.as_ref().map(|o| o.join(format!("n{n}")));
        if cfg.verbose {
            eprintln!("[study] {} at n = {n}", cfg.case.name());
        }
        reports.push(run(&sub)?.report);
    }
    if let Some(out) = &cfg.out {
        write_csv(&reports, &out.join("study.csv"))?;
    }
    Ok(reports)
}
