//! Experiment driver: builds problems, runs the solver for every configured
//! smoother and collects report rows.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use q2q1_amg::diagnostics::{
    build_mac1d, infsup_estimate, projected_mac_schur, second_eigenvector, sign_changes, VelocityPlacement,
};
use q2q1_amg::fem::{
    assemble_mass_matrices, assemble_oseen, build_mesh, default_boundary_condition, picard_solve, Domain, DirectSolver,
    LinearSolver, ProblemSpec,
};
use q2q1_amg::hierarchy::{setup_hierarchy_from_parts, AmgSolver, FineLevel, Hierarchy, HierarchyParams, TransferMode};
use serde::Serialize;

use crate::config::{PicardSolver, ProblemSource, Resolved, TransferChoice};
use crate::files::{create_dir, export_problem, write_file, write_matrix, LoadedProblem};
use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Mode {
    Stokes,
    NavierStokes,
    Tau1Sweep,
    Infsup,
    Mac1d,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Stokes => "stokes",
            Mode::NavierStokes => "navier-stokes",
            Mode::Tau1Sweep => "tau1-sweep",
            Mode::Infsup => "infsup",
            Mode::Mac1d => "mac1d",
        }
    }

    fn navier(self) -> bool {
        self == Mode::NavierStokes
    }
}

#[derive(Debug, Clone, Default)]
pub struct Options {
    pub out: Option<PathBuf>,
    pub dump_matrices: bool,
    pub dump_splitting: bool,
}

/// One solver run.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub problem: String,
    pub refinement: Option<usize>,
    pub tau1: f64,
    pub smoother: String,
    pub dofs: usize,
    pub complexity: f64,
    pub levels: usize,
    pub iterations: usize,
    pub converged: bool,
    pub relative_residual: f64,
    pub picard_steps: Option<usize>,
    pub setup_s: f64,
    pub solve_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct InfSupRow {
    pub problem: String,
    pub refinement: Option<usize>,
    pub level: usize,
    pub rows: usize,
    pub cols: usize,
    pub sigma_min: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MacRow {
    pub placement: String,
    pub n: usize,
    /// Interior row of `4Ŝ` around the middle pressure.
    pub interior_stencil: String,
    /// Second-smallest eigenvalue of `S`; `sign_changes` counts its eigenvector.
    pub eigenvalue: f64,
    pub sign_changes: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Rows {
    Runs(Vec<RunRow>),
    InfSup(Vec<InfSupRow>),
    Mac(Vec<MacRow>),
}

#[derive(Debug, Clone)]
pub struct Report {
    pub mode: Mode,
    pub rows: Rows,
    pub max_iterations: usize,
    /// Files written besides the report itself.
    pub files: Vec<PathBuf>,
}

fn csv_of<T: Serialize>(rows: &[T]) -> Result<String, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| CliError::Inconsistent(e.to_string()))?;
    }
    let bytes = w.into_inner().map_err(|e| CliError::Inconsistent(e.to_string()))?;
    Ok(String::from_utf8(bytes).expect("csv output is utf-8"))
}

fn aligned(header: &[&str], rows: &[Vec<String>]) -> String {
    let mut width: Vec<usize> = header.iter().map(|h| h.chars().count()).collect();
    for r in rows {
        for (w, c) in width.iter_mut().zip(r) {
            *w = (*w).max(c.chars().count());
        }
    }
    let mut s = String::new();
    let line = |s: &mut String, cells: &mut dyn Iterator<Item = &str>| {
        let parts: Vec<String> = cells.zip(&width).map(|(c, w)| format!("{c:>w$}")).collect();
        let _ = writeln!(s, "{}", parts.join("  ").trim_end());
    };
    line(&mut s, &mut header.iter().copied());
    let total = width.iter().sum::<usize>() + 2 * (width.len() - 1);
    let _ = writeln!(s, "{}", "-".repeat(total));
    for r in rows {
        line(&mut s, &mut r.iter().map(String::as_str));
    }
    s
}

impl Report {
    pub fn csv(&self) -> Result<String, CliError> {
        match &self.rows {
            Rows::Runs(r) => csv_of(r),
            Rows::InfSup(r) => csv_of(r),
            Rows::Mac(r) => csv_of(r),
        }
    }

    /// Aligned plain-text table. Runs that did not converge show `<max>+`.
    pub fn table(&self) -> String {
        match &self.rows {
            Rows::Runs(runs) => {
                let sweep = self.mode == Mode::Tau1Sweep;
                let mut header = vec!["Problem", "Smoother"];
                if sweep {
                    header.push("tau1");
                }
                header.extend(["Dofs", "Complexity", "l_max", "Its", "Setup", "Solve"]);
                let rows: Vec<Vec<String>> = runs
                    .iter()
                    .map(|r| {
                        let mut row = vec![r.problem.clone(), r.smoother.clone()];
                        if sweep {
                            row.push(format!("{:.2}", r.tau1));
                        }
                        let its = if r.converged { r.iterations.to_string() } else { format!("{}+", self.max_iterations) };
                        row.extend([
                            r.dofs.to_string(),
                            format!("{:.2}", r.complexity),
                            r.levels.to_string(),
                            its,
                            format!("{:.2}", r.setup_s),
                            format!("{:.2}", r.solve_s),
                        ]);
                        row
                    })
                    .collect();
                aligned(&header, &rows)
            }
            Rows::InfSup(rows) => {
                let cells: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| {
                        vec![r.problem.clone(), r.level.to_string(), r.rows.to_string(), r.cols.to_string(), format!("{:.2}", r.sigma_min)]
                    })
                    .collect();
                aligned(&["Problem", "Level", "Rows", "Cols", "sigma_min"], &cells)
            }
            Rows::Mac(rows) => {
                let cells: Vec<Vec<String>> = rows
                    .iter()
                    .map(|r| {
                        vec![
                            r.placement.clone(),
                            r.n.to_string(),
                            r.interior_stencil.clone(),
                            format!("{:.4}", r.eigenvalue),
                            r.sign_changes.to_string(),
                        ]
                    })
                    .collect();
                aligned(&["Placement", "n", "4*S_hat stencil", "Eigenvalue", "Sign changes"], &cells)
            }
        }
    }
}

fn problem_label(domain: &Domain, m: usize) -> String {
    let name = match domain {
        Domain::LidCavity => "cavity",
        Domain::BackwardStep { .. } => "step",
        Domain::Obstacle { .. } => "obstacle",
    };
    format!("{name}-m{m}")
}

/// Assembles (Stokes) or Picard-converges (Navier-Stokes) one problem.
pub fn load_generated(domain: Domain, m: usize, viscosity: f64, navier: bool, cfg: &Resolved) -> Result<LoadedProblem, CliError> {
    let spec = ProblemSpec { domain, refinement: m, viscosity, reynolds: None };
    let (mesh, system, picard) = if navier {
        let out = match cfg.picard_solver {
            PicardSolver::Direct => picard_solve(&spec, &mut DirectSolver, cfg.picard_tolerance, cfg.max_picard)?,
            PicardSolver::Amg => {
                let mesh = build_mesh(&spec)?;
                let params = HierarchyParams { mode: TransferMode::PetrovGalerkin, ..cfg.hierarchy };
                let mut gmres = cfg.gmres;
                gmres.rel_tol = gmres.rel_tol.min(cfg.picard_tolerance);
                let mut amg = AmgSolver::new(mesh, params, gmres);
                picard_solve(&spec, &mut amg as &mut dyn LinearSolver, cfg.picard_tolerance, cfg.max_picard)?
            }
        };
        let last = *out.history.last().expect("picard records a residual");
        (out.mesh, out.system, Some((out.history.len() - 1, last)))
    } else {
        let mesh = build_mesh(&spec)?;
        let bc = default_boundary_condition(&mesh, &spec.domain);
        let sys = assemble_oseen(&mesh, &bc, viscosity, None)?;
        (mesh, sys, None)
    };
    let masses = assemble_mass_matrices(&mesh);
    Ok(LoadedProblem {
        label: problem_label(&domain, m),
        refinement: Some(m),
        system,
        coords_v: mesh.q2_coords.clone(),
        coords_p: mesh.q1_coords.clone(),
        masses: Some(masses),
        picard,
    })
}

fn load_all(cfg: &Resolved, navier: bool) -> Result<Vec<LoadedProblem>, CliError> {
    match &cfg.source {
        ProblemSource::Generated { domain, refinements, viscosity } => {
            refinements.iter().map(|&m| load_generated(*domain, m, *viscosity, navier, cfg)).collect()
        }
        ProblemSource::Import(dir) => Ok(vec![crate::files::import_problem(dir)?]),
    }
}

fn transfer_mode(cfg: &Resolved, navier: bool) -> TransferMode {
    match cfg.transfer {
        TransferChoice::Fixed(m) => m,
        TransferChoice::Auto if navier => TransferMode::PetrovGalerkin,
        TransferChoice::Auto => TransferMode::Symmetric,
    }
}

pub fn build_hierarchy(p: &LoadedProblem, params: &HierarchyParams) -> Result<Hierarchy, CliError> {
    let fine = FineLevel::from_system(&p.system, p.coords_v.clone(), p.coords_p.clone())?;
    Ok(setup_hierarchy_from_parts(fine, params)?)
}

fn dump_hierarchy(dir: &Path, h: &Hierarchy, matrices: bool, splitting: bool) -> Result<Vec<PathBuf>, CliError> {
    create_dir(dir)?;
    let mut files = Vec::new();
    for (l, level) in h.levels.iter().enumerate() {
        if matrices {
            let path = dir.join(format!("K_{l}.mtx"));
            write_matrix(&path, &level.k)?;
            files.push(path);
        }
        let Some(t) = &level.transfer else { continue };
        if matrices {
            for (name, m) in [("P", &t.p), ("R", &t.r)] {
                let path = dir.join(format!("{name}_{l}.mtx"));
                write_matrix(&path, m)?;
                files.push(path);
            }
        }
        if splitting {
            for (name, ids) in [("C_pressure", &t.pressure_c_points), ("C_velocity", &t.velocity_c_nodes)] {
                let path = dir.join(format!("{name}_{l}.txt"));
                let text: String = ids.iter().map(|i| format!("{i}\n")).collect();
                write_file(&path, &text)?;
                files.push(path);
            }
            for (name, m) in [("pattern_pressure", &t.p_p), ("pattern_velocity", &t.p_v)] {
                let path = dir.join(format!("{name}_{l}.mtx"));
                write_matrix(&path, &m.pattern())?;
                files.push(path);
            }
        }
    }
    Ok(files)
}

fn solve_runs(mode: Mode, cfg: &Resolved, opts: &Options) -> Result<Report, CliError> {
    let navier = mode.navier();
    let mut rows = Vec::new();
    let mut files = Vec::new();
    let problems = match mode {
        Mode::Tau1Sweep => load_all(cfg, false)?.into_iter().take(1).collect(),
        _ => load_all(cfg, navier)?,
    };
    let taus: Vec<f64> = match mode {
        Mode::Tau1Sweep => cfg.tau1_sweep.clone(),
        _ => vec![cfg.hierarchy.coarsen.tau1],
    };
    for p in &problems {
        log::info!("{}: {} dofs", p.label, p.system.n_dofs());
        if opts.dump_matrices {
            if let Some(out) = &opts.out {
                files.extend(export_problem(&out.join(&p.label), p)?);
            }
        }
        let rhs = p.system.rhs();
        let x0 = vec![0.0; rhs.len()];
        for &tau1 in &taus {
            for (si, s) in cfg.smoothers.iter().enumerate() {
                let mut params = cfg.hierarchy.with_smoother(s.kind, s.sweeps, s.sweeps);
                params.mode = transfer_mode(cfg, navier);
                params.coarsen.tau1 = tau1;
                let t = Instant::now();
                let h = build_hierarchy(p, &params)?;
                let setup_s = t.elapsed().as_secs_f64();
                let t = Instant::now();
                let out = h.solve(&rhs, &x0, &cfg.gmres)?;
                let solve_s = t.elapsed().as_secs_f64();
                log::info!("{} {} tau1={tau1}: {} iterations", p.label, s.name, out.iterations);
                if si == 0 && mode != Mode::Tau1Sweep && (opts.dump_matrices || opts.dump_splitting) {
                    if let Some(out_dir) = &opts.out {
                        let dir = out_dir.join(&p.label).join("levels");
                        files.extend(dump_hierarchy(&dir, &h, opts.dump_matrices, opts.dump_splitting)?);
                    }
                }
                rows.push(RunRow {
                    problem: p.label.clone(),
                    refinement: p.refinement,
                    tau1,
                    smoother: s.name.clone(),
                    dofs: p.system.n_dofs(),
                    complexity: h.operator_complexity(),
                    levels: h.n_levels(),
                    iterations: out.iterations,
                    converged: out.converged,
                    relative_residual: out.relative_residual,
                    picard_steps: p.picard.map(|(n, _)| n),
                    setup_s,
                    solve_s,
                });
            }
        }
    }
    Ok(Report { mode, rows: Rows::Runs(rows), max_iterations: cfg.gmres.max_iter, files })
}

fn infsup_rows(cfg: &Resolved) -> Result<Report, CliError> {
    let mut rows = Vec::new();
    for p in load_all(cfg, false)? {
        let (mv, mp) = p.masses.as_ref().ok_or_else(|| {
            CliError::Inconsistent(format!("{}: inf-sup probe needs Mv.mtx and Mp.mtx", p.label))
        })?;
        let mut params = cfg.hierarchy;
        params.mode = transfer_mode(cfg, false);
        let h = build_hierarchy(&p, &params)?;
        for l in infsup_estimate(&h, mv, mp)?.levels {
            rows.push(InfSupRow {
                problem: p.label.clone(),
                refinement: p.refinement,
                level: l.level,
                rows: l.rows,
                cols: l.cols,
                sigma_min: l.sigma_min,
            });
        }
    }
    Ok(Report { mode: Mode::Infsup, rows: Rows::InfSup(rows), max_iterations: cfg.gmres.max_iter, files: Vec::new() })
}

fn mac_rows(cfg: &Resolved, opts: &Options) -> Result<Report, CliError> {
    let n = cfg.mac1d_points;
    let sys = build_mac1d(n)?;
    let mut rows = Vec::new();
    let mut vectors = Vec::new();
    for (name, placement) in [("co-located", VelocityPlacement::CoLocated), ("mid-point", VelocityPlacement::MidPoint)] {
        let (s, s_hat) = projected_mac_schur(&sys, placement)?;
        let mid = s_hat.rows() / 2;
        let stencil: Vec<String> = (mid.saturating_sub(2)..(mid + 3).min(s_hat.cols()))
            .map(|j| format!("{}", 4.0 * s_hat.row(mid)[j]))
            .collect();
        let (lambda, v) = second_eigenvector(&s)?;
        rows.push(MacRow {
            placement: name.into(),
            n,
            interior_stencil: stencil.join(" "),
            eigenvalue: lambda,
            sign_changes: sign_changes(&v),
        });
        vectors.push(v);
    }
    let mut files = Vec::new();
    if let Some(out) = &opts.out {
        let mut text = String::from("index,co_located,mid_point\n");
        for i in 0..vectors[0].len() {
            let _ = writeln!(text, "{i},{},{}", vectors[0][i], vectors[1][i]);
        }
        let path = out.join("mac1d_eigenvectors.csv");
        write_file(&path, &text)?;
        files.push(path);
    }
    Ok(Report { mode: Mode::Mac1d, rows: Rows::Mac(rows), max_iterations: cfg.gmres.max_iter, files })
}

/// Runs one mode. With `opts.out` set, `<mode>.csv` and `<mode>.txt` are
/// written there.
pub fn run(mode: Mode, cfg: &Resolved, opts: &Options) -> Result<Report, CliError> {
    if let Some(out) = &opts.out {
        create_dir(out)?;
    }
    let mut report = match mode {
        Mode::Stokes | Mode::NavierStokes | Mode::Tau1Sweep => solve_runs(mode, cfg, opts)?,
        Mode::Infsup => infsup_rows(cfg)?,
        Mode::Mac1d => mac_rows(cfg, opts)?,
    };
    if let Some(out) = &opts.out {
        let csv_path = out.join(format!("{}.csv", mode.name()));
        write_file(&csv_path, &report.csv()?)?;
        let txt_path = out.join(format!("{}.txt", mode.name()));
        write_file(&txt_path, &report.table())?;
        report.files.push(csv_path);
        report.files.push(txt_path);
    }
    Ok(report)
}
