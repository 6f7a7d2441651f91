//! Experiment configuration (TOML with `problem`, `coarsening`, `emin`,
//! `smoother` and `solver` sections). Every field has a default, so an empty
//! file is a valid configuration.

use std::path::{Path, PathBuf};

use q2q1_amg::coarsen::{CoarsenParams, Lumping};
use q2q1_amg::fem::{Domain, DEFAULT_OBSTACLE};
use q2q1_amg::hierarchy::{HierarchyParams, TransferMode};
use q2q1_amg::krylov::GmresParams;
use q2q1_amg::smoothers::SmootherKind;
use serde::{Deserialize, Serialize};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("malformed config: {0}")]
    Syntax(#[from] toml::de::Error),
    #[error("invalid value for `{field}`: {message}")]
    Invalid { field: String, message: String },
}

fn invalid(field: impl Into<String>, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), message: message.into() }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub problem: ProblemConfig,
    pub coarsening: CoarseningConfig,
    pub emin: EminConfig,
    pub smoother: SmootherConfig,
    pub solver: SolverConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProblemConfig {
    /// `lid-cavity`, `backward-step`, `obstacle` or `import`.
    pub domain: String,
    /// Elements across a length of two, one run per entry.
    pub refinements: Vec<usize>,
    pub viscosity: f64,
    /// Channel length for `backward-step` and `obstacle`.
    pub length: Option<f64>,
    /// Obstacle rectangle `[x0, x1, y0, y1]`.
    pub obstacle: Option<[f64; 4]>,
    /// Directory written by `--dump-matrices`, read when `domain = "import"`.
    pub import_dir: Option<PathBuf>,
    /// Number of pressures of the 1D MAC model problem.
    pub mac1d_points: usize,
}

impl Default for ProblemConfig {
    fn default() -> Self {
        Self {
            domain: "lid-cavity".into(),
            refinements: vec![8, 16, 32],
            viscosity: 1.0,
            length: None,
            obstacle: None,
            import_dir: None,
            mac1d_points: 17,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CoarseningConfig {
    pub tau1: f64,
    pub tau2: f64,
    pub omega_g: f64,
    pub omega_o: f64,
    pub extra_h2_threshold: f64,
    pub extra_o_threshold: f64,
    /// `preserve-row-sums` or `zero-row-sums`.
    pub lumping: String,
    pub coarse_threshold: usize,
    pub max_levels: usize,
    /// Values visited by the `tau1-sweep` mode.
    pub tau1_sweep: Vec<f64>,
}

impl Default for CoarseningConfig {
    fn default() -> Self {
        let c = CoarsenParams::default();
        let h = HierarchyParams::default();
        Self {
            tau1: c.tau1,
            tau2: c.tau2,
            omega_g: c.omega_g,
            omega_o: c.omega_o,
            extra_h2_threshold: c.extra_h2_threshold,
            extra_o_threshold: c.extra_o_threshold,
            lumping: "preserve-row-sums".into(),
            coarse_threshold: h.coarse_threshold,
            max_levels: h.max_levels,
            tau1_sweep: vec![0.0, 0.05, 0.10, 0.15, 0.20, 0.25],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EminConfig {
    pub iterations: usize,
    /// `auto` (symmetric for Stokes, Petrov-Galerkin for Navier-Stokes),
    /// `symmetric` or `petrov-galerkin`.
    pub transfer: String,
}

impl Default for EminConfig {
    fn default() -> Self {
        Self { iterations: 1, transfer: "auto".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SmootherConfig {
    /// Smoothers to run, each giving its own table rows.
    pub names: Vec<String>,
    pub vanka_omega: f64,
    pub vanka_sweeps: usize,
    pub bs_omega: f64,
    pub bs_inner_sweeps: usize,
    pub bs_sweeps: usize,
    pub ilu_fill: usize,
    pub ilu_rcm: bool,
    pub ilu_sweeps: usize,
    pub coarse_vanka_sweeps: usize,
    pub coarse_vanka_omega: f64,
}

impl Default for SmootherConfig {
    fn default() -> Self {
        Self {
            names: vec!["vanka".into(), "braess-sarazin".into()],
            vanka_omega: 0.5,
            vanka_sweeps: 1,
            bs_omega: 0.666,
            bs_inner_sweeps: 5,
            bs_sweeps: 2,
            ilu_fill: 1,
            ilu_rcm: true,
            ilu_sweeps: 1,
            coarse_vanka_sweeps: 20,
            coarse_vanka_omega: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub restart: Option<usize>,
    pub picard_tolerance: f64,
    pub max_picard: usize,
    /// Linear solver inside Picard: `direct` or `amg`.
    pub picard_linear_solver: String,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            tolerance: 1e-6,
            max_iterations: 200,
            restart: None,
            picard_tolerance: 1e-8,
            max_picard: 50,
            picard_linear_solver: "direct".into(),
        }
    }
}

/// Where the fine system comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum ProblemSource {
    Generated { domain: Domain, refinements: Vec<usize>, viscosity: f64 },
    Import(PathBuf),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TransferChoice {
    Auto,
    Fixed(TransferMode),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PicardSolver {
    Direct,
    Amg,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NamedSmoother {
    pub name: String,
    pub kind: SmootherKind,
    /// Pre- and post-smoothing steps.
    pub sweeps: usize,
}

/// A validated configuration with library types filled in.
#[derive(Debug, Clone, PartialEq)]
pub struct Resolved {
    pub source: ProblemSource,
    pub mac1d_points: usize,
    pub hierarchy: HierarchyParams,
    pub transfer: TransferChoice,
    pub smoothers: Vec<NamedSmoother>,
    pub tau1_sweep: Vec<f64>,
    pub gmres: GmresParams,
    pub picard_tolerance: f64,
    pub max_picard: usize,
    pub picard_solver: PicardSolver,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.into(), source })?;
        Self::from_toml(&text)
    }

    /// Checks every field and converts to library parameters.
    pub fn resolve(&self) -> Result<Resolved, ConfigError> {
        let p = &self.problem;
        let positive = |field: &str, v: f64| {
            if v > 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be positive, got {v}")))
            }
        };
        let nonnegative = |field: &str, v: f64| {
            if v >= 0.0 && v.is_finite() {
                Ok(())
            } else {
                Err(invalid(field, format!("must be nonnegative, got {v}")))
            }
        };

        let source = match p.domain.as_str() {
            "import" => {
                let dir = p.import_dir.clone().ok_or_else(|| invalid("problem.import_dir", "required when domain = \"import\""))?;
                ProblemSource::Import(dir)
            }
            name => {
                let domain = match name {
                    "lid-cavity" => Domain::LidCavity,
                    "backward-step" => Domain::BackwardStep { length: p.length.unwrap_or(5.0) },
                    "obstacle" => Domain::Obstacle {
                        length: p.length.unwrap_or(8.0),
                        obstacle: p.obstacle.unwrap_or(DEFAULT_OBSTACLE),
                    },
                    other => {
                        return Err(invalid(
                            "problem.domain",
                            format!("unknown domain '{other}' (expected lid-cavity, backward-step, obstacle, import)"),
                        ))
                    }
                };
                if let Some(len) = p.length {
                    positive("problem.length", len)?;
                }
                if let Some([x0, x1, y0, y1]) = p.obstacle {
                    if !(x0 < x1 && y0 < y1) {
                        return Err(invalid("problem.obstacle", "expected [x0, x1, y0, y1] with x0 < x1 and y0 < y1"));
                    }
                }
                if p.refinements.is_empty() {
                    return Err(invalid("problem.refinements", "at least one refinement is needed"));
                }
                if let Some(i) = p.refinements.iter().position(|&m| m == 0) {
                    return Err(invalid(format!("problem.refinements[{i}]"), "must be at least 1"));
                }
                ProblemSource::Generated { domain, refinements: p.refinements.clone(), viscosity: p.viscosity }
            }
        };
        positive("problem.viscosity", p.viscosity)?;
        if p.mac1d_points < 5 || p.mac1d_points % 2 == 0 {
            return Err(invalid("problem.mac1d_points", "must be odd and at least 5"));
        }

        let c = &self.coarsening;
        nonnegative("coarsening.tau1", c.tau1)?;
        nonnegative("coarsening.tau2", c.tau2)?;
        positive("coarsening.omega_g", c.omega_g)?;
        positive("coarsening.omega_o", c.omega_o)?;
        for (i, &t) in c.tau1_sweep.iter().enumerate() {
            nonnegative(&format!("coarsening.tau1_sweep[{i}]"), t)?;
        }
        let lumping = match c.lumping.as_str() {
            "preserve-row-sums" => Lumping::PreserveRowSums,
            "zero-row-sums" => Lumping::ZeroRowSums,
            other => {
                return Err(invalid(
                    "coarsening.lumping",
                    format!("unknown lumping '{other}' (expected preserve-row-sums, zero-row-sums)"),
                ))
            }
        };
        if c.max_levels == 0 {
            return Err(invalid("coarsening.max_levels", "must be at least 1"));
        }

        let transfer = match self.emin.transfer.as_str() {
            "auto" => TransferChoice::Auto,
            "symmetric" => TransferChoice::Fixed(TransferMode::Symmetric),
            "petrov-galerkin" => TransferChoice::Fixed(TransferMode::PetrovGalerkin),
            other => {
                return Err(invalid(
                    "emin.transfer",
                    format!("unknown transfer '{other}' (expected auto, symmetric, petrov-galerkin)"),
                ))
            }
        };

        let s = &self.smoother;
        positive("smoother.vanka_omega", s.vanka_omega)?;
        positive("smoother.bs_omega", s.bs_omega)?;
        positive("smoother.coarse_vanka_omega", s.coarse_vanka_omega)?;
        if s.names.is_empty() {
            return Err(invalid("smoother.names", "at least one smoother is needed"));
        }
        let mut smoothers = Vec::new();
        for (i, name) in s.names.iter().enumerate() {
            let (kind, sweeps) = match name.as_str() {
                "vanka" => (SmootherKind::Vanka { omega: s.vanka_omega }, s.vanka_sweeps),
                "braess-sarazin" => {
                    (SmootherKind::BraessSarazin { omega: s.bs_omega, inner_sweeps: s.bs_inner_sweeps }, s.bs_sweeps)
                }
                "ilu" => (SmootherKind::Ilu { fill: s.ilu_fill, rcm: s.ilu_rcm }, s.ilu_sweeps),
                other => {
                    return Err(invalid(
                        format!("smoother.names[{i}]"),
                        format!("unknown smoother '{other}' (expected vanka, braess-sarazin, ilu)"),
                    ))
                }
            };
            smoothers.push(NamedSmoother { name: name.clone(), kind, sweeps });
        }

        let v = &self.solver;
        positive("solver.tolerance", v.tolerance)?;
        positive("solver.picard_tolerance", v.picard_tolerance)?;
        if v.max_iterations == 0 {
            return Err(invalid("solver.max_iterations", "must be at least 1"));
        }
        if v.restart == Some(0) {
            return Err(invalid("solver.restart", "must be at least 1"));
        }
        let picard_solver = match v.picard_linear_solver.as_str() {
            "direct" => PicardSolver::Direct,
            "amg" => PicardSolver::Amg,
            other => {
                return Err(invalid(
                    "solver.picard_linear_solver",
                    format!("unknown solver '{other}' (expected direct, amg)"),
                ))
            }
        };

        let hierarchy = HierarchyParams {
            coarsen: CoarsenParams {
                tau1: c.tau1,
                tau2: c.tau2,
                omega_g: c.omega_g,
                omega_o: c.omega_o,
                extra_h2_threshold: c.extra_h2_threshold,
                extra_o_threshold: c.extra_o_threshold,
                lumping,
            },
            emin_iterations: self.emin.iterations,
            coarse_threshold: c.coarse_threshold,
            max_levels: c.max_levels,
            coarse_vanka_sweeps: s.coarse_vanka_sweeps,
            coarse_vanka_omega: s.coarse_vanka_omega,
            ..HierarchyParams::default()
        };
        Ok(Resolved {
            source,
            mac1d_points: p.mac1d_points,
            hierarchy,
            transfer,
            smoothers,
            tau1_sweep: c.tau1_sweep.clone(),
            gmres: GmresParams {
                rel_tol: v.tolerance,
                max_iter: v.max_iterations,
                restart: v.restart,
                check_orthogonality: false,
            },
            picard_tolerance: v.picard_tolerance,
            max_picard: v.max_picard,
            picard_solver,
        })
    }
}
