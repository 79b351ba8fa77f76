//! Iterative solvers for `min KL(Ax, b)` over a [`ManifoldKind`].
//!
//! Every solver starts from an interior point, owns its [`OpCounter`] and
//! returns the full [`IterationTrace`]. Entry `k` of the trace describes the
//! iterate `x_k`: its objective, the step that produced it and the cumulative
//! number of matrix-vector products at the moment it was recorded. The
//! evaluation at `x_0` is included in the count, so per-iteration costs are
//! differences between consecutive entries.
//!
//! Numerical failures in the middle of a run are not errors: the run stops,
//! the result is tagged [`Termination::NumericalError`] and keeps the last
//! accepted iterate.

mod accelerated;
mod projected;
mod riemannian;
mod theta;

pub use accelerated::{fsmart, fsmart_e, fsmart_g, smart};
pub use projected::{pg_armijo, PROJECTION_MARGIN};
pub use riemannian::{barzilai_borwein_step, rg_armijo, rg_bb, rg_cg, rg_hz, MAX_BACKTRACKS};
pub use theta::{solve_theta, theta_next};

use std::fmt;
use std::str::FromStr;

use crate::error::SolverError;
use crate::geometry::Point;
use crate::linops::OpCounter;
use crate::objective::KlProblem;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Algorithm {
    Smart,
    Fsmart,
    FsmartE,
    FsmartG,
    RgArmijo,
    RgHz,
    RgBb,
    RgCg,
    Pg,
}

impl Algorithm {
    pub const ALL: [Algorithm; 9] = [
        Algorithm::Smart,
        Algorithm::Fsmart,
        Algorithm::FsmartE,
        Algorithm::FsmartG,
        Algorithm::RgArmijo,
        Algorithm::RgHz,
        Algorithm::RgBb,
        Algorithm::RgCg,
        Algorithm::Pg,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Algorithm::Smart => "SMART",
            Algorithm::Fsmart => "FSMART",
            Algorithm::FsmartE => "FSMART-E",
            Algorithm::FsmartG => "FSMART-G",
            Algorithm::RgArmijo => "RG-ARMIJO",
            Algorithm::RgHz => "RG-HZ",
            Algorithm::RgBb => "RG-BB",
            Algorithm::RgCg => "RG-CG",
            Algorithm::Pg => "PG",
        }
    }
}

impl fmt::Display for Algorithm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Algorithm {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase().replace('_', "-");
        Algorithm::ALL
            .into_iter()
            .find(|a| a.name() == key)
            .ok_or_else(|| SolverError::Config(format!("unknown algorithm {s:?}")))
    }
}

/// Rule for the conjugate gradient coefficient `β_k`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BetaRule {
    FletcherReeves,
    PolakRibiere,
    DaiYuan,
    HestenesStiefel,
    HagerZhang,
    Oviedo,
}

impl BetaRule {
    pub const ALL: [BetaRule; 6] = [
        BetaRule::FletcherReeves,
        BetaRule::PolakRibiere,
        BetaRule::DaiYuan,
        BetaRule::HestenesStiefel,
        BetaRule::HagerZhang,
        BetaRule::Oviedo,
    ];

    pub fn code(self) -> &'static str {
        match self {
            BetaRule::FletcherReeves => "FR",
            BetaRule::PolakRibiere => "PR",
            BetaRule::DaiYuan => "DY",
            BetaRule::HestenesStiefel => "HS",
            BetaRule::HagerZhang => "HZ",
            BetaRule::Oviedo => "OV",
        }
    }
}

impl FromStr for BetaRule {
    type Err = SolverError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let key = s.trim().to_ascii_uppercase();
        BetaRule::ALL
            .into_iter()
            .find(|r| r.code() == key)
            .ok_or_else(|| SolverError::Config(format!("unknown beta rule {s:?}")))
    }
}

/// Parameters shared by all solvers. Defaults are the values used for the
/// published experiments.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverConfig {
    pub algorithm: Algorithm,
    pub max_iter: usize,
    /// Stop once the Riemannian gradient norm drops to this value.
    pub grad_tol: f64,
    pub armijo_sigma: f64,
    pub armijo_beta: f64,
    pub init_step: f64,
    pub hz_sigma2: f64,
    pub hz_rho: f64,
    pub bb_gamma_min: f64,
    pub bb_gamma_max: f64,
    pub bb_memory: usize,
    pub e_gamma0: f64,
    pub e_gamma_min: f64,
    pub e_delta: f64,
    pub g_rho: f64,
    pub g_gamma: f64,
    pub g_gain_min: f64,
    pub cg_beta_rule: BetaRule,
    pub cg_mu: f64,
    pub newton_tol: f64,
    /// Keep a [`Snapshot`] of every iterate in the result.
    pub record_iterates: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::Smart,
            max_iter: 1000,
            grad_tol: 1e-8,
            armijo_sigma: 1e-3,
            armijo_beta: 0.8,
            init_step: 0.2,
            hz_sigma2: 1e-3,
            hz_rho: 0.5,
            bb_gamma_min: 1e-7,
            bb_gamma_max: 1.0,
            bb_memory: 10,
            e_gamma0: 5.0,
            e_gamma_min: 1.0,
            e_delta: 0.05,
            g_rho: 1.2,
            g_gamma: 2.0,
            g_gain_min: 1e-3,
            cg_beta_rule: BetaRule::DaiYuan,
            cg_mu: 2.0,
            newton_tol: 1e-12,
            record_iterates: false,
        }
    }
}

impl SolverConfig {
    pub fn new(algorithm: Algorithm) -> Self {
        Self { algorithm, ..Self::default() }
    }

    pub fn with_max_iter(mut self, max_iter: usize) -> Self {
        self.max_iter = max_iter;
        self
    }

    pub fn with_grad_tol(mut self, grad_tol: f64) -> Self {
        self.grad_tol = grad_tol;
        self
    }

    pub fn with_beta_rule(mut self, rule: BetaRule) -> Self {
        self.cg_beta_rule = rule;
        self
    }

    pub fn recording(mut self) -> Self {
        self.record_iterates = true;
        self
    }

    /// Display label, with the beta rule for conjugate gradients.
    pub fn label(&self) -> String {
        match self.algorithm {
            Algorithm::RgCg => format!("RG-CG-{}", self.cg_beta_rule.code()),
            a => a.name().to_string(),
        }
    }

    /// Sets a parameter by its field name, as used in `key=value` files.
    pub fn set(&mut self, key: &str, value: &str) -> Result<(), SolverError> {
        let real = || {
            value
                .trim()
                .parse::<f64>()
                .map_err(|_| SolverError::Config(format!("{key}: expected a number, got {value:?}")))
        };
        let count = || {
            value
                .trim()
                .parse::<usize>()
                .map_err(|_| SolverError::Config(format!("{key}: expected a count, got {value:?}")))
        };
        match key.trim() {
            "algorithm" => self.algorithm = value.parse()?,
            "max_iter" => self.max_iter = count()?,
            "grad_tol" => self.grad_tol = real()?,
            "armijo_sigma" => self.armijo_sigma = real()?,
            "armijo_beta" => self.armijo_beta = real()?,
            "init_step" => self.init_step = real()?,
            "hz_sigma2" => self.hz_sigma2 = real()?,
            "hz_rho" => self.hz_rho = real()?,
            "bb_gamma_min" => self.bb_gamma_min = real()?,
            "bb_gamma_max" => self.bb_gamma_max = real()?,
            "bb_memory" => self.bb_memory = count()?,
            "e_gamma0" => self.e_gamma0 = real()?,
            "e_gamma_min" => self.e_gamma_min = real()?,
            "e_delta" => self.e_delta = real()?,
            "g_rho" => self.g_rho = real()?,
            "g_gamma" => self.g_gamma = real()?,
            "g_gain_min" => self.g_gain_min = real()?,
            "cg_beta_rule" => self.cg_beta_rule = value.parse()?,
            "cg_mu" => self.cg_mu = real()?,
            "newton_tol" => self.newton_tol = real()?,
            "record_iterates" => {
                self.record_iterates =
                    value.trim().parse().map_err(|_| SolverError::Config(format!("{key}: expected true/false")))?
            }
            other => return Err(SolverError::Config(format!("unknown parameter {other:?}"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        let check = |ok: bool, what: &str| if ok { Ok(()) } else { Err(SolverError::Config(what.to_string())) };
        check(self.grad_tol >= 0.0, "grad_tol must be nonnegative")?;
        check(self.armijo_sigma > 0.0 && self.armijo_sigma < 1.0, "armijo_sigma must lie in (0, 1)")?;
        check(self.armijo_beta > 0.0 && self.armijo_beta < 1.0, "armijo_beta must lie in (0, 1)")?;
        check(self.init_step > 0.0 && self.init_step.is_finite(), "init_step must be positive")?;
        check(self.hz_sigma2 >= 0.0, "hz_sigma2 must be nonnegative")?;
        check((0.0..1.0).contains(&self.hz_rho), "hz_rho must lie in [0, 1)")?;
        check(
            self.bb_gamma_min > 0.0 && self.bb_gamma_min <= self.bb_gamma_max,
            "need 0 < bb_gamma_min <= bb_gamma_max",
        )?;
        check(self.bb_memory >= 1, "bb_memory must be at least 1")?;
        check(self.e_gamma_min >= 1.0, "e_gamma_min must be at least 1")?;
        check(self.e_gamma0 >= self.e_gamma_min, "e_gamma0 must be at least e_gamma_min")?;
        check(self.e_delta > 0.0, "e_delta must be positive")?;
        check(self.g_rho > 1.0, "g_rho must exceed 1")?;
        check(self.g_gamma >= 1.0, "g_gamma must be at least 1")?;
        check(self.g_gain_min > 0.0, "g_gain_min must be positive")?;
        check(self.cg_mu > 0.0, "cg_mu must be positive")?;
        check(self.newton_tol > 0.0, "newton_tol must be positive")?;
        Ok(())
    }
}

/// One row of a solver trace, describing iterate `x_iter`.
#[derive(Debug, Clone, PartialEq)]
pub struct IterationTrace {
    pub iter: usize,
    pub objective: f64,
    /// Riemannian gradient norm. The accelerated methods report it at the
    /// extrapolated point `y_k` where their gradient is evaluated; projected
    /// gradient reports the Euclidean norm of its gradient mapping.
    pub grad_norm: f64,
    /// Step accepted to produce this iterate (0 for the first entry).
    pub step_size: f64,
    /// Products with `A` or `Aᵀ` spent since the starting point was
    /// evaluated, so the first entry reports 0.
    pub matvec_count: u64,
    /// `γ_k` for FSMART-E, gain `G_k` for FSMART-G.
    pub certificate: Option<f64>,
    pub inner_backtracks: usize,
    /// Conjugate gradients only: the next direction was reset to `-grad f`.
    pub restart: bool,
}

/// Iterate data kept when [`SolverConfig::record_iterates`] is set.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Snapshot {
    pub x: Vec<f64>,
    /// Extrapolated point `y_{k-1}` that produced `x_k` (accelerated methods).
    pub y: Option<Vec<f64>>,
    /// Mirror sequence `z_k` (accelerated methods).
    pub z: Option<Vec<f64>>,
    /// `θ_{k-1}` used to produce `x_k` (accelerated methods).
    pub theta: Option<f64>,
    /// Tracked image `Ax_k` (accelerated methods).
    pub ax: Option<Vec<f64>>,
    /// Tracked image `Ay_{k-1}` (accelerated methods).
    pub ay: Option<Vec<f64>>,
    /// Search direction `v_k` leaving `x_k` (conjugate gradients).
    pub direction: Option<Vec<f64>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Termination {
    GradTol,
    MaxIter,
    NumericalError,
}

#[derive(Debug, Clone)]
pub struct SolveResult {
    pub final_point: Point,
    pub trace: Vec<IterationTrace>,
    pub termination: Termination,
    pub iterates: Vec<Snapshot>,
    /// Cause of a [`Termination::NumericalError`].
    pub error: Option<SolverError>,
    /// Products spent evaluating the starting point; not included in the
    /// trace counts.
    pub setup_matvecs: u64,
}

impl SolveResult {
    pub fn final_objective(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |t| t.objective)
    }

    pub fn iterations(&self) -> usize {
        self.trace.last().map_or(0, |t| t.iter)
    }
}

/// Runs the algorithm selected in `cfg`.
pub fn solve(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    match cfg.algorithm {
        Algorithm::Smart => smart(problem, x0, cfg),
        Algorithm::Fsmart => fsmart(problem, x0, cfg),
        Algorithm::FsmartE => fsmart_e(problem, x0, cfg),
        Algorithm::FsmartG => fsmart_g(problem, x0, cfg),
        Algorithm::RgArmijo => rg_armijo(problem, x0, cfg),
        Algorithm::RgHz => rg_hz(problem, x0, cfg),
        Algorithm::RgBb => rg_bb(problem, x0, cfg),
        Algorithm::RgCg => rg_cg(problem, x0, cfg),
        Algorithm::Pg => pg_armijo(problem, x0, cfg),
    }
}

fn check_start(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<(), SolverError> {
    cfg.validate()?;
    if x0.kind() != problem.kind() {
        return Err(SolverError::Config(format!(
            "start point lives on {:?}, problem on {:?}",
            x0.kind(),
            problem.kind()
        )));
    }
    if x0.dim() != problem.dim() {
        return Err(SolverError::Config(format!("start point has dimension {}, problem {}", x0.dim(), problem.dim())));
    }
    Ok(())
}

/// Fields of a trace row that the solver supplies; the recorder adds the
/// index and the product count.
#[derive(Debug, Clone, Default)]
struct Entry {
    objective: f64,
    grad_norm: f64,
    step_size: f64,
    certificate: Option<f64>,
    inner_backtracks: usize,
    restart: bool,
}

struct Recorder {
    record_iterates: bool,
    ops: OpCounter,
    /// Products spent evaluating the starting point, fixed at the first push.
    setup: u64,
    trace: Vec<IterationTrace>,
    iterates: Vec<Snapshot>,
}

impl Recorder {
    fn new(cfg: &SolverConfig) -> Self {
        Self {
            record_iterates: cfg.record_iterates,
            ops: OpCounter::new(),
            setup: 0,
            trace: Vec::with_capacity(cfg.max_iter.min(100_000) + 1),
            iterates: Vec::new(),
        }
    }

    fn push(&mut self, entry: Entry, snapshot: impl FnOnce() -> Snapshot) {
        if self.trace.is_empty() {
            self.setup = self.ops.count();
        }
        self.trace.push(IterationTrace {
            iter: self.trace.len(),
            objective: entry.objective,
            grad_norm: entry.grad_norm,
            step_size: entry.step_size,
            matvec_count: self.ops.count() - self.setup,
            certificate: entry.certificate,
            inner_backtracks: entry.inner_backtracks,
            restart: entry.restart,
        });
        if self.record_iterates {
            self.iterates.push(snapshot());
        }
    }

    /// Number of completed iterations.
    fn iterations(&self) -> usize {
        self.trace.len().saturating_sub(1)
    }

    fn finish(self, final_point: Point, outcome: Result<Termination, SolverError>) -> SolveResult {
        let (termination, error) = match outcome {
            Ok(t) => (t, None),
            Err(e) => {
                log::debug!("solver stopped: {e}");
                (Termination::NumericalError, Some(e))
            }
        };
        SolveResult {
            final_point,
            trace: self.trace,
            termination,
            iterates: self.iterates,
            error,
            setup_matvecs: self.setup,
        }
    }
}
