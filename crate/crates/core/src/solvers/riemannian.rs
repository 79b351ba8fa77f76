//! Riemannian gradient methods along e-geodesics.
//!
//! All methods step with `R_x(τ v) = exp_x(-τ ∂f(x))` for `v = -grad f(x)`
//! (conjugate gradients retract along general directions) and choose `τ`
//! by backtracking. Trial points that would overflow the exponential or
//! leave the domain count as rejected trials.

use std::collections::VecDeque;

use super::{check_start, Entry, Recorder, Snapshot, SolveResult, SolverConfig, Termination};
use crate::error::{GeometryError, SolverError};
use crate::geometry::{
    exp_shorthand, gradient_norm_sq, inner, inverse_metric_apply, retract, transport_to, Point, Tangent,
};
use crate::linops::OpCounter;
use crate::objective::KlProblem;
use crate::solvers::BetaRule;

/// Step reductions allowed in one line search before the run stops.
pub const MAX_BACKTRACKS: usize = 60;

/// Denominators of the conjugate gradient coefficient below this magnitude
/// reset the direction to the negative gradient.
const BETA_DENOMINATOR_FLOOR: f64 = 1e-12;

/// Iterate with its objective value and Euclidean gradient.
struct Evaluated {
    x: Point,
    f: f64,
    g: Vec<f64>,
}

impl Evaluated {
    fn start(problem: &KlProblem, x0: &Point, ops: &mut OpCounter) -> Result<Self, SolverError> {
        let ax = problem.forward(x0.coords(), ops)?;
        let f = problem.value_from_forward(&ax)?;
        let g = problem.gradient_from_forward(&ax, ops)?;
        Ok(Self { x: x0.clone(), f, g })
    }

    fn grad_norm_sq(&self) -> Result<f64, SolverError> {
        Ok(gradient_norm_sq(&self.x, &self.g)?)
    }

    fn snapshot(&self) -> Snapshot {
        Snapshot { x: self.x.coords().to_vec(), ..Snapshot::default() }
    }
}

struct Accepted {
    next: Evaluated,
    step: f64,
    backtracks: usize,
}

/// Tries `candidate(τ)` for `τ = τ₀, βτ₀, β²τ₀, …` until `accept(τ, f(candidate))`
/// holds, then evaluates the gradient at the accepted point.
fn backtrack<C, A>(
    problem: &KlProblem,
    ops: &mut OpCounter,
    tau0: f64,
    beta: f64,
    mut candidate: C,
    mut accept: A,
) -> Result<Accepted, SolverError>
where
    C: FnMut(f64) -> Result<Point, GeometryError>,
    A: FnMut(f64, f64) -> bool,
{
    let mut tau = tau0;
    for backtracks in 0..=MAX_BACKTRACKS {
        if let Ok(point) = candidate(tau) {
            let ax = problem.forward(point.coords(), ops)?;
            if let Ok(f) = problem.value_from_forward(&ax) {
                if f.is_finite() && accept(tau, f) {
                    let g = problem.gradient_from_forward(&ax, ops)?;
                    return Ok(Accepted { next: Evaluated { x: point, f, g }, step: tau, backtracks });
                }
            }
        }
        tau *= beta;
    }
    Err(SolverError::LineSearch(MAX_BACKTRACKS))
}

fn descent_point(x: &Point, g: &[f64], tau: f64) -> Result<Point, GeometryError> {
    let exponent: Vec<f64> = g.iter().map(|gi| -tau * gi).collect();
    exp_shorthand(x, &exponent)
}

/// Acceptance rule of a steepest descent line search, with the state it keeps.
trait StepRule {
    fn first_trial(&self) -> f64;
    fn accepts(&self, current: &Evaluated, grad_norm_sq: f64, tau: f64, f_trial: f64) -> bool;
    fn update(&mut self, current: &Evaluated, accepted: &Accepted) -> Result<(), SolverError>;
}

fn run_steepest<R: StepRule>(
    problem: &KlProblem,
    x0: &Point,
    cfg: &SolverConfig,
    mut rule: R,
) -> Result<SolveResult, SolverError> {
    check_start(problem, x0, cfg)?;
    let mut rec = Recorder::new(cfg);
    let mut cur = Evaluated::start(problem, x0, &mut rec.ops)?;
    let mut gn2 = cur.grad_norm_sq()?;
    rec.push(Entry { objective: cur.f, grad_norm: gn2.sqrt(), ..Entry::default() }, || cur.snapshot());

    let outcome = loop {
        if gn2.sqrt() <= cfg.grad_tol {
            break Ok(Termination::GradTol);
        }
        if rec.iterations() >= cfg.max_iter {
            break Ok(Termination::MaxIter);
        }
        let accepted = match backtrack(
            problem,
            &mut rec.ops,
            rule.first_trial(),
            cfg.armijo_beta,
            |tau| descent_point(&cur.x, &cur.g, tau),
            |tau, f| rule.accepts(&cur, gn2, tau, f),
        ) {
            Ok(a) => a,
            Err(e) => break Err(e),
        };
        if let Err(e) = rule.update(&cur, &accepted) {
            break Err(e);
        }
        let next_gn2 = match accepted.next.grad_norm_sq() {
            Ok(v) => v,
            Err(e) => break Err(e),
        };
        cur = accepted.next;
        gn2 = next_gn2;
        rec.push(
            Entry {
                objective: cur.f,
                grad_norm: gn2.sqrt(),
                step_size: accepted.step,
                inner_backtracks: accepted.backtracks,
                ..Entry::default()
            },
            || cur.snapshot(),
        );
    };
    Ok(rec.finish(cur.x, outcome))
}

struct Armijo {
    tau: f64,
    sigma: f64,
}

impl StepRule for Armijo {
    fn first_trial(&self) -> f64 {
        self.tau
    }

    fn accepts(&self, current: &Evaluated, grad_norm_sq: f64, tau: f64, f_trial: f64) -> bool {
        current.f - f_trial >= self.sigma * tau * grad_norm_sq
    }

    fn update(&mut self, _current: &Evaluated, accepted: &Accepted) -> Result<(), SolverError> {
        self.tau = accepted.step;
        Ok(())
    }
}

/// Riemannian gradient descent with monotone Armijo backtracking. The
/// accepted step is the first trial of the next iteration.
pub fn rg_armijo(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    run_steepest(problem, x0, cfg, Armijo { tau: cfg.init_step, sigma: cfg.armijo_sigma })
}

struct HagerZhang {
    tau: f64,
    rho1: f64,
    rho2: f64,
    decay: f64,
    q: f64,
    /// `C_k`; `None` until the first step, when it equals `f(x_0)`.
    c: Option<f64>,
}

impl StepRule for HagerZhang {
    fn first_trial(&self) -> f64 {
        self.tau
    }

    fn accepts(&self, current: &Evaluated, grad_norm_sq: f64, tau: f64, f_trial: f64) -> bool {
        let c = self.c.unwrap_or(current.f);
        f_trial - c <= -tau * (self.rho1 + tau * self.rho2) * grad_norm_sq
    }

    fn update(&mut self, current: &Evaluated, accepted: &Accepted) -> Result<(), SolverError> {
        self.tau = accepted.step;
        let c = self.c.unwrap_or(current.f);
        let q_next = self.decay * self.q + 1.0;
        self.c = Some((self.decay * self.q * c + accepted.next.f) / q_next);
        self.q = q_next;
        Ok(())
    }
}

/// Riemannian gradient descent with the nonmonotone line search of Hager
/// and Zhang: a trial is compared against the running weighted average
/// `C_k` of past objective values, with `C_0 = f(x_0)`, `Q_0 = 1`,
/// `Q_{k+1} = ϱ Q_k + 1` and `C_{k+1} = (ϱ Q_k C_k + f(x_{k+1})) / Q_{k+1}`.
pub fn rg_hz(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let rule = HagerZhang {
        tau: cfg.init_step,
        rho1: cfg.armijo_sigma,
        rho2: cfg.hz_sigma2,
        decay: cfg.hz_rho,
        q: 1.0,
        c: None,
    };
    run_steepest(problem, x0, cfg, rule)
}

/// Riemannian long Barzilai–Borwein step at `x_{k+1}` after the step `tau`
/// from `x_k`, before clipping:
/// `s = -τ G(x_{k+1})^{-1} ∂f(x_k)`, `y = grad f(x_{k+1}) + s/τ` and
/// `⟨s, s⟩ / |⟨s, y⟩|`, all at `x_{k+1}`. A vanishing `⟨s, y⟩` gives `+∞`.
pub fn barzilai_borwein_step(
    x_next: &Point,
    grad_prev: &[f64],
    grad_next: &[f64],
    tau: f64,
) -> Result<f64, SolverError> {
    let s = inverse_metric_apply(x_next, grad_prev)?.scaled(-tau);
    let y = inverse_metric_apply(x_next, grad_next)?.axpy(1.0 / tau, &s);
    let ss = inner(x_next, &s, &s)?;
    let sy = inner(x_next, &s, &y)?.abs();
    Ok(if sy > 0.0 { ss / sy } else { f64::INFINITY })
}

struct BarzilaiBorwein {
    trial: f64,
    rho: f64,
    gamma_min: f64,
    gamma_max: f64,
    memory: usize,
    window: usize,
    history: VecDeque<f64>,
}

impl BarzilaiBorwein {
    /// `C_k`; the history is empty before the first step, when `C_0 = f(x_0)`.
    fn reference(&self, current: &Evaluated) -> f64 {
        if self.history.is_empty() {
            return current.f;
        }
        self.history.iter().take(self.window + 1).copied().fold(f64::NEG_INFINITY, f64::max)
    }
}

impl StepRule for BarzilaiBorwein {
    fn first_trial(&self) -> f64 {
        self.trial
    }

    fn accepts(&self, current: &Evaluated, grad_norm_sq: f64, tau: f64, f_trial: f64) -> bool {
        f_trial <= self.reference(current) - self.rho * tau * grad_norm_sq
    }

    fn update(&mut self, current: &Evaluated, accepted: &Accepted) -> Result<(), SolverError> {
        let next = &accepted.next;
        let gamma = barzilai_borwein_step(&next.x, &current.g, &next.g, accepted.step)?;
        self.trial = gamma.clamp(self.gamma_min, self.gamma_max);
        if self.history.is_empty() {
            self.history.push_front(current.f);
        }
        self.window = (self.window + 1).min(self.memory);
        self.history.push_front(next.f);
        self.history.truncate(self.memory + 1);
        Ok(())
    }
}

/// Riemannian gradient descent with Barzilai–Borwein trial steps and a
/// nonmonotone Armijo test against `C_k = max_{0≤j≤m_k} f(x_{k-j})`, with
/// `m_0 = 0` and `m_k = min(m_{k-1} + 1, bb_memory)`.
pub fn rg_bb(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let rule = BarzilaiBorwein {
        trial: cfg.init_step,
        rho: cfg.armijo_sigma,
        gamma_min: cfg.bb_gamma_min,
        gamma_max: cfg.bb_gamma_max,
        memory: cfg.bb_memory,
        window: 0,
        history: VecDeque::new(),
    };
    run_steepest(problem, x0, cfg, rule)
}

/// Coefficient `β_{k+1}`, or `None` when its denominator is too small.
#[allow(clippy::too_many_arguments)]
fn beta_coefficient(
    rule: BetaRule,
    mu: f64,
    x: &Point,
    x_next: &Point,
    rg: &Tangent,
    rg_next: &Tangent,
    v: &Tangent,
    v_moved: &Tangent,
    y: &Tangent,
) -> Result<Option<f64>, SolverError> {
    let gn2 = inner(x, rg, rg)?;
    let gn2_next = inner(x_next, rg_next, rg_next)?;
    let curvature = inner(x_next, rg_next, v_moved)? - inner(x, rg, v)?;
    let (numerator, denominator) = match rule {
        BetaRule::FletcherReeves => (gn2_next, gn2),
        BetaRule::PolakRibiere => (inner(x_next, rg_next, y)?, gn2),
        BetaRule::DaiYuan => (gn2_next, curvature),
        BetaRule::HestenesStiefel => (inner(x_next, rg_next, y)?, curvature),
        BetaRule::HagerZhang => {
            if curvature.abs() < BETA_DENOMINATOR_FLOOR {
                return Ok(None);
            }
            let hs = inner(x_next, rg_next, y)? / curvature;
            let yy = inner(x_next, y, y)?;
            let gv = inner(x_next, rg_next, v_moved)?;
            return Ok(Some(hs - mu * yy * gv / (curvature * curvature)));
        }
        BetaRule::Oviedo => (mu * inner(x_next, rg_next, v_moved)?, -inner(x, v, v)?),
    };
    if denominator.abs() < BETA_DENOMINATOR_FLOOR || !denominator.is_finite() {
        return Ok(None);
    }
    let beta = numerator / denominator;
    Ok(beta.is_finite().then_some(beta))
}

/// Riemannian conjugate gradients.
///
/// Directions follow `v_{k+1} = -grad f(x_{k+1}) + β_{k+1} T(v_k)`, where
/// `T` is the differential of the retraction along the accepted step and
/// `β` follows [`SolverConfig::cg_beta_rule`] (`cg_mu` is the Hager–Zhang
/// `μ`; the Oviedo rule uses `μ_k = 1`). Steps satisfy the Armijo condition
/// `f(R(α v)) - f(x) ≤ σ α ⟨grad f, v⟩` and the accepted `α` is the next
/// first trial. A tiny `β` denominator, or a direction that fails to
/// descend, resets the direction to `-grad f` and marks the trace row.
pub fn rg_cg(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    check_start(problem, x0, cfg)?;
    let mut rec = Recorder::new(cfg);
    let mut cur = Evaluated::start(problem, x0, &mut rec.ops)?;
    let mut rg = inverse_metric_apply(&cur.x, &cur.g)?;
    let mut v = rg.scaled(-1.0);
    let mut alpha = cfg.init_step;
    let snapshot = |cur: &Evaluated, v: &Tangent| Snapshot {
        x: cur.x.coords().to_vec(),
        direction: Some(v.coords().to_vec()),
        ..Snapshot::default()
    };
    rec.push(
        Entry { objective: cur.f, grad_norm: inner(&cur.x, &rg, &rg)?.max(0.0).sqrt(), ..Entry::default() },
        || snapshot(&cur, &v),
    );

    let outcome = loop {
        let gn = rec.trace.last().map_or(0.0, |t| t.grad_norm);
        if gn <= cfg.grad_tol {
            break Ok(Termination::GradTol);
        }
        if rec.iterations() >= cfg.max_iter {
            break Ok(Termination::MaxIter);
        }
        let step = |ops: &mut OpCounter, v: &mut Tangent, alpha: f64| -> Result<_, SolverError> {
            let mut slope = inner(&cur.x, &rg, v)?;
            let mut restarted = false;
            if !(slope < 0.0) {
                *v = rg.scaled(-1.0);
                slope = inner(&cur.x, &rg, v)?;
                restarted = true;
            }
            let accepted = backtrack(
                problem,
                ops,
                alpha,
                cfg.armijo_beta,
                |a| retract(&cur.x, v, a),
                |a, f| f - cur.f <= cfg.armijo_sigma * a * slope,
            )?;
            let next = &accepted.next;
            let rg_next = inverse_metric_apply(&next.x, &next.g)?;
            let v_moved = transport_to(&cur.x, &next.x, v)?;
            let y = rg_next.axpy(-1.0, &inverse_metric_apply(&next.x, &cur.g)?);
            let beta = beta_coefficient(
                cfg.cg_beta_rule,
                if cfg.cg_beta_rule == BetaRule::Oviedo { 1.0 } else { cfg.cg_mu },
                &cur.x,
                &next.x,
                &rg,
                &rg_next,
                v,
                &v_moved,
                &y,
            )?;
            let v_next = match beta {
                Some(b) => rg_next.scaled(-1.0).axpy(b, &v_moved),
                None => rg_next.scaled(-1.0),
            };
            Ok((accepted, rg_next, v_next, beta.is_none(), restarted))
        };
        match step(&mut rec.ops, &mut v, alpha) {
            Ok((accepted, rg_next, v_next, reset, restarted)) => {
                if restarted {
                    if let Some(last) = rec.trace.last_mut() {
                        last.restart = true;
                    }
                    if let Some(last) = rec.iterates.last_mut() {
                        last.direction = Some(v.coords().to_vec());
                    }
                }
                let gn_next = match inner(&accepted.next.x, &rg_next, &rg_next) {
                    Ok(v) => v.max(0.0).sqrt(),
                    Err(e) => break Err(e.into()),
                };
                alpha = accepted.step;
                cur = accepted.next;
                rg = rg_next;
                v = v_next;
                rec.push(
                    Entry {
                        objective: cur.f,
                        grad_norm: gn_next,
                        step_size: accepted.step,
                        inner_backtracks: accepted.backtracks,
                        restart: reset,
                        ..Entry::default()
                    },
                    || snapshot(&cur, &v),
                );
            }
            Err(e) => break Err(e),
        }
    };
    Ok(rec.finish(cur.x, outcome))
}
