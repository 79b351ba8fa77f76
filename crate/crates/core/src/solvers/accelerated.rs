//! SMART and its accelerated Bregman variants.
//!
//! The accelerated methods keep three sequences: the iterate `x_k`, the
//! mirror sequence `z_k` and the extrapolated point
//! `y_k = (1 - θ_k) x_k + θ_k z_k` where the gradient is evaluated. Because
//! `y_k` and `x_{k+1}` are convex combinations of `x_k`, `z_k` and `z_{k+1}`,
//! their images under `A` are combined from the tracked `Ax_k` and `Az_k`
//! instead of being recomputed. An iteration therefore costs one transpose
//! product for `∂f(y_k)` and one forward product for `Az_{k+1}`.

use super::theta::{solve_theta, theta_next};
use super::{check_start, Entry, Recorder, Snapshot, SolveResult, SolverConfig, Termination};
use crate::error::SolverError;
use crate::geometry::{bregman_divergence, exp_shorthand, gradient_norm_sq, mirror_step, Point};
use crate::linops::OpCounter;
use crate::objective::{kl, KlProblem};

/// Maximum number of gain increases per FSMART-G iteration.
pub const MAX_GAIN_INCREASES: usize = 50;

/// Multiplicative steps `x_{k+1} = exp_{x_k}(-∂f(x_k) / L)`.
pub fn smart(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    check_start(problem, x0, cfg)?;
    let mut rec = Recorder::new(cfg);
    let tau = 1.0 / problem.lipschitz();

    let mut x = x0.clone();
    let ax = problem.forward(x.coords(), &mut rec.ops)?;
    let mut f = problem.value_from_forward(&ax)?;
    let mut g = problem.gradient_from_forward(&ax, &mut rec.ops)?;
    let mut gn = gradient_norm_sq(&x, &g)?.sqrt();
    rec.push(Entry { objective: f, grad_norm: gn, ..Entry::default() }, || point_snapshot(&x));

    let outcome = loop {
        if gn <= cfg.grad_tol {
            break Ok(Termination::GradTol);
        }
        if rec.iterations() >= cfg.max_iter {
            break Ok(Termination::MaxIter);
        }
        let step = |ops: &mut OpCounter| -> Result<_, SolverError> {
            let exponent: Vec<f64> = g.iter().map(|gi| -tau * gi).collect();
            let x_new = exp_shorthand(&x, &exponent)?;
            let ax = problem.forward(x_new.coords(), ops)?;
            let f = problem.value_from_forward(&ax)?;
            let g = problem.gradient_from_forward(&ax, ops)?;
            let gn = gradient_norm_sq(&x_new, &g)?.sqrt();
            Ok((x_new, f, g, gn))
        };
        match step(&mut rec.ops) {
            Ok((x_new, f_new, g_new, gn_new)) => {
                x = x_new;
                f = f_new;
                g = g_new;
                gn = gn_new;
                rec.push(Entry { objective: f, grad_norm: gn, step_size: tau, ..Entry::default() }, || {
                    point_snapshot(&x)
                });
            }
            Err(e) => break Err(e),
        }
    };
    Ok(rec.finish(x, outcome))
}

fn point_snapshot(x: &Point) -> Snapshot {
    Snapshot { x: x.coords().to_vec(), ..Snapshot::default() }
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(u, v)| (1.0 - t) * u + t * v).collect()
}

/// Current state of an accelerated run.
struct State {
    x: Point,
    ax: Vec<f64>,
    f: f64,
    z: Point,
    az: Vec<f64>,
}

impl State {
    fn start(problem: &KlProblem, x0: &Point, ops: &mut OpCounter) -> Result<Self, SolverError> {
        let ax = problem.forward(x0.coords(), ops)?;
        let f = problem.value_from_forward(&ax)?;
        Ok(Self { x: x0.clone(), az: ax.clone(), ax, f, z: x0.clone() })
    }

    /// `y = (1 - θ) x + θ z`, its image and `∂f(y)`; one transpose product.
    fn extrapolate(&self, problem: &KlProblem, theta: f64, ops: &mut OpCounter) -> Result<Extrapolated, SolverError> {
        let y = self.x.convex_combination(&self.z, theta)?;
        let ay = lerp(&self.ax, &self.az, theta);
        let g = problem.gradient_from_forward(&ay, ops)?;
        let grad_norm = gradient_norm_sq(&y, &g)?.sqrt();
        Ok(Extrapolated { y, ay, g, grad_norm })
    }

    /// Mirror step on `z` with step `tau`, then `x⁺ = (1 - θ) x + θ z⁺`;
    /// one forward product.
    fn trial(
        &self,
        problem: &KlProblem,
        ext: &Extrapolated,
        theta: f64,
        tau: f64,
        ops: &mut OpCounter,
    ) -> Result<Trial, SolverError> {
        let z = mirror_step(&self.z, &ext.g, tau)?;
        let az = problem.forward(z.coords(), ops)?;
        let x = self.x.convex_combination(&z, theta)?;
        let ax = lerp(&self.ax, &az, theta);
        let f = problem.value_from_forward(&ax)?;
        Ok(Trial { state: State { x, ax, f, z, az } })
    }

    fn snapshot(&self, previous: Option<(&Extrapolated, f64)>) -> Snapshot {
        Snapshot {
            x: self.x.coords().to_vec(),
            y: previous.map(|(e, _)| e.y.coords().to_vec()),
            z: Some(self.z.coords().to_vec()),
            theta: previous.map(|(_, t)| t),
            ax: Some(self.ax.clone()),
            ay: previous.map(|(e, _)| e.ay.clone()),
            direction: None,
        }
    }
}

struct Extrapolated {
    y: Point,
    ay: Vec<f64>,
    g: Vec<f64>,
    grad_norm: f64,
}

struct Trial {
    state: State,
}

impl Trial {
    /// `(KL(Ax⁺, Ay), D_φ(z⁺, z))`, the two sides of the local triangle
    /// scaling test before scaling.
    fn tse_sides(&self, ext: &Extrapolated, z_old: &Point) -> Result<(f64, f64), SolverError> {
        let lhs = kl(&self.state.ax, &ext.ay)?;
        let d = bregman_divergence(z_old.kind(), self.state.z.coords(), z_old)?;
        Ok((lhs, d))
    }
}

/// Shared driver: `step` performs one outer iteration from the current
/// extrapolation and returns the new state, the next `θ`, the step size, the
/// certificate and the number of rejected trials.
struct StepOutcome {
    state: State,
    theta_next: f64,
    step_size: f64,
    certificate: Option<f64>,
    backtracks: usize,
    /// Extrapolation and `θ` of the accepted trial when they differ from the
    /// ones the driver supplied.
    accepted: Option<(Extrapolated, f64)>,
}

fn run_accelerated<S>(
    problem: &KlProblem,
    x0: &Point,
    cfg: &SolverConfig,
    initial_certificate: Option<f64>,
    mut step: S,
) -> Result<SolveResult, SolverError>
where
    S: FnMut(&State, &Extrapolated, f64, &mut OpCounter) -> Result<StepOutcome, SolverError>,
{
    check_start(problem, x0, cfg)?;
    let mut rec = Recorder::new(cfg);
    let mut state = State::start(problem, x0, &mut rec.ops)?;
    let mut theta = 1.0;
    let mut ext = state.extrapolate(problem, theta, &mut rec.ops)?;
    rec.push(
        Entry { objective: state.f, grad_norm: ext.grad_norm, certificate: initial_certificate, ..Entry::default() },
        || state.snapshot(None),
    );

    let outcome = loop {
        if ext.grad_norm <= cfg.grad_tol {
            break Ok(Termination::GradTol);
        }
        if rec.iterations() >= cfg.max_iter {
            break Ok(Termination::MaxIter);
        }
        let out = match step(&state, &ext, theta, &mut rec.ops) {
            Ok(out) => out,
            Err(e) => break Err(e),
        };
        let next_ext = match out.state.extrapolate(problem, out.theta_next, &mut rec.ops) {
            Ok(e) => e,
            Err(e) => break Err(e),
        };
        let previous = out.accepted.unwrap_or((ext, theta));
        state = out.state;
        rec.push(
            Entry {
                objective: state.f,
                grad_norm: next_ext.grad_norm,
                step_size: out.step_size,
                certificate: out.certificate,
                inner_backtracks: out.backtracks,
                restart: false,
            },
            || state.snapshot(Some((&previous.0, previous.1))),
        );
        theta = out.theta_next;
        ext = next_ext;
    };
    Ok(rec.finish(state.x, outcome))
}

/// Accelerated Bregman proximal gradient with fixed `γ = 2` momentum and the
/// constant step `1/L`.
pub fn fsmart(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let tau = 1.0 / problem.lipschitz();
    let newton_tol = cfg.newton_tol;
    run_accelerated(problem, x0, cfg, None, |state, ext, theta, ops| {
        let trial = state.trial(problem, ext, theta, tau, ops)?;
        Ok(StepOutcome {
            state: trial.state,
            theta_next: theta_next(theta, 2.0, newton_tol)?,
            step_size: tau,
            certificate: None,
            backtracks: 0,
            accepted: None,
        })
    })
}

/// Accelerated method with adaptive triangle scaling exponent.
///
/// Each iteration starts from the previously accepted exponent `γ` and
/// takes the mirror step `1 / (θ_k^{γ-1} L)`. The trial is accepted when
/// `KL(Ax⁺, Ay_k) < θ_k^γ L D_φ(z⁺, z_k)`, the Bregman gap of `f` between
/// `x⁺` and `y_k = x⁺ - θ_k (z⁺ - z_k)`. Otherwise `γ` drops by `e_delta`
/// and only the mirror step is redone, since `θ_k`, `y_k` and `∂f(y_k)` do
/// not depend on `γ`. At the floor `e_gamma_min` the trial is accepted
/// unconditionally. The certificate is the accepted `γ`, and `θ_{k+1}`
/// solves `(1 - θ) / θ^γ = 1 / θ_k^γ` with that `γ`.
///
/// `γ` is recomputed as `e_gamma0 - n·e_delta` from the number `n` of
/// reductions so that repeated subtraction does not accumulate rounding.
pub fn fsmart_e(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    let l = problem.lipschitz();
    let (gamma0, gamma_min, delta, newton_tol) = (cfg.e_gamma0, cfg.e_gamma_min, cfg.e_delta, cfg.newton_tol);
    let mut reductions = 0u32;
    let mut gamma = gamma0.max(gamma_min);
    run_accelerated(problem, x0, cfg, Some(gamma), move |state, ext, theta, ops| {
        let mut backtracks = 0;
        loop {
            let tau = 1.0 / (theta.powf(gamma - 1.0) * l);
            let at_floor = gamma <= gamma_min;
            let attempt = state.trial(problem, ext, theta, tau, ops).and_then(|trial| {
                let (lhs, d) = trial.tse_sides(ext, &state.z)?;
                let theta_new = theta_next(theta, gamma, newton_tol)?;
                Ok((trial, theta_new, lhs, theta.powf(gamma) * l * d))
            });
            match attempt {
                Ok((trial, theta_new, lhs, rhs)) if lhs < rhs || at_floor => {
                    if !(lhs < rhs) {
                        log::debug!("accepting at gamma floor: {lhs:e} vs {rhs:e}");
                    }
                    return Ok(StepOutcome {
                        state: trial.state,
                        theta_next: theta_new,
                        step_size: tau,
                        certificate: Some(gamma),
                        backtracks,
                        accepted: None,
                    });
                }
                Err(e) if at_floor => return Err(e),
                _ => {}
            }
            reductions += 1;
            gamma = (gamma0 - f64::from(reductions) * delta).max(gamma_min);
            backtracks += 1;
        }
    })
}

/// Accelerated method with fixed exponent `g_gamma` and adaptive gain.
///
/// A trial gain `M` starts at `max(G_{k-1} / g_rho, g_gain_min)` (or 1 at
/// the first iteration). For each trial, `θ_k` solves
/// `(1 - θ) / (M θ^γ) = 1 / (G_{k-1} θ_{k-1}^γ)`, the gradient is
/// evaluated at the resulting `y_k` and the mirror step `1 / (M θ^{γ-1} L)`
/// is taken. The trial passes when
/// `KL(Ax⁺, Ay_k) ≤ M θ^γ L D_φ(z⁺, z_k)`; otherwise `M` grows by `g_rho`.
/// The certificate is the accepted gain `G_k`.
///
/// `θ_k` depends on the trial gain, so the extrapolation computed by the
/// driver is the first trial of the next iteration and later trials pay for
/// their own gradient.
pub fn fsmart_g(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    check_start(problem, x0, cfg)?;
    let l = problem.lipschitz();
    let gamma = cfg.g_gamma;
    let (rho, gain_min, newton_tol) = (cfg.g_rho, cfg.g_gain_min, cfg.newton_tol);
    // (G_{k-1}, θ_{k-1}) once an iteration has been accepted
    let mut history: Option<(f64, f64)> = None;
    let theta_for = move |gain: f64, history: Option<(f64, f64)>| -> Result<f64, SolverError> {
        match history {
            None => Ok(1.0),
            Some((g_prev, t_prev)) => solve_theta(gain / (g_prev * t_prev.powf(gamma)), gamma, newton_tol),
        }
    };
    let first_gain = |history: Option<(f64, f64)>| history.map_or(1.0, |(g, _)| (g / rho).max(gain_min));

    run_accelerated(problem, x0, cfg, Some(1.0), move |state, ext, theta, ops| {
        let mut gain = first_gain(history);
        let mut theta = theta;
        let mut owned: Option<Extrapolated> = None;
        for backtracks in 0..=MAX_GAIN_INCREASES {
            let current = owned.as_ref().unwrap_or(ext);
            let tau = 1.0 / (gain * theta.powf(gamma - 1.0) * l);
            if let Ok(trial) = state.trial(problem, current, theta, tau, ops) {
                let (lhs, d) = trial.tse_sides(current, &state.z)?;
                if lhs <= gain * theta.powf(gamma) * l * d {
                    history = Some((gain, theta));
                    let next_gain = first_gain(history);
                    return Ok(StepOutcome {
                        state: trial.state,
                        theta_next: theta_for(next_gain, history)?,
                        step_size: tau,
                        certificate: Some(gain),
                        backtracks,
                        accepted: owned.map(|e| (e, theta)),
                    });
                }
            }
            gain *= rho;
            theta = theta_for(gain, history)?;
            owned = Some(state.extrapolate(problem, theta, ops)?);
        }
        Err(SolverError::InnerLoop(MAX_GAIN_INCREASES))
    })
}
