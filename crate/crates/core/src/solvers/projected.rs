//! Euclidean projected gradient on the box.

use super::{check_start, Entry, Recorder, Snapshot, SolveResult, SolverConfig, Termination, MAX_BACKTRACKS};
use crate::error::SolverError;
use crate::geometry::{ManifoldKind, Point};
use crate::linops::OpCounter;
use crate::objective::KlProblem;

/// Distance kept from the faces of the box so iterates stay interior.
pub const PROJECTION_MARGIN: f64 = 1e-12;

fn project(values: impl Iterator<Item = f64>) -> Result<Point, SolverError> {
    let coords = values.map(|v| v.clamp(PROJECTION_MARGIN, 1.0 - PROJECTION_MARGIN)).collect();
    Ok(Point::new(ManifoldKind::Box, coords)?)
}

/// Euclidean norm of the gradient mapping `x - P(x - ∂f(x))`, zero exactly
/// at stationary points of the box-constrained problem.
fn mapping_norm(x: &Point, g: &[f64]) -> f64 {
    x.coords()
        .iter()
        .zip(g)
        .map(|(xi, gi)| {
            let d = xi - (xi - gi).clamp(0.0, 1.0);
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

/// Projected gradient `x⁺ = P(x - τ ∂f(x))` onto `[ε, 1 - ε]^n` with
/// monotone Armijo backtracking `f(x⁺) ≤ f(x) + σ ⟨∂f(x), x⁺ - x⟩`. The
/// accepted step is the first trial of the next iteration. Only defined on
/// the box.
pub fn pg_armijo(problem: &KlProblem, x0: &Point, cfg: &SolverConfig) -> Result<SolveResult, SolverError> {
    if problem.kind() != ManifoldKind::Box {
        return Err(SolverError::UnsupportedManifold { algorithm: "PG", kind: problem.kind() });
    }
    check_start(problem, x0, cfg)?;
    let mut rec = Recorder::new(cfg);
    let mut x = x0.clone();
    let ax = problem.forward(x.coords(), &mut rec.ops)?;
    let mut f = problem.value_from_forward(&ax)?;
    let mut g = problem.gradient_from_forward(&ax, &mut rec.ops)?;
    let mut gn = mapping_norm(&x, &g);
    let snapshot = |x: &Point| Snapshot { x: x.coords().to_vec(), ..Snapshot::default() };
    rec.push(Entry { objective: f, grad_norm: gn, ..Entry::default() }, || snapshot(&x));
    let mut tau = cfg.init_step;

    let outcome = loop {
        if gn <= cfg.grad_tol {
            break Ok(Termination::GradTol);
        }
        if rec.iterations() >= cfg.max_iter {
            break Ok(Termination::MaxIter);
        }
        let step = |ops: &mut OpCounter, tau0: f64| -> Result<_, SolverError> {
            let mut trial_tau = tau0;
            for backtracks in 0..=MAX_BACKTRACKS {
                let trial = project(x.coords().iter().zip(&g).map(|(xi, gi)| xi - trial_tau * gi))?;
                let ax = problem.forward(trial.coords(), ops)?;
                let f_trial = problem.value_from_forward(&ax)?;
                let predicted: f64 =
                    g.iter().zip(trial.coords().iter().zip(x.coords())).map(|(gi, (a, b))| gi * (a - b)).sum();
                if f_trial <= f + cfg.armijo_sigma * predicted {
                    let g_trial = problem.gradient_from_forward(&ax, ops)?;
                    return Ok((trial, f_trial, g_trial, trial_tau, backtracks));
                }
                trial_tau *= cfg.armijo_beta;
            }
            Err(SolverError::LineSearch(MAX_BACKTRACKS))
        };
        match step(&mut rec.ops, tau) {
            Ok((x_new, f_new, g_new, tau_new, backtracks)) => {
                x = x_new;
                f = f_new;
                g = g_new;
                tau = tau_new;
                gn = mapping_norm(&x, &g);
                rec.push(
                    Entry {
                        objective: f,
                        grad_norm: gn,
                        step_size: tau,
                        inner_backtracks: backtracks,
                        ..Entry::default()
                    },
                    || snapshot(&x),
                );
            }
            Err(e) => break Err(e),
        }
    };
    Ok(rec.finish(x, outcome))
}
