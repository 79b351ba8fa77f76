//! The momentum recursion of the accelerated methods.

use crate::error::SolverError;

const NEWTON_STEPS: usize = 100;

/// Root `t ∈ (0, 1]` of `(1 - t) / t^γ = rhs` for `rhs ≥ 0` and `γ ≥ 1`.
///
/// `γ = 1` and `γ = 2` have closed forms. Other exponents use Newton's
/// method on `h(t) = 1 - t - rhs·t^γ`, which is decreasing and concave, so
/// iterates started to the right of the root decrease monotonically onto it.
/// Iteration stops once the update is below `tol` relative to `t`.
pub fn solve_theta(rhs: f64, gamma: f64, tol: f64) -> Result<f64, SolverError> {
    if !(rhs >= 0.0) || !rhs.is_finite() || !(gamma >= 1.0) || !gamma.is_finite() {
        return Err(SolverError::NoRoot);
    }
    if rhs == 0.0 {
        return Ok(1.0);
    }
    if gamma == 1.0 {
        return Ok(1.0 / (1.0 + rhs));
    }
    if gamma == 2.0 {
        return Ok(2.0 / (1.0 + (1.0 + 4.0 * rhs).sqrt()));
    }
    // At t = rhs^(-1/γ) the second term alone equals 1, so h(t) ≤ 0.
    let mut t = rhs.powf(-1.0 / gamma).min(1.0);
    for _ in 0..NEWTON_STEPS {
        let tg = t.powf(gamma);
        let h = 1.0 - t - rhs * tg;
        let dh = -1.0 - rhs * gamma * tg / t;
        let next = t - h / dh;
        if !(next > 0.0) || !next.is_finite() {
            return Err(SolverError::Newton);
        }
        let converged = (next - t).abs() <= tol * next;
        t = next;
        if converged {
            return Ok(t.min(1.0));
        }
    }
    Err(SolverError::Newton)
}

/// `θ_{k+1}` from `(1 - θ_{k+1}) / θ_{k+1}^γ = 1 / θ_k^γ`.
pub fn theta_next(theta: f64, gamma: f64, tol: f64) -> Result<f64, SolverError> {
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(SolverError::NoRoot);
    }
    solve_theta(theta.powf(-gamma), gamma, tol)
}
