//! The regression objective `f(x) = KL(Ax, b)`.

use std::sync::Arc;

use crate::error::ObjectiveError;
use crate::geometry::{kl_term, ManifoldKind, Point};
use crate::linops::{NonnegativeSparseMatrix, OpCounter};

/// Negative round-off tolerated in the first argument of [`kl`].
pub const NEGATIVE_ROUNDOFF: f64 = 1e-14;

/// Generalized KL divergence `⟨y, log y - log y'⟩ - ⟨1, y - y'⟩`.
pub fn kl(y: &[f64], yp: &[f64]) -> Result<f64, ObjectiveError> {
    if y.len() != yp.len() {
        return Err(ObjectiveError::DimensionMismatch { expected: yp.len(), actual: y.len() });
    }
    let mut total = 0.0;
    for (index, (&t, &s)) in y.iter().zip(yp).enumerate() {
        if !(s > 0.0) || !s.is_finite() {
            return Err(ObjectiveError::NonPositiveReference { index, value: s });
        }
        if t < -NEGATIVE_ROUNDOFF || t.is_nan() {
            return Err(ObjectiveError::NegativeArgument { index, value: t });
        }
        total += kl_term(t.max(0.0), s);
    }
    Ok(total)
}

/// Data `(A, b)` together with the constraint manifold.
#[derive(Debug, Clone)]
pub struct KlProblem {
    matrix: Arc<NonnegativeSparseMatrix>,
    b: Vec<f64>,
    kind: ManifoldKind,
    lipschitz: f64,
}

impl KlProblem {
    pub fn new(
        matrix: impl Into<Arc<NonnegativeSparseMatrix>>,
        b: Vec<f64>,
        kind: ManifoldKind,
    ) -> Result<Self, ObjectiveError> {
        let matrix = matrix.into();
        if b.len() != matrix.rows() {
            return Err(ObjectiveError::DimensionMismatch { expected: matrix.rows(), actual: b.len() });
        }
        if let Some((index, &value)) = b.iter().enumerate().find(|(_, v)| !(**v > 0.0 && v.is_finite())) {
            return Err(ObjectiveError::NonPositiveReference { index, value });
        }
        let lipschitz = matrix.one_norm();
        Ok(Self { matrix, b, kind, lipschitz })
    }

    pub fn matrix(&self) -> &NonnegativeSparseMatrix {
        &self.matrix
    }

    pub fn shared_matrix(&self) -> Arc<NonnegativeSparseMatrix> {
        Arc::clone(&self.matrix)
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    /// Relative smoothness constant `L = ‖A‖₁`.
    pub fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    pub fn dim(&self) -> usize {
        self.matrix.cols()
    }

    fn check_point(&self, x: &Point) -> Result<(), ObjectiveError> {
        if x.kind() != self.kind {
            return Err(ObjectiveError::KindMismatch { problem: self.kind, point: x.kind() });
        }
        Ok(())
    }

    /// `Ax` for raw coordinates.
    pub fn forward(&self, x: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>, ObjectiveError> {
        Ok(self.matrix.matvec(x, ops)?)
    }

    /// `KL(Ax, b)` from a precomputed `Ax`.
    pub fn value_from_forward(&self, ax: &[f64]) -> Result<f64, ObjectiveError> {
        kl(ax, &self.b)
    }

    /// `A^T log(Ax / b)` from a precomputed `Ax`; one transpose product.
    pub fn gradient_from_forward(&self, ax: &[f64], ops: &mut OpCounter) -> Result<Vec<f64>, ObjectiveError> {
        let ratio: Vec<f64> = ax.iter().zip(&self.b).map(|(a, b)| (a / b).ln()).collect();
        if let Some(i) = ratio.iter().position(|r| !r.is_finite()) {
            return Err(ObjectiveError::NonFiniteGradient(i));
        }
        let g = self.matrix.rmatvec(&ratio, ops)?;
        if let Some(i) = g.iter().position(|v| !v.is_finite()) {
            return Err(ObjectiveError::NonFiniteGradient(i));
        }
        Ok(g)
    }

    /// `f(x)`; one product.
    pub fn objective(&self, x: &Point, ops: &mut OpCounter) -> Result<f64, ObjectiveError> {
        self.check_point(x)?;
        let ax = self.forward(x.coords(), ops)?;
        self.value_from_forward(&ax)
    }

    /// `∂f(x)`; two products.
    pub fn gradient(&self, x: &Point, ops: &mut OpCounter) -> Result<Vec<f64>, ObjectiveError> {
        self.check_point(x)?;
        let ax = self.forward(x.coords(), ops)?;
        self.gradient_from_forward(&ax, ops)
    }

    /// `f(x)` and `∂f(x)` sharing the forward product; two products.
    pub fn value_and_gradient(&self, x: &Point, ops: &mut OpCounter) -> Result<(f64, Vec<f64>), ObjectiveError> {
        self.check_point(x)?;
        let ax = self.forward(x.coords(), ops)?;
        let value = self.value_from_forward(&ax)?;
        let grad = self.gradient_from_forward(&ax, ops)?;
        Ok((value, grad))
    }

    /// Bregman distance of `f`, which for this objective is `KL(Ax, Ay)`.
    pub fn bregman_gap(&self, x: &Point, y: &Point, ops: &mut OpCounter) -> Result<f64, ObjectiveError> {
        self.check_point(x)?;
        self.check_point(y)?;
        let ax = self.forward(x.coords(), ops)?;
        let ay = self.forward(y.coords(), ops)?;
        kl(&ax, &ay)
    }
}
