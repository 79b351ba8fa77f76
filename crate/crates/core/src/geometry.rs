//! Fisher-Rao geometry of the positive orthant, the open unit box and the
//! relative interior of the probability simplex.
//!
//! All three manifolds use diagonal metrics in ambient coordinates:
//!
//! | kind    | `G(x)`              | `G(x)^{-1}`            | kernel `φ`                          |
//! |---------|---------------------|------------------------|-------------------------------------|
//! | Orthant | `Diag(1/x)`         | `Diag(x)`              | `⟨x, log x⟩ - ⟨1, x⟩`               |
//! | Box     | `Diag(1/(x(1-x)))`  | `Diag(x(1-x))`         | `⟨x, log x⟩ + ⟨1-x, log(1-x)⟩`      |
//! | Simplex | `Diag(1/p)` on `T₀` | `Π_p = Diag(p) - ppᵀ`  | `⟨p, log p⟩`                        |
//!
//! Retractions follow the e-geodesics, which are straight lines in the dual
//! coordinates `∂φ(x)`. That is why a Riemannian gradient step along the
//! e-geodesic coincides with a mirror descent step for the matching kernel.

use crate::error::GeometryError;

/// Largest exponent argument accepted before a retraction reports overflow.
pub const EXPONENT_GUARD: f64 = 700.0;

/// Tolerance on `Σ p = 1` for simplex points.
pub const SIMPLEX_SUM_TOL: f64 = 1e-12;

/// Tolerance on `Σ v = 0` (relative to `Σ|v|`) for simplex tangents.
pub const TANGENT_SUM_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ManifoldKind {
    Orthant,
    Box,
    Simplex,
}

impl ManifoldKind {
    pub const ALL: [ManifoldKind; 3] = [ManifoldKind::Orthant, ManifoldKind::Box, ManifoldKind::Simplex];

    pub fn name(self) -> &'static str {
        match self {
            ManifoldKind::Orthant => "orthant",
            ManifoldKind::Box => "box",
            ManifoldKind::Simplex => "simplex",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        match name.to_ascii_lowercase().as_str() {
            "orthant" => Some(ManifoldKind::Orthant),
            "box" => Some(ManifoldKind::Box),
            "simplex" => Some(ManifoldKind::Simplex),
            _ => None,
        }
    }
}

/// A point in the interior of one of the three domains.
#[derive(Debug, Clone, PartialEq)]
pub struct Point {
    kind: ManifoldKind,
    coords: Vec<f64>,
}

impl Point {
    /// Validates `coords` against the open domain of `kind`.
    pub fn new(kind: ManifoldKind, coords: Vec<f64>) -> Result<Self, GeometryError> {
        for (index, &value) in coords.iter().enumerate() {
            let inside = match kind {
                ManifoldKind::Orthant | ManifoldKind::Simplex => value > 0.0 && value.is_finite(),
                ManifoldKind::Box => value > 0.0 && value < 1.0,
            };
            if !inside {
                return Err(GeometryError::OutsideDomain { kind, index, value });
            }
        }
        if kind == ManifoldKind::Simplex {
            let sum: f64 = coords.iter().sum();
            if (sum - 1.0).abs() > SIMPLEX_SUM_TOL {
                return Err(GeometryError::NotNormalized { sum });
            }
        }
        Ok(Self { kind, coords })
    }

    /// The barycenter of each domain: `1` on the orthant, `1/2` on the box
    /// and the uniform distribution on the simplex.
    pub fn barycenter(kind: ManifoldKind, n: usize) -> Self {
        let value = match kind {
            ManifoldKind::Orthant => 1.0,
            ManifoldKind::Box => 0.5,
            ManifoldKind::Simplex => 1.0 / n as f64,
        };
        Self { kind, coords: vec![value; n] }
    }

    /// Wraps the output of a closed-form update, nudging coordinates that
    /// rounded onto the boundary back into the open domain. Simplex points
    /// are renormalized.
    pub(crate) fn from_update(kind: ManifoldKind, mut coords: Vec<f64>) -> Result<Self, GeometryError> {
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite { index });
        }
        match kind {
            ManifoldKind::Orthant => {
                for c in &mut coords {
                    *c = c.max(f64::MIN_POSITIVE);
                }
            }
            ManifoldKind::Box => {
                let upper = 1.0 - f64::EPSILON / 2.0;
                for c in &mut coords {
                    *c = c.clamp(f64::MIN_POSITIVE, upper);
                }
            }
            ManifoldKind::Simplex => {
                for c in &mut coords {
                    *c = c.max(f64::MIN_POSITIVE);
                }
                let sum: f64 = coords.iter().sum();
                if (sum - 1.0).abs() > 1e-9 {
                    log::debug!("simplex drift {:e} before renormalization", sum - 1.0);
                }
                for c in &mut coords {
                    *c /= sum;
                }
            }
        }
        Ok(Self { kind, coords })
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    /// `(1 - s) self + s other`; both points share a kind and the domains are convex.
    pub fn convex_combination(&self, other: &Point, s: f64) -> Result<Point, GeometryError> {
        check_len(self.dim(), other.dim())?;
        let coords = self.coords.iter().zip(&other.coords).map(|(a, b)| (1.0 - s) * a + s * b).collect();
        Point::from_update(self.kind, coords)
    }
}

/// A tangent vector in ambient coordinates. On the simplex its entries sum to 0.
#[derive(Debug, Clone, PartialEq)]
pub struct Tangent {
    kind: ManifoldKind,
    coords: Vec<f64>,
}

impl Tangent {
    /// Accepts any vector on the orthant and box. On the simplex, round-off in
    /// `Σ v` is removed by subtracting the mean; a genuinely nonzero sum is an error.
    pub fn new(kind: ManifoldKind, coords: Vec<f64>) -> Result<Self, GeometryError> {
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(GeometryError::NonFinite { index });
        }
        if kind == ManifoldKind::Simplex {
            let sum: f64 = coords.iter().sum();
            let scale: f64 = coords.iter().map(|c| c.abs()).sum::<f64>().max(1.0);
            if sum.abs() > TANGENT_SUM_TOL * scale {
                return Err(GeometryError::NotTangent { sum });
            }
        }
        Ok(Self::projected(kind, coords))
    }

    pub fn zeros(kind: ManifoldKind, n: usize) -> Self {
        Self { kind, coords: vec![0.0; n] }
    }

    fn projected(kind: ManifoldKind, mut coords: Vec<f64>) -> Self {
        if kind == ManifoldKind::Simplex && !coords.is_empty() {
            let mean = coords.iter().sum::<f64>() / coords.len() as f64;
            for c in &mut coords {
                *c -= mean;
            }
        }
        Self { kind, coords }
    }

    /// Removes round-off in `Σ v` at a known base point `p` by subtracting
    /// `p Σ v`, the metric projection onto the tangent space. Entries stay
    /// proportional to `p_i`, which the metric weights by `1 / p_i`.
    fn projected_at(p: &Point, mut coords: Vec<f64>) -> Self {
        if p.kind == ManifoldKind::Simplex {
            let sum: f64 = coords.iter().sum();
            for (c, pi) in coords.iter_mut().zip(&p.coords) {
                *c -= pi * sum;
            }
        }
        Self { kind: p.kind, coords }
    }

    pub fn kind(&self) -> ManifoldKind {
        self.kind
    }

    pub fn coords(&self) -> &[f64] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<f64> {
        self.coords
    }

    pub fn scaled(&self, s: f64) -> Tangent {
        Tangent { kind: self.kind, coords: self.coords.iter().map(|c| s * c).collect() }
    }

    /// `self + s other`.
    pub fn axpy(&self, s: f64, other: &Tangent) -> Tangent {
        Tangent { kind: self.kind, coords: self.coords.iter().zip(&other.coords).map(|(a, b)| a + s * b).collect() }
    }
}

fn check_len(expected: usize, actual: usize) -> Result<(), GeometryError> {
    if expected == actual {
        Ok(())
    } else {
        Err(GeometryError::DimensionMismatch { expected, actual })
    }
}

fn check_tangent(x: &Point, v: &Tangent) -> Result<(), GeometryError> {
    if x.kind != v.kind {
        return Err(GeometryError::KindMismatch { point: x.kind, tangent: v.kind });
    }
    check_len(x.dim(), v.coords.len())
}

/// `Π_p w = p·w - p ⟨p, w⟩`.
fn replicator(p: &[f64], w: &[f64]) -> Vec<f64> {
    let mean: f64 = p.iter().zip(w).map(|(a, b)| a * b).sum();
    p.iter().zip(w).map(|(pi, wi)| pi * (wi - mean)).collect()
}

/// Diagonal of `G(x)^{-1}` (the simplex adds the rank-one correction separately).
fn inverse_metric_diag(kind: ManifoldKind, xi: f64) -> f64 {
    match kind {
        ManifoldKind::Orthant | ManifoldKind::Simplex => xi,
        ManifoldKind::Box => xi * (1.0 - xi),
    }
}

/// `G(x)^{-1} w`.
pub fn inverse_metric_apply(x: &Point, w: &[f64]) -> Result<Tangent, GeometryError> {
    check_len(x.dim(), w.len())?;
    let coords = match x.kind {
        ManifoldKind::Simplex => replicator(&x.coords, w),
        kind => x.coords.iter().zip(w).map(|(&xi, wi)| inverse_metric_diag(kind, xi) * wi).collect(),
    };
    Ok(Tangent::projected_at(x, coords))
}

/// Riemannian gradient from the Euclidean gradient.
pub fn riemannian_gradient(x: &Point, euclid_grad: &[f64]) -> Result<Tangent, GeometryError> {
    inverse_metric_apply(x, euclid_grad)
}

/// `⟨u, G(x) v⟩`.
pub fn inner(x: &Point, u: &Tangent, v: &Tangent) -> Result<f64, GeometryError> {
    check_tangent(x, u)?;
    check_tangent(x, v)?;
    let kind = x.kind;
    Ok(x.coords
        .iter()
        .zip(u.coords.iter().zip(&v.coords))
        .map(|(&xi, (ui, vi))| ui * vi / inverse_metric_diag(kind, xi))
        .sum())
}

pub fn norm(x: &Point, v: &Tangent) -> Result<f64, GeometryError> {
    inner(x, v, v).map(f64::sqrt)
}

/// `‖grad f(x)‖²_x = ⟨∂f, G(x)^{-1} ∂f⟩`, without forming the tangent.
pub fn gradient_norm_sq(x: &Point, euclid_grad: &[f64]) -> Result<f64, GeometryError> {
    check_len(x.dim(), euclid_grad.len())?;
    let kind = x.kind;
    let diag: f64 = x.coords.iter().zip(euclid_grad).map(|(&xi, g)| inverse_metric_diag(kind, xi) * g * g).sum();
    Ok(match kind {
        ManifoldKind::Simplex => {
            let mean: f64 = x.coords.iter().zip(euclid_grad).map(|(p, g)| p * g).sum();
            (diag - mean * mean).max(0.0)
        }
        _ => diag,
    })
}

fn guarded_exp(exponents: &[f64]) -> Result<(), GeometryError> {
    for (index, &e) in exponents.iter().enumerate() {
        if !e.is_finite() {
            return Err(GeometryError::NonFinite { index });
        }
        if e > EXPONENT_GUARD {
            return Err(GeometryError::Overflow { index, exponent: e });
        }
    }
    Ok(())
}

/// Applies the closed-form e-geodesic update given the exponent vector
/// `q = G(x) v` (orthant/simplex: `v/x`; box: `v/(x(1-x))`).
fn exponential_update(x: &Point, q: &[f64]) -> Result<Point, GeometryError> {
    guarded_exp(q)?;
    let coords = match x.kind {
        ManifoldKind::Orthant => x.coords.iter().zip(q).map(|(xi, qi)| xi * qi.exp()).collect(),
        ManifoldKind::Box => x
            .coords
            .iter()
            .zip(q)
            .map(|(&xi, qi)| {
                let num = xi * qi.exp();
                num / (1.0 - xi + num)
            })
            .collect(),
        ManifoldKind::Simplex => {
            // the normalizer is invariant to a common shift of the exponents
            let shift = q.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let weighted: Vec<f64> = x.coords.iter().zip(q).map(|(pi, qi)| pi * (qi - shift).exp()).collect();
            let z: f64 = weighted.iter().sum();
            weighted.into_iter().map(|w| w / z).collect()
        }
    };
    Point::from_update(x.kind, coords)
}

/// The e-geodesic `t ↦ Exp_x(t v)`.
pub fn retract(x: &Point, v: &Tangent, t: f64) -> Result<Point, GeometryError> {
    check_tangent(x, v)?;
    let kind = x.kind;
    let q: Vec<f64> = x.coords.iter().zip(&v.coords).map(|(&xi, vi)| t * vi / inverse_metric_diag(kind, xi)).collect();
    exponential_update(x, &q)
}

/// `exp_x(g) = Exp_x(G(x)^{-1} g)`: the e-geodesic driven by a Euclidean
/// covector. Descent steps pass `g = -τ ∂f(x)`.
pub fn exp_shorthand(x: &Point, euclid_grad: &[f64]) -> Result<Point, GeometryError> {
    check_len(x.dim(), euclid_grad.len())?;
    exponential_update(x, euclid_grad)
}

/// Dual coordinates `∂φ(x)`. On the simplex the representative `log p`
/// is returned; it is defined up to a multiple of `1`.
pub fn mirror_map(x: &Point) -> Vec<f64> {
    match x.kind {
        ManifoldKind::Orthant | ManifoldKind::Simplex => x.coords.iter().map(|c| c.ln()).collect(),
        ManifoldKind::Box => x.coords.iter().map(|c| (c / (1.0 - c)).ln()).collect(),
    }
}

/// `∂φ*(θ)`: exponential, logistic sigmoid or softmax.
pub fn inverse_mirror_map(kind: ManifoldKind, theta: &[f64]) -> Result<Point, GeometryError> {
    if let Some(index) = theta.iter().position(|t| t.is_nan()) {
        return Err(GeometryError::NonFinite { index });
    }
    let coords = match kind {
        ManifoldKind::Orthant => theta.iter().map(|t| t.exp()).collect(),
        ManifoldKind::Box => {
            theta.iter().map(|&t| if t >= 0.0 { 1.0 / (1.0 + (-t).exp()) } else { t.exp() / (1.0 + t.exp()) }).collect()
        }
        ManifoldKind::Simplex => {
            let shift = theta.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let e: Vec<f64> = theta.iter().map(|t| (t - shift).exp()).collect();
            let z: f64 = e.iter().sum();
            e.into_iter().map(|v| v / z).collect()
        }
    };
    Point::from_update(kind, coords)
}

/// Interior Bregman gradient step `∂φ*(∂φ(x) - τ ∂f)`, evaluated in dual
/// coordinates. Agrees with `exp_shorthand(x, -τ ∂f)`.
pub fn mirror_step(x: &Point, euclid_grad: &[f64], tau: f64) -> Result<Point, GeometryError> {
    check_len(x.dim(), euclid_grad.len())?;
    if !(tau > 0.0 && tau.is_finite()) {
        return Err(GeometryError::InvalidStep(tau));
    }
    let step: Vec<f64> = euclid_grad.iter().map(|g| -tau * g).collect();
    guarded_exp(&step)?;
    let theta: Vec<f64> = mirror_map(x).iter().zip(&step).map(|(t, s)| t + s).collect();
    inverse_mirror_map(x.kind, &theta)
}

/// Differential of the retraction, `T_{(x,u)} v = G(x')^{-1} G(x) v` with
/// `x' = Exp_x(u)`.
pub fn transport(x: &Point, u: &Tangent, v: &Tangent) -> Result<Tangent, GeometryError> {
    let x_new = retract(x, u, 1.0)?;
    transport_to(x, &x_new, v)
}

/// [`transport`] when the endpoint `x' = Exp_x(u)` is already known.
pub fn transport_to(x: &Point, x_new: &Point, v: &Tangent) -> Result<Tangent, GeometryError> {
    check_tangent(x, v)?;
    check_len(x.dim(), x_new.dim())?;
    let coords = match x.kind {
        ManifoldKind::Orthant => {
            x.coords.iter().zip(&x_new.coords).zip(&v.coords).map(|((a, b), vi)| b / a * vi).collect()
        }
        ManifoldKind::Box => x
            .coords
            .iter()
            .zip(&x_new.coords)
            .zip(&v.coords)
            .map(|((a, b), vi)| b * (1.0 - b) / (a * (1.0 - a)) * vi)
            .collect(),
        ManifoldKind::Simplex => {
            let scaled: Vec<f64> = v.coords.iter().zip(&x.coords).map(|(vi, p)| vi / p).collect();
            replicator(&x_new.coords, &scaled)
        }
    };
    Ok(Tangent::projected_at(x_new, coords))
}

/// Transport of the Riemannian gradient at `x` along `u`, from the Euclidean
/// gradient at `x`: `G(x')^{-1} ∂f(x)`.
pub fn transport_gradient(x: &Point, u: &Tangent, euclid_grad_at_x: &[f64]) -> Result<Tangent, GeometryError> {
    check_len(x.dim(), euclid_grad_at_x.len())?;
    let x_new = retract(x, u, 1.0)?;
    inverse_metric_apply(&x_new, euclid_grad_at_x)
}

/// One coordinate of the generalized KL divergence, `t log(t/s) - t + s ≥ 0`.
///
/// Written as `s h(d)` with `d = t/s - 1` and `h(d) = (1+d) log(1+d) - d`, so
/// that nearly equal arguments keep full relative accuracy.
pub(crate) fn kl_term(t: f64, s: f64) -> f64 {
    if t == 0.0 {
        return s;
    }
    let d = (t - s) / s;
    if d < -0.5 {
        // `d` rounds to -1 once `t/s` drops below machine precision; the
        // direct form has no cancellation in this range.
        return t * (t.ln() - s.ln()) - t + s;
    }
    let h = if d.abs() < 1e-2 {
        // h(d) = Σ_{n≥2} (-d)^n / (n (n-1))
        let mut term = d * d;
        let mut sum = 0.0;
        for n in 2..12 {
            let n = n as f64;
            sum += term / (n * (n - 1.0));
            term *= -d;
        }
        sum
    } else {
        (1.0 + d) * d.ln_1p() - d
    };
    (s * h).max(0.0)
}

/// `D_φ(x, y)` for the kernel matching `kind`. The first argument may lie on
/// the boundary of the domain, the second is interior.
pub fn bregman_divergence(kind: ManifoldKind, x: &[f64], y: &Point) -> Result<f64, GeometryError> {
    if y.kind != kind {
        return Err(GeometryError::KindMismatch { point: y.kind, tangent: kind });
    }
    check_len(y.dim(), x.len())?;
    for (index, &value) in x.iter().enumerate() {
        let inside = match kind {
            ManifoldKind::Orthant | ManifoldKind::Simplex => value >= 0.0 && value.is_finite(),
            ManifoldKind::Box => (0.0..=1.0).contains(&value),
        };
        if !inside {
            return Err(GeometryError::OutsideDomain { kind, index, value });
        }
    }
    let y = &y.coords;
    Ok(match kind {
        ManifoldKind::Orthant => x.iter().zip(y).map(|(&a, &b)| kl_term(a, b)).sum(),
        ManifoldKind::Box => x.iter().zip(y).map(|(&a, &b)| kl_term(a, b) + kl_term(1.0 - a, 1.0 - b)).sum(),
        ManifoldKind::Simplex => {
            let sum: f64 = x.iter().sum();
            if (sum - 1.0).abs() > 1e-9 {
                return Err(GeometryError::NotNormalized { sum });
            }
            // equals ⟨x, log(x/y)⟩ because both arguments sum to one
            x.iter().zip(y).map(|(&a, &b)| kl_term(a, b)).sum()
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::{E, LN_2};

    fn pt(kind: ManifoldKind, c: &[f64]) -> Point {
        Point::new(kind, c.to_vec()).unwrap()
    }

    fn tg(kind: ManifoldKind, c: &[f64]) -> Tangent {
        Tangent::new(kind, c.to_vec()).unwrap()
    }

    /// `t log(t/s) - t + s` tends to `s` as `t → 0`, including once `t/s`
    /// is below machine precision.
    #[test]
    fn kl_term_keeps_the_constant_for_tiny_arguments() {
        for &t in &[1e-14f64, 1e-17, 1e-100, 1e-250, 1e-320] {
            let expected = t * (t.ln() - 2f64.ln()) - t + 2.0;
            assert!((kl_term(t, 2.0) - expected).abs() <= 1e-15 * expected, "{t:e}");
        }
        assert_eq!(kl_term(0.0, 2.0), 2.0);
        // Continuity across the branch boundary at t = s/2.
        let (below, above) = (kl_term(1.0 - 1e-12, 2.0), kl_term(1.0 + 1e-12, 2.0));
        assert!((below - above).abs() < 1e-11);
        assert!((kl_term(1.0, 2.0) - (2.0 - 1.0 - LN_2)).abs() < 1e-15);
    }

    /// Near a face of the simplex the Riemannian gradient keeps tiny entries
    /// proportional to the tiny coordinates, so its metric norm stays bounded.
    #[test]
    fn simplex_gradient_near_a_face_has_a_consistent_norm() {
        let mut c = vec![1e-70, 3e-40, 2e-20, 0.3];
        c.push(1.0 - c.iter().sum::<f64>());
        let x = pt(ManifoldKind::Simplex, &c);
        let g = [0.7, -1.3, 2.1, 0.4, -0.2];
        let rg = inverse_metric_apply(&x, &g).unwrap();
        let via_inner = inner(&x, &rg, &rg).unwrap();
        let direct = gradient_norm_sq(&x, &g).unwrap();
        assert!((via_inner - direct).abs() <= 1e-12 * direct, "{via_inner:e} vs {direct:e}");
        let moved = transport_to(&x, &x, &rg).unwrap();
        assert!((inner(&x, &moved, &moved).unwrap() - direct).abs() <= 1e-12 * direct);
    }

    #[test]
    fn point_validation() {
        assert!(Point::new(ManifoldKind::Orthant, vec![1.0, 0.0]).is_err());
        assert!(Point::new(ManifoldKind::Box, vec![0.5, 1.0]).is_err());
        assert!(Point::new(ManifoldKind::Simplex, vec![0.5, 0.6]).is_err());
        assert!(Point::new(ManifoldKind::Simplex, vec![0.25, 0.75]).is_ok());
        assert!(Tangent::new(ManifoldKind::Simplex, vec![1.0, 0.0]).is_err());
        let t = Tangent::new(ManifoldKind::Simplex, vec![1.0, -1.0 + 1e-13]).unwrap();
        assert_eq!(t.coords().iter().sum::<f64>(), 0.0);
    }

    #[test]
    fn inverse_metric_examples() {
        let w = [3.0, -1.0, 2.0];
        let v = inverse_metric_apply(&pt(ManifoldKind::Orthant, &[1.0; 3]), &w).unwrap();
        assert_eq!(v.coords(), &w);
        let u = inverse_metric_apply(&Point::barycenter(ManifoldKind::Simplex, 3), &[1.0; 3]).unwrap();
        assert!(u.coords().iter().all(|c| c.abs() < 1e-16));
        let b = inverse_metric_apply(&pt(ManifoldKind::Box, &[0.5, 0.5]), &[4.0, 8.0]).unwrap();
        assert_eq!(b.coords(), &[1.0, 2.0]);
    }

    #[test]
    fn riemannian_gradient_examples() {
        let g = riemannian_gradient(&pt(ManifoldKind::Orthant, &[2.0, 3.0]), &[1.0, 1.0]).unwrap();
        assert_eq!(g.coords(), &[2.0, 3.0]);
        let p = pt(ManifoldKind::Simplex, &[0.2, 0.3, 0.5]);
        let g = riemannian_gradient(&p, &[1.0, -2.0, 0.7]).unwrap();
        assert!(g.coords().iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn inner_examples() {
        let x = pt(ManifoldKind::Orthant, &[2.0, 2.0]);
        let v = tg(ManifoldKind::Orthant, &[2.0, 2.0]);
        assert_eq!(inner(&x, &v, &v).unwrap(), 4.0);
        let p = pt(ManifoldKind::Simplex, &[0.2, 0.3, 0.5]);
        let u = tg(ManifoldKind::Simplex, &[1.0, -0.5, -0.5]);
        let w = tg(ManifoldKind::Simplex, &[0.1, 0.4, -0.5]);
        assert_eq!(inner(&p, &u, &w).unwrap(), inner(&p, &w, &u).unwrap());
        assert!(inner(&p, &u, &u).unwrap() > 0.0);
    }

    #[test]
    fn gradient_norm_matches_metric_norm() {
        let p = pt(ManifoldKind::Simplex, &[0.2, 0.3, 0.5]);
        let g = [1.0, -2.0, 0.7];
        let rg = riemannian_gradient(&p, &g).unwrap();
        let direct = inner(&p, &rg, &rg).unwrap();
        assert!((gradient_norm_sq(&p, &g).unwrap() - direct).abs() < 1e-14);
    }

    #[test]
    fn retract_examples() {
        let x = pt(ManifoldKind::Orthant, &[1.0, 1.0, 1.0]);
        let v = tg(ManifoldKind::Orthant, &[1.0, 1.0, 1.0]);
        let y = retract(&x, &v, 1.0).unwrap();
        assert!(y.coords().iter().all(|c| (c - E).abs() < 1e-15));
        for kind in ManifoldKind::ALL {
            let x = Point::barycenter(kind, 4);
            let v = riemannian_gradient(&x, &[0.3, -0.1, 2.0, 0.4]).unwrap();
            assert_eq!(retract(&x, &v, 0.0).unwrap(), x);
        }
        let p = pt(ManifoldKind::Simplex, &[0.1, 0.2, 0.7]);
        let v = tg(ManifoldKind::Simplex, &[5.0, -3.0, -2.0]);
        let q = retract(&p, &v, 2.5).unwrap();
        assert!((q.coords().iter().sum::<f64>() - 1.0).abs() < 1e-15);
        assert!(q.coords().iter().all(|&c| c > 0.0));
    }

    #[test]
    fn retract_overflow_is_reported() {
        let x = pt(ManifoldKind::Orthant, &[1.0, 1e-3]);
        let v = tg(ManifoldKind::Orthant, &[0.0, 1.0]);
        assert!(matches!(retract(&x, &v, 1.0), Err(GeometryError::Overflow { index: 1, .. })));
    }

    #[test]
    fn exp_shorthand_examples() {
        let x = pt(ManifoldKind::Box, &[0.5]);
        let y = exp_shorthand(&x, &[3f64.ln()]).unwrap();
        assert!((y.coords()[0] - 0.75).abs() < 1e-15);
        for kind in ManifoldKind::ALL {
            let x = Point::barycenter(kind, 3);
            assert_eq!(exp_shorthand(&x, &[0.0; 3]).unwrap(), x);
        }
    }

    #[test]
    fn mirror_step_examples() {
        let x = pt(ManifoldKind::Orthant, &[1.0]);
        let y = mirror_step(&x, &[1.0], 1.0).unwrap();
        assert!((y.coords()[0] - (-1.0f64).exp()).abs() < 1e-16);
        let x = pt(ManifoldKind::Box, &[0.3, 0.6]);
        let y = mirror_step(&x, &[1.0, -2.0], 1e-14).unwrap();
        for (a, b) in x.coords().iter().zip(y.coords()) {
            assert!((a - b).abs() < 1e-12);
        }
        assert!(mirror_step(&x, &[1.0, 1.0], 0.0).is_err());
    }

    #[test]
    fn transport_examples() {
        let x = pt(ManifoldKind::Orthant, &[1.0, 1.0]);
        let x_new = pt(ManifoldKind::Orthant, &[2.0, 3.0]);
        let v = tg(ManifoldKind::Orthant, &[1.0, 1.0]);
        assert_eq!(transport_to(&x, &x_new, &v).unwrap().coords(), &[2.0, 3.0]);
        // the same endpoint reached through the retraction
        let u = tg(ManifoldKind::Orthant, &[2f64.ln(), 3f64.ln()]);
        let t = transport(&x, &u, &v).unwrap();
        assert!((t.coords()[0] - 2.0).abs() < 1e-14 && (t.coords()[1] - 3.0).abs() < 1e-14);

        for kind in ManifoldKind::ALL {
            let x = pt(
                kind,
                &match kind {
                    ManifoldKind::Simplex => vec![0.2, 0.3, 0.5],
                    _ => vec![0.2, 0.3, 0.5],
                },
            );
            let v = riemannian_gradient(&x, &[1.0, -0.4, 0.25]).unwrap();
            let zero = Tangent::zeros(kind, 3);
            let t = transport(&x, &zero, &v).unwrap();
            for (a, b) in t.coords().iter().zip(v.coords()) {
                assert!((a - b).abs() < 1e-15);
            }
        }
    }

    #[test]
    fn transport_gradient_at_zero_is_gradient() {
        for kind in ManifoldKind::ALL {
            let x = Point::barycenter(kind, 3);
            let g = [0.4, -1.0, 0.3];
            let t = transport_gradient(&x, &Tangent::zeros(kind, 3), &g).unwrap();
            assert_eq!(t, riemannian_gradient(&x, &g).unwrap());
        }
        let p = pt(ManifoldKind::Simplex, &[0.2, 0.3, 0.5]);
        let u = tg(ManifoldKind::Simplex, &[0.05, 0.05, -0.1]);
        let t = transport_gradient(&p, &u, &[1.0, 2.0, 3.0]).unwrap();
        assert!(t.coords().iter().sum::<f64>().abs() < 1e-15);
    }

    #[test]
    fn bregman_examples() {
        let y = pt(ManifoldKind::Orthant, &[1.0, 1.0]);
        let d = bregman_divergence(ManifoldKind::Orthant, &[1.0, 2.0], &y).unwrap();
        assert!((d - (2.0 * LN_2 - 1.0)).abs() < 1e-15);
        let y = pt(ManifoldKind::Box, &[0.5, 0.5]);
        let d = bregman_divergence(ManifoldKind::Box, &[1.0, 1.0], &y).unwrap();
        assert!((d - 2.0 * LN_2).abs() < 1e-15);
        for kind in ManifoldKind::ALL {
            let x = Point::barycenter(kind, 3);
            assert_eq!(bregman_divergence(kind, x.coords(), &x).unwrap(), 0.0);
        }
        let p = pt(ManifoldKind::Simplex, &[0.2, 0.3, 0.5]);
        let q = [0.0, 0.5, 0.5];
        let d = bregman_divergence(ManifoldKind::Simplex, &q, &p).unwrap();
        let want = 0.5 * (0.5f64 / 0.3).ln() + 0.5 * (0.5f64 / 0.5).ln();
        assert!((d - want).abs() < 1e-15);
        assert!(bregman_divergence(ManifoldKind::Box, &[1.2, 0.0], &y).is_err());
    }
}
