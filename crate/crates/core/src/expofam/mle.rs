//! Maximum likelihood over the closed ℘-ball.
//!
//! The objective `g(θ) = ⟨θ,τ⟩ − ψ(θ)` is strictly concave. An interior
//! optimum is found by damped Newton from the origin. When the unconstrained
//! optimum lies outside the ball (or does not exist because τ sits on the
//! boundary of the hull), the constrained maximizer is the point on the sphere
//! where `∇g(θ) = μθ` for some `μ > 0`; it is located by bisection on μ, each
//! step solving the strongly concave penalized problem
//! `g(θ) − μ‖θ‖²/2` by Newton again.

use nalgebra::DMatrix;

use super::{check_theta, dot, evaluate, hull_residual, norm, psi_pmf, to_dvec, FamilySpec, ParamVector};
use crate::error::{domain, spec, Result};

/// Newton stops once the gradient norm drops below this.
pub const MLE_GRAD_TOL: f64 = 1e-10;
pub const MLE_MAX_ITERS: usize = 200;

/// Distance tolerance for "inside the convex hull of τ(x)".
const HULL_TOL: f64 = 1e-9;

/// `θ̂(τ) = argmax_{‖θ‖≤℘} ⟨θ,τ⟩ − ψ(θ)`, rejecting targets outside the hull.
pub fn mle(family: &FamilySpec, tau: &[f64]) -> Result<ParamVector> {
    if tau.len() != family.d() {
        return spec(format!("target has length {}, expected d = {}", tau.len(), family.d()));
    }
    let resid = hull_residual(family.tau_table(), tau);
    if resid > HULL_TOL {
        return domain(format!(
            "target {tau:?} lies outside the convex hull of the statistic table (distance ≈ {resid:e})"
        ));
    }
    constrained_argmax(family, tau)
}

/// The ℘-ball maximizer for any finite target, without the hull check.
pub fn constrained_argmax(family: &FamilySpec, tau: &[f64]) -> Result<ParamVector> {
    if tau.len() != family.d() {
        return spec(format!("target has length {}, expected d = {}", tau.len(), family.d()));
    }
    if tau.iter().any(|v| !v.is_finite()) {
        return domain("target has a non-finite component");
    }
    let rho = family.rho_max();
    let zero = vec![0.0; family.d()];
    let free = penalized_newton(family, tau, 0.0, &zero, 64.0 * (rho + 1.0));
    if let Some(theta) = &free {
        if norm(theta) <= rho {
            return Ok(ParamVector::from_raw(theta.clone()));
        }
    }

    // Active constraint: bracket μ so that ‖θ(μ)‖ crosses ℘.
    let mut lo = 0.0f64;
    let mut hi = 1.0f64;
    let mut theta_hi = loop {
        match penalized_newton(family, tau, hi, &zero, f64::INFINITY) {
            Some(t) if norm(&t) <= rho => break t,
            _ => {
                lo = hi;
                hi *= 4.0;
                if hi > 1e300 {
                    return domain("could not bracket the multiplier of the norm constraint");
                }
            }
        }
    };
    let mut warm = theta_hi.clone();
    for _ in 0..MLE_MAX_ITERS {
        if hi - lo <= 1e-15 * hi {
            break;
        }
        let mid = 0.5 * (lo + hi);
        match penalized_newton(family, tau, mid, &warm, f64::INFINITY) {
            Some(t) if norm(&t) <= rho => {
                hi = mid;
                theta_hi = t.clone();
                warm = t;
            }
            Some(t) => {
                lo = mid;
                warm = t;
            }
            None => lo = mid,
        }
    }
    // Project the last feasible iterate onto the sphere.
    let nrm = norm(&theta_hi);
    if nrm > 0.0 {
        let mut scale = rho / nrm;
        loop {
            let cand: Vec<f64> = theta_hi.iter().map(|v| v * scale).collect();
            if norm(&cand) <= rho {
                theta_hi = cand;
                break;
            }
            scale *= 1.0 - 1e-15;
        }
    }
    check_theta(family.d(), rho, &theta_hi)?;
    Ok(ParamVector::from_raw(theta_hi))
}

fn objective(family: &FamilySpec, tau: &[f64], mu: f64, theta: &[f64]) -> f64 {
    dot(theta, tau) - psi_pmf(family, theta).0 - 0.5 * mu * dot(theta, theta)
}

/// Maximizes `⟨θ,τ⟩ − ψ(θ) − μ‖θ‖²/2`. Returns `None` if the iterates leave
/// the radius `cap` or do not converge.
fn penalized_newton(
    family: &FamilySpec,
    tau: &[f64],
    mu: f64,
    start: &[f64],
    cap: f64,
) -> Option<Vec<f64>> {
    let d = family.d();
    let mut theta = start.to_vec();
    let mut value = objective(family, tau, mu, &theta);
    for _ in 0..MLE_MAX_ITERS {
        let eval = evaluate(family, &theta);
        let grad: Vec<f64> = (0..d)
            .map(|j| tau[j] - eval.grad_psi[j] - mu * theta[j])
            .collect();
        if norm(&grad) <= MLE_GRAD_TOL {
            return Some(theta);
        }
        let mut h: DMatrix<f64> = eval.hess_psi.clone();
        for j in 0..d {
            h[(j, j)] += mu;
        }
        let step = solve_spd(h, &grad);
        let slope = dot(&grad, &step);
        let mut t = 1.0;
        let mut accepted = false;
        while t > 1e-14 {
            let cand: Vec<f64> = theta.iter().zip(&step).map(|(a, s)| a + t * s).collect();
            let v = objective(family, tau, mu, &cand);
            // Near the optimum the ascent drops below the rounding of the
            // objective; then a smaller gradient decides.
            let flat = v >= value - 1e-13 * (1.0 + value.abs())
                && penalized_grad_norm(family, tau, mu, &cand) < norm(&grad);
            if v >= value + 1e-4 * t * slope || flat {
                theta = cand;
                value = v;
                accepted = true;
                break;
            }
            t *= 0.5;
        }
        if !accepted {
            // No ascent left at floating-point resolution.
            return if norm(&grad) <= 1e3 * MLE_GRAD_TOL { Some(theta) } else { None };
        }
        if norm(&theta) > cap {
            return None;
        }
    }
    None
}

fn penalized_grad_norm(family: &FamilySpec, tau: &[f64], mu: f64, theta: &[f64]) -> f64 {
    let eval = evaluate(family, theta);
    let g: Vec<f64> = (0..family.d())
        .map(|j| tau[j] - eval.grad_psi[j] - mu * theta[j])
        .collect();
    norm(&g)
}

/// Solves `H x = g` for a symmetric positive semidefinite `H`, adding a small
/// ridge when the Cholesky factorization fails.
fn solve_spd(mut h: DMatrix<f64>, g: &[f64]) -> Vec<f64> {
    let rhs = to_dvec(g);
    let mut ridge = 0.0;
    loop {
        if let Some(ch) = h.clone().cholesky() {
            return ch.solve(&rhs).iter().copied().collect();
        }
        let bump = if ridge == 0.0 { 1e-14 } else { ridge * 10.0 };
        for j in 0..h.nrows() {
            h[(j, j)] += bump - ridge;
        }
        ridge = bump;
    }
}
