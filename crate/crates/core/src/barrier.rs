//! Log-barrier subproblem: for fixed `μ > 0`,
//!
//! ```text
//!     minimize ψ_μ(x) = f(x) − μ log det G(x)  subject to  h(x) = 0.
//! ```
//!
//! Its KKT points are exactly the primal parts of barrier-KKT triplets, with
//! `Y = μG(x)⁻¹`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kkt::{self, PrimalDualTriplet};
use crate::model::{self, NsdpInstance};
use crate::num;
use crate::symlin::{self, Mat, SymMat};

const TAU: f64 = 0.99;
const ARMIJO: f64 = 1e-4;
const DELTA_START: f64 = 1e-12;
const DELTA_CAP: f64 = 1e-4;
const MIN_STEP: f64 = 1e-16;

#[derive(Clone, Debug, PartialEq)]
pub struct PsiEval {
    pub value: f64,
    pub grad: Vec<f64>,
    pub hess: SymMat,
}

/// `ψ_μ` with gradient `∇f − μ𝒥G*G⁻¹` and Hessian
/// `∇²f + μ[tr(G⁻¹𝒢_iG⁻¹𝒢_j)] − μ[G⁻¹∙∂²G/∂x_i∂x_j]`.
pub fn psi_eval(inst: &dyn NsdpInstance, x: &[f64], mu: f64) -> Result<PsiEval> {
    model::check_x(inst, x)?;
    let g = inst.eval_g(x);
    let logdet = symlin::log_det_pd(&g).ok_or_else(|| Error::Interiority {
        what: "G(x) must be positive definite for the barrier".into(),
        min_eig: g.min_eig().unwrap_or(f64::NAN),
    })?;
    let gi = symlin::inv_pd(&g)?;
    let n = inst.n();
    let dgs = model::d_g_all(inst, x);
    // G⁻¹𝒢_i
    let prods: Vec<Mat> = dgs.iter().map(|d| gi.as_mat().matmul(d.as_mat())).collect();

    let mut grad = inst.grad_f(x);
    for (gr, d) in grad.iter_mut().zip(&dgs) {
        *gr -= mu * d.dot(&gi);
    }
    let mut hess = inst.hess_f(x);
    let curv = SymMat::from_upper(n, |i, j| prods[i].frob_dot(&prods[j].transpose()));
    hess.add_scaled(mu, &curv);
    hess.add_scaled(-mu, &inst.hess_g_contract(x, &gi));
    Ok(PsiEval {
        value: inst.eval_f(x) - mu * logdet,
        grad,
        hess,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierOptions {
    pub tol_abs: f64,
    pub tol_rel: f64,
    pub feas_tol: f64,
    pub max_iter: usize,
}

impl Default for BarrierOptions {
    fn default() -> Self {
        BarrierOptions {
            tol_abs: 1e-12,
            tol_rel: 1e-8,
            feas_tol: 1e-10,
            max_iter: 200,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct BarrierSolveResult {
    pub x: Vec<f64>,
    pub mu: f64,
    pub iterations: usize,
    pub projected_grad_norm: f64,
    pub feas_h_norm: f64,
    pub min_eig_g: f64,
    /// Always true for a returned result; failures are errors.
    pub converged: bool,
}

fn is_interior(inst: &dyn NsdpInstance, x: &[f64]) -> bool {
    symlin::chol_psd_test(&inst.eval_g(x))
}

/// Least-squares multiplier `z` minimizing `‖g + ∇h z‖`, and the residual vector.
fn project_gradient(jac: &Mat, g: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if jac.cols() == 0 {
        return Ok((Vec::new(), g.to_vec()));
    }
    let neg: Vec<f64> = g.iter().map(|v| -v).collect();
    let (z, _) = symlin::lstsq_min_norm(jac, &neg, 1e-12)?;
    let mut r = g.to_vec();
    num::axpy(1.0, &jac.matvec(&z), &mut r);
    Ok((z, r))
}

/// Gauss-Newton on `h(x) = 0`, keeping `G(x) ≻ 0`.
fn restore_feasibility(inst: &dyn NsdpInstance, x: &mut Vec<f64>, tol: f64) -> Result<()> {
    let mut hn = num::norm2(&inst.eval_h(x));
    for _ in 0..100 {
        if hn <= tol {
            return Ok(());
        }
        let h = inst.eval_h(x);
        let jt = inst.jac_h(x).transpose();
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        let (dx, _) = symlin::lstsq_min_norm(&jt, &neg, 1e-12)?;
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
            if is_interior(inst, &trial) {
                let tn = num::norm2(&inst.eval_h(&trial));
                if tn < hn {
                    *x = trial;
                    hn = tn;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < MIN_STEP {
                return Err(Error::Feasibility { residual: hn });
            }
        }
    }
    if hn <= tol {
        Ok(())
    } else {
        Err(Error::Feasibility { residual: hn })
    }
}

/// Largest `α ≤ 1` keeping `G + αD ≻ 0` to first order, shortened by `τ`.
pub(crate) fn boundary_step(g: &SymMat, dg: &SymMat) -> f64 {
    let Some(l) = symlin::cholesky(g) else {
        return 0.0;
    };
    // λ_max(−L⁻¹ D L⁻ᵀ)
    let m = g.dim();
    let mut li = Mat::identity(m);
    for j in 0..m {
        for i in 0..m {
            let mut s = li[(i, j)];
            for k in 0..i {
                s -= l[(i, k)] * li[(k, j)];
            }
            li[(i, j)] = s / l[(i, i)];
        }
    }
    let t = dg.congruence_t(&li);
    let zeta = match t.min_eig() {
        Ok(v) => -v,
        Err(_) => return 0.0,
    };
    if zeta <= 0.0 {
        1.0
    } else {
        (TAU / zeta).min(1.0)
    }
}

fn merit(inst: &dyn NsdpInstance, x: &[f64], mu: f64, nu: f64) -> Option<f64> {
    let g = inst.eval_g(x);
    let logdet = symlin::log_det_pd(&g)?;
    Some(inst.eval_f(x) - mu * logdet + nu * num::norm2(&inst.eval_h(x)))
}

/// Newton-KKT iteration on the barrier subproblem from an interior `x0`.
pub fn barrier_solve(
    inst: &dyn NsdpInstance,
    mu: f64,
    x0: &[f64],
    opts: &BarrierOptions,
) -> Result<BarrierSolveResult> {
    model::check_x(inst, x0)?;
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(alloc::format!(
            "barrier parameter must be positive, got {mu}"
        )));
    }
    kkt::require_pd(&inst.eval_g(x0), "barrier start must satisfy G(x0) ≻ 0")?;
    let (n, s) = (inst.n(), inst.s());
    let mut x = x0.to_vec();
    restore_feasibility(inst, &mut x, opts.feas_tol)?;

    let gtol = opts.tol_abs.max(opts.tol_rel * mu);
    let mut nu = 0.0f64;
    let mut last_pg = f64::INFINITY;
    let mut last_h = f64::INFINITY;
    for iter in 0..=opts.max_iter {
        let pe = psi_eval(inst, &x, mu)?;
        let h = inst.eval_h(&x);
        let jac = inst.jac_h(&x);
        let (_, pg) = project_gradient(&jac, &pe.grad)?;
        let pgn = num::norm2(&pg);
        let hn = num::norm2(&h);
        last_pg = pgn;
        last_h = hn;
        if pgn <= gtol && hn <= opts.feas_tol {
            return Ok(BarrierSolveResult {
                x: x.clone(),
                mu,
                iterations: iter,
                projected_grad_norm: pgn,
                feas_h_norm: hn,
                min_eig_g: inst.eval_g(&x).min_eig()?,
                converged: true,
            });
        }
        if iter == opts.max_iter {
            break;
        }

        let (dx, znew) = newton_direction(&pe, &jac, &h, n, s)?;
        let zmax = num::max_abs(&znew);
        nu = nu.max(2.0 * zmax + 1e-8);

        // Fraction to the boundary on the linearization, then a true
        // interiority check by Cholesky.
        let dg = model::delta_g(inst, &x, &dx)?;
        let mut alpha = boundary_step(&inst.eval_g(&x), &dg);
        let phi0 = merit(inst, &x, mu, nu).expect("current iterate is interior");
        let slope = num::dot(&pe.grad, &dx) - nu * hn;
        let slack = 10.0 * f64::EPSILON * phi0.abs().max(1.0);
        loop {
            if alpha < MIN_STEP {
                return Err(Error::LineSearch {
                    what: "barrier Newton step".into(),
                    step: alpha,
                });
            }
            let trial: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + alpha * b).collect();
            if let Some(phi) = merit(inst, &trial, mu, nu) {
                if phi <= phi0 + ARMIJO * alpha * slope.min(0.0) + slack {
                    x = trial;
                    break;
                }
            }
            alpha *= 0.5;
        }
    }
    Err(Error::NoConvergence {
        what: "barrier Newton iteration".into(),
        iterations: opts.max_iter,
        residual: last_pg.max(last_h),
    })
}

/// Solve `[[H + δI, ∇h], [∇hᵀ, 0]] [dx; z] = [−g; −h]`, raising `δ` on
/// factorization failure or non-positive curvature along `dx`. If the capped
/// regularization still yields negative curvature, fall back to the projected
/// steepest-descent direction plus the Gauss-Newton feasibility correction.
fn newton_direction(pe: &PsiEval, jac: &Mat, h: &[f64], n: usize, s: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut rhs: Vec<f64> = pe.grad.iter().map(|v| -v).collect();
    rhs.extend(h.iter().map(|v| -v));
    let mut delta = DELTA_START;
    loop {
        let mut k = Mat::zeros(n + s, n + s);
        k.set_block(0, 0, pe.hess.as_mat());
        for i in 0..n {
            k[(i, i)] += delta;
        }
        k.set_block(0, n, jac);
        k.set_block(n, 0, &jac.transpose());
        if let Ok(sol) = symlin::lu_solve(&k, &rhs) {
            let dx = sol[..n].to_vec();
            let curv = num::dot(&dx, &pe.hess.as_mat().matvec(&dx)) + delta * num::dot(&dx, &dx);
            if curv > 0.0 || num::norm2(&dx) == 0.0 {
                return Ok((dx, sol[n..].to_vec()));
            }
        }
        if delta >= DELTA_CAP {
            break;
        }
        delta = (delta * 10.0).min(DELTA_CAP);
    }
    let (z, pg) = project_gradient(jac, &pe.grad)?;
    let mut dx: Vec<f64> = pg.iter().map(|v| -v).collect();
    if s > 0 {
        let neg: Vec<f64> = h.iter().map(|v| -v).collect();
        let (corr, _) = symlin::lstsq_min_norm(&jac.transpose(), &neg, 1e-12)?;
        num::axpy(1.0, &corr, &mut dx);
    }
    Ok((dx, if s > 0 { z } else { vec![] }))
}

#[derive(Clone, Debug, PartialEq)]
pub struct Lifted {
    pub w: PrimalDualTriplet,
    /// `‖∇_x L(w)‖` of the lifted triplet.
    pub stationarity_residual: f64,
}

/// `Y = μG(x)⁻¹` and the least-squares `z`.
pub fn lift_to_triplet(inst: &dyn NsdpInstance, x: &[f64], mu: f64) -> Result<Lifted> {
    model::check_x(inst, x)?;
    let g = inst.eval_g(x);
    kkt::require_pd(&g, "G(x) must be positive definite to lift")?;
    let y = symlin::inv_pd(&g)?.scale(mu);
    let mut r = inst.grad_f(x);
    num::axpy(-1.0, &model::adjoint_jg(inst, x, &y)?, &mut r);
    let z = if inst.s() == 0 {
        Vec::new()
    } else {
        let jac = inst.jac_h(x);
        let dec = symlin::svd(&jac)?;
        let smax = dec.s.first().copied().unwrap_or(0.0);
        let smin = dec.s.last().copied().unwrap_or(0.0);
        if smin <= 1e-12 * smax.max(1.0) {
            return Err(Error::RankDeficient { sigma_min: smin });
        }
        let neg: Vec<f64> = r.iter().map(|v| -v).collect();
        dec.solve_min_norm(&neg, 0.0)
    };
    let w = PrimalDualTriplet::new(x.to_vec(), y, z);
    let stationarity_residual = num::norm2(&kkt::grad_x_lagrangian(inst, &w)?);
    Ok(Lifted {
        w,
        stationarity_residual,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QmiData, QmiInstance};

    fn twin() -> QmiInstance {
        QmiInstance::new(
            "twin",
            "",
            QmiData {
                c0: 0.0,
                c: vec![1.0],
                q: SymMat::zeros(1),
                a0: SymMat::zeros(2),
                a: vec![SymMat::identity(2)],
                b_quad: None,
                b: vec![],
                h_lin: Mat::zeros(0, 1),
                m_quad: None,
            },
        )
        .unwrap()
    }

    #[test]
    fn psi_closed_forms() {
        let inst = twin();
        let pe = psi_eval(&inst, &[0.2], 0.1).unwrap();
        assert!(pe.grad[0].abs() < 1e-15);
        let pe = psi_eval(&inst, &[1.0], 0.5).unwrap();
        assert_eq!(pe.value, 1.0);
        assert_eq!(pe.grad[0], 0.0);
        assert!((pe.hess[(0, 0)] - 1.0).abs() < 1e-15);
        assert!(matches!(psi_eval(&inst, &[-1.0], 0.5), Err(Error::Interiority { .. })));
    }

    #[test]
    fn solve_twin() {
        let inst = twin();
        let r = barrier_solve(&inst, 0.1, &[1.0], &BarrierOptions::default()).unwrap();
        assert!((r.x[0] - 0.2).abs() < 1e-10, "{r:?}");
        let l = lift_to_triplet(&inst, &r.x, 0.1).unwrap();
        assert!(l.w.y.sub(&SymMat::identity(2).scale(0.5)).frob_norm() < 1e-10);
    }

    #[test]
    fn boundary_step_examples() {
        let g = SymMat::identity(2);
        assert_eq!(boundary_step(&g, &SymMat::identity(2)), 1.0);
        let a = boundary_step(&g, &SymMat::identity(2).scale(-2.0));
        assert!((a - 0.495).abs() < 1e-15);
    }
}
