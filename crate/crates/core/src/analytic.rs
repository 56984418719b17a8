//! Analytic center of the multiplier set and the limiting direction of the
//! central path.
//!
//! At a KKT point `x*` with eigen-split `[E*, F*]`, every multiplier has the
//! form `Y = E* Y^EE E*ᵀ` with `Y^EE ⪰ 0`, and stationarity becomes the
//! affine constraint
//!
//! ```text
//!     ∇f(x*) − 𝒥G^EE(x*)*Y^EE + ∇h(x*) z = 0,    (𝒥G^EE*Y^EE)_i = (E*ᵀ𝒢_iE*)∙Y^EE.
//! ```
//!
//! The analytic center maximizes `log det Y^EE` over that set. The limiting
//! direction `ξ*` is the primal part of the tangent system at the limit
//! triplet `(x*, Y_a, z_a)`; in block form it requires
//!
//! ```text
//!     ΔG^EE(x*; ξ) = (Y_a^EE)⁻¹,   ΔY^FF = (G^FF)⁻¹,   ΔY^EF = −Y_a^EE ΔG^EF(x*; ξ) (G^FF)⁻¹,
//! ```
//!
//! plus stationarity projected on `𝒰* = {d: ΔG^EE(x*; d) = 0, ∇h(x*)ᵀd = 0}`.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::kkt::{self, Block, EigenSplit, PrimalDualTriplet};
use crate::model::{self, NsdpInstance};
use crate::num;
use crate::rng::Rng;
use crate::symlin::{self, Mat, SymMat};

/// Affine description `θ = θ₀ + N t` of the multiplier set (before the cone
/// constraint), in coordinates `θ = (svec Y^EE, z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct MultiplierSetParam {
    pub particular: (SymMat, Vec<f64>),
    pub basis: Vec<(SymMat, Vec<f64>)>,
    pub split: EigenSplit,
    /// `‖T θ₀ + ∇f(x*)‖` of the least-norm particular solution.
    pub residual: f64,
    theta0: Vec<f64>,
    null: Mat,
}

impl MultiplierSetParam {
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    fn k(&self) -> usize {
        self.split.null_dim()
    }

    /// `θ₀ + N t`.
    pub fn theta(&self, t: &[f64]) -> Vec<f64> {
        let mut th = self.theta0.clone();
        num::axpy(1.0, &self.null.matvec(t), &mut th);
        th
    }

    pub fn y_ee(&self, t: &[f64]) -> SymMat {
        let big = symlin::svec_len(self.k());
        symlin::smat(&self.theta(t)[..big], self.k()).expect("length matches")
    }

    pub fn z(&self, t: &[f64]) -> Vec<f64> {
        let big = symlin::svec_len(self.k());
        self.theta(t)[big..].to_vec()
    }

    /// Full multiplier `E* Y^EE E*ᵀ`.
    pub fn y_full(&self, t: &[f64]) -> SymMat {
        self.y_ee(t).congruence_t(&self.split.estar)
    }
}

/// Matrix of `θ ↦ −𝒥G^EE*Y^EE + ∇h z`.
fn stationarity_map(dgs: &[SymMat], jac: &Mat, split: &EigenSplit) -> Mat {
    let eem = kkt::ee_map(dgs, split);
    let (n, big, s) = (dgs.len(), eem.rows(), jac.cols());
    let mut t = Mat::zeros(n, big + s);
    for i in 0..n {
        for k in 0..big {
            t[(i, k)] = -eem[(k, i)];
        }
        for j in 0..s {
            t[(i, big + j)] = jac[(i, j)];
        }
    }
    t
}

/// Stack of `svec ΔG^EE(x*; ·)` and `∇h(x*)ᵀ`, the linear map whose null
/// space is `𝒰*`.
fn limit_map(dgs: &[SymMat], jac: &Mat, split: &EigenSplit) -> Mat {
    let eem = kkt::ee_map(dgs, split);
    let n = dgs.len();
    let mut phi = Mat::zeros(eem.rows() + jac.cols(), n);
    phi.set_block(0, 0, &eem);
    phi.set_block(eem.rows(), 0, &jac.transpose());
    phi
}

fn check_jac_rank(jac: &Mat) -> Result<()> {
    if jac.cols() == 0 {
        return Ok(());
    }
    let dec = symlin::svd(jac)?;
    let smax = dec.s.first().copied().unwrap_or(0.0);
    let smin = dec.s.last().copied().unwrap_or(0.0);
    if smin <= 1e-8 * smax.max(1e-300) {
        return Err(Error::RankDeficient { sigma_min: smin });
    }
    Ok(())
}

pub fn parametrize_multiplier_set(
    inst: &dyn NsdpInstance,
    xstar: &[f64],
    split: &EigenSplit,
) -> Result<MultiplierSetParam> {
    model::check_x(inst, xstar)?;
    if split.m() != inst.m() {
        return Err(Error::dim("eigen-split order", inst.m(), split.m()));
    }
    let dgs = model::d_g_all(inst, xstar);
    let jac = inst.jac_h(xstar);
    check_jac_rank(&jac)?;
    let t = stationarity_map(&dgs, &jac, split);
    let grad = inst.grad_f(xstar);
    let neg: Vec<f64> = grad.iter().map(|v| -v).collect();
    let k = split.null_dim();
    let big = symlin::svec_len(k);

    let (theta0, null) = if t.cols() == 0 {
        (Vec::new(), Mat::zeros(0, 0))
    } else {
        let dec = symlin::svd(&t)?;
        (dec.solve_min_norm(&neg, 1e-10), dec.null_basis(1e-10))
    };
    let tt = if t.cols() == 0 {
        vec![0.0; inst.n()]
    } else {
        t.matvec(&theta0)
    };
    let residual = num::norm2(&num::sub(&tt, &neg));
    if residual > 1e-8 * num::norm2(&grad).max(1.0) {
        return Err(Error::Inconsistent {
            what: "stationarity at x* (no Lagrange multiplier exists)".into(),
            residual,
        });
    }
    let split_theta =
        |th: &[f64]| -> Result<(SymMat, Vec<f64>)> { Ok((symlin::smat(&th[..big], k)?, th[big..].to_vec())) };
    let particular = split_theta(&theta0)?;
    let basis = (0..null.cols())
        .map(|j| split_theta(&null.col(j)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MultiplierSetParam {
        particular,
        basis,
        split: split.clone(),
        residual,
        theta0,
        null,
    })
}

#[derive(Clone, Debug, PartialEq)]
pub struct CenterOptions {
    pub max_newton: usize,
    pub max_phase1: usize,
    /// Stop when the Newton decrement falls below this.
    pub decrement_tol: f64,
}

impl Default for CenterOptions {
    fn default() -> Self {
        CenterOptions {
            max_newton: 100,
            max_phase1: 5000,
            decrement_tol: 1e-12,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnalyticCenterResult {
    pub y_a: SymMat,
    pub y_ee: SymMat,
    pub z_a: Vec<f64>,
    /// `v` with `ΔG^EE(x*; v) = (Y_a^EE)⁻¹`, `∇h(x*)ᵀv = 0`.
    pub certificate_v: Vec<f64>,
    pub cert_residual: f64,
    pub logdet: f64,
    pub newton_iterations: usize,
    pub decrement: f64,
}

fn min_eig_and_grad(param: &MultiplierSetParam, t: &[f64]) -> Result<(f64, Vec<f64>)> {
    let y = param.y_ee(t);
    let ed = symlin::eigh_ascending(&y)?;
    let v = ed.vectors.col(0);
    let g = param
        .basis
        .iter()
        .map(|(nj, _)| num::dot(&v, &nj.as_mat().matvec(&v)))
        .collect();
    Ok((ed.values[0], g))
}

/// Supergradient ascent on the concave function `t ↦ λ_min(Y^EE(t))`.
fn phase_one(param: &MultiplierSetParam, start: Vec<f64>, max_iter: usize) -> Result<Vec<f64>> {
    let mut t = start;
    let (mut best, _) = min_eig_and_grad(param, &t)?;
    let mut best_t = t.clone();
    let scale = 1.0 + num::norm2(&param.theta0);
    for it in 0..max_iter {
        let (val, g) = min_eig_and_grad(param, &t)?;
        if val > best {
            best = val;
            best_t = t.clone();
        }
        if best > 0.0 && it >= 50 {
            break;
        }
        let gn = num::norm2(&g);
        if gn == 0.0 {
            break;
        }
        let step = scale / num::sqrt(1.0 + it as f64);
        num::axpy(step / gn, &g, &mut t);
    }
    if best <= 0.0 {
        return Err(Error::NoInteriorMultiplier { min_eig: best });
    }
    Ok(best_t)
}

/// Maximize `log det Y^EE` over the multiplier set by damped Newton.
pub fn analytic_center(
    inst: &dyn NsdpInstance,
    xstar: &[f64],
    split: &EigenSplit,
    warm_start: Option<&SymMat>,
    opts: &CenterOptions,
) -> Result<AnalyticCenterResult> {
    let param = parametrize_multiplier_set(inst, xstar, split)?;
    let k = split.null_dim();
    let q = param.dim();
    let big = symlin::svec_len(k);

    let mut t = vec![0.0; q];
    if let Some(w) = warm_start {
        if w.dim() != k {
            return Err(Error::dim("analytic-center warm start (EE block)", k, w.dim()));
        }
        if q > 0 {
            let ny = param.null.block(0, 0, big, q);
            let target = num::sub(&symlin::svec(w), &param.theta0[..big]);
            t = symlin::lstsq_min_norm(&ny, &target, 1e-12)?.0;
        }
    }
    let mut iterations = 0;
    let mut decrement = 0.0;
    if k > 0 {
        if !symlin::chol_psd_test(&param.y_ee(&t)) {
            if q == 0 {
                return Err(Error::NoInteriorMultiplier {
                    min_eig: param.y_ee(&t).min_eig()?,
                });
            }
            t = phase_one(&param, t, opts.max_phase1)?;
        }
        let (tn, it, dec) = newton_log_det(&param, t, opts)?;
        t = tn;
        iterations = it;
        decrement = dec;
    }

    let y_ee = param.y_ee(&t);
    let z_a = param.z(&t);
    let y_a = param.y_full(&t);
    let logdet = if k == 0 {
        0.0
    } else {
        symlin::log_det_pd(&y_ee).ok_or_else(|| Error::NoInteriorMultiplier {
            min_eig: y_ee.min_eig().unwrap_or(f64::NAN),
        })?
    };

    // Certificate: ΔG^EE(x*; v) = (Y^EE)⁻¹, ∇h(x*)ᵀ v = 0.
    let dgs = model::d_g_all(inst, xstar);
    let jac = inst.jac_h(xstar);
    let phi = limit_map(&dgs, &jac, split);
    let (certificate_v, cert_residual) = if k == 0 {
        (vec![0.0; inst.n()], 0.0)
    } else {
        let mut rhs = symlin::svec(&symlin::inv_pd(&y_ee)?);
        rhs.extend(vec![0.0; inst.s()]);
        symlin::lstsq_min_norm(&phi, &rhs, 1e-10)?
    };
    Ok(AnalyticCenterResult {
        y_a,
        y_ee,
        z_a,
        certificate_v,
        cert_residual,
        logdet,
        newton_iterations: iterations,
        decrement,
    })
}

fn newton_log_det(param: &MultiplierSetParam, mut t: Vec<f64>, opts: &CenterOptions) -> Result<(Vec<f64>, usize, f64)> {
    let q = param.dim();
    if q == 0 {
        return Ok((t, 0, 0.0));
    }
    let ns: Vec<&SymMat> = param.basis.iter().map(|(nj, _)| nj).collect();
    let phi = |t: &[f64]| symlin::log_det_pd(&param.y_ee(t)).map(|l| -l);
    let mut dec = f64::INFINITY;
    for it in 0..opts.max_newton {
        let y = param.y_ee(&t);
        let yi = symlin::inv_pd(&y)?;
        let prods: Vec<Mat> = ns.iter().map(|nj| yi.as_mat().matmul(nj.as_mat())).collect();
        let g: Vec<f64> = ns.iter().map(|nj| -nj.dot(&yi)).collect();
        let h = SymMat::from_upper(q, |i, j| prods[i].frob_dot(&prods[j].transpose()));
        let neg: Vec<f64> = g.iter().map(|v| -v).collect();
        let dt = symlin::lu_solve(h.as_mat(), &neg)?;
        dec = num::sqrt(num::dot(&neg, &dt).max(0.0));
        if dec <= opts.decrement_tol {
            return Ok((t, it, dec));
        }
        let f0 = phi(&t).expect("iterate is interior");
        let slope = num::dot(&g, &dt);
        let slack = 10.0 * f64::EPSILON * f0.abs().max(1.0);
        let mut alpha = 1.0;
        loop {
            let trial: Vec<f64> = t.iter().zip(&dt).map(|(a, b)| a + alpha * b).collect();
            if let Some(f) = phi(&trial) {
                if f <= f0 + 1e-4 * alpha * slope + slack {
                    t = trial;
                    break;
                }
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                return Err(Error::LineSearch {
                    what: "analytic-center Newton step".into(),
                    step: alpha,
                });
            }
        }
    }
    if dec <= 1e-8 {
        return Ok((t, opts.max_newton, dec));
    }
    Err(Error::NoConvergence {
        what: "analytic-center Newton iteration".into(),
        iterations: opts.max_newton,
        residual: dec,
    })
}

/// Draw a feasible multiplier `(Y, z)` from the multiplier set by moving from
/// the center along a random direction to a random fraction of the way to
/// the boundary. Used for sampling-based checks.
pub fn sample_multiplier(param: &MultiplierSetParam, center_t: &[f64], rng: &mut Rng) -> Result<(SymMat, Vec<f64>)> {
    let q = param.dim();
    if q == 0 {
        return Ok((param.y_full(center_t), param.z(center_t)));
    }
    let u = rng.unit_vec(q);
    // Largest step along u keeping Y^EE ⪰ 0, by bisection.
    let at = |s: f64| -> Vec<f64> { center_t.iter().zip(&u).map(|(c, d)| c + s * d).collect() };
    let (mut lo, mut hi) = (0.0, 1.0);
    while symlin::chol_psd_test(&param.y_ee(&at(hi))) && hi < 1e12 {
        lo = hi;
        hi *= 2.0;
    }
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if symlin::chol_psd_test(&param.y_ee(&at(mid))) {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = at(lo * rng.uniform());
    Ok((param.y_full(&t), param.z(&t)))
}

/// Coordinates of the analytic center in a parametrization.
pub fn center_coordinates(param: &MultiplierSetParam, center: &AnalyticCenterResult) -> Result<Vec<f64>> {
    if param.dim() == 0 {
        return Ok(Vec::new());
    }
    let mut theta = symlin::svec(&center.y_ee);
    theta.extend_from_slice(&center.z_a);
    let target = num::sub(&theta, &param.theta0);
    Ok(symlin::lstsq_min_norm(&param.null, &target, 1e-12)?.0)
}

/// Orthonormal basis of `𝒰* = {d: ΔG^EE(x*; d) = 0, ∇h(x*)ᵀd = 0}`.
pub fn u_basis(inst: &dyn NsdpInstance, xstar: &[f64], split: &EigenSplit) -> Result<Mat> {
    model::check_x(inst, xstar)?;
    let dgs = model::d_g_all(inst, xstar);
    let phi = limit_map(&dgs, &inst.jac_h(xstar), split);
    symlin::null_space(&phi, 1e-8)
}

#[derive(Clone, Debug, PartialEq)]
pub struct XiStarResult {
    /// From the structured solve.
    pub xi: Vec<f64>,
    /// From the direct least-norm solve.
    pub xi_direct: Vec<f64>,
    /// `ΔY` of the direct solve.
    pub dy: SymMat,
    pub p_star: usize,
    pub u: Mat,
    pub eta1: Vec<f64>,
    /// Residual of the direct stacked system.
    pub residual_full: f64,
    pub structured_vs_full: f64,
    /// `‖ΔY^FF − (G^FF)⁻¹‖`.
    pub identity_ff: f64,
    /// `‖ΔG^EE(ξ) − (Y_a^EE)⁻¹‖`.
    pub identity_ee: f64,
    /// `‖ΔY^EF + Y_a^EE ΔG^EF(ξ)(G^FF)⁻¹‖`.
    pub identity_ef: f64,
}

impl XiStarResult {
    pub fn max_identity_residual(&self) -> f64 {
        self.identity_ff.max(self.identity_ee).max(self.identity_ef)
    }
}

/// `2 tr(A_iᵀ Y A_j G⁻¹)` for EF blocks `A`.
fn sigma_pair(ai: &Mat, yee: &SymMat, aj: &Mat, gff_inv: &SymMat) -> f64 {
    if ai.cols() == 0 || ai.rows() == 0 {
        return 0.0;
    }
    2.0 * ai.tmatmul(&yee.as_mat().matmul(aj)).frob_dot(gff_inv.as_mat())
}

/// Limiting direction of the central path at `x*`.
pub fn xi_star(
    inst: &dyn NsdpInstance,
    xstar: &[f64],
    split: &EigenSplit,
    center: &AnalyticCenterResult,
) -> Result<XiStarResult> {
    model::check_x(inst, xstar)?;
    let (n, m, s) = (inst.n(), inst.m(), inst.s());
    let k = split.null_dim();
    let dgs = model::d_g_all(inst, xstar);
    let jac = inst.jac_h(xstar);
    let gstar = inst.eval_g(xstar);
    let phi = limit_map(&dgs, &jac, split);
    let u = if phi.rows() == 0 {
        Mat::identity(n)
    } else {
        symlin::null_space(&phi, 1e-8)?
    };
    let p = u.cols();
    let wa = PrimalDualTriplet::new(xstar.to_vec(), center.y_a.clone(), center.z_a.clone());
    let hl = kkt::hess_xx_lagrangian(inst, &wa)?;
    let yee = &center.y_ee;
    let gff = kkt::ff(&gstar, split);
    let gff_inv = if split.rstar == 0 {
        SymMat::zeros(0)
    } else {
        symlin::inv_pd(&gff)?
    };
    let yee_inv = if k == 0 { SymMat::zeros(0) } else { symlin::inv_pd(yee)? };
    let ef = |d: &[f64]| kkt::block_of(&model::combine(&dgs, d, m), split, Block::EF);
    let ffb = |d: &[f64]| kkt::ff(&model::combine(&dgs, d, m), split);

    // Structured solve: ξ = d₂ + Uη¹ with d₂ the least-norm solution of the
    // EE and equality conditions.
    let mut rhs_phi = symlin::svec(&yee_inv);
    rhs_phi.extend(vec![0.0; s]);
    let (d2, r2) = if phi.rows() == 0 {
        (vec![0.0; n], 0.0)
    } else {
        symlin::lstsq_min_norm(&phi, &rhs_phi, 1e-10)?
    };
    if r2 > 1e-8 * num::norm2(&rhs_phi).max(1.0) {
        return Err(Error::EmptyLimitSystem { residual: r2 });
    }
    let ucols: Vec<Vec<f64>> = (0..p).map(|i| u.col(i)).collect();
    let u_ef: Vec<Mat> = ucols.iter().map(|c| ef(c)).collect::<Result<_>>()?;
    let d2_ef = ef(&d2)?;
    let hd2 = hl.as_mat().matvec(&d2);
    let mmat = SymMat::from_upper(p, |i, j| {
        num::dot(&ucols[i], &hl.as_mat().matvec(&ucols[j])) + sigma_pair(&u_ef[i], yee, &u_ef[j], &gff_inv)
    });
    let rhs: Vec<f64> = (0..p)
        .map(|i| {
            let ff_term = if split.rstar == 0 {
                0.0
            } else {
                ffb(&ucols[i]).dot(&gff_inv)
            };
            ff_term - num::dot(&ucols[i], &hd2) - sigma_pair(&u_ef[i], yee, &d2_ef, &gff_inv)
        })
        .collect();
    let eta1 = if p == 0 {
        Vec::new()
    } else {
        if !symlin::chol_psd_test(&mmat) {
            return Err(Error::NotPositiveDefinite {
                what: "reduced limiting matrix (second-order condition fails)".into(),
                min_eig: mmat.min_eig()?,
            });
        }
        symlin::lu_solve(mmat.as_mat(), &rhs)?
    };
    let mut xi = d2.clone();
    num::axpy(1.0, &u.matvec(&eta1), &mut xi);

    // Direct solve of the stacked system in (Δx, svec ΔY).
    let big = symlin::svec_len(m);
    let mut a = Mat::zeros(p + big + s, n + big);
    let mut b = vec![0.0; p + big + s];
    for (i, ui) in ucols.iter().enumerate() {
        let hu = hl.as_mat().matvec(ui);
        for j in 0..n {
            a[(i, j)] = hu[j];
        }
        let gu = symlin::svec(&model::combine(&dgs, ui, m));
        for (kk, v) in gu.iter().enumerate() {
            a[(i, n + kk)] = -v;
        }
    }
    for (j, gj) in dgs.iter().enumerate() {
        let col = symlin::svec(&symlin::lyap_apply(&center.y_a, gj)?);
        for (r, v) in col.iter().enumerate() {
            a[(p + r, j)] = *v;
        }
    }
    for kk in 0..big {
        let col = symlin::svec(&symlin::lyap_apply(&gstar, &symlin::svec_basis(m, kk))?);
        for (r, v) in col.iter().enumerate() {
            a[(p + r, n + kk)] = *v;
        }
    }
    for (r, v) in symlin::svec(&SymMat::identity(m).scale(2.0)).iter().enumerate() {
        b[p + r] = *v;
    }
    for i in 0..n {
        for j in 0..s {
            a[(p + big + j, i)] = jac[(i, j)];
        }
    }
    let (sol, residual_full) = symlin::lstsq_min_norm(&a, &b, 1e-10)?;
    if residual_full > 1e-8 * num::norm2(&b).max(1.0) {
        return Err(Error::EmptyLimitSystem {
            residual: residual_full,
        });
    }
    let xi_direct = sol[..n].to_vec();
    let dy = symlin::smat(&sol[n..], m)?;

    let dg_xi = model::combine(&dgs, &xi_direct, m);
    let identity_ee = if k == 0 {
        0.0
    } else {
        kkt::ee(&dg_xi, split).sub(&yee_inv).frob_norm()
    };
    let (identity_ff, identity_ef) = if split.rstar == 0 || k == 0 {
        let ff = if split.rstar == 0 {
            0.0
        } else {
            kkt::ff(&dy, split).sub(&gff_inv).frob_norm()
        };
        (ff, 0.0)
    } else {
        let ff = kkt::ff(&dy, split).sub(&gff_inv).frob_norm();
        let dy_ef = kkt::block_of(&dy, split, Block::EF)?;
        let pred = yee
            .as_mat()
            .matmul(&kkt::block_of(&dg_xi, split, Block::EF)?)
            .matmul(gff_inv.as_mat());
        (ff, dy_ef.add(&pred).frob_norm())
    };
    Ok(XiStarResult {
        structured_vs_full: num::norm2(&num::sub(&xi, &xi_direct)),
        xi,
        xi_direct,
        dy,
        p_star: p,
        u,
        eta1,
        residual_full,
        identity_ff,
        identity_ee,
        identity_ef,
    })
}
