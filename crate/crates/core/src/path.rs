//! Central-path machinery.
//!
//! The symmetric barrier-KKT system is
//!
//! ```text
//!     ∇_x L(w) = 0,   G(x)Y + YG(x) = 2μI,   h(x) = 0,   G(x) ≻ 0,  Y ≻ 0,
//! ```
//!
//! and its Jacobian in `(dx, svec dY, dz)` coordinates is
//!
//! ```text
//!            ⎡ ∇²_xx L      −𝒥G*      ∇h ⎤
//!     𝒜(w) = ⎢ ℒ_Y 𝒢_i       ℒ_G       0  ⎥
//!            ⎣ ∇hᵀ           0         0  ⎦
//! ```
//!
//! Differentiating the system in `μ` gives the tangent `𝒜(w)ẇ = (0, 2I, 0)`.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::barrier::{self, BarrierOptions};
use crate::error::{Error, Result};
use crate::kkt::{self, ComplementarityForm, PrimalDualTriplet};
use crate::model::{self, NsdpInstance};
use crate::num;
use crate::symlin::{self, Mat, SymMat};

/// `𝒜(w)` with its block sizes.
#[derive(Clone, Debug, PartialEq)]
pub struct AssembledSystem {
    pub matrix: Mat,
    pub n: usize,
    /// `m(m+1)/2`.
    pub big_m: usize,
    pub s: usize,
}

impl AssembledSystem {
    pub fn order(&self) -> usize {
        self.n + self.big_m + self.s
    }

    pub fn sigma_min(&self) -> Result<f64> {
        symlin::min_singular_value(&self.matrix)
    }
}

pub fn assemble_a(inst: &dyn NsdpInstance, w: &PrimalDualTriplet) -> Result<AssembledSystem> {
    w.check(inst)?;
    let (n, m, s) = (inst.n(), inst.m(), inst.s());
    let big = symlin::svec_len(m);
    let mut a = Mat::zeros(n + big + s, n + big + s);
    a.set_block(0, 0, kkt::hess_xx_lagrangian(inst, w)?.as_mat());
    let dgs = model::d_g_all(inst, &w.x);
    for (i, gi) in dgs.iter().enumerate() {
        for (k, v) in symlin::svec(gi).iter().enumerate() {
            a[(i, n + k)] = -v;
        }
        let col = symlin::svec(&symlin::lyap_apply(&w.y, gi)?);
        for (k, v) in col.iter().enumerate() {
            a[(n + k, i)] = *v;
        }
    }
    let g = inst.eval_g(&w.x);
    for k in 0..big {
        let col = symlin::svec(&symlin::lyap_apply(&g, &symlin::svec_basis(m, k))?);
        for (r, v) in col.iter().enumerate() {
            a[(n + r, n + k)] = *v;
        }
    }
    if s > 0 {
        let jac = inst.jac_h(&w.x);
        a.set_block(0, n + big, &jac);
        a.set_block(n + big, 0, &jac.transpose());
    }
    Ok(AssembledSystem {
        matrix: a,
        n,
        big_m: big,
        s,
    })
}

/// `ẇ = (ẋ, Ẏ, ż)`.
#[derive(Clone, Debug, PartialEq)]
pub struct Tangent {
    pub dx: Vec<f64>,
    pub dy: SymMat,
    pub dz: Vec<f64>,
}

impl Tangent {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.dx.clone();
        v.extend(symlin::svec(&self.dy));
        v.extend_from_slice(&self.dz);
        v
    }
}

/// Right-hand side `(0, svec 2I, 0)`.
fn tangent_rhs(n: usize, m: usize, s: usize) -> Vec<f64> {
    let mut rhs = vec![0.0; n];
    rhs.extend(symlin::svec(&SymMat::identity(m).scale(2.0)));
    rhs.extend(vec![0.0; s]);
    rhs
}

/// Solve the tangent system at `w`.
pub fn tangent(inst: &dyn NsdpInstance, w: &PrimalDualTriplet) -> Result<Tangent> {
    let sys = assemble_a(inst, w)?;
    let (n, m, s) = (inst.n(), inst.m(), inst.s());
    let smin = sys.sigma_min()?;
    let scale = sys.matrix.frob_norm();
    if smin <= 1e-12 * scale {
        return Err(Error::Singular {
            what: "tangent system".into(),
            sigma_min: smin,
        });
    }
    let rhs = tangent_rhs(n, m, s);
    let sol = symlin::lu_solve(&sys.matrix, &rhs)?;
    let res = num::norm2(&num::sub(&sys.matrix.matvec(&sol), &rhs));
    let bound = 1e-10 * (num::norm2(&rhs) + scale * num::norm2(&sol));
    if res > bound {
        return Err(Error::Inconsistent {
            what: "tangent solve".into(),
            residual: res,
        });
    }
    let t = PrimalDualTriplet::from_vec(&sol, n, m, s)?;
    Ok(Tangent {
        dx: t.x,
        dy: t.y,
        dz: t.z,
    })
}

// ---------------------------------------------------------------------------
// Corrector

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for CorrectorOptions {
    fn default() -> Self {
        CorrectorOptions {
            tol: 1e-11,
            max_iter: 50,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CorrectorResult {
    pub w: PrimalDualTriplet,
    pub iterations: usize,
    /// Largest symmetric-form residual before each step and at the end.
    pub residuals: Vec<f64>,
}

/// `(∇_x L, svec(GY + YG − 2μI), h)`.
fn bkkt_map(inst: &dyn NsdpInstance, w: &PrimalDualTriplet, mu: f64) -> Result<Vec<f64>> {
    let mut r = kkt::grad_x_lagrangian(inst, w)?;
    let g = inst.eval_g(&w.x);
    let mut c = symlin::lyap_apply(&g, &w.y)?;
    c.add_scaled_identity(-2.0 * mu);
    r.extend(symlin::svec(&c));
    r.extend(inst.eval_h(&w.x));
    Ok(r)
}

fn sym_residual(inst: &dyn NsdpInstance, w: &PrimalDualTriplet, mu: f64) -> Result<f64> {
    Ok(kkt::bkkt_residual(inst, w, mu, ComplementarityForm::Symmetric)?.max())
}

fn step_to(w: &PrimalDualTriplet, d: &[f64], alpha: f64, n: usize, m: usize, s: usize) -> Result<PrimalDualTriplet> {
    let mut v = w.to_vec();
    num::axpy(alpha, d, &mut v);
    PrimalDualTriplet::from_vec(&v, n, m, s)
}

/// Newton's method on the symmetric barrier-KKT system with `𝒜(w)` as the
/// Newton matrix, damped by fraction-to-boundary on both `G(x)` and `Y`.
/// Once the tolerance is met one further full step is taken if it does not
/// increase the residual, which under quadratic convergence pushes the
/// iterate to rounding level.
pub fn pdipm_corrector(
    inst: &dyn NsdpInstance,
    w0: &PrimalDualTriplet,
    mu: f64,
    opts: &CorrectorOptions,
) -> Result<CorrectorResult> {
    w0.check(inst)?;
    let (n, m, s) = (inst.n(), inst.m(), inst.s());
    let mut w = w0.clone();
    let mut res = sym_residual(inst, &w, mu)?;
    let mut residuals = vec![res];
    for it in 0..opts.max_iter {
        let converged = res <= opts.tol;
        let f = bkkt_map(inst, &w, mu)?;
        let sys = assemble_a(inst, &w)?;
        let neg: Vec<f64> = f.iter().map(|v| -v).collect();
        let d = match symlin::lu_solve(&sys.matrix, &neg) {
            Ok(d) => d,
            Err(_) if converged => {
                return Ok(CorrectorResult {
                    w,
                    iterations: it,
                    residuals,
                })
            }
            Err(e) => return Err(e),
        };
        let step = PrimalDualTriplet::from_vec(&d, n, m, s)?;
        let dg = model::delta_g(inst, &w.x, &step.x)?;
        let mut alpha = barrier::boundary_step(&inst.eval_g(&w.x), &dg).min(barrier::boundary_step(&w.y, &step.y));
        let trial = loop {
            let t = step_to(&w, &d, alpha, n, m, s)?;
            if symlin::chol_psd_test(&inst.eval_g(&t.x)) && symlin::chol_psd_test(&t.y) {
                break Some(t);
            }
            alpha *= 0.5;
            if alpha < 1e-16 {
                break None;
            }
        };
        let Some(trial) = trial else {
            if converged {
                return Ok(CorrectorResult {
                    w,
                    iterations: it,
                    residuals,
                });
            }
            return Err(Error::Interiority {
                what: "corrector step cannot keep G(x) and Y positive definite".into(),
                min_eig: 0.0,
            });
        };
        let tres = sym_residual(inst, &trial, mu)?;
        if converged {
            if tres <= res {
                residuals.push(tres);
                return Ok(CorrectorResult {
                    w: trial,
                    iterations: it + 1,
                    residuals,
                });
            }
            return Ok(CorrectorResult {
                w,
                iterations: it,
                residuals,
            });
        }
        w = trial;
        res = tres;
        residuals.push(res);
    }
    if res <= opts.tol {
        return Ok(CorrectorResult {
            w,
            iterations: opts.max_iter,
            residuals,
        });
    }
    Err(Error::NoConvergence {
        what: "primal-dual corrector".into(),
        iterations: opts.max_iter,
        residual: res,
    })
}

// ---------------------------------------------------------------------------
// Path tracing

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TraceMode {
    /// Barrier subproblem at every `μ`, lifted to a triplet.
    Barrier,
    /// Tangent predictor followed by the primal-dual corrector.
    Pdipm,
    /// As `Pdipm`, falling back to the barrier solve when the corrector fails.
    Hybrid,
}

impl TraceMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            TraceMode::Barrier => "barrier",
            TraceMode::Pdipm => "pdipm",
            TraceMode::Hybrid => "hybrid",
        }
    }
}

impl core::str::FromStr for TraceMode {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "barrier" => Ok(TraceMode::Barrier),
            "pdipm" => Ok(TraceMode::Pdipm),
            "hybrid" => Ok(TraceMode::Hybrid),
            _ => Err(Error::InvalidArgument(format!(
                "unknown trace mode `{s}` (expected barrier, pdipm or hybrid)"
            ))),
        }
    }
}

/// Geometric schedule `μ_k = μ₀σ^k` down to `μ_min`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    pub mu0: f64,
    pub sigma: f64,
    pub mu_min: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Schedule {
            mu0: 1e-1,
            sigma: 0.1,
            mu_min: 1e-7,
        }
    }
}

impl Schedule {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu0 > 0.0 && self.mu0.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "mu0 must be positive, got {}",
                self.mu0
            )));
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return Err(Error::InvalidArgument(format!(
                "sigma must lie in (0, 1), got {}",
                self.sigma
            )));
        }
        if !(self.mu_min > 0.0 && self.mu_min <= self.mu0) {
            return Err(Error::InvalidArgument(format!(
                "mu-min must lie in (0, mu0], got {}",
                self.mu_min
            )));
        }
        Ok(())
    }

    pub fn grid(&self) -> Vec<f64> {
        let mut out = Vec::new();
        let mut k = 0;
        loop {
            let mu = self.mu0 * num::powi(self.sigma, k);
            if mu < self.mu_min * (1.0 - 1e-9) {
                break;
            }
            out.push(mu);
            k += 1;
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PointSolver {
    Barrier,
    Corrector,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointDiagnostics {
    /// `‖x − x*‖` when `x*` is known.
    pub norm_d: Option<f64>,
    /// Largest symmetric-form barrier-KKT residual.
    pub bkkt_res: f64,
    pub sigmin_a: f64,
    pub newton_iters: usize,
    pub solver: PointSolver,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathPoint {
    pub mu: f64,
    pub w: PrimalDualTriplet,
    pub diagnostics: PointDiagnostics,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PathTrace {
    pub instance: String,
    pub schedule: Schedule,
    pub mode: TraceMode,
    pub points: Vec<PathPoint>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct TraceOptions {
    pub schedule: Schedule,
    pub mode: TraceMode,
    pub xstar: Option<Vec<f64>>,
    /// Every accepted point must have symmetric-form residual below this.
    pub accept_tol: f64,
    pub barrier: BarrierOptions,
    pub corrector: CorrectorOptions,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions {
            schedule: Schedule::default(),
            mode: TraceMode::Hybrid,
            xstar: None,
            accept_tol: 1e-9,
            barrier: BarrierOptions::default(),
            corrector: CorrectorOptions::default(),
        }
    }
}

fn is_interior_triplet(inst: &dyn NsdpInstance, w: &PrimalDualTriplet) -> bool {
    symlin::chol_psd_test(&inst.eval_g(&w.x)) && symlin::chol_psd_test(&w.y)
}

/// `w + Δμ·ẇ`, halving the step until the result is interior.
fn predict(inst: &dyn NsdpInstance, w: &PrimalDualTriplet, t: &Tangent, dmu: f64) -> Result<PrimalDualTriplet> {
    let (n, m, s) = (inst.n(), inst.m(), inst.s());
    let tv = t.to_vec();
    let mut step = dmu;
    for _ in 0..60 {
        let p = step_to(w, &tv, step, n, m, s)?;
        if is_interior_triplet(inst, &p) {
            return Ok(p);
        }
        step *= 0.5;
    }
    Ok(w.clone())
}

/// Barrier solve at `μ` from `x0`, lifted to a triplet.
fn barrier_point(
    inst: &dyn NsdpInstance,
    mu: f64,
    x0: &[f64],
    opts: &TraceOptions,
) -> Result<(PrimalDualTriplet, usize)> {
    let r = barrier::barrier_solve(inst, mu, x0, &opts.barrier)?;
    let lifted = barrier::lift_to_triplet(inst, &r.x, mu)?;
    Ok((lifted.w, r.iterations))
}

/// Trace the central path over the schedule from an interior `x0`.
pub fn trace_path(inst: &dyn NsdpInstance, x0: &[f64], opts: &TraceOptions) -> Result<PathTrace> {
    model::check_x(inst, x0)?;
    opts.schedule.validate()?;
    if let Some(xs) = &opts.xstar {
        model::check_x(inst, xs)?;
    }
    let grid = opts.schedule.grid();
    let mut points: Vec<PathPoint> = Vec::with_capacity(grid.len());
    for (k, &mu) in grid.iter().enumerate() {
        let annotate = |e: Error| e.at_mu(mu);
        let (w, iters, solver) = match (opts.mode, points.last()) {
            (TraceMode::Barrier, _) => {
                let start = barrier_start(inst, &points, mu, x0);
                let (w, it) = barrier_point(inst, mu, &start, opts).map_err(annotate)?;
                (w, it, PointSolver::Barrier)
            }
            (TraceMode::Hybrid, None) => {
                let (w, it) = barrier_point(inst, mu, x0, opts).map_err(annotate)?;
                (w, it, PointSolver::Barrier)
            }
            (TraceMode::Pdipm, None) => {
                let start = barrier::lift_to_triplet(inst, x0, mu).map_err(annotate)?.w;
                let c = pdipm_corrector(inst, &start, mu, &opts.corrector).map_err(annotate)?;
                (c.w, c.iterations, PointSolver::Corrector)
            }
            (mode, Some(prev)) => {
                let attempt = tangent(inst, &prev.w)
                    .and_then(|t| predict(inst, &prev.w, &t, mu - prev.mu))
                    .and_then(|p| pdipm_corrector(inst, &p, mu, &opts.corrector));
                match attempt {
                    Ok(c) if sym_residual(inst, &c.w, mu).is_ok_and(|r| r <= opts.accept_tol) => {
                        (c.w, c.iterations, PointSolver::Corrector)
                    }
                    Ok(_) if mode == TraceMode::Pdipm => {
                        return Err(Error::NoConvergence {
                            what: "corrector did not reach the acceptance tolerance".into(),
                            iterations: opts.corrector.max_iter,
                            residual: f64::NAN,
                        }
                        .at_mu(mu))
                    }
                    Err(e) if mode == TraceMode::Pdipm => return Err(e.at_mu(mu)),
                    _ => {
                        let start = barrier_start(inst, &points, mu, x0);
                        let (w, it) = barrier_point(inst, mu, &start, opts).map_err(annotate)?;
                        (w, it, PointSolver::Barrier)
                    }
                }
            }
        };
        let res = sym_residual(inst, &w, mu).map_err(annotate)?;
        if !(res <= opts.accept_tol) {
            return Err(Error::NoConvergence {
                what: format!("path point {k} failed the acceptance test"),
                iterations: iters,
                residual: res,
            }
            .at_mu(mu));
        }
        let sigmin_a = assemble_a(inst, &w).and_then(|a| a.sigma_min()).map_err(annotate)?;
        let norm_d = opts.xstar.as_ref().map(|xs| num::norm2(&num::sub(&w.x, xs)));
        points.push(PathPoint {
            mu,
            w,
            diagnostics: PointDiagnostics {
                norm_d,
                bkkt_res: res,
                sigmin_a,
                newton_iters: iters,
                solver,
            },
        });
    }
    Ok(PathTrace {
        instance: inst.name().to_string(),
        schedule: opts.schedule,
        mode: opts.mode,
        points,
    })
}

/// Warm start for a barrier solve: linear extrapolation in `μ` through the
/// last two points when interior, else the last point, else `x0`.
fn barrier_start(inst: &dyn NsdpInstance, points: &[PathPoint], mu: f64, x0: &[f64]) -> Vec<f64> {
    match points {
        [] => x0.to_vec(),
        [.., only] if points.len() == 1 => only.w.x.clone(),
        [.., a, b] => {
            let slope: Vec<f64> = num::sub(&b.w.x, &a.w.x).iter().map(|v| v / (b.mu - a.mu)).collect();
            let mut x = b.w.x.clone();
            num::axpy(mu - b.mu, &slope, &mut x);
            if symlin::chol_psd_test(&inst.eval_g(&x)) {
                x
            } else {
                b.w.x.clone()
            }
        }
        _ => x0.to_vec(),
    }
}

// ---------------------------------------------------------------------------
// Tube and reduced form

/// `‖x* + μξ* − x‖ < ρμ‖ξ*‖`.
pub fn in_region(x: &[f64], xstar: &[f64], xi: &[f64], rho: f64, mu: f64) -> Result<bool> {
    if x.len() != xstar.len() || xi.len() != xstar.len() {
        return Err(Error::dim("in_region", xstar.len(), x.len().max(xi.len())));
    }
    let xin = num::norm2(xi);
    if xin == 0.0 {
        return Err(Error::InvalidArgument("limiting direction is zero".into()));
    }
    let dist: Vec<f64> = (0..x.len()).map(|i| xstar[i] + mu * xi[i] - x[i]).collect();
    // Points within rounding distance of the sphere count as on it.
    let margin = 4.0 * f64::EPSILON * (num::norm2(x) + num::norm2(xstar) + mu * xin);
    Ok(num::norm2(&dist) < rho * mu * xin - margin)
}

/// Smallest eigenvalue of `d ↦ dᵀ∇²L d + ΔG(x;d)∙ℒ_G⁻¹ℒ_Y(ΔG(x;d))` on
/// `null(∇h(x)ᵀ)`; `+∞` when that subspace is trivial.
pub fn reduced_form_min_eig(inst: &dyn NsdpInstance, w: &PrimalDualTriplet) -> Result<f64> {
    w.check(inst)?;
    let g = inst.eval_g(&w.x);
    kkt::require_pd(&g, "reduced form needs G(x) ≻ 0")?;
    let n = inst.n();
    let hl = kkt::hess_xx_lagrangian(inst, w)?;
    let dgs = model::d_g_all(inst, &w.x);
    let ged = symlin::eigh_ascending(&g)?;
    let mapped: Vec<SymMat> = dgs
        .iter()
        .map(|d| symlin::lyap_solve_eig(&ged, &symlin::lyap_apply(&w.y, d)?))
        .collect::<Result<_>>()?;
    let q = Mat::from_fn(n, n, |i, j| hl[(i, j)] + dgs[i].dot(&mapped[j]));
    let qs = q.sym_part();
    let basis = if inst.s() == 0 {
        Mat::identity(n)
    } else {
        symlin::null_space(&inst.jac_h(&w.x).transpose(), 1e-12)?
    };
    if basis.cols() == 0 {
        return Ok(f64::INFINITY);
    }
    qs.congruence(&basis).min_eig()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn region_examples() {
        assert!(in_region(&[0.21], &[0.0], &[2.0], 0.5, 0.1).unwrap());
        assert!(!in_region(&[0.35], &[0.0], &[2.0], 0.5, 0.1).unwrap());
        assert!(!in_region(&[0.3], &[0.0], &[2.0], 0.5, 0.1).unwrap());
        assert!(in_region(&[0.3], &[0.0], &[0.0], 0.5, 0.1).is_err());
    }

    #[test]
    fn schedule_grid() {
        let g = Schedule::default().grid();
        assert_eq!(g.len(), 7);
        assert!(g.windows(2).all(|w| w[1] < w[0]));
        assert!(Schedule {
            mu0: 1.0,
            sigma: 1.5,
            mu_min: 0.1
        }
        .validate()
        .is_err());
    }
}
