//! Optimality conditions: the Lagrangian and its derivatives, KKT and
//! barrier-KKT residuals, the eigen-split of `G(x*)`, the sigma term and the
//! constraint-qualification / second-order checks.
//!
//! The Lagrangian is `L(w) = f(x) − G(x)∙Y + h(x)ᵀz` for `w = (x, Y, z)`.
//!
//! The eigen-split orders the eigenvectors of `G(x*)` ascending, so
//! `P* = [E*, F*]` with `E*` spanning the (numerical) null space and `F*` the
//! range. Blocks are written `M^EE = E*ᵀME*`, `M^EF = E*ᵀMF*` and so on.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::model::{self, NsdpInstance};
use crate::num::{self, sqrt};
use crate::rng::Rng;
use crate::symlin::{self, eigh_ascending, svd, Mat, SymMat, DEFAULT_RANK_TOL};

/// `w = (x, Y, z)`.
#[derive(Clone, Debug, PartialEq)]
pub struct PrimalDualTriplet {
    pub x: Vec<f64>,
    pub y: SymMat,
    pub z: Vec<f64>,
}

impl PrimalDualTriplet {
    pub fn new(x: Vec<f64>, y: SymMat, z: Vec<f64>) -> Self {
        PrimalDualTriplet { x, y, z }
    }

    /// Check the shapes against an instance.
    pub fn check(&self, inst: &dyn NsdpInstance) -> Result<()> {
        if self.x.len() != inst.n() {
            return Err(Error::dim("triplet x", inst.n(), self.x.len()));
        }
        if self.y.dim() != inst.m() {
            return Err(Error::dim("triplet Y", inst.m(), self.y.dim()));
        }
        if self.z.len() != inst.s() {
            return Err(Error::dim("triplet z", inst.s(), self.z.len()));
        }
        Ok(())
    }

    /// Flatten to `(x, svec Y, z)`.
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.x.clone();
        v.extend(symlin::svec(&self.y));
        v.extend_from_slice(&self.z);
        v
    }

    /// Inverse of [`to_vec`](Self::to_vec).
    pub fn from_vec(v: &[f64], n: usize, m: usize, s: usize) -> Result<Self> {
        let big = symlin::svec_len(m);
        if v.len() != n + big + s {
            return Err(Error::dim("flattened triplet", n + big + s, v.len()));
        }
        Ok(PrimalDualTriplet {
            x: v[..n].to_vec(),
            y: symlin::smat(&v[n..n + big], m)?,
            z: v[n + big..].to_vec(),
        })
    }
}

/// `∇_x L(w) = ∇f − 𝒥G*Y + ∇h z`.
pub fn grad_x_lagrangian(inst: &dyn NsdpInstance, w: &PrimalDualTriplet) -> Result<Vec<f64>> {
    w.check(inst)?;
    let mut g = inst.grad_f(&w.x);
    let adj = model::adjoint_jg(inst, &w.x, &w.y)?;
    num::axpy(-1.0, &adj, &mut g);
    if inst.s() > 0 {
        let hz = inst.jac_h(&w.x).matvec(&w.z);
        num::axpy(1.0, &hz, &mut g);
    }
    Ok(g)
}

/// `∇²_xx L(w) = ∇²f − [Y∙∂²G] + Σ z_k ∇²h_k`.
pub fn hess_xx_lagrangian(inst: &dyn NsdpInstance, w: &PrimalDualTriplet) -> Result<SymMat> {
    w.check(inst)?;
    let mut h = inst.hess_f(&w.x);
    h.add_scaled(-1.0, &inst.hess_g_contract(&w.x, &w.y));
    if inst.s() > 0 {
        h.add_scaled(1.0, &inst.hess_h_contract(&w.x, &w.z));
    }
    Ok(h)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KktReport {
    pub stationarity_norm: f64,
    /// `‖G(x)Y‖_F`.
    pub comp_norm: f64,
    pub feas_h_norm: f64,
    pub min_eig_g: f64,
    pub min_eig_y: f64,
}

impl KktReport {
    pub fn is_kkt(&self, tol: f64) -> bool {
        self.stationarity_norm <= tol
            && self.comp_norm <= tol
            && self.feas_h_norm <= tol
            && self.min_eig_g >= -tol
            && self.min_eig_y >= -tol
    }

    pub fn max_residual(&self) -> f64 {
        self.stationarity_norm
            .max(self.comp_norm)
            .max(self.feas_h_norm)
            .max(-self.min_eig_g)
            .max(-self.min_eig_y)
    }
}

pub fn kkt_residual(inst: &dyn NsdpInstance, w: &PrimalDualTriplet) -> Result<KktReport> {
    let grad = grad_x_lagrangian(inst, w)?;
    let g = inst.eval_g(&w.x);
    Ok(KktReport {
        stationarity_norm: num::norm2(&grad),
        comp_norm: g.as_mat().matmul(w.y.as_mat()).frob_norm(),
        feas_h_norm: num::norm2(&inst.eval_h(&w.x)),
        min_eig_g: g.min_eig()?,
        min_eig_y: w.y.min_eig()?,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ComplementarityForm {
    /// `‖G Y − μI‖_F`.
    Product,
    /// `‖(GY + YG)/2 − μI‖_F`.
    Symmetric,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct BkktResidual {
    pub stationarity: f64,
    pub complementarity: f64,
    pub feasibility: f64,
}

impl BkktResidual {
    pub fn max(&self) -> f64 {
        self.stationarity.max(self.complementarity).max(self.feasibility)
    }
}

/// Require `X ≻ 0` by Cholesky; on failure report its smallest eigenvalue.
pub(crate) fn require_pd(x: &SymMat, what: &str) -> Result<()> {
    if symlin::chol_psd_test(x) {
        return Ok(());
    }
    Err(Error::Interiority {
        what: what.into(),
        min_eig: x.min_eig().unwrap_or(f64::NAN),
    })
}

/// Residuals of the barrier-KKT system at `μ`. Both `G(x)` and `Y` must be
/// strictly positive definite.
pub fn bkkt_residual(
    inst: &dyn NsdpInstance,
    w: &PrimalDualTriplet,
    mu: f64,
    form: ComplementarityForm,
) -> Result<BkktResidual> {
    if !(mu > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "barrier parameter must be positive, got {mu}"
        )));
    }
    w.check(inst)?;
    let g = inst.eval_g(&w.x);
    require_pd(&g, "G(x) must be positive definite")?;
    require_pd(&w.y, "Y must be positive definite")?;
    let gy = g.as_mat().matmul(w.y.as_mat());
    let comp = match form {
        ComplementarityForm::Product => {
            let mut r = gy;
            r.add_scaled_identity(-mu);
            r.frob_norm()
        }
        ComplementarityForm::Symmetric => {
            let mut r = gy.sym_part();
            r.add_scaled_identity(-mu);
            r.frob_norm()
        }
    };
    Ok(BkktResidual {
        stationarity: num::norm2(&grad_x_lagrangian(inst, w)?),
        complementarity: comp,
        feasibility: num::norm2(&inst.eval_h(&w.x)),
    })
}

// ---------------------------------------------------------------------------
// Eigen-split

#[derive(Clone, Debug, PartialEq)]
pub struct EigenSplit {
    /// `[E*, F*]`, eigenvectors of `G(x*)` by ascending eigenvalue.
    pub pstar: Mat,
    pub estar: Mat,
    pub fstar: Mat,
    /// Rank of `G(x*)`.
    pub rstar: usize,
    pub eigvals: Vec<f64>,
    pub rank_tol_used: f64,
    /// Eigenvalues at or above this are counted in the rank.
    pub cutoff: f64,
}

impl EigenSplit {
    pub fn m(&self) -> usize {
        self.pstar.rows()
    }

    /// `m − r*`, the order of the EE block.
    pub fn null_dim(&self) -> usize {
        self.m() - self.rstar
    }

    /// Replace `E*` by `E*·R` for an orthogonal `R` of order `m − r*`.
    pub fn with_rotated_null_basis(&self, r: &Mat) -> Result<EigenSplit> {
        let k = self.null_dim();
        if r.rows() != k || r.cols() != k {
            return Err(Error::dim(
                "null-basis rotation",
                format!("{k}x{k}"),
                format!("{}x{}", r.rows(), r.cols()),
            ));
        }
        let estar = self.estar.matmul(r);
        let mut pstar = self.pstar.clone();
        pstar.set_block(0, 0, &estar);
        Ok(EigenSplit {
            pstar,
            estar,
            ..self.clone()
        })
    }
}

pub fn eigen_split(gstar: &SymMat, rank_tol: f64) -> Result<EigenSplit> {
    let ed = eigh_ascending(gstar)?;
    let m = gstar.dim();
    let lmax = ed.values.last().copied().unwrap_or(0.0);
    let cutoff = rank_tol * lmax.max(1.0);
    let lmin = ed.values.first().copied().unwrap_or(0.0);
    if lmin < -cutoff {
        return Err(Error::Indefinite {
            what: "G(x*)".into(),
            min_eig: lmin,
        });
    }
    let k = ed.values.iter().filter(|&&l| l < cutoff).count();
    Ok(EigenSplit {
        estar: ed.vectors.cols_range(0, k),
        fstar: ed.vectors.cols_range(k, m),
        pstar: ed.vectors,
        rstar: m - k,
        eigvals: ed.values,
        rank_tol_used: rank_tol,
        cutoff,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Block {
    EE,
    EF,
    FE,
    FF,
}

pub fn block_of(mat: &SymMat, split: &EigenSplit, ind: Block) -> Result<Mat> {
    if mat.dim() != split.m() {
        return Err(Error::dim("block_of", split.m(), mat.dim()));
    }
    let (l, r) = match ind {
        Block::EE => (&split.estar, &split.estar),
        Block::EF => (&split.estar, &split.fstar),
        Block::FE => (&split.fstar, &split.estar),
        Block::FF => (&split.fstar, &split.fstar),
    };
    Ok(mat.project(l, r))
}

/// Symmetric EE block.
pub(crate) fn ee(mat: &SymMat, split: &EigenSplit) -> SymMat {
    mat.congruence(&split.estar)
}

/// Symmetric FF block.
pub(crate) fn ff(mat: &SymMat, split: &EigenSplit) -> SymMat {
    mat.congruence(&split.fstar)
}

// ---------------------------------------------------------------------------
// Sigma term

fn check_split_at(inst: &dyn NsdpInstance, xstar: &[f64], split: &EigenSplit) -> Result<SymMat> {
    model::check_x(inst, xstar)?;
    let g = inst.eval_g(xstar);
    if g.dim() != split.m() {
        return Err(Error::dim("eigen-split order", g.dim(), split.m()));
    }
    let k = split.null_dim();
    let gap = ee(&g, split).frob_norm();
    if gap > split.cutoff * (k as f64).max(1.0) {
        return Err(Error::Inconsistent {
            what: "eigen-split does not match G(x*) (‖E*ᵀG(x*)E*‖)".into(),
            residual: gap,
        });
    }
    Ok(g)
}

fn check_psd(y: &SymMat, rank_tol: f64) -> Result<()> {
    let ed = eigh_ascending(y)?;
    let lmax = ed.values.last().copied().unwrap_or(0.0);
    let lmin = ed.values.first().copied().unwrap_or(0.0);
    if lmin < -rank_tol * lmax.max(1.0) {
        return Err(Error::Indefinite {
            what: "multiplier Y".into(),
            min_eig: lmin,
        });
    }
    Ok(())
}

/// `Ω_ij = 2 Y∙𝒢_i G(x*)† 𝒢_j`, from the definition.
pub fn sigma_term(inst: &dyn NsdpInstance, xstar: &[f64], y: &SymMat, split: &EigenSplit) -> Result<SymMat> {
    let g = check_split_at(inst, xstar, split)?;
    check_psd(y, split.rank_tol_used)?;
    let gp = symlin::pinv_psd(&g, split.rank_tol_used)?;
    let dgs = model::d_g_all(inst, xstar);
    // Y𝒢_i G† is reused for every j.
    let left: Vec<Mat> = dgs
        .iter()
        .map(|gi| y.as_mat().matmul(gi.as_mat()).matmul(gp.as_mat()))
        .collect();
    let n = inst.n();
    Ok(SymMat::from_mat_unchecked(Mat::from_fn(n, n, |i, j| {
        2.0 * left[i].frob_dot(&dgs[j].as_mat().transpose())
    })))
}

/// The three evaluations of `dᵀΩd` that must agree for a multiplier `Y`
/// supported on the null space of `G(x*)`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SigmaQuad {
    /// `2 Y∙ΔG G† ΔG`.
    pub definition: f64,
    /// `2 tr(Y^EE ΔG^EF (G^FF)⁻¹ ΔG^FE)`.
    pub trace_form: f64,
    /// `2 ‖(Y^EE)^{1/2} ΔG^EF (G^FF)^{-1/2}‖²_F`.
    pub norm_form: f64,
}

impl SigmaQuad {
    pub fn max_rel_disagreement(&self) -> f64 {
        let scale = self
            .definition
            .abs()
            .max(self.trace_form.abs())
            .max(self.norm_form.abs())
            .max(1.0);
        let a = (self.definition - self.trace_form).abs();
        let b = (self.definition - self.norm_form).abs();
        let c = (self.trace_form - self.norm_form).abs();
        a.max(b).max(c) / scale
    }
}

pub fn sigma_quad(
    inst: &dyn NsdpInstance,
    xstar: &[f64],
    y: &SymMat,
    split: &EigenSplit,
    d: &[f64],
) -> Result<SigmaQuad> {
    let g = check_split_at(inst, xstar, split)?;
    check_psd(y, split.rank_tol_used)?;
    let dg = model::delta_g(inst, xstar, d)?;
    let gp = symlin::pinv_psd(&g, split.rank_tol_used)?;
    let definition = 2.0
        * y.as_mat()
            .frob_dot(&dg.as_mat().matmul(gp.as_mat()).matmul(dg.as_mat()));

    if split.rstar == 0 || split.null_dim() == 0 {
        return Ok(SigmaQuad {
            definition,
            trace_form: 0.0,
            norm_form: 0.0,
        });
    }
    let yee = ee(y, split);
    let gff = ff(&g, split);
    let gff_inv = symlin::inv_pd(&gff)?;
    let gff_isqrt = gff.map_spectrum(|l| 1.0 / sqrt(l))?;
    let yee_sqrt = yee.map_spectrum(|l| sqrt(l.max(0.0)))?;
    let dg_ef = block_of(&dg, split, Block::EF)?;

    let t = yee
        .as_mat()
        .matmul(&dg_ef)
        .matmul(gff_inv.as_mat())
        .matmul(&dg_ef.transpose());
    let trace_form = 2.0 * t.trace();
    let r = yee_sqrt.as_mat().matmul(&dg_ef).matmul(gff_isqrt.as_mat());
    let nf = r.frob_norm();
    Ok(SigmaQuad {
        definition,
        trace_form,
        norm_form: 2.0 * nf * nf,
    })
}

// ---------------------------------------------------------------------------
// Condition report

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionOptions {
    pub rank_tol: f64,
    /// A supplied multiplier counts as valid when the KKT residual is below this.
    pub kkt_tol: f64,
    pub seed: u64,
    pub mfcq_restarts: usize,
    pub cone_samples: usize,
    pub mfcq_witness: Option<Vec<f64>>,
}

impl Default for ConditionOptions {
    fn default() -> Self {
        ConditionOptions {
            rank_tol: DEFAULT_RANK_TOL,
            kkt_tol: 1e-8,
            seed: 42,
            mfcq_restarts: 100,
            cone_samples: 256,
            mfcq_witness: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ScReport {
    pub holds: bool,
    pub rank_g: usize,
    pub rank_y: usize,
    /// `λ_min(G(x*) + Y)`.
    pub min_eig_sum: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct NcReport {
    pub holds: bool,
    pub rank: usize,
    /// `(m − r*)(m − r* + 1)/2 + s`.
    pub required: usize,
}

#[derive(Clone, Debug, PartialEq)]
pub struct MfcqReport {
    /// `Some(true)` with a verified witness, `Some(false)` when `∇h(x*)` is rank
    /// deficient or a supplied witness is rejected, `None` when the search
    /// found no witness.
    pub holds: Option<bool>,
    pub jac_full_rank: bool,
    pub witness_d: Option<Vec<f64>>,
    /// Best `λ_min(G(x*) + ΔG(x*; d))` found.
    pub witness_min_eig: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SsoscReport {
    /// Per valid multiplier, the smallest eigenvalue of `∇²L + Ω` on
    /// `{d: ∇fᵀd = 0, ∇hᵀd = 0, ΔG^EE(d) = 0}`; `None` when that subspace is `{0}`.
    pub subspace_min_eig: Vec<Option<f64>>,
    /// Smallest `dᵀ(∇²L + Ω)d` over sampled unit critical-cone directions.
    pub cone_samples_min: Option<f64>,
    pub cone_samples_accepted: usize,
    pub multipliers_tested: usize,
    /// All evidence positive (vacuously true when the critical cone is `{0}`).
    pub consistent: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct ConditionReport {
    pub sc: ScReport,
    pub nc: NcReport,
    pub mfcq: MfcqReport,
    pub ssosc: SsoscReport,
}

fn numerical_rank(a: &Mat, rel_tol: f64) -> Result<usize> {
    if a.rows() == 0 || a.cols() == 0 {
        return Ok(0);
    }
    Ok(svd(a)?.rank(rel_tol))
}

/// Rows `svec(E*ᵀ𝒢_iE*)` stacked as columns: the k-th row of the returned
/// matrix is the k-th svec coordinate of `ΔG^EE(x*; ·)` as a linear form.
pub(crate) fn ee_map(dgs: &[SymMat], split: &EigenSplit) -> Mat {
    let k = split.null_dim();
    let big = symlin::svec_len(k);
    let mut out = Mat::zeros(big, dgs.len());
    for (i, gi) in dgs.iter().enumerate() {
        out.set_col(i, &symlin::svec(&ee(gi, split)));
    }
    out
}

fn stack_rows(parts: &[&Mat], ncols: usize) -> Mat {
    let rows: usize = parts.iter().map(|p| p.rows()).sum();
    let mut out = Mat::zeros(rows, ncols);
    let mut r0 = 0;
    for p in parts {
        out.set_block(r0, 0, p);
        r0 += p.rows();
    }
    out
}

/// Evaluate strict complementarity, nondegeneracy, MFCQ and the strong
/// second-order condition at `x*`. `multipliers` are candidate `(Y, z)`;
/// those failing the KKT test are ignored, and at least one must pass.
/// Strict complementarity is judged on the first valid multiplier.
pub fn condition_report(
    inst: &dyn NsdpInstance,
    xstar: &[f64],
    multipliers: &[(SymMat, Vec<f64>)],
    opts: &ConditionOptions,
) -> Result<ConditionReport> {
    model::check_x(inst, xstar)?;
    let (n, m, s) = (inst.n(), inst.m(), inst.s());
    let mut valid = Vec::new();
    let mut best = f64::INFINITY;
    for (y, z) in multipliers {
        let w = PrimalDualTriplet::new(xstar.to_vec(), y.clone(), z.clone());
        let rep = kkt_residual(inst, &w)?;
        best = best.min(rep.max_residual());
        if rep.is_kkt(opts.kkt_tol) {
            valid.push(w);
        }
    }
    if valid.is_empty() {
        return Err(Error::NoValidMultiplier { residual: best });
    }

    let gstar = inst.eval_g(xstar);
    let split = eigen_split(&gstar, opts.rank_tol)?;
    let dgs = model::d_g_all(inst, xstar);
    let jac = inst.jac_h(xstar);
    let grad_f = inst.grad_f(xstar);

    // Strict complementarity.
    let y0 = &valid[0].y;
    let ed_y = eigh_ascending(y0)?;
    let ycut = opts.rank_tol * ed_y.values.last().copied().unwrap_or(0.0).max(1.0);
    let rank_y = ed_y.values.iter().filter(|&&l| l >= ycut).count();
    let min_eig_sum = gstar.add(y0).min_eig()?;
    let sc = ScReport {
        holds: split.rstar + rank_y == m && min_eig_sum > opts.rank_tol,
        rank_g: split.rstar,
        rank_y,
        min_eig_sum,
    };

    // Nondegeneracy: rows v_ij (from the EE map) together with ∇h_kᵀ.
    let eem = ee_map(&dgs, &split);
    let jt = jac.transpose();
    let nc_rows = stack_rows(&[&eem, &jt], n);
    let required = eem.rows() + s;
    let rank = numerical_rank(&nc_rows, opts.rank_tol)?;
    let nc = NcReport {
        holds: rank == required,
        rank,
        required,
    };

    let mfcq = mfcq_check(&gstar, &dgs, &jac, opts)?;

    // Second order.
    let mut rng = Rng::seeded(opts.seed ^ 0x5eed_c0de);
    let grad_row = Mat::from_vec(1, n, grad_f)?;
    let subspace = symlin::null_space(&stack_rows(&[&grad_row, &jt, &eem], n), opts.rank_tol)?;
    let linear = symlin::null_space(&stack_rows(&[&grad_row, &jt], n), opts.rank_tol)?;
    let mut subspace_min_eig = Vec::with_capacity(valid.len());
    let mut cone_min: Option<f64> = None;
    let mut accepted = 0usize;
    for w in &valid {
        let mut hmat = hess_xx_lagrangian(inst, w)?;
        hmat.add_scaled(1.0, &sigma_term(inst, xstar, &w.y, &split)?);
        subspace_min_eig.push(if subspace.cols() == 0 {
            None
        } else {
            Some(hmat.congruence(&subspace).min_eig()?)
        });
        for _ in 0..opts.cone_samples {
            let Some(d) = sample_cone(&mut rng, &linear, &subspace, &dgs, &split)? else {
                continue;
            };
            accepted += 1;
            let q = num::dot(&d, &hmat.as_mat().matvec(&d));
            cone_min = Some(cone_min.map_or(q, |c| c.min(q)));
        }
    }
    let positive = |v: f64| v > 1e-12;
    let consistent = subspace_min_eig.iter().flatten().all(|&v| positive(v)) && cone_min.is_none_or(positive);
    Ok(ConditionReport {
        sc,
        nc,
        mfcq,
        ssosc: SsoscReport {
            multipliers_tested: subspace_min_eig.len(),
            subspace_min_eig,
            cone_samples_min: cone_min,
            cone_samples_accepted: accepted,
            consistent,
        },
    })
}

/// One unit direction of the critical cone: a random direction of the linear
/// part accepted if `ΔG^EE` is semidefinite (for it or its negative),
/// otherwise a random direction of the equality part when that is nontrivial.
fn sample_cone(
    rng: &mut Rng,
    linear: &Mat,
    subspace: &Mat,
    dgs: &[SymMat],
    split: &EigenSplit,
) -> Result<Option<Vec<f64>>> {
    if linear.cols() > 0 {
        let d = linear.matvec(&rng.unit_vec(linear.cols()));
        let dee = ee(&model::combine(dgs, &d, split.m()), split);
        if dee.dim() == 0 {
            return Ok(Some(d));
        }
        let ed = eigh_ascending(&dee)?;
        let tol = 1e-12 * dee.frob_norm().max(1.0);
        if ed.values[0] >= -tol {
            return Ok(Some(d));
        }
        if *ed.values.last().expect("nonempty") <= tol {
            return Ok(Some(d.iter().map(|v| -v).collect()));
        }
    }
    if subspace.cols() > 0 {
        return Ok(Some(subspace.matvec(&rng.unit_vec(subspace.cols()))));
    }
    Ok(None)
}

fn mfcq_check(gstar: &SymMat, dgs: &[SymMat], jac: &Mat, opts: &ConditionOptions) -> Result<MfcqReport> {
    let (n, s) = (dgs.len(), jac.cols());
    let m = gstar.dim();
    let jac_full_rank = s == 0 || numerical_rank(jac, opts.rank_tol)? == s;
    let lmin_at = |d: &[f64]| -> Result<f64> { gstar.add(&model::combine(dgs, d, m)).min_eig() };
    let threshold = opts.rank_tol;

    if let Some(d) = &opts.mfcq_witness {
        if d.len() != n {
            return Err(Error::dim("MFCQ witness", n, d.len()));
        }
        let tangent = if s == 0 { 0.0 } else { num::norm2(&jac.tmatvec(d)) };
        let lmin = lmin_at(d)?;
        let ok = jac_full_rank && tangent <= 1e-10 * num::norm2(d).max(1.0) && lmin > threshold;
        return Ok(MfcqReport {
            holds: Some(ok),
            jac_full_rank,
            witness_d: Some(d.clone()),
            witness_min_eig: lmin,
        });
    }

    // Concave maximization of λ_min over the unit ball of null(∇hᵀ).
    let z = if s == 0 {
        Mat::identity(n)
    } else {
        symlin::null_space(&jac.transpose(), opts.rank_tol)?
    };
    let q = z.cols();
    let dirs: Vec<SymMat> = (0..q).map(|j| model::combine(dgs, &z.col(j), m)).collect();
    let eval = |t: &[f64]| -> Result<(f64, Vec<f64>)> {
        let mut x = gstar.clone();
        for (dj, tj) in dirs.iter().zip(t) {
            x.add_scaled(*tj, dj);
        }
        let ed = eigh_ascending(&x)?;
        let v = ed.vectors.col(0);
        let g: Vec<f64> = dirs.iter().map(|dj| num::dot(&v, &dj.as_mat().matvec(&v))).collect();
        Ok((ed.values[0], g))
    };
    let mut best_t = vec![0.0; q];
    let mut best = eval(&best_t)?.0;
    let mut candidates: Vec<Vec<f64>> = Vec::new();
    for j in 0..q {
        for sgn in [1.0, -1.0] {
            let mut t = vec![0.0; q];
            t[j] = sgn;
            candidates.push(t);
        }
    }
    let mut rng = Rng::seeded(opts.seed);
    for _ in 0..opts.mfcq_restarts {
        if best > threshold || q == 0 {
            break;
        }
        let start = if let Some(c) = candidates.pop() {
            c
        } else {
            let mut u = rng.unit_vec(q);
            let r = rng.uniform();
            u.iter_mut().for_each(|v| *v *= r);
            u
        };
        let mut t = start;
        for it in 0..200 {
            let (val, g) = eval(&t)?;
            if val > best {
                best = val;
                best_t = t.clone();
            }
            if best > threshold {
                break;
            }
            let gn = num::norm2(&g);
            if gn == 0.0 {
                break;
            }
            let step = 0.5 / sqrt(1.0 + it as f64);
            num::axpy(step / gn, &g, &mut t);
            let tn = num::norm2(&t);
            if tn > 1.0 {
                t.iter_mut().for_each(|v| *v /= tn);
            }
        }
    }
    let found = best > threshold;
    let holds = if !jac_full_rank {
        Some(false)
    } else if found {
        Some(true)
    } else {
        None
    };
    Ok(MfcqReport {
        holds,
        jac_full_rank,
        witness_d: found.then(|| z.matvec(&best_t)),
        witness_min_eig: best,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{QmiData, QmiInstance};

    /// f = x₁, G = x₁I₂.
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
    fn lagrangian_gradient_on_twin() {
        let inst = twin();
        let w = PrimalDualTriplet::new(vec![0.0], SymMat::identity(2).scale(0.5), vec![]);
        assert_eq!(grad_x_lagrangian(&inst, &w).unwrap(), vec![0.0]);
        let w = PrimalDualTriplet::new(vec![0.0], SymMat::identity(2), vec![]);
        assert_eq!(grad_x_lagrangian(&inst, &w).unwrap(), vec![-1.0]);
    }

    #[test]
    fn kkt_and_bkkt_residuals_on_twin() {
        let inst = twin();
        let half = SymMat::identity(2).scale(0.5);
        let rep = kkt_residual(&inst, &PrimalDualTriplet::new(vec![0.0], half.clone(), vec![])).unwrap();
        assert!(rep.is_kkt(0.0));
        let rep = kkt_residual(&inst, &PrimalDualTriplet::new(vec![1.0], half.clone(), vec![])).unwrap();
        assert!((rep.comp_norm - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let b = bkkt_residual(
            &inst,
            &PrimalDualTriplet::new(vec![0.2], half, vec![]),
            0.1,
            ComplementarityForm::Product,
        )
        .unwrap();
        assert!(b.max() < 1e-16);
        let b = bkkt_residual(
            &inst,
            &PrimalDualTriplet::new(vec![1.0], SymMat::identity(2), vec![]),
            0.5,
            ComplementarityForm::Symmetric,
        )
        .unwrap();
        assert!((b.complementarity - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-15);

        let err = bkkt_residual(
            &inst,
            &PrimalDualTriplet::new(vec![0.2], SymMat::diag(&[1.0, 0.0]), vec![]),
            0.1,
            ComplementarityForm::Product,
        )
        .unwrap_err();
        assert!(matches!(err, Error::Interiority { .. }));
    }

    #[test]
    fn split_of_zero_and_diagonal() {
        let sp = eigen_split(&SymMat::zeros(2), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(sp.rstar, 0);
        assert_eq!(sp.estar, Mat::identity(2));

        let sp = eigen_split(&SymMat::diag(&[0.0, 0.0, 1.0]), DEFAULT_RANK_TOL).unwrap();
        assert_eq!(sp.rstar, 1);
        assert_eq!(sp.fstar.col(0), vec![0.0, 0.0, 1.0]);
        assert_eq!(
            block_of(&SymMat::diag(&[0.0, 0.0, 1.0]), &sp, Block::FF).unwrap(),
            Mat::identity(1)
        );

        let y = SymMat::diag(&[0.5, 0.5, 0.01]);
        assert_eq!(block_of(&y, &sp, Block::EE).unwrap(), Mat::identity(2).scale(0.5));
        assert_eq!(block_of(&y, &sp, Block::EF).unwrap(), Mat::zeros(2, 1));
        assert!(eigen_split(&SymMat::diag(&[-1.0, 1.0]), DEFAULT_RANK_TOL).is_err());
    }

    #[test]
    fn identity_blocks_for_any_split() {
        let sp = eigen_split(&SymMat::diag(&[2.0, 0.0, 1.0]), DEFAULT_RANK_TOL).unwrap();
        let i3 = SymMat::identity(3);
        assert!(
            block_of(&i3, &sp, Block::EE)
                .unwrap()
                .sub(&Mat::identity(1))
                .frob_norm()
                < 1e-15
        );
        assert!(
            block_of(&i3, &sp, Block::FF)
                .unwrap()
                .sub(&Mat::identity(2))
                .frob_norm()
                < 1e-15
        );
        assert!(block_of(&i3, &sp, Block::EF).unwrap().frob_norm() < 1e-15);
    }

    #[test]
    fn sigma_term_toy() {
        // G* = diag(0, 1), single 𝒢₁ = [[0,1],[1,0]], Y = diag(2, 0).
        let inst = QmiInstance::new(
            "toy",
            "",
            QmiData {
                c0: 0.0,
                c: vec![0.0],
                q: SymMat::zeros(1),
                a0: SymMat::diag(&[0.0, 1.0]),
                a: vec![SymMat::from_rows(&[&[0.0, 1.0], &[1.0, 0.0]]).unwrap()],
                b_quad: None,
                b: vec![],
                h_lin: Mat::zeros(0, 1),
                m_quad: None,
            },
        )
        .unwrap();
        let split = eigen_split(&inst.eval_g(&[0.0]), DEFAULT_RANK_TOL).unwrap();
        let y = SymMat::diag(&[2.0, 0.0]);
        let om = sigma_term(&inst, &[0.0], &y, &split).unwrap();
        assert!((om[(0, 0)] - 4.0).abs() < 1e-14);
        let q = sigma_quad(&inst, &[0.0], &y, &split, &[1.0]).unwrap();
        assert!(q.max_rel_disagreement() < 1e-14);
        assert!((q.norm_form - 4.0).abs() < 1e-14);
    }

    #[test]
    fn twin_has_zero_sigma_term() {
        let inst = twin();
        let split = eigen_split(&inst.eval_g(&[0.0]), DEFAULT_RANK_TOL).unwrap();
        let om = sigma_term(&inst, &[0.0], &SymMat::identity(2).scale(0.5), &split).unwrap();
        assert_eq!(om[(0, 0)], 0.0);
    }
}
