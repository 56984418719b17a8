//! Problem definitions.
//!
//! An instance is a bundle of derivative oracles for
//!
//! ```text
//!     minimize f(x)  subject to  G(x) ⪰ 0,  h(x) = 0,
//! ```
//!
//! with `x ∈ ℝⁿ`, `G(x) ∈ 𝕊^m` and `h(x) ∈ ℝˢ`. `𝒢_i(x) = ∂G/∂x_i`, and
//! `ΔG(x; d) = Σ d_i 𝒢_i(x)`.
//!
//! The concrete family shipped here is the quadratic matrix inequality (QMI):
//! `f` quadratic, `G` and `h` quadratic in `x`, so every derivative is exact.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::num;
use crate::symlin::{Mat, SymMat};

/// Derivative oracles of one nonlinear semidefinite program.
///
/// Implementations must be pure: the same `x` always yields the same output.
/// Callers are responsible for passing vectors of the declared lengths; the
/// checked entry points in this module and in `kkt` validate shapes first.
pub trait NsdpInstance: Send + Sync {
    fn name(&self) -> &str;
    fn description(&self) -> &str {
        ""
    }
    /// Primal dimension.
    fn n(&self) -> usize;
    /// Matrix order of `G`.
    fn m(&self) -> usize;
    /// Number of equality constraints.
    fn s(&self) -> usize;

    fn eval_f(&self, x: &[f64]) -> f64;
    fn grad_f(&self, x: &[f64]) -> Vec<f64>;
    fn hess_f(&self, x: &[f64]) -> SymMat;

    fn eval_g(&self, x: &[f64]) -> SymMat;
    /// `𝒢_i(x)`.
    fn d_g(&self, x: &[f64], i: usize) -> SymMat;
    /// `[W∙∂²G/∂x_i∂x_j]_{ij}`.
    fn hess_g_contract(&self, x: &[f64], w: &SymMat) -> SymMat;

    fn eval_h(&self, x: &[f64]) -> Vec<f64>;
    /// `∇h(x)`, an n×s matrix whose columns are the constraint gradients.
    fn jac_h(&self, x: &[f64]) -> Mat;
    /// `Σ_k z_k ∇²h_k(x)`.
    fn hess_h_contract(&self, x: &[f64], z: &[f64]) -> SymMat;
}

pub(crate) fn check_x(inst: &dyn NsdpInstance, x: &[f64]) -> Result<()> {
    if x.len() != inst.n() {
        return Err(Error::dim("primal point x", inst.n(), x.len()));
    }
    Ok(())
}

/// All partial derivatives `𝒢_1(x), …, 𝒢_n(x)`.
pub fn d_g_all(inst: &dyn NsdpInstance, x: &[f64]) -> Vec<SymMat> {
    (0..inst.n()).map(|i| inst.d_g(x, i)).collect()
}

/// `ΔG(x; d) = Σ d_i 𝒢_i(x)`.
pub fn delta_g(inst: &dyn NsdpInstance, x: &[f64], d: &[f64]) -> Result<SymMat> {
    check_x(inst, x)?;
    if d.len() != inst.n() {
        return Err(Error::dim("direction d", inst.n(), d.len()));
    }
    Ok(combine(&d_g_all(inst, x), d, inst.m()))
}

/// `Σ d_i M_i` for precomputed derivative matrices.
pub fn combine(mats: &[SymMat], d: &[f64], m: usize) -> SymMat {
    let mut out = SymMat::zeros(m);
    for (mi, di) in mats.iter().zip(d) {
        if *di != 0.0 {
            out.add_scaled(*di, mi);
        }
    }
    out
}

/// `𝒥G(x)*Y = [𝒢_1(x)∙Y, …, 𝒢_n(x)∙Y]ᵀ`.
pub fn adjoint_jg(inst: &dyn NsdpInstance, x: &[f64], y: &SymMat) -> Result<Vec<f64>> {
    check_x(inst, x)?;
    if y.dim() != inst.m() {
        return Err(Error::dim("multiplier Y", inst.m(), y.dim()));
    }
    Ok((0..inst.n()).map(|i| inst.d_g(x, i).dot(y)).collect())
}

// ---------------------------------------------------------------------------
// Quadratic matrix inequality instances

/// Coefficients of a QMI instance:
///
/// ```text
///     f(x) = c0 + cᵀx + ½ xᵀQx
///     G(x) = A0 + Σ x_i A^i + ½ Σ_ij x_i x_j B^{ij}
///     h(x) = b + H x + ½ (xᵀ M_k x)_k
/// ```
#[derive(Clone, Debug, PartialEq)]
pub struct QmiData {
    pub c0: f64,
    pub c: Vec<f64>,
    pub q: SymMat,
    pub a0: SymMat,
    pub a: Vec<SymMat>,
    /// Row-major n×n table with `B^{ij} = B^{ji}`; `None` means affine `G`.
    pub b_quad: Option<Vec<SymMat>>,
    pub b: Vec<f64>,
    /// s×n.
    pub h_lin: Mat,
    /// `None` means affine `h`.
    pub m_quad: Option<Vec<SymMat>>,
}

impl QmiData {
    pub fn n(&self) -> usize {
        self.c.len()
    }

    pub fn m(&self) -> usize {
        self.a0.dim()
    }

    pub fn s(&self) -> usize {
        self.b.len()
    }

    /// Check all shapes and the symmetry of the quadratic table.
    pub fn validate(&self) -> Result<()> {
        let (n, m, s) = (self.n(), self.m(), self.s());
        if n == 0 {
            return Err(Error::InvalidArgument("instance needs n >= 1".into()));
        }
        if m == 0 {
            return Err(Error::InvalidArgument("instance needs m >= 1".into()));
        }
        if self.q.dim() != n {
            return Err(Error::dim("f.Q", format!("{n}x{n}"), format!("{0}x{0}", self.q.dim())));
        }
        if self.a.len() != n {
            return Err(Error::dim("G.A (number of blocks)", n, self.a.len()));
        }
        for (i, ai) in self.a.iter().enumerate() {
            if ai.dim() != m {
                return Err(Error::dim(
                    format!("G.A[{i}]"),
                    format!("{m}x{m}"),
                    format!("{0}x{0}", ai.dim()),
                ));
            }
        }
        if let Some(bq) = &self.b_quad {
            if bq.len() != n * n {
                return Err(Error::dim("G.B (number of blocks)", n * n, bq.len()));
            }
            for i in 0..n {
                for j in 0..n {
                    let bij = &bq[i * n + j];
                    if bij.dim() != m {
                        return Err(Error::dim(
                            format!("G.B[{i}][{j}]"),
                            format!("{m}x{m}"),
                            format!("{0}x{0}", bij.dim()),
                        ));
                    }
                    let gap = bij.sub(&bq[j * n + i]).as_mat().max_abs();
                    if gap > crate::symlin::SYM_TOL * bij.as_mat().max_abs().max(1.0) {
                        return Err(Error::NotSymmetric {
                            name: format!("G.B table (B[{i}][{j}] vs B[{j}][{i}])"),
                            gap,
                        });
                    }
                }
            }
        }
        if self.h_lin.rows() != s || self.h_lin.cols() != n {
            return Err(Error::dim(
                "h.H",
                format!("{s}x{n}"),
                format!("{}x{}", self.h_lin.rows(), self.h_lin.cols()),
            ));
        }
        if let Some(mq) = &self.m_quad {
            if mq.len() != s {
                return Err(Error::dim("h.M (number of blocks)", s, mq.len()));
            }
            for (k, mk) in mq.iter().enumerate() {
                if mk.dim() != n {
                    return Err(Error::dim(
                        format!("h.M[{k}]"),
                        format!("{n}x{n}"),
                        format!("{0}x{0}", mk.dim()),
                    ));
                }
            }
        }
        Ok(())
    }

    fn b_at(&self, i: usize, j: usize) -> Option<&SymMat> {
        self.b_quad.as_ref().map(|b| &b[i * self.n() + j])
    }
}

/// A named, validated QMI instance.
#[derive(Clone, Debug, PartialEq)]
pub struct QmiInstance {
    pub name: String,
    pub description: String,
    pub data: QmiData,
}

impl QmiInstance {
    pub fn new(name: impl Into<String>, description: impl Into<String>, data: QmiData) -> Result<Self> {
        data.validate()?;
        Ok(QmiInstance {
            name: name.into(),
            description: description.into(),
            data,
        })
    }
}

impl NsdpInstance for QmiInstance {
    fn name(&self) -> &str {
        &self.name
    }

    fn description(&self) -> &str {
        &self.description
    }

    fn n(&self) -> usize {
        self.data.n()
    }

    fn m(&self) -> usize {
        self.data.m()
    }

    fn s(&self) -> usize {
        self.data.s()
    }

    fn eval_f(&self, x: &[f64]) -> f64 {
        let d = &self.data;
        let qx = d.q.as_mat().matvec(x);
        d.c0 + num::dot(&d.c, x) + 0.5 * num::dot(x, &qx)
    }

    fn grad_f(&self, x: &[f64]) -> Vec<f64> {
        let d = &self.data;
        let mut g = d.q.as_mat().matvec(x);
        num::axpy(1.0, &d.c, &mut g);
        g
    }

    fn hess_f(&self, _x: &[f64]) -> SymMat {
        self.data.q.clone()
    }

    fn eval_g(&self, x: &[f64]) -> SymMat {
        let d = &self.data;
        let mut g = d.a0.clone();
        for (i, ai) in d.a.iter().enumerate() {
            if x[i] != 0.0 {
                g.add_scaled(x[i], ai);
            }
        }
        if d.b_quad.is_some() {
            let n = d.n();
            for i in 0..n {
                for j in 0..n {
                    let c = 0.5 * x[i] * x[j];
                    if c != 0.0 {
                        g.add_scaled(c, d.b_at(i, j).expect("quadratic table present"));
                    }
                }
            }
        }
        g
    }

    fn d_g(&self, x: &[f64], i: usize) -> SymMat {
        let d = &self.data;
        let mut gi = d.a[i].clone();
        if d.b_quad.is_some() {
            for (j, xj) in x.iter().enumerate() {
                if *xj != 0.0 {
                    gi.add_scaled(*xj, d.b_at(i, j).expect("quadratic table present"));
                }
            }
        }
        gi
    }

    fn hess_g_contract(&self, _x: &[f64], w: &SymMat) -> SymMat {
        let d = &self.data;
        let n = d.n();
        match d.b_quad {
            None => SymMat::zeros(n),
            Some(_) => SymMat::from_upper(n, |i, j| d.b_at(i, j).expect("present").dot(w)),
        }
    }

    fn eval_h(&self, x: &[f64]) -> Vec<f64> {
        let d = &self.data;
        let mut h = d.h_lin.matvec(x);
        num::axpy(1.0, &d.b, &mut h);
        if let Some(mq) = &d.m_quad {
            for (hk, mk) in h.iter_mut().zip(mq) {
                *hk += 0.5 * num::dot(x, &mk.as_mat().matvec(x));
            }
        }
        h
    }

    fn jac_h(&self, x: &[f64]) -> Mat {
        let d = &self.data;
        let mut j = d.h_lin.transpose();
        if let Some(mq) = &d.m_quad {
            for (k, mk) in mq.iter().enumerate() {
                let mx = mk.as_mat().matvec(x);
                for (i, v) in mx.iter().enumerate() {
                    j[(i, k)] += v;
                }
            }
        }
        j
    }

    fn hess_h_contract(&self, _x: &[f64], z: &[f64]) -> SymMat {
        let d = &self.data;
        let mut out = SymMat::zeros(d.n());
        if let Some(mq) = &d.m_quad {
            for (zk, mk) in z.iter().zip(mq) {
                out.add_scaled(*zk, mk);
            }
        }
        out
    }
}

// ---------------------------------------------------------------------------
// Finite-difference validation

/// Default central-difference step.
pub const FD_STEP: f64 = 1e-5;
/// Default relative tolerance.
pub const FD_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct FdEntry {
    pub oracle: &'static str,
    /// Largest `|fd − analytic| / max(|analytic|, 1)` over all entries.
    pub max_error: f64,
    pub pass: bool,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FdReport {
    pub entries: Vec<FdEntry>,
}

impl FdReport {
    pub fn pass(&self) -> bool {
        self.entries.iter().all(|e| e.pass)
    }

    pub fn entry(&self, oracle: &str) -> Option<&FdEntry> {
        self.entries.iter().find(|e| e.oracle == oracle)
    }
}

fn rel_err(fd: f64, an: f64) -> f64 {
    (fd - an).abs() / an.abs().max(1.0)
}

fn shifted(x: &[f64], i: usize, h: f64) -> Vec<f64> {
    let mut y = x.to_vec();
    y[i] += h;
    y
}

/// Compare every derivative oracle against central differences of the
/// next-lower oracle. Second derivatives of `G` and `h` are checked through
/// deterministic contractions.
pub fn fd_check(inst: &dyn NsdpInstance, x: &[f64], step: f64, tol: f64) -> Result<FdReport> {
    check_x(inst, x)?;
    if !(step > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "finite-difference step must be positive, got {step}"
        )));
    }
    let (n, m, s) = (inst.n(), inst.m(), inst.s());
    let w = SymMat::from_upper(m, |i, j| 1.0 / (1.0 + i as f64 + j as f64));
    let z: Vec<f64> = (0..s).map(|k| 1.0 / (1.0 + k as f64)).collect();

    let grad = inst.grad_f(x);
    let hess = inst.hess_f(x);
    let dgs = d_g_all(inst, x);
    let hgc = inst.hess_g_contract(x, &w);
    let jac = inst.jac_h(x);
    let hhc = inst.hess_h_contract(x, &z);

    let mut e_grad = 0.0f64;
    let mut e_hess = 0.0f64;
    let mut e_dg = 0.0f64;
    let mut e_hgc = 0.0f64;
    let mut e_jac = 0.0f64;
    let mut e_hhc = 0.0f64;
    let two_h = 2.0 * step;
    for i in 0..n {
        let xp = shifted(x, i, step);
        let xm = shifted(x, i, -step);

        let fd = (inst.eval_f(&xp) - inst.eval_f(&xm)) / two_h;
        e_grad = e_grad.max(rel_err(fd, grad[i]));

        let (gp, gm) = (inst.grad_f(&xp), inst.grad_f(&xm));
        for j in 0..n {
            e_hess = e_hess.max(rel_err((gp[j] - gm[j]) / two_h, hess[(j, i)]));
        }

        let (bp, bm) = (inst.eval_g(&xp), inst.eval_g(&xm));
        for a in 0..m {
            for b in a..m {
                e_dg = e_dg.max(rel_err((bp[(a, b)] - bm[(a, b)]) / two_h, dgs[i][(a, b)]));
            }
        }

        for j in 0..n {
            let fd = (inst.d_g(&xp, j).dot(&w) - inst.d_g(&xm, j).dot(&w)) / two_h;
            e_hgc = e_hgc.max(rel_err(fd, hgc[(i, j)]));
        }

        let (hp, hm) = (inst.eval_h(&xp), inst.eval_h(&xm));
        for k in 0..s {
            e_jac = e_jac.max(rel_err((hp[k] - hm[k]) / two_h, jac[(i, k)]));
        }

        let (jp, jm) = (inst.jac_h(&xp).matvec(&z), inst.jac_h(&xm).matvec(&z));
        for j in 0..n {
            e_hhc = e_hhc.max(rel_err((jp[j] - jm[j]) / two_h, hhc[(j, i)]));
        }
    }

    let entry = |oracle, e: f64| FdEntry {
        oracle,
        max_error: e,
        pass: e <= tol,
    };
    Ok(FdReport {
        entries: vec![
            entry("grad_f", e_grad),
            entry("hess_f", e_hess),
            entry("dG", e_dg),
            entry("hessG_contract", e_hgc),
            entry("jac_h", e_jac),
            entry("hessh_contract", e_hhc),
        ],
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// G = [[x₁², 0], [0, x₁]], f = x₁, no equalities.
    fn quad_g() -> QmiInstance {
        let data = QmiData {
            c0: 0.0,
            c: vec![1.0],
            q: SymMat::zeros(1),
            a0: SymMat::zeros(2),
            a: vec![SymMat::diag(&[0.0, 1.0])],
            b_quad: Some(vec![SymMat::diag(&[2.0, 0.0])]),
            b: vec![],
            h_lin: Mat::zeros(0, 1),
            m_quad: None,
        };
        QmiInstance::new("quad-g", "", data).unwrap()
    }

    #[test]
    fn quadratic_delta_g() {
        let inst = quad_g();
        let dg = delta_g(&inst, &[1.0], &[2.0]).unwrap();
        assert_eq!(dg, SymMat::diag(&[4.0, 2.0]));
        assert!(delta_g(&inst, &[1.0, 2.0], &[2.0]).is_err());
    }

    #[test]
    fn quadratic_fd_check_passes() {
        let inst = quad_g();
        let rep = fd_check(&inst, &[0.7], FD_STEP, FD_TOL).unwrap();
        assert!(rep.pass(), "{rep:?}");
    }

    #[test]
    fn table_asymmetry_rejected() {
        let mut data = quad_g().data;
        data.c = vec![1.0, 0.0];
        data.q = SymMat::zeros(2);
        data.a = vec![SymMat::diag(&[0.0, 1.0]), SymMat::zeros(2)];
        data.h_lin = Mat::zeros(0, 2);
        data.b_quad = Some(vec![
            SymMat::zeros(2),
            SymMat::diag(&[1.0, 0.0]),
            SymMat::diag(&[1.001, 0.0]),
            SymMat::zeros(2),
        ]);
        assert!(matches!(data.validate(), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut data = quad_g().data;
        data.a.push(SymMat::zeros(2));
        let err = data.validate().unwrap_err();
        assert!(matches!(err, Error::Dimension { .. }), "{err}");
    }
}
