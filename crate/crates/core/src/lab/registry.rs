//! Builtin instances with known answers, and the seeded random generator.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::analytic::{self, CenterOptions};
use crate::error::{Error, Result};
use crate::kkt::{self, ComplementarityForm, PrimalDualTriplet};
use crate::model::{QmiData, QmiInstance};
use crate::rng::Rng;
use crate::symlin::{self, Mat, SymMat, DEFAULT_RANK_TOL};

pub const REGISTRY: [&str; 6] = [
    "deg-twin",
    "deg-cross",
    "deg-mixed",
    "nondeg-control",
    "deg-curve",
    "rand-qmi",
];

/// Seed and block size used by the bare name `rand-qmi`.
pub const RAND_QMI_DEFAULT: (u64, usize) = (42, 3);

/// Tolerance for the load-time consistency check of every oracle.
const ORACLE_TOL: f64 = 1e-9;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ExpectedConditions {
    pub sc: bool,
    pub nc: bool,
    pub mfcq: bool,
    pub ssosc: bool,
}

const DEGENERATE: ExpectedConditions = ExpectedConditions {
    sc: true,
    nc: false,
    mfcq: true,
    ssosc: true,
};

/// Known answers for an instance.
#[derive(Clone, Debug)]
pub struct Oracle {
    pub xstar: Vec<f64>,
    /// Closed-form central path `μ ↦ w(μ)`, when one is known.
    pub path: Option<fn(f64) -> PrimalDualTriplet>,
    pub y_a: SymMat,
    pub z_a: Vec<f64>,
    pub xi_star: Vec<f64>,
    pub expected: ExpectedConditions,
    /// `true` when `y_a`, `z_a` and `xi_star` are hand-derived rather than
    /// computed by the library at load time.
    pub hand_derived: bool,
    /// A direction `d` with `G(x*) + ΔG(x*; d) ≻ 0` and `∇h(x*)ᵀd = 0`.
    pub mfcq_witness: Option<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct BuiltinInstance {
    pub name: String,
    pub instance: QmiInstance,
    pub oracle: Oracle,
    /// Strictly feasible starting point for path tracing.
    pub x0: Vec<f64>,
}

fn e(m: usize, i: usize, j: usize) -> SymMat {
    SymMat::from_upper(m, |a, b| if (a, b) == (i.min(j), i.max(j)) { 1.0 } else { 0.0 })
}

fn sym_sum(m: usize, terms: &[(f64, SymMat)]) -> SymMat {
    let mut out = SymMat::zeros(m);
    for (c, t) in terms {
        out.add_scaled(*c, t);
    }
    out
}

fn affine_data(c: Vec<f64>, q: SymMat, a0: SymMat, a: Vec<SymMat>) -> QmiData {
    let n = c.len();
    QmiData {
        c0: 0.0,
        c,
        q,
        a0,
        a,
        b_quad: None,
        b: Vec::new(),
        h_lin: Mat::zeros(0, n),
        m_quad: None,
    }
}

fn twin_path(mu: f64) -> PrimalDualTriplet {
    PrimalDualTriplet::new(vec![2.0 * mu], SymMat::diag(&[0.5, 0.5]), Vec::new())
}

fn cross_path(mu: f64) -> PrimalDualTriplet {
    PrimalDualTriplet::new(vec![2.0 * mu, 0.0], SymMat::diag(&[0.5, 0.5]), Vec::new())
}

fn mixed_path(mu: f64) -> PrimalDualTriplet {
    PrimalDualTriplet::new(vec![2.0 * mu, 0.0, 0.0], SymMat::diag(&[0.5, 0.5, mu]), vec![mu])
}

fn control_path(mu: f64) -> PrimalDualTriplet {
    PrimalDualTriplet::new(vec![mu, 0.0, mu], SymMat::identity(2), Vec::new())
}

/// `min x  s.t. diag(x, x) ⪰ 0`.
fn deg_twin() -> Result<BuiltinInstance> {
    let data = affine_data(vec![1.0], SymMat::zeros(1), SymMat::zeros(2), vec![SymMat::identity(2)]);
    Ok(BuiltinInstance {
        name: "deg-twin".into(),
        instance: QmiInstance::new("deg-twin", "min x s.t. diag(x, x) ⪰ 0", data)?,
        oracle: Oracle {
            xstar: vec![0.0],
            path: Some(twin_path),
            y_a: SymMat::diag(&[0.5, 0.5]),
            z_a: Vec::new(),
            xi_star: vec![2.0],
            expected: DEGENERATE,
            hand_derived: true,
            mfcq_witness: Some(vec![1.0]),
        },
        x0: vec![1.0],
    })
}

/// `min x1 + x2²  s.t. [[x1, x2], [x2, x1]] ⪰ 0`.
fn deg_cross() -> Result<BuiltinInstance> {
    let data = affine_data(
        vec![1.0, 0.0],
        SymMat::diag(&[0.0, 2.0]),
        SymMat::zeros(2),
        vec![SymMat::identity(2), e(2, 0, 1)],
    );
    Ok(BuiltinInstance {
        name: "deg-cross".into(),
        instance: QmiInstance::new("deg-cross", "min x1 + x2² s.t. [[x1, x2], [x2, x1]] ⪰ 0", data)?,
        oracle: Oracle {
            xstar: vec![0.0, 0.0],
            path: Some(cross_path),
            y_a: SymMat::diag(&[0.5, 0.5]),
            z_a: Vec::new(),
            xi_star: vec![2.0, 0.0],
            expected: DEGENERATE,
            hand_derived: true,
            mfcq_witness: Some(vec![1.0, 0.0]),
        },
        x0: vec![1.0, 0.0],
    })
}

fn mixed_data(curved: bool) -> QmiData {
    let (n, m) = (3, 3);
    let mut data = affine_data(
        vec![1.0, 0.0, 0.0],
        SymMat::diag(&[0.0, 0.0, 2.0]),
        e(m, 2, 2),
        vec![SymMat::diag(&[1.0, 1.0, 0.0]), e(m, 2, 2), e(m, 0, 2)],
    );
    data.b = vec![0.0];
    data.h_lin = Mat::from_rows(&[&[0.0, 1.0, 0.0]]);
    if curved {
        let mut table = vec![SymMat::zeros(m); n * n];
        table[n + 1] = sym_sum(m, &[(2.0, e(m, 2, 2))]);
        data.b_quad = Some(table);
        data.m_quad = Some(vec![SymMat::diag(&[0.0, 0.0, -2.0])]);
    }
    data
}

/// `min x1 + x3²  s.t. [[x1, 0, x3], [0, x1, 0], [x3, 0, 1 + x2]] ⪰ 0, x2 = 0`.
fn deg_mixed() -> Result<BuiltinInstance> {
    Ok(BuiltinInstance {
        name: "deg-mixed".into(),
        instance: QmiInstance::new(
            "deg-mixed",
            "min x1 + x3² s.t. [[x1, 0, x3], [0, x1, 0], [x3, 0, 1 + x2]] ⪰ 0, x2 = 0",
            mixed_data(false),
        )?,
        oracle: Oracle {
            xstar: vec![0.0; 3],
            path: Some(mixed_path),
            y_a: SymMat::diag(&[0.5, 0.5, 0.0]),
            z_a: vec![0.0],
            xi_star: vec![2.0, 0.0, 0.0],
            expected: DEGENERATE,
            hand_derived: true,
            mfcq_witness: Some(vec![1.0, 0.0, 0.0]),
        },
        x0: vec![1.0, 0.0, 0.0],
    })
}

/// `min x1 + x3  s.t. [[x1, x2], [x2, x3]] ⪰ 0`.
fn nondeg_control() -> Result<BuiltinInstance> {
    let data = affine_data(
        vec![1.0, 0.0, 1.0],
        SymMat::zeros(3),
        SymMat::zeros(2),
        vec![e(2, 0, 0), e(2, 0, 1), e(2, 1, 1)],
    );
    Ok(BuiltinInstance {
        name: "nondeg-control".into(),
        instance: QmiInstance::new("nondeg-control", "min x1 + x3 s.t. [[x1, x2], [x2, x3]] ⪰ 0", data)?,
        oracle: Oracle {
            xstar: vec![0.0; 3],
            path: Some(control_path),
            y_a: SymMat::identity(2),
            z_a: Vec::new(),
            xi_star: vec![1.0, 0.0, 1.0],
            expected: ExpectedConditions {
                sc: true,
                nc: true,
                mfcq: true,
                ssosc: true,
            },
            hand_derived: true,
            mfcq_witness: Some(vec![1.0, 0.0, 1.0]),
        },
        x0: vec![1.0, 0.0, 1.0],
    })
}

/// `deg-mixed` with curvature added where it vanishes on the path:
/// `G33 = 1 + x2 + x2²` and `h = x2 − x3²`.
fn deg_curve() -> Result<BuiltinInstance> {
    let instance = QmiInstance::new(
        "deg-curve",
        "min x1 + x3² s.t. [[x1, 0, x3], [0, x1, 0], [x3, 0, 1 + x2 + x2²]] ⪰ 0, x2 − x3² = 0",
        mixed_data(true),
    )?;
    let xstar = vec![0.0; 3];
    let (y_a, z_a, xi_star) = numeric_limits(&instance, &xstar)?;
    Ok(BuiltinInstance {
        name: "deg-curve".into(),
        instance,
        oracle: Oracle {
            xstar,
            path: Some(mixed_path),
            y_a,
            z_a,
            xi_star,
            expected: DEGENERATE,
            hand_derived: false,
            mfcq_witness: Some(vec![1.0, 0.0, 0.0]),
        },
        x0: vec![1.0, 0.0, 0.0],
    })
}

/// Analytic center and limiting direction computed by the library.
fn numeric_limits(inst: &QmiInstance, xstar: &[f64]) -> Result<(SymMat, Vec<f64>, Vec<f64>)> {
    let g = crate::model::NsdpInstance::eval_g(inst, xstar);
    let split = kkt::eigen_split(&g, DEFAULT_RANK_TOL)?;
    let center = analytic::analytic_center(inst, xstar, &split, None, &CenterOptions::default())?;
    let xi = analytic::xi_star(inst, xstar, &split, &center)?;
    Ok((center.y_a, center.z_a, xi.xi))
}

/// `P [[ee, ef], [efᵀ, ff]] Pᵀ`.
fn embed(p: &Mat, ee: &SymMat, ef: &Mat, ff: &SymMat) -> SymMat {
    let k = ee.dim();
    let r = ff.dim();
    let mut blk = Mat::zeros(k + r, k + r);
    blk.set_block(0, 0, ee.as_mat());
    blk.set_block(0, k, ef);
    blk.set_block(k, 0, &ef.transpose());
    blk.set_block(k, k, ff.as_mat());
    SymMat::from_mat_unchecked(blk).congruence_t(p)
}

fn random_mat(rng: &mut Rng, rows: usize, cols: usize, scale: f64) -> Mat {
    Mat::from_fn(rows, cols, |_, _| scale * rng.normal())
}

fn scaled(x: SymMat, c: f64) -> SymMat {
    x.scale(c)
}

/// Random degenerate QMI instance with a known minimizer `x* = 0`.
///
/// `G(x*)` has a `k`-dimensional null space. The number of variables is one
/// less than `k(k+1)/2 + s`, so the rank condition on the limit map fails,
/// and the last coordinate direction lies in the null space of that map.
/// The objective is made strongly convex so second-order sufficiency holds.
pub fn rand_qmi(seed: u64, k: usize) -> Result<BuiltinInstance> {
    // k = 1 leaves no room for a variable count below the rank requirement.
    if !(2..=4).contains(&k) {
        return Err(Error::InvalidArgument(format!(
            "rand-qmi null-space dimension must be between 2 and 4, got {k}"
        )));
    }
    let mut rng = Rng::seeded(seed);
    let r = 1 + rng.below(2);
    let s = rng.below(2);
    let big_k = k * (k + 1) / 2;
    let n = big_k + s - 1;
    let m = k + r;
    let p = rng.orthogonal(m);

    let lam_f: Vec<f64> = (0..r).map(|_| rng.range(1.0, 2.0)).collect();
    let a0 = embed(&p, &SymMat::zeros(k), &Mat::zeros(k, r), &SymMat::diag(&lam_f));
    let a: Vec<SymMat> = (0..n)
        .map(|i| {
            let ee = if i == 0 {
                SymMat::identity(k)
            } else if i == n - 1 {
                SymMat::zeros(k)
            } else {
                rng.sym(k)
            };
            let ef = random_mat(&mut rng, k, r, 0.3);
            let ff = scaled(rng.sym(r), 0.3);
            embed(&p, &ee, &ef, &ff)
        })
        .collect();

    let mut table = vec![SymMat::zeros(m); n * n];
    for i in 1..n {
        for j in i..n {
            let bij = scaled(rng.sym(m), 0.05);
            table[i * n + j] = bij.clone();
            table[j * n + i] = bij;
        }
    }

    let rq = random_mat(&mut rng, n, n, 1.0);
    let mut q = SymMat::from_mat_unchecked(rq.matmul(&rq.transpose())).scale(1.0 / n as f64);
    q.add_scaled_identity(2.0);

    let l = random_mat(&mut rng, k, k, 1.0);
    let mut yee = SymMat::from_mat_unchecked(l.matmul(&l.transpose())).scale(1.0 / k as f64);
    yee.add_scaled_identity(0.5);
    let ystar = embed(&p, &yee, &Mat::zeros(k, r), &SymMat::zeros(r));
    let zstar = rng.normal_vec(s);

    let h_lin = Mat::from_fn(s, n, |_, j| if j == 0 || j == n - 1 { 0.0 } else { rng.normal() });
    let m_quad: Vec<SymMat> = (0..s)
        .map(|_| {
            let raw = scaled(rng.sym(n), 0.05);
            SymMat::from_upper(n, |i, j| if i == 0 || j == 0 { 0.0 } else { raw.as_mat()[(i, j)] })
        })
        .collect();

    let htz = h_lin.tmatvec(&zstar);
    let c: Vec<f64> = (0..n).map(|i| a[i].dot(&ystar) - htz[i]).collect();

    let data = QmiData {
        c0: 0.0,
        c,
        q,
        a0,
        a,
        b_quad: Some(table),
        b: vec![0.0; s],
        h_lin,
        m_quad: if s > 0 { Some(m_quad) } else { None },
    };
    let name = format!("rand-qmi:{seed}:{k}");
    let instance = QmiInstance::new(
        &name,
        format!("random degenerate QMI, seed {seed}, null space {k}, n={n}, m={m}, s={s}"),
        data,
    )?;

    let xstar = vec![0.0; n];
    let mut x0 = vec![0.0; n];
    let mut t = 1.0;
    loop {
        x0[0] = t;
        let g = crate::model::NsdpInstance::eval_g(&instance, &x0);
        if symlin::cholesky(&g).is_some() {
            break;
        }
        t *= 0.5;
        if t < 1e-6 {
            return Err(Error::Interiority {
                what: "no strictly feasible start along the first axis".into(),
                min_eig: g.min_eig().unwrap_or(f64::NAN),
            });
        }
    }

    let (y_a, z_a, xi_star) = numeric_limits(&instance, &xstar)?;
    let mut witness = vec![0.0; n];
    witness[0] = 1.0;
    Ok(BuiltinInstance {
        name,
        instance,
        oracle: Oracle {
            xstar,
            path: None,
            y_a,
            z_a,
            xi_star,
            expected: DEGENERATE,
            hand_derived: false,
            mfcq_witness: Some(witness),
        },
        x0,
    })
}

fn parse_rand_name(name: &str) -> Option<Result<(u64, usize)>> {
    if name == "rand-qmi" {
        return Some(Ok(RAND_QMI_DEFAULT));
    }
    let rest = name.strip_prefix("rand-qmi:")?;
    let bad = || {
        Error::InvalidArgument(format!(
            "malformed generated-instance name {name:?}; expected rand-qmi:SEED:K"
        ))
    };
    let mut parts = rest.split(':');
    let parsed = (|| {
        let seed = parts.next()?.parse::<u64>().ok()?;
        let k = parts.next()?.parse::<usize>().ok()?;
        if parts.next().is_some() {
            return None;
        }
        Some((seed, k))
    })();
    Some(parsed.ok_or_else(bad))
}

/// Whether `name` denotes a builtin, including parametrized generator names.
pub fn is_builtin_name(name: &str) -> bool {
    REGISTRY.contains(&name) || name.starts_with("rand-qmi:")
}

/// Load a builtin by name and check its oracle against the instance.
pub fn builtin_instance(name: &str) -> Result<BuiltinInstance> {
    let b = match name {
        "deg-twin" => deg_twin()?,
        "deg-cross" => deg_cross()?,
        "deg-mixed" => deg_mixed()?,
        "nondeg-control" => nondeg_control()?,
        "deg-curve" => deg_curve()?,
        _ => match parse_rand_name(name) {
            Some(parsed) => {
                let (seed, k) = parsed?;
                rand_qmi(seed, k)?
            }
            None => {
                return Err(Error::UnknownInstance {
                    name: name.to_string(),
                    registry: REGISTRY.iter().map(|s| s.to_string()).collect(),
                })
            }
        },
    };
    self_check(&b)?;
    Ok(b)
}

/// KKT at the oracle point and barrier-KKT along the closed-form path.
fn self_check(b: &BuiltinInstance) -> Result<()> {
    let o = &b.oracle;
    let w = PrimalDualTriplet::new(o.xstar.clone(), o.y_a.clone(), o.z_a.clone());
    let rep = kkt::kkt_residual(&b.instance, &w)?;
    if !rep.is_kkt(ORACLE_TOL) {
        return Err(Error::Inconsistent {
            what: format!("{}: oracle multiplier is not a KKT multiplier", b.name),
            residual: rep.max_residual(),
        });
    }
    if let Some(path) = o.path {
        for mu in [1e-2, 1e-4] {
            let res = kkt::bkkt_residual(&b.instance, &path(mu), mu, ComplementarityForm::Product).map_err(|e| {
                Error::AtMu {
                    mu,
                    source: Box::new(e),
                }
            })?;
            if res.max() > ORACLE_TOL {
                return Err(Error::Inconsistent {
                    what: format!("{}: closed-form path is off the central path", b.name),
                    residual: res.max(),
                });
            }
        }
    }
    Ok(())
}
