//! Verification experiments over traced central paths.
//!
//! [`run_verification`] traces the path of a builtin instance on a geometric
//! `μ` grid and measures the asymptotic quantities of the degenerate regime
//! against the instance oracle. Asymptotic `Θ(·)`/`O(·)` statements are
//! checked as bounded ratios over the grid (factor-10 envelopes). The
//! behaviour of the tangent `ẋ(μ)` relative to `ξ*` is measured only.

mod registry;

pub use registry::{
    builtin_instance, is_builtin_name, rand_qmi, BuiltinInstance, ExpectedConditions, Oracle, RAND_QMI_DEFAULT,
    REGISTRY,
};

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use crate::analytic::{self, AnalyticCenterResult, CenterOptions};
use crate::barrier::{self, BarrierOptions};
use crate::error::{Error, Result};
use crate::kkt::{self, Block, ConditionOptions, ConditionReport, EigenSplit, PrimalDualTriplet};
use crate::model::NsdpInstance;
use crate::num;
use crate::path::{self, CorrectorOptions, PathTrace, Schedule, TraceMode, TraceOptions};
use crate::rng::Rng;
use crate::symlin::{self, SymMat, DEFAULT_RANK_TOL};

/// Factor allowed between the extremes of a quantity claimed to be `Θ(1)`.
pub const RATIO_ENVELOPE: f64 = 10.0;
/// Barrier parameter at which reference values are taken.
pub const MU_REF: f64 = 1e-2;
/// Largest `μ` at which tube membership is asserted.
pub const MU_REGION: f64 = 1e-3;
pub const FINAL_TOL: f64 = 1e-4;
pub const UNIQUENESS_TOL: f64 = 1e-8;
pub const UNIQUENESS_STARTS: usize = 8;
pub const MANIFOLD_EXPONENT: f64 = 1.9;
pub const TANGENT_RATIO: (f64, f64) = (2.5, 6.0);
pub const CLOSED_FORM_TOL: f64 = 1e-8;
pub const SOLVER_AGREEMENT_TOL: f64 = 1e-9;
pub const SINGULAR_LIMIT_TOL: f64 = 1e-10;
pub const NONSINGULAR_LIMIT_TOL: f64 = 1e-6;
/// Kendall ties: consecutive values closer than this count as equal.
pub const KENDALL_TIE: f64 = 1e-10;
pub const KENDALL_MIN_TAU: f64 = 0.5;

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentRecord {
    pub name: String,
    /// `None` for measured-only or skipped experiments.
    pub pass: Option<bool>,
    pub series: Vec<f64>,
    pub bound: Option<f64>,
    pub note: String,
}

impl ExperimentRecord {
    fn new(name: &str, pass: Option<bool>, series: Vec<f64>, bound: Option<f64>, note: impl Into<String>) -> Self {
        ExperimentRecord {
            name: name.to_string(),
            pass,
            series,
            bound,
            note: note.into(),
        }
    }

    fn skipped(name: &str, why: &str) -> Self {
        Self::new(name, None, Vec::new(), None, format!("skipped: {why}"))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerifyOptions {
    pub schedule: Schedule,
    pub rho: f64,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        VerifyOptions {
            schedule: Schedule::default(),
            rho: 0.25,
            seed: 42,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct VerificationReport {
    pub instance: String,
    pub schedule: Schedule,
    pub rho: f64,
    pub seed: u64,
    pub experiments: Vec<ExperimentRecord>,
    /// Conjunction over experiments with an asserted outcome.
    pub overall: bool,
    pub trace: PathTrace,
}

impl VerificationReport {
    pub fn experiment(&self, name: &str) -> Option<&ExperimentRecord> {
        self.experiments.iter().find(|e| e.name == name)
    }
}

// ---------------------------------------------------------------------------
// Per-point trace metrics

/// Limit data against which a trace is measured.
#[derive(Clone, Debug)]
pub struct LimitData {
    pub xstar: Vec<f64>,
    pub split: EigenSplit,
    pub y_a: Option<SymMat>,
    pub z_a: Option<Vec<f64>>,
    pub xi: Option<Vec<f64>>,
}

impl LimitData {
    pub fn from_oracle(inst: &dyn NsdpInstance, oracle: &Oracle) -> Result<Self> {
        let split = kkt::eigen_split(&inst.eval_g(&oracle.xstar), DEFAULT_RANK_TOL)?;
        Ok(LimitData {
            xstar: oracle.xstar.clone(),
            split,
            y_a: Some(oracle.y_a.clone()),
            z_a: Some(oracle.z_a.clone()),
            xi: Some(oracle.xi_star.clone()),
        })
    }

    /// Split at a user-supplied `x*`, with the analytic center and `ξ*`
    /// computed when the multiplier set admits them.
    pub fn numeric(inst: &dyn NsdpInstance, xstar: &[f64]) -> Result<Self> {
        crate::model::check_x(inst, xstar)?;
        let split = kkt::eigen_split(&inst.eval_g(xstar), DEFAULT_RANK_TOL)?;
        let center = analytic::analytic_center(inst, xstar, &split, None, &CenterOptions::default()).ok();
        let xi = center
            .as_ref()
            .and_then(|c| analytic::xi_star(inst, xstar, &split, c).ok())
            .map(|r| r.xi);
        Ok(LimitData {
            xstar: xstar.to_vec(),
            split,
            y_a: center.as_ref().map(|c| c.y_a.clone()),
            z_a: center.map(|c| c.z_a),
            xi,
        })
    }
}

/// One row of the trace table; `None` marks an unavailable quantity.
#[derive(Clone, Debug, PartialEq)]
pub struct TraceRow {
    pub step: usize,
    pub mu: f64,
    pub x: Vec<f64>,
    pub norm_d: Option<f64>,
    pub mu_over_normd: Option<f64>,
    pub dist_y_ya: Option<f64>,
    pub dist_z_za: Option<f64>,
    pub yef_over_mu: Option<f64>,
    pub yff_over_mu: Option<f64>,
    pub dir_err: Option<f64>,
    pub sigmin_a: Option<f64>,
    pub redform_mineig: Option<f64>,
    pub bkkt_res: Option<f64>,
    pub newton_iters: Option<usize>,
}

pub fn trace_rows(inst: &dyn NsdpInstance, trace: &PathTrace, limits: Option<&LimitData>) -> Vec<TraceRow> {
    trace
        .points
        .iter()
        .enumerate()
        .map(|(step, p)| {
            let mu = p.mu;
            let d = limits.map(|l| num::sub(&p.w.x, &l.xstar));
            let norm_d = d.as_ref().map(|d| num::norm2(d));
            let block = |b: Block| {
                limits
                    .and_then(|l| kkt::block_of(&p.w.y, &l.split, b).ok())
                    .map(|blk| blk.frob_norm() / mu)
            };
            TraceRow {
                step,
                mu,
                x: p.w.x.clone(),
                norm_d,
                mu_over_normd: norm_d.map(|nd| mu / nd),
                dist_y_ya: limits.and_then(|l| l.y_a.as_ref()).map(|ya| p.w.y.sub(ya).frob_norm()),
                dist_z_za: limits
                    .and_then(|l| l.z_a.as_ref())
                    .map(|za| num::norm2(&num::sub(&p.w.z, za))),
                yef_over_mu: block(Block::EF),
                yff_over_mu: block(Block::FF),
                dir_err: match (&d, limits.and_then(|l| l.xi.as_ref())) {
                    (Some(d), Some(xi)) => Some(direction_error(d, xi, mu)),
                    _ => None,
                },
                sigmin_a: Some(p.diagnostics.sigmin_a),
                redform_mineig: path::reduced_form_min_eig(inst, &p.w).ok(),
                bkkt_res: Some(p.diagnostics.bkkt_res),
                newton_iters: Some(p.diagnostics.newton_iters),
            }
        })
        .collect()
}

fn direction_error(d: &[f64], xi: &[f64], mu: f64) -> f64 {
    let v: Vec<f64> = d.iter().zip(xi).map(|(di, xi)| di / mu - xi).collect();
    num::norm2(&v)
}

// ---------------------------------------------------------------------------
// Helpers

/// Kendall's tau between the series and its index: `−1` for strictly
/// decreasing. Pairs closer than `tie` are ignored. Returns `None` when
/// every pair is tied.
pub fn kendall_tau_decreasing(series: &[f64], tie: f64) -> Option<f64> {
    let (mut conc, mut disc) = (0usize, 0usize);
    for i in 0..series.len() {
        for j in i + 1..series.len() {
            if series[j] < series[i] - tie {
                conc += 1;
            } else if series[j] > series[i] + tie {
                disc += 1;
            }
        }
    }
    let total = conc + disc;
    if total == 0 {
        None
    } else {
        Some((conc as f64 - disc as f64) / total as f64)
    }
}

fn at_or_below(mu: f64, cap: f64) -> bool {
    mu <= cap * (1.0 + 1e-9)
}

/// Index of the grid point closest to `target` in `log μ`.
fn nearest_index(trace: &PathTrace, target: f64) -> Option<usize> {
    let dist = |mu: f64| num::ln(mu / target).abs();
    (0..trace.points.len()).min_by(|&a, &b| {
        dist(trace.points[a].mu)
            .partial_cmp(&dist(trace.points[b].mu))
            .unwrap_or(core::cmp::Ordering::Equal)
    })
}

fn guarded(name: &str, f: impl FnOnce() -> Result<ExperimentRecord>) -> ExperimentRecord {
    f().unwrap_or_else(|e| ExperimentRecord::new(name, Some(false), Vec::new(), None, format!("error: {e}")))
}

fn fmt_e(v: f64) -> String {
    format!("{v:.3e}")
}

// ---------------------------------------------------------------------------
// Experiments

struct Ctx<'a> {
    b: &'a BuiltinInstance,
    trace: &'a PathTrace,
    rows: &'a [TraceRow],
    limits: &'a LimitData,
    opts: &'a VerifyOptions,
}

impl Ctx<'_> {
    fn inst(&self) -> &dyn NsdpInstance {
        &self.b.instance
    }

    fn asymptotic_rows(&self) -> impl Iterator<Item = &TraceRow> {
        self.rows.iter().filter(|r| at_or_below(r.mu, MU_REF))
    }
}

fn closed_form_path(c: &Ctx) -> Result<ExperimentRecord> {
    let name = "closed_form_path";
    let Some(path) = c.b.oracle.path else {
        return Ok(ExperimentRecord::skipped(name, "no closed-form path"));
    };
    let series: Vec<f64> = c
        .trace
        .points
        .iter()
        .map(|p| {
            let exact = path(p.mu).x;
            num::norm2(&num::sub(&p.w.x, &exact)) / num::norm2(&exact).max(1.0)
        })
        .collect();
    let worst = series.iter().copied().fold(0.0, f64::max);
    Ok(ExperimentRecord::new(
        name,
        Some(worst <= CLOSED_FORM_TOL),
        series,
        Some(CLOSED_FORM_TOL),
        format!("max relative error {}", fmt_e(worst)),
    ))
}

fn analytic_center_match(c: &Ctx) -> Result<(ExperimentRecord, AnalyticCenterResult)> {
    let last = c
        .trace
        .points
        .last()
        .ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
    let warm = kkt::block_of(&last.w.y, &c.limits.split, Block::EE)?;
    let warm = warm.sym_part();
    let center = analytic::analytic_center(
        c.inst(),
        &c.limits.xstar,
        &c.limits.split,
        Some(&warm),
        &CenterOptions::default(),
    )?;
    let o = &c.b.oracle;
    let dist = center.y_a.sub(&o.y_a).frob_norm() + num::norm2(&num::sub(&center.z_a, &o.z_a));
    let pass = dist <= CLOSED_FORM_TOL && center.cert_residual <= SOLVER_AGREEMENT_TOL;
    let rec = ExperimentRecord::new(
        "analytic_center",
        Some(pass),
        vec![dist, center.cert_residual],
        Some(CLOSED_FORM_TOL),
        format!(
            "distance to oracle {}, certificate residual {}",
            fmt_e(dist),
            fmt_e(center.cert_residual)
        ),
    );
    Ok((rec, center))
}

fn theta_ratio(c: &Ctx) -> Result<ExperimentRecord> {
    let series: Vec<f64> = c
        .asymptotic_rows()
        .map(|r| r.mu_over_normd.unwrap_or(f64::NAN))
        .collect();
    if series.is_empty() {
        return Ok(ExperimentRecord::skipped(
            "theta_ratio",
            "no grid point at or below the reference μ",
        ));
    }
    let max = series.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    let ratio = max / min;
    let pass = ratio.is_finite() && min > 0.0 && ratio <= RATIO_ENVELOPE;
    Ok(ExperimentRecord::new(
        "theta_ratio",
        Some(pass),
        series,
        Some(RATIO_ENVELOPE),
        format!("max/min {}", fmt_e(ratio)),
    ))
}

fn block_decay(c: &Ctx, name: &str, pick: fn(&TraceRow) -> Option<f64>) -> Result<ExperimentRecord> {
    let series: Vec<f64> = c.rows.iter().map(|r| pick(r).unwrap_or(f64::NAN)).collect();
    let iref = nearest_index(c.trace, MU_REF).ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
    let reference = series[iref];
    let envelope = RATIO_ENVELOPE * reference.max(1e-8);
    let worst = series.iter().copied().fold(0.0, f64::max);
    let pass = series.iter().all(|v| *v <= envelope);
    Ok(ExperimentRecord::new(
        name,
        Some(pass),
        series,
        Some(envelope),
        format!(
            "reference {} at μ={}, max {}",
            fmt_e(reference),
            c.trace.points[iref].mu,
            fmt_e(worst)
        ),
    ))
}

fn dual_center_distance(c: &Ctx) -> Result<ExperimentRecord> {
    let series: Vec<f64> = c
        .rows
        .iter()
        .map(|r| r.dist_y_ya.unwrap_or(f64::NAN) + r.dist_z_za.unwrap_or(0.0))
        .collect();
    let last = series.last().copied().unwrap_or(f64::NAN);
    let tau = kendall_tau_decreasing(&series, KENDALL_TIE);
    let trend = tau.is_none_or(|t| t >= KENDALL_MIN_TAU);
    Ok(ExperimentRecord::new(
        "dual_center_distance",
        Some(trend && last <= FINAL_TOL),
        series,
        Some(FINAL_TOL),
        match tau {
            Some(t) => format!("final {}, Kendall tau {t:.3}", fmt_e(last)),
            None => format!("final {}, all pairs tied", fmt_e(last)),
        },
    ))
}

fn direction_error_exp(c: &Ctx) -> Result<ExperimentRecord> {
    let series: Vec<f64> = c.rows.iter().map(|r| r.dir_err.unwrap_or(f64::NAN)).collect();
    let last = series.last().copied().unwrap_or(f64::NAN);
    Ok(ExperimentRecord::new(
        "direction_error",
        Some(last <= FINAL_TOL),
        series,
        Some(FINAL_TOL),
        format!("final {}", fmt_e(last)),
    ))
}

fn xi_star_solvers(c: &Ctx, center: &AnalyticCenterResult) -> Result<ExperimentRecord> {
    let r = analytic::xi_star(c.inst(), &c.limits.xstar, &c.limits.split, center)?;
    let oracle_gap = num::norm2(&num::sub(&r.xi, &c.b.oracle.xi_star));
    let series = vec![r.structured_vs_full, r.max_identity_residual(), oracle_gap];
    let pass = series.iter().all(|v| *v <= SOLVER_AGREEMENT_TOL);
    Ok(ExperimentRecord::new(
        "xi_star_solvers",
        Some(pass),
        series,
        Some(SOLVER_AGREEMENT_TOL),
        format!(
            "structured vs direct {}, identities {}, oracle gap {}",
            fmt_e(r.structured_vs_full),
            fmt_e(r.max_identity_residual()),
            fmt_e(oracle_gap)
        ),
    ))
}

fn newton_matrix_nonsingular(c: &Ctx) -> Result<ExperimentRecord> {
    let series: Vec<f64> = c.asymptotic_rows().map(|r| r.sigmin_a.unwrap_or(f64::NAN)).collect();
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExperimentRecord::new(
        "newton_matrix_nonsingular",
        Some(series.iter().all(|v| *v > 0.0)),
        series,
        Some(0.0),
        format!("min sigma_min {}", fmt_e(min)),
    ))
}

fn reduced_form_positive(c: &Ctx) -> Result<ExperimentRecord> {
    let series: Vec<f64> = c
        .asymptotic_rows()
        .map(|r| r.redform_mineig.unwrap_or(f64::NAN))
        .collect();
    let min = series.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(ExperimentRecord::new(
        "reduced_form_positive",
        Some(series.iter().all(|v| *v > 0.0)),
        series,
        Some(0.0),
        format!("min eigenvalue {}", fmt_e(min)),
    ))
}

fn limit_matrix_sigma_min(c: &Ctx) -> Result<ExperimentRecord> {
    let o = &c.b.oracle;
    let wa = PrimalDualTriplet::new(o.xstar.clone(), o.y_a.clone(), o.z_a.clone());
    let smin = path::assemble_a(c.inst(), &wa)?.sigma_min()?;
    let (pass, bound, what) = if o.expected.nc {
        (smin > NONSINGULAR_LIMIT_TOL, NONSINGULAR_LIMIT_TOL, "nonsingular")
    } else {
        (smin <= SINGULAR_LIMIT_TOL, SINGULAR_LIMIT_TOL, "singular")
    };
    Ok(ExperimentRecord::new(
        "limit_matrix_sigma_min",
        Some(pass),
        vec![smin],
        Some(bound),
        format!("sigma_min {} (expected {what})", fmt_e(smin)),
    ))
}

fn region_capture(c: &Ctx) -> Result<ExperimentRecord> {
    let xi = &c
        .limits
        .xi
        .clone()
        .ok_or_else(|| Error::InvalidArgument("no limiting direction".into()))?;
    let xin = num::norm2(xi);
    let mut series = Vec::new();
    let mut pass = true;
    for p in c.trace.points.iter().filter(|p| at_or_below(p.mu, MU_REGION)) {
        let gap: Vec<f64> = (0..xi.len())
            .map(|i| c.limits.xstar[i] + p.mu * xi[i] - p.w.x[i])
            .collect();
        series.push(num::norm2(&gap) / (p.mu * xin));
        pass &= path::in_region(&p.w.x, &c.limits.xstar, xi, c.opts.rho, p.mu)?;
    }
    if series.is_empty() {
        return Ok(ExperimentRecord::skipped(
            "region_capture",
            "no grid point at or below the region μ",
        ));
    }
    Ok(ExperimentRecord::new(
        "region_capture",
        Some(pass),
        series,
        Some(c.opts.rho),
        "relative distance to the first-order model",
    ))
}

fn uniqueness_probe(c: &Ctx) -> Result<ExperimentRecord> {
    let name = "uniqueness_probe";
    let target = c.opts.schedule.mu_min * 10.0;
    if target > c.opts.schedule.mu0 * (1.0 + 1e-9) {
        return Ok(ExperimentRecord::skipped(
            name,
            "schedule does not reach ten times its floor",
        ));
    }
    let idx = nearest_index(c.trace, target).ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
    let point = &c.trace.points[idx];
    let mu = point.mu;
    let xi = c
        .limits
        .xi
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("no limiting direction".into()))?;
    let n = xi.len();
    let center: Vec<f64> = (0..n).map(|i| c.limits.xstar[i] + mu * xi[i]).collect();
    let radius = 0.5 * c.opts.rho * mu * num::norm2(xi);
    let mut rng = Rng::seeded(c.opts.seed);
    // The barrier gradient has a rounding floor well above the default
    // absolute tolerance at small μ; the corrector finishes the job.
    let bopts = BarrierOptions {
        tol_abs: 1e-9,
        ..BarrierOptions::default()
    };
    let mut series = Vec::with_capacity(UNIQUENESS_STARTS);
    for _ in 0..UNIQUENESS_STARTS {
        let mut start = None;
        for _ in 0..200 {
            let u = rng.unit_vec(n);
            let r = radius * num::powf(rng.uniform(), 1.0 / n as f64);
            let x: Vec<f64> = (0..n).map(|i| center[i] + r * u[i]).collect();
            if symlin::chol_psd_test(&c.inst().eval_g(&x)) {
                start = Some(x);
                break;
            }
        }
        let start = start.ok_or_else(|| Error::Interiority {
            what: "no interior start found inside the tube".into(),
            min_eig: f64::NAN,
        })?;
        let sol = barrier::barrier_solve(c.inst(), mu, &start, &bopts)?;
        let lifted = barrier::lift_to_triplet(c.inst(), &sol.x, mu)?;
        let polished = path::pdipm_corrector(c.inst(), &lifted.w, mu, &CorrectorOptions::default())?;
        series.push(num::norm2(&num::sub(&polished.w.x, &point.w.x)));
    }
    let worst = series.iter().copied().fold(0.0, f64::max);
    Ok(ExperimentRecord::new(
        name,
        Some(worst <= UNIQUENESS_TOL),
        series,
        Some(UNIQUENESS_TOL),
        format!("μ={mu}, max distance to traced point {}", fmt_e(worst)),
    ))
}

fn manifold_probe(c: &Ctx) -> Result<ExperimentRecord> {
    let name = "manifold_probe";
    if c.inst().s() == 0 {
        return Ok(ExperimentRecord::new(
            name,
            Some(true),
            Vec::new(),
            Some(MANIFOLD_EXPONENT),
            "no equality constraints",
        ));
    }
    let xi = c
        .limits
        .xi
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("no limiting direction".into()))?;
    let mus: Vec<f64> = c.trace.points.iter().map(|p| p.mu).collect();
    let series: Vec<f64> = mus
        .iter()
        .map(|&mu| {
            let x: Vec<f64> = (0..xi.len()).map(|i| c.limits.xstar[i] + mu * xi[i]).collect();
            num::norm2(&c.inst().eval_h(&x))
        })
        .collect();
    // Values below this are indistinguishable from rounding in `h`.
    let floor = 1e-12;
    let resolved: Vec<(f64, f64)> = mus
        .iter()
        .copied()
        .zip(series.iter().copied())
        .filter(|(_, v)| *v > floor)
        .collect();
    let (pass, note) = match resolved.as_slice() {
        [(m1, v1), (m2, v2), ..] => {
            let exponent = num::ln(v1 / v2) / num::ln(m1 / m2);
            (exponent >= MANIFOLD_EXPONENT, format!("fitted exponent {exponent:.4}"))
        }
        _ => (true, "residual at rounding level on the whole grid".to_string()),
    };
    Ok(ExperimentRecord::new(
        name,
        Some(pass),
        series,
        Some(MANIFOLD_EXPONENT),
        note,
    ))
}

fn tangent_consistency(c: &Ctx) -> Result<ExperimentRecord> {
    let inst = c.inst();
    let idx = nearest_index(c.trace, MU_REF).ok_or_else(|| Error::InvalidArgument("empty trace".into()))?;
    let w = &c.trace.points[idx].w;
    let mu = c.trace.points[idx].mu;
    let t = path::tangent(inst, w)?;
    let tv = t.to_vec();
    let wv = w.to_vec();
    let (n, m, s) = (inst.n(), inst.m(), inst.s());
    let copts = CorrectorOptions::default();
    let mut errs = [0.0; 2];
    for (slot, delta) in errs.iter_mut().zip([mu / 10.0, mu / 20.0]) {
        let mut pv = wv.clone();
        num::axpy(-delta, &tv, &mut pv);
        let pred = PrimalDualTriplet::from_vec(&pv, n, m, s)?;
        let corr = path::pdipm_corrector(inst, &pred, mu - delta, &copts)?;
        *slot = num::norm2(&num::sub(&corr.w.to_vec(), &pv));
    }
    let ratio = errs[0] / errs[1];
    // On an affine path the predictor is exact and the ratio is rounding noise.
    let exact = errs[0] <= 1e-8 * (mu / 10.0) * num::norm2(&tv);
    let in_band = ratio >= TANGENT_RATIO.0 && ratio <= TANGENT_RATIO.1;
    let note = if exact {
        format!(
            "predictor exact to rounding (error {}); path is affine in μ",
            fmt_e(errs[0])
        )
    } else {
        format!("error ratio {ratio:.4} at μ={mu}")
    };
    Ok(ExperimentRecord::new(
        "tangent_consistency",
        Some(exact || in_band),
        vec![errs[0], errs[1], ratio],
        Some(TANGENT_RATIO.0),
        note,
    ))
}

fn tangent_xi_gap(c: &Ctx) -> Result<ExperimentRecord> {
    let xi = c
        .limits
        .xi
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("no limiting direction".into()))?;
    let series: Vec<f64> = c
        .trace
        .points
        .iter()
        .map(|p| {
            path::tangent(c.inst(), &p.w)
                .map(|t| num::norm2(&num::sub(&t.dx, xi)))
                .unwrap_or(f64::NAN)
        })
        .collect();
    Ok(ExperimentRecord::new(
        "tangent_xi_gap",
        None,
        series,
        None,
        "measured only: behaviour of the tangent as μ → 0 is not asserted",
    ))
}

/// Multipliers for the condition checks: the analytic center plus seeded
/// samples from the multiplier set.
pub fn multiplier_samples(
    inst: &dyn NsdpInstance,
    xstar: &[f64],
    split: &EigenSplit,
    center: &AnalyticCenterResult,
    count: usize,
    rng: &mut Rng,
) -> Result<Vec<(SymMat, Vec<f64>)>> {
    let mut out = vec![(center.y_a.clone(), center.z_a.clone())];
    let param = analytic::parametrize_multiplier_set(inst, xstar, split)?;
    if param.dim() == 0 {
        return Ok(out);
    }
    let ct = analytic::center_coordinates(&param, center)?;
    for _ in 0..count {
        out.push(analytic::sample_multiplier(&param, &ct, rng)?);
    }
    Ok(out)
}

/// Condition report at the oracle point with the oracle's MFCQ witness.
pub fn builtin_conditions(b: &BuiltinInstance, seed: u64) -> Result<ConditionReport> {
    let inst = &b.instance;
    let o = &b.oracle;
    let split = kkt::eigen_split(&crate::model::NsdpInstance::eval_g(inst, &o.xstar), DEFAULT_RANK_TOL)?;
    let center = analytic::analytic_center(inst, &o.xstar, &split, None, &CenterOptions::default())?;
    let mut rng = Rng::seeded(seed);
    let samples = multiplier_samples(inst, &o.xstar, &split, &center, 4, &mut rng)?;
    let opts = ConditionOptions {
        seed,
        mfcq_witness: o.mfcq_witness.clone(),
        ..ConditionOptions::default()
    };
    kkt::condition_report(inst, &o.xstar, &samples, &opts)
}

/// Whether a computed report agrees with the expected flags. MFCQ must be
/// confirmed, not merely undecided.
pub fn conditions_match(rep: &ConditionReport, expected: &ExpectedConditions) -> bool {
    rep.sc.holds == expected.sc
        && rep.nc.holds == expected.nc
        && rep.mfcq.holds == Some(expected.mfcq)
        && rep.ssosc.consistent == expected.ssosc
}

fn expected_conditions(c: &Ctx) -> Result<ExperimentRecord> {
    let rep = builtin_conditions(c.b, c.opts.seed)?;
    let e = &c.b.oracle.expected;
    let mfcq = match rep.mfcq.holds {
        Some(true) => "true",
        Some(false) => "false",
        None => "unknown",
    };
    Ok(ExperimentRecord::new(
        "expected_conditions",
        Some(conditions_match(&rep, e)),
        Vec::new(),
        None,
        format!(
            "sc {} nc {} mfcq {} ssosc {}",
            rep.sc.holds, rep.nc.holds, mfcq, rep.ssosc.consistent
        ),
    ))
}

// ---------------------------------------------------------------------------
// Driver

/// Trace options used by the verification runs.
pub fn verification_trace_options(b: &BuiltinInstance, schedule: Schedule) -> TraceOptions {
    TraceOptions {
        schedule,
        mode: TraceMode::Hybrid,
        xstar: Some(b.oracle.xstar.clone()),
        ..TraceOptions::default()
    }
}

pub fn run_verification(b: &BuiltinInstance, opts: &VerifyOptions) -> Result<VerificationReport> {
    opts.schedule.validate()?;
    if !(opts.rho > 0.0 && opts.rho < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "rho must lie in (0, 1), got {}",
            opts.rho
        )));
    }
    let inst = &b.instance;
    let trace = path::trace_path(inst, &b.x0, &verification_trace_options(b, opts.schedule))?;
    let limits = LimitData::from_oracle(inst, &b.oracle)?;
    let rows = trace_rows(inst, &trace, Some(&limits));
    let c = Ctx {
        b,
        trace: &trace,
        rows: &rows,
        limits: &limits,
        opts,
    };

    let mut experiments = Vec::new();
    experiments.push(guarded("closed_form_path", || closed_form_path(&c)));
    let center = match analytic_center_match(&c) {
        Ok((rec, center)) => {
            experiments.push(rec);
            Some(center)
        }
        Err(e) => {
            experiments.push(ExperimentRecord::new(
                "analytic_center",
                Some(false),
                Vec::new(),
                None,
                format!("error: {e}"),
            ));
            None
        }
    };
    experiments.push(guarded("dual_center_distance", || dual_center_distance(&c)));
    experiments.push(guarded("theta_ratio", || theta_ratio(&c)));
    experiments.push(guarded("block_decay_ef", || {
        block_decay(&c, "block_decay_ef", |r| r.yef_over_mu)
    }));
    experiments.push(guarded("block_decay_ff", || {
        block_decay(&c, "block_decay_ff", |r| r.yff_over_mu)
    }));
    experiments.push(guarded("direction_error", || direction_error_exp(&c)));
    experiments.push(match &center {
        Some(center) => guarded("xi_star_solvers", || xi_star_solvers(&c, center)),
        None => ExperimentRecord::skipped("xi_star_solvers", "analytic center unavailable"),
    });
    experiments.push(guarded("newton_matrix_nonsingular", || newton_matrix_nonsingular(&c)));
    experiments.push(guarded("reduced_form_positive", || reduced_form_positive(&c)));
    experiments.push(guarded("limit_matrix_sigma_min", || limit_matrix_sigma_min(&c)));
    experiments.push(guarded("tangent_consistency", || tangent_consistency(&c)));
    experiments.push(guarded("region_capture", || region_capture(&c)));
    experiments.push(guarded("uniqueness_probe", || uniqueness_probe(&c)));
    experiments.push(guarded("manifold_probe", || manifold_probe(&c)));
    experiments.push(guarded("expected_conditions", || expected_conditions(&c)));
    experiments.push(guarded("tangent_xi_gap", || tangent_xi_gap(&c)));

    let overall = experiments.iter().all(|e| e.pass != Some(false));
    Ok(VerificationReport {
        instance: b.name.clone(),
        schedule: opts.schedule,
        rho: opts.rho,
        seed: opts.seed,
        experiments,
        overall,
        trace,
    })
}

pub fn run_verification_by_name(name: &str, opts: &VerifyOptions) -> Result<VerificationReport> {
    run_verification(&builtin_instance(name)?, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn kendall_examples() {
        assert_eq!(kendall_tau_decreasing(&[3.0, 2.0, 1.0], 1e-10), Some(1.0));
        assert_eq!(kendall_tau_decreasing(&[1.0, 2.0, 3.0], 1e-10), Some(-1.0));
        assert_eq!(kendall_tau_decreasing(&[1.0, 1.0, 1.0], 1e-10), None);
    }

    #[test]
    fn twin_rows() {
        let b = builtin_instance("deg-twin").unwrap();
        let opts = verification_trace_options(&b, Schedule::default());
        let trace = path::trace_path(&b.instance, &b.x0, &opts).unwrap();
        let limits = LimitData::from_oracle(&b.instance, &b.oracle).unwrap();
        let rows = trace_rows(&b.instance, &trace, Some(&limits));
        assert_eq!(rows.len(), 7);
        for r in &rows {
            assert!((r.mu_over_normd.unwrap() - 0.5).abs() < 1e-9);
            assert!(r.dir_err.unwrap() < 1e-8);
        }
    }
}
