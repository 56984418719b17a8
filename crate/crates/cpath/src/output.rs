//! Trace CSV, report JSON and the plain-text summaries printed by the CLI.

use std::fmt::Write as _;

use cpath_core::analytic::{AnalyticCenterResult, XiStarResult};
use cpath_core::kkt::ConditionReport;
use cpath_core::lab::{TraceRow, VerificationReport};
use cpath_core::model::FdReport;
use cpath_core::path::PointSolver;
use cpath_core::SymMat;
use serde_json::{json, Value};

/// Shortest round-trip decimal; `inf`/`-inf` for infinities, empty for NaN.
pub fn fmt_f64(v: f64) -> String {
    if v.is_finite() {
        ryu::Buffer::new().format_finite(v).to_string()
    } else if v.is_nan() {
        String::new()
    } else if v > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(fmt_f64).unwrap_or_default()
}

pub fn trace_csv_header(n: usize) -> String {
    let mut cols = vec!["step".to_string(), "mu".to_string()];
    cols.extend((0..n).map(|i| format!("x_{i}")));
    cols.extend(
        [
            "norm_d",
            "mu_over_normd",
            "dist_Y_Ya",
            "dist_z_za",
            "yEF_over_mu",
            "yFF_over_mu",
            "dir_err",
            "sigmin_A",
            "redform_mineig",
            "bkkt_res",
            "newton_iters",
        ]
        .map(String::from),
    );
    cols.join(",")
}

pub fn trace_csv(rows: &[TraceRow], n: usize) -> String {
    let mut out = trace_csv_header(n);
    out.push('\n');
    for r in rows {
        let mut cols = vec![r.step.to_string(), fmt_f64(r.mu)];
        cols.extend(r.x.iter().map(|v| fmt_f64(*v)));
        cols.extend([
            opt(r.norm_d),
            opt(r.mu_over_normd),
            opt(r.dist_y_ya),
            opt(r.dist_z_za),
            opt(r.yef_over_mu),
            opt(r.yff_over_mu),
            opt(r.dir_err),
            opt(r.sigmin_a),
            opt(r.redform_mineig),
            opt(r.bkkt_res),
            r.newton_iters.map(|k| k.to_string()).unwrap_or_default(),
        ]);
        out.push_str(&cols.join(","));
        out.push('\n');
    }
    out
}

/// Non-finite numbers become `null`.
pub fn report_value(rep: &VerificationReport) -> Value {
    let experiments: Vec<Value> = rep
        .experiments
        .iter()
        .map(|e| {
            json!({
                "name": e.name,
                "pass": e.pass,
                "series": e.series,
                "bound": e.bound,
                "note": e.note,
            })
        })
        .collect();
    let solvers: Vec<&str> = rep
        .trace
        .points
        .iter()
        .map(|p| match p.diagnostics.solver {
            PointSolver::Barrier => "barrier",
            PointSolver::Corrector => "corrector",
        })
        .collect();
    json!({
        "instance": rep.instance,
        "schedule": {
            "mu0": rep.schedule.mu0,
            "sigma": rep.schedule.sigma,
            "mu_min": rep.schedule.mu_min,
        },
        "rho": rep.rho,
        "seed": rep.seed,
        "experiments": experiments,
        "overall": rep.overall,
        "trace": {
            "mode": rep.trace.mode.as_str(),
            "mu": rep.trace.points.iter().map(|p| p.mu).collect::<Vec<_>>(),
            "solver": solvers,
        },
    })
}

pub fn report_json(rep: &VerificationReport) -> String {
    let mut s = serde_json::to_string_pretty(&report_value(rep)).expect("JSON values serialize");
    s.push('\n');
    s
}

/// One line per experiment.
pub fn render_report_summary(rep: &VerificationReport) -> String {
    let mut out = String::new();
    for e in &rep.experiments {
        let tag = match e.pass {
            Some(true) => "PASS",
            Some(false) => "FAIL",
            None => "----",
        };
        let _ = writeln!(out, "[{tag}] {}: {}", e.name, e.note);
    }
    let _ = writeln!(
        out,
        "{}: overall {}",
        rep.instance,
        if rep.overall { "PASS" } else { "FAIL" }
    );
    out
}

pub fn render_fd(label: &str, rep: &FdReport) -> String {
    let mut out = String::new();
    for e in &rep.entries {
        let _ = writeln!(
            out,
            "{label} {:<16} max_rel_err {:<24} {}",
            e.oracle,
            fmt_f64(e.max_error),
            if e.pass { "ok" } else { "FAIL" }
        );
    }
    out
}

fn render_vec(v: &[f64]) -> String {
    let parts: Vec<String> = v.iter().map(|x| fmt_f64(*x)).collect();
    format!("[{}]", parts.join(", "))
}

fn render_sym(name: &str, y: &SymMat) -> String {
    let mut out = format!("{name} =\n");
    let m = y.as_mat();
    for i in 0..m.rows() {
        let _ = writeln!(out, "  {}", render_vec(m.row(i)));
    }
    out
}

pub fn render_conditions(rep: &ConditionReport) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "SC     {}  (rank G* = {}, rank Y = {}, min eig(G*+Y) = {})",
        rep.sc.holds,
        rep.sc.rank_g,
        rep.sc.rank_y,
        fmt_f64(rep.sc.min_eig_sum)
    );
    let _ = writeln!(
        out,
        "NC     {}  (rank {} of {} required)",
        rep.nc.holds, rep.nc.rank, rep.nc.required
    );
    let mfcq = match rep.mfcq.holds {
        Some(true) => "true",
        Some(false) => "false",
        None => "unknown",
    };
    let _ = writeln!(
        out,
        "MFCQ   {mfcq}  (Jacobian full rank {}, witness min eig {})",
        rep.mfcq.jac_full_rank,
        fmt_f64(rep.mfcq.witness_min_eig)
    );
    let subspace: Vec<String> = rep
        .ssosc
        .subspace_min_eig
        .iter()
        .map(|v| v.map(fmt_f64).unwrap_or_else(|| "trivial".into()))
        .collect();
    let _ = writeln!(
        out,
        "SSOSC  {}  (consistent over {} multipliers; subspace min eig [{}]; cone samples {} accepted, min {})",
        rep.ssosc.consistent,
        rep.ssosc.multipliers_tested,
        subspace.join(", "),
        rep.ssosc.cone_samples_accepted,
        opt(rep.ssosc.cone_samples_min)
    );
    out
}

pub fn render_center(c: &AnalyticCenterResult) -> String {
    let mut out = render_sym("Y_a", &c.y_a);
    let _ = writeln!(out, "z_a = {}", render_vec(&c.z_a));
    let _ = writeln!(out, "log det Y_a^EE = {}", fmt_f64(c.logdet));
    let _ = writeln!(out, "certificate residual = {}", fmt_f64(c.cert_residual));
    let _ = writeln!(
        out,
        "newton iterations = {}, decrement = {}",
        c.newton_iterations,
        fmt_f64(c.decrement)
    );
    out
}

pub fn render_xistar(r: &XiStarResult) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "xi* = {}", render_vec(&r.xi));
    let _ = writeln!(out, "dim U* = {}", r.p_star);
    let _ = writeln!(out, "structured vs direct = {}", fmt_f64(r.structured_vs_full));
    let _ = writeln!(out, "direct residual = {}", fmt_f64(r.residual_full));
    let _ = writeln!(out, "identity FF = {}", fmt_f64(r.identity_ff));
    let _ = writeln!(out, "identity EE = {}", fmt_f64(r.identity_ee));
    let _ = writeln!(out, "identity EF = {}", fmt_f64(r.identity_ef));
    out
}
