//! Acceptance suite: one `[PASS]`/`[FAIL]` line per criterion.

use std::time::Instant;

use cpath_core::analytic::{self, CenterOptions};
use cpath_core::kkt::{self, Block, EigenSplit};
use cpath_core::lab::{self, BuiltinInstance, VerificationReport, VerifyOptions};
use cpath_core::model;
use cpath_core::path::{self, PathTrace, Schedule};
use cpath_core::rng::Rng;
use cpath_core::symlin::{self, Mat, SymMat, DEFAULT_RANK_TOL};
use cpath_core::{num, NsdpInstance, PrimalDualTriplet};

type Outcome = Result<(bool, String), String>;

const DEGENERATE: [&str; 5] = ["deg-twin", "deg-cross", "deg-mixed", "deg-curve", "rand-qmi"];

struct Run {
    b: BuiltinInstance,
    trace: PathTrace,
    report: VerificationReport,
}

fn err(e: impl std::fmt::Display) -> String {
    e.to_string()
}

fn runs() -> Result<Vec<Run>, String> {
    lab::REGISTRY
        .iter()
        .map(|name| {
            let b = lab::builtin_instance(name).map_err(err)?;
            let opts = lab::verification_trace_options(&b, Schedule::default());
            let trace = path::trace_path(&b.instance, &b.x0, &opts).map_err(err)?;
            let report = lab::run_verification(&b, &VerifyOptions::default()).map_err(err)?;
            Ok(Run { b, trace, report })
        })
        .collect()
}

fn find<'a>(runs: &'a [Run], name: &str) -> &'a Run {
    runs.iter()
        .find(|r| r.b.name == name || r.b.name.starts_with(&format!("{name}:")))
        .unwrap()
}

fn split_of(b: &BuiltinInstance) -> Result<EigenSplit, String> {
    kkt::eigen_split(&b.instance.eval_g(&b.oracle.xstar), DEFAULT_RANK_TOL).map_err(err)
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    num::norm2(&num::sub(a, b))
}

fn experiment_pass(r: &Run, name: &str) -> Result<bool, String> {
    let e = r
        .report
        .experiment(name)
        .ok_or_else(|| format!("{} has no {name}", r.b.name))?;
    Ok(e.pass == Some(true))
}

fn c1_closed_form() -> Outcome {
    let mut worst = 0.0f64;
    let mut slowest = 0.0f64;
    for name in ["deg-twin", "deg-cross", "deg-mixed", "nondeg-control"] {
        let start = Instant::now();
        let b = lab::builtin_instance(name).map_err(err)?;
        let trace = path::trace_path(
            &b.instance,
            &b.x0,
            &lab::verification_trace_options(&b, Schedule::default()),
        )
        .map_err(err)?;
        slowest = slowest.max(start.elapsed().as_secs_f64());
        let closed = b.oracle.path.ok_or("missing closed form")?;
        if trace.points.len() != 7 {
            return Ok((false, format!("{name}: {} grid points", trace.points.len())));
        }
        for p in &trace.points {
            let x = &p.w.x;
            worst = worst.max(dist(x, &closed(p.mu).x) / num::norm2(x).max(1.0));
        }
    }
    Ok((
        worst <= 1e-8 && slowest < 10.0,
        format!("max scaled error {worst:.2e} (tol 1e-8), slowest instance {slowest:.2}s"),
    ))
}

fn c2_analytic_center() -> Outcome {
    let opts = CenterOptions::default();
    let (mut value, mut cert, mut warm) = (0.0f64, 0.0f64, 0.0f64);
    for (name, want) in [
        ("deg-twin", SymMat::diag(&[0.5, 0.5])),
        ("deg-cross", SymMat::diag(&[0.5, 0.5])),
        ("deg-mixed", SymMat::diag(&[0.5, 0.5, 0.0])),
    ] {
        let b = lab::builtin_instance(name).map_err(err)?;
        let split = split_of(&b)?;
        let c = analytic::analytic_center(&b.instance, &b.oracle.xstar, &split, None, &opts).map_err(err)?;
        value = value.max(c.y_a.sub(&want).frob_norm()).max(num::norm2(&c.z_a));
        cert = cert.max(c.cert_residual);
        let k = split.null_dim();
        let mut rng = Rng::seeded(2718);
        for _ in 0..10 {
            let m = Mat::from_fn(k, k, |_, _| rng.normal());
            let mut w0 = SymMat::from_mat_unchecked(m.matmul(&m.transpose()));
            w0.add_scaled_identity(0.05);
            let cw = analytic::analytic_center(&b.instance, &b.oracle.xstar, &split, Some(&w0), &opts).map_err(err)?;
            warm = warm.max(cw.y_a.sub(&c.y_a).frob_norm());
        }
    }
    Ok((
        value <= 1e-8 && cert <= 1e-9 && warm <= 1e-9,
        format!("value error {value:.2e} (1e-8), certificate {cert:.2e} (1e-9), warm-start spread {warm:.2e} (1e-9)"),
    ))
}

fn c3_dual_convergence(runs: &[Run]) -> Outcome {
    let mut worst = 0.0f64;
    let mut trend = true;
    for name in DEGENERATE {
        let r = find(runs, name);
        let last = r.trace.points.last().ok_or("empty trace")?;
        let d = last.w.y.sub(&r.b.oracle.y_a).frob_norm() + dist(&last.w.z, &r.b.oracle.z_a);
        worst = worst.max(d);
        trend &= experiment_pass(r, "dual_center_distance")?;
    }
    Ok((
        worst <= 1e-4 && trend,
        format!("max distance at μ=1e-7 {worst:.2e} (1e-4), decreasing trend {trend}"),
    ))
}

fn c4_theta_ratio(runs: &[Run]) -> Outcome {
    let mut worst = 0.0f64;
    let mut twin = 0.0f64;
    for r in runs {
        let vals: Vec<f64> = r
            .trace
            .points
            .iter()
            .filter(|p| p.mu <= lab::MU_REF * (1.0 + 1e-9))
            .map(|p| p.mu / dist(&p.w.x, &r.b.oracle.xstar))
            .collect();
        let hi = vals.iter().cloned().fold(f64::MIN, f64::max);
        let lo = vals.iter().cloned().fold(f64::MAX, f64::min);
        worst = worst.max(hi / lo);
        if r.b.name == "deg-twin" {
            twin = vals.iter().map(|v| (v - 0.5).abs()).fold(0.0, f64::max);
        }
    }
    Ok((
        worst <= 10.0 && twin <= 1e-9,
        format!("max max/min {worst:.4} (10), deg-twin deviation from 1/2 {twin:.2e} (1e-9)"),
    ))
}

fn c5_block_decay(runs: &[Run]) -> Outcome {
    let mut envelopes = true;
    for r in runs {
        envelopes &= experiment_pass(r, "block_decay_ef")? && experiment_pass(r, "block_decay_ff")?;
    }
    let r = find(runs, "deg-mixed");
    let split = split_of(&r.b)?;
    let mut dev = 0.0f64;
    for p in &r.trace.points {
        let ff = kkt::block_of(&p.w.y, &split, Block::FF).map_err(err)?;
        dev = dev.max((ff.frob_norm() / p.mu - 1.0).abs());
    }
    Ok((
        envelopes && dev <= 1e-6,
        format!("factor-10 envelopes hold on all builtins: {envelopes}; deg-mixed |‖Y^FF‖/μ − 1| {dev:.2e} (1e-6)"),
    ))
}

fn c6_direction(runs: &[Run]) -> Outcome {
    let (mut direction, mut solvers, mut identities) = (0.0f64, 0.0f64, 0.0f64);
    for r in runs {
        let last = r.trace.points.last().ok_or("empty trace")?;
        let scaled: Vec<f64> = num::sub(&last.w.x, &r.b.oracle.xstar)
            .iter()
            .map(|v| v / last.mu)
            .collect();
        direction = direction.max(dist(&scaled, &r.b.oracle.xi_star));
        let split = split_of(&r.b)?;
        let c = analytic::analytic_center(
            &r.b.instance,
            &r.b.oracle.xstar,
            &split,
            None,
            &CenterOptions::default(),
        )
        .map_err(err)?;
        let xi = analytic::xi_star(&r.b.instance, &r.b.oracle.xstar, &split, &c).map_err(err)?;
        solvers = solvers.max(xi.structured_vs_full);
        identities = identities.max(xi.max_identity_residual());
    }
    Ok((
        direction <= 1e-4 && solvers <= 1e-9 && identities <= 1e-9,
        format!(
            "‖(x−x*)/μ − ξ*‖ at μ=1e-7 {direction:.2e} (1e-4), solver gap {solvers:.2e} (1e-9), identities {identities:.2e} (1e-9)"
        ),
    ))
}

fn c7_newton_regime(runs: &[Run]) -> Outcome {
    let (mut path_min, mut form_min) = (f64::INFINITY, f64::INFINITY);
    let (mut singular_max, mut regular_min) = (0.0f64, f64::INFINITY);
    for r in runs {
        for p in r.trace.points.iter().filter(|p| p.mu <= lab::MU_REF * (1.0 + 1e-9)) {
            path_min = path_min.min(
                path::assemble_a(&r.b.instance, &p.w)
                    .map_err(err)?
                    .sigma_min()
                    .map_err(err)?,
            );
            form_min = form_min.min(path::reduced_form_min_eig(&r.b.instance, &p.w).map_err(err)?);
        }
        let o = &r.b.oracle;
        let wa = PrimalDualTriplet::new(o.xstar.clone(), o.y_a.clone(), o.z_a.clone());
        let smin = path::assemble_a(&r.b.instance, &wa)
            .map_err(err)?
            .sigma_min()
            .map_err(err)?;
        if o.expected.nc {
            regular_min = regular_min.min(smin);
        } else {
            singular_max = singular_max.max(smin);
        }
    }
    Ok((
        path_min > 0.0 && form_min > 0.0 && singular_max <= 1e-10 && regular_min > 1e-6,
        format!(
            "path σ_min ≥ {path_min:.2e}, reduced form ≥ {form_min:.2e}, limit σ_min NC-false ≤ {singular_max:.2e} (1e-10), nondeg-control {regular_min:.2e} (>1e-6)"
        ),
    ))
}

fn c8_tangent(runs: &[Run]) -> Outcome {
    let mut pass = true;
    let mut parts = Vec::new();
    for r in runs {
        let e = r
            .report
            .experiment("tangent_consistency")
            .ok_or("missing tangent_consistency")?;
        pass &= e.pass == Some(true);
        let ratio = e.series.get(2).copied().unwrap_or(f64::NAN);
        if e.note.starts_with("predictor exact") {
            parts.push(format!("{} exact", r.b.name));
        } else {
            parts.push(format!("{} {ratio:.3}", r.b.name));
        }
    }
    let twin = find(runs, "deg-twin");
    let mut twin_err = 0.0f64;
    for p in &twin.trace.points {
        let t = path::tangent(&twin.b.instance, &p.w).map_err(err)?;
        twin_err = twin_err.max((t.dx[0] - 2.0).abs()).max(t.dy.frob_norm());
    }
    Ok((
        pass && twin_err <= 1e-10,
        format!(
            "error ratio in [2.5, 6] or predictor exact: {}; deg-twin tangent error {twin_err:.2e} (1e-10)",
            parts.join(", ")
        ),
    ))
}

fn c9_uniqueness(runs: &[Run]) -> Outcome {
    let mut worst = 0.0f64;
    let mut pass = true;
    for r in runs {
        let e = r
            .report
            .experiment("uniqueness_probe")
            .ok_or("missing uniqueness_probe")?;
        pass &= e.pass == Some(true) && e.series.len() == lab::UNIQUENESS_STARTS;
        worst = e.series.iter().cloned().fold(worst, f64::max);
    }
    Ok((
        pass && worst <= 1e-8,
        format!(
            "{} starts per builtin, max distance {worst:.2e} (1e-8)",
            lab::UNIQUENESS_STARTS
        ),
    ))
}

fn c10_sigma() -> Outcome {
    let (mut worst, mut neg) = (0.0f64, 0.0f64);
    let mut configs = 0;
    for seed in 0..50u64 {
        for k in [2, 3] {
            let b = lab::rand_qmi(seed, k).map_err(err)?;
            let split = split_of(&b)?;
            let mut rng = Rng::seeded(31 * seed + k as u64);
            let nk = split.null_dim();
            let f = Mat::from_fn(nk, nk, |_, _| rng.normal());
            let y = SymMat::from_mat_unchecked(f.matmul(&f.transpose())).congruence_t(&split.estar);
            let d = rng.normal_vec(b.instance.n());
            let q = kkt::sigma_quad(&b.instance, &b.oracle.xstar, &y, &split, &d).map_err(err)?;
            worst = worst.max(q.max_rel_disagreement());
            let omega = kkt::sigma_term(&b.instance, &b.oracle.xstar, &y, &split).map_err(err)?;
            neg = neg.max(-omega.min_eig().map_err(err)?);
            configs += 1;
        }
    }
    Ok((
        worst <= 1e-10 && neg <= 1e-10,
        format!(
            "{configs} configurations, max relative disagreement {worst:.2e} (1e-10), min eig(Ω) ≥ {:.2e}",
            -neg
        ),
    ))
}

fn c11_substrate() -> Outcome {
    let start = Instant::now();
    let mut rng = Rng::seeded(11);
    let (mut lyap, mut eig, mut penrose, mut iso) = (0.0f64, 0.0f64, 0.0f64, 0.0f64);
    let rel = |a: &Mat, b: &Mat| a.sub(b).frob_norm() / b.frob_norm().max(1.0);
    for case in 0..1000 {
        let m = 1 + case % 8;
        let f = Mat::from_fn(m, m, |_, _| rng.normal());
        let mut x = SymMat::from_mat_unchecked(f.matmul(&f.transpose()));
        x.add_scaled_identity(0.1);
        let v = rng.sym(m);
        let back = symlin::lyap_solve(&x, &symlin::lyap_apply(&x, &v).map_err(err)?).map_err(err)?;
        lyap = lyap.max(back.sub(&v).frob_norm() / v.frob_norm().max(1.0));

        let s = rng.sym(m);
        let ed = symlin::eigh_ascending(&s).map_err(err)?;
        eig = eig.max(rel(ed.reconstruct().as_mat(), s.as_mat()));

        let rank = 1 + case % m;
        let q = rng.orthogonal(m);
        let lam: Vec<f64> = (0..m)
            .map(|i| if i < rank { rng.range(0.5, 2.0) } else { 0.0 })
            .collect();
        let p = SymMat::diag(&lam).congruence_t(&q);
        let pp = symlin::pinv_psd(&p, 1e-10).map_err(err)?;
        let (a, ap) = (p.as_mat(), pp.as_mat());
        let (aap, apa) = (a.matmul(ap), ap.matmul(a));
        penrose = penrose
            .max(rel(&aap.matmul(a), a))
            .max(rel(&apa.matmul(ap), ap))
            .max(aap.asymmetry())
            .max(apa.asymmetry());

        let y = rng.sym(m);
        let sv: f64 = symlin::svec(&s).iter().zip(symlin::svec(&y)).map(|(p, q)| p * q).sum();
        iso = iso.max((s.dot(&y) - sv).abs() / (1.0 + s.frob_norm() * y.frob_norm()));
    }
    let secs = start.elapsed().as_secs_f64();
    Ok((
        lyap <= 1e-11 && eig <= 1e-10 && penrose <= 1e-9 && iso <= 1e-12 && secs < 5.0,
        format!(
            "1000 cases: lyapunov {lyap:.2e} (1e-11), eigh {eig:.2e} (1e-10), penrose {penrose:.2e} (1e-9), svec {iso:.2e} (1e-12), {secs:.2}s"
        ),
    ))
}

fn c12_conditions() -> Outcome {
    let mut bad = Vec::new();
    for name in lab::REGISTRY {
        let b = lab::builtin_instance(name).map_err(err)?;
        let rep = lab::builtin_conditions(&b, 42).map_err(err)?;
        let degenerate = DEGENERATE.contains(&name);
        let expected_nc = !degenerate;
        let all_true = rep.sc.holds && rep.mfcq.holds == Some(true) && rep.ssosc.consistent;
        if !lab::conditions_match(&rep, &b.oracle.expected) || rep.nc.holds != expected_nc || !all_true {
            bad.push(name);
        }
    }
    Ok((
        bad.is_empty(),
        if bad.is_empty() {
            "all builtins match (NC false on deg-*, true on nondeg-control; SC, MFCQ, SSOSC true)".into()
        } else {
            format!("mismatch on {}", bad.join(", "))
        },
    ))
}

fn c13_derivatives() -> Outcome {
    let mut worst = 0.0f64;
    let mut count = 0;
    let mut check = |inst: &dyn NsdpInstance, x: &[f64]| -> Result<bool, String> {
        let rep = model::fd_check(inst, x, model::FD_STEP, model::FD_TOL).map_err(err)?;
        worst = rep.entries.iter().map(|e| e.max_error).fold(worst, f64::max);
        count += 1;
        Ok(rep.pass())
    };
    let mut pass = true;
    for name in lab::REGISTRY {
        let b = lab::builtin_instance(name).map_err(err)?;
        pass &= check(&b.instance, &b.x0)?;
    }
    for seed in 0..20u64 {
        let b = lab::rand_qmi(1000 + seed, 2 + (seed % 3) as usize).map_err(err)?;
        let x = Rng::seeded(seed).normal_vec(b.instance.n());
        pass &= check(&b.instance, &x)?;
    }
    Ok((
        pass,
        format!("{count} instances, max relative error {worst:.2e} (1e-5)"),
    ))
}

fn main() {
    let shared = runs();
    let with_runs = |f: fn(&[Run]) -> Outcome| -> Outcome {
        match &shared {
            Ok(r) => f(r),
            Err(e) => Err(format!("verification runs failed: {e}")),
        }
    };
    let results: Vec<(&str, Outcome)> = vec![
        ("C1 closed-form path", c1_closed_form()),
        ("C2 analytic center", c2_analytic_center()),
        ("C3 dual convergence", with_runs(c3_dual_convergence)),
        ("C4 theta ratio", with_runs(c4_theta_ratio)),
        ("C5 block decay", with_runs(c5_block_decay)),
        ("C6 limiting direction", with_runs(c6_direction)),
        ("C7 Newton-matrix regime", with_runs(c7_newton_regime)),
        ("C8 tangent consistency", with_runs(c8_tangent)),
        ("C9 uniqueness probe", with_runs(c9_uniqueness)),
        ("C10 sigma-term formula", c10_sigma()),
        ("C11 linear-algebra substrate", c11_substrate()),
        ("C12 condition checkers", c12_conditions()),
        ("C13 derivative oracles", c13_derivatives()),
    ];
    let mut failed = 0;
    for (label, outcome) in results {
        let (ok, detail) = outcome.unwrap_or_else(|e| (false, format!("error: {e}")));
        if !ok {
            failed += 1;
        }
        println!("[{}] {label}: {detail}", if ok { "PASS" } else { "FAIL" });
    }
    println!("{} of 13 criteria passed", 13 - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
