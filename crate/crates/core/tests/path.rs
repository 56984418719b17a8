use cpath_core::analytic::{self, CenterOptions};
use cpath_core::barrier::{self, BarrierOptions};
use cpath_core::kkt::{self, ComplementarityForm};
use cpath_core::lab::{self, BuiltinInstance, VerifyOptions};
use cpath_core::path::{self, Schedule, TraceMode, TraceOptions};
use cpath_core::rng::Rng;
use cpath_core::symlin::{Mat, SymMat, DEFAULT_RANK_TOL};
use cpath_core::{num, Error, NsdpInstance, PrimalDualTriplet};
use proptest::prelude::*;

fn builtin(name: &str) -> BuiltinInstance {
    lab::builtin_instance(name).unwrap()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    num::norm2(&num::sub(a, b))
}

#[test]
fn barrier_solutions_match_hand_values() {
    let cases: [(&str, f64, &[f64], &[f64]); 3] = [
        ("deg-twin", 0.1, &[1.0], &[0.2]),
        ("deg-mixed", 0.01, &[1.0, 0.0, 0.0], &[0.02, 0.0, 0.0]),
        ("nondeg-control", 1.0, &[2.0, 0.0, 2.0], &[1.0, 0.0, 1.0]),
    ];
    for (name, mu, x0, want) in cases {
        let b = builtin(name);
        let r = barrier::barrier_solve(&b.instance, mu, x0, &BarrierOptions::default()).unwrap();
        assert!(dist(&r.x, want) <= 1e-9, "{name}: {:?}", r.x);
        let lifted = barrier::lift_to_triplet(&b.instance, &r.x, mu).unwrap();
        let res = kkt::bkkt_residual(&b.instance, &lifted.w, mu, ComplementarityForm::Symmetric).unwrap();
        assert!(res.max() <= 1e-9, "{name}: {res:?}");
    }
}

#[test]
fn barrier_rejects_exterior_start() {
    let b = builtin("deg-twin");
    let err = barrier::barrier_solve(&b.instance, 0.1, &[-1.0], &BarrierOptions::default());
    assert!(err.is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    #[test]
    fn twin_barrier_point_is_independent_of_start(x0 in 0.01f64..10.0, e in 1i32..7) {
        let mu = 10f64.powi(-e);
        let b = builtin("deg-twin");
        let r = barrier::barrier_solve(&b.instance, mu, &[x0], &BarrierOptions::default()).unwrap();
        prop_assert!((r.x[0] - 2.0 * mu).abs() <= 1e-9, "{:e}", r.x[0] - 2.0 * mu);
    }

    #[test]
    fn closed_form_paths_satisfy_bkkt(e in 1.0f64..7.0) {
        let mu = 10f64.powf(-e);
        for name in ["deg-twin", "deg-cross", "deg-mixed", "nondeg-control", "deg-curve"] {
            let b = builtin(name);
            let w = (b.oracle.path.unwrap())(mu);
            let res = kkt::bkkt_residual(&b.instance, &w, mu, ComplementarityForm::Symmetric).unwrap();
            prop_assert!(res.max() <= 1e-12, "{} {:?}", name, res);
        }
    }
}

#[test]
fn twin_tangent_is_exact() {
    let b = builtin("deg-twin");
    for mu in [1e-1, 1e-4, 1e-7] {
        let t = path::tangent(&b.instance, &(b.oracle.path.unwrap())(mu)).unwrap();
        assert!((t.dx[0] - 2.0).abs() <= 1e-10);
        assert!(t.dy.frob_norm() <= 1e-10);
    }
}

#[test]
fn tangent_matches_path_difference() {
    // Central difference of the closed-form path against the tangent solve.
    let b = builtin("deg-mixed");
    let path_at = b.oracle.path.unwrap();
    let mu = 1e-2;
    let h = 1e-6;
    let fd = num::sub(&path_at(mu + h).to_vec(), &path_at(mu - h).to_vec());
    let fd: Vec<f64> = fd.iter().map(|v| v / (2.0 * h)).collect();
    let t = path::tangent(&b.instance, &path_at(mu)).unwrap().to_vec();
    assert!(dist(&fd, &t) <= 1e-7, "{fd:?} vs {t:?}");
}

#[test]
fn limit_matrix_singular_exactly_when_nc_fails() {
    for name in lab::REGISTRY {
        let b = builtin(name);
        let wa = PrimalDualTriplet::new(b.oracle.xstar.clone(), b.oracle.y_a.clone(), b.oracle.z_a.clone());
        let smin = path::assemble_a(&b.instance, &wa).unwrap().sigma_min().unwrap();
        if b.oracle.expected.nc {
            assert!(smin > 1e-6, "{name}: {smin:e}");
        } else {
            assert!(smin <= 1e-10, "{name}: {smin:e}");
        }
    }
    let twin = builtin("deg-twin");
    let wa = PrimalDualTriplet::new(vec![0.0], twin.oracle.y_a.clone(), Vec::new());
    assert_eq!(path::assemble_a(&twin.instance, &wa).unwrap().sigma_min().unwrap(), 0.0);
}

#[test]
fn newton_matrix_regular_along_path() {
    for name in ["deg-twin", "deg-mixed", "rand-qmi"] {
        let b = builtin(name);
        let opts = lab::verification_trace_options(&b, Schedule::default());
        let trace = path::trace_path(&b.instance, &b.x0, &opts).unwrap();
        assert_eq!(trace.points.len(), 7);
        for p in &trace.points {
            assert!(p.diagnostics.sigmin_a > 0.0, "{name} at {}", p.mu);
            assert!(p.diagnostics.bkkt_res <= 1e-9, "{name} at {}", p.mu);
            assert!(path::reduced_form_min_eig(&b.instance, &p.w).unwrap() > 0.0);
        }
    }
}

#[test]
fn trace_modes_agree_on_mixed() {
    let b = builtin("deg-mixed");
    let xs = |mode| {
        let opts = TraceOptions {
            mode,
            ..lab::verification_trace_options(&b, Schedule::default())
        };
        path::trace_path(&b.instance, &b.x0, &opts).unwrap()
    };
    let a = xs(TraceMode::Barrier);
    let p = xs(TraceMode::Pdipm);
    for (u, v) in a.points.iter().zip(&p.points) {
        assert!(dist(&u.w.x, &v.w.x) <= 1e-8 * u.mu.max(1e-3));
    }
}

#[test]
fn schedule_validation() {
    let bad = [
        Schedule {
            mu0: 0.0,
            ..Schedule::default()
        },
        Schedule {
            sigma: 1.0,
            ..Schedule::default()
        },
        Schedule {
            mu_min: 1.0,
            ..Schedule::default()
        },
    ];
    for s in bad {
        assert!(s.validate().is_err(), "{s:?}");
    }
    assert_eq!(Schedule::default().grid().len(), 7);
}

#[test]
fn region_membership() {
    let xi = [2.0, 0.0];
    assert!(path::in_region(&[2e-3, 0.0], &[0.0, 0.0], &xi, 0.25, 1e-3).unwrap());
    assert!(!path::in_region(&[3e-3, 0.0], &[0.0, 0.0], &xi, 0.25, 1e-3).unwrap());
    assert!(path::in_region(&[1.0], &[0.0], &[0.0], 0.25, 1e-3).is_err());
}

#[test]
fn analytic_center_values_and_warm_starts() {
    let opts = CenterOptions::default();
    for (name, want) in [
        ("deg-twin", SymMat::diag(&[0.5, 0.5])),
        ("deg-cross", SymMat::diag(&[0.5, 0.5])),
        ("deg-mixed", SymMat::diag(&[0.5, 0.5, 0.0])),
    ] {
        let b = builtin(name);
        let split = kkt::eigen_split(&b.instance.eval_g(&b.oracle.xstar), DEFAULT_RANK_TOL).unwrap();
        let c = analytic::analytic_center(&b.instance, &b.oracle.xstar, &split, None, &opts).unwrap();
        assert!(c.y_a.sub(&want).frob_norm() <= 1e-8, "{name}");
        assert!(num::norm2(&c.z_a) <= 1e-8);
        assert!(c.cert_residual <= 1e-9);

        let k = split.null_dim();
        let mut rng = Rng::seeded(17);
        for _ in 0..10 {
            let m = Mat::from_fn(k, k, |_, _| rng.normal());
            let mut warm = SymMat::from_mat_unchecked(m.matmul(&m.transpose()));
            warm.add_scaled_identity(0.05);
            let cw = analytic::analytic_center(&b.instance, &b.oracle.xstar, &split, Some(&warm), &opts).unwrap();
            assert!(cw.y_a.sub(&c.y_a).frob_norm() <= 1e-9, "{name}");
        }
    }
}

#[test]
fn numeric_limits_of_the_curved_instance_match_hand_values() {
    let b = builtin("deg-curve");
    assert!(!b.oracle.hand_derived);
    assert!(b.oracle.y_a.sub(&SymMat::diag(&[0.5, 0.5, 0.0])).frob_norm() <= 1e-9);
    assert!(dist(&b.oracle.xi_star, &[2.0, 0.0, 0.0]) <= 1e-9);
}

#[test]
fn xi_star_solvers_agree_on_generated_instances() {
    for seed in 0..10u64 {
        let b = lab::rand_qmi(seed, 3).unwrap();
        let split = kkt::eigen_split(&b.instance.eval_g(&b.oracle.xstar), DEFAULT_RANK_TOL).unwrap();
        let c =
            analytic::analytic_center(&b.instance, &b.oracle.xstar, &split, None, &CenterOptions::default()).unwrap();
        let r = analytic::xi_star(&b.instance, &b.oracle.xstar, &split, &c).unwrap();
        assert!(r.structured_vs_full <= 1e-9, "seed {seed}");
        assert!(r.max_identity_residual() <= 1e-9, "seed {seed}");
    }
}

#[test]
fn unknown_instance_names_the_registry() {
    match lab::builtin_instance("nope") {
        Err(Error::UnknownInstance { name, registry }) => {
            assert_eq!(name, "nope");
            assert!(registry.iter().any(|r| r == "deg-twin"));
        }
        other => panic!("{other:?}"),
    }
    for bad in ["rand-qmi:1:1", "rand-qmi:x:3", "rand-qmi:1:9"] {
        assert!(lab::builtin_instance(bad).is_err(), "{bad}");
    }
}

#[test]
fn verification_is_deterministic() {
    let opts = VerifyOptions::default();
    let a = lab::run_verification_by_name("deg-cross", &opts).unwrap();
    let b = lab::run_verification_by_name("deg-cross", &opts).unwrap();
    // Debug text, since NaN entries defeat `==`.
    assert_eq!(format!("{a:?}"), format!("{b:?}"));
    assert!(a.overall);
}
