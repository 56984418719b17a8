use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use clap::{Args, Parser, Subcommand};
use cpath::error::{Error, Result};
use cpath::output;
use cpath::source::{self, Resolved};
use cpath_core::analytic::{self, CenterOptions};
use cpath_core::kkt::{self, ConditionOptions};
use cpath_core::lab::{self, VerificationReport, VerifyOptions};
use cpath_core::model::{self, NsdpInstance};
use cpath_core::path::{self, Schedule, TraceMode, TraceOptions};
use cpath_core::rng::Rng;
use cpath_core::symlin::DEFAULT_RANK_TOL;

const SEED_ENV: &str = "CPATH_LAB_SEED";

#[derive(Parser, Debug)]
#[command(
    name = "cpath",
    version,
    about = "Central-path laboratory for degenerate nonlinear SDPs"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug)]
struct InstanceArgs {
    /// Registry name (see `list-instances`) or path to a QMI JSON file.
    #[arg(long)]
    instance: String,
    /// Starting point, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    x0: Option<Vec<f64>>,
    /// Known minimizer, comma separated.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    xstar: Option<Vec<f64>>,
    /// Overridden by the CPATH_LAB_SEED environment variable.
    #[arg(long, default_value_t = 42)]
    seed: u64,
}

#[derive(Args, Debug, Clone, Copy)]
struct ScheduleArgs {
    #[arg(long, default_value_t = 1e-1)]
    mu0: f64,
    #[arg(long, default_value_t = 0.1)]
    sigma: f64,
    #[arg(long = "mu-min", default_value_t = 1e-7)]
    mu_min: f64,
}

impl ScheduleArgs {
    fn schedule(&self) -> Result<Schedule> {
        let s = Schedule {
            mu0: self.mu0,
            sigma: self.sigma,
            mu_min: self.mu_min,
        };
        s.validate()?;
        Ok(s)
    }
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Compare derivative oracles with central differences.
    Check {
        #[command(flatten)]
        inst: InstanceArgs,
        #[arg(long, default_value_t = model::FD_STEP)]
        step: f64,
        #[arg(long = "fd-tol", default_value_t = model::FD_TOL)]
        fd_tol: f64,
    },
    /// Report SC, NC, MFCQ and SSOSC at the known minimizer.
    Conditions {
        #[command(flatten)]
        inst: InstanceArgs,
    },
    /// Trace the central path and write the per-point table as CSV.
    Trace {
        #[command(flatten)]
        inst: InstanceArgs,
        #[command(flatten)]
        schedule: ScheduleArgs,
        /// barrier, pdipm or hybrid.
        #[arg(long, default_value = "hybrid", value_parser = parse_mode)]
        mode: TraceMode,
        /// Acceptance tolerance on the barrier-KKT residual of every point.
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        /// Output file; standard output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Analytic center of the multiplier set at the known minimizer.
    AnalyticCenter {
        #[command(flatten)]
        inst: InstanceArgs,
    },
    /// Limiting direction of the central path at the known minimizer.
    Xistar {
        #[command(flatten)]
        inst: InstanceArgs,
    },
    /// Run the verification experiments and write a JSON report.
    Verify {
        #[arg(long, required_unless_present = "all", conflicts_with = "all")]
        instance: Option<String>,
        /// Every registry instance.
        #[arg(long)]
        all: bool,
        #[command(flatten)]
        schedule: ScheduleArgs,
        #[arg(long, default_value_t = 0.25)]
        rho: f64,
        /// Overridden by the CPATH_LAB_SEED environment variable.
        #[arg(long, default_value_t = 42)]
        seed: u64,
        /// Worker threads for `--all`.
        #[arg(long, default_value_t = 1)]
        jobs: usize,
        /// Report file, or a directory of reports with `--all`; standard
        /// output when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// List the builtin instances.
    ListInstances,
}

fn parse_mode(s: &str) -> std::result::Result<TraceMode, String> {
    s.parse::<TraceMode>().map_err(|e| e.to_string())
}

fn effective_seed(flag: u64) -> Result<u64> {
    match std::env::var(SEED_ENV) {
        Ok(v) => v
            .trim()
            .parse::<u64>()
            .map_err(|_| Error::Usage(format!("{SEED_ENV} must be an unsigned integer, got {v:?}"))),
        Err(std::env::VarError::NotPresent) => Ok(flag),
        Err(e) => Err(Error::Usage(format!("{SEED_ENV}: {e}"))),
    }
}

fn positive(name: &str, v: f64) -> Result<()> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(Error::Usage(format!("--{name} must be positive and finite, got {v}")))
    }
}

fn write_file(path: &Path, contents: &str) -> Result<()> {
    std::fs::write(path, contents).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn resolve(a: &InstanceArgs) -> Result<Resolved> {
    source::resolve(&a.instance, a.x0.clone(), a.xstar.clone())
}

fn center_at(r: &Resolved, xstar: &[f64]) -> Result<(kkt::EigenSplit, analytic::AnalyticCenterResult)> {
    let split = kkt::eigen_split(&r.instance.eval_g(xstar), DEFAULT_RANK_TOL)?;
    let center = analytic::analytic_center(&r.instance, xstar, &split, None, &CenterOptions::default())?;
    Ok((split, center))
}

fn cmd_check(a: &InstanceArgs, step: f64, tol: f64) -> Result<bool> {
    positive("step", step)?;
    positive("fd-tol", tol)?;
    let seed = effective_seed(a.seed)?;
    let r = resolve(a)?;
    let n = r.instance.n();
    let mut rng = Rng::seeded(seed);
    let base = r.x0.clone().unwrap_or_else(|| vec![0.0; n]);
    let random: Vec<f64> = base.iter().map(|v| v + 0.1 * rng.normal()).collect();
    let mut pass = true;
    let mut text = String::new();
    for (label, x) in [("x0", &base), ("random", &random)] {
        let rep = model::fd_check(&r.instance, x, step, tol)?;
        pass &= rep.pass();
        text.push_str(&output::render_fd(label, &rep));
    }
    print!("{text}");
    Ok(pass)
}

fn cmd_conditions(a: &InstanceArgs) -> Result<()> {
    let seed = effective_seed(a.seed)?;
    let r = resolve(a)?;
    let rep = match &r.builtin {
        Some(b) => lab::builtin_conditions(b, seed)?,
        None => {
            let xstar = r.require_xstar()?.to_vec();
            let (split, center) = center_at(&r, &xstar)?;
            let mut rng = Rng::seeded(seed);
            let samples = lab::multiplier_samples(&r.instance, &xstar, &split, &center, 4, &mut rng)?;
            let opts = ConditionOptions {
                seed,
                ..ConditionOptions::default()
            };
            kkt::condition_report(&r.instance, &xstar, &samples, &opts)?
        }
    };
    print!("{}", output::render_conditions(&rep));
    Ok(())
}

fn cmd_trace(a: &InstanceArgs, sched: &ScheduleArgs, mode: TraceMode, tol: f64, out: Option<&Path>) -> Result<()> {
    let schedule = sched.schedule()?;
    positive("tol", tol)?;
    effective_seed(a.seed)?;
    let r = resolve(a)?;
    let x0 = r.require_x0()?.to_vec();
    let opts = TraceOptions {
        schedule,
        mode,
        xstar: r.xstar.clone(),
        accept_tol: tol,
        ..TraceOptions::default()
    };
    let trace = path::trace_path(&r.instance, &x0, &opts)?;
    let limits = r.limits()?;
    let rows = lab::trace_rows(&r.instance, &trace, limits.as_ref());
    let csv = output::trace_csv(&rows, r.instance.n());
    match out {
        Some(p) => write_file(p, &csv),
        None => {
            print!("{csv}");
            Ok(())
        }
    }
}

fn cmd_center(a: &InstanceArgs) -> Result<()> {
    effective_seed(a.seed)?;
    let r = resolve(a)?;
    let xstar = r.require_xstar()?.to_vec();
    let (_, center) = center_at(&r, &xstar)?;
    print!("{}", output::render_center(&center));
    Ok(())
}

fn cmd_xistar(a: &InstanceArgs) -> Result<()> {
    effective_seed(a.seed)?;
    let r = resolve(a)?;
    let xstar = r.require_xstar()?.to_vec();
    let (split, center) = center_at(&r, &xstar)?;
    let xi = analytic::xi_star(&r.instance, &xstar, &split, &center)?;
    print!("{}", output::render_xistar(&xi));
    Ok(())
}

/// Reports in input order; the first error wins.
fn verify_many(names: &[String], opts: &VerifyOptions, jobs: usize) -> Result<Vec<VerificationReport>> {
    let next = AtomicUsize::new(0);
    let slots: Vec<Mutex<Option<cpath_core::Result<VerificationReport>>>> =
        names.iter().map(|_| Mutex::new(None)).collect();
    std::thread::scope(|scope| {
        for _ in 0..jobs.min(names.len()).max(1) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                if i >= names.len() {
                    break;
                }
                let rep = lab::run_verification_by_name(&names[i], opts);
                *slots[i].lock().expect("no panics while holding the lock") = Some(rep);
            });
        }
    });
    slots
        .into_iter()
        .map(|s| {
            s.into_inner()
                .expect("no panics while holding the lock")
                .expect("every slot is filled")
                .map_err(Error::from)
        })
        .collect()
}

fn cmd_verify(
    instance: Option<&str>,
    all: bool,
    sched: &ScheduleArgs,
    rho: f64,
    seed: u64,
    jobs: usize,
    out: Option<&Path>,
) -> Result<bool> {
    let schedule = sched.schedule()?;
    if !(rho > 0.0 && rho < 1.0) {
        return Err(Error::Usage(format!("--rho must lie in (0, 1), got {rho}")));
    }
    if jobs == 0 {
        return Err(Error::Usage("--jobs must be at least 1".into()));
    }
    let seed = effective_seed(seed)?;
    let names: Vec<String> = if all {
        lab::REGISTRY.iter().map(|s| s.to_string()).collect()
    } else {
        let name = instance.expect("clap enforces --instance without --all");
        if !lab::is_builtin_name(name) {
            return Err(Error::Usage(format!(
                "verify needs a builtin with oracle data; {name:?} is not in the registry ({})",
                lab::REGISTRY.join(", ")
            )));
        }
        vec![name.to_string()]
    };
    let opts = VerifyOptions { schedule, rho, seed };
    let reports = verify_many(&names, &opts, jobs)?;
    let overall = reports.iter().all(|r| r.overall);
    match (out, all) {
        (Some(dir), true) => {
            std::fs::create_dir_all(dir).map_err(|source| Error::Io {
                path: dir.to_path_buf(),
                source,
            })?;
            for r in &reports {
                write_file(
                    &dir.join(format!("{}.json", r.instance.replace(':', "_"))),
                    &output::report_json(r),
                )?;
            }
        }
        (Some(file), false) => write_file(file, &output::report_json(&reports[0]))?,
        (None, _) => {
            if all {
                for r in &reports {
                    print!("{}", output::render_report_summary(r));
                }
            } else {
                print!("{}", output::report_json(&reports[0]));
            }
        }
    }
    if out.is_some() {
        for r in &reports {
            eprintln!("{}: overall {}", r.instance, if r.overall { "PASS" } else { "FAIL" });
        }
    }
    Ok(overall)
}

fn cmd_list() {
    let mut stdout = std::io::stdout().lock();
    for name in lab::REGISTRY {
        let desc = lab::builtin_instance(name)
            .map(|b| b.instance.description.clone())
            .unwrap_or_else(|e| format!("(failed to load: {e})"));
        let _ = writeln!(stdout, "{name:<16} {desc}");
    }
    let _ = writeln!(
        stdout,
        "{:<16} seeded generator, e.g. rand-qmi:7:3 (seed 7, null space 3)",
        "rand-qmi:S:K"
    );
}

fn run(cli: Cli) -> Result<bool> {
    match &cli.command {
        Command::Check { inst, step, fd_tol } => cmd_check(inst, *step, *fd_tol),
        Command::Conditions { inst } => cmd_conditions(inst).map(|_| true),
        Command::Trace {
            inst,
            schedule,
            mode,
            tol,
            out,
        } => cmd_trace(inst, schedule, *mode, *tol, out.as_deref()).map(|_| true),
        Command::AnalyticCenter { inst } => cmd_center(inst).map(|_| true),
        Command::Xistar { inst } => cmd_xistar(inst).map(|_| true),
        Command::Verify {
            instance,
            all,
            schedule,
            rho,
            seed,
            jobs,
            out,
        } => cmd_verify(instance.as_deref(), *all, schedule, *rho, *seed, *jobs, out.as_deref()),
        Command::ListInstances => {
            cmd_list();
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("cpath: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
