//! Command-line front end: `run`, `verify`, `convergence` and `kernels`.
//!
//! Exit codes: 0 success, 1 a certificate failed, 2 configuration error,
//! 3 solver failure. Failures print one JSON object on stderr.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use serde_json::json;

use crate::kernels::{cell_weights, check_pc_identity, Member};
use crate::plaplace::run_cdp;
use crate::special::mittag_leffler;
use crate::stepper::{continuous_dependence_check, solve_flow, Trajectory, CONTINUOUS_DEPENDENCE_SLACK};
use crate::verify::{self, Certificate};
use crate::{io, Error};

mod config;

pub use config::{Built, ConfigError, KernelName, Oracle, Problem, Profile, RunConfig};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CERTIFICATE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_SOLVER: i32 = 3;

pub const THREADS_ENV: &str = "FRACFLOW_THREADS";

#[derive(Debug, Parser)]
#[command(name = "fracflow", version, about = "Time-fractional gradient flows for time-dependent convex energies")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Suppress progress output on stdout.
    #[arg(long, global = true)]
    pub quiet: bool,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Solve the configured problem and write the trajectory and a summary.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the certificate suite; exit 1 if any certificate fails.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Verify a previously written trajectory file instead of solving.
        #[arg(long)]
        trajectory: Option<PathBuf>,
    },
    /// Refinement study `N, 2N, ..., 2^(levels-1) N` against an oracle.
    Convergence {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, default_value_t = 4)]
        levels: usize,
    },
    /// Dump convolution weights and kernel identity errors.
    Kernels {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

/// Failure carrying its exit code.
#[derive(Debug)]
pub struct Failure {
    pub code: i32,
    pub kind: &'static str,
    pub message: String,
    pub field: Option<String>,
    pub step: Option<usize>,
}

impl Failure {
    fn config(e: ConfigError) -> Self {
        Self {
            code: EXIT_CONFIG,
            kind: "config",
            field: (!e.field.is_empty()).then(|| e.field.clone()),
            message: e.to_string(),
            step: None,
        }
    }

    fn config_msg(message: impl Into<String>) -> Self {
        Self {
            code: EXIT_CONFIG,
            kind: "config",
            message: message.into(),
            field: None,
            step: None,
        }
    }

    fn solver(e: Error) -> Self {
        let step = match &e {
            Error::StepFailed { step, .. } => Some(*step),
            _ => None,
        };
        let (code, kind) = match e {
            Error::Io(_) => (EXIT_SOLVER, "io"),
            _ => (EXIT_SOLVER, "solver"),
        };
        Self {
            code,
            kind,
            message: e.to_string(),
            field: None,
            step,
        }
    }

    pub fn to_json(&self) -> String {
        let mut v = json!({ "error": self.kind, "message": self.message, "exit_code": self.code });
        if let Some(f) = &self.field {
            v["field"] = json!(f);
        }
        if let Some(s) = self.step {
            v["step"] = json!(s);
        }
        v.to_string()
    }
}

type CmdResult = std::result::Result<i32, Failure>;

struct Ctx {
    config: RunConfig,
    hash: String,
    out: PathBuf,
    quiet: bool,
}

impl Ctx {
    fn load(path: &Path, out: Option<&Path>, quiet: bool) -> std::result::Result<Self, Failure> {
        let text = fs::read_to_string(path)
            .map_err(|e| Failure::config_msg(format!("cannot read {}: {e}", path.display())))?;
        let config = RunConfig::parse(&text).map_err(Failure::config)?;
        let out = out
            .map(Path::to_path_buf)
            .or_else(|| config.output_dir.as_ref().map(PathBuf::from))
            .unwrap_or_else(|| PathBuf::from("fracflow-out"));
        fs::create_dir_all(&out)
            .map_err(|e| Failure::config_msg(format!("cannot create {}: {e}", out.display())))?;
        Ok(Self {
            hash: config.hash(),
            config,
            out,
            quiet,
        })
    }

    fn say(&self, line: impl AsRef<str>) {
        if !self.quiet {
            println!("{}", line.as_ref());
        }
    }

    fn path(&self, name: &str) -> PathBuf {
        self.out.join(name)
    }

    fn json<T: Serialize>(&self, name: &str, value: &T) -> std::result::Result<(), Failure> {
        io::write_json(&self.path(name), value).map_err(Failure::solver)
    }
}

struct Solved {
    traj: Trajectory,
    sup_energy: Option<f64>,
    derivative_bound: Option<f64>,
}

fn solve_built(built: &Built) -> crate::Result<Solved> {
    match built {
        Built::Flow(cfg) => Ok(Solved {
            traj: solve_flow(cfg)?,
            sup_energy: None,
            derivative_bound: None,
        }),
        Built::Cdp(cfg) => {
            let run = run_cdp(cfg)?;
            Ok(Solved {
                traj: run.trajectory,
                sup_energy: Some(run.sup_energy),
                derivative_bound: Some(run.derivative_bound),
            })
        }
    }
}

fn build(config: &RunConfig) -> std::result::Result<Built, Failure> {
    config.build().map_err(Failure::config)
}

/// Entry point used by the binary; returns the process exit code.
pub fn main_with(cli: Cli) -> i32 {
    let result = match &cli.command {
        Command::Run { config, out } => cmd_run(config, out.as_deref(), cli.quiet),
        Command::Verify { config, out, trajectory } => {
            cmd_verify(config, out.as_deref(), trajectory.as_deref(), cli.quiet)
        }
        Command::Convergence { config, out, levels } => {
            cmd_convergence(config, out.as_deref(), *levels, cli.quiet)
        }
        Command::Kernels { config, out } => cmd_kernels(config, out.as_deref(), cli.quiet),
    };
    match result {
        Ok(code) => code,
        Err(f) => {
            eprintln!("{}", f.to_json());
            f.code
        }
    }
}

/// Caps the global rayon pool at `FRACFLOW_THREADS` when set.
pub fn configure_threads() -> std::result::Result<(), Failure> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| Failure::config_msg(format!("{THREADS_ENV} must be a positive integer, got `{v}`")))?;
    // a second initialisation in the same process is harmless
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

#[derive(Serialize)]
struct RunSummary<'a> {
    config_sha256: &'a str,
    config: &'a RunConfig,
    steps: usize,
    max_residual: f64,
    final_energy: f64,
    final_u: &'a [f64],
    #[serde(skip_serializing_if = "Option::is_none")]
    sup_energy: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    derivative_bound: Option<f64>,
    quadrature_fallback: bool,
}

pub fn cmd_run(config_path: &Path, out: Option<&Path>, quiet: bool) -> CmdResult {
    let ctx = Ctx::load(config_path, out, quiet)?;
    let built = build(&ctx.config)?;
    let start = Instant::now();
    let solved = solve_built(&built).map_err(Failure::solver)?;
    let wall_time = start.elapsed().as_secs_f64();
    let traj = &solved.traj;

    let file = io::create_file(&ctx.path("trajectory.csv")).map_err(Failure::solver)?;
    io::write_trajectory_csv(traj, &ctx.hash, None, file).map_err(Failure::solver)?;
    if let Built::Cdp(cdp) = &built {
        let n = ctx.config.steps;
        let k = ctx.config.snapshots.max(1);
        let mut steps: Vec<usize> = (0..k).map(|i| if k == 1 { n } else { i * n / (k - 1) }).collect();
        steps.dedup();
        let file = io::create_file(&ctx.path("snapshots.csv")).map_err(Failure::solver)?;
        io::write_snapshots_csv(traj, &cdp.spatial.nodes(), &steps, &ctx.hash, file).map_err(Failure::solver)?;
    }
    let summary = RunSummary {
        config_sha256: &ctx.hash,
        config: &ctx.config,
        steps: traj.len_steps(),
        max_residual: traj.max_residual(),
        final_energy: *traj.energy.last().expect("nonempty"),
        final_u: traj.final_state(),
        sup_energy: solved.sup_energy,
        derivative_bound: solved.derivative_bound,
        quadrature_fallback: cell_weights(&ctx.config.pair(), &ctx.config.grid(), Member::K).quadrature_fallback,
    };
    ctx.json("summary.json", &summary)?;
    ctx.json("timing.json", &json!({ "config_sha256": ctx.hash, "wall_time": wall_time }))?;
    ctx.say(format!(
        "run: {} steps, max residual {:e}, final energy {}",
        summary.steps, summary.max_residual, summary.final_energy
    ));
    Ok(EXIT_OK)
}

/// Trajectory from a file written by `run`, with `D` recomputed from the
/// states and `ξ` recovered from the discrete equation.
fn offline_trajectory(ctx: &Ctx, built: &Built, path: &Path) -> std::result::Result<Trajectory, Failure> {
    let file = fs::File::open(path)
        .map_err(|e| Failure::config_msg(format!("cannot read {}: {e}", path.display())))?;
    let table = io::read_trajectory_csv(file).map_err(|e| Failure::config_msg(e.to_string()))?;
    if let Some(h) = &table.config_hash {
        if h != &ctx.hash {
            return Err(Failure::config_msg(format!(
                "trajectory was produced by config {h}, not {}",
                ctx.hash
            )));
        }
    }
    let flow = built.flow_config().map_err(Failure::solver)?;
    let grid = flow.grid;
    if table.u.len() != grid.steps() + 1 || table.u.iter().any(|u| u.len() != flow.u0.len()) {
        return Err(Failure::config_msg("trajectory shape does not match the config"));
    }
    let pair = &flow.pair;
    let d = verify::nonlocal_derivatives(&table.u, pair, &grid);
    let tau = grid.tau();
    let mut xi = vec![vec![0.0; flow.u0.len()]];
    for n in 1..table.u.len() {
        xi.push(
            (0..flow.u0.len())
                .map(|i| flow.forcing[n][i] - d[n][i] - flow.nu * (table.u[n][i] - table.u[n - 1][i]) / tau)
                .collect(),
        );
    }
    let energy: Vec<f64> = table
        .u
        .iter()
        .enumerate()
        .map(|(n, u)| flow.energy.eval(grid.node(n), u))
        .collect();
    Ok(Trajectory {
        grid,
        space: flow.energy.space(),
        u: table.u,
        xi,
        d,
        energy,
        residual: table.residual,
    })
}

#[derive(Serialize)]
struct CertificateFile<'a> {
    config_sha256: &'a str,
    #[serde(flatten)]
    summary: verify::CertificateSummary,
}

fn write_certificate(ctx: &Ctx, cert: &Certificate) -> std::result::Result<(), Failure> {
    ctx.json(
        &format!("cert_{}.json", cert.name),
        &CertificateFile {
            config_sha256: &ctx.hash,
            summary: cert.summary(),
        },
    )?;
    let mut buf = format!("{}{}\n", io::HASH_PREFIX, ctx.hash).into_bytes();
    cert.write_slack_csv(&mut buf).map_err(|e| Failure::solver(Error::Io(e.to_string())))?;
    fs::write(ctx.path(&format!("cert_{}_slack.csv", cert.name)), buf)
        .map_err(|e| Failure::solver(Error::Io(e.to_string())))
}

/// Seeded forcing perturbation of the configured run, checked against the
/// continuous-dependence estimate.
fn dependence_certificate(config: &RunConfig, built: &Built, traj: &Trajectory) -> crate::Result<Certificate> {
    let base = built.flow_config()?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let mut other = base.clone();
    for f in other.forcing.iter_mut().skip(1) {
        for v in f.iter_mut() {
            *v += rng.gen_range(-0.1..0.1);
        }
    }
    let traj2 = solve_flow(&other)?;
    let cd = continuous_dependence_check(traj, &traj2, &base, &other)?;
    let slack = (1.0 + CONTINUOUS_DEPENDENCE_SLACK) * cd.rhs - cd.lhs;
    Ok(Certificate::new("continuous_dependence", vec![slack], 0.0))
}

pub fn cmd_verify(config_path: &Path, out: Option<&Path>, trajectory: Option<&Path>, quiet: bool) -> CmdResult {
    let ctx = Ctx::load(config_path, out, quiet)?;
    let built = build(&ctx.config)?;
    let flow = built.flow_config().map_err(Failure::solver)?;
    let pair = flow.pair.clone();
    let grid = flow.grid;
    let traj = match trajectory {
        Some(p) => offline_trajectory(&ctx, &built, p)?,
        None => solve_built(&built).map_err(Failure::solver)?.traj,
    };
    let tol = ctx
        .config
        .certificate_tol
        .unwrap_or_else(|| verify::default_allowance(grid.steps()));
    let energy = flow.energy.as_ref();

    let mut certs = Vec::new();
    if energy.is_autonomous() {
        certs.push(verify::chain_rule_certificate(&traj, &pair, energy, tol).map_err(Failure::solver)?);
    }
    let shifted: Vec<Vec<f64>> = traj
        .u
        .iter()
        .map(|u| u.iter().zip(&traj.u[0]).map(|(a, b)| a - b).collect())
        .collect();
    certs.push(
        verify::ab_estimate_certificate(&shifted, &traj.space, &pair, &grid, tol).map_err(Failure::solver)?,
    );
    let fine_built = build(&ctx.config.with_steps(2 * grid.steps()))?;
    let fine = solve_built(&fine_built).map_err(Failure::solver)?.traj;
    let (bounds, energy_cert) = verify::energy_certificate(&traj, &fine, &pair).map_err(Failure::solver)?;
    certs.push(energy_cert);
    certs.push(dependence_certificate(&ctx.config, &built, &traj).map_err(Failure::solver)?);

    for c in &certs {
        write_certificate(&ctx, c)?;
        ctx.say(format!(
            "{:<22} min_slack {:>12.4e}  tol {:.3e}  {}",
            c.name,
            c.min_slack,
            c.tolerance,
            if c.pass { "PASS" } else { "FAIL" }
        ));
    }
    let td = match verify::td_chain_rule_report(&traj, &pair, energy, &verify::default_epsilons()) {
        Ok(r) => Some(r),
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(Failure::solver(e)),
    };
    if let Some(r) = &td {
        ctx.json("td_chain_rule.json", &json!({ "config_sha256": ctx.hash, "report": r }))?;
        ctx.say(format!("td_chain_rule          C = {:e}", r.constant));
    }
    let pass = certs.iter().all(|c| c.pass);
    ctx.json(
        "verify.json",
        &json!({
            "config_sha256": ctx.hash,
            "offline": trajectory.is_some(),
            "pass": pass,
            "energy_bounds": bounds,
            "certificates": certs.iter().map(|c| c.summary()).collect::<Vec<_>>(),
        }),
    )?;
    Ok(if pass { EXIT_OK } else { EXIT_CERTIFICATE })
}

#[derive(Debug, Clone, Serialize)]
pub struct ConvergenceRow {
    pub steps: usize,
    pub error: f64,
    pub order: Option<f64>,
}

/// Final state predicted by a closed-form oracle.
fn oracle_state(config: &RunConfig, oracle: Oracle, built: &Built) -> crate::Result<Option<Vec<f64>>> {
    let t = config.t_final;
    let decay = |lambda: f64| -> crate::Result<f64> {
        match config.kernel {
            KernelName::Classical => Ok((-lambda * t).exp()),
            KernelName::Rl => {
                let a = config.alpha.expect("validated");
                mittag_leffler(a, -lambda * t.powf(a))
            }
        }
    };
    match oracle {
        Oracle::MittagLeffler | Oracle::ClosedForm => {
            let u0 = match config.u0 {
                Profile::Constant => config.u0_value,
                _ => 0.0,
            };
            Ok(Some(vec![u0 * decay(config.rate)?]))
        }
        Oracle::Eigenmode => {
            let Built::Cdp(cdp) = built else { unreachable!("eigenmode oracle needs cdp") };
            let h = cdp.spatial.h();
            let lambda_h = 4.0 / (h * h) * (std::f64::consts::PI * h / 2.0).sin().powi(2);
            let g = decay(lambda_h)?;
            Ok(Some(cdp.u0.iter().map(|v| v * g).collect()))
        }
        _ => Ok(None),
    }
}

pub fn cmd_convergence(config_path: &Path, out: Option<&Path>, levels: usize, quiet: bool) -> CmdResult {
    if levels < 2 {
        return Err(Failure {
            code: EXIT_CONFIG,
            kind: "config",
            message: format!("levels: must be at least 2, got {levels}"),
            field: Some("levels".into()),
            step: None,
        });
    }
    let ctx = Ctx::load(config_path, out, quiet)?;
    let oracle = ctx.config.resolved_oracle().map_err(Failure::config)?;
    let configs: Vec<RunConfig> = (0..levels)
        .map(|i| ctx.config.with_steps(ctx.config.steps << i))
        .collect();
    let builts = configs.iter().map(build).collect::<std::result::Result<Vec<_>, _>>()?;
    let finals: Vec<(Vec<f64>, crate::convex::Space)> = builts
        .par_iter()
        .map(|b| solve_built(b).map(|s| (s.traj.final_state().to_vec(), s.traj.space)))
        .collect::<crate::Result<_>>()
        .map_err(Failure::solver)?;
    let space = finals[0].1;
    let reference = match oracle_state(&ctx.config, oracle, &builts[0]).map_err(Failure::solver)? {
        Some(r) => r,
        None => finals.last().expect("levels >= 2").0.clone(),
    };
    let compared = if oracle == Oracle::SelfReference { levels - 1 } else { levels };
    let mut rows: Vec<ConvergenceRow> = (0..compared)
        .map(|i| ConvergenceRow {
            steps: configs[i].steps,
            error: space.dist(&finals[i].0, &reference),
            order: None,
        })
        .collect();
    for i in 1..rows.len() {
        rows[i].order = Some((rows[i - 1].error / rows[i].error).log2());
    }

    let mut csv_text = format!("{}{}\nN,error,order\n", io::HASH_PREFIX, ctx.hash);
    for r in &rows {
        let order = r.order.map(|o| o.to_string()).unwrap_or_default();
        csv_text.push_str(&format!("{},{},{}\n", r.steps, r.error, order));
        ctx.say(format!("N = {:>6}  error {:.6e}  order {}", r.steps, r.error, order));
    }
    fs::write(ctx.path("convergence.csv"), csv_text).map_err(|e| Failure::solver(Error::Io(e.to_string())))?;
    ctx.json(
        "convergence.json",
        &json!({ "config_sha256": ctx.hash, "oracle": oracle, "levels": rows }),
    )?;
    Ok(EXIT_OK)
}

pub fn cmd_kernels(config_path: &Path, out: Option<&Path>, quiet: bool) -> CmdResult {
    let ctx = Ctx::load(config_path, out, quiet)?;
    let pair = ctx.config.pair();
    let grid = ctx.config.grid();
    let io_fail = |e: std::io::Error| Failure::solver(Error::Io(e.to_string()));
    for (member, name) in [(Member::K, "kernel_k.csv"), (Member::L, "kernel_l.csv")] {
        let w = cell_weights(&pair, &grid, member);
        let mut buf = format!("{}{}\n", io::HASH_PREFIX, ctx.hash).into_bytes();
        w.write_csv(&mut buf).map_err(io_fail)?;
        fs::write(ctx.path(name), buf).map_err(io_fail)?;
    }
    let pc = match check_pc_identity(&pair, &grid) {
        Ok(pc) => {
            let mut text = format!("{}{}\nn,t,error\n", io::HASH_PREFIX, ctx.hash);
            for (i, e) in pc.node_errors.iter().enumerate() {
                text.push_str(&format!("{},{},{}\n", i + 1, grid.node(i + 1), e));
            }
            fs::write(ctx.path("pc_identity.csv"), text).map_err(io_fail)?;
            Some(pc.max_error)
        }
        Err(Error::Unsupported(_)) => None,
        Err(e) => return Err(Failure::solver(e)),
    };
    let k = cell_weights(&pair, &grid, Member::K);
    ctx.json(
        "kernels.json",
        &json!({
            "config_sha256": ctx.hash,
            "kernel": pair.spec(),
            "T": grid.t_final(),
            "N": grid.steps(),
            "kappa0": k.first(),
            "l_norm_l1": pair.l_norm_l1(grid.t_final()),
            "pc_max_error": pc,
            "quadrature_fallback": k.quadrature_fallback,
        }),
    )?;
    match pc {
        Some(e) => ctx.say(format!("kernels: max |(k*l)(t_n) - 1| = {e:e}")),
        None => ctx.say("kernels: classical pair, identity holds by construction"),
    }
    Ok(EXIT_OK)
}
