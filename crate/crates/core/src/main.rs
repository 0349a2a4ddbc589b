//! `yosida` command line: single-binary front end for the scalar resolvent
//! demos, trajectory simulation, extinction-time Monte Carlo, μ-convergence
//! sweeps, and the built-in verification suite.
//!
//! One config file per run; flags only override the seed, output directory,
//! and worker count. Exit codes: 0 success / all checks passed, 1 a property
//! or bound check failed, 2 usage or config error. Data outputs are
//! byte-deterministic; wall-clock metadata lives in a sidecar `meta.json`.

use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use yosida::config::RunConfig;
use yosida::error::Error;
use yosida::extinction::{horizon_for_floor, run_extinction_study};
use yosida::graphs::{resolvent_residual, scalar_duality, scalar_resolvent, YosidaParams};
use yosida::sde::{lambda_sweep, simulate, SimConfig};
use yosida::verify::{run_suite, VerifyLevel};

#[derive(Parser)]
#[command(
    name = "yosida",
    version,
    about = "Generalized Yosida approximation toolkit: resolvent demos, regularized stochastic evolution, extinction Monte Carlo"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
    /// Override the config seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Output directory (default: config [output].dir, then $YOSIDA_OUT, then ./out).
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Worker threads (default: logical cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Print the scalar resolvent/Yosida table for the configured graph.
    Resolve { config: PathBuf },
    /// Integrate trajectories and export them as CSV.
    Simulate { config: PathBuf },
    /// Run the extinction-time Monte Carlo study and bound checks.
    Extinction { config: PathBuf },
    /// Common-random-number μ-sweep (coupled convergence table).
    Sweep { config: PathBuf },
    /// Run the property suite.
    Verify {
        #[arg(long, value_enum, default_value_t = LevelArg::Fast)]
        level: LevelArg,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum LevelArg {
    Fast,
    Full,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if rayon::ThreadPoolBuilder::new().num_threads(t).build_global().is_err() {
            eprintln!("warning: thread pool already initialized");
        }
    }
    match run(cli) {
        Ok(all_passed) => {
            if all_passed {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

fn out_dir(cli_out: &Option<PathBuf>, cfg: Option<&RunConfig>) -> PathBuf {
    if let Some(p) = cli_out {
        return p.clone();
    }
    if let Some(dir) = cfg.and_then(|c| c.output.as_ref()).and_then(|o| o.dir.as_ref()) {
        return PathBuf::from(dir);
    }
    if let Ok(env) = std::env::var("YOSIDA_OUT") {
        return PathBuf::from(env);
    }
    PathBuf::from("out")
}

fn write_sidecar(dir: &Path, command: &str) -> Result<(), Error> {
    let meta = serde_json::json!({
        "command": command,
        "timestamp_unix": std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0),
    });
    fs::write(dir.join("meta.json"), serde_json::to_string_pretty(&meta).unwrap() + "\n")?;
    Ok(())
}

fn write_resolved_config(dir: &Path, cfg: &RunConfig) -> Result<(), Error> {
    fs::write(dir.join("config.resolved.toml"), cfg.resolve_defaults().to_toml())?;
    Ok(())
}

fn load_config(path: &Path, seed_override: Option<u64>) -> Result<RunConfig, Error> {
    let mut cfg = RunConfig::load(path)?;
    if let Some(seed) = seed_override {
        if let Some(sim) = cfg.sim.as_mut() {
            sim.seed = seed;
        }
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<bool, Error> {
    match &cli.cmd {
        Cmd::Resolve { config } => {
            let cfg = load_config(config, cli.seed)?;
            cmd_resolve(&cfg, &out_dir(&cli.out, Some(&cfg)))
        }
        Cmd::Simulate { config } => {
            let cfg = load_config(config, cli.seed)?;
            cmd_simulate(&cfg, &out_dir(&cli.out, Some(&cfg)))
        }
        Cmd::Extinction { config } => {
            let cfg = load_config(config, cli.seed)?;
            cmd_extinction(&cfg, &out_dir(&cli.out, Some(&cfg)))
        }
        Cmd::Sweep { config } => {
            let cfg = load_config(config, cli.seed)?;
            cmd_sweep(&cfg, &out_dir(&cli.out, Some(&cfg)))
        }
        Cmd::Verify { level } => {
            let lvl = match level {
                LevelArg::Fast => VerifyLevel::Fast,
                LevelArg::Full => VerifyLevel::Full,
            };
            cmd_verify(lvl, &out_dir(&cli.out, None))
        }
    }
}

fn pass_str(p: bool) -> &'static str {
    if p {
        "PASS"
    } else {
        "FAIL"
    }
}

fn toml_value(cfg: &RunConfig) -> serde_json::Value {
    serde_json::to_value(cfg.resolve_defaults()).unwrap_or(serde_json::Value::Null)
}

fn cmd_resolve(cfg: &RunConfig, dir: &Path) -> Result<bool, Error> {
    let spec = cfg
        .resolve
        .as_ref()
        .ok_or_else(|| Error::config("resolve needs a [resolve] block"))?;
    let model = cfg
        .model
        .as_ref()
        .ok_or_else(|| Error::config("resolve needs a [model] block"))?;
    let graph = model.graph.build()?;
    let params = YosidaParams::new(spec.lambda, spec.alpha)?;
    params.validate_for(&graph)?;

    println!("graph: {}   λ = {}   α = {}", graph.desc(), spec.lambda, spec.alpha);
    println!(
        "{:>12}  {:>14}  {:>14}  {:>14}  {:>12}",
        "s", "R_λ(s)", "A_λ(s)", "A⁰(s)", "residual"
    );
    let mut rows = Vec::new();
    for &s in &spec.s {
        let y = scalar_resolvent(&graph, s, &params)?;
        let a = scalar_duality(s - y, spec.alpha) / spec.lambda;
        let a0 = graph.minimal_section(s);
        let res = resolvent_residual(&graph, s, y, &params);
        println!("{s:>12.6}  {y:>14.8}  {a:>14.8}  {a0:>14.8}  {res:>12.3e}");
        rows.push(serde_json::json!({
            "s": s, "resolvent": y, "yosida": a, "minimal_section": a0, "residual": res,
        }));
    }
    fs::create_dir_all(dir)?;
    let doc = serde_json::json!({
        "schema_version": yosida::config::SCHEMA_VERSION,
        "resolved_config": toml_value(cfg),
        "table": rows,
    });
    fs::write(dir.join("resolve.json"), serde_json::to_string_pretty(&doc).unwrap() + "\n")?;
    write_resolved_config(dir, cfg)?;
    write_sidecar(dir, "resolve")?;
    Ok(true)
}

fn write_trajectory_csv(
    dir: &Path,
    _sim: &SimConfig,
    traj: &yosida::sde::Trajectory,
) -> Result<(), Error> {
    let mut f = fs::File::create(dir.join(format!("trajectory_{:04}.csv", traj.index)))?;
    writeln!(f, "time,norm_H,norm_V,norm_H_pow,extinct_flag")?;
    for i in 0..traj.times.len() {
        let extinct = match traj.extinction_time {
            Some(tau) => traj.times[i] >= tau,
            None => false,
        };
        writeln!(
            f,
            "{},{},{},{},{}",
            traj.times[i],
            traj.norm_h[i],
            traj.norm_v[i],
            traj.norm_h_pow[i],
            u8::from(extinct)
        )?;
    }
    Ok(())
}

fn cmd_simulate(cfg: &RunConfig, dir: &Path) -> Result<bool, Error> {
    let mut sim = cfg.sim_config()?;
    let spec = cfg
        .simulate
        .clone()
        .unwrap_or(yosida::config::SimulateSpec { n_traj: 1, snapshots: vec![] });
    sim.checkpoints = spec.snapshots.clone();
    sim.keep_snapshots = !spec.snapshots.is_empty();
    fs::create_dir_all(dir)?;
    for i in 0..spec.n_traj {
        let traj = simulate(&sim, i)?;
        write_trajectory_csv(dir, &sim, &traj)?;
        for (t, snap) in &traj.snapshots {
            let mut f = fs::File::create(dir.join(format!("snapshot_{:04}_t{}.csv", i, t)))?;
            writeln!(f, "node,value")?;
            for (j, v) in snap.values().iter().enumerate() {
                writeln!(f, "{j},{v}")?;
            }
        }
        match traj.extinction_time {
            Some(tau) => println!("trajectory {i}: extinct at t = {tau:.6}"),
            None => println!(
                "trajectory {i}: alive at T = {} (‖X‖_H = {:.6e})",
                sim.horizon,
                traj.norm_h.last().unwrap()
            ),
        }
    }
    write_resolved_config(dir, cfg)?;
    write_sidecar(dir, "simulate")?;
    Ok(true)
}

fn cmd_extinction(cfg: &RunConfig, dir: &Path) -> Result<bool, Error> {
    let spec = cfg
        .extinction
        .as_ref()
        .ok_or_else(|| Error::config("extinction needs an [extinction] block"))?;
    let mut sim = cfg.sim_config()?;

    if let yosida::config::HorizonSpec::BoundFloor { floor } = spec.horizon {
        let a = sim.op.assumptions();
        let c0 = yosida::spaces::embedding_constant(sim.op.triple(), sim.grid())?;
        let cstar = yosida::extinction::c_star(a.delta, a.alpha, c0)?;
        let x_h = sim.op.triple().h_norm(&sim.initial);
        sim.horizon = horizon_for_floor(cstar, x_h, a.alpha, floor)?;
        println!("horizon resolved from floor {floor}: T = {:.6}", sim.horizon);
    }

    let study = run_extinction_study(&sim, spec.n_traj, spec.checkpoints)?;
    fs::create_dir_all(dir)?;
    let doc = serde_json::json!({
        "schema_version": yosida::config::SCHEMA_VERSION,
        "resolved_config": toml_value(cfg),
        "study": &study,
    });
    fs::write(
        dir.join("extinction_report.json"),
        serde_json::to_string_pretty(&doc).unwrap() + "\n",
    )?;
    let mut f = fs::File::create(dir.join("tau_samples.csv"))?;
    writeln!(f, "index,tau,censored,tau_eps_tenth,censored_tenth")?;
    for s in &study.samples {
        writeln!(
            f,
            "{},{},{},{},{}",
            s.index,
            s.tau.unwrap_or(study.report.horizon),
            u8::from(s.tau.is_none()),
            s.tau_tenth.unwrap_or(study.report.horizon),
            u8::from(s.tau_tenth.is_none()),
        )?;
    }
    write_resolved_config(dir, cfg)?;
    write_sidecar(dir, "extinction")?;

    let r = &study.report;
    println!("N = {}   ε = {:.3e}   T = {:.6}", r.n_traj, r.eps, r.horizon);
    println!(
        "c0 = {:.6}  ρ = {:.6}  c* = {:.6}  ‖x‖_H = {:.6}",
        r.c0, r.rho, r.c_star, r.x_norm_h
    );
    println!(
        "P(τ ≤ T) = {:.4} (Wilson [{:.4}, {:.4}])  floor = {:.4}  → {}",
        r.prob_empirical,
        r.prob_wilson.0,
        r.prob_wilson.1,
        r.prob_floor,
        pass_str(r.prob_pass)
    );
    println!(
        "E τ (censored) = {:.5} ± {:.5}  bound = {:.5}  → {}",
        r.mean_tau_censored,
        r.mean_tau_censored_se,
        r.mean_bound,
        pass_str(r.mean_pass)
    );
    println!("supermartingale: {}", pass_str(study.supermartingale.passed));
    println!("energy inequality: {}", pass_str(study.energy.passed));
    println!("moment envelope: {}", pass_str(study.moment.pass));
    println!(
        "ε-sensitivity: P(τ ≤ T) at ε/10 = {:.4}, E τ = {:.5}",
        r.prob_empirical_tenth, r.mean_tau_censored_tenth
    );

    Ok(r.prob_pass
        && r.mean_pass
        && study.supermartingale.passed
        && study.energy.passed
        && study.moment.pass)
}

fn cmd_sweep(cfg: &RunConfig, dir: &Path) -> Result<bool, Error> {
    let spec = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| Error::config("sweep needs a [sweep] block"))?;
    let sim = cfg.sim_config()?;
    let table = lambda_sweep(&sim, &spec.mu_list, spec.n_traj, &spec.checkpoints)?;
    fs::create_dir_all(dir)?;
    let mut f = fs::File::create(dir.join("sweep.csv"))?;
    writeln!(f, "checkpoint,mu_coarse,mu_fine,mean_sq_diff")?;
    for row in &table.rows {
        for (cp, v) in table.checkpoints.iter().zip(&row.mean_sq_diff) {
            writeln!(f, "{},{},{},{}", cp, row.mu_coarse, row.mu_fine, v)?;
        }
    }
    let doc = serde_json::json!({
        "schema_version": yosida::config::SCHEMA_VERSION,
        "resolved_config": toml_value(cfg),
        "table": &table,
    });
    fs::write(dir.join("sweep.json"), serde_json::to_string_pretty(&doc).unwrap() + "\n")?;
    write_resolved_config(dir, cfg)?;
    write_sidecar(dir, "sweep")?;

    println!("coupled μ-sweep over {:?} (N = {})", spec.mu_list, table.n_traj);
    for row in &table.rows {
        println!("μ {} → {}: {:?}", row.mu_coarse, row.mu_fine, row.mean_sq_diff);
    }
    Ok(true)
}

fn cmd_verify(level: VerifyLevel, dir: &Path) -> Result<bool, Error> {
    let summary = run_suite(level);
    for r in &summary.results {
        println!(
            "{}  {:<38} margin {:>12.3e}  {}",
            pass_str(r.passed),
            r.name,
            r.margin,
            r.detail
        );
    }
    println!(
        "{}: {}/{} properties passed",
        if summary.passed { "OK" } else { "FAILED" },
        summary.results.iter().filter(|r| r.passed).count(),
        summary.results.len()
    );
    fs::create_dir_all(dir)?;
    fs::write(
        dir.join("verify_summary.json"),
        serde_json::to_string_pretty(&summary).unwrap() + "\n",
    )?;
    write_sidecar(dir, "verify")?;
    Ok(summary.passed)
}
