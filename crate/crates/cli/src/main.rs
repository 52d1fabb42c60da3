use std::fs;
use std::io::Write as _;
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use cluttergrasp::config::Config;
use cluttergrasp::executor::{
    load_scenario_dir, reports_csv, run_benchmark, run_episode, BenchmarkTable, EpisodeReport,
};
use cluttergrasp::planner::{LlmPlanner, Planner, RateLimiter, ScriptedPlanner};
use cluttergrasp::render::{render_scene, RenderOptions};
use cluttergrasp::scenegen::{
    generate_benchmark, generate_cell, load_scene, parse, serialize, ScenarioConfig, SceneSnapshot,
};
use cluttergrasp::simworld::SceneState;
use cluttergrasp::toolserver::{serve_stdio, serve_tcp, Session};

#[derive(Parser)]
#[command(
    name = "cluttergrasp",
    version,
    about = "Clutter-clearing grasp benchmark tools"
)]
struct Cli {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Raise log verbosity (-v info, -vv debug).
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    verbose: u8,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate scenario files. Without --target and --level, writes the full benchmark.
    Gen(GenArgs),
    /// Serve the skill library over newline-delimited JSON.
    Serve(ServeArgs),
    /// Run one closed-loop episode.
    Run(RunArgs),
    /// Run every scenario in a directory and write a CSV of outcomes.
    Bench(BenchArgs),
    /// Draw a scenario or snapshot as SVG.
    Render(RenderArgs),
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, requires = "level")]
    target: Option<String>,
    #[arg(long, requires = "target", value_parser = clap::value_parser!(u8).range(1..=3))]
    level: Option<u8>,
    #[arg(long, default_value_t = 10)]
    count: usize,
    /// Master seed; defaults to the configured one.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Transport {
    Stdio,
    Tcp,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, value_enum, default_value_t = Transport::Stdio)]
    transport: Transport,
    #[arg(long, default_value_t = 7345)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    #[arg(long)]
    scenario: PathBuf,
    /// Where to write the final scene of a stdio session.
    #[arg(long)]
    snapshot: Option<PathBuf>,
    /// Directory for per-connection snapshots of a TCP server.
    #[arg(long)]
    snapshot_dir: Option<PathBuf>,
    /// Stop accepting after this many TCP connections.
    #[arg(long)]
    max_connections: Option<usize>,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum PlannerKind {
    Scripted,
    Llm,
}

#[derive(Args)]
struct PlannerArgs {
    #[arg(long, value_enum, default_value_t = PlannerKind::Scripted)]
    planner: PlannerKind,
    /// Disable clearing: the scripted planner only moves and grasps.
    #[arg(long)]
    no_clear: bool,
    #[arg(long)]
    max_steps: Option<usize>,
    #[arg(long)]
    replan_limit: Option<usize>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    planner: PlannerArgs,
    /// Write the full episode report (with trace) as JSON.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    dir: PathBuf,
    #[command(flatten)]
    planner: PlannerArgs,
    #[arg(long, default_value = "results.csv")]
    out: PathBuf,
    /// Also write every episode report as a JSON array.
    #[arg(long)]
    reports: Option<PathBuf>,
    /// Worker threads; defaults to the configured parallelism.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct RenderArgs {
    /// Scenario file or scene snapshot.
    #[arg(long)]
    scenario: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Draw the settled scene instead of the raw placement.
    #[arg(long)]
    settled: bool,
    #[arg(long)]
    no_labels: bool,
}

fn main() {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    if let Err(e) = run(cli) {
        eprintln!("error: {e:#}");
        std::process::exit(1);
    }
}

fn run(cli: Cli) -> Result<()> {
    let config = match &cli.config {
        Some(p) => Config::load(p).with_context(|| format!("loading {}", p.display()))?,
        None => Config::default(),
    };
    match cli.cmd {
        Cmd::Gen(a) => gen(&config, a),
        Cmd::Serve(a) => serve(&config, a),
        Cmd::Run(a) => run_one(config, a),
        Cmd::Bench(a) => bench(config, a),
        Cmd::Render(a) => render(&config, a),
    }
}

fn read_scenario(path: &Path) -> Result<ScenarioConfig> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    parse(&bytes).with_context(|| format!("parsing {}", path.display()))
}

fn gen(config: &Config, a: GenArgs) -> Result<()> {
    let roster = config.roster();
    let seed = a.seed.unwrap_or(config.bench.master_seed);
    let scenarios = match (&a.target, a.level) {
        (Some(t), Some(l)) => generate_cell(seed, t, l, a.count, &roster)?,
        _ => generate_benchmark(seed, &roster)?,
    };
    fs::create_dir_all(&a.out).with_context(|| format!("creating {}", a.out.display()))?;
    for (id, c) in &scenarios {
        let p = a.out.join(id.file_name());
        fs::write(&p, serialize(c)).with_context(|| format!("writing {}", p.display()))?;
    }
    println!("wrote {} scenarios to {}", scenarios.len(), a.out.display());
    Ok(())
}

fn serve(config: &Config, a: ServeArgs) -> Result<()> {
    let c = read_scenario(&a.scenario)?;
    let skills = config.skills.clone();
    let scene = load_scene(&c, &config.roster(), &skills.rig, skills.home)?;
    let session = Session::new(scene, skills, c.seed, c.level);
    match a.transport {
        Transport::Stdio => serve_stdio(session, a.snapshot)?,
        Transport::Tcp => {
            let listener = TcpListener::bind((a.host.as_str(), a.port))
                .with_context(|| format!("binding {}:{}", a.host, a.port))?;
            eprintln!("listening on {}", listener.local_addr()?);
            if let Some(d) = &a.snapshot_dir {
                fs::create_dir_all(d)?;
            }
            serve_tcp(listener, session, a.snapshot_dir, a.max_connections)?;
        }
    }
    Ok(())
}

fn apply_limits(config: &mut Config, p: &PlannerArgs) {
    if let Some(n) = p.max_steps {
        config.limits.max_steps = n;
    }
    if let Some(n) = p.replan_limit {
        config.limits.replan_limit = n;
    }
}

fn planner_factory(
    config: &Config,
    p: &PlannerArgs,
) -> Result<Box<dyn Fn() -> Box<dyn Planner> + Sync>> {
    let clearing = !p.no_clear;
    match p.planner {
        PlannerKind::Scripted => Ok(Box::new(move || Box::new(ScriptedPlanner { clearing }))),
        PlannerKind::Llm => {
            let llm = config.llm.clone().with_env();
            let limiter = (llm.requests_per_minute > 0)
                .then(|| Arc::new(RateLimiter::per_minute(llm.requests_per_minute)));
            Ok(Box::new(move || {
                let transport = cluttergrasp::planner::HttpTransport::new(&llm);
                let mut planner = LlmPlanner::new(llm.clone(), transport);
                planner.fallback = ScriptedPlanner { clearing };
                if let Some(l) = &limiter {
                    planner = planner.with_limiter(l.clone());
                }
                Box::new(planner)
            }))
        }
    }
}

fn print_report(r: &EpisodeReport) {
    for t in &r.trace {
        println!(
            "{:>3}  {:<9} {:<32} {}",
            t.step,
            t.action.skill.name(),
            serde_json::Value::Object(t.action.skill.args()).to_string(),
            if t.result.success {
                "ok".to_string()
            } else {
                format!("FAILED: {}", t.result.message)
            }
        );
    }
    println!(
        "{}: {} after {} steps, {} replans{}",
        r.scenario,
        r.outcome.as_str(),
        r.steps_used,
        r.replans_used,
        if r.flags.is_empty() {
            String::new()
        } else {
            format!(" [{}]", r.flags.join(", "))
        }
    );
}

fn run_one(mut config: Config, a: RunArgs) -> Result<()> {
    apply_limits(&mut config, &a.planner);
    config.validate()?;
    let c = read_scenario(&a.scenario)?;
    let id = a
        .scenario
        .file_stem()
        .and_then(|s| s.to_str())
        .unwrap_or("scenario")
        .to_string();
    let make = planner_factory(&config, &a.planner)?;
    let mut planner = make();
    let r = run_episode(&id, &c, planner.as_mut(), &config.episode_env());
    print_report(&r);
    if let Some(p) = &a.report {
        let mut text = serde_json::to_string_pretty(&r)?;
        text.push('\n');
        fs::write(p, text).with_context(|| format!("writing {}", p.display()))?;
    }
    Ok(())
}

fn bench(mut config: Config, a: BenchArgs) -> Result<()> {
    apply_limits(&mut config, &a.planner);
    config.validate()?;
    let (scenarios, bad) = load_scenario_dir(&a.dir)
        .with_context(|| format!("reading scenarios from {}", a.dir.display()))?;
    for (p, e) in &bad {
        eprintln!("skipping {}: {e}", p.display());
    }
    if scenarios.is_empty() {
        bail!("no scenarios found in {}", a.dir.display());
    }
    let make = planner_factory(&config, &a.planner)?;
    let jobs = a.jobs.unwrap_or_else(|| config.bench.workers());
    let reports = run_benchmark(&scenarios, make, &config.episode_env(), jobs);
    fs::write(&a.out, reports_csv(&reports)?)
        .with_context(|| format!("writing {}", a.out.display()))?;
    if let Some(p) = &a.reports {
        fs::write(p, serde_json::to_vec_pretty(&reports)?)
            .with_context(|| format!("writing {}", p.display()))?;
    }
    let table = BenchmarkTable::from_reports(&reports);
    let mut out = std::io::stdout().lock();
    write!(out, "{}", table.format())?;
    writeln!(out, "{} episodes -> {}", reports.len(), a.out.display())?;
    Ok(())
}

fn load_any_scene(config: &Config, path: &Path, settled: bool) -> Result<SceneState> {
    let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    let roster = config.roster();
    let s = &config.skills;
    if let Ok(c) = parse(&bytes) {
        return Ok(if settled {
            load_scene(&c, &roster, &s.rig, s.home)?
        } else {
            cluttergrasp::scenegen::place_scene(&c, &roster, &s.rig, s.home)?
        });
    }
    let snap: SceneSnapshot = serde_json::from_slice(&bytes)
        .with_context(|| format!("{} is neither a scenario nor a snapshot", path.display()))?;
    Ok(snap.restore(&roster, &s.rig)?)
}

fn render(config: &Config, a: RenderArgs) -> Result<()> {
    let scene = load_any_scene(config, &a.scenario, a.settled)?;
    let opts = RenderOptions {
        labels: !a.no_labels,
        corridor_halfwidth: config.skills.corridor_halfwidth,
        ..RenderOptions::default()
    };
    fs::write(&a.out, render_scene(&scene, &opts))
        .with_context(|| format!("writing {}", a.out.display()))?;
    Ok(())
}
