use std::fs;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;
use std::sync::Arc;

use aclwright::service::{self, AppState, ServiceConfig};
use aclwright_core::comprehension::{BackendConfig, ChatBackend, LiveBackend, MockBackend};
use aclwright_core::deploy::{Limits, Strategy};
use aclwright_core::flowset::Action;
use aclwright_core::pipeline::{run_pipeline, RunConfig, RunDir, RunReport, Session, Stage, CONFLICTS_FILE, REPORT_FILE};
use aclwright_core::scenario::{generate_scenario, Scenario, ScenarioParams};
use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "aclwright", version, about = "Conflict-aware ACL configuration pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a scenario and write it as JSON
    Gen(GenArgs),
    /// Run every stage and write a report
    Run(RunArgs),
    /// Comprehend, review and detect conflicts
    Detect(RunArgs),
    /// Run up to deployment planning for every strategy
    Plan(RunArgs),
    /// Finish an existing run directory and print its verification
    Verify(RunArgs),
    /// Serve the HTTP API
    Serve(ServeArgs),
}

#[derive(Args)]
struct ScenarioArgs {
    /// Template (campus, cloud, fig2, fig3, protect, composite) or a JSON
    /// scenario or network file
    #[arg(long, default_value = "composite")]
    scenario: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    rules_per_acl: Option<usize>,
    #[arg(long)]
    conflict_ratio: Option<f64>,
    #[arg(long)]
    default_action: Option<Action>,
    #[arg(long)]
    permit_intents: Option<usize>,
    #[arg(long)]
    deny_intents: Option<usize>,
    #[arg(long)]
    protect_intents: Option<usize>,
}

#[derive(Args)]
struct GenArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    /// Directory to write scenario.json into; stdout when absent
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendKind {
    Mock,
    Live,
}

#[derive(Args)]
struct BackendArgs {
    #[arg(long, value_enum, default_value = "mock")]
    backend: BackendKind,
    /// Chat-completions URL for the live backend
    #[arg(long, env = "ACLW_LLM_ENDPOINT")]
    endpoint: Option<String>,
    #[arg(long, default_value = "gpt-4o")]
    model: String,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    scenario: ScenarioArgs,
    #[command(flatten)]
    backend: BackendArgs,
    /// Strategy whose plan is applied
    #[arg(long, default_value = "optimized")]
    strategy: Strategy,
    /// Approve every IR that validates instead of stopping for review
    #[arg(long)]
    auto_approve: bool,
    /// Include exact flow sets in the conflict report
    #[arg(long)]
    full_sets: bool,
    /// Run directory; an interrupted run there is resumed
    #[arg(long, default_value = "aclwright-run")]
    out: PathBuf,
    /// Solver time limit per program, in seconds
    #[arg(long, default_value_t = 60)]
    solver_seconds: u64,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    backend: BackendArgs,
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: SocketAddr,
    #[arg(long, env = "ACLW_DATA_DIR", default_value = "aclwright-data")]
    data_dir: PathBuf,
}

fn load_scenario(a: &ScenarioArgs) -> Result<Scenario> {
    if a.scenario.ends_with(".json") {
        let text = fs::read_to_string(&a.scenario).with_context(|| format!("reading {}", a.scenario))?;
        if let Ok(s) = Scenario::from_json(&text) {
            return Ok(s);
        }
    }
    let mut p = ScenarioParams { template: a.scenario.parse().map_err(anyhow::Error::msg)?, seed: a.seed, ..Default::default() };
    if let Some(v) = a.rules_per_acl {
        p.rules_per_acl = v;
    }
    if let Some(v) = a.conflict_ratio {
        p.conflict_ratio = v;
    }
    if a.default_action.is_some() {
        p.default_action = a.default_action;
    }
    if let Some(v) = a.permit_intents {
        p.permit_intents = v;
    }
    if let Some(v) = a.deny_intents {
        p.deny_intents = v;
    }
    if let Some(v) = a.protect_intents {
        p.protect_intents = v;
    }
    Ok(generate_scenario(&p)?)
}

fn backend_config(a: &BackendArgs) -> BackendConfig {
    BackendConfig { endpoint: a.endpoint.clone(), model: a.model.clone(), ..Default::default() }
}

fn backend(a: &BackendArgs) -> Result<Arc<dyn ChatBackend>> {
    Ok(match a.backend {
        BackendKind::Mock => Arc::new(MockBackend::new()),
        BackendKind::Live => Arc::new(LiveBackend::from_config(&backend_config(a))?),
    })
}

fn print_report(r: &RunReport, out: &std::path::Path) {
    println!("scenario {}", r.scenario);
    for i in &r.intents {
        println!(
            "  intent {:>3}  {:<15} rules {:>3}  conflicts {:>3}  protect rules {:>3}  {}",
            i.id, i.stage.name(), i.rules, i.conflicts, i.protect_rules, i.text
        );
        for issue in &i.issues {
            println!("               ! {issue}");
        }
    }
    if !r.strategies.is_empty() {
        println!("  {:<12} {:>9} {:>6} {:>9}", "strategy", "objective", "dedup", "verified");
        for s in &r.strategies {
            println!("  {:<12} {:>9} {:>6} {:>9}", s.strategy.name(), s.objective, s.dedup_savings, s.verified);
        }
    }
    if let Some(s) = r.applied {
        println!("applied {s}");
    }
    match r.verified {
        Some(v) => println!("verified {v}"),
        None if r.intents.iter().any(|i| i.stage == Stage::AwaitingReview) => {
            println!("waiting for review; rerun with --auto-approve or use the service")
        }
        None => {}
    }
    println!("report {}", out.join(REPORT_FILE).display());
}

fn pipeline(a: &RunArgs, until: Stage) -> Result<RunReport> {
    let resuming = Session::open(RunDir::create(&a.out)?)?;
    let scenario = match &resuming {
        Some(s) => s.scenario().clone(),
        None => load_scenario(&a.scenario)?,
    };
    let cfg = RunConfig {
        backend: backend_config(&a.backend),
        strategy: a.strategy,
        auto_approve: a.auto_approve,
        full_sets: a.full_sets,
        limits: Limits { time: std::time::Duration::from_secs(a.solver_seconds), ..Default::default() },
        until,
        fail_point: None,
    };
    let backend = backend(&a.backend)?;
    Ok(run_pipeline(&a.out, &scenario, &cfg, backend.as_ref())?)
}

fn exit_for(r: &RunReport) -> ExitCode {
    if r.verified == Some(false) || r.strategies.iter().any(|s| !s.verified && r.applied.is_some()) {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn main() -> Result<ExitCode> {
    let cli = Cli::parse();
    match cli.command {
        Command::Gen(a) => {
            let s = load_scenario(&a.scenario)?;
            match a.out {
                Some(dir) => {
                    fs::create_dir_all(&dir)?;
                    let path = dir.join("scenario.json");
                    fs::write(&path, s.to_json())?;
                    println!("{} intents, {} ACLs -> {}", s.intents.len(), s.acls.acls.len(), path.display());
                }
                None => println!("{}", s.to_json()),
            }
            Ok(ExitCode::SUCCESS)
        }
        Command::Run(a) => {
            let r = pipeline(&a, Stage::Verified)?;
            print_report(&r, &a.out);
            Ok(exit_for(&r))
        }
        Command::Detect(a) => {
            let r = pipeline(&a, Stage::Detected)?;
            print_report(&r, &a.out);
            println!("conflicts {}", a.out.join(CONFLICTS_FILE).display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Plan(a) => {
            let r = pipeline(&a, Stage::Planned)?;
            print_report(&r, &a.out);
            Ok(ExitCode::SUCCESS)
        }
        Command::Verify(a) => {
            if Session::open(RunDir::create(&a.out)?)?.is_none() {
                bail!("no run in {}", a.out.display());
            }
            let r = pipeline(&a, Stage::Verified)?;
            print_report(&r, &a.out);
            Ok(exit_for(&r))
        }
        Command::Serve(a) => {
            let app = AppState::new(
                ServiceConfig { data_dir: a.data_dir.clone(), backend: backend_config(&a.backend), limits: Limits::default() },
                backend(&a.backend)?,
            );
            fs::create_dir_all(&a.data_dir)?;
            println!("serving on http://{} with data in {}", a.addr, a.data_dir.display());
            tokio::runtime::Runtime::new()?.block_on(service::serve(a.addr, app)).with_context(|| format!("serving on {}", a.addr))?;
            Ok(ExitCode::SUCCESS)
        }
    }
}
