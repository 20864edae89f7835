use std::error::Error;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;

use clap::{Args, Parser, Subcommand};
use foamagent::config::{AgentConfig, ExecutorMode};
use foamagent::kb::{export_database, ingest_tree, KnowledgeBase};
use foamagent::llm::{ChatProvider, Gateway, MockProvider, OpenAiProvider, RetryPolicy};
use foamagent::runner::RunStatus;
use foamagent::session::{router, SessionService};

type CliResult<T> = Result<T, Box<dyn Error>>;

#[derive(Parser)]
#[command(name = "foamagent", version, about = "Configure and run OpenFOAM cases from a case description")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Tutorial knowledge base
    #[command(subcommand)]
    Kb(KbCommand),
    /// Headless run: document → case → mesh → reflection loop
    Run(RunArgs),
    /// Session HTTP API
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum KbCommand {
    /// Ingest a tutorial tree into a database file
    Build {
        tree: PathBuf,
        #[arg(short, long)]
        output: PathBuf,
    },
    /// Print the files a solver/model combination requires
    Query {
        #[arg(long)]
        kb: Option<PathBuf>,
        #[arg(long)]
        solver: String,
        #[arg(long)]
        model: Option<String>,
        #[arg(long)]
        thermo: Option<String>,
    },
}

#[derive(Args)]
struct Common {
    /// Knowledge-base database; the bundled tables when absent
    #[arg(long)]
    kb: Option<PathBuf>,
    /// TOML configuration file
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory holding session workspaces
    #[arg(long, default_value = "sessions")]
    workspace: PathBuf,
    /// Replay LLM answers from a JSON script instead of calling endpoints
    #[arg(long)]
    mock_script: Option<PathBuf>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    doc: PathBuf,
    #[arg(long)]
    mesh: PathBuf,
    #[arg(long, default_value = "Case 1")]
    select: String,
    /// Simulated executor and scripted LLM; requires --mock-script
    #[arg(long)]
    dry_run: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args)]
struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    addr: String,
    #[command(flatten)]
    common: Common,
}

fn load_kb(path: Option<&Path>) -> CliResult<KnowledgeBase> {
    Ok(match path {
        Some(p) => KnowledgeBase::load(p)?,
        None => KnowledgeBase::default(),
    })
}

fn service(common: &Common, force_simulated: bool) -> CliResult<Arc<SessionService>> {
    let mut cfg = AgentConfig::load(common.config.as_deref())?;
    if force_simulated {
        cfg.executor = ExecutorMode::Simulated;
    }
    let provider: Arc<dyn ChatProvider> = match &common.mock_script {
        Some(p) => Arc::new(MockProvider::from_file(p)?),
        None => Arc::new(OpenAiProvider::new(cfg.reasoner.clone(), cfg.editor.clone())?),
    };
    let retry = RetryPolicy {
        max_attempts: cfg.llm_attempts.max(1),
        ..RetryPolicy::default()
    };
    let gateway = Gateway::new(provider).with_retry(retry).with_prices(cfg.prices);
    let kb = load_kb(common.kb.as_deref())?;
    std::fs::create_dir_all(&common.workspace)?;
    Ok(Arc::new(SessionService::new(&common.workspace, Arc::new(kb), gateway, cfg.executor.build(), cfg.run)))
}

fn run(args: RunArgs) -> CliResult<ExitCode> {
    if args.dry_run && args.common.mock_script.is_none() {
        return Err("--dry-run needs --mock-script".into());
    }
    let svc = service(&args.common, args.dry_run)?;
    let text = std::fs::read_to_string(&args.doc).map_err(|e| format!("{}: {e}", args.doc.display()))?;
    let bytes = std::fs::read(&args.mesh).map_err(|e| format!("{}: {e}", args.mesh.display()))?;
    let mesh_name = args.mesh.file_name().and_then(|n| n.to_str()).unwrap_or("mesh.msh");

    let id = svc.create()?.id;
    eprintln!("session {id}");
    for c in svc.submit_document(&id, &text)? {
        eprintln!("  {}: {}", c.label, c.summary);
    }
    let spec = svc.select_case(&id, &args.select, &[])?;
    eprintln!("{}", serde_json::to_string_pretty(&spec)?);
    svc.confirm(&id)?;
    let check = svc.attach_mesh(&id, mesh_name, &bytes)?;
    eprintln!("mesh patches: {}", check.patches.join(", "));

    let (_, mut rx) = svc.subscribe(&id, u64::MAX)?;
    let printer = std::thread::spawn(move || {
        while let Ok(r) = rx.blocking_recv() {
            eprintln!("[{}] {}", r.seq, r.event.kind());
            if r.event.is_terminal() {
                break;
            }
        }
    });
    svc.launch(&id, None)?.join().map_err(|_| "run worker panicked")?;
    let _ = printer.join();

    let view = svc.view(&id)?;
    if let Some(cause) = &view.failure {
        eprintln!("failed: {cause}");
    }
    match view.outcome {
        Some(o) => {
            println!("{}", serde_json::to_string_pretty(&o)?);
            Ok(if o.status == RunStatus::TenStepSuccess {
                ExitCode::SUCCESS
            } else {
                ExitCode::FAILURE
            })
        }
        None => Ok(ExitCode::FAILURE),
    }
}

fn serve(args: ServeArgs) -> CliResult<ExitCode> {
    let svc = service(&args.common, false)?;
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(&args.addr).await?;
        log::info!("listening on {}", listener.local_addr()?);
        axum::serve(listener, router(svc)).await
    })?;
    Ok(ExitCode::SUCCESS)
}

fn kb(cmd: KbCommand) -> CliResult<ExitCode> {
    match cmd {
        KbCommand::Build { tree, output } => {
            let kb = ingest_tree(&tree)?;
            std::fs::write(&output, export_database(&kb))?;
            eprintln!("{} cases kept, {} dropped", kb.cases.len(), kb.dropped.len());
        }
        KbCommand::Query { kb, solver, model, thermo } => {
            let kb = load_kb(kb.as_deref())?;
            for p in kb.required_files(&solver, model.as_deref(), thermo.as_deref())?.iter() {
                println!("{p}");
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Kb(c) => kb(c),
        Command::Run(a) => run(a),
        Command::Serve(a) => serve(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
