use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Duration;

use clap::{Args, Parser, Subcommand};
use hearth::agents::router::Preset;
use hearth::bench::{export_csv, run_bench, summarize, summary_table, ConfigId};
use hearth::devices::http::HttpEndpoint;
use hearth::devices::{threat_schedule, FaultScenario};
use hearth::orchestrator::anchor::first_failure;
use hearth::orchestrator::{verify_store_dir, AgentBackend, CycleConfig, Mode, Session, TickMode};
use hearth_server::{router, AppState};

#[derive(Parser)]
#[command(
    name = "hearth",
    version,
    about = "Smart-home agents on an adaptive proof-of-work ledger"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a session to completion and print its report.
    Run(RunArgs),
    /// Mine the five difficulty configurations over the synthetic workload.
    Bench(BenchArgs),
    /// Inspect a saved session.
    Chain {
        #[command(subcommand)]
        command: ChainCommand,
    },
    /// Serve the HTTP API over a fresh session.
    Serve(ServeArgs),
}

#[derive(Subcommand)]
enum ChainCommand {
    /// Validate the chain and every anchor receipt in a store directory.
    Verify {
        #[arg(long)]
        store: PathBuf,
    },
}

#[derive(Args)]
struct SessionArgs {
    #[arg(long, default_value = "sim")]
    mode: Mode,
    #[arg(long, default_value = "balanced")]
    preset: Preset,
    #[arg(long, default_value_t = 30)]
    cycles: u64,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// JSON list of device endpoints for real and hybrid modes.
    #[arg(long)]
    devices: Option<PathBuf>,
    #[arg(long, default_value_t = 5)]
    anchor_every: u64,
}

#[derive(Args)]
struct RunArgs {
    #[command(flatten)]
    session: SessionArgs,
    /// Collapse tick intervals onto a simulated clock.
    #[arg(long)]
    fast: bool,
    /// JSON list of fault scenarios, or `threat` for the built-in schedule.
    #[arg(long)]
    faults: Option<String>,
    /// Directory to save the store, chain and report into.
    #[arg(long)]
    store: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    /// A to E, or `all`.
    #[arg(long, default_value = "all")]
    config: String,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// CSV destination; standard output when absent.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Run each configuration's runs on separate threads.
    #[arg(long)]
    parallel: bool,
}

#[derive(Args)]
struct ServeArgs {
    #[command(flatten)]
    session: SessionArgs,
    #[arg(long, default_value_t = 8001)]
    port: u16,
    #[arg(long, default_value = "127.0.0.1")]
    host: String,
    /// Pause between cycles once started, in milliseconds.
    #[arg(long, default_value_t = 500)]
    pace_ms: u64,
    /// Use wall-clock tick intervals instead of the simulated clock.
    #[arg(long)]
    realtime: bool,
}

type CliResult = Result<ExitCode, String>;

fn load_endpoints(path: Option<&Path>) -> Result<Vec<HttpEndpoint>, String> {
    let Some(p) = path else { return Ok(Vec::new()) };
    let text = std::fs::read_to_string(p).map_err(|e| format!("{}: {e}", p.display()))?;
    serde_json::from_str(&text).map_err(|e| format!("{}: {e}", p.display()))
}

fn load_faults(spec: Option<&str>) -> Result<Vec<FaultScenario>, String> {
    match spec {
        None => Ok(Vec::new()),
        Some("threat") => Ok(threat_schedule()),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(|e| format!("{p}: {e}"))?;
            serde_json::from_str(&text).map_err(|e| format!("{p}: {e}"))
        }
    }
}

fn build_session(a: &SessionArgs, tick_mode: TickMode) -> Result<Session, String> {
    let config = CycleConfig {
        mode: a.mode,
        preset: a.preset,
        cycles: a.cycles,
        seed: a.seed,
        anchor_every: a.anchor_every,
        tick_mode,
        ..CycleConfig::default()
    };
    let endpoints = load_endpoints(a.devices.as_deref())?;
    Session::for_mode(config, endpoints, AgentBackend::default()).map_err(|e| e.to_string())
}

fn run(a: RunArgs) -> CliResult {
    let tick_mode = if a.fast { TickMode::Fast } else { TickMode::Realtime };
    let mut session = build_session(&a.session, tick_mode)?;
    for f in load_faults(a.faults.as_deref())? {
        session.inject_fault(f).map_err(|e| e.to_string())?;
    }
    let mut error = None;
    for _ in 0..a.session.cycles {
        if let Err(e) = session.run_cycle() {
            error = Some(e.to_string());
            break;
        }
    }
    let mut report = session.finish().map_err(|e| e.to_string())?;
    report.error = error;
    print!("{}", report.to_text());
    if let Some(dir) = &a.store {
        std::fs::create_dir_all(dir).map_err(|e| format!("{}: {e}", dir.display()))?;
        session.save(dir).map_err(|e| e.to_string())?;
        println!("store saved to {}", dir.display());
    }
    Ok(if report.chain_valid && report.error.is_none() {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    })
}

fn bench(a: BenchArgs) -> CliResult {
    let configs: Vec<ConfigId> = if a.config.eq_ignore_ascii_case("all") {
        ConfigId::ALL.to_vec()
    } else {
        vec![a.config.parse()?]
    };
    let mut all = Vec::new();
    let mut summaries = Vec::new();
    for c in configs {
        let runs = run_bench(c, a.runs, a.seed, a.parallel);
        summaries.push(summarize(c, &runs));
        all.extend(runs);
    }
    let table = summary_table(&summaries);
    match &a.out {
        Some(p) => {
            let f = File::create(p).map_err(|e| format!("{}: {e}", p.display()))?;
            export_csv(&all, BufWriter::new(f)).map_err(|e| e.to_string())?;
            print!("{table}");
        }
        None => {
            export_csv(&all, io::stdout().lock()).map_err(|e| e.to_string())?;
            eprint!("{table}");
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn verify(store: &Path) -> CliResult {
    let v = verify_store_dir(store).map_err(|e| format!("{}: {e}", store.display()))?;
    let mut out = io::stdout().lock();
    let _ = writeln!(
        out,
        "chain: {} blocks checked, valid={}",
        v.chain.blocks_checked, v.chain.valid
    );
    if let (Some(i), Some(f)) = (v.chain.first_invalid, &v.chain.fault) {
        let _ = writeln!(out, "chain fails at block {i}: {f}");
    }
    for a in &v.anchors {
        let _ = writeln!(
            out,
            "anchor {} ({}, block {}): {}",
            a.seq,
            a.anchor_tx_id,
            a.block_index,
            if a.valid { "ok" } else { "TAMPERED" }
        );
    }
    if let Some(bad) = first_failure(&v.anchors) {
        let tables: Vec<&str> = bad.tampered.iter().map(|t| t.as_str()).collect();
        eprintln!(
            "verification failed: receipt {} ({}) covers modified records in {}",
            bad.seq,
            bad.anchor_tx_id,
            tables.join(", ")
        );
    }
    Ok(if v.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
}

fn serve(a: ServeArgs) -> CliResult {
    let tick_mode = if a.realtime { TickMode::Realtime } else { TickMode::Fast };
    let session = build_session(&a.session, tick_mode)?;
    let addr: SocketAddr = format!("{}:{}", a.host, a.port)
        .parse()
        .map_err(|e| format!("bad address: {e}"))?;
    let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(addr)
            .await
            .map_err(|e| format!("cannot bind {addr}: {e}"))?;
        eprintln!("listening on http://{addr} ({} mode)", a.session.mode);
        let state = AppState::new(session, Duration::from_millis(a.pace_ms));
        axum::serve(listener, router(state)).await.map_err(|e| e.to_string())
    })?;
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Run(a) => run(a),
        Command::Bench(a) => bench(a),
        Command::Chain {
            command: ChainCommand::Verify { store },
        } => verify(&store),
        Command::Serve(a) => serve(a),
    };
    result.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(2)
    })
}
