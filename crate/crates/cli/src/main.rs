//! `holoslice`: run the built-in transcoding-placement scenarios, compare
//! their reports, or serve the slice-management HTTP interface.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use holoslice_core::catalog::Catalog;
use holoslice_core::monitor::AdapterBackend;
use holoslice_core::net::Topology;
use holoslice_core::scenario::{
    compare, run_scenario, ComparisonReport, ScenarioName, ScenarioOutcome, ScenarioReport,
    ScenarioSpec, ALL_SCENARIOS, JITTER_BOUND_S,
};
use holoslice_core::sim::write_trace_csv;
use holoslice_core::slice::SliceEngine;

#[derive(Parser)]
#[command(
    name = "holoslice",
    version,
    about = "Packet-level simulator of slice provisioning with in-network transcoding"
)]
struct Cli {
    #[command(subcommand)]
    command: CommandKind,
}

#[derive(Subcommand)]
enum CommandKind {
    /// Run scenarios and write per-scenario trace and report files.
    Run(RunArgs),
    /// Compare stored scenario reports and check the jitter bound.
    Compare(CompareArgs),
    /// Serve the slice-management HTTP interface.
    Serve(ServeArgs),
}

#[derive(Args)]
struct RunArgs {
    /// Scenario to run (ec1 | ec2 | hosts | inc_audience | inc_source | all);
    /// repeatable.
    #[arg(long = "scenario", required = true)]
    scenarios: Vec<String>,
    /// Topology config file; defaults to the bundled canonical network.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// Output directory for <scenario>.trace.csv and <scenario>.report.json.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Frames per stream (default 1000).
    #[arg(long)]
    frames: Option<u32>,
    /// Frame size in bytes (default 9000).
    #[arg(long = "frame-size")]
    frame_size: Option<u32>,
    /// Frames per second (default 30).
    #[arg(long)]
    fps: Option<f64>,
    /// Packet MTU in bytes (default 1500).
    #[arg(long)]
    mtu: Option<u32>,
    /// Transcoder output/input size ratio (default 0.4).
    #[arg(long)]
    ratio: Option<f64>,
    /// Stream the full-length hologram (36000 frames).
    #[arg(long)]
    full: bool,
    /// Run the selected scenarios on separate threads.
    #[arg(long)]
    parallel: bool,
    /// No effect: the simulator takes no seed and is deterministic by
    /// construction. Accepted so batch scripts can pass it uniformly.
    #[arg(long)]
    seedless: bool,
}

#[derive(Args)]
struct CompareArgs {
    /// Scenario report JSON files (at least two).
    #[arg(required = true)]
    reports: Vec<PathBuf>,
    /// Output path for the comparison JSON.
    #[arg(long, default_value = "comparison.json")]
    out: PathBuf,
}

#[derive(Args)]
struct ServeArgs {
    /// Listen address (host:port); falls back to HOLOSLICE_ADDR, then
    /// 127.0.0.1:8080.
    #[arg(long)]
    addr: Option<String>,
    /// Topology config file; defaults to the bundled canonical network.
    #[arg(long)]
    topology: Option<PathBuf>,
    /// INC program catalog file; defaults to the bundled catalog.
    #[arg(long)]
    catalog: Option<PathBuf>,
    /// Adapter backend: controller | direct.
    #[arg(long, default_value = "controller")]
    backend: String,
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        CommandKind::Run(args) => run(args),
        CommandKind::Compare(args) => run_compare(args),
        CommandKind::Serve(args) => serve(args),
    }
}

fn load_topology(path: &Option<PathBuf>) -> Result<Topology> {
    match path {
        Some(p) => Topology::load(p).with_context(|| format!("loading topology {}", p.display())),
        None => Ok(Topology::canonical()),
    }
}

fn parse_scenarios(raw: &[String]) -> Result<Vec<ScenarioName>> {
    let mut out = Vec::new();
    for item in raw {
        if item == "all" {
            out.extend(ALL_SCENARIOS);
        } else {
            out.push(item.parse().map_err(anyhow::Error::msg)?);
        }
    }
    out.dedup();
    Ok(out)
}

fn run(args: RunArgs) -> Result<()> {
    let names = parse_scenarios(&args.scenarios)?;
    let topology = load_topology(&args.topology)?;
    let mut specs = Vec::new();
    for name in &names {
        let mut spec = ScenarioSpec::new(*name);
        spec.topology = topology.clone();
        if args.full {
            spec.workload.frames = 36_000;
        }
        if let Some(frames) = args.frames {
            spec.workload.frames = frames;
        }
        if let Some(frame_size) = args.frame_size {
            spec.workload.frame_size = frame_size;
        }
        if let Some(fps) = args.fps {
            spec.workload.fps = fps;
        }
        if let Some(mtu) = args.mtu {
            spec.workload.mtu = mtu;
        }
        if let Some(ratio) = args.ratio {
            spec.ratio = ratio;
        }
        specs.push(spec);
    }

    let outcomes: Vec<ScenarioOutcome> = if args.parallel {
        std::thread::scope(|scope| {
            let handles: Vec<_> = specs
                .iter()
                .map(|spec| scope.spawn(move || run_scenario(spec)))
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("scenario thread"))
                .collect::<Result<Vec<_>, _>>()
        })?
    } else {
        specs
            .iter()
            .map(run_scenario)
            .collect::<Result<Vec<_>, _>>()?
    };

    fs::create_dir_all(&args.out)
        .with_context(|| format!("creating output directory {}", args.out.display()))?;
    for outcome in &outcomes {
        let name = outcome.report.scenario.as_str();
        let trace_path = args.out.join(format!("{name}.trace.csv"));
        let trace = fs::File::create(&trace_path)
            .with_context(|| format!("creating {}", trace_path.display()))?;
        write_trace_csv(std::io::BufWriter::new(trace), &outcome.records)?;
        let report_path = args.out.join(format!("{name}.report.json"));
        fs::write(&report_path, serde_json::to_string_pretty(&outcome.report)?)?;

        let m = &outcome.report.metrics;
        let worst_jitter_ms = m
            .per_dst
            .values()
            .map(|d| d.jitter_s * 1e3)
            .fold(0.0f64, f64::max);
        println!(
            "{name}: delivered {}/{} packets, network load {:.4}, worst jitter {:.3} ms, \
             slice creation {:.2} ms ({} steps) -> {}",
            m.delivered,
            m.injected,
            m.network_load,
            worst_jitter_ms,
            outcome.report.slice_creation.total_ns as f64 / 1e6,
            outcome.report.slice_creation.steps.len(),
            report_path.display()
        );
    }
    Ok(())
}

fn load_report(path: &Path) -> Result<ScenarioReport> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))
}

fn print_comparison(report: &ComparisonReport) {
    println!(
        "workload: {} frames x {} B @ {} fps, mtu {}, transcode ratio {}",
        report.workload.frames,
        report.workload.frame_size,
        report.workload.fps,
        report.workload.mtu,
        report.ratio
    );

    print!("{:<10}", "host");
    for scenario in &report.scenarios {
        print!("{:>16}", scenario.as_str());
    }
    println!();
    for (host, by_scenario) in &report.per_host_latency_s {
        print!("{:<10}", host.as_str());
        for scenario in &report.scenarios {
            match by_scenario.get(scenario) {
                Some(latency) => print!("{:>13.3} ms", latency * 1e3),
                None => print!("{:>16}", "-"),
            }
        }
        println!();
    }

    println!("\nnetwork load (ratio vs {}):", report.scenarios[0]);
    for scenario in &report.scenarios {
        println!(
            "  {:<14} {:.4}  (x{:.3})",
            scenario.as_str(),
            report.network_load[scenario],
            report.load_ratio_vs_first[scenario]
        );
    }

    println!("\njitter bound {} ms:", JITTER_BOUND_S * 1e3);
    for scenario in &report.scenarios {
        let verdict = if report.jitter_within_bound[scenario] {
            "PASS"
        } else {
            "FAIL"
        };
        let worst = report
            .per_host_jitter_s
            .values()
            .filter_map(|m| m.get(scenario))
            .fold(0.0f64, |a, b| a.max(*b));
        println!(
            "  {:<14} worst {:.3} ms  {verdict}",
            scenario.as_str(),
            worst * 1e3
        );
    }
}

fn run_compare(args: CompareArgs) -> Result<()> {
    let reports = args
        .reports
        .iter()
        .map(|p| load_report(p))
        .collect::<Result<Vec<_>>>()?;
    let comparison = compare(&reports)?;
    fs::write(&args.out, serde_json::to_string_pretty(&comparison)?)?;
    print_comparison(&comparison);
    println!("\ncomparison written to {}", args.out.display());
    if comparison.jitter_within_bound.values().any(|ok| !ok) {
        bail!("jitter bound violated in at least one scenario");
    }
    Ok(())
}

fn serve(args: ServeArgs) -> Result<()> {
    let topology = load_topology(&args.topology)?;
    let catalog = match &args.catalog {
        Some(p) => Catalog::load(p).with_context(|| format!("loading catalog {}", p.display()))?,
        None => Catalog::builtin(),
    };
    let backend = match args.backend.as_str() {
        "controller" => AdapterBackend::Controller,
        "direct" => AdapterBackend::DirectDevice,
        other => bail!("unknown backend {other:?}; expected controller or direct"),
    };
    let addr = holoslice_api::resolve_addr(args.addr.as_deref()).map_err(anyhow::Error::msg)?;
    let engine = holoslice_api::shared(SliceEngine::new(topology, catalog, backend));

    println!("serving slice management on http://{addr}");
    let runtime = tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()?;
    runtime.block_on(holoslice_api::serve(addr, engine))?;
    Ok(())
}
