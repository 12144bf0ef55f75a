//! The five built-in transcoding-placement scenarios: provisioning through
//! the slice engine, canonical route verification, simulation, and report
//! comparison.
//!
//! All five scenarios stream the same workload from the streaming server to
//! the five hosts; they differ only in where the transcoder runs:
//!
//! - `ec1`: remote edge server (edge1 behind S3); streams travel
//!   S10-S8-S5-S6-S3 to the edge and fan back out after transcoding.
//! - `ec2`: local edge server (edge2 on S10) next to the streaming server.
//! - `hosts`: no in-network transcoding; receivers transcode after delivery.
//! - `inc_audience`: transcoders in the last switches S11, S1 and S2.
//! - `inc_source`: one transcoder in S10, next to the streaming server.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::catalog::{Catalog, CatalogConfig, ProgramConfig};
use crate::monitor::{AdapterBackend, StatsSnapshot};
use crate::net::{NodeId, PathSpec, Topology, TopologyError};
use crate::sim::{
    self, build_report, FlowSpec, MetricsError, MetricsReport, PacketRecord, SimConfig, SimError,
};
use crate::slice::{
    CreationStep, PlacementStrategy, SliceEngine, SliceError, SliceRecord, SliceRequest, StepCosts,
};
use crate::time::{ns_from_ms, Nanos, NANOS_PER_SEC};

pub const SCENARIO_SCHEMA_VERSION: u32 = 1;
/// Stability bound on jitter for a watchable hologram.
pub const JITTER_BOUND_S: f64 = 0.015;

pub const ALL_SCENARIOS: [ScenarioName; 5] = [
    ScenarioName::Ec1,
    ScenarioName::Ec2,
    ScenarioName::Hosts,
    ScenarioName::IncAudience,
    ScenarioName::IncSource,
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    Ec1,
    Ec2,
    Hosts,
    IncAudience,
    IncSource,
}

impl ScenarioName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Ec1 => "ec1",
            ScenarioName::Ec2 => "ec2",
            ScenarioName::Hosts => "hosts",
            ScenarioName::IncAudience => "inc_audience",
            ScenarioName::IncSource => "inc_source",
        }
    }
}

impl fmt::Display for ScenarioName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ScenarioName {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "ec1" => Ok(ScenarioName::Ec1),
            "ec2" => Ok(ScenarioName::Ec2),
            "hosts" => Ok(ScenarioName::Hosts),
            "inc_audience" => Ok(ScenarioName::IncAudience),
            "inc_source" => Ok(ScenarioName::IncSource),
            other => Err(format!(
                "unknown scenario {other:?}; expected one of ec1, ec2, hosts, inc_audience, inc_source"
            )),
        }
    }
}

/// Stream workload parameters shared by all scenarios of one comparison.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Workload {
    pub frames: u32,
    pub frame_size: u32,
    pub fps: f64,
    pub mtu: u32,
}

impl Default for Workload {
    fn default() -> Self {
        // 1000 frames at 30 fps, 9000 B frames in 1500 B packets: a 2.16 Mbps
        // stream per host, five in parallel under the 12 Mbps links.
        Workload {
            frames: 1000,
            frame_size: 9000,
            fps: 30.0,
            mtu: 1500,
        }
    }
}

impl Workload {
    pub fn frame_interval(&self) -> Nanos {
        (NANOS_PER_SEC as f64 / self.fps).round() as Nanos
    }

    /// Offered rate of one stream copy, bits per second.
    pub fn copy_rate_bps(&self) -> u64 {
        (self.frame_size as f64 * 8.0 * self.fps).round() as u64
    }
}

/// Full configuration of one scenario run.
#[derive(Debug, Clone)]
pub struct ScenarioSpec {
    pub name: ScenarioName,
    pub topology: Topology,
    pub workload: Workload,
    pub ratio: f64,
    pub transcoder_delay_ms: f64,
    pub step_costs: StepCosts,
    pub backend: AdapterBackend,
}

impl ScenarioSpec {
    pub fn new(name: ScenarioName) -> Self {
        ScenarioSpec {
            name,
            topology: Topology::canonical(),
            workload: Workload::default(),
            ratio: 0.4,
            transcoder_delay_ms: 0.2,
            step_costs: StepCosts::default(),
            backend: AdapterBackend::DirectDevice,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SliceCreationSummary {
    pub inc_enabled: bool,
    pub steps: Vec<CreationStep>,
    pub total_ns: Nanos,
}

/// The on-disk scenario result (JSON).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub schema_version: u32,
    pub scenario: ScenarioName,
    pub workload: Workload,
    pub ratio: f64,
    pub slice_creation: SliceCreationSummary,
    pub metrics: MetricsReport,
}

/// In-memory results of one run, including the raw trace.
#[derive(Debug, Clone)]
pub struct ScenarioOutcome {
    pub report: ScenarioReport,
    pub records: Vec<PacketRecord>,
    pub slice: SliceRecord,
    pub snapshot: StatsSnapshot,
}

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error(transparent)]
    Slice(#[from] SliceError),
    #[error(transparent)]
    Sim(#[from] SimError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Topology(#[from] TopologyError),
    #[error("scenario {scenario}: route mismatch: {detail}")]
    RouteMismatch {
        scenario: ScenarioName,
        detail: String,
    },
    #[error("reports compare different workloads: {0}")]
    WorkloadMismatch(String),
    #[error("need at least two reports to compare")]
    NotEnoughReports,
}

// ---------------------------------------------------------------------------
// Canonical routes
// ---------------------------------------------------------------------------

pub const HOSTS: [&str; 5] = ["host1", "host2", "host3", "host4", "host5"];

/// The literal routes each scenario must realize, as switch sequences.
#[derive(Debug, Clone)]
pub struct CanonicalRoutes {
    /// Relay node and the switch sequence of the steering leg toward it.
    pub steering: Option<(&'static str, &'static [&'static str])>,
    /// Per host, the switch sequence of its (post-relay) route.
    pub host_routes: [(&'static str, &'static [&'static str]); 5],
    /// Switches hosting the transcoder, if the scenario is INC-enabled.
    pub placements: &'static [&'static str],
}

const DIRECT_ROUTES: [(&str, &[&str]); 5] = [
    ("host1", &["S10", "S8", "S11"]),
    ("host2", &["S10", "S8", "S11"]),
    ("host3", &["S10", "S7", "S4", "S2"]),
    ("host4", &["S10", "S7", "S4", "S2"]),
    ("host5", &["S10", "S8", "S5", "S1"]),
];

pub fn canonical_routes(name: ScenarioName) -> CanonicalRoutes {
    match name {
        ScenarioName::Ec1 => CanonicalRoutes {
            steering: Some(("edge1", &["S10", "S8", "S5", "S6", "S3"])),
            host_routes: [
                ("host1", &["S3", "S6", "S9", "S11"]),
                ("host2", &["S3", "S6", "S9", "S11"]),
                ("host3", &["S3", "S1", "S2"]),
                ("host4", &["S3", "S1", "S2"]),
                ("host5", &["S3", "S1"]),
            ],
            placements: &[],
        },
        ScenarioName::Ec2 => CanonicalRoutes {
            steering: Some(("edge2", &["S10"])),
            host_routes: DIRECT_ROUTES,
            placements: &[],
        },
        ScenarioName::Hosts => CanonicalRoutes {
            steering: None,
            host_routes: DIRECT_ROUTES,
            placements: &[],
        },
        ScenarioName::IncAudience => CanonicalRoutes {
            steering: None,
            host_routes: DIRECT_ROUTES,
            placements: &["S1", "S11", "S2"],
        },
        ScenarioName::IncSource => CanonicalRoutes {
            steering: None,
            host_routes: DIRECT_ROUTES,
            placements: &["S10"],
        },
    }
}

// ---------------------------------------------------------------------------
// Runner
// ---------------------------------------------------------------------------

fn scenario_catalog(ratio: f64, delay_ms: f64) -> Catalog {
    Catalog::from_config(&CatalogConfig {
        schema_version: 1,
        programs: vec![ProgramConfig {
            name: "transcoder".into(),
            ratio,
            per_packet_delay_ms: delay_ms,
            cpu_cost: 0.05,
        }],
    })
    .expect("scenario transcoder config is valid")
}

fn switch_sequence(path: &PathSpec, topology: &Topology) -> Vec<String> {
    path.switches(topology)
        .map(|n| n.as_str().to_owned())
        .collect()
}

fn check_route_fidelity(
    name: ScenarioName,
    record: &SliceRecord,
    topology: &Topology,
) -> Result<(), ScenarioError> {
    let canonical = canonical_routes(name);
    for (host, expected) in canonical.host_routes {
        let dst = NodeId::from(host);
        let Some(path) = record.paths.get(&dst) else {
            return Err(ScenarioError::RouteMismatch {
                scenario: name,
                detail: format!("no embedded path for {host}"),
            });
        };
        let got = switch_sequence(path, topology);
        if got != expected {
            return Err(ScenarioError::RouteMismatch {
                scenario: name,
                detail: format!("{host}: expected {expected:?}, embedded {got:?}"),
            });
        }
    }
    match (canonical.steering, &record.steering) {
        (None, None) => {}
        (Some((relay, expected)), Some(steering)) => {
            if steering.relay.as_str() != relay {
                return Err(ScenarioError::RouteMismatch {
                    scenario: name,
                    detail: format!("steering relay {} instead of {relay}", steering.relay),
                });
            }
            let got = switch_sequence(&steering.path, topology);
            if got != expected {
                return Err(ScenarioError::RouteMismatch {
                    scenario: name,
                    detail: format!("steering leg: expected {expected:?}, installed {got:?}"),
                });
            }
        }
        (want, got) => {
            return Err(ScenarioError::RouteMismatch {
                scenario: name,
                detail: format!("steering expected {want:?}, installed {got:?}"),
            });
        }
    }
    let mut placed: Vec<&str> = record.placements.iter().map(|p| p.node.as_str()).collect();
    placed.sort_unstable();
    let mut expected: Vec<&str> = canonical.placements.to_vec();
    expected.sort_unstable();
    if placed != expected {
        return Err(ScenarioError::RouteMismatch {
            scenario: name,
            detail: format!("placements {placed:?} instead of {expected:?}"),
        });
    }
    Ok(())
}

/// Provision and simulate one scenario end to end.
pub fn run_scenario(spec: &ScenarioSpec) -> Result<ScenarioOutcome, ScenarioError> {
    let catalog = scenario_catalog(spec.ratio, spec.transcoder_delay_ms);
    let mut engine = SliceEngine::new(spec.topology.clone(), catalog, spec.backend)
        .with_step_costs(spec.step_costs);

    let attendees: Vec<NodeId> = HOSTS.iter().map(|h| NodeId::from(*h)).collect();
    let bandwidth = spec.workload.copy_rate_bps();
    let base_request = |source: &str, inc: bool, placement: PlacementStrategy| SliceRequest {
        bandwidth_bps: bandwidth,
        latency_bound_s: JITTER_BOUND_S,
        max_attendees: attendees.len() as u32,
        attendee_locations: attendees.clone(),
        source: source.into(),
        inc_enabled: inc,
        inc_function: inc.then(|| "transcoder".to_owned()),
        placement,
    };

    let steering_leg =
        |hops: &[&str]| PathSpec::new(hops.iter().map(|h| NodeId::from(*h)).collect::<Vec<_>>());

    // Provision the slice per scenario; edge scenarios steer the stream
    // through the edge server first.
    let record = match spec.name {
        ScenarioName::Hosts => engine.create_slice(base_request(
            "streamsrv",
            false,
            PlacementStrategy::GreedyMinLoad,
        ))?,
        ScenarioName::IncSource => engine.create_slice(base_request(
            "streamsrv",
            true,
            PlacementStrategy::NearSource,
        ))?,
        ScenarioName::IncAudience => engine.create_slice(base_request(
            "streamsrv",
            true,
            PlacementStrategy::NearAudience,
        ))?,
        ScenarioName::Ec2 => {
            let record = engine.create_slice(base_request(
                "streamsrv",
                false,
                PlacementStrategy::GreedyMinLoad,
            ))?;
            engine.install_relay_leg(
                record.slice_id,
                steering_leg(&["streamsrv", "S10", "edge2"]),
                spec.ratio,
                ns_from_ms(spec.transcoder_delay_ms),
            )?
        }
        ScenarioName::Ec1 => {
            // The slice fans out from the remote edge; the steering leg
            // carries the pinned upstream route to it.
            let record = engine.create_slice(base_request(
                "edge1",
                false,
                PlacementStrategy::GreedyMinLoad,
            ))?;
            engine.install_relay_leg(
                record.slice_id,
                steering_leg(&["streamsrv", "S10", "S8", "S5", "S6", "S3", "edge1"]),
                spec.ratio,
                ns_from_ms(spec.transcoder_delay_ms),
            )?
        }
    };

    check_route_fidelity(spec.name, &record, engine.network().topology())?;

    let flow = FlowSpec {
        stream_id: "holo".into(),
        source: "streamsrv".into(),
        destinations: attendees,
        frame_count: spec.workload.frames,
        frame_size: spec.workload.frame_size,
        frame_interval: spec.workload.frame_interval(),
        mtu: spec.workload.mtu,
        tag: record.tag,
        via: record.steering.as_ref().map(|s| s.relay.clone()),
        first_hop: Some("S10".into()),
    };

    let sim_config = SimConfig {
        duration_limit: flow.stream_span() + 60 * NANOS_PER_SEC,
    };
    let outcome = sim::run(
        engine.network().topology(),
        engine.network().switches(),
        engine.network().relays(),
        &[flow],
        &sim_config,
    )?;

    engine.record_carried(&outcome.channel_bytes);
    let snapshot = engine.collect_stats().map_err(SliceError::Adapter)?;
    let metrics = build_report(&outcome, engine.network().topology())?;

    let report = ScenarioReport {
        schema_version: SCENARIO_SCHEMA_VERSION,
        scenario: spec.name,
        workload: spec.workload,
        ratio: spec.ratio,
        slice_creation: SliceCreationSummary {
            inc_enabled: record.request.inc_enabled,
            steps: record.creation_steps.clone(),
            total_ns: record.creation_time(),
        },
        metrics,
    };

    Ok(ScenarioOutcome {
        report,
        records: outcome.records,
        slice: record,
        snapshot,
    })
}

// ---------------------------------------------------------------------------
// Comparison
// ---------------------------------------------------------------------------

/// Cross-scenario digest: per-host latency/jitter tables, load ratios, and
/// the jitter-bound verdicts. Entirely derived from the stored reports.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub schema_version: u32,
    pub workload: Workload,
    pub ratio: f64,
    pub jitter_bound_s: f64,
    pub scenarios: Vec<ScenarioName>,
    pub per_host_latency_s: BTreeMap<NodeId, BTreeMap<ScenarioName, f64>>,
    pub per_host_jitter_s: BTreeMap<NodeId, BTreeMap<ScenarioName, f64>>,
    /// Whether every host of the scenario stays within the jitter bound.
    pub jitter_within_bound: BTreeMap<ScenarioName, bool>,
    pub network_load: BTreeMap<ScenarioName, f64>,
    /// Load of each scenario divided by the load of the first input report.
    pub load_ratio_vs_first: BTreeMap<ScenarioName, f64>,
    /// Per host, scenarios ordered by ascending average latency; equal
    /// latencies keep input order (visible as equal table values).
    pub latency_order_per_host: BTreeMap<NodeId, Vec<ScenarioName>>,
}

pub fn compare(reports: &[ScenarioReport]) -> Result<ComparisonReport, ScenarioError> {
    if reports.len() < 2 {
        return Err(ScenarioError::NotEnoughReports);
    }
    let first = &reports[0];
    for report in &reports[1..] {
        if report.workload != first.workload {
            return Err(ScenarioError::WorkloadMismatch(format!(
                "{} ran {:?}, {} ran {:?}",
                first.scenario, first.workload, report.scenario, report.workload
            )));
        }
        if report.ratio != first.ratio {
            return Err(ScenarioError::WorkloadMismatch(format!(
                "{} used ratio {}, {} used ratio {}",
                first.scenario, first.ratio, report.scenario, report.ratio
            )));
        }
    }

    let mut per_host_latency: BTreeMap<NodeId, BTreeMap<ScenarioName, f64>> = BTreeMap::new();
    let mut per_host_jitter: BTreeMap<NodeId, BTreeMap<ScenarioName, f64>> = BTreeMap::new();
    let mut jitter_ok = BTreeMap::new();
    let mut load = BTreeMap::new();
    let mut load_ratio = BTreeMap::new();
    for report in reports {
        let mut all_within = true;
        for (dst, metrics) in &report.metrics.per_dst {
            per_host_latency
                .entry(dst.clone())
                .or_default()
                .insert(report.scenario, metrics.avg_latency_s);
            per_host_jitter
                .entry(dst.clone())
                .or_default()
                .insert(report.scenario, metrics.jitter_s);
            all_within &= metrics.jitter_s < JITTER_BOUND_S;
        }
        jitter_ok.insert(report.scenario, all_within);
        load.insert(report.scenario, report.metrics.network_load);
        load_ratio.insert(
            report.scenario,
            report.metrics.network_load / first.metrics.network_load,
        );
    }

    let mut order = BTreeMap::new();
    for (host, by_scenario) in &per_host_latency {
        let mut entries: Vec<(ScenarioName, f64)> = reports
            .iter()
            .filter_map(|r| by_scenario.get(&r.scenario).map(|l| (r.scenario, *l)))
            .collect();
        entries.sort_by(|a, b| a.1.partial_cmp(&b.1).expect("latencies are finite"));
        order.insert(host.clone(), entries.into_iter().map(|(s, _)| s).collect());
    }

    Ok(ComparisonReport {
        schema_version: SCENARIO_SCHEMA_VERSION,
        workload: first.workload,
        ratio: first.ratio,
        jitter_bound_s: JITTER_BOUND_S,
        scenarios: reports.iter().map(|r| r.scenario).collect(),
        per_host_latency_s: per_host_latency,
        per_host_jitter_s: per_host_jitter,
        jitter_within_bound: jitter_ok,
        network_load: load,
        load_ratio_vs_first: load_ratio,
        latency_order_per_host: order,
    })
}
