//! Fixed-timestep engine.
//!
//! Every tick runs the same phases over all UEs in ascending id order:
//! mobility, radio, measurement reports, ANR, event evaluation, handover
//! and RLF timers, then metrics. Randomness comes from the scenario seed
//! through per-UE streams (mobility, ANR decoding, link draws), so a UE's
//! draws do not depend on where it sits in the roster.

mod config;
mod metrics;
mod output;
mod sweep;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::analysis::{EventRecord, ExternalTrace, RecordType, TraceRow};
use crate::anr::{
    commit_resolution, on_report, reconnect_add, removal_sweep, resolve_ecgi, ulid_add, AddMechanism, AnrAction, Nrt,
    ResolveContext, ResolveResult,
};
use crate::geo::{self, LinkDraw, LosMode};
use crate::handover::{
    effective_a3_offset, force_rlf, on_mobility_event, tick_connection, ConnState, HoAttempt, HoOutcome, UeConnection,
};
use crate::mobility::{step_position, UeKinematics};
use crate::rrm::{take_measurements, EventConfig, EventEvaluator, MeasurementReport, RrcMode, UeRadioView};
use crate::topology::Topology;
use crate::{Ecgi, UeId, UeKind};

pub use config::{Mitigation, Mitigations, NrtEntry, PerKind, ScenarioConfig, TopologySpec, UeSpec};
pub use metrics::{AltitudeMetrics, KindMetrics, MetricsReport, NrtMetrics, NrtSample, NrtSeriesPoint, UeMetrics};
pub use output::{write_nrt_stats, write_outputs, OUTPUT_FILES};
pub use sweep::{run_sweep, sweep_configs, SweepAxis, SweepRun};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("cannot parse scenario: {0}")]
    Parse(String),
    #[error("invalid scenario: {0}")]
    Validation(String),
    #[error("runtime error: {0}")]
    Runtime(String),
}

impl SimError {
    pub fn exit_code(&self) -> i32 {
        match self {
            SimError::Parse(_) | SimError::Validation(_) => 2,
            SimError::Runtime(_) => 3,
        }
    }
}

const GOLDEN: u64 = 0x9E37_79B9_7F4A_7C15;

/// splitmix64 finaliser.
fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of run `index` derived from `seed`: splitmix64(seed + (index + 1) * φ64).
/// Also used for the per-UE streams inside a run.
pub fn sub_seed(seed: u64, index: u64) -> u64 {
    mix64(seed.wrapping_add(index.wrapping_add(1).wrapping_mul(GOLDEN)))
}

/// Shortest UE-antenna distance the radio model is evaluated at.
pub const MIN_LINK_M: f64 = 1.0;

const STREAM_MOBILITY: u64 = 1 << 40;
const STREAM_ANR: u64 = 2 << 40;
const STREAM_LINK: u64 = 3 << 40;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    /// Keep the per-tick trace CSV in memory.
    pub record_trace: bool,
}

impl Default for RunOptions {
    fn default() -> Self {
        Self { record_trace: true }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutput {
    pub metrics: MetricsReport,
    pub events: Vec<EventRecord>,
    /// Per-tick trace CSV (empty when not recorded).
    pub trace_csv: Vec<u8>,
    /// Ground-truth UAV samples in the external trace format.
    pub uav_trace: ExternalTrace,
    pub nrt_samples: Vec<NrtSample>,
}

impl RunOutput {
    pub fn metrics_json(&self) -> String {
        self.metrics.to_json()
    }
}

pub fn run(cfg: &ScenarioConfig) -> Result<RunOutput, SimError> {
    run_with(cfg, &RunOptions::default())
}

pub fn run_with(cfg: &ScenarioConfig, opts: &RunOptions) -> Result<RunOutput, SimError> {
    cfg.validate()?;
    Engine::new(cfg.effective(), *opts)?.run()
}

struct UeState {
    spec: UeSpec,
    kin: UeKinematics,
    conn: UeConnection,
    evaluator: EventEvaluator,
    event_cfg: EventConfig,
    mob_rng: ChaCha8Rng,
    anr_rng: ChaCha8Rng,
    link_rng: ChaCha8Rng,
    draws: Vec<LinkDraw>,
    last_draw_at: Option<geo::Position>,
    rsrp: Vec<f64>,
    open_drop: Option<usize>,
    attempts: Vec<HoAttempt>,
    m: UeMetrics,
}

struct Engine {
    cfg: ScenarioConfig,
    opts: RunOptions,
    topology: Topology,
    nrts: BTreeMap<Ecgi, Nrt>,
    ues: Vec<UeState>,
    index: BTreeMap<UeId, usize>,
    records: Vec<EventRecord>,
    trace: csv::Writer<Vec<u8>>,
    uav_rows: Vec<TraceRow>,
    nrt_samples: Vec<NrtSample>,
    removals: u64,
    draws_needed: bool,
}

fn runtime(e: impl std::fmt::Display) -> SimError {
    SimError::Runtime(e.to_string())
}

impl Engine {
    fn new(cfg: ScenarioConfig, opts: RunOptions) -> Result<Self, SimError> {
        let topology = cfg.topology.build()?;
        let mut nrts: BTreeMap<Ecgi, Nrt> =
            topology.cells.iter().map(|c| (c.ecgi, Nrt::new(c.ecgi, &cfg.anr))).collect();
        for e in &cfg.initial_nrt {
            let nrt = nrts.get_mut(&e.owner).expect("validated owner");
            let table = nrt.table_mut(e.table).ok_or_else(|| SimError::Validation("aerial table disabled".into()))?;
            table.insert_relation(e.pci, e.ecgi, 0.0);
        }

        let mut specs = cfg.ues.clone();
        specs.sort_by_key(|u| u.id);
        let draws_needed = cfg.params.los_mode == LosMode::Sampled || cfg.params.shadowing_sigma_db > 0.0;
        let mut ues = Vec::with_capacity(specs.len());
        for spec in specs {
            let id = spec.id.0 as u64;
            let mut mob_rng = ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_MOBILITY | id));
            let kin = spec.mobility.initial_kinematics(&mut mob_rng).map_err(runtime)?;
            let event_cfg = cfg.events.get(spec.kind).clone();
            let evaluator =
                EventEvaluator::new(&event_cfg, spec.secondary_pci).map_err(|e| SimError::Validation(e.to_string()))?;
            let mut ue = UeState {
                conn: UeConnection::new(spec.id, Ecgi(0)),
                m: UeMetrics::new(spec.id, spec.kind, spec.radio),
                kin,
                evaluator,
                event_cfg,
                mob_rng,
                anr_rng: ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_ANR | id)),
                link_rng: ChaCha8Rng::seed_from_u64(sub_seed(cfg.seed, STREAM_LINK | id)),
                draws: vec![LinkDraw::default(); topology.cells.len()],
                last_draw_at: None,
                rsrp: vec![f64::NEG_INFINITY; topology.cells.len()],
                open_drop: None,
                attempts: Vec::new(),
                spec,
            };
            radio_update(&mut ue, &topology, &cfg, draws_needed)?;
            let serving = match ue.spec.initial_serving {
                Some(e) => e,
                None => strongest_cell(&ue.rsrp, &topology, f64::NEG_INFINITY)
                    .ok_or_else(|| SimError::Validation("topology has no cells".into()))?,
            };
            ue.conn = UeConnection::new(ue.spec.id, serving);
            ues.push(ue);
        }
        let index = ues.iter().enumerate().map(|(i, u)| (u.spec.id, i)).collect();

        let mut trace = csv::Writer::from_writer(Vec::new());
        if opts.record_trace {
            trace
                .write_record(["time_s", "ue_id", "x", "y", "z", "serving_ecgi", "strongest_ecgi", "ranked_pci_rsrp"])
                .map_err(runtime)?;
        }
        Ok(Self {
            cfg,
            opts,
            topology,
            nrts,
            ues,
            index,
            records: Vec::new(),
            trace,
            uav_rows: Vec::new(),
            nrt_samples: Vec::new(),
            removals: 0,
            draws_needed,
        })
    }

    fn run(mut self) -> Result<RunOutput, SimError> {
        let dt = self.cfg.dt_s;
        let ticks = ((self.cfg.duration_s + crate::TIME_EPS) / dt).floor() as u64;
        let report_every = ((self.cfg.meas.report_period_s / dt).round() as u64).max(1);
        let nrt_every = ((self.cfg.nrt_sample_every_s / dt).round() as u64).max(1);
        let trace_every = self.cfg.trace_every as u64;
        for i in 1..=ticks {
            let now = i as f64 * dt;
            self.tick(now, i % report_every == 0)?;
            if i % trace_every == 0 {
                self.record_samples(now)?;
            }
            if i % nrt_every == 0 {
                self.sample_nrts(now);
            }
        }
        self.finish(ticks)
    }

    fn tick(&mut self, now: f64, report_tick: bool) -> Result<(), SimError> {
        let dt = self.cfg.dt_s;
        let was_disconnected: Vec<bool> = self.ues.iter().map(|u| u.conn.state.is_disconnected()).collect();

        // (1) mobility, (2) radio
        for ue in &mut self.ues {
            ue.kin = step_position(&ue.kin, &ue.spec.mobility, dt, &mut ue.mob_rng).map_err(runtime)?;
            radio_update(ue, &self.topology, &self.cfg, self.draws_needed)?;
        }

        // (3) measurement reports
        let mut reports: Vec<Option<MeasurementReport>> = vec![None; self.ues.len()];
        if report_tick {
            for (k, ue) in self.ues.iter().enumerate() {
                if !matches!(ue.conn.state, ConnState::Connected { .. } | ConnState::HoPrep(_)) {
                    continue;
                }
                let view = UeRadioView {
                    ue_id: ue.spec.id,
                    serving: ue.conn.state.serving(),
                    rsrp_dbm: &ue.rsrp,
                    inter_layer_active: ue.conn.inter_meas_active,
                    decodes_ecgi: self.cfg.anr.always_resolve_ecgi
                        && ue.spec.radio == crate::rrm::RadioCapability::Dual,
                };
                let r = take_measurements(
                    &view,
                    &self.topology,
                    &self.cfg.params,
                    &self.cfg.meas,
                    RrcMode::Connected,
                    ue.spec.radio,
                    now,
                )
                .map_err(runtime)?;
                reports[k] = Some(r);
            }
        }

        // (4) ANR: finished resolutions first, then the new reports
        self.advance_resolutions(now)?;
        for (k, report) in reports.iter().enumerate() {
            let Some(report) = report else { continue };
            self.process_report(k, report, now)?;
        }
        if report_tick {
            for nrt in self.nrts.values_mut() {
                self.removals += removal_sweep(nrt, now, &self.cfg.anr).removed.len() as u64;
            }
        }

        // (5) events, (6) handover decisions
        for (k, report) in reports.iter().enumerate() {
            let Some(report) = report else { continue };
            self.evaluate(k, report, now)?;
        }

        // (6/7) handover timers and radio link monitoring
        for k in 0..self.ues.len() {
            self.advance_connection(k, now)?;
        }

        // (8) time accounting; state during (now - dt, now] is the one held at its start
        for (ue, &was_off) in self.ues.iter_mut().zip(&was_disconnected) {
            if was_off {
                ue.m.disconnected_s += dt;
            } else {
                ue.m.connected_s += dt;
            }
        }
        Ok(())
    }

    fn protected_targets(&self) -> BTreeSet<Ecgi> {
        self.ues
            .iter()
            .filter_map(|u| match u.conn.state {
                ConnState::HoPrep(p) | ConnState::HoExec(p) => Some(p.target),
                _ => None,
            })
            .collect()
    }

    fn advance_resolutions(&mut self, now: f64) -> Result<(), SimError> {
        let expiry = 2.0 * self.cfg.meas.decode_deadline_s();
        let protected = self.protected_targets();
        let owners: Vec<Ecgi> = self.nrts.keys().copied().collect();
        for owner in owners {
            let due = self.nrts.get_mut(&owner).expect("known owner").take_due(now, expiry);
            for p in due {
                let Some(&k) = self.index.get(&p.ue) else { continue };
                let kind = self.ues[k].spec.kind;
                match p.outcome.map(|o| o.result) {
                    Some(ResolveResult::Resolved(ecgi)) => {
                        let nrt = self.nrts.get_mut(&owner).expect("known owner");
                        commit_resolution(nrt, p.pci, ecgi, now, kind, &self.cfg.anr, &protected);
                    }
                    Some(ResolveResult::Failed { dropped: true }) => {
                        let ue = &mut self.ues[k];
                        if ue.conn.state.serving() == Some(owner) {
                            if let Some(from) = force_rlf(&mut ue.conn, now) {
                                open_drop(&mut self.records, ue, now, from, "EcgiDecodeFailure");
                            }
                        }
                    }
                    _ => {}
                }
            }
        }
        Ok(())
    }

    fn process_report(&mut self, k: usize, report: &MeasurementReport, now: f64) -> Result<(), SimError> {
        let ue = &mut self.ues[k];
        let Some(serving) = ue.conn.state.serving() else { return Ok(()) };
        if report.serving.as_ref().map(|s| s.ecgi) != Some(serving) {
            return Ok(());
        }
        let policy = &self.cfg.anr;
        let kind = ue.spec.kind;
        let nrt = self.nrts.get_mut(&serving).expect("serving cell has an NRT");
        let actions = on_report(nrt, report, kind, policy).map_err(runtime)?;
        let table = policy.table_for(kind);
        let ctx =
            ResolveContext { mode: RrcMode::Connected, radio: ue.spec.radio, data_activity: ue.spec.data_activity };
        for action in actions {
            match action {
                AnrAction::RequestEcgi(pci) if policy.add_mechanisms.contains(&AddMechanism::MeasurementBased) => {
                    let Some(cell) = report.cells.iter().find(|c| c.pci == pci) else { continue };
                    if !nrt.request_ecgi(table, pci, ue.spec.id, cell.true_ecgi, now) {
                        continue;
                    }
                    let outcome =
                        resolve_ecgi(nrt, table, pci, &ctx, &self.cfg.meas, &mut ue.anr_rng).map_err(runtime)?;
                    ue.m.ecgi_requests += 1;
                    ue.m.gap_interruption_s += outcome.interruption_s;
                    nrt.schedule(table, pci, outcome).map_err(runtime)?;
                }
                AnrAction::ConfusionLatent { .. } => ue.m.latent_confusions += 1,
                _ => {}
            }
        }
        let pos = ue.kin.position;
        ulid_add(&self.topology, &mut self.nrts, &pos, serving, kind, policy, &self.cfg.params, now);
        Ok(())
    }

    fn evaluate(&mut self, k: usize, report: &MeasurementReport, now: f64) -> Result<(), SimError> {
        let ue = &mut self.ues[k];
        let Some(serving) = ue.conn.state.serving() else { return Ok(()) };
        if report.serving.as_ref().map(|s| s.ecgi) != Some(serving) {
            return Ok(());
        }
        let base = self.cfg.events.get(ue.spec.kind).a3_offset_db;
        ue.event_cfg.a3_offset_db = effective_a3_offset(ue.spec.kind, ue.kin.position.z, base, &self.cfg.ho);
        let events = ue.evaluator.step(report, &ue.event_cfg);
        let table = self.cfg.anr.table_for(ue.spec.kind);
        for ev in events {
            let Some(serving) = ue.conn.state.serving() else { break };
            let nrt = &self.nrts[&serving];
            let attempt = on_mobility_event(&mut ue.conn, &ev, nrt, table, now).map_err(runtime)?;
            if let Some(a) = attempt {
                if a.outcome == HoOutcome::FailureNoNrtEntry {
                    // retry once ANR has had a chance to learn the cell
                    if let Some(t) = &ev.target {
                        ue.evaluator.rearm(ev.kind, t);
                    }
                }
                log_attempt(&mut self.records, ue, a);
            }
        }
        Ok(())
    }

    fn advance_connection(&mut self, k: usize, now: f64) -> Result<(), SimError> {
        let ue = &mut self.ues[k];
        let sinr = ue.conn.state.serving().and_then(|s| self.topology.index_of(s)).map(|si| {
            let layer = self.topology.cells[si].freq_layer;
            let interferers = self
                .topology
                .cells
                .iter()
                .enumerate()
                .filter(|&(j, c)| j != si && c.freq_layer == layer)
                .map(|(j, _)| ue.rsrp[j]);
            geo::sinr_from_powers(ue.rsrp[si], interferers, &self.cfg.params)
        });
        let strongest = strongest_cell(&ue.rsrp, &self.topology, self.cfg.params.detection_threshold_dbm);
        let out = tick_connection(&mut ue.conn, sinr, strongest, &self.cfg.ho, &self.cfg.rlf, now);
        let confusion = out.attempt.as_ref().is_some_and(|a| a.outcome == HoOutcome::FailureConfusion);
        if let Some(a) = out.attempt {
            if a.outcome == HoOutcome::Success {
                ue.evaluator.reset();
                ue.m.ho_interruption_s += a.interruption_s;
            }
            log_attempt(&mut self.records, ue, a);
        }
        if let Some(from) = out.dropped_from {
            open_drop(&mut self.records, ue, now, from, if confusion { "PciConfusion" } else { "RLF" });
        }
        if let Some((cell, prev, interruption)) = out.reattached {
            close_drop(&mut self.records, ue, Some(cell), interruption);
            ue.evaluator.reset();
            let prev_pci = self.topology.cell(prev).map(|c| c.pci);
            let nrt = self.nrts.get_mut(&cell).expect("reattach cell has an NRT");
            reconnect_add(nrt, prev_pci.map(|p| (prev, p)), ue.spec.kind, &self.cfg.anr, now);
        }
        Ok(())
    }

    fn record_samples(&mut self, now: f64) -> Result<(), SimError> {
        let threshold = self.cfg.params.detection_threshold_dbm;
        for ue in &self.ues {
            let detectable: Vec<usize> = (0..self.topology.cells.len()).filter(|&j| ue.rsrp[j] >= threshold).collect();
            let strongest = strongest_cell(&ue.rsrp, &self.topology, threshold);
            if ue.spec.kind == UeKind::Uav && !detectable.is_empty() {
                let mut cells: Vec<(u64, f64)> =
                    detectable.iter().map(|&j| (self.topology.cells[j].ecgi.0, ue.rsrp[j])).collect();
                cells.sort_by_key(|c| c.0);
                self.uav_rows.push(TraceRow {
                    track: ue.spec.id.0,
                    timestamp_s: now,
                    position: ue.kin.position,
                    cells,
                });
            }
            if !self.opts.record_trace {
                continue;
            }
            let mut ranked = detectable.clone();
            ranked.sort_by(|&a, &b| {
                ue.rsrp[b].total_cmp(&ue.rsrp[a]).then(self.topology.cells[a].ecgi.cmp(&self.topology.cells[b].ecgi))
            });
            let ranked: Vec<String> =
                ranked.iter().map(|&j| format!("{}:{:.2}", self.topology.cells[j].pci, ue.rsrp[j])).collect();
            let p = ue.kin.position;
            let opt = |e: Option<Ecgi>| e.map(|e| e.to_string()).unwrap_or_default();
            self.trace
                .write_record([
                    fmt_time(now),
                    ue.spec.id.to_string(),
                    format!("{:.3}", p.x),
                    format!("{:.3}", p.y),
                    format!("{:.3}", p.z),
                    opt(ue.conn.state.serving()),
                    opt(strongest),
                    ranked.join(";"),
                ])
                .map_err(runtime)?;
        }
        Ok(())
    }

    fn sample_nrts(&mut self, now: f64) {
        for nrt in self.nrts.values() {
            let listed = |t: Option<&crate::anr::NeighbourTable>| {
                t.map(|t| t.relations().filter(|r| r.block_listed).count()).unwrap_or(0)
            };
            self.nrt_samples.push(NrtSample {
                time_s: round_time(now),
                owner: nrt.owner,
                ground_size: nrt.ground.len(),
                aerial_size: nrt.aerial.as_ref().map(|t| t.len()),
                ground_block_listed: listed(Some(&nrt.ground)),
                aerial_block_listed: nrt.aerial.as_ref().map(|t| listed(Some(t))),
            });
        }
    }

    fn finish(mut self, ticks: u64) -> Result<RunOutput, SimError> {
        let end = ticks as f64 * self.cfg.dt_s;
        for ue in &mut self.ues {
            if let Some(i) = ue.open_drop {
                let since = self.records[i].time_s;
                close_drop(&mut self.records, ue, None, end - since);
            }
        }
        for ue in &mut self.ues {
            ue.m.finalize(&ue.attempts, self.cfg.ho.t_pingpong_s);
            self.records.push(EventRecord {
                record: RecordType::Session,
                ue_id: ue.spec.id.0,
                ue_kind: ue.spec.kind,
                time_s: round_time(end),
                source_ecgi: None,
                reported_pci: None,
                prepared_ecgi: None,
                true_ecgi: None,
                outcome: String::new(),
                interruption_s: 0.0,
                connected_s: Some(round_time(ue.m.connected_s)),
            });
        }
        let cells = self.topology.cells.iter().map(|c| (c.ecgi.0, c.position)).collect();
        let uav_trace = ExternalTrace { rows: self.uav_rows, cells, origin: None };
        let mut block_list_events: Vec<_> =
            self.nrts.values().flat_map(|n| n.block_list_events().iter().cloned()).collect();
        block_list_events
            .sort_by(|a, b| a.time_s.total_cmp(&b.time_s).then(a.owner.cmp(&b.owner)).then(a.ecgi.cmp(&b.ecgi)));
        let metrics = MetricsReport::build(
            &self.cfg,
            ticks,
            self.ues.into_iter().map(|u| u.m).collect(),
            NrtMetrics::build(&self.nrt_samples, block_list_events, self.removals),
            &uav_trace,
        )
        .map_err(runtime)?;
        let trace_csv = if self.opts.record_trace { self.trace.into_inner().map_err(runtime)? } else { Vec::new() };
        Ok(RunOutput { metrics, events: self.records, trace_csv, uav_trace, nrt_samples: self.nrt_samples })
    }
}

fn radio_update(
    ue: &mut UeState,
    topology: &Topology,
    cfg: &ScenarioConfig,
    draws_needed: bool,
) -> Result<(), SimError> {
    let pos = ue.kin.position;
    if draws_needed {
        let stale = ue.last_draw_at.is_none_or(|p| p.distance(&pos) >= cfg.params.decorrelation_m);
        if stale {
            for d in &mut ue.draws {
                d.los_uniform = ue.link_rng.random();
                d.shadow_std_normal = ue.link_rng.sample(StandardNormal);
            }
            ue.last_draw_at = Some(pos);
        }
    }
    for (j, cell) in topology.cells.iter().enumerate() {
        // a UE passing through an antenna is evaluated just below it
        let at = if pos.distance(&cell.position) < MIN_LINK_M {
            geo::Position::new(cell.position.x, cell.position.y, cell.position.z - MIN_LINK_M)
        } else {
            pos
        };
        ue.rsrp[j] = geo::rsrp(cell, &at, &cfg.params, &ue.draws[j]).map_err(runtime)?;
    }
    Ok(())
}

/// Strongest cell at or above `threshold`, lowest ECGI on ties.
fn strongest_cell(rsrp: &[f64], topology: &Topology, threshold: f64) -> Option<Ecgi> {
    topology
        .cells
        .iter()
        .zip(rsrp)
        .filter(|(_, &r)| r >= threshold)
        .max_by(|a, b| a.1.total_cmp(b.1).then(b.0.ecgi.cmp(&a.0.ecgi)))
        .map(|(c, _)| c.ecgi)
}

fn log_attempt(records: &mut Vec<EventRecord>, ue: &mut UeState, a: HoAttempt) {
    let mut rec = EventRecord::from_attempt(&a, ue.spec.kind);
    rec.time_s = round_time(rec.time_s);
    records.push(rec);
    ue.attempts.push(a);
}

fn open_drop(records: &mut Vec<EventRecord>, ue: &mut UeState, now: f64, from: Ecgi, cause: &str) {
    ue.open_drop = Some(records.len());
    *ue.m.drop_causes.entry(cause.to_string()).or_default() += 1;
    ue.m.disconnects += 1;
    records.push(EventRecord {
        record: RecordType::Drop,
        ue_id: ue.spec.id.0,
        ue_kind: ue.spec.kind,
        time_s: round_time(now),
        source_ecgi: Some(from.0),
        reported_pci: None,
        prepared_ecgi: None,
        true_ecgi: None,
        outcome: cause.to_string(),
        interruption_s: 0.0,
        connected_s: None,
    });
}

fn close_drop(records: &mut [EventRecord], ue: &mut UeState, cell: Option<Ecgi>, interruption: f64) {
    let Some(i) = ue.open_drop.take() else { return };
    let interruption = round_time(interruption);
    records[i].true_ecgi = cell.map(|c| c.0);
    records[i].interruption_s = interruption;
    ue.m.interruption_s += interruption;
}

/// Removes accumulated float noise from tick multiples (0.30000000000000004 → 0.3).
pub(crate) fn round_time(t: f64) -> f64 {
    (t * 1e9).round() / 1e9
}

fn fmt_time(t: f64) -> String {
    round_time(t).to_string()
}

#[cfg(test)]
mod tests;
