//! Neighbour Relation Tables and the ANR procedures that maintain them.
//!
//! A serving cell only knows neighbours by the PCI a UE reports. Unknown
//! PCIs trigger an ECGI request; known PCIs are taken at face value, which
//! is where PCI confusion comes from. Relations that stop being reported are
//! swept out, and an ECGI swept out `r_block` times within `w_block_s` is
//! block-listed the next time it is added.
//!
//! With `separate_aerial`, UAV reports read and write a dedicated aerial
//! table (with its own removal timer) and never touch the ground table.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::{self, LinkDraw, LosMode, Position, PropagationParams};
use crate::rrm::{MeasConfig, MeasurementReport, RadioCapability, RrcMode};
use crate::topology::Topology;
use crate::{Ecgi, Pci, UeId, UeKind, TIME_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum AnrError {
    #[error("report from a UE served by {got:?}, table owner is {owner}")]
    WrongOwner { owner: Ecgi, got: Option<Ecgi> },
    #[error("no pending ECGI request for PCI {0}")]
    NoPendingRequest(Pci),
    #[error("invalid ANR policy: {0}")]
    InvalidPolicy(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum AddMechanism {
    MeasurementBased,
    UplinkId,
    ReconnectBased,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnrPolicy {
    pub add_mechanisms: BTreeSet<AddMechanism>,
    pub t_remove_s: f64,
    /// Removal timer of the aerial table.
    pub aerial_t_remove_s: f64,
    pub r_block: u32,
    pub w_block_s: f64,
    pub always_resolve_ecgi: bool,
    pub separate_aerial: bool,
    pub max_size: usize,
    /// Minimum uplink level at which a cell hears a UE's uplink id.
    pub ulid_threshold_dbm: f64,
    pub ue_tx_power_dbm: f64,
}

impl Default for AnrPolicy {
    fn default() -> Self {
        Self {
            add_mechanisms: [AddMechanism::MeasurementBased].into(),
            t_remove_s: 600.0,
            aerial_t_remove_s: 3600.0,
            r_block: 3,
            w_block_s: 3600.0,
            always_resolve_ecgi: false,
            separate_aerial: false,
            max_size: 32,
            ulid_threshold_dbm: -100.0,
            ue_tx_power_dbm: 23.0,
        }
    }
}

impl AnrPolicy {
    pub fn validate(&self) -> Result<(), AnrError> {
        if self.r_block < 1 {
            return Err(AnrError::InvalidPolicy("r_block must be >= 1".into()));
        }
        if !(self.t_remove_s > 0.0 && self.aerial_t_remove_s > 0.0 && self.w_block_s >= 0.0) {
            return Err(AnrError::InvalidPolicy("removal timers must be > 0".into()));
        }
        if self.max_size == 0 {
            return Err(AnrError::InvalidPolicy("max_size must be >= 1".into()));
        }
        Ok(())
    }

    /// Table that reports from a UE of `kind` read and write.
    pub fn table_for(&self, kind: UeKind) -> TableKind {
        if self.separate_aerial && kind == UeKind::Uav {
            TableKind::Aerial
        } else {
            TableKind::Ground
        }
    }

    fn t_remove_for(&self, table: TableKind) -> f64 {
        match table {
            TableKind::Ground => self.t_remove_s,
            TableKind::Aerial => self.aerial_t_remove_s,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TableKind {
    Ground,
    Aerial,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeighbourRelation {
    pub pci: Pci,
    pub ecgi: Ecgi,
    pub block_listed: bool,
    pub added_at: f64,
    pub last_reported: f64,
    /// Removal timestamps of this ECGI known when the relation was added.
    pub remove_events: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockListEvent {
    pub time_s: f64,
    pub owner: Ecgi,
    pub ecgi: Ecgi,
    pub table: TableKind,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct NeighbourTable {
    relations: BTreeMap<Ecgi, NeighbourRelation>,
    /// Survives removal of the relation itself.
    removal_history: BTreeMap<Ecgi, Vec<f64>>,
}

impl NeighbourTable {
    pub fn len(&self) -> usize {
        self.relations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.relations.is_empty()
    }

    pub fn get(&self, ecgi: Ecgi) -> Option<&NeighbourRelation> {
        self.relations.get(&ecgi)
    }

    pub fn relations(&self) -> impl Iterator<Item = &NeighbourRelation> {
        self.relations.values()
    }

    /// Relation the owner associates with `pci`: the most recently reported
    /// one, lowest ECGI on ties.
    pub fn lookup_pci(&self, pci: Pci) -> Option<&NeighbourRelation> {
        self.relations
            .values()
            .filter(|r| r.pci == pci)
            .max_by(|a, b| a.last_reported.total_cmp(&b.last_reported).then(b.ecgi.cmp(&a.ecgi)))
    }

    /// Relation targeted by a handover toward `pci`, preferring an ECGI the UE decoded.
    pub fn lookup(&self, pci: Pci, ecgi: Option<Ecgi>) -> Option<&NeighbourRelation> {
        match ecgi {
            Some(e) => self.get(e),
            None => self.lookup_pci(pci),
        }
    }

    pub fn removals(&self, ecgi: Ecgi) -> &[f64] {
        self.removal_history.get(&ecgi).map(Vec::as_slice).unwrap_or(&[])
    }

    fn removals_in_window(&self, ecgi: Ecgi, now: f64, window: f64) -> usize {
        self.removals(ecgi).iter().filter(|&&t| now - t <= window + TIME_EPS).count()
    }

    /// Unconditional insert (OAM provisioning and tests); no eviction or block check.
    pub fn insert_relation(&mut self, pci: Pci, ecgi: Ecgi, now: f64) {
        let remove_events = self.removals(ecgi).to_vec();
        self.relations.insert(
            ecgi,
            NeighbourRelation { pci, ecgi, block_listed: false, added_at: now, last_reported: now, remove_events },
        );
    }

    fn refresh(&mut self, ecgi: Ecgi, now: f64) -> bool {
        match self.relations.get_mut(&ecgi) {
            Some(r) => {
                r.last_reported = r.last_reported.max(now);
                true
            }
            None => false,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ResolveResult {
    Resolved(Ecgi),
    Failed { dropped: bool },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResolveOutcome {
    pub result: ResolveResult,
    /// Time from request until the outcome is known.
    pub elapsed_s: f64,
    /// Data interruption caused by the measurement gaps used.
    pub interruption_s: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PendingResolution {
    pub table: TableKind,
    pub pci: Pci,
    pub ue: UeId,
    pub true_ecgi: Ecgi,
    pub requested_at: f64,
    pub outcome: Option<ResolveOutcome>,
}

impl PendingResolution {
    pub fn due_at(&self) -> Option<f64> {
        self.outcome.map(|o| self.requested_at + o.elapsed_s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Nrt {
    pub owner: Ecgi,
    pub ground: NeighbourTable,
    pub aerial: Option<NeighbourTable>,
    pub max_size: usize,
    pending: BTreeMap<(TableKind, Pci), PendingResolution>,
    block_list_events: Vec<BlockListEvent>,
}

impl Nrt {
    pub fn new(owner: Ecgi, policy: &AnrPolicy) -> Self {
        Self {
            owner,
            ground: NeighbourTable::default(),
            aerial: policy.separate_aerial.then(NeighbourTable::default),
            max_size: policy.max_size,
            pending: BTreeMap::new(),
            block_list_events: Vec::new(),
        }
    }

    pub fn table(&self, kind: TableKind) -> Option<&NeighbourTable> {
        match kind {
            TableKind::Ground => Some(&self.ground),
            TableKind::Aerial => self.aerial.as_ref(),
        }
    }

    pub fn table_mut(&mut self, kind: TableKind) -> Option<&mut NeighbourTable> {
        match kind {
            TableKind::Ground => Some(&mut self.ground),
            TableKind::Aerial => self.aerial.as_mut(),
        }
    }

    /// Relations of every table.
    pub fn relations(&self) -> impl Iterator<Item = &NeighbourRelation> {
        self.ground.relations().chain(self.aerial.iter().flat_map(|t| t.relations()))
    }

    pub fn block_list_events(&self) -> &[BlockListEvent] {
        &self.block_list_events
    }

    pub fn pending(&self) -> impl Iterator<Item = &PendingResolution> {
        self.pending.values()
    }

    pub fn is_pending(&self, table: TableKind, pci: Pci) -> bool {
        self.pending.contains_key(&(table, pci))
    }

    /// Registers an ECGI request; returns false when one is already in flight.
    pub fn request_ecgi(&mut self, table: TableKind, pci: Pci, ue: UeId, true_ecgi: Ecgi, now: f64) -> bool {
        if self.pending.contains_key(&(table, pci)) {
            return false;
        }
        self.pending
            .insert((table, pci), PendingResolution { table, pci, ue, true_ecgi, requested_at: now, outcome: None });
        true
    }

    pub fn schedule(&mut self, table: TableKind, pci: Pci, outcome: ResolveOutcome) -> Result<(), AnrError> {
        let p = self.pending.get_mut(&(table, pci)).ok_or(AnrError::NoPendingRequest(pci))?;
        p.outcome = Some(outcome);
        Ok(())
    }

    /// Removes and returns resolutions whose outcome is due, plus requests
    /// that never got an outcome within `expiry_s`.
    pub fn take_due(&mut self, now: f64, expiry_s: f64) -> Vec<PendingResolution> {
        let keys: Vec<_> = self
            .pending
            .iter()
            .filter(|(_, p)| match p.due_at() {
                Some(d) => d <= now + TIME_EPS,
                None => now - p.requested_at > expiry_s + TIME_EPS,
            })
            .map(|(k, _)| *k)
            .collect();
        keys.into_iter().filter_map(|k| self.pending.remove(&k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum AnrAction {
    Known(Ecgi),
    RequestEcgi(Pci),
    /// Diagnostic: the table maps `pci` to `nrt_ecgi` while the UE actually hears `true_ecgi`.
    ConfusionLatent {
        pci: Pci,
        nrt_ecgi: Ecgi,
        true_ecgi: Ecgi,
    },
}

/// Processes one measurement report at the serving cell.
///
/// Known relations have their `last_reported` refreshed. The latent
/// confusion tag is diagnostic only; the serving cell does not act on it.
pub fn on_report(
    nrt: &mut Nrt,
    report: &MeasurementReport,
    ue_kind: UeKind,
    policy: &AnrPolicy,
) -> Result<Vec<AnrAction>, AnrError> {
    let serving = report.serving.as_ref().map(|s| s.ecgi);
    if serving != Some(nrt.owner) {
        return Err(AnrError::WrongOwner { owner: nrt.owner, got: serving });
    }
    let kind = policy.table_for(ue_kind);
    let now = report.timestamp_s;
    let mut actions = Vec::new();
    let Some(table) = nrt.table_mut(kind) else { return Ok(actions) };
    for cell in &report.cells {
        if policy.always_resolve_ecgi {
            match cell.ecgi {
                Some(e) if table.refresh(e, now) => actions.push(AnrAction::Known(e)),
                _ => actions.push(AnrAction::RequestEcgi(cell.pci)),
            }
            continue;
        }
        match table.lookup_pci(cell.pci).map(|r| r.ecgi) {
            None => actions.push(AnrAction::RequestEcgi(cell.pci)),
            Some(mapped) => {
                table.refresh(mapped, now);
                actions.push(AnrAction::Known(mapped));
                if mapped != cell.true_ecgi {
                    actions.push(AnrAction::ConfusionLatent {
                        pci: cell.pci,
                        nrt_ecgi: mapped,
                        true_ecgi: cell.true_ecgi,
                    });
                }
            }
        }
    }
    Ok(actions)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResolveContext {
    pub mode: RrcMode,
    pub radio: RadioCapability,
    /// Probability that the UE is busy with data when a gap comes up.
    pub data_activity: f64,
}

/// Simulates decoding the ECGI behind a pending PCI request.
///
/// Idle or dual-radio UEs always succeed without interrupting data. A
/// connected single-radio UE needs `ecgi_decode_gaps` consecutive usable gaps
/// before the deadline; each gap is usable with probability `1 - data_activity`.
/// One uniform is drawn per gap opportunity, plus one for the drop decision
/// on failure.
pub fn resolve_ecgi(
    nrt: &Nrt,
    table: TableKind,
    pci: Pci,
    ctx: &ResolveContext,
    meas: &MeasConfig,
    rng: &mut impl Rng,
) -> Result<ResolveOutcome, AnrError> {
    let pending = nrt.pending.get(&(table, pci)).ok_or(AnrError::NoPendingRequest(pci))?;
    let needed = meas.ecgi_decode_gaps.max(2);
    let decode_time = needed as f64 * meas.gap_period_s;
    if ctx.mode == RrcMode::Idle || ctx.radio == RadioCapability::Dual {
        return Ok(ResolveOutcome {
            result: ResolveResult::Resolved(pending.true_ecgi),
            elapsed_s: decode_time,
            interruption_s: 0.0,
        });
    }
    let gap_s = meas.gap_duration_ms / 1000.0;
    let deadline = meas.decode_deadline_s();
    let opportunities = ((deadline + TIME_EPS) / meas.gap_period_s).floor() as u32;
    let mut run = 0u32;
    let mut used = 0u32;
    for i in 1..=opportunities {
        let available = rng.random::<f64>() >= ctx.data_activity;
        if available {
            run += 1;
            used += 1;
            if run == needed {
                return Ok(ResolveOutcome {
                    result: ResolveResult::Resolved(pending.true_ecgi),
                    elapsed_s: i as f64 * meas.gap_period_s,
                    interruption_s: used as f64 * gap_s,
                });
            }
        } else {
            run = 0;
        }
    }
    let dropped = rng.random::<f64>() < meas.p_drop_on_decode_fail;
    Ok(ResolveOutcome {
        result: ResolveResult::Failed { dropped },
        elapsed_s: deadline,
        interruption_s: used as f64 * gap_s,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct CommitOutcome {
    pub table: TableKind,
    pub inserted: bool,
    pub refreshed: bool,
    pub evicted: Option<Ecgi>,
    pub block_listed: bool,
}

/// Inserts (or refreshes) a resolved relation in the table used by `ue_kind`.
///
/// A full table evicts its stalest relation outside `protected`; if nothing
/// can be evicted the relation is not added.
pub fn commit_resolution(
    nrt: &mut Nrt,
    pci: Pci,
    ecgi: Ecgi,
    now: f64,
    ue_kind: UeKind,
    policy: &AnrPolicy,
    protected: &BTreeSet<Ecgi>,
) -> CommitOutcome {
    let kind = policy.table_for(ue_kind);
    commit_into(nrt, kind, pci, ecgi, now, policy, protected)
}

fn commit_into(
    nrt: &mut Nrt,
    kind: TableKind,
    pci: Pci,
    ecgi: Ecgi,
    now: f64,
    policy: &AnrPolicy,
    protected: &BTreeSet<Ecgi>,
) -> CommitOutcome {
    let mut out = CommitOutcome { table: kind, inserted: false, refreshed: false, evicted: None, block_listed: false };
    let owner = nrt.owner;
    let max_size = nrt.max_size;
    if ecgi == owner {
        return out;
    }
    let Some(table) = nrt.table_mut(kind) else { return out };
    if let Some(r) = table.relations.get_mut(&ecgi) {
        r.last_reported = r.last_reported.max(now);
        r.pci = pci;
        out.refreshed = true;
        return out;
    }
    if table.len() >= max_size {
        let victim = table
            .relations
            .values()
            .filter(|r| !protected.contains(&r.ecgi))
            .min_by(|a, b| a.last_reported.total_cmp(&b.last_reported).then(a.ecgi.cmp(&b.ecgi)))
            .map(|r| r.ecgi);
        match victim {
            Some(v) => {
                table.relations.remove(&v);
                out.evicted = Some(v);
            }
            None => return out,
        }
    }
    let block = table.removals_in_window(ecgi, now, policy.w_block_s) >= policy.r_block as usize;
    table.insert_relation(pci, ecgi, now);
    out.inserted = true;
    if block {
        if let Some(r) = table.relations.get_mut(&ecgi) {
            r.block_listed = true;
        }
        out.block_listed = true;
        nrt.block_list_events.push(BlockListEvent { time_s: now, owner, ecgi, table: kind });
    }
    out
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SweepOutcome {
    pub removed: Vec<(TableKind, Ecgi)>,
    /// ECGIs whose removal count now reaches `r_block`; they are block-listed when next added.
    pub block_list_armed: Vec<(TableKind, Ecgi)>,
}

/// Removes relations not reported for longer than the table's removal timer.
/// Block-listed relations stay in place.
pub fn removal_sweep(nrt: &mut Nrt, now: f64, policy: &AnrPolicy) -> SweepOutcome {
    let mut out = SweepOutcome::default();
    for kind in [TableKind::Ground, TableKind::Aerial] {
        let t_remove = policy.t_remove_for(kind);
        let Some(table) = nrt.table_mut(kind) else { continue };
        let stale: Vec<Ecgi> = table
            .relations
            .values()
            .filter(|r| !r.block_listed && now - r.last_reported > t_remove + TIME_EPS)
            .map(|r| r.ecgi)
            .collect();
        for e in stale {
            table.relations.remove(&e);
            table.removal_history.entry(e).or_default().push(now);
            out.removed.push((kind, e));
            if table.removals_in_window(e, now, policy.w_block_s) >= policy.r_block as usize {
                out.block_list_armed.push((kind, e));
            }
        }
    }
    out
}

/// Uplink-id based adds: every cell hearing the UE's uplink above the
/// threshold adds the UE's serving cell to its own table.
#[allow(clippy::too_many_arguments)]
pub fn ulid_add(
    topology: &Topology,
    nrts: &mut BTreeMap<Ecgi, Nrt>,
    ue_pos: &Position,
    serving: Ecgi,
    ue_kind: UeKind,
    policy: &AnrPolicy,
    params: &PropagationParams,
    now: f64,
) -> Vec<Ecgi> {
    let mut changed = Vec::new();
    if !policy.add_mechanisms.contains(&AddMechanism::UplinkId) {
        return changed;
    }
    let Some(serving_cell) = topology.cell(serving) else { return changed };
    let quiet = PropagationParams { shadowing_sigma_db: 0.0, los_mode: LosMode::Expected, ..params.clone() };
    for cell in topology.cells.iter().filter(|c| c.ecgi != serving) {
        let Ok(downlink) = geo::rsrp(cell, ue_pos, &quiet, &LinkDraw::default()) else { continue };
        let uplink = downlink - cell.tx_power_dbm.unwrap_or(params.tx_power_dbm) + policy.ue_tx_power_dbm;
        if uplink < policy.ulid_threshold_dbm {
            continue;
        }
        if let Some(nrt) = nrts.get_mut(&cell.ecgi) {
            let o = commit_resolution(nrt, serving_cell.pci, serving, now, ue_kind, policy, &BTreeSet::new());
            if o.inserted || o.refreshed {
                changed.push(cell.ecgi);
            }
        }
    }
    changed
}

/// Reconnect-based add: after re-establishment the new cell learns the
/// cell the UE was last connected to.
pub fn reconnect_add(
    new_cell_nrt: &mut Nrt,
    previous: Option<(Ecgi, Pci)>,
    ue_kind: UeKind,
    policy: &AnrPolicy,
    now: f64,
) -> Option<CommitOutcome> {
    if !policy.add_mechanisms.contains(&AddMechanism::ReconnectBased) {
        return None;
    }
    let (prev, pci) = previous?;
    if prev == new_cell_nrt.owner {
        return None;
    }
    Some(commit_resolution(new_cell_nrt, pci, prev, now, ue_kind, policy, &BTreeSet::new()))
}
