//! Per-UE connection state machine.
//!
//! Handover preparation targets whatever ECGI the serving cell's NRT maps
//! the reported PCI to. If that is not the cell the UE actually hears, the
//! preparation runs against the wrong cell and the UE drops (PCI confusion).
//! Radio link failure is declared after `t_rlf` of continuous SINR below
//! `q_out`; re-establishment then takes `t_reest` and attaches to the
//! strongest cell found by a full search.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anr::{Nrt, TableKind};
use crate::rrm::{EventKind, MobilityEvent};
use crate::{Ecgi, Pci, UeId, UeKind, TIME_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum HoError {
    #[error("mobility event for UE {0} while not connected")]
    NotConnected(UeId),
    #[error("invalid handover config: {0}")]
    InvalidConfig(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreparedHo {
    pub serving: Ecgi,
    /// ECGI the serving cell's NRT resolved the PCI to.
    pub target: Ecgi,
    pub reported_pci: Pci,
    /// Cell the UE actually measured.
    pub true_target: Ecgi,
    pub started: f64,
    pub inter_rat: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ConnState {
    Connected { serving: Ecgi },
    HoPrep(PreparedHo),
    HoExec(PreparedHo),
    Rlf { since: f64, last_serving: Ecgi },
    Reestablishing { since: f64, rlf_since: f64, last_serving: Ecgi },
}

impl ConnState {
    /// Cell currently carrying the UE's data, if any.
    pub fn serving(&self) -> Option<Ecgi> {
        match self {
            ConnState::Connected { serving } => Some(*serving),
            ConnState::HoPrep(p) | ConnState::HoExec(p) => Some(p.serving),
            ConnState::Rlf { .. } | ConnState::Reestablishing { .. } => None,
        }
    }

    pub fn is_disconnected(&self) -> bool {
        matches!(self, ConnState::Rlf { .. } | ConnState::Reestablishing { .. })
    }

    pub fn name(&self) -> &'static str {
        match self {
            ConnState::Connected { .. } => "Connected",
            ConnState::HoPrep(_) => "HoPrep",
            ConnState::HoExec(_) => "HoExec",
            ConnState::Rlf { .. } => "Rlf",
            ConnState::Reestablishing { .. } => "Reestablishing",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AdaptiveA3 {
    pub base_offset_db: f64,
    pub slope_db_per_100m: f64,
    pub floor_db: f64,
}

impl Default for AdaptiveA3 {
    fn default() -> Self {
        Self { base_offset_db: 3.0, slope_db_per_100m: 1.5, floor_db: 0.5 }
    }
}

/// Source of a UE's A3 offset.
pub trait A3OffsetPolicy {
    fn a3_offset_db(&self, kind: UeKind, altitude_m: f64, base_offset_db: f64) -> f64;
}

/// Linear decrease with altitude, clamped at a floor; UAVs only.
impl A3OffsetPolicy for AdaptiveA3 {
    fn a3_offset_db(&self, kind: UeKind, altitude_m: f64, base_offset_db: f64) -> f64 {
        match kind {
            UeKind::Gue => base_offset_db,
            UeKind::Uav => self.floor_db.max(self.base_offset_db - self.slope_db_per_100m * altitude_m / 100.0),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HoConfig {
    pub prep_delay_s: f64,
    pub exec_delay_s: f64,
    pub inter_rat_exec_multiplier: f64,
    pub t_pingpong_s: f64,
    pub adaptive_a3: Option<AdaptiveA3>,
}

impl Default for HoConfig {
    fn default() -> Self {
        Self {
            prep_delay_s: 0.05,
            exec_delay_s: 0.03,
            inter_rat_exec_multiplier: 3.0,
            t_pingpong_s: 2.0,
            adaptive_a3: None,
        }
    }
}

impl HoConfig {
    pub fn validate(&self) -> Result<(), HoError> {
        if !(self.prep_delay_s >= 0.0 && self.exec_delay_s >= 0.0 && self.inter_rat_exec_multiplier >= 1.0) {
            return Err(HoError::InvalidConfig("delays must be >= 0 and the inter-RAT multiplier >= 1".into()));
        }
        if !(self.t_pingpong_s >= 0.0) {
            return Err(HoError::InvalidConfig("t_pingpong_s must be >= 0".into()));
        }
        if let Some(a) = &self.adaptive_a3 {
            if !(a.floor_db <= a.base_offset_db && a.slope_db_per_100m >= 0.0) {
                return Err(HoError::InvalidConfig("adaptive A3 needs floor <= base and slope >= 0".into()));
            }
        }
        Ok(())
    }

    pub fn exec_delay(&self, inter_rat: bool) -> f64 {
        if inter_rat {
            self.exec_delay_s * self.inter_rat_exec_multiplier
        } else {
            self.exec_delay_s
        }
    }
}

/// A3 offset used for a UE: `base` unless an adaptive policy is configured.
pub fn effective_a3_offset(kind: UeKind, altitude_m: f64, base_offset_db: f64, cfg: &HoConfig) -> f64 {
    match &cfg.adaptive_a3 {
        Some(p) => p.a3_offset_db(kind, altitude_m, base_offset_db),
        None => base_offset_db,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RlfConfig {
    pub q_out_db: f64,
    pub t_rlf_s: f64,
    pub t_reest_s: f64,
}

impl Default for RlfConfig {
    fn default() -> Self {
        Self { q_out_db: -6.0, t_rlf_s: 0.5, t_reest_s: 1.5 }
    }
}

impl RlfConfig {
    pub fn validate(&self) -> Result<(), HoError> {
        if !(self.t_rlf_s > 0.0 && self.t_reest_s > 0.0) {
            return Err(HoError::InvalidConfig("t_rlf_s and t_reest_s must be > 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum HoOutcome {
    Success,
    FailureConfusion,
    FailureBlockListed,
    FailureNoNrtEntry,
    Cancelled,
}

impl HoOutcome {
    pub const ALL: [HoOutcome; 5] = [
        HoOutcome::Success,
        HoOutcome::FailureConfusion,
        HoOutcome::FailureBlockListed,
        HoOutcome::FailureNoNrtEntry,
        HoOutcome::Cancelled,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            HoOutcome::Success => "Success",
            HoOutcome::FailureConfusion => "FailureConfusion",
            HoOutcome::FailureBlockListed => "FailureBlockListed",
            HoOutcome::FailureNoNrtEntry => "FailureNoNrtEntry",
            HoOutcome::Cancelled => "Cancelled",
        }
    }
}

impl std::str::FromStr for HoOutcome {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        HoOutcome::ALL.into_iter().find(|o| o.as_str() == s).ok_or_else(|| format!("unknown outcome {s:?}"))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HoAttempt {
    pub ue_id: UeId,
    pub time_s: f64,
    pub source: Ecgi,
    pub reported_pci: Pci,
    pub prepared_target: Option<Ecgi>,
    pub true_target: Ecgi,
    pub outcome: HoOutcome,
    pub interruption_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeConnection {
    pub ue_id: UeId,
    pub state: ConnState,
    /// Start of the current below-`q_out` stretch.
    pub below_q_out_since: Option<f64>,
    /// Inter-layer/inter-RAT measurements scheduled (set by A2, cleared by A1).
    pub inter_meas_active: bool,
}

impl UeConnection {
    pub fn new(ue_id: UeId, serving: Ecgi) -> Self {
        Self { ue_id, state: ConnState::Connected { serving }, below_q_out_since: None, inter_meas_active: false }
    }
}

/// Applies a mobility event to a connected UE.
///
/// `nrt` is the serving cell's table and `table` the one in use for this UE.
/// Handover-triggering events are ignored while a handover is already under
/// way; the returned attempt is set for immediate failures and cancellations.
pub fn on_mobility_event(
    conn: &mut UeConnection,
    event: &MobilityEvent,
    nrt: &Nrt,
    table: TableKind,
    now: f64,
) -> Result<Option<HoAttempt>, HoError> {
    if conn.state.is_disconnected() {
        return Err(HoError::NotConnected(conn.ue_id));
    }
    match event.kind {
        EventKind::A1 => {
            conn.inter_meas_active = false;
            if let ConnState::HoPrep(p) = conn.state {
                conn.state = ConnState::Connected { serving: p.serving };
                return Ok(Some(HoAttempt {
                    ue_id: conn.ue_id,
                    time_s: now,
                    source: p.serving,
                    reported_pci: p.reported_pci,
                    prepared_target: Some(p.target),
                    true_target: p.true_target,
                    outcome: HoOutcome::Cancelled,
                    interruption_s: 0.0,
                }));
            }
            Ok(None)
        }
        EventKind::A2 => {
            conn.inter_meas_active = true;
            Ok(None)
        }
        // secondary-cell change only; the primary stays put
        EventKind::A6 => Ok(None),
        kind => {
            let ConnState::Connected { serving } = conn.state else { return Ok(None) };
            let Some(target) = &event.target else { return Ok(None) };
            let relation = nrt.table(table).and_then(|t| t.lookup(target.pci, target.ecgi));
            let fail = |outcome, prepared| HoAttempt {
                ue_id: conn.ue_id,
                time_s: now,
                source: serving,
                reported_pci: target.pci,
                prepared_target: prepared,
                true_target: target.true_ecgi,
                outcome,
                interruption_s: 0.0,
            };
            match relation {
                None => Ok(Some(fail(HoOutcome::FailureNoNrtEntry, None))),
                Some(r) if r.block_listed => Ok(Some(fail(HoOutcome::FailureBlockListed, None))),
                Some(r) => {
                    conn.state = ConnState::HoPrep(PreparedHo {
                        serving,
                        target: r.ecgi,
                        reported_pci: target.pci,
                        true_target: target.true_ecgi,
                        started: now,
                        inter_rat: kind.is_inter_rat(),
                    });
                    Ok(None)
                }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TickOutcome {
    pub attempt: Option<HoAttempt>,
    /// Radio link failure declared this tick (cell the UE dropped from).
    pub dropped_from: Option<Ecgi>,
    /// Re-establishment finished: (new cell, previous cell, interruption).
    pub reattached: Option<(Ecgi, Ecgi, f64)>,
}

/// Advances timers by one tick.
///
/// `sinr_db` is the serving cell's SINR (ignored while disconnected) and
/// `strongest` the best cell a full search would find right now.
pub fn tick_connection(
    conn: &mut UeConnection,
    sinr_db: Option<f64>,
    strongest: Option<Ecgi>,
    cfg: &HoConfig,
    rlf: &RlfConfig,
    now: f64,
) -> TickOutcome {
    let mut out = TickOutcome::default();
    match conn.state {
        ConnState::HoPrep(p) if now - p.started + TIME_EPS >= cfg.prep_delay_s => {
            if p.target != p.true_target {
                out.attempt = Some(attempt(conn.ue_id, now, &p, HoOutcome::FailureConfusion, 0.0));
                declare_rlf(conn, p.serving, now, &mut out);
                return out;
            }
            conn.state = ConnState::HoExec(PreparedHo { started: now, ..p });
        }
        ConnState::HoExec(p) => {
            let delay = cfg.exec_delay(p.inter_rat);
            if now - p.started + TIME_EPS >= delay {
                out.attempt = Some(attempt(conn.ue_id, now, &p, HoOutcome::Success, delay));
                conn.state = ConnState::Connected { serving: p.target };
                conn.below_q_out_since = None;
            }
            // the UE is between cells; radio link monitoring restarts on the target
            return out;
        }
        ConnState::Rlf { since, last_serving } => {
            conn.state = ConnState::Reestablishing { since: now, rlf_since: since, last_serving };
            return out;
        }
        ConnState::Reestablishing { since, rlf_since, last_serving } => {
            if now - since + TIME_EPS >= rlf.t_reest_s {
                if let Some(cell) = strongest {
                    conn.state = ConnState::Connected { serving: cell };
                    conn.below_q_out_since = None;
                    conn.inter_meas_active = false;
                    out.reattached = Some((cell, last_serving, now - rlf_since));
                }
            }
            return out;
        }
        _ => {}
    }

    let Some(serving) = conn.state.serving() else { return out };
    match sinr_db {
        Some(s) if s >= rlf.q_out_db => conn.below_q_out_since = None,
        _ => {
            let since = *conn.below_q_out_since.get_or_insert(now);
            if now - since + TIME_EPS >= rlf.t_rlf_s {
                declare_rlf(conn, serving, now, &mut out);
            }
        }
    }
    out
}

fn attempt(ue_id: UeId, now: f64, p: &PreparedHo, outcome: HoOutcome, interruption_s: f64) -> HoAttempt {
    HoAttempt {
        ue_id,
        time_s: now,
        source: p.serving,
        reported_pci: p.reported_pci,
        prepared_target: Some(p.target),
        true_target: p.true_target,
        outcome,
        interruption_s,
    }
}

/// Drops a connected UE immediately (e.g. after a failed ECGI decode).
/// Returns the cell it was served by, or `None` if it was already disconnected.
pub fn force_rlf(conn: &mut UeConnection, now: f64) -> Option<Ecgi> {
    let serving = conn.state.serving()?;
    let mut out = TickOutcome::default();
    declare_rlf(conn, serving, now, &mut out);
    out.dropped_from
}

fn declare_rlf(conn: &mut UeConnection, serving: Ecgi, now: f64, out: &mut TickOutcome) {
    conn.state = ConnState::Rlf { since: now, last_serving: serving };
    conn.below_q_out_since = None;
    out.dropped_from = Some(serving);
}

/// Successful handovers that return to the cell left by the previous
/// handover of the same UE within `t_pingpong_s`.
pub fn detect_pingpong(history: &[HoAttempt], t_pingpong_s: f64) -> usize {
    let mut last: std::collections::BTreeMap<UeId, &HoAttempt> = Default::default();
    let mut count = 0;
    for a in history.iter().filter(|a| a.outcome == HoOutcome::Success) {
        if let Some(prev) = last.get(&a.ue_id) {
            if prev.prepared_target == Some(a.source)
                && a.prepared_target == Some(prev.source)
                && a.time_s - prev.time_s <= t_pingpong_s + TIME_EPS
            {
                count += 1;
            }
        }
        last.insert(a.ue_id, a);
    }
    count
}
