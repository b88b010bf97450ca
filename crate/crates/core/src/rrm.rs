//! Measurement reports and 3GPP mobility events.
//!
//! A report lists every detected neighbour as (PCI, RSRP). Two effects shape
//! it: cells sharing the serving PCI on the serving layer are invisible to
//! the UE (collision blindness), and inter-layer cells only appear when a
//! measurement gap was available during the report period.
//!
//! Events use the standard entering conditions with hysteresis; a condition
//! must hold on every report for `time_to_trigger_s` before the event fires,
//! and it fires once per continuous episode for each (event, target PCI).

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::PropagationParams;
use crate::topology::{Rat, Topology};
use crate::{Ecgi, Pci, UeId, TIME_EPS};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RrmError {
    #[error("event A6 requested without a configured secondary cell")]
    A6WithoutSecondary,
    #[error("invalid event configuration: {0}")]
    InvalidEventConfig(String),
    #[error("invalid measurement configuration: {0}")]
    InvalidMeasConfig(String),
    #[error("rsrp vector has {got} entries for {cells} cells")]
    RsrpLength { got: usize, cells: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MeasConfig {
    pub report_period_s: f64,
    /// Repetition period of measurement gaps.
    pub gap_period_s: f64,
    pub gap_duration_ms: f64,
    /// Gaps needed to decode a neighbour's ECGI (at least two).
    pub ecgi_decode_gaps: u32,
    /// Non-serving layers the UE is configured to measure; `None` means all.
    pub inter_layers: Option<BTreeSet<u8>>,
    /// Inter-layer and inter-RAT measurements start only after A2 (and stop on A1).
    pub inter_layer_requires_a2: bool,
    /// ECGI decode deadline, in report periods.
    pub decode_deadline_periods: u32,
    pub p_drop_on_decode_fail: f64,
}

impl Default for MeasConfig {
    fn default() -> Self {
        Self {
            report_period_s: 0.2,
            gap_period_s: 0.48,
            gap_duration_ms: 40.0,
            ecgi_decode_gaps: 2,
            inter_layers: None,
            inter_layer_requires_a2: true,
            decode_deadline_periods: 5,
            p_drop_on_decode_fail: 0.2,
        }
    }
}

impl MeasConfig {
    pub fn validate(&self) -> Result<(), RrmError> {
        let bad = |m: &str| Err(RrmError::InvalidMeasConfig(m.into()));
        if !(self.report_period_s > 0.0 && self.gap_period_s > 0.0) {
            return bad("periods must be > 0");
        }
        if !(self.gap_duration_ms >= 0.0 && self.gap_duration_ms / 1000.0 <= self.gap_period_s) {
            return bad("gap duration must lie within the gap period");
        }
        if self.ecgi_decode_gaps < 2 {
            return bad("ecgi_decode_gaps must be >= 2");
        }
        if !(0.0..=1.0).contains(&self.p_drop_on_decode_fail) {
            return bad("p_drop_on_decode_fail must be a probability");
        }
        Ok(())
    }

    /// Whether a gap window `[k*P, k*P + duration)` overlaps the report
    /// period ending at `now`.
    pub fn gap_in_period(&self, now: f64) -> bool {
        let start = now - self.report_period_s;
        let dur = self.gap_duration_ms / 1000.0;
        // latest gap starting at or before `now`; earlier gaps end earlier
        let last_start = ((now + TIME_EPS) / self.gap_period_s).floor() * self.gap_period_s;
        if dur > 0.0 {
            last_start + dur > start + TIME_EPS
        } else {
            last_start > start + TIME_EPS
        }
    }

    pub fn decode_deadline_s(&self) -> f64 {
        self.decode_deadline_periods as f64 * self.report_period_s
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum EventKind {
    A1,
    A2,
    A3,
    A4,
    A5,
    A6,
    B1,
    B2,
}

impl EventKind {
    pub const ALL: [EventKind; 8] = [
        EventKind::A1,
        EventKind::A2,
        EventKind::A3,
        EventKind::A4,
        EventKind::A5,
        EventKind::A6,
        EventKind::B1,
        EventKind::B2,
    ];

    pub fn has_target(self) -> bool {
        !matches!(self, EventKind::A1 | EventKind::A2)
    }

    pub fn is_inter_rat(self) -> bool {
        matches!(self, EventKind::B1 | EventKind::B2)
    }

    /// Events that can start a handover of the primary cell.
    pub fn triggers_handover(self) -> bool {
        matches!(self, EventKind::A3 | EventKind::A4 | EventKind::A5 | EventKind::B1 | EventKind::B2)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EventConfig {
    pub a1_thresh_dbm: f64,
    pub a2_thresh_dbm: f64,
    pub a3_offset_db: f64,
    pub a4_thresh_dbm: f64,
    pub a5_thresh1_dbm: f64,
    pub a5_thresh2_dbm: f64,
    pub a6_offset_db: f64,
    pub b1_thresh_dbm: f64,
    pub b2_thresh1_dbm: f64,
    pub b2_thresh2_dbm: f64,
    pub hysteresis_db: f64,
    pub time_to_trigger_s: f64,
    pub enabled: BTreeSet<EventKind>,
}

impl Default for EventConfig {
    fn default() -> Self {
        Self {
            a1_thresh_dbm: -80.0,
            a2_thresh_dbm: -100.0,
            a3_offset_db: 3.0,
            a4_thresh_dbm: -90.0,
            a5_thresh1_dbm: -108.0,
            a5_thresh2_dbm: -100.0,
            a6_offset_db: 3.0,
            b1_thresh_dbm: -100.0,
            b2_thresh1_dbm: -110.0,
            b2_thresh2_dbm: -100.0,
            hysteresis_db: 1.0,
            time_to_trigger_s: 0.48,
            enabled: [EventKind::A1, EventKind::A2, EventKind::A3, EventKind::A5, EventKind::B2].into(),
        }
    }
}

impl EventConfig {
    pub fn validate(&self) -> Result<(), RrmError> {
        if !(self.a5_thresh1_dbm < self.a5_thresh2_dbm) {
            return Err(RrmError::InvalidEventConfig("a5_thresh1 must be < a5_thresh2".into()));
        }
        if !(self.b2_thresh1_dbm < self.b2_thresh2_dbm) {
            return Err(RrmError::InvalidEventConfig("b2_thresh1 must be < b2_thresh2".into()));
        }
        if !(self.hysteresis_db >= 0.0 && self.time_to_trigger_s >= 0.0) {
            return Err(RrmError::InvalidEventConfig("hysteresis and TTT must be >= 0".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportedCell {
    pub pci: Pci,
    pub rsrp_dbm: f64,
    pub freq_layer: u8,
    pub rat: Rat,
    /// Global id, present only when the UE decoded it.
    pub ecgi: Option<Ecgi>,
    /// Simulator ground truth: the strongest physical cell behind this PCI.
    /// Network-side logic uses it only for diagnostics and ECGI resolution.
    pub true_ecgi: Ecgi,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ServingMeasurement {
    pub ecgi: Ecgi,
    pub pci: Pci,
    pub rsrp_dbm: f64,
    pub freq_layer: u8,
    pub rat: Rat,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum InterLayerStatus {
    Measured,
    /// Connected single-radio UE without a gap in this period.
    GapUnavailable,
    /// Inter-layer measurement is not active (no A2 yet).
    NotScheduled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasurementReport {
    pub ue_id: UeId,
    pub timestamp_s: f64,
    pub serving: Option<ServingMeasurement>,
    /// Sorted by descending RSRP.
    pub cells: Vec<ReportedCell>,
    pub inter_layer: InterLayerStatus,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum RrcMode {
    Idle,
    Connected,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum RadioCapability {
    Single,
    Dual,
}

/// What the UE can see this tick: ground-truth RSRP per topology cell.
#[derive(Debug, Clone, Copy)]
pub struct UeRadioView<'a> {
    pub ue_id: UeId,
    pub serving: Option<Ecgi>,
    /// Indexed like `topology.cells`.
    pub rsrp_dbm: &'a [f64],
    /// Inter-layer measurement switched on (see [`MeasConfig::inter_layer_requires_a2`]).
    pub inter_layer_active: bool,
    /// The UE decodes ECGIs alongside every measurement (dual-radio sensing).
    pub decodes_ecgi: bool,
}

pub fn take_measurements(
    view: &UeRadioView<'_>,
    topology: &Topology,
    params: &PropagationParams,
    meas: &MeasConfig,
    mode: RrcMode,
    radio: RadioCapability,
    now: f64,
) -> Result<MeasurementReport, RrmError> {
    if view.rsrp_dbm.len() != topology.cells.len() {
        return Err(RrmError::RsrpLength { got: view.rsrp_dbm.len(), cells: topology.cells.len() });
    }
    let serving_idx = view.serving.and_then(|e| topology.index_of(e));
    let serving = serving_idx.map(|i| {
        let c = &topology.cells[i];
        ServingMeasurement {
            ecgi: c.ecgi,
            pci: c.pci,
            rsrp_dbm: view.rsrp_dbm[i],
            freq_layer: c.freq_layer,
            rat: c.rat,
        }
    });
    let connected = mode == RrcMode::Connected && serving.is_some();

    let inter_layer = if !connected {
        InterLayerStatus::Measured
    } else if meas.inter_layer_requires_a2 && !view.inter_layer_active {
        InterLayerStatus::NotScheduled
    } else if radio == RadioCapability::Dual || meas.gap_in_period(now) {
        InterLayerStatus::Measured
    } else {
        InterLayerStatus::GapUnavailable
    };

    // strongest physical cell per (pci, layer, rat)
    let mut best: BTreeMap<(Pci, u8, Rat), (f64, usize)> = BTreeMap::new();
    for (i, cell) in topology.cells.iter().enumerate() {
        if Some(i) == serving_idx {
            continue;
        }
        let r = view.rsrp_dbm[i];
        if !(r >= params.detection_threshold_dbm) {
            continue;
        }
        if let Some(s) = &serving {
            let intra = cell.freq_layer == s.freq_layer && cell.rat == s.rat;
            if intra && cell.pci == s.pci {
                continue;
            }
            if !intra {
                if connected && inter_layer != InterLayerStatus::Measured {
                    continue;
                }
                if let Some(layers) = &meas.inter_layers {
                    if !layers.contains(&cell.freq_layer) {
                        continue;
                    }
                }
            }
        }
        let key = (cell.pci, cell.freq_layer, cell.rat);
        let replace = match best.get(&key) {
            None => true,
            Some(&(br, bi)) => r > br || (r == br && cell.ecgi < topology.cells[bi].ecgi),
        };
        if replace {
            best.insert(key, (r, i));
        }
    }

    let mut cells: Vec<ReportedCell> = best
        .into_values()
        .map(|(r, i)| {
            let c = &topology.cells[i];
            ReportedCell {
                pci: c.pci,
                rsrp_dbm: r,
                freq_layer: c.freq_layer,
                rat: c.rat,
                ecgi: view.decodes_ecgi.then_some(c.ecgi),
                true_ecgi: c.ecgi,
            }
        })
        .collect();
    cells.sort_by(|a, b| b.rsrp_dbm.total_cmp(&a.rsrp_dbm).then(a.pci.cmp(&b.pci)).then(a.true_ecgi.cmp(&b.true_ecgi)));

    Ok(MeasurementReport { ue_id: view.ue_id, timestamp_s: now, serving, cells, inter_layer })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MobilityEvent {
    pub kind: EventKind,
    pub target: Option<ReportedCell>,
    pub timestamp_s: f64,
}

/// Episode key: event kind plus the target PCI for neighbour events.
pub type EpisodeKey = (EventKind, Option<(Pci, u8, Rat)>);

fn target_key(c: &ReportedCell) -> (Pci, u8, Rat) {
    (c.pci, c.freq_layer, c.rat)
}

/// Entering conditions of every enabled event that hold on this report.
pub fn satisfied_conditions(
    report: &MeasurementReport,
    cfg: &EventConfig,
    secondary: Option<Pci>,
) -> BTreeMap<EpisodeKey, Option<ReportedCell>> {
    let mut out = BTreeMap::new();
    let Some(s) = &report.serving else { return out };
    let ms = s.rsrp_dbm;
    let hys = cfg.hysteresis_db;
    let on = |k| cfg.enabled.contains(&k);

    if on(EventKind::A1) && ms > cfg.a1_thresh_dbm + hys {
        out.insert((EventKind::A1, None), None);
    }
    if on(EventKind::A2) && ms < cfg.a2_thresh_dbm - hys {
        out.insert((EventKind::A2, None), None);
    }
    let msec = secondary.and_then(|p| report.cells.iter().find(|c| c.pci == p && c.rat == s.rat).map(|c| c.rsrp_dbm));
    for c in &report.cells {
        let mn = c.rsrp_dbm;
        let intra_rat = c.rat == s.rat;
        let mut fire = |k: EventKind| {
            out.insert((k, Some(target_key(c))), Some(c.clone()));
        };
        if intra_rat {
            if on(EventKind::A3) && mn > ms + cfg.a3_offset_db + hys {
                fire(EventKind::A3);
            }
            if on(EventKind::A4) && mn > cfg.a4_thresh_dbm + hys {
                fire(EventKind::A4);
            }
            if on(EventKind::A5) && ms < cfg.a5_thresh1_dbm - hys && mn > cfg.a5_thresh2_dbm + hys {
                fire(EventKind::A5);
            }
            if on(EventKind::A6) && Some(c.pci) != secondary {
                if let Some(msec) = msec {
                    if mn > msec + cfg.a6_offset_db + hys {
                        fire(EventKind::A6);
                    }
                }
            }
        } else {
            if on(EventKind::B1) && mn > cfg.b1_thresh_dbm + hys {
                fire(EventKind::B1);
            }
            if on(EventKind::B2) && ms < cfg.b2_thresh1_dbm - hys && mn > cfg.b2_thresh2_dbm + hys {
                fire(EventKind::B2);
            }
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Episode {
    start_s: f64,
    fired: bool,
}

/// Incremental evaluator holding the per-UE time-to-trigger timers.
#[derive(Debug, Clone, PartialEq)]
pub struct EventEvaluator {
    secondary: Option<Pci>,
    episodes: BTreeMap<EpisodeKey, Episode>,
}

impl EventEvaluator {
    pub fn new(cfg: &EventConfig, secondary: Option<Pci>) -> Result<Self, RrmError> {
        cfg.validate()?;
        if cfg.enabled.contains(&EventKind::A6) && secondary.is_none() {
            return Err(RrmError::A6WithoutSecondary);
        }
        Ok(Self { secondary, episodes: BTreeMap::new() })
    }

    /// Feeds one report; `cfg` may vary between calls (per-UE A3 offsets).
    pub fn step(&mut self, report: &MeasurementReport, cfg: &EventConfig) -> Vec<MobilityEvent> {
        let now = report.timestamp_s;
        let sat = satisfied_conditions(report, cfg, self.secondary);
        // a report taken between gaps says nothing about other layers, so
        // their episodes keep running (they can only fire once measured)
        let unmeasured = |k: &EpisodeKey| match (&report.serving, k.1) {
            (Some(s), Some((_, layer, rat))) => {
                report.inter_layer == InterLayerStatus::GapUnavailable && (layer != s.freq_layer || rat != s.rat)
            }
            _ => false,
        };
        self.episodes.retain(|k, _| sat.contains_key(k) || unmeasured(k));
        let mut fired = Vec::new();
        for (key, target) in sat {
            let ep = self.episodes.entry(key).or_insert(Episode { start_s: now, fired: false });
            if !ep.fired && now - ep.start_s + TIME_EPS >= cfg.time_to_trigger_s {
                ep.fired = true;
                fired.push(MobilityEvent { kind: key.0, target, timestamp_s: now });
            }
        }
        fired
    }

    /// Forgets the episode of one target so the event can fire again.
    pub fn rearm(&mut self, kind: EventKind, target: &ReportedCell) {
        self.episodes.remove(&(kind, Some(target_key(target))));
    }

    pub fn reset(&mut self) {
        self.episodes.clear();
    }
}

/// Evaluates a whole report history and returns every event in firing order.
pub fn evaluate_events(
    history: &[MeasurementReport],
    cfg: &EventConfig,
    secondary: Option<Pci>,
) -> Result<Vec<MobilityEvent>, RrmError> {
    let mut ev = EventEvaluator::new(cfg, secondary)?;
    Ok(history.iter().flat_map(|r| ev.step(r, cfg)).collect())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::geo::{AntennaConfig, Position};
    use crate::topology::{Bounds, CellRecord, PciPools, Tier};
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn report(t: f64, ms: f64, neighbours: &[(u16, f64)]) -> MeasurementReport {
        MeasurementReport {
            ue_id: UeId(1),
            timestamp_s: t,
            serving: Some(ServingMeasurement { ecgi: Ecgi(1), pci: Pci(1), rsrp_dbm: ms, freq_layer: 0, rat: Rat::Nr }),
            cells: neighbours
                .iter()
                .map(|&(pci, r)| ReportedCell {
                    pci: Pci(pci),
                    rsrp_dbm: r,
                    freq_layer: 0,
                    rat: if pci >= 500 { Rat::Lte } else { Rat::Nr },
                    ecgi: None,
                    true_ecgi: Ecgi(pci as u64 + 100),
                })
                .collect(),
            inter_layer: InterLayerStatus::Measured,
        }
    }

    fn a3_only(offset: f64, hys: f64, ttt: f64) -> EventConfig {
        EventConfig {
            a3_offset_db: offset,
            hysteresis_db: hys,
            time_to_trigger_s: ttt,
            enabled: [EventKind::A3].into(),
            ..Default::default()
        }
    }

    #[test]
    fn a3_fires_when_neighbour_clears_offset() {
        let ev = evaluate_events(&[report(0.0, -90.0, &[(2, -86.0)])], &a3_only(3.0, 0.0, 0.0), None).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].kind, EventKind::A3);
        assert_eq!(ev[0].target.as_ref().unwrap().pci, Pci(2));
    }

    #[test]
    fn a3_stuck_below_3_db_margin() {
        let ev = evaluate_events(&[report(0.0, -90.0, &[(2, -88.0)])], &a3_only(3.0, 0.0, 0.0), None).unwrap();
        assert!(ev.is_empty());
    }

    #[test]
    fn ttt_resets_when_condition_breaks() {
        let cfg = a3_only(3.0, 0.0, 3.0);
        let h = [
            report(1.0, -90.0, &[(2, -80.0)]),
            report(2.0, -90.0, &[(2, -80.0)]),
            report(3.0, -90.0, &[(2, -95.0)]),
            report(4.0, -90.0, &[(2, -80.0)]),
        ];
        assert!(evaluate_events(&h, &cfg, None).unwrap().is_empty());
    }

    #[test]
    fn fires_once_per_episode() {
        let cfg = a3_only(3.0, 0.0, 1.0);
        let h: Vec<_> = (0..6).map(|i| report(i as f64, -90.0, &[(2, -80.0)])).collect();
        let ev = evaluate_events(&h, &cfg, None).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].timestamp_s, 1.0);
    }

    #[test]
    fn a6_needs_secondary() {
        let cfg = EventConfig { enabled: [EventKind::A6].into(), ..Default::default() };
        assert_eq!(evaluate_events(&[report(0.0, -90.0, &[])], &cfg, None), Err(RrmError::A6WithoutSecondary));
        let cfg = EventConfig { hysteresis_db: 0.0, time_to_trigger_s: 0.0, ..cfg };
        let ev = evaluate_events(&[report(0.0, -90.0, &[(5, -95.0), (6, -91.0)])], &cfg, Some(Pci(5))).unwrap();
        assert_eq!(ev.len(), 1);
        assert_eq!(ev[0].target.as_ref().unwrap().pci, Pci(6));
    }

    #[test]
    fn inter_rat_neighbours_feed_b_events_only() {
        let cfg = EventConfig {
            hysteresis_db: 0.0,
            time_to_trigger_s: 0.0,
            enabled: EventKind::ALL.iter().copied().filter(|k| *k != EventKind::A6).collect(),
            ..Default::default()
        };
        let ev = evaluate_events(&[report(0.0, -115.0, &[(600, -95.0)])], &cfg, None).unwrap();
        let kinds: BTreeSet<EventKind> = ev.iter().map(|e| e.kind).collect();
        assert_eq!(kinds, [EventKind::A2, EventKind::B1, EventKind::B2].into());
    }

    #[test]
    fn a1_a2_exclusive_with_shared_threshold() {
        let cfg = EventConfig {
            a1_thresh_dbm: -95.0,
            a2_thresh_dbm: -95.0,
            hysteresis_db: 0.5,
            time_to_trigger_s: 0.0,
            enabled: [EventKind::A1, EventKind::A2].into(),
            ..Default::default()
        };
        for i in 0..400 {
            let ms = -105.0 + i as f64 * 0.05;
            let ev = evaluate_events(&[report(0.0, ms, &[])], &cfg, None).unwrap();
            assert!(ev.len() <= 1, "ms={ms}");
        }
    }

    fn topo() -> Topology {
        let cell = |e: u64, pci: u16, layer: u8| CellRecord {
            ecgi: Ecgi(e),
            pci: Pci(pci),
            tier: Tier::Small,
            position: Position::new(e as f64 * 10.0, 0.0, 10.0),
            antenna: AntennaConfig::default(),
            freq_layer: layer,
            rat: Rat::Nr,
            tx_power_dbm: None,
        };
        Topology {
            cells: vec![cell(1, 200, 0), cell(2, 201, 0), cell(3, 202, 1), cell(4, 200, 0)],
            bounds: Bounds::square(1000.0),
            pools: PciPools::default(),
        }
    }

    #[test]
    fn idle_ue_measures_everything() {
        let t = topo();
        let r = [-80.0, -85.0, -90.0, -150.0];
        let view =
            UeRadioView { ue_id: UeId(1), serving: None, rsrp_dbm: &r, inter_layer_active: false, decodes_ecgi: false };
        let rep = take_measurements(
            &view,
            &t,
            &PropagationParams::default(),
            &MeasConfig::default(),
            RrcMode::Idle,
            RadioCapability::Single,
            0.1,
        )
        .unwrap();
        assert_eq!(rep.cells.iter().map(|c| c.true_ecgi).collect::<Vec<_>>(), vec![Ecgi(1), Ecgi(2), Ecgi(3)]);
    }

    #[test]
    fn connected_single_radio_between_gaps_drops_inter_layer() {
        let t = topo();
        let meas = MeasConfig { inter_layer_requires_a2: false, ..Default::default() };
        let r = [-80.0, -85.0, -90.0, -150.0];
        let view = UeRadioView {
            ue_id: UeId(1),
            serving: Some(Ecgi(1)),
            rsrp_dbm: &r,
            inter_layer_active: true,
            decodes_ecgi: false,
        };
        // gap windows [0.48k, 0.48k + 0.04): the period (0.6, 0.8] holds none
        assert!(!meas.gap_in_period(0.8));
        let rep = take_measurements(
            &view,
            &t,
            &PropagationParams::default(),
            &meas,
            RrcMode::Connected,
            RadioCapability::Single,
            0.8,
        )
        .unwrap();
        assert_eq!(rep.inter_layer, InterLayerStatus::GapUnavailable);
        assert_eq!(rep.cells.iter().map(|c| c.true_ecgi).collect::<Vec<_>>(), vec![Ecgi(2)]);
        // (0.8, 1.0] holds the gap at 0.96
        assert!(meas.gap_in_period(1.0));
        let rep = take_measurements(
            &view,
            &t,
            &PropagationParams::default(),
            &meas,
            RrcMode::Connected,
            RadioCapability::Single,
            1.0,
        )
        .unwrap();
        assert_eq!(rep.inter_layer, InterLayerStatus::Measured);
        assert_eq!(rep.cells.len(), 2);
        let dual = take_measurements(
            &view,
            &t,
            &PropagationParams::default(),
            &meas,
            RrcMode::Connected,
            RadioCapability::Dual,
            0.8,
        )
        .unwrap();
        assert_eq!(dual.cells.len(), 2);
    }

    #[test]
    fn same_pci_as_serving_is_invisible() {
        let t = topo();
        let r = [-90.0, -100.0, -150.0, -70.0];
        let view = UeRadioView {
            ue_id: UeId(1),
            serving: Some(Ecgi(1)),
            rsrp_dbm: &r,
            inter_layer_active: false,
            decodes_ecgi: false,
        };
        let rep = take_measurements(
            &view,
            &t,
            &PropagationParams::default(),
            &MeasConfig::default(),
            RrcMode::Connected,
            RadioCapability::Single,
            0.2,
        )
        .unwrap();
        assert!(rep.cells.iter().all(|c| c.pci != Pci(200)));
        assert_eq!(rep.cells.len(), 1);
    }

    // ---- brute-force oracle -------------------------------------------------

    fn oracle_condition(
        r: &MeasurementReport,
        cfg: &EventConfig,
        kind: EventKind,
        target: Option<Pci>,
        secondary: Option<Pci>,
    ) -> bool {
        let ms = r.serving.as_ref().unwrap().rsrp_dbm;
        let h = cfg.hysteresis_db;
        let n = target.and_then(|p| r.cells.iter().find(|c| c.pci == p));
        match (kind, n) {
            (EventKind::A1, _) => ms > cfg.a1_thresh_dbm + h,
            (EventKind::A2, _) => ms < cfg.a2_thresh_dbm - h,
            (_, None) => false,
            (EventKind::A3, Some(c)) => c.rat == Rat::Nr && c.rsrp_dbm > ms + cfg.a3_offset_db + h,
            (EventKind::A4, Some(c)) => c.rat == Rat::Nr && c.rsrp_dbm > cfg.a4_thresh_dbm + h,
            (EventKind::A5, Some(c)) => {
                c.rat == Rat::Nr && ms < cfg.a5_thresh1_dbm - h && c.rsrp_dbm > cfg.a5_thresh2_dbm + h
            }
            (EventKind::A6, Some(c)) => {
                let sec = secondary.and_then(|s| r.cells.iter().find(|x| x.pci == s && x.rat == Rat::Nr));
                c.rat == Rat::Nr
                    && Some(c.pci) != secondary
                    && sec.is_some_and(|s| c.rsrp_dbm > s.rsrp_dbm + cfg.a6_offset_db + h)
            }
            (EventKind::B1, Some(c)) => c.rat == Rat::Lte && c.rsrp_dbm > cfg.b1_thresh_dbm + h,
            (EventKind::B2, Some(c)) => {
                c.rat == Rat::Lte && ms < cfg.b2_thresh1_dbm - h && c.rsrp_dbm > cfg.b2_thresh2_dbm + h
            }
        }
    }

    /// Re-checks every inequality over the whole window behind each report.
    pub(crate) fn oracle_events(
        h: &[MeasurementReport],
        cfg: &EventConfig,
        secondary: Option<Pci>,
    ) -> Vec<(usize, EventKind, Option<Pci>)> {
        let mut out = Vec::new();
        let pcis: BTreeSet<Pci> = h.iter().flat_map(|r| r.cells.iter().map(|c| c.pci)).collect();
        for k in 0..h.len() {
            for kind in EventKind::ALL {
                if !cfg.enabled.contains(&kind) {
                    continue;
                }
                let targets: Vec<Option<Pci>> =
                    if kind.has_target() { pcis.iter().map(|p| Some(*p)).collect() } else { vec![None] };
                for t in targets {
                    let cond = |j: usize| oracle_condition(&h[j], cfg, kind, t, secondary);
                    // inter-RAT targets are not measured on gapless reports
                    let skipped = |j: usize| {
                        h[j].inter_layer == InterLayerStatus::GapUnavailable && t.is_some_and(|p| p.0 >= 500)
                    };
                    if !cond(k) {
                        continue;
                    }
                    let mut s = k;
                    while s > 0 && (cond(s - 1) || skipped(s - 1)) {
                        s -= 1;
                    }
                    // the episode may open on a skipped report only if it was already running
                    while !cond(s) {
                        s += 1;
                    }
                    let held = |j: usize| h[j].timestamp_s - h[s].timestamp_s + 1e-9 >= cfg.time_to_trigger_s;
                    if held(k) && !(s..k).any(|j| cond(j) && held(j)) {
                        out.push((k, kind, t));
                    }
                }
            }
        }
        out.sort_by_key(|&(k, kind, t)| (k, kind, t));
        out
    }

    pub(crate) fn random_instance(rng: &mut ChaCha8Rng) -> (Vec<MeasurementReport>, EventConfig, Option<Pci>) {
        let len = rng.random_range(1..25);
        let dt = [0.1, 0.2, 0.5][rng.random_range(0..3)];
        let pcis: Vec<u16> = vec![2, 3, 4, 600, 601];
        let mut h = Vec::with_capacity(len);
        let mut ms = rng.random_range(-115.0..-70.0);
        for i in 0..len {
            ms += rng.random_range(-4.0..4.0);
            let mut cells = Vec::new();
            for &p in &pcis {
                if rng.random_bool(0.75) {
                    cells.push((p, rng.random_range(-120.0..-65.0)));
                }
            }
            let mut r = report(i as f64 * dt, ms, &cells);
            if rng.random_bool(0.3) {
                r.inter_layer = InterLayerStatus::GapUnavailable;
                r.cells.retain(|c| c.rat == Rat::Nr);
            }
            r.cells.sort_by(|a, b| b.rsrp_dbm.total_cmp(&a.rsrp_dbm));
            h.push(r);
        }
        let t1 = rng.random_range(-115.0..-95.0);
        let b1 = rng.random_range(-118.0..-100.0);
        let mut enabled: BTreeSet<EventKind> =
            EventKind::ALL.iter().copied().filter(|_| rng.random_bool(0.7)).collect();
        let secondary = if rng.random_bool(0.5) { Some(Pci(4)) } else { None };
        if secondary.is_none() {
            enabled.remove(&EventKind::A6);
        }
        let cfg = EventConfig {
            a1_thresh_dbm: rng.random_range(-110.0..-70.0),
            a2_thresh_dbm: rng.random_range(-115.0..-80.0),
            a3_offset_db: rng.random_range(-2.0..6.0),
            a4_thresh_dbm: rng.random_range(-110.0..-70.0),
            a5_thresh1_dbm: t1,
            a5_thresh2_dbm: t1 + rng.random_range(0.5..15.0),
            a6_offset_db: rng.random_range(-1.0..5.0),
            b1_thresh_dbm: rng.random_range(-110.0..-70.0),
            b2_thresh1_dbm: b1,
            b2_thresh2_dbm: b1 + rng.random_range(0.5..15.0),
            hysteresis_db: if rng.random_bool(0.2) { 0.0 } else { rng.random_range(0.0..3.0) },
            time_to_trigger_s: [0.0, 0.1, 0.2, 0.48, 1.0, 2.5][rng.random_range(0..6)],
            enabled,
        };
        (h, cfg, secondary)
    }

    pub(crate) fn as_triples(h: &[MeasurementReport], ev: &[MobilityEvent]) -> Vec<(usize, EventKind, Option<Pci>)> {
        let mut v: Vec<_> = ev
            .iter()
            .map(|e| {
                let k = h.iter().position(|r| r.timestamp_s == e.timestamp_s).unwrap();
                (k, e.kind, e.target.as_ref().map(|c| c.pci))
            })
            .collect();
        v.sort_by_key(|&(k, kind, t)| (k, kind, t));
        v
    }

    #[test]
    fn evaluator_matches_oracle_on_random_instances() {
        let mut rng = ChaCha8Rng::seed_from_u64(0xE7E7);
        for _ in 0..2_000 {
            let (h, cfg, sec) = random_instance(&mut rng);
            let got = evaluate_events(&h, &cfg, sec).unwrap();
            assert_eq!(as_triples(&h, &got), oracle_events(&h, &cfg, sec));
        }
    }

    #[test]
    fn zero_hys_zero_ttt_is_pointwise() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..500 {
            let (mut h, mut cfg, sec) = random_instance(&mut rng);
            cfg.hysteresis_db = 0.0;
            cfg.time_to_trigger_s = 0.0;
            // gapless reports carry episodes over, which is not pointwise
            h.iter_mut().for_each(|r| r.inter_layer = InterLayerStatus::Measured);
            let got = as_triples(&h, &evaluate_events(&h, &cfg, sec).unwrap());
            // pointwise: fire at k iff true at k and not at k-1
            let mut want = Vec::new();
            let pcis: BTreeSet<Pci> = h.iter().flat_map(|r| r.cells.iter().map(|c| c.pci)).collect();
            for k in 0..h.len() {
                for kind in cfg.enabled.iter().copied() {
                    let ts: Vec<Option<Pci>> =
                        if kind.has_target() { pcis.iter().map(|p| Some(*p)).collect() } else { vec![None] };
                    for t in ts {
                        let now = oracle_condition(&h[k], &cfg, kind, t, sec);
                        let before = k > 0 && oracle_condition(&h[k - 1], &cfg, kind, t, sec);
                        if now && !before {
                            want.push((k, kind, t));
                        }
                    }
                }
            }
            want.sort_by_key(|&(k, kind, t)| (k, kind, t));
            assert_eq!(got, want);
        }
    }

    proptest! {
        #[test]
        fn raising_a3_offset_never_adds_events(seed in any::<u64>(), bump in 0.0f64..5.0) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let (h, mut cfg, _) = random_instance(&mut rng);
            cfg.enabled = [EventKind::A3].into();
            let base: BTreeSet<_> = as_triples(&h, &evaluate_events(&h, &cfg, None).unwrap())
                .into_iter().map(|(_, _, t)| t).collect();
            let raised = EventConfig { a3_offset_db: cfg.a3_offset_db + bump, ..cfg.clone() };
            // raised-offset episodes are sub-intervals of the baseline ones
            let higher: BTreeSet<_> = as_triples(&h, &evaluate_events(&h, &raised, None).unwrap())
                .into_iter().map(|(_, _, t)| t).collect();
            prop_assert!(higher.is_subset(&base));
        }
    }
}
