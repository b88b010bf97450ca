use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    change_rates, nth_closest_strongest, strongest_changes, AltitudeBin, AltitudeBins, AnalysisError, DistanceMode,
    ExternalTrace, NTH_BUCKETS,
};
use crate::anr::BlockListEvent;
use crate::handover::{detect_pingpong, HoAttempt, HoOutcome};
use crate::rrm::RadioCapability;
use crate::{Ecgi, UeId, UeKind};

use super::{round_time, Mitigations, ScenarioConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UeMetrics {
    pub ue_id: UeId,
    pub kind: UeKind,
    pub radio: RadioCapability,
    pub handovers: u64,
    pub pingpongs: u64,
    /// Failed attempts by outcome name.
    pub failures: BTreeMap<String, u64>,
    pub cancelled: u64,
    pub disconnects: u64,
    pub drop_causes: BTreeMap<String, u64>,
    /// Seconds spent in RLF or re-establishment.
    pub interruption_s: f64,
    /// Execution time of successful handovers.
    pub ho_interruption_s: f64,
    /// Data time lost to ECGI decoding in measurement gaps.
    pub gap_interruption_s: f64,
    pub connected_s: f64,
    pub disconnected_s: f64,
    pub handovers_per_min: f64,
    pub ecgi_requests: u64,
    /// Reports where a known PCI pointed at a different physical cell.
    pub latent_confusions: u64,
}

impl UeMetrics {
    pub(crate) fn new(ue_id: UeId, kind: UeKind, radio: RadioCapability) -> Self {
        Self {
            ue_id,
            kind,
            radio,
            handovers: 0,
            pingpongs: 0,
            failures: BTreeMap::new(),
            cancelled: 0,
            disconnects: 0,
            drop_causes: BTreeMap::new(),
            interruption_s: 0.0,
            ho_interruption_s: 0.0,
            gap_interruption_s: 0.0,
            connected_s: 0.0,
            disconnected_s: 0.0,
            handovers_per_min: 0.0,
            ecgi_requests: 0,
            latent_confusions: 0,
        }
    }

    pub(crate) fn finalize(&mut self, attempts: &[HoAttempt], t_pingpong_s: f64) {
        for a in attempts {
            match a.outcome {
                HoOutcome::Success => self.handovers += 1,
                HoOutcome::Cancelled => self.cancelled += 1,
                o => *self.failures.entry(o.as_str().to_string()).or_default() += 1,
            }
        }
        self.pingpongs = detect_pingpong(attempts, t_pingpong_s) as u64;
        for v in [
            &mut self.interruption_s,
            &mut self.ho_interruption_s,
            &mut self.gap_interruption_s,
            &mut self.connected_s,
            &mut self.disconnected_s,
        ] {
            *v = round_time(*v);
        }
        self.handovers_per_min = rate_per_min(self.handovers, self.connected_s);
    }
}

fn rate_per_min(count: u64, seconds: f64) -> f64 {
    if seconds > 0.0 {
        count as f64 / (seconds / 60.0)
    } else {
        0.0
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct KindMetrics {
    pub ues: u64,
    pub handovers: u64,
    pub pingpongs: u64,
    pub failures: BTreeMap<String, u64>,
    pub cancelled: u64,
    pub disconnects: u64,
    pub drop_causes: BTreeMap<String, u64>,
    pub interruption_s: f64,
    pub connected_s: f64,
    pub handovers_per_min: f64,
}

impl KindMetrics {
    fn add(&mut self, u: &UeMetrics) {
        self.ues += 1;
        self.handovers += u.handovers;
        self.pingpongs += u.pingpongs;
        for (k, v) in &u.failures {
            *self.failures.entry(k.clone()).or_default() += v;
        }
        for (k, v) in &u.drop_causes {
            *self.drop_causes.entry(k.clone()).or_default() += v;
        }
        self.cancelled += u.cancelled;
        self.disconnects += u.disconnects;
        self.interruption_s = round_time(self.interruption_s + u.interruption_s);
        self.connected_s = round_time(self.connected_s + u.connected_s);
        self.handovers_per_min = rate_per_min(self.handovers, self.connected_s);
    }
}

/// Neighbour table occupancy of one cell at one instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrtSample {
    pub time_s: f64,
    pub owner: Ecgi,
    pub ground_size: usize,
    pub aerial_size: Option<usize>,
    pub ground_block_listed: usize,
    pub aerial_block_listed: Option<usize>,
}

/// Network-wide NRT occupancy at one sampling instant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrtSeriesPoint {
    pub time_s: f64,
    pub ground_total: usize,
    pub ground_max: usize,
    pub aerial_total: usize,
    pub aerial_max: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NrtMetrics {
    pub removals: u64,
    pub block_list_events: Vec<BlockListEvent>,
    pub series: Vec<NrtSeriesPoint>,
}

impl NrtMetrics {
    pub(crate) fn build(samples: &[NrtSample], block_list_events: Vec<BlockListEvent>, removals: u64) -> Self {
        let mut series: Vec<NrtSeriesPoint> = Vec::new();
        for s in samples {
            if series.last().is_none_or(|p| p.time_s != s.time_s) {
                series.push(NrtSeriesPoint {
                    time_s: s.time_s,
                    ground_total: 0,
                    ground_max: 0,
                    aerial_total: 0,
                    aerial_max: 0,
                });
            }
            let p = series.last_mut().expect("just pushed");
            p.ground_total += s.ground_size;
            p.ground_max = p.ground_max.max(s.ground_size);
            let a = s.aerial_size.unwrap_or(0);
            p.aerial_total += a;
            p.aerial_max = p.aerial_max.max(a);
        }
        Self { removals, block_list_events, series }
    }
}

/// Strongest-cell statistics of the UAV samples at one altitude.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AltitudeMetrics {
    pub altitude_m: f64,
    pub samples: u64,
    /// Fraction of samples whose strongest cell is the n-th closest (last entry: n ≥ 5).
    pub nth_closest: [f64; NTH_BUCKETS],
    pub changes: u64,
    pub minutes: f64,
    /// Absent when the bin has fewer than two rows.
    pub changes_per_min: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub scenario: String,
    pub seed: u64,
    pub altitude_m: Option<f64>,
    pub dt_s: f64,
    pub duration_s: f64,
    pub ticks: u64,
    pub mitigations: Mitigations,
    pub per_ue: Vec<UeMetrics>,
    pub per_kind: BTreeMap<UeKind, KindMetrics>,
    pub total: KindMetrics,
    /// UAV over GUE handovers per connected minute; null when undefined.
    pub uav_gue_ratio: Option<f64>,
    pub nrt: NrtMetrics,
    /// One entry per UAV altitude, ascending.
    pub strongest: Vec<AltitudeMetrics>,
}

impl MetricsReport {
    pub(crate) fn build(
        cfg: &ScenarioConfig,
        ticks: u64,
        per_ue: Vec<UeMetrics>,
        nrt: NrtMetrics,
        uav_trace: &ExternalTrace,
    ) -> Result<Self, AnalysisError> {
        let mut per_kind: BTreeMap<UeKind, KindMetrics> =
            [UeKind::Uav, UeKind::Gue].map(|k| (k, KindMetrics::default())).into();
        let mut total = KindMetrics::default();
        for u in &per_ue {
            per_kind.get_mut(&u.kind).expect("both kinds").add(u);
            total.add(u);
        }
        let (uav, gue) = (&per_kind[&UeKind::Uav], &per_kind[&UeKind::Gue]);
        let uav_gue_ratio = (uav.connected_s > 0.0 && gue.handovers_per_min > 0.0)
            .then(|| uav.handovers_per_min / gue.handovers_per_min);
        Ok(Self {
            scenario: cfg.name.clone(),
            seed: cfg.seed,
            altitude_m: cfg.altitude_m,
            dt_s: cfg.dt_s,
            duration_s: cfg.duration_s,
            ticks,
            mitigations: cfg.mitigations,
            per_ue,
            per_kind,
            total,
            uav_gue_ratio,
            nrt,
            strongest: strongest_by_altitude(uav_trace)?,
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("metrics serialize")
    }

    pub fn ue(&self, id: UeId) -> Option<&UeMetrics> {
        self.per_ue.iter().find(|u| u.ue_id == id)
    }

    pub fn kind(&self, kind: UeKind) -> &KindMetrics {
        &self.per_kind[&kind]
    }
}

/// Strongest-cell metrics of simulated UAV samples: exact altitude bins, 3D distances.
pub fn strongest_by_altitude(trace: &ExternalTrace) -> Result<Vec<AltitudeMetrics>, AnalysisError> {
    let bins = AltitudeBins::Exact;
    let nth = nth_closest_strongest(trace, bins, DistanceMode::ThreeD)?;
    let changes = strongest_changes(trace, bins);
    let rates = change_rates(trace, bins);
    let mut samples: BTreeMap<AltitudeBin, u64> = BTreeMap::new();
    for row in trace.rows.iter().filter(|r| !r.cells.is_empty()) {
        *samples.entry(AltitudeBin::of(row.position.z, bins)).or_default() += 1;
    }
    Ok(nth
        .into_iter()
        .map(|(bin, nth_closest)| {
            let rate = rates.get(&bin).copied().flatten();
            AltitudeMetrics {
                altitude_m: bin.metres(),
                samples: samples.get(&bin).copied().unwrap_or(0),
                nth_closest,
                changes: changes.get(&bin).copied().unwrap_or(0),
                minutes: rate.map_or(0.0, |r| r.minutes),
                changes_per_min: rate.map(|r| r.rate_per_min),
            }
        })
        .collect())
}
