//! Scenario file schema (JSON, unknown keys rejected).

use std::collections::BTreeSet;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::anr::{AnrPolicy, TableKind};
use crate::geo::PropagationParams;
use crate::handover::{AdaptiveA3, HoConfig, RlfConfig};
use crate::mobility::MobilityModel;
use crate::rrm::{EventConfig, EventKind, MeasConfig, RadioCapability};
use crate::topology::{assign_pcis, Bounds, CellRecord, PciPools, Topology, TopologyGenerator};
use crate::{Ecgi, Pci, UeId, UeKind};

use super::SimError;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum TopologySpec {
    Inline {
        cells: Vec<CellRecord>,
        bounds: Bounds,
        #[serde(default)]
        pools: PciPools,
    },
    Generated(TopologyGenerator),
}

impl TopologySpec {
    pub fn build(&self) -> Result<Topology, SimError> {
        let t = match self {
            TopologySpec::Inline { cells, bounds, pools } => {
                Topology { cells: cells.clone(), bounds: *bounds, pools: pools.clone() }
            }
            TopologySpec::Generated(g) => g.generate().map_err(|e| SimError::Validation(e.to_string()))?,
        };
        t.validate().map_err(|e| SimError::Validation(e.to_string()))?;
        Ok(t)
    }
}

/// Pre-provisioned neighbour relation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NrtEntry {
    pub owner: Ecgi,
    pub pci: Pci,
    pub ecgi: Ecgi,
    #[serde(default = "ground_table")]
    pub table: TableKind,
}

fn ground_table() -> TableKind {
    TableKind::Ground
}

fn single_radio() -> RadioCapability {
    RadioCapability::Single
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UeSpec {
    pub id: UeId,
    pub kind: UeKind,
    #[serde(default = "single_radio")]
    pub radio: RadioCapability,
    pub mobility: MobilityModel,
    /// Probability the UE is busy with data when a measurement gap comes up.
    #[serde(default)]
    pub data_activity: f64,
    /// Statically configured secondary cell (needed for A6).
    #[serde(default)]
    pub secondary_pci: Option<Pci>,
    /// Cell to start on; defaults to the strongest cell at t = 0.
    #[serde(default)]
    pub initial_serving: Option<Ecgi>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PerKind<T> {
    pub uav: T,
    pub gue: T,
}

impl<T> PerKind<T> {
    pub fn get(&self, kind: UeKind) -> &T {
        match kind {
            UeKind::Uav => &self.uav,
            UeKind::Gue => &self.gue,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mitigation {
    SeparateAerial,
    AlwaysResolveEcgi,
    AdaptiveA3,
}

impl Mitigation {
    pub const ALL: [Mitigation; 3] =
        [Mitigation::SeparateAerial, Mitigation::AlwaysResolveEcgi, Mitigation::AdaptiveA3];

    pub fn as_str(self) -> &'static str {
        match self {
            Mitigation::SeparateAerial => "separate_aerial",
            Mitigation::AlwaysResolveEcgi => "always_resolve_ecgi",
            Mitigation::AdaptiveA3 => "adaptive_a3",
        }
    }
}

impl fmt::Display for Mitigation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mitigation {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        Mitigation::ALL.into_iter().find(|m| m.as_str() == s.trim()).ok_or_else(|| {
            format!("unknown mitigation {s:?} (expected separate_aerial, always_resolve_ecgi or adaptive_a3)")
        })
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Mitigations {
    pub separate_aerial: bool,
    /// Always resolve ECGIs; every UE gets a second radio to sense them.
    pub always_resolve_ecgi: bool,
    /// Altitude-dependent A3 offset for UAVs (default policy unless `ho.adaptive_a3` is set).
    pub adaptive_a3: bool,
}

impl Mitigations {
    pub fn enable(&mut self, m: Mitigation) {
        match m {
            Mitigation::SeparateAerial => self.separate_aerial = true,
            Mitigation::AlwaysResolveEcgi => self.always_resolve_ecgi = true,
            Mitigation::AdaptiveA3 => self.adaptive_a3 = true,
        }
    }
}

fn default_dt() -> f64 {
    0.1
}

fn default_trace_every() -> u32 {
    1
}

fn default_nrt_sample() -> f64 {
    10.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioConfig {
    #[serde(default)]
    pub name: String,
    pub topology: TopologySpec,
    #[serde(default)]
    pub initial_nrt: Vec<NrtEntry>,
    pub ues: Vec<UeSpec>,
    #[serde(default)]
    pub params: PropagationParams,
    #[serde(default)]
    pub meas: MeasConfig,
    #[serde(default)]
    pub events: PerKind<EventConfig>,
    #[serde(default)]
    pub anr: AnrPolicy,
    #[serde(default)]
    pub ho: HoConfig,
    #[serde(default)]
    pub rlf: RlfConfig,
    #[serde(default = "default_dt")]
    pub dt_s: f64,
    pub duration_s: f64,
    #[serde(default)]
    pub seed: u64,
    /// Write every n-th tick to the trace.
    #[serde(default = "default_trace_every")]
    pub trace_every: u32,
    #[serde(default = "default_nrt_sample")]
    pub nrt_sample_every_s: f64,
    /// Allow UAV speeds up to 300 km/h.
    #[serde(default)]
    pub extended_speed: bool,
    #[serde(default)]
    pub mitigations: Mitigations,
    /// Altitude tag of the run; set by altitude sweeps.
    #[serde(default)]
    pub altitude_m: Option<f64>,
}

impl ScenarioConfig {
    pub fn from_json(text: &str) -> Result<Self, SimError> {
        let cfg: ScenarioConfig = serde_json::from_str(text).map_err(|e| SimError::Parse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("scenario serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |m: String| Err(SimError::Validation(m));
        if !(self.dt_s > 0.0 && self.dt_s.is_finite()) {
            return bad(format!("dt_s must be > 0, got {}", self.dt_s));
        }
        // a zero duration is an empty run; otherwise at least one tick
        if !(self.duration_s == 0.0 || self.duration_s >= self.dt_s) || !self.duration_s.is_finite() {
            return bad(format!("duration_s must be 0 or >= dt_s, got {}", self.duration_s));
        }
        if self.trace_every == 0 {
            return bad("trace_every must be >= 1".into());
        }
        if !(self.nrt_sample_every_s > 0.0) {
            return bad("nrt_sample_every_s must be > 0".into());
        }
        let v = |r: Result<(), String>| r.map_err(SimError::Validation);
        v(self.params.validate().map_err(|e| e.to_string()))?;
        v(self.meas.validate().map_err(|e| e.to_string()))?;
        v(self.events.uav.validate().map_err(|e| format!("events.uav: {e}")))?;
        v(self.events.gue.validate().map_err(|e| format!("events.gue: {e}")))?;
        v(self.anr.validate().map_err(|e| e.to_string()))?;
        v(self.ho.validate().map_err(|e| e.to_string()))?;
        v(self.rlf.validate().map_err(|e| e.to_string()))?;
        let topology = self.topology.build()?;

        let mut ids = BTreeSet::new();
        for ue in &self.ues {
            if !ids.insert(ue.id) {
                return bad(format!("duplicate UE id {}", ue.id));
            }
            ue.mobility
                .validate(ue.kind, self.extended_speed)
                .map_err(|e| SimError::Validation(format!("UE {}: {e}", ue.id)))?;
            if !(0.0..=1.0).contains(&ue.data_activity) {
                return bad(format!("UE {}: data_activity must be in [0, 1]", ue.id));
            }
            if self.events.get(ue.kind).enabled.contains(&EventKind::A6) && ue.secondary_pci.is_none() {
                return bad(format!("UE {}: A6 enabled without a secondary cell", ue.id));
            }
            if let Some(e) = ue.initial_serving {
                if topology.cell(e).is_none() {
                    return bad(format!("UE {}: unknown initial serving cell {e}", ue.id));
                }
            }
        }
        for entry in &self.initial_nrt {
            if topology.cell(entry.owner).is_none() || topology.cell(entry.ecgi).is_none() {
                return bad(format!("initial_nrt references unknown cell ({} -> {})", entry.owner, entry.ecgi));
            }
            if entry.table == TableKind::Aerial && !self.effective().anr.separate_aerial {
                return bad("initial_nrt uses the aerial table but separate_aerial is off".into());
            }
        }
        Ok(())
    }

    /// Moves every UAV path to `altitude` and tags the run with it.
    pub fn with_altitude(&self, altitude: f64) -> Self {
        let mut c = self.clone();
        c.altitude_m = Some(altitude);
        for ue in c.ues.iter_mut().filter(|u| u.kind == UeKind::Uav) {
            ue.mobility = ue.mobility.with_altitude(altitude);
        }
        c
    }

    pub fn with_mitigations(&self, list: &[Mitigation]) -> Self {
        let mut c = self.clone();
        for &m in list {
            c.mitigations.enable(m);
        }
        c
    }

    /// Same scenario with the topology inlined and PCIs re-planned by
    /// [`assign_pcis`]; preconfigured neighbour relations follow their cells.
    pub fn replan_pcis(&self) -> Result<Self, SimError> {
        let mut topology = self.topology.build()?;
        let plan = assign_pcis(&topology, &topology.pools).map_err(|e| SimError::Validation(e.to_string()))?;
        topology.apply_pcis(&plan);
        let mut c = self.clone();
        for e in &mut c.initial_nrt {
            if let Some(&pci) = plan.get(&e.ecgi) {
                e.pci = pci;
            }
        }
        c.topology = TopologySpec::Inline { cells: topology.cells, bounds: topology.bounds, pools: topology.pools };
        Ok(c)
    }

    /// Configuration with mitigation toggles folded into the module configs.
    pub fn effective(&self) -> Self {
        let mut c = self.clone();
        let m = self.mitigations;
        c.anr.separate_aerial |= m.separate_aerial;
        c.anr.always_resolve_ecgi |= m.always_resolve_ecgi;
        c.mitigations.separate_aerial = c.anr.separate_aerial;
        c.mitigations.always_resolve_ecgi = c.anr.always_resolve_ecgi;
        if c.anr.always_resolve_ecgi {
            for ue in &mut c.ues {
                ue.radio = RadioCapability::Dual;
            }
        }
        if m.adaptive_a3 && c.ho.adaptive_a3.is_none() {
            c.ho.adaptive_a3 = Some(AdaptiveA3::default());
        }
        c
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn minimal() -> &'static str {
        r#"{
            "topology": {"inline": {
                "bounds": {"x_min": 0, "x_max": 100, "y_min": 0, "y_max": 100},
                "cells": [{"ecgi": 1, "pci": 200, "tier": "Small", "position": {"x": 50, "y": 50, "z": 10}}]
            }},
            "ues": [{"id": 1, "kind": "GUE", "mobility": {"type": "Static", "position": {"x": 10, "y": 10, "z": 1.5}}}],
            "duration_s": 1.0
        }"#
    }

    #[test]
    fn minimal_scenario_loads_with_defaults() {
        let c = ScenarioConfig::from_json(minimal()).unwrap();
        assert_eq!(c.dt_s, 0.1);
        assert_eq!(c.ues[0].radio, RadioCapability::Single);
        assert_eq!(c.events.uav, EventConfig::default());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let text = minimal().replacen("\"duration_s\"", "\"bogus\": 1, \"duration_s\"", 1);
        assert!(matches!(ScenarioConfig::from_json(&text), Err(SimError::Parse(_))));
        let nested = minimal().replacen("\"kind\": \"GUE\"", "\"kind\": \"GUE\", \"colour\": \"red\"", 1);
        assert!(matches!(ScenarioConfig::from_json(&nested), Err(SimError::Parse(_))));
    }

    #[test]
    fn caps_are_load_time_errors() {
        let fast = minimal()
            .replace("\"kind\": \"GUE\"", "\"kind\": \"UAV\"")
            .replace(
                r#"{"type": "Static", "position": {"x": 10, "y": 10, "z": 1.5}}"#,
                r#"{"type": "FixedPath", "waypoints": [{"x": 0, "y": 0, "z": 100}, {"x": 90, "y": 0, "z": 100}], "speed_mps": 60}"#,
            );
        let e = ScenarioConfig::from_json(&fast).unwrap_err();
        assert!(matches!(e, SimError::Validation(_)), "{e}");
        assert_eq!(e.exit_code(), 2);

        let mut c: ScenarioConfig = serde_json::from_str(&fast).unwrap();
        c.extended_speed = true;
        assert!(c.validate().is_ok());

        let high = minimal().replace("\"z\": 1.5", "\"z\": 301").replace("\"kind\": \"GUE\"", "\"kind\": \"UAV\"");
        assert!(ScenarioConfig::from_json(&high).is_err());
    }

    #[test]
    fn duration_rules() {
        let mut c = ScenarioConfig::from_json(minimal()).unwrap();
        c.duration_s = 0.0;
        assert!(c.validate().is_ok());
        c.duration_s = 0.05;
        assert!(c.validate().is_err());
        c.duration_s = 1.0;
        c.dt_s = 0.0;
        assert!(c.validate().is_err());
    }

    #[test]
    fn mitigations_fold_into_module_configs() {
        let c = ScenarioConfig::from_json(minimal()).unwrap().with_mitigations(&Mitigation::ALL);
        let e = c.effective();
        assert!(e.anr.separate_aerial && e.anr.always_resolve_ecgi);
        assert_eq!(e.ho.adaptive_a3, Some(AdaptiveA3::default()));
        assert!(e.ues.iter().all(|u| u.radio == RadioCapability::Dual));
        assert_eq!("adaptive_a3".parse::<Mitigation>(), Ok(Mitigation::AdaptiveA3));
        assert!("faster".parse::<Mitigation>().is_err());
    }
}
