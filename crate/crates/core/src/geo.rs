//! Radio environment: antenna patterns, LoS probability, path loss, RSRP and SINR.
//!
//! The channel is a log-distance model with separate LoS/NLoS exponents. The
//! probability of LoS follows an elevation-angle sigmoid, so a UE high above
//! the rooftops sees far cells in LoS while a ground UE mostly does not.
//! Cell antennas are vertical uniform linear arrays, which gives real side
//! lobes and nulls in elevation.
//!
//! Azimuths are measured in degrees clockwise from the +y axis.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::topology::CellRecord;

/// Floor applied to the combined antenna attenuation (front-to-back ratio).
pub const FRONT_TO_BACK_FLOOR_DB: f64 = 30.0;

const SPEED_OF_LIGHT_MPS: f64 = 299_792_458.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeoError {
    #[error("UE and cell are co-located; link geometry is undefined")]
    ZeroDistance,
    #[error("non-finite coordinate in position {0:?}")]
    NonFinite(Position),
    #[error("negative altitude {0} m")]
    NegativeAltitude(f64),
    #[error("invalid antenna configuration: {0}")]
    InvalidAntenna(String),
    #[error("invalid propagation parameters: {0}")]
    InvalidParams(String),
}

/// Point in the local metric frame; `z` is the altitude above ground.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    pub x: f64,
    pub y: f64,
    pub z: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64, z: f64) -> Self {
        Self { x, y, z }
    }

    pub fn validate(&self) -> Result<(), GeoError> {
        if !(self.x.is_finite() && self.y.is_finite() && self.z.is_finite()) {
            return Err(GeoError::NonFinite(*self));
        }
        if self.z < 0.0 {
            return Err(GeoError::NegativeAltitude(self.z));
        }
        Ok(())
    }

    pub fn distance(&self, other: &Position) -> f64 {
        let (dx, dy, dz) = (other.x - self.x, other.y - self.y, other.z - self.z);
        (dx * dx + dy * dy + dz * dz).sqrt()
    }

    pub fn horizontal_distance(&self, other: &Position) -> f64 {
        (other.x - self.x).hypot(other.y - self.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AntennaConfig {
    pub azimuth_deg: f64,
    /// Mechanical tilt, positive values point the boresight below the horizon.
    pub mech_tilt_deg: f64,
    pub element_count: u32,
    pub element_spacing_wavelengths: f64,
    pub max_gain_dbi: f64,
    pub azimuth_beamwidth_deg: f64,
}

impl Default for AntennaConfig {
    fn default() -> Self {
        Self {
            azimuth_deg: 0.0,
            mech_tilt_deg: 6.0,
            element_count: 8,
            element_spacing_wavelengths: 0.5,
            max_gain_dbi: 8.0,
            azimuth_beamwidth_deg: 65.0,
        }
    }
}

impl AntennaConfig {
    pub fn validate(&self) -> Result<(), GeoError> {
        if self.element_count == 0 {
            return Err(GeoError::InvalidAntenna("element_count must be >= 1".into()));
        }
        if !(self.element_spacing_wavelengths > 0.0) {
            return Err(GeoError::InvalidAntenna("element spacing must be > 0".into()));
        }
        if !(self.azimuth_beamwidth_deg > 0.0 && self.azimuth_beamwidth_deg <= 360.0) {
            return Err(GeoError::InvalidAntenna("azimuth beamwidth must be in (0, 360]".into()));
        }
        if !(0.0..360.0).contains(&self.azimuth_deg) {
            return Err(GeoError::InvalidAntenna("azimuth must be in [0, 360)".into()));
        }
        if !(self.mech_tilt_deg.is_finite() && self.max_gain_dbi.is_finite()) {
            return Err(GeoError::InvalidAntenna("tilt and gain must be finite".into()));
        }
        Ok(())
    }
}

/// How the LoS state of a link enters the path loss.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LosMode {
    /// Probability-weighted mix of the LoS and NLoS losses (no randomness).
    Expected,
    /// Bernoulli draw against the LoS probability, held for the decorrelation distance.
    Sampled,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PropagationParams {
    pub carrier_hz: f64,
    /// Used for cells that carry no per-cell transmit power.
    pub tx_power_dbm: f64,
    pub pl_exponent_los: f64,
    pub pl_exponent_nlos: f64,
    pub nlos_extra_loss_db: f64,
    pub los_sigmoid_a: f64,
    pub los_sigmoid_b: f64,
    pub shadowing_sigma_db: f64,
    pub noise_power_dbm: f64,
    pub detection_threshold_dbm: f64,
    pub los_mode: LosMode,
    /// Distance a UE must move before LoS/shadowing state is redrawn.
    pub decorrelation_m: f64,
    /// Fraction of full power at which co-layer interferers transmit.
    pub interference_load: f64,
}

impl Default for PropagationParams {
    fn default() -> Self {
        Self {
            carrier_hz: 3.6e9,
            tx_power_dbm: 15.0,
            pl_exponent_los: 2.1,
            pl_exponent_nlos: 3.3,
            nlos_extra_loss_db: 6.0,
            los_sigmoid_a: 9.6,
            los_sigmoid_b: 0.28,
            shadowing_sigma_db: 0.0,
            noise_power_dbm: -120.0,
            detection_threshold_dbm: -110.0,
            los_mode: LosMode::Expected,
            decorrelation_m: 10.0,
            interference_load: 1.0,
        }
    }
}

impl PropagationParams {
    pub fn validate(&self) -> Result<(), GeoError> {
        let bad = |m: &str| Err(GeoError::InvalidParams(m.to_string()));
        if !(self.carrier_hz > 0.0) {
            return bad("carrier must be > 0");
        }
        if !(self.pl_exponent_los > 0.0 && self.pl_exponent_nlos > 0.0) {
            return bad("path loss exponents must be > 0");
        }
        if !(self.shadowing_sigma_db >= 0.0) {
            return bad("shadowing sigma must be >= 0");
        }
        if !(self.decorrelation_m > 0.0) {
            return bad("decorrelation distance must be > 0");
        }
        if !(0.0..=1.0).contains(&self.interference_load) {
            return bad("interference load must be in [0, 1]");
        }
        if !(self.los_sigmoid_a >= 0.0 && self.los_sigmoid_b >= 0.0) {
            return bad("LoS sigmoid coefficients must be >= 0");
        }
        Ok(())
    }

    /// Free-space loss at 1 m for the configured carrier.
    pub fn reference_loss_db(&self) -> f64 {
        20.0 * (4.0 * std::f64::consts::PI * self.carrier_hz / SPEED_OF_LIGHT_MPS).log10()
    }
}

/// Relative placement of a UE as seen from a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkGeometry {
    pub distance_m: f64,
    pub horizontal_m: f64,
    /// Positive when the UE is above the antenna.
    pub elevation_deg: f64,
    pub bearing_deg: f64,
}

pub fn link_geometry(cell: &Position, ue: &Position) -> Result<LinkGeometry, GeoError> {
    let (dx, dy, dz) = (ue.x - cell.x, ue.y - cell.y, ue.z - cell.z);
    let horizontal_m = dx.hypot(dy);
    let distance_m = horizontal_m.hypot(dz);
    if !(distance_m > 0.0) {
        return Err(GeoError::ZeroDistance);
    }
    Ok(LinkGeometry {
        distance_m,
        horizontal_m,
        elevation_deg: dz.atan2(horizontal_m).to_degrees(),
        bearing_deg: dx.atan2(dy).to_degrees().rem_euclid(360.0),
    })
}

/// Normalised array factor of the vertical ULA in dB (0 at the steering angle,
/// `-inf` exactly at a null).
pub fn array_factor_db(cfg: &AntennaConfig, elevation_deg: f64) -> f64 {
    let n = cfg.element_count.max(1) as f64;
    if n == 1.0 {
        return 0.0;
    }
    let steer = (-cfg.mech_tilt_deg).to_radians();
    let psi =
        2.0 * std::f64::consts::PI * cfg.element_spacing_wavelengths * (elevation_deg.to_radians().sin() - steer.sin());
    let den = n * (psi / 2.0).sin();
    let af = if den.abs() < 1e-12 { 1.0 } else { ((n * psi / 2.0).sin() / den).abs() };
    20.0 * af.log10()
}

/// Vertical pattern term relative to boresight, floored at the front-to-back ratio.
pub fn vertical_gain_db(cfg: &AntennaConfig, elevation_deg: f64) -> f64 {
    array_factor_db(cfg, elevation_deg).max(-FRONT_TO_BACK_FLOOR_DB)
}

/// Parabolic horizontal roll-off, floored at the front-to-back ratio.
pub fn azimuth_gain_db(cfg: &AntennaConfig, azimuth_off_deg: f64) -> f64 {
    let off = (azimuth_off_deg + 180.0).rem_euclid(360.0) - 180.0;
    -(12.0 * (off / cfg.azimuth_beamwidth_deg).powi(2)).min(FRONT_TO_BACK_FLOOR_DB)
}

/// Antenna gain in dBi toward a direction given relative to the antenna.
pub fn antenna_gain(cfg: &AntennaConfig, elevation_deg: f64, azimuth_off_deg: f64) -> f64 {
    let attenuation = -(vertical_gain_db(cfg, elevation_deg) + azimuth_gain_db(cfg, azimuth_off_deg));
    cfg.max_gain_dbi - attenuation.min(FRONT_TO_BACK_FLOOR_DB)
}

pub fn gain_toward(cfg: &AntennaConfig, geometry: &LinkGeometry) -> f64 {
    antenna_gain(cfg, geometry.elevation_deg, geometry.bearing_deg - cfg.azimuth_deg)
}

/// LoS probability from the elevation angle between UE and cell.
pub fn los_probability(ue: &Position, cell: &Position, params: &PropagationParams) -> Result<f64, GeoError> {
    let g = link_geometry(cell, ue)?;
    Ok(los_probability_at(g.elevation_deg.abs(), params))
}

pub fn los_probability_at(elevation_deg: f64, params: &PropagationParams) -> f64 {
    let a = params.los_sigmoid_a;
    let b = params.los_sigmoid_b;
    (1.0 / (1.0 + a * (-b * (elevation_deg - a)).exp())).clamp(0.0, 1.0)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum LinkState {
    Los,
    Nlos,
    /// Probability-weighted loss with the given LoS probability.
    Expected(f64),
}

pub fn path_loss_db(distance_m: f64, state: LinkState, params: &PropagationParams) -> f64 {
    let reference = params.reference_loss_db();
    let log_d = distance_m.log10();
    let los = reference + 10.0 * params.pl_exponent_los * log_d;
    let nlos = reference + 10.0 * params.pl_exponent_nlos * log_d + params.nlos_extra_loss_db;
    match state {
        LinkState::Los => los,
        LinkState::Nlos => nlos,
        LinkState::Expected(p) => p * los + (1.0 - p) * nlos,
    }
}

/// Random inputs for one link: a uniform for the LoS draw and a standard
/// normal for shadowing. Both are ignored when the configuration does not
/// use them.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LinkDraw {
    pub los_uniform: f64,
    pub shadow_std_normal: f64,
}

pub fn rsrp(
    cell: &CellRecord,
    ue_pos: &Position,
    params: &PropagationParams,
    draw: &LinkDraw,
) -> Result<f64, GeoError> {
    let g = link_geometry(&cell.position, ue_pos)?;
    let p_los = los_probability_at(g.elevation_deg.abs(), params);
    let state = match params.los_mode {
        LosMode::Expected => LinkState::Expected(p_los),
        LosMode::Sampled if draw.los_uniform < p_los => LinkState::Los,
        LosMode::Sampled => LinkState::Nlos,
    };
    let tx = cell.tx_power_dbm.unwrap_or(params.tx_power_dbm);
    Ok(tx + gain_toward(&cell.antenna, &g)
        - path_loss_db(g.distance_m, state, params)
        - params.shadowing_sigma_db * draw.shadow_std_normal)
}

pub fn dbm_to_mw(dbm: f64) -> f64 {
    10f64.powf(dbm / 10.0)
}

pub fn mw_to_dbm(mw: f64) -> f64 {
    10.0 * mw.log10()
}

/// SINR from already computed received powers.
pub fn sinr_from_powers(
    serving_dbm: f64,
    interferers_dbm: impl IntoIterator<Item = f64>,
    params: &PropagationParams,
) -> f64 {
    let interference: f64 = interferers_dbm.into_iter().map(dbm_to_mw).sum::<f64>() * params.interference_load;
    serving_dbm - mw_to_dbm(interference + dbm_to_mw(params.noise_power_dbm))
}

/// SINR of `serving` at `ue_pos`. Only cells on the serving frequency layer interfere.
pub fn sinr(
    serving: &CellRecord,
    all_cells: &[CellRecord],
    ue_pos: &Position,
    params: &PropagationParams,
    draw: &LinkDraw,
) -> Result<f64, GeoError> {
    let s = rsrp(serving, ue_pos, params, draw)?;
    let mut interferers = Vec::new();
    for c in all_cells.iter().filter(|c| c.ecgi != serving.ecgi && c.freq_layer == serving.freq_layer) {
        interferers.push(rsrp(c, ue_pos, params, draw)?);
    }
    Ok(sinr_from_powers(s, interferers, params))
}
