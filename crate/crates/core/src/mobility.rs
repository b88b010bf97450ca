//! UE motion: fixed waypoint paths (UAV flights) and 2D random waypoint (ground users).

use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Position;
use crate::topology::Bounds;
use crate::UeKind;

/// 160 km/h.
pub const UAV_MAX_SPEED_MPS: f64 = 160.0 / 3.6;
/// 300 km/h, only with the extended speed mode.
pub const UAV_EXTENDED_MAX_SPEED_MPS: f64 = 300.0 / 3.6;
pub const UAV_MAX_ALTITUDE_M: f64 = 300.0;
pub const GUE_DEFAULT_HEIGHT_M: f64 = 1.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MobilityError {
    #[error("waypoint list is empty")]
    EmptyPath,
    #[error("time step must be > 0, got {0}")]
    BadStep(f64),
    #[error("speed {speed} m/s exceeds the {limit:.2} m/s cap")]
    SpeedCap { speed: f64, limit: f64 },
    #[error("altitude {0} m exceeds the 300 m cap")]
    AltitudeCap(f64),
    #[error("invalid mobility model: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", deny_unknown_fields)]
pub enum MobilityModel {
    FixedPath {
        waypoints: Vec<Position>,
        speed_mps: f64,
        #[serde(default, rename = "loop")]
        loop_path: bool,
    },
    RandomWaypoint2D {
        bounds: Bounds,
        speed_range_mps: (f64, f64),
        #[serde(default)]
        pause_s: f64,
        #[serde(default = "default_gue_height")]
        z_fixed: f64,
    },
    Static {
        position: Position,
    },
}

fn default_gue_height() -> f64 {
    GUE_DEFAULT_HEIGHT_M
}

impl MobilityModel {
    /// Load-time checks, including the UAV speed and altitude caps.
    pub fn validate(&self, kind: UeKind, extended_speed: bool) -> Result<(), MobilityError> {
        let speed_limit = if extended_speed { UAV_EXTENDED_MAX_SPEED_MPS } else { UAV_MAX_SPEED_MPS };
        let check_speed = |s: f64| -> Result<(), MobilityError> {
            if !(s >= 0.0 && s.is_finite()) {
                return Err(MobilityError::Invalid(format!("speed {s} m/s")));
            }
            if kind == UeKind::Uav && s > speed_limit + 1e-9 {
                return Err(MobilityError::SpeedCap { speed: s, limit: speed_limit });
            }
            Ok(())
        };
        let check_alt = |z: f64| -> Result<(), MobilityError> {
            if !(z >= 0.0 && z.is_finite()) {
                return Err(MobilityError::Invalid(format!("altitude {z} m")));
            }
            if kind == UeKind::Uav && z > UAV_MAX_ALTITUDE_M {
                return Err(MobilityError::AltitudeCap(z));
            }
            Ok(())
        };
        match self {
            MobilityModel::FixedPath { waypoints, speed_mps, .. } => {
                if waypoints.is_empty() {
                    return Err(MobilityError::EmptyPath);
                }
                check_speed(*speed_mps)?;
                for w in waypoints {
                    check_alt(w.z)?;
                }
            }
            MobilityModel::RandomWaypoint2D { speed_range_mps: (lo, hi), pause_s, z_fixed, .. } => {
                if !(lo <= hi && *lo > 0.0) {
                    return Err(MobilityError::Invalid("speed range must satisfy 0 < min <= max".into()));
                }
                check_speed(*hi)?;
                if !(*pause_s >= 0.0) {
                    return Err(MobilityError::Invalid("pause must be >= 0".into()));
                }
                check_alt(*z_fixed)?;
            }
            MobilityModel::Static { position } => check_alt(position.z)?,
        }
        Ok(())
    }

    pub fn initial_kinematics(&self, rng: &mut impl Rng) -> Result<UeKinematics, MobilityError> {
        match self {
            MobilityModel::FixedPath { waypoints, .. } => {
                let first = *waypoints.first().ok_or(MobilityError::EmptyPath)?;
                Ok(UeKinematics::at(first, 1.min(waypoints.len() - 1)))
            }
            MobilityModel::RandomWaypoint2D { bounds, z_fixed, .. } => {
                let p = random_point(bounds, *z_fixed, rng);
                Ok(UeKinematics::at(p, 0))
            }
            MobilityModel::Static { position } => Ok(UeKinematics::at(*position, 0)),
        }
    }

    /// Moves every FixedPath waypoint (or the RWP plane) to `altitude`.
    pub fn with_altitude(&self, altitude: f64) -> MobilityModel {
        match self {
            MobilityModel::FixedPath { waypoints, speed_mps, loop_path } => MobilityModel::FixedPath {
                waypoints: waypoints.iter().map(|w| Position::new(w.x, w.y, altitude)).collect(),
                speed_mps: *speed_mps,
                loop_path: *loop_path,
            },
            MobilityModel::RandomWaypoint2D { bounds, speed_range_mps, pause_s, .. } => {
                MobilityModel::RandomWaypoint2D {
                    bounds: *bounds,
                    speed_range_mps: *speed_range_mps,
                    pause_s: *pause_s,
                    z_fixed: altitude,
                }
            }
            MobilityModel::Static { position } => {
                MobilityModel::Static { position: Position::new(position.x, position.y, altitude) }
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct UeKinematics {
    pub position: Position,
    pub velocity: [f64; 3],
    /// Index of the waypoint being flown toward (FixedPath).
    pub waypoint_index: usize,
    /// Random waypoint target and leg speed.
    pub target: Option<(Position, f64)>,
    pub pause_left_s: f64,
    pub finished: bool,
}

impl UeKinematics {
    pub fn at(position: Position, waypoint_index: usize) -> Self {
        Self { position, velocity: [0.0; 3], waypoint_index, target: None, pause_left_s: 0.0, finished: false }
    }

    pub fn speed(&self) -> f64 {
        let [a, b, c] = self.velocity;
        (a * a + b * b + c * c).sqrt()
    }
}

fn random_point(bounds: &Bounds, z: f64, rng: &mut impl Rng) -> Position {
    let x = if bounds.width() > 0.0 { rng.random_range(bounds.x_min..=bounds.x_max) } else { bounds.x_min };
    let y = if bounds.height() > 0.0 { rng.random_range(bounds.y_min..=bounds.y_max) } else { bounds.y_min };
    Position::new(x, y, z)
}

/// Walks from `from` toward `to` by at most `budget` metres.
/// Returns the new position and the distance actually covered.
fn advance(from: Position, to: Position, budget: f64) -> (Position, f64) {
    let d = from.distance(&to);
    if d <= budget {
        return (to, d);
    }
    let f = budget / d;
    (Position::new(from.x + (to.x - from.x) * f, from.y + (to.y - from.y) * f, from.z + (to.z - from.z) * f), budget)
}

fn direction(from: &Position, to: &Position, speed: f64) -> [f64; 3] {
    let d = from.distance(to);
    if d <= 0.0 {
        return [0.0; 3];
    }
    [(to.x - from.x) / d * speed, (to.y - from.y) / d * speed, (to.z - from.z) / d * speed]
}

pub fn step_position(
    kin: &UeKinematics,
    model: &MobilityModel,
    dt: f64,
    rng: &mut impl Rng,
) -> Result<UeKinematics, MobilityError> {
    if !(dt > 0.0) {
        return Err(MobilityError::BadStep(dt));
    }
    let mut next = kin.clone();
    match model {
        MobilityModel::Static { position } => {
            next.position = *position;
            next.velocity = [0.0; 3];
        }
        MobilityModel::FixedPath { waypoints, speed_mps, loop_path } => {
            if waypoints.is_empty() {
                return Err(MobilityError::EmptyPath);
            }
            let mut budget = speed_mps * dt;
            // a single-point path, or a stopped UE, stays put
            if waypoints.len() == 1 || next.finished {
                next.velocity = [0.0; 3];
                return Ok(next);
            }
            let mut guard = 0usize;
            while budget > 0.0 && !next.finished {
                let target = waypoints[next.waypoint_index];
                let (pos, used) = advance(next.position, target, budget);
                next.velocity = direction(&next.position, &target, *speed_mps);
                next.position = pos;
                budget -= used;
                if next.position == target {
                    if next.waypoint_index + 1 < waypoints.len() {
                        next.waypoint_index += 1;
                    } else if *loop_path {
                        next.waypoint_index = 0;
                    } else {
                        next.finished = true;
                        next.velocity = [0.0; 3];
                    }
                }
                guard += 1;
                // zero-length loops would otherwise spin forever
                if guard > 4 * waypoints.len() + 8 && used == 0.0 {
                    break;
                }
            }
        }
        MobilityModel::RandomWaypoint2D { bounds, speed_range_mps: (lo, hi), pause_s, z_fixed } => {
            let mut time = dt;
            while time > 0.0 {
                if next.pause_left_s > 0.0 {
                    let p = next.pause_left_s.min(time);
                    next.pause_left_s -= p;
                    time -= p;
                    next.velocity = [0.0; 3];
                    continue;
                }
                let (target, speed) = match next.target {
                    Some(t) => t,
                    None => {
                        let t = random_point(bounds, *z_fixed, rng);
                        let s = if hi > lo { rng.random_range(*lo..=*hi) } else { *lo };
                        next.target = Some((t, s));
                        (t, s)
                    }
                };
                let (pos, used) = advance(next.position, target, speed * time);
                next.velocity = direction(&next.position, &target, speed);
                next.position = pos;
                time -= if speed > 0.0 { used / speed } else { time };
                if next.position == target {
                    next.target = None;
                    next.pause_left_s = *pause_s;
                    if *pause_s == 0.0 && used == 0.0 {
                        // degenerate bounds: nowhere to go
                        break;
                    }
                }
            }
        }
    }
    Ok(next)
}

/// Parallel transects ("lawnmower") over `bounds` at a fixed altitude.
pub fn lawnmower(bounds: &Bounds, altitude: f64, spacing_m: f64, margin_m: f64) -> Vec<Position> {
    let x0 = bounds.x_min + margin_m;
    let x1 = bounds.x_max - margin_m;
    let mut waypoints = Vec::new();
    let mut y = bounds.y_min + margin_m;
    let mut left_to_right = true;
    while y <= bounds.y_max - margin_m + 1e-9 {
        let (a, b) = if left_to_right { (x0, x1) } else { (x1, x0) };
        waypoints.push(Position::new(a, y, altitude));
        waypoints.push(Position::new(b, y, altitude));
        left_to_right = !left_to_right;
        y += spacing_m;
    }
    waypoints
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn rng() -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(7)
    }

    #[test]
    fn straight_segment_moves_exactly_speed_times_dt() {
        let model = MobilityModel::FixedPath {
            waypoints: vec![Position::new(0.0, 0.0, 60.0), Position::new(100.0, 0.0, 60.0)],
            speed_mps: 10.0,
            loop_path: false,
        };
        let k = model.initial_kinematics(&mut rng()).unwrap();
        let k = step_position(&k, &model, 1.0, &mut rng()).unwrap();
        assert_eq!(k.position, Position::new(10.0, 0.0, 60.0));
        assert!((k.speed() - 10.0).abs() < 1e-12);
    }

    #[test]
    fn step_splits_exactly_at_waypoints() {
        let model = MobilityModel::FixedPath {
            waypoints: vec![
                Position::new(0.0, 0.0, 30.0),
                Position::new(100.0, 0.0, 30.0),
                Position::new(100.0, 100.0, 30.0),
            ],
            speed_mps: 10.0,
            loop_path: true,
        };
        let mut k = model.initial_kinematics(&mut rng()).unwrap();
        k.position = Position::new(96.0, 0.0, 30.0);
        let k = step_position(&k, &model, 1.0, &mut rng()).unwrap();
        assert_eq!(k.waypoint_index, 2);
        assert!((k.position.x - 100.0).abs() < 1e-12);
        assert!((k.position.y - 6.0).abs() < 1e-12);
    }

    #[test]
    fn loop_returns_to_first_waypoint_and_non_loop_stops() {
        let wps = vec![Position::new(0.0, 0.0, 30.0), Position::new(10.0, 0.0, 30.0)];
        let looped = MobilityModel::FixedPath { waypoints: wps.clone(), speed_mps: 4.0, loop_path: true };
        let mut k = looped.initial_kinematics(&mut rng()).unwrap();
        for _ in 0..4 {
            k = step_position(&k, &looped, 1.0, &mut rng()).unwrap();
        }
        // 16 m: out 10, back 6
        assert!((k.position.x - 4.0).abs() < 1e-12);

        let once = MobilityModel::FixedPath { waypoints: wps, speed_mps: 4.0, loop_path: false };
        let mut k = once.initial_kinematics(&mut rng()).unwrap();
        for _ in 0..10 {
            k = step_position(&k, &once, 1.0, &mut rng()).unwrap();
        }
        assert_eq!(k.position.x, 10.0);
        assert!(k.finished);
        assert_eq!(k.speed(), 0.0);
    }

    #[test]
    fn empty_path_and_bad_step_are_errors() {
        let empty = MobilityModel::FixedPath { waypoints: vec![], speed_mps: 1.0, loop_path: false };
        assert_eq!(empty.initial_kinematics(&mut rng()), Err(MobilityError::EmptyPath));
        let k = UeKinematics::at(Position::new(0.0, 0.0, 1.0), 0);
        assert_eq!(step_position(&k, &empty, 1.0, &mut rng()), Err(MobilityError::EmptyPath));
        let st = MobilityModel::Static { position: Position::new(0.0, 0.0, 1.0) };
        assert_eq!(step_position(&k, &st, 0.0, &mut rng()), Err(MobilityError::BadStep(0.0)));
    }

    #[test]
    fn uav_caps_are_enforced() {
        let path = |speed, z| MobilityModel::FixedPath {
            waypoints: vec![Position::new(0.0, 0.0, z), Position::new(1.0, 0.0, z)],
            speed_mps: speed,
            loop_path: false,
        };
        assert!(path(44.0, 120.0).validate(UeKind::Uav, false).is_ok());
        assert!(matches!(path(45.0, 120.0).validate(UeKind::Uav, false), Err(MobilityError::SpeedCap { .. })));
        assert!(path(80.0, 120.0).validate(UeKind::Uav, true).is_ok());
        assert_eq!(path(10.0, 301.0).validate(UeKind::Uav, false), Err(MobilityError::AltitudeCap(301.0)));
        // ground users are not bound by the aerial caps
        assert!(path(60.0, 1.5).validate(UeKind::Gue, false).is_ok());
    }

    #[test]
    fn random_waypoint_stays_in_bounds() {
        let bounds = Bounds { x_min: -50.0, x_max: 250.0, y_min: 10.0, y_max: 90.0 };
        let model =
            MobilityModel::RandomWaypoint2D { bounds, speed_range_mps: (1.0, 15.0), pause_s: 2.0, z_fixed: 1.5 };
        let mut r = rng();
        let mut k = model.initial_kinematics(&mut r).unwrap();
        for _ in 0..10_000 {
            k = step_position(&k, &model, 0.1, &mut r).unwrap();
            assert!(bounds.contains(k.position.x, k.position.y), "{:?}", k.position);
            assert_eq!(k.position.z, 1.5);
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let bounds = Bounds::square(500.0);
        let model = MobilityModel::RandomWaypoint2D { bounds, speed_range_mps: (1.0, 5.0), pause_s: 0.0, z_fixed: 1.5 };
        let run = || {
            let mut r = rng();
            let mut k = model.initial_kinematics(&mut r).unwrap();
            (0..500)
                .map(|_| {
                    k = step_position(&k, &model, 0.1, &mut r).unwrap();
                    k.position
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn lawnmower_covers_the_area_at_constant_altitude() {
        let w = lawnmower(&Bounds::square(1000.0), 90.0, 100.0, 50.0);
        assert_eq!(w.len(), 20);
        assert!(w.iter().all(|p| p.z == 90.0));
    }

    proptest! {
        #[test]
        fn fixed_path_keeps_altitude(z in 0.0f64..300.0, speed in 0.5f64..44.0, steps in 1usize..200) {
            let model = MobilityModel::FixedPath { waypoints: lawnmower(&Bounds::square(400.0), z, 80.0, 20.0), speed_mps: speed, loop_path: true };
            let mut r = rng();
            let mut k = model.initial_kinematics(&mut r).unwrap();
            for _ in 0..steps {
                k = step_position(&k, &model, 0.1, &mut r).unwrap();
                prop_assert!((k.position.z - z).abs() < 1e-9);
            }
        }
    }
}
