//! Cell layout, PCI pools and PCI planning.
//!
//! PCIs are split into disjoint per-tier sets (macro / small). Planning is a
//! greedy reuse-distance assignment: each cell takes the PCI whose nearest
//! same-PCI cell is farthest away. Collision and confusion detection evaluate
//! coverage on a horizontal grid at chosen altitudes, which is where aerial
//! users break plans that look clean at ground level.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::anr::Nrt;
use crate::geo::{self, AntennaConfig, GeoError, LinkDraw, Position, PropagationParams};
use crate::{Ecgi, Pci};

pub const LTE_PCI_COUNT: u16 = 504;
pub const NR_PCI_COUNT: u16 = 1008;

/// Default horizontal spacing of the coverage grid.
pub const DEFAULT_GRID_SPACING_M: f64 = 25.0;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TopologyError {
    #[error("tier {0:?} has cells but an empty PCI set")]
    EmptyPool(Tier),
    #[error("duplicate ECGI {0}")]
    DuplicateEcgi(Ecgi),
    #[error("cell {ecgi} PCI {pci} is not in the {tier:?} pool")]
    PciOutsidePool { ecgi: Ecgi, pci: Pci, tier: Tier },
    #[error("cell {0} lies outside the topology bounds")]
    OutOfBounds(Ecgi),
    #[error("PCI pool violations: {0:?}")]
    Pools(Vec<PoolViolation>),
    #[error("invalid bounds")]
    InvalidBounds,
    #[error("invalid generator configuration: {0}")]
    InvalidGenerator(String),
    #[error("cell {0}: {1}")]
    Cell(Ecgi, GeoError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Tier {
    Macro,
    Small,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Rat {
    #[serde(rename = "NR")]
    Nr,
    #[serde(rename = "LTE")]
    Lte,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CellRecord {
    pub ecgi: Ecgi,
    pub pci: Pci,
    pub tier: Tier,
    pub position: Position,
    #[serde(default)]
    pub antenna: AntennaConfig,
    #[serde(default)]
    pub freq_layer: u8,
    #[serde(default = "default_rat")]
    pub rat: Rat,
    /// Overrides the propagation default when present.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tx_power_dbm: Option<f64>,
}

fn default_rat() -> Rat {
    Rat::Nr
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Bounds {
    pub x_min: f64,
    pub x_max: f64,
    pub y_min: f64,
    pub y_max: f64,
}

impl Bounds {
    pub fn square(side_m: f64) -> Self {
        Self { x_min: 0.0, x_max: side_m, y_min: 0.0, y_max: side_m }
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x_min && x <= self.x_max && y >= self.y_min && y <= self.y_max
    }

    pub fn width(&self) -> f64 {
        self.x_max - self.x_min
    }

    pub fn height(&self) -> f64 {
        self.y_max - self.y_min
    }

    fn is_valid(&self) -> bool {
        [self.x_min, self.x_max, self.y_min, self.y_max].iter().all(|v| v.is_finite())
            && self.x_max >= self.x_min
            && self.y_max >= self.y_min
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PciPools {
    pub pool_size: u16,
    pub macro_set: BTreeSet<u16>,
    pub small_set: BTreeSet<u16>,
}

impl PciPools {
    /// Lowest `macro_count` PCIs go to the macro tier, the rest to small cells.
    pub fn split(pool_size: u16, macro_count: u16) -> Self {
        let k = macro_count.min(pool_size);
        Self { pool_size, macro_set: (0..k).collect(), small_set: (k..pool_size).collect() }
    }

    pub fn for_tier(&self, tier: Tier) -> &BTreeSet<u16> {
        match tier {
            Tier::Macro => &self.macro_set,
            Tier::Small => &self.small_set,
        }
    }
}

impl Default for PciPools {
    fn default() -> Self {
        Self::split(NR_PCI_COUNT, 168)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolViolation {
    /// The pool size is neither the LTE nor the NR PCI space.
    UnsupportedPoolSize(u16),
    /// PCI present in both tier sets.
    Shared(u16),
    OutOfRange {
        pci: u16,
        tier: Tier,
    },
}

pub fn validate_pools(pools: &PciPools) -> Result<(), Vec<PoolViolation>> {
    let mut violations = Vec::new();
    if pools.pool_size != LTE_PCI_COUNT && pools.pool_size != NR_PCI_COUNT {
        violations.push(PoolViolation::UnsupportedPoolSize(pools.pool_size));
    }
    violations.extend(pools.macro_set.intersection(&pools.small_set).map(|&p| PoolViolation::Shared(p)));
    for tier in [Tier::Macro, Tier::Small] {
        violations.extend(
            pools
                .for_tier(tier)
                .iter()
                .filter(|&&p| p >= pools.pool_size)
                .map(|&pci| PoolViolation::OutOfRange { pci, tier }),
        );
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Topology {
    pub cells: Vec<CellRecord>,
    pub bounds: Bounds,
    #[serde(default)]
    pub pools: PciPools,
}

impl Topology {
    pub fn validate(&self) -> Result<(), TopologyError> {
        if !self.bounds.is_valid() {
            return Err(TopologyError::InvalidBounds);
        }
        validate_pools(&self.pools).map_err(TopologyError::Pools)?;
        let mut seen = BTreeSet::new();
        for c in &self.cells {
            if !seen.insert(c.ecgi) {
                return Err(TopologyError::DuplicateEcgi(c.ecgi));
            }
            c.position.validate().map_err(|e| TopologyError::Cell(c.ecgi, e))?;
            c.antenna.validate().map_err(|e| TopologyError::Cell(c.ecgi, e))?;
            if !self.pools.for_tier(c.tier).contains(&c.pci.0) {
                return Err(TopologyError::PciOutsidePool { ecgi: c.ecgi, pci: c.pci, tier: c.tier });
            }
            if !self.bounds.contains(c.position.x, c.position.y) {
                return Err(TopologyError::OutOfBounds(c.ecgi));
            }
        }
        Ok(())
    }

    pub fn cell(&self, ecgi: Ecgi) -> Option<&CellRecord> {
        self.cells.iter().find(|c| c.ecgi == ecgi)
    }

    pub fn index_of(&self, ecgi: Ecgi) -> Option<usize> {
        self.cells.iter().position(|c| c.ecgi == ecgi)
    }

    /// Applies a PCI assignment in place; cells missing from the map keep their PCI.
    pub fn apply_pcis(&mut self, assignment: &BTreeMap<Ecgi, Pci>) {
        for c in &mut self.cells {
            if let Some(&p) = assignment.get(&c.ecgi) {
                c.pci = p;
            }
        }
    }
}

/// Greedy reuse-distance PCI planning.
///
/// Cells are visited in (tier, ecgi) order. Each takes the PCI of its tier
/// that maximises the 3D distance to the nearest cell already holding that
/// PCI; an unused PCI counts as infinitely far. Ties go to the lowest PCI.
pub fn assign_pcis(topology: &Topology, pools: &PciPools) -> Result<BTreeMap<Ecgi, Pci>, TopologyError> {
    let mut order: Vec<&CellRecord> = topology.cells.iter().collect();
    order.sort_by_key(|c| (c.tier, c.ecgi));

    let mut assignment = BTreeMap::new();
    let mut holders: BTreeMap<u16, Vec<Position>> = BTreeMap::new();
    for cell in order {
        let pool = pools.for_tier(cell.tier);
        let mut best: Option<(u16, f64)> = None;
        for &pci in pool {
            let score = holders
                .get(&pci)
                .map(|ps| ps.iter().map(|p| p.distance(&cell.position)).fold(f64::INFINITY, f64::min))
                .unwrap_or(f64::INFINITY);
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((pci, score));
            }
        }
        let (pci, _) = best.ok_or(TopologyError::EmptyPool(cell.tier))?;
        holders.entry(pci).or_default().push(cell.position);
        assignment.insert(cell.ecgi, Pci(pci));
    }
    Ok(assignment)
}

/// Horizontal sampling grid over the topology bounds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CoverageGrid {
    pub spacing_m: f64,
}

impl Default for CoverageGrid {
    fn default() -> Self {
        Self { spacing_m: DEFAULT_GRID_SPACING_M }
    }
}

impl CoverageGrid {
    pub fn points(&self, bounds: &Bounds, altitude: f64) -> Vec<Position> {
        let step = self.spacing_m.max(1e-3);
        let nx = (bounds.width() / step).floor() as usize + 1;
        let ny = (bounds.height() / step).floor() as usize + 1;
        let mut pts = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                pts.push(Position::new(bounds.x_min + i as f64 * step, bounds.y_min + j as f64 * step, altitude));
            }
        }
        pts
    }
}

/// Per-cell coverage flags on the grid (RSRP at or above the detection
/// threshold with shadowing disabled).
pub fn coverage_map(
    topology: &Topology,
    altitude: f64,
    params: &PropagationParams,
    grid: &CoverageGrid,
) -> Vec<Vec<bool>> {
    let points = grid.points(&topology.bounds, altitude);
    let no_shadow = PropagationParams { shadowing_sigma_db: 0.0, los_mode: geo::LosMode::Expected, ..params.clone() };
    topology
        .cells
        .iter()
        .map(|c| {
            points
                .iter()
                .map(|p| {
                    geo::rsrp(c, p, &no_shadow, &LinkDraw::default())
                        .map(|r| r >= params.detection_threshold_dbm)
                        // a grid point on the antenna itself is covered
                        .unwrap_or(true)
                })
                .collect()
        })
        .collect()
}

/// Same-PCI cell pairs whose coverage overlaps at `altitude`.
pub fn detect_pci_collision(
    topology: &Topology,
    altitude: f64,
    params: &PropagationParams,
    grid: &CoverageGrid,
) -> Vec<(Ecgi, Ecgi)> {
    let cov = coverage_map(topology, altitude, params, grid);
    let mut out = Vec::new();
    for i in 0..topology.cells.len() {
        for j in (i + 1)..topology.cells.len() {
            let (a, b) = (&topology.cells[i], &topology.cells[j]);
            if a.pci != b.pci || a.freq_layer != b.freq_layer || a.rat != b.rat {
                continue;
            }
            if cov[i].iter().zip(&cov[j]).any(|(x, y)| *x && *y) {
                out.push((a.ecgi.min(b.ecgi), a.ecgi.max(b.ecgi)));
            }
        }
    }
    out.sort();
    out
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PciConfusion {
    pub serving: Ecgi,
    pub pci: Pci,
    /// The ECGI held in the NRT followed by every other same-PCI cell
    /// detectable inside the serving cell's coverage.
    pub ecgis: BTreeSet<Ecgi>,
}

/// PCIs mapped in a serving cell's NRT while another cell with the same PCI
/// is detectable somewhere in that serving cell's coverage.
pub fn detect_pci_confusion(
    topology: &Topology,
    nrts: &BTreeMap<Ecgi, Nrt>,
    altitudes: &[f64],
    params: &PropagationParams,
    grid: &CoverageGrid,
) -> Vec<PciConfusion> {
    let maps: Vec<Vec<Vec<bool>>> = altitudes.iter().map(|&z| coverage_map(topology, z, params, grid)).collect();
    let mut out = Vec::new();
    for (owner, nrt) in nrts {
        let Some(si) = topology.index_of(*owner) else { continue };
        for rel in nrt.relations() {
            let mut ecgis = BTreeSet::new();
            for (ci, other) in topology.cells.iter().enumerate() {
                if other.pci != rel.pci || other.ecgi == rel.ecgi || other.ecgi == *owner {
                    continue;
                }
                let seen = maps.iter().any(|cov| cov[si].iter().zip(&cov[ci]).any(|(s, o)| *s && *o));
                if seen {
                    ecgis.insert(other.ecgi);
                }
            }
            if !ecgis.is_empty() {
                ecgis.insert(rel.ecgi);
                out.push(PciConfusion { serving: *owner, pci: rel.pci, ecgis });
            }
        }
    }
    out.sort_by_key(|c| (c.serving, c.pci));
    out.dedup();
    out
}

/// Seeded layout: macro cells on a regular grid facing the area centre and
/// uniformly scattered small cells. PCIs come from [`assign_pcis`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TopologyGenerator {
    pub bounds: Bounds,
    pub macro_spacing_m: f64,
    pub small_cells: u32,
    pub seed: u64,
    pub macro_height_m: f64,
    pub small_height_m: f64,
    pub macro_tx_power_dbm: f64,
    pub small_tx_power_dbm: f64,
    pub macro_layer: u8,
    pub small_layer: u8,
    pub macro_antenna: AntennaConfig,
    pub small_antenna: AntennaConfig,
    pub pools: PciPools,
    /// Minimum horizontal separation between generated small cells.
    pub small_min_separation_m: f64,
}

impl Default for TopologyGenerator {
    fn default() -> Self {
        Self {
            bounds: Bounds::square(1000.0),
            macro_spacing_m: 500.0,
            small_cells: 30,
            seed: 1,
            macro_height_m: 30.0,
            small_height_m: 10.0,
            macro_tx_power_dbm: 18.0,
            small_tx_power_dbm: 6.0,
            macro_layer: 0,
            small_layer: 1,
            macro_antenna: AntennaConfig { mech_tilt_deg: 6.0, max_gain_dbi: 15.0, ..Default::default() },
            small_antenna: AntennaConfig { mech_tilt_deg: 10.0, element_count: 4, ..Default::default() },
            pools: PciPools::default(),
            small_min_separation_m: 60.0,
        }
    }
}

impl TopologyGenerator {
    pub fn generate(&self) -> Result<Topology, TopologyError> {
        if !self.bounds.is_valid() {
            return Err(TopologyError::InvalidBounds);
        }
        if !(self.macro_spacing_m > 0.0) {
            return Err(TopologyError::InvalidGenerator("macro spacing must be > 0".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let b = self.bounds;
        let (cx, cy) = ((b.x_min + b.x_max) / 2.0, (b.y_min + b.y_max) / 2.0);
        let mut cells = Vec::new();
        let mut next_ecgi = 1u64;

        let half = self.macro_spacing_m / 2.0;
        let mut y = b.y_min + half;
        while y <= b.y_max {
            let mut x = b.x_min + half;
            while x <= b.x_max {
                let toward_centre = (cx - x).atan2(cy - y).to_degrees().rem_euclid(360.0);
                let azimuth_deg = if (cx - x).hypot(cy - y) < 1e-9 { 0.0 } else { toward_centre };
                cells.push(CellRecord {
                    ecgi: Ecgi(next_ecgi),
                    pci: Pci(0),
                    tier: Tier::Macro,
                    position: Position::new(x, y, self.macro_height_m),
                    antenna: AntennaConfig { azimuth_deg, ..self.macro_antenna.clone() },
                    freq_layer: self.macro_layer,
                    rat: Rat::Nr,
                    tx_power_dbm: Some(self.macro_tx_power_dbm),
                });
                next_ecgi += 1;
                x += self.macro_spacing_m;
            }
            y += self.macro_spacing_m;
        }

        let mut placed: Vec<(f64, f64)> = Vec::new();
        for _ in 0..self.small_cells {
            let mut candidate = (0.0, 0.0);
            // rejection sampling with a bounded number of tries; the last draw wins
            for _ in 0..200 {
                candidate = (rng.random_range(b.x_min..=b.x_max), rng.random_range(b.y_min..=b.y_max));
                let clear =
                    placed.iter().all(|p| (p.0 - candidate.0).hypot(p.1 - candidate.1) >= self.small_min_separation_m);
                if clear {
                    break;
                }
            }
            placed.push(candidate);
            let azimuth_deg = rng.random_range(0.0..360.0);
            cells.push(CellRecord {
                ecgi: Ecgi(next_ecgi),
                pci: Pci(0),
                tier: Tier::Small,
                position: Position::new(candidate.0, candidate.1, self.small_height_m),
                antenna: AntennaConfig { azimuth_deg, ..self.small_antenna.clone() },
                freq_layer: self.small_layer,
                rat: Rat::Nr,
                tx_power_dbm: Some(self.small_tx_power_dbm),
            });
            next_ecgi += 1;
        }

        let mut topology = Topology { cells, bounds: self.bounds, pools: self.pools.clone() };
        let plan = assign_pcis(&topology, &self.pools)?;
        topology.apply_pcis(&plan);
        topology.validate()?;
        Ok(topology)
    }
}
