//! Scenario files shipped with the crate. The CLI accepts these names
//! wherever it takes a scenario path.

use crate::sim::{ScenarioConfig, SimError};

/// 1 km² generated layout (4 macro + 30 small cells), one lawnmower UAV and ten ground users.
pub const REFERENCE: &str = include_str!("../scenarios/reference.json");

/// Two cells share a PCI; the serving cell only knows the wrong one.
pub const PCI_CONFUSION: &str = include_str!("../scenarios/pci_confusion.json");

/// The serving cell's PCI is reused by the only cell ahead of the UE.
pub const COLLISION: &str = include_str!("../scenarios/collision.json");

/// A UAV loop that sees a far cell only from altitude, about every 760 s.
pub const FAR_CELL: &str = include_str!("../scenarios/far_cell.json");

const ALL: &[(&str, &str)] =
    &[("reference", REFERENCE), ("pci_confusion", PCI_CONFUSION), ("collision", COLLISION), ("far_cell", FAR_CELL)];

pub fn names() -> impl Iterator<Item = &'static str> {
    ALL.iter().map(|(n, _)| *n)
}

pub fn source(name: &str) -> Option<&'static str> {
    ALL.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

pub fn load(name: &str) -> Result<ScenarioConfig, SimError> {
    let text = source(name).ok_or_else(|| SimError::Validation(format!("no packaged scenario named {name:?}")))?;
    ScenarioConfig::from_json(text)
}
