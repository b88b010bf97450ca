//! Identifier newtypes shared across modules.

use std::fmt;

use serde::{Deserialize, Serialize};

/// Globally unique cell identity.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Ecgi(pub u64);

impl fmt::Display for Ecgi {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Physical cell identity, locally unique and reused across the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Pci(pub u16);

impl fmt::Display for Pci {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UeId(pub u32);

impl fmt::Display for UeId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Aerial or ground user.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum UeKind {
    #[serde(rename = "UAV")]
    Uav,
    #[serde(rename = "GUE")]
    Gue,
}

impl UeKind {
    pub fn as_str(self) -> &'static str {
        match self {
            UeKind::Uav => "UAV",
            UeKind::Gue => "GUE",
        }
    }
}

impl fmt::Display for UeKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for UeKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "UAV" => Ok(UeKind::Uav),
            "GUE" => Ok(UeKind::Gue),
            other => Err(format!("unknown UE kind `{other}`")),
        }
    }
}
