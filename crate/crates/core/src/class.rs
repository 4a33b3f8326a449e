use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::Error;

/// Number of entries in every color/count vector: the three sortable
/// classes plus the `Unknown` pseudo-class.
pub const NUM_OUTPUT_CLASSES: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectClass {
    Red,
    Yellow,
    BlueGreen,
    /// Drop-zone pixels matching no color box. Also what the null model
    /// predicts before any training data exists. Never a physical object.
    Unknown,
}

impl ObjectClass {
    pub const ALL: [ObjectClass; NUM_OUTPUT_CLASSES] = [
        ObjectClass::Red,
        ObjectClass::Yellow,
        ObjectClass::BlueGreen,
        ObjectClass::Unknown,
    ];

    pub const SORTABLE: [ObjectClass; 3] =
        [ObjectClass::Red, ObjectClass::Yellow, ObjectClass::BlueGreen];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn name(self) -> &'static str {
        match self {
            ObjectClass::Red => "red",
            ObjectClass::Yellow => "yellow",
            ObjectClass::BlueGreen => "bluegreen",
            ObjectClass::Unknown => "unknown",
        }
    }
}

impl fmt::Display for ObjectClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for ObjectClass {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "red" => Ok(ObjectClass::Red),
            "yellow" => Ok(ObjectClass::Yellow),
            "bluegreen" | "blue-green" | "blue_green" => Ok(ObjectClass::BlueGreen),
            "unknown" => Ok(ObjectClass::Unknown),
            other => Err(Error::Format(format!("unknown class {other:?}"))),
        }
    }
}
