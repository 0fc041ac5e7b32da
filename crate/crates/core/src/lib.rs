//! Partitioned model/view/controller tiers for web-style client/server
//! applications.
//!
//! The server tier pairs a controller with the only model allowed to read
//! the data store. The client tier pairs a controller with the only model
//! allowed to touch the data cache. The tiers exchange framed XML
//! documents. A duplicated-model baseline ([`dmvc`]) and a benchmark
//! harness ([`bench`]) compare the two arrangements.

pub mod bench;
pub mod client;
pub mod config;
pub mod cost;
pub mod deployment;
pub mod dmvc;
pub mod server;
pub mod storage;
pub mod view;
pub mod wire;

use std::fmt;
use std::str::FromStr;

/// Which architecture a tier runs as.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub enum Mode {
    /// One model/controller pair per tier, nothing duplicated.
    #[default]
    Spim,
    /// Model and controller duplicated on both tiers, kept in sync.
    Dmvc,
}

impl Mode {
    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Spim => "spim",
            Mode::Dmvc => "dmvc",
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Mode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "spim" => Ok(Mode::Spim),
            "dmvc" => Ok(Mode::Dmvc),
            other => Err(format!("unknown mode {other:?} (expected spim or dmvc)")),
        }
    }
}
