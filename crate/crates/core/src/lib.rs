//! Desk-scale agent-based transport simulation with co-evolutionary
//! replanning and cordon congestion tolling.
//!
//! The crate is organized around one pipeline:
//!
//! 1. [`network`], [`population`], [`transit`] load a scenario,
//! 2. [`mobsim`] executes every selected plan on the network and emits the
//!    canonical [`events`] stream (tolls charged via [`tolling`]),
//! 3. [`scoring`] turns each executed plan into a utility,
//! 4. [`replanning`] mutates and selects plans across iterations until the
//!    population approximates a Nash equilibrium,
//! 5. [`analysis`] reproduces the evaluation artifacts (link flows, mode
//!    shares, trip scores, cordon metrics) from the persisted outputs.
//!
//! [`scenario`] ties the pipeline into reproducible run directories and
//! [`generate`] builds the synthetic scenarios the test suite runs on.
//!
//! With the default `parallel` feature, replanning and scoring fan out over
//! persons with rayon; results are identical to the sequential fallback
//! because every person owns an independently seeded random stream.

pub mod analysis;
pub mod error;
pub mod events;
pub mod generate;
pub mod mobsim;
pub mod network;
pub mod population;
pub mod replanning;
pub mod scenario;
pub mod scoring;
pub mod tolling;
pub mod transit;

#[cfg(test)]
pub(crate) mod testutil;

pub use error::{Result, SimError};

use serde::{Deserialize, Serialize};

/// Simulation horizon: 30 hours at 1 s resolution.
pub const HORIZON: u32 = 30 * 3600;

/// Seconds per scoring day; overnight activities wrap at this boundary.
pub const DAY: u32 = 24 * 3600;

/// Walk speed for teleported legs and transit access/egress, m/s.
pub const WALK_SPEED: f64 = 1.34;

/// Bike speed for teleported legs, m/s.
pub const BIKE_SPEED: f64 = 4.17;

/// Travel modes an agent can choose for a leg.
#[derive(
    Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize,
)]
#[serde(rename_all = "lowercase")]
pub enum Mode {
    Car,
    Pt,
    Walk,
    Bike,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::Car, Mode::Pt, Mode::Walk, Mode::Bike];

    pub fn as_str(self) -> &'static str {
        match self {
            Mode::Car => "car",
            Mode::Pt => "pt",
            Mode::Walk => "walk",
            Mode::Bike => "bike",
        }
    }
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Mode {
    type Err = SimError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "car" => Ok(Mode::Car),
            "pt" => Ok(Mode::Pt),
            "walk" => Ok(Mode::Walk),
            "bike" => Ok(Mode::Bike),
            other => Err(SimError::UnknownMode(other.to_string())),
        }
    }
}

/// Splitmix64 step; the standard 64-bit finalizer mix.
fn splitmix64(state: &mut u64) -> u64 {
    *state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
    let mut z = *state;
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// FNV-1a over a byte string; stable across platforms and versions.
pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut hash = 0xcbf2_9ce4_8422_2325u64;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x0000_0100_0000_01b3);
    }
    hash
}

/// Derives an independent random stream seed for one person in one
/// iteration. Replanning seeds every person separately so that results do
/// not depend on the order persons are processed in.
pub fn derive_seed(master_seed: u64, person_id: &str, iteration: u64) -> u64 {
    let mut state = master_seed ^ fnv1a(person_id.as_bytes()).rotate_left(17) ^ iteration;
    splitmix64(&mut state);
    splitmix64(&mut state)
}
