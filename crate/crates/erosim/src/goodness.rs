//! Counters for L-good particles and microsteps.
//!
//! A particle is (E, L)-good when, at its emission, the run adjacent to the
//! origin of the particle's own color sits on the positive axis and has length
//! L - 1 (so the particle is stopped on hitting {-1, L}); (W, L)-good is the
//! mirror image. Every microstep inherits the label of the particle taking
//! it, so summing G(L, t) over L recovers t.

use crate::coloring::Side;
use serde::{Deserialize, Serialize};

/// Microstep counts per goodness level, kept separately per side. Levels are
/// small (the support only reaches t^(1/4)), so dense vectors indexed by L
/// are cheaper than a map.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct GoodnessCounters {
    east: Vec<u64>,
    west: Vec<u64>,
    total: u64,
}

impl GoodnessCounters {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&mut self, side: Side, level: u32, microsteps: u64) {
        let bucket = match side {
            Side::East => &mut self.east,
            Side::West => &mut self.west,
        };
        let idx = level as usize;
        if bucket.len() <= idx {
            bucket.resize(idx + 1, 0);
        }
        bucket[idx] += microsteps;
        self.total += microsteps;
    }

    pub fn east(&self, level: u32) -> u64 {
        self.east.get(level as usize).copied().unwrap_or(0)
    }

    pub fn west(&self, level: u32) -> u64 {
        self.west.get(level as usize).copied().unwrap_or(0)
    }

    /// G(L, t): microsteps taken by L-good particles on either side.
    pub fn g(&self, level: u32) -> u64 {
        self.east(level) + self.west(level)
    }

    /// Total labeled microsteps; equals t when recording started at t = 0.
    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn max_level(&self) -> u32 {
        self.east.len().max(self.west.len()).saturating_sub(1) as u32
    }
}
