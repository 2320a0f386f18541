use serde::{Deserialize, Serialize};

use super::SimTime;

/// Default sanity bound on clock drift.
pub const MAX_DRIFT_PPM: f64 = 200.0;

/// Local clock of a node: a constant offset plus linear drift against the
/// global timeline.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeClock {
    #[serde(default)]
    pub offset_ms: f64,
    #[serde(default)]
    pub drift_ppm: f64,
}

impl NodeClock {
    pub fn new(offset_ms: f64, drift_ppm: f64) -> Self {
        Self { offset_ms, drift_ppm }
    }

    pub fn validate(&self, max_drift_ppm: f64) -> Result<(), String> {
        if !self.offset_ms.is_finite() || !self.drift_ppm.is_finite() {
            return Err("clock parameters must be finite".into());
        }
        if self.drift_ppm.abs() > max_drift_ppm {
            return Err(format!("|drift_ppm| = {} exceeds {max_drift_ppm}", self.drift_ppm.abs()));
        }
        Ok(())
    }

    /// local = global + offset + drift_ppm * global / 1e6
    pub fn local_now(&self, global_ms: f64) -> f64 {
        global_ms + self.offset_ms + self.drift_ppm * global_ms / 1e6
    }

    /// Local reading in whole microseconds at a global instant.
    pub fn local_us(&self, global: SimTime) -> i64 {
        (self.local_now(global.as_ms()) * 1000.0).round() as i64
    }

    /// Earliest global instant at which the local clock reads at least
    /// `local_us`. Instants before the start of the timeline clamp to zero.
    pub fn global_for_local_us(&self, local_us: i64) -> SimTime {
        let rate = 1.0 + self.drift_ppm / 1e6;
        let guess = ((local_us as f64 / 1000.0 - self.offset_ms) / rate * 1000.0).round();
        if guess <= 0.0 && self.local_us(SimTime::ZERO) >= local_us {
            return SimTime::ZERO;
        }
        let mut g = guess.max(0.0) as u64;
        while self.local_us(SimTime(g)) < local_us {
            g += 1;
        }
        while g > 0 && self.local_us(SimTime(g - 1)) >= local_us {
            g -= 1;
        }
        SimTime(g)
    }
}
