use rand::Rng;
use serde::{Deserialize, Serialize};

use super::SimTime;

/// Abstract low-power radio link: fixed latency, uniform jitter, Bernoulli loss.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkModel {
    pub base_latency_ms: f64,
    /// Half-width of the uniform jitter window.
    pub jitter_ms: f64,
    pub loss_prob: f64,
    /// Bytes added below CoAP (MAC, adaptation, IPv6/UDP) to get on-air size.
    pub framing_overhead_bytes: usize,
}

impl Default for LinkModel {
    fn default() -> Self {
        Self { base_latency_ms: 5.0, jitter_ms: 2.0, loss_prob: 0.0, framing_overhead_bytes: 58 }
    }
}

impl LinkModel {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.base_latency_ms >= 0.0 && self.base_latency_ms.is_finite()) {
            return Err(format!("base_latency_ms must be >= 0, got {}", self.base_latency_ms));
        }
        if !(self.jitter_ms >= 0.0 && self.jitter_ms.is_finite()) {
            return Err(format!("jitter_ms must be >= 0, got {}", self.jitter_ms));
        }
        if !(0.0..=1.0).contains(&self.loss_prob) {
            return Err(format!("loss_prob must lie in [0, 1], got {}", self.loss_prob));
        }
        Ok(())
    }

    pub fn on_air_bytes(&self, coap_len: usize) -> usize {
        self.framing_overhead_bytes + coap_len
    }

    /// Decides the fate of one frame sent at `now`. Draws exactly two uniforms
    /// from `rng`, loss first and jitter second, whatever the outcome.
    pub fn transmit<R: Rng>(&self, now: SimTime, rng: &mut R) -> Option<SimTime> {
        let u_loss: f64 = rng.random();
        let u_jitter: f64 = rng.random();
        if u_loss < self.loss_prob {
            return None;
        }
        let delay_ms = (self.base_latency_ms + (2.0 * u_jitter - 1.0) * self.jitter_ms).max(0.0);
        Some(now + SimTime::from_ms(delay_ms))
    }
}
