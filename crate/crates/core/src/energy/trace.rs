use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::ChargeEvent;

const OVERLAP_SLACK_MS: f64 = 1e-6;

/// Uniformly sampled supply current.
#[derive(Debug, Clone, PartialEq)]
pub struct CurrentTrace {
    pub fs_hz: f64,
    pub t0_ms: f64,
    /// Amperes.
    pub samples: Vec<f64>,
}

impl CurrentTrace {
    pub fn t_ms(&self, i: usize) -> f64 {
        self.t0_ms + i as f64 * 1000.0 / self.fs_hz
    }

    pub fn map(&self, samples: Vec<f64>) -> CurrentTrace {
        CurrentTrace { fs_hz: self.fs_hz, t0_ms: self.t0_ms, samples }
    }
}

#[derive(Debug, Error)]
pub enum TraceError {
    #[error("sampling rate must be positive, got {0}")]
    BadRate(f64),
    #[error("supply voltage must be positive, got {0}")]
    BadSupply(f64),
    #[error("pulses overlap for `{agent}`: {action} at {t_ms} ms starts before the previous action ends at {prev_end_ms} ms")]
    Overlap { agent: String, action: String, t_ms: f64, prev_end_ms: f64 },
    #[error("trace needs at least two samples")]
    TooShort,
    #[error("sample times are not uniformly spaced near row {0}")]
    NonUniform(usize),
    #[error("non-finite value in row {0}")]
    NonFinite(usize),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

/// One rectangular pulse per charged action on top of an idle baseline,
/// sampled at `fs_hz` over `[t0_ms, t_end_ms)`. Pulse height in mA is
/// `energy_uj / (supply_v * duration_ms)`; a sample at time `t` is high when
/// `t` lies in `[start, start + duration)`.
pub fn synth_trace<'a>(
    events: impl IntoIterator<Item = &'a ChargeEvent>,
    fs_hz: f64,
    supply_v: f64,
    idle_ma: f64,
    t0_ms: f64,
    t_end_ms: f64,
) -> Result<CurrentTrace, TraceError> {
    if !(fs_hz > 0.0 && fs_hz.is_finite()) {
        return Err(TraceError::BadRate(fs_hz));
    }
    if !(supply_v > 0.0 && supply_v.is_finite()) {
        return Err(TraceError::BadSupply(supply_v));
    }
    let mut events: Vec<&ChargeEvent> = events.into_iter().collect();
    events.sort_by(|a, b| a.t_ms.total_cmp(&b.t_ms));
    let mut last_end: BTreeMap<&str, f64> = BTreeMap::new();
    for e in &events {
        // Times are whole microseconds; back-to-back pulses may differ by rounding.
        if let Some(&prev_end_ms) = last_end.get(e.agent.as_str()) {
            if e.t_ms < prev_end_ms - OVERLAP_SLACK_MS {
                return Err(TraceError::Overlap { agent: e.agent.clone(), action: e.action.clone(), t_ms: e.t_ms, prev_end_ms });
            }
        }
        last_end.insert(&e.agent, e.t_ms + e.duration_ms);
    }
    let n = (((t_end_ms - t0_ms) * fs_hz / 1000.0).ceil().max(0.0)) as usize;
    let mut trace = CurrentTrace { fs_hz, t0_ms, samples: vec![idle_ma / 1000.0; n] };
    for e in events {
        let amp_a = e.energy_uj / (supply_v * e.duration_ms) / 1000.0;
        let first = ((e.t_ms - t0_ms) * fs_hz / 1000.0).ceil().max(0.0) as usize;
        for i in first..n {
            let t = trace.t_ms(i);
            if t >= e.t_ms + e.duration_ms {
                break;
            }
            trace.samples[i] += amp_a;
        }
    }
    Ok(trace)
}

#[derive(Serialize, Deserialize)]
struct Row {
    t_ms: f64,
    current_ma: f64,
}

pub fn write_trace_csv<W: Write>(trace: &CurrentTrace, w: W) -> Result<(), TraceError> {
    let mut wr = csv::Writer::from_writer(w);
    for (i, &a) in trace.samples.iter().enumerate() {
        wr.serialize(Row { t_ms: trace.t_ms(i), current_ma: a * 1000.0 })?;
    }
    wr.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a `t_ms,current_ma` CSV. Sample spacing must be uniform.
pub fn read_trace_csv<R: Read>(r: R) -> Result<CurrentTrace, TraceError> {
    let mut rd = csv::Reader::from_reader(r);
    let mut rows = Vec::new();
    for (i, row) in rd.deserialize::<Row>().enumerate() {
        let row = row?;
        if !row.t_ms.is_finite() || !row.current_ma.is_finite() {
            return Err(TraceError::NonFinite(i + 1));
        }
        rows.push(row);
    }
    if rows.len() < 2 {
        return Err(TraceError::TooShort);
    }
    let dt = rows[1].t_ms - rows[0].t_ms;
    if dt <= 0.0 {
        return Err(TraceError::NonUniform(1));
    }
    for (i, w) in rows.windows(2).enumerate() {
        if ((w[1].t_ms - w[0].t_ms) - dt).abs() > 1e-6 * dt.max(1.0) {
            return Err(TraceError::NonUniform(i + 1));
        }
    }
    Ok(CurrentTrace { fs_hz: 1000.0 / dt, t0_ms: rows[0].t_ms, samples: rows.iter().map(|r| r.current_ma / 1000.0).collect() })
}
