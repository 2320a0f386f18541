//! Per-action energy accounting, synthetic current traces and the
//! Butterworth low-pass used to smooth them.

mod cost;
mod filter;
mod trace;

pub use cost::{ActionCost, AgentEnergy, ChargeEvent, CostJitter, CostTable, EnergyError, Ledger};
pub use filter::{apply_filter, butterworth_lowpass, frequency_response, is_stable, poles, FilterError, IirCoeffs};
pub use trace::{read_trace_csv, synth_trace, write_trace_csv, CurrentTrace, TraceError};

/// Default supply voltage for trace synthesis.
pub const DEFAULT_SUPPLY_V: f64 = 3.3;
/// Default idle current in mA.
pub const DEFAULT_IDLE_MA: f64 = 5.0;
