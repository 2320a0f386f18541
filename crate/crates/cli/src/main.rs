//! `freeflyer`: run mission scenarios, sweep parameters, filter current
//! traces and encode or decode CoAP frames.

use std::fs::File;
use std::io::{self, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand, ValueEnum};
use freeflyer::coap::{decode_message, encode_message, Code, CoapMessage, CoapOption, MessageType};
use freeflyer::energy::{apply_filter, butterworth_lowpass, read_trace_csv, write_trace_csv};
use freeflyer::output::emit_outputs;
use freeflyer::{run, RunOptions, RunReport, Scenario};
use serde::{Deserialize, Serialize};

const EXIT_INCOMPLETE: u8 = 2;

#[derive(Parser)]
#[command(name = "freeflyer", version, about = "Two free-flyer debris push mission simulator")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run one scenario and write its artifacts.
    Run {
        scenario: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, default_value = "out")]
        out: PathBuf,
        #[arg(long)]
        no_physics: bool,
    },
    /// Run a scenario once per value of one parameter, in parallel.
    Sweep {
        scenario: PathBuf,
        #[arg(long)]
        param: String,
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true, required = true)]
        values: Vec<f64>,
        /// Also write the merged results here as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Low-pass filter a `t_ms,current_ma` CSV.
    Filter {
        csv: PathBuf,
        #[arg(long, default_value_t = 4)]
        order: usize,
        #[arg(long, default_value_t = 50.0)]
        fc: f64,
        #[arg(long, default_value_t = 500.0)]
        fs: f64,
        /// Output file; stdout when absent.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Encode a JSON message to hex, or decode hex to JSON.
    Codec {
        #[arg(value_enum)]
        direction: Direction,
        /// Hex (decode) or JSON (encode); read from stdin when absent or `-`.
        input: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Direction {
    Encode,
    Decode,
}

fn main() -> ExitCode {
    match real_main() {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(1)
        }
    }
}

fn real_main() -> Result<u8> {
    match Cli::parse().cmd {
        Cmd::Run { scenario, seed, out, no_physics } => cmd_run(&scenario, seed, &out, no_physics),
        Cmd::Sweep { scenario, param, values, out } => cmd_sweep(&scenario, &param, &values, out.as_deref()),
        Cmd::Filter { csv, order, fc, fs, out } => cmd_filter(&csv, order, fc, fs, out.as_deref()).map(|_| 0),
        Cmd::Codec { direction, input } => cmd_codec(direction, input).map(|_| 0),
    }
}

fn print_summary(r: &RunReport) {
    match r.sync_error_ms {
        Some(e) => println!("sync_error_ms: {e}"),
        None => println!("sync_error_ms: n/a"),
    }
    for (agent, e) in &r.energy {
        println!("{agent}: {} uJ, busy {} ms", e.energy_uj, e.busy_ms);
    }
    let m = &r.messages;
    println!("messages: sent {} delivered {} lost {} retransmitted {}", m.sent, m.delivered, m.lost, m.retransmitted);
    if let Some(d) = &r.debris {
        println!("debris: x={:.6} m theta={:.3e} rad peak_omega={:.3e} rad/s", d.x, d.theta, d.peak_omega);
    }
    if let Some(inc) = &r.mission_incomplete {
        println!("mission {} incomplete: stalled in {}, missing {}", inc.mission, inc.phase, inc.missing.join(", "));
    }
}

fn cmd_run(path: &Path, seed: Option<u64>, out: &Path, no_physics: bool) -> Result<u8> {
    let mut scenario = Scenario::load(path)?;
    if let Some(s) = seed {
        scenario.seed = s;
    }
    let output = run(&scenario, &RunOptions { no_physics })?;
    for p in emit_outputs(&output, out)? {
        println!("wrote {}", p.display());
    }
    print_summary(&output.report);
    Ok(if output.report.is_complete() { 0 } else { EXIT_INCOMPLETE })
}

#[derive(Serialize)]
struct SweepRow {
    value: f64,
    complete: bool,
    sync_error_ms: Option<f64>,
    master_energy_uj: f64,
    slave_energy_uj: f64,
    retransmitted: u64,
}

fn cmd_sweep(path: &Path, param: &str, values: &[f64], out: Option<&Path>) -> Result<u8> {
    let base = Scenario::load(path)?;
    let mut scenarios = Vec::with_capacity(values.len());
    for &v in values {
        let mut s = base.clone();
        s.set_param(param, v).with_context(|| format!("{param} = {v}"))?;
        scenarios.push(s);
    }
    let results: Vec<Result<RunReport>> = std::thread::scope(|scope| {
        let handles: Vec<_> = scenarios
            .iter()
            .map(|s| scope.spawn(move || run(s, &RunOptions { no_physics: true }).map(|o| o.report).map_err(anyhow::Error::from)))
            .collect();
        handles.into_iter().map(|h| h.join().unwrap_or_else(|_| Err(anyhow::anyhow!("sweep worker panicked")))).collect()
    });
    let mut rows = Vec::with_capacity(values.len());
    for (&value, r) in values.iter().zip(results) {
        let r = r.with_context(|| format!("{param} = {value}"))?;
        let energy = |n: &str| r.energy.get(n).map(|e| e.energy_uj).unwrap_or_default();
        rows.push(SweepRow {
            value,
            complete: r.is_complete(),
            sync_error_ms: r.sync_error_ms,
            master_energy_uj: energy("master"),
            slave_energy_uj: energy("slave"),
            retransmitted: r.messages.retransmitted,
        });
    }
    println!("{:>12} {:>9} {:>14} {:>12} {:>12}", param, "complete", "sync_error_ms", "master_uJ", "slave_uJ");
    for r in &rows {
        let sync = r.sync_error_ms.map(|v| format!("{v:.3}")).unwrap_or_else(|| "n/a".into());
        println!("{:>12} {:>9} {:>14} {:>12} {:>12}", r.value, r.complete, sync, r.master_energy_uj, r.slave_energy_uj);
    }
    if let Some(p) = out {
        let f = File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
        serde_json::to_writer_pretty(BufWriter::new(f), &rows)?;
    }
    Ok(if rows.iter().all(|r| r.complete) { 0 } else { EXIT_INCOMPLETE })
}

fn cmd_filter(path: &Path, order: usize, fc: f64, fs: f64, out: Option<&Path>) -> Result<()> {
    let f = File::open(path).with_context(|| format!("cannot read {}", path.display()))?;
    let trace = read_trace_csv(f).with_context(|| format!("reading {}", path.display()))?;
    if (trace.fs_hz - fs).abs() > 1e-6 * fs {
        bail!("{} is sampled at {} Hz, not --fs {fs}", path.display(), trace.fs_hz);
    }
    let coeffs = butterworth_lowpass(order, fc, fs)?;
    let filtered = apply_filter(&coeffs, &trace);
    match out {
        Some(p) => {
            let f = File::create(p).with_context(|| format!("cannot write {}", p.display()))?;
            write_trace_csv(&filtered, BufWriter::new(f))?;
        }
        None => write_trace_csv(&filtered, io::stdout().lock())?,
    }
    Ok(())
}

/// JSON form of a message; byte fields are hex.
#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct MessageJson {
    #[serde(rename = "type")]
    mtype: String,
    code: String,
    mid: u16,
    #[serde(default)]
    token: String,
    #[serde(default)]
    options: Vec<OptionJson>,
    #[serde(default)]
    payload: String,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct OptionJson {
    number: u16,
    value: String,
}

fn to_json(m: &CoapMessage) -> MessageJson {
    MessageJson {
        mtype: m.mtype.short().to_string(),
        code: format!("{}.{:02}", m.code.class(), m.code.detail()),
        mid: m.message_id,
        token: hex::encode(&m.token),
        options: m.options.iter().map(|o| OptionJson { number: o.number, value: hex::encode(&o.value) }).collect(),
        payload: hex::encode(&m.payload),
    }
}

fn from_json(j: &MessageJson) -> Result<CoapMessage> {
    let mtype = match j.mtype.as_str() {
        "CON" => MessageType::Confirmable,
        "NON" => MessageType::NonConfirmable,
        "ACK" => MessageType::Acknowledgement,
        "RST" => MessageType::Reset,
        t => bail!("unknown message type `{t}`"),
    };
    let (class, detail) = j.code.split_once('.').with_context(|| format!("code `{}` is not class.detail", j.code))?;
    let code = Code::new(class.parse().context("code class")?, detail.parse().context("code detail")?);
    let mut m = CoapMessage::new(mtype, code, j.mid);
    m.token = hex::decode(&j.token).context("token hex")?;
    m.options = j.options.iter().map(|o| Ok(CoapOption { number: o.number, value: hex::decode(&o.value)? })).collect::<Result<_>>()?;
    m.payload = hex::decode(&j.payload).context("payload hex")?;
    Ok(m)
}

fn read_input(input: Option<String>) -> Result<String> {
    match input.as_deref() {
        None | Some("-") => {
            let mut s = String::new();
            io::stdin().read_to_string(&mut s)?;
            Ok(s)
        }
        Some(s) => Ok(s.to_string()),
    }
}

fn cmd_codec(direction: Direction, input: Option<String>) -> Result<()> {
    let text = read_input(input)?;
    let mut stdout = io::stdout().lock();
    match direction {
        Direction::Decode => {
            let compact: String = text.chars().filter(|c| !c.is_whitespace()).collect();
            let bytes = hex::decode(&compact).context("input is not hex")?;
            let m = decode_message(&bytes)?;
            serde_json::to_writer_pretty(&mut stdout, &to_json(&m))?;
            writeln!(stdout)?;
        }
        Direction::Encode => {
            let j: MessageJson = serde_json::from_str(&text).context("input is not a message JSON object")?;
            let bytes = encode_message(&from_json(&j)?)?;
            let spaced: Vec<String> = bytes.iter().map(|b| format!("{b:02X}")).collect();
            writeln!(stdout, "{}", spaced.join(" "))?;
        }
    }
    Ok(())
}
