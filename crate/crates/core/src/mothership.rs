//! The mothership's CoAP server: `/mission` and `/logging`.
//!
//! `/mission` holds the announced parameters and, once the master has
//! registered it, the start time on the server's timeline. `/logging` is a
//! write-only sink. One mission is live at a time; the lifecycle is
//! `Idle -> Announced -> Scheduled -> Running -> Done -> Idle`.

use std::fmt;

use serde::Serialize;

use crate::coap::{Code, CoapMessage};
use crate::simnet::NodeId;

pub const MISSION_PATH: &str = "mission";
pub const LOGGING_PATH: &str = "logging";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MissionParams {
    /// Percent of full thrust, 0..=100.
    pub motor_speed: u8,
    pub mission_length_ms: u64,
}

impl MissionParams {
    pub fn new(motor_speed: u8, mission_length_ms: u64) -> Result<Self, PayloadError> {
        let p = Self { motor_speed, mission_length_ms };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<(), PayloadError> {
        if self.motor_speed > 100 {
            return Err(PayloadError::Range("speed", self.motor_speed as u64));
        }
        if self.mission_length_ms == 0 {
            return Err(PayloadError::Range("len", 0));
        }
        Ok(())
    }

    pub fn to_payload(&self) -> String {
        format!("speed:{},len:{}", self.motor_speed, self.mission_length_ms)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum PayloadError {
    #[error("payload is not UTF-8")]
    NotText,
    #[error("malformed field `{0}`")]
    Malformed(String),
    #[error("unknown key `{0}`")]
    UnknownKey(String),
    #[error("duplicate key `{0}`")]
    Duplicate(String),
    #[error("value {1} out of range for `{0}`")]
    Range(&'static str, u64),
    #[error("missing key `{0}`")]
    Missing(&'static str),
}

/// Decoded `/mission` payload: `key:value` pairs separated by commas, keys
/// `speed`, `len`, `start`. A bare integer is read as `start`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct MissionFields {
    pub speed: Option<u64>,
    pub len: Option<u64>,
    pub start: Option<u64>,
}

impl MissionFields {
    pub fn parse(text: &str) -> Result<Self, PayloadError> {
        let text = text.trim();
        let mut f = MissionFields::default();
        if !text.is_empty() && text.bytes().all(|b| b.is_ascii_digit()) {
            f.start = Some(parse_u64("start", text)?);
            return Ok(f);
        }
        for field in text.split(',') {
            let (k, v) = field.split_once(':').ok_or_else(|| PayloadError::Malformed(field.to_string()))?;
            let (k, v) = (k.trim(), v.trim());
            let slot = match k {
                "speed" => &mut f.speed,
                "len" => &mut f.len,
                "start" => &mut f.start,
                _ => return Err(PayloadError::UnknownKey(k.to_string())),
            };
            if slot.is_some() {
                return Err(PayloadError::Duplicate(k.to_string()));
            }
            *slot = Some(parse_u64(k, v)?);
        }
        Ok(f)
    }

    pub fn params(&self) -> Result<MissionParams, PayloadError> {
        let speed = self.speed.ok_or(PayloadError::Missing("speed"))?;
        let len = self.len.ok_or(PayloadError::Missing("len"))?;
        if speed > 100 {
            return Err(PayloadError::Range("speed", speed));
        }
        MissionParams::new(speed as u8, len)
    }
}

fn parse_u64(key: &str, v: &str) -> Result<u64, PayloadError> {
    if v.is_empty() || !v.bytes().all(|b| b.is_ascii_digit()) {
        return Err(PayloadError::Malformed(format!("{key}:{v}")));
    }
    v.parse().map_err(|_| PayloadError::Malformed(format!("{key}:{v}")))
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize)]
pub enum MissionPhase {
    #[default]
    Idle,
    Announced,
    Scheduled,
    Running,
    Done,
}

impl MissionPhase {
    pub fn next(self) -> MissionPhase {
        match self {
            MissionPhase::Idle => MissionPhase::Announced,
            MissionPhase::Announced => MissionPhase::Scheduled,
            MissionPhase::Scheduled => MissionPhase::Running,
            MissionPhase::Running => MissionPhase::Done,
            MissionPhase::Done => MissionPhase::Idle,
        }
    }
}

impl fmt::Display for MissionPhase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct MissionRecord {
    pub params: Option<MissionParams>,
    pub start_time_ms: Option<u64>,
    pub phase: MissionPhase,
}

impl MissionRecord {
    /// Field presence agrees with the phase.
    pub fn is_consistent(&self) -> bool {
        match self.phase {
            MissionPhase::Idle => self.params.is_none() && self.start_time_ms.is_none(),
            MissionPhase::Announced => self.params.is_some() && self.start_time_ms.is_none(),
            _ => self.params.is_some() && self.start_time_ms.is_some(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LogEntry {
    pub source: String,
    pub server_rx_time_ms: f64,
    pub payload: String,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MissionError {
    #[error("mission already in progress ({0})")]
    Busy(MissionPhase),
    #[error("no mission announced ({0})")]
    NotAnnounced(MissionPhase),
    #[error("start {start_ms} ms is not after server time {now_ms} ms")]
    StartInPast { start_ms: u64, now_ms: f64 },
    #[error(transparent)]
    Payload(#[from] PayloadError),
}

/// Phase change with the server time it happened at.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PhaseChange {
    pub server_time_ms: f64,
    pub from: MissionPhase,
    pub to: MissionPhase,
}

#[derive(Debug, Clone, Default)]
pub struct MissionServer {
    record: MissionRecord,
    log: Vec<LogEntry>,
    trace: Vec<PhaseChange>,
}

impl MissionServer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record(&self) -> &MissionRecord {
        &self.record
    }

    pub fn phase(&self) -> MissionPhase {
        self.record.phase
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.log
    }

    pub fn phase_trace(&self) -> &[PhaseChange] {
        &self.trace
    }

    fn advance(&mut self, now_ms: f64) {
        let from = self.record.phase;
        let to = from.next();
        self.record.phase = to;
        self.trace.push(PhaseChange { server_time_ms: now_ms, from, to });
    }

    /// Answers one request. CON requests get a piggybacked ACK; the response
    /// keeps the request's message ID and token.
    pub fn handle_request(&mut self, req: &CoapMessage, from: NodeId, now_ms: f64) -> CoapMessage {
        let path = req.uri_path();
        let code = match (path.as_str(), req.code) {
            (MISSION_PATH, Code::GET) => match self.get_mission() {
                Some(text) => {
                    let mut resp = req.response(Code::CONTENT);
                    resp.payload = text.into_bytes();
                    return resp;
                }
                None => Code::NOT_FOUND,
            },
            (MISSION_PATH, Code::PUT) => match self.put_mission(req, now_ms) {
                Ok(()) => Code::CHANGED,
                Err(_) => Code::BAD_REQUEST,
            },
            (LOGGING_PATH, Code::PUT) => {
                let text = String::from_utf8_lossy(&req.payload).into_owned();
                self.put_log(LogEntry { source: from.to_string(), server_rx_time_ms: now_ms, payload: text });
                Code::CHANGED
            }
            (MISSION_PATH | LOGGING_PATH, _) if req.code.is_request() && req.code != Code::GET => Code::BAD_REQUEST,
            _ => Code::NOT_FOUND,
        };
        req.response(code)
    }

    fn put_mission(&mut self, req: &CoapMessage, now_ms: f64) -> Result<(), MissionError> {
        let text = req.payload_text().ok_or(PayloadError::NotText)?;
        let fields = MissionFields::parse(text)?;
        match (fields.speed, fields.len, fields.start) {
            (None, None, Some(start)) => self.put_start_time(start, now_ms),
            (_, _, None) => self.put_mission_params(fields.params()?, now_ms),
            _ => Err(PayloadError::Malformed(text.to_string()).into()),
        }
    }

    pub fn put_mission_params(&mut self, params: MissionParams, now_ms: f64) -> Result<(), MissionError> {
        if self.record.phase != MissionPhase::Idle {
            return Err(MissionError::Busy(self.record.phase));
        }
        params.validate()?;
        self.record.params = Some(params);
        self.advance(now_ms);
        Ok(())
    }

    /// `speed:<v>,len:<v>[,start:<v>]`, or `None` while idle.
    pub fn get_mission(&self) -> Option<String> {
        let params = self.record.params?;
        let mut s = params.to_payload();
        if let Some(start) = self.record.start_time_ms {
            s.push_str(&format!(",start:{start}"));
        }
        Some(s)
    }

    pub fn put_start_time(&mut self, start_time_ms: u64, now_ms: f64) -> Result<(), MissionError> {
        if self.record.phase != MissionPhase::Announced {
            return Err(MissionError::NotAnnounced(self.record.phase));
        }
        if start_time_ms as f64 <= now_ms {
            return Err(MissionError::StartInPast { start_ms: start_time_ms, now_ms });
        }
        self.record.start_time_ms = Some(start_time_ms);
        self.advance(now_ms);
        Ok(())
    }

    pub fn put_log(&mut self, entry: LogEntry) {
        self.log.push(entry);
    }

    /// Applies at most one time-driven transition and returns it.
    pub fn tick(&mut self, now_ms: f64) -> Option<PhaseChange> {
        let due = match (self.record.phase, self.record.start_time_ms, self.record.params) {
            (MissionPhase::Scheduled, Some(start), _) => now_ms >= start as f64,
            (MissionPhase::Running, Some(start), Some(p)) => now_ms >= (start + p.mission_length_ms) as f64,
            (MissionPhase::Done, _, _) => true,
            _ => false,
        };
        if !due {
            return None;
        }
        self.advance(now_ms);
        if self.record.phase == MissionPhase::Idle {
            self.record.params = None;
            self.record.start_time_ms = None;
        }
        self.trace.last().copied()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coap::MessageType;
    use crate::simnet::Role;

    fn base() -> NodeId {
        NodeId::new(Role::BaseStation, 0)
    }

    fn put(path: &str, text: &str) -> CoapMessage {
        CoapMessage::new(MessageType::Confirmable, Code::PUT, 1).with_path(path).with_text(text)
    }

    fn get(path: &str) -> CoapMessage {
        CoapMessage::new(MessageType::Confirmable, Code::GET, 2).with_path(path)
    }

    fn announced() -> MissionServer {
        let mut s = MissionServer::new();
        s.put_mission_params(MissionParams::new(40, 1500).unwrap(), 100.0).unwrap();
        s
    }

    #[test]
    fn base_put_announces() {
        let mut s = MissionServer::new();
        let r = s.handle_request(&put("mission", "speed:40,len:1500"), base(), 100.0);
        assert_eq!((r.mtype, r.code, r.message_id), (MessageType::Acknowledgement, Code::CHANGED, 1));
        assert_eq!(s.phase(), MissionPhase::Announced);
        assert_eq!(s.record().params, Some(MissionParams { motor_speed: 40, mission_length_ms: 1500 }));
    }

    #[test]
    fn get_while_idle_is_not_found() {
        let mut s = MissionServer::new();
        assert_eq!(s.handle_request(&get("mission"), base(), 0.0).code, Code::NOT_FOUND);
        assert_eq!(s.get_mission(), None);
    }

    #[test]
    fn unknown_path_is_not_found() {
        let mut s = MissionServer::new();
        assert_eq!(s.handle_request(&put("unknown", "x"), base(), 0.0).code, Code::NOT_FOUND);
        assert_eq!(s.handle_request(&get("logging"), base(), 0.0).code, Code::NOT_FOUND);
    }

    #[test]
    fn malformed_payload_is_bad_request() {
        let mut s = MissionServer::new();
        for bad in ["speed=40", "speed:40", "speed:40,len:1500,colour:3", "speed:-1,len:5", "speed:40,speed:40,len:1"] {
            assert_eq!(s.handle_request(&put("mission", bad), base(), 0.0).code, Code::BAD_REQUEST, "{bad}");
        }
        assert_eq!(s.phase(), MissionPhase::Idle);
    }

    #[test]
    fn double_announce_rejected() {
        let mut s = announced();
        let err = s.put_mission_params(MissionParams { motor_speed: 10, mission_length_ms: 10 }, 200.0).unwrap_err();
        assert_eq!(err, MissionError::Busy(MissionPhase::Announced));
        assert_eq!(s.record().params.unwrap().motor_speed, 40);
    }

    #[test]
    fn speed_over_100_rejected() {
        let mut s = MissionServer::new();
        assert!(s.put_mission_params(MissionParams { motor_speed: 150, mission_length_ms: 10 }, 0.0).is_err());
        assert_eq!(s.handle_request(&put("mission", "speed:150,len:1500"), base(), 0.0).code, Code::BAD_REQUEST);
        assert_eq!(s.phase(), MissionPhase::Idle);
    }

    #[test]
    fn get_payloads() {
        let mut s = announced();
        assert_eq!(s.get_mission().unwrap(), "speed:40,len:1500");
        s.put_start_time(5000, 1000.0).unwrap();
        assert_eq!(s.get_mission().unwrap(), "speed:40,len:1500,start:5000");
    }

    #[test]
    fn start_registration() {
        let mut s = announced();
        assert!(matches!(s.put_start_time(900, 1000.0), Err(MissionError::StartInPast { .. })));
        s.put_start_time(1500, 1000.0).unwrap();
        assert_eq!(s.phase(), MissionPhase::Scheduled);
        let mut idle = MissionServer::new();
        assert!(matches!(idle.put_start_time(1500, 1000.0), Err(MissionError::NotAnnounced(_))));
    }

    #[test]
    fn start_over_the_wire_bare_or_keyed() {
        let mut s = announced();
        assert_eq!(s.handle_request(&put("mission", "001500"), base(), 1000.0).code, Code::CHANGED);
        assert_eq!(s.record().start_time_ms, Some(1500));
        let mut s = announced();
        assert_eq!(s.handle_request(&put("mission", "start:1500"), base(), 1000.0).code, Code::CHANGED);
        assert_eq!(s.record().start_time_ms, Some(1500));
    }

    #[test]
    fn logging_appends_in_order() {
        let mut s = MissionServer::new();
        s.handle_request(&put("logging", "actuate@5000"), base(), 10.0);
        s.handle_request(&put("logging", "second"), base(), 10.0);
        let mut empty = CoapMessage::new(MessageType::Confirmable, Code::PUT, 3).with_path("logging");
        empty.payload.clear();
        s.handle_request(&empty, base(), 11.0);
        let texts: Vec<_> = s.log().iter().map(|e| e.payload.as_str()).collect();
        assert_eq!(texts, ["actuate@5000", "second", ""]);
        assert_eq!(s.log()[0].server_rx_time_ms, 10.0);
        assert_eq!(s.log()[0].source, "base");
    }

    #[test]
    fn tick_lifecycle() {
        let mut s = announced();
        assert_eq!(s.tick(4000.0), None);
        s.put_start_time(5000, 1000.0).unwrap();
        assert_eq!(s.tick(4999.0), None);
        assert_eq!(s.tick(5000.0).unwrap().to, MissionPhase::Running);
        assert_eq!(s.tick(6499.0), None);
        assert_eq!(s.tick(6500.0).unwrap().to, MissionPhase::Done);
        assert!(s.record().params.is_some());
        assert_eq!(s.tick(6500.0).unwrap().to, MissionPhase::Idle);
        assert_eq!(*s.record(), MissionRecord::default());
        assert_eq!(s.tick(1e9), None);
    }

    #[test]
    fn non_confirmable_gets_non_response() {
        let mut s = MissionServer::new();
        let mut req = get("mission");
        req.mtype = MessageType::NonConfirmable;
        req.token = vec![7];
        let r = s.handle_request(&req, base(), 0.0);
        assert_eq!((r.mtype, r.token.as_slice()), (MessageType::NonConfirmable, &[7u8][..]));
    }
}
