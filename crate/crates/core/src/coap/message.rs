use std::fmt;

use thiserror::Error;

pub const VERSION: u8 = 1;
pub const PAYLOAD_MARKER: u8 = 0xFF;
pub const MAX_TOKEN_LEN: usize = 8;
pub const MAX_OPTION_LEN: usize = 255;

pub const OPT_URI_PATH: u16 = 11;
pub const OPT_CONTENT_FORMAT: u16 = 12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum MessageType {
    Confirmable,
    NonConfirmable,
    Acknowledgement,
    Reset,
}

impl MessageType {
    fn bits(self) -> u8 {
        match self {
            MessageType::Confirmable => 0,
            MessageType::NonConfirmable => 1,
            MessageType::Acknowledgement => 2,
            MessageType::Reset => 3,
        }
    }

    fn from_bits(b: u8) -> Self {
        match b & 0b11 {
            0 => MessageType::Confirmable,
            1 => MessageType::NonConfirmable,
            2 => MessageType::Acknowledgement,
            _ => MessageType::Reset,
        }
    }

    pub fn short(self) -> &'static str {
        match self {
            MessageType::Confirmable => "CON",
            MessageType::NonConfirmable => "NON",
            MessageType::Acknowledgement => "ACK",
            MessageType::Reset => "RST",
        }
    }
}

/// Request method or response code, `class.detail` packed as on the wire.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Code(u8);

impl Code {
    pub const EMPTY: Code = Code::new(0, 0);
    pub const GET: Code = Code::new(0, 1);
    pub const PUT: Code = Code::new(0, 3);
    pub const CREATED: Code = Code::new(2, 1);
    pub const CHANGED: Code = Code::new(2, 4);
    pub const CONTENT: Code = Code::new(2, 5);
    pub const BAD_REQUEST: Code = Code::new(4, 0);
    pub const NOT_FOUND: Code = Code::new(4, 4);

    const SUPPORTED: [Code; 8] = [
        Code::EMPTY,
        Code::GET,
        Code::PUT,
        Code::CREATED,
        Code::CHANGED,
        Code::CONTENT,
        Code::BAD_REQUEST,
        Code::NOT_FOUND,
    ];

    pub const fn new(class: u8, detail: u8) -> Self {
        Code((class << 5) | (detail & 0x1F))
    }

    pub fn from_byte(b: u8) -> Self {
        Code(b)
    }

    pub fn byte(self) -> u8 {
        self.0
    }

    pub fn class(self) -> u8 {
        self.0 >> 5
    }

    pub fn detail(self) -> u8 {
        self.0 & 0x1F
    }

    pub fn is_supported(self) -> bool {
        Self::SUPPORTED.contains(&self)
    }

    pub fn is_request(self) -> bool {
        self.class() == 0 && self != Code::EMPTY
    }

    pub fn name(self) -> Option<&'static str> {
        Some(match self {
            Code::EMPTY => "Empty",
            Code::GET => "GET",
            Code::PUT => "PUT",
            Code::CREATED => "Created",
            Code::CHANGED => "Changed",
            Code::CONTENT => "Content",
            Code::BAD_REQUEST => "BadRequest",
            Code::NOT_FOUND => "NotFound",
            _ => return None,
        })
    }
}

impl fmt::Display for Code {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match *self {
            Code::GET | Code::PUT => f.write_str(self.name().unwrap_or("?")),
            _ => write!(f, "{}.{:02}", self.class(), self.detail()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoapOption {
    pub number: u16,
    pub value: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CoapMessage {
    pub mtype: MessageType,
    pub code: Code,
    pub message_id: u16,
    pub token: Vec<u8>,
    /// Sorted ascending by option number.
    pub options: Vec<CoapOption>,
    pub payload: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum EncodeError {
    #[error("token is {0} bytes, at most 8 allowed")]
    TokenTooLong(usize),
    #[error("option {number} value is {len} bytes, at most 255 allowed")]
    OptionTooLong { number: u16, len: usize },
    #[error("options are not sorted by number (option {0} follows a larger one)")]
    UnsortedOptions(u16),
    #[error("empty message carries a token, options or payload")]
    NonEmptyEmpty,
    #[error("unsupported code {0}")]
    UnsupportedCode(Code),
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum DecodeError {
    #[error("truncated {0}")]
    Truncated(&'static str),
    #[error("unsupported version {0}")]
    BadVersion(u8),
    #[error("token length {0} exceeds 8")]
    TokenTooLong(u8),
    #[error("reserved option nibble 15 in {0}")]
    ReservedNibble(&'static str),
    #[error("payload marker followed by an empty payload")]
    EmptyPayload,
    #[error("option {number} value is {len} bytes, at most 255 allowed")]
    OptionTooLong { number: u32, len: usize },
    #[error("option number {0} out of range")]
    OptionNumberOverflow(u32),
    #[error("unsupported code {0}")]
    UnsupportedCode(Code),
    #[error("empty message carries a token, options or payload")]
    NonEmptyEmpty,
}

impl CoapMessage {
    pub fn new(mtype: MessageType, code: Code, message_id: u16) -> Self {
        Self { mtype, code, message_id, token: Vec::new(), options: Vec::new(), payload: Vec::new() }
    }

    /// Appends an option, keeping options sorted (stable for equal numbers).
    pub fn add_option(&mut self, number: u16, value: Vec<u8>) {
        let at = self.options.partition_point(|o| o.number <= number);
        self.options.insert(at, CoapOption { number, value });
    }

    pub fn with_path(mut self, path: &str) -> Self {
        for seg in path.split('/').filter(|s| !s.is_empty()) {
            self.add_option(OPT_URI_PATH, seg.as_bytes().to_vec());
        }
        self
    }

    /// Adds Content-Format 0 (text/plain) and the payload.
    pub fn with_text(mut self, text: &str) -> Self {
        self.add_option(OPT_CONTENT_FORMAT, Vec::new());
        self.payload = text.as_bytes().to_vec();
        self
    }

    pub fn uri_path(&self) -> String {
        let segs: Vec<String> = self
            .options
            .iter()
            .filter(|o| o.number == OPT_URI_PATH)
            .map(|o| String::from_utf8_lossy(&o.value).into_owned())
            .collect();
        segs.join("/")
    }

    pub fn payload_text(&self) -> Option<&str> {
        std::str::from_utf8(&self.payload).ok()
    }

    /// Piggybacked response to `self`: same message ID and token.
    pub fn response(&self, code: Code) -> CoapMessage {
        let mtype = match self.mtype {
            MessageType::Confirmable => MessageType::Acknowledgement,
            _ => MessageType::NonConfirmable,
        };
        CoapMessage { mtype, code, message_id: self.message_id, token: self.token.clone(), options: Vec::new(), payload: Vec::new() }
    }

    /// One-line human readable summary for logs.
    pub fn summary(&self) -> String {
        let mut s = format!("{} {} mid={}", self.mtype.short(), self.code, self.message_id);
        if !self.token.is_empty() {
            s.push_str(" tok=");
            for b in &self.token {
                s.push_str(&format!("{b:02x}"));
            }
        }
        let path = self.uri_path();
        if !path.is_empty() {
            s.push_str(&format!(" /{path}"));
        }
        if !self.payload.is_empty() {
            match self.payload_text() {
                Some(t) => s.push_str(&format!(" \"{t}\"")),
                None => s.push_str(&format!(" <{} bytes>", self.payload.len())),
            }
        }
        s
    }

    fn check(&self) -> Result<(), EncodeError> {
        if !self.code.is_supported() {
            return Err(EncodeError::UnsupportedCode(self.code));
        }
        if self.token.len() > MAX_TOKEN_LEN {
            return Err(EncodeError::TokenTooLong(self.token.len()));
        }
        if self.code == Code::EMPTY && (!self.token.is_empty() || !self.options.is_empty() || !self.payload.is_empty()) {
            return Err(EncodeError::NonEmptyEmpty);
        }
        let mut prev = 0u16;
        for o in &self.options {
            if o.number < prev {
                return Err(EncodeError::UnsortedOptions(o.number));
            }
            if o.value.len() > MAX_OPTION_LEN {
                return Err(EncodeError::OptionTooLong { number: o.number, len: o.value.len() });
            }
            prev = o.number;
        }
        Ok(())
    }
}

fn nibble(v: usize) -> (u8, Option<Vec<u8>>) {
    match v {
        0..=12 => (v as u8, None),
        13..=268 => (13, Some(vec![(v - 13) as u8])),
        _ => {
            let x = (v - 269) as u16;
            (14, Some(x.to_be_bytes().to_vec()))
        }
    }
}

/// Serializes `m` to its wire form.
pub fn encode_message(m: &CoapMessage) -> Result<Vec<u8>, EncodeError> {
    m.check()?;
    let mut out = Vec::with_capacity(4 + m.token.len() + m.payload.len() + 8 * m.options.len());
    out.push((VERSION << 6) | (m.mtype.bits() << 4) | m.token.len() as u8);
    out.push(m.code.byte());
    out.extend_from_slice(&m.message_id.to_be_bytes());
    out.extend_from_slice(&m.token);
    let mut prev = 0u16;
    for o in &m.options {
        let (dn, dext) = nibble(usize::from(o.number - prev));
        let (ln, lext) = nibble(o.value.len());
        out.push((dn << 4) | ln);
        out.extend(dext.into_iter().flatten());
        out.extend(lext.into_iter().flatten());
        out.extend_from_slice(&o.value);
        prev = o.number;
    }
    if !m.payload.is_empty() {
        out.push(PAYLOAD_MARKER);
        out.extend_from_slice(&m.payload);
    }
    Ok(out)
}

struct Reader<'a> {
    buf: &'a [u8],
    at: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &'static str) -> Result<&'a [u8], DecodeError> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or(DecodeError::Truncated(what))?;
        let s = &self.buf[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn ext(&mut self, n: u8, what: &'static str) -> Result<u32, DecodeError> {
        Ok(match n {
            13 => u32::from(self.take(1, what)?[0]) + 13,
            14 => {
                let b = self.take(2, what)?;
                u32::from(u16::from_be_bytes([b[0], b[1]])) + 269
            }
            15 => return Err(DecodeError::ReservedNibble(what)),
            n => u32::from(n),
        })
    }
}

/// Parses a wire-form message. Never reads past `b`.
pub fn decode_message(b: &[u8]) -> Result<CoapMessage, DecodeError> {
    let mut r = Reader { buf: b, at: 0 };
    let hdr = r.take(4, "header")?;
    let version = hdr[0] >> 6;
    if version != VERSION {
        return Err(DecodeError::BadVersion(version));
    }
    let mtype = MessageType::from_bits(hdr[0] >> 4);
    let tkl = hdr[0] & 0x0F;
    if usize::from(tkl) > MAX_TOKEN_LEN {
        return Err(DecodeError::TokenTooLong(tkl));
    }
    let code = Code::from_byte(hdr[1]);
    if !code.is_supported() {
        return Err(DecodeError::UnsupportedCode(code));
    }
    let message_id = u16::from_be_bytes([hdr[2], hdr[3]]);
    let token = r.take(usize::from(tkl), "token")?.to_vec();

    let mut options = Vec::new();
    let mut payload = Vec::new();
    let mut number: u32 = 0;
    while r.at < b.len() {
        let byte = r.take(1, "option header")?[0];
        if byte == PAYLOAD_MARKER {
            payload = b[r.at..].to_vec();
            if payload.is_empty() {
                return Err(DecodeError::EmptyPayload);
            }
            break;
        }
        let delta = r.ext(byte >> 4, "option delta")?;
        let len = r.ext(byte & 0x0F, "option length")? as usize;
        number += delta;
        if number > u32::from(u16::MAX) {
            return Err(DecodeError::OptionNumberOverflow(number));
        }
        if len > MAX_OPTION_LEN {
            return Err(DecodeError::OptionTooLong { number, len });
        }
        let value = r.take(len, "option value")?.to_vec();
        options.push(CoapOption { number: number as u16, value });
    }
    if code == Code::EMPTY && (!token.is_empty() || !options.is_empty() || !payload.is_empty()) {
        return Err(DecodeError::NonEmptyEmpty);
    }
    Ok(CoapMessage { mtype, code, message_id, token, options, payload })
}
