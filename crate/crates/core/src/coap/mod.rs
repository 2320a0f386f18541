//! CoAP subset: wire codec and request/response matching.

mod message;

use std::collections::BTreeSet;

pub use message::{
    decode_message, encode_message, Code, CoapMessage, CoapOption, DecodeError, EncodeError, MessageType, MAX_OPTION_LEN,
    MAX_TOKEN_LEN, OPT_CONTENT_FORMAT, OPT_URI_PATH, PAYLOAD_MARKER,
};

use crate::simnet::NodeId;

/// Confirmable retransmission timeout in simulated milliseconds.
pub const ACK_TIMEOUT_MS: u64 = 2_000;
/// Retransmissions after the first transmission before giving up.
pub const MAX_RETRANSMIT: u32 = 4;

/// Identifies one outstanding request.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct RequestKey {
    pub peer: NodeId,
    pub message_id: u16,
    pub token: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Matched {
    pub key: RequestKey,
    /// The peer answered with RST.
    pub rejected: bool,
}

/// Matches a received message against outstanding requests. Piggybacked ACKs
/// match on peer, message ID and token; RST matches on peer and message ID.
pub fn match_response(outstanding: &BTreeSet<RequestKey>, m: &CoapMessage, peer: NodeId) -> Option<Matched> {
    match m.mtype {
        MessageType::Acknowledgement => {
            let key = RequestKey { peer, message_id: m.message_id, token: m.token.clone() };
            outstanding.contains(&key).then_some(Matched { key, rejected: false })
        }
        MessageType::Reset => outstanding
            .iter()
            .find(|k| k.peer == peer && k.message_id == m.message_id)
            .map(|k| Matched { key: k.clone(), rejected: true }),
        _ => None,
    }
}
