//! Wire formats: packet header, GUID and payload hashing, Message Options.
//!
//! Everything here is big-endian and bit-exact. The packet layout is
//!
//! ```text
//! version(1) ‖ nonce(8) ‖ srcEid(4) ‖ sender(32) ‖ dstEid(4) ‖ receiver(32)   <- 81-byte header
//! ‖ guid(32) ‖ payload
//! ```

use std::fmt;

use sha2::{Digest, Sha256};
use thiserror::Error;

/// Length of the encoded packet header (version through receiver).
pub const HEADER_LEN: usize = 81;
/// Header plus the trailing GUID; the minimum size of an encoded packet.
pub const PACKET_PREFIX_LEN: usize = HEADER_LEN + 32;
/// Default per-chain payload ceiling.
pub const DEFAULT_MAX_PAYLOAD: usize = 64 * 1024;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum CodecError {
    #[error("input too short: {len} bytes, need at least {need}")]
    TooShort { len: usize, need: usize },
    #[error("guid does not match computeGuid(nonce, path)")]
    GuidMismatch,
    #[error("endpoint id 0 is reserved")]
    ZeroEndpointId,
    #[error("nonce 0 is not a valid packet nonce")]
    ZeroNonce,
    #[error("unknown options type {0:#04x}")]
    UnknownType(u8),
    #[error("options truncated")]
    Truncated,
    #[error("options length mismatch: {trailing} trailing bytes")]
    LengthMismatch { trailing: usize },
    #[error("option command of {0} bytes exceeds 65535")]
    CommandTooLong(usize),
    #[error("invalid hex: {0}")]
    Hex(String),
}

/// Identifier of an endpoint (one per simulated chain). Zero is reserved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EndpointId(u32);

impl EndpointId {
    pub fn new(value: u32) -> Result<Self, CodecError> {
        if value == 0 {
            return Err(CodecError::ZeroEndpointId);
        }
        Ok(Self(value))
    }

    pub fn get(self) -> u32 {
        self.0
    }
}

impl fmt::Display for EndpointId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// 32-byte opaque account identifier. Shorter native addresses are left-padded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Address(pub [u8; 32]);

impl Address {
    pub const ZERO: Address = Address([0; 32]);

    pub fn from_low_u64(value: u64) -> Self {
        let mut bytes = [0u8; 32];
        bytes[24..].copy_from_slice(&value.to_be_bytes());
        Address(bytes)
    }

    /// Parses up to 64 hex digits (optional `0x`), left-padding with zeros.
    pub fn from_hex(s: &str) -> Result<Self, CodecError> {
        let s = s.strip_prefix("0x").unwrap_or(s);
        if s.is_empty() || s.len() > 64 {
            return Err(CodecError::Hex(format!("address must be 1..=64 hex digits, got {}", s.len())));
        }
        let padded = format!("{s:0>64}");
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(&padded, &mut bytes).map_err(|e| CodecError::Hex(e.to_string()))?;
        Ok(Address(bytes))
    }
}

impl fmt::Display for Address {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

/// A 32-byte SHA-256 digest.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Default)]
pub struct Hash32(pub [u8; 32]);

pub type Guid = Hash32;
pub type PayloadHash = Hash32;

impl Hash32 {
    pub fn from_hex(s: &str) -> Result<Self, CodecError> {
        let s = s.strip_prefix("0x").unwrap_or(s);
        let mut bytes = [0u8; 32];
        hex::decode_to_slice(s, &mut bytes).map_err(|e| CodecError::Hex(e.to_string()))?;
        Ok(Hash32(bytes))
    }

    pub fn as_bytes(&self) -> &[u8; 32] {
        &self.0
    }
}

impl fmt::Display for Hash32 {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&hex::encode(self.0))
    }
}

pub(crate) fn sha256(parts: &[&[u8]]) -> Hash32 {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update(part);
    }
    let mut out = [0u8; 32];
    out.copy_from_slice(&hasher.finalize());
    Hash32(out)
}

/// Channel identity. Every piece of channel state is keyed by it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Path {
    pub src_eid: EndpointId,
    pub sender: Address,
    pub dst_eid: EndpointId,
    pub receiver: Address,
}

impl Path {
    pub fn new(src_eid: EndpointId, sender: Address, dst_eid: EndpointId, receiver: Address) -> Self {
        Path { src_eid, sender, dst_eid, receiver }
    }

    /// The 80-byte path encoding used inside headers and GUID preimages.
    fn write_to(&self, out: &mut Vec<u8>) {
        out.extend_from_slice(&self.src_eid.0.to_be_bytes());
        out.extend_from_slice(&self.sender.0);
        out.extend_from_slice(&self.dst_eid.0.to_be_bytes());
        out.extend_from_slice(&self.receiver.0);
    }
}

impl fmt::Display for Path {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "src={} sender={} dst={} receiver={}", self.src_eid, self.sender, self.dst_eid, self.receiver)
    }
}

/// SHA-256 over `nonce(8) ‖ srcEid(4) ‖ sender(32) ‖ dstEid(4) ‖ receiver(32)`.
pub fn compute_guid(nonce: u64, path: &Path) -> Guid {
    let mut preimage = Vec::with_capacity(80);
    preimage.extend_from_slice(&nonce.to_be_bytes());
    path.write_to(&mut preimage);
    sha256(&[&preimage])
}

/// The value DVNs attest and the endpoint stores: `SHA-256(guid ‖ payload)`.
pub fn payload_hash(guid: &Guid, payload: &[u8]) -> PayloadHash {
    sha256(&[&guid.0, payload])
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct PacketHeader {
    pub version: u8,
    pub nonce: u64,
    pub path: Path,
    pub guid: Guid,
}

impl PacketHeader {
    /// Builds a header with the GUID derived from `(nonce, path)`.
    pub fn new(version: u8, nonce: u64, path: Path) -> Self {
        PacketHeader { version, nonce, path, guid: compute_guid(nonce, &path) }
    }

    /// The 81-byte header encoding (excludes the GUID).
    pub fn encode(&self) -> [u8; HEADER_LEN] {
        let mut out = Vec::with_capacity(HEADER_LEN);
        out.push(self.version);
        out.extend_from_slice(&self.nonce.to_be_bytes());
        self.path.write_to(&mut out);
        let mut fixed = [0u8; HEADER_LEN];
        fixed.copy_from_slice(&out);
        fixed
    }

    /// Attestation key component: SHA-256 of the encoded header.
    pub fn header_hash(&self) -> Hash32 {
        sha256(&[&self.encode()])
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Packet {
    pub header: PacketHeader,
    pub payload: Vec<u8>,
}

impl Packet {
    pub fn payload_hash(&self) -> PayloadHash {
        payload_hash(&self.header.guid, &self.payload)
    }
}

pub fn encode_packet(packet: &Packet) -> Vec<u8> {
    let mut out = Vec::with_capacity(PACKET_PREFIX_LEN + packet.payload.len());
    out.extend_from_slice(&packet.header.encode());
    out.extend_from_slice(&packet.header.guid.0);
    out.extend_from_slice(&packet.payload);
    out
}

pub fn decode_packet(bytes: &[u8]) -> Result<Packet, CodecError> {
    if bytes.len() < PACKET_PREFIX_LEN {
        return Err(CodecError::TooShort { len: bytes.len(), need: PACKET_PREFIX_LEN });
    }
    let version = bytes[0];
    let nonce = u64::from_be_bytes(bytes[1..9].try_into().expect("8 bytes"));
    let src_eid = EndpointId::new(u32::from_be_bytes(bytes[9..13].try_into().expect("4 bytes")))?;
    let sender = Address(bytes[13..45].try_into().expect("32 bytes"));
    let dst_eid = EndpointId::new(u32::from_be_bytes(bytes[45..49].try_into().expect("4 bytes")))?;
    let receiver = Address(bytes[49..81].try_into().expect("32 bytes"));
    let guid = Hash32(bytes[81..113].try_into().expect("32 bytes"));
    if nonce == 0 {
        return Err(CodecError::ZeroNonce);
    }
    let path = Path { src_eid, sender, dst_eid, receiver };
    if compute_guid(nonce, &path) != guid {
        return Err(CodecError::GuidMismatch);
    }
    Ok(Packet { header: PacketHeader { version, nonce, path, guid }, payload: bytes[PACKET_PREFIX_LEN..].to_vec() })
}

/// One Type 3 entry: arguments for a single offchain worker.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WorkerOption {
    pub worker_id: u8,
    pub op_type: u8,
    pub command: Vec<u8>,
}

/// MessageLib-interpreted worker arguments carried with a send.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum MessageOptions {
    /// `[TYPE_1, executionGas]`
    Gas { execution_gas: u128 },
    /// `[TYPE_2, executionGas, nativeDropAmount, receiver]`
    GasAndDrop { execution_gas: u128, native_drop: u128, receiver: Address },
    /// `[TYPE_3, [workerId, opType, length, command], ...]`
    Composite(Vec<WorkerOption>),
}

const OPT_TYPE_1: u8 = 1;
const OPT_TYPE_2: u8 = 2;
const OPT_TYPE_3: u8 = 3;

impl MessageOptions {
    pub fn encode(&self) -> Result<Vec<u8>, CodecError> {
        let mut out = Vec::new();
        match self {
            MessageOptions::Gas { execution_gas } => {
                out.push(OPT_TYPE_1);
                out.extend_from_slice(&execution_gas.to_be_bytes());
            }
            MessageOptions::GasAndDrop { execution_gas, native_drop, receiver } => {
                out.push(OPT_TYPE_2);
                out.extend_from_slice(&execution_gas.to_be_bytes());
                out.extend_from_slice(&native_drop.to_be_bytes());
                out.extend_from_slice(&receiver.0);
            }
            MessageOptions::Composite(entries) => {
                out.push(OPT_TYPE_3);
                for entry in entries {
                    let len = u16::try_from(entry.command.len())
                        .map_err(|_| CodecError::CommandTooLong(entry.command.len()))?;
                    out.push(entry.worker_id);
                    out.push(entry.op_type);
                    out.extend_from_slice(&len.to_be_bytes());
                    out.extend_from_slice(&entry.command);
                }
            }
        }
        Ok(out)
    }

    pub fn decode(bytes: &[u8]) -> Result<Self, CodecError> {
        let (&kind, rest) = bytes.split_first().ok_or(CodecError::Truncated)?;
        match kind {
            OPT_TYPE_1 => {
                let mut reader = Reader(rest);
                let execution_gas = reader.u128()?;
                reader.finish()?;
                Ok(MessageOptions::Gas { execution_gas })
            }
            OPT_TYPE_2 => {
                let mut reader = Reader(rest);
                let execution_gas = reader.u128()?;
                let native_drop = reader.u128()?;
                let receiver = Address(reader.array::<32>()?);
                reader.finish()?;
                Ok(MessageOptions::GasAndDrop { execution_gas, native_drop, receiver })
            }
            OPT_TYPE_3 => {
                let mut reader = Reader(rest);
                let mut entries = Vec::new();
                while !reader.0.is_empty() {
                    let [worker_id, op_type] = reader.array::<2>()?;
                    let len = u16::from_be_bytes(reader.array::<2>()?) as usize;
                    let command = reader.take(len)?.to_vec();
                    entries.push(WorkerOption { worker_id, op_type, command });
                }
                Ok(MessageOptions::Composite(entries))
            }
            other => Err(CodecError::UnknownType(other)),
        }
    }

    pub fn execution_gas(&self) -> Option<u128> {
        match self {
            MessageOptions::Gas { execution_gas } | MessageOptions::GasAndDrop { execution_gas, .. } => {
                Some(*execution_gas)
            }
            MessageOptions::Composite(_) => None,
        }
    }

    /// Type 3 entries addressed to `worker_id`.
    pub fn entries_for(&self, worker_id: u8) -> impl Iterator<Item = &WorkerOption> {
        let entries: &[WorkerOption] = match self {
            MessageOptions::Composite(entries) => entries,
            _ => &[],
        };
        entries.iter().filter(move |e| e.worker_id == worker_id)
    }
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.0.len() < n {
            return Err(CodecError::Truncated);
        }
        let (head, tail) = self.0.split_at(n);
        self.0 = tail;
        Ok(head)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CodecError> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }

    fn u128(&mut self) -> Result<u128, CodecError> {
        Ok(u128::from_be_bytes(self.array::<16>()?))
    }

    fn finish(self) -> Result<(), CodecError> {
        if self.0.is_empty() {
            Ok(())
        } else {
            Err(CodecError::LengthMismatch { trailing: self.0.len() })
        }
    }
}

/// Named codec outputs for the reference path `1:00..01 -> 2:00..02`,
/// packet version 1. Hex-encoded; order is stable.
pub fn golden_vectors() -> Vec<(&'static str, String)> {
    let eid = |v| EndpointId::new(v).expect("non-zero");
    let path = Path::new(eid(1), Address::from_low_u64(1), eid(2), Address::from_low_u64(2));
    let header = PacketHeader::new(1, 1, path);
    let packet = Packet { header, payload: b"hi".to_vec() };
    let mut preimage = 1u64.to_be_bytes().to_vec();
    path.write_to(&mut preimage);
    let options = |o: MessageOptions| hex::encode(o.encode().expect("small options"));
    vec![
        ("guid_preimage_n1", hex::encode(preimage)),
        ("guid_n1", header.guid.to_string()),
        ("header_n1", hex::encode(header.encode())),
        ("header_hash_n1", header.header_hash().to_string()),
        ("packet_n1_hi", hex::encode(encode_packet(&packet))),
        ("payload_hash_zero_guid_empty", payload_hash(&Hash32::default(), &[]).to_string()),
        ("payload_hash_n1_hi", packet.payload_hash().to_string()),
        ("options_type1_gas200000", options(MessageOptions::Gas { execution_gas: 200_000 })),
        (
            "options_type2_gas200000_drop7_recv2",
            options(MessageOptions::GasAndDrop {
                execution_gas: 200_000,
                native_drop: 7,
                receiver: Address::from_low_u64(2),
            }),
        ),
        (
            "options_type3_w1_op1_aabbcc",
            options(MessageOptions::Composite(vec![WorkerOption {
                worker_id: 1,
                op_type: 1,
                command: vec![0xaa, 0xbb, 0xcc],
            }])),
        ),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn eid(v: u32) -> EndpointId {
        EndpointId::new(v).unwrap()
    }

    fn path() -> Path {
        Path::new(eid(1), Address::from_low_u64(1), eid(2), Address::from_low_u64(2))
    }

    #[test]
    fn endpoint_id_zero_is_reserved() {
        assert_eq!(EndpointId::new(0), Err(CodecError::ZeroEndpointId));
    }

    #[test]
    fn guid_depends_on_nonce_and_receiver() {
        let p = path();
        assert_ne!(compute_guid(1, &p), compute_guid(2, &p));
        let mut q = p;
        q.receiver = Address::from_low_u64(3);
        assert_ne!(compute_guid(1, &p), compute_guid(1, &q));
    }

    #[test]
    fn empty_payload_is_header_plus_guid() {
        let packet = Packet { header: PacketHeader::new(1, 1, path()), payload: vec![] };
        assert_eq!(encode_packet(&packet).len(), PACKET_PREFIX_LEN);
        assert_eq!(packet.header.encode().len(), HEADER_LEN);
    }

    #[test]
    fn decode_rejects_short_and_forged() {
        let packet = Packet { header: PacketHeader::new(1, 7, path()), payload: b"hi".to_vec() };
        let mut bytes = encode_packet(&packet);
        assert!(matches!(decode_packet(&bytes[..PACKET_PREFIX_LEN - 1]), Err(CodecError::TooShort { .. })));
        assert!(matches!(decode_packet(&bytes[..80]), Err(CodecError::TooShort { .. })));
        bytes[HEADER_LEN + 5] ^= 0x01;
        assert_eq!(decode_packet(&bytes), Err(CodecError::GuidMismatch));
    }

    #[test]
    fn payload_hash_separates_payloads() {
        let g = Hash32::default();
        assert_eq!(payload_hash(&g, b""), payload_hash(&g, b""));
        assert_ne!(payload_hash(&g, b""), payload_hash(&g, b"a"));
    }

    #[test]
    fn options_lengths() {
        let t1 = MessageOptions::Gas { execution_gas: 200_000 }.encode().unwrap();
        assert_eq!(t1.len(), 17);
        assert_eq!(t1[0], 0x01);
        assert_eq!(MessageOptions::Composite(vec![]).encode().unwrap(), vec![0x03]);
        let t3 = MessageOptions::Composite(vec![WorkerOption { worker_id: 1, op_type: 1, command: vec![1, 2, 3] }]);
        assert_eq!(t3.encode().unwrap().len(), 8);
    }

    #[test]
    fn options_decode_errors() {
        assert_eq!(MessageOptions::decode(&[0x04]), Err(CodecError::UnknownType(4)));
        assert_eq!(MessageOptions::decode(&[]), Err(CodecError::Truncated));
        assert_eq!(MessageOptions::decode(&[0x01, 0, 0]), Err(CodecError::Truncated));
        let mut t1 = MessageOptions::Gas { execution_gas: 5 }.encode().unwrap();
        t1.push(0);
        assert_eq!(MessageOptions::decode(&t1), Err(CodecError::LengthMismatch { trailing: 1 }));
        // declared length 4, only 3 command bytes present
        assert_eq!(MessageOptions::decode(&[0x03, 1, 1, 0, 4, 9, 9, 9]), Err(CodecError::Truncated));
    }

    #[test]
    fn oversized_command_is_rejected() {
        let opts = MessageOptions::Composite(vec![WorkerOption { worker_id: 1, op_type: 1, command: vec![0; 65536] }]);
        assert_eq!(opts.encode(), Err(CodecError::CommandTooLong(65536)));
    }

    #[test]
    fn address_hex_is_left_padded() {
        assert_eq!(Address::from_hex("0x01").unwrap(), Address::from_low_u64(1));
        assert!(Address::from_hex(&"f".repeat(65)).is_err());
    }
}
