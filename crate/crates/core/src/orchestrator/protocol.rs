//! The master/worker wire protocol.
//!
//! Every frame is `[version 0x01][length: u32 BE][payload]`, where the
//! payload is a tag byte followed by tag-specific fields:
//!
//! * integers are big-endian (`u32` for worker ids and levels, `u64` for
//!   budgets and conflict counts);
//! * interval bounds are length-prefixed ASCII decimal: `u16 BE` digit
//!   count, then the digits with no leading zeros;
//! * bit strings (model projections) are a `u32 BE` bit count followed by
//!   the packed bits, low bit first within each byte, padding bits zero.
//!
//! The encoding is canonical: decoding validates every field and rejects
//! trailing bytes, so `encode(decode(frame)) == frame` whenever decoding
//! succeeds. A fuzzer therefore cannot produce a frame that decodes into
//! anything but the message that canonically encodes to those same bytes.
//!
//! Tags: 0x01 READY, 0x02 TASK, 0x03 DONE, 0x04 EXIT, 0x05 BASE. BASE is
//! the session bootstrap that delivers the worker's id, the input bit
//! count, and the base formula once per connection; TASK then carries only
//! an interval.

use std::io::{Read, Write};
use std::sync::Arc;

use num_bigint::BigUint;
use thiserror::Error;

use crate::cnf::{Clause, Cnf, Lit};
use crate::interval::Interval;

pub const PROTOCOL_VERSION: u8 = 0x01;
/// Frames above this payload size are rejected outright.
pub const MAX_FRAME_LEN: u32 = 256 * 1024 * 1024;

const TAG_READY: u8 = 0x01;
const TAG_TASK: u8 = 0x02;
const TAG_DONE: u8 = 0x03;
const TAG_EXIT: u8 = 0x04;
const TAG_BASE: u8 = 0x05;

const VERDICT_SAT: u8 = 0x01;
const VERDICT_UNSAT: u8 = 0x02;
const VERDICT_INDET: u8 = 0x03;

pub type WorkerId = u32;

#[derive(Debug, Error)]
pub enum ProtocolError {
    #[error("bad protocol version {0:#04x}")]
    BadVersion(u8),
    #[error("frame truncated")]
    Truncated,
    #[error("frame of {0} bytes exceeds the size limit")]
    Oversize(u32),
    #[error("unknown message tag {0:#04x}")]
    BadTag(u8),
    #[error("malformed payload: {0}")]
    BadPayload(&'static str),
    #[error("{0} trailing bytes after the payload")]
    TrailingBytes(usize),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl PartialEq for ProtocolError {
    fn eq(&self, other: &Self) -> bool {
        use ProtocolError::*;
        match (self, other) {
            (BadVersion(a), BadVersion(b)) => a == b,
            (Truncated, Truncated) => true,
            (Oversize(a), Oversize(b)) => a == b,
            (BadTag(a), BadTag(b)) => a == b,
            (BadPayload(a), BadPayload(b)) => a == b,
            (TrailingBytes(a), TrailingBytes(b)) => a == b,
            (Io(a), Io(b)) => a.kind() == b.kind(),
            _ => false,
        }
    }
}

/// The sub-solver outcome a worker reports for a task. SAT carries the
/// model's projection onto the input variables and, optionally, the full
/// model over the base formula's variables.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DoneVerdict {
    Sat {
        input_bits: Vec<bool>,
        model_bits: Option<Vec<bool>>,
    },
    Unsat,
    Indet,
}

/// A protocol message. `Base` flows master→worker once per session; `Task`
/// and `Exit` flow master→worker; `Ready` and `Done` flow worker→master.
#[derive(Debug, Clone, PartialEq)]
pub enum Message {
    Ready {
        worker: WorkerId,
    },
    Task {
        interval: Interval,
        level: u32,
        /// Conflict budget for this task; 0 means unlimited.
        budget: u64,
    },
    Done {
        worker: WorkerId,
        verdict: DoneVerdict,
        interval: Interval,
        level: u32,
        conflicts: u64,
    },
    Exit,
    Base {
        worker: WorkerId,
        input_bits: u32,
        cnf: Arc<Cnf>,
    },
}

/// Encodes a message as one complete frame.
pub fn encode_message(msg: &Message) -> Vec<u8> {
    let mut payload = Vec::new();
    match msg {
        Message::Ready { worker } => {
            payload.push(TAG_READY);
            payload.extend_from_slice(&worker.to_be_bytes());
        }
        Message::Task {
            interval,
            level,
            budget,
        } => {
            payload.push(TAG_TASK);
            put_interval(&mut payload, interval);
            payload.extend_from_slice(&level.to_be_bytes());
            payload.extend_from_slice(&budget.to_be_bytes());
        }
        Message::Done {
            worker,
            verdict,
            interval,
            level,
            conflicts,
        } => {
            payload.push(TAG_DONE);
            payload.extend_from_slice(&worker.to_be_bytes());
            put_interval(&mut payload, interval);
            payload.extend_from_slice(&level.to_be_bytes());
            payload.extend_from_slice(&conflicts.to_be_bytes());
            match verdict {
                DoneVerdict::Sat {
                    input_bits,
                    model_bits,
                } => {
                    payload.push(VERDICT_SAT);
                    put_bits(&mut payload, input_bits);
                    match model_bits {
                        Some(bits) => {
                            payload.push(0x01);
                            put_bits(&mut payload, bits);
                        }
                        None => payload.push(0x00),
                    }
                }
                DoneVerdict::Unsat => payload.push(VERDICT_UNSAT),
                DoneVerdict::Indet => payload.push(VERDICT_INDET),
            }
        }
        Message::Exit => payload.push(TAG_EXIT),
        Message::Base {
            worker,
            input_bits,
            cnf,
        } => {
            payload.push(TAG_BASE);
            payload.extend_from_slice(&worker.to_be_bytes());
            payload.extend_from_slice(&input_bits.to_be_bytes());
            payload.extend_from_slice(&cnf.num_vars().to_be_bytes());
            payload.extend_from_slice(&(cnf.num_clauses() as u32).to_be_bytes());
            for clause in cnf.clauses() {
                payload.extend_from_slice(&(clause.len() as u32).to_be_bytes());
                for lit in clause {
                    payload.extend_from_slice(&lit.to_dimacs().to_be_bytes());
                }
            }
        }
    }
    let mut frame = Vec::with_capacity(5 + payload.len());
    frame.push(PROTOCOL_VERSION);
    frame.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    frame.extend_from_slice(&payload);
    frame
}

/// Decodes one complete frame. Strict: the version byte, the declared
/// length, every field, and exact payload consumption are all validated.
pub fn decode_message(frame: &[u8]) -> Result<Message, ProtocolError> {
    if frame.is_empty() {
        return Err(ProtocolError::Truncated);
    }
    if frame[0] != PROTOCOL_VERSION {
        return Err(ProtocolError::BadVersion(frame[0]));
    }
    if frame.len() < 5 {
        return Err(ProtocolError::Truncated);
    }
    let declared = u32::from_be_bytes(frame[1..5].try_into().expect("4 bytes"));
    if declared > MAX_FRAME_LEN {
        return Err(ProtocolError::Oversize(declared));
    }
    let payload = &frame[5..];
    if (payload.len() as u32) < declared {
        return Err(ProtocolError::Truncated);
    }
    if (payload.len() as u32) > declared {
        return Err(ProtocolError::TrailingBytes(
            payload.len() - declared as usize,
        ));
    }
    let mut cursor = Cursor {
        data: payload,
        at: 0,
    };
    let msg = parse_payload(&mut cursor)?;
    if cursor.at != payload.len() {
        return Err(ProtocolError::TrailingBytes(payload.len() - cursor.at));
    }
    Ok(msg)
}

struct Cursor<'a> {
    data: &'a [u8],
    at: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ProtocolError> {
        if self.at + n > self.data.len() {
            return Err(ProtocolError::Truncated);
        }
        let slice = &self.data[self.at..self.at + n];
        self.at += n;
        Ok(slice)
    }

    fn u8(&mut self) -> Result<u8, ProtocolError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ProtocolError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().expect("2")))
    }

    fn u32(&mut self) -> Result<u32, ProtocolError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4")))
    }

    fn u64(&mut self) -> Result<u64, ProtocolError> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8")))
    }

    fn i32(&mut self) -> Result<i32, ProtocolError> {
        Ok(i32::from_be_bytes(self.take(4)?.try_into().expect("4")))
    }
}

fn parse_payload(c: &mut Cursor) -> Result<Message, ProtocolError> {
    match c.u8()? {
        TAG_READY => Ok(Message::Ready { worker: c.u32()? }),
        TAG_TASK => {
            let interval = get_interval(c)?;
            let level = c.u32()?;
            let budget = c.u64()?;
            Ok(Message::Task {
                interval,
                level,
                budget,
            })
        }
        TAG_DONE => {
            let worker = c.u32()?;
            let interval = get_interval(c)?;
            let level = c.u32()?;
            let conflicts = c.u64()?;
            let verdict = match c.u8()? {
                VERDICT_SAT => {
                    let input_bits = get_bits(c)?;
                    let model_bits = match c.u8()? {
                        0x00 => None,
                        0x01 => Some(get_bits(c)?),
                        _ => return Err(ProtocolError::BadPayload("bad model-presence flag")),
                    };
                    DoneVerdict::Sat {
                        input_bits,
                        model_bits,
                    }
                }
                VERDICT_UNSAT => DoneVerdict::Unsat,
                VERDICT_INDET => DoneVerdict::Indet,
                _ => return Err(ProtocolError::BadPayload("bad verdict tag")),
            };
            Ok(Message::Done {
                worker,
                verdict,
                interval,
                level,
                conflicts,
            })
        }
        TAG_EXIT => Ok(Message::Exit),
        TAG_BASE => {
            let worker = c.u32()?;
            let input_bits = c.u32()?;
            let num_vars = c.u32()?;
            if input_bits > num_vars {
                return Err(ProtocolError::BadPayload(
                    "input bit count exceeds variable count",
                ));
            }
            let num_clauses = c.u32()?;
            let mut clauses: Vec<Clause> = Vec::new();
            for _ in 0..num_clauses {
                let len = c.u32()?;
                let mut clause = Vec::new();
                for _ in 0..len {
                    let raw = c.i32()?;
                    let lit =
                        Lit::from_dimacs(raw).ok_or(ProtocolError::BadPayload("zero literal"))?;
                    if lit.var().0 > num_vars {
                        return Err(ProtocolError::BadPayload("literal out of range"));
                    }
                    clause.push(lit);
                }
                clauses.push(clause);
            }
            Ok(Message::Base {
                worker,
                input_bits,
                cnf: Arc::new(Cnf::from_parts_unchecked(num_vars, clauses)),
            })
        }
        tag => Err(ProtocolError::BadTag(tag)),
    }
}

fn put_interval(payload: &mut Vec<u8>, interval: &Interval) {
    for bound in [interval.lo(), interval.hi()] {
        let digits = bound.to_str_radix(10);
        payload.extend_from_slice(&(digits.len() as u16).to_be_bytes());
        payload.extend_from_slice(digits.as_bytes());
    }
}

fn get_interval(c: &mut Cursor) -> Result<Interval, ProtocolError> {
    let lo = get_bound(c)?;
    let hi = get_bound(c)?;
    Interval::new(lo, hi).map_err(|_| ProtocolError::BadPayload("interval bounds not lo < hi"))
}

fn get_bound(c: &mut Cursor) -> Result<BigUint, ProtocolError> {
    let len = c.u16()? as usize;
    if len == 0 {
        return Err(ProtocolError::BadPayload("empty decimal bound"));
    }
    let digits = c.take(len)?;
    if digits.iter().any(|b| !b.is_ascii_digit()) {
        return Err(ProtocolError::BadPayload("non-digit in decimal bound"));
    }
    if len > 1 && digits[0] == b'0' {
        return Err(ProtocolError::BadPayload("leading zero in decimal bound"));
    }
    BigUint::parse_bytes(digits, 10).ok_or(ProtocolError::BadPayload("unparseable bound"))
}

fn put_bits(payload: &mut Vec<u8>, bits: &[bool]) {
    payload.extend_from_slice(&(bits.len() as u32).to_be_bytes());
    let mut bytes = vec![0u8; bits.len().div_ceil(8)];
    for (i, &bit) in bits.iter().enumerate() {
        if bit {
            bytes[i / 8] |= 1 << (i % 8);
        }
    }
    payload.extend_from_slice(&bytes);
}

fn get_bits(c: &mut Cursor) -> Result<Vec<bool>, ProtocolError> {
    let count = c.u32()? as usize;
    if count > MAX_FRAME_LEN as usize {
        return Err(ProtocolError::BadPayload("bit string too long"));
    }
    let bytes = c.take(count.div_ceil(8))?;
    // Padding bits must be zero so the encoding stays canonical.
    if count % 8 != 0 {
        let last = bytes[bytes.len() - 1];
        if last >> (count % 8) != 0 {
            return Err(ProtocolError::BadPayload("non-zero padding bits"));
        }
    }
    Ok((0..count).map(|i| bytes[i / 8] >> (i % 8) & 1 == 1).collect())
}

/// Reads one frame from a stream.
pub fn read_message<R: Read>(reader: &mut R) -> Result<Message, ProtocolError> {
    let mut head = [0u8; 5];
    reader.read_exact(&mut head)?;
    if head[0] != PROTOCOL_VERSION {
        return Err(ProtocolError::BadVersion(head[0]));
    }
    let len = u32::from_be_bytes(head[1..5].try_into().expect("4 bytes"));
    if len > MAX_FRAME_LEN {
        return Err(ProtocolError::Oversize(len));
    }
    let mut frame = vec![0u8; 5 + len as usize];
    frame[..5].copy_from_slice(&head);
    reader.read_exact(&mut frame[5..])?;
    decode_message(&frame)
}

/// Writes one frame to a stream.
pub fn write_message<W: Write>(writer: &mut W, msg: &Message) -> Result<(), ProtocolError> {
    writer.write_all(&encode_message(msg))?;
    writer.flush()?;
    Ok(())
}
