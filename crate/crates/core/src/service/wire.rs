//! Length-prefixed binary messages.
//!
//! A frame is a u32 big-endian payload length followed by the payload. The
//! payload starts with an opcode byte. All integers inside payloads are
//! big-endian.

use std::io::{self, Read, Write};

use thiserror::Error;

pub const OP_ENROLL: u8 = 0x01;
pub const OP_AUTH: u8 = 0x02;
pub const OP_RESULT: u8 = 0x03;
pub const OP_ERROR: u8 = 0x04;
pub const OP_RANDOM: u8 = 0x05;

/// Largest payload a peer may announce.
pub const MAX_FRAME: usize = 16 * 1024 * 1024;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCode {
    BadFrame = 1,
    NotFound = 2,
    Internal = 3,
    UnknownOpcode = 4,
    InvalidArgument = 5,
}

impl ErrorCode {
    pub fn from_u8(v: u8) -> Option<Self> {
        Some(match v {
            1 => ErrorCode::BadFrame,
            2 => ErrorCode::NotFound,
            3 => ErrorCode::Internal,
            4 => ErrorCode::UnknownOpcode,
            5 => ErrorCode::InvalidArgument,
            _ => return None,
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            ErrorCode::BadFrame => "bad_frame",
            ErrorCode::NotFound => "not_found",
            ErrorCode::Internal => "internal",
            ErrorCode::UnknownOpcode => "unknown_opcode",
            ErrorCode::InvalidArgument => "invalid_argument",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ResultBody {
    Enrolled {
        record_id: [u8; 16],
        digest_algorithm: u8,
        digest: Vec<u8>,
    },
    Verdict {
        accepted: bool,
        corrected: u32,
    },
    Random {
        n_bits: u32,
        bytes: Vec<u8>,
    },
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum WireMessage {
    Enroll {
        token_id: [u8; 16],
        challenge: Vec<u8>,
    },
    Auth {
        record_id: [u8; 16],
    },
    Random {
        n_bits: u32,
    },
    Result(ResultBody),
    Error {
        code: ErrorCode,
        message: String,
    },
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("malformed payload: {0}")]
    BadFrame(String),
    #[error("unknown opcode 0x{0:02x}")]
    UnknownOpcode(u8),
}

impl WireMessage {
    pub fn error(code: ErrorCode, message: impl Into<String>) -> Self {
        WireMessage::Error {
            code,
            message: message.into(),
        }
    }

    pub fn encode(&self) -> Vec<u8> {
        let mut out = Vec::new();
        match self {
            WireMessage::Enroll {
                token_id,
                challenge,
            } => {
                out.push(OP_ENROLL);
                out.extend_from_slice(token_id);
                put_blob(&mut out, challenge);
            }
            WireMessage::Auth { record_id } => {
                out.push(OP_AUTH);
                out.extend_from_slice(record_id);
            }
            WireMessage::Random { n_bits } => {
                out.push(OP_RANDOM);
                out.extend_from_slice(&n_bits.to_be_bytes());
            }
            WireMessage::Result(body) => {
                out.push(OP_RESULT);
                match body {
                    ResultBody::Enrolled {
                        record_id,
                        digest_algorithm,
                        digest,
                    } => {
                        out.push(OP_ENROLL);
                        out.extend_from_slice(record_id);
                        out.push(*digest_algorithm);
                        put_blob(&mut out, digest);
                    }
                    ResultBody::Verdict {
                        accepted,
                        corrected,
                    } => {
                        out.push(OP_AUTH);
                        out.push(u8::from(*accepted));
                        out.extend_from_slice(&corrected.to_be_bytes());
                    }
                    ResultBody::Random { n_bits, bytes } => {
                        out.push(OP_RANDOM);
                        out.extend_from_slice(&n_bits.to_be_bytes());
                        out.extend_from_slice(bytes);
                    }
                }
            }
            WireMessage::Error { code, message } => {
                out.push(OP_ERROR);
                out.push(*code as u8);
                put_blob(&mut out, message.as_bytes());
            }
        }
        out
    }

    pub fn decode(payload: &[u8]) -> Result<Self, WireError> {
        let mut r = Cursor {
            buf: payload,
            pos: 0,
        };
        let op = r.u8()?;
        let msg = match op {
            OP_ENROLL => WireMessage::Enroll {
                token_id: r.id()?,
                challenge: r.blob()?.to_vec(),
            },
            OP_AUTH => WireMessage::Auth { record_id: r.id()? },
            OP_RANDOM => WireMessage::Random { n_bits: r.u32()? },
            OP_RESULT => WireMessage::Result(match r.u8()? {
                OP_ENROLL => ResultBody::Enrolled {
                    record_id: r.id()?,
                    digest_algorithm: r.u8()?,
                    digest: r.blob()?.to_vec(),
                },
                OP_AUTH => {
                    let accepted = match r.u8()? {
                        0 => false,
                        1 => true,
                        v => return Err(WireError::BadFrame(format!("verdict byte {v}"))),
                    };
                    ResultBody::Verdict {
                        accepted,
                        corrected: r.u32()?,
                    }
                }
                OP_RANDOM => {
                    let n_bits = r.u32()?;
                    let bytes = r.take((n_bits as usize).div_ceil(8))?.to_vec();
                    ResultBody::Random { n_bits, bytes }
                }
                k => return Err(WireError::BadFrame(format!("unknown result kind {k}"))),
            }),
            OP_ERROR => {
                let raw = r.u8()?;
                let code = ErrorCode::from_u8(raw)
                    .ok_or_else(|| WireError::BadFrame(format!("unknown error code {raw}")))?;
                let message = String::from_utf8(r.blob()?.to_vec())
                    .map_err(|_| WireError::BadFrame("error message is not UTF-8".into()))?;
                WireMessage::Error { code, message }
            }
            other => return Err(WireError::UnknownOpcode(other)),
        };
        if r.pos != payload.len() {
            return Err(WireError::BadFrame(format!(
                "{} trailing bytes",
                payload.len() - r.pos
            )));
        }
        Ok(msg)
    }

    /// Length prefix plus payload.
    pub fn to_frame(&self) -> Vec<u8> {
        frame(&self.encode())
    }
}

pub fn frame(payload: &[u8]) -> Vec<u8> {
    let mut out = Vec::with_capacity(4 + payload.len());
    out.extend_from_slice(&(payload.len() as u32).to_be_bytes());
    out.extend_from_slice(payload);
    out
}

fn put_blob(out: &mut Vec<u8>, blob: &[u8]) {
    out.extend_from_slice(&(blob.len() as u32).to_be_bytes());
    out.extend_from_slice(blob);
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        if self.buf.len() - self.pos < n {
            return Err(WireError::BadFrame("payload too short".into()));
        }
        let out = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(out)
    }

    fn u8(&mut self) -> Result<u8, WireError> {
        Ok(self.take(1)?[0])
    }

    fn u32(&mut self) -> Result<u32, WireError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn id(&mut self) -> Result<[u8; 16], WireError> {
        Ok(self.take(16)?.try_into().unwrap())
    }

    fn blob(&mut self) -> Result<&'a [u8], WireError> {
        let n = self.u32()? as usize;
        self.take(n)
    }
}

/// What a frame read produced.
#[derive(Debug)]
pub enum FrameRead {
    Frame(Vec<u8>),
    /// The peer closed the connection between frames.
    Closed,
    /// The read timed out before any byte of a new frame arrived.
    Idle,
    /// The read timed out part way through a frame; the partial bytes were
    /// discarded.
    Incomplete,
    /// The announced length exceeds [`MAX_FRAME`].
    Oversize(usize),
}

fn is_timeout(e: &io::Error) -> bool {
    matches!(
        e.kind(),
        io::ErrorKind::WouldBlock | io::ErrorKind::TimedOut
    )
}

/// Reads into `buf` until full. Returns how many bytes arrived before a
/// timeout or end of stream.
fn fill<R: Read>(r: &mut R, buf: &mut [u8]) -> io::Result<(usize, bool)> {
    let mut got = 0;
    while got < buf.len() {
        match r.read(&mut buf[got..]) {
            Ok(0) => return Ok((got, true)),
            Ok(n) => got += n,
            Err(e) if e.kind() == io::ErrorKind::Interrupted => {}
            Err(e) if is_timeout(&e) => return Ok((got, false)),
            Err(e) => return Err(e),
        }
    }
    Ok((got, false))
}

/// Reads one frame from a stream whose read timeout bounds how long a
/// partial frame may stall.
pub fn read_frame<R: Read>(r: &mut R) -> io::Result<FrameRead> {
    let mut header = [0u8; 4];
    let (got, eof) = fill(r, &mut header)?;
    if got == 0 {
        return Ok(if eof {
            FrameRead::Closed
        } else {
            FrameRead::Idle
        });
    }
    if got < 4 {
        return Ok(if eof {
            FrameRead::Closed
        } else {
            FrameRead::Incomplete
        });
    }
    let len = u32::from_be_bytes(header) as usize;
    if len > MAX_FRAME {
        return Ok(FrameRead::Oversize(len));
    }
    let mut payload = vec![0u8; len];
    let (got, eof) = fill(r, &mut payload)?;
    if got < len {
        return Ok(if eof {
            FrameRead::Closed
        } else {
            FrameRead::Incomplete
        });
    }
    Ok(FrameRead::Frame(payload))
}

pub fn write_message<W: Write>(w: &mut W, msg: &WireMessage) -> io::Result<()> {
    w.write_all(&msg.to_frame())?;
    w.flush()
}
