//! `TSZ1` container: one codeword with everything but the spec needed to decode it.
//!
//! Layout (big-endian throughout):
//!
//! | bytes      | field                                       |
//! |------------|---------------------------------------------|
//! | 4          | magic `TSZ1`                                |
//! | 32         | SHA-256 of the spec's canonical bytes       |
//! | 1          | mode: 0 quantized, 1 point, 2 markov        |
//! | 8          | `s` as IEEE-754 double (0 in point mode)    |
//! | 8·d        | anchor, `d` doubles (zeros in point mode)   |
//! | 4          | `x0`, markov mode only                      |
//! | 4          | `n`                                         |
//! | 8          | codeword length in bits                     |
//! | ⌈len/8⌉    | codeword bits, MSB first, zero padded       |

use crate::codec::Codeword;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"TSZ1";

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ContainerMode {
    Quantized = 0,
    Point = 1,
    Markov = 2,
}

impl ContainerMode {
    pub fn from_byte(b: u8) -> Result<Self> {
        match b {
            0 => Ok(ContainerMode::Quantized),
            1 => Ok(ContainerMode::Point),
            2 => Ok(ContainerMode::Markov),
            other => Err(Error::Corrupt(format!("unknown mode byte {other}"))),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ContainerMode::Quantized => "quantized",
            ContainerMode::Point => "point",
            ContainerMode::Markov => "markov",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Container {
    pub spec_hash: [u8; 32],
    pub mode: ContainerMode,
    pub s: f64,
    pub anchor: Vec<f64>,
    /// 0-based initial symbol; present exactly in markov mode.
    pub x0: Option<u32>,
    pub n: u32,
    pub codeword: Codeword,
}

impl Container {
    pub fn to_bytes(&self) -> Vec<u8> {
        let payload = self.codeword.to_packed();
        let mut out = Vec::with_capacity(4 + 32 + 1 + 8 * (1 + self.anchor.len()) + 16 + payload.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.spec_hash);
        out.push(self.mode as u8);
        out.extend_from_slice(&self.s.to_be_bytes());
        for a in &self.anchor {
            out.extend_from_slice(&a.to_be_bytes());
        }
        if let Some(x0) = self.x0 {
            out.extend_from_slice(&x0.to_be_bytes());
        }
        out.extend_from_slice(&self.n.to_be_bytes());
        out.extend_from_slice(&self.codeword.len().to_be_bytes());
        out.extend_from_slice(&payload);
        out
    }

    /// Parses a container whose anchor has `d` coordinates.
    pub fn from_bytes(bytes: &[u8], d: usize) -> Result<Self> {
        let mut r = Reader { bytes, pos: 0 };
        if r.take(4)? != MAGIC {
            return Err(Error::Corrupt("missing TSZ1 magic".into()));
        }
        let spec_hash: [u8; 32] = r.take(32)?.try_into().expect("32 bytes");
        let mode = ContainerMode::from_byte(r.take(1)?[0])?;
        let s = r.f64()?;
        let anchor = (0..d).map(|_| r.f64()).collect::<Result<Vec<_>>>()?;
        let x0 = if mode == ContainerMode::Markov { Some(r.u32()?) } else { None };
        let n = r.u32()?;
        let len = r.u64()?;
        let rest = &bytes[r.pos..];
        let codeword = Codeword::from_packed(rest, len)?;
        if !s.is_finite() || anchor.iter().any(|a| !a.is_finite()) {
            return Err(Error::Corrupt("non-finite grid parameters".into()));
        }
        Ok(Container {
            spec_hash,
            mode,
            s,
            anchor,
            x0,
            n,
            codeword,
        })
    }

    pub fn check_spec(&self, hash: &[u8; 32]) -> Result<()> {
        if &self.spec_hash != hash {
            return Err(Error::Corrupt(
                "container was written for a different spec (spec hash mismatch)".into(),
            ));
        }
        Ok(())
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, k: usize) -> Result<&'a [u8]> {
        let end = self.pos + k;
        if end > self.bytes.len() {
            return Err(Error::Corrupt(format!("container truncated at byte {}", self.bytes.len())));
        }
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_be_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample() -> Container {
        Container {
            spec_hash: [7; 32],
            mode: ContainerMode::Quantized,
            s: 1.0,
            anchor: vec![0.0],
            x0: None,
            n: 10,
            codeword: "10110".parse().unwrap(),
        }
    }

    #[test]
    fn layout_is_exact() {
        let bytes = sample().to_bytes();
        assert_eq!(&bytes[..4], b"TSZ1");
        assert_eq!(bytes[36], 0);
        assert_eq!(&bytes[37..45], &1.0f64.to_be_bytes());
        assert_eq!(&bytes[53..57], &[0, 0, 0, 10]);
        assert_eq!(&bytes[57..65], &[0, 0, 0, 0, 0, 0, 0, 5]);
        assert_eq!(&bytes[65..], &[0b1011_0000]);
        assert_eq!(Container::from_bytes(&bytes, 1).unwrap(), sample());
    }

    #[test]
    fn markov_carries_x0() {
        let mut c = sample();
        c.mode = ContainerMode::Markov;
        c.x0 = Some(1);
        let bytes = c.to_bytes();
        assert_eq!(bytes.len(), sample().to_bytes().len() + 4);
        assert_eq!(Container::from_bytes(&bytes, 1).unwrap(), c);
    }

    #[test]
    fn corruption_detected() {
        let bytes = sample().to_bytes();
        assert!(Container::from_bytes(&bytes[..bytes.len() - 1], 1).is_err());
        let mut bad = bytes.clone();
        bad[0] = b'X';
        assert!(Container::from_bytes(&bad, 1).is_err());
        let mut bad = bytes.clone();
        bad[36] = 9;
        assert!(Container::from_bytes(&bad, 1).is_err());
        assert!(sample().check_spec(&[8; 32]).is_err());
    }
}
