//! Fixed-length binary strings used for hashes, codewords and keys.

use std::fmt;

use crate::error::{invalid, Result};

/// A fixed-length binary string. Each element is 0 or 1.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct BitKey {
    bits: Vec<u8>,
}

impl BitKey {
    pub fn new(bits: Vec<u8>) -> Result<Self> {
        if bits.is_empty() {
            return Err(invalid("bit key must be non-empty"));
        }
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(invalid(format!("bit value {b} is not 0 or 1")));
        }
        Ok(Self { bits })
    }

    pub fn from_bools(bits: impl IntoIterator<Item = bool>) -> Result<Self> {
        Self::new(bits.into_iter().map(u8::from).collect())
    }

    /// Parses a string of `0`/`1` characters.
    pub fn parse(s: &str) -> Result<Self> {
        let bits = s
            .chars()
            .map(|c| match c {
                '0' => Ok(0),
                '1' => Ok(1),
                _ => Err(invalid(format!("unexpected character {c:?} in bit string"))),
            })
            .collect::<Result<Vec<u8>>>()?;
        Self::new(bits)
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0; len])
    }

    pub fn len(&self) -> usize {
        self.bits.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bits(&self) -> &[u8] {
        &self.bits
    }

    pub fn into_bits(self) -> Vec<u8> {
        self.bits
    }

    pub fn get(&self, i: usize) -> u8 {
        self.bits[i]
    }

    pub fn flip(&mut self, i: usize) {
        self.bits[i] ^= 1;
    }

    pub fn weight(&self) -> usize {
        self.bits.iter().map(|&b| b as usize).sum()
    }

    pub fn xor(&self, other: &BitKey) -> Result<BitKey> {
        self.check_len(other)?;
        Ok(BitKey {
            bits: self
                .bits
                .iter()
                .zip(&other.bits)
                .map(|(a, b)| a ^ b)
                .collect(),
        })
    }

    pub fn hamming(&self, other: &BitKey) -> Result<usize> {
        self.check_len(other)?;
        Ok(self
            .bits
            .iter()
            .zip(&other.bits)
            .filter(|(a, b)| a != b)
            .count())
    }

    /// Returns a copy with `extra` zero bits appended, for framing a key to a
    /// byte-friendly length.
    pub fn padded(&self, extra: usize) -> BitKey {
        let mut bits = self.bits.clone();
        bits.resize(self.len() + extra, 0);
        BitKey { bits }
    }

    /// Packs MSB-first into bytes; the final byte is zero-padded.
    pub fn pack(&self) -> Vec<u8> {
        pack_bits(&self.bits)
    }

    pub fn unpack(bytes: &[u8], len: usize) -> Result<Self> {
        if bytes.len() * 8 < len {
            return Err(invalid(format!(
                "{} bytes cannot hold {len} bits",
                bytes.len()
            )));
        }
        Self::new(unpack_bits(bytes, len))
    }

    fn check_len(&self, other: &BitKey) -> Result<()> {
        if self.len() != other.len() {
            return Err(invalid(format!(
                "bit length mismatch: {} vs {}",
                self.len(),
                other.len()
            )));
        }
        Ok(())
    }
}

impl fmt::Display for BitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in &self.bits {
            f.write_str(if *b == 1 { "1" } else { "0" })?;
        }
        Ok(())
    }
}

impl fmt::Debug for BitKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitKey({}: {})", self.len(), self)
    }
}

pub(crate) fn pack_bits(bits: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; bits.len().div_ceil(8)];
    for (i, &b) in bits.iter().enumerate() {
        if b != 0 {
            out[i / 8] |= 0x80 >> (i % 8);
        }
    }
    out
}

pub(crate) fn unpack_bits(bytes: &[u8], len: usize) -> Vec<u8> {
    (0..len)
        .map(|i| (bytes[i / 8] >> (7 - i % 8)) & 1)
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hamming_examples() {
        let s = BitKey::parse("0000").unwrap();
        let t = BitKey::parse("1111").unwrap();
        assert_eq!(s.hamming(&s).unwrap(), 0);
        assert_eq!(s.hamming(&t).unwrap(), 4);
        assert!(s.hamming(&BitKey::zeros(3).unwrap()).is_err());
    }

    #[test]
    fn rejects_empty_and_non_binary() {
        assert!(BitKey::new(vec![]).is_err());
        assert!(BitKey::new(vec![0, 2]).is_err());
        assert!(BitKey::parse("01x").is_err());
    }

    #[test]
    fn pack_is_msb_first() {
        let k = BitKey::parse("1000000001").unwrap();
        assert_eq!(k.pack(), vec![0x80, 0x40]);
        assert_eq!(BitKey::unpack(&k.pack(), 10).unwrap(), k);
    }
}
