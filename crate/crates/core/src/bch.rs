//! Binary narrow-sense BCH codes over GF(2^m).
//!
//! Codeword bit `i` is the coefficient of `x^(n-1-i)`. Encoding is
//! systematic: the message occupies the first `ell` positions, the parity
//! remainder the rest. Decoding is syndromes, Berlekamp-Massey and a Chien
//! search.

use std::path::Path;

use crate::codec::{put_bitstring, Reader};
use crate::error::{invalid, FormatError, Result};

const MAGIC: &str = "PUFB";

/// GF(2^m) log/antilog tables.
#[derive(Debug, Clone)]
struct Field {
    n: usize,
    exp: Vec<u16>,
    log: Vec<u16>,
}

impl Field {
    /// Returns `None` when `poly` is not primitive.
    fn build(m: u32, poly: u32) -> Option<Self> {
        let n = (1usize << m) - 1;
        let mut exp = vec![0u16; 2 * n];
        let mut log = vec![0u16; n + 1];
        let mut seen = vec![false; n + 1];
        let mut x: u32 = 1;
        for i in 0..n {
            if x == 0 || seen[x as usize] {
                return None;
            }
            seen[x as usize] = true;
            exp[i] = x as u16;
            log[x as usize] = i as u16;
            x <<= 1;
            if x & (1 << m) != 0 {
                x ^= poly;
            }
        }
        if x != 1 {
            return None;
        }
        for i in n..2 * n {
            exp[i] = exp[i - n];
        }
        Some(Self { n, exp, log })
    }

    fn mul(&self, a: u16, b: u16) -> u16 {
        if a == 0 || b == 0 {
            0
        } else {
            self.exp[self.log[a as usize] as usize + self.log[b as usize] as usize]
        }
    }

    fn inv(&self, a: u16) -> u16 {
        self.exp[(self.n - self.log[a as usize] as usize) % self.n]
    }

    /// `alpha^e` for any nonnegative exponent.
    fn pow_alpha(&self, e: usize) -> u16 {
        self.exp[e % self.n]
    }
}

/// Lexicographically least primitive polynomial of degree `m`, as a bit mask.
pub fn primitive_polynomial(m: u32) -> u32 {
    let top = 1u32 << m;
    (top + 1..2 * top)
        .step_by(2)
        .find(|&p| Field::build(m, p).is_some())
        .expect("a primitive polynomial exists for every degree")
}

/// Result of a decode attempt.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DecodeOutcome {
    /// `message` is the recovered secret; `errors` the number of flipped bits.
    Corrected { message: Vec<u8>, errors: usize },
    /// More errors than the decoder can locate consistently.
    Failure,
}

/// A binary BCH code with length `n = 2^m - 1` correcting `t` errors.
#[derive(Debug, Clone)]
pub struct Bch {
    m: u32,
    t: usize,
    ell: usize,
    primitive: u32,
    /// Generator coefficients, highest degree first.
    generator: Vec<u8>,
    field: Field,
}

impl PartialEq for Bch {
    fn eq(&self, other: &Self) -> bool {
        self.m == other.m && self.t == other.t && self.primitive == other.primitive
    }
}

impl Eq for Bch {}

impl Bch {
    pub fn new(m: u32, t: usize) -> Result<Self> {
        if !(3..=10).contains(&m) {
            return Err(invalid(format!("field degree m = {m} must lie in 3..=10")));
        }
        if t == 0 || t >= 1 << (m - 1) {
            return Err(invalid(format!("t = {t} must lie in 1..{}", 1 << (m - 1))));
        }
        let primitive = primitive_polynomial(m);
        let field = Field::build(m, primitive).expect("primitive by construction");
        let n = field.n;

        let mut covered = vec![false; n];
        // Ascending coefficients.
        let mut g: Vec<u8> = vec![1];
        for i in 1..=2 * t {
            let i = i % n;
            if covered[i] {
                continue;
            }
            let mut coset = Vec::new();
            let mut j = i;
            while !covered[j] {
                covered[j] = true;
                coset.push(j);
                j = (2 * j) % n;
            }
            g = gf2_mul(&g, &minimal_polynomial(&field, &coset));
        }
        let deg = g.len() - 1;
        if deg >= n {
            return Err(invalid(format!(
                "t = {t} leaves no message bits for n = {n}"
            )));
        }
        let generator: Vec<u8> = g.into_iter().rev().collect();
        Ok(Self {
            m,
            t,
            ell: n - deg,
            primitive,
            generator,
            field,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    /// Code length `2^m - 1`.
    pub fn n(&self) -> usize {
        self.field.n
    }

    /// Message length.
    pub fn ell(&self) -> usize {
        self.ell
    }

    pub fn t(&self) -> usize {
        self.t
    }

    /// Design distance `2t + 1`.
    pub fn d(&self) -> usize {
        2 * self.t + 1
    }

    pub fn primitive(&self) -> u32 {
        self.primitive
    }

    /// Generator coefficients, highest degree first.
    pub fn generator(&self) -> &[u8] {
        &self.generator
    }

    pub fn encode(&self, message: &[u8]) -> Result<Vec<u8>> {
        if message.len() != self.ell {
            return Err(invalid(format!(
                "message has {} bits, code needs {}",
                message.len(),
                self.ell
            )));
        }
        if message.iter().any(|&b| b > 1) {
            return Err(invalid("message bits must be 0 or 1"));
        }
        let n = self.n();
        let mut buf = vec![0u8; n];
        buf[..self.ell].copy_from_slice(message);
        for i in 0..self.ell {
            if buf[i] == 1 {
                for (b, &g) in buf[i..].iter_mut().zip(&self.generator) {
                    *b ^= g;
                }
            }
        }
        buf[..self.ell].copy_from_slice(message);
        Ok(buf)
    }

    /// `S_j = r(alpha^j)` for `j = 1..=2t`.
    pub fn syndromes(&self, received: &[u8]) -> Result<Vec<u16>> {
        self.check_len(received)?;
        let n = self.n();
        let mut s = vec![0u16; 2 * self.t];
        for (i, _) in received.iter().enumerate().filter(|(_, &b)| b == 1) {
            let deg = n - 1 - i;
            for (j, sj) in s.iter_mut().enumerate() {
                *sj ^= self.field.pow_alpha((j + 1) * deg);
            }
        }
        Ok(s)
    }

    pub fn is_codeword(&self, word: &[u8]) -> Result<bool> {
        Ok(self.syndromes(word)?.iter().all(|&s| s == 0))
    }

    /// Error positions implied by a syndrome vector, or `None` when the
    /// locator has no consistent set of at most `t` roots.
    pub fn locate(&self, syndromes: &[u16]) -> Option<Vec<usize>> {
        if syndromes.iter().all(|&s| s == 0) {
            return Some(Vec::new());
        }
        let lambda = self.berlekamp_massey(syndromes);
        let l = lambda.len() - 1;
        if l > self.t {
            return None;
        }
        let n = self.n();
        let mut positions = Vec::with_capacity(l);
        for i in 0..n {
            let deg = n - 1 - i;
            // Evaluate Lambda at alpha^(-deg).
            let x_log = (n - deg % n) % n;
            let mut acc = 0u16;
            for (k, &c) in lambda.iter().enumerate() {
                if c != 0 {
                    acc ^= self.field.mul(c, self.field.pow_alpha(k * x_log));
                }
            }
            if acc == 0 {
                positions.push(i);
            }
        }
        (positions.len() == l).then_some(positions)
    }

    fn berlekamp_massey(&self, s: &[u16]) -> Vec<u16> {
        let f = &self.field;
        let mut c = vec![1u16];
        let mut b = vec![1u16];
        let mut l = 0usize;
        let mut shift = 1usize;
        let mut last = 1u16;
        for k in 0..s.len() {
            let mut d = s[k];
            for i in 1..=l.min(c.len() - 1) {
                d ^= f.mul(c[i], s[k - i]);
            }
            if d == 0 {
                shift += 1;
                continue;
            }
            let coef = f.mul(d, f.inv(last));
            let prev = c.clone();
            if c.len() < b.len() + shift {
                c.resize(b.len() + shift, 0);
            }
            for (i, &bi) in b.iter().enumerate() {
                c[i + shift] ^= f.mul(coef, bi);
            }
            if 2 * l <= k {
                l = k + 1 - l;
                b = prev;
                last = d;
                shift = 1;
            } else {
                shift += 1;
            }
        }
        c.truncate(l + 1);
        c.resize(l + 1, 0);
        c
    }

    /// Corrected codeword and number of flips, or `None` on failure.
    pub fn correct(&self, received: &[u8]) -> Result<Option<(Vec<u8>, usize)>> {
        let s = self.syndromes(received)?;
        let Some(pos) = self.locate(&s) else {
            return Ok(None);
        };
        let mut word = received.to_vec();
        for &p in &pos {
            word[p] ^= 1;
        }
        if !pos.is_empty() && !self.is_codeword(&word)? {
            return Ok(None);
        }
        Ok(Some((word, pos.len())))
    }

    pub fn decode(&self, received: &[u8]) -> Result<DecodeOutcome> {
        Ok(match self.correct(received)? {
            Some((word, errors)) => DecodeOutcome::Corrected {
                message: word[..self.ell].to_vec(),
                errors,
            },
            None => DecodeOutcome::Failure,
        })
    }

    fn check_len(&self, word: &[u8]) -> Result<()> {
        if word.len() != self.n() {
            return Err(invalid(format!(
                "word has {} bits, code length is {}",
                word.len(),
                self.n()
            )));
        }
        Ok(())
    }

    /// `PUFB`, m u8, t u16, primitive u32, generator bitstring.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.extend_from_slice(MAGIC.as_bytes());
        out.push(self.m as u8);
        out.extend_from_slice(&(self.t as u16).to_le_bytes());
        out.extend_from_slice(&self.primitive.to_le_bytes());
        put_bitstring(&mut out, &self.generator);
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = Reader::new(bytes);
        let code = Self::read(&mut r)?;
        r.finish()?;
        Ok(code)
    }

    pub(crate) fn read(r: &mut Reader<'_>) -> Result<Self> {
        r.magic(MAGIC)?;
        let m = r.u8()? as u32;
        let t = r.u16_le()? as usize;
        let primitive = r.u32_le()?;
        let generator = r.bitstring()?;
        let code = Self::new(m, t).map_err(|e| FormatError::Malformed(e.to_string()))?;
        if code.primitive != primitive || code.generator != generator {
            return Err(FormatError::Malformed(
                "stored polynomials do not match the code parameters".into(),
            )
            .into());
        }
        Ok(code)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, self.to_bytes())?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_bytes(&std::fs::read(path)?)
    }
}

/// Binary minimal polynomial (ascending coefficients) with roots
/// `alpha^j` for `j` in the cyclotomic coset.
fn minimal_polynomial(field: &Field, coset: &[usize]) -> Vec<u8> {
    let mut poly: Vec<u16> = vec![1];
    for &j in coset {
        let root = field.pow_alpha(j);
        let mut next = vec![0u16; poly.len() + 1];
        for (k, &c) in poly.iter().enumerate() {
            next[k + 1] ^= c;
            next[k] ^= field.mul(c, root);
        }
        poly = next;
    }
    poly.into_iter()
        .map(|c| {
            debug_assert!(c <= 1, "minimal polynomial must be binary");
            c as u8
        })
        .collect()
}

fn gf2_mul(a: &[u8], b: &[u8]) -> Vec<u8> {
    let mut out = vec![0u8; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 1 {
            for (j, &y) in b.iter().enumerate() {
                out[i + j] ^= y;
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_primitive_polynomials() {
        assert_eq!(primitive_polynomial(3), 0b1011);
        assert_eq!(primitive_polynomial(4), 0x13);
        assert_eq!(primitive_polynomial(8), 0x11d);
    }

    #[test]
    fn parameter_examples() {
        let h = Bch::new(4, 1).unwrap();
        assert_eq!((h.n(), h.ell(), h.generator().len() - 1), (15, 11, 4));
        let c = Bch::new(4, 3).unwrap();
        assert_eq!((c.n(), c.ell(), c.d()), (15, 5, 7));
        assert!(Bch::new(8, 31).unwrap().ell() > 0);
        assert!(Bch::new(2, 1).is_err());
        assert!(Bch::new(4, 8).is_err());
        assert!(Bch::new(4, 0).is_err());
    }

    #[test]
    fn generator_divides_x_n_minus_one() {
        for (m, t) in [(4, 2), (5, 3), (6, 5)] {
            let code = Bch::new(m, t).unwrap();
            let n = code.n();
            // Long division of x^n + 1 by g.
            let mut r = vec![0u8; n + 1];
            r[0] = 1;
            r[n] = 1;
            let g = code.generator();
            for i in 0..=(n + 1 - g.len()) {
                if r[i] == 1 {
                    for (a, &b) in r[i..].iter_mut().zip(g) {
                        *a ^= b;
                    }
                }
            }
            assert!(r.iter().all(|&b| b == 0));
        }
    }

    #[test]
    fn encode_is_systematic_and_linear() {
        let code = Bch::new(5, 2).unwrap();
        let k = code.ell();
        let a: Vec<u8> = (0..k).map(|i| (i % 3 == 0) as u8).collect();
        let b: Vec<u8> = (0..k).map(|i| (i % 2 == 0) as u8).collect();
        let ab: Vec<u8> = a.iter().zip(&b).map(|(x, y)| x ^ y).collect();
        let ca = code.encode(&a).unwrap();
        let cb = code.encode(&b).unwrap();
        assert_eq!(&ca[..k], &a[..]);
        let sum: Vec<u8> = ca.iter().zip(&cb).map(|(x, y)| x ^ y).collect();
        assert_eq!(code.encode(&ab).unwrap(), sum);
        assert!(code.encode(&vec![0; k]).unwrap().iter().all(|&b| b == 0));
        assert!(code.encode(&a[1..]).is_err());
    }

    #[test]
    fn serialization_round_trip() {
        let code = Bch::new(8, 31).unwrap();
        let bytes = code.to_bytes();
        let back = Bch::from_bytes(&bytes).unwrap();
        assert_eq!(back, code);
        assert_eq!(back.generator(), code.generator());
        let mut bad = bytes.clone();
        bad[7] ^= 1;
        assert!(Bch::from_bytes(&bad).is_err());
        assert!(Bch::from_bytes(&bytes[..6]).is_err());
    }

    #[test]
    fn beyond_radius_never_panics() {
        let code = Bch::new(4, 3).unwrap();
        let c = code.encode(&[1, 0, 1, 1, 0]).unwrap();
        let mut failures = 0;
        let mut wrong = 0;
        for a in 0..15 {
            for b in a + 1..15 {
                for d in b + 1..15 {
                    for e in d + 1..15 {
                        let mut r = c.clone();
                        for p in [a, b, d, e] {
                            r[p] ^= 1;
                        }
                        match code.decode(&r).unwrap() {
                            DecodeOutcome::Failure => failures += 1,
                            DecodeOutcome::Corrected { message, .. } => {
                                assert_ne!(message, vec![1, 0, 1, 1, 0]);
                                wrong += 1;
                            }
                        }
                    }
                }
            }
        }
        assert_eq!(failures + wrong, 1365);
    }
}
