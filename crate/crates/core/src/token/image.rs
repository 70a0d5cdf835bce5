use std::io::{Read, Write};

use crate::error::{invalid, Error, FormatError, Result};

use super::Dims;

/// A raw speckle response: quantized nonnegative intensities, row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SpeckleImage {
    dims: Dims,
    bit_depth: u8,
    pixels: Vec<u16>,
}

impl SpeckleImage {
    pub fn new(dims: Dims, bit_depth: u8, pixels: Vec<u16>) -> Result<Self> {
        if !(1..=16).contains(&bit_depth) {
            return Err(invalid(format!("bit depth {bit_depth} not in 1..=16")));
        }
        if pixels.len() != dims.len() {
            return Err(invalid("pixel count does not match image dimensions"));
        }
        let max = max_value(bit_depth);
        if pixels.iter().any(|&p| p > max) {
            return Err(invalid(format!("pixel value exceeds {max}")));
        }
        Ok(Self {
            dims,
            bit_depth,
            pixels,
        })
    }

    /// 8-bit image from explicit values.
    pub fn from_u8(dims: Dims, pixels: &[u8]) -> Result<Self> {
        Self::new(dims, 8, pixels.iter().map(|&p| p as u16).collect())
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn bit_depth(&self) -> u8 {
        self.bit_depth
    }

    pub fn max_value(&self) -> u16 {
        max_value(self.bit_depth)
    }

    pub fn pixels(&self) -> &[u16] {
        &self.pixels
    }

    pub fn get(&self, row: usize, col: usize) -> u16 {
        self.pixels[row * self.dims.cols + col]
    }

    pub fn to_f64(&self) -> Vec<f64> {
        self.pixels.iter().map(|&p| p as f64).collect()
    }

    /// Writes binary PGM (`P5`).
    pub fn write_pgm<W: Write>(&self, mut w: W) -> Result<()> {
        let max = self.max_value();
        write!(w, "P5\n{} {}\n{}\n", self.dims.cols, self.dims.rows, max)?;
        if max < 256 {
            let bytes: Vec<u8> = self.pixels.iter().map(|&p| p as u8).collect();
            w.write_all(&bytes)?;
        } else {
            for p in &self.pixels {
                w.write_all(&p.to_be_bytes())?;
            }
        }
        Ok(())
    }

    pub fn to_pgm(&self) -> Vec<u8> {
        let mut out = Vec::new();
        self.write_pgm(&mut out)
            .expect("writing to a Vec cannot fail");
        out
    }

    /// Reads binary PGM (`P5`). Comments are allowed in the header.
    pub fn read_pgm<R: Read>(mut r: R) -> Result<Self> {
        let mut data = Vec::new();
        r.read_to_end(&mut data)?;
        Self::from_pgm(&data)
    }

    pub fn from_pgm(data: &[u8]) -> Result<Self> {
        let mut pos = 0;
        let magic = header_token(data, &mut pos)?;
        if magic != b"P5" {
            return Err(FormatError::BadMagic { expected: "P5" }.into());
        }
        let width = header_number(data, &mut pos)?;
        let height = header_number(data, &mut pos)?;
        let maxval = header_number(data, &mut pos)?;
        if maxval == 0 || maxval > 65535 {
            return Err(FormatError::Malformed(format!("maxval {maxval}")).into());
        }
        // Exactly one whitespace byte separates the header from the raster.
        pos += 1;
        let dims = Dims::new(height, width)?;
        let bytes_per = if maxval < 256 { 1 } else { 2 };
        let need = dims.len() * bytes_per;
        let raster = data.get(pos..pos + need).ok_or(FormatError::Truncated {
            needed: (pos + need).saturating_sub(data.len()),
        })?;
        let pixels: Vec<u16> = if bytes_per == 1 {
            raster.iter().map(|&b| b as u16).collect()
        } else {
            raster
                .chunks_exact(2)
                .map(|c| u16::from_be_bytes([c[0], c[1]]))
                .collect()
        };
        if pixels.iter().any(|&p| p as usize > maxval) {
            return Err(FormatError::Malformed("pixel exceeds maxval".into()).into());
        }
        let bit_depth = (usize::BITS - maxval.leading_zeros()) as u8;
        Self::new(dims, bit_depth, pixels)
    }
}

pub(crate) fn max_value(bit_depth: u8) -> u16 {
    ((1u32 << bit_depth) - 1) as u16
}

fn header_token<'a>(data: &'a [u8], pos: &mut usize) -> Result<&'a [u8]> {
    loop {
        while *pos < data.len() && data[*pos].is_ascii_whitespace() {
            *pos += 1;
        }
        if *pos < data.len() && data[*pos] == b'#' {
            while *pos < data.len() && data[*pos] != b'\n' {
                *pos += 1;
            }
            continue;
        }
        break;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    if start == *pos {
        return Err(FormatError::Truncated { needed: 1 }.into());
    }
    Ok(&data[start..*pos])
}

fn header_number(data: &[u8], pos: &mut usize) -> Result<usize> {
    let tok = header_token(data, pos)?;
    std::str::from_utf8(tok)
        .ok()
        .and_then(|s| s.parse().ok())
        .ok_or_else(|| Error::from(FormatError::Malformed("bad PGM header number".into())))
}
