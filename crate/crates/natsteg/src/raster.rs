//! Bit-exact PNM (P2/P3/P5/P6) reading and writing plus tiling of large
//! captures into fixed-size windows.
//!
//! Only maxval 255 and 65535 are supported; 16-bit binary samples follow the
//! PNM convention (big-endian). Comments are accepted on read and never
//! emitted on write so outputs are deterministic.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};

/// Owned 2D grid of 16-bit samples, 1 or 3 channels, row-major,
/// channel-interleaved for color.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Raster16 {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub bit_depth: u8,
    pub samples: Vec<u16>,
}

impl Raster16 {
    pub fn new(width: usize, height: usize, channels: usize, bit_depth: u8) -> Result<Self> {
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidArgument(format!(
                "channels must be 1 or 3, got {channels}"
            )));
        }
        if bit_depth != 8 && bit_depth != 16 {
            return Err(Error::InvalidArgument(format!(
                "bit depth must be 8 or 16, got {bit_depth}"
            )));
        }
        Ok(Raster16 {
            width,
            height,
            channels,
            bit_depth,
            samples: vec![0; width * height * channels],
        })
    }

    pub fn from_samples(
        width: usize,
        height: usize,
        channels: usize,
        bit_depth: u8,
        samples: Vec<u16>,
    ) -> Result<Self> {
        let mut r = Self::new(width, height, channels, bit_depth)?;
        if samples.len() != r.samples.len() {
            return Err(Error::InvalidArgument(format!(
                "sample count {} does not match {}x{}x{}",
                samples.len(),
                width,
                height,
                channels
            )));
        }
        let max = r.max_value();
        if let Some(&s) = samples.iter().find(|&&s| s > max) {
            return Err(Error::InvalidArgument(format!(
                "sample {s} exceeds maxval {max}"
            )));
        }
        r.samples = samples;
        Ok(r)
    }

    pub fn max_value(&self) -> u16 {
        if self.bit_depth == 8 {
            255
        } else {
            65535
        }
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize, ch: usize) -> u16 {
        self.samples[(y * self.width + x) * self.channels + ch]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, ch: usize, v: u16) {
        self.samples[(y * self.width + x) * self.channels + ch] = v;
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

/// Tiling grid: `grid_cols x grid_rows` windows of `tile_w x tile_h` taken
/// from the top-left corner; residual right/bottom margins are discarded.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileSpec {
    pub tile_w: usize,
    pub tile_h: usize,
    pub grid_cols: usize,
    pub grid_rows: usize,
}

pub fn tile(r: &Raster16, spec: &TileSpec) -> Result<Vec<Raster16>> {
    if spec.grid_cols * spec.tile_w > r.width || spec.grid_rows * spec.tile_h > r.height {
        return Err(Error::InvalidArgument(format!(
            "tile grid {}x{} of {}x{} tiles exceeds {}x{} source",
            spec.grid_cols, spec.grid_rows, spec.tile_w, spec.tile_h, r.width, r.height
        )));
    }
    let mut tiles = Vec::with_capacity(spec.grid_rows * spec.grid_cols);
    for gy in 0..spec.grid_rows {
        for gx in 0..spec.grid_cols {
            let mut t = Raster16::new(spec.tile_w, spec.tile_h, r.channels, r.bit_depth)?;
            for y in 0..spec.tile_h {
                let src_y = gy * spec.tile_h + y;
                let src_off = (src_y * r.width + gx * spec.tile_w) * r.channels;
                let dst_off = y * spec.tile_w * r.channels;
                let n = spec.tile_w * r.channels;
                t.samples[dst_off..dst_off + n]
                    .copy_from_slice(&r.samples[src_off..src_off + n]);
            }
            tiles.push(t);
        }
    }
    Ok(tiles)
}

pub fn read_raster(path: impl AsRef<Path>) -> Result<Raster16> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = BufReader::new(file);
    let mut data = Vec::new();
    reader
        .read_to_end(&mut data)
        .map_err(|e| Error::io(path, e))?;
    decode_pnm(&data)
}

pub fn decode_pnm(data: &[u8]) -> Result<Raster16> {
    let mut pos = 0usize;
    let magic = read_token(data, &mut pos)
        .ok_or_else(|| Error::Format("missing PNM magic".into()))?;
    let (channels, binary) = match magic.as_str() {
        "P2" => (1, false),
        "P3" => (3, false),
        "P5" => (1, true),
        "P6" => (3, true),
        other => {
            return Err(Error::Format(format!(
                "unsupported PNM magic {other:?} (want P2/P3/P5/P6)"
            )))
        }
    };
    let width = read_header_int(data, &mut pos, "width")?;
    let height = read_header_int(data, &mut pos, "height")?;
    let maxval = read_header_int(data, &mut pos, "maxval")?;
    let bit_depth = match maxval {
        255 => 8,
        65535 => 16,
        _ => return Err(Error::Format(format!("maxval {maxval} unsupported"))),
    };
    if width == 0 || height == 0 {
        return Err(Error::Format("zero image dimension".into()));
    }

    let count = width * height * channels;
    let mut samples = Vec::with_capacity(count);
    if binary {
        // Exactly one whitespace byte separates the header from the payload.
        if pos >= data.len() || !data[pos].is_ascii_whitespace() {
            return Err(Error::Format("missing separator before binary payload".into()));
        }
        pos += 1;
        let bytes_per_sample = if bit_depth == 16 { 2 } else { 1 };
        let need = count * bytes_per_sample;
        if data.len() - pos < need {
            return Err(Error::Format(format!(
                "truncated payload: need {need} bytes, have {}",
                data.len() - pos
            )));
        }
        let payload = &data[pos..pos + need];
        if bit_depth == 16 {
            for pair in payload.chunks_exact(2) {
                samples.push(u16::from_be_bytes([pair[0], pair[1]]));
            }
        } else {
            samples.extend(payload.iter().map(|&b| b as u16));
        }
    } else {
        for i in 0..count {
            let tok = read_token(data, &mut pos)
                .ok_or_else(|| Error::Format(format!("truncated payload at sample {i}")))?;
            let v: u32 = tok
                .parse()
                .map_err(|_| Error::Format(format!("bad ASCII sample {tok:?}")))?;
            if v > maxval as u32 {
                return Err(Error::Format(format!(
                    "sample {v} out of declared range 0..={maxval}"
                )));
            }
            samples.push(v as u16);
        }
    }
    Raster16::from_samples(width, height, channels, bit_depth, samples)
}

pub fn write_raster(r: &Raster16, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    encode_pnm(r, &mut w).map_err(|e| Error::io(path, e))
}

pub fn encode_pnm(r: &Raster16, w: &mut impl Write) -> std::io::Result<()> {
    let magic = if r.channels == 1 { "P5" } else { "P6" };
    write!(w, "{}\n{} {}\n{}\n", magic, r.width, r.height, r.max_value())?;
    if r.bit_depth == 16 {
        let mut buf = Vec::with_capacity(r.samples.len() * 2);
        for &s in &r.samples {
            buf.extend_from_slice(&s.to_be_bytes());
        }
        w.write_all(&buf)?;
    } else {
        let buf: Vec<u8> = r.samples.iter().map(|&s| s as u8).collect();
        w.write_all(&buf)?;
    }
    w.flush()
}

/// Reads the next whitespace-delimited token, skipping `#` comments.
fn read_token(data: &[u8], pos: &mut usize) -> Option<String> {
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
    if *pos >= data.len() {
        return None;
    }
    let start = *pos;
    while *pos < data.len() && !data[*pos].is_ascii_whitespace() {
        *pos += 1;
    }
    Some(String::from_utf8_lossy(&data[start..*pos]).into_owned())
}

fn read_header_int(data: &[u8], pos: &mut usize, what: &str) -> Result<usize> {
    let tok = read_token(data, pos)
        .ok_or_else(|| Error::Format(format!("missing {what} in header")))?;
    tok.parse()
        .map_err(|_| Error::Format(format!("bad {what} {tok:?}")))
}
