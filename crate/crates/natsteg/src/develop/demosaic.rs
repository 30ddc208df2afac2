//! Bilinear demosaicing. Recorded photo-site values pass through unchanged;
//! missing channels are averages of the nearest same-channel neighbors in
//! the 8-neighborhood (2 or 4 of them depending on position and channel).

use crate::error::{Error, Result};
use crate::plan::CfaPattern;
use crate::raster::Raster16;

/// Demosaics one continuous-valued mosaic field into three full-resolution
/// channel fields. The interpolation is the same stencil the integer path
/// uses, so cover and noise fields can be demosaiced separately and summed.
pub fn demosaic_bilinear_f64(
    mosaic: &[f64],
    width: usize,
    height: usize,
    cfa: CfaPattern,
) -> [Vec<f64>; 3] {
    let mut out = [
        vec![0.0; width * height],
        vec![0.0; width * height],
        vec![0.0; width * height],
    ];
    for y in 0..height {
        for x in 0..width {
            let idx = y * width + x;
            let recorded = cfa.channel_at(y, x);
            for (ch, plane) in out.iter_mut().enumerate() {
                if ch == recorded {
                    plane[idx] = mosaic[idx];
                } else {
                    let mut sum = 0.0;
                    let mut count = 0usize;
                    for dy in -1i64..=1 {
                        for dx in -1i64..=1 {
                            if dy == 0 && dx == 0 {
                                continue;
                            }
                            let ny = y as i64 + dy;
                            let nx = x as i64 + dx;
                            if ny < 0 || nx < 0 || ny >= height as i64 || nx >= width as i64 {
                                continue;
                            }
                            if cfa.channel_at(ny as usize, nx as usize) == ch {
                                sum += mosaic[ny as usize * width + nx as usize];
                                count += 1;
                            }
                        }
                    }
                    plane[idx] = if count > 0 { sum / count as f64 } else { 0.0 };
                }
            }
        }
    }
    out
}

/// Demosaics a Bayer mosaic into a 3-channel raster. Interpolated values are
/// rounded to the nearest integer; recorded values are bit-exact.
pub fn demosaic_bilinear(mosaic: &Raster16, cfa: CfaPattern) -> Result<Raster16> {
    if mosaic.channels != 1 {
        return Err(Error::InvalidArgument("mosaic must be single channel".into()));
    }
    if mosaic.width % 2 != 0 || mosaic.height % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "mosaic dimensions must be even, got {}x{}",
            mosaic.width, mosaic.height
        )));
    }
    let field: Vec<f64> = mosaic.samples.iter().map(|&v| v as f64).collect();
    let planes = demosaic_bilinear_f64(&field, mosaic.width, mosaic.height, cfa);
    let max = mosaic.max_value() as f64;
    let mut out = Raster16::new(mosaic.width, mosaic.height, 3, mosaic.bit_depth)?;
    for idx in 0..mosaic.pixel_count() {
        for ch in 0..3 {
            out.samples[idx * 3 + ch] = planes[ch][idx].round().clamp(0.0, max) as u16;
        }
    }
    Ok(out)
}
