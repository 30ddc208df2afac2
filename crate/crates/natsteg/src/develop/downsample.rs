//! Sub-sampling, box downsampling and integer up-sampling.
//!
//! Box downsampling averages disjoint c x c blocks, so the stego-signal
//! variance on the developed grid is `(a''x_bar + b'') / c^2` and the noise
//! stays independent across developed pixels.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::Raster16;
use crate::stego::{cell_probs_into, default_k_max, ChangeProbMap, StegoParams};
use crate::rng::{substream, Stage};
use rand::Rng;

/// Keeps every c-th sample per row and column, starting at (0, 0).
pub fn downsample_sub(cover: &Raster16, c: usize) -> Result<Raster16> {
    if c == 0 {
        return Err(Error::InvalidArgument("factor must be >= 1".into()));
    }
    if cover.channels != 1 {
        return Err(Error::InvalidArgument("expected a single-channel raster".into()));
    }
    let out_w = (cover.width + c - 1) / c;
    let out_h = (cover.height + c - 1) / c;
    let mut samples = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        for x in 0..out_w {
            samples.push(cover.get(x * c, y * c, 0));
        }
    }
    Raster16::from_samples(out_w, out_h, 1, cover.bit_depth, samples)
}

/// Block means of the cover on the c-fold smaller grid, as continuous
/// values on the input scale.
fn block_means(cover: &Raster16, c: usize) -> Result<(Vec<f64>, usize, usize)> {
    if c == 0 {
        return Err(Error::InvalidArgument("factor must be >= 1".into()));
    }
    if cover.channels != 1 {
        return Err(Error::InvalidArgument("expected a single-channel raster".into()));
    }
    if cover.width % c != 0 || cover.height % c != 0 {
        return Err(Error::InvalidArgument(format!(
            "dimensions {}x{} not divisible by factor {c}",
            cover.width, cover.height
        )));
    }
    let out_w = cover.width / c;
    let out_h = cover.height / c;
    let mut means = vec![0.0f64; out_w * out_h];
    for y in 0..out_h {
        for x in 0..out_w {
            let mut sum = 0.0;
            for by in 0..c {
                for bx in 0..c {
                    sum += cover.get(x * c + bx, y * c + by, 0) as f64;
                }
            }
            means[y * out_w + x] = sum / (c * c) as f64;
        }
    }
    Ok((means, out_w, out_h))
}

/// Change probabilities on the box-downsampled grid: developed cover is the
/// block mean, stego variance is `sigma_S^2(x_bar) / c^2`.
pub fn downsample_box_probs(
    cover: &Raster16,
    params: &StegoParams,
    c: usize,
    k_max: Option<usize>,
) -> Result<ChangeProbMap> {
    if cover.bit_depth != params.bit_depth_in {
        return Err(Error::InvalidArgument(
            "cover bit depth does not match params".into(),
        ));
    }
    let (means, out_w, out_h) = block_means(cover, c)?;
    let delta = params.delta();
    let c2 = (c * c) as f64;
    let n = out_w * out_h;

    let codes: Vec<i64> = means.iter().map(|&m| params.quantize(m)).collect();
    let sigmas: Vec<f64> = means.iter().map(|&m| (params.sigma2(m) / c2).sqrt()).collect();
    let min_code = *codes.iter().min().unwrap_or(&0);
    let wet: Vec<bool> = (0..n)
        .map(|i| {
            codes[i] <= 0
                || codes[i] >= 255
                || (params.wet_dark && codes[i] == min_code)
                || !(sigmas[i] > 0.0)
        })
        .collect();

    let sigma_max = sigmas
        .iter()
        .zip(wet.iter())
        .filter(|(_, &w)| !w)
        .map(|(&s, _)| s)
        .fold(0.0f64, f64::max);
    let k_max = k_max.unwrap_or_else(|| default_k_max(sigma_max, delta));
    let support = 2 * k_max + 1;

    let mut probs = vec![0.0f64; n * support];
    probs
        .par_chunks_mut(support)
        .enumerate()
        .for_each(|(idx, out)| {
            if wet[idx] {
                out[k_max] = 1.0;
            } else {
                cell_probs_into(out, means[idx], codes[idx], sigmas[idx], delta, k_max);
            }
        });

    Ok(ChangeProbMap {
        width: out_w,
        height: out_h,
        k_max,
        probs,
        wet,
        codes: codes.iter().map(|&v| v.clamp(0, 255) as u8).collect(),
    })
}

/// Samples the box-downsampled embedding. Returns the 8-bit developed stego
/// raster and the probability map used.
pub fn downsample_box_embed(
    cover: &Raster16,
    params: &StegoParams,
    c: usize,
    seed: u64,
    k_max: Option<usize>,
) -> Result<(Raster16, ChangeProbMap)> {
    let map = downsample_box_probs(cover, params, c, k_max)?;
    let support = map.support();
    let mut samples = vec![0u16; map.pixel_count()];
    for idx in 0..map.pixel_count() {
        let k = if map.wet[idx] {
            0
        } else {
            let (row, col) = (idx / map.width, idx % map.width);
            let u: f64 = substream(seed, row, col, Stage::Embed).gen();
            crate::stego::draw_symbol(&map.probs[idx * support..(idx + 1) * support], map.k_max, u)
        };
        samples[idx] = (map.codes[idx] as i64 + k).clamp(0, 255) as u16;
    }
    let stego = Raster16::from_samples(map.width, map.height, 1, 8, samples)?;
    Ok((stego, map))
}

/// Nearest-duplication up-sampling by an integer factor.
pub fn upsample_raster(r: &Raster16, c: usize) -> Result<Raster16> {
    if c == 0 {
        return Err(Error::InvalidArgument("factor must be >= 1".into()));
    }
    let out_w = r.width * c;
    let out_h = r.height * c;
    let mut out = Raster16::new(out_w, out_h, r.channels, r.bit_depth)?;
    for y in 0..out_h {
        for x in 0..out_w {
            for ch in 0..r.channels {
                out.set(x, y, ch, r.get(x / c, y / c, ch));
            }
        }
    }
    Ok(out)
}

/// Probability map on the up-sampled grid: original positions keep their
/// distribution, interpolated positions are flagged non-carrier (wet).
pub fn upsample_probs(map: &ChangeProbMap, c: usize) -> ChangeProbMap {
    let out_w = map.width * c;
    let out_h = map.height * c;
    let support = map.support();
    let mut probs = vec![0.0f64; out_w * out_h * support];
    let mut wet = vec![true; out_w * out_h];
    let mut codes = vec![0u8; out_w * out_h];
    for y in 0..out_h {
        for x in 0..out_w {
            let dst = y * out_w + x;
            let src = (y / c) * map.width + (x / c);
            codes[dst] = map.codes[src];
            if y % c == 0 && x % c == 0 {
                wet[dst] = map.wet[src];
                probs[dst * support..(dst + 1) * support]
                    .copy_from_slice(map.pixel_probs(src));
            } else {
                probs[dst * support + map.k_max] = 1.0;
            }
        }
    }
    ChangeProbMap {
        width: out_w,
        height: out_h,
        k_max: map.k_max,
        probs,
        wet,
        codes,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::stego::{change_probs, payload_entropy};

    fn params() -> StegoParams {
        StegoParams::from_normalized(2.1e-5, 8.4e-7, 16).unwrap()
    }

    #[test]
    fn sub_identity_and_positions() {
        let r = Raster16::from_samples(4, 4, 1, 16, (0..16).collect()).unwrap();
        assert_eq!(downsample_sub(&r, 1).unwrap(), r);
        let s = downsample_sub(&r, 2).unwrap();
        assert_eq!(s.width, 2);
        assert_eq!(s.samples, vec![0, 2, 8, 10]);
    }

    #[test]
    fn box_factor_one_equals_basic() {
        let samples: Vec<u16> = (0..64).map(|i| 500 + 1000 * i as u16).collect();
        let cover = Raster16::from_samples(8, 8, 1, 16, samples).unwrap();
        let p = params();
        let basic = change_probs(&cover, &p, Some(6)).unwrap();
        let boxed = downsample_box_probs(&cover, &p, 1, Some(6)).unwrap();
        assert_eq!(basic, boxed);
    }

    #[test]
    fn box_variance_uses_block_mean_over_c2() {
        let cover = Raster16::from_samples(2, 2, 1, 16, vec![30000, 30100, 29900, 30000]).unwrap();
        let p = params();
        let map = downsample_box_probs(&cover, &p, 2, Some(5)).unwrap();
        assert_eq!(map.width, 1);
        // mean is 30000; the distribution must match a direct cell
        // computation at sigma/2
        let mean = 30000.0;
        let sigma = (p.sigma2(mean) / 4.0).sqrt();
        let mut expect = vec![0.0; 11];
        crate::stego::cell_probs_into(&mut expect, mean, p.quantize(mean), sigma, 256.0, 5);
        for (a, b) in map.pixel_probs(0).iter().zip(expect.iter()) {
            assert!((a - b).abs() < 1e-14);
        }
    }

    #[test]
    fn box_requires_divisible_dims() {
        let cover = Raster16::from_samples(3, 3, 1, 16, vec![0; 9]).unwrap();
        assert!(downsample_box_probs(&cover, &params(), 2, None).is_err());
    }

    #[test]
    fn upsample_preserves_payload() {
        let samples: Vec<u16> = (0..16).map(|i| 20000 + 900 * i as u16).collect();
        let cover = Raster16::from_samples(4, 4, 1, 16, samples).unwrap();
        let map = change_probs(&cover, &params(), None).unwrap();
        let up = upsample_probs(&map, 2);
        let (bits, _) = payload_entropy(&map);
        let (up_bits, _) = payload_entropy(&up);
        assert!((bits - up_bits).abs() < 1e-9);
        // interpolated positions flagged non-carrier
        assert!(up.wet[1]);
        assert_eq!(up.wet[0], map.wet[0]);
    }

    #[test]
    fn upsample_raster_duplicates() {
        let r = Raster16::from_samples(2, 1, 1, 8, vec![3, 9]).unwrap();
        let up = upsample_raster(&r, 2).unwrap();
        assert_eq!(up.samples, vec![3, 3, 9, 9, 3, 3, 9, 9]);
    }
}
