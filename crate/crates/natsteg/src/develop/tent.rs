//! Tent (triangle) downsampling with sequential four-lattice embedding.
//!
//! Developed pixels are split into four disjoint lattices by the parity of
//! their grid coordinates. Lattice 1 pixels have disjoint kernel footprints
//! and embed unconditionally; later lattices condition on the photo-site
//! stego values already committed by their neighbors, so the joint law of
//! the photo-site noise stays i.i.d. Gaussian while embedding decisions
//! remain synchronized with the developed-pixel quantization cells.

use rand::Rng;
use rand_distr::StandardNormal;

use super::sampling::{truncated_normal_icdf, REJECTION_CAP};
use crate::error::{Error, Result};
use crate::raster::Raster16;
use crate::rng::{substream, Stage};
use crate::stego::{cell_probs_into, default_k_max, draw_symbol, entropy_bits, StegoParams};

/// 1D triangle taps for factor `c`: length `2c-1`, sums to 1. The 2D kernel
/// is the separable product; for c = 2 this is [1,2,1;2,4,2;1,2,1]/16.
pub fn tent_kernel(c: usize) -> Vec<f64> {
    let c_f = c as f64;
    (0..2 * c - 1)
        .map(|i| {
            let off = i as i64 - (c as i64 - 1);
            (c_f - off.abs() as f64) / (c_f * c_f)
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct TentEmbedResult {
    /// Developed 8-bit stego raster on the c-fold smaller grid.
    pub stego: Raster16,
    /// Drawn symbol per developed pixel (0 on wet pixels).
    pub drawn: Vec<i64>,
    pub wet: Vec<bool>,
    /// Realized conditional entropy summed over all carrier pixels.
    pub payload_bits: f64,
    /// Payload split per lattice step, with the pixel counts that carried it.
    pub lattice_bits: [f64; 4],
    pub lattice_carriers: [usize; 4],
    /// Continuous developed stego signal (kernel-weighted committed noise),
    /// for distribution diagnostics.
    pub developed_noise: Vec<f64>,
    pub fallback_count: usize,
    pub k_max: usize,
}

fn reflect(i: i64, n: usize) -> usize {
    let n = n as i64;
    let mut i = i;
    if i < 0 {
        i = -i;
    }
    if i >= n {
        i = 2 * n - 2 - i;
    }
    i.clamp(0, n - 1) as usize
}

/// Sequential four-step tent embedding for integer factor `c`. Kernel
/// footprints that cross the image border are wetted and carry no payload;
/// their photo-sites still receive unconditional noise so the developed
/// field stays model-consistent.
pub fn downsample_tent_embed(
    cover: &Raster16,
    params: &StegoParams,
    c: usize,
    seed: u64,
    k_max: Option<usize>,
) -> Result<TentEmbedResult> {
    if cover.channels != 1 {
        return Err(Error::InvalidArgument("expected a single-channel raster".into()));
    }
    if cover.bit_depth != params.bit_depth_in {
        return Err(Error::InvalidArgument(
            "cover bit depth does not match params".into(),
        ));
    }
    if c == 0 {
        return Err(Error::InvalidArgument("factor must be >= 1".into()));
    }
    if cover.width % c != 0 || cover.height % c != 0 {
        return Err(Error::InvalidArgument(format!(
            "dimensions {}x{} not divisible by factor {c}",
            cover.width, cover.height
        )));
    }
    let (w, h) = (cover.width, cover.height);
    let out_w = w / c;
    let out_h = h / c;
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument("image smaller than factor".into()));
    }
    let taps = tent_kernel(c);
    let rad = c as i64 - 1;
    let delta = params.delta();

    let sigma2_site: Vec<f64> = cover.samples.iter().map(|&x| params.sigma2(x as f64)).collect();

    // Developed cover values (reflected padding at the border).
    let mut x_bar = vec![0.0f64; out_w * out_h];
    for rd in 0..out_h {
        for cd in 0..out_w {
            let (cy, cx) = ((rd * c) as i64, (cd * c) as i64);
            let mut sum = 0.0;
            for dy in -rad..=rad {
                let ty = taps[(dy + rad) as usize];
                let sy = reflect(cy + dy, h);
                for dx in -rad..=rad {
                    let tx = taps[(dx + rad) as usize];
                    let sx = reflect(cx + dx, w);
                    sum += ty * tx * cover.samples[sy * w + sx] as f64;
                }
            }
            x_bar[rd * out_w + cd] = sum;
        }
    }
    let codes0: Vec<i64> = x_bar.iter().map(|&v| params.quantize(v)).collect();
    let min_code = *codes0.iter().min().unwrap();

    // Support bound from the unconditional (lattice 1) variance.
    let k_max = k_max.unwrap_or_else(|| {
        let tap_sq: f64 = taps.iter().map(|t| t * t).sum();
        let sigma_max2 = sigma2_site.iter().cloned().fold(0.0f64, f64::max);
        default_k_max((tap_sq * tap_sq * sigma_max2).sqrt(), delta)
    });
    let support = 2 * k_max + 1;

    let mut noise = vec![0.0f64; w * h];
    let mut committed = vec![false; w * h];
    let mut drawn = vec![0i64; out_w * out_h];
    let mut wet = vec![false; out_w * out_h];
    let mut final_code = vec![0i64; out_w * out_h];
    let mut lattice_bits = [0.0f64; 4];
    let mut lattice_carriers = [0usize; 4];
    let mut fallback_count = 0usize;
    let mut cell = vec![0.0f64; support];

    const PARITIES: [(usize, usize); 4] = [(0, 0), (0, 1), (1, 0), (1, 1)];
    for (step, &(pr, pc)) in PARITIES.iter().enumerate() {
        for rd in (pr..out_h).step_by(2) {
            for cd in (pc..out_w).step_by(2) {
                let dev_idx = rd * out_w + cd;
                let (cy, cx) = ((rd * c) as i64, (cd * c) as i64);
                let mut rng = substream(seed, rd, cd, Stage::TentLattice(step as u8));

                let mut border = false;
                let mut mu_cond = 0.0f64;
                let mut sigma_cond2 = 0.0f64;
                // (site index, tap, site sigma) of the not-yet-committed part
                let mut free: Vec<(usize, f64, f64)> = Vec::new();
                for dy in -rad..=rad {
                    for dx in -rad..=rad {
                        let (sy, sx) = (cy + dy, cx + dx);
                        if sy < 0 || sx < 0 || sy >= h as i64 || sx >= w as i64 {
                            border = true;
                            continue;
                        }
                        let site = sy as usize * w + sx as usize;
                        let tap = taps[(dy + rad) as usize] * taps[(dx + rad) as usize];
                        if committed[site] {
                            mu_cond += tap * noise[site];
                        } else {
                            sigma_cond2 += tap * tap * sigma2_site[site];
                            free.push((site, tap, sigma2_site[site].sqrt()));
                        }
                    }
                }

                let center = x_bar[dev_idx] + mu_cond;
                let code = params.quantize(center);
                let is_wet = border
                    || code <= 0
                    || code >= 255
                    || (params.wet_dark && codes0[dev_idx] == min_code)
                    || !(sigma_cond2 > 0.0);

                if is_wet {
                    wet[dev_idx] = true;
                    for &(site, _, sd) in &free {
                        let z: f64 = rng.sample(StandardNormal);
                        noise[site] = sd * z;
                        committed[site] = true;
                    }
                    final_code[dev_idx] = code;
                    continue;
                }

                let sigma_cond = sigma_cond2.sqrt();
                cell_probs_into(&mut cell, center, code, sigma_cond, delta, k_max);
                let u: f64 = rng.gen();
                let k = draw_symbol(&cell, k_max, u);
                drawn[dev_idx] = k;
                final_code[dev_idx] = code + k;
                lattice_bits[step] += entropy_bits(&cell);
                lattice_carriers[step] += 1;

                // Cell bounds for the weighted sum T of the free sites;
                // folded tail bins extend to infinity.
                let lo = if k == -(k_max as i64) {
                    f64::NEG_INFINITY
                } else {
                    (code as f64 + k as f64 - 0.5) * delta - center
                };
                let hi = if k == k_max as i64 {
                    f64::INFINITY
                } else {
                    (code as f64 + k as f64 + 0.5) * delta - center
                };

                let mut accepted = false;
                let mut draws = vec![0.0f64; free.len()];
                for _ in 0..REJECTION_CAP {
                    let mut t = 0.0;
                    for (d, &(_, tap, sd)) in draws.iter_mut().zip(free.iter()) {
                        let z: f64 = rng.sample(StandardNormal);
                        *d = sd * z;
                        t += tap * *d;
                    }
                    if t >= lo && t < hi {
                        accepted = true;
                        break;
                    }
                }
                if !accepted {
                    // Exact conditional decomposition given the truncated sum.
                    fallback_count += 1;
                    let t_star = truncated_normal_icdf(&mut rng, sigma_cond, lo, hi);
                    let mut z_sum = 0.0;
                    for (d, &(_, tap, sd)) in draws.iter_mut().zip(free.iter()) {
                        let z: f64 = rng.sample(StandardNormal);
                        *d = sd * z;
                        z_sum += tap * *d;
                    }
                    for (d, &(_, tap, sd)) in draws.iter_mut().zip(free.iter()) {
                        *d += tap * sd * sd / sigma_cond2 * (t_star - z_sum);
                    }
                }
                for (&(site, _, _), &d) in free.iter().zip(draws.iter()) {
                    noise[site] = d;
                    committed[site] = true;
                }
            }
        }
    }

    // Continuous developed stego signal, and final codes for wet pixels
    // whose footprints were only fully committed later.
    let mut developed_noise = vec![0.0f64; out_w * out_h];
    for rd in 0..out_h {
        for cd in 0..out_w {
            let (cy, cx) = ((rd * c) as i64, (cd * c) as i64);
            let mut sum = 0.0;
            for dy in -rad..=rad {
                let ty = taps[(dy + rad) as usize];
                let sy = reflect(cy + dy, h);
                for dx in -rad..=rad {
                    let tx = taps[(dx + rad) as usize];
                    let sx = reflect(cx + dx, w);
                    sum += ty * tx * noise[sy * w + sx];
                }
            }
            let dev_idx = rd * out_w + cd;
            developed_noise[dev_idx] = sum;
            if wet[dev_idx] {
                final_code[dev_idx] = params.quantize(x_bar[dev_idx] + sum);
            }
        }
    }

    let samples: Vec<u16> = final_code.iter().map(|&v| v.clamp(0, 255) as u16).collect();
    let stego = Raster16::from_samples(out_w, out_h, 1, 8, samples)?;
    Ok(TentEmbedResult {
        stego,
        drawn,
        wet,
        payload_bits: lattice_bits.iter().sum(),
        lattice_bits,
        lattice_carriers,
        developed_noise,
        fallback_count,
        k_max,
    })
}
