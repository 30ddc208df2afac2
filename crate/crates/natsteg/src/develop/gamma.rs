//! Gamma-corrected embedding. The gamma curve is an affine transform of the
//! stego signal to first order, so the signal after correction is Gaussian
//! with variance `alpha^2 * sigma_S^2`, with
//! `alpha = (x/y_max)^(1/gamma - 1) / gamma`.

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::raster::Raster16;
use crate::stego::{cell_probs_into, default_k_max, simulate_embedding, ChangeProbMap, StegoParams};

/// Forward gamma curve on the input scale: `y_max (x/y_max)^(1/gamma)`.
/// `gamma = 1` is the exact identity.
pub fn gamma_forward(x: f64, gamma: f64, y_max: f64) -> f64 {
    if gamma == 1.0 {
        x
    } else {
        y_max * (x / y_max).powf(1.0 / gamma)
    }
}

/// First-order gain of the gamma curve at cover value `x`.
pub fn gamma_alpha(x: f64, gamma: f64, y_max: f64) -> f64 {
    if gamma == 1.0 {
        1.0
    } else {
        (x / y_max).powf(1.0 / gamma - 1.0) / gamma
    }
}

/// Change probabilities when the developing step is gamma correction
/// followed by 8-bit quantization. Wet rules apply on the gamma-domain
/// 8-bit code.
pub fn gamma_probs(
    cover: &Raster16,
    params: &StegoParams,
    gamma: f64,
    k_max: Option<usize>,
) -> Result<ChangeProbMap> {
    if cover.channels != 1 {
        return Err(Error::InvalidArgument(
            "gamma_probs expects a single-channel raster".into(),
        ));
    }
    if cover.bit_depth != params.bit_depth_in {
        return Err(Error::InvalidArgument(
            "cover bit depth does not match params".into(),
        ));
    }
    if !(gamma > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "gamma must be positive, got {gamma}"
        )));
    }
    let y_max = cover.max_value() as f64;
    let delta = params.delta();
    let n = cover.pixel_count();

    // Per pixel: gamma-domain center, code, and scaled standard deviation.
    let mut centers = vec![0.0f64; n];
    let mut sigmas = vec![0.0f64; n];
    let mut codes = vec![0i64; n];
    for idx in 0..n {
        let x = cover.samples[idx] as f64;
        let g = gamma_forward(x, gamma, y_max).clamp(0.0, y_max);
        let alpha = gamma_alpha(x, gamma, y_max);
        centers[idx] = g;
        sigmas[idx] = if alpha.is_finite() {
            alpha * params.sigma2(x).sqrt()
        } else {
            f64::NAN // wetted below
        };
        codes[idx] = params.quantize(g);
    }
    let min_code = *codes.iter().min().unwrap_or(&0);
    let wet: Vec<bool> = (0..n)
        .map(|idx| {
            codes[idx] <= 0
                || codes[idx] >= 255
                || (params.wet_dark && codes[idx] == min_code)
                || !(sigmas[idx] > 0.0)
        })
        .collect();

    let sigma_max = sigmas
        .iter()
        .zip(wet.iter())
        .filter(|(s, &w)| !w && s.is_finite())
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
                cell_probs_into(out, centers[idx], codes[idx], sigmas[idx], delta, k_max);
            }
        });

    Ok(ChangeProbMap {
        width: cover.width,
        height: cover.height,
        k_max,
        probs,
        wet,
        codes: codes.iter().map(|&c| c.clamp(0, 255) as u8).collect(),
    })
}

/// Samples the gamma-domain embedding: 8-bit stego code is the gamma-domain
/// cover code plus the drawn symbol.
pub fn gamma_embed(
    cover: &Raster16,
    params: &StegoParams,
    gamma: f64,
    seed: u64,
    k_max: Option<usize>,
) -> Result<(Raster16, Vec<i64>)> {
    let map = gamma_probs(cover, params, gamma, k_max)?;
    simulate_embedding(cover, &map, seed)
}
