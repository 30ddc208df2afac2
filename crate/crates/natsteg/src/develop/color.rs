//! Embedding through demosaicing and a 3x3 color transform.
//!
//! Red and blue photo-sites receive unconditional stego noise. Each green
//! photo-site is a carrier: the output channel with the largest green
//! coefficient is quantization-synchronized there, conditioning on the
//! realized red/blue noise that bilinear interpolation mixes in. Because
//! the red/blue draws are keyed by position and seed, a receiver holding
//! the cover and the key reproduces them and reads the symbols back.

use rand::Rng;
use rand_distr::StandardNormal;

use super::demosaic::demosaic_bilinear_f64;
use super::sampling::truncated_normal;
use crate::error::{Error, Result};
use crate::plan::CfaPattern;
use crate::raster::Raster16;
use crate::rng::{substream, Stage};
use crate::stego::{cell_probs_into, default_k_max, draw_symbol, entropy_bits, StegoParams};

/// Green-column coefficients below this magnitude make the transform
/// payload-free: no output channel responds to green noise.
const MIN_GREEN_GAIN: f64 = 1e-6;

#[derive(Debug, Clone)]
pub struct ColorEmbedResult {
    /// Developed 3-channel 8-bit stego image.
    pub developed: Raster16,
    /// Drawn symbol per green photo-site, raster order (0 on wet sites).
    pub drawn: Vec<i64>,
    /// Mosaic index of each entry of `drawn` / `wet`.
    pub green_index: Vec<usize>,
    pub wet: Vec<bool>,
    /// Output channel carrying the payload (largest |green coefficient|).
    pub selected_channel: usize,
    pub payload_bits: f64,
    pub k_max: usize,
}

fn pick_channel(matrix: &[[f64; 3]; 3]) -> Option<usize> {
    let mut best = 0usize;
    for i in 1..3 {
        if matrix[i][1].abs() > matrix[best][1].abs() {
            best = i;
        }
    }
    if matrix[best][1].abs() < MIN_GREEN_GAIN {
        None
    } else {
        Some(best)
    }
}

struct GreenSite {
    idx: usize,
    /// Deterministic developed value of the selected channel: color-matrixed
    /// demosaiced cover plus the interpolated red/blue noise contribution.
    mu_out: f64,
    /// Gain of this site's own noise into the selected channel.
    gain: f64,
    sigma_g: f64,
    code: i64,
}

/// Shared deterministic part of embed and decode: red/blue noise draws, the
/// demosaiced cover and noise fields, and the per-green-site conditional
/// centers. Returns (green sites, red/blue noise field, cover planes).
#[allow(clippy::type_complexity)]
fn prepare(
    cover: &Raster16,
    params: &StegoParams,
    matrix: &[[f64; 3]; 3],
    cfa: CfaPattern,
    seed: u64,
) -> Result<(Vec<GreenSite>, Vec<f64>, [Vec<f64>; 3], usize)> {
    if cover.channels != 1 {
        return Err(Error::InvalidArgument("expected a single-channel mosaic".into()));
    }
    if cover.bit_depth != params.bit_depth_in {
        return Err(Error::InvalidArgument(
            "cover bit depth does not match params".into(),
        ));
    }
    if cover.width % 2 != 0 || cover.height % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "mosaic dimensions must be even, got {}x{}",
            cover.width, cover.height
        )));
    }
    let selected = pick_channel(matrix).ok_or_else(|| {
        Error::InvalidArgument("color matrix has no green response above threshold".into())
    })?;
    let (w, h) = (cover.width, cover.height);

    // Unconditional noise at red and blue photo-sites, keyed by position.
    let mut rb_noise = vec![0.0f64; w * h];
    for y in 0..h {
        for x in 0..w {
            if cfa.channel_at(y, x) != 1 {
                let sd = params.sigma2(cover.get(x, y, 0) as f64).sqrt();
                let z: f64 = substream(seed, y, x, Stage::ColorRedBlue).sample(StandardNormal);
                rb_noise[y * w + x] = sd * z;
            }
        }
    }

    let cover_f: Vec<f64> = cover.samples.iter().map(|&v| v as f64).collect();
    let cover_planes = demosaic_bilinear_f64(&cover_f, w, h, cfa);
    let noise_planes = demosaic_bilinear_f64(&rb_noise, w, h, cfa);

    let row = &matrix[selected];
    let mut sites = Vec::with_capacity(w * h / 2);
    for y in 0..h {
        for x in 0..w {
            if cfa.channel_at(y, x) != 1 {
                continue;
            }
            let idx = y * w + x;
            let mut mu = 0.0;
            for j in 0..3 {
                mu += row[j] * (cover_planes[j][idx] + noise_planes[j][idx]);
            }
            let sigma_g = params.sigma2(cover.samples[idx] as f64).sqrt();
            sites.push(GreenSite {
                idx,
                mu_out: mu,
                gain: row[1],
                sigma_g,
                code: params.quantize(mu),
            });
        }
    }
    Ok((sites, rb_noise, cover_planes, selected))
}

fn wet_flags(sites: &[GreenSite], params: &StegoParams) -> Vec<bool> {
    let min_code = sites.iter().map(|s| s.code).min().unwrap_or(0);
    sites
        .iter()
        .map(|s| {
            s.code <= 0
                || s.code >= 255
                || !(s.gain.abs() * s.sigma_g > 0.0)
                || (params.wet_dark && s.code == min_code)
        })
        .collect()
}

/// Embeds through demosaicing plus `matrix` and develops the 8-bit color
/// stego image. The payload lives on the green photo-sites.
pub fn embed_color_mosaic(
    cover: &Raster16,
    params: &StegoParams,
    matrix: &[[f64; 3]; 3],
    cfa: CfaPattern,
    seed: u64,
    k_max: Option<usize>,
) -> Result<ColorEmbedResult> {
    let (sites, mut noise, _cover_planes, selected) =
        prepare(cover, params, matrix, cfa, seed)?;
    let (w, h) = (cover.width, cover.height);
    let delta = params.delta();
    let wet = wet_flags(&sites, params);

    let sigma_eff_max = sites
        .iter()
        .zip(wet.iter())
        .filter(|(_, &wt)| !wt)
        .map(|(s, _)| s.gain.abs() * s.sigma_g)
        .fold(0.0f64, f64::max);
    let k_max = k_max.unwrap_or_else(|| default_k_max(sigma_eff_max, delta));
    let support = 2 * k_max + 1;

    let mut drawn = vec![0i64; sites.len()];
    let mut payload_bits = 0.0;
    let mut cell = vec![0.0f64; support];
    // Selected-channel codes pinned at green sites so quantization-cell
    // boundaries cannot flip under float re-association.
    let mut pinned: Vec<Option<i64>> = vec![None; w * h];

    for (i, site) in sites.iter().enumerate() {
        let (y, x) = (site.idx / w, site.idx % w);
        let mut rng = substream(seed, y, x, Stage::LatentCell);
        if wet[i] {
            let z: f64 = rng.sample(StandardNormal);
            noise[site.idx] = site.sigma_g * z;
            continue;
        }
        let sigma_eff = site.gain.abs() * site.sigma_g;
        cell_probs_into(&mut cell, site.mu_out, site.code, sigma_eff, delta, k_max);
        let u: f64 = rng.gen();
        let k = draw_symbol(&cell, k_max, u);
        drawn[i] = k;
        payload_bits += entropy_bits(&cell);

        let lo = if k == -(k_max as i64) {
            f64::NEG_INFINITY
        } else {
            (site.code as f64 + k as f64 - 0.5) * delta - site.mu_out
        };
        let hi = if k == k_max as i64 {
            f64::INFINITY
        } else {
            (site.code as f64 + k as f64 + 0.5) * delta - site.mu_out
        };
        let (t, _) = truncated_normal(&mut rng, sigma_eff, lo, hi);
        noise[site.idx] = t / site.gain;
        pinned[site.idx] = Some(site.code + k);
    }

    // Develop the full stego mosaic: cover + noise, demosaic, color matrix,
    // 8-bit quantization; pinned codes take precedence on their channel.
    let stego_field: Vec<f64> = cover
        .samples
        .iter()
        .zip(noise.iter())
        .map(|(&c, &n)| c as f64 + n)
        .collect();
    let planes = demosaic_bilinear_f64(&stego_field, w, h, cfa);
    let mut developed = Raster16::new(w, h, 3, 8)?;
    for idx in 0..w * h {
        for ch in 0..3 {
            let code = if ch == selected {
                pinned[idx]
            } else {
                None
            }
            .unwrap_or_else(|| {
                let mut v = 0.0;
                for j in 0..3 {
                    v += matrix[ch][j] * planes[j][idx];
                }
                params.quantize(v)
            });
            developed.samples[idx * 3 + ch] = code.clamp(0, 255) as u16;
        }
    }

    Ok(ColorEmbedResult {
        developed,
        drawn,
        green_index: sites.iter().map(|s| s.idx).collect(),
        wet,
        selected_channel: selected,
        payload_bits,
        k_max,
    })
}

/// Recovers the drawn symbols from a developed color stego image, given the
/// cover mosaic and the embedding key. Wet sites decode as 0.
pub fn decode_color_payload(
    cover: &Raster16,
    params: &StegoParams,
    matrix: &[[f64; 3]; 3],
    cfa: CfaPattern,
    seed: u64,
    developed: &Raster16,
) -> Result<Vec<i64>> {
    let (sites, _, _, selected) = prepare(cover, params, matrix, cfa, seed)?;
    if developed.channels != 3
        || developed.width != cover.width
        || developed.height != cover.height
    {
        return Err(Error::InvalidArgument(
            "developed image does not match the cover geometry".into(),
        ));
    }
    let wet = wet_flags(&sites, params);
    Ok(sites
        .iter()
        .zip(wet.iter())
        .map(|(site, &wt)| {
            if wt {
                0
            } else {
                developed.samples[site.idx * 3 + selected] as i64 - site.code
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;

    const IDENTITY: [[f64; 3]; 3] = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];
    // A plausible camera matrix: rows sum to 1, green dominates row 1.
    const MIX: [[f64; 3]; 3] = [
        [0.8, 0.3, -0.1],
        [-0.1, 0.9, 0.2],
        [0.05, 0.15, 0.8],
    ];

    fn params() -> StegoParams {
        StegoParams::from_normalized(2.1e-5, 8.4e-7, 16).unwrap()
    }

    fn cover() -> Raster16 {
        let samples: Vec<u16> = (0..1024).map(|i| 22000 + (i * 61 % 17000) as u16).collect();
        Raster16::from_samples(32, 32, 1, 16, samples).unwrap()
    }

    #[test]
    fn identity_matrix_selects_green() {
        let res = embed_color_mosaic(&cover(), &params(), &IDENTITY, CfaPattern::Rggb, 7, None)
            .unwrap();
        assert_eq!(res.selected_channel, 1);
        assert_eq!(res.green_index.len(), 512);
        assert!(res.payload_bits > 0.0);
    }

    #[test]
    fn no_green_response_is_an_error() {
        let m = [[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 1.0]];
        assert!(embed_color_mosaic(&cover(), &params(), &m, CfaPattern::Rggb, 1, None).is_err());
    }

    #[test]
    fn decode_recovers_drawn_symbols() {
        for (matrix, seed) in [(IDENTITY, 3u64), (MIX, 19u64)] {
            let c = cover();
            let p = params();
            let res =
                embed_color_mosaic(&c, &p, &matrix, CfaPattern::Rggb, seed, None).unwrap();
            let decoded =
                decode_color_payload(&c, &p, &matrix, CfaPattern::Rggb, seed, &res.developed)
                    .unwrap();
            assert_eq!(decoded, res.drawn);
        }
    }

    #[test]
    fn embedding_is_deterministic() {
        let c = cover();
        let p = params();
        let a = embed_color_mosaic(&c, &p, &MIX, CfaPattern::Bggr, 5, None).unwrap();
        let b = embed_color_mosaic(&c, &p, &MIX, CfaPattern::Bggr, 5, None).unwrap();
        assert_eq!(a.developed, b.developed);
        assert_eq!(a.drawn, b.drawn);
    }

    #[test]
    fn saturated_cover_is_all_wet() {
        let c = Raster16::from_samples(8, 8, 1, 16, vec![65535; 64]).unwrap();
        let res =
            embed_color_mosaic(&c, &params(), &IDENTITY, CfaPattern::Rggb, 2, None).unwrap();
        assert!(res.wet.iter().all(|&w| w));
        assert_eq!(res.payload_bits, 0.0);
        assert!(res.drawn.iter().all(|&k| k == 0));
    }

    #[test]
    fn non_green_symbols_leave_other_sites_model_drawn() {
        // Red/blue sites carry no payload but still receive noise: the
        // developed image differs from the noiseless development.
        let c = cover();
        let p = params();
        let res = embed_color_mosaic(&c, &p, &IDENTITY, CfaPattern::Rggb, 4, None).unwrap();
        let mut diffs = 0usize;
        for y in 0..32 {
            for x in 0..32 {
                if CfaPattern::Rggb.channel_at(y, x) == 0 {
                    let dev = res.developed.get(x, y, 0) as i64;
                    let cov = p.quantize(c.get(x, y, 0) as f64);
                    if dev != cov {
                        diffs += 1;
                    }
                }
            }
        }
        assert!(diffs > 10, "red sites unchanged: {diffs}");
    }
}
