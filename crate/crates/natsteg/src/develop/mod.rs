//! Propagation of the stego-signal model through developing stages: gamma
//! correction, bilinear demosaicing, color transform, sub/box/tent
//! downsampling and up-sampling. Each stage produces stage-correct change
//! probabilities and, where applicable, sampled developed stego images.

mod color;
mod demosaic;
mod downsample;
mod gamma;
mod sampling;
mod tent;

pub use color::{decode_color_payload, embed_color_mosaic, ColorEmbedResult};
pub use demosaic::{demosaic_bilinear, demosaic_bilinear_f64};
pub use downsample::{
    downsample_box_embed, downsample_box_probs, downsample_sub, upsample_probs, upsample_raster,
};
pub use gamma::{gamma_alpha, gamma_embed, gamma_forward, gamma_probs};
pub use tent::{downsample_tent_embed, tent_kernel, TentEmbedResult};

use crate::error::{Error, Result};
use crate::plan::{DevelopPlan, DownsampleKind, StageSpec};
use crate::raster::Raster16;
use crate::stego::{
    change_probs, payload_entropy, simulate_embedding, ChangeProbMap, StegoParams,
};

/// Result of executing a developing plan with embedding.
#[derive(Debug, Clone)]
pub struct PlanOutput {
    pub stego: Raster16,
    /// Change-probability map on the developed grid, when the plan has one
    /// (the tent schedule has four conditional maps instead).
    pub probs: Option<ChangeProbMap>,
    pub payload_bits: f64,
    pub bits_per_pixel: f64,
}

/// Computes the payload carried by `cover` under `plan` without producing a
/// stego image. The tent schedule is sequential, so its realized payload
/// still needs a seed.
pub fn plan_payload(
    cover: &Raster16,
    params: &StegoParams,
    plan: &DevelopPlan,
    seed: u64,
    k_max: Option<usize>,
) -> Result<(f64, f64)> {
    let out = plan_embed(cover, params, plan, seed, k_max)?;
    Ok((out.payload_bits, out.bits_per_pixel))
}

/// Executes a developing plan end to end: computes the stage-correct change
/// probabilities, samples the embedding, and develops the stego image.
pub fn plan_embed(
    cover: &Raster16,
    params: &StegoParams,
    plan: &DevelopPlan,
    seed: u64,
    k_max: Option<usize>,
) -> Result<PlanOutput> {
    // The trailing 8-bit quantization is implied by every embedding path.
    let stages: Vec<&StageSpec> = plan
        .stages
        .iter()
        .filter(|s| !matches!(s, StageSpec::Quantize8))
        .collect();

    match stages.as_slice() {
        [] => {
            let map = change_probs(cover, params, k_max)?;
            let (bits, bpp) = payload_entropy(&map);
            let (stego, _) = simulate_embedding(cover, &map, seed)?;
            Ok(PlanOutput {
                stego,
                probs: Some(map),
                payload_bits: bits,
                bits_per_pixel: bpp,
            })
        }
        [StageSpec::Gamma { gamma }] => {
            let map = gamma_probs(cover, params, *gamma, k_max)?;
            let (bits, bpp) = payload_entropy(&map);
            let (stego, _) = gamma_embed(cover, params, *gamma, seed, k_max)?;
            Ok(PlanOutput {
                stego,
                probs: Some(map),
                payload_bits: bits,
                bits_per_pixel: bpp,
            })
        }
        [StageSpec::Demosaic { cfa }] => {
            // Demosaicing alone: the color transform is the identity.
            let res = embed_color_mosaic(cover, params, &[[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]], *cfa, seed, k_max)?;
            let bpp = res.payload_bits / res.developed.pixel_count() as f64;
            Ok(PlanOutput {
                stego: res.developed,
                probs: None,
                payload_bits: res.payload_bits,
                bits_per_pixel: bpp,
            })
        }
        [StageSpec::Demosaic { cfa }, StageSpec::ColorMatrix { c }] => {
            let res = embed_color_mosaic(cover, params, c, *cfa, seed, k_max)?;
            let bpp = res.payload_bits / res.developed.pixel_count() as f64;
            Ok(PlanOutput {
                stego: res.developed,
                probs: None,
                payload_bits: res.payload_bits,
                bits_per_pixel: bpp,
            })
        }
        [StageSpec::Downsample { kind, factor }] => match kind {
            DownsampleKind::Sub => {
                let small = downsample_sub(cover, *factor)?;
                let map = change_probs(&small, params, k_max)?;
                let (bits, bpp) = payload_entropy(&map);
                let (stego, _) = simulate_embedding(&small, &map, seed)?;
                Ok(PlanOutput {
                    stego,
                    probs: Some(map),
                    payload_bits: bits,
                    bits_per_pixel: bpp,
                })
            }
            DownsampleKind::Box => {
                let (stego, map) = downsample_box_embed(cover, params, *factor, seed, k_max)?;
                let (bits, bpp) = payload_entropy(&map);
                Ok(PlanOutput {
                    stego,
                    probs: Some(map),
                    payload_bits: bits,
                    bits_per_pixel: bpp,
                })
            }
            DownsampleKind::Tent => {
                let res = downsample_tent_embed(cover, params, *factor, seed, k_max)?;
                let bpp = res.payload_bits / res.stego.pixel_count() as f64;
                Ok(PlanOutput {
                    stego: res.stego,
                    probs: None,
                    payload_bits: res.payload_bits,
                    bits_per_pixel: bpp,
                })
            }
        },
        [StageSpec::Upsample { factor }] => {
            let map = change_probs(cover, params, k_max)?;
            let up_map = upsample_probs(&map, *factor);
            let (bits, _) = payload_entropy(&up_map);
            let (stego_small, _) = simulate_embedding(cover, &map, seed)?;
            let stego = upsample_raster(&stego_small, *factor)?;
            let bpp = bits / stego.pixel_count() as f64;
            Ok(PlanOutput {
                stego,
                probs: Some(up_map),
                payload_bits: bits,
                bits_per_pixel: bpp,
            })
        }
        other => Err(Error::InvalidArgument(format!(
            "unsupported stage combination ({} stages before quantize8)",
            other.len()
        ))),
    }
}
