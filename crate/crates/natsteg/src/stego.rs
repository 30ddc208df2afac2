//! Q-ary embedding-change probabilities for the basic (quantization-only)
//! pipeline, entropy payload, cost conversion for external trellis coders,
//! wet-pixel handling and seeded embedding simulation.
//!
//! The stego signal added to a photo-site with value `x` is Gaussian with
//! variance `a''x + b''`; after quantization to 8 bits with step `delta`
//! the probability of landing `k` cells away from the cover code is the
//! Gaussian measure of the corresponding quantization cell.

use rand::Rng;
use rayon::prelude::*;
use statrs::function::erf;

use crate::error::{Error, Result};
use crate::raster::Raster16;
use crate::rng::{substream, Stage};

/// Standard normal CDF.
#[inline]
pub(crate) fn normal_cdf(z: f64) -> f64 {
    0.5 * erf::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal quantile, used for inverse-CDF sampling of truncated
/// Gaussians.
#[inline]
pub(crate) fn normal_quantile(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf::erf_inv(2.0 * p - 1.0)
}

/// Difference-model parameters on the output scale.
///
/// `a_dd`/`b_dd` are the normalized slope/intercept multiplied by
/// `2^bit_depth - 1` and its square, so `sigma2(x)` can be evaluated
/// directly on sample values.
#[derive(Debug, Clone, PartialEq)]
pub struct StegoParams {
    pub a_dd: f64,
    pub b_dd: f64,
    pub bit_depth_in: u8,
    pub quant_step: u32,
    pub perturbation: bool,
    pub wet_dark: bool,
}

impl StegoParams {
    pub fn from_normalized(a_prime: f64, b_prime: f64, bit_depth: u8) -> Result<Self> {
        if bit_depth != 8 && bit_depth != 16 {
            return Err(Error::InvalidArgument(format!(
                "bit depth must be 8 or 16, got {bit_depth}"
            )));
        }
        let scale = ((1u64 << bit_depth) - 1) as f64;
        Self::from_scaled(a_prime * scale, b_prime * scale * scale, bit_depth)
    }

    pub fn from_scaled(a_dd: f64, b_dd: f64, bit_depth: u8) -> Result<Self> {
        if bit_depth != 8 && bit_depth != 16 {
            return Err(Error::InvalidArgument(format!(
                "bit depth must be 8 or 16, got {bit_depth}"
            )));
        }
        if a_dd < 0.0 || b_dd < 0.0 {
            return Err(Error::ModelViolation(format!(
                "stego variance coefficients must be nonnegative, got ({a_dd:.3e}, {b_dd:.3e})"
            )));
        }
        Ok(StegoParams {
            a_dd,
            b_dd,
            bit_depth_in: bit_depth,
            quant_step: 1 << (bit_depth - 8),
            perturbation: false,
            wet_dark: false,
        })
    }

    /// Cover-source perturbation variant: shaped slope, zero intercept, no
    /// target source.
    pub fn perturbation(a_prime: f64, bit_depth: u8) -> Result<Self> {
        if !(a_prime > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "perturbation slope must be > 0, got {a_prime}"
            )));
        }
        let mut p = Self::from_normalized(a_prime, 0.0, bit_depth)?;
        p.perturbation = true;
        Ok(p)
    }

    /// Stego-signal variance at input-scale sample value `x`.
    pub fn sigma2(&self, x: f64) -> f64 {
        self.a_dd * x + self.b_dd
    }

    pub fn delta(&self) -> f64 {
        self.quant_step as f64
    }

    /// 8-bit code of an input-scale value: round to nearest, ties to even.
    pub fn quantize(&self, x: f64) -> i64 {
        (x / self.delta()).round_ties_even() as i64
    }

    pub fn to_text(&self) -> String {
        format!(
            "a_dd={:e}\nb_dd={:e}\nbit_depth_in={}\nperturbation={}\nwet_dark={}\n",
            self.a_dd, self.b_dd, self.bit_depth_in, self.perturbation, self.wet_dark
        )
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut a_dd = None;
        let mut b_dd = None;
        let mut bit_depth = None;
        let mut perturbation = false;
        let mut wet_dark = false;
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad params line {line:?}")))?;
            let value = value.trim();
            match key.trim() {
                "a_dd" => a_dd = Some(parse_f64(value)?),
                "b_dd" => b_dd = Some(parse_f64(value)?),
                "bit_depth_in" => {
                    bit_depth = Some(value.parse::<u8>().map_err(|_| {
                        Error::Format(format!("bad bit depth {value:?}"))
                    })?)
                }
                "perturbation" => perturbation = parse_bool(value)?,
                "wet_dark" => wet_dark = parse_bool(value)?,
                other => return Err(Error::Format(format!("unknown params key {other:?}"))),
            }
        }
        let mut p = Self::from_scaled(
            a_dd.ok_or_else(|| Error::Format("params file missing a_dd=".into()))?,
            b_dd.ok_or_else(|| Error::Format("params file missing b_dd=".into()))?,
            bit_depth.ok_or_else(|| Error::Format("params file missing bit_depth_in=".into()))?,
        )?;
        p.perturbation = perturbation;
        p.wet_dark = wet_dark;
        Ok(p)
    }

    pub fn save(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<std::path::Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.parse()
        .map_err(|_| Error::Format(format!("bad float {s:?}")))
}

fn parse_bool(s: &str) -> Result<bool> {
    match s {
        "true" | "1" => Ok(true),
        "false" | "0" => Ok(false),
        _ => Err(Error::Format(format!("bad bool {s:?}"))),
    }
}

/// Per-pixel discrete change distribution over `k in [-K, K]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeProbMap {
    pub width: usize,
    pub height: usize,
    pub k_max: usize,
    /// `(2*k_max + 1)` probabilities per pixel, row-major.
    pub probs: Vec<f64>,
    pub wet: Vec<bool>,
    /// 8-bit cover code the distribution is centered on.
    pub codes: Vec<u8>,
}

impl ChangeProbMap {
    pub fn support(&self) -> usize {
        2 * self.k_max + 1
    }

    pub fn pixel_probs(&self, idx: usize) -> &[f64] {
        let s = self.support();
        &self.probs[idx * s..(idx + 1) * s]
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    /// Entropy (bits) of one pixel's distribution.
    pub fn pixel_entropy(&self, idx: usize) -> f64 {
        entropy_bits(self.pixel_probs(idx))
    }
}

pub(crate) fn entropy_bits(probs: &[f64]) -> f64 {
    probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum()
}

/// Gaussian cell probabilities for a distribution with mean `mean` (input
/// scale) quantized around code `code` with step `delta`; tail mass beyond
/// `+-k_max` is folded into the extreme bins. Writes `2*k_max+1` values.
pub(crate) fn cell_probs_into(
    out: &mut [f64],
    mean: f64,
    code: i64,
    sigma: f64,
    delta: f64,
    k_max: usize,
) {
    debug_assert_eq!(out.len(), 2 * k_max + 1);
    if sigma <= 0.0 {
        out.fill(0.0);
        out[k_max] = 1.0;
        return;
    }
    let k_max = k_max as i64;
    // CDF at the lower boundary of cell k, then difference along the support.
    let mut lower_cdf = 0.0f64; // boundary below k = -K folds into the first bin
    for k in -k_max..=k_max {
        let idx = (k + k_max) as usize;
        let upper_cdf = if k == k_max {
            1.0
        } else {
            let u_next = (code as f64 + k as f64 + 0.5) * delta;
            normal_cdf((u_next - mean) / sigma)
        };
        out[idx] = (upper_cdf - lower_cdf).max(0.0);
        lower_cdf = upper_cdf;
    }
}

/// Default support bound: six standard deviations of the widest non-wet
/// pixel, in units of the quantization step.
pub fn default_k_max(sigma_max: f64, delta: f64) -> usize {
    ((6.0 * sigma_max / delta).ceil() as usize + 1).max(1)
}

/// Computes per-pixel change probabilities for the quantization-only
/// pipeline. Saturated codes (0 and full scale) are wet; with `wet_dark`,
/// pixels at the image's minimum code are wet as well. `k_max = None`
/// selects the support automatically.
pub fn change_probs(
    cover: &Raster16,
    params: &StegoParams,
    k_max: Option<usize>,
) -> Result<ChangeProbMap> {
    if cover.channels != 1 {
        return Err(Error::InvalidArgument(
            "change_probs expects a single-channel raster".into(),
        ));
    }
    if cover.bit_depth != params.bit_depth_in {
        return Err(Error::InvalidArgument(format!(
            "cover bit depth {} does not match params bit depth {}",
            cover.bit_depth, params.bit_depth_in
        )));
    }
    let delta = params.delta();
    let n = cover.pixel_count();

    let codes: Vec<i64> = cover.samples.iter().map(|&x| params.quantize(x as f64)).collect();
    let min_code = *codes.iter().min().unwrap_or(&0);
    let wet: Vec<bool> = codes
        .iter()
        .zip(cover.samples.iter())
        .map(|(&c, &x)| {
            c <= 0 || c >= 255 || (params.wet_dark && c == min_code) || params.sigma2(x as f64) <= 0.0
        })
        .collect();

    let sigma_max = cover
        .samples
        .iter()
        .zip(wet.iter())
        .filter(|(_, &w)| !w)
        .map(|(&x, _)| params.sigma2(x as f64))
        .fold(0.0f64, f64::max)
        .sqrt();
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
                let x = cover.samples[idx] as f64;
                let sigma = params.sigma2(x).sqrt();
                cell_probs_into(out, x, codes[idx], sigma, delta, k_max);
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

/// Total payload entropy in bits and the per-pixel average (bpp). The bpp
/// denominator is the full pixel count, wet pixels included.
pub fn payload_entropy(map: &ChangeProbMap) -> (f64, f64) {
    let support = map.support();
    let bits: f64 = map
        .probs
        .chunks_exact(support)
        .map(|p| entropy_bits(p))
        .sum();
    (bits, bits / map.pixel_count() as f64)
}

/// Per-pixel additive costs for an external trellis coder; wet pixels carry
/// an infinite sentinel.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMap {
    pub width: usize,
    pub height: usize,
    pub rho: Vec<f64>,
}

/// Binary collapse of the change distribution through the flipping lemma:
/// `rho = ln(pi~ / (1 - pi~))` with `pi~ = max(pi_change, 1 - pi_change)`.
pub fn probs_to_costs(map: &ChangeProbMap) -> CostMap {
    let support = map.support();
    let rho = map
        .probs
        .chunks_exact(support)
        .zip(map.wet.iter())
        .map(|(p, &wet)| {
            if wet {
                return f64::INFINITY;
            }
            let p_change = (1.0 - p[map.k_max]).clamp(0.0, 1.0);
            let p_tilde = p_change.max(1.0 - p_change);
            if p_tilde >= 1.0 {
                f64::INFINITY
            } else {
                (p_tilde / (1.0 - p_tilde)).ln()
            }
        })
        .collect();
    CostMap {
        width: map.width,
        height: map.height,
        rho,
    }
}

/// Draws one symbol from a pixel's change distribution using the uniform
/// draw `u` in [0, 1).
pub(crate) fn draw_symbol(probs: &[f64], k_max: usize, u: f64) -> i64 {
    let mut acc = 0.0;
    for (idx, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return idx as i64 - k_max as i64;
        }
    }
    // Rounding left u above the accumulated mass: take the last bin.
    probs.len() as i64 - 1 - k_max as i64
}

/// Samples the embedding: the stego image is the 8-bit cover code plus the
/// drawn symbol at every pixel. Deterministic for a given seed.
pub fn simulate_embedding(
    cover: &Raster16,
    map: &ChangeProbMap,
    seed: u64,
) -> Result<(Raster16, Vec<i64>)> {
    if cover.width != map.width || cover.height != map.height {
        return Err(Error::InvalidArgument(
            "probability map does not match cover dimensions".into(),
        ));
    }
    let support = map.support();
    let width = map.width;
    let mut drawn = vec![0i64; map.pixel_count()];
    drawn.par_iter_mut().enumerate().for_each(|(idx, k)| {
        if !map.wet[idx] {
            let (row, col) = (idx / width, idx % width);
            let u: f64 = substream(seed, row, col, Stage::Embed).gen();
            *k = draw_symbol(&map.probs[idx * support..(idx + 1) * support], map.k_max, u);
        }
    });
    let samples: Vec<u16> = map
        .codes
        .iter()
        .zip(drawn.iter())
        .map(|(&c, &k)| (c as i64 + k).clamp(0, 255) as u16)
        .collect();
    let stego = Raster16::from_samples(map.width, map.height, 1, 8, samples)?;
    Ok((stego, drawn))
}

/// Raw-domain embedding: adds the continuous stego signal to every
/// photo-site and rounds back to the input scale. This is the cover-source
/// switch itself, before any developing; it is what the mimicry harness
/// re-estimates.
pub fn embed_raw(cover: &Raster16, params: &StegoParams, seed: u64) -> Result<Raster16> {
    if cover.channels != 1 {
        return Err(Error::InvalidArgument(
            "embed_raw expects a single-channel raster".into(),
        ));
    }
    if cover.bit_depth != params.bit_depth_in {
        return Err(Error::InvalidArgument(
            "cover bit depth does not match params".into(),
        ));
    }
    let max = cover.max_value() as f64;
    let width = cover.width;
    let mut samples = vec![0u16; cover.samples.len()];
    samples.par_iter_mut().enumerate().for_each(|(idx, out)| {
        let x = cover.samples[idx] as f64;
        let sigma = params.sigma2(x).sqrt();
        let (row, col) = (idx / width, idx % width);
        let z: f64 = substream(seed, row, col, Stage::RawNoise)
            .sample(rand_distr::StandardNormal);
        *out = (x + sigma * z).round().clamp(0.0, max) as u16;
    });
    Raster16::from_samples(cover.width, cover.height, 1, cover.bit_depth, samples)
}

// --- binary interchange containers -------------------------------------

const PROB_MAGIC: &[u8; 4] = b"NSPM";
const COST_MAGIC: &[u8; 4] = b"NSCM";

impl ChangeProbMap {
    /// Flat binary layout: magic, u32 width/height/k_max (LE), one wet byte
    /// and one code byte per pixel, then all probabilities as LE f64.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(16 + 2 * self.pixel_count() + 8 * self.probs.len());
        out.extend_from_slice(PROB_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        out.extend_from_slice(&(self.k_max as u32).to_le_bytes());
        out.extend(self.wet.iter().map(|&w| w as u8));
        out.extend_from_slice(&self.codes);
        for &p in &self.probs {
            out.extend_from_slice(&p.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let (width, height, rest) = parse_container_header(data, PROB_MAGIC, "probability map")?;
        let k_max = u32::from_le_bytes(rest[..4].try_into().unwrap()) as usize;
        let rest = &rest[4..];
        let n = width * height;
        let support = 2 * k_max + 1;
        let need = 2 * n + 8 * n * support;
        if rest.len() != need {
            return Err(Error::Format(format!(
                "probability map payload is {} bytes, expected {need}",
                rest.len()
            )));
        }
        let wet: Vec<bool> = rest[..n].iter().map(|&b| b != 0).collect();
        let codes = rest[n..2 * n].to_vec();
        let probs: Vec<f64> = rest[2 * n..]
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(ChangeProbMap {
            width,
            height,
            k_max,
            probs,
            wet,
            codes,
        })
    }
}

impl CostMap {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(12 + 8 * self.rho.len());
        out.extend_from_slice(COST_MAGIC);
        out.extend_from_slice(&(self.width as u32).to_le_bytes());
        out.extend_from_slice(&(self.height as u32).to_le_bytes());
        for &r in &self.rho {
            out.extend_from_slice(&r.to_le_bytes());
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self> {
        let (width, height, rest) = parse_container_header(data, COST_MAGIC, "cost map")?;
        if rest.len() != 8 * width * height {
            return Err(Error::Format("cost map payload size mismatch".into()));
        }
        let rho = rest
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(CostMap { width, height, rho })
    }
}

fn parse_container_header<'a>(
    data: &'a [u8],
    magic: &[u8; 4],
    what: &str,
) -> Result<(usize, usize, &'a [u8])> {
    if data.len() < 12 || &data[..4] != magic {
        return Err(Error::Format(format!("not a {what} container")));
    }
    let width = u32::from_le_bytes(data[4..8].try_into().unwrap()) as usize;
    let height = u32::from_le_bytes(data[8..12].try_into().unwrap()) as usize;
    Ok((width, height, &data[12..]))
}
