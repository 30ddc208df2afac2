//! Statistical verification harness: flat-field stack synthesis, source-model
//! recovery checks on stego output, and payload analytics across developing
//! plans.

use std::fmt::Write as _;

use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;

use crate::develop::plan_payload;
use crate::error::{Error, Result};
use crate::noise::{bin_photosites, fit_noise_model, NoiseModel};
use crate::plan::DevelopPlan;
use crate::raster::Raster16;
use crate::rng::{substream, Stage};
use crate::stego::StegoParams;

/// Outcome of re-estimating the noise model on a stego stack and comparing
/// it to the model it was supposed to acquire.
#[derive(Debug, Clone)]
pub struct MimicryReport {
    pub recovered: NoiseModel,
    pub target: NoiseModel,
    pub rel_err_a: f64,
    pub rel_err_b: f64,
    pub bins_used: usize,
    pub tol_a: f64,
    pub tol_b: f64,
    pub pass: bool,
}

impl MimicryReport {
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "recovered_a={:.15e}", self.recovered.a);
        let _ = writeln!(s, "recovered_b={:.15e}", self.recovered.b);
        let _ = writeln!(s, "target_a={:.15e}", self.target.a);
        let _ = writeln!(s, "target_b={:.15e}", self.target.b);
        let _ = writeln!(s, "rel_err_a={:.6}", self.rel_err_a);
        let _ = writeln!(s, "rel_err_b={:.6}", self.rel_err_b);
        let _ = writeln!(s, "bins_used={}", self.bins_used);
        let _ = writeln!(s, "tol_a={}", self.tol_a);
        let _ = writeln!(s, "tol_b={}", self.tol_b);
        let _ = writeln!(s, "verdict={}", if self.pass { "pass" } else { "fail" });
        s
    }
}

/// Synthesizes `n` registered flat-field frames: each photo-site of each
/// frame is an independent draw from N(mu, (a * mu/y_max + b) * y_max^2),
/// rounded to the nearest integer and clamped to the sample range. `a` and
/// `b` are on the normalized [0, 1] intensity scale; `a = b = 0` reproduces
/// `mu_field` exactly.
pub fn synth_flat_stack(
    mu_field: &Raster16,
    a: f64,
    b: f64,
    n: usize,
    seed: u64,
) -> Result<Vec<Raster16>> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!(
            "stack needs at least 2 frames, got {n}"
        )));
    }
    if mu_field.channels != 1 {
        return Err(Error::InvalidArgument("expected a single-channel field".into()));
    }
    let y_max = mu_field.max_value() as f64;
    let (w, h) = (mu_field.width, mu_field.height);

    // Per-site standard deviation on the integer scale.
    let mut sigmas = vec![0.0f64; w * h];
    for (s, &mu) in sigmas.iter_mut().zip(mu_field.samples.iter()) {
        let var = (a * mu as f64 / y_max + b) * y_max * y_max;
        if var < 0.0 {
            return Err(Error::ModelViolation(format!(
                "negative variance {var} at intensity {mu}"
            )));
        }
        *s = var.sqrt();
    }

    let mut frames = Vec::with_capacity(n);
    for frame in 0..n {
        let mut samples = vec![0u16; w * h];
        samples
            .par_chunks_mut(w)
            .enumerate()
            .for_each(|(row, out)| {
                for (col, v) in out.iter_mut().enumerate() {
                    let idx = row * w + col;
                    let mu = mu_field.samples[idx] as f64;
                    let z: f64 = substream(seed, row, col, Stage::Synth(frame as u32))
                        .sample(StandardNormal);
                    *v = (mu + sigmas[idx] * z).round().clamp(0.0, y_max) as u16;
                }
            });
        frames.push(Raster16::from_samples(w, h, 1, mu_field.bit_depth, samples)?);
    }
    Ok(frames)
}

/// Re-estimates the noise model on `stego_stack` and compares it against
/// `target`. `cover_stack` fixes the expected geometry; `delta` is the
/// intensity bin width on the normalized scale.
pub fn mimicry_check(
    cover_stack: &[Raster16],
    stego_stack: &[Raster16],
    target: &NoiseModel,
    delta: f64,
    tol_a: f64,
    tol_b: f64,
) -> Result<MimicryReport> {
    if cover_stack.is_empty() || stego_stack.is_empty() {
        return Err(Error::InvalidArgument("empty stack".into()));
    }
    let (w, h) = (cover_stack[0].width, cover_stack[0].height);
    for f in stego_stack {
        if f.width != w || f.height != h {
            return Err(Error::InvalidArgument(
                "cover and stego stacks are not registered".into(),
            ));
        }
    }
    let bins = bin_photosites(stego_stack, delta)?;
    let recovered = fit_noise_model(&bins, format!("recovered-vs-{}", target.iso_label))?;
    let rel_err_a = (recovered.a - target.a).abs() / target.a;
    let rel_err_b = if target.b > 0.0 {
        (recovered.b - target.b).abs() / target.b
    } else {
        recovered.b.abs()
    };
    let pass = rel_err_a <= tol_a && rel_err_b <= tol_b;
    Ok(MimicryReport {
        recovered,
        target: target.clone(),
        rel_err_a,
        rel_err_b,
        bins_used: bins.len(),
        tol_a,
        tol_b,
        pass,
    })
}

/// Embedding-rate summary for one developing plan over a set of covers.
#[derive(Debug, Clone)]
pub struct PayloadReport {
    pub plan: String,
    pub per_image_bpp: Vec<f64>,
    pub mean_bpp: f64,
    pub min_bpp: f64,
    pub max_bpp: f64,
}

impl PayloadReport {
    /// Equal-width histogram of the per-image rates over [min, max].
    pub fn histogram(&self, bins: usize) -> Vec<usize> {
        let n = bins.max(1);
        let mut counts = vec![0usize; n];
        let span = self.max_bpp - self.min_bpp;
        for &v in &self.per_image_bpp {
            let i = if span > 0.0 {
                (((v - self.min_bpp) / span) * n as f64) as usize
            } else {
                0
            };
            counts[i.min(n - 1)] += 1;
        }
        counts
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "plan={}", self.plan.replace('\n', "; "));
        let _ = writeln!(s, "images={}", self.per_image_bpp.len());
        let _ = writeln!(s, "mean_bpp={:.6}", self.mean_bpp);
        let _ = writeln!(s, "min_bpp={:.6}", self.min_bpp);
        let _ = writeln!(s, "max_bpp={:.6}", self.max_bpp);
        s
    }
}

/// Computes the embedding rate of each plan on each cover. Plans whose
/// payload is realized sequentially still consume `seed`.
pub fn payload_sweep(
    covers: &[Raster16],
    params: &StegoParams,
    plans: &[DevelopPlan],
    seed: u64,
) -> Result<Vec<PayloadReport>> {
    if covers.is_empty() {
        return Err(Error::InvalidArgument("no cover images".into()));
    }
    let mut reports = Vec::with_capacity(plans.len());
    for plan in plans {
        let mut rates = Vec::with_capacity(covers.len());
        for cover in covers {
            let (_, bpp) = plan_payload(cover, params, plan, seed, None)?;
            rates.push(bpp);
        }
        let mean = rates.iter().sum::<f64>() / rates.len() as f64;
        let min = rates.iter().cloned().fold(f64::INFINITY, f64::min);
        let max = rates.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        reports.push(PayloadReport {
            plan: plan.to_text(),
            per_image_bpp: rates,
            mean_bpp: mean,
            min_bpp: min,
            max_bpp: max,
        });
    }
    Ok(reports)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn flat_stack_matches_generator_variance() {
        let mu = Raster16::from_samples(512, 512, 1, 16, vec![32768; 512 * 512]).unwrap();
        let frames = synth_flat_stack(&mu, 8e-5, 1e-6, 4, 42).unwrap();
        let y_max = 65535.0;
        let expect = (8e-5 * 0.5 + 1e-6) * y_max * y_max;
        for f in &frames {
            let mean: f64 =
                f.samples.iter().map(|&v| v as f64).sum::<f64>() / f.samples.len() as f64;
            let var: f64 = f
                .samples
                .iter()
                .map(|&v| (v as f64 - mean).powi(2))
                .sum::<f64>()
                / (f.samples.len() - 1) as f64;
            assert!(
                (var - expect).abs() / expect < 0.01,
                "variance {var} vs {expect}"
            );
        }
    }

    #[test]
    fn zero_noise_reproduces_field() {
        let mu = Raster16::from_samples(8, 8, 1, 16, (0..64).map(|i| i * 100).collect()).unwrap();
        let frames = synth_flat_stack(&mu, 0.0, 0.0, 2, 1).unwrap();
        assert!(frames.iter().all(|f| *f == mu));
    }

    #[test]
    fn different_seeds_differ_but_match_moments() {
        let mu = Raster16::from_samples(256, 256, 1, 16, vec![30000; 65536]).unwrap();
        let a = synth_flat_stack(&mu, 8e-5, 1e-6, 2, 1).unwrap();
        let b = synth_flat_stack(&mu, 8e-5, 1e-6, 2, 2).unwrap();
        assert_ne!(a[0], b[0]);
        let mean = |f: &Raster16| {
            f.samples.iter().map(|&v| v as f64).sum::<f64>() / f.samples.len() as f64
        };
        assert!((mean(&a[0]) - mean(&b[0])).abs() < 5.0);
    }

    #[test]
    fn single_frame_rejected() {
        let mu = Raster16::from_samples(4, 4, 1, 16, vec![100; 16]).unwrap();
        assert!(synth_flat_stack(&mu, 1e-5, 0.0, 1, 0).is_err());
    }

    #[test]
    fn null_embedding_passes_against_own_model() {
        // Cover stack checked against its own generator: small errors, pass;
        // against a different slope: fail. Flat levels sit on bin centers
        // and the bin width dwarfs the across-stack mean's standard error,
        // so binning by the noisy mean does not leak between levels.
        let delta = 1.0f64 / 64.0;
        let step = (65535.0 * delta).round() as usize; // 1024
        let mut samples = vec![0u16; 256 * 256];
        for (i, s) in samples.iter_mut().enumerate() {
            *s = ((8 + 3 * (i % 16)) * step) as u16;
        }
        let mu = Raster16::from_samples(256, 256, 1, 16, samples).unwrap();
        let stack = synth_flat_stack(&mu, 8.36e-5, 1.11e-6, 20, 9).unwrap();
        let own = NoiseModel::new(8.36e-5, 1.11e-6, "iso1").unwrap();
        let rep = mimicry_check(&stack, &stack, &own, delta, 0.02, 0.5).unwrap();
        assert!(rep.pass, "err_a={} err_b={}", rep.rel_err_a, rep.rel_err_b);
        let other = NoiseModel::new(10.46e-5, 1.95e-6, "iso2").unwrap();
        let rep2 = mimicry_check(&stack, &stack, &other, delta, 0.02, 0.5).unwrap();
        assert!(!rep2.pass);
    }

    #[test]
    fn sweep_reports_per_plan() {
        let samples: Vec<u16> = (0..4096).map(|i| 15000 + (i * 13 % 30000) as u16).collect();
        let cover = Raster16::from_samples(64, 64, 1, 16, samples).unwrap();
        let p = StegoParams::from_normalized(2.1e-5, 8.4e-7, 16).unwrap();
        let plans = vec![
            DevelopPlan::parse("quantize8").unwrap(),
            DevelopPlan::parse("downsample box 2; quantize8").unwrap(),
        ];
        let reps = payload_sweep(&[cover], &p, &plans, 3).unwrap();
        assert_eq!(reps.len(), 2);
        assert!(reps[0].mean_bpp > 0.0);
        assert!(reps[0].min_bpp <= reps[0].mean_bpp && reps[0].mean_bpp <= reps[0].max_bpp);
        let h = reps[0].histogram(4);
        assert_eq!(h.iter().sum::<usize>(), 1);
    }
}
