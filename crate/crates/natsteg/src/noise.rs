//! Heteroscedastic sensor-noise model: estimation from a stack of registered
//! flat captures, population-weighted linear regression, and the difference
//! model used to switch between two ISO sources.
//!
//! The variance of the sensor noise is linear in the normalized photo-site
//! expectation, `sigma^2(mu) = a*mu + b`, with `(a, b)` on the normalized
//! [0,1] intensity scale.

use std::fmt::Write as _;
use std::path::Path;

use crate::error::{Error, Result};
use crate::raster::Raster16;
use crate::stego::StegoParams;

/// Per-ISO noise model on normalized intensity.
#[derive(Debug, Clone, PartialEq)]
pub struct NoiseModel {
    pub a: f64,
    pub b: f64,
    pub iso_label: String,
}

impl NoiseModel {
    pub fn new(a: f64, b: f64, iso_label: impl Into<String>) -> Result<Self> {
        if !(a > 0.0) {
            return Err(Error::ModelViolation(format!("slope a must be > 0, got {a}")));
        }
        if !(b >= 0.0) {
            return Err(Error::ModelViolation(format!(
                "intercept b must be >= 0, got {b}"
            )));
        }
        Ok(NoiseModel {
            a,
            b,
            iso_label: iso_label.into(),
        })
    }

    /// Noise variance at normalized intensity `mu`.
    pub fn variance(&self, mu: f64) -> f64 {
        self.a * mu + self.b
    }

    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "a={:e}", self.a);
        let _ = writeln!(s, "b={:e}", self.b);
        let _ = writeln!(s, "iso={}", self.iso_label);
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut a = None;
        let mut b = None;
        let mut iso = String::new();
        for line in text.lines() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| Error::Format(format!("bad model line {line:?}")))?;
            match key.trim() {
                "a" => a = Some(parse_f64(value)?),
                "b" => b = Some(parse_f64(value)?),
                "iso" => iso = value.trim().to_string(),
                other => return Err(Error::Format(format!("unknown model key {other:?}"))),
            }
        }
        let a = a.ok_or_else(|| Error::Format("model file missing a=".into()))?;
        let b = b.ok_or_else(|| Error::Format("model file missing b=".into()))?;
        NoiseModel::new(a, b, iso)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

fn parse_f64(s: &str) -> Result<f64> {
    s.trim()
        .parse()
        .map_err(|_| Error::Format(format!("bad float {s:?}")))
}

/// Statistics of one intensity bin of photo-sites.
#[derive(Debug, Clone, PartialEq)]
pub struct BinStats {
    pub bin_index: i64,
    pub mean: f64,
    pub variance: f64,
    pub population: usize,
}

/// Rounding used for the bin index: half away from zero.
fn bin_index(eta: f64, delta: f64) -> i64 {
    (eta / delta).round() as i64
}

/// Assigns each photo-site location to an intensity bin by its across-stack
/// mean, then pools all samples of all frames per bin. Locations where any
/// frame is clipped (0 or full scale) are excluded; bins with fewer than two
/// samples are dropped.
pub fn bin_photosites(stack: &[Raster16], delta: f64) -> Result<Vec<BinStats>> {
    if stack.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least 2 frames, got {}",
            stack.len()
        )));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "bin width must be in (0,1), got {delta}"
        )));
    }
    let first = &stack[0];
    if first.channels != 1 {
        return Err(Error::InvalidArgument("stack must be single channel".into()));
    }
    for r in stack {
        if r.width != first.width
            || r.height != first.height
            || r.channels != first.channels
            || r.bit_depth != first.bit_depth
        {
            return Err(Error::InvalidArgument(
                "all stack frames must share dimensions and bit depth".into(),
            ));
        }
    }
    let y_max = first.max_value() as f64;
    let n_frames = stack.len();
    let n_sites = first.pixel_count();

    use std::collections::BTreeMap;
    struct Acc {
        count: usize,
        sum: f64,
        sum_sq: f64,
    }
    let mut bins: BTreeMap<i64, Acc> = BTreeMap::new();

    'site: for idx in 0..n_sites {
        let mut sum = 0.0f64;
        for frame in stack {
            let v = frame.samples[idx];
            if v == 0 || v == first.max_value() {
                continue 'site; // clipping breaks the Gaussian model
            }
            sum += v as f64 / y_max;
        }
        let eta = sum / n_frames as f64;
        let acc = bins.entry(bin_index(eta, delta)).or_insert(Acc {
            count: 0,
            sum: 0.0,
            sum_sq: 0.0,
        });
        for frame in stack {
            let v = frame.samples[idx] as f64 / y_max;
            acc.count += 1;
            acc.sum += v;
            acc.sum_sq += v * v;
        }
    }

    Ok(bins
        .into_iter()
        .filter(|(_, acc)| acc.count >= 2)
        .map(|(index, acc)| {
            let n = acc.count as f64;
            let mean = acc.sum / n;
            let variance = (acc.sum_sq - acc.sum * acc.sum / n) / (n - 1.0);
            BinStats {
                bin_index: index,
                mean,
                variance: variance.max(0.0),
                population: acc.count,
            }
        })
        .collect())
}

/// Population-weighted ordinary least squares of bin variance on bin mean.
pub fn fit_noise_model(bins: &[BinStats], iso_label: impl Into<String>) -> Result<NoiseModel> {
    let usable: Vec<&BinStats> = bins.iter().filter(|b| b.population >= 2).collect();
    if usable.len() < 2 {
        return Err(Error::ModelViolation(format!(
            "need at least 2 usable bins, got {}",
            usable.len()
        )));
    }
    let mut sw = 0.0;
    let mut swx = 0.0;
    let mut swy = 0.0;
    let mut swxx = 0.0;
    let mut swxy = 0.0;
    for b in &usable {
        let w = b.population as f64;
        sw += w;
        swx += w * b.mean;
        swy += w * b.variance;
        swxx += w * b.mean * b.mean;
        swxy += w * b.mean * b.variance;
    }
    let det = sw * swxx - swx * swx;
    if det.abs() <= f64::EPSILON * sw * swxx {
        return Err(Error::ModelViolation("all bin means equal".into()));
    }
    let a = (sw * swxy - swx * swy) / det;
    let b = (swxx * swy - swx * swxy) / det;
    if a <= 0.0 {
        return Err(Error::ModelViolation(format!(
            "fitted slope {a:.3e} is not positive"
        )));
    }
    if b < 0.0 {
        return Err(Error::ModelViolation(format!(
            "fitted intercept {b:.3e} is negative"
        )));
    }
    NoiseModel::new(a, b, iso_label)
}

/// Difference model for switching from source `m1` to the noisier source
/// `m2`, with coefficients scaled to the `bit_depth`-bit output range:
/// `a'' = (a2-a1)(2^Nb - 1)`, `b'' = (b2-b1)(2^Nb - 1)^2`.
pub fn diff_model(m1: &NoiseModel, m2: &NoiseModel, bit_depth: u8) -> Result<StegoParams> {
    if bit_depth != 8 && bit_depth != 16 {
        return Err(Error::InvalidArgument(format!(
            "bit depth must be 8 or 16, got {bit_depth}"
        )));
    }
    let da = m2.a - m1.a;
    let db = m2.b - m1.b;
    if da <= 0.0 && db <= 0.0 {
        return Err(Error::ModelViolation(
            "target source must be noisier than the origin".into(),
        ));
    }
    if da < 0.0 || db < 0.0 {
        // A negative coefficient makes the difference variance negative
        // somewhere on [0,1].
        return Err(Error::ModelViolation(format!(
            "difference model (a'={da:.3e}, b'={db:.3e}) has negative variance on [0,1]"
        )));
    }
    StegoParams::from_normalized(da, db, bit_depth)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Raster16;

    fn flat(value: u16, w: usize, h: usize) -> Raster16 {
        Raster16::from_samples(w, h, 1, 16, vec![value; w * h]).unwrap()
    }

    #[test]
    fn constant_frames_give_single_zero_variance_bin() {
        let stack = vec![flat(1000, 8, 8), flat(1000, 8, 8)];
        let bins = bin_photosites(&stack, 5e-5).unwrap();
        assert_eq!(bins.len(), 1);
        assert!(bins[0].variance.abs() < 1e-15, "variance {}", bins[0].variance);
        assert_eq!(bins[0].population, 128);
        assert!((bins[0].mean - 1000.0 / 65535.0).abs() < 1e-12);
    }

    #[test]
    fn saturated_sites_are_excluded() {
        let mut a = flat(1000, 4, 1);
        let mut b = flat(1000, 4, 1);
        a.samples[0] = 0;
        b.samples[1] = 65535;
        let bins = bin_photosites(&[a, b], 5e-5).unwrap();
        let total: usize = bins.iter().map(|bin| bin.population).sum();
        assert_eq!(total, 4); // two of four locations dropped
    }

    #[test]
    fn too_few_frames_rejected() {
        assert!(bin_photosites(&[flat(5, 2, 2)], 5e-5).is_err());
    }

    #[test]
    fn mismatched_dims_rejected() {
        assert!(bin_photosites(&[flat(5, 2, 2), flat(5, 4, 4)], 5e-5).is_err());
    }

    #[test]
    fn two_point_fit_is_exact() {
        let (a, b) = (1e-4, 1e-6);
        let bins = vec![
            BinStats {
                bin_index: 0,
                mean: 0.2,
                variance: 0.2 * a + b,
                population: 10,
            },
            BinStats {
                bin_index: 1,
                mean: 0.8,
                variance: 0.8 * a + b,
                population: 10,
            },
        ];
        let m = fit_noise_model(&bins, "test").unwrap();
        assert!((m.a - a).abs() < 1e-18);
        assert!((m.b - b).abs() < 1e-18);
    }

    #[test]
    fn exact_line_recovers_reference_coefficients() {
        let (a, b) = (8.36e-5, 1.11e-6);
        let bins: Vec<BinStats> = (1..=20)
            .map(|i| {
                let mean = i as f64 / 21.0;
                BinStats {
                    bin_index: i,
                    mean,
                    variance: a * mean + b,
                    population: 100 + i as usize,
                }
            })
            .collect();
        let m = fit_noise_model(&bins, "iso1000").unwrap();
        assert!((m.a - a).abs() / a < 1e-12);
        assert!((m.b - b).abs() / b < 1e-12);
    }

    #[test]
    fn weighted_residual_mean_is_zero() {
        // Noisy bins: the weighted mean residual must vanish by the normal
        // equations.
        let bins: Vec<BinStats> = (0..10)
            .map(|i| BinStats {
                bin_index: i,
                mean: 0.05 + 0.1 * i as f64,
                variance: 1e-4 * (0.05 + 0.1 * i as f64) + 1e-6 * ((i % 3) as f64),
                population: 5 + i as usize,
            })
            .collect();
        let m = fit_noise_model(&bins, "t").unwrap();
        let resid: f64 = bins
            .iter()
            .map(|b| b.population as f64 * (b.variance - m.variance(b.mean)))
            .sum();
        assert!(resid.abs() < 1e-12, "weighted residual {resid}");
    }

    #[test]
    fn degenerate_fit_rejected() {
        let bins = vec![
            BinStats {
                bin_index: 0,
                mean: 0.5,
                variance: 1e-5,
                population: 10,
            },
            BinStats {
                bin_index: 1,
                mean: 0.5,
                variance: 2e-5,
                population: 10,
            },
        ];
        assert!(fit_noise_model(&bins, "t").is_err());
    }

    #[test]
    fn diff_model_iso_switch_values() {
        let m1 = NoiseModel::new(8.36e-5, 1.11e-6, "1000").unwrap();
        let m2 = NoiseModel::new(10.46e-5, 1.95e-6, "1250").unwrap();
        let p = diff_model(&m1, &m2, 16).unwrap();
        let scale = 65535.0;
        assert!((p.a_dd - 2.1e-5 * scale).abs() / p.a_dd < 1e-10);
        assert!((p.b_dd - 8.4e-7 * scale * scale).abs() / p.b_dd < 1e-10);
        // 16-bit-scale values from the normalized pair
        assert!((p.a_dd - 1.376).abs() < 1e-2);
        assert!((p.b_dd - 3609.0).abs() < 2.0);
    }

    #[test]
    fn diff_model_identical_models_rejected() {
        let m = NoiseModel::new(1e-4, 1e-6, "x").unwrap();
        assert!(diff_model(&m, &m.clone(), 16).is_err());
    }

    #[test]
    fn diff_model_swapped_rejected() {
        let m1 = NoiseModel::new(8.36e-5, 1.11e-6, "1000").unwrap();
        let m2 = NoiseModel::new(10.46e-5, 1.95e-6, "1250").unwrap();
        assert!(diff_model(&m2, &m1, 16).is_err());
    }

    #[test]
    fn model_file_round_trip() {
        let m = NoiseModel::new(8.36e-5, 1.11e-6, "iso1000").unwrap();
        let back = NoiseModel::from_text(&m.to_text()).unwrap();
        assert_eq!(m, back);
    }
}
