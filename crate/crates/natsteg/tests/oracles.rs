//! Monte-Carlo and consistency oracles for values the library computes in
//! closed form.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use natsteg::develop::downsample_box_probs;
use natsteg::eval::synth_flat_stack;
use natsteg::noise::{bin_photosites, fit_noise_model};
use natsteg::stego::{change_probs, payload_entropy};
use natsteg::{Raster16, StegoParams};

/// Averaging a c x c block of i.i.d. noise divides the variance by c^2;
/// the box path's closed form must match this simulation.
#[test]
fn box_downsampling_variance_oracle() {
    let c = 2usize;
    let side = 2000usize; // 10^6 blocks
    let sigma = 220.0f64;
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0C5);
    let blocks = side / c;
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for _ in 0..blocks * blocks {
        let mut acc = 0.0;
        for _ in 0..c * c {
            let z: f64 = rng.sample(StandardNormal);
            acc += sigma * z;
        }
        let m = acc / (c * c) as f64;
        s1 += m;
        s2 += m * m;
    }
    let n = (blocks * blocks) as f64;
    let var = (s2 - s1 * s1 / n) / (n - 1.0);
    let expect = sigma * sigma / (c * c) as f64;
    assert!(
        (var - expect).abs() / expect < 0.03,
        "empirical {var:.1} vs {expect:.1}"
    );

    // closed form used by the box path: same sigma scaling
    let cover = Raster16::from_samples(2, 2, 1, 16, vec![30000; 4]).unwrap();
    let p = StegoParams::from_scaled(0.0, sigma * sigma, 16).unwrap();
    let full = change_probs(&cover, &p, Some(6)).unwrap();
    let boxed = downsample_box_probs(&cover, &p, 2, Some(6)).unwrap();
    // the boxed distribution is strictly tighter than the full-resolution one
    assert!(boxed.pixel_probs(0)[6] > full.pixel_probs(0)[6]);
}

/// The estimator's error shrinks as the stack grows: with few frames the
/// across-stack mean is noisy enough to truncate the within-bin spread.
#[test]
fn estimator_error_shrinks_with_stack_size() {
    let (a, b) = (8.36e-5, 1.11e-6);
    let delta = 1.0f64 / 64.0;
    let step = 1024usize;
    let samples: Vec<u16> = (0..256 * 256)
        .map(|i| ((8 + 3 * (i % 16)) * step) as u16)
        .collect();
    let mu = Raster16::from_samples(256, 256, 1, 16, samples).unwrap();

    let err_for = |n_frames: usize, seed: u64| {
        let stack = synth_flat_stack(&mu, a, b, n_frames, seed).unwrap();
        let bins = bin_photosites(&stack, delta).unwrap();
        let m = fit_noise_model(&bins, "t").unwrap();
        (m.a - a).abs() / a
    };
    // average over a few seeds so the comparison reflects bias, not luck
    let small: f64 = (0..3).map(|s| err_for(4, 100 + s)).sum::<f64>() / 3.0;
    let large: f64 = (0..3).map(|s| err_for(40, 200 + s)).sum::<f64>() / 3.0;
    assert!(
        large < small,
        "error did not shrink: N=4 -> {small:.4}, N=40 -> {large:.4}"
    );
    assert!(large < 0.01, "N=40 error {large:.4}");
}

/// Raising the variance slope raises the embedding rate monotonically
/// (perturbation mode, zero intercept).
#[test]
fn perturbation_sweep_is_monotone() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x9E27);
    let samples: Vec<u16> = (0..256 * 256).map(|_| rng.gen_range(0..=65535)).collect();
    let cover = Raster16::from_samples(256, 256, 1, 16, samples).unwrap();
    let slopes = [4e-7, 1.5e-6, 6.3e-6, 2.5e-5, 1e-4];
    let mut rates = Vec::new();
    for &a in &slopes {
        let p = StegoParams::perturbation(a, 16).unwrap();
        let map = change_probs(&cover, &p, None).unwrap();
        rates.push(payload_entropy(&map).1);
    }
    for w in rates.windows(2) {
        assert!(w[1] > w[0], "rates not increasing: {rates:?}");
    }
}

/// Quantizing a raw-domain stego frame loses far less variance than the
/// model's intercept term, keeping the 16-bit mimicry claim testable.
#[test]
fn raw_embedding_variance_oracle() {
    let p = StegoParams::from_normalized(2.1e-5, 8.4e-7, 16).unwrap();
    let x = 30000u16;
    let cover = Raster16::from_samples(1000, 1000, 1, 16, vec![x; 1_000_000]).unwrap();
    let stego = natsteg::stego::embed_raw(&cover, &p, 0xE0).unwrap();
    let expect = p.sigma2(x as f64) + 1.0 / 12.0; // rounding adds Delta^2/12 with Delta=1
    let (mut s1, mut s2) = (0.0f64, 0.0f64);
    for &v in &stego.samples {
        let d = v as f64 - x as f64;
        s1 += d;
        s2 += d * d;
    }
    let n = stego.samples.len() as f64;
    let var = (s2 - s1 * s1 / n) / (n - 1.0);
    assert!(
        (var - expect).abs() / expect < 0.01,
        "raw stego variance {var:.2} vs {expect:.2}"
    );
}
