//! Property tests for the structural invariants: serialization round-trips,
//! probability normalization, cost nonnegativity, quantizer behavior.

use proptest::prelude::*;

use natsteg::raster::{decode_pnm, encode_pnm};
use natsteg::stego::{change_probs, payload_entropy, probs_to_costs};
use natsteg::{NoiseModel, Raster16, StegoParams};

fn raster_strategy() -> impl Strategy<Value = Raster16> {
    (1usize..8, 1usize..8, prop_oneof![Just(1usize), Just(3)], prop_oneof![Just(8u8), Just(16)])
        .prop_flat_map(|(w, h, ch, depth)| {
            let max = if depth == 8 { 255u16 } else { 65535 };
            proptest::collection::vec(0..=max, w * h * ch)
                .prop_map(move |samples| Raster16::from_samples(w, h, ch, depth, samples).unwrap())
        })
}

proptest! {
    #[test]
    fn pnm_round_trip(r in raster_strategy()) {
        let mut bytes = Vec::new();
        encode_pnm(&r, &mut bytes).unwrap();
        let back = decode_pnm(&bytes).unwrap();
        prop_assert_eq!(back, r);
    }

    #[test]
    fn model_text_round_trip(a in 1e-9f64..1e-2, b in 0.0f64..1e-3) {
        let m = NoiseModel::new(a, b, "tag").unwrap();
        let back = NoiseModel::from_text(&m.to_text()).unwrap();
        prop_assert_eq!(back.a, m.a);
        prop_assert_eq!(back.b, m.b);
        prop_assert_eq!(back.iso_label, m.iso_label);
    }

    #[test]
    fn params_text_round_trip(a in 0.0f64..10.0, b in 0.0f64..1e5, dark in any::<bool>()) {
        let mut p = StegoParams::from_scaled(a, b, 16).unwrap();
        p.wet_dark = dark;
        let back = StegoParams::from_text(&p.to_text()).unwrap();
        prop_assert_eq!(back, p);
    }

    #[test]
    fn change_probs_rows_are_distributions(
        samples in proptest::collection::vec(0u16..=65535, 16),
        a in 0.0f64..5.0,
        b in 0.0f64..1e5,
    ) {
        let cover = Raster16::from_samples(4, 4, 1, 16, samples).unwrap();
        let p = StegoParams::from_scaled(a, b, 16).unwrap();
        let map = change_probs(&cover, &p, Some(8)).unwrap();
        for idx in 0..16 {
            let probs = map.pixel_probs(idx);
            let sum: f64 = probs.iter().sum();
            prop_assert!((sum - 1.0).abs() < 1e-9, "sum {} at {}", sum, idx);
            prop_assert!(probs.iter().all(|&v| (0.0..=1.0).contains(&v)));
            if map.wet[idx] {
                prop_assert_eq!(probs[map.k_max], 1.0);
            }
        }
        let (bits, bpp) = payload_entropy(&map);
        prop_assert!(bits >= 0.0 && bpp >= 0.0);
    }

    #[test]
    fn costs_are_nonnegative(
        samples in proptest::collection::vec(0u16..=65535, 16),
        a in 0.0f64..5.0,
        b in 0.0f64..1e5,
    ) {
        let cover = Raster16::from_samples(4, 4, 1, 16, samples).unwrap();
        let p = StegoParams::from_scaled(a, b, 16).unwrap();
        let map = change_probs(&cover, &p, Some(8)).unwrap();
        let costs = probs_to_costs(&map);
        // flipping lemma: pi~ >= 1/2 always, so rho = ln(pi~/(1-pi~)) >= 0
        prop_assert!(costs.rho.iter().all(|&r| r >= 0.0));
        for (idx, &wet) in map.wet.iter().enumerate() {
            if wet {
                prop_assert!(costs.rho[idx].is_infinite());
            }
        }
    }

    #[test]
    fn quantizer_stays_within_half_step(x in 0.0f64..65535.0) {
        let p = StegoParams::from_scaled(1.0, 100.0, 16).unwrap();
        let code = p.quantize(x);
        prop_assert!((x / 256.0 - code as f64).abs() <= 0.5 + 1e-12);
    }
}

#[test]
fn quantizer_ties_go_to_even() {
    let p = StegoParams::from_scaled(1.0, 100.0, 16).unwrap();
    // exact half-step points: (k + 0.5) * 256
    assert_eq!(p.quantize(128.0), 0); // 0.5 -> 0
    assert_eq!(p.quantize(384.0), 2); // 1.5 -> 2
    assert_eq!(p.quantize(640.0), 2); // 2.5 -> 2
    assert_eq!(p.quantize(896.0), 4); // 3.5 -> 4
}
