use proptest::prelude::*;
use skintone::geometry::{
    cheek_segments, sample_cheek, sample_patch, LandmarkSet, Point, SamplingConfig, SegmentIndices, LEFT_EYE_INNER,
    LEFT_EYE_OUTER, LEFT_MOUTH_CORNER, LEFT_NASAL_WING,
};
use skintone::{PixelGrid, RgbColor};

fn landmarks(endpoints: [(f64, f64); 4]) -> LandmarkSet {
    let mut pts = vec![Point::new(0.0, 0.0); 68];
    for (i, (x, y)) in [LEFT_EYE_OUTER, LEFT_NASAL_WING, LEFT_EYE_INNER, LEFT_MOUTH_CORNER].into_iter().zip(endpoints) {
        pts[i] = Point::new(x, y);
    }
    LandmarkSet::new(pts).unwrap()
}

#[test]
fn patch_mean_rounds_half_up() {
    // At the corner the 3×3 window clips to 2×2: two 10s and two 11s average to 10.5.
    let img = PixelGrid::from_fn(4, 4, |x, _| if x == 0 { RgbColor::gray(10) } else { RgbColor::gray(11) }).unwrap();
    assert_eq!(sample_patch(&img, 0.0, 0.0, 3), RgbColor::gray(11));
    let img = PixelGrid::from_fn(5, 5, |x, y| if (x, y) == (2, 2) { RgbColor::gray(14) } else { RgbColor::gray(10) }).unwrap();
    assert_eq!(sample_patch(&img, 2.0, 2.0, 3), RgbColor::gray(10));
    assert_eq!(sample_patch(&img, 2.0, 2.0, 1), RgbColor::gray(14));
}

#[test]
fn nine_pixel_means_round_to_nearest() {
    let values = [10u8, 10, 10, 10, 11, 11, 11, 11, 11];
    let img = PixelGrid::from_fn(3, 3, |x, y| {
        let v = values[y * 3 + x];
        RgbColor::new(v, v - 1, if (x, y) == (0, 0) { 11 } else { v })
    })
    .unwrap();
    // r: 95/9 = 10.56 → 11, g: 86/9 = 9.56 → 10, b: 96/9 = 10.67 → 11.
    assert_eq!(sample_patch(&img, 1.0, 1.0, 3), RgbColor::new(11, 10, 11));
}

#[test]
fn segments_follow_the_68_point_layout() {
    let lm = landmarks([(1.0, 2.0), (3.0, 4.0), (5.0, 6.0), (7.0, 8.0)]);
    let segs = cheek_segments(&lm);
    assert_eq!((segs.segment_a.start, segs.segment_a.end), (Point::new(1.0, 2.0), Point::new(3.0, 4.0)));
    assert_eq!((segs.segment_b.start, segs.segment_b.end), (Point::new(5.0, 6.0), Point::new(7.0, 8.0)));
}

#[test]
fn output_has_two_n_samples_in_order() {
    let img = PixelGrid::from_fn(40, 40, |x, y| RgbColor::new(x as u8 * 5, y as u8 * 5, 100)).unwrap();
    let lm = landmarks([(5.0, 5.0), (20.0, 30.0), (10.0, 5.0), (30.0, 35.0)]);
    for n in [2, 5, 10, 17] {
        let config = SamplingConfig { samples_per_segment: n, ..SamplingConfig::default() };
        let samples = sample_cheek(&img, &lm, &config).unwrap();
        assert_eq!(samples.len(), 2 * n);
        for (i, s) in samples.iter().enumerate() {
            assert_eq!(s.point.segment_index as usize, i / n);
            assert_eq!(s.point.ordinal, i % n);
        }
        assert_eq!(samples, sample_cheek(&img, &lm, &config).unwrap());
        assert_eq!((samples[0].point.x, samples[0].point.y), (5.0, 5.0));
        assert_eq!((samples[2 * n - 1].point.x, samples[2 * n - 1].point.y), (30.0, 35.0));
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let img = PixelGrid::filled(8, 8, RgbColor::BLACK).unwrap();
    let lm = landmarks([(1.0, 1.0); 4]);
    for config in [
        SamplingConfig { samples_per_segment: 1, ..SamplingConfig::default() },
        SamplingConfig { patch: 0, ..SamplingConfig::default() },
        SamplingConfig { patch: 2, ..SamplingConfig::default() },
        SamplingConfig { segments: SegmentIndices { a: (68, 0), b: (1, 2) }, ..SamplingConfig::default() },
    ] {
        assert!(sample_cheek(&img, &lm, &config).is_err());
    }
}

/// Coordinates on a 1/8 grid keep every interpolated sample exact, so
/// translation commutes with rounding to the pixel grid.
fn eighths(lo: i32, hi: i32) -> impl Strategy<Value = f64> {
    (lo * 8..=hi * 8).prop_map(|v| v as f64 / 8.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn sampling_is_translation_equivariant(
        pixels in prop::collection::vec(any::<(u8, u8, u8)>(), 24 * 24),
        ends in prop::array::uniform4((eighths(2, 20), eighths(2, 20))),
        dx in 0usize..10,
        dy in 0usize..10,
        n in 2usize..12,
        patch in prop::sample::select(vec![1usize, 3, 5]),
    ) {
        let original = PixelGrid::from_fn(24, 24, |x, y| {
            let (r, g, b) = pixels[y * 24 + x];
            RgbColor::new(r, g, b)
        }).unwrap();
        let moved = PixelGrid::from_fn(40, 40, |x, y| {
            if x >= dx && y >= dy && x - dx < 24 && y - dy < 24 {
                original.get(x - dx, y - dy)
            } else {
                RgbColor::new(1, 2, 3)
            }
        }).unwrap();
        let lm = landmarks(ends);
        let shifted = lm.translated(dx as f64, dy as f64);
        let config = SamplingConfig { samples_per_segment: n, patch, ..SamplingConfig::default() };
        let a: Vec<RgbColor> = sample_cheek(&original, &lm, &config).unwrap().iter().map(|s| s.rgb).collect();
        let b: Vec<RgbColor> = sample_cheek(&moved, &shifted, &config).unwrap().iter().map(|s| s.rgb).collect();
        prop_assert_eq!(a, b);
    }

    #[test]
    fn samples_are_within_their_window(
        pixels in prop::collection::vec(any::<(u8, u8, u8)>(), 16 * 16),
        x in -3.0..19.0f64,
        y in -3.0..19.0f64,
        patch in prop::sample::select(vec![1usize, 3, 5, 7]),
    ) {
        let img = PixelGrid::from_fn(16, 16, |x, y| {
            let (r, g, b) = pixels[y * 16 + x];
            RgbColor::new(r, g, b)
        }).unwrap();
        let c = sample_patch(&img, x, y, patch);
        let cx = ((x + 0.5).floor().max(0.0) as usize).min(15);
        let cy = ((y + 0.5).floor().max(0.0) as usize).min(15);
        let h = patch / 2;
        let window: Vec<RgbColor> = (cy.saturating_sub(h)..=(cy + h).min(15))
            .flat_map(|yy| (cx.saturating_sub(h)..=(cx + h).min(15)).map(move |xx| (xx, yy)))
            .map(|(xx, yy)| img.get(xx, yy))
            .collect();
        for (get, v) in [(|p: &RgbColor| p.r) as fn(&RgbColor) -> u8, |p| p.g, |p| p.b].into_iter().map(|f| (f, f(&c))) {
            let lo = window.iter().map(get).min().unwrap();
            let hi = window.iter().map(get).max().unwrap();
            prop_assert!(lo <= v && v <= hi);
        }
    }
}
