//! Texture, brightness, saturation and inter-palette distance measures.

use std::collections::HashSet;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{hue_diff, luma, HslColor};
use crate::corpus::PixelGrid;
use crate::geometry::{LandmarkSet, Point};
use crate::palette::Palette;
use crate::scalar::{euclidean, RunningMean, Scalar};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum MetricsError {
    #[error("texture needs at least two samples in every segment")]
    TooFewSamples,
    #[error("face region of {0} has zero area inside the image")]
    EmptyFaceBox(String),
    #[error("cohort {0:?} has no usable faces")]
    EmptyCohort(String),
    #[error("palette {0:?} has no entries")]
    EmptyPalette(String),
    #[error("cohort {0:?} appears more than once")]
    DuplicateCohort(String),
    #[error("a distance matrix needs at least two palettes, got {0}")]
    TooFewPalettes(usize),
}

/// How the hue term of the texture delta is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum HueMode {
    /// Circular difference as a fraction of a turn, in `[0, 0.5]`.
    #[default]
    Circular,
    /// Plain `|h₁ − h₂|` in degrees, no wraparound.
    LegacyRaw,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceTexture<T = f64> {
    pub image_id: String,
    pub delta_mean: T,
    pub n_deltas: usize,
}

/// One step of the texture walk between consecutive samples.
pub fn step_delta<T: Scalar>(a: &HslColor<T>, b: &HslColor<T>, mode: HueMode) -> T {
    let dh = match mode {
        HueMode::Circular => hue_diff(b.h, a.h),
        HueMode::LegacyRaw => (b.h - a.h).abs(),
    };
    let ds = b.s - a.s;
    let dl = b.l - a.l;
    (dh * dh + ds * ds + dl * dl).sqrt()
}

/// Mean root-sum-square HSL step over consecutive samples within each
/// segment. Steps never cross from one segment into the next.
pub fn texture_delta<T: Scalar, S: AsRef<[HslColor<T>]>>(
    image_id: &str,
    segments: &[S],
    mode: HueMode,
) -> Result<FaceTexture<T>, MetricsError> {
    if segments.is_empty() || segments.iter().any(|s| s.as_ref().len() < 2) {
        return Err(MetricsError::TooFewSamples);
    }
    let mut mean = RunningMean::new();
    for segment in segments {
        for pair in segment.as_ref().windows(2) {
            mean.push(step_delta(&pair[0], &pair[1], mode));
        }
    }
    Ok(FaceTexture {
        image_id: image_id.to_owned(),
        delta_mean: mean.mean().expect("at least one step"),
        n_deltas: mean.count(),
    })
}

/// Pixel set the brightness ratio is measured over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FaceRegion {
    /// Axis-aligned bounding box of all landmarks.
    #[default]
    BoundingBox,
    /// Pixels whose coordinates lie inside or on the landmark convex hull.
    ConvexHull,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceBrightness<T = f64> {
    pub image_id: String,
    pub bright_pixels: usize,
    pub face_pixels: usize,
    pub ratio: T,
}

/// Inclusive pixel box covering the landmarks, clamped to the image.
pub fn face_box<T: Scalar>(landmarks: &LandmarkSet<T>, width: usize, height: usize) -> Option<(usize, usize, usize, usize)> {
    let pts = landmarks.points();
    let fold = |f: fn(&Point<T>) -> T, pick: fn(T, T) -> T, init: T| pts.iter().map(f).fold(init, pick);
    let min_x = fold(|p| p.x, T::min, T::infinity()).floor();
    let max_x = fold(|p| p.x, T::max, T::neg_infinity()).floor();
    let min_y = fold(|p| p.y, T::min, T::infinity()).floor();
    let max_y = fold(|p| p.y, T::max, T::neg_infinity()).floor();
    let clamp_range = |lo: T, hi: T, size: usize| -> Option<(usize, usize)> {
        let last = T::from_count(size - 1);
        let lo = lo.max(T::zero());
        let hi = hi.min(last);
        (lo <= hi).then(|| (lo.to_usize().unwrap_or(0), hi.to_usize().unwrap_or(0)))
    };
    let (x0, x1) = clamp_range(min_x, max_x, width)?;
    let (y0, y1) = clamp_range(min_y, max_y, height)?;
    Some((x0, y0, x1, y1))
}

fn cross<T: Scalar>(o: Point<T>, a: Point<T>, b: Point<T>) -> T {
    (a.x - o.x) * (b.y - o.y) - (a.y - o.y) * (b.x - o.x)
}

/// Counter-clockwise convex hull (monotone chain), collinear points dropped.
pub fn convex_hull<T: Scalar>(points: &[Point<T>]) -> Vec<Point<T>> {
    let mut pts = points.to_vec();
    pts.sort_by(|a, b| a.x.partial_cmp(&b.x).unwrap().then(a.y.partial_cmp(&b.y).unwrap()));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Point<T>> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let start = hull.len();
        let iter: Box<dyn Iterator<Item = &Point<T>>> = if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= T::zero() {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull
}

fn inside_hull<T: Scalar>(hull: &[Point<T>], p: Point<T>) -> bool {
    match hull.len() {
        0 => false,
        1 => hull[0] == p,
        2 => {
            let (a, b) = (hull[0], hull[1]);
            cross(a, b, p) == T::zero()
                && p.x >= a.x.min(b.x)
                && p.x <= a.x.max(b.x)
                && p.y >= a.y.min(b.y)
                && p.y <= a.y.max(b.y)
        }
        n => (0..n).all(|i| cross(hull[i], hull[(i + 1) % n], p) >= T::zero()),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BrightnessConfig {
    /// A pixel is bright when its luma is strictly greater than this.
    pub luma_threshold: u8,
    pub region: FaceRegion,
}

impl Default for BrightnessConfig {
    fn default() -> Self {
        Self { luma_threshold: 200, region: FaceRegion::BoundingBox }
    }
}

pub fn brightness_ratio<T: Scalar>(
    image_id: &str,
    image: &PixelGrid,
    landmarks: &LandmarkSet<T>,
    config: &BrightnessConfig,
) -> Result<FaceBrightness<T>, MetricsError> {
    let empty = || MetricsError::EmptyFaceBox(image_id.to_owned());
    let (x0, y0, x1, y1) = face_box(landmarks, image.width(), image.height()).ok_or_else(empty)?;
    let hull = match config.region {
        FaceRegion::BoundingBox => None,
        FaceRegion::ConvexHull => Some(convex_hull(landmarks.points())),
    };
    let mut face_pixels = 0usize;
    let mut bright_pixels = 0usize;
    for y in y0..=y1 {
        for x in x0..=x1 {
            if let Some(hull) = &hull {
                if !inside_hull(hull, Point::new(T::from_count(x), T::from_count(y))) {
                    continue;
                }
            }
            face_pixels += 1;
            if luma(image.get(x, y)) > config.luma_threshold {
                bright_pixels += 1;
            }
        }
    }
    if face_pixels == 0 {
        return Err(empty());
    }
    Ok(FaceBrightness {
        image_id: image_id.to_owned(),
        bright_pixels,
        face_pixels,
        ratio: T::from_count(bright_pixels) / T::from_count(face_pixels),
    })
}

/// Per-face inputs to the cohort reduction.
#[derive(Debug, Clone, PartialEq)]
pub struct FaceObservation<T = f64> {
    pub image_id: String,
    pub texture: FaceTexture<T>,
    pub brightness: FaceBrightness<T>,
    /// Saturations of this face's samples that passed the skin gate.
    pub gated_saturations: Vec<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortMetrics<T = f64> {
    pub cohort_id: String,
    pub texture_mean: T,
    pub brightness_mean: T,
    /// Mean saturation over all gated samples; zero when none passed.
    pub saturation_mean: T,
    pub n_faces: usize,
    pub n_gated_samples: usize,
}

/// Unweighted per-face means, reduced in `image_id` order.
pub fn cohort_metrics_from_faces<T: Scalar>(
    cohort_id: &str,
    faces: &[FaceObservation<T>],
) -> Result<CohortMetrics<T>, MetricsError> {
    if faces.is_empty() {
        return Err(MetricsError::EmptyCohort(cohort_id.to_owned()));
    }
    let mut ordered: Vec<&FaceObservation<T>> = faces.iter().collect();
    ordered.sort_by(|a, b| a.image_id.cmp(&b.image_id));
    let texture: RunningMean<T> = ordered.iter().map(|f| f.texture.delta_mean).collect();
    let brightness: RunningMean<T> = ordered.iter().map(|f| f.brightness.ratio).collect();
    // Per-face means first, then a count-weighted combination: the pooled
    // sample mean, exact when every face is identical.
    let mut saturation = RunningMean::new();
    for f in &ordered {
        let face: RunningMean<T> = f.gated_saturations.iter().copied().collect();
        if let Some(m) = face.mean() {
            saturation.push_weighted(m, face.count());
        }
    }
    Ok(CohortMetrics {
        cohort_id: cohort_id.to_owned(),
        texture_mean: texture.mean().expect("non-empty"),
        brightness_mean: brightness.mean().expect("non-empty"),
        saturation_mean: saturation.mean().unwrap_or_else(T::zero),
        n_faces: ordered.len(),
        n_gated_samples: saturation.count(),
    })
}

fn directed_chamfer<T: Scalar>(from: &[([T; 3], T)], to: &[([T; 3], T)]) -> T {
    from.iter().fold(T::zero(), |acc, (e, w)| {
        let nearest = to.iter().map(|(f, _)| euclidean(e, f)).fold(T::infinity(), T::min);
        acc + *w * nearest
    })
}

/// Proportion-weighted symmetric nearest-neighbour (Chamfer) distance in
/// the cylinder embedding. Exactly symmetric in its arguments.
pub fn palette_distance<T: Scalar>(p: &Palette<T>, q: &Palette<T>) -> Result<T, MetricsError> {
    for x in [p, q] {
        if x.entries.is_empty() {
            return Err(MetricsError::EmptyPalette(x.cohort_id.clone()));
        }
    }
    let e: Vec<_> = p.embedded_entries().collect();
    let f: Vec<_> = q.embedded_entries().collect();
    let half = T::lit(0.5);
    Ok(half * directed_chamfer(&e, &f) + half * directed_chamfer(&f, &e))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceMatrix<T = f64> {
    pub cohort_ids: Vec<String>,
    /// Row-major, symmetric, zero diagonal.
    pub values: Vec<Vec<T>>,
}

impl<T: Scalar> DistanceMatrix<T> {
    pub fn get(&self, a: &str, b: &str) -> Option<T> {
        let i = self.cohort_ids.iter().position(|c| c == a)?;
        let j = self.cohort_ids.iter().position(|c| c == b)?;
        Some(self.values[i][j])
    }

    /// Off-diagonal upper-triangle entries as `(i, j, value)`.
    pub fn pairs(&self) -> Vec<(usize, usize, T)> {
        let n = self.cohort_ids.len();
        (0..n).flat_map(|i| ((i + 1)..n).map(move |j| (i, j))).map(|(i, j)| (i, j, self.values[i][j])).collect()
    }

    /// Header row and column of cohort ids, six-decimal values.
    pub fn to_csv(&self) -> String {
        let mut out = String::new();
        out.push_str("cohort_id");
        for id in &self.cohort_ids {
            let _ = write!(out, ",{id}");
        }
        out.push('\n');
        for (id, row) in self.cohort_ids.iter().zip(&self.values) {
            out.push_str(id);
            for v in row {
                let _ = write!(out, ",{:.6}", v.as_f64());
            }
            out.push('\n');
        }
        out
    }
}

pub fn distance_matrix<T: Scalar>(palettes: &[Palette<T>]) -> Result<DistanceMatrix<T>, MetricsError> {
    if palettes.len() < 2 {
        return Err(MetricsError::TooFewPalettes(palettes.len()));
    }
    let mut seen = HashSet::new();
    for p in palettes {
        if !seen.insert(p.cohort_id.as_str()) {
            return Err(MetricsError::DuplicateCohort(p.cohort_id.clone()));
        }
    }
    let n = palettes.len();
    let mut values = vec![vec![T::zero(); n]; n];
    for i in 0..n {
        for j in (i + 1)..n {
            let d = palette_distance(&palettes[i], &palettes[j])?;
            values[i][j] = d;
            values[j][i] = d;
        }
    }
    Ok(DistanceMatrix { cohort_ids: palettes.iter().map(|p| p.cohort_id.clone()).collect(), values })
}

pub const METRICS_CSV_HEADER: &str = "cohort_id,n_faces,texture_mean,brightness_mean,saturation_mean";

pub fn metrics_csv<T: Scalar>(rows: &[CohortMetrics<T>]) -> String {
    let mut out = String::from(METRICS_CSV_HEADER);
    out.push('\n');
    for m in rows {
        let _ = writeln!(
            out,
            "{},{},{:.6},{:.6},{:.6}",
            m.cohort_id,
            m.n_faces,
            m.texture_mean.as_f64(),
            m.brightness_mean.as_f64(),
            m.saturation_mean.as_f64()
        );
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::color::RgbColor;
    use crate::geometry::LANDMARK_COUNT;
    use crate::palette::PaletteEntry;

    fn hsl(h: f64, s: f64, l: f64) -> HslColor<f64> {
        HslColor::new(h, s, l).unwrap()
    }

    fn box_landmarks(x0: f64, y0: f64, x1: f64, y1: f64) -> LandmarkSet<f64> {
        let pts = (0..LANDMARK_COUNT)
            .map(|i| match i % 4 {
                0 => Point::new(x0, y0),
                1 => Point::new(x1, y0),
                2 => Point::new(x1, y1),
                _ => Point::new(x0, y1),
            })
            .collect();
        LandmarkSet::new(pts).unwrap()
    }

    fn single(id: &str, entries: &[((f64, f64, f64), f64)]) -> Palette<f64> {
        Palette {
            cohort_id: id.into(),
            entries: entries
                .iter()
                .map(|&((h, s, l), p)| PaletteEntry { centroid_hsl: hsl(h, s, l), proportion: p, member_count: 1 })
                .collect(),
            k: entries.len(),
            seed: 0,
            n_samples: entries.len(),
        }
    }

    #[test]
    fn texture_examples() {
        let c = hsl(20.0, 0.4, 0.7);
        let t = texture_delta("f", &[vec![c; 10], vec![c; 10]], HueMode::Circular).unwrap();
        assert_eq!((t.delta_mean, t.n_deltas), (0.0, 18));

        let t = texture_delta("f", &[vec![hsl(20.0, 0.4, 0.7), hsl(20.0, 0.4, 0.8)]], HueMode::Circular).unwrap();
        assert!((t.delta_mean - 0.1).abs() < 1e-15);

        let seq: Vec<_> = (0..10).map(|i| if i % 2 == 0 { hsl(355.0, 0.5, 0.8) } else { hsl(5.0, 0.5, 0.8) }).collect();
        for pair in seq.windows(2) {
            assert!((step_delta(&pair[0], &pair[1], HueMode::Circular) - 10.0 / 360.0).abs() < 1e-12);
        }
        assert_eq!(step_delta(&seq[0], &seq[1], HueMode::LegacyRaw), 350.0);
    }

    #[test]
    fn texture_never_crosses_segments() {
        let a = vec![hsl(20.0, 0.4, 0.7); 3];
        let b = vec![hsl(20.0, 0.4, 0.2); 3];
        let t = texture_delta("f", &[a, b], HueMode::Circular).unwrap();
        assert_eq!((t.delta_mean, t.n_deltas), (0.0, 4));
        let short: [Vec<HslColor<f64>>; 1] = [vec![hsl(1.0, 0.1, 0.1)]];
        assert_eq!(texture_delta("f", &short, HueMode::Circular), Err(MetricsError::TooFewSamples));
    }

    #[test]
    fn brightness_strict_threshold() {
        let lm = box_landmarks(0.0, 0.0, 9.0, 9.0);
        let img = PixelGrid::from_fn(10, 10, |x, y| if y * 10 + x < 37 { RgbColor::gray(201) } else { RgbColor::gray(199) }).unwrap();
        let b = brightness_ratio("f", &img, &lm, &BrightnessConfig::default()).unwrap();
        assert_eq!((b.bright_pixels, b.face_pixels), (37, 100));
        assert_eq!(b.ratio, 0.37);

        let white = PixelGrid::filled(10, 10, RgbColor::WHITE).unwrap();
        assert_eq!(brightness_ratio::<f64>("f", &white, &lm, &BrightnessConfig::default()).unwrap().ratio, 1.0);
        let at_threshold = PixelGrid::filled(10, 10, RgbColor::gray(200)).unwrap();
        assert_eq!(brightness_ratio::<f64>("f", &at_threshold, &lm, &BrightnessConfig::default()).unwrap().ratio, 0.0);
    }

    #[test]
    fn face_box_is_clamped() {
        let img = PixelGrid::filled(10, 10, RgbColor::BLACK).unwrap();
        let lm = box_landmarks(-5.0, -5.0, 4.0, 4.0);
        assert_eq!(brightness_ratio::<f64>("f", &img, &lm, &BrightnessConfig::default()).unwrap().face_pixels, 25);
        let off = box_landmarks(20.0, 20.0, 30.0, 30.0);
        assert_eq!(
            brightness_ratio::<f64>("f", &img, &off, &BrightnessConfig::default()),
            Err(MetricsError::EmptyFaceBox("f".into()))
        );
    }

    #[test]
    fn hull_region_of_a_box_matches_bbox() {
        let img = PixelGrid::filled(12, 12, RgbColor::WHITE).unwrap();
        let lm = box_landmarks(1.0, 1.0, 8.0, 8.0);
        let cfg = BrightnessConfig { region: FaceRegion::ConvexHull, ..Default::default() };
        assert_eq!(brightness_ratio::<f64>("f", &img, &lm, &cfg).unwrap().face_pixels, 64);
    }

    #[test]
    fn hull_of_triangle() {
        let pts = [Point::new(0.0, 0.0), Point::new(4.0, 0.0), Point::new(0.0, 4.0), Point::new(1.0, 1.0), Point::new(2.0, 0.0)];
        let hull = convex_hull(&pts);
        assert_eq!(hull.len(), 3);
        assert!(inside_hull(&hull, Point::new(2.0, 2.0)));
        assert!(!inside_hull(&hull, Point::new(3.0, 3.0)));
    }

    #[test]
    fn cohort_reduction() {
        let face = |id: &str, b: f64| FaceObservation {
            image_id: id.into(),
            texture: FaceTexture { image_id: id.into(), delta_mean: 0.1, n_deltas: 18 },
            brightness: FaceBrightness { image_id: id.into(), bright_pixels: 0, face_pixels: 1, ratio: b },
            gated_saturations: vec![0.3, 0.4],
        };
        let m = cohort_metrics_from_faces("kr", &[face("b", 1.0), face("a", 0.0)]).unwrap();
        assert_eq!((m.brightness_mean, m.texture_mean, m.n_faces, m.n_gated_samples), (0.5, 0.1, 2, 4));
        assert!((m.saturation_mean - 0.35).abs() < 1e-15);
        assert_eq!(cohort_metrics_from_faces::<f64>("kr", &[]), Err(MetricsError::EmptyCohort("kr".into())));
    }

    #[test]
    fn chamfer_examples() {
        let p = single("p", &[((0.0, 0.0, 0.7), 1.0)]);
        let q = single("q", &[((0.0, 0.0, 0.7), 0.5), ((0.0, 0.0, 0.9), 0.5)]);
        assert!((palette_distance(&p, &q).unwrap() - 0.05).abs() < 1e-15);
        assert_eq!(palette_distance(&q, &q).unwrap(), 0.0);

        let a = single("a", &[((0.0, 0.3, 0.7), 1.0)]);
        let b = single("b", &[((90.0, 0.4, 0.7), 1.0)]);
        assert!((palette_distance(&a, &b).unwrap() - 0.5).abs() < 1e-12);

        let empty = single("e", &[]);
        assert_eq!(palette_distance(&a, &empty), Err(MetricsError::EmptyPalette("e".into())));
    }

    #[test]
    fn matrix_contract() {
        let a = single("a", &[((10.0, 0.3, 0.7), 1.0)]);
        let b = single("b", &[((30.0, 0.4, 0.8), 0.4), ((20.0, 0.2, 0.75), 0.6)]);
        let c = single("c", &[((10.0, 0.3, 0.7), 1.0)]);
        let m = distance_matrix(&[a.clone(), b, c]).unwrap();
        for i in 0..3 {
            assert_eq!(m.values[i][i], 0.0);
            for j in 0..3 {
                assert_eq!(m.values[i][j], m.values[j][i]);
            }
        }
        assert_eq!(m.get("a", "c"), Some(0.0));
        assert_eq!(distance_matrix(&[a.clone(), a.clone()]), Err(MetricsError::DuplicateCohort("a".into())));
        assert_eq!(distance_matrix(&[a]), Err(MetricsError::TooFewPalettes(1)));
        let csv = m.to_csv();
        assert!(csv.starts_with("cohort_id,a,b,c\na,0.000000,"));
    }

    #[test]
    fn metrics_csv_format() {
        let m = CohortMetrics { cohort_id: "jp".into(), texture_mean: 0.6846, brightness_mean: 0.003, saturation_mean: 0.439, n_faces: 3, n_gated_samples: 9 };
        assert_eq!(metrics_csv(&[m]), format!("{METRICS_CSV_HEADER}\njp,3,0.684600,0.003000,0.439000\n"));
    }
}
