//! Cheek segments from 68-point landmarks and patch sampling along them.
//!
//! Indices follow the iBUG 300-W layout (0-based). Only the left cheek is
//! sampled.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::RgbColor;
use crate::corpus::PixelGrid;
use crate::scalar::Scalar;

pub const LANDMARK_COUNT: usize = 68;

/// Left-eye outer corner.
pub const LEFT_EYE_OUTER: usize = 36;
/// Left-eye inner corner.
pub const LEFT_EYE_INNER: usize = 39;
/// Left nasal wing.
pub const LEFT_NASAL_WING: usize = 31;
/// Left mouth corner.
pub const LEFT_MOUTH_CORNER: usize = 48;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GeometryError {
    #[error("at least 2 samples per segment are required, got {0}")]
    InvalidCount(usize),
    #[error("patch size must be odd and >= 1, got {0}")]
    InvalidPatch(usize),
    #[error("landmark index {0} out of range 0..68")]
    LandmarkIndex(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point<T = f64> {
    pub x: T,
    pub y: T,
}

impl<T> Point<T> {
    pub const fn new(x: T, y: T) -> Self {
        Self { x, y }
    }
}

/// Exactly 68 finite landmark points in image pixel coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkSet<T = f64> {
    points: Vec<Point<T>>,
}

impl<T: Scalar> LandmarkSet<T> {
    pub fn new(points: Vec<Point<T>>) -> Option<Self> {
        let valid = points.len() == LANDMARK_COUNT && points.iter().all(|p| p.x.is_finite() && p.y.is_finite());
        valid.then_some(Self { points })
    }

    pub fn points(&self) -> &[Point<T>] {
        &self.points
    }

    pub fn point(&self, index: usize) -> Point<T> {
        self.points[index]
    }

    pub fn translated(&self, dx: T, dy: T) -> Self {
        Self { points: self.points.iter().map(|p| Point::new(p.x + dx, p.y + dy)).collect() }
    }

    /// Number of points outside `[0, width) × [0, height)`. Such points are
    /// accepted; sampling clamps them.
    pub fn off_image_count(&self, width: usize, height: usize) -> usize {
        let (w, h) = (T::from_count(width), T::from_count(height));
        self.points
            .iter()
            .filter(|p| p.x < T::zero() || p.y < T::zero() || p.x >= w || p.y >= h)
            .count()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Segment<T = f64> {
    pub start: Point<T>,
    pub end: Point<T>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheekSegments<T = f64> {
    pub segment_a: Segment<T>,
    pub segment_b: Segment<T>,
}

impl<T: Copy> CheekSegments<T> {
    pub fn as_array(&self) -> [Segment<T>; 2] {
        [self.segment_a, self.segment_b]
    }
}

/// Landmark index pairs for the two cheek segments.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct SegmentIndices {
    pub a: (usize, usize),
    pub b: (usize, usize),
}

impl Default for SegmentIndices {
    fn default() -> Self {
        Self { a: (LEFT_EYE_OUTER, LEFT_NASAL_WING), b: (LEFT_EYE_INNER, LEFT_MOUTH_CORNER) }
    }
}

impl SegmentIndices {
    pub fn validate(&self) -> Result<(), GeometryError> {
        for i in [self.a.0, self.a.1, self.b.0, self.b.1] {
            if i >= LANDMARK_COUNT {
                return Err(GeometryError::LandmarkIndex(i));
            }
        }
        Ok(())
    }
}

/// Segment A runs eye outer corner → nasal wing, segment B eye inner corner →
/// mouth corner.
pub fn cheek_segments<T: Scalar>(landmarks: &LandmarkSet<T>) -> CheekSegments<T> {
    cheek_segments_with(landmarks, &SegmentIndices::default())
}

/// Panics if `indices` has not been validated.
pub fn cheek_segments_with<T: Scalar>(landmarks: &LandmarkSet<T>, indices: &SegmentIndices) -> CheekSegments<T> {
    let seg = |(s, e): (usize, usize)| Segment { start: landmarks.point(s), end: landmarks.point(e) };
    CheekSegments { segment_a: seg(indices.a), segment_b: seg(indices.b) }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SamplePoint<T = f64> {
    pub x: T,
    pub y: T,
    pub segment_index: u8,
    pub ordinal: usize,
}

/// `n` evenly spaced points with endpoints included.
pub fn sample_segment<T: Scalar>(
    segment: &Segment<T>,
    n: usize,
    segment_index: u8,
) -> Result<Vec<SamplePoint<T>>, GeometryError> {
    if n < 2 {
        return Err(GeometryError::InvalidCount(n));
    }
    let last = T::from_count(n - 1);
    let (s, e) = (segment.start, segment.end);
    Ok((0..n)
        .map(|i| {
            let (x, y) = if i == 0 {
                (s.x, s.y)
            } else if i == n - 1 {
                (e.x, e.y)
            } else {
                let i = T::from_count(i);
                (s.x + (e.x - s.x) * i / last, s.y + (e.y - s.y) * i / last)
            };
            SamplePoint { x, y, segment_index, ordinal: i }
        })
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplingConfig {
    pub samples_per_segment: usize,
    /// Odd side length of the square averaging window.
    pub patch: usize,
    pub segments: SegmentIndices,
}

impl Default for SamplingConfig {
    fn default() -> Self {
        Self { samples_per_segment: 10, patch: 3, segments: SegmentIndices::default() }
    }
}

impl SamplingConfig {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if self.samples_per_segment < 2 {
            return Err(GeometryError::InvalidCount(self.samples_per_segment));
        }
        if self.patch == 0 || self.patch.is_multiple_of(2) {
            return Err(GeometryError::InvalidPatch(self.patch));
        }
        self.segments.validate()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CheekSample<T = f64> {
    pub point: SamplePoint<T>,
    pub rgb: RgbColor,
}

/// Mean of the `patch × patch` window centred on the rounded, clamped
/// coordinate. Window cells outside the image are dropped; each channel mean
/// is rounded half-up.
pub fn sample_patch<T: Scalar>(image: &PixelGrid, x: T, y: T, patch: usize) -> RgbColor {
    let round_clamp = |v: T, size: usize| -> usize {
        let r = (v + T::lit(0.5)).floor();
        if !(r > T::zero()) {
            0
        } else {
            r.to_usize().unwrap_or(usize::MAX).min(size - 1)
        }
    };
    let cx = round_clamp(x, image.width());
    let cy = round_clamp(y, image.height());
    let half = patch / 2;
    let (x0, x1) = (cx.saturating_sub(half), (cx + half).min(image.width() - 1));
    let (y0, y1) = (cy.saturating_sub(half), (cy + half).min(image.height() - 1));
    let mut sums = [0u64; 3];
    let mut count = 0u64;
    for yy in y0..=y1 {
        for xx in x0..=x1 {
            let c = image.get(xx, yy);
            sums[0] += c.r as u64;
            sums[1] += c.g as u64;
            sums[2] += c.b as u64;
            count += 1;
        }
    }
    let mean = |sum: u64| ((2 * sum + count) / (2 * count)) as u8;
    RgbColor::new(mean(sums[0]), mean(sums[1]), mean(sums[2]))
}

/// Samples segment A ordinals `0..n` followed by segment B ordinals `0..n`.
pub fn sample_cheek<T: Scalar>(
    image: &PixelGrid,
    landmarks: &LandmarkSet<T>,
    config: &SamplingConfig,
) -> Result<Vec<CheekSample<T>>, GeometryError> {
    config.validate()?;
    let segments = cheek_segments_with(landmarks, &config.segments);
    let mut out = Vec::with_capacity(2 * config.samples_per_segment);
    for (index, segment) in segments.as_array().iter().enumerate() {
        for point in sample_segment(segment, config.samples_per_segment, index as u8)? {
            let rgb = sample_patch(image, point.x, point.y, config.patch);
            out.push(CheekSample { point, rgb });
        }
    }
    Ok(out)
}

pub fn sample_cheek_colors<T: Scalar>(
    image: &PixelGrid,
    landmarks: &LandmarkSet<T>,
    config: &SamplingConfig,
) -> Result<Vec<RgbColor>, GeometryError> {
    Ok(sample_cheek(image, landmarks, config)?.into_iter().map(|s| s.rgb).collect())
}
