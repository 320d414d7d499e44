//! Synthetic landmarked face corpora with known generating colors.
//!
//! Each cohort is painted from one base skin color. Faces vary in position,
//! scale and tone; pixels get small independent noise. Because the base
//! colors are known, the pairwise distances between cohorts are known too,
//! which makes whole-pipeline ordering checks possible.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_distr::{Distribution, Normal};
use rand_xoshiro::Xoshiro256PlusPlus;

use crate::color::{embed, hsl_to_rgb, HslColor, RgbColor};
use crate::corpus::{PixelGrid, JSON_SIDECAR_SUFFIX};
use crate::geometry::{LandmarkSet, Point, LANDMARK_COUNT};
use crate::scalar::euclidean;

/// Face-box-relative 68-point layout (iBUG ordering, image-left eye first).
pub fn template_landmarks() -> [(f64, f64); LANDMARK_COUNT] {
    let mut pts = [(0.0, 0.0); LANDMARK_COUNT];
    // Jaw line 0..=16, ear to ear through the chin.
    for (i, p) in pts.iter_mut().enumerate().take(17) {
        let theta = std::f64::consts::PI * (1.0 - i as f64 / 16.0);
        *p = (0.5 + 0.5 * theta.cos(), 0.3 + 0.7 * theta.sin());
    }
    // Brows 17..=21 and 22..=26.
    for i in 0..5 {
        let t = i as f64 / 4.0;
        let arch = 0.04 * (1.0 - (2.0 * t - 1.0).powi(2));
        pts[17 + i] = (0.12 + 0.30 * t, 0.22 - arch);
        pts[22 + i] = (0.58 + 0.30 * t, 0.22 - arch);
    }
    // Nose bridge 27..=30, lower nose 31..=35.
    for i in 0..4 {
        pts[27 + i] = (0.5, 0.30 + 0.08 * i as f64);
    }
    for i in 0..5 {
        pts[31 + i] = (0.40 + 0.05 * i as f64, 0.60 + if i == 2 { 0.02 } else { 0.0 });
    }
    // Eyes: outer corner, two upper lid points, inner corner, two lower lid points.
    let eye = |x0: f64, x1: f64| {
        let w = x1 - x0;
        [
            (x0, 0.35),
            (x0 + 0.3 * w, 0.32),
            (x0 + 0.7 * w, 0.32),
            (x1, 0.35),
            (x0 + 0.7 * w, 0.38),
            (x0 + 0.3 * w, 0.38),
        ]
    };
    pts[36..42].copy_from_slice(&eye(0.18, 0.38));
    let right = eye(0.82, 0.62);
    pts[42..48].copy_from_slice(&[right[3], right[2], right[1], right[0], right[5], right[4]]);
    // Outer lip 48..=59 then inner lip 60..=67, both starting at the left corner.
    for i in 0..12 {
        let theta = std::f64::consts::PI * (1.0 - i as f64 / 6.0);
        pts[48 + i] = (0.5 + 0.17 * theta.cos(), 0.77 - 0.06 * theta.sin());
    }
    for i in 0..8 {
        let theta = std::f64::consts::PI * (1.0 - i as f64 / 4.0);
        pts[60 + i] = (0.5 + 0.11 * theta.cos(), 0.77 - 0.025 * theta.sin());
    }
    pts
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort {
    pub id: String,
    pub name: String,
    pub base: HslColor<f64>,
    /// Fraction of face-box pixels painted as near-white highlights.
    pub highlight_fraction: f64,
}

impl SynthCohort {
    fn new(id: &str, name: &str, (h, s, l): (f64, f64, f64), highlight_fraction: f64) -> Self {
        Self { id: id.into(), name: name.into(), base: HslColor::new(h, s, l).expect("valid base color"), highlight_fraction }
    }
}

/// Four cohorts. `jp` sits well away from the other three, whose pairwise
/// gaps are all distinct.
pub fn default_cohorts() -> Vec<SynthCohort> {
    vec![
        SynthCohort::new("kr", "Korea (synthetic)", (20.0, 0.42, 0.74), 0.002),
        SynthCohort::new("cn", "China (synthetic)", (18.0, 0.50, 0.71), 0.005),
        SynthCohort::new("th", "Thailand (synthetic)", (26.0, 0.58, 0.66), 0.005),
        SynthCohort::new("jp", "Japan (synthetic)", (6.0, 0.22, 0.75), 0.003),
    ]
}

/// Pairwise embedded distances between cohort base colors, `(i, j, d)` for `i < j`.
pub fn generator_distances(cohorts: &[SynthCohort]) -> Vec<(usize, usize, f64)> {
    let mut out = Vec::new();
    for i in 0..cohorts.len() {
        for j in (i + 1)..cohorts.len() {
            out.push((i, j, euclidean(&embed(cohorts[i].base), &embed(cohorts[j].base))));
        }
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec {
    pub images_per_cohort: usize,
    pub image_size: usize,
    pub seed: u64,
    /// Per-face standard deviation of the tone shift (lightness and saturation).
    pub tone_jitter: f64,
    /// Per-face standard deviation of the hue shift, degrees.
    pub hue_jitter: f64,
    /// Per-pixel uniform channel noise amplitude.
    pub pixel_noise: i16,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self { images_per_cohort: 25, image_size: 64, seed: 2021, tone_jitter: 0.008, hue_jitter: 1.0, pixel_noise: 2 }
    }
}

fn add_noise(c: RgbColor, rng: &mut impl Rng, amplitude: i16) -> RgbColor {
    if amplitude == 0 {
        return c;
    }
    let mut jitter = |v: u8| (v as i16 + rng.random_range(-amplitude..=amplitude)).clamp(0, 255) as u8;
    RgbColor::new(jitter(c.r), jitter(c.g), jitter(c.b))
}

/// One synthetic face: image plus landmarks in pixel coordinates.
pub fn synth_face(cohort: &SynthCohort, spec: &SynthSpec, rng: &mut Xoshiro256PlusPlus) -> (PixelGrid, LandmarkSet) {
    let size = spec.image_size.max(24);
    let tone = Normal::new(0.0, spec.tone_jitter.max(1e-12)).expect("finite sd");
    let hue = Normal::new(0.0, spec.hue_jitter.max(1e-12)).expect("finite sd");
    let base = cohort.base;
    let skin = HslColor::normalized(base.h + hue.sample(rng), base.s + tone.sample(rng), base.l + tone.sample(rng));
    let skin_rgb = hsl_to_rgb(skin);

    let face = rng.random_range(0.68..0.80) * size as f64;
    let ox = rng.random_range(1.0..(size as f64 - face - 1.0));
    let oy = rng.random_range(1.0..(size as f64 - face - 1.0));
    let template = template_landmarks();
    let points: Vec<Point> = template
        .iter()
        .map(|&(x, y)| Point::new(ox + x * face + rng.random_range(-0.3..0.3), oy + y * face + rng.random_range(-0.3..0.3)))
        .collect();

    let background = RgbColor::new(58, 72, 96);
    let eye_color = RgbColor::new(40, 30, 28);
    let lip_color = hsl_to_rgb(HslColor::normalized(352.0, 0.45, 0.45));
    let (fx, fy) = (ox + 0.5 * face, oy + 0.62 * face);
    let (rx, ry) = (0.56 * face, 0.46 * face);
    let in_ellipse = |x: f64, y: f64, cx: f64, cy: f64, ax: f64, ay: f64| {
        let (dx, dy) = ((x - cx) / ax, (y - cy) / ay);
        dx * dx + dy * dy <= 1.0
    };
    let mut grid = PixelGrid::from_fn(size, size, |x, y| {
        let (x, y) = (x as f64, y as f64);
        let in_face = (x >= ox - 1.0 && x <= ox + face + 1.0 && y >= oy + 0.12 * face && y <= oy + 0.62 * face)
            || in_ellipse(x, y, fx, fy, rx, ry);
        if !in_face {
            return background;
        }
        let u = (x - ox) / face;
        let v = (y - oy) / face;
        if in_ellipse(u, v, 0.28, 0.35, 0.045, 0.018) || in_ellipse(u, v, 0.72, 0.35, 0.045, 0.018) {
            eye_color
        } else if in_ellipse(u, v, 0.5, 0.77, 0.10, 0.035) {
            lip_color
        } else {
            skin_rgb
        }
    })
    .expect("positive size");

    // Highlights on the forehead and nose bridge, away from the cheek lines.
    let highlight = RgbColor::new(246, 240, 236);
    let box_pixels = (face * face) as usize;
    let n_highlights = (cohort.highlight_fraction * box_pixels as f64).round() as usize;
    for _ in 0..n_highlights {
        let (u, v) = if rng.random_bool(0.5) {
            (rng.random_range(0.30..0.70), rng.random_range(0.12..0.20))
        } else {
            (rng.random_range(0.46..0.54), rng.random_range(0.30..0.52))
        };
        let (x, y) = ((ox + u * face) as usize, (oy + v * face) as usize);
        if x < size && y < size {
            grid.set(x, y, highlight);
        }
    }

    let pixels: Vec<RgbColor> = grid.pixels().iter().map(|&c| add_noise(c, rng, spec.pixel_noise)).collect();
    let grid = PixelGrid::new(size, size, pixels).expect("same dimensions");
    (grid, LandmarkSet::new(points).expect("68 finite points"))
}

pub fn landmarks_json(landmarks: &LandmarkSet) -> String {
    let pts: Vec<String> = landmarks.points().iter().map(|p| format!("[{:.3}, {:.3}]", p.x, p.y)).collect();
    format!("{{\"points\": [{}]}}\n", pts.join(", "))
}

/// Writes `<dir>/<cohort>/face_NNN.png` plus sidecars and `<dir>/manifest.json`.
/// Returns the manifest path.
pub fn write_corpus(dir: &Path, cohorts: &[SynthCohort], spec: &SynthSpec) -> std::io::Result<PathBuf> {
    fs::create_dir_all(dir)?;
    let mut entries = Vec::new();
    for (ci, cohort) in cohorts.iter().enumerate() {
        let cohort_dir = dir.join(&cohort.id);
        fs::create_dir_all(&cohort_dir)?;
        let mut rng = Xoshiro256PlusPlus::seed_from_u64(spec.seed.wrapping_add(ci as u64 * 7919));
        for i in 0..spec.images_per_cohort {
            let (grid, landmarks) = synth_face(cohort, spec, &mut rng);
            let stem = format!("face_{i:03}");
            grid.to_rgb_image()
                .save_with_format(cohort_dir.join(format!("{stem}.png")), image::ImageFormat::Png)
                .map_err(std::io::Error::other)?;
            fs::write(cohort_dir.join(format!("{stem}{JSON_SIDECAR_SUFFIX}")), landmarks_json(&landmarks))?;
        }
        entries.push(serde_json::json!({"id": cohort.id, "root": cohort.id, "name": cohort.name}));
    }
    let manifest = serde_json::json!({"version": 1, "cohorts": entries});
    let path = dir.join("manifest.json");
    fs::write(&path, serde_json::to_string_pretty(&manifest).expect("serializable") + "\n")?;
    Ok(path)
}
