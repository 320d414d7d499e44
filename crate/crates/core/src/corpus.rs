//! Cohort manifests, directory scanning, image decoding and landmark sidecars.

use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::color::RgbColor;
use crate::geometry::{LandmarkSet, Point, LANDMARK_COUNT};

#[derive(Debug, Error)]
pub enum CorpusError {
    #[error("missing file {0}")]
    MissingFile(PathBuf),
    #[error("{path}:{line}: {field}: {message}")]
    Parse { path: PathBuf, line: usize, field: String, message: String },
    #[error("duplicate cohort id {0:?}")]
    DuplicateCohortId(String),
    #[error("unknown cohort {0:?}")]
    UnknownCohort(String),
    #[error("cannot decode {path}: {message}")]
    Decode { path: PathBuf, message: String },
    #[error("{path}: expected {expected} landmarks, found {found}", expected = LANDMARK_COUNT)]
    WrongPointCount { path: PathBuf, found: usize },
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

impl CorpusError {
    fn parse(path: &Path, line: usize, field: impl Into<String>, message: impl Into<String>) -> Self {
        Self::Parse { path: path.to_path_buf(), line, field: field.into(), message: message.into() }
    }
}

/// One named image group. `root` is resolved against the manifest's directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Cohort {
    pub id: String,
    pub root: PathBuf,
    pub display_name: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CohortManifest {
    pub version: u32,
    pub cohorts: Vec<Cohort>,
}

impl CohortManifest {
    pub fn cohort(&self, id: &str) -> Option<&Cohort> {
        self.cohorts.iter().find(|c| c.id == id)
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.cohorts.iter().map(|c| c.id.as_str())
    }
}

#[derive(Deserialize)]
struct RawManifest {
    version: u32,
    cohorts: Vec<RawCohort>,
}

#[derive(Deserialize)]
struct RawCohort {
    id: String,
    root: String,
    #[serde(default)]
    name: String,
}

pub const MANIFEST_VERSION: u32 = 1;

pub fn load_manifest(path: &Path) -> Result<CohortManifest, CorpusError> {
    if !path.is_file() {
        return Err(CorpusError::MissingFile(path.to_path_buf()));
    }
    let text = fs::read_to_string(path).map_err(|source| CorpusError::Io { path: path.to_path_buf(), source })?;
    let base = path.parent().unwrap_or_else(|| Path::new(""));
    parse_manifest(&text, path, base)
}

/// Parses manifest JSON. `origin` is only used in error messages; relative
/// cohort roots are joined onto `base_dir`.
pub fn parse_manifest(text: &str, origin: &Path, base_dir: &Path) -> Result<CohortManifest, CorpusError> {
    let raw: RawManifest = serde_json::from_str(text)
        .map_err(|e| CorpusError::parse(origin, e.line(), "manifest", e.to_string()))?;
    if raw.version != MANIFEST_VERSION {
        return Err(CorpusError::parse(
            origin,
            0,
            "version",
            format!("unsupported manifest version {}", raw.version),
        ));
    }
    if raw.cohorts.is_empty() {
        return Err(CorpusError::parse(origin, 0, "cohorts", "at least one cohort is required"));
    }
    let mut seen = HashSet::new();
    let mut cohorts = Vec::with_capacity(raw.cohorts.len());
    for (i, c) in raw.cohorts.into_iter().enumerate() {
        if c.id.trim().is_empty() {
            return Err(CorpusError::parse(origin, 0, format!("cohorts[{i}].id"), "cohort id must be non-empty"));
        }
        if !seen.insert(c.id.clone()) {
            return Err(CorpusError::DuplicateCohortId(c.id));
        }
        let root = PathBuf::from(&c.root);
        let root = if root.is_absolute() { root } else { base_dir.join(root) };
        let display_name = if c.name.is_empty() { c.id.clone() } else { c.name };
        cohorts.push(Cohort { id: c.id, root, display_name });
    }
    Ok(CohortManifest { version: raw.version, cohorts })
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ImageRecord {
    pub cohort_id: String,
    pub image_path: PathBuf,
    pub landmark_path: PathBuf,
    /// `<cohort_id>/<image file name>`; unique within a corpus.
    pub stable_id: String,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct CohortScan {
    pub records: Vec<ImageRecord>,
    /// Images without a landmark sidecar. They are skipped, not fatal.
    pub orphans: Vec<PathBuf>,
}

const IMAGE_EXTENSIONS: [&str; 3] = ["png", "jpg", "jpeg"];
pub const JSON_SIDECAR_SUFFIX: &str = ".landmarks.json";
pub const PTS_SIDECAR_SUFFIX: &str = ".pts";

fn is_image(path: &Path) -> bool {
    path.extension()
        .and_then(|e| e.to_str())
        .is_some_and(|e| IMAGE_EXTENSIONS.iter().any(|x| e.eq_ignore_ascii_case(x)))
}

/// Finds the sidecar for an image, preferring the JSON form over `.pts`.
pub fn sidecar_for(image_path: &Path) -> Option<PathBuf> {
    let stem = image_path.file_stem()?.to_str()?;
    let dir = image_path.parent()?;
    [JSON_SIDECAR_SUFFIX, PTS_SIDECAR_SUFFIX]
        .iter()
        .map(|suffix| dir.join(format!("{stem}{suffix}")))
        .find(|p| p.is_file())
}

/// Lists image/sidecar pairs directly inside the cohort root, sorted by
/// image path.
pub fn scan_cohort(manifest: &CohortManifest, cohort_id: &str) -> Result<CohortScan, CorpusError> {
    let cohort = manifest.cohort(cohort_id).ok_or_else(|| CorpusError::UnknownCohort(cohort_id.to_owned()))?;
    let entries = match fs::read_dir(&cohort.root) {
        Ok(entries) => entries,
        Err(e) if e.kind() == std::io::ErrorKind::NotFound => {
            return Err(CorpusError::MissingFile(cohort.root.clone()))
        }
        Err(source) => return Err(CorpusError::Io { path: cohort.root.clone(), source }),
    };
    let mut images = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|source| CorpusError::Io { path: cohort.root.clone(), source })?;
        let path = entry.path();
        if path.is_file() && is_image(&path) {
            images.push(path);
        }
    }
    images.sort();

    let mut scan = CohortScan::default();
    for image_path in images {
        match sidecar_for(&image_path) {
            Some(landmark_path) => {
                let file_name = image_path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
                scan.records.push(ImageRecord {
                    cohort_id: cohort.id.clone(),
                    stable_id: format!("{}/{}", cohort.id, file_name),
                    image_path,
                    landmark_path,
                });
            }
            None => scan.orphans.push(image_path),
        }
    }
    Ok(scan)
}

/// Row-major 8-bit RGB raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PixelGrid {
    width: usize,
    height: usize,
    pixels: Vec<RgbColor>,
}

impl PixelGrid {
    /// Returns `None` unless `width, height ≥ 1` and `pixels.len() == width × height`.
    pub fn new(width: usize, height: usize, pixels: Vec<RgbColor>) -> Option<Self> {
        (width >= 1 && height >= 1 && pixels.len() == width * height).then_some(Self { width, height, pixels })
    }

    pub fn filled(width: usize, height: usize, color: RgbColor) -> Option<Self> {
        Self::new(width, height, vec![color; width.checked_mul(height)?])
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> RgbColor) -> Option<Self> {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y));
            }
        }
        Self::new(width, height, pixels)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[RgbColor] {
        &self.pixels
    }

    /// Panics when out of bounds.
    pub fn get(&self, x: usize, y: usize) -> RgbColor {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        self.pixels[y * self.width + x]
    }

    pub fn set(&mut self, x: usize, y: usize, color: RgbColor) {
        assert!(x < self.width && y < self.height, "pixel ({x}, {y}) out of bounds");
        self.pixels[y * self.width + x] = color;
    }

    pub fn to_rgb_image(&self) -> image::RgbImage {
        let raw = self.pixels.iter().flat_map(|c| [c.r, c.g, c.b]).collect();
        image::RgbImage::from_raw(self.width as u32, self.height as u32, raw).expect("dimensions checked at construction")
    }
}

/// Blends a straight-alpha channel value over opaque white, rounding half-up.
fn over_white(channel: u8, alpha: u8) -> u8 {
    let (c, a) = (channel as u32, alpha as u32);
    let blended = c * a + 255 * (255 - a);
    ((2 * blended + 255) / 510) as u8
}

pub fn decode_image_bytes(bytes: &[u8], origin: &Path) -> Result<PixelGrid, CorpusError> {
    let decode_err = |e: image::ImageError| CorpusError::Decode { path: origin.to_path_buf(), message: e.to_string() };
    let img = image::load_from_memory(bytes).map_err(decode_err)?;
    let rgba = img.to_rgba8();
    let (w, h) = rgba.dimensions();
    let pixels = rgba
        .pixels()
        .map(|p| {
            let [r, g, b, a] = p.0;
            RgbColor::new(over_white(r, a), over_white(g, a), over_white(b, a))
        })
        .collect();
    PixelGrid::new(w as usize, h as usize, pixels).ok_or_else(|| CorpusError::Decode {
        path: origin.to_path_buf(),
        message: "image has zero area".into(),
    })
}

pub fn load_image(record: &ImageRecord) -> Result<PixelGrid, CorpusError> {
    let path = &record.image_path;
    let bytes = fs::read(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile(path.clone()),
        _ => CorpusError::Io { path: path.clone(), source },
    })?;
    decode_image_bytes(&bytes, path)
}

pub fn load_landmarks(record: &ImageRecord) -> Result<LandmarkSet, CorpusError> {
    let path = &record.landmark_path;
    let text = fs::read_to_string(path).map_err(|source| match source.kind() {
        std::io::ErrorKind::NotFound => CorpusError::MissingFile(path.clone()),
        _ => CorpusError::Io { path: path.clone(), source },
    })?;
    let is_pts = path.extension().is_some_and(|e| e.eq_ignore_ascii_case("pts"));
    if is_pts {
        parse_pts(&text, path)
    } else {
        parse_landmarks_json(&text, path)
    }
}

#[derive(Deserialize)]
struct RawLandmarks {
    points: Vec<[f64; 2]>,
}

fn finish_landmarks(points: Vec<[f64; 2]>, origin: &Path) -> Result<LandmarkSet, CorpusError> {
    if points.len() != LANDMARK_COUNT {
        return Err(CorpusError::WrongPointCount { path: origin.to_path_buf(), found: points.len() });
    }
    if let Some(i) = points.iter().position(|p| !p[0].is_finite() || !p[1].is_finite()) {
        return Err(CorpusError::parse(origin, 0, format!("points[{i}]"), "non-finite coordinate"));
    }
    let points = points.into_iter().map(|[x, y]| Point::new(x, y)).collect();
    Ok(LandmarkSet::new(points).expect("count and finiteness checked"))
}

/// `{"points": [[x, y], ...]}` with exactly 68 entries.
pub fn parse_landmarks_json(text: &str, origin: &Path) -> Result<LandmarkSet, CorpusError> {
    let raw: RawLandmarks =
        serde_json::from_str(text).map_err(|e| CorpusError::parse(origin, e.line(), "points", e.to_string()))?;
    finish_landmarks(raw.points, origin)
}

/// iBUG `.pts`: `version: 1`, `n_points: N`, then `N` `x y` lines in braces.
pub fn parse_pts(text: &str, origin: &Path) -> Result<LandmarkSet, CorpusError> {
    let mut declared = None;
    let mut in_block = false;
    let mut closed = false;
    let mut points = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line_no = i + 1;
        let line = raw_line.trim();
        if line.is_empty() {
            continue;
        }
        if closed {
            return Err(CorpusError::parse(origin, line_no, "points", "content after closing brace"));
        }
        if in_block {
            if line == "}" {
                in_block = false;
                closed = true;
                continue;
            }
            let mut parts = line.split_whitespace();
            let (Some(x), Some(y), None) = (parts.next(), parts.next(), parts.next()) else {
                return Err(CorpusError::parse(origin, line_no, "points", format!("expected `x y`, got {line:?}")));
            };
            let parse = |v: &str| {
                v.parse::<f64>().map_err(|_| CorpusError::parse(origin, line_no, "points", format!("bad number {v:?}")))
            };
            points.push([parse(x)?, parse(y)?]);
        } else if line == "{" {
            in_block = true;
        } else if let Some((key, value)) = line.split_once(':') {
            match key.trim() {
                "version" => {}
                "n_points" => {
                    let n = value.trim().parse::<usize>().map_err(|_| {
                        CorpusError::parse(origin, line_no, "n_points", format!("bad count {:?}", value.trim()))
                    })?;
                    declared = Some(n);
                }
                other => return Err(CorpusError::parse(origin, line_no, other, "unknown header key")),
            }
        } else {
            return Err(CorpusError::parse(origin, line_no, "header", format!("unexpected line {line:?}")));
        }
    }
    if !closed {
        return Err(CorpusError::parse(origin, 0, "points", "missing brace-delimited point block"));
    }
    match declared {
        Some(n) if n != points.len() => Err(CorpusError::parse(
            origin,
            0,
            "n_points",
            format!("header declares {n} points but block has {}", points.len()),
        )),
        Some(_) => finish_landmarks(points, origin),
        None => Err(CorpusError::parse(origin, 0, "n_points", "missing n_points header")),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pts_text(n: usize) -> String {
        let mut s = format!("version: 1\nn_points: {n}\n{{\n");
        for i in 0..n {
            s.push_str(&format!("{}.5 {}\n", i, 2 * i));
        }
        s.push_str("}\n");
        s
    }

    #[test]
    fn manifest_preserves_order_and_defaults_name() {
        let text = r#"{"version":1,"cohorts":[
            {"id":"kr","root":"data/kr","name":"South Korea"},
            {"id":"cn","root":"data/cn","name":"China"},
            {"id":"th","root":"/abs/th","name":"Thailand"},
            {"id":"jp","root":"data/jp","name":""}]}"#;
        let m = parse_manifest(text, Path::new("m.json"), Path::new("/base")).unwrap();
        assert_eq!(m.ids().collect::<Vec<_>>(), ["kr", "cn", "th", "jp"]);
        assert_eq!(m.cohorts[0].root, PathBuf::from("/base/data/kr"));
        assert_eq!(m.cohorts[2].root, PathBuf::from("/abs/th"));
        assert_eq!(m.cohorts[3].display_name, "jp");
    }

    #[test]
    fn manifest_errors() {
        let dup = r#"{"version":1,"cohorts":[{"id":"kr","root":"a"},{"id":"kr","root":"b"}]}"#;
        assert!(matches!(parse_manifest(dup, Path::new("m"), Path::new("")), Err(CorpusError::DuplicateCohortId(id)) if id == "kr"));
        let empty = r#"{"version":1,"cohorts":[]}"#;
        assert!(matches!(parse_manifest(empty, Path::new("m"), Path::new("")), Err(CorpusError::Parse { .. })));
        let broken = "{\"version\":1,\n\"cohorts\": [ oops";
        match parse_manifest(broken, Path::new("m"), Path::new("")) {
            Err(CorpusError::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        let blank_id = r#"{"version":1,"cohorts":[{"id":"","root":"a"}]}"#;
        assert!(matches!(parse_manifest(blank_id, Path::new("m"), Path::new("")), Err(CorpusError::Parse { field, .. }) if field == "cohorts[0].id"));
        assert!(matches!(load_manifest(Path::new("/definitely/not/here.json")), Err(CorpusError::MissingFile(_))));
    }

    #[test]
    fn pts_parsing() {
        let set = parse_pts(&pts_text(68), Path::new("a.pts")).unwrap();
        assert_eq!(set.points().len(), 68);
        assert_eq!(set.point(3), Point::new(3.5, 6.0));
        assert!(matches!(parse_pts(&pts_text(65), Path::new("a.pts")), Err(CorpusError::WrongPointCount { found: 65, .. })));
        let bad = pts_text(68).replace("n_points: 68", "n_points: 67");
        assert!(matches!(parse_pts(&bad, Path::new("a.pts")), Err(CorpusError::Parse { .. })));
    }

    #[test]
    fn json_landmarks() {
        let pts: Vec<String> = (0..68).map(|i| format!("[{i}, 1.5]")).collect();
        let text = format!("{{\"points\":[{}]}}", pts.join(","));
        assert_eq!(parse_landmarks_json(&text, Path::new("a")).unwrap().point(67), Point::new(67.0, 1.5));
        let short = format!("{{\"points\":[{}]}}", pts[..65].join(","));
        assert!(matches!(parse_landmarks_json(&short, Path::new("a")), Err(CorpusError::WrongPointCount { found: 65, .. })));
    }

    #[test]
    fn over_white_compositing() {
        assert_eq!(over_white(0, 0), 255);
        assert_eq!(over_white(37, 255), 37);
        assert_eq!(over_white(0, 128), 127);
    }

    #[test]
    fn pixel_grid_invariants() {
        assert!(PixelGrid::new(0, 1, vec![]).is_none());
        assert!(PixelGrid::new(2, 2, vec![RgbColor::BLACK; 3]).is_none());
        let g = PixelGrid::from_fn(3, 2, |x, y| RgbColor::new(x as u8, y as u8, 0)).unwrap();
        assert_eq!(g.get(2, 1), RgbColor::new(2, 1, 0));
    }
}
