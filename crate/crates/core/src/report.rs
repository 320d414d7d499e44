//! SVG figures and the on-disk report layout.
//!
//! Renderers are pure functions of their inputs: fixed six-decimal number
//! formatting and a fixed element order make the output bytes stable.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use thiserror::Error;

use crate::color::hsl_to_rgb;
use crate::config::RunConfig;
use crate::metrics::{metrics_csv, CohortMetrics, DistanceMatrix};
use crate::palette::{sort_by_lightness, sort_by_proportion, Palette};
use crate::refsys::{GamutReport, ReferenceSystem};

#[derive(Debug, Error)]
pub enum ReportError {
    #[error("palette {0:?} has no entries")]
    EmptyPalette(String),
    #[error("invalid render spec: {0}")]
    InvalidSpec(String),
    #[error("nothing to report: no cohorts")]
    NoCohorts,
    #[error("cohort id {0:?} cannot be used as a directory name")]
    InvalidCohortId(String),
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum SortMode {
    Proportion,
    Lightness,
}

impl SortMode {
    pub fn apply(self, p: &Palette) -> Palette {
        match self {
            Self::Proportion => sort_by_proportion(p),
            Self::Lightness => sort_by_lightness(p),
        }
    }

    fn caption(self) -> &'static str {
        match self {
            Self::Proportion => "sorted by cluster size",
            Self::Lightness => "sorted by lightness",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RenderSpec {
    pub width: f64,
    pub height: f64,
    pub swatch_gap: f64,
    pub sort_mode: SortMode,
    pub proportional_widths: bool,
}

impl Default for RenderSpec {
    fn default() -> Self {
        Self { width: 800.0, height: 120.0, swatch_gap: 0.0, sort_mode: SortMode::Proportion, proportional_widths: true }
    }
}

impl RenderSpec {
    fn validate(&self) -> Result<(), ReportError> {
        if !(self.width > 0.0 && self.height > 0.0 && self.width.is_finite() && self.height.is_finite()) {
            return Err(ReportError::InvalidSpec(format!("dimensions must be positive, got {}x{}", self.width, self.height)));
        }
        if !(self.swatch_gap >= 0.0) {
            return Err(ReportError::InvalidSpec(format!("gap must be non-negative, got {}", self.swatch_gap)));
        }
        Ok(())
    }
}

/// Escapes text for XML content and attribute values.
fn xml_escape(s: &str) -> String {
    let mut out = String::with_capacity(s.len());
    for ch in s.chars() {
        match ch {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\'' => out.push_str("&apos;"),
            c => out.push(c),
        }
    }
    out
}

fn svg_open(out: &mut String, width: f64, height: f64, title: &str) {
    out.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    let _ = writeln!(
        out,
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" width=\"{width:.6}\" height=\"{height:.6}\" viewBox=\"0 0 {width:.6} {height:.6}\">"
    );
    let _ = writeln!(out, "  <title>{}</title>", xml_escape(title));
}

/// One `swatch` rectangle per palette entry, left to right in sort order.
pub fn render_palette_strip(p: &Palette, spec: &RenderSpec) -> Result<String, ReportError> {
    spec.validate()?;
    if p.entries.is_empty() {
        return Err(ReportError::EmptyPalette(p.cohort_id.clone()));
    }
    let sorted = spec.sort_mode.apply(p);
    let n = sorted.entries.len();
    let available = spec.width - spec.swatch_gap * (n - 1) as f64;
    if available <= 0.0 {
        return Err(ReportError::InvalidSpec(format!("{n} swatches with gap {} do not fit in width {}", spec.swatch_gap, spec.width)));
    }
    let total: f64 = sorted.entries.iter().map(|e| e.proportion).sum();

    let mut out = String::new();
    svg_open(&mut out, spec.width, spec.height, &format!("{} palette, {}", p.cohort_id, spec.sort_mode.caption()));
    let mut x = 0.0;
    for (i, e) in sorted.entries.iter().enumerate() {
        let w = if i == n - 1 {
            spec.width - x
        } else if spec.proportional_widths && total > 0.0 {
            available * e.proportion / total
        } else {
            available / n as f64
        };
        let c = e.centroid_hsl;
        let _ = writeln!(
            out,
            "  <rect class=\"swatch\" x=\"{x:.6}\" y=\"0.000000\" width=\"{w:.6}\" height=\"{:.6}\" fill=\"{}\" data-h=\"{:.6}\" data-s=\"{:.6}\" data-l=\"{:.6}\" data-proportion=\"{:.6}\"/>",
            spec.height,
            hsl_to_rgb(c).hex(),
            c.h,
            c.s,
            c.l,
            e.proportion
        );
        x += w + spec.swatch_gap;
    }
    out.push_str("</svg>\n");
    Ok(out)
}

/// Stroke colors distinguishing cohorts on the shared figures.
const COHORT_STROKES: [&str; 8] = ["#1b7837", "#5aae61", "#00441b", "#a6dba0", "#238b45", "#41ab5d", "#006d2c", "#74c476"];
const REFERENCE_STROKE: &str = "#b2182b";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FigureSpec {
    pub width: f64,
    pub height: f64,
    pub margin: f64,
    pub marker_radius: f64,
}

impl Default for FigureSpec {
    fn default() -> Self {
        Self { width: 720.0, height: 480.0, margin: 60.0, marker_radius: 4.0 }
    }
}

impl FigureSpec {
    fn validate(&self) -> Result<(), ReportError> {
        if !(self.width > 2.0 * self.margin && self.height > 2.0 * self.margin && self.margin >= 0.0) {
            return Err(ReportError::InvalidSpec(format!(
                "figure {}x{} with margin {} leaves no plot area",
                self.width, self.height, self.margin
            )));
        }
        Ok(())
    }

    /// Hue in `[0, 360]` → x, lightness in `[0, 1]` → y (top is 1).
    pub fn scatter_position(&self, h: f64, l: f64) -> (f64, f64) {
        let plot_w = self.width - 2.0 * self.margin;
        let plot_h = self.height - 2.0 * self.margin;
        (self.margin + h / 360.0 * plot_w, self.margin + (1.0 - l) * plot_h)
    }
}

fn legend(out: &mut String, palettes: &[Palette], reference: Option<&ReferenceSystem>, x: f64, y: f64) {
    let _ = writeln!(out, "  <g class=\"legend\">");
    let mut row = 0.0;
    for (i, p) in palettes.iter().enumerate() {
        let stroke = COHORT_STROKES[i % COHORT_STROKES.len()];
        let _ = writeln!(
            out,
            "    <rect class=\"legend-swatch\" x=\"{x:.6}\" y=\"{:.6}\" width=\"10.000000\" height=\"10.000000\" fill=\"none\" stroke=\"{stroke}\" stroke-width=\"2\"/>",
            y + row
        );
        let _ = writeln!(
            out,
            "    <text x=\"{:.6}\" y=\"{:.6}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>",
            x + 16.0,
            y + row + 9.0,
            xml_escape(&p.cohort_id)
        );
        row += 16.0;
    }
    if let Some(r) = reference {
        let _ = writeln!(
            out,
            "    <rect class=\"legend-swatch\" x=\"{x:.6}\" y=\"{:.6}\" width=\"10.000000\" height=\"10.000000\" fill=\"none\" stroke=\"{REFERENCE_STROKE}\" stroke-width=\"2\"/>",
            y + row
        );
        let _ = writeln!(
            out,
            "    <text x=\"{:.6}\" y=\"{:.6}\" font-size=\"11\" font-family=\"sans-serif\">{}</text>",
            x + 16.0,
            y + row + 9.0,
            xml_escape(&r.name)
        );
    }
    let _ = writeln!(out, "  </g>");
}

fn reference_marker(out: &mut String, label: &str, fill: &str, cx: f64, cy: f64, r: f64) {
    let _ = writeln!(
        out,
        "  <rect class=\"ref-marker\" data-label=\"{}\" x=\"{:.6}\" y=\"{:.6}\" width=\"{:.6}\" height=\"{:.6}\" fill=\"{fill}\" stroke=\"{REFERENCE_STROKE}\" stroke-width=\"1.5\"/>",
        xml_escape(label),
        cx - r,
        cy - r,
        2.0 * r,
        2.0 * r
    );
}

/// Hue (x, degrees) against lightness (y, fraction). Palette entries are
/// `cohort-marker` circles, reference colors `ref-marker` squares.
pub fn render_scatter(palettes: &[Palette], reference: Option<&ReferenceSystem>, spec: &FigureSpec) -> Result<String, ReportError> {
    spec.validate()?;
    let mut out = String::new();
    svg_open(&mut out, spec.width, spec.height, "Palette hue against lightness");
    let (left, top) = spec.scatter_position(0.0, 1.0);
    let (right, bottom) = spec.scatter_position(360.0, 0.0);

    let _ = writeln!(out, "  <g class=\"axes\" stroke=\"#333333\" stroke-width=\"1\">");
    let _ = writeln!(out, "    <line x1=\"{left:.6}\" y1=\"{bottom:.6}\" x2=\"{right:.6}\" y2=\"{bottom:.6}\"/>");
    let _ = writeln!(out, "    <line x1=\"{left:.6}\" y1=\"{bottom:.6}\" x2=\"{left:.6}\" y2=\"{top:.6}\"/>");
    let _ = writeln!(out, "  </g>");
    let _ = writeln!(out, "  <g class=\"ticks\" font-size=\"10\" font-family=\"sans-serif\" fill=\"#333333\">");
    for h in [0.0, 90.0, 180.0, 270.0, 360.0] {
        let (x, _) = spec.scatter_position(h, 0.0);
        let _ = writeln!(out, "    <text x=\"{x:.6}\" y=\"{:.6}\" text-anchor=\"middle\">{h:.0}</text>", bottom + 14.0);
    }
    for l in [0.0, 0.25, 0.5, 0.75, 1.0] {
        let (_, y) = spec.scatter_position(0.0, l);
        let _ = writeln!(out, "    <text x=\"{:.6}\" y=\"{:.6}\" text-anchor=\"end\">{l:.2}</text>", left - 6.0, y + 3.0);
    }
    let _ = writeln!(out, "  </g>");
    let _ = writeln!(
        out,
        "  <text class=\"axis-label\" x=\"{:.6}\" y=\"{:.6}\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">Hue (degrees, 0-360)</text>",
        (left + right) / 2.0,
        spec.height - 12.0
    );
    let _ = writeln!(
        out,
        "  <text class=\"axis-label\" transform=\"translate(14.000000 {:.6}) rotate(-90)\" text-anchor=\"middle\" font-size=\"12\" font-family=\"sans-serif\">Lightness (0-1)</text>",
        (top + bottom) / 2.0
    );

    if let Some(r) = reference {
        for c in &r.colors {
            let (x, y) = spec.scatter_position(c.hsl.h, c.hsl.l);
            reference_marker(&mut out, &c.label, &hsl_to_rgb(c.hsl).hex(), x, y, spec.marker_radius);
        }
    }
    for (i, p) in palettes.iter().enumerate() {
        let stroke = COHORT_STROKES[i % COHORT_STROKES.len()];
        for e in &p.entries {
            let c = e.centroid_hsl;
            let (x, y) = spec.scatter_position(c.h, c.l);
            let _ = writeln!(
                out,
                "  <circle class=\"cohort-marker\" data-cohort=\"{}\" cx=\"{x:.6}\" cy=\"{y:.6}\" r=\"{:.6}\" fill=\"{}\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>",
                xml_escape(&p.cohort_id),
                spec.marker_radius,
                hsl_to_rgb(c).hex()
            );
        }
    }
    legend(&mut out, palettes, reference, right - 90.0, top);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Polar projection of the HSL cylinder: angle is hue, radius saturation,
/// and marker size grows with lightness.
pub fn render_polar(palettes: &[Palette], reference: Option<&ReferenceSystem>, spec: &FigureSpec) -> Result<String, ReportError> {
    spec.validate()?;
    let mut out = String::new();
    svg_open(&mut out, spec.width, spec.height, "Palette hue and saturation (polar)");
    let cx = spec.width / 2.0;
    let cy = spec.height / 2.0;
    let radius = (spec.width.min(spec.height) / 2.0 - spec.margin).max(1.0);
    let position = |h: f64, s: f64| {
        let theta = h.to_radians();
        (cx + s * radius * theta.cos(), cy - s * radius * theta.sin())
    };
    let size = |l: f64| spec.marker_radius * (0.5 + l);

    let _ = writeln!(out, "  <g class=\"grid\" fill=\"none\" stroke=\"#cccccc\" stroke-width=\"1\">");
    for ring in [0.25, 0.5, 0.75, 1.0] {
        let _ = writeln!(out, "    <circle cx=\"{cx:.6}\" cy=\"{cy:.6}\" r=\"{:.6}\"/>", ring * radius);
    }
    for h in [0.0, 90.0, 180.0, 270.0] {
        let (x, y) = position(h, 1.0);
        let _ = writeln!(out, "    <line x1=\"{cx:.6}\" y1=\"{cy:.6}\" x2=\"{x:.6}\" y2=\"{y:.6}\"/>");
    }
    let _ = writeln!(out, "  </g>");

    if let Some(r) = reference {
        for c in &r.colors {
            let (x, y) = position(c.hsl.h, c.hsl.s);
            reference_marker(&mut out, &c.label, &hsl_to_rgb(c.hsl).hex(), x, y, size(c.hsl.l));
        }
    }
    for (i, p) in palettes.iter().enumerate() {
        let stroke = COHORT_STROKES[i % COHORT_STROKES.len()];
        for e in &p.entries {
            let c = e.centroid_hsl;
            let (x, y) = position(c.h, c.s);
            let _ = writeln!(
                out,
                "  <circle class=\"cohort-marker\" data-cohort=\"{}\" cx=\"{x:.6}\" cy=\"{y:.6}\" r=\"{:.6}\" fill=\"{}\" stroke=\"{stroke}\" stroke-width=\"1.5\"/>",
                xml_escape(&p.cohort_id),
                size(c.l),
                hsl_to_rgb(c).hex()
            );
        }
    }
    legend(&mut out, palettes, reference, spec.width - spec.margin - 40.0, 10.0);
    out.push_str("</svg>\n");
    Ok(out)
}

/// Everything reported for one cohort.
#[derive(Debug, Clone, PartialEq)]
pub struct CohortReport {
    pub cohort_id: String,
    pub palette: Palette,
    pub metrics: CohortMetrics,
    pub gamut: Option<GamutReport>,
    pub config_echo: serde_json::Value,
}

/// Per-cohort provenance recorded in the run manifest.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CohortInputSummary {
    pub id: String,
    pub display_name: String,
    pub root: String,
    pub images_used: usize,
    pub images_skipped: usize,
    pub orphan_images: usize,
    pub samples_total: usize,
    pub samples_gated: usize,
    pub kmeans_iterations: usize,
    pub kmeans_converged: bool,
    pub palette_collapsed: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SkipRecord {
    pub image: String,
    pub reason: String,
}

/// Provenance for `manifest.json`. Only `generated_at_unix` varies between
/// identical runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RunInfo {
    pub config: RunConfig,
    pub cohorts: Vec<CohortInputSummary>,
    pub skipped: Vec<SkipRecord>,
    pub generated_at_unix: u64,
}

pub const MANIFEST_FILE: &str = "manifest.json";
pub const METRICS_FILE: &str = "metrics.csv";
pub const DISTANCES_FILE: &str = "distances.csv";
pub const SCATTER_FILE: &str = "scatter.svg";
pub const POLAR_FILE: &str = "polar.svg";
pub const PALETTE_FILE: &str = "palette.json";
pub const STRIP_BY_SIZE_FILE: &str = "strip_by_size.svg";
pub const STRIP_BY_LIGHTNESS_FILE: &str = "strip_by_lightness.svg";
pub const GAMUT_FILE: &str = "gamut.json";

fn safe_dir_name(id: &str) -> bool {
    !id.is_empty() && id != "." && id != ".." && !id.contains(['/', '\\', '\0'])
}

/// Renders every output file in memory, keyed by path relative to the output
/// directory, in a fixed order.
pub fn render_outputs(
    reports: &[CohortReport],
    matrix: Option<&DistanceMatrix>,
    reference: Option<&ReferenceSystem>,
    info: &RunInfo,
) -> Result<Vec<(PathBuf, Vec<u8>)>, ReportError> {
    if reports.is_empty() {
        return Err(ReportError::NoCohorts);
    }
    let hash = info.config.hash();
    let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
    for r in reports {
        if !safe_dir_name(&r.cohort_id) {
            return Err(ReportError::InvalidCohortId(r.cohort_id.clone()));
        }
        let dir = PathBuf::from(&r.cohort_id);
        files.push((dir.join(PALETTE_FILE), r.palette.to_json(Some(&hash)).into_bytes()));
        let by_size = RenderSpec { sort_mode: SortMode::Proportion, ..RenderSpec::default() };
        files.push((dir.join(STRIP_BY_SIZE_FILE), render_palette_strip(&r.palette, &by_size)?.into_bytes()));
        let by_lightness = RenderSpec { sort_mode: SortMode::Lightness, ..RenderSpec::default() };
        files.push((dir.join(STRIP_BY_LIGHTNESS_FILE), render_palette_strip(&r.palette, &by_lightness)?.into_bytes()));
        if let Some(g) = &r.gamut {
            files.push((dir.join(GAMUT_FILE), g.to_json().into_bytes()));
        }
    }
    let metrics: Vec<CohortMetrics> = reports.iter().map(|r| r.metrics.clone()).collect();
    files.push((PathBuf::from(METRICS_FILE), metrics_csv(&metrics).into_bytes()));
    if let Some(m) = matrix {
        files.push((PathBuf::from(DISTANCES_FILE), m.to_csv().into_bytes()));
    }
    let palettes: Vec<Palette> = reports.iter().map(|r| r.palette.clone()).collect();
    let figure = FigureSpec::default();
    files.push((PathBuf::from(SCATTER_FILE), render_scatter(&palettes, reference, &figure)?.into_bytes()));
    files.push((PathBuf::from(POLAR_FILE), render_polar(&palettes, reference, &figure)?.into_bytes()));

    let mut listed: Vec<String> = files.iter().map(|(p, _)| p.to_string_lossy().replace('\\', "/")).collect();
    listed.push(MANIFEST_FILE.to_owned());
    listed.sort();
    let manifest = serde_json::json!({
        "tool": env!("CARGO_PKG_NAME"),
        "version": env!("CARGO_PKG_VERSION"),
        "generated_at_unix": info.generated_at_unix,
        "config_hash": hash,
        "config": info.config.to_json(),
        "cohorts": info.cohorts,
        "skipped": info.skipped,
        "files": listed,
    });
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest is serializable");
    text.push('\n');
    files.push((PathBuf::from(MANIFEST_FILE), text.into_bytes()));
    Ok(files)
}

/// Writes the report tree under `out_dir` and returns the written paths.
///
/// All content is rendered before the first write. If any write fails, the
/// files and directories created by this call are removed again.
pub fn emit_report(
    reports: &[CohortReport],
    matrix: Option<&DistanceMatrix>,
    reference: Option<&ReferenceSystem>,
    info: &RunInfo,
    out_dir: &Path,
) -> Result<Vec<PathBuf>, ReportError> {
    let files = render_outputs(reports, matrix, reference, info)?;
    let mut created_dirs: Vec<PathBuf> = Vec::new();
    let mut written: Vec<PathBuf> = Vec::new();

    let result = (|| -> Result<(), ReportError> {
        let ensure_dir = |dir: &Path, created: &mut Vec<PathBuf>| -> Result<(), ReportError> {
            let mut missing = Vec::new();
            let mut cur = Some(dir);
            while let Some(d) = cur {
                if d.as_os_str().is_empty() || d.exists() {
                    break;
                }
                missing.push(d.to_path_buf());
                cur = d.parent();
            }
            for d in missing.into_iter().rev() {
                fs::create_dir(&d).map_err(|source| ReportError::Io { path: d.clone(), source })?;
                created.push(d);
            }
            Ok(())
        };
        ensure_dir(out_dir, &mut created_dirs)?;
        for (rel, bytes) in &files {
            let path = out_dir.join(rel);
            if let Some(parent) = path.parent() {
                ensure_dir(parent, &mut created_dirs)?;
            }
            let tmp = path.with_extension("partial");
            fs::write(&tmp, bytes).map_err(|source| ReportError::Io { path: tmp.clone(), source })?;
            if let Err(source) = fs::rename(&tmp, &path) {
                let _ = fs::remove_file(&tmp);
                return Err(ReportError::Io { path: path.clone(), source });
            }
            written.push(path);
        }
        Ok(())
    })();

    if let Err(e) = result {
        for p in written.iter().rev() {
            let _ = fs::remove_file(p);
        }
        for d in created_dirs.iter().rev() {
            let _ = fs::remove_dir(d);
        }
        return Err(e);
    }
    Ok(written)
}
