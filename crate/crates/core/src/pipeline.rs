//! End-to-end cohort analysis: scan, sample, gate, cluster and measure.
//!
//! Per-image work runs on a rayon pool; results are collected in sorted
//! image order so every reduction is independent of the worker count.

use std::path::PathBuf;

use rayon::prelude::*;
use thiserror::Error;

use crate::color::{rgb_to_hsl, HslColor};
use crate::config::{ConfigError, RunConfig};
use crate::corpus::{self, CohortManifest, CorpusError, ImageRecord};
use crate::geometry::{sample_cheek, CheekSample, GeometryError};
use crate::metrics::{
    brightness_ratio, cohort_metrics_from_faces, distance_matrix, texture_delta, CohortMetrics, DistanceMatrix,
    FaceObservation, MetricsError,
};
use crate::palette::{extract_palette, ColorSample, Palette, PaletteError, PaletteOutcome};
use crate::refsys::{gamut_report, GamutReport, ReferenceSystem, RefsysError};

#[derive(Debug, Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Corpus(#[from] CorpusError),
    #[error(transparent)]
    Palette(#[from] PaletteError),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error(transparent)]
    Refsys(#[from] RefsysError),
    #[error("cohort {0:?} has no usable images")]
    EmptyCohort(String),
    #[error("cohort {cohort:?}: all {} samples failed the skin gate ({} too dark, {} outside hue arcs)", .stats.total, .stats.failed_lightness, .stats.failed_hue)]
    AllSamplesGated { cohort: String, stats: GateStats },
    #[error("cannot build worker pool: {0}")]
    Pool(String),
}

/// Why individual samples were rejected by the skin gate. A sample failing
/// both tests is counted under both.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GateStats {
    pub total: usize,
    pub passed: usize,
    pub failed_lightness: usize,
    pub failed_hue: usize,
}

impl GateStats {
    fn merge(&mut self, other: &GateStats) {
        self.total += other.total;
        self.passed += other.passed;
        self.failed_lightness += other.failed_lightness;
        self.failed_hue += other.failed_hue;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FaceAnalysis {
    pub record: ImageRecord,
    pub samples: Vec<CheekSample>,
    pub gated: Vec<ColorSample>,
    pub observation: FaceObservation,
    pub gate: GateStats,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SkippedImage {
    pub image: PathBuf,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortAnalysis {
    pub cohort_id: String,
    pub display_name: String,
    pub root: PathBuf,
    /// Sorted by image path.
    pub faces: Vec<FaceAnalysis>,
    pub skipped: Vec<SkippedImage>,
    pub orphans: Vec<PathBuf>,
    pub gate: GateStats,
}

impl CohortAnalysis {
    pub fn gated_samples(&self) -> Vec<ColorSample> {
        self.faces.iter().flat_map(|f| f.gated.iter().cloned()).collect()
    }
}

fn face_error(e: impl std::fmt::Display) -> String {
    e.to_string()
}

/// Samples, gates and measures one image.
pub fn analyze_face(record: &ImageRecord, config: &RunConfig) -> Result<FaceAnalysis, String> {
    let image = corpus::load_image(record).map_err(face_error)?;
    let landmarks = corpus::load_landmarks(record).map_err(face_error)?;
    let samples = sample_cheek(&image, &landmarks, &config.sampling()).map_err(|e: GeometryError| e.to_string())?;
    let hsl: Vec<HslColor<f64>> = samples.iter().map(|s| rgb_to_hsl(s.rgb)).collect();

    let mut gate = GateStats { total: samples.len(), ..GateStats::default() };
    let mut gated = Vec::new();
    for (sample, color) in samples.iter().zip(&hsl) {
        let light_ok = color.l > config.gate.min_lightness;
        let hue_ok = config.gate.hue_arcs.iter().any(|a| a.contains(color.h));
        gate.failed_lightness += usize::from(!light_ok);
        gate.failed_hue += usize::from(!hue_ok);
        if light_ok && hue_ok {
            gate.passed += 1;
            gated.push(ColorSample::new(
                *color,
                record.stable_id.clone(),
                record.cohort_id.clone(),
                sample.point.segment_index,
                sample.point.ordinal,
            ));
        }
    }

    let n = config.samples_per_segment;
    let texture = texture_delta(&record.stable_id, &[&hsl[..n], &hsl[n..]], config.hue_mode).map_err(face_error)?;
    let brightness = brightness_ratio(&record.stable_id, &image, &landmarks, &config.brightness()).map_err(face_error)?;
    let observation = FaceObservation {
        image_id: record.stable_id.clone(),
        texture,
        brightness,
        gated_saturations: gated.iter().map(|s| s.hsl.s).collect(),
    };
    Ok(FaceAnalysis { record: record.clone(), samples, gated, observation, gate })
}

/// Worker pool for per-image work. `None` uses rayon's default size.
pub fn build_pool(jobs: Option<usize>) -> Result<rayon::ThreadPool, PipelineError> {
    let mut builder = rayon::ThreadPoolBuilder::new();
    if let Some(n) = jobs {
        builder = builder.num_threads(n.max(1));
    }
    builder.build().map_err(|e| PipelineError::Pool(e.to_string()))
}

pub fn analyze_cohort(
    manifest: &CohortManifest,
    cohort_id: &str,
    config: &RunConfig,
    pool: &rayon::ThreadPool,
) -> Result<CohortAnalysis, PipelineError> {
    let cohort = manifest.cohort(cohort_id).ok_or_else(|| CorpusError::UnknownCohort(cohort_id.to_owned()))?;
    let scan = corpus::scan_cohort(manifest, cohort_id)?;
    let results: Vec<Result<FaceAnalysis, String>> =
        pool.install(|| scan.records.par_iter().map(|r| analyze_face(r, config)).collect());

    let mut faces = Vec::new();
    let mut skipped = Vec::new();
    let mut gate = GateStats::default();
    for (record, result) in scan.records.iter().zip(results) {
        match result {
            Ok(face) => {
                gate.merge(&face.gate);
                faces.push(face);
            }
            Err(reason) => skipped.push(SkippedImage { image: record.image_path.clone(), reason }),
        }
    }
    Ok(CohortAnalysis {
        cohort_id: cohort.id.clone(),
        display_name: cohort.display_name.clone(),
        root: cohort.root.clone(),
        faces,
        skipped,
        orphans: scan.orphans,
        gate,
    })
}

pub fn palette_for(analysis: &CohortAnalysis, config: &RunConfig) -> Result<PaletteOutcome, PipelineError> {
    if analysis.faces.is_empty() {
        return Err(PipelineError::EmptyCohort(analysis.cohort_id.clone()));
    }
    let samples = analysis.gated_samples();
    if samples.is_empty() {
        return Err(PipelineError::AllSamplesGated { cohort: analysis.cohort_id.clone(), stats: analysis.gate });
    }
    Ok(extract_palette(&analysis.cohort_id, &samples, &config.palette_params())?)
}

pub fn metrics_for(analysis: &CohortAnalysis) -> Result<CohortMetrics, PipelineError> {
    if analysis.faces.is_empty() {
        return Err(PipelineError::EmptyCohort(analysis.cohort_id.clone()));
    }
    let faces: Vec<FaceObservation> = analysis.faces.iter().map(|f| f.observation.clone()).collect();
    Ok(cohort_metrics_from_faces(&analysis.cohort_id, &faces)?)
}

/// Scan → sample → gate → embed → k-means for one cohort.
pub fn build_palette(manifest: &CohortManifest, cohort_id: &str, config: &RunConfig) -> Result<Palette, PipelineError> {
    config.validate()?;
    let pool = build_pool(None)?;
    let analysis = analyze_cohort(manifest, cohort_id, config, &pool)?;
    Ok(palette_for(&analysis, config)?.palette)
}

pub fn cohort_metrics(manifest: &CohortManifest, cohort_id: &str, config: &RunConfig) -> Result<CohortMetrics, PipelineError> {
    config.validate()?;
    let pool = build_pool(None)?;
    let analysis = analyze_cohort(manifest, cohort_id, config, &pool)?;
    metrics_for(&analysis)
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortResult {
    pub analysis: CohortAnalysis,
    pub palette: PaletteOutcome,
    pub metrics: CohortMetrics,
    pub gamut: Option<GamutReport>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOutcome {
    pub cohorts: Vec<CohortResult>,
    /// Present when there are at least two cohorts.
    pub matrix: Option<DistanceMatrix>,
    pub reference: Option<ReferenceSystem>,
}

impl AnalysisOutcome {
    pub fn skipped_count(&self) -> usize {
        self.cohorts.iter().map(|c| c.analysis.skipped.len() + c.analysis.orphans.len()).sum()
    }
}

/// Runs every cohort of the manifest in manifest order.
pub fn analyze(config: &RunConfig, jobs: Option<usize>) -> Result<AnalysisOutcome, PipelineError> {
    config.validate()?;
    let manifest = corpus::load_manifest(&config.manifest_path)?;
    let reference = config.reference_path.as_deref().map(crate::refsys::load_reference).transpose()?;
    let pool = build_pool(jobs)?;

    let mut cohorts = Vec::with_capacity(manifest.cohorts.len());
    for cohort in &manifest.cohorts {
        let analysis = analyze_cohort(&manifest, &cohort.id, config, &pool)?;
        let palette = palette_for(&analysis, config)?;
        let metrics = metrics_for(&analysis)?;
        let gamut = reference
            .as_ref()
            .map(|r| gamut_report(&palette.palette, r, config.epsilon))
            .transpose()?;
        cohorts.push(CohortResult { analysis, palette, metrics, gamut });
    }
    let matrix = if cohorts.len() >= 2 {
        let palettes: Vec<Palette> = cohorts.iter().map(|c| c.palette.palette.clone()).collect();
        Some(distance_matrix(&palettes)?)
    } else {
        None
    };
    Ok(AnalysisOutcome { cohorts, matrix, reference })
}
