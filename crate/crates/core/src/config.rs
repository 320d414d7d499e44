//! Effective run configuration, validation and hashing.

use std::path::PathBuf;

use serde::Serialize;
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::color::{HueArc, SkinGate};
use crate::geometry::{SamplingConfig, SegmentIndices};
use crate::metrics::{BrightnessConfig, FaceRegion, HueMode};
use crate::palette::{ClusterSpace, KMeansParams, PaletteParams};

#[derive(Debug, Error, Clone, PartialEq)]
#[error("invalid configuration: {field}: {message}")]
pub struct ConfigError {
    pub field: &'static str,
    pub message: String,
}

fn invalid(field: &'static str, message: impl Into<String>) -> ConfigError {
    ConfigError { field, message: message.into() }
}

/// Everything that influences analysis output. `out_dir` and the worker count
/// live outside this struct: they do not change any emitted byte.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub manifest_path: PathBuf,
    pub k: usize,
    pub seed: u64,
    pub tol: f64,
    pub max_iter: usize,
    pub n_init: usize,
    pub gate: SkinGate<f64>,
    pub samples_per_segment: usize,
    pub patch: usize,
    pub segments: SegmentIndices,
    pub bright_threshold: u8,
    pub face_region: FaceRegion,
    pub hue_mode: HueMode,
    pub cluster_space: ClusterSpace,
    pub epsilon: f64,
    pub reference_path: Option<PathBuf>,
}

impl RunConfig {
    pub fn with_manifest(manifest_path: impl Into<PathBuf>) -> Self {
        Self {
            manifest_path: manifest_path.into(),
            k: 20,
            seed: 20,
            tol: 1e-6,
            max_iter: 300,
            n_init: 32,
            gate: SkinGate::default(),
            samples_per_segment: 10,
            patch: 3,
            segments: SegmentIndices::default(),
            bright_threshold: 200,
            face_region: FaceRegion::BoundingBox,
            hue_mode: HueMode::Circular,
            cluster_space: ClusterSpace::Cylinder,
            epsilon: 0.05,
            reference_path: None,
        }
    }

    /// Checks every field; performs no IO.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.k == 0 {
            return Err(invalid("k", "must be at least 1"));
        }
        if !(self.tol > 0.0 && self.tol.is_finite()) {
            return Err(invalid("tol", format!("must be a positive number, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(invalid("max_iter", "must be at least 1"));
        }
        if self.n_init == 0 {
            return Err(invalid("n_init", "must be at least 1"));
        }
        SkinGate::new(self.gate.min_lightness, self.gate.hue_arcs.clone())
            .map_err(|e| invalid("gate", e.to_string()))?;
        if self.gate.hue_arcs.is_empty() {
            return Err(invalid("hue_arcs", "at least one arc is required"));
        }
        self.sampling().validate().map_err(|e| invalid("sampling", e.to_string()))?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(invalid("epsilon", format!("must be a positive number, got {}", self.epsilon)));
        }
        Ok(())
    }

    pub fn sampling(&self) -> SamplingConfig {
        SamplingConfig { samples_per_segment: self.samples_per_segment, patch: self.patch, segments: self.segments }
    }

    pub fn brightness(&self) -> BrightnessConfig {
        BrightnessConfig { luma_threshold: self.bright_threshold, region: self.face_region }
    }

    pub fn palette_params(&self) -> PaletteParams<f64> {
        PaletteParams {
            kmeans: KMeansParams { k: self.k, seed: self.seed, tol: self.tol, max_iter: self.max_iter, n_init: self.n_init },
            space: self.cluster_space,
        }
    }

    pub fn to_json(&self) -> serde_json::Value {
        serde_json::to_value(self).expect("config is always serializable")
    }

    /// SHA-256 of the compact JSON echo, hex encoded.
    pub fn hash(&self) -> String {
        let text = serde_json::to_string(self).expect("config is always serializable");
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}

/// Formats arcs as `lo:hi,lo:hi`.
pub fn format_hue_arcs(arcs: &[HueArc<f64>]) -> String {
    arcs.iter().map(|a| format!("{}:{}", a.lo, a.hi)).collect::<Vec<_>>().join(",")
}
