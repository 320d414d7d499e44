//! Weighted dominant-color palettes extracted from gated cheek samples.

pub mod kmeans;

use std::cmp::Ordering;
use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::color::{embed, hsl_to_rgb_fractions, rgb_fractions_to_hsl, unembed, HslColor};
use crate::scalar::Scalar;

pub use self::kmeans::{kmeans, KMeansError, KMeansParams, KMeansResult};

#[derive(Debug, Error)]
pub enum PaletteError {
    #[error("no samples to cluster")]
    NoSamples,
    #[error(transparent)]
    KMeans(#[from] KMeansError),
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

/// Vector space the clustering runs in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ClusterSpace {
    /// `(s cos h, s sin h, l)`.
    #[default]
    Cylinder,
    /// Unrounded RGB fractions.
    Rgb,
}

impl ClusterSpace {
    pub fn project<T: Scalar>(self, c: HslColor<T>) -> [T; 3] {
        match self {
            Self::Cylinder => embed(c),
            Self::Rgb => hsl_to_rgb_fractions(c),
        }
    }

    pub fn unproject<T: Scalar>(self, v: [T; 3]) -> HslColor<T> {
        match self {
            Self::Cylinder => unembed(v),
            Self::Rgb => {
                let clamp = |x: T| x.max(T::zero()).min(T::one());
                rgb_fractions_to_hsl(clamp(v[0]), clamp(v[1]), clamp(v[2]))
            }
        }
    }
}

/// One gated cheek color with provenance.
#[derive(Debug, Clone, PartialEq)]
pub struct ColorSample<T = f64> {
    pub hsl: HslColor<T>,
    pub embedded: [T; 3],
    pub image_id: String,
    pub cohort_id: String,
    pub segment_index: u8,
    pub ordinal: usize,
}

impl<T: Scalar> ColorSample<T> {
    pub fn new(hsl: HslColor<T>, image_id: impl Into<String>, cohort_id: impl Into<String>, segment_index: u8, ordinal: usize) -> Self {
        Self { hsl, embedded: embed(hsl), image_id: image_id.into(), cohort_id: cohort_id.into(), segment_index, ordinal }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaletteEntry<T = f64> {
    pub centroid_hsl: HslColor<T>,
    /// `member_count / n_samples`.
    pub proportion: T,
    pub member_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Palette<T = f64> {
    pub cohort_id: String,
    pub entries: Vec<PaletteEntry<T>>,
    /// Requested cluster count; `entries` is shorter only when there were
    /// fewer distinct samples than `k`.
    pub k: usize,
    pub seed: u64,
    pub n_samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PaletteParams<T> {
    pub kmeans: KMeansParams<T>,
    pub space: ClusterSpace,
}

impl<T: Scalar> Default for PaletteParams<T> {
    fn default() -> Self {
        Self { kmeans: KMeansParams::default(), space: ClusterSpace::Cylinder }
    }
}

/// Palette plus clustering diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct PaletteOutcome<T = f64> {
    pub palette: Palette<T>,
    pub iterations: usize,
    pub converged: bool,
    pub insufficient_samples: bool,
}

impl<T: Scalar> Palette<T> {
    /// Builds entries from cluster centroids (in `space`) and their sizes.
    /// Zero-sized clusters are dropped.
    pub fn from_clusters(
        cohort_id: impl Into<String>,
        space: ClusterSpace,
        centroids: &[[T; 3]],
        sizes: &[usize],
        k: usize,
        seed: u64,
    ) -> Self {
        let n_samples: usize = sizes.iter().sum();
        let entries = centroids
            .iter()
            .zip(sizes)
            .filter(|(_, &count)| count > 0)
            .map(|(c, &count)| PaletteEntry {
                centroid_hsl: space.unproject(*c),
                proportion: T::from_count(count) / T::from_count(n_samples),
                member_count: count,
            })
            .collect();
        Self { cohort_id: cohort_id.into(), entries, k, seed, n_samples }
    }

    pub fn is_collapsed(&self) -> bool {
        self.entries.len() < self.k
    }

    pub fn proportion_sum(&self) -> T {
        self.entries.iter().fold(T::zero(), |acc, e| acc + e.proportion)
    }

    pub fn embedded_entries(&self) -> impl Iterator<Item = ([T; 3], T)> + '_ {
        self.entries.iter().map(|e| (embed(e.centroid_hsl), e.proportion))
    }
}

/// Clusters `samples` into a palette for `cohort_id`.
pub fn extract_palette<T: Scalar>(
    cohort_id: &str,
    samples: &[ColorSample<T>],
    params: &PaletteParams<T>,
) -> Result<PaletteOutcome<T>, PaletteError> {
    if samples.is_empty() {
        return Err(PaletteError::NoSamples);
    }
    let points: Vec<[T; 3]> = match params.space {
        ClusterSpace::Cylinder => samples.iter().map(|s| s.embedded).collect(),
        space => samples.iter().map(|s| space.project(s.hsl)).collect(),
    };
    let result = kmeans(&points, &params.kmeans)?;
    let palette = Palette::from_clusters(
        cohort_id,
        params.space,
        &result.centroids,
        &result.cluster_sizes(),
        params.kmeans.k,
        params.kmeans.seed,
    );
    Ok(PaletteOutcome {
        palette,
        iterations: result.iterations,
        converged: result.converged,
        insufficient_samples: result.insufficient_samples,
    })
}

fn desc<T: Scalar>(a: T, b: T) -> Ordering {
    b.partial_cmp(&a).unwrap_or(Ordering::Equal)
}

fn asc<T: Scalar>(a: T, b: T) -> Ordering {
    a.partial_cmp(&b).unwrap_or(Ordering::Equal)
}

/// Descending proportion; ties by descending lightness, then ascending hue.
pub fn sort_by_proportion<T: Scalar>(p: &Palette<T>) -> Palette<T> {
    let mut out = p.clone();
    out.entries.sort_by(|a, b| {
        desc(a.proportion, b.proportion)
            .then_with(|| desc(a.centroid_hsl.l, b.centroid_hsl.l))
            .then_with(|| asc(a.centroid_hsl.h, b.centroid_hsl.h))
    });
    out
}

/// Descending lightness; ties by descending proportion.
pub fn sort_by_lightness<T: Scalar>(p: &Palette<T>) -> Palette<T> {
    let mut out = p.clone();
    out.entries.sort_by(|a, b| {
        desc(a.centroid_hsl.l, b.centroid_hsl.l).then_with(|| desc(a.proportion, b.proportion))
    });
    out
}

/// A palette read back from JSON, with the config hash it was produced under.
#[derive(Debug, Clone, PartialEq)]
pub struct PaletteFile {
    pub palette: Palette<f64>,
    pub config_hash: Option<String>,
}

#[derive(Deserialize)]
struct RawPalette {
    cohort: String,
    k: usize,
    seed: u64,
    n_samples: usize,
    #[serde(default)]
    config_hash: Option<String>,
    entries: Vec<RawEntry>,
}

#[derive(Deserialize)]
struct RawEntry {
    h: f64,
    s: f64,
    l: f64,
    #[allow(dead_code)]
    proportion: f64,
    count: usize,
}

fn json_string(s: &str) -> String {
    serde_json::to_string(s).expect("string serialization cannot fail")
}

impl<T: Scalar> Palette<T> {
    /// Palette JSON with every number printed to six decimals.
    pub fn to_json(&self, config_hash: Option<&str>) -> String {
        let mut out = String::new();
        out.push_str("{\n");
        let _ = writeln!(out, "  \"cohort\": {},", json_string(&self.cohort_id));
        let _ = writeln!(out, "  \"k\": {},", self.k);
        let _ = writeln!(out, "  \"seed\": {},", self.seed);
        let _ = writeln!(out, "  \"n_samples\": {},", self.n_samples);
        if let Some(hash) = config_hash {
            let _ = writeln!(out, "  \"config_hash\": {},", json_string(hash));
        }
        out.push_str("  \"entries\": [");
        for (i, e) in self.entries.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            let _ = write!(
                out,
                "    {{\"h\": {:.6}, \"s\": {:.6}, \"l\": {:.6}, \"proportion\": {:.6}, \"count\": {}}}",
                e.centroid_hsl.h.as_f64(),
                e.centroid_hsl.s.as_f64(),
                e.centroid_hsl.l.as_f64(),
                e.proportion.as_f64(),
                e.member_count
            );
        }
        if !self.entries.is_empty() {
            out.push_str("\n  ");
        }
        out.push_str("]\n}\n");
        out
    }
}

impl Palette<f64> {
    /// Parses palette JSON. Proportions are recomputed from the counts.
    pub fn from_json(text: &str, origin: &str) -> Result<PaletteFile, PaletteError> {
        let parse_err = |message: String| PaletteError::Parse { path: origin.to_owned(), message };
        let raw: RawPalette = serde_json::from_str(text).map_err(|e| parse_err(e.to_string()))?;
        let total: usize = raw.entries.iter().map(|e| e.count).sum();
        if total != raw.n_samples {
            return Err(parse_err(format!("entry counts sum to {total}, n_samples is {}", raw.n_samples)));
        }
        let mut entries = Vec::with_capacity(raw.entries.len());
        for (i, e) in raw.entries.iter().enumerate() {
            // Six-decimal rounding can print a hue just below 360 as 360.000000.
            let h = if e.h >= 360.0 && e.h < 360.000001 { 0.0 } else { e.h };
            let hsl = HslColor::new(h, e.s, e.l).map_err(|err| parse_err(format!("entries[{i}]: {err}")))?;
            entries.push(PaletteEntry {
                centroid_hsl: hsl,
                proportion: e.count as f64 / raw.n_samples as f64,
                member_count: e.count,
            });
        }
        Ok(PaletteFile {
            palette: Palette { cohort_id: raw.cohort, entries, k: raw.k, seed: raw.seed, n_samples: raw.n_samples },
            config_hash: raw.config_hash,
        })
    }

    pub fn load(path: &Path) -> Result<PaletteFile, PaletteError> {
        let origin = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| PaletteError::Io { path: origin.clone(), source })?;
        Self::from_json(&text, &origin)
    }
}
