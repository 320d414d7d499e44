//! Skin-tone palettes from landmarked selfie corpora.
//!
//! The pipeline samples colors along two left-cheek segments of each face,
//! keeps the samples that pass a lightness/hue skin gate, clusters them per
//! cohort with k-means in an HSL cylinder embedding, and compares the
//! resulting palettes with each other and with reference skin-color charts.
//! Alongside the palettes it measures cheek texture (mean HSL step between
//! neighbouring samples), the share of near-white face pixels, and the mean
//! saturation of gated samples.
//!
//! Numeric modules are generic over [`Scalar`] (`f32` or `f64`). The aliases
//! at the crate root fix the scalar to `f64`, which is what the file-based
//! pipeline uses.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod color;
pub mod config;
pub mod corpus;
pub mod geometry;
pub mod metrics;
pub mod palette;
pub mod pipeline;
pub mod refsys;
pub mod report;
pub mod scalar;
pub mod synth;

pub use color::{hsl_to_rgb, hue_diff, luma, passes_skin_gate, rgb_to_hsl, RgbColor};
pub use config::RunConfig;
pub use corpus::{CohortManifest, ImageRecord, PixelGrid};
pub use palette::ClusterSpace;
pub use scalar::Scalar;

pub type HslColor = color::HslColor<f64>;
pub type SkinGate = color::SkinGate<f64>;
pub type LandmarkSet = geometry::LandmarkSet<f64>;
pub type Point = geometry::Point<f64>;
pub type ColorSample = palette::ColorSample<f64>;
pub type Palette = palette::Palette<f64>;
pub type PaletteEntry = palette::PaletteEntry<f64>;
pub type KMeansParams = palette::KMeansParams<f64>;
pub type CohortMetrics = metrics::CohortMetrics<f64>;
pub type DistanceMatrix = metrics::DistanceMatrix<f64>;
pub type FaceTexture = metrics::FaceTexture<f64>;
pub type FaceBrightness = metrics::FaceBrightness<f64>;
pub type ReferenceSystem = refsys::ReferenceSystem<f64>;
pub type GamutReport = refsys::GamutReport<f64>;
