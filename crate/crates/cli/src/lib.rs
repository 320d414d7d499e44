//! Command-line front end: `analyze`, `compare`, `gamut` and `synth`.
//!
//! Exit codes: 0 success, 1 fatal error, 2 partial success (some images
//! skipped).

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand, ValueEnum};

use skintone::color::{parse_hue_arcs, SkinGate};
use skintone::config::RunConfig;
use skintone::geometry::SegmentIndices;
use skintone::metrics::{distance_matrix, FaceRegion, HueMode};
use skintone::palette::{ClusterSpace, Palette};
use skintone::pipeline::{analyze, AnalysisOutcome};
use skintone::refsys::{gamut_report, load_reference};
use skintone::report::{emit_report, CohortInputSummary, CohortReport, RunInfo, SkipRecord};
use skintone::synth::{default_cohorts, write_corpus, SynthSpec};

pub const EXIT_OK: i32 = 0;
pub const EXIT_FATAL: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

#[derive(Debug, Parser)]
#[command(name = "skintone", version, about = "Skin-tone palettes, texture and brightness metrics for landmarked selfie cohorts")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run the full pipeline over every cohort in a manifest and write a report tree.
    Analyze(AnalyzeArgs),
    /// Distance matrix between previously written palette files.
    Compare(CompareArgs),
    /// Compare one palette against a reference color system.
    Gamut(GamutArgs),
    /// Write a synthetic landmarked corpus with a manifest.
    Synth(SynthArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum HueModeArg {
    Circular,
    LegacyRaw,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ClusterSpaceArg {
    Cylinder,
    Rgb,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum FaceRegionArg {
    Bbox,
    Hull,
}

#[derive(Debug, Args)]
pub struct AnalyzeArgs {
    /// Cohort manifest (JSON).
    #[arg(long)]
    pub manifest: PathBuf,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    /// Palette size per cohort (study default).
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Seed for k-means++ initialization.
    #[arg(long, default_value_t = 20)]
    pub seed: u64,
    /// Stop when no centroid moves farther than this.
    #[arg(long, default_value_t = 1e-6)]
    pub tol: f64,
    /// Iteration cap for Lloyd's algorithm.
    #[arg(long, default_value_t = 300)]
    pub max_iter: usize,
    /// Independent k-means++ seedings per cohort; the lowest-inertia run is kept.
    #[arg(long, default_value_t = 32)]
    pub n_init: usize,
    /// Skin gate: samples need lightness strictly above this (study default).
    #[arg(long, default_value_t = 0.60)]
    pub min_lightness: f64,
    /// Skin gate: closed hue arcs in degrees, `lo:hi` pairs (study default).
    #[arg(long, default_value = "0:50,300:360")]
    pub hue_arcs: String,
    /// Sample points along each cheek segment, endpoints included (study default).
    #[arg(long, default_value_t = 10)]
    pub samples_per_segment: usize,
    /// Side of the square patch averaged at each sample point; odd, 1 reads a single pixel.
    #[arg(long, default_value_t = 3)]
    pub patch: usize,
    /// First cheek segment as `from,to` landmark indices (68-point layout).
    #[arg(long, default_value = "36,31", value_parser = parse_index_pair)]
    pub segment_a: (usize, usize),
    /// Second cheek segment as `from,to` landmark indices (68-point layout).
    #[arg(long, default_value = "39,48", value_parser = parse_index_pair)]
    pub segment_b: (usize, usize),
    /// Pixels count as bright when luma is strictly above this (study default).
    #[arg(long, default_value_t = 200)]
    pub bright_threshold: u8,
    /// Region for the brightness ratio.
    #[arg(long, value_enum, default_value_t = FaceRegionArg::Bbox)]
    pub face_region: FaceRegionArg,
    /// Hue difference used by the texture metric.
    #[arg(long, value_enum, default_value_t = HueModeArg::Circular)]
    pub hue_mode: HueModeArg,
    /// Space in which samples are clustered.
    #[arg(long, value_enum, default_value_t = ClusterSpaceArg::Cylinder)]
    pub cluster_space: ClusterSpaceArg,
    /// In-gamut distance for `--reference` comparisons.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
    /// Reference color system CSV; adds a gamut report per cohort.
    #[arg(long)]
    pub reference: Option<PathBuf>,
    /// Image worker threads [default: number of CPUs]. Output does not depend on it.
    #[arg(long)]
    pub jobs: Option<usize>,
}

#[derive(Debug, Args)]
pub struct CompareArgs {
    /// Two or more palette JSON files.
    #[arg(required = true, num_args = 2..)]
    pub palettes: Vec<PathBuf>,
    /// Also write the CSV here.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct GamutArgs {
    /// Palette JSON file.
    pub palette: PathBuf,
    /// Reference CSV (`label,h,s,l` or `label,r,g,b`).
    pub reference: PathBuf,
    /// In-gamut distance in the cylinder embedding.
    #[arg(long, default_value_t = 0.05)]
    pub epsilon: f64,
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory to write; created if missing.
    #[arg(long)]
    pub out: PathBuf,
    /// Images per cohort.
    #[arg(long, default_value_t = 25)]
    pub images: usize,
    /// Image side in pixels.
    #[arg(long, default_value_t = 64)]
    pub size: usize,
    /// Generator seed.
    #[arg(long, default_value_t = 2021)]
    pub seed: u64,
}

fn parse_index_pair(s: &str) -> Result<(usize, usize), String> {
    let (a, b) = s.split_once(',').ok_or_else(|| format!("expected `from,to`, got {s:?}"))?;
    let parse = |t: &str| t.trim().parse::<usize>().map_err(|_| format!("bad landmark index {t:?}"));
    Ok((parse(a)?, parse(b)?))
}

impl AnalyzeArgs {
    /// Effective configuration; validated, no IO.
    pub fn to_config(&self) -> anyhow::Result<RunConfig> {
        let arcs = parse_hue_arcs(&self.hue_arcs).map_err(|e| anyhow::anyhow!("invalid configuration: hue_arcs: {e}"))?;
        let config = RunConfig {
            manifest_path: self.manifest.clone(),
            k: self.k,
            seed: self.seed,
            tol: self.tol,
            max_iter: self.max_iter,
            n_init: self.n_init,
            gate: SkinGate { min_lightness: self.min_lightness, hue_arcs: arcs },
            samples_per_segment: self.samples_per_segment,
            patch: self.patch,
            segments: SegmentIndices { a: self.segment_a, b: self.segment_b },
            bright_threshold: self.bright_threshold,
            face_region: match self.face_region {
                FaceRegionArg::Bbox => FaceRegion::BoundingBox,
                FaceRegionArg::Hull => FaceRegion::ConvexHull,
            },
            hue_mode: match self.hue_mode {
                HueModeArg::Circular => HueMode::Circular,
                HueModeArg::LegacyRaw => HueMode::LegacyRaw,
            },
            cluster_space: match self.cluster_space {
                ClusterSpaceArg::Cylinder => ClusterSpace::Cylinder,
                ClusterSpaceArg::Rgb => ClusterSpace::Rgb,
            },
            epsilon: self.epsilon,
            reference_path: self.reference.clone(),
        };
        config.validate()?;
        if self.jobs == Some(0) {
            bail!("invalid configuration: jobs: must be at least 1");
        }
        Ok(config)
    }
}

/// Parses `args` (including the program name) and runs the command.
pub fn run<I, T>(args: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let rendered = e.render().to_string();
            return if e.use_stderr() {
                let _ = write!(err, "{rendered}");
                EXIT_FATAL
            } else {
                let _ = write!(out, "{rendered}");
                EXIT_OK
            };
        }
    };
    let result = match &cli.command {
        Command::Analyze(a) => cmd_analyze(a, out, err),
        Command::Compare(a) => cmd_compare(&a.palettes, a.out.as_deref(), out, err),
        Command::Gamut(a) => cmd_gamut(&a.palette, &a.reference, a.epsilon, out),
        Command::Synth(a) => cmd_synth(a, out),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            let _ = writeln!(err, "error: {e:#}");
            EXIT_FATAL
        }
    }
}

fn reports_for(outcome: &AnalysisOutcome, config: &RunConfig) -> (Vec<CohortReport>, Vec<CohortInputSummary>, Vec<SkipRecord>) {
    let echo = config.to_json();
    let mut reports = Vec::new();
    let mut summaries = Vec::new();
    let mut skipped = Vec::new();
    for c in &outcome.cohorts {
        let a = &c.analysis;
        reports.push(CohortReport {
            cohort_id: a.cohort_id.clone(),
            palette: c.palette.palette.clone(),
            metrics: c.metrics.clone(),
            gamut: c.gamut.clone(),
            config_echo: echo.clone(),
        });
        summaries.push(CohortInputSummary {
            id: a.cohort_id.clone(),
            display_name: a.display_name.clone(),
            root: a.root.display().to_string(),
            images_used: a.faces.len(),
            images_skipped: a.skipped.len(),
            orphan_images: a.orphans.len(),
            samples_total: a.gate.total,
            samples_gated: a.gate.passed,
            kmeans_iterations: c.palette.iterations,
            kmeans_converged: c.palette.converged,
            palette_collapsed: c.palette.palette.is_collapsed(),
        });
        for s in &a.skipped {
            skipped.push(SkipRecord { image: s.image.display().to_string(), reason: s.reason.clone() });
        }
        for o in &a.orphans {
            skipped.push(SkipRecord { image: o.display().to_string(), reason: "no landmark sidecar".into() });
        }
    }
    (reports, summaries, skipped)
}

pub fn cmd_analyze(args: &AnalyzeArgs, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<i32> {
    let config = args.to_config()?;
    let outcome = analyze(&config, args.jobs)?;
    let (reports, cohorts, skipped) = reports_for(&outcome, &config);
    let generated_at_unix = SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0);
    let info = RunInfo { config: config.clone(), cohorts, skipped, generated_at_unix };
    let written = emit_report(&reports, outcome.matrix.as_ref(), outcome.reference.as_ref(), &info, &args.out)
        .with_context(|| format!("writing report to {}", args.out.display()))?;

    for c in &outcome.cohorts {
        let a = &c.analysis;
        writeln!(
            out,
            "{}: {} images, {}/{} samples gated, {} palette entries",
            a.cohort_id,
            a.faces.len(),
            a.gate.passed,
            a.gate.total,
            c.palette.palette.entries.len()
        )?;
        if c.palette.insufficient_samples {
            writeln!(err, "warning: {}: fewer distinct samples than k = {}", a.cohort_id, config.k)?;
        }
        if !c.palette.converged {
            writeln!(err, "warning: {}: k-means stopped at max_iter = {}", a.cohort_id, config.max_iter)?;
        }
    }
    writeln!(out, "wrote {} files to {}", written.len(), args.out.display())?;

    let skipped = outcome.skipped_count();
    if skipped > 0 {
        for c in &outcome.cohorts {
            for s in &c.analysis.skipped {
                writeln!(err, "skipped {}: {}", s.image.display(), s.reason)?;
            }
            for o in &c.analysis.orphans {
                writeln!(err, "skipped {}: no landmark sidecar", o.display())?;
            }
        }
        writeln!(err, "partial success: {skipped} image(s) skipped")?;
        return Ok(EXIT_PARTIAL);
    }
    Ok(EXIT_OK)
}

/// Column labels for `compare`: cohort ids, suffixed `_2`, `_3`, ... when a
/// cohort id repeats.
fn unique_labels(ids: &[String]) -> Vec<String> {
    let mut labels: Vec<String> = Vec::with_capacity(ids.len());
    for id in ids {
        let mut label = id.clone();
        let mut n = 1;
        while labels.contains(&label) {
            n += 1;
            label = format!("{id}_{n}");
        }
        labels.push(label);
    }
    labels
}

pub fn cmd_compare(paths: &[PathBuf], out_path: Option<&Path>, out: &mut dyn Write, err: &mut dyn Write) -> anyhow::Result<i32> {
    if paths.len() < 2 {
        bail!("compare needs at least two palette files, got {}", paths.len());
    }
    let mut files = Vec::with_capacity(paths.len());
    for p in paths {
        let file = Palette::load(p).with_context(|| format!("cannot read palette {}", p.display()))?;
        files.push(file);
    }

    let first_hash = &files[0].config_hash;
    if files.iter().any(|f| &f.config_hash != first_hash) {
        writeln!(err, "warning: palettes were produced under different configurations")?;
        for (p, f) in paths.iter().zip(&files) {
            writeln!(err, "  {}: {}", p.display(), f.config_hash.as_deref().unwrap_or("(no config hash)"))?;
        }
    }
    let first_k = files[0].palette.k;
    if files.iter().any(|f| f.palette.k != first_k) {
        let ks: Vec<String> = files.iter().map(|f| format!("{}={}", f.palette.cohort_id, f.palette.k)).collect();
        writeln!(err, "note: palettes use different k ({}); distances are still defined", ks.join(", "))?;
    }

    let ids: Vec<String> = files.iter().map(|f| f.palette.cohort_id.clone()).collect();
    let labels = unique_labels(&ids);
    let palettes: Vec<Palette> = files
        .into_iter()
        .zip(&labels)
        .map(|(f, label)| Palette { cohort_id: label.clone(), ..f.palette })
        .collect();
    let csv = distance_matrix(&palettes)?.to_csv();
    out.write_all(csv.as_bytes())?;
    if let Some(path) = out_path {
        std::fs::write(path, &csv).with_context(|| format!("cannot write {}", path.display()))?;
    }
    Ok(EXIT_OK)
}

pub fn cmd_gamut(palette_path: &Path, reference_path: &Path, epsilon: f64, out: &mut dyn Write) -> anyhow::Result<i32> {
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        bail!("invalid configuration: epsilon: must be a positive number, got {epsilon}");
    }
    let palette = Palette::load(palette_path).with_context(|| format!("cannot read palette {}", palette_path.display()))?;
    let reference = load_reference(reference_path)?;
    let report = gamut_report(&palette.palette, &reference, epsilon)?;
    out.write_all(report.to_json().as_bytes())?;
    Ok(EXIT_OK)
}

pub fn cmd_synth(args: &SynthArgs, out: &mut dyn Write) -> anyhow::Result<i32> {
    if args.images == 0 {
        bail!("--images must be at least 1");
    }
    let spec = SynthSpec { images_per_cohort: args.images, image_size: args.size, seed: args.seed, ..SynthSpec::default() };
    let manifest = write_corpus(&args.out, &default_cohorts(), &spec)
        .with_context(|| format!("cannot write corpus to {}", args.out.display()))?;
    writeln!(out, "wrote {}", manifest.display())?;
    Ok(EXIT_OK)
}
