//! Reference skin-color systems and palette gamut coverage.
//!
//! Reference CSV files carry a header row and either `label,h,s,l` (hue in
//! degrees, fractions for `s` and `l`) or `label,r,g,b` (8-bit channels).

use std::collections::HashSet;
use std::fmt::Write as _;
use std::io::Read;
use std::path::Path;

use thiserror::Error;

use crate::color::{embed, rgb_to_hsl, HslColor, RgbColor};
use crate::palette::Palette;
use crate::scalar::{euclidean, Scalar};

#[derive(Debug, Error)]
pub enum RefsysError {
    #[error("{origin}: row {row}: {message}")]
    Parse { origin: String, row: usize, message: String },
    #[error("{origin}: duplicate label {label:?}")]
    DuplicateLabel { origin: String, label: String },
    #[error("{0}: reference system has no colors")]
    EmptySystem(String),
    #[error("palette {0:?} has no entries")]
    EmptyPalette(String),
    #[error("epsilon must be positive, got {0}")]
    InvalidEpsilon(f64),
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceColor<T = f64> {
    pub label: String,
    pub hsl: HslColor<T>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReferenceSystem<T = f64> {
    pub name: String,
    pub colors: Vec<ReferenceColor<T>>,
}

impl<T: Scalar> ReferenceSystem<T> {
    /// Validates that there is at least one color and labels are unique.
    pub fn new(name: impl Into<String>, colors: Vec<ReferenceColor<T>>) -> Result<Self, RefsysError> {
        let name = name.into();
        if colors.is_empty() {
            return Err(RefsysError::EmptySystem(name));
        }
        let mut seen = HashSet::new();
        for c in &colors {
            if !seen.insert(c.label.as_str()) {
                return Err(RefsysError::DuplicateLabel { origin: name.clone(), label: c.label.clone() });
            }
        }
        Ok(Self { name, colors })
    }
}

#[derive(Clone, Copy)]
enum Columns {
    Hsl,
    Rgb,
}

/// Parses a reference CSV. `name` labels the system and error messages.
pub fn parse_reference<R: Read>(reader: R, name: &str) -> Result<ReferenceSystem<f64>, RefsysError> {
    let parse_err = |row: usize, message: String| RefsysError::Parse { origin: name.to_owned(), row, message };
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers().map_err(|e| parse_err(0, e.to_string()))?.clone();
    let cols: Vec<String> = headers.iter().map(|h| h.to_ascii_lowercase()).collect();
    let columns = match cols.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
        ["label", "h", "s", "l"] => Columns::Hsl,
        ["label", "r", "g", "b"] => Columns::Rgb,
        _ => return Err(parse_err(0, format!("header must be label,h,s,l or label,r,g,b; got {}", cols.join(",")))),
    };

    let mut colors = Vec::new();
    for (i, record) in rdr.records().enumerate() {
        let row = i + 1;
        let record = record.map_err(|e| parse_err(row, e.to_string()))?;
        if record.len() != 4 {
            return Err(parse_err(row, format!("expected 4 fields, found {}", record.len())));
        }
        let label = record[0].to_owned();
        if label.is_empty() {
            return Err(parse_err(row, "empty label".into()));
        }
        let hsl = match columns {
            Columns::Hsl => {
                let num = |j: usize| -> Result<f64, RefsysError> {
                    record[j].parse::<f64>().map_err(|_| parse_err(row, format!("bad number {:?}", &record[j])))
                };
                let (h, s, l) = (num(1)?, num(2)?, num(3)?);
                let h = if h == 360.0 { 0.0 } else { h };
                HslColor::new(h, s, l).map_err(|e| parse_err(row, e.to_string()))?
            }
            Columns::Rgb => {
                let channel = |j: usize| -> Result<u8, RefsysError> {
                    record[j].parse::<u8>().map_err(|_| parse_err(row, format!("channel {:?} is not in 0..=255", &record[j])))
                };
                rgb_to_hsl(RgbColor::new(channel(1)?, channel(2)?, channel(3)?))
            }
        };
        colors.push(ReferenceColor { label, hsl });
    }
    ReferenceSystem::new(name, colors)
}

/// Loads a reference CSV; the system is named after the file stem.
pub fn load_reference(path: &Path) -> Result<ReferenceSystem<f64>, RefsysError> {
    let origin = path.display().to_string();
    let file = std::fs::File::open(path).map_err(|source| RefsysError::Io { path: origin.clone(), source })?;
    let name = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or(origin);
    parse_reference(file, &name)
}

/// Closest reference color in the cylinder embedding; ties go to the
/// lexicographically smaller label.
pub fn nearest_reference<'a, T: Scalar>(c: &HslColor<T>, reference: &'a ReferenceSystem<T>) -> (&'a str, T) {
    let query = embed(*c);
    let mut best: Option<(&str, T)> = None;
    for rc in &reference.colors {
        let d = euclidean(&query, &embed(rc.hsl));
        let better = match best {
            None => true,
            Some((label, bd)) => d < bd || (d == bd && rc.label.as_str() < label),
        };
        if better {
            best = Some((rc.label.as_str(), d));
        }
    }
    best.expect("reference systems are non-empty")
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamutEntry<T = f64> {
    pub entry_index: usize,
    pub nearest_label: String,
    pub distance: T,
    pub in_gamut: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GamutReport<T = f64> {
    pub cohort_id: String,
    pub refsys_name: String,
    pub epsilon: T,
    pub per_entry: Vec<GamutEntry<T>>,
    /// Total proportion of palette entries farther than `epsilon` from every
    /// reference color.
    pub out_fraction_weighted: T,
}

pub fn gamut_report<T: Scalar>(
    palette: &Palette<T>,
    reference: &ReferenceSystem<T>,
    epsilon: T,
) -> Result<GamutReport<T>, RefsysError> {
    if !(epsilon > T::zero()) {
        return Err(RefsysError::InvalidEpsilon(epsilon.as_f64()));
    }
    if palette.entries.is_empty() {
        return Err(RefsysError::EmptyPalette(palette.cohort_id.clone()));
    }
    let mut per_entry = Vec::with_capacity(palette.entries.len());
    let mut weights = Vec::new();
    for (i, e) in palette.entries.iter().enumerate() {
        let (label, distance) = nearest_reference(&e.centroid_hsl, reference);
        let in_gamut = distance <= epsilon;
        if !in_gamut {
            weights.push(e.proportion);
        }
        per_entry.push(GamutEntry { entry_index: i, nearest_label: label.to_owned(), distance, in_gamut });
    }
    // Order-independent sum so entry permutations give identical totals.
    weights.sort_by(|a, b| a.partial_cmp(b).unwrap_or(std::cmp::Ordering::Equal));
    let out = weights.into_iter().fold(T::zero(), |a, b| a + b).min(T::one());
    Ok(GamutReport {
        cohort_id: palette.cohort_id.clone(),
        refsys_name: reference.name.clone(),
        epsilon,
        per_entry,
        out_fraction_weighted: out,
    })
}

impl<T: Scalar> GamutReport<T> {
    /// JSON with six-decimal numbers.
    pub fn to_json(&self) -> String {
        let q = |s: &str| serde_json::to_string(s).expect("string serialization cannot fail");
        let mut out = String::from("{\n");
        let _ = writeln!(out, "  \"cohort\": {},", q(&self.cohort_id));
        let _ = writeln!(out, "  \"reference\": {},", q(&self.refsys_name));
        let _ = writeln!(out, "  \"epsilon\": {:.6},", self.epsilon.as_f64());
        let _ = writeln!(out, "  \"out_fraction_weighted\": {:.6},", self.out_fraction_weighted.as_f64());
        out.push_str("  \"entries\": [");
        for (i, e) in self.per_entry.iter().enumerate() {
            out.push_str(if i == 0 { "\n" } else { ",\n" });
            let _ = write!(
                out,
                "    {{\"index\": {}, \"nearest\": {}, \"distance\": {:.6}, \"in_gamut\": {}}}",
                e.entry_index,
                q(&e.nearest_label),
                e.distance.as_f64(),
                e.in_gamut
            );
        }
        if !self.per_entry.is_empty() {
            out.push_str("\n  ");
        }
        out.push_str("]\n}\n");
        out
    }
}
