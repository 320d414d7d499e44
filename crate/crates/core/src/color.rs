//! Color values, RGB/HSL conversion, the skin gate and circular hue helpers.
//!
//! HSL uses degrees for hue and fractions for saturation and lightness:
//! `h ∈ [0, 360)`, `s, l ∈ [0, 1]`. Achromatic colors are stored with
//! `h = 0`.

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ColorError {
    #[error("hue {0} outside [0, 360)")]
    Hue(f64),
    #[error("saturation {0} outside [0, 1]")]
    Saturation(f64),
    #[error("lightness {0} outside [0, 1]")]
    Lightness(f64),
    #[error("hue arc [{lo}, {hi}] is not within [0, 360] with lo <= hi")]
    Arc { lo: f64, hi: f64 },
    #[error("minimum lightness {0} outside [0, 1]")]
    MinLightness(f64),
}

/// 8-bit sRGB triple.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Default, Serialize, Deserialize)]
pub struct RgbColor {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl RgbColor {
    pub const WHITE: Self = Self::new(255, 255, 255);
    pub const BLACK: Self = Self::new(0, 0, 0);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        Self { r, g, b }
    }

    pub const fn gray(v: u8) -> Self {
        Self::new(v, v, v)
    }

    /// Lowercase `#rrggbb`.
    pub fn hex(&self) -> String {
        format!("#{:02x}{:02x}{:02x}", self.r, self.g, self.b)
    }
}

impl fmt::Display for RgbColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}, {}, {})", self.r, self.g, self.b)
    }
}

/// Hue/saturation/lightness color in canonical form.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct HslColor<T> {
    pub h: T,
    pub s: T,
    pub l: T,
}

impl<T: Scalar> HslColor<T> {
    /// Validated constructor. Returns the canonical form (`h = 0` when `s = 0`).
    pub fn new(h: T, s: T, l: T) -> Result<Self, ColorError> {
        let full_turn = T::lit(360.0);
        if !(h >= T::zero() && h < full_turn) {
            return Err(ColorError::Hue(h.as_f64()));
        }
        if !(s >= T::zero() && s <= T::one()) {
            return Err(ColorError::Saturation(s.as_f64()));
        }
        if !(l >= T::zero() && l <= T::one()) {
            return Err(ColorError::Lightness(l.as_f64()));
        }
        Ok(Self { h, s, l }.canonical())
    }

    /// Wraps the hue into `[0, 360)`, clamps `s` and `l` to `[0, 1]` and
    /// canonicalizes achromatic colors. NaN components become zero.
    pub fn normalized(h: T, s: T, l: T) -> Self {
        let clamp01 = |v: T| if v.is_nan() { T::zero() } else { v.max(T::zero()).min(T::one()) };
        Self { h: wrap_hue(h), s: clamp01(s), l: clamp01(l) }.canonical()
    }

    pub fn canonical(self) -> Self {
        if self.s == T::zero() {
            Self { h: T::zero(), ..self }
        } else {
            self
        }
    }

    pub fn cast<U: Scalar>(self) -> HslColor<U> {
        HslColor { h: U::lit(self.h.as_f64()), s: U::lit(self.s.as_f64()), l: U::lit(self.l.as_f64()) }
    }
}

/// Wraps an angle in degrees into `[0, 360)`.
pub fn wrap_hue<T: Scalar>(h: T) -> T {
    if !h.is_finite() {
        return T::zero();
    }
    let full_turn = T::lit(360.0);
    let mut w = h % full_turn;
    if w < T::zero() {
        w = w + full_turn;
    }
    // `-tiny + 360` can round up to exactly 360.
    if w >= full_turn {
        w = T::zero();
    }
    w
}

/// Standard hexcone RGB → HSL for 8-bit input.
pub fn rgb_to_hsl<T: Scalar>(c: RgbColor) -> HslColor<T> {
    let scale = T::lit(255.0);
    rgb_fractions_to_hsl(
        T::lit(c.r as f64) / scale,
        T::lit(c.g as f64) / scale,
        T::lit(c.b as f64) / scale,
    )
}

/// Hexcone RGB → HSL for channels given as fractions in `[0, 1]`.
pub fn rgb_fractions_to_hsl<T: Scalar>(r: T, g: T, b: T) -> HslColor<T> {
    let max = r.max(g).max(b);
    let min = r.min(g).min(b);
    let two = T::lit(2.0);
    let l = (max + min) / two;
    let chroma = max - min;
    if chroma <= T::zero() {
        return HslColor::normalized(T::zero(), T::zero(), l);
    }
    let s = chroma / (T::one() - (two * l - T::one()).abs());
    let sixty = T::lit(60.0);
    let h = if max == r {
        sixty * ((g - b) / chroma)
    } else if max == g {
        sixty * ((b - r) / chroma + two)
    } else {
        sixty * ((r - g) / chroma + T::lit(4.0))
    };
    HslColor::normalized(h, s, l)
}

/// Inverse hexcone transform; channel values in `[0, 1]`, unrounded.
pub fn hsl_to_rgb_fractions<T: Scalar>(c: HslColor<T>) -> [T; 3] {
    let two = T::lit(2.0);
    let chroma = (T::one() - (two * c.l - T::one()).abs()) * c.s;
    let sector = wrap_hue(c.h) / T::lit(60.0);
    let x = chroma * (T::one() - ((sector % two) - T::one()).abs());
    let (r1, g1, b1) = match sector.to_u8().unwrap_or(0) {
        0 => (chroma, x, T::zero()),
        1 => (x, chroma, T::zero()),
        2 => (T::zero(), chroma, x),
        3 => (T::zero(), x, chroma),
        4 => (x, T::zero(), chroma),
        _ => (chroma, T::zero(), x),
    };
    let m = c.l - chroma / two;
    [r1 + m, g1 + m, b1 + m]
}

/// Inverse hexcone transform with channels rounded half-up to 8 bits.
pub fn hsl_to_rgb<T: Scalar>(c: HslColor<T>) -> RgbColor {
    let [r, g, b] = hsl_to_rgb_fractions(c);
    RgbColor::new(quantize(r), quantize(g), quantize(b))
}

/// Maps a `[0, 1]` fraction to 8 bits, rounding half-up.
pub fn quantize<T: Scalar>(v: T) -> u8 {
    let scaled = (v * T::lit(255.0) + T::lit(0.5)).floor();
    scaled.max(T::zero()).min(T::lit(255.0)).to_u8().unwrap_or(0)
}

/// BT.601 luma, `round(0.299 r + 0.587 g + 0.114 b)` computed exactly.
pub fn luma(c: RgbColor) -> u8 {
    let weighted = 299 * c.r as u32 + 587 * c.g as u32 + 114 * c.b as u32;
    ((2 * weighted + 1000) / 2000) as u8
}

/// Circular hue distance as a fraction of a full turn, in `[0, 0.5]`.
pub fn hue_diff<T: Scalar>(h1: T, h2: T) -> T {
    let full_turn = T::lit(360.0);
    // `|h1 - h2|` is bit-identical to `|h2 - h1|`, so the result is exactly symmetric.
    let d = if (h1 - h2).is_finite() { (h1 - h2).abs() % full_turn } else { T::zero() };
    d.min(full_turn - d) / full_turn
}

/// Cylinder embedding `(s cos h, s sin h, l)`.
pub fn embed<T: Scalar>(c: HslColor<T>) -> [T; 3] {
    let theta = c.h.to_radians();
    [c.s * theta.cos(), c.s * theta.sin(), c.l]
}

/// Maps an embedded point back to canonical HSL: hue from `atan2`, the radius
/// as saturation, both saturation and lightness clamped to `[0, 1]`.
pub fn unembed<T: Scalar>(v: [T; 3]) -> HslColor<T> {
    let radius = v[0].hypot(v[1]);
    let h = if radius > T::zero() { v[1].atan2(v[0]).to_degrees() } else { T::zero() };
    HslColor::normalized(h, radius, v[2])
}

/// Closed interval of hue degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HueArc<T> {
    pub lo: T,
    pub hi: T,
}

impl<T: Scalar> HueArc<T> {
    pub fn new(lo: T, hi: T) -> Result<Self, ColorError> {
        let full_turn = T::lit(360.0);
        if !(lo >= T::zero() && hi <= full_turn && lo <= hi) {
            return Err(ColorError::Arc { lo: lo.as_f64(), hi: hi.as_f64() });
        }
        Ok(Self { lo, hi })
    }

    pub fn contains(&self, h: T) -> bool {
        h >= self.lo && h <= self.hi
    }
}

/// Inclusion filter for skin samples: lightness strictly above a floor and
/// hue inside one of the (closed) red arcs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SkinGate<T> {
    pub min_lightness: T,
    pub hue_arcs: Vec<HueArc<T>>,
}

impl<T: Scalar> Default for SkinGate<T> {
    fn default() -> Self {
        Self {
            min_lightness: T::lit(0.60),
            hue_arcs: vec![
                HueArc { lo: T::zero(), hi: T::lit(50.0) },
                HueArc { lo: T::lit(300.0), hi: T::lit(360.0) },
            ],
        }
    }
}

impl<T: Scalar> SkinGate<T> {
    pub fn new(min_lightness: T, hue_arcs: Vec<HueArc<T>>) -> Result<Self, ColorError> {
        if !(min_lightness >= T::zero() && min_lightness <= T::one()) {
            return Err(ColorError::MinLightness(min_lightness.as_f64()));
        }
        for arc in &hue_arcs {
            HueArc::new(arc.lo, arc.hi)?;
        }
        Ok(Self { min_lightness, hue_arcs })
    }

    pub fn passes(&self, c: &HslColor<T>) -> bool {
        passes_skin_gate(c, self)
    }
}

pub fn passes_skin_gate<T: Scalar>(c: &HslColor<T>, gate: &SkinGate<T>) -> bool {
    c.l > gate.min_lightness && gate.hue_arcs.iter().any(|arc| arc.contains(c.h))
}

/// Parses `"0:50,300:360"` into hue arcs.
pub fn parse_hue_arcs(text: &str) -> Result<Vec<HueArc<f64>>, String> {
    text.split(',')
        .map(str::trim)
        .filter(|part| !part.is_empty())
        .map(|part| {
            let (lo, hi) = part
                .split_once(':')
                .ok_or_else(|| format!("hue arc {part:?} is not of the form lo:hi"))?;
            let lo: f64 = lo.trim().parse().map_err(|_| format!("bad hue arc bound {lo:?}"))?;
            let hi: f64 = hi.trim().parse().map_err(|_| format!("bad hue arc bound {hi:?}"))?;
            HueArc::new(lo, hi).map_err(|e| e.to_string())
        })
        .collect()
}
