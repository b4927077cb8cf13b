//! sRGB to JzAzBz and luminance conversions.
//!
//! The JzAzBz pipeline follows Safdar et al. (2017): linear sRGB is mapped to
//! absolute CIE XYZ under D65 with the reference white at
//! [`WHITE_LUMINANCE`] cd/m^2, pre-adjusted, projected to cone space, passed
//! through the PQ transfer curve and rotated to the opponent axes. All math is
//! `f64`; the PQ curve is stiff near zero.

use serde::{Deserialize, Serialize};

use crate::raster::Raster;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SrgbPixel {
    pub r: u8,
    pub g: u8,
    pub b: u8,
}

impl SrgbPixel {
    pub const BLACK: SrgbPixel = SrgbPixel::new(0, 0, 0);
    pub const WHITE: SrgbPixel = SrgbPixel::new(255, 255, 255);
    pub const GRAY: SrgbPixel = SrgbPixel::new(128, 128, 128);

    pub const fn new(r: u8, g: u8, b: u8) -> Self {
        SrgbPixel { r, g, b }
    }

    pub fn channels(self) -> [u8; 3] {
        [self.r, self.g, self.b]
    }

    /// `RRGGBB`, uppercase, no leading `#`.
    pub fn to_hex(self) -> String {
        format!("{:02X}{:02X}{:02X}", self.r, self.g, self.b)
    }

    /// Parses `RRGGBB` with an optional leading `#`.
    pub fn from_hex(s: &str) -> Result<Self> {
        let s = s.trim().trim_start_matches('#');
        if s.len() != 6 || !s.is_ascii() {
            return Err(Error::Format(format!("expected RRGGBB hex color, got {s:?}")));
        }
        let channel = |i: usize| {
            u8::from_str_radix(&s[i..i + 2], 16).map_err(|_| Error::Format(format!("bad hex color {s:?}")))
        };
        Ok(SrgbPixel::new(channel(0)?, channel(2)?, channel(4)?))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct JzazbzPixel {
    pub jz: f64,
    pub az: f64,
    pub bz: f64,
}

impl JzazbzPixel {
    pub fn to_array(self) -> [f64; 3] {
        [self.jz, self.az, self.bz]
    }

    pub fn distance(self, other: JzazbzPixel) -> f64 {
        let (dj, da, db) = (self.jz - other.jz, self.az - other.az, self.bz - other.bz);
        (dj * dj + da * da + db * db).sqrt()
    }
}

/// Relative luminance in `[0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GrayPixel {
    pub y: f64,
}

/// Absolute luminance assigned to sRGB white.
pub const WHITE_LUMINANCE: f64 = 100.0;

/// Per-axis extent of the sRGB gamut in JzAzBz, from a scan of all 256^3
/// codes (see `canonical_ranges_match_full_cube_scan`).
pub const JZ_RANGE: (f64, f64) = (0.0, 0.167_173_552_986_495_9);
pub const AZ_RANGE: (f64, f64) = (-0.092_861_675_715_713_22, 0.109_004_254_668_362_08);
pub const BZ_RANGE: (f64, f64) = (-0.156_320_110_399_891_22, 0.115_229_173_527_090_72);

// Linear sRGB -> XYZ (D65).
const RGB_TO_XYZ: [[f64; 3]; 3] = [
    [0.412_456_4, 0.357_576_1, 0.180_437_5],
    [0.212_672_9, 0.715_152_2, 0.072_175_0],
    [0.019_333_9, 0.119_192_0, 0.950_304_1],
];

const XYZ_TO_LMS: [[f64; 3]; 3] = [
    [0.414_789_72, 0.579_999, 0.014_648],
    [-0.201_510_0, 1.120_649, 0.053_100_8],
    [-0.016_600_8, 0.264_800, 0.668_479_9],
];

const LMS_TO_IAB: [[f64; 3]; 3] = [
    [0.5, 0.5, 0.0],
    [3.524_000, -4.066_708, 0.542_708],
    [0.199_076, 1.096_799, -1.295_875],
];

const B: f64 = 1.15;
const G: f64 = 0.66;
const C1: f64 = 3424.0 / 4096.0;
const C2: f64 = 2413.0 / 128.0;
const C3: f64 = 2392.0 / 128.0;
const N: f64 = 2610.0 / 16384.0;
const P: f64 = 1.7 * 2523.0 / 32.0;
const D: f64 = -0.56;
const D0: f64 = 1.629_549_953_282_156_6e-11;

// Rec. 709 luma weights applied to linear channels.
const LUMA: [f64; 3] = [0.2126, 0.7152, 0.0722];

/// sRGB electro-optical transfer function for one 8-bit code.
pub fn srgb_to_linear(code: u8) -> f64 {
    let c = code as f64 / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

fn mat_vec(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn pq(v: f64) -> f64 {
    let t = (v.max(0.0) / 10_000.0).powf(N);
    ((C1 + C2 * t) / (1.0 + C3 * t)).powf(P)
}

/// Converts linear RGB in `[0, 1]` to JzAzBz.
pub fn linear_to_jzazbz(lin: [f64; 3]) -> JzazbzPixel {
    let [x, y, z] = mat_vec(&RGB_TO_XYZ, lin).map(|v| v * WHITE_LUMINANCE);
    let xp = B * x - (B - 1.0) * z;
    let yp = G * y - (G - 1.0) * x;
    let lms = mat_vec(&XYZ_TO_LMS, [xp, yp, z]).map(pq);
    let [iz, az, bz] = mat_vec(&LMS_TO_IAB, lms);
    let jz = (1.0 + D) * iz / (1.0 + D * iz) - D0;
    JzazbzPixel { jz, az, bz }
}

pub fn rgb_to_jzazbz(p: SrgbPixel) -> JzazbzPixel {
    linear_to_jzazbz(p.channels().map(srgb_to_linear))
}

pub fn luminance(p: SrgbPixel) -> GrayPixel {
    let lin = p.channels().map(srgb_to_linear);
    let y = LUMA[0] * lin[0] + LUMA[1] * lin[1] + LUMA[2] * lin[2];
    GrayPixel { y: y.clamp(0.0, 1.0) }
}

/// Lookup table of the EOTF for all 256 codes.
pub fn linear_lut() -> [f64; 256] {
    std::array::from_fn(|i| srgb_to_linear(i as u8))
}

fn ensure_nonempty<T: Copy>(img: &Raster<T>) -> Result<()> {
    if img.is_empty() {
        return Err(Error::Degenerate("empty raster".into()));
    }
    Ok(())
}

pub fn image_to_jzazbz(img: &Raster<SrgbPixel>) -> Result<Raster<JzazbzPixel>> {
    ensure_nonempty(img)?;
    Ok(img.map(rgb_to_jzazbz))
}

pub fn to_grayscale(img: &Raster<SrgbPixel>) -> Result<Raster<GrayPixel>> {
    ensure_nonempty(img)?;
    Ok(img.map(luminance))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn eotf_endpoints_and_midpoint() {
        assert_eq!(srgb_to_linear(0), 0.0);
        assert_eq!(srgb_to_linear(255), 1.0);
        // closed form ((128/255 + 0.055) / 1.055)^2.4
        let v = srgb_to_linear(128);
        assert!((v - 0.215_860_500_113_899_26).abs() < 1e-15);
        assert!(v > 0.21 && v < 0.22);
        for c in 0..255u8 {
            assert!(srgb_to_linear(c) < srgb_to_linear(c + 1));
        }
    }

    #[test]
    fn black_is_lightness_origin() {
        let p = rgb_to_jzazbz(SrgbPixel::BLACK);
        assert!(p.jz.abs() < 1e-9);
        assert!(p.az.abs() < 1e-20 && p.bz.abs() < 1e-20);
    }

    #[test]
    fn red_matches_scripted_reference() {
        // independent numpy implementation of the published matrices
        let p = rgb_to_jzazbz(SrgbPixel::new(255, 0, 0));
        let want = [0.098_974_014_520_539_57, 0.099_649_985_895_220_59, 0.091_239_558_279_822_76];
        for (got, want) in p.to_array().iter().zip(want) {
            assert!((got - want).abs() < 1e-6, "{got} vs {want}");
        }
    }

    #[test]
    fn white_and_grays_are_near_neutral() {
        // The published cone matrix does not map D65 exactly onto the
        // achromatic axis; the residual is ~1.3e-4 at white.
        let w = rgb_to_jzazbz(SrgbPixel::WHITE);
        assert!((w.jz - 0.167_173_552_986_495_9).abs() < 1e-9);
        assert!((w.az + 1.340_610_602_320_471_2e-4).abs() < 1e-9);
        assert!((w.bz + 8.245_945_805_312_105e-5).abs() < 1e-9);
        for g in 0..=255u8 {
            let p = rgb_to_jzazbz(SrgbPixel::new(g, g, g));
            assert!(p.az.abs() < 1.5e-4 && p.bz.abs() < 1.0e-4, "gray {g}: {p:?}");
        }
    }

    #[test]
    fn gray_ramp_is_strictly_monotone() {
        let jz: Vec<f64> = (0..=255u8).map(|g| rgb_to_jzazbz(SrgbPixel::new(g, g, g)).jz).collect();
        assert!(jz.windows(2).all(|w| w[0] < w[1]));
    }

    #[test]
    fn random_pixels_are_finite_and_in_gamut() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..100_000 {
            let px = SrgbPixel::new(rng.gen(), rng.gen(), rng.gen());
            let p = rgb_to_jzazbz(px);
            assert!(p.jz.is_finite() && p.az.is_finite() && p.bz.is_finite());
            assert!(p.jz >= JZ_RANGE.0 - 1e-12 && p.jz <= JZ_RANGE.1 + 1e-12);
            assert!(p.az >= AZ_RANGE.0 - 1e-12 && p.az <= AZ_RANGE.1 + 1e-12);
            assert!(p.bz >= BZ_RANGE.0 - 1e-12 && p.bz <= BZ_RANGE.1 + 1e-12);
            assert_eq!(rgb_to_jzazbz(px), p);
        }
    }

    #[test]
    fn canonical_ranges_match_full_cube_scan() {
        let lut = linear_lut();
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for r in 0..256 {
            for g in 0..256 {
                for b in 0..256 {
                    let p = linear_to_jzazbz([lut[r], lut[g], lut[b]]).to_array();
                    for k in 0..3 {
                        lo[k] = lo[k].min(p[k]);
                        hi[k] = hi[k].max(p[k]);
                    }
                }
            }
        }
        let frozen = [JZ_RANGE, AZ_RANGE, BZ_RANGE];
        for k in 0..3 {
            assert!((lo[k] - frozen[k].0).abs() < 1e-12, "axis {k} min {}", lo[k]);
            assert!((hi[k] - frozen[k].1).abs() < 1e-12, "axis {k} max {}", hi[k]);
        }
    }

    #[test]
    fn grayscale_uses_linear_rec709() {
        assert_eq!(luminance(SrgbPixel::WHITE).y, 1.0);
        assert_eq!(luminance(SrgbPixel::BLACK).y, 0.0);
        assert!((luminance(SrgbPixel::new(0, 255, 0)).y - 0.7152).abs() < 1e-12);
    }

    #[test]
    fn raster_conversions() {
        let empty: Raster<SrgbPixel> = Raster::filled(0, 0, SrgbPixel::BLACK);
        assert!(image_to_jzazbz(&empty).is_err());
        assert!(to_grayscale(&empty).is_err());

        let one = Raster::filled(1, 1, SrgbPixel::BLACK);
        assert!(image_to_jzazbz(&one).unwrap().get(0, 0).jz.abs() < 1e-9);

        let colors = [
            SrgbPixel::new(255, 0, 0),
            SrgbPixel::new(0, 255, 0),
            SrgbPixel::new(0, 0, 255),
            SrgbPixel::new(12, 200, 99),
        ];
        let img = Raster::from_vec(2, 2, colors.to_vec()).unwrap();
        let out = image_to_jzazbz(&img).unwrap();
        for (i, c) in colors.iter().enumerate() {
            assert_eq!(out.as_slice()[i], rgb_to_jzazbz(*c));
        }
    }

    #[test]
    fn hex_round_trip() {
        let p = SrgbPixel::new(0x0a, 0xff, 0x33);
        assert_eq!(p.to_hex(), "0AFF33");
        assert_eq!(SrgbPixel::from_hex("#0aff33").unwrap(), p);
        assert!(SrgbPixel::from_hex("12345").is_err());
        assert!(SrgbPixel::from_hex("zz0000").is_err());
    }
}
