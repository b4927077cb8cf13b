//! Second-order 2D Morlet scattering with orientation averaging.
//!
//! For a real channel `x`, scale indices `0 <= j < J` and orientations
//! `0 <= l < L`:
//!
//! * `s0 = mean(x * phi)`
//! * `s1[j] = avg_l mean(|x * psi(j, l)| * phi)`
//! * `s2[j1, j2] = avg_{l1, l2} mean(||x * psi(j1, l1)| * psi(j2, l2)| * phi)`
//!   for `j2 > j1`
//!
//! where `*` is circular convolution at native resolution. That is
//! `1 + J + J(J-1)/2` numbers per channel (16 for `J = 5`); the raw path
//! count before averaging is `1 + JL + L^2 J(J-1)/2`.

mod fft2;
mod filters;

use std::fmt;
use std::str::FromStr;
use std::ops::Range;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use filters::FilterBank;

use crate::colorspace::{linear_lut, luminance, rgb_to_jzazbz};
use crate::datagen::ImageRecord;
use crate::raster::Raster;
use crate::{Error, Result};

pub const DEFAULT_J: usize = 5;
pub const DEFAULT_L: usize = 4;
pub const WAVELET_ALGORITHM: &str = "wavelet";

/// Orientation-averaged coefficients of one channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScatteringCoeffs {
    pub s0: f64,
    pub s1: Vec<f64>,
    /// Pairs `(j1, j2)`, `j1 < j2`, in lexicographic order.
    pub s2: Vec<f64>,
}

impl ScatteringCoeffs {
    pub fn len(&self) -> usize {
        1 + self.s1.len() + self.s2.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.len());
        v.push(self.s0);
        v.extend_from_slice(&self.s1);
        v.extend_from_slice(&self.s2);
        v
    }

    /// Index into `s2` of the pair `(j1, j2)` with `j1 < j2 < scales`.
    pub fn pair_index(scales: usize, j1: usize, j2: usize) -> usize {
        debug_assert!(j1 < j2 && j2 < scales);
        j1 * scales - j1 * (j1 + 1) / 2 + (j2 - j1 - 1)
    }
}

/// Every scattering path before orientation averaging.
#[derive(Debug, Clone, PartialEq)]
pub struct ScatteringPaths {
    pub scales: usize,
    pub orientations: usize,
    pub s0: f64,
    /// `s1[j][l]`
    pub s1: Vec<Vec<f64>>,
    /// `s2[(j1, j2) pair index][l1 * L + l2]`
    pub s2: Vec<Vec<f64>>,
}

impl ScatteringPaths {
    pub fn path_count(&self) -> usize {
        1 + self.s1.iter().map(Vec::len).sum::<usize>() + self.s2.iter().map(Vec::len).sum::<usize>()
    }

    pub fn average(&self) -> ScatteringCoeffs {
        let mean = |v: &Vec<f64>| v.iter().sum::<f64>() / v.len() as f64;
        ScatteringCoeffs { s0: self.s0, s1: self.s1.iter().map(mean).collect(), s2: self.s2.iter().map(mean).collect() }
    }
}

struct Workspace {
    spectrum: Vec<Complex64>,
    buf: Vec<Complex64>,
    out: Vec<Complex64>,
    modulus_spec: Vec<Complex64>,
    scratch: Vec<Complex64>,
}

impl Workspace {
    fn new(bank: &FilterBank) -> Self {
        let n = bank.width() * bank.height();
        let z = Complex64::new(0.0, 0.0);
        Workspace {
            spectrum: vec![z; n],
            buf: vec![z; n],
            out: vec![z; n],
            modulus_spec: vec![z; n],
            scratch: vec![z; bank.fft.scratch_len()],
        }
    }
}

fn check_dims(channel: &Raster<f64>, bank: &FilterBank) -> Result<()> {
    if channel.width() != bank.width() || channel.height() != bank.height() {
        return Err(Error::DimensionMismatch {
            expected: bank.width() * bank.height(),
            got: channel.width() * channel.height(),
        });
    }
    Ok(())
}

#[inline]
/// `dst = a * b` on the filter's support rows, zero elsewhere.
fn multiply(dst: &mut [Complex64], a: &[Complex64], b: &[Complex64], rows: &[Range<usize>], row_len: usize) {
    dst.fill(Complex64::new(0.0, 0.0));
    for r in rows {
        let span = r.start * row_len..r.end * row_len;
        for ((d, x), y) in dst[span.clone()].iter_mut().zip(&a[span.clone()]).zip(&b[span]) {
            *d = x * y;
        }
    }
}

#[inline]
fn modulus(c: &Complex64) -> f64 {
    (c.re * c.re + c.im * c.im).sqrt()
}

/// Inverse transform of `spectrum * psi(j, l)` into `ws.out`.
fn filter_inverse(ws: &mut Workspace, bank: &FilterBank, second: bool, j: usize, l: usize) {
    let src = if second { &ws.modulus_spec } else { &ws.spectrum };
    let rows = bank.psi_support(j, l);
    multiply(&mut ws.buf, src, bank.psi_conv(j, l), rows, bank.height());
    bank.fft.inverse_rows(&mut ws.buf, rows, &mut ws.out, &mut ws.scratch);
}

/// Spatial mean of `u * phi`. Circular convolution scales the DC term by
/// `phi_hat(0)`, so this is the mean of `u` times the low-pass DC gain.
#[inline]
fn lowpass_mean(sum: f64, n: usize, phi_dc: f64) -> f64 {
    sum / n as f64 * phi_dc
}

/// Computes all `1 + JL + L^2 J(J-1)/2` scattering paths of `channel`.
pub fn scatter_paths(channel: &Raster<f64>, bank: &FilterBank) -> Result<ScatteringPaths> {
    check_dims(channel, bank)?;
    let (jn, ln) = (bank.scales(), bank.orientations());
    let n = channel.len();
    let phi_dc = bank.phi_dc();
    let mut ws = Workspace::new(bank);

    for (b, &v) in ws.buf.iter_mut().zip(channel.as_slice()) {
        *b = Complex64::new(v, 0.0);
    }
    let s0 = lowpass_mean(channel.as_slice().iter().sum(), n, phi_dc);
    bank.fft.forward(&mut ws.buf, &mut ws.spectrum, &mut ws.scratch);

    let mut s1 = vec![vec![0.0; ln]; jn];
    let mut s2 = vec![vec![0.0; ln * ln]; jn * jn.saturating_sub(1) / 2];

    for j1 in 0..jn {
        for l1 in 0..ln {
            filter_inverse(&mut ws, bank, false, j1, l1);
            let mut sum = 0.0;
            for (o, b) in ws.out.iter().zip(ws.buf.iter_mut()) {
                let m = modulus(o);
                sum += m;
                *b = Complex64::new(m, 0.0);
            }
            s1[j1][l1] = lowpass_mean(sum, n, phi_dc);
            if j1 + 1 == jn {
                continue;
            }
            bank.fft.forward(&mut ws.buf, &mut ws.modulus_spec, &mut ws.scratch);
            for j2 in j1 + 1..jn {
                let pair = ScatteringCoeffs::pair_index(jn, j1, j2);
                for l2 in 0..ln {
                    filter_inverse(&mut ws, bank, true, j2, l2);
                    let sum: f64 = ws.out.iter().map(modulus).sum();
                    s2[pair][l1 * ln + l2] = lowpass_mean(sum, n, phi_dc);
                }
            }
        }
    }
    Ok(ScatteringPaths { scales: jn, orientations: ln, s0, s1, s2 })
}

pub fn scatter_channel(channel: &Raster<f64>, bank: &FilterBank) -> Result<ScatteringCoeffs> {
    Ok(scatter_paths(channel, bank)?.average())
}

/// `|x * psi(j, l)|` for every first-order path, before any averaging.
pub fn first_order_maps(channel: &Raster<f64>, bank: &FilterBank) -> Result<Vec<Vec<Raster<f64>>>> {
    check_dims(channel, bank)?;
    let mut ws = Workspace::new(bank);
    for (b, &v) in ws.buf.iter_mut().zip(channel.as_slice()) {
        *b = Complex64::new(v, 0.0);
    }
    bank.fft.forward(&mut ws.buf, &mut ws.spectrum, &mut ws.scratch);
    let mut maps = Vec::with_capacity(bank.scales());
    for j in 0..bank.scales() {
        let mut row = Vec::with_capacity(bank.orientations());
        for l in 0..bank.orientations() {
            filter_inverse(&mut ws, bank, false, j, l);
            let data = ws.out.iter().map(modulus).collect();
            row.push(Raster::from_vec(bank.width(), bank.height(), data)?);
        }
        maps.push(row);
    }
    Ok(maps)
}

/// Which channels of an image are scattered.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ColorMode {
    /// Jz, Az, Bz channels; 48 coefficients for `J = 5`.
    Jzazbz,
    /// Linear (EOTF-decoded) R, G, B channels.
    Rgb,
    /// Rec. 709 relative luminance; 16 coefficients.
    Grayscale,
}

impl ColorMode {
    pub fn as_str(self) -> &'static str {
        match self {
            ColorMode::Jzazbz => "jzazbz",
            ColorMode::Rgb => "rgb",
            ColorMode::Grayscale => "grayscale",
        }
    }

    pub fn channels(self) -> usize {
        match self {
            ColorMode::Grayscale => 1,
            _ => 3,
        }
    }
}

impl fmt::Display for ColorMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for ColorMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "jzazbz" => Ok(ColorMode::Jzazbz),
            "rgb" => Ok(ColorMode::Rgb),
            "grayscale" | "gray" => Ok(ColorMode::Grayscale),
            other => Err(Error::Format(format!("unknown color mode {other:?}"))),
        }
    }
}

/// A fixed-length image embedding with its provenance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Embedding {
    pub image_id: String,
    /// Producer, e.g. `wavelet` or an external model name.
    pub algorithm: String,
    /// Color mode for wavelet embeddings, layer/objective tag otherwise.
    pub tag: String,
    pub vector: Vec<f64>,
}

impl Embedding {
    pub fn dim(&self) -> usize {
        self.vector.len()
    }
}

/// Splits an image into the real channels scattered under `mode`.
pub fn channels(img: &Raster<crate::SrgbPixel>, mode: ColorMode) -> Vec<Raster<f64>> {
    match mode {
        ColorMode::Jzazbz => {
            let jz = img.map(rgb_to_jzazbz);
            vec![jz.map(|p| p.jz), jz.map(|p| p.az), jz.map(|p| p.bz)]
        }
        ColorMode::Rgb => {
            let lut = linear_lut();
            vec![img.map(|p| lut[p.r as usize]), img.map(|p| lut[p.g as usize]), img.map(|p| lut[p.b as usize])]
        }
        ColorMode::Grayscale => vec![img.map(|p| luminance(p).y)],
    }
}

/// Wavelet embedding of the full image (border included).
pub fn embed(img: &ImageRecord, mode: ColorMode, bank: &FilterBank) -> Result<Embedding> {
    if img.pixels.is_empty() {
        return Err(Error::Degenerate(format!("{}: empty raster", img.id)));
    }
    let mut vector = Vec::with_capacity(mode.channels() * 16);
    for ch in channels(&img.pixels, mode) {
        vector.extend(scatter_channel(&ch, bank)?.to_vec());
    }
    Ok(Embedding { image_id: img.id.clone(), algorithm: WAVELET_ALGORITHM.into(), tag: mode.as_str().into(), vector })
}

/// Embeds images in parallel; output order matches input order.
pub fn embed_batch(images: &[ImageRecord], mode: ColorMode, bank: &FilterBank) -> Result<Vec<Embedding>> {
    images.par_iter().map(|img| embed(img, mode, bank)).collect()
}

/// Embeds images of possibly mixed sizes, building one bank per size.
pub fn embed_all(images: &[ImageRecord], mode: ColorMode, j: usize, l: usize) -> Result<Vec<Embedding>> {
    let mut banks: Vec<((usize, usize), FilterBank)> = Vec::new();
    for img in images {
        let key = (img.width(), img.height());
        if !banks.iter().any(|(k, _)| *k == key) {
            banks.push((key, FilterBank::new(key.0, key.1, j, l)?));
        }
    }
    images
        .par_iter()
        .map(|img| {
            let key = (img.width(), img.height());
            let bank = &banks.iter().find(|(k, _)| *k == key).expect("bank built above").1;
            embed(img, mode, bank)
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShuffleScope {
    Global,
    PerColumn,
}

impl FromStr for ShuffleScope {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "global" => Ok(ShuffleScope::Global),
            "per_column" | "per-column" => Ok(ShuffleScope::PerColumn),
            other => Err(Error::Format(format!("unknown shuffle scope {other:?}"))),
        }
    }
}

/// Permutes central-region pixels uniformly at random, either across the
/// whole region or within each column. The border is untouched.
pub fn shuffle_pixels(img: &ImageRecord, scope: ShuffleScope, seed: u64) -> ImageRecord {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = img.clone();
    let m = img.central_mask;
    match scope {
        ShuffleScope::Global => {
            let mut px: Vec<_> = img.central_pixels().collect();
            px.shuffle(&mut rng);
            let mut it = px.into_iter();
            for y in m.y0..m.y1 {
                for x in m.x0..m.x1 {
                    out.pixels.set(x, y, it.next().expect("same count"));
                }
            }
        }
        ShuffleScope::PerColumn => {
            for x in m.x0..m.x1 {
                let mut col: Vec<_> = (m.y0..m.y1).map(|y| img.pixels.get(x, y)).collect();
                col.shuffle(&mut rng);
                for (y, p) in (m.y0..m.y1).zip(col) {
                    out.pixels.set(x, y, p);
                }
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::colorspace::SrgbPixel;
    use crate::datagen::{render_block, render_stripes, Source};
    use crate::raster::Rect;

    fn noise(w: usize, h: usize, seed: u64) -> Raster<f64> {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        Raster::from_fn(w, h, |_, _| rng.gen::<f64>())
    }

    fn rel_diff(a: &[f64], b: &[f64]) -> f64 {
        let num: f64 = a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>().sqrt();
        let den: f64 = a.iter().map(|x| x * x).sum::<f64>().sqrt();
        num / den
    }

    #[test]
    fn pair_index_is_dense() {
        let mut seen = Vec::new();
        for j1 in 0..5 {
            for j2 in j1 + 1..5 {
                seen.push(ScatteringCoeffs::pair_index(5, j1, j2));
            }
        }
        assert_eq!(seen, (0..10).collect::<Vec<_>>());
    }

    #[test]
    fn path_and_coefficient_counts() {
        let bank = FilterBank::new(32, 32, 5, 4).unwrap();
        let paths = scatter_paths(&noise(32, 32, 1), &bank).unwrap();
        assert_eq!(paths.path_count(), 1 + 5 * 4 + 16 * 10);
        assert_eq!(paths.path_count(), 181);
        assert_eq!(paths.average().len(), 16);
    }

    #[test]
    fn constant_raster_has_only_s0() {
        let bank = FilterBank::new(40, 36, 3, 4).unwrap();
        let c = scatter_channel(&Raster::filled(40, 36, 0.7), &bank).unwrap();
        assert!((c.s0 - 0.7).abs() < 1e-12);
        for v in c.s1.iter().chain(&c.s2) {
            assert!(v.abs() < 1e-8 * c.s0);
        }
    }

    #[test]
    fn circular_shift_invariance() {
        let bank = FilterBank::new(48, 40, 4, 4).unwrap();
        let x = noise(48, 40, 3);
        let a = scatter_channel(&x, &bank).unwrap().to_vec();
        let b = scatter_channel(&x.roll(17, 5), &bank).unwrap().to_vec();
        assert!(rel_diff(&a, &b) < 1e-10);
    }

    #[test]
    fn coefficients_nonnegative() {
        let bank = FilterBank::new(32, 32, 5, 4).unwrap();
        let c = scatter_channel(&noise(32, 32, 9), &bank).unwrap();
        assert!(c.s1.iter().chain(&c.s2).all(|&v| v >= -1e-9));
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let bank = FilterBank::new(32, 32, 5, 4).unwrap();
        assert!(matches!(scatter_channel(&noise(33, 32, 0), &bank), Err(Error::DimensionMismatch { .. })));
    }

    fn record(px: Raster<SrgbPixel>, border: usize) -> ImageRecord {
        let s = px.width();
        ImageRecord::new("t", px, Rect::new(border, border, s - border, s - border), Source::Block).unwrap()
    }

    #[test]
    fn embedding_dims_per_mode() {
        let bank = FilterBank::new(32, 32, 5, 4).unwrap();
        let img = record(render_block(32, 4, SrgbPixel::WHITE, SrgbPixel::new(200, 10, 40)), 4);
        assert_eq!(embed(&img, ColorMode::Jzazbz, &bank).unwrap().dim(), 48);
        assert_eq!(embed(&img, ColorMode::Rgb, &bank).unwrap().dim(), 48);
        let g = embed(&img, ColorMode::Grayscale, &bank).unwrap();
        assert_eq!((g.dim(), g.tag.as_str(), g.algorithm.as_str()), (16, "grayscale", "wavelet"));
    }

    #[test]
    fn uniform_white_has_only_s0_entries() {
        let bank = FilterBank::new(32, 32, 5, 4).unwrap();
        let img = record(Raster::filled(32, 32, SrgbPixel::WHITE), 4);
        let e = embed(&img, ColorMode::Jzazbz, &bank).unwrap();
        for (i, v) in e.vector.iter().enumerate() {
            if i % 16 != 0 {
                assert!(v.abs() < 1e-12, "coefficient {i} = {v}");
            }
        }
        assert!(e.vector[0] > 0.16);
    }

    #[test]
    fn stripes_separate_from_block() {
        let bank = FilterBank::new(64, 64, 5, 4).unwrap();
        let a = SrgbPixel::new(255, 0, 0);
        let b = SrgbPixel::new(0, 0, 255);
        let stripes = embed(&record(render_stripes(64, 8, SrgbPixel::WHITE, 6, a, b), 8), ColorMode::Jzazbz, &bank);
        let block = embed(&record(render_block(64, 8, SrgbPixel::WHITE, a), 8), ColorMode::Jzazbz, &bank);
        let (s, k) = (stripes.unwrap().vector, block.unwrap().vector);
        assert!(rel_diff(&k, &s) > 0.01);
    }

    #[test]
    fn shuffle_preserves_central_multiset_and_border() {
        let a = SrgbPixel::new(255, 0, 0);
        let b = SrgbPixel::new(0, 0, 255);
        let img = record(render_stripes(24, 4, SrgbPixel::WHITE, 2, a, b), 4);
        for scope in [ShuffleScope::Global, ShuffleScope::PerColumn] {
            let s = shuffle_pixels(&img, scope, 5);
            let mut before: Vec<_> = img.central_pixels().collect();
            let mut after: Vec<_> = s.central_pixels().collect();
            before.sort();
            after.sort();
            assert_eq!(before, after);
            for y in 0..24 {
                for x in 0..24 {
                    if !img.central_mask.contains(x, y) {
                        assert_eq!(s.pixels.get(x, y), SrgbPixel::WHITE);
                    }
                }
            }
            assert_eq!(shuffle_pixels(&img, scope, 5), s);
        }
        // per-column shuffle of vertical stripes is the identity
        assert_eq!(shuffle_pixels(&img, ShuffleScope::PerColumn, 1), img);
        let uniform = record(render_block(24, 4, SrgbPixel::WHITE, a), 4);
        assert_eq!(shuffle_pixels(&uniform, ShuffleScope::Global, 3), uniform);
    }
}
