//! Morlet filter bank.
//!
//! Filters are built in the spatial domain on the raster grid, periodized
//! over neighboring tiles, and transformed once. Scale `j` (0-based) uses
//! envelope width `0.8 * 2^j` and center frequency `3pi/4 / 2^j`;
//! orientation `l` points the wave vector at angle `l * pi / L` from the +x
//! (column) axis, so `l = 0` responds to vertical structure.

use std::f64::consts::PI;
use std::ops::Range;

use rustfft::num_complex::Complex64;

use super::fft2::Fft2;
use crate::raster::Raster;
use crate::{Error, Result};

pub const SIGMA0: f64 = 0.8;
pub const XI0: f64 = 3.0 * PI / 4.0;
/// Band-pass responses below this fraction of the peak are stored as exact
/// zeros. The FFT that builds the filters leaves rounding noise of roughly
/// 1e-16 of the peak everywhere, so nothing above the noise floor is lost.
pub const SUPPORT_EPS: f64 = 1e-14;

/// Frequency-domain Morlet band-pass filters and the Gaussian low-pass.
///
/// Band-pass filters have unit peak magnitude and zero DC response; the
/// low-pass has unit DC gain. Immutable after construction and shareable
/// across threads.
#[derive(Debug, Clone)]
pub struct FilterBank {
    width: usize,
    height: usize,
    j: usize,
    l: usize,
    // transposed layout, pre-divided by width * height so an unnormalized
    // inverse FFT of (spectrum * filter) is the circular convolution
    psi: Vec<Vec<Complex64>>,
    // per band-pass filter, the kx rows of the transposed spectrum holding
    // any nonzero response
    support: Vec<Vec<Range<usize>>>,
    phi_dc: f64,
    phi: Vec<f64>,
    pub(crate) fft: Fft2,
}

/// Spatial Gabor on the `width x height` grid, periodized. The envelope is
/// `exp(-x^T R D R^T x / (2 sigma^2))` with `D = diag(1, slant^2)`.
pub(crate) fn gabor(width: usize, height: usize, sigma: f64, theta: f64, xi: f64, slant: f64) -> Vec<Complex64> {
    let (c, s) = (theta.cos(), theta.sin());
    let s2 = slant * slant;
    let inv = 1.0 / (2.0 * sigma * sigma);
    let a = (c * c + s2 * s * s) * inv;
    let b = 2.0 * (c * s - s2 * c * s) * inv;
    let d = (s * s + s2 * c * c) * inv;
    let (kx, ky) = (xi * c, xi * s);
    let min_curv = slant.min(1.0).powi(2) * inv;

    let mut out = vec![Complex64::new(0.0, 0.0); width * height];
    let (w, h) = (width as f64, height as f64);
    for ey in -2i32..=2 {
        for ex in -2i32..=2 {
            // copy covers x in [ex*w, (ex+1)*w); skip it when its nearest
            // point is far enough out that the envelope underflows
            let dx = if ex >= 1 { ex as f64 * w } else if ex <= -2 { (-(ex + 1)) as f64 * w } else { 0.0 };
            let dy = if ey >= 1 { ey as f64 * h } else if ey <= -2 { (-(ey + 1)) as f64 * h } else { 0.0 };
            if (dx * dx + dy * dy) * min_curv > 745.0 {
                continue;
            }
            for y in 0..height {
                let yy = y as f64 + ey as f64 * h;
                for x in 0..width {
                    let xx = x as f64 + ex as f64 * w;
                    let q = a * xx * xx + b * xx * yy + d * yy * yy;
                    if q > 745.0 {
                        continue;
                    }
                    out[y * width + x] += Complex64::from_polar((-q).exp(), kx * xx + ky * yy);
                }
            }
        }
    }
    let norm = 2.0 * PI * sigma * sigma / slant;
    out.iter_mut().for_each(|v| *v /= norm);
    out
}

/// Zero-mean Morlet: Gabor minus the envelope scaled to cancel its DC term.
pub(crate) fn morlet(width: usize, height: usize, sigma: f64, theta: f64, xi: f64, slant: f64) -> Vec<Complex64> {
    let wave = gabor(width, height, sigma, theta, xi, slant);
    let env = gabor(width, height, sigma, theta, 0.0, slant);
    let k = wave.iter().sum::<Complex64>() / env.iter().sum::<Complex64>();
    wave.iter().zip(&env).map(|(w, e)| w - k * e).collect()
}

/// Maximal runs of rows (length `row_len`) containing a nonzero entry.
fn row_support(spec: &[Complex64], row_len: usize) -> Vec<Range<usize>> {
    let mut out: Vec<Range<usize>> = Vec::new();
    for (r, row) in spec.chunks_exact(row_len).enumerate() {
        if row.iter().any(|c| c.re != 0.0 || c.im != 0.0) {
            match out.last_mut() {
                Some(last) if last.end == r => last.end = r + 1,
                _ => out.push(r..r + 1),
            }
        }
    }
    out
}

impl FilterBank {
    /// Builds `J * L` band-pass filters and one low-pass for a
    /// `width x height` raster.
    pub fn new(width: usize, height: usize, j: usize, l: usize) -> Result<Self> {
        if j == 0 || l == 0 {
            return Err(Error::InvalidSpec("J and L must be positive".into()));
        }
        let min = 1usize << j;
        if width < min || height < min {
            return Err(Error::RasterTooSmall { width, height, min });
        }
        let fft = Fft2::new(width, height);
        let n = width * height;
        let mut scratch = vec![Complex64::default(); fft.scratch_len()];
        let mut to_spectrum = |mut spatial: Vec<Complex64>| {
            let mut spec = vec![Complex64::default(); n];
            fft.forward(&mut spatial, &mut spec, &mut scratch);
            spec
        };

        let slant = 4.0 / l as f64;
        let mut psi = Vec::with_capacity(j * l);
        let mut support = Vec::with_capacity(j * l);
        for scale in 0..j {
            let sigma = SIGMA0 * (1u64 << scale) as f64;
            let xi = XI0 / (1u64 << scale) as f64;
            for o in 0..l {
                let theta = o as f64 * PI / l as f64;
                let mut spec = to_spectrum(morlet(width, height, sigma, theta, xi, slant));
                spec[0] = Complex64::new(0.0, 0.0);
                let peak = spec.iter().map(|c| c.norm()).fold(0.0, f64::max);
                let scale_by = 1.0 / (peak * n as f64);
                for c in spec.iter_mut() {
                    *c = if c.norm() < SUPPORT_EPS * peak { Complex64::new(0.0, 0.0) } else { *c * scale_by };
                }
                support.push(row_support(&spec, height));
                psi.push(spec);
            }
        }

        let phi_sigma = SIGMA0 * (1u64 << (j - 1)) as f64;
        let phi_spec = to_spectrum(gabor(width, height, phi_sigma, 0.0, 0.0, 1.0));
        let dc = phi_spec[0].re;
        let phi: Vec<f64> = phi_spec.iter().map(|c| c.re / dc).collect();

        Ok(FilterBank { width, height, j, l, psi, support, phi_dc: phi[0], phi, fft })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn scales(&self) -> usize {
        self.j
    }

    pub fn orientations(&self) -> usize {
        self.l
    }

    pub(crate) fn psi_conv(&self, j: usize, l: usize) -> &[Complex64] {
        &self.psi[j * self.l + l]
    }

    pub(crate) fn psi_support(&self, j: usize, l: usize) -> &[Range<usize>] {
        &self.support[j * self.l + l]
    }

    pub(crate) fn phi_dc(&self) -> f64 {
        self.phi_dc
    }

    fn to_natural<T: Copy>(&self, t: &[T]) -> Raster<T> {
        let h = self.height;
        Raster::from_fn(self.width, self.height, |kx, ky| t[kx * h + ky])
    }

    /// Band-pass response `psi_hat(kx, ky)` on the DFT grid.
    pub fn psi_spectrum(&self, j: usize, l: usize) -> Raster<Complex64> {
        let n = (self.width * self.height) as f64;
        self.to_natural(self.psi_conv(j, l)).map(|c| c * n)
    }

    pub fn phi_spectrum(&self) -> Raster<f64> {
        self.to_natural(&self.phi)
    }

    /// Spatial band-pass kernel (inverse DFT of the stored response).
    pub fn psi_spatial(&self, j: usize, l: usize) -> Raster<Complex64> {
        let mut spec = self.psi_conv(j, l).to_vec();
        let mut out = vec![Complex64::default(); spec.len()];
        let mut scratch = vec![Complex64::default(); self.fft.scratch_len()];
        self.fft.inverse(&mut spec, &mut out, &mut scratch);
        Raster::from_vec(self.width, self.height, out).expect("sized by construction")
    }

    pub fn phi_spatial(&self) -> Raster<f64> {
        let n = (self.width * self.height) as f64;
        let mut spec: Vec<Complex64> = self.phi.iter().map(|&v| Complex64::new(v / n, 0.0)).collect();
        let mut out = vec![Complex64::default(); spec.len()];
        let mut scratch = vec![Complex64::default(); self.fft.scratch_len()];
        self.fft.inverse(&mut spec, &mut out, &mut scratch);
        Raster::from_vec(self.width, self.height, out.iter().map(|c| c.re).collect()).expect("sized by construction")
    }
}
