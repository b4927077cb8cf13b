//! 2D FFTs over row-major buffers built from batched 1D transforms.
//!
//! Spatial data lives in natural layout (`height` rows of `width`); spectra
//! live in transposed layout (`width` rows of `height`, indexed
//! `kx * height + ky`). Each direction costs two batched passes and one
//! transpose.

use std::ops::Range;
use std::sync::Arc;

use rustfft::num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

#[derive(Clone)]
pub(crate) struct Fft2 {
    width: usize,
    height: usize,
    row_fwd: Arc<dyn Fft<f64>>,
    col_fwd: Arc<dyn Fft<f64>>,
    row_inv: Arc<dyn Fft<f64>>,
    col_inv: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for Fft2 {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Fft2").field("width", &self.width).field("height", &self.height).finish()
    }
}

impl Fft2 {
    pub fn new(width: usize, height: usize) -> Self {
        let mut planner = FftPlanner::new();
        Fft2 {
            width,
            height,
            row_fwd: planner.plan_fft_forward(width),
            col_fwd: planner.plan_fft_forward(height),
            row_inv: planner.plan_fft_inverse(width),
            col_inv: planner.plan_fft_inverse(height),
        }
    }

    pub fn scratch_len(&self) -> usize {
        [&self.row_fwd, &self.col_fwd, &self.row_inv, &self.col_inv]
            .iter()
            .map(|f| f.get_inplace_scratch_len())
            .max()
            .unwrap_or(0)
    }

    /// Natural-layout `input` (clobbered) to transposed-layout spectrum.
    pub fn forward(&self, input: &mut [Complex64], output: &mut [Complex64], scratch: &mut [Complex64]) {
        self.row_fwd.process_with_scratch(input, scratch);
        transpose::transpose(input, output, self.width, self.height);
        self.col_fwd.process_with_scratch(output, scratch);
    }

    /// Transposed-layout spectrum (clobbered) to natural-layout data,
    /// unnormalized (scaled by `width * height`).
    pub fn inverse(&self, input: &mut [Complex64], output: &mut [Complex64], scratch: &mut [Complex64]) {
        self.col_inv.process_with_scratch(input, scratch);
        transpose::transpose(input, output, self.height, self.width);
        self.row_inv.process_with_scratch(output, scratch);
    }

    /// As [`Fft2::inverse`], transforming only the spectrum rows (fixed
    /// `kx`) in `rows`; every other row of `input` must be zero.
    pub fn inverse_rows(&self, input: &mut [Complex64], rows: &[Range<usize>], output: &mut [Complex64], scratch: &mut [Complex64]) {
        let h = self.height;
        for r in rows {
            self.col_inv.process_with_scratch(&mut input[r.start * h..r.end * h], scratch);
        }
        transpose::transpose(input, output, self.height, self.width);
        self.row_inv.process_with_scratch(output, scratch);
    }

    /// Natural-layout index of transposed-layout position `t`.
    #[cfg(test)]
    pub fn natural_index(&self, t: usize) -> usize {
        let (kx, ky) = (t / self.height, t % self.height);
        ky * self.width + kx
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn brute_dft(data: &[Complex64], w: usize, h: usize) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); w * h];
        for ky in 0..h {
            for kx in 0..w {
                let mut acc = Complex64::new(0.0, 0.0);
                for y in 0..h {
                    for x in 0..w {
                        let ang = -2.0 * PI * ((kx * x) as f64 / w as f64 + (ky * y) as f64 / h as f64);
                        acc += data[y * w + x] * Complex64::from_polar(1.0, ang);
                    }
                }
                out[ky * w + kx] = acc;
            }
        }
        out
    }

    fn spec_at(natural: &[Complex64], fft: &Fft2, t: usize) -> Complex64 {
        natural[fft.natural_index(t)]
    }

    #[test]
    fn forward_matches_brute_force_and_inverse_round_trips() {
        let (w, h) = (6, 5);
        let data: Vec<Complex64> =
            (0..w * h).map(|i| Complex64::new((i as f64 * 0.37).sin(), (i as f64 * 0.11).cos())).collect();
        let fft = Fft2::new(w, h);
        let mut scratch = vec![Complex64::default(); fft.scratch_len()];
        let mut buf = data.clone();
        let mut spec = vec![Complex64::default(); w * h];
        fft.forward(&mut buf, &mut spec, &mut scratch);
        let want = brute_dft(&data, w, h);
        for t in 0..w * h {
            assert!((spec[t] - want[fft.natural_index(t)]).norm() < 1e-10);
        }
        let mut back = vec![Complex64::default(); w * h];
        fft.inverse(&mut spec, &mut back, &mut scratch);
        for (b, d) in back.iter().zip(&data) {
            assert!((b / (w * h) as f64 - d).norm() < 1e-12);
        }

        // a spectrum confined to kx in {1, 2, 4} inverts identically either way
        let mut sparse = want.clone();
        for t in 0..w * h {
            let kx = t / h;
            sparse[t] = if [1, 2, 4].contains(&kx) { spec_at(&want, &fft, t) } else { Complex64::default() };
        }
        let (mut a, mut b) = (sparse.clone(), sparse);
        let (mut full, mut pruned) = (vec![Complex64::default(); w * h], vec![Complex64::default(); w * h]);
        fft.inverse(&mut a, &mut full, &mut scratch);
        fft.inverse_rows(&mut b, &[1..3, 4..5], &mut pruned, &mut scratch);
        assert_eq!(full, pruned);
    }
}
