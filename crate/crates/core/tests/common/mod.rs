//! Shared test helpers: an independent direct-space scattering oracle.
#![allow(dead_code)]

use std::f64::consts::PI;

use huewave::raster::Raster;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct C {
    pub re: f64,
    pub im: f64,
}

impl C {
    fn abs(self) -> f64 {
        (self.re * self.re + self.im * self.im).sqrt()
    }
}

/// Spatial Morlet built straight from its definition: rotated coordinates
/// `u` (along the wave vector) and `v`, Gaussian envelope with aspect
/// `slant`, tiled over the neighboring 5x5 periods, zero-mean corrected.
pub fn morlet(w: usize, h: usize, sigma: f64, theta: f64, xi: f64, slant: f64) -> Vec<C> {
    let mut wave = vec![C { re: 0.0, im: 0.0 }; w * h];
    let mut env = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            for ty in -2i64..=2 {
                for tx in -2i64..=2 {
                    let px = x as f64 + (tx * w as i64) as f64;
                    let py = y as f64 + (ty * h as i64) as f64;
                    let u = theta.cos() * px + theta.sin() * py;
                    let v = -theta.sin() * px + theta.cos() * py;
                    let g = (-(u * u + slant * slant * v * v) / (2.0 * sigma * sigma)).exp();
                    env[y * w + x] += g;
                    wave[y * w + x].re += g * (xi * u).cos();
                    wave[y * w + x].im += g * (xi * u).sin();
                }
            }
        }
    }
    let se: f64 = env.iter().sum();
    let k = C { re: wave.iter().map(|c| c.re).sum::<f64>() / se, im: wave.iter().map(|c| c.im).sum::<f64>() / se };
    wave.iter().zip(&env).map(|(c, &e)| C { re: c.re - k.re * e, im: c.im - k.im * e }).collect()
}

/// Largest DFT magnitude, by brute force.
fn dft_peak(f: &[C], w: usize, h: usize) -> f64 {
    let cx: Vec<(f64, f64)> = (0..w).map(|i| (2.0 * PI * i as f64 / w as f64).sin_cos()).collect();
    let cy: Vec<(f64, f64)> = (0..h).map(|i| (2.0 * PI * i as f64 / h as f64).sin_cos()).collect();
    let mut peak: f64 = 0.0;
    for ky in 0..h {
        for kx in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for y in 0..h {
                for x in 0..w {
                    let (s1, c1) = cx[(kx * x) % w];
                    let (s2, c2) = cy[(ky * y) % h];
                    // exp(-i(a + b)) = (c1 c2 - s1 s2) - i (s1 c2 + c1 s2)
                    let (c, s) = (c1 * c2 - s1 * s2, s1 * c2 + c1 * s2);
                    let v = f[y * w + x];
                    re += v.re * c + v.im * s;
                    im += v.im * c - v.re * s;
                }
            }
            peak = peak.max((re * re + im * im).sqrt());
        }
    }
    peak
}

/// Circular convolution by direct summation.
pub fn conv(x: &[C], f: &[C], w: usize, h: usize) -> Vec<C> {
    let mut out = vec![C { re: 0.0, im: 0.0 }; w * h];
    for y in 0..h {
        for xx in 0..w {
            let (mut re, mut im) = (0.0, 0.0);
            for yy in 0..h {
                let fy = (y + h - yy) % h;
                for xs in 0..w {
                    let a = x[yy * w + xs];
                    let b = f[fy * w + (xx + w - xs) % w];
                    re += a.re * b.re - a.im * b.im;
                    im += a.re * b.im + a.im * b.re;
                }
            }
            out[y * w + xx] = C { re, im };
        }
    }
    out
}

/// Raw scattering paths `(s0, s1[j][l], s2[(j1,j2) in order][l1 * L + l2])`
/// by direct convolution, with filters scaled to unit peak frequency
/// response and the mean as the low-pass average.
pub fn direct_paths(img: &Raster<f64>, j_max: usize, l_max: usize) -> (f64, Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let (w, h) = (img.width(), img.height());
    let n = (w * h) as f64;
    let x: Vec<C> = img.as_slice().iter().map(|&v| C { re: v, im: 0.0 }).collect();
    let mut psi = Vec::new();
    for j in 0..j_max {
        let mut row = Vec::new();
        for l in 0..l_max {
            let sigma = 0.8 * 2f64.powi(j as i32);
            let xi = 0.75 * PI / 2f64.powi(j as i32);
            let f = morlet(w, h, sigma, l as f64 * PI / l_max as f64, xi, 4.0 / l_max as f64);
            let p = dft_peak(&f, w, h);
            row.push(f.into_iter().map(|c| C { re: c.re / p, im: c.im / p }).collect::<Vec<_>>());
        }
        psi.push(row);
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / n;
    let s0 = mean(img.as_slice());
    let mut s1 = vec![vec![0.0; l_max]; j_max];
    let mut u1 = vec![vec![Vec::new(); l_max]; j_max];
    for j in 0..j_max {
        for l in 0..l_max {
            let u: Vec<f64> = conv(&x, &psi[j][l], w, h).into_iter().map(C::abs).collect();
            s1[j][l] = mean(&u);
            u1[j][l] = u;
        }
    }
    let mut s2 = Vec::new();
    for j1 in 0..j_max {
        for j2 in j1 + 1..j_max {
            let mut row = vec![0.0; l_max * l_max];
            for l1 in 0..l_max {
                let u: Vec<C> = u1[j1][l1].iter().map(|&v| C { re: v, im: 0.0 }).collect();
                for l2 in 0..l_max {
                    let v: Vec<f64> = conv(&u, &psi[j2][l2], w, h).into_iter().map(C::abs).collect();
                    row[l1 * l_max + l2] = mean(&v);
                }
            }
            s2.push(row);
        }
    }
    (s0, s1, s2)
}

pub fn random_raster(w: usize, h: usize, seed: u64) -> Raster<f64> {
    // xorshift: keeps this helper independent of the crate's RNG choices
    let mut s = seed.wrapping_mul(0x9E37_79B9_7F4A_7C15) | 1;
    Raster::from_fn(w, h, |_, _| {
        s ^= s << 13;
        s ^= s >> 7;
        s ^= s << 17;
        (s >> 11) as f64 / (1u64 << 53) as f64
    })
}

pub fn rel_err(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}
