//! Fixtures shared by the benchmarks.

use huewave::colormetrics::{histograms, ColorHistogram};
use huewave::datagen::{gen_stripes, StripeSpec};
use huewave::scattering::{embed_batch, DEFAULT_J, DEFAULT_L};
use huewave::{ColorMode, Embedding, FilterBank, ImageRecord};

pub fn stripes(n: usize, size: usize) -> Vec<ImageRecord> {
    let spec = StripeSpec { size, border_width: size / 6, stripe_width: (size / 12).max(1), seed: 7, ..StripeSpec::default() };
    gen_stripes(n, &spec).expect("valid stripe spec")
}

pub fn bank(size: usize) -> FilterBank {
    FilterBank::new(size, size, DEFAULT_J, DEFAULT_L).expect("size admits J")
}

/// Stripe embeddings at a reduced size, for the clustering benchmarks.
pub fn stripe_embeddings(n: usize) -> Vec<Embedding> {
    let images = stripes(n, 64);
    embed_batch(&images, ColorMode::Jzazbz, &bank(64)).expect("embeddings")
}

pub fn stripe_histograms(n: usize) -> Vec<ColorHistogram> {
    histograms(&stripes(n, 64)).expect("histograms")
}
