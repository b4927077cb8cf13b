//! Perceptually uniform wavelet color embeddings and the evaluation harness
//! used to compare them against external image embeddings and human color
//! judgments.
//!
//! The crate is organized bottom-up:
//!
//! * [`colorspace`]: sRGB decoding, JzAzBz conversion and luminance.
//! * [`datagen`]: block/stripe stimulus generation and dataset ingestion.
//! * [`scattering`]: second-order 2D Morlet scattering, 16 coefficients per
//!   channel for `J = 5`, `L = 4`.
//! * [`clustering`]: k-means and the size-preserving random relabeling.
//! * [`colormetrics`]: JzAzBz octant histograms, Jensen-Shannon color
//!   similarity, convex-hull coherence fraction.
//! * [`analysis`]: cosine similarity, ranks, Spearman, proportion/t tests, PCA.
//! * [`surveyeval`]: stimulus selection, comparison sets and judgment scoring.
//! * [`embedio`]: the JSON-lines embedding interchange format.

pub mod analysis;
pub mod clustering;
pub mod colormetrics;
pub mod colorspace;
pub mod datagen;
pub mod embedio;
mod error;
pub mod raster;
pub mod scattering;
pub mod surveyeval;

pub use error::{Error, Result};

pub use colorspace::{GrayPixel, JzazbzPixel, SrgbPixel};
pub use datagen::{ImageRecord, Source};
pub use raster::{Raster, Rect};
pub use scattering::{ColorMode, Embedding, FilterBank, ScatteringCoeffs};
pub use clustering::{ClusterModel, Init};
pub use colormetrics::ColorHistogram;
