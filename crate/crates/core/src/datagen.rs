//! Stimulus generation (blocks, stripes) and dataset ingestion (image
//! directories, CIFAR-10 binary batches, dataset manifests).

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::colorspace::SrgbPixel;
use crate::raster::{Raster, Rect};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Block,
    Stripe,
    Colorgram,
    Cifar10,
}

impl Source {
    pub fn as_str(self) -> &'static str {
        match self {
            Source::Block => "block",
            Source::Stripe => "stripe",
            Source::Colorgram => "colorgram",
            Source::Cifar10 => "cifar10",
        }
    }
}

/// An sRGB image plus the region used by the color metrics.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub id: String,
    pub pixels: Raster<SrgbPixel>,
    pub central_mask: Rect,
    pub source: Source,
}

impl ImageRecord {
    pub fn new(id: impl Into<String>, pixels: Raster<SrgbPixel>, central_mask: Rect, source: Source) -> Result<Self> {
        if !central_mask.fits_within(pixels.width(), pixels.height()) {
            return Err(Error::InvalidSpec(format!(
                "mask {:?} outside {}x{} image",
                central_mask,
                pixels.width(),
                pixels.height()
            )));
        }
        Ok(ImageRecord { id: id.into(), pixels, central_mask, source })
    }

    pub fn width(&self) -> usize {
        self.pixels.width()
    }

    pub fn height(&self) -> usize {
        self.pixels.height()
    }

    /// Central-region pixels, row by row.
    pub fn central_pixels(&self) -> impl Iterator<Item = SrgbPixel> + '_ {
        self.pixels.region(self.central_mask)
    }

    /// Color at the top-left corner of the central region; the tile color of
    /// a block image.
    pub fn central_color(&self) -> Option<SrgbPixel> {
        (!self.central_mask.is_empty()).then(|| self.pixels.get(self.central_mask.x0, self.central_mask.y0))
    }
}

/// A uniform grid of `levels` values per channel, `levels^3` colors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Palette {
    pub levels: u8,
}

impl Default for Palette {
    fn default() -> Self {
        Palette { levels: 6 }
    }
}

impl Palette {
    pub fn len(&self) -> usize {
        (self.levels as usize).pow(3)
    }

    pub fn is_empty(&self) -> bool {
        self.levels == 0
    }

    pub fn level_value(&self, i: usize) -> u8 {
        if self.levels <= 1 {
            return 0;
        }
        ((i * 255 + (self.levels as usize - 1) / 2) / (self.levels as usize - 1)) as u8
    }

    pub fn color(&self, index: usize) -> SrgbPixel {
        let l = self.levels as usize;
        SrgbPixel::new(self.level_value(index / (l * l)), self.level_value((index / l) % l), self.level_value(index % l))
    }

    pub fn colors(&self) -> Vec<SrgbPixel> {
        (0..self.len()).map(|i| self.color(i)).collect()
    }

    pub fn sample(&self, rng: &mut impl Rng) -> SrgbPixel {
        self.color(rng.gen_range(0..self.len()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockSpec {
    pub size: usize,
    pub border_width: usize,
    pub border_color: SrgbPixel,
    pub palette: Palette,
    pub seed: u64,
}

impl Default for BlockSpec {
    fn default() -> Self {
        BlockSpec { size: 300, border_width: 50, border_color: SrgbPixel::WHITE, palette: Palette::default(), seed: 0 }
    }
}

/// Stripes run vertically from the left edge of the central region; when
/// `stripe_width` does not divide the central width the last stripe is
/// truncated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StripeSpec {
    pub size: usize,
    pub border_width: usize,
    pub border_color: SrgbPixel,
    pub stripe_width: usize,
    pub palette: Palette,
    pub seed: u64,
}

impl Default for StripeSpec {
    fn default() -> Self {
        StripeSpec {
            size: 300,
            border_width: 50,
            border_color: SrgbPixel::WHITE,
            stripe_width: 25,
            palette: Palette::default(),
            seed: 0,
        }
    }
}

fn check_frame(size: usize, border_width: usize, palette: Palette) -> Result<Rect> {
    if size == 0 || 2 * border_width >= size {
        return Err(Error::InvalidSpec(format!("border width {border_width} must be below half of size {size}")));
    }
    if palette.levels < 1 {
        return Err(Error::InvalidSpec("palette needs at least one level".into()));
    }
    Ok(Rect::new(border_width, border_width, size - border_width, size - border_width))
}

fn check_count(n: usize) -> Result<()> {
    if n == 0 {
        return Err(Error::InvalidSpec("image count must be at least 1".into()));
    }
    Ok(())
}

/// A square image with `color` inside `border_width` pixels of `border`.
pub fn render_block(size: usize, border_width: usize, border: SrgbPixel, color: SrgbPixel) -> Raster<SrgbPixel> {
    let inner = Rect::new(border_width, border_width, size - border_width, size - border_width);
    Raster::from_fn(size, size, |x, y| if inner.contains(x, y) { color } else { border })
}

pub fn render_stripes(
    size: usize,
    border_width: usize,
    border: SrgbPixel,
    stripe_width: usize,
    a: SrgbPixel,
    b: SrgbPixel,
) -> Raster<SrgbPixel> {
    let inner = Rect::new(border_width, border_width, size - border_width, size - border_width);
    Raster::from_fn(size, size, |x, y| {
        if !inner.contains(x, y) {
            border
        } else if ((x - inner.x0) / stripe_width) % 2 == 0 {
            a
        } else {
            b
        }
    })
}

pub fn gen_blocks(n: usize, spec: &BlockSpec) -> Result<Vec<ImageRecord>> {
    check_count(n)?;
    let mask = check_frame(spec.size, spec.border_width, spec.palette)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..n)
        .map(|i| {
            let color = spec.palette.sample(&mut rng);
            let pixels = render_block(spec.size, spec.border_width, spec.border_color, color);
            ImageRecord::new(format!("block_{i:05}"), pixels, mask, Source::Block)
        })
        .collect()
}

/// The two colors of each stripe image, in generation order. Shares the RNG
/// stream with [`gen_stripes`].
pub fn stripe_colors(n: usize, spec: &StripeSpec) -> Vec<(SrgbPixel, SrgbPixel)> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    (0..n).map(|_| (spec.palette.sample(&mut rng), spec.palette.sample(&mut rng))).collect()
}

pub fn gen_stripes(n: usize, spec: &StripeSpec) -> Result<Vec<ImageRecord>> {
    check_count(n)?;
    let mask = check_frame(spec.size, spec.border_width, spec.palette)?;
    if spec.stripe_width == 0 {
        return Err(Error::InvalidSpec("stripe width must be positive".into()));
    }
    stripe_colors(n, spec)
        .into_iter()
        .enumerate()
        .map(|(i, (a, b))| {
            let pixels = render_stripes(spec.size, spec.border_width, spec.border_color, spec.stripe_width, a, b);
            ImageRecord::new(format!("stripe_{i:05}"), pixels, mask, Source::Stripe)
        })
        .collect()
}

/// Nearest-neighbor resampling.
pub fn resize_nearest(img: &Raster<SrgbPixel>, width: usize, height: usize) -> Raster<SrgbPixel> {
    let (sw, sh) = (img.width(), img.height());
    Raster::from_fn(width, height, |x, y| img.get(x * sw / width, y * sh / height))
}

// ---------------------------------------------------------------------------
// PNG I/O

pub fn decode_image(path: &Path) -> Result<Raster<SrgbPixel>> {
    let id = path.display().to_string();
    let img = image::open(path).map_err(|e| Error::Decode { id: id.clone(), msg: e.to_string() })?;
    // alpha, if any, is dropped
    let rgb = img.into_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.pixels().map(|p| SrgbPixel::new(p[0], p[1], p[2])).collect();
    Raster::from_vec(w, h, data)
}

pub fn write_png(path: &Path, img: &Raster<SrgbPixel>) -> Result<()> {
    let bytes: Vec<u8> = img.as_slice().iter().flat_map(|p| p.channels()).collect();
    let buf = image::RgbImage::from_raw(img.width() as u32, img.height() as u32, bytes)
        .ok_or_else(|| Error::Format("raster size overflow".into()))?;
    buf.save_with_format(path, image::ImageFormat::Png)
        .map_err(|e| Error::Format(format!("writing {}: {e}", path.display())))
}

/// Result of ingesting a directory: decoded records plus per-file failures.
#[derive(Debug)]
pub struct DirLoad {
    pub records: Vec<ImageRecord>,
    pub failures: Vec<(String, Error)>,
}

const IMAGE_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg", "bmp", "gif", "tif", "tiff", "webp"];

/// Loads every raster file in `path` in lexicographic file-name order. Each
/// record gets a full-image mask and its file stem as id.
pub fn load_image_dir(path: &Path) -> Result<DirLoad> {
    let mut files: Vec<PathBuf> = fs::read_dir(path)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.is_file()
                && p.extension()
                    .and_then(|e| e.to_str())
                    .is_some_and(|e| IMAGE_EXTENSIONS.contains(&e.to_ascii_lowercase().as_str()))
        })
        .collect();
    if files.is_empty() {
        return Err(Error::Degenerate(format!("no image files in {}", path.display())));
    }
    files.sort();

    let decoded: Vec<(String, Result<Raster<SrgbPixel>>)> = files
        .par_iter()
        .map(|f| {
            let id = f.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
            (id, decode_image(f))
        })
        .collect();

    let mut records = Vec::new();
    let mut failures = Vec::new();
    for (id, res) in decoded {
        match res {
            Ok(px) => {
                let mask = Rect::full(px.width(), px.height());
                records.push(ImageRecord { id, pixels: px, central_mask: mask, source: Source::Colorgram });
            }
            Err(e) => failures.push((id, e)),
        }
    }
    Ok(DirLoad { records, failures })
}

// ---------------------------------------------------------------------------
// CIFAR-10 binary

pub const CIFAR_SIDE: usize = 32;
pub const CIFAR_RECORD_LEN: usize = 1 + 3 * CIFAR_SIDE * CIFAR_SIDE;

/// One CIFAR-10 record: a label byte followed by R, G and B planes.
#[derive(Debug, Clone, PartialEq)]
pub struct CifarRecord {
    pub label: u8,
    pub pixels: Raster<SrgbPixel>,
}

impl CifarRecord {
    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() != CIFAR_RECORD_LEN {
            return Err(Error::Format(format!("CIFAR-10 record must be {CIFAR_RECORD_LEN} bytes, got {}", bytes.len())));
        }
        let plane = CIFAR_SIDE * CIFAR_SIDE;
        let (r, g, b) = (&bytes[1..1 + plane], &bytes[1 + plane..1 + 2 * plane], &bytes[1 + 2 * plane..]);
        let data = (0..plane).map(|i| SrgbPixel::new(r[i], g[i], b[i])).collect();
        Ok(CifarRecord { label: bytes[0], pixels: Raster::from_vec(CIFAR_SIDE, CIFAR_SIDE, data)? })
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(CIFAR_RECORD_LEN);
        out.push(self.label);
        for c in 0..3 {
            out.extend(self.pixels.as_slice().iter().map(|p| p.channels()[c]));
        }
        out
    }
}

pub fn parse_cifar10(bytes: &[u8]) -> Result<Vec<CifarRecord>> {
    if bytes.is_empty() || bytes.len() % CIFAR_RECORD_LEN != 0 {
        return Err(Error::Format(format!(
            "CIFAR-10 batch length {} is not a positive multiple of {CIFAR_RECORD_LEN}",
            bytes.len()
        )));
    }
    bytes.chunks_exact(CIFAR_RECORD_LEN).map(CifarRecord::from_bytes).collect()
}

/// Parses a CIFAR-10 batch file and upsamples each image to
/// `resize_to x resize_to` with nearest-neighbor. Ids are
/// `<file stem>_<index>_label<label>`.
pub fn load_cifar10(path: &Path, resize_to: usize) -> Result<Vec<ImageRecord>> {
    if resize_to == 0 {
        return Err(Error::InvalidSpec("resize target must be positive".into()));
    }
    let bytes = fs::read(path)?;
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_else(|| "cifar".into());
    parse_cifar10(&bytes)?
        .into_iter()
        .enumerate()
        .map(|(i, rec)| {
            let px = resize_nearest(&rec.pixels, resize_to, resize_to);
            ImageRecord::new(
                format!("{stem}_{i:05}_label{}", rec.label),
                px,
                Rect::full(resize_to, resize_to),
                Source::Cifar10,
            )
        })
        .collect()
}

// ---------------------------------------------------------------------------
// Dataset manifests

pub const MANIFEST_FILE: &str = "manifest.jsonl";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub id: String,
    pub source: Source,
    pub width: usize,
    pub height: usize,
    pub mask: [usize; 4],
    pub path: String,
}

/// Writes `images/<id>.png` and a manifest under `dir`. Manifest paths are
/// relative to `dir`.
pub fn write_dataset(dir: &Path, records: &[ImageRecord]) -> Result<Vec<ManifestEntry>> {
    let img_dir = dir.join("images");
    fs::create_dir_all(&img_dir)?;
    records.par_iter().try_for_each(|r| write_png(&img_dir.join(format!("{}.png", r.id)), &r.pixels))?;
    let entries: Vec<ManifestEntry> = records
        .iter()
        .map(|r| ManifestEntry {
            id: r.id.clone(),
            source: r.source,
            width: r.width(),
            height: r.height(),
            mask: r.central_mask.to_array(),
            path: format!("images/{}.png", r.id),
        })
        .collect();
    write_manifest(&dir.join(MANIFEST_FILE), &entries)?;
    Ok(entries)
}

pub fn write_manifest(path: &Path, entries: &[ManifestEntry]) -> Result<()> {
    let mut w = BufWriter::new(fs::File::create(path)?);
    for e in entries {
        serde_json::to_writer(&mut w, e)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_manifest(path: &Path) -> Result<Vec<ManifestEntry>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut out = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let e: ManifestEntry = serde_json::from_str(&line)
            .map_err(|err| Error::Parse { path: path.to_path_buf(), line: i + 1, msg: err.to_string() })?;
        out.push(e);
    }
    Ok(out)
}

/// Loads the records listed in `<dir>/manifest.jsonl`.
pub fn read_dataset(dir: &Path) -> Result<Vec<ImageRecord>> {
    let entries = read_manifest(&dir.join(MANIFEST_FILE))?;
    entries
        .par_iter()
        .map(|e| {
            let p = Path::new(&e.path);
            let full = if p.is_absolute() { p.to_path_buf() } else { dir.join(p) };
            let px = decode_image(&full)?;
            if px.width() != e.width || px.height() != e.height {
                return Err(Error::Format(format!(
                    "{}: manifest says {}x{}, file is {}x{}",
                    e.id,
                    e.width,
                    e.height,
                    px.width(),
                    px.height()
                )));
            }
            ImageRecord::new(e.id.clone(), px, Rect::from_array(e.mask), e.source)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn small_stripes(seed: u64) -> StripeSpec {
        StripeSpec { size: 12, border_width: 2, stripe_width: 2, seed, ..StripeSpec::default() }
    }

    #[test]
    fn default_palette_is_web_safe_grid() {
        let p = Palette::default();
        assert_eq!(p.len(), 216);
        let levels: Vec<u8> = (0..6).map(|i| p.level_value(i)).collect();
        assert_eq!(levels, vec![0, 51, 102, 153, 204, 255]);
        assert_eq!(p.colors().into_iter().collect::<HashSet<_>>().len(), 216);
    }

    #[test]
    fn single_block_layout() {
        let recs = gen_blocks(1, &BlockSpec::default()).unwrap();
        let r = &recs[0];
        assert_eq!((r.width(), r.height()), (300, 300));
        assert_eq!(r.central_mask, Rect::new(50, 50, 250, 250));
        let c = r.central_color().unwrap();
        assert!(r.central_pixels().all(|p| p == c));
        for y in 0..300 {
            for x in 0..300 {
                let inside = r.central_mask.contains(x, y);
                assert_eq!(inside, (50..250).contains(&x) && (50..250).contains(&y));
                if !inside {
                    assert_eq!(r.pixels.get(x, y), SrgbPixel::WHITE);
                }
            }
        }
    }

    #[test]
    fn generators_are_deterministic() {
        let spec = BlockSpec { size: 20, border_width: 3, seed: 9, ..BlockSpec::default() };
        assert_eq!(gen_blocks(5, &spec).unwrap(), gen_blocks(5, &spec).unwrap());
        assert_eq!(gen_stripes(5, &small_stripes(3)).unwrap(), gen_stripes(5, &small_stripes(3)).unwrap());
        assert_ne!(gen_stripes(5, &small_stripes(3)).unwrap(), gen_stripes(5, &small_stripes(4)).unwrap());
    }

    #[test]
    fn thousand_blocks_vary() {
        let spec = BlockSpec { size: 8, border_width: 1, ..BlockSpec::default() };
        let recs = gen_blocks(1000, &spec).unwrap();
        assert_eq!(recs.len(), 1000);
        let distinct: HashSet<_> = recs.iter().map(|r| r.central_color().unwrap()).collect();
        // 1000 uniform draws from 216 colors leave ~212 distinct
        assert!(distinct.len() > 200, "{}", distinct.len());
    }

    #[test]
    fn stripe_columns_alternate() {
        let a = SrgbPixel::new(255, 0, 0);
        let b = SrgbPixel::new(0, 0, 255);
        let img = render_stripes(300, 50, SrgbPixel::WHITE, 25, a, b);
        for x in 50..250 {
            let want = if ((x - 50) / 25) % 2 == 0 { a } else { b };
            for y in 50..250 {
                assert_eq!(img.get(x, y), want);
            }
        }
        assert_eq!(render_stripes(300, 50, SrgbPixel::WHITE, 25, a, a), render_block(300, 50, SrgbPixel::WHITE, a));
    }

    #[test]
    fn truncated_last_stripe() {
        let a = SrgbPixel::BLACK;
        let b = SrgbPixel::WHITE;
        // central width 10, stripes of 4: AAAA BBBB AA
        let img = render_stripes(14, 2, SrgbPixel::GRAY, 4, a, b);
        let row: Vec<SrgbPixel> = (2..12).map(|x| img.get(x, 5)).collect();
        assert_eq!(row, [vec![a; 4], vec![b; 4], vec![a; 2]].concat());
    }

    #[test]
    fn stripe_colors_are_uniform_over_levels() {
        let spec = small_stripes(0);
        let recs = gen_stripes(1000, &spec).unwrap();
        let palette: HashSet<_> = spec.palette.colors().into_iter().collect();
        let mut counts = [[0usize; 6]; 3];
        for (r, (a, b)) in recs.iter().zip(stripe_colors(1000, &spec)) {
            assert_eq!(r.pixels.get(2, 2), a);
            assert_eq!(r.pixels.get(4, 2), b);
            assert!(palette.contains(&a) && palette.contains(&b));
            for c in [a, b] {
                for (k, v) in c.channels().into_iter().enumerate() {
                    counts[k][v as usize / 51] += 1;
                }
            }
        }
        // chi-square against uniform levels, df = 5; 99.9% critical value 20.52
        for ch in counts {
            let expected = 2000.0 / 6.0;
            let chi2: f64 = ch.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
            assert!(chi2 < 20.52, "chi2 {chi2} for {ch:?}");
        }
    }

    #[test]
    fn invalid_specs_rejected() {
        assert!(gen_blocks(0, &BlockSpec::default()).is_err());
        let bad = BlockSpec { size: 10, border_width: 5, ..BlockSpec::default() };
        assert!(gen_blocks(1, &bad).is_err());
        let bad = StripeSpec { stripe_width: 0, ..StripeSpec::default() };
        assert!(gen_stripes(1, &bad).is_err());
    }

    #[test]
    fn record_rejects_mask_outside_image() {
        let px = Raster::filled(4, 4, SrgbPixel::BLACK);
        assert!(ImageRecord::new("x", px, Rect::new(0, 0, 5, 4), Source::Block).is_err());
    }

    fn synthetic_cifar(n: usize) -> Vec<u8> {
        let mut bytes = Vec::new();
        for i in 0..n {
            bytes.push((i % 10) as u8);
            for k in 0..3 * 1024 {
                bytes.push(((i * 31 + k * 7) % 256) as u8);
            }
        }
        bytes
    }

    #[test]
    fn cifar_round_trips_bit_exactly() {
        let bytes = synthetic_cifar(7);
        let recs = parse_cifar10(&bytes).unwrap();
        assert_eq!(recs.len(), 7);
        let back: Vec<u8> = recs.iter().flat_map(|r| r.to_bytes()).collect();
        assert_eq!(back, bytes);
    }

    #[test]
    fn cifar_red_record() {
        let mut rec = vec![3u8];
        rec.extend(std::iter::repeat(255u8).take(1024));
        rec.extend(std::iter::repeat(0u8).take(2048));
        let parsed = parse_cifar10(&rec).unwrap();
        assert_eq!(parsed[0].label, 3);
        assert!(parsed[0].pixels.as_slice().iter().all(|&p| p == SrgbPixel::new(255, 0, 0)));
        assert!(parse_cifar10(&rec[..3072]).is_err());
        assert!(parse_cifar10(&[]).is_err());
    }

    #[test]
    fn cifar_file_load_upsamples() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("data_batch_1.bin");
        let mut bytes = vec![0u8; CIFAR_RECORD_LEN];
        bytes[0] = 7;
        fs::write(&path, &bytes).unwrap();
        let recs = load_cifar10(&path, 300).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].id, "data_batch_1_00000_label7");
        assert_eq!((recs[0].width(), recs[0].height()), (300, 300));
        assert!(recs[0].pixels.as_slice().iter().all(|&p| p == SrgbPixel::BLACK));
    }

    #[test]
    fn nearest_neighbor_preserves_blocks() {
        let src = Raster::from_fn(2, 2, |x, y| SrgbPixel::new((x * 100) as u8, (y * 100) as u8, 0));
        let up = resize_nearest(&src, 6, 6);
        assert_eq!(up.get(2, 2), src.get(0, 0));
        assert_eq!(up.get(3, 0), src.get(1, 0));
        assert_eq!(up.get(5, 5), src.get(1, 1));
    }
}
