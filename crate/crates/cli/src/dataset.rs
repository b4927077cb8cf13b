//! Dataset generation, ingestion, and embedding.

use std::path::PathBuf;

use clap::Args;
use huewave::datagen::{
    gen_blocks, gen_stripes, load_cifar10, load_image_dir, render_block, write_dataset, BlockSpec, Palette, StripeSpec,
    MANIFEST_FILE,
};
use huewave::embedio::{write_embeddings, FileMeta};
use huewave::scattering::{embed_all, shuffle_pixels, ShuffleScope, DEFAULT_J, DEFAULT_L};
use huewave::{ColorMode, ImageRecord, Rect, Source, SrgbPixel};
use serde::Serialize;

use crate::output::{data, usage, CliResult, OutDir};

pub const EMBEDDINGS_FILE: &str = "embeddings.jsonl";

pub fn parse_color(s: &str) -> Result<SrgbPixel, String> {
    match s.to_ascii_lowercase().as_str() {
        "white" => Ok(SrgbPixel::WHITE),
        "black" => Ok(SrgbPixel::BLACK),
        "gray" | "grey" => Ok(SrgbPixel::GRAY),
        hex => SrgbPixel::from_hex(hex).map_err(|e| e.to_string()),
    }
}

#[derive(Args, Debug, Serialize)]
pub struct FrameArgs {
    /// Image side length in pixels.
    #[arg(long, default_value_t = 300)]
    pub size: usize,
    #[arg(long, default_value_t = 50)]
    pub border_width: usize,
    /// `white`, `black`, `gray`, or RRGGBB.
    #[arg(long, default_value = "white", value_parser = parse_color)]
    pub border_color: SrgbPixel,
    /// Values per sRGB channel in the color palette.
    #[arg(long, default_value_t = 6)]
    pub levels: u8,
}

#[derive(Args, Debug, Serialize)]
pub struct GenBlocks {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub frame: FrameArgs,
    /// Emit one block per palette color instead of `n` random ones.
    #[arg(long)]
    pub sweep: bool,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct GenStripes {
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    #[command(flatten)]
    pub frame: FrameArgs,
    #[arg(long, default_value_t = 25)]
    pub stripe_width: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct IngestDir {
    /// Directory of raster images (png, jpeg, ...).
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct IngestCifar {
    /// CIFAR-10 binary batch file.
    #[arg(long)]
    pub input: PathBuf,
    /// Upsampled side length.
    #[arg(long, default_value_t = 300)]
    pub resize: usize,
    /// Keep only the first N records.
    #[arg(long)]
    pub limit: Option<usize>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct Embed {
    /// Dataset directory (with a manifest).
    #[arg(long)]
    pub data: PathBuf,
    #[arg(long, default_value_t = ColorMode::Jzazbz)]
    pub mode: ColorMode,
    #[arg(long, default_value_t = DEFAULT_J)]
    pub j: usize,
    #[arg(long, default_value_t = DEFAULT_L)]
    pub l: usize,
    /// Spatially randomize central pixels first: `global` or `per-column`.
    #[arg(long)]
    pub shuffle: Option<ShuffleScope>,
    /// Image `i` is shuffled with seed `shuffle_seed + i`.
    #[arg(long, default_value_t = 0)]
    pub shuffle_seed: u64,
    #[arg(long)]
    pub out: PathBuf,
}

fn palette(levels: u8) -> CliResult<Palette> {
    if levels == 0 {
        return Err(usage("--levels must be at least 1"));
    }
    Ok(Palette { levels })
}

fn save(out: &OutDir, images: &[ImageRecord]) -> CliResult {
    let entries = write_dataset(out.root(), images).map_err(|e| data(format!("writing dataset: {e}")))?;
    eprintln!("wrote {} images to {}", entries.len(), out.root().display());
    Ok(())
}

pub fn gen_blocks_cmd(a: &GenBlocks) -> CliResult {
    let spec = BlockSpec {
        size: a.frame.size,
        border_width: a.frame.border_width,
        border_color: a.frame.border_color,
        palette: palette(a.frame.levels)?,
        seed: a.seed,
    };
    let images = if a.sweep {
        sweep(&spec)?
    } else {
        gen_blocks(a.n, &spec)?
    };
    let out = OutDir::create(&a.out, "gen-blocks", a)?;
    save(&out, &images)
}

/// One block per palette color, in palette order.
fn sweep(spec: &BlockSpec) -> CliResult<Vec<ImageRecord>> {
    let b = spec.border_width;
    if 2 * b >= spec.size {
        return Err(usage(format!("border width {b} must be below half of size {}", spec.size)));
    }
    let mask = Rect::new(b, b, spec.size - b, spec.size - b);
    spec.palette
        .colors()
        .into_iter()
        .map(|c| {
            let px = render_block(spec.size, b, spec.border_color, c);
            Ok(ImageRecord::new(format!("block_{}", c.to_hex()), px, mask, Source::Block)?)
        })
        .collect()
}

pub fn gen_stripes_cmd(a: &GenStripes) -> CliResult {
    let spec = StripeSpec {
        size: a.frame.size,
        border_width: a.frame.border_width,
        border_color: a.frame.border_color,
        stripe_width: a.stripe_width,
        palette: palette(a.frame.levels)?,
        seed: a.seed,
    };
    let images = gen_stripes(a.n, &spec)?;
    let out = OutDir::create(&a.out, "gen-stripes", a)?;
    save(&out, &images)
}

#[derive(Serialize)]
struct Failure {
    file: String,
    error: String,
}

pub fn ingest_dir_cmd(a: &IngestDir) -> CliResult {
    let load = load_image_dir(&a.input).map_err(|e| data(format!("{}: {e}", a.input.display())))?;
    if load.records.is_empty() {
        return Err(data(format!("no decodable images in {}", a.input.display())));
    }
    let out = OutDir::create(&a.out, "ingest-dir", a)?;
    let mut w = csv::Writer::from_writer(out.writer("failures.csv")?);
    for (file, err) in &load.failures {
        eprintln!("skipped {file}: {err}");
        w.serialize(Failure { file: file.clone(), error: err.to_string() }).map_err(|e| data(e.to_string()))?;
    }
    w.flush()?;
    save(&out, &load.records)
}

pub fn ingest_cifar_cmd(a: &IngestCifar) -> CliResult {
    let mut images = load_cifar10(&a.input, a.resize).map_err(|e| match e {
        huewave::Error::InvalidSpec(m) => usage(m),
        e => data(format!("{}: {e}", a.input.display())),
    })?;
    if let Some(n) = a.limit {
        images.truncate(n);
    }
    if images.is_empty() {
        return Err(usage("--limit leaves no images"));
    }
    let out = OutDir::create(&a.out, "ingest-cifar", a)?;
    save(&out, &images)
}

pub fn embed_cmd(a: &Embed) -> CliResult {
    let mut images = crate::output::load_dataset(&a.data)?;
    if let Some(scope) = a.shuffle {
        for (i, img) in images.iter_mut().enumerate() {
            *img = shuffle_pixels(img, scope, a.shuffle_seed.wrapping_add(i as u64));
        }
    }
    let out = OutDir::create(&a.out, "embed", a)?;
    let emb = embed_all(&images, a.mode, a.j, a.l)?;
    let meta = FileMeta::this_crate(Some(a.data.join(MANIFEST_FILE).display().to_string()));
    write_embeddings(&out.path(EMBEDDINGS_FILE), Some(&meta), &emb)?;
    eprintln!("embedded {} images ({} dims) into {}", emb.len(), emb[0].dim(), out.path(EMBEDDINGS_FILE).display());
    Ok(())
}
