use std::fmt;
use std::fs;
use std::path::PathBuf;
use std::time::{Duration, Instant};

use anyhow::{bail, Context, Result};
use clap::Args;
use placegan::data::{edge_record, image_to_tensor, list_images, tensor_to_image};
use placegan::training::load_checkpoint;
use placegan::ImageRecord;

use crate::{Direction, RunConfig};

#[derive(Debug, Args)]
pub struct TranslateArgs {
    /// Checkpoint written by `train`
    #[arg(long)]
    pub checkpoint: PathBuf,
    /// a-to-b uses G_B, b-to-a uses G_A
    #[arg(long, value_enum, default_value_t = Direction::AToB)]
    pub direction: Direction,
    /// Directory of input images at the checkpoint's resolution
    #[arg(long)]
    pub input: PathBuf,
    /// Output directory; files keep their input names
    #[arg(long, default_value = "translated")]
    pub out: PathBuf,
}

/// Per-image wall time of one translation run.
#[derive(Debug, Clone)]
pub struct TranslationReport {
    pub outputs: Vec<PathBuf>,
    pub times: Vec<Duration>,
}

impl TranslationReport {
    pub fn mean(&self) -> Duration {
        self.times.iter().sum::<Duration>() / self.times.len().max(1) as u32
    }

    pub fn max(&self) -> Duration {
        self.times.iter().copied().max().unwrap_or_default()
    }
}

impl fmt::Display for TranslationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "translated {} images: mean {:.2} ms, max {:.2} ms per image",
            self.outputs.len(),
            self.mean().as_secs_f64() * 1e3,
            self.max().as_secs_f64() * 1e3
        )
    }
}

pub fn translate(config: &RunConfig, args: &TranslateArgs) -> Result<TranslationReport> {
    let state = load_checkpoint::<f32>(&args.checkpoint)?;
    let (g, source) = match args.direction {
        Direction::AToB => (&state.nets.g_b, "A"),
        Direction::BToA => (&state.nets.g_a, "B"),
        d => bail!("translate needs a-to-b or b-to-a, got {d:?}"),
    };
    let size = state.generator_config.input_size;
    let files = list_images(&args.input)?;
    if files.is_empty() {
        bail!("no images in {}", args.input.display());
    }
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;

    let mut report = TranslationReport { outputs: Vec::new(), times: Vec::new() };
    for (i, path) in files.iter().enumerate() {
        let img = image::open(path).with_context(|| format!("decoding {}", path.display()))?.to_rgb8();
        if (img.width() as usize, img.height() as usize) != (size, size) {
            bail!("{} is {}x{} but the checkpoint expects {size}x{size}", path.display(), img.width(), img.height());
        }
        let mut record = ImageRecord { frame_index: i, domain: source.into(), pixels: image_to_tensor(&img, size) };
        if source == "B" && config.data.b_as_edges {
            record = edge_record(&record, config.data.canny_low, config.data.canny_high)?;
        }
        let x = record.pixels.reshape(&[1, 3, size, size])?;
        let start = Instant::now();
        let y = g.infer(&x)?;
        report.times.push(start.elapsed());
        let out = args.out.join(path.file_name().expect("listed files have names"));
        let y = y.reshape(&[3, size, size])?;
        tensor_to_image(&y)?.save(&out).with_context(|| format!("writing {}", out.display()))?;
        report.outputs.push(out);
    }
    log::info!("{report}");
    Ok(report)
}
