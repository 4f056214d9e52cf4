use std::fs;
use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};

use super::{DataError, DataResult};
use crate::tensor::Tensor;

/// One time-ordered frame with pixels `[3, S, S]` in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImageRecord {
    pub frame_index: usize,
    pub domain: String,
    pub pixels: Tensor<f32>,
}

impl ImageRecord {
    pub fn size(&self) -> usize {
        self.pixels.shape()[2]
    }
}

/// Result of [`load_image_dir`].
#[derive(Debug, Clone)]
pub struct LoadedImages {
    pub records: Vec<ImageRecord>,
    /// Files that could not be decoded.
    pub skipped: Vec<PathBuf>,
}

/// Options for [`load_image_dir`].
#[derive(Debug, Clone)]
pub struct LoadOptions {
    pub size: usize,
    /// Keep every `stride`-th decodable file (1 keeps all).
    pub stride: usize,
    pub domain: String,
}

impl LoadOptions {
    pub fn new(size: usize, domain: &str) -> Self {
        Self { size, stride: 1, domain: domain.to_string() }
    }
}

/// Bilinear resampling with pixel-centre alignment (edge pixels replicated).
/// `src` is `[C, H, W]` row-major.
pub fn resize_bilinear(src: &[f32], channels: usize, height: usize, width: usize, out_h: usize, out_w: usize) -> Vec<f32> {
    let axis = |out: usize, inp: usize| -> Vec<(usize, usize, f32)> {
        let scale = inp as f64 / out as f64;
        (0..out)
            .map(|o| {
                let s = ((o as f64 + 0.5) * scale - 0.5).max(0.0);
                let i0 = (s.floor() as usize).min(inp - 1);
                let i1 = (i0 + 1).min(inp - 1);
                (i0, i1, (s - i0 as f64) as f32)
            })
            .collect()
    };
    let (ys, xs) = (axis(out_h, height), axis(out_w, width));
    let mut out = Vec::with_capacity(channels * out_h * out_w);
    for c in 0..channels {
        let plane = &src[c * height * width..(c + 1) * height * width];
        for &(y0, y1, fy) in &ys {
            for &(x0, x1, fx) in &xs {
                let top = plane[y0 * width + x0] * (1.0 - fx) + plane[y0 * width + x1] * fx;
                let bottom = plane[y1 * width + x0] * (1.0 - fx) + plane[y1 * width + x1] * fx;
                out.push(top * (1.0 - fy) + bottom * fy);
            }
        }
    }
    out
}

/// Converts an 8-bit RGB image to `[3, size, size]` in `[-1, 1]`.
pub fn image_to_tensor(img: &RgbImage, size: usize) -> Tensor<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut planar = vec![0.0f32; 3 * h * w];
    for (x, y, px) in img.enumerate_pixels() {
        for c in 0..3 {
            planar[c * h * w + y as usize * w + x as usize] = px[c] as f32;
        }
    }
    let resized = if (h, w) == (size, size) { planar } else { resize_bilinear(&planar, 3, h, w, size, size) };
    let data = resized.into_iter().map(|v| (v / 127.5 - 1.0).clamp(-1.0, 1.0)).collect();
    Tensor::new(&[3, size, size], data).expect("consistent shape")
}

/// Inverse of [`image_to_tensor`] (no resizing); values are clamped.
pub fn tensor_to_image(pixels: &Tensor<f32>) -> DataResult<RgbImage> {
    let (c, h, w) = match pixels.shape() {
        [c, h, w] => (*c, *h, *w),
        [1, c, h, w] => (*c, *h, *w),
        s => return Err(DataError::Invalid(format!("expected [C,H,W] image, got {s:?}"))),
    };
    if c != 3 && c != 1 {
        return Err(DataError::Invalid(format!("{c} channels; expected 1 or 3")));
    }
    let d = pixels.data();
    let to_u8 = |v: f32| ((v.clamp(-1.0, 1.0) + 1.0) * 127.5).round() as u8;
    Ok(RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let at = |ch: usize| to_u8(d[(ch.min(c - 1) * h + y as usize) * w + x as usize]);
        Rgb([at(0), at(1), at(2)])
    }))
}

pub fn save_png(pixels: &Tensor<f32>, path: &Path) -> DataResult<()> {
    tensor_to_image(pixels)?
        .save(path)
        .map_err(|source| DataError::Image { path: path.to_path_buf(), source })
}

/// Image files of `dir` in lexicographic order.
pub fn list_images(dir: &Path) -> DataResult<Vec<PathBuf>> {
    let io = |source| DataError::Io { path: dir.to_path_buf(), source };
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(io)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_file())
        .collect();
    files.sort();
    Ok(files)
}

/// Decodes every image in `dir` (lexicographic order is temporal order),
/// resizes it bilinearly and scales it to `[-1, 1]`. Undecodable files are
/// skipped with a warning.
pub fn load_image_dir(dir: &Path, options: &LoadOptions) -> DataResult<LoadedImages> {
    if options.size == 0 || options.stride == 0 {
        return Err(DataError::Invalid("size and stride must be positive".into()));
    }
    let mut records = Vec::new();
    let mut skipped = Vec::new();
    let mut decoded = 0usize;
    for path in list_images(dir)? {
        let img = match image::open(&path) {
            Ok(img) => img.to_rgb8(),
            Err(e) => {
                log::warn!("skipping {}: {e}", path.display());
                skipped.push(path);
                continue;
            }
        };
        if decoded.is_multiple_of(options.stride) {
            records.push(ImageRecord {
                frame_index: records.len(),
                domain: options.domain.clone(),
                pixels: image_to_tensor(&img, options.size),
            });
        }
        decoded += 1;
    }
    if records.is_empty() {
        return Err(DataError::EmptyDirectory(dir.to_path_buf()));
    }
    if !skipped.is_empty() {
        log::warn!("{} undecodable files skipped in {}", skipped.len(), dir.display());
    }
    Ok(LoadedImages { records, skipped })
}

/// Stacks records into one `[N, 3, S, S]` batch.
pub fn stack_records(records: &[ImageRecord]) -> DataResult<Tensor<f32>> {
    let first = records.first().ok_or_else(|| DataError::Invalid("no records to stack".into()))?;
    let shape = first.pixels.shape().to_vec();
    let mut data = Vec::with_capacity(records.len() * first.pixels.len());
    for r in records {
        if r.pixels.shape() != shape.as_slice() {
            return Err(DataError::Invalid(format!("frame {} has shape {:?}, expected {shape:?}", r.frame_index, r.pixels.shape())));
        }
        data.extend_from_slice(r.pixels.data());
    }
    let mut full = vec![records.len()];
    full.extend_from_slice(&shape);
    Tensor::new(&full, data).map_err(|e| DataError::Invalid(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mid_gray_maps_to_zero() {
        let img = RgbImage::from_pixel(10, 7, Rgb([128, 128, 128]));
        let t = image_to_tensor(&img, 4);
        assert_eq!(t.shape(), &[3, 4, 4]);
        assert!(t.data().iter().all(|v| v.abs() < 0.01));
    }

    #[test]
    fn same_size_is_identity() {
        let img = RgbImage::from_fn(5, 5, |x, y| Rgb([(x * 40) as u8, (y * 50) as u8, 7]));
        let back = tensor_to_image(&image_to_tensor(&img, 5)).unwrap();
        assert_eq!(back, img);
    }

    fn board(n: usize, square: usize) -> Vec<f32> {
        (0..n * n).map(|i| if ((i / n) / square + (i % n) / square).is_multiple_of(2) { 0.0 } else { 255.0 }).collect()
    }

    #[test]
    fn checkerboard_downscale_matches_reference() {
        // Reference values from OpenCV's INTER_LINEAR resize.
        let out = resize_bilinear(&board(6, 1), 1, 6, 6, 4, 4);
        let (lo, hi) = (95.625, 159.375);
        let expected = [lo, lo, hi, hi, lo, lo, hi, hi, hi, hi, lo, lo, hi, hi, lo, lo];
        for (o, e) in out.iter().zip(expected) {
            assert!((o - e).abs() <= 1.0, "{o} vs {e}");
        }
        let out = resize_bilinear(&board(16, 2), 1, 16, 16, 6, 6);
        let rows = [[0.0, 127.5, 255.0, 0.0, 127.5, 255.0], [127.5; 6], [255.0, 127.5, 0.0, 255.0, 127.5, 0.0]];
        for (i, o) in out.iter().enumerate() {
            let e = rows[(i / 6) % 3][i % 6];
            assert!((o - e).abs() <= 1.0, "pixel {i}: {o} vs {e}");
        }
    }

    #[test]
    fn loading_skips_bad_files_and_keeps_order() {
        let dir = tempfile::tempdir().unwrap();
        for (i, v) in [10u8, 200, 90].iter().enumerate() {
            RgbImage::from_pixel(8, 8, Rgb([*v, *v, *v])).save(dir.path().join(format!("{i:03}.png"))).unwrap();
        }
        fs::write(dir.path().join("001b.png"), b"not an image").unwrap();
        let loaded = load_image_dir(dir.path(), &LoadOptions::new(4, "a")).unwrap();
        assert_eq!(loaded.records.len(), 3);
        assert_eq!(loaded.skipped.len(), 1);
        let firsts: Vec<f32> = loaded.records.iter().map(|r| r.pixels.data()[0]).collect();
        assert!(firsts[0] < firsts[2] && firsts[2] < firsts[1]);
        assert!(loaded.records.iter().enumerate().all(|(i, r)| r.frame_index == i));

        let strided = load_image_dir(dir.path(), &LoadOptions { stride: 2, ..LoadOptions::new(4, "a") }).unwrap();
        assert_eq!(strided.records.len(), 2);
    }

    #[test]
    fn empty_directory_rejected() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(load_image_dir(dir.path(), &LoadOptions::new(4, "a")), Err(DataError::EmptyDirectory(_))));
    }
}
