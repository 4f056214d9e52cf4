//! Canny edges against imageproc's implementation of the same pipeline.

use image::{GrayImage, Luma};
use placegan::data::{canny_mask, synthesize_paired_domains, CANNY_HIGH, CANNY_LOW};
use placegan::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Random overlapping rectangles with sub-pixel, anti-aliased borders.
fn rectangle_scene(seed: u64, size: u32) -> GrayImage {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = size as usize;
    let mut img = vec![rng.gen_range(40.0..90.0f64); n * n];
    let cover = |lo: f64, hi: f64, p: usize| ((p as f64 + 1.0).min(hi) - (p as f64).max(lo)).clamp(0.0, 1.0);
    for _ in 0..rng.gen_range(3..7) {
        let (w, h) = (rng.gen_range(8.0..size as f64 / 2.0), rng.gen_range(8.0..size as f64 / 2.0));
        let x0 = rng.gen_range(2.0..size as f64 - w - 2.0);
        let y0 = rng.gen_range(2.0..size as f64 - h - 2.0);
        let v = rng.gen_range(120.0..250.0);
        for y in 0..n {
            for x in 0..n {
                let c = cover(x0, x0 + w, x) * cover(y0, y0 + h, y);
                img[y * n + x] = (1.0 - c) * img[y * n + x] + c * v;
            }
        }
    }
    GrayImage::from_fn(size, size, |x, y| Luma([img[y as usize * n + x as usize].round() as u8]))
}

fn to_tensor(img: &GrayImage) -> Tensor<f32> {
    let plane: Vec<f32> = img.pixels().map(|p| p[0] as f32 / 127.5 - 1.0).collect();
    let n = plane.len();
    let data: Vec<f32> = plane.iter().cycle().take(3 * n).copied().collect();
    Tensor::new(&[3, img.height() as usize, img.width() as usize], data).unwrap()
}

fn to_gray(t: &Tensor<f32>) -> GrayImage {
    let (h, w) = (t.shape()[1], t.shape()[2]);
    let d = t.data();
    let plane = h * w;
    GrayImage::from_fn(w as u32, h as u32, |x, y| {
        let i = y as usize * w + x as usize;
        let luma = 0.299 * d[i] + 0.587 * d[plane + i] + 0.114 * d[2 * plane + i];
        Luma([((luma + 1.0) * 127.5).round().clamp(0.0, 255.0) as u8])
    })
}

fn disagreement(ours: &[bool], reference: &GrayImage) -> f64 {
    let differ = ours.iter().zip(reference.pixels()).filter(|(a, r)| **a != (r[0] > 0)).count();
    differ as f64 / ours.len() as f64
}

#[test]
fn rectangle_scenes_match_reference() {
    for seed in 0..10 {
        let img = rectangle_scene(seed, 96);
        let ours = canny_mask(&to_tensor(&img), CANNY_LOW, CANNY_HIGH).unwrap();
        let reference = imageproc::edges::canny(&img, (CANNY_LOW * 255.0) as f32, (CANNY_HIGH * 255.0) as f32);
        let d = disagreement(&ours, &reference);
        assert!(ours.iter().any(|&e| e));
        assert!(d <= 0.02, "seed {seed}: {:.2}% of pixels disagree", 100.0 * d);
    }
}

#[test]
fn synthetic_frames_match_reference() {
    let (a, b) = synthesize_paired_domains(3, 4, 64).unwrap();
    for r in a.iter().chain(&b) {
        let ours = canny_mask(&r.pixels, CANNY_LOW, CANNY_HIGH).unwrap();
        let reference = imageproc::edges::canny(&to_gray(&r.pixels), (CANNY_LOW * 255.0) as f32, (CANNY_HIGH * 255.0) as f32);
        let d = disagreement(&ours, &reference);
        assert!(d <= 0.02, "frame {} {}: {:.2}% of pixels disagree", r.frame_index, r.domain, 100.0 * d);
    }
}

