use super::{DataError, DataResult, ImageRecord};
use crate::tensor::Tensor;

/// Standard deviation of the pre-smoothing Gaussian.
pub const CANNY_SIGMA: f64 = 1.4;
/// Default hysteresis thresholds on the Sobel magnitude of `[0, 1]` gray.
pub const CANNY_LOW: f64 = 0.1;
pub const CANNY_HIGH: f64 = 0.2;
/// Magnitudes closer than this count as equal during non-maximum suppression.
const NMS_TIE: f64 = 1e-6;

/// Luma of a `[3, H, W]` (or `[1, H, W]`) image in `[-1, 1]`, mapped to `[0, 1]`.
pub fn grayscale(pixels: &Tensor<f32>) -> DataResult<(Vec<f64>, usize, usize)> {
    let (c, h, w) = match pixels.shape() {
        [c, h, w] | [1, c, h, w] => (*c, *h, *w),
        s => return Err(DataError::Invalid(format!("expected [C,H,W] image, got {s:?}"))),
    };
    let d = pixels.data();
    let plane = h * w;
    let gray = (0..plane)
        .map(|i| {
            let v = match c {
                1 => d[i] as f64,
                3 => 0.299 * d[i] as f64 + 0.587 * d[plane + i] as f64 + 0.114 * d[2 * plane + i] as f64,
                _ => return Err(DataError::Invalid(format!("{c} channels; expected 1 or 3"))),
            };
            Ok((v + 1.0) / 2.0)
        })
        .collect::<DataResult<Vec<f64>>>()?;
    Ok((gray, h, w))
}

fn gaussian_kernel(sigma: f64) -> Vec<f64> {
    let radius = (3.0 * sigma).ceil() as i64;
    let k: Vec<f64> = (-radius..=radius).map(|i| (-(i * i) as f64 / (2.0 * sigma * sigma)).exp()).collect();
    let sum: f64 = k.iter().sum();
    k.into_iter().map(|v| v / sum).collect()
}

fn at(img: &[f64], h: usize, w: usize, y: i64, x: i64) -> f64 {
    let y = y.clamp(0, h as i64 - 1) as usize;
    let x = x.clamp(0, w as i64 - 1) as usize;
    img[y * w + x]
}

/// Separable Gaussian blur with replicated borders.
pub fn gaussian_blur(img: &[f64], h: usize, w: usize, sigma: f64) -> Vec<f64> {
    let k = gaussian_kernel(sigma);
    let r = (k.len() / 2) as i64;
    let mut tmp = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            tmp[y * w + x] = k.iter().enumerate().map(|(i, kv)| kv * at(img, h, w, y as i64, x as i64 + i as i64 - r)).sum();
        }
    }
    let mut out = vec![0.0; h * w];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k.iter().enumerate().map(|(i, kv)| kv * at(&tmp, h, w, y as i64 + i as i64 - r, x as i64)).sum();
        }
    }
    out
}

/// Sobel derivatives `(gx, gy)` with replicated borders; `y` points down.
pub fn sobel(img: &[f64], h: usize, w: usize) -> (Vec<f64>, Vec<f64>) {
    let mut gx = vec![0.0; h * w];
    let mut gy = vec![0.0; h * w];
    for y in 0..h as i64 {
        for x in 0..w as i64 {
            let p = |dy: i64, dx: i64| at(img, h, w, y + dy, x + dx);
            let i = y as usize * w + x as usize;
            gx[i] = (p(-1, 1) + 2.0 * p(0, 1) + p(1, 1)) - (p(-1, -1) + 2.0 * p(0, -1) + p(1, -1));
            gy[i] = (p(1, -1) + 2.0 * p(1, 0) + p(1, 1)) - (p(-1, -1) + 2.0 * p(-1, 0) + p(-1, 1));
        }
    }
    (gx, gy)
}

/// Canny edges of an image in `[-1, 1]`: grayscale, Gaussian smoothing,
/// Sobel gradients, non-maximum suppression along the quantised gradient
/// direction and 8-connected hysteresis. Returns `[1, H, W]` with `+1` on
/// edges and `-1` elsewhere.
pub fn canny_edges(pixels: &Tensor<f32>, low: f64, high: f64) -> DataResult<Tensor<f32>> {
    let mask = canny_mask(pixels, low, high)?;
    let (h, w) = (pixels.shape()[pixels.shape().len() - 2], pixels.shape()[pixels.shape().len() - 1]);
    let data = mask.into_iter().map(|e| if e { 1.0 } else { -1.0 }).collect();
    Ok(Tensor::new(&[1, h, w], data).expect("consistent shape"))
}

/// Boolean edge mask behind [`canny_edges`], row-major.
pub fn canny_mask(pixels: &Tensor<f32>, low: f64, high: f64) -> DataResult<Vec<bool>> {
    if !(low > 0.0 && low < high && high.is_finite()) {
        return Err(DataError::Thresholds { low, high });
    }
    let (gray, h, w) = grayscale(pixels)?;
    let smooth = gaussian_blur(&gray, h, w, CANNY_SIGMA);
    let (gx, gy) = sobel(&smooth, h, w);
    let mag: Vec<f64> = gx.iter().zip(&gy).map(|(a, b)| a.hypot(*b)).collect();

    let mut thin = vec![0.0; h * w];
    for y in 1..h.saturating_sub(1) {
        for x in 1..w.saturating_sub(1) {
            let i = y * w + x;
            let m = mag[i];
            if m == 0.0 {
                continue;
            }
            let mut angle = gy[i].atan2(gx[i]).to_degrees();
            if angle < 0.0 {
                angle += 180.0;
            }
            let (dy, dx): (i64, i64) = if !(22.5..157.5).contains(&angle) {
                (0, 1)
            } else if angle < 67.5 {
                (1, 1)
            } else if angle < 112.5 {
                (1, 0)
            } else {
                (1, -1)
            };
            let n1 = at(&mag, h, w, y as i64 + dy, x as i64 + dx);
            let n2 = at(&mag, h, w, y as i64 - dy, x as i64 - dx);
            // ties go to the pixel behind along the gradient axis
            if m + NMS_TIE >= n1 && m > n2 + NMS_TIE {
                thin[i] = m;
            }
        }
    }

    let mut edges = vec![false; h * w];
    let mut stack: Vec<usize> = (0..h * w).filter(|&i| thin[i] >= high).collect();
    for &i in &stack {
        edges[i] = true;
    }
    while let Some(i) = stack.pop() {
        let (y, x) = ((i / w) as i64, (i % w) as i64);
        for dy in -1..=1 {
            for dx in -1..=1 {
                let (ny, nx) = (y + dy, x + dx);
                if ny < 0 || nx < 0 || ny >= h as i64 || nx >= w as i64 {
                    continue;
                }
                let j = ny as usize * w + nx as usize;
                if !edges[j] && thin[j] >= low {
                    edges[j] = true;
                    stack.push(j);
                }
            }
        }
    }
    Ok(edges)
}

/// The record's edge map, replicated to three channels.
pub fn edge_record(record: &ImageRecord, low: f64, high: f64) -> DataResult<ImageRecord> {
    let e = canny_edges(&record.pixels, low, high)?;
    let mut data = Vec::with_capacity(3 * e.len());
    for _ in 0..3 {
        data.extend_from_slice(e.data());
    }
    let s = record.size();
    Ok(ImageRecord {
        frame_index: record.frame_index,
        domain: format!("{}-edges", record.domain),
        pixels: Tensor::new(&[3, s, s], data).expect("consistent shape"),
    })
}
