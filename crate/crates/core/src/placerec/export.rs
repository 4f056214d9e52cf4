use std::fs;
use std::path::Path;

use super::{DistanceMatrix, PlaceRecError, PlaceRecResult, PrCurve, PrPoint};

pub const PR_CSV_HEADER: &str = "threshold,precision,recall,n";

/// Grayscale intensities `round(255 * min(d, clip_max) / clip_max)`, row-major.
pub fn heatmap_pixels(m: &DistanceMatrix, clip_max: f64) -> PlaceRecResult<Vec<u8>> {
    if !(clip_max > 0.0 && clip_max.is_finite()) {
        return Err(PlaceRecError::Invalid(format!("clip_max must be positive, got {clip_max}")));
    }
    Ok(m.values().iter().map(|&d| (255.0 * d.min(clip_max) / clip_max).round() as u8).collect())
}

/// Writes the clipped matrix as an 8-bit grayscale PNG, one pixel per entry,
/// queries along the vertical axis. Small distances are dark.
pub fn write_heatmap(m: &DistanceMatrix, clip_max: f64, path: &Path) -> PlaceRecResult<()> {
    let pixels = heatmap_pixels(m, clip_max)?;
    image::save_buffer(path, &pixels, m.cols() as u32, m.rows() as u32, image::ExtendedColorType::L8).map_err(|e| {
        PlaceRecError::Format { path: path.to_path_buf(), detail: e.to_string() }
    })
}

/// CSV with one row per threshold per curve.
pub fn write_pr_csv(curves: &[PrCurve], path: &Path) -> PlaceRecResult<()> {
    let mut out = format!("{PR_CSV_HEADER}\n");
    for c in curves {
        for p in &c.points {
            out.push_str(&format!("{:?},{:?},{:?},{}\n", p.threshold, p.precision, p.recall, c.sequence_length));
        }
    }
    fs::write(path, out).map_err(|source| PlaceRecError::Io { path: path.to_path_buf(), source })
}

/// Parses a file written by [`write_pr_csv`]; rows are grouped into curves
/// by consecutive `n`.
pub fn read_pr_csv(path: &Path) -> PlaceRecResult<Vec<PrCurve>> {
    let text = fs::read_to_string(path).map_err(|source| PlaceRecError::Io { path: path.to_path_buf(), source })?;
    let bad = |line: usize, detail: String| PlaceRecError::Format { path: path.to_path_buf(), detail: format!("line {line}: {detail}") };
    let mut lines = text.lines();
    match lines.next() {
        Some(h) if h.trim() == PR_CSV_HEADER => {}
        other => return Err(bad(1, format!("expected header {PR_CSV_HEADER:?}, found {other:?}"))),
    }
    let mut curves: Vec<PrCurve> = Vec::new();
    for (i, line) in lines.enumerate() {
        let line_no = i + 2;
        if line.trim().is_empty() {
            continue;
        }
        let cols: Vec<&str> = line.split(',').map(str::trim).collect();
        if cols.len() != 4 {
            return Err(bad(line_no, format!("{} columns, expected 4", cols.len())));
        }
        let num = |s: &str| s.parse::<f64>().map_err(|e| bad(line_no, format!("{s:?}: {e}")));
        let point = PrPoint { threshold: num(cols[0])?, precision: num(cols[1])?, recall: num(cols[2])? };
        if !(0.0..=1.0).contains(&point.precision) || !(0.0..=1.0).contains(&point.recall) {
            return Err(bad(line_no, "precision and recall must lie in [0, 1]".into()));
        }
        let n: usize = cols[3].parse().map_err(|e| bad(line_no, format!("n {:?}: {e}", cols[3])))?;
        match curves.last_mut() {
            Some(c) if c.sequence_length == n => c.points.push(point),
            _ => curves.push(PrCurve { sequence_length: n, points: vec![point] }),
        }
    }
    if curves.is_empty() {
        return Err(bad(2, "no data rows".into()));
    }
    Ok(curves)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn constant_matrix_gives_uniform_image() {
        let m = DistanceMatrix::new(3, 4, vec![0.7; 12]).unwrap();
        let px = heatmap_pixels(&m, 1.0).unwrap();
        assert!(px.iter().all(|&p| p == px[0]));
        assert!(heatmap_pixels(&m, 0.0).is_err());
    }

    #[test]
    fn pixels_follow_clip_formula() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let values: Vec<f64> = (0..30).map(|_| rng.gen_range(0.0..2.0)).collect();
        let m = DistanceMatrix::new(5, 6, values.clone()).unwrap();
        let px = heatmap_pixels(&m, 0.8).unwrap();
        for (v, p) in values.iter().zip(px) {
            let expected = if *v >= 0.8 { 255.0 } else { (v / 0.8 * 255.0).round() };
            assert_eq!(p as f64, expected);
        }
    }

    #[test]
    fn heatmap_png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("h.png");
        let m = DistanceMatrix::new(2, 3, vec![0.0, 1.0, 2.0, 0.5, 0.0, 0.25]).unwrap();
        write_heatmap(&m, 1.0, &p).unwrap();
        let img = image::open(&p).unwrap().to_luma8();
        assert_eq!(img.dimensions(), (3, 2));
        assert_eq!(img.into_raw(), heatmap_pixels(&m, 1.0).unwrap());
    }

    #[test]
    fn pr_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("pr.csv");
        let curves = vec![
            PrCurve { sequence_length: 1, points: vec![PrPoint { threshold: 0.0, precision: 1.0, recall: 0.0 }, PrPoint { threshold: 2.0, precision: 0.75, recall: 1.0 / 3.0 }] },
            PrCurve { sequence_length: 5, points: vec![PrPoint { threshold: 0.1, precision: 0.5, recall: 0.1 }] },
        ];
        write_pr_csv(&curves, &p).unwrap();
        assert_eq!(read_pr_csv(&p).unwrap(), curves);
        fs::write(&p, "threshold,precision,recall,n\n0.1,x,0.2,1\n").unwrap();
        assert!(read_pr_csv(&p).is_err());
    }
}
