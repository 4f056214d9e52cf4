//! Procedural side-scrolling journey rendered in two appearance domains.
//!
//! A camera pans along an endless landscape of hills, buildings, trees and
//! poles. Frame `i` of both domains shows the same region layout; domain B
//! inverts A's brightness and uses other hues. World units are pixels at
//! 64×64; other sizes resample the same world.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::images::save_png;
use super::{DataError, DataResult, ImageRecord};
use crate::tensor::Tensor;

/// Scene region of a pixel; the shared structure of both domains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Sky,
    Hill,
    Ground,
    Wall,
    Roof,
    Trunk,
    Crown,
    Pole,
}

const REGIONS: [Region; 8] =
    [Region::Sky, Region::Hill, Region::Ground, Region::Wall, Region::Roof, Region::Trunk, Region::Crown, Region::Pole];

/// Camera holds still for `length` frames after every `every` moving frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct StationaryRuns {
    pub every: usize,
    pub length: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub seed: u64,
    pub count: usize,
    pub size: usize,
    /// Camera advance per moving frame, in world units.
    pub speed: f64,
    pub stationary: Option<StationaryRuns>,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self { seed: 0, count: 100, size: 64, speed: 7.0, stationary: None }
    }
}

fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Uniform in `[0, 1)` from a hashed key.
fn unit(seed: u64, a: i64, b: i64, c: u64) -> f64 {
    let h = mix(mix(mix(seed ^ c.wrapping_mul(0x100_0000_01b3)) ^ a as u64) ^ (b as u64).rotate_left(17));
    (h >> 11) as f64 / (1u64 << 53) as f64
}

const CELL: f64 = 24.0;

struct World {
    seed: u64,
    hills: [(f64, f64, f64); 3],
    ground: (f64, f64),
}

#[derive(Clone, Copy)]
enum Object {
    Building { x0: f64, width: f64, base: f64, height: f64, roof: f64 },
    Tree { x0: f64, base: f64, trunk: f64, radius: f64 },
    Pole { x0: f64, base: f64, height: f64 },
}

impl World {
    fn new(seed: u64) -> Self {
        let u = |k: u64| unit(seed, -1, -1, k);
        let wave = |k: u64, len: f64, amp: f64| (len * (0.8 + 0.4 * u(k)), amp, std::f64::consts::TAU * u(k + 1));
        Self {
            seed,
            hills: [wave(1, 90.0, 3.0), wave(3, 150.0, 4.0), wave(5, 260.0, 2.0)],
            ground: (200.0 * (0.8 + 0.4 * u(7)), std::f64::consts::TAU * u(8)),
        }
    }

    fn horizon(&self, x: f64) -> f64 {
        24.0 + self.hills.iter().map(|&(l, a, p)| a * (std::f64::consts::TAU * x / l + p).sin()).sum::<f64>()
    }

    fn ground_line(&self, x: f64) -> f64 {
        42.0 + 2.0 * (std::f64::consts::TAU * x / self.ground.0 + self.ground.1).sin()
    }

    fn object(&self, cell: i64) -> Option<Object> {
        let u = |k: u64| unit(self.seed, cell, 0, k);
        let x0 = cell as f64 * CELL + (2.0 + 6.0 * u(1)).floor();
        let kind = u(0);
        let int = |k: u64, lo: f64, span: f64| (lo + span * u(k)).floor();
        if kind < 0.15 {
            None
        } else if kind < 0.5 {
            let width = int(2, 10.0, 9.0);
            let base = (self.ground_line(x0 + width / 2.0) + 2.0).floor();
            Some(Object::Building { x0, width, base, height: int(3, 10.0, 11.0), roof: int(4, 4.0, 5.0) })
        } else if kind < 0.8 {
            let base = (self.ground_line(x0 + 2.0) + 2.0).floor();
            Some(Object::Tree { x0, base, trunk: int(3, 6.0, 5.0), radius: int(4, 5.0, 4.0) })
        } else {
            let base = (self.ground_line(x0 + 2.0) + 2.0).floor();
            Some(Object::Pole { x0, base, height: int(3, 22.0, 11.0) })
        }
    }

    fn background(&self, x: f64, y: f64) -> Region {
        if y < self.horizon(x) {
            Region::Sky
        } else if y < self.ground_line(x) {
            Region::Hill
        } else {
            Region::Ground
        }
    }

    fn region(&self, x: f64, y: f64) -> Region {
        let mut r = self.background(x, y);
        let cell = (x / CELL).floor() as i64;
        for c in cell - 2..=cell {
            if let Some(obj) = self.object(c) {
                if let Some(hit) = hit(obj, x, y) {
                    r = hit;
                }
            }
        }
        r
    }
}

fn hit(obj: Object, x: f64, y: f64) -> Option<Region> {
    match obj {
        Object::Building { x0, width, base, height, roof } => {
            let top = base - height;
            if (x0..x0 + width).contains(&x) && (top..base).contains(&y) {
                return Some(Region::Wall);
            }
            let apex = top - roof;
            let half = width / 2.0 + 1.0;
            if (apex..top).contains(&y) && (x - (x0 + width / 2.0)).abs() <= (y - apex) / roof * half {
                return Some(Region::Roof);
            }
            None
        }
        Object::Tree { x0, base, trunk, radius } => {
            let top = base - trunk;
            let (cx, cy) = (x0 + 2.0, top - radius + 2.0);
            if (x - cx).powi(2) + (y - cy).powi(2) <= radius * radius {
                Some(Region::Crown)
            } else if (x0..x0 + 4.0).contains(&x) && (top..base).contains(&y) {
                Some(Region::Trunk)
            } else {
                None
            }
        }
        Object::Pole { x0, base, height } => {
            ((x0..x0 + 4.0).contains(&x) && (base - height..base).contains(&y)).then_some(Region::Pole)
        }
    }
}

/// Appearance of one domain: gray level and tint per region, texture noise.
struct Palette {
    levels: [f64; 8],
    tints: [[f64; 3]; 8],
    /// Signed amplitude of the shared texture field.
    noise: f64,
}

/// Zero-luma chroma offset towards `rgb`, shrunk so `level + tint` stays in `[0, 1]`.
fn tint(rgb: [f64; 3], level: f64) -> [f64; 3] {
    let luma = 0.299 * rgb[0] + 0.587 * rgb[1] + 0.114 * rgb[2];
    let t = rgb.map(|v| 0.5 * (v - luma));
    let peak = t.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let room = (level.min(1.0 - level) - 0.05).max(0.0);
    let s = if peak > room { room / peak } else { 1.0 };
    t.map(|v| v * s)
}

// Region order: sky, hill, ground, wall, roof, trunk, crown, pole.
const TEXTURE: f64 = 0.025;
const LEVELS: [f64; 8] = [0.80, 0.44, 0.56, 0.68, 0.32, 0.22, 0.10, 0.90];
const HUES_A: [[f64; 3]; 8] = [
    [0.3, 0.6, 1.0],
    [0.2, 0.7, 0.2],
    [0.6, 0.8, 0.2],
    [0.9, 0.4, 0.3],
    [0.7, 0.2, 0.2],
    [0.6, 0.4, 0.2],
    [0.1, 0.6, 0.1],
    [0.8, 0.8, 0.6],
];
const HUES_B: [[f64; 3]; 8] = [
    [0.2, 0.2, 0.6],
    [0.7, 0.6, 0.9],
    [0.8, 0.5, 0.3],
    [0.3, 0.6, 0.7],
    [0.9, 0.8, 0.3],
    [0.4, 0.3, 0.6],
    [0.9, 0.5, 0.6],
    [0.2, 0.5, 0.4],
];

/// Domain B has the inverted luma of A (texture included) with different
/// hues, so both share gradient magnitudes and hence edges exactly.
fn palette(domain: usize) -> Palette {
    let (levels, hues, noise) =
        if domain == 0 { (LEVELS, HUES_A, TEXTURE) } else { (LEVELS.map(|l| 1.0 - l), HUES_B, -TEXTURE) };
    let mut tints = [[0.0; 3]; 8];
    for k in 0..8 {
        tints[k] = tint(hues[k], levels[k]);
    }
    Palette { levels, tints, noise }
}

/// World x of the left image edge for every frame.
pub fn camera_positions(config: &SynthConfig) -> Vec<f64> {
    (0..config.count)
        .map(|f| {
            let moves = match config.stationary {
                Some(StationaryRuns { every, length }) if every > 0 => {
                    let period = every + length;
                    (f / period) * every + (f % period).min(every)
                }
                _ => f,
            };
            moves as f64 * config.speed
        })
        .collect()
}

/// Region map of the view starting at world x `camera`, `size`×`size`, row-major.
pub fn render_regions(seed: u64, camera: f64, size: usize) -> Vec<Region> {
    let world = World::new(seed);
    let scale = size as f64 / 64.0;
    let mut out = Vec::with_capacity(size * size);
    for py in 0..size {
        for px in 0..size {
            out.push(world.region(camera + (px as f64 + 0.5) / scale, (py as f64 + 0.5) / scale));
        }
    }
    out
}

fn render(seed: u64, camera: f64, size: usize, regions: &[Region], domain: usize) -> Tensor<f32> {
    let pal = palette(domain);
    let scale = size as f64 / 64.0;
    let plane = size * size;
    let mut data = vec![0.0f32; 3 * plane];
    for (i, r) in regions.iter().enumerate() {
        let k = REGIONS.iter().position(|x| x == r).expect("known region");
        let (py, px) = (i / size, i % size);
        let wx = ((camera + (px as f64 + 0.5) / scale) / 2.0).floor() as i64;
        let wy = (((py as f64 + 0.5) / scale) / 2.0).floor() as i64;
        let n = pal.noise * (2.0 * unit(seed, wx, wy, 0xa) - 1.0);
        for c in 0..3 {
            let v = (pal.levels[k] + pal.tints[k][c] + n).clamp(0.0, 1.0);
            data[c * plane + i] = (2.0 * v - 1.0) as f32;
        }
    }
    Tensor::new(&[3, size, size], data).expect("consistent shape")
}

/// Both domains of the configured journey, frame-aligned.
pub fn synthesize(config: &SynthConfig) -> DataResult<(Vec<ImageRecord>, Vec<ImageRecord>)> {
    if config.count == 0 || config.size == 0 {
        return Err(DataError::Invalid("count and size must be positive".into()));
    }
    if !(config.speed.is_finite() && config.speed >= 0.0) {
        return Err(DataError::Invalid(format!("speed must be finite and non-negative, got {}", config.speed)));
    }
    let mut a = Vec::with_capacity(config.count);
    let mut b = Vec::with_capacity(config.count);
    for (frame, cam) in camera_positions(config).into_iter().enumerate() {
        let regions = render_regions(config.seed, cam, config.size);
        a.push(ImageRecord { frame_index: frame, domain: "A".into(), pixels: render(config.seed, cam, config.size, &regions, 0) });
        b.push(ImageRecord { frame_index: frame, domain: "B".into(), pixels: render(config.seed, cam, config.size, &regions, 1) });
    }
    Ok((a, b))
}

/// [`synthesize`] with a steadily moving camera.
pub fn synthesize_paired_domains(seed: u64, count: usize, size: usize) -> DataResult<(Vec<ImageRecord>, Vec<ImageRecord>)> {
    synthesize(&SynthConfig { seed, count, size, ..SynthConfig::default() })
}

pub const MANIFEST_HEADER: &str = "frame_index,domain,path,seed";

/// Writes `A/NNNNNN.png`, `B/NNNNNN.png` and `manifest.csv` under `dir`.
pub fn write_synthetic_dataset(dir: &Path, config: &SynthConfig) -> DataResult<()> {
    let (a, b) = synthesize(config)?;
    let mut manifest = format!("{MANIFEST_HEADER}\n");
    for (name, records) in [("A", &a), ("B", &b)] {
        let sub = dir.join(name);
        fs::create_dir_all(&sub).map_err(|source| DataError::Io { path: sub.clone(), source })?;
        for r in records.iter() {
            let rel = format!("{name}/{:06}.png", r.frame_index);
            save_png(&r.pixels, &dir.join(&rel))?;
            let _ = writeln!(manifest, "{},{},{rel},{}", r.frame_index, name, config.seed);
        }
    }
    let path = dir.join("manifest.csv");
    fs::write(&path, manifest).map_err(|source| DataError::Io { path, source })
}
