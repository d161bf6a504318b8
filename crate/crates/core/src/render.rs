//! Chaos-game pictures of the attractor as binary pixmaps.

use std::fs;
use std::io::{self, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::ifs::{IfsSpec, Point};

/// Orbit of `(1/2, 1/2)` under maps drawn independently with probabilities
/// `p_i` from a ChaCha8 stream seeded with `seed`. The first `burn_in`
/// points are discarded and exactly `n` are returned.
pub fn chaos_game(ifs: &IfsSpec, n: usize, seed: u64, burn_in: usize) -> Result<Vec<Point>> {
    if n == 0 {
        return Err(Error::InvalidArgument("need at least one point".into()));
    }
    let mut cumulative = Vec::with_capacity(ifs.len());
    let mut acc = 0.0;
    for m in ifs.maps() {
        acc += m.p();
        cumulative.push(acc);
    }
    let last = ifs.len() - 1;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pt: Point = (0.5, 0.5);
    let mut out = Vec::with_capacity(n);
    for step in 0..burn_in + n {
        let u: f64 = rng.gen::<f64>() * acc;
        let i = cumulative.iter().position(|&c| u < c).unwrap_or(last);
        pt = ifs.maps()[i].apply(pt);
        if step >= burn_in {
            out.push(pt);
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RasterImage {
    width: usize,
    height: usize,
    /// Row-major RGB triples, top row first.
    pixels: Vec<u8>,
}

impl RasterImage {
    pub fn blank(width: usize, height: usize) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image size {width}x{height} must be positive"
            )));
        }
        Ok(RasterImage {
            width,
            height,
            pixels: vec![255; width * height * 3],
        })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn pixel(&self, col: usize, row: usize) -> [u8; 3] {
        let k = 3 * (row * self.width + col);
        [self.pixels[k], self.pixels[k + 1], self.pixels[k + 2]]
    }

    fn set(&mut self, col: usize, row: usize, rgb: [u8; 3]) {
        let k = 3 * (row * self.width + col);
        self.pixels[k..k + 3].copy_from_slice(&rgb);
    }

    pub fn count_black(&self) -> usize {
        self.pixels.chunks(3).filter(|c| c == &[0, 0, 0]).count()
    }

    /// Binary PPM: `P6`, ASCII size and depth, then raw RGB.
    pub fn to_ppm(&self) -> Vec<u8> {
        let mut out = format!("P6\n{} {}\n255\n", self.width, self.height).into_bytes();
        out.extend_from_slice(&self.pixels);
        out
    }

    pub fn write_ppm(&self, path: &Path) -> io::Result<()> {
        write_atomic(path, &self.to_ppm())
    }
}

/// Marks the pixel of every point of `[0, 1]^2` black on a white image.
/// `y = 0` is the bottom row; points on the right or top edge land in the
/// last column or row, and points outside the square are ignored.
pub fn rasterize(points: &[Point], width: usize, height: usize) -> Result<RasterImage> {
    let mut img = RasterImage::blank(width, height)?;
    let cell = |v: f64, n: usize| ((v * n as f64) as usize).min(n - 1);
    for &(x, y) in points {
        if !((0.0..=1.0).contains(&x) && (0.0..=1.0).contains(&y)) {
            continue;
        }
        let col = cell(x, width);
        let row = height - 1 - cell(y, height);
        img.set(col, row, [0, 0, 0]);
    }
    Ok(img)
}

/// Writes to a sibling temporary file and renames it over `path`, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| io::Error::new(io::ErrorKind::InvalidInput, "path has no file name"))?;
    let mut tmp_name = std::ffi::OsString::from(".");
    tmp_name.push(name);
    tmp_name.push(format!(".{}.tmp", std::process::id()));
    let tmp = path.with_file_name(tmp_name);
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).inspect_err(|_| {
        let _ = fs::remove_file(&tmp);
    })
}
