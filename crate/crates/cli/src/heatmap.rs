//! Raster heatmaps for two-axis sweep grids.

use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use serde::Serialize;

use netopp::sweep::{Axis, SweepGrid};
use netopp::{Error, Result};

const LOW: [f64; 3] = [68.0, 1.0, 84.0];
const HIGH: [f64; 3] = [253.0, 231.0, 37.0];
pub const NO_DATA: Rgb<u8> = Rgb([255, 255, 255]);

#[derive(Debug, Serialize)]
struct Sidecar<'a> {
    image: String,
    transform: &'static str,
    value_min: Option<f64>,
    value_max: Option<f64>,
    /// Vertical axis (rows, top to bottom), then horizontal axis.
    axes: &'a [Axis],
    pixels_per_cell: u32,
    no_data_rgb: [u8; 3],
}

fn colour(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    let c = |k: usize| (LOW[k] + t * (HIGH[k] - LOW[k])).round() as u8;
    Rgb([c(0), c(1), c(2)])
}

/// Path of the JSON sidecar written next to `image`.
pub fn sidecar_path(image: &Path) -> PathBuf {
    let mut s = image.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

/// Writes a row-major raster of `grid` (first axis down, second across).
/// PoA grids are shown as `100 (PoA - 1)`; masked cells use [`NO_DATA`].
pub fn emit_heatmap(grid: &SweepGrid, path: &Path, scale: u32) -> Result<()> {
    let [rows, cols] = grid.shape()[..] else {
        return Err(Error::Precondition(format!("heatmap needs a 2-axis grid, got {} axes", grid.axes.len())));
    };
    let transform: fn(f64) -> f64 = if grid.kind.is_poa() { |v| 100.0 * (v - 1.0) } else { |v| v };
    let shown: Vec<Option<f64>> = grid.cells.iter().map(|c| c.value.map(transform)).collect();
    let (lo, hi) = shown
        .iter()
        .flatten()
        .fold(None, |acc: Option<(f64, f64)>, &v| Some(acc.map_or((v, v), |(a, b)| (a.min(v), b.max(v)))))
        .unzip();
    let scale = scale.max(1);
    let mut img = RgbImage::new(cols as u32 * scale, rows as u32 * scale);
    for (idx, v) in shown.iter().enumerate() {
        let px = match (v, lo, hi) {
            (Some(v), Some(lo), Some(hi)) if hi > lo => colour((v - lo) / (hi - lo)),
            (Some(_), _, _) => colour(0.0),
            (None, _, _) => NO_DATA,
        };
        let (r, c) = ((idx / cols) as u32, (idx % cols) as u32);
        for dy in 0..scale {
            for dx in 0..scale {
                img.put_pixel(c * scale + dx, r * scale + dy, px);
            }
        }
    }
    img.save(path).map_err(|e| Error::Io(std::io::Error::other(e)))?;
    let sidecar = Sidecar {
        image: path.file_name().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default(),
        transform: if grid.kind.is_poa() { "100*(value-1)" } else { "identity" },
        value_min: lo,
        value_max: hi,
        axes: &grid.axes,
        pixels_per_cell: scale,
        no_data_rgb: NO_DATA.0,
    };
    std::fs::write(sidecar_path(path), serde_json::to_string_pretty(&sidecar)? + "\n")?;
    Ok(())
}
