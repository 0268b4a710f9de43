//! Figure rendering: heatmaps with a sequential or diverging palette,
//! grayscale tiles, and horizontal panel assembly, all as PNG files.

use std::path::Path;

use image::{Rgb, RgbImage};
use ndarray::Array2;

use crate::error::{Error, Result};

/// Piecewise-linear sequential palette (dark blue -> green -> yellow).
const SEQUENTIAL_ANCHORS: [[f64; 3]; 5] = [
    [68.0, 1.0, 84.0],
    [59.0, 82.0, 139.0],
    [33.0, 145.0, 140.0],
    [94.0, 201.0, 98.0],
    [253.0, 231.0, 37.0],
];

/// Diverging palette (blue -> white -> red); red marks positive error.
const DIVERGING_ANCHORS: [[f64; 3]; 3] = [
    [59.0, 76.0, 192.0],
    [245.0, 245.0, 245.0],
    [180.0, 4.0, 38.0],
];

fn palette_lookup(anchors: &[[f64; 3]], v: f64) -> Rgb<u8> {
    let v = v.clamp(0.0, 1.0);
    let pos = v * (anchors.len() - 1) as f64;
    let i = (pos.floor() as usize).min(anchors.len() - 2);
    let t = pos - i as f64;
    let mix = |a: f64, b: f64| (a + t * (b - a)).round().clamp(0.0, 255.0) as u8;
    Rgb([
        mix(anchors[i][0], anchors[i + 1][0]),
        mix(anchors[i][1], anchors[i + 1][1]),
        mix(anchors[i][2], anchors[i + 1][2]),
    ])
}

/// Renders values mapped from [lo, hi] onto the sequential palette.
pub fn heatmap(values: &Array2<f64>, lo: f64, hi: f64) -> RgbImage {
    let (h, w) = values.dim();
    let span = (hi - lo).max(1e-12);
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = (values[[y as usize, x as usize]] - lo) / span;
        palette_lookup(&SEQUENTIAL_ANCHORS, v)
    })
}

/// Renders a signed error map: the palette midpoint is zero and `extent`
/// maps to the palette ends.
pub fn diverging_map(values: &Array2<f64>, extent: f64) -> RgbImage {
    let (h, w) = values.dim();
    let extent = extent.max(1e-12);
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = 0.5 + 0.5 * (values[[y as usize, x as usize]] / extent);
        palette_lookup(&DIVERGING_ANCHORS, v)
    })
}

/// Grayscale rendering of a [0, 1] grid.
pub fn gray_image(values: &Array2<f64>) -> RgbImage {
    let (h, w) = values.dim();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let v = (values[[y as usize, x as usize]].clamp(0.0, 1.0) * 255.0).round() as u8;
        Rgb([v, v, v])
    })
}

/// Joins tiles horizontally with a thin separator.
pub fn hstack(tiles: &[RgbImage]) -> RgbImage {
    const GAP: u32 = 2;
    let height = tiles.iter().map(|t| t.height()).max().unwrap_or(1);
    let width: u32 =
        tiles.iter().map(|t| t.width()).sum::<u32>() + GAP * (tiles.len().max(1) as u32 - 1);
    let mut out = RgbImage::from_pixel(width, height, Rgb([255, 255, 255]));
    let mut x0 = 0;
    for tile in tiles {
        for (x, y, px) in tile.enumerate_pixels() {
            out.put_pixel(x0 + x, y, *px);
        }
        x0 += tile.width() + GAP;
    }
    out
}

pub fn save_png(img: &RgbImage, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    img.save(path).map_err(|e| Error::Domain(format!("writing {}: {e}", path.display())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;

    #[test]
    fn palettes_hit_their_anchors() {
        let img = heatmap(&array![[0.0, 1.0]], 0.0, 1.0);
        assert_eq!(img.get_pixel(0, 0).0, [68, 1, 84]);
        assert_eq!(img.get_pixel(1, 0).0, [253, 231, 37]);
        let div = diverging_map(&array![[-1.0, 0.0, 1.0]], 1.0);
        assert_eq!(div.get_pixel(0, 0).0, [59, 76, 192]);
        assert_eq!(div.get_pixel(1, 0).0, [245, 245, 245]);
        assert_eq!(div.get_pixel(2, 0).0, [180, 4, 38]);
    }

    #[test]
    fn hstack_concatenates_widths() {
        let a = gray_image(&Array2::zeros((4, 3)));
        let b = gray_image(&Array2::ones((4, 5)));
        let joined = hstack(&[a, b]);
        assert_eq!(joined.width(), 3 + 2 + 5);
        assert_eq!(joined.height(), 4);
    }

    #[test]
    fn png_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("x.png");
        save_png(&gray_image(&Array2::from_elem((4, 4), 0.5)), &path).unwrap();
        assert!(path.exists());
    }
}
