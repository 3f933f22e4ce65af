//! `p(t)` curves as a TSV table and a PNG line chart.

use std::path::Path;

use image::{Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::schedule::{schedule_curve, ScheduleConfig};

pub const CURVE_HEADER: &str = "t\tp";

pub fn curve_tsv(points: &[(f64, f64)]) -> String {
    let mut out = format!("{CURVE_HEADER}\n");
    for (t, p) in points {
        out.push_str(&format!("{t}\t{p}\n"));
    }
    out
}

const W: u32 = 640;
const H: u32 = 360;
const MARGIN: u32 = 40;

fn line(img: &mut RgbImage, (x0, y0): (i64, i64), (x1, y1): (i64, i64), color: Rgb<u8>) {
    let (dx, dy) = ((x1 - x0).abs(), -(y1 - y0).abs());
    let (sx, sy) = (if x0 < x1 { 1 } else { -1 }, if y0 < y1 { 1 } else { -1 });
    let (mut x, mut y, mut err) = (x0, y0, dx + dy);
    loop {
        if (0..i64::from(W)).contains(&x) && (0..i64::from(H)).contains(&y) {
            img.put_pixel(x as u32, y as u32, color);
        }
        if x == x1 && y == y1 {
            break;
        }
        let e2 = 2 * err;
        if e2 >= dy {
            err += dy;
            x += sx;
        }
        if e2 <= dx {
            err += dx;
            y += sy;
        }
    }
}

/// White canvas, black axes, `p` in [0, 1] against `t` in [0, t_max].
pub fn render_curve(points: &[(f64, f64)], t_max: f64) -> RgbImage {
    let mut img = RgbImage::from_pixel(W, H, Rgb([255, 255, 255]));
    let (left, right) = (i64::from(MARGIN), i64::from(W - MARGIN));
    let (top, bottom) = (i64::from(MARGIN), i64::from(H - MARGIN));
    let black = Rgb([0, 0, 0]);
    let grey = Rgb([200, 200, 200]);
    line(&mut img, (left, top), (right, top), grey);
    line(&mut img, (left, bottom), (right, bottom), black);
    line(&mut img, (left, top), (left, bottom), black);
    let to_px = |(t, p): (f64, f64)| {
        let x = left as f64 + t / t_max * (right - left) as f64;
        let y = bottom as f64 - p * (bottom - top) as f64;
        (x.round() as i64, y.round() as i64)
    };
    let blue = Rgb([30, 80, 200]);
    for pair in points.windows(2) {
        line(&mut img, to_px(pair[0]), to_px(pair[1]), blue);
    }
    if let Some(&(_, p)) = points.last() {
        line(&mut img, to_px(*points.last().unwrap()), to_px((t_max, p)), blue);
    }
    img
}

/// Writes `<stem>.png` and `<stem>.tsv` next to each other; returns the rows.
pub fn plot_schedule(cfg: &ScheduleConfig, resolution: usize, png: &Path) -> Result<Vec<(f64, f64)>> {
    let points = schedule_curve(cfg, resolution)?;
    let tsv = png.with_extension("tsv");
    std::fs::write(&tsv, curve_tsv(&points)).map_err(|e| Error::io(&tsv, e))?;
    render_curve(&points, f64::from(cfg.t_max))
        .save_with_format(png, image::ImageFormat::Png)
        .map_err(|e| Error::Input(format!("{}: {e}", png.display())))?;
    Ok(points)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_stage_curve_is_flat_zero() {
        let dir = tempfile::tempdir().unwrap();
        let png = dir.path().join("p.png");
        let pts = plot_schedule(&ScheduleConfig::two_stage(60), 50, &png).unwrap();
        assert!(pts.iter().all(|&(_, p)| p == 0.0));
        let tsv = std::fs::read_to_string(png.with_extension("tsv")).unwrap();
        assert_eq!(tsv.lines().count(), 51);
        assert_eq!(image::open(&png).unwrap().width(), W);
    }
}
