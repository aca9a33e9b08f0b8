//! Minimal static PNG plots: scatter of ground truth against prediction and
//! a correlation heatmap. No text rendering; the CSV companions carry the
//! numbers.

use image::{Rgb, RgbImage};

use crate::evaluation::correlation::CorrelationMatrix;

const SIZE: u32 = 480;
const MARGIN: u32 = 40;
const WHITE: Rgb<u8> = Rgb([255, 255, 255]);
const AXIS: Rgb<u8> = Rgb([60, 60, 60]);
const GUIDE: Rgb<u8> = Rgb([200, 200, 200]);
const POINT: Rgb<u8> = Rgb([31, 119, 180]);
const UNDEFINED: Rgb<u8> = Rgb([160, 160, 160]);

fn span(values: impl Iterator<Item = f64>) -> (f64, f64) {
    let (lo, hi) = values.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    if !lo.is_finite() {
        (0.0, 1.0)
    } else if hi > lo {
        (lo, hi)
    } else {
        (lo - 0.5, hi + 0.5)
    }
}

/// Ground truth on x, prediction on y, shared scale, with the identity line.
pub fn scatter(points: &[(f64, f64)]) -> RgbImage {
    let mut img = RgbImage::from_pixel(SIZE, SIZE, WHITE);
    let (lo, hi) = span(points.iter().flat_map(|&(g, p)| [g, p]));
    let inner = (SIZE - 2 * MARGIN - 1) as f64;
    let to_px = |v: f64| ((v - lo) / (hi - lo) * inner).round() as u32;
    for i in 0..=inner as u32 {
        img.put_pixel(MARGIN + i, SIZE - MARGIN - 1 - i, GUIDE);
        img.put_pixel(MARGIN + i, SIZE - MARGIN, AXIS);
        img.put_pixel(MARGIN - 1, SIZE - MARGIN - 1 - i, AXIS);
    }
    for &(g, p) in points {
        let x = MARGIN + to_px(g);
        let y = SIZE - MARGIN - 1 - to_px(p);
        for dx in 0..3u32 {
            for dy in 0..3u32 {
                let (px, py) = ((x + dx).saturating_sub(1), (y + dy).saturating_sub(1));
                if px < SIZE && py < SIZE {
                    img.put_pixel(px, py, POINT);
                }
            }
        }
    }
    img
}

/// Blue (-1) through white (0) to red (+1).
pub fn diverging(v: f64) -> Rgb<u8> {
    let v = v.clamp(-1.0, 1.0);
    let fade = |t: f64| (255.0 * (1.0 - t)).round() as u8;
    if v >= 0.0 {
        Rgb([255, fade(v), fade(v)])
    } else {
        Rgb([fade(-v), fade(-v), 255])
    }
}

pub fn heatmap(matrix: &CorrelationMatrix) -> RgbImage {
    const CELL: u32 = 32;
    let k = matrix.labels.len() as u32;
    let mut img = RgbImage::from_pixel(k * CELL, k * CELL, WHITE);
    for (i, row) in matrix.values.iter().enumerate() {
        for (j, v) in row.iter().enumerate() {
            let color = v.map_or(UNDEFINED, diverging);
            for y in 1..CELL {
                for x in 1..CELL {
                    img.put_pixel(j as u32 * CELL + x, i as u32 * CELL + y, color);
                }
            }
        }
    }
    img
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn colors_and_sizes() {
        assert_eq!(diverging(0.0), WHITE);
        assert_eq!(diverging(1.0), Rgb([255, 0, 0]));
        assert_eq!(diverging(-1.0), Rgb([0, 0, 255]));
        let m = CorrelationMatrix {
            labels: vec!["a".into(), "b".into()],
            values: vec![vec![Some(1.0), None], vec![None, Some(1.0)]],
        };
        assert_eq!(heatmap(&m).dimensions(), (64, 64));
        assert_eq!(scatter(&[(0.0, 0.0), (1.0, 1.0)]).dimensions(), (SIZE, SIZE));
        assert_eq!(scatter(&[]).dimensions(), (SIZE, SIZE));
    }
}
