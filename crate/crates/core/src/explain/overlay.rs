use std::path::{Path, PathBuf};

use image::{Rgb, RgbImage};
use ndarray::Array2;

use crate::dataset::image::decode_rgb;
use crate::error::{Error, Result};
use crate::explain::gradcam::ActivationMap;

/// Jet colormap; `jet(0) = (0, 0, 128)`, `jet(1) = (128, 0, 0)`.
pub fn jet(t: f64) -> Rgb<u8> {
    let t = t.clamp(0.0, 1.0);
    let ch = |c: f64| ((1.5 - (4.0 * t - c).abs()).clamp(0.0, 1.0) * 255.0).round() as u8;
    Rgb([ch(3.0), ch(2.0), ch(1.0)])
}

/// Bilinear resize to `(height, width)` using pixel-centre alignment.
pub fn upsample(map: &Array2<f64>, height: usize, width: usize) -> Array2<f64> {
    let (h, w) = map.dim();
    let coord = |dst: usize, src_len: usize, dst_len: usize| {
        let x = ((dst as f64 + 0.5) * src_len as f64 / dst_len as f64 - 0.5).clamp(0.0, (src_len - 1) as f64);
        let lo = x.floor() as usize;
        (lo, (lo + 1).min(src_len - 1), x - lo as f64)
    };
    Array2::from_shape_fn((height, width), |(y, x)| {
        let (y0, y1, fy) = coord(y, h, height);
        let (x0, x1, fx) = coord(x, w, width);
        let top = map[[y0, x0]] * (1.0 - fx) + map[[y0, x1]] * fx;
        let bottom = map[[y1, x0]] * (1.0 - fx) + map[[y1, x1]] * fx;
        top * (1.0 - fy) + bottom * fy
    })
}

/// Alpha-blends the colormapped, upsampled map over `base`.
pub fn blend(map: &ActivationMap, base: &RgbImage, opacity: f64) -> Result<RgbImage> {
    if !(opacity > 0.0 && opacity < 1.0) {
        return Err(Error::Invalid(format!("opacity {opacity} outside (0, 1)")));
    }
    let (w, h) = base.dimensions();
    let up = upsample(&map.map, h as usize, w as usize);
    let mut out = base.clone();
    for (x, y, px) in out.enumerate_pixels_mut() {
        let heat = jet(up[[y as usize, x as usize]]);
        for c in 0..3 {
            let v = (1.0 - opacity) * f64::from(px[c]) + opacity * f64::from(heat[c]);
            px[c] = v.round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(out)
}

/// Sidecar path for an overlay: `<output>.txt`.
pub fn sidecar_path(output: &Path) -> PathBuf {
    let mut s = output.as_os_str().to_owned();
    s.push(".txt");
    PathBuf::from(s)
}

/// Renders the overlay for the image at `source` into `output` (PNG) and
/// writes a sidecar with the layer, output index and normalization max.
pub fn overlay(map: &ActivationMap, source: &Path, opacity: f64, output: &Path) -> Result<()> {
    let base = decode_rgb(source)?;
    let img = blend(map, &base, opacity)?;
    img.save_with_format(output, image::ImageFormat::Png)
        .map_err(|e| Error::Invalid(format!("{}: {e}", output.display())))?;
    let side = sidecar_path(output);
    let text = format!(
        "source = {}\nlayer = {}\noutput_index = {}\nnormalization_max = {:e}\n",
        source.display(),
        map.layer,
        map.output_index,
        map.max
    );
    std::fs::write(&side, text).map_err(|e| Error::io(&side, e))
}
