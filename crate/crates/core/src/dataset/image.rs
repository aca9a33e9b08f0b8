//! Image decoding and backbone preprocessing.
//!
//! Encoded images are channel-first `(3, H, W)` arrays in BGR order with the
//! ImageNet per-channel mean subtracted and no scaling, which is the input
//! recipe the reference VGG16 weights were trained with.

use std::path::Path;

use image::imageops::FilterType;
use image::RgbImage;
use ndarray::{s, Array3, Axis};

use crate::error::{Error, Result};

/// Per-channel means in BGR order.
pub const BGR_MEAN: [f32; 3] = [103.939, 116.779, 123.68];

pub const DEFAULT_INPUT_SIZE: usize = 224;

/// Closed interval a preprocessed value of channel `c` can take.
pub fn channel_range(c: usize) -> (f32, f32) {
    (-BGR_MEAN[c], 255.0 - BGR_MEAN[c])
}

pub fn decode_rgb(path: &Path) -> Result<RgbImage> {
    let img = image::open(path).map_err(|e| Error::Decode {
        path: path.to_path_buf(),
        message: e.to_string(),
    })?;
    Ok(img.to_rgb8())
}

/// Resizes to `size`×`size` (bilinear) and applies [`preprocess`].
pub fn encode_rgb(img: &RgbImage, size: usize) -> Array3<f32> {
    let size = size as u32;
    if img.width() == size && img.height() == size {
        preprocess(img)
    } else {
        let resized = image::imageops::resize(img, size, size, FilterType::Triangle);
        preprocess(&resized)
    }
}

pub fn encode_image(path: &Path, size: usize) -> Result<Array3<f32>> {
    Ok(encode_rgb(&decode_rgb(path)?, size))
}

pub fn preprocess(img: &RgbImage) -> Array3<f32> {
    let (w, h) = (img.width() as usize, img.height() as usize);
    let mut out = Array3::<f32>::zeros((3, h, w));
    for (x, y, px) in img.enumerate_pixels() {
        let (x, y) = (x as usize, y as usize);
        // RGB -> BGR
        for c in 0..3 {
            out[[c, y, x]] = px.0[2 - c] as f32 - BGR_MEAN[c];
        }
    }
    out
}

/// Inverse of [`preprocess`], rounding to the nearest byte.
pub fn deprocess(t: &Array3<f32>) -> RgbImage {
    let (_, h, w) = t.dim();
    RgbImage::from_fn(w as u32, h as u32, |x, y| {
        let mut px = [0u8; 3];
        for c in 0..3 {
            let v = t[[c, y as usize, x as usize]] + BGR_MEAN[c];
            px[2 - c] = v.round().clamp(0.0, 255.0) as u8;
        }
        image::Rgb(px)
    })
}

/// Horizontal flip of a channel-first image when `coin` is set.
pub fn augment_flip(image: &Array3<f32>, coin: bool) -> Array3<f32> {
    if coin {
        image.slice(s![.., .., ..;-1]).to_owned()
    } else {
        image.clone()
    }
}

/// Same as [`augment_flip`] with `coin = true`, in place.
pub fn flip_in_place(image: &mut Array3<f32>) {
    image.invert_axis(Axis(2));
    let flipped = image.as_standard_layout().into_owned();
    *image = flipped;
}

#[cfg(test)]
mod tests {
    use super::*;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn two_by_two_flip_swaps_columns() {
        // one channel shown; all three get the same treatment
        let mut img = Array3::<f32>::zeros((3, 2, 2));
        for c in 0..3 {
            img.slice_mut(s![c, .., ..])
                .assign(&array![[1.0, 2.0], [3.0, 4.0]]);
        }
        let f = augment_flip(&img, true);
        for c in 0..3 {
            assert_eq!(f.slice(s![c, .., ..]), array![[2.0, 1.0], [4.0, 3.0]]);
        }
        assert_eq!(augment_flip(&img, false), img);
        let mut g = img.clone();
        flip_in_place(&mut g);
        assert_eq!(g, f);
    }

    #[test]
    fn constant_gray_is_constant_per_channel() {
        let img = RgbImage::from_pixel(256, 256, image::Rgb([128, 128, 128]));
        let t = encode_rgb(&img, 224);
        assert_eq!(t.dim(), (3, 224, 224));
        for (c, mean) in BGR_MEAN.iter().enumerate() {
            let expected = 128.0 - mean;
            assert!(t.index_axis(Axis(0), c).iter().all(|&v| v == expected));
        }
    }

    #[test]
    fn values_in_preprocessed_range() {
        let img = RgbImage::from_fn(256, 256, |x, y| image::Rgb([x as u8, y as u8, (x ^ y) as u8]));
        let t = encode_rgb(&img, 224);
        for c in 0..3 {
            let (lo, hi) = channel_range(c);
            assert!(t.index_axis(Axis(0), c).iter().all(|&v| v >= lo && v <= hi));
        }
    }

    #[test]
    fn encode_file_deterministic_and_decode_error() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("a.png");
        let img = RgbImage::from_fn(40, 30, |x, y| image::Rgb([(x * 5) as u8, (y * 7) as u8, 9]));
        img.save(&p).unwrap();
        let a = encode_image(&p, 32).unwrap();
        let b = encode_image(&p, 32).unwrap();
        assert_eq!(a.as_slice().unwrap(), b.as_slice().unwrap());

        let bad = dir.path().join("bad.jpg");
        std::fs::write(&bad, b"not an image").unwrap();
        match encode_image(&bad, 32) {
            Err(Error::Decode { path, .. }) => assert_eq!(path, bad),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deprocess_inverts_preprocess() {
        let img = RgbImage::from_fn(5, 4, |x, y| image::Rgb([x as u8 * 40, y as u8 * 50, 200]));
        assert_eq!(deprocess(&preprocess(&img)), img);
    }

    proptest! {
        #[test]
        fn flip_is_involution_and_preserves_pixels(
            h in 1usize..6, w in 1usize..6, seed in any::<u64>()
        ) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let img = Array3::from_shape_fn((3, h, w), |_| rng.random_range(-100.0f32..100.0));
            let f = augment_flip(&img, true);
            prop_assert_eq!(augment_flip(&f, true), img.clone());
            let mut a: Vec<f32> = img.iter().copied().collect();
            let mut b: Vec<f32> = f.iter().copied().collect();
            a.sort_by(f32::total_cmp);
            b.sort_by(f32::total_cmp);
            prop_assert_eq!(a, b);
        }
    }
}
