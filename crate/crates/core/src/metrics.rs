//! Lightness order error (LOE).
//!
//! Counts, per pixel, how many pairwise lightness orderings flip between
//! the original and the enhanced image, averaged over all pixels. The
//! comparison runs on a fixed-size downsampling because the raw count grows
//! with the pixel count, which would make values at different resolutions
//! incomparable.

use crate::error::{Error, Result};
use crate::raster::{lightness, Image};

/// LOE sampling protocol.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LoeConfig {
    /// Edge length of the evenly sampled grid the metric is computed on.
    pub sample_size: usize,
}

impl Default for LoeConfig {
    fn default() -> Self {
        LoeConfig { sample_size: 100 }
    }
}

/// Mean relative-order difference of lightness between `original` and
/// `enhanced`, computed on `sample_size^2` evenly collected pixels.
///
/// The order predicate is `U(p, q) = 1 iff p >= q`, so ties count as
/// ordered: a monotone but non-strict transform can still register order
/// changes, while any uniform strictly increasing transform scores 0.
pub fn loe(original: &Image, enhanced: &Image, cfg: &LoeConfig) -> Result<f64> {
    if original.width() != enhanced.width() || original.height() != enhanced.height() {
        return Err(Error::dims(
            (original.width(), original.height()),
            (enhanced.width(), enhanced.height()),
        ));
    }
    if cfg.sample_size < 2 {
        return Err(Error::InvalidArgument(format!(
            "sample_size must be at least 2, got {}",
            cfg.sample_size
        )));
    }
    let s = cfg.sample_size;
    let l = lightness(original).resize_nearest(s, s)?;
    let lp = lightness(enhanced).resize_nearest(s, s)?;
    let l = l.values();
    let lp = lp.values();
    let m = l.len();

    // Pack U(L(x), ·) rows into 64-bit blocks; the XOR of two rows then
    // reduces to popcounts. The pairwise scan is O(m^2) either way, this
    // just keeps the constant small at the default m = 10^4.
    let blocks = m.div_ceil(64);
    let mut flips: u64 = 0;
    let mut row = vec![0u64; blocks];
    let mut row_p = vec![0u64; blocks];
    for x in 0..m {
        row.iter_mut().for_each(|b| *b = 0);
        row_p.iter_mut().for_each(|b| *b = 0);
        for y in 0..m {
            if l[x] >= l[y] {
                row[y / 64] |= 1 << (y % 64);
            }
            if lp[x] >= lp[y] {
                row_p[y / 64] |= 1 << (y % 64);
            }
        }
        for b in 0..blocks {
            flips += (row[b] ^ row_p[b]).count_ones() as u64;
        }
    }
    Ok(flips as f64 / m as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::ScalarMap;

    fn image_from_lightness(map: &ScalarMap) -> Image {
        Image::from_fn(map.width(), map.height(), |r, c| [map.value(r, c); 3]).unwrap()
    }

    /// Direct transcription of the double sum, kept independent of the
    /// bit-packed implementation.
    fn loe_naive(original: &Image, enhanced: &Image, s: usize) -> f64 {
        let l = lightness(original).resize_nearest(s, s).unwrap();
        let lp = lightness(enhanced).resize_nearest(s, s).unwrap();
        let (l, lp) = (l.values(), lp.values());
        let m = l.len();
        let mut total = 0u64;
        for x in 0..m {
            for y in 0..m {
                let u = l[x] >= l[y];
                let up = lp[x] >= lp[y];
                if u != up {
                    total += 1;
                }
            }
        }
        total as f64 / m as f64
    }

    #[test]
    fn identical_images_score_zero() {
        let img = Image::from_fn(10, 10, |r, c| {
            let t = ((r * 13 + c * 7) % 29) as f64 / 28.0;
            [t, t * 0.5, 1.0 - t]
        })
        .unwrap();
        assert_eq!(loe(&img, &img, &LoeConfig { sample_size: 10 }).unwrap(), 0.0);
    }

    #[test]
    fn uniform_strictly_monotone_transform_scores_zero() {
        let img = Image::from_fn(16, 12, |r, c| {
            let t = ((r * 31 + c * 17) % 53) as f64 / 52.0;
            [t, (t * 0.9).min(1.0), t * t]
        })
        .unwrap();
        let transformed = Image::from_fn(16, 12, |r, c| {
            let p = img.pixel(r, c);
            [p[0].sqrt(), p[1].sqrt(), p[2].sqrt()]
        })
        .unwrap();
        assert_eq!(loe(&img, &transformed, &LoeConfig { sample_size: 8 }).unwrap(), 0.0);
    }

    #[test]
    fn two_pixel_flip_scores_two() {
        let original = image_from_lightness(&ScalarMap::from_values(2, 1, vec![0.2, 0.8]).unwrap());
        let flipped = image_from_lightness(&ScalarMap::from_values(2, 1, vec![0.8, 0.2]).unwrap());
        let got = loe(&original, &flipped, &LoeConfig { sample_size: 2 }).unwrap();
        assert_eq!(got, 2.0);
    }

    #[test]
    fn matches_naive_reference() {
        let a = Image::from_fn(9, 7, |r, c| {
            let t = ((r * 5 + c * 11) % 17) as f64 / 16.0;
            [t, (t + 0.3).min(1.0), (1.0 - t) * 0.7]
        })
        .unwrap();
        let b = Image::from_fn(9, 7, |r, c| {
            let t = ((r * 3 + c * 13) % 23) as f64 / 22.0;
            [t * 0.8, t, (t * 2.0).min(1.0)]
        })
        .unwrap();
        for s in [2, 5, 9] {
            let fast = loe(&a, &b, &LoeConfig { sample_size: s }).unwrap();
            let slow = loe_naive(&a, &b, s);
            assert_eq!(fast, slow, "sample_size {s}");
        }
    }

    #[test]
    fn symmetric_and_bounded() {
        let a = Image::from_fn(8, 8, |r, c| [((r + c) % 5) as f64 / 4.0; 3]).unwrap();
        let b = Image::from_fn(8, 8, |r, c| [((r * c) % 7) as f64 / 6.0; 3]).unwrap();
        let cfg = LoeConfig { sample_size: 8 };
        let ab = loe(&a, &b, &cfg).unwrap();
        let ba = loe(&b, &a, &cfg).unwrap();
        assert_eq!(ab, ba);
        assert!(ab >= 0.0);
        assert!(ab <= (cfg.sample_size * cfg.sample_size) as f64);
    }

    #[test]
    fn rejects_bad_inputs() {
        let a = Image::from_fn(4, 4, |_, _| [0.5; 3]).unwrap();
        let b = Image::from_fn(5, 4, |_, _| [0.5; 3]).unwrap();
        assert!(matches!(
            loe(&a, &b, &LoeConfig::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        assert!(loe(&a, &a, &LoeConfig { sample_size: 1 }).is_err());
    }
}
