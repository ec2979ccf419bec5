//! Image containers and the channel math shared by the whole pipeline:
//! lightness, geometric-mean brightness, nearest-neighbor resampling,
//! histograms and entropy.
//!
//! Pixels are stored as `f64` in linear intensity. 8-bit samples map to
//! `s / 255` on load with no gamma linearization; the enhancement model
//! operates directly on stored pixel values.

use std::path::Path;

use crate::error::{Error, Result};

/// An RGB image with components in `[0, 1]`, row-major, interleaved.
///
/// Construction through [`Image::from_pixels`] or [`load_image`] validates
/// the range invariant. Pipeline stages that intentionally overshoot 1
/// (exposure synthesis) produce their output through internal paths and
/// the excess is clamped at fusion time.
#[derive(Debug, Clone, PartialEq)]
pub struct Image {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// A per-pixel scalar field with the same geometry as the image it was
/// derived from. Houses lightness, illumination, fusion weights and
/// brightness maps.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarMap {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

/// Bin counts over `[0, 1]`. Value `v` lands in bin `floor(v * N)` clamped
/// to `[0, N-1]`, so `v = 1.0` joins the last bin and out-of-range values
/// land in the end bins.
#[derive(Debug, Clone)]
pub struct Histogram {
    bins: Vec<u64>,
    total: u64,
}

impl Image {
    /// Builds an image from interleaved RGB components.
    ///
    /// `pixels.len()` must equal `width * height * 3` and every component
    /// must be finite and in `[0, 1]`.
    pub fn from_pixels(width: usize, height: usize, pixels: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "image dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if pixels.len() != width * height * 3 {
            return Err(Error::InvalidArgument(format!(
                "expected {} components for a {width}x{height} RGB image, got {}",
                width * height * 3,
                pixels.len()
            )));
        }
        if let Some(bad) = pixels.iter().find(|c| !c.is_finite() || **c < 0.0 || **c > 1.0) {
            return Err(Error::InvalidArgument(format!(
                "pixel component {bad} outside [0, 1]"
            )));
        }
        Ok(Image { width, height, data: pixels })
    }

    /// Builds an image by evaluating `f(row, col) -> [r, g, b]`.
    pub fn from_fn<F>(width: usize, height: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> [f64; 3],
    {
        let mut data = Vec::with_capacity(width * height * 3);
        for r in 0..height {
            for c in 0..width {
                data.extend_from_slice(&f(r, c));
            }
        }
        Image::from_pixels(width, height, data)
    }

    /// Internal constructor for stages whose output legitimately leaves
    /// `[0, 1]` (the synthetic exposure before fusion clamps).
    pub(crate) fn from_unclamped(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height * 3);
        Image { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixel(&self, row: usize, col: usize) -> [f64; 3] {
        let i = (row * self.width + col) * 3;
        [self.data[i], self.data[i + 1], self.data[i + 2]]
    }

    /// Interleaved RGB components, row-major.
    pub fn components(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn map_components<F: Fn(f64) -> f64>(&self, f: F) -> Image {
        Image {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&c| f(c)).collect(),
        }
    }
}

impl ScalarMap {
    pub fn from_values(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidArgument(format!(
                "map dimensions must be at least 1x1, got {width}x{height}"
            )));
        }
        if values.len() != width * height {
            return Err(Error::InvalidArgument(format!(
                "expected {} values for a {width}x{height} map, got {}",
                width * height,
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite value in scalar map".into()));
        }
        Ok(ScalarMap { width, height, data: values })
    }

    pub fn constant(width: usize, height: usize, value: f64) -> Result<Self> {
        ScalarMap::from_values(width, height, vec![value; width * height])
    }

    pub(crate) fn from_raw(width: usize, height: usize, data: Vec<f64>) -> Self {
        debug_assert_eq!(data.len(), width * height);
        ScalarMap { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.width + col]
    }

    /// Row-major values.
    pub fn values(&self) -> &[f64] {
        &self.data
    }

    pub(crate) fn map<F: Fn(f64) -> f64>(&self, f: F) -> ScalarMap {
        ScalarMap {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }
}

/// Decodes an 8-bit raster (PNG or JPEG at minimum) into linear `[0, 1]`
/// components via `s / 255`. Alpha is dropped; grayscale is replicated to
/// three channels.
pub fn load_image(path: impl AsRef<Path>) -> Result<Image> {
    let path = path.as_ref();
    let reader = image::ImageReader::open(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let decoded = reader.decode().map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    let rgb = decoded.to_rgb8();
    let (w, h) = (rgb.width() as usize, rgb.height() as usize);
    let data = rgb.as_raw().iter().map(|&s| s as f64 / 255.0).collect();
    Ok(Image { width: w, height: h, data })
}

/// Encodes as 8-bit RGB PNG; each component is written as
/// `round(clamp(c, 0, 1) * 255)`.
pub fn save_image(img: &Image, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let buf = encode_png(img).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })?;
    std::fs::write(path, buf).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// PNG bytes for `img`, using the same quantization as [`save_image`].
/// Deterministic: byte-identical input yields byte-identical output.
pub fn encode_png(img: &Image) -> std::result::Result<Vec<u8>, image::ImageError> {
    let quantized: Vec<u8> = img
        .data
        .iter()
        .map(|&c| (c.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let rgb = image::RgbImage::from_raw(img.width as u32, img.height as u32, quantized)
        .expect("buffer length matches dimensions");
    let mut buf = std::io::Cursor::new(Vec::new());
    rgb.write_to(&mut buf, image::ImageFormat::Png)?;
    Ok(buf.into_inner())
}

/// Writes a scalar map as an 8-bit grayscale PNG (values clamped to `[0, 1]`).
pub fn save_scalar_map(map: &ScalarMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let quantized: Vec<u8> = map
        .data
        .iter()
        .map(|&v| (v.clamp(0.0, 1.0) * 255.0).round() as u8)
        .collect();
    let gray = image::GrayImage::from_raw(map.width as u32, map.height as u32, quantized)
        .expect("buffer length matches dimensions");
    gray.save(path).map_err(|source| Error::Image {
        path: path.to_path_buf(),
        source,
    })
}

/// Per-pixel maximum over the three channels; the initial illumination
/// estimate.
pub fn lightness(img: &Image) -> ScalarMap {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| p[0].max(p[1]).max(p[2]))
        .collect();
    ScalarMap::from_raw(img.width, img.height, data)
}

/// Per-pixel geometric mean of the three channels, `cbrt(R * G * B)`.
/// Commutes with the exposure transform, which is why the sampler uses it.
pub fn geometric_brightness(img: &Image) -> ScalarMap {
    let data = img
        .data
        .chunks_exact(3)
        .map(|p| (p[0] * p[1] * p[2]).cbrt())
        .collect();
    ScalarMap::from_raw(img.width, img.height, data)
}

fn sample_index(out_i: usize, out_n: usize, src_n: usize) -> usize {
    // Center-aligned pick: rows/columns collected evenly, no interpolation.
    let idx = ((out_i as f64 + 0.5) * src_n as f64 / out_n as f64).floor() as usize;
    idx.min(src_n - 1)
}

fn resize_indices(out_w: usize, out_h: usize, src_w: usize, src_h: usize) -> Result<(Vec<usize>, Vec<usize>)> {
    if out_w == 0 || out_h == 0 {
        return Err(Error::InvalidArgument(
            "resize target must have nonzero dimensions".into(),
        ));
    }
    let rows = (0..out_h).map(|i| sample_index(i, out_h, src_h)).collect();
    let cols = (0..out_w).map(|j| sample_index(j, out_w, src_w)).collect();
    Ok((rows, cols))
}

impl Image {
    /// Nearest-neighbor resample via center-aligned source picks:
    /// `out(i, j) = src(floor((i + 0.5) * H / out_h), floor((j + 0.5) * W / out_w))`.
    pub fn resize_nearest(&self, out_w: usize, out_h: usize) -> Result<Image> {
        let (rows, cols) = resize_indices(out_w, out_h, self.width, self.height)?;
        let mut data = Vec::with_capacity(out_w * out_h * 3);
        for &r in &rows {
            for &c in &cols {
                let i = (r * self.width + c) * 3;
                data.extend_from_slice(&self.data[i..i + 3]);
            }
        }
        Ok(Image { width: out_w, height: out_h, data })
    }
}

impl ScalarMap {
    /// Same sampling rule as [`Image::resize_nearest`].
    pub fn resize_nearest(&self, out_w: usize, out_h: usize) -> Result<ScalarMap> {
        let (rows, cols) = resize_indices(out_w, out_h, self.width, self.height)?;
        let mut data = Vec::with_capacity(out_w * out_h);
        for &r in &rows {
            for &c in &cols {
                data.push(self.data[r * self.width + c]);
            }
        }
        Ok(ScalarMap { width: out_w, height: out_h, data })
    }
}

impl Histogram {
    /// Histogram over arbitrary values with the end-bin clamp rule.
    pub fn from_values(values: &[f64], n_bins: usize) -> Result<Histogram> {
        if n_bins < 2 {
            return Err(Error::InvalidArgument(format!(
                "histogram needs at least 2 bins, got {n_bins}"
            )));
        }
        let mut bins = vec![0u64; n_bins];
        for &v in values {
            let bin = (v * n_bins as f64).floor();
            let bin = if bin.is_nan() { 0.0 } else { bin };
            let idx = (bin.max(0.0) as usize).min(n_bins - 1);
            bins[idx] += 1;
        }
        Ok(Histogram { total: values.len() as u64, bins })
    }

    pub fn bins(&self) -> &[u64] {
        &self.bins
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Probabilities `bins_i / total`; sums to 1 when `total > 0`.
    pub fn probabilities(&self) -> impl Iterator<Item = f64> + '_ {
        let total = self.total as f64;
        self.bins.iter().map(move |&b| b as f64 / total)
    }
}

/// Bins the map's values; `total` equals the pixel count.
pub fn histogram(map: &ScalarMap, n_bins: usize) -> Result<Histogram> {
    Histogram::from_values(&map.data, n_bins)
}

/// Shannon entropy in bits, `-sum p_i log2 p_i` with the `0 log 0 = 0`
/// convention.
pub fn entropy(h: &Histogram) -> Result<f64> {
    if h.total == 0 {
        return Err(Error::InvalidArgument(
            "entropy of an empty histogram is undefined".into(),
        ));
    }
    let total = h.total as f64;
    let sum: f64 = h
        .bins
        .iter()
        .filter(|&&b| b > 0)
        .map(|&b| {
            let p = b as f64 / total;
            p * p.log2()
        })
        .sum();
    Ok(-sum)
}
