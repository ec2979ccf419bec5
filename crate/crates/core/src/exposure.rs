//! Optimal exposure-ratio search.
//!
//! The synthetic exposure should reveal the regions the input under-exposes,
//! so the search scores a candidate ratio `k` by the entropy of the
//! brightness of under-exposed pixels after the transform `g(B, k)`. The
//! entropy rises while new detail is revealed and falls once saturation
//! collapses the histogram; a coarse log-spaced scan brackets the peak and
//! golden-section refinement narrows it.

use crate::camera::{btf_params, CameraModel};
use crate::error::{Error, Result};
use crate::raster::{entropy, geometric_brightness, Histogram, Image, ScalarMap};

const ENTROPY_BINS: usize = 256;
/// Inverse golden ratio, the bracket shrink factor per refinement step.
const INV_PHI: f64 = 0.618_033_988_749_894_8;

/// Search-space parameters for the exposure-ratio optimization.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KSearchConfig {
    /// Illumination below this marks a pixel as under-exposed.
    pub under_exposed_threshold: f64,
    /// Edge length of the thumbnail the objective is evaluated on.
    pub thumb_size: usize,
    /// Lower search bound (inclusive).
    pub k_min: f64,
    /// Upper search bound (inclusive).
    pub k_max: f64,
    /// Grid size of the bracketing scan, log-spaced over `[k_min, k_max]`.
    pub coarse_steps: usize,
    /// Bracket width tolerance in log-k for the refinement.
    pub refine_tol: f64,
}

impl Default for KSearchConfig {
    fn default() -> Self {
        KSearchConfig {
            under_exposed_threshold: 0.5,
            thumb_size: 50,
            k_min: 1.0,
            k_max: 100.0,
            coarse_steps: 50,
            refine_tol: 1e-3,
        }
    }
}

impl KSearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.k_min > 0.0) || !(self.k_max > self.k_min) {
            return Err(Error::InvalidArgument(format!(
                "need 0 < k_min < k_max, got [{}, {}]",
                self.k_min, self.k_max
            )));
        }
        if self.coarse_steps < 3 {
            return Err(Error::InvalidArgument(format!(
                "coarse_steps must be at least 3, got {}",
                self.coarse_steps
            )));
        }
        if self.thumb_size == 0 {
            return Err(Error::InvalidArgument("thumb_size must be nonzero".into()));
        }
        if !(self.refine_tol > 0.0) {
            return Err(Error::InvalidArgument("refine_tol must be positive".into()));
        }
        Ok(())
    }
}

/// Brightness samples of the under-exposed thumbnail pixels. May be empty
/// when the whole image is well exposed.
#[derive(Debug, Clone)]
pub struct UnderExposedSet {
    values: Vec<f64>,
}

impl UnderExposedSet {
    pub fn from_values(values: Vec<f64>) -> UnderExposedSet {
        UnderExposedSet { values }
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

/// Downsamples image and illumination to the thumbnail size and returns the
/// geometric-mean brightness of the pixels whose illumination falls below
/// the threshold.
pub fn extract_under_exposed(
    img: &Image,
    t: &ScalarMap,
    cfg: &KSearchConfig,
) -> Result<UnderExposedSet> {
    cfg.validate()?;
    if img.width() != t.width() || img.height() != t.height() {
        return Err(Error::dims((img.width(), img.height()), (t.width(), t.height())));
    }
    let thumb = img.resize_nearest(cfg.thumb_size, cfg.thumb_size)?;
    let t_thumb = t.resize_nearest(cfg.thumb_size, cfg.thumb_size)?;
    let brightness = geometric_brightness(&thumb);
    let values = brightness
        .values()
        .iter()
        .zip(t_thumb.values())
        .filter(|(_, &t)| t < cfg.under_exposed_threshold)
        .map(|(&b, _)| b)
        .collect();
    Ok(UnderExposedSet { values })
}

/// Entropy (bits) of the under-exposed brightness after the exposure
/// transform at ratio `k`, clamped to `[0, 1]` and binned at 256 bins.
pub fn entropy_of_enhanced(q: &UnderExposedSet, model: &CameraModel, k: f64) -> Result<f64> {
    if q.is_empty() {
        return Err(Error::InvalidArgument(
            "cannot score an empty under-exposed set".into(),
        ));
    }
    let p = btf_params(model, k)?;
    let enhanced: Vec<f64> = q.values.iter().map(|&v| p.apply(v).clamp(0.0, 1.0)).collect();
    entropy(&Histogram::from_values(&enhanced, ENTROPY_BINS)?)
}

/// Finds the exposure ratio maximizing [`entropy_of_enhanced`].
///
/// A log-spaced scan over `[k_min, k_max]` locates the best grid point;
/// golden-section refinement inside the bracketing neighbors narrows the
/// peak until the log-bracket is tighter than `refine_tol`. The best ratio
/// evaluated anywhere is returned, so the result never scores below the
/// coarse scan. An empty under-exposed set short-circuits to `k = 1`: with
/// nothing to reveal, the fused result should be the input.
pub fn optimal_k(
    img: &Image,
    t: &ScalarMap,
    model: &CameraModel,
    cfg: &KSearchConfig,
) -> Result<f64> {
    let q = extract_under_exposed(img, t, cfg)?;
    if q.is_empty() {
        return Ok(1.0);
    }

    let ln_min = cfg.k_min.ln();
    let ln_max = cfg.k_max.ln();
    let steps = cfg.coarse_steps;
    let ln_step = (ln_max - ln_min) / (steps - 1) as f64;

    let mut best_k = cfg.k_min;
    let mut best_h = f64::NEG_INFINITY;
    let mut best_i = 0;
    for i in 0..steps {
        let k = (ln_min + i as f64 * ln_step).exp();
        let h = entropy_of_enhanced(&q, model, k)?;
        if h > best_h {
            best_h = h;
            best_k = k;
            best_i = i;
        }
    }

    // golden-section refinement inside the bracketing neighbors
    let mut lo = ln_min + best_i.saturating_sub(1) as f64 * ln_step;
    let mut hi = ln_min + ((best_i + 1).min(steps - 1)) as f64 * ln_step;
    let mut a = hi - INV_PHI * (hi - lo);
    let mut b = lo + INV_PHI * (hi - lo);
    let mut h_a = entropy_of_enhanced(&q, model, a.exp())?;
    let mut h_b = entropy_of_enhanced(&q, model, b.exp())?;
    while hi - lo > cfg.refine_tol {
        if h_a > best_h {
            best_h = h_a;
            best_k = a.exp();
        }
        if h_b > best_h {
            best_h = h_b;
            best_k = b.exp();
        }
        if h_a >= h_b {
            hi = b;
            b = a;
            h_b = h_a;
            a = hi - INV_PHI * (hi - lo);
            h_a = entropy_of_enhanced(&q, model, a.exp())?;
        } else {
            lo = a;
            a = b;
            h_a = h_b;
            b = lo + INV_PHI * (hi - lo);
            h_b = entropy_of_enhanced(&q, model, b.exp())?;
        }
    }
    if h_a > best_h {
        best_h = h_a;
        best_k = a.exp();
    }
    if h_b > best_h {
        best_k = b.exp();
    }
    Ok(best_k)
}
