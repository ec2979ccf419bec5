//! Weighted fusion of the input with its synthetic exposure.
//!
//! Well-lit pixels keep the input (their fusion weight `T^mu` is close to
//! 1); under-exposed pixels take most of their value from the brighter
//! synthetic exposure. The dual blend is a two-image instance of the
//! general normalized weighted sum, and is routed through that same code
//! path.

use std::time::{Duration, Instant};

use crate::camera::{apply_btf, CameraModel};
use crate::error::{Error, Result};
use crate::exposure::{optimal_k, KSearchConfig};
use crate::raster::{Image, ScalarMap};
use crate::solver::{estimate_illumination, SolverConfig};

/// Full pipeline configuration; the defaults are the fixed parameterization
/// the algorithm is evaluated with (`lambda = 1`, `epsilon = 0.001`,
/// `mu = 0.5`, window 5, camera `(-0.3293, 1.1258)`).
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct EnhanceConfig {
    /// Enhancement exponent of the weight map `W = T^mu`. 0 disables
    /// enhancement, values above 1 trade detail for brightness.
    pub mu: Mu,
    pub solver: SolverConfig,
    pub camera: CameraModel,
    pub ksearch: KSearchConfig,
}

/// Newtype keeping the `mu >= 0` invariant checkable while letting
/// `EnhanceConfig` derive `Default`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Mu(pub f64);

impl Default for Mu {
    fn default() -> Self {
        Mu(0.5)
    }
}

impl EnhanceConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.mu.0 >= 0.0) || !self.mu.0.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mu must be nonnegative, got {}",
                self.mu.0
            )));
        }
        self.solver.validate()?;
        self.ksearch.validate()
    }
}

/// Wall-clock cost of each pipeline stage.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimings {
    pub illumination: Duration,
    pub exposure_search: Duration,
    pub synthesis: Duration,
    pub fusion: Duration,
}

/// Enhanced image plus every intermediate the pipeline produced.
#[derive(Debug, Clone)]
pub struct EnhanceOutput {
    pub result: Image,
    pub illumination: ScalarMap,
    pub weight: ScalarMap,
    pub k_hat: f64,
    pub timings: StageTimings,
}

/// Fusion weight `W = T^mu`, favoring the input where illumination is high.
pub fn weight_map(t: &ScalarMap, mu: f64) -> ScalarMap {
    t.map(|v| v.powf(mu))
}

/// Normalized weighted sum of `n` exposures, clamped to `[0, 1]`.
///
/// Weights are normalized pixel-wise so the effective weights sum to
/// exactly one; pixels where every weight vanishes blend uniformly.
pub fn fuse_weighted(images: &[&Image], weights: &[&ScalarMap]) -> Result<Image> {
    if images.is_empty() || images.len() != weights.len() {
        return Err(Error::InvalidArgument(format!(
            "need matching nonempty image/weight lists, got {} and {}",
            images.len(),
            weights.len()
        )));
    }
    let (w, h) = (images[0].width(), images[0].height());
    for img in images {
        if img.width() != w || img.height() != h {
            return Err(Error::dims((w, h), (img.width(), img.height())));
        }
    }
    for map in weights {
        if map.width() != w || map.height() != h {
            return Err(Error::dims((w, h), (map.width(), map.height())));
        }
    }

    let n = images.len();
    let mut data = vec![0.0f64; w * h * 3];
    let mut normalized = vec![0.0f64; n];
    for px in 0..w * h {
        let sum: f64 = weights.iter().map(|m| m.values()[px]).sum();
        if sum > 0.0 {
            let mut acc = 0.0;
            for i in 0..n - 1 {
                normalized[i] = weights[i].values()[px] / sum;
                acc += normalized[i];
            }
            normalized[n - 1] = 1.0 - acc;
        } else {
            normalized.fill(1.0 / n as f64);
        }
        for ch in 0..3 {
            let mut v = 0.0;
            for (i, img) in images.iter().enumerate() {
                v += normalized[i] * img.components()[px * 3 + ch];
            }
            data[px * 3 + ch] = v.clamp(0.0, 1.0);
        }
    }
    Ok(Image::from_unclamped(w, h, data))
}

/// Dual-exposure blend `R = W ∘ P + (1 - W) ∘ synthetic`, clamped to
/// `[0, 1]`. Routed through [`fuse_weighted`] with the complementary
/// weight pair.
pub fn fuse(p: &Image, synthetic: &Image, w: &ScalarMap) -> Result<Image> {
    let complement = w.map(|v| 1.0 - v);
    fuse_weighted(&[p, synthetic], &[w, &complement])
}

/// Runs the full enhancement pipeline with the searched exposure ratio.
pub fn enhance(p: &Image, cfg: &EnhanceConfig) -> Result<EnhanceOutput> {
    run(p, cfg, None)
}

/// Runs the pipeline with a caller-fixed exposure ratio, skipping the
/// entropy search.
pub fn enhance_with_ratio(p: &Image, cfg: &EnhanceConfig, k: f64) -> Result<EnhanceOutput> {
    run(p, cfg, Some(k))
}

fn run(p: &Image, cfg: &EnhanceConfig, fixed_k: Option<f64>) -> Result<EnhanceOutput> {
    cfg.validate()?;
    let start = Instant::now();
    let illumination = estimate_illumination(p, &cfg.solver)?;
    let t_illum = start.elapsed();

    let weight = weight_map(&illumination, cfg.mu.0);

    let start = Instant::now();
    let k_hat = match fixed_k {
        Some(k) => {
            if !(k > 0.0) {
                return Err(Error::InvalidArgument(format!(
                    "exposure ratio must be positive, got {k}"
                )));
            }
            k
        }
        None => optimal_k(p, &illumination, &cfg.camera, &cfg.ksearch)?,
    };
    let t_search = start.elapsed();

    let start = Instant::now();
    let synthetic = apply_btf(p, &cfg.camera, k_hat)?;
    let t_synth = start.elapsed();

    let start = Instant::now();
    let result = fuse(p, &synthetic, &weight)?;
    let t_fuse = start.elapsed();

    Ok(EnhanceOutput {
        result,
        illumination,
        weight,
        k_hat,
        timings: StageTimings {
            illumination: t_illum,
            exposure_search: t_search,
            synthesis: t_synth,
            fusion: t_fuse,
        },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::camera::btf_params;

    #[test]
    fn weight_map_exponents() {
        let t = ScalarMap::from_values(2, 1, vec![0.25, 1.0]).unwrap();
        let w0 = weight_map(&t, 0.0);
        assert_eq!(w0.values(), &[1.0, 1.0]);
        let w1 = weight_map(&t, 1.0);
        assert_eq!(w1.values(), t.values());
        let w_half = weight_map(&t, 0.5);
        assert_eq!(w_half.values(), &[0.5, 1.0]);
    }

    #[test]
    fn fuse_degenerate_weights() {
        let p = Image::from_fn(3, 2, |r, c| [(r as f64 + 1.0) / 3.0, 0.2, c as f64 / 3.0]).unwrap();
        let synthetic = p.map_components(|v| (v * 1.5).min(1.2));

        let ones = ScalarMap::constant(3, 2, 1.0).unwrap();
        assert_eq!(fuse(&p, &synthetic, &ones).unwrap().components(), p.components());

        let zeros = ScalarMap::constant(3, 2, 0.0).unwrap();
        let clamped: Vec<f64> = synthetic.components().iter().map(|v| v.clamp(0.0, 1.0)).collect();
        assert_eq!(fuse(&p, &synthetic, &zeros).unwrap().components(), &clamped[..]);
    }

    #[test]
    fn fuse_midpoint_blend() {
        let p = Image::from_pixels(1, 1, vec![0.2; 3]).unwrap();
        let s = Image::from_pixels(1, 1, vec![0.6; 3]).unwrap();
        let w = ScalarMap::constant(1, 1, 0.5).unwrap();
        let r = fuse(&p, &s, &w).unwrap();
        for &c in r.components() {
            assert!((c - 0.4).abs() < 1e-12);
        }
    }

    #[test]
    fn fuse_rejects_mismatched_dims() {
        let p = Image::from_fn(2, 2, |_, _| [0.5; 3]).unwrap();
        let s = Image::from_fn(3, 2, |_, _| [0.5; 3]).unwrap();
        let w = ScalarMap::constant(2, 2, 0.5).unwrap();
        assert!(matches!(fuse(&p, &s, &w), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn n_way_fusion_reduces_to_dual_blend() {
        let p = Image::from_fn(4, 3, |r, c| {
            [(r as f64) / 3.0, (c as f64) / 4.0, ((r + c) % 2) as f64]
        })
        .unwrap();
        let s = p.map_components(|v| 1.0 - 0.5 * v);
        let w = ScalarMap::from_values(4, 3, (0..12).map(|i| i as f64 / 11.0).collect()).unwrap();
        let dual = fuse(&p, &s, &w).unwrap();
        let complement = w.map(|v| 1.0 - v);
        let general = fuse_weighted(&[&p, &s], &[&w, &complement]).unwrap();
        assert_eq!(dual.components(), general.components());

        // three equal images with arbitrary weights reproduce the image
        let thirds = fuse_weighted(&[&p, &p, &p], &[&w, &complement, &w]).unwrap();
        for (a, b) in thirds.components().iter().zip(p.components()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn all_zero_weights_blend_uniformly() {
        let a = Image::from_pixels(1, 1, vec![0.2; 3]).unwrap();
        let b = Image::from_pixels(1, 1, vec![0.8; 3]).unwrap();
        let z = ScalarMap::constant(1, 1, 0.0).unwrap();
        let r = fuse_weighted(&[&a, &b], &[&z, &z]).unwrap();
        for &c in r.components() {
            assert!((c - 0.5).abs() < 1e-12);
        }
    }

    #[test]
    fn enhance_white_image_is_identity() {
        let white = Image::from_fn(12, 10, |_, _| [1.0; 3]).unwrap();
        let out = enhance(&white, &EnhanceConfig::default()).unwrap();
        assert_eq!(out.result.components(), white.components());
        assert_eq!(out.k_hat, 1.0);
        assert!(out.illumination.values().iter().all(|&v| v == 1.0));
        assert!(out.weight.values().iter().all(|&v| v == 1.0));
    }

    #[test]
    fn mu_zero_keeps_the_input() {
        let img = Image::from_fn(10, 10, |r, c| [((r * 10 + c) as f64 / 99.0) * 0.4, 0.1, 0.2])
            .unwrap();
        let cfg = EnhanceConfig { mu: Mu(0.0), ..EnhanceConfig::default() };
        let out = enhance(&img, &cfg).unwrap();
        assert_eq!(out.result.components(), img.components());
    }

    #[test]
    fn convexity_pre_clamp_bounds_the_blend() {
        let img = Image::from_fn(9, 9, |r, c| {
            let t = ((r * 9 + c) as f64 / 80.0) * 0.6 + 0.05;
            [t, t * 0.8, t * 0.5]
        })
        .unwrap();
        let cfg = EnhanceConfig::default();
        let out = enhance(&img, &cfg).unwrap();
        let p = btf_params(&cfg.camera, out.k_hat).unwrap();
        for (i, &r) in out.result.components().iter().enumerate() {
            let orig = img.components()[i];
            let synth = p.apply(orig);
            let lo = orig.min(synth).min(1.0);
            let hi = orig.max(synth).min(1.0);
            assert!(r >= lo - 1e-12 && r <= hi + 1e-12, "{r} outside [{lo}, {hi}]");
        }
    }

    #[test]
    fn brightening_never_darkens_interior_pixels() {
        let img = Image::from_fn(11, 7, |r, c| {
            let t = 0.02 + 0.5 * ((r * 11 + c) as f64 / 76.0);
            [t, t, t]
        })
        .unwrap();
        let out = enhance(&img, &EnhanceConfig::default()).unwrap();
        assert!(out.k_hat >= 1.0);
        for (r, p) in out.result.components().iter().zip(img.components()) {
            assert!(r + 1e-12 >= *p);
        }
    }

    #[test]
    fn fixed_ratio_skips_the_search() {
        let img = Image::from_fn(8, 8, |r, _| [0.1 + 0.05 * r as f64, 0.1, 0.1]).unwrap();
        let cfg = EnhanceConfig::default();
        let out = enhance_with_ratio(&img, &cfg, 3.0).unwrap();
        assert_eq!(out.k_hat, 3.0);
        assert!(enhance_with_ratio(&img, &cfg, 0.0).is_err());
        // unit ratio keeps the input
        let unit = enhance_with_ratio(&img, &cfg, 1.0).unwrap();
        for (a, b) in unit.result.components().iter().zip(img.components()) {
            assert!((a - b).abs() < 1e-12);
        }
    }

    #[test]
    fn invalid_config_is_rejected() {
        let img = Image::from_pixels(1, 1, vec![0.5; 3]).unwrap();
        let cfg = EnhanceConfig { mu: Mu(-0.5), ..EnhanceConfig::default() };
        assert!(enhance(&img, &cfg).is_err());
    }
}
