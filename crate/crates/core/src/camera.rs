//! The camera response model: a two-parameter brightness transform
//! `g(v, k) = beta * v^gamma` between exposures, and the response function
//! it derives from, `f(E) = exp(b * (1 - E^a))`.
//!
//! The same `(beta, gamma)` pair applies to all three color channels;
//! response curves of general cameras are close to identical per channel.

use crate::error::{Error, Result};
use crate::raster::{Image, ScalarMap};

/// Camera parameters `(a, b)` of the nonlinear response family.
///
/// The defaults fit most consumer cameras and are used whenever no camera
/// information is available.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraModel {
    pub a: f64,
    pub b: f64,
}

impl Default for CameraModel {
    fn default() -> Self {
        CameraModel { a: -0.3293, b: 1.1258 }
    }
}

impl CameraModel {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if a == 0.0 || !a.is_finite() || !b.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "camera parameters must be finite with a != 0, got a={a}, b={b}"
            )));
        }
        Ok(CameraModel { a, b })
    }
}

/// Gain and exponent of the brightness transform at one exposure ratio.
///
/// `gamma = k^a`, `beta = exp(b * (1 - k^a))`; `k = 1` yields the identity
/// pair `(1, 1)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BtfParams {
    pub beta: f64,
    pub gamma: f64,
    pub k: f64,
}

impl BtfParams {
    /// Pointwise transform `beta * v^gamma` (with `0^gamma = 0`).
    #[inline]
    pub fn apply(&self, v: f64) -> f64 {
        self.beta * v.powf(self.gamma)
    }
}

/// Derives `(beta, gamma)` for exposure ratio `k`.
pub fn btf_params(model: &CameraModel, k: f64) -> Result<BtfParams> {
    if !(k > 0.0) || !k.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "exposure ratio must be positive, got {k}"
        )));
    }
    let gamma = k.powf(model.a);
    let beta = (model.b * (1.0 - gamma)).exp();
    Ok(BtfParams { beta, gamma, k })
}

/// Maps every component through the brightness transform at ratio `k`.
///
/// Output is intentionally not clamped: for `k > 1` the gain exceeds 1 and
/// bright pixels overshoot `[0, 1]`; fusion clamps at the very end.
pub fn apply_btf(img: &Image, model: &CameraModel, k: f64) -> Result<Image> {
    let p = btf_params(model, k)?;
    Ok(img.map_components(|v| p.apply(v)))
}

/// [`apply_btf`] for scalar maps (the sampler transforms brightness only).
pub fn apply_btf_map(map: &ScalarMap, model: &CameraModel, k: f64) -> Result<ScalarMap> {
    let p = btf_params(model, k)?;
    Ok(map.map(|v| p.apply(v)))
}

/// Camera response function at normalized irradiance `E`.
///
/// Without `c` this evaluates the nonlinear family `exp(b * (1 - E^a))`.
/// Passing `c` selects the power-law family `E^c` instead (the case of a
/// purely linear brightness transform, kept for completeness; the pipeline
/// never uses it).
pub fn crf(model: &CameraModel, e: f64, c: Option<f64>) -> Result<f64> {
    if !(e > 0.0) || !e.is_finite() {
        return Err(Error::InvalidArgument(format!(
            "irradiance must be positive, got {e}"
        )));
    }
    Ok(match c {
        Some(c) => e.powf(c),
        None => (model.b * (1.0 - e.powf(model.a))).exp(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::geometric_brightness;

    #[test]
    fn identity_exposure_gives_unit_params() {
        let p = btf_params(&CameraModel::default(), 1.0).unwrap();
        assert_eq!(p.beta, 1.0);
        assert_eq!(p.gamma, 1.0);
    }

    #[test]
    fn derived_params_match_closed_form() {
        let m = CameraModel::default();
        let p = btf_params(&m, 5.0).unwrap();
        assert!((p.gamma - 0.588612).abs() < 1e-6, "gamma {}", p.gamma);
        assert!((p.beta - 1.589057).abs() < 1e-6, "beta {}", p.beta);

        let p = btf_params(&m, 0.2).unwrap();
        assert!((p.gamma - 1.698912).abs() < 1e-6);
    }

    #[test]
    fn apply_examples() {
        let m = CameraModel::default();
        let img = Image::from_pixels(1, 1, vec![0.25, 0.0, 1.0]).unwrap();

        let same = apply_btf(&img, &m, 1.0).unwrap();
        assert_eq!(img.components(), same.components());

        let bright = apply_btf(&img, &m, 5.0).unwrap();
        assert!((bright.components()[0] - 0.7026832132112865).abs() < 1e-9);
        assert_eq!(bright.components()[1], 0.0);
        // v = 1 maps to beta, above 1 by design for k > 1
        assert!(bright.components()[2] > 1.0);
    }

    #[test]
    fn rejects_nonpositive_ratio_and_irradiance() {
        let m = CameraModel::default();
        assert!(btf_params(&m, 0.0).is_err());
        assert!(btf_params(&m, -2.0).is_err());
        let img = Image::from_pixels(1, 1, vec![0.5; 3]).unwrap();
        assert!(apply_btf(&img, &m, 0.0).is_err());
        assert!(crf(&m, 0.0, None).is_err());
        assert!(crf(&m, -1.0, None).is_err());
    }

    #[test]
    fn crf_boundary_conditions() {
        let m = CameraModel::default();
        assert_eq!(crf(&m, 1.0, None).unwrap(), 1.0);
        assert_eq!(crf(&m, 1.0, Some(0.7)).unwrap(), 1.0);
        // f(k) = beta(k)
        for i in 0..200 {
            let k = 0.05 * (i as f64 + 1.0);
            let f = crf(&m, k, None).unwrap();
            let beta = btf_params(&m, k).unwrap().beta;
            assert!((f - beta).abs() <= 1e-12, "k={k}: {f} vs {beta}");
        }
        let e2 = crf(&m, 2.0, None).unwrap();
        assert!((e2 - 1.2582858598533861).abs() < 1e-12);
    }

    #[test]
    fn geometric_mean_commutes_with_transform() {
        let m = CameraModel::default();
        let img = Image::from_fn(5, 4, |r, c| {
            let t = (r * 5 + c) as f64 / 19.0;
            [0.05 + 0.9 * t, 0.95 - 0.9 * t, (0.3 + 0.6 * t).min(1.0)]
        })
        .unwrap();
        for k in [0.4, 1.0, 3.0, 9.0] {
            let lhs = geometric_brightness(&apply_btf(&img, &m, k).unwrap());
            let rhs = apply_btf_map(&geometric_brightness(&img), &m, k).unwrap();
            for (a, b) in lhs.values().iter().zip(rhs.values()) {
                assert!((a - b).abs() < 1e-9);
            }
        }
    }

    mod properties {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn composition_matches_product_ratio(
                v in 0.0f64..=1.0,
                k1 in 0.1f64..=20.0,
                k2 in 0.1f64..=20.0,
            ) {
                let m = CameraModel::default();
                let once = btf_params(&m, k1 * k2).unwrap().apply(v);
                let twice = btf_params(&m, k2).unwrap().apply(btf_params(&m, k1).unwrap().apply(v));
                prop_assert!((once - twice).abs() <= 1e-9);
            }

            #[test]
            fn comparametric_equation_holds(k in 0.1f64..=10.0, e in 0.1f64..=10.0) {
                let m = CameraModel::default();
                let p = btf_params(&m, k).unwrap();
                let lhs = crf(&m, k * e, None).unwrap();
                let rhs = p.beta * crf(&m, e, None).unwrap().powf(p.gamma);
                prop_assert!((lhs - rhs).abs() <= 1e-9);
            }

            #[test]
            fn monotone_in_value_and_ratio(v in 0.01f64..=0.99, k in 1.0f64..=50.0) {
                let m = CameraModel::default();
                let p = btf_params(&m, k).unwrap();
                prop_assert!(p.apply(v + 0.005) > p.apply(v));
                // brighter exposure raises interior values (a < 0, b > 0)
                let brighter = btf_params(&m, k * 1.1).unwrap();
                prop_assert!(brighter.apply(v) > p.apply(v));
            }
        }
    }
}
