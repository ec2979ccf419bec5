//! Dual-exposure fusion for low-light image enhancement.
//!
//! The pipeline estimates a scene illumination map, derives a fusion weight
//! from it, searches for the exposure ratio that maximizes the information
//! revealed in under-exposed regions, synthesizes that exposure with a
//! parametric camera response model, and blends it with the input:
//!
//! ```text
//! R = W ∘ P + (1 - W) ∘ g(P, k)
//! ```
//!
//! with `W = T^mu`. [`enhance`] runs the whole chain; the individual stages
//! are exported for direct use. [`loe`] measures lightness-order distortion
//! between an original and an enhanced image.

mod camera;
mod error;
mod exposure;
mod fusion;
mod metrics;
mod multigrid;
mod raster;
mod solver;

pub use camera::{apply_btf, apply_btf_map, btf_params, crf, BtfParams, CameraModel};
pub use error::{Error, Result};
pub use exposure::{
    entropy_of_enhanced, extract_under_exposed, optimal_k, KSearchConfig, UnderExposedSet,
};
pub use fusion::{
    enhance, enhance_with_ratio, fuse, fuse_weighted, weight_map, EnhanceConfig, EnhanceOutput,
    StageTimings,
};
pub use metrics::{loe, LoeConfig};
pub use raster::{
    encode_png, entropy, geometric_brightness, histogram, lightness, load_image, save_image,
    save_scalar_map, Histogram, Image, ScalarMap,
};
pub use solver::{
    assemble_system, estimate_illumination, gradient, solve, texture_weights, Direction,
    SolverConfig, SparseSystem,
};
