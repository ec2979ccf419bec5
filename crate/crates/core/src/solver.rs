//! Refined illumination estimation.
//!
//! The initial estimate is the per-pixel lightness `L`. It is refined into
//! a structure-preserving, texture-flattened map `T` by minimizing a
//! quadratic relaxation of an edge-aware total-variation objective, which
//! reduces to one symmetric positive-definite linear solve
//!
//! ```text
//! (I + lambda * sum_d D_d' Diag(m_d / (|grad_d l| + eps)) D_d) t = l
//! ```
//!
//! with `D_d` the forward-difference operators. The system is a five-point
//! identity-plus-Laplacian stencil solved with conjugate gradients under a
//! multigrid preconditioner (see [`crate::multigrid`]).

use crate::error::{Error, Result};
use crate::multigrid::MultigridPreconditioner;
use crate::raster::{lightness, Image, ScalarMap};

/// Gradient orientation for the forward-difference operators.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Horizontal,
    Vertical,
}

/// Parameters of the illumination solve.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverConfig {
    /// Smoothing strength of the structure term.
    pub lambda: f64,
    /// Small positive constant guarding denominators; also the floor of the
    /// returned illumination.
    pub epsilon: f64,
    /// Odd length of the directional window used by the texture weights.
    pub window: usize,
    /// Relative residual target of the conjugate-gradient solve.
    pub pcg_tol: f64,
    /// Iteration cap of the conjugate-gradient solve.
    pub pcg_max_iter: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            lambda: 1.0,
            epsilon: 1e-3,
            window: 5,
            pcg_tol: 1e-5,
            pcg_max_iter: 1000,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lambda >= 0.0) || !self.lambda.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "lambda must be nonnegative, got {}",
                self.lambda
            )));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.window == 0 || self.window % 2 == 0 {
            return Err(Error::InvalidArgument(format!(
                "window must be odd and at least 1, got {}",
                self.window
            )));
        }
        if !(self.pcg_tol > 0.0) || self.pcg_max_iter == 0 {
            return Err(Error::InvalidArgument(
                "pcg_tol must be positive and pcg_max_iter nonzero".into(),
            ));
        }
        Ok(())
    }
}

/// The assembled linear system `A t = l` in compressed sparse rows.
///
/// `A` is symmetric positive definite with unit-or-larger diagonal,
/// nonpositive off-diagonals and at most five nonzeros per row (self plus
/// the four grid neighbors).
#[derive(Debug, Clone)]
pub struct SparseSystem {
    width: usize,
    height: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
    rhs: Vec<f64>,
}

impl SparseSystem {
    /// Number of unknowns (pixels).
    pub fn dimension(&self) -> usize {
        self.rhs.len()
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn rhs(&self) -> &[f64] {
        &self.rhs
    }

    /// Nonzero entries `(column, value)` of one matrix row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let lo = self.row_ptr[r];
        let hi = self.row_ptr[r + 1];
        self.col_idx[lo..hi]
            .iter()
            .copied()
            .zip(self.values[lo..hi].iter().copied())
    }

    /// `y = A x`.
    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.dimension());
        debug_assert_eq!(y.len(), self.dimension());
        for r in 0..self.dimension() {
            let lo = self.row_ptr[r];
            let hi = self.row_ptr[r + 1];
            let mut acc = 0.0;
            for e in lo..hi {
                acc += self.values[e] * x[self.col_idx[e]];
            }
            y[r] = acc;
        }
    }

    pub(crate) fn diagonal(&self) -> Vec<f64> {
        (0..self.dimension())
            .map(|r| {
                self.row(r)
                    .find(|(c, _)| *c == r)
                    .map(|(_, v)| v)
                    .unwrap_or(0.0)
            })
            .collect()
    }
}

/// Forward difference `next - current` along `direction`; the trailing
/// border gradient is zero (replicate padding).
pub fn gradient(map: &ScalarMap, direction: Direction) -> ScalarMap {
    let (w, h) = (map.width(), map.height());
    let src = map.values();
    let mut out = vec![0.0; w * h];
    match direction {
        Direction::Horizontal => {
            for r in 0..h {
                for c in 0..w - 1 {
                    out[r * w + c] = src[r * w + c + 1] - src[r * w + c];
                }
            }
        }
        Direction::Vertical => {
            for r in 0..h.saturating_sub(1) {
                for c in 0..w {
                    out[r * w + c] = src[(r + 1) * w + c] - src[r * w + c];
                }
            }
        }
    }
    ScalarMap::from_raw(w, h, out)
}

/// Texture weights `M_d(x) = 1 / (|sum of grad_d L over the window at x| + eps)`.
///
/// The window is one-dimensional, oriented along the gradient direction
/// (horizontal for `M_h`, vertical for `M_v`), centered at `x` and truncated
/// at image borders. A consistent edge keeps the windowed sum large and the
/// weight small; oscillating texture gradients cancel and the weight grows,
/// forcing smoothing across texture.
pub fn texture_weights(l: &ScalarMap, cfg: &SolverConfig) -> Result<(ScalarMap, ScalarMap)> {
    cfg.validate()?;
    let (w, h) = (l.width(), l.height());
    let half = cfg.window / 2;
    let eps = cfg.epsilon;

    let gh = gradient(l, Direction::Horizontal);
    let gv = gradient(l, Direction::Vertical);

    let mut mh = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let lo = c.saturating_sub(half);
            let hi = (c + half).min(w - 1);
            let mut sum = 0.0;
            for cc in lo..=hi {
                sum += gh.values()[r * w + cc];
            }
            mh[r * w + c] = 1.0 / (sum.abs() + eps);
        }
    }

    let mut mv = vec![0.0; w * h];
    for c in 0..w {
        for r in 0..h {
            let lo = r.saturating_sub(half);
            let hi = (r + half).min(h - 1);
            let mut sum = 0.0;
            for rr in lo..=hi {
                sum += gv.values()[rr * w + c];
            }
            mv[r * w + c] = 1.0 / (sum.abs() + eps);
        }
    }

    Ok((ScalarMap::from_raw(w, h, mh), ScalarMap::from_raw(w, h, mv)))
}

/// Assembles `A = I + lambda * sum_d D_d' Diag(w_d) D_d` and `rhs = l`,
/// where the edge coefficient at pixel `x` is
/// `w_d(x) = lambda * M_d(x) / (|grad_d L(x)| + eps)`.
pub fn assemble_system(
    l: &ScalarMap,
    m_h: &ScalarMap,
    m_v: &ScalarMap,
    cfg: &SolverConfig,
) -> Result<SparseSystem> {
    cfg.validate()?;
    let (w, h) = (l.width(), l.height());
    for m in [m_h, m_v] {
        if m.width() != w || m.height() != h {
            return Err(Error::dims((w, h), (m.width(), m.height())));
        }
    }
    let eps = cfg.epsilon;
    let gh = gradient(l, Direction::Horizontal);
    let gv = gradient(l, Direction::Vertical);

    // Edge weights: wh[x] couples x with its right neighbor, wv[x] with the
    // pixel below. Trailing rows/columns carry no edge.
    let mut wh = vec![0.0; w * h];
    let mut wv = vec![0.0; w * h];
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            if c + 1 < w {
                wh[i] = cfg.lambda * m_h.values()[i] / (gh.values()[i].abs() + eps);
            }
            if r + 1 < h {
                wv[i] = cfg.lambda * m_v.values()[i] / (gv.values()[i].abs() + eps);
            }
        }
    }

    let n = w * h;
    let mut row_ptr = Vec::with_capacity(n + 1);
    let mut col_idx = Vec::with_capacity(n * 5);
    let mut values = Vec::with_capacity(n * 5);
    row_ptr.push(0);
    for r in 0..h {
        for c in 0..w {
            let i = r * w + c;
            let mut diag = 1.0;
            // columns in ascending order: up, left, self, right, down
            if r > 0 {
                let wu = wv[i - w];
                diag += wu;
                col_idx.push(i - w);
                values.push(-wu);
            }
            if c > 0 {
                let wl = wh[i - 1];
                diag += wl;
                col_idx.push(i - 1);
                values.push(-wl);
            }
            let diag_slot = values.len();
            col_idx.push(i);
            values.push(0.0);
            if c + 1 < w {
                diag += wh[i];
                col_idx.push(i + 1);
                values.push(-wh[i]);
            }
            if r + 1 < h {
                diag += wv[i];
                col_idx.push(i + w);
                values.push(-wv[i]);
            }
            values[diag_slot] = diag;
            row_ptr.push(values.len());
        }
    }

    Ok(SparseSystem {
        width: w,
        height: h,
        row_ptr,
        col_idx,
        values,
        rhs: l.values().to_vec(),
    })
}

pub(crate) enum Preconditioner {
    Jacobi(Vec<f64>),
    Multigrid(Box<MultigridPreconditioner>),
}

impl Preconditioner {
    fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        match self {
            Preconditioner::Jacobi(inv_diag) => {
                for ((z, r), d) in z.iter_mut().zip(r).zip(inv_diag.iter()) {
                    *z = r * d;
                }
            }
            Preconditioner::Multigrid(mg) => mg.apply(r, z),
        }
    }
}

pub(crate) enum PreconditionerKind {
    Jacobi,
    Multigrid,
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Solves the assembled system to the configured relative residual and
/// returns the solution reshaped onto the image grid, clamped to
/// `[epsilon, 1]` so downstream powers and comparisons stay well defined.
pub fn solve(system: &SparseSystem, cfg: &SolverConfig) -> Result<ScalarMap> {
    solve_with(system, cfg, PreconditionerKind::Multigrid)
}

pub(crate) fn solve_with(
    system: &SparseSystem,
    cfg: &SolverConfig,
    kind: PreconditionerKind,
) -> Result<ScalarMap> {
    cfg.validate()?;
    let n = system.dimension();
    let b = system.rhs();
    let b_norm = norm2(b);
    let finish = |x: Vec<f64>| {
        let clamped: Vec<f64> = x.iter().map(|&v| v.clamp(cfg.epsilon, 1.0)).collect();
        ScalarMap::from_raw(system.width(), system.height(), clamped)
    };

    if b_norm == 0.0 {
        return Ok(finish(vec![0.0; n]));
    }

    // The right-hand side is a strong initial guess: it is exact whenever
    // lambda = 0 and whenever l is constant.
    let mut x = b.to_vec();
    let mut r = vec![0.0; n];
    system.matvec(&x, &mut r);
    for i in 0..n {
        r[i] = b[i] - r[i];
    }
    if norm2(&r) / b_norm <= cfg.pcg_tol {
        return Ok(finish(x));
    }

    let mut precond = match kind {
        PreconditionerKind::Jacobi => {
            let inv: Vec<f64> = system.diagonal().iter().map(|&d| 1.0 / d).collect();
            Preconditioner::Jacobi(inv)
        }
        PreconditionerKind::Multigrid => {
            Preconditioner::Multigrid(Box::new(MultigridPreconditioner::build(system)))
        }
    };

    let mut z = vec![0.0; n];
    precond.apply(&r, &mut z);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    let mut ap = vec![0.0; n];
    let mut residual = norm2(&r) / b_norm;

    for iter in 1..=cfg.pcg_max_iter {
        system.matvec(&p, &mut ap);
        let alpha = rz / dot(&p, &ap);
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        residual = norm2(&r) / b_norm;
        if residual <= cfg.pcg_tol {
            // Guard against recurrence drift before declaring victory.
            let mut true_r = vec![0.0; n];
            system.matvec(&x, &mut true_r);
            for i in 0..n {
                true_r[i] = b[i] - true_r[i];
            }
            residual = norm2(&true_r) / b_norm;
            if residual <= cfg.pcg_tol {
                return Ok(finish(x));
            }
            r = true_r;
        }
        if iter == cfg.pcg_max_iter {
            break;
        }
        precond.apply(&r, &mut z);
        let rz_next = dot(&r, &z);
        let beta = rz_next / rz;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
        rz = rz_next;
    }

    Err(Error::SolverDidNotConverge {
        iterations: cfg.pcg_max_iter,
        residual,
    })
}

/// Full illumination estimation: lightness, texture weights, assembly and
/// the preconditioned solve, composed.
pub fn estimate_illumination(img: &Image, cfg: &SolverConfig) -> Result<ScalarMap> {
    let l = lightness(img);
    let (m_h, m_v) = texture_weights(&l, cfg)?;
    let system = assemble_system(&l, &m_h, &m_v, cfg)?;
    solve(&system, cfg)
}
