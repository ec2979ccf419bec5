//! Geometric multigrid preconditioner for the illumination system.
//!
//! The texture weights span several orders of magnitude (flat regions reach
//! `1/eps^2`), so diagonally preconditioned conjugate gradients stall on the
//! near-constant error modes. A V-cycle over Galerkin-coarsened grids removes
//! those modes at the cost of one extra stencil hierarchy.
//!
//! Levels store the operator as a 9-point stencil per cell. Coarsening is
//! vertex-centered full coarsening (coarse point `(I, J)` sits on fine point
//! `(2I, 2J)`), prolongation is bilinear, restriction is its transpose, and
//! each coarse operator is the Galerkin triple product `P' A P`, which keeps
//! the 9-point closure. The cycle uses symmetric damped-Jacobi smoothing and
//! a dense Cholesky solve on the coarsest grid, making the whole operator
//! symmetric positive definite as conjugate gradients require.

use crate::solver::SparseSystem;

const DAMPING: f64 = 0.8;
const COARSEST_UNKNOWNS: usize = 64;

/// Stencil offset index for `(dr, dc)` in `{-1, 0, 1}^2`.
#[inline]
fn off(dr: isize, dc: isize) -> usize {
    ((dr + 1) * 3 + (dc + 1)) as usize
}

/// Bilinear interpolation sources of fine index `i`: one pair for even
/// indices, two half-weight pairs for odd ones (clamped at the far border,
/// where the duplicates merge by accumulation).
#[inline]
fn coarse_pairs(i: usize, coarse_n: usize) -> [(usize, f64); 2] {
    if i % 2 == 0 {
        [(i / 2, 1.0), (i / 2, 0.0)]
    } else {
        let lo = i / 2;
        let hi = (lo + 1).min(coarse_n - 1);
        [(lo, 0.5), (hi, 0.5)]
    }
}

struct Level {
    width: usize,
    height: usize,
    stencil: Vec<[f64; 9]>,
    inv_diag: Vec<f64>,
    // V-cycle workspaces
    x: Vec<f64>,
    b: Vec<f64>,
    r: Vec<f64>,
}

impl Level {
    fn new(width: usize, height: usize, stencil: Vec<[f64; 9]>) -> Level {
        let inv_diag = stencil.iter().map(|s| 1.0 / s[off(0, 0)]).collect();
        let n = width * height;
        Level {
            width,
            height,
            stencil,
            inv_diag,
            x: vec![0.0; n],
            b: vec![0.0; n],
            r: vec![0.0; n],
        }
    }

    fn unknowns(&self) -> usize {
        self.width * self.height
    }

    fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let (w, h) = (self.width, self.height);
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                let st = &self.stencil[i];
                let mut acc = st[off(0, 0)] * x[i];
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        if dr == 0 && dc == 0 {
                            continue;
                        }
                        let a = st[off(dr, dc)];
                        if a == 0.0 {
                            continue;
                        }
                        let rr = r as isize + dr;
                        let cc = c as isize + dc;
                        if rr >= 0 && rr < h as isize && cc >= 0 && cc < w as isize {
                            acc += a * x[rr as usize * w + cc as usize];
                        }
                    }
                }
                y[i] = acc;
            }
        }
    }

    /// One damped-Jacobi sweep `x += damping * D^-1 (b - A x)`.
    fn smooth(&mut self) {
        let x = std::mem::take(&mut self.x);
        self.matvec(&x, &mut self.r);
        let mut x = x;
        for i in 0..x.len() {
            x[i] += DAMPING * self.inv_diag[i] * (self.b[i] - self.r[i]);
        }
        self.x = x;
    }

    /// `r = b - A x` into the level workspace.
    fn residual(&mut self) {
        let x = std::mem::take(&mut self.x);
        self.matvec(&x, &mut self.r);
        self.x = x;
        for i in 0..self.r.len() {
            self.r[i] = self.b[i] - self.r[i];
        }
    }

    /// Galerkin coarse operator `P' A P` over the half-resolution grid.
    fn coarsen(&self) -> Level {
        let (wf, hf) = (self.width, self.height);
        let wc = (wf + 1) / 2;
        let hc = (hf + 1) / 2;
        let mut stencil = vec![[0.0f64; 9]; wc * hc];
        for rf in 0..hf {
            for cf in 0..wf {
                let st = &self.stencil[rf * wf + cf];
                let pi_r = coarse_pairs(rf, hc);
                let pi_c = coarse_pairs(cf, wc);
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        let a = st[off(dr, dc)];
                        if a == 0.0 {
                            continue;
                        }
                        let rj = rf as isize + dr;
                        let cj = cf as isize + dc;
                        if rj < 0 || rj >= hf as isize || cj < 0 || cj >= wf as isize {
                            continue;
                        }
                        let pj_r = coarse_pairs(rj as usize, hc);
                        let pj_c = coarse_pairs(cj as usize, wc);
                        for &(ri, wri) in &pi_r {
                            for &(ci, wci) in &pi_c {
                                let pw_i = wri * wci;
                                if pw_i == 0.0 {
                                    continue;
                                }
                                for &(rjc, wrj) in &pj_r {
                                    for &(cjcc, wcj) in &pj_c {
                                        let pw = pw_i * a * wrj * wcj;
                                        if pw == 0.0 {
                                            continue;
                                        }
                                        let di = rjc as isize - ri as isize;
                                        let dj = cjcc as isize - ci as isize;
                                        stencil[ri * wc + ci][off(di, dj)] += pw;
                                    }
                                }
                            }
                        }
                    }
                }
            }
        }
        Level::new(wc, hc, stencil)
    }
}

/// Dense Cholesky factor of the coarsest operator.
struct CoarseSolve {
    n: usize,
    lower: Vec<f64>,
}

impl CoarseSolve {
    fn factor(level: &Level) -> CoarseSolve {
        let n = level.unknowns();
        let (w, h) = (level.width, level.height);
        let mut a = vec![0.0f64; n * n];
        for r in 0..h {
            for c in 0..w {
                let i = r * w + c;
                for dr in -1isize..=1 {
                    for dc in -1isize..=1 {
                        let v = level.stencil[i][off(dr, dc)];
                        if v == 0.0 {
                            continue;
                        }
                        let rr = r as isize + dr;
                        let cc = c as isize + dc;
                        if rr >= 0 && rr < h as isize && cc >= 0 && cc < w as isize {
                            a[i * n + rr as usize * w + cc as usize] = v;
                        }
                    }
                }
            }
        }
        // in-place lower Cholesky
        let mut lower = vec![0.0f64; n * n];
        for i in 0..n {
            for j in 0..=i {
                let mut sum = a[i * n + j];
                for k in 0..j {
                    sum -= lower[i * n + k] * lower[j * n + k];
                }
                if i == j {
                    debug_assert!(sum > 0.0, "coarse operator lost positive definiteness");
                    lower[i * n + i] = sum.sqrt();
                } else {
                    lower[i * n + j] = sum / lower[j * n + j];
                }
            }
        }
        CoarseSolve { n, lower }
    }

    fn solve(&self, b: &[f64], x: &mut [f64]) {
        let n = self.n;
        // forward: L y = b
        for i in 0..n {
            let mut acc = b[i];
            for k in 0..i {
                acc -= self.lower[i * n + k] * x[k];
            }
            x[i] = acc / self.lower[i * n + i];
        }
        // backward: L' x = y
        for i in (0..n).rev() {
            let mut acc = x[i];
            for k in i + 1..n {
                acc -= self.lower[k * n + i] * x[k];
            }
            x[i] = acc / self.lower[i * n + i];
        }
    }
}

/// One V(1,1) cycle per application, usable as the preconditioner `M^-1`
/// inside conjugate gradients.
pub(crate) struct MultigridPreconditioner {
    levels: Vec<Level>,
    coarse: CoarseSolve,
}

impl MultigridPreconditioner {
    pub(crate) fn build(system: &SparseSystem) -> MultigridPreconditioner {
        let (w, h) = (system.width(), system.height());
        let mut stencil = vec![[0.0f64; 9]; w * h];
        for row in 0..system.dimension() {
            let (ri, ci) = (row / w, row % w);
            for (col, v) in system.row(row) {
                let (rj, cj) = (col / w, col % w);
                let dr = rj as isize - ri as isize;
                let dc = cj as isize - ci as isize;
                debug_assert!(dr.abs() <= 1 && dc.abs() <= 1);
                stencil[row][off(dr, dc)] = v;
            }
        }
        let mut levels = vec![Level::new(w, h, stencil)];
        loop {
            let last = levels.last().unwrap();
            let shrinks = (last.width + 1) / 2 < last.width || (last.height + 1) / 2 < last.height;
            if last.unknowns() <= COARSEST_UNKNOWNS || !shrinks {
                break;
            }
            levels.push(levels.last().unwrap().coarsen());
        }
        let coarse = CoarseSolve::factor(levels.last().unwrap());
        MultigridPreconditioner { levels, coarse }
    }

    /// `z = M^-1 r` via one V-cycle from a zero initial guess.
    pub(crate) fn apply(&mut self, r: &[f64], z: &mut [f64]) {
        let last = self.levels.len() - 1;
        self.levels[0].b.copy_from_slice(r);

        for l in 0..last {
            let (fine, rest) = self.levels.split_at_mut(l + 1);
            let fine = &mut fine[l];
            let coarse = &mut rest[0];
            fine.x.iter_mut().for_each(|v| *v = 0.0);
            fine.smooth();
            fine.residual();
            restrict(fine, coarse);
        }

        // coarsest: exact solve
        {
            let level = &mut self.levels[last];
            if last == 0 {
                level.b.copy_from_slice(r);
            }
            let b = std::mem::take(&mut level.b);
            self.coarse.solve(&b, &mut level.x);
            level.b = b;
        }

        for l in (0..last).rev() {
            let (fine, rest) = self.levels.split_at_mut(l + 1);
            let fine = &mut fine[l];
            let coarse = &rest[0];
            prolong_add(coarse, fine);
            fine.smooth();
        }

        z.copy_from_slice(&self.levels[0].x);
    }
}

/// `coarse.b = P' fine.r`.
fn restrict(fine: &Level, coarse: &mut Level) {
    coarse.b.iter_mut().for_each(|v| *v = 0.0);
    let (wf, wc, hc) = (fine.width, coarse.width, coarse.height);
    for rf in 0..fine.height {
        for cf in 0..wf {
            let v = fine.r[rf * wf + cf];
            if v == 0.0 {
                continue;
            }
            for &(rc, wr) in &coarse_pairs(rf, hc) {
                if wr == 0.0 {
                    continue;
                }
                for &(cc, wcw) in &coarse_pairs(cf, wc) {
                    if wcw == 0.0 {
                        continue;
                    }
                    coarse.b[rc * wc + cc] += wr * wcw * v;
                }
            }
        }
    }
}

/// `fine.x += P coarse.x`.
fn prolong_add(coarse: &Level, fine: &mut Level) {
    let (wf, wc, hc) = (fine.width, coarse.width, coarse.height);
    for rf in 0..fine.height {
        for cf in 0..wf {
            let mut acc = 0.0;
            for &(rc, wr) in &coarse_pairs(rf, hc) {
                if wr == 0.0 {
                    continue;
                }
                for &(cc, wcw) in &coarse_pairs(cf, wc) {
                    acc += wr * wcw * coarse.x[rc * wc + cc];
                }
            }
            fine.x[rf * wf + cf] += acc;
        }
    }
}
