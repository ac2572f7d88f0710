//! Least squares on the Gram matrix.
//!
//! Every fit minimizes
//!
//! ```text
//! (1/n) * ||y - X w||^2 + lambda * P(w)
//! ```
//!
//! with `P` the L1 or squared L2 norm over the penalized coordinates only.
//! The data enter through `G = X'X / n` and `c = X'y / n`, which are
//! accumulated from sparse rows so that one-hot leaf encodings stay cheap.
use crate::error::{Error, Result};

/// Relative pivot size below which a column is treated as a linear
/// combination of the columns before it.
pub const ALIAS_TOLERANCE: f64 = 1e-10;

/// A design row in coordinate form. Column indices must be strictly
/// increasing.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct SparseRow {
    pub index: Vec<usize>,
    pub value: Vec<f64>,
}

impl SparseRow {
    pub fn push(&mut self, index: usize, value: f64) {
        debug_assert!(self.index.last().is_none_or(|&l| l < index));
        if value != 0.0 {
            self.index.push(index);
            self.value.push(value);
        }
    }

    pub fn dot(&self, w: &[f64]) -> f64 {
        self.index.iter().zip(&self.value).map(|(&i, v)| w[i] * v).sum()
    }

    pub fn to_dense(&self, width: usize) -> Vec<f64> {
        let mut out = vec![0.0; width];
        for (&i, &v) in self.index.iter().zip(&self.value) {
            out[i] = v;
        }
        out
    }
}

/// Normalized cross products of a design matrix and its target.
#[derive(Debug, Clone, PartialEq)]
pub struct Gram {
    pub p: usize,
    pub n: usize,
    /// Row-major `p x p`, symmetric.
    pub g: Vec<f64>,
    pub c: Vec<f64>,
    /// `y'y / n`
    pub yy: f64,
}

impl Gram {
    pub fn from_rows(rows: &[SparseRow], y: &[f64], p: usize) -> Result<Self> {
        if rows.is_empty() || rows.len() != y.len() {
            return Err(Error::InvalidInput(format!(
                "{} design rows for {} targets",
                rows.len(),
                y.len()
            )));
        }
        let mut g = vec![0.0; p * p];
        let mut c = vec![0.0; p];
        let mut yy = 0.0;
        for (row, &t) in rows.iter().zip(y) {
            for (a, (&i, &vi)) in row.index.iter().zip(&row.value).enumerate() {
                c[i] += vi * t;
                let base = i * p;
                for (&j, &vj) in row.index[a..].iter().zip(&row.value[a..]) {
                    g[base + j] += vi * vj;
                }
            }
            yy += t * t;
        }
        let n = rows.len();
        let inv = 1.0 / n as f64;
        for i in 0..p {
            for j in i..p {
                let v = g[i * p + j] * inv;
                g[i * p + j] = v;
                g[j * p + i] = v;
            }
            c[i] *= inv;
        }
        Ok(Gram {
            p,
            n,
            g,
            c,
            yy: yy * inv,
        })
    }

    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.g[i * self.p + j]
    }

    /// `G w`
    pub fn apply(&self, w: &[f64]) -> Vec<f64> {
        (0..self.p)
            .map(|i| self.g[i * self.p..(i + 1) * self.p].iter().zip(w).map(|(a, b)| a * b).sum())
            .collect()
    }

    /// `(1/n) ||y - Xw||^2` from the cross products.
    pub fn mse(&self, w: &[f64]) -> f64 {
        let gw = self.apply(w);
        let wgw: f64 = w.iter().zip(&gw).map(|(a, b)| a * b).sum();
        let cw: f64 = w.iter().zip(&self.c).map(|(a, b)| a * b).sum();
        self.yy - 2.0 * cw + wgw
    }
}

/// Lower Cholesky factor of `G + diag(ridge)` restricted to the columns in
/// `active`. Columns whose pivot collapses are reported in `aliased` and
/// removed from the factor.
struct Cholesky {
    p: usize,
    l: Vec<f64>,
    kept: Vec<bool>,
}

impl Cholesky {
    fn factor(gram: &Gram, ridge: &[f64], active: &[bool]) -> (Self, Vec<usize>) {
        let p = gram.p;
        let mut l = vec![0.0; p * p];
        let mut kept = vec![false; p];
        let mut aliased = Vec::new();
        for j in 0..p {
            if !active[j] {
                continue;
            }
            let diag = gram.at(j, j) + ridge[j];
            let mut d = diag;
            for k in 0..j {
                if kept[k] {
                    d -= l[j * p + k] * l[j * p + k];
                }
            }
            if !(diag > 0.0) || d <= ALIAS_TOLERANCE * diag {
                aliased.push(j);
                continue;
            }
            let ljj = d.sqrt();
            l[j * p + j] = ljj;
            kept[j] = true;
            for i in (j + 1)..p {
                if !active[i] {
                    continue;
                }
                let mut s = gram.at(i, j);
                for k in 0..j {
                    if kept[k] {
                        s -= l[i * p + k] * l[j * p + k];
                    }
                }
                l[i * p + j] = s / ljj;
            }
        }
        (Cholesky { p, l, kept }, aliased)
    }

    fn solve(&self, rhs: &[f64]) -> Vec<f64> {
        let p = self.p;
        let mut z = vec![0.0; p];
        for i in 0..p {
            if !self.kept[i] {
                continue;
            }
            let mut s = rhs[i];
            for k in 0..i {
                if self.kept[k] {
                    s -= self.l[i * p + k] * z[k];
                }
            }
            z[i] = s / self.l[i * p + i];
        }
        let mut w = vec![0.0; p];
        for i in (0..p).rev() {
            if !self.kept[i] {
                continue;
            }
            let mut s = z[i];
            for k in (i + 1)..p {
                if self.kept[k] {
                    s -= self.l[k * p + i] * w[k];
                }
            }
            w[i] = s / self.l[i * p + i];
        }
        w
    }
}

/// Ordinary least squares over the `active` columns; the rest are fixed at
/// zero. Returns the solution and the columns found to be collinear with
/// earlier ones (also fixed at zero).
pub fn least_squares(gram: &Gram, active: &[bool]) -> (Vec<f64>, Vec<usize>) {
    let (chol, aliased) = Cholesky::factor(gram, &vec![0.0; gram.p], active);
    (chol.solve(&gram.c), aliased)
}

/// Solves `(G + lambda D) w = c`, `D` the indicator of penalized columns.
pub fn ridge(gram: &Gram, lambda: f64, penalized: &[bool]) -> Result<Vec<f64>> {
    let diag: Vec<f64> = penalized.iter().map(|&p| if p { lambda } else { 0.0 }).collect();
    let (chol, aliased) = Cholesky::factor(gram, &diag, &vec![true; gram.p]);
    if let Some(&j) = aliased.first() {
        return Err(Error::Singular(format!("column {j}")));
    }
    Ok(chol.solve(&gram.c))
}

fn soft_threshold(x: f64, t: f64) -> f64 {
    if x > t {
        x - t
    } else if x < -t {
        x + t
    } else {
        0.0
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LassoFit {
    pub w: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CdOptions {
    /// Stop when the largest coefficient change in a full sweep is below
    /// `tolerance * max(1, max |w|)`.
    pub tolerance: f64,
    pub max_sweeps: usize,
}

impl Default for CdOptions {
    fn default() -> Self {
        CdOptions {
            tolerance: 1e-8,
            max_sweeps: 10_000,
        }
    }
}

/// Cyclic coordinate descent with soft-thresholding for
/// `(1/n)||y - Xw||^2 + lambda * sum_{penalized} |w_j|`.
///
/// Full sweeps alternate with sweeps over the current nonzero set; the fit
/// stops only after a full sweep moves no coefficient by more than the
/// tolerance.
pub fn lasso(gram: &Gram, lambda: f64, penalized: &[bool], opts: CdOptions) -> LassoFit {
    let p = gram.p;
    let mut w = vec![0.0; p];
    let mut q = vec![0.0; p]; // G w
    let mut sweeps = 0;

    let sweep = |w: &mut [f64], q: &mut [f64], only_active: bool| -> f64 {
        let mut max_delta: f64 = 0.0;
        for j in 0..p {
            if only_active && w[j] == 0.0 {
                continue;
            }
            let gjj = gram.at(j, j);
            if gjj <= 0.0 {
                continue;
            }
            let rho = gram.c[j] - (q[j] - gjj * w[j]);
            let t = if penalized[j] { lambda / 2.0 } else { 0.0 };
            let new = soft_threshold(rho, t) / gjj;
            let delta = new - w[j];
            if delta != 0.0 {
                w[j] = new;
                let col = &gram.g[j * p..(j + 1) * p];
                for (qi, gij) in q.iter_mut().zip(col) {
                    *qi += delta * gij;
                }
                max_delta = max_delta.max(delta.abs());
            }
        }
        max_delta
    };
    let scale = |w: &[f64]| w.iter().fold(1.0f64, |m, v| m.max(v.abs()));

    let mut converged = false;
    while sweeps < opts.max_sweeps {
        let delta = sweep(&mut w, &mut q, false);
        sweeps += 1;
        if delta <= opts.tolerance * scale(&w) {
            converged = true;
            break;
        }
        while sweeps < opts.max_sweeps {
            let delta = sweep(&mut w, &mut q, true);
            sweeps += 1;
            if delta <= opts.tolerance * scale(&w) {
                break;
            }
        }
    }
    LassoFit { w, sweeps, converged }
}

/// Gradient of the smooth part, `2 (G w - c)`.
pub fn loss_gradient(gram: &Gram, w: &[f64]) -> Vec<f64> {
    gram.apply(w)
        .into_iter()
        .zip(&gram.c)
        .map(|(gw, c)| 2.0 * (gw - c))
        .collect()
}
