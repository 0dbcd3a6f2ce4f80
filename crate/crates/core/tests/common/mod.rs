//! Independent reference solvers shared by the integration and acceptance tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform(rng: &mut ChaCha8Rng, r: usize, c: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| rng.random_range(lo..hi))
}

/// Golden-section minimisation of a unimodal scalar function on `[lo, hi]`.
pub fn golden_min(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = hi - g * (hi - lo);
    let mut b = lo + g * (hi - lo);
    let (mut fa, mut fb) = (f(a), f(b));
    for _ in 0..200 {
        if fa < fb {
            hi = b;
            b = a;
            fb = fa;
            a = hi - g * (hi - lo);
            fa = f(a);
        } else {
            lo = a;
            a = b;
            fa = fb;
            b = lo + g * (hi - lo);
            fb = f(b);
        }
    }
    0.5 * (lo + hi)
}

/// Exact minimiser of `‖y − A c‖² + λ‖c‖₂` for one column.
///
/// Zero when `‖2Aᵀy‖ ≤ λ`; otherwise `c = (2AᵀA + (λ/t) I)⁻¹ 2Aᵀy` where
/// `t = ‖c‖` solves the secular equation `Σ bᵢ² / (2μᵢ t + λ)² = 1`, with
/// `AᵀA = Q diag(μ) Qᵀ` and `b = Qᵀ 2Aᵀy`. The left side decreases in `t`,
/// so bisection pins `t` to machine precision.
pub fn group_lasso_column(a: &DMatrix<f64>, y: &DVector<f64>, lambda: f64) -> DVector<f64> {
    let g = a.transpose() * y * 2.0;
    if g.norm() <= lambda {
        return DVector::zeros(a.ncols());
    }
    let eig = (a.transpose() * a).symmetric_eigen();
    let b = eig.eigenvectors.transpose() * &g;
    let mu = &eig.eigenvalues;
    let lhs = |t: f64| -> f64 {
        b.iter()
            .zip(mu.iter())
            .map(|(bi, m)| bi * bi / (2.0 * m.max(0.0) * t + lambda).powi(2))
            .sum()
    };
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    while lhs(hi) > 1.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if lhs(mid) > 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let t = 0.5 * (lo + hi);
    let n = a.ncols();
    let mut system = a.transpose() * a * 2.0;
    for i in 0..n {
        system[(i, i)] += lambda / t;
    }
    system.cholesky().expect("positive definite").solve(&g)
}

/// Column-by-column exact solution of `min ‖Y − A C‖²_F + λ‖C‖₂,₁`.
pub fn group_lasso(a: &DMatrix<f64>, y: &DMatrix<f64>, lambda: f64) -> DMatrix<f64> {
    let mut c = DMatrix::zeros(a.ncols(), y.ncols());
    for j in 0..y.ncols() {
        let col = group_lasso_column(a, &y.column(j).into_owned(), lambda);
        c.set_column(j, &col);
    }
    c
}

pub fn group_lasso_objective(a: &DMatrix<f64>, y: &DMatrix<f64>, c: &DMatrix<f64>, lambda: f64) -> f64 {
    (y - a * c).norm_squared() + lambda * c.column_iter().map(|col| col.norm()).sum::<f64>()
}

/// Best `k`-sparse least-squares residual over every support of size `k`.
pub fn best_subset_residual(a: &DMatrix<f64>, x: &DVector<f64>, k: usize) -> (f64, Vec<usize>) {
    let n = a.ncols();
    let mut best = (f64::INFINITY, Vec::new());
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        let sub = a.select_columns(&idx);
        let coef = sub
            .clone()
            .svd(true, true)
            .solve(x, 1e-14)
            .expect("least squares");
        let r = (x - &sub * coef).norm();
        if r < best.0 {
            best = (r, idx.clone());
        }
        // next combination
        let mut i = k;
        loop {
            if i == 0 {
                return best;
            }
            i -= 1;
            if idx[i] < n - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// `argmin_x ½(x − s)² + t·|x|` over `x ≥ 0` by golden section.
fn scalar_prox(s: f64, t: f64) -> f64 {
    let f = |x: f64| 0.5 * (x - s) * (x - s) + t * x;
    let x = golden_min(f, 0.0, s.max(0.0) + 1.0);
    // golden section cannot land exactly on the boundary
    if f(0.0) <= f(x) {
        0.0
    } else {
        x
    }
}

/// Minimiser of `½‖X − M‖²_F + t‖X‖_*`.
///
/// The objective separates over the singular directions of `M`, found here
/// from the eigen-decomposition of `MᵀM`, and each singular value is then
/// minimised numerically.
pub fn svt_oracle(m: &DMatrix<f64>, t: f64) -> DMatrix<f64> {
    let eig = (m.transpose() * m).symmetric_eigen();
    let mut x = DMatrix::zeros(m.nrows(), m.ncols());
    for (i, &mu) in eig.eigenvalues.iter().enumerate() {
        let s = mu.max(0.0).sqrt();
        if s <= 1e-12 {
            continue;
        }
        let v = eig.eigenvectors.column(i);
        let u = m * v / s;
        x += u * v.transpose() * scalar_prox(s, t);
    }
    x
}

/// Minimiser of `½‖v − x‖² + κ‖v‖` for each column of `x`, searched along
/// the column direction.
pub fn shrink_oracle(x: &DMatrix<f64>, kappa: f64) -> DMatrix<f64> {
    let mut out = DMatrix::zeros(x.nrows(), x.ncols());
    for (j, col) in x.column_iter().enumerate() {
        let n = col.norm();
        if n == 0.0 {
            continue;
        }
        let s = scalar_prox(n, kappa);
        out.set_column(j, &(col / n * s));
    }
    out
}

/// Per-threshold counts and the exact AUC of a labeled score list.
pub struct RocOracle {
    pub thresholds: Vec<f64>,
    pub pd: Vec<f64>,
    pub pfa: Vec<f64>,
    pub auc: f64,
}

/// Counts `score > η` directly for every threshold in `{+∞} ∪ scores ∪ {−∞}`.
pub fn roc_oracle(scores: &[f64], labels: &[bool], background_only: bool) -> RocOracle {
    let mut etas: Vec<f64> = scores.to_vec();
    etas.sort_by(|a, b| b.total_cmp(a));
    etas.dedup();
    etas.insert(0, f64::INFINITY);
    etas.push(f64::NEG_INFINITY);
    let targets = labels.iter().filter(|&&l| l).count() as u64;
    let den = if background_only {
        scores.len() as u64 - targets
    } else {
        scores.len() as u64
    };
    let mut tp = Vec::new();
    let mut fp = Vec::new();
    for &eta in &etas {
        let mut t = 0u64;
        let mut f = 0u64;
        for (&s, &l) in scores.iter().zip(labels) {
            if s > eta {
                if l {
                    t += 1;
                } else {
                    f += 1;
                }
            }
        }
        tp.push(t);
        fp.push(f);
    }
    // area·2·T·den as an integer: trapezoids from (0,0), then the closing
    // segment to Pfa = 1 at the final Pd
    let mut num: u64 = 0;
    let (mut pf, mut pt) = (0u64, 0u64);
    for (&f, &t) in fp.iter().zip(&tp) {
        num += (f - pf) * (t + pt);
        pf = f;
        pt = t;
    }
    num += (den - pf) * 2 * pt;
    let auc = num as f64 / (2 * targets * den) as f64;
    RocOracle {
        thresholds: etas,
        pd: tp.iter().map(|&t| t as f64 / targets as f64).collect(),
        pfa: fp.iter().map(|&f| f as f64 / den as f64).collect(),
        auc,
    }
}
