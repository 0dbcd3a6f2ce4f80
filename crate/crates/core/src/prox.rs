//! Proximal and greedy kernels: singular value thresholding, column-wise group
//! shrinkage and Orthogonal Matching Pursuit.

use nalgebra::{DMatrix, DVector, SVD};

use crate::error::{Error, Result};

/// How the singular value decomposition inside [`svt_with`] is computed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum SvdMode {
    /// SVD of the full matrix.
    #[default]
    Full,
    /// QR-reduce the long side first, decompose the small square factor, and
    /// rebuild only the components that survive thresholding.
    Truncated,
}

/// Output of [`svt`].
#[derive(Debug, Clone)]
pub struct SvtResult {
    /// `U · max(Σ − t, 0) · Vᵀ`, same shape as the input.
    pub matrix: DMatrix<f64>,
    /// Number of singular values strictly above the threshold.
    pub rank: usize,
    /// Singular values of the input in descending order.
    pub singular_values: Vec<f64>,
}

const SVD_MAX_SWEEPS: usize = 10_000;

/// Singular value thresholding: the minimiser of `½‖L − M‖²_F + t‖L‖_*`.
pub fn svt(m: &DMatrix<f64>, t: f64) -> Result<SvtResult> {
    svt_with(m, t, SvdMode::Full)
}

pub fn svt_with(m: &DMatrix<f64>, t: f64, mode: SvdMode) -> Result<SvtResult> {
    if !(t >= 0.0) || !t.is_finite() {
        return Err(Error::InvalidValue(format!("svt threshold must be >= 0, got {t}")));
    }
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("svt input contains non-finite entries".into()));
    }
    let (rows, cols) = m.shape();
    if rows == 0 || cols == 0 {
        return Ok(SvtResult {
            matrix: m.clone(),
            rank: 0,
            singular_values: Vec::new(),
        });
    }
    let (u, sigma, v_t) = match mode {
        SvdMode::Full => thin_svd(m.clone())?,
        SvdMode::Truncated if rows >= cols => {
            let qr = m.clone().qr();
            let (q, r) = qr.unpack();
            let (u, s, v_t) = thin_svd(r)?;
            (q * u, s, v_t)
        }
        SvdMode::Truncated => {
            let qr = m.transpose().qr();
            let (q, r) = qr.unpack();
            let (u, s, v_t) = thin_svd(r)?;
            // mᵀ = q·u·s·v_t  =>  m = v_tᵀ·s·(q·u)ᵀ
            (v_t.transpose(), s, (q * u).transpose())
        }
    };

    let rank = sigma.iter().filter(|&&s| s > t).count();
    let mut out = DMatrix::zeros(rows, cols);
    for (i, &s) in sigma.iter().enumerate().take(rank) {
        let scaled = u.column(i) * (s - t);
        out.ger(1.0, &scaled, &v_t.row(i).transpose(), 1.0);
    }
    Ok(SvtResult {
        matrix: out,
        rank,
        singular_values: sigma,
    })
}

/// Thin SVD with singular values sorted descending.
fn thin_svd(m: DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let svd = SVD::try_new(m, true, true, f64::EPSILON, SVD_MAX_SWEEPS)
        .ok_or_else(|| Error::InvalidValue("SVD did not converge".into()))?;
    let (u, v_t) = match (svd.u, svd.v_t) {
        (Some(u), Some(v_t)) => (u, v_t),
        _ => return Err(Error::InvalidValue("SVD factors missing".into())),
    };
    let mut order: Vec<usize> = (0..svd.singular_values.len()).collect();
    order.sort_by(|&a, &b| svd.singular_values[b].total_cmp(&svd.singular_values[a]));
    let sigma = order.iter().map(|&i| svd.singular_values[i]).collect();
    let u = u.select_columns(&order);
    let v_t = v_t.select_rows(&order);
    Ok((u, sigma, v_t))
}

/// Column-wise group shrinkage, the minimiser of `κ‖F‖₂,₁ + ½‖F − V‖²_F`.
///
/// Each column `v` becomes `max(0, 1 − κ/‖v‖₂)·v`.
pub fn group_shrink(v: &DMatrix<f64>, kappa: f64) -> DMatrix<f64> {
    let mut out = v.clone();
    group_shrink_in_place(&mut out, kappa);
    out
}

pub(crate) fn group_shrink_in_place(v: &mut DMatrix<f64>, kappa: f64) {
    let rows = v.nrows().max(1);
    for col in v.as_mut_slice().chunks_exact_mut(rows) {
        let norm = col.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm <= kappa || norm == 0.0 {
            col.fill(0.0);
        } else {
            let scale = 1.0 - kappa / norm;
            col.iter_mut().for_each(|x| *x *= scale);
        }
    }
}

/// `‖M‖₂,₁`: sum of column Euclidean norms.
pub fn l21_norm(m: &DMatrix<f64>) -> f64 {
    m.column_iter().map(|c| c.norm()).sum()
}

/// `‖M‖₂,₀`: number of columns that are not identically zero.
pub fn nonzero_columns(m: &DMatrix<f64>) -> usize {
    m.column_iter().filter(|c| c.iter().any(|&v| v != 0.0)).count()
}

/// Sum of singular values.
pub fn nuclear_norm(m: &DMatrix<f64>) -> Result<f64> {
    if m.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidValue("nuclear norm of non-finite matrix".into()));
    }
    if m.is_empty() {
        return Ok(0.0);
    }
    Ok(m.clone().singular_values().sum())
}

/// Result of [`omp`].
#[derive(Debug, Clone)]
pub struct OmpSolution {
    /// One coefficient per dictionary atom; zero off the support.
    pub coefficients: DVector<f64>,
    /// Selected atom indices in selection order.
    pub support: Vec<usize>,
    /// `‖x − A·coefficients‖₂`.
    pub residual_norm: f64,
    /// Effective sparsity bound after clamping to the atom count.
    pub sparsity: usize,
    /// Residual norm before the first selection and after each accepted atom.
    pub residual_history: Vec<f64>,
}

/// Residual norm below `OMP_RESIDUAL_STOP · ‖x‖₂` ends the greedy loop.
pub const OMP_RESIDUAL_STOP: f64 = 1e-12;

/// A candidate atom whose component orthogonal to the current support is
/// below this fraction of its norm makes the support rank-deficient.
pub const OMP_RANK_TOL: f64 = 1e-10;

/// Orthogonal Matching Pursuit with at most `k0` atoms.
///
/// Atoms are ranked by `|⟨a_j, r⟩| / ‖a_j‖₂` (lowest index on ties) and the
/// coefficients are the least-squares fit on the accumulated support, computed
/// from an incrementally grown QR factorisation. An atom that would make the
/// support rank-deficient is discarded and never reconsidered. All-zero atoms
/// are never selected.
pub fn omp(x: &[f64], atoms: &DMatrix<f64>, k0: usize) -> Result<OmpSolution> {
    let (bands, n) = atoms.shape();
    if n == 0 {
        return Err(Error::Empty("OMP dictionary has no atoms".into()));
    }
    if x.len() != bands {
        return Err(Error::Dimension(format!(
            "signal has {} bands, dictionary has {bands}",
            x.len()
        )));
    }
    if k0 == 0 {
        return Err(Error::InvalidValue("OMP sparsity bound must be >= 1".into()));
    }
    let sparsity = if k0 > n {
        log::warn!("OMP sparsity bound {k0} exceeds {n} atoms; clamped");
        n
    } else {
        k0
    };

    let x = DVector::from_column_slice(x);
    let x_norm = x.norm();
    let norms: Vec<f64> = atoms.column_iter().map(|c| c.norm()).collect();
    let mut unavailable: Vec<bool> = norms.iter().map(|&v| v == 0.0).collect();

    let mut residual = x.clone();
    let mut q: Vec<DVector<f64>> = Vec::with_capacity(sparsity);
    // r_cols[k] holds column k of the upper-triangular factor (length k + 1).
    let mut r_cols: Vec<Vec<f64>> = Vec::with_capacity(sparsity);
    let mut z: Vec<f64> = Vec::with_capacity(sparsity);
    let mut support = Vec::with_capacity(sparsity);
    let mut history = vec![x_norm];
    let stop = OMP_RESIDUAL_STOP * x_norm;

    while support.len() < sparsity {
        let res_norm = residual.norm();
        if res_norm <= stop {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..n {
            if unavailable[j] {
                continue;
            }
            let score = atoms.column(j).dot(&residual).abs() / norms[j];
            if best.is_none_or(|(_, s)| score > s) {
                best = Some((j, score));
            }
        }
        let Some((j, _)) = best else { break };
        unavailable[j] = true;

        // Gram-Schmidt with one reorthogonalisation pass.
        let mut v: DVector<f64> = atoms.column(j).into_owned();
        let mut coeffs = vec![0.0; q.len()];
        for _ in 0..2 {
            for (i, qi) in q.iter().enumerate() {
                let c = qi.dot(&v);
                coeffs[i] += c;
                v.axpy(-c, qi, 1.0);
            }
        }
        let v_norm = v.norm();
        if v_norm <= OMP_RANK_TOL * norms[j] {
            continue;
        }
        v /= v_norm;
        coeffs.push(v_norm);
        let zk = v.dot(&residual);
        residual.axpy(-zk, &v, 1.0);
        q.push(v);
        r_cols.push(coeffs);
        z.push(zk);
        support.push(j);
        history.push(residual.norm());
    }

    // Back-substitution R·c = z.
    let k = support.len();
    let mut c = vec![0.0; k];
    for i in (0..k).rev() {
        let mut acc = z[i];
        for (jj, cj) in c.iter().enumerate().skip(i + 1) {
            acc -= r_cols[jj][i] * cj;
        }
        c[i] = acc / r_cols[i][i];
    }
    let mut coefficients = DVector::zeros(n);
    let mut fit = x.clone();
    for (&j, &cj) in support.iter().zip(&c) {
        coefficients[j] = cj;
        fit.axpy(-cj, &atoms.column(j), 1.0);
    }
    Ok(OmpSolution {
        coefficients,
        support,
        residual_norm: fit.norm(),
        sparsity,
        residual_history: history,
    })
}
