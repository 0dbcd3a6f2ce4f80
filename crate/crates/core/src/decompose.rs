//! Low-rank background plus dictionary-sparse target decomposition.
//!
//! Minimises
//!
//! ```text
//! τ‖L‖_* + λ‖C‖₂,₁ + ‖D − L − (A_t C)ᵀ‖²_F
//! ```
//!
//! by alternating two exactly solved subproblems: singular value thresholding
//! for `L` (threshold `τ/2`, since the quadratic carries weight one rather
//! than one half) and an augmented-Lagrangian splitting `C = F` for the
//! group-lasso problem in `C`.
//!
//! The `C`-step iterates, with `Y = (D − L)ᵀ`,
//!
//! ```text
//! C ← (2A_tᵀA_t + ρI)⁻¹ (2A_tᵀY + ρF + Z)
//! F ← group_shrink(C − Z/ρ, λ/ρ)
//! Z ← Z − ρ(C − F)
//! ρ ← growth · ρ
//! ```
//!
//! until `‖C − F‖²_F` drops below the inner tolerance. `F` is returned as the
//! coefficient matrix, so its zero columns are exact.

use std::fs;
use std::path::Path;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::cube::{HsiCube, SceneMatrix, SpectralDictionary};
use crate::error::{Error, Result};
use crate::prox::{group_shrink_in_place, l21_norm, nonzero_columns, nuclear_norm, svt_with, SvdMode, SvtResult};

/// Weights, tolerances and schedule of the solver.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Nuclear-norm weight τ.
    pub tau: f64,
    /// Group-sparsity weight λ.
    pub lambda: f64,
    /// Outer tolerance on both relative change ratios.
    pub epsilon: f64,
    /// Inner tolerance on `‖C − F‖²_F`.
    pub inner_tolerance: f64,
    /// Penalty at the start of every inner solve.
    pub rho0: f64,
    /// Multiplicative penalty growth per inner iteration.
    pub rho_growth: f64,
    pub max_outer: usize,
    pub max_inner: usize,
    /// Carry `C`, `F`, `Z` from one outer iteration into the next inner solve.
    pub warm_start: bool,
    pub truncated_svd: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let (tau, lambda) = Profile::SyntheticStrategyOne.weights();
        Self {
            tau,
            lambda,
            epsilon: 1e-5,
            inner_tolerance: 1e-6,
            rho0: 1e-4,
            rho_growth: 1.1,
            max_outer: 200,
            max_inner: 500,
            warm_start: true,
            truncated_svd: false,
        }
    }
}

impl SolverConfig {
    pub fn with_weights(tau: f64, lambda: f64) -> Self {
        Self {
            tau,
            lambda,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let nonneg = [
            ("tau", self.tau),
            ("lambda", self.lambda),
            ("epsilon", self.epsilon),
            ("inner_tolerance", self.inner_tolerance),
        ];
        for (name, v) in nonneg {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::InvalidValue(format!("{name} must be finite and >= 0, got {v}")));
            }
        }
        if !(self.rho0 > 0.0) || !self.rho0.is_finite() {
            return Err(Error::InvalidValue(format!("rho0 must be > 0, got {}", self.rho0)));
        }
        if !(self.rho_growth > 1.0) || !self.rho_growth.is_finite() {
            return Err(Error::InvalidValue(format!(
                "rho_growth must be > 1, got {}",
                self.rho_growth
            )));
        }
        if self.max_outer == 0 || self.max_inner == 0 {
            return Err(Error::InvalidValue("iteration caps must be >= 1".into()));
        }
        Ok(())
    }

    fn svd_mode(&self) -> SvdMode {
        if self.truncated_svd {
            SvdMode::Truncated
        } else {
            SvdMode::Full
        }
    }
}

/// Named `(τ, λ)` settings for the two detection strategies on synthetic and
/// real scenes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Profile {
    #[serde(rename = "synthetic-s1")]
    SyntheticStrategyOne,
    #[serde(rename = "real-s1")]
    RealStrategyOne,
    #[serde(rename = "synthetic-s2")]
    SyntheticStrategyTwo,
    #[serde(rename = "real-s2")]
    RealStrategyTwo,
}

impl Profile {
    pub const ALL: [Profile; 4] = [
        Profile::SyntheticStrategyOne,
        Profile::RealStrategyOne,
        Profile::SyntheticStrategyTwo,
        Profile::RealStrategyTwo,
    ];

    /// `(τ, λ)`.
    pub fn weights(self) -> (f64, f64) {
        match self {
            Profile::SyntheticStrategyOne => (0.8, 0.133),
            Profile::RealStrategyOne => (3.0, 0.3),
            Profile::SyntheticStrategyTwo => (0.05, 0.02),
            Profile::RealStrategyTwo => (0.5, 0.2),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::SyntheticStrategyOne => "synthetic-s1",
            Profile::RealStrategyOne => "real-s1",
            Profile::SyntheticStrategyTwo => "synthetic-s2",
            Profile::RealStrategyTwo => "real-s2",
        }
    }

    pub fn from_name(name: &str) -> Option<Profile> {
        Profile::ALL.into_iter().find(|p| p.name() == name)
    }

    pub fn solver_config(self) -> SolverConfig {
        let (tau, lambda) = self.weights();
        SolverConfig::with_weights(tau, lambda)
    }
}

/// Variables of the inner splitting.
#[derive(Debug, Clone, PartialEq)]
pub struct AdmmState {
    pub c: DMatrix<f64>,
    pub f: DMatrix<f64>,
    pub z: DMatrix<f64>,
    pub rho: f64,
}

impl AdmmState {
    pub fn zeros(atoms: usize, pixels: usize, rho: f64) -> Self {
        Self {
            c: DMatrix::zeros(atoms, pixels),
            f: DMatrix::zeros(atoms, pixels),
            z: DMatrix::zeros(atoms, pixels),
            rho,
        }
    }

    /// `‖C − F‖²_F`.
    pub fn feasibility(&self) -> f64 {
        self.c.iter().zip(self.f.iter()).map(|(a, b)| (a - b) * (a - b)).sum()
    }
}

/// Outcome of one inner solve.
#[derive(Debug, Clone)]
pub struct InnerSolve {
    pub state: AdmmState,
    pub iterations: usize,
    pub converged: bool,
}

impl InnerSolve {
    /// The exactly group-sparse coefficient matrix `F`.
    pub fn coefficients(&self) -> &DMatrix<f64> {
        &self.state.f
    }
}

/// `L`-step: `svt(D − S_prev, τ/2)`.
pub fn solve_l_subproblem(
    d: &DMatrix<f64>,
    s_prev: &DMatrix<f64>,
    tau: f64,
    mode: SvdMode,
) -> Result<SvtResult> {
    if d.shape() != s_prev.shape() {
        return Err(Error::Dimension(format!(
            "D is {:?}, sparse term is {:?}",
            d.shape(),
            s_prev.shape()
        )));
    }
    svt_with(&(d - s_prev), 0.5 * tau, mode)
}

/// `C`-step: group-lasso fit of `(D − L)ᵀ ≈ A_t C` by the splitting above,
/// starting from `state` (its `ρ` is used as the initial penalty).
pub fn solve_c_subproblem(
    d: &DMatrix<f64>,
    l: &DMatrix<f64>,
    a_t: &DMatrix<f64>,
    lambda: f64,
    cfg: &SolverConfig,
    mut state: AdmmState,
) -> Result<InnerSolve> {
    let (e, p) = d.shape();
    let n_t = a_t.ncols();
    if l.shape() != (e, p) || a_t.nrows() != p {
        return Err(Error::Dimension(format!(
            "D {:?}, L {:?}, A_t {:?} are inconsistent",
            d.shape(),
            l.shape(),
            a_t.shape()
        )));
    }
    if state.c.shape() != (n_t, e) || state.f.shape() != (n_t, e) || state.z.shape() != (n_t, e) {
        return Err(Error::Dimension("ADMM state does not match N_t x e".into()));
    }
    if !(state.rho > 0.0) {
        return Err(Error::InvalidValue(format!("rho must be > 0, got {}", state.rho)));
    }

    // 2·A_tᵀ(D − L)ᵀ, N_t × e.
    let data_term = ((d - l) * a_t).transpose() * 2.0;
    let gram = a_t.transpose() * a_t * 2.0;

    let mut iterations = 0;
    let mut converged = false;
    let mut rhs = DMatrix::zeros(n_t, e);
    while iterations < cfg.max_inner {
        iterations += 1;
        let rho = state.rho;
        let mut system = gram.clone();
        for i in 0..n_t {
            system[(i, i)] += rho;
        }
        let chol = system.cholesky().ok_or_else(|| {
            Error::InvalidValue("normal equations are not positive definite".into())
        })?;
        // N_t is small: one inverse and a product beat per-column solves
        let inverse = chol.inverse();
        rhs.copy_from(&data_term);
        rhs.zip_zip_apply(&state.f, &state.z, |r, f, z| *r += rho * f + z);
        state.c.gemm(1.0, &inverse, &rhs, 0.0);

        state.f.copy_from(&state.c);
        state.f.zip_apply(&state.z, |f, z| *f -= z / rho);
        group_shrink_in_place(&mut state.f, lambda / rho);

        state.z.zip_zip_apply(&state.c, &state.f, |z, c, f| *z -= rho * (c - f));
        state.rho = rho * cfg.rho_growth;

        let gap = state.feasibility();
        if !gap.is_finite() {
            return Err(Error::InvalidValue("non-finite iterate in C-subproblem".into()));
        }
        if gap <= cfg.inner_tolerance {
            converged = true;
            break;
        }
    }
    Ok(InnerSolve {
        state,
        iterations,
        converged,
    })
}

/// `(A_t C)ᵀ`, the `e × p` sparse target matrix.
pub fn sparse_term(a_t: &DMatrix<f64>, c: &DMatrix<f64>) -> DMatrix<f64> {
    c.transpose() * a_t.transpose()
}

/// `τ‖L‖_* + λ‖C‖₂,₁ + ‖D − L − (A_t C)ᵀ‖²_F`.
pub fn objective(
    d: &DMatrix<f64>,
    l: &DMatrix<f64>,
    c: &DMatrix<f64>,
    a_t: &DMatrix<f64>,
    tau: f64,
    lambda: f64,
) -> Result<f64> {
    if l.shape() != d.shape() || a_t.nrows() != d.ncols() || c.shape() != (a_t.ncols(), d.nrows()) {
        return Err(Error::Dimension("objective arguments have inconsistent shapes".into()));
    }
    let residual = d - l - sparse_term(a_t, c);
    Ok(tau * nuclear_norm(l)? + lambda * l21_norm(c) + residual.norm_squared())
}

/// One row of the outer-iteration trace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub outer_iter: usize,
    pub objective: f64,
    pub rank_l: usize,
    pub nnz_cols_c: usize,
    pub ratio_l: f64,
    pub ratio_s: f64,
    #[serde(skip)]
    pub inner_iterations: usize,
}

/// Solver output.
#[derive(Debug, Clone)]
pub struct Decomposition {
    /// Low-rank background, `e × p`.
    pub l: DMatrix<f64>,
    /// Group-sparse coefficients, `N_t × e`.
    pub c: DMatrix<f64>,
    /// Sparse target matrix `(A_t C)ᵀ`, `e × p`.
    pub s: DMatrix<f64>,
    /// `D − L − S`.
    pub residual: DMatrix<f64>,
    pub trace: Vec<TraceRow>,
    /// Both outer ratios fell below ε before the iteration cap.
    pub converged: bool,
    /// Some inner solve stopped at its iteration cap.
    pub inner_cap_hit: bool,
    height: usize,
    width: usize,
}

impl Decomposition {
    pub fn iterations(&self) -> usize {
        self.trace.len()
    }

    fn to_cube(&self, m: &DMatrix<f64>) -> Result<HsiCube> {
        SceneMatrix::new(m.clone(), self.height, self.width)?.unflatten()
    }

    pub fn background_cube(&self) -> Result<HsiCube> {
        self.to_cube(&self.l)
    }

    pub fn target_cube(&self) -> Result<HsiCube> {
        self.to_cube(&self.s)
    }

    pub fn noise_cube(&self) -> Result<HsiCube> {
        self.to_cube(&self.residual)
    }

    /// Coefficients as an `h × w × N_t` cube (one band per target atom).
    pub fn coefficient_cube(&self) -> Result<HsiCube> {
        self.to_cube(&self.c.transpose())
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.height, self.width)
    }
}

/// Writes the trace as `outer_iter,objective,rank_L,nnz_cols_C,ratio_L,ratio_S`.
pub fn write_trace_csv(trace: &[TraceRow], path: &Path) -> Result<()> {
    let mut text = String::from("outer_iter,objective,rank_L,nnz_cols_C,ratio_L,ratio_S\n");
    for r in trace {
        text.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.outer_iter, r.objective, r.rank_l, r.nnz_cols_c, r.ratio_l, r.ratio_s
        ));
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

pub fn read_trace_csv(path: &Path) -> Result<Vec<TraceRow>> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let f: Vec<&str> = line.split(',').collect();
        let bad = || Error::parse(path, format!("line {}: malformed trace row", i + 1));
        if f.len() != 6 {
            return Err(bad());
        }
        rows.push(TraceRow {
            outer_iter: f[0].parse().map_err(|_| bad())?,
            objective: f[1].parse().map_err(|_| bad())?,
            rank_l: f[2].parse().map_err(|_| bad())?,
            nnz_cols_c: f[3].parse().map_err(|_| bad())?,
            ratio_l: f[4].parse().map_err(|_| bad())?,
            ratio_s: f[5].parse().map_err(|_| bad())?,
            inner_iterations: 0,
        });
    }
    Ok(rows)
}

/// Decomposes `d` into low-rank background and `a_t`-sparse targets.
pub fn decompose(d: &SceneMatrix, a_t: &SpectralDictionary, cfg: &SolverConfig) -> Result<Decomposition> {
    cfg.validate()?;
    if a_t.bands() != d.bands() {
        return Err(Error::Dimension(format!(
            "target dictionary has {} bands, scene has {}",
            a_t.bands(),
            d.bands()
        )));
    }
    let dm = d.matrix();
    let atoms = a_t.atoms();
    let (e, p) = dm.shape();
    let n_t = atoms.ncols();
    let d_norm = dm.norm();

    let mut l = DMatrix::zeros(e, p);
    let mut s = DMatrix::zeros(e, p);
    let mut state = AdmmState::zeros(n_t, e, cfg.rho0);
    let mut trace = Vec::new();
    let mut converged = false;
    let mut inner_cap_hit = false;

    if d_norm == 0.0 {
        trace.push(TraceRow {
            outer_iter: 1,
            objective: 0.0,
            rank_l: 0,
            nnz_cols_c: 0,
            ratio_l: 0.0,
            ratio_s: 0.0,
            inner_iterations: 0,
        });
        return Ok(Decomposition {
            residual: DMatrix::zeros(e, p),
            l,
            c: state.f,
            s,
            trace,
            converged: true,
            inner_cap_hit,
            height: d.height(),
            width: d.width(),
        });
    }

    for k in 1..=cfg.max_outer {
        let numeric = |reason: String| Error::Numeric { iteration: k, reason };
        let svt = solve_l_subproblem(dm, &s, cfg.tau, cfg.svd_mode()).map_err(|e| numeric(e.to_string()))?;
        let l_new = svt.matrix;
        let l_nuclear: f64 = svt.singular_values.iter().map(|&v| (v - 0.5 * cfg.tau).max(0.0)).sum();

        if !cfg.warm_start {
            state = AdmmState::zeros(n_t, e, cfg.rho0);
        }
        state.rho = cfg.rho0;
        let inner = solve_c_subproblem(dm, &l_new, atoms, cfg.lambda, cfg, state)
            .map_err(|e| numeric(e.to_string()))?;
        inner_cap_hit |= !inner.converged;
        let inner_iterations = inner.iterations;
        state = inner.state;
        let s_new = sparse_term(atoms, &state.f);

        let ratio_l = (&l_new - &l).norm() / d_norm;
        let ratio_s = (&s_new - &s).norm() / d_norm;
        let residual_sq = (dm - &l_new - &s_new).norm_squared();
        let obj = cfg.tau * l_nuclear + cfg.lambda * l21_norm(&state.f) + residual_sq;
        if !obj.is_finite() || !ratio_l.is_finite() || !ratio_s.is_finite() {
            return Err(numeric("non-finite objective or iterate".into()));
        }
        trace.push(TraceRow {
            outer_iter: k,
            objective: obj,
            rank_l: svt.rank,
            nnz_cols_c: nonzero_columns(&state.f),
            ratio_l,
            ratio_s,
            inner_iterations,
        });
        log::debug!(
            "outer {k}: objective {obj:.6e} rank {} nnz {} ratios {ratio_l:.2e} {ratio_s:.2e} inner {inner_iterations}",
            svt.rank,
            nonzero_columns(&state.f)
        );
        l = l_new;
        s = s_new;
        if ratio_l <= cfg.epsilon && ratio_s <= cfg.epsilon {
            converged = true;
            break;
        }
    }
    if !converged {
        log::warn!("decomposition stopped at the {}-iteration cap", cfg.max_outer);
    }
    let residual = dm - &l - &s;
    Ok(Decomposition {
        l,
        c: state.f,
        s,
        residual,
        trace,
        converged,
        inner_cap_hit,
        height: d.height(),
        width: d.width(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
        DMatrix::from_fn(r, c, |_, _| rng.random_range(-1.0..1.0))
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig::default().validate().is_ok());
        let bad = [
            SolverConfig { tau: -1.0, ..Default::default() },
            SolverConfig { rho_growth: 1.0, ..Default::default() },
            SolverConfig { rho0: 0.0, ..Default::default() },
            SolverConfig { max_outer: 0, ..Default::default() },
            SolverConfig { epsilon: f64::NAN, ..Default::default() },
        ];
        for cfg in bad {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }

    #[test]
    fn default_schedule() {
        let cfg = SolverConfig::default();
        assert_eq!(cfg.rho0, 1e-4);
        assert_eq!(cfg.rho_growth, 1.1);
        assert_eq!(cfg.epsilon, 1e-5);
        assert_eq!(cfg.inner_tolerance, 1e-6);
        assert_eq!((cfg.max_outer, cfg.max_inner), (200, 500));
    }

    #[test]
    fn profiles() {
        assert_eq!(Profile::SyntheticStrategyOne.weights(), (0.8, 0.133));
        assert_eq!(Profile::RealStrategyOne.weights(), (3.0, 0.3));
        assert_eq!(Profile::SyntheticStrategyTwo.weights(), (0.05, 0.02));
        assert_eq!(Profile::RealStrategyTwo.weights(), (0.5, 0.2));
        for p in Profile::ALL {
            assert_eq!(Profile::from_name(p.name()), Some(p));
        }
        let ratio = |p: Profile| p.weights().0 / p.weights().1;
        assert!((ratio(Profile::SyntheticStrategyOne) - 6.0).abs() < 0.1);
        assert!((ratio(Profile::RealStrategyOne) - 10.0).abs() < 1e-12);
        assert!((ratio(Profile::SyntheticStrategyTwo) - 2.5).abs() < 1e-12);
        assert!((ratio(Profile::RealStrategyTwo) - 2.5).abs() < 1e-12);
    }

    #[test]
    fn l_step_tau_zero_is_identity() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random(&mut rng, 6, 4);
        let s = random(&mut rng, 6, 4);
        let l = solve_l_subproblem(&d, &s, 0.0, SvdMode::Full).unwrap().matrix;
        assert!((l - (&d - &s)).norm() < 1e-12);
    }

    #[test]
    fn l_step_diagonal() {
        let mut d = DMatrix::zeros(4, 3);
        d[(0, 0)] = 5.0;
        d[(1, 1)] = 1.0;
        let l = solve_l_subproblem(&d, &DMatrix::zeros(4, 3), 4.0, SvdMode::Full).unwrap();
        let mut expect = DMatrix::zeros(4, 3);
        expect[(0, 0)] = 3.0;
        assert!((l.matrix - expect).norm() < 1e-12);
        assert_eq!(l.rank, 1);
    }

    #[test]
    fn l_step_dominates_candidates() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let d = random(&mut rng, 7, 5);
        let s = random(&mut rng, 7, 5) * 0.3;
        let tau = 1.5;
        let f = |l: &DMatrix<f64>| (l - (&d - &s)).norm_squared() + tau * nuclear_norm(l).unwrap();
        let l = solve_l_subproblem(&d, &s, tau, SvdMode::Full).unwrap().matrix;
        assert!(f(&l) <= f(&(&d - &s)) + 1e-12);
        assert!(f(&l) <= f(&DMatrix::zeros(7, 5)) + 1e-12);
    }

    #[test]
    fn c_step_zero_data() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let d = random(&mut rng, 5, 4);
        let a = random(&mut rng, 4, 2);
        let out = solve_c_subproblem(&d, &d, &a, 0.1, &SolverConfig::default(), AdmmState::zeros(2, 5, 1e-4)).unwrap();
        assert!(out.converged);
        assert_eq!(out.coefficients(), &DMatrix::zeros(2, 5));
    }

    #[test]
    fn c_step_unregularised_square_dictionary() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = random(&mut rng, 3, 3) + DMatrix::identity(3, 3) * 2.0;
        let c_true = random(&mut rng, 3, 6);
        let d = (&a * &c_true).transpose();
        let l = DMatrix::zeros(6, 3);
        let out = solve_c_subproblem(&d, &l, &a, 0.0, &SolverConfig::default(), AdmmState::zeros(3, 6, 1e-4)).unwrap();
        assert!(out.converged);
        assert!(out.state.feasibility() <= 1e-6);
        assert!((out.coefficients() - c_true).norm() < 1e-3);
    }

    #[test]
    fn c_step_shape_errors() {
        let d = DMatrix::zeros(4, 3);
        let a = DMatrix::from_element(2, 1, 1.0);
        assert!(solve_c_subproblem(&d, &d, &a, 0.1, &SolverConfig::default(), AdmmState::zeros(1, 4, 1e-4)).is_err());
    }

    #[test]
    fn objective_cases() {
        let z = DMatrix::zeros(4, 3);
        let a = DMatrix::from_element(3, 2, 1.0);
        let c0 = DMatrix::zeros(2, 4);
        assert_eq!(objective(&z, &z, &c0, &a, 1.0, 1.0).unwrap(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let d = random(&mut rng, 4, 3);
        let v = objective(&d, &d, &c0, &a, 2.0, 5.0).unwrap();
        assert!((v - 2.0 * nuclear_norm(&d).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn objective_matches_direct_norms() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let d = random(&mut rng, 5, 3);
        let l = random(&mut rng, 5, 3);
        let a = random(&mut rng, 3, 2);
        let c = random(&mut rng, 2, 5);
        // nuclear norm via trace(sqrt(LᵀL)) from the symmetric eigendecomposition
        let eig = (l.transpose() * &l).symmetric_eigen();
        let nuc: f64 = eig.eigenvalues.iter().map(|v| v.max(0.0).sqrt()).sum();
        let l21: f64 = (0..5).map(|j| (c[(0, j)].powi(2) + c[(1, j)].powi(2)).sqrt()).sum();
        let mut fro = 0.0;
        for i in 0..5 {
            for b in 0..3 {
                let s: f64 = (0..2).map(|k| a[(b, k)] * c[(k, i)]).sum();
                fro += (d[(i, b)] - l[(i, b)] - s).powi(2);
            }
        }
        let expect = 0.7 * nuc + 0.3 * l21 + fro;
        let got = objective(&d, &l, &c, &a, 0.7, 0.3).unwrap();
        assert!((got - expect).abs() < 1e-10 * expect);
    }

    #[test]
    fn zero_scene_converges_immediately() {
        let d = SceneMatrix::new(DMatrix::zeros(6, 4), 2, 3).unwrap();
        let a = SpectralDictionary::new(DMatrix::from_element(4, 2, 0.5), vec!["a".into(), "b".into()]).unwrap();
        let out = decompose(&d, &a, &SolverConfig::default()).unwrap();
        assert!(out.converged);
        assert_eq!(out.iterations(), 1);
        assert_eq!(out.l, DMatrix::zeros(6, 4));
        assert_eq!(out.c, DMatrix::zeros(2, 6));
    }

    #[test]
    fn over_penalised_limit() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let dm = DMatrix::from_fn(12, 4, |_, _| rng.random_range(0.0..1.0));
        let big = dm.norm() * 12.0 * 10.0;
        let d = SceneMatrix::new(dm.clone(), 3, 4).unwrap();
        let a = SpectralDictionary::new(random(&mut rng, 4, 2), vec!["a".into(), "b".into()]).unwrap();
        let out = decompose(&d, &a, &SolverConfig::with_weights(big, big)).unwrap();
        assert_eq!(out.l, DMatrix::zeros(12, 4));
        assert_eq!(out.c, DMatrix::zeros(2, 12));
        assert!((out.residual - dm).norm() < 1e-12);
    }

    #[test]
    fn dimension_mismatch() {
        let d = SceneMatrix::new(DMatrix::zeros(4, 3), 2, 2).unwrap();
        let a = SpectralDictionary::new(DMatrix::from_element(4, 1, 1.0), vec!["a".into()]).unwrap();
        assert!(matches!(decompose(&d, &a, &SolverConfig::default()), Err(Error::Dimension(_))));
    }

    #[test]
    fn trace_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let rows = vec![TraceRow {
            outer_iter: 1,
            objective: 1.234567890123,
            rank_l: 3,
            nnz_cols_c: 7,
            ratio_l: 1e-3,
            ratio_s: 2.5e-7,
            inner_iterations: 0,
        }];
        let p = dir.path().join("trace.csv");
        write_trace_csv(&rows, &p).unwrap();
        assert_eq!(read_trace_csv(&p).unwrap(), rows);
        let text = fs::read_to_string(&p).unwrap();
        assert!(text.starts_with("outer_iter,objective,rank_L,nnz_cols_C,ratio_L,ratio_S\n"));
    }

    #[test]
    fn decomposition_identity_holds() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let u = random(&mut rng, 30, 2);
        let v = random(&mut rng, 2, 8);
        let dm = u * v + random(&mut rng, 30, 8) * 0.01;
        let d = SceneMatrix::new(dm.clone(), 5, 6).unwrap();
        let a = SpectralDictionary::new(random(&mut rng, 8, 3), vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let out = decompose(&d, &a, &SolverConfig::with_weights(0.5, 0.2)).unwrap();
        assert!((&out.l + &out.s + &out.residual - &dm).norm() < 1e-12);
        let s_direct = sparse_term(a.atoms(), &out.c);
        assert!((s_direct - &out.s).norm() < 1e-12);
    }
}
