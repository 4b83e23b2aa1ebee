//! Dense convex quadratic programming.
//!
//! Problems have the form
//!
//! ```text
//!     minimize    1/2 x' H x + g' x
//!     subject to  C x <= d
//!                 E x  = f
//! ```
//!
//! with `H` symmetric positive semidefinite. [`solve_qp`] returns a
//! primal-dual pair together with a KKT residual report, so every result can
//! be checked independently of how it was computed.

mod solver;
mod text;

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

pub use solver::solve_qp;
pub use text::{read_problem, write_problem};

/// Symmetry tolerance on `H`, elementwise.
pub const SYMMETRY_TOL: f64 = 1e-12;
/// Smallest eigenvalue accepted for `H` before regularization.
pub const PSD_TOL: f64 = 1e-10;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum QpError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("objective matrix is not symmetric (max asymmetry {0:e})")]
    NonSymmetric(f64),
    #[error("objective matrix is not positive semidefinite")]
    NotConvex,
    #[error("invalid solver settings: {0}")]
    InvalidSettings(String),
    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

/// One convex QP.
#[derive(Debug, Clone, PartialEq)]
pub struct QpProblem {
    /// Objective curvature, `s x s`.
    pub h: DMatrix<f64>,
    /// Linear objective term, length `s`.
    pub g: DVector<f64>,
    /// Inequality rows, `n_i x s`.
    pub c: DMatrix<f64>,
    pub d: DVector<f64>,
    /// Equality rows, `n_e x s`.
    pub e: DMatrix<f64>,
    pub f: DVector<f64>,
}

impl QpProblem {
    /// Builds a problem and checks shapes and symmetry.
    pub fn new(
        h: DMatrix<f64>,
        g: DVector<f64>,
        c: DMatrix<f64>,
        d: DVector<f64>,
        e: DMatrix<f64>,
        f: DVector<f64>,
    ) -> Result<Self, QpError> {
        let p = Self { h, g, c, d, e, f };
        p.check_shapes()?;
        p.check_symmetry()?;
        Ok(p)
    }

    /// Unconstrained problem with objective `(h, g)`.
    pub fn unconstrained(h: DMatrix<f64>, g: DVector<f64>) -> Result<Self, QpError> {
        let s = g.len();
        Self::new(
            h,
            g,
            DMatrix::zeros(0, s),
            DVector::zeros(0),
            DMatrix::zeros(0, s),
            DVector::zeros(0),
        )
    }

    pub fn with_inequalities(mut self, c: DMatrix<f64>, d: DVector<f64>) -> Result<Self, QpError> {
        self.c = c;
        self.d = d;
        self.check_shapes()?;
        Ok(self)
    }

    pub fn with_equalities(mut self, e: DMatrix<f64>, f: DVector<f64>) -> Result<Self, QpError> {
        self.e = e;
        self.f = f;
        self.check_shapes()?;
        Ok(self)
    }

    /// Decision dimension `s`.
    pub fn dim(&self) -> usize {
        self.g.len()
    }

    pub fn n_ineq(&self) -> usize {
        self.c.nrows()
    }

    pub fn n_eq(&self) -> usize {
        self.e.nrows()
    }

    /// `1/2 x' H x + g' x`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.h * x)) + self.g.dot(x)
    }

    pub(crate) fn check_shapes(&self) -> Result<(), QpError> {
        let s = self.g.len();
        let mismatch = |what: &str| Err(QpError::DimensionMismatch(what.to_string()));
        if self.h.nrows() != s || self.h.ncols() != s {
            return mismatch(&format!("H is {}x{}, expected {s}x{s}", self.h.nrows(), self.h.ncols()));
        }
        if self.c.ncols() != s {
            return mismatch(&format!("C has {} columns, expected {s}", self.c.ncols()));
        }
        if self.c.nrows() != self.d.len() {
            return mismatch(&format!("C has {} rows but d has {} entries", self.c.nrows(), self.d.len()));
        }
        if self.e.ncols() != s {
            return mismatch(&format!("E has {} columns, expected {s}", self.e.ncols()));
        }
        if self.e.nrows() != self.f.len() {
            return mismatch(&format!("E has {} rows but f has {} entries", self.e.nrows(), self.f.len()));
        }
        Ok(())
    }

    fn check_symmetry(&self) -> Result<(), QpError> {
        let s = self.h.nrows();
        let mut worst = 0.0_f64;
        for i in 0..s {
            for j in (i + 1)..s {
                worst = worst.max((self.h[(i, j)] - self.h[(j, i)]).abs());
            }
        }
        if worst > SYMMETRY_TOL {
            return Err(QpError::NonSymmetric(worst));
        }
        Ok(())
    }

    /// Cholesky probe: `H + 2*PSD_TOL*I` factors iff the smallest eigenvalue
    /// of `H` is (numerically) no lower than `-PSD_TOL`.
    pub(crate) fn check_psd(&self) -> Result<(), QpError> {
        let s = self.h.nrows();
        if s == 0 {
            return Ok(());
        }
        let shifted = &self.h + DMatrix::identity(s, s) * (2.0 * PSD_TOL);
        match shifted.cholesky() {
            Some(_) => Ok(()),
            None => Err(QpError::NotConvex),
        }
    }
}

/// Termination state of a solve.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QpStatus {
    /// KKT residuals certified below the configured tolerances.
    Solved,
    MaxIterations,
    /// A Farkas certificate was found, or the iterates diverged.
    Infeasible,
    /// The active-set iteration terminated but the final KKT check failed.
    Inaccurate,
}

/// KKT residuals of a candidate primal-dual point.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct KktReport {
    /// `||H x + g + C' lambda + E' nu||_inf`
    pub stationarity: f64,
    /// `max(0, max(C x - d), ||E x - f||_inf)`
    pub primal_infeasibility: f64,
    /// `max_i |lambda_i (C x - d)_i|`
    pub complementarity: f64,
}

impl KktReport {
    pub fn within(&self, settings: &SolverSettings) -> bool {
        self.stationarity <= settings.tol_stationarity
            && self.primal_infeasibility <= settings.tol_primal
            && self.complementarity <= settings.tol_complementarity
    }

    pub fn max(&self) -> f64 {
        self.stationarity.max(self.primal_infeasibility).max(self.complementarity)
    }
}

/// Solver knobs. Defaults: tolerances 1e-8, 4000 iterations, `1e-10 I`
/// regularization, divergence bound 1e6.
#[derive(Debug, Clone, PartialEq)]
pub struct SolverSettings {
    pub tol_stationarity: f64,
    pub tol_primal: f64,
    pub tol_complementarity: f64,
    pub max_iterations: usize,
    /// Added to the diagonal of `H` before any factorization.
    pub regularization: f64,
    /// Iterates with a larger infinity norm are reported as infeasible.
    pub divergence_bound: f64,
    /// Starting point for the feasibility phase.
    pub initial_guess: Option<DVector<f64>>,
}

impl Default for SolverSettings {
    fn default() -> Self {
        Self {
            tol_stationarity: 1e-8,
            tol_primal: 1e-8,
            tol_complementarity: 1e-8,
            max_iterations: 4000,
            regularization: 1e-10,
            divergence_bound: 1e6,
            initial_guess: None,
        }
    }
}

impl SolverSettings {
    pub(crate) fn validate(&self, dim: usize) -> Result<(), QpError> {
        let tols = [self.tol_stationarity, self.tol_primal, self.tol_complementarity];
        if tols.iter().any(|t| !(*t > 0.0)) {
            return Err(QpError::InvalidSettings("tolerances must be positive".into()));
        }
        if !(self.regularization >= 0.0) {
            return Err(QpError::InvalidSettings("regularization must be nonnegative".into()));
        }
        if let Some(x0) = &self.initial_guess {
            if x0.len() != dim {
                return Err(QpError::DimensionMismatch(format!(
                    "initial guess has length {}, expected {dim}",
                    x0.len()
                )));
            }
        }
        Ok(())
    }
}

/// Nonnegative combination of constraint rows proving infeasibility:
/// `C' y_i + E' y_e = 0` with `y_i >= 0` and `d' y_i + f' y_e < 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct InfeasibilityCertificate {
    pub ineq_weights: DVector<f64>,
    pub eq_weights: DVector<f64>,
    /// `d' y_i + f' y_e`, negative for a valid certificate.
    pub rhs_combination: f64,
    /// `||C' y_i + E' y_e||_inf`, zero up to roundoff.
    pub row_combination_norm: f64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct QpSolution {
    pub x: DVector<f64>,
    /// Inequality multipliers, nonnegative.
    pub lambda: DVector<f64>,
    /// Equality multipliers.
    pub nu: DVector<f64>,
    pub status: QpStatus,
    pub kkt: KktReport,
    pub objective: f64,
    pub iterations: usize,
    /// Diagonal shift that was added to `H`.
    pub regularization: f64,
    /// Inequality rows in the final working set.
    pub active_set: Vec<usize>,
    pub certificate: Option<InfeasibilityCertificate>,
    /// Human-readable reason for a non-`Solved` status.
    pub note: Option<String>,
}

/// KKT residuals of `(x, lambda, nu)` for `problem`. Pure.
pub fn kkt_residuals(
    problem: &QpProblem,
    x: &DVector<f64>,
    lambda: &DVector<f64>,
    nu: &DVector<f64>,
) -> Result<KktReport, QpError> {
    problem.check_shapes()?;
    let s = problem.dim();
    if x.len() != s {
        return Err(QpError::DimensionMismatch(format!("x has length {}, expected {s}", x.len())));
    }
    if lambda.len() != problem.n_ineq() {
        return Err(QpError::DimensionMismatch(format!(
            "lambda has length {}, expected {}",
            lambda.len(),
            problem.n_ineq()
        )));
    }
    if nu.len() != problem.n_eq() {
        return Err(QpError::DimensionMismatch(format!(
            "nu has length {}, expected {}",
            nu.len(),
            problem.n_eq()
        )));
    }
    let grad = &problem.h * x + &problem.g + problem.c.tr_mul(lambda) + problem.e.tr_mul(nu);
    let stationarity = crate::linalg::inf_norm(&grad);

    let ineq = &problem.c * x - &problem.d;
    let eq = &problem.e * x - &problem.f;
    let primal_infeasibility = ineq
        .iter()
        .copied()
        .chain(eq.iter().map(|v| v.abs()))
        .fold(0.0_f64, f64::max);
    let complementarity = lambda
        .iter()
        .zip(ineq.iter())
        .map(|(l, r)| (l * r).abs())
        .fold(0.0_f64, f64::max);
    Ok(KktReport { stationarity, primal_infeasibility, complementarity })
}
