//! Strict-priority cascade of QP levels.
//!
//! Level 1 is solved first. Every least-squares level `j` that has been
//! solved contributes the equality block `A_j x = A_j x*_j` to all later
//! levels, and the inequality blocks of levels `1..=k` are all active at
//! level `k`.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::linalg::{independent_rows, inf_norm, vconcat, vstack};
use crate::qp::{solve_qp, KktReport, QpError, QpProblem, QpSolution, QpStatus, SolverSettings};

/// Relative threshold for dropping propagated rows that add no information.
pub const DEPENDENT_ROW_TOL: f64 = 1e-10;

/// Residual below which an `Inaccurate` level solve is still accepted.
const ACCEPT_INACCURATE: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum HqpError {
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("hierarchy has no levels")]
    Empty,
    #[error("level {level} (`{label}`) uses a quadratic objective but is not the last level")]
    QuadraticNotTerminal { level: usize, label: String },
    #[error("level {level} (`{label}`) is infeasible: {detail}")]
    LevelInfeasible { level: usize, label: String, detail: String },
    #[error("level {level} (`{label}`) did not converge ({status:?})")]
    LevelNotConverged { level: usize, label: String, status: QpStatus },
}

#[derive(Debug, Clone, PartialEq)]
pub enum Objective {
    /// `min 1/2 ||A x - b||^2`
    LeastSquares { a: DMatrix<f64>, b: DVector<f64> },
    /// `min 1/2 x'Hx + g'x`
    Quadratic { h: DMatrix<f64>, g: DVector<f64> },
}

#[derive(Debug, Clone, PartialEq)]
pub struct TaskLevel {
    pub label: String,
    pub objective: Objective,
    pub ineq: Option<(DMatrix<f64>, DVector<f64>)>,
    pub eq: Option<(DMatrix<f64>, DVector<f64>)>,
}

impl TaskLevel {
    pub fn least_squares(label: impl Into<String>, a: DMatrix<f64>, b: DVector<f64>) -> Self {
        Self { label: label.into(), objective: Objective::LeastSquares { a, b }, ineq: None, eq: None }
    }

    pub fn quadratic(label: impl Into<String>, h: DMatrix<f64>, g: DVector<f64>) -> Self {
        Self { label: label.into(), objective: Objective::Quadratic { h, g }, ineq: None, eq: None }
    }

    pub fn with_ineq(mut self, c: DMatrix<f64>, d: DVector<f64>) -> Self {
        self.ineq = Some((c, d));
        self
    }

    pub fn with_eq(mut self, e: DMatrix<f64>, f: DVector<f64>) -> Self {
        self.eq = Some((e, f));
        self
    }

    /// Value of the level's own objective at `x`, including the constant
    /// `1/2 ||b||^2` for least-squares levels.
    pub fn objective_value(&self, x: &DVector<f64>) -> f64 {
        match &self.objective {
            Objective::LeastSquares { a, b } => 0.5 * (a * x - b).norm_squared(),
            Objective::Quadratic { h, g } => 0.5 * x.dot(&(h * x)) + g.dot(x),
        }
    }

    fn n_cols(&self) -> Vec<(&'static str, usize)> {
        let mut out = Vec::new();
        match &self.objective {
            Objective::LeastSquares { a, .. } => out.push(("A", a.ncols())),
            Objective::Quadratic { h, .. } => out.push(("H", h.ncols())),
        }
        if let Some((c, _)) = &self.ineq {
            out.push(("C", c.ncols()));
        }
        if let Some((e, _)) = &self.eq {
            out.push(("E", e.ncols()));
        }
        out
    }

    fn check(&self, s: usize, level: usize) -> Result<(), HqpError> {
        for (name, cols) in self.n_cols() {
            if cols != s {
                return Err(HqpError::DimensionMismatch(format!(
                    "level {level} (`{}`): {name} has {cols} columns, expected {s}",
                    self.label
                )));
            }
        }
        let rows_ok = match &self.objective {
            Objective::LeastSquares { a, b } => a.nrows() == b.len(),
            Objective::Quadratic { h, g } => h.nrows() == s && g.len() == s,
        } && self.ineq.as_ref().is_none_or(|(c, d)| c.nrows() == d.len())
            && self.eq.as_ref().is_none_or(|(e, f)| e.nrows() == f.len());
        if !rows_ok {
            return Err(HqpError::DimensionMismatch(format!(
                "level {level} (`{}`): row counts of a block and its right-hand side differ",
                self.label
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Hierarchy {
    pub decision_dim: usize,
    pub levels: Vec<TaskLevel>,
}

impl Hierarchy {
    pub fn new(decision_dim: usize, levels: Vec<TaskLevel>) -> Result<Self, HqpError> {
        let h = Self { decision_dim, levels };
        h.validate()?;
        Ok(h)
    }

    pub fn validate(&self) -> Result<(), HqpError> {
        if self.levels.is_empty() {
            return Err(HqpError::Empty);
        }
        let p = self.levels.len();
        for (i, level) in self.levels.iter().enumerate() {
            level.check(self.decision_dim, i + 1)?;
            if matches!(level.objective, Objective::Quadratic { .. }) && i + 1 != p {
                return Err(HqpError::QuadraticNotTerminal { level: i + 1, label: level.label.clone() });
            }
        }
        Ok(())
    }
}

/// Equality rows inherited from a solved level.
#[derive(Debug, Clone, PartialEq)]
pub struct PropagatedBlock {
    /// Level (1-based) that receives the block.
    pub into_level: usize,
    /// Level (1-based) the rows come from.
    pub from_level: usize,
    pub rows_offered: usize,
    pub rows_kept: usize,
}

#[derive(Debug, Clone)]
pub struct LevelResult {
    pub label: String,
    pub solution: QpSolution,
    /// The level's own objective at its solution.
    pub objective_value: f64,
    pub kkt: KktReport,
}

#[derive(Debug, Clone)]
pub struct CascadeResult {
    pub chi_star: DVector<f64>,
    pub per_level: Vec<LevelResult>,
    pub propagation_log: Vec<PropagatedBlock>,
}

impl CascadeResult {
    /// Largest drift `||A_j x* - A_j x*_j||_inf` over all least-squares levels.
    pub fn strictness(&self, h: &Hierarchy) -> f64 {
        h.levels
            .iter()
            .zip(&self.per_level)
            .filter_map(|(level, res)| match &level.objective {
                Objective::LeastSquares { a, .. } => Some(inf_norm(&(a * (&self.chi_star - &res.solution.x)))),
                Objective::Quadratic { .. } => None,
            })
            .fold(0.0, f64::max)
    }
}

/// Builds the QP of level `k` (1-based) given the solutions of levels `1..k`.
pub fn accumulate_constraints(h: &Hierarchy, k: usize, solved: &[DVector<f64>]) -> Result<QpProblem, HqpError> {
    accumulate(h, k, solved).map(|(qp, _)| qp)
}

fn accumulate(
    h: &Hierarchy,
    k: usize,
    solved: &[DVector<f64>],
) -> Result<(QpProblem, Vec<PropagatedBlock>), HqpError> {
    h.validate()?;
    let s = h.decision_dim;
    if k == 0 || k > h.levels.len() {
        return Err(HqpError::DimensionMismatch(format!("level index {k} outside 1..={}", h.levels.len())));
    }
    if solved.len() < k - 1 {
        return Err(HqpError::DimensionMismatch(format!(
            "level {k} needs {} prior solutions, got {}",
            k - 1,
            solved.len()
        )));
    }
    if let Some(bad) = solved.iter().find(|x| x.len() != s) {
        return Err(HqpError::DimensionMismatch(format!("prior solution has length {}, expected {s}", bad.len())));
    }

    let level = &h.levels[k - 1];
    let (hm, g) = match &level.objective {
        Objective::LeastSquares { a, b } => (a.tr_mul(a), -a.tr_mul(b)),
        Objective::Quadratic { h, g } => (h.clone(), g.clone()),
    };

    let mut c_blocks = Vec::new();
    let mut d_blocks = Vec::new();
    for lvl in &h.levels[..k] {
        if let Some((c, d)) = &lvl.ineq {
            c_blocks.push(c);
            d_blocks.push(d);
        }
    }

    // User equalities of levels 1..=k, then propagated ones. Only propagated
    // rows are screened for dependence; user rows go to the solver as given
    // so inconsistent data is still reported.
    let mut e_blocks: Vec<DMatrix<f64>> = Vec::new();
    let mut f_blocks: Vec<DVector<f64>> = Vec::new();
    for lvl in &h.levels[..k] {
        if let Some((e, f)) = &lvl.eq {
            e_blocks.push(e.clone());
            f_blocks.push(f.clone());
        }
    }
    let mut log = Vec::new();
    for (j, x_j) in solved.iter().enumerate().take(k - 1) {
        let Objective::LeastSquares { a, .. } = &h.levels[j].objective else { continue };
        if a.nrows() == 0 {
            continue;
        }
        let base_refs: Vec<&DMatrix<f64>> = e_blocks.iter().collect();
        let base = vstack(&base_refs, s);
        let n_base = base.nrows();
        let combined = vstack(&[&base, a], s);
        let kept: Vec<usize> = independent_rows(&combined, DEPENDENT_ROW_TOL)
            .into_iter()
            .filter(|&r| r >= n_base)
            .map(|r| r - n_base)
            .collect();
        let rhs = a * x_j;
        let mut e_new = DMatrix::zeros(kept.len(), s);
        let mut f_new = DVector::zeros(kept.len());
        for (i, &r) in kept.iter().enumerate() {
            e_new.row_mut(i).copy_from(&a.row(r));
            f_new[i] = rhs[r];
        }
        log.push(PropagatedBlock { into_level: k, from_level: j + 1, rows_offered: a.nrows(), rows_kept: kept.len() });
        e_blocks.push(e_new);
        f_blocks.push(f_new);
    }

    let c = vstack(&c_blocks, s);
    let d = vconcat(&d_blocks);
    let e_refs: Vec<&DMatrix<f64>> = e_blocks.iter().collect();
    let f_refs: Vec<&DVector<f64>> = f_blocks.iter().collect();
    let e = vstack(&e_refs, s);
    let f = vconcat(&f_refs);
    let qp = QpProblem::new(symmetrize(hm), g, c, d, e, f)?;
    Ok((qp, log))
}

fn symmetrize(m: DMatrix<f64>) -> DMatrix<f64> {
    (&m + m.transpose()) * 0.5
}

/// Solves the levels in priority order.
pub fn solve_hierarchy(h: &Hierarchy, settings: &SolverSettings) -> Result<CascadeResult, HqpError> {
    h.validate()?;
    let mut solved: Vec<DVector<f64>> = Vec::with_capacity(h.levels.len());
    let mut per_level = Vec::with_capacity(h.levels.len());
    let mut propagation_log = Vec::new();
    let mut level_settings = settings.clone();

    for (i, level) in h.levels.iter().enumerate() {
        let k = i + 1;
        let (qp, log) = accumulate(h, k, &solved)?;
        propagation_log.extend(log);
        if let Some(prev) = solved.last() {
            level_settings.initial_guess = Some(prev.clone());
        }
        let sol = solve_qp(&qp, &level_settings)?;
        match sol.status {
            QpStatus::Solved => {}
            QpStatus::Inaccurate if sol.kkt.max() <= ACCEPT_INACCURATE => {
                log::debug!("level {k} (`{}`) accepted with KKT residual {:e}", level.label, sol.kkt.max());
            }
            QpStatus::Infeasible => {
                let detail = sol.note.clone().unwrap_or_else(|| "no feasible point".into());
                return Err(HqpError::LevelInfeasible { level: k, label: level.label.clone(), detail });
            }
            status => {
                return Err(HqpError::LevelNotConverged { level: k, label: level.label.clone(), status });
            }
        }
        solved.push(sol.x.clone());
        per_level.push(LevelResult {
            label: level.label.clone(),
            objective_value: level.objective_value(&sol.x),
            kkt: sol.kkt,
            solution: sol,
        });
    }

    Ok(CascadeResult { chi_star: solved.pop().expect("at least one level"), per_level, propagation_log })
}
