//! Two-phase active-set solver.
//!
//! Phase one projects the starting point onto the feasible set with a dual
//! (Goldfarb-Idnani style) active-set method on `1/2 ||x - x0||^2`. That
//! subproblem is perfectly conditioned and either yields a feasible point or
//! a Farkas certificate. Phase two runs a primal active-set method on the
//! regularized objective from that point. Every working-set subproblem is
//! solved through a dense KKT system, so multipliers come out exactly.

use nalgebra::{DMatrix, DVector};

use super::{
    kkt_residuals, InfeasibilityCertificate, QpError, QpProblem, QpSolution, QpStatus, SolverSettings,
};
use crate::linalg::{independent_rows, inf_norm};

/// Relative threshold used to drop linearly dependent equality rows.
const DEPENDENT_ROW_TOL: f64 = 1e-10;
/// Multipliers above this (negative) value are treated as zero.
const DUAL_DROP_TOL: f64 = 1e-12;
const NEGLIGIBLE_STEP: f64 = 1e-12;
const REFINE_MAX_STEP: f64 = 1e-6;

/// Solves `problem` and certifies the result through [`kkt_residuals`].
pub fn solve_qp(problem: &QpProblem, settings: &SolverSettings) -> Result<QpSolution, QpError> {
    problem.check_shapes()?;
    problem.check_psd()?;
    settings.validate(problem.dim())?;

    let s = problem.dim();
    let eq_kept = independent_rows(&problem.e, DEPENDENT_ROW_TOL);
    let rows = RowSet::new(problem, &eq_kept);

    let x0 = settings.initial_guess.clone().unwrap_or_else(|| DVector::zeros(s));
    let phase_tol = settings.tol_primal * 1e-2;
    let mut iterations = 0;

    let (x, working) = match phase_one(&rows, x0, phase_tol, settings.max_iterations, &mut iterations) {
        PhaseOne::Feasible { x, working } => (x, working),
        PhaseOne::Infeasible(cert) => {
            return Ok(failed(problem, QpStatus::Infeasible, DVector::zeros(s), iterations, settings, Some(cert), None));
        }
        PhaseOne::MaxIterations(x) => {
            return Ok(failed(problem, QpStatus::MaxIterations, x, iterations, settings, None, None));
        }
    };

    // Equality rows discarded as dependent must still hold at the projection.
    if let Some(cert) = inconsistent_dropped_equality(problem, &eq_kept, &x, settings.tol_primal) {
        return Ok(failed(problem, QpStatus::Infeasible, x, iterations, settings, Some(cert), None));
    }

    let mut h_reg = problem.h.clone();
    for i in 0..s {
        h_reg[(i, i)] += settings.regularization;
    }

    let outcome = phase_two(&rows, &h_reg, &problem.g, x, working, settings, &mut iterations);
    let (x, working, mu) = match outcome {
        PhaseTwo::Optimal { x, working, mu } => refine(&rows, problem, x, working, mu, settings),
        PhaseTwo::Diverged(x) => {
            let note = format!(
                "iterate norm exceeded {:e}; problem is unbounded or numerically infeasible",
                settings.divergence_bound
            );
            return Ok(failed(problem, QpStatus::Infeasible, x, iterations, settings, None, Some(note)));
        }
        PhaseTwo::MaxIterations(x) => {
            return Ok(failed(problem, QpStatus::MaxIterations, x, iterations, settings, None, None));
        }
        PhaseTwo::Singular(x) => {
            let note = "working-set KKT system became singular".to_string();
            return Ok(failed(problem, QpStatus::Inaccurate, x, iterations, settings, None, Some(note)));
        }
    };

    let mut lambda = DVector::zeros(problem.n_ineq());
    let mut nu = DVector::zeros(problem.n_eq());
    let mut active_set = Vec::new();
    for (k, &j) in working.iter().enumerate() {
        if rows.is_eq(j) {
            nu[eq_kept[j]] = mu[k];
        } else {
            let i = j - rows.n_eq;
            lambda[i] = mu[k].max(0.0);
            active_set.push(i);
        }
    }
    active_set.sort_unstable();

    let kkt = kkt_residuals(problem, &x, &lambda, &nu)?;
    let status = if kkt.within(settings) { QpStatus::Solved } else { QpStatus::Inaccurate };
    Ok(QpSolution {
        objective: problem.objective(&x),
        x,
        lambda,
        nu,
        status,
        kkt,
        iterations,
        regularization: settings.regularization,
        active_set,
        certificate: None,
        note: None,
    })
}

fn failed(
    problem: &QpProblem,
    status: QpStatus,
    x: DVector<f64>,
    iterations: usize,
    settings: &SolverSettings,
    certificate: Option<InfeasibilityCertificate>,
    note: Option<String>,
) -> QpSolution {
    let lambda = DVector::zeros(problem.n_ineq());
    let nu = DVector::zeros(problem.n_eq());
    let kkt = kkt_residuals(problem, &x, &lambda, &nu).unwrap_or_default();
    let note = note.or_else(|| certificate.as_ref().map(|c| c.description.clone()));
    QpSolution {
        objective: problem.objective(&x),
        x,
        lambda,
        nu,
        status,
        kkt,
        iterations,
        regularization: settings.regularization,
        active_set: Vec::new(),
        certificate,
        note,
    }
}

/// Kept equality rows followed by all inequality rows, as one matrix.
struct RowSet {
    a: DMatrix<f64>,
    b: DVector<f64>,
    n_eq: usize,
    eq_kept: Vec<usize>,
}

impl RowSet {
    fn new(problem: &QpProblem, eq_kept: &[usize]) -> Self {
        let s = problem.dim();
        let n_eq = eq_kept.len();
        let m = n_eq + problem.n_ineq();
        let mut a = DMatrix::zeros(m, s);
        let mut b = DVector::zeros(m);
        for (k, &i) in eq_kept.iter().enumerate() {
            a.row_mut(k).copy_from(&problem.e.row(i));
            b[k] = problem.f[i];
        }
        for i in 0..problem.n_ineq() {
            a.row_mut(n_eq + i).copy_from(&problem.c.row(i));
            b[n_eq + i] = problem.d[i];
        }
        Self { a, b, n_eq, eq_kept: eq_kept.to_vec() }
    }

    fn len(&self) -> usize {
        self.b.len()
    }

    fn is_eq(&self, j: usize) -> bool {
        j < self.n_eq
    }

    fn row_dot(&self, j: usize, x: &DVector<f64>) -> f64 {
        self.a.row(j).iter().zip(x.iter()).map(|(a, b)| a * b).sum()
    }

    fn row(&self, j: usize) -> DVector<f64> {
        self.a.row(j).transpose()
    }

    /// Whether row `j` lies in the span of the rows in `working`.
    fn depends_on(&self, j: usize, working: &[usize]) -> bool {
        if working.is_empty() {
            return false;
        }
        let s = self.a.ncols();
        let mut m = DMatrix::zeros(s, working.len() + 1);
        for (c, &w) in working.iter().enumerate() {
            m.column_mut(c).copy_from(&self.a.row(w).transpose());
        }
        m.column_mut(working.len()).copy_from(&self.a.row(j).transpose());
        for mut col in m.column_iter_mut() {
            let n = col.norm();
            if n > 0.0 {
                col /= n;
            }
        }
        m.singular_values().min() <= 1e-9
    }

    /// Solves `[H A_W'; A_W 0] [p; mu] = [top; bottom]`.
    fn kkt_solve(
        &self,
        h: &DMatrix<f64>,
        working: &[usize],
        top: &DVector<f64>,
        bottom: &DVector<f64>,
    ) -> Option<(DVector<f64>, DVector<f64>)> {
        let s = h.nrows();
        let w = working.len();
        let mut k = DMatrix::zeros(s + w, s + w);
        k.view_mut((0, 0), (s, s)).copy_from(h);
        for (c, &j) in working.iter().enumerate() {
            for i in 0..s {
                let v = self.a[(j, i)];
                k[(s + c, i)] = v;
                k[(i, s + c)] = v;
            }
        }
        let mut rhs = DVector::zeros(s + w);
        rhs.rows_mut(0, s).copy_from(top);
        rhs.rows_mut(s, w).copy_from(bottom);
        let sol = k.lu().solve(&rhs)?;
        if sol.iter().any(|v| !v.is_finite()) {
            return None;
        }
        Some((sol.rows(0, s).into_owned(), sol.rows(s, w).into_owned()))
    }
}

enum PhaseOne {
    Feasible { x: DVector<f64>, working: Vec<usize> },
    Infeasible(InfeasibilityCertificate),
    MaxIterations(DVector<f64>),
}

/// Dual active-set projection of `x0` onto the feasible set.
fn phase_one(rows: &RowSet, x0: DVector<f64>, tol: f64, max_iter: usize, iterations: &mut usize) -> PhaseOne {
    let s = x0.len();
    let ident = DMatrix::identity(s, s);
    let mut working: Vec<usize> = (0..rows.n_eq).collect();
    let mut x = x0.clone();
    let mut mu: Vec<f64> = vec![0.0; rows.n_eq];

    if rows.n_eq > 0 {
        // min 1/2||x - x0||^2 s.t. A_E x = b_E  =>  x + A_E' mu = x0
        let bottom = DVector::from_iterator(rows.n_eq, (0..rows.n_eq).map(|j| rows.b[j]));
        *iterations += 1;
        match rows.kkt_solve(&ident, &working, &x0, &bottom) {
            Some((xe, me)) => {
                x = xe;
                mu = me.iter().copied().collect();
            }
            None => return PhaseOne::MaxIterations(x),
        }
    }

    loop {
        // most violated inequality outside the working set
        let mut add = None;
        let mut worst = tol;
        for j in rows.n_eq..rows.len() {
            if working.contains(&j) {
                continue;
            }
            let v = rows.row_dot(j, &x) - rows.b[j];
            if v > worst {
                worst = v;
                add = Some(j);
            }
        }
        let Some(p) = add else {
            return PhaseOne::Feasible { x, working };
        };

        let a_p = rows.row(p);
        let a_norm = a_p.norm();
        let neg_a = -&a_p;
        let mut u = 0.0;
        loop {
            *iterations += 1;
            if *iterations > max_iter {
                return PhaseOne::MaxIterations(x);
            }
            let zeros = DVector::zeros(working.len());
            let Some((z, r)) = rows.kkt_solve(&ident, &working, &neg_a, &zeros) else {
                return PhaseOne::MaxIterations(x);
            };
            let dependent = z.norm() <= 1e-10 * a_norm;

            let mut t1 = f64::INFINITY;
            let mut drop = None;
            for (k, &j) in working.iter().enumerate() {
                if !rows.is_eq(j) && r[k] < 0.0 {
                    let t = mu[k] / -r[k];
                    if t < t1 {
                        t1 = t;
                        drop = Some(k);
                    }
                }
            }
            let violation = rows.row_dot(p, &x) - rows.b[p];
            let t2 = if dependent { f64::INFINITY } else { violation / -a_p.dot(&z) };

            if t1.is_infinite() && t2.is_infinite() {
                return PhaseOne::Infeasible(farkas_certificate(rows, &working, &r, p));
            }
            if t2 <= t1 {
                x.axpy(t2, &z, 1.0);
                for (m, rk) in mu.iter_mut().zip(r.iter()) {
                    *m += t2 * rk;
                }
                working.push(p);
                mu.push(u + t2);
                break;
            }
            if !dependent {
                x.axpy(t1, &z, 1.0);
            }
            for (m, rk) in mu.iter_mut().zip(r.iter()) {
                *m += t1 * rk;
            }
            u += t1;
            let k = drop.expect("finite t1 has a blocking multiplier");
            working.remove(k);
            mu.remove(k);
        }
    }
}

/// Builds the certificate from the dual ray `(r, 1)` over `working + {p}`.
fn farkas_certificate(rows: &RowSet, working: &[usize], r: &DVector<f64>, p: usize) -> InfeasibilityCertificate {
    let s = rows.a.ncols();
    let n_ineq = rows.len() - rows.n_eq;
    let mut ineq_weights = DVector::zeros(n_ineq);
    let mut eq_weights_kept = DVector::zeros(rows.n_eq);
    let mut combo = DVector::zeros(s);
    let mut rhs = 0.0;
    let mut add = |j: usize, w: f64, ineq: &mut DVector<f64>, eq: &mut DVector<f64>| {
        if rows.is_eq(j) {
            eq[j] += w;
        } else {
            ineq[j - rows.n_eq] += w.max(0.0);
        }
        combo.axpy(w, &rows.row(j), 1.0);
        rhs += w * rows.b[j];
    };
    for (k, &j) in working.iter().enumerate() {
        add(j, r[k], &mut ineq_weights, &mut eq_weights_kept);
    }
    add(p, 1.0, &mut ineq_weights, &mut eq_weights_kept);

    let n_eq_total = rows.eq_kept.iter().copied().max().map_or(0, |m| m + 1);
    let mut eq_weights = DVector::zeros(n_eq_total);
    for (k, &i) in rows.eq_kept.iter().enumerate() {
        eq_weights[i] = eq_weights_kept[k];
    }
    let description = format!(
        "inequality row {} cannot be satisfied together with the current working set: \
         a nonnegative row combination sums to zero while its right-hand side is {:e}",
        p - rows.n_eq,
        rhs
    );
    InfeasibilityCertificate {
        ineq_weights,
        eq_weights,
        rhs_combination: rhs,
        row_combination_norm: inf_norm(&combo),
        description,
    }
}

/// A dropped (dependent) equality row that the projected point violates
/// proves the equality block inconsistent.
fn inconsistent_dropped_equality(
    problem: &QpProblem,
    eq_kept: &[usize],
    x: &DVector<f64>,
    tol: f64,
) -> Option<InfeasibilityCertificate> {
    for i in 0..problem.n_eq() {
        if eq_kept.contains(&i) {
            continue;
        }
        let row = problem.e.row(i);
        let resid = (row * x)[0] - problem.f[i];
        if resid.abs() <= tol {
            continue;
        }
        // row_i = sum_k c_k row_k over kept rows
        let kept = DMatrix::from_fn(eq_kept.len(), problem.dim(), |r, c| problem.e[(eq_kept[r], c)]);
        let gram = &kept * kept.transpose();
        let coeffs = gram.lu().solve(&(&kept * row.transpose())).unwrap_or_else(|| DVector::zeros(eq_kept.len()));
        let sign = resid.signum();
        let mut eq_weights = DVector::zeros(problem.n_eq());
        eq_weights[i] = sign;
        for (k, &r) in eq_kept.iter().enumerate() {
            eq_weights[r] = -sign * coeffs[k];
        }
        let combo = problem.e.tr_mul(&eq_weights);
        let rhs = eq_weights.dot(&problem.f);
        return Some(InfeasibilityCertificate {
            ineq_weights: DVector::zeros(problem.n_ineq()),
            eq_weights,
            rhs_combination: rhs,
            row_combination_norm: inf_norm(&combo),
            description: format!("equality row {i} is a combination of other rows with an inconsistent right-hand side"),
        });
    }
    None
}

enum PhaseTwo {
    Optimal { x: DVector<f64>, working: Vec<usize>, mu: DVector<f64> },
    Diverged(DVector<f64>),
    MaxIterations(DVector<f64>),
    Singular(DVector<f64>),
}

/// Primal active-set iterations from a feasible point.
fn phase_two(
    rows: &RowSet,
    h: &DMatrix<f64>,
    g: &DVector<f64>,
    mut x: DVector<f64>,
    mut working: Vec<usize>,
    settings: &SolverSettings,
    iterations: &mut usize,
) -> PhaseTwo {
    loop {
        *iterations += 1;
        if *iterations > settings.max_iterations {
            return PhaseTwo::MaxIterations(x);
        }
        let grad = h * &x + g;
        let drift = DVector::from_iterator(
            working.len(),
            working.iter().map(|&j| rows.b[j] - rows.row_dot(j, &x)),
        );
        let Some((p, mu)) = rows.kkt_solve(h, &working, &(-grad), &drift) else {
            return PhaseTwo::Singular(x);
        };

        let p_norm = p.norm();
        // a roundoff-sized step must not pull in degenerate constraints
        let negligible = p_norm <= NEGLIGIBLE_STEP * (1.0 + inf_norm(&x));
        let mut candidates = Vec::new();
        for j in rows.n_eq..rows.len() {
            if negligible || working.contains(&j) {
                continue;
            }
            let ap = rows.row_dot(j, &p);
            if ap <= 1e-14 * p_norm * rows.a.row(j).norm() {
                continue;
            }
            let slack = (rows.b[j] - rows.row_dot(j, &x)).max(0.0);
            let t = slack / ap;
            if t < 1.0 {
                candidates.push((t, j));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
        let mut alpha = 1.0;
        let mut block = None;
        // rows spanned by the working set only block through roundoff
        for &(t, j) in &candidates {
            if !rows.depends_on(j, &working) {
                alpha = t;
                block = Some(j);
                break;
            }
        }
        if let Some(j) = block {
            x.axpy(alpha, &p, 1.0);
            working.push(j);
            continue;
        }

        x += &p;
        if inf_norm(&x) > settings.divergence_bound {
            return PhaseTwo::Diverged(x);
        }

        let mut most_negative = -DUAL_DROP_TOL;
        let mut drop = None;
        for (k, &j) in working.iter().enumerate() {
            if !rows.is_eq(j) && mu[k] < most_negative {
                most_negative = mu[k];
                drop = Some(k);
            }
        }
        match drop {
            Some(k) => {
                working.remove(k);
            }
            None => return PhaseTwo::Optimal { x, working, mu },
        }
    }
}

/// One Newton step on the unregularized KKT system of the final working set.
/// Removes the bias of the regularization when `H` is nonsingular on it.
fn refine(
    rows: &RowSet,
    problem: &QpProblem,
    x: DVector<f64>,
    working: Vec<usize>,
    mu: DVector<f64>,
    settings: &SolverSettings,
) -> (DVector<f64>, Vec<usize>, DVector<f64>) {
    let grad = &problem.h * &x + &problem.g;
    let drift = DVector::from_iterator(working.len(), working.iter().map(|&j| rows.b[j] - rows.row_dot(j, &x)));
    let Some((p, mu_new)) = rows.kkt_solve(&problem.h, &working, &(-grad), &drift) else {
        return (x, working, mu);
    };
    if p.norm() > REFINE_MAX_STEP * (1.0 + x.norm()) {
        return (x, working, mu);
    }
    let candidate = &x + &p;
    let feasible = (rows.n_eq..rows.len()).all(|j| rows.row_dot(j, &candidate) <= rows.b[j] + settings.tol_primal * 1e-2);
    let signs_kept = working.iter().zip(mu_new.iter()).all(|(&j, m)| rows.is_eq(j) || *m >= -DUAL_DROP_TOL);
    if feasible && signs_kept {
        (candidate, working, mu_new)
    } else {
        (x, working, mu)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn settings() -> SolverSettings {
        SolverSettings::default()
    }

    #[test]
    fn one_dimensional_active_bound() {
        // min 1/2 x^2 s.t. x >= 1
        let p = QpProblem::unconstrained(DMatrix::identity(1, 1), DVector::zeros(1))
            .unwrap()
            .with_inequalities(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, -1.0))
            .unwrap();
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.lambda[0], 1.0, epsilon = 1e-9);
        assert_eq!(sol.active_set, vec![0]);
    }

    #[test]
    fn symmetric_equality_projection() {
        let p = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2))
            .unwrap()
            .with_equalities(DMatrix::from_row_slice(1, 2, &[1.0, 1.0]), DVector::from_element(1, 2.0))
            .unwrap();
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.x[1], 1.0, epsilon = 1e-9);
        assert_relative_eq!(sol.nu[0], -1.0, epsilon = 1e-9);
    }

    #[test]
    fn detects_infeasible_box() {
        // x <= 0 and x >= 1
        let p = QpProblem::unconstrained(DMatrix::identity(1, 1), DVector::zeros(1))
            .unwrap()
            .with_inequalities(DMatrix::from_column_slice(2, 1, &[1.0, -1.0]), DVector::from_vec(vec![0.0, -1.0]))
            .unwrap();
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
        let cert = sol.certificate.expect("certificate");
        assert!(cert.rhs_combination < 0.0);
        assert!(cert.row_combination_norm < 1e-12);
        assert!(cert.ineq_weights.iter().all(|w| *w >= 0.0));
    }

    #[test]
    fn detects_inconsistent_dependent_equalities() {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let f = DVector::from_vec(vec![1.0, 3.0]);
        let p = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2))
            .unwrap()
            .with_equalities(e, f)
            .unwrap();
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
        let cert = sol.certificate.unwrap();
        assert!(cert.rhs_combination < 0.0);
        assert!(cert.row_combination_norm < 1e-9);
    }

    #[test]
    fn consistent_dependent_equalities_are_fine() {
        let e = DMatrix::from_row_slice(2, 2, &[1.0, 1.0, 2.0, 2.0]);
        let f = DVector::from_vec(vec![2.0, 4.0]);
        let p = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::zeros(2))
            .unwrap()
            .with_equalities(e, f)
            .unwrap();
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-9);
    }

    #[test]
    fn singular_least_squares_objective_gets_min_norm_point() {
        // 1/2 (x0 + x1 - 2)^2, no constraints
        let a = DMatrix::from_row_slice(1, 2, &[1.0, 1.0]);
        let h = a.transpose() * &a;
        let g = -a.transpose() * DVector::from_element(1, 2.0);
        let p = QpProblem::unconstrained(h, g).unwrap();
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.x[0], 1.0, epsilon = 1e-6);
        assert_relative_eq!(sol.x[1], 1.0, epsilon = 1e-6);
    }

    #[test]
    fn linear_objective_bounded_by_constraints() {
        // min x s.t. x >= -3: H = 0 makes the regularized step enormous
        let p = QpProblem::unconstrained(DMatrix::zeros(1, 1), DVector::from_element(1, 1.0))
            .unwrap()
            .with_inequalities(DMatrix::from_element(1, 1, -1.0), DVector::from_element(1, 3.0))
            .unwrap();
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Solved);
        assert_relative_eq!(sol.x[0], -3.0, epsilon = 1e-9);
        assert_relative_eq!(sol.lambda[0], 1.0, epsilon = 1e-8);
    }

    #[test]
    fn unbounded_linear_objective_diverges() {
        let p = QpProblem::unconstrained(DMatrix::zeros(1, 1), DVector::from_element(1, 1.0)).unwrap();
        let sol = solve_qp(&p, &settings()).unwrap();
        assert_eq!(sol.status, QpStatus::Infeasible);
        assert!(sol.note.is_some());
    }

    #[test]
    fn rejects_nonconvex_objective() {
        let h = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, -1.0]);
        let p = QpProblem::unconstrained(h, DVector::zeros(2)).unwrap();
        assert_eq!(solve_qp(&p, &settings()).unwrap_err(), QpError::NotConvex);
    }

    #[test]
    fn rejects_nonpositive_tolerance() {
        let p = QpProblem::unconstrained(DMatrix::identity(1, 1), DVector::zeros(1)).unwrap();
        let s = SolverSettings { tol_primal: 0.0, ..settings() };
        assert!(matches!(solve_qp(&p, &s), Err(QpError::InvalidSettings(_))));
    }

    #[test]
    fn iteration_cap_is_reported() {
        let p = QpProblem::unconstrained(DMatrix::identity(2, 2), DVector::from_vec(vec![-5.0, -5.0]))
            .unwrap()
            .with_inequalities(DMatrix::identity(2, 2), DVector::from_vec(vec![1.0, 1.0]))
            .unwrap();
        let s = SolverSettings { max_iterations: 1, ..settings() };
        let sol = solve_qp(&p, &s).unwrap();
        assert_eq!(sol.status, QpStatus::MaxIterations);
    }
}
