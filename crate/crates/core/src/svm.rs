//! Linear binary SVM on precomputed feature vectors.
//!
//! Three trainers share the primal `1/2 ||w||^2 + C sum loss(1 - y (w'x + b))`
//! with an unregularized bias:
//! * `L2` (squared hinge) by generalized Newton with backtracking,
//! * `L1` (hinge) by sequential minimal optimization on the dual,
//! * `ConstrainedQp`, the explicit slack formulation handed to [`crate::qp`].

use std::fmt::Write as _;
use std::io::Read;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::qp::{solve_qp, QpError, QpProblem, QpStatus, SolverSettings};

#[derive(Debug, Error)]
pub enum SvmError {
    #[error("training data contains a single class")]
    SingleClass,
    #[error("C must be positive, got {0}")]
    NonPositiveC(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("training did not converge: {0}")]
    NotConverged(String),
    #[error(transparent)]
    Qp(#[from] QpError),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SvmVariant {
    L1,
    L2,
    ConstrainedQp,
}

impl std::str::FromStr for SvmVariant {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(Self::L1),
            "l2" => Ok(Self::L2),
            "qp" | "constrained" | "constrainedqp" | "constrained-qp" => Ok(Self::ConstrainedQp),
            other => Err(format!("unknown SVM variant `{other}` (expected l1, l2 or qp)")),
        }
    }
}

/// Surface facing the camera. `Drilled` is the positive class.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Surface {
    Smooth,
    Drilled,
}

impl Surface {
    pub fn label(self) -> f64 {
        match self {
            Self::Drilled => 1.0,
            Self::Smooth => -1.0,
        }
    }

    pub fn from_label(y: f64) -> Self {
        if y >= 0.0 {
            Self::Drilled
        } else {
            Self::Smooth
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LabeledSet {
    pub x: Vec<DVector<f64>>,
    /// Labels in `{+1, -1}`.
    pub y: Vec<f64>,
}

impl LabeledSet {
    pub fn new(x: Vec<DVector<f64>>, y: Vec<f64>) -> Result<Self, SvmError> {
        let set = Self { x, y };
        set.check()?;
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.first().map_or(0, |v| v.len())
    }

    fn check(&self) -> Result<(), SvmError> {
        if self.x.len() != self.y.len() {
            return Err(SvmError::DimensionMismatch(format!("{} features for {} labels", self.x.len(), self.y.len())));
        }
        let d = self.dim();
        if let Some(i) = self.x.iter().position(|v| v.len() != d) {
            return Err(SvmError::DimensionMismatch(format!("instance {i} has dimension {}, expected {d}", self.x[i].len())));
        }
        if let Some(i) = self.y.iter().position(|&y| y != 1.0 && y != -1.0) {
            return Err(SvmError::DimensionMismatch(format!("label of instance {i} is {}, expected +1 or -1", self.y[i])));
        }
        Ok(())
    }

    fn check_trainable(&self) -> Result<(), SvmError> {
        self.check()?;
        let pos = self.y.iter().any(|&y| y > 0.0);
        let neg = self.y.iter().any(|&y| y < 0.0);
        if !(pos && neg) {
            return Err(SvmError::SingleClass);
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LinearModel {
    pub w: DVector<f64>,
    pub b: f64,
    pub trained_with: SvmVariant,
    pub c: f64,
}

impl LinearModel {
    pub fn decision(&self, x: &DVector<f64>) -> f64 {
        self.w.dot(x) + self.b
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainSettings {
    /// L2: stop when the gradient infinity norm falls below this.
    pub grad_tol: f64,
    /// L1: stop when the maximal KKT violation or the dual objective
    /// change per sweep falls below this.
    pub stall_tol: f64,
    pub max_iterations: usize,
}

impl Default for TrainSettings {
    fn default() -> Self {
        Self { grad_tol: 1e-6, stall_tol: 1e-8, max_iterations: 1_000_000 }
    }
}

pub fn train(data: &LabeledSet, c: f64, variant: SvmVariant) -> Result<LinearModel, SvmError> {
    train_with(data, c, variant, &TrainSettings::default())
}

pub fn train_with(
    data: &LabeledSet,
    c: f64,
    variant: SvmVariant,
    settings: &TrainSettings,
) -> Result<LinearModel, SvmError> {
    if !(c > 0.0) || !c.is_finite() {
        return Err(SvmError::NonPositiveC(c));
    }
    data.check_trainable()?;
    let (w, b) = match variant {
        SvmVariant::L2 => train_l2(data, c, settings)?,
        SvmVariant::L1 => train_l1(data, c, settings)?,
        SvmVariant::ConstrainedQp => train_qp(data, c)?,
    };
    Ok(LinearModel { w, b, trained_with: variant, c })
}

/// Label of `x`; a decision value of exactly zero maps to `+1`.
pub fn predict(model: &LinearModel, x: &DVector<f64>) -> Result<f64, SvmError> {
    if x.len() != model.w.len() {
        return Err(SvmError::DimensionMismatch(format!("feature has dimension {}, model {}", x.len(), model.w.len())));
    }
    Ok(if model.decision(x) >= 0.0 { 1.0 } else { -1.0 })
}

/// Primal objective. `ConstrainedQp` uses the hinge loss at the optimal slacks.
pub fn objective(model: &LinearModel, data: &LabeledSet, c: f64, variant: SvmVariant) -> Result<f64, SvmError> {
    data.check()?;
    if data.dim() != model.w.len() && !data.is_empty() {
        return Err(SvmError::DimensionMismatch(format!("data dimension {}, model {}", data.dim(), model.w.len())));
    }
    Ok(primal(&model.w, model.b, data, c, variant))
}

fn primal(w: &DVector<f64>, b: f64, data: &LabeledSet, c: f64, variant: SvmVariant) -> f64 {
    let loss: f64 = data
        .x
        .iter()
        .zip(&data.y)
        .map(|(x, y)| {
            let h = (1.0 - y * (w.dot(x) + b)).max(0.0);
            match variant {
                SvmVariant::L2 => h * h,
                SvmVariant::L1 | SvmVariant::ConstrainedQp => h,
            }
        })
        .sum();
    0.5 * w.norm_squared() + c * loss
}

pub fn accuracy(model: &LinearModel, data: &LabeledSet) -> Result<f64, SvmError> {
    if data.is_empty() {
        return Ok(1.0);
    }
    let mut hits = 0usize;
    for (x, y) in data.x.iter().zip(&data.y) {
        if predict(model, x)? == *y {
            hits += 1;
        }
    }
    Ok(hits as f64 / data.len() as f64)
}

/// Gradient of the L2 objective with respect to `(w, b)`.
pub fn l2_gradient(w: &DVector<f64>, b: f64, data: &LabeledSet, c: f64) -> DVector<f64> {
    let d = w.len();
    let mut grad = DVector::zeros(d + 1);
    grad.rows_mut(0, d).copy_from(w);
    for (x, y) in data.x.iter().zip(&data.y) {
        let h = 1.0 - y * (w.dot(x) + b);
        if h > 0.0 {
            let k = -2.0 * c * y * h;
            grad.rows_mut(0, d).axpy(k, x, 1.0);
            grad[d] += k;
        }
    }
    grad
}

fn train_l2(data: &LabeledSet, c: f64, settings: &TrainSettings) -> Result<(DVector<f64>, f64), SvmError> {
    let d = data.dim();
    let mut theta = DVector::zeros(d + 1);
    let f = |t: &DVector<f64>| primal(&t.rows(0, d).into_owned(), t[d], data, c, SvmVariant::L2);
    for _ in 0..settings.max_iterations.min(500) {
        let w = theta.rows(0, d).into_owned();
        let b = theta[d];
        let grad = l2_gradient(&w, b, data, c);
        if grad.amax() <= settings.grad_tol {
            return Ok((w, b));
        }
        // generalized Hessian over the margin violators
        let mut hess = DMatrix::<f64>::identity(d + 1, d + 1);
        hess[(d, d)] = 1e-12;
        for (x, y) in data.x.iter().zip(&data.y) {
            if 1.0 - y * (w.dot(x) + b) > 0.0 {
                let mut z = DVector::zeros(d + 1);
                z.rows_mut(0, d).copy_from(x);
                z[d] = 1.0;
                hess.ger(2.0 * c, &z, &z, 1.0);
            }
        }
        let step = hess
            .cholesky()
            .map(|ch| ch.solve(&-&grad))
            .unwrap_or_else(|| -&grad);
        let f0 = f(&theta);
        let slope = grad.dot(&step);
        let mut t = 1.0;
        loop {
            let cand = &theta + &step * t;
            let f1 = f(&cand);
            if f1 <= f0 + 1e-4 * t * slope || t < 1e-12 {
                theta = cand;
                break;
            }
            t *= 0.5;
        }
    }
    let w = theta.rows(0, d).into_owned();
    let g = l2_gradient(&w, theta[d], data, c);
    if g.amax() <= settings.grad_tol {
        Ok((w, theta[d]))
    } else {
        Err(SvmError::NotConverged(format!("L2 gradient norm {:e}", g.amax())))
    }
}

/// SMO with maximal-violating-pair selection on the dual
/// `max sum a - 1/2 a'Qa`, `0 <= a <= C`, `y'a = 0`.
fn train_l1(data: &LabeledSet, c: f64, settings: &TrainSettings) -> Result<(DVector<f64>, f64), SvmError> {
    let n = data.len();
    let d = data.dim();
    let y = &data.y;
    let diag: Vec<f64> = data.x.iter().map(|x| x.norm_squared()).collect();
    let mut alpha = vec![0.0; n];
    let mut w = DVector::zeros(d);
    // gradient of the dual objective written as a minimization: Qa - 1
    let mut grad = vec![-1.0; n];
    let tau = 1e-12;
    let in_up = |a: f64, y: f64| (y > 0.0 && a < c) || (y < 0.0 && a > 0.0);
    let in_low = |a: f64, y: f64| (y > 0.0 && a > 0.0) || (y < 0.0 && a < c);

    let mut converged = false;
    let mut prev_obj = f64::INFINITY;
    for iter in 0..settings.max_iterations {
        let mut i_best = None;
        let mut m_up = f64::NEG_INFINITY;
        let mut j_best = None;
        let mut m_low = f64::INFINITY;
        for t in 0..n {
            let v = -y[t] * grad[t];
            if in_up(alpha[t], y[t]) && v > m_up {
                m_up = v;
                i_best = Some(t);
            }
            if in_low(alpha[t], y[t]) && v < m_low {
                m_low = v;
                j_best = Some(t);
            }
        }
        let (Some(i), Some(j)) = (i_best, j_best) else { break };
        if m_up - m_low <= settings.stall_tol {
            converged = true;
            break;
        }
        let kij = data.x[i].dot(&data.x[j]);
        let eta = (diag[i] + diag[j] - 2.0 * kij).max(tau);
        // move along y_i e_i - y_j e_j
        let mut step = (m_up - m_low) / eta;
        let bound = |a: f64, yy: f64, dir: f64| -> f64 {
            // largest step s with 0 <= a + dir*yy*s <= C
            if dir * yy > 0.0 {
                c - a
            } else {
                a
            }
        };
        step = step.min(bound(alpha[i], y[i], 1.0)).min(bound(alpha[j], y[j], -1.0));
        let di = y[i] * step;
        let dj = -y[j] * step;
        alpha[i] = (alpha[i] + di).clamp(0.0, c);
        alpha[j] = (alpha[j] + dj).clamp(0.0, c);
        w.axpy(di * y[i], &data.x[i], 1.0);
        w.axpy(dj * y[j], &data.x[j], 1.0);
        for t in 0..n {
            grad[t] += y[t] * (di * y[i] * data.x[i].dot(&data.x[t]) + dj * y[j] * data.x[j].dot(&data.x[t]));
        }
        if iter % n.max(1) == 0 {
            let obj = 0.5 * w.norm_squared() - alpha.iter().sum::<f64>();
            if (prev_obj - obj).abs() <= settings.stall_tol * obj.abs().max(1.0) && m_up - m_low <= 1e-6 {
                converged = true;
                break;
            }
            prev_obj = obj;
        }
    }
    if !converged {
        return Err(SvmError::NotConverged("L1 dual coordinate method hit the iteration cap".into()));
    }

    // bias from free support vectors, or the midpoint of the feasible range
    let mut free_sum = 0.0;
    let mut free_n = 0usize;
    let mut ub = f64::INFINITY;
    let mut lb = f64::NEG_INFINITY;
    for t in 0..n {
        let v = -y[t] * grad[t];
        if alpha[t] > 0.0 && alpha[t] < c {
            free_sum += v;
            free_n += 1;
        } else if (y[t] > 0.0) == (alpha[t] == 0.0) {
            // may only move up: bounds b from below
            lb = lb.max(v);
        } else {
            ub = ub.min(v);
        }
    }
    let b = if free_n > 0 {
        free_sum / free_n as f64
    } else if ub.is_finite() && lb.is_finite() {
        0.5 * (ub + lb)
    } else if ub.is_finite() {
        ub
    } else {
        lb
    };
    Ok((w, b))
}

/// Variables `(w, b, xi)`; rows `-y_i (w'x_i + b) - xi_i <= -1` and `-xi_i <= 0`.
fn train_qp(data: &LabeledSet, c: f64) -> Result<(DVector<f64>, f64), SvmError> {
    let problem = constrained_problem(data, c)?;
    let sol = solve_qp(&problem, &SolverSettings::default())?;
    match sol.status {
        QpStatus::Solved => {}
        QpStatus::Inaccurate if sol.kkt.max() <= 1e-6 => {}
        other => return Err(SvmError::NotConverged(format!("constrained QP ended with {other:?}"))),
    }
    let d = data.dim();
    Ok((sol.x.rows(0, d).into_owned(), sol.x[d]))
}

/// The explicit slack formulation as a QP over `(w, b, xi)`.
pub fn constrained_problem(data: &LabeledSet, c: f64) -> Result<QpProblem, SvmError> {
    let n = data.len();
    let d = data.dim();
    let s = d + 1 + n;
    let mut h = DMatrix::zeros(s, s);
    for i in 0..d {
        h[(i, i)] = 1.0;
    }
    let mut g = DVector::zeros(s);
    g.rows_mut(d + 1, n).fill(c);
    let mut cm = DMatrix::zeros(2 * n, s);
    let mut dv = DVector::zeros(2 * n);
    for (i, (x, &y)) in data.x.iter().zip(&data.y).enumerate() {
        for k in 0..d {
            cm[(i, k)] = -y * x[k];
        }
        cm[(i, d)] = -y;
        cm[(i, d + 1 + i)] = -1.0;
        dv[i] = -1.0;
        cm[(n + i, d + 1 + i)] = -1.0;
    }
    Ok(QpProblem::new(h, g, cm, dv, DMatrix::zeros(0, s), DVector::zeros(0))?)
}

/// Two Gaussian clusters, separated by construction: points closer than
/// `margin` to the separating hyperplane are redrawn.
pub fn synthetic_surface_features(n: usize, dim: usize, seed: u64, margin: f64) -> LabeledSet {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dir: DVector<f64> = DVector::from_fn(dim.max(1), |_, _| StandardNormal.sample(&mut rng));
    dir /= dir.norm().max(f64::MIN_POSITIVE);
    let mut x = Vec::with_capacity(n);
    let mut y = Vec::with_capacity(n);
    for i in 0..n {
        let label = if i % 2 == 0 { 1.0 } else { -1.0 };
        loop {
            let noise: DVector<f64> = DVector::from_fn(dim.max(1), |_, _| StandardNormal.sample(&mut rng));
            let shift: f64 = 1.5 + 0.5 * rng.random::<f64>();
            let p = &dir * (label * shift) + noise * 0.6;
            if label * p.dot(&dir) >= margin {
                x.push(p);
                y.push(label);
                break;
            }
        }
    }
    LabeledSet { x, y }
}

/// Reads `label,f1,...,fN` rows. Labels may be `+1`, `1`, `-1`, `drilled`
/// or `smooth`.
pub fn read_features_csv<R: Read>(reader: R) -> Result<LabeledSet, SvmError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .flexible(true)
        .from_reader(reader);
    let mut set = LabeledSet::default();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| SvmError::Parse { line: idx + 1, msg: e.to_string() })?;
        let line = rec.position().map_or(idx + 1, |p| p.line() as usize);
        let mut fields = rec.iter();
        let label = match fields.next().unwrap_or_default().to_ascii_lowercase().as_str() {
            "+1" | "1" | "1.0" | "drilled" => 1.0,
            "-1" | "-1.0" | "smooth" => -1.0,
            "label" if set.is_empty() => continue,
            other => return Err(SvmError::Parse { line, msg: format!("bad label `{other}`") }),
        };
        let feats: Vec<f64> = fields
            .map(|f| f.parse::<f64>().map_err(|e| SvmError::Parse { line, msg: format!("`{f}`: {e}") }))
            .collect::<Result<_, _>>()?;
        if !set.is_empty() && feats.len() != set.dim() {
            return Err(SvmError::Parse { line, msg: format!("expected {} features, found {}", set.dim(), feats.len()) });
        }
        set.x.push(DVector::from_vec(feats));
        set.y.push(label);
    }
    Ok(set)
}

pub fn write_features_csv(data: &LabeledSet) -> String {
    let mut out = String::new();
    for (x, y) in data.x.iter().zip(&data.y) {
        let _ = write!(out, "{}", if *y > 0.0 { "+1" } else { "-1" });
        for v in x.iter() {
            let _ = write!(out, ",{v}");
        }
        out.push('\n');
    }
    out
}

/// Plain-text model: `variant`, `C`, `b` and `w` lines.
pub fn write_model(model: &LinearModel) -> String {
    let variant = match model.trained_with {
        SvmVariant::L1 => "l1",
        SvmVariant::L2 => "l2",
        SvmVariant::ConstrainedQp => "qp",
    };
    let w: Vec<String> = model.w.iter().map(|v| format!("{v:e}")).collect();
    format!("variant {variant}\nC {:e}\nb {:e}\nw {}\n", model.c, model.b, w.join(" "))
}

pub fn read_model(text: &str) -> Result<LinearModel, SvmError> {
    let mut variant = None;
    let mut c = None;
    let mut b = None;
    let mut w = None;
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let (key, rest) = t.split_once(char::is_whitespace).unwrap_or((t, ""));
        let num = |s: &str| s.parse::<f64>().map_err(|e| SvmError::Parse { line, msg: format!("`{s}`: {e}") });
        match key {
            "variant" => variant = Some(rest.trim().parse().map_err(|msg| SvmError::Parse { line, msg })?),
            "C" => c = Some(num(rest.trim())?),
            "b" => b = Some(num(rest.trim())?),
            "w" => w = Some(rest.split_whitespace().map(num).collect::<Result<Vec<_>, _>>()?),
            other => return Err(SvmError::Parse { line, msg: format!("unknown key `{other}`") }),
        }
    }
    match (variant, c, b, w) {
        (Some(trained_with), Some(c), Some(b), Some(w)) => {
            Ok(LinearModel { w: DVector::from_vec(w), b, trained_with, c })
        }
        _ => Err(SvmError::Parse { line: 0, msg: "model needs variant, C, b and w lines".into() }),
    }
}
