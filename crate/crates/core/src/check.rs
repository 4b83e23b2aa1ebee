//! Self-check suites run by `ahqp check`.

use nalgebra::{DMatrix, DVector, Matrix3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::ergomap::{map_to_world, ErgonomicsMap, HumanPoseState};
use crate::hqp::{solve_hierarchy, Hierarchy, TaskLevel};
use crate::kinematics::{so3, KinematicChain};
use crate::qp::{solve_qp, QpProblem, QpStatus, SolverSettings};

#[derive(Debug, Clone)]
pub struct CheckResult {
    pub name: &'static str,
    pub cases: usize,
    /// Worst observed error.
    pub worst: f64,
    pub tolerance: f64,
    pub passed: bool,
}

impl CheckResult {
    fn new(name: &'static str, cases: usize, worst: f64, tolerance: f64) -> Self {
        Self { name, cases, worst, tolerance, passed: worst.is_finite() && worst <= tolerance }
    }
}

pub fn gaussian_matrix(rng: &mut ChaCha8Rng, r: usize, c: usize) -> DMatrix<f64> {
    DMatrix::from_fn(r, c, |_, _| StandardNormal.sample(rng))
}

pub fn gaussian_vector(rng: &mut ChaCha8Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| StandardNormal.sample(rng))
}

/// Strictly convex QP with `n_ineq` inequalities and `n_eq` equalities that
/// is feasible by construction.
pub fn random_qp(rng: &mut ChaCha8Rng, s: usize, n_ineq: usize, n_eq: usize) -> QpProblem {
    let m = gaussian_matrix(rng, s, s);
    let mut h = m.transpose() * &m;
    for i in 0..s {
        h[(i, i)] += 0.1;
    }
    let g = gaussian_vector(rng, s) * 3.0;
    let x0 = gaussian_vector(rng, s);
    let c = gaussian_matrix(rng, n_ineq, s);
    let d = &c * &x0 + DVector::from_fn(n_ineq, |_, _| rng.random::<f64>());
    let e = gaussian_matrix(rng, n_eq, s);
    let f = &e * &x0;
    QpProblem::new(h, g, c, d, e, f).expect("shapes agree")
}

/// Three least-squares levels with inequalities on the first.
pub fn random_stack(rng: &mut ChaCha8Rng, s: usize) -> Hierarchy {
    let x0 = gaussian_vector(rng, s);
    let c = gaussian_matrix(rng, s / 2, s);
    let d = &c * &x0 + DVector::from_fn(s / 2, |_, _| rng.random::<f64>());
    let mut levels = Vec::new();
    for k in 0..3 {
        let rows = 2 + k;
        let lvl = TaskLevel::least_squares(format!("task{k}"), gaussian_matrix(rng, rows, s), gaussian_vector(rng, rows));
        levels.push(if k == 0 { lvl.with_ineq(c.clone(), d.clone()) } else { lvl });
    }
    Hierarchy::new(s, levels).expect("valid stack")
}

/// Largest relative mismatch between the analytic Jacobian and central
/// differences of the forward kinematics at `q`.
pub fn jacobian_fd_error(chain: &KinematicChain, q: &DVector<f64>) -> f64 {
    let j = chain.geometric_jacobian(q).expect("q matches chain");
    let h = 1e-6;
    let mut fd = DMatrix::zeros(6, q.len());
    for i in 0..q.len() {
        let mut qp = q.clone();
        let mut qm = q.clone();
        qp[i] += h;
        qm[i] -= h;
        let a = chain.forward_kinematics(&qp).expect("length ok");
        let b = chain.forward_kinematics(&qm).expect("length ok");
        let lin = (a.position - b.position) / (2.0 * h);
        let ang = so3::log(&(a.orientation * b.orientation.inverse())) / (2.0 * h);
        fd.fixed_view_mut::<3, 1>(0, i).copy_from(&lin);
        fd.fixed_view_mut::<3, 1>(3, i).copy_from(&ang);
    }
    (&j - &fd).amax() / j.amax().max(1.0)
}

pub fn random_configuration(rng: &mut ChaCha8Rng, chain: &KinematicChain) -> DVector<f64> {
    DVector::from_iterator(
        chain.dof(),
        chain.joints.iter().map(|jt| {
            let (lo, hi) = (jt.limits.pos_min.max(-3.0), jt.limits.pos_max.min(3.0));
            lo + (hi - lo) * rng.random::<f64>()
        }),
    )
}

pub fn random_map(rng: &mut ChaCha8Rng) -> ErgonomicsMap {
    let m: Matrix3<f64> = Matrix3::from_fn(|_, _| StandardNormal.sample(rng));
    let h = m.transpose() * m;
    let g: Vector3<f64> = Vector3::from_fn(|_, _| StandardNormal.sample(rng));
    ErgonomicsMap::human(h, g, rng.random::<f64>())
}

pub fn random_human(rng: &mut ChaCha8Rng) -> HumanPoseState {
    HumanPoseState {
        position: Vector3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), 0.0),
        heading: rng.random_range(-std::f64::consts::PI..std::f64::consts::PI),
        timestamp: 0.0,
    }
}

fn kkt_suite(rng: &mut ChaCha8Rng) -> CheckResult {
    let settings = SolverSettings::default();
    let mut worst: f64 = 0.0;
    let n = 100;
    for _ in 0..n {
        let s = rng.random_range(2..=20);
        let n_ineq = rng.random_range(0..=2 * s);
        let n_eq = rng.random_range(0..s / 2 + 1);
        let qp = random_qp(rng, s, n_ineq, n_eq);
        match solve_qp(&qp, &settings) {
            Ok(sol) if sol.status == QpStatus::Solved => worst = worst.max(sol.kkt.max()),
            _ => worst = f64::INFINITY,
        }
    }
    CheckResult::new("qp kkt residuals", n, worst, 1e-6)
}

fn strictness_suite(rng: &mut ChaCha8Rng) -> CheckResult {
    let settings = SolverSettings::default();
    let mut worst: f64 = 0.0;
    let n = 50;
    for _ in 0..n {
        let s = rng.random_range(6..=14);
        let stack = random_stack(rng, s);
        match solve_hierarchy(&stack, &settings) {
            Ok(r) => worst = worst.max(r.strictness(&stack)),
            Err(_) => worst = f64::INFINITY,
        }
    }
    CheckResult::new("hierarchy strictness", n, worst, 1e-6)
}

fn jacobian_suite(rng: &mut ChaCha8Rng) -> CheckResult {
    let chain = KinematicChain::mobile_manipulator();
    let n = 50;
    let worst = (0..n).map(|_| jacobian_fd_error(&chain, &random_configuration(rng, &chain))).fold(0.0, f64::max);
    CheckResult::new("jacobian finite differences", n, worst, 1e-5)
}

fn frame_suite(rng: &mut ChaCha8Rng) -> CheckResult {
    let n = 50;
    let mut worst: f64 = 0.0;
    for _ in 0..n {
        let map = random_map(rng);
        let human = random_human(rng);
        let world = map_to_world(&map, &human).expect("human-frame map");
        for _ in 0..10 {
            let x = Vector3::from_fn(|_, _| rng.random_range(-1.0..1.0));
            worst = worst.max((world.evaluate(&human.to_world(&x)) - map.evaluate(&x)).abs());
        }
    }
    CheckResult::new("map frame transform", n, worst, 1e-9)
}

/// Runs every suite with a fixed seed.
pub fn run_all(seed: u64) -> Vec<CheckResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    vec![jacobian_suite(&mut rng), kkt_suite(&mut rng), strictness_suite(&mut rng), frame_suite(&mut rng)]
}
