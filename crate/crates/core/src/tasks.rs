//! Task builders for the augmented stack.
//!
//! The decision vector is `chi = [q_dot (n); xd_dot (m); s (m)]`: joint
//! velocities, the velocity of the desired end-effector pose, and the slack
//! that softens the shared-workspace box. The slack block is optional.

use std::ops::Range;

use nalgebra::{DMatrix, DVector, Matrix3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ergomap::{ErgonomicsMap, Frame};
use crate::hqp::{Hierarchy, HqpError, TaskLevel};
use crate::kinematics::{pose_error, so3, JointLimits, Pose};

#[derive(Debug, Error)]
pub enum TaskError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("layout has no slack block")]
    SlackInactive,
    #[error("ergonomics map is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("ergonomics map must be expressed in the world frame")]
    WrongFrame,
    #[error("joint {joint}: empty velocity interval [{lo}, {hi}]")]
    InconsistentLimits { joint: usize, lo: f64, hi: f64 },
    #[error("invalid gain: {0}")]
    InvalidGain(String),
    #[error(transparent)]
    Hqp(#[from] HqpError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct AugmentedLayout {
    pub n: usize,
    pub m: usize,
    pub slack_active: bool,
}

impl AugmentedLayout {
    pub fn new(n: usize, m: usize, slack_active: bool) -> Self {
        Self { n, m, slack_active }
    }

    /// Decision dimension.
    pub fn s(&self) -> usize {
        self.n + self.m + if self.slack_active { self.m } else { 0 }
    }

    pub fn q_dot(&self) -> Range<usize> {
        0..self.n
    }

    pub fn xd_dot(&self) -> Range<usize> {
        self.n..self.n + self.m
    }

    pub fn slack(&self) -> Option<Range<usize>> {
        self.slack_active.then(|| self.n + self.m..self.n + 2 * self.m)
    }
}

/// Shared-workspace box on the desired pose. The orientation part bounds the
/// rotation vector of `q_d q_center^-1` componentwise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HrswBox {
    pub pos_min: Vector3<f64>,
    pub pos_max: Vector3<f64>,
    pub orient_center: UnitQuaternion<f64>,
    pub orient_halfwidth: Vector3<f64>,
}

impl HrswBox {
    pub fn validate(&self) -> Result<(), TaskError> {
        let ordered = (0..3).all(|i| self.pos_min[i] <= self.pos_max[i]);
        if !ordered || self.orient_halfwidth.iter().any(|h| !(*h >= 0.0)) {
            return Err(TaskError::DimensionMismatch("HRSW bounds are not ordered".into()));
        }
        Ok(())
    }

    /// Box coordinates of a pose: position and rotation vector about the center.
    pub fn chart(&self, pose: &Pose) -> Vector6<f64> {
        let r = so3::log(&(pose.orientation * self.orient_center.inverse()));
        let p = pose.position;
        Vector6::new(p.x, p.y, p.z, r.x, r.y, r.z)
    }

    pub fn lower(&self) -> Vector6<f64> {
        let h = self.orient_halfwidth;
        Vector6::new(self.pos_min.x, self.pos_min.y, self.pos_min.z, -h.x, -h.y, -h.z)
    }

    pub fn upper(&self) -> Vector6<f64> {
        let h = self.orient_halfwidth;
        Vector6::new(self.pos_max.x, self.pos_max.y, self.pos_max.z, h.x, h.y, h.z)
    }

    /// Componentwise distance of `pose` outside the box (zero inside).
    pub fn violation(&self, pose: &Pose) -> Vector6<f64> {
        let x = self.chart(pose);
        let (lo, hi) = (self.lower(), self.upper());
        Vector6::from_fn(|i, _| (x[i] - hi[i]).max(lo[i] - x[i]).max(0.0))
    }

    pub fn translate(&mut self, delta: &Vector3<f64>) {
        self.pos_min += delta;
        self.pos_max += delta;
    }
}

/// Diagonal gains: CLIK `kp` (1/s), joint stiffness `kqp` and damping `kqd`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GainSet {
    pub kp: [f64; 6],
    pub kqp: Vec<f64>,
    pub kqd: Vec<f64>,
}

impl Default for GainSet {
    fn default() -> Self {
        Self { kp: [5.0; 6], kqp: vec![200.0; 7], kqd: vec![20.0; 7] }
    }
}

impl GainSet {
    pub fn validate(&self) -> Result<(), TaskError> {
        let all = self.kp.iter().chain(&self.kqp).chain(&self.kqd);
        if all.into_iter().any(|k| !(*k > 0.0) || !k.is_finite()) {
            return Err(TaskError::InvalidGain("all gains must be positive and finite".into()));
        }
        if self.kqp.len() != self.kqd.len() {
            return Err(TaskError::InvalidGain("kqp and kqd lengths differ".into()));
        }
        Ok(())
    }

    fn kp_vec(&self) -> Vector6<f64> {
        Vector6::from_column_slice(&self.kp)
    }
}

fn put_block(dst: &mut DMatrix<f64>, row: usize, col: usize, src: &DMatrix<f64>) {
    dst.view_mut((row, col), (src.nrows(), src.ncols())).copy_from(src);
}

/// CLIK level: `J q_dot - (I + Kp dt) xd_dot = Kp e` in least squares.
pub fn build_clik_level(
    jac: &DMatrix<f64>,
    x_d_prev: &Pose,
    x_a: &Pose,
    gains: &GainSet,
    layout: &AugmentedLayout,
    dt: f64,
) -> Result<TaskLevel, TaskError> {
    if jac.nrows() != layout.m || jac.ncols() != layout.n || layout.m != 6 {
        return Err(TaskError::DimensionMismatch(format!(
            "Jacobian is {}x{}, layout expects 6x{} with m = 6",
            jac.nrows(),
            jac.ncols(),
            layout.n
        )));
    }
    let kp = gains.kp_vec();
    let mut a = DMatrix::zeros(6, layout.s());
    put_block(&mut a, 0, 0, jac);
    for i in 0..6 {
        a[(i, layout.n + i)] = -(1.0 + kp[i] * dt);
    }
    let e = pose_error(x_d_prev, x_a);
    let b = DVector::from_iterator(6, kp.component_mul(&e).iter().copied());
    Ok(TaskLevel::least_squares("clik", a, b))
}

/// Slack minimization level, `min 1/2 ||s||^2`.
pub fn build_softening_level(layout: &AugmentedLayout) -> Result<TaskLevel, TaskError> {
    let slack = layout.slack().ok_or(TaskError::SlackInactive)?;
    let mut a = DMatrix::zeros(layout.m, layout.s());
    for (i, c) in slack.enumerate() {
        a[(i, c)] = 1.0;
    }
    Ok(TaskLevel::least_squares("slack", a, DVector::zeros(layout.m)))
}

/// Softened box on the next desired pose, `2 m` rows.
///
/// Position rows read `dt v - s <= p_max - p` and `-dt v - s <= p - p_min`.
/// Orientation rows act on the rotation vector `r` about the box center; the
/// world angular velocity maps into `r` through the inverse left Jacobian,
/// which is also how [`integrate_desired`] advances the orientation, so a
/// satisfied row means the integrated pose satisfies the box exactly.
pub fn build_hrsw_constraints(
    hrsw: &HrswBox,
    x_d_prev: &Pose,
    layout: &AugmentedLayout,
    dt: f64,
) -> Result<(DMatrix<f64>, DVector<f64>), TaskError> {
    if layout.m != 6 {
        return Err(TaskError::DimensionMismatch(format!("task dimension {} is not 6", layout.m)));
    }
    hrsw.validate()?;
    let x = hrsw.chart(x_d_prev);
    let (lo, hi) = (hrsw.lower(), hrsw.upper());
    let r = Vector3::new(x[3], x[4], x[5]);
    let mut map = DMatrix::<f64>::identity(6, 6) * dt;
    let jl = so3::left_jacobian_inv(&r) * dt;
    map.view_mut((3, 3), (3, 3)).copy_from(&jl);

    let s = layout.s();
    let mut c = DMatrix::zeros(12, s);
    let mut d = DVector::zeros(12);
    let xd = layout.n;
    for i in 0..6 {
        for k in 0..6 {
            c[(i, xd + k)] = map[(i, k)];
            c[(6 + i, xd + k)] = -map[(i, k)];
        }
        if let Some(slack) = layout.slack() {
            c[(i, slack.start + i)] = -1.0;
            c[(6 + i, slack.start + i)] = -1.0;
        }
        d[i] = hi[i] - x[i];
        d[6 + i] = x[i] - lo[i];
    }
    Ok((c, d))
}

/// Advances the desired pose by `xd_dot` over `dt`. Orientation is stepped in
/// the rotation-vector chart of `center`, matching the HRSW rows.
pub fn integrate_desired(x_d: &Pose, xd_dot: &Vector6<f64>, center: &UnitQuaternion<f64>, dt: f64) -> Pose {
    let position = x_d.position + xd_dot.fixed_rows::<3>(0) * dt;
    let r = so3::log(&(x_d.orientation * center.inverse()));
    let w = xd_dot.fixed_rows::<3>(3).into_owned();
    let r_next = r + so3::left_jacobian_inv(&r) * w * dt;
    let orientation = UnitQuaternion::new_normalize((so3::exp(&r_next) * center).into_inner());
    Pose::new(position, orientation)
}

/// Ergonomics level: the map evaluated at `p + dt v`, as a quadratic in `chi`.
pub fn build_ergonomics_level(
    map: &ErgonomicsMap,
    x_d_prev: &Pose,
    layout: &AugmentedLayout,
    dt: f64,
) -> Result<TaskLevel, TaskError> {
    if map.frame != Frame::World {
        return Err(TaskError::WrongFrame);
    }
    let min_eig = map.h.symmetric_eigenvalues().min();
    if min_eig < -crate::qp::PSD_TOL {
        return Err(TaskError::NotPsd(min_eig));
    }
    let s = layout.s();
    let xd = layout.n;
    let mut h = DMatrix::zeros(s, s);
    let block: Matrix3<f64> = map.h * (dt * dt);
    h.view_mut((xd, xd), (3, 3)).copy_from(&block);
    let grad = (map.h * x_d_prev.position + map.g) * dt;
    let mut g = DVector::zeros(s);
    g.rows_mut(xd, 3).copy_from(&grad);
    Ok(TaskLevel::quadratic("ergonomics", h, g))
}

/// Benchmark terminal level, `min 1/2 ||xd_dot||^2`.
pub fn build_min_xdot_level(layout: &AugmentedLayout) -> TaskLevel {
    let s = layout.s();
    let mut h = DMatrix::zeros(s, s);
    for i in layout.xd_dot() {
        h[(i, i)] = 1.0;
    }
    TaskLevel::quadratic("min_xd_dot", h, DVector::zeros(s))
}

/// Limits turned into elementwise bounds on `chi`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoxLimits {
    pub joints: Vec<JointLimits>,
    pub joint_acc: bool,
    /// `[linear, angular]` caps on `|xd_dot|`, per component.
    pub xd_vel_max: Option<[f64; 2]>,
    /// `[linear, angular]` caps on `|xd_ddot|`, per component.
    pub xd_acc_max: Option<[f64; 2]>,
}

/// State the box bounds depend on.
#[derive(Debug, Clone, Copy)]
pub struct BoxState<'a> {
    pub q: &'a DVector<f64>,
    pub q_dot_prev: &'a DVector<f64>,
    pub xd_dot_prev: &'a Vector6<f64>,
}

/// Velocity interval of one joint: the intersection of the velocity limit,
/// the position limits reached in one step, and optionally the acceleration
/// limit around the previous velocity.
pub fn joint_velocity_interval(
    limits: &JointLimits,
    q: f64,
    q_dot_prev: f64,
    dt: f64,
    use_acc: bool,
) -> (f64, f64) {
    let mut lo = (-limits.vel_max).max((limits.pos_min - q) / dt);
    let mut hi = limits.vel_max.min((limits.pos_max - q) / dt);
    if use_acc {
        lo = lo.max(q_dot_prev - limits.acc_max * dt);
        hi = hi.min(q_dot_prev + limits.acc_max * dt);
    }
    (lo, hi)
}

pub fn build_box_constraints(
    limits: &BoxLimits,
    state: BoxState<'_>,
    layout: &AugmentedLayout,
    dt: f64,
) -> Result<(DMatrix<f64>, DVector<f64>), TaskError> {
    if limits.joints.len() != layout.n || state.q.len() != layout.n || state.q_dot_prev.len() != layout.n {
        return Err(TaskError::DimensionMismatch(format!(
            "box limits for {} joints, state of length {}, layout n = {}",
            limits.joints.len(),
            state.q.len(),
            layout.n
        )));
    }
    let mut bounds: Vec<(usize, f64, f64)> = Vec::with_capacity(layout.n + layout.m);
    for (i, jl) in limits.joints.iter().enumerate() {
        let (lo, hi) = joint_velocity_interval(jl, state.q[i], state.q_dot_prev[i], dt, limits.joint_acc);
        if lo > hi {
            return Err(TaskError::InconsistentLimits { joint: i, lo, hi });
        }
        bounds.push((i, lo, hi));
    }
    for k in 0..layout.m {
        let group = usize::from(k >= 3);
        let mut lo = f64::NEG_INFINITY;
        let mut hi = f64::INFINITY;
        if let Some(v) = limits.xd_vel_max {
            lo = lo.max(-v[group]);
            hi = hi.min(v[group]);
        }
        if let Some(a) = limits.xd_acc_max {
            lo = lo.max(state.xd_dot_prev[k] - a[group] * dt);
            hi = hi.min(state.xd_dot_prev[k] + a[group] * dt);
        }
        if lo > hi {
            return Err(TaskError::InconsistentLimits { joint: layout.n + k, lo, hi });
        }
        bounds.push((layout.n + k, lo, hi));
    }

    let rows: usize = bounds.iter().map(|(_, lo, hi)| usize::from(lo.is_finite()) + usize::from(hi.is_finite())).sum();
    let mut c = DMatrix::zeros(rows, layout.s());
    let mut d = DVector::zeros(rows);
    let mut r = 0;
    for (col, lo, hi) in bounds {
        if hi.is_finite() {
            c[(r, col)] = 1.0;
            d[r] = hi;
            r += 1;
        }
        if lo.is_finite() {
            c[(r, col)] = -1.0;
            d[r] = -lo;
            r += 1;
        }
    }
    Ok((c, d))
}

/// Terminal level of the stack.
#[derive(Debug, Clone, Copy)]
pub enum Terminal<'a> {
    Ergonomics(&'a ErgonomicsMap),
    MinVelocity,
}

#[derive(Debug, Clone, Copy)]
pub struct StackInputs<'a> {
    pub layout: AugmentedLayout,
    pub jacobian: &'a DMatrix<f64>,
    pub x_a: &'a Pose,
    pub x_d_prev: &'a Pose,
    pub hrsw: &'a HrswBox,
    pub gains: &'a GainSet,
    pub limits: &'a BoxLimits,
    pub box_state: BoxState<'a>,
    pub terminal: Terminal<'a>,
    pub dt: f64,
}

/// CLIK, slack minimization, then ergonomics or the benchmark level. The HRSW
/// and box rows sit on level 1 and therefore bind every level.
pub fn assemble_stack(inp: &StackInputs<'_>) -> Result<Hierarchy, TaskError> {
    let layout = &inp.layout;
    let (c_w, d_w) = build_hrsw_constraints(inp.hrsw, inp.x_d_prev, layout, inp.dt)?;
    let (c_b, d_b) = build_box_constraints(inp.limits, inp.box_state, layout, inp.dt)?;
    let c = crate::linalg::vstack(&[&c_w, &c_b], layout.s());
    let d = crate::linalg::vconcat(&[&d_w, &d_b]);
    let clik = build_clik_level(inp.jacobian, inp.x_d_prev, inp.x_a, inp.gains, layout, inp.dt)?.with_ineq(c, d);
    let mut levels = vec![clik];
    if layout.slack_active {
        levels.push(build_softening_level(layout)?);
    }
    levels.push(match inp.terminal {
        Terminal::Ergonomics(map) => build_ergonomics_level(map, inp.x_d_prev, layout, inp.dt)?,
        Terminal::MinVelocity => build_min_xdot_level(layout),
    });
    Ok(Hierarchy::new(layout.s(), levels)?)
}

/// Parts of a solved decision vector.
#[derive(Debug, Clone, PartialEq)]
pub struct SplitSolution {
    /// `(x_dot, y_dot, yaw_rate)` of the base.
    pub base_vel: Vector3<f64>,
    pub arm_vel: DVector<f64>,
    pub xd_dot: Vector6<f64>,
    /// Zero when the layout has no slack block.
    pub slack: Vector6<f64>,
}

impl SplitSolution {
    /// Joint velocity vector, base first.
    pub fn q_dot(&self) -> DVector<f64> {
        let mut v = DVector::zeros(3 + self.arm_vel.len());
        v.fixed_rows_mut::<3>(0).copy_from(&self.base_vel);
        v.rows_mut(3, self.arm_vel.len()).copy_from(&self.arm_vel);
        v
    }
}

pub fn split_solution(chi: &DVector<f64>, layout: &AugmentedLayout) -> Result<SplitSolution, TaskError> {
    if chi.len() != layout.s() || layout.n < 3 || layout.m != 6 {
        return Err(TaskError::DimensionMismatch(format!(
            "solution has length {}, layout expects {} with n >= 3 and m = 6",
            chi.len(),
            layout.s()
        )));
    }
    let base_vel = Vector3::new(chi[0], chi[1], chi[2]);
    let arm_vel = chi.rows(3, layout.n - 3).into_owned();
    let xd_dot = Vector6::from_iterator(chi.rows(layout.n, 6).iter().copied());
    let slack = match layout.slack() {
        Some(r) => Vector6::from_iterator(chi.rows(r.start, 6).iter().copied()),
        None => Vector6::zeros(),
    };
    Ok(SplitSolution { base_vel, arm_vel, xd_dot, slack })
}

/// Joint impedance law `tau = Kqd (qd* - qd) + Kqp (q* - q) + g`.
pub fn impedance_torque(
    q_des: &DVector<f64>,
    q_dot_des: &DVector<f64>,
    q_a: &DVector<f64>,
    q_dot_a: &DVector<f64>,
    gains: &GainSet,
    gravity: &DVector<f64>,
) -> Result<DVector<f64>, TaskError> {
    let n = gains.kqp.len();
    let lens = [q_des.len(), q_dot_des.len(), q_a.len(), q_dot_a.len(), gravity.len(), gains.kqd.len()];
    if lens.iter().any(|&l| l != n) {
        return Err(TaskError::DimensionMismatch(format!("impedance inputs {lens:?} with {n} gains")));
    }
    Ok(DVector::from_fn(n, |i, _| {
        gains.kqd[i] * (q_dot_des[i] - q_dot_a[i]) + gains.kqp[i] * (q_des[i] - q_a[i]) + gravity[i]
    }))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn layout() -> AugmentedLayout {
        AugmentedLayout::new(10, 6, true)
    }

    fn unit_box() -> HrswBox {
        HrswBox {
            pos_min: Vector3::new(-1.0, -1.0, -1.0),
            pos_max: Vector3::new(1.0, 1.0, 1.0),
            orient_center: UnitQuaternion::identity(),
            orient_halfwidth: Vector3::new(0.1, 0.1, 0.1),
        }
    }

    #[test]
    fn layout_ranges_cover_decision_vector() {
        let l = layout();
        assert_eq!(l.s(), 22);
        assert_eq!(l.q_dot(), 0..10);
        assert_eq!(l.xd_dot(), 10..16);
        assert_eq!(l.slack(), Some(16..22));
        assert_eq!(AugmentedLayout::new(10, 6, false).s(), 16);
    }

    #[test]
    fn clik_at_rest_has_zero_target() {
        let pose = Pose::new(Vector3::new(0.3, 0.1, 0.9), UnitQuaternion::identity());
        let j = DMatrix::from_fn(6, 10, |r, c| (r * 10 + c) as f64 * 0.01);
        let level = build_clik_level(&j, &pose, &pose, &GainSet::default(), &layout(), 1e-3).unwrap();
        match &level.objective {
            crate::hqp::Objective::LeastSquares { a, b } => {
                assert_eq!(b.amax(), 0.0);
                assert_eq!(a[(0, 10)], -(1.0 + 5.0e-3));
                assert_eq!(a.columns(16, 6).amax(), 0.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn slack_level_value() {
        let level = build_softening_level(&layout()).unwrap();
        let mut chi = DVector::zeros(22);
        assert_eq!(level.objective_value(&chi), 0.0);
        chi[16] = 0.1;
        assert!((level.objective_value(&chi) - 0.005).abs() < 1e-15);
        assert!(matches!(build_softening_level(&AugmentedLayout::new(10, 6, false)), Err(TaskError::SlackInactive)));
    }

    #[test]
    fn hrsw_rows_at_center_are_strict() {
        let pose = Pose::new(Vector3::zeros(), UnitQuaternion::identity());
        let (c, d) = build_hrsw_constraints(&unit_box(), &pose, &layout(), 1e-3).unwrap();
        assert_eq!(c.nrows(), 12);
        let slack = &c * DVector::<f64>::zeros(22) - &d;
        assert!(slack.max() < 0.0);
    }

    #[test]
    fn hrsw_row_outside_face_needs_slack() {
        let pose = Pose::new(Vector3::new(1.2, 0.0, 0.0), UnitQuaternion::identity());
        let (c, d) = build_hrsw_constraints(&unit_box(), &pose, &layout(), 1e-3).unwrap();
        let mut chi = DVector::zeros(22);
        assert!((&c * &chi - &d).max() > 0.0);
        chi[16] = 0.2;
        assert!((&c * &chi - &d).max() <= 1e-15);
        chi[16] = 0.19;
        assert!((&c * &chi - &d).max() > 0.0);
    }

    #[test]
    fn ergonomics_gradient_direct_formula() {
        let map = ErgonomicsMap::world(Matrix3::identity(), Vector3::zeros(), 0.0);
        let pose = Pose::new(Vector3::new(1.0, 0.0, 0.0), UnitQuaternion::identity());
        let level = build_ergonomics_level(&map, &pose, &layout(), 1e-3).unwrap();
        match &level.objective {
            crate::hqp::Objective::Quadratic { h, g } => {
                assert!((g[10] - 1e-3).abs() < 1e-18 && g[11] == 0.0 && g[12] == 0.0);
                assert!((h[(10, 10)] - 1e-6).abs() < 1e-20);
                assert_eq!(h.columns(0, 10).amax(), 0.0);
            }
            _ => unreachable!(),
        }
    }

    #[test]
    fn ergonomics_requires_world_frame_and_psd() {
        let pose = Pose::new(Vector3::zeros(), UnitQuaternion::identity());
        let mut map = ErgonomicsMap::world(Matrix3::identity(), Vector3::zeros(), 0.0);
        map.frame = Frame::Human;
        assert!(matches!(build_ergonomics_level(&map, &pose, &layout(), 1e-3), Err(TaskError::WrongFrame)));
        let map = ErgonomicsMap::world(-Matrix3::identity(), Vector3::zeros(), 0.0);
        assert!(matches!(build_ergonomics_level(&map, &pose, &layout(), 1e-3), Err(TaskError::NotPsd(_))));
    }

    #[test]
    fn velocity_interval_examples() {
        let l = JointLimits { pos_min: -1.0, pos_max: 1.0, vel_max: 2.0, acc_max: 10.0 };
        assert_eq!(joint_velocity_interval(&l, 0.0, 0.0, 1e-3, false), (-2.0, 2.0));
        assert_eq!(joint_velocity_interval(&l, 1.0, 0.0, 1e-3, false).1, 0.0);
        let (lo, hi) = joint_velocity_interval(&l, 0.0, 0.5, 1e-3, true);
        assert!((lo - 0.49).abs() < 1e-12 && (hi - 0.51).abs() < 1e-12);
    }

    #[test]
    fn inconsistent_limits_are_reported() {
        let l = JointLimits { pos_min: -1.0, pos_max: 1.0, vel_max: 2.0, acc_max: 1.0 };
        let limits = BoxLimits { joints: vec![l; 10], joint_acc: true, xd_vel_max: None, xd_acc_max: None };
        let q = DVector::zeros(10);
        let mut qd = DVector::zeros(10);
        qd[4] = 5.0;
        let state = BoxState { q: &q, q_dot_prev: &qd, xd_dot_prev: &Vector6::zeros() };
        assert!(matches!(
            build_box_constraints(&limits, state, &layout(), 1e-3),
            Err(TaskError::InconsistentLimits { joint: 4, .. })
        ));
    }

    #[test]
    fn split_round_trip() {
        let l = layout();
        let chi = DVector::from_fn(22, |i, _| i as f64 * 0.5 - 3.0);
        let sp = split_solution(&chi, &l).unwrap();
        let mut back = sp.q_dot().as_slice().to_vec();
        back.extend(sp.xd_dot.iter());
        back.extend(sp.slack.iter());
        assert_eq!(DVector::from_vec(back), chi);
        let mut e0 = DVector::zeros(22);
        e0[0] = 1.0;
        let sp = split_solution(&e0, &l).unwrap();
        assert_eq!(sp.base_vel, Vector3::new(1.0, 0.0, 0.0));
        assert_eq!(sp.arm_vel.amax() + sp.xd_dot.amax() + sp.slack.amax(), 0.0);
    }

    #[test]
    fn impedance_examples() {
        let g = GainSet { kp: [5.0; 6], kqp: vec![3.0; 7], kqd: vec![1.0; 7] };
        let z = DVector::zeros(7);
        let q = DVector::from_element(7, 0.4);
        assert_eq!(impedance_torque(&q, &z, &q, &z, &g, &z).unwrap().amax(), 0.0);
        let e = DVector::from_fn(7, |i, _| i as f64 * 0.1);
        let tau = impedance_torque(&e, &z, &z, &z, &g, &z).unwrap();
        assert!((tau - e * 3.0).amax() < 1e-15);
    }
}
