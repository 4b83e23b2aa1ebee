//! Serial-chain kinematics for a holonomic mobile base carrying a 7-DoF arm.

mod chain_file;
pub mod so3;

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4};

use nalgebra::{DMatrix, DVector, Isometry3, Translation3, UnitQuaternion, Vector3, Vector6};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use chain_file::{read_chain, write_chain};

#[derive(Debug, Error)]
pub enum KinematicsError {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("invalid joint `{name}`: {msg}")]
    InvalidJoint { name: String, msg: String },
    #[error("chain file: {0}")]
    Parse(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JointKind {
    Revolute,
    Prismatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct JointLimits {
    pub pos_min: f64,
    pub pos_max: f64,
    pub vel_max: f64,
    pub acc_max: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointModel {
    pub name: String,
    pub kind: JointKind,
    /// Unit axis in the joint frame.
    pub axis: Vector3<f64>,
    /// Fixed transform from the parent frame to the joint frame.
    pub origin: Isometry3<f64>,
    pub limits: JointLimits,
}

impl JointModel {
    pub fn new(
        name: impl Into<String>,
        kind: JointKind,
        axis: Vector3<f64>,
        origin: Isometry3<f64>,
        limits: JointLimits,
    ) -> Result<Self, KinematicsError> {
        let j = Self { name: name.into(), kind, axis, origin, limits };
        j.validate()?;
        Ok(j)
    }

    fn validate(&self) -> Result<(), KinematicsError> {
        let err = |msg: &str| Err(KinematicsError::InvalidJoint { name: self.name.clone(), msg: msg.into() });
        if (self.axis.norm() - 1.0).abs() > 1e-12 {
            return err("axis must have unit norm");
        }
        let l = &self.limits;
        if !(l.pos_min < l.pos_max) {
            return err("pos_min must be below pos_max");
        }
        if !(l.vel_max > 0.0) || !(l.acc_max > 0.0) {
            return err("velocity and acceleration limits must be positive");
        }
        Ok(())
    }

    /// Joint motion for coordinate `q`.
    fn motion(&self, q: f64) -> Isometry3<f64> {
        match self.kind {
            JointKind::Revolute => Isometry3::from_parts(
                Translation3::identity(),
                UnitQuaternion::from_scaled_axis(self.axis * q),
            ),
            JointKind::Prismatic => Isometry3::from_parts(Translation3::from(self.axis * q), UnitQuaternion::identity()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KinematicChain {
    pub joints: Vec<JointModel>,
    pub ee_offset: Isometry3<f64>,
}

/// End-effector pose in the world frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub position: Vector3<f64>,
    pub orientation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(position: Vector3<f64>, orientation: UnitQuaternion<f64>) -> Self {
        Self { position, orientation }
    }

    pub fn from_isometry(iso: &Isometry3<f64>) -> Self {
        Self { position: iso.translation.vector, orientation: renormalize(iso.rotation) }
    }

    pub fn to_isometry(&self) -> Isometry3<f64> {
        Isometry3::from_parts(Translation3::from(self.position), self.orientation)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JointState {
    pub q: DVector<f64>,
    pub q_dot: DVector<f64>,
}

impl JointState {
    pub fn at_rest(q: DVector<f64>) -> Self {
        let n = q.len();
        Self { q, q_dot: DVector::zeros(n) }
    }
}

fn renormalize(q: UnitQuaternion<f64>) -> UnitQuaternion<f64> {
    UnitQuaternion::new_normalize(q.into_inner())
}

impl KinematicChain {
    pub fn new(joints: Vec<JointModel>, ee_offset: Isometry3<f64>) -> Result<Self, KinematicsError> {
        for j in &joints {
            j.validate()?;
        }
        Ok(Self { joints, ee_offset })
    }

    pub fn dof(&self) -> usize {
        self.joints.len()
    }

    fn check_len(&self, q: &DVector<f64>) -> Result<(), KinematicsError> {
        if q.len() != self.dof() {
            return Err(KinematicsError::DimensionMismatch(format!(
                "configuration has length {}, chain has {} joints",
                q.len(),
                self.dof()
            )));
        }
        Ok(())
    }

    pub fn pos_min(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.limits.pos_min))
    }

    pub fn pos_max(&self) -> DVector<f64> {
        DVector::from_iterator(self.dof(), self.joints.iter().map(|j| j.limits.pos_max))
    }

    /// Planar holonomic base: `x`, `y` prismatic and yaw revolute.
    pub fn planar_base() -> Self {
        let lin = JointLimits { pos_min: -50.0, pos_max: 50.0, vel_max: 1.0, acc_max: 1.0 };
        let yaw = JointLimits { pos_min: -100.0, pos_max: 100.0, vel_max: 1.0, acc_max: 1.0 };
        let joints = vec![
            JointModel::new("base_x", JointKind::Prismatic, Vector3::x(), Isometry3::identity(), lin),
            JointModel::new("base_y", JointKind::Prismatic, Vector3::y(), Isometry3::identity(), lin),
            JointModel::new("base_yaw", JointKind::Revolute, Vector3::z(), Isometry3::identity(), yaw),
        ]
        .into_iter()
        .collect::<Result<Vec<_>, _>>()
        .expect("built-in base is valid");
        Self { joints, ee_offset: Isometry3::identity() }
    }

    /// Default 10-DoF mobile manipulator: planar base plus a Panda-like arm
    /// mounted at `(0.2, 0, 0.4)` on the base, in modified DH convention.
    pub fn mobile_manipulator() -> Self {
        const A: [f64; 7] = [0.0, 0.0, 0.0, 0.0825, -0.0825, 0.0, 0.088];
        const D: [f64; 7] = [0.333, 0.0, 0.316, 0.0, 0.384, 0.0, 0.0];
        const ALPHA: [f64; 7] = [0.0, -FRAC_PI_2, FRAC_PI_2, FRAC_PI_2, -FRAC_PI_2, FRAC_PI_2, FRAC_PI_2];
        const Q_MIN: [f64; 7] = [-2.8973, -1.7628, -2.8973, -3.0718, -2.8973, -0.0175, -2.8973];
        const Q_MAX: [f64; 7] = [2.8973, 1.7628, 2.8973, -0.0698, 2.8973, 3.7525, 2.8973];
        const V_MAX: [f64; 7] = [2.175, 2.175, 2.175, 2.175, 2.61, 2.61, 2.61];
        const A_MAX: [f64; 7] = [15.0, 7.5, 10.0, 12.5, 15.0, 20.0, 20.0];

        let mut chain = Self::planar_base();
        let mount = Isometry3::translation(0.2, 0.0, 0.4);
        for i in 0..7 {
            let rot = UnitQuaternion::from_axis_angle(&Vector3::x_axis(), ALPHA[i]);
            let offset = Vector3::new(A[i], 0.0, 0.0) + rot * Vector3::new(0.0, 0.0, D[i]);
            let mut origin = Isometry3::from_parts(Translation3::from(offset), rot);
            if i == 0 {
                origin = mount * origin;
            }
            let limits = JointLimits { pos_min: Q_MIN[i], pos_max: Q_MAX[i], vel_max: V_MAX[i], acc_max: A_MAX[i] };
            let joint = JointModel::new(format!("arm_{}", i + 1), JointKind::Revolute, Vector3::z(), origin, limits)
                .expect("built-in arm is valid");
            chain.joints.push(joint);
        }
        // flange plus gripper, tool z along the approach direction
        chain.ee_offset = Isometry3::from_parts(
            Translation3::new(0.0, 0.0, 0.107 + 0.1034),
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), -FRAC_PI_4),
        );
        chain
    }

    /// Arm "ready" posture with the base at the origin.
    pub fn ready_configuration() -> DVector<f64> {
        DVector::from_column_slice(&[
            0.0,
            0.0,
            0.0,
            0.0,
            -FRAC_PI_4,
            0.0,
            -3.0 * FRAC_PI_4,
            0.0,
            FRAC_PI_2,
            FRAC_PI_4,
        ])
    }

    /// World transform of every joint frame before its motion is applied,
    /// plus the end-effector transform.
    fn frames(&self, q: &DVector<f64>) -> (Vec<Isometry3<f64>>, Isometry3<f64>) {
        let mut t = Isometry3::identity();
        let mut frames = Vec::with_capacity(self.dof());
        for (joint, &qi) in self.joints.iter().zip(q.iter()) {
            t *= joint.origin;
            frames.push(t);
            t *= joint.motion(qi);
            t.rotation = renormalize(t.rotation);
        }
        (frames, t * self.ee_offset)
    }

    pub fn forward_kinematics(&self, q: &DVector<f64>) -> Result<Pose, KinematicsError> {
        self.check_len(q)?;
        Ok(Pose::from_isometry(&self.frames(q).1))
    }

    /// 6 x n Jacobian; linear rows first, all in world coordinates.
    pub fn geometric_jacobian(&self, q: &DVector<f64>) -> Result<DMatrix<f64>, KinematicsError> {
        self.check_len(q)?;
        let (frames, ee) = self.frames(q);
        let p_ee = ee.translation.vector;
        let mut j = DMatrix::zeros(6, self.dof());
        for (i, (joint, frame)) in self.joints.iter().zip(&frames).enumerate() {
            let z = frame.rotation * joint.axis;
            let col = match joint.kind {
                JointKind::Revolute => {
                    let lin = z.cross(&(p_ee - frame.translation.vector));
                    Vector6::new(lin.x, lin.y, lin.z, z.x, z.y, z.z)
                }
                JointKind::Prismatic => Vector6::new(z.x, z.y, z.z, 0.0, 0.0, 0.0),
            };
            j.set_column(i, &col);
        }
        Ok(j)
    }

    /// Explicit Euler step clamped to position limits. The flag reports
    /// whether any joint was clamped.
    pub fn integrate_state(&self, state: &JointState, q_dot: &DVector<f64>, dt: f64) -> (JointState, bool) {
        let mut q = &state.q + q_dot * dt;
        let mut hit = false;
        for (i, joint) in self.joints.iter().enumerate() {
            let clamped = q[i].clamp(joint.limits.pos_min, joint.limits.pos_max);
            if clamped != q[i] {
                hit = true;
                q[i] = clamped;
            }
        }
        (JointState { q, q_dot: q_dot.clone() }, hit)
    }
}

/// Position difference stacked with the rotation vector of `q_d q_a^-1`.
pub fn pose_error(x_d: &Pose, x_a: &Pose) -> Vector6<f64> {
    let dp = x_d.position - x_a.position;
    let dr = so3::log(&(x_d.orientation * x_a.orientation.inverse()));
    Vector6::new(dp.x, dp.y, dp.z, dr.x, dr.y, dr.z)
}
