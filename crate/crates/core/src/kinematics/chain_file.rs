//! TOML chain description.
//!
//! ```toml
//! [[joint]]
//! name = "base_x"
//! kind = "prismatic"          # or "revolute"
//! axis = [1.0, 0.0, 0.0]
//! xyz = [0.0, 0.0, 0.0]       # origin translation in the parent frame
//! rpy = [0.0, 0.0, 0.0]       # origin rotation, roll-pitch-yaw (rad)
//! limits = { pos_min = -50.0, pos_max = 50.0, vel_max = 1.0, acc_max = 1.0 }
//!
//! [ee_offset]
//! xyz = [0.0, 0.0, 0.2104]
//! rpy = [0.0, 0.0, -0.785398]
//! ```

use nalgebra::{Isometry3, Translation3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use super::{JointKind, JointLimits, JointModel, KinematicChain, KinematicsError};

#[derive(Serialize, Deserialize)]
struct ChainFile {
    joint: Vec<JointRecord>,
    ee_offset: FrameRecord,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct JointRecord {
    name: String,
    kind: JointKind,
    axis: [f64; 3],
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
    limits: JointLimits,
}

#[derive(Serialize, Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct FrameRecord {
    #[serde(default)]
    xyz: [f64; 3],
    #[serde(default)]
    rpy: [f64; 3],
}

impl FrameRecord {
    fn to_isometry(&self) -> Isometry3<f64> {
        let [x, y, z] = self.xyz;
        let [r, p, w] = self.rpy;
        Isometry3::from_parts(Translation3::new(x, y, z), UnitQuaternion::from_euler_angles(r, p, w))
    }

    fn from_isometry(iso: &Isometry3<f64>) -> Self {
        let t = iso.translation.vector;
        let (r, p, w) = iso.rotation.euler_angles();
        Self { xyz: [t.x, t.y, t.z], rpy: [r, p, w] }
    }
}

pub fn read_chain(text: &str) -> Result<KinematicChain, KinematicsError> {
    let file: ChainFile = toml::from_str(text).map_err(|e| KinematicsError::Parse(e.to_string()))?;
    let joints = file
        .joint
        .into_iter()
        .map(|r| {
            let frame = FrameRecord { xyz: r.xyz, rpy: r.rpy };
            JointModel::new(r.name, r.kind, Vector3::from(r.axis), frame.to_isometry(), r.limits)
        })
        .collect::<Result<Vec<_>, _>>()?;
    KinematicChain::new(joints, file.ee_offset.to_isometry())
}

pub fn write_chain(chain: &KinematicChain) -> String {
    let file = ChainFile {
        joint: chain
            .joints
            .iter()
            .map(|j| {
                let frame = FrameRecord::from_isometry(&j.origin);
                JointRecord {
                    name: j.name.clone(),
                    kind: j.kind,
                    axis: j.axis.into(),
                    xyz: frame.xyz,
                    rpy: frame.rpy,
                    limits: j.limits,
                }
            })
            .collect(),
        ee_offset: FrameRecord::from_isometry(&chain.ee_offset),
    };
    toml::to_string(&file).expect("chain serializes")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_preserves_kinematics() {
        let chain = KinematicChain::mobile_manipulator();
        let back = read_chain(&write_chain(&chain)).unwrap();
        let q = KinematicChain::ready_configuration();
        let a = chain.forward_kinematics(&q).unwrap();
        let b = back.forward_kinematics(&q).unwrap();
        assert!((a.position - b.position).amax() < 1e-12);
        assert!(a.orientation.angle_to(&b.orientation) < 1e-12);
    }

    #[test]
    fn rejects_non_unit_axis() {
        let text = r#"
[[joint]]
name = "j"
kind = "revolute"
axis = [0.0, 0.0, 2.0]
limits = { pos_min = -1.0, pos_max = 1.0, vel_max = 1.0, acc_max = 1.0 }

[ee_offset]
"#;
        assert!(matches!(read_chain(text), Err(KinematicsError::InvalidJoint { .. })));
    }

    #[test]
    fn reports_unknown_kind() {
        let text = "[[joint]]\nname='j'\nkind='ball'\naxis=[0,0,1]\nlimits={pos_min=-1.0,pos_max=1.0,vel_max=1.0,acc_max=1.0}\n[ee_offset]\n";
        assert!(matches!(read_chain(text), Err(KinematicsError::Parse(_))));
    }
}
