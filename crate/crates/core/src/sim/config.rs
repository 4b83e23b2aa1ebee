//! Simulation configuration, loaded from TOML.

use std::path::{Path, PathBuf};

use nalgebra::{DVector, Matrix3, UnitQuaternion, Vector3};
use serde::{Deserialize, Serialize};

use crate::ergomap::{
    fit_map_from_grid, read_grid_csv, select_map, synthetic_curvature, ErgonomicsMap, HumanPoseState, MapRegistry,
    StatureThresholds, SubjectProfile,
};
use crate::kinematics::{read_chain, KinematicChain};
use crate::qp::SolverSettings;
use crate::svm::SvmVariant;
use crate::tasks::GainSet;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ErgonomicsMode {
    Ergonomics,
    MinVelocityBenchmark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum PlantKind {
    IdealKinematic,
    ImpedancePlant,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HrswConfig {
    pub pos_min: [f64; 3],
    pub pos_max: [f64; 3],
    pub orient_halfwidth: [f64; 3],
    /// Roll-pitch-yaw of the orientation centre; the initial end-effector
    /// orientation when absent.
    #[serde(default)]
    pub orient_center_rpy: Option<[f64; 3]>,
}

impl Default for HrswConfig {
    fn default() -> Self {
        Self {
            pos_min: [0.4, -0.3, 0.7],
            pos_max: [1.0, 0.3, 1.2],
            orient_halfwidth: [0.1, 0.1, 0.1],
            orient_center_rpy: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LimitsConfig {
    /// Bound joint accelerations around the previous command.
    pub joint_acc: bool,
    /// `[linear m/s, angular rad/s]` caps on the desired-pose velocity.
    pub xd_vel_max: Option<[f64; 2]>,
    /// `[linear m/s^2, angular rad/s^2]` caps on the desired-pose acceleration.
    pub xd_acc_max: Option<[f64; 2]>,
}

impl Default for LimitsConfig {
    fn default() -> Self {
        Self { joint_acc: false, xd_vel_max: Some([0.5, 1.0]), xd_acc_max: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "snake_case", deny_unknown_fields)]
pub enum MapSource {
    /// One synthetic map per stature class, selected by subject height.
    Synthetic { spacing: f64 },
    /// Fit a map to an `x,y,z,score` grid file.
    Grid { path: PathBuf },
    /// Bowl centred at `center` (human frame) with the given curvature, or
    /// the synthetic curvature when absent.
    Bowl { center: [f64; 3], curvature: Option<[[f64; 3]; 3]> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ClassifierConfig {
    pub c: f64,
    pub variant: SvmVariant,
    /// Synthetic training set: size, feature dimension and seed.
    pub n_train: usize,
    pub dim: usize,
    pub seed: u64,
}

impl Default for ClassifierConfig {
    fn default() -> Self {
        Self { c: 10.0, variant: SvmVariant::L2, n_train: 200, dim: 16, seed: 11 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    pub tol: f64,
    pub max_iterations: usize,
}

impl Default for SolverConfig {
    fn default() -> Self {
        let s = SolverSettings::default();
        Self { tol: s.tol_primal, max_iterations: s.max_iterations }
    }
}

/// Desired pose at start, when it should differ from the actual one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetConfig {
    /// Offset of the position from the initial end-effector position (m).
    pub offset: [f64; 3],
    /// World-frame rotation vector applied to the initial orientation (rad).
    #[serde(default)]
    pub rotation: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt: f64,
    pub duration: f64,
    pub gains: GainSet,
    pub limits: LimitsConfig,
    pub ergonomics_mode: ErgonomicsMode,
    /// Keep the benchmark level until a `BecomeCollaborative` event.
    pub ergonomics_gated: bool,
    pub plant: PlantKind,
    pub subject_height: f64,
    pub thresholds: StatureThresholds,
    pub human_position: [f64; 3],
    pub human_heading: f64,
    pub hrsw: HrswConfig,
    /// Displacement of the box and the human per walk step, in a frame whose
    /// x axis is the walking direction.
    pub walk_follow_offset: [f64; 3],
    pub map: MapSource,
    pub classifier: ClassifierConfig,
    pub solver: SolverConfig,
    /// Initial joint positions; the ready posture when absent.
    pub initial_q: Option<Vec<f64>>,
    pub initial_target: Option<TargetConfig>,
    pub slack: bool,
    pub chain_file: Option<PathBuf>,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            dt: 1e-3,
            duration: 8.0,
            gains: GainSet::default(),
            limits: LimitsConfig::default(),
            ergonomics_mode: ErgonomicsMode::Ergonomics,
            ergonomics_gated: true,
            plant: PlantKind::IdealKinematic,
            subject_height: 1.75,
            thresholds: StatureThresholds::default(),
            human_position: [1.2, 0.0, 0.0],
            human_heading: std::f64::consts::PI,
            hrsw: HrswConfig::default(),
            walk_follow_offset: [0.2, 0.0, 0.0],
            map: MapSource::Synthetic { spacing: 0.05 },
            classifier: ClassifierConfig::default(),
            solver: SolverConfig::default(),
            initial_q: None,
            initial_target: None,
            slack: true,
            chain_file: None,
        }
    }
}

impl SimConfig {
    pub fn from_toml(text: &str) -> Result<Self, SimError> {
        let cfg: Self = toml::from_str(text).map_err(|e| SimError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a config file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self, SimError> {
        let text = std::fs::read_to_string(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text).map_err(|e| match e {
            SimError::Config(msg) => SimError::Config(format!("{}: {msg}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        if let Some(p) = &cfg.chain_file {
            cfg.chain_file = Some(base.join(p));
        }
        if let MapSource::Grid { path } = &cfg.map {
            cfg.map = MapSource::Grid { path: base.join(path) };
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let bad = |msg: String| Err(SimError::Config(msg));
        if !(self.dt > 0.0) || !self.dt.is_finite() {
            return bad(format!("dt must be positive, got {}", self.dt));
        }
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return bad(format!("duration must be positive, got {}", self.duration));
        }
        if !(self.solver.tol > 0.0) || self.solver.max_iterations == 0 {
            return bad("solver tolerance and iteration cap must be positive".into());
        }
        SubjectProfile::new(self.subject_height).map_err(|e| SimError::Config(e.to_string()))?;
        self.gains.validate().map_err(|e| SimError::Config(e.to_string()))?;
        let h = &self.hrsw;
        if (0..3).any(|i| h.pos_min[i] > h.pos_max[i]) || h.orient_halfwidth.iter().any(|w| !(*w >= 0.0)) {
            return bad("HRSW bounds must be ordered and half-widths nonnegative".into());
        }
        Ok(())
    }

    pub fn steps(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn solver_settings(&self) -> SolverSettings {
        SolverSettings {
            tol_stationarity: self.solver.tol,
            tol_primal: self.solver.tol,
            tol_complementarity: self.solver.tol,
            max_iterations: self.solver.max_iterations,
            ..SolverSettings::default()
        }
    }

    pub fn subject(&self) -> SubjectProfile {
        SubjectProfile { height: self.subject_height }
    }

    pub fn human(&self) -> HumanPoseState {
        HumanPoseState { position: Vector3::from(self.human_position), heading: self.human_heading, timestamp: 0.0 }
    }

    pub fn chain(&self) -> Result<KinematicChain, SimError> {
        match &self.chain_file {
            None => Ok(KinematicChain::mobile_manipulator()),
            Some(p) => {
                let text = std::fs::read_to_string(p).map_err(|e| SimError::Io(format!("{}: {e}", p.display())))?;
                read_chain(&text).map_err(|e| SimError::Config(format!("{}: {e}", p.display())))
            }
        }
    }

    pub fn initial_q(&self, chain: &KinematicChain) -> Result<DVector<f64>, SimError> {
        let q = match &self.initial_q {
            Some(v) => DVector::from_column_slice(v),
            None => KinematicChain::ready_configuration(),
        };
        if q.len() != chain.dof() {
            return Err(SimError::Config(format!("initial_q has {} entries, chain has {} joints", q.len(), chain.dof())));
        }
        Ok(q)
    }

    pub fn orient_center(&self, initial: &UnitQuaternion<f64>) -> UnitQuaternion<f64> {
        match self.hrsw.orient_center_rpy {
            Some([r, p, y]) => UnitQuaternion::from_euler_angles(r, p, y),
            None => *initial,
        }
    }

    /// The human-frame map used for this subject.
    pub fn human_map(&self) -> Result<ErgonomicsMap, SimError> {
        let err = |e: crate::ergomap::ErgoError| SimError::Config(e.to_string());
        match &self.map {
            MapSource::Synthetic { spacing } => {
                let mut reg = MapRegistry::synthetic(*spacing).map_err(err)?;
                reg.thresholds = self.thresholds;
                select_map(&reg, &self.subject()).cloned().map_err(err)
            }
            MapSource::Grid { path } => {
                let file = std::fs::File::open(path).map_err(|e| SimError::Io(format!("{}: {e}", path.display())))?;
                fit_map_from_grid(&read_grid_csv(file).map_err(err)?).map_err(err)
            }
            MapSource::Bowl { center, curvature } => {
                let h = match curvature {
                    Some(rows) => Matrix3::from_fn(|r, c| rows[r][c]),
                    None => synthetic_curvature(),
                };
                Ok(ErgonomicsMap::bowl(h, Vector3::from(*center)))
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_toml() {
        let cfg = SimConfig::default();
        assert_eq!(SimConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn partial_file_uses_defaults() {
        let cfg = SimConfig::from_toml("duration = 2.0\n[map]\nsource = \"bowl\"\ncenter = [0.35, 0.0, 1.0]\n").unwrap();
        assert_eq!(cfg.duration, 2.0);
        assert_eq!(cfg.dt, 1e-3);
        assert_eq!(cfg.steps(), 2000);
    }

    #[test]
    fn rejects_bad_values() {
        assert!(matches!(SimConfig::from_toml("dt = -1.0"), Err(SimError::Config(_))));
        assert!(matches!(SimConfig::from_toml("unknown_key = 1"), Err(SimError::Config(_))));
    }
}
