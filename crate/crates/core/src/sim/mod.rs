//! Closed-loop simulation of the augmented controller.

mod config;
mod events;
mod log;
pub mod scenarios;

use nalgebra::{DVector, Rotation3, UnitQuaternion, Vector2, Vector3, Vector6};
use thiserror::Error;

pub use config::{
    ClassifierConfig, ErgonomicsMode, HrswConfig, LimitsConfig, MapSource, PlantKind, SimConfig, SolverConfig,
    TargetConfig,
};
pub use events::{parse_events, validate_events, write_events, EventKind, ScenarioEvent, Tool};
pub use log::{fmt_f64, SimLog, SimSummary, StepRecord};

use crate::ergomap::{map_to_world, ErgonomicsMap, HumanPoseState};
use crate::hqp::{solve_hierarchy, HqpError, Objective};
use crate::kinematics::{pose_error, JointState, KinematicChain, Pose};
use crate::qp::SolverSettings;
use crate::svm::{predict, synthetic_surface_features, train, LinearModel, Surface};
use crate::tasks::{
    assemble_stack, impedance_torque, integrate_desired, split_solution, AugmentedLayout, BoxLimits, BoxState, HrswBox,
    StackInputs, TaskError, Terminal,
};

#[derive(Debug, Error)]
pub enum SimError {
    #[error("configuration: {0}")]
    Config(String),
    #[error("I/O: {0}")]
    Io(String),
    #[error("scenario line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("event {index}: {msg}")]
    EventOutOfRange { index: usize, msg: String },
    #[error("PickTool at t = {0} before any object was delivered")]
    ToolBeforeDelivery(f64),
    #[error("classifier: {0}")]
    Classifier(String),
    #[error("cascade infeasible at t = {t}: {source}")]
    CascadeInfeasible {
        t: f64,
        #[source]
        source: HqpError,
        log: Box<SimLog>,
    },
    #[error("task construction failed at t = {t}: {source}")]
    Task {
        t: f64,
        #[source]
        source: TaskError,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct ObjectState {
    pub surface_facing_human: Surface,
    pub classified_as: Option<Surface>,
    pub grasped: bool,
}

/// Everything that changes during a run.
#[derive(Debug, Clone)]
pub struct SimState {
    pub t: f64,
    /// Integrated reference configuration.
    pub q_cmd: DVector<f64>,
    pub q_dot_cmd: DVector<f64>,
    /// Configuration of the plant.
    pub actual: JointState,
    pub x_d: Pose,
    pub xd_dot: Vector6<f64>,
    pub hrsw: HrswBox,
    pub human: HumanPoseState,
    pub map_world: ErgonomicsMap,
    pub collaborative: bool,
    pub object: Option<ObjectState>,
    pub tool: Option<Tool>,
    pub walking: Option<Vector2<f64>>,
}

/// Fixed inputs of a run.
pub struct SimContext {
    pub config: SimConfig,
    pub chain: KinematicChain,
    pub map_human: ErgonomicsMap,
    pub classifier: LinearModel,
    pub layout: AugmentedLayout,
    pub limits: BoxLimits,
    pub solver: SolverSettings,
}

impl SimContext {
    pub fn new(config: &SimConfig) -> Result<Self, SimError> {
        config.validate()?;
        let chain = config.chain()?;
        let cc = &config.classifier;
        let data = synthetic_surface_features(cc.n_train, cc.dim, cc.seed, 0.5);
        let classifier = train(&data, cc.c, cc.variant).map_err(|e| SimError::Classifier(e.to_string()))?;
        let n = chain.dof();
        Ok(Self {
            layout: AugmentedLayout::new(n, 6, config.slack),
            limits: BoxLimits {
                joints: chain.joints.iter().map(|j| j.limits).collect(),
                joint_acc: config.limits.joint_acc,
                xd_vel_max: config.limits.xd_vel_max,
                xd_acc_max: config.limits.xd_acc_max,
            },
            solver: config.solver_settings(),
            map_human: config.human_map()?,
            chain,
            classifier,
            config: config.clone(),
        })
    }

    pub fn initial_state(&self) -> Result<SimState, SimError> {
        let cfg = &self.config;
        let q = cfg.initial_q(&self.chain)?;
        let x_a = self.fk(&q);
        let mut x_d = x_a;
        if let Some(target) = &cfg.initial_target {
            x_d.position += Vector3::from(target.offset);
            x_d.orientation = UnitQuaternion::from_scaled_axis(Vector3::from(target.rotation)) * x_d.orientation;
        }
        let hrsw = HrswBox {
            pos_min: Vector3::from(cfg.hrsw.pos_min),
            pos_max: Vector3::from(cfg.hrsw.pos_max),
            orient_center: cfg.orient_center(&x_a.orientation),
            orient_halfwidth: Vector3::from(cfg.hrsw.orient_halfwidth),
        };
        let human = cfg.human();
        let map_world = map_to_world(&self.map_human, &human).map_err(|e| SimError::Config(e.to_string()))?;
        let n = q.len();
        Ok(SimState {
            t: 0.0,
            q_dot_cmd: DVector::zeros(n),
            actual: JointState::at_rest(q.clone()),
            q_cmd: q,
            x_d,
            xd_dot: Vector6::zeros(),
            hrsw,
            human,
            map_world,
            collaborative: false,
            object: None,
            tool: None,
            walking: None,
        })
    }

    fn fk(&self, q: &DVector<f64>) -> Pose {
        self.chain.forward_kinematics(q).expect("configuration length checked at start")
    }

    fn ergonomics_active(&self, state: &SimState) -> bool {
        self.config.ergonomics_mode == ErgonomicsMode::Ergonomics
            && (state.collaborative || !self.config.ergonomics_gated)
    }
}

/// Whether the object must be turned so the surface matching `tool` faces
/// the human.
pub fn reorientation_decision(surface: Surface, tool: Tool) -> bool {
    matches!((surface, tool), (Surface::Smooth, Tool::Drill) | (Surface::Drilled, Tool::Polisher))
}

fn flip(s: Surface) -> Surface {
    match s {
        Surface::Smooth => Surface::Drilled,
        Surface::Drilled => Surface::Smooth,
    }
}

/// Applies one event and returns the new state.
pub fn apply_event(ctx: &SimContext, state: &SimState, event: &ScenarioEvent) -> Result<SimState, SimError> {
    let mut next = state.clone();
    match &event.kind {
        EventKind::BecomeCollaborative => next.collaborative = true,
        EventKind::DeliverObject { features, true_surface } => {
            let x = DVector::from_column_slice(features);
            let label = predict(&ctx.classifier, &x).map_err(|e| SimError::Classifier(e.to_string()))?;
            next.object = Some(ObjectState {
                surface_facing_human: *true_surface,
                classified_as: Some(Surface::from_label(label)),
                grasped: true,
            });
        }
        EventKind::PickTool { tool } => {
            let obj = match &mut next.object {
                Some(o) if o.grasped => o,
                _ => return Err(SimError::ToolBeforeDelivery(event.t)),
            };
            next.tool = Some(*tool);
            let believed = obj.classified_as.unwrap_or(obj.surface_facing_human);
            if reorientation_decision(believed, *tool) {
                let x_a = ctx.fk(&state.actual.q);
                let approach = x_a.orientation * Vector3::z_axis();
                let turn = UnitQuaternion::from_axis_angle(&approach, std::f64::consts::PI);
                next.hrsw.orient_center = UnitQuaternion::new_normalize((turn * next.hrsw.orient_center).into_inner());
                obj.surface_facing_human = flip(obj.surface_facing_human);
                obj.classified_as = obj.classified_as.map(flip);
            }
        }
        EventKind::WalkStep { direction } => {
            let dir = Vector2::new(direction[0], direction[1]);
            let rot = Rotation3::from_axis_angle(&Vector3::z_axis(), dir.y.atan2(dir.x));
            let delta = rot * Vector3::from(ctx.config.walk_follow_offset);
            next.hrsw.translate(&delta);
            next.human.position += delta;
            next.human.timestamp = event.t;
            next.walking = Some(dir);
            next.map_world = map_to_world(&ctx.map_human, &next.human).map_err(|e| SimError::Config(e.to_string()))?;
        }
        EventKind::StopWalking => next.walking = None,
        EventKind::SetHumanPose { position, heading } => {
            next.human = HumanPoseState { position: Vector3::from(*position), heading: *heading, timestamp: event.t };
            next.map_world = map_to_world(&ctx.map_human, &next.human).map_err(|e| SimError::Config(e.to_string()))?;
        }
    }
    Ok(next)
}

fn pose_array(p: &Pose) -> [f64; 7] {
    let q = p.orientation.quaternion();
    [p.position.x, p.position.y, p.position.z, q.w, q.i, q.j, q.k]
}

/// Runs the scenario and returns the full log. On an infeasible cascade the
/// error carries the log up to the failing step.
pub fn run_scenario(config: &SimConfig, events: &[ScenarioEvent]) -> Result<SimLog, SimError> {
    let ctx = SimContext::new(config)?;
    run_with_context(&ctx, events)
}

pub fn run_with_context(ctx: &SimContext, events: &[ScenarioEvent]) -> Result<SimLog, SimError> {
    let cfg = &ctx.config;
    validate_events(events, cfg.duration)?;
    let mut state = ctx.initial_state()?;
    let dt = cfg.dt;
    let steps = cfg.steps();
    let mut log = SimLog { records: Vec::with_capacity(steps), ..SimLog::default() };
    let mode = match cfg.ergonomics_mode {
        ErgonomicsMode::Ergonomics => "ergonomics",
        ErgonomicsMode::MinVelocityBenchmark => "benchmark",
    };
    let mut next_event = 0;
    let n = ctx.chain.dof();
    let n_arm = n.saturating_sub(3);

    for k in 0..steps {
        let t = k as f64 * dt;
        state.t = t;
        let mut fired = Vec::new();
        // events due by the start of this step, with slack for float noise
        while next_event < events.len() && events[next_event].t <= t + 1e-9 * dt.max(1.0) {
            let ev = &events[next_event];
            state = apply_event(ctx, &state, ev)?;
            fired.push(ev.kind.name().to_string());
            next_event += 1;
        }

        let x_a = ctx.fk(&state.actual.q);
        let jac = ctx.chain.geometric_jacobian(&state.actual.q).expect("length checked");
        let ergo_on = ctx.ergonomics_active(&state);
        let terminal = if ergo_on { Terminal::Ergonomics(&state.map_world) } else { Terminal::MinVelocity };
        let inputs = StackInputs {
            layout: ctx.layout,
            jacobian: &jac,
            x_a: &x_a,
            x_d_prev: &state.x_d,
            hrsw: &state.hrsw,
            gains: &cfg.gains,
            limits: &ctx.limits,
            box_state: BoxState { q: &state.q_cmd, q_dot_prev: &state.q_dot_cmd, xd_dot_prev: &state.xd_dot },
            terminal,
            dt,
        };
        let hierarchy = match assemble_stack(&inputs) {
            Ok(h) => h,
            Err(source) => return Err(SimError::Task { t, source }),
        };
        let result = match solve_hierarchy(&hierarchy, &ctx.solver) {
            Ok(r) => r,
            Err(source) => {
                log.finalize(mode, 0.0, Some(t));
                return Err(SimError::CascadeInfeasible { t, source, log: Box::new(log) });
            }
        };
        let split = split_solution(&result.chi_star, &ctx.layout).map_err(|source| SimError::Task { t, source })?;
        let q_dot = split.q_dot();

        let x_d_next = integrate_desired(&state.x_d, &split.xd_dot, &state.hrsw.orient_center, dt);
        let (cmd, _) = ctx.chain.integrate_state(&JointState { q: state.q_cmd.clone(), q_dot: q_dot.clone() }, &q_dot, dt);

        state.actual = match cfg.plant {
            PlantKind::IdealKinematic => cmd.clone(),
            PlantKind::ImpedancePlant => {
                let mut a = state.actual.clone();
                let arm = |v: &DVector<f64>| v.rows(3, n_arm).into_owned();
                let tau = impedance_torque(
                    &arm(&cmd.q),
                    &arm(&q_dot),
                    &arm(&a.q),
                    &arm(&a.q_dot),
                    &cfg.gains,
                    &DVector::zeros(n_arm),
                )
                .map_err(|source| SimError::Task { t, source })?;
                // unit inertia; gravity compensation cancels the plant's gravity
                for i in 0..n_arm {
                    a.q_dot[3 + i] += tau[i] * dt;
                    a.q[3 + i] += a.q_dot[3 + i] * dt;
                }
                for i in 0..3 {
                    a.q[i] = cmd.q[i];
                    a.q_dot[i] = q_dot[i];
                }
                a
            }
        };
        state.q_cmd = cmd.q;
        state.q_dot_cmd = q_dot;
        state.xd_dot = split.xd_dot;
        state.x_d = x_d_next;

        let x_a_next = ctx.fk(&state.actual.q);
        let violation = state.hrsw.violation(&state.x_d);
        let soft_min = state.hrsw.pos_min - split.slack.fixed_rows::<3>(0).map(|s| s.max(0.0));
        let soft_max = state.hrsw.pos_max + split.slack.fixed_rows::<3>(0).map(|s| s.max(0.0));
        let ee_excess = (0..3)
            .map(|i| (x_a_next.position[i] - soft_max[i]).max(soft_min[i] - x_a_next.position[i]))
            .fold(0.0, f64::max);
        let residual = |lvl: usize| match (&hierarchy.levels.get(lvl).map(|l| &l.objective), result.per_level.get(lvl)) {
            (Some(Objective::LeastSquares { a, b }), Some(_)) => (a * &result.chi_star - b).norm(),
            (Some(Objective::Quadratic { .. }), Some(r)) => r.objective_value,
            _ => 0.0,
        };
        let c = state.hrsw.orient_center.quaternion();
        log.records.push(StepRecord {
            t: (k + 1) as f64 * dt,
            q: state.actual.q.iter().copied().collect(),
            x_a: pose_array(&x_a_next),
            x_d: pose_array(&state.x_d),
            chi: result.chi_star.iter().copied().collect(),
            slack: split.slack.into(),
            e_s: state.map_world.evaluate(&state.x_d.position),
            box_min: state.hrsw.pos_min.into(),
            box_max: state.hrsw.pos_max.into(),
            box_center: [c.w, c.i, c.j, c.k],
            violation: violation.into(),
            ee_excess,
            clik_residual: residual(0),
            slack_residual: if ctx.layout.slack_active { residual(1) } else { 0.0 },
            terminal_objective: residual(hierarchy.levels.len() - 1),
            strictness: result.strictness(&hierarchy),
            pose_error: pose_error(&state.x_d, &x_a_next).norm(),
            ergonomics_active: ergo_on,
            events: fired,
        });
    }

    let map_min = state.map_world.evaluate(&state.map_world.minimizer());
    log.finalize(mode, map_min, None);
    Ok(log)
}

/// Paired runs with and without the ergonomics level.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub ergonomics: SimLog,
    pub benchmark: SimLog,
}

impl ComparisonReport {
    /// `(t, e_s ergonomics, e_s benchmark)` rows.
    pub fn paired_trace(&self) -> Vec<(f64, f64, f64)> {
        self.ergonomics
            .records
            .iter()
            .zip(&self.benchmark.records)
            .map(|(a, b)| (a.t, a.e_s, b.e_s))
            .collect()
    }

    pub fn summary_json(&self) -> String {
        let v = serde_json::json!({
            "ergonomics": {
                "mean_e_s": self.ergonomics.summary.mean_e_s,
                "final_e_s": self.ergonomics.summary.final_e_s,
            },
            "benchmark": {
                "mean_e_s": self.benchmark.summary.mean_e_s,
                "final_e_s": self.benchmark.summary.final_e_s,
            },
            "map_minimum_e_s": self.ergonomics.summary.map_minimum_e_s,
            "steps": self.ergonomics.summary.steps,
        });
        serde_json::to_string_pretty(&v).expect("report serializes") + "\n"
    }
}

/// Runs the scenario in both modes, in parallel.
pub fn compare_modes(config: &SimConfig, events: &[ScenarioEvent]) -> Result<ComparisonReport, SimError> {
    let mut ergo_cfg = config.clone();
    ergo_cfg.ergonomics_mode = ErgonomicsMode::Ergonomics;
    let mut bench_cfg = config.clone();
    bench_cfg.ergonomics_mode = ErgonomicsMode::MinVelocityBenchmark;
    let (a, b) = std::thread::scope(|s| {
        let ha = s.spawn(|| run_scenario(&ergo_cfg, events));
        let hb = s.spawn(|| run_scenario(&bench_cfg, events));
        (ha.join().expect("ergonomics run panicked"), hb.join().expect("benchmark run panicked"))
    });
    Ok(ComparisonReport { ergonomics: a?, benchmark: b? })
}
