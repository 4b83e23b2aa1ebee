//! Acceptance criteria. Prints one line per criterion and exits nonzero if
//! any fails.

use std::time::Instant;

use ahqp::check::{jacobian_fd_error, random_configuration, random_human, random_map, random_qp, random_stack};
use ahqp::ergomap::{fit_map_from_grid, map_to_world, ScoreGrid};
use ahqp::hqp::solve_hierarchy;
use ahqp::kinematics::{KinematicChain, Pose};
use ahqp::qp::{solve_qp, QpStatus, SolverSettings};
use ahqp::sim::scenarios::{exp3_config, exp3_events, exp4_config, exp4_events, sample_features};
use ahqp::sim::{
    compare_modes, reorientation_decision, run_scenario, ErgonomicsMode, EventKind, MapSource, ScenarioEvent,
    SimConfig, SimLog, TargetConfig, Tool,
};
use ahqp::svm::{
    accuracy, constrained_problem, l2_gradient, objective, synthetic_surface_features, train, LabeledSet, LinearModel,
    Surface, SvmVariant,
};
use ahqp::tasks::HrswBox;
use nalgebra::{DMatrix, DVector, Matrix3, Quaternion, UnitQuaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;

fn verdict(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn quat(a: &[f64]) -> UnitQuaternion<f64> {
    UnitQuaternion::from_quaternion(Quaternion::new(a[0], a[1], a[2], a[3]))
}

fn pose_of(a: &[f64; 7]) -> Pose {
    Pose::new(Vector3::new(a[0], a[1], a[2]), quat(&a[3..]))
}

fn c1_qp() -> Outcome {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let settings = SolverSettings::default();
    let mut worst_kkt: f64 = 0.0;
    let mut failures = 0;
    for _ in 0..100 {
        let s = rng.random_range(2..=20);
        let mi = rng.random_range(0..=2 * s);
        let me = rng.random_range(0..s / 2 + 1);
        let sol = solve_qp(&random_qp(&mut rng, s, mi, me), &settings).map_err(|e| e.to_string())?;
        if sol.status != QpStatus::Solved {
            failures += 1;
        }
        worst_kkt = worst_kkt.max(sol.kkt.max());
    }
    let mut worst_eq: f64 = 0.0;
    for _ in 0..50 {
        let s = rng.random_range(2..=20);
        let me = rng.random_range(1..s);
        let qp = random_qp(&mut rng, s, 0, me);
        let n = s + me;
        let mut k = DMatrix::zeros(n, n);
        k.view_mut((0, 0), (s, s)).copy_from(&qp.h);
        k.view_mut((s, 0), (me, s)).copy_from(&qp.e);
        k.view_mut((0, s), (s, me)).copy_from(&qp.e.transpose());
        let mut rhs = DVector::zeros(n);
        rhs.rows_mut(0, s).copy_from(&-&qp.g);
        rhs.rows_mut(s, me).copy_from(&qp.f);
        let exact = k.lu().solve(&rhs).ok_or("singular KKT")?;
        let sol = solve_qp(&qp, &settings).map_err(|e| e.to_string())?;
        worst_eq = worst_eq.max((&sol.x - exact.rows(0, s)).amax());
    }
    let secs = start.elapsed().as_secs_f64();
    verdict(
        failures == 0 && worst_kkt <= 1e-6 && worst_eq <= 1e-8 && secs < 5.0,
        format!("max KKT {worst_kkt:.2e}, equality-only error {worst_eq:.2e}, {failures} unsolved, {secs:.2} s"),
    )
}

fn c2_strictness(bundled: &[(&str, &SimLog)]) -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut worst: f64 = 0.0;
    for _ in 0..50 {
        let s = rng.random_range(6..=16);
        let stack = random_stack(&mut rng, s);
        let res = solve_hierarchy(&stack, &SolverSettings::default()).map_err(|e| e.to_string())?;
        worst = worst.max(res.strictness(&stack));
    }
    let sim = bundled.iter().map(|(_, l)| l.summary.max_strictness).fold(0.0, f64::max);
    verdict(worst <= 1e-6 && sim <= 1e-6, format!("random stacks {worst:.2e}, bundled scenario steps {sim:.2e}"))
}

fn c3_jacobian() -> Outcome {
    let chain = KinematicChain::mobile_manipulator();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let worst = (0..60).map(|_| jacobian_fd_error(&chain, &random_configuration(&mut rng, &chain))).fold(0.0, f64::max);
    verdict(worst <= 1e-5, format!("60 configurations, max relative error {worst:.2e}"))
}

fn c4_clik() -> Outcome {
    let cfg = SimConfig {
        duration: 3.0,
        ergonomics_mode: ErgonomicsMode::MinVelocityBenchmark,
        initial_target: Some(TargetConfig { offset: [0.05, -0.04, 0.06], rotation: [0.1, 0.0, -0.15] }),
        ..SimConfig::default()
    };
    let log = run_scenario(&cfg, &[]).map_err(|e| e.to_string())?;
    let err: Vec<f64> = log.records.iter().map(|r| r.pose_error).collect();
    let at2 = err[(2.0 / cfg.dt) as usize - 1];
    // after the transient the error only shrinks
    let settle = (0.1 / cfg.dt) as usize;
    let monotone = err[settle..].windows(2).all(|w| w[1] <= w[0] + 1e-12);
    verdict(
        at2 < 1e-3 && monotone,
        format!("initial error {:.3e}, at 2 s {at2:.2e}, monotone after 0.1 s: {monotone}", err[0]),
    )
}

fn c5_softening() -> Outcome {
    let cfg = SimConfig {
        duration: 2.0,
        ergonomics_mode: ErgonomicsMode::MinVelocityBenchmark,
        walk_follow_offset: [0.3, 0.0, 0.0],
        ..SimConfig::default()
    };
    let jump = 0.5;
    let events = [ScenarioEvent::new(jump, EventKind::WalkStep { direction: [1.0, 0.0] })];
    let log = run_scenario(&cfg, &events).map_err(|e| format!("cascade failed: {e}"))?;
    let peak = log.summary.max_slack;
    let after = log.records.iter().filter(|r| r.t >= jump + 1.0).map(|r| r.slack.iter().fold(0.0f64, |m, v| m.max(v.abs()))).fold(0.0, f64::max);
    let mismatch = log.summary.max_slack_mismatch;
    verdict(
        peak > 0.1 && after <= 1e-4 && mismatch <= 1e-6,
        format!("peak slack {peak:.3}, slack 1 s after jump {after:.2e}, |violation - slack| {mismatch:.2e}"),
    )
}

fn coincident_minima() -> Result<f64, String> {
    let mut cfg = SimConfig { duration: 2.0, ergonomics_gated: false, ..SimConfig::default() };
    let chain = cfg.chain().map_err(|e| e.to_string())?;
    let start = chain.forward_kinematics(&cfg.initial_q(&chain).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
    let human = cfg.human();
    let center = human.rotation().inverse() * (start.position - human.position);
    cfg.map = MapSource::Bowl { center: center.into(), curvature: None };
    let rep = compare_modes(&cfg, &[]).map_err(|e| e.to_string())?;
    Ok(rep.paired_trace().iter().map(|(_, a, b)| (a - b).abs()).fold(0.0, f64::max))
}

fn c6_benefit() -> Outcome {
    let mut lines = Vec::new();
    let mut ok = true;
    for (name, cfg, ev) in [("exp3", exp3_config(), exp3_events(&exp3_config())), ("exp4", exp4_config(), exp4_events())] {
        let rep = compare_modes(&cfg, &ev).map_err(|e| e.to_string())?;
        let (e, b, m) = (rep.ergonomics.summary.final_e_s, rep.benchmark.summary.final_e_s, rep.ergonomics.summary.map_minimum_e_s);
        let reduction = (b - e) / (b - m);
        ok &= b - m > 1e-3 && reduction >= 0.5;
        lines.push(format!("{name} final e_s {e:.3} vs {b:.3} (min {m:.3}, {:.0}% of excess removed)", 100.0 * reduction));
    }
    let gap = coincident_minima()?;
    ok &= gap <= 1e-6;
    lines.push(format!("coincident minima trace gap {gap:.1e}"));
    verdict(ok, lines.join("; "))
}

fn c7_walk(log: &SimLog) -> Outcome {
    let last = log.records.last().ok_or("empty log")?;
    let p = &last.x_a;
    let inside = (0..3).all(|i| p[i] >= last.box_min[i] && p[i] <= last.box_max[i]);
    let shift = last.box_min[0] - log.records[0].box_min[0];
    let excess = log.summary.max_ee_excess;
    verdict(
        inside && (shift - 1.0).abs() < 1e-9 && excess <= 1e-3,
        format!("box moved {shift:.3} m, final EE inside: {inside}, max excess over box + slack {excess:.2e} m"),
    )
}

fn reorientation_run(surface: Surface, tool: Tool) -> Result<f64, String> {
    let cfg = exp3_config();
    let events = vec![
        ScenarioEvent::new(0.2, EventKind::DeliverObject { features: sample_features(&cfg.classifier, surface), true_surface: surface }),
        ScenarioEvent::new(0.5, EventKind::PickTool { tool }),
        ScenarioEvent::new(1.0, EventKind::BecomeCollaborative),
    ];
    let log = run_scenario(&cfg, &events).map_err(|e| e.to_string())?;
    let first = &log.records[0];
    let last = log.records.last().ok_or("empty log")?;
    let turned = quat(&first.box_center).angle_to(&quat(&last.box_center));
    if (turned - std::f64::consts::PI).abs() > 1e-9 {
        return Err(format!("box turned by {turned}"));
    }
    let hrsw = HrswBox {
        pos_min: last.box_min.into(),
        pos_max: last.box_max.into(),
        orient_center: quat(&last.box_center),
        orient_halfwidth: Vector3::from(cfg.hrsw.orient_halfwidth),
    };
    Ok(hrsw.violation(&pose_of(&last.x_a)).fixed_rows::<3>(3).amax())
}

fn c8_reorientation() -> Outcome {
    let table = [
        (Surface::Drilled, Tool::Drill, false),
        (Surface::Smooth, Tool::Drill, true),
        (Surface::Smooth, Tool::Polisher, false),
        (Surface::Drilled, Tool::Polisher, true),
    ];
    let table_ok = table.iter().all(|(s, t, want)| reorientation_decision(*s, *t) == *want);
    let a = reorientation_run(Surface::Drilled, Tool::Polisher)?;
    let b = reorientation_run(Surface::Smooth, Tool::Drill)?;
    verdict(
        table_ok && a <= 1e-2 && b <= 1e-2,
        format!("truth table ok: {table_ok}, final orientation outside rotated box {a:.1e} / {b:.1e} rad"),
    )
}

fn grid_search_l2(data: &LabeledSet, c: f64) -> f64 {
    let obj = |w0: f64, w1: f64, b: f64| {
        let m = LinearModel { w: DVector::from_vec(vec![w0, w1]), b, trained_with: SvmVariant::L2, c };
        objective(&m, data, c, SvmVariant::L2).unwrap()
    };
    let n = 60;
    let v = |t: usize| -3.0 + 6.0 * t as f64 / n as f64;
    let mut best = (f64::INFINITY, [0.0; 3]);
    for i in 0..=n {
        for j in 0..=n {
            for k in 0..=n {
                let f = obj(v(i), v(j), v(k));
                if f < best.0 {
                    best = (f, [v(i), v(j), v(k)]);
                }
            }
        }
    }
    // pattern search from the best grid node
    let mut step = 0.05;
    while step > 1e-9 {
        let mut moved = false;
        for d in 0..27 {
            let dir = [(d % 3) as f64 - 1.0, ((d / 3) % 3) as f64 - 1.0, (d / 9) as f64 - 1.0];
            let p = [best.1[0] + step * dir[0], best.1[1] + step * dir[1], best.1[2] + step * dir[2]];
            let f = obj(p[0], p[1], p[2]);
            if f < best.0 {
                best = (f, p);
                moved = true;
            }
        }
        if !moved {
            step /= 2.0;
        }
    }
    best.0
}

fn c9_svm() -> Outcome {
    let data = synthetic_surface_features(200, 16, 11, 0.5);
    let l2 = train(&data, 10.0, SvmVariant::L2).map_err(|e| e.to_string())?;
    let l1 = train(&data, 10.0, SvmVariant::L1).map_err(|e| e.to_string())?;
    let acc = accuracy(&l2, &data).unwrap().min(accuracy(&l1, &data).unwrap());
    let grad = l2_gradient(&l2.w, l2.b, &data, 10.0).amax();

    let tiny = LabeledSet::new(
        [[0.5, 1.0], [1.5, 0.2], [-0.4, -0.8], [-1.2, 0.1], [0.3, 0.1]].iter().map(|p| DVector::from_row_slice(p)).collect(),
        vec![1.0, 1.0, -1.0, -1.0, -1.0],
    )
    .unwrap();
    let model = train(&tiny, 1.0, SvmVariant::L2).map_err(|e| e.to_string())?;
    let gap = (objective(&model, &tiny, 1.0, SvmVariant::L2).unwrap() - grid_search_l2(&tiny, 1.0)).abs();

    let noisy = synthetic_surface_features(40, 3, 4, -0.5);
    let sol = solve_qp(&constrained_problem(&noisy, 2.0).unwrap(), &SolverSettings::default()).map_err(|e| e.to_string())?;
    let d = noisy.dim();
    let w = sol.x.rows(0, d).into_owned();
    let slack_err = noisy
        .x
        .iter()
        .zip(&noisy.y)
        .enumerate()
        .map(|(i, (x, y))| (sol.x[d + 1 + i] - (1.0 - y * (w.dot(x) + sol.x[d])).max(0.0)).abs())
        .fold(0.0, f64::max);
    verdict(
        acc == 1.0 && grad <= 1e-6 && gap <= 1e-3 && slack_err <= 1e-6,
        format!("accuracy {:.0}%, gradient {grad:.1e}, grid-search gap {gap:.1e}, slack identity {slack_err:.1e}", 100.0 * acc),
    )
}

fn c10_map() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut fit_err: f64 = 0.0;
    for _ in 0..10 {
        let m = random_map(&mut rng);
        let h = m.h + Matrix3::identity();
        let truth = ahqp::ergomap::ErgonomicsMap::human(h, m.g, 5.0 + m.g.norm_squared());
        let mut samples = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    let p = Vector3::new(i as f64, j as f64, k as f64) * 0.15;
                    samples.push((p, truth.evaluate(&p)));
                }
            }
        }
        let fit = fit_map_from_grid(&ScoreGrid { samples }).map_err(|e| e.to_string())?;
        fit_err = fit_err.max((fit.h - truth.h).amax()).max((fit.g - truth.g).amax()).max((fit.c - truth.c).abs());
    }
    let mut frame_err: f64 = 0.0;
    for _ in 0..50 {
        let map = random_map(&mut rng);
        let human = random_human(&mut rng);
        let world = map_to_world(&map, &human).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let x = Vector3::new(rng.random_range(-1.5..1.5), rng.random_range(-1.5..1.5), rng.random_range(0.0..2.0));
            frame_err = frame_err.max((world.evaluate(&human.to_world(&x)) - map.evaluate(&x)).abs());
        }
    }
    verdict(fit_err <= 1e-8 && frame_err <= 1e-9, format!("parameter error {fit_err:.1e}, frame transform error {frame_err:.1e}"))
}

fn c11_throughput() -> Outcome {
    let cfg = SimConfig { duration: 10.0, ..exp4_config() };
    let start = Instant::now();
    let log = run_scenario(&cfg, &exp4_events()).map_err(|e| e.to_string())?;
    let secs = start.elapsed().as_secs_f64();
    let s = log.records[0].chi.len();
    verdict(
        secs < 60.0 && log.records.len() == 10_000 && s == 22,
        format!("{} steps with s = {s} in {secs:.2} s", log.records.len()),
    )
}

fn c12_determinism() -> Outcome {
    let mut same = true;
    for (cfg, ev) in [(exp3_config(), exp3_events(&exp3_config())), (exp4_config(), exp4_events())] {
        let a = run_scenario(&cfg, &ev).map_err(|e| e.to_string())?;
        let b = run_scenario(&cfg, &ev).map_err(|e| e.to_string())?;
        same &= a.to_csv().unwrap() == b.to_csv().unwrap() && a.summary_json() == b.summary_json();
    }
    verdict(same, format!("repeated bundled runs byte-identical: {same}"))
}

fn main() {
    let exp3 = run_scenario(&exp3_config(), &exp3_events(&exp3_config()));
    let exp4 = run_scenario(&exp4_config(), &exp4_events());
    let (exp3, exp4) = match (exp3, exp4) {
        (Ok(a), Ok(b)) => (a, b),
        (a, b) => {
            eprintln!("bundled scenarios failed: {:?} {:?}", a.err(), b.err());
            std::process::exit(1);
        }
    };
    let results: Vec<(u32, &str, Outcome)> = vec![
        (1, "QP certification", c1_qp()),
        (2, "hierarchy strictness", c2_strictness(&[("exp3", &exp3), ("exp4", &exp4)])),
        (3, "Jacobian correctness", c3_jacobian()),
        (4, "CLIK convergence", c4_clik()),
        (5, "softening behaviour", c5_softening()),
        (6, "ergonomics benefit", c6_benefit()),
        (7, "walk following", c7_walk(&exp4)),
        (8, "reorientation logic", c8_reorientation()),
        (9, "SVM", c9_svm()),
        (10, "map fitting", c10_map()),
        (11, "throughput", c11_throughput()),
        (12, "determinism", c12_determinism()),
    ];
    let mut failed = 0;
    for (n, name, res) in &results {
        match res {
            Ok(d) => println!("criterion {n:>2} PASS  {name}: {d}"),
            Err(d) => {
                failed += 1;
                println!("criterion {n:>2} FAIL  {name}: {d}");
            }
        }
    }
    if failed > 0 {
        println!("{failed} of {} criteria failed", results.len());
        std::process::exit(1);
    }
    println!("all {} criteria passed", results.len());
}
