//! Bundled scenarios. The files under `data/` are generated from these.

use crate::svm::{synthetic_surface_features, Surface};

use super::{ClassifierConfig, EventKind, ScenarioEvent, SimConfig, Tool};

/// A held-out feature vector of the requested class, drawn from the same
/// distribution as the default training set.
pub fn sample_features(classifier: &ClassifierConfig, surface: Surface) -> Vec<f64> {
    let set = synthetic_surface_features(8, classifier.dim, classifier.seed.wrapping_add(1000), 0.5);
    let want = surface.label();
    let i = set.y.iter().position(|&y| y == want).expect("generator alternates labels");
    set.x[i].iter().map(|v| (v * 1e6).round() / 1e6).collect()
}

/// Object delivered drilled side up, polisher picked, then collaboration.
pub fn exp3_events(config: &SimConfig) -> Vec<ScenarioEvent> {
    vec![
        ScenarioEvent::new(
            0.2,
            EventKind::DeliverObject {
                features: sample_features(&config.classifier, Surface::Drilled),
                true_surface: Surface::Drilled,
            },
        ),
        ScenarioEvent::new(0.5, EventKind::PickTool { tool: Tool::Polisher }),
        ScenarioEvent::new(1.0, EventKind::BecomeCollaborative),
    ]
}

/// Collaboration starts, then the human walks 1 m in +x in five steps.
pub fn exp4_events() -> Vec<ScenarioEvent> {
    let mut ev = vec![ScenarioEvent::new(0.5, EventKind::BecomeCollaborative)];
    for k in 1..=5 {
        ev.push(ScenarioEvent::new(k as f64, EventKind::WalkStep { direction: [1.0, 0.0] }));
    }
    ev.push(ScenarioEvent::new(5.5, EventKind::StopWalking));
    ev
}

pub fn exp3_config() -> SimConfig {
    SimConfig { duration: 8.0, ..SimConfig::default() }
}

pub fn exp4_config() -> SimConfig {
    SimConfig { duration: 7.0, ..SimConfig::default() }
}
