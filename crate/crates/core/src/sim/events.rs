//! Scenario events, one JSON object per line.
//!
//! ```text
//! {"t": 0.2, "kind": "DeliverObject", "features": [0.1, ...], "true_surface": "Drilled"}
//! {"t": 0.5, "kind": "PickTool", "tool": "Polisher"}
//! {"t": 1.0, "kind": "BecomeCollaborative"}
//! {"t": 2.0, "kind": "WalkStep", "direction": [1.0, 0.0]}
//! {"t": 6.0, "kind": "StopWalking"}
//! {"t": 6.5, "kind": "SetHumanPose", "position": [1.5, 0.0, 0.0], "heading": 3.14159}
//! ```

use serde::{Deserialize, Serialize};

use crate::svm::Surface;

use super::SimError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Tool {
    Drill,
    Polisher,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind")]
pub enum EventKind {
    BecomeCollaborative,
    DeliverObject { features: Vec<f64>, true_surface: Surface },
    PickTool { tool: Tool },
    WalkStep { direction: [f64; 2] },
    StopWalking,
    SetHumanPose { position: [f64; 3], heading: f64 },
}

impl EventKind {
    pub fn name(&self) -> &'static str {
        match self {
            Self::BecomeCollaborative => "BecomeCollaborative",
            Self::DeliverObject { .. } => "DeliverObject",
            Self::PickTool { .. } => "PickTool",
            Self::WalkStep { .. } => "WalkStep",
            Self::StopWalking => "StopWalking",
            Self::SetHumanPose { .. } => "SetHumanPose",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioEvent {
    pub t: f64,
    #[serde(flatten)]
    pub kind: EventKind,
}

impl ScenarioEvent {
    pub fn new(t: f64, kind: EventKind) -> Self {
        Self { t, kind }
    }
}

/// Checks times and payloads of an event list against a run of `duration`.
pub fn validate_events(events: &[ScenarioEvent], duration: f64) -> Result<(), SimError> {
    let mut prev = 0.0;
    for (i, e) in events.iter().enumerate() {
        let out = |msg: String| Err(SimError::EventOutOfRange { index: i, msg });
        if !e.t.is_finite() || e.t < 0.0 || e.t > duration {
            return out(format!("time {} outside [0, {duration}]", e.t));
        }
        if e.t < prev {
            return out(format!("time {} precedes the previous event at {prev}", e.t));
        }
        prev = e.t;
        if let EventKind::WalkStep { direction } = &e.kind {
            let norm = direction[0].hypot(direction[1]);
            if (norm - 1.0).abs() > 1e-9 {
                return out(format!("walk direction has norm {norm}, expected 1"));
            }
        }
        if let EventKind::SetHumanPose { position, heading } = &e.kind {
            if position.iter().chain(std::iter::once(heading)).any(|v| !v.is_finite()) {
                return out("human pose is not finite".into());
            }
        }
    }
    Ok(())
}

pub fn parse_events(text: &str) -> Result<Vec<ScenarioEvent>, SimError> {
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let ev: ScenarioEvent =
            serde_json::from_str(t).map_err(|e| SimError::Parse { line: i + 1, msg: e.to_string() })?;
        out.push(ev);
    }
    Ok(out)
}

pub fn write_events(events: &[ScenarioEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("event serializes"));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let events = vec![
            ScenarioEvent::new(0.2, EventKind::DeliverObject { features: vec![0.5, -1.0], true_surface: Surface::Drilled }),
            ScenarioEvent::new(0.5, EventKind::PickTool { tool: Tool::Polisher }),
            ScenarioEvent::new(1.0, EventKind::BecomeCollaborative),
            ScenarioEvent::new(2.0, EventKind::WalkStep { direction: [1.0, 0.0] }),
            ScenarioEvent::new(3.0, EventKind::StopWalking),
            ScenarioEvent::new(3.5, EventKind::SetHumanPose { position: [1.0, 0.0, 0.0], heading: 0.5 }),
        ];
        let text = write_events(&events);
        assert_eq!(parse_events(&text).unwrap(), events);
        validate_events(&events, 4.0).unwrap();
    }

    #[test]
    fn parse_errors_name_the_line() {
        let text = "{\"t\": 0.1, \"kind\": \"BecomeCollaborative\"}\n\n{\"t\": 0.2, \"kind\": \"Jump\"}\n";
        match parse_events(text) {
            Err(SimError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn validation() {
        let walk = |t: f64, d: [f64; 2]| ScenarioEvent::new(t, EventKind::WalkStep { direction: d });
        assert!(validate_events(&[walk(1.0, [0.6, 0.8])], 2.0).is_ok());
        assert!(validate_events(&[walk(1.0, [1.0, 1.0])], 2.0).is_err());
        assert!(validate_events(&[walk(3.0, [1.0, 0.0])], 2.0).is_err());
        assert!(validate_events(&[walk(1.0, [1.0, 0.0]), walk(0.5, [1.0, 0.0])], 2.0).is_err());
    }
}
