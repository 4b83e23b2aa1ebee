//! Per-step records, run summary and their file formats.

use serde::{Deserialize, Serialize};

use super::SimError;

/// One control step, logged after integration.
#[derive(Debug, Clone, PartialEq)]
pub struct StepRecord {
    pub t: f64,
    pub q: Vec<f64>,
    /// Actual end-effector pose `[x, y, z, qw, qx, qy, qz]`.
    pub x_a: [f64; 7],
    /// Desired pose, same layout.
    pub x_d: [f64; 7],
    pub chi: Vec<f64>,
    pub slack: [f64; 6],
    /// Score of the desired position under the current world map.
    pub e_s: f64,
    pub box_min: [f64; 3],
    pub box_max: [f64; 3],
    /// Orientation centre `[qw, qx, qy, qz]`.
    pub box_center: [f64; 4],
    /// Hard-box violation of the new desired pose, in box coordinates.
    pub violation: [f64; 6],
    /// Amount by which the actual position leaves the softened box.
    pub ee_excess: f64,
    pub clik_residual: f64,
    pub slack_residual: f64,
    pub terminal_objective: f64,
    pub strictness: f64,
    pub pose_error: f64,
    pub ergonomics_active: bool,
    pub events: Vec<String>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SimSummary {
    pub mode: String,
    pub steps: usize,
    pub final_time: f64,
    pub mean_e_s: f64,
    pub final_e_s: f64,
    pub map_minimum_e_s: f64,
    pub max_slack: f64,
    /// Largest `|violation - slack|` over position and orientation rows.
    pub max_slack_mismatch: f64,
    pub max_violation: f64,
    pub max_ee_excess: f64,
    pub max_strictness: f64,
    pub final_pose_error: f64,
    pub events_applied: Vec<String>,
    pub aborted_at: Option<f64>,
}

/// Shortest round-trip text, in exponent form for very small or large values.
pub fn fmt_f64(v: f64) -> String {
    let a = v.abs();
    if a == 0.0 || (1e-4..1e15).contains(&a) || !a.is_finite() {
        format!("{v}")
    } else {
        format!("{v:e}")
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SimLog {
    pub records: Vec<StepRecord>,
    pub summary: SimSummary,
}

impl SimLog {
    pub fn e_s_trace(&self) -> Vec<f64> {
        self.records.iter().map(|r| r.e_s).collect()
    }

    pub(crate) fn finalize(&mut self, mode: &str, map_min: f64, aborted_at: Option<f64>) {
        let n = self.records.len();
        let fold = |f: &dyn Fn(&StepRecord) -> f64| self.records.iter().map(f).fold(0.0, f64::max);
        let s = SimSummary {
            mode: mode.to_string(),
            steps: n,
            final_time: self.records.last().map_or(0.0, |r| r.t),
            mean_e_s: if n == 0 { 0.0 } else { self.records.iter().map(|r| r.e_s).sum::<f64>() / n as f64 },
            final_e_s: self.records.last().map_or(0.0, |r| r.e_s),
            map_minimum_e_s: map_min,
            max_slack: fold(&|r| r.slack.iter().fold(0.0, |m, v| m.max(v.abs()))),
            max_slack_mismatch: fold(&|r| {
                r.slack.iter().zip(&r.violation).fold(0.0, |m, (s, v)| m.max((s.max(0.0) - v).abs()))
            }),
            max_violation: fold(&|r| r.violation.iter().fold(0.0, |m, v| m.max(*v))),
            max_ee_excess: fold(&|r| r.ee_excess),
            max_strictness: fold(&|r| r.strictness),
            final_pose_error: self.records.last().map_or(0.0, |r| r.pose_error),
            events_applied: self
                .records
                .iter()
                .flat_map(|r| r.events.iter().map(move |e| format!("{}@{}", e, r.t)))
                .collect(),
            aborted_at,
        };
        self.summary = s;
    }

    pub fn csv_header(n: usize, s: usize) -> Vec<String> {
        let mut h = vec!["t".to_string()];
        h.extend((0..n).map(|i| format!("q{i}")));
        for p in ["xa", "xd"] {
            h.extend(["x", "y", "z", "qw", "qx", "qy", "qz"].iter().map(|c| format!("{p}_{c}")));
        }
        h.extend((0..s).map(|i| format!("chi{i}")));
        h.extend((0..6).map(|i| format!("slack{i}")));
        h.push("e_s".into());
        h.extend(["box_xmin", "box_ymin", "box_zmin", "box_xmax", "box_ymax", "box_zmax"].map(String::from));
        h.extend(["box_qw", "box_qx", "box_qy", "box_qz"].map(String::from));
        h.extend((0..6).map(|i| format!("viol{i}")));
        h.extend(
            ["ee_excess", "clik_res", "slack_res", "terminal_obj", "strictness", "pose_err", "ergo_active", "events"]
                .map(String::from),
        );
        h
    }

    /// CSV text with the column order of [`SimLog::csv_header`]. Floats use
    /// the shortest representation that reads back exactly.
    pub fn to_csv(&self) -> Result<String, SimError> {
        let (n, s) = self.records.first().map_or((0, 0), |r| (r.q.len(), r.chi.len()));
        let mut w = csv::WriterBuilder::new().from_writer(Vec::new());
        let io = |e: csv::Error| SimError::Io(e.to_string());
        w.write_record(Self::csv_header(n, s)).map_err(io)?;
        let mut row: Vec<String> = Vec::new();
        for r in &self.records {
            row.clear();
            let mut push = |v: f64| row.push(fmt_f64(v));
            push(r.t);
            r.q.iter().for_each(|v| push(*v));
            r.x_a.iter().for_each(|v| push(*v));
            r.x_d.iter().for_each(|v| push(*v));
            r.chi.iter().for_each(|v| push(*v));
            r.slack.iter().for_each(|v| push(*v));
            push(r.e_s);
            r.box_min.iter().for_each(|v| push(*v));
            r.box_max.iter().for_each(|v| push(*v));
            r.box_center.iter().for_each(|v| push(*v));
            r.violation.iter().for_each(|v| push(*v));
            push(r.ee_excess);
            push(r.clik_residual);
            push(r.slack_residual);
            push(r.terminal_objective);
            push(r.strictness);
            push(r.pose_error);
            row.push(u8::from(r.ergonomics_active).to_string());
            row.push(r.events.join(";"));
            w.write_record(&row).map_err(io)?;
        }
        let bytes = w.into_inner().map_err(|e| SimError::Io(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| SimError::Io(e.to_string()))
    }

    pub fn summary_json(&self) -> String {
        serde_json::to_string_pretty(&self.summary).expect("summary serializes") + "\n"
    }
}
