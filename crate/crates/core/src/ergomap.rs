//! Quadratic ergonomics-score maps.
//!
//! A map scores an interaction point `x` as `1/2 x'Hx + g'x + c` with `H`
//! positive semidefinite. Maps are fitted in the human frame and moved into
//! the world frame as the human moves.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::io::Read;

use nalgebra::{DMatrix, DVector, Matrix3, Rotation3, SymmetricEigen, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ErgoError {
    #[error("score grid is degenerate: {0}")]
    DegenerateGrid(String),
    #[error("map is in the {0:?} frame, expected the human frame")]
    WrongFrame(Frame),
    #[error("no map registered for stature class {0:?}")]
    MissingClass(StatureClass),
    #[error("invalid input: {0}")]
    Invalid(String),
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Frame {
    Human,
    World,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgonomicsMap {
    pub h: Matrix3<f64>,
    pub g: Vector3<f64>,
    pub c: f64,
    pub frame: Frame,
    pub label: String,
    /// RMS residual against the grid the map was fitted on.
    pub fit_rms: Option<f64>,
}

impl ErgonomicsMap {
    pub fn human(h: Matrix3<f64>, g: Vector3<f64>, c: f64) -> Self {
        Self { h, g, c, frame: Frame::Human, label: String::new(), fit_rms: None }
    }

    pub fn world(h: Matrix3<f64>, g: Vector3<f64>, c: f64) -> Self {
        Self { frame: Frame::World, ..Self::human(h, g, c) }
    }

    /// Bowl `1/2 (x - center)' H (x - center)` in the human frame.
    pub fn bowl(h: Matrix3<f64>, center: Vector3<f64>) -> Self {
        let g = -(h * center);
        let c = 0.5 * center.dot(&(h * center));
        Self::human(h, g, c)
    }

    pub fn evaluate(&self, x: &Vector3<f64>) -> f64 {
        0.5 * x.dot(&(self.h * x)) + self.g.dot(x) + self.c
    }

    /// Minimum-norm minimizer `-H^+ g`. Unique when `H` is definite.
    pub fn minimizer(&self) -> Vector3<f64> {
        let eig = SymmetricEigen::new(self.h);
        let scale = eig.eigenvalues.amax().max(f64::MIN_POSITIVE);
        let inv = Vector3::from_fn(|i, _| {
            let l = eig.eigenvalues[i];
            if l > 1e-12 * scale {
                1.0 / l
            } else {
                0.0
            }
        });
        -(eig.eigenvectors * Matrix3::from_diagonal(&inv) * eig.eigenvectors.transpose()) * self.g
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        Self { h: self.h * alpha, g: self.g * alpha, c: self.c * alpha, ..self.clone() }
    }
}

/// Score of `x` under `map`, both in the same frame.
pub fn evaluate_score(map: &ErgonomicsMap, x: &Vector3<f64>) -> f64 {
    map.evaluate(x)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub enum StatureClass {
    Short,
    Average,
    Tall,
}

impl StatureClass {
    /// Height used to synthesize a class map.
    pub fn representative_height(self) -> f64 {
        match self {
            Self::Short => 1.60,
            Self::Average => 1.75,
            Self::Tall => 1.90,
        }
    }
}

/// Heights below `short_below` are Short, above `tall_above` Tall.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatureThresholds {
    pub short_below: f64,
    pub tall_above: f64,
}

impl Default for StatureThresholds {
    fn default() -> Self {
        Self { short_below: 1.65, tall_above: 1.80 }
    }
}

impl StatureThresholds {
    pub fn classify(&self, height: f64) -> StatureClass {
        if height < self.short_below {
            StatureClass::Short
        } else if height <= self.tall_above {
            StatureClass::Average
        } else {
            StatureClass::Tall
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SubjectProfile {
    pub height: f64,
}

impl SubjectProfile {
    pub fn new(height: f64) -> Result<Self, ErgoError> {
        if !(height > 1.2 && height < 2.2) {
            return Err(ErgoError::Invalid(format!("subject height {height} m outside (1.2, 2.2)")));
        }
        Ok(Self { height })
    }

    pub fn stature_class(&self, thresholds: &StatureThresholds) -> StatureClass {
        thresholds.classify(self.height)
    }
}

/// Human position and heading in the world frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HumanPoseState {
    pub position: Vector3<f64>,
    pub heading: f64,
    #[serde(default)]
    pub timestamp: f64,
}

impl HumanPoseState {
    pub fn rotation(&self) -> Rotation3<f64> {
        Rotation3::from_axis_angle(&Vector3::z_axis(), self.heading)
    }

    /// Human-frame point to world frame.
    pub fn to_world(&self, x: &Vector3<f64>) -> Vector3<f64> {
        self.rotation() * x + self.position
    }
}

/// Expresses a human-frame map in world coordinates so that
/// `world.evaluate(T x) == map.evaluate(x)`.
pub fn map_to_world(map: &ErgonomicsMap, human: &HumanPoseState) -> Result<ErgonomicsMap, ErgoError> {
    if map.frame != Frame::Human {
        return Err(ErgoError::WrongFrame(map.frame));
    }
    let r = human.rotation().into_inner();
    let t = human.position;
    let h = r * map.h * r.transpose();
    let h = (h + h.transpose()) * 0.5;
    let rg = r * map.g;
    let g = rg - h * t;
    let c = map.c + 0.5 * t.dot(&(h * t)) - rg.dot(&t);
    Ok(ErgonomicsMap { h, g, c, frame: Frame::World, label: map.label.clone(), fit_rms: map.fit_rms })
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct ScoreGrid {
    pub samples: Vec<(Vector3<f64>, f64)>,
}

/// Relative singular-value floor of the design matrix.
const RANK_TOL: f64 = 1e-12;

fn design_row(u: &Vector3<f64>) -> [f64; 10] {
    let (x, y, z) = (u.x, u.y, u.z);
    [0.5 * x * x, 0.5 * y * y, 0.5 * z * z, x * y, x * z, y * z, x, y, z, 1.0]
}

/// Least-squares fit of a quadratic to the grid, followed by projection of
/// `H` onto the PSD cone and a shift of `c` so the minimum is nonnegative.
pub fn fit_map_from_grid(grid: &ScoreGrid) -> Result<ErgonomicsMap, ErgoError> {
    let n = grid.samples.len();
    if n < 10 {
        return Err(ErgoError::DegenerateGrid(format!("{n} samples, at least 10 needed")));
    }
    if grid.samples.iter().any(|(p, s)| !s.is_finite() || p.iter().any(|v| !v.is_finite())) {
        return Err(ErgoError::Invalid("grid contains non-finite values".into()));
    }
    // centring keeps the design matrix well conditioned
    let mean = grid.samples.iter().fold(Vector3::zeros(), |acc, (p, _)| acc + p) / n as f64;
    let mut a = DMatrix::zeros(n, 10);
    let mut b = DVector::zeros(n);
    for (i, (p, s)) in grid.samples.iter().enumerate() {
        a.row_mut(i).copy_from_slice(&design_row(&(p - mean)));
        b[i] = *s;
    }
    let svd = a.svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if !(smin > RANK_TOL * smax) {
        return Err(ErgoError::DegenerateGrid(format!(
            "design matrix is rank deficient (singular values {smin:e} / {smax:e}); samples may be coplanar"
        )));
    }
    let theta = svd.solve(&b, 0.0).map_err(|e| ErgoError::DegenerateGrid(e.to_string()))?;

    let hu = Matrix3::new(theta[0], theta[3], theta[4], theta[3], theta[1], theta[5], theta[4], theta[5], theta[2]);
    let gu = Vector3::new(theta[6], theta[7], theta[8]);
    let cu = theta[9];

    // back to uncentred coordinates
    let h = hu;
    let g = gu - h * mean;
    let c = cu - gu.dot(&mean) + 0.5 * mean.dot(&(h * mean));

    let mut map = ErgonomicsMap::human(project_psd(&h), g, c);
    shift_nonnegative(&mut map, grid);
    let sq: f64 = grid.samples.iter().map(|(p, s)| (map.evaluate(p) - s).powi(2)).sum();
    map.fit_rms = Some((sq / n as f64).sqrt());
    Ok(map)
}

/// Symmetrizes and clips negative eigenvalues to zero.
pub fn project_psd(h: &Matrix3<f64>) -> Matrix3<f64> {
    let sym = (h + h.transpose()) * 0.5;
    let eig = SymmetricEigen::new(sym);
    if eig.eigenvalues.min() >= 0.0 {
        return sym;
    }
    let clipped = eig.eigenvalues.map(|l| l.max(0.0));
    let out = eig.eigenvectors * Matrix3::from_diagonal(&clipped) * eig.eigenvectors.transpose();
    (out + out.transpose()) * 0.5
}

fn shift_nonnegative(map: &mut ErgonomicsMap, grid: &ScoreGrid) {
    let at_min = map.evaluate(&map.minimizer());
    // with a singular H the range-space minimizer need not be the lowest
    // point of the domain, so the samples are checked too
    let lowest = grid.samples.iter().map(|(p, _)| map.evaluate(p)).fold(at_min, f64::min);
    if lowest < 0.0 {
        map.c -= lowest;
    }
}

/// Ground-truth curvature of the synthetic bowl (1/m^2).
pub fn synthetic_curvature() -> Matrix3<f64> {
    Matrix3::new(24.0, 3.0, 0.0, 3.0, 16.0, 2.0, 0.0, 2.0, 30.0)
}

/// Human-frame centre of the synthetic bowl: in front of the chest at
/// roughly elbow height.
pub fn synthetic_center(subject: &SubjectProfile) -> Vector3<f64> {
    Vector3::new(0.35, 0.0, 0.6 * subject.height)
}

/// The quadratic the synthetic grid samples.
pub fn synthetic_map(subject: &SubjectProfile) -> ErgonomicsMap {
    ErgonomicsMap::bowl(synthetic_curvature(), synthetic_center(subject))
}

/// Deterministic grid over the reachable box in front of the subject.
pub fn generate_synthetic_reba_grid(subject: &SubjectProfile, spacing: f64) -> Result<ScoreGrid, ErgoError> {
    if !(spacing > 0.02 && spacing < 0.3) {
        return Err(ErgoError::Invalid(format!("grid spacing {spacing} m outside (0.02, 0.3)")));
    }
    let center = synthetic_center(subject);
    let map = synthetic_map(subject);
    let lo = Vector3::new(0.0, -0.35, center.z - 0.35);
    let count = |len: f64| (len / spacing + 1e-9).floor() as usize + 1;
    let (nx, ny, nz) = (count(0.7), count(0.7), count(0.7));
    let mut samples = Vec::with_capacity(nx * ny * nz);
    for i in 0..nx {
        for j in 0..ny {
            for k in 0..nz {
                let p = lo + Vector3::new(i as f64, j as f64, k as f64) * spacing;
                samples.push((p, map.evaluate(&p).max(0.0)));
            }
        }
    }
    Ok(ScoreGrid { samples })
}

/// One map per stature class.
#[derive(Debug, Clone, PartialEq)]
pub struct MapRegistry {
    pub maps: BTreeMap<StatureClass, ErgonomicsMap>,
    pub thresholds: StatureThresholds,
}

impl MapRegistry {
    /// Fits a map per class on synthetic grids.
    pub fn synthetic(spacing: f64) -> Result<Self, ErgoError> {
        let mut maps = BTreeMap::new();
        for class in [StatureClass::Short, StatureClass::Average, StatureClass::Tall] {
            let subject = SubjectProfile::new(class.representative_height())?;
            let mut map = fit_map_from_grid(&generate_synthetic_reba_grid(&subject, spacing)?)?;
            map.label = format!("{class:?}").to_lowercase();
            maps.insert(class, map);
        }
        Ok(Self { maps, thresholds: StatureThresholds::default() })
    }
}

pub fn select_map<'a>(registry: &'a MapRegistry, subject: &SubjectProfile) -> Result<&'a ErgonomicsMap, ErgoError> {
    let class = subject.stature_class(&registry.thresholds);
    registry.maps.get(&class).ok_or(ErgoError::MissingClass(class))
}

/// Reads `x,y,z,score` rows. A leading header row is skipped.
pub fn read_grid_csv<R: Read>(reader: R) -> Result<ScoreGrid, ErgoError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).trim(csv::Trim::All).comment(Some(b'#')).from_reader(reader);
    let mut samples = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let line = |rec: &csv::StringRecord| rec.position().map_or(idx + 1, |p| p.line() as usize);
        let rec = rec.map_err(|e| ErgoError::Parse { line: idx + 1, msg: e.to_string() })?;
        if rec.len() != 4 {
            return Err(ErgoError::Parse { line: line(&rec), msg: format!("expected 4 fields, found {}", rec.len()) });
        }
        let vals: Result<Vec<f64>, _> = rec.iter().map(str::parse::<f64>).collect();
        match vals {
            Ok(v) => samples.push((Vector3::new(v[0], v[1], v[2]), v[3])),
            Err(_) if samples.is_empty() && rec.iter().any(|f| f.eq_ignore_ascii_case("score")) => continue,
            Err(e) => return Err(ErgoError::Parse { line: line(&rec), msg: e.to_string() }),
        }
    }
    Ok(ScoreGrid { samples })
}

pub fn write_grid_csv(grid: &ScoreGrid) -> String {
    let mut out = String::from("x,y,z,score\n");
    for (p, s) in &grid.samples {
        let _ = writeln!(out, "{},{},{},{}", p.x, p.y, p.z, s);
    }
    out
}

/// Plain-text dump: `frame`, `H` (three rows), `g`, `c` and optionally `rms`.
pub fn write_map_dump(map: &ErgonomicsMap) -> String {
    let mut out = String::new();
    let frame = match map.frame {
        Frame::Human => "human",
        Frame::World => "world",
    };
    let _ = writeln!(out, "frame {frame}");
    if !map.label.is_empty() {
        let _ = writeln!(out, "label {}", map.label);
    }
    for r in 0..3 {
        let _ = writeln!(out, "H {:e} {:e} {:e}", map.h[(r, 0)], map.h[(r, 1)], map.h[(r, 2)]);
    }
    let _ = writeln!(out, "g {:e} {:e} {:e}", map.g.x, map.g.y, map.g.z);
    let _ = writeln!(out, "c {:e}", map.c);
    if let Some(rms) = map.fit_rms {
        let _ = writeln!(out, "rms {rms:e}");
    }
    out
}

pub fn read_map_dump(text: &str) -> Result<ErgonomicsMap, ErgoError> {
    let mut map = ErgonomicsMap::human(Matrix3::zeros(), Vector3::zeros(), 0.0);
    let mut h_rows = 0;
    let (mut have_g, mut have_c) = (false, false);
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let t = raw.trim();
        if t.is_empty() || t.starts_with('#') {
            continue;
        }
        let mut parts = t.split_whitespace();
        let key = parts.next().unwrap_or_default();
        let rest: Vec<&str> = parts.collect();
        let nums = |count: usize| -> Result<Vec<f64>, ErgoError> {
            if rest.len() != count {
                return Err(ErgoError::Parse { line, msg: format!("`{key}` expects {count} values") });
            }
            rest.iter()
                .map(|s| s.parse::<f64>().map_err(|e| ErgoError::Parse { line, msg: format!("`{s}`: {e}") }))
                .collect()
        };
        match key {
            "frame" => {
                map.frame = match rest.first().copied() {
                    Some("human") => Frame::Human,
                    Some("world") => Frame::World,
                    other => return Err(ErgoError::Parse { line, msg: format!("unknown frame {other:?}") }),
                }
            }
            "label" => map.label = rest.join(" "),
            "H" => {
                if h_rows == 3 {
                    return Err(ErgoError::Parse { line, msg: "more than three H rows".into() });
                }
                let v = nums(3)?;
                for (c, x) in v.into_iter().enumerate() {
                    map.h[(h_rows, c)] = x;
                }
                h_rows += 1;
            }
            "g" => {
                map.g = Vector3::from_vec(nums(3)?);
                have_g = true;
            }
            "c" => {
                map.c = nums(1)?[0];
                have_c = true;
            }
            "rms" => map.fit_rms = Some(nums(1)?[0]),
            other => return Err(ErgoError::Parse { line, msg: format!("unknown key `{other}`") }),
        }
    }
    if h_rows != 3 || !have_g || !have_c {
        return Err(ErgoError::Parse { line: 0, msg: "map dump needs three H rows, g and c".into() });
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::FRAC_PI_2;

    fn exact_grid(map: &ErgonomicsMap) -> ScoreGrid {
        let mut samples = Vec::new();
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    let p = Vector3::new(i as f64 * 0.1, j as f64 * 0.1 - 0.2, 0.8 + k as f64 * 0.1);
                    samples.push((p, map.evaluate(&p)));
                }
            }
        }
        ScoreGrid { samples }
    }

    #[test]
    fn evaluate_example() {
        let m = ErgonomicsMap::human(Matrix3::identity() * 2.0, Vector3::zeros(), 0.0);
        assert_eq!(evaluate_score(&m, &Vector3::new(1.0, 0.0, 0.0)), 1.0);
    }

    #[test]
    fn fit_recovers_exact_quadratic() {
        let truth = ErgonomicsMap::bowl(synthetic_curvature(), Vector3::new(0.2, 0.05, 1.0));
        let fit = fit_map_from_grid(&exact_grid(&truth)).unwrap();
        assert!((fit.h - truth.h).amax() < 1e-8);
        assert!((fit.g - truth.g).amax() < 1e-8);
        assert!((fit.c - truth.c).abs() < 1e-8);
        assert!(fit.fit_rms.unwrap() <= 1e-9);
    }

    #[test]
    fn coplanar_grid_is_degenerate() {
        let samples = (0..30).map(|i| (Vector3::new(i as f64 * 0.1, (i % 5) as f64 * 0.1, 1.0), i as f64)).collect();
        assert!(matches!(fit_map_from_grid(&ScoreGrid { samples }), Err(ErgoError::DegenerateGrid(_))));
    }

    #[test]
    fn indefinite_fit_is_projected_and_shifted() {
        let saddle = ErgonomicsMap::human(Matrix3::from_diagonal(&Vector3::new(2.0, -1.0, 3.0)), Vector3::zeros(), 0.0);
        let fit = fit_map_from_grid(&exact_grid(&saddle)).unwrap();
        assert!(fit.h.symmetric_eigenvalues().min() >= -1e-12);
        for (p, _) in &exact_grid(&saddle).samples {
            assert!(fit.evaluate(p) >= -1e-12);
        }
    }

    #[test]
    fn translation_moves_minimizer() {
        let m = ErgonomicsMap::bowl(synthetic_curvature(), Vector3::new(0.35, 0.0, 1.0));
        let human = HumanPoseState { position: Vector3::new(1.0, -2.0, 0.0), heading: 0.0, timestamp: 0.0 };
        let w = map_to_world(&m, &human).unwrap();
        assert!((w.minimizer() - (m.minimizer() + human.position)).amax() < 1e-12);
        let id = HumanPoseState { position: Vector3::zeros(), heading: 0.0, timestamp: 0.0 };
        let same = map_to_world(&m, &id).unwrap();
        assert!((same.h - m.h).amax() < 1e-15 && (same.g - m.g).amax() < 1e-15 && (same.c - m.c).abs() < 1e-15);
    }

    #[test]
    fn rotation_preserves_scores() {
        let m = ErgonomicsMap::bowl(synthetic_curvature(), Vector3::new(0.35, 0.1, 1.0));
        let human = HumanPoseState { position: Vector3::new(0.4, 0.7, 0.0), heading: FRAC_PI_2, timestamp: 0.0 };
        let w = map_to_world(&m, &human).unwrap();
        for (p, s) in exact_grid(&m).samples {
            assert!((w.evaluate(&human.to_world(&p)) - s).abs() <= 1e-9);
        }
        assert!(matches!(map_to_world(&w, &human), Err(ErgoError::WrongFrame(Frame::World))));
    }

    #[test]
    fn stature_thresholds() {
        let t = StatureThresholds::default();
        assert_eq!(t.classify(1.58), StatureClass::Short);
        assert_eq!(t.classify(1.94), StatureClass::Tall);
        assert_eq!(t.classify(1.80), StatureClass::Average);
        assert_eq!(t.classify(1.65), StatureClass::Average);
    }

    #[test]
    fn registry_selects_by_height() {
        let reg = MapRegistry::synthetic(0.1).unwrap();
        let tall = select_map(&reg, &SubjectProfile::new(1.94).unwrap()).unwrap();
        assert_eq!(tall.label, "tall");
        let mut partial = reg.clone();
        partial.maps.remove(&StatureClass::Short);
        assert!(matches!(
            select_map(&partial, &SubjectProfile::new(1.58).unwrap()),
            Err(ErgoError::MissingClass(StatureClass::Short))
        ));
    }

    #[test]
    fn synthetic_centers_scale_with_height() {
        let a = synthetic_center(&SubjectProfile::new(1.6).unwrap());
        let b = synthetic_center(&SubjectProfile::new(1.9).unwrap());
        assert!((b.z - a.z - 0.18).abs() < 1e-12);
        let grid = generate_synthetic_reba_grid(&SubjectProfile::new(1.75).unwrap(), 0.1).unwrap();
        assert!(grid.samples.iter().all(|(_, s)| *s >= 0.0));
        assert_eq!(grid.samples.len(), 8 * 8 * 8);
    }

    #[test]
    fn csv_and_dump_round_trip() {
        let grid = generate_synthetic_reba_grid(&SubjectProfile::new(1.75).unwrap(), 0.1).unwrap();
        let back = read_grid_csv(write_grid_csv(&grid).as_bytes()).unwrap();
        assert_eq!(back, grid);
        let mut map = fit_map_from_grid(&grid).unwrap();
        map.label = "average".into();
        let again = read_map_dump(&write_map_dump(&map)).unwrap();
        assert_eq!(again, map);
    }

    #[test]
    fn csv_errors_carry_line_numbers() {
        let text = "x,y,z,score\n0,0,0,1\n0,0,zz,1\n";
        match read_grid_csv(text.as_bytes()) {
            Err(ErgoError::Parse { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }
}
