//! Grid-based scoring of pose predictions.
//!
//! Matching: a prediction succeeds at rank `n` when the true training pose is
//! among the `n` nearest lattice poses to the predicted pose. Interpolation:
//! predicted and true poses are binned into lattice hyper-cubes and compared
//! by Manhattan distance between cube indices.

use std::collections::{HashMap, HashSet};
use std::fmt::Write as _;
use std::fs::File;
use std::io::BufWriter;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dataset::{Manifest, PredictionSet};
use crate::error::{Error, Result};
use crate::geom::{self, Vec2};
use crate::pose::{label_to_pose, quat_angular_distance, wrap_degrees, yaw_difference, yaw_pitch_to_quat, Pose};
use crate::sampler::{GridIndex, GridSpec, Split};
use crate::scene::SceneModel;

/// Euclidean distance in lattice steps: position over `delta`, yaw (wrapped)
/// over the yaw step, pitch over the pitch step.
pub fn grid_distance(a: &Pose, b: &Pose, spec: &GridSpec) -> f64 {
    let dx = (a.x - b.x) / spec.delta;
    let dy = (a.y - b.y) / spec.delta;
    let dk = yaw_difference(a.yaw, b.yaw) / spec.yaw_step;
    let dl = (a.pitch - b.pitch) / spec.pitch_step;
    (dx * dx + dy * dy + dk * dk + dl * dl).sqrt()
}

/// 1-based position of `truth_id` among `candidates` ordered by distance to
/// `predicted`, ties broken by id.
pub fn rank_of_truth(predicted: &Pose, truth_id: u64, candidates: &[(u64, Pose)], spec: &GridSpec) -> Result<usize> {
    let truth = candidates
        .iter()
        .find(|(id, _)| *id == truth_id)
        .ok_or(Error::Lookup(truth_id))?;
    let d_truth = grid_distance(predicted, &truth.1, spec);
    let closer = candidates
        .iter()
        .filter(|(id, pose)| {
            let d = grid_distance(predicted, pose, spec);
            d < d_truth || (d == d_truth && *id < truth_id)
        })
        .count();
    Ok(closer + 1)
}

type BucketKey = (i64, i64, i64, i64);

/// Candidates bucketed by their nearest lattice node, so a rank query only
/// visits buckets that can hold a pose at least as close as the truth.
/// Returns exactly what [`rank_of_truth`] returns.
pub struct NnIndex {
    spec: GridSpec,
    candidates: Vec<(u64, Pose)>,
    by_id: HashMap<u64, usize>,
    buckets: HashMap<BucketKey, Vec<usize>>,
}

impl NnIndex {
    pub fn new(spec: &GridSpec, candidates: Vec<(u64, Pose)>) -> Self {
        let mut buckets: HashMap<BucketKey, Vec<usize>> = HashMap::new();
        let mut by_id = HashMap::with_capacity(candidates.len());
        for (n, (id, pose)) in candidates.iter().enumerate() {
            by_id.insert(*id, n);
            buckets.entry(Self::key(spec, pose)).or_default().push(n);
        }
        NnIndex {
            spec: *spec,
            candidates,
            by_id,
            buckets,
        }
    }

    fn coords(spec: &GridSpec, p: &Pose) -> [f64; 4] {
        [
            (p.x - spec.aoi.x0) / spec.delta,
            (p.y - spec.aoi.y0) / spec.delta,
            wrap_degrees(p.yaw) / spec.yaw_step,
            (p.pitch - spec.pitch_min) / spec.pitch_step,
        ]
    }

    fn key(spec: &GridSpec, p: &Pose) -> BucketKey {
        let c = Self::coords(spec, p);
        let k = spec.yaw_count() as i64;
        (
            c[0].round() as i64,
            c[1].round() as i64,
            (c[2].round() as i64).rem_euclid(k),
            c[3].round() as i64,
        )
    }

    pub fn len(&self) -> usize {
        self.candidates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.candidates.is_empty()
    }

    pub fn rank(&self, predicted: &Pose, truth_id: u64) -> Result<usize> {
        let &t = self.by_id.get(&truth_id).ok_or(Error::Lookup(truth_id))?;
        let d_truth = grid_distance(predicted, &self.candidates[t].1, &self.spec);
        let closer = |n: &usize| {
            let (id, pose) = &self.candidates[*n];
            let d = grid_distance(predicted, pose, &self.spec);
            d < d_truth || (d == d_truth && *id < truth_id)
        };

        // a bucket's members lie within half a step of its key on every axis
        let reach = d_truth + 0.5 + 1e-6;
        let c = Self::coords(&self.spec, predicted);
        let range = |v: f64| ((v - reach).floor() as i64, (v + reach).ceil() as i64);
        let (x0, x1) = range(c[0]);
        let (y0, y1) = range(c[1]);
        let (l0, l1) = range(c[3]);
        let k_count = self.spec.yaw_count() as i64;
        let (k0, k1) = range(c[2]);
        let yaw_keys: Vec<i64> = if k1 - k0 + 1 >= k_count {
            (0..k_count).collect()
        } else {
            (k0..=k1).map(|k| k.rem_euclid(k_count)).collect()
        };
        let volume = (x1 - x0 + 1) as f64 * (y1 - y0 + 1) as f64 * yaw_keys.len() as f64 * (l1 - l0 + 1) as f64;

        let count = if volume > self.buckets.len() as f64 {
            self.buckets.values().flatten().filter(|n| closer(n)).count()
        } else {
            let mut count = 0;
            for x in x0..=x1 {
                for y in y0..=y1 {
                    for &k in &yaw_keys {
                        for l in l0..=l1 {
                            if let Some(members) = self.buckets.get(&(x, y, k, l)) {
                                count += members.iter().filter(|n| closer(n)).count();
                            }
                        }
                    }
                }
            }
            count
        };
        Ok(count + 1)
    }
}

/// Hyper-cube holding a pose; indices are clamped into the lattice and
/// `out_of_area` records whether clamping moved the position.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Cube {
    pub index: GridIndex,
    pub out_of_area: bool,
}

pub fn cube_of(pose: &Pose, spec: &GridSpec) -> Cube {
    let clamp = |v: f64, cells: usize| -> (u32, bool) {
        let last = cells.max(1) as i64 - 1;
        let f = v.floor();
        if !f.is_finite() || f < 0.0 {
            (0, true)
        } else if f as i64 > last {
            (last as u32, true)
        } else {
            (f as u32, false)
        }
    };
    let (i, oi) = clamp((pose.x - spec.aoi.x0) / spec.delta, spec.x_cells());
    let (j, oj) = clamp((pose.y - spec.aoi.y0) / spec.delta, spec.y_cells());
    // the far AOI edge belongs to the last cell
    let oi = oi && !(pose.x == spec.aoi.x0 + spec.aoi.width);
    let oj = oj && !(pose.y == spec.aoi.y0 + spec.aoi.height);
    let k_count = spec.yaw_count() as i64;
    let k = ((wrap_degrees(pose.yaw) / spec.yaw_step).floor() as i64).rem_euclid(k_count) as u32;
    let (l, _) = clamp((pose.pitch - spec.pitch_min) / spec.pitch_step, spec.pitch_cells());
    Cube {
        index: GridIndex::new(i, j, k, l),
        out_of_area: oi || oj,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dims {
    /// Position only.
    Two,
    /// Position, yaw (cyclic) and pitch.
    Four,
}

pub fn manhattan_cell_distance(a: &GridIndex, b: &GridIndex, spec: &GridSpec, dims: Dims) -> u32 {
    let pos = a.i.abs_diff(b.i) + a.j.abs_diff(b.j);
    match dims {
        Dims::Two => pos,
        Dims::Four => {
            let k_count = spec.yaw_count() as u32;
            let dk = a.k.abs_diff(b.k) % k_count;
            pos + dk.min(k_count - dk) + a.l.abs_diff(b.l)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Task {
    /// Training split, scored by nearest-neighbour rank.
    Matching,
    /// Test split, scored by hyper-cube distance.
    Interpolation,
}

impl std::str::FromStr for Task {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "matching" => Ok(Task::Matching),
            "interpolation" => Ok(Task::Interpolation),
            _ => Err(Error::Config(format!("unknown task `{s}` (matching, interpolation)"))),
        }
    }
}

/// Scores for one evaluated record.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleOutcome {
    pub id: u64,
    /// Cube of the true pose.
    pub truth_cube: GridIndex,
    pub rank: Option<usize>,
    pub d2: Option<u32>,
    pub d4: Option<u32>,
    pub position_error: f64,
    pub orientation_error: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct L2Stats {
    pub count: usize,
    /// Meters.
    pub position_mean: f64,
    pub position_median: f64,
    /// Degrees.
    pub orientation_mean: f64,
    pub orientation_median: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MatchingMetrics {
    pub nn1: f64,
    pub nn3: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct InterpolationMetrics {
    pub d1_2d: f64,
    pub d3_2d: f64,
    pub d1_4d: f64,
    pub d3_4d: f64,
}

/// A: geo-matching, B: matching with shuffled labels, C: geo-interpolation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum TaskTag {
    A,
    B,
    C,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub tag: TaskTag,
    pub task: Task,
    /// Labels were shuffled: matching scores measure memorization.
    pub shuffled: bool,
    pub samples: usize,
    pub matching: Option<MatchingMetrics>,
    pub interpolation: Option<InterpolationMetrics>,
    pub l2: L2Stats,
}

impl EvalReport {
    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let text = serde_json::to_string_pretty(self).map_err(|e| Error::Integrity(e.to_string()))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }
}

fn truth_pose(manifest: &Manifest, label: &crate::pose::PoseLabel) -> Result<Pose> {
    label_to_pose(label, &manifest.header.grid.aoi, manifest.header.grid.z)
}

/// Records scored for `task`, in id order.
fn scored_records(manifest: &Manifest, task: Task) -> Vec<&crate::dataset::ManifestRecord> {
    let split = match task {
        Task::Matching => Split::Train,
        Task::Interpolation => Split::Test,
    };
    let mut v: Vec<_> = manifest.valid_in(split).collect();
    v.sort_by_key(|r| r.sample.id);
    v
}

/// Scores every record of the task's split. Each such record needs a
/// prediction; predictions for other records are ignored.
pub fn evaluate_samples(preds: &PredictionSet, manifest: &Manifest, task: Task) -> Result<Vec<SampleOutcome>> {
    preds.check_against(manifest)?;
    let spec = manifest.header.grid;
    let by_id: HashMap<u64, &crate::dataset::Prediction> = preds.predictions.iter().map(|p| (p.id, p)).collect();
    let scored = scored_records(manifest, task);
    let missing: Vec<u64> = scored
        .iter()
        .map(|r| r.sample.id)
        .filter(|id| !by_id.contains_key(id))
        .collect();
    if !missing.is_empty() {
        return Err(Error::Coverage { missing });
    }

    let index = match task {
        Task::Matching => {
            let mut candidates = Vec::new();
            for r in manifest.valid_in(Split::Train).chain(manifest.valid_in(Split::Validation)) {
                candidates.push((r.sample.id, truth_pose(manifest, &r.sample.label)?));
            }
            candidates.sort_by_key(|c| c.0);
            Some(NnIndex::new(&spec, candidates))
        }
        Task::Interpolation => None,
    };

    let mut out = Vec::with_capacity(scored.len());
    for r in scored {
        let pred_label = by_id[&r.sample.id].pose_label();
        let predicted = label_to_pose(&pred_label, &spec.aoi, spec.z)?;
        let truth = truth_pose(manifest, &r.sample.label)?;
        let truth_cube = cube_of(&truth, &spec).index;
        let (rank, d2, d4) = match &index {
            Some(ix) => (Some(ix.rank(&predicted, r.sample.id)?), None, None),
            None => {
                let pc = cube_of(&predicted, &spec).index;
                (
                    None,
                    Some(manhattan_cell_distance(&pc, &truth_cube, &spec, Dims::Two)),
                    Some(manhattan_cell_distance(&pc, &truth_cube, &spec, Dims::Four)),
                )
            }
        };
        let q_pred = crate::pose::Quaternion::from_components(pred_label.q)?;
        let q_true = yaw_pitch_to_quat(truth.yaw, truth.pitch);
        out.push(SampleOutcome {
            id: r.sample.id,
            truth_cube,
            rank,
            d2,
            d4,
            position_error: (predicted.x - truth.x).hypot(predicted.y - truth.y),
            orientation_error: quat_angular_distance(&q_pred, &q_true),
        });
    }
    Ok(out)
}

fn fraction(outcomes: &[SampleOutcome], pass: impl Fn(&SampleOutcome) -> bool) -> f64 {
    if outcomes.is_empty() {
        return 0.0;
    }
    outcomes.iter().filter(|o| pass(o)).count() as f64 / outcomes.len() as f64
}

/// Median with the two middle values averaged for even counts; 0 when empty.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

fn mean(values: &[f64]) -> f64 {
    if values.is_empty() {
        0.0
    } else {
        values.iter().sum::<f64>() / values.len() as f64
    }
}

pub fn l2_stats(outcomes: &[SampleOutcome]) -> L2Stats {
    let pos: Vec<f64> = outcomes.iter().map(|o| o.position_error).collect();
    let ori: Vec<f64> = outcomes.iter().map(|o| o.orientation_error).collect();
    L2Stats {
        count: outcomes.len(),
        position_mean: mean(&pos),
        position_median: median(&pos),
        orientation_mean: mean(&ori),
        orientation_median: median(&ori),
    }
}

fn report(task: Task, manifest: &Manifest, outcomes: &[SampleOutcome]) -> EvalReport {
    let matching = (task == Task::Matching).then(|| MatchingMetrics {
        nn1: fraction(outcomes, |o| o.rank == Some(1)),
        nn3: fraction(outcomes, |o| o.rank.is_some_and(|r| r <= 3)),
    });
    let interpolation = (task == Task::Interpolation).then(|| InterpolationMetrics {
        d1_2d: fraction(outcomes, |o| o.d2 == Some(0)),
        d3_2d: fraction(outcomes, |o| o.d2.is_some_and(|d| d < 3)),
        d1_4d: fraction(outcomes, |o| o.d4 == Some(0)),
        d3_4d: fraction(outcomes, |o| o.d4.is_some_and(|d| d < 3)),
    });
    let tag = match (task, manifest.header.shuffled) {
        (Task::Interpolation, _) => TaskTag::C,
        (Task::Matching, false) => TaskTag::A,
        (Task::Matching, true) => TaskTag::B,
    };
    EvalReport {
        tag,
        task,
        shuffled: manifest.header.shuffled,
        samples: outcomes.len(),
        matching,
        interpolation,
        l2: l2_stats(outcomes),
    }
}

/// 1-NN / 3-NN retrieval fractions over the training split.
pub fn matching_report(preds: &PredictionSet, manifest: &Manifest) -> Result<EvalReport> {
    let outcomes = evaluate_samples(preds, manifest, Task::Matching)?;
    Ok(report(Task::Matching, manifest, &outcomes))
}

/// Hyper-cube distance fractions (D < 1, D < 3; 2D and 4D) over the test split.
pub fn interpolation_report(preds: &PredictionSet, manifest: &Manifest) -> Result<EvalReport> {
    let outcomes = evaluate_samples(preds, manifest, Task::Interpolation)?;
    Ok(report(Task::Interpolation, manifest, &outcomes))
}

pub fn l2_report(preds: &PredictionSet, manifest: &Manifest, task: Task) -> Result<L2Stats> {
    Ok(l2_stats(&evaluate_samples(preds, manifest, task)?))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SuccessRule {
    Nn1,
    Nn3,
    D1TwoD,
    D3TwoD,
    #[default]
    D1FourD,
    D3FourD,
}

impl SuccessRule {
    pub fn task(&self) -> Task {
        match self {
            SuccessRule::Nn1 | SuccessRule::Nn3 => Task::Matching,
            _ => Task::Interpolation,
        }
    }

    pub fn passes(&self, o: &SampleOutcome) -> bool {
        match self {
            SuccessRule::Nn1 => o.rank == Some(1),
            SuccessRule::Nn3 => o.rank.is_some_and(|r| r <= 3),
            SuccessRule::D1TwoD => o.d2 == Some(0),
            SuccessRule::D3TwoD => o.d2.is_some_and(|d| d < 3),
            SuccessRule::D1FourD => o.d4 == Some(0),
            SuccessRule::D3FourD => o.d4.is_some_and(|d| d < 3),
        }
    }
}

impl std::str::FromStr for SuccessRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "nn1" => Ok(SuccessRule::Nn1),
            "nn3" => Ok(SuccessRule::Nn3),
            "d1-2d" => Ok(SuccessRule::D1TwoD),
            "d3-2d" => Ok(SuccessRule::D3TwoD),
            "d1-4d" => Ok(SuccessRule::D1FourD),
            "d3-4d" => Ok(SuccessRule::D3FourD),
            _ => Err(Error::Config(format!(
                "unknown success rule `{s}` (nn1, nn3, d1-2d, d3-2d, d1-4d, d3-4d)"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct HeatCell {
    pub successes: u32,
    pub total: u32,
    /// Some building footprint overlaps the cell with positive area.
    pub building: bool,
}

impl HeatCell {
    pub fn rate(&self) -> Option<f64> {
        (self.total > 0).then(|| self.successes as f64 / self.total as f64)
    }
}

/// Per-position-cell success rates, `cols x rows`, row-major from `j = 0`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Heatmap {
    pub cols: usize,
    pub rows: usize,
    pub rule: SuccessRule,
    pub cells: Vec<HeatCell>,
}

impl Heatmap {
    pub fn cell(&self, i: usize, j: usize) -> &HeatCell {
        &self.cells[j * self.cols + i]
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("i,j,total,successes,rate,building\n");
        for j in 0..self.rows {
            for i in 0..self.cols {
                let c = self.cell(i, j);
                let rate = c.rate().map(|r| format!("{r}")).unwrap_or_default();
                let _ = writeln!(s, "{i},{j},{},{},{rate},{}", c.total, c.successes, u8::from(c.building));
            }
        }
        s
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_csv()).map_err(|e| Error::io(path, e))
    }

    /// RGB image, `scale` pixels per cell, north (high `j`) at the top.
    /// Rates run blue (0) to red (1); cells without samples are white when a
    /// building covers them and gray otherwise.
    pub fn write_png(&self, path: impl AsRef<Path>, scale: u32) -> Result<()> {
        let path = path.as_ref();
        let scale = scale.max(1) as usize;
        let (w, h) = (self.cols * scale, self.rows * scale);
        let mut data = vec![0u8; w * h * 3];
        for row in 0..h {
            let j = self.rows - 1 - row / scale;
            for col in 0..w {
                let c = self.cell(col / scale, j);
                let rgb = match c.rate() {
                    Some(r) => rate_color(r),
                    None if c.building => [255, 255, 255],
                    None => [128, 128, 128],
                };
                data[(row * w + col) * 3..][..3].copy_from_slice(&rgb);
            }
        }
        let image_err = |e: png::EncodingError| Error::Image {
            path: path.to_path_buf(),
            message: e.to_string(),
        };
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut enc = png::Encoder::new(BufWriter::new(file), w as u32, h as u32);
        enc.set_color(png::ColorType::Rgb);
        enc.set_depth(png::BitDepth::Eight);
        let mut writer = enc.write_header().map_err(image_err)?;
        writer.write_image_data(&data).map_err(image_err)?;
        writer.finish().map_err(image_err)
    }
}

fn rate_color(r: f64) -> [u8; 3] {
    let r = r.clamp(0.0, 1.0);
    [(255.0 * r).round() as u8, 0, (255.0 * (1.0 - r)).round() as u8]
}

/// Aggregates `rule` successes per position cell of the true pose. With a
/// scene, cells overlapped by a footprint are flagged.
pub fn heatmap(preds: &PredictionSet, manifest: &Manifest, rule: SuccessRule, scene: Option<&SceneModel>) -> Result<Heatmap> {
    let outcomes = evaluate_samples(preds, manifest, rule.task())?;
    Ok(heatmap_from_outcomes(&outcomes, &manifest.header.grid, rule, scene))
}

pub fn heatmap_from_outcomes(
    outcomes: &[SampleOutcome],
    spec: &GridSpec,
    rule: SuccessRule,
    scene: Option<&SceneModel>,
) -> Heatmap {
    let (cols, rows) = (spec.x_cells().max(1), spec.y_cells().max(1));
    let mut cells = vec![HeatCell::default(); cols * rows];
    for o in outcomes {
        let c = &mut cells[o.truth_cube.j as usize * cols + o.truth_cube.i as usize];
        c.total += 1;
        c.successes += u32::from(rule.passes(o));
    }
    if let Some(scene) = scene {
        for j in 0..rows {
            for i in 0..cols {
                let min = Vec2::new(
                    spec.aoi.x0 + i as f64 * spec.delta,
                    spec.aoi.y0 + j as f64 * spec.delta,
                );
                let max = min + Vec2::new(spec.delta, spec.delta);
                cells[j * cols + i].building = scene
                    .footprints()
                    .iter()
                    .any(|f| geom::rect_overlap_area(&f.polygon, min, max) > 0.0);
            }
        }
    }
    Heatmap {
        cols,
        rows,
        rule,
        cells,
    }
}

/// Ids of records that would be scored for `task` but have no prediction.
pub fn missing_predictions(preds: &PredictionSet, manifest: &Manifest, task: Task) -> Vec<u64> {
    let have: HashSet<u64> = preds.predictions.iter().map(|p| p.id).collect();
    scored_records(manifest, task)
        .into_iter()
        .map(|r| r.sample.id)
        .filter(|id| !have.contains(id))
        .collect()
}
