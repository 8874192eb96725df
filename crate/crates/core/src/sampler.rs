//! The 4D pose lattice, its midpoint test lattice, the image validity rules,
//! the validation split and label shuffling.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec2;
use crate::pose::{Aoi, Pose, PoseLabel, DEFAULT_CAMERA_HEIGHT};
use crate::raster::LeanTriplet;
use crate::scene::SceneModel;

/// An image needs at least this many visible mesh edges.
pub const MIN_VISIBLE_EDGES: u32 = 8;
/// Fraction of the top pixel row that must be sky.
pub const MIN_SKY_FRACTION: f64 = 0.5;
pub const DEFAULT_VALIDATION_FRACTION: f64 = 0.1;

const COUNT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub aoi: Aoi,
    /// Position step, meters.
    pub delta: f64,
    /// Degrees; must divide 360.
    pub yaw_step: f64,
    pub pitch_min: f64,
    pub pitch_max: f64,
    /// Degrees; must divide `pitch_max - pitch_min`.
    pub pitch_step: f64,
    /// Camera height, meters.
    pub z: f64,
}

impl GridSpec {
    /// Yaw every 5 degrees over the full circle, pitch every 3 degrees in `[0, 15]`.
    pub fn new(aoi: Aoi, delta: f64) -> Self {
        GridSpec {
            aoi,
            delta,
            yaw_step: 5.0,
            pitch_min: 0.0,
            pitch_max: 15.0,
            pitch_step: 3.0,
            z: DEFAULT_CAMERA_HEIGHT,
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.aoi.validate()?;
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::Config(format!("grid step must be positive, got {}", self.delta)));
        }
        if !(self.yaw_step > 0.0) || !divides(self.yaw_step, 360.0) {
            return Err(Error::Config(format!("yaw step {} does not divide 360", self.yaw_step)));
        }
        if !(self.pitch_step > 0.0)
            || self.pitch_max < self.pitch_min
            || !divides(self.pitch_step, self.pitch_max - self.pitch_min)
        {
            return Err(Error::Config(format!(
                "pitch step {} does not divide the pitch range [{}, {}]",
                self.pitch_step, self.pitch_min, self.pitch_max
            )));
        }
        if !self.z.is_finite() {
            return Err(Error::Config("camera height must be finite".into()));
        }
        Ok(())
    }

    /// Position lines along x, endpoints included.
    pub fn x_lines(&self) -> usize {
        (self.aoi.width / self.delta + COUNT_EPS).floor() as usize + 1
    }

    pub fn y_lines(&self) -> usize {
        (self.aoi.height / self.delta + COUNT_EPS).floor() as usize + 1
    }

    pub fn yaw_count(&self) -> usize {
        (360.0 / self.yaw_step).round() as usize
    }

    pub fn pitch_count(&self) -> usize {
        ((self.pitch_max - self.pitch_min) / self.pitch_step).round() as usize + 1
    }

    pub fn x_cells(&self) -> usize {
        self.x_lines() - 1
    }

    pub fn y_cells(&self) -> usize {
        self.y_lines() - 1
    }

    /// Pitch is not periodic, so there is one fewer cell than pitch samples.
    pub fn pitch_cells(&self) -> usize {
        self.pitch_count() - 1
    }

    pub fn grid_size(&self) -> usize {
        self.x_lines() * self.y_lines() * self.yaw_count() * self.pitch_count()
    }

    pub fn midpoint_size(&self) -> usize {
        self.x_cells() * self.y_cells() * self.yaw_count() * self.pitch_cells()
    }

    pub fn grid_pose(&self, idx: GridIndex) -> Pose {
        Pose {
            x: self.aoi.x0 + idx.i as f64 * self.delta,
            y: self.aoi.y0 + idx.j as f64 * self.delta,
            z: self.z,
            yaw: idx.k as f64 * self.yaw_step,
            pitch: self.pitch_min + idx.l as f64 * self.pitch_step,
        }
    }

    /// Center of the hyper-cube whose lower corner is `idx`.
    pub fn midpoint_pose(&self, idx: GridIndex) -> Pose {
        Pose {
            x: self.aoi.x0 + (idx.i as f64 + 0.5) * self.delta,
            y: self.aoi.y0 + (idx.j as f64 + 0.5) * self.delta,
            z: self.z,
            yaw: (idx.k as f64 + 0.5) * self.yaw_step,
            pitch: self.pitch_min + (idx.l as f64 + 0.5) * self.pitch_step,
        }
    }
}

fn divides(step: f64, range: f64) -> bool {
    let q = range / step;
    (q - q.round()).abs() < 1e-9
}

/// Integer coordinates on the pose lattice: position `(i, j)`, yaw `k`, pitch `l`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GridIndex {
    pub i: u32,
    pub j: u32,
    pub k: u32,
    pub l: u32,
}

impl GridIndex {
    pub fn new(i: u32, j: u32, k: u32, l: u32) -> Self {
        GridIndex { i, j, k, l }
    }
}

fn lattice(ni: usize, nj: usize, nk: usize, nl: usize) -> impl Iterator<Item = GridIndex> {
    (0..ni as u32).flat_map(move |i| {
        (0..nj as u32).flat_map(move |j| {
            (0..nk as u32).flat_map(move |k| (0..nl as u32).map(move |l| GridIndex::new(i, j, k, l)))
        })
    })
}

/// Training poses in row-major `(i, j, k, l)` order.
pub fn enumerate_grid(spec: &GridSpec) -> Vec<(GridIndex, Pose)> {
    lattice(spec.x_lines(), spec.y_lines(), spec.yaw_count(), spec.pitch_count())
        .map(|idx| (idx, spec.grid_pose(idx)))
        .collect()
}

/// Test poses at the centers of all training hyper-cubes, same order.
pub fn midpoint_grid(spec: &GridSpec) -> Vec<(GridIndex, Pose)> {
    lattice(spec.x_cells(), spec.y_cells(), spec.yaw_count(), spec.pitch_cells())
        .map(|idx| (idx, spec.midpoint_pose(idx)))
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InvalidReason {
    InsideBuilding,
    TooFewEdges,
    NoSkyline,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(tag = "status", content = "reason", rename_all = "snake_case")]
pub enum Validity {
    Valid,
    Invalid(InvalidReason),
}

impl Validity {
    pub fn is_valid(&self) -> bool {
        matches!(self, Validity::Valid)
    }
}

/// Applies the rules in order, reporting the first failure: camera inside a
/// building, fewer than [`MIN_VISIBLE_EDGES`] visible edges, less than half
/// of the top pixel row being sky.
pub fn check_validity(scene: &SceneModel, pose: &Pose, triplet: &LeanTriplet) -> Validity {
    if scene.is_inside_building(Vec2::new(pose.x, pose.y)) {
        return Validity::Invalid(InvalidReason::InsideBuilding);
    }
    if triplet.edge.visible_edge_count < MIN_VISIBLE_EDGES {
        return Validity::Invalid(InvalidReason::TooFewEdges);
    }
    let sky = triplet.top_row_sky() as f64;
    if sky < MIN_SKY_FRACTION * triplet.width() as f64 {
        return Validity::Invalid(InvalidReason::NoSkyline);
    }
    Validity::Valid
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Validation,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub id: u64,
    pub grid: GridIndex,
    pub pose: Pose,
    pub label: PoseLabel,
    #[serde(flatten)]
    pub validity: Validity,
    pub split: Split,
    /// Set when the label was permuted away from this record's pose.
    #[serde(default)]
    pub label_shuffled: bool,
    /// Visible mesh edges in the rendered edge image, when rendered.
    #[serde(default)]
    pub visible_edges: Option<u32>,
}

/// Marks exactly `floor(fraction * n)` records, chosen uniformly at random,
/// as validation; the rest become training records.
pub fn split_validation(records: &mut [SampleRecord], fraction: f64, seed: u64) -> Result<()> {
    if !(fraction > 0.0 && fraction < 1.0) {
        return Err(Error::Config(format!("validation fraction {fraction} must lie in (0, 1)")));
    }
    let n = records.len();
    let count = (fraction * n as f64 + COUNT_EPS).floor() as usize;
    for r in records.iter_mut() {
        r.split = Split::Train;
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for idx in rand::seq::index::sample(&mut rng, n, count) {
        records[idx].split = Split::Validation;
    }
    Ok(())
}

/// Permutes labels across records with a seeded uniform permutation; each
/// record keeps its pose and images but carries another record's label.
pub fn shuffle_labels(records: &mut [SampleRecord], seed: u64) {
    let mut labels: Vec<PoseLabel> = records.iter().map(|r| r.label).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    labels.shuffle(&mut rng);
    for (r, label) in records.iter_mut().zip(labels) {
        r.label = label;
        r.label_shuffled = true;
    }
}
