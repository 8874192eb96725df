//! Experiment configuration and the end-to-end commands behind the binary.
//!
//! ```toml
//! [scene]
//! mesh = "city.obj"          # relative to this file; or a [scene.synth] table
//!
//! [aoi]                      # optional for synthetic scenes (whole city)
//! x0 = 0.0
//! y0 = 0.0
//! width = 400.0
//! height = 400.0
//!
//! [grid]
//! delta = 20.0               # also: yaw_step, pitch_min, pitch_max, pitch_step, camera_height
//!
//! [camera]                   # optional: width, height, hfov, near, far
//!
//! [dataset]
//! output = "data/city"
//! combo = "EFD"
//! split_seed = 0
//! validation_fraction = 0.1
//! ```

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset::{
    self, Combo, DatasetWriter, ImageFiles, Manifest, ManifestHeader, ManifestRecord, SceneSource, MANIFEST_FILE,
};
use crate::error::{Error, Result};
use crate::eval::{self, EvalReport, Heatmap, SuccessRule, Task};
use crate::pose::{pose_to_label, Aoi, Pose, DEFAULT_CAMERA_HEIGHT};
use crate::raster::{render_triplet, CameraIntrinsics};
use crate::sampler::{
    check_validity, enumerate_grid, midpoint_grid, shuffle_labels, split_validation, GridIndex, GridSpec,
    InvalidReason, SampleRecord, Split, Validity, DEFAULT_VALIDATION_FRACTION,
};
use crate::scene::{load_mesh, synth_city, write_mesh_to, SceneModel, SynthCityConfig};
use crate::geom::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SceneConfig {
    #[serde(default)]
    pub mesh: Option<PathBuf>,
    #[serde(default)]
    pub synth: Option<SynthCityConfig>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridConfig {
    pub delta: f64,
    #[serde(default = "default_yaw_step")]
    pub yaw_step: f64,
    #[serde(default)]
    pub pitch_min: f64,
    #[serde(default = "default_pitch_max")]
    pub pitch_max: f64,
    #[serde(default = "default_pitch_step")]
    pub pitch_step: f64,
    #[serde(default = "default_camera_height")]
    pub camera_height: f64,
}

fn default_yaw_step() -> f64 {
    5.0
}
fn default_pitch_max() -> f64 {
    15.0
}
fn default_pitch_step() -> f64 {
    3.0
}
fn default_camera_height() -> f64 {
    DEFAULT_CAMERA_HEIGHT
}
fn default_combo() -> Combo {
    Combo::EFD
}
fn default_validation_fraction() -> f64 {
    DEFAULT_VALIDATION_FRACTION
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DatasetConfig {
    pub output: PathBuf,
    #[serde(default = "default_combo")]
    pub combo: Combo,
    #[serde(default)]
    pub split_seed: u64,
    #[serde(default = "default_validation_fraction")]
    pub validation_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub scene: SceneConfig,
    #[serde(default)]
    pub aoi: Option<Aoi>,
    pub grid: GridConfig,
    #[serde(default)]
    pub camera: CameraIntrinsics,
    pub dataset: DatasetConfig,
}

impl ExperimentConfig {
    /// Parses TOML; relative paths are resolved against `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let mut cfg: ExperimentConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        if let Some(mesh) = &cfg.scene.mesh {
            cfg.scene.mesh = Some(base_dir.join(mesh));
        }
        cfg.dataset.output = base_dir.join(&cfg.dataset.output);
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new("")))
    }

    pub fn validate(&self) -> Result<()> {
        match (&self.scene.mesh, &self.scene.synth) {
            (Some(_), None) => {
                if self.aoi.is_none() {
                    return Err(Error::Config("a mesh scene needs an [aoi] table".into()));
                }
            }
            (None, Some(s)) => s.validate()?,
            _ => return Err(Error::Config("[scene] needs exactly one of `mesh` or `synth`".into())),
        }
        self.camera.validate()?;
        self.grid_spec()?.validate()?;
        let f = self.dataset.validation_fraction;
        if !(f > 0.0 && f < 1.0) {
            return Err(Error::Config(format!("validation fraction {f} must lie in (0, 1)")));
        }
        Ok(())
    }

    pub fn area(&self) -> Result<Aoi> {
        match (self.aoi, &self.scene.synth) {
            (Some(a), _) => Ok(a),
            (None, Some(s)) => Aoi::new(0.0, 0.0, s.width, s.height),
            (None, None) => Err(Error::Config("missing [aoi]".into())),
        }
    }

    pub fn grid_spec(&self) -> Result<GridSpec> {
        Ok(GridSpec {
            aoi: self.area()?,
            delta: self.grid.delta,
            yaw_step: self.grid.yaw_step,
            pitch_min: self.grid.pitch_min,
            pitch_max: self.grid.pitch_max,
            pitch_step: self.grid.pitch_step,
            z: self.grid.camera_height,
        })
    }

    pub fn scene_source(&self) -> SceneSource {
        match (&self.scene.mesh, &self.scene.synth) {
            (Some(p), _) => SceneSource::Mesh {
                path: p.display().to_string(),
            },
            (None, Some(s)) => SceneSource::Synth(s.clone()),
            (None, None) => unreachable!("validated"),
        }
    }

    pub fn build_scene(&self) -> Result<SceneModel> {
        load_scene(&self.scene_source(), Path::new(""))
    }
}

/// Rebuilds a dataset's scene; mesh paths are resolved against `base`.
pub fn load_scene(source: &SceneSource, base: &Path) -> Result<SceneModel> {
    match source {
        SceneSource::Mesh { path } => load_mesh(base.join(path)),
        SceneSource::Synth(cfg) => synth_city(cfg),
    }
}

/// Training and test pose counts a config would render.
pub fn plan_counts(config: &ExperimentConfig) -> Result<(usize, usize)> {
    let spec = config.grid_spec()?;
    spec.validate()?;
    Ok((spec.grid_size(), spec.midpoint_size()))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenerateSummary {
    pub output: PathBuf,
    pub train_poses: usize,
    pub test_poses: usize,
    pub valid_train: usize,
    pub validation: usize,
    pub valid_test: usize,
    /// Invalid samples per reason.
    pub invalid: BTreeMap<String, usize>,
    pub seconds: f64,
}

impl GenerateSummary {
    pub fn throughput(&self) -> f64 {
        (self.train_poses + self.test_poses) as f64 / self.seconds.max(1e-9)
    }
}

fn reason_name(r: InvalidReason) -> &'static str {
    match r {
        InvalidReason::InsideBuilding => "inside_building",
        InvalidReason::TooFewEdges => "too_few_edges",
        InvalidReason::NoSkyline => "no_skyline",
    }
}

/// Clears a previous dataset in `out`; refuses to write into any other
/// non-empty directory.
fn prepare_output(out: &Path) -> Result<()> {
    if !out.exists() {
        return std::fs::create_dir_all(out).map_err(|e| Error::io(out, e));
    }
    let mut entries = std::fs::read_dir(out).map_err(|e| Error::io(out, e))?;
    if entries.next().is_none() {
        return Ok(());
    }
    let manifest = out.join(MANIFEST_FILE);
    if !manifest.is_file() {
        return Err(Error::Config(format!(
            "output directory {} is not empty and holds no dataset",
            out.display()
        )));
    }
    for sub in ["edge", "face", "depth"] {
        let dir = out.join(sub);
        if dir.is_dir() {
            std::fs::remove_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
    }
    std::fs::remove_file(&manifest).map_err(|e| Error::io(&manifest, e))
}

const BATCH: usize = 2048;

/// Renders, validates and writes the full training and test sets. Output is
/// byte-identical for a given config regardless of `threads`.
pub fn cmd_generate(config: &ExperimentConfig, threads: Option<usize>) -> Result<GenerateSummary> {
    config.validate()?;
    let start = Instant::now();
    let scene = config.build_scene()?;
    let spec = config.grid_spec()?;
    let cam = config.camera;

    let train = enumerate_grid(&spec);
    let test = midpoint_grid(&spec);
    let poses: Vec<(Split, GridIndex, Pose)> = train
        .iter()
        .map(|&(g, p)| (Split::Train, g, p))
        .chain(test.iter().map(|&(g, p)| (Split::Test, g, p)))
        .collect();
    log::info!(
        "rendering {} training and {} test poses over {} buildings",
        train.len(),
        test.len(),
        scene.footprints().len()
    );

    let out = &config.dataset.output;
    prepare_output(out)?;
    let mut header = ManifestHeader::new(config.scene_source(), spec, cam, config.dataset.combo);
    header.validation_fraction = config.dataset.validation_fraction;
    header.seeds.split = config.dataset.split_seed;
    let writer = DatasetWriter::create(out, header)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;

    let render_one = |id: usize| -> Result<(Validity, Option<u32>, Option<ImageFiles>)> {
        let pose = poses[id].2;
        if scene.is_inside_building(Vec2::new(pose.x, pose.y)) {
            return Ok((Validity::Invalid(InvalidReason::InsideBuilding), None, None));
        }
        let t = render_triplet(&scene, &pose, &cam);
        let validity = check_validity(&scene, &pose, &t);
        let files = if validity.is_valid() {
            Some(writer.write_images(id as u64, &t)?)
        } else {
            None
        };
        Ok((validity, Some(t.edge.visible_edge_count), files))
    };

    let mut results = Vec::with_capacity(poses.len());
    for batch_start in (0..poses.len()).step_by(BATCH) {
        let end = (batch_start + BATCH).min(poses.len());
        let batch: Vec<_> = pool.install(|| {
            (batch_start..end)
                .into_par_iter()
                .map(render_one)
                .collect::<Result<Vec<_>>>()
        })?;
        results.extend(batch);
        log::debug!("rendered {end}/{}", poses.len());
    }

    let mut records: Vec<ManifestRecord> = Vec::with_capacity(poses.len());
    for (id, ((split, grid, pose), (validity, edges, files))) in poses.iter().zip(results).enumerate() {
        records.push(ManifestRecord {
            sample: SampleRecord {
                id: id as u64,
                grid: *grid,
                pose: *pose,
                label: pose_to_label(pose, &spec.aoi)?,
                validity,
                split: *split,
                label_shuffled: false,
                visible_edges: edges,
            },
            files,
        });
    }

    let mut valid_train: Vec<SampleRecord> = records
        .iter()
        .filter(|r| r.sample.split == Split::Train && r.sample.validity.is_valid())
        .map(|r| r.sample.clone())
        .collect();
    if !valid_train.is_empty() {
        split_validation(&mut valid_train, config.dataset.validation_fraction, config.dataset.split_seed)?;
        for s in valid_train {
            let id = s.id as usize;
            records[id].sample.split = s.split;
        }
    }

    let mut invalid = BTreeMap::new();
    for r in &records {
        if let Validity::Invalid(reason) = r.sample.validity {
            *invalid.entry(reason_name(reason).to_string()).or_insert(0) += 1;
        }
    }
    let count = |split: Split| records.iter().filter(|r| r.sample.split == split && r.sample.validity.is_valid()).count();
    let summary = GenerateSummary {
        output: out.clone(),
        train_poses: train.len(),
        test_poses: test.len(),
        valid_train: count(Split::Train),
        validation: count(Split::Validation),
        valid_test: count(Split::Test),
        invalid,
        seconds: 0.0,
    };
    writer.finish(records)?;
    Ok(GenerateSummary {
        seconds: start.elapsed().as_secs_f64(),
        ..summary
    })
}

/// Default location of a shuffled copy of `manifest`: a sibling file, so
/// image paths still resolve.
pub fn shuffled_manifest_path(manifest: &Path, seed: u64) -> PathBuf {
    manifest.with_file_name(format!("manifest.shuffled-{seed}.jsonl"))
}

/// Writes a copy of the manifest whose training and validation labels are
/// permuted among themselves.
pub fn cmd_shuffle(manifest_path: &Path, seed: u64, output: Option<&Path>) -> Result<PathBuf> {
    let mut m = dataset::read_manifest(manifest_path)?;
    if m.header.shuffled {
        return Err(Error::Integrity(format!("{} is already shuffled", manifest_path.display())));
    }
    let target: Vec<usize> = (0..m.records.len())
        .filter(|&n| {
            let s = &m.records[n].sample;
            s.validity.is_valid() && matches!(s.split, Split::Train | Split::Validation)
        })
        .collect();
    let mut samples: Vec<SampleRecord> = target.iter().map(|&n| m.records[n].sample.clone()).collect();
    shuffle_labels(&mut samples, seed);
    for (n, s) in target.into_iter().zip(samples) {
        m.records[n].sample = s;
    }
    m.header.shuffled = true;
    m.header.seeds.shuffle = Some(seed);
    let out = output.map(Path::to_path_buf).unwrap_or_else(|| shuffled_manifest_path(manifest_path, seed));
    if out.parent() != manifest_path.parent() {
        log::warn!("shuffled manifest written outside the dataset directory; image paths are relative to it");
    }
    m.write(&out)?;
    Ok(out)
}

pub fn cmd_evaluate(manifest_path: &Path, predictions: &Path, task: Task, output: Option<&Path>) -> Result<EvalReport> {
    let manifest = dataset::read_manifest(manifest_path)?;
    let preds = dataset::read_predictions(predictions)?;
    let report = match task {
        Task::Matching => eval::matching_report(&preds, &manifest)?,
        Task::Interpolation => eval::interpolation_report(&preds, &manifest)?,
    };
    if let Some(out) = output {
        report.write_json(out)?;
    }
    Ok(report)
}

/// Writes `<prefix>.png` and `<prefix>.csv`.
pub fn cmd_heatmap(
    manifest_path: &Path,
    predictions: &Path,
    rule: SuccessRule,
    out_prefix: &Path,
    scale: u32,
) -> Result<Heatmap> {
    let manifest = dataset::read_manifest(manifest_path)?;
    let preds = dataset::read_predictions(predictions)?;
    let scene = match load_scene(&manifest.header.scene, &manifest.root) {
        Ok(s) => Some(s),
        Err(e) => {
            log::warn!("scene unavailable, building cells not marked: {e}");
            None
        }
    };
    let map = eval::heatmap(&preds, &manifest, rule, scene.as_ref())?;
    let with_ext = |ext: &str| {
        let mut p = out_prefix.as_os_str().to_owned();
        p.push(ext);
        PathBuf::from(p)
    };
    map.write_png(with_ext(".png"), scale)?;
    map.write_csv(with_ext(".csv"))?;
    Ok(map)
}

pub fn cmd_synth_city(config: &SynthCityConfig, output: &Path) -> Result<SceneModel> {
    let scene = synth_city(config)?;
    write_mesh_to(&scene, output)?;
    Ok(scene)
}

/// Loads a manifest and checks that all referenced images exist.
pub fn cmd_check(manifest_path: &Path) -> Result<Manifest> {
    let m = dataset::read_manifest(manifest_path)?;
    dataset::check_integrity(&m)?;
    Ok(m)
}
