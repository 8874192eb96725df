//! On-disk dataset layout and the prediction file format.
//!
//! ```text
//! <root>/manifest.jsonl     header line, then one record per line
//! <root>/edge/<id>.png      8-bit gray, 0 or 255
//! <root>/face/<id>.png      8-bit gray, 0 or 255
//! <root>/depth/<id>.png     16-bit gray, round((d - near) / (far - near) * 65535)
//! ```
//!
//! Ids are zero-padded to eight digits. Invalid samples keep their manifest
//! record but have no images.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::pose::PoseLabel;
use crate::raster::{self, CameraIntrinsics, DepthMap, EdgeImage, LeanTriplet, Mask};
use crate::sampler::{self, GridSpec, SampleRecord, Split};
use crate::scene::{SynthCityConfig, CREASE_ANGLE_DEG};

pub const SCHEMA_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.jsonl";
const MANIFEST_KIND: &str = "lean_dataset";
const PREDICTIONS_KIND: &str = "predictions";

/// Which image channels a model consumes, stacked in E, F, D order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Combo {
    E,
    F,
    D,
    EF,
    EFD,
}

impl Combo {
    pub fn channels(&self) -> usize {
        match self {
            Combo::E | Combo::F | Combo::D => 1,
            Combo::EF => 2,
            Combo::EFD => 3,
        }
    }

    fn has(&self, c: char) -> bool {
        format!("{self:?}").contains(c)
    }
}

impl std::str::FromStr for Combo {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_uppercase().as_str() {
            "E" => Ok(Combo::E),
            "F" => Ok(Combo::F),
            "D" => Ok(Combo::D),
            "EF" => Ok(Combo::EF),
            "EFD" => Ok(Combo::EFD),
            _ => Err(Error::Config(format!("unknown image combination `{s}` (E, F, D, EF, EFD)"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum SceneSource {
    Mesh { path: String },
    Synth(SynthCityConfig),
}

/// Rendering and validity constants the images were produced with.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RenderSettings {
    pub crease_angle_deg: f64,
    pub depth_bias_abs: f64,
    pub depth_bias_rel: f64,
    pub min_edge_pixels: usize,
    pub min_visible_edges: u32,
    pub min_sky_fraction: f64,
}

impl Default for RenderSettings {
    fn default() -> Self {
        RenderSettings {
            crease_angle_deg: CREASE_ANGLE_DEG,
            depth_bias_abs: raster::DEPTH_BIAS_ABS,
            depth_bias_rel: raster::DEPTH_BIAS_REL,
            min_edge_pixels: raster::MIN_EDGE_PIXELS,
            min_visible_edges: sampler::MIN_VISIBLE_EDGES,
            min_sky_fraction: sampler::MIN_SKY_FRACTION,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Seeds {
    pub split: u64,
    #[serde(default)]
    pub shuffle: Option<u64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestHeader {
    pub kind: String,
    pub schema_version: u32,
    pub scene: SceneSource,
    pub grid: GridSpec,
    pub camera: CameraIntrinsics,
    pub render: RenderSettings,
    pub combo: Combo,
    pub validation_fraction: f64,
    pub seeds: Seeds,
    /// True once labels have been permuted (the memorization control).
    pub shuffled: bool,
    /// Positions in meters, angles in degrees, depth in meters along the pixel ray.
    pub units: String,
}

impl ManifestHeader {
    pub fn new(scene: SceneSource, grid: GridSpec, camera: CameraIntrinsics, combo: Combo) -> Self {
        ManifestHeader {
            kind: MANIFEST_KIND.into(),
            schema_version: SCHEMA_VERSION,
            scene,
            grid,
            camera,
            render: RenderSettings::default(),
            combo,
            validation_fraction: sampler::DEFAULT_VALIDATION_FRACTION,
            seeds: Seeds { split: 0, shuffle: None },
            shuffled: false,
            units: "meters, degrees".into(),
        }
    }
}

/// Image paths relative to the dataset root.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ImageFiles {
    pub edge: String,
    pub face: String,
    pub depth: String,
}

impl ImageFiles {
    pub fn for_id(id: u64) -> Self {
        ImageFiles {
            edge: format!("edge/{id:08}.png"),
            face: format!("face/{id:08}.png"),
            depth: format!("depth/{id:08}.png"),
        }
    }

    fn all(&self) -> [&str; 3] {
        [&self.edge, &self.face, &self.depth]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestRecord {
    #[serde(flatten)]
    pub sample: SampleRecord,
    #[serde(default)]
    pub files: Option<ImageFiles>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Manifest {
    pub header: ManifestHeader,
    pub records: Vec<ManifestRecord>,
    /// Directory image paths are resolved against.
    pub root: PathBuf,
}

impl Manifest {
    pub fn get(&self, id: u64) -> Option<&ManifestRecord> {
        // records are written in id order; fall back to a scan otherwise
        match self.records.binary_search_by_key(&id, |r| r.sample.id) {
            Ok(i) => Some(&self.records[i]),
            Err(_) => self.records.iter().find(|r| r.sample.id == id),
        }
    }

    pub fn valid_in(&self, split: Split) -> impl Iterator<Item = &ManifestRecord> {
        self.records
            .iter()
            .filter(move |r| r.sample.split == split && r.sample.validity.is_valid())
    }

    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut out = BufWriter::new(file);
        let io = |e| Error::io(path, e);
        let header = serde_json::to_string(&self.header).map_err(|e| Error::Integrity(e.to_string()))?;
        writeln!(out, "{header}").map_err(io)?;
        for r in &self.records {
            let line = serde_json::to_string(r).map_err(|e| Error::Integrity(e.to_string()))?;
            writeln!(out, "{line}").map_err(io)?;
        }
        out.flush().map_err(io)
    }
}

fn check_unique<I: IntoIterator<Item = u64>>(ids: I, what: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for id in ids {
        if !seen.insert(id) {
            return Err(Error::Integrity(format!("duplicate {what} id {id}")));
        }
    }
    Ok(())
}

/// Parses and structurally validates a manifest. Errors name the failing line.
pub fn read_manifest(path: impl AsRef<Path>) -> Result<Manifest> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.clone(),
        line,
        message,
    };
    let mut lines = BufReader::new(file).lines().enumerate();
    let header: ManifestHeader = loop {
        match lines.next() {
            None => return Err(parse_err(1, "missing manifest header".into())),
            Some((n, line)) => {
                let line = line.map_err(|e| Error::io(path, e))?;
                if line.trim().is_empty() {
                    continue;
                }
                break serde_json::from_str(&line).map_err(|e| parse_err(n + 1, e.to_string()))?;
            }
        }
    };
    if header.kind != MANIFEST_KIND {
        return Err(parse_err(1, format!("not a dataset manifest (kind `{}`)", header.kind)));
    }
    if header.schema_version != SCHEMA_VERSION {
        return Err(parse_err(1, format!("unsupported schema version {}", header.schema_version)));
    }
    header.grid.validate()?;
    header.camera.validate()?;

    let mut records = Vec::new();
    let mut seen = HashSet::new();
    for (n, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let r: ManifestRecord = serde_json::from_str(&line).map_err(|e| parse_err(n + 1, e.to_string()))?;
        if !seen.insert(r.sample.id) {
            return Err(Error::Integrity(format!("duplicate record id {} on line {}", r.sample.id, n + 1)));
        }
        if r.sample.validity.is_valid() != r.files.is_some() {
            return Err(parse_err(n + 1, "valid records need image files and invalid ones must have none".into()));
        }
        if r.sample.label.to_array().iter().any(|v| !v.is_finite()) {
            return Err(parse_err(n + 1, "non-finite label".into()));
        }
        records.push(r);
    }
    Ok(Manifest {
        header,
        records,
        root: path.parent().map(Path::to_path_buf).unwrap_or_default(),
    })
}

/// Checks that every image a manifest references exists.
pub fn check_integrity(manifest: &Manifest) -> Result<()> {
    for r in &manifest.records {
        if let Some(files) = &r.files {
            for f in files.all() {
                let p = manifest.root.join(f);
                if !p.is_file() {
                    return Err(Error::MissingFile(p));
                }
            }
        }
    }
    Ok(())
}

pub fn quantize_depth(d: f64, near: f64, far: f64) -> u16 {
    let t = ((d - near) / (far - near)).clamp(0.0, 1.0);
    (t * 65535.0).round() as u16
}

pub fn dequantize_depth(v: u16, near: f64, far: f64) -> f64 {
    near + v as f64 / 65535.0 * (far - near)
}

fn encode_png(path: &Path, width: u32, height: u32, depth: png::BitDepth, data: &[u8]) -> Result<()> {
    let image_err = |message: String| Error::Image {
        path: path.to_path_buf(),
        message,
    };
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut enc = png::Encoder::new(BufWriter::new(file), width, height);
    enc.set_color(png::ColorType::Grayscale);
    enc.set_depth(depth);
    let mut writer = enc.write_header().map_err(|e| image_err(e.to_string()))?;
    writer.write_image_data(data).map_err(|e| image_err(e.to_string()))?;
    writer.finish().map_err(|e| image_err(e.to_string()))
}

fn decode_png(path: &Path) -> Result<(u32, u32, png::BitDepth, Vec<u8>)> {
    let image_err = |message: String| Error::Image {
        path: path.to_path_buf(),
        message,
    };
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = png::Decoder::new(BufReader::new(file))
        .read_info()
        .map_err(|e| image_err(e.to_string()))?;
    let size = reader.output_buffer_size().ok_or_else(|| image_err("image too large".into()))?;
    let mut buf = vec![0; size];
    let info = reader.next_frame(&mut buf).map_err(|e| image_err(e.to_string()))?;
    if info.color_type != png::ColorType::Grayscale {
        return Err(image_err(format!("expected grayscale, found {:?}", info.color_type)));
    }
    buf.truncate(info.buffer_size());
    Ok((info.width, info.height, info.bit_depth, buf))
}

pub fn write_mask_png(path: impl AsRef<Path>, mask: &Mask) -> Result<()> {
    let data: Vec<u8> = mask.data.iter().map(|&v| if v != 0 { 255 } else { 0 }).collect();
    encode_png(path.as_ref(), mask.width, mask.height, png::BitDepth::Eight, &data)
}

pub fn read_mask_png(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let (width, height, depth, data) = decode_png(path)?;
    if depth != png::BitDepth::Eight {
        return Err(Error::Image {
            path: path.to_path_buf(),
            message: format!("expected 8-bit mask, found {depth:?}"),
        });
    }
    Ok(Mask {
        width,
        height,
        data: data.into_iter().map(|v| u8::from(v >= 128)).collect(),
    })
}

pub fn write_depth_png(path: impl AsRef<Path>, depth: &DepthMap) -> Result<()> {
    let data: Vec<u8> = depth
        .data
        .iter()
        .flat_map(|&d| quantize_depth(d as f64, depth.near, depth.far).to_be_bytes())
        .collect();
    encode_png(path.as_ref(), depth.width, depth.height, png::BitDepth::Sixteen, &data)
}

pub fn read_depth_png(path: impl AsRef<Path>, near: f64, far: f64) -> Result<DepthMap> {
    let path = path.as_ref();
    let (width, height, bits, data) = decode_png(path)?;
    if bits != png::BitDepth::Sixteen {
        return Err(Error::Image {
            path: path.to_path_buf(),
            message: format!("expected 16-bit depth, found {bits:?}"),
        });
    }
    let data = data
        .chunks_exact(2)
        .map(|b| dequantize_depth(u16::from_be_bytes([b[0], b[1]]), near, far) as f32)
        .collect();
    Ok(DepthMap {
        width,
        height,
        near,
        far,
        data,
    })
}

/// Writes images into a dataset directory; safe to share across threads.
pub struct DatasetWriter {
    root: PathBuf,
    header: ManifestHeader,
}

impl DatasetWriter {
    pub fn create(root: impl AsRef<Path>, header: ManifestHeader) -> Result<Self> {
        let root = root.as_ref().to_path_buf();
        for sub in ["edge", "face", "depth"] {
            let dir = root.join(sub);
            std::fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        }
        Ok(DatasetWriter { root, header })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write_images(&self, id: u64, triplet: &LeanTriplet) -> Result<ImageFiles> {
        let files = ImageFiles::for_id(id);
        write_mask_png(self.root.join(&files.edge), &triplet.edge.mask)?;
        write_mask_png(self.root.join(&files.face), &triplet.face)?;
        write_depth_png(self.root.join(&files.depth), &triplet.depth)?;
        Ok(files)
    }

    /// Writes the manifest with records sorted by id.
    pub fn finish(self, mut records: Vec<ManifestRecord>) -> Result<Manifest> {
        records.sort_by_key(|r| r.sample.id);
        check_unique(records.iter().map(|r| r.sample.id), "record")?;
        let manifest = Manifest {
            header: self.header,
            records,
            root: self.root,
        };
        manifest.write(manifest.root.join(MANIFEST_FILE))?;
        Ok(manifest)
    }
}

/// Writes a complete dataset from in-memory renderings; `triplets` pairs
/// with `records` and is `None` for invalid samples.
pub fn write_dataset(
    header: ManifestHeader,
    records: &[SampleRecord],
    triplets: &[Option<LeanTriplet>],
    out_dir: impl AsRef<Path>,
) -> Result<Manifest> {
    if records.len() != triplets.len() {
        return Err(Error::Integrity(format!(
            "{} records but {} renderings",
            records.len(),
            triplets.len()
        )));
    }
    let writer = DatasetWriter::create(out_dir, header)?;
    let mut out = Vec::with_capacity(records.len());
    for (r, t) in records.iter().zip(triplets) {
        let files = match (r.validity.is_valid(), t) {
            (true, Some(t)) => Some(writer.write_images(r.id, t)?),
            (true, None) => return Err(Error::Integrity(format!("valid record {} has no rendering", r.id))),
            (false, _) => None,
        };
        out.push(ManifestRecord {
            sample: r.clone(),
            files,
        });
    }
    writer.finish(out)
}

/// Loads a record's images back. Depth is quantized to 16 bits on disk.
pub fn read_triplet(manifest: &Manifest, id: u64) -> Result<LeanTriplet> {
    let r = manifest.get(id).ok_or(Error::Lookup(id))?;
    let files = r
        .files
        .as_ref()
        .ok_or_else(|| Error::Integrity(format!("record {id} has no images")))?;
    let cam = &manifest.header.camera;
    let edge = read_mask_png(manifest.root.join(&files.edge))?;
    let face = read_mask_png(manifest.root.join(&files.face))?;
    let depth = read_depth_png(manifest.root.join(&files.depth), cam.near, cam.far)?;
    Ok(LeanTriplet {
        pose: r.sample.pose,
        edge: EdgeImage {
            mask: edge,
            visible_edge_count: r.sample.visible_edges.unwrap_or(0),
        },
        face,
        depth,
    })
}

/// Planar `channels x height x width` input tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelStack {
    pub channels: usize,
    pub width: u32,
    pub height: u32,
    pub data: Vec<f32>,
}

/// Stacks the selected images in E, F, D order. Masks become 0/1, depth is
/// scaled to `[0, 1]` over `[near, far]` with sky at 1.
pub fn stack_channels(triplet: &LeanTriplet, combo: Combo) -> ChannelStack {
    let mut data = Vec::with_capacity(combo.channels() * triplet.depth.data.len());
    if combo.has('E') {
        data.extend(triplet.edge.mask.data.iter().map(|&v| v as f32));
    }
    if combo.has('F') {
        data.extend(triplet.face.data.iter().map(|&v| v as f32));
    }
    if combo.has('D') {
        let (near, far) = (triplet.depth.near, triplet.depth.far);
        data.extend(
            triplet
                .depth
                .data
                .iter()
                .map(|&d| ((d as f64 - near) / (far - near)).clamp(0.0, 1.0) as f32),
        );
    }
    ChannelStack {
        channels: combo.channels(),
        width: triplet.width(),
        height: triplet.height(),
        data,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionHeader {
    pub kind: String,
    pub schema_version: u32,
    /// Manifest the predictions refer to, as given by the producer.
    pub manifest: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub id: u64,
    /// `[x, y, q1, q2, q3, q4]` as produced by the model; the quaternion may
    /// be unnormalized.
    pub label: [f64; 6],
}

impl Prediction {
    pub fn pose_label(&self) -> PoseLabel {
        PoseLabel::from_array(self.label)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PredictionSet {
    pub header: PredictionHeader,
    pub predictions: Vec<Prediction>,
}

impl PredictionSet {
    pub fn new(manifest: impl Into<String>, predictions: Vec<Prediction>) -> Self {
        PredictionSet {
            header: PredictionHeader {
                kind: PREDICTIONS_KIND.into(),
                schema_version: SCHEMA_VERSION,
                manifest: manifest.into(),
            },
            predictions,
        }
    }

    /// Every prediction must refer to a record of `manifest`.
    pub fn check_against(&self, manifest: &Manifest) -> Result<()> {
        for p in &self.predictions {
            if manifest.get(p.id).is_none() {
                return Err(Error::Integrity(format!("prediction for unknown record id {}", p.id)));
            }
        }
        Ok(())
    }
}

pub fn write_predictions(set: &PredictionSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let io = |e| Error::io(path, e);
    let mut out = BufWriter::new(File::create(path).map_err(io)?);
    let json = |v: serde_json::Result<String>| v.map_err(|e| Error::Integrity(e.to_string()));
    writeln!(out, "{}", json(serde_json::to_string(&set.header))?).map_err(io)?;
    for p in &set.predictions {
        writeln!(out, "{}", json(serde_json::to_string(p))?).map_err(io)?;
    }
    out.flush().map_err(io)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<PredictionSet> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let origin = path.display().to_string();
    let parse_err = |line: usize, message: String| Error::Parse {
        path: origin.clone(),
        line,
        message,
    };
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let (n, first) = lines.next().ok_or_else(|| parse_err(1, "missing prediction header".into()))?;
    let header: PredictionHeader = serde_json::from_str(first).map_err(|e| parse_err(n + 1, e.to_string()))?;
    if header.kind != PREDICTIONS_KIND || header.schema_version != SCHEMA_VERSION {
        return Err(parse_err(n + 1, "not a supported prediction file".into()));
    }
    let mut predictions = Vec::new();
    for (n, line) in lines {
        let p: Prediction = serde_json::from_str(line).map_err(|e| parse_err(n + 1, e.to_string()))?;
        if p.label.iter().any(|v| !v.is_finite()) {
            return Err(parse_err(n + 1, "non-finite prediction".into()));
        }
        predictions.push(p);
    }
    check_unique(predictions.iter().map(|p| p.id), "prediction")?;
    Ok(PredictionSet { header, predictions })
}
