#![allow(dead_code)]

use leanloc::dataset::{
    Combo, ImageFiles, Manifest, ManifestHeader, ManifestRecord, Prediction, PredictionSet, SceneSource,
};
use leanloc::pose::{pose_to_label, Aoi, Pose};
use leanloc::raster::CameraIntrinsics;
use leanloc::sampler::{GridIndex, GridSpec, SampleRecord, Split, Validity};
use leanloc::scene::SynthCityConfig;

pub fn spec(width: f64, delta: f64) -> GridSpec {
    GridSpec::new(Aoi::new(0.0, 0.0, width, width).unwrap(), delta)
}

pub fn record(id: u64, pose: Pose, split: Split, spec: &GridSpec) -> ManifestRecord {
    ManifestRecord {
        sample: SampleRecord {
            id,
            grid: GridIndex::new(0, 0, 0, 0),
            pose,
            label: pose_to_label(&pose, &spec.aoi).unwrap(),
            validity: Validity::Valid,
            split,
            label_shuffled: false,
            visible_edges: Some(10),
        },
        files: Some(ImageFiles::for_id(id)),
    }
}

/// In-memory manifest over `spec` holding the given records, ids in order.
pub fn manifest(spec: &GridSpec, entries: &[(Pose, Split)]) -> Manifest {
    let header = ManifestHeader::new(
        SceneSource::Synth(SynthCityConfig::default()),
        *spec,
        CameraIntrinsics::default(),
        Combo::EFD,
    );
    Manifest {
        header,
        records: entries
            .iter()
            .enumerate()
            .map(|(id, (pose, split))| record(id as u64, *pose, *split, spec))
            .collect(),
        root: Default::default(),
    }
}

pub fn predict(pairs: impl IntoIterator<Item = (u64, [f64; 6])>) -> PredictionSet {
    PredictionSet::new(
        "manifest.jsonl",
        pairs.into_iter().map(|(id, label)| Prediction { id, label }).collect(),
    )
}

/// Predictions equal to each record's own label.
pub fn perfect(m: &Manifest) -> PredictionSet {
    predict(m.records.iter().map(|r| (r.sample.id, r.sample.label.to_array())))
}

pub fn label_of(pose: &Pose, spec: &GridSpec) -> [f64; 6] {
    pose_to_label(pose, &spec.aoi).unwrap().to_array()
}
