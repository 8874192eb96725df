mod common;

use common::{label_of, manifest, predict, spec};
use leanloc::eval::{
    self, cube_of, grid_distance, heatmap, interpolation_report, l2_report, manhattan_cell_distance, matching_report,
    rank_of_truth, Dims, SuccessRule, Task, TaskTag,
};
use leanloc::geom::Vec3;
use leanloc::pose::Pose;
use leanloc::sampler::{GridIndex, Split};
use leanloc::scene::SceneModel;
use leanloc::Error;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn p(x: f64, y: f64, yaw: f64, pitch: f64) -> Pose {
    Pose::new(x, y, yaw, pitch)
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() < 1e-9
}

#[test]
fn spec_distance_examples() {
    let s = spec(100.0, 20.0);
    assert_eq!(grid_distance(&p(5.0, 5.0, 10.0, 3.0), &p(5.0, 5.0, 10.0, 3.0), &s), 0.0);
    assert!(close(grid_distance(&p(0.0, 0.0, 0.0, 0.0), &p(20.0, 0.0, 0.0, 0.0), &s), 1.0));
    assert!(close(grid_distance(&p(0.0, 0.0, 358.0, 0.0), &p(0.0, 0.0, 2.0, 0.0), &s), 0.8));
}

#[test]
fn spec_cube_examples() {
    let s = spec(400.0, 20.0);
    assert_eq!(cube_of(&p(0.0, 0.0, 0.0, 0.0), &s).index, GridIndex::new(0, 0, 0, 0));
    assert_eq!(cube_of(&p(10.0, 10.0, 2.5, 1.5), &s).index, GridIndex::new(0, 0, 0, 0));
    assert_eq!(cube_of(&p(10.0, 10.0, 359.0, 1.5), &s).index.k, 71);
    let a = GridIndex::new(3, 4, 10, 1);
    let b = GridIndex::new(4, 5, 10, 3);
    assert_eq!(manhattan_cell_distance(&a, &b, &s, Dims::Two), 2);
    assert_eq!(manhattan_cell_distance(&a, &b, &s, Dims::Four), 4);
    let w = GridIndex::new(0, 0, 71, 0);
    assert_eq!(manhattan_cell_distance(&w, &GridIndex::new(0, 0, 0, 0), &s, Dims::Four), 1);
}

/// Five training poses on a 128 m area with delta 16, so labels are exact
/// binary fractions and the midway tie survives the label round trip.
/// Hand ranks 1, 1, 2, 3, 5.
#[test]
fn five_sample_matching_fixture() {
    let s = spec(128.0, 16.0);
    let poses = [
        p(0.0, 0.0, 0.0, 0.0),
        p(16.0, 0.0, 0.0, 0.0),
        p(32.0, 0.0, 0.0, 0.0),
        p(0.0, 16.0, 0.0, 0.0),
        p(0.0, 0.0, 10.0, 0.0),
    ];
    let m = manifest(&s, &poses.map(|q| (q, Split::Train)));
    let guesses = [
        p(0.0, 0.0, 0.0, 0.0),
        p(24.0, 0.0, 0.0, 0.0),
        p(24.0, 0.0, 0.0, 0.0),
        p(0.0, 0.0, 0.0, 0.0),
        p(32.0, 0.0, 0.0, 0.0),
    ];
    let candidates: Vec<(u64, Pose)> = poses.iter().enumerate().map(|(i, q)| (i as u64, *q)).collect();
    let ranks: Vec<usize> = guesses
        .iter()
        .enumerate()
        .map(|(i, g)| rank_of_truth(g, i as u64, &candidates, &s).unwrap())
        .collect();
    assert_eq!(ranks, vec![1, 1, 2, 3, 5]);

    let preds = predict(guesses.iter().enumerate().map(|(i, g)| (i as u64, label_of(g, &s))));
    let r = matching_report(&preds, &m).unwrap();
    assert_eq!(r.tag, TaskTag::A);
    assert_eq!(r.samples, 5);
    let nn = r.matching.unwrap();
    assert!(close(nn.nn1, 0.4) && close(nn.nn3, 0.8));
    assert!(r.interpolation.is_none());

    // position errors 0, 8, 8, 16, 32 m; orientation errors 0, 0, 0, 0, 10 degrees
    let l2 = l2_report(&preds, &m, Task::Matching).unwrap();
    assert!(close(l2.position_mean, 12.8) && close(l2.position_median, 8.0));
    assert!((l2.orientation_mean - 2.0).abs() < 1e-6 && l2.orientation_median.abs() < 1e-6);
}

/// Four midpoint test samples with known cell offsets.
#[test]
fn four_sample_interpolation_fixture() {
    let s = spec(100.0, 20.0);
    let truths = [
        p(10.0, 10.0, 2.5, 1.5),
        p(10.0, 10.0, 2.5, 1.5),
        p(50.0, 50.0, 2.5, 1.5),
        p(90.0, 90.0, 357.5, 13.5),
    ];
    let guesses = [
        p(10.0, 10.0, 2.5, 1.5),     // same cube
        p(30.0, 30.0, 2.5, 1.5),     // 2D 2, 4D 2
        p(50.0, 50.0, 17.5, 7.5),    // 2D 0, 4D 5
        p(90.0, 90.0, 2.5, 13.5),    // 2D 0, 4D 1 through the yaw wrap
    ];
    let m = manifest(&s, &truths.map(|q| (q, Split::Test)));
    let preds = predict(guesses.iter().enumerate().map(|(i, g)| (i as u64, label_of(g, &s))));
    let r = interpolation_report(&preds, &m).unwrap();
    assert_eq!(r.tag, TaskTag::C);
    let d = r.interpolation.unwrap();
    assert!(close(d.d1_2d, 0.75) && close(d.d3_2d, 1.0));
    assert!(close(d.d1_4d, 0.25) && close(d.d3_4d, 0.75));
}

#[test]
fn single_offset_l2() {
    let s = spec(100.0, 20.0);
    let truth = p(40.0, 40.0, 30.0, 6.0);
    let m = manifest(&s, &[(truth, Split::Test)]);
    let preds = predict([(0, label_of(&p(43.0, 40.0, 30.0, 6.0), &s))]);
    let l2 = l2_report(&preds, &m, Task::Interpolation).unwrap();
    assert!(close(l2.position_mean, 3.0) && close(l2.position_median, 3.0));
    assert!(l2.orientation_mean.abs() < 1e-6 && l2.orientation_median.abs() < 1e-6);
}

#[test]
fn heatmap_rates_and_flags() {
    let s = spec(100.0, 20.0);
    let truths: Vec<Pose> = (0..4).map(|k| p(10.0, 10.0, 2.5 + 5.0 * k as f64, 1.5)).collect();
    let mut guesses = truths.clone();
    guesses[2].yaw += 5.0;
    let m = manifest(&s, &truths.iter().map(|q| (*q, Split::Test)).collect::<Vec<_>>());
    let preds = predict(guesses.iter().enumerate().map(|(i, g)| (i as u64, label_of(g, &s))));
    let scene = SceneModel::from_boxes(&[(Vec3::new(45.0, 45.0, 0.0), Vec3::new(55.0, 55.0, 10.0))]).unwrap();
    let map = heatmap(&preds, &m, SuccessRule::default(), Some(&scene)).unwrap();
    assert_eq!((map.cols, map.rows), (5, 5));
    assert_eq!(map.cell(0, 0).rate(), Some(0.75));
    assert_eq!(map.cell(1, 0).rate(), None);
    assert!(map.cell(2, 2).building);
    assert_eq!(map.cells.iter().filter(|c| c.building).count(), 1);

    let exact = heatmap(&common::perfect(&m), &m, SuccessRule::D1FourD, None).unwrap();
    assert!(exact.cells.iter().all(|c| c.rate().is_none_or(|r| r == 1.0)));

    let csv = map.to_csv();
    assert!(csv.lines().any(|l| l == "0,0,4,3,0.75,0"));
    assert!(csv.lines().any(|l| l == "1,0,0,0,,0"));
}

#[test]
fn coverage_and_unknown_ids() {
    let s = spec(100.0, 20.0);
    let m = manifest(&s, &[(p(0.0, 0.0, 0.0, 0.0), Split::Train), (p(20.0, 0.0, 0.0, 0.0), Split::Train)]);
    let partial = predict([(0, label_of(&p(0.0, 0.0, 0.0, 0.0), &s))]);
    match matching_report(&partial, &m) {
        Err(Error::Coverage { missing }) => assert_eq!(missing, vec![1]),
        other => panic!("expected coverage error, got {other:?}"),
    }
    assert_eq!(eval::missing_predictions(&partial, &m, Task::Matching), vec![1]);
    let stray = predict([(0, [0.0, 0.0, 1.0, 0.0, 0.0, 0.0]), (1, [0.0; 6]), (7, [0.0; 6])]);
    assert!(matches!(matching_report(&stray, &m), Err(Error::Integrity(_))));
}

#[test]
fn shuffled_manifest_is_task_b() {
    let s = spec(100.0, 20.0);
    let mut m = manifest(&s, &[(p(0.0, 0.0, 0.0, 0.0), Split::Train)]);
    m.header.shuffled = true;
    let r = matching_report(&common::perfect(&m), &m).unwrap();
    assert_eq!(r.tag, TaskTag::B);
}

/// With each prediction copied from a uniformly drawn training record, the
/// expected 1nn fraction is 1/N.
#[test]
fn random_labels_give_chance_1nn() {
    let s = spec(100.0, 20.0);
    let poses: Vec<(Pose, Split)> = leanloc::sampler::enumerate_grid(&s)
        .into_iter()
        .step_by(13)
        .take(200)
        .map(|(_, q)| (q, Split::Train))
        .collect();
    let m = manifest(&s, &poses);
    let n = m.records.len();
    let seeds = 50;
    let mut hits = 0.0;
    for seed in 0..seeds {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let preds = predict(
            m.records
                .iter()
                .map(|r| (r.sample.id, m.records[rng.random_range(0..n)].sample.label.to_array())),
        );
        hits += matching_report(&preds, &m).unwrap().matching.unwrap().nn1 * n as f64;
    }
    let trials = (seeds as usize * n) as f64;
    let p1 = 1.0 / n as f64;
    let sigma = (trials * p1 * (1.0 - p1)).sqrt();
    assert!((hits - trials * p1).abs() <= 3.0 * sigma, "{hits} hits vs {}", trials * p1);
}

#[test]
fn reports_are_permutation_invariant() {
    let s = spec(100.0, 20.0);
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let entries: Vec<(Pose, Split)> = (0..60)
        .map(|n| {
            let split = if n % 3 == 0 { Split::Test } else { Split::Train };
            (p(rng.random_range(0.0..100.0), rng.random_range(0.0..100.0), rng.random_range(0.0..360.0), rng.random_range(0.0..15.0)), split)
        })
        .collect();
    let m = manifest(&s, &entries);
    let preds = predict(m.records.iter().map(|r| {
        let mut l = r.sample.label.to_array();
        l[0] += rng.random_range(-0.1..0.1);
        l[3] += rng.random_range(-0.2..0.2);
        (r.sample.id, l)
    }));
    let mut m_rev = m.clone();
    m_rev.records.reverse();
    let mut p_rev = preds.clone();
    p_rev.predictions.reverse();
    for task in [Task::Matching, Task::Interpolation] {
        let a = leanloc::eval::evaluate_samples(&preds, &m, task).unwrap();
        let b = leanloc::eval::evaluate_samples(&p_rev, &m_rev, task).unwrap();
        assert_eq!(a, b);
    }
    assert_eq!(matching_report(&preds, &m).unwrap(), matching_report(&p_rev, &m_rev).unwrap());
    assert_eq!(interpolation_report(&preds, &m).unwrap(), interpolation_report(&p_rev, &m_rev).unwrap());
}

proptest! {
    #[test]
    fn manhattan_is_a_metric(
        a in (0u32..20, 0u32..20, 0u32..72, 0u32..5),
        b in (0u32..20, 0u32..20, 0u32..72, 0u32..5),
        c in (0u32..20, 0u32..20, 0u32..72, 0u32..5),
    ) {
        let s = spec(400.0, 20.0);
        let (a, b, c) = (
            GridIndex::new(a.0, a.1, a.2, a.3),
            GridIndex::new(b.0, b.1, b.2, b.3),
            GridIndex::new(c.0, c.1, c.2, c.3),
        );
        for dims in [Dims::Two, Dims::Four] {
            let d = |x: &GridIndex, y: &GridIndex| manhattan_cell_distance(x, y, &s, dims);
            prop_assert_eq!(d(&a, &a), 0);
            prop_assert_eq!(d(&a, &b), d(&b, &a));
            prop_assert!(d(&a, &c) <= d(&a, &b) + d(&b, &c));
            if dims == Dims::Four && d(&a, &b) == 0 {
                prop_assert_eq!(a, b);
            }
        }
        prop_assert!(manhattan_cell_distance(&a, &b, &s, Dims::Two) <= manhattan_cell_distance(&a, &b, &s, Dims::Four));
    }
}
