use super::*;
use crate::fixtures;
use crate::geom::Vec2;
use crate::pose::yaw_pitch_to_quat;

fn cam() -> CameraIntrinsics {
    CameraIntrinsics::default()
}

/// A wall plane at `x = d` covering the whole view from the origin.
fn wall_at(d: f64) -> SceneModel {
    SceneModel::from_boxes(&[(Vec3::new(d, -1000.0, -100.0), Vec3::new(d + 10.0, 1000.0, 1000.0))]).unwrap()
}

#[test]
fn camera_basis_matches_quaternion() {
    for (yaw, pitch) in [(0.0, 0.0), (37.0, 6.0), (250.0, 15.0)] {
        let pose = Pose::new(1.0, 2.0, yaw, pitch);
        let c = Camera::new(&pose, &cam());
        let q = yaw_pitch_to_quat(yaw, pitch);
        assert!((c.forward - q.rotate(&Vec3::x())).norm() < 1e-12);
        assert!((c.right + q.rotate(&Vec3::y())).norm() < 1e-12);
        assert!((c.up - q.rotate(&Vec3::z())).norm() < 1e-12);
    }
}

#[test]
fn focal_length() {
    let f = cam().focal();
    assert!((f - 80.0 / 30f64.to_radians().tan()).abs() < 1e-12);
}

#[test]
fn empty_scene_renders_sky() {
    let scene = SceneModel::empty();
    let t = render_triplet(&scene, &Pose::new(0.0, 0.0, 0.0, 0.0), &cam());
    assert!(t.depth.data.iter().all(|&d| d == 2000.0));
    assert_eq!(t.face.count_ones(), 0);
    assert_eq!(t.edge.mask.count_ones(), 0);
    assert_eq!(t.edge.visible_edge_count, 0);
    assert_eq!(ray_cast_depth(&scene, &t.pose, &cam(), (3, 4)), 2000.0);
}

#[test]
fn facing_wall_center_depth() {
    for d in [2.0, 7.5, 40.0] {
        let scene = wall_at(d);
        let depth = render_depth(&scene, &Pose::new(0.0, 0.0, 0.0, 0.0), &cam());
        assert!((depth.get(80, 60) as f64 - d).abs() < 1e-3, "d = {d}");
    }
}

#[test]
fn nearby_wall_fills_view() {
    let scene = wall_at(2.0);
    let face = render_faces(&scene, &Pose::new(0.0, 0.0, 0.0, 0.0), &cam());
    assert_eq!(face.count_ones(), cam().pixel_count());
}

#[test]
fn unit_box_on_axis() {
    let scene = SceneModel::from_boxes(&[(Vec3::new(4.5, -0.5, 1.2), Vec3::new(5.5, 0.5, 2.2))]).unwrap();
    let pose = Pose::new(0.0, 0.0, 0.0, 0.0);
    let d = ray_cast_depth(&scene, &pose, &cam(), (80, 60));
    assert!((d - 4.5).abs() < 1e-3, "{d}");
    let r = render_depth(&scene, &pose, &cam()).get(80, 60) as f64;
    assert!((r - d).abs() < 1e-6 * d);
}

#[test]
fn faces_equal_thresholded_depth() {
    let scene = fixtures::city_2x2();
    for pose in [Pose::new(15.0, -5.0, 90.0, 3.0), Pose::new(15.0, 15.0, 45.0, 0.0)] {
        let t = render_triplet(&scene, &pose, &cam());
        let from_depth: Vec<u8> = t.depth.data.iter().map(|&d| u8::from((d as f64) < t.depth.far)).collect();
        assert_eq!(t.face.data, from_depth);
        assert_eq!(render_faces(&scene, &pose, &cam()), t.face);
        assert_eq!(render_depth(&scene, &pose, &cam()), t.depth);
        assert_eq!(render_edges(&scene, &pose, &cam()), t.edge);
    }
}

#[test]
fn finite_depths_in_range() {
    let scene = fixtures::city_2x2();
    let t = render_triplet(&scene, &Pose::new(15.0, 15.0, 10.0, 6.0), &cam());
    for &d in &t.depth.data {
        let d = d as f64;
        assert!(d == t.depth.far || (d >= t.depth.near && d < t.depth.far));
    }
}

#[test]
fn seven_edge_box_fixture() {
    let (scene, pose) = fixtures::seven_edge_box();
    let e = render_edges(&scene, &pose, &cam());
    assert_eq!(e.visible_edge_count, 7);
}

#[test]
fn edge_pixels_touch_facades() {
    let scene = fixtures::city_2x2();
    let t = render_triplet(&scene, &Pose::new(15.0, -8.0, 80.0, 6.0), &cam());
    let (w, h) = (t.width() as i64, t.height() as i64);
    assert!(t.edge.visible_edge_count > 0);
    for row in 0..h {
        for col in 0..w {
            if t.edge.mask.get(col as u32, row as u32) == 0 {
                continue;
            }
            let near_face = (-1..=1).any(|dr| {
                (-1..=1).any(|dc| {
                    let (r, c) = (row + dr, col + dc);
                    r >= 0 && c >= 0 && r < h && c < w && t.face.get(c as u32, r as u32) == 1
                })
            });
            assert!(near_face, "edge pixel ({col}, {row}) far from any facade");
        }
    }
}

#[test]
fn building_outside_frustum_changes_nothing() {
    let scene = fixtures::city_2x2();
    let pose = Pose::new(15.0, -8.0, 80.0, 6.0);
    let before = render_triplet(&scene, &pose, &cam());
    // directly behind the camera
    let square = vec![
        Vec2::new(10.0, -40.0),
        Vec2::new(20.0, -40.0),
        Vec2::new(20.0, -30.0),
        Vec2::new(10.0, -30.0),
    ];
    let bigger = scene.with_extruded_building(&square, 15.0).unwrap();
    let after = render_triplet(&bigger, &pose, &cam());
    assert_eq!(before, after);
}

#[test]
fn deterministic_and_pure_in_parallel() {
    use rayon::prelude::*;
    let scene = fixtures::city_2x2();
    let poses: Vec<Pose> = (0..16).map(|k| Pose::new(15.0, -8.0, 40.0 + 5.0 * k as f64, 3.0)).collect();
    let serial: Vec<LeanTriplet> = poses.iter().map(|p| render_triplet(&scene, p, &cam())).collect();
    let parallel: Vec<LeanTriplet> = poses.par_iter().map(|p| render_triplet(&scene, p, &cam())).collect();
    assert_eq!(serial, parallel);
}

#[test]
fn intrinsics_validation() {
    assert!(cam().validate().is_ok());
    assert!(CameraIntrinsics { near: 0.0, ..cam() }.validate().is_err());
    assert!(CameraIntrinsics { hfov: 180.0, ..cam() }.validate().is_err());
    assert!(CameraIntrinsics { width: 0, ..cam() }.validate().is_err());
}
