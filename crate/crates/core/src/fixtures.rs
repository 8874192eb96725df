//! Small hand-built scenes with known geometry, shared by tests and examples.

use crate::geom::{Vec2, Vec3};
use crate::pose::Pose;
use crate::scene::SceneModel;

/// A 10 x 10 x 6 m box seen from the origin so that exactly two walls and
/// their roofline are in view.
///
/// Visible mesh edges: the three vertical edges (two silhouettes and the
/// crease between the walls), the two top edges of the front walls and the
/// two bottom (boundary) edges of the front walls: 7 in total.
pub fn seven_edge_box() -> (SceneModel, Pose) {
    let scene = SceneModel::from_boxes(&[(Vec3::new(20.0, 5.0, 0.0), Vec3::new(30.0, 15.0, 6.0))])
        .expect("valid box");
    (scene, Pose::new(0.0, 0.0, 22.0, 0.0))
}

/// Four 10 x 10 m buildings on a 2 x 2 grid with a 10 m street between them,
/// spanning `[0, 30] x [0, 30]`.
pub fn city_2x2() -> SceneModel {
    let heights = [12.0, 18.0, 9.0, 24.0];
    let mut boxes = Vec::new();
    for (k, h) in heights.iter().enumerate() {
        let (i, j) = ((k % 2) as f64, (k / 2) as f64);
        boxes.push((
            Vec3::new(20.0 * i, 20.0 * j, 0.0),
            Vec3::new(20.0 * i + 10.0, 20.0 * j + 10.0, *h),
        ));
    }
    SceneModel::from_boxes(&boxes).expect("valid fixture")
}

/// A wall building whose left vertical edge projects to screen column
/// `80 - covered_offset` for the default 160 x 120, 60 degree camera at the
/// origin looking along +x, so that the top row has exactly
/// `80 + covered_offset` facade pixels. Small boxes to the right add edges.
pub fn half_wall(extra_covered_columns: i32) -> (SceneModel, Pose) {
    let focal = crate::raster::CameraIntrinsics::default().focal();
    // screen column of the wall edge: 80 + f * (-y) / x, with x = 10
    let edge_y = -10.0 * extra_covered_columns as f64 / focal;
    let wall = vec![
        Vec2::new(10.0, edge_y),
        Vec2::new(1000.0, edge_y + 5.0),
        Vec2::new(1000.0, 1000.0),
        Vec2::new(10.0, 1000.0),
    ];
    let small = |x: f64, y: f64| {
        vec![
            Vec2::new(x, y),
            Vec2::new(x + 4.0, y),
            Vec2::new(x + 4.0, y + 4.0),
            Vec2::new(x, y + 4.0),
        ]
    };
    let scene = SceneModel::from_extrusions(&[
        (wall, 1000.0),
        (small(60.0, -20.0), 3.0),
        (small(60.0, -32.0), 3.0),
    ])
    .expect("valid fixture");
    (scene, Pose::new(0.0, 0.0, 0.0, 0.0))
}
