use super::{Camera, CameraIntrinsics};
use crate::pose::Pose;
use crate::scene::SceneModel;

/// Nearest surface along the ray through pixel `(col, row)`, by brute force
/// over every triangle. Returns the distance along the ray and the triangle.
pub fn ray_cast_hit(
    scene: &SceneModel,
    pose: &Pose,
    cam: &CameraIntrinsics,
    pixel: (u32, u32),
) -> Option<(f64, u32)> {
    let camera = Camera::new(pose, cam);
    let dir = camera.pixel_ray(pixel.0, pixel.1);
    let scale = dir.norm();
    let mut best: Option<(f64, u32)> = None;
    for t in 0..scene.triangles().len() {
        let [a, b, c] = scene.triangle_corners(t);
        // Moller-Trumbore, double sided
        let e1 = b - a;
        let e2 = c - a;
        let p = dir.cross(&e2);
        let det = e1.dot(&p);
        if det == 0.0 {
            continue;
        }
        let inv = 1.0 / det;
        let s = camera.eye - a;
        let u = s.dot(&p) * inv;
        if !(0.0..=1.0).contains(&u) {
            continue;
        }
        let q = s.cross(&e1);
        let v = dir.dot(&q) * inv;
        if v < 0.0 || u + v > 1.0 {
            continue;
        }
        // dir has unit forward component, so the ray parameter is camera depth
        let depth = e2.dot(&q) * inv;
        if depth < cam.near {
            continue;
        }
        let range = depth * scale;
        if range >= cam.far {
            continue;
        }
        if best.is_none_or(|(r, _)| range < r) {
            best = Some((range, t as u32));
        }
    }
    best
}

/// Ray-cast depth for one pixel, `far` when the ray hits nothing.
pub fn ray_cast_depth(scene: &SceneModel, pose: &Pose, cam: &CameraIntrinsics, pixel: (u32, u32)) -> f64 {
    ray_cast_hit(scene, pose, cam, pixel).map_or(cam.far, |(r, _)| r)
}
