//! Hidden-line edge image from silhouette, crease and boundary mesh edges.

use super::zbuffer::{ZBuffer, NO_TRIANGLE};
use super::{depth_bias, Camera, EdgeImage, Mask, MIN_EDGE_PIXELS};
use crate::geom::Vec3;
use crate::scene::SceneModel;

/// Screen-space spacing between samples along an edge, pixels.
const SAMPLE_SPACING: f64 = 0.5;

pub(super) fn render_edges(
    scene: &SceneModel,
    camera: &Camera,
    zbuf: &ZBuffer,
    face: &Mask,
) -> EdgeImage {
    let (w, h) = (zbuf.width as usize, zbuf.height as usize);
    let near = camera.intrinsics.near;
    let mut mask = Mask::zeros(zbuf.width, zbuf.height);
    let mut count = 0u32;
    let mut pixels: Vec<usize> = Vec::new();

    for edge in scene.edges() {
        if !edge.is_candidate(&camera.eye) {
            continue;
        }
        let Some((a, b)) = clip_segment_near(camera.to_camera(&edge.a), camera.to_camera(&edge.b), near)
        else {
            continue;
        };
        let (sa, sb) = (camera.project(&a), camera.project(&b));
        let Some((u0, u1)) = clip_screen(sa, sb, w as f64, h as f64) else {
            continue;
        };
        let len = (sb.0 - sa.0).hypot(sb.1 - sa.1) * (u1 - u0);
        let steps = (len / SAMPLE_SPACING).ceil().max(1.0) as usize;

        let faces: Vec<u32> = edge.triangles.iter().map(|&t| scene.planar_face(t as usize)).collect();
        pixels.clear();
        for k in 0..=steps {
            let s = u0 + (u1 - u0) * k as f64 / steps as f64;
            let (px, py) = (sa.0 + s * (sb.0 - sa.0), sa.1 + s * (sb.1 - sa.1));
            if px < 0.0 || py < 0.0 || px >= w as f64 || py >= h as f64 {
                continue;
            }
            let idx = py as usize * w + px as usize;
            // screen-linear parameter to 3D parameter (perspective correct)
            let t = s * a.z / ((1.0 - s) * b.z + s * a.z);
            let range = (a + (b - a) * t).norm();
            let surface = zbuf.triangle[idx];
            let visible = range <= zbuf.depth[idx] + depth_bias(range)
                || (surface != NO_TRIANGLE && faces.contains(&scene.planar_face(surface as usize)));
            if visible && touches_face(face, idx, w, h) {
                pixels.push(idx);
            }
        }
        pixels.sort_unstable();
        pixels.dedup();
        for &idx in &pixels {
            mask.data[idx] = 1;
        }
        if pixels.len() >= MIN_EDGE_PIXELS {
            count += 1;
        }
    }
    EdgeImage {
        mask,
        visible_edge_count: count,
    }
}

/// Pixel is a facade pixel or 8-adjacent to one.
fn touches_face(face: &Mask, idx: usize, w: usize, h: usize) -> bool {
    let (row, col) = (idx / w, idx % w);
    for r in row.saturating_sub(1)..(row + 2).min(h) {
        for c in col.saturating_sub(1)..(col + 2).min(w) {
            if face.data[r * w + c] != 0 {
                return true;
            }
        }
    }
    false
}

fn clip_segment_near(a: Vec3, b: Vec3, near: f64) -> Option<(Vec3, Vec3)> {
    match (a.z >= near, b.z >= near) {
        (true, true) => Some((a, b)),
        (false, false) => None,
        (a_in, _) => {
            let t = (near - a.z) / (b.z - a.z);
            let mut p = a + (b - a) * t;
            p.z = near;
            if a_in {
                Some((a, p))
            } else {
                Some((p, b))
            }
        }
    }
}

/// Liang-Barsky clip of the screen segment to the image rectangle; returns
/// the parameter range kept.
fn clip_screen(a: (f64, f64), b: (f64, f64), w: f64, h: f64) -> Option<(f64, f64)> {
    let (dx, dy) = (b.0 - a.0, b.1 - a.1);
    let (mut u0, mut u1) = (0.0f64, 1.0f64);
    for (p, q) in [(-dx, a.0), (dx, w - a.0), (-dy, a.1), (dy, h - a.1)] {
        if p == 0.0 {
            if q < 0.0 {
                return None;
            }
        } else {
            let r = q / p;
            if p < 0.0 {
                u0 = u0.max(r);
            } else {
                u1 = u1.min(r);
            }
        }
    }
    (u0 <= u1).then_some((u0, u1))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn screen_clip() {
        assert_eq!(clip_screen((-10.0, 5.0), (30.0, 5.0), 20.0, 10.0), Some((0.25, 0.75)));
        assert_eq!(clip_screen((-10.0, -5.0), (30.0, -5.0), 20.0, 10.0), None);
    }

    #[test]
    fn near_clip_keeps_front_part() {
        let (a, b) = clip_segment_near(Vec3::new(0.0, 0.0, -1.0), Vec3::new(0.0, 0.0, 3.0), 1.0).unwrap();
        assert_eq!(a.z, 1.0);
        assert_eq!(b.z, 3.0);
    }
}
