use super::{Camera, DepthMap, Mask};
use crate::geom::Vec3;
use crate::scene::SceneModel;

pub const NO_TRIANGLE: u32 = u32::MAX;

/// Nearest-surface distance and triangle per pixel.
#[derive(Debug, Clone)]
pub struct ZBuffer {
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
    /// Distance along the pixel ray; `far` for sky.
    pub depth: Vec<f64>,
    /// Index of the nearest triangle, [`NO_TRIANGLE`] for sky.
    pub triangle: Vec<u32>,
}

#[derive(Clone, Copy)]
struct ScreenVertex {
    x: f64,
    y: f64,
    /// 1 / camera-space depth
    inv_z: f64,
}

impl ZBuffer {
    pub fn render(scene: &SceneModel, camera: &Camera) -> ZBuffer {
        let intr = &camera.intrinsics;
        let (w, h) = (intr.width as usize, intr.height as usize);
        let mut zb = ZBuffer {
            width: intr.width,
            height: intr.height,
            near: intr.near,
            far: intr.far,
            depth: vec![intr.far; w * h],
            triangle: vec![NO_TRIANGLE; w * h],
        };

        // length of each pixel ray per unit of camera depth
        let mut ray_scale = vec![0.0; w * h];
        for row in 0..h {
            for col in 0..w {
                let d = camera.screen_direction(col as f64 + 0.5, row as f64 + 0.5);
                ray_scale[row * w + col] = d.norm();
            }
        }

        let cam_vertices: Vec<Vec3> = scene.vertices().iter().map(|v| camera.to_camera(v)).collect();
        // frustum side planes pass through the eye: |x| <= z * tx, |y| <= z * ty
        let tx = (w as f64 / 2.0 + 1.0) / camera.focal;
        let ty = (h as f64 / 2.0 + 1.0) / camera.focal;

        for (t, tri) in scene.triangles().iter().enumerate() {
            let c = tri.vertices.map(|i| cam_vertices[i as usize]);
            if c.iter().all(|p| p.z < intr.near)
                || c.iter().all(|p| p.x > p.z * tx)
                || c.iter().all(|p| -p.x > p.z * tx)
                || c.iter().all(|p| p.y > p.z * ty)
                || c.iter().all(|p| -p.y > p.z * ty)
            {
                continue;
            }
            let clipped = clip_near(&c, intr.near);
            if clipped.len() < 3 {
                continue;
            }
            let sv: Vec<ScreenVertex> = clipped
                .iter()
                .map(|p| {
                    let (x, y) = camera.project(p);
                    ScreenVertex { x, y, inv_z: 1.0 / p.z }
                })
                .collect();
            for k in 1..sv.len() - 1 {
                zb.fill(&ray_scale, [sv[0], sv[k], sv[k + 1]], t as u32);
            }
        }
        zb
    }

    fn fill(&mut self, ray_scale: &[f64], v: [ScreenVertex; 3], tri: u32) {
        let edge = |a: &ScreenVertex, b: &ScreenVertex, px: f64, py: f64| {
            (b.x - a.x) * (py - a.y) - (b.y - a.y) * (px - a.x)
        };
        let area = edge(&v[0], &v[1], v[2].x, v[2].y);
        if area == 0.0 || !area.is_finite() {
            return;
        }
        let (w, h) = (self.width as usize, self.height as usize);
        let min_x = v.iter().map(|p| p.x).fold(f64::INFINITY, f64::min);
        let max_x = v.iter().map(|p| p.x).fold(f64::NEG_INFINITY, f64::max);
        let min_y = v.iter().map(|p| p.y).fold(f64::INFINITY, f64::min);
        let max_y = v.iter().map(|p| p.y).fold(f64::NEG_INFINITY, f64::max);
        // pixel centers inside [min, max]
        let col0 = (min_x - 0.5).ceil().max(0.0) as usize;
        let row0 = (min_y - 0.5).ceil().max(0.0) as usize;
        let col1 = ((max_x - 0.5).floor() + 1.0).clamp(0.0, w as f64) as usize;
        let row1 = ((max_y - 0.5).floor() + 1.0).clamp(0.0, h as f64) as usize;
        if col0 >= col1 || row0 >= row1 {
            return;
        }
        let inv_area = 1.0 / area;
        for row in row0..row1 {
            let py = row as f64 + 0.5;
            for col in col0..col1 {
                let px = col as f64 + 0.5;
                let b0 = edge(&v[1], &v[2], px, py) * inv_area;
                let b1 = edge(&v[2], &v[0], px, py) * inv_area;
                let b2 = edge(&v[0], &v[1], px, py) * inv_area;
                if b0 < 0.0 || b1 < 0.0 || b2 < 0.0 {
                    continue;
                }
                let inv_z = b0 * v[0].inv_z + b1 * v[1].inv_z + b2 * v[2].inv_z;
                if !(inv_z > 0.0) {
                    continue;
                }
                let idx = row * w + col;
                let range = ray_scale[idx] / inv_z;
                if range < self.depth[idx] && range < self.far {
                    self.depth[idx] = range;
                    self.triangle[idx] = tri;
                }
            }
        }
    }

    pub fn is_sky(&self, idx: usize) -> bool {
        self.triangle[idx] == NO_TRIANGLE
    }

    pub fn depth_map(&self) -> DepthMap {
        let far32 = self.far as f32;
        DepthMap {
            width: self.width,
            height: self.height,
            near: self.near,
            far: self.far,
            data: self
                .depth
                .iter()
                .zip(&self.triangle)
                .map(|(&d, &t)| {
                    if t == NO_TRIANGLE {
                        far32
                    } else {
                        // keep surface pixels strictly below the sky sentinel
                        (d as f32).min(f32::from_bits(far32.to_bits() - 1))
                    }
                })
                .collect(),
        }
    }

    pub fn face_mask(&self) -> Mask {
        Mask {
            width: self.width,
            height: self.height,
            data: self
                .triangle
                .iter()
                .map(|&t| u8::from(t != NO_TRIANGLE))
                .collect(),
        }
    }
}

/// Clips a camera-space triangle to `z >= near`.
fn clip_near(tri: &[Vec3; 3], near: f64) -> Vec<Vec3> {
    let mut out = Vec::with_capacity(4);
    for i in 0..3 {
        let cur = tri[i];
        let prev = tri[(i + 2) % 3];
        let (ci, pi) = (cur.z >= near, prev.z >= near);
        if ci != pi {
            let t = (near - prev.z) / (cur.z - prev.z);
            let mut p = prev + (cur - prev) * t;
            p.z = near;
            out.push(p);
        }
        if ci {
            out.push(cur);
        }
    }
    out
}
