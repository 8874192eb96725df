//! Software rendering of the three lean image types.
//!
//! One z-buffer pass per pose yields the depth map, the facade mask and the
//! per-pixel nearest triangle; the edge image is drawn from candidate mesh
//! edges tested against that z-buffer. [`ray_cast_depth`] answers the same
//! depth query by brute-force ray intersection and serves as a test oracle.
//!
//! Image conventions: origin top-left, row-major, pixel `(col, row)` has its
//! center at `(col + 0.5, row + 0.5)`. Depth is the distance from the eye
//! along the pixel ray, in meters; sky pixels hold `far`.

mod edges;
mod raycast;
mod zbuffer;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::Vec3;
use crate::pose::Pose;
use crate::scene::SceneModel;

pub use raycast::{ray_cast_depth, ray_cast_hit};
pub use zbuffer::ZBuffer;

/// Edge samples count as visible when no more than this far behind the z-buffer.
pub const DEPTH_BIAS_ABS: f64 = 0.01;
pub const DEPTH_BIAS_REL: f64 = 1e-3;
/// Pixels a mesh edge needs before it counts toward the visible-edge total.
pub const MIN_EDGE_PIXELS: usize = 3;

pub fn depth_bias(depth: f64) -> f64 {
    DEPTH_BIAS_ABS.max(DEPTH_BIAS_REL * depth)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CameraIntrinsics {
    pub width: u32,
    pub height: u32,
    /// Horizontal field of view, degrees.
    pub hfov: f64,
    pub near: f64,
    pub far: f64,
}

impl Default for CameraIntrinsics {
    fn default() -> Self {
        CameraIntrinsics {
            width: 160,
            height: 120,
            hfov: 60.0,
            near: 0.1,
            far: 2000.0,
        }
    }
}

impl CameraIntrinsics {
    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::Config("image dimensions must be positive".into()));
        }
        if !(self.near > 0.0 && self.near < self.far && self.far.is_finite()) {
            return Err(Error::Config("camera clip planes need 0 < near < far".into()));
        }
        if !(self.hfov > 0.0 && self.hfov < 180.0) {
            return Err(Error::Config("horizontal field of view must lie in (0, 180)".into()));
        }
        Ok(())
    }

    /// Focal length in pixels.
    pub fn focal(&self) -> f64 {
        (self.width as f64 / 2.0) / (self.hfov.to_radians() / 2.0).tan()
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }
}

/// A posed pinhole camera. Camera-space coordinates are x right, y up,
/// z forward (depth).
#[derive(Debug, Clone)]
pub struct Camera {
    pub eye: Vec3,
    pub forward: Vec3,
    pub right: Vec3,
    pub up: Vec3,
    pub focal: f64,
    pub intrinsics: CameraIntrinsics,
}

impl Camera {
    pub fn new(pose: &Pose, intrinsics: &CameraIntrinsics) -> Self {
        let (sy, cy) = pose.yaw.to_radians().sin_cos();
        let (sp, cp) = pose.pitch.to_radians().sin_cos();
        Camera {
            eye: pose.position(),
            forward: Vec3::new(cy * cp, sy * cp, sp),
            right: Vec3::new(sy, -cy, 0.0),
            up: Vec3::new(-cy * sp, -sy * sp, cp),
            focal: intrinsics.focal(),
            intrinsics: *intrinsics,
        }
    }

    pub fn to_camera(&self, p: &Vec3) -> Vec3 {
        let d = p - self.eye;
        Vec3::new(d.dot(&self.right), d.dot(&self.up), d.dot(&self.forward))
    }

    /// Screen position of a camera-space point with `z > 0`.
    pub fn project(&self, c: &Vec3) -> (f64, f64) {
        let half_w = self.intrinsics.width as f64 / 2.0;
        let half_h = self.intrinsics.height as f64 / 2.0;
        (half_w + self.focal * c.x / c.z, half_h - self.focal * c.y / c.z)
    }

    /// Camera-space direction through a screen point, with unit depth component.
    pub fn screen_direction(&self, sx: f64, sy: f64) -> Vec3 {
        let half_w = self.intrinsics.width as f64 / 2.0;
        let half_h = self.intrinsics.height as f64 / 2.0;
        Vec3::new((sx - half_w) / self.focal, (half_h - sy) / self.focal, 1.0)
    }

    /// World-space ray direction through the center of pixel `(col, row)`,
    /// scaled so its forward component is 1.
    pub fn pixel_ray(&self, col: u32, row: u32) -> Vec3 {
        let d = self.screen_direction(col as f64 + 0.5, row as f64 + 0.5);
        self.right * d.x + self.up * d.y + self.forward
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Mask {
    pub width: u32,
    pub height: u32,
    /// 0 or 1 per pixel, row-major.
    pub data: Vec<u8>,
}

impl Mask {
    pub fn zeros(width: u32, height: u32) -> Self {
        Mask {
            width,
            height,
            data: vec![0; width as usize * height as usize],
        }
    }

    pub fn get(&self, col: u32, row: u32) -> u8 {
        self.data[row as usize * self.width as usize + col as usize]
    }

    pub fn count_ones(&self) -> usize {
        self.data.iter().filter(|&&v| v != 0).count()
    }
}

pub type FaceImage = Mask;

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeImage {
    pub mask: Mask,
    /// Mesh edges with at least [`MIN_EDGE_PIXELS`] visible pixels.
    pub visible_edge_count: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DepthMap {
    pub width: u32,
    pub height: u32,
    pub near: f64,
    pub far: f64,
    pub data: Vec<f32>,
}

impl DepthMap {
    pub fn get(&self, col: u32, row: u32) -> f32 {
        self.data[row as usize * self.width as usize + col as usize]
    }

    pub fn is_sky(&self, col: u32, row: u32) -> bool {
        self.get(col, row) as f64 >= self.far
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LeanTriplet {
    pub pose: Pose,
    pub edge: EdgeImage,
    pub face: FaceImage,
    pub depth: DepthMap,
}

impl LeanTriplet {
    pub fn width(&self) -> u32 {
        self.depth.width
    }

    pub fn height(&self) -> u32 {
        self.depth.height
    }

    /// Sky pixels in the top-most image row.
    pub fn top_row_sky(&self) -> usize {
        self.face.data[..self.face.width as usize]
            .iter()
            .filter(|&&v| v == 0)
            .count()
    }
}

pub fn render_depth(scene: &SceneModel, pose: &Pose, cam: &CameraIntrinsics) -> DepthMap {
    let camera = Camera::new(pose, cam);
    ZBuffer::render(scene, &camera).depth_map()
}

pub fn render_faces(scene: &SceneModel, pose: &Pose, cam: &CameraIntrinsics) -> FaceImage {
    let camera = Camera::new(pose, cam);
    ZBuffer::render(scene, &camera).face_mask()
}

pub fn render_edges(scene: &SceneModel, pose: &Pose, cam: &CameraIntrinsics) -> EdgeImage {
    let camera = Camera::new(pose, cam);
    let zbuf = ZBuffer::render(scene, &camera);
    let face = zbuf.face_mask();
    edges::render_edges(scene, &camera, &zbuf, &face)
}

/// All three lean images from a single z-buffer pass.
pub fn render_triplet(scene: &SceneModel, pose: &Pose, cam: &CameraIntrinsics) -> LeanTriplet {
    let camera = Camera::new(pose, cam);
    let zbuf = ZBuffer::render(scene, &camera);
    let face = zbuf.face_mask();
    let edge = edges::render_edges(scene, &camera, &zbuf, &face);
    LeanTriplet {
        pose: *pose,
        edge,
        face,
        depth: zbuf.depth_map(),
    }
}

#[cfg(test)]
mod tests;
