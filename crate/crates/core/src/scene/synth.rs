//! Procedural stand-in city: one extruded, flat-roofed building per block of
//! a regular street grid.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{extrude_into, Footprint, SceneModel};
use crate::error::{Error, Result};
use crate::geom::Vec2;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SynthCityConfig {
    /// Extent along x, meters. The city spans `[0, width] x [0, height]`.
    pub width: f64,
    pub height: f64,
    pub block: f64,
    pub street: f64,
    pub min_height: f64,
    pub max_height: f64,
    /// Fraction of the block side a footprint may shrink by, in `[0, 1)`.
    pub jitter: f64,
    pub seed: u64,
}

impl Default for SynthCityConfig {
    fn default() -> Self {
        SynthCityConfig {
            width: 400.0,
            height: 400.0,
            block: 40.0,
            street: 10.0,
            min_height: 8.0,
            max_height: 40.0,
            jitter: 0.25,
            seed: 7,
        }
    }
}

impl SynthCityConfig {
    pub fn validate(&self) -> Result<()> {
        let all_finite = [
            self.width,
            self.height,
            self.block,
            self.street,
            self.min_height,
            self.max_height,
            self.jitter,
        ]
        .iter()
        .all(|v| v.is_finite());
        if !all_finite {
            return Err(Error::Config("synth city parameters must be finite".into()));
        }
        if !(self.street > 0.0) {
            return Err(Error::Config("street width must be positive".into()));
        }
        if !(self.block > 0.0) {
            return Err(Error::Config("block size must be positive".into()));
        }
        if !(self.min_height > 0.0) || self.max_height < self.min_height {
            return Err(Error::Config(
                "building heights need 0 < min_height <= max_height".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.jitter) {
            return Err(Error::Config("jitter must lie in [0, 1)".into()));
        }
        if self.width < self.block || self.height < self.block {
            return Err(Error::Config(format!(
                "extent {}x{} is too small for one {} m block",
                self.width, self.height, self.block
            )));
        }
        Ok(())
    }

    /// Blocks along one axis: `floor((extent + street) / (block + street))`.
    pub fn blocks_along(&self, extent: f64) -> usize {
        ((extent + self.street) / (self.block + self.street) + 1e-9).floor() as usize
    }

    /// Lower-left corner of the first block; leftover space is split evenly
    /// between both margins.
    fn margin(&self, extent: f64) -> f64 {
        let n = self.blocks_along(extent) as f64;
        (extent - (n * self.block + (n - 1.0) * self.street)) / 2.0
    }
}

/// Deterministic for a fixed config: blocks are visited row by row and each
/// draws its footprint shrink, offset and height from one seeded stream.
pub fn synth_city(config: &SynthCityConfig) -> Result<SceneModel> {
    config.validate()?;
    let nx = config.blocks_along(config.width);
    let ny = config.blocks_along(config.height);
    let (mx, my) = (config.margin(config.width), config.margin(config.height));
    let pitch = config.block + config.street;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

    let mut vertices = Vec::with_capacity(nx * ny * 8);
    let mut triangles = Vec::with_capacity(nx * ny * 10);
    let mut footprints = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let x0 = mx + i as f64 * pitch;
            let y0 = my + j as f64 * pitch;
            let sx = config.block * (1.0 - config.jitter * rng.random::<f64>());
            let sy = config.block * (1.0 - config.jitter * rng.random::<f64>());
            let ox = (config.block - sx) * rng.random::<f64>();
            let oy = (config.block - sy) * rng.random::<f64>();
            let h = if config.max_height > config.min_height {
                rng.random_range(config.min_height..config.max_height)
            } else {
                config.min_height
            };
            let (ax, ay) = (x0 + ox, y0 + oy);
            let polygon = vec![
                Vec2::new(ax, ay),
                Vec2::new(ax + sx, ay),
                Vec2::new(ax + sx, ay + sy),
                Vec2::new(ax, ay + sy),
            ];
            let id = footprints.len() as u32;
            extrude_into(&polygon, 0.0, h, id, &mut vertices, &mut triangles);
            footprints.push(Footprint {
                polygon,
                height: h,
                building_id: id,
            });
        }
    }
    SceneModel::new(vertices, triangles, footprints)
}
