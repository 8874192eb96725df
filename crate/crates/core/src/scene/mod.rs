//! Untextured city model: building walls and roofs as a triangle mesh plus
//! the 2D footprint of every building.
//!
//! A [`SceneModel`] is immutable once built. Construction validates the model
//! invariants and precomputes the edge topology the edge renderer needs
//! (adjacency, crease flags and planar face groups), so a scene can be shared
//! read-only across any number of render workers.

mod mesh_io;
mod synth;

use std::collections::HashMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{self, Vec2, Vec3};

pub use mesh_io::{load_mesh, parse_mesh, write_mesh, write_mesh_to};
pub use synth::{synth_city, SynthCityConfig};

/// Mesh edges whose adjacent faces meet at more than this angle are creases.
pub const CREASE_ANGLE_DEG: f64 = 30.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SurfaceKind {
    Wall,
    Roof,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Triangle {
    pub vertices: [u32; 3],
    pub building: u32,
    pub kind: SurfaceKind,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Footprint {
    /// Counter-clockwise outline, not repeating the first vertex.
    pub polygon: Vec<Vec2>,
    pub height: f64,
    pub building_id: u32,
}

impl Footprint {
    pub fn centroid(&self) -> Vec2 {
        geom::centroid(&self.polygon)
    }

    pub fn contains_strictly(&self, p: &Vec2) -> bool {
        geom::point_strictly_inside(p, &self.polygon)
    }

    fn bbox(&self) -> Bounds2 {
        Bounds2::from_points(self.polygon.iter().copied())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Bounds2 {
    pub min: Vec2,
    pub max: Vec2,
}

impl Bounds2 {
    fn from_points(points: impl Iterator<Item = Vec2>) -> Self {
        let mut b = Bounds2 {
            min: Vec2::repeat(f64::INFINITY),
            max: Vec2::repeat(f64::NEG_INFINITY),
        };
        for p in points {
            b.min = b.min.inf(&p);
            b.max = b.max.sup(&p);
        }
        if b.min.x > b.max.x {
            b.min = Vec2::zeros();
            b.max = Vec2::zeros();
        }
        b
    }

    pub fn contains(&self, p: &Vec2) -> bool {
        p.x >= self.min.x && p.x <= self.max.x && p.y >= self.min.y && p.y <= self.max.y
    }

    pub fn width(&self) -> f64 {
        self.max.x - self.min.x
    }

    pub fn height(&self) -> f64 {
        self.max.y - self.min.y
    }
}

/// A unique (welded) mesh edge with the triangles that share it.
#[derive(Debug, Clone)]
pub struct MeshEdge {
    pub a: Vec3,
    pub b: Vec3,
    /// Adjacent triangles.
    pub triangles: Vec<u32>,
    /// Normals of the adjacent triangles, re-oriented so that a consistently
    /// wound neighbour pair has agreeing normals.
    pub normals: Vec<Vec3>,
    /// Dihedral angle beyond [`CREASE_ANGLE_DEG`].
    pub crease: bool,
    /// One adjacent triangle, or more than two.
    pub boundary: bool,
}

impl MeshEdge {
    /// True when the adjacent faces disagree on facing the viewpoint.
    pub fn is_silhouette(&self, eye: &Vec3) -> bool {
        if self.normals.len() != 2 {
            return false;
        }
        let to_eye = eye - self.a;
        let f0 = self.normals[0].dot(&to_eye) > 0.0;
        let f1 = self.normals[1].dot(&to_eye) > 0.0;
        f0 != f1
    }

    /// Whether the edge is drawn from viewpoint `eye`.
    pub fn is_candidate(&self, eye: &Vec3) -> bool {
        self.boundary || self.crease || self.is_silhouette(eye)
    }
}

#[derive(Debug, Clone, Default)]
struct Topology {
    normals: Vec<Vec3>,
    planar_face: Vec<u32>,
    edges: Vec<MeshEdge>,
}

#[derive(Debug, Clone)]
pub struct SceneModel {
    vertices: Vec<Vec3>,
    triangles: Vec<Triangle>,
    footprints: Vec<Footprint>,
    bounds: Bounds2,
    footprint_boxes: Vec<Bounds2>,
    topology: Topology,
}

impl SceneModel {
    /// Builds a scene after checking every model invariant.
    pub fn new(
        vertices: Vec<Vec3>,
        triangles: Vec<Triangle>,
        footprints: Vec<Footprint>,
    ) -> Result<Self> {
        let nv = vertices.len();
        for (t, tri) in triangles.iter().enumerate() {
            if let Some(v) = tri.vertices.iter().find(|&&v| v as usize >= nv) {
                return Err(Error::InvalidScene(format!(
                    "triangle {t} references vertex {v} but only {nv} vertices exist"
                )));
            }
        }
        let mut ids = HashMap::new();
        for (i, fp) in footprints.iter().enumerate() {
            if ids.insert(fp.building_id, i).is_some() {
                return Err(Error::InvalidScene(format!(
                    "duplicate footprint for building {}",
                    fp.building_id
                )));
            }
            if !(fp.height > 0.0) {
                return Err(Error::InvalidScene(format!(
                    "building {} has non-positive height {}",
                    fp.building_id, fp.height
                )));
            }
            if !geom::is_simple(&fp.polygon) {
                return Err(Error::InvalidScene(format!(
                    "footprint of building {} is not a simple polygon",
                    fp.building_id
                )));
            }
        }
        if let Some((t, tri)) = triangles
            .iter()
            .enumerate()
            .find(|(_, tri)| !ids.contains_key(&tri.building))
        {
            return Err(Error::InvalidScene(format!(
                "triangle {t} references unknown building {}",
                tri.building
            )));
        }

        let bounds = Bounds2::from_points(vertices.iter().map(|v| v.xy()));
        let footprint_boxes = footprints.iter().map(Footprint::bbox).collect();
        let topology = Topology::build(&vertices, &triangles);
        Ok(SceneModel {
            vertices,
            triangles,
            footprints,
            bounds,
            footprint_boxes,
            topology,
        })
    }

    pub fn empty() -> Self {
        SceneModel::new(Vec::new(), Vec::new(), Vec::new()).expect("empty scene is valid")
    }

    pub fn vertices(&self) -> &[Vec3] {
        &self.vertices
    }

    pub fn triangles(&self) -> &[Triangle] {
        &self.triangles
    }

    pub fn footprints(&self) -> &[Footprint] {
        &self.footprints
    }

    pub fn bounds(&self) -> Bounds2 {
        self.bounds
    }

    pub fn footprint(&self, building_id: u32) -> Option<&Footprint> {
        self.footprints.iter().find(|f| f.building_id == building_id)
    }

    pub fn triangle_corners(&self, t: usize) -> [Vec3; 3] {
        let [a, b, c] = self.triangles[t].vertices;
        [
            self.vertices[a as usize],
            self.vertices[b as usize],
            self.vertices[c as usize],
        ]
    }

    /// Unit normal of triangle `t` following its winding (zero when degenerate).
    pub fn triangle_normal(&self, t: usize) -> Vec3 {
        self.topology.normals[t]
    }

    /// Id of the planar polygon (coplanar, edge-connected triangle group) that `t` belongs to.
    pub fn planar_face(&self, t: usize) -> u32 {
        self.topology.planar_face[t]
    }

    pub fn edges(&self) -> &[MeshEdge] {
        &self.topology.edges
    }

    /// True iff `point` is strictly inside some footprint; footprint boundaries count as outside.
    pub fn is_inside_building(&self, point: Vec2) -> bool {
        self.footprints
            .iter()
            .zip(&self.footprint_boxes)
            .any(|(fp, bb)| bb.contains(&point) && fp.contains_strictly(&point))
    }

    /// Returns a copy of this scene with one extra building extruded from `polygon`.
    pub fn with_extruded_building(&self, polygon: &[Vec2], height: f64) -> Result<SceneModel> {
        let id = self
            .footprints
            .iter()
            .map(|f| f.building_id + 1)
            .max()
            .unwrap_or(0);
        let mut vertices = self.vertices.clone();
        let mut triangles = self.triangles.clone();
        let mut footprints = self.footprints.clone();
        let polygon = ccw(polygon);
        extrude_into(&polygon, 0.0, height, id, &mut vertices, &mut triangles);
        footprints.push(Footprint {
            polygon,
            height,
            building_id: id,
        });
        SceneModel::new(vertices, triangles, footprints)
    }

    /// Builds a scene of axis-aligned boxes given as `(min, max)` corners.
    pub fn from_boxes(boxes: &[(Vec3, Vec3)]) -> Result<SceneModel> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut footprints = Vec::new();
        for (id, (lo, hi)) in boxes.iter().enumerate() {
            let polygon = vec![
                Vec2::new(lo.x, lo.y),
                Vec2::new(hi.x, lo.y),
                Vec2::new(hi.x, hi.y),
                Vec2::new(lo.x, hi.y),
            ];
            extrude_into(&polygon, lo.z, hi.z, id as u32, &mut vertices, &mut triangles);
            footprints.push(Footprint {
                polygon,
                height: hi.z - lo.z,
                building_id: id as u32,
            });
        }
        SceneModel::new(vertices, triangles, footprints)
    }

    /// Builds a scene of vertically extruded footprints with flat roofs.
    pub fn from_extrusions(buildings: &[(Vec<Vec2>, f64)]) -> Result<SceneModel> {
        let mut vertices = Vec::new();
        let mut triangles = Vec::new();
        let mut footprints = Vec::new();
        for (id, (polygon, height)) in buildings.iter().enumerate() {
            let polygon = ccw(polygon);
            extrude_into(&polygon, 0.0, *height, id as u32, &mut vertices, &mut triangles);
            footprints.push(Footprint {
                polygon,
                height: *height,
                building_id: id as u32,
            });
        }
        SceneModel::new(vertices, triangles, footprints)
    }
}

fn ccw(polygon: &[Vec2]) -> Vec<Vec2> {
    let mut p = polygon.to_vec();
    if geom::signed_area(&p) < 0.0 {
        p.reverse();
    }
    p
}

/// Appends walls and a fan-triangulated roof for a counter-clockwise footprint.
/// The roof fan is only correct for convex outlines.
pub(crate) fn extrude_into(
    polygon: &[Vec2],
    bottom_z: f64,
    top_z: f64,
    building: u32,
    vertices: &mut Vec<Vec3>,
    triangles: &mut Vec<Triangle>,
) {
    let n = polygon.len() as u32;
    let base = vertices.len() as u32;
    vertices.extend(polygon.iter().map(|p| Vec3::new(p.x, p.y, bottom_z)));
    vertices.extend(polygon.iter().map(|p| Vec3::new(p.x, p.y, top_z)));
    let bottom = |i: u32| base + (i % n);
    let top = |i: u32| base + n + (i % n);
    for i in 0..n {
        for vertices in [
            [bottom(i), bottom(i + 1), top(i + 1)],
            [bottom(i), top(i + 1), top(i)],
        ] {
            triangles.push(Triangle {
                vertices,
                building,
                kind: SurfaceKind::Wall,
            });
        }
    }
    for i in 1..n.saturating_sub(1) {
        triangles.push(Triangle {
            vertices: [top(0), top(i), top(i + 1)],
            building,
            kind: SurfaceKind::Roof,
        });
    }
}

fn weld_key(v: &Vec3) -> [u64; 3] {
    // +0.0 so that -0.0 and 0.0 weld together
    [(v.x + 0.0).to_bits(), (v.y + 0.0).to_bits(), (v.z + 0.0).to_bits()]
}

struct DisjointSet(Vec<u32>);

impl DisjointSet {
    fn find(&mut self, mut x: u32) -> u32 {
        while self.0[x as usize] != x {
            let parent = self.0[x as usize];
            self.0[x as usize] = self.0[parent as usize];
            x = parent;
        }
        x
    }

    fn union(&mut self, a: u32, b: u32) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
            self.0[hi as usize] = lo;
        }
    }
}

impl Topology {
    fn build(vertices: &[Vec3], triangles: &[Triangle]) -> Self {
        let mut weld: HashMap<[u64; 3], u32> = HashMap::new();
        let welded: Vec<u32> = vertices
            .iter()
            .map(|v| {
                let next = weld.len() as u32;
                *weld.entry(weld_key(v)).or_insert(next)
            })
            .collect();

        let normals: Vec<Vec3> = triangles
            .iter()
            .map(|t| {
                let [a, b, c] = t.vertices.map(|i| vertices[i as usize]);
                let n = (b - a).cross(&(c - a));
                let len = n.norm();
                if len > 0.0 {
                    n / len
                } else {
                    Vec3::zeros()
                }
            })
            .collect();

        // edge key -> (first-seen order, [(triangle, traversed low->high)])
        let mut adjacency: HashMap<(u32, u32), Vec<(u32, bool)>> = HashMap::new();
        let mut order: Vec<(u32, u32)> = Vec::new();
        for (t, tri) in triangles.iter().enumerate() {
            if normals[t] == Vec3::zeros() {
                continue;
            }
            for e in 0..3 {
                let (p, q) = (welded[tri.vertices[e] as usize], welded[tri.vertices[(e + 1) % 3] as usize]);
                if p == q {
                    continue;
                }
                let key = (p.min(q), p.max(q));
                let entry = adjacency.entry(key).or_insert_with(|| {
                    order.push(key);
                    Vec::new()
                });
                entry.push((t as u32, p < q));
            }
        }

        let mut representative = vec![0u32; weld.len()];
        for (i, &w) in welded.iter().enumerate().rev() {
            representative[w as usize] = i as u32;
        }

        let cos_crease = CREASE_ANGLE_DEG.to_radians().cos();
        let mut faces = DisjointSet((0..triangles.len() as u32).collect());
        let mut edges = Vec::with_capacity(order.len());
        for key in order {
            let adj = &adjacency[&key];
            let first_dir = adj[0].1;
            let edge_normals: Vec<Vec3> = adj
                .iter()
                .map(|&(t, dir)| {
                    // consistently wound neighbours traverse a shared edge in opposite directions
                    if dir == first_dir && t != adj[0].0 {
                        -normals[t as usize]
                    } else {
                        normals[t as usize]
                    }
                })
                .collect();
            let boundary = adj.len() != 2;
            let crease = adj.len() == 2 && edge_normals[0].dot(&edge_normals[1]) < cos_crease;
            if adj.len() == 2 {
                let (t0, t1) = (adj[0].0, adj[1].0);
                let same_building = triangles[t0 as usize].building == triangles[t1 as usize].building;
                if same_building && edge_normals[0].dot(&edge_normals[1]) > 1.0 - 1e-9 {
                    faces.union(t0, t1);
                }
            }
            edges.push(MeshEdge {
                a: vertices[representative[key.0 as usize] as usize],
                b: vertices[representative[key.1 as usize] as usize],
                triangles: adj.iter().map(|&(t, _)| t).collect(),
                normals: edge_normals,
                crease,
                boundary,
            });
        }
        let planar_face = (0..triangles.len() as u32).map(|t| faces.find(t)).collect();
        Topology {
            normals,
            planar_face,
            edges,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) fn unit_box_scene() -> SceneModel {
        let square = vec![
            Vec2::new(0.0, 0.0),
            Vec2::new(1.0, 0.0),
            Vec2::new(1.0, 1.0),
            Vec2::new(0.0, 1.0),
        ];
        SceneModel::from_extrusions(&[(square, 2.0)]).unwrap()
    }

    #[test]
    fn box_topology() {
        let scene = unit_box_scene();
        // 4 bottom + 4 vertical + 4 wall diagonals + 4 top + 1 roof diagonal
        assert_eq!(scene.edges().len(), 17);
        let boundary = scene.edges().iter().filter(|e| e.boundary).count();
        let crease = scene.edges().iter().filter(|e| e.crease).count();
        assert_eq!(boundary, 4);
        assert_eq!(crease, 8);
        // 4 walls + 1 roof
        let mut faces: Vec<u32> = (0..scene.triangles().len()).map(|t| scene.planar_face(t)).collect();
        faces.sort();
        faces.dedup();
        assert_eq!(faces.len(), 5);
    }

    #[test]
    fn outward_normals() {
        let scene = unit_box_scene();
        let center = Vec3::new(0.5, 0.5, 1.0);
        for t in 0..scene.triangles().len() {
            let [a, _, _] = scene.triangle_corners(t);
            assert!(scene.triangle_normal(t).dot(&(a - center)) > 0.0);
        }
    }

    #[test]
    fn inside_building_queries() {
        let scene = unit_box_scene();
        assert!(scene.is_inside_building(Vec2::new(0.5, 0.5)));
        assert!(!scene.is_inside_building(Vec2::new(1.0, 0.5)));
        assert!(!scene.is_inside_building(Vec2::new(3.0, 0.5)));
    }

    #[test]
    fn rejects_bad_references() {
        let v = vec![Vec3::zeros(); 3];
        let tri = Triangle {
            vertices: [0, 1, 3],
            building: 0,
            kind: SurfaceKind::Wall,
        };
        assert!(matches!(
            SceneModel::new(v.clone(), vec![tri], vec![]),
            Err(Error::InvalidScene(_))
        ));
        let tri = Triangle {
            vertices: [0, 1, 2],
            building: 5,
            kind: SurfaceKind::Wall,
        };
        assert!(SceneModel::new(v, vec![tri], vec![]).is_err());
    }

    #[test]
    fn silhouette_depends_on_viewpoint() {
        let scene = unit_box_scene();
        let eye = Vec3::new(-5.0, -3.0, 1.0);
        // the vertical edge at (0, 0) separates the two walls facing the eye
        let front_corner = scene
            .edges()
            .iter()
            .find(|e| e.a.xy() == Vec2::zeros() && e.b.xy() == Vec2::zeros())
            .unwrap();
        assert!(!front_corner.is_silhouette(&eye));
        assert!(front_corner.crease);
        let side = scene
            .edges()
            .iter()
            .find(|e| e.a.xy() == Vec2::new(1.0, 0.0) && e.b.xy() == Vec2::new(1.0, 0.0))
            .unwrap();
        assert!(side.is_silhouette(&eye));
    }
}
