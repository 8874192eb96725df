//! Plain-text triangle mesh format (a strict subset of Wavefront OBJ).
//!
//! ```text
//! # comment
//! o <name>          start a building group (`g <name>` is accepted too)
//! v <x> <y> <z>     vertex position in meters, z up
//! f <i> <j> <k>     triangle, 1-based vertex indices; `i/t/n` tokens use `i`
//! ```
//!
//! Each group is one building. Faces that appear before any group are split
//! into buildings by vertex connectivity. `vn`, `vt`, `s`, `usemtl` and
//! `mtllib` lines are ignored; any other keyword is an error.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use super::{Footprint, SceneModel, SurfaceKind, Triangle};
use crate::error::{Error, Result};
use crate::geom::{self, Vec3};

struct RawFace {
    indices: [usize; 3],
    line: usize,
    group: Option<usize>,
}

pub fn load_mesh(path: impl AsRef<Path>) -> Result<SceneModel> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_mesh(&text, &path.display().to_string())
}

/// Parses mesh text; `origin` names the source in error messages.
pub fn parse_mesh(text: &str, origin: &str) -> Result<SceneModel> {
    let err = |line: usize, message: String| Error::Parse {
        path: origin.to_string(),
        line,
        message,
    };

    let mut vertices: Vec<Vec3> = Vec::new();
    let mut faces: Vec<RawFace> = Vec::new();
    let mut group_names: Vec<String> = Vec::new();
    let mut current_group: Option<usize> = None;

    for (n, raw) in text.lines().enumerate() {
        let line_no = n + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        let mut tokens = line.split_whitespace();
        let Some(keyword) = tokens.next() else {
            continue;
        };
        match keyword {
            "v" => {
                let coords: Vec<&str> = tokens.collect();
                if coords.len() < 3 {
                    return Err(err(line_no, "vertex needs 3 coordinates".into()));
                }
                let mut xyz = [0.0; 3];
                for (slot, tok) in xyz.iter_mut().zip(&coords) {
                    *slot = tok
                        .parse::<f64>()
                        .ok()
                        .filter(|v| v.is_finite())
                        .ok_or_else(|| err(line_no, format!("bad coordinate `{tok}`")))?;
                }
                vertices.push(Vec3::new(xyz[0], xyz[1], xyz[2]));
            }
            "f" => {
                let toks: Vec<&str> = tokens.collect();
                if toks.len() != 3 {
                    return Err(err(
                        line_no,
                        format!("faces must be triangles, found {} vertices", toks.len()),
                    ));
                }
                let mut indices = [0usize; 3];
                for (slot, tok) in indices.iter_mut().zip(&toks) {
                    let head = tok.split('/').next().unwrap_or("");
                    let idx: usize = head
                        .parse()
                        .map_err(|_| err(line_no, format!("bad vertex index `{tok}`")))?;
                    if idx == 0 {
                        return Err(err(line_no, "vertex indices are 1-based".into()));
                    }
                    *slot = idx - 1;
                }
                faces.push(RawFace {
                    indices,
                    line: line_no,
                    group: current_group,
                });
            }
            "o" | "g" => {
                let name = tokens.collect::<Vec<_>>().join(" ");
                group_names.push(name);
                current_group = Some(group_names.len() - 1);
            }
            "vn" | "vt" | "s" | "usemtl" | "mtllib" => {}
            other => return Err(err(line_no, format!("unknown keyword `{other}`"))),
        }
    }

    for f in &faces {
        if let Some(&bad) = f.indices.iter().find(|&&i| i >= vertices.len()) {
            return Err(err(
                f.line,
                format!(
                    "face references vertex {} but only {} vertices are defined",
                    bad + 1,
                    vertices.len()
                ),
            ));
        }
    }
    if faces.is_empty() {
        return Err(Error::EmptyModel);
    }

    // building index per face: named groups first (file order), then connected
    // components of ungrouped faces
    let mut group_to_building: HashMap<usize, u32> = HashMap::new();
    let mut building_of_face = vec![u32::MAX; faces.len()];
    let mut next_building = 0u32;
    for (fi, f) in faces.iter().enumerate() {
        if let Some(g) = f.group {
            let b = *group_to_building.entry(g).or_insert_with(|| {
                next_building += 1;
                next_building - 1
            });
            building_of_face[fi] = b;
        }
    }
    let ungrouped: Vec<usize> = (0..faces.len()).filter(|&i| faces[i].group.is_none()).collect();
    if !ungrouped.is_empty() {
        let mut parent: Vec<usize> = (0..vertices.len()).collect();
        fn find(parent: &mut [usize], mut x: usize) -> usize {
            while parent[x] != x {
                parent[x] = parent[parent[x]];
                x = parent[x];
            }
            x
        }
        for &fi in &ungrouped {
            let [a, b, c] = faces[fi].indices;
            for (p, q) in [(a, b), (b, c)] {
                let (rp, rq) = (find(&mut parent, p), find(&mut parent, q));
                parent[rp.max(rq)] = rp.min(rq);
            }
        }
        let mut component_to_building: HashMap<usize, u32> = HashMap::new();
        for &fi in &ungrouped {
            let root = find(&mut parent, faces[fi].indices[0]);
            let b = *component_to_building.entry(root).or_insert_with(|| {
                next_building += 1;
                next_building - 1
            });
            building_of_face[fi] = b;
        }
    }

    let triangles: Vec<Triangle> = faces
        .iter()
        .zip(&building_of_face)
        .map(|(f, &building)| {
            let [a, b, c] = f.indices.map(|i| vertices[i]);
            let n = (b - a).cross(&(c - a));
            let len = n.norm();
            let kind = if len > 0.0 && (n.z / len).abs() >= 0.5 {
                SurfaceKind::Roof
            } else {
                SurfaceKind::Wall
            };
            Triangle {
                vertices: f.indices.map(|i| i as u32),
                building,
                kind,
            }
        })
        .collect();

    let mut footprints = Vec::with_capacity(next_building as usize);
    for b in 0..next_building {
        let mut xy = Vec::new();
        let (mut zmin, mut zmax) = (f64::INFINITY, f64::NEG_INFINITY);
        let mut first_line = 0;
        for (f, &fb) in faces.iter().zip(&building_of_face) {
            if fb != b {
                continue;
            }
            if first_line == 0 {
                first_line = f.line;
            }
            for &i in &f.indices {
                let v = vertices[i];
                xy.push(v.xy());
                zmin = zmin.min(v.z);
                zmax = zmax.max(v.z);
            }
        }
        let polygon = geom::convex_hull(&xy);
        if polygon.len() < 3 || geom::signed_area(&polygon) <= geom::BOUNDARY_EPS {
            return Err(err(first_line, format!("building {b} has a degenerate footprint")));
        }
        let height = zmax - zmin;
        if !(height > 0.0) {
            return Err(err(first_line, format!("building {b} has zero height")));
        }
        footprints.push(Footprint {
            polygon,
            height,
            building_id: b,
        });
    }

    SceneModel::new(vertices, triangles, footprints)
}

/// Serializes a scene into the mesh format, one `o building_<id>` group per footprint.
pub fn write_mesh(scene: &SceneModel) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "# lean city mesh: {} buildings", scene.footprints().len());
    let mut footprints: Vec<&Footprint> = scene.footprints().iter().collect();
    footprints.sort_by_key(|f| f.building_id);
    let mut written = 0usize;
    for fp in footprints {
        let tris: Vec<&Triangle> = scene
            .triangles()
            .iter()
            .filter(|t| t.building == fp.building_id)
            .collect();
        if tris.is_empty() {
            continue;
        }
        let _ = writeln!(out, "o building_{}", fp.building_id);
        let mut local: HashMap<u32, usize> = HashMap::new();
        let mut order: Vec<u32> = Vec::new();
        for t in &tris {
            for &v in &t.vertices {
                local.entry(v).or_insert_with(|| {
                    order.push(v);
                    written + order.len()
                });
            }
        }
        for &v in &order {
            let p = scene.vertices()[v as usize];
            let _ = writeln!(out, "v {} {} {}", p.x, p.y, p.z);
        }
        for t in &tris {
            let [a, b, c] = t.vertices.map(|v| local[&v]);
            let _ = writeln!(out, "f {a} {b} {c}");
        }
        written += order.len();
    }
    out
}

pub fn write_mesh_to(scene: &SceneModel, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    std::fs::write(path, write_mesh(scene)).map_err(|e| Error::io(path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    const BOX: &str = "\
o box
v 0 0 0
v 4 0 0
v 4 3 0
v 0 3 0
v 0 0 5
v 4 0 5
v 4 3 5
v 0 3 5
f 1 2 6
f 1 6 5
f 2 3 7
f 2 7 6
f 3 4 8
f 3 8 7
f 4 1 5
f 4 5 8
f 5 6 7
f 5 7 8
f 1 3 2
f 1 4 3
";

    #[test]
    fn single_box() {
        let scene = parse_mesh(BOX, "box.obj").unwrap();
        assert_eq!(scene.vertices().len(), 8);
        assert_eq!(scene.triangles().len(), 12);
        assert_eq!(scene.footprints().len(), 1);
        let fp = &scene.footprints()[0];
        assert_eq!(fp.height, 5.0);
        assert!((geom::signed_area(&fp.polygon) - 12.0).abs() < 1e-12);
    }

    #[test]
    fn index_out_of_range_names_line() {
        let text = "v 0 0 0\nv 1 0 0\nv 0 1 0\nf 1 2 9\n";
        match parse_mesh(text, "bad.obj") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 4),
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn quads_rejected() {
        let text = "v 0 0 0\nv 1 0 0\nv 1 1 0\nv 0 1 0\nf 1 2 3 4\n";
        assert!(matches!(parse_mesh(text, "q.obj"), Err(Error::Parse { line: 5, .. })));
    }

    #[test]
    fn no_triangles_is_empty_model() {
        assert!(matches!(parse_mesh("v 0 0 0\n", "e.obj"), Err(Error::EmptyModel)));
        assert!(matches!(parse_mesh("", "e.obj"), Err(Error::EmptyModel)));
    }

    #[test]
    fn ungrouped_faces_split_by_connectivity() {
        let two = BOX.replace("o box\n", "");
        let shifted: String = two
            .lines()
            .map(|l| {
                if let Some(rest) = l.strip_prefix("v ") {
                    let c: Vec<f64> = rest.split(' ').map(|t| t.parse().unwrap()).collect();
                    format!("v {} {} {}\n", c[0] + 10.0, c[1], c[2])
                } else if let Some(rest) = l.strip_prefix("f ") {
                    let i: Vec<usize> = rest.split(' ').map(|t| t.parse().unwrap()).collect();
                    format!("f {} {} {}\n", i[0] + 8, i[1] + 8, i[2] + 8)
                } else {
                    format!("{l}\n")
                }
            })
            .collect();
        let scene = parse_mesh(&format!("{two}{shifted}"), "two.obj").unwrap();
        assert_eq!(scene.footprints().len(), 2);
    }

    #[test]
    fn unknown_keyword() {
        assert!(matches!(
            parse_mesh("v 0 0 0\nfoo 1\n", "k.obj"),
            Err(Error::Parse { line: 2, .. })
        ));
    }

    #[test]
    fn slash_tokens_and_comments() {
        let text = "# hi\nmtllib x.mtl\nv 0 0 0\nv 1 0 0\nv 1 0 1 # top\nvn 0 -1 0\nf 1//1 2//1 3//1\n";
        let scene = parse_mesh(text, "s.obj");
        // a single vertical triangle has a degenerate (zero-area) footprint
        assert!(matches!(scene, Err(Error::Parse { .. })));
    }
}
