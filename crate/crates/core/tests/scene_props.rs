use leanloc::geom::{self, Vec2};
use leanloc::scene::{load_mesh, parse_mesh, synth_city, write_mesh, SynthCityConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Winding number of a closed polygon around `p`; boundary handling is left
/// to the caller.
fn winding_number(p: Vec2, poly: &[Vec2]) -> i32 {
    let mut wn = 0;
    for i in 0..poly.len() {
        let (a, b) = (poly[i], poly[(i + 1) % poly.len()]);
        let side = (b.x - a.x) * (p.y - a.y) - (p.x - a.x) * (b.y - a.y);
        if a.y <= p.y {
            if b.y > p.y && side > 0.0 {
                wn += 1;
            }
        } else if b.y <= p.y && side < 0.0 {
            wn -= 1;
        }
    }
    wn
}

fn small_city(seed: u64) -> SynthCityConfig {
    SynthCityConfig {
        width: 160.0,
        height: 110.0,
        seed,
        ..SynthCityConfig::default()
    }
}

#[test]
fn synth_invariants_over_many_seeds() {
    for seed in 0..1000 {
        let cfg = small_city(seed);
        let scene = synth_city(&cfg).unwrap();
        let expected = cfg.blocks_along(cfg.width) * cfg.blocks_along(cfg.height);
        assert_eq!(scene.footprints().len(), expected);
        for f in scene.footprints() {
            assert!(f.height >= cfg.min_height && f.height < cfg.max_height, "seed {seed}");
            assert!(geom::signed_area(&f.polygon) > 0.0);
            for v in &f.polygon {
                assert!(v.x >= 0.0 && v.x <= cfg.width && v.y >= 0.0 && v.y <= cfg.height);
            }
        }
        // footprints of distinct blocks never overlap
        let fps = scene.footprints();
        for a in 0..fps.len() {
            for b in a + 1..fps.len() {
                let (pa, pb) = (&fps[a].polygon, &fps[b].polygon);
                let overlap = geom::rect_overlap_area(pa, pb[0], pb[2]);
                assert!(overlap <= 1e-9, "seed {seed}: buildings {a} and {b} overlap");
            }
        }
    }
}

#[test]
fn inside_building_matches_winding_number() {
    let scene = synth_city(&SynthCityConfig::default()).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let mut inside = 0;
    for _ in 0..10_000 {
        let p = Vec2::new(rng.random_range(-10.0..410.0), rng.random_range(-10.0..410.0));
        let on_boundary = scene.footprints().iter().any(|f| {
            (0..f.polygon.len()).any(|i| geom::point_on_segment(&p, &f.polygon[i], &f.polygon[(i + 1) % f.polygon.len()]))
        });
        if on_boundary {
            continue;
        }
        let oracle = scene.footprints().iter().any(|f| winding_number(p, &f.polygon) != 0);
        assert_eq!(scene.is_inside_building(p), oracle, "{p:?}");
        inside += usize::from(oracle);
    }
    assert!(inside > 1000, "sample should hit many buildings, got {inside}");
}

#[test]
fn boundary_points_are_outside() {
    let scene = synth_city(&SynthCityConfig::default()).unwrap();
    for f in scene.footprints() {
        for i in 0..f.polygon.len() {
            let (a, b) = (f.polygon[i], f.polygon[(i + 1) % f.polygon.len()]);
            assert!(!scene.is_inside_building(a));
            assert!(!scene.is_inside_building((a + b) / 2.0));
        }
        assert!(scene.is_inside_building(f.centroid()));
    }
}

#[test]
fn mesh_round_trip() {
    for seed in [1, 7, 42] {
        let scene = synth_city(&small_city(seed)).unwrap();
        let text = write_mesh(&scene);
        let back = parse_mesh(&text, "round_trip.obj").unwrap();
        // vertices are renumbered in first-use order; geometry must match exactly
        assert_eq!(back.triangles().len(), scene.triangles().len());
        for t in 0..scene.triangles().len() {
            assert_eq!(back.triangle_corners(t), scene.triangle_corners(t));
            assert_eq!(back.triangles()[t].building, scene.triangles()[t].building);
            assert_eq!(back.triangles()[t].kind, scene.triangles()[t].kind);
        }
        assert_eq!(back.footprints().len(), scene.footprints().len());
        for (a, b) in back.footprints().iter().zip(scene.footprints()) {
            assert_eq!(a.height, b.height);
            assert!((geom::signed_area(&a.polygon) - geom::signed_area(&b.polygon)).abs() < 1e-9);
        }
        assert_eq!(write_mesh(&back), text);
    }
}

#[test]
fn fixture_mesh_file() {
    let path = concat!(env!("CARGO_MANIFEST_DIR"), "/../../tests/data/city_2x2.obj");
    let scene = load_mesh(path).unwrap();
    let mut heights: Vec<f64> = scene.footprints().iter().map(|f| f.height).collect();
    heights.sort_by(f64::total_cmp);
    assert_eq!(heights, vec![9.0, 12.0, 18.0, 24.0]);
    assert_eq!(scene.triangles().len(), 4 * 10);
    assert!(scene.is_inside_building(Vec2::new(25.0, 25.0)));
    assert!(!scene.is_inside_building(Vec2::new(15.0, 15.0)));
}
