//! Kernel oracles must be sound: every point they accept sees the whole body,
//! and the accepted set is convex.

use rand::Rng;
use starwalk::constructions::{exact_samples, BoxRejection};
use starwalk::geometry::{segment_in_body, SharedBody};
use starwalk::hardness::Graph;
use starwalk::rng::{purpose, stream};
use starwalk::spec::one_of_two_squares;
use starwalk::{BodySpec, Halfspace, Point};

fn bodies() -> Vec<(&'static str, SharedBody)> {
    let specs = vec![
        ("glued cones n=2", BodySpec::GluedCones { n: 2, eta: 0.5, axis_scale: None }),
        ("glued cones n=3", BodySpec::GluedCones { n: 3, eta: 0.3, axis_scale: Some(0.5) }),
        ("1-of-2 squares", one_of_two_squares()),
        ("clique K4 k=3", BodySpec::CliqueReduction { graph: Graph::complete(4), k: 3, a: None }),
        ("clique C5 k=2", BodySpec::CliqueReduction { graph: Graph::cycle(5), k: 2, a: Some(3.0) }),
        (
            "L polygon",
            BodySpec::Polygon {
                vertices: vec![[0.0, 0.0], [2.0, 0.0], [2.0, 1.0], [1.0, 1.0], [1.0, 2.0], [0.0, 2.0]],
            },
        ),
        (
            "2-of-3 halfspaces",
            BodySpec::KOfMHalfspaces {
                k: 2,
                halfspaces: vec![
                    Halfspace::new(vec![1.0, 0.0], 0.2).unwrap(),
                    Halfspace::new(vec![0.0, 1.0], 0.2).unwrap(),
                    Halfspace::new(vec![1.0, 1.0], 0.1).unwrap(),
                ],
                box_bound: Some(vec![
                    Halfspace::new(vec![1.0, 0.0], 1.0).unwrap(),
                    Halfspace::new(vec![-1.0, 0.0], 1.0).unwrap(),
                    Halfspace::new(vec![0.0, 1.0], 1.0).unwrap(),
                    Halfspace::new(vec![0.0, -1.0], 1.0).unwrap(),
                ]),
                witness: Point::new(vec![-0.5, -0.5]).unwrap(),
                radius_bound: None,
            },
        ),
        (
            "sheared squares",
            BodySpec::Affine {
                body: Box::new(one_of_two_squares()),
                matrix: vec![vec![1.0, 0.5], vec![0.0, 2.0]],
                shift: vec![-1.0, 0.0],
            },
        ),
    ];
    specs.into_iter().map(|(name, s)| (name, s.build().unwrap())).collect()
}

#[test]
fn kernel_points_see_the_whole_body() {
    for (i, (name, body)) in bodies().into_iter().enumerate() {
        let xs = exact_samples(&BoxRejection::new(body.clone()), 200, i as u64).unwrap();
        let zs = exact_samples(&BoxRejection::kernel(body.clone()), 50, 100 + i as u64).unwrap();
        for z in &zs {
            assert!(body.contains(z), "{name}: kernel point outside body");
            for x in &xs {
                assert!(segment_in_body(&body, z, x, 64), "{name}: {z:?} does not see {x:?}");
            }
        }
    }
}

#[test]
fn kernel_oracles_are_convex() {
    let mut rng = stream(9, purpose::DIAGNOSTIC, 0);
    for (i, (name, body)) in bodies().into_iter().enumerate() {
        let zs = exact_samples(&BoxRejection::kernel(body.clone()), 200, 200 + i as u64).unwrap();
        for pair in zs.chunks(2) {
            let t: f64 = rng.random();
            let m: Vec<f64> = pair[0].iter().zip(&pair[1]).map(|(a, b)| t * a + (1.0 - t) * b).collect();
            assert!(body.kernel_contains(&m), "{name}: kernel not convex at {m:?}");
        }
        assert!(body.kernel_contains(&body.interior_point()), "{name}");
    }
}

#[test]
fn interior_ball_lies_in_kernel() {
    let mut rng = stream(10, purpose::DIAGNOSTIC, 0);
    for (name, body) in bodies() {
        let c = body.interior_point();
        let r = body.kernel_inner_radius();
        assert!(r > 0.0, "{name}");
        for _ in 0..500 {
            let dir = starwalk::rng::unit_direction(&mut rng, body.dimension());
            let p: Vec<f64> = c.iter().zip(&dir).map(|(a, d)| a + 0.999 * r * d).collect();
            assert!(body.kernel_contains(&p), "{name}: {p:?}");
        }
    }
}
