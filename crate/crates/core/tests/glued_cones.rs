use rand::Rng;
use starwalk::constructions::{cross_density_body, cross_density_kernel, exact_samples, make_glued_cones, BoxRejection};
use starwalk::geometry::segment_in_body;
use starwalk::quad::integrate_piecewise;
use starwalk::rng::{purpose, stream};
use starwalk::stats::ks_distance;
use starwalk::volume::estimate_eta;
use starwalk::StarBody;

#[test]
fn x1_marginal_and_kernel_mass() {
    for (n, eta) in [(2, 0.5), (3, 0.3), (4, 0.5), (5, 0.25), (6, 0.5)] {
        let cones = make_glued_cones(n, eta).unwrap();
        let pts = exact_samples(&cones, 100_000, n as u64).unwrap();
        let fb = cross_density_body(n, eta).unwrap();
        let x1: Vec<f64> = pts.iter().map(|p| p[0]).collect();
        let ks = ks_distance(&x1, |x| fb.cdf(x));
        assert!(ks <= 0.03, "n={n}: KS {ks}");
        let fk = cross_density_kernel(n, eta).unwrap();
        let (lo, hi) = fk.support();
        let mass = integrate_piecewise(&|x| fk.evaluate(x), &[lo, 0.0, hi], 1e-13);
        let (eta_hat, se) = estimate_eta(&cones, &pts).unwrap();
        assert!((eta_hat - mass).abs() <= 3.0 * se, "n={n}: {eta_hat} vs {mass} ± {se}");
    }
}

/// The kernel is the intersection of the two cones' reflections:
/// `‖x_⊥‖ ≤ 1 − (l + |x₁|)/c`, written out independently here.
#[test]
fn kernel_matches_displayed_set() {
    let mut rng = stream(3, purpose::DIAGNOSTIC, 0);
    for (n, eta, s) in [(2, 0.5, 1.0), (3, 0.2, 1.0), (4, 0.5, 0.25)] {
        let cones = make_glued_cones(n, eta).unwrap().with_axis_scale(s).unwrap();
        let nf = n as f64;
        let c = (nf * (nf + 2.0)).sqrt();
        let l = c * (1.0 - eta.powf(1.0 / nf));
        let bb = cones.bounding_box();
        let mut kernel_points = Vec::new();
        for _ in 0..10_000 {
            let x: Vec<f64> = (0..n).map(|i| rng.random_range(bb.lo[i]..bb.hi[i])).collect();
            let perp = x[1..].iter().map(|v| v * v).sum::<f64>().sqrt() / s;
            let inside = x[0].abs() <= l && perp <= 1.0 - (l + x[0].abs()) / c;
            assert_eq!(cones.kernel_contains(&x), inside, "{x:?}");
            if inside {
                kernel_points.push(x);
            }
        }
        let body = exact_samples(&BoxRejection::new(&cones), 200, 4).unwrap();
        for z in kernel_points.iter().take(50) {
            assert!(body.iter().all(|y| segment_in_body(&cones, z, y, 64)));
        }
    }
}
