use cloudhodge::exterior::{binomial, exterior_power, inner, interior, lift_map, project_k, wedge, KVector};
use cloudhodge::kernel::{cutoff_radius, KernelConfig};
use cloudhodge::zoo::{sample, ManifoldSpec};
use nalgebra as na;
use proptest::prelude::*;

fn kvector(d: usize, k: usize) -> impl Strategy<Value = KVector> {
    prop::collection::vec(-1.0f64..1.0, binomial(d, k)).prop_map(move |c| KVector::from_coeffs(d, k, c).unwrap())
}

fn orthonormal(d: usize, n: usize) -> impl Strategy<Value = na::DMatrix<f64>> {
    prop::collection::vec(-1.0f64..1.0, d * n).prop_filter_map("rank deficient", move |v| {
        let a = na::DMatrix::from_vec(d, n, v);
        let qr = a.qr();
        let r = qr.r();
        if (0..n).any(|i| r[(i, i)].abs() < 1e-3) {
            return None;
        }
        Some(qr.q().columns(0, n).into_owned())
    })
}

fn max_abs(a: &na::DMatrix<f64>) -> f64 {
    a.amax()
}

proptest! {
    #[test]
    fn interior_is_adjoint_to_wedge(
        (v, a, b) in (2usize..7)
            .prop_flat_map(|d| (Just(d), 1usize..=d))
            .prop_flat_map(|(d, k)| (prop::collection::vec(-1.0f64..1.0, d), kvector(d, k - 1), kvector(d, k))),
    ) {
        let lhs = inner(&wedge(&KVector::vector(&v), &a).unwrap(), &b).unwrap();
        let rhs = inner(&a, &interior(&v, &b).unwrap()).unwrap();
        prop_assert!((lhs - rhs).abs() <= 1e-12);
    }

    #[test]
    fn wedge_is_graded_antisymmetric(a in kvector(5, 2), b in kvector(5, 1), c in kvector(5, 2)) {
        let ab = wedge(&a, &b).unwrap();
        let ba = wedge(&b, &a).unwrap();
        for (x, y) in ab.coeffs().iter().zip(ba.coeffs()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let bc = wedge(&b, &c).unwrap();
        let cb = wedge(&c, &b).unwrap();
        for (x, y) in bc.coeffs().iter().zip(cb.coeffs()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
        let bb = wedge(&b, &b).unwrap();
        prop_assert!(bb.coeffs().iter().all(|x| x.abs() <= 1e-15));
    }

    #[test]
    fn lift_is_functorial(a in orthonormal(6, 3), b in orthonormal(3, 3), k in 1usize..=3) {
        let ab = &a * &b;
        let lhs = lift_map(&ab, k).unwrap().matrix().clone();
        let rhs = lift_map(&a, k).unwrap().matrix() * exterior_power(&b, k).unwrap();
        prop_assert!(max_abs(&(lhs - rhs)) <= 1e-10);
    }

    #[test]
    fn lifted_frames_are_orthonormal(a in orthonormal(7, 4), k in 0usize..=4) {
        let l = lift_map(&a, k).unwrap();
        let g = l.matrix().transpose() * l.matrix();
        prop_assert!(max_abs(&(g - na::DMatrix::identity(binomial(4, k), binomial(4, k)))) <= 1e-10);
        let p = l.projector();
        let pp = exterior_power(&(&a * a.transpose()), k).unwrap();
        prop_assert!(max_abs(&(&p - pp)) <= 1e-10);
    }

    #[test]
    fn projection_is_symmetric_idempotent(a in orthonormal(5, 3), k in 0usize..=3, w in kvector(5, 2)) {
        let l = lift_map(&a, k).unwrap();
        let p = l.projector();
        prop_assert!(max_abs(&(&p - p.transpose())) <= 1e-10);
        prop_assert!(max_abs(&(&p * &p - &p)) <= 1e-10);
        prop_assert!((p.trace() - binomial(3, k) as f64).abs() <= 1e-10);
        if k == 2 {
            let once = project_k(&l, &w).unwrap();
            let twice = project_k(&l, &once).unwrap();
            for (x, y) in once.coeffs().iter().zip(twice.coeffs()) {
                prop_assert!((x - y).abs() <= 1e-10);
            }
        }
    }

    #[test]
    fn kernel_weights_are_symmetric_and_bounded(
        x in prop::collection::vec(-1.0f64..1.0, 3),
        y in prop::collection::vec(-1.0f64..1.0, 3),
        t in 0.01f64..0.5,
        factor in 2.0f64..6.0,
    ) {
        let cfg = KernelConfig::new(t, factor * t.sqrt(), 2, 1.0).unwrap();
        let r2: f64 = x.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
        let w = cfg.weight_sq(r2);
        prop_assert!(w >= 0.0 && w <= cfg.weight_sq(0.0));
        let c = cutoff_radius(r2.sqrt(), cfg.delta);
        prop_assert!((0.0..=1.0).contains(&c));
        if r2.sqrt() <= cfg.delta / 2.0 {
            prop_assert_eq!(c, 1.0);
        }
        if r2.sqrt() >= cfg.delta {
            prop_assert_eq!(w, 0.0);
        }
    }

    #[test]
    fn samples_lie_on_their_manifold(seed in any::<u64>(), which in 0usize..5) {
        let spec = [
            ManifoldSpec::sphere(2, 1.5).unwrap(),
            ManifoldSpec::flat_torus(3).unwrap(),
            ManifoldSpec::product_sphere(),
            ManifoldSpec::cp2(),
            ManifoldSpec::s4(),
        ][which].clone();
        let cloud = sample(&spec, 20, seed).unwrap();
        for p in cloud.iter() {
            prop_assert!(spec.defect(p) < 1e-10);
            let q = spec.closest_point(p).unwrap();
            let moved: f64 = p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            prop_assert!(moved < 1e-10);
        }
        let again = sample(&spec, 20, seed).unwrap();
        prop_assert_eq!(cloud.points(), again.points());
    }
}

#[test]
fn sphere_samples_follow_the_uniform_chord_law() {
    // for uniform points on the unit S², |x − y|² is uniform on [0, 4]
    let cloud = sample(&ManifoldSpec::sphere(2, 1.0).unwrap(), 4000, 3).unwrap();
    let mut counts = [0usize; 4];
    for i in 0..2000 {
        let (x, y) = (cloud.point(2 * i), cloud.point(2 * i + 1));
        let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
        counts[(r2.floor() as usize).min(3)] += 1;
    }
    // each bin holds 500 ± 5σ, σ = √(2000·¼·¾)
    for c in counts {
        assert!((c as f64 - 500.0).abs() < 5.0 * 375f64.sqrt(), "{counts:?}");
    }
}

#[test]
fn torus_angles_are_uniform() {
    let cloud = sample(&ManifoldSpec::flat_torus(2).unwrap(), 8000, 5).unwrap();
    let mut counts = [0usize; 8];
    for p in cloud.iter() {
        let a = p[1].atan2(p[0]).rem_euclid(std::f64::consts::TAU);
        counts[((a / std::f64::consts::TAU * 8.0) as usize).min(7)] += 1;
    }
    let sigma = (8000.0f64 * 0.125 * 0.875).sqrt();
    for c in counts {
        assert!((c as f64 - 1000.0).abs() < 5.0 * sigma, "{counts:?}");
    }
}
