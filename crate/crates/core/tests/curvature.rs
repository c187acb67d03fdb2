use cloudhodge::zoo::{sample, ManifoldSpec};
use cloudhodge::{Geometry, GeometryOptions, KernelSpec};
use nalgebra as na;

fn geometry(spec: &ManifoldSpec, m: usize) -> Geometry {
    let cloud = sample(spec, m, 21).unwrap();
    let config = KernelSpec::default().resolve(&cloud).unwrap();
    let options = GeometryOptions {
        curvature: true,
        ..Default::default()
    };
    Geometry::build(cloud, config, options).unwrap()
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

// Ĥ is summed over the ambient basis; the frame sum agrees because both slots of B̂ annihilate normals.
#[test]
fn ambient_and_frame_traces_agree() {
    for spec in [ManifoldSpec::sphere(2, 1.0).unwrap(), ManifoldSpec::flat_torus(2).unwrap()] {
        let g = geometry(&spec, 1500);
        let curv = g.curvature.as_ref().unwrap();
        let d = spec.d();
        for i in (0..g.cloud.len()).step_by(37) {
            let b = curv.sym(i);
            let frame = g.field.frame(i);
            let mut h = vec![0.0; d];
            for c in 0..frame.ncols() {
                let v: Vec<f64> = frame.column(c).iter().copied().collect();
                for (acc, x) in h.iter_mut().zip(b.eval(&v, &v)) {
                    *acc += x;
                }
            }
            let ambient = curv.mean_curvature(i);
            let diff: Vec<f64> = h.iter().zip(ambient).map(|(a, b)| a - b).collect();
            assert!(norm(&diff) <= 1e-10 * norm(ambient).max(1.0), "{spec:?} sample {i}");

            // normal slots and tangential outputs vanish
            let p = g.field.projector(i);
            let normal: Vec<f64> = {
                let e = na::DVector::from_fn(d, |r, _| (r as f64 + 0.5).sin());
                let n = &e - &p * &e;
                n.iter().copied().collect()
            };
            let u: Vec<f64> = frame.column(0).iter().copied().collect();
            assert!(norm(&b.eval(&normal, &u)) <= 1e-10 * b.amax().max(1.0));
            let out = na::DVector::from_vec(b.eval(&u, &u));
            assert!((&p * out).norm() <= 1e-8);
        }
    }
}
