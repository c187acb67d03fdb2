//! Fixtures shared by the benchmarks.

use cloudhodge::geometry::{Geometry, GeometryOptions};
use cloudhodge::kernel::KernelSpec;
use cloudhodge::zoo::{sample, ManifoldSpec, PointCloud};
use nalgebra as na;

pub fn sphere_cloud(m: usize) -> PointCloud {
    sample(&ManifoldSpec::sphere(2, 1.0).expect("unit sphere"), m, 0).expect("sampling")
}

/// Geometry with B̂, so operators of every degree can be built.
pub fn sphere_geometry(m: usize) -> Geometry {
    let cloud = sphere_cloud(m);
    let config = KernelSpec::default().resolve(&cloud).expect("kernel");
    Geometry::build(
        cloud,
        config,
        GeometryOptions {
            curvature: true,
            ..Default::default()
        },
    )
    .expect("geometry")
}

/// Orthonormal d × n frame spanning the first n coordinate axes, rotated.
pub fn frame(d: usize, n: usize) -> na::DMatrix<f64> {
    let a = na::DMatrix::from_fn(d, n, |i, j| {
        ((i * 7 + j * 3) as f64 * 0.37).sin() + if i == j { 2.0 } else { 0.0 }
    });
    a.qr().q().columns(0, n).into_owned()
}
