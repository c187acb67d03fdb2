//! Test manifolds with closed-form geometry.
//!
//! Each kind provides a uniform sampler together with analytic references:
//! tangent projectors, second fundamental form, curvature, Hodge spectra,
//! harmonic forms and homology cycles.
//!
//! Conventions:
//! - flat tori are products of unit circles, `T^n ⊂ R^{2n}`, side length 2π;
//! - CP² is the set of rank-one Hermitian projections `zz*` on C³, written as
//!   the real 9-vector `(P00, P11, P22, √2 Re P01, √2 Im P01, √2 Re P02,
//!   √2 Im P02, √2 Re P12, √2 Im P12)` so that Euclidean length equals the
//!   Frobenius norm;
//! - spheres are oriented by the outward normal placed first, tori by
//!   `(∂θ1, .., ∂θn)`, S²×S² by the product of the factor orientations and CP²
//!   by its complex structure `(X1, JX1, X2, JX2)`.

use std::f64::consts::PI;

use na::Complex;
use nalgebra as na;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{self, KVector};
use crate::tensor::{BilinearMap, FourTensor};

const ON_MANIFOLD_TOL: f64 = 1e-8;

pub const DEFAULT_REFINEMENT: usize = 64;

fn unit_radius() -> f64 {
    1.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ManifoldKind {
    Sphere {
        n: usize,
        #[serde(default = "unit_radius")]
        radius: f64,
    },
    FlatTorus {
        n: usize,
    },
    /// Unit S² × S² in R⁶.
    ProductSphere,
    Cp2,
    /// Unit S⁴ in R⁵.
    S4,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Orientation {
    #[default]
    Standard,
    Reversed,
}

impl Orientation {
    pub fn sign(self) -> f64 {
        match self {
            Orientation::Standard => 1.0,
            Orientation::Reversed => -1.0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifoldSpec {
    #[serde(flatten)]
    pub kind: ManifoldKind,
    #[serde(default)]
    pub orientation: Orientation,
}

impl ManifoldSpec {
    pub fn new(kind: ManifoldKind) -> Result<Self> {
        let spec = Self {
            kind,
            orientation: Orientation::Standard,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn sphere(n: usize, radius: f64) -> Result<Self> {
        Self::new(ManifoldKind::Sphere { n, radius })
    }

    pub fn flat_torus(n: usize) -> Result<Self> {
        Self::new(ManifoldKind::FlatTorus { n })
    }

    pub fn product_sphere() -> Self {
        Self::new(ManifoldKind::ProductSphere).expect("valid kind")
    }

    pub fn cp2() -> Self {
        Self::new(ManifoldKind::Cp2).expect("valid kind")
    }

    pub fn s4() -> Self {
        Self::new(ManifoldKind::S4).expect("valid kind")
    }

    pub fn reversed(mut self) -> Self {
        self.orientation = match self.orientation {
            Orientation::Standard => Orientation::Reversed,
            Orientation::Reversed => Orientation::Standard,
        };
        self
    }

    pub fn validate(&self) -> Result<()> {
        match self.kind {
            ManifoldKind::Sphere { n, radius } => {
                if n < 2 {
                    return Err(Error::InvalidConfig(format!("sphere dimension {n} < 2")));
                }
                if !(radius > 0.0 && radius.is_finite()) {
                    return Err(Error::InvalidConfig(format!("sphere radius {radius}")));
                }
            }
            ManifoldKind::FlatTorus { n } if n < 2 => {
                return Err(Error::InvalidConfig(format!("torus dimension {n} < 2")));
            }
            _ => {}
        }
        Ok(())
    }

    /// Intrinsic dimension.
    pub fn n(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere { n, .. } => n,
            ManifoldKind::FlatTorus { n } => n,
            ManifoldKind::ProductSphere => 4,
            ManifoldKind::Cp2 => 4,
            ManifoldKind::S4 => 4,
        }
    }

    /// Ambient dimension.
    pub fn d(&self) -> usize {
        match self.kind {
            ManifoldKind::Sphere { n, .. } => n + 1,
            ManifoldKind::FlatTorus { n } => 2 * n,
            ManifoldKind::ProductSphere => 6,
            ManifoldKind::Cp2 => 9,
            ManifoldKind::S4 => 5,
        }
    }

    /// Riemannian volume of the induced metric.
    pub fn volume(&self) -> f64 {
        match self.kind {
            ManifoldKind::Sphere { n, radius } => sphere_area(n) * radius.powi(n as i32),
            ManifoldKind::FlatTorus { n } => (2.0 * PI).powi(n as i32),
            ManifoldKind::ProductSphere => 16.0 * PI * PI,
            ManifoldKind::Cp2 => 2.0 * PI * PI,
            ManifoldKind::S4 => 8.0 * PI * PI / 3.0,
        }
    }

    pub fn name(&self) -> String {
        match self.kind {
            ManifoldKind::Sphere { n, radius } => match radius {
                1.0 => format!("S{n}"),
                _ => format!("S{n}(r={radius})"),
            },
            ManifoldKind::FlatTorus { n } => format!("T{n}"),
            ManifoldKind::ProductSphere => "S2xS2".into(),
            ManifoldKind::Cp2 => "CP2".into(),
            ManifoldKind::S4 => "S4".into(),
        }
    }

    /// Residual of the defining equations at `p`.
    pub fn defect(&self, p: &[f64]) -> f64 {
        if p.len() != self.d() {
            return f64::INFINITY;
        }
        match self.kind {
            ManifoldKind::Sphere { radius, .. } => (norm(p) - radius).abs(),
            ManifoldKind::S4 => (norm(p) - 1.0).abs(),
            ManifoldKind::FlatTorus { n } => (0..n)
                .map(|i| (norm(&p[2 * i..2 * i + 2]) - 1.0).abs())
                .fold(0.0, f64::max),
            ManifoldKind::ProductSphere => (norm(&p[..3]) - 1.0).abs().max((norm(&p[3..]) - 1.0).abs()),
            ManifoldKind::Cp2 => {
                let h = herm_from_coords(p);
                let idem = (h * h - h).iter().map(|c| c.norm()).fold(0.0, f64::max);
                let tr = (h.trace().re - 1.0).abs();
                idem.max(tr)
            }
        }
    }

    fn check_on(&self, p: &[f64]) -> Result<()> {
        if p.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: p.len(),
            });
        }
        let defect = self.defect(p);
        if defect > ON_MANIFOLD_TOL {
            return Err(Error::OffManifold { defect });
        }
        Ok(())
    }

    /// Nearest point of the manifold to `x`.
    pub fn closest_point(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() != self.d() {
            return Err(Error::DimensionMismatch {
                expected: self.d(),
                found: x.len(),
            });
        }
        let radial = |v: &[f64], r: f64| -> Result<Vec<f64>> {
            let s = norm(v);
            if s < 1e-12 {
                return Err(Error::OffManifold { defect: r });
            }
            Ok(v.iter().map(|c| c * r / s).collect())
        };
        match self.kind {
            ManifoldKind::Sphere { radius, .. } => radial(x, radius),
            ManifoldKind::S4 => radial(x, 1.0),
            ManifoldKind::FlatTorus { n } => {
                let mut out = Vec::with_capacity(2 * n);
                for i in 0..n {
                    out.extend(radial(&x[2 * i..2 * i + 2], 1.0)?);
                }
                Ok(out)
            }
            ManifoldKind::ProductSphere => {
                let mut out = radial(&x[..3], 1.0)?;
                out.extend(radial(&x[3..], 1.0)?);
                Ok(out)
            }
            ManifoldKind::Cp2 => {
                let eig = herm_from_coords(x).symmetric_eigen();
                let top = eig.eigenvalues.imax();
                let v = eig.eigenvectors.column(top).into_owned();
                let h = na::Matrix3::from_fn(|i, j| v[i] * v[j].conj());
                Ok(coords_from_herm(&h))
            }
        }
    }
}

/// Area of the unit n-sphere, 2π^{(n+1)/2} / Γ((n+1)/2).
pub fn sphere_area(n: usize) -> f64 {
    2.0 * PI.powf((n as f64 + 1.0) / 2.0) / gamma_half(n + 1)
}

/// Γ(m/2) for a positive integer m.
fn gamma_half(m: usize) -> f64 {
    assert!(m > 0);
    if m.is_multiple_of(2) {
        (1..m / 2).map(|i| i as f64).product()
    } else {
        // Γ(1/2) = √π, Γ(x+1) = xΓ(x)
        let mut g = PI.sqrt();
        let mut x = 0.5;
        while x + 0.25 < m as f64 / 2.0 {
            g *= x;
            x += 1.0;
        }
        g
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// m samples in R^d with the manifold metadata they were drawn from (if any).
#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<f64>,
    dim: usize,
    intrinsic_dim: usize,
    spec: Option<ManifoldSpec>,
    seed: Option<u64>,
}

impl PointCloud {
    /// Wraps row-major points without a generating manifold.
    pub fn new(points: Vec<f64>, dim: usize, intrinsic_dim: usize) -> Result<Self> {
        if dim == 0 || !points.len().is_multiple_of(dim) {
            return Err(Error::DimensionMismatch {
                expected: dim,
                found: points.len(),
            });
        }
        if points.is_empty() {
            return Err(Error::InvalidConfig("empty point cloud".into()));
        }
        if intrinsic_dim == 0 || intrinsic_dim >= dim {
            return Err(Error::InvalidConfig(format!(
                "intrinsic dimension {intrinsic_dim} must lie in [1, {dim})"
            )));
        }
        if let Some(pos) = points.iter().position(|x| !x.is_finite()) {
            return Err(Error::Format {
                location: format!("row {}", pos / dim),
                message: "non-finite coordinate".into(),
            });
        }
        Ok(Self {
            points,
            dim,
            intrinsic_dim,
            spec: None,
            seed: None,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], intrinsic_dim: usize) -> Result<Self> {
        let dim = rows.first().map(|r| r.len()).unwrap_or(0);
        if rows.iter().any(|r| r.len() != dim) {
            return Err(Error::Format {
                location: "rows".into(),
                message: "ragged rows".into(),
            });
        }
        Self::new(rows.concat(), dim, intrinsic_dim)
    }

    pub fn with_spec(mut self, spec: ManifoldSpec) -> Result<Self> {
        if spec.d() != self.dim || spec.n() != self.intrinsic_dim {
            return Err(Error::DimensionMismatch {
                expected: spec.d(),
                found: self.dim,
            });
        }
        self.spec = Some(spec);
        Ok(self)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn intrinsic_dim(&self) -> usize {
        self.intrinsic_dim
    }

    pub fn spec(&self) -> Option<&ManifoldSpec> {
        self.spec.as_ref()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.points.chunks_exact(self.dim)
    }

    /// Keeps the listed samples, in order.
    pub fn select(&self, indices: &[usize]) -> Self {
        let mut points = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            points.extend_from_slice(self.point(i));
        }
        Self {
            points,
            dim: self.dim,
            intrinsic_dim: self.intrinsic_dim,
            spec: self.spec.clone(),
            seed: self.seed,
        }
    }

    /// Splits off the last `count` samples, returning (head, tail).
    pub fn split_tail(&self, count: usize) -> (Self, Self) {
        let m = self.len();
        let count = count.min(m);
        let head: Vec<usize> = (0..m - count).collect();
        let tail: Vec<usize> = (m - count..m).collect();
        (self.select(&head), self.select(&tail))
    }
}

/// Generator for sample `index` of the stream keyed by `seed`.
pub fn sample_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn gaussian_unit(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..len).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-12 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}

fn sample_point(spec: &ManifoldSpec, rng: &mut ChaCha8Rng) -> Vec<f64> {
    match spec.kind {
        ManifoldKind::Sphere { n, radius } => gaussian_unit(rng, n + 1).into_iter().map(|x| x * radius).collect(),
        ManifoldKind::S4 => gaussian_unit(rng, 5),
        ManifoldKind::FlatTorus { n } => {
            let mut p = Vec::with_capacity(2 * n);
            for _ in 0..n {
                let theta: f64 = rng.random_range(0.0..2.0 * PI);
                p.push(theta.cos());
                p.push(theta.sin());
            }
            p
        }
        ManifoldKind::ProductSphere => {
            let mut p = gaussian_unit(rng, 3);
            p.extend(gaussian_unit(rng, 3));
            p
        }
        ManifoldKind::Cp2 => {
            let z = gaussian_unit(rng, 6);
            let z = [
                Complex::new(z[0], z[1]),
                Complex::new(z[2], z[3]),
                Complex::new(z[4], z[5]),
            ];
            let h = na::Matrix3::from_fn(|i, j| z[i] * z[j].conj());
            coords_from_herm(&h)
        }
    }
}

/// Draws `m` i.i.d. samples from the normalized Riemannian volume of `spec`.
/// Sample `i` depends only on `(seed, i)`.
pub fn sample(spec: &ManifoldSpec, m: usize, seed: u64) -> Result<PointCloud> {
    spec.validate()?;
    if m == 0 {
        return Err(Error::InvalidConfig("m must be at least 1".into()));
    }
    let rows: Vec<Vec<f64>> = (0..m)
        .into_par_iter()
        .map(|i| sample_point(spec, &mut sample_rng(seed, i as u64)))
        .collect();
    let mut cloud = PointCloud::new(rows.concat(), spec.d(), spec.n())?;
    cloud.spec = Some(spec.clone());
    cloud.seed = Some(seed);
    Ok(cloud)
}

const CP2_PAIRS: [(usize, usize); 3] = [(0, 1), (0, 2), (1, 2)];

pub(crate) fn herm_from_coords(x: &[f64]) -> na::Matrix3<Complex<f64>> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut h = na::Matrix3::from_element(Complex::new(0.0, 0.0));
    for i in 0..3 {
        h[(i, i)] = Complex::new(x[i], 0.0);
    }
    for (p, &(i, j)) in CP2_PAIRS.iter().enumerate() {
        let c = Complex::new(x[3 + 2 * p] * s, x[4 + 2 * p] * s);
        h[(i, j)] = c;
        h[(j, i)] = c.conj();
    }
    h
}

pub(crate) fn coords_from_herm(h: &na::Matrix3<Complex<f64>>) -> Vec<f64> {
    let r2 = std::f64::consts::SQRT_2;
    let mut x = vec![0.0; 9];
    for i in 0..3 {
        x[i] = h[(i, i)].re;
    }
    for (p, &(i, j)) in CP2_PAIRS.iter().enumerate() {
        // average the two triangles so slightly non-Hermitian input stays consistent
        let c = (h[(i, j)] + h[(j, i)].conj()) * 0.5;
        x[3 + 2 * p] = r2 * c.re;
        x[4 + 2 * p] = r2 * c.im;
    }
    x
}

/// Matrix of a real-linear map on Hermitian matrices in the 9-coordinate basis.
fn cp2_matrix(f: impl Fn(&na::Matrix3<Complex<f64>>) -> na::Matrix3<Complex<f64>>) -> na::DMatrix<f64> {
    let mut out = na::DMatrix::zeros(9, 9);
    for c in 0..9 {
        let mut e = vec![0.0; 9];
        e[c] = 1.0;
        let y = coords_from_herm(&f(&herm_from_coords(&e)));
        for r in 0..9 {
            out[(r, c)] = y[r];
        }
    }
    out
}

/// Orthogonal projector onto T_pM.
pub fn oracle_projection(spec: &ManifoldSpec, p: &[f64]) -> Result<na::DMatrix<f64>> {
    spec.check_on(p)?;
    let d = spec.d();
    Ok(match spec.kind {
        ManifoldKind::Sphere { radius, .. } => sphere_projector(p, radius),
        ManifoldKind::S4 => sphere_projector(p, 1.0),
        ManifoldKind::FlatTorus { .. } => {
            let v = torus_frame(p);
            &v * v.transpose()
        }
        ManifoldKind::ProductSphere => {
            let mut out = na::DMatrix::zeros(d, d);
            out.view_mut((0, 0), (3, 3)).copy_from(&sphere_projector(&p[..3], 1.0));
            out.view_mut((3, 3), (3, 3)).copy_from(&sphere_projector(&p[3..], 1.0));
            out
        }
        ManifoldKind::Cp2 => {
            let pm = herm_from_coords(p);
            cp2_matrix(|h| pm * h + h * pm - (pm * h * pm) * Complex::new(2.0, 0.0))
        }
    })
}

fn sphere_projector(p: &[f64], radius: f64) -> na::DMatrix<f64> {
    let d = p.len();
    let x = na::DVector::from_column_slice(p);
    na::DMatrix::identity(d, d) - &x * x.transpose() / (radius * radius)
}

fn torus_frame(p: &[f64]) -> na::DMatrix<f64> {
    let n = p.len() / 2;
    let mut v = na::DMatrix::zeros(2 * n, n);
    for i in 0..n {
        let r = norm(&p[2 * i..2 * i + 2]);
        v[(2 * i, i)] = -p[2 * i + 1] / r;
        v[(2 * i + 1, i)] = p[2 * i] / r;
    }
    v
}

/// Ambient extension B(Πu, Πv) of the second fundamental form at p.
pub fn oracle_second_fundamental(spec: &ManifoldSpec, p: &[f64]) -> Result<BilinearMap> {
    let proj = oracle_projection(spec, p)?;
    let d = spec.d();
    let tangent = |i: usize| -> Vec<f64> { proj.column(i).iter().copied().collect() };
    let b = match spec.kind {
        ManifoldKind::Sphere { radius, .. } => sphere_b(p, radius, &tangent, d),
        ManifoldKind::S4 => sphere_b(p, 1.0, &tangent, d),
        ManifoldKind::FlatTorus { n } => BilinearMap::from_fn(d, |u, v| {
            let (tu, tv) = (tangent(u), tangent(v));
            let mut out = vec![0.0; d];
            for i in 0..n {
                let (a, b) = (2 * i, 2 * i + 1);
                let t = [-p[b], p[a]];
                let cu = tu[a] * t[0] + tu[b] * t[1];
                let cv = tv[a] * t[0] + tv[b] * t[1];
                out[a] -= cu * cv * p[a];
                out[b] -= cu * cv * p[b];
            }
            out
        }),
        ManifoldKind::ProductSphere => BilinearMap::from_fn(d, |u, v| {
            let (tu, tv) = (tangent(u), tangent(v));
            let mut out = vec![0.0; d];
            for block in [0..3, 3..6] {
                let c = dot(&tu[block.clone()], &tv[block.clone()]);
                for k in block {
                    out[k] = -c * p[k];
                }
            }
            out
        }),
        ManifoldKind::Cp2 => {
            let pm = herm_from_coords(p);
            let two = Complex::new(2.0, 0.0);
            BilinearMap::from_fn(d, |u, v| {
                let x = herm_from_coords(&tangent(u));
                let y = herm_from_coords(&tangent(v));
                let dpi = x * y + y * x - (x * y * pm) * two - (pm * y * x) * two;
                let raw = na::DVector::from_vec(coords_from_herm(&dpi));
                let normal = &raw - &proj * &raw;
                normal.as_slice().to_vec()
            })
        }
    };
    Ok(b)
}

fn sphere_b(p: &[f64], radius: f64, tangent: &impl Fn(usize) -> Vec<f64>, d: usize) -> BilinearMap {
    BilinearMap::from_fn(d, |u, v| {
        let c = dot(&tangent(u), &tangent(v)) / (radius * radius);
        p.iter().map(|x| -c * x).collect()
    })
}

/// Riemann tensor (ambient extension) from the Gauss equation applied to the oracle B.
pub fn oracle_curvature(spec: &ManifoldSpec, p: &[f64]) -> Result<FourTensor> {
    Ok(FourTensor::from_gauss(&oracle_second_fundamental(spec, p)?))
}

/// Positively oriented orthonormal tangent frame (d × n) at p.
pub fn oracle_oriented_frame(spec: &ManifoldSpec, p: &[f64]) -> Result<na::DMatrix<f64>> {
    spec.check_on(p)?;
    let mut v = match spec.kind {
        ManifoldKind::Sphere { .. } | ManifoldKind::S4 => sphere_frame(p),
        ManifoldKind::FlatTorus { .. } => torus_frame(p),
        ManifoldKind::ProductSphere => {
            let mut v = na::DMatrix::zeros(6, 4);
            v.view_mut((0, 0), (3, 2)).copy_from(&sphere_frame(&p[..3]));
            v.view_mut((3, 2), (3, 2)).copy_from(&sphere_frame(&p[3..]));
            v
        }
        ManifoldKind::Cp2 => cp2_frame(p),
    };
    if spec.orientation == Orientation::Reversed {
        let mut c = v.column_mut(0);
        c.neg_mut();
    }
    Ok(v)
}

/// Orthonormal basis of p^⊥ with det[p/|p|, V] > 0.
fn sphere_frame(p: &[f64]) -> na::DMatrix<f64> {
    let d = p.len();
    let nu = na::DVector::from_column_slice(p).normalize();
    let proj = na::DMatrix::identity(d, d) - &nu * nu.transpose();
    let mut cols: Vec<na::DVector<f64>> = Vec::with_capacity(d - 1);
    // Gram-Schmidt over the projected coordinate axes, largest first
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| proj[(b, b)].total_cmp(&proj[(a, a)]));
    for &i in &order {
        if cols.len() == d - 1 {
            break;
        }
        let mut c = proj.column(i).into_owned();
        for q in &cols {
            let s = q.dot(&c);
            c -= q * s;
        }
        let r = c.norm();
        if r > 1e-6 {
            cols.push(c / r);
        }
    }
    let mut v = na::DMatrix::from_columns(&cols);
    let mut full = na::DMatrix::zeros(d, d);
    full.set_column(0, &nu);
    full.view_mut((0, 1), (d, d - 1)).copy_from(&v);
    if full.determinant() < 0.0 {
        let mut c = v.column_mut(d - 2);
        c.neg_mut();
    }
    v
}

fn cp2_frame(p: &[f64]) -> na::DMatrix<f64> {
    let pm = herm_from_coords(p);
    // z spans the range of P; pick the column of largest norm
    let j = (0..3)
        .max_by(|&a, &b| pm.column(a).norm().total_cmp(&pm.column(b).norm()))
        .unwrap();
    let z = pm.column(j).normalize();
    let mut basis: Vec<na::Vector3<Complex<f64>>> = Vec::with_capacity(2);
    for axis in 0..3 {
        if basis.len() == 2 {
            break;
        }
        let mut w = na::Vector3::from_fn(|i, _| {
            if i == axis {
                Complex::new(1.0, 0.0)
            } else {
                Complex::new(0.0, 0.0)
            }
        });
        for q in std::iter::once(&z).chain(basis.iter()) {
            let s = q.dotc(&w);
            w -= q * s;
        }
        let r = w.norm();
        if r > 1e-6 {
            basis.push(w / Complex::new(r, 0.0));
        }
    }
    let i = Complex::new(0.0, 1.0);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    let mut v = na::DMatrix::zeros(9, 4);
    let mut col = 0;
    for w in &basis {
        for wv in [*w, w * i] {
            let x = wv * z.adjoint() + z * wv.adjoint();
            let c = coords_from_herm(&x);
            for r in 0..9 {
                v[(r, col)] = s * c[r];
            }
            col += 1;
        }
    }
    v
}

/// Oriented unit tangent n-vector at p as an element of Λ^n R^d.
pub fn oracle_volume_vector(spec: &ManifoldSpec, p: &[f64]) -> Result<KVector> {
    let v = oracle_oriented_frame(spec, p)?;
    let n = spec.n();
    let lifted = exterior::exterior_power(&v, n)?;
    KVector::from_coeffs(spec.d(), n, lifted.column(0).iter().copied().collect())
}

/// Betti numbers of the zoo manifolds.
pub fn oracle_betti(spec: &ManifoldSpec, k: usize) -> usize {
    let n = spec.n();
    if k > n {
        return 0;
    }
    match spec.kind {
        ManifoldKind::Sphere { .. } | ManifoldKind::S4 => usize::from(k == 0 || k == n),
        ManifoldKind::FlatTorus { n } => exterior::binomial(n, k),
        ManifoldKind::ProductSphere => [1, 0, 2, 0, 1][k],
        ManifoldKind::Cp2 => [1, 0, 1, 0, 1][k],
    }
}

/// An eigenvalue of the Hodge Laplacian with its multiplicity.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Eigenvalue {
    pub value: f64,
    pub multiplicity: usize,
}

/// Lowest distinct eigenvalues of Δ on k-forms, enough to cover `count` eigenvalues
/// counted with multiplicity.
pub fn oracle_spectrum(spec: &ManifoldSpec, k: usize, count: usize) -> Result<Vec<Eigenvalue>> {
    let n = spec.n();
    if k > n {
        return Err(Error::InvalidDegree { k, d: n });
    }
    let mut out: Vec<Eigenvalue> = Vec::new();
    let covered = |out: &Vec<Eigenvalue>| out.iter().map(|e| e.multiplicity).sum::<usize>();
    let unsupported = || Error::Unsupported(format!("spectrum of {} on {k}-forms", spec.name()));
    match spec.kind {
        ManifoldKind::Sphere { .. } | ManifoldKind::S4 => {
            let r = match spec.kind {
                ManifoldKind::Sphere { radius, .. } => radius,
                _ => 1.0,
            };
            if k == 0 || k == n {
                let mut l = 0usize;
                while covered(&out) < count {
                    let mult = exterior::binomial(n + l, n) - if l >= 2 { exterior::binomial(n + l - 2, n) } else { 0 };
                    out.push(Eigenvalue {
                        value: (l * (l + n - 1)) as f64 / (r * r),
                        multiplicity: mult,
                    });
                    l += 1;
                }
            } else if n == 2 && k == 1 {
                // exact and coexact parts each carry the l(l+1) spectrum, l ≥ 1
                let mut l = 1usize;
                while covered(&out) < count {
                    out.push(Eigenvalue {
                        value: (l * (l + 1)) as f64 / (r * r),
                        multiplicity: 2 * (2 * l + 1),
                    });
                    l += 1;
                }
            } else {
                return Err(unsupported());
            }
        }
        ManifoldKind::FlatTorus { n } => {
            let forms = exterior::binomial(n, k);
            let mut radius = 1i64;
            loop {
                let mut norms: Vec<i64> = Vec::new();
                lattice_norms(n, radius, &mut vec![0; n], 0, &mut norms);
                norms.sort_unstable();
                out.clear();
                for v in norms {
                    match out.last_mut() {
                        Some(e) if e.value == v as f64 => e.multiplicity += forms,
                        _ => out.push(Eigenvalue {
                            value: v as f64,
                            multiplicity: forms,
                        }),
                    }
                }
                // only norms ≤ radius² are complete
                out.retain(|e| e.value <= (radius * radius) as f64);
                if covered(&out) >= count {
                    break;
                }
                radius += 1;
            }
        }
        ManifoldKind::ProductSphere if k == 0 => {
            let lmax = 2 + (count as f64).sqrt() as usize;
            let mut all: Vec<(usize, usize)> = Vec::new();
            for a in 0..=lmax * 2 {
                for b in 0..=lmax * 2 {
                    all.push((a * (a + 1) + b * (b + 1), (2 * a + 1) * (2 * b + 1)));
                }
            }
            all.sort_unstable();
            let bound = lmax * (lmax + 1);
            for (v, mult) in all.into_iter().filter(|e| e.0 <= bound) {
                match out.last_mut() {
                    Some(e) if e.value == v as f64 => e.multiplicity += mult,
                    _ => out.push(Eigenvalue {
                        value: v as f64,
                        multiplicity: mult,
                    }),
                }
            }
        }
        _ => return Err(unsupported()),
    }
    let mut total = 0;
    out.retain(|e| {
        let keep = total < count;
        total += e.multiplicity;
        keep
    });
    Ok(out)
}

fn lattice_norms(n: usize, r: i64, cur: &mut Vec<i64>, pos: usize, out: &mut Vec<i64>) {
    if pos == n {
        out.push(cur.iter().map(|x| x * x).sum());
        return;
    }
    for v in -r..=r {
        cur[pos] = v;
        lattice_norms(n, r, cur, pos + 1, out);
    }
}

/// Expands an eigenvalue list into a flat ascending list with repetitions.
pub fn flatten_spectrum(spectrum: &[Eigenvalue]) -> Vec<f64> {
    spectrum
        .iter()
        .flat_map(|e| std::iter::repeat_n(e.value, e.multiplicity))
        .collect()
}

/// Oriented simplex with a real coefficient.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Simplex {
    pub vertices: Vec<Vec<f64>>,
    pub coeff: f64,
}

/// Formal sum of oriented q-simplices in R^d.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SimplicialChain {
    pub degree: usize,
    pub simplices: Vec<Simplex>,
    #[serde(default)]
    pub name: String,
    #[serde(skip)]
    pub refinement: usize,
}

impl SimplicialChain {
    pub fn validate(&self) -> Result<()> {
        for (i, s) in self.simplices.iter().enumerate() {
            if s.vertices.len() != self.degree + 1 {
                return Err(Error::Format {
                    location: format!("simplex {i}"),
                    message: format!("expected {} vertices", self.degree + 1),
                });
            }
            let d = s.vertices[0].len();
            if s.vertices
                .iter()
                .any(|v| v.len() != d || v.iter().any(|x| !x.is_finite()))
                || !s.coeff.is_finite()
            {
                return Err(Error::Format {
                    location: format!("simplex {i}"),
                    message: "ragged or non-finite data".into(),
                });
            }
        }
        Ok(())
    }

    pub fn ambient_dim(&self) -> Option<usize> {
        self.simplices.first().map(|s| s.vertices[0].len())
    }
}

fn torus_point(angles: &[f64]) -> Vec<f64> {
    angles.iter().flat_map(|a| [a.cos(), a.sin()]).collect()
}

/// Homology generators of degree q (closed chains with real coefficients).
pub fn oracle_cycles(spec: &ManifoldSpec, q: usize, refinement: usize) -> Result<Vec<SimplicialChain>> {
    let n = spec.n();
    let refinement = refinement.max(1);
    if q > n {
        return Ok(Vec::new());
    }
    if q == 0 {
        let base = base_point(spec);
        return Ok(vec![SimplicialChain {
            degree: 0,
            simplices: vec![Simplex {
                vertices: vec![base],
                coeff: 1.0,
            }],
            name: "point".into(),
            refinement,
        }]);
    }
    if oracle_betti(spec, q) == 0 {
        return Ok(Vec::new());
    }
    let step = 2.0 * PI / refinement as f64;
    match spec.kind {
        ManifoldKind::FlatTorus { n } if q == 1 => Ok((0..n)
            .map(|axis| {
                let simplices = (0..refinement)
                    .map(|s| {
                        let mut a = vec![0.0; n];
                        let mut b = vec![0.0; n];
                        a[axis] = s as f64 * step;
                        b[axis] = (s + 1) as f64 * step;
                        Simplex {
                            vertices: vec![torus_point(&a), torus_point(&b)],
                            coeff: 1.0,
                        }
                    })
                    .collect();
                SimplicialChain {
                    degree: 1,
                    simplices,
                    name: format!("theta{axis}-loop"),
                    refinement,
                }
            })
            .collect()),
        ManifoldKind::FlatTorus { n } if q == 2 => {
            let mut out = Vec::new();
            exterior::for_each_subset(n, 2, |pair| {
                let (i, j) = (pair[0], pair[1]);
                let at = |a: usize, b: usize| {
                    let mut ang = vec![0.0; n];
                    ang[i] = a as f64 * step;
                    ang[j] = b as f64 * step;
                    torus_point(&ang)
                };
                let mut simplices = Vec::with_capacity(2 * refinement * refinement);
                for a in 0..refinement {
                    for b in 0..refinement {
                        simplices.push(Simplex {
                            vertices: vec![at(a, b), at(a + 1, b), at(a + 1, b + 1)],
                            coeff: 1.0,
                        });
                        simplices.push(Simplex {
                            vertices: vec![at(a, b), at(a + 1, b + 1), at(a, b + 1)],
                            coeff: 1.0,
                        });
                    }
                }
                out.push(SimplicialChain {
                    degree: 2,
                    simplices,
                    name: format!("theta{i}-theta{j}-torus"),
                    refinement,
                });
            });
            Ok(out)
        }
        ManifoldKind::Sphere { n: 2, radius } if q == 2 => Ok(vec![SimplicialChain {
            degree: 2,
            simplices: octahedral_sphere(refinement, radius),
            name: "fundamental".into(),
            refinement,
        }]),
        ManifoldKind::ProductSphere if q == 2 => {
            let pole = [0.0, 0.0, 1.0];
            let embed = |first: bool| {
                octahedral_sphere(refinement, 1.0)
                    .into_iter()
                    .map(|s| Simplex {
                        vertices: s
                            .vertices
                            .iter()
                            .map(|v| {
                                if first {
                                    [v.as_slice(), &pole].concat()
                                } else {
                                    [&pole, v.as_slice()].concat()
                                }
                            })
                            .collect(),
                        coeff: s.coeff,
                    })
                    .collect()
            };
            Ok(vec![
                SimplicialChain {
                    degree: 2,
                    simplices: embed(true),
                    name: "first-factor".into(),
                    refinement,
                },
                SimplicialChain {
                    degree: 2,
                    simplices: embed(false),
                    name: "second-factor".into(),
                    refinement,
                },
            ])
        }
        _ => Err(Error::Unsupported(format!("degree-{q} cycles on {}", spec.name()))),
    }
}

fn base_point(spec: &ManifoldSpec) -> Vec<f64> {
    let d = spec.d();
    match spec.kind {
        ManifoldKind::Sphere { radius, .. } => {
            let mut p = vec![0.0; d];
            p[d - 1] = radius;
            p
        }
        ManifoldKind::S4 => {
            let mut p = vec![0.0; d];
            p[d - 1] = 1.0;
            p
        }
        ManifoldKind::FlatTorus { n } => torus_point(&vec![0.0; n]),
        ManifoldKind::ProductSphere => vec![0.0, 0.0, 1.0, 0.0, 0.0, 1.0],
        ManifoldKind::Cp2 => {
            let mut p = vec![0.0; 9];
            p[0] = 1.0;
            p
        }
    }
}

/// Octahedron with each face split into `level²` triangles, pushed radially onto
/// the sphere; faces are oriented by the outward normal.
fn octahedral_sphere(level: usize, radius: f64) -> Vec<Simplex> {
    let axes: [[f64; 3]; 6] = [
        [1.0, 0.0, 0.0],
        [-1.0, 0.0, 0.0],
        [0.0, 1.0, 0.0],
        [0.0, -1.0, 0.0],
        [0.0, 0.0, 1.0],
        [0.0, 0.0, -1.0],
    ];
    let mut out = Vec::new();
    for &xi in &[0usize, 1] {
        for &yi in &[2usize, 3] {
            for &zi in &[4usize, 5] {
                let (a, b, c) = (axes[xi], axes[yi], axes[zi]);
                let at = |i: usize, j: usize| -> Vec<f64> {
                    let (u, v) = (i as f64 / level as f64, j as f64 / level as f64);
                    let w = 1.0 - u - v;
                    let p: Vec<f64> = (0..3).map(|k| w * a[k] + u * b[k] + v * c[k]).collect();
                    let r = norm(&p);
                    p.iter().map(|x| radius * x / r).collect()
                };
                let mut tris = Vec::new();
                for i in 0..level {
                    for j in 0..level - i {
                        tris.push([(i, j), (i + 1, j), (i, j + 1)]);
                        if i + j + 1 < level {
                            tris.push([(i + 1, j), (i + 1, j + 1), (i, j + 1)]);
                        }
                    }
                }
                for t in tris {
                    let mut verts: Vec<Vec<f64>> = t.iter().map(|&(i, j)| at(i, j)).collect();
                    let e1: Vec<f64> = (0..3).map(|k| verts[1][k] - verts[0][k]).collect();
                    let e2: Vec<f64> = (0..3).map(|k| verts[2][k] - verts[0][k]).collect();
                    let cross = [
                        e1[1] * e2[2] - e1[2] * e2[1],
                        e1[2] * e2[0] - e1[0] * e2[2],
                        e1[0] * e2[1] - e1[1] * e2[0],
                    ];
                    if dot(&cross, &verts[0]) < 0.0 {
                        verts.swap(1, 2);
                    }
                    out.push(Simplex {
                        vertices: verts,
                        coeff: 1.0,
                    });
                }
            }
        }
    }
    out
}

/// Harmonic k-form number `index` at p, in ambient coordinates.
///
/// Degree 0 is the L²-normalized constant, the top degree is vol/vol(M), and the
/// torus 1- and 2-forms are the coordinate forms dual to [`oracle_cycles`].
pub fn oracle_harmonic_form(spec: &ManifoldSpec, k: usize, index: usize, p: &[f64]) -> Result<KVector> {
    spec.check_on(p)?;
    let n = spec.n();
    let d = spec.d();
    let b = oracle_betti(spec, k);
    if index >= b {
        return Err(Error::InvalidConfig(format!(
            "{} has {b} harmonic {k}-forms, index {index} requested",
            spec.name()
        )));
    }
    if k == 0 {
        return Ok(KVector::scalar(d, 1.0 / spec.volume().sqrt()));
    }
    if k == n {
        return Ok(oracle_volume_vector(spec, p)?.scaled(1.0 / spec.volume()));
    }
    match spec.kind {
        ManifoldKind::FlatTorus { n } => {
            let frame = torus_frame(p);
            let sets = exterior::subsets(n, k);
            let mut form = KVector::scalar(d, (2.0 * PI).powi(-(k as i32)));
            for &axis in &sets[index] {
                let col: Vec<f64> = frame.column(axis).iter().copied().collect();
                form = exterior::wedge(&form, &KVector::vector(&col))?;
            }
            Ok(form)
        }
        ManifoldKind::ProductSphere if k == 2 => {
            let frame = oracle_oriented_frame(&ManifoldSpec::product_sphere(), p)?;
            let c0 = frame.column(2 * index).iter().copied().collect::<Vec<_>>();
            let c1 = frame.column(2 * index + 1).iter().copied().collect::<Vec<_>>();
            Ok(exterior::wedge(&KVector::vector(&c0), &KVector::vector(&c1))?.scaled(1.0 / (4.0 * PI)))
        }
        _ => Err(Error::Unsupported(format!("harmonic {k}-forms on {}", spec.name()))),
    }
}
