//! Empirical Hodge Laplacian on k-forms sampled at a point cloud.
//!
//! Forms are stored in compressed tangential coordinates y_i = (Λ^kV_i)ᵀ ω_i, one
//! C(n,k)-block per sample. In these coordinates the operator is the symmetric
//! block matrix
//!
//!   (Δ̂y)_i = Σ_{j≠i} w_ij (y_i − Λ^k(V_iᵀV_j) y_j) + Z_i y_i,
//!
//! with w_ij = vol/(m t_eff) Φ_t χ_δ(x_i, x_j) and Z_i the zero-order term. The
//! ambient operator is Λ^kV_i (Δ̂y)_i and annihilates every normal component.

pub mod eigen;

use std::io::Write;
use std::path::Path;

use nalgebra as na;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{self, SecondFundamentalField, ZeroOrderTerm};
use crate::error::{Error, Result};
use crate::exterior::{binomial, KVector, PowerPlan};
use crate::graph::NeighborGraph;
use crate::kernel::{dist_sq, KernelConfig};
use crate::tangent::ProjectionField;
use crate::zoo::PointCloud;

pub use eigen::{smallest_eigenpairs, EigenMethod, EigenOptions, EigenResult, LinearOperator};

/// Eigenvalue ratio separating the harmonic cluster from the rest.
pub const KERNEL_GAP_RATIO: f64 = 10.0;
/// Floor for the denominator of the gap ratio.
pub const KERNEL_EPSILON: f64 = 1e-9;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HodgeOptions {
    pub zero_order: ZeroOrderTerm,
    /// Edge blocks Λ^k(V_iᵀV_j) are cached when they fit in this many bytes.
    pub block_cache_bytes: usize,
    /// Largest m·C(d,k) accepted by [`HodgeOperator::assemble`].
    pub assembly_cap: usize,
}

impl Default for HodgeOptions {
    fn default() -> Self {
        Self {
            zero_order: ZeroOrderTerm::default(),
            block_cache_bytes: 1 << 30,
            assembly_cap: 20_000,
        }
    }
}

/// One ambient k-vector per sample, stored as an m × C(d,k) row-major array.
#[derive(Clone, Debug, PartialEq)]
pub struct DiscreteKForm {
    dim: usize,
    degree: usize,
    values: Vec<f64>,
}

impl DiscreteKForm {
    pub fn zeros(m: usize, dim: usize, degree: usize) -> Result<Self> {
        if degree > dim {
            return Err(Error::InvalidDegree { k: degree, d: dim });
        }
        Ok(Self {
            dim,
            degree,
            values: vec![0.0; m * binomial(dim, degree)],
        })
    }

    pub fn from_values(dim: usize, degree: usize, values: Vec<f64>) -> Result<Self> {
        if degree > dim {
            return Err(Error::InvalidDegree { k: degree, d: dim });
        }
        let width = binomial(dim, degree);
        if !values.len().is_multiple_of(width) {
            return Err(Error::DimensionMismatch {
                expected: width,
                found: values.len() % width,
            });
        }
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Format {
                location: format!("sample {}", i / width),
                message: "non-finite form value".into(),
            });
        }
        Ok(Self { dim, degree, values })
    }

    pub fn from_kvectors(values: &[KVector]) -> Result<Self> {
        let first = values.first().ok_or(Error::InvalidConfig("empty form".into()))?;
        let (dim, degree) = (first.dim(), first.degree());
        let mut flat = Vec::with_capacity(values.len() * binomial(dim, degree));
        for v in values {
            if v.degree() != degree {
                return Err(Error::DegreeMismatch {
                    expected: degree,
                    found: v.degree(),
                });
            }
            flat.extend_from_slice(v.coeffs());
        }
        Self::from_values(dim, degree, flat)
    }

    pub fn len(&self) -> usize {
        self.values.len() / self.width()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn width(&self) -> usize {
        binomial(self.dim, self.degree)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn value(&self, i: usize) -> &[f64] {
        let w = self.width();
        &self.values[i * w..(i + 1) * w]
    }

    pub fn kvector(&self, i: usize) -> KVector {
        KVector::from_coeffs(self.dim, self.degree, self.value(i).to_vec()).expect("consistent shape")
    }

    /// (vol/m)-weighted inner product.
    pub fn inner(&self, other: &Self, vol: f64) -> f64 {
        let m = self.len() as f64;
        self.values.iter().zip(&other.values).map(|(a, b)| a * b).sum::<f64>() * vol / m
    }

    /// Largest ‖ω_i − Λ^kΠ̂_i ω_i‖ relative to max ‖ω_i‖.
    pub fn tangency_defect(&self, op: &HodgeOperator<'_>) -> f64 {
        let back = op.push_up(&op.pull_down(self).expect("shape checked by caller"));
        let scale = self.values.iter().fold(0.0f64, |a, v| a.max(v.abs())).max(1e-300);
        self.values
            .iter()
            .zip(&back.values)
            .fold(0.0f64, |a, (x, y)| a.max((x - y).abs()))
            / scale
    }

    /// True when every value lies in range(Λ^kΠ̂) to 1e-8.
    pub fn is_tangent(&self, op: &HodgeOperator<'_>) -> bool {
        self.tangency_defect(op) <= 1e-8
    }
}

/// Handle on Δ̂ for one degree. Borrowed state is never mutated.
pub struct HodgeOperator<'a> {
    cloud: &'a PointCloud,
    field: Option<&'a ProjectionField>,
    graph: &'a NeighborGraph,
    curvature: Option<&'a SecondFundamentalField>,
    config: KernelConfig,
    options: HodgeOptions,
    k: usize,
    n: usize,
    d: usize,
    block: usize,
    scale: f64,
    diag: Vec<f64>,
    zero: Vec<f64>,
    plan: PowerPlan,
    lift_plan: PowerPlan,
    cache: Option<Vec<f64>>,
    row_offsets: Vec<usize>,
}

impl<'a> HodgeOperator<'a> {
    /// `field` may be omitted for k = 0; `curvature` is needed for a nonzero
    /// zero-order term when k ≥ 1.
    pub fn new(
        cloud: &'a PointCloud,
        field: Option<&'a ProjectionField>,
        graph: &'a NeighborGraph,
        config: &KernelConfig,
        curvature: Option<&'a SecondFundamentalField>,
        k: usize,
        options: HodgeOptions,
    ) -> Result<Self> {
        config.validate()?;
        let m = cloud.len();
        let n = cloud.intrinsic_dim();
        let d = cloud.dim();
        if k > n {
            return Err(Error::InvalidDegree { k, d: n });
        }
        if graph.len() != m {
            return Err(Error::DimensionMismatch {
                expected: m,
                found: graph.len(),
            });
        }
        if let Some(f) = field {
            if f.len() != m || f.dim() != d || f.n() != n {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: f.len(),
                });
            }
        } else if k > 0 {
            return Err(Error::InvalidConfig(format!("degree {k} needs a projection field")));
        }
        let needs_curvature = k > 0 && options.zero_order != ZeroOrderTerm::None;
        if needs_curvature {
            match curvature {
                None => {
                    return Err(Error::InvalidConfig(
                        "the zero-order term needs the second fundamental form".into(),
                    ))
                }
                Some(c) if c.len() != m => {
                    return Err(Error::DimensionMismatch {
                        expected: m,
                        found: c.len(),
                    })
                }
                _ => {}
            }
        }
        let block = binomial(n, k);
        let scale = config.vol / (m as f64 * config.effective_t());
        let diag: Vec<f64> = (0..m)
            .map(|i| scale * graph.row(i).filter(|&(j, _)| j != i).map(|(_, w)| w).sum::<f64>())
            .collect();
        let mut zero = vec![0.0; m * block * block];
        if needs_curvature {
            let field = field.expect("checked above");
            let curv = curvature.expect("checked above");
            let blocks: Vec<Result<na::DMatrix<f64>>> = (0..m)
                .into_par_iter()
                .map(|i| {
                    curvature::zero_order_compressed(
                        curv.sym(i),
                        curv.mean_curvature(i),
                        &field.frame(i),
                        k,
                        options.zero_order,
                    )
                })
                .collect();
            for (i, z) in blocks.into_iter().enumerate() {
                let z = z?;
                for a in 0..block {
                    for b in 0..block {
                        zero[(i * block + a) * block + b] = z[(a, b)];
                    }
                }
            }
        }
        let mut op = Self {
            cloud,
            field,
            graph,
            curvature,
            config: config.clone(),
            options,
            k,
            n,
            d,
            block,
            scale,
            diag,
            zero,
            plan: PowerPlan::new(n, n, k),
            lift_plan: PowerPlan::new(d, n, k),
            cache: None,
            row_offsets: (0..=m)
                .scan(0usize, |acc, i| {
                    let here = *acc;
                    if i < m {
                        *acc += graph.degree(i);
                    }
                    Some(here)
                })
                .collect(),
        };
        let bytes = graph.edge_count() * block * block * 8;
        if k > 0 && bytes <= op.options.block_cache_bytes {
            let per_row: Vec<Vec<f64>> = (0..m)
                .into_par_iter()
                .map(|i| {
                    let mut out = vec![0.0; graph.degree(i) * block * block];
                    for (e, &j) in graph.neighbors(i).iter().enumerate() {
                        op.edge_block_into(i, j as usize, &mut out[e * block * block..(e + 1) * block * block]);
                    }
                    out
                })
                .collect();
            op.cache = Some(per_row.concat());
        }
        Ok(op)
    }

    pub fn degree(&self) -> usize {
        self.k
    }

    pub fn ambient_dim(&self) -> usize {
        self.d
    }

    pub fn block_size(&self) -> usize {
        self.block
    }

    pub fn len(&self) -> usize {
        self.cloud.len()
    }

    pub fn is_empty(&self) -> bool {
        self.cloud.is_empty()
    }

    pub fn config(&self) -> &KernelConfig {
        &self.config
    }

    pub fn options(&self) -> &HodgeOptions {
        &self.options
    }

    /// vol/(m t_eff).
    pub fn weight_scale(&self) -> f64 {
        self.scale
    }

    /// Compressed zero-order block at sample i.
    pub fn zero_order_block(&self, i: usize) -> na::DMatrix<f64> {
        let b = self.block;
        na::DMatrix::from_row_slice(b, b, &self.zero[i * b * b..(i + 1) * b * b])
    }

    /// Λ^k(V_iᵀ V_j), row-major.
    fn edge_block_into(&self, i: usize, j: usize, out: &mut [f64]) {
        if self.k == 0 {
            out[0] = 1.0;
            return;
        }
        let field = self.field.expect("k > 0 has a field");
        let (vi, vj) = (field.frame_slice(i), field.frame_slice(j));
        let n = self.n;
        let mut g = [0.0f64; 64];
        for a in 0..n {
            for b in 0..n {
                g[a * n + b] = (0..self.d).map(|r| vi[r * n + a] * vj[r * n + b]).sum();
            }
        }
        self.plan.fill(|a, b| g[a * n + b], out);
    }

    /// Λ^k V_i as a C(d,k) × C(n,k) matrix.
    pub fn lift_at(&self, i: usize) -> na::DMatrix<f64> {
        if self.k == 0 {
            return na::DMatrix::from_element(1, 1, 1.0);
        }
        let field = self.field.expect("k > 0 has a field");
        let v = field.frame_slice(i);
        let n = self.n;
        let mut buf = vec![0.0; self.lift_plan.out_rows() * self.lift_plan.out_cols()];
        self.lift_plan.fill(|r, c| v[r * n + c], &mut buf);
        na::DMatrix::from_row_slice(self.lift_plan.out_rows(), self.lift_plan.out_cols(), &buf)
    }

    /// Compressed action, optionally without the zero-order term.
    fn apply_rows(&self, x: &[f64], y: &mut [f64], with_zero: bool) {
        let b = self.block;
        let bb = b * b;
        y.par_chunks_mut(b).enumerate().for_each(|(i, yi)| {
            let xi = &x[i * b..(i + 1) * b];
            for a in 0..b {
                yi[a] = self.diag[i] * xi[a];
            }
            if with_zero {
                let z = &self.zero[i * bb..(i + 1) * bb];
                for a in 0..b {
                    yi[a] += (0..b).map(|c| z[a * b + c] * xi[c]).sum::<f64>();
                }
            }
            let mut scratch = vec![0.0; bb];
            let row_start = self.row_offsets[i];
            for (e, (j, w)) in self.graph.row(i).enumerate() {
                if j == i {
                    continue;
                }
                let blk: &[f64] = match &self.cache {
                    Some(c) => &c[(row_start + e) * bb..(row_start + e + 1) * bb],
                    None => {
                        self.edge_block_into(i, j, &mut scratch);
                        &scratch
                    }
                };
                let xj = &x[j * b..(j + 1) * b];
                let wij = self.scale * w;
                for a in 0..b {
                    yi[a] -= wij * (0..b).map(|c| blk[a * b + c] * xj[c]).sum::<f64>();
                }
            }
        });
    }

    /// Δ̂ in compressed coordinates.
    pub fn apply_compressed(&self, x: &[f64], y: &mut [f64]) {
        self.apply_rows(x, y, true);
    }

    /// L̂ (diffusion part only) in compressed coordinates.
    pub fn apply_diffusion_compressed(&self, x: &[f64], y: &mut [f64]) {
        self.apply_rows(x, y, false);
    }

    /// y_i = (Λ^kV_i)ᵀ ω_i.
    pub fn pull_down(&self, form: &DiscreteKForm) -> Result<Vec<f64>> {
        self.check_form(form)?;
        let b = self.block;
        let mut y = vec![0.0; self.len() * b];
        y.par_chunks_mut(b).enumerate().for_each(|(i, yi)| {
            let l = self.lift_at(i);
            let w = form.value(i);
            for c in 0..b {
                yi[c] = (0..l.nrows()).map(|r| l[(r, c)] * w[r]).sum();
            }
        });
        Ok(y)
    }

    /// ω_i = Λ^kV_i y_i.
    pub fn push_up(&self, y: &[f64]) -> DiscreteKForm {
        let b = self.block;
        let width = binomial(self.d, self.k);
        let mut values = vec![0.0; self.len() * width];
        values.par_chunks_mut(width).enumerate().for_each(|(i, wi)| {
            let l = self.lift_at(i);
            let yi = &y[i * b..(i + 1) * b];
            for r in 0..width {
                wi[r] = (0..b).map(|c| l[(r, c)] * yi[c]).sum();
            }
        });
        DiscreteKForm {
            dim: self.d,
            degree: self.k,
            values,
        }
    }

    fn check_form(&self, form: &DiscreteKForm) -> Result<()> {
        if form.degree() != self.k {
            return Err(Error::DegreeMismatch {
                expected: self.k,
                found: form.degree(),
            });
        }
        if form.dim() != self.d || form.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len(),
                found: form.len(),
            });
        }
        Ok(())
    }

    /// Δ̂ω = L̂ω + Ẑω on ambient forms.
    pub fn apply(&self, form: &DiscreteKForm) -> Result<DiscreteKForm> {
        let x = self.pull_down(form)?;
        let mut y = vec![0.0; x.len()];
        self.apply_compressed(&x, &mut y);
        Ok(self.push_up(&y))
    }

    /// (L̂ω)(x_j) alone.
    pub fn apply_diffusion(&self, form: &DiscreteKForm, j: usize) -> Result<KVector> {
        self.check_form(form)?;
        let b = self.block;
        let pull = |i: usize| -> Vec<f64> {
            let l = self.lift_at(i);
            let w = form.value(i);
            (0..b).map(|c| (0..l.nrows()).map(|r| l[(r, c)] * w[r]).sum()).collect()
        };
        let yj = pull(j);
        let mut out: Vec<f64> = yj.iter().map(|v| self.diag[j] * v).collect();
        let mut blk = vec![0.0; b * b];
        for (i, w) in self.graph.row(j) {
            if i == j {
                continue;
            }
            self.edge_block_into(j, i, &mut blk);
            let yi = pull(i);
            for a in 0..b {
                out[a] -= self.scale * w * (0..b).map(|c| blk[a * b + c] * yi[c]).sum::<f64>();
            }
        }
        let l = self.lift_at(j);
        let amb = &l * na::DVector::from_vec(out);
        KVector::from_coeffs(self.d, self.k, amb.as_slice().to_vec())
    }

    /// Explicit sparse block matrix in compressed or ambient coordinates.
    pub fn assemble(&self, coords: Coordinates, symmetrize: bool) -> Result<BlockMatrix> {
        let width = match coords {
            Coordinates::Compressed => self.block,
            Coordinates::Ambient => binomial(self.d, self.k),
        };
        let required = self.len() * binomial(self.d, self.k);
        if required > self.options.assembly_cap {
            return Err(Error::MemoryCap {
                required,
                cap: self.options.assembly_cap,
            });
        }
        let b = self.block;
        let rows: Vec<(Vec<usize>, Vec<f64>)> = (0..self.len())
            .into_par_iter()
            .map(|i| {
                let li = match coords {
                    Coordinates::Ambient => Some(self.lift_at(i)),
                    Coordinates::Compressed => None,
                };
                let mut cols = Vec::with_capacity(self.graph.degree(i));
                let mut data = Vec::with_capacity(self.graph.degree(i) * width * width);
                let mut blk = vec![0.0; b * b];
                for (j, w) in self.graph.row(i) {
                    let core = if j == i {
                        let mut m = self.zero_order_block(i);
                        for a in 0..b {
                            m[(a, a)] += self.diag[i];
                        }
                        m
                    } else {
                        self.edge_block_into(i, j, &mut blk);
                        na::DMatrix::from_row_slice(b, b, &blk) * (-self.scale * w)
                    };
                    let full = match &li {
                        Some(li) => li * core * self.lift_at(j).transpose(),
                        None => core,
                    };
                    cols.push(j);
                    for r in 0..width {
                        for c in 0..width {
                            data.push(full[(r, c)]);
                        }
                    }
                }
                (cols, data)
            })
            .collect();
        let mut offsets = vec![0];
        let mut cols = Vec::new();
        let mut blocks = Vec::new();
        for (c, d) in rows {
            cols.extend(c);
            blocks.extend(d);
            offsets.push(cols.len());
        }
        let mut mat = BlockMatrix {
            block_rows: self.len(),
            width,
            offsets,
            cols,
            blocks,
        };
        if symmetrize {
            mat.symmetrize();
        }
        Ok(mat)
    }

    /// Scalar factor of the local degree operator: vol/(m t_eff) Σ_j Φ_t χ_δ(x, x_j).
    pub fn degree_scalar(&self, x: &[f64]) -> f64 {
        self.scale
            * self
                .cloud
                .iter()
                .map(|p| self.config.weight_sq(dist_sq(x, p)))
                .sum::<f64>()
    }

    /// Frame at an arbitrary point; None for k = 0.
    fn frame_at(&self, x: &[f64]) -> Result<Option<na::DMatrix<f64>>> {
        if x.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: x.len(),
            });
        }
        if self.k == 0 {
            return Ok(None);
        }
        let field = self.field.expect("k > 0 has a field");
        Ok(Some(field.evaluate(self.cloud, &self.config, x)?.frame))
    }

    /// d̂(x) Λ^kΠ̂_x as a C(d,k) × C(d,k) matrix.
    pub fn degree_operator(&self, x: &[f64]) -> Result<na::DMatrix<f64>> {
        let s = self.degree_scalar(x);
        let l = self.local_lift(self.frame_at(x)?.as_ref());
        Ok(&l * l.transpose() * s)
    }

    fn local_lift(&self, frame: Option<&na::DMatrix<f64>>) -> na::DMatrix<f64> {
        match frame {
            None => na::DMatrix::from_element(1, 1, 1.0),
            Some(v) => self.lift_plan.apply(v),
        }
    }

    /// V̂(x) = d̂(x) I + Ẑ(x) − λ I on the compressed tangent k-plane at x.
    pub fn shift_operator(&self, x: &[f64], lambda: f64) -> Result<ShiftOperator> {
        let frame = self.frame_at(x)?;
        let b = self.block;
        let mut v = na::DMatrix::<f64>::identity(b, b) * (self.degree_scalar(x) - lambda);
        if self.k > 0 && self.options.zero_order != ZeroOrderTerm::None {
            let curv = self.curvature.expect("checked at construction");
            let field = self.field.expect("k > 0 has a field");
            let f = frame.as_ref().expect("k > 0");
            let bmap = curvature::empirical_b(self.cloud, field, &self.config, x, f, curv.normalization()).map_err(
                |e| match e {
                    Error::IsolatedPoint { .. } => Error::BandwidthTooLarge { min_eigenvalue: 0.0 },
                    other => other,
                },
            )?;
            let bsym = curvature::symmetrize(&bmap);
            let h = curvature::mean_curvature(&bsym);
            v += curvature::zero_order_compressed(&bsym, &h, f, self.k, self.options.zero_order)?;
        }
        let v = (&v + v.transpose()) * 0.5;
        let min = v.symmetric_eigenvalues().min();
        if !(min > 0.0) {
            return Err(Error::BandwidthTooLarge { min_eigenvalue: min });
        }
        let inverse = v
            .clone()
            .try_inverse()
            .ok_or(Error::BandwidthTooLarge { min_eigenvalue: min })?;
        Ok(ShiftOperator {
            lift: self.local_lift(frame.as_ref()),
            frame,
            matrix: v,
            inverse,
            min_eigenvalue: min,
        })
    }

    /// K̂[y](x) in the compressed coordinates of the frame at x.
    fn kernel_sum(&self, frame: Option<&na::DMatrix<f64>>, x: &[f64], y: &[f64]) -> na::DVector<f64> {
        let b = self.block;
        let mut out = na::DVector::zeros(b);
        let mut blk = vec![0.0; b * b];
        for (j, p) in self.cloud.iter().enumerate() {
            let w = self.config.weight_sq(dist_sq(x, p));
            if w == 0.0 {
                continue;
            }
            let yj = &y[j * b..(j + 1) * b];
            match frame {
                None => out[0] += self.scale * w * yj[0],
                Some(v) => {
                    let field = self.field.expect("k > 0 has a field");
                    let vj = field.frame_slice(j);
                    let n = self.n;
                    let g =
                        na::DMatrix::from_fn(n, n, |a, c| (0..self.d).map(|r| v[(r, a)] * vj[r * n + c]).sum::<f64>());
                    self.plan.fill(|a, c| g[(a, c)], &mut blk);
                    for a in 0..b {
                        out[a] += self.scale * w * (0..b).map(|c| blk[a * b + c] * yj[c]).sum::<f64>();
                    }
                }
            }
        }
        out
    }

    /// ω̂(x) = V̂(x)⁻¹ K̂[v](x) for a compressed eigenvector v with eigenvalue λ.
    pub fn nystrom_extend(&self, y: &[f64], lambda: f64, x: &[f64]) -> Result<KVector> {
        if y.len() != self.len() * self.block {
            return Err(Error::DimensionMismatch {
                expected: self.len() * self.block,
                found: y.len(),
            });
        }
        let shift = self.shift_operator(x, lambda)?;
        let rhs = self.kernel_sum(shift.frame.as_ref(), x, y);
        let local = &shift.inverse * rhs;
        let amb = &shift.lift * local;
        KVector::from_coeffs(self.d, self.k, amb.as_slice().to_vec())
    }
}

impl LinearOperator for HodgeOperator<'_> {
    fn size(&self) -> usize {
        self.len() * self.block
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.apply_compressed(x, y);
    }

    fn dense(&self) -> na::DMatrix<f64> {
        match self.assemble(Coordinates::Compressed, true) {
            Ok(a) => a.to_dense(),
            Err(_) => eigen::to_dense(self),
        }
    }
}

/// The diffusion part L̂ of a Hodge operator as a linear operator.
pub struct Diffusion<'b, 'a>(pub &'b HodgeOperator<'a>);

impl LinearOperator for Diffusion<'_, '_> {
    fn size(&self) -> usize {
        self.0.len() * self.0.block
    }

    fn apply(&self, x: &[f64], y: &mut [f64]) {
        self.0.apply_diffusion_compressed(x, y);
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Coordinates {
    /// C(n,k) tangent coordinates per sample.
    Compressed,
    /// C(d,k) ambient coordinates per sample.
    Ambient,
}

/// Block-CSR matrix with square blocks of side `width`.
#[derive(Clone, Debug)]
pub struct BlockMatrix {
    block_rows: usize,
    width: usize,
    offsets: Vec<usize>,
    cols: Vec<usize>,
    blocks: Vec<f64>,
}

impl BlockMatrix {
    pub fn size(&self) -> usize {
        self.block_rows * self.width
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn block_count(&self) -> usize {
        self.cols.len()
    }

    /// Block (i, j) if stored.
    pub fn block(&self, i: usize, j: usize) -> Option<na::DMatrix<f64>> {
        let w = self.width;
        (self.offsets[i]..self.offsets[i + 1])
            .find(|&e| self.cols[e] == j)
            .map(|e| na::DMatrix::from_row_slice(w, w, &self.blocks[e * w * w..(e + 1) * w * w]))
    }

    pub fn matvec(&self, x: &[f64], y: &mut [f64]) {
        let w = self.width;
        y.par_chunks_mut(w).enumerate().for_each(|(i, yi)| {
            yi.iter_mut().for_each(|v| *v = 0.0);
            for e in self.offsets[i]..self.offsets[i + 1] {
                let j = self.cols[e];
                let blk = &self.blocks[e * w * w..(e + 1) * w * w];
                for a in 0..w {
                    yi[a] += (0..w).map(|c| blk[a * w + c] * x[j * w + c]).sum::<f64>();
                }
            }
        });
    }

    pub fn to_dense(&self) -> na::DMatrix<f64> {
        let w = self.width;
        let mut out = na::DMatrix::zeros(self.size(), self.size());
        for i in 0..self.block_rows {
            for e in self.offsets[i]..self.offsets[i + 1] {
                let j = self.cols[e];
                for a in 0..w {
                    for c in 0..w {
                        out[(i * w + a, j * w + c)] = self.blocks[e * w * w + a * w + c];
                    }
                }
            }
        }
        out
    }

    pub fn max_abs(&self) -> f64 {
        self.blocks.iter().fold(0.0f64, |a, v| a.max(v.abs()))
    }

    /// max |A_ab − A_ba| / max |A|.
    pub fn relative_asymmetry(&self) -> f64 {
        let w = self.width;
        let mut worst = 0.0f64;
        for i in 0..self.block_rows {
            for e in self.offsets[i]..self.offsets[i + 1] {
                let j = self.cols[e];
                let back = (self.offsets[j]..self.offsets[j + 1]).find(|&f| self.cols[f] == i);
                for a in 0..w {
                    for c in 0..w {
                        let x = self.blocks[e * w * w + a * w + c];
                        let y = back.map_or(0.0, |f| self.blocks[f * w * w + c * w + a]);
                        worst = worst.max((x - y).abs());
                    }
                }
            }
        }
        worst / self.max_abs().max(1e-300)
    }

    /// A ← (A + Aᵀ)/2 on the stored pattern (which is symmetric).
    pub fn symmetrize(&mut self) {
        let w = self.width;
        let orig = self.blocks.clone();
        for i in 0..self.block_rows {
            for e in self.offsets[i]..self.offsets[i + 1] {
                let j = self.cols[e];
                if let Some(f) = (self.offsets[j]..self.offsets[j + 1]).find(|&f| self.cols[f] == i) {
                    for a in 0..w {
                        for c in 0..w {
                            self.blocks[e * w * w + a * w + c] =
                                0.5 * (orig[e * w * w + a * w + c] + orig[f * w * w + c * w + a]);
                        }
                    }
                }
            }
        }
    }
}

/// V̂(x) and its inverse on the compressed tangent k-plane at a query point.
#[derive(Clone, Debug)]
pub struct ShiftOperator {
    frame: Option<na::DMatrix<f64>>,
    lift: na::DMatrix<f64>,
    pub matrix: na::DMatrix<f64>,
    pub inverse: na::DMatrix<f64>,
    pub min_eigenvalue: f64,
}

impl ShiftOperator {
    /// Λ^kV_x V̂⁻¹ (Λ^kV_x)ᵀ as a C(d,k) × C(d,k) matrix.
    pub fn ambient_inverse(&self) -> na::DMatrix<f64> {
        &self.lift * &self.inverse * self.lift.transpose()
    }

    /// Operator norm of V̂⁻¹.
    pub fn inverse_norm(&self) -> f64 {
        1.0 / self.min_eigenvalue
    }
}

/// Lowest eigenpairs of Δ̂ with diagnostics.
#[derive(Clone, Debug)]
pub struct SpectralPackage {
    pub k: usize,
    pub t: f64,
    pub m: usize,
    pub n: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    /// Compressed eigenvectors, orthonormal in the (vol/m)-weighted inner product.
    pub vectors: Vec<Vec<f64>>,
    pub kernel_dim: usize,
    pub gap_ratio: f64,
    /// Indices of eigenvalues below −10·tol·‖Δ̂‖.
    pub negative: Vec<usize>,
    pub outside_proved_regime: bool,
    pub method: EigenMethod,
    pub iterations: usize,
    pub vol: f64,
}

/// JSON export of a [`SpectralPackage`].
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralSummary {
    pub k: usize,
    pub t: f64,
    pub m: usize,
    pub eigenvalues: Vec<f64>,
    pub residuals: Vec<f64>,
    pub kernel_dim: usize,
    pub gap_ratio: f64,
    #[serde(default)]
    pub negative_eigenvalues: Vec<usize>,
    #[serde(default)]
    pub outside_proved_regime: bool,
}

/// Size b of the harmonic cluster and its gap ratio λ_{b+1}/max(|λ_b|, ε).
///
/// The largest ratio ≥ [`KERNEL_GAP_RATIO`] wins; (0, best ratio) when none qualifies.
pub fn kernel_dimension(values: &[f64]) -> (usize, f64) {
    let mut best = (0, 0.0f64);
    let mut best_any = 0.0f64;
    for b in 1..values.len() {
        let ratio = values[b] / values[b - 1].abs().max(KERNEL_EPSILON);
        best_any = best_any.max(ratio);
        if ratio >= KERNEL_GAP_RATIO && ratio > best.1 {
            best = (b, ratio);
        }
    }
    if best.0 == 0 {
        (0, best_any)
    } else {
        best
    }
}

/// Lowest `count` eigenpairs of Δ̂ on the tangential subspace.
pub fn eigensolve(op: &HodgeOperator<'_>, count: usize, options: &EigenOptions) -> Result<SpectralPackage> {
    let ambient = op.len() * binomial(op.d, op.k);
    let mut opts = options.clone();
    opts.dense_threshold = if ambient <= options.dense_threshold {
        usize::MAX
    } else {
        0
    };
    let res = smallest_eigenpairs(op, count, &opts)?;
    let vol = op.config.vol;
    let m = op.len();
    let factor = (m as f64 / vol).sqrt();
    let vectors: Vec<Vec<f64>> = res
        .vectors
        .into_iter()
        .map(|v| v.into_iter().map(|x| x * factor).collect())
        .collect();
    let (kernel_dim, gap_ratio) = kernel_dimension(&res.values);
    let scale = res.values.iter().fold(1.0f64, |a, v| a.max(v.abs()));
    let negative = res
        .values
        .iter()
        .enumerate()
        .filter(|(_, v)| **v < -10.0 * options.tol * scale)
        .map(|(i, _)| i)
        .collect::<Vec<_>>();
    if !negative.is_empty() {
        log::warn!("Δ̂ has {} negative eigenvalues", negative.len());
    }
    Ok(SpectralPackage {
        k: op.k,
        t: op.config.t,
        m,
        n: op.n,
        eigenvalues: res.values,
        residuals: res.residuals,
        vectors,
        kernel_dim,
        gap_ratio,
        negative,
        outside_proved_regime: op.n < 3 || op.config.scaling == "explicit",
        method: res.method,
        iterations: res.iterations,
        vol,
    })
}

impl SpectralPackage {
    pub fn summary(&self) -> SpectralSummary {
        SpectralSummary {
            k: self.k,
            t: self.t,
            m: self.m,
            eigenvalues: self.eigenvalues.clone(),
            residuals: self.residuals.clone(),
            kernel_dim: self.kernel_dim,
            gap_ratio: self.gap_ratio,
            negative_eigenvalues: self.negative.clone(),
            outside_proved_regime: self.outside_proved_regime,
        }
    }

    pub fn write_json(&self, path: &Path) -> Result<()> {
        let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
        serde_json::to_writer_pretty(&mut out, &self.summary())?;
        out.flush()?;
        Ok(())
    }

    /// Ambient eigenforms as an m × (count·C(d,k)) float64 matrix in the cloud binary format.
    pub fn write_vectors(&self, op: &HodgeOperator<'_>, path: &Path) -> Result<()> {
        let forms: Vec<DiscreteKForm> = self.vectors.iter().map(|v| op.push_up(v)).collect();
        let width = binomial(op.d, op.k);
        let cols = width * forms.len();
        let mut data = vec![0.0; self.m * cols];
        for (c, f) in forms.iter().enumerate() {
            for i in 0..self.m {
                data[i * cols + c * width..i * cols + (c + 1) * width].copy_from_slice(f.value(i));
            }
        }
        crate::io::write_binary_matrix(self.m, cols, self.k, &data, std::fs::File::create(path)?)
    }

    pub fn form(&self, op: &HodgeOperator<'_>, i: usize) -> DiscreteKForm {
        op.push_up(&self.vectors[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::build_graph;

    fn five_points() -> PointCloud {
        let a = 0.3f64;
        let rows = vec![
            vec![0.0, 0.0, 1.0],
            vec![a.sin(), 0.0, a.cos()],
            vec![0.0, a.sin(), a.cos()],
            vec![-a.sin(), 0.0, a.cos()],
            vec![0.0, -a.sin(), a.cos()],
        ];
        PointCloud::from_rows(&rows, 2).unwrap()
    }

    #[test]
    fn scalar_operator_is_the_kernel_graph_laplacian() {
        let cloud = five_points();
        let t = 0.05;
        let vol = 4.0 * std::f64::consts::PI;
        let cfg = KernelConfig::new(t, 2.0, 2, vol).unwrap();
        let graph = build_graph(&cloud, &cfg).unwrap();
        let op = HodgeOperator::new(&cloud, None, &graph, &cfg, None, 0, HodgeOptions::default()).unwrap();
        let a = op.assemble(Coordinates::Compressed, false).unwrap().to_dense();
        let s = vol / (5.0 * cfg.effective_t());
        for i in 0..5 {
            let mut row = 0.0;
            for j in 0..5 {
                let r2: f64 = (0..3).map(|c| (cloud.point(i)[c] - cloud.point(j)[c]).powi(2)).sum();
                let phi = (-r2 / (4.0 * t)).exp() / (4.0 * std::f64::consts::PI * t);
                if i != j {
                    assert!((a[(i, j)] + s * phi).abs() < 1e-12 * s);
                    row += s * phi;
                }
            }
            assert!((a[(i, i)] - row).abs() < 1e-12 * s);
            assert!(a.row(i).sum().abs() < 1e-12 * s);
        }
    }

    #[test]
    fn kernel_dimension_rule() {
        assert_eq!(kernel_dimension(&[1e-14, 2.0, 2.1, 2.2, 6.0]).0, 1);
        assert_eq!(kernel_dimension(&[0.01, 0.012, 0.015, 1.0, 1.1]).0, 3);
        let (b, ratio) = kernel_dimension(&[2.0, 2.1, 6.0, 6.2]);
        assert_eq!(b, 0);
        assert!((ratio - 6.0 / 2.1).abs() < 1e-12);
        // negative small values count by magnitude
        assert_eq!(kernel_dimension(&[-1e-3, 2e-3, 0.5]).0, 2);
    }

    #[test]
    fn block_matrix_symmetrize() {
        let mut m = BlockMatrix {
            block_rows: 2,
            width: 1,
            offsets: vec![0, 2, 4],
            cols: vec![0, 1, 0, 1],
            blocks: vec![1.0, 2.0, 4.0, 3.0],
        };
        assert!((m.relative_asymmetry() - 0.5).abs() < 1e-15);
        m.symmetrize();
        assert_eq!(m.to_dense(), na::DMatrix::from_row_slice(2, 2, &[1.0, 3.0, 3.0, 3.0]));
        assert_eq!(m.relative_asymmetry(), 0.0);
    }
}
