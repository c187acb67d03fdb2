//! Tangent spaces from kernel-weighted local covariance.

use nalgebra as na;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{self, NeighborGraph};
use crate::kernel::{dist_sq, KernelConfig};
use crate::zoo::PointCloud;

/// Default relative eigengap below which a spectrum counts as degenerate.
pub const DEFAULT_GAP_RATIO: f64 = 0.05;

/// (1/m) Σ_j Φ_t χ_δ(p, x_j) (x_j − p)(x_j − p)ᵀ over the whole cloud.
pub fn local_covariance(cloud: &PointCloud, p: &[f64], config: &KernelConfig) -> na::DMatrix<f64> {
    let d = cloud.dim();
    let mut acc = vec![0.0; d * d];
    let mut diff = vec![0.0; d];
    for x in cloud.iter() {
        let w = config.weight_sq(dist_sq(p, x));
        if w > 0.0 {
            accumulate_outer(&mut acc, &mut diff, x, p, w);
        }
    }
    finish_covariance(acc, d, cloud.len())
}

fn covariance_at_sample(cloud: &PointCloud, graph: &NeighborGraph, i: usize) -> na::DMatrix<f64> {
    let d = cloud.dim();
    let p = cloud.point(i);
    let mut acc = vec![0.0; d * d];
    let mut diff = vec![0.0; d];
    for (j, w) in graph.row(i) {
        if j != i {
            accumulate_outer(&mut acc, &mut diff, cloud.point(j), p, w);
        }
    }
    finish_covariance(acc, d, cloud.len())
}

#[inline]
fn accumulate_outer(acc: &mut [f64], diff: &mut [f64], x: &[f64], p: &[f64], w: f64) {
    let d = p.len();
    for k in 0..d {
        diff[k] = x[k] - p[k];
    }
    for a in 0..d {
        let s = w * diff[a];
        for b in a..d {
            acc[a * d + b] += s * diff[b];
        }
    }
}

fn finish_covariance(acc: Vec<f64>, d: usize, m: usize) -> na::DMatrix<f64> {
    let inv = 1.0 / m as f64;
    na::DMatrix::from_fn(d, d, |a, b| {
        let (lo, hi) = if a <= b { (a, b) } else { (b, a) };
        acc[lo * d + hi] * inv
    })
}

/// Top-n eigenvectors of a symmetric matrix with a deterministic sign.
#[derive(Clone, Debug)]
pub struct TangentFrame {
    /// d × n, column-orthonormal.
    pub frame: na::DMatrix<f64>,
    /// Eigenvalues in descending order.
    pub eigenvalues: Vec<f64>,
    /// λ_n − λ_{n+1}.
    pub gap: f64,
}

impl TangentFrame {
    pub fn projector(&self) -> na::DMatrix<f64> {
        &self.frame * self.frame.transpose()
    }

    fn degenerate(&self, gap_ratio: f64) -> bool {
        let n = self.frame.ncols();
        let lambda_n = self.eigenvalues[n - 1];
        !(self.gap > gap_ratio * lambda_n) || !(lambda_n > 0.0)
    }
}

fn eigen_frame(sigma: &na::DMatrix<f64>, n: usize) -> TangentFrame {
    let d = sigma.nrows();
    let eig = na::SymmetricEigen::new(sigma.clone());
    let mut order: Vec<usize> = (0..d).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]).then(a.cmp(&b)));
    let mut frame = na::DMatrix::zeros(d, n);
    for (c, &k) in order.iter().take(n).enumerate() {
        let mut v = eig.eigenvectors.column(k).into_owned();
        // largest |entry| positive, ties to the lower index
        let mut best = 0;
        for r in 1..d {
            if v[r].abs() > v[best].abs() + 1e-14 {
                best = r;
            }
        }
        if v[best] < 0.0 {
            v.neg_mut();
        }
        frame.set_column(c, &v);
    }
    let eigenvalues: Vec<f64> = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let next = if n < d { eigenvalues[n] } else { 0.0 };
    TangentFrame {
        frame,
        gap: eigenvalues[n - 1] - next,
        eigenvalues,
    }
}

/// Top-n eigenspace of a covariance; errors when λ_n − λ_{n+1} ≤ ε λ_n.
pub fn tangent_frame(sigma: &na::DMatrix<f64>, n: usize) -> Result<TangentFrame> {
    tangent_frame_with(sigma, n, DEFAULT_GAP_RATIO)
}

pub fn tangent_frame_with(sigma: &na::DMatrix<f64>, n: usize, gap_ratio: f64) -> Result<TangentFrame> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: sigma.ncols(),
        });
    }
    if n == 0 || n >= d {
        return Err(Error::InvalidDegree { k: n, d });
    }
    let tf = eigen_frame(sigma, n);
    if tf.degenerate(gap_ratio) {
        return Err(Error::DegenerateSpectrum {
            index: None,
            gap: tf.gap,
            threshold: gap_ratio * tf.eigenvalues[n - 1].max(0.0),
        });
    }
    Ok(tf)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProjectionOptions {
    pub gap_ratio: f64,
    /// Fail on the first degenerate sample instead of recording it.
    pub strict: bool,
    /// Run the duplicate and spacing checks.
    pub check_sampling: bool,
}

impl Default for ProjectionOptions {
    fn default() -> Self {
        Self {
            gap_ratio: DEFAULT_GAP_RATIO,
            strict: true,
            check_sampling: true,
        }
    }
}

/// Estimated tangent frames at every sample.
#[derive(Clone, Debug)]
pub struct ProjectionField {
    dim: usize,
    n: usize,
    /// Row-major d × n frames, one after another.
    frames: Vec<f64>,
    gaps: Vec<f64>,
    lambda_n: Vec<f64>,
    degenerate: Vec<usize>,
    gap_ratio: f64,
}

/// Frames at all samples, building the neighbour graph internally.
pub fn projection_field(cloud: &PointCloud, config: &KernelConfig) -> Result<ProjectionField> {
    let graph = graph::build_graph(cloud, config)?;
    projection_field_with(cloud, &graph, config, ProjectionOptions::default())
}

pub fn projection_field_with(
    cloud: &PointCloud,
    graph: &NeighborGraph,
    config: &KernelConfig,
    options: ProjectionOptions,
) -> Result<ProjectionField> {
    config.validate()?;
    let (d, n) = (cloud.dim(), config.n);
    if n != cloud.intrinsic_dim() {
        return Err(Error::DimensionMismatch {
            expected: cloud.intrinsic_dim(),
            found: n,
        });
    }
    if graph.len() != cloud.len() {
        return Err(Error::DimensionMismatch {
            expected: cloud.len(),
            found: graph.len(),
        });
    }
    if options.check_sampling {
        graph::check_sampling(cloud, config)?;
    }
    if let Some(&index) = graph.isolated().first() {
        return Err(Error::IsolatedPoint { index });
    }
    let frames: Vec<TangentFrame> = (0..cloud.len())
        .into_par_iter()
        .map(|i| eigen_frame(&covariance_at_sample(cloud, graph, i), n))
        .collect();
    let mut field = ProjectionField {
        dim: d,
        n,
        frames: Vec::with_capacity(cloud.len() * d * n),
        gaps: Vec::with_capacity(cloud.len()),
        lambda_n: Vec::with_capacity(cloud.len()),
        degenerate: Vec::new(),
        gap_ratio: options.gap_ratio,
    };
    for (i, tf) in frames.into_iter().enumerate() {
        if tf.degenerate(options.gap_ratio) {
            if options.strict {
                return Err(Error::DegenerateSpectrum {
                    index: Some(i),
                    gap: tf.gap,
                    threshold: options.gap_ratio * tf.eigenvalues[n - 1].max(0.0),
                });
            }
            field.degenerate.push(i);
        }
        for a in 0..d {
            for c in 0..n {
                field.frames.push(tf.frame[(a, c)]);
            }
        }
        field.gaps.push(tf.gap);
        field.lambda_n.push(tf.eigenvalues[n - 1]);
    }
    Ok(field)
}

impl ProjectionField {
    pub fn len(&self) -> usize {
        self.gaps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaps.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Row-major d × n frame at sample i.
    pub fn frame_slice(&self, i: usize) -> &[f64] {
        let s = self.dim * self.n;
        &self.frames[i * s..(i + 1) * s]
    }

    pub fn frame(&self, i: usize) -> na::DMatrix<f64> {
        na::DMatrix::from_row_slice(self.dim, self.n, self.frame_slice(i))
    }

    pub fn projector(&self, i: usize) -> na::DMatrix<f64> {
        let v = self.frame(i);
        &v * v.transpose()
    }

    pub fn gap(&self, i: usize) -> f64 {
        self.gaps[i]
    }

    pub fn gaps(&self) -> &[f64] {
        &self.gaps
    }

    /// Samples whose gap failed the ratio test (non-strict construction only).
    pub fn degenerate(&self) -> &[usize] {
        &self.degenerate
    }

    /// Replaces the frame at sample i by another orthonormal basis of the same plane.
    pub fn set_frame(&mut self, i: usize, frame: &na::DMatrix<f64>) {
        let s = self.dim * self.n;
        for a in 0..self.dim {
            for c in 0..self.n {
                self.frames[i * s + a * self.n + c] = frame[(a, c)];
            }
        }
    }

    /// Frame at an arbitrary query point near the manifold.
    pub fn evaluate(&self, cloud: &PointCloud, config: &KernelConfig, q: &[f64]) -> Result<TangentFrame> {
        if q.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: q.len(),
            });
        }
        tangent_frame_with(&local_covariance(cloud, q, config), self.n, self.gap_ratio)
    }
}

/// vol ≈ m / mean_p Σ_j Φ_t χ_δ(p, x_j).
pub fn estimate_volume(cloud: &PointCloud, config: &KernelConfig) -> Result<f64> {
    let m = cloud.len();
    let sums: Vec<f64> = (0..m)
        .into_par_iter()
        .map(|i| {
            let p = cloud.point(i);
            cloud.iter().map(|x| config.weight_sq(dist_sq(p, x))).sum::<f64>()
        })
        .collect();
    let mean = sums.iter().sum::<f64>() / m as f64;
    if !(mean > 0.0) {
        return Err(Error::ZeroDensity);
    }
    Ok(m as f64 / mean)
}

/// Summary of eigengaps across a field.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EigengapReport {
    pub min_gap: f64,
    pub mean_gap: f64,
    pub min_relative_gap: f64,
    pub failures: Vec<usize>,
    pub duplicates: Vec<(usize, usize)>,
}

impl EigengapReport {
    pub fn healthy(&self) -> bool {
        self.min_gap > 0.0 && self.failures.is_empty() && self.duplicates.is_empty()
    }
}

pub fn eigengap_report(field: &ProjectionField, cloud: &PointCloud) -> EigengapReport {
    let gaps = field.gaps();
    let min_gap = gaps.iter().copied().fold(f64::INFINITY, f64::min);
    let mean_gap = gaps.iter().sum::<f64>() / gaps.len().max(1) as f64;
    let min_relative_gap = gaps
        .iter()
        .zip(&field.lambda_n)
        .map(|(g, l)| g / l)
        .fold(f64::INFINITY, f64::min);
    EigengapReport {
        min_gap,
        mean_gap,
        min_relative_gap,
        failures: field.degenerate.clone(),
        duplicates: graph::duplicate_pairs(cloud),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_frame() {
        let s = na::DMatrix::from_diagonal(&na::DVector::from_vec(vec![3.0, 2.0, 1.0]));
        let tf = tangent_frame(&s, 2).unwrap();
        assert_eq!(tf.gap, 1.0);
        let p = tf.projector();
        let want = na::DMatrix::from_diagonal(&na::DVector::from_vec(vec![1.0, 1.0, 0.0]));
        assert!((p - want).amax() < 1e-14);
        // sign rule: largest entry positive
        assert!(tf.frame[(0, 0)] > 0.0 && tf.frame[(1, 1)] > 0.0);
    }

    #[test]
    fn identity_is_degenerate() {
        let s = na::DMatrix::<f64>::identity(3, 3);
        assert!(matches!(
            tangent_frame(&s, 2),
            Err(Error::DegenerateSpectrum { index: None, .. })
        ));
        assert!(matches!(
            tangent_frame(&na::DMatrix::zeros(3, 3), 2),
            Err(Error::DegenerateSpectrum { .. })
        ));
    }

    #[test]
    fn sign_rule_breaks_ties_to_lower_index() {
        // eigenvector (1, -1)/√2 has equal magnitudes; the first entry is made positive
        let s = na::DMatrix::from_row_slice(3, 3, &[2.0, -1.0, 0.0, -1.0, 2.0, 0.0, 0.0, 0.0, 0.1]);
        let tf = tangent_frame(&s, 1).unwrap();
        assert!((tf.eigenvalues[0] - 3.0).abs() < 1e-12);
        assert!(tf.frame[(0, 0)] > 0.0 && tf.frame[(1, 0)] < 0.0);
    }

    #[test]
    fn single_sample_covariance_is_zero() {
        let cloud = PointCloud::new(vec![0.0, 0.0, 1.0], 3, 2).unwrap();
        let cfg = KernelConfig::new(0.1, 1.0, 2, 1.0).unwrap();
        assert_eq!(local_covariance(&cloud, &[0.0, 0.0, 1.0], &cfg).amax(), 0.0);
        // every sample outside the cutoff
        assert_eq!(local_covariance(&cloud, &[0.0, 0.0, -1.0], &cfg).amax(), 0.0);
    }
}
