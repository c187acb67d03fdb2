//! Lowest eigenpairs of a symmetric operator: thick-restart Lanczos with full
//! reorthogonalization, or a dense solve for small problems.

use nalgebra as na;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zoo::sample_rng;

/// A symmetric linear map on R^size.
pub trait LinearOperator: Sync {
    fn size(&self) -> usize;
    fn apply(&self, x: &[f64], y: &mut [f64]);

    /// Symmetrized dense matrix; operators with an explicit assembly should override this.
    fn dense(&self) -> na::DMatrix<f64> {
        to_dense(self)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EigenOptions {
    /// Residual tolerance relative to the largest Ritz value seen.
    pub tol: f64,
    /// Budget of operator applications.
    pub max_iterations: usize,
    /// Problems of at most this size are solved densely.
    pub dense_threshold: usize,
    /// Lanczos basis size before a restart; 0 picks max(2·count + 20, 40).
    pub basis_size: usize,
    pub seed: u64,
}

impl Default for EigenOptions {
    fn default() -> Self {
        Self {
            tol: 1e-8,
            max_iterations: 5000,
            dense_threshold: 4000,
            basis_size: 0,
            seed: 0,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EigenMethod {
    Dense,
    Lanczos,
}

/// Ascending eigenvalues with unit-norm eigenvectors.
#[derive(Clone, Debug)]
pub struct EigenResult {
    pub values: Vec<f64>,
    pub vectors: Vec<Vec<f64>>,
    /// ‖Av − λv‖ per pair.
    pub residuals: Vec<f64>,
    /// Operator applications used.
    pub iterations: usize,
    pub method: EigenMethod,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

fn residual_norm(op: &dyn LinearOperator, v: &[f64], lambda: f64) -> f64 {
    let mut av = vec![0.0; v.len()];
    op.apply(v, &mut av);
    av.iter()
        .zip(v)
        .map(|(a, x)| (a - lambda * x).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Dense matrix of the operator, built column by column.
pub fn to_dense<O: LinearOperator + ?Sized>(op: &O) -> na::DMatrix<f64> {
    let n = op.size();
    let cols: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|j| {
            let mut e = vec![0.0; n];
            e[j] = 1.0;
            let mut y = vec![0.0; n];
            op.apply(&e, &mut y);
            y
        })
        .collect();
    let mut a = na::DMatrix::from_fn(n, n, |i, j| cols[j][i]);
    let at = a.transpose();
    a += at;
    a *= 0.5;
    a
}

fn dense_eigenpairs(op: &dyn LinearOperator, count: usize) -> Result<EigenResult> {
    let n = op.size();
    let a = op.dense();
    let a = faer::MatRef::from_column_major_slice(a.as_slice(), n, n);
    let eig = a
        .self_adjoint_eigen(faer::Side::Lower)
        .map_err(|_| Error::NonConvergence {
            iterations: n,
            max_residual: f64::INFINITY,
            residuals: vec![f64::INFINITY; count],
        })?;
    // eigenvalues come back ascending
    let values: Vec<f64> = (0..count).map(|i| eig.S()[i]).collect();
    let vectors: Vec<Vec<f64>> = (0..count).map(|i| eig.U().col(i).iter().copied().collect()).collect();
    let residuals = vectors
        .iter()
        .zip(&values)
        .map(|(v, &l)| residual_norm(op, v, l))
        .collect();
    Ok(EigenResult {
        values,
        vectors,
        residuals,
        iterations: n,
        method: EigenMethod::Dense,
    })
}

/// Orthogonalizes `w` against `basis` with two Gram–Schmidt passes; returns the remaining norm.
fn orthogonalize(basis: &[Vec<f64>], w: &mut [f64]) -> f64 {
    for _ in 0..2 {
        let coeffs: Vec<f64> = basis.par_iter().map(|v| dot(v, w)).collect();
        for (v, c) in basis.iter().zip(coeffs) {
            for (x, y) in w.iter_mut().zip(v) {
                *x -= c * y;
            }
        }
    }
    norm(w)
}

/// Combination Σ_c coeffs[c] · vectors[c].
fn combine(vectors: &[Vec<f64>], coeffs: na::DVectorView<'_, f64>) -> Vec<f64> {
    let n = vectors[0].len();
    let mut out = vec![0.0; n];
    out.par_chunks_mut(4096).enumerate().for_each(|(chunk, out)| {
        let start = chunk * 4096;
        let len = out.len();
        for (v, &c) in vectors.iter().zip(coeffs.iter()) {
            if c != 0.0 {
                for (o, x) in out.iter_mut().zip(&v[start..start + len]) {
                    *o += c * x;
                }
            }
        }
    });
    out
}

fn random_unit(n: usize, rng: &mut impl Rng, basis: &[Vec<f64>]) -> Vec<f64> {
    loop {
        let mut v: Vec<f64> = (0..n).map(|_| rng.random::<f64>() - 0.5).collect();
        let r = orthogonalize(basis, &mut v);
        if r > 1e-8 {
            v.iter_mut().for_each(|x| *x /= r);
            return v;
        }
    }
}

/// The `count` algebraically smallest eigenpairs.
pub fn smallest_eigenpairs(op: &dyn LinearOperator, count: usize, options: &EigenOptions) -> Result<EigenResult> {
    let n = op.size();
    if count == 0 || count > n {
        return Err(Error::InvalidConfig(format!(
            "requested {count} eigenpairs of a {n}-dimensional operator"
        )));
    }
    if n <= options.dense_threshold {
        return dense_eigenpairs(op, count);
    }
    let p = if options.basis_size == 0 {
        (2 * count + 20).max(40)
    } else {
        options.basis_size.max(count + 2)
    }
    .min(n);
    let keep = (count + (p - count) / 2).min(p - 1).max(count);
    let mut rng = sample_rng(options.seed, u64::MAX);

    let mut basis: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    let mut images: Vec<Vec<f64>> = Vec::with_capacity(p + 1);
    let push = |v: Vec<f64>, basis: &mut Vec<Vec<f64>>, images: &mut Vec<Vec<f64>>| {
        let mut av = vec![0.0; v.len()];
        op.apply(&v, &mut av);
        basis.push(v);
        images.push(av);
    };
    let start = random_unit(n, &mut rng, &[]);
    push(start, &mut basis, &mut images);
    let mut iterations = 1;
    let mut scale: f64 = 0.0;
    let mut best: Vec<f64> = vec![f64::INFINITY; count];

    loop {
        while basis.len() < p {
            let mut w = images.last().unwrap().clone();
            let beta = orthogonalize(&basis, &mut w);
            let next = if beta > 1e-12 * scale.max(1e-300) {
                w.iter_mut().for_each(|x| *x /= beta);
                w
            } else {
                // invariant subspace: continue with a fresh direction
                random_unit(n, &mut rng, &basis)
            };
            push(next, &mut basis, &mut images);
            iterations += 1;
        }
        let dim = basis.len();
        let h = na::DMatrix::from_fn(dim, dim, |i, j| dot(&basis[i], &images[j]));
        let h = (&h + h.transpose()) * 0.5;
        let eig = h.symmetric_eigen();
        let mut order: Vec<usize> = (0..dim).collect();
        order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
        scale = scale.max(eig.eigenvalues.amax());

        let ritz: Vec<(f64, Vec<f64>, Vec<f64>)> = order[..keep]
            .iter()
            .map(|&c| {
                let s = eig.eigenvectors.column(c);
                (eig.eigenvalues[c], combine(&basis, s), combine(&images, s))
            })
            .collect();
        let residuals: Vec<f64> = ritz[..count]
            .iter()
            .map(|(l, x, ax)| ax.iter().zip(x).map(|(a, v)| (a - l * v).powi(2)).sum::<f64>().sqrt())
            .collect();
        for (b, r) in best.iter_mut().zip(&residuals) {
            *b = b.min(*r);
        }
        let threshold = options.tol * scale.max(1.0);
        if residuals.iter().all(|&r| r <= threshold) {
            let mut values = Vec::with_capacity(count);
            let mut vectors = Vec::with_capacity(count);
            for (l, x, _) in ritz.into_iter().take(count) {
                values.push(l);
                vectors.push(x);
            }
            log::debug!("lanczos converged after {iterations} applications");
            return Ok(EigenResult {
                values,
                vectors,
                residuals,
                iterations,
                method: EigenMethod::Lanczos,
            });
        }
        if iterations >= options.max_iterations {
            return Err(Error::NonConvergence {
                iterations,
                max_residual: best.iter().copied().fold(0.0, f64::max),
                residuals: best,
            });
        }
        // continuation direction: residual of the last basis vector
        let mut w = images.last().unwrap().clone();
        let beta = orthogonalize(&basis, &mut w);
        let mut kept_basis = Vec::with_capacity(p + 1);
        let mut kept_images = Vec::with_capacity(p + 1);
        for (_, x, ax) in ritz {
            kept_basis.push(x);
            kept_images.push(ax);
        }
        basis = kept_basis;
        images = kept_images;
        // re-orthonormalize the Ritz block against rounding drift
        for i in 0..basis.len() {
            let (done, rest) = basis.split_at_mut(i);
            let v = &mut rest[0];
            let r = orthogonalize(done, v);
            if (r - 1.0).abs() <= 1e-6 {
                v.iter_mut().for_each(|x| *x /= r);
                images[i].iter_mut().for_each(|x| *x /= r);
            } else {
                let fresh = random_unit(n, &mut rng, done);
                *v = fresh;
                let mut av = vec![0.0; n];
                op.apply(v, &mut av);
                images[i] = av;
                iterations += 1;
            }
        }
        let next = if beta > 1e-12 * scale.max(1e-300) {
            let mut w = w;
            let r = orthogonalize(&basis, &mut w);
            w.iter_mut().for_each(|x| *x /= r);
            w
        } else {
            random_unit(n, &mut rng, &basis)
        };
        push(next, &mut basis, &mut images);
        iterations += 1;
    }
}
