//! Dense ambient-coordinate tensors shared by the oracles and the estimators.

use nalgebra as na;
use serde::{Deserialize, Serialize};

/// Vector-valued bilinear map R^d × R^d → R^d, stored as `data[(out * d + u) * d + v]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BilinearMap {
    dim: usize,
    data: Vec<f64>,
}

impl BilinearMap {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim * dim * dim],
        }
    }

    pub fn from_data(dim: usize, data: Vec<f64>) -> Self {
        assert_eq!(data.len(), dim * dim * dim);
        Self { dim, data }
    }

    /// Builds the map from a callback giving B(e_u, e_v) for ambient basis vectors.
    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Vec<f64>) -> Self {
        let mut out = Self::zeros(dim);
        for u in 0..dim {
            for v in 0..dim {
                let val = f(u, v);
                for (o, x) in val.into_iter().enumerate() {
                    out.data[(o * dim + u) * dim + v] = x;
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, out: usize, u: usize, v: usize) -> f64 {
        self.data[(out * self.dim + u) * self.dim + v]
    }

    pub fn get_mut(&mut self, out: usize, u: usize, v: usize) -> &mut f64 {
        &mut self.data[(out * self.dim + u) * self.dim + v]
    }

    pub fn eval(&self, u: &[f64], v: &[f64]) -> Vec<f64> {
        let d = self.dim;
        let mut res = vec![0.0; d];
        for (o, r) in res.iter_mut().enumerate() {
            let block = &self.data[o * d * d..(o + 1) * d * d];
            let mut acc = 0.0;
            for i in 0..d {
                if u[i] == 0.0 {
                    continue;
                }
                let row = &block[i * d..(i + 1) * d];
                acc += u[i] * row.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
            }
            *r = acc;
        }
        res
    }

    /// ½ (B(u, v) + B(v, u)).
    pub fn symmetrized(&self) -> Self {
        let d = self.dim;
        let mut out = self.clone();
        for o in 0..d {
            for u in 0..d {
                for v in 0..d {
                    *out.get_mut(o, u, v) = 0.5 * (self.get(o, u, v) + self.get(o, v, u));
                }
            }
        }
        out
    }

    /// d × d matrix of the `out` component: entry (u, v) = B(e_u, e_v)_out.
    pub fn component(&self, out: usize) -> na::DMatrix<f64> {
        let d = self.dim;
        na::DMatrix::from_row_slice(d, d, &self.data[out * d * d..(out + 1) * d * d])
    }

    /// Σ_i B(e_i, e_i).
    pub fn trace(&self) -> Vec<f64> {
        (0..self.dim)
            .map(|o| (0..self.dim).map(|i| self.get(o, i, i)).sum())
            .collect()
    }

    /// Largest absolute entry.
    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.dim, other.dim);
        Self {
            dim: self.dim,
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }
}

/// 4-tensor on R^d, stored as `data[((x * d + y) * d + z) * d + w]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FourTensor {
    dim: usize,
    data: Vec<f64>,
}

impl FourTensor {
    pub fn zeros(dim: usize) -> Self {
        Self {
            dim,
            data: vec![0.0; dim.pow(4)],
        }
    }

    /// R(X,Y,Z,W) = ⟨B(X,Z), B(Y,W)⟩ − ⟨B(X,W), B(Y,Z)⟩.
    pub fn from_gauss(b: &BilinearMap) -> Self {
        let d = b.dim();
        // g[(x*d+z)*d*d + y*d+w] = ⟨B(x,z), B(y,w)⟩
        let mut g = vec![0.0; d.pow(4)];
        for xz in 0..d * d {
            for yw in 0..d * d {
                let mut acc = 0.0;
                for o in 0..d {
                    acc += b.data[o * d * d + xz] * b.data[o * d * d + yw];
                }
                g[xz * d * d + yw] = acc;
            }
        }
        let at = |a: usize, c: usize, bb: usize, e: usize| g[(a * d + c) * d * d + bb * d + e];
        let mut out = Self::zeros(d);
        for x in 0..d {
            for y in 0..d {
                for z in 0..d {
                    for w in 0..d {
                        out.data[((x * d + y) * d + z) * d + w] = at(x, z, y, w) - at(x, w, y, z);
                    }
                }
            }
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, x: usize, y: usize, z: usize, w: usize) -> f64 {
        let d = self.dim;
        self.data[((x * d + y) * d + z) * d + w]
    }

    pub fn eval(&self, x: &[f64], y: &[f64], z: &[f64], w: &[f64]) -> f64 {
        let d = self.dim;
        let mut acc = 0.0;
        for a in 0..d {
            if x[a] == 0.0 {
                continue;
            }
            for b in 0..d {
                if y[b] == 0.0 {
                    continue;
                }
                for c in 0..d {
                    if z[c] == 0.0 {
                        continue;
                    }
                    let base = ((a * d + b) * d + c) * d;
                    let inner: f64 = (0..d).map(|e| self.data[base + e] * w[e]).sum();
                    acc += x[a] * y[b] * z[c] * inner;
                }
            }
        }
        acc
    }

    /// Components in an orthonormal frame (columns of `frame`), as an n⁴ array.
    pub fn in_frame(&self, frame: &na::DMatrix<f64>) -> Vec<f64> {
        let n = frame.ncols();
        let cols: Vec<Vec<f64>> = (0..n).map(|i| frame.column(i).iter().copied().collect()).collect();
        let mut out = vec![0.0; n.pow(4)];
        for a in 0..n {
            for b in 0..n {
                for c in 0..n {
                    for e in 0..n {
                        out[((a * n + b) * n + c) * n + e] = self.eval(&cols[a], &cols[b], &cols[c], &cols[e]);
                    }
                }
            }
        }
        out
    }

    pub fn amax(&self) -> f64 {
        self.data.iter().fold(0.0f64, |m, x| m.max(x.abs()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn eval_matches_components() {
        let d = 3;
        let b = BilinearMap::from_fn(d, |u, v| vec![u as f64, v as f64, (u * v) as f64]);
        let u = [1.0, 2.0, -1.0];
        let v = [0.5, 0.0, 3.0];
        let got = b.eval(&u, &v);
        let mut want = [0.0; 3];
        for i in 0..d {
            for j in 0..d {
                want[0] += u[i] * v[j] * i as f64;
                want[1] += u[i] * v[j] * j as f64;
                want[2] += u[i] * v[j] * (i * j) as f64;
            }
        }
        for o in 0..d {
            assert!((got[o] - want[o]).abs() < 1e-12);
        }
    }

    #[test]
    fn symmetrize_kills_antisymmetric_part() {
        let b = BilinearMap::from_fn(3, |u, v| vec![u as f64 - v as f64; 3]);
        assert_eq!(b.symmetrized().amax(), 0.0);
        let s = BilinearMap::from_fn(3, |u, v| vec![(u + v) as f64; 3]);
        assert_eq!(s.symmetrized(), s);
    }

    #[test]
    fn gauss_tensor_symmetries() {
        let b = BilinearMap::from_fn(4, |u, v| {
            (0..4).map(|o| ((o * 3 + u * 5 + v * 5) % 7) as f64 - 3.0).collect()
        });
        let r = FourTensor::from_gauss(&b);
        for x in 0..4 {
            for y in 0..4 {
                for z in 0..4 {
                    for w in 0..4 {
                        let v = r.get(x, y, z, w);
                        assert!((v + r.get(y, x, z, w)).abs() < 1e-12);
                        assert!((v + r.get(x, y, w, z)).abs() < 1e-12);
                        assert!((v - r.get(z, w, x, y)).abs() < 1e-12);
                        let bianchi = v + r.get(y, z, x, w) + r.get(z, x, y, w);
                        assert!(bianchi.abs() < 1e-12);
                    }
                }
            }
        }
    }
}
