//! Exterior algebra of R^d.
//!
//! Basis k-vectors are indexed by strictly increasing multi-indices in
//! lexicographic order; every module and file format uses this order.

use std::fmt;
use std::ops::{Add, AddAssign, Mul, Neg, Sub};

use nalgebra as na;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest degree handled by the explicit minor formulas.
pub const MAX_EXPLICIT_DEGREE: usize = 4;

const ORTHONORMAL_TOL: f64 = 1e-8;

pub fn binomial(n: usize, k: usize) -> usize {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: usize = 1;
    for i in 0..k {
        acc = acc * (n - i) / (i + 1);
    }
    acc
}

/// A strictly increasing tuple of coordinate indices.
#[derive(Clone, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MultiIndex(Vec<usize>);

impl MultiIndex {
    pub fn new(indices: Vec<usize>, d: usize) -> Result<Self> {
        if indices.len() > d {
            return Err(Error::InvalidDegree { k: indices.len(), d });
        }
        let increasing = indices.windows(2).all(|w| w[0] < w[1]);
        if !increasing || indices.iter().any(|&i| i >= d) {
            return Err(Error::Format {
                location: "multi-index".into(),
                message: format!("{indices:?} is not strictly increasing in [0, {d})"),
            });
        }
        Ok(Self(indices))
    }

    pub fn as_slice(&self) -> &[usize] {
        &self.0
    }

    pub fn degree(&self) -> usize {
        self.0.len()
    }

    /// Position of this index in the lexicographic basis of Λ^k R^d.
    pub fn rank(&self, d: usize) -> usize {
        rank_of(&self.0, d)
    }
}

impl fmt::Display for MultiIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "(")?;
        for (i, v) in self.0.iter().enumerate() {
            if i > 0 {
                write!(f, ",")?;
            }
            write!(f, "{v}")?;
        }
        write!(f, ")")
    }
}

/// Lexicographic rank of a sorted k-subset of {0, .., d-1}.
pub(crate) fn rank_of(indices: &[usize], d: usize) -> usize {
    let k = indices.len();
    let mut rank = 0;
    let mut prev = 0usize;
    for (pos, &c) in indices.iter().enumerate() {
        for j in prev..c {
            rank += binomial(d - 1 - j, k - 1 - pos);
        }
        prev = c + 1;
    }
    rank
}

/// Calls `f` with every sorted k-subset of {0, .., d-1} in lexicographic order.
pub(crate) fn for_each_subset(d: usize, k: usize, mut f: impl FnMut(&[usize])) {
    if k > d {
        return;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        f(&idx);
        // advance to the next combination
        let mut i = k;
        loop {
            if i == 0 {
                return;
            }
            i -= 1;
            if idx[i] < d - k + i {
                idx[i] += 1;
                for j in i + 1..k {
                    idx[j] = idx[j - 1] + 1;
                }
                break;
            }
            if i == 0 {
                return;
            }
        }
    }
}

pub(crate) fn subsets(d: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::with_capacity(binomial(d, k));
    for_each_subset(d, k, |s| out.push(s.to_vec()));
    out
}

pub fn multi_index_basis(d: usize, k: usize) -> Result<Vec<MultiIndex>> {
    if k > d {
        return Err(Error::InvalidDegree { k, d });
    }
    Ok(subsets(d, k).into_iter().map(MultiIndex).collect())
}

fn mask_of(indices: &[usize]) -> u64 {
    indices.iter().fold(0u64, |m, &i| m | (1u64 << i))
}

fn indices_of_mask(mask: u64) -> Vec<usize> {
    (0..64).filter(|&i| mask & (1u64 << i) != 0).collect()
}

/// Sign of the permutation sorting the concatenation `a ++ b` of two sorted,
/// disjoint index sets.
fn merge_sign(a: u64, b: u64) -> f64 {
    let mut inversions = 0u32;
    let mut rest = b;
    while rest != 0 {
        let j = rest.trailing_zeros();
        rest &= rest - 1;
        // elements of a strictly above j must move past it
        inversions += (a >> (j + 1)).count_ones();
    }
    if inversions.is_multiple_of(2) {
        1.0
    } else {
        -1.0
    }
}

/// Element of Λ^k R^d stored as dense coefficients over the lexicographic basis.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KVector {
    dim: usize,
    degree: usize,
    coeffs: Vec<f64>,
}

impl KVector {
    pub fn zeros(dim: usize, degree: usize) -> Result<Self> {
        if degree > dim {
            return Err(Error::InvalidDegree { k: degree, d: dim });
        }
        Ok(Self {
            dim,
            degree,
            coeffs: vec![0.0; binomial(dim, degree)],
        })
    }

    pub fn from_coeffs(dim: usize, degree: usize, coeffs: Vec<f64>) -> Result<Self> {
        if degree > dim {
            return Err(Error::InvalidDegree { k: degree, d: dim });
        }
        let expected = binomial(dim, degree);
        if coeffs.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                found: coeffs.len(),
            });
        }
        Ok(Self { dim, degree, coeffs })
    }

    pub fn scalar(dim: usize, value: f64) -> Self {
        Self {
            dim,
            degree: 0,
            coeffs: vec![value],
        }
    }

    /// Degree-one element with the given components.
    pub fn vector(components: &[f64]) -> Self {
        Self {
            dim: components.len(),
            degree: 1,
            coeffs: components.to_vec(),
        }
    }

    /// The basis element e_{i1} ∧ ... ∧ e_{ik} for a strictly increasing index list.
    pub fn basis(dim: usize, indices: &[usize]) -> Result<Self> {
        let idx = MultiIndex::new(indices.to_vec(), dim)?;
        let mut v = Self::zeros(dim, idx.degree())?;
        v.coeffs[idx.rank(dim)] = 1.0;
        Ok(v)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn coeffs_mut(&mut self) -> &mut [f64] {
        &mut self.coeffs
    }

    pub fn into_coeffs(self) -> Vec<f64> {
        self.coeffs
    }

    pub fn coeff(&self, index: &MultiIndex) -> f64 {
        self.coeffs[index.rank(self.dim)]
    }

    pub fn norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c * c).sum::<f64>().sqrt()
    }

    pub fn scaled(mut self, s: f64) -> Self {
        self.coeffs.iter_mut().for_each(|c| *c *= s);
        self
    }

    fn check_same(&self, other: &Self) -> Result<()> {
        if self.dim != other.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                found: other.dim,
            });
        }
        if self.degree != other.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                found: other.degree,
            });
        }
        Ok(())
    }

    pub fn axpy(&mut self, a: f64, x: &KVector) -> Result<()> {
        self.check_same(x)?;
        for (y, xv) in self.coeffs.iter_mut().zip(&x.coeffs) {
            *y += a * xv;
        }
        Ok(())
    }

    pub fn as_dvector(&self) -> na::DVector<f64> {
        na::DVector::from_column_slice(&self.coeffs)
    }
}

impl Add for &KVector {
    type Output = KVector;
    fn add(self, rhs: &KVector) -> KVector {
        assert_eq!((self.dim, self.degree), (rhs.dim, rhs.degree));
        let mut out = self.clone();
        out += rhs;
        out
    }
}

impl AddAssign<&KVector> for KVector {
    fn add_assign(&mut self, rhs: &KVector) {
        assert_eq!((self.dim, self.degree), (rhs.dim, rhs.degree));
        for (y, x) in self.coeffs.iter_mut().zip(&rhs.coeffs) {
            *y += x;
        }
    }
}

impl Sub for &KVector {
    type Output = KVector;
    fn sub(self, rhs: &KVector) -> KVector {
        assert_eq!((self.dim, self.degree), (rhs.dim, rhs.degree));
        let mut out = self.clone();
        for (y, x) in out.coeffs.iter_mut().zip(&rhs.coeffs) {
            *y -= x;
        }
        out
    }
}

impl Mul<f64> for &KVector {
    type Output = KVector;
    fn mul(self, rhs: f64) -> KVector {
        self.clone().scaled(rhs)
    }
}

impl Neg for &KVector {
    type Output = KVector;
    fn neg(self) -> KVector {
        self.clone().scaled(-1.0)
    }
}

pub fn wedge(a: &KVector, b: &KVector) -> Result<KVector> {
    if a.dim != b.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: b.dim,
        });
    }
    let d = a.dim;
    let degree = a.degree + b.degree;
    if degree > d {
        return Err(Error::InvalidDegree { k: degree, d });
    }
    let mut out = KVector::zeros(d, degree)?;
    let left: Vec<u64> = subsets(d, a.degree).iter().map(|s| mask_of(s)).collect();
    let right: Vec<u64> = subsets(d, b.degree).iter().map(|s| mask_of(s)).collect();
    for (ia, &ma) in left.iter().enumerate() {
        let ca = a.coeffs[ia];
        if ca == 0.0 {
            continue;
        }
        for (ib, &mb) in right.iter().enumerate() {
            let cb = b.coeffs[ib];
            if cb == 0.0 || ma & mb != 0 {
                continue;
            }
            let target = rank_of(&indices_of_mask(ma | mb), d);
            out.coeffs[target] += merge_sign(ma, mb) * ca * cb;
        }
    }
    Ok(out)
}

/// Interior product i_v a, the adjoint of `v ∧ ·`.
pub fn interior(v: &[f64], a: &KVector) -> Result<KVector> {
    if v.len() != a.dim {
        return Err(Error::DimensionMismatch {
            expected: a.dim,
            found: v.len(),
        });
    }
    if a.degree == 0 {
        return Err(Error::InvalidDegree { k: 0, d: a.dim });
    }
    let d = a.dim;
    let mut out = KVector::zeros(d, a.degree - 1)?;
    let mut rest = Vec::with_capacity(a.degree);
    for_each_subset(d, a.degree, |idx| {
        let c = a.coeffs[rank_of(idx, d)];
        if c == 0.0 {
            return;
        }
        for (pos, &i) in idx.iter().enumerate() {
            rest.clear();
            rest.extend(idx.iter().copied().filter(|&j| j != i));
            let sign = if pos % 2 == 0 { 1.0 } else { -1.0 };
            out.coeffs[rank_of(&rest, d)] += sign * v[i] * c;
        }
    });
    Ok(out)
}

pub fn inner(a: &KVector, b: &KVector) -> Result<f64> {
    a.check_same(b)?;
    Ok(a.coeffs.iter().zip(&b.coeffs).map(|(x, y)| x * y).sum())
}

/// Determinant of the square submatrix of `a` picked by `rows` and `cols`.
pub(crate) fn minor_det<F: Fn(usize, usize) -> f64>(a: &F, rows: &[usize], cols: &[usize]) -> f64 {
    let e = |i: usize, j: usize| a(rows[i], cols[j]);
    match rows.len() {
        0 => 1.0,
        1 => e(0, 0),
        2 => e(0, 0) * e(1, 1) - e(0, 1) * e(1, 0),
        3 => {
            e(0, 0) * (e(1, 1) * e(2, 2) - e(1, 2) * e(2, 1)) - e(0, 1) * (e(1, 0) * e(2, 2) - e(1, 2) * e(2, 0))
                + e(0, 2) * (e(1, 0) * e(2, 1) - e(1, 1) * e(2, 0))
        }
        4 => {
            let s0 = e(2, 0) * e(3, 1) - e(2, 1) * e(3, 0);
            let s1 = e(2, 0) * e(3, 2) - e(2, 2) * e(3, 0);
            let s2 = e(2, 0) * e(3, 3) - e(2, 3) * e(3, 0);
            let s3 = e(2, 1) * e(3, 2) - e(2, 2) * e(3, 1);
            let s4 = e(2, 1) * e(3, 3) - e(2, 3) * e(3, 1);
            let s5 = e(2, 2) * e(3, 3) - e(2, 3) * e(3, 2);
            let c0 = e(1, 1) * s5 - e(1, 2) * s4 + e(1, 3) * s3;
            let c1 = e(1, 0) * s5 - e(1, 2) * s2 + e(1, 3) * s1;
            let c2 = e(1, 0) * s4 - e(1, 1) * s2 + e(1, 3) * s0;
            let c3 = e(1, 0) * s3 - e(1, 1) * s1 + e(1, 2) * s0;
            e(0, 0) * c0 - e(0, 1) * c1 + e(0, 2) * c2 - e(0, 3) * c3
        }
        k => {
            let m = na::DMatrix::from_fn(k, k, e);
            m.determinant()
        }
    }
}

/// Precomputed index sets for forming Λ^k of a rows × cols matrix.
#[derive(Clone, Debug)]
pub struct PowerPlan {
    degree: usize,
    row_sets: Vec<Vec<usize>>,
    col_sets: Vec<Vec<usize>>,
}

impl PowerPlan {
    pub fn new(rows: usize, cols: usize, degree: usize) -> Self {
        Self {
            degree,
            row_sets: subsets(rows, degree),
            col_sets: subsets(cols, degree),
        }
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn out_rows(&self) -> usize {
        self.row_sets.len()
    }

    pub fn out_cols(&self) -> usize {
        self.col_sets.len()
    }

    /// Writes Λ^k of the matrix given by `entry` into `out`, row-major.
    pub fn fill<F: Fn(usize, usize) -> f64>(&self, entry: F, out: &mut [f64]) {
        let nc = self.col_sets.len();
        for (i, r) in self.row_sets.iter().enumerate() {
            for (j, c) in self.col_sets.iter().enumerate() {
                out[i * nc + j] = minor_det(&entry, r, c);
            }
        }
    }

    pub fn apply(&self, a: &na::DMatrix<f64>) -> na::DMatrix<f64> {
        let mut buf = vec![0.0; self.out_rows() * self.out_cols()];
        self.fill(|i, j| a[(i, j)], &mut buf);
        na::DMatrix::from_row_slice(self.out_rows(), self.out_cols(), &buf)
    }
}

/// Λ^k of an arbitrary linear map; entry (I, J) is the minor with rows I and columns J.
pub fn exterior_power(a: &na::DMatrix<f64>, k: usize) -> Result<na::DMatrix<f64>> {
    let (r, c) = a.shape();
    if k > r.min(c) {
        return Err(Error::InvalidDegree { k, d: r.min(c) });
    }
    Ok(PowerPlan::new(r, c, k).apply(a))
}

/// Extension of an endomorphism A of R^d to Λ^k as a derivation:
/// D(A)(v1 ∧ ... ∧ vk) = Σ_p v1 ∧ ... ∧ A vp ∧ ... ∧ vk.
pub fn derivation(a: &na::DMatrix<f64>, k: usize) -> Result<na::DMatrix<f64>> {
    let d = a.nrows();
    if a.ncols() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: a.ncols(),
        });
    }
    if k > d {
        return Err(Error::InvalidDegree { k, d });
    }
    let n = binomial(d, k);
    let mut out = na::DMatrix::zeros(n, n);
    let mut tuple = vec![0usize; k];
    for_each_subset(d, k, |idx| {
        let col = rank_of(idx, d);
        for pos in 0..k {
            let base = mask_of(idx) & !(1u64 << idx[pos]);
            for r in 0..d {
                let coef = a[(r, idx[pos])];
                if coef == 0.0 || base & (1u64 << r) != 0 {
                    continue;
                }
                tuple.copy_from_slice(idx);
                tuple[pos] = r;
                let sign = sort_sign(&mut tuple);
                out[(rank_of(&tuple, d), col)] += sign * coef;
            }
        }
    });
    Ok(out)
}

/// Sorts a tuple of distinct indices in place and returns the permutation sign.
fn sort_sign(t: &mut [usize]) -> f64 {
    let mut sign = 1.0;
    for i in 1..t.len() {
        let mut j = i;
        while j > 0 && t[j - 1] > t[j] {
            t.swap(j - 1, j);
            sign = -sign;
            j -= 1;
        }
    }
    sign
}

/// Λ^k of a column-orthonormal frame V (d × n), i.e. an isometric embedding
/// Λ^k R^n → Λ^k R^d whose range is the tangent k-plane bundle fibre.
#[derive(Clone, Debug)]
pub struct FactoredLift {
    frame: na::DMatrix<f64>,
    degree: usize,
    lifted: na::DMatrix<f64>,
}

pub fn lift_map(frame: &na::DMatrix<f64>, k: usize) -> Result<FactoredLift> {
    let (d, n) = frame.shape();
    if k > n {
        return Err(Error::InvalidDegree { k, d: n });
    }
    let gram = frame.transpose() * frame;
    let deviation = (gram - na::DMatrix::<f64>::identity(n, n)).amax();
    if deviation > ORTHONORMAL_TOL {
        return Err(Error::NotOrthonormal { deviation });
    }
    let _ = d;
    Ok(FactoredLift {
        frame: frame.clone(),
        degree: k,
        lifted: exterior_power(frame, k)?,
    })
}

impl FactoredLift {
    pub fn frame(&self) -> &na::DMatrix<f64> {
        &self.frame
    }

    pub fn degree(&self) -> usize {
        self.degree
    }

    pub fn ambient_dim(&self) -> usize {
        self.frame.nrows()
    }

    /// The C(d,k) × C(n,k) matrix Λ^k V.
    pub fn matrix(&self) -> &na::DMatrix<f64> {
        &self.lifted
    }

    /// Tangent coordinates (Λ^k V)ᵀ w.
    pub fn pull_down(&self, w: &KVector) -> Result<na::DVector<f64>> {
        self.check(w)?;
        Ok(self.lifted.tr_mul(&w.as_dvector()))
    }

    pub fn push_up(&self, y: &na::DVector<f64>) -> KVector {
        let v = &self.lifted * y;
        KVector {
            dim: self.frame.nrows(),
            degree: self.degree,
            coeffs: v.as_slice().to_vec(),
        }
    }

    /// Dense (Λ^k V)(Λ^k V)ᵀ.
    pub fn projector(&self) -> na::DMatrix<f64> {
        &self.lifted * self.lifted.transpose()
    }

    fn check(&self, w: &KVector) -> Result<()> {
        if w.degree != self.degree {
            return Err(Error::DegreeMismatch {
                expected: self.degree,
                found: w.degree,
            });
        }
        if w.dim != self.frame.nrows() {
            return Err(Error::DimensionMismatch {
                expected: self.frame.nrows(),
                found: w.dim,
            });
        }
        Ok(())
    }
}

/// Orthogonal projection of `w` onto the lifted tangent k-plane.
pub fn project_k(lift: &FactoredLift, w: &KVector) -> Result<KVector> {
    let y = lift.pull_down(w)?;
    Ok(lift.push_up(&y))
}
