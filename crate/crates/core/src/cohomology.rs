//! Chain integration, period matrices, gauge fixing, cup-product structure
//! constants and Pontryagin numbers.

use std::sync::Arc;

use nalgebra as na;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::curvature::{empirical_b, orient_frames, pontryagin_form, symmetrize, BNormalization, OrientationSource};
use crate::error::{Error, Result};
use crate::exterior::{self, KVector};
use crate::geometry::Geometry;
use crate::hodge::{HodgeOperator, SpectralPackage};
use crate::zoo::{self, ManifoldSpec, PointCloud, SimplicialChain};

/// Default number of uniform refinement levels for chain quadrature.
pub const DEFAULT_QUAD_ORDER: usize = 2;
/// Period matrices with a larger condition number are rejected.
pub const MAX_PERIOD_CONDITION: f64 = 1e6;

/// A k-form that can be evaluated at arbitrary points of R^d.
pub trait FormField: Send + Sync {
    fn dim(&self) -> usize;
    fn degree(&self) -> usize;
    fn eval(&self, x: &[f64]) -> Result<KVector>;

    fn eval_many(&self, points: &[&[f64]]) -> Result<Vec<KVector>> {
        points.par_iter().map(|x| self.eval(x)).collect()
    }
}

pub type SharedForm<'a> = Arc<dyn FormField + 'a>;

/// The same k-vector everywhere.
#[derive(Clone, Debug)]
pub struct ConstantForm(pub KVector);

impl FormField for ConstantForm {
    fn dim(&self) -> usize {
        self.0.dim()
    }
    fn degree(&self) -> usize {
        self.0.degree()
    }
    fn eval(&self, _: &[f64]) -> Result<KVector> {
        Ok(self.0.clone())
    }
}

/// Harmonic form `index` of degree k on a zoo manifold, evaluated at the
/// nearest point of the manifold.
#[derive(Clone, Debug)]
pub struct OracleForm {
    pub spec: ManifoldSpec,
    pub degree: usize,
    pub index: usize,
}

impl FormField for OracleForm {
    fn dim(&self) -> usize {
        self.spec.d()
    }
    fn degree(&self) -> usize {
        self.degree
    }
    fn eval(&self, x: &[f64]) -> Result<KVector> {
        let p = self.spec.closest_point(x)?;
        zoo::oracle_harmonic_form(&self.spec, self.degree, self.index, &p)
    }
}

/// Nyström extension of a compressed eigenvector of a Hodge operator.
pub struct NystromForm<'o> {
    op: &'o HodgeOperator<'o>,
    vector: Vec<f64>,
    lambda: f64,
}

impl<'o> NystromForm<'o> {
    pub fn new(op: &'o HodgeOperator<'o>, vector: Vec<f64>, lambda: f64) -> Result<Self> {
        let size = op.len() * op.block_size();
        if vector.len() != size {
            return Err(Error::DimensionMismatch {
                expected: size,
                found: vector.len(),
            });
        }
        Ok(Self { op, vector, lambda })
    }

    /// Eigenpair `i` of a spectral package computed from `op`.
    pub fn from_package(op: &'o HodgeOperator<'o>, package: &SpectralPackage, i: usize) -> Result<Self> {
        let v = package.vectors.get(i).ok_or_else(|| {
            Error::InvalidConfig(format!("eigenpair {i} not in a package of {}", package.vectors.len()))
        })?;
        Self::new(op, v.clone(), package.eigenvalues[i])
    }

    pub fn eigenvalue(&self) -> f64 {
        self.lambda
    }
}

impl FormField for NystromForm<'_> {
    fn dim(&self) -> usize {
        self.op.ambient_dim()
    }
    fn degree(&self) -> usize {
        self.op.degree()
    }
    fn eval(&self, x: &[f64]) -> Result<KVector> {
        self.op.nystrom_extend(&self.vector, self.lambda, x)
    }
}

/// Nyström forms for the sub-gap eigenpairs of a package.
pub fn harmonic_forms<'o>(op: &'o HodgeOperator<'o>, package: &SpectralPackage) -> Result<Vec<SharedForm<'o>>> {
    (0..package.kernel_dim)
        .map(|i| Ok(Arc::new(NystromForm::from_package(op, package, i)?) as SharedForm<'o>))
        .collect()
}

/// Σ_a c_a ω_a.
pub struct LinearCombination<'a> {
    pub forms: Vec<SharedForm<'a>>,
    pub coeffs: Vec<f64>,
}

impl FormField for LinearCombination<'_> {
    fn dim(&self) -> usize {
        self.forms[0].dim()
    }
    fn degree(&self) -> usize {
        self.forms[0].degree()
    }
    fn eval(&self, x: &[f64]) -> Result<KVector> {
        let mut out = KVector::zeros(self.dim(), self.degree())?;
        for (f, c) in self.forms.iter().zip(&self.coeffs) {
            if *c != 0.0 {
                out.axpy(*c, &f.eval(x)?)?;
            }
        }
        Ok(out)
    }
}

/// p₁(R̂) from B̂ re-estimated at the query point.
pub struct PontryaginField<'g> {
    pub geometry: &'g Geometry,
    pub normalization: BNormalization,
}

impl FormField for PontryaginField<'_> {
    fn dim(&self) -> usize {
        self.geometry.cloud.dim()
    }
    fn degree(&self) -> usize {
        4
    }
    fn eval(&self, x: &[f64]) -> Result<KVector> {
        let g = self.geometry;
        let frame = g.field.evaluate(&g.cloud, &g.config, x)?.frame;
        let b = empirical_b(&g.cloud, &g.field, &g.config, x, &frame, self.normalization)?;
        pontryagin_form(&symmetrize(&b), &frame, 1)
    }
}

/// Centroids of the 2^{L q} congruent pieces of the uniform L-fold
/// refinement of a q-simplex.
pub fn refined_centroids(vertices: &[Vec<f64>], levels: usize) -> Vec<Vec<f64>> {
    let q = vertices.len() - 1;
    let d = vertices[0].len();
    if q == 0 {
        return vec![vertices[0].clone()];
    }
    let steps = 1usize << levels;
    let perms = permutations(q);
    let mut out = Vec::with_capacity(steps.pow(q as u32));
    // Kuhn simplices of [0, N]^q inside N ≥ y₁ ≥ … ≥ y_q ≥ 0
    let mut base = vec![0usize; q];
    loop {
        for perm in &perms {
            let mut y = base.clone();
            let mut verts = vec![y.clone()];
            for &axis in perm {
                y[axis] += 1;
                verts.push(y.clone());
            }
            let inside = verts
                .iter()
                .all(|v| v[0] <= steps && v.windows(2).all(|w| w[0] >= w[1]));
            if !inside {
                continue;
            }
            let mut c = vec![0.0; q];
            for v in &verts {
                for (ci, vi) in c.iter_mut().zip(v) {
                    *ci += *vi as f64 / (q + 1) as f64;
                }
            }
            // barycentric weights of the ordered simplex vertices (0…0), (N,0…0), …, (N…N)
            let nf = steps as f64;
            let mut point = vec![0.0; d];
            for (i, vert) in vertices.iter().enumerate() {
                let lambda = match i {
                    0 => 1.0 - c[0] / nf,
                    i if i == q => c[q - 1] / nf,
                    i => (c[i - 1] - c[i]) / nf,
                };
                for (p, v) in point.iter_mut().zip(vert) {
                    *p += lambda * v;
                }
            }
            out.push(point);
        }
        // next lattice cube
        let mut axis = 0;
        loop {
            if axis == q {
                return out;
            }
            base[axis] += 1;
            if base[axis] < steps {
                break;
            }
            base[axis] = 0;
            axis += 1;
        }
    }
}

fn permutations(q: usize) -> Vec<Vec<usize>> {
    if q == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for rest in permutations(q - 1) {
        for pos in 0..=rest.len() {
            let mut p = rest.clone();
            p.insert(pos, q - 1);
            out.push(p);
        }
    }
    out
}

/// Oriented q-vector (v₁−v₀)∧…∧(v_q−v₀)/q! of a simplex.
pub fn simplex_kvector(vertices: &[Vec<f64>]) -> Result<KVector> {
    let d = vertices[0].len();
    let q = vertices.len() - 1;
    let mut out = KVector::scalar(d, 1.0);
    for v in &vertices[1..] {
        let e: Vec<f64> = v.iter().zip(&vertices[0]).map(|(a, b)| a - b).collect();
        out = exterior::wedge(&out, &KVector::vector(&e))?;
    }
    let fact: f64 = (1..=q).map(|i| i as f64).product();
    Ok(out.scaled(1.0 / fact))
}

/// ∫_chain ω by centroid quadrature on `quad_order` uniform refinements.
pub fn integrate_chain(form: &dyn FormField, chain: &SimplicialChain, quad_order: usize) -> Result<f64> {
    chain.validate()?;
    if chain.degree != form.degree() {
        return Err(Error::DegreeMismatch {
            expected: form.degree(),
            found: chain.degree,
        });
    }
    if let Some(d) = chain.ambient_dim() {
        if d != form.dim() {
            return Err(Error::DimensionMismatch {
                expected: form.dim(),
                found: d,
            });
        }
    }
    let pieces = (1usize << quad_order).pow(chain.degree as u32) as f64;
    let terms: Vec<(f64, Vec<Vec<f64>>)> = chain
        .simplices
        .iter()
        .map(|s| (s.coeff, refined_centroids(&s.vertices, quad_order)))
        .collect();
    let per_simplex: Vec<f64> = chain
        .simplices
        .par_iter()
        .zip(terms.par_iter())
        .map(|(s, (coeff, centroids))| -> Result<f64> {
            let orient = simplex_kvector(&s.vertices)?;
            let mut acc = 0.0;
            for c in centroids {
                acc += exterior::inner(&form.eval(c)?, &orient)?;
            }
            Ok(coeff * acc / pieces)
        })
        .collect::<Result<_>>()?;
    Ok(per_simplex.iter().sum())
}

/// P̂[j][a] = ∫_{γ_j} ω_a.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct PeriodMatrix {
    pub matrix: Vec<Vec<f64>>,
    pub condition: f64,
    pub cycles: Vec<String>,
    pub forms: Vec<String>,
}

impl PeriodMatrix {
    pub fn to_matrix(&self) -> na::DMatrix<f64> {
        let b = self.matrix.len();
        na::DMatrix::from_fn(b, b, |j, a| self.matrix[j][a])
    }

    /// max |P̂ − I|.
    pub fn identity_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (j, row) in self.matrix.iter().enumerate() {
            for (a, v) in row.iter().enumerate() {
                worst = worst.max((v - if a == j { 1.0 } else { 0.0 }).abs());
            }
        }
        worst
    }
}

fn condition_number(p: &na::DMatrix<f64>) -> f64 {
    let sv = p.clone().svd(false, false).singular_values;
    let max = sv.max();
    let min = sv.min();
    if min == 0.0 {
        f64::INFINITY
    } else {
        max / min
    }
}

pub fn period_matrix(forms: &[SharedForm<'_>], cycles: &[SimplicialChain], quad_order: usize) -> Result<PeriodMatrix> {
    if forms.len() != cycles.len() || forms.is_empty() {
        return Err(Error::GaugeFailure(format!(
            "{} forms against {} cycles",
            forms.len(),
            cycles.len()
        )));
    }
    let b = forms.len();
    let mut matrix = vec![vec![0.0; b]; b];
    for (j, cycle) in cycles.iter().enumerate() {
        for (a, form) in forms.iter().enumerate() {
            matrix[j][a] = integrate_chain(form.as_ref(), cycle, quad_order)?;
        }
    }
    let p = na::DMatrix::from_fn(b, b, |j, a| matrix[j][a]);
    let condition = condition_number(&p);
    if !(condition < MAX_PERIOD_CONDITION) {
        return Err(Error::GaugeFailure(format!(
            "period matrix condition number {condition:.3e}"
        )));
    }
    Ok(PeriodMatrix {
        matrix,
        condition,
        cycles: cycles.iter().map(|c| c.name.clone()).collect(),
        forms: (0..b).map(|a| format!("form {a}")).collect(),
    })
}

/// ω̂_i = Σ_a (P̂⁻¹)_{a i} ω̃_a, so that ∫_{γ_j} ω̂_i = δ_ij.
pub fn gauge_fix<'a>(forms: &[SharedForm<'a>], periods: &PeriodMatrix) -> Result<Vec<SharedForm<'a>>> {
    let p = periods.to_matrix();
    if p.nrows() != forms.len() {
        return Err(Error::GaugeFailure(format!(
            "period matrix of size {} for {} forms",
            p.nrows(),
            forms.len()
        )));
    }
    if !(periods.condition < MAX_PERIOD_CONDITION) {
        return Err(Error::GaugeFailure(format!(
            "period matrix condition number {:.3e}",
            periods.condition
        )));
    }
    let inv = p
        .try_inverse()
        .ok_or_else(|| Error::GaugeFailure("singular period matrix".into()))?;
    Ok((0..forms.len())
        .map(|i| {
            Arc::new(LinearCombination {
                forms: forms.to_vec(),
                coeffs: (0..forms.len()).map(|a| inv[(a, i)]).collect(),
            }) as SharedForm<'a>
        })
        .collect())
}

/// Number of sub-gap eigenvalues of a spectral package.
pub fn betti(spectral: &SpectralPackage) -> usize {
    spectral.kernel_dim
}

/// ĉ[i][j][l] = (vol/m) Σ_a ⟨ω_i ∧ ω_j, ω_l⟩(x_a), with its Gram resolution.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct StructureConstantTensor {
    pub degrees: (usize, usize),
    pub raw: Vec<Vec<Vec<f64>>>,
    pub gram: Vec<Vec<f64>>,
    /// Coefficients N with ω_i ∧ ω_j ≈ Σ_l N[i][j][l] ω_l.
    pub normalized: Vec<Vec<Vec<f64>>>,
}

impl StructureConstantTensor {
    pub fn is_empty(&self) -> bool {
        self.raw.is_empty() || self.raw[0].is_empty() || self.gram.is_empty()
    }

    /// max |ĉ[i][j][l] − (−1)^{kℓ} ĉ[j][i][l]| for k = ℓ; zero otherwise.
    pub fn antisymmetry_defect(&self) -> f64 {
        let (k, l) = self.degrees;
        if k != l {
            return 0.0;
        }
        let sign = if (k * l) % 2 == 0 { 1.0 } else { -1.0 };
        let mut worst = 0.0f64;
        for i in 0..self.raw.len() {
            for j in 0..self.raw.len() {
                for (a, b) in self.raw[i][j].iter().zip(&self.raw[j][i]) {
                    worst = worst.max((a - sign * b).abs());
                }
            }
        }
        worst
    }
}

pub fn structure_constants(
    forms_k: &[SharedForm<'_>],
    forms_l: &[SharedForm<'_>],
    forms_kl: &[SharedForm<'_>],
    cloud: &PointCloud,
    vol: f64,
) -> Result<StructureConstantTensor> {
    let n = cloud.intrinsic_dim();
    let deg = |fs: &[SharedForm<'_>]| fs.first().map(|f| f.degree());
    let (k, l) = match (deg(forms_k), deg(forms_l)) {
        (Some(k), Some(l)) => (k, l),
        _ => {
            return Ok(StructureConstantTensor {
                degrees: (deg(forms_k).unwrap_or(0), deg(forms_l).unwrap_or(0)),
                raw: Vec::new(),
                gram: Vec::new(),
                normalized: Vec::new(),
            })
        }
    };
    if k + l > n {
        return Err(Error::InvalidDegree { k: k + l, d: n });
    }
    for (fs, want) in [(forms_k, k), (forms_l, l), (forms_kl, k + l)] {
        if let Some(f) = fs.iter().find(|f| f.degree() != want) {
            return Err(Error::DegreeMismatch {
                expected: want,
                found: f.degree(),
            });
        }
    }
    let points: Vec<&[f64]> = cloud.iter().collect();
    let eval =
        |fs: &[SharedForm<'_>]| -> Result<Vec<Vec<KVector>>> { fs.iter().map(|f| f.eval_many(&points)).collect() };
    let (a, b, c) = (eval(forms_k)?, eval(forms_l)?, eval(forms_kl)?);
    let w = vol / cloud.len() as f64;
    let mut raw = vec![vec![vec![0.0; c.len()]; b.len()]; a.len()];
    for (i, ai) in a.iter().enumerate() {
        for (j, bj) in b.iter().enumerate() {
            let prods: Vec<KVector> = ai
                .par_iter()
                .zip(bj.par_iter())
                .map(|(x, y)| exterior::wedge(x, y))
                .collect::<Result<_>>()?;
            for (l_idx, cl) in c.iter().enumerate() {
                let mut acc = 0.0;
                for (p, q) in prods.iter().zip(cl) {
                    acc += exterior::inner(p, q)?;
                }
                raw[i][j][l_idx] = w * acc;
            }
        }
    }
    let r = c.len();
    let mut gram = vec![vec![0.0; r]; r];
    for x in 0..r {
        for y in x..r {
            let mut acc = 0.0;
            for (p, q) in c[x].iter().zip(&c[y]) {
                acc += exterior::inner(p, q)?;
            }
            gram[x][y] = w * acc;
            gram[y][x] = w * acc;
        }
    }
    let normalized = if r == 0 {
        vec![vec![Vec::new(); b.len()]; a.len()]
    } else {
        let g = na::DMatrix::from_fn(r, r, |x, y| gram[x][y]);
        let chol = g
            .cholesky()
            .ok_or_else(|| Error::GaugeFailure("Gram matrix of the product basis is not positive definite".into()))?;
        raw.iter()
            .map(|row| {
                row.iter()
                    .map(|cij| chol.solve(&na::DVector::from_column_slice(cij)).as_slice().to_vec())
                    .collect()
            })
            .collect()
    };
    Ok(StructureConstantTensor {
        degrees: (k, l),
        raw,
        gram,
        normalized,
    })
}

/// Where ∫p₁ is evaluated.
pub enum PontryaginDomain<'c> {
    /// vol̂ × mean over samples of ⟨p₁(x_a), oriented unit tangent 4-vector⟩.
    Fundamental,
    Chain(&'c SimplicialChain, usize),
}

/// ∫ p₁(R̂) over the fundamental class or a 4-chain.
pub fn pontryagin_number(
    geometry: &Geometry,
    orientation: OrientationSource<'_>,
    domain: PontryaginDomain<'_>,
) -> Result<f64> {
    let curv = geometry
        .curvature
        .as_ref()
        .ok_or_else(|| Error::InvalidConfig("Pontryagin numbers need B̂; build the geometry with curvature".into()))?;
    if geometry.field.n() != 4 {
        return Err(Error::InvalidDegree {
            k: 4,
            d: geometry.field.n(),
        });
    }
    match domain {
        PontryaginDomain::Fundamental => {
            let signs = orient_frames(&geometry.field, &geometry.cloud, orientation)?;
            let m = geometry.cloud.len();
            let vals: Vec<f64> = (0..m)
                .into_par_iter()
                .map(|i| -> Result<f64> {
                    let frame = geometry.field.frame(i);
                    let form = pontryagin_form(curv.sym(i), &frame, 1)?;
                    let unit = exterior::exterior_power(&frame, 4)?;
                    let pairing: f64 = form
                        .coeffs()
                        .iter()
                        .zip(unit.column(0).iter())
                        .map(|(a, b)| a * b)
                        .sum();
                    Ok(signs[i] * pairing)
                })
                .collect::<Result<_>>()?;
            Ok(geometry.config.vol * vals.iter().sum::<f64>() / m as f64)
        }
        PontryaginDomain::Chain(chain, order) => {
            let field = PontryaginField {
                geometry,
                normalization: curv.normalization(),
            };
            integrate_chain(&field, chain, order)
        }
    }
}

/// Largest distance max_a ‖ω_a(x) − η_a(x)‖ over the given points.
pub fn sup_distance(a: &dyn FormField, b: &dyn FormField, points: &[&[f64]]) -> Result<f64> {
    let va = a.eval_many(points)?;
    let vb = b.eval_many(points)?;
    let mut worst = 0.0f64;
    for (x, y) in va.iter().zip(&vb) {
        let diff: f64 = x
            .coeffs()
            .iter()
            .zip(y.coeffs())
            .map(|(p, q)| (p - q) * (p - q))
            .sum::<f64>()
            .sqrt();
        worst = worst.max(diff);
    }
    Ok(worst)
}
