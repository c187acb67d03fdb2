//! Second fundamental form, mean curvature, Weitzenböck endomorphisms, Riemann
//! tensor and first Pontryagin form estimated from a sampled submanifold.
//!
//! B̂ is stored per sample in ambient coordinates as a d × d × d array. Both
//! slots are composed with the empirical tangent projector, so B̂(u, ·) and
//! B̂(·, v) vanish for normal u, v.

use std::collections::VecDeque;
use std::f64::consts::PI;

use nalgebra as na;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exterior::{self, KVector};
use crate::graph::NeighborGraph;
use crate::kernel::{dist_sq, KernelConfig};
use crate::tangent::ProjectionField;
use crate::tensor::{BilinearMap, FourTensor};
use crate::zoo::{self, ManifoldSpec, PointCloud};

/// Which zero-order term accompanies the diffusion part of the Hodge operator.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZeroOrderTerm {
    /// End_H(B̂) − Σ_a [D(Â_a)² + D(Â_a²)]: the Weitzenböck curvature term minus
    /// the normal-curvature term produced by the ambient diffusion.
    #[default]
    Bochner,
    /// End_H(B̂) alone.
    MeanCurvature,
    /// No zero-order term.
    None,
}

/// Normalization of the first-moment sum defining B̂.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BNormalization {
    /// Constant factor vol/(2m t_eff).
    Kernel,
    /// Inverse of the local second-moment matrix Σ_j w_j a_j a_jᵀ, a_j = V_pᵀ(x_j − p).
    #[default]
    Regression,
}

/// Frame form of B̂ at one point: F[out][α][β] with α, β tangent-frame slots.
fn frame_b(
    p: &[f64],
    frame: &[f64],
    neighbors: impl Iterator<Item = (usize, f64)>,
    cloud: &PointCloud,
    field: &ProjectionField,
    scale: f64,
    norm: BNormalization,
) -> Option<Vec<f64>> {
    let d = p.len();
    let n = field.n();
    let mut f = vec![0.0; d * n * n];
    let mut moment = na::DMatrix::<f64>::zeros(n, n);
    let mut a = vec![0.0; n];
    let mut g = vec![0.0; n * n];
    let mut any = false;
    for (j, w) in neighbors {
        let x = cloud.point(j);
        let wj = scale * w;
        // a = Vᵀ (x − p)
        for al in 0..n {
            a[al] = (0..d).map(|r| frame[r * n + al] * (x[r] - p[r])).sum();
        }
        let vj = field.frame_slice(j);
        // g = V_jᵀ V
        for c in 0..n {
            for b in 0..n {
                g[c * n + b] = (0..d).map(|r| vj[r * n + c] * frame[r * n + b]).sum();
            }
        }
        any = true;
        for al in 0..n {
            for be in 0..n {
                moment[(al, be)] += w * a[al] * a[be];
            }
        }
        for out in 0..d {
            for b in 0..n {
                // (Π̂_{x_j} V)[out][b] = Σ_c V_j[out][c] g[c][b]
                let m: f64 = (0..n).map(|c| vj[out * n + c] * g[c * n + b]).sum();
                if m == 0.0 {
                    continue;
                }
                let s = wj * m;
                for al in 0..n {
                    f[(out * n + al) * n + b] += s * a[al];
                }
            }
        }
    }
    if !any {
        return None;
    }
    if norm == BNormalization::Regression {
        let inv = moment.try_inverse()?;
        // F[out][α][β] ← scale⁻¹ Σ_γ S⁻¹[α][γ] F[out][γ][β]
        let mut g = vec![0.0; d * n * n];
        for out in 0..d {
            for al in 0..n {
                for be in 0..n {
                    g[(out * n + al) * n + be] =
                        (0..n).map(|c| inv[(al, c)] * f[(out * n + c) * n + be]).sum::<f64>() / scale;
                }
            }
        }
        f = g;
    }
    // normal projection of the output slot
    for al in 0..n {
        for b in 0..n {
            let col: Vec<f64> = (0..d).map(|o| f[(o * n + al) * n + b]).collect();
            for c in 0..n {
                let coef: f64 = (0..d).map(|r| frame[r * n + c] * col[r]).sum();
                for o in 0..d {
                    f[(o * n + al) * n + b] -= frame[o * n + c] * coef;
                }
            }
        }
    }
    Some(f)
}

/// Lifts a frame-form F to the ambient map B(u, v) = Σ F[out][α][β] (Vᵀu)_α (Vᵀv)_β.
fn ambient_from_frame(f: &[f64], frame: &[f64], d: usize, n: usize) -> BilinearMap {
    let mut b = BilinearMap::zeros(d);
    let mut tmp = vec![0.0; n * d];
    for out in 0..d {
        // tmp[α][v] = Σ_β F[out][α][β] V[v][β]
        for al in 0..n {
            for v in 0..d {
                tmp[al * d + v] = (0..n).map(|be| f[(out * n + al) * n + be] * frame[v * n + be]).sum();
            }
        }
        for u in 0..d {
            for v in 0..d {
                *b.get_mut(out, u, v) = (0..n).map(|al| frame[u * n + al] * tmp[al * d + v]).sum();
            }
        }
    }
    b
}

/// B̂ at an arbitrary point p with empirical frame `frame` (row-major d × n).
///
/// Weights are vol/(2m t_eff) Φ_t χ_δ with t_eff from [`KernelConfig::effective_t`].
pub fn empirical_b(
    cloud: &PointCloud,
    field: &ProjectionField,
    config: &KernelConfig,
    p: &[f64],
    frame: &na::DMatrix<f64>,
    norm: BNormalization,
) -> Result<BilinearMap> {
    let d = cloud.dim();
    let n = field.n();
    let frame_rows: Vec<f64> = (0..d)
        .flat_map(|r| (0..n).map(move |c| (r, c)))
        .map(|(r, c)| frame[(r, c)])
        .collect();
    let scale = b_scale(cloud, config);
    let neighbors = cloud
        .iter()
        .enumerate()
        .map(|(j, x)| (j, config.weight_sq(dist_sq(p, x))))
        .filter(|&(_, w)| w > 0.0)
        .filter(|&(j, _)| dist_sq(p, cloud.point(j)) > 0.0);
    let f = frame_b(p, &frame_rows, neighbors, cloud, field, scale, norm)
        .ok_or(Error::IsolatedPoint { index: usize::MAX })?;
    Ok(ambient_from_frame(&f, &frame_rows, d, n))
}

fn b_scale(cloud: &PointCloud, config: &KernelConfig) -> f64 {
    config.vol / (2.0 * cloud.len() as f64 * config.effective_t())
}

/// Per-sample B̂, its symmetrization and Ĥ.
#[derive(Clone, Debug)]
pub struct SecondFundamentalField {
    dim: usize,
    n: usize,
    raw: Vec<BilinearMap>,
    sym: Vec<BilinearMap>,
    mean: Vec<Vec<f64>>,
    norm: BNormalization,
}

pub fn second_fundamental_field(
    cloud: &PointCloud,
    field: &ProjectionField,
    graph: &NeighborGraph,
    config: &KernelConfig,
    norm: BNormalization,
) -> Result<SecondFundamentalField> {
    let d = cloud.dim();
    let n = field.n();
    let scale = b_scale(cloud, config);
    let raw: Vec<Result<BilinearMap>> = (0..cloud.len())
        .into_par_iter()
        .map(|i| {
            let frame = field.frame_slice(i);
            let neighbors = graph.row(i).filter(|&(j, _)| j != i);
            let f = frame_b(cloud.point(i), frame, neighbors, cloud, field, scale, norm)
                .ok_or(Error::IsolatedPoint { index: i })?;
            Ok(ambient_from_frame(&f, frame, d, n))
        })
        .collect();
    let raw: Vec<BilinearMap> = raw.into_iter().collect::<Result<_>>()?;
    let sym: Vec<BilinearMap> = raw.par_iter().map(symmetrize).collect();
    let mean = sym.iter().map(mean_curvature).collect();
    Ok(SecondFundamentalField {
        dim: d,
        n,
        raw,
        sym,
        mean,
        norm,
    })
}

impl SecondFundamentalField {
    pub fn len(&self) -> usize {
        self.raw.len()
    }

    pub fn is_empty(&self) -> bool {
        self.raw.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn raw(&self, i: usize) -> &BilinearMap {
        &self.raw[i]
    }

    pub fn sym(&self, i: usize) -> &BilinearMap {
        &self.sym[i]
    }

    pub fn mean_curvature(&self, i: usize) -> &[f64] {
        &self.mean[i]
    }

    pub fn normalization(&self) -> BNormalization {
        self.norm
    }
}

/// ½ (B̂(u, v) + B̂(v, u)).
pub fn symmetrize(b: &BilinearMap) -> BilinearMap {
    b.symmetrized()
}

/// Ĥ = Σ_i B̂^sym(e_i, e_i) over the ambient basis.
pub fn mean_curvature(bsym: &BilinearMap) -> Vec<f64> {
    bsym.trace()
}

fn frame_columns(frame: &na::DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..frame.ncols())
        .map(|c| frame.column(c).iter().copied().collect())
        .collect()
}

/// Â_a[j][l] = B̂^sym(ê_j, ê_l)_a for every ambient component a.
fn shape_components(bsym: &BilinearMap, frame: &na::DMatrix<f64>) -> Vec<na::DMatrix<f64>> {
    let vt = frame.transpose();
    (0..bsym.dim()).map(|a| &vt * bsym.component(a) * frame).collect()
}

/// c_jl = ⟨Ĥ, B̂^sym(ê_j, ê_l)⟩.
fn mean_contraction(bsym: &BilinearMap, h: &[f64], frame: &na::DMatrix<f64>) -> na::DMatrix<f64> {
    let n = frame.ncols();
    let cols = frame_columns(frame);
    na::DMatrix::from_fn(n, n, |j, l| {
        bsym.eval(&cols[j], &cols[l]).iter().zip(h).map(|(x, y)| x * y).sum()
    })
}

/// End_H(B̂) on Λ^k of the tangent frame, in C(n,k) frame coordinates.
pub fn weitzenboeck_compressed(
    bsym: &BilinearMap,
    h: &[f64],
    frame: &na::DMatrix<f64>,
    k: usize,
) -> Result<na::DMatrix<f64>> {
    let n = frame.ncols();
    if k > n {
        return Err(Error::InvalidDegree { k, d: n });
    }
    if k == 0 {
        return Ok(na::DMatrix::zeros(1, 1));
    }
    let c = mean_contraction(bsym, h, frame);
    let c = (&c + c.transpose()) * 0.5;
    exterior::derivation(&c, k)
}

/// Ŵ = Σ_{j,l} ⟨Ĥ, B̂^sym(ê_j, ê_l)⟩ ê_j ∧ i_{ê_l} Λ^kΠ̂ as a C(d,k) × C(d,k) matrix.
/// Degree 0 gives the zero endomorphism.
pub fn weitzenboeck(bsym: &BilinearMap, h: &[f64], frame: &na::DMatrix<f64>, k: usize) -> Result<na::DMatrix<f64>> {
    let d = frame.nrows();
    if k == 0 {
        return Ok(na::DMatrix::zeros(1, 1));
    }
    let lift = exterior::lift_map(frame, k)?;
    let core = weitzenboeck_compressed(bsym, h, frame, k)?;
    let l = lift.matrix();
    let w = l * core * l.transpose();
    debug_assert_eq!(w.nrows(), exterior::binomial(d, k));
    Ok(w)
}

/// Zero-order term of the Hodge operator in frame coordinates.
pub fn zero_order_compressed(
    bsym: &BilinearMap,
    h: &[f64],
    frame: &na::DMatrix<f64>,
    k: usize,
    term: ZeroOrderTerm,
) -> Result<na::DMatrix<f64>> {
    let n = frame.ncols();
    let size = exterior::binomial(n, k);
    if k == 0 || term == ZeroOrderTerm::None {
        return Ok(na::DMatrix::zeros(size, size));
    }
    let w = weitzenboeck_compressed(bsym, h, frame, k)?;
    if term == ZeroOrderTerm::MeanCurvature {
        return Ok(w);
    }
    let mut correction = na::DMatrix::zeros(size, size);
    for a in shape_components(bsym, frame) {
        let a = (&a + a.transpose()) * 0.5;
        let da = exterior::derivation(&a, k)?;
        correction += &da * &da + exterior::derivation(&(&a * &a), k)?;
    }
    let z = w - correction;
    Ok((&z + z.transpose()) * 0.5)
}

/// R̂(X,Y,Z,W) = ⟨B̂(X,Z), B̂(Y,W)⟩ − ⟨B̂(X,W), B̂(Y,Z)⟩ in ambient coordinates.
pub fn riemann_curvature(bsym: &BilinearMap) -> FourTensor {
    FourTensor::from_gauss(bsym)
}

/// R̂ components in the frame, n⁴ entries indexed ((i n + j) n + a) n + b.
pub fn frame_curvature(bsym: &BilinearMap, frame: &na::DMatrix<f64>) -> Vec<f64> {
    let n = frame.ncols();
    let cols = frame_columns(frame);
    let mut b = vec![Vec::new(); n * n];
    for i in 0..n {
        for j in 0..n {
            b[i * n + j] = bsym.eval(&cols[i], &cols[j]);
        }
    }
    let dot = |x: &[f64], y: &[f64]| -> f64 { x.iter().zip(y).map(|(p, q)| p * q).sum() };
    let mut r = vec![0.0; n.pow(4)];
    for x in 0..n {
        for y in 0..n {
            for z in 0..n {
                for w in 0..n {
                    r[((x * n + y) * n + z) * n + w] =
                        dot(&b[x * n + z], &b[y * n + w]) - dot(&b[x * n + w], &b[y * n + z]);
                }
            }
        }
    }
    r
}

/// Coefficient of ê1∧ê2∧ê3∧ê4 in p₁ = −(1/8π²) tr(Ω∧Ω), with
/// Ω^i_j = ½ Σ_ab R_ijab ê^a ∧ ê^b for frame components R of a 4-manifold.
pub fn pontryagin_density(r: &[f64]) -> f64 {
    let n = 4;
    let at = |i: usize, j: usize, a: usize, b: usize| r[((i * n + j) * n + a) * n + b];
    let mut trace = 0.0;
    for perm in PERMUTATIONS_4.iter() {
        let (a, b, c, d, sign) = (perm.0[0], perm.0[1], perm.0[2], perm.0[3], perm.1);
        let mut acc = 0.0;
        for i in 0..n {
            for j in 0..n {
                acc += at(i, j, a, b) * at(j, i, c, d);
            }
        }
        trace += sign * acc;
    }
    // Ω∧Ω carries ¼ from the two halves
    -(0.25 * trace) / (8.0 * PI * PI)
}

const PERMUTATIONS_4: [([usize; 4], f64); 24] = [
    ([0, 1, 2, 3], 1.0),
    ([0, 1, 3, 2], -1.0),
    ([0, 2, 1, 3], -1.0),
    ([0, 2, 3, 1], 1.0),
    ([0, 3, 1, 2], 1.0),
    ([0, 3, 2, 1], -1.0),
    ([1, 0, 2, 3], -1.0),
    ([1, 0, 3, 2], 1.0),
    ([1, 2, 0, 3], 1.0),
    ([1, 2, 3, 0], -1.0),
    ([1, 3, 0, 2], -1.0),
    ([1, 3, 2, 0], 1.0),
    ([2, 0, 1, 3], 1.0),
    ([2, 0, 3, 1], -1.0),
    ([2, 1, 0, 3], -1.0),
    ([2, 1, 3, 0], 1.0),
    ([2, 3, 0, 1], 1.0),
    ([2, 3, 1, 0], -1.0),
    ([3, 0, 1, 2], -1.0),
    ([3, 0, 2, 1], 1.0),
    ([3, 1, 0, 2], 1.0),
    ([3, 1, 2, 0], -1.0),
    ([3, 2, 0, 1], -1.0),
    ([3, 2, 1, 0], 1.0),
];

/// p₁(R̂) at a point as an element of Λ⁴ R^d supported on the tangent 4-plane.
pub fn pontryagin_form(bsym: &BilinearMap, frame: &na::DMatrix<f64>, r: usize) -> Result<KVector> {
    let n = frame.ncols();
    if r != 1 {
        return Err(Error::Unsupported(format!("Pontryagin form p_{r}")));
    }
    if n != 4 {
        return Err(Error::InvalidDegree { k: 4, d: n });
    }
    let coef = pontryagin_density(&frame_curvature(bsym, frame));
    let vol = exterior::exterior_power(frame, 4)?;
    let coeffs: Vec<f64> = vol.column(0).iter().map(|x| coef * x).collect();
    KVector::from_coeffs(frame.nrows(), 4, coeffs)
}

/// How per-sample orientation signs are chosen.
pub enum OrientationSource<'a> {
    /// Compare with the analytic oriented frame of a zoo manifold.
    Oracle(&'a ManifoldSpec),
    /// Propagate agreement of det(V_iᵀ V_j) across the neighbour graph.
    Graph(&'a NeighborGraph),
}

/// Sign s_i ∈ {±1} such that s_i Λ^n V_i is positively oriented.
pub fn orient_frames(field: &ProjectionField, cloud: &PointCloud, source: OrientationSource<'_>) -> Result<Vec<f64>> {
    let m = field.len();
    let n = field.n();
    match source {
        OrientationSource::Oracle(spec) => (0..m)
            .map(|i| {
                let want = zoo::oracle_oriented_frame(spec, cloud.point(i))?;
                let det = (field.frame(i).transpose() * want).determinant();
                if det.abs() < 1e-3 {
                    return Err(Error::Unoriented(format!(
                        "sample {i}: empirical plane is transverse to the oracle plane"
                    )));
                }
                Ok(det.signum())
            })
            .collect(),
        OrientationSource::Graph(graph) => {
            let mut sign = vec![0.0; m];
            let mut queue = VecDeque::new();
            let mut components = 0;
            for root in 0..m {
                if sign[root] != 0.0 {
                    continue;
                }
                components += 1;
                sign[root] = 1.0;
                queue.push_back(root);
                while let Some(i) = queue.pop_front() {
                    let vi = field.frame_slice(i);
                    for &j in graph.neighbors(i) {
                        let j = j as usize;
                        if sign[j] != 0.0 {
                            continue;
                        }
                        let vj = field.frame_slice(j);
                        let d = field.dim();
                        let g = na::DMatrix::from_fn(n, n, |a, b| {
                            (0..d).map(|r| vi[r * n + a] * vj[r * n + b]).sum::<f64>()
                        });
                        let det = g.determinant();
                        if det.abs() < 1e-3 {
                            continue;
                        }
                        sign[j] = sign[i] * det.signum();
                        queue.push_back(j);
                    }
                }
            }
            if components > 1 {
                return Err(Error::Disconnected { components });
            }
            Ok(sign)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::zoo::{oracle_curvature, oracle_oriented_frame, oracle_second_fundamental, ManifoldSpec};

    #[test]
    fn weitzenboeck_of_unit_sphere_oracle() {
        let spec = ManifoldSpec::sphere(2, 1.0).unwrap();
        let p = [0.0, 0.6, 0.8];
        let b = oracle_second_fundamental(&spec, &p).unwrap();
        let h = mean_curvature(&b);
        for (got, want) in h.iter().zip(p) {
            assert!((got + 2.0 * want).abs() < 1e-14);
        }
        let frame = oracle_oriented_frame(&spec, &p).unwrap();
        let w = weitzenboeck(&b, &h, &frame, 1).unwrap();
        let proj = &frame * frame.transpose();
        assert!((w - proj * 2.0).amax() < 1e-14);
    }

    #[test]
    fn weitzenboeck_on_s3_is_nk() {
        let spec = ManifoldSpec::sphere(3, 1.0).unwrap();
        let p = [0.5, 0.5, 0.5, 0.5];
        let b = oracle_second_fundamental(&spec, &p).unwrap();
        let h = mean_curvature(&b);
        let frame = oracle_oriented_frame(&spec, &p).unwrap();
        for k in 1..=3 {
            let w = weitzenboeck_compressed(&b, &h, &frame, k).unwrap();
            let size = exterior::binomial(3, k);
            let want = na::DMatrix::<f64>::identity(size, size) * (3 * k) as f64;
            assert!((w - want).amax() < 1e-13);
        }
    }

    #[test]
    fn weitzenboeck_degree_zero_is_zero() {
        let b = BilinearMap::zeros(3);
        let frame = na::DMatrix::<f64>::identity(3, 2);
        assert_eq!(weitzenboeck(&b, &[0.0; 3], &frame, 0).unwrap().amax(), 0.0);
    }

    #[test]
    fn torus_mean_curvature_and_weitzenboeck() {
        let spec = ManifoldSpec::flat_torus(2).unwrap();
        let p = [1.0, 0.0, 1.0, 0.0];
        let b = oracle_second_fundamental(&spec, &p).unwrap();
        let h = mean_curvature(&b);
        let want = [-1.0, 0.0, -1.0, 0.0];
        for k in 0..4 {
            assert!((h[k] - want[k]).abs() < 1e-15);
        }
        let frame = oracle_oriented_frame(&spec, &p).unwrap();
        let w = weitzenboeck_compressed(&b, &h, &frame, 1).unwrap();
        assert!((w - na::DMatrix::<f64>::identity(2, 2)).amax() < 1e-15);
    }

    #[test]
    fn frame_curvature_matches_ambient_tensor() {
        let spec = ManifoldSpec::cp2();
        let c = zoo::sample(&spec, 2, 3).unwrap();
        let p = c.point(0);
        let b = oracle_second_fundamental(&spec, p).unwrap();
        let frame = oracle_oriented_frame(&spec, p).unwrap();
        let r = riemann_curvature(&b);
        let fr = frame_curvature(&b, &frame);
        assert!(r.in_frame(&frame).iter().zip(&fr).all(|(a, b)| (a - b).abs() < 1e-12));
        let oracle = oracle_curvature(&spec, p).unwrap();
        assert!((oracle.amax() - r.amax()).abs() < 1e-12);
    }

    #[test]
    fn pontryagin_rejects_bad_degrees() {
        let b = BilinearMap::zeros(3);
        let frame = na::DMatrix::<f64>::identity(3, 2);
        assert!(pontryagin_form(&b, &frame, 1).is_err());
        let b = BilinearMap::zeros(5);
        let frame = na::DMatrix::<f64>::identity(5, 4);
        assert!(matches!(pontryagin_form(&b, &frame, 2), Err(Error::Unsupported(_))));
    }

    /// χ(M⁴) = (1/32π²) ∫ (|Rm|² − 4|Ric|² + Scal²) for a homogeneous space.
    fn euler_from_frame_curvature(r: &[f64], vol: f64) -> f64 {
        let n = 4;
        let at = |i: usize, j: usize, a: usize, b: usize| r[((i * n + j) * n + a) * n + b];
        let rm: f64 = r.iter().map(|x| x * x).sum();
        let ric = |j: usize, l: usize| (0..n).map(|i| at(i, j, i, l)).sum::<f64>();
        let ric2: f64 = (0..n)
            .flat_map(|j| (0..n).map(move |l| (j, l)))
            .map(|(j, l)| ric(j, l).powi(2))
            .sum();
        let scal: f64 = (0..n).map(|j| ric(j, j)).sum();
        (rm - 4.0 * ric2 + scal * scal) * vol / (32.0 * PI * PI)
    }

    #[test]
    fn characteristic_numbers_of_homogeneous_four_manifolds() {
        // (spec, χ, p₁)
        let cases = [
            (ManifoldSpec::cp2(), 3.0, 3.0),
            (ManifoldSpec::cp2().reversed(), 3.0, -3.0),
            (ManifoldSpec::s4(), 2.0, 0.0),
            (ManifoldSpec::product_sphere(), 4.0, 0.0),
        ];
        for (spec, chi, p1) in cases {
            let c = zoo::sample(&spec, 3, 11).unwrap();
            for p in c.iter() {
                let b = oracle_second_fundamental(&spec, p).unwrap();
                let frame = oracle_oriented_frame(&spec, p).unwrap();
                let r = frame_curvature(&b, &frame);
                let e = euler_from_frame_curvature(&r, spec.volume());
                assert!((e - chi).abs() < 1e-10, "{}: χ = {e}", spec.name());
                let form = pontryagin_form(&b, &frame, 1).unwrap();
                let unit = zoo::oracle_volume_vector(&spec, p).unwrap();
                let got = exterior::inner(&form, &unit).unwrap() * spec.volume();
                assert!((got - p1).abs() < 1e-10, "{}: p1 = {got}", spec.name());
            }
        }
    }

    #[test]
    fn pontryagin_form_ignores_frame_choice() {
        let spec = ManifoldSpec::cp2();
        let c = zoo::sample(&spec, 1, 5).unwrap();
        let p = c.point(0);
        let b = oracle_second_fundamental(&spec, p).unwrap();
        let frame = oracle_oriented_frame(&spec, p).unwrap();
        let a = pontryagin_form(&b, &frame, 1).unwrap();
        let theta = 0.7f64;
        let mut rot = na::DMatrix::<f64>::identity(4, 4);
        rot[(0, 0)] = theta.cos();
        rot[(0, 2)] = -theta.sin();
        rot[(2, 0)] = theta.sin();
        rot[(2, 2)] = theta.cos();
        rot[(3, 3)] = -1.0;
        let other = &frame * rot;
        let b2 = pontryagin_form(&b, &other, 1).unwrap();
        assert!((&a - &b2).norm() < 1e-12 * a.norm().max(1.0));
    }

    #[test]
    fn bochner_term_on_spheres_and_tori() {
        for n in 2..=4 {
            let spec = ManifoldSpec::sphere(n, 1.0).unwrap();
            let c = zoo::sample(&spec, 1, 2).unwrap();
            let p = c.point(0);
            let b = oracle_second_fundamental(&spec, p).unwrap();
            let h = mean_curvature(&b);
            let frame = oracle_oriented_frame(&spec, p).unwrap();
            for k in 0..=n {
                let z = zero_order_compressed(&b, &h, &frame, k, ZeroOrderTerm::Bochner).unwrap();
                let size = exterior::binomial(n, k);
                let want = if k == 0 { 0.0 } else { (k * (n - k)) as f64 - k as f64 };
                let want = na::DMatrix::<f64>::identity(size, size) * want;
                assert!((z - want).amax() < 1e-12, "S^{n}, k = {k}");
            }
        }
        let spec = ManifoldSpec::flat_torus(3).unwrap();
        let c = zoo::sample(&spec, 1, 2).unwrap();
        let p = c.point(0);
        let b = oracle_second_fundamental(&spec, p).unwrap();
        let h = mean_curvature(&b);
        let frame = oracle_oriented_frame(&spec, p).unwrap();
        for k in 1..=3 {
            let z = zero_order_compressed(&b, &h, &frame, k, ZeroOrderTerm::Bochner).unwrap();
            let size = exterior::binomial(3, k);
            assert!((z + na::DMatrix::<f64>::identity(size, size) * k as f64).amax() < 1e-12);
        }
    }

    #[test]
    fn bochner_term_annihilates_parallel_two_forms() {
        // the Kähler form of CP² and both factor area forms of S²×S² are parallel
        for (spec, nullity) in [(ManifoldSpec::cp2(), 1), (ManifoldSpec::product_sphere(), 2)] {
            let c = zoo::sample(&spec, 2, 8).unwrap();
            for p in c.iter() {
                let b = oracle_second_fundamental(&spec, p).unwrap();
                let h = mean_curvature(&b);
                let frame = oracle_oriented_frame(&spec, p).unwrap();
                let z = zero_order_compressed(&b, &h, &frame, 2, ZeroOrderTerm::Bochner).unwrap();
                // the diffusion part contributes D(Σ Â_a²) on parallel forms; add it back
                let mut q = na::DMatrix::<f64>::zeros(6, 6);
                for a in shape_components(&b, &frame) {
                    q += exterior::derivation(&(&a * &a), 2).unwrap();
                }
                let curvature_term = z + q;
                let mut ev: Vec<f64> = curvature_term
                    .symmetric_eigen()
                    .eigenvalues
                    .iter()
                    .map(|x| x.abs())
                    .collect();
                ev.sort_by(f64::total_cmp);
                assert!(ev[..nullity].iter().all(|x| *x < 1e-10), "{}: {ev:?}", spec.name());
                assert!(ev[nullity] > 1e-3, "{}: {ev:?}", spec.name());
            }
        }
    }
}
