use std::f64::consts::PI;
use std::sync::Arc;

use cloudhodge::cohomology::*;
use cloudhodge::exterior::KVector;
use cloudhodge::zoo::{oracle_cycles, ManifoldSpec, Simplex, SimplicialChain, DEFAULT_REFINEMENT};
use cloudhodge::Error;
use nalgebra as na;
use proptest::prelude::*;

fn segment(a: &[f64], b: &[f64]) -> SimplicialChain {
    SimplicialChain {
        degree: 1,
        simplices: vec![Simplex {
            vertices: vec![a.to_vec(), b.to_vec()],
            coeff: 1.0,
        }],
        name: "segment".into(),
        refinement: 1,
    }
}

fn torus_forms(k: usize) -> Vec<SharedForm<'static>> {
    let spec = ManifoldSpec::flat_torus(2).unwrap();
    let b = if k == 1 { 2 } else { 1 };
    (0..b)
        .map(|index| {
            Arc::new(OracleForm {
                spec: spec.clone(),
                degree: k,
                index,
            }) as SharedForm<'static>
        })
        .collect()
}

/// x ↦ (a·x) b for a 1-form with linearly varying coefficients.
struct LinearOneForm {
    a: Vec<f64>,
    b: Vec<f64>,
}

impl FormField for LinearOneForm {
    fn dim(&self) -> usize {
        self.b.len()
    }
    fn degree(&self) -> usize {
        1
    }
    fn eval(&self, x: &[f64]) -> cloudhodge::Result<KVector> {
        let s: f64 = self.a.iter().zip(x).map(|(p, q)| p * q).sum();
        Ok(KVector::vector(&self.b).scaled(s))
    }
}

#[test]
fn constant_form_over_segment() {
    let dx = ConstantForm(KVector::vector(&[1.0, 0.0]));
    let v = integrate_chain(&dx, &segment(&[0.0, 0.0], &[1.0, 0.0]), DEFAULT_QUAD_ORDER).unwrap();
    assert!((v - 1.0).abs() < 1e-15);
}

#[test]
fn angle_form_over_torus_loop() {
    let loops = oracle_cycles(&ManifoldSpec::flat_torus(2).unwrap(), 1, DEFAULT_REFINEMENT).unwrap();
    let forms = torus_forms(1);
    let v = integrate_chain(forms[0].as_ref(), &loops[0], DEFAULT_QUAD_ORDER).unwrap();
    // each chord of angle h is cut into 4 pieces; a piece centroid at offset u from the
    // chord midpoint sees the unit tangent at angle α with cos α = cos(h/2)/√(cos²(h/2)+u²)
    let h = 2.0 * PI / DEFAULT_REFINEMENT as f64;
    let (half, dist) = ((h / 2.0).sin(), (h / 2.0).cos());
    let per_chord: f64 = (0..4)
        .map(|i| {
            let u = half * ((2 * i + 1) as f64 / 4.0 - 1.0);
            (2.0 * half / 4.0) * dist / (dist * dist + u * u).sqrt()
        })
        .sum();
    let want = DEFAULT_REFINEMENT as f64 * per_chord / (2.0 * PI);
    assert!((v - want).abs() < 1e-12, "{v} vs {want}");
    assert!((v - 1.0).abs() < 1e-3);
    let cross = integrate_chain(forms[1].as_ref(), &loops[0], DEFAULT_QUAD_ORDER).unwrap();
    assert!(cross.abs() < 1e-12);
}

#[test]
fn opposite_orientations_cancel() {
    let tri = vec![vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.2], vec![0.0, 1.0, -0.3]];
    let mut flipped = tri.clone();
    flipped.swap(1, 2);
    let chain = SimplicialChain {
        degree: 2,
        simplices: vec![
            Simplex {
                vertices: tri,
                coeff: 1.0,
            },
            Simplex {
                vertices: flipped,
                coeff: 1.0,
            },
        ],
        name: "pair".into(),
        refinement: 1,
    };
    let w = ConstantForm(KVector::from_coeffs(3, 2, vec![0.3, -1.2, 0.7]).unwrap());
    assert!(integrate_chain(&w, &chain, 2).unwrap().abs() < 1e-15);
}

#[test]
fn degree_mismatch_is_rejected() {
    let w = ConstantForm(KVector::from_coeffs(2, 2, vec![1.0]).unwrap());
    assert!(matches!(
        integrate_chain(&w, &segment(&[0.0, 0.0], &[1.0, 0.0]), 0),
        Err(Error::DegreeMismatch { .. })
    ));
}

#[test]
fn triangle_area_and_refinement_counts() {
    let tri = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 3.0]];
    let chain = SimplicialChain {
        degree: 2,
        simplices: vec![Simplex {
            vertices: tri.clone(),
            coeff: 1.0,
        }],
        name: "t".into(),
        refinement: 1,
    };
    let area = ConstantForm(KVector::from_coeffs(2, 2, vec![1.0]).unwrap());
    for order in 0..4 {
        assert!((integrate_chain(&area, &chain, order).unwrap() - 3.0).abs() < 1e-13);
        let c = refined_centroids(&tri, order);
        assert_eq!(c.len(), 4usize.pow(order as u32));
    }
    let tet: Vec<Vec<f64>> = vec![
        vec![0.0; 3],
        vec![1.0, 0.0, 0.0],
        vec![0.0, 1.0, 0.0],
        vec![0.0, 0.0, 1.0],
    ];
    assert_eq!(refined_centroids(&tet, 2).len(), 64);
}

proptest! {
    // centroid quadrature is exact for affine integrands, on every refinement level
    #[test]
    fn quadrature_exact_for_affine_data(
        verts in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 3), 2),
        a in prop::collection::vec(-1.0f64..1.0, 3),
        b in prop::collection::vec(-1.0f64..1.0, 3),
        order in 0usize..4,
    ) {
        let form = LinearOneForm { a: a.clone(), b: b.clone() };
        let chain = segment(&verts[0], &verts[1]);
        let mid: Vec<f64> = verts[0].iter().zip(&verts[1]).map(|(p, q)| 0.5 * (p + q)).collect();
        let e: Vec<f64> = verts[1].iter().zip(&verts[0]).map(|(p, q)| p - q).collect();
        let want = a.iter().zip(&mid).map(|(p, q)| p * q).sum::<f64>() * b.iter().zip(&e).map(|(p, q)| p * q).sum::<f64>();
        let got = integrate_chain(&form, &chain, order).unwrap();
        prop_assert!((got - want).abs() < 1e-12);
    }

    #[test]
    fn refined_centroids_average_to_centroid(
        verts in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 4), 4),
        order in 0usize..3,
    ) {
        let c = refined_centroids(&verts, order);
        for axis in 0..4 {
            let mean = c.iter().map(|p| p[axis]).sum::<f64>() / c.len() as f64;
            let want = verts.iter().map(|v| v[axis]).sum::<f64>() / 4.0;
            prop_assert!((mean - want).abs() < 1e-12);
        }
    }
}

#[test]
fn oracle_torus_periods_are_the_identity() {
    let loops = oracle_cycles(&ManifoldSpec::flat_torus(2).unwrap(), 1, DEFAULT_REFINEMENT).unwrap();
    let p = period_matrix(&torus_forms(1), &loops, DEFAULT_QUAD_ORDER).unwrap();
    assert!(p.identity_defect() < 1e-3);
    let squares = oracle_cycles(&ManifoldSpec::flat_torus(2).unwrap(), 2, 32).unwrap();
    let p2 = period_matrix(&torus_forms(2), &squares, 1).unwrap();
    assert!(p2.identity_defect() < 1e-2, "{:?}", p2.matrix);
}

#[test]
fn period_matrix_errors_and_linearity() {
    let one: Vec<SharedForm<'static>> = vec![Arc::new(ConstantForm(KVector::scalar(3, 1.0)))];
    assert!(matches!(period_matrix(&one, &[], 2), Err(Error::GaugeFailure(_))));
    let loops = oracle_cycles(&ManifoldSpec::flat_torus(2).unwrap(), 1, DEFAULT_REFINEMENT).unwrap();
    let forms = torus_forms(1);
    let doubled: Vec<SharedForm<'static>> = vec![
        Arc::new(LinearCombination {
            forms: vec![forms[0].clone()],
            coeffs: vec![2.0],
        }),
        forms[1].clone(),
    ];
    let p = period_matrix(&forms, &loops, 2).unwrap();
    let q = period_matrix(&doubled, &loops, 2).unwrap();
    for j in 0..2 {
        assert!((q.matrix[j][0] - 2.0 * p.matrix[j][0]).abs() < 1e-14);
        assert_eq!(q.matrix[j][1], p.matrix[j][1]);
    }
    // rank-deficient basis
    let same = vec![forms[0].clone(), forms[0].clone()];
    assert!(matches!(period_matrix(&same, &loops, 2), Err(Error::GaugeFailure(_))));
}

#[test]
fn gauge_fixing_undoes_orthogonal_mixing() {
    let loops = oracle_cycles(&ManifoldSpec::flat_torus(2).unwrap(), 1, DEFAULT_REFINEMENT).unwrap();
    let forms = torus_forms(1);
    let (c, s) = (0.6f64, 0.8f64);
    let q = na::Matrix2::new(c, -s, s, c);
    let mixed: Vec<SharedForm<'static>> = (0..2)
        .map(|a| {
            Arc::new(LinearCombination {
                forms: forms.clone(),
                coeffs: vec![q[(0, a)], q[(1, a)]],
            }) as SharedForm<'static>
        })
        .collect();
    let p = period_matrix(&mixed, &loops, 2).unwrap();
    let fixed = gauge_fix(&mixed, &p).unwrap();
    let p_fixed = period_matrix(&fixed, &loops, 2).unwrap();
    assert!(p_fixed.identity_defect() < 1e-12);
    // the fixed basis is the dual basis up to the uniform chord factor
    let direct = gauge_fix(&forms, &period_matrix(&forms, &loops, 2).unwrap()).unwrap();
    let pts: Vec<Vec<f64>> = (0..20)
        .map(|i| {
            let (a, b) = (0.31 * i as f64, 1.7 * i as f64);
            vec![a.cos(), a.sin(), b.cos(), b.sin()]
        })
        .collect();
    let refs: Vec<&[f64]> = pts.iter().map(|p| p.as_slice()).collect();
    for i in 0..2 {
        assert!(sup_distance(fixed[i].as_ref(), direct[i].as_ref(), &refs).unwrap() < 1e-12);
    }
    // idempotence
    let again = gauge_fix(&fixed, &p_fixed).unwrap();
    for i in 0..2 {
        assert!(sup_distance(again[i].as_ref(), fixed[i].as_ref(), &refs).unwrap() < 1e-10);
    }
}

#[test]
fn torus_structure_constants_from_oracle_forms() {
    let spec = ManifoldSpec::flat_torus(2).unwrap();
    let cloud = cloudhodge::zoo::sample(&spec, 4000, 1).unwrap();
    let t = structure_constants(&torus_forms(1), &torus_forms(1), &torus_forms(2), &cloud, spec.volume()).unwrap();
    let raw = t.raw[0][1][0];
    // pointwise ⟨dθ∧dφ, dθ∧dφ⟩/(2π)⁴ is constant, so the Monte Carlo mean is exact
    assert!((raw - 1.0 / (4.0 * PI * PI)).abs() < 1e-12, "{raw}");
    assert!((t.normalized[0][1][0] - 1.0).abs() < 1e-12);
    assert!((t.raw[1][0][0] + raw).abs() < 1e-15);
    assert!(t.raw[0][0][0].abs() < 1e-15);
    assert!(t.antisymmetry_defect() < 1e-15);
}

#[test]
fn structure_constants_degree_checks() {
    let s2 = ManifoldSpec::sphere(2, 1.0).unwrap();
    let cloud = cloudhodge::zoo::sample(&s2, 50, 1).unwrap();
    let empty = structure_constants(&[], &[], &[], &cloud, 4.0 * PI).unwrap();
    assert!(empty.is_empty());
    let two: Vec<SharedForm<'static>> = vec![Arc::new(ConstantForm(
        KVector::from_coeffs(3, 2, vec![1.0, 0.0, 0.0]).unwrap(),
    ))];
    assert!(matches!(
        structure_constants(&two, &two, &[], &cloud, 4.0 * PI),
        Err(Error::InvalidDegree { .. })
    ));
}
