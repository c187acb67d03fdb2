//! Acceptance checks. Each returns a report; estimator errors become failed reports.

use std::f64::consts::PI;
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, Result};
use cloudhodge::cohomology::{
    gauge_fix, period_matrix, pontryagin_number, structure_constants, sup_distance, NystromForm, OracleForm,
    PontryaginDomain, SharedForm,
};
use cloudhodge::curvature::OrientationSource;
use cloudhodge::exterior::{binomial, exterior_power, inner, interior, lift_map, project_k, wedge, KVector};
use cloudhodge::geometry::{Geometry, GeometryOptions};
use cloudhodge::hodge::{eigensolve, Coordinates, EigenOptions, HodgeOptions, LinearOperator};
use cloudhodge::kernel::{KernelConfig, KernelSpec};
use cloudhodge::rates::{density_rate, density_sup_deviation, sphere_expected_density, RateFit};
use cloudhodge::zoo::{oracle_cycles, sample, sample_rng, ManifoldSpec, PointCloud};
use cloudhodge::Error;
use nalgebra as na;
use rand::Rng;
use serde::Serialize;
use serde_json::{json, Map, Value};

use crate::pipeline::{procrustes, sectional_curvatures, tangent_error, weitzenboeck_errors};

#[derive(Clone, Debug, Serialize)]
pub struct CheckReport {
    pub id: u32,
    pub name: String,
    pub pass: bool,
    pub metrics: Map<String, Value>,
    pub detail: String,
    pub seconds: f64,
    pub budget_seconds: f64,
}

impl CheckReport {
    pub fn line(&self) -> String {
        format!(
            "{} criterion {:>2} {}: {} ({:.1}s of {:.0}s)",
            if self.pass { "PASS" } else { "FAIL" },
            self.id,
            self.name,
            self.detail,
            self.seconds,
            self.budget_seconds
        )
    }
}

/// Metrics plus the verdict on them, before timing is applied.
struct Outcome {
    pass: bool,
    metrics: Map<String, Value>,
    detail: String,
}

impl Outcome {
    fn new(pass: bool, detail: String, metrics: Value) -> Self {
        let metrics = match metrics {
            Value::Object(m) => m,
            _ => Map::new(),
        };
        Self { pass, metrics, detail }
    }
}

pub struct CheckDef {
    pub id: u32,
    pub name: &'static str,
    pub budget_seconds: f64,
    run: fn() -> Result<Outcome>,
}

pub const CHECKS: &[CheckDef] = &[
    CheckDef {
        id: 1,
        name: "exterior-algebra",
        budget_seconds: 5.0,
        run: exterior_suite,
    },
    CheckDef {
        id: 2,
        name: "tangent-consistency",
        budget_seconds: 120.0,
        run: tangent_consistency,
    },
    CheckDef {
        id: 3,
        name: "self-adjointness",
        budget_seconds: 60.0,
        run: self_adjointness,
    },
    CheckDef {
        id: 4,
        name: "scalar-spectrum",
        budget_seconds: 180.0,
        run: scalar_spectrum,
    },
    CheckDef {
        id: 5,
        name: "betti-t3",
        budget_seconds: 600.0,
        run: betti_t3,
    },
    CheckDef {
        id: 6,
        name: "curvature-recovery",
        budget_seconds: 240.0,
        run: curvature_recovery,
    },
    CheckDef {
        id: 7,
        name: "weitzenboeck",
        budget_seconds: 240.0,
        run: weitzenboeck_identity,
    },
    CheckDef {
        id: 8,
        name: "nystrom-fidelity",
        budget_seconds: 180.0,
        run: nystrom_fidelity,
    },
    CheckDef {
        id: 9,
        name: "gauge-ring",
        budget_seconds: 480.0,
        run: torus_ring,
    },
    CheckDef {
        id: 10,
        name: "pontryagin",
        budget_seconds: 2700.0,
        run: pontryagin,
    },
    CheckDef {
        id: 11,
        name: "density-rate",
        budget_seconds: 300.0,
        run: density_rate_check,
    },
    CheckDef {
        id: 12,
        name: "degenerate-inputs",
        budget_seconds: 60.0,
        run: degenerate_inputs,
    },
];

pub fn find(id: u32) -> Option<&'static CheckDef> {
    CHECKS.iter().find(|c| c.id == id)
}

/// Runs a check; errors, panics and over-budget runs fail.
pub fn run(def: &CheckDef) -> CheckReport {
    let start = Instant::now();
    let outcome = match std::panic::catch_unwind(def.run) {
        Ok(Ok(o)) => o,
        Ok(Err(e)) => Outcome::new(false, format!("error: {e:#}"), json!({})),
        Err(_) => Outcome::new(false, "panicked".into(), json!({})),
    };
    let seconds = start.elapsed().as_secs_f64();
    let in_budget = seconds <= def.budget_seconds;
    let detail = if in_budget {
        outcome.detail
    } else {
        format!("{} [over budget]", outcome.detail)
    };
    CheckReport {
        id: def.id,
        name: def.name.to_string(),
        pass: outcome.pass && in_budget,
        metrics: outcome.metrics,
        detail,
        seconds,
        budget_seconds: def.budget_seconds,
    }
}

fn sphere() -> ManifoldSpec {
    ManifoldSpec::sphere(2, 1.0).expect("unit sphere")
}

fn torus2() -> ManifoldSpec {
    ManifoldSpec::flat_torus(2).expect("flat torus")
}

fn build(spec: &ManifoldSpec, m: usize, seed: u64, kernel: KernelSpec, curvature: bool) -> Result<Geometry> {
    let cloud = sample(spec, m, seed)?;
    let config = kernel.resolve(&cloud)?;
    Ok(Geometry::build(
        cloud,
        config,
        GeometryOptions {
            curvature,
            ..Default::default()
        },
    )?)
}

fn fixed_t(t: f64) -> KernelSpec {
    KernelSpec {
        t: Some(t),
        ..Default::default()
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn exterior_suite() -> Result<Outcome> {
    const TRIALS: usize = 200;
    let mut rng = sample_rng(2024, 1);
    let mut adjoint = 0.0f64;
    let mut functorial = 0.0f64;
    let mut idempotent = 0.0f64;
    let mut orthonormal = 0.0f64;
    let random_matrix = |rng: &mut rand_chacha::ChaCha8Rng, r: usize, c: usize| {
        na::DMatrix::from_fn(r, c, |_, _| rng.random::<f64>() * 2.0 - 1.0)
    };
    for _ in 0..TRIALS {
        let d = rng.random_range(2..=7usize);
        let k = rng.random_range(1..=d);
        let v: Vec<f64> = (0..d).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
        let kv = |deg: usize, rng: &mut rand_chacha::ChaCha8Rng| {
            let c = (0..binomial(d, deg)).map(|_| rng.random::<f64>() * 2.0 - 1.0).collect();
            KVector::from_coeffs(d, deg, c)
        };
        let a = kv(k - 1, &mut rng)?;
        let b = kv(k, &mut rng)?;
        let lhs = inner(&wedge(&KVector::vector(&v), &a)?, &b)?;
        let rhs = inner(&a, &interior(&v, &b)?)?;
        adjoint = adjoint.max((lhs - rhs).abs());

        // Λ^k(AB) = Λ^kA Λ^kB for general matrices
        let inner_dim = rng.random_range(k..=d);
        let ma = random_matrix(&mut rng, d, inner_dim);
        let mb = random_matrix(&mut rng, inner_dim, d);
        let lhs = exterior_power(&(&ma * &mb), k)?;
        let rhs = exterior_power(&ma, k)? * exterior_power(&mb, k)?;
        functorial = functorial.max((lhs - rhs).amax());

        // projections from an orthonormal n-frame
        let n = rng.random_range(k..=d);
        let q = random_matrix(&mut rng, d, n).qr().q().columns(0, n).into_owned();
        let lift = lift_map(&q, k)?;
        let p = lift.projector();
        idempotent = idempotent.max((&p * &p - &p).amax()).max((&p - p.transpose()).amax());
        idempotent = idempotent.max((p.trace() - binomial(n, k) as f64).abs());
        let w = kv(k, &mut rng)?;
        let once = project_k(&lift, &w)?;
        let twice = project_k(&lift, &once)?;
        let drift = once
            .coeffs()
            .iter()
            .zip(twice.coeffs())
            .fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        idempotent = idempotent.max(drift);
        let g = lift.matrix().transpose() * lift.matrix();
        orthonormal = orthonormal.max((g - na::DMatrix::identity(binomial(n, k), binomial(n, k))).amax());
    }
    let pass = adjoint <= 1e-12 && functorial <= 1e-10 && idempotent <= 1e-10 && orthonormal <= 1e-10;
    Ok(Outcome::new(
        pass,
        format!("adjoint {adjoint:.1e}, functorial {functorial:.1e}, idempotent {idempotent:.1e} over {TRIALS} trials"),
        json!({ "trials": TRIALS, "adjointness": adjoint, "functoriality": functorial, "idempotence": idempotent, "lift_orthonormality": orthonormal }),
    ))
}

fn tangent_consistency() -> Result<Outcome> {
    let spec = sphere();
    let mut rows = Vec::new();
    for m in [1000, 4000, 16000] {
        let g = build(&spec, m, 0, KernelSpec::default(), false)?;
        let (sup, _) = tangent_error(&g, &spec)?;
        rows.push((m, g.config.t, sup));
    }
    let errors: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let monotone = RateFit::monotone_decreasing(&errors);
    let fit = RateFit::fit(
        "tangent",
        &rows.iter().map(|r| (r.1, r.2)).collect::<Vec<_>>(),
        (0.6, 1.4),
    )?;
    Ok(Outcome::new(
        monotone && fit.pass,
        format!(
            "sup errors {errors:.3?}, monotone {monotone}, slope {:.3} (want [0.6, 1.4])",
            fit.slope
        ),
        json!({ "points": rows, "monotone": monotone, "fit": fit }),
    ))
}

fn self_adjointness() -> Result<Outcome> {
    let g = build(&torus2(), 500, 3, KernelSpec::default(), true)?;
    let mut asym = 0.0f64;
    let mut agreement = 0.0f64;
    let mut rng = sample_rng(3, 9);
    for k in 0..=1 {
        let op = g.hodge(k, HodgeOptions::default())?;
        for coords in [Coordinates::Compressed, Coordinates::Ambient] {
            asym = asym.max(op.assemble(coords, false)?.relative_asymmetry());
        }
        let dense = op.assemble(Coordinates::Compressed, false)?.to_dense();
        let abs = dense.abs();
        for _ in 0..5 {
            let x: Vec<f64> = (0..op.size()).map(|_| rng.random::<f64>() - 0.5).collect();
            let mut y = vec![0.0; x.len()];
            op.apply_compressed(&x, &mut y);
            let xv = na::DVector::from_column_slice(&x);
            let want = &dense * &xv;
            // relative to |A||x|, the rounding scale of a matrix-vector product
            let scale = (&abs * xv.abs()).amax();
            let diff = y.iter().zip(want.iter()).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
            agreement = agreement.max(diff / scale);
        }
    }
    Ok(Outcome::new(
        asym <= 1e-10 && agreement <= 1e-12,
        format!("relative asymmetry {asym:.1e} (≤ 1e-10), matrix-free agreement {agreement:.1e} (≤ 1e-12)"),
        json!({ "relative_asymmetry": asym, "matrix_free_agreement": agreement, "m": 500 }),
    ))
}

fn scalar_spectrum() -> Result<Outcome> {
    let g = build(&sphere(), 3000, 0, KernelSpec::default(), false)?;
    let op = g.hodge(0, HodgeOptions::default())?;
    let sp = eigensolve(&op, 10, &EigenOptions::default())?;
    let l = &sp.eigenvalues;
    let cluster = &l[1..4];
    let spread = cluster.iter().fold(0.0f64, |m, v| m.max((v / 2.0 - 1.0).abs()));
    let top = cluster.iter().copied().fold(f64::MIN, f64::max);
    let gap = l[4] / top;
    Ok(Outcome::new(
        l[0] <= 0.05 && spread <= 0.15 && gap >= 2.0,
        format!(
            "λ1 {:.2e}, cluster {cluster:.3?} (spread {spread:.3}), gap ×{gap:.2}",
            l[0]
        ),
        json!({ "t": g.config.t, "eigenvalues": l, "cluster_spread": spread, "gap_factor": gap, "method": sp.method }),
    ))
}

fn betti_t3() -> Result<Outcome> {
    let g = build(&ManifoldSpec::flat_torus(3)?, 10_000, 0, fixed_t(0.015), true)?;
    let op = g.hodge(1, HodgeOptions::default())?;
    let sp = eigensolve(&op, 6, &EigenOptions::default())?;
    Ok(Outcome::new(
        sp.kernel_dim == 3 && sp.gap_ratio >= 10.0,
        format!(
            "b1 = {} with gap ratio {:.2} (t = {})",
            sp.kernel_dim, sp.gap_ratio, g.config.t
        ),
        json!({ "t": g.config.t, "delta": g.config.delta, "eigenvalues": sp.eigenvalues, "kernel_dim": sp.kernel_dim, "gap_ratio": sp.gap_ratio }),
    ))
}

fn mean_sectional_error(spec: &ManifoldSpec, kernel: KernelSpec) -> Result<(f64, f64)> {
    let g = build(spec, 10_000, 0, kernel, true)?;
    let s = sectional_curvatures(&g, spec)?;
    Ok((
        mean(&s.iter().map(|(e, o)| (e - o).abs()).collect::<Vec<_>>()),
        g.config.t,
    ))
}

fn curvature_recovery() -> Result<Outcome> {
    let (e_full, t) = mean_sectional_error(&sphere(), KernelSpec::default())?;
    let (e_half, _) = mean_sectional_error(&sphere(), fixed_t(t / 2.0))?;
    let (e_flat, _) = mean_sectional_error(&torus2(), KernelSpec::default())?;
    let ratio = e_full / e_half;
    let window = (0.5 * 2f64.sqrt(), 1.5 * 2f64.sqrt());
    let pass = e_full <= 0.2 && e_half <= 0.2 && e_flat <= 0.1 && ratio >= window.0 && ratio <= window.1;
    Ok(Outcome::new(
        pass,
        format!("S² {e_full:.3} at t={t:.3}, {e_half:.3} at t/2 (ratio {ratio:.2}); T² {e_flat:.4}"),
        json!({ "sphere_error": e_full, "sphere_error_half_t": e_half, "shrink_ratio": ratio, "ratio_window": window, "torus_error": e_flat, "t": t }),
    ))
}

fn weitzenboeck_identity() -> Result<Outcome> {
    let spec = sphere();
    let g = build(&spec, 10_000, 0, KernelSpec::default(), true)?;
    let errors = weitzenboeck_errors(&g, &spec, 1)?;
    let sup = errors.iter().copied().fold(0.0, f64::max);
    Ok(Outcome::new(
        sup <= 0.3,
        format!("sup ‖Ŵ − 2Λ¹Π̂‖ = {sup:.3} (≤ 0.3), mean {:.3}", mean(&errors)),
        json!({ "sup": sup, "mean": mean(&errors), "t": g.config.t }),
    ))
}

fn nystrom_fidelity() -> Result<Outcome> {
    let spec = sphere();
    let g = build(&spec, 3000, 0, KernelSpec::default(), false)?;
    let op = g.hodge(0, HodgeOptions::default())?;
    let sp = eigensolve(&op, 5, &EigenOptions::default())?;
    let held = sample(&spec, 200, 12345)?;
    let c = (3.0 / (4.0 * PI)).sqrt();
    let mut f = na::DMatrix::zeros(200, 3);
    for j in 0..3 {
        for r in 0..200 {
            f[(r, j)] = op
                .nystrom_extend(&sp.vectors[j + 1], sp.eigenvalues[j + 1], held.point(r))?
                .coeffs()[0];
        }
    }
    let y = na::DMatrix::from_fn(200, 3, |r, j| c * held.point(r)[j]);
    let aligned = &f * procrustes(&f, &y);
    let err = (0..200)
        .map(|r| (aligned[(r, 0)] - y[(r, 0)]).abs())
        .fold(0.0, f64::max);
    let err_all = (&aligned - &y).amax();
    Ok(Outcome::new(
        err <= 0.2 * c,
        format!(
            "max error {err:.4} (≤ {:.4}); all three aligned components {err_all:.4}",
            0.2 * c
        ),
        json!({ "max_error": err, "bound": 0.2 * c, "max_error_all_components": err_all, "eigenvalues": sp.eigenvalues }),
    ))
}

fn torus_ring() -> Result<Outcome> {
    let spec = torus2();
    let g = build(&spec, 10_000, 0, KernelSpec::default(), true)?;
    let op1 = g.hodge(1, HodgeOptions::default())?;
    let sp1 = eigensolve(&op1, 6, &EigenOptions::default())?;
    let op2 = g.hodge(2, HodgeOptions::default())?;
    let sp2 = eigensolve(&op2, 4, &EigenOptions::default())?;
    let loops = oracle_cycles(&spec, 1, 64)?;
    let squares = oracle_cycles(&spec, 2, 16)?;
    let f1: Vec<SharedForm> = (0..loops.len())
        .map(|i| Ok(Arc::new(NystromForm::from_package(&op1, &sp1, i)?) as SharedForm))
        .collect::<Result<_>>()?;
    let f2: Vec<SharedForm> = (0..squares.len())
        .map(|i| Ok(Arc::new(NystromForm::from_package(&op2, &sp2, i)?) as SharedForm))
        .collect::<Result<_>>()?;
    let p1 = period_matrix(&f1, &loops, 2)?;
    let g1 = gauge_fix(&f1, &p1)?;
    let p2 = period_matrix(&f2, &squares, 1)?;
    let g2 = gauge_fix(&f2, &p2)?;
    let defect = period_matrix(&g1, &loops, 2)?
        .identity_defect()
        .max(period_matrix(&g2, &squares, 1)?.identity_defect());
    let sc = structure_constants(&g1, &g1, &g2, &g.cloud, g.config.vol)?;
    let raw = sc.raw[0][1][0];
    let normalized = sc.normalized[0][1][0];
    let want = 1.0 / (4.0 * PI * PI);
    let held = sample(&spec, 300, 99)?;
    let pts: Vec<&[f64]> = held.iter().collect();
    let c0: Vec<f64> = (0..2)
        .map(|i| {
            sup_distance(
                g1[i].as_ref(),
                &OracleForm {
                    spec: spec.clone(),
                    degree: 1,
                    index: i,
                },
                &pts,
            )
        })
        .collect::<cloudhodge::Result<_>>()?;
    let pass = defect <= 1e-2 && (normalized - 1.0).abs() <= 0.1 && (raw / want - 1.0).abs() <= 0.1;
    Ok(Outcome::new(
        pass,
        format!("period defect {defect:.1e}, normalized ĉ {normalized:.4}, raw ĉ {raw:.5} vs {want:.5}"),
        json!({
            "period_defect": defect,
            "raw_periods_degree1": p1.matrix,
            "period_condition": p1.condition,
            "normalized": normalized,
            "raw": raw,
            "raw_expected": want,
            "c0_distance_1forms": c0,
            "eigenvalues_k1": sp1.eigenvalues,
            "eigenvalues_k2": sp2.eigenvalues,
            "kernel_dim_k1": sp1.kernel_dim,
        }),
    ))
}

fn pontryagin() -> Result<Outcome> {
    let s4 = ManifoldSpec::s4();
    let g = build(&s4, 20_000, 0, KernelSpec::default(), true)?;
    let p_s4 = pontryagin_number(&g, OrientationSource::Oracle(&s4), PontryaginDomain::Fundamental)?;
    drop(g);
    let cp2 = ManifoldSpec::cp2();
    let kernel = KernelSpec {
        t: Some(0.03),
        delta: Some(0.45),
        ..Default::default()
    };
    let g = build(&cp2, 20_000, 0, kernel, true)?;
    let p_cp2 = pontryagin_number(&g, OrientationSource::Oracle(&cp2), PontryaginDomain::Fundamental)?;
    Ok(Outcome::new(
        p_s4.abs() <= 0.3 && (p_cp2 - 3.0).abs() <= 0.75,
        format!("S⁴ {p_s4:.4} (|·| ≤ 0.3), CP² {p_cp2:.3} (3 ± 0.75)"),
        json!({ "s4": p_s4, "cp2": p_cp2, "cp2_t": 0.03, "cp2_delta": 0.45 }),
    ))
}

fn density_rate_check() -> Result<Outcome> {
    let spec = sphere();
    let queries = sample(&spec, 1000, 777)?;
    let refs: Vec<&[f64]> = queries.iter().collect();
    let mut points = Vec::new();
    for m in [1000, 4000, 16000] {
        let cloud = sample(&spec, m, 0)?;
        let config = KernelSpec::default().resolve(&cloud)?;
        let expected = sphere_expected_density(&config, 2, 1.0);
        let dev = density_sup_deviation(&cloud, &config, &refs, |_| expected);
        points.push((density_rate(m, config.t, 2), dev));
    }
    let fit = RateFit::fit("density", &points, (0.5, 1.5))?;
    Ok(Outcome::new(
        fit.pass,
        format!("slope {:.3} against the predicted rate (want 1 ± 0.5)", fit.slope),
        json!({ "fit": fit }),
    ))
}

fn expect_error(label: &str, result: std::result::Result<Geometry, Error>, want: fn(&Error) -> bool) -> (String, bool) {
    match result {
        Err(e) if want(&e) => (format!("{label}: {e}"), true),
        Err(e) => (format!("{label}: wrong error {e}"), false),
        Ok(_) => (format!("{label}: accepted silently"), false),
    }
}

fn sphere_config(t: f64, delta: f64) -> KernelConfig {
    KernelConfig::new(t, delta, 2, 4.0 * PI).expect("valid kernel")
}

fn degenerate_inputs() -> Result<Outcome> {
    let base: Vec<Vec<f64>> = sample(&sphere(), 500, 21)?.iter().map(|p| p.to_vec()).collect();
    let cloud = |extra: Option<Vec<f64>>| -> Result<PointCloud> {
        let mut rows = base.clone();
        rows.extend(extra);
        Ok(PointCloud::from_rows(&rows, 2)?)
    };
    let build_with = |c: PointCloud, cfg: KernelConfig| Geometry::build(c, cfg, GeometryOptions::default());
    let mut cases = Vec::new();
    cases.push(expect_error(
        "duplicate",
        build_with(cloud(Some(base[42].clone()))?, sphere_config(0.05, 0.6)),
        |e| matches!(e, Error::DuplicatePoints { first: 42, second: 500 }),
    ));
    cases.push(expect_error(
        "isolated",
        build_with(cloud(Some(vec![4.0, 4.0, 4.0]))?, sphere_config(0.05, 0.6)),
        |e| matches!(e, Error::IsolatedPoint { index: 500 }),
    ));
    cases.push(expect_error(
        "cutoff below spacing",
        build_with(cloud(None)?, sphere_config(1e-9, 1e-4)),
        |e| matches!(e, Error::CutoffBelowSpacing { .. }),
    ));
    // a solid cube declared 2-dimensional has no covariance eigengap
    let mut rng = sample_rng(5, 3);
    let cube: Vec<Vec<f64>> = (0..500)
        .map(|_| (0..3).map(|_| rng.random::<f64>()).collect())
        .collect();
    cases.push(expect_error(
        "eigengap",
        build_with(PointCloud::from_rows(&cube, 2)?, KernelConfig::new(0.01, 0.4, 2, 1.0)?),
        |e| matches!(e, Error::DegenerateSpectrum { .. }),
    ));
    let spec = torus2();
    let same: Vec<SharedForm> = vec![
        Arc::new(OracleForm {
            spec: spec.clone(),
            degree: 1,
            index: 0,
        }),
        Arc::new(OracleForm {
            spec: spec.clone(),
            degree: 1,
            index: 0,
        }),
    ];
    let gauge = match period_matrix(&same, &oracle_cycles(&spec, 1, 16)?, 1) {
        Err(Error::GaugeFailure(msg)) => (format!("gauge: {msg}"), true),
        Err(e) => (format!("gauge: wrong error {e}"), false),
        Ok(_) => ("gauge: singular periods accepted".into(), false),
    };
    cases.push(gauge);
    let pass = cases.iter().all(|c| c.1);
    let failed: Vec<&str> = cases.iter().filter(|c| !c.1).map(|c| c.0.as_str()).collect();
    let detail = if pass {
        format!("{} cases raise their designated errors", cases.len())
    } else {
        failed.join("; ")
    };
    Ok(Outcome::new(
        pass,
        detail,
        json!({ "cases": cases.iter().map(|c| json!({"message": c.0, "pass": c.1})).collect::<Vec<_>>() }),
    ))
}

pub fn parse_ids(list: &str) -> Result<Vec<u32>> {
    if list == "all" {
        return Ok(CHECKS.iter().map(|c| c.id).collect());
    }
    list.split(',')
        .map(|s| {
            let id: u32 = s.trim().parse().map_err(|_| anyhow!("bad check id {s:?}"))?;
            find(id).map(|c| c.id).ok_or_else(|| anyhow!("no check {id}"))
        })
        .collect()
}
