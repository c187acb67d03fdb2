//! Verb implementations and the output bundle.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Instant;

use anyhow::{anyhow, bail, Context, Result};
use cloudhodge::cohomology::{
    gauge_fix, period_matrix, pontryagin_number, structure_constants, NystromForm, PontryaginDomain, SharedForm,
};
use cloudhodge::curvature::{frame_curvature, weitzenboeck, OrientationSource};
use cloudhodge::geometry::{Geometry, GeometryOptions};
use cloudhodge::hodge::{eigensolve, HodgeOperator, SpectralPackage};
use cloudhodge::io::{self, CloudFormat};
use cloudhodge::kernel::{KernelConfig, KernelSpec};
use cloudhodge::rates::{density_rate, density_sup_deviation, zoo_expected_density, RateFit};
use cloudhodge::tangent::{eigengap_report, projection_field_with};
use cloudhodge::zoo::{self, ManifoldSpec, PointCloud, SimplicialChain};
use nalgebra as na;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{CycleSource, OrientationMode, RunConfig, SweepQuantity};

/// Seed offset for held-out evaluation points.
pub const HOLDOUT_SEED_OFFSET: u64 = 0x5eed_0ff5e7;

/// Output directory with deterministic JSON and CSV files.
pub struct Bundle {
    pub dir: PathBuf,
}

impl Bundle {
    pub fn create(dir: &Path) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        Ok(Self { dir: dir.to_path_buf() })
    }

    pub fn write_json<T: Serialize>(&self, name: &str, value: &T) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }

    pub fn write_csv(&self, name: &str, header: &[&str], rows: &[Vec<f64>]) -> Result<PathBuf> {
        let path = self.dir.join(name);
        let mut text = header.join(",");
        text.push('\n');
        for row in rows {
            let cells: Vec<String> = row.iter().map(|v| format!("{v:e}")).collect();
            let _ = writeln!(text, "{}", cells.join(","));
        }
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

/// Generated or ingested cloud for a config, with `m` overriding the sample size.
pub fn load_cloud(cfg: &RunConfig, m: Option<usize>) -> Result<PointCloud> {
    if let Some(spec) = &cfg.manifold {
        return zoo::sample(spec, m.unwrap_or(cfg.m), cfg.seed).context("generating the cloud");
    }
    let input = cfg.input.as_ref().ok_or_else(|| anyhow!("no manifold and no input"))?;
    let format = input.format.unwrap_or_else(|| CloudFormat::from_path(&input.path));
    io::ingest(&input.path, format, input.intrinsic_dim).with_context(|| format!("ingesting {}", input.path.display()))
}

pub fn resolve_kernel(spec: &KernelSpec, cloud: &PointCloud, t: Option<f64>) -> Result<KernelConfig> {
    let mut spec = spec.clone();
    if let Some(t) = t {
        spec.t = Some(t);
        spec.scaling = None;
    }
    spec.resolve(cloud).context("kernel section")
}

pub fn build_geometry(cfg: &RunConfig, cloud: PointCloud, t: Option<f64>, curvature: bool) -> Result<Geometry> {
    let config = resolve_kernel(&cfg.kernel, &cloud, t)?;
    let options = GeometryOptions {
        curvature: curvature || cfg.geometry.curvature,
        ..cfg.geometry
    };
    Geometry::build(cloud, config, options).context("estimating local geometry")
}

fn spec_of<'c>(cfg: &'c RunConfig, what: &str) -> Result<&'c ManifoldSpec> {
    cfg.manifold
        .as_ref()
        .ok_or_else(|| anyhow!("{what} needs a zoo manifold for its oracle"))
}

/// Held-out sample of the config's manifold.
pub fn holdout(cfg: &RunConfig, count: usize) -> Result<PointCloud> {
    let spec = spec_of(cfg, "held-out evaluation")?;
    Ok(zoo::sample(spec, count, cfg.seed ^ HOLDOUT_SEED_OFFSET)?)
}

pub fn kernel_json(config: &KernelConfig) -> Value {
    json!({
        "t": config.t,
        "delta": config.delta,
        "n": config.n,
        "vol": config.vol,
        "scaling": config.scaling,
        "effective_t": config.effective_t(),
    })
}

/// (sup, mean) over samples of ‖P̂ − P‖_op.
pub fn tangent_error(geometry: &Geometry, spec: &ManifoldSpec) -> Result<(f64, f64)> {
    let m = geometry.cloud.len();
    let mut sup = 0.0f64;
    let mut mean = 0.0;
    for i in 0..m {
        let diff = geometry.field.projector(i) - zoo::oracle_projection(spec, geometry.cloud.point(i))?;
        let e = diff.symmetric_eigen().eigenvalues.amax();
        sup = sup.max(e);
        mean += e / m as f64;
    }
    Ok((sup, mean))
}

/// Per-sample R̂(ê1,ê2,ê1,ê2) and the oracle sectional curvature, for surfaces.
pub fn sectional_curvatures(geometry: &Geometry, spec: &ManifoldSpec) -> Result<Vec<(f64, f64)>> {
    if spec.n() != 2 {
        bail!("sectional curvature diagnostics are implemented for surfaces");
    }
    let curv = geometry
        .curvature
        .as_ref()
        .ok_or_else(|| anyhow!("geometry built without B̂"))?;
    (0..geometry.cloud.len())
        .map(|i| {
            let p = geometry.cloud.point(i);
            let r = frame_curvature(curv.sym(i), &geometry.field.frame(i));
            let oracle = zoo::oracle_curvature(spec, p)?.in_frame(&zoo::oracle_oriented_frame(spec, p)?);
            // index ((a·n + b)·n + c)·n + d with (a,b,c,d) = (0,1,0,1)
            Ok((r[5], oracle[5]))
        })
        .collect()
}

/// Per-sample ‖Ŵ_p − c Λ^kΠ̂_p‖_op on round spheres, c read off the oracle.
pub fn weitzenboeck_errors(geometry: &Geometry, spec: &ManifoldSpec, k: usize) -> Result<Vec<f64>> {
    if !matches!(spec.kind, zoo::ManifoldKind::Sphere { .. } | zoo::ManifoldKind::S4) {
        bail!("Weitzenböck diagnostics are implemented for round spheres");
    }
    let curv = geometry
        .curvature
        .as_ref()
        .ok_or_else(|| anyhow!("geometry built without B̂"))?;
    let p0 = geometry.cloud.point(0);
    let b0 = zoo::oracle_second_fundamental(spec, p0)?;
    let frame0 = zoo::oracle_oriented_frame(spec, p0)?;
    let w0 = weitzenboeck(&b0, &cloudhodge::curvature::mean_curvature(&b0), &frame0, k)?;
    let c = w0.trace() / cloudhodge::exterior::binomial(spec.n(), k) as f64;
    (0..geometry.cloud.len())
        .map(|i| {
            let frame = geometry.field.frame(i);
            let w = weitzenboeck(curv.sym(i), curv.mean_curvature(i), &frame, k)?;
            let lift = cloudhodge::exterior::lift_map(&frame, k)?;
            let diff = w - lift.projector() * c;
            Ok(diff.symmetric_eigen().eigenvalues.amax())
        })
        .collect()
}

pub fn density_deviation(cfg: &RunConfig, cloud: &PointCloud, config: &KernelConfig) -> Result<f64> {
    let spec = spec_of(cfg, "density diagnostics")?;
    let expected = zoo_expected_density(spec, config)
        .ok_or_else(|| anyhow!("expected kernel density is implemented for round spheres"))?;
    let queries = holdout(cfg, cfg.holdout.max(1))?;
    let refs: Vec<&[f64]> = queries.iter().collect();
    Ok(density_sup_deviation(cloud, config, &refs, |_| expected))
}

pub fn generate(cfg: &RunConfig, bundle: &Bundle) -> Result<Value> {
    let cloud = load_cloud(cfg, None)?;
    let path = bundle.dir.join("cloud.bin");
    io::export_cloud(&cloud, &path, CloudFormat::Binary)?;
    Ok(json!({
        "m": cloud.len(),
        "d": cloud.dim(),
        "n": cloud.intrinsic_dim(),
        "manifold": cfg.manifold,
        "seed": cfg.seed,
        "file": "cloud.bin",
    }))
}

pub fn tangents(cfg: &RunConfig, bundle: &Bundle) -> Result<Value> {
    let cloud = load_cloud(cfg, None)?;
    let config = resolve_kernel(&cfg.kernel, &cloud, None)?;
    let graph = cloudhodge::graph::build_graph(&cloud, &config)?;
    let field = projection_field_with(&cloud, &graph, &config, cfg.geometry.projection)?;
    let report = eigengap_report(&field, &cloud);
    let mut rows = Vec::with_capacity(cloud.len());
    let mut errors = Vec::new();
    for i in 0..cloud.len() {
        let mut row = vec![i as f64, field.gaps()[i]];
        if let Some(spec) = &cfg.manifold {
            let e = (field.projector(i) - zoo::oracle_projection(spec, cloud.point(i))?)
                .symmetric_eigen()
                .eigenvalues
                .amax();
            errors.push(e);
            row.push(e);
        }
        rows.push(row);
    }
    let header: &[&str] = if errors.is_empty() {
        &["sample", "gap"]
    } else {
        &["sample", "gap", "projector_error"]
    };
    bundle.write_csv("tangents.csv", header, &rows)?;
    let sup = errors.iter().copied().fold(0.0, f64::max);
    Ok(json!({
        "kernel": kernel_json(&config),
        "mean_degree": graph.mean_degree(),
        "min_gap": report.min_gap,
        "mean_gap": report.mean_gap,
        "degenerate": field.degenerate(),
        "projector_error_sup": (!errors.is_empty()).then_some(sup),
        "projector_error_mean": (!errors.is_empty()).then(|| errors.iter().sum::<f64>() / errors.len() as f64),
    }))
}

pub fn curvature(cfg: &RunConfig, bundle: &Bundle) -> Result<Value> {
    let cloud = load_cloud(cfg, None)?;
    let g = build_geometry(cfg, cloud, None, true)?;
    let curv = g.curvature.as_ref().expect("built with curvature");
    let n = g.field.n();
    let mut rows = Vec::with_capacity(g.cloud.len());
    for i in 0..g.cloud.len() {
        let r = frame_curvature(curv.sym(i), &g.field.frame(i));
        let scalar: f64 = (0..n)
            .flat_map(|a| (0..n).map(move |b| (a, b)))
            .map(|(a, b)| r[((a * n + b) * n + a) * n + b])
            .sum();
        let h: f64 = curv.mean_curvature(i).iter().map(|x| x * x).sum::<f64>().sqrt();
        rows.push(vec![i as f64, scalar, h]);
    }
    bundle.write_csv(
        "curvature.csv",
        &["sample", "scalar_curvature", "mean_curvature_norm"],
        &rows,
    )?;
    if let Some(dump) = &cfg.tensors {
        let path = bundle.dir.join("tensors.jsonl");
        let file = fs::File::create(&path).with_context(|| format!("creating {}", path.display()))?;
        io::write_tensor_dump(&g, dump, file)?;
    }
    let mut out = json!({
        "kernel": kernel_json(&g.config),
        "normalization": curv.normalization(),
        "mean_scalar_curvature": rows.iter().map(|r| r[1]).sum::<f64>() / rows.len() as f64,
    });
    if let Some(spec) = &cfg.manifold {
        if spec.n() == 2 {
            let sec = sectional_curvatures(&g, spec)?;
            let err = sec.iter().map(|(e, o)| (e - o).abs()).sum::<f64>() / sec.len() as f64;
            out["sectional_error_mean"] = json!(err);
        }
        if let Ok(w) = weitzenboeck_errors(&g, spec, 1) {
            out["weitzenboeck_error_sup"] = json!(w.iter().copied().fold(0.0, f64::max));
            out["weitzenboeck_error_mean"] = json!(w.iter().sum::<f64>() / w.len() as f64);
        }
    }
    Ok(out)
}

/// Spectral package for degree k, with the operator for Nyström use.
pub fn solve<'g>(
    g: &'g Geometry,
    cfg: &RunConfig,
    k: usize,
    count: usize,
) -> Result<(HodgeOperator<'g>, SpectralPackage)> {
    let op = g
        .hodge(k, cfg.hodge.clone())
        .with_context(|| format!("assembling the degree-{k} operator"))?;
    let sp = eigensolve(&op, count, &cfg.eigen).with_context(|| format!("degree-{k} eigensolve"))?;
    Ok((op, sp))
}

pub fn spectrum(cfg: &RunConfig, bundle: &Bundle) -> Result<Value> {
    let cloud = load_cloud(cfg, None)?;
    let need_b = cfg.degrees.iter().any(|&k| k > 0);
    let g = build_geometry(cfg, cloud, None, need_b)?;
    let mut per_degree = Vec::new();
    for &k in &cfg.degrees {
        let (op, sp) = solve(&g, cfg, k, cfg.eigen_count)?;
        let oracle = cfg
            .manifold
            .as_ref()
            .and_then(|spec| zoo::oracle_spectrum(spec, k, cfg.eigen_count).ok())
            .map(|s| zoo::flatten_spectrum(&s));
        let rows: Vec<Vec<f64>> = sp
            .eigenvalues
            .iter()
            .enumerate()
            .map(|(i, l)| {
                let mut row = vec![i as f64, *l, sp.residuals[i]];
                if let Some(o) = &oracle {
                    row.push(o.get(i).copied().unwrap_or(f64::NAN));
                }
                row
            })
            .collect();
        let header: &[&str] = if oracle.is_some() {
            &["index", "eigenvalue", "residual", "oracle"]
        } else {
            &["index", "eigenvalue", "residual"]
        };
        bundle.write_csv(&format!("spectrum_k{k}.csv"), header, &rows)?;
        sp.write_json(&bundle.dir.join(format!("spectrum_k{k}.json")))?;
        per_degree.push(json!({ "k": k, "summary": sp.summary(), "oracle": oracle, "method": format!("{:?}", sp.method), "iterations": sp.iterations }));
        drop(op);
    }
    Ok(json!({ "kernel": kernel_json(&g.config), "degrees": per_degree }))
}

pub fn load_cycles(cfg: &RunConfig, degree: usize) -> Result<Vec<SimplicialChain>> {
    let mut out = Vec::new();
    for source in &cfg.cycles {
        match source {
            CycleSource::File(path) => {
                let chain = io::read_chain(path).with_context(|| format!("reading cycle {}", path.display()))?;
                if chain.degree == degree {
                    out.push(chain);
                }
            }
            CycleSource::Oracle { degree: q, refinement } if *q == degree => {
                out.extend(zoo::oracle_cycles(spec_of(cfg, "oracle cycles")?, *q, *refinement)?);
            }
            CycleSource::Oracle { .. } => {}
        }
    }
    Ok(out)
}

/// Gauge-fixed harmonic forms of degree k: as many low eigenpairs as there are
/// degree-k cycles.
pub fn gauge_fixed_forms<'o>(
    op: &'o HodgeOperator<'o>,
    sp: &SpectralPackage,
    cycles: &[SimplicialChain],
    quad_order: usize,
) -> Result<(Vec<SharedForm<'o>>, cloudhodge::cohomology::PeriodMatrix)> {
    let b = cycles.len();
    if b > sp.eigenvalues.len() {
        bail!("{b} cycles but only {} eigenpairs", sp.eigenvalues.len());
    }
    let forms: Vec<SharedForm<'o>> = (0..b)
        .map(|i| Ok(Arc::new(NystromForm::from_package(op, sp, i)?) as SharedForm<'o>))
        .collect::<Result<_>>()?;
    let periods = period_matrix(&forms, cycles, quad_order)?;
    let fixed = gauge_fix(&forms, &periods)?;
    Ok((fixed, periods))
}

pub fn ring(cfg: &RunConfig, bundle: &Bundle) -> Result<Value> {
    let (k, l) = match cfg.degrees.as_slice() {
        [k, l] => (*k, *l),
        _ => bail!("ring needs degrees [k, l]"),
    };
    let cloud = load_cloud(cfg, None)?;
    let g = build_geometry(cfg, cloud, None, true)?;
    let mut degs = vec![k, l, k + l];
    degs.sort_unstable();
    degs.dedup();
    let mut cycles = Vec::new();
    let mut ops = Vec::new();
    let mut packages = Vec::new();
    for &deg in &degs {
        let cyc = load_cycles(cfg, deg)?;
        if cyc.is_empty() {
            bail!("no degree-{deg} cycles configured");
        }
        let (op, sp) = solve(&g, cfg, deg, cfg.eigen_count.max(cyc.len() + 2))?;
        cycles.push(cyc);
        ops.push(op);
        packages.push(sp);
    }
    let mut fixed = Vec::new();
    let mut periods = Vec::new();
    let mut defects = Vec::new();
    for i in 0..degs.len() {
        let (forms, p) = gauge_fixed_forms(&ops[i], &packages[i], &cycles[i], cfg.quad_order)?;
        defects.push(period_matrix(&forms, &cycles[i], cfg.quad_order)?.identity_defect());
        periods.push(p);
        fixed.push(forms);
    }
    let at = |deg: usize| degs.iter().position(|&d| d == deg).expect("listed degree");
    let sc = structure_constants(&fixed[at(k)], &fixed[at(l)], &fixed[at(k + l)], &g.cloud, g.config.vol)?;
    bundle.write_json("structure_constants.json", &sc)?;
    Ok(json!({
        "kernel": kernel_json(&g.config),
        "degrees": [k, l],
        "solved_degrees": degs,
        "eigenvalues": packages.iter().map(|p| p.eigenvalues.clone()).collect::<Vec<_>>(),
        "kernel_dims": packages.iter().map(|p| p.kernel_dim).collect::<Vec<_>>(),
        "period_matrices": periods,
        "gauge_fixed_period_defect": defects,
        "raw": sc.raw,
        "normalized": sc.normalized,
        "antisymmetry_defect": sc.antisymmetry_defect(),
    }))
}

pub fn pontryagin(cfg: &RunConfig, bundle: &Bundle) -> Result<Value> {
    let cloud = load_cloud(cfg, None)?;
    let g = build_geometry(cfg, cloud, None, true)?;
    let source = match cfg.orientation {
        OrientationMode::Oracle => OrientationSource::Oracle(spec_of(cfg, "oracle orientation")?),
        OrientationMode::Graph => OrientationSource::Graph(&g.graph),
    };
    let fundamental = pontryagin_number(&g, source, PontryaginDomain::Fundamental)?;
    let chains = load_cycles(cfg, 4)?;
    let mut on_chains = Vec::new();
    for chain in &chains {
        on_chains.push(json!({
            "cycle": chain.name,
            "p1": pontryagin_number(&g, OrientationSource::Graph(&g.graph), PontryaginDomain::Chain(chain, cfg.quad_order))?,
        }));
    }
    let out = json!({
        "kernel": kernel_json(&g.config),
        "orientation": cfg.orientation,
        "p1_fundamental": fundamental,
        "p1_chains": on_chains,
    });
    bundle.write_json("pontryagin.json", &out)?;
    Ok(out)
}

#[derive(Clone, Debug, Serialize)]
pub struct SweepPoint {
    pub m: usize,
    pub t: f64,
    pub delta: f64,
    pub error: f64,
    /// Abscissa of the fit: t, or the predicted density rate.
    pub x: f64,
}

pub fn sweep_points(cfg: &RunConfig) -> Result<(Vec<SweepPoint>, SweepQuantity)> {
    let sweep = cfg
        .sweep
        .as_ref()
        .ok_or_else(|| anyhow!("config has no sweep section"))?;
    let spec = spec_of(cfg, "sweeps")?;
    let mut points = Vec::new();
    for (m, t) in sweep.grid()? {
        let cloud = load_cloud(cfg, Some(m))?;
        let point = match sweep.quantity {
            SweepQuantity::Density => {
                let config = resolve_kernel(&cfg.kernel, &cloud, t)?;
                let error = density_deviation(cfg, &cloud, &config)?;
                SweepPoint {
                    m,
                    t: config.t,
                    delta: config.delta,
                    error,
                    x: density_rate(m, config.t, config.n),
                }
            }
            q => {
                let need_b = q != SweepQuantity::Tangent;
                let g = build_geometry(cfg, cloud, t, need_b)?;
                let error = match q {
                    SweepQuantity::Tangent => tangent_error(&g, spec)?.0,
                    SweepQuantity::Curvature => {
                        let s = sectional_curvatures(&g, spec)?;
                        s.iter().map(|(e, o)| (e - o).abs()).sum::<f64>() / s.len() as f64
                    }
                    SweepQuantity::Weitzenboeck => weitzenboeck_errors(&g, spec, 1)?.into_iter().fold(0.0, f64::max),
                    SweepQuantity::Density => unreachable!(),
                };
                SweepPoint {
                    m,
                    t: g.config.t,
                    delta: g.config.delta,
                    error,
                    x: g.config.t,
                }
            }
        };
        log::info!("sweep m={} t={:.4}: error {:.4e}", point.m, point.t, point.error);
        points.push(point);
    }
    Ok((points, sweep.quantity))
}

pub fn sweep(cfg: &RunConfig, bundle: &Bundle) -> Result<Value> {
    let (points, quantity) = sweep_points(cfg)?;
    let rows: Vec<Vec<f64>> = points
        .iter()
        .map(|p| vec![p.m as f64, p.t, p.delta, p.x, p.error])
        .collect();
    bundle.write_csv("sweep.csv", &["m", "t", "delta", "x", "error"], &rows)?;
    let pairs: Vec<(f64, f64)> = points.iter().map(|p| (p.x, p.error)).collect();
    let expected = cfg
        .sweep
        .as_ref()
        .and_then(|s| s.expected_slope)
        .unwrap_or((f64::NEG_INFINITY, f64::INFINITY));
    let fit = if pairs.len() < cloudhodge::rates::MIN_FIT_POINTS {
        log::warn!("{} sweep point(s): no rate fit", pairs.len());
        None
    } else {
        Some(RateFit::fit(&format!("{quantity:?}").to_lowercase(), &pairs, expected)?)
    };
    if let Some(f) = &fit {
        bundle.write_json("rates.json", f)?;
    }
    Ok(json!({ "quantity": quantity, "points": points, "fit": fit }))
}

/// Runs `f`, recording wall time into `timing.json` next to the results.
pub fn timed<T>(bundle: &Bundle, label: &str, f: impl FnOnce() -> Result<T>) -> Result<T> {
    let start = Instant::now();
    let out = f()?;
    let path = bundle.dir.join("timing.json");
    let mut timing: serde_json::Map<String, Value> = fs::read_to_string(&path)
        .ok()
        .and_then(|s| serde_json::from_str(&s).ok())
        .unwrap_or_default();
    timing.insert(label.to_string(), json!(start.elapsed().as_secs_f64()));
    bundle.write_json("timing.json", &timing)?;
    Ok(out)
}

/// Best orthogonal Q minimising ‖F Q − Y‖_F.
pub fn procrustes(f: &na::DMatrix<f64>, y: &na::DMatrix<f64>) -> na::DMatrix<f64> {
    let svd = (f.transpose() * y).svd(true, true);
    svd.u.expect("requested") * svd.v_t.expect("requested")
}
