//! Log-log rate fits and the kernel density concentration diagnostic.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};
use crate::kernel::{dist_sq, KernelConfig};
use crate::zoo::{sphere_area, ManifoldKind, ManifoldSpec, PointCloud};

/// Fewer sweep points than this give no fit.
pub const MIN_FIT_POINTS: usize = 3;

/// Least-squares fit of log(error) = a + s·log(x).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RateFit {
    pub quantity: String,
    /// (x, error) pairs; x is t or a predicted rate.
    pub points: Vec<(f64, f64)>,
    pub slope: f64,
    pub intercept: f64,
    /// 95% confidence interval of the slope.
    pub slope_ci: (f64, f64),
    pub expected: (f64, f64),
    pub pass: bool,
}

impl RateFit {
    pub fn fit(quantity: &str, points: &[(f64, f64)], expected: (f64, f64)) -> Result<Self> {
        if points.len() < MIN_FIT_POINTS {
            return Err(Error::InvalidConfig(format!(
                "{quantity}: a rate fit needs at least {MIN_FIT_POINTS} points, got {}",
                points.len()
            )));
        }
        if points
            .iter()
            .any(|&(x, e)| !(x > 0.0 && e > 0.0 && x.is_finite() && e.is_finite()))
        {
            return Err(Error::InvalidConfig(format!(
                "{quantity}: rate fits need positive finite data"
            )));
        }
        let xs: Vec<f64> = points.iter().map(|p| p.0.ln()).collect();
        let ys: Vec<f64> = points.iter().map(|p| p.1.ln()).collect();
        let k = xs.len() as f64;
        let mx = xs.iter().sum::<f64>() / k;
        let my = ys.iter().sum::<f64>() / k;
        let sxx: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        if sxx <= 0.0 {
            return Err(Error::InvalidConfig(format!("{quantity}: sweep has a single abscissa")));
        }
        let sxy: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let slope = sxy / sxx;
        let intercept = my - slope * mx;
        let rss: f64 = xs
            .iter()
            .zip(&ys)
            .map(|(x, y)| (y - intercept - slope * x).powi(2))
            .sum();
        let dof = k - 2.0;
        let se = (rss / dof / sxx).sqrt();
        let q = StudentsT::new(0.0, 1.0, dof)
            .map_err(|e| Error::InvalidConfig(e.to_string()))?
            .inverse_cdf(0.975);
        Ok(Self {
            quantity: quantity.to_string(),
            points: points.to_vec(),
            slope,
            intercept,
            slope_ci: (slope - q * se, slope + q * se),
            expected,
            pass: slope >= expected.0 && slope <= expected.1,
        })
    }

    /// Errors strictly decrease along increasing sample size (points ordered by sweep).
    pub fn monotone_decreasing(errors: &[f64]) -> bool {
        errors.windows(2).all(|w| w[1] < w[0])
    }
}

/// E_μ[Φ_t χ_δ(p, ·)] for uniform μ on a round n-sphere of radius R.
pub fn sphere_expected_density(config: &KernelConfig, n: usize, radius: f64) -> f64 {
    // geodesic angle θ; chord r = 2R sin(θ/2); surface element area(S^{n-1}) (R sin θ)^{n-1} R dθ
    let panels = 8192;
    let theta_max = if config.delta >= 2.0 * radius {
        std::f64::consts::PI
    } else {
        2.0 * (config.delta / (2.0 * radius)).asin()
    };
    let f = |th: f64| {
        let r = 2.0 * radius * (th / 2.0).sin();
        config.weight_sq(r * r) * (radius * th.sin()).powi(n as i32 - 1) * radius
    };
    let h = theta_max / panels as f64;
    let mut acc = f(0.0) + f(theta_max);
    for i in 1..panels {
        acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    let integral = acc * h / 3.0 * sphere_area(n - 1);
    integral / (sphere_area(n) * radius.powi(n as i32))
}

/// sup over query points of |(1/m) Σ_j Φχ(p, x_j) − E_μ[Φχ(p, ·)]|.
pub fn density_sup_deviation(
    cloud: &PointCloud,
    config: &KernelConfig,
    queries: &[&[f64]],
    expected: impl Fn(&[f64]) -> f64 + Sync,
) -> f64 {
    let m = cloud.len() as f64;
    queries
        .par_iter()
        .map(|p| {
            let s: f64 = cloud.iter().map(|x| config.weight_sq(dist_sq(p, x))).sum();
            (s / m - expected(p)).abs()
        })
        .reduce(|| 0.0, f64::max)
}

/// √(log m / (m t^{n/2})).
pub fn density_rate(m: usize, t: f64, n: usize) -> f64 {
    let m = m as f64;
    (m.ln() / (m * t.powf(n as f64 / 2.0))).sqrt()
}

/// Expected density on a zoo sphere; `None` for other manifolds.
pub fn zoo_expected_density(spec: &ManifoldSpec, config: &KernelConfig) -> Option<f64> {
    match spec.kind {
        ManifoldKind::Sphere { n, radius } => Some(sphere_expected_density(config, n, radius)),
        ManifoldKind::S4 => Some(sphere_expected_density(config, 4, 1.0)),
        _ => None,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_power_law_recovers_slope() {
        let pts: Vec<(f64, f64)> = [0.1, 0.05, 0.025, 0.0125]
            .iter()
            .map(|&t: &f64| (t, 3.0 * t.powf(0.5)))
            .collect();
        let fit = RateFit::fit("demo", &pts, (0.4, 0.6)).unwrap();
        assert!((fit.slope - 0.5).abs() < 1e-12);
        assert!((fit.intercept - 3f64.ln()).abs() < 1e-12);
        assert!(fit.pass);
        assert!(fit.slope_ci.1 - fit.slope_ci.0 < 1e-9);
    }

    #[test]
    fn too_few_points() {
        assert!(RateFit::fit("x", &[(0.1, 1.0), (0.2, 2.0)], (0.0, 1.0)).is_err());
        assert!(RateFit::fit("x", &[(0.1, 1.0), (0.1, 2.0), (0.1, 3.0)], (0.0, 1.0)).is_err());
    }

    #[test]
    fn confidence_interval_uses_student_t() {
        // residuals (+ε, −2ε, +ε) around slope 1 at log x = 0, 1, 2
        let e: f64 = 0.01;
        let pts = [
            (1.0, e.exp()),
            (1f64.exp(), (1.0 - 2.0 * e).exp()),
            (2f64.exp(), (2.0 + e).exp()),
        ];
        let fit = RateFit::fit("x", &pts, (0.0, 2.0)).unwrap();
        let se = (6.0 * e * e / 1.0 / 2.0).sqrt();
        // t_{0.975, 1} = tan(0.475 π)
        let q = (0.475 * std::f64::consts::PI).tan();
        assert!((fit.slope - 1.0).abs() < 1e-12);
        assert!((fit.slope_ci.1 - 1.0 - q * se).abs() < 1e-9);
    }

    #[test]
    fn sphere_density_matches_uniform_chord_law() {
        // on the unit S², |p − x|² is uniform on [0, 4]
        let cfg = KernelConfig::new(0.05, 0.6, 2, 4.0 * std::f64::consts::PI).unwrap();
        let steps = 400_000;
        let h = 4.0 / steps as f64;
        let want: f64 = (0..steps).map(|i| cfg.weight_sq((i as f64 + 0.5) * h)).sum::<f64>() * h / 4.0;
        let got = sphere_expected_density(&cfg, 2, 1.0);
        assert!((got / want - 1.0).abs() < 1e-8, "{got} {want}");
    }
}
