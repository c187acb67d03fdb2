//! Gaussian heat kernel, smooth cutoff and bandwidth selection.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::zoo::{sphere_area, PointCloud};

/// Relative kernel mass left outside δ/2 by [`DeltaRule::Tail`].
pub const TAIL_EPSILON: f64 = 1e-4;

/// Resolved kernel parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KernelConfig {
    /// Bandwidth t (length²).
    pub t: f64,
    /// Cutoff radius δ.
    pub delta: f64,
    /// Intrinsic dimension.
    pub n: usize,
    /// Volume of the manifold.
    pub vol: f64,
    /// How t was chosen: "t=m^(-1/2n)" or "explicit".
    pub scaling: String,
}

impl KernelConfig {
    pub fn new(t: f64, delta: f64, n: usize, vol: f64) -> Result<Self> {
        let cfg = Self {
            t,
            delta,
            n,
            vol,
            scaling: "explicit".into(),
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::InvalidConfig(format!("bandwidth t = {}", self.t)));
        }
        if !(self.delta > 0.0 && self.delta.is_finite()) {
            return Err(Error::InvalidConfig(format!("cutoff δ = {}", self.delta)));
        }
        if 2.0 * self.t.sqrt() > self.delta * (1.0 + 1e-12) {
            return Err(Error::InvalidConfig(format!(
                "cutoff δ = {} is below 2√t = {}",
                self.delta,
                2.0 * self.t.sqrt()
            )));
        }
        if self.n < 2 {
            return Err(Error::InvalidConfig(format!("intrinsic dimension {}", self.n)));
        }
        if !(self.vol > 0.0 && self.vol.is_finite()) {
            return Err(Error::InvalidConfig(format!("volume {}", self.vol)));
        }
        Ok(())
    }

    /// Normalization (4πt)^(-n/2).
    pub fn kernel_scale(&self) -> f64 {
        (4.0 * PI * self.t).powf(-(self.n as f64) / 2.0)
    }

    /// Φ_t χ_δ as a function of squared distance.
    #[inline]
    pub fn weight_sq(&self, dist_sq: f64) -> f64 {
        if dist_sq >= self.delta * self.delta {
            return 0.0;
        }
        self.kernel_scale() * (-dist_sq / (4.0 * self.t)).exp() * cutoff_radius(dist_sq.sqrt(), self.delta)
    }

    /// Radial moment ∫_{R^n} Φ_t χ_δ(|u|) |u|^p du.
    pub fn radial_moment(&self, p: u32) -> f64 {
        const PANELS: usize = 4096;
        let n = self.n as i32;
        let h = self.delta / PANELS as f64;
        let f = |r: f64| (-r * r / (4.0 * self.t)).exp() * cutoff_radius(r, self.delta) * r.powi(n - 1 + p as i32);
        // composite Simpson
        let mut acc = f(0.0) + f(self.delta);
        for i in 1..PANELS {
            acc += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        acc * h / 3.0 * self.kernel_scale() * sphere_area(self.n - 1)
    }

    /// Bandwidth matching the second moment of the truncated kernel:
    /// ∫ Φ_t χ_δ(u) u_1² du = 2 t_eff. Equals t when δ ≫ √t.
    pub fn effective_t(&self) -> f64 {
        self.radial_moment(2) / (2.0 * self.n as f64)
    }

    /// True when t^(n/2+2) ≥ log m / m, the bandwidth condition with unit constant.
    pub fn scaling_condition_holds(&self, m: usize) -> bool {
        let m = m as f64;
        self.t.powf(self.n as f64 / 2.0 + 2.0) >= m.ln() / m
    }
}

/// t = m^(-1/(2n)).
pub fn auto_bandwidth(m: usize, n: usize) -> f64 {
    (m as f64).powf(-1.0 / (2.0 * n as f64))
}

/// Extrinsic Gaussian kernel (4πt)^(-n/2) exp(-|x-y|²/4t).
pub fn gaussian_kernel(x: &[f64], y: &[f64], config: &KernelConfig) -> f64 {
    config.kernel_scale() * (-dist_sq(x, y) / (4.0 * config.t)).exp()
}

/// Smooth cutoff: 1 for |x-y| ≤ δ/2, 0 for |x-y| ≥ δ, quintic C² bridge between.
pub fn cutoff(x: &[f64], y: &[f64], delta: f64) -> f64 {
    cutoff_radius(dist_sq(x, y).sqrt(), delta)
}

#[inline]
pub fn cutoff_radius(r: f64, delta: f64) -> f64 {
    let half = 0.5 * delta;
    if r <= half {
        1.0
    } else if r >= delta {
        0.0
    } else {
        let s = (r - half) / half;
        1.0 - s * s * s * (10.0 - 15.0 * s + 6.0 * s * s)
    }
}

#[inline]
pub fn dist_sq(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeltaRule {
    /// 4 × median distance to the ⌈ln m⌉-th neighbour, clamped to 2√t.
    Knn,
    /// δ/2 = √(4t ln(1/ε)), so the kernel is untruncated up to relative size ε.
    Tail,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum VolRule {
    Oracle,
    Estimate,
}

/// Kernel section of a run configuration, before resolution against a cloud.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub t: Option<f64>,
    /// Only "auto" is recognised.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scaling: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub delta_rule: Option<DeltaRule>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vol: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub vol_rule: Option<VolRule>,
}

impl KernelSpec {
    pub fn resolve(&self, cloud: &PointCloud) -> Result<KernelConfig> {
        let m = cloud.len();
        let n = self.n.unwrap_or(cloud.intrinsic_dim());
        if n != cloud.intrinsic_dim() {
            return Err(Error::InvalidConfig(format!(
                "kernel n = {n} but the cloud has intrinsic dimension {}",
                cloud.intrinsic_dim()
            )));
        }
        let (t, scaling) = match (self.t, self.scaling.as_deref()) {
            (Some(_), Some(_)) => return Err(Error::InvalidConfig("give either t or scaling, not both".into())),
            (Some(t), None) => (t, "explicit".to_string()),
            (None, None) | (None, Some("auto")) => (auto_bandwidth(m, n), "t=m^(-1/2n)".to_string()),
            (None, Some(other)) => return Err(Error::InvalidConfig(format!("unknown scaling rule {other:?}"))),
        };
        let delta = match (self.delta, self.delta_rule) {
            (Some(_), Some(_)) => return Err(Error::InvalidConfig("give either delta or delta_rule, not both".into())),
            (Some(d), None) => d,
            (None, Some(DeltaRule::Tail)) => tail_delta(t),
            (None, None) | (None, Some(DeltaRule::Knn)) => knn_delta(cloud, t),
        };
        let vol = match (self.vol, self.vol_rule) {
            (Some(_), Some(_)) => return Err(Error::InvalidConfig("give either vol or vol_rule, not both".into())),
            (Some(v), None) => v,
            (None, Some(VolRule::Estimate)) => {
                let provisional = KernelConfig {
                    t,
                    delta,
                    n,
                    vol: 1.0,
                    scaling: scaling.clone(),
                };
                crate::tangent::estimate_volume(cloud, &provisional)?
            }
            (None, None) | (None, Some(VolRule::Oracle)) => match cloud.spec() {
                Some(spec) => spec.volume(),
                None => {
                    return Err(Error::InvalidConfig(
                        "vol_rule \"oracle\" needs a generated cloud".into(),
                    ))
                }
            },
        };
        let cfg = KernelConfig {
            t,
            delta,
            n,
            vol,
            scaling,
        };
        cfg.validate()?;
        if !cfg.scaling_condition_holds(m) {
            log::warn!("t = {t:.4} violates t^(n/2+2) ≥ log m / m with unit constant (m = {m})");
        }
        Ok(cfg)
    }
}

pub fn tail_delta(t: f64) -> f64 {
    2.0 * (4.0 * t * (1.0 / TAIL_EPSILON).ln()).sqrt()
}

/// 4 × median distance to the ⌈ln m⌉-th nearest neighbour, at least 2√t.
pub fn knn_delta(cloud: &PointCloud, t: f64) -> f64 {
    let m = cloud.len();
    let k = ((m as f64).ln().ceil() as usize).clamp(1, m.saturating_sub(1).max(1));
    let mut dists = crate::graph::kth_neighbor_distances(cloud, k);
    let floor = 2.0 * t.sqrt();
    if dists.is_empty() {
        return floor;
    }
    let mid = dists.len() / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    (4.0 * *median).max(floor)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg(t: f64, delta: f64, n: usize) -> KernelConfig {
        KernelConfig::new(t, delta, n, 1.0).unwrap()
    }

    #[test]
    fn kernel_normalization() {
        let c = cfg(1.0 / (4.0 * PI), 10.0, 2);
        let x = [0.3, -0.2, 0.5];
        assert!((gaussian_kernel(&x, &x, &c) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn kernel_at_unit_exponent() {
        let t = 0.3;
        let c = cfg(t, 10.0, 3);
        let r = (4.0 * t).sqrt();
        let want = (-1.0f64).exp() * (4.0 * PI * t).powf(-1.5);
        let got = gaussian_kernel(&[0.0, 0.0], &[r, 0.0], &c);
        assert!((got - want).abs() < 1e-15 * want.max(1.0));
    }

    #[test]
    fn kernel_symmetric() {
        let c = cfg(0.2, 10.0, 2);
        let x = [0.1, 0.7, -0.3];
        let y = [-0.4, 0.2, 0.9];
        assert_eq!(gaussian_kernel(&x, &y, &c), gaussian_kernel(&y, &x, &c));
    }

    #[test]
    fn cutoff_profile() {
        let delta = 0.8;
        assert_eq!(cutoff(&[0.0], &[delta / 4.0], delta), 1.0);
        assert_eq!(cutoff(&[0.0], &[2.0 * delta], delta), 0.0);
        let mid = cutoff(&[0.0], &[0.75 * delta], delta);
        assert!(mid > 0.0 && mid < 1.0);
        let mut prev = 1.0;
        for i in 0..=200 {
            let r = delta * i as f64 / 200.0 * 1.2;
            let v = cutoff_radius(r, delta);
            assert!(v <= prev + 1e-15);
            prev = v;
        }
    }

    #[test]
    fn cutoff_is_c2_at_the_joints() {
        let delta = 1.0;
        let h = 1e-4;
        for r0 in [0.5, 1.0] {
            let f = |r: f64| cutoff_radius(r, delta);
            let d1_left = (f(r0) - f(r0 - h)) / h;
            let d1_right = (f(r0 + h) - f(r0)) / h;
            assert!(d1_left.abs() < 1e-6 && d1_right.abs() < 1e-6);
            let d2 = (f(r0 + h) - 2.0 * f(r0) + f(r0 - h)) / (h * h);
            assert!(d2.abs() < 1e-2);
        }
    }

    #[test]
    fn config_rejects_cutoff_below_bandwidth() {
        assert!(KernelConfig::new(1.0, 1.5, 2, 1.0).is_err());
        assert!(KernelConfig::new(1.0, 2.0, 2, 1.0).is_ok());
        assert!(KernelConfig::new(-1.0, 2.0, 2, 1.0).is_err());
        assert!(KernelConfig::new(0.1, 2.0, 1, 1.0).is_err());
    }

    #[test]
    fn moments_of_untruncated_kernel() {
        for n in 2..=4 {
            let t = 0.01;
            let c = cfg(t, 40.0 * t.sqrt(), n);
            assert!((c.radial_moment(0) - 1.0).abs() < 1e-10);
            assert!((c.effective_t() - t).abs() < 1e-10 * t);
        }
    }

    #[test]
    fn truncation_lowers_effective_bandwidth() {
        let t = 0.1;
        let tight = cfg(t, 2.0 * t.sqrt(), 2);
        // ∫_0^2 e^{-s²/4} χ(s) s³ ds / 8 from an independent fine Riemann sum
        let steps = 200_000;
        let h = 2.0 / steps as f64;
        let sum: f64 = (0..steps)
            .map(|i| {
                let s = (i as f64 + 0.5) * h;
                (-s * s / 4.0).exp() * cutoff_radius(s, 2.0) * s.powi(3)
            })
            .sum::<f64>()
            * h
            / 8.0;
        assert!((tight.effective_t() / t - sum).abs() < 1e-8);
        assert!(tight.effective_t() < 0.5 * t);
    }

    #[test]
    fn tail_rule_leaves_small_mass() {
        let t = 0.05;
        let delta = tail_delta(t);
        let r = delta / 2.0;
        assert!(((-r * r / (4.0 * t)).exp() - TAIL_EPSILON).abs() < 1e-12);
    }
}
