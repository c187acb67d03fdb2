//! Named runnable configurations. Every acceptance check is also a preset.

use cloudhodge::kernel::KernelSpec;
use cloudhodge::zoo::ManifoldSpec;

use crate::checks::CHECKS;
use crate::config::{CycleSource, RunConfig, SweepConfig, SweepQuantity};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Verb {
    Generate,
    Tangents,
    Curvature,
    Spectrum,
    Ring,
    Pontryagin,
    Sweep,
}

pub enum Preset {
    /// Runs one acceptance check.
    Check(u32),
    /// Runs a verb on a fixed configuration.
    Run(Verb, Box<RunConfig>),
}

const PIPELINES: &[(&str, &str)] = &[
    (
        "sphere-spectrum",
        "scalar spectrum of the unit 2-sphere against the oracle table",
    ),
    ("torus-ring", "cup product structure constants of the flat 2-torus"),
    ("sphere-tangent-sweep", "projector error of the unit 2-sphere across m"),
    (
        "sphere-density-sweep",
        "kernel density deviation on the unit 2-sphere across m",
    ),
    ("s4-pontryagin", "first Pontryagin number of the round 4-sphere"),
    ("cp2-pontryagin", "first Pontryagin number of CP² (slow)"),
];

/// (name, description) for every preset.
pub fn list() -> Vec<(String, String)> {
    let mut out: Vec<(String, String)> = CHECKS
        .iter()
        .map(|c| (c.name.to_string(), format!("acceptance check {}", c.id)))
        .collect();
    out.extend(PIPELINES.iter().map(|(n, d)| (n.to_string(), d.to_string())));
    out
}

fn sphere() -> ManifoldSpec {
    ManifoldSpec::sphere(2, 1.0).expect("unit sphere")
}

fn sweep(quantity: SweepQuantity, expected: (f64, f64)) -> RunConfig {
    RunConfig {
        sweep: Some(SweepConfig {
            ms: vec![1000, 4000, 16000],
            ts: None,
            quantity,
            expected_slope: Some(expected),
        }),
        holdout: 1000,
        ..RunConfig::with_manifold(sphere(), 1000)
    }
}

pub fn get(name: &str) -> Option<Preset> {
    if let Some(c) = CHECKS.iter().find(|c| c.name == name) {
        return Some(Preset::Check(c.id));
    }
    let (verb, cfg) = match name {
        "sphere-spectrum" => (
            Verb::Spectrum,
            RunConfig {
                eigen_count: 10,
                ..RunConfig::with_manifold(sphere(), 3000)
            },
        ),
        "torus-ring" => (
            Verb::Ring,
            RunConfig {
                degrees: vec![1, 1],
                eigen_count: 4,
                cycles: vec![
                    CycleSource::Oracle {
                        degree: 1,
                        refinement: 64,
                    },
                    CycleSource::Oracle {
                        degree: 2,
                        refinement: 16,
                    },
                ],
                ..RunConfig::with_manifold(ManifoldSpec::flat_torus(2).expect("flat torus"), 10_000)
            },
        ),
        "sphere-tangent-sweep" => (Verb::Sweep, sweep(SweepQuantity::Tangent, (0.6, 1.4))),
        "sphere-density-sweep" => (Verb::Sweep, sweep(SweepQuantity::Density, (0.5, 1.5))),
        "s4-pontryagin" => (Verb::Pontryagin, RunConfig::with_manifold(ManifoldSpec::s4(), 20_000)),
        "cp2-pontryagin" => (
            Verb::Pontryagin,
            RunConfig {
                kernel: KernelSpec {
                    t: Some(0.03),
                    delta: Some(0.45),
                    ..Default::default()
                },
                ..RunConfig::with_manifold(ManifoldSpec::cp2(), 20_000)
            },
        ),
        _ => return None,
    };
    Some(Preset::Run(verb, Box::new(cfg)))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn every_listed_preset_resolves_and_validates() {
        for (name, _) in list() {
            match get(&name).unwrap_or_else(|| panic!("{name}")) {
                Preset::Check(id) => assert!(crate::checks::find(id).is_some()),
                Preset::Run(_, cfg) => cfg.validate().unwrap(),
            }
        }
        assert_eq!(list().iter().filter(|(_, d)| d.starts_with("acceptance")).count(), 12);
        assert!(get("nope").is_none());
    }
}
