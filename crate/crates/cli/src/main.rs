use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Parser, Subcommand};
use serde_json::{json, Value};

use cloudhodge::io::TensorDumpOptions;
use cloudhodge_cli::checks::{self, CheckReport};
use cloudhodge_cli::config::RunConfig;
use cloudhodge_cli::pipeline::{self, Bundle};
use cloudhodge_cli::presets::{self, Preset, Verb};

#[derive(Parser)]
#[command(name = "cloudhodge", version, about = "Hodge-theoretic estimators on point clouds")]
struct Cli {
    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Named preset (see `cloudhodge presets`).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Output directory; overrides the config.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads for the rayon pool.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    verb: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample a zoo manifold (or re-export an input cloud).
    Generate,
    /// Tangent projectors and eigengaps.
    Tangents,
    /// Second fundamental form, curvature and Weitzenböck diagnostics.
    Curvature {
        /// Write tensors.jsonl with B and H plus these extras, e.g. "r,w1,w2"; "none" writes only B and H.
        #[arg(long)]
        tensors: Option<String>,
    },
    /// Lowest eigenpairs of the Hodge operator for each configured degree.
    Spectrum,
    /// Gauge-fixed harmonic forms and cup product structure constants.
    Ring,
    /// First Pontryagin number.
    Pontryagin,
    /// (m, t) sweep with a log-log rate fit.
    Sweep,
    /// Acceptance checks; all of them unless a check preset or --only is given.
    Check {
        /// Comma-separated check ids, or "all".
        #[arg(long)]
        only: Option<String>,
    },
    /// List presets.
    Presets,
}

fn verb_of(cmd: &Command) -> Option<Verb> {
    Some(match cmd {
        Command::Generate => Verb::Generate,
        Command::Tangents => Verb::Tangents,
        Command::Curvature { .. } => Verb::Curvature,
        Command::Spectrum => Verb::Spectrum,
        Command::Ring => Verb::Ring,
        Command::Pontryagin => Verb::Pontryagin,
        Command::Sweep => Verb::Sweep,
        Command::Check { .. } | Command::Presets => return None,
    })
}

fn resolve_config(cli: &Cli, verb: Verb) -> Result<RunConfig> {
    let mut cfg = match (&cli.config, &cli.preset) {
        (Some(_), Some(_)) => bail!("give --config or --preset, not both"),
        (Some(path), None) => RunConfig::load(path)?,
        (None, Some(name)) => match presets::get(name) {
            Some(Preset::Run(v, cfg)) if v == verb => *cfg,
            Some(Preset::Run(v, _)) => bail!("preset {name} runs the {v:?} verb"),
            Some(Preset::Check(_)) => {
                bail!("preset {name} is an acceptance check; use `cloudhodge check --preset {name}`")
            }
            None => bail!("unknown preset {name}"),
        },
        (None, None) => bail!("a run needs --config or --preset"),
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    if let Some(out) = &cli.out {
        cfg.out = out.clone();
    }
    if cli.threads.is_some() {
        cfg.threads = cli.threads;
    }
    if let Command::Curvature { tensors: Some(list) } = &cli.verb {
        cfg.tensors = Some(parse_tensors(list)?);
    }
    cfg.validate()?;
    Ok(cfg)
}

fn parse_tensors(list: &str) -> Result<TensorDumpOptions> {
    let mut dump = TensorDumpOptions::default();
    for item in list.split(',').map(str::trim).filter(|s| !s.is_empty() && *s != "none") {
        match item.to_ascii_lowercase().as_str() {
            "r" => dump.riemann = true,
            w if w.starts_with('w') => {
                let k: usize = w[1..].parse().with_context(|| format!("bad tensor name {item}"))?;
                if !dump.weitzenboeck.contains(&k) {
                    dump.weitzenboeck.push(k);
                }
            }
            _ => bail!("unknown tensor {item}; expected r or w<k>"),
        }
    }
    Ok(dump)
}

fn init_threads(threads: Option<usize>) -> Result<()> {
    if let Some(n) = threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .context("configuring the thread pool")?;
    }
    Ok(())
}

fn run_verb(cli: &Cli, verb: Verb) -> Result<bool> {
    let cfg = resolve_config(cli, verb)?;
    init_threads(cfg.threads)?;
    let bundle = Bundle::create(&cfg.out)?;
    bundle.write_json("config.json", &cfg)?;
    let label = format!("{verb:?}").to_lowercase();
    let mut results = pipeline::timed(&bundle, &label, || match verb {
        Verb::Generate => pipeline::generate(&cfg, &bundle),
        Verb::Tangents => pipeline::tangents(&cfg, &bundle),
        Verb::Curvature => pipeline::curvature(&cfg, &bundle),
        Verb::Spectrum => pipeline::spectrum(&cfg, &bundle),
        Verb::Ring => pipeline::ring(&cfg, &bundle),
        Verb::Pontryagin => pipeline::pontryagin(&cfg, &bundle),
        Verb::Sweep => pipeline::sweep(&cfg, &bundle),
    })
    .with_context(|| format!("{label} failed"))?;
    let pass = results.pointer("/fit/pass").and_then(Value::as_bool).unwrap_or(true);
    results["verb"] = json!(label);
    results["pass"] = json!(pass);
    bundle.write_json("results.json", &results)?;
    println!("{}", serde_json::to_string_pretty(&results)?);
    Ok(pass)
}

fn run_checks(cli: &Cli, only: Option<&str>) -> Result<bool> {
    if cli.config.is_some() {
        bail!("checks run fixed configurations; --config does not apply");
    }
    init_threads(cli.threads)?;
    let ids = match (&cli.preset, only) {
        (Some(_), Some(_)) => bail!("give --preset or --only, not both"),
        (Some(name), None) => match presets::get(name) {
            Some(Preset::Check(id)) => vec![id],
            _ => bail!("{name} is not a check preset"),
        },
        (None, Some(list)) => checks::parse_ids(list)?,
        (None, None) => checks::parse_ids("all")?,
    };
    let mut reports: Vec<CheckReport> = Vec::new();
    for id in ids {
        let def = checks::find(id).expect("validated id");
        log::info!("running check {id} ({})", def.name);
        let report = checks::run(def);
        println!("{}", report.line());
        reports.push(report);
    }
    let pass = reports.iter().all(|r| r.pass);
    let out = cli.out.clone().unwrap_or_else(|| PathBuf::from("cloudhodge-out"));
    let bundle = Bundle::create(&out)?;
    bundle.write_json("checks.json", &json!({ "pass": pass, "checks": reports }))?;
    Ok(pass)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let outcome = match &cli.verb {
        Command::Presets => {
            for (name, description) in presets::list() {
                println!("{name:<24} {description}");
            }
            Ok(true)
        }
        Command::Check { only } => run_checks(&cli, only.as_deref()),
        cmd => run_verb(&cli, verb_of(cmd).expect("verb")),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
