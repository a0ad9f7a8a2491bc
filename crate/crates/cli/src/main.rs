use std::fs;
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde_json::json;

use elliptic_outliers::dyson::write_sweep_csv;
use elliptic_outliers::ensemble::{self, io as ens_io, EnsembleSpec};
use elliptic_outliers::harness::{self, ExperimentConfig, ExperimentKind, RunOptions};
use elliptic_outliers::outliers::{det_f, find_roots, outlier_report};
use elliptic_outliers::products::{linearization_defect, product_trial, sample_product};
use elliptic_outliers::spectral::{eigenvalues, write_spectra_csv};

type BoxResult<T> = Result<T, Box<dyn std::error::Error>>;

/// Monte Carlo laboratory for outliers of sparse non-Hermitian random matrices.
#[derive(Parser)]
#[command(name = "eolab", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct Common {
    /// JSON document describing the ensemble or experiment.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Overrides the seed in the configuration.
    #[arg(long)]
    seed: Option<u64>,
    /// Output file or directory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads.
    #[arg(long, env = harness::WORKERS_ENV)]
    workers: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Sample one matrix and save it as `<out>.bin` + `<out>.json`.
    Generate {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Eigenvalues of a sampled matrix (or of a saved one) as `trial,re,im` CSV.
    Spectrum {
        #[command(flatten)]
        common: Common,
        /// Stem of a matrix saved by `generate`, instead of sampling.
        #[arg(long)]
        input: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Dyson-equation support sweep over the grid of a `dyson-sweep` config.
    Dyson {
        #[command(flatten)]
        common: Common,
    },
    /// One trial of a `perturbed` config, with determinant-criterion roots.
    Outliers {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// One trial of a `product` config.
    Product {
        #[command(flatten)]
        common: Common,
        #[arg(long, default_value_t = 0)]
        trial: u64,
    },
    /// Batch experiments.
    Experiment {
        #[command(subcommand)]
        action: ExperimentAction,
    },
}

#[derive(Subcommand)]
enum ExperimentAction {
    /// Run every trial and write the summary; exits 1 if an assertion fails.
    Run {
        #[command(flatten)]
        common: Common,
    },
    /// Write scatter, boundary, prediction CSVs and an SVG for a finished run.
    Export {
        #[command(flatten)]
        common: Common,
    },
}

fn need<'a>(p: &'a Option<PathBuf>, flag: &str) -> BoxResult<&'a Path> {
    p.as_deref()
        .ok_or_else(|| format!("--{flag} is required").into())
}

fn experiment(common: &Common, kind: Option<ExperimentKind>) -> BoxResult<ExperimentConfig> {
    let mut cfg = ExperimentConfig::from_path(need(&common.config, "config")?)?;
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(k) = kind {
        if cfg.kind != k {
            return Err(format!("expected a {} config, got {}", k.name(), cfg.kind.name()).into());
        }
    }
    Ok(cfg)
}

fn ensemble_spec(common: &Common) -> BoxResult<(EnsembleSpec, u64)> {
    let spec = ens_io::read_spec(need(&common.config, "config")?)?;
    let seed = common.seed.or(spec.seed).unwrap_or(0);
    Ok((spec, seed))
}

/// Results never depend on the worker count; this only bounds CPU use.
fn set_workers(workers: Option<usize>) -> BoxResult<()> {
    harness::configure_global_pool(harness::resolve_workers(workers)?)?;
    Ok(())
}

fn print(value: serde_json::Value) -> BoxResult<()> {
    println!("{}", serde_json::to_string_pretty(&value)?);
    Ok(())
}

fn execute(cli: Cli) -> BoxResult<bool> {
    match cli.command {
        Command::Generate { common, trial } => {
            set_workers(common.workers)?;
            let (spec, seed) = ensemble_spec(&common)?;
            let out = need(&common.out, "out")?;
            let sample = ensemble::sample_matrix(&spec, seed, trial)?;
            ens_io::save_sample(out, &sample)?;
            print(json!({"n": sample.n, "degree": sample.degree, "seed": seed, "trial": trial}))?;
        }
        Command::Spectrum {
            common,
            input,
            trial,
        } => {
            set_workers(common.workers)?;
            let sample = match &input {
                Some(stem) => ens_io::load_sample(stem)?,
                None => {
                    let (spec, seed) = ensemble_spec(&common)?;
                    ensemble::sample_matrix(&spec, seed, trial)?
                }
            };
            let spectrum = eigenvalues(&sample.entries)?;
            let radius = spectrum
                .eigenvalues
                .iter()
                .map(|z| z.norm())
                .fold(0.0, f64::max);
            if let Some(out) = &common.out {
                write_spectra_csv(
                    BufWriter::new(fs::File::create(out)?),
                    &[(sample.trial_index, &spectrum)],
                )?;
            }
            print(json!({"n": sample.n, "spectral_radius": radius}))?;
        }
        Command::Dyson { common } => {
            set_workers(common.workers)?;
            let cfg = experiment(&common, Some(ExperimentKind::DysonSweep))?;
            let prepared = cfg.prepare()?;
            let data = harness::run_trial(&prepared, 0);
            if let Some(e) = &data.record.error {
                return Err(e.clone().into());
            }
            if let Some(out) = &common.out {
                write_sweep_csv(BufWriter::new(fs::File::create(out)?), &data.sweep)?;
            }
            print(serde_json::to_value(&data.record)?)?;
        }
        Command::Outliers { common, trial } => {
            set_workers(common.workers)?;
            let cfg = experiment(&common, Some(ExperimentKind::Perturbed))?;
            let p = cfg.prepare()?;
            let c = p.perturbation.as_ref().ok_or("perturbation missing")?;
            let x = ensemble::sample_matrix(
                p.ensemble.as_ref().ok_or("ensemble missing")?,
                cfg.seed,
                trial,
            )?;
            let rho = p.region.rho;
            let report = outlier_report(&x.entries, c, rho, p.region.epsilon, p.match_cap)?;
            let f = |z| det_f(z, &x.entries, c);
            let clusters = find_roots(&f, &p.predictions, &p.region, 0.5 * p.region.epsilon)?;
            let value = json!({"report": report, "determinant_roots": clusters});
            if let Some(out) = &common.out {
                fs::write(out, serde_json::to_string_pretty(&value)? + "\n")?;
            }
            print(value)?;
        }
        Command::Product { common, trial } => {
            set_workers(common.workers)?;
            let cfg = experiment(&common, Some(ExperimentKind::Product))?;
            let p = cfg.prepare()?;
            let spec = p.product.as_ref().ok_or("product spec missing")?;
            let t = product_trial(spec, cfg.seed, trial, p.match_cap)?;
            // the mN × mN check is only affordable for small n
            let defect = if p.n <= 200 {
                Some(linearization_defect(&sample_product(
                    spec, cfg.seed, trial,
                )?)?)
            } else {
                None
            };
            let value = json!({"trial": t, "linearization_defect": defect});
            if let Some(out) = &common.out {
                fs::write(out, serde_json::to_string_pretty(&value)? + "\n")?;
            }
            print(value)?;
        }
        Command::Experiment { action } => match action {
            ExperimentAction::Run { common } => {
                let cfg = experiment(&common, None)?;
                let opts = RunOptions {
                    workers: common.workers,
                    out_dir: common.out.clone(),
                };
                let out = harness::run(&cfg, &opts)?;
                println!("{}", out.summary.to_json()?.trim_end());
                eprintln!(
                    "{}: {} trials ({} run now) in {:.1?}, written to {}",
                    cfg.kind.name(),
                    out.summary.trials,
                    out.executed.len(),
                    out.wall_time,
                    out.out_dir.display()
                );
                return Ok(out.summary.passed);
            }
            ExperimentAction::Export { common } => {
                let dir = need(&common.out, "out")?;
                let files = harness::export(dir)?;
                print(json!({
                    "scatter": files.scatter_csv,
                    "boundary": files.boundary_csv,
                    "predictions": files.predictions_csv,
                    "svg": files.svg,
                    "summary": files.summary_json,
                    "schema": files.schema,
                }))?;
            }
        },
    }
    Ok(true)
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match execute(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
