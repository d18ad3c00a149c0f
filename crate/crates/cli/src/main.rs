//! Batch entry point: run chains, query the quadrature oracle, reproduce
//! the trace-figure data and the stability classification matrix.

mod config;

use std::fs;
use std::path::PathBuf;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use config::{BuiltModel, DiagnoseConfig, ExperimentConfig};
use hiergibbs::diagnostics::{classify, property_check, DiagConfig};
use hiergibbs::kernel::{run_chain_with_rng, Trace};
use hiergibbs::latent_gp::run_lgp_chain_with_rng;
use hiergibbs::model::{HierModel, Parametrisation};
use hiergibbs::oracle::{
    cdf_distance, conditional_mean, conditional_tail_prob, gaussian_rate, marginal_tail_prob,
    normalizing_constant, Frame, Reference,
};
use hiergibbs::quad::QuadConfig;
use hiergibbs::slice::SliceConfig;
use hiergibbs::stats::autocorrelation;
use hiergibbs::sweep::table2_sweep;

const PRESETS: [(&str, &str); 2] = [
    ("fig1", include_str!("../presets/fig1.json")),
    ("fig2", include_str!("../presets/fig2.json")),
];

#[derive(Parser)]
#[command(
    name = "hiergibbs",
    about = "Gibbs samplers for linear non-Gaussian hierarchical models: \
             chain runner, stability sweep and quadrature oracle",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run chains from a JSON config (or a named preset) and write one
    /// trace CSV per chain plus a summary JSON.
    Run {
        #[arg(long, conflicts_with = "preset")]
        config: Option<PathBuf>,
        /// Shipped preset name: fig1 | fig2.
        #[arg(long)]
        preset: Option<String>,
        /// Output directory (overrides the config's output_dir).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Seed override.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Classify every error-family cell under both parametrisations and
    /// emit the two-panel matrix CSV plus per-cell evidence JSON.
    Table2 {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        /// Restrict to one cell, e.g. `C,G,P0`.
        #[arg(long)]
        cell: Option<String>,
        /// One-step replications per rung (default from DiagConfig).
        #[arg(long)]
        n_rep: Option<usize>,
        /// Shape of the lighter-than-Gaussian family.
        #[arg(long, default_value_t = 3.0)]
        beta: f64,
    },
    /// Evaluate a quadrature-oracle query given as JSON.
    Oracle {
        #[arg(long, conflicts_with = "query_file")]
        query: Option<String>,
        #[arg(long)]
        query_file: Option<PathBuf>,
    },
    /// Run the stability classifier on one (model, kernel) pair and write
    /// the full report.
    Diagnose {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn main() -> anyhow::Result<()> {
    // GSL_THREADS caps the parallel fan-out over chains and sweep cells.
    if let Ok(v) = std::env::var("GSL_THREADS") {
        let n: usize = v.parse().context("GSL_THREADS must be an integer")?;
        rayon::ThreadPoolBuilder::new()
            .num_threads(n.max(1))
            .build_global()
            .context("initialising the thread pool")?;
    }
    match Cli::parse().cmd {
        Cmd::Run {
            config,
            preset,
            out,
            seed,
        } => cmd_run(config, preset, out, seed),
        Cmd::Table2 {
            out,
            seed,
            cell,
            n_rep,
            beta,
        } => cmd_table2(out, seed, cell, n_rep, beta),
        Cmd::Oracle { query, query_file } => cmd_oracle(query, query_file),
        Cmd::Diagnose { config, out, seed } => cmd_diagnose(config, out, seed),
    }
}

fn sanitize(name: &str) -> String {
    name.chars()
        .map(|c| {
            if c.is_ascii_alphanumeric() || c == '.' || c == '-' {
                c
            } else {
                '_'
            }
        })
        .collect()
}

#[derive(Serialize)]
struct ChainSummary {
    file: String,
    kernel: String,
    theta0: f64,
    stream: u64,
    accept_rate: Option<f64>,
    min_theta: f64,
    max_theta: f64,
    /// Autocorrelation of the post-burn-in Θ trace at lags 1..=50.
    acf: Vec<f64>,
}

#[derive(Serialize)]
struct RunSummary {
    config: serde_json::Value,
    seed: u64,
    chains: Vec<ChainSummary>,
}

fn cmd_run(
    config: Option<PathBuf>,
    preset: Option<String>,
    out: Option<PathBuf>,
    seed_override: Option<u64>,
) -> anyhow::Result<()> {
    let text = match (&config, &preset) {
        (Some(path), None) => fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?,
        (None, Some(name)) => PRESETS
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, t)| t.to_string())
            .with_context(|| format!("unknown preset `{name}`"))?,
        _ => bail!("pass exactly one of --config or --preset"),
    };
    let mut cfg = ExperimentConfig::parse(&text)?;
    if let Some(s) = seed_override {
        cfg.run.seed = s;
    }
    let out_dir = out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating {}", out_dir.display()))?;

    let resolved = serde_json::to_value(&cfg)?;
    let header = format!(
        "config: {}\nseed: {}",
        serde_json::to_string(&resolved)?,
        cfg.run.seed
    );
    let model = cfg.model.build()?;
    let mala = cfg.mala.unwrap_or_default();
    let slice_cfg = SliceConfig::default();

    // One task per (kernel, theta0, chain); streams are assigned by task
    // position, so the fan-out order cannot change any draw.
    let mut tasks: Vec<(Parametrisation, f64, u64)> = Vec::new();
    let mut stream = 0u64;
    for kernel in cfg.kernel.to_vec() {
        for theta0 in cfg.run.theta0.to_vec() {
            for _ in 0..cfg.run.n_chains {
                tasks.push((kernel, theta0, stream));
                stream += 1;
            }
        }
    }
    let traces: Vec<anyhow::Result<(Parametrisation, f64, u64, Trace)>> = tasks
        .par_iter()
        .map(|(kernel, theta0, stream)| {
            let mut rng = hiergibbs::chain_rng(cfg.run.seed, *stream);
            let trace = match &model {
                BuiltModel::Hier(m) => run_chain_with_rng(
                    *kernel,
                    m,
                    *theta0,
                    cfg.run.n_iter,
                    cfg.run.burn_in,
                    cfg.run.seed,
                    cfg.run.record_x,
                    &slice_cfg,
                    &mut rng,
                )?,
                BuiltModel::Lgp(m) => run_lgp_chain_with_rng(
                    m,
                    *kernel,
                    *theta0,
                    &mala,
                    cfg.run.n_iter,
                    cfg.run.burn_in,
                    cfg.run.seed,
                    &mut rng,
                )?,
            };
            Ok((*kernel, *theta0, *stream, trace))
        })
        .collect();

    let mut chains = Vec::new();
    for res in traces {
        let (kernel, theta0, stream, trace) = res?;
        let file = format!(
            "trace_{}_t{}_s{}.csv",
            sanitize(&kernel.id()),
            sanitize(&theta0.to_string()),
            stream
        );
        let path = out_dir.join(&file);
        let mut w = fs::File::create(&path)
            .with_context(|| format!("creating {}", path.display()))?;
        trace
            .write_csv(&mut w, Some(&header))
            .with_context(|| format!("writing {}", path.display()))?;
        let kept = trace.kept();
        let max_lag = 50.min(kept.len().saturating_sub(1));
        let acf: Vec<f64> = (1..=max_lag).map(|l| autocorrelation(kept, l)).collect();
        chains.push(ChainSummary {
            file,
            kernel: trace.kernel_id.clone(),
            theta0,
            stream,
            accept_rate: trace.accept_rate,
            min_theta: trace.thetas.iter().cloned().fold(f64::INFINITY, f64::min),
            max_theta: trace
                .thetas
                .iter()
                .cloned()
                .fold(f64::NEG_INFINITY, f64::max),
            acf,
        });
    }
    let summary = RunSummary {
        config: resolved,
        seed: cfg.run.seed,
        chains,
    };
    let path = out_dir.join("summary.json");
    fs::write(&path, serde_json::to_string_pretty(&summary)?)
        .with_context(|| format!("writing {}", path.display()))?;
    println!(
        "wrote {} chains and summary.json to {}",
        summary.chains.len(),
        out_dir.display()
    );
    Ok(())
}

fn parse_cell_filter(
    text: &str,
) -> anyhow::Result<(char, char, Parametrisation)> {
    let parts: Vec<&str> = text.split(',').collect();
    if parts.len() != 3 {
        bail!("--cell expects `f1,f2,par`, e.g. `C,G,P0`");
    }
    let code = |s: &str| -> anyhow::Result<char> {
        let c = s.trim().to_ascii_uppercase();
        if ["C", "E", "G", "L"].contains(&c.as_str()) {
            Ok(c.chars().next().unwrap())
        } else {
            bail!("unknown family `{s}` (expected C, E, G or L)")
        }
    };
    let par = match parts[2].trim().to_ascii_uppercase().as_str() {
        "P0" => Parametrisation::Centred,
        "P1" => Parametrisation::NonCentred,
        other => bail!("unknown parametrisation `{other}` (expected P0 or P1)"),
    };
    Ok((code(parts[0])?, code(parts[1])?, par))
}

fn cmd_table2(
    out: PathBuf,
    seed: u64,
    cell: Option<String>,
    n_rep: Option<usize>,
    beta: f64,
) -> anyhow::Result<()> {
    fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
    let mut cfg = DiagConfig::default();
    if let Some(n) = n_rep {
        cfg.n_rep = n;
    }
    cfg.validate().map_err(|e| anyhow::anyhow!("{e}"))?;
    let filter = cell.as_deref().map(parse_cell_filter).transpose()?;
    let filter_fn = filter.map(|(f1, f2, par)| {
        move |a: char, b: char, k: Parametrisation| a == f1 && b == f2 && k == par
    });
    let result = table2_sweep(
        &cfg,
        beta,
        seed,
        filter_fn
            .as_ref()
            .map(|f| f as &dyn Fn(char, char, Parametrisation) -> bool),
    );

    let matrix = result.matrix_csv();
    let header = format!(
        "# config: {}\n# seed: {seed}\n# split cells: sigma2<sigma1 variant / sigma2>sigma1 variant\n",
        serde_json::to_string(&cfg)?
    );
    fs::write(out.join("table2_matrix.csv"), format!("{header}{matrix}"))?;
    fs::write(
        out.join("table2_cells.json"),
        serde_json::to_string_pretty(&result)?,
    )?;
    print!("{matrix}");
    let mismatches = result.mismatches();
    let errored = result.cells.iter().filter(|c| c.error.is_some()).count();
    println!(
        "cells: {}, disagreements with the tabulated classification: {}, errors: {errored}",
        result.cells.len(),
        mismatches.len()
    );
    Ok(())
}

/// One oracle query; `inputs` echoes the parsed query.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "query", rename_all = "snake_case", deny_unknown_fields)]
enum OracleQuery {
    NormalizingConstant {
        model: HierModel,
        theta: f64,
    },
    ConditionalMean {
        model: HierModel,
        theta: f64,
    },
    ConditionalTailProb {
        model: HierModel,
        theta: f64,
        k: f64,
        frame: Frame,
    },
    MarginalTailProb {
        model: HierModel,
        a: f64,
    },
    GaussianRate {
        sigma1: f64,
        sigma2: f64,
        rho: f64,
    },
    CdfDistance {
        model: HierModel,
        theta: f64,
        frame: Frame,
        #[serde(flatten)]
        reference: Reference,
    },
}

#[derive(Serialize)]
struct OracleResponse {
    query: String,
    inputs: serde_json::Value,
    value: f64,
    est_error: f64,
}

fn cmd_oracle(query: Option<String>, query_file: Option<PathBuf>) -> anyhow::Result<()> {
    let text = match (query, query_file) {
        (Some(q), None) => q,
        (None, Some(path)) => fs::read_to_string(&path)
            .with_context(|| format!("reading query {}", path.display()))?,
        _ => bail!("pass exactly one of --query or --query-file"),
    };
    let parsed: OracleQuery = serde_json::from_str(&text).context("unknown or invalid query")?;
    let qcfg = QuadConfig::default();
    let check = |m: &HierModel| m.validate().map_err(|e| anyhow::anyhow!("{e}"));
    let (name, value, est_error) = match &parsed {
        OracleQuery::NormalizingConstant { model, theta } => {
            check(model)?;
            let r = normalizing_constant(model, *theta, &qcfg)?;
            ("normalizing_constant", r.value, r.est_error)
        }
        OracleQuery::ConditionalMean { model, theta } => {
            check(model)?;
            let v = conditional_mean(model, *theta, &qcfg)?;
            ("conditional_mean", v, qcfg.rel_tol * v.abs() + qcfg.abs_tol)
        }
        OracleQuery::ConditionalTailProb {
            model,
            theta,
            k,
            frame,
        } => {
            check(model)?;
            let v = conditional_tail_prob(model, *theta, *k, *frame, &qcfg)?;
            ("conditional_tail_prob", v, qcfg.rel_tol + qcfg.abs_tol)
        }
        OracleQuery::MarginalTailProb { model, a } => {
            check(model)?;
            let v = marginal_tail_prob(model, *a, &qcfg)?;
            ("marginal_tail_prob", v, qcfg.rel_tol + qcfg.abs_tol)
        }
        OracleQuery::GaussianRate {
            sigma1,
            sigma2,
            rho,
        } => ("gaussian_rate", gaussian_rate(*sigma1, *sigma2, *rho), 0.0),
        OracleQuery::CdfDistance {
            model,
            theta,
            frame,
            reference,
        } => {
            check(model)?;
            let v = cdf_distance(model, *theta, *frame, *reference, &qcfg)?;
            ("cdf_distance", v, qcfg.rel_tol + qcfg.abs_tol)
        }
    };
    let response = OracleResponse {
        query: name.to_string(),
        inputs: serde_json::to_value(&parsed)?,
        value,
        est_error,
    };
    println!("{}", serde_json::to_string_pretty(&response)?);
    Ok(())
}

#[derive(Serialize)]
struct DiagnoseOutput {
    report: hiergibbs::diagnostics::StabilityReport,
    properties: Option<hiergibbs::diagnostics::PropertyRecord>,
}

fn cmd_diagnose(
    config: PathBuf,
    out: Option<PathBuf>,
    seed_override: Option<u64>,
) -> anyhow::Result<()> {
    let text = fs::read_to_string(&config)
        .with_context(|| format!("reading config {}", config.display()))?;
    let cfg: DiagnoseConfig = serde_json::from_str(&text).context("config schema error")?;
    let seed = seed_override.unwrap_or(cfg.seed);
    let model = match cfg.model.build()? {
        BuiltModel::Hier(m) => m,
        BuiltModel::Lgp(_) => bail!("diagnose supports the hierarchical model only"),
    };
    let diag = cfg.diag.clone().unwrap_or_default();
    let report = classify(cfg.kernel, &model, &diag, seed)?;
    let properties = if model.n_effects() == 1 && model.y[0].len() == 1 {
        Some(property_check(&model, &diag)?)
    } else {
        None
    };
    println!(
        "{} under {}: {} ({})",
        report.model_id, report.kernel_id, report.classification, report.evidence
    );
    let out_dir = out
        .or_else(|| cfg.output_dir.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir)?;
    let path = out_dir.join("stability_report.json");
    fs::write(
        &path,
        serde_json::to_string_pretty(&DiagnoseOutput { report, properties })?,
    )
    .with_context(|| format!("writing {}", path.display()))?;
    println!("report written to {}", path.display());
    Ok(())
}
