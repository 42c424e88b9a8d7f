use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use colorflag::circuit::{build_memory_experiment, EstimationSide, Method};
use colorflag::code::{min_logical_weight, validate_code, MIN_WEIGHT_BUDGET};
use colorflag::deflag::dump_rules;
use colorflag::harness::{
    emit_outputs, fit_groups, read_results, run_experiment, ExperimentConfig,
};
use colorflag::sim::NoiseModel;
use colorflag::weights::estimate_conditional_probs;
use colorflag::{Basis, ColorCode, Family};

#[derive(Parser)]
#[command(name = "colorflag", version, about = "Color-code memory experiments with flag-conditioned decoder weights")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Check code invariants and optionally export the code and circuits.
    Validate(ValidateArgs),
    /// Estimate a conditional error-probability table.
    Estimate(EstimateArgs),
    /// Run the memory experiments described by a TOML config.
    Run(RunArgs),
    /// Fit the low-p scaling law to a results CSV.
    Fit(FitArgs),
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    distance: usize,
    /// Also compute the minimum logical weight (exhaustive, small d only).
    #[arg(long)]
    min_weight: bool,
    /// Write the code as JSON.
    #[arg(long)]
    code_json: Option<PathBuf>,
    /// Write the memory circuit for this method in text form.
    #[arg(long, requires = "circuit_out")]
    method: Option<Method>,
    #[arg(long, default_value = "Z")]
    basis: Basis,
    #[arg(long)]
    circuit_out: Option<PathBuf>,
    /// Print the deflag rule table of the circuit.
    #[arg(long)]
    rules: bool,
}

#[derive(Args)]
struct EstimateArgs {
    #[arg(long)]
    family: Family,
    #[arg(long)]
    distance: usize,
    #[arg(long, default_value = "flagged")]
    method: Method,
    /// Error type the table is estimated for.
    #[arg(long)]
    basis: Basis,
    #[arg(long)]
    p: f64,
    #[arg(long, default_value_t = 1_000_000)]
    samples: u64,
    #[arg(long, default_value_t = 1)]
    seed: u64,
    #[arg(long)]
    deflag: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment configuration (TOML).
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    shots: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long)]
    table_dir: Option<PathBuf>,
    /// Fit window, e.g. `1e-4,1e-3`; no fit when omitted.
    #[arg(long, value_parser = parse_window)]
    fit_window: Option<(f64, f64)>,
}

#[derive(Args)]
struct FitArgs {
    /// Results CSV written by `run`.
    #[arg(long)]
    results: PathBuf,
    #[arg(long, value_parser = parse_window, default_value = "1e-4,1e-3")]
    window: (f64, f64),
    /// Distances to include (all when omitted).
    #[arg(long, value_delimiter = ',')]
    distances: Vec<usize>,
}

fn parse_window(s: &str) -> std::result::Result<(f64, f64), String> {
    let (a, b) = s.split_once(',').ok_or("expected LO,HI")?;
    let lo: f64 = a.trim().parse().map_err(|e| format!("{e}"))?;
    let hi: f64 = b.trim().parse().map_err(|e| format!("{e}"))?;
    if !(lo > 0.0 && lo < hi) {
        return Err("window must satisfy 0 < LO < HI".into());
    }
    Ok((lo, hi))
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match Cli::parse().command {
        Command::Validate(a) => validate(a),
        Command::Estimate(a) => estimate(a),
        Command::Run(a) => run(a),
        Command::Fit(a) => fit(a),
    }
}

fn validate(a: ValidateArgs) -> Result<()> {
    let code = ColorCode::build(a.family, a.distance)?;
    let report = validate_code(&code);
    println!(
        "{} d={}: {} data qubits, {} faces",
        code.family,
        code.distance,
        code.num_qubits(),
        code.num_faces()
    );
    for v in &report.violations {
        println!("violation: {v:?}");
    }
    if a.min_weight {
        for b in [Basis::X, Basis::Z] {
            let w = min_logical_weight(&code, b, MIN_WEIGHT_BUDGET)?;
            println!("minimum {b} logical weight: {w}");
        }
    }
    if let Some(path) = &a.code_json {
        std::fs::write(path, code.to_json()?).with_context(|| format!("writing {}", path.display()))?;
    }
    if let (Some(method), Some(path)) = (a.method, &a.circuit_out) {
        let c = build_memory_experiment(&code, method, a.basis)?;
        c.validate()?;
        std::fs::write(path, c.to_text()).with_context(|| format!("writing {}", path.display()))?;
        println!(
            "{method} circuit: {} qubits, {} layers, {} measurements",
            c.num_qubits(),
            c.layers.len(),
            c.num_measurements()
        );
        if a.rules {
            print!("{}", dump_rules(&c)?);
        }
    }
    if !report.is_valid() {
        bail!("{} invariant violations", report.violations.len());
    }
    println!("ok");
    Ok(())
}

fn estimate(a: EstimateArgs) -> Result<()> {
    let code = ColorCode::build(a.family, a.distance)?;
    let table = estimate_conditional_probs(
        &code,
        a.method,
        EstimationSide::for_errors(a.basis),
        &NoiseModel::new(a.p)?,
        a.samples,
        a.seed,
        a.deflag,
    )?;
    std::fs::write(&a.out, table.to_json()?).with_context(|| format!("writing {}", a.out.display()))?;
    info!("wrote {}", a.out.display());
    Ok(())
}

fn run(a: RunArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.config).with_context(|| format!("reading {}", a.config.display()))?;
    let mut cfg: ExperimentConfig = toml::from_str(&text).context("parsing config")?;
    if let Some(s) = a.shots {
        cfg.shots = s;
    }
    if let Some(s) = a.seed {
        cfg.seed = s;
    }
    if let Some(o) = a.output {
        cfg.output = o;
    }
    if a.table_dir.is_some() {
        cfg.table_dir = a.table_dir;
    }
    let results = run_experiment(&cfg)?;
    let fits = match a.fit_window {
        Some(w) => fit_groups(&results, w),
        None => Vec::new(),
    };
    for r in &results {
        println!(
            "{} d={} p={:e} {} {} deflag={} {}: {}/{} = {:.3e} [{:.3e}, {:.3e}]",
            r.family, r.d, r.p, r.method, r.scheme, r.deflag, r.basis, r.failures, r.shots, r.rate, r.ci_lo, r.ci_hi
        );
    }
    for path in emit_outputs(&results, &fits, &cfg.output)? {
        info!("wrote {}", path.display());
    }
    Ok(())
}

fn fit(a: FitArgs) -> Result<()> {
    let mut results = read_results(&a.results)?;
    if !a.distances.is_empty() {
        results.retain(|r| a.distances.contains(&r.d));
    }
    let fits = fit_groups(&results, a.window);
    if fits.is_empty() {
        bail!("no group had enough points to fit");
    }
    println!("family,method,scheme,deflag,basis,c,c_se,p_th,p_th_se,alpha,alpha_se,points,identifiable");
    for f in &fits {
        println!(
            "{},{},{},{},{},{:.4},{:.4},{:.5},{:.5},{:.4},{:.4},{},{}",
            f.family,
            f.method,
            f.scheme,
            f.deflag,
            f.basis,
            f.c,
            f.c_se,
            f.p_th,
            f.p_th_se,
            f.alpha,
            f.alpha_se,
            f.points,
            f.identifiable
        );
        if !f.identifiable {
            eprintln!("warning: one p value in the window; alpha and p_th are not identifiable");
        }
    }
    Ok(())
}
