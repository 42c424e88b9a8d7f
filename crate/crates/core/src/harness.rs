//! Monte Carlo memory experiments, threshold fits and result files.

use std::path::{Path, PathBuf};

use log::{info, warn};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::circuit::{build_memory_experiment, Method, SCHEDULE_VERSION};
use crate::code::{Basis, ColorCode, Family};
use crate::decoder::{build_instance, decode, judge_logical_error, Status, DEFAULT_NODE_BUDGET};
use crate::deflag::Deflagger;
use crate::error::{Error, Result};
use crate::sim::{FrameSampler, NoiseModel};
use crate::weights::{ConditionalProbTable, Scheme, WeightModel, TABLE_VERSION};

const Z95: f64 = 1.959_963_984_540_054;
const CHUNK: u64 = 256;

/// Wilson score 95% interval for `k` successes in `n` trials.
pub fn wilson_interval(k: u64, n: u64) -> (f64, f64) {
    if n == 0 {
        return (0.0, 1.0);
    }
    let n = n as f64;
    let p = k as f64 / n;
    let z2 = Z95 * Z95;
    let denom = 1.0 + z2 / n;
    let center = (p + z2 / (2.0 * n)) / denom;
    let half = Z95 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
    let lo = if k == 0 { 0.0 } else { (center - half).max(0.0) };
    let hi = if p == 1.0 { 1.0 } else { (center + half).min(1.0) };
    (lo, hi)
}

/// One memory-experiment configuration.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub family: Family,
    pub distance: usize,
    pub p: f64,
    pub method: Method,
    pub scheme: Scheme,
    pub deflag: bool,
    pub basis: Basis,
    pub shots: u64,
    pub seed: u64,
    pub node_budget: u64,
    /// Count budget-exhausted decodes as failures instead of using the best found.
    pub strict: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub family: Family,
    pub d: usize,
    pub p: f64,
    pub method: Method,
    pub scheme: Scheme,
    pub deflag: bool,
    pub basis: Basis,
    pub shots: u64,
    pub failures: u64,
    pub rate: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub seed: u64,
    pub schedule_version: u32,
    pub table_version: u32,
    #[serde(skip)]
    pub budget_exceeded: u64,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
struct Tally {
    shots: u64,
    failures: u64,
    budget_exceeded: u64,
}

impl std::ops::Add for Tally {
    type Output = Tally;
    fn add(self, o: Tally) -> Tally {
        Tally {
            shots: self.shots + o.shots,
            failures: self.failures + o.failures,
            budget_exceeded: self.budget_exceeded + o.budget_exceeded,
        }
    }
}

/// Runs one configuration. `table` is required for conventional and flagged weights.
pub fn run_memory(spec: &RunSpec, table: Option<&ConditionalProbTable>) -> Result<RunResult> {
    let code = ColorCode::build(spec.family, spec.distance)?;
    let noise = NoiseModel::new(spec.p)?;
    if spec.shots == 0 {
        return Err(Error::Invalid("shots must be positive".into()));
    }
    if spec.deflag && spec.method == Method::SingleAncilla {
        return Err(Error::Invalid("deflagging needs flag gadgets".into()));
    }
    if let Some(t) = table {
        let h = &t.header;
        if h.family != spec.family || h.distance != spec.distance || h.method != spec.method {
            return Err(Error::Invalid("table was estimated for a different code or method".into()));
        }
        if h.deflag != spec.deflag {
            warn!("table deflag setting ({}) differs from run ({})", h.deflag, spec.deflag);
        }
    }
    let circuit = build_memory_experiment(&code, spec.method, spec.basis)?;
    let sampler = FrameSampler::new(&circuit)?;
    let deflagger = if spec.deflag { Some(Deflagger::new(&circuit, &sampler)?) } else { None };
    let model = WeightModel::new(spec.scheme, table, &circuit, &code, spec.basis)?;
    let chunks = spec.shots.div_ceil(CHUNK);
    let tallies: Vec<Result<Tally>> = (0..chunks)
        .into_par_iter()
        .map(|c| {
            let mut t = Tally::default();
            for shot in c * CHUNK..((c + 1) * CHUNK).min(spec.shots) {
                let mut rec = sampler.sample(&noise, spec.seed, shot, false);
                if let Some(d) = &deflagger {
                    d.apply_in_place(&mut rec);
                }
                let w = model.assign(&rec);
                let inst = build_instance(&rec, &circuit, &code, &w, spec.basis)?;
                let sol = decode(&inst, spec.node_budget);
                t.shots += 1;
                let failed = match sol.status {
                    Status::Optimal => judge_logical_error(&sol, &rec, &circuit, &code, spec.basis)?,
                    Status::BudgetExceeded => {
                        t.budget_exceeded += 1;
                        spec.strict
                            || sol.objective.is_infinite()
                            || judge_logical_error(&sol, &rec, &circuit, &code, spec.basis)?
                    }
                    Status::Infeasible => {
                        return Err(Error::Invalid(format!("shot {shot}: decoding instance infeasible")))
                    }
                };
                t.failures += failed as u64;
            }
            Ok(t)
        })
        .collect();
    let mut total = Tally::default();
    for t in tallies {
        total = total + t?;
    }
    if total.budget_exceeded > 0 {
        warn!(
            "{} d={} p={}: {} shots exhausted the decode budget",
            spec.family, spec.distance, spec.p, total.budget_exceeded
        );
    }
    let (ci_lo, ci_hi) = wilson_interval(total.failures, total.shots);
    Ok(RunResult {
        family: spec.family,
        d: spec.distance,
        p: spec.p,
        method: spec.method,
        scheme: spec.scheme,
        deflag: spec.deflag,
        basis: spec.basis,
        shots: total.shots,
        failures: total.failures,
        rate: total.failures as f64 / total.shots as f64,
        ci_lo,
        ci_hi,
        seed: spec.seed,
        schedule_version: SCHEDULE_VERSION,
        table_version: if table.is_some() { TABLE_VERSION } else { 0 },
        budget_exceeded: total.budget_exceeded,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub family: Family,
    pub distances: Vec<usize>,
    pub p_grid: Vec<f64>,
    pub method: Method,
    pub scheme: Scheme,
    #[serde(default)]
    pub deflag: bool,
    pub shots: u64,
    pub seed: u64,
    #[serde(default = "default_bases")]
    pub bases: Vec<Basis>,
    /// Directory holding estimated tables; missing tables are estimated and saved here.
    #[serde(default)]
    pub table_dir: Option<PathBuf>,
    #[serde(default = "default_estimation_samples")]
    pub estimation_samples: u64,
    #[serde(default = "default_budget")]
    pub node_budget: u64,
    #[serde(default)]
    pub strict: bool,
    #[serde(default = "default_output")]
    pub output: PathBuf,
}

fn default_bases() -> Vec<Basis> {
    vec![Basis::X, Basis::Z]
}

fn default_estimation_samples() -> u64 {
    1_000_000
}

fn default_budget() -> u64 {
    DEFAULT_NODE_BUDGET
}

fn default_output() -> PathBuf {
    PathBuf::from("results")
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.distances.is_empty() || self.distances.iter().any(|&d| d < 3 || d % 2 == 0) {
            return Err(Error::Invalid("distances must be odd and at least 3".into()));
        }
        if self.p_grid.is_empty() || self.p_grid.iter().any(|&p| !(p > 0.0 && p < 1.0)) {
            return Err(Error::Invalid("p grid must lie in (0, 1)".into()));
        }
        if self.shots == 0 {
            return Err(Error::Invalid("shots must be positive".into()));
        }
        Ok(())
    }
}

/// File name used for an estimated table.
pub fn table_file_name(family: Family, d: usize, p: f64, method: Method, basis: Basis, deflag: bool) -> String {
    let fam = match family {
        Family::C488 => "488",
        Family::C666 => "666",
    };
    format!(
        "table_{fam}_d{d}_p{p:e}_{method}_{basis}{}.json",
        if deflag { "_deflag" } else { "" }
    )
}

fn obtain_table(cfg: &ExperimentConfig, d: usize, p: f64, basis: Basis) -> Result<ConditionalProbTable> {
    let code = ColorCode::build(cfg.family, d)?;
    let name = table_file_name(cfg.family, d, p, cfg.method, basis, cfg.deflag);
    if let Some(dir) = &cfg.table_dir {
        let path = dir.join(&name);
        if path.exists() {
            info!("loading {}", path.display());
            return ConditionalProbTable::from_json(&std::fs::read_to_string(&path)?);
        }
    }
    info!("estimating {name} with {} samples", cfg.estimation_samples);
    let table = crate::weights::estimate_conditional_probs(
        &code,
        cfg.method,
        crate::circuit::EstimationSide::for_errors(basis),
        &NoiseModel::new(p)?,
        cfg.estimation_samples,
        cfg.seed ^ 0x7ab1e,
        cfg.deflag,
    )?;
    if let Some(dir) = &cfg.table_dir {
        std::fs::create_dir_all(dir)?;
        std::fs::write(dir.join(&name), table.to_json()?)?;
    }
    Ok(table)
}

/// Runs every (d, p, basis) combination of a configuration.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Vec<RunResult>> {
    cfg.validate()?;
    let mut out = Vec::new();
    for &d in &cfg.distances {
        for &p in &cfg.p_grid {
            for &basis in &cfg.bases {
                let table = match cfg.scheme {
                    Scheme::Uniform => None,
                    _ => Some(obtain_table(cfg, d, p, basis)?),
                };
                let spec = RunSpec {
                    family: cfg.family,
                    distance: d,
                    p,
                    method: cfg.method,
                    scheme: cfg.scheme,
                    deflag: cfg.deflag,
                    basis,
                    shots: cfg.shots,
                    seed: cfg.seed,
                    node_budget: cfg.node_budget,
                    strict: cfg.strict,
                };
                let r = run_memory(&spec, table.as_ref())?;
                info!(
                    "{} d={d} p={p} {basis}: {}/{} failures",
                    cfg.family, r.failures, r.shots
                );
                out.push(r);
            }
        }
    }
    Ok(out)
}

/// Fitted `p_L = c (p / p_th)^(alpha (d + 1) / 2)`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub c: f64,
    pub c_se: f64,
    pub p_th: f64,
    pub p_th_se: f64,
    pub alpha: f64,
    pub alpha_se: f64,
    pub window: (f64, f64),
    pub points_used: usize,
    pub residuals: Vec<f64>,
    /// False when the design cannot separate `alpha` from `p_th` (a single p value).
    pub identifiable: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitPoint {
    pub p: f64,
    pub d: usize,
    pub p_l: f64,
}

/// Least squares in log space. Writing `k = (d + 1) / 2`, the model is linear:
/// `ln p_L = a + beta k ln p + gamma k` with `c = e^a`, `alpha = beta` and
/// `p_th = exp(-gamma / beta)`. Standard errors use the delta method.
pub fn fit_threshold(points: &[FitPoint], window: (f64, f64)) -> Result<FitResult> {
    let mut pts: Vec<FitPoint> = points
        .iter()
        .copied()
        .filter(|q| q.p >= window.0 && q.p <= window.1)
        .collect();
    let before = pts.len();
    pts.retain(|q| q.p_l > 0.0);
    if pts.len() < before {
        warn!("dropped {} zero-rate points from the fit", before - pts.len());
    }
    let mut ds: Vec<usize> = pts.iter().map(|q| q.d).collect();
    ds.sort_unstable();
    ds.dedup();
    if ds.len() < 2 {
        return Err(Error::Invalid("fit needs at least two distances".into()));
    }
    let mut ps: Vec<f64> = pts.iter().map(|q| q.p).collect();
    ps.sort_by(f64::total_cmp);
    ps.dedup();
    let k = |d: usize| (d as f64 + 1.0) / 2.0;
    let y = DVector::from_iterator(pts.len(), pts.iter().map(|q| q.p_l.ln()));
    if ps.len() == 1 {
        // Only ln c + k * alpha ln(p / p_th) is identifiable.
        let x = DMatrix::from_fn(pts.len(), 2, |i, j| if j == 0 { 1.0 } else { k(pts[i].d) });
        let coef = solve(&x, &y)?;
        let residuals = (&y - &x * &coef).iter().copied().collect();
        let slope = coef[1];
        return Ok(FitResult {
            c: coef[0].exp(),
            c_se: f64::NAN,
            p_th: if slope.abs() < 1e-9 { ps[0] } else { f64::NAN },
            p_th_se: f64::NAN,
            alpha: f64::NAN,
            alpha_se: f64::NAN,
            window,
            points_used: pts.len(),
            residuals,
            identifiable: false,
        });
    }
    if ps.len() < 3 {
        return Err(Error::Invalid("fit needs at least three p values in the window".into()));
    }
    let x = DMatrix::from_fn(pts.len(), 3, |i, j| match j {
        0 => 1.0,
        1 => k(pts[i].d) * pts[i].p.ln(),
        _ => k(pts[i].d),
    });
    let coef = solve(&x, &y)?;
    let resid = &y - &x * &coef;
    let dof = pts.len().saturating_sub(3);
    let s2 = if dof > 0 { resid.norm_squared() / dof as f64 } else { 0.0 };
    let cov = (x.transpose() * &x)
        .try_inverse()
        .ok_or_else(|| Error::Invalid("singular fit design".into()))?
        * s2;
    let (a, beta, gamma) = (coef[0], coef[1], coef[2]);
    if beta.abs() < f64::EPSILON {
        return Err(Error::Invalid("fitted slope is zero; threshold undefined".into()));
    }
    let c = a.exp();
    let p_th = (-gamma / beta).exp();
    let grad = [p_th * gamma / (beta * beta), -p_th / beta];
    let var_pth = grad[0] * grad[0] * cov[(1, 1)] + 2.0 * grad[0] * grad[1] * cov[(1, 2)] + grad[1] * grad[1] * cov[(2, 2)];
    Ok(FitResult {
        c,
        c_se: c * cov[(0, 0)].max(0.0).sqrt(),
        p_th,
        p_th_se: var_pth.max(0.0).sqrt(),
        alpha: beta,
        alpha_se: cov[(1, 1)].max(0.0).sqrt(),
        window,
        points_used: pts.len(),
        residuals: resid.iter().copied().collect(),
        identifiable: true,
    })
}

fn solve(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<DVector<f64>> {
    x.clone()
        .svd(true, true)
        .solve(y, 1e-12)
        .map_err(|e| Error::Invalid(format!("least squares failed: {e}")))
}

/// A fit tagged with the configuration it summarizes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitRow {
    pub family: Family,
    pub method: Method,
    pub scheme: Scheme,
    pub deflag: bool,
    pub basis: Basis,
    pub c: f64,
    pub c_se: f64,
    pub p_th: f64,
    pub p_th_se: f64,
    pub alpha: f64,
    pub alpha_se: f64,
    pub window_lo: f64,
    pub window_hi: f64,
    pub points: usize,
    pub identifiable: bool,
}

impl FitRow {
    pub fn new(key: &RunResult, fit: &FitResult) -> Self {
        Self {
            family: key.family,
            method: key.method,
            scheme: key.scheme,
            deflag: key.deflag,
            basis: key.basis,
            c: fit.c,
            c_se: fit.c_se,
            p_th: fit.p_th,
            p_th_se: fit.p_th_se,
            alpha: fit.alpha,
            alpha_se: fit.alpha_se,
            window_lo: fit.window.0,
            window_hi: fit.window.1,
            points: fit.points_used,
            identifiable: fit.identifiable,
        }
    }
}

/// Fits every (family, method, scheme, deflag, basis) group of results.
pub fn fit_groups(results: &[RunResult], window: (f64, f64)) -> Vec<FitRow> {
    let mut keys: Vec<&RunResult> = Vec::new();
    for r in results {
        if !keys.iter().any(|k| same_group(k, r)) {
            keys.push(r);
        }
    }
    keys.into_iter()
        .filter_map(|k| {
            let pts: Vec<FitPoint> = results
                .iter()
                .filter(|r| same_group(k, r))
                .map(|r| FitPoint { p: r.p, d: r.d, p_l: r.rate })
                .collect();
            match fit_threshold(&pts, window) {
                Ok(f) => Some(FitRow::new(k, &f)),
                Err(e) => {
                    warn!("skipping fit for {} {} {}: {e}", k.family, k.method, k.basis);
                    None
                }
            }
        })
        .collect()
}

fn same_group(a: &RunResult, b: &RunResult) -> bool {
    a.family == b.family && a.method == b.method && a.scheme == b.scheme && a.deflag == b.deflag && a.basis == b.basis
}

#[derive(Serialize)]
struct SeriesRow {
    p: f64,
    rate: f64,
    ci_lo: f64,
    ci_hi: f64,
}

/// Writes `results.csv`, `fit.csv` (when fits exist) and one series file per
/// (configuration, distance). Returns the written paths.
pub fn emit_outputs(results: &[RunResult], fits: &[FitRow], dir: &Path) -> Result<Vec<PathBuf>> {
    if results.is_empty() {
        return Err(Error::Invalid("no results to write".into()));
    }
    std::fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let path = dir.join("results.csv");
    write_csv(&path, results)?;
    written.push(path);
    if !fits.is_empty() {
        let path = dir.join("fit.csv");
        write_csv(&path, fits)?;
        written.push(path);
    }
    let mut series: Vec<(String, Vec<SeriesRow>)> = Vec::new();
    for r in results {
        let name = format!(
            "series_{}_{}_{}{}_{}_d{}.csv",
            match r.family {
                Family::C488 => "488",
                Family::C666 => "666",
            },
            r.method,
            r.scheme,
            if r.deflag { "_deflag" } else { "" },
            r.basis,
            r.d
        );
        let row = SeriesRow { p: r.p, rate: r.rate, ci_lo: r.ci_lo, ci_hi: r.ci_hi };
        match series.iter_mut().find(|(n, _)| *n == name) {
            Some((_, rows)) => rows.push(row),
            None => series.push((name, vec![row])),
        }
    }
    for (name, mut rows) in series {
        rows.sort_by(|a, b| a.p.total_cmp(&b.p));
        let path = dir.join(name);
        write_csv(&path, &rows)?;
        written.push(path);
    }
    Ok(written)
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    for r in rows {
        w.serialize(r).map_err(csv_err)?;
    }
    w.flush()?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Invalid(format!("csv: {e}"))
}

/// Reads a results CSV written by [`emit_outputs`].
pub fn read_results(path: &Path) -> Result<Vec<RunResult>> {
    let mut r = csv::Reader::from_path(path).map_err(csv_err)?;
    r.deserialize().map(|row| row.map_err(csv_err)).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wilson_contains_point_estimate() {
        let (lo, hi) = wilson_interval(10, 1000);
        assert!(lo < 0.01 && 0.01 < hi);
        let (lo, hi) = wilson_interval(0, 1000);
        assert_eq!(lo, 0.0);
        assert!(hi > 0.0 && hi < 0.01);
    }

    #[test]
    fn fit_needs_two_distances() {
        let pts = [1e-4, 2e-4, 3e-4].map(|p| FitPoint { p, d: 3, p_l: p });
        assert!(fit_threshold(&pts, (0.0, 1.0)).is_err());
    }
}
