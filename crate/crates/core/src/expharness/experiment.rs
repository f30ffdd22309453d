use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::Serialize;

use super::{
    contaminate, derive_seed, detrend, load_daisy, normalized_prediction_error, npe_against, DatasetSpec,
    ExperimentConfig, GibbsEstimator, HfpEstimate, HfpEstimator, LsEstimator, Method, Npe, RankPolicy, SvdEstimator,
};
use crate::bayes::{ChainConfig, TraceRow};
use crate::error::{Result, SysIdError};
use crate::linalg::sample_covariance;
use crate::subspace::{
    assemble, default_weights, ls_markov, model_from_hfp, row_length, select_rank, weighted_factorization, RowLength,
    WeightPair, AUTO_RANK_THRESHOLD,
};
use crate::sysmodel::{markov_hfp, predict_one_step, StateSpaceModel, TimeSeries};

/// Minimum number of leading validation predictions left out of the metric.
pub const PREDICTION_WASHOUT: usize = 20;

pub const CSV_HEADER: &str = "dataset,alpha,method,trial,seed,npe,risk,wall_time";

/// One successful (dataset, α, method, trial) cell.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRecord {
    pub dataset: String,
    pub alpha: f64,
    pub method: String,
    pub trial: usize,
    pub seed: u64,
    pub npe: f64,
    /// Weighted squared error against the generating model, when known.
    pub risk: Option<f64>,
    pub wall_time: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CellFailure {
    pub dataset: String,
    pub alpha: f64,
    pub method: String,
    pub trial: usize,
    pub reason: String,
}

/// Mean prediction error per (dataset, α, method).
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub dataset: String,
    pub alpha: f64,
    pub method: String,
    pub mean_npe: f64,
    pub count: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentReport {
    pub records: Vec<ResultRecord>,
    pub failures: Vec<CellFailure>,
    pub summary: Vec<SummaryRow>,
    /// Per-sweep chain traces, keyed by cell directory name.
    #[serde(skip)]
    pub traces: Vec<(String, Vec<TraceRow>)>,
    /// Non-fatal notes (clamped row lengths, excluded channels).
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn total_cells(&self) -> usize {
        self.records.len() + self.failures.len()
    }
}

/// Detrended record, its output covariance and optional generating model.
struct Prepared {
    data: TimeSeries,
    clean: TimeSeries,
    sigma_y: DMatrix<f64>,
    truth: Option<StateSpaceModel>,
}

struct CellKey {
    d: usize,
    a: usize,
    m: usize,
    t: usize,
}

struct CellOutput {
    record: ResultRecord,
    trace: Option<Vec<TraceRow>>,
    warnings: Vec<String>,
}

fn prepare(cfg: &ExperimentConfig) -> Result<Vec<Prepared>> {
    cfg.datasets
        .iter()
        .map(|spec| {
            let raw = load_daisy(spec)?;
            if raw.len() < spec.required_length() {
                return Err(SysIdError::InsufficientData {
                    what: "dataset file",
                    required: spec.required_length(),
                    available: raw.len(),
                });
            }
            let data = detrend(&raw, spec.estimation_length);
            let sigma_y = sample_covariance(&data.y.columns(0, spec.estimation_length).into_owned());
            let truth = match &spec.truth_model {
                Some(p) => {
                    let text = fs::read_to_string(p)
                        .map_err(|e| std::io::Error::new(e.kind(), format!("{}: {e}", p.display())))?;
                    let model: StateSpaceModel = serde_json::from_str(&text)
                        .map_err(|e| SysIdError::Config(format!("truth model {}: {e}", p.display())))?;
                    model.validate()?;
                    Some(model)
                }
                None => None,
            };
            Ok(Prepared {
                clean: data.clone(),
                data,
                sigma_y,
                truth,
            })
        })
        .collect()
}

fn resolve_rank(policy: RankPolicy, ls_hfp: &DMatrix<f64>, w: &WeightPair) -> Result<usize> {
    let max_rank = ls_hfp.nrows().min(ls_hfp.ncols());
    match policy {
        RankPolicy::Fixed(r) if r <= max_rank => Ok(r),
        RankPolicy::Fixed(r) => Err(SysIdError::InvalidArgument(format!(
            "rank {r} exceeds the size of H_fp ({max_rank})"
        ))),
        RankPolicy::Auto => {
            let profile = weighted_factorization(ls_hfp, w, 1)?.profile;
            Ok(select_rank(&profile, AUTO_RANK_THRESHOLD).max(1))
        }
    }
}

pub fn cell_name(dataset: &str, alpha: f64, method: Method, trial: usize) -> String {
    let clean: String = dataset
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' { c } else { '_' })
        .collect();
    format!("{clean}_a{alpha}_{method}_t{trial}")
}

/// Result of fitting one estimation segment and scoring it on validation data.
#[derive(Clone, Debug)]
pub struct Identification {
    pub model: StateSpaceModel,
    pub estimate: HfpEstimate,
    /// Row length `i` (used for both horizons).
    pub row_length: RowLength,
    pub rank: usize,
    pub npe: Npe,
    /// Default weights of the estimation data.
    pub weights: WeightPair,
}

/// Options shared by [`identify_segments`] and [`identify_dataset`].
#[derive(Clone, Debug)]
pub struct IdentifyOptions {
    pub method: Method,
    pub rank_policy: RankPolicy,
    pub chain: ChainConfig,
    pub seed: u64,
}

/// Estimates `H_fp` on `est`, recovers a model and scores its one-step
/// predictions on `val`. `val_clean`, when given, supplies the metric
/// denominator.
pub fn identify_segments(
    est: &TimeSeries,
    val: &TimeSeries,
    val_clean: Option<&TimeSeries>,
    sigma_y: &DMatrix<f64>,
    opts: &IdentifyOptions,
) -> Result<Identification> {
    let rl = row_length(est.len(), est.n_o(), est.n_i());
    let i = rl.i;
    let ds = assemble(est, i, i)?;
    let weights = default_weights(&ds, sigma_y)?;
    let ls = ls_markov(&ds);
    let r = resolve_rank(opts.rank_policy, &ls.hfp, &weights)?;

    let estimator: Box<dyn HfpEstimator> = match opts.method {
        Method::Ls => Box::new(LsEstimator),
        Method::SvdTruncated => Box::new(SvdEstimator { rank: r }),
        Method::BayesGibbs => Box::new(GibbsEstimator {
            rank: r,
            chain: opts.chain.clone(),
        }),
    };
    let estimate = estimator.estimate(&ds, sigma_y, opts.seed)?;

    // plain LS is factored without weights; the other estimators use the
    // same weights they were built with
    let recovery_weights = match opts.method {
        Method::Ls => WeightPair::identity(ds.yf.nrows(), ds.zp.nrows()),
        _ => weights.clone(),
    };
    let model = model_from_hfp(&estimate.hfp, &estimate.hf, &ds, &recovery_weights, r)?;
    let yhat = predict_one_step(&model, val, &DVector::zeros(model.n_x()))?;
    let skip = i.max(PREDICTION_WASHOUT).min(val.len().saturating_sub(1));
    let npe = match val_clean {
        Some(clean) => npe_against(&yhat, &val.y, &clean.y, skip)?,
        None => normalized_prediction_error(&yhat, &val.y, skip)?,
    };
    if !npe.value.is_finite() {
        return Err(SysIdError::Numerical("prediction error is not finite".into()));
    }
    Ok(Identification {
        model,
        estimate,
        row_length: rl,
        rank: r,
        npe,
        weights,
    })
}

/// Loads, detrends and splits one dataset, then runs [`identify_segments`]
/// without added noise.
pub fn identify_dataset(spec: &DatasetSpec, opts: &IdentifyOptions) -> Result<Identification> {
    spec.validate()?;
    let raw = load_daisy(spec)?;
    if raw.len() < spec.required_length() {
        return Err(SysIdError::InsufficientData {
            what: "dataset file",
            required: spec.required_length(),
            available: raw.len(),
        });
    }
    let data = detrend(&raw, spec.estimation_length);
    let sigma_y = sample_covariance(&data.y.columns(0, spec.estimation_length).into_owned());
    let (est, val) = spec.split(&data)?;
    identify_segments(&est, &val, None, &sigma_y, opts)
}

fn run_cell(cfg: &ExperimentConfig, prep: &[Prepared], key: &CellKey) -> Result<CellOutput> {
    let start = Instant::now();
    let spec = &cfg.datasets[key.d];
    let p = &prep[key.d];
    let alpha = cfg.noise_levels[key.a];
    let method = cfg.methods[key.m];
    let cell_seed = derive_seed(cfg.seed, &[key.d as u64, key.a as u64, key.t as u64]);
    let mut warnings = Vec::new();

    // contamination depends on the cell, not the method, so methods are paired
    let noisy = contaminate(&p.data, alpha, &p.sigma_y, cell_seed)?;
    let (est, val) = spec.split(&noisy)?;
    let (_, val_clean) = spec.split(&p.clean)?;

    let opts = IdentifyOptions {
        method,
        rank_policy: cfg.rank_policy,
        chain: cfg.chain.clone(),
        seed: derive_seed(cell_seed, &[1]),
    };
    let clean = cfg.clean_denominator.then_some(&val_clean);
    let fit = identify_segments(&est, &val, clean, &p.sigma_y, &opts)?;
    let i = fit.row_length.i;
    if fit.row_length.clamped {
        warnings.push(format!("{}: row length clamped to {}", spec.name, i));
    }
    if !fit.npe.excluded.is_empty() {
        warnings.push(format!(
            "{}: zero-energy output channels {:?} excluded",
            spec.name, fit.npe.excluded
        ));
    }
    let risk = p.truth.as_ref().map(|m| {
        let truth = markov_hfp(m, i, i).hfp;
        fit.weights.weighted_sq_error(&truth, &fit.estimate.hfp)
    });
    Ok(CellOutput {
        record: ResultRecord {
            dataset: spec.name.clone(),
            alpha,
            method: method.label().to_string(),
            trial: key.t,
            seed: cell_seed,
            npe: fit.npe.value,
            risk,
            wall_time: start.elapsed().as_secs_f64(),
        },
        trace: fit.estimate.trace,
        warnings,
    })
}

/// Runs every (dataset, α, method, trial) cell. Cells run in parallel and
/// are merged in config order; a failing cell is recorded, not fatal.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    cfg.validate()?;
    let prep = prepare(cfg)?;
    let mut keys = Vec::new();
    for d in 0..cfg.datasets.len() {
        for a in 0..cfg.noise_levels.len() {
            for m in 0..cfg.methods.len() {
                for t in 0..cfg.trials_per_cell {
                    keys.push(CellKey { d, a, m, t });
                }
            }
        }
    }
    let outcomes: Vec<(&CellKey, Result<CellOutput>)> = keys.par_iter().map(|k| (k, run_cell(cfg, &prep, k))).collect();

    let mut report = ExperimentReport {
        records: Vec::new(),
        failures: Vec::new(),
        summary: Vec::new(),
        traces: Vec::new(),
        warnings: Vec::new(),
    };
    for (key, outcome) in outcomes {
        let name = &cfg.datasets[key.d].name;
        let alpha = cfg.noise_levels[key.a];
        let method = cfg.methods[key.m];
        match outcome {
            Ok(out) => {
                if let Some(trace) = out.trace {
                    report.traces.push((cell_name(name, alpha, method, key.t), trace));
                }
                report.warnings.extend(out.warnings);
                report.records.push(out.record);
            }
            Err(e) => report.failures.push(CellFailure {
                dataset: name.clone(),
                alpha,
                method: method.label().to_string(),
                trial: key.t,
                reason: e.to_string(),
            }),
        }
    }
    report.warnings.sort();
    report.warnings.dedup();
    report.summary = summarize(cfg, &report.records);
    Ok(report)
}

fn summarize(cfg: &ExperimentConfig, records: &[ResultRecord]) -> Vec<SummaryRow> {
    let mut out = Vec::new();
    for spec in &cfg.datasets {
        for &alpha in &cfg.noise_levels {
            for method in &cfg.methods {
                let vals: Vec<f64> = records
                    .iter()
                    .filter(|r| r.dataset == spec.name && r.alpha == alpha && r.method == method.label())
                    .map(|r| r.npe)
                    .collect();
                if vals.is_empty() {
                    continue;
                }
                out.push(SummaryRow {
                    dataset: spec.name.clone(),
                    alpha,
                    method: method.label().to_string(),
                    mean_npe: vals.iter().sum::<f64>() / vals.len() as f64,
                    count: vals.len(),
                });
            }
        }
    }
    out
}

pub fn records_csv(records: &[ResultRecord]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in records {
        let risk = r.risk.map(|v| v.to_string()).unwrap_or_default();
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{:.6}",
            r.dataset, r.alpha, r.method, r.trial, r.seed, r.npe, risk, r.wall_time
        );
    }
    out
}

pub fn summary_csv(rows: &[SummaryRow]) -> String {
    let mut out = String::from("dataset,alpha,method,mean_npe,count\n");
    for r in rows {
        let _ = writeln!(out, "{},{},{},{},{}", r.dataset, r.alpha, r.method, r.mean_npe, r.count);
    }
    out
}

pub fn trace_csv(trace: &[TraceRow]) -> String {
    let mut out = String::from("iteration,log_det_g11,gamma_l_norm\n");
    for t in trace {
        let _ = writeln!(out, "{},{},{}", t.iteration, t.log_det_g11, t.gamma_l_norm);
    }
    out
}

/// Writes `results.csv`, `summary.csv`, `results.json` (records, failures,
/// summary and the config) and `chains/<cell>/trace.csv` under `dir`.
pub fn write_report(cfg: &ExperimentConfig, report: &ExperimentReport, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    fs::write(dir.join("results.csv"), records_csv(&report.records))?;
    fs::write(dir.join("summary.csv"), summary_csv(&report.summary))?;
    let json = serde_json::json!({
        "config": cfg,
        "records": report.records,
        "failures": report.failures,
        "summary": report.summary,
        "warnings": report.warnings,
    });
    let text = serde_json::to_string_pretty(&json).map_err(|e| SysIdError::Numerical(e.to_string()))?;
    fs::write(dir.join("results.json"), text)?;
    for (name, trace) in &report.traces {
        let cell_dir = dir.join("chains").join(name);
        fs::create_dir_all(&cell_dir)?;
        fs::write(cell_dir.join("trace.csv"), trace_csv(trace))?;
    }
    Ok(())
}
