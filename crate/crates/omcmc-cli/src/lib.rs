//! Configuration-driven experiment runner: parses a JSON experiment file,
//! runs the requested sampler (or baseline) over many seeded runs, and emits
//! machine-readable result files.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::json;

use omcmc::orchestrator::{run_ipc, run_omcmc, run_pmc, run_sa_optimize, uniform_init};
use omcmc::targets::{grid_mean, SinusoidModel, SinusoidPosterior};
use omcmc::vertical::CoolingSchedule;
use omcmc::{
    cost_closed_forms, estimate_mean, gaussian_mixture_5, mse, relative_error, CostCounters,
    OmcmcSpec, RandomWalkProposal, RngStream, SampleStore, Schedule, Scheme, Target,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Sample,
    Optimize,
    Benchmark,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Omcmc,
    Ipc,
    Pmc,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TargetSpec {
    #[serde(rename = "gaussian_mixture_5")]
    GaussianMixture5,
    Sinusoid {
        s: usize,
        sigma_w2: f64,
        freqs: Vec<f64>,
        k: usize,
        #[serde(default)]
        noise_seed: u64,
        #[serde(default)]
        observations_csv: Option<String>,
    },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitSpec {
    Uniform { lower: Vec<f64>, upper: Vec<f64> },
    Points { points: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoolingSpec {
    Geometric { gamma0: f64, rate: f64 },
    Logarithmic { c: f64 },
}

fn default_t() -> usize {
    4000
}
fn default_one() -> usize {
    1
}
fn default_seed() -> u64 {
    1
}
fn default_grid_resolution() -> usize {
    1000
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSpec,
    #[serde(default = "default_method")]
    pub method: Method,
    #[serde(default)]
    pub scheme: Option<Scheme>,
    pub n: usize,
    #[serde(default = "default_one")]
    pub l: usize,
    #[serde(default = "default_t")]
    pub t: usize,
    #[serde(default = "default_one")]
    pub t_v: usize,
    #[serde(default = "default_one")]
    pub t_h: usize,
    /// Vertical random-walk standard deviation (also the PMC noise scale).
    pub sigma: f64,
    /// Horizontal scale as a scalar lambda (covariance lambda^2 I) ...
    #[serde(default)]
    pub lambda: Option<f64>,
    /// ... or as an explicit covariance matrix Lambda_0.
    #[serde(default)]
    pub lambda0: Option<Vec<Vec<f64>>>,
    #[serde(default)]
    pub adapt: bool,
    #[serde(default)]
    pub t_train: Option<usize>,
    #[serde(default = "default_one")]
    pub runs: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    #[serde(default)]
    pub init: Option<InitSpec>,
    #[serde(default)]
    pub mode: Option<Mode>,
    #[serde(default)]
    pub cooling: Option<CoolingSpec>,
    /// Benchmark mode sweeps the vertical scale over this grid.
    #[serde(default)]
    pub sigma_grid: Option<Vec<f64>>,
    /// Known mean of the target; computed from the target when absent.
    #[serde(default)]
    pub truth: Option<Vec<f64>>,
    #[serde(default = "default_grid_resolution")]
    pub grid_resolution: usize,
    #[serde(default)]
    pub out_dir: Option<String>,
}

fn default_method() -> Method {
    Method::Omcmc
}

impl ExperimentConfig {
    /// Validate, reporting every violation at once.
    pub fn validate(&self) -> anyhow::Result<()> {
        let mut violations = Vec::new();
        if self.runs == 0 {
            violations.push("runs: must be at least 1".to_string());
        }
        if self.sigma <= 0.0 {
            violations.push("sigma: must be positive".to_string());
        }
        if self.method == Method::Omcmc {
            match self.scheme {
                None => violations.push("scheme: required for the omcmc method".to_string()),
                Some(scheme) => match Schedule::new(self.t, self.t_v, self.t_h, self.n, self.l) {
                    Err(e) => violations.push(format!("t/t_v/t_h: {e}")),
                    Ok(s) => {
                        if let Err(e) = s.validate_for(scheme) {
                            violations.push(format!("t_h: {e}"));
                        }
                    }
                },
            }
        } else if self.n == 0 || self.t == 0 {
            violations.push("n/t: must be positive".to_string());
        }
        if let Some(l) = &self.lambda {
            if *l <= 0.0 {
                violations.push("lambda: must be positive".to_string());
            }
        }
        if let Some(rows) = &self.lambda0 {
            let d = rows.len();
            if d == 0 || rows.iter().any(|r| r.len() != d) {
                violations.push("lambda0: must be a square matrix".to_string());
            } else {
                let m = DMatrix::from_fn(d, d, |i, j| rows[i][j]);
                if nalgebra::Cholesky::new(m).is_none() {
                    violations.push("lambda0: must be symmetric positive definite".to_string());
                }
            }
        }
        if let TargetSpec::Sinusoid {
            s,
            sigma_w2,
            freqs,
            k,
            ..
        } = &self.target
        {
            if *s == 0 {
                violations.push("target.s: must be positive".to_string());
            }
            if *sigma_w2 <= 0.0 {
                violations.push("target.sigma_w2: must be positive".to_string());
            }
            if freqs.len() != *s {
                violations.push(format!(
                    "target.freqs: expected {s} frequencies, got {}",
                    freqs.len()
                ));
            }
            if *k == 0 {
                violations.push("target.k: must be positive".to_string());
            }
        }
        if let Some(InitSpec::Points { points }) = &self.init {
            if points.len() != self.n {
                violations.push(format!(
                    "init.points: expected {} points, got {}",
                    self.n,
                    points.len()
                ));
            }
        }
        if violations.is_empty() {
            Ok(())
        } else {
            bail!("invalid config:\n  - {}", violations.join("\n  - "))
        }
    }
}

/// Parse and validate a config file.
pub fn parse_config(path: &Path) -> anyhow::Result<ExperimentConfig> {
    let text = fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
    let config: ExperimentConfig =
        serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
    config.validate()?;
    Ok(config)
}

fn build_target(config: &ExperimentConfig) -> anyhow::Result<Box<dyn Target>> {
    match &config.target {
        TargetSpec::GaussianMixture5 => Ok(Box::new(gaussian_mixture_5())),
        TargetSpec::Sinusoid {
            s,
            sigma_w2,
            freqs,
            k,
            noise_seed,
            observations_csv,
        } => {
            let model = SinusoidModel::standard(*s, *sigma_w2)?;
            let obs = match observations_csv {
                Some(p) => omcmc::targets::read_observations_csv(Path::new(p))?,
                None => {
                    let mut rng = RngStream::new(*noise_seed, 0);
                    model.generate(freqs, *k, &mut rng)
                }
            };
            Ok(Box::new(SinusoidPosterior::new(model, obs)?))
        }
    }
}

fn init_bounds(config: &ExperimentConfig, dim: usize) -> (DVector<f64>, DVector<f64>) {
    match (&config.init, &config.target) {
        (Some(InitSpec::Uniform { lower, upper }), _) => (
            DVector::from_row_slice(lower),
            DVector::from_row_slice(upper),
        ),
        (None, TargetSpec::Sinusoid { .. }) => {
            (DVector::zeros(dim), DVector::from_element(dim, 0.5))
        }
        _ => (
            DVector::from_element(dim, -4.0),
            DVector::from_element(dim, 4.0),
        ),
    }
}

fn initial_points(config: &ExperimentConfig, dim: usize, seed: u64) -> Vec<DVector<f64>> {
    match &config.init {
        Some(InitSpec::Points { points }) => points
            .iter()
            .map(|p| DVector::from_row_slice(p))
            .collect(),
        _ => {
            let (lower, upper) = init_bounds(config, dim);
            // a dedicated stream so initialization never aliases chain streams
            let mut rng = RngStream::new(seed, u64::MAX - 1);
            uniform_init(config.n, &lower, &upper, &mut rng)
        }
    }
}

fn horizontal_cov(config: &ExperimentConfig, dim: usize) -> DMatrix<f64> {
    if let Some(rows) = &config.lambda0 {
        return DMatrix::from_fn(rows.len(), rows.len(), |i, j| rows[i][j]);
    }
    let lambda = config.lambda.unwrap_or(2.0);
    DMatrix::identity(dim, dim) * lambda * lambda
}

fn build_spec(
    config: &ExperimentConfig,
    dim: usize,
    sigma: f64,
    seed: u64,
    cooling: Option<CoolingSchedule>,
) -> anyhow::Result<OmcmcSpec> {
    let schedule = Schedule::new(config.t, config.t_v, config.t_h, config.n, config.l)?;
    let (lower, upper) = init_bounds(config, dim);
    Ok(OmcmcSpec {
        scheme: config.scheme.expect("validated"),
        schedule,
        vertical: RandomWalkProposal::isotropic_random_walk(dim, sigma)?,
        phi_mean: (&lower + &upper) / 2.0,
        lambda0: horizontal_cov(config, dim),
        adapt: config.adapt,
        t_train: config.t_train.unwrap_or(config.t_v),
        init: initial_points(config, dim, seed),
        cooling,
    })
}

fn cooling_schedule(config: &ExperimentConfig) -> CoolingSchedule {
    match &config.cooling {
        Some(CoolingSpec::Geometric { gamma0, rate }) => CoolingSchedule::Geometric {
            gamma0: *gamma0,
            rate: *rate,
        },
        Some(CoolingSpec::Logarithmic { c }) => CoolingSchedule::Logarithmic { c: *c },
        None => CoolingSchedule::default(),
    }
}

/// Ground-truth mean: explicit from the config, analytic for the mixture,
/// grid quadrature for bounded targets.
pub fn ground_truth(
    config: &ExperimentConfig,
    target: &dyn Target,
) -> anyhow::Result<DVector<f64>> {
    if let Some(t) = &config.truth {
        return Ok(DVector::from_row_slice(t));
    }
    match &config.target {
        TargetSpec::GaussianMixture5 => Ok(gaussian_mixture_5().mean()),
        TargetSpec::Sinusoid { s, .. } => {
            let lower = DVector::zeros(*s);
            let upper = DVector::from_element(*s, 0.5);
            Ok(grid_mean(target, &lower, &upper, config.grid_resolution)?)
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunSummary {
    pub run: usize,
    pub seed: u64,
    pub estimate: Vec<f64>,
    #[serde(default)]
    pub best_value: Option<f64>,
    pub counters: CostCounters,
}

fn run_once(
    config: &ExperimentConfig,
    target: &dyn Target,
    sigma: f64,
    run: usize,
    mode: Mode,
) -> anyhow::Result<(RunSummary, SampleStore)> {
    let seed = config.seed.wrapping_add(run as u64);
    let dim = target.dim();
    let (summary, store) = match (mode, config.method) {
        (Mode::Optimize, _) => {
            let spec = build_spec(config, dim, sigma, seed, Some(cooling_schedule(config)))?;
            let (best_x, best_lp, store, counters) = run_sa_optimize(target, &spec, seed)?;
            (
                RunSummary {
                    run,
                    seed,
                    estimate: best_x.as_slice().to_vec(),
                    best_value: Some(best_lp),
                    counters,
                },
                store,
            )
        }
        (_, Method::Omcmc) => {
            let spec = build_spec(config, dim, sigma, seed, None)?;
            let (store, counters) = run_omcmc(target, &spec, seed)?;
            (
                RunSummary {
                    run,
                    seed,
                    estimate: estimate_mean(&store)?.as_slice().to_vec(),
                    best_value: None,
                    counters,
                },
                store,
            )
        }
        (_, Method::Ipc) => {
            let q = RandomWalkProposal::isotropic_random_walk(dim, sigma)?;
            let init = initial_points(config, dim, seed);
            let (store, counters) = run_ipc(target, &q, &init, config.t, seed)?;
            (
                RunSummary {
                    run,
                    seed,
                    estimate: estimate_mean(&store)?.as_slice().to_vec(),
                    best_value: None,
                    counters,
                },
                store,
            )
        }
        (_, Method::Pmc) => {
            let cov = DMatrix::identity(dim, dim) * sigma * sigma;
            let init = initial_points(config, dim, seed);
            let (store, counters) = run_pmc(target, &cov, &init, config.t, seed)?;
            (
                RunSummary {
                    run,
                    seed,
                    estimate: estimate_mean(&store)?.as_slice().to_vec(),
                    best_value: None,
                    counters,
                },
                store,
            )
        }
    };
    Ok((summary, store))
}

/// All runs of one experiment, in parallel with derived seeds. Returns the
/// per-run summaries in run order plus the first run's sample store.
pub fn run_experiment_runs(
    config: &ExperimentConfig,
    target: &dyn Target,
    sigma: f64,
    mode: Mode,
) -> anyhow::Result<(Vec<RunSummary>, SampleStore)> {
    let results: Vec<anyhow::Result<(RunSummary, Option<SampleStore>)>> = (0..config.runs)
        .into_par_iter()
        .map(|run| {
            let (summary, store) = run_once(config, target, sigma, run, mode)?;
            Ok((summary, (run == 0).then_some(store)))
        })
        .collect();
    let mut summaries = Vec::with_capacity(config.runs);
    let mut first_store = None;
    for r in results {
        let (s, store) = r?;
        if let Some(st) = store {
            first_store = Some(st);
        }
        summaries.push(s);
    }
    summaries.sort_by_key(|s| s.run);
    Ok((summaries, first_store.expect("at least one run")))
}

fn expected_counters(config: &ExperimentConfig) -> anyhow::Result<CostCounters> {
    match config.method {
        Method::Omcmc => {
            let s = Schedule::new(config.t, config.t_v, config.t_h, config.n, config.l)?;
            Ok(cost_closed_forms(&s, config.scheme.expect("validated")))
        }
        Method::Ipc => Ok(CostCounters {
            target_evals: (config.n * config.t) as u64,
            multinomial_steps: 0,
            acceptance_tests: (config.n * config.t) as u64,
            samples_generated: (config.n * config.t) as u64,
        }),
        Method::Pmc => Ok(CostCounters {
            target_evals: (config.n * config.t) as u64,
            multinomial_steps: (config.n * config.t) as u64,
            acceptance_tests: 0,
            samples_generated: (config.n * config.t) as u64,
        }),
    }
}

fn write_estimates_csv(
    path: &Path,
    summaries: &[RunSummary],
    truth: Option<&DVector<f64>>,
) -> anyhow::Result<()> {
    let mut f = fs::File::create(path)?;
    let d = summaries.first().map_or(0, |s| s.estimate.len());
    let mut header: Vec<String> = vec!["run".into(), "seed".into()];
    header.extend((1..=d).map(|i| format!("x_{i}")));
    if truth.is_some() {
        header.push("re".into());
    }
    if summaries.iter().any(|s| s.best_value.is_some()) {
        header.push("best_log_density".into());
    }
    writeln!(f, "{}", header.join(","))?;
    for s in summaries {
        let mut row = vec![s.run.to_string(), s.seed.to_string()];
        row.extend(s.estimate.iter().map(|v| format!("{v:.17}")));
        if let Some(t) = truth {
            let e = DVector::from_row_slice(&s.estimate);
            row.push(format!("{:.17}", relative_error(&e, t)));
        }
        if let Some(bv) = s.best_value {
            row.push(format!("{bv:.17}"));
        }
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// Re-parse an estimates file back into (run, seed, estimate) triples.
pub fn read_estimates_csv(path: &Path) -> anyhow::Result<Vec<(usize, u64, Vec<f64>)>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().context("empty estimates file")?;
    let d = header.split(',').filter(|c| c.starts_with("x_")).count();
    let mut out = Vec::new();
    for line in lines {
        let cols: Vec<&str> = line.split(',').collect();
        out.push((
            cols[0].parse()?,
            cols[1].parse()?,
            cols[2..2 + d]
                .iter()
                .map(|c| c.parse::<f64>())
                .collect::<std::result::Result<Vec<f64>, _>>()?,
        ));
    }
    Ok(out)
}

fn write_samples_csv(path: &Path, store: &SampleStore) -> anyhow::Result<()> {
    let mut f = std::io::BufWriter::new(fs::File::create(path)?);
    let mut header = vec!["t".to_string(), "chain".to_string()];
    header.extend((1..=store.dim).map(|i| format!("x_{i}")));
    header.push("phase".into());
    writeln!(f, "{}", header.join(","))?;
    for r in &store.records {
        let mut row = vec![r.t.to_string(), r.chain.to_string()];
        row.extend(r.x.iter().map(|v| format!("{v:.17}")));
        row.push(
            match r.phase {
                omcmc::Phase::V => "V",
                omcmc::Phase::H => "H",
            }
            .into(),
        );
        writeln!(f, "{}", row.join(","))?;
    }
    Ok(())
}

/// One point of a plot series: the raw per-run values at a given x.
#[derive(Debug, Clone)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub values: Vec<f64>,
}

/// Long-format plot CSV: series, x, y (mean over runs), stderr.
pub fn emit_plot_data(path: &Path, points: &[PlotPoint]) -> anyhow::Result<()> {
    let mut f = fs::File::create(path)?;
    writeln!(f, "series,x,y,stderr")?;
    for p in points {
        let n = p.values.len() as f64;
        let mean = p.values.iter().sum::<f64>() / n;
        let stderr = if p.values.len() < 2 {
            0.0
        } else {
            let var = p.values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
            (var / n).sqrt()
        };
        writeln!(f, "{},{},{:.17},{:.17}", p.series, p.x, mean, stderr)?;
    }
    Ok(())
}

fn aggregate_json(
    config: &ExperimentConfig,
    mode: Mode,
    summaries: &[RunSummary],
    truth: Option<&DVector<f64>>,
) -> anyhow::Result<serde_json::Value> {
    let estimates: Vec<DVector<f64>> = summaries
        .iter()
        .map(|s| DVector::from_row_slice(&s.estimate))
        .collect();
    let d = estimates[0].len();
    let mean_est = estimates.iter().sum::<DVector<f64>>() / estimates.len() as f64;
    let expected = expected_counters(config)?;
    let counters = summaries[0].counters;
    let mut out = json!({
        "method": config.method,
        "scheme": config.scheme,
        "mode": mode,
        "runs": config.runs,
        "seed": config.seed,
        "mean_estimate": mean_est.as_slice(),
        "counters": counters,
        "counters_closed_form": expected,
        "counters_match": counters == expected,
    });
    if let Some(t) = truth {
        let res: Vec<f64> = estimates.iter().map(|e| relative_error(e, t)).collect();
        let re_mean = res.iter().sum::<f64>() / res.len() as f64;
        out["truth"] = json!(t.as_slice());
        out["mse"] = json!(mse(&estimates, t));
        out["re_mean"] = json!(re_mean);
    }
    if mode == Mode::Optimize {
        let best: Vec<f64> = summaries.iter().filter_map(|s| s.best_value).collect();
        out["best_value_mean"] = json!(best.iter().sum::<f64>() / best.len() as f64);
        if matches!(config.target, TargetSpec::GaussianMixture5) {
            let modes = gaussian_mixture_5();
            let hits = estimates
                .iter()
                .filter(|e| {
                    modes
                        .component_means()
                        .iter()
                        .any(|m| (*e - m).norm() < 0.5)
                })
                .count();
            out["mode_hit_rate"] = json!(hits as f64 / estimates.len() as f64);
        }
    }
    let _ = d;
    Ok(out)
}

/// Execute a whole experiment and write the result files into `out_dir`.
/// Returns the path of the aggregate file.
pub fn run_experiment(
    config: &ExperimentConfig,
    mode: Mode,
    out_dir: &Path,
    dump_samples: bool,
) -> anyhow::Result<PathBuf> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let target = build_target(config)?;
    let truth = match mode {
        Mode::Optimize => None,
        _ => Some(ground_truth(config, target.as_ref())?),
    };

    if mode == Mode::Benchmark {
        return run_benchmark(config, target.as_ref(), truth.as_ref().unwrap(), out_dir);
    }

    let (summaries, first_store) = run_experiment_runs(config, target.as_ref(), config.sigma, mode)?;
    write_estimates_csv(&out_dir.join("estimates.csv"), &summaries, truth.as_ref())?;
    if dump_samples {
        write_samples_csv(&out_dir.join("samples.csv"), &first_store)?;
    }
    let agg = aggregate_json(config, mode, &summaries, truth.as_ref())?;
    let path = out_dir.join("aggregate.json");
    fs::write(&path, serde_json::to_string_pretty(&agg)?)?;
    Ok(path)
}

/// Benchmark mode: the configured scheme against the IPC baseline at matched
/// target-evaluation budget, optionally over a sigma grid, with plot data.
fn run_benchmark(
    config: &ExperimentConfig,
    target: &dyn Target,
    truth: &DVector<f64>,
    out_dir: &Path,
) -> anyhow::Result<PathBuf> {
    if config.method != Method::Omcmc {
        bail!("benchmark mode compares an omcmc scheme against IPC; set method = omcmc");
    }
    let schedule = Schedule::new(config.t, config.t_v, config.t_h, config.n, config.l)?;
    let e_t = cost_closed_forms(&schedule, config.scheme.expect("validated")).target_evals;
    let ipc_t = (e_t as usize) / config.n;
    let mut ipc_config = config.clone();
    ipc_config.method = Method::Ipc;
    ipc_config.t = ipc_t;

    let grid = config
        .sigma_grid
        .clone()
        .unwrap_or_else(|| vec![config.sigma]);
    let mut points = Vec::new();
    let mut comparisons = Vec::new();
    for &sigma in &grid {
        let (omcmc_runs, _) = run_experiment_runs(config, target, sigma, Mode::Sample)?;
        let (ipc_runs, _) = run_experiment_runs(&ipc_config, target, sigma, Mode::Sample)?;
        let res = |s: &[RunSummary]| -> Vec<f64> {
            s.iter()
                .map(|r| relative_error(&DVector::from_row_slice(&r.estimate), truth))
                .collect()
        };
        let ests = |s: &[RunSummary]| -> Vec<DVector<f64>> {
            s.iter()
                .map(|r| DVector::from_row_slice(&r.estimate))
                .collect()
        };
        let scheme_name = format!("{:?}", config.scheme.expect("validated")).to_lowercase();
        points.push(PlotPoint {
            series: scheme_name.clone(),
            x: sigma,
            values: res(&omcmc_runs),
        });
        points.push(PlotPoint {
            series: "ipc".into(),
            x: sigma,
            values: res(&ipc_runs),
        });
        comparisons.push(json!({
            "sigma": sigma,
            "scheme_mse": mse(&ests(&omcmc_runs), truth),
            "ipc_mse": mse(&ests(&ipc_runs), truth),
            "scheme_re_mean": points[points.len() - 2].values.iter().sum::<f64>()
                / omcmc_runs.len() as f64,
            "ipc_re_mean": points[points.len() - 1].values.iter().sum::<f64>()
                / ipc_runs.len() as f64,
        }));
    }
    emit_plot_data(&out_dir.join("plot.csv"), &points)?;
    let agg = json!({
        "mode": Mode::Benchmark,
        "scheme": config.scheme,
        "runs": config.runs,
        "seed": config.seed,
        "matched_target_evals": e_t,
        "ipc_t": ipc_t,
        "truth": truth.as_slice(),
        "comparisons": comparisons,
    });
    let path = out_dir.join("aggregate.json");
    fs::write(&path, serde_json::to_string_pretty(&agg)?)?;
    Ok(path)
}
