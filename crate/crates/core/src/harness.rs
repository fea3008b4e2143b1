//! Synthetic data, experiment orchestration and on-disk artifacts.
//!
//! An experiment is a data spec, a list of method configs and a replication
//! count. Every (method, replication) cell trains independently in the
//! worker pool and writes its own trace CSV and model file; the summary is
//! written last, atomically.

use std::fmt;
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::algorithms::{
    default_lambda_grid, fibonacci_weights, kernel_ridge_oracle, run_geometry, train, OracleFit, TraceRecord,
    TrainConfig, Variant,
};
use crate::diagnostics::{assemble_report, bound_report, BoundConstants, BoundInputs, BoundReport};
use crate::error::{invalid, Error, Result};
use crate::learners::{BaseLearnerConfig, LearnerFamily};
use crate::par;
use crate::rkhs::{Dataset, KernelSpec, Points, RkhsFunction};
use crate::spectral::{spectral_radius, StepSpec};

// =============================================================================
// Data
// =============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "String", into = "String")]
pub enum Target {
    /// `sin(2π x₁)`.
    Sinusoid,
    /// `1` if `x₁ > 0.5`, else `0`.
    Step,
    /// `Σ_j sin(π x_j) / d`.
    AdditiveSmooth,
    /// `10 sin(π x₁x₂) + 20(x₃ − 0.5)² + 10x₄ + 5x₅`; needs `d ≥ 5`.
    FriedmanLike,
}

impl Target {
    pub fn name(self) -> &'static str {
        match self {
            Target::Sinusoid => "sinusoid",
            Target::Step => "step",
            Target::AdditiveSmooth => "additive-smooth",
            Target::FriedmanLike => "friedman-like",
        }
    }

    pub fn min_dim(self) -> usize {
        match self {
            Target::FriedmanLike => 5,
            _ => 1,
        }
    }

    pub fn eval(self, x: &[f64]) -> f64 {
        use std::f64::consts::PI;
        match self {
            Target::Sinusoid => (2.0 * PI * x[0]).sin(),
            Target::Step => {
                if x[0] > 0.5 {
                    1.0
                } else {
                    0.0
                }
            }
            Target::AdditiveSmooth => x.iter().map(|v| (PI * v).sin()).sum::<f64>() / x.len() as f64,
            Target::FriedmanLike => {
                10.0 * (PI * x[0] * x[1]).sin() + 20.0 * (x[2] - 0.5).powi(2) + 10.0 * x[3] + 5.0 * x[4]
            }
        }
    }
}

impl FromStr for Target {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sinusoid" => Ok(Target::Sinusoid),
            "step" => Ok(Target::Step),
            "additive-smooth" => Ok(Target::AdditiveSmooth),
            "friedman-like" => Ok(Target::FriedmanLike),
            other => Err(Error::UnknownTarget(other.to_string())),
        }
    }
}

impl TryFrom<String> for Target {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

impl From<Target> for String {
    fn from(t: Target) -> String {
        t.name().to_string()
    }
}

impl fmt::Display for Target {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

fn default_train_fraction() -> f64 {
    0.7
}

/// `n` samples, uniform on `[0, 1]^d`, `y = f*(x) + N(0, σ²)`; the first
/// `train_fraction` of them train, the rest test.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSpec {
    pub target: Target,
    pub n: usize,
    pub d: usize,
    pub noise: f64,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
}

impl DataSpec {
    /// 1-d sinusoid, `n = 300`, `σ = 0.1`.
    pub fn reference_sinusoid(seed: u64) -> Self {
        Self { target: Target::Sinusoid, n: 300, d: 1, noise: 0.1, seed, train_fraction: 0.7 }
    }

    /// 5-d friedman-like, `n = 500`, `σ = 1`.
    pub fn reference_friedman(seed: u64) -> Self {
        Self { target: Target::FriedmanLike, n: 500, d: 5, noise: 1.0, seed, train_fraction: 0.7 }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let spec: Self = toml::from_str(text)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn n_train(&self) -> usize {
        (self.n as f64 * self.train_fraction).floor() as usize
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.noise >= 0.0 && self.noise.is_finite()) {
            return Err(invalid(format!("noise must be ≥ 0, got {}", self.noise)));
        }
        if self.d < self.target.min_dim() {
            return Err(invalid(format!("{} needs d ≥ {}", self.target, self.target.min_dim())));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(invalid("train_fraction must lie in (0, 1)"));
        }
        let n_train = self.n_train();
        if n_train == 0 || n_train == self.n {
            return Err(invalid(format!("n = {} leaves an empty train or test split", self.n)));
        }
        Ok(())
    }
}

/// All `n` samples, unsplit.
pub fn generate_samples(spec: &DataSpec) -> Result<Dataset> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, spec.noise).map_err(|e| invalid(e.to_string()))?;
    let mut x = Vec::with_capacity(spec.n * spec.d);
    let mut y = Vec::with_capacity(spec.n);
    for _ in 0..spec.n {
        let start = x.len();
        x.extend((0..spec.d).map(|_| rng.random::<f64>()));
        let eps = noise.sample(&mut rng);
        y.push(spec.target.eval(&x[start..]) + eps);
    }
    Dataset::new(Points::new(x, spec.d)?, y)
}

/// `(train, test)`.
pub fn generate_data(spec: &DataSpec) -> Result<(Dataset, Dataset)> {
    let all = generate_samples(spec)?;
    let n_train = spec.n_train();
    let train_idx: Vec<usize> = (0..n_train).collect();
    let test_idx: Vec<usize> = (n_train..spec.n).collect();
    Ok((all.subset(&train_idx)?, all.subset(&test_idx)?))
}

/// `x1,…,xd,y` with full-precision floats.
pub fn write_dataset_csv<W: Write>(data: &Dataset, out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    let mut header: Vec<String> = (1..=data.dim()).map(|j| format!("x{j}")).collect();
    header.push("y".into());
    w.write_record(&header)?;
    for (i, y) in data.targets().iter().enumerate() {
        let mut rec: Vec<String> = data.inputs().row(i).iter().map(|v| format!("{v:.16e}")).collect();
        rec.push(format!("{y:.16e}"));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

// =============================================================================
// Trace and model files
// =============================================================================

pub const TRACE_HEADER: [&str; 9] = [
    "t",
    "eta",
    "train_risk",
    "test_risk",
    "F_norm",
    "h_norm",
    "weak_ratio",
    "descent_slack",
    "increment_norm",
];

pub fn write_trace<W: Write>(trace: &[TraceRecord], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER)?;
    for r in trace {
        let floats = [
            r.eta,
            r.train_risk,
            r.test_risk,
            r.f_norm,
            r.h_norm,
            r.weak_ratio,
            r.descent_slack,
            r.increment_norm,
        ];
        let mut rec = vec![r.t.to_string()];
        rec.extend(floats.iter().map(|v| format!("{v:.16e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Reads the nine trace columns; the remaining record fields stay default.
pub fn read_trace<R: Read>(input: R) -> Result<Vec<TraceRecord>> {
    let mut r = csv::Reader::from_reader(input);
    let header: Vec<String> = r.headers()?.iter().map(str::to_string).collect();
    if header != TRACE_HEADER {
        return Err(invalid(format!("unexpected trace header {header:?}")));
    }
    let mut out = Vec::new();
    for (line, rec) in r.records().enumerate() {
        let rec = rec?;
        let num = |i: usize| -> Result<f64> {
            rec[i]
                .trim()
                .parse::<f64>()
                .map_err(|_| invalid(format!("trace row {}: bad {} value {:?}", line + 1, TRACE_HEADER[i], &rec[i])))
        };
        out.push(TraceRecord {
            t: rec[0]
                .trim()
                .parse()
                .map_err(|_| invalid(format!("trace row {}: bad t {:?}", line + 1, &rec[0])))?,
            eta: num(1)?,
            train_risk: num(2)?,
            test_risk: num(3)?,
            f_norm: num(4)?,
            h_norm: num(5)?,
            weak_ratio: num(6)?,
            descent_slack: num(7)?,
            increment_norm: num(8)?,
            ..TraceRecord::default()
        });
    }
    Ok(out)
}

/// Writes to a sibling temporary file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir)?;
    let name = path.file_name().ok_or_else(|| invalid(format!("no file name in {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp", name.to_string_lossy()));
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

pub fn save_model(path: &Path, f: &RkhsFunction) -> Result<()> {
    write_atomic(path, f.to_json()?.as_bytes())
}

pub fn load_model(path: &Path) -> Result<RkhsFunction> {
    RkhsFunction::from_json(&fs::read_to_string(path)?)
}

// =============================================================================
// Experiments
// =============================================================================

fn default_replications() -> usize {
    1
}

fn default_delta() -> f64 {
    0.05
}

fn default_threshold_factor() -> f64 {
    1.2
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub data: DataSpec,
    pub methods: Vec<TrainConfig>,
    #[serde(default = "default_replications")]
    pub replications: usize,
    #[serde(default)]
    pub out_dir: Option<PathBuf>,
    /// Confidence level of the combined bound.
    #[serde(default = "default_delta")]
    pub delta: f64,
    /// Iterations-to-threshold uses `factor × oracle test RMSE`.
    #[serde(default = "default_threshold_factor")]
    pub threshold_factor: f64,
    /// Kernel of the kernel-ridge oracle; defaults to the first method's
    /// kernel (gaussian at the feature bandwidth for random features).
    #[serde(default)]
    pub oracle_kernel: Option<KernelSpec>,
    #[serde(default)]
    pub oracle_grid: Option<Vec<f64>>,
}

impl ExperimentConfig {
    pub fn new(data: DataSpec, methods: Vec<TrainConfig>) -> Self {
        Self {
            name: None,
            data,
            methods,
            replications: 1,
            out_dir: None,
            delta: default_delta(),
            threshold_factor: default_threshold_factor(),
            oracle_kernel: None,
            oracle_grid: None,
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| invalid(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.data.validate()?;
        if self.replications == 0 {
            return Err(invalid("replications must be at least 1"));
        }
        if self.methods.is_empty() {
            return Err(invalid("no methods configured"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid("delta must lie in (0, 1)"));
        }
        if !(self.threshold_factor > 0.0) {
            return Err(invalid("threshold_factor must be positive"));
        }
        let mut labels: Vec<String> = self.methods.iter().map(TrainConfig::label).collect();
        labels.sort();
        if let Some(w) = labels.windows(2).find(|w| w[0] == w[1]) {
            return Err(invalid(format!("duplicate method label {:?}; set distinct names", w[0])));
        }
        for m in &self.methods {
            m.validate()?;
        }
        self.oracle_kernel().validate()
    }

    /// Overrides the data seed and every method seed.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.data.seed = seed;
        for m in &mut self.methods {
            m.seed = seed;
            if let LearnerFamily::RffRidge { seed: s, .. } = &mut m.base.family {
                *s = seed;
            }
        }
        self
    }

    pub fn oracle_kernel(&self) -> KernelSpec {
        self.oracle_kernel.unwrap_or_else(|| match self.methods.first().map(|m| &m.base.family) {
            Some(LearnerFamily::KernelRidge { kernel, .. }) => *kernel,
            Some(LearnerFamily::RffRidge { bandwidth, .. }) => KernelSpec::gaussian(*bandwidth),
            None => KernelSpec::gaussian(1.0),
        })
    }

    /// Data spec of replication `r` (seed shifted by `r`).
    pub fn data_for(&self, replication: usize) -> DataSpec {
        DataSpec { seed: self.data.seed.wrapping_add(replication as u64), ..self.data.clone() }
    }
}

/// Method config of replication `r`: run seed and feature seed shifted by `r`.
pub fn replicate(config: &TrainConfig, replication: usize) -> TrainConfig {
    let mut c = config.clone();
    let r = replication as u64;
    c.seed = c.seed.wrapping_add(r);
    if let LearnerFamily::RffRidge { seed, .. } = &mut c.base.family {
        *seed = seed.wrapping_add(r);
    }
    c
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "status", rename_all = "kebab-case")]
pub enum CellOutcome {
    Ok {
        final_train_rmse: f64,
        final_test_rmse: f64,
        iterations_to_threshold: Option<usize>,
        bound: BoundReport,
        trace_path: PathBuf,
        model_path: PathBuf,
    },
    Failed {
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub method: String,
    pub replication: usize,
    pub iterations: usize,
    pub threshold: f64,
    #[serde(flatten)]
    pub outcome: CellOutcome,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicationSummary {
    pub replication: usize,
    pub data_seed: u64,
    pub oracle: Option<OracleFit>,
    pub threshold: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub name: Option<String>,
    pub data: DataSpec,
    pub replications: Vec<ReplicationSummary>,
    pub cells: Vec<CellSummary>,
}

impl RunSummary {
    pub fn all_ok(&self) -> bool {
        self.cells.iter().all(|c| matches!(c.outcome, CellOutcome::Ok { .. }))
    }

    pub fn failures(&self) -> impl Iterator<Item = (&CellSummary, &str)> {
        self.cells.iter().filter_map(|c| match &c.outcome {
            CellOutcome::Failed { message } => Some((c, message.as_str())),
            CellOutcome::Ok { .. } => None,
        })
    }
}

pub const SUMMARY_FILE: &str = "summary.json";

/// Cell-private artifact directory.
pub fn cell_dir(out_dir: &Path, method: &str, replication: usize) -> PathBuf {
    out_dir.join(method).join(format!("rep-{replication}"))
}

/// Runs every method × replication cell, writes artifacts under `out_dir`
/// and returns the summary (also written to `out_dir/summary.json`). Cell
/// failures are recorded, not propagated.
pub fn run_experiment(config: &ExperimentConfig, out_dir: &Path) -> Result<RunSummary> {
    config.validate()?;
    fs::create_dir_all(out_dir)?;
    let reps = config.replications;
    let grid = config.oracle_grid.clone().unwrap_or_else(default_lambda_grid);
    let oracle_kernel = config.oracle_kernel();

    let prepared = par::map_range(reps, |r| -> Result<_> {
        let spec = config.data_for(r);
        let (train_set, test_set) = generate_data(&spec)?;
        let oracle = kernel_ridge_oracle(oracle_kernel, &train_set, &test_set, &grid).ok();
        Ok((spec, train_set, test_set, oracle))
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()?;

    let replications: Vec<ReplicationSummary> = prepared
        .iter()
        .enumerate()
        .map(|(r, (spec, _, _, oracle))| ReplicationSummary {
            replication: r,
            data_seed: spec.seed,
            threshold: oracle.as_ref().map_or(f64::NAN, |o| config.threshold_factor * o.test_rmse),
            oracle: oracle.clone(),
        })
        .collect();

    let n_methods = config.methods.len();
    let cells = par::map_range(n_methods * reps, |cell| {
        let (m, r) = (cell / reps, cell % reps);
        let method = &config.methods[m];
        let label = method.label();
        let (_, train_set, test_set, _) = &prepared[r];
        let threshold = replications[r].threshold;
        let outcome = run_cell(&replicate(method, r), train_set, test_set, threshold, config.delta, &cell_dir(out_dir, &label, r))
            .unwrap_or_else(|e| CellOutcome::Failed { message: e.to_string() });
        CellSummary { method: label, replication: r, iterations: method.iterations, threshold, outcome }
    });

    let summary = RunSummary { name: config.name.clone(), data: config.data.clone(), replications, cells };
    write_atomic(&out_dir.join(SUMMARY_FILE), serde_json::to_string_pretty(&summary)?.as_bytes())?;
    Ok(summary)
}

fn run_cell(
    config: &TrainConfig,
    train_set: &Dataset,
    test_set: &Dataset,
    threshold: f64,
    delta: f64,
    dir: &Path,
) -> Result<CellOutcome> {
    let run = train(config, train_set, Some(test_set))?;
    let bound = bound_report(&run, train_set, test_set, delta, BoundConstants::default())?;
    fs::create_dir_all(dir)?;
    let trace_path = dir.join("trace.csv");
    let model_path = dir.join("model.json");
    let mut bytes = Vec::new();
    write_trace(&run.trace, &mut bytes)?;
    write_atomic(&trace_path, &bytes)?;
    save_model(&model_path, &run.predictor)?;
    let last = run.trace.last().ok_or_else(|| invalid("empty trace"))?;
    Ok(CellOutcome::Ok {
        final_train_rmse: last.train_rmse,
        final_test_rmse: last.test_rmse,
        iterations_to_threshold: run.iterations_to(threshold),
        bound,
        trace_path,
        model_path,
    })
}

// =============================================================================
// Reference configurations
// =============================================================================

/// Kernel-ridge base learner used on a reference task.
pub fn reference_base(data: &DataSpec) -> BaseLearnerConfig {
    let bandwidth = if data.d == 1 { 0.2 } else { 0.5 };
    BaseLearnerConfig::kernel_ridge(KernelSpec::gaussian(bandwidth), 1e-3)
}

/// The five compared methods with a shared learner budget of `iterations`.
pub fn reference_methods(data: &DataSpec, iterations: usize) -> Vec<TrainConfig> {
    let base = reference_base(data);
    let bandwidth = match base.family {
        LearnerFamily::KernelRidge { kernel: KernelSpec::Gaussian { bandwidth }, .. } => bandwidth,
        _ => 0.2,
    };
    let golden = StepSpec::Golden { eta0: 0.5 };
    vec![
        TrainConfig::new(Variant::Fibonacci, base.clone(), golden.clone(), iterations),
        TrainConfig::new(Variant::FirstOrder, base.clone(), StepSpec::Constant { eta0: 0.1 }, iterations),
        TrainConfig::new(Variant::Orthogonalized, base.clone(), golden.clone(), iterations),
        TrainConfig::new(
            Variant::RaoBlackwell { draws: 16, exact: false },
            BaseLearnerConfig::rff_ridge(100, bandwidth, 1e-3, 7),
            golden,
            iterations,
        ),
        TrainConfig::new(
            Variant::StaticWeights { weights: fibonacci_weights(iterations) },
            base,
            StepSpec::Constant { eta0: 1.0 },
            iterations,
        ),
    ]
}

pub fn reference_experiment(data: DataSpec, iterations: usize, replications: usize) -> ExperimentConfig {
    let methods = reference_methods(&data, iterations);
    ExperimentConfig { replications, ..ExperimentConfig::new(data, methods) }
}

// =============================================================================
// Bounds from a stored trace
// =============================================================================

/// Rebuilds a bound report from a trace file and the config that produced
/// it. Predictions are not stored, so `max |F(x)|` is bounded by
/// `κ · max_t ‖F_t‖_H` and `M` by the loss at `max|y| + κ max‖F‖`.
pub fn bounds_from_trace(
    trace: &[TraceRecord],
    config: &TrainConfig,
    data: &DataSpec,
    delta: f64,
    constants: BoundConstants,
) -> Result<BoundReport> {
    let last = trace.last().ok_or_else(|| invalid("empty trace"))?;
    let t = trace.len();
    if t > config.iterations {
        return Err(invalid(format!("trace has {t} rows, config only {} iterations", config.iterations)));
    }
    let geometry = run_geometry(config)?;
    let all = generate_samples(data)?;
    let max_y = all.targets().iter().fold(0.0_f64, |m, y| m.max(y.abs()));
    let kappa = config.base.kappa(data.d);
    let max_norm = trace.iter().map(|r| r.f_norm).fold(0.0, f64::max);
    let max_pred = kappa * max_norm;
    let inputs = BoundInputs {
        lipschitz: config.loss.lipschitz(max_y, max_pred),
        loss_bound: config.loss.value(max_y + max_pred, 0.0),
        kappa,
        norm_cap: config.base.norm_cap,
        ridge: config.base.ridge(),
        n: data.n_train(),
        delta,
        c_alpha: geometry.alpha.bound.c_alpha(t),
        rho: spectral_radius(&geometry.companion),
    };
    assemble_report(inputs, constants, &geometry.steps[..t], &geometry.companion, last.train_risk, last.test_risk)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn noiseless_sinusoid_is_exact() {
        let spec = DataSpec { noise: 0.0, n: 50, ..DataSpec::reference_sinusoid(3) };
        let d = generate_samples(&spec).unwrap();
        for i in 0..d.len() {
            let x = d.inputs().row(i)[0];
            assert_eq!(d.targets()[i], (2.0 * std::f64::consts::PI * x).sin());
        }
    }

    #[test]
    fn split_sizes_and_determinism() {
        let spec = DataSpec::reference_sinusoid(5);
        let (a, b) = generate_data(&spec).unwrap();
        assert_eq!((a.len(), b.len()), (210, 90));
        let (a2, _) = generate_data(&spec).unwrap();
        assert_eq!(a.targets(), a2.targets());
        assert_eq!(a.inputs().as_slice(), a2.inputs().as_slice());
    }

    #[test]
    fn unknown_target_is_reported() {
        assert!(matches!("cosine".parse::<Target>(), Err(Error::UnknownTarget(_))));
        let text = "target = \"cosine\"\nn = 10\nd = 1\nnoise = 0.1\n";
        assert!(toml::from_str::<DataSpec>(text).is_err());
    }

    #[test]
    fn friedman_needs_five_dimensions() {
        let spec = DataSpec { d: 3, ..DataSpec::reference_friedman(0) };
        assert!(spec.validate().is_err());
    }

    #[test]
    fn trace_round_trips_exactly() {
        let trace = vec![
            TraceRecord { t: 1, eta: 0.1, train_risk: 1.0 / 3.0, test_risk: f64::NAN, f_norm: 2.0, descent_slack: f64::NEG_INFINITY, ..Default::default() },
            TraceRecord { t: 2, eta: 1e-300, train_risk: std::f64::consts::PI, ..Default::default() },
        ];
        let mut buf = Vec::new();
        write_trace(&trace, &mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("t,eta,train_risk,test_risk,F_norm,h_norm,weak_ratio,descent_slack,increment_norm\n"));
        let back = read_trace(&buf[..]).unwrap();
        assert_eq!(back[0].train_risk.to_bits(), trace[0].train_risk.to_bits());
        assert!(back[0].test_risk.is_nan());
        assert_eq!(back[0].descent_slack, f64::NEG_INFINITY);
        assert_eq!(back[1].eta, 1e-300);
    }

    #[test]
    fn experiment_config_rejects_unknown_keys() {
        let text = "replications = 1\nbogus = 3\n[data]\ntarget = \"sinusoid\"\nn = 20\nd = 1\nnoise = 0.1\n";
        assert!(matches!(ExperimentConfig::from_toml(text), Err(Error::Config(_))));
    }

    #[test]
    fn reference_experiment_serializes_to_toml_and_back() {
        let cfg = reference_experiment(DataSpec::reference_sinusoid(0), 10, 2);
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }
}
