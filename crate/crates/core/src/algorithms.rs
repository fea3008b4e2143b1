//! Training drivers.
//!
//! Every recursive variant runs the same loop: predict at the training
//! inputs, form pseudo-residuals (raw targets for `h_0`), fit a base learner,
//! optionally orthogonalize or average it, and apply the recursion step. The
//! first-order baseline has its own two-term update, and the static baseline
//! fits independent learners on bootstrap resamples.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{descent_check, DescentInputs};
use crate::error::{invalid, Error, Result};
use crate::learners::{
    pseudo_residuals, rmse, weak_learning_check, BaseLearner, BaseLearnerConfig, LearnerFamily,
    LossSpec, TrainingSpace,
};
use crate::par;
use crate::recursion::{alpha_matrix, step, AlphaBound, AlphaMatrix, EnsembleState, RecursionSchedule, SpanBasis};
use crate::rkhs::{self, combine, Dataset, FeatureMap, FeatureMapSpec, InnerProduct, KernelSpec, Points, RkhsFunction};
use crate::spectral::{make_schedule, CompanionMatrix, StepSchedule, StepSpec};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Variant {
    /// Second-order recursion with the configured `(β, γ)`, `(1, 1)` by default.
    Fibonacci,
    /// `F_{t+1} = F_t + η_t h_t`.
    FirstOrder,
    /// Learners are projected off the span of the previous iterates.
    Orthogonalized,
    /// Each learner is the average of `draws` random-feature fits. With
    /// `exact = true` (or a kernel-ridge base) the average is replaced by the
    /// gaussian kernel-ridge fit it approximates.
    RaoBlackwell {
        draws: usize,
        #[serde(default)]
        exact: bool,
    },
    /// `m`-th order recursion; coefficients default to all ones.
    HigherOrder { order: usize },
    /// Independent bootstrap fits combined with fixed normalized weights.
    StaticWeights { weights: Vec<f64> },
}

fn default_loss() -> LossSpec {
    LossSpec::Squared
}

fn default_weak_c() -> f64 {
    0.1
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrainConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub variant: Variant,
    #[serde(default = "default_loss")]
    pub loss: LossSpec,
    pub base: BaseLearnerConfig,
    /// Recursion coefficients `θ_0 … θ_{m−1}`; ignored by the first-order and
    /// static variants.
    #[serde(default)]
    pub coefficients: Option<Vec<f64>>,
    pub steps: StepSpec,
    pub iterations: usize,
    #[serde(default)]
    pub seed: u64,
    /// Margin `c` of the weak-learning diagnostic.
    #[serde(default = "default_weak_c")]
    pub weak_c: f64,
    /// `λ` of `J = R̂_n + λ‖F‖²` in the descent diagnostic; defaults to the
    /// base ridge.
    #[serde(default)]
    pub descent_lambda: Option<f64>,
}

impl TrainConfig {
    pub fn new(variant: Variant, base: BaseLearnerConfig, steps: StepSpec, iterations: usize) -> Self {
        Self {
            name: None,
            variant,
            loss: LossSpec::Squared,
            base,
            coefficients: None,
            steps,
            iterations,
            seed: 0,
            weak_c: default_weak_c(),
            descent_lambda: None,
        }
    }

    pub fn with_coefficients(mut self, theta: Vec<f64>) -> Self {
        self.coefficients = Some(theta);
        self
    }

    pub fn label(&self) -> String {
        self.name.clone().unwrap_or_else(|| match &self.variant {
            Variant::Fibonacci => "fibonacci".into(),
            Variant::FirstOrder => "first-order".into(),
            Variant::Orthogonalized => "orthogonalized".into(),
            Variant::RaoBlackwell { draws, .. } => format!("rao-blackwell-{draws}"),
            Variant::HigherOrder { order } => format!("order-{order}"),
            Variant::StaticWeights { .. } => "static-weights".into(),
        })
    }

    /// Recursion coefficients after variant defaults.
    pub fn theta(&self) -> Result<Vec<f64>> {
        let theta = match (&self.variant, &self.coefficients) {
            (Variant::FirstOrder | Variant::StaticWeights { .. }, _) => vec![1.0],
            (Variant::HigherOrder { order }, None) => vec![1.0; *order],
            (Variant::HigherOrder { order }, Some(c)) => {
                if c.len() != *order {
                    return Err(invalid(format!(
                        "order {order} needs {order} coefficients, got {}",
                        c.len()
                    )));
                }
                c.clone()
            }
            (_, None) => vec![1.0, 1.0],
            (_, Some(c)) => {
                if c.len() != 2 {
                    return Err(invalid(format!(
                        "second-order variants need 2 coefficients, got {}",
                        c.len()
                    )));
                }
                c.clone()
            }
        };
        Ok(theta)
    }

    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 {
            return Err(invalid("iterations must be at least 1"));
        }
        if !(self.weak_c > 0.0) {
            return Err(invalid("weak_c must be positive"));
        }
        if let Some(l) = self.descent_lambda {
            if !(l > 0.0) {
                return Err(invalid("descent_lambda must be positive"));
            }
        }
        self.loss.validate()?;
        self.base.validate()?;
        self.theta()?;
        match &self.variant {
            Variant::RaoBlackwell { draws: 0, .. } => Err(invalid("rao-blackwell needs draws ≥ 1")),
            Variant::HigherOrder { order } if *order < 2 => Err(invalid("higher-order needs order ≥ 2")),
            Variant::StaticWeights { weights } => {
                if weights.len() != self.iterations {
                    return Err(invalid(format!(
                        "static weights: {} weights for {} iterations",
                        weights.len(),
                        self.iterations
                    )));
                }
                if weights.iter().any(|w| !(*w >= 0.0 && w.is_finite())) || weights.iter().sum::<f64>() <= 0.0 {
                    return Err(invalid("static weights must be nonnegative with positive sum"));
                }
                Ok(())
            }
            _ => make_schedule(&self.steps, self.iterations).map(|_| ()),
        }
    }
}

/// Normalized Fibonacci weights `(1, 1, 2, 3, 5, …) / Σ`.
pub fn fibonacci_weights(t: usize) -> Vec<f64> {
    let mut w = Vec::with_capacity(t);
    let (mut a, mut b) = (1.0, 1.0);
    for _ in 0..t {
        w.push(a);
        (a, b) = (b, a + b);
    }
    let s: f64 = w.iter().sum();
    w.iter().map(|v| v / s).collect()
}

/// One trace row describes `F_t` and the step that produced it from
/// `F_{t−1}` (learner `h_{t−1}` with step `η_{t−1}`).
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub t: usize,
    pub eta: f64,
    pub train_risk: f64,
    pub test_risk: f64,
    pub f_norm: f64,
    pub h_norm: f64,
    pub weak_ratio: f64,
    pub descent_slack: f64,
    pub increment_norm: f64,
    /// `‖∇R̂_n(F_{t−1})‖_H`.
    pub grad_norm: f64,
    pub weak_vacuous: bool,
    /// `‖h‖` before orthogonalization (equal to `h_norm` otherwise).
    pub raw_h_norm: f64,
    pub train_rmse: f64,
    pub test_rmse: f64,
    /// `max |F_t(x)|` over training and test inputs.
    pub max_abs_pred: f64,
}

#[derive(Clone, Debug)]
pub struct TrainedEnsemble {
    pub config: TrainConfig,
    pub predictor: RkhsFunction,
    /// The learners actually entering the recursion (after orthogonalization
    /// or averaging).
    pub learners: Vec<RkhsFunction>,
    pub alpha: AlphaMatrix,
    /// Effective step sequence (normalized weights for the static baseline).
    pub steps: Vec<f64>,
    pub companion: CompanionMatrix,
    pub trace: Vec<TraceRecord>,
    pub initial_train_risk: f64,
}

impl TrainedEnsemble {
    pub fn final_test_rmse(&self) -> f64 {
        self.trace.last().map_or(f64::NAN, |r| r.test_rmse)
    }

    /// First `t` with `test_rmse ≤ threshold`.
    pub fn iterations_to(&self, threshold: f64) -> Option<usize> {
        self.trace.iter().find(|r| r.test_rmse <= threshold).map(|r| r.t)
    }
}

// =============================================================================
// Evaluation caches
// =============================================================================

/// Predictions at a fixed point set: a cached cross-Gram or feature matrix
/// for functions in the training space, plain evaluation otherwise.
struct PointCache {
    points: Arc<Points>,
    matrix: Option<DMatrix<f64>>,
}

impl PointCache {
    fn new(space: &TrainingSpace, points: Arc<Points>) -> Result<Self> {
        let matrix = match space {
            TrainingSpace::Kernel {
                kernel, anchors, ..
            } => Some(rkhs::cross_gram(kernel, &points, anchors)),
            TrainingSpace::Features { map, .. } => Some(map.transform(&points)?),
        };
        Ok(Self { points, matrix })
    }

    fn predict(&self, space: &TrainingSpace, f: &RkhsFunction) -> Result<DVector<f64>> {
        let fits = match (space, f) {
            (
                TrainingSpace::Kernel {
                    kernel, anchors, ..
                },
                RkhsFunction::KernelExpansion {
                    kernel: kf,
                    anchors: af,
                    ..
                },
            ) => kf == kernel && Arc::ptr_eq(af, anchors),
            (TrainingSpace::Features { map, .. }, RkhsFunction::FeatureWeights { map: fm, .. }) => {
                Arc::ptr_eq(map, fm)
            }
            _ => false,
        };
        match (&self.matrix, fits) {
            (Some(m), true) => Ok(m * f.coefficients()),
            _ => rkhs::evaluate(f, &self.points),
        }
    }
}

// =============================================================================
// Learner production
// =============================================================================

/// Seeds of the independent random-feature draws used for averaging.
pub fn draw_seeds(base_seed: u64, draws: usize) -> Vec<u64> {
    let mut rng = ChaCha8Rng::seed_from_u64(base_seed ^ 0x5EED_D8A5_0000_0000);
    (0..draws).map(|_| rng.random()).collect()
}

enum Producer {
    Single(BaseLearner),
    /// One learner per draw; each fit is embedded into the multi-block map
    /// with weight `√M` so the equal-weight average is exact in that space.
    Blocks {
        learners: Vec<BaseLearner>,
        space: TrainingSpace,
    },
}

impl Producer {
    fn new(config: &TrainConfig, inputs: &Arc<Points>) -> Result<Self> {
        let Variant::RaoBlackwell { draws, exact } = config.variant else {
            return Ok(Producer::Single(BaseLearner::new(&config.base, inputs)?));
        };
        match config.base.family {
            LearnerFamily::KernelRidge { .. } => Ok(Producer::Single(BaseLearner::new(&config.base, inputs)?)),
            LearnerFamily::RffRidge { bandwidth, ridge, .. } if exact => {
                let kr = BaseLearnerConfig {
                    family: LearnerFamily::KernelRidge {
                        kernel: KernelSpec::gaussian(bandwidth),
                        ridge,
                    },
                    norm_cap: config.base.norm_cap,
                };
                Ok(Producer::Single(BaseLearner::new(&kr, inputs)?))
            }
            LearnerFamily::RffRidge {
                features,
                bandwidth,
                seed,
                ..
            } => {
                let seeds = if draws == 1 { vec![seed] } else { draw_seeds(seed, draws) };
                let learners = par::map_slice(&seeds, |s| {
                    let map = FeatureMap::single(inputs.dim(), features, bandwidth, *s)?;
                    let space = TrainingSpace::features(Arc::new(map), inputs)?;
                    BaseLearner::with_space(&config.base, space)
                })
                .into_iter()
                .collect::<Result<Vec<_>>>()?;
                let composite = FeatureMap::new(FeatureMapSpec {
                    input_dim: inputs.dim(),
                    features,
                    bandwidth,
                    seeds,
                })?;
                let space = TrainingSpace::features(Arc::new(composite), inputs)?;
                Ok(Producer::Blocks { learners, space })
            }
        }
    }

    fn space(&self) -> &TrainingSpace {
        match self {
            Producer::Single(l) => l.space(),
            Producer::Blocks { space, .. } => space,
        }
    }

    fn fit(&self, residuals: &[f64]) -> Result<RkhsFunction> {
        match self {
            Producer::Single(l) => l.fit(residuals),
            Producer::Blocks { learners, space } => {
                let m = learners.len();
                let width = space.zero().coefficients().len();
                let scale = (m as f64).sqrt();
                crate::recursion::rao_blackwell_average(
                    |j| {
                        let h = learners[j].fit(residuals)?;
                        let mut w = DVector::zeros(width);
                        let block = h.coefficients() * scale;
                        let d = block.len();
                        w.rows_mut(j * d, d).copy_from(&block);
                        space.function(w)
                    },
                    m,
                )
            }
        }
    }
}

// =============================================================================
// Training
// =============================================================================

enum Update {
    Recursion(RecursionSchedule),
    FirstOrder(StepSchedule),
}

/// Trains the configured variant on `train_set`; `test_set` only feeds the
/// trace's test columns (NaN without it).
pub fn train(config: &TrainConfig, train_set: &Dataset, test_set: Option<&Dataset>) -> Result<TrainedEnsemble> {
    config.validate()?;
    if let Variant::StaticWeights { .. } = config.variant {
        return static_weight_baseline(config, train_set, test_set);
    }
    let t_len = config.iterations;
    let steps = make_schedule(&config.steps, t_len)?;
    let theta = config.theta()?;
    let update = match config.variant {
        Variant::FirstOrder => Update::FirstOrder(steps.clone()),
        _ => Update::Recursion(RecursionSchedule::constant(theta.clone(), steps.clone())?),
    };
    let orthogonalize = matches!(config.variant, Variant::Orthogonalized);

    let inputs = train_set.inputs().clone();
    let y = train_set.targets();
    let producer = Producer::new(config, &inputs)?;
    let space = producer.space();
    let test_cache = test_set
        .map(|d| PointCache::new(space, d.inputs().clone()))
        .transpose()?;

    let loss = config.loss;
    let zero = space.zero();
    let mut state = EnsembleState::initial(zero.clone(), theta.len());
    let mut current = zero;
    let mut preds = DVector::zeros(train_set.len());
    let initial_train_risk = loss.risk(preds.as_slice(), y);
    let mut basis = SpanBasis::new();
    let mut learners = Vec::with_capacity(t_len);
    let mut trace = Vec::with_capacity(t_len);

    for t in 0..t_len {
        let wrap = |e: Error| Error::Training {
            iteration: t,
            source: Box::new(e),
        };
        let raw = if t == 0 {
            producer.fit(y)
        } else {
            pseudo_residuals(&loss, preds.as_slice(), y, t).and_then(|r| producer.fit(r.values.as_slice()))
        }
        .map_err(wrap)?;
        let gradient = space.gradient(&loss, preds.as_slice(), y).map_err(wrap)?;
        let raw_h_norm = space.norm(&raw).map_err(wrap)?;
        let h = if orthogonalize {
            basis.project_out(&raw, space).map_err(wrap)?
        } else {
            raw
        };
        let h_norm = if orthogonalize { space.norm(&h).map_err(wrap)? } else { raw_h_norm };
        let weak = weak_learning_check(&h, &gradient, config.weak_c, space).map_err(wrap)?;

        let next = match &update {
            Update::Recursion(schedule) => {
                state = step(&state, schedule, &h).map_err(wrap)?;
                state.head().clone()
            }
            Update::FirstOrder(schedule) => combine(&[1.0, schedule.eta(t)], &[&current, &h]).map_err(wrap)?,
        };
        if orthogonalize {
            basis.push(&next, space).map_err(wrap)?;
        }

        preds = space.predict(&next).map_err(wrap)?;
        let increment = combine(&[1.0, -1.0], &[&next, &current]).map_err(wrap)?;
        let increment_norm = space.norm(&increment).map_err(wrap)?;
        let f_norm = space.norm(&next).map_err(wrap)?;
        let mut max_abs_pred = preds.amax();
        let (test_risk, test_rmse) = match (test_set, &test_cache) {
            (Some(ts), Some(cache)) => {
                let tp = cache.predict(space, &next).map_err(wrap)?;
                max_abs_pred = max_abs_pred.max(tp.amax());
                (loss.risk(tp.as_slice(), ts.targets()), rmse(tp.as_slice(), ts.targets()))
            }
            _ => (f64::NAN, f64::NAN),
        };
        trace.push(TraceRecord {
            t: t + 1,
            eta: steps.eta(t),
            train_risk: loss.risk(preds.as_slice(), y),
            test_risk,
            f_norm,
            h_norm,
            weak_ratio: weak.ratio,
            descent_slack: f64::NAN,
            increment_norm,
            grad_norm: weak.gradient_norm,
            weak_vacuous: weak.vacuous,
            raw_h_norm,
            train_rmse: rmse(preds.as_slice(), y),
            test_rmse,
            max_abs_pred,
        });
        learners.push(h);
        current = next;
    }

    let RunGeometry { steps, companion, alpha } = run_geometry(config)?;
    fill_descent_slack(config, train_set, &mut trace, initial_train_risk);
    Ok(TrainedEnsemble {
        config: config.clone(),
        predictor: current,
        learners,
        alpha,
        steps,
        companion,
        trace,
        initial_train_risk,
    })
}

/// Descent-inequality inputs for a finished trace: `L` from the observed
/// target and prediction ranges, `M` from the loss.
pub fn descent_inputs(config: &TrainConfig, train_set: &Dataset, trace: &[TraceRecord]) -> DescentInputs {
    let max_y = train_set.targets().iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let max_pred = trace.iter().map(|r| r.max_abs_pred).fold(0.0, f64::max);
    DescentInputs {
        lambda: config.descent_lambda.unwrap_or(config.base.ridge()),
        c: config.weak_c,
        lipschitz: config.loss.lipschitz(max_y, max_pred),
        smoothness: config.loss.gradient_lipschitz().unwrap_or(f64::INFINITY),
    }
}

fn fill_descent_slack(config: &TrainConfig, train_set: &Dataset, trace: &mut [TraceRecord], initial_risk: f64) {
    let inputs = descent_inputs(config, train_set, trace);
    let slack = descent_check(trace, initial_risk, &inputs);
    for (r, s) in trace.iter_mut().zip(slack) {
        r.descent_slack = s;
    }
}

/// Step sequence, companion matrix and α coefficients of a configuration;
/// these depend only on the schedule, never on the data.
#[derive(Clone, Debug)]
pub struct RunGeometry {
    pub steps: Vec<f64>,
    pub companion: CompanionMatrix,
    pub alpha: AlphaMatrix,
}

pub fn run_geometry(config: &TrainConfig) -> Result<RunGeometry> {
    config.validate()?;
    let t_len = config.iterations;
    if let Variant::StaticWeights { weights } = &config.variant {
        let total: f64 = weights.iter().sum();
        let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
        let rows: Vec<Vec<f64>> = (1..=t_len)
            .map(|t| {
                let partial: f64 = weights[..t].iter().sum();
                if partial > 0.0 {
                    weights[..t].iter().map(|w| w / partial).collect()
                } else {
                    vec![0.0; t]
                }
            })
            .collect();
        // no state dynamics: every learner enters once, |α_{T,k}| ≤ C η_k
        // with ρ̂ = 1, and the companion [1] has unit powers
        let fitted_c = rows
            .iter()
            .flat_map(|row| row.iter().zip(&weights).map(|(a, w)| if *w > 0.0 { a / w } else { 0.0 }))
            .fold(0.0, f64::max);
        let bound = AlphaBound {
            rho_hat: 1.0,
            burn_in_c: fitted_c,
            fitted_c,
            holds: true,
        };
        return Ok(RunGeometry {
            steps: weights,
            companion: CompanionMatrix::new(vec![1.0])?,
            alpha: AlphaMatrix::from_rows(rows, bound),
        });
    }
    let schedule = RecursionSchedule::constant(config.theta()?, make_schedule(&config.steps, t_len)?)?;
    Ok(RunGeometry {
        steps: schedule.steps.steps.clone(),
        companion: schedule.companion(),
        alpha: alpha_matrix(&schedule, t_len)?,
    })
}

// =============================================================================
// Static baseline
// =============================================================================

/// Fits one learner per bootstrap resample (seeded) on the raw targets and
/// combines them with the normalized weights. Trace row `t` is the weighted
/// combination of the first `t` learners, renormalized.
pub fn static_weight_baseline(
    config: &TrainConfig,
    train_set: &Dataset,
    test_set: Option<&Dataset>,
) -> Result<TrainedEnsemble> {
    config.validate()?;
    let Variant::StaticWeights { weights } = &config.variant else {
        return Err(invalid("static_weight_baseline needs the static-weights variant"));
    };
    let total: f64 = weights.iter().sum();
    let weights: Vec<f64> = weights.iter().map(|w| w / total).collect();
    let n = train_set.len();
    let inputs = train_set.inputs().clone();
    // every learner is re-expressed on the full training anchors, so all
    // combinations share one anchor set (and one Gram matrix)
    let full = BaseLearner::new(&config.base, &inputs)?;
    let space = full.space();
    let resamples: Vec<Vec<usize>> = (0..weights.len())
        .map(|k| {
            let mut rng = ChaCha8Rng::seed_from_u64(config.seed.wrapping_mul(0x9E37_79B9).wrapping_add(k as u64));
            (0..n).map(|_| rng.random_range(0..n)).collect()
        })
        .collect();
    let learners = par::map_slice(&resamples, |idx| {
        let sub = train_set.subset(idx)?;
        let h = match space {
            TrainingSpace::Features { .. } => {
                let TrainingSpace::Features { map, .. } = space else { unreachable!() };
                let sub_space = TrainingSpace::features(map.clone(), sub.inputs())?;
                let fitted = BaseLearner::with_space(&config.base, sub_space)?.fit(sub.targets())?;
                space.function(fitted.coefficients().clone())?
            }
            TrainingSpace::Kernel { .. } => {
                let fitted = BaseLearner::new(&config.base, sub.inputs())?.fit(sub.targets())?;
                let mut c = DVector::zeros(n);
                for (j, &i) in idx.iter().enumerate() {
                    c[i] += fitted.coefficients()[j];
                }
                space.function(c)?
            }
        };
        Ok(h)
    })
    .into_iter()
    .collect::<Result<Vec<_>>>()
    .map_err(|e| Error::Training {
        iteration: 0,
        source: Box::new(e),
    })?;

    let test_cache = test_set.map(|d| PointCache::new(space, d.inputs().clone())).transpose()?;
    let loss = config.loss;
    let y = train_set.targets();
    let initial_train_risk = loss.risk(&vec![0.0; n], y);
    let mut trace = Vec::with_capacity(learners.len());
    let mut current = space.zero();
    for t in 1..=learners.len() {
        let partial: f64 = weights[..t].iter().sum();
        let row: Vec<f64> = if partial > 0.0 {
            weights[..t].iter().map(|w| w / partial).collect()
        } else {
            vec![0.0; t]
        };
        let refs: Vec<&RkhsFunction> = learners[..t].iter().collect();
        let next = combine(&row, &refs)?;
        let preds = space.predict(&next)?;
        let increment = combine(&[1.0, -1.0], &[&next, &current])?;
        let mut max_abs_pred = preds.amax();
        let (test_risk, test_rmse) = match (test_set, &test_cache) {
            (Some(ts), Some(cache)) => {
                let tp = cache.predict(space, &next)?;
                max_abs_pred = max_abs_pred.max(tp.amax());
                (loss.risk(tp.as_slice(), ts.targets()), rmse(tp.as_slice(), ts.targets()))
            }
            _ => (f64::NAN, f64::NAN),
        };
        let h_norm = space.norm(&learners[t - 1])?;
        trace.push(TraceRecord {
            t,
            eta: weights[t - 1],
            train_risk: loss.risk(preds.as_slice(), y),
            test_risk,
            f_norm: space.norm(&next)?,
            h_norm,
            weak_ratio: f64::NAN,
            descent_slack: f64::NAN,
            increment_norm: space.norm(&increment)?,
            grad_norm: f64::NAN,
            weak_vacuous: false,
            raw_h_norm: h_norm,
            train_rmse: rmse(preds.as_slice(), y),
            test_rmse,
            max_abs_pred,
        });
        current = next;
    }
    let RunGeometry { steps, companion, alpha } = run_geometry(config)?;
    Ok(TrainedEnsemble {
        config: config.clone(),
        predictor: current,
        learners,
        alpha,
        steps,
        companion,
        trace,
        initial_train_risk,
    })
}

// =============================================================================
// Kernel-ridge reference solutions
// =============================================================================

/// Default λ grid, log-spaced over `[1e-6, 1]`.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..=24).map(|i| 10f64.powf(-6.0 + 0.25 * i as f64)).collect()
}

/// Minimizer of `R̂_n(f) + λ‖f‖²` for the squared loss: `(G + nλI)c = y`
/// (or the feature-space analogue).
pub fn tikhonov_solution(space: &TrainingSpace, targets: &[f64], lambda: f64) -> Result<RkhsFunction> {
    let n = space.n() as f64;
    let y = DVector::from_column_slice(targets);
    let (mut a, rhs) = match space {
        TrainingSpace::Kernel { gram, .. } => (gram.clone(), y),
        TrainingSpace::Features { phi, .. } => (phi.tr_mul(phi), phi.tr_mul(&y)),
    };
    for i in 0..a.nrows() {
        a[(i, i)] += n * lambda;
    }
    let chol = a.cholesky().ok_or_else(|| Error::SingularSystem {
        context: "tikhonov solution".into(),
        ridge: lambda,
    })?;
    space.function(chol.solve(&rhs))
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OracleFit {
    pub lambda: f64,
    pub test_rmse: f64,
    pub grid: Vec<(f64, f64)>,
}

/// Best test RMSE of exact kernel ridge over a λ grid.
pub fn kernel_ridge_oracle(
    kernel: KernelSpec,
    train_set: &Dataset,
    test_set: &Dataset,
    grid: &[f64],
) -> Result<OracleFit> {
    if grid.is_empty() {
        return Err(invalid("empty λ grid"));
    }
    let space = TrainingSpace::kernel(kernel, train_set.inputs().clone());
    let cross = rkhs::cross_gram(&kernel, test_set.inputs(), train_set.inputs());
    let scores = par::map_slice(grid, |&lambda| {
        let f = tikhonov_solution(&space, train_set.targets(), lambda)?;
        let pred = &cross * f.coefficients();
        Ok((lambda, rmse(pred.as_slice(), test_set.targets())))
    })
    .into_iter()
    .collect::<Result<Vec<(f64, f64)>>>()?;
    let best = scores
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    Ok(OracleFit {
        lambda: best.0,
        test_rmse: best.1,
        grid: scores,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StationarityReport {
    /// `(λ, ‖F_T − F*_λ‖_H)` per grid point.
    pub distances: Vec<(f64, f64)>,
    pub nearest_lambda: f64,
    pub nearest_distance: f64,
    /// `‖F_T‖_H`, for scale.
    pub predictor_norm: f64,
}

/// Distance from the final predictor to the Tikhonov minimizer at each grid
/// λ (squared loss). A report only: no λ is singled out by the recursion.
pub fn stationarity_report(ensemble: &TrainedEnsemble, train_set: &Dataset, grid: &[f64]) -> Result<StationarityReport> {
    if ensemble.config.loss != LossSpec::Squared {
        return Err(invalid("stationarity report is defined for the squared loss"));
    }
    if grid.is_empty() {
        return Err(invalid("empty λ grid"));
    }
    let space = match &ensemble.predictor {
        RkhsFunction::KernelExpansion {
            kernel, anchors, ..
        } if Arc::ptr_eq(anchors, train_set.inputs()) => TrainingSpace::kernel(*kernel, anchors.clone()),
        RkhsFunction::FeatureWeights { map, .. } => TrainingSpace::features(map.clone(), train_set.inputs())?,
        _ => return Err(invalid("predictor is not anchored on this training set")),
    };
    let distances = par::map_slice(grid, |&lambda| {
        let star = tikhonov_solution(&space, train_set.targets(), lambda)?;
        let diff = combine(&[1.0, -1.0], &[&ensemble.predictor, &star])?;
        Ok((lambda, space.norm(&diff)?))
    })
    .into_iter()
    .collect::<Result<Vec<(f64, f64)>>>()?;
    let best = distances
        .iter()
        .copied()
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .expect("nonempty grid");
    Ok(StationarityReport {
        distances,
        nearest_lambda: best.0,
        nearest_distance: best.1,
        predictor_norm: space.norm(&ensemble.predictor)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::recursion::reconstruct;
    use approx::assert_relative_eq;

    fn sinusoid(n: usize, seed: u64) -> Dataset {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let x: Vec<f64> = (0..n).map(|_| rng.random()).collect();
        let y = x.iter().map(|v| (2.0 * std::f64::consts::PI * v).sin()).collect();
        Dataset::new(Points::new(x, 1).unwrap(), y).unwrap()
    }

    fn base() -> BaseLearnerConfig {
        BaseLearnerConfig::kernel_ridge(KernelSpec::gaussian(0.2), 1e-3)
    }

    #[test]
    fn single_iteration_is_scaled_initial_fit() {
        let data = sinusoid(40, 1);
        for variant in [Variant::Fibonacci, Variant::FirstOrder, Variant::Orthogonalized] {
            let cfg = TrainConfig::new(variant, base(), StepSpec::Constant { eta0: 0.3 }, 1);
            let run = train(&cfg, &data, None).unwrap();
            let h0 = BaseLearner::new(&base(), data.inputs()).unwrap().fit(data.targets()).unwrap();
            assert_eq!(run.predictor.coefficients(), &(h0.coefficients() * 0.3));
            let preds = rkhs::evaluate(&run.predictor, data.inputs()).unwrap();
            assert_relative_eq!(
                run.trace[0].train_risk,
                LossSpec::Squared.risk(preds.as_slice(), data.targets()),
                max_relative = 1e-12
            );
        }
    }

    #[test]
    fn first_order_degeneration_is_bit_identical() {
        let data = sinusoid(60, 2);
        let test = sinusoid(30, 3);
        let steps = StepSpec::Constant { eta0: 0.2 };
        let fo = train(&TrainConfig::new(Variant::FirstOrder, base(), steps.clone(), 25), &data, Some(&test)).unwrap();
        let fib = train(
            &TrainConfig::new(Variant::Fibonacci, base(), steps, 25).with_coefficients(vec![1.0, 0.0]),
            &data,
            Some(&test),
        )
        .unwrap();
        assert_eq!(fo.trace, fib.trace);
        assert_eq!(fo.predictor.coefficients(), fib.predictor.coefficients());
    }

    #[test]
    fn predictor_matches_alpha_reconstruction() {
        let data = sinusoid(50, 4);
        let cfg = TrainConfig::new(Variant::Fibonacci, base(), StepSpec::Golden { eta0: 0.5 }, 20);
        let run = train(&cfg, &data, None).unwrap();
        let rebuilt = reconstruct(&run.alpha, &run.learners, 20).unwrap();
        let probe = sinusoid(50, 9);
        let a = rkhs::evaluate(&rebuilt, probe.inputs()).unwrap();
        let b = rkhs::evaluate(&run.predictor, probe.inputs()).unwrap();
        for i in 0..50 {
            assert_relative_eq!(a[i], b[i], max_relative = 1e-9, epsilon = 1e-12);
        }
    }

    #[test]
    fn static_baseline_examples() {
        let data = sinusoid(30, 5);
        let one = TrainConfig::new(Variant::StaticWeights { weights: vec![1.0] }, base(), StepSpec::Constant { eta0: 1.0 }, 1);
        let run = train(&one, &data, None).unwrap();
        assert_eq!(run.predictor.coefficients(), run.learners[0].coefficients());

        let cfg = TrainConfig::new(
            Variant::StaticWeights { weights: vec![1.0, 1.0, 2.0, 3.0, 5.0] },
            base(),
            StepSpec::Constant { eta0: 1.0 },
            5,
        );
        let run = train(&cfg, &data, None).unwrap();
        let probe = sinusoid(20, 6);
        let got = rkhs::evaluate(&run.predictor, probe.inputs()).unwrap();
        let mut expected = DVector::zeros(20);
        for (w, h) in [1.0, 1.0, 2.0, 3.0, 5.0].iter().zip(&run.learners) {
            expected += rkhs::evaluate(h, probe.inputs()).unwrap() * (w / 12.0);
        }
        for i in 0..20 {
            assert_relative_eq!(got[i], expected[i], max_relative = 1e-12, epsilon = 1e-14);
        }
        assert_eq!(fibonacci_weights(5), vec![1.0 / 12.0, 1.0 / 12.0, 2.0 / 12.0, 3.0 / 12.0, 5.0 / 12.0]);
    }

    #[test]
    fn uniform_weights_over_identical_learners() {
        // without resampling variety: n = 1 makes every bootstrap identical
        let data = Dataset::new(Points::new(vec![0.3], 1).unwrap(), vec![0.7]).unwrap();
        let cfg = TrainConfig::new(
            Variant::StaticWeights { weights: vec![1.0; 4] },
            base(),
            StepSpec::Constant { eta0: 1.0 },
            4,
        );
        let run = train(&cfg, &data, None).unwrap();
        assert_relative_eq!(run.predictor.coefficients()[0], run.learners[0].coefficients()[0], max_relative = 1e-15);
    }

    #[test]
    fn training_is_deterministic() {
        let data = sinusoid(40, 7);
        let mut cfg = TrainConfig::new(
            Variant::RaoBlackwell { draws: 4, exact: false },
            BaseLearnerConfig::rff_ridge(20, 0.2, 1e-3, 11),
            StepSpec::Golden { eta0: 0.5 },
            10,
        );
        cfg.seed = 3;
        let a = train(&cfg, &data, None).unwrap();
        let b = train(&cfg, &data, None).unwrap();
        assert_eq!(a.trace.len(), 10);
        for (x, y) in a.trace.iter().zip(&b.trace) {
            assert_eq!(x.train_risk.to_bits(), y.train_risk.to_bits());
        }
    }

    #[test]
    fn single_draw_average_equals_plain_rff() {
        let data = sinusoid(40, 8);
        let base = BaseLearnerConfig::rff_ridge(16, 0.2, 1e-3, 21);
        let steps = StepSpec::Constant { eta0: 0.3 };
        let rb = train(&TrainConfig::new(Variant::RaoBlackwell { draws: 1, exact: false }, base.clone(), steps.clone(), 5), &data, None).unwrap();
        let plain = train(&TrainConfig::new(Variant::Fibonacci, base, steps, 5), &data, None).unwrap();
        assert_eq!(rb.predictor.coefficients(), plain.predictor.coefficients());
    }

    #[test]
    fn oracle_and_stationarity_report() {
        let data = sinusoid(60, 10);
        let test = sinusoid(40, 11);
        let oracle = kernel_ridge_oracle(KernelSpec::gaussian(0.2), &data, &test, &default_lambda_grid()).unwrap();
        assert!(oracle.test_rmse < 0.1);
        let cfg = TrainConfig::new(Variant::Fibonacci, base(), StepSpec::Geometric { eta0: 0.5, ratio: 0.9 }, 30)
            .with_coefficients(vec![0.5, 0.3]);
        let run = train(&cfg, &data, None).unwrap();
        let report = stationarity_report(&run, &data, &default_lambda_grid()).unwrap();
        assert_eq!(report.distances.len(), 25);
        assert!(report.nearest_distance.is_finite());
    }

    #[test]
    fn invalid_configs_are_rejected() {
        let data = sinusoid(10, 12);
        let bad = TrainConfig::new(Variant::Fibonacci, base(), StepSpec::Constant { eta0: 0.1 }, 5)
            .with_coefficients(vec![1.0, 1.0, 1.0]);
        assert!(train(&bad, &data, None).is_err());
        let bad = TrainConfig::new(Variant::RaoBlackwell { draws: 0, exact: false }, base(), StepSpec::Constant { eta0: 0.1 }, 5);
        assert!(train(&bad, &data, None).is_err());
        let bad = TrainConfig::new(Variant::StaticWeights { weights: vec![1.0] }, base(), StepSpec::Constant { eta0: 0.1 }, 5);
        assert!(train(&bad, &data, None).is_err());
    }
}
