//! Losses, pseudo-residuals and ridge base learners.
//!
//! A [`TrainingSpace`] binds one representation family to the training
//! inputs: it caches the Gram (or feature) matrix so that predictions at
//! training points, the empirical-risk gradient and inner products of
//! training-anchored functions cost matrix-vector products.
//! A [`BaseLearner`] adds the factorized ridge system on top, so each boosting
//! iteration is two triangular solves.

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::rkhs::{self, FeatureMap, FeatureMapSpec, InnerProduct, KernelSpec, Points, RkhsFunction};

// =============================================================================
// Losses
// =============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LossSpec {
    /// `(z − y)²`.
    Squared,
    /// `|z − y|`.
    Absolute,
    /// `(z − y)²/(2δ)` for `|z − y| ≤ δ`, `|z − y| − δ/2` beyond; 1-Lipschitz.
    Huber { threshold: f64 },
}

impl LossSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            LossSpec::Huber { threshold } if !(threshold > 0.0 && threshold.is_finite()) => {
                Err(invalid(format!("huber threshold must be positive, got {threshold}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn value(&self, z: f64, y: f64) -> f64 {
        let e = z - y;
        match *self {
            LossSpec::Squared => e * e,
            LossSpec::Absolute => e.abs(),
            LossSpec::Huber { threshold } if e.abs() <= threshold => e * e / (2.0 * threshold),
            LossSpec::Huber { threshold } => e.abs() - threshold / 2.0,
        }
    }

    /// `∂_z ℓ(z, y)`; the subgradient at a kink is 0.
    #[inline]
    pub fn derivative(&self, z: f64, y: f64) -> f64 {
        let e = z - y;
        match *self {
            LossSpec::Squared => 2.0 * e,
            LossSpec::Absolute => sign(e),
            LossSpec::Huber { threshold } if e.abs() <= threshold => e / threshold,
            LossSpec::Huber { .. } => sign(e),
        }
    }

    /// Lipschitz constant in `z`. The squared loss is only Lipschitz on a
    /// bounded range: `2 (max|y| + max|F(x)|)`.
    pub fn lipschitz(&self, max_abs_target: f64, max_abs_prediction: f64) -> f64 {
        match self {
            LossSpec::Squared => 2.0 * (max_abs_target + max_abs_prediction),
            LossSpec::Absolute | LossSpec::Huber { .. } => 1.0,
        }
    }

    /// Lipschitz constant of `∂_z ℓ`, if finite.
    pub fn gradient_lipschitz(&self) -> Option<f64> {
        match *self {
            LossSpec::Squared => Some(2.0),
            LossSpec::Absolute => None,
            LossSpec::Huber { threshold } => Some(1.0 / threshold),
        }
    }

    pub fn risk(&self, predictions: &[f64], targets: &[f64]) -> f64 {
        let n = targets.len().max(1) as f64;
        predictions
            .iter()
            .zip(targets)
            .map(|(z, y)| self.value(*z, *y))
            .sum::<f64>()
            / n
    }
}

#[inline]
fn sign(e: f64) -> f64 {
    if e > 0.0 {
        1.0
    } else if e < 0.0 {
        -1.0
    } else {
        0.0
    }
}

pub fn rmse(predictions: &[f64], targets: &[f64]) -> f64 {
    LossSpec::Squared.risk(predictions, targets).sqrt()
}

#[derive(Clone, Debug, PartialEq)]
pub struct ResidualVector {
    pub values: DVector<f64>,
    pub iteration: usize,
}

/// `r_i = −∂_z ℓ(F(x_i), y_i)`.
pub fn pseudo_residuals(
    loss: &LossSpec,
    predictions: &[f64],
    targets: &[f64],
    iteration: usize,
) -> Result<ResidualVector> {
    if predictions.len() != targets.len() {
        return Err(Error::DimensionMismatch {
            expected: targets.len(),
            found: predictions.len(),
        });
    }
    let values = DVector::from_iterator(
        targets.len(),
        predictions.iter().zip(targets).map(|(z, y)| -loss.derivative(*z, *y)),
    );
    if !values.iter().all(|v| v.is_finite()) {
        return Err(invalid(format!("non-finite pseudo-residuals at iteration {iteration}")));
    }
    Ok(ResidualVector { values, iteration })
}

// =============================================================================
// Base learner configuration
// =============================================================================

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum LearnerFamily {
    KernelRidge {
        kernel: KernelSpec,
        ridge: f64,
    },
    RffRidge {
        features: usize,
        bandwidth: f64,
        ridge: f64,
        seed: u64,
    },
}

fn default_norm_cap() -> f64 {
    10.0
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaseLearnerConfig {
    pub family: LearnerFamily,
    /// Fitted learners with `‖h‖ > norm_cap` are rescaled onto the sphere.
    #[serde(default = "default_norm_cap")]
    pub norm_cap: f64,
}

impl BaseLearnerConfig {
    pub fn kernel_ridge(kernel: KernelSpec, ridge: f64) -> Self {
        Self {
            family: LearnerFamily::KernelRidge { kernel, ridge },
            norm_cap: default_norm_cap(),
        }
    }

    pub fn rff_ridge(features: usize, bandwidth: f64, ridge: f64, seed: u64) -> Self {
        Self {
            family: LearnerFamily::RffRidge {
                features,
                bandwidth,
                ridge,
                seed,
            },
            norm_cap: default_norm_cap(),
        }
    }

    pub fn ridge(&self) -> f64 {
        match self.family {
            LearnerFamily::KernelRidge { ridge, .. } | LearnerFamily::RffRidge { ridge, .. } => ridge,
        }
    }

    /// `κ` of the space the learners live in. Random Fourier features have
    /// `‖φ(x)‖² = (2/D) Σ cos²(·) ≤ 2`, so `κ = √2` there.
    pub fn kappa(&self, dim: usize) -> f64 {
        match &self.family {
            LearnerFamily::KernelRidge { kernel, .. } => kernel.kappa(dim),
            LearnerFamily::RffRidge { .. } => std::f64::consts::SQRT_2,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.norm_cap > 0.0) {
            return Err(invalid(format!("norm cap must be positive, got {}", self.norm_cap)));
        }
        if !(self.ridge() > 0.0 && self.ridge().is_finite()) {
            return Err(invalid(format!("ridge must be positive, got {}", self.ridge())));
        }
        match &self.family {
            LearnerFamily::KernelRidge { kernel, .. } => kernel.validate(),
            LearnerFamily::RffRidge {
                features,
                bandwidth,
                ..
            } => {
                if *features == 0 {
                    return Err(invalid("rff dimension must be at least 1"));
                }
                KernelSpec::gaussian(*bandwidth).validate()
            }
        }
    }
}

// =============================================================================
// Training space
// =============================================================================

/// One representation family bound to the training inputs.
#[derive(Clone, Debug)]
pub enum TrainingSpace {
    Kernel {
        kernel: KernelSpec,
        anchors: Arc<Points>,
        gram: DMatrix<f64>,
    },
    Features {
        map: Arc<FeatureMap>,
        /// `n × D` feature matrix of the training inputs.
        phi: DMatrix<f64>,
    },
}

impl TrainingSpace {
    pub fn kernel(kernel: KernelSpec, anchors: Arc<Points>) -> Self {
        let gram = rkhs::gram(&kernel, &anchors);
        TrainingSpace::Kernel {
            kernel,
            anchors,
            gram,
        }
    }

    pub fn features(map: Arc<FeatureMap>, inputs: &Points) -> Result<Self> {
        let phi = map.transform(inputs)?;
        Ok(TrainingSpace::Features { map, phi })
    }

    pub fn n(&self) -> usize {
        match self {
            TrainingSpace::Kernel { gram, .. } => gram.nrows(),
            TrainingSpace::Features { phi, .. } => phi.nrows(),
        }
    }

    pub fn zero(&self) -> RkhsFunction {
        match self {
            TrainingSpace::Kernel {
                kernel, anchors, ..
            } => RkhsFunction::KernelExpansion {
                kernel: *kernel,
                anchors: anchors.clone(),
                coefficients: DVector::zeros(anchors.len()),
            },
            TrainingSpace::Features { map, .. } => RkhsFunction::zero_features(map.clone()),
        }
    }

    /// Function with the given training-anchored coefficients or weights.
    pub fn function(&self, coefficients: DVector<f64>) -> Result<RkhsFunction> {
        match self {
            TrainingSpace::Kernel {
                kernel, anchors, ..
            } => RkhsFunction::kernel_expansion(*kernel, anchors.clone(), coefficients),
            TrainingSpace::Features { map, .. } => {
                RkhsFunction::feature_weights(map.clone(), coefficients)
            }
        }
    }

    fn on_anchors<'a>(&self, f: &'a RkhsFunction) -> Option<&'a DVector<f64>> {
        match (self, f) {
            (
                TrainingSpace::Kernel {
                    kernel, anchors, ..
                },
                RkhsFunction::KernelExpansion {
                    kernel: kf,
                    anchors: af,
                    coefficients,
                },
            ) if kf == kernel && Arc::ptr_eq(af, anchors) => Some(coefficients),
            _ => None,
        }
    }

    /// `f(x_i)` at the training inputs.
    pub fn predict(&self, f: &RkhsFunction) -> Result<DVector<f64>> {
        if let Some(c) = self.on_anchors(f) {
            if let TrainingSpace::Kernel { gram, .. } = self {
                return Ok(gram * c);
            }
        }
        match (self, f) {
            (TrainingSpace::Features { map, phi }, RkhsFunction::FeatureWeights { map: fm, weights })
                if Arc::ptr_eq(map, fm) || map.spec() == fm.spec() =>
            {
                Ok(phi * weights)
            }
            (TrainingSpace::Kernel { anchors, .. }, _) => rkhs::evaluate(f, anchors),
            (TrainingSpace::Features { .. }, _) => Err(Error::RepresentationMismatch(
                "function is not in the training feature space".into(),
            )),
        }
    }

    /// `∇R̂_n(F) = (1/n) Σ_i ∂_z ℓ(F(x_i), y_i) K(x_i, ·)`, or its feature-space
    /// weights `(1/n) Φᵀ ∂ℓ`.
    pub fn gradient(
        &self,
        loss: &LossSpec,
        predictions: &[f64],
        targets: &[f64],
    ) -> Result<RkhsFunction> {
        let n = self.n();
        if predictions.len() != n || targets.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: predictions.len().min(targets.len()),
            });
        }
        let d = DVector::from_iterator(
            n,
            predictions
                .iter()
                .zip(targets)
                .map(|(z, y)| loss.derivative(*z, *y) / n as f64),
        );
        match self {
            TrainingSpace::Kernel { .. } => self.function(d),
            TrainingSpace::Features { phi, .. } => self.function(phi.tr_mul(&d)),
        }
    }
}

impl InnerProduct for TrainingSpace {
    fn inner(&self, f: &RkhsFunction, g: &RkhsFunction) -> Result<f64> {
        if let (Some(a), Some(b)) = (self.on_anchors(f), self.on_anchors(g)) {
            if let TrainingSpace::Kernel { gram, .. } = self {
                return Ok(a.dot(&(gram * b)));
            }
        }
        rkhs::inner(f, g)
    }
}

// =============================================================================
// Ridge learners
// =============================================================================

/// A ridge learner with its system matrix factorized once per dataset.
#[derive(Clone, Debug)]
pub struct BaseLearner {
    config: BaseLearnerConfig,
    space: TrainingSpace,
    factor: Cholesky<f64, Dyn>,
}

impl BaseLearner {
    pub fn new(config: &BaseLearnerConfig, inputs: &Arc<Points>) -> Result<Self> {
        config.validate()?;
        let space = match &config.family {
            LearnerFamily::KernelRidge { kernel, .. } => TrainingSpace::kernel(*kernel, inputs.clone()),
            LearnerFamily::RffRidge {
                features,
                bandwidth,
                seed,
                ..
            } => {
                let map = FeatureMap::new(FeatureMapSpec {
                    input_dim: inputs.dim(),
                    features: *features,
                    bandwidth: *bandwidth,
                    seeds: vec![*seed],
                })?;
                TrainingSpace::features(Arc::new(map), inputs)?
            }
        };
        Self::with_space(config, space)
    }

    /// Learner over a prepared training space (e.g. a multi-block feature map).
    pub fn with_space(config: &BaseLearnerConfig, space: TrainingSpace) -> Result<Self> {
        config.validate()?;
        let n = space.n() as f64;
        let ridge = config.ridge();
        let system = match &space {
            TrainingSpace::Kernel { gram, .. } => {
                let mut a = gram.clone();
                for i in 0..a.nrows() {
                    a[(i, i)] += n * ridge;
                }
                a
            }
            TrainingSpace::Features { phi, .. } => {
                let mut a = phi.tr_mul(phi);
                for i in 0..a.nrows() {
                    a[(i, i)] += n * ridge;
                }
                a
            }
        };
        let factor = Cholesky::new(system).ok_or_else(|| Error::SingularSystem {
            context: "base learner ridge system".into(),
            ridge,
        })?;
        Ok(Self {
            config: config.clone(),
            space,
            factor,
        })
    }

    pub fn config(&self) -> &BaseLearnerConfig {
        &self.config
    }

    pub fn space(&self) -> &TrainingSpace {
        &self.space
    }

    /// Ridge solution without the norm cap.
    pub fn fit_uncapped(&self, residuals: &[f64]) -> Result<RkhsFunction> {
        let n = self.space.n();
        if residuals.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                found: residuals.len(),
            });
        }
        let r = DVector::from_column_slice(residuals);
        let rhs = match &self.space {
            TrainingSpace::Kernel { .. } => r,
            TrainingSpace::Features { phi, .. } => phi.tr_mul(&r),
        };
        let sol = self.factor.solve(&rhs);
        if !sol.iter().all(|v| v.is_finite()) {
            return Err(Error::SingularSystem {
                context: "base learner solve".into(),
                ridge: self.config.ridge(),
            });
        }
        self.space.function(sol)
    }

    /// Ridge fit, rescaled onto `‖h‖ = B` if it lands outside the ball.
    pub fn fit(&self, residuals: &[f64]) -> Result<RkhsFunction> {
        let h = self.fit_uncapped(residuals)?;
        let norm = self.space.norm(&h)?;
        let cap = self.config.norm_cap;
        Ok(if norm > cap { h.scaled(cap / norm) } else { h })
    }
}

/// One-shot convenience: factorize and fit.
pub fn fit_base_learner(
    config: &BaseLearnerConfig,
    inputs: &Arc<Points>,
    residuals: &ResidualVector,
) -> Result<RkhsFunction> {
    BaseLearner::new(config, inputs)?.fit(residuals.values.as_slice())
}

// =============================================================================
// Weak-learning diagnostic
// =============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeakLearningReport {
    /// `⟨∇R̂, h⟩ / ‖∇R̂‖`.
    pub ratio: f64,
    pub inner: f64,
    pub gradient_norm: f64,
    pub passes: bool,
    /// The gradient vanished, so the condition holds trivially.
    pub vacuous: bool,
}

/// Checks `⟨∇R̂_n(F), h⟩ ≤ −c ‖∇R̂_n(F)‖`.
pub fn weak_learning_check(
    h: &RkhsFunction,
    gradient: &RkhsFunction,
    c: f64,
    ip: &impl InnerProduct,
) -> Result<WeakLearningReport> {
    if !(c > 0.0) {
        return Err(invalid(format!("weak-learning margin must be positive, got {c}")));
    }
    let gradient_norm = ip.norm(gradient)?;
    let inner = ip.inner(gradient, h)?;
    if gradient_norm == 0.0 {
        return Ok(WeakLearningReport {
            ratio: 0.0,
            inner,
            gradient_norm,
            passes: true,
            vacuous: true,
        });
    }
    let ratio = inner / gradient_norm;
    Ok(WeakLearningReport {
        ratio,
        inner,
        gradient_norm,
        passes: ratio <= -c,
        vacuous: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn points(rows: &[f64]) -> Arc<Points> {
        Arc::new(Points::new(rows.to_vec(), 1).unwrap())
    }

    #[test]
    fn residual_examples() {
        let zero = pseudo_residuals(&LossSpec::Squared, &[1.0, 2.0], &[1.0, 2.0], 0).unwrap();
        assert!(zero.values.iter().all(|v| *v == 0.0));
        let r = pseudo_residuals(&LossSpec::Squared, &[0.0], &[3.0], 0).unwrap();
        assert_eq!(r.values[0], 6.0);
        let r = pseudo_residuals(&LossSpec::Absolute, &[1.0, 3.0], &[3.0, 3.0], 0).unwrap();
        assert_eq!(r.values.as_slice(), &[1.0, 0.0]);
        assert!(pseudo_residuals(&LossSpec::Squared, &[0.0], &[1.0, 2.0], 0).is_err());
    }

    #[test]
    fn huber_is_one_lipschitz_with_matching_pieces() {
        let h = LossSpec::Huber { threshold: 0.5 };
        assert_relative_eq!(h.value(0.5, 0.0), 0.25, epsilon = 1e-15);
        assert_relative_eq!(h.value(0.5 + 1e-9, 0.0), 0.25, epsilon = 1e-8);
        assert_eq!(h.derivative(10.0, 0.0), 1.0);
        assert_eq!(h.derivative(0.25, 0.0), 0.5);
        assert_eq!(h.gradient_lipschitz(), Some(2.0));
    }

    #[test]
    fn zero_residuals_give_zero_learner() {
        let x = points(&[0.1, 0.5, 0.9]);
        let cfg = BaseLearnerConfig::kernel_ridge(KernelSpec::gaussian(0.3), 1e-2);
        let h = BaseLearner::new(&cfg, &x).unwrap().fit(&[0.0; 3]).unwrap();
        assert!(h.norm().unwrap() <= 1e-12);
    }

    #[test]
    fn two_point_kernel_ridge_matches_hand_solve() {
        let (x0, x1, sigma, lambda) = (0.2_f64, 0.7_f64, 0.4_f64, 0.05_f64);
        let k = (-(x0 - x1).powi(2) / (2.0 * sigma * sigma)).exp();
        let (r0, r1) = (1.5, -0.5);
        // [[1+2λ, k], [k, 1+2λ]]⁻¹ r via the 2×2 adjugate
        let a = 1.0 + 2.0 * lambda;
        let det = a * a - k * k;
        let c0 = (a * r0 - k * r1) / det;
        let c1 = (a * r1 - k * r0) / det;
        let cfg = BaseLearnerConfig::kernel_ridge(KernelSpec::gaussian(sigma), lambda);
        let h = BaseLearner::new(&cfg, &points(&[x0, x1])).unwrap().fit(&[r0, r1]).unwrap();
        assert_relative_eq!(h.coefficients()[0], c0, max_relative = 1e-10);
        assert_relative_eq!(h.coefficients()[1], c1, max_relative = 1e-10);
    }

    #[test]
    fn single_feature_ridge_matches_scalar_formula() {
        let x = points(&[0.1, 0.4, 0.8, 0.95]);
        let r = [0.3, -1.0, 2.0, 0.5];
        let lambda = 0.1;
        let cfg = BaseLearnerConfig::rff_ridge(1, 0.5, lambda, 17);
        let learner = BaseLearner::new(&cfg, &x).unwrap();
        let TrainingSpace::Features { phi, .. } = learner.space() else { unreachable!() };
        let num: f64 = (0..4).map(|i| phi[(i, 0)] * r[i]).sum();
        let den: f64 = (0..4).map(|i| phi[(i, 0)].powi(2)).sum::<f64>() + 4.0 * lambda;
        let h = learner.fit(&r).unwrap();
        assert_relative_eq!(h.coefficients()[0], num / den, max_relative = 1e-12);
    }

    #[test]
    fn ridge_normal_equations_hold_and_cap_applies() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let n = 40;
        let x = Arc::new(Points::new((0..n).map(|_| rng.random::<f64>()).collect(), 1).unwrap());
        let r: Vec<f64> = (0..n).map(|_| rng.random::<f64>() * 20.0 - 10.0).collect();
        let mut cfg = BaseLearnerConfig::kernel_ridge(KernelSpec::gaussian(0.1), 1e-4);
        let learner = BaseLearner::new(&cfg, &x).unwrap();
        let c = learner.fit_uncapped(&r).unwrap().coefficients().clone();
        let gram = rkhs::gram(&KernelSpec::gaussian(0.1), &x);
        let lhs = &gram * &c + &c * (n as f64 * 1e-4);
        let resid = (lhs - DVector::from_vec(r.clone())).norm() / c.norm();
        assert!(resid < 1e-8);

        cfg.norm_cap = 0.5;
        let capped = BaseLearner::new(&cfg, &x).unwrap().fit(&r).unwrap();
        assert_relative_eq!(capped.norm().unwrap(), 0.5, max_relative = 1e-9);
    }

    #[test]
    fn weak_learning_examples() {
        let x = points(&[0.0, 0.3, 0.6]);
        let space = TrainingSpace::kernel(KernelSpec::gaussian(0.5), x);
        let grad = space
            .gradient(&LossSpec::Squared, &[0.0, 0.0, 0.0], &[1.0, -1.0, 2.0])
            .unwrap();
        let gnorm = space.norm(&grad).unwrap();
        let neg = grad.scaled(-1.0);
        let rep = weak_learning_check(&neg, &grad, 0.1, &space).unwrap();
        assert_relative_eq!(rep.ratio, -gnorm, max_relative = 1e-12);
        assert!(rep.passes);

        // orthogonal direction: remove the gradient component from a section
        let g2 = RkhsFunction::kernel_section(KernelSpec::gaussian(0.5), &[0.9]).unwrap();
        let proj = rkhs::inner(&g2, &grad).unwrap() / (gnorm * gnorm);
        let orth = rkhs::combine(&[1.0, -proj], &[&g2, &grad]).unwrap();
        let rep = weak_learning_check(&orth, &grad, 1e-3, &rkhs::Exact).unwrap();
        assert!(rep.ratio.abs() < 1e-12);
        assert!(!rep.passes);

        let zero = space.zero();
        let rep = weak_learning_check(&neg, &zero, 0.1, &space).unwrap();
        assert!(rep.vacuous && rep.passes);
    }

    #[test]
    fn fitted_learner_inner_product_matches_gram_arithmetic() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 25;
        let x = Arc::new(Points::new((0..n).map(|_| rng.random::<f64>()).collect(), 1).unwrap());
        let y: Vec<f64> = (0..n).map(|i| (6.0 * x.row(i)[0]).sin()).collect();
        let k = KernelSpec::gaussian(0.2);
        let learner = BaseLearner::new(&BaseLearnerConfig::kernel_ridge(k, 1e-3), &x).unwrap();
        let preds = vec![0.0; n];
        let r = pseudo_residuals(&LossSpec::Squared, &preds, &y, 0).unwrap();
        let h = learner.fit(r.values.as_slice()).unwrap();
        let grad = learner.space().gradient(&LossSpec::Squared, &preds, &y).unwrap();
        let rep = weak_learning_check(&h, &grad, 0.1, learner.space()).unwrap();
        let gram = rkhs::gram(&k, &x);
        let direct = grad.coefficients().dot(&(&gram * h.coefficients()));
        assert_relative_eq!(rep.inner, direct, max_relative = 1e-12);
        assert!(rep.ratio < 0.0);
    }

    #[test]
    fn rff_fit_is_deterministic_per_seed() {
        let x = points(&[0.1, 0.2, 0.7]);
        let cfg = BaseLearnerConfig::rff_ridge(32, 0.3, 1e-3, 5);
        let a = BaseLearner::new(&cfg, &x).unwrap().fit(&[1.0, 0.0, -1.0]).unwrap();
        let b = BaseLearner::new(&cfg, &x).unwrap().fit(&[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(a.coefficients(), b.coefficients());
    }
}
