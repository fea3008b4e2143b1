//! Computable theory checks.
//!
//! Bound values are computed from run quantities (loss constants, kernel
//! bound, step sizes, companion-matrix powers) and compared with what the run
//! actually did: the train/test gap, the effect of replacing one sample, the
//! per-step change of the regularized risk, and the Cauchy behaviour of the
//! iterates.

use serde::{Deserialize, Serialize};

use crate::algorithms::{train, TraceRecord, TrainConfig, TrainedEnsemble};
use crate::error::{invalid, Error, Result};
use crate::rkhs::{evaluate, Dataset};
use crate::spectral::{power_envelope, CompanionMatrix};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundInputs {
    /// Lipschitz constant `L` of the loss.
    pub lipschitz: f64,
    /// Bound `M` on the loss values (for the concentration term).
    pub loss_bound: f64,
    pub kappa: f64,
    pub norm_cap: f64,
    /// Base ridge `λ_b`.
    pub ridge: f64,
    pub n: usize,
    pub delta: f64,
    pub c_alpha: f64,
    pub rho: f64,
}

impl BoundInputs {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("lipschitz", self.lipschitz),
            ("kappa", self.kappa),
            ("norm_cap", self.norm_cap),
            ("ridge", self.ridge),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if self.n == 0 {
            return Err(invalid("n must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(invalid(format!("delta must lie in (0, 1), got {}", self.delta)));
        }
        Ok(())
    }
}

/// Multipliers of the three terms of the combined bound.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
}

impl Default for BoundConstants {
    fn default() -> Self {
        Self {
            c1: 2.0,
            c2: 1.0,
            c3: 3.0,
        }
    }
}

/// `(B C_α κ / √n) Σ_k η_k`.
pub fn rademacher_bound(inputs: &BoundInputs, steps: &[f64]) -> f64 {
    let sum: f64 = steps.iter().sum();
    inputs.norm_cap * inputs.c_alpha * inputs.kappa / (inputs.n as f64).sqrt() * sum
}

/// `β_T = (2 L² κ² / (λ_b n)) Σ_{k<T} η_k ‖A^{T−1−k}‖` with exact matrix-power
/// norms from `envelope`.
pub fn stability_bound(inputs: &BoundInputs, steps: &[f64], envelope: &[f64], t: usize) -> Result<f64> {
    if t == 0 || steps.len() < t {
        return Err(invalid(format!("need {t} steps, have {}", steps.len())));
    }
    if envelope.len() < t {
        return Err(invalid(format!(
            "power envelope has {} entries, {t} needed (matrix powers overflowed?)",
            envelope.len()
        )));
    }
    let l = inputs.lipschitz;
    let k2 = inputs.kappa * inputs.kappa;
    let sum: f64 = (0..t).map(|k| steps[k] * envelope[t - 1 - k]).sum();
    Ok(2.0 * l * l * k2 / (inputs.ridge * inputs.n as f64) * sum)
}

/// Bound on `sup_x |ℓ(F_T(x), y) − ℓ(F'_T(x), y)|` when one sample changes.
///
/// β_T bounds `‖F_T − F'_T‖_H`; the loss moves by at most `L κ` times that,
/// and the `L` is already folded into β_T, leaving one extra `κ`.
pub fn loss_stability_bound(inputs: &BoundInputs, beta_t: f64) -> f64 {
    inputs.kappa * beta_t
}

/// `c₁ L R_n + c₂ β_loss + c₃ M √(log(2/δ) / (2n))`.
pub fn combined_bound(
    inputs: &BoundInputs,
    rademacher: f64,
    loss_stability: f64,
    constants: &BoundConstants,
) -> f64 {
    let conc = ((2.0 / inputs.delta).ln() / (2.0 * inputs.n as f64)).sqrt();
    constants.c1 * inputs.lipschitz * rademacher
        + constants.c2 * loss_stability
        + constants.c3 * inputs.loss_bound * conc
}

/// `C ‖Z₁‖ + C B Σ_{k≥1} η_k` with `C = max_k ‖A^k‖` over the envelope.
pub fn boundedness_bound(envelope: &[f64], z1_norm: f64, norm_cap: f64, steps: &[f64]) -> f64 {
    let c = envelope.iter().copied().fold(0.0, f64::max);
    let tail: f64 = steps.iter().skip(1).sum();
    c * z1_norm + c * norm_cap * tail
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BoundReport {
    pub inputs: BoundInputs,
    pub constants: BoundConstants,
    pub rademacher: f64,
    pub stability: f64,
    pub loss_stability: f64,
    pub combined: f64,
    pub train_risk: f64,
    pub test_risk: f64,
    pub gap: f64,
    /// `|test − train| ≤ combined`.
    pub holds: bool,
}

/// Fills every bound from a finished run and its data.
pub fn bound_report(
    ensemble: &TrainedEnsemble,
    train_set: &Dataset,
    test_set: &Dataset,
    delta: f64,
    constants: BoundConstants,
) -> Result<BoundReport> {
    let loss = ensemble.config.loss;
    let t = ensemble.trace.len();
    let train_pred = evaluate(&ensemble.predictor, train_set.inputs())?;
    let test_pred = evaluate(&ensemble.predictor, test_set.inputs())?;
    let train_risk = loss.risk(train_pred.as_slice(), train_set.targets());
    let test_risk = loss.risk(test_pred.as_slice(), test_set.targets());

    let max_abs = |v: &[f64]| v.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
    let max_y = max_abs(train_set.targets()).max(max_abs(test_set.targets()));
    let max_pred = ensemble
        .trace
        .iter()
        .map(|r| r.max_abs_pred)
        .fold(max_abs(test_pred.as_slice()), f64::max);
    let loss_bound = train_pred
        .iter()
        .zip(train_set.targets())
        .chain(test_pred.iter().zip(test_set.targets()))
        .map(|(z, y)| loss.value(*z, *y))
        .fold(0.0, f64::max);

    let inputs = BoundInputs {
        lipschitz: loss.lipschitz(max_y, max_pred),
        loss_bound,
        kappa: ensemble.config.base.kappa(train_set.dim()),
        norm_cap: ensemble.config.base.norm_cap,
        ridge: ensemble.config.base.ridge(),
        n: train_set.len(),
        delta,
        c_alpha: ensemble.alpha.bound.c_alpha(t),
        rho: crate::spectral::spectral_radius(&ensemble.companion),
    };
    assemble_report(inputs, constants, &ensemble.steps, &ensemble.companion, train_risk, test_risk)
}

/// Evaluates every bound term for given inputs and compares the combined
/// value with the observed risk gap.
pub fn assemble_report(
    inputs: BoundInputs,
    constants: BoundConstants,
    steps: &[f64],
    companion: &CompanionMatrix,
    train_risk: f64,
    test_risk: f64,
) -> Result<BoundReport> {
    inputs.validate()?;
    let t = steps.len();
    let envelope = power_envelope(companion, t);
    let rademacher = rademacher_bound(&inputs, steps);
    let stability = stability_bound(&inputs, steps, &envelope, t).unwrap_or(f64::INFINITY);
    let loss_stability = loss_stability_bound(&inputs, stability);
    let combined = combined_bound(&inputs, rademacher, loss_stability, &constants);
    let gap = (test_risk - train_risk).abs();
    Ok(BoundReport {
        inputs,
        constants,
        rademacher,
        stability,
        loss_stability,
        combined,
        train_risk,
        test_risk,
        gap,
        holds: gap <= combined,
    })
}

/// Trains on `dataset` and on a copy with row `index` replaced, and returns
/// `max_p |ℓ(F_T(x_p), y_p) − ℓ(F'_T(x_p), y_p)|` over the probe set.
pub fn empirical_loo_perturbation(
    config: &TrainConfig,
    dataset: &Dataset,
    index: usize,
    replacement: (&[f64], f64),
    probe: &Dataset,
) -> Result<f64> {
    let swapped = dataset.with_replaced(index, replacement.0, replacement.1)?;
    let runs = crate::par::map_slice(&[dataset, &swapped], |d| train(config, d, None));
    let mut fits = Vec::with_capacity(2);
    for run in runs {
        fits.push(run?);
    }
    let a = evaluate(&fits[0].predictor, probe.inputs())?;
    let b = evaluate(&fits[1].predictor, probe.inputs())?;
    let loss = config.loss;
    Ok(probe
        .targets()
        .iter()
        .enumerate()
        .map(|(p, y)| (loss.value(a[p], *y) - loss.value(b[p], *y)).abs())
        .fold(0.0, f64::max))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DescentInputs {
    /// Regularization weight of `J = R̂_n + λ‖F‖²`.
    pub lambda: f64,
    /// Weak-learning margin `c`.
    pub c: f64,
    pub lipschitz: f64,
    /// Lipschitz constant of the loss derivative (may be infinite).
    pub smoothness: f64,
}

/// Per-row `J(F_t) − [J(F_{t−1}) − η(c − L²η/(2λ))‖∇R̂_n(F_{t−1})‖² + (Mη²/2)‖h‖²]`.
/// Nonpositive slack means the descent inequality held for that step.
pub fn descent_check(trace: &[TraceRecord], initial_risk: f64, inputs: &DescentInputs) -> Vec<f64> {
    let j = |risk: f64, norm: f64| risk + inputs.lambda * norm * norm;
    let mut prev = j(initial_risk, 0.0);
    trace
        .iter()
        .map(|r| {
            let next = j(r.train_risk, r.f_norm);
            let eta = r.eta;
            let decrease = eta * (inputs.c - inputs.lipschitz.powi(2) * eta / (2.0 * inputs.lambda))
                * r.grad_norm
                * r.grad_norm;
            let curvature = if eta == 0.0 {
                0.0
            } else {
                inputs.smoothness * eta * eta / 2.0 * r.h_norm * r.h_norm
            };
            let slack = next - (prev - decrease + curvature);
            prev = next;
            slack
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceVerdict {
    pub converged: bool,
    /// Largest increment inside the final window.
    pub max_recent: f64,
    /// Trace row (1-based `t`) at which a full window first stayed below tol.
    pub first_converged_at: Option<usize>,
}

/// Cauchy monitor over `‖F_t − F_{t−1}‖`: converged when every increment in
/// the last `window` rows is below `tol`.
pub fn convergence_monitor(increments: &[f64], window: usize, tol: f64) -> Result<ConvergenceVerdict> {
    if window == 0 {
        return Err(invalid("window must be at least 1"));
    }
    if !(tol > 0.0) {
        return Err(invalid(format!("tolerance must be positive, got {tol}")));
    }
    if increments.len() < window {
        return Ok(ConvergenceVerdict {
            converged: false,
            max_recent: f64::INFINITY,
            first_converged_at: None,
        });
    }
    let max_recent = increments[increments.len() - window..]
        .iter()
        .copied()
        .fold(0.0, f64::max);
    let mut run = 0;
    let mut first = None;
    for (i, inc) in increments.iter().enumerate() {
        run = if *inc < tol { run + 1 } else { 0 };
        if run >= window && first.is_none() {
            first = Some(i + 1);
        }
    }
    Ok(ConvergenceVerdict {
        converged: max_recent < tol,
        max_recent,
        first_converged_at: first,
    })
}

/// Least-squares slope of `log y` against `log x`.
pub fn log_log_slope(xs: &[f64], ys: &[f64]) -> Result<f64> {
    if xs.len() != ys.len() || xs.len() < 2 {
        return Err(Error::DimensionMismatch {
            expected: xs.len().max(2),
            found: ys.len(),
        });
    }
    let lx: Vec<f64> = xs.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = ys.iter().map(|v| v.ln()).collect();
    Ok(linear_slope(&lx, &ly))
}

pub(crate) fn linear_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    num / den
}
