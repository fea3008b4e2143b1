//! The recursion engine.
//!
//! `F_{t+1} = Σ_k θ_{t,k} F_{t−k} + η_t h_t` with `F_0 = F_{−1} = … = 0`, so the
//! first step yields `F_1 = η_0 h_0` without special casing.
//!
//! Unrolling the recursion writes every iterate as a combination of the base
//! learners, `F_T = Σ_k α_{T,k} h_k`; [`alpha_matrix`] computes those weights
//! and [`reconstruct`] rebuilds `F_T` from them.

use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par;
use crate::rkhs::{combine, combine_with, CombineOptions, InnerProduct, RkhsFunction};
use crate::spectral::{spectral_radius, CompanionMatrix, StepSchedule};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Coefficients {
    Constant(Vec<f64>),
    /// One vector per iteration; the last one repeats past the end.
    PerIteration(Vec<Vec<f64>>),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RecursionSchedule {
    pub coefficients: Coefficients,
    pub steps: StepSchedule,
}

impl RecursionSchedule {
    pub fn new(coefficients: Coefficients, steps: StepSchedule) -> Result<Self> {
        let vectors: Vec<&Vec<f64>> = match &coefficients {
            Coefficients::Constant(v) => vec![v],
            Coefficients::PerIteration(vs) => vs.iter().collect(),
        };
        let Some(first) = vectors.first() else {
            return Err(invalid("per-iteration coefficient list is empty"));
        };
        let m = first.len();
        if m == 0 {
            return Err(invalid("recursion order must be at least 1"));
        }
        for v in &vectors {
            if v.len() != m {
                return Err(Error::DimensionMismatch {
                    expected: m,
                    found: v.len(),
                });
            }
            if let Some(c) = v.iter().find(|c| !c.is_finite()) {
                return Err(invalid(format!("non-finite recursion coefficient {c}")));
            }
        }
        Ok(Self {
            coefficients,
            steps,
        })
    }

    pub fn constant(theta: Vec<f64>, steps: StepSchedule) -> Result<Self> {
        Self::new(Coefficients::Constant(theta), steps)
    }

    /// `(β, γ) = (1, 1)`.
    pub fn fibonacci(steps: StepSchedule) -> Self {
        Self {
            coefficients: Coefficients::Constant(vec![1.0, 1.0]),
            steps,
        }
    }

    pub fn order(&self) -> usize {
        self.theta(0).len()
    }

    pub fn theta(&self, t: usize) -> &[f64] {
        match &self.coefficients {
            Coefficients::Constant(v) => v,
            Coefficients::PerIteration(vs) => &vs[t.min(vs.len() - 1)],
        }
    }

    pub fn eta(&self, t: usize) -> f64 {
        self.steps.eta(t)
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    /// Companion matrix of the constant coefficients, or of the iteration
    /// with the largest spectral radius.
    pub fn companion(&self) -> CompanionMatrix {
        let build = |v: &[f64]| CompanionMatrix::new(v.to_vec()).expect("validated coefficients");
        match &self.coefficients {
            Coefficients::Constant(v) => build(v),
            Coefficients::PerIteration(vs) => vs
                .iter()
                .map(|v| build(v))
                .max_by(|a, b| spectral_radius(a).total_cmp(&spectral_radius(b)))
                .expect("nonempty"),
        }
    }
}

// =============================================================================
// State and update
// =============================================================================

#[derive(Clone, Debug)]
pub struct EnsembleState {
    /// `(F_t, F_{t−1}, …, F_{t−m+1})`.
    pub history: Vec<RkhsFunction>,
    pub t: usize,
}

impl EnsembleState {
    /// `t = 0` with every history slot equal to `zero`.
    pub fn initial(zero: RkhsFunction, order: usize) -> Self {
        Self {
            history: vec![zero; order],
            t: 0,
        }
    }

    pub fn head(&self) -> &RkhsFunction {
        &self.history[0]
    }
}

/// Applies one update with learner `h`; `state.t` selects `θ_t` and `η_t`.
pub fn step(
    state: &EnsembleState,
    schedule: &RecursionSchedule,
    h: &RkhsFunction,
) -> Result<EnsembleState> {
    let theta = schedule.theta(state.t);
    if state.history.len() != theta.len() {
        return Err(Error::DimensionMismatch {
            expected: theta.len(),
            found: state.history.len(),
        });
    }
    if state.t >= schedule.len() {
        return Err(invalid(format!(
            "step {} past the end of a {}-step schedule",
            state.t,
            schedule.len()
        )));
    }
    let mut coeffs = theta.to_vec();
    coeffs.push(schedule.eta(state.t));
    let mut funcs: Vec<&RkhsFunction> = state.history.iter().collect();
    funcs.push(h);
    // successive iterates share almost all anchors; merging them keeps the
    // expansion linear in the number of learners
    let head = combine_with(&coeffs, &funcs, CombineOptions { dedup_anchors: true })?;
    let mut history = Vec::with_capacity(state.history.len());
    history.push(head);
    history.extend(state.history[..state.history.len() - 1].iter().cloned());
    Ok(EnsembleState {
        history,
        t: state.t + 1,
    })
}

// =============================================================================
// α-representation
// =============================================================================

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaBound {
    /// `ρ̂ = ρ(A) + 0.01`.
    pub rho_hat: f64,
    /// `max |α_{T,k}| / (ρ̂^{T−1−k} η_k)` over the burn-in rows.
    pub burn_in_c: f64,
    /// The same maximum over all rows.
    pub fitted_c: f64,
    /// Whether the burn-in constant already covers every row.
    pub holds: bool,
}

impl AlphaBound {
    /// `C_α` with `Σ_k |α_{T,k}| ≤ C_α Σ_k η_k` for the final row `T`.
    pub fn c_alpha(&self, t_final: usize) -> f64 {
        self.fitted_c * self.rho_hat.powi(t_final as i32 - 1).max(1.0)
    }
}

/// Lower-triangular `α_{T,k}`, rows `T = 1..=T_max`, columns `k < T`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AlphaMatrix {
    rows: Vec<Vec<f64>>,
    pub bound: AlphaBound,
}

impl AlphaMatrix {
    /// Wraps precomputed rows (row `T` has length `T`).
    pub(crate) fn from_rows(rows: Vec<Vec<f64>>, bound: AlphaBound) -> Self {
        debug_assert!(rows.iter().enumerate().all(|(i, r)| r.len() == i + 1));
        Self { rows, bound }
    }

    pub fn t_max(&self) -> usize {
        self.rows.len()
    }

    /// Row `T` (1-based), length `T`.
    pub fn row(&self, t: usize) -> &[f64] {
        &self.rows[t - 1]
    }

    pub fn get(&self, t: usize, k: usize) -> f64 {
        if t == 0 || k >= t {
            0.0
        } else {
            self.rows[t - 1][k]
        }
    }
}

const ALPHA_BURN_IN: usize = 10;

/// Fills `α_{T+1,k} = Σ_j θ_{T,j} α_{T−j,k}` with `α_{T+1,T} = η_T`.
pub fn alpha_matrix(schedule: &RecursionSchedule, t_max: usize) -> Result<AlphaMatrix> {
    if t_max == 0 || t_max > schedule.len() {
        return Err(invalid(format!(
            "alpha matrix size {t_max} outside 1..={}",
            schedule.len()
        )));
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(t_max);
    for t in 0..t_max {
        let theta = schedule.theta(t);
        let mut row = vec![0.0; t + 1];
        for (k, slot) in row.iter_mut().enumerate().take(t) {
            let mut acc = 0.0;
            for (j, th) in theta.iter().enumerate() {
                // α_{t−j, k}, zero unless k < t − j
                if t >= j + 1 && k < t - j {
                    acc += th * rows[t - j - 1][k];
                }
            }
            *slot = acc;
        }
        row[t] = schedule.eta(t);
        rows.push(row);
    }
    let rho_hat = spectral_radius(&schedule.companion()) + 0.01;
    let mut burn_in_c: f64 = 0.0;
    let mut fitted_c: f64 = 0.0;
    for (i, row) in rows.iter().enumerate() {
        let t = i + 1;
        for (k, a) in row.iter().enumerate() {
            let ratio = a.abs() / (rho_hat.powi((t - 1 - k) as i32) * schedule.eta(k));
            if ratio.is_finite() {
                fitted_c = fitted_c.max(ratio);
                if t <= ALPHA_BURN_IN {
                    burn_in_c = burn_in_c.max(ratio);
                }
            }
        }
    }
    Ok(AlphaMatrix {
        rows,
        bound: AlphaBound {
            rho_hat,
            burn_in_c,
            fitted_c,
            holds: fitted_c <= burn_in_c * (1.0 + 1e-9),
        },
    })
}

/// `F_T = Σ_k α_{T,k} h_k`.
pub fn reconstruct(alpha: &AlphaMatrix, learners: &[RkhsFunction], t: usize) -> Result<RkhsFunction> {
    if t == 0 || t > alpha.t_max() {
        return Err(invalid(format!("row {t} outside 1..={}", alpha.t_max())));
    }
    if learners.len() < t {
        return Err(Error::DimensionMismatch {
            expected: t,
            found: learners.len(),
        });
    }
    let funcs: Vec<&RkhsFunction> = learners[..t].iter().collect();
    combine(alpha.row(t), &funcs)
}

// =============================================================================
// Orthogonalization
// =============================================================================

/// Members whose component outside the current span is below this fraction
/// of their norm are treated as already in the span.
pub const PRUNE_TOL: f64 = 1e-10;
/// A projected learner smaller than this fraction of the original is below
/// numerical resolution and is returned as exactly zero.
pub const SNAP_TOL: f64 = 1e-8;

/// Orthonormal basis of a growing span, built by modified Gram–Schmidt with
/// one reorthogonalization pass.
#[derive(Clone, Debug, Default)]
pub struct SpanBasis {
    basis: Vec<RkhsFunction>,
}

impl SpanBasis {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn rank(&self) -> usize {
        self.basis.len()
    }

    fn strip(&self, f: &RkhsFunction, ip: &impl InnerProduct) -> Result<RkhsFunction> {
        let mut r = f.clone();
        for _pass in 0..2 {
            for q in &self.basis {
                let c = ip.inner(&r, q)?;
                if c != 0.0 {
                    r = combine(&[1.0, -c], &[&r, q])?;
                }
            }
        }
        Ok(r)
    }

    /// Adds `f` to the span; returns whether it contributed a new direction.
    pub fn push(&mut self, f: &RkhsFunction, ip: &impl InnerProduct) -> Result<bool> {
        let norm = ip.norm(f)?;
        if norm == 0.0 || !norm.is_finite() {
            return Ok(false);
        }
        let unit = f.scaled(1.0 / norm);
        let r = self.strip(&unit, ip)?;
        let rn = ip.norm(&r)?;
        if rn < PRUNE_TOL {
            return Ok(false);
        }
        self.basis.push(r.scaled(1.0 / rn));
        Ok(true)
    }

    /// `h − P_span(h)`, snapped to zero when the remainder is negligible.
    pub fn project_out(&self, h: &RkhsFunction, ip: &impl InnerProduct) -> Result<RkhsFunction> {
        let r = self.strip(h, ip)?;
        let hn = ip.norm(h)?;
        if ip.norm(&r)? <= SNAP_TOL * hn {
            return Ok(h.zero_like());
        }
        Ok(r)
    }
}

/// Removes from `h` its projection onto `span(history)`.
pub fn orthogonalize(
    h: &RkhsFunction,
    history: &[RkhsFunction],
    ip: &impl InnerProduct,
) -> Result<RkhsFunction> {
    let mut basis = SpanBasis::new();
    for f in history {
        basis.push(f, ip)?;
    }
    basis.project_out(h, ip)
}

// =============================================================================
// Rao–Blackwell averaging
// =============================================================================

/// Equal-weight average of `m` draws. Draws may run in parallel; they are
/// combined in draw order, so the result does not depend on scheduling.
pub fn rao_blackwell_average<S>(sampler: S, m: usize) -> Result<RkhsFunction>
where
    S: Fn(usize) -> Result<RkhsFunction> + Sync + Send,
{
    if m == 0 {
        return Err(invalid("Rao–Blackwell average needs at least one draw"));
    }
    let draws = par::map_range(m, &sampler)
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    if m == 1 {
        return Ok(draws.into_iter().next().expect("one draw"));
    }
    let refs: Vec<&RkhsFunction> = draws.iter().collect();
    combine(&vec![1.0 / m as f64; m], &refs)
}
