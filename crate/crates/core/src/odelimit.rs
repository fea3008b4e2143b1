//! Continuous-time limit of the scalar recursion.
//!
//! The target is `F'' = a F' + b F + c G(t)`. Two coefficient scalings are
//! available. [`Scaling::Literal`] uses `β = 1 + aΔt`, `γ = bΔt`,
//! `η = cΔt`; as `Δt → 0` it tracks the first-order equation
//! `F' = (a + b) F + c G`, so its distance to the second-order solution does
//! not vanish in general. [`Scaling::Consistent`] uses
//! `β = 2 + aΔt + bΔt²`, `γ = −(1 + aΔt)`, `η = cΔt²`, which is the
//! backward-difference discretization of the second-order equation and
//! converges at first order.

use serde::{Deserialize, Serialize};

use crate::diagnostics::log_log_slope;
use crate::error::{invalid, Error, Result};
use crate::par;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum Forcing {
    Zero,
    Constant { value: f64 },
    /// `sin(2π·freq·t)`.
    Sinusoid { freq: f64 },
    /// Samples `values[i]` at `t = i·dt`, linearly interpolated.
    Sampled { dt: f64, values: Vec<f64> },
}

impl Forcing {
    pub fn eval(&self, t: f64) -> f64 {
        match self {
            Forcing::Zero => 0.0,
            Forcing::Constant { value } => *value,
            Forcing::Sinusoid { freq } => (2.0 * std::f64::consts::PI * freq * t).sin(),
            Forcing::Sampled { dt, values } => {
                let x = (t / dt).max(0.0);
                let i = x.floor() as usize;
                if i + 1 >= values.len() {
                    return *values.last().unwrap_or(&0.0);
                }
                let w = x - i as f64;
                values[i] * (1.0 - w) + values[i + 1] * w
            }
        }
    }

    fn validate(&self, horizon: f64) -> Result<()> {
        match self {
            Forcing::Zero => Ok(()),
            Forcing::Constant { value } if value.is_finite() => Ok(()),
            Forcing::Sinusoid { freq } if freq.is_finite() => Ok(()),
            Forcing::Sampled { dt, values } => {
                if !(*dt > 0.0) || values.is_empty() || values.iter().any(|v| !v.is_finite()) {
                    return Err(invalid("sampled forcing needs dt > 0 and finite values"));
                }
                // a tolerance of one part in 1e9 absorbs the rounding in i·dt
                if ((values.len() - 1) as f64) * dt < horizon * (1.0 - 1e-9) {
                    return Err(invalid("sampled forcing does not cover the horizon"));
                }
                Ok(())
            }
            _ => Err(invalid("forcing parameters must be finite")),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeParams {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    #[serde(default = "zero_forcing")]
    pub forcing: Forcing,
    pub horizon: f64,
    /// `F(0)`.
    pub f0: f64,
    /// `F'(0)`.
    pub v0: f64,
}

fn zero_forcing() -> Forcing {
    Forcing::Zero
}

impl OdeParams {
    /// Unforced `F'' = −F` with `F(0) = 1`, `F'(0) = 0`; solution `cos t`.
    pub fn harmonic(horizon: f64) -> Self {
        Self { a: 0.0, b: -1.0, c: 0.0, forcing: Forcing::Zero, horizon, f0: 1.0, v0: 0.0 }
    }

    /// Unforced `F'' = −F'` with `F(0) = 0`, `F'(0) = 1`; solution `1 − e^{−t}`.
    pub fn damped(horizon: f64) -> Self {
        Self { a: -1.0, b: 0.0, c: 0.0, forcing: Forcing::Zero, horizon, f0: 0.0, v0: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon > 0.0 && self.horizon.is_finite()) {
            return Err(invalid("horizon must be positive and finite"));
        }
        if ![self.a, self.b, self.c, self.f0, self.v0].iter().all(|v| v.is_finite()) {
            return Err(invalid("ODE parameters must be finite"));
        }
        self.forcing.validate(self.horizon)
    }

    fn accel(&self, t: f64, f: f64, v: f64) -> f64 {
        self.a * v + self.b * f + self.c * self.forcing.eval(t)
    }
}

/// Samples `(t_i, F(t_i))` on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub dt: f64,
    pub values: Vec<f64>,
}

impl Trajectory {
    pub fn times(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.values.len()).map(|i| i as f64 * self.dt)
    }
}

fn grid_steps(horizon: f64, dt: f64) -> Result<usize> {
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(invalid("Δt must be positive"));
    }
    Ok((horizon / dt + 1e-9).floor() as usize)
}

/// Classical RK4 on `(F, F')` with spacing `dt_ref`.
pub fn simulate_ode(params: &OdeParams, dt_ref: f64) -> Result<Trajectory> {
    params.validate()?;
    let steps = grid_steps(params.horizon, dt_ref)?;
    let h = dt_ref;
    let (mut f, mut v) = (params.f0, params.v0);
    let mut values = Vec::with_capacity(steps + 1);
    values.push(f);
    for i in 0..steps {
        let t = i as f64 * h;
        let (k1f, k1v) = (v, params.accel(t, f, v));
        let (k2f, k2v) = (v + 0.5 * h * k1v, params.accel(t + 0.5 * h, f + 0.5 * h * k1f, v + 0.5 * h * k1v));
        let (k3f, k3v) = (v + 0.5 * h * k2v, params.accel(t + 0.5 * h, f + 0.5 * h * k2f, v + 0.5 * h * k2v));
        let (k4f, k4v) = (v + h * k3v, params.accel(t + h, f + h * k3f, v + h * k3v));
        f += h / 6.0 * (k1f + 2.0 * k2f + 2.0 * k3f + k4f);
        v += h / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v);
        if !(f.is_finite() && v.is_finite()) {
            return Err(Error::OdeBlowUp { time: t + h });
        }
        values.push(f);
    }
    Ok(Trajectory { dt: dt_ref, values })
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scaling {
    /// `β = 1 + aΔt`, `γ = bΔt`, `η = cΔt`.
    Literal,
    /// `β = 2 + aΔt + bΔt²`, `γ = −(1 + aΔt)`, `η = cΔt²`.
    #[default]
    Consistent,
}

impl Scaling {
    /// `(β, γ, η)` for the given step.
    pub fn coefficients(self, params: &OdeParams, dt: f64) -> (f64, f64, f64) {
        let (a, b, c) = (params.a, params.b, params.c);
        match self {
            Scaling::Literal => (1.0 + a * dt, b * dt, c * dt),
            Scaling::Consistent => (2.0 + a * dt + b * dt * dt, -(1.0 + a * dt), c * dt * dt),
        }
    }
}

/// Runs `F_{t+1} = β F_t + γ F_{t−1} + η G(tΔt)` from `F_0 = F(0)`,
/// `F_1 = F(0) + Δt F'(0)`. Non-finite values propagate as they are.
pub fn discretized_recursion(params: &OdeParams, dt: f64, scaling: Scaling) -> Result<Trajectory> {
    params.validate()?;
    let steps = grid_steps(params.horizon, dt)?;
    let (beta, gamma, eta) = scaling.coefficients(params, dt);
    let mut values = Vec::with_capacity(steps + 1);
    values.push(params.f0);
    if steps >= 1 {
        values.push(params.f0 + dt * params.v0);
    }
    for t in 1..steps {
        let next = beta * values[t] + gamma * values[t - 1] + eta * params.forcing.eval(t as f64 * dt);
        values.push(next);
    }
    Ok(Trajectory { dt, values })
}

/// Reference factor: the ODE is integrated with `Δt / 16`.
pub const REFERENCE_REFINEMENT: usize = 16;

/// Sup-norm distance between the recursion and the RK4 solution on the
/// recursion's grid.
pub fn sup_error(params: &OdeParams, dt: f64, scaling: Scaling) -> Result<f64> {
    let discrete = discretized_recursion(params, dt, scaling)?;
    let reference = simulate_ode(params, dt / REFERENCE_REFINEMENT as f64)?;
    let err = discrete
        .values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let r = reference.values.get(i * REFERENCE_REFINEMENT).copied().unwrap_or(f64::NAN);
            (v - r).abs()
        })
        .fold(0.0, |m: f64, e| if e.is_nan() { f64::NAN } else { m.max(e) });
    Ok(err)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LimitStudy {
    pub scaling: Scaling,
    pub dts: Vec<f64>,
    pub errors: Vec<f64>,
    /// Slope of `log(error)` against `log(Δt)`.
    pub order: f64,
}

impl LimitStudy {
    /// `error(Δt_i) / error(Δt_{i+1})` for consecutive grid sizes.
    pub fn ratios(&self) -> Vec<f64> {
        self.errors.windows(2).map(|w| w[0] / w[1]).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s = String::from("dt,error\n");
        for (dt, e) in self.dts.iter().zip(&self.errors) {
            s.push_str(&format!("{dt:.16e},{e:.16e}\n"));
        }
        s
    }
}

/// `{1/64, 1/128, …, 1/1024}`.
pub fn default_dts() -> Vec<f64> {
    (6..=10).map(|k| 0.5f64.powi(k)).collect()
}

/// Errors for each `Δt` (computed in parallel) and the fitted order.
pub fn limit_study(params: &OdeParams, dts: &[f64], scaling: Scaling) -> Result<LimitStudy> {
    params.validate()?;
    if dts.len() < 2 {
        return Err(invalid("limit study needs at least two step sizes"));
    }
    if dts.windows(2).any(|w| !(w[1] < w[0])) || !(dts[dts.len() - 1] > 0.0) {
        return Err(invalid("step sizes must be positive and strictly decreasing"));
    }
    let errors = par::map_slice(dts, |&dt| sup_error(params, dt, scaling))
        .into_iter()
        .collect::<Result<Vec<_>>>()?;
    if errors.iter().any(|e| !e.is_finite()) {
        return Err(invalid("non-finite error in limit study"));
    }
    let order = log_log_slope(dts, &errors)?;
    Ok(LimitStudy { scaling, dts: dts.to_vec(), errors, order })
}

/// Vector mode: one study per probe point, each driven by its own sampled
/// forcing (for instance a learner trace evaluated at that point).
pub fn limit_study_per_probe(
    params: &OdeParams,
    forcings: &[Forcing],
    dts: &[f64],
    scaling: Scaling,
) -> Result<Vec<LimitStudy>> {
    par::map_slice(forcings, |g| {
        let p = OdeParams { forcing: g.clone(), ..params.clone() };
        limit_study(&p, dts, scaling)
    })
    .into_iter()
    .collect()
}

/// `F² + (ΔF/Δt)²/|b|` along a trajectory; constant for the exact unforced,
/// undamped solution.
pub fn discrete_energy(traj: &Trajectory, b: f64) -> Vec<f64> {
    traj.values
        .windows(2)
        .map(|w| {
            let v = (w[1] - w[0]) / traj.dt;
            w[1] * w[1] + v * v / b.abs()
        })
        .collect()
}

/// Largest relative deviation of the discrete energy from its first value
/// over one period `2π/√|b|` (requires `a = c = 0`, `b < 0`).
pub fn energy_drift(params: &OdeParams, dt: f64, scaling: Scaling) -> Result<f64> {
    if params.a != 0.0 || params.c != 0.0 || !(params.b < 0.0) {
        return Err(invalid("energy check needs a = c = 0 and b < 0"));
    }
    let period = 2.0 * std::f64::consts::PI / (-params.b).sqrt();
    let p = OdeParams { horizon: period, ..params.clone() };
    let energy = discrete_energy(&discretized_recursion(&p, dt, scaling)?, params.b);
    let e0 = *energy.first().ok_or_else(|| invalid("Δt exceeds one period"))?;
    Ok(energy.iter().map(|e| (e - e0).abs() / e0).fold(0.0, f64::max))
}

/// Input document of the `ode` command.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OdeStudyConfig {
    #[serde(flatten)]
    pub params: OdeParams,
    #[serde(default)]
    pub dts: Option<Vec<f64>>,
    #[serde(default)]
    pub scaling: Scaling,
}

impl OdeStudyConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text)?;
        cfg.params.validate()?;
        Ok(cfg)
    }

    pub fn run(&self) -> Result<LimitStudy> {
        let dts = self.dts.clone().unwrap_or_else(default_dts);
        limit_study(&self.params, &dts, self.scaling)
    }
}
