//! Companion matrices, their spectra, and step-size schedules.
//!
//! For a recursion `F_{t+1} = Σ_k θ_k F_{t-k} + η_t h_t` the state
//! `Z_t = (F_t, …, F_{t-m+1})` evolves by the companion matrix with first row
//! `θ` and ones on the subdiagonal. Its spectral radius decides whether the
//! homogeneous recursion decays (`ρ < 1`) or grows like `ρ^t`.

use nalgebra::{Complex, DMatrix};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Result};
use crate::PHI;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CompanionMatrix {
    coefficients: Vec<f64>,
}

impl CompanionMatrix {
    pub fn new(coefficients: Vec<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(invalid("companion matrix needs at least one coefficient"));
        }
        if let Some(c) = coefficients.iter().find(|c| !c.is_finite()) {
            return Err(invalid(format!("non-finite recursion coefficient {c}")));
        }
        Ok(Self { coefficients })
    }

    /// `(β, γ)` for the second-order recursion.
    pub fn second_order(beta: f64, gamma: f64) -> Result<Self> {
        Self::new(vec![beta, gamma])
    }

    pub fn fibonacci() -> Self {
        Self {
            coefficients: vec![1.0, 1.0],
        }
    }

    pub fn order(&self) -> usize {
        self.coefficients.len()
    }

    pub fn coefficients(&self) -> &[f64] {
        &self.coefficients
    }

    pub fn matrix(&self) -> DMatrix<f64> {
        let m = self.order();
        DMatrix::from_fn(m, m, |i, j| match i {
            0 => self.coefficients[j],
            _ if j + 1 == i => 1.0,
            _ => 0.0,
        })
    }

    /// `p(λ) = λ^m − Σ_k θ_k λ^{m−1−k}` and `p'(λ)` by Horner's rule.
    fn poly_and_derivative(&self, z: Complex<f64>) -> (Complex<f64>, Complex<f64>) {
        let mut p = Complex::new(1.0, 0.0);
        let mut dp = Complex::new(0.0, 0.0);
        for &c in &self.coefficients {
            dp = dp * z + p;
            p = p * z - c;
        }
        (p, dp)
    }
}

/// All `m` roots of the characteristic polynomial, sorted by descending
/// modulus.
///
/// The second-order case uses the closed form, arranged so that a root at
/// exactly ±1 is found exactly whenever `β + γ − 1` (or `1 + β − γ`) rounds
/// to zero. Higher orders take the companion matrix's eigenvalues and polish
/// each with a few Newton steps on the polynomial.
pub fn characteristic_roots(cm: &CompanionMatrix) -> Vec<Complex<f64>> {
    let mut roots = match *cm.coefficients() {
        [theta] => vec![Complex::new(theta, 0.0)],
        [beta, gamma] => second_order_roots(beta, gamma).to_vec(),
        _ => {
            let eig = cm.matrix().complex_eigenvalues();
            eig.iter().map(|&z| polish(cm, z)).collect()
        }
    };
    roots.sort_by(|a, b| b.norm().total_cmp(&a.norm()));
    roots
}

fn second_order_roots(beta: f64, gamma: f64) -> [Complex<f64>; 2] {
    let disc = beta * beta + 4.0 * gamma;
    if disc < 0.0 {
        let im = (-disc).sqrt() / 2.0;
        return [Complex::new(beta / 2.0, im), Complex::new(beta / 2.0, -im)];
    }
    let s = disc.sqrt();
    // λ₊ − 1 = 2(β+γ−1)/(s+2−β) and λ₋ + 1 = 2(1+β−γ)/(β+2+s) avoid
    // cancellation near the unit circle
    let plus = if s + 2.0 - beta >= 0.5 {
        1.0 + 2.0 * (beta + gamma - 1.0) / (s + 2.0 - beta)
    } else {
        (beta + s) / 2.0
    };
    let minus = if beta + 2.0 + s >= 0.5 {
        -1.0 + 2.0 * (1.0 + beta - gamma) / (beta + 2.0 + s)
    } else {
        (beta - s) / 2.0
    };
    [Complex::new(plus, 0.0), Complex::new(minus, 0.0)]
}

fn polish(cm: &CompanionMatrix, mut z: Complex<f64>) -> Complex<f64> {
    for _ in 0..8 {
        let (p, dp) = cm.poly_and_derivative(z);
        if dp.norm() == 0.0 {
            break;
        }
        let next = z - p / dp;
        if !next.re.is_finite() || !next.im.is_finite() {
            break;
        }
        // keep the step only if it does not increase the residual
        if cm.poly_and_derivative(next).0.norm() > p.norm() {
            break;
        }
        z = next;
    }
    z
}

pub fn spectral_radius(cm: &CompanionMatrix) -> f64 {
    if let [beta, gamma] = *cm.coefficients() {
        if beta * beta + 4.0 * gamma < 0.0 {
            // complex pair with |λ|² = λ₊λ₋ = −γ
            return (-gamma).sqrt();
        }
    }
    characteristic_roots(cm)
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

/// Strict: `ρ = 1` is unstable.
pub fn is_stable(cm: &CompanionMatrix) -> bool {
    spectral_radius(cm) < 1.0
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Root {
    pub re: f64,
    pub im: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralReport {
    pub coefficients: Vec<f64>,
    pub eigenvalues: Vec<Root>,
    pub spectral_radius: f64,
    pub stable: bool,
    /// `max(0, 1 − ρ)`.
    pub margin: f64,
}

pub fn spectral_report(cm: &CompanionMatrix) -> SpectralReport {
    let roots = characteristic_roots(cm);
    let radius = spectral_radius(cm);
    SpectralReport {
        coefficients: cm.coefficients().to_vec(),
        eigenvalues: roots.iter().map(|z| Root { re: z.re, im: z.im }).collect(),
        spectral_radius: radius,
        stable: radius < 1.0,
        margin: (1.0 - radius).max(0.0),
    }
}

/// Operator 2-norms `‖A^k‖₂` for `k = 0..=k_max`, truncated at the last
/// finite entry when powers overflow.
pub fn power_envelope(cm: &CompanionMatrix, k_max: usize) -> Vec<f64> {
    let a = cm.matrix();
    let m = cm.order();
    let mut power = DMatrix::<f64>::identity(m, m);
    let mut out = Vec::with_capacity(k_max + 1);
    for k in 0..=k_max {
        if !power.iter().all(|v| v.is_finite()) {
            break;
        }
        let norm = power.singular_values().max();
        if !norm.is_finite() {
            break;
        }
        out.push(norm);
        if k < k_max {
            power = &a * power;
        }
    }
    out
}

/// Dominant eigenvalue modulus by power iteration on the companion matrix.
/// Independent of the eigen-solver; the tests and property checks use it as
/// an oracle. A dominant complex pair (or a ± pair) is recovered from a
/// two-term fit on the last iterates.
pub fn power_iteration_radius(cm: &CompanionMatrix, iterations: usize) -> f64 {
    let a = cm.matrix();
    let m = cm.order();
    let mut v = nalgebra::DVector::from_fn(m, |i, _| 1.0 + 0.1 * i as f64);
    for _ in 0..iterations {
        let w = &a * &v;
        let n = w.norm();
        if n == 0.0 {
            return 0.0;
        }
        v = w / n;
    }
    let w1 = &a * &v;
    let w2 = &a * &w1;
    // dominant real eigenvalue: v is (numerically) an eigenvector
    let r = w1.dot(&v) / v.dot(&v);
    if (&w1 - &v * r).norm() <= 1e-12 * w1.norm().max(f64::MIN_POSITIVE) {
        return r.abs();
    }
    // otherwise v lives in a 2-d invariant subspace: fit w2 = p w1 + q v
    // and take the larger root of λ² − pλ − q
    let basis = DMatrix::from_columns(&[w1.clone(), v.clone()]);
    let Some(coef) = basis.svd(true, true).solve(&w2, 1e-300).ok() else {
        return r.abs();
    };
    second_order_roots(coef[0], coef[1])
        .iter()
        .map(|z| z.norm())
        .fold(0.0, f64::max)
}

// =============================================================================
// Step schedules
// =============================================================================

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StepSpec {
    Constant { eta0: f64 },
    /// `η_t = η₀ r^t` with `r ∈ (0, 1]`.
    Geometric { eta0: f64, ratio: f64 },
    /// `η_t = η₀ φ^{−t}`.
    Golden { eta0: f64 },
    Explicit { steps: Vec<f64> },
}

impl StepSpec {
    pub fn eta0(&self) -> f64 {
        match self {
            StepSpec::Constant { eta0 } | StepSpec::Golden { eta0 } => *eta0,
            StepSpec::Geometric { eta0, .. } => *eta0,
            StepSpec::Explicit { steps } => steps.first().copied().unwrap_or(0.0),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StepSchedule {
    pub spec: StepSpec,
    pub steps: Vec<f64>,
}

impl StepSchedule {
    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }

    pub fn eta(&self, t: usize) -> f64 {
        self.steps[t]
    }

    pub fn sum(&self) -> f64 {
        self.steps.iter().sum()
    }
}

/// Materializes `η_0 … η_{T−1}`. Explicit lists must hold at least `T`
/// entries and are truncated to `T`.
pub fn make_schedule(spec: &StepSpec, t_len: usize) -> Result<StepSchedule> {
    if t_len == 0 {
        return Err(invalid("schedule length must be at least 1"));
    }
    let positive = |eta0: f64| {
        if eta0 > 0.0 && eta0.is_finite() {
            Ok(())
        } else {
            Err(invalid(format!("initial step must be positive, got {eta0}")))
        }
    };
    let steps = match *spec {
        StepSpec::Constant { eta0 } => {
            positive(eta0)?;
            vec![eta0; t_len]
        }
        StepSpec::Geometric { eta0, ratio } => {
            positive(eta0)?;
            if !(ratio > 0.0 && ratio <= 1.0) {
                return Err(invalid(format!("geometric ratio must lie in (0, 1], got {ratio}")));
            }
            (0..t_len).map(|t| eta0 * ratio.powi(t as i32)).collect()
        }
        StepSpec::Golden { eta0 } => {
            positive(eta0)?;
            (0..t_len).map(|t| eta0 * PHI.powi(-(t as i32))).collect()
        }
        StepSpec::Explicit { ref steps } => {
            if steps.len() < t_len {
                return Err(invalid(format!(
                    "explicit schedule has {} steps, {t_len} requested",
                    steps.len()
                )));
            }
            if let Some(s) = steps[..t_len].iter().find(|s| !(**s > 0.0 && s.is_finite())) {
                return Err(invalid(format!("steps must be positive, got {s}")));
            }
            steps[..t_len].to_vec()
        }
    };
    Ok(StepSchedule {
        spec: spec.clone(),
        steps,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ThresholdReport {
    pub passes: bool,
    /// `ρ(A)` the steps are compared against (`φ` for the Fibonacci matrix).
    pub rate: f64,
    /// `C = max_{t < burn_in} η_t ρ^t`.
    pub fitted_c: f64,
    pub decays: bool,
    pub summable: bool,
    /// First `t` with `η_t > C ρ^{−t}`, if any.
    pub first_violation: Option<usize>,
}

/// Checks `η_t ≤ C ρ^{−t}` for all `t`, with `C` fitted on the first
/// `burn_in` steps, together with summability of the steps.
pub fn golden_threshold_check(
    schedule: &StepSchedule,
    cm: &CompanionMatrix,
    burn_in: usize,
) -> ThresholdReport {
    let rate = spectral_radius(cm);
    let burn = burn_in.clamp(1, schedule.len());
    let fitted_c = schedule.steps[..burn]
        .iter()
        .enumerate()
        .map(|(t, eta)| eta * rate.powi(t as i32))
        .fold(0.0, f64::max);
    let first_violation = schedule
        .steps
        .iter()
        .enumerate()
        .position(|(t, eta)| *eta > fitted_c * rate.powi(-(t as i32)) * (1.0 + 1e-12));
    let decays = first_violation.is_none();
    let summable = match schedule.spec {
        StepSpec::Constant { .. } => false,
        StepSpec::Geometric { ratio, .. } => ratio < 1.0,
        StepSpec::Golden { .. } => true,
        // a finite list decaying at a rate faster than a growing ρ^{-t}
        StepSpec::Explicit { .. } => decays && rate > 1.0,
    };
    ThresholdReport {
        passes: decays && summable,
        rate,
        fitted_c,
        decays,
        summable,
        first_violation,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn cm(beta: f64, gamma: f64) -> CompanionMatrix {
        CompanionMatrix::second_order(beta, gamma).unwrap()
    }

    #[test]
    fn fibonacci_roots() {
        let roots = characteristic_roots(&CompanionMatrix::fibonacci());
        assert_relative_eq!(roots[0].re, 1.618_033_988_7, epsilon = 1e-10);
        assert_relative_eq!(roots[1].re, -0.618_033_988_7, epsilon = 1e-10);
        assert_relative_eq!(roots[1].re, -1.0 / roots[0].re, epsilon = 1e-12);
        assert_eq!(roots[0].im, 0.0);
        assert_relative_eq!(spectral_radius(&CompanionMatrix::fibonacci()), PHI, epsilon = 1e-15);
    }

    #[test]
    fn zero_coefficients_give_double_zero_root() {
        let roots = characteristic_roots(&cm(0.0, 0.0));
        assert!(roots.iter().all(|z| z.norm() == 0.0));
    }

    #[test]
    fn tribonacci_matches_power_iteration() {
        let t = CompanionMatrix::new(vec![1.0, 1.0, 1.0]).unwrap();
        let roots = characteristic_roots(&t);
        assert_relative_eq!(roots[0].re, 1.839_286_755, epsilon = 1e-9);
        assert_relative_eq!(roots[0].norm(), power_iteration_radius(&t, 400), max_relative = 1e-8);
        for z in &roots {
            assert!(t.poly_and_derivative(*z).0.norm() < 1e-12);
        }
    }

    #[test]
    fn stability_verdicts() {
        assert!(is_stable(&cm(0.5, 0.3)));
        assert!(!is_stable(&CompanionMatrix::fibonacci()));
        // λ = 1 solves λ² − 0.7λ − 0.3 = 0
        let edge = cm(0.7, 0.3);
        assert_eq!(spectral_radius(&edge), 1.0);
        assert!(!is_stable(&edge));
        assert_eq!(spectral_report(&edge).margin, 0.0);
    }

    #[test]
    fn envelope_of_nilpotent_matrix_vanishes() {
        let env = power_envelope(&cm(0.0, 0.0), 5);
        assert_eq!(env[0], 1.0);
        assert!(env[2..].iter().all(|v| *v == 0.0));
    }

    fn tail_slope(env: &[f64], lo: usize, hi: usize) -> f64 {
        let xs: Vec<f64> = (lo..=hi).map(|k| k as f64).collect();
        let ys: Vec<f64> = (lo..=hi).map(|k| env[k].ln()).collect();
        let mx = xs.iter().sum::<f64>() / xs.len() as f64;
        let my = ys.iter().sum::<f64>() / ys.len() as f64;
        let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
        let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
        num / den
    }

    #[test]
    fn fibonacci_envelope_grows_at_log_phi() {
        let env = power_envelope(&CompanionMatrix::fibonacci(), 60);
        let slope = tail_slope(&env, 20, 60);
        assert!((slope / PHI.ln() - 1.0).abs() < 0.01, "slope {slope}");
    }

    #[test]
    fn stable_envelope_decays() {
        let c = cm(0.5, 0.3);
        let env = power_envelope(&c, 80);
        assert!(env[80] < env[10]);
        assert!(tail_slope(&env, 20, 80) <= spectral_radius(&c).ln() + 0.05);
    }

    #[test]
    fn envelope_stops_at_overflow() {
        let env = power_envelope(&cm(1e10, 1e10), 100);
        assert!(env.len() < 101);
        assert!(env.iter().all(|v| v.is_finite()));
    }

    #[test]
    fn golden_schedule_values() {
        let s = make_schedule(&StepSpec::Golden { eta0: 1.0 }, 4).unwrap();
        let expected = [1.0, 0.618_033_988_749_894_9, 0.381_966_011_250_105_1, 0.236_067_977_499_789_7];
        for (a, b) in s.steps.iter().zip(expected) {
            assert_relative_eq!(*a, b, max_relative = 1e-15);
        }
    }

    #[test]
    fn threshold_check_examples() {
        let fib = CompanionMatrix::fibonacci();
        let constant = make_schedule(&StepSpec::Constant { eta0: 1.0 }, 50).unwrap();
        assert!(!golden_threshold_check(&constant, &fib, 5).passes);
        let geo = make_schedule(&StepSpec::Geometric { eta0: 1.0, ratio: 0.5 }, 50).unwrap();
        assert!(golden_threshold_check(&geo, &fib, 5).passes);
        let golden = make_schedule(&StepSpec::Golden { eta0: 0.3 }, 200).unwrap();
        assert!(golden_threshold_check(&golden, &fib, 5).passes);
        let slow = make_schedule(&StepSpec::Geometric { eta0: 1.0, ratio: 0.7 }, 50).unwrap();
        assert!(!golden_threshold_check(&slow, &fib, 5).passes);
    }

    #[test]
    fn schedule_validation() {
        assert!(make_schedule(&StepSpec::Constant { eta0: 0.0 }, 3).is_err());
        assert!(make_schedule(&StepSpec::Geometric { eta0: 1.0, ratio: 1.5 }, 3).is_err());
        assert!(make_schedule(&StepSpec::Geometric { eta0: 1.0, ratio: 0.0 }, 3).is_err());
        assert!(make_schedule(&StepSpec::Explicit { steps: vec![1.0] }, 3).is_err());
        assert!(make_schedule(&StepSpec::Constant { eta0: 1.0 }, 0).is_err());
    }
}
