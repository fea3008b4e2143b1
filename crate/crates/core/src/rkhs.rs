//! Function-space algebra.
//!
//! Elements of the hypothesis space are either kernel expansions
//! `f = Σ_i c_i K(a_i, ·)` over explicit anchor points, or weight vectors over a
//! frozen random Fourier feature map. Both forms support evaluation, the RKHS
//! inner product and exact linear combination. Combining expansions keeps every
//! anchor (concatenation), so `combine` never approximates.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::par;

// =============================================================================
// Points and datasets
// =============================================================================

/// Row-major matrix of points, one point per row.
#[derive(Clone, Debug, PartialEq)]
pub struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 && !data.is_empty() {
            return Err(invalid("points with dimension 0 must be empty"));
        }
        if dim > 0 && data.len() % dim != 0 {
            return Err(invalid(format!(
                "{} values do not split into rows of length {dim}",
                data.len()
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.len() != dim {
                return Err(Error::DimensionMismatch {
                    expected: dim,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Self::new(data, dim)
    }

    /// No rows, `dim` columns.
    pub fn empty(dim: usize) -> Self {
        Self {
            data: Vec::new(),
            dim,
        }
    }

    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks(self.dim.max(1))
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn to_rows(&self) -> Vec<Vec<f64>> {
        self.rows().map(<[f64]>::to_vec).collect()
    }

    pub fn select(&self, indices: &[usize]) -> Points {
        let mut data = Vec::with_capacity(indices.len() * self.dim);
        for &i in indices {
            data.extend_from_slice(self.row(i));
        }
        Points {
            data,
            dim: self.dim,
        }
    }

    fn all_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }
}

/// Inputs and targets. Inputs sit behind an `Arc` so fitted kernel expansions
/// can share them as anchors.
#[derive(Clone, Debug)]
pub struct Dataset {
    inputs: Arc<Points>,
    targets: Vec<f64>,
}

impl Dataset {
    pub fn new(inputs: Points, targets: Vec<f64>) -> Result<Self> {
        if inputs.is_empty() || inputs.dim() == 0 {
            return Err(invalid("dataset needs at least one row and one column"));
        }
        if inputs.len() != targets.len() {
            return Err(Error::DimensionMismatch {
                expected: inputs.len(),
                found: targets.len(),
            });
        }
        if !inputs.all_finite() || !targets.iter().all(|v| v.is_finite()) {
            return Err(invalid("dataset contains non-finite values"));
        }
        Ok(Self {
            inputs: Arc::new(inputs),
            targets,
        })
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.inputs.dim()
    }

    pub fn inputs(&self) -> &Arc<Points> {
        &self.inputs
    }

    pub fn targets(&self) -> &[f64] {
        &self.targets
    }

    pub fn subset(&self, indices: &[usize]) -> Result<Dataset> {
        let targets = indices.iter().map(|&i| self.targets[i]).collect();
        Dataset::new(self.inputs.select(indices), targets)
    }

    /// Copy of the dataset with row `index` replaced.
    pub fn with_replaced(&self, index: usize, input: &[f64], target: f64) -> Result<Dataset> {
        if index >= self.len() {
            return Err(invalid(format!("row {index} out of range for n = {}", self.len())));
        }
        if input.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: input.len(),
            });
        }
        let mut data = self.inputs.as_slice().to_vec();
        data[index * self.dim()..(index + 1) * self.dim()].copy_from_slice(input);
        let mut targets = self.targets.clone();
        targets[index] = target;
        Dataset::new(Points::new(data, self.dim())?, targets)
    }
}

// =============================================================================
// Kernels
// =============================================================================

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum KernelSpec {
    /// `exp(-‖x - y‖² / (2 σ²))`.
    Gaussian { bandwidth: f64 },
    /// Additive cubic smoothing-spline kernel; inputs are expected in `[0, 1]^d`.
    CubicSpline,
    /// `xᵀy`.
    Linear,
}

impl KernelSpec {
    pub fn gaussian(bandwidth: f64) -> Self {
        KernelSpec::Gaussian { bandwidth }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Gaussian { bandwidth } if !(bandwidth > 0.0 && bandwidth.is_finite()) => {
                Err(invalid(format!("gaussian bandwidth must be positive, got {bandwidth}")))
            }
            _ => Ok(()),
        }
    }

    #[inline]
    pub fn eval(&self, x: &[f64], y: &[f64]) -> f64 {
        match *self {
            KernelSpec::Gaussian { bandwidth } => {
                let sq: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                (-sq / (2.0 * bandwidth * bandwidth)).exp()
            }
            KernelSpec::CubicSpline => x.iter().zip(y).map(|(&s, &t)| spline_1d(s, t)).sum(),
            KernelSpec::Linear => x.iter().zip(y).map(|(a, b)| a * b).sum(),
        }
    }

    /// `κ² = sup K(x, x)` over `[0, 1]^dim` (all of `ℝ^dim` for the gaussian).
    pub fn kappa_sq(&self, dim: usize) -> f64 {
        match self {
            KernelSpec::Gaussian { .. } => 1.0,
            // 1 + s² + s³/3 peaks at s = 1
            KernelSpec::CubicSpline => 7.0 * dim as f64 / 3.0,
            KernelSpec::Linear => dim as f64,
        }
    }

    pub fn kappa(&self, dim: usize) -> f64 {
        self.kappa_sq(dim).sqrt()
    }
}

/// Reproducing kernel of the cubic spline space on `[0, 1]` with the
/// `1 + st` null-space part.
#[inline]
fn spline_1d(s: f64, t: f64) -> f64 {
    let lo = s.min(t);
    let hi = s.max(t);
    1.0 + s * t + lo * lo * (3.0 * hi - lo) / 6.0
}

/// Symmetric Gram matrix `K(x_i, x_j)`.
pub fn gram(kernel: &KernelSpec, points: &Points) -> DMatrix<f64> {
    let n = points.len();
    let mut data = vec![0.0; n * n];
    par::fill_rows(&mut data, n, |i, row| {
        let xi = points.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel.eval(xi, points.row(j));
        }
    });
    // row-major fill of a symmetric matrix is also its column-major layout
    DMatrix::from_vec(n, n, data)
}

/// `K(a_i, b_j)` with rows indexed by `a`.
pub fn cross_gram(kernel: &KernelSpec, a: &Points, b: &Points) -> DMatrix<f64> {
    let (na, nb) = (a.len(), b.len());
    let mut data = vec![0.0; na * nb];
    par::fill_rows(&mut data, nb, |i, row| {
        let xi = a.row(i);
        for (j, v) in row.iter_mut().enumerate() {
            *v = kernel.eval(xi, b.row(j));
        }
    });
    DMatrix::from_row_slice(na, nb, &data)
}

// =============================================================================
// Random Fourier feature maps
// =============================================================================

/// Identity of a frozen random feature map. Maps are regenerated from this
/// description, so two equal specs denote the same map.
///
/// A map with several seeds concatenates one block of `features` random
/// Fourier features per seed, scaled by `1/√blocks`; its kernel is the
/// average of the per-block kernels.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeatureMapSpec {
    pub input_dim: usize,
    pub features: usize,
    pub bandwidth: f64,
    pub seeds: Vec<u64>,
}

#[derive(Debug)]
pub struct FeatureMap {
    spec: FeatureMapSpec,
    // (blocks * features) × input_dim, row-major
    frequencies: Vec<f64>,
    phases: Vec<f64>,
    scale: f64,
}

impl FeatureMap {
    /// Draws frequencies from the gaussian kernel's spectral density
    /// `N(0, σ⁻² I)` and phases from `U[0, 2π)`, one seeded stream per block.
    pub fn new(spec: FeatureMapSpec) -> Result<Self> {
        if spec.input_dim == 0 || spec.features == 0 || spec.seeds.is_empty() {
            return Err(invalid("feature map needs input_dim, features and seeds all ≥ 1"));
        }
        KernelSpec::gaussian(spec.bandwidth).validate()?;
        let normal = Normal::new(0.0, 1.0 / spec.bandwidth)
            .map_err(|e| invalid(format!("feature map: {e}")))?;
        let total = spec.features * spec.seeds.len();
        let mut frequencies = Vec::with_capacity(total * spec.input_dim);
        let mut phases = Vec::with_capacity(total);
        for &seed in &spec.seeds {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for _ in 0..spec.features {
                for _ in 0..spec.input_dim {
                    frequencies.push(normal.sample(&mut rng));
                }
                phases.push(rng.random::<f64>() * 2.0 * PI);
            }
        }
        let scale = (2.0 / spec.features as f64).sqrt() / (spec.seeds.len() as f64).sqrt();
        Ok(Self {
            spec,
            frequencies,
            phases,
            scale,
        })
    }

    /// Single-block map.
    pub fn single(input_dim: usize, features: usize, bandwidth: f64, seed: u64) -> Result<Self> {
        Self::new(FeatureMapSpec {
            input_dim,
            features,
            bandwidth,
            seeds: vec![seed],
        })
    }

    pub fn spec(&self) -> &FeatureMapSpec {
        &self.spec
    }

    pub fn output_dim(&self) -> usize {
        self.phases.len()
    }

    pub fn blocks(&self) -> usize {
        self.spec.seeds.len()
    }

    pub fn transform_into(&self, x: &[f64], out: &mut [f64]) {
        let d = self.spec.input_dim;
        for (k, o) in out.iter_mut().enumerate() {
            let w = &self.frequencies[k * d..(k + 1) * d];
            let arg: f64 = w.iter().zip(x).map(|(a, b)| a * b).sum::<f64>() + self.phases[k];
            *o = self.scale * arg.cos();
        }
    }

    /// Feature matrix, one row per point.
    pub fn transform(&self, points: &Points) -> Result<DMatrix<f64>> {
        if points.dim() != self.spec.input_dim {
            return Err(Error::DimensionMismatch {
                expected: self.spec.input_dim,
                found: points.dim(),
            });
        }
        let width = self.output_dim();
        let mut data = vec![0.0; points.len() * width];
        par::fill_rows(&mut data, width, |i, row| self.transform_into(points.row(i), row));
        Ok(DMatrix::from_row_slice(points.len(), width, &data))
    }

    /// Columns of block `b` inside [`transform`](Self::transform)'s output.
    pub fn block_range(&self, b: usize) -> std::ops::Range<usize> {
        b * self.spec.features..(b + 1) * self.spec.features
    }
}

// =============================================================================
// Functions
// =============================================================================

#[derive(Clone, Debug)]
pub enum RkhsFunction {
    KernelExpansion {
        kernel: KernelSpec,
        anchors: Arc<Points>,
        coefficients: DVector<f64>,
    },
    FeatureWeights {
        map: Arc<FeatureMap>,
        weights: DVector<f64>,
    },
}

impl RkhsFunction {
    pub fn kernel_expansion(
        kernel: KernelSpec,
        anchors: Arc<Points>,
        coefficients: DVector<f64>,
    ) -> Result<Self> {
        kernel.validate()?;
        if anchors.len() != coefficients.len() {
            return Err(Error::DimensionMismatch {
                expected: anchors.len(),
                found: coefficients.len(),
            });
        }
        Ok(RkhsFunction::KernelExpansion {
            kernel,
            anchors,
            coefficients,
        })
    }

    pub fn feature_weights(map: Arc<FeatureMap>, weights: DVector<f64>) -> Result<Self> {
        if weights.len() != map.output_dim() {
            return Err(Error::DimensionMismatch {
                expected: map.output_dim(),
                found: weights.len(),
            });
        }
        Ok(RkhsFunction::FeatureWeights { map, weights })
    }

    /// The kernel section `K(x, ·)`.
    pub fn kernel_section(kernel: KernelSpec, x: &[f64]) -> Result<Self> {
        let anchors = Arc::new(Points::new(x.to_vec(), x.len())?);
        Self::kernel_expansion(kernel, anchors, DVector::from_element(1, 1.0))
    }

    /// Empty expansion. With `dim == 0` it is the universal zero returned by
    /// `combine` on an empty list, compatible with every function.
    pub fn zero_expansion(kernel: KernelSpec, dim: usize) -> Self {
        RkhsFunction::KernelExpansion {
            kernel,
            anchors: Arc::new(Points::empty(dim)),
            coefficients: DVector::zeros(0),
        }
    }

    pub fn zero_features(map: Arc<FeatureMap>) -> Self {
        let d = map.output_dim();
        RkhsFunction::FeatureWeights {
            map,
            weights: DVector::zeros(d),
        }
    }

    /// Zero function in the same family (and on the same anchors / map).
    pub fn zero_like(&self) -> Self {
        match self {
            RkhsFunction::KernelExpansion {
                kernel, anchors, ..
            } => RkhsFunction::KernelExpansion {
                kernel: *kernel,
                anchors: anchors.clone(),
                coefficients: DVector::zeros(anchors.len()),
            },
            RkhsFunction::FeatureWeights { map, .. } => Self::zero_features(map.clone()),
        }
    }

    /// Input dimension, or `None` for the universal zero.
    pub fn input_dim(&self) -> Option<usize> {
        match self {
            RkhsFunction::KernelExpansion { anchors, .. } if anchors.dim() == 0 => None,
            RkhsFunction::KernelExpansion { anchors, .. } => Some(anchors.dim()),
            RkhsFunction::FeatureWeights { map, .. } => Some(map.spec.input_dim),
        }
    }

    fn is_empty_expansion(&self) -> bool {
        matches!(self, RkhsFunction::KernelExpansion { anchors, .. } if anchors.is_empty())
    }

    /// Coefficient (kernel) or weight (features) vector.
    pub fn coefficients(&self) -> &DVector<f64> {
        match self {
            RkhsFunction::KernelExpansion { coefficients, .. } => coefficients,
            RkhsFunction::FeatureWeights { weights, .. } => weights,
        }
    }

    pub fn anchors(&self) -> Option<&Arc<Points>> {
        match self {
            RkhsFunction::KernelExpansion { anchors, .. } => Some(anchors),
            RkhsFunction::FeatureWeights { .. } => None,
        }
    }

    pub fn scaled(&self, factor: f64) -> Self {
        let mut out = self.clone();
        match &mut out {
            RkhsFunction::KernelExpansion { coefficients, .. } => *coefficients *= factor,
            RkhsFunction::FeatureWeights { weights, .. } => *weights *= factor,
        }
        out
    }

    /// Same family, same anchors or map, new coefficient vector.
    pub fn with_coefficients(&self, coefficients: DVector<f64>) -> Result<Self> {
        match self {
            RkhsFunction::KernelExpansion {
                kernel, anchors, ..
            } => Self::kernel_expansion(*kernel, anchors.clone(), coefficients),
            RkhsFunction::FeatureWeights { map, .. } => {
                Self::feature_weights(map.clone(), coefficients)
            }
        }
    }

    pub fn evaluate(&self, points: &Points) -> Result<DVector<f64>> {
        evaluate(self, points)
    }

    pub fn norm(&self) -> Result<f64> {
        Ok(inner(self, self)?.max(0.0).sqrt())
    }
}

fn same_points(a: &Arc<Points>, b: &Arc<Points>) -> bool {
    Arc::ptr_eq(a, b) || a == b
}

fn same_map(a: &Arc<FeatureMap>, b: &Arc<FeatureMap>) -> bool {
    Arc::ptr_eq(a, b) || a.spec == b.spec
}

fn check_compatible(f: &RkhsFunction, g: &RkhsFunction) -> Result<()> {
    use RkhsFunction::*;
    match (f, g) {
        (KernelExpansion { kernel: k1, anchors: a1, .. }, KernelExpansion { kernel: k2, anchors: a2, .. }) => {
            if k1 != k2 {
                return Err(Error::RepresentationMismatch(format!(
                    "kernels differ: {k1:?} vs {k2:?}"
                )));
            }
            if a1.dim() != a2.dim() {
                return Err(Error::RepresentationMismatch(format!(
                    "input dimensions differ: {} vs {}",
                    a1.dim(),
                    a2.dim()
                )));
            }
            Ok(())
        }
        (FeatureWeights { map: m1, .. }, FeatureWeights { map: m2, .. }) => {
            if same_map(m1, m2) {
                Ok(())
            } else {
                Err(Error::RepresentationMismatch("feature maps differ".into()))
            }
        }
        _ => Err(Error::RepresentationMismatch(
            "kernel expansion vs feature weights".into(),
        )),
    }
}

/// RKHS inner product `⟨f, g⟩_H`.
///
/// Expansions: `aᵀ G b` with `G` the cross-Gram matrix of the two anchor
/// sets, accumulated row by row. Feature weights: the weight dot product.
pub fn inner(f: &RkhsFunction, g: &RkhsFunction) -> Result<f64> {
    if f.is_empty_expansion() || g.is_empty_expansion() {
        return Ok(0.0);
    }
    check_compatible(f, g)?;
    match (f, g) {
        (
            RkhsFunction::KernelExpansion {
                kernel,
                anchors: a,
                coefficients: ca,
            },
            RkhsFunction::KernelExpansion {
                anchors: b,
                coefficients: cb,
                ..
            },
        ) => {
            let rows = par::map_range(a.len(), |i| {
                if ca[i] == 0.0 {
                    return 0.0;
                }
                let xi = a.row(i);
                let s: f64 = (0..b.len()).map(|j| cb[j] * kernel.eval(xi, b.row(j))).sum();
                ca[i] * s
            });
            Ok(rows.iter().sum())
        }
        (
            RkhsFunction::FeatureWeights { weights: wa, .. },
            RkhsFunction::FeatureWeights { weights: wb, .. },
        ) => Ok(wa.dot(wb)),
        _ => unreachable!("compatibility checked above"),
    }
}

/// Pointwise values of `f` at each row of `points`.
pub fn evaluate(f: &RkhsFunction, points: &Points) -> Result<DVector<f64>> {
    if let Some(d) = f.input_dim() {
        if points.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: points.dim(),
            });
        }
    }
    if f.is_empty_expansion() {
        return Ok(DVector::zeros(points.len()));
    }
    let values = match f {
        RkhsFunction::KernelExpansion {
            kernel,
            anchors,
            coefficients,
        } => par::map_range(points.len(), |p| {
            let x = points.row(p);
            (0..anchors.len())
                .map(|i| coefficients[i] * kernel.eval(anchors.row(i), x))
                .sum()
        }),
        RkhsFunction::FeatureWeights { map, weights } => {
            let width = map.output_dim();
            par::map_range(points.len(), |p| {
                let mut phi = vec![0.0; width];
                map.transform_into(points.row(p), &mut phi);
                phi.iter().zip(weights.iter()).map(|(a, b)| a * b).sum()
            })
        }
    };
    Ok(DVector::from_vec(values))
}

#[derive(Clone, Copy, Debug, Default)]
pub struct CombineOptions {
    /// Merge bitwise-identical anchor rows when anchor sets must be concatenated.
    pub dedup_anchors: bool,
}

/// `Σ_k coeffs[k] · funcs[k]`.
///
/// Terms with a zero coefficient are skipped. Expansions over one shared
/// anchor set add coefficient vectors; otherwise anchors are concatenated.
/// An empty list gives the universal zero.
pub fn combine(coeffs: &[f64], funcs: &[&RkhsFunction]) -> Result<RkhsFunction> {
    combine_with(coeffs, funcs, CombineOptions::default())
}

pub fn combine_with(
    coeffs: &[f64],
    funcs: &[&RkhsFunction],
    options: CombineOptions,
) -> Result<RkhsFunction> {
    if coeffs.len() != funcs.len() {
        return Err(Error::DimensionMismatch {
            expected: funcs.len(),
            found: coeffs.len(),
        });
    }
    if let Some(c) = coeffs.iter().find(|c| !c.is_finite()) {
        return Err(invalid(format!("non-finite combination coefficient {c}")));
    }
    let live: Vec<(f64, &RkhsFunction)> = coeffs
        .iter()
        .copied()
        .zip(funcs.iter().copied())
        .filter(|(c, f)| *c != 0.0 && !f.is_empty_expansion())
        .collect();
    for w in live.windows(2) {
        check_compatible(w[0].1, w[1].1)?;
    }
    let Some(&(_, first)) = live.first() else {
        return Ok(match funcs.iter().find(|f| !f.is_empty_expansion()) {
            Some(f) => f.zero_like(),
            None => funcs
                .first()
                .map(|f| (*f).clone())
                .unwrap_or_else(|| RkhsFunction::zero_expansion(KernelSpec::Linear, 0)),
        });
    };
    match first {
        RkhsFunction::FeatureWeights { map, .. } => {
            let mut acc = DVector::zeros(map.output_dim());
            for (c, f) in &live {
                acc.axpy(*c, f.coefficients(), 1.0);
            }
            RkhsFunction::feature_weights(map.clone(), acc)
        }
        RkhsFunction::KernelExpansion {
            kernel, anchors, ..
        } => {
            let shared = live
                .iter()
                .all(|(_, f)| same_points(f.anchors().expect("expansion"), anchors));
            if shared {
                let mut acc = DVector::zeros(anchors.len());
                for (c, f) in &live {
                    acc.axpy(*c, f.coefficients(), 1.0);
                }
                return RkhsFunction::kernel_expansion(*kernel, anchors.clone(), acc);
            }
            concat_expansions(*kernel, &live, options.dedup_anchors)
        }
    }
}

fn concat_expansions(
    kernel: KernelSpec,
    live: &[(f64, &RkhsFunction)],
    dedup: bool,
) -> Result<RkhsFunction> {
    let dim = live[0].1.anchors().expect("expansion").dim();
    let mut data = Vec::new();
    let mut coefficients = Vec::new();
    let mut seen: HashMap<Vec<u64>, usize> = HashMap::new();
    for (c, f) in live {
        let anchors = f.anchors().expect("expansion");
        for (i, row) in anchors.rows().enumerate() {
            let value = c * f.coefficients()[i];
            if dedup {
                let key: Vec<u64> = row.iter().map(|v| v.to_bits()).collect();
                if let Some(&slot) = seen.get(&key) {
                    coefficients[slot] += value;
                    continue;
                }
                seen.insert(key, coefficients.len());
            }
            data.extend_from_slice(row);
            coefficients.push(value);
        }
    }
    RkhsFunction::kernel_expansion(
        kernel,
        Arc::new(Points::new(data, dim)?),
        DVector::from_vec(coefficients),
    )
}

// =============================================================================
// Cached geometry
// =============================================================================

/// Inner-product provider. [`Exact`] recomputes kernel values each call;
/// [`Geometry`] caches a Gram matrix for one anchor set.
pub trait InnerProduct {
    fn inner(&self, f: &RkhsFunction, g: &RkhsFunction) -> Result<f64>;

    fn norm(&self, f: &RkhsFunction) -> Result<f64> {
        Ok(self.inner(f, f)?.max(0.0).sqrt())
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Exact;

impl InnerProduct for Exact {
    fn inner(&self, f: &RkhsFunction, g: &RkhsFunction) -> Result<f64> {
        inner(f, g)
    }
}

/// Gram matrix cached for functions anchored on one point set. Functions on
/// other anchors fall back to [`inner`].
#[derive(Clone, Debug)]
pub struct Geometry {
    cached: Option<(KernelSpec, Arc<Points>, DMatrix<f64>)>,
}

impl Geometry {
    pub fn for_anchors(kernel: KernelSpec, anchors: Arc<Points>) -> Self {
        let g = gram(&kernel, &anchors);
        Self {
            cached: Some((kernel, anchors, g)),
        }
    }

    /// No cache: feature-weight inner products are already cheap.
    pub fn uncached() -> Self {
        Self { cached: None }
    }

    pub fn gram(&self) -> Option<&DMatrix<f64>> {
        self.cached.as_ref().map(|(_, _, g)| g)
    }
}

impl InnerProduct for Geometry {
    fn inner(&self, f: &RkhsFunction, g: &RkhsFunction) -> Result<f64> {
        if let Some((kernel, anchors, gram)) = &self.cached {
            if let (
                RkhsFunction::KernelExpansion {
                    kernel: kf,
                    anchors: af,
                    coefficients: cf,
                },
                RkhsFunction::KernelExpansion {
                    kernel: kg,
                    anchors: ag,
                    coefficients: cg,
                },
            ) = (f, g)
            {
                if kf == kernel && kg == kernel && Arc::ptr_eq(af, anchors) && Arc::ptr_eq(ag, anchors)
                {
                    return Ok(cf.dot(&(gram * cg)));
                }
            }
        }
        inner(f, g)
    }
}

// =============================================================================
// Persistence
// =============================================================================

/// Self-describing document form of an [`RkhsFunction`]. Feature maps are
/// stored by their generating spec and rebuilt on load.
#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(tag = "representation", rename_all = "kebab-case", deny_unknown_fields)]
pub enum FunctionDocument {
    KernelExpansion {
        kernel: KernelSpec,
        input_dim: usize,
        anchors: Vec<Vec<f64>>,
        coefficients: Vec<f64>,
    },
    FeatureWeights {
        feature_map: FeatureMapSpec,
        weights: Vec<f64>,
    },
}

impl From<&RkhsFunction> for FunctionDocument {
    fn from(f: &RkhsFunction) -> Self {
        match f {
            RkhsFunction::KernelExpansion {
                kernel,
                anchors,
                coefficients,
            } => FunctionDocument::KernelExpansion {
                kernel: *kernel,
                input_dim: anchors.dim(),
                anchors: anchors.to_rows(),
                coefficients: coefficients.iter().copied().collect(),
            },
            RkhsFunction::FeatureWeights { map, weights } => FunctionDocument::FeatureWeights {
                feature_map: map.spec.clone(),
                weights: weights.iter().copied().collect(),
            },
        }
    }
}

impl TryFrom<FunctionDocument> for RkhsFunction {
    type Error = Error;

    fn try_from(doc: FunctionDocument) -> Result<Self> {
        match doc {
            FunctionDocument::KernelExpansion {
                kernel,
                input_dim,
                anchors,
                coefficients,
            } => {
                let mut data = Vec::with_capacity(anchors.len() * input_dim);
                for row in &anchors {
                    if row.len() != input_dim {
                        return Err(Error::DimensionMismatch {
                            expected: input_dim,
                            found: row.len(),
                        });
                    }
                    data.extend_from_slice(row);
                }
                RkhsFunction::kernel_expansion(
                    kernel,
                    Arc::new(Points::new(data, input_dim)?),
                    DVector::from_vec(coefficients),
                )
            }
            FunctionDocument::FeatureWeights {
                feature_map,
                weights,
            } => RkhsFunction::feature_weights(
                Arc::new(FeatureMap::new(feature_map)?),
                DVector::from_vec(weights),
            ),
        }
    }
}

impl RkhsFunction {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&FunctionDocument::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let doc: FunctionDocument = serde_json::from_str(text)?;
        doc.try_into()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::Rng;

    fn rng(seed: u64) -> ChaCha8Rng {
        ChaCha8Rng::seed_from_u64(seed)
    }

    fn random_points(r: &mut ChaCha8Rng, n: usize, d: usize) -> Arc<Points> {
        let data = (0..n * d).map(|_| r.random::<f64>()).collect();
        Arc::new(Points::new(data, d).unwrap())
    }

    fn random_expansion(r: &mut ChaCha8Rng, kernel: KernelSpec, n: usize, d: usize) -> RkhsFunction {
        let anchors = random_points(r, n, d);
        let c = DVector::from_fn(n, |_, _| r.random::<f64>() * 2.0 - 1.0);
        RkhsFunction::kernel_expansion(kernel, anchors, c).unwrap()
    }

    #[test]
    fn zero_has_zero_inner_product() {
        let k = KernelSpec::gaussian(1.0);
        let f = random_expansion(&mut rng(1), k, 4, 2);
        let zero = RkhsFunction::zero_expansion(k, 2);
        assert_eq!(inner(&zero, &f).unwrap(), 0.0);
        let universal = combine(&[], &[]).unwrap();
        assert_eq!(inner(&universal, &f).unwrap(), 0.0);
    }

    #[test]
    fn gaussian_section_has_unit_norm() {
        let f = RkhsFunction::kernel_section(KernelSpec::gaussian(1.0), &[0.3, -1.2]).unwrap();
        assert_eq!(inner(&f, &f).unwrap(), 1.0);
    }

    #[test]
    fn inner_matches_dense_gram_oracle() {
        let k = KernelSpec::gaussian(0.7);
        let mut r = rng(7);
        let f = random_expansion(&mut r, k, 3, 2);
        let g = random_expansion(&mut r, k, 3, 2);
        // dense Gram over the union of anchors, coefficients padded with zeros
        let (fa, ga) = (f.anchors().unwrap(), g.anchors().unwrap());
        let union: Vec<&[f64]> = fa.rows().chain(ga.rows()).collect();
        let mut a = vec![0.0; 6];
        let mut b = vec![0.0; 6];
        a[..3].copy_from_slice(f.coefficients().as_slice());
        b[3..].copy_from_slice(g.coefficients().as_slice());
        let mut expected = 0.0;
        for i in 0..6 {
            for j in 0..6 {
                let x: &[f64] = union[i];
                let y: &[f64] = union[j];
                let sq: f64 = x.iter().zip(y).map(|(p, q)| (p - q).powi(2)).sum();
                expected += a[i] * b[j] * (-sq / (2.0 * 0.49)).exp();
            }
        }
        assert_relative_eq!(inner(&f, &g).unwrap(), expected, max_relative = 1e-13);
    }

    #[test]
    fn single_anchor_evaluates_to_scaled_kernel() {
        let k = KernelSpec::CubicSpline;
        let x0 = [0.4, 0.9];
        let f = RkhsFunction::kernel_section(k, &x0).unwrap().scaled(2.5);
        let p = Points::new(x0.to_vec(), 2).unwrap();
        assert_eq!(evaluate(&f, &p).unwrap()[0], 2.5 * k.eval(&x0, &x0));
    }

    #[test]
    fn features_evaluate_as_matrix_product() {
        let map = Arc::new(FeatureMap::single(3, 16, 0.8, 11).unwrap());
        let mut r = rng(3);
        let w = DVector::from_fn(16, |_, _| r.random::<f64>() - 0.5);
        let f = RkhsFunction::feature_weights(map.clone(), w.clone()).unwrap();
        let pts = random_points(&mut r, 5, 3);
        // oracle: explicit √(2/D) cos(ωᵀx + b) built from the stored parameters
        let mut phi = DMatrix::zeros(5, 16);
        for i in 0..5 {
            for k in 0..16 {
                let om = &map.frequencies[k * 3..k * 3 + 3];
                let arg: f64 = om.iter().zip(pts.row(i)).map(|(a, b)| a * b).sum::<f64>()
                    + map.phases[k];
                phi[(i, k)] = (2.0f64 / 16.0).sqrt() * arg.cos();
            }
        }
        let expected = phi * w;
        let got = evaluate(&f, &pts).unwrap();
        for i in 0..5 {
            assert_relative_eq!(got[i], expected[i], max_relative = 1e-12);
        }
    }

    #[test]
    fn dimension_mismatch_is_reported() {
        let f = RkhsFunction::kernel_section(KernelSpec::Linear, &[1.0, 2.0]).unwrap();
        let p = Points::new(vec![1.0, 2.0, 3.0], 3).unwrap();
        assert!(matches!(evaluate(&f, &p), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn combine_identity_and_cancellation() {
        let k = KernelSpec::gaussian(0.5);
        let mut r = rng(5);
        let f = random_expansion(&mut r, k, 6, 1);
        let probe = random_points(&mut r, 25, 1);
        let same = combine(&[1.0], &[&f]).unwrap();
        assert_eq!(evaluate(&same, &probe).unwrap(), evaluate(&f, &probe).unwrap());
        let gone = combine(&[1.0, -1.0], &[&f, &f]).unwrap();
        assert!(gone.norm().unwrap() <= 1e-12);
    }

    #[test]
    fn combine_matches_pointwise_sum() {
        let k = KernelSpec::gaussian(0.4);
        let mut r = rng(9);
        let fs: Vec<RkhsFunction> = (0..4).map(|_| random_expansion(&mut r, k, 5, 2)).collect();
        let cs: Vec<f64> = (0..4).map(|_| r.random::<f64>() * 4.0 - 2.0).collect();
        let probe = random_points(&mut r, 30, 2);
        let refs: Vec<&RkhsFunction> = fs.iter().collect();
        let got = evaluate(&combine(&cs, &refs).unwrap(), &probe).unwrap();
        let mut expected = DVector::zeros(30);
        for (c, f) in cs.iter().zip(&fs) {
            expected += evaluate(f, &probe).unwrap() * *c;
        }
        for i in 0..30 {
            assert_relative_eq!(got[i], expected[i], max_relative = 1e-12, epsilon = 1e-14);
        }
    }

    #[test]
    fn dedup_merges_identical_rows_only() {
        let k = KernelSpec::gaussian(1.0);
        let f = RkhsFunction::kernel_section(k, &[0.5]).unwrap();
        let g = RkhsFunction::kernel_section(k, &[0.5]).unwrap();
        let h = RkhsFunction::kernel_section(k, &[0.5 + 1e-15]).unwrap();
        let merged = combine_with(
            &[1.0, 2.0, 1.0],
            &[&f, &g, &h],
            CombineOptions { dedup_anchors: true },
        )
        .unwrap();
        assert_eq!(merged.anchors().unwrap().len(), 1 + 1);
        assert_eq!(merged.coefficients()[0], 3.0);
    }

    #[test]
    fn mixing_families_is_an_error() {
        let map = Arc::new(FeatureMap::single(1, 4, 1.0, 0).unwrap());
        let f = RkhsFunction::zero_features(map).scaled(1.0);
        let g = RkhsFunction::kernel_section(KernelSpec::gaussian(1.0), &[0.0]).unwrap();
        let f = f.with_coefficients(DVector::from_element(4, 1.0)).unwrap();
        assert!(matches!(inner(&f, &g), Err(Error::RepresentationMismatch(_))));
        assert!(combine(&[1.0, 1.0], &[&f, &g]).is_err());
        let other = RkhsFunction::kernel_section(KernelSpec::Linear, &[0.0]).unwrap();
        assert!(inner(&g, &other).is_err());
    }

    #[test]
    fn geometry_matches_exact_inner() {
        let k = KernelSpec::gaussian(0.3);
        let mut r = rng(21);
        let anchors = random_points(&mut r, 12, 2);
        let a = RkhsFunction::kernel_expansion(k, anchors.clone(), DVector::from_fn(12, |i, _| i as f64 - 5.0)).unwrap();
        let b = RkhsFunction::kernel_expansion(k, anchors.clone(), DVector::from_fn(12, |i, _| (i as f64).sin())).unwrap();
        let geo = Geometry::for_anchors(k, anchors);
        assert_relative_eq!(geo.inner(&a, &b).unwrap(), inner(&a, &b).unwrap(), max_relative = 1e-12);
    }

    #[test]
    fn kappa_bounds_diagonal_on_unit_cube() {
        let mut r = rng(2);
        for kernel in [KernelSpec::CubicSpline, KernelSpec::Linear, KernelSpec::gaussian(0.2)] {
            let pts = random_points(&mut r, 200, 3);
            for x in pts.rows() {
                assert!(kernel.eval(x, x) <= kernel.kappa_sq(3) + 1e-12);
            }
        }
        let corner = [1.0, 1.0, 1.0];
        assert_relative_eq!(KernelSpec::CubicSpline.eval(&corner, &corner), 7.0, max_relative = 1e-15);
    }

    #[test]
    fn document_round_trip_is_bit_exact() {
        let k = KernelSpec::gaussian(0.123456789);
        let f = random_expansion(&mut rng(4), k, 7, 3);
        let back = RkhsFunction::from_json(&f.to_json().unwrap()).unwrap();
        assert_eq!(back.coefficients(), f.coefficients());
        assert_eq!(back.anchors().unwrap().as_slice(), f.anchors().unwrap().as_slice());

        let map = Arc::new(FeatureMap::single(2, 8, 0.5, 99).unwrap());
        let g = RkhsFunction::feature_weights(map, DVector::from_fn(8, |i, _| 1.0 / (i as f64 + 3.0))).unwrap();
        let back = RkhsFunction::from_json(&g.to_json().unwrap()).unwrap();
        let probe = Points::new(vec![0.1, 0.2, 0.3, 0.4], 2).unwrap();
        assert_eq!(evaluate(&back, &probe).unwrap(), evaluate(&g, &probe).unwrap());
    }

    #[test]
    fn dataset_validation() {
        let p = Points::new(vec![0.0, 1.0], 1).unwrap();
        assert!(Dataset::new(p.clone(), vec![1.0]).is_err());
        assert!(Dataset::new(p.clone(), vec![1.0, f64::NAN]).is_err());
        assert!(Dataset::new(Points::empty(1), vec![]).is_err());
        let ds = Dataset::new(p, vec![1.0, 2.0]).unwrap();
        let swapped = ds.with_replaced(0, &[5.0], 9.0).unwrap();
        assert_eq!(swapped.targets(), &[9.0, 2.0]);
        assert_eq!(swapped.inputs().row(0), &[5.0]);
    }
}
