//! Disclosure-risk measures.
//!
//! The central quantity is the conditional probability that the true value
//! lies within `ε σ_X` of a published masked value `z`,
//!
//! ```text
//! M(z, ε) = ∫_{-εσ}^{εσ} g(z - x) f(x) dx / ∫ g(z - x) f(x) dx
//! ```
//!
//! and the confidentiality level `μ = min { ε : sup_z M(z, ε) >= δ }`. When the
//! data density `g` is unknown, expectations are replaced by sample averages
//! over the confidential values, which gives the plug-in `M̂` evaluated here
//! on a fixed z-grid through [`MeasureTable`].

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf_inv;

use crate::error::{Error, Result};
use crate::noise::GammaNoiseParams;
use crate::quadrature::{adaptive_real_line, adaptive_split};
use crate::search::{bisect_predicate, bisect_predicate_log, bisect_root, golden_section};

/// Number of z-points in the evaluation grid for the plug-in supremum.
pub const Z_GRID_POINTS: usize = 1024;
/// Half-width of the z-grid margin beyond the data range, in units of σ̂.
pub const Z_GRID_MARGIN_SD: f64 = 3.0;
/// Resolution of the ε bisection.
pub const EPSILON_TOLERANCE: f64 = 1e-4;
/// Relative tolerance of the scale calibration.
pub const SCALE_REL_TOLERANCE: f64 = 1e-4;
/// Calibration search limits, as multiples of σ̂.
pub const SCALE_SEARCH_LIMITS: (f64, f64) = (1e-6, 1e6);

/// The privacy requirement: no masked value may localise the true value
/// within `deviation_multiplier · σ_X` with conditional probability above
/// `level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "RawBudget")]
pub struct PrivacyBudget {
    deviation_multiplier: f64,
    level: f64,
}

#[derive(Deserialize)]
struct RawBudget {
    deviation_multiplier: f64,
    level: f64,
}

impl TryFrom<RawBudget> for PrivacyBudget {
    type Error = Error;
    fn try_from(raw: RawBudget) -> Result<Self> {
        PrivacyBudget::new(raw.deviation_multiplier, raw.level)
    }
}

impl PrivacyBudget {
    pub fn new(deviation_multiplier: f64, level: f64) -> Result<Self> {
        if !(deviation_multiplier.is_finite() && deviation_multiplier > 0.0) {
            return Err(Error::invalid(format!("deviation multiplier must be > 0, got {deviation_multiplier}")));
        }
        if !(level > 0.0 && level < 1.0) {
            return Err(Error::invalid(format!("level must lie in (0, 1), got {level}")));
        }
        Ok(Self { deviation_multiplier, level })
    }

    pub fn deviation_multiplier(&self) -> f64 {
        self.deviation_multiplier
    }

    pub fn level(&self) -> f64 {
        self.level
    }
}

impl Default for PrivacyBudget {
    fn default() -> Self {
        Self { deviation_multiplier: 0.75, level: 0.9 }
    }
}

/// A measure evaluated along a grid of masked values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MeasureCurve {
    pub z_grid: Vec<f64>,
    pub values: Vec<f64>,
    pub epsilon: f64,
}

/// The confidential sample with its standard deviation (divisor `n - 1`).
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DatasetSummary {
    values: Vec<f64>,
    sd: f64,
    n: usize,
    #[serde(skip)]
    sorted: Vec<f64>,
}

impl DatasetSummary {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let n = values.len();
        if n < 2 {
            return Err(Error::DegenerateData(format!("need at least 2 values, got {n}")));
        }
        if let Some(bad) = values.iter().find(|v| !v.is_finite()) {
            return Err(Error::DegenerateData(format!("non-finite value {bad}")));
        }
        let mean = values.iter().sum::<f64>() / n as f64;
        let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
        let sd = (ss / (n as f64 - 1.0)).sqrt();
        if !(sd > 0.0) {
            return Err(Error::DegenerateData("all values are identical".into()));
        }
        let mut sorted = values.clone();
        sorted.sort_by(f64::total_cmp);
        Ok(Self { values, sd, n, sorted })
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn sorted(&self) -> &[f64] {
        &self.sorted
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    pub fn variance(&self) -> f64 {
        self.sd * self.sd
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn min(&self) -> f64 {
        self.sorted[0]
    }

    pub fn max(&self) -> f64 {
        self.sorted[self.n - 1]
    }
}

/// A symmetric noise density as seen by the plug-in measure.
///
/// Weights are computed in log space from the distance `d = |z - X_i|`.
pub trait NoiseDensity {
    fn density(&self, x: f64) -> f64;

    /// `ln f(d)` up to the additive constant [`NoiseDensity::log_normalizer`].
    fn log_kernel(&self, d: f64, ln_d: f64) -> f64;

    fn log_normalizer(&self) -> f64;

    /// Whether the density is infinite at the origin.
    fn singular_at_zero(&self) -> bool;

    /// Whether the density is non-increasing in `|x|`.
    fn decreasing_in_distance(&self) -> bool;
}

impl NoiseDensity for GammaNoiseParams {
    fn density(&self, x: f64) -> f64 {
        GammaNoiseParams::density(self, x)
    }

    #[inline]
    fn log_kernel(&self, d: f64, ln_d: f64) -> f64 {
        GammaNoiseParams::log_kernel(self, d, ln_d)
    }

    fn log_normalizer(&self) -> f64 {
        GammaNoiseParams::log_normalizer(self)
    }

    fn singular_at_zero(&self) -> bool {
        self.shape() < 1.0
    }

    fn decreasing_in_distance(&self) -> bool {
        self.shape() <= 1.0
    }
}

/// Centred normal noise. Used to check the plug-in machinery against the
/// closed-form normal/normal confidentiality level.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalNoise {
    sd: f64,
}

impl NormalNoise {
    pub fn new(sd: f64) -> Result<Self> {
        if !(sd.is_finite() && sd > 0.0) {
            return Err(Error::invalid(format!("normal noise sd must be > 0, got {sd}")));
        }
        Ok(Self { sd })
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }
}

impl NoiseDensity for NormalNoise {
    fn density(&self, x: f64) -> f64 {
        (self.log_kernel(x.abs(), 0.0) + self.log_normalizer()).exp()
    }

    #[inline]
    fn log_kernel(&self, d: f64, _ln_d: f64) -> f64 {
        let u = d / self.sd;
        -0.5 * u * u
    }

    fn log_normalizer(&self) -> f64 {
        -(self.sd * (2.0 * std::f64::consts::PI).sqrt()).ln()
    }

    fn singular_at_zero(&self) -> bool {
        false
    }

    fn decreasing_in_distance(&self) -> bool {
        true
    }
}

/// Standard normal quantile.
pub(crate) fn normal_quantile(p: f64) -> f64 {
    std::f64::consts::SQRT_2 * erf_inv(2.0 * p - 1.0)
}

/// Break points for integrating a product of densities with features at
/// `centers`: the centers themselves plus geometric offsets, so no feature
/// can fall between quadrature nodes of an over-long first panel.
fn feature_breaks(centers: &[f64], scale: f64) -> Vec<f64> {
    let mut out = Vec::new();
    for &c in centers {
        out.push(c);
        for k in -8..=40 {
            let w = scale * 2f64.powi(k);
            out.push(c - w);
            out.push(c + w);
        }
    }
    out.retain(|x| x.is_finite());
    out.sort_by(f64::total_cmp);
    out.dedup();
    out
}

const UNDERFLOW_FLOOR: f64 = 1e-300;

/// Conditional probability `P(|X - Z| < ε σ_X | Z = z)` by quadrature, for a
/// data density `g` and noise density `f`.
pub fn true_measure<G, F>(g: G, f: F, sigma_x: f64, z: f64, epsilon: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
    F: Fn(f64) -> f64,
{
    if !(sigma_x > 0.0) {
        return Err(Error::invalid(format!("sigma_x must be > 0, got {sigma_x}")));
    }
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let integrand = |x: f64| {
        let v = g(z - x) * f(x);
        if v.is_finite() { v } else { 0.0 }
    };
    let breaks = feature_breaks(&[0.0, z], sigma_x);
    let denom = adaptive_real_line(integrand, &breaks, 0.0, 1e-12)?.value;
    if !(denom > UNDERFLOW_FLOOR) {
        return Err(Error::DegenerateSupport(denom));
    }
    if epsilon == 0.0 {
        return Ok(0.0);
    }
    let half = epsilon * sigma_x;
    let num = if half.is_infinite() {
        denom
    } else {
        adaptive_split(integrand, -half, half, &breaks, 1e-16 * denom, 1e-12)?.value
    };
    Ok((num / denom).clamp(0.0, 1.0))
}

/// Closed-form confidentiality level for normal data with normal noise:
/// `τ_{(1+δ)/2} / sqrt(1 + σ_X²/σ_Y²)`.
pub fn normal_normal_mu(sigma_x: f64, sigma_y: f64, delta: f64) -> Result<f64> {
    if !(sigma_x > 0.0 && sigma_y > 0.0) {
        return Err(Error::invalid("standard deviations must be > 0"));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let ratio = sigma_x / sigma_y;
    Ok(normal_quantile(0.5 * (1.0 + delta)) / (1.0 + ratio * ratio).sqrt())
}

/// `sup_z M(z, ε)` by quadrature: a coarse scan over `z_window` refined by
/// golden-section search around the best scan point.
pub fn true_sup_measure<G, F>(g: G, f: F, sigma_x: f64, epsilon: f64, z_window: (f64, f64)) -> Result<f64>
where
    G: Fn(f64) -> f64 + Copy,
    F: Fn(f64) -> f64 + Copy,
{
    const SCAN: usize = 41;
    let (lo, hi) = z_window;
    let step = (hi - lo) / (SCAN - 1) as f64;
    let mut best = (lo, f64::NEG_INFINITY);
    for i in 0..SCAN {
        let z = lo + step * i as f64;
        let m = true_measure(g, f, sigma_x, z, epsilon)?;
        if m > best.1 {
            best = (z, m);
        }
    }
    let a = (best.0 - step).max(lo);
    let b = (best.0 + step).min(hi);
    let mut failure = None;
    let (_, neg) = golden_section(a, b, 1e-7 * sigma_x, |z| match true_measure(g, f, sigma_x, z, epsilon) {
        Ok(m) => -m,
        Err(e) => {
            failure = Some(e);
            0.0
        }
    });
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(best.1.max(-neg))
}

/// `μ = min { ε : sup_z M(z, ε) >= δ }` from quadrature of the exact measure.
pub fn true_mu<G, F>(g: G, f: F, sigma_x: f64, delta: f64, z_window: (f64, f64)) -> Result<f64>
where
    G: Fn(f64) -> f64 + Copy,
    F: Fn(f64) -> f64 + Copy,
{
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let mut hi = 1.0;
    while true_sup_measure(g, f, sigma_x, hi, z_window)? < delta {
        hi *= 2.0;
        if hi > 1e6 {
            return Err(Error::Numerical("sup measure never reaches delta".into()));
        }
    }
    let mut failure = None;
    let (_, eps) = bisect_predicate(0.0, hi, 1e-7, |e| match true_sup_measure(g, f, sigma_x, e, z_window) {
        Ok(m) => m >= delta,
        Err(err) => {
            failure = Some(err);
            true
        }
    });
    match failure {
        Some(e) => Err(e),
        None => Ok(eps),
    }
}

/// Outcome of evaluating the plug-in measure at a single z.
#[derive(Debug, Clone, Copy, PartialEq)]
enum RowValue {
    Value(f64),
    Undefined,
    Excluded,
}

/// Plug-in measure for one z given ascending distances `d` and their logs.
/// The partial sum at the indicator boundary and the full sum come from the
/// same running total, so the ratio is exactly monotone in the threshold.
fn row_measure<D: NoiseDensity>(d: &[f64], ln_d: &[f64], noise: &D, threshold: f64) -> RowValue {
    if d[0] == 0.0 && noise.singular_at_zero() {
        return RowValue::Undefined;
    }
    let decreasing = noise.decreasing_in_distance();
    let shift = if decreasing {
        noise.log_kernel(d[0], ln_d[0])
    } else {
        d.iter()
            .zip(ln_d)
            .map(|(&di, &li)| noise.log_kernel(di, li))
            .fold(f64::NEG_INFINITY, f64::max)
    };
    if (shift + noise.log_normalizer()).exp() == 0.0 {
        return RowValue::Excluded;
    }
    let k = d.partition_point(|&di| di <= threshold);
    let n = d.len();
    let mut running = 0.0;
    let mut inside = None;
    for i in 0..n {
        if i == k {
            inside = Some(running);
        }
        let w = (noise.log_kernel(d[i], ln_d[i]) - shift).exp();
        running += w;
        // For decreasing kernels every later term is no larger than `w`. The
        // cut-off does not depend on the threshold, so the denominator is the
        // same for every ε.
        if decreasing && (n - i) as f64 * w < 1e-17 * running {
            break;
        }
    }
    RowValue::Value(inside.unwrap_or(running) / running)
}

fn sorted_distances(sorted: &[f64], z: f64) -> Vec<f64> {
    let n = sorted.len();
    let p = sorted.partition_point(|&x| x < z);
    let mut out = Vec::with_capacity(n);
    let (mut l, mut r) = (p, p);
    while out.len() < n {
        let left = if l > 0 { Some(z - sorted[l - 1]) } else { None };
        let right = if r < n { Some(sorted[r] - z) } else { None };
        match (left, right) {
            (Some(a), Some(b)) if a <= b => {
                out.push(a);
                l -= 1;
            }
            (Some(a), None) => {
                out.push(a);
                l -= 1;
            }
            (_, Some(b)) => {
                out.push(b);
                r += 1;
            }
            (None, None) => unreachable!(),
        }
    }
    out
}

/// Plug-in measure `M̂(z, ε)`: the noise-weighted share of data points within
/// `ε σ̂` of `z`.
pub fn empirical_m<D: NoiseDensity>(data: &DatasetSummary, noise: &D, z: f64, epsilon: f64) -> Result<f64> {
    if !(epsilon >= 0.0) {
        return Err(Error::invalid(format!("epsilon must be >= 0, got {epsilon}")));
    }
    let d = sorted_distances(data.sorted(), z);
    let ln_d: Vec<f64> = d.iter().map(|x| x.ln()).collect();
    match row_measure(&d, &ln_d, noise, epsilon * data.sd()) {
        RowValue::Value(v) => Ok(v),
        RowValue::Undefined => Err(Error::UndefinedPoint(z)),
        RowValue::Excluded => Err(Error::ExcludedPoint(z)),
    }
}

/// The z-grid over which the supremum of `M̂` is taken: equally spaced over
/// `[min - 3σ̂, max + 3σ̂]`, with points that collide with a datum moved by
/// half a grid step.
pub fn evaluation_grid(data: &DatasetSummary) -> Vec<f64> {
    let lo = data.min() - Z_GRID_MARGIN_SD * data.sd();
    let hi = data.max() + Z_GRID_MARGIN_SD * data.sd();
    let step = (hi - lo) / (Z_GRID_POINTS - 1) as f64;
    let sorted = data.sorted();
    (0..Z_GRID_POINTS)
        .map(|i| {
            let z = lo + step * i as f64;
            let p = sorted.partition_point(|&x| x < z);
            let collides = [p.checked_sub(1), Some(p)]
                .into_iter()
                .flatten()
                .filter_map(|j| sorted.get(j))
                .any(|&x| (x - z).abs() <= 1e-12 * z.abs().max(x.abs()).max(f64::MIN_POSITIVE));
            if collides { z + 0.5 * step } else { z }
        })
        .collect()
}

/// Result of calibrating the noise scale to a privacy budget.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScaleCalibration {
    pub shape: f64,
    pub scale: f64,
    /// `sup M̂(Q) - δ` at the returned scale; never positive.
    pub residual: f64,
    /// Set when the feasibility pattern along the search was not a single step.
    pub multi_crossing: bool,
    pub evaluations: usize,
}

/// Distances from every grid point to every datum, sorted per grid point.
///
/// Building the table once per dataset lets the many supremum evaluations of
/// a calibration or a shape sweep reuse the logarithms.
#[derive(Debug, Clone)]
pub struct MeasureTable {
    sd: f64,
    range: f64,
    n: usize,
    z: Vec<f64>,
    dist: Vec<f64>,
    log_dist: Vec<f64>,
}

impl MeasureTable {
    pub fn new(data: &DatasetSummary) -> Self {
        Self::build(data, evaluation_grid(data))
    }

    pub fn with_grid(data: &DatasetSummary, z_grid: Vec<f64>) -> Result<Self> {
        if z_grid.is_empty() || z_grid.windows(2).any(|w| !(w[0] < w[1])) {
            return Err(Error::invalid("z grid must be non-empty and strictly increasing"));
        }
        Ok(Self::build(data, z_grid))
    }

    fn build(data: &DatasetSummary, z: Vec<f64>) -> Self {
        let n = data.n();
        let mut dist = Vec::with_capacity(n * z.len());
        for &zi in &z {
            dist.extend(sorted_distances(data.sorted(), zi));
        }
        let log_dist = dist.iter().map(|d| d.ln()).collect();
        Self { sd: data.sd(), range: data.max() - data.min(), n, z, dist, log_dist }
    }

    pub fn z_grid(&self) -> &[f64] {
        &self.z
    }

    pub fn sd(&self) -> f64 {
        self.sd
    }

    fn row(&self, r: usize) -> (&[f64], &[f64]) {
        let span = r * self.n..(r + 1) * self.n;
        (&self.dist[span.clone()], &self.log_dist[span])
    }

    fn value<D: NoiseDensity>(&self, r: usize, noise: &D, epsilon: f64) -> RowValue {
        let (d, l) = self.row(r);
        row_measure(d, l, noise, epsilon * self.sd)
    }

    /// `M̂(z, ε)` along the grid; undefined and excluded points are dropped.
    pub fn curve<D: NoiseDensity>(&self, noise: &D, epsilon: f64) -> MeasureCurve {
        let mut z_grid = Vec::with_capacity(self.z.len());
        let mut values = Vec::with_capacity(self.z.len());
        for (r, &z) in self.z.iter().enumerate() {
            if let RowValue::Value(v) = self.value(r, noise, epsilon) {
                z_grid.push(z);
                values.push(v);
            }
        }
        MeasureCurve { z_grid, values, epsilon }
    }

    /// Maximum of `M̂(·, ε)` over the grid.
    pub fn sup<D: NoiseDensity>(&self, noise: &D, epsilon: f64) -> f64 {
        (0..self.z.len())
            .filter_map(|r| match self.value(r, noise, epsilon) {
                RowValue::Value(v) => Some(v),
                _ => None,
            })
            .fold(0.0, f64::max)
    }

    /// Whether some grid point has `M̂ > level`, scanning from `hint` and
    /// stopping at the first hit. `hint` is updated to the hit row.
    fn exceeds<D: NoiseDensity>(&self, noise: &D, epsilon: f64, level: f64, hint: &mut usize) -> bool {
        let rows = self.z.len();
        for k in 0..rows {
            let r = (*hint + k) % rows;
            if let RowValue::Value(v) = self.value(r, noise, epsilon) {
                if v > level {
                    *hint = r;
                    return true;
                }
            }
        }
        false
    }

    /// Smallest ε with `sup M̂(·, ε) >= δ`, by bisection.
    pub fn mu<D: NoiseDensity>(&self, noise: &D, delta: f64) -> Result<f64> {
        if !(delta > 0.0 && delta < 1.0) {
            return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
        }
        // Weights do not depend on ε, so each row is reduced once to its
        // distances and cumulative weight fractions.
        let rows: Vec<(Vec<f64>, Vec<f64>)> = (0..self.z.len())
            .filter_map(|r| {
                let (d, l) = self.row(r);
                cumulative_fractions(d, l, noise).map(|c| (d.to_vec(), c))
            })
            .collect();
        let sup_at = |eps: f64| -> f64 {
            let thr = eps * self.sd;
            rows.iter()
                .map(|(d, c)| {
                    let k = d.partition_point(|&di| di <= thr);
                    if k == 0 { 0.0 } else { c[k - 1] }
                })
                .fold(0.0, f64::max)
        };
        let hi = self.range / self.sd + 1.0;
        if sup_at(hi) < delta {
            return Err(Error::Numerical(format!("sup M̂ stays below {delta} at ε = {hi}")));
        }
        let (_, eps) = bisect_predicate(0.0, hi, EPSILON_TOLERANCE, |e| sup_at(e) >= delta);
        Ok(eps)
    }

    /// Scale `η` solving `sup M̂(·, Q; shape, η) = δ`.
    ///
    /// The scale is bracketed by doubling or halving from `σ̂`, then refined
    /// by log-space bisection. The returned scale is the feasible end of the
    /// final bracket, so `sup M̂ <= δ` holds there.
    pub fn calibrate(&self, shape: f64, budget: &PrivacyBudget) -> Result<ScaleCalibration> {
        if !(shape > 0.0 && shape <= 1.0) {
            return Err(Error::invalid(format!("calibration shape must lie in (0, 1], got {shape}")));
        }
        let q = budget.deviation_multiplier();
        let delta = budget.level();
        let (lo_limit, hi_limit) = (SCALE_SEARCH_LIMITS.0 * self.sd, SCALE_SEARCH_LIMITS.1 * self.sd);
        let fail = |reason: String| Error::CalibrationFailure { shape, reason };

        let mut hint = self.z.len() / 2;
        let mut trace: Vec<(f64, bool)> = Vec::new();
        let mut feasible = |eta: f64| -> bool {
            let noise = GammaNoiseParams::new(shape, eta).expect("positive scale");
            let ok = !self.exceeds(&noise, q, delta, &mut hint);
            trace.push((eta, ok));
            ok
        };

        if !feasible(hi_limit) {
            return Err(fail(format!("sup M̂ exceeds {delta} even at scale {hi_limit:e}")));
        }
        let start = self.sd;
        let (lo, hi) = if feasible(start) {
            let mut hi = start;
            let mut lo = start / 2.0;
            while feasible(lo) {
                hi = lo;
                lo /= 2.0;
                if lo < lo_limit {
                    return Err(fail(format!("sup M̂ never exceeds {delta} down to scale {lo_limit:e}")));
                }
            }
            (lo, hi)
        } else {
            let mut lo = start;
            let mut hi = start * 2.0;
            while !feasible(hi) {
                lo = hi;
                hi *= 2.0;
            }
            (lo, hi)
        };
        let (_, scale) = bisect_predicate_log(lo, hi, SCALE_REL_TOLERANCE, &mut feasible);

        let mut path = trace;
        path.sort_by(|a, b| a.0.total_cmp(&b.0));
        let multi_crossing = path.windows(2).any(|w| w[0].1 && !w[1].1);
        if multi_crossing {
            log::warn!("shape {shape}: feasibility is not monotone in the scale; reporting the smallest bracketed solution");
        }
        let noise = GammaNoiseParams::new(shape, scale)?;
        let residual = self.sup(&noise, q) - delta;
        Ok(ScaleCalibration { shape, scale, residual, multi_crossing, evaluations: path.len() + 1 })
    }
}

/// Cumulative weight fractions along ascending distances, or `None` when the
/// row is undefined or excluded.
fn cumulative_fractions<D: NoiseDensity>(d: &[f64], ln_d: &[f64], noise: &D) -> Option<Vec<f64>> {
    if d[0] == 0.0 && noise.singular_at_zero() {
        return None;
    }
    let shift = if noise.decreasing_in_distance() {
        noise.log_kernel(d[0], ln_d[0])
    } else {
        d.iter().zip(ln_d).map(|(&a, &b)| noise.log_kernel(a, b)).fold(f64::NEG_INFINITY, f64::max)
    };
    if (shift + noise.log_normalizer()).exp() == 0.0 {
        return None;
    }
    let mut running = 0.0;
    let mut cum: Vec<f64> = d
        .iter()
        .zip(ln_d)
        .map(|(&a, &b)| {
            running += (noise.log_kernel(a, b) - shift).exp();
            running
        })
        .collect();
    for c in &mut cum {
        *c /= running;
    }
    Some(cum)
}

/// `sup_z M̂(z, ε)` over the default evaluation grid.
pub fn sup_empirical_m<D: NoiseDensity>(data: &DatasetSummary, noise: &D, epsilon: f64) -> f64 {
    MeasureTable::new(data).sup(noise, epsilon)
}

/// Plug-in confidentiality level `μ̂ = min { ε : sup_z M̂(z, ε) >= δ }`.
pub fn empirical_mu<D: NoiseDensity>(data: &DatasetSummary, noise: &D, delta: f64) -> Result<f64> {
    MeasureTable::new(data).mu(noise, delta)
}

/// Noise scale for `shape` at which the plug-in level equals the budget.
pub fn calibrate_scale(data: &DatasetSummary, shape: f64, budget: &PrivacyBudget) -> Result<ScaleCalibration> {
    MeasureTable::new(data).calibrate(shape, budget)
}

/// Scale for which `P(|Y| < ε) = 1 - δ`: the fixed-quantile rule, which
/// guarantees an amount of noise rather than a level of confidentiality.
pub fn fixed_quantile_scale(shape: f64, epsilon: f64, delta: f64) -> Result<f64> {
    if !(shape > 0.0 && shape <= 1.0) {
        return Err(Error::invalid(format!("shape must lie in (0, 1], got {shape}")));
    }
    if !(epsilon > 0.0 && epsilon.is_finite()) {
        return Err(Error::invalid(format!("epsilon must be > 0, got {epsilon}")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::invalid(format!("delta must lie in (0, 1), got {delta}")));
    }
    let target = 1.0 - delta;
    let residual = |log_eta: f64| {
        let p = GammaNoiseParams::new(shape, log_eta.exp()).expect("positive scale");
        p.magnitude_cdf(epsilon) - target
    };
    let centre = epsilon.ln();
    let log_eta = bisect_root(centre - 60.0, centre + 60.0, 1e-15, residual)?;
    Ok(log_eta.exp())
}

/// `P(|X - z| > ε | Z = z)` at each grid point, with `ε` in data units.
pub fn conditional_tail_curve<G, F>(g: G, f: F, epsilon: f64, z_grid: &[f64]) -> Result<MeasureCurve>
where
    G: Fn(f64) -> f64 + Copy,
    F: Fn(f64) -> f64 + Copy,
{
    if z_grid.windows(2).any(|w| !(w[0] < w[1])) {
        return Err(Error::invalid("z grid must be strictly increasing"));
    }
    let values = z_grid
        .iter()
        .map(|&z| true_measure(g, f, 1.0, z, epsilon).map(|m| (1.0 - m).clamp(0.0, 1.0)))
        .collect::<Result<Vec<_>>>()?;
    Ok(MeasureCurve { z_grid: z_grid.to_vec(), values, epsilon })
}
