//! Deconvolution kernel density estimation under two-sided Gamma noise.
//!
//! The kernel is specified only through its Fourier transform
//! `K̃(t) = (1 - t²)³` on `[-1, 1]`. With noise transform
//! `f̃(t) = r^-ϑ cos(ϑΘ)`, the substitution `t = tan(θ)/η` turns every
//! Fourier-domain integral into one over the compact interval
//! `[0, atan(η/b)]`, which is integrated with a fixed Gauss–Legendre rule.

use std::f64::consts::PI;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::noise::GammaNoiseParams;
use crate::quadrature::{GaussLegendre, NeumaierSum};
use crate::search::{bracket_minimum, golden_section};

/// Gauss–Legendre nodes per Fourier-domain integral.
pub const QUADRATURE_NODES: usize = 256;
/// Points in the default output grid.
pub const DEFAULT_GRID_POINTS: usize = 201;
/// Floor on the backed-out data variance, as a fraction of `Var(Z)`.
pub const VARIANCE_FLOOR_FRACTION: f64 = 0.1;
/// Relative tolerance of the bandwidth search.
pub const BANDWIDTH_REL_TOLERANCE: f64 = 1e-5;

fn rule() -> &'static GaussLegendre {
    static RULE: OnceLock<GaussLegendre> = OnceLock::new();
    RULE.get_or_init(|| GaussLegendre::new(QUADRATURE_NODES))
}

/// Constant multiplying `(b⁴/4) R(g'')` in the bias part of the AIMSE.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BiasConstant {
    /// 11520, as displayed for the Gamma-noise AIMSE.
    #[default]
    Paper,
    /// `μ²_{K,2} = K̃''(0)² = 36` for this kernel.
    Kernel,
}

impl BiasConstant {
    pub fn value(self) -> f64 {
        match self {
            BiasConstant::Paper => 11520.0,
            BiasConstant::Kernel => 36.0,
        }
    }
}

impl std::str::FromStr for BiasConstant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(BiasConstant::Paper),
            "kernel" => Ok(BiasConstant::Kernel),
            other => Err(Error::invalid(format!("bias constant must be 'paper' or 'kernel', got '{other}'"))),
        }
    }
}

/// The noise an estimate was computed under.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum Noise {
    /// No noise: `f̃ ≡ 1`, an ordinary kernel density estimate.
    Free,
    Gamma(GammaNoiseParams),
}

impl Noise {
    pub fn variance(&self) -> f64 {
        match self {
            Noise::Free => 0.0,
            Noise::Gamma(p) => p.variance(),
        }
    }
}

impl From<GammaNoiseParams> for Noise {
    fn from(p: GammaNoiseParams) -> Self {
        Noise::Gamma(p)
    }
}

/// Fourier transform of the kernel.
pub fn kernel_ft(t: f64) -> f64 {
    if t.abs() <= 1.0 {
        (1.0 - t * t).powi(3)
    } else {
        0.0
    }
}

/// Normal-reference estimate of `R(g'') = ∫ g''²`.
pub fn normal_reference_roughness(var_x: f64) -> Result<f64> {
    if !(var_x > 0.0 && var_x.is_finite()) {
        return Err(Error::invalid(format!("variance must be > 0, got {var_x}")));
    }
    Ok(0.375 * var_x.powf(-2.5) / PI.sqrt())
}

/// Data variance implied by masked data: `Var(Z) - Var(Y)`, floored at a
/// tenth of `Var(Z)`.
pub fn backed_out_variance(masked_variance: f64, noise: &Noise) -> f64 {
    (masked_variance - noise.variance()).max(VARIANCE_FLOOR_FRACTION * masked_variance)
}

fn check_bandwidth(b: f64) -> Result<()> {
    if b > 0.0 && b.is_finite() {
        Ok(())
    } else {
        Err(Error::invalid(format!("bandwidth must be finite and > 0, got {b}")))
    }
}

/// Node data of the transformed Gamma integrals on `[0, atan(η/b)]`.
struct AngleNode {
    weight: f64,
    tan: f64,
    cos: f64,
    cos_shape: f64,
}

fn angle_nodes(noise: &GammaNoiseParams, b: f64) -> Result<Vec<AngleNode>> {
    let upper = (noise.scale() / b).atan();
    let shape = noise.shape();
    rule()
        .mapped(0.0, upper)
        .map(|(theta, weight)| {
            let cos_shape = (shape * theta).cos();
            if !(cos_shape > 0.0) {
                return Err(Error::Numerical(format!(
                    "noise transform vanishes inside the kernel support (shape {shape}, angle {theta})"
                )));
            }
            Ok(AngleNode { weight, tan: theta.tan(), cos: theta.cos(), cos_shape })
        })
        .collect()
}

/// `∫ |K̃(tb)|² / |f̃(t)|² dt`, the only part of the integrated variance that
/// depends on the noise. Under no noise this is `(1/b) ∫ (1-u²)⁶ du`.
pub fn noise_integral(b: f64, noise: &Noise) -> Result<f64> {
    check_bandwidth(b)?;
    match noise {
        Noise::Free => {
            let s: NeumaierSum = rule().mapped(0.0, 1.0).map(|(u, w)| w * (1.0 - u * u).powi(6)).collect();
            Ok(2.0 * s.total() / b)
        }
        Noise::Gamma(p) => {
            let eta = p.scale();
            let ratio = b / eta;
            let shape = p.shape();
            let s: NeumaierSum = angle_nodes(p, b)?
                .into_iter()
                .map(|n| {
                    let k = 1.0 - ratio * ratio * n.tan * n.tan;
                    let denom = n.cos.powf(shape + 1.0) * n.cos_shape;
                    n.weight * k.powi(6) / (denom * denom)
                })
                .collect();
            Ok(2.0 * s.total() / eta)
        }
    }
}

fn aimse_generic(b: f64, noise: &Noise, roughness: f64, n: usize, bias: BiasConstant) -> Result<f64> {
    if n == 0 {
        return Err(Error::invalid("sample size must be >= 1"));
    }
    let variance = noise_integral(b, noise)? / (2.0 * PI * n as f64);
    Ok(variance + bias.value() * b.powi(4) / 4.0 * roughness)
}

/// Asymptotic integrated mean squared error of the deconvolution estimator.
pub fn aimse(b: f64, noise: &GammaNoiseParams, roughness: f64, n: usize, bias: BiasConstant) -> Result<f64> {
    aimse_generic(b, &Noise::Gamma(*noise), roughness, n, bias)
}

/// Noise-free counterpart of [`aimse`].
pub fn aimse_noise_free(b: f64, roughness: f64, n: usize, bias: BiasConstant) -> Result<f64> {
    aimse_generic(b, &Noise::Free, roughness, n, bias)
}

/// The AIMSE-optimal bandwidth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BandwidthSelection {
    pub bandwidth: f64,
    pub aimse_at_optimum: f64,
    pub roughness_estimate: f64,
    pub bias_constant: f64,
    pub sample_size: usize,
}

/// Minimises the AIMSE over `b` by golden-section search on `log b`.
pub fn select_bandwidth(noise: &Noise, roughness: f64, n: usize, bias: BiasConstant) -> Result<BandwidthSelection> {
    if !(roughness > 0.0 && roughness.is_finite()) {
        return Err(Error::invalid(format!("roughness must be > 0, got {roughness}")));
    }
    if n == 0 {
        return Err(Error::invalid("sample size must be >= 1"));
    }
    // Starting point: the noise-free optimum, which has a closed form.
    let v0 = noise_integral(1.0, &Noise::Free)? / (2.0 * PI * n as f64);
    let start = (v0 / (bias.value() * roughness)).powf(0.2);

    let mut failure = None;
    let mut objective = |u: f64| match aimse_generic(u.exp(), noise, roughness, n, bias) {
        Ok(v) => v.ln(),
        Err(e) => {
            failure.get_or_insert(e);
            f64::INFINITY
        }
    };
    let (lo, _, hi) = bracket_minimum(start.ln(), std::f64::consts::LN_2, -60.0, 60.0, &mut objective)
        .map_err(|_| Error::Numerical("could not bracket the AIMSE minimum".into()))?;
    let (u, _) = golden_section(lo, hi, BANDWIDTH_REL_TOLERANCE, &mut objective);
    if let Some(e) = failure {
        return Err(e);
    }
    let bandwidth = u.exp();
    Ok(BandwidthSelection {
        bandwidth,
        aimse_at_optimum: aimse_generic(bandwidth, noise, roughness, n, bias)?,
        roughness_estimate: roughness,
        bias_constant: bias.value(),
        sample_size: n,
    })
}

/// A density and CDF estimate on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityEstimate {
    pub grid: Vec<f64>,
    /// `ĝ(x)`; can be slightly negative.
    pub density: Vec<f64>,
    /// `Ĝ(x)` after the monotone projection and clip to `[0, 1]`.
    pub cdf: Vec<f64>,
    pub bandwidth: f64,
    pub noise: Noise,
    /// Largest excursion of the raw cumulative integral outside `[0, 1]`.
    pub cdf_overshoot: f64,
    /// Trapezoidal `∫ ĝ` over the grid.
    pub mass: f64,
}

impl DensityEstimate {
    /// `Ĝ(x)` by linear interpolation; 0 left of the grid and the last value
    /// right of it.
    pub fn cdf_at(&self, x: f64) -> f64 {
        let g = &self.grid;
        if x <= g[0] {
            return if x == g[0] { self.cdf[0] } else { 0.0 };
        }
        let last = g.len() - 1;
        if x >= g[last] {
            return self.cdf[last];
        }
        let i = g.partition_point(|&v| v <= x) - 1;
        let t = (x - g[i]) / (g[i + 1] - g[i]);
        self.cdf[i] + t * (self.cdf[i + 1] - self.cdf[i])
    }
}

/// `ĝ(x) = prefactor Σ_k a_k Σ_j cos(s_k (x - Z_j))`, with the data sums
/// folded into per-frequency cosine and sine totals.
struct FrequencyRule {
    freqs: Vec<f64>,
    amplitudes: Vec<f64>,
    prefactor: f64,
}

impl FrequencyRule {
    fn gamma(noise: &GammaNoiseParams, b: f64, n: usize) -> Result<Self> {
        let eta = noise.scale();
        let ratio = b / eta;
        let shape = noise.shape();
        let nodes = angle_nodes(noise, b)?;
        let freqs = nodes.iter().map(|n| n.tan / eta).collect();
        let amplitudes = nodes
            .iter()
            .map(|n| {
                let k = (1.0 - ratio * ratio * n.tan * n.tan).powi(3);
                n.weight * k / (n.cos.powf(shape + 2.0) * n.cos_shape)
            })
            .collect();
        Ok(Self { freqs, amplitudes, prefactor: 1.0 / (eta * PI * n as f64) })
    }

    fn noise_free(b: f64, n: usize) -> Self {
        let (freqs, amplitudes) = rule().mapped(0.0, 1.0).map(|(u, w)| (u / b, w * (1.0 - u * u).powi(3))).unzip();
        Self { freqs, amplitudes, prefactor: 1.0 / (PI * n as f64 * b) }
    }

    fn evaluate(&self, data: &[f64], grid: &[f64]) -> Vec<f64> {
        let sums: Vec<(f64, f64)> = self
            .freqs
            .iter()
            .map(|&s| {
                let mut c = NeumaierSum::default();
                let mut si = NeumaierSum::default();
                for &z in data {
                    let (sin, cos) = (s * z).sin_cos();
                    c.add(cos);
                    si.add(sin);
                }
                (c.total(), si.total())
            })
            .collect();
        grid.iter()
            .map(|&x| {
                let mut acc = NeumaierSum::default();
                for ((&s, &a), &(c, si)) in self.freqs.iter().zip(&self.amplitudes).zip(&sums) {
                    let (sin, cos) = (s * x).sin_cos();
                    acc.add(a * (cos * c + sin * si));
                }
                self.prefactor * acc.total()
            })
            .collect()
    }
}

fn check_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 2 || grid.windows(2).any(|w| !(w[0] < w[1])) || grid.iter().any(|x| !x.is_finite()) {
        return Err(Error::invalid("grid must hold at least two finite, strictly increasing points"));
    }
    Ok(())
}

/// Pool-adjacent-violators projection onto non-decreasing sequences.
fn isotonic(values: &[f64]) -> Vec<f64> {
    let mut blocks: Vec<(f64, usize)> = Vec::with_capacity(values.len());
    for &v in values {
        blocks.push((v, 1));
        while blocks.len() >= 2 {
            let (m2, w2) = blocks[blocks.len() - 1];
            let (m1, w1) = blocks[blocks.len() - 2];
            if m1 <= m2 {
                break;
            }
            blocks.pop();
            let w = w1 + w2;
            *blocks.last_mut().unwrap() = ((m1 * w1 as f64 + m2 * w2 as f64) / w as f64, w);
        }
    }
    blocks.into_iter().flat_map(|(m, w)| std::iter::repeat_n(m, w)).collect()
}

fn assemble(grid: &[f64], density: Vec<f64>, bandwidth: f64, noise: Noise) -> DensityEstimate {
    let mut raw = Vec::with_capacity(grid.len());
    let mut acc = NeumaierSum::default();
    raw.push(0.0);
    for i in 1..grid.len() {
        acc.add(0.5 * (density[i] + density[i - 1]) * (grid[i] - grid[i - 1]));
        raw.push(acc.total());
    }
    let mass = acc.total();
    let hi = raw.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lo = raw.iter().copied().fold(f64::INFINITY, f64::min);
    let cdf_overshoot = (hi - 1.0).max(-lo).max(0.0);
    let cdf = isotonic(&raw).into_iter().map(|v| v.clamp(0.0, 1.0)).collect();
    DensityEstimate { grid: grid.to_vec(), density, cdf, bandwidth, noise, cdf_overshoot, mass }
}

/// Deconvolution estimate of the data density from masked values.
pub fn estimate_density(masked: &[f64], noise: &GammaNoiseParams, bandwidth: f64, grid: &[f64]) -> Result<DensityEstimate> {
    check_bandwidth(bandwidth)?;
    check_grid(grid)?;
    if masked.is_empty() {
        return Err(Error::invalid("no masked values"));
    }
    let rule = FrequencyRule::gamma(noise, bandwidth, masked.len())?;
    let density = rule.evaluate(masked, grid);
    Ok(assemble(grid, density, bandwidth, Noise::Gamma(*noise)))
}

/// Kernel estimate with `f̃ ≡ 1` at a given bandwidth.
pub fn kernel_estimate(data: &[f64], bandwidth: f64, grid: &[f64]) -> Result<DensityEstimate> {
    check_bandwidth(bandwidth)?;
    check_grid(grid)?;
    if data.is_empty() {
        return Err(Error::invalid("no data values"));
    }
    let density = FrequencyRule::noise_free(bandwidth, data.len()).evaluate(data, grid);
    Ok(assemble(grid, density, bandwidth, Noise::Free))
}

/// Noise-free estimate with the AIMSE bandwidth from the sample variance.
pub fn noise_free_estimate(data: &[f64], grid: &[f64], bias: BiasConstant) -> Result<DensityEstimate> {
    let var = sample_variance(data)?;
    let sel = select_bandwidth(&Noise::Free, normal_reference_roughness(var)?, data.len(), bias)?;
    kernel_estimate(data, sel.bandwidth, grid)
}

/// Full analyst-side pipeline: roughness from the backed-out variance,
/// AIMSE bandwidth, then the deconvolution estimate.
pub fn deconvolve(masked: &[f64], noise: &GammaNoiseParams, grid: &[f64], bias: BiasConstant) -> Result<(DensityEstimate, BandwidthSelection)> {
    let var = backed_out_variance(sample_variance(masked)?, &Noise::Gamma(*noise));
    let sel = select_bandwidth(&Noise::Gamma(*noise), normal_reference_roughness(var)?, masked.len(), bias)?;
    Ok((estimate_density(masked, noise, sel.bandwidth, grid)?, sel))
}

/// 201 equally spaced points over `[min - sd, max + sd]`.
pub fn default_grid(values: &[f64]) -> Result<Vec<f64>> {
    grid_with_points(values, DEFAULT_GRID_POINTS)
}

pub fn grid_with_points(values: &[f64], points: usize) -> Result<Vec<f64>> {
    if points < 2 {
        return Err(Error::invalid("grid needs at least two points"));
    }
    let sd = sample_variance(values)?.sqrt();
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min) - sd;
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max) + sd;
    Ok(linspace(lo, hi, points))
}

pub(crate) fn linspace(lo: f64, hi: f64, points: usize) -> Vec<f64> {
    let step = (hi - lo) / (points - 1) as f64;
    (0..points).map(|i| if i == points - 1 { hi } else { lo + step * i as f64 }).collect()
}

pub(crate) fn sample_variance(values: &[f64]) -> Result<f64> {
    let n = values.len();
    if n < 2 {
        return Err(Error::DegenerateData(format!("need at least 2 values, got {n}")));
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n as f64 - 1.0);
    if !(var > 0.0 && var.is_finite()) {
        return Err(Error::DegenerateData("values have zero or non-finite variance".into()));
    }
    Ok(var)
}
