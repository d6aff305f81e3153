//! Monte Carlo comparison of CDF recovery with no noise, Laplace noise and
//! the selected Gamma noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Exp, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use statrs::function::erf::erf;

use crate::confidentiality::{DatasetSummary, MeasureTable, PrivacyBudget};
use crate::deconvolution::{deconvolve, grid_with_points, linspace, noise_free_estimate, BiasConstant, DensityEstimate, DEFAULT_GRID_POINTS};
use crate::error::{Error, Result};
use crate::noise::GammaNoiseParams;
use crate::optimizer::{select_optimal, sweep_with_table, ShapeGrid};
use crate::quadrature::NeumaierSum;

/// Largest fraction of replications that may fail before a study is invalid.
pub const MAX_DROP_FRACTION: f64 = 0.05;
/// Default number of points in the CDF error grid.
pub const DEFAULT_ERROR_GRID: usize = 201;

/// Reference distributions for the study.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Law {
    /// Exponential with mean 1.
    Exponential,
    /// N(0, 1).
    Normal,
    /// Laplace with location 0 and scale 10.
    Laplace,
    /// Uniform on (0, 10).
    Uniform,
}

impl Law {
    pub const ALL: [Law; 4] = [Law::Exponential, Law::Normal, Law::Laplace, Law::Uniform];

    pub fn name(self) -> &'static str {
        match self {
            Law::Exponential => "exponential",
            Law::Normal => "normal",
            Law::Laplace => "laplace",
            Law::Uniform => "uniform",
        }
    }
}

impl std::fmt::Display for Law {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

impl std::str::FromStr for Law {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Law::ALL
            .into_iter()
            .find(|l| l.name() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown distribution '{s}'; expected one of exponential, normal, laplace, uniform")))
    }
}

const LAPLACE_SCALE: f64 = 10.0;
const UNIFORM_UPPER: f64 = 10.0;

/// Sampler, exact CDF and error range of a reference law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceLaw {
    pub law: Law,
    pub range: (f64, f64),
}

impl ReferenceLaw {
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R, n: usize) -> Vec<f64> {
        match self.law {
            Law::Exponential => {
                let e = Exp::new(1.0).expect("valid rate");
                (0..n).map(|_| e.sample(rng)).collect()
            }
            Law::Normal => (0..n).map(|_| StandardNormal.sample(rng)).collect(),
            Law::Laplace => {
                let e = Exp::new(1.0 / LAPLACE_SCALE).expect("valid rate");
                (0..n)
                    .map(|_| {
                        let m: f64 = e.sample(rng);
                        if rng.random::<bool>() { m } else { -m }
                    })
                    .collect()
            }
            Law::Uniform => {
                let u = Uniform::new(0.0, UNIFORM_UPPER).expect("valid bounds");
                (0..n).map(|_| u.sample(rng)).collect()
            }
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        match self.law {
            Law::Exponential => {
                if x <= 0.0 { 0.0 } else { -(-x).exp_m1() }
            }
            Law::Normal => 0.5 * (1.0 + erf(x / std::f64::consts::SQRT_2)),
            Law::Laplace => {
                if x < 0.0 {
                    0.5 * (x / LAPLACE_SCALE).exp()
                } else {
                    1.0 - 0.5 * (-x / LAPLACE_SCALE).exp()
                }
            }
            Law::Uniform => (x / UNIFORM_UPPER).clamp(0.0, 1.0),
        }
    }
}

/// The reference law with its CDF-error range: the support for the uniform,
/// `(-3, 3)` for the normal, `[0, q_0.9999]` for the exponential and ±3
/// standard deviations for the Laplace.
pub fn reference_law(law: Law) -> ReferenceLaw {
    let range = match law {
        Law::Exponential => (0.0, -(1e-4f64).ln()),
        Law::Normal => (-3.0, 3.0),
        Law::Laplace => {
            let sd = LAPLACE_SCALE * std::f64::consts::SQRT_2;
            (-3.0 * sd, 3.0 * sd)
        }
        Law::Uniform => (0.0, UNIFORM_UPPER),
    };
    ReferenceLaw { law, range }
}

/// Mean squared CDF error over `grid_size` equidistant points of `range`.
pub fn cdf_error<F: Fn(f64) -> f64>(estimate: &DensityEstimate, true_cdf: F, range: (f64, f64), grid_size: usize) -> Result<f64> {
    if grid_size < 2 {
        return Err(Error::invalid("error grid needs at least two points"));
    }
    if !(range.0 < range.1) {
        return Err(Error::invalid("error range must be increasing"));
    }
    let s: NeumaierSum = linspace(range.0, range.1, grid_size)
        .into_iter()
        .map(|x| (estimate.cdf_at(x) - true_cdf(x)).powi(2))
        .collect();
    Ok(s.total() / grid_size as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub law: Law,
    pub n: usize,
    pub budget: PrivacyBudget,
    pub replications: usize,
    pub error_grid_size: usize,
    pub base_seed: u64,
    pub shape_grid: ShapeGrid,
    pub bias: BiasConstant,
    /// Rerun the shape sweep in every replication; otherwise the optimum of
    /// the first successful replication is reused.
    pub reselect_per_replication: bool,
    /// Points in each replication's estimation grid.
    pub estimate_grid_points: usize,
}

impl StudyConfig {
    pub fn new(law: Law, n: usize, replications: usize, base_seed: u64) -> Self {
        Self {
            law,
            n,
            budget: PrivacyBudget::default(),
            replications,
            error_grid_size: DEFAULT_ERROR_GRID,
            base_seed,
            shape_grid: ShapeGrid::default(),
            bias: BiasConstant::default(),
            reselect_per_replication: true,
            estimate_grid_points: DEFAULT_GRID_POINTS,
        }
    }

    fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::invalid("study sample size must be >= 2"));
        }
        if self.replications < 1 {
            return Err(Error::invalid("study needs at least one replication"));
        }
        if self.error_grid_size < 2 || self.estimate_grid_points < 2 {
            return Err(Error::invalid("grids need at least two points"));
        }
        Ok(())
    }
}

/// One row of the per-replication trace.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ReplicationRecord {
    pub rep: usize,
    pub sampling_error: f64,
    pub laplace_error: f64,
    pub optimal_error: f64,
    pub laplace_scale: f64,
    pub theta_star: f64,
    pub eta_star: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub config: StudyConfig,
    pub sampling_error: f64,
    pub laplace_error: f64,
    pub optimal_error: f64,
    pub frac_laplace: f64,
    pub frac_optimal: f64,
    pub ratio: f64,
    pub optimal_params: GammaNoiseParams,
    pub replications_used: usize,
    pub replications_dropped: usize,
    #[serde(skip)]
    pub trace: Vec<ReplicationRecord>,
}

/// Seed for stream `tag` of replication `rep`: the first eight bytes of
/// SHA-256 over the base seed, replication index and tag.
pub fn derive_seed(base_seed: u64, rep: u64, tag: &str) -> u64 {
    let mut h = Sha256::new();
    h.update(base_seed.to_le_bytes());
    h.update(rep.to_le_bytes());
    h.update(tag.as_bytes());
    let digest = h.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("digest has 32 bytes"))
}

fn rng_for(config: &StudyConfig, rep: usize, tag: &str) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(derive_seed(config.base_seed, rep as u64, tag))
}

fn masked_error(x: &[f64], params: &GammaNoiseParams, mut rng: ChaCha20Rng, law: &ReferenceLaw, config: &StudyConfig) -> Result<f64> {
    let noise = params.sample_with(&mut rng, x.len());
    let z: Vec<f64> = x.iter().zip(&noise).map(|(a, b)| a + b).collect();
    let grid = grid_with_points(&z, config.estimate_grid_points)?;
    let (est, _) = deconvolve(&z, params, &grid, config.bias)?;
    cdf_error(&est, |v| law.cdf(v), law.range, config.error_grid_size)
}

fn replicate(config: &StudyConfig, rep: usize, fixed: Option<GammaNoiseParams>) -> Result<ReplicationRecord> {
    let law = reference_law(config.law);
    let x = law.sample(&mut rng_for(config, rep, "data"), config.n);
    let data = DatasetSummary::new(x)?;
    let x = data.values();

    let grid = grid_with_points(x, config.estimate_grid_points)?;
    let plain = noise_free_estimate(x, &grid, config.bias)?;
    let sampling_error = cdf_error(&plain, |v| law.cdf(v), law.range, config.error_grid_size)?;

    let table = MeasureTable::new(&data);
    let laplace = GammaNoiseParams::laplace(table.calibrate(1.0, &config.budget)?.scale)?;
    let laplace_error = masked_error(x, &laplace, rng_for(config, rep, "laplace-noise"), &law, config)?;

    let optimal = match fixed {
        Some(p) => p,
        None => {
            let frontier = sweep_with_table(&table, &data, &config.budget, &config.shape_grid.values(), config.bias)?;
            select_optimal(frontier, config.budget, data.sd())?.optimal_params()
        }
    };
    let optimal_error = masked_error(x, &optimal, rng_for(config, rep, "optimal-noise"), &law, config)?;

    Ok(ReplicationRecord {
        rep,
        sampling_error,
        laplace_error,
        optimal_error,
        laplace_scale: laplace.scale(),
        theta_star: optimal.shape(),
        eta_star: optimal.scale(),
    })
}

/// Modal shape (ties to the larger), with the median scale among the
/// replications that chose it.
fn consensus_params(trace: &[ReplicationRecord]) -> Result<GammaNoiseParams> {
    let mut shapes: Vec<f64> = trace.iter().map(|r| r.theta_star).collect();
    shapes.sort_by(f64::total_cmp);
    let mut best = (shapes[0], 0usize);
    let mut i = 0;
    while i < shapes.len() {
        let j = shapes[i..].iter().take_while(|&&s| s == shapes[i]).count();
        if j >= best.1 {
            best = (shapes[i], j);
        }
        i += j;
    }
    let mut scales: Vec<f64> = trace.iter().filter(|r| r.theta_star == best.0).map(|r| r.eta_star).collect();
    scales.sort_by(f64::total_cmp);
    let m = scales.len();
    let median = if m % 2 == 1 { scales[m / 2] } else { 0.5 * (scales[m / 2 - 1] + scales[m / 2]) };
    GammaNoiseParams::new(best.0, median)
}

/// Runs the study. Replications that fail are dropped and counted; the
/// study is rejected when more than 5% of them fail.
pub fn run_study(config: &StudyConfig) -> Result<StudyReport> {
    config.validate()?;
    let mut trace = Vec::with_capacity(config.replications);
    let mut dropped = 0usize;
    let mut fixed = None;
    for rep in 0..config.replications {
        match replicate(config, rep, fixed) {
            Ok(rec) => {
                if !config.reselect_per_replication && fixed.is_none() {
                    fixed = Some(GammaNoiseParams::new(rec.theta_star, rec.eta_star)?);
                }
                trace.push(rec);
            }
            Err(e) => {
                log::warn!("replication {rep} dropped: {e}");
                dropped += 1;
            }
        }
    }
    if trace.is_empty() || dropped as f64 > MAX_DROP_FRACTION * config.replications as f64 {
        return Err(Error::StudyInvalid { dropped, total: config.replications });
    }
    let mean = |f: fn(&ReplicationRecord) -> f64| trace.iter().map(f).collect::<NeumaierSum>().total() / trace.len() as f64;
    let s = mean(|r| r.sampling_error);
    let l = mean(|r| r.laplace_error);
    let o = mean(|r| r.optimal_error);
    Ok(StudyReport {
        config: *config,
        sampling_error: s,
        laplace_error: l,
        optimal_error: o,
        frac_laplace: (l - s) / l,
        frac_optimal: (o - s) / o,
        ratio: (l - s) / (o - s),
        optimal_params: consensus_params(&trace)?,
        replications_used: trace.len(),
        replications_dropped: dropped,
        trace,
    })
}
