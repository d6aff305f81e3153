//! Choice of the noise shape.
//!
//! For each shape on a grid the scale is calibrated to the privacy budget,
//! which traces the feasibility frontier `η(ϑ)`. Among frontier points the
//! one with the smallest noise-dependent MISE term
//! `J = ∫ |K̃(tb)|² / |f̃(t)|² dt` is selected, each evaluated at its own
//! AIMSE-optimal bandwidth.

use serde::{Deserialize, Serialize};

use crate::confidentiality::{DatasetSummary, MeasureTable, PrivacyBudget};
use crate::deconvolution::{noise_integral, normal_reference_roughness, select_bandwidth, BiasConstant, Noise};
use crate::error::{Error, Result};
use crate::noise::GammaNoiseParams;

/// Relative tolerance within which two objectives count as tied.
pub const TIE_TOLERANCE: f64 = 1e-12;

/// `start:stop:step` grid of shapes in `(0, 1]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShapeGrid {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl Default for ShapeGrid {
    fn default() -> Self {
        Self { start: 0.05, stop: 1.0, step: 0.05 }
    }
}

impl ShapeGrid {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(step > 0.0 && step.is_finite()) {
            return Err(Error::invalid(format!("shape grid step must be > 0, got {step}")));
        }
        if !(start > 0.0 && stop <= 1.0 && start <= stop) {
            return Err(Error::invalid(format!("shape grid must satisfy 0 < start <= stop <= 1, got {start}:{stop}")));
        }
        Ok(Self { start, stop, step })
    }

    /// Grid values, rounded to 12 decimals so that e.g. `0.8` is exact.
    pub fn values(&self) -> Vec<f64> {
        let count = ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1;
        (0..count)
            .map(|i| ((self.start + i as f64 * self.step) * 1e12).round() / 1e12)
            .filter(|&v| v > 0.0 && v <= 1.0)
            .collect()
    }
}

impl std::str::FromStr for ShapeGrid {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let parts: Vec<&str> = s.split(':').collect();
        if parts.len() != 3 {
            return Err(Error::invalid(format!("expected start:stop:step, got '{s}'")));
        }
        let num = |p: &str| p.trim().parse::<f64>().map_err(|_| Error::invalid(format!("bad number '{p}' in shape grid")));
        ShapeGrid::new(num(parts[0])?, num(parts[1])?, num(parts[2])?)
    }
}

/// One point on the feasibility frontier.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FrontierPoint {
    pub shape: f64,
    pub calibrated_scale: f64,
    pub bandwidth: f64,
    pub objective: f64,
    /// `sup M̂ - δ` at the calibrated scale.
    pub residual: f64,
    pub multi_crossing: bool,
}

impl FrontierPoint {
    pub fn params(&self) -> GammaNoiseParams {
        GammaNoiseParams::new(self.shape, self.calibrated_scale).expect("frontier holds valid parameters")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionReport {
    pub frontier: Vec<FrontierPoint>,
    pub optimal_shape: f64,
    pub optimal_scale: f64,
    pub optimal_bandwidth: f64,
    pub optimal_objective: f64,
    pub budget: PrivacyBudget,
    pub data_sd: f64,
}

impl SelectionReport {
    pub fn optimal_params(&self) -> GammaNoiseParams {
        GammaNoiseParams::new(self.optimal_shape, self.optimal_scale).expect("frontier holds valid parameters")
    }
}

/// `∫ |K̃(tb)|² / |f̃(t)|² dt` for the given noise and bandwidth.
pub fn objective_j(noise: &GammaNoiseParams, bandwidth: f64) -> Result<f64> {
    noise_integral(bandwidth, &Noise::Gamma(*noise))
}

/// Frontier over `shapes`, reusing a prebuilt measure table.
pub fn sweep_with_table(
    table: &MeasureTable,
    data: &DatasetSummary,
    budget: &PrivacyBudget,
    shapes: &[f64],
    bias: BiasConstant,
) -> Result<Vec<FrontierPoint>> {
    if shapes.is_empty() {
        return Err(Error::invalid("shape grid is empty"));
    }
    if let Some(bad) = shapes.iter().find(|&&s| !(s > 0.0 && s <= 1.0)) {
        return Err(Error::invalid(format!("shape {bad} outside (0, 1]")));
    }
    let roughness = normal_reference_roughness(data.variance())?;
    let mut frontier = Vec::with_capacity(shapes.len());
    for &shape in shapes {
        let cal = match table.calibrate(shape, budget) {
            Ok(c) => c,
            Err(e @ Error::CalibrationFailure { .. }) => {
                log::warn!("omitting shape {shape}: {e}");
                continue;
            }
            Err(e) => return Err(e),
        };
        let params = GammaNoiseParams::new(shape, cal.scale)?;
        let sel = select_bandwidth(&Noise::Gamma(params), roughness, data.n(), bias)?;
        frontier.push(FrontierPoint {
            shape,
            calibrated_scale: cal.scale,
            bandwidth: sel.bandwidth,
            objective: objective_j(&params, sel.bandwidth)?,
            residual: cal.residual,
            multi_crossing: cal.multi_crossing,
        });
    }
    if frontier.is_empty() {
        return Err(Error::EmptyFrontier);
    }
    Ok(frontier)
}

/// Calibrates every shape and evaluates `J` at its AIMSE bandwidth.
/// Shapes that cannot be calibrated are left out.
pub fn sweep(data: &DatasetSummary, budget: &PrivacyBudget, shapes: &[f64], bias: BiasConstant) -> Result<Vec<FrontierPoint>> {
    sweep_with_table(&MeasureTable::new(data), data, budget, shapes, bias)
}

/// Frontier point of minimal objective; near-ties go to the larger shape.
pub fn select_optimal(frontier: Vec<FrontierPoint>, budget: PrivacyBudget, data_sd: f64) -> Result<SelectionReport> {
    let best = frontier
        .iter()
        .copied()
        .reduce(|best, p| {
            let tied = (p.objective - best.objective).abs() <= TIE_TOLERANCE * best.objective.abs().max(p.objective.abs());
            if (tied && p.shape > best.shape) || (!tied && p.objective < best.objective) {
                p
            } else {
                best
            }
        })
        .ok_or(Error::EmptyFrontier)?;
    Ok(SelectionReport {
        optimal_shape: best.shape,
        optimal_scale: best.calibrated_scale,
        optimal_bandwidth: best.bandwidth,
        optimal_objective: best.objective,
        frontier,
        budget,
        data_sd,
    })
}

/// Sweep followed by selection.
pub fn select(data: &DatasetSummary, budget: &PrivacyBudget, shapes: &[f64], bias: BiasConstant) -> Result<SelectionReport> {
    let frontier = sweep(data, budget, shapes, bias)?;
    select_optimal(frontier, *budget, data.sd())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::confidentiality::sup_empirical_m;
    use crate::quadrature::adaptive;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha20Rng;
    use rand_distr::{Distribution, StandardNormal};

    fn point(shape: f64, objective: f64) -> FrontierPoint {
        FrontierPoint { shape, calibrated_scale: 1.0, bandwidth: 0.1, objective, residual: 0.0, multi_crossing: false }
    }

    fn normal_sample(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha20Rng::seed_from_u64(seed);
        (0..n).map(|_| StandardNormal.sample(&mut rng)).collect()
    }

    #[test]
    fn shape_grid_default_has_twenty_points() {
        let v = ShapeGrid::default().values();
        assert_eq!(v.len(), 20);
        assert_eq!(v[15], 0.8);
        assert_eq!(v[19], 1.0);
        assert_eq!("0.5:1:0.25".parse::<ShapeGrid>().unwrap().values(), vec![0.5, 0.75, 1.0]);
        assert!("0:1:0.1".parse::<ShapeGrid>().is_err());
        assert!("0.1:1.2:0.1".parse::<ShapeGrid>().is_err());
        assert!("0.1:1:0".parse::<ShapeGrid>().is_err());
    }

    #[test]
    fn objective_identity_with_aimse() {
        let p = GammaNoiseParams::new(0.7, 1.3).unwrap();
        let b = 0.25;
        let n = 400;
        let variance = crate::deconvolution::aimse(b, &p, 1.0, n, BiasConstant::Kernel).unwrap() - 36.0 * b.powi(4) / 4.0;
        let j = objective_j(&p, b).unwrap();
        assert!((j - 2.0 * std::f64::consts::PI * n as f64 * variance).abs() <= 1e-9 * j);
    }

    #[test]
    fn objective_grows_with_scale() {
        let js: Vec<f64> = [0.5, 1.0, 2.0]
            .iter()
            .map(|&eta| objective_j(&GammaNoiseParams::new(1.0, eta).unwrap(), 0.3).unwrap())
            .collect();
        assert!(js[0] < js[1] && js[1] < js[2], "{js:?}");
    }

    #[test]
    fn objective_small_scale_limit() {
        let b = 0.3;
        let limit = adaptive(|u: f64| (1.0 - u * u).powi(6), -1.0, 1.0, 1e-14, 0.0).unwrap().value / b;
        let j = objective_j(&GammaNoiseParams::new(1.0, 1e-6).unwrap(), b).unwrap();
        assert!((j - limit).abs() / limit < 1e-6, "{j} vs {limit}");
    }

    #[test]
    fn select_picks_minimum_and_breaks_ties_upward() {
        let report = select_optimal(vec![point(0.5, 3.0), point(0.8, 1.0), point(0.9, 2.0)], PrivacyBudget::default(), 1.0).unwrap();
        assert_eq!(report.optimal_shape, 0.8);
        assert_eq!(report.optimal_objective, 1.0);

        let tie = select_optimal(vec![point(0.6, 1.0), point(0.9, 1.0 + 1e-14), point(0.7, 1.0)], PrivacyBudget::default(), 1.0).unwrap();
        assert_eq!(tie.optimal_shape, 0.9);

        let single = select_optimal(vec![point(0.4, 7.0)], PrivacyBudget::default(), 1.0).unwrap();
        assert_eq!(single.optimal_shape, 0.4);
        assert!(select_optimal(vec![], PrivacyBudget::default(), 1.0).is_err());
    }

    #[test]
    fn sweep_points_are_feasible_and_deterministic() {
        let data = DatasetSummary::new(normal_sample(300, 21)).unwrap();
        let budget = PrivacyBudget::default();
        let shapes = [0.5, 0.7, 0.9, 1.0];
        let frontier = sweep(&data, &budget, &shapes, BiasConstant::Paper).unwrap();
        for p in &frontier {
            let sup = sup_empirical_m(&data, &p.params(), budget.deviation_multiplier());
            assert!(sup <= budget.level() + 1e-12, "shape {}: {sup}", p.shape);
            assert!(p.calibrated_scale > 0.0 && p.objective > 0.0);
        }
        let again = sweep(&data, &budget, &shapes, BiasConstant::Paper).unwrap();
        assert_eq!(frontier, again);
    }

    #[test]
    fn sweep_rescaling_rescales_scales_and_keeps_argmin() {
        let xs = normal_sample(80, 22);
        let budget = PrivacyBudget::default();
        let shapes = [0.6, 0.8, 1.0];
        let a = select(&DatasetSummary::new(xs.clone()).unwrap(), &budget, &shapes, BiasConstant::Paper).unwrap();
        let b = select(&DatasetSummary::new(xs.iter().map(|x| 3.0 * x).collect()).unwrap(), &budget, &shapes, BiasConstant::Paper).unwrap();
        assert_eq!(a.frontier.len(), b.frontier.len());
        for (p, q) in a.frontier.iter().zip(&b.frontier) {
            assert!((q.calibrated_scale / p.calibrated_scale - 3.0).abs() < 1e-3);
        }
        assert_eq!(a.optimal_shape, b.optimal_shape);
    }

    #[test]
    fn empty_grid_rejected() {
        let data = DatasetSummary::new(normal_sample(20, 23)).unwrap();
        assert!(sweep(&data, &PrivacyBudget::default(), &[], BiasConstant::Paper).is_err());
        assert!(sweep(&data, &PrivacyBudget::default(), &[1.5], BiasConstant::Paper).is_err());
    }

    proptest! {
        #[test]
        fn select_is_exact_argmin(objs in proptest::collection::vec(1e-3f64..1e3, 1..25)) {
            let frontier: Vec<FrontierPoint> = objs.iter().enumerate().map(|(i, &o)| point(0.04 * (i + 1) as f64, o)).collect();
            let report = select_optimal(frontier, PrivacyBudget::default(), 1.0).unwrap();
            let min = objs.iter().copied().fold(f64::INFINITY, f64::min);
            prop_assert!((report.optimal_objective - min).abs() <= TIE_TOLERANCE * min);
        }
    }
}
