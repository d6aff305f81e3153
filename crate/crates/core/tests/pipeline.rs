use gammask::deconvolution::{deconvolve, grid_with_points};
use gammask::evaluation::{reference_law, Law};
use gammask::optimizer::select;
use gammask::{cdf_error, sup_empirical_m, BiasConstant, DatasetSummary, GammaNoiseParams, PrivacyBudget, ShapeGrid};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

fn sample(law: Law, n: usize, seed: u64) -> Vec<f64> {
    reference_law(law).sample(&mut ChaCha20Rng::seed_from_u64(seed), n)
}

#[test]
fn select_mask_and_recover() {
    let x = sample(Law::Normal, 600, 42);
    let data = DatasetSummary::new(x.clone()).unwrap();
    let budget = PrivacyBudget::default();
    let report = select(&data, &budget, &ShapeGrid::new(0.5, 1.0, 0.1).unwrap().values(), BiasConstant::Paper).unwrap();

    for p in &report.frontier {
        let sup = sup_empirical_m(&data, &p.params(), budget.deviation_multiplier());
        assert!(sup <= budget.level() + 1e-9, "shape {}: {sup}", p.shape);
    }
    let best = report.frontier.iter().map(|p| p.objective).fold(f64::INFINITY, f64::min);
    assert_eq!(report.optimal_objective, best);

    let noise = report.optimal_params();
    let y = noise.sample(x.len(), 1);
    let z: Vec<f64> = x.iter().zip(&y).map(|(a, b)| a + b).collect();
    let grid = grid_with_points(&z, 201).unwrap();
    let (est, _) = deconvolve(&z, &noise, &grid, BiasConstant::Paper).unwrap();
    let law = reference_law(Law::Normal);
    let err = cdf_error(&est, |v| law.cdf(v), law.range, 201).unwrap();
    assert!(err < 1e-3, "{err}");
    assert!(est.cdf.windows(2).all(|w| w[0] <= w[1]));
}

#[test]
fn rescaling_data_rescales_the_frontier() {
    let x = sample(Law::Laplace, 60, 3);
    let c = 3.0;
    let budget = PrivacyBudget::default();
    let shapes = ShapeGrid::new(0.6, 1.0, 0.1).unwrap().values();
    let a = select(&DatasetSummary::new(x.clone()).unwrap(), &budget, &shapes, BiasConstant::Paper).unwrap();
    let b = select(&DatasetSummary::new(x.iter().map(|v| c * v).collect()).unwrap(), &budget, &shapes, BiasConstant::Paper).unwrap();
    assert_eq!(a.frontier.len(), b.frontier.len());
    for (p, q) in a.frontier.iter().zip(&b.frontier) {
        assert!((q.calibrated_scale / p.calibrated_scale - c).abs() < 1e-3 * c, "{} vs {}", p.calibrated_scale, q.calibrated_scale);
    }
    assert_eq!(a.optimal_shape, b.optimal_shape);
}

#[test]
fn reports_serialise_and_validate() {
    let p = GammaNoiseParams::new(0.8, 0.5).unwrap();
    let text = serde_json::to_string(&p).unwrap();
    assert_eq!(serde_json::from_str::<GammaNoiseParams>(&text).unwrap(), p);
    assert!(serde_json::from_str::<PrivacyBudget>(r#"{"deviation_multiplier":0.75,"level":1.5}"#).is_err());
}
