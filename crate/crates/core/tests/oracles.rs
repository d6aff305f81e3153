//! Frozen values computed outside this crate (numpy/scipy) from the
//! defining formulas: the 1024-point z grid over `[min - 3 sd, max + 3 sd]`,
//! plain bisection on the plug-in measure, and the AIMSE with the variance
//! integral taken directly in the frequency variable.

use gammask::deconvolution::{grid_with_points, Noise};
use gammask::{
    calibrate_scale, empirical_mu, normal_reference_roughness, select_bandwidth, BiasConstant, DatasetSummary,
    GammaNoiseParams, PrivacyBudget,
};

const DATA: [f64; 20] = [
    -1.2, -0.7, -0.3, 0.0, 0.15, 0.4, 0.9, 1.3, 2.1, -2.4, 0.55, -0.05, 1.75, -1.6, 0.8, 0.25, -0.9, 1.1, -0.45, 0.6,
];

fn data() -> DatasetSummary {
    DatasetSummary::new(DATA.to_vec()).unwrap()
}

#[test]
fn sample_sd_uses_n_minus_one() {
    assert!((data().sd() - 1.1196921569412681).abs() < 1e-14);
}

#[test]
fn calibrated_scales_match_reference() {
    let budget = PrivacyBudget::new(0.75, 0.9).unwrap();
    for (shape, expected) in [(0.6, 2.4583271467692045), (0.8, 0.8208350082344713), (1.0, 0.618056068109054)] {
        let cal = calibrate_scale(&data(), shape, &budget).unwrap();
        let rel = (cal.scale - expected).abs() / expected;
        assert!(rel <= 2e-4, "shape {shape}: {} vs {expected}", cal.scale);
        assert!(!cal.multi_crossing);
        // The returned end of the bracket is the feasible one.
        assert!(cal.scale >= expected * (1.0 - 1e-12));
    }
}

#[test]
fn plug_in_level_matches_reference() {
    let laplace = GammaNoiseParams::laplace(0.5).unwrap();
    for (delta, expected) in [(0.9, 0.6045424890200409), (0.5, 0.0031257976326234406)] {
        let mu = empirical_mu(&data(), &laplace, delta).unwrap();
        assert!((mu - expected).abs() <= 2e-4, "delta {delta}: {mu} vs {expected}");
        assert!(mu >= expected - 1e-12);
    }
}

#[test]
fn bandwidths_match_reference() {
    let roughness = normal_reference_roughness(1.0).unwrap();
    let cases = [
        (0.8, 0.5, BiasConstant::Paper, 0.0662230462692558),
        (0.8, 0.5, BiasConstant::Kernel, 0.14975415047372492),
        (1.0, 1.0, BiasConstant::Paper, 0.11234778601016479),
        (1.0, 1.0, BiasConstant::Kernel, 0.21867631639034138),
    ];
    for (shape, scale, bias, expected) in cases {
        let noise = Noise::Gamma(GammaNoiseParams::new(shape, scale).unwrap());
        let b = select_bandwidth(&noise, roughness, 1000, bias).unwrap().bandwidth;
        assert!((b - expected).abs() / expected < 1e-4, "{shape} {scale} {bias:?}: {b} vs {expected}");
    }
}

#[test]
fn default_estimation_grid_spans_one_sd_beyond_the_data() {
    let d = data();
    let grid = grid_with_points(&DATA, 201).unwrap();
    assert_eq!(grid.len(), 201);
    assert_eq!(grid[0], d.min() - d.sd());
    assert_eq!(grid[200], d.max() + d.sd());
}
