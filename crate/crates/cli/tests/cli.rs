use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use gammask::evaluation::{reference_law, Law};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use serde_json::Value;

fn gammask(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gammask")).args(args).output().expect("binary runs")
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn write_sample(dir: &Path, name: &str, law: Law, n: usize, seed: u64) -> PathBuf {
    let xs = reference_law(law).sample(&mut ChaCha20Rng::seed_from_u64(seed), n);
    let path = dir.join(name);
    let text: String = xs.iter().map(|x| format!("{x}\n")).collect();
    std::fs::write(&path, text).unwrap();
    path
}

fn column(path: &Path) -> Vec<f64> {
    std::fs::read_to_string(path).unwrap().lines().map(|l| l.parse().unwrap()).collect()
}

fn table(path: &Path) -> (String, Vec<Vec<f64>>) {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let header = lines.next().unwrap().to_string();
    (header, lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect())
}

fn json(path: &Path) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn select_writes_report_and_frontier() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "x.csv", Law::Normal, 300, 1);
    let out = dir.path().join("sel.json");
    let o = gammask(&["select", "--input", s(&input), "--output", s(&out), "--theta-grid", "0.5:1:0.1", "--seed", "3"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&out);
    assert_eq!(doc["tool"], "gammask");
    assert_eq!(doc["seed"], 3);
    assert_eq!(doc["bias_constant"]["value"], 11520.0);
    let frontier = doc["report"]["frontier"].as_array().unwrap();
    let (header, rows) = table(&dir.path().join("sel.frontier.csv"));
    assert_eq!(header, "theta,eta,bandwidth,objective");
    assert_eq!(rows.len(), frontier.len());
    assert!(rows.len() <= 6);
    let best = rows.iter().map(|r| r[3]).fold(f64::INFINITY, f64::min);
    assert_eq!(doc["report"]["optimal_objective"].as_f64().unwrap(), best);
}

#[test]
fn empty_and_malformed_inputs_are_data_errors() {
    let dir = tempfile::tempdir().unwrap();
    let empty = dir.path().join("empty.csv");
    std::fs::write(&empty, "").unwrap();
    let out = dir.path().join("o.json");
    let o = gammask(&["select", "--input", s(&empty), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("no data values"));

    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "value\n1\n2\nx7\n").unwrap();
    let o = gammask(&["select", "--input", s(&bad), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains(":4:"));

    let constant = dir.path().join("const.csv");
    std::fs::write(&constant, "2\n2\n2\n").unwrap();
    let o = gammask(&["select", "--input", s(&constant), "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn usage_errors_exit_2() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "x.csv", Law::Normal, 20, 2);
    let out = dir.path().join("o.csv");
    let o = gammask(&["simulate", "--distribution", "cauchy", "--output", s(&out)]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    for name in ["exponential", "normal", "laplace", "uniform"] {
        assert!(err.contains(name), "{err}");
    }
    let o = gammask(&["obfuscate", "--input", s(&input), "--output", s(&out), "--theta", "0.5", "--eta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gammask(&["select", "--input", s(&input), "--output", s(&out), "--theta-grid", "0.5:1.2:0.1"]);
    assert_eq!(o.status.code(), Some(2));
    let o = gammask(&["select", "--input", s(&input), "--output", s(&out), "--bias-constant", "other"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn obfuscate_preserves_length_and_mean() {
    let dir = tempfile::tempdir().unwrap();
    let n = 5000;
    let input = write_sample(dir.path(), "x.csv", Law::Normal, n, 4);
    let out = dir.path().join("z.csv");
    let o = gammask(&["obfuscate", "--input", s(&input), "--output", s(&out), "--theta", "0.8", "--eta", "0.5", "--seed", "9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (x, z) = (column(&input), column(&out));
    assert_eq!(x.len(), z.len());
    let shift = (z.iter().sum::<f64>() - x.iter().sum::<f64>()) / n as f64;
    let band = 3.0 * (0.25 * 0.8 * 1.8 / n as f64).sqrt();
    assert!(shift.abs() <= band, "{shift} vs {band}");
    assert_eq!(json(&dir.path().join("z.json"))["seed"], 9);
}

#[test]
fn missing_seed_is_recorded() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "x.csv", Law::Normal, 50, 5);
    let out = dir.path().join("z.csv");
    let o = gammask(&["obfuscate", "--input", s(&input), "--output", s(&out), "--theta", "1", "--eta", "1"]);
    assert!(o.status.success());
    let seed = json(&dir.path().join("z.json"))["seed"].as_u64().unwrap();
    let first = std::fs::read(&out).unwrap();
    let o = gammask(&["obfuscate", "--input", s(&input), "--output", s(&out), "--theta", "1", "--eta", "1", "--seed", &seed.to_string()]);
    assert!(o.status.success());
    assert_eq!(std::fs::read(&out).unwrap(), first);
}

#[test]
fn estimate_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "x.csv", Law::Normal, 1000, 6);
    let masked = dir.path().join("z.csv");
    let o = gammask(&["obfuscate", "--input", s(&input), "--output", s(&masked), "--theta", "0.8", "--eta", "0.548", "--seed", "1"]);
    assert!(o.status.success());
    let out = dir.path().join("g.csv");
    let o = gammask(&["estimate", "--input", s(&masked), "--output", s(&out), "--theta", "0.8", "--eta", "0.548", "--grid-size", "301"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = table(&out);
    assert_eq!(header, "x,g_hat,G_hat");
    assert_eq!(rows.len(), 301);
    assert!(rows.windows(2).all(|w| w[0][2] <= w[1][2]));

    let z = column(&masked);
    let expected = gammask::deconvolution::grid_with_points(&z, 301).unwrap();
    assert!(rows.iter().zip(&expected).all(|(r, &x)| r[0] == x));

    let side = json(&dir.path().join("g.json"));
    let mass = side["parameters"]["mass"].as_f64().unwrap();
    assert!((mass - 1.0).abs() < 0.02, "{mass}");

    // CDF error against Φ on (-3, 3), 201 points.
    let phi = |x: f64| gammask::evaluation::reference_law(Law::Normal).cdf(x);
    let cdf_at = |x: f64| {
        let i = rows.partition_point(|r| r[0] <= x) - 1;
        let t = (x - rows[i][0]) / (rows[i + 1][0] - rows[i][0]);
        rows[i][2] + t * (rows[i + 1][2] - rows[i][2])
    };
    let err: f64 = (0..201).map(|j| -3.0 + 0.03 * j as f64).map(|x| (cdf_at(x) - phi(x)).powi(2)).sum::<f64>() / 201.0;
    assert!(err < 2e-3, "{err}");
}

#[test]
fn measure_reports_level_and_curve() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_sample(dir.path(), "x.csv", Law::Normal, 200, 7);
    let out = dir.path().join("m.csv");
    let o = gammask(&["measure", "--input", s(&input), "--output", s(&out), "--theta", "1", "--eta", "0.4342945", "--delta", "0.9"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let (header, rows) = table(&out);
    assert_eq!(header, "z,m_hat");
    assert_eq!(rows.len(), 1024);
    let side = json(&dir.path().join("m.json"));
    let mu = side["parameters"]["mu_hat"].as_f64().unwrap();
    assert!(mu > 0.0 && mu.is_finite());
    assert!(side["parameters"]["sup_m_hat"].as_f64().unwrap() >= 0.9);
}

#[test]
fn simulate_writes_report_and_trace() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("sim.json");
    let o = gammask(&[
        "simulate", "--distribution", "uniform", "--n", "200", "--reps", "2", "--seed", "7", "--theta-grid", "0.8:1:0.1", "--output", s(&out),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let doc = json(&out);
    assert_eq!(doc["report"]["replications_used"], 2);
    assert_eq!(doc["parameters"]["study"]["reselect_per_replication"], true);
    let (header, rows) = table(&dir.path().join("sim.trace.csv"));
    assert_eq!(header, "rep,S_e,L_e,O_e,theta_star,eta_star");
    assert_eq!(rows.len(), 2);
}
