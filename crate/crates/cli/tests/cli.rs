mod common;

use std::fs;

use common::*;
use tailcop::copula::estimate_correlation;
use tailcop::portfolio::{q_analytic, LinearWeights, RiskConfig};
use tailcop::sampler::sample_events;
use tailcop::smni::{joint_loglikelihood, SmniRegionNet};
use tailcop::stats::{mean, pearson};
use tailcop::{CopulaModel, CorrelationMatrix, ExponentialMarginal, PortfolioSpec};
use tailcop_cli::commands::default_net;
use tailcop_cli::config::ModelFile;
use tailcop_cli::table::{read_table, write_table};
use tempfile::TempDir;

fn names(v: &[&str]) -> Vec<String> {
    v.iter().map(|s| s.to_string()).collect()
}

fn write_model(dir: &TempDir, marginals: &[(f64, f64)], rows: Vec<Vec<f64>>) {
    let model = ModelFile {
        channels: (0..marginals.len()).map(|i| format!("c{i}")).collect(),
        marginals: marginals.iter().map(|&(m, x)| ExponentialMarginal::new(m, x).unwrap()).collect(),
        correlation: rows,
        epochs: 1000,
        pre_average: 3,
    };
    fs::write(dir.path().join("model.json"), serde_json::to_string(&model).unwrap()).unwrap();
}

fn single_channel(dir: &TempDir, m: f64, chi: f64) {
    write_model(dir, &[(m, chi)], vec![vec![1.0]]);
}

#[test]
fn fit_marginals_then_sample_recovers_correlation() {
    let dir = TempDir::new().unwrap();
    let rho = 0.6;
    let truth = CopulaModel::new(
        vec![ExponentialMarginal::new(0.001, 0.01).unwrap(), ExponentialMarginal::new(-0.5, 2.0).unwrap()],
        CorrelationMatrix::from_rows(&[vec![1.0, rho], vec![rho, 1.0]]).unwrap(),
    )
    .unwrap();
    let ev = sample_events(&truth, 20_000, 5).unwrap();
    write_table(&dir.path().join("data.csv"), &names(&["x", "y"]), &[ev.dx_column(0), ev.dx_column(1)]).unwrap();

    let out = tailcop(dir.path(), &["--out", ".", "fit-marginals", "data.csv"]);
    check_ok(&out);
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("channel,m,chi\nx,"));
    check_schema("model", &dir.path().join("model.json"));
    let model = ModelFile::load(&dir.path().join("model.json")).unwrap();
    assert_eq!(model.channels, names(&["x", "y"]));
    assert!((model.correlation[0][1] - rho).abs() < 0.02, "{}", model.correlation[0][1]);

    check_ok(&tailcop(dir.path(), &["--out", ".", "--seed", "9", "sample", "--model", "model.json", "-n", "100000"]));
    let events = read_table(&dir.path().join("events.csv")).unwrap();
    let y: Vec<Vec<f64>> = events
        .columns
        .iter()
        .zip(&model.marginals)
        .map(|(c, m)| c.iter().map(|&v| m.to_gaussian(v)).collect())
        .collect();
    assert!((pearson(&y[0], &y[1]) - rho).abs() < 0.02);
    let c = estimate_correlation(&y, 1).unwrap();
    assert!((c.get(0, 1) - rho).abs() < 0.02);
}

#[test]
fn unusable_inputs_exit_with_their_codes() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fs::write(p.join("empty.csv"), "").unwrap();
    fs::write(p.join("header.csv"), "a,b\n").unwrap();
    fs::write(p.join("const.csv"), "a,flat\n1,2\n2,2\n4,2\n").unwrap();
    fs::write(p.join("text.csv"), "a\n1\nx\n").unwrap();
    for f in ["empty.csv", "header.csv"] {
        let out = tailcop(p, &["fit-marginals", f]);
        assert_eq!(code(&out), 2);
        assert!(stderr(&out).contains("no data rows"), "{}", stderr(&out));
    }
    let out = tailcop(p, &["fit-marginals", "const.csv"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("flat"));
    assert_eq!(code(&tailcop(p, &["fit-marginals", "text.csv"])), 2);
    assert_eq!(code(&tailcop(p, &["fit-marginals", "missing.csv"])), 2);
    assert_eq!(code(&tailcop(p, &["sample"])), 2);

    fs::write(p.join("bad.json"), r#"{"sede": 3}"#).unwrap();
    assert_eq!(code(&tailcop(p, &["--config", "bad.json", "fit-marginals", "const.csv"])), 2);

    write_model(
        &dir,
        &[(0.0, 1.0), (0.0, 1.0), (0.0, 1.0)],
        vec![vec![1.0, 0.9, 0.9], vec![0.9, 1.0, -0.9], vec![0.9, -0.9, 1.0]],
    );
    let out = tailcop(p, &["sample", "--model", "model.json", "-n", "10"]);
    assert_eq!(code(&out), 4, "{}", stderr(&out));
}

#[test]
fn sample_is_reproducible_and_centered() {
    let dir = TempDir::new().unwrap();
    write_model(&dir, &[(0.3, 0.02), (-1.0, 0.5)], vec![vec![1.0, -0.2], vec![-0.2, 1.0]]);
    let run = |sub: &str| {
        let out = format!("out{sub}");
        check_ok(&tailcop(
            dir.path(),
            &["--out", &out, "--seed", "4", "sample", "--model", "model.json", "-n", "1000"],
        ));
        fs::read(dir.path().join(out).join("events.csv")).unwrap()
    };
    let first = run("a");
    assert_eq!(first, run("b"));
    assert!(first.starts_with(b"c0,c1\n"));

    // the bound is about 2.1 standard errors of a two-tailed exponential mean
    check_ok(&tailcop(dir.path(), &["--out", "big", "--seed", "4", "sample", "--model", "model.json", "-n", "100000"]));
    let ev = read_table(&dir.path().join("big/events.csv")).unwrap();
    for (col, (m, chi)) in ev.columns.iter().zip([(0.3, 0.02), (-1.0, 0.5)]) {
        assert!((mean(col) - m).abs() < 3.0 * chi / (1e5f64).sqrt());
    }
}

fn risk_report(dir: &TempDir, out: &str, weights: &str) -> serde_json::Value {
    check_ok(&tailcop(
        dir.path(),
        &["--out", out, "--seed", "2", "risk", "--model", "model.json", "--weights", weights, "-n", "100000"],
    ));
    let path = dir.path().join(out).join("risk.json");
    check_schema("risk", &path);
    json(&path)
}

#[test]
fn risk_reports_the_identity_portfolio() {
    let dir = TempDir::new().unwrap();
    let (m, chi) = (0.0005, 0.0128);
    single_channel(&dir, m, chi);
    let r = risk_report(&dir, "one", "1");
    let x = r["width"].as_f64().unwrap();
    assert!((x - chi).abs() < 0.05 * chi);
    let mm = r["mean"].as_f64().unwrap();
    let var = r["var"].as_f64().unwrap();
    assert_eq!(var, 0.05);
    let recomputed = 0.5 * (-((-var.abs() - mm).abs()) / x).exp();
    assert!((r["q_analytic"].as_f64().unwrap() - recomputed).abs() < 1e-12);
    assert_eq!(q_analytic(x, mm, var), r["q_analytic"].as_f64().unwrap());

    let doubled = risk_report(&dir, "two", "2");
    let ratio = doubled["width"].as_f64().unwrap() / x;
    assert!((ratio - 2.0).abs() < 0.02, "{ratio}");

    let bins = fs::read_to_string(dir.path().join("one/bins.csv")).unwrap();
    assert!(bins.starts_with("low,high,count\n"));
    assert_eq!(bins.lines().count(), 202);
    let total: usize = bins.lines().skip(1).map(|l| l.rsplit(',').next().unwrap().parse::<usize>().unwrap()).sum();
    assert_eq!(total, 100_000);
}

#[test]
fn optimize_matches_a_position_grid() {
    let dir = TempDir::new().unwrap();
    let (m, chi) = (0.001, 0.01);
    single_channel(&dir, m, chi);
    let n = 20_000;
    check_ok(&tailcop(
        dir.path(),
        &["--seed", "7", "optimize", "--model", "model.json", "--weights", "1", "--bounds", "0:3", "-n", "20000"],
    ));
    let path = dir.path().join("optimized.json");
    check_schema("optimized", &path);
    let got = json(&path);
    assert_eq!(got["feasible"], true);

    let copula = CopulaModel::independent(vec![ExponentialMarginal::new(m, chi).unwrap()]);
    let events = sample_events(&copula, n, 7).unwrap();
    let risk = RiskConfig::default();
    let best = (0..10_000)
        .map(|i| {
            let a = 3.0 * i as f64 / 9_999.0;
            let spec = PortfolioSpec::Linear(LinearWeights::new(vec![a], vec![0.0]).unwrap());
            risk.position_cost(&events, &spec).unwrap().total
        })
        .fold(f64::INFINITY, f64::min);
    let total = got["total"].as_f64().unwrap();
    assert!((total - best).abs() <= 0.01 * best.abs(), "cli {total} grid {best}");
}

#[test]
fn optimize_with_zero_bounds_is_infeasible_but_written() {
    let dir = TempDir::new().unwrap();
    single_channel(&dir, 0.001, 0.01);
    let out =
        tailcop(dir.path(), &["optimize", "--model", "model.json", "--weights", "0", "--bounds", "0:0", "-n", "5000"]);
    assert_eq!(code(&out), 5, "{}", stderr(&out));
    let got = json(&dir.path().join("optimized.json"));
    assert_eq!(got["feasible"], false);
    assert_eq!(got["spec"]["a"][0], 0.0);
}

#[test]
fn smni_simulate_fit_check_round_trip() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    check_ok(&tailcop(p, &["--seed", "2024", "smni", "simulate", "--epochs", "950"]));
    let truth = default_net();
    let table = read_table(&p.join("phi.csv")).unwrap();
    let data = table.select(&names(&["Fz", "Cz", "Pz", "P3", "P4"])).unwrap();
    let ll_truth = joint_loglikelihood(&truth, &data).unwrap();

    let start: Vec<f64> = truth
        .parameter_names()
        .iter()
        .map(|n| match n.rsplit('.').next().unwrap() {
            "a" => 0.8,
            "d" => 0.3,
            _ => 0.0,
        })
        .collect();
    let template = truth.with_parameters(&start).unwrap();
    fs::write(p.join("template.json"), serde_json::to_string(&template).unwrap()).unwrap();
    check_schema("net", &p.join("template.json"));
    check_ok(&tailcop(p, &["--seed", "1", "smni", "fit", "--net", "template.json", "--data", "phi.csv", "--free-all"]));
    let fitted_path = p.join("fitted_net.json");
    check_schema("fitted_net", &fitted_path);
    let fitted = json(&fitted_path);
    assert_eq!(fitted["free"].as_array().unwrap().len(), 24);
    let ll = fitted["log_likelihood"].as_f64().unwrap();
    assert!(ll >= ll_truth - 12.0, "fit {ll} truth {ll_truth}");

    let net: SmniRegionNet = serde_json::from_value(fitted["net"].clone()).unwrap();
    fs::write(p.join("fitted.json"), serde_json::to_string(&net).unwrap()).unwrap();
    check_ok(&tailcop(p, &["smni", "check", "--net", "fitted.json", "--data", "phi.csv"]));
    let rows = read_table_text(&p.join("centering.csv"));
    assert_eq!(rows.len(), 5);
    for r in rows {
        let mean_e: f64 = r[1].parse().unwrap();
        let mean_i: f64 = r[3].parse().unwrap();
        assert!(mean_e.abs() < 0.05 * 80.0 && mean_i.abs() < 0.05 * 30.0, "{r:?}");
    }
}

fn read_table_text(path: &std::path::Path) -> Vec<Vec<String>> {
    fs::read_to_string(path).unwrap().lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn smni_frozen_fit_returns_the_template() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    check_ok(&tailcop(p, &["smni", "template"]));
    check_ok(&tailcop(p, &["smni", "simulate", "--net", "net.json", "--epochs", "200"]));
    check_ok(&tailcop(p, &["smni", "fit", "--net", "net.json", "--data", "phi.csv"]));
    let fitted = json(&p.join("fitted_net.json"));
    assert_eq!(fitted["net"], json(&p.join("net.json")));
    assert_eq!(fitted["trials"], 0);
}

#[test]
fn smni_check_on_resting_potentials_reports_zero_firing() {
    let dir = TempDir::new().unwrap();
    let net = default_net();
    let names: Vec<String> = net.electrodes.iter().map(|e| e.name.clone()).collect();
    let cols: Vec<Vec<f64>> = net.electrodes.iter().map(|e| vec![e.phi; 100]).collect();
    write_table(&dir.path().join("flat.csv"), &names, &cols).unwrap();
    check_ok(&tailcop(dir.path(), &["smni", "check", "--data", "flat.csv"]));
    for r in read_table_text(&dir.path().join("centering.csv")) {
        assert_eq!(r[1].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[3].parse::<f64>().unwrap(), 0.0);
        assert_eq!(r[5], "false");
    }
}

fn indicator_spec(dir: &TempDir, states: &[(&str, &str, &str)]) {
    let spec = serde_json::json!({
        "methods": [{"name": "scalp", "column": "v"}, {"name": "laplacian", "column": "v"}],
        "states": states.iter().map(|(n, a, b)| serde_json::json!({"name": n, "data": [a, b]})).collect::<Vec<_>>(),
    });
    fs::write(dir.path().join("spec.json"), spec.to_string()).unwrap();
}

fn laplace_csv(dir: &TempDir, file: &str, m: f64, chi: f64, n: usize, seed: u64) {
    let v = ExponentialMarginal::new(m, chi).unwrap().sample(n, seed);
    write_table(&dir.path().join(file), &names(&["v"]), &[v]).unwrap();
}

#[test]
fn portfolio_of_indicators_reports() {
    let dir = TempDir::new().unwrap();
    laplace_csv(&dir, "a1.csv", 0.0, 1.0, 1000, 1);
    laplace_csv(&dir, "a2.csv", 0.0, 1.0, 1000, 2);
    laplace_csv(&dir, "b1.csv", 5.0, 1.0, 1000, 3);
    laplace_csv(&dir, "b2.csv", 5.0, 1.0, 1000, 4);
    indicator_spec(&dir, &[("rest", "a1.csv", "a2.csv"), ("task", "b1.csv", "b2.csv"), ("copy", "a1.csv", "a1.csv")]);
    check_ok(&tailcop(dir.path(), &["portfolio-of-indicators", "spec.json"]));
    let path = dir.path().join("indicators.json");
    check_schema("indicators", &path);
    check_schema("indicators_spec", &dir.path().join("spec.json"));
    let r = json(&path);
    let states = r["states"].as_array().unwrap();
    assert_eq!(states[0]["degenerate_pairing"], false);
    assert_eq!(states[0]["flat"], true);
    assert_eq!(states[2]["degenerate_pairing"], true);
    assert!(states[2]["correlation"].is_null());
    let overlap = r["overlap"].as_array().unwrap();
    for (i, row) in overlap.iter().enumerate() {
        assert!((row[i].as_f64().unwrap() - 1.0).abs() < 1e-12);
    }
    assert!(overlap[0][1].as_f64().unwrap() < overlap[0][2].as_f64().unwrap());

    laplace_csv(&dir, "short.csv", 0.0, 1.0, 999, 5);
    indicator_spec(&dir, &[("rest", "a1.csv", "short.csv")]);
    let out = tailcop(dir.path(), &["portfolio-of-indicators", "spec.json"]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("length mismatch"));
}

#[test]
fn portfolio_of_indicators_reads_smni_innovations() {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    check_ok(&tailcop(p, &["smni", "template"]));
    check_ok(&tailcop(p, &["--seed", "8", "smni", "simulate", "--epochs", "600"]));
    let spec = serde_json::json!({
        "methods": [{"name": "raw", "column": "Pz"}, {"name": "cmi", "column": "Pz", "net": "net.json"}],
        "states": [{"name": "s", "data": ["phi.csv", "phi.csv"]}],
    });
    fs::write(p.join("spec.json"), spec.to_string()).unwrap();
    check_ok(&tailcop(p, &["portfolio-of-indicators", "spec.json"]));
    let r = json(&p.join("indicators.json"));
    let s = &r["states"][0];
    // innovations drop the leading epochs the delays need
    assert_eq!(s["train_epochs"].as_u64().unwrap() + s["held_epochs"].as_u64().unwrap(), 600 - 3);
    let cmi = &s["marginals"][1];
    assert!(cmi["m"].as_f64().unwrap().abs() < 0.2);
}

#[test]
fn config_and_spec_files_match_their_schemas() {
    let dir = TempDir::new().unwrap();
    let cfg = dir.path().join("config.json");
    tailcop_cli::config::write_json(&cfg, &tailcop_cli::config::RunConfig::default()).unwrap();
    check_schema("config", &cfg);
    let spec = PortfolioSpec::Contract(tailcop::portfolio::ContractPositions {
        contracts_prev: vec![1.0],
        contracts: vec![2.0],
        prices: vec![100.0],
        entry_prices: vec![99.0],
        capital: 1e4,
        capital_next: None,
        slippage: 0.5,
    });
    let path = dir.path().join("spec.json");
    tailcop_cli::config::write_json(&path, &spec).unwrap();
    check_schema("portfolio_spec", &path);
    let lin = dir.path().join("linear.json");
    tailcop_cli::config::write_json(&lin, &PortfolioSpec::Linear(LinearWeights::unit(2, 0))).unwrap();
    check_schema("portfolio_spec", &lin);
}
