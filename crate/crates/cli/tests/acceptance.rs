//! Acceptance criteria 1 to 10. Prints one line per criterion and exits
//! nonzero when any fails.

mod common;

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::fs;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use sha2::{Digest, Sha256};
use tailcop::asa::{self, minimize_with_refine, AsaConfig, DEFAULT_LOCAL_CALLS};
use tailcop::linalg::{cholesky, cholesky_inverse, Matrix};
use tailcop::portfolio::{implied_width, optimize_positions, q_empirical, LinearWeights, QEstimator, RiskConfig};
use tailcop::sampler::{sample_events, UniformStream};
use tailcop::smni::{
    all_free, centering_check, conditional_logprob, electrode_moments, fit_net, joint_loglikelihood, simulate,
    Electrode, FitConfig, SmniRegionNet,
};
use tailcop::stats::{ks_critical_1pct, ks_statistic, pearson};
use tailcop::{ColumnParams, CopulaModel, CorrelationMatrix, ExponentialMarginal, PortfolioSpec};
use tailcop_cli::commands::default_net;
use tempfile::TempDir;

type Check = Result<String, String>;

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn within(elapsed: Duration, limit: f64, detail: String) -> Check {
    let secs = elapsed.as_secs_f64();
    ensure(secs < limit, format!("{detail}; {secs:.2}s of {limit}s"))
}

fn copula_round_trip() -> Check {
    let start = Instant::now();
    let marginals = [
        ExponentialMarginal::new(0.0, 1.0).unwrap(),
        ExponentialMarginal::new(0.0005, 0.0128).unwrap(),
        ExponentialMarginal::new(-3.0, 2.5).unwrap(),
    ];
    let mut worst: f64 = 0.0;
    for m in &marginals {
        for i in 0..1000 {
            let dx = m.mean() + m.chi() * (-10.0 + 20.0 * i as f64 / 999.0);
            worst = worst.max((m.from_gaussian(m.to_gaussian(dx)) - dx).abs());
        }
    }
    let elapsed = start.elapsed();
    ensure(worst < 1e-10, format!("max error {worst:.2e}")).and_then(|d| within(elapsed, 1.0, d))
}

fn correlation_recovery() -> Check {
    let start = Instant::now();
    let target = [[1.0, 0.5, -0.3], [0.5, 1.0, 0.0], [-0.3, 0.0, 1.0]];
    let marginals = vec![
        ExponentialMarginal::new(0.001, 0.01).unwrap(),
        ExponentialMarginal::new(-1.0, 2.0).unwrap(),
        ExponentialMarginal::new(0.0, 0.3).unwrap(),
    ];
    let corr = CorrelationMatrix::from_rows(&target.map(|r| r.to_vec())).unwrap();
    let model = CopulaModel::new(marginals.clone(), corr).unwrap();
    let n = 100_000;
    let ev = sample_events(&model, n, 31).unwrap();
    let mut worst_rho: f64 = 0.0;
    for i in 0..3 {
        for j in (i + 1)..3 {
            let r = pearson(&ev.dy_column(i), &ev.dy_column(j));
            worst_rho = worst_rho.max((r - target[i][j]).abs());
        }
    }
    let mut worst_ks: f64 = 0.0;
    for (j, m) in marginals.iter().enumerate() {
        worst_ks = worst_ks.max(ks_statistic(&ev.dx_column(j), |x| m.cdf(x)));
    }
    let crit = ks_critical_1pct(n);
    let elapsed = start.elapsed();
    ensure(
        worst_rho <= 0.02 && worst_ks < crit,
        format!("max |rho error| {worst_rho:.4}, max KS {worst_ks:.5} vs {crit:.5}"),
    )
    .and_then(|d| within(elapsed, 10.0, d))
}

fn constraint_closure() -> Check {
    let x = implied_width(0.01, 0.0, 0.05);
    let samples = ExponentialMarginal::new(0.0, x).unwrap().sample(100_000, 77);
    let q = q_empirical(&samples, 0.05);
    ensure((x - 0.0127811).abs() <= 1e-6 && (0.0075..=0.0125).contains(&q), format!("X {x:.7}, q_empirical {q:.5}"))
}

/// Gauss-Jordan with partial pivoting.
fn inverse_by_elimination(g: &Matrix) -> Matrix {
    let n = g.rows();
    let mut a: Vec<Vec<f64>> = (0..n).map(|i| g.row(i).to_vec()).collect();
    let mut inv: Vec<Vec<f64>> = (0..n).map(|i| (0..n).map(|j| f64::from(u8::from(i == j))).collect()).collect();
    for col in 0..n {
        let p = (col..n).max_by(|&x, &y| a[x][col].abs().total_cmp(&a[y][col].abs())).unwrap();
        a.swap(col, p);
        inv.swap(col, p);
        let d = a[col][col];
        for j in 0..n {
            a[col][j] /= d;
            inv[col][j] /= d;
        }
        for r in 0..n {
            if r != col {
                let f = a[r][col];
                for j in 0..n {
                    a[r][j] -= f * a[col][j];
                    inv[r][j] -= f * inv[col][j];
                }
            }
        }
    }
    Matrix::from_rows(&inv).unwrap()
}

fn cholesky_identities() -> Check {
    let mut rng = UniformStream::new(50, 0);
    let (mut worst_g, mut worst_i): (f64, f64) = (0.0, 0.0);
    for n in 1..=50 {
        let a = Matrix::from_row_major(n, n, (0..n * n).map(|_| 2.0 * rng.next_unit() - 1.0).collect()).unwrap();
        let mut g = a.matmul(&a.transpose()).unwrap();
        for i in 0..n {
            g[(i, i)] += 1.0;
        }
        let c = cholesky(&g).unwrap();
        worst_g = worst_g.max(c.matmul(&c.transpose()).unwrap().max_abs_diff(&g));
        // lower factor: I = C^T G^{-1} C
        let ginv = inverse_by_elimination(&g);
        let eye = c.transpose().matmul(&ginv).unwrap().matmul(&c).unwrap();
        worst_i = worst_i.max(eye.max_abs_diff(&Matrix::identity(n)));
        // the inverse built from the factor agrees with elimination
        worst_i = worst_i
            .max(cholesky_inverse(&c).max_abs_diff(&ginv) / ginv.as_slice().iter().fold(1.0f64, |m, v| m.max(v.abs())));
    }
    ensure(
        worst_g <= 1e-10 && worst_i <= 1e-8,
        format!("max |CC^T - G| {worst_g:.2e}, max |C^T G^-1 C - I| {worst_i:.2e}"),
    )
}

fn multiminima(x: &[f64]) -> f64 {
    (x[0] * x[0] + x[1] * x[1]) / 4.0 + 5.0 * (1.0 - (3.0 * PI * x[0]).cos()) * (1.0 - (3.0 * PI * x[1]).cos())
}

fn asa_oracle() -> Check {
    let start = Instant::now();
    let mut grid = f64::INFINITY;
    for i in 0..2001 {
        for j in 0..2001 {
            let p = [-1.0 + i as f64 / 1000.0, -1.0 + j as f64 / 1000.0];
            grid = grid.min(multiminima(&p));
        }
    }
    let hits = (0..100u64)
        .filter(|&seed| {
            let r =
                minimize_with_refine(multiminima, &[(-1.0, 1.0); 2], &AsaConfig::with_seed(seed), DEFAULT_LOCAL_CALLS)
                    .unwrap();
            r.best_cost - grid < 1e-4
        })
        .count();
    let elapsed = start.elapsed();
    ensure(hits >= 95, format!("{hits}/100 runs within 1e-4 of grid minimum {grid:.3e}"))
        .and_then(|d| within(elapsed, 60.0, d))
}

fn schedule_ordering() -> Check {
    let mut bad = 0usize;
    for k in 1024..=1_000_000u64 {
        let k = k as f64;
        let t_exp = asa::temperature(k, 1.0, 1.0, 1);
        if !(t_exp < 1.0 / k && 1.0 / k < 1.0 / k.ln()) {
            bad += 1;
        }
    }
    ensure(bad == 0, format!("{bad} violations over k in [1024, 1e6]"))
}

fn smni_normalization_gradients() -> Check {
    let mut rng = UniformStream::new(7, 0);
    let mut worst_norm: f64 = 0.0;
    for _ in 0..100 {
        let u = |r: &mut UniformStream| r.next_unit();
        let column = ColumnParams::default();
        let e = Electrode::new(
            "X",
            4.0 * u(&mut rng) - 2.0,
            0.1 + 1.4 * u(&mut rng),
            2.0 * u(&mut rng) - 1.0,
            1.8 * u(&mut rng) - 0.9,
        );
        let net = SmniRegionNet::new(column, vec![e.clone()], vec![], tailcop::smni::DEFAULT_DT).unwrap();
        let col = net.centered_column().unwrap();
        let mom = electrode_moments(&col, &e, 60.0 * u(&mut rng) - 30.0, 8.0 * u(&mut rng)).unwrap();
        let dt = net.dt;
        let now = 3.0 * u(&mut rng);
        let sd = (mom.variance * dt).sqrt();
        let center = now + mom.mean * dt;
        let (lo, hi, n) = (center - 14.0 * sd, center + 14.0 * sd, 4000);
        let h = (hi - lo) / n as f64;
        let f = |x: f64| conditional_logprob(x, now, mom, dt).unwrap().exp();
        let mut s = f(lo) + f(hi);
        for i in 1..n {
            s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(lo + i as f64 * h);
        }
        worst_norm = worst_norm.max((s * h / 3.0 - 1.0).abs());
    }
    let mut worst_grad: f64 = 0.0;
    for seed in 0..10u64 {
        let net = SmniRegionNet::new(
            ColumnParams::default(),
            vec![Electrode::new("X", 0.5, 0.6, -0.4, 0.5)],
            vec![],
            tailcop::smni::DEFAULT_DT,
        )
        .unwrap();
        let data = simulate(&net, 200, seed).unwrap();
        let x0 = net.parameters();
        let ll = |x: &[f64]| joint_loglikelihood(&net.with_parameters(x).unwrap(), &data).unwrap();
        for k in 0..x0.len() {
            let fd = |h: f64| {
                let mut up = x0.clone();
                let mut down = x0.clone();
                up[k] += h;
                down[k] -= h;
                (ll(&up) - ll(&down)) / (2.0 * h)
            };
            let (g4, g5) = (fd(1e-4), fd(1e-5));
            worst_grad = worst_grad.max((g4 - g5).abs() / g4.abs().max(g5.abs()).max(1e-6));
        }
    }
    ensure(
        worst_norm <= 1e-8 && worst_grad <= 1e-3,
        format!("max |integral - 1| {worst_norm:.2e}, max gradient step disagreement {worst_grad:.2e}"),
    )
}

fn smni_simulate_then_fit() -> Check {
    let start = Instant::now();
    let net = default_net();
    let data = simulate(&net, 950, 2024).unwrap();
    let ll_truth = joint_loglikelihood(&net, &data).unwrap();
    let start_values: Vec<f64> = net
        .parameter_names()
        .iter()
        .map(|n| match n.rsplit('.').next().unwrap() {
            "a" => 0.8,
            "d" => 0.3,
            _ => 0.0,
        })
        .collect();
    let template = net.with_parameters(&start_values).unwrap();
    let cfg = FitConfig { free: all_free(&net), asa: AsaConfig::with_seed(1), ..FitConfig::default() };
    let free = cfg.free.len();
    let fit = fit_net(&data, &template, &cfg).unwrap();
    let [ne, ni] = fit.net.column.neurons;
    let centered = centering_check(&fit.net, &data)
        .unwrap()
        .iter()
        .all(|r| r.mean_e.abs() <= 0.05 * ne && r.mean_i.abs() <= 0.05 * ni);
    let ll = fit.report.log_likelihood;
    let elapsed = start.elapsed();
    ensure(
        free == 24 && ll >= ll_truth - 12.0 && centered,
        format!(
            "{free} free, fit LL {ll:.2} vs truth {ll_truth:.2}, centering {}",
            if centered { "ok" } else { "off" }
        ),
    )
    .and_then(|d| within(elapsed, 600.0, d))
}

fn optimizer_grid() -> Check {
    let model = CopulaModel::independent(vec![ExponentialMarginal::new(0.001, 0.01).unwrap()]);
    let events = sample_events(&model, 20_000, 3).unwrap();
    let template = PortfolioSpec::Linear(LinearWeights::new(vec![1.0], vec![0.0]).unwrap());
    let mut details = Vec::new();
    let mut ok = true;
    for estimator in [QEstimator::Empirical, QEstimator::Fitted] {
        let risk = RiskConfig { estimator, ..RiskConfig::default() };
        let fit = optimize_positions(&events, &template, &[(0.0, 3.0)], &risk, &AsaConfig::with_seed(5)).unwrap();
        let grid = (0..10_000)
            .map(|i| {
                let spec = template.with_positions(&[3.0 * i as f64 / 9_999.0]);
                risk.position_cost(&events, &spec).unwrap().total
            })
            .fold(f64::INFINITY, f64::min);
        let rel = (fit.cost.total - grid) / grid.abs();
        // with a smooth Q the grid cannot land on the exact-penalty kink, so
        // only a worse annealed cost counts against the fitted estimator
        ok &= match estimator {
            QEstimator::Empirical => rel.abs() <= 0.01,
            QEstimator::Fitted => rel <= 0.01,
        };
        details.push(format!("{estimator:?} annealed {:.6e} grid {grid:.6e}", fit.cost.total));
    }
    ensure(ok, details.join(", "))
}

fn run(dir: &Path, threads: &str, args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_tailcop"))
        .current_dir(dir)
        .env("RAYON_NUM_THREADS", threads)
        .args(args)
        .output()
        .unwrap();
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Every artifact of a full pipeline, hashed by path.
fn pipeline(threads: &str) -> BTreeMap<String, String> {
    let dir = TempDir::new().unwrap();
    let p = dir.path();
    fn with<'a>(rest: &[&'a str]) -> Vec<&'a str> {
        [&["--seed", "13"][..], rest].concat()
    }
    run(p, threads, &with(&["--out", "smni", "smni", "template"]));
    run(p, threads, &with(&["--out", "smni", "smni", "simulate", "--epochs", "300"]));
    run(
        p,
        threads,
        &with(&[
            "--out",
            "smni",
            "smni",
            "fit",
            "--data",
            "smni/phi.csv",
            "--free",
            "Fz.phi:-5:5",
            "--free",
            "Cz.a:0.1:1.5",
        ]),
    );
    run(p, threads, &with(&["--out", "smni", "smni", "check", "--data", "smni/phi.csv"]));
    run(p, threads, &with(&["--out", "risk", "fit-marginals", "smni/phi.csv"]));
    run(p, threads, &with(&["--out", "risk", "sample", "--model", "risk/model.json", "-n", "50000"]));
    run(
        p,
        threads,
        &with(&[
            "--out",
            "risk",
            "risk",
            "--model",
            "risk/model.json",
            "--weights",
            "0.01,0.01,0,0,0.02",
            "-n",
            "50000",
        ]),
    );
    run(
        p,
        threads,
        &with(&[
            "--out",
            "risk",
            "optimize",
            "--model",
            "risk/model.json",
            "--weights",
            "0.01,0,0,0,0",
            "--bounds",
            "0:0.02",
            "-n",
            "20000",
        ]),
    );
    let spec = serde_json::json!({
        "methods": [{"name": "raw", "column": "Pz"}, {"name": "cmi", "column": "Pz", "net": "smni/net.json"}],
        "states": [{"name": "s", "data": ["smni/phi.csv", "smni/phi.csv"]}],
    });
    fs::write(p.join("spec.json"), spec.to_string()).unwrap();
    run(p, threads, &with(&["--out", "ind", "portfolio-of-indicators", "spec.json"]));
    let mut hashes = BTreeMap::new();
    for sub in ["smni", "risk", "ind"] {
        for entry in fs::read_dir(p.join(sub)).unwrap() {
            let path = entry.unwrap().path();
            let digest = Sha256::digest(fs::read(&path).unwrap());
            let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
            hashes.insert(format!("{sub}/{}", path.file_name().unwrap().to_string_lossy()), hex);
        }
    }
    hashes
}

fn cli_determinism() -> Check {
    let reference = pipeline("4");
    let again = pipeline("4");
    let serial = pipeline("1");
    let wide = pipeline("8");
    let differing: Vec<&String> = reference
        .iter()
        .filter(|(k, v)| [&again, &serial, &wide].iter().any(|h| h.get(*k) != Some(v)))
        .map(|(k, _)| k)
        .collect();
    ensure(
        differing.is_empty() && reference.len() >= 10,
        format!("{} artifacts over 4 runs at 1/4/8 threads, differing: {differing:?}", reference.len()),
    )
}

fn main() {
    let criteria: [(&str, fn() -> Check); 10] = [
        ("copula round trip", copula_round_trip),
        ("correlation recovery", correlation_recovery),
        ("constraint closure", constraint_closure),
        ("cholesky identities", cholesky_identities),
        ("ASA oracle equivalence", asa_oracle),
        ("ASA schedule ordering", schedule_ordering),
        ("SMNI normalization and gradients", smni_normalization_gradients),
        ("SMNI simulate then fit", smni_simulate_then_fit),
        ("portfolio optimizer vs grid", optimizer_grid),
        ("CLI determinism", cli_determinism),
    ];
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let mut failed = 0;
    for (i, (name, check)) in criteria.iter().enumerate() {
        if !filter.is_empty() && !filter.iter().any(|f| name.contains(f.as_str())) {
            continue;
        }
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(check)).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(d) => println!("criterion {:>2} PASS {name}: {d} [{secs:.1}s]", i + 1),
            Err(d) => {
                failed += 1;
                println!("criterion {:>2} FAIL {name}: {d} [{secs:.1}s]", i + 1);
            }
        }
    }
    if failed > 0 {
        println!("{failed} criteria failed");
        std::process::exit(1);
    }
}
