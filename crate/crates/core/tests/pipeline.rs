use std::path::Path;

use qbqaoa::analysis::{run_experiment, ExperimentConfig};
use qbqaoa::iterate::{next_window, refine, to_units, IterationConfig, Solve, Window};
use qbqaoa::market_data::{compute_moments, frontier_constants, load_price_history, MarketMoments};
use qbqaoa::parallel::Parallelism;
use qbqaoa::problem::{discretize, markowitz_objective};
use qbqaoa::qaoa::{
    cvar_sampled, normal_sampled, schedule_ols, EstimatorConfig, Mode, Objective, QaoaProblem, RunReport, ScheduleConfig,
};
use qbqaoa::QbError;

const PRICES: &str = "\
date,AAA,BBB,CCC
2023-01-02,10.0,20.0,30.0
2023-01-03,10.2,19.8,30.3
2023-01-04,10.1,20.1,30.9
2023-01-05,10.4,20.5,30.6
2023-01-06,10.3,20.2,31.2
2023-01-09,10.6,20.9,31.0
2023-01-10,10.5,21.1,31.5
";

fn fixture() -> MarketMoments {
    MarketMoments::from_json(include_str!("../data/instance1_moments.json")).unwrap()
}

#[test]
fn prices_to_report() {
    let history = load_price_history(PRICES.as_bytes()).unwrap();
    let m = compute_moments(&history).unwrap();
    assert_eq!(m.n_assets(), 3);
    let k = frontier_constants(&m).unwrap();
    let q = k.risk_factor_from_target(0.004).unwrap();
    let model = discretize(&m, q.abs(), 0.25, &[0.0; 3], &[1.0; 3], 1.0).unwrap();
    let problem = QaoaProblem::new(model, 1.0).unwrap();
    let stats = problem.brute_force().unwrap();
    let est = EstimatorConfig { samples: 5000, seed: 3, ..EstimatorConfig::from_kind("cvar").unwrap() };
    let cfg = ScheduleConfig { seed: 3, optimizer: qbqaoa::qaoa::OptimizerConfig { budget: 80, ..Default::default() }, ..Default::default() };
    let outcome = schedule_ols(&problem, &est, 2, &cfg).unwrap();
    let rep = RunReport::build(&problem, &est, &outcome, &stats).unwrap();
    let mass: f64 = rep.distribution.iter().map(|r| r.probability).sum();
    assert!((mass - 1.0).abs() < 1e-9);
    assert!(rep.distribution.iter().all(|r| r.x.iter().sum::<i64>() == 4));
    assert_eq!(rep.best_x.iter().sum::<i64>(), 4);
    assert!(rep.best_cost >= stats.optimal_cost - 1e-15);
    assert!(rep.ar_cvar <= 1.0 + 1e-12 && rep.ar_normal <= rep.ar_cvar + 1e-12);
    // integer cost equals the continuous objective at w = αx
    let w: Vec<f64> = rep.best_x.iter().map(|&x| x as f64 * 0.25).collect();
    assert!((markowitz_objective(&m, q.abs(), &w) - rep.best_cost).abs() < 1e-12);
}

#[test]
fn sampled_cvar_with_full_tail_is_the_mean() {
    let problem = QaoaProblem::new(discretize(&fixture(), 18.415, 0.5, &[-1.0; 6], &[1.0; 6], 1.0).unwrap(), 1.0).unwrap();
    let params = qbqaoa::qaoa::QaoaParams::linear(2, 1.3, 0.7).unwrap();
    let dist = problem.distribution(&problem.evolve(&params).unwrap()).unwrap();
    let mut rng = qbqaoa::qaoa::estimate::seeded_rng(1);
    let s = dist.sample(10_000, &mut rng);
    assert_eq!(s.counts.iter().map(|c| c.2).sum::<u64>(), 10_000);
    assert!((cvar_sampled(&s, 1.0).unwrap() - normal_sampled(&s)).abs() < 1e-15);
    assert!(cvar_sampled(&s, 0.05).unwrap() <= normal_sampled(&s));
}

#[test]
fn clamped_window_keeps_previous_point() {
    let cfg = IterationConfig { alpha0: 0.5, lambda: 0.5, iterations: 1, sum_target: 1.0 };
    let w = next_window(&cfg, 1, &[-1.0, 1.0, 1.0], &[-1.0; 3], &[1.0; 3]).unwrap();
    assert!(w.clamped);
    assert_eq!(w.lower_weights(), vec![-1.0, 0.5, 0.5]);
    assert_eq!(w.upper_weights(), vec![-0.5, 1.0, 1.0]);
    assert!(w.contains(&to_units(&[-1.0, 1.0, 1.0], w.alpha).unwrap()));
}

/// Exhaustive solver over a window for a continuous objective.
fn brute(m: &MarketMoments, q: f64) -> impl FnMut(&Window) -> qbqaoa::Result<Solve<()>> + '_ {
    move |w: &Window| {
        let n = w.lower.len();
        let mut best: Option<(f64, Vec<i64>)> = None;
        let mut x = w.lower.clone();
        loop {
            if x.iter().sum::<i64>() == w.sum {
                let wt: Vec<f64> = x.iter().map(|&v| v as f64 * w.alpha).collect();
                let c = markowitz_objective(m, q, &wt);
                if best.as_ref().is_none_or(|b| c < b.0) {
                    best = Some((c, x.clone()));
                }
            }
            let mut k = 0;
            while k < n && x[k] == w.upper[k] {
                x[k] = w.lower[k];
                k += 1;
            }
            if k == n {
                break;
            }
            x[k] += 1;
        }
        let (cost, units) = best.ok_or_else(|| QbError::Infeasible("empty window".into()))?;
        Ok(Solve { units, cost, n_qubits: 0, detail: () })
    }
}

#[test]
fn refinement_with_exact_inner_solver() {
    let m = fixture();
    let cfg = IterationConfig { alpha0: 0.5, lambda: 0.5, iterations: 5, sum_target: 1.0 };
    let out = refine(brute(&m, 18.415), &cfg, &[-1.0; 6], &[1.0; 6]).unwrap();
    assert!(out.halted.is_none());
    assert_eq!(out.records.len(), 6);
    for r in &out.records {
        assert!(r.previous_representable);
        assert!(r.window.lower_weights().iter().all(|&l| l >= -1.0 - 1e-12));
        assert!(r.window.upper_weights().iter().all(|&u| u <= 1.0 + 1e-12));
    }
    assert!(out.records.windows(2).all(|w| w[1].cost <= w[0].cost));
    let s = out.summary();
    assert!((s[5].alpha - 0.5 / 32.0).abs() < 1e-15);
}

#[test]
fn empty_stock_list_is_a_config_error() {
    let text = "kind = \"instance\"\nprices = \"p.csv\"\ntickers = []\nalpha = 0.5\nlower = 0.0\nupper = 1.0\nq = 1.0\n";
    assert!(matches!(ExperimentConfig::from_toml(text), Err(QbError::Config(_))));
}

#[test]
fn instance_run_writes_tables() {
    let dir = tempfile::tempdir().unwrap();
    let moments = Path::new(env!("CARGO_MANIFEST_DIR")).join("data/instance1_moments.json");
    let text = format!(
        "kind = \"instance\"\nmoments = {:?}\ntickers = [\"AAPL\", \"TSLA\"]\nalpha = 0.5\nlower = -1.0\nupper = 1.0\nq = 18.415\np = 1\nscheduler = \"ols\"\nestimator = \"normal\"\nexact = true\nbudget = 40\nrepetitions = 3\n",
        moments.display().to_string()
    );
    let cfg = ExperimentConfig::from_toml(&text).unwrap();
    let est = cfg.estimator_config(0).unwrap();
    assert_eq!((est.objective, est.mode), (Objective::Normal, Mode::Exact));
    let written = run_experiment(&cfg, Path::new("."), dir.path(), Parallelism::default()).unwrap();
    let names: Vec<String> = written.iter().map(|p| p.file_name().unwrap().to_string_lossy().into_owned()).collect();
    for want in ["runs.csv", "ar_table.csv", "cdf_ols_p1.csv", "manifest.json"] {
        assert!(names.iter().any(|n| n == want), "{want} missing from {names:?}");
    }
    let table = std::fs::read_to_string(dir.path().join("ar_table.csv")).unwrap();
    let row: Vec<&str> = table.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[2], "3");
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["repetitions"], 3);
    let cdf = std::fs::read_to_string(dir.path().join("cdf_ols_p1.csv")).unwrap();
    let last: f64 = cdf.lines().last().unwrap().split(',').nth(2).unwrap().parse().unwrap();
    assert!((last - 1.0).abs() < 1e-9);
}
