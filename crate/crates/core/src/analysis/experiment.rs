//! Batch experiment drivers. Each run writes its artifacts plus a
//! `manifest.json` holding the full config into an output directory; reruns
//! with the same config produce byte-identical files.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::Serialize;
use statrs::distribution::{ContinuousCDF, StudentsT};

use super::config::{ExperimentConfig, ExperimentKind};
use super::mixability::mixability_matrix_capped;
use crate::encoding::{build_layout, quasi_binary_values};
use crate::error::{QbError, Result};
use crate::iterate::{qaoa_solver, refine, IterationConfig, QaoaSettings};
use crate::market_data::{compute_moments, frontier_constants, load_price_history, MarketMoments};
use crate::parallel::Parallelism;
use crate::problem::discretize;
use crate::qaoa::report::cdf_rows;
use crate::qaoa::{run_scheduler, write_cdf_csv, QaoaProblem, RunReport};

/// Mean with a two-sided 95% Student-t interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Interval {
    pub n: usize,
    pub mean: f64,
    pub std_dev: f64,
    /// `None` below two samples.
    pub half_width: Option<f64>,
}

pub fn mean_ci95(values: &[f64]) -> Interval {
    let n = values.len();
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return Interval { n, mean, std_dev: 0.0, half_width: None };
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    let sd = var.sqrt();
    let t = StudentsT::new(0.0, 1.0, (n - 1) as f64).expect("dof >= 1").inverse_cdf(0.975);
    Interval { n, mean, std_dev: sd, half_width: Some(t * sd / (n as f64).sqrt()) }
}

fn resolve(dir: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        dir.join(p)
    }
}

/// Market moments from `moments` (JSON) or `prices` (CSV), restricted to
/// `tickers` when given.
pub fn load_moments(cfg: &ExperimentConfig, dir: &Path) -> Result<MarketMoments> {
    let moments = if let Some(path) = &cfg.moments {
        MarketMoments::from_json(&std::fs::read_to_string(resolve(dir, path))?)?
    } else if let Some(path) = &cfg.prices {
        let mut history = load_price_history(File::open(resolve(dir, path))?)?;
        if let Some(t) = &cfg.tickers {
            history = history.select(t)?;
        }
        return compute_moments(&history);
    } else {
        return Err(QbError::Config("need `prices` or `moments`".into()));
    };
    match &cfg.tickers {
        None => Ok(moments),
        Some(t) => {
            let idx: Vec<usize> = t
                .iter()
                .map(|name| {
                    moments.tickers.iter().position(|m| m == name).ok_or_else(|| QbError::Config(format!("unknown ticker {name}")))
                })
                .collect::<Result<_>>()?;
            MarketMoments::new(
                t.clone(),
                idx.iter().map(|&i| moments.expectation[i]).collect(),
                idx.iter().map(|&i| idx.iter().map(|&j| moments.covariance[i][j]).collect()).collect(),
            )
        }
    }
}

/// `q` from the config, converting a target return `mu` on the frontier.
pub fn risk_factor(cfg: &ExperimentConfig, moments: &MarketMoments) -> Result<f64> {
    match (cfg.q, cfg.mu) {
        (Some(q), None) => Ok(q),
        (None, Some(mu)) => frontier_constants(moments)?.risk_factor_from_target(mu),
        _ => Err(QbError::Config("give exactly one of `q` and `mu`".into())),
    }
}

pub fn build_problem(cfg: &ExperimentConfig, dir: &Path, par: Parallelism) -> Result<(MarketMoments, f64, QaoaProblem)> {
    let moments = load_moments(cfg, dir)?;
    let q = risk_factor(cfg, &moments)?;
    let (lower, upper) = cfg.bounds(moments.n_assets())?;
    let alpha = cfg.alpha.ok_or_else(|| QbError::Config("missing `alpha`".into()))?;
    let model = discretize(&moments, q, alpha, &lower, &upper, cfg.sum)?;
    let problem = QaoaProblem::new(model, cfg.eta)?.with_parallelism(par);
    Ok((moments, q, problem))
}

/// One run with the first scheduler and depth listed.
pub fn solve(cfg: &ExperimentConfig, dir: &Path, par: Parallelism) -> Result<RunReport> {
    let (_, _, problem) = build_problem(cfg, dir, par)?;
    let stats = problem.brute_force()?;
    let est = cfg.estimator_config(cfg.seed)?;
    let outcome = run_scheduler(&problem, &est, cfg.scheduler.to_vec()[0], cfg.p.to_vec()[0], &cfg.schedule_config(cfg.seed))?;
    RunReport::build(&problem, &est, &outcome, &stats)
}

#[derive(Serialize)]
struct Manifest<'a, T: Serialize> {
    config: &'a ExperimentConfig,
    seed: u64,
    artifacts: &'a [String],
    summary: T,
}

struct Out {
    dir: PathBuf,
    written: Vec<String>,
}

impl Out {
    fn create(&mut self, name: &str) -> Result<BufWriter<File>> {
        self.written.push(name.to_string());
        Ok(BufWriter::new(File::create(self.dir.join(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut w = self.create(name)?;
        serde_json::to_writer_pretty(&mut w, value)?;
        writeln!(w)?;
        w.flush()?;
        Ok(())
    }

    fn finish<T: Serialize>(mut self, cfg: &ExperimentConfig, summary: T) -> Result<Vec<PathBuf>> {
        let artifacts = self.written.clone();
        self.json("manifest.json", &Manifest { config: cfg, seed: cfg.seed, artifacts: &artifacts, summary })?;
        Ok(self.written.iter().map(|n| self.dir.join(n)).collect())
    }
}

/// Run the experiment described by `cfg`, writing into `out_dir`. Relative
/// input paths resolve against `config_dir`. Returns the written files.
pub fn run_experiment(cfg: &ExperimentConfig, config_dir: &Path, out_dir: &Path, par: Parallelism) -> Result<Vec<PathBuf>> {
    cfg.validate()?;
    std::fs::create_dir_all(out_dir)?;
    let out = Out { dir: out_dir.to_path_buf(), written: Vec::new() };
    match cfg.kind {
        ExperimentKind::SweepQubits => sweep_qubits(cfg, out),
        ExperimentKind::Mixability => mixability(cfg, out, par),
        ExperimentKind::Instance => instance(cfg, config_dir, out, par),
        ExperimentKind::Iterate => iterate(cfg, config_dir, out, par),
        ExperimentKind::Solve => {
            let report = solve(cfg, config_dir, par)?;
            let mut out = out;
            out.json("report.json", &report)?;
            write_cdf_csv(&report.cdf(), out.create("cdf.csv")?)?;
            out.finish(cfg, ())
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepRow {
    pub range: u64,
    pub unsplit_qubits: usize,
    pub qubits: usize,
    pub decoded_all_ones: u64,
}

/// Assets sharing one range in a qubit sweep.
pub const SWEEP_ASSETS: usize = 6;

/// Per-asset qubit counts for [`SWEEP_ASSETS`] identical assets of each range
/// `1..=max_range`.
pub fn qubit_sweep(max_range: u64) -> Vec<SweepRow> {
    (1..=max_range)
        .map(|r| {
            let layout = build_layout(&[r; SWEEP_ASSETS]);
            let qubits = layout.asset_qubits(0);
            SweepRow {
                range: r,
                unsplit_qubits: quasi_binary_values(r).len(),
                qubits: qubits.len(),
                decoded_all_ones: qubits.iter().map(|&m| layout.values[m]).sum(),
            }
        })
        .collect()
}

fn sweep_qubits(cfg: &ExperimentConfig, mut out: Out) -> Result<Vec<PathBuf>> {
    let rows = qubit_sweep(cfg.max_range);
    let mut wr = csv::Writer::from_writer(out.create("qubits.csv")?);
    wr.write_record(["range", "unsplit_qubits", "qubits", "log2_lower", "log2_upper", "decoded_all_ones"])?;
    for r in &rows {
        let l = ((r.range + 1) as f64).log2();
        wr.write_record([
            r.range.to_string(),
            r.unsplit_qubits.to_string(),
            r.qubits.to_string(),
            (l - 1.0).to_string(),
            (2.0 * l).to_string(),
            r.decoded_all_ones.to_string(),
        ])?;
    }
    wr.flush()?;
    drop(wr);
    out.finish(cfg, serde_json::json!({ "ranges": rows.len() }))
}

fn mixability(cfg: &ExperimentConfig, mut out: Out, par: Parallelism) -> Result<Vec<PathBuf>> {
    let ranges = cfg.ranges.clone().unwrap_or_default();
    let d_hat = cfg.d_hat.unwrap_or_default();
    let layout = build_layout(&ranges);
    let mut summary = Vec::new();
    for p in cfg.p.to_vec() {
        let m = mixability_matrix_capped(&layout, d_hat, p, cfg.epsilon, cfg.cap, par)?;
        m.write_pgm(out.create(&format!("mixability_p{p}.pgm"))?)?;
        m.write_csv(out.create(&format!("mixability_p{p}.csv"))?)?;
        summary.push(serde_json::json!({
            "p": p,
            "n_qubits": layout.n_qubits(),
            "encodings": m.dim(),
            "portfolios": m.group_starts.len(),
            "group_starts": m.group_starts,
            "reachable": m.count_reachable(),
            "all_reachable": m.all_reachable(),
        }));
    }
    out.finish(cfg, summary)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunRow {
    pub scheduler: crate::qaoa::Scheduler,
    pub p: usize,
    pub repetition: usize,
    pub seed: u64,
    pub ar_normal: f64,
    pub ar_cvar: f64,
    pub ar: f64,
    pub estimator_value: f64,
    pub best_seen_value: f64,
    pub best_cost: f64,
    pub evaluations: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ArRow {
    pub scheduler: crate::qaoa::Scheduler,
    pub p: usize,
    pub ar_normal: Interval,
    pub ar_cvar: Interval,
    pub ar: Interval,
}

fn instance(cfg: &ExperimentConfig, dir: &Path, mut out: Out, par: Parallelism) -> Result<Vec<PathBuf>> {
    let (_, _, problem) = build_problem(cfg, dir, par)?;
    let stats = problem.brute_force()?;
    let mut tasks = Vec::new();
    for s in cfg.scheduler.to_vec() {
        for p in cfg.p.to_vec() {
            for r in 0..cfg.repetitions {
                tasks.push((s, p, r, cfg.seed.wrapping_add(r as u64)));
            }
        }
    }
    let reports: Vec<Result<RunReport>> = par.map_indexed(tasks.len(), |k| {
        let (s, p, _, seed) = tasks[k];
        let est = cfg.estimator_config(seed)?;
        let outcome = run_scheduler(&problem, &est, s, p, &cfg.schedule_config(seed))?;
        RunReport::build(&problem, &est, &outcome, &stats)
    });
    let reports: Vec<RunReport> = reports.into_iter().collect::<Result<_>>()?;

    let mut rows = Vec::with_capacity(tasks.len());
    for (&(s, p, r, seed), rep) in tasks.iter().zip(&reports) {
        rows.push(RunRow {
            scheduler: s,
            p,
            repetition: r,
            seed,
            ar_normal: rep.ar_normal,
            ar_cvar: rep.ar_cvar,
            ar: rep.ar,
            estimator_value: rep.estimator_value,
            best_seen_value: rep.best_seen_value,
            best_cost: rep.best_cost,
            evaluations: rep.evaluations,
        });
        out.json(&format!("report_{}_p{p}_r{r}.json", scheduler_name(s)), rep)?;
    }
    let mut wr = csv::Writer::from_writer(out.create("runs.csv")?);
    for row in &rows {
        wr.serialize(row)?;
    }
    wr.flush()?;
    drop(wr);

    let mut table = Vec::new();
    let mut wr = csv::Writer::from_writer(out.create("ar_table.csv")?);
    wr.write_record(["scheduler", "p", "n", "ar_normal", "ar_normal_ci95", "ar_cvar", "ar_cvar_ci95", "ar", "ar_ci95"])?;
    for chunk in rows.chunks(cfg.repetitions) {
        let pick = |f: fn(&RunRow) -> f64| mean_ci95(&chunk.iter().map(f).collect::<Vec<_>>());
        let row = ArRow {
            scheduler: chunk[0].scheduler,
            p: chunk[0].p,
            ar_normal: pick(|r| r.ar_normal),
            ar_cvar: pick(|r| r.ar_cvar),
            ar: pick(|r| r.ar),
        };
        let hw = |i: &Interval| i.half_width.map(|h| h.to_string()).unwrap_or_default();
        wr.write_record([
            scheduler_name(row.scheduler).to_string(),
            row.p.to_string(),
            row.ar.n.to_string(),
            row.ar_normal.mean.to_string(),
            hw(&row.ar_normal),
            row.ar_cvar.mean.to_string(),
            hw(&row.ar_cvar),
            row.ar.mean.to_string(),
            hw(&row.ar),
        ])?;
        table.push(row);
    }
    wr.flush()?;
    drop(wr);

    // repetition-averaged distribution per scheduler and depth
    for (chunk, reps) in rows.chunks(cfg.repetitions).zip(reports.chunks(cfg.repetitions)) {
        let w = 1.0 / reps.len() as f64;
        let mut pts: Vec<(f64, f64)> =
            reps.iter().flat_map(|r| r.distribution.iter().map(move |o| (o.cost, o.probability * w))).collect();
        pts.sort_by(|a, b| a.0.total_cmp(&b.0));
        let name = format!("cdf_{}_p{}.csv", scheduler_name(chunk[0].scheduler), chunk[0].p);
        write_cdf_csv(&cdf_rows(pts.into_iter()), out.create(&name)?)?;
    }

    out.finish(
        cfg,
        serde_json::json!({
            "n_qubits": problem.n_qubits(),
            "feasible": stats.count,
            "optimal_cost": stats.optimal_cost,
            "worst_cost": stats.worst_cost,
            "uniform_cost": stats.uniform_mean,
            "ar_table": table,
        }),
    )
}

fn iterate(cfg: &ExperimentConfig, dir: &Path, mut out: Out, par: Parallelism) -> Result<Vec<PathBuf>> {
    let moments = load_moments(cfg, dir)?;
    let q = risk_factor(cfg, &moments)?;
    let (l0, u0) = cfg.bounds(moments.n_assets())?;
    let it = IterationConfig {
        alpha0: cfg.alpha.unwrap_or_default(),
        lambda: cfg.lambda.unwrap_or_default(),
        iterations: cfg.iterations.unwrap_or_default(),
        sum_target: cfg.sum,
    };
    let settings = QaoaSettings {
        q,
        eta: cfg.eta,
        p: cfg.p.to_vec()[0],
        scheduler: cfg.scheduler.to_vec()[0],
        estimator: cfg.estimator_config(cfg.seed)?,
        schedule: cfg.schedule_config(cfg.seed),
    };
    let outcome = refine(qaoa_solver(&moments, &settings, cfg.sum, par), &it, &l0, &u0)?;
    for r in &outcome.records {
        out.json(&format!("iteration_{}.json", r.iteration), &r.detail)?;
        write_cdf_csv(&r.detail.cdf(), out.create(&format!("cdf_iteration_{}.csv", r.iteration))?)?;
    }
    let summary = outcome.summary();
    out.json("summary.json", &serde_json::json!({ "halted": outcome.halted, "iterations": summary }))?;
    out.finish(cfg, serde_json::json!({ "halted": outcome.halted, "records": summary.len() }))
}

fn scheduler_name(s: crate::qaoa::Scheduler) -> &'static str {
    use crate::qaoa::Scheduler::*;
    match s {
        Sample20 => "sample20",
        Ols => "ols",
        Iols => "iols",
        Iqaoa => "iqaoa",
    }
}
