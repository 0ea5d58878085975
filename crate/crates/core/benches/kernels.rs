use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use qbqaoa::circuit::{apply_phase, StateVector};
use qbqaoa::parallel::Parallelism;
use qbqaoa::problem::IntegerModel;
use qbqaoa::qaoa::{QaoaParams, QaoaProblem};

const MODES: [(&str, Parallelism); 2] = [("sequential", Parallelism::Sequential), ("parallel", Parallelism::Parallel)];

// six assets, range 4 gives 18 qubits
fn model(n: usize, range: i64) -> IntegerModel {
    let sigma = (0..n).map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.3 }).collect()).collect();
    let mu = (0..n).map(|i| -0.1 * i as f64).collect();
    IntegerModel::new(sigma, mu, vec![0; n], vec![range; n], range).unwrap()
}

fn random_state(n: usize) -> StateVector {
    let dim = 1usize << n;
    let amps = (0..dim)
        .map(|k| {
            let x = (k as f64 * 0.618_033_988_75).fract();
            num_complex::Complex64::new(x - 0.5, (x * 7.0).fract() - 0.5)
        })
        .collect::<Vec<_>>();
    let norm = amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
    StateVector::from_amplitudes(amps.into_iter().map(|a| a / norm).collect()).unwrap()
}

fn gates(c: &mut Criterion) {
    let mut g = c.benchmark_group("gates");
    for n in [16, 20] {
        let mut state = random_state(n);
        for (name, par) in MODES {
            g.bench_with_input(BenchmarkId::new(format!("xy/{name}"), n), &n, |b, _| {
                b.iter(|| state.apply_xy(0, n - 1, black_box(0.3), par).unwrap())
            });
            g.bench_with_input(BenchmarkId::new(format!("xyy/{name}"), n), &n, |b, _| {
                b.iter(|| state.apply_xyy(n - 1, 1, 2, black_box(0.3), par).unwrap())
            });
        }
    }
    g.finish();
}

fn phase(c: &mut Criterion) {
    let mut g = c.benchmark_group("phase");
    for range in [4, 6] {
        let problem = QaoaProblem::new(model(6, range), 1.0).unwrap();
        let mut state = random_state(problem.n_qubits());
        for (name, par) in MODES {
            g.bench_with_input(BenchmarkId::new(name, problem.n_qubits()), &range, |b, _| {
                b.iter(|| apply_phase(&mut state, &problem.diag, black_box(0.7), par).unwrap())
            });
        }
    }
    g.finish();
}

fn evolve(c: &mut Criterion) {
    let mut g = c.benchmark_group("evolve_p4");
    g.sample_size(10);
    let params = QaoaParams::linear(4, 1.0, 0.5).unwrap();
    for range in [4, 6] {
        for (name, par) in MODES {
            let problem = QaoaProblem::new(model(6, range), 1.0).unwrap().with_parallelism(par);
            g.bench_with_input(BenchmarkId::new(name, problem.n_qubits()), &range, |b, _| {
                b.iter(|| black_box(problem.evolve(&params).unwrap()))
            });
        }
    }
    g.finish();
}

criterion_group!(benches, gates, phase, evolve);
criterion_main!(benches);
