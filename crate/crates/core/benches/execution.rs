use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};

use rdx_core::eqmodel::EquationDescriptor;
use rdx_core::pde::{self, GridConfig, InitialData, ResidualOptions, RunConfig};
use rdx_core::solutions::stationary_singular;
use rdx_core::Execution;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn descriptor() -> EquationDescriptor {
    EquationDescriptor::radial(2.0, 2.5, 3.0, 0.0, 0.5).unwrap()
}

fn grid(nr: usize, exec: Execution) -> GridConfig {
    GridConfig { r_max: 8.0, nr, t_end: 5e-4, snapshots: 2, exec, ..GridConfig::default() }
}

fn bench_integrate(c: &mut Criterion) {
    let desc = descriptor();
    let mut group = c.benchmark_group("integrate");
    group.sample_size(10);
    for nr in [512, 2048] {
        for (name, exec) in MODES {
            let cfg = grid(nr, exec);
            group.bench_with_input(BenchmarkId::new(name, nr), &cfg, |b, cfg| {
                b.iter(|| pde::integrate(&desc, |r| (-r * r).exp(), black_box(cfg)).unwrap())
            });
        }
    }
    group.finish();
}

fn bench_residual(c: &mut Criterion) {
    let desc = EquationDescriptor::radial(1.0, 3.0, 4.0, 0.0, 0.0).unwrap();
    let sol = stationary_singular(&desc).unwrap();
    let pts: Vec<(f64, f64)> = (0..20_000).map(|i| (0.5 + 4.5 * i as f64 / 19_999.0, 1.0)).collect();
    let mut group = c.benchmark_group("residual");
    group.sample_size(10);
    for (name, exec) in MODES {
        let opts = ResidualOptions { exec, ..Default::default() };
        group.bench_function(name, |b| b.iter(|| pde::residual(&desc, &sol, black_box(&pts), &opts).unwrap()));
    }
    group.finish();
}

fn bench_sweep(c: &mut Criterion) {
    let runs: Vec<RunConfig> = (0..8)
        .map(|i| RunConfig {
            descriptor: descriptor(),
            initial: InitialData::Gaussian { amplitude: 0.5 + 0.1 * i as f64, width: 1.0, center: 0.0 },
            grid: GridConfig { t_end: 5e-3, ..grid(256, Execution::Sequential) },
        })
        .collect();
    let mut group = c.benchmark_group("sweep");
    group.sample_size(10);
    for (name, exec) in MODES {
        group.bench_function(name, |b| b.iter(|| pde::sweep(black_box(&runs), exec)));
    }
    group.finish();
}

criterion_group!(benches, bench_integrate, bench_residual, bench_sweep);
criterion_main!(benches);
