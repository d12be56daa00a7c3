//! Data-parallel kernels on a one-thread pool against the default pool.
//! Built with `--no-default-features` only the sequential fallback runs.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use magspec::field::{Domain, FieldSpec, MagneticFamily, PotentialFamily};
use magspec::landau::kset;
use magspec::lattice::{GridSpec, LatticeOperator, DEFAULT_NODE_CAP};
use magspec::spectral::{eigs_window, EigsOptions};
use magspec::Complex64;
use ndarray::Array2;

fn radial_well() -> FieldSpec {
    FieldSpec::new(
        MagneticFamily::RadialWell {
            b0: 1.0,
            b2: 1.0,
            center: vec![0.0, 0.0],
        },
        PotentialFamily::Zero,
        None,
        Domain::centered(2, 2.0),
        None,
    )
    .unwrap()
}

/// A one-thread pool and a pool with one thread per available core.
#[cfg(feature = "parallel")]
fn pools() -> Vec<(String, rayon::ThreadPool)> {
    let n = std::thread::available_parallelism().map_or(1, |n| n.get());
    let build = |k| rayon::ThreadPoolBuilder::new().num_threads(k).build().unwrap();
    vec![("single".into(), build(1)), (format!("default-{n}"), build(n))]
}

fn on_each_pool(c: &mut Criterion, group: &str, work: impl Fn() + Sync) {
    let mut g = c.benchmark_group(group);
    g.sample_size(10);
    #[cfg(feature = "parallel")]
    for (label, pool) in pools() {
        g.bench_function(BenchmarkId::from_parameter(label), |b| b.iter(|| pool.install(&work)));
    }
    #[cfg(not(feature = "parallel"))]
    g.bench_function(BenchmarkId::from_parameter("sequential"), |b| b.iter(&work));
    g.finish();
}

fn kernels(c: &mut Criterion) {
    let fs = radial_well();
    let grid = GridSpec::uniform(&fs.domain, 400, DEFAULT_NODE_CAP).unwrap();
    on_each_pool(c, "assemble-400x400", || {
        LatticeOperator::assemble(&fs, &grid, 0.05).unwrap();
    });
    on_each_pool(c, "kset-400x400", || {
        kset(&fs, (1.5, 2.5), &grid, 0.0).unwrap();
    });
    let op = LatticeOperator::assemble(&fs, &grid, 0.05).unwrap();
    let x = Array2::from_shape_fn((op.dim(), 16), |(i, j)| {
        Complex64::new(((i * 31 + j) % 17) as f64, j as f64)
    });
    on_each_pool(c, "apply-block-16", || {
        op.apply_block(x.view());
    });
    let small = GridSpec::uniform(&fs.domain, 120, DEFAULT_NODE_CAP).unwrap();
    let op = LatticeOperator::assemble(&fs, &small, 0.1).unwrap();
    on_each_pool(c, "eigs-window-120x120", || {
        eigs_window(&op, (0.0, 2.5), &EigsOptions::default()).unwrap();
    });
}

criterion_group!(benches, kernels);
criterion_main!(benches);
