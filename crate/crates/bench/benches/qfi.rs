use criterion::{black_box, criterion_group, criterion_main, Criterion};
use rqfi::beamsplitter::f_functions;
use rqfi::oracle::qfi_sld;
use rqfi::qfi::{qfi_thermal, qfi_tmsv};
use rqfi::{SourceSpec, TmsvVariant};
use rqfi_bench::{gaussian_system, separation_grid};

fn bench_functionals(c: &mut Criterion) {
    let sys = gaussian_system(0.4);
    let grid = separation_grid(200);
    c.bench_function("f_functions_sweep_200", |b| {
        b.iter(|| {
            for &s in &grid {
                black_box(f_functions(&sys, black_box(s)).unwrap());
            }
        })
    });
}

fn bench_qfi_analytic(c: &mut Criterion) {
    let sys = gaussian_system(0.4);
    let grid = separation_grid(200);
    c.bench_function("qfi_thermal_sweep_200", |b| {
        b.iter(|| {
            for &s in &grid {
                black_box(qfi_thermal(black_box(1.0), &sys, s).unwrap());
            }
        })
    });
    c.bench_function("qfi_tmsv_sweep_200", |b| {
        b.iter(|| {
            for &s in &grid {
                black_box(
                    qfi_tmsv(black_box(0.6), &sys, s, TmsvVariant::SquaredDerivative).unwrap(),
                );
            }
        })
    });
}

fn bench_oracle(c: &mut Criterion) {
    let sys = gaussian_system(0.4);
    let source = SourceSpec::Thermal { n_mean: 0.5 };
    c.bench_function("oracle_sld_thermal_k6", |b| {
        b.iter(|| black_box(qfi_sld(&source, &sys, black_box(1.0), 6, 6, 1e-3).unwrap()))
    });
}

criterion_group!(benches, bench_functionals, bench_qfi_analytic, bench_oracle);
criterion_main!(benches);
