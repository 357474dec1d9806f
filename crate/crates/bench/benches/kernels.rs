use criterion::{black_box, criterion_group, criterion_main, BenchmarkId, Criterion};
use dgff::levelset::count_above;
use dgff::sampler::DomainSampler;
use dgff::{
    discretize, green, potential_kernel, CenteringSchedule, ContinuumDomain, DyadicSquare, LatticeDomain,
    MartingaleRunner, RngSpec, SamplerKind,
};

fn spectral_sample(c: &mut Criterion) {
    let mut g = c.benchmark_group("spectral_sample");
    for n in [128u32, 256, 512] {
        let d = discretize(&ContinuumDomain::unit_square(), n).unwrap();
        let s = DomainSampler::new(&d, SamplerKind::Spectral).unwrap();
        let mut rng = RngSpec::new(1, 0).rng();
        g.bench_with_input(BenchmarkId::from_parameter(n), &n, |b, _| b.iter(|| black_box(s.sample_with(&mut rng))));
    }
    g.finish();
}

fn disc_sample(c: &mut Criterion) {
    let d = discretize(&ContinuumDomain::unit_disc(), 128).unwrap();
    let s = DomainSampler::new(&d, SamplerKind::Auto).unwrap();
    let mut rng = RngSpec::new(1, 0).rng();
    c.bench_function("disc_sample_128", |b| b.iter(|| black_box(s.sample_with(&mut rng))));
}

fn level_count(c: &mut Criterion) {
    let d = discretize(&ContinuumDomain::unit_square(), 512).unwrap();
    let f = DomainSampler::new(&d, SamplerKind::Spectral).unwrap().sample(RngSpec::new(2, 0));
    let a = CenteringSchedule::canonical(0.3).unwrap().a_n(512).unwrap();
    c.bench_function("count_above_512", |b| b.iter(|| black_box(count_above(&f.values, a, 0.0))));
}

fn kernel_table(c: &mut Criterion) {
    c.bench_function("potential_kernel_100", |b| b.iter(|| black_box(potential_kernel(100).unwrap())));
}

fn green_factor(c: &mut Criterion) {
    let d = LatticeDomain::lattice_box(64, 1, 1, 40, 40).unwrap();
    c.bench_function("green_40x40", |b| b.iter(|| black_box(green(&d).unwrap())));
}

fn chaos_run(c: &mut Criterion) {
    let runner = MartingaleRunner::new(DyadicSquare::unit(), 0.3, 128, 7).unwrap();
    let mut rng = RngSpec::new(3, 0).rng();
    c.bench_function("chaos_run_128_m7", |b| b.iter(|| black_box(runner.run_totals(&mut rng))));
}

criterion_group! {
    name = benches;
    config = Criterion::default().sample_size(20);
    targets = spectral_sample, disc_sample, level_count, kernel_table, green_factor, chaos_run
}
criterion_main!(benches);
