use dgff::chaos::MartingaleRunner;
use dgff::io::{read_pgm, render_file};
use dgff::stats::OvershootAccumulator;
use dgff::{
    discretize, extract, k_norm, measure_integrate, point_measure, CenteringSchedule, ContinuumDomain, DyadicSquare,
    PointMeasure, RngSpec, SamplerKind, ALPHA,
};
use dgff::sampler::DomainSampler;

#[test]
fn sample_extract_and_round_trip() {
    let d = discretize(&ContinuumDomain::unit_square(), 64).unwrap();
    let s = DomainSampler::new(&d, SamplerKind::Auto).unwrap();
    let field = s.sample(RngSpec::new(11, 0));
    let sched = CenteringSchedule::canonical(0.2).unwrap();
    let ls = extract(&field, &sched, 0.0).unwrap();
    let pm = point_measure(&field, &sched, 2).unwrap();
    assert_eq!(ls.sites.len(), pm.atoms.len());
    assert!((measure_integrate(&pm, |_, _| 1.0) - pm.atoms.len() as f64 / k_norm(64, &sched).unwrap()).abs() < 1e-12);

    let mut buf = vec![];
    pm.write_csv(&mut buf).unwrap();
    let back = PointMeasure::read_csv(&buf[..]).unwrap();
    assert_eq!(back.atoms.len(), pm.atoms.len());
    for (a, b) in back.atoms.iter().zip(&pm.atoms) {
        assert_eq!(a.site, b.site);
        assert_eq!(a.overshoot, b.overshoot);
        assert_eq!(a.profile, b.profile);
    }
}

#[test]
fn field_renders_to_pgm() {
    let dir = std::path::Path::new(env!("CARGO_TARGET_TMPDIR")).join("pipeline_render");
    std::fs::create_dir_all(&dir).unwrap();
    let d = discretize(&ContinuumDomain::unit_square(), 16).unwrap();
    let field = DomainSampler::new(&d, SamplerKind::Auto).unwrap().sample(RngSpec::new(3, 1));
    let csv = dir.join("field.csv");
    field.write_csv(std::fs::File::create(&csv).unwrap()).unwrap();
    let meta = render_file(&csv, &dir.join("field.pgm")).unwrap();
    let img = read_pgm(std::fs::File::open(dir.join("field.pgm")).unwrap()).unwrap();
    // strict discretization keeps 2..=14 in each direction
    assert_eq!(d.len(), 13 * 13);
    assert_eq!((img.width, img.height), (13, 13));
    assert_eq!((meta.width, meta.height), (13, 13));
    assert_eq!(*img.data.iter().max().unwrap(), 65535);
    assert_eq!(*img.data.iter().min().unwrap(), 0);
}

#[test]
fn overshoots_are_roughly_exponential() {
    // the fitted rate at small N exceeds alpha lambda but stays within a factor 2
    let d = discretize(&ContinuumDomain::unit_square(), 128).unwrap();
    let s = DomainSampler::new(&d, SamplerKind::Auto).unwrap();
    let sched = CenteringSchedule::canonical(0.3).unwrap();
    let mut acc = OvershootAccumulator::for_lambda(0.3);
    for rep in 0..10 {
        acc.add(&point_measure(&s.sample(RngSpec::new(2, rep)), &sched, 0).unwrap());
    }
    let fit = acc.fit(ALPHA * 0.3).unwrap();
    assert!(fit.rate_hat > ALPHA * 0.3 && fit.rate_hat < 2.0 * ALPHA * 0.3, "{fit:?}");
}

#[test]
fn chaos_runs_are_reproducible() {
    let runner = MartingaleRunner::new(DyadicSquare::unit(), 0.3, 32, 4).unwrap();
    let a = runner.run_totals(&mut RngSpec::new(9, 4).rng());
    let b = runner.run_totals(&mut RngSpec::new(9, 4).rng());
    assert_eq!(a, b);
    let ys = runner.run(&mut RngSpec::new(9, 4).rng()).unwrap();
    for (y, t) in ys.iter().zip(&a) {
        assert!((y.total() - t).abs() < 1e-12 * t.abs().max(1.0));
    }
}
