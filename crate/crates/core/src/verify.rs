//! Self-check suites with machine-readable reports.

use serde::{Deserialize, Serialize};

use crate::domain::{LatticeDomain, Site};
use crate::error::{Error, Result};
use crate::potential::{green, harmonic_measure, potential_kernel};
use crate::rng::RngSpec;
use crate::sampler::{cov_stats, DomainSampler, SamplerKind};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub value: f64,
    pub tolerance: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteReport {
    pub suite: String,
    pub pass: bool,
    pub checks: Vec<Check>,
}

impl SuiteReport {
    fn new(suite: &str, checks: Vec<Check>) -> Self {
        Self { suite: suite.into(), pass: checks.iter().all(|c| c.pass), checks }
    }
}

fn check(name: &str, value: f64, tolerance: f64) -> Check {
    Check { name: name.into(), pass: value.is_finite() && value <= tolerance, value, tolerance }
}

pub const SUITES: [&str; 2] = ["potential", "sampler"];

pub fn run_suite(name: &str) -> Result<SuiteReport> {
    match name {
        "potential" => potential_suite(),
        "sampler" => sampler_suite(),
        _ => Err(Error::Precondition(format!("unknown suite {name:?}; known: {}", SUITES.join(", ")))),
    }
}

/// Largest `|G(x,y) + a(x-y) - sum_z H(x,z) a(y-z)|` over a box.
pub fn last_exit_residual(d: &LatticeDomain) -> Result<f64> {
    let g = green(d)?;
    let sites = d.sites();
    let span = sites.iter().chain(d.boundary()).flat_map(|s| [s[0], s[1]]);
    let (lo, hi) = span.fold((i64::MAX, i64::MIN), |(a, b), v| (a.min(v), b.max(v)));
    let table = potential_kernel((hi - lo).max(1) as u32)?;
    let a = |z: Site| table.value(z);
    let mut worst = 0.0f64;
    for (i, x) in sites.iter().enumerate() {
        let h = harmonic_measure(d, *x)?;
        for (j, y) in sites.iter().enumerate() {
            let rhs = -a([x[0] - y[0], x[1] - y[1]])
                + h.points.iter().zip(&h.weights).map(|(z, w)| w * a([y[0] - z[0], y[1] - z[1]])).sum::<f64>();
            worst = worst.max((g.entry(i, j) - rhs).abs());
        }
    }
    Ok(worst)
}

/// Largest `|G^D - G^Dt - Cov(Phi^{D,Dt})|` using the cross split of a box;
/// the binding covariance is `sum_z H^Dt(x,z) G^D(z,y)` over the removed
/// sites.
pub fn gibbs_markov_residual(d: &LatticeDomain) -> Result<f64> {
    let gd = green(d)?;
    let kids = d.cross_children()?;
    let mut worst = 0.0f64;
    for k in &kids {
        let gk = green(k)?;
        for (a, x) in k.sites().iter().enumerate() {
            let h = harmonic_measure(k, *x)?;
            for (b, y) in k.sites().iter().enumerate() {
                let bind: f64 = h
                    .points
                    .iter()
                    .zip(&h.weights)
                    .filter(|(z, _)| d.contains_site(**z))
                    .map(|(z, w)| w * gd.at(*z, *y))
                    .sum();
                worst = worst.max((gd.at(*x, *y) - gk.entry(a, b) - bind).abs());
            }
        }
    }
    Ok(worst)
}

fn potential_suite() -> Result<SuiteReport> {
    let mut checks = vec![];
    let t = potential_kernel(120)?;
    checks.push(check("kernel_e1", (t.value([1, 0]) - 1.0).abs(), 1e-6));
    checks.push(check("kernel_diagonal", (t.value([1, 1]) - 4.0 / std::f64::consts::PI).abs(), 1e-6));
    checks.push(check("kernel_harmonic", t.max_harmonic_residual(), 1e-10));
    let box6 = LatticeDomain::lattice_box(16, 1, 1, 6, 6)?;
    checks.push(check("last_exit_identity_6x6", last_exit_residual(&box6)?, 1e-8));
    let box9 = LatticeDomain::lattice_box(16, 1, 1, 9, 9)?;
    checks.push(check("gibbs_markov_9x9", gibbs_markov_residual(&box9)?, 1e-8));
    let g = green(&LatticeDomain::lattice_box(16, 1, 1, 2, 1)?)?;
    checks.push(check("two_site_green", (g.entry(0, 0) - 16.0 / 15.0).abs(), 1e-12));
    Ok(SuiteReport::new("potential", checks))
}

fn sampler_suite() -> Result<SuiteReport> {
    let d = LatticeDomain::lattice_box(16, 1, 1, 4, 4)?;
    let g = green(&d)?.dense()?;
    let mut checks = vec![];
    for kind in [SamplerKind::Dense, SamplerKind::Spectral, SamplerKind::GibbsMarkov] {
        let s = DomainSampler::new(&d, kind)?;
        let mut rng = RngSpec::new(17, 0).rng();
        let samples: Vec<Vec<f64>> = (0..20_000).map(|_| s.sample_with(&mut rng)).collect();
        let (cov, se) = cov_stats(&samples);
        let mut worst = 0.0f64;
        for i in 0..d.len() {
            for j in 0..d.len() {
                let k = i.min(j) * d.len() + i.max(j);
                worst = worst.max((cov[k] - g[i * d.len() + j]).abs() / se[k]);
            }
        }
        checks.push(check(&format!("{kind:?}_covariance_in_se").to_lowercase(), worst, 5.0));
    }
    Ok(SuiteReport::new("sampler", checks))
}
