//! Streaming level-set ensembles: one field per replica, reduced to counts
//! and estimator accumulators without keeping fields or atoms.

use dgff::domain::Rect;
use dgff::levelset::{count_above, point_measure_above};
use dgff::sampler::DomainSampler;
use dgff::stats::{lag_set, ClusterAccumulator, IntensityAccumulator, OvershootAccumulator};
use dgff::{discretize, k_norm, CenteringSchedule, ContinuumDomain, RngSpec, SamplerKind};
use rayon::prelude::*;

use crate::{replica_stream, Result};

/// Overshoot and cluster statistics from the first `replicas` fields.
#[derive(Debug, Clone, PartialEq)]
pub struct ProfileSpec {
    pub lambda: f64,
    /// Nonzero lags with `|z| <= lag_radius`.
    pub lag_radius: f64,
    pub replicas: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensitySpec {
    pub lambda: f64,
    pub cells: Vec<Rect>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnsembleSpec {
    pub domain: ContinuumDomain,
    pub n: u32,
    pub replicas: usize,
    pub seed: u64,
    pub sampler: SamplerKind,
    /// `|Gamma_N(b)|` is recorded for every pair of these.
    pub lambdas: Vec<f64>,
    pub bs: Vec<f64>,
    pub profile: Option<ProfileSpec>,
    pub intensity: Option<IntensitySpec>,
}

#[derive(Debug, Clone)]
pub struct EnsembleResult {
    pub spec: EnsembleSpec,
    /// `counts[l][k][rep]` for `lambdas[l]`, `bs[k]`.
    pub counts: Vec<Vec<Vec<f64>>>,
    pub k_n: Vec<f64>,
    pub a_n: Vec<f64>,
    pub overshoot: Option<OvershootAccumulator>,
    pub cluster: Option<ClusterAccumulator>,
    pub intensity: Option<IntensityAccumulator>,
}

impl EnsembleResult {
    fn index(&self, lambda: f64, b: f64) -> Option<(usize, usize)> {
        let l = self.spec.lambdas.iter().position(|x| *x == lambda)?;
        let k = self.spec.bs.iter().position(|x| *x == b)?;
        Some((l, k))
    }

    /// Per-replica `|Gamma_N(b)|` at `lambda`.
    pub fn counts(&self, lambda: f64, b: f64) -> &[f64] {
        let (l, k) = self.index(lambda, b).expect("lambda and b were recorded");
        &self.counts[l][k]
    }

    pub fn mean_count(&self, lambda: f64, b: f64) -> f64 {
        let c = self.counts(lambda, b);
        c.iter().sum::<f64>() / c.len() as f64
    }

    pub fn k_norm(&self, lambda: f64) -> f64 {
        self.k_n[self.spec.lambdas.iter().position(|x| *x == lambda).expect("lambda recorded")]
    }
}

struct ReplicaSummary {
    counts: Vec<f64>,
    overshoot: Option<OvershootAccumulator>,
    cluster: Option<ClusterAccumulator>,
    intensity: Option<IntensityAccumulator>,
}

pub fn run_ensemble(spec: &EnsembleSpec) -> Result<EnsembleResult> {
    let lattice = discretize(&spec.domain, spec.n)?;
    let sampler = DomainSampler::new(&lattice, spec.sampler)?;
    let scheds = spec.lambdas.iter().map(|l| CenteringSchedule::canonical(*l)).collect::<dgff::Result<Vec<_>>>()?;
    let a_n = scheds.iter().map(|s| s.a_n(spec.n)).collect::<dgff::Result<Vec<_>>>()?;
    let k_n = scheds.iter().map(|s| k_norm(spec.n, s)).collect::<dgff::Result<Vec<_>>>()?;
    let lags = spec.profile.as_ref().map(|p| lag_set(p.lag_radius));
    let nb = spec.bs.len();

    let one = |rep: usize| -> Result<ReplicaSummary> {
        let field = sampler.sample(RngSpec::new(spec.seed, replica_stream(rep, spec.n)));
        let mut counts = Vec::with_capacity(a_n.len() * nb);
        for a in &a_n {
            for b in &spec.bs {
                counts.push(count_above(&field.values, *a, *b) as f64);
            }
        }
        let (mut overshoot, mut cluster) = (None, None);
        if let (Some(p), Some(lags)) = (&spec.profile, &lags) {
            if rep < p.replicas {
                let sched = CenteringSchedule::canonical(p.lambda)?;
                let r = p.lag_radius.floor() as u32;
                let pm = point_measure_above(&field, &sched, r, 0.0)?;
                let mut o = OvershootAccumulator::for_lambda(p.lambda);
                o.add(&pm);
                let mut c = ClusterAccumulator::new(lags.clone(), spec.n);
                c.add(&pm)?;
                overshoot = Some(o);
                cluster = Some(c);
            }
        }
        let intensity = match &spec.intensity {
            Some(s) => {
                let a = CenteringSchedule::canonical(s.lambda)?.a_n(spec.n)?;
                let k = k_norm(spec.n, &CenteringSchedule::canonical(s.lambda)?)?;
                let pos = field
                    .domain
                    .sites()
                    .iter()
                    .zip(&field.values)
                    .filter(|(_, v)| **v >= a)
                    .map(|(x, _)| field.domain.position(*x));
                let mut acc = IntensityAccumulator::new(s.cells.clone());
                acc.add_positions(pos, k);
                Some(acc)
            }
            None => None,
        };
        Ok(ReplicaSummary { counts, overshoot, cluster, intensity })
    };

    let summaries: Vec<ReplicaSummary> = (0..spec.replicas).into_par_iter().map(one).collect::<Result<_>>()?;

    let mut counts = vec![vec![Vec::with_capacity(spec.replicas); nb]; a_n.len()];
    let mut overshoot: Option<OvershootAccumulator> = None;
    let mut cluster: Option<ClusterAccumulator> = None;
    let mut intensity: Option<IntensityAccumulator> = None;
    for s in summaries {
        for (i, c) in s.counts.iter().enumerate() {
            counts[i / nb][i % nb].push(*c);
        }
        if let Some(o) = s.overshoot {
            match overshoot.as_mut() {
                Some(t) => t.merge(&o),
                None => overshoot = Some(o),
            }
        }
        if let Some(c) = s.cluster {
            match cluster.as_mut() {
                Some(t) => t.merge(&c),
                None => cluster = Some(c),
            }
        }
        if let Some(c) = s.intensity {
            match intensity.as_mut() {
                Some(t) => t.merge(&c),
                None => intensity = Some(c),
            }
        }
    }
    Ok(EnsembleResult { spec: spec.clone(), counts, k_n, a_n, overshoot, cluster, intensity })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn spec() -> EnsembleSpec {
        EnsembleSpec {
            domain: ContinuumDomain::unit_square(),
            n: 32,
            replicas: 6,
            seed: 3,
            sampler: SamplerKind::Auto,
            lambdas: vec![0.2, 0.4],
            bs: vec![-1.0, 0.0, 1.0],
            profile: Some(ProfileSpec { lambda: 0.2, lag_radius: 1.0, replicas: 4 }),
            intensity: Some(IntensitySpec { lambda: 0.2, cells: vec![Rect { x0: 0.0, y0: 0.0, x1: 1.0, y1: 1.0 }] }),
        }
    }

    #[test]
    fn counts_are_nested_and_reproducible() {
        let a = run_ensemble(&spec()).unwrap();
        let b = run_ensemble(&spec()).unwrap();
        assert_eq!(a.counts, b.counts);
        for rep in 0..6 {
            assert!(a.counts(0.2, -1.0)[rep] >= a.counts(0.2, 0.0)[rep]);
            assert!(a.counts(0.2, 0.0)[rep] >= a.counts(0.4, 0.0)[rep]);
        }
        assert_eq!(a.intensity.as_ref().unwrap().replicas, 6);
        let total: f64 = a.counts(0.2, 0.0).iter().sum();
        let n_profile: f64 = a.counts(0.2, 0.0)[..4].iter().sum();
        assert!(a.overshoot.unwrap().n as f64 <= n_profile);
        assert!(n_profile <= total);
    }
}
