//! DGFF samplers: envelope-Cholesky ("dense"), sine-spectral on boxes,
//! Gibbs-Markov recursion, and binding fields.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::domain::{LatticeBox, LatticeDomain, Site};
use crate::error::{Error, Result};
use crate::linalg::BoxSpectrum;
use crate::potential::{green, GreenOperator, HarmonicExtender};
use crate::rng::{fill_normal, RngSpec};

/// Provenance of a field.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeedTag {
    pub rng: Option<RngSpec>,
    pub method: String,
}

impl SeedTag {
    pub fn deterministic(method: &str) -> Self {
        Self { rng: None, method: method.to_string() }
    }

    pub fn sampled(rng: RngSpec, method: &str) -> Self {
        Self { rng: Some(rng), method: method.to_string() }
    }
}

/// Real values on the sites of a lattice domain, zero elsewhere.
#[derive(Debug, Clone)]
pub struct Field {
    pub domain: LatticeDomain,
    pub values: Vec<f64>,
    pub seed_tag: SeedTag,
}

impl Field {
    pub fn new(domain: LatticeDomain, values: Vec<f64>, seed_tag: SeedTag) -> Self {
        assert_eq!(domain.len(), values.len());
        Self { domain, values, seed_tag }
    }

    pub fn value(&self, s: Site) -> f64 {
        self.domain.index_of(s).map_or(0.0, |i| self.values[i])
    }

    pub fn max(&self) -> f64 {
        self.values.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// CSV `x1,x2,value`, one row per site in site order.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x1,x2,value")?;
        for (s, v) in self.domain.sites().iter().zip(&self.values) {
            writeln!(w, "{},{},{}", s[0], s[1], v)?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SamplerKind {
    /// Spectral on boxes, otherwise factorization (small) or box embedding.
    #[default]
    Auto,
    Dense,
    Spectral,
    GibbsMarkov,
}

/// Leaf size below which the Gibbs-Markov recursion stops splitting.
pub const GM_LEAF_SITES: usize = 64 * 64;

/// Sites above which [`SamplerKind::Auto`] embeds non-box domains in a box.
pub const DENSE_LIMIT: usize = 4096;

pub fn sample_dense_with<R: rand::Rng + ?Sized>(g: &GreenOperator, rng: &mut R) -> Vec<f64> {
    let mut v = vec![0.0; g.domain().len()];
    fill_normal(rng, &mut v);
    // L L^T = I - P, so L^{-T} xi has covariance (I - P)^{-1} = G
    g.factor().solve_upper(&mut v);
    v
}

pub fn sample_dense(g: &GreenOperator, rng: RngSpec) -> Field {
    let v = sample_dense_with(g, &mut rng.rng());
    Field::new(g.domain().clone(), v, SeedTag::sampled(rng, "dense"))
}

/// Sine-basis sampler on a lattice box: `h = sum xi_jk e_jk / sqrt(lambda_jk)`.
#[derive(Debug, Clone)]
pub struct SpectralBoxSampler {
    spec: BoxSpectrum,
    scale: Vec<f64>,
}

impl SpectralBoxSampler {
    pub fn new(domain: &LatticeDomain) -> Result<Self> {
        let b = domain.as_box().ok_or_else(|| Error::UnsupportedDomain("spectral sampler needs a lattice box".into()))?;
        Ok(Self::for_box(b))
    }

    pub fn for_box(b: LatticeBox) -> Self {
        let spec = BoxSpectrum::new(b.w, b.h);
        let scale = spec.eig.iter().map(|l| spec.norm / l.sqrt()).collect();
        Self { spec, scale }
    }

    pub fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let mut v = vec![0.0; self.scale.len()];
        fill_normal(rng, &mut v);
        for (x, s) in v.iter_mut().zip(&self.scale) {
            *x *= s;
        }
        self.spec.dst2(&mut v);
        v
    }

    pub fn spectrum(&self) -> &BoxSpectrum {
        &self.spec
    }
}

pub fn sample_box_spectral(domain: &LatticeDomain, rng: RngSpec) -> Result<Field> {
    let s = SpectralBoxSampler::new(domain)?;
    Ok(Field::new(domain.clone(), s.sample_with(&mut rng.rng()), SeedTag::sampled(rng, "spectral")))
}

/// Reusable sampler for one domain; heavy set-up happens once.
#[derive(Debug, Clone)]
pub struct DomainSampler {
    domain: LatticeDomain,
    kind: SamplerKind,
    plan: Plan,
}

#[derive(Debug, Clone)]
enum Plan {
    Dense(GreenOperator),
    Spectral(SpectralBoxSampler),
    /// DGFF on an enclosing box minus the harmonic extension of its
    /// values off the domain.
    Embedded { outer: SpectralBoxSampler, bx: LatticeBox, ext: HarmonicExtender },
    Gibbs(Box<GmNode>),
}

#[derive(Debug, Clone)]
struct GmNode {
    outer: Box<DomainSampler>,
    children: Vec<GmChild>,
}

#[derive(Debug, Clone)]
struct GmChild {
    ext: HarmonicExtender,
    /// Index in the parent of each child site.
    map: Vec<usize>,
    sampler: DomainSampler,
}

impl DomainSampler {
    pub fn new(domain: &LatticeDomain, kind: SamplerKind) -> Result<Self> {
        let plan = match kind {
            SamplerKind::Dense => Plan::Dense(green(domain)?),
            SamplerKind::Spectral => Plan::Spectral(SpectralBoxSampler::new(domain)?),
            SamplerKind::Auto => match domain.as_box() {
                Some(b) => Plan::Spectral(SpectralBoxSampler::for_box(b)),
                None if domain.len() <= DENSE_LIMIT => Plan::Dense(green(domain)?),
                None => {
                    let (xs, ys): (Vec<i64>, Vec<i64>) = domain.sites().iter().map(|s| (s[0], s[1])).unzip();
                    let x0 = *xs.iter().min().unwrap();
                    let y0 = *ys.iter().min().unwrap();
                    let bx = LatticeBox {
                        x0,
                        y0,
                        w: (xs.iter().max().unwrap() - x0 + 1) as usize,
                        h: (ys.iter().max().unwrap() - y0 + 1) as usize,
                    };
                    Plan::Embedded { outer: SpectralBoxSampler::for_box(bx), bx, ext: HarmonicExtender::new(domain)? }
                }
            },
            SamplerKind::GibbsMarkov => {
                let children = if domain.len() > GM_LEAF_SITES && domain.as_box().is_some() {
                    domain.cross_children()?
                } else {
                    domain.cross_children().unwrap_or_else(|_| vec![domain.clone()])
                };
                Plan::Gibbs(Box::new(GmNode::new(domain, &children)?))
            }
        };
        Ok(Self { domain: domain.clone(), kind, plan })
    }

    /// Gibbs-Markov sampler with explicit children.
    pub fn gibbs_markov(domain: &LatticeDomain, children: &[LatticeDomain]) -> Result<Self> {
        Ok(Self {
            domain: domain.clone(),
            kind: SamplerKind::GibbsMarkov,
            plan: Plan::Gibbs(Box::new(GmNode::new(domain, children)?)),
        })
    }

    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    pub fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        match &self.plan {
            Plan::Dense(g) => sample_dense_with(g, rng),
            Plan::Spectral(s) => s.sample_with(rng),
            Plan::Embedded { outer, bx, ext } => {
                let hb = outer.sample_with(rng);
                let at = |s: Site| -> f64 {
                    let (i, j) = (s[0] - bx.x0, s[1] - bx.y0);
                    if i < 0 || j < 0 || i as usize >= bx.w || j as usize >= bx.h {
                        0.0
                    } else {
                        hb[i as usize * bx.h + j as usize]
                    }
                };
                let phi = ext.extend(at);
                self.domain.sites().iter().zip(phi).map(|(s, p)| at(*s) - p).collect()
            }
            Plan::Gibbs(node) => node.sample_with(rng),
        }
    }

    pub fn sample(&self, rng: RngSpec) -> Field {
        let name = match self.kind {
            SamplerKind::Auto => "auto",
            SamplerKind::Dense => "dense",
            SamplerKind::Spectral => "spectral",
            SamplerKind::GibbsMarkov => "gibbs_markov",
        };
        Field::new(self.domain.clone(), self.sample_with(&mut rng.rng()), SeedTag::sampled(rng, name))
    }
}

impl GmNode {
    fn new(domain: &LatticeDomain, children: &[LatticeDomain]) -> Result<Self> {
        check_children(domain, children)?;
        let outer = Box::new(DomainSampler::new(domain, SamplerKind::Auto)?);
        let mut out = vec![];
        for c in children {
            let map = c.sites().iter().map(|s| domain.index_of(*s).unwrap()).collect();
            let sampler = if c.len() > GM_LEAF_SITES && c.as_box().is_some() && !c.same_as(domain) {
                DomainSampler::gibbs_markov(c, &c.cross_children()?)?
            } else {
                DomainSampler::new(c, SamplerKind::Auto)?
            };
            out.push(GmChild { ext: HarmonicExtender::new(c)?, map, sampler });
        }
        Ok(Self { outer, children: out })
    }

    fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.outer.domain();
        let mut h = self.outer.sample_with(rng);
        for c in &self.children {
            let outer = &h;
            let phi = c.ext.extend(|s| d.index_of(s).map_or(0.0, |i| outer[i]));
            let hc = c.sampler.sample_with(rng);
            for ((k, p), v) in c.map.iter().zip(phi).zip(hc) {
                h[*k] = p + v;
            }
        }
        h
    }
}

fn check_children(domain: &LatticeDomain, children: &[LatticeDomain]) -> Result<()> {
    let mut seen = vec![false; domain.len()];
    for c in children {
        for s in c.sites() {
            let i = domain.index_of(*s).ok_or_else(|| Error::Domain(format!("child site {s:?} outside domain")))?;
            if seen[i] {
                return Err(Error::Domain(format!("children overlap at {s:?}")));
            }
            seen[i] = true;
        }
    }
    Ok(())
}

/// `h = phi + sum_child h^child` with `phi` the harmonic extension into the
/// children of an outer sample.
pub fn sample_gibbs_markov(domain: &LatticeDomain, children: &[LatticeDomain], rng: RngSpec) -> Result<Field> {
    Ok(DomainSampler::gibbs_markov(domain, children)?.sample(rng))
}

/// Binding field sampler `phi^{D, Dt}`: a DGFF on `D` off `Dt`, harmonic on
/// `Dt`.
#[derive(Debug, Clone)]
pub struct BindingSampler {
    outer: DomainSampler,
    inner: Option<(LatticeDomain, HarmonicExtender, Vec<usize>)>,
}

impl BindingSampler {
    pub fn new(d: &LatticeDomain, dt: &LatticeDomain) -> Result<Self> {
        if !dt.is_subset_of(d) {
            return Err(Error::Domain("inner lattice domain not contained in outer".into()));
        }
        let inner = if dt.same_as(d) {
            None
        } else {
            let map = dt.sites().iter().map(|s| d.index_of(*s).unwrap()).collect();
            Some((dt.clone(), HarmonicExtender::new(dt)?, map))
        };
        Ok(Self { outer: DomainSampler::new(d, SamplerKind::Auto)?, inner })
    }

    pub fn sample_with<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> Vec<f64> {
        let d = self.outer.domain();
        let Some((_, ext, map)) = &self.inner else {
            return vec![0.0; d.len()];
        };
        let mut h = self.outer.sample_with(rng);
        let outer = &h;
        let phi = ext.extend(|s| d.index_of(s).map_or(0.0, |i| outer[i]));
        for (k, p) in map.iter().zip(phi) {
            h[*k] = p;
        }
        h
    }
}

pub fn sample_binding_field(d: &LatticeDomain, dt: &LatticeDomain, rng: RngSpec) -> Result<Field> {
    let s = BindingSampler::new(d, dt)?;
    Ok(Field::new(d.clone(), s.sample_with(&mut rng.rng()), SeedTag::sampled(rng, "binding")))
}

/// Uniform helper used by tests and benches: draw one standard normal.
pub fn standard_normal<R: rand::Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(rand_distr::StandardNormal)
}

/// Empirical covariance `mean(x_i x_j)` (known zero mean) and its standard
/// error, upper triangle in row-major order.
pub fn cov_stats(samples: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let n = samples[0].len();
    let m = samples.len() as f64;
    let mut s1 = vec![0.0; n * n];
    let mut s2 = vec![0.0; n * n];
    for v in samples {
        for i in 0..n {
            for j in i..n {
                let p = v[i] * v[j];
                s1[i * n + j] += p;
                s2[i * n + j] += p * p;
            }
        }
    }
    let mean: Vec<f64> = s1.iter().map(|s| s / m).collect();
    let se = s2.iter().zip(&mean).map(|(q, mu)| ((q / m - mu * mu) / m).sqrt()).collect();
    (mean, se)
}
