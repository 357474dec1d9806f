//! First-moment predictions at finite `N` from the exact one-point
//! variances `G(x, x)`. The limit laws for level sets hold up to
//! `O(1/log N)` corrections that are far from negligible at desk scale;
//! these predictions carry no such error for counts, and only a bulk
//! approximation for cluster profiles.

use crate::domain::{LatticeDomain, Rect, Site};
use crate::error::{Error, Result};
use crate::linalg::BoxSpectrum;
use crate::potential::{gauss_legendre, green, PotentialKernelTable};
use crate::sampler::DENSE_LIMIT;
use crate::stats::truncated_exp_rate;

const QUAD_NODES: usize = 64;

fn normal_tail(t: f64) -> f64 {
    0.5 * libm::erfc(t / std::f64::consts::SQRT_2)
}

fn normal_density(t: f64) -> f64 {
    (-0.5 * t * t).exp() / (2.0 * std::f64::consts::PI).sqrt()
}

#[derive(Debug, Clone)]
pub struct SiteVariances {
    pub positions: Vec<[f64; 2]>,
    pub var: Vec<f64>,
}

/// Cluster moments predicted for lags `z`, `w`.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterPrediction {
    pub mean: Vec<f64>,
    pub cov: Vec<Vec<f64>>,
}

impl SiteVariances {
    /// Spectral diagonal on boxes, dense Green function otherwise.
    pub fn new(d: &LatticeDomain) -> Result<Self> {
        let var = match d.as_box() {
            Some(b) => BoxSpectrum::new(b.w, b.h).green_diagonal(),
            None if d.len() <= DENSE_LIMIT => {
                let g = green(d)?.dense()?;
                (0..d.len()).map(|i| g[i * d.len() + i]).collect()
            }
            None => {
                return Err(Error::Resource(format!(
                    "site variances of a non-box domain with {} sites",
                    d.len()
                )))
            }
        };
        let positions = d.sites().iter().map(|s| d.position(*s)).collect();
        Ok(Self { positions, var })
    }

    /// `E |{x : h_x >= level}|`.
    pub fn expected_count(&self, level: f64) -> f64 {
        self.var.iter().map(|v| normal_tail(level / v.sqrt())).sum()
    }

    /// Expected count per cell; sites outside every cell are dropped.
    pub fn expected_cell_counts(&self, level: f64, cells: &[Rect]) -> Vec<f64> {
        let mut out = vec![0.0; cells.len()];
        for (p, v) in self.positions.iter().zip(&self.var) {
            if let Some(c) = cells.iter().position(|r| r.contains(*p)) {
                out[c] += normal_tail(level / v.sqrt());
            }
        }
        out
    }

    /// Sums `f(var, u) * density of h_x at a + u` over sites and `u` in
    /// `[0, h_max]`.
    fn mixture(&self, a: f64, h_max: f64, f: impl Fn(f64, f64) -> f64) -> f64 {
        let (gx, gw) = gauss_legendre(QUAD_NODES);
        let half = 0.5 * h_max;
        let mut s = 0.0;
        for v in &self.var {
            let sd = v.sqrt();
            for (x, w) in gx.iter().zip(&gw) {
                let u = half * (x + 1.0);
                s += w * half * normal_density((a + u) / sd) / sd * f(*v, u);
            }
        }
        s
    }

    /// Large-sample limit of the truncated-exponential rate fitted to all
    /// overshoots above `a` in `[0, h_max]`.
    pub fn overshoot_rate(&self, a: f64, h_max: f64) -> Result<f64> {
        let z = self.mixture(a, h_max, |_, _| 1.0);
        let m = self.mixture(a, h_max, |_, u| u) / z;
        truncated_exp_rate(m, h_max)
            .ok_or_else(|| Error::Statistics("overshoot density is not decreasing".into()))
    }

    /// Moments of `h_x - h_{x+z}` given `h_x - a` in `window`, using the
    /// bulk form `G(x, x+z) = G(x, x) - a(z)`.
    pub fn cluster(&self, a: f64, window: [f64; 2], lags: &[Site], kernel: &PotentialKernelTable) -> ClusterPrediction {
        let z = self.mixture(a - window[0], window[1] - window[0], |_, _| 1.0);
        let shift = window[0];
        let inv = self.mixture(a - shift, window[1] - shift, |v, _| 1.0 / v) / z;
        let m1 = self.mixture(a - shift, window[1] - shift, |v, u| (a + u) / v) / z;
        let m2 = self.mixture(a - shift, window[1] - shift, |v, u| ((a + u) / v).powi(2)) / z;
        let av: Vec<f64> = lags.iter().map(|l| kernel.value(*l)).collect();
        let mean = av.iter().map(|x| m1 * x).collect();
        let cov = (0..lags.len())
            .map(|i| {
                (0..lags.len())
                    .map(|j| {
                        let d = [lags[i][0] - lags[j][0], lags[i][1] - lags[j][1]];
                        av[i] + av[j] - kernel.value(d) - av[i] * av[j] * (inv - (m2 - m1 * m1))
                    })
                    .collect()
            })
            .collect();
        ClusterPrediction { mean, cov }
    }
}
