//! Estimators tying simulated level sets to their limit laws: overshoot
//! rate, spatial intensity, cluster profile, `b`-factorization and a
//! two-sample Kolmogorov-Smirnov test.
//!
//! Each estimator has a streaming accumulator so that large ensembles can
//! be reduced replica by replica without keeping fields or atoms around.

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::chaos::PsiWeight;
use crate::domain::{ContinuumDomain, Rect, Site};
use crate::error::{Error, Result};
use crate::levelset::PointMeasure;
use crate::potential::PotentialKernelTable;
use crate::ALPHA;

/// Minimum pooled atoms for an overshoot fit.
pub const MIN_OVERSHOOT_ATOMS: usize = 100;
/// Minimum size of each KS sample.
pub const MIN_KS_SAMPLE: usize = 20;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OvershootFit {
    pub rate_hat: f64,
    pub stderr: f64,
    pub n_atoms: usize,
    pub window: [f64; 2],
    /// `alpha lambda`.
    pub target: f64,
    pub rel_err: f64,
}

/// Sufficient statistics for the truncated-exponential likelihood.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OvershootAccumulator {
    pub h_max: f64,
    pub n: usize,
    pub sum: f64,
}

impl OvershootAccumulator {
    pub fn new(h_max: f64) -> Self {
        Self { h_max, n: 0, sum: 0.0 }
    }

    /// Window `[0, 3/(alpha lambda)]`.
    pub fn for_lambda(lambda: f64) -> Self {
        Self::new(3.0 / (ALPHA * lambda))
    }

    pub fn push(&mut self, h: f64) {
        if (0.0..=self.h_max).contains(&h) {
            self.n += 1;
            self.sum += h;
        }
    }

    pub fn add(&mut self, pm: &PointMeasure) {
        for a in &pm.atoms {
            self.push(a.overshoot);
        }
    }

    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        self.sum += other.sum;
    }

    /// Maximum likelihood rate of `rho e^{-rho h} / (1 - e^{-rho H})` on
    /// `[0, H]`, with the Fisher-information standard error.
    pub fn fit(&self, target: f64) -> Result<OvershootFit> {
        if self.n < MIN_OVERSHOOT_ATOMS {
            return Err(Error::InsufficientData(format!(
                "overshoot fit needs {MIN_OVERSHOOT_ATOMS} atoms in the window, got {}",
                self.n
            )));
        }
        let h = self.h_max;
        let mean = self.sum / self.n as f64;
        let rate = truncated_exp_rate(mean, h)
            .ok_or_else(|| Error::Statistics("overshoots not decreasing; no positive rate fits".into()))?;
        let e = (-rate * h).exp();
        let info = 1.0 / (rate * rate) - h * h * e / ((1.0 - e) * (1.0 - e));
        let stderr = 1.0 / (self.n as f64 * info).sqrt();
        Ok(OvershootFit {
            rate_hat: rate,
            stderr,
            n_atoms: self.n,
            window: [0.0, h],
            target,
            rel_err: (rate - target).abs() / target,
        })
    }
}

/// Rate `rho` of the exponential law truncated to `[0, h]` whose mean is
/// `mean`; `None` unless `0 < mean < h/2`.
pub fn truncated_exp_rate(mean: f64, h: f64) -> Option<f64> {
    if !(mean > 0.0 && mean < h / 2.0) {
        return None;
    }
    // 1/rho - H/(e^{rho H} - 1) is decreasing in rho
    let score = |r: f64| 1.0 / r - h / (r * h).exp_m1() - mean;
    let (mut lo, mut hi) = (1e-9 / h, 1.0 / mean);
    while score(hi) > 0.0 {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if score(mid) > 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Pools the overshoots of all point measures in `[0, 3/(alpha lambda)]`.
pub fn fit_overshoot(pms: &[PointMeasure]) -> Result<OvershootFit> {
    let lambda = pms.first().ok_or_else(|| Error::InsufficientData("no point measures".into()))?.lambda;
    if lambda <= 0.0 {
        return Err(Error::Precondition("overshoot fit needs lambda > 0".into()));
    }
    let mut acc = OvershootAccumulator::for_lambda(lambda);
    for pm in pms {
        acc.add(pm);
    }
    acc.fit(ALPHA * lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellReport {
    pub rect: Rect,
    /// Mean of `|Gamma cap cell| / K_N` over replicas.
    pub empirical_mass: f64,
    pub stderr: f64,
    pub psi_integral: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntensityReport {
    pub replicas: usize,
    pub cells: Vec<CellReport>,
    pub ratio: Vec<f64>,
    /// `max ratio / min ratio - 1` over cells with atoms.
    pub flat: f64,
    /// Indices of cells left out for lack of atoms or of `psi` mass.
    pub excluded: Vec<usize>,
}

/// Dyadic cells of side `side` lying in the `delta`-interior of `d`.
pub fn interior_dyadic_cells(d: &ContinuumDomain, delta: f64, side: f64) -> Vec<Rect> {
    let bb = d.bbox();
    let i0 = (bb.x0 / side).floor() as i64;
    let i1 = (bb.x1 / side).ceil() as i64;
    let j0 = (bb.y0 / side).floor() as i64;
    let j1 = (bb.y1 / side).ceil() as i64;
    let mut cells = vec![];
    for i in i0..i1 {
        for j in j0..j1 {
            let r = Rect { x0: i as f64 * side, y0: j as f64 * side, x1: (i + 1) as f64 * side, y1: (j + 1) as f64 * side };
            let corners = [[r.x0, r.y0], [r.x1, r.y0], [r.x0, r.y1], [r.x1, r.y1]];
            let comp = d.component_of(corners[0]);
            let inside = comp.is_some()
                && corners.iter().all(|&c| d.depth(c) >= delta - 1e-12 && d.component_of(c) == comp);
            if inside {
                cells.push(r);
            }
        }
    }
    cells
}

#[derive(Debug, Clone, PartialEq)]
pub struct IntensityAccumulator {
    pub cells: Vec<Rect>,
    pub replicas: usize,
    sum: Vec<f64>,
    sumsq: Vec<f64>,
}

impl IntensityAccumulator {
    pub fn new(cells: Vec<Rect>) -> Self {
        let k = cells.len();
        Self { cells, replicas: 0, sum: vec![0.0; k], sumsq: vec![0.0; k] }
    }

    /// Adds one replica given atom positions and `K_N`.
    pub fn add_positions(&mut self, positions: impl IntoIterator<Item = [f64; 2]>, k_n: f64) {
        let mut counts = vec![0usize; self.cells.len()];
        for p in positions {
            if let Some(c) = self.cells.iter().position(|r| r.contains(p)) {
                counts[c] += 1;
            }
        }
        for (c, &k) in counts.iter().enumerate() {
            let m = k as f64 / k_n;
            self.sum[c] += m;
            self.sumsq[c] += m * m;
        }
        self.replicas += 1;
    }

    /// Adds another accumulator over the same cells.
    pub fn merge(&mut self, other: &Self) {
        for c in 0..self.sum.len() {
            self.sum[c] += other.sum[c];
            self.sumsq[c] += other.sumsq[c];
        }
        self.replicas += other.replicas;
    }

    pub fn add(&mut self, pm: &PointMeasure) {
        self.add_positions(pm.atoms.iter().filter(|a| a.overshoot >= 0.0).map(|a| a.position), pm.k_n);
    }

    pub fn report(&self, psi: &PsiWeight) -> Result<IntensityReport> {
        if self.replicas == 0 {
            return Err(Error::InsufficientData("no replicas".into()));
        }
        let r = self.replicas as f64;
        let mut cells = vec![];
        let mut excluded = vec![];
        for (c, rect) in self.cells.iter().enumerate() {
            let mean = self.sum[c] / r;
            let var = if self.replicas > 1 { (self.sumsq[c] / r - mean * mean).max(0.0) * r / (r - 1.0) } else { f64::NAN };
            let pi = psi.cell_integral(rect);
            let ratio = if pi > 0.0 { mean / pi } else { f64::NAN };
            if !(pi > 0.0) || mean == 0.0 {
                excluded.push(c);
            }
            cells.push(CellReport { rect: *rect, empirical_mass: mean, stderr: (var / r).sqrt(), psi_integral: pi, ratio });
        }
        let used: Vec<f64> =
            cells.iter().enumerate().filter(|(c, _)| !excluded.contains(c)).map(|(_, x)| x.ratio).collect();
        if used.is_empty() {
            return Err(Error::InsufficientData("every cell is empty".into()));
        }
        let max = used.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let min = used.iter().copied().fold(f64::INFINITY, f64::min);
        Ok(IntensityReport {
            replicas: self.replicas,
            ratio: cells.iter().map(|c| c.ratio).collect(),
            cells,
            flat: max / min - 1.0,
            excluded,
        })
    }
}

pub fn intensity_ratio(pms: &[PointMeasure], psi: &PsiWeight, cells: &[Rect]) -> Result<IntensityReport> {
    let mut acc = IntensityAccumulator::new(cells.to_vec());
    for pm in pms {
        acc.add(pm);
    }
    acc.report(psi)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterReport {
    pub lambda: f64,
    pub n_atoms: usize,
    pub window: [f64; 2],
    pub lags: Vec<Site>,
    pub mean_profile: Vec<f64>,
    /// Row-major `lags x lags`.
    pub cov_profile: Vec<Vec<f64>>,
    pub predicted_mean: Vec<f64>,
    pub predicted_cov: Vec<Vec<f64>>,
    pub mean_rel_err: Vec<f64>,
    pub max_mean_rel_err: f64,
    pub max_cov_rel_err: f64,
    /// `||emp - pred||_F / ||pred||_F` for the covariance.
    pub cov_frobenius_rel_err: f64,
    pub min_predicted_eigenvalue: f64,
}

/// Nonzero lags `z` with `|z| <= radius` (Euclidean), ordered by `(z1, z2)`.
pub fn lag_set(radius: f64) -> Vec<Site> {
    let r = radius.floor() as i64;
    let mut v = vec![];
    for a in -r..=r {
        for b in -r..=r {
            if (a != 0 || b != 0) && ((a * a + b * b) as f64) <= radius * radius + 1e-12 {
                v.push([a, b]);
            }
        }
    }
    v
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterAccumulator {
    pub lags: Vec<Site>,
    pub window: [f64; 2],
    pub n: usize,
    sum: Vec<f64>,
    sumprod: Vec<f64>,
}

impl ClusterAccumulator {
    /// Conditioning window `[0, log log N]` on the overshoot.
    pub fn new(lags: Vec<Site>, n: u32) -> Self {
        let top = (n as f64).ln().ln();
        let k = lags.len();
        Self { lags, window: [0.0, top], n: 0, sum: vec![0.0; k], sumprod: vec![0.0; k * k] }
    }

    pub fn add(&mut self, pm: &PointMeasure) -> Result<()> {
        let idx: Vec<usize> = self
            .lags
            .iter()
            .map(|z| {
                pm.profile_index(*z)
                    .ok_or_else(|| Error::Precondition(format!("profile radius {} too small for lag {z:?}", pm.r)))
            })
            .collect::<Result<_>>()?;
        let k = idx.len();
        for a in &pm.atoms {
            if !(self.window[0]..=self.window[1]).contains(&a.overshoot) {
                continue;
            }
            self.n += 1;
            for (i, &pi) in idx.iter().enumerate() {
                let u = a.profile[pi];
                self.sum[i] += u;
                for (j, &pj) in idx.iter().enumerate().skip(i) {
                    self.sumprod[i * k + j] += u * a.profile[pj];
                }
            }
        }
        Ok(())
    }

    /// Adds another accumulator over the same lags and window.
    pub fn merge(&mut self, other: &Self) {
        self.n += other.n;
        for (a, b) in self.sum.iter_mut().zip(&other.sum) {
            *a += b;
        }
        for (a, b) in self.sumprod.iter_mut().zip(&other.sumprod) {
            *a += b;
        }
    }

    pub fn report(&self, kernel: &PotentialKernelTable, lambda: f64) -> Result<ClusterReport> {
        if self.n < 2 {
            return Err(Error::InsufficientData(format!("cluster report needs atoms in the window, got {}", self.n)));
        }
        let k = self.lags.len();
        let nf = self.n as f64;
        let mean: Vec<f64> = self.sum.iter().map(|s| s / nf).collect();
        let mut cov = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in i..k {
                let c = (self.sumprod[i * k + j] - nf * mean[i] * mean[j]) / (nf - 1.0);
                cov[i][j] = c;
                cov[j][i] = c;
            }
        }
        let a = |z: Site| kernel.value(z);
        let predicted_mean: Vec<f64> = self.lags.iter().map(|z| ALPHA * lambda * a(*z)).collect();
        let mut predicted_cov = vec![vec![0.0; k]; k];
        for i in 0..k {
            for j in 0..k {
                let (z, w) = (self.lags[i], self.lags[j]);
                predicted_cov[i][j] = a(z) + a(w) - a([z[0] - w[0], z[1] - w[1]]);
            }
        }
        let mean_rel_err: Vec<f64> =
            mean.iter().zip(&predicted_mean).map(|(e, p)| (e - p).abs() / p.abs()).collect();
        let mut max_cov = 0.0f64;
        let (mut num, mut den) = (0.0, 0.0);
        for i in 0..k {
            for j in 0..k {
                let (e, p) = (cov[i][j], predicted_cov[i][j]);
                max_cov = max_cov.max((e - p).abs() / p.abs());
                num += (e - p) * (e - p);
                den += p * p;
            }
        }
        let m = DMatrix::from_fn(k, k, |i, j| predicted_cov[i][j]);
        let min_eig = m.symmetric_eigenvalues().iter().copied().fold(f64::INFINITY, f64::min);
        Ok(ClusterReport {
            lambda,
            n_atoms: self.n,
            window: self.window,
            lags: self.lags.clone(),
            max_mean_rel_err: mean_rel_err.iter().copied().fold(0.0, f64::max),
            mean_rel_err,
            mean_profile: mean,
            cov_profile: cov,
            predicted_mean,
            predicted_cov,
            max_cov_rel_err: max_cov,
            cov_frobenius_rel_err: (num / den).sqrt(),
            min_predicted_eigenvalue: min_eig,
        })
    }
}

/// Cluster profile over the nonzero lags within the profile radius of `pms`.
pub fn cluster_report(pms: &[PointMeasure], kernel: &PotentialKernelTable, lambda: f64) -> Result<ClusterReport> {
    let first = pms.first().ok_or_else(|| Error::InsufficientData("no point measures".into()))?;
    let r = first.r as i64;
    let lags: Vec<Site> = lag_set(first.r as f64).into_iter().filter(|z| z[0].abs() <= r && z[1].abs() <= r).collect();
    if lags.is_empty() {
        return Err(Error::Precondition("profile radius must be at least 1".into()));
    }
    let mut acc = ClusterAccumulator::new(lags, first.n);
    for pm in pms {
        acc.add(pm)?;
    }
    acc.report(kernel, lambda)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FactorizationReport {
    pub b: f64,
    pub lambda: f64,
    pub replicas: usize,
    pub mean_count_0: f64,
    pub mean_count_b: f64,
    /// `E|Gamma(b)| / E|Gamma(0)|`.
    pub ratio: f64,
    /// `e^{-alpha lambda b}`.
    pub predicted: f64,
    /// `ratio / predicted - 1`.
    pub discrepancy: f64,
    /// Delta-method standard error of `discrepancy`.
    pub stderr: f64,
    /// Per-replica `e^{alpha lambda b} |Gamma(b)| / |Gamma(0)| - 1`, over
    /// replicas with a nonempty `Gamma(0)`.
    pub per_replica: Vec<f64>,
}

pub fn factorization_from_counts(lambda: f64, b: f64, c0: &[f64], cb: &[f64]) -> Result<FactorizationReport> {
    if c0.len() != cb.len() || c0.is_empty() {
        return Err(Error::InsufficientData("count vectors must be nonempty and of equal length".into()));
    }
    let n = c0.len() as f64;
    let m0 = c0.iter().sum::<f64>() / n;
    let mb = cb.iter().sum::<f64>() / n;
    if m0 == 0.0 {
        return Err(Error::InsufficientData("no atoms at b = 0".into()));
    }
    let predicted = (-ALPHA * lambda * b).exp();
    let ratio = mb / m0;
    // var(mb/m0) by the delta method with the sample covariance
    let (mut v0, mut vb, mut c) = (0.0, 0.0, 0.0);
    for (x, y) in c0.iter().zip(cb) {
        v0 += (x - m0) * (x - m0);
        vb += (y - mb) * (y - mb);
        c += (x - m0) * (y - mb);
    }
    let d = (n - 1.0).max(1.0) * n;
    let var = ratio * ratio * (vb / d / (mb * mb).max(f64::MIN_POSITIVE) + v0 / d / (m0 * m0) - 2.0 * c / d / (m0 * mb).max(f64::MIN_POSITIVE));
    let per_replica = c0.iter().zip(cb).filter(|(x, _)| **x > 0.0).map(|(x, y)| y / x / predicted - 1.0).collect();
    Ok(FactorizationReport {
        b,
        lambda,
        replicas: c0.len(),
        mean_count_0: m0,
        mean_count_b: mb,
        ratio,
        predicted,
        discrepancy: ratio / predicted - 1.0,
        stderr: var.max(0.0).sqrt() / predicted,
        per_replica,
    })
}

/// Compares `|Gamma(b)|` with `e^{-alpha lambda b} |Gamma(0)|` over replicas.
/// For `b < 0` the point measures must have been extracted down to `b`.
pub fn factorization_check(pms: &[PointMeasure], b: f64) -> Result<FactorizationReport> {
    let first = pms.first().ok_or_else(|| Error::InsufficientData("no point measures".into()))?;
    if pms.iter().any(|pm| pm.b > b.min(0.0)) {
        return Err(Error::Precondition(format!("point measures must be extracted down to {}", b.min(0.0))));
    }
    let count = |pm: &PointMeasure, t: f64| pm.atoms.iter().filter(|a| a.overshoot >= t).count() as f64;
    let c0: Vec<f64> = pms.iter().map(|pm| count(pm, 0.0)).collect();
    let cb: Vec<f64> = pms.iter().map(|pm| count(pm, b)).collect();
    factorization_from_counts(first.lambda, b, &c0, &cb)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KsResult {
    pub statistic: f64,
    pub pvalue: f64,
    pub n_a: usize,
    pub n_b: usize,
}

/// Kolmogorov tail `Q(t) = 2 sum (-1)^{k-1} e^{-2 k^2 t^2}`.
fn kolmogorov_q(t: f64) -> f64 {
    if t < 0.2 {
        return 1.0;
    }
    let mut s = 0.0;
    for k in 1..=200 {
        let term = (-2.0 * (k * k) as f64 * t * t).exp();
        s += if k % 2 == 1 { term } else { -term };
        if term < 1e-17 {
            break;
        }
    }
    (2.0 * s).clamp(0.0, 1.0)
}

/// Two-sample Kolmogorov-Smirnov test with the asymptotic p-value and the
/// Stephens small-sample correction.
pub fn two_sample_ks(a: &[f64], b: &[f64]) -> Result<KsResult> {
    if a.len() < MIN_KS_SAMPLE || b.len() < MIN_KS_SAMPLE {
        return Err(Error::InsufficientData(format!(
            "KS needs at least {MIN_KS_SAMPLE} values per sample, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.iter().chain(b).any(|x| x.is_nan()) {
        return Err(Error::Statistics("NaN in KS sample".into()));
    }
    let mut x = a.to_vec();
    let mut y = b.to_vec();
    x.sort_by(f64::total_cmp);
    y.sort_by(f64::total_cmp);
    let (na, nb) = (x.len() as f64, y.len() as f64);
    let (mut i, mut j, mut d) = (0usize, 0usize, 0.0f64);
    while i < x.len() && j < y.len() {
        let v = x[i].min(y[j]);
        while i < x.len() && x[i] <= v {
            i += 1;
        }
        while j < y.len() && y[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    let en = (na * nb / (na + nb)).sqrt();
    let pvalue = kolmogorov_q((en + 0.12 + 0.11 / en) * d);
    Ok(KsResult { statistic: d, pvalue, n_a: a.len(), n_b: b.len() })
}

/// Empirical CDF evaluated at the sorted sample points, as `(x, F(x))`.
pub fn empirical_cdf(sample: &[f64]) -> Vec<(f64, f64)> {
    let mut x = sample.to_vec();
    x.sort_by(f64::total_cmp);
    let n = x.len() as f64;
    x.iter().enumerate().map(|(i, v)| (*v, (i + 1) as f64 / n)).collect()
}
