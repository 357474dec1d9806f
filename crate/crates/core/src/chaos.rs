//! Conformal-radius weights `psi`, multiplicative chaos steps and the dyadic
//! martingale built from per-level binding fields.
//!
//! The binding field between a dyadic cell and its four children is sampled
//! on a lattice with two sites per pixel: pixel centers sit at odd lattice
//! coordinates of the parent box, and the children are the boxes left after
//! deleting the middle row and column (the "cross"). The parent field on
//! the cross is drawn from a cached Cholesky factor and extended
//! harmonically into each child by a sine transform, evaluated only at the
//! pixel centers. Each level is normalized by its exact lattice variance so
//! the expectation `E Y_m(A) = int_A psi` holds at every depth.

use std::io::Write;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex;
use serde::{Deserialize, Serialize};

use crate::domain::{ContinuumDomain, DyadicSquare, PixelGrid, Rect};
use crate::error::{Error, Result};
use crate::linalg::{dot, BoxSpectrum, Dst1};
use crate::potential::log_conformal_radius;
use crate::rng::fill_normal;
use crate::stats::{two_sample_ks, KsResult};
use crate::ALPHA;

/// Pixels per side of the unit square used by [`dyadic_martingale`].
pub const DEFAULT_GRID: usize = 256;
/// Default dyadic depth.
pub const DEFAULT_DEPTH: u32 = 7;
/// Diagonal jitter added before factoring cross covariances.
pub const JITTER: f64 = 1e-10;
/// Pixels across the larger side of the smaller domain in
/// [`scaling_check`].
pub const SCALING_PIXELS: usize = 256;

/// `psi(x) = exp(2 lambda^2 int Pi^D(x, dz) log|x - z|)` at pixel centers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PsiWeight {
    pub domain: ContinuumDomain,
    pub lambda: f64,
    pub grid: PixelGrid,
    pub values: Vec<f64>,
}

pub fn psi_value(domain: &ContinuumDomain, lambda: f64, x: [f64; 2]) -> Result<f64> {
    Ok((2.0 * lambda * lambda * log_conformal_radius(domain, x)?).exp())
}

/// Fails if any pixel center lies outside `domain`.
pub fn psi(domain: &ContinuumDomain, lambda: f64, grid: &PixelGrid) -> Result<PsiWeight> {
    let values = grid.centers().into_iter().map(|c| psi_value(domain, lambda, c)).collect::<Result<Vec<_>>>()?;
    Ok(PsiWeight { domain: domain.clone(), lambda, grid: *grid, values })
}

/// Like [`psi`] but sets pixels centered outside `domain` to zero.
pub fn psi_masked(domain: &ContinuumDomain, lambda: f64, grid: &PixelGrid) -> Result<PsiWeight> {
    let values = grid
        .centers()
        .into_iter()
        .map(|c| if domain.contains(c) { psi_value(domain, lambda, c) } else { Ok(0.0) })
        .collect::<Result<Vec<_>>>()?;
    Ok(PsiWeight { domain: domain.clone(), lambda, grid: *grid, values })
}

impl PsiWeight {
    /// Midpoint rule for `int psi` over the whole grid.
    pub fn integral(&self) -> f64 {
        self.values.iter().sum::<f64>() * self.grid.pixel_area()
    }

    /// Midpoint rule over pixels centered in `cell`.
    pub fn cell_integral(&self, cell: &Rect) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for i in 0..g.nx {
            for j in 0..g.ny {
                if cell.contains(g.center(i, j)) {
                    s += self.values[i * g.ny + j];
                }
            }
        }
        s * g.pixel_area()
    }
}

/// Random measure on a pixel grid with its accumulated Gaussian field and
/// variance ledger.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChaosMeasure {
    pub domain: ContinuumDomain,
    pub beta: f64,
    pub level: u32,
    pub grid: PixelGrid,
    pub pixel_mass: Vec<f64>,
    pub field: Vec<f64>,
    pub variance: Vec<f64>,
}

impl ChaosMeasure {
    /// Pixel masses `density * pixel area`, zero field.
    pub fn with_density(domain: ContinuumDomain, grid: PixelGrid, beta: f64, density: &[f64]) -> Self {
        let a = grid.pixel_area();
        let n = grid.len();
        Self {
            domain,
            beta,
            level: 0,
            grid,
            pixel_mass: density.iter().map(|d| d * a).collect(),
            field: vec![0.0; n],
            variance: vec![0.0; n],
        }
    }

    pub fn lebesgue(domain: ContinuumDomain, grid: PixelGrid, beta: f64) -> Self {
        Self::with_density(domain, grid, beta, &vec![1.0; grid.len()])
    }

    pub fn total(&self) -> f64 {
        self.pixel_mass.iter().sum()
    }

    pub fn mass_in(&self, cell: &Rect) -> f64 {
        let g = &self.grid;
        let mut s = 0.0;
        for i in 0..g.nx {
            for j in 0..g.ny {
                if cell.contains(g.center(i, j)) {
                    s += self.pixel_mass[i * g.ny + j];
                }
            }
        }
        s
    }

    /// In-place form of [`chaos_step`].
    pub fn apply_step(&mut self, incr: &[f64], incr_var: &[f64]) -> Result<()> {
        if incr.len() != self.pixel_mass.len() || incr_var.len() != self.pixel_mass.len() {
            return Err(Error::Contract("increment length differs from the pixel grid".into()));
        }
        if let Some(v) = incr_var.iter().find(|v| !(**v >= 0.0)) {
            return Err(Error::Contract(format!("negative variance increment {v}")));
        }
        let b = self.beta;
        for k in 0..incr.len() {
            self.pixel_mass[k] *= (b * incr[k] - 0.5 * b * b * incr_var[k]).exp();
            self.field[k] += incr[k];
            self.variance[k] += incr_var[k];
        }
        self.level += 1;
        Ok(())
    }

    /// CSV with header `x1,x2,mass`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x1,x2,mass")?;
        for (c, m) in self.grid.centers().iter().zip(&self.pixel_mass) {
            writeln!(w, "{},{},{}", c[0], c[1], m)?;
        }
        Ok(())
    }
}

/// Multiplies each pixel mass by `exp(beta incr - beta^2 incr_var / 2)`.
pub fn chaos_step(measure: &ChaosMeasure, incr: &[f64], incr_var: &[f64]) -> Result<ChaosMeasure> {
    let mut m = measure.clone();
    m.apply_step(incr, incr_var)?;
    Ok(m)
}

/// Green function of the killed walk on an `n x n` box, one sine sum in the
/// first coordinate against the closed-form resolvent in the second.
struct SquareGreen {
    n: usize,
    /// `sin(pi j x / (n+1))`, row `j - 1`, column `x` in `0..=n+1`.
    sin: Vec<f64>,
    /// `exp(-mu_j t)`, row `j - 1`, column `t` in `0..=2(n+1)`.
    exp: Vec<f64>,
    /// `8 / ((n+1)(1 - e^{-2 mu})(1 - e^{-2 mu (n+1)}))`.
    scale: Vec<f64>,
}

impl SquareGreen {
    fn new(n: usize) -> Self {
        let m = n + 1;
        let w = 2 * m + 1;
        let mut sin = vec![0.0; n * (m + 1)];
        let mut exp = vec![0.0; n * w];
        let mut scale = vec![0.0; n];
        for j in 1..=n {
            for x in 0..=m {
                let r = (j * x) % (2 * m);
                sin[(j - 1) * (m + 1) + x] =
                    if r % m == 0 { 0.0 } else { (std::f64::consts::PI * r as f64 / m as f64).sin() };
            }
            let theta = std::f64::consts::PI * j as f64 / m as f64;
            let mu = (2.0 - theta.cos()).acosh();
            for t in 0..w {
                exp[(j - 1) * w + t] = (-mu * t as f64).exp();
            }
            let e = &exp[(j - 1) * w..j * w];
            scale[j - 1] = 8.0 / (m as f64 * (1.0 - e[2]) * (1.0 - e[2 * m]));
        }
        Self { n, sin, exp, scale }
    }

    fn entry(&self, x: (usize, usize), y: (usize, usize)) -> f64 {
        let m = self.n + 1;
        let w = 2 * m + 1;
        let (a, b) = if x.1 <= y.1 { (x.1, y.1) } else { (y.1, x.1) };
        let mut s = 0.0;
        for j in 0..self.n {
            let sx = self.sin[j * (m + 1) + x.0];
            if sx == 0.0 {
                continue;
            }
            let sy = self.sin[j * (m + 1) + y.0];
            if sy == 0.0 {
                continue;
            }
            let e = &self.exp[j * w..(j + 1) * w];
            s += sx * sy * self.scale[j] * e[b - a + 1] * (1.0 - e[2 * a]) * (1.0 - e[2 * (m - b)]);
        }
        s
    }
}

/// Per-level data shared by all parent cells of that level.
#[derive(Debug, Clone)]
struct LevelPlan {
    /// Pixels per side of a parent cell.
    p: usize,
    /// Cross size `4p - 3`.
    c: usize,
    /// Packed row-major lower Cholesky factor of the cross covariance.
    chol: Vec<f64>,
    dst: Dst1,
    /// `rho_k(d)` for odd `d`, row `(d - 1)/2`, column `k - 1`.
    rho: Vec<f64>,
    /// Binding-field variance at the `p x p` pixel centers of a parent.
    var: Vec<f64>,
}

impl LevelPlan {
    fn new(p: usize) -> Result<Self> {
        let n = 2 * p - 1;
        let g = SquareGreen::new(n);
        let mut sites = Vec::with_capacity(4 * p - 3);
        for t in 1..=n {
            sites.push((p, t));
        }
        for t in (1..=n).filter(|t| *t != p) {
            sites.push((t, p));
        }
        let c = sites.len();
        let mut cov = DMatrix::zeros(c, c);
        for i in 0..c {
            for j in 0..=i {
                let v = g.entry(sites[i], sites[j]);
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
            cov[(i, i)] += JITTER;
        }
        let l = cov.cholesky().ok_or(Error::NotPositiveDefinite(c))?.unpack();
        let mut chol = Vec::with_capacity(c * (c + 1) / 2);
        for i in 0..c {
            for j in 0..=i {
                chol.push(l[(i, j)]);
            }
        }

        let ns = p - 1;
        let mut rho = vec![0.0; (p / 2) * ns];
        for k in 1..=ns {
            let theta = std::f64::consts::PI * k as f64 / p as f64;
            let mu = (2.0 - theta.cos()).acosh();
            let tail = (-2.0 * mu * p as f64).exp();
            for (di, d) in (1..p).step_by(2).enumerate() {
                let d = d as f64;
                rho[di * ns + k - 1] = (-mu * d).exp() * (1.0 - (-2.0 * mu * (p as f64 - d)).exp()) / (1.0 - tail);
            }
        }

        let pd = BoxSpectrum::new(n, n).green_diagonal();
        let cd = BoxSpectrum::new(ns, ns).green_diagonal();
        let local = |x: usize| if x < p { x } else { x - p };
        let mut var = vec![0.0; p * p];
        for a in 0..p {
            for b in 0..p {
                let (x1, x2) = (2 * a + 1, 2 * b + 1);
                var[a * p + b] = pd[(x1 - 1) * n + (x2 - 1)] - cd[(local(x1) - 1) * ns + (local(x2) - 1)];
            }
        }
        Ok(Self { p, c, chol, dst: Dst1::new(ns), rho, var })
    }

    /// Adds one binding-field sample of the parent cell with lower-left
    /// pixel `(oi, oj)` into `out` (grid of side `side`).
    fn sample_cell(&self, rng: &mut crate::rng::Rng, work: &mut Work, out: &mut [f64], side: usize, oi: usize, oj: usize) {
        let (p, c) = (self.p, self.c);
        let n = 2 * p - 1;
        let ns = p - 1;
        fill_normal(rng, &mut work.xi[..c]);
        for i in 0..c {
            let row = &self.chol[i * (i + 1) / 2..i * (i + 1) / 2 + i + 1];
            work.z[i] = dot(row, &work.xi[..=i]);
        }
        let z = &work.z;
        let vert = |t: usize| z[t - 1];
        let horiz = |t: usize| match t.cmp(&p) {
            std::cmp::Ordering::Less => z[n + t - 1],
            std::cmp::Ordering::Equal => z[p - 1],
            std::cmp::Ordering::Greater => z[n + t - 2],
        };
        let norm = 2.0 / p as f64;
        for qa in 0..2 {
            for qb in 0..2 {
                // coefficients of the two cross sides bounding this child
                for t in 1..=ns {
                    work.fv[t - 1] = vert(qb * p + t);
                    work.fh[t - 1] = horiz(qa * p + t);
                }
                self.dst.apply_pair_with(&mut work.fv[..ns], &mut work.fh[..ns], &mut work.buf, &mut work.scratch);
                for (di, d) in (1..p).step_by(2).enumerate() {
                    let r = &self.rho[di * ns..(di + 1) * ns];
                    for k in 0..ns {
                        work.gv[k] = norm * work.fv[k] * r[k];
                        work.gh[k] = norm * work.fh[k] * r[k];
                    }
                    self.dst.apply_pair_with(&mut work.gv[..ns], &mut work.gh[..ns], &mut work.buf, &mut work.scratch);
                    // vertical side: distance d in x1, along-side t in x2
                    let x1 = if qa == 0 { p - d } else { p + d };
                    let a = (x1 - 1) / 2;
                    for t in (1..p).step_by(2) {
                        let b = (qb * p + t - 1) / 2;
                        out[(oi + a) * side + oj + b] += work.gv[t - 1];
                    }
                    // horizontal side: distance d in x2, along-side t in x1
                    let x2 = if qb == 0 { p - d } else { p + d };
                    let b = (x2 - 1) / 2;
                    for t in (1..p).step_by(2) {
                        let a = (qa * p + t - 1) / 2;
                        out[(oi + a) * side + oj + b] += work.gh[t - 1];
                    }
                }
            }
        }
    }
}

struct Work {
    xi: Vec<f64>,
    z: Vec<f64>,
    fv: Vec<f64>,
    fh: Vec<f64>,
    gv: Vec<f64>,
    gh: Vec<f64>,
    buf: Vec<Complex<f64>>,
    scratch: Vec<Complex<f64>>,
}

impl Work {
    fn for_plan(plan: &LevelPlan) -> Self {
        let (buf, scratch) = plan.dst.buffers();
        let ns = plan.p - 1;
        Self {
            xi: vec![0.0; plan.c],
            z: vec![0.0; plan.c],
            fv: vec![0.0; ns],
            fh: vec![0.0; ns],
            gv: vec![0.0; ns],
            gh: vec![0.0; ns],
            buf,
            scratch,
        }
    }
}

/// Independent per-level binding fields `Phi^{S_{j-1}, S_j}` at the pixel
/// centers of a dyadic square, `j = 1..depth`.
#[derive(Debug, Clone, PartialEq)]
pub struct DyadicHierarchy {
    pub root: DyadicSquare,
    pub depth: u32,
    pub grid: PixelGrid,
    pub fields: Vec<Vec<f64>>,
}

/// Precomputed plans for the dyadic martingale `Y_m` on one square.
#[derive(Debug, Clone)]
pub struct MartingaleRunner {
    root: DyadicSquare,
    lambda: f64,
    side: usize,
    grid: PixelGrid,
    psi: PsiWeight,
    levels: Vec<LevelPlan>,
    /// Per-level variance on the whole grid.
    var: Vec<Vec<f64>>,
}

impl MartingaleRunner {
    /// `side` pixels per side of `root` (a power of two); `depth <= log2 side`.
    pub fn new(root: DyadicSquare, lambda: f64, side: usize, depth: u32) -> Result<Self> {
        if depth < 1 {
            return Err(Error::Precondition("dyadic depth must be >= 1".into()));
        }
        if !side.is_power_of_two() || side < 2 {
            return Err(Error::Precondition(format!("grid side must be a power of two >= 2, got {side}")));
        }
        if depth > side.trailing_zeros() {
            return Err(Error::Precondition(format!("depth {depth} needs at least 2^{depth} pixels per side")));
        }
        if !(lambda >= 0.0) {
            return Err(Error::Precondition(format!("lambda must be >= 0, got {lambda}")));
        }
        let dom = root.to_domain();
        let grid = PixelGrid::over(dom.as_rect().unwrap(), side, side);
        let psi = psi(&dom, lambda, &grid)?;
        let mut levels = vec![];
        let mut var = vec![];
        for j in 1..=depth {
            let p = side >> (j - 1);
            let plan = LevelPlan::new(p)?;
            let mut v = vec![0.0; side * side];
            for i in 0..side {
                for k in 0..side {
                    v[i * side + k] = plan.var[(i % p) * p + k % p];
                }
            }
            var.push(v);
            levels.push(plan);
        }
        Ok(Self { root, lambda, side, grid, psi, levels, var })
    }

    pub fn depth(&self) -> u32 {
        self.levels.len() as u32
    }

    pub fn grid(&self) -> &PixelGrid {
        &self.grid
    }

    pub fn psi(&self) -> &PsiWeight {
        &self.psi
    }

    /// `alpha lambda`.
    pub fn beta(&self) -> f64 {
        ALPHA * self.lambda
    }

    /// `int_S psi`, the mean total mass at every level.
    pub fn expected_total(&self) -> f64 {
        self.psi.integral()
    }

    /// Variance of the level-`j` binding field at each pixel.
    pub fn level_variance(&self, j: u32) -> &[f64] {
        &self.var[j as usize - 1]
    }

    /// One sample of the level-`j` binding field (`j >= 1`).
    pub fn level_field(&self, j: u32, rng: &mut crate::rng::Rng) -> Vec<f64> {
        let plan = &self.levels[j as usize - 1];
        let mut work = Work::for_plan(plan);
        let mut out = vec![0.0; self.side * self.side];
        let cells = self.side / plan.p;
        for ci in 0..cells {
            for cj in 0..cells {
                plan.sample_cell(rng, &mut work, &mut out, self.side, ci * plan.p, cj * plan.p);
            }
        }
        out
    }

    pub fn sample_hierarchy(&self, rng: &mut crate::rng::Rng) -> DyadicHierarchy {
        let fields = (1..=self.depth()).map(|j| self.level_field(j, rng)).collect();
        DyadicHierarchy { root: self.root, depth: self.depth(), grid: self.grid, fields }
    }

    /// `Y_0 = psi dx`.
    pub fn initial(&self) -> ChaosMeasure {
        ChaosMeasure::with_density(self.root.to_domain(), self.grid, self.beta(), &self.psi.values)
    }

    /// Multiplies in the next level's binding field.
    pub fn advance(&self, y: &ChaosMeasure, rng: &mut crate::rng::Rng) -> Result<ChaosMeasure> {
        let j = y.level + 1;
        if j > self.depth() {
            return Err(Error::Precondition(format!("measure already at depth {}", y.level)));
        }
        let phi = self.level_field(j, rng);
        chaos_step(y, &phi, self.level_variance(j))
    }

    /// `Y_1, ..., Y_m`.
    pub fn run(&self, rng: &mut crate::rng::Rng) -> Result<Vec<ChaosMeasure>> {
        let mut out = Vec::with_capacity(self.levels.len());
        let mut y = self.initial();
        for _ in 0..self.depth() {
            y = self.advance(&y, rng)?;
            out.push(y.clone());
        }
        Ok(out)
    }

    /// Total masses `Y_1(S), ..., Y_m(S)` without keeping the measures.
    pub fn run_totals(&self, rng: &mut crate::rng::Rng) -> Vec<f64> {
        let a = self.grid.pixel_area();
        let b = self.beta();
        let mut dens = self.psi.values.clone();
        let mut totals = Vec::with_capacity(self.levels.len());
        for j in 1..=self.depth() {
            let phi = self.level_field(j, rng);
            let v = self.level_variance(j);
            for k in 0..dens.len() {
                dens[k] *= (b * phi[k] - 0.5 * b * b * v[k]).exp();
            }
            totals.push(dens.iter().sum::<f64>() * a);
        }
        totals
    }
}

/// `Y_1..Y_m` on `s` with the default grid; the normalizing constant is 1.
pub fn dyadic_martingale(s: &DyadicSquare, lambda: f64, m: u32, rng: &mut crate::rng::Rng) -> Result<Vec<ChaosMeasure>> {
    MartingaleRunner::new(*s, lambda, DEFAULT_GRID, m)?.run(rng)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScalingReport {
    pub r: f64,
    pub shift: [f64; 2],
    pub lambda: f64,
    pub pixel: f64,
    pub integral: f64,
    pub integral_mapped: f64,
    /// `r^{2 + 2 lambda^2}`.
    pub predicted_ratio: f64,
    pub ratio: f64,
    pub rel_err: f64,
}

fn psi_integral_at_pixel(d: &ContinuumDomain, lambda: f64, h: f64) -> Result<f64> {
    let bb = d.bbox();
    let nx = (bb.width() / h).round().max(1.0) as usize;
    let ny = (bb.height() / h).round().max(1.0) as usize;
    Ok(psi_masked(d, lambda, &PixelGrid::over(bb, nx, ny))?.integral())
}

/// Compares `int_{rD + t} psi^{rD + t}` with `r^{2 + 2 lambda^2} int_D psi^D`
/// by midpoint quadrature at a common absolute pixel size.
pub fn affine_check(d: &ContinuumDomain, lambda: f64, r: f64, shift: [f64; 2]) -> Result<ScalingReport> {
    if !(r > 0.0) {
        return Err(Error::Precondition(format!("scale must be positive, got {r}")));
    }
    d.validate()?;
    let bb = d.bbox();
    let h = r.min(1.0) * bb.width().max(bb.height()) / SCALING_PIXELS as f64;
    let mapped = d.affine(r, shift);
    let integral = psi_integral_at_pixel(d, lambda, h)?;
    let integral_mapped = psi_integral_at_pixel(&mapped, lambda, h)?;
    let predicted_ratio = r.powf(2.0 + 2.0 * lambda * lambda);
    let ratio = integral_mapped / integral;
    Ok(ScalingReport {
        r,
        shift,
        lambda,
        pixel: h,
        integral,
        integral_mapped,
        predicted_ratio,
        ratio,
        rel_err: (ratio / predicted_ratio - 1.0).abs(),
    })
}

pub fn scaling_check(d: &ContinuumDomain, lambda: f64, r: f64) -> Result<ScalingReport> {
    affine_check(d, lambda, r, [0.0, 0.0])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LqgReport {
    pub ks: KsResult,
    pub statistic: f64,
    pub pvalue: f64,
    pub mean_levelset: f64,
    pub mean_chaos: f64,
    pub n_levelset: usize,
    pub n_chaos: usize,
}

fn mean_normalized(v: &[f64], what: &str) -> Result<(f64, Vec<f64>)> {
    if v.is_empty() {
        return Err(Error::InsufficientData(format!("{what} sample is empty")));
    }
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if v.iter().all(|x| *x == v[0]) {
        return Err(Error::Statistics(format!("{what} sample is constant")));
    }
    if !(m > 0.0) {
        return Err(Error::Statistics(format!("{what} sample has nonpositive mean")));
    }
    Ok((m, v.iter().map(|x| x / m).collect()))
}

/// Two-sample KS between the mean-normalized level-set masses
/// `alpha lambda |Gamma_N(0)| / K_N` and chaos masses `Y_m`.
pub fn lqg_compare(levelset_masses: &[f64], chaos_masses: &[f64]) -> Result<LqgReport> {
    let (ml, a) = mean_normalized(levelset_masses, "level-set")?;
    let (mc, b) = mean_normalized(chaos_masses, "chaos")?;
    let ks = two_sample_ks(&a, &b)?;
    Ok(LqgReport {
        ks,
        statistic: ks.statistic,
        pvalue: ks.pvalue,
        mean_levelset: ml,
        mean_chaos: mc,
        n_levelset: a.len(),
        n_chaos: b.len(),
    })
}
