//! Discrete potential theory: Green functions, the potential kernel,
//! harmonic measure, harmonic extension and binding-field covariances.

use std::f64::consts::PI;
use std::io::Write;

use nalgebra::DMatrix;
use rustfft::num_complex::Complex64;

use crate::domain::{discretize, neighbors, ContinuumDomain, LatticeDomain, Site};
use crate::error::{Error, Result};
use crate::linalg::{BoxSpectrum, SkylineCholesky};
use crate::sampler::{Field, SeedTag};
use crate::G;

/// Factored killed-walk operator `I - P` of a lattice domain. Columns of its
/// inverse are Green function columns; the factor also drives sampling.
#[derive(Debug, Clone)]
pub struct GreenOperator {
    domain: LatticeDomain,
    chol: SkylineCholesky,
}

pub fn green(domain: &LatticeDomain) -> Result<GreenOperator> {
    let chol = SkylineCholesky::factor(&domain.killed_walk_rows())?;
    Ok(GreenOperator { domain: domain.clone(), chol })
}

impl GreenOperator {
    pub fn domain(&self) -> &LatticeDomain {
        &self.domain
    }

    pub fn factor(&self) -> &SkylineCholesky {
        &self.chol
    }

    /// `G(., y)` for the site with index `y`.
    pub fn column(&self, y: usize) -> Vec<f64> {
        let mut e = vec![0.0; self.domain.len()];
        e[y] = 1.0;
        self.chol.solve(&mut e);
        e
    }

    pub fn entry(&self, x: usize, y: usize) -> f64 {
        self.column(y)[x]
    }

    /// `G(x, y)` for sites; 0 if either lies outside the domain.
    pub fn at(&self, x: Site, y: Site) -> f64 {
        match (self.domain.index_of(x), self.domain.index_of(y)) {
            (Some(i), Some(j)) => self.entry(i, j),
            _ => 0.0,
        }
    }

    /// `G b`.
    pub fn apply(&self, b: &[f64]) -> Vec<f64> {
        let mut v = b.to_vec();
        self.chol.solve(&mut v);
        v
    }

    /// Full matrix, row-major. Refuses domains above 4096 sites.
    pub fn dense(&self) -> Result<Vec<f64>> {
        let n = self.domain.len();
        if n > 4096 {
            return Err(Error::Resource(format!("dense Green matrix for {n} sites")));
        }
        let mut m = vec![0.0; n * n];
        for y in 0..n {
            let c = self.column(y);
            for x in 0..n {
                m[x * n + y] = c[x];
            }
        }
        Ok(m)
    }
}

/// Nodes and weights of `n`-point Gauss-Legendre quadrature on `[-1, 1]`.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut x = vec![0.0; n];
    let mut w = vec![0.0; n];
    for i in 0..n.div_ceil(2) {
        let mut z = (PI * (i as f64 + 0.75) / (n as f64 + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (mut p0, mut p1) = (1.0, z);
            for k in 2..=n {
                let p2 = ((2 * k - 1) as f64 * z * p1 - (k - 1) as f64 * p0) / k as f64;
                p0 = p1;
                p1 = p2;
            }
            let pn = if n == 1 { z } else { p1 };
            let pm = if n == 1 { 1.0 } else { p0 };
            dp = n as f64 * (z * pn - pm) / (z * z - 1.0);
            let dz = pn / dp;
            z -= dz;
            if dz.abs() < 1e-16 {
                break;
            }
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        let wi = 2.0 / ((1.0 - z * z) * dp * dp);
        w[i] = wi;
        w[n - 1 - i] = wi;
    }
    (x, w)
}

/// Quadrature for the one-dimensional integral representation
/// `a(x) = (2/pi) int_0^pi [1 - cos(x1 t) e^{-x2 L(t)}] / sinh L(t) dt`,
/// `cosh L = 2 - cos t`, `|x1| <= |x2|`, resolved for coordinates up to `r`.
#[derive(Debug, Clone)]
struct KernelQuadrature {
    theta: Vec<f64>,
    /// `(2/pi) w / sinh L`
    wt: Vec<f64>,
    ell: Vec<f64>,
}

impl KernelQuadrature {
    fn new(r: u32) -> Self {
        let (gx, gw) = gauss_legendre(16);
        let h = (1.0 / (r.max(1) as f64)).min(0.05);
        let mut edges = vec![0.0];
        let mut g: Vec<f64> = (0..60).map(|k| h * (-(k as f64)).exp2()).collect();
        g.reverse();
        edges.extend(g);
        let m = ((PI - h) / h).ceil() as usize;
        for k in 1..=m {
            edges.push(h + (PI - h) * k as f64 / m as f64);
        }
        let (mut theta, mut wt, mut ell) = (vec![], vec![], vec![]);
        for p in edges.windows(2) {
            let (a, b) = (p[0], p[1]);
            for (x, w) in gx.iter().zip(&gw) {
                let t = 0.5 * (b - a) * x + 0.5 * (a + b);
                let am1 = 2.0 * (0.5 * t).sin().powi(2);
                let s = (am1 * (am1 + 2.0)).sqrt();
                theta.push(t);
                wt.push(0.5 * (b - a) * w * (2.0 / PI) / s);
                ell.push((am1 + s).ln_1p());
            }
        }
        Self { theta, wt, ell }
    }

    fn eval(&self, x: Site) -> f64 {
        let (a, b) = (x[0].unsigned_abs(), x[1].unsigned_abs());
        let (x1, x2) = (a.min(b) as f64, a.max(b) as f64);
        let mut s = 0.0;
        for i in 0..self.theta.len() {
            let t = self.theta[i];
            let num = 2.0 * (0.5 * x1 * t).sin().powi(2) - (x1 * t).cos() * (-x2 * self.ell[i]).exp_m1();
            s += self.wt[i] * num;
        }
        s
    }
}

/// Potential kernel at a single lattice point.
pub fn potential_kernel_value(x: Site) -> f64 {
    let r = x[0].unsigned_abs().max(x[1].unsigned_abs()) as u32;
    KernelQuadrature::new(r).eval(x)
}

/// `a(x)` on the square `|x1|, |x2| <= radius`, plus the fitted constant of
/// `a(x) = g log|x| + c0 + O(|x|^-2)`.
#[derive(Debug, Clone)]
pub struct PotentialKernelTable {
    pub radius: u32,
    /// Quadrant values, index `|x1| * (radius+1) + |x2|`.
    values: Vec<f64>,
    /// Mean of `a(x) - g log|x|` over `50 <= |x| <= radius`, or over
    /// `radius/2 <= |x| <= radius` when the radius is below 50.
    pub c0_estimate: f64,
}

pub const MAX_KERNEL_RADIUS: u32 = 2000;

pub fn potential_kernel(radius: u32) -> Result<PotentialKernelTable> {
    if radius < 1 {
        return Err(Error::Precondition("potential kernel radius must be >= 1".into()));
    }
    if radius > MAX_KERNEL_RADIUS {
        return Err(Error::Resource(format!("kernel radius {radius} exceeds {MAX_KERNEL_RADIUS}")));
    }
    let q = KernelQuadrature::new(radius);
    let r = radius as usize;
    let nn = q.theta.len();
    // per-node tables in x1 and x2
    let mut sw = vec![0.0; r + 1];
    let mut cosx = vec![0.0; (r + 1) * nn];
    let mut ex = vec![0.0; (r + 1) * nn];
    for k in 0..=r {
        let kf = k as f64;
        let mut acc = 0.0;
        for i in 0..nn {
            let t = q.theta[i];
            acc += q.wt[i] * 2.0 * (0.5 * kf * t).sin().powi(2);
            cosx[k * nn + i] = (kf * t).cos();
            ex[k * nn + i] = q.wt[i] * (-kf * q.ell[i]).exp_m1();
        }
        sw[k] = acc;
    }
    let mut values = vec![0.0; (r + 1) * (r + 1)];
    for x2 in 0..=r {
        for x1 in 0..=x2 {
            let v = sw[x1] - crate::linalg::dot(&cosx[x1 * nn..(x1 + 1) * nn], &ex[x2 * nn..(x2 + 1) * nn]);
            values[x1 * (r + 1) + x2] = v;
            values[x2 * (r + 1) + x1] = v;
        }
    }
    values[0] = 0.0;
    let lo = if radius >= 100 { 50.0 } else { (radius as f64 / 2.0).max(1.0) };
    let (mut sum, mut cnt) = (0.0, 0usize);
    let ri = radius as i64;
    for a in -ri..=ri {
        for b in -ri..=ri {
            let d = ((a * a + b * b) as f64).sqrt();
            if d >= lo && d <= radius as f64 {
                sum += values[a.unsigned_abs() as usize * (r + 1) + b.unsigned_abs() as usize] - G * d.ln();
                cnt += 1;
            }
        }
    }
    Ok(PotentialKernelTable { radius, values, c0_estimate: sum / cnt as f64 })
}

impl PotentialKernelTable {
    pub fn get(&self, x: Site) -> Option<f64> {
        let (a, b) = (x[0].unsigned_abs(), x[1].unsigned_abs());
        let r = self.radius as u64;
        (a <= r && b <= r).then(|| self.values[a as usize * (r as usize + 1) + b as usize])
    }

    /// Like [`get`](Self::get), computing off-table points directly.
    pub fn value(&self, x: Site) -> f64 {
        self.get(x).unwrap_or_else(|| potential_kernel_value(x))
    }

    /// Largest `|a(x) - mean of a over the neighbors of x|` over tabulated
    /// `x != 0` whose neighbors are tabulated.
    pub fn max_harmonic_residual(&self) -> f64 {
        let r = self.radius as i64 - 1;
        let mut worst: f64 = 0.0;
        for a in 0..=r {
            for b in 0..=r {
                if a == 0 && b == 0 {
                    continue;
                }
                let m: f64 = neighbors([a, b]).iter().map(|t| self.get(*t).unwrap()).sum::<f64>() / 4.0;
                worst = worst.max((m - self.get([a, b]).unwrap()).abs());
            }
        }
        worst
    }

    /// CSV with header `x1,x2,a_value` over the full square.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "x1,x2,a_value")?;
        let r = self.radius as i64;
        for a in -r..=r {
            for b in -r..=r {
                writeln!(w, "{a},{b},{}", self.get([a, b]).unwrap())?;
            }
        }
        Ok(())
    }
}

/// Exit distribution of simple random walk from `source` over the outer
/// boundary of the domain.
#[derive(Debug, Clone)]
pub struct HarmonicMeasureRow {
    pub source: Site,
    pub points: Vec<Site>,
    pub weights: Vec<f64>,
}

impl HarmonicMeasureRow {
    pub fn total(&self) -> f64 {
        self.weights.iter().sum()
    }

    pub fn integrate(&self, f: impl Fn(Site) -> f64) -> f64 {
        self.points.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }
}

pub fn harmonic_measure(domain: &LatticeDomain, x: Site) -> Result<HarmonicMeasureRow> {
    let g = green(domain)?;
    harmonic_measure_with(&g, x)
}

/// `H(x, z) = (1/4) sum_{y in D, y ~ z} G(x, y)`.
pub fn harmonic_measure_with(g: &GreenOperator, x: Site) -> Result<HarmonicMeasureRow> {
    let d = g.domain();
    let ix = d.index_of(x).ok_or_else(|| Error::Domain(format!("site {x:?} not in domain")))?;
    let col = g.column(ix);
    let points = d.boundary().to_vec();
    let weights = points
        .iter()
        .map(|z| 0.25 * neighbors(*z).iter().filter_map(|y| d.index_of(*y)).map(|j| col[j]).sum::<f64>())
        .collect();
    Ok(HarmonicMeasureRow { source: x, points, weights })
}

/// Dirichlet solver on a sub-domain: boundary data in, harmonic values out.
#[derive(Debug, Clone)]
pub struct HarmonicExtender {
    sub: LatticeDomain,
    solver: Solver,
}

#[derive(Debug, Clone)]
enum Solver {
    Box(BoxSpectrum),
    Envelope(SkylineCholesky),
}

impl HarmonicExtender {
    pub fn new(sub: &LatticeDomain) -> Result<Self> {
        let solver = match sub.as_box() {
            Some(b) => Solver::Box(BoxSpectrum::new(b.w, b.h)),
            None => Solver::Envelope(SkylineCholesky::factor(&sub.killed_walk_rows())?),
        };
        Ok(Self { sub: sub.clone(), solver })
    }

    pub fn sub(&self) -> &LatticeDomain {
        &self.sub
    }

    /// Harmonic function on `sub` agreeing with `outer` on `sub`'s boundary.
    pub fn extend(&self, outer: impl Fn(Site) -> f64) -> Vec<f64> {
        let mut b: Vec<f64> = self
            .sub
            .sites()
            .iter()
            .map(|s| {
                0.25 * neighbors(*s).iter().filter(|t| !self.sub.contains_site(**t)).map(|t| outer(*t)).sum::<f64>()
            })
            .collect();
        self.solve(&mut b);
        b
    }

    /// Solve `(I - P) u = b` on `sub`.
    pub fn solve(&self, b: &mut [f64]) {
        match &self.solver {
            Solver::Box(spec) => spec.solve(b),
            Solver::Envelope(c) => c.solve(b),
        }
    }
}

/// Harmonic extension into `sub` of values given on `domain \ sub` and on
/// the boundary of `domain`. Returns a field on `domain`.
pub fn harmonic_extension(
    domain: &LatticeDomain,
    sub: &LatticeDomain,
    values_on_complement: impl Fn(Site) -> f64,
) -> Result<Field> {
    if !sub.is_subset_of(domain) {
        return Err(Error::Domain("sub-domain not contained in domain".into()));
    }
    let ext = HarmonicExtender::new(sub)?.extend(&values_on_complement);
    let values = domain
        .sites()
        .iter()
        .map(|s| match sub.index_of(*s) {
            Some(i) => ext[i],
            None => values_on_complement(*s),
        })
        .collect();
    Ok(Field::new(domain.clone(), values, SeedTag::deterministic("harmonic_extension")))
}

/// How `int Pi^D(x, dz) log|y - z|` is evaluated.
#[derive(Debug, Clone, PartialEq, Default)]
pub enum LogIntegralMethod {
    /// Closed-form Green functions of discs and rectangles.
    #[default]
    ClosedForm,
    /// Discrete harmonic measure at the given doubling resolutions,
    /// combined by Richardson extrapolation in `1/N`.
    DiscreteLimit { resolutions: Vec<u32> },
}

impl LogIntegralMethod {
    pub fn discrete_default() -> Self {
        LogIntegralMethod::DiscreteLimit { resolutions: vec![64, 128, 256] }
    }
}

/// `int Pi^D(x, dz) log|y - z|` by closed forms: for `y` in the component
/// of `x` this is `G_D(x, y) + log|x - y|`, otherwise `log|x - y|`.
pub fn log_integral(d: &ContinuumDomain, x: [f64; 2], y: [f64; 2]) -> Result<f64> {
    let comps = d.components();
    let cx = comps
        .iter()
        .find(|c| c.contains(x))
        .ok_or_else(|| Error::Domain(format!("point {x:?} outside domain")))?;
    if !cx.contains(y) {
        return Ok((x[0] - y[0]).hypot(x[1] - y[1]).ln());
    }
    Ok(match **cx {
        ContinuumDomain::Disc { cx: c0, cy: c1, r } => {
            let z = Complex64::new(x[0] - c0, x[1] - c1);
            let w = Complex64::new(y[0] - c0, y[1] - c1);
            ((r * r) - z.conj() * w).norm().ln() - r.ln()
        }
        ref c => RectGreen::new(c.as_rect().unwrap()).regular_part(x, y),
    })
}

/// `log` of the conformal radius of `d` at `x`.
pub fn log_conformal_radius(d: &ContinuumDomain, x: [f64; 2]) -> Result<f64> {
    log_integral(d, x, x)
}

/// Rectangle Green function through Jacobi's theta function, with the
/// short side on the real axis so the nome is at most `e^{-pi}`.
struct RectGreen {
    x0: f64,
    y0: f64,
    a: f64,
    swap: bool,
    t: f64,
    lnq: f64,
}

impl RectGreen {
    fn new(r: crate::domain::Rect) -> Self {
        let (w, h) = (r.width(), r.height());
        let swap = h < w;
        let (a, b) = if swap { (h, w) } else { (w, h) };
        let t = PI * b / a;
        Self { x0: r.x0, y0: r.y0, a, swap, t, lnq: -t }
    }

    fn map(&self, p: [f64; 2]) -> Complex64 {
        let (u, v) = (p[0] - self.x0, p[1] - self.y0);
        if self.swap {
            Complex64::new(v, u)
        } else {
            Complex64::new(u, v)
        }
    }

    /// Series terms `(-1)^n q^{(n+1/2)^2}` with `(2n+1)`, truncated once
    /// negligible against the leading term for `|Im u| <= t/2`.
    fn terms(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        (0..)
            .map(move |n: i32| {
                let e = (n as f64 + 0.5).powi(2) * self.lnq;
                let sign = if n % 2 == 0 { 1.0 } else { -1.0 };
                (n, sign * e.exp(), (2 * n + 1) as f64)
            })
            .take_while(move |&(n, _, _)| n < 2 || ((n as f64).powi(2) - 0.25) * self.t < 45.0 + 0.25 * self.t)
            .map(|(_, c, k)| (c, k))
    }

    fn ln_abs_theta1(&self, mut u: Complex64) -> f64 {
        let mut shift = 0.0;
        while u.im > 0.5 * self.t {
            u.im -= self.t;
            shift += -self.lnq + 2.0 * u.im;
        }
        while u.im < -0.5 * self.t {
            shift -= -self.lnq + 2.0 * u.im;
            u.im += self.t;
        }
        let s: Complex64 = self.terms().map(|(c, k)| 2.0 * c * (u * k).sin()).sum();
        s.norm().ln() + shift
    }

    /// `ln |theta1(u) / u|`, regular at `u = 0`.
    fn ln_abs_theta1_over_u(&self, u: Complex64) -> f64 {
        let s: Complex64 = self
            .terms()
            .map(|(c, k)| {
                let w = u * k;
                let sinc = if w.norm() < 1e-4 {
                    Complex64::new(1.0, 0.0) - w * w / 6.0 + w * w * w * w / 120.0
                } else {
                    w.sin() / w
                };
                2.0 * c * k * sinc
            })
            .sum();
        s.norm().ln()
    }

    fn regular_part(&self, x: [f64; 2], y: [f64; 2]) -> f64 {
        let z = self.map(x);
        let w = self.map(y);
        let f = PI / (2.0 * self.a);
        -self.ln_abs_theta1_over_u((z - w) * f) + (2.0 * self.a / PI).ln() - self.ln_abs_theta1((z + w) * f)
            + self.ln_abs_theta1((z - w.conj()) * f)
            + self.ln_abs_theta1((z + w.conj()) * f)
    }
}

/// Continuum harmonic measure from one point as a signed quadrature rule:
/// Richardson combination of discrete exit distributions.
#[derive(Debug, Clone)]
pub struct ContinuumHarmonicMeasure {
    pub nodes: Vec<[f64; 2]>,
    pub weights: Vec<f64>,
}

impl ContinuumHarmonicMeasure {
    pub fn integrate(&self, f: impl Fn([f64; 2]) -> f64) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(z, w)| w * f(*z)).sum()
    }
}

/// Green operators of `D_N` for a doubling sequence of resolutions, reused
/// across source points.
#[derive(Debug, Clone)]
pub struct DiscreteLimit {
    levels: Vec<(u32, GreenOperator)>,
    coeffs: Vec<f64>,
}

impl DiscreteLimit {
    pub fn new(d: &ContinuumDomain, resolutions: &[u32]) -> Result<Self> {
        if resolutions.is_empty() || resolutions.len() > 3 {
            return Err(Error::Precondition("one to three resolutions expected".into()));
        }
        for w in resolutions.windows(2) {
            if w[1] != 2 * w[0] {
                return Err(Error::Precondition("resolutions must double".into()));
            }
        }
        let coeffs = match resolutions.len() {
            1 => vec![1.0],
            2 => vec![-1.0, 2.0],
            _ => vec![1.0 / 3.0, -2.0, 8.0 / 3.0],
        };
        let levels = resolutions
            .iter()
            .map(|&n| Ok((n, green(&discretize(d, n)?)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { levels, coeffs })
    }

    pub fn measure_at(&self, x: [f64; 2]) -> Result<ContinuumHarmonicMeasure> {
        let mut nodes = vec![];
        let mut weights = vec![];
        for ((n, g), c) in self.levels.iter().zip(&self.coeffs) {
            let nf = *n as f64;
            let s = [(x[0] * nf).floor() as i64, (x[1] * nf).floor() as i64];
            let row = harmonic_measure_with(g, s)?;
            for (z, w) in row.points.iter().zip(&row.weights) {
                nodes.push([z[0] as f64 / nf, z[1] as f64 / nf]);
                weights.push(c * w);
            }
        }
        Ok(ContinuumHarmonicMeasure { nodes, weights })
    }
}

/// `C(x, y) = g [int Pi^D(x,dz) log|y-z| - int Pi^Dt(x,dz) log|y-z|]`.
pub fn binding_covariance(d: &ContinuumDomain, dt: &ContinuumDomain, points: &[[f64; 2]]) -> Result<DMatrix<f64>> {
    binding_covariance_with(d, dt, points, &LogIntegralMethod::ClosedForm)
}

pub fn binding_covariance_with(
    d: &ContinuumDomain,
    dt: &ContinuumDomain,
    points: &[[f64; 2]],
    method: &LogIntegralMethod,
) -> Result<DMatrix<f64>> {
    if !dt.is_subset_of(d) {
        return Err(Error::Domain("inner domain not contained in outer domain".into()));
    }
    if let Some(p) = points.iter().find(|p| !dt.contains(**p)) {
        return Err(Error::Domain(format!("point {p:?} outside inner domain")));
    }
    let n = points.len();
    let mut c = DMatrix::zeros(n, n);
    if d == dt {
        return Ok(c);
    }
    match method {
        LogIntegralMethod::ClosedForm => {
            for i in 0..n {
                for j in i..n {
                    let v = G * (log_integral(d, points[i], points[j])? - log_integral(dt, points[i], points[j])?);
                    c[(i, j)] = v;
                    c[(j, i)] = v;
                }
            }
        }
        LogIntegralMethod::DiscreteLimit { resolutions } => {
            let ld = DiscreteLimit::new(d, resolutions)?;
            let lt = DiscreteLimit::new(dt, resolutions)?;
            for i in 0..n {
                let md = ld.measure_at(points[i])?;
                let mt = lt.measure_at(points[i])?;
                for j in 0..n {
                    let y = points[j];
                    let f = |z: [f64; 2]| (y[0] - z[0]).hypot(y[1] - z[1]).ln();
                    c[(i, j)] = G * (md.integrate(f) - mt.integrate(f));
                }
            }
            c = (&c + c.transpose()) * 0.5;
        }
    }
    Ok(c)
}
