//! Continuum domains, their lattice approximations, dyadic squares and
//! pixel grids.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Integer lattice point `(x1, x2)`.
pub type Site = [i64; 2];

/// Bounded open planar domain: squares, rectangles, discs and finite
/// disjoint unions of these.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "DomainSpec", into = "DomainSpec")]
pub enum ContinuumDomain {
    /// `(x0, x0+side) x (y0, y0+side)`.
    Square { x0: f64, y0: f64, side: f64 },
    /// `(x0, x1) x (y0, y1)`.
    Rectangle { x0: f64, y0: f64, x1: f64, y1: f64 },
    /// Open disc of radius `r` about `(cx, cy)`.
    Disc { cx: f64, cy: f64, r: f64 },
    Union(Vec<ContinuumDomain>),
}

/// JSON form `{"kind": "...", "params": [...], "components": [...]}`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DomainSpec {
    pub kind: String,
    #[serde(default)]
    pub params: Vec<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub components: Vec<DomainSpec>,
}

impl TryFrom<DomainSpec> for ContinuumDomain {
    type Error = Error;

    fn try_from(s: DomainSpec) -> Result<Self> {
        let need = |k: usize| -> Result<()> {
            if s.params.len() != k {
                return Err(Error::InvalidDomain(format!("{} expects {k} params, got {}", s.kind, s.params.len())));
            }
            Ok(())
        };
        let p = &s.params;
        let d = match s.kind.as_str() {
            "square" => {
                need(3)?;
                ContinuumDomain::Square { x0: p[0], y0: p[1], side: p[2] }
            }
            "rectangle" => {
                need(4)?;
                ContinuumDomain::Rectangle { x0: p[0], y0: p[1], x1: p[2], y1: p[3] }
            }
            "disc" => {
                need(3)?;
                ContinuumDomain::Disc { cx: p[0], cy: p[1], r: p[2] }
            }
            "union" => ContinuumDomain::Union(
                s.components.into_iter().map(ContinuumDomain::try_from).collect::<Result<Vec<_>>>()?,
            ),
            k => return Err(Error::InvalidDomain(format!("unknown kind {k:?}"))),
        };
        d.validate()?;
        Ok(d)
    }
}

impl From<ContinuumDomain> for DomainSpec {
    fn from(d: ContinuumDomain) -> Self {
        match d {
            ContinuumDomain::Square { x0, y0, side } => DomainSpec { kind: "square".into(), params: vec![x0, y0, side], components: vec![] },
            ContinuumDomain::Rectangle { x0, y0, x1, y1 } => {
                DomainSpec { kind: "rectangle".into(), params: vec![x0, y0, x1, y1], components: vec![] }
            }
            ContinuumDomain::Disc { cx, cy, r } => DomainSpec { kind: "disc".into(), params: vec![cx, cy, r], components: vec![] },
            ContinuumDomain::Union(c) => {
                DomainSpec { kind: "union".into(), params: vec![], components: c.into_iter().map(Into::into).collect() }
            }
        }
    }
}

/// Axis-aligned box `[x0, x1] x [y0, y1]` in continuum units.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rect {
    pub x0: f64,
    pub y0: f64,
    pub x1: f64,
    pub y1: f64,
}

impl Rect {
    pub fn width(&self) -> f64 {
        self.x1 - self.x0
    }
    pub fn height(&self) -> f64 {
        self.y1 - self.y0
    }
    pub fn contains(&self, p: [f64; 2]) -> bool {
        p[0] >= self.x0 && p[0] < self.x1 && p[1] >= self.y0 && p[1] < self.y1
    }
}

impl ContinuumDomain {
    pub fn unit_square() -> Self {
        ContinuumDomain::Square { x0: 0.0, y0: 0.0, side: 1.0 }
    }

    pub fn unit_disc() -> Self {
        ContinuumDomain::Disc { cx: 0.0, cy: 0.0, r: 1.0 }
    }

    pub fn kind(&self) -> &'static str {
        match self {
            ContinuumDomain::Square { .. } => "square",
            ContinuumDomain::Rectangle { .. } => "rectangle",
            ContinuumDomain::Disc { .. } => "disc",
            ContinuumDomain::Union(_) => "union",
        }
    }

    /// Rectangle view of squares and rectangles.
    pub fn as_rect(&self) -> Option<Rect> {
        match *self {
            ContinuumDomain::Square { x0, y0, side } => Some(Rect { x0, y0, x1: x0 + side, y1: y0 + side }),
            ContinuumDomain::Rectangle { x0, y0, x1, y1 } => Some(Rect { x0, y0, x1, y1 }),
            _ => None,
        }
    }

    /// Connected pieces, with nested unions flattened.
    pub fn components(&self) -> Vec<&ContinuumDomain> {
        match self {
            ContinuumDomain::Union(c) => c.iter().flat_map(|d| d.components()).collect(),
            d => vec![d],
        }
    }

    pub fn validate(&self) -> Result<()> {
        let finite = |v: &[f64]| v.iter().all(|x| x.is_finite());
        match *self {
            ContinuumDomain::Square { x0, y0, side } => {
                if !finite(&[x0, y0, side]) || side <= 0.0 {
                    return Err(Error::InvalidDomain("square needs finite corner and side > 0".into()));
                }
            }
            ContinuumDomain::Rectangle { x0, y0, x1, y1 } => {
                if !finite(&[x0, y0, x1, y1]) || x1 <= x0 || y1 <= y0 {
                    return Err(Error::InvalidDomain("rectangle needs x0 < x1 and y0 < y1".into()));
                }
            }
            ContinuumDomain::Disc { cx, cy, r } => {
                if !finite(&[cx, cy, r]) || r <= 0.0 {
                    return Err(Error::InvalidDomain("disc needs radius > 0".into()));
                }
            }
            ContinuumDomain::Union(ref c) => {
                if c.is_empty() {
                    return Err(Error::InvalidDomain("empty union".into()));
                }
                for d in c {
                    d.validate()?;
                }
                let comps = self.components();
                for i in 0..comps.len() {
                    for j in i + 1..comps.len() {
                        if overlap(comps[i], comps[j]) {
                            return Err(Error::InvalidDomain(format!("union components {i} and {j} overlap")));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    pub fn contains(&self, p: [f64; 2]) -> bool {
        self.depth(p) > 0.0
    }

    /// `d_inf(p, D^c)`: sup-norm distance to the complement, 0 outside.
    pub fn depth(&self, p: [f64; 2]) -> f64 {
        match *self {
            ContinuumDomain::Square { .. } | ContinuumDomain::Rectangle { .. } => {
                let r = self.as_rect().unwrap();
                (p[0] - r.x0).min(r.x1 - p[0]).min(p[1] - r.y0).min(r.y1 - p[1]).max(0.0)
            }
            ContinuumDomain::Disc { cx, cy, r } => disc_depth(p[0] - cx, p[1] - cy, r),
            ContinuumDomain::Union(ref c) => c.iter().map(|d| d.depth(p)).fold(0.0, f64::max),
        }
    }

    /// Index into [`components`](Self::components) of the piece holding `p`.
    pub fn component_of(&self, p: [f64; 2]) -> Option<usize> {
        self.components().iter().position(|d| d.contains(p))
    }

    pub fn bbox(&self) -> Rect {
        match *self {
            ContinuumDomain::Disc { cx, cy, r } => Rect { x0: cx - r, y0: cy - r, x1: cx + r, y1: cy + r },
            ContinuumDomain::Union(ref c) => {
                let mut b = c[0].bbox();
                for d in &c[1..] {
                    let e = d.bbox();
                    b = Rect { x0: b.x0.min(e.x0), y0: b.y0.min(e.y0), x1: b.x1.max(e.x1), y1: b.y1.max(e.y1) };
                }
                b
            }
            _ => self.as_rect().unwrap(),
        }
    }

    pub fn area(&self) -> f64 {
        match *self {
            ContinuumDomain::Disc { r, .. } => std::f64::consts::PI * r * r,
            ContinuumDomain::Union(ref c) => c.iter().map(|d| d.area()).sum(),
            _ => {
                let r = self.as_rect().unwrap();
                r.width() * r.height()
            }
        }
    }

    /// Image under `p -> s p + t`.
    pub fn affine(&self, s: f64, t: [f64; 2]) -> ContinuumDomain {
        match *self {
            ContinuumDomain::Square { x0, y0, side } => ContinuumDomain::Square { x0: s * x0 + t[0], y0: s * y0 + t[1], side: s * side },
            ContinuumDomain::Rectangle { x0, y0, x1, y1 } => ContinuumDomain::Rectangle {
                x0: s * x0 + t[0],
                y0: s * y0 + t[1],
                x1: s * x1 + t[0],
                y1: s * y1 + t[1],
            },
            ContinuumDomain::Disc { cx, cy, r } => ContinuumDomain::Disc { cx: s * cx + t[0], cy: s * cy + t[1], r: s * r },
            ContinuumDomain::Union(ref c) => ContinuumDomain::Union(c.iter().map(|d| d.affine(s, t)).collect()),
        }
    }

    /// Whether `self` is contained in `other` (checked on the boundary of
    /// each component of `self` for the supported shapes).
    pub fn is_subset_of(&self, other: &ContinuumDomain) -> bool {
        self.components().iter().all(|c| {
            let probe: Vec<[f64; 2]> = match **c {
                ContinuumDomain::Disc { cx, cy, r } => (0..256)
                    .map(|k| {
                        let t = 2.0 * std::f64::consts::PI * k as f64 / 256.0;
                        [cx + r * t.cos(), cy + r * t.sin()]
                    })
                    .chain(std::iter::once([cx, cy]))
                    .collect(),
                _ => {
                    let r = c.as_rect().unwrap();
                    let mut v = vec![];
                    for k in 0..=64 {
                        let s = k as f64 / 64.0;
                        let x = r.x0 + s * r.width();
                        let y = r.y0 + s * r.height();
                        v.extend([[x, r.y0], [x, r.y1], [r.x0, y], [r.x1, y]]);
                    }
                    v
                }
            };
            let target = other.components();
            target.iter().any(|t| probe.iter().all(|&p| closure_contains(t, p)))
        })
    }
}

fn closure_contains(d: &ContinuumDomain, p: [f64; 2]) -> bool {
    const EPS: f64 = 1e-12;
    match *d {
        ContinuumDomain::Disc { cx, cy, r } => (p[0] - cx).hypot(p[1] - cy) <= r * (1.0 + EPS),
        _ => {
            let r = d.as_rect().unwrap();
            p[0] >= r.x0 - EPS && p[0] <= r.x1 + EPS && p[1] >= r.y0 - EPS && p[1] <= r.y1 + EPS
        }
    }
}

/// Half-side of the largest sup-norm ball about `(dx, dy)` inside a disc.
fn disc_depth(dx: f64, dy: f64, r: f64) -> f64 {
    let (a, b) = (dx.abs(), dy.abs());
    let s = a + b;
    let disc = s * s - 2.0 * (a * a + b * b - r * r);
    if a * a + b * b >= r * r || disc < 0.0 {
        return 0.0;
    }
    ((-s + disc.sqrt()) / 2.0).max(0.0)
}

fn overlap(a: &ContinuumDomain, b: &ContinuumDomain) -> bool {
    match (a, b) {
        (ContinuumDomain::Disc { cx, cy, r }, ContinuumDomain::Disc { cx: dx, cy: dy, r: s }) => {
            (cx - dx).hypot(cy - dy) < r + s
        }
        (ContinuumDomain::Disc { cx, cy, r }, q) | (q, ContinuumDomain::Disc { cx, cy, r }) => {
            let q = q.as_rect().unwrap();
            let px = cx.clamp(q.x0, q.x1);
            let py = cy.clamp(q.y0, q.y1);
            (cx - px).hypot(cy - py) < *r
        }
        _ => {
            let (p, q) = (a.as_rect().unwrap(), b.as_rect().unwrap());
            p.x0 < q.x1 && q.x0 < p.x1 && p.y0 < q.y1 && q.y0 < p.y1
        }
    }
}

#[derive(Debug)]
struct LatticeInner {
    n: u32,
    sites: Vec<Site>,
    gx: i64,
    gy: i64,
    gw: usize,
    gh: usize,
    index: Vec<u32>,
    boundary: Vec<Site>,
    parent: Option<ContinuumDomain>,
    is_box: bool,
}

/// Finite set of lattice sites at resolution `N`, with its outer boundary.
/// Sites are kept sorted lexicographically by `(x1, x2)`; cloning is cheap.
#[derive(Debug, Clone)]
pub struct LatticeDomain(Arc<LatticeInner>);

/// Lattice box `{x0..x0+w-1} x {y0..y0+h-1}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LatticeBox {
    pub x0: i64,
    pub y0: i64,
    pub w: usize,
    pub h: usize,
}

const NONE: u32 = u32::MAX;

impl LatticeDomain {
    pub fn from_sites(n: u32, mut sites: Vec<Site>, parent: Option<ContinuumDomain>) -> Result<Self> {
        if sites.is_empty() {
            return Err(Error::Domain("lattice domain needs at least one site".into()));
        }
        sites.sort_unstable();
        sites.dedup();
        if sites.len() >= NONE as usize {
            return Err(Error::Resource("too many sites".into()));
        }
        let gx = sites.iter().map(|s| s[0]).min().unwrap() - 1;
        let gy = sites.iter().map(|s| s[1]).min().unwrap() - 1;
        let gw = (sites.iter().map(|s| s[0]).max().unwrap() - gx + 2) as usize;
        let gh = (sites.iter().map(|s| s[1]).max().unwrap() - gy + 2) as usize;
        let mut index = vec![NONE; gw * gh];
        for (i, s) in sites.iter().enumerate() {
            index[(s[0] - gx) as usize * gh + (s[1] - gy) as usize] = i as u32;
        }
        let mut inner = LatticeInner { n, sites, gx, gy, gw, gh, index, boundary: vec![], parent, is_box: false };
        let mut boundary = vec![];
        for s in &inner.sites {
            for t in neighbors(*s) {
                if lookup(&inner, t).is_none() {
                    boundary.push(t);
                }
            }
        }
        boundary.sort_unstable();
        boundary.dedup();
        inner.boundary = boundary;
        inner.is_box = inner.sites.len() == (gw - 2) * (gh - 2);
        Ok(LatticeDomain(Arc::new(inner)))
    }

    pub fn lattice_box(n: u32, x0: i64, y0: i64, w: usize, h: usize) -> Result<Self> {
        let mut sites = Vec::with_capacity(w * h);
        for i in 0..w as i64 {
            for j in 0..h as i64 {
                sites.push([x0 + i, y0 + j]);
            }
        }
        Self::from_sites(n, sites, None)
    }

    pub fn n(&self) -> u32 {
        self.0.n
    }

    pub fn sites(&self) -> &[Site] {
        &self.0.sites
    }

    pub fn len(&self) -> usize {
        self.0.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.sites.is_empty()
    }

    pub fn boundary(&self) -> &[Site] {
        &self.0.boundary
    }

    pub fn parent(&self) -> Option<&ContinuumDomain> {
        self.0.parent.as_ref()
    }

    pub fn index_of(&self, s: Site) -> Option<usize> {
        lookup(&self.0, s)
    }

    pub fn contains_site(&self, s: Site) -> bool {
        self.index_of(s).is_some()
    }

    pub fn same_as(&self, other: &LatticeDomain) -> bool {
        Arc::ptr_eq(&self.0, &other.0) || self.0.sites == other.0.sites
    }

    pub fn as_box(&self) -> Option<LatticeBox> {
        self.0.is_box.then(|| LatticeBox { x0: self.0.gx + 1, y0: self.0.gy + 1, w: self.0.gw - 2, h: self.0.gh - 2 })
    }

    pub fn is_subset_of(&self, other: &LatticeDomain) -> bool {
        self.sites().iter().all(|s| other.contains_site(*s))
    }

    /// Lower triangle of `I - P` in site order, for envelope factorization.
    pub fn killed_walk_rows(&self) -> Vec<Vec<(usize, f64)>> {
        self.sites()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let mut r = vec![(i, 1.0)];
                for t in neighbors(*s) {
                    if let Some(j) = self.index_of(t) {
                        if j < i {
                            r.push((j, -0.25));
                        }
                    }
                }
                r
            })
            .collect()
    }

    /// Apply `(I - P)` to a site vector.
    pub fn apply_killed_walk(&self, v: &[f64]) -> Vec<f64> {
        self.sites()
            .iter()
            .enumerate()
            .map(|(i, s)| {
                let nb: f64 = neighbors(*s).iter().filter_map(|t| self.index_of(*t)).map(|j| v[j]).sum();
                v[i] - 0.25 * nb
            })
            .collect()
    }

    /// For a box: the four quadrants left after removing the middle row and
    /// column. Empty quadrants are skipped.
    pub fn cross_children(&self) -> Result<Vec<LatticeDomain>> {
        let b = self.as_box().ok_or_else(|| Error::UnsupportedDomain("cross split needs a box".into()))?;
        let (mw, mh) = (b.w / 2, b.h / 2);
        let mut out = vec![];
        for (x0, w) in [(b.x0, mw), (b.x0 + mw as i64 + 1, b.w - mw - 1)] {
            for (y0, h) in [(b.y0, mh), (b.y0 + mh as i64 + 1, b.h - mh - 1)] {
                if w > 0 && h > 0 {
                    out.push(LatticeDomain::lattice_box(self.n(), x0, y0, w, h)?);
                }
            }
        }
        Ok(out)
    }

    /// Continuum position `x / N` of a site.
    pub fn position(&self, s: Site) -> [f64; 2] {
        let n = self.n() as f64;
        [s[0] as f64 / n, s[1] as f64 / n]
    }
}

fn lookup(inner: &LatticeInner, s: Site) -> Option<usize> {
    let i = s[0] - inner.gx;
    let j = s[1] - inner.gy;
    if i < 0 || j < 0 || i as usize >= inner.gw || j as usize >= inner.gh {
        return None;
    }
    let v = inner.index[i as usize * inner.gh + j as usize];
    (v != NONE).then_some(v as usize)
}

pub fn neighbors(s: Site) -> [Site; 4] {
    [[s[0] + 1, s[1]], [s[0] - 1, s[1]], [s[0], s[1] + 1], [s[0], s[1] - 1]]
}

/// `D_N = {x in Z^2 : d_inf(x/N, D^c) > 1/N}`.
pub fn discretize(d: &ContinuumDomain, n: u32) -> Result<LatticeDomain> {
    d.validate()?;
    if n == 0 {
        return Err(Error::Precondition("resolution N must be positive".into()));
    }
    let nf = n as f64;
    let scaled = d.affine(nf, [0.0, 0.0]);
    let b = scaled.bbox();
    let mut sites = vec![];
    for x in b.x0.floor() as i64..=b.x1.ceil() as i64 {
        for y in b.y0.floor() as i64..=b.y1.ceil() as i64 {
            if scaled.depth([x as f64, y as f64]) > 1.0 {
                sites.push([x, y]);
            }
        }
    }
    if sites.is_empty() {
        return Err(Error::DegenerateDiscretization { domain: d.kind().to_string(), n });
    }
    LatticeDomain::from_sites(n, sites, Some(d.clone()))
}

/// Dyadic square `(k 2^-n, (k+1) 2^-n) x (l 2^-n, (l+1) 2^-n)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicSquare {
    pub k: i64,
    pub l: i64,
    pub n: u32,
}

impl DyadicSquare {
    pub fn unit() -> Self {
        Self { k: 0, l: 0, n: 0 }
    }

    pub fn side(&self) -> f64 {
        (-(self.n as f64)).exp2()
    }

    pub fn corner(&self) -> [f64; 2] {
        let s = self.side();
        [self.k as f64 * s, self.l as f64 * s]
    }

    pub fn to_domain(&self) -> ContinuumDomain {
        let c = self.corner();
        ContinuumDomain::Square { x0: c[0], y0: c[1], side: self.side() }
    }

    /// The `4^m` dyadic squares of side `2^-(n+m)` inside `self`, ordered by
    /// `(k, l)`.
    pub fn children(&self, m: u32) -> Vec<DyadicSquare> {
        let f = 1i64 << m;
        let mut v = Vec::with_capacity((f * f) as usize);
        for a in 0..f {
            for b in 0..f {
                v.push(DyadicSquare { k: self.k * f + a, l: self.l * f + b, n: self.n + m });
            }
        }
        v
    }

    /// Concentric square of side `(1 - 2 delta) 2^-n`.
    pub fn shrink(&self, delta: f64) -> Result<ContinuumDomain> {
        if !(delta > 0.0 && delta < 0.5) {
            return Err(Error::Precondition(format!("shrink needs 0 < delta < 1/2, got {delta}")));
        }
        let s = self.side();
        let c = self.corner();
        Ok(ContinuumDomain::Square { x0: c[0] + delta * s, y0: c[1] + delta * s, side: (1.0 - 2.0 * delta) * s })
    }
}

pub fn dyadic_children(s: &DyadicSquare, m: u32) -> Result<Vec<DyadicSquare>> {
    if m == 0 {
        return Err(Error::Precondition("dyadic_children needs m >= 1".into()));
    }
    Ok(s.children(m))
}

/// Regular grid of `nx x ny` pixels over a rectangle; pixel `(i, j)` has
/// linear index `i * ny + j`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PixelGrid {
    pub x0: f64,
    pub y0: f64,
    pub dx: f64,
    pub dy: f64,
    pub nx: usize,
    pub ny: usize,
}

impl PixelGrid {
    pub fn over(r: Rect, nx: usize, ny: usize) -> Self {
        Self { x0: r.x0, y0: r.y0, dx: r.width() / nx as f64, dy: r.height() / ny as f64, nx, ny }
    }

    pub fn len(&self) -> usize {
        self.nx * self.ny
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn pixel_area(&self) -> f64 {
        self.dx * self.dy
    }

    pub fn center(&self, i: usize, j: usize) -> [f64; 2] {
        [self.x0 + (i as f64 + 0.5) * self.dx, self.y0 + (j as f64 + 0.5) * self.dy]
    }

    pub fn centers(&self) -> Vec<[f64; 2]> {
        let mut v = Vec::with_capacity(self.len());
        for i in 0..self.nx {
            for j in 0..self.ny {
                v.push(self.center(i, j));
            }
        }
        v
    }
}
