//! Intermediate level sets, the normalization `K_N`, and the
//! three-coordinate point measure.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use serde::{Deserialize, Serialize};

use crate::domain::Site;
use crate::error::{Error, Result};
use crate::io::csv_error;
use crate::sampler::Field;
use crate::G;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleRule {
    /// `a_N = 2 sqrt(g) lambda log N`.
    #[default]
    Canonical,
    /// Explicit `a_N` per resolution.
    Custom,
}

/// Centering sequence `a_N` with `a_N / log N -> 2 sqrt(g) lambda`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CenteringSchedule {
    pub lambda: f64,
    #[serde(default)]
    pub rule: ScheduleRule,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub values: BTreeMap<u32, f64>,
}

impl CenteringSchedule {
    pub fn canonical(lambda: f64) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda, rule: ScheduleRule::Canonical, values: BTreeMap::new() })
    }

    pub fn custom(lambda: f64, values: BTreeMap<u32, f64>) -> Result<Self> {
        check_lambda(lambda)?;
        Ok(Self { lambda, rule: ScheduleRule::Custom, values })
    }

    pub fn a_n(&self, n: u32) -> Result<f64> {
        match self.rule {
            ScheduleRule::Canonical => Ok(2.0 * G.sqrt() * self.lambda * (n as f64).ln()),
            ScheduleRule::Custom => {
                self.values.get(&n).copied().ok_or_else(|| Error::Precondition(format!("schedule has no a_N for N={n}")))
            }
        }
    }
}

fn check_lambda(lambda: f64) -> Result<()> {
    if !(0.0..1.0).contains(&lambda) {
        return Err(Error::Precondition(format!("lambda must lie in [0, 1), got {lambda}")));
    }
    Ok(())
}

/// `K_N = N^2 exp(-a_N^2 / (2 g log N)) / sqrt(log N)`.
pub fn k_norm(n: u32, schedule: &CenteringSchedule) -> Result<f64> {
    if n < 2 {
        return Err(Error::Precondition("K_N needs N >= 2".into()));
    }
    let a = schedule.a_n(n)?;
    let l = (n as f64).ln();
    Ok((n as f64).powi(2) * (-a * a / (2.0 * G * l)).exp() / l.sqrt())
}

/// `Gamma_N(b) = {x : h(x) >= a_N + b}`.
#[derive(Debug, Clone, PartialEq)]
pub struct LevelSet {
    pub sites: Vec<Site>,
    pub b: f64,
    pub threshold: f64,
    pub n: u32,
}

impl LevelSet {
    pub fn len(&self) -> usize {
        self.sites.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sites.is_empty()
    }
}

pub fn extract(field: &Field, schedule: &CenteringSchedule, b: f64) -> Result<LevelSet> {
    let n = field.domain.n();
    let threshold = schedule.a_n(n)? + b;
    let sites = field
        .domain
        .sites()
        .iter()
        .zip(&field.values)
        .filter(|(_, v)| **v >= threshold)
        .map(|(s, _)| *s)
        .collect();
    Ok(LevelSet { sites, b, threshold, n })
}

/// Number of sites at or above `a_N + b`, without materializing them.
pub fn count_above(values: &[f64], a_n: f64, b: f64) -> usize {
    let t = a_n + b;
    values.iter().filter(|v| **v >= t).count()
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub site: Site,
    /// `x / N`.
    pub position: [f64; 2],
    /// `h(x) - a_N`.
    pub overshoot: f64,
    /// `h(x) - h(x + z)` over the square `|z1|, |z2| <= r`, index
    /// `(z1 + r)(2r + 1) + (z2 + r)`.
    pub profile: Vec<f64>,
}

/// Atoms of the level set with positions, overshoots and local profiles;
/// each carries weight `1/K_N`.
#[derive(Debug, Clone, PartialEq)]
pub struct PointMeasure {
    pub n: u32,
    pub lambda: f64,
    pub r: u32,
    /// Extraction offset: every atom has overshoot `>= b`.
    pub b: f64,
    pub a_n: f64,
    pub k_n: f64,
    pub atoms: Vec<Atom>,
}

pub fn point_measure(field: &Field, schedule: &CenteringSchedule, r: u32) -> Result<PointMeasure> {
    point_measure_above(field, schedule, r, 0.0)
}

pub fn point_measure_above(field: &Field, schedule: &CenteringSchedule, r: u32, b: f64) -> Result<PointMeasure> {
    let n = field.domain.n();
    let a_n = schedule.a_n(n)?;
    let k_n = k_norm(n, schedule)?;
    let ri = r as i64;
    let mut atoms = vec![];
    for (s, &h) in field.domain.sites().iter().zip(&field.values) {
        if h < a_n + b {
            continue;
        }
        let mut profile = Vec::with_capacity(((2 * r + 1) * (2 * r + 1)) as usize);
        for dz1 in -ri..=ri {
            for dz2 in -ri..=ri {
                profile.push(h - field.value([s[0] + dz1, s[1] + dz2]));
            }
        }
        atoms.push(Atom { site: *s, position: field.domain.position(*s), overshoot: h - a_n, profile });
    }
    Ok(PointMeasure { n, lambda: schedule.lambda, r, b, a_n, k_n, atoms })
}

impl PointMeasure {
    pub fn profile_index(&self, z: Site) -> Option<usize> {
        let r = self.r as i64;
        (z[0].abs() <= r && z[1].abs() <= r).then(|| ((z[0] + r) * (2 * r + 1) + (z[1] + r)) as usize)
    }

    /// `|Gamma| / K_N` over the atoms.
    pub fn total_mass(&self) -> f64 {
        self.atoms.len() as f64 / self.k_n
    }

    /// Header `N,lambda,x1,x2,overshoot,p_{z1}_{z2}...`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        let r = self.r as i64;
        write!(w, "N,lambda,x1,x2,overshoot")?;
        for a in -r..=r {
            for b in -r..=r {
                write!(w, ",p_{a}_{b}")?;
            }
        }
        writeln!(w)?;
        for atom in &self.atoms {
            write!(w, "{},{},{},{},{}", self.n, self.lambda, atom.position[0], atom.position[1], atom.overshoot)?;
            for p in &atom.profile {
                write!(w, ",{p}")?;
            }
            writeln!(w)?;
        }
        Ok(())
    }

    /// Inverse of [`write_csv`](Self::write_csv); `K_N` and `a_N` are
    /// recomputed from the canonical schedule.
    pub fn read_csv<R: Read>(reader: R) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
        let cols = rdr.headers().map_err(|e| csv_error(e, 1))?.clone();
        if cols.len() < 6 || cols.iter().take(5).ne(["N", "lambda", "x1", "x2", "overshoot"]) {
            return Err(Error::Parse { line: 1, msg: "unexpected header".into() });
        }
        let np = cols.len() - 5;
        let side = (np as f64).sqrt().round() as usize;
        if side * side != np || side % 2 == 0 {
            return Err(Error::Parse { line: 1, msg: "profile columns must form an odd square".into() });
        }
        let r = (side / 2) as u32;
        let mut atoms = vec![];
        let mut meta: Option<(u32, f64)> = None;
        for (k, rec) in rdr.records().enumerate() {
            let rec = rec.map_err(|e| csv_error(e, k + 2))?;
            let lineno = rec.position().map_or(k + 2, |p| p.line() as usize);
            let num = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse { line: lineno, msg: e.to_string() });
            let n: u32 = rec[0].parse().map_err(|e: std::num::ParseIntError| Error::Parse { line: lineno, msg: e.to_string() })?;
            let lambda = num(&rec[1])?;
            meta.get_or_insert((n, lambda));
            let position = [num(&rec[2])?, num(&rec[3])?];
            let site = [(position[0] * n as f64).round() as i64, (position[1] * n as f64).round() as i64];
            let profile = rec.iter().skip(5).map(num).collect::<Result<Vec<_>>>()?;
            atoms.push(Atom { site, position, overshoot: num(&rec[4])?, profile });
        }
        let (n, lambda) = meta.ok_or(Error::Parse { line: 2, msg: "no atoms; N unknown".into() })?;
        let sched = CenteringSchedule::canonical(lambda)?;
        let b = atoms.iter().map(|a| a.overshoot).fold(f64::INFINITY, f64::min).min(0.0);
        Ok(Self { n, lambda, r, b, a_n: sched.a_n(n)?, k_n: k_norm(n, &sched)?, atoms })
    }
}

/// `(1/K_N) sum_atoms f(position, overshoot)`.
pub fn measure_integrate(pm: &PointMeasure, f: impl Fn([f64; 2], f64) -> f64) -> f64 {
    pm.atoms.iter().map(|a| f(a.position, a.overshoot)).sum::<f64>() / pm.k_n
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::LatticeDomain;
    use crate::sampler::SeedTag;
    use proptest::prelude::*;

    fn field(values: Vec<f64>, w: usize) -> Field {
        let d = LatticeDomain::lattice_box(16, 1, 1, w, values.len() / w).unwrap();
        Field::new(d, values, SeedTag::deterministic("test"))
    }

    #[test]
    fn k_norm_examples() {
        let s = CenteringSchedule::canonical(0.5).unwrap();
        let k = k_norm(100, &s).unwrap();
        assert!((k - 1000.0 / (100f64).ln().sqrt()).abs() < 1e-9);
        assert!((k - 465.99).abs() < 0.01);
        let z = CenteringSchedule::canonical(0.0).unwrap();
        assert!((k_norm(64, &z).unwrap() - 4096.0 / (64f64).ln().sqrt()).abs() < 1e-9);
        for n in [8u32, 50, 512] {
            for l in [0.1, 0.3, 0.9] {
                let s = CenteringSchedule::canonical(l).unwrap();
                let want = (n as f64).powf(2.0 * (1.0 - l * l)) / (n as f64).ln().sqrt();
                assert!((k_norm(n, &s).unwrap() / want - 1.0).abs() < 1e-12);
            }
        }
        assert!(k_norm(1, &s).is_err());
        assert!(CenteringSchedule::canonical(1.0).is_err());
    }

    #[test]
    fn custom_schedule() {
        let s = CenteringSchedule::custom(0.3, [(64u32, 1.5)].into_iter().collect()).unwrap();
        assert_eq!(s.a_n(64).unwrap(), 1.5);
        assert!(s.a_n(128).is_err());
        let j = serde_json::to_string(&s).unwrap();
        assert_eq!(serde_json::from_str::<CenteringSchedule>(&j).unwrap(), s);
        let c: CenteringSchedule = serde_json::from_str(r#"{"lambda":0.2}"#).unwrap();
        assert_eq!(c.rule, ScheduleRule::Canonical);
    }

    #[test]
    fn extract_examples() {
        let s = CenteringSchedule::canonical(0.3).unwrap();
        let f = field(vec![0.0; 16], 4);
        assert!(extract(&f, &s, 0.0).unwrap().is_empty());
        let f = field((0..16).map(|i| i as f64 * 0.1).collect(), 4);
        assert_eq!(extract(&f, &s, -100.0).unwrap().len(), 16);
    }

    #[test]
    fn single_atom_profile() {
        let s = CenteringSchedule::canonical(0.3).unwrap();
        let mut v = vec![0.0; 25];
        v[12] = 10.0;
        v[13] = 1.0;
        let f = field(v, 5);
        let pm = point_measure(&f, &s, 2).unwrap();
        assert_eq!(pm.atoms.len(), 1);
        let a = &pm.atoms[0];
        assert_eq!(a.site, [3, 3]);
        assert_eq!(a.profile[pm.profile_index([0, 0]).unwrap()], 0.0);
        assert_eq!(a.profile[pm.profile_index([0, 1]).unwrap()], 9.0);
        assert_eq!(a.profile[pm.profile_index([2, 2]).unwrap()], 10.0);
        assert!((pm.total_mass() - 1.0 / pm.k_n).abs() < 1e-18);
        assert!((measure_integrate(&pm, |_, _| 1.0) - pm.total_mass()).abs() < 1e-18);
    }

    #[test]
    fn csv_round_trip() {
        let s = CenteringSchedule::canonical(0.2).unwrap();
        let f = field((0..36).map(|i| ((i * 37) % 11) as f64 * 0.3).collect(), 6);
        let pm = point_measure(&f, &s, 1).unwrap();
        let mut buf = vec![];
        pm.write_csv(&mut buf).unwrap();
        let back = PointMeasure::read_csv(&buf[..]).unwrap();
        assert_eq!(back.atoms, pm.atoms);
        assert_eq!(back.k_n, pm.k_n);
        let bad = "N,lambda,x1,x2,overshoot,p_0_0\n16,0.2,0.1\n";
        assert!(matches!(PointMeasure::read_csv(bad.as_bytes()), Err(Error::Parse { line: 2, .. })));
    }

    proptest! {
        #[test]
        fn level_sets_are_nested(vals in proptest::collection::vec(-3.0f64..5.0, 16), b in -2.0f64..2.0, db in 0.0f64..2.0) {
            let s = CenteringSchedule::canonical(0.3).unwrap();
            let f = field(vals, 4);
            let lo = extract(&f, &s, b).unwrap();
            let hi = extract(&f, &s, b + db).unwrap();
            prop_assert!(hi.sites.iter().all(|x| lo.sites.contains(x)));
            let pm = point_measure_above(&f, &s, 1, b).unwrap();
            prop_assert_eq!(pm.atoms.len(), lo.len());
            prop_assert!(pm.atoms.iter().all(|a| a.overshoot >= b));
        }

        #[test]
        fn integration_is_linear(vals in proptest::collection::vec(0.0f64..4.0, 16), c in -3.0f64..3.0) {
            let s = CenteringSchedule::canonical(0.1).unwrap();
            let pm = point_measure(&field(vals, 4), &s, 0).unwrap();
            let f = |p: [f64; 2], o: f64| p[0] + o;
            let g = |p: [f64; 2], _o: f64| p[1] * p[1];
            let lhs = measure_integrate(&pm, |p, o| f(p, o) + c * g(p, o));
            let rhs = measure_integrate(&pm, f) + c * measure_integrate(&pm, g);
            prop_assert!((lhs - rhs).abs() < 1e-9 * (1.0 + lhs.abs()));
        }
    }
}
