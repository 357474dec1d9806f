//! Execution of experiment configs.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use dgff::chaos::{lqg_compare, MartingaleRunner};
use dgff::levelset::point_measure_above;
use dgff::sampler::DomainSampler;
use dgff::stats::{empirical_cdf, OvershootAccumulator};
use dgff::verify::run_suite;
use dgff::{discretize, io, k_norm, RngSpec, ALPHA, VERSION};
use rayon::prelude::*;
use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, ExperimentKind, Manifest, SeedEntry};
use crate::{chaos_stream, replica_stream, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub manifest: Manifest,
    /// False when a verification suite reported failures.
    pub pass: bool,
}

/// Reads either a bare config or a manifest (whose `config` is replayed).
pub fn load_config(path: &Path) -> Result<ExperimentConfig> {
    let text = std::fs::read_to_string(path)?;
    let v: Value = serde_json::from_str(&text)?;
    let cfg = match v.get("config") {
        Some(c) if v.get("version").is_some() => serde_json::from_value(c.clone())?,
        _ => serde_json::from_value(v)?,
    };
    Ok(cfg)
}

pub fn run_from_path(path: &Path, seed: Option<u64>, out: Option<PathBuf>) -> Result<RunOutcome> {
    let mut cfg = load_config(path)?;
    if let Some(s) = seed {
        cfg.seed = s;
    }
    if let Some(o) = out {
        cfg.out_dir = o;
    }
    run(&cfg)
}

struct Outputs {
    dir: PathBuf,
    files: Vec<String>,
}

impl Outputs {
    fn create(dir: &Path) -> Result<Self> {
        std::fs::create_dir_all(dir)?;
        Ok(Self { dir: dir.to_path_buf(), files: vec![] })
    }

    fn path(&mut self, name: &str) -> PathBuf {
        self.files.push(name.to_string());
        self.dir.join(name)
    }

    fn writer(&mut self, name: &str) -> Result<BufWriter<File>> {
        Ok(BufWriter::new(File::create(self.path(name))?))
    }

    fn json<T: Serialize>(&mut self, name: &str, v: &T) -> Result<()> {
        let mut w = self.writer(name)?;
        serde_json::to_writer_pretty(&mut w, v)?;
        writeln!(w)?;
        Ok(())
    }
}

pub fn run(cfg: &ExperimentConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let mut out = Outputs::create(&cfg.out_dir)?;
    let mut seeds = vec![];
    let mut pass = true;
    match cfg.kind {
        ExperimentKind::VerifyPotential => {
            let rep = run_suite("potential")?;
            pass = rep.pass;
            out.json("verify_potential.json", &rep)?;
        }
        ExperimentKind::Levelset => {
            let report = levelset(cfg, &mut out, &mut seeds)?;
            out.json("levelset_report.json", &report)?;
        }
        ExperimentKind::Chaos => {
            let report = chaos(cfg, &mut out, &mut seeds)?;
            out.json("chaos_report.json", &report)?;
        }
        ExperimentKind::Compare => {
            let report = compare(cfg, &mut out, &mut seeds)?;
            out.json("compare_report.json", &report)?;
        }
    }
    out.files.push("manifest.json".into());
    out.files.sort();
    let manifest = Manifest { config: cfg.clone(), version: VERSION.to_string(), seeds, files: out.files.clone() };
    let mut w = BufWriter::new(File::create(cfg.out_dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    writeln!(w)?;
    Ok(RunOutcome { manifest, pass })
}

struct LevelsetReplica {
    count0: usize,
    count_b: usize,
    overshoot: OvershootAccumulator,
    files: Vec<String>,
}

fn levelset(cfg: &ExperimentConfig, out: &mut Outputs, seeds: &mut Vec<SeedEntry>) -> Result<Value> {
    let sched = cfg.schedule()?;
    let mut per_n = vec![];
    for &n in &cfg.n {
        let lattice = discretize(&cfg.domain, n)?;
        let sampler = DomainSampler::new(&lattice, cfg.sampler)?;
        let (a_n, k_n) = (sched.a_n(n)?, k_norm(n, &sched)?);
        let dir = out.dir.clone();
        let reps: Vec<LevelsetReplica> = (0..cfg.replicas)
            .into_par_iter()
            .map(|rep| -> Result<LevelsetReplica> {
                let field = sampler.sample(RngSpec::new(cfg.seed, replica_stream(rep, n)));
                let pm = point_measure_above(&field, &sched, cfg.r, cfg.b)?;
                let mut files = vec![];
                let name = format!("levelset_N{n}_rep{rep:04}.csv");
                pm.write_csv(BufWriter::new(File::create(dir.join(&name))?))?;
                files.push(name);
                if cfg.write_fields || cfg.render {
                    let name = format!("field_N{n}_rep{rep:04}.csv");
                    field.write_csv(BufWriter::new(File::create(dir.join(&name))?))?;
                    if cfg.render {
                        let pgm = format!("field_N{n}_rep{rep:04}.pgm");
                        io::render_file(&dir.join(&name), &dir.join(&pgm))?;
                        files.push(pgm.clone());
                        files.push(format!("{pgm}.json"));
                    }
                    files.push(name);
                }
                let mut overshoot = OvershootAccumulator::for_lambda(cfg.lambda);
                overshoot.add(&pm);
                let count0 = field.values.iter().filter(|v| **v >= a_n).count();
                let count_b = pm.atoms.iter().filter(|a| a.overshoot >= cfg.b).count();
                Ok(LevelsetReplica { count0, count_b, overshoot, files })
            })
            .collect::<Result<_>>()?;
        let mut acc = OvershootAccumulator::for_lambda(cfg.lambda);
        for (rep, r) in reps.iter().enumerate() {
            seeds.push(SeedEntry { source: "levelset".into(), n: Some(n), replica: rep, seed: cfg.seed, stream: replica_stream(rep, n) });
            acc.merge(&r.overshoot);
            out.files.extend(r.files.iter().cloned());
        }
        let counts: Vec<usize> = reps.iter().map(|r| r.count0).collect();
        let mean = counts.iter().sum::<usize>() as f64 / counts.len() as f64;
        let fit = match acc.fit(ALPHA * cfg.lambda) {
            Ok(f) => serde_json::to_value(f)?,
            Err(e) => json!({ "error": e.kind(), "message": e.to_string() }),
        };
        per_n.push(json!({
            "N": n,
            "a_n": a_n,
            "k_n": k_n,
            "counts": counts,
            "counts_b": reps.iter().map(|r| r.count_b).collect::<Vec<_>>(),
            "mean_count": mean,
            "mean_mass": mean / k_n,
            "overshoot": fit,
        }));
    }
    Ok(json!({ "lambda": cfg.lambda, "b": cfg.b, "r": cfg.r, "per_n": per_n }))
}

fn chaos_totals(cfg: &ExperimentConfig, out: &mut Outputs, seeds: &mut Vec<SeedEntry>) -> Result<(MartingaleRunner, Vec<Vec<f64>>)> {
    let runner = MartingaleRunner::new(cfg.dyadic_root()?, cfg.lambda, cfg.grid, cfg.depth)?;
    let dir = out.dir.clone();
    let totals: Vec<(Vec<f64>, Vec<String>)> = (0..cfg.replicas)
        .into_par_iter()
        .map(|rep| -> Result<(Vec<f64>, Vec<String>)> {
            let mut rng = RngSpec::new(cfg.seed, chaos_stream(rep)).rng();
            if !(cfg.write_fields || cfg.render) {
                return Ok((runner.run_totals(&mut rng), vec![]));
            }
            let ys = runner.run(&mut rng)?;
            let last = ys.last().expect("depth >= 1");
            let name = format!("chaos_rep{rep:04}.csv");
            last.write_csv(BufWriter::new(File::create(dir.join(&name))?))?;
            let mut files = vec![name.clone()];
            if cfg.render {
                let pgm = format!("chaos_rep{rep:04}.pgm");
                io::render_file(&dir.join(&name), &dir.join(&pgm))?;
                files.push(pgm.clone());
                files.push(format!("{pgm}.json"));
            }
            Ok((ys.iter().map(|y| y.total()).collect(), files))
        })
        .collect::<Result<_>>()?;
    let mut all = vec![];
    for (rep, (t, files)) in totals.into_iter().enumerate() {
        seeds.push(SeedEntry { source: "chaos".into(), n: None, replica: rep, seed: cfg.seed, stream: chaos_stream(rep) });
        out.files.extend(files);
        all.push(t);
    }
    Ok((runner, all))
}

fn chaos(cfg: &ExperimentConfig, out: &mut Outputs, seeds: &mut Vec<SeedEntry>) -> Result<Value> {
    let (runner, totals) = chaos_totals(cfg, out, seeds)?;
    let mut w = out.writer("chaos_totals.csv")?;
    writeln!(w, "replica,level,total")?;
    for (rep, t) in totals.iter().enumerate() {
        for (j, v) in t.iter().enumerate() {
            writeln!(w, "{rep},{},{v}", j + 1)?;
        }
    }
    w.flush()?;
    let m = totals.len() as f64;
    let levels: Vec<Value> = (0..cfg.depth as usize)
        .map(|j| {
            let v: Vec<f64> = totals.iter().map(|t| t[j]).collect();
            let mean = v.iter().sum::<f64>() / m;
            let var = if m > 1.0 { v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / (m - 1.0) } else { f64::NAN };
            json!({ "level": j + 1, "mean_total": mean, "stderr": (var / m).sqrt() })
        })
        .collect();
    Ok(json!({
        "lambda": cfg.lambda,
        "grid": cfg.grid,
        "depth": cfg.depth,
        "expected_total": runner.expected_total(),
        "levels": levels,
    }))
}

fn compare(cfg: &ExperimentConfig, out: &mut Outputs, seeds: &mut Vec<SeedEntry>) -> Result<Value> {
    let sched = cfg.schedule()?;
    let (_, totals) = chaos_totals(cfg, out, seeds)?;
    let chaos_mass: Vec<f64> = totals.iter().map(|t| *t.last().expect("depth >= 1")).collect();
    let mut w = out.writer("compare_masses.csv")?;
    writeln!(w, "source,N,replica,mass")?;
    for (rep, m) in chaos_mass.iter().enumerate() {
        writeln!(w, "chaos,0,{rep},{m}")?;
    }
    let mut reports = vec![];
    let mut cdf = out.writer("compare_cdfs.csv")?;
    writeln!(cdf, "source,N,x,F")?;
    for (x, f) in empirical_cdf(&normalized(&chaos_mass)) {
        writeln!(cdf, "chaos,0,{x},{f}")?;
    }
    for &n in &cfg.n {
        let lattice = discretize(&cfg.domain, n)?;
        let sampler = DomainSampler::new(&lattice, cfg.sampler)?;
        let (a_n, k_n) = (sched.a_n(n)?, k_norm(n, &sched)?);
        let masses: Vec<f64> = (0..cfg.replicas)
            .into_par_iter()
            .map(|rep| {
                let f = sampler.sample(RngSpec::new(cfg.seed, replica_stream(rep, n)));
                ALPHA * cfg.lambda * f.values.iter().filter(|v| **v >= a_n).count() as f64 / k_n
            })
            .collect();
        for (rep, m) in masses.iter().enumerate() {
            seeds.push(SeedEntry { source: "levelset".into(), n: Some(n), replica: rep, seed: cfg.seed, stream: replica_stream(rep, n) });
            writeln!(w, "levelset,{n},{rep},{m}")?;
        }
        for (x, f) in empirical_cdf(&normalized(&masses)) {
            writeln!(cdf, "levelset,{n},{x},{f}")?;
        }
        let rep = match lqg_compare(&masses, &chaos_mass) {
            Ok(r) => serde_json::to_value(r)?,
            Err(e) => json!({ "error": e.kind(), "message": e.to_string() }),
        };
        reports.push(json!({ "N": n, "report": rep }));
    }
    w.flush()?;
    cdf.flush()?;
    Ok(json!({ "lambda": cfg.lambda, "depth": cfg.depth, "grid": cfg.grid, "per_n": reports }))
}

fn normalized(v: &[f64]) -> Vec<f64> {
    let m = v.iter().sum::<f64>() / v.len() as f64;
    if m > 0.0 {
        v.iter().map(|x| x / m).collect()
    } else {
        v.to_vec()
    }
}
