use std::collections::HashMap;
use std::path::Path;

use anyhow::{Context, Result};
use rayon::prelude::*;
use serde::Deserialize;
use tdm_core::io::read_instance;
use tdm_core::Ratio;

use crate::run::{solve, Method, SolveOptions};

pub const MANIFEST_HEADER: [&str; 6] = ["path", "class", "n", "f", "total_rate", "latency_load"];
const HEADER: [&str; 10] = [
    "instance",
    "class",
    "n",
    "method",
    "status",
    "phi",
    "bound",
    "distance",
    "runtime_ms",
    "failures",
];

#[derive(Debug, Deserialize)]
struct ManifestRow {
    path: String,
    class: String,
    n: usize,
}

struct Row {
    instance: String,
    class: String,
    n: usize,
    method: Method,
    status: String,
    phi: Option<Ratio>,
    bound: Option<f64>,
    runtime_ms: f64,
}

fn run_one(dir: &Path, entry: &ManifestRow, method: Method, opts: &SolveOptions) -> Row {
    let mut row = Row {
        instance: entry.path.clone(),
        class: entry.class.clone(),
        n: entry.n,
        method,
        status: String::new(),
        phi: None,
        bound: None,
        runtime_ms: 0.0,
    };
    let outcome = read_instance(&dir.join(&entry.path))
        .map_err(anyhow::Error::from)
        .and_then(|inst| solve(&inst, method, opts));
    match outcome {
        Ok(r) => {
            row.status = r.status.to_string();
            row.phi = r.solution.map(|s| s.objective());
            row.bound = r.bound;
            row.runtime_ms = r.runtime_ms;
        }
        Err(e) => {
            log::warn!("{} with {}: {e:#}", entry.path, method.name());
            row.status = "error".into();
        }
    }
    row
}

pub fn run(
    manifest: &Path,
    methods: &[Method],
    opts: &SolveOptions,
    workers: Option<usize>,
    out: Option<&Path>,
) -> Result<u8> {
    let mut reader = csv::Reader::from_path(manifest)
        .with_context(|| format!("reading {}", manifest.display()))?;
    let entries: Vec<ManifestRow> = reader
        .deserialize()
        .collect::<Result<_, _>>()
        .with_context(|| format!("parsing {}", manifest.display()))?;
    let dir = manifest.parent().unwrap_or(Path::new("."));
    let jobs: Vec<(&ManifestRow, Method)> = entries
        .iter()
        .flat_map(|e| methods.iter().map(move |&m| (e, m)))
        .collect();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()?;
    let rows: Vec<Row> = pool.install(|| {
        jobs.par_iter()
            .map(|&(e, m)| run_one(dir, e, m, opts))
            .collect()
    });

    let mut best: HashMap<&str, Ratio> = HashMap::new();
    for r in &rows {
        if let Some(p) = r.phi {
            best.entry(&r.instance)
                .and_modify(|b| *b = (*b).min(p))
                .or_insert(p);
        }
    }
    let distance = |r: &Row| r.phi.map(|p| p - best[r.instance.as_str()]);

    let sink: Box<dyn std::io::Write> = match out {
        Some(p) => {
            Box::new(std::fs::File::create(p).with_context(|| format!("creating {}", p.display()))?)
        }
        None => Box::new(std::io::stdout()),
    };
    let mut w = csv::Writer::from_writer(sink);
    w.write_record(HEADER)?;
    let opt = |v: Option<String>| v.unwrap_or_default();
    for r in &rows {
        w.write_record([
            r.instance.clone(),
            r.class.clone(),
            r.n.to_string(),
            r.method.name().into(),
            r.status.clone(),
            opt(r.phi.map(|p| tdm_core::ratio::format_ratio(&p))),
            opt(r.bound.map(|b| format!("{b:.6}"))),
            opt(distance(r).map(|d| format!("{:.6}", tdm_core::ratio::to_f64(&d)))),
            format!("{:.3}", r.runtime_ms),
            String::new(),
        ])?;
    }
    if !rows.is_empty() {
        for &m in methods {
            let mine: Vec<&Row> = rows.iter().filter(|r| r.method == m).collect();
            let failures = mine.iter().filter(|r| r.phi.is_none()).count();
            let dists: Vec<f64> = mine
                .iter()
                .filter_map(|r| distance(r))
                .map(|d| tdm_core::ratio::to_f64(&d))
                .collect();
            let mean = (!dists.is_empty()).then(|| dists.iter().sum::<f64>() / dists.len() as f64);
            let runtime = mine.iter().map(|r| r.runtime_ms).sum::<f64>() / mine.len().max(1) as f64;
            w.write_record([
                "summary".into(),
                String::new(),
                String::new(),
                m.name().into(),
                String::new(),
                String::new(),
                String::new(),
                opt(mean.map(|d| format!("{d:.6}"))),
                format!("{runtime:.3}"),
                failures.to_string(),
            ])?;
        }
    }
    w.flush()?;
    Ok(0)
}
