use std::collections::{BTreeMap, BTreeSet};
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, Write};
use std::path::{Path, PathBuf};

use cpiseq::evalmetrics::{aggregate, write_summary_csv, AggregateOptions, ReplicateOutcome};
use cpiseq::experiment::{run_replicate, Method};
use cpiseq::par::{map_slice, with_workers};
use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{analysis_config, create, scenario, DEFAULT_N};
use crate::args::{required, BenchmarkArgs, Mergeable};
use crate::error::{CliError, CliResult};
use crate::meta::{config_hash, method_params, Metadata};

const HASH_KEY: &str = "# replicate_config_sha256: ";

/// One line of the per-replicate file.
#[derive(Debug, Serialize, Deserialize)]
struct RawRow {
    scenario: String,
    n: usize,
    method: String,
    replicate: u64,
    feature: String,
    score: f64,
    p_value: Option<f64>,
    relevant: bool,
    validation: Option<f64>,
    oracle: Option<f64>,
}

fn rows_of(o: &ReplicateOutcome) -> impl Iterator<Item = RawRow> + '_ {
    (0..o.features.len()).map(move |j| RawRow {
        scenario: o.scenario.clone(),
        n: o.n,
        method: o.method.clone(),
        replicate: o.replicate,
        feature: o.features[j].clone(),
        score: o.scores[j],
        p_value: o.p_values.as_ref().map(|p| p[j]),
        relevant: o.relevant[j],
        validation: o.validation,
        oracle: o.oracle,
    })
}

fn stored_hash(path: &Path) -> CliResult<Option<String>> {
    let reader = BufReader::new(File::open(path)?);
    for line in reader.lines() {
        let line = line?;
        if let Some(h) = line.strip_prefix(HASH_KEY) {
            return Ok(Some(h.trim().to_string()));
        }
        if !line.starts_with('#') {
            break;
        }
    }
    Ok(None)
}

fn read_raw(path: &Path) -> CliResult<Vec<RawRow>> {
    let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_path(path)?;
    let rows = rdr.deserialize().collect::<Result<Vec<RawRow>, _>>()?;
    Ok(rows)
}

/// Rebuilds outcomes in (n, method, replicate) order, features in file order.
fn outcomes(rows: Vec<RawRow>) -> Vec<ReplicateOutcome> {
    let mut map: BTreeMap<(usize, String, u64), ReplicateOutcome> = BTreeMap::new();
    for r in rows {
        let o = map
            .entry((r.n, r.method.clone(), r.replicate))
            .or_insert_with(|| ReplicateOutcome {
                scenario: r.scenario.clone(),
                n: r.n,
                method: r.method.clone(),
                replicate: r.replicate,
                features: Vec::new(),
                scores: Vec::new(),
                p_values: r.p_value.map(|_| Vec::new()),
                relevant: Vec::new(),
                validation: r.validation,
                oracle: r.oracle,
            });
        o.features.push(r.feature);
        o.scores.push(r.score);
        if let (Some(ps), Some(p)) = (o.p_values.as_mut(), r.p_value) {
            ps.push(p);
        }
        o.relevant.push(r.relevant);
    }
    map.into_values().collect()
}

pub fn run(args: BenchmarkArgs) -> CliResult<()> {
    let args = args.resolve()?;
    let out = required(args.out.clone(), "out")?;
    let raw = args.raw.clone().unwrap_or_else(|| {
        let mut p = out.clone().into_os_string();
        p.push(".raw.csv");
        PathBuf::from(p)
    });
    let seed = args.seed.unwrap_or(1);
    let replicates = args.replicates.unwrap_or(10);
    let workers = args.workers.unwrap_or(0);
    let methods: Vec<Method> = match &args.methods {
        Some(m) => m.iter().map(|s| s.parse()).collect::<Result<_, _>>()?,
        None => Method::ALL.to_vec(),
    };
    if methods.is_empty() || replicates == 0 {
        return Err(CliError::Usage("need at least one method and one replicate".into()));
    }
    let ns = match &args.n_list {
        Some(l) if !l.is_empty() => l.clone(),
        _ => vec![args.scenario.n.unwrap_or(DEFAULT_N)],
    };
    let base = scenario(&args.scenario)?;
    let scenarios = ns
        .iter()
        .map(|&n| {
            let s = base.with_n(n);
            s.validate().map(|_| s)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let cfg = analysis_config(&args.analysis)?;

    // Everything that determines a replicate's rows; sizes, counts and
    // worker settings may change between resumed runs.
    let identity = json!({
        "scenario": base.with_n(0),
        "methods": methods,
        "seed": seed,
        "analysis": args.analysis,
    });
    let hash = config_hash(&identity);
    let meta = Metadata::new("benchmark", Some(seed), &args).with_params(method_params(&cfg, None));

    let mut done: BTreeMap<(usize, u64), BTreeSet<String>> = BTreeMap::new();
    let resuming = raw.exists() && std::fs::metadata(&raw)?.len() > 0;
    if resuming {
        match stored_hash(&raw)? {
            Some(h) if h == hash => {}
            _ => {
                return Err(CliError::Usage(format!(
                    "{} was written with a different configuration; remove it or pick another --raw",
                    raw.display()
                )))
            }
        }
        for r in read_raw(&raw)? {
            done.entry((r.n, r.replicate)).or_default().insert(r.method);
        }
    }
    let names: BTreeSet<String> = methods.iter().map(|m| m.name().to_string()).collect();
    let todo: Vec<(usize, u64)> = scenarios
        .iter()
        .enumerate()
        .flat_map(|(i, _)| (0..replicates as u64).map(move |r| (i, r)))
        .filter(|&(i, r)| done.get(&(ns[i], r)).is_none_or(|m| !names.is_subset(m)))
        .collect();

    let file = if resuming {
        OpenOptions::new().append(true).open(&raw)?
    } else {
        let mut f = create(&raw)?.into_inner().map_err(|e| e.into_error())?;
        let mut head = meta.comment_lines();
        head.push_str(&format!("{HASH_KEY}{hash}\n"));
        f.write_all(head.as_bytes())?;
        f
    };
    let mut wtr = csv::WriterBuilder::new().has_headers(!resuming).from_writer(file);

    let chunk = with_workers(workers, cpiseq::par::current_workers).max(1);
    for batch in todo.chunks(chunk) {
        let results = with_workers(workers, || {
            map_slice(batch, |&(i, r)| run_replicate(&scenarios[i], &methods, &cfg, seed, r))
        });
        let mut first_err = None;
        for res in results {
            match res {
                Ok(outs) => {
                    for o in &outs {
                        for row in rows_of(o) {
                            wtr.serialize(row)?;
                        }
                    }
                }
                Err(e) => {
                    first_err.get_or_insert(e);
                }
            }
        }
        wtr.flush()?;
        if let Some(e) = first_err {
            return Err(e.into());
        }
    }
    drop(wtr);

    let wanted: BTreeSet<usize> = ns.iter().copied().collect();
    let rows: Vec<RawRow> = read_raw(&raw)?
        .into_iter()
        .filter(|r| wanted.contains(&r.n) && r.replicate < replicates as u64 && names.contains(&r.method))
        .collect();
    let opts = AggregateOptions {
        alpha: cfg.alpha,
        k: args.top_k,
    };
    let records = aggregate(&outcomes(rows), &opts)?;
    let mut w = create(&out)?;
    w.write_all(meta.comment_lines().as_bytes())?;
    write_summary_csv(&records, &mut w)?;
    w.flush()?;
    Ok(())
}
