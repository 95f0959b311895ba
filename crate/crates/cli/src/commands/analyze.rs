use std::io::Write;

use cpiseq::experiment::{run_methods, Method};
use cpiseq::learners::{LossKind, Task};
use cpiseq::par::with_workers;
use serde_json::json;

use super::{analysis_config, create, load, parse_group, write_json};
use crate::args::{required, AnalyzeArgs, Mergeable};
use crate::error::CliResult;
use crate::meta::{method_params, Metadata};

pub fn run(args: AnalyzeArgs) -> CliResult<()> {
    let args = args.resolve()?;
    let data_path = required(args.data.clone(), "data")?;
    let schema_path = required(args.schema.clone(), "schema")?;
    let target = required(args.target.clone(), "target")?;
    let method: Method = args.method.as_deref().unwrap_or("cpi-seq").parse()?;
    let seed = args.seed.unwrap_or(1);
    let mut cfg = analysis_config(&args.analysis)?;
    if let Some(groups) = &args.groups {
        cfg.groups = Some(groups.iter().map(|g| parse_group(g)).collect::<CliResult<_>>()?);
    }

    let data = load(&data_path, &schema_path, Some(&target))?;
    let task = Task::of(data.target()?);
    let loss = cfg.loss.unwrap_or_else(|| LossKind::default_for(task));
    let meta = Metadata::new("analyze", Some(seed), &args).with_params(method_params(&cfg, Some(loss)));

    let workers = args.workers.unwrap_or(0);
    let out = with_workers(workers, || run_methods(&data, &[method], &cfg, seed))?
        .pop()
        .expect("one method requested");

    let results = match (&out.cpi, &out.fi) {
        (Some(c), _) => serde_json::to_value(c)?,
        (None, Some(f)) => serde_json::to_value(f)?,
        (None, None) => json!([]),
    };
    let doc = json!({
        "metadata": meta,
        "method": method.name(),
        "target": target,
        "n_rows": data.n_rows(),
        "performance": out.performance,
        "results": results,
    });
    write_json(args.out.as_deref(), &doc)?;

    if let Some(path) = &args.csv {
        let mut w = create(path)?;
        w.write_all(meta.comment_lines().as_bytes())?;
        let mut wtr = csv::Writer::from_writer(w);
        if let Some(rows) = &out.cpi {
            for r in rows {
                wtr.serialize(r)?;
            }
        } else if let Some(rows) = &out.fi {
            for r in rows {
                wtr.serialize(r)?;
            }
        }
        wtr.flush()?;
    }
    Ok(())
}
