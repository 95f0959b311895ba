use std::io::Write;

use cpiseq::experiment::{data_oracle, generate_replicate};
use cpiseq::tabular::write_csv;
use serde_json::json;

use super::{create, scenario, write_json};
use crate::args::{required, Mergeable, SimulateArgs};
use crate::error::CliResult;
use crate::meta::Metadata;

pub fn run(args: SimulateArgs) -> CliResult<()> {
    let args = args.resolve()?;
    let dir = required(args.out_dir.clone(), "out-dir")?;
    let seed = args.seed.unwrap_or(1);
    let sc = scenario(&args.scenario)?;
    let data = generate_replicate(&sc, seed, 0)?;
    let meta = Metadata::new("simulate", Some(seed), &args).with_params(serde_json::to_value(&sc)?);
    std::fs::create_dir_all(&dir)?;

    let mut w = create(&dir.join("data.csv"))?;
    w.write_all(meta.comment_lines().as_bytes())?;
    write_csv(&data.dataset, &mut w)?;
    w.flush()?;

    write_json(
        Some(&dir.join("schema.json")),
        &json!({ "metadata": meta, "columns": data.dataset.full_schema() }),
    )?;

    let target = data.dataset.target()?;
    write_json(
        Some(&dir.join("truth.json")),
        &json!({
            "metadata": meta,
            "scenario": sc,
            "target": target.name,
            "truth": data.ground_truth(),
            "oracle": data_oracle(&data).ok(),
        }),
    )?;
    Ok(())
}
