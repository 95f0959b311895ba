use cpiseq::knockoffs::{gaussian_knockoffs, knockoff_diagnostics, sample_sequential_knockoffs, SequentialConfig};
use cpiseq::seed::rng_from_seed;
use cpiseq::tabular::Dataset;
use serde_json::json;

use super::{load, write_json};
use crate::args::{required, DiagnosticsArgs, Mergeable};
use crate::error::{CliError, CliResult};
use crate::meta::Metadata;

pub fn run(args: DiagnosticsArgs) -> CliResult<()> {
    let args = args.resolve()?;
    let data_path = required(args.data.clone(), "data")?;
    let schema_path = required(args.schema.clone(), "schema")?;
    let seed = args.seed.unwrap_or(1);
    let threshold = args.threshold.unwrap_or(0.1);
    if !(threshold >= 0.0) {
        return Err(CliError::Usage(format!("--threshold must be non-negative, got {threshold}")));
    }
    let sampler = args.sampler.as_deref().unwrap_or("sequential").to_ascii_lowercase();

    let data = load(&data_path, &schema_path, args.target.as_deref())?;
    let mut rng = rng_from_seed(seed);
    let (frame, ko) = match sampler.as_str() {
        "sequential" | "seq" => {
            let ko = sample_sequential_knockoffs(&data.features, &SequentialConfig::default(), &mut rng)?;
            (data.features, ko)
        }
        "gaussian" | "gauss" => {
            let frame = if data.features.is_all_continuous() {
                data.features
            } else {
                Dataset::new(data.features, None)?.dummy()?.0.features
            };
            let ko = gaussian_knockoffs(&frame, &mut rng)?;
            (frame, ko)
        }
        other => return Err(CliError::Usage(format!("unknown sampler `{other}`"))),
    };
    let diag = knockoff_diagnostics(&frame, &ko.frame, threshold)?;
    let meta = Metadata::new("knockoff-diagnostics", Some(seed), &args);
    write_json(
        args.out.as_deref(),
        &json!({ "metadata": meta, "sampler": sampler, "diagnostics": diag }),
    )
}
