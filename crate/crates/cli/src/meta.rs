use serde::Serialize;
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use cpiseq::experiment::AnalysisConfig;
use cpiseq::learners::LossKind;

/// Provenance block attached to every output.
#[derive(Debug, Clone, Serialize)]
pub struct Metadata {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub seed: Option<u64>,
    pub config_sha256: String,
    pub config: Value,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub method_params: Option<Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Hash of the compact JSON form of `config`.
pub fn config_hash(config: &impl Serialize) -> String {
    sha256_hex(&serde_json::to_vec(config).expect("serializable config"))
}

impl Metadata {
    pub fn new(command: &'static str, seed: Option<u64>, args: &impl Serialize) -> Self {
        Metadata {
            tool: "cpiseq",
            version: env!("CARGO_PKG_VERSION"),
            command,
            seed,
            config_sha256: config_hash(args),
            config: serde_json::to_value(args).expect("serializable config"),
            method_params: None,
        }
    }

    pub fn with_params(mut self, params: Value) -> Self {
        self.method_params = Some(params);
        self
    }

    /// `# key: value` lines for CSV headers.
    pub fn comment_lines(&self) -> String {
        let value = serde_json::to_value(self).expect("serializable metadata");
        let mut out = String::new();
        for (k, v) in value.as_object().expect("object") {
            let text = match v {
                Value::String(s) => s.clone(),
                other => other.to_string(),
            };
            out.push_str(&format!("# {k}: {text}\n"));
        }
        out
    }
}

/// Resolved settings of the importance methods.
pub fn method_params(cfg: &AnalysisConfig, loss: Option<LossKind>) -> Value {
    json!({
        "learner": cfg.learner.to_string(),
        "loss": loss.or(cfg.loss).map(|l| format!("{l:?}").to_lowercase()),
        "alpha": cfg.alpha,
        "train_fraction": cfg.train_fraction,
        "delta_orientation": cfg.orientation,
        "p_adjustment": "holm",
        "sequential": {
            "penalty": cfg.sequential.penalty,
            "multinomial": cfg.sequential.multinomial,
        },
        "gaussian": {
            "construction": "equicorrelated",
            "categorical_coding": "treatment",
        },
        "pfi_permutations": cfg.n_permutations,
        "auc_ties": "half",
    })
}
