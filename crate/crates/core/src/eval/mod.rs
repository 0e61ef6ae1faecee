//! Evaluation harnesses and the combined report format.

pub mod denoise;
pub mod metrics;
pub mod typing;

use std::fmt::Write as _;
use std::path::Path;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::represent::csv_field;

pub use denoise::{build_denoising_set, eval_denoising, make_noise_context, DenoiseConfig, DenoiseReport, DenoisingSet};
pub use metrics::{mean_reciprocal_rank, micro_f1, prf_from_counts, rank_of, Prf};
pub use typing::{
    best_threshold, eval_typing, featurize, load_typing_dataset, read_typing_dataset, train_typing, tune_thresholds,
    Mention, Split, TypeScore, TypingDataset, TypingHyper, TypingModel, TypingReport,
};

/// Everything one evaluation run produced, with the configuration it ran under.
#[derive(Clone, Debug, Default, Serialize)]
pub struct EvalReport {
    pub config: serde_json::Map<String, serde_json::Value>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub denoising: Vec<DenoiseReport>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub typing: Option<TypingReport>,
}

impl EvalReport {
    pub fn with_config(config: &impl Serialize) -> Result<Self> {
        let value = serde_json::to_value(config).map_err(|e| Error::Config(e.to_string()))?;
        let config = match value {
            serde_json::Value::Object(map) => map,
            other => {
                let mut map = serde_json::Map::new();
                map.insert("value".into(), other);
                map
            }
        };
        Ok(EvalReport {
            config,
            ..Default::default()
        })
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, self.to_json() + "\n").map_err(|e| Error::io(path, e))
    }

    /// `repr,mrr,pool_size,queries`
    pub fn denoising_csv(&self) -> String {
        let mut out = String::from("repr,mrr,pool_size,queries\n");
        for r in &self.denoising {
            let _ = writeln!(out, "{},{},{},{}", r.repr, r.mrr, r.pool_size, r.queries.len());
        }
        out
    }

    /// `repr,query,rank`
    pub fn ranks_csv(&self) -> String {
        let mut out = String::from("repr,query,rank\n");
        for r in &self.denoising {
            for (q, rank) in r.queries.iter().zip(&r.ranks) {
                let _ = writeln!(out, "{},{q},{rank}", r.repr);
            }
        }
        out
    }

    /// `label,threshold,precision,recall,f1`, last row `micro`.
    pub fn typing_csv(&self) -> String {
        let mut out = String::from("label,threshold,precision,recall,f1\n");
        if let Some(t) = &self.typing {
            for s in &t.per_type {
                let threshold = s.threshold.map_or("inf".to_string(), |v| v.to_string());
                let _ = writeln!(
                    out,
                    "{},{threshold},{},{},{}",
                    csv_field(&s.label),
                    s.prf.precision,
                    s.prf.recall,
                    s.prf.f1
                );
            }
            let _ = writeln!(out, "micro,,{},{},{}", t.micro.precision, t.micro.recall, t.micro.f1);
        }
        out
    }
}
