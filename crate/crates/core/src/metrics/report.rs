use serde::{Deserialize, Serialize};

use super::structural::{conductance_mean, internal_density, modularity};
use super::supervised::{accuracy_matched, ari, nmi, AccMode};
use crate::error::Result;
use crate::graph::{Graph, Partition};

pub const CSV_HEADER: &str =
    "algorithm,dataset,seed,acc,acc_maj,nmi,ari,modularity,conductance_mean,internal_density,wall_ms";

/// Scores for one (algorithm, dataset, seed) run.
///
/// Undefined values are NaN; they serialize as `null` in JSON and as an empty
/// CSV field. `wall_ms` is only filled when timing was requested so that
/// reports stay byte-identical across repeated runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub algorithm: String,
    pub dataset: String,
    pub seed: u64,
    #[serde(deserialize_with = "nan_if_null")]
    pub acc: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub acc_maj: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub nmi: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub ari: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub modularity: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub conductance_mean: f64,
    #[serde(deserialize_with = "nan_if_null")]
    pub internal_density: f64,
    pub wall_ms: Option<f64>,
    pub num_clusters: usize,
    /// Names of metrics whose value is a convention for a degenerate input.
    pub degenerate: Vec<String>,
}

fn nan_if_null<'de, D: serde::Deserializer<'de>>(d: D) -> std::result::Result<f64, D::Error> {
    Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
}

/// Computes the full metric suite for `p` against ground truth `labels`.
pub fn evaluate(
    algorithm: &str,
    dataset: &str,
    seed: u64,
    g: &Graph,
    labels: &[usize],
    p: &Partition,
) -> Result<MetricsReport> {
    let yhat = p.assignment();
    let mut degenerate = Vec::new();
    let nmi = nmi(labels, yhat)?;
    if nmi.degenerate {
        degenerate.push("nmi".to_string());
    }
    let ari = if labels.len() >= 2 {
        ari(labels, yhat)?
    } else {
        super::Score { value: f64::NAN, degenerate: true }
    };
    if ari.degenerate {
        degenerate.push("ari".to_string());
    }
    let q = if g.num_edges() > 0 { modularity(g, p)? } else { f64::NAN };
    let density = internal_density(g, p)?;
    if density.degenerate {
        degenerate.push("internal_density".to_string());
    }
    Ok(MetricsReport {
        algorithm: algorithm.to_string(),
        dataset: dataset.to_string(),
        seed,
        acc: accuracy_matched(labels, yhat, AccMode::Assignment)?,
        acc_maj: accuracy_matched(labels, yhat, AccMode::Majority)?,
        nmi: nmi.value,
        ari: ari.value,
        modularity: q,
        conductance_mean: conductance_mean(g, p)?,
        internal_density: density.value,
        wall_ms: None,
        num_clusters: p.num_clusters(),
        degenerate,
    })
}

fn field(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.6}")
    } else {
        String::new()
    }
}

fn quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl MetricsReport {
    pub fn to_csv_row(&self) -> String {
        [
            quote(&self.algorithm),
            quote(&self.dataset),
            self.seed.to_string(),
            field(self.acc),
            field(self.acc_maj),
            field(self.nmi),
            field(self.ari),
            field(self.modularity),
            field(self.conductance_mean),
            field(self.internal_density),
            self.wall_ms.map(|w| format!("{w:.1}")).unwrap_or_default(),
        ]
        .join(",")
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("report fields are serializable")
    }

    /// Looks up a score column by its CSV name.
    pub fn get(&self, metric: &str) -> Option<f64> {
        Some(match metric {
            "acc" => self.acc,
            "acc_maj" => self.acc_maj,
            "nmi" => self.nmi,
            "ari" => self.ari,
            "modularity" => self.modularity,
            "conductance_mean" => self.conductance_mean,
            "internal_density" => self.internal_density,
            "wall_ms" => self.wall_ms?,
            _ => return None,
        })
    }
}
