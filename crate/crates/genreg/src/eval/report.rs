//! Per-image metric records with recomputable aggregates.

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct MetricRecord {
    pub id: usize,
    pub metric: String,
    pub value: f64,
}

#[derive(Debug, Clone, Default)]
pub struct MetricReport {
    pub records: Vec<MetricRecord>,
    /// Model checkpoint id, dataset id, seed.
    pub provenance: String,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Aggregates {
    pub count: usize,
    pub mean: f64,
    pub std: f64,
    pub median: f64,
}

impl MetricReport {
    pub fn new(provenance: impl Into<String>) -> Self {
        MetricReport {
            records: Vec::new(),
            provenance: provenance.into(),
        }
    }

    pub fn push(&mut self, id: usize, metric: impl Into<String>, value: f64) {
        self.records.push(MetricRecord {
            id,
            metric: metric.into(),
            value,
        });
    }

    pub fn values(&self, metric: &str) -> Vec<f64> {
        self.records
            .iter()
            .filter(|r| r.metric == metric)
            .map(|r| r.value)
            .collect()
    }

    /// Aggregates are always recomputed from the records, never cached.
    pub fn aggregate(&self, metric: &str) -> Result<Aggregates> {
        let values = self.values(metric);
        if values.is_empty() {
            return Err(Error::InvalidArgument(format!(
                "no records for metric '{metric}'"
            )));
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
        let mut sorted = values.clone();
        sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite metric values"));
        let median = if sorted.len() % 2 == 1 {
            sorted[sorted.len() / 2]
        } else {
            0.5 * (sorted[sorted.len() / 2 - 1] + sorted[sorted.len() / 2])
        };
        Ok(Aggregates {
            count: values.len(),
            mean,
            std: var.sqrt(),
            median,
        })
    }

    /// Deterministic CSV: records in insertion order, then one aggregate
    /// row per metric in name order.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("id,metric,value\n");
        for r in &self.records {
            out.push_str(&format!("{},{},{}\n", r.id, r.metric, fmt_float(r.value)));
        }
        let mut names: Vec<&str> = self.records.iter().map(|r| r.metric.as_str()).collect();
        names.sort_unstable();
        names.dedup();
        for name in names {
            if let Ok(a) = self.aggregate(name) {
                out.push_str(&format!(
                    "agg,{name}.mean,{}\nagg,{name}.std,{}\nagg,{name}.median,{}\n",
                    fmt_float(a.mean),
                    fmt_float(a.std),
                    fmt_float(a.median)
                ));
            }
        }
        out
    }
}

/// Shortest round-trip decimal form; stable across runs for identical
/// bit patterns.
pub fn fmt_float(v: f64) -> String {
    format!("{v}")
}
