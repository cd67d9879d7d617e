//! Per-epoch training metrics in CSV form.

use std::fs::{File, OpenOptions};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::agents::EpisodeStat;
use crate::error::Result;

/// One CSV row. Optional columns are left empty when a phase does not
/// produce them.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsRow {
    pub epoch: usize,
    pub total_samples: u64,
    pub mean_return: f64,
    pub std_return: f64,
    pub success_rate: f64,
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub demo_loss: Option<f64>,
    pub disc_loss: Option<f64>,
    #[serde(rename = "mean_D_policy")]
    pub mean_d_policy: Option<f64>,
    #[serde(rename = "mean_D_demo")]
    pub mean_d_demo: Option<f64>,
}

fn clean(x: f64) -> f64 {
    // -0.0 and 0.0 print differently
    if x == 0.0 {
        0.0
    } else {
        x
    }
}

impl MetricsRow {
    /// Fill the return columns from the episodes finished during the epoch.
    /// With no finished episode the return columns are NaN.
    pub fn with_episodes(mut self, episodes: &[EpisodeStat]) -> Self {
        let n = episodes.len() as f64;
        if episodes.is_empty() {
            self.mean_return = f64::NAN;
            self.std_return = f64::NAN;
            self.success_rate = f64::NAN;
            return self;
        }
        let mean = episodes.iter().map(|e| e.total_return).sum::<f64>() / n;
        let var = episodes.iter().map(|e| (e.total_return - mean).powi(2)).sum::<f64>() / n;
        self.mean_return = mean;
        self.std_return = var.sqrt();
        self.success_rate = episodes.iter().filter(|e| e.success).count() as f64 / n;
        self
    }

    fn normalized(&self) -> Self {
        let o = |v: Option<f64>| v.map(clean);
        MetricsRow {
            mean_return: clean(self.mean_return),
            std_return: clean(self.std_return),
            success_rate: clean(self.success_rate),
            policy_loss: clean(self.policy_loss),
            value_loss: clean(self.value_loss),
            entropy: clean(self.entropy),
            demo_loss: o(self.demo_loss),
            disc_loss: o(self.disc_loss),
            mean_d_policy: o(self.mean_d_policy),
            mean_d_demo: o(self.mean_d_demo),
            ..self.clone()
        }
    }
}

/// Appends rows to a metrics CSV, writing the header only for a new file.
pub struct MetricsWriter {
    inner: csv::Writer<File>,
}

impl MetricsWriter {
    pub fn create(path: &Path) -> Result<Self> {
        let exists = path.exists() && std::fs::metadata(path)?.len() > 0;
        let file = OpenOptions::new().create(true).append(true).open(path)?;
        let inner = csv::WriterBuilder::new().has_headers(!exists).from_writer(file);
        Ok(MetricsWriter { inner })
    }

    /// Create the file with just a header row.
    pub fn create_empty(path: &Path) -> Result<()> {
        let mut w = csv::Writer::from_path(path)?;
        w.write_record([
            "epoch",
            "total_samples",
            "mean_return",
            "std_return",
            "success_rate",
            "policy_loss",
            "value_loss",
            "entropy",
            "demo_loss",
            "disc_loss",
            "mean_D_policy",
            "mean_D_demo",
        ])?;
        w.flush()?;
        Ok(())
    }

    pub fn write(&mut self, row: &MetricsRow) -> Result<()> {
        self.inner.serialize(row.normalized())?;
        self.inner.flush()?;
        Ok(())
    }
}

pub fn read_metrics(path: &Path) -> Result<Vec<MetricsRow>> {
    let mut r = csv::Reader::from_path(path)?;
    let mut rows = Vec::new();
    for rec in r.deserialize() {
        rows.push(rec?);
    }
    Ok(rows)
}

/// Keep only rows up to and including `epoch` (used when resuming a phase).
pub fn truncate_metrics(path: &Path, epoch: usize) -> Result<()> {
    if !path.exists() {
        return Ok(());
    }
    let rows: Vec<MetricsRow> = read_metrics(path)?.into_iter().filter(|r| r.epoch <= epoch).collect();
    MetricsWriter::create_empty(path)?;
    let mut w = MetricsWriter::create(path)?;
    for row in &rows {
        w.write(row)?;
    }
    Ok(())
}
