use std::io::Write;

use crate::env::{format_num, ActionEvaluation};
use crate::error::Result;
use crate::nn::QNetwork;

/// One row of the training log. Fields without data in the interval are `None`
/// and come out as empty CSV cells.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct MetricsRecord {
    pub step: u64,
    pub episodes: u64,
    pub updates: u64,
    /// Mean unscaled return of episodes finished in the interval.
    pub episode_return: Option<f64>,
    pub td_loss: Option<f64>,
    pub smooth_loss: Option<f64>,
    pub mean_q: Option<f64>,
    pub grad_norm: Option<f64>,
    pub evaluation: Option<ActionEvaluation>,
}

pub const METRICS_HEADER: [&str; 15] = [
    "step",
    "episodes",
    "updates",
    "episode_return",
    "td_loss",
    "smooth_loss",
    "mean_q",
    "grad_norm",
    "eval_mean_reward",
    "eval_std_reward",
    "coverage_top",
    "coverage_right",
    "coverage_bottom",
    "coverage_left",
    "coverage_sum",
];

impl MetricsRecord {
    pub fn fields(&self) -> Vec<String> {
        let opt = |x: Option<f64>| x.map(format_num).unwrap_or_default();
        let eval = self.evaluation.as_ref();
        let cov = eval.and_then(|e| e.coverage.as_ref());
        let mut out = vec![
            self.step.to_string(),
            self.episodes.to_string(),
            self.updates.to_string(),
            opt(self.episode_return),
            opt(self.td_loss),
            opt(self.smooth_loss),
            opt(self.mean_q),
            opt(self.grad_norm),
            opt(eval.map(|e| e.mean_reward)),
            opt(eval.map(|e| e.std_reward)),
        ];
        for k in 0..4 {
            out.push(opt(cov.map(|c| c.proportions[k])));
        }
        out.push(opt(cov.map(|c| c.sum)));
        out
    }
}

/// Receives the training log and checkpoint requests.
pub trait MetricsSink {
    fn record(&mut self, record: &MetricsRecord) -> Result<()>;

    fn checkpoint(&mut self, _step: u64, _critic: &QNetwork) -> Result<()> {
        Ok(())
    }
}

/// Discards everything.
#[derive(Debug, Default)]
pub struct NullSink;

impl MetricsSink for NullSink {
    fn record(&mut self, _record: &MetricsRecord) -> Result<()> {
        Ok(())
    }
}

impl MetricsSink for Vec<MetricsRecord> {
    fn record(&mut self, record: &MetricsRecord) -> Result<()> {
        self.push(record.clone());
        Ok(())
    }
}

/// Writes records as CSV, flushing after every row so an aborted run keeps its log.
pub struct CsvMetrics<W: Write> {
    writer: csv::Writer<W>,
}

impl<W: Write> CsvMetrics<W> {
    pub fn new(out: W) -> Result<Self> {
        let mut writer = csv::Writer::from_writer(out);
        writer.write_record(METRICS_HEADER)?;
        writer.flush()?;
        Ok(Self { writer })
    }

    pub fn into_inner(self) -> Result<W> {
        self.writer
            .into_inner()
            .map_err(|e| crate::Error::Io(std::io::Error::other(e.to_string())))
    }
}

impl<W: Write> MetricsSink for CsvMetrics<W> {
    fn record(&mut self, record: &MetricsRecord) -> Result<()> {
        self.writer.write_record(record.fields())?;
        self.writer.flush()?;
        Ok(())
    }
}
