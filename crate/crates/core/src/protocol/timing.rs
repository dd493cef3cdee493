use serde::{Deserialize, Serialize};

/// Timestamps of one annotated instance: when the image appeared and when
/// each click landed, in milliseconds.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct InstanceTiming {
    pub shown_ms: u64,
    pub clicks_ms: Vec<u64>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub instances: usize,
    /// Instances without four clicks, left out of every mean.
    pub incomplete: usize,
    /// Image shown to fourth click.
    pub mean_total_s: f64,
    /// Image shown to first click.
    pub mean_first_click_s: f64,
    /// Mean gap between consecutive clicks two to four.
    pub mean_later_click_s: f64,
    pub total_hours: f64,
    pub batches: usize,
    pub cost: f64,
}

/// Aggregates instance timings. Cost is `ceil(instances / batch_size)`
/// batches at `pay_per_batch` each.
pub fn timing_report(instances: &[InstanceTiming], batch_size: usize, pay_per_batch: f64) -> TimingReport {
    let complete: Vec<&InstanceTiming> = instances.iter().filter(|i| i.clicks_ms.len() == 4).collect();
    let n = complete.len();
    if n == 0 {
        return TimingReport {
            incomplete: instances.len(),
            ..TimingReport::default()
        };
    }
    let s = |ms: u64| ms as f64 / 1000.0;
    let mut total = 0.0;
    let mut first = 0.0;
    let mut later = 0.0;
    for i in &complete {
        let c = &i.clicks_ms;
        total += s(c[3].saturating_sub(i.shown_ms));
        first += s(c[0].saturating_sub(i.shown_ms));
        later += s(c[3].saturating_sub(c[0])) / 3.0;
    }
    let batches = n.div_ceil(batch_size.max(1));
    TimingReport {
        instances: n,
        incomplete: instances.len() - n,
        mean_total_s: total / n as f64,
        mean_first_click_s: first / n as f64,
        mean_later_click_s: later / n as f64,
        total_hours: total / 3600.0,
        batches,
        cost: batches as f64 * pay_per_batch,
    }
}
