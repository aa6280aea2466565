use std::fmt;
use std::time::Duration;

/// Outcome of a verification campaign.
///
/// Renders as `key: value` lines followed by the counterexamples (if any)
/// and a one-line summary.
#[derive(Debug, Clone, PartialEq)]
pub struct CampaignReport {
    pub campaign: String,
    pub n: usize,
    pub instances_checked: u64,
    /// Declared enumeration size for exhaustive campaigns.
    pub expected_instances: Option<u64>,
    /// Human-readable descriptions; a campaign passes iff this is empty.
    pub counterexamples: Vec<String>,
    pub min_stable: Option<usize>,
    pub mean_stable: Option<f64>,
    pub elapsed: Duration,
    pub config: Vec<(String, String)>,
    pub extra: Vec<(String, String)>,
}

impl CampaignReport {
    pub fn new(campaign: &str, n: usize) -> Self {
        CampaignReport {
            campaign: campaign.to_string(),
            n,
            instances_checked: 0,
            expected_instances: None,
            counterexamples: Vec::new(),
            min_stable: None,
            mean_stable: None,
            elapsed: Duration::ZERO,
            config: Vec::new(),
            extra: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.counterexamples.is_empty()
            && self
                .expected_instances
                .is_none_or(|e| e == self.instances_checked)
    }

    pub fn config(&mut self, key: &str, value: impl ToString) {
        self.config.push((key.to_string(), value.to_string()));
    }

    pub fn extra(&mut self, key: &str, value: impl ToString) {
        self.extra.push((key.to_string(), value.to_string()));
    }

    pub fn get_extra(&self, key: &str) -> Option<&str> {
        self.extra
            .iter()
            .find(|(k, _)| k == key)
            .map(|(_, v)| v.as_str())
    }

    /// Records min and mean over the given per-instance counts.
    pub fn set_stable_counts(&mut self, counts: impl IntoIterator<Item = usize>) {
        let (mut min, mut sum, mut len) = (usize::MAX, 0u64, 0u64);
        for c in counts {
            min = min.min(c);
            sum += c as u64;
            len += 1;
        }
        if len > 0 {
            self.min_stable = Some(min);
            self.mean_stable = Some(sum as f64 / len as f64);
        }
    }

    /// The report with its timing field cleared, for reproducibility checks.
    pub fn without_timing(&self) -> CampaignReport {
        CampaignReport {
            elapsed: Duration::ZERO,
            ..self.clone()
        }
    }
}

impl fmt::Display for CampaignReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "campaign: {}", self.campaign)?;
        writeln!(f, "n: {}", self.n)?;
        for (k, v) in &self.config {
            writeln!(f, "{k}: {v}")?;
        }
        writeln!(f, "instances_checked: {}", self.instances_checked)?;
        if let Some(e) = self.expected_instances {
            writeln!(f, "instances_expected: {e}")?;
        }
        if let Some(m) = self.min_stable {
            writeln!(f, "min_stable: {m}")?;
        }
        if let Some(m) = self.mean_stable {
            writeln!(f, "mean_stable: {m:.4}")?;
        }
        for (k, v) in &self.extra {
            writeln!(f, "{k}: {v}")?;
        }
        writeln!(f, "counterexamples: {}", self.counterexamples.len())?;
        writeln!(f, "elapsed_s: {:.3}", self.elapsed.as_secs_f64())?;
        writeln!(f, "result: {}", if self.passed() { "PASS" } else { "FAIL" })?;
        for (i, c) in self.counterexamples.iter().enumerate() {
            writeln!(f, "--- counterexample {}", i + 1)?;
            writeln!(f, "{}", c.trim_end())?;
        }
        if self.passed() {
            write!(
                f,
                "{} at n={}: {} instances, no counterexamples",
                self.campaign, self.n, self.instances_checked
            )
        } else {
            write!(
                f,
                "{} at n={}: {} counterexamples among {} instances",
                self.campaign,
                self.n,
                self.counterexamples.len(),
                self.instances_checked
            )
        }
    }
}
