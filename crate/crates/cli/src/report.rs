use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Pnp,
    Spectral,
    Wf,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Pnp => "pnp",
            Method::Spectral => "spectral",
            Method::Wf => "wf",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Summary {
    pub mean: f64,
    pub median: f64,
    pub min: f64,
    pub max: f64,
}

impl Summary {
    /// `None` for an empty slice.
    pub fn of(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut sorted = values.to_vec();
        sorted.sort_by(f64::total_cmp);
        let n = sorted.len();
        let median = if n % 2 == 1 {
            sorted[n / 2]
        } else {
            0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
        };
        Some(Self {
            mean: values.iter().sum::<f64>() / n as f64,
            median,
            min: sorted[0],
            max: sorted[n - 1],
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitMetrics {
    pub split: String,
    pub snr_db: Option<f64>,
    pub count: usize,
    /// Phase-aligned error between unit-norm estimate and unit-norm truth,
    /// divided by the pixel count.
    pub mse: Vec<f64>,
    pub mse_summary: Summary,
    /// Unrolled stages, power iterations or gradient steps per sample.
    pub iterations: Vec<usize>,
    /// Power iterations spent on the WF initializer; empty for other methods.
    pub init_power_iterations: Vec<usize>,
    /// `ρ̂ᴴδ(ρ̂ρ̂ᴴ)ρ̂` for the unit-norm truth `ρ̂`.
    pub delta: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub method: Method,
    pub pixel_count: usize,
    pub measurement_count: usize,
    pub splits: Vec<SplitMetrics>,
}

impl MetricsReport {
    pub fn split(&self, name: &str) -> Option<&SplitMetrics> {
        self.splits.iter().find(|s| s.split == name)
    }

    pub fn all_finite(&self) -> bool {
        self.splits.iter().all(|s| {
            s.mse.iter().all(|x| x.is_finite())
                && [s.mse_summary, s.delta]
                    .iter()
                    .all(|m| [m.mean, m.median, m.min, m.max].iter().all(|x| x.is_finite()))
        })
    }
}

/// Wall-clock seconds, kept apart from [`MetricsReport`] so the report stays
/// byte-identical across runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimingReport {
    pub method: Method,
    pub splits: Vec<SplitTiming>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitTiming {
    pub split: String,
    pub seconds: Vec<f64>,
    pub summary: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SampleDiagnostics {
    /// `ρ*ᴴδ(ρ*ρ*ᴴ)ρ*` with the stored scene amplitude.
    pub delta: f64,
    /// Relative residual of the `J_S` expansion at `ρ*`.
    pub residual_at_truth: f64,
    /// Relative residual at a seeded random probe vector.
    pub residual_at_probe: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitDiagnostics {
    pub split: String,
    pub samples: Vec<SampleDiagnostics>,
    pub max_residual: f64,
    pub delta: Summary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub pixel_count: usize,
    pub measurement_count: usize,
    pub splits: Vec<SplitDiagnostics>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_statistics() {
        let s = Summary::of(&[3.0, 1.0, 2.0, 10.0]).unwrap();
        assert_eq!((s.mean, s.median, s.min, s.max), (4.0, 2.5, 1.0, 10.0));
        assert_eq!(Summary::of(&[5.0]).unwrap().median, 5.0);
        assert!(Summary::of(&[]).is_none());
    }
}
