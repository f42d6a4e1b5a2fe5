//! Run configuration: an optional JSON file, then command-line flags on top.

use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::Args;
use serde::{Deserialize, Serialize};
use walkability::analytics::{ClusterConfig, Linkage, RegressionConfig};
use walkability::features::PipelineConfig;
use walkability::simulator::FleetVariation;

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub network: Option<PathBuf>,
    pub inputs: Vec<String>,
    pub weather: Option<PathBuf>,
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
    pub pipeline: PipelineConfig,
    pub correlate: CorrelateConfig,
    pub cluster: ClusterConfig,
    pub regression: RegressionConfig,
    pub fleet: FleetVariation,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CorrelateConfig {
    /// Empty selects every numeric column of the table.
    pub features: Vec<String>,
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading config {}", path.display()))?;
        serde_json::from_str(&text).with_context(|| format!("parsing config {}", path.display()))
    }
}

/// Surface, matching and stop thresholds. Each flag overrides the
/// corresponding config value.
#[derive(Debug, Clone, Default, Args)]
pub struct ThresholdFlags {
    /// High-pass cutoff for irregularity events, Hz
    #[arg(long)]
    pub highpass_hz: Option<f64>,
    /// Low-pass cutoff for unevenness, Hz
    #[arg(long)]
    pub lowpass_hz: Option<f64>,
    /// Sliding RMS window, s
    #[arg(long)]
    pub rms_window_s: Option<f64>,
    /// Sliding RMS step, s
    #[arg(long)]
    pub rms_step_s: Option<f64>,
    /// Window RMS that fires an irregularity event, m/s^2
    #[arg(long)]
    pub event_threshold: Option<f64>,
    /// Speed floor for normalization, m/s
    #[arg(long)]
    pub v_floor: Option<f64>,
    /// Event clustering radius, m
    #[arg(long)]
    pub cluster_eps_m: Option<f64>,
    /// Minimum cluster extent, m
    #[arg(long)]
    pub min_extent_m: Option<f64>,
    /// Minimum moving share of samples for an unevenness value
    #[arg(long)]
    pub min_moving_fraction: Option<f64>,
    /// Map-matching gate, m
    #[arg(long)]
    pub gate_m: Option<f64>,
    /// Map-matching hysteresis, m
    #[arg(long)]
    pub hysteresis_m: Option<f64>,
    /// Speed below which the robot counts as stopped, m/s
    #[arg(long)]
    pub stop_threshold: Option<f64>,
    /// Minimum stop length, s
    #[arg(long)]
    pub min_dwell_s: Option<f64>,
    /// Share of the prism duration spent waiting above which a row is flagged
    #[arg(long)]
    pub wait_flag_fraction: Option<f64>,
}

fn set<T: Copy>(target: &mut T, v: Option<T>) {
    if let Some(v) = v {
        *target = v;
    }
}

impl ThresholdFlags {
    pub fn apply(&self, p: &mut PipelineConfig) -> anyhow::Result<()> {
        let s = &mut p.surface;
        set(&mut s.highpass_hz, self.highpass_hz);
        set(&mut s.lowpass_hz, self.lowpass_hz);
        set(&mut s.rms_window_s, self.rms_window_s);
        set(&mut s.rms_step_s, self.rms_step_s);
        set(&mut s.event_threshold, self.event_threshold);
        set(&mut s.v_floor, self.v_floor);
        set(&mut s.cluster_eps_m, self.cluster_eps_m);
        set(&mut s.min_extent_m, self.min_extent_m);
        set(&mut s.min_moving_fraction, self.min_moving_fraction);
        set(&mut p.split.matching.gate_m, self.gate_m);
        set(&mut p.split.matching.hysteresis_m, self.hysteresis_m);
        set(&mut p.stops.threshold_mps, self.stop_threshold);
        set(&mut p.stops.min_dwell_s, self.min_dwell_s);
        set(&mut p.wait_flag_fraction, self.wait_flag_fraction);
        validate(p)
    }
}

fn validate(p: &PipelineConfig) -> anyhow::Result<()> {
    if let Err(e) = p.surface.validate() {
        bail!("invalid surface setting: {e}");
    }
    let m = &p.split.matching;
    if !(m.gate_m > 0.0) || !(m.hysteresis_m >= 0.0) {
        bail!("gate_m must be positive and hysteresis_m non-negative");
    }
    if !(p.stops.threshold_mps > 0.0) || !(p.stops.min_dwell_s >= 0.0) {
        bail!("stop_threshold must be positive and min_dwell_s non-negative");
    }
    if !(0.0..=1.0).contains(&p.wait_flag_fraction) {
        bail!("wait_flag_fraction must lie in [0, 1]");
    }
    Ok(())
}

#[derive(Debug, Clone, Default, Args)]
pub struct ClusterFlags {
    /// Number of clusters
    #[arg(long)]
    pub k: Option<usize>,
    /// Linkage criterion
    #[arg(long, value_enum)]
    pub linkage: Option<LinkageArg>,
    /// Pooled-variance t-tests instead of Welch
    #[arg(long)]
    pub student: bool,
}

#[derive(Debug, Clone, Copy, clap::ValueEnum)]
pub enum LinkageArg {
    Single,
    Complete,
    Average,
    Ward,
}

impl ClusterFlags {
    pub fn apply(&self, c: &mut ClusterConfig) -> anyhow::Result<()> {
        set(&mut c.k, self.k);
        if let Some(l) = self.linkage {
            c.linkage = match l {
                LinkageArg::Single => Linkage::Single,
                LinkageArg::Complete => Linkage::Complete,
                LinkageArg::Average => Linkage::Average,
                LinkageArg::Ward => Linkage::Ward,
            };
        }
        c.student |= self.student;
        if c.k < 1 {
            bail!("k must be at least 1");
        }
        Ok(())
    }
}
