//! Sidewalk condition features from IMU, GNSS altitude, width and light.

mod condition;
mod filter;
mod irregularity;

pub use condition::{
    min_max_normalize, segment_frame_slope, segment_slope, travel_slope, unevenness_rms, width_features,
    WidthFeatures,
};
pub use filter::{default_padlen, highpass, lowpass, sample_rate, Biquad, FilterError, MIN_SAMPLES};
pub use irregularity::{
    cluster_events, detect_events, irregularity_index, sliding_rms, IrregularityCluster, IrregularityEvent,
    RmsWindow,
};

use serde::{Deserialize, Serialize};

use crate::model::TripLog;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceConfig {
    pub highpass_hz: f64,
    pub lowpass_hz: f64,
    pub rms_window_s: f64,
    pub rms_step_s: f64,
    /// Window RMS above which an irregularity event fires, m/s².
    pub event_threshold: f64,
    /// Speed floor for normalization, m/s.
    pub v_floor: f64,
    pub cluster_eps_m: f64,
    pub min_extent_m: f64,
    /// Traversals moving for less than this share of samples get no unevenness.
    pub min_moving_fraction: f64,
}

impl Default for SurfaceConfig {
    fn default() -> Self {
        Self {
            highpass_hz: 1.0,
            lowpass_hz: 3.0,
            rms_window_s: 1.0,
            rms_step_s: 0.1,
            event_threshold: 0.35,
            v_floor: 0.1,
            cluster_eps_m: 1.0,
            min_extent_m: 0.5,
            min_moving_fraction: 0.5,
        }
    }
}

impl SurfaceConfig {
    pub fn validate(&self) -> Result<(), String> {
        let positive = [
            ("highpass_hz", self.highpass_hz),
            ("lowpass_hz", self.lowpass_hz),
            ("rms_window_s", self.rms_window_s),
            ("rms_step_s", self.rms_step_s),
            ("event_threshold", self.event_threshold),
            ("v_floor", self.v_floor),
            ("cluster_eps_m", self.cluster_eps_m),
            ("min_extent_m", self.min_extent_m),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(format!("{name} must be positive, got {v}"));
            }
        }
        if !(0.0..=1.0).contains(&self.min_moving_fraction) {
            return Err(format!("min_moving_fraction must lie in [0, 1], got {}", self.min_moving_fraction));
        }
        Ok(())
    }
}

/// Trip-level filtered IMU channels, sliced per traversal afterwards.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct FilteredImu {
    pub t: Vec<f64>,
    pub low: Vec<f64>,
    pub rms: Vec<RmsWindow>,
}

/// Filters a whole trip's vertical acceleration once. Filtering the trip
/// rather than each traversal keeps edge transients away from segment ends.
pub fn filter_trip(trip: &TripLog, cfg: &SurfaceConfig) -> Result<FilteredImu, FilterError> {
    let t: Vec<f64> = trip.channels.imu.iter().map(|r| r.t).collect();
    let az: Vec<f64> = trip.channels.imu.iter().map(|r| r.az_mps2).collect();
    if az.len() < MIN_SAMPLES {
        return Err(FilterError::TooShort(az.len()));
    }
    let fs = sample_rate(&t).unwrap_or(0.0);
    let high = highpass(&az, cfg.highpass_hz, fs)?;
    let low = lowpass(&az, cfg.lowpass_hz, fs)?;
    let rms = sliding_rms(&t, &high, cfg.rms_window_s, cfg.rms_step_s);
    Ok(FilteredImu { t, low, rms })
}
