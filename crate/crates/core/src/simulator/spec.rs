use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::SimError;
use crate::model::{Direction, SidewalkNetwork};

/// 2024-09-02T08:00:00Z
pub const DEFAULT_START: f64 = 1_725_264_000.0;

/// A synthetic trip: network route, robot behavior, planted surface and
/// pedestrian ground truth, sensor noise and rates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    pub trip_id: String,
    /// Network document path; `None` selects the built-in campus network.
    pub network: Option<String>,
    /// Epoch seconds of the first record.
    pub start_time: f64,
    /// Segments in driving order. Empty means every segment in document order.
    pub route: Vec<RouteLeg>,
    pub robot: RobotSpec,
    pub default_surface: SurfaceSpec,
    pub surfaces: BTreeMap<String, SurfaceSpec>,
    pub default_pedestrians: PedestrianSpec,
    pub pedestrians: BTreeMap<String, PedestrianSpec>,
    pub noise: NoiseSpec,
    pub rates: RateSpec,
    /// Store full pedestrian paths in the ground truth.
    pub record_ped_paths: bool,
    pub seed: u64,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        Self {
            trip_id: "trip-0001".into(),
            network: None,
            start_time: DEFAULT_START,
            route: Vec::new(),
            robot: RobotSpec::default(),
            default_surface: SurfaceSpec::default(),
            surfaces: BTreeMap::new(),
            default_pedestrians: PedestrianSpec::default(),
            pedestrians: BTreeMap::new(),
            noise: NoiseSpec::default(),
            rates: RateSpec::default(),
            record_ped_paths: false,
            seed: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RouteLeg {
    pub segment: String,
    /// Inferred from connectivity when omitted.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction: Option<Direction>,
}

impl RouteLeg {
    pub fn new(segment: impl Into<String>) -> Self {
        Self {
            segment: segment.into(),
            direction: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RobotSpec {
    pub target_speed_mps: f64,
    pub max_speed_mps: f64,
    /// Multiplies the target speed (battery derating).
    pub battery_scale: f64,
    /// Acceleration limit for ordinary speed changes.
    pub accel_mps2: f64,
    /// Braking for halts, and launching from standstill below 0.2 m/s.
    pub halt_accel_mps2: f64,
    /// Lateral offset from the centerline, positive to the left of travel.
    pub lateral_offset_m: f64,
    /// Stationary time before departure and after arrival.
    pub idle_s: f64,
    /// Drive the whole route at cruise speed: no launch, no final stop.
    pub constant_speed: bool,
    pub halts: Vec<HaltSpec>,
}

impl Default for RobotSpec {
    fn default() -> Self {
        Self {
            target_speed_mps: 1.2,
            max_speed_mps: 1.6,
            battery_scale: 1.0,
            accel_mps2: 0.5,
            halt_accel_mps2: 2.0,
            lateral_offset_m: 0.0,
            idle_s: 2.0,
            constant_speed: false,
            halts: Vec::new(),
        }
    }
}

impl RobotSpec {
    pub fn cruise_speed(&self) -> f64 {
        (self.target_speed_mps * self.battery_scale).min(self.max_speed_mps)
    }
}

/// A planned stop `at_m` meters into route leg `leg`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HaltSpec {
    pub leg: usize,
    pub at_m: f64,
    pub duration_s: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SurfaceSpec {
    pub bumps: Vec<BumpSpec>,
    /// Amplitude (m/s²) of a sinusoidal vertical acceleration.
    pub undulation_amp_mps2: f64,
    pub undulation_hz: f64,
    /// Rise over run along the segment's polyline direction.
    pub grade: f64,
    pub pinches: Vec<PinchSpec>,
    pub light_level: f64,
}

impl Default for SurfaceSpec {
    fn default() -> Self {
        Self {
            bumps: Vec::new(),
            undulation_amp_mps2: 0.0,
            undulation_hz: 0.2,
            grade: 0.0,
            pinches: Vec::new(),
            light_level: 0.7,
        }
    }
}

/// A surface defect at segment position `s_m`; `magnitude` is the peak
/// vertical acceleration of its damped response (m/s²).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpSpec {
    pub s_m: f64,
    pub magnitude: f64,
}

/// Walkable width reduced to `width_m` between two segment positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PinchSpec {
    pub from_m: f64,
    pub to_m: f64,
    pub width_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PedestrianSpec {
    /// Pedestrians per square meter of corridor.
    pub density: f64,
    pub speed_mean_mps: f64,
    pub speed_sd_mps: f64,
    /// Standard deviation of each walker's speed fluctuation around its own mean.
    pub jitter_sd_mps: f64,
    /// Share walking along the segment direction.
    pub forward_fraction: f64,
    /// Share weaving side to side instead of walking straight.
    pub zigzag_fraction: f64,
    pub zigzag_amp_m: f64,
    pub zigzag_period_s: f64,
    /// Speeds scale by `max(0.3, 1 - density / jam_density)` when set.
    pub jam_density: Option<f64>,
    /// Corridor width; defaults to the segment's nominal width.
    pub corridor_width_m: Option<f64>,
}

impl Default for PedestrianSpec {
    fn default() -> Self {
        Self {
            density: 0.0,
            speed_mean_mps: 1.3,
            speed_sd_mps: 0.2,
            jitter_sd_mps: 0.15,
            forward_fraction: 0.5,
            zigzag_fraction: 0.0,
            zigzag_amp_m: 0.6,
            zigzag_period_s: 4.0,
            jam_density: None,
            corridor_width_m: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NoiseSpec {
    pub gnss_sigma_m: f64,
    pub alt_sigma_m: f64,
    pub imu_sigma_mps2: f64,
    pub vel_sigma_mps: f64,
    pub heading_sigma_deg: f64,
    /// Width noise is `width_sigma_m + width_sigma_rel * width`.
    pub width_sigma_m: f64,
    pub width_sigma_rel: f64,
    pub light_sigma: f64,
    pub detection_sigma_m: f64,
    pub detection_dropout: f64,
    pub detection_range_m: f64,
}

impl Default for NoiseSpec {
    fn default() -> Self {
        Self {
            gnss_sigma_m: 0.05,
            alt_sigma_m: 0.1,
            imu_sigma_mps2: 0.1,
            vel_sigma_mps: 0.01,
            heading_sigma_deg: 1.0,
            width_sigma_m: 0.02,
            width_sigma_rel: 0.02,
            light_sigma: 0.02,
            detection_sigma_m: 0.05,
            detection_dropout: 0.05,
            detection_range_m: 12.0,
        }
    }
}

impl NoiseSpec {
    /// Noise-free sensors.
    pub fn zero() -> Self {
        Self {
            gnss_sigma_m: 0.0,
            alt_sigma_m: 0.0,
            imu_sigma_mps2: 0.0,
            vel_sigma_mps: 0.0,
            heading_sigma_deg: 0.0,
            width_sigma_m: 0.0,
            width_sigma_rel: 0.0,
            light_sigma: 0.0,
            detection_sigma_m: 0.0,
            detection_dropout: 0.0,
            ..Self::default()
        }
    }
}

/// Emission rates in Hz; zero disables a channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RateSpec {
    pub imu_hz: f64,
    pub vel_hz: f64,
    pub gnss_hz: f64,
    pub width_hz: f64,
    pub light_hz: f64,
    pub ped_hz: f64,
}

impl Default for RateSpec {
    fn default() -> Self {
        Self {
            imu_hz: 100.0,
            vel_hz: 10.0,
            gnss_hz: 10.0,
            width_hz: 1.0,
            light_hz: 1.0,
            ped_hz: 5.0,
        }
    }
}

impl ScenarioSpec {
    pub fn surface(&self, segment_id: &str) -> &SurfaceSpec {
        self.surfaces.get(segment_id).unwrap_or(&self.default_surface)
    }

    pub fn pedestrians_on(&self, segment_id: &str) -> &PedestrianSpec {
        self.pedestrians.get(segment_id).unwrap_or(&self.default_pedestrians)
    }

    /// Checks ranges and that every referenced segment exists.
    pub fn validate(&self, network: &SidewalkNetwork) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::Invalid(msg));
        let r = &self.robot;
        if !(r.target_speed_mps > 0.0) || !(r.max_speed_mps > 0.0) || !(r.battery_scale > 0.0) {
            return invalid("robot speeds and battery scale must be positive".into());
        }
        if !(r.accel_mps2 > 0.0) || !(r.halt_accel_mps2 > 0.0) || !(r.idle_s >= 0.0) {
            return invalid("robot accelerations must be positive and idle time non-negative".into());
        }
        let n = &self.noise;
        let sigmas = [
            n.gnss_sigma_m,
            n.alt_sigma_m,
            n.imu_sigma_mps2,
            n.vel_sigma_mps,
            n.heading_sigma_deg,
            n.width_sigma_m,
            n.width_sigma_rel,
            n.light_sigma,
            n.detection_sigma_m,
        ];
        if sigmas.iter().any(|s| !(*s >= 0.0)) {
            return invalid("noise levels must be non-negative".into());
        }
        if !(0.0..=1.0).contains(&n.detection_dropout) || !(n.detection_range_m > 0.0) {
            return invalid("detection dropout must lie in [0, 1] and range be positive".into());
        }
        let q = &self.rates;
        if [q.imu_hz, q.vel_hz, q.gnss_hz, q.width_hz, q.light_hz, q.ped_hz]
            .iter()
            .any(|h| !(*h >= 0.0))
        {
            return invalid("rates must be non-negative".into());
        }
        for id in self
            .route
            .iter()
            .map(|l| &l.segment)
            .chain(self.surfaces.keys())
            .chain(self.pedestrians.keys())
        {
            if network.index_of(id).is_none() {
                return Err(SimError::UnknownSegment(id.clone()));
            }
        }
        for p in std::iter::once(&self.default_pedestrians).chain(self.pedestrians.values()) {
            if !(p.density >= 0.0) || !(p.speed_mean_mps > 0.0) || !(p.speed_sd_mps >= 0.0) || !(p.jitter_sd_mps >= 0.0) {
                return invalid("pedestrian density and speed parameters out of range".into());
            }
            if !(0.0..=1.0).contains(&p.forward_fraction) || !(0.0..=1.0).contains(&p.zigzag_fraction) {
                return invalid("pedestrian fractions must lie in [0, 1]".into());
            }
            if p.jam_density.is_some_and(|j| !(j > 0.0)) || p.corridor_width_m.is_some_and(|w| !(w > 0.0)) {
                return invalid("jam density and corridor width must be positive".into());
            }
        }
        for s in std::iter::once(&self.default_surface).chain(self.surfaces.values()) {
            if s.bumps.iter().any(|b| !(b.magnitude >= 0.0)) || s.pinches.iter().any(|p| !(p.width_m >= 0.0)) {
                return invalid("bump magnitudes and pinch widths must be non-negative".into());
            }
        }
        Ok(())
    }
}
