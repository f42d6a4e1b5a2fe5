//! Synthetic trips with planted ground truth.
//!
//! Every stochastic channel draws from its own ChaCha stream of the trip
//! seed, so turning one channel off leaves the others unchanged.

pub mod campus;
mod fleet;
pub mod peds;
pub mod robot;
mod spec;

pub use campus::{campus_network, campus_network_document, campus_scenario};
pub use fleet::{synthetic_weather, 
    fleet, fleet_specs, write_fleet, write_trip_output, FleetSpec, FleetVariation, Manifest,
    ManifestEntry,
};
pub use spec::{
    BumpSpec, HaltSpec, NoiseSpec, PedestrianSpec, PinchSpec, RateSpec, RobotSpec, RouteLeg,
    ScenarioSpec, SurfaceSpec, DEFAULT_START,
};

use std::f64::consts::TAU;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geo::Vec2;
use crate::model::{
    epoch_to_utc, Channels, Direction, GnssRecord, ImuRecord, LightRecord, NetworkError,
    PedRecord, SensorRecord, SidewalkNetwork, TripLog, VelocityRecord, WidthRecord,
};
use robot::{drive, leg_at, pose_at, resolve_route, route_halts, Leg, Motion};

pub const GRAVITY: f64 = 9.80665;
/// Integration step of the robot controller.
const MOTION_DT: f64 = 0.01;
/// Bump response: damped oscillation at this frequency lasting `BUMP_SPAN_S`.
pub const BUMP_HZ: f64 = 8.0;
pub const BUMP_SPAN_S: f64 = 0.3;
const BUMP_TAU_S: f64 = 0.09;
/// Undulation fades in and out over this distance at leg ends.
const UNDULATION_RAMP_M: f64 = 2.0;
/// Effective width is sensed this far ahead.
const WIDTH_LOOKAHEAD_M: f64 = 2.0;
const BASE_ALTITUDE_M: f64 = 30.0;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    Invalid(String),
    #[error("scenario references unknown segment `{0}`")]
    UnknownSegment(String),
    #[error("route jumps {gap_m:.1} m from `{from}` to `{to}`")]
    Disconnected { from: String, to: String, gap_m: f64 },
    #[error(transparent)]
    Network(#[from] NetworkError),
    #[error("malformed scenario: {0}")]
    Parse(#[from] serde_json::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BumpTruth {
    pub s_m: f64,
    pub magnitude: f64,
    pub t_hit: f64,
}

/// Planted facts about one leg of the route.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LegTruth {
    pub segment_id: String,
    pub direction: Direction,
    pub t_enter: f64,
    pub t_exit: f64,
    pub odometry_m: f64,
    /// Grade along the segment polyline direction.
    pub grade: f64,
    /// Grade in the direction of travel.
    pub travel_slope: f64,
    pub undulation_amp_mps2: f64,
    pub bumps: Vec<BumpTruth>,
    pub density: f64,
    pub corridor_width_m: f64,
    pub walkers: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PedSample {
    pub t: f64,
    /// Planar position in the network frame.
    pub x: f64,
    pub y: f64,
    pub s_m: f64,
    pub d_m: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PedTruth {
    pub ped_id: String,
    pub leg: usize,
    pub samples: Vec<PedSample>,
}

impl PedTruth {
    pub fn at(&self, t: f64) -> Option<PedSample> {
        let i = self.samples.partition_point(|p| p.t < t);
        if i < self.samples.len() && self.samples[i].t == t {
            return Some(self.samples[i]);
        }
        if i == 0 || i >= self.samples.len() {
            return None;
        }
        let (a, b) = (self.samples[i - 1], self.samples[i]);
        let w = (t - a.t) / (b.t - a.t);
        let l = |x: f64, y: f64| x + w * (y - x);
        Some(PedSample {
            t,
            x: l(a.x, b.x),
            y: l(a.y, b.y),
            s_m: l(a.s_m, b.s_m),
            d_m: l(a.d_m, b.d_m),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HaltTruth {
    pub t_start: f64,
    pub t_end: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroundTruth {
    pub trip_id: String,
    pub seed: u64,
    pub t_start: f64,
    pub t_end: f64,
    pub cruise_speed_mps: f64,
    pub peak_speed_mps: f64,
    pub legs: Vec<LegTruth>,
    pub halts: Vec<HaltTruth>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub pedestrians: Vec<PedTruth>,
}

#[derive(Debug, Clone)]
pub struct SimOutput {
    pub trip: TripLog,
    pub truth: GroundTruth,
}

mod stream {
    pub const GNSS: u64 = 1;
    pub const VELOCITY: u64 = 2;
    pub const IMU: u64 = 3;
    pub const WIDTH: u64 = 4;
    pub const LIGHT: u64 = 5;
    pub const POPULATION: u64 = 6;
    pub const DETECTION: u64 = 7;
}

fn substream(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

fn gauss<R: Rng>(rng: &mut R, sigma: f64) -> f64 {
    if sigma == 0.0 {
        return 0.0;
    }
    let z: f64 = StandardNormal.sample(rng);
    sigma * z
}

/// Timestamps rounded to microseconds so the log prints compactly.
fn stamp(t: f64) -> f64 {
    (t * 1e6).round() / 1e6
}

/// Sample times `t0 + k / hz` covering `[t0, t1]`.
fn clock(t0: f64, t1: f64, hz: f64) -> impl Iterator<Item = f64> {
    let n = if hz > 0.0 { ((t1 - t0) * hz + 1e-9).floor() as usize + 1 } else { 0 };
    (0..n).map(move |k| stamp(t0 + k as f64 / hz))
}

struct Route<'a> {
    net: &'a SidewalkNetwork,
    spec: &'a ScenarioSpec,
    legs: Vec<Leg>,
    motion: Motion,
    /// Altitude at each leg start.
    alt_entry: Vec<f64>,
}

impl Route<'_> {
    fn leg_slope(&self, li: usize) -> (f64, f64) {
        let leg = &self.legs[li];
        let grade = self.spec.surface(&self.net.segment(leg.segment).id).grade;
        let travel = match leg.direction {
            Direction::Forward => grade,
            Direction::Reverse => -grade,
        };
        (grade, travel)
    }

    fn altitude(&self, progress: f64) -> f64 {
        let li = leg_at(&self.legs, progress);
        let p = (progress - self.legs[li].start_m).clamp(0.0, self.legs[li].length_m);
        self.alt_entry[li] + self.leg_slope(li).1 * p
    }

    fn undulation(&self, progress: f64, t: f64) -> f64 {
        let li = leg_at(&self.legs, progress);
        let leg = &self.legs[li];
        let surf = self.spec.surface(&self.net.segment(leg.segment).id);
        if surf.undulation_amp_mps2 == 0.0 {
            return 0.0;
        }
        let p = progress - leg.start_m;
        let ramp = (p.min(leg.length_m - p) / UNDULATION_RAMP_M).clamp(0.0, 1.0);
        ramp * surf.undulation_amp_mps2 * (TAU * surf.undulation_hz * (t - self.motion.t0)).sin()
    }

    fn t_enter(&self, li: usize) -> f64 {
        if li == 0 {
            self.motion.t0
        } else {
            self.motion.time_at(self.legs[li].start_m)
        }
    }

    fn t_exit(&self, li: usize) -> f64 {
        if li + 1 == self.legs.len() {
            self.motion.t_end()
        } else {
            self.motion.time_at(self.legs[li].end_m())
        }
    }
}

/// Bump response at time `dt` after the wheel hits the defect.
pub fn bump_response(magnitude: f64, dt: f64) -> f64 {
    if !(0.0..BUMP_SPAN_S).contains(&dt) {
        return 0.0;
    }
    magnitude * (-dt / BUMP_TAU_S).exp() * (TAU * BUMP_HZ * dt).sin()
}

/// Simulates one trip over `network`.
pub fn generate(spec: &ScenarioSpec, network: &SidewalkNetwork) -> Result<SimOutput, SimError> {
    spec.validate(network)?;
    let legs = resolve_route(network, &spec.route)?;
    let halts = route_halts(&legs, &spec.robot)?;
    let total = legs.last().map_or(0.0, Leg::end_m);
    let motion = drive(&spec.robot, total, &halts, spec.start_time, MOTION_DT);

    let mut alt_entry = Vec::with_capacity(legs.len());
    let mut alt = BASE_ALTITUDE_M;
    for leg in &legs {
        alt_entry.push(alt);
        let grade = spec.surface(&network.segment(leg.segment).id).grade;
        alt += match leg.direction {
            Direction::Forward => grade,
            Direction::Reverse => -grade,
        } * leg.length_m;
    }
    let route = Route {
        net: network,
        spec,
        legs,
        motion,
        alt_entry,
    };
    let (t0, t1) = (route.motion.t0, route.motion.t_end());
    let frame = network.frame();
    let noise = &spec.noise;
    let rates = &spec.rates;
    let offset = spec.robot.lateral_offset_m;
    let mut ch = Channels::default();

    let mut rng = substream(spec.seed, stream::GNSS);
    for t in clock(t0, t1, rates.gnss_hz) {
        let p = route.motion.progress_at(t);
        let pose = pose_at(network, &route.legs, p, offset);
        let pos = pose.pos.add(Vec2::new(gauss(&mut rng, noise.gnss_sigma_m), gauss(&mut rng, noise.gnss_sigma_m)));
        let g = frame.to_geo(pos);
        let alt = route.altitude(p) + gauss(&mut rng, noise.alt_sigma_m);
        ch.push(SensorRecord::Gnss(GnssRecord {
            t,
            lat: g.lat,
            lon: g.lon,
            alt_m: Some(alt),
        }));
    }

    let mut rng = substream(spec.seed, stream::VELOCITY);
    for t in clock(t0, t1, rates.vel_hz) {
        let p = route.motion.progress_at(t);
        let pose = pose_at(network, &route.legs, p, offset);
        let v = (route.motion.speed_at(t) + gauss(&mut rng, noise.vel_sigma_mps)).max(0.0);
        let heading = (pose.heading_deg + gauss(&mut rng, noise.heading_sigma_deg)).rem_euclid(360.0);
        ch.push(SensorRecord::Velocity(VelocityRecord {
            t,
            v_mps: v,
            heading_deg: Some(heading),
        }));
    }

    let mut leg_truth: Vec<LegTruth> = Vec::with_capacity(route.legs.len());
    let mut hits: Vec<(f64, f64)> = Vec::new();
    for (li, leg) in route.legs.iter().enumerate() {
        let seg = network.segment(leg.segment);
        let surf = spec.surface(&seg.id);
        let mut bumps = Vec::new();
        for b in &surf.bumps {
            if !(0.0..=leg.length_m).contains(&b.s_m) {
                continue;
            }
            let p = leg.start_m
                + match leg.direction {
                    Direction::Forward => b.s_m,
                    Direction::Reverse => leg.length_m - b.s_m,
                };
            let t_hit = route.motion.time_at(p);
            hits.push((t_hit, b.magnitude));
            bumps.push(BumpTruth {
                s_m: b.s_m,
                magnitude: b.magnitude,
                t_hit,
            });
        }
        bumps.sort_by(|a, b| a.t_hit.total_cmp(&b.t_hit));
        let peds = spec.pedestrians_on(&seg.id);
        let (grade, travel_slope) = route.leg_slope(li);
        leg_truth.push(LegTruth {
            segment_id: seg.id.clone(),
            direction: leg.direction,
            t_enter: route.t_enter(li),
            t_exit: route.t_exit(li),
            odometry_m: leg.length_m,
            grade,
            travel_slope,
            undulation_amp_mps2: surf.undulation_amp_mps2,
            bumps,
            density: peds.density,
            corridor_width_m: peds.corridor_width_m.unwrap_or(seg.nominal_width_m),
            walkers: 0,
        });
    }
    hits.sort_by(|a, b| a.0.total_cmp(&b.0));

    let mut rng = substream(spec.seed, stream::IMU);
    for t in clock(t0, t1, rates.imu_hz) {
        let p = route.motion.progress_at(t);
        let li = leg_at(&route.legs, p);
        let slope = route.leg_slope(li).1;
        let mut az = GRAVITY / (1.0 + slope * slope).sqrt() + route.undulation(p, t);
        let first = hits.partition_point(|h| h.0 <= t - BUMP_SPAN_S);
        for &(t_hit, m) in hits[first..].iter().take_while(|h| h.0 <= t) {
            az += bump_response(m, t - t_hit);
        }
        az += gauss(&mut rng, noise.imu_sigma_mps2);
        ch.push(SensorRecord::Imu(ImuRecord { t, az_mps2: az }));
    }

    let mut rng = substream(spec.seed, stream::WIDTH);
    for t in clock(t0, t1, rates.width_hz) {
        let p = route.motion.progress_at(t);
        let li = leg_at(&route.legs, p);
        let leg = &route.legs[li];
        let seg = network.segment(leg.segment);
        let ahead = (p - leg.start_m + WIDTH_LOOKAHEAD_M).min(leg.length_m);
        let s_ahead = leg.s_of(ahead);
        let w = spec
            .surface(&seg.id)
            .pinches
            .iter()
            .filter(|q| (q.from_m..=q.to_m).contains(&s_ahead))
            .map(|q| q.width_m)
            .fold(seg.nominal_width_m, f64::min);
        let sigma = noise.width_sigma_m + noise.width_sigma_rel * w;
        ch.push(SensorRecord::Width(WidthRecord {
            t,
            w_m: (w + gauss(&mut rng, sigma)).max(0.0),
        }));
    }

    let mut rng = substream(spec.seed, stream::LIGHT);
    for t in clock(t0, t1, rates.light_hz) {
        let p = route.motion.progress_at(t);
        let seg = network.segment(route.legs[leg_at(&route.legs, p)].segment);
        let level = spec.surface(&seg.id).light_level + gauss(&mut rng, noise.light_sigma);
        ch.push(SensorRecord::Light(LightRecord {
            t,
            level: level.clamp(0.0, 1.0),
        }));
    }

    let mut pop_rng = substream(spec.seed, stream::POPULATION);
    let mut det_rng = substream(spec.seed, stream::DETECTION);
    let mut ped_truth = Vec::new();
    let ticks: Vec<f64> = clock(t0, t1, rates.ped_hz).collect();
    for (li, leg) in route.legs.iter().enumerate() {
        let seg = network.segment(leg.segment);
        let pspec = spec.pedestrians_on(&seg.id);
        if pspec.density <= 0.0 || ticks.is_empty() {
            continue;
        }
        let (ta, tb) = (leg_truth[li].t_enter, leg_truth[li].t_exit);
        let pop = peds::populate(&mut pop_rng, seg, pspec, ta, tb, &format!("L{li:02}-"));
        leg_truth[li].walkers = pop.walkers.len();
        let lo = ticks.partition_point(|&t| t < ta);
        let hi = ticks.partition_point(|&t| t < tb);
        let leg_ticks = &ticks[lo..hi];
        let mut paths: Vec<Vec<PedSample>> = if spec.record_ped_paths {
            vec![Vec::with_capacity(leg_ticks.len()); pop.walkers.len()]
        } else {
            Vec::new()
        };
        for &t in leg_ticks {
            let pose = pose_at(network, &route.legs, route.motion.progress_at(t), offset);
            let fwd = crate::geo::bearing_unit(pose.heading_deg);
            let left = Vec2::new(-fwd.y, fwd.x);
            for (i, w) in pop.walkers.iter().enumerate() {
                let Some((s, d)) = pop.position(i, t) else { continue };
                let pos = seg.point_at(s, d);
                if spec.record_ped_paths {
                    paths[i].push(PedSample {
                        t,
                        x: pos.x,
                        y: pos.y,
                        s_m: s,
                        d_m: d,
                    });
                }
                let rel = pos.sub(pose.pos);
                if rel.norm() > noise.detection_range_m {
                    continue;
                }
                if noise.detection_dropout > 0.0 && det_rng.random::<f64>() < noise.detection_dropout {
                    continue;
                }
                ch.push(SensorRecord::Ped(PedRecord {
                    t,
                    ped_id: w.id.clone(),
                    x_m: rel.dot(fwd) + gauss(&mut det_rng, noise.detection_sigma_m),
                    y_m: rel.dot(left) + gauss(&mut det_rng, noise.detection_sigma_m),
                }));
            }
        }
        for (w, samples) in pop.walkers.iter().zip(paths) {
            ped_truth.push(PedTruth {
                ped_id: w.id.clone(),
                leg: li,
                samples,
            });
        }
    }

    ch.sort();
    let truth = GroundTruth {
        trip_id: spec.trip_id.clone(),
        seed: spec.seed,
        t_start: t0,
        t_end: t1,
        cruise_speed_mps: spec.robot.cruise_speed(),
        peak_speed_mps: route.motion.speed.iter().copied().fold(0.0, f64::max),
        legs: leg_truth,
        halts: route
            .motion
            .halts
            .iter()
            .map(|&(t_start, t_end)| HaltTruth { t_start, t_end })
            .collect(),
        pedestrians: ped_truth,
    };
    let trip = TripLog {
        trip_id: spec.trip_id.clone(),
        start_time: epoch_to_utc(t0),
        channels: ch,
        meta: None,
    };
    Ok(SimOutput { trip, truth })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::ingest::{parse_trip, write_trip};
    use crate::model::Channel;

    fn quiet(route: &[&str]) -> ScenarioSpec {
        ScenarioSpec {
            route: route.iter().map(|s| RouteLeg::new(*s)).collect(),
            ..ScenarioSpec::default()
        }
    }

    fn log_bytes(spec: &ScenarioSpec) -> Vec<u8> {
        let out = generate(spec, &campus_network()).unwrap();
        let mut buf = Vec::new();
        write_trip(&out.trip, &mut buf).unwrap();
        buf
    }

    #[test]
    fn same_seed_same_bytes() {
        let mut spec = campus_scenario();
        spec.route = ["S7", "S8"].iter().map(|s| RouteLeg::new(*s)).collect();
        assert_eq!(log_bytes(&spec), log_bytes(&spec));
        let mut other = spec.clone();
        other.seed = 2;
        assert_ne!(log_bytes(&spec), log_bytes(&other));
    }

    #[test]
    fn disabling_a_channel_keeps_the_others() {
        let mut spec = campus_scenario();
        spec.route = vec![RouteLeg::new("S8")];
        let full = generate(&spec, &campus_network()).unwrap().trip;
        spec.rates.width_hz = 0.0;
        spec.rates.ped_hz = 0.0;
        let part = generate(&spec, &campus_network()).unwrap().trip;
        assert_eq!(part.channels.count(Channel::Width), 0);
        assert_eq!(part.channels.imu, full.channels.imu);
        assert_eq!(part.channels.gnss, full.channels.gnss);
        assert_eq!(part.channels.light, full.channels.light);
    }

    #[test]
    fn ten_minute_channel_counts() {
        // 720 m at 1.2 m/s plus idle time: a bit over ten minutes.
        let spec = ScenarioSpec {
            route: ["S1", "S2", "S3", "S4", "S5", "S6", "S7", "S8", "S9", "S9", "S8", "S7", "S6", "S5"]
                .iter()
                .map(|s| RouteLeg::new(*s))
                .collect(),
            ..ScenarioSpec::default()
        };
        let out = generate(&spec, &campus_network()).unwrap();
        let mut buf = Vec::new();
        write_trip(&out.trip, &mut buf).unwrap();
        let (_, report) = parse_trip("t", buf.as_slice()).unwrap();
        let span = out.truth.t_end - out.truth.t_start;
        for (ch, hz) in [(Channel::Imu, 100.0), (Channel::Gnss, 10.0), (Channel::Width, 1.0)] {
            let expected = (span * hz + 1e-9).floor() + 1.0;
            assert_eq!(report.count(ch) as f64, expected, "{ch:?}");
        }
        assert!(report.dropped.is_empty());
    }

    #[test]
    fn unknown_segment_is_rejected() {
        let spec = quiet(&["S1", "nope"]);
        assert!(matches!(generate(&spec, &campus_network()), Err(SimError::UnknownSegment(id)) if id == "nope"));
        let mut spec = quiet(&["S1"]);
        spec.surfaces.insert("S99".into(), SurfaceSpec::default());
        assert!(generate(&spec, &campus_network()).is_err());
    }

    #[test]
    fn truth_legs_tile_the_trip() {
        let mut spec = campus_scenario();
        spec.route.clear();
        let out = generate(&spec, &campus_network()).unwrap();
        let legs = &out.truth.legs;
        assert_eq!(legs.len(), 9);
        assert_eq!(legs[0].t_enter, out.truth.t_start);
        assert_eq!(legs[8].t_exit, out.truth.t_end);
        for w in legs.windows(2) {
            assert_eq!(w[0].t_exit, w[1].t_enter);
            assert!(w[0].t_exit > w[0].t_enter);
        }
        let s7 = legs.iter().find(|l| l.segment_id == "S7").unwrap();
        assert_eq!(s7.bumps.len(), 4);
        assert!(s7.bumps.iter().all(|b| b.t_hit > s7.t_enter && b.t_hit < s7.t_exit));
        assert!(out.truth.peak_speed_mps <= 1.6);
    }

    #[test]
    fn imu_is_gravity_plus_noise_on_flat_ground() {
        let spec = quiet(&["S2"]);
        let out = generate(&spec, &campus_network()).unwrap();
        let az: Vec<f64> = out.trip.channels.imu.iter().map(|r| r.az_mps2).collect();
        let n = az.len() as f64;
        let mean = az.iter().sum::<f64>() / n;
        let sd = (az.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt();
        assert!((mean - GRAVITY).abs() < 0.01);
        assert!((sd - 0.1).abs() < 0.01);
    }

    #[test]
    fn bump_response_shape() {
        assert_eq!(bump_response(5.0, -0.01), 0.0);
        assert_eq!(bump_response(5.0, BUMP_SPAN_S), 0.0);
        let peak = (0..300).map(|i| bump_response(5.0, i as f64 * 1e-3)).fold(0.0, f64::max);
        assert!(peak > 3.0 && peak < 5.0);
    }

    #[test]
    fn detections_are_in_range_and_in_robot_frame() {
        let mut spec = quiet(&["S8"]);
        spec.noise = NoiseSpec::zero();
        spec.record_ped_paths = true;
        spec.pedestrians.insert(
            "S8".into(),
            PedestrianSpec {
                density: 0.1,
                ..PedestrianSpec::default()
            },
        );
        let net = campus_network();
        let out = generate(&spec, &net).unwrap();
        let dets = &out.trip.channels.peds;
        assert!(!dets.is_empty());
        // S8 runs due east: forward is +x, left is +y.
        for d in dets.iter().take(200) {
            assert!(d.x_m.hypot(d.y_m) <= 12.0 + 1e-9);
            let truth = out.truth.pedestrians.iter().find(|p| p.ped_id == d.ped_id).unwrap();
            let s = truth.at(d.t).unwrap();
            let robot_x = s.x - d.x_m;
            let robot_y = s.y - d.y_m;
            let seg = net.by_id("S8").unwrap();
            let proj = seg.geometry().project(Vec2::new(robot_x, robot_y));
            assert!(proj.dist < 1e-6, "robot off centerline by {}", proj.dist);
        }
    }
}
