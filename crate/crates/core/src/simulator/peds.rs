//! Planted pedestrian populations.
//!
//! Walkers are scattered as a Poisson process over a stretch extended far
//! enough beyond both segment ends that nobody enters or leaves the region
//! of interest during the window, so the corridor density stays at its
//! planted value throughout.

use rand::Rng;
use rand_distr::{Distribution, Normal, Poisson, StandardNormal};

use super::spec::PedestrianSpec;
use crate::geo::Vec2;
use crate::model::Segment;

/// Time step of the planted motion.
pub const PED_DT: f64 = 0.1;
/// Correlation time of a walker's speed fluctuation.
const JITTER_TAU_S: f64 = 2.0;
const MIN_SPEED_MPS: f64 = 0.2;
const CONGESTION_FLOOR: f64 = 0.3;

#[derive(Debug, Clone, PartialEq)]
pub struct Walker {
    pub id: String,
    /// Segment-frame positions `(s, d)` every `PED_DT` from the population's `t0`.
    pub track: Vec<(f64, f64)>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub t0: f64,
    pub corridor_width_m: f64,
    pub density: f64,
    pub walkers: Vec<Walker>,
}

impl Population {
    fn steps(&self) -> usize {
        self.walkers.first().map_or(0, |w| w.track.len())
    }

    /// Segment-frame position of walker `i` at time `t`, `None` outside the window.
    pub fn position(&self, i: usize, t: f64) -> Option<(f64, f64)> {
        let tr = &self.walkers[i].track;
        let u = (t - self.t0) / PED_DT;
        if u < -1e-9 || u > (tr.len() - 1) as f64 + 1e-9 {
            return None;
        }
        let u = u.clamp(0.0, (tr.len() - 1) as f64);
        let k = (u.floor() as usize).min(tr.len().saturating_sub(2));
        let w = u - k as f64;
        let (a, b) = (tr[k], tr[(k + 1).min(tr.len() - 1)]);
        Some((a.0 + w * (b.0 - a.0), a.1 + w * (b.1 - a.1)))
    }

    pub fn planar(&self, segment: &Segment, i: usize, t: f64) -> Option<Vec2> {
        self.position(i, t).map(|(s, d)| segment.point_at(s, d))
    }

    pub fn t_end(&self) -> f64 {
        self.t0 + self.steps().saturating_sub(1) as f64 * PED_DT
    }
}

/// Effective free-flow speed factor for a planted density.
pub fn congestion_factor(spec: &PedestrianSpec) -> f64 {
    match spec.jam_density {
        Some(jam) => (1.0 - spec.density / jam).max(CONGESTION_FLOOR),
        None => 1.0,
    }
}

/// Spawns and walks a population over `[t0, t1]` on one segment.
pub fn populate<R: Rng>(
    rng: &mut R,
    segment: &Segment,
    spec: &PedestrianSpec,
    t0: f64,
    t1: f64,
    id_prefix: &str,
) -> Population {
    let width = spec.corridor_width_m.unwrap_or(segment.nominal_width_m);
    let half = 0.5 * width;
    let steps = ((t1 - t0) / PED_DT).ceil().max(1.0) as usize + 1;
    let duration = (steps - 1) as f64 * PED_DT;
    let factor = congestion_factor(spec);
    let v_cap = factor * (spec.speed_mean_mps + 5.0 * spec.speed_sd_mps) + 5.0 * spec.jitter_sd_mps;
    let margin = v_cap * duration + 15.0;
    let lo = -margin;
    let hi = segment.length_m + margin;

    let expected = spec.density * width * (hi - lo);
    let count = if expected > 0.0 {
        Poisson::new(expected).expect("positive mean").sample(rng) as usize
    } else {
        0
    };
    let speed_dist = Normal::new(spec.speed_mean_mps, spec.speed_sd_mps).expect("sd checked");
    let decay = (-PED_DT / JITTER_TAU_S).exp();
    let kick = spec.jitter_sd_mps * (1.0 - decay * decay).sqrt();

    let mut walkers = Vec::with_capacity(count);
    for k in 0..count {
        let s0 = rng.random_range(lo..hi);
        let sign = if rng.random::<f64>() < spec.forward_fraction { 1.0 } else { -1.0 };
        let zig = rng.random::<f64>() < spec.zigzag_fraction;
        let base = speed_dist.sample(rng).max(MIN_SPEED_MPS) * factor;
        let (amp, center) = if zig {
            let amp = spec.zigzag_amp_m.min(half);
            let room = half - amp;
            (amp, if room > 0.0 { rng.random_range(-room..=room) } else { 0.0 })
        } else {
            (0.0, rng.random_range(-half..=half))
        };
        let phase = rng.random_range(0.0..std::f64::consts::TAU);
        let omega = std::f64::consts::TAU / spec.zigzag_period_s.max(PED_DT);

        let z0: f64 = StandardNormal.sample(rng);
        let mut jitter = spec.jitter_sd_mps * z0;
        let mut s = s0;
        let mut track = Vec::with_capacity(steps);
        for i in 0..steps {
            let t = i as f64 * PED_DT;
            let d = center + amp * (omega * t + phase).sin();
            track.push((s, d));
            let v = (base + jitter).max(0.1 * base);
            s += sign * v * PED_DT;
            let z: f64 = StandardNormal.sample(rng);
            jitter = decay * jitter + kick * z;
        }
        walkers.push(Walker {
            id: format!("{id_prefix}{k:04}"),
            track,
        });
    }
    Population {
        t0,
        corridor_width_m: width,
        density: spec.density,
        walkers,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::campus::campus_network;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn corridor_density_is_planted_value() {
        let net = campus_network();
        let seg = net.by_id("S6").unwrap();
        let spec = PedestrianSpec {
            density: 0.1,
            zigzag_fraction: 0.5,
            ..PedestrianSpec::default()
        };
        let mut total = 0.0;
        let mut samples = 0.0;
        for seed in 0..20 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let pop = populate(&mut rng, seg, &spec, 0.0, 60.0, "p");
            for tick in 0..=60 {
                let t = tick as f64;
                let inside = (0..pop.walkers.len())
                    .filter_map(|i| pop.position(i, t))
                    .filter(|(s, d)| (0.0..seg.length_m).contains(s) && d.abs() <= 4.0)
                    .count();
                total += inside as f64 / (seg.length_m * 8.0);
                samples += 1.0;
            }
        }
        let mean = total / samples;
        assert!((mean - 0.1).abs() < 0.01, "{mean}");
    }

    #[test]
    fn walkers_stay_in_corridor() {
        let net = campus_network();
        let seg = net.by_id("S1").unwrap();
        let spec = PedestrianSpec {
            density: 0.2,
            zigzag_fraction: 1.0,
            zigzag_amp_m: 5.0,
            ..PedestrianSpec::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let pop = populate(&mut rng, seg, &spec, 0.0, 20.0, "p");
        assert!(!pop.walkers.is_empty());
        for w in &pop.walkers {
            assert!(w.track.iter().all(|(_, d)| d.abs() <= 1.2 + 1e-9));
        }
    }

    #[test]
    fn congestion_slows_walkers() {
        let spec = PedestrianSpec {
            density: 0.3,
            jam_density: Some(0.6),
            ..PedestrianSpec::default()
        };
        assert!((congestion_factor(&spec) - 0.5).abs() < 1e-12);
        let jammed = PedestrianSpec { density: 0.6, ..spec };
        assert_eq!(congestion_factor(&jammed), 0.3);
    }
}
