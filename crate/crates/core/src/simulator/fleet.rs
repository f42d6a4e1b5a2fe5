//! Seeded variations of a scenario and their on-disk layout.

use std::collections::BTreeSet;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use chrono::NaiveDate;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::robot::resolve_route;
use super::spec::{HaltSpec, RouteLeg, ScenarioSpec};
use super::{generate, SimError, SimOutput};
use crate::ingest::{write_trip, WeatherTable};
use crate::model::{SidewalkNetwork, Weather};

const FLEET_STREAM: u64 = 99;
const WEATHER_STREAM: u64 = 98;
const DAY_S: f64 = 86_400.0;

/// How trips in a fleet differ from their base scenario. `None` keeps the
/// base value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetVariation {
    pub battery_scale: Option<(f64, f64)>,
    pub target_speed_mps: Option<(f64, f64)>,
    /// Per-trip, per-segment multiplier on pedestrian density.
    pub density_scale: Option<(f64, f64)>,
    /// Chance of driving the route backwards.
    pub reverse_probability: f64,
    /// Up to this many legs are retraced at the end of a trip.
    pub max_return_legs: usize,
    /// Mean number of unplanned halts per trip.
    pub halts_per_trip: f64,
    pub halt_duration_s: (f64, f64),
    /// Trips are spread over this many consecutive days.
    pub days: u32,
}

impl Default for FleetVariation {
    fn default() -> Self {
        Self {
            battery_scale: Some((0.85, 1.0)),
            target_speed_mps: Some((1.1, 1.4)),
            density_scale: Some((0.3, 1.7)),
            reverse_probability: 0.5,
            max_return_legs: 3,
            halts_per_trip: 1.5,
            halt_duration_s: (1.0, 8.0),
            days: 60,
        }
    }
}

impl FleetVariation {
    /// Every trip is an exact copy of its base scenario apart from seed,
    /// id and start time.
    pub fn none() -> Self {
        Self {
            battery_scale: None,
            target_speed_mps: None,
            density_scale: None,
            reverse_probability: 0.0,
            max_return_legs: 0,
            halts_per_trip: 0.0,
            halt_duration_s: (1.0, 1.0),
            days: 1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FleetSpec {
    /// Base scenarios, used round-robin.
    pub scenarios: Vec<ScenarioSpec>,
    pub trips: usize,
    pub variation: FleetVariation,
    pub seed: u64,
}

impl Default for FleetSpec {
    fn default() -> Self {
        Self {
            scenarios: vec![super::campus_scenario()],
            trips: 1,
            variation: FleetVariation::default(),
            seed: 1,
        }
    }
}

fn draw<R: Rng>(rng: &mut R, range: (f64, f64)) -> f64 {
    if range.1 > range.0 {
        rng.random_range(range.0..range.1)
    } else {
        range.0
    }
}

/// The per-trip scenarios of a fleet. Deterministic in `spec.seed`.
pub fn fleet_specs(spec: &FleetSpec, network: &SidewalkNetwork) -> Result<Vec<ScenarioSpec>, SimError> {
    if spec.trips == 0 || spec.scenarios.is_empty() {
        return Err(SimError::Invalid("a fleet needs at least one trip and one scenario".into()));
    }
    let var = &spec.variation;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(FLEET_STREAM);
    let mut out = Vec::with_capacity(spec.trips);
    for i in 0..spec.trips {
        let base = &spec.scenarios[i % spec.scenarios.len()];
        let mut s = base.clone();
        s.trip_id = format!("trip-{:04}", i + 1);
        s.seed = rng.random();
        let day = (i as u64 * var.days.max(1) as u64 / spec.trips as u64) as f64;
        s.start_time = base.start_time + day * DAY_S + (rng.random_range(0.0..9.0_f64) * 3600.0).round();

        if let Some(r) = var.battery_scale {
            s.robot.battery_scale = draw(&mut rng, r);
        }
        if let Some(r) = var.target_speed_mps {
            s.robot.target_speed_mps = draw(&mut rng, r);
        }
        if let Some(r) = var.density_scale {
            for seg in network.segments() {
                let scale = draw(&mut rng, r);
                let entry = s
                    .pedestrians
                    .entry(seg.id.clone())
                    .or_insert_with(|| base.default_pedestrians.clone());
                entry.density *= scale;
            }
        }

        let mut route: Vec<RouteLeg> = if base.route.is_empty() {
            network.segments().iter().map(|seg| RouteLeg::new(seg.id.clone())).collect()
        } else {
            base.route.clone()
        };
        let varied = var.reverse_probability > 0.0 || var.max_return_legs > 0;
        if varied {
            for leg in &mut route {
                leg.direction = None;
            }
        }
        if rng.random::<f64>() < var.reverse_probability {
            route.reverse();
        }
        if var.max_return_legs > 0 {
            let k = rng.random_range(0..=var.max_return_legs.min(route.len()));
            let back: Vec<RouteLeg> = route.iter().rev().take(k).cloned().collect();
            route.extend(back);
        }
        s.route = route;

        if var.halts_per_trip > 0.0 {
            let legs = resolve_route(network, &s.route)?;
            let n = Poisson::new(var.halts_per_trip).expect("positive mean").sample(&mut rng) as usize;
            for _ in 0..n {
                let leg = rng.random_range(0..legs.len());
                let len = legs[leg].length_m;
                s.robot.halts.push(HaltSpec {
                    leg,
                    at_m: rng.random_range(0.2 * len..0.8 * len),
                    duration_s: draw(&mut rng, var.halt_duration_s),
                });
            }
        }
        out.push(s);
    }
    Ok(out)
}

/// Generates all trips of a fleet in parallel; output order follows the specs.
pub fn fleet(spec: &FleetSpec, network: &SidewalkNetwork) -> Result<Vec<SimOutput>, SimError> {
    fleet_specs(spec, network)?
        .par_iter()
        .map(|s| generate(s, network))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub trip_id: String,
    pub seed: u64,
    pub log: String,
    pub truth: String,
}

/// Index of a simulated dataset; paths are relative to the manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub network: String,
    pub weather: Option<String>,
    pub trips: Vec<ManifestEntry>,
}

/// Writes `<trip_id>.jsonl` and `<trip_id>.truth.json` into `dir`.
pub fn write_trip_output(dir: &Path, out: &SimOutput) -> Result<ManifestEntry, SimError> {
    let log = format!("{}.jsonl", out.trip.trip_id);
    let truth = format!("{}.truth.json", out.trip.trip_id);
    let mut w = BufWriter::new(File::create(dir.join(&log))?);
    write_trip(&out.trip, &mut w)?;
    w.flush()?;
    let mut w = BufWriter::new(File::create(dir.join(&truth))?);
    serde_json::to_writer(&mut w, &out.truth)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(ManifestEntry {
        trip_id: out.trip.trip_id.clone(),
        seed: out.truth.seed,
        log,
        truth,
    })
}

/// Plausible daily weather for every date a trip starts on.
pub fn synthetic_weather(outputs: &[SimOutput], seed: u64) -> WeatherTable {
    let dates: BTreeSet<NaiveDate> = outputs.iter().map(|o| o.trip.start_date()).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(WEATHER_STREAM);
    let temp = Normal::new(12.0, 5.0).expect("valid");
    let pressure = Normal::new(1013.0, 8.0).expect("valid");
    let rows: Vec<Weather> = dates
        .into_iter()
        .map(|date| {
            let rainy = rng.random::<f64>() < 0.3;
            Weather {
                date,
                avg_temperature: (temp.sample(&mut rng) * 10.0_f64).round() / 10.0,
                avg_wind_speed: (rng.random_range(1.0..8.0) * 10.0_f64).round() / 10.0,
                pressure: (pressure.sample(&mut rng) * 10.0_f64).round() / 10.0,
                precipitation: if rainy {
                    (rng.random_range(0.5..12.0) * 10.0_f64).round() / 10.0
                } else {
                    0.0
                },
            }
        })
        .collect();
    WeatherTable::from_rows(rows).expect("dates are unique")
}

/// Writes logs, truths, the network, a weather table and `manifest.json`.
pub fn write_fleet(
    dir: &Path,
    outputs: &[SimOutput],
    network: &SidewalkNetwork,
    seed: u64,
) -> Result<Manifest, SimError> {
    std::fs::create_dir_all(dir)?;
    let trips = outputs
        .par_iter()
        .map(|o| write_trip_output(dir, o))
        .collect::<Result<Vec<_>, _>>()?;

    let network_file = "network.geojson".to_string();
    let mut w = BufWriter::new(File::create(dir.join(&network_file))?);
    serde_json::to_writer_pretty(&mut w, &network.to_document())?;
    w.write_all(b"\n")?;
    w.flush()?;

    let weather_file = "weather.csv".to_string();
    let table = synthetic_weather(outputs, seed);
    let f = File::create(dir.join(&weather_file))?;
    table
        .write_csv(f)
        .map_err(|e| SimError::Io(std::io::Error::other(e.to_string())))?;

    let manifest = Manifest {
        seed,
        network: network_file,
        weather: Some(weather_file),
        trips,
    };
    let mut w = BufWriter::new(File::create(dir.join("manifest.json"))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulator::campus_network;

    fn small_fleet(trips: usize, seed: u64) -> FleetSpec {
        let mut base = super::super::campus_scenario();
        base.rates.imu_hz = 10.0;
        FleetSpec {
            scenarios: vec![base],
            trips,
            seed,
            ..FleetSpec::default()
        }
    }

    #[test]
    fn specs_are_deterministic_and_distinct() {
        let net = campus_network();
        let a = fleet_specs(&small_fleet(6, 7), &net).unwrap();
        let b = fleet_specs(&small_fleet(6, 7), &net).unwrap();
        assert_eq!(a, b);
        let seeds: BTreeSet<u64> = a.iter().map(|s| s.seed).collect();
        assert_eq!(seeds.len(), 6);
        assert_eq!(a[5].trip_id, "trip-0006");
        for s in &a {
            s.validate(&net).unwrap();
            resolve_route(&net, &s.route).unwrap();
            assert!(s.route.len() >= 9);
        }
        let c = fleet_specs(&small_fleet(6, 8), &net).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn one_trip_manifest() {
        let net = campus_network();
        let dir = std::env::temp_dir().join(format!("walk-fleet-{}", std::process::id()));
        let outputs = fleet(&small_fleet(1, 3), &net).unwrap();
        let m = write_fleet(&dir, &outputs, &net, 3).unwrap();
        assert_eq!(m.trips.len(), 1);
        assert!(dir.join(&m.trips[0].log).exists());
        assert!(dir.join(&m.trips[0].truth).exists());
        let table = WeatherTable::from_path(&dir.join("weather.csv")).unwrap();
        assert!(table.get(outputs[0].trip.start_date()).is_some());
        std::fs::remove_dir_all(&dir).unwrap();
    }

    #[test]
    fn zero_trips_is_an_error() {
        assert!(fleet_specs(&small_fleet(0, 1), &campus_network()).is_err());
    }
}
