//! Route resolution and the robot's speed controller.

use super::spec::{RobotSpec, RouteLeg};
use super::SimError;
use crate::geo::{bearing_deg, Vec2};
use crate::model::{Direction, SidewalkNetwork};

/// Consecutive legs must meet within this distance.
const JOIN_TOLERANCE_M: f64 = 1.0;
/// Below this speed the robot launches and brakes with the halt acceleration.
const LAUNCH_SPEED_MPS: f64 = 0.2;
const ARRIVE_EPS_M: f64 = 1e-3;

#[derive(Debug, Clone, PartialEq)]
pub struct Leg {
    pub segment: usize,
    pub direction: Direction,
    pub length_m: f64,
    /// Route progress at the start of the leg.
    pub start_m: f64,
}

impl Leg {
    pub fn end_m(&self) -> f64 {
        self.start_m + self.length_m
    }

    /// Segment position for a progress `p` into this leg.
    pub fn s_of(&self, p: f64) -> f64 {
        match self.direction {
            Direction::Forward => p,
            Direction::Reverse => self.length_m - p,
        }
    }
}

fn endpoints(net: &SidewalkNetwork, seg: usize, dir: Direction) -> (Vec2, Vec2) {
    let g = net.segment(seg).geometry();
    match dir {
        Direction::Forward => (g.start(), g.end()),
        Direction::Reverse => (g.end(), g.start()),
    }
}

/// Resolves segment ids to legs, inferring unspecified directions so that
/// each leg starts where the previous one ends.
pub fn resolve_route(net: &SidewalkNetwork, route: &[RouteLeg]) -> Result<Vec<Leg>, SimError> {
    let legs: Vec<RouteLeg> = if route.is_empty() {
        net.segments().iter().map(|s| RouteLeg::new(s.id.clone())).collect()
    } else {
        route.to_vec()
    };
    let idx: Vec<usize> = legs
        .iter()
        .map(|l| net.index_of(&l.segment).ok_or_else(|| SimError::UnknownSegment(l.segment.clone())))
        .collect::<Result<_, _>>()?;

    let mut dirs: Vec<Direction> = Vec::with_capacity(legs.len());
    for (i, leg) in legs.iter().enumerate() {
        let dir = match leg.direction {
            Some(d) => d,
            None if i == 0 => {
                // Leave the first segment from the end nearest the second.
                match idx.get(1) {
                    Some(&next) => {
                        let g = net.segment(next).geometry();
                        let (a, b) = endpoints(net, idx[0], Direction::Forward);
                        let near = |p: Vec2| p.dist(g.start()).min(p.dist(g.end()));
                        if near(b) <= near(a) {
                            Direction::Forward
                        } else {
                            Direction::Reverse
                        }
                    }
                    None => Direction::Forward,
                }
            }
            None => {
                let prev_end = endpoints(net, idx[i - 1], dirs[i - 1]).1;
                let (a, _) = endpoints(net, idx[i], Direction::Forward);
                let (b, _) = endpoints(net, idx[i], Direction::Reverse);
                if prev_end.dist(a) <= prev_end.dist(b) {
                    Direction::Forward
                } else {
                    Direction::Reverse
                }
            }
        };
        dirs.push(dir);
    }
    for i in 1..idx.len() {
        let prev_end = endpoints(net, idx[i - 1], dirs[i - 1]).1;
        let start = endpoints(net, idx[i], dirs[i]).0;
        let gap = prev_end.dist(start);
        if gap > JOIN_TOLERANCE_M {
            return Err(SimError::Disconnected {
                from: legs[i - 1].segment.clone(),
                to: legs[i].segment.clone(),
                gap_m: gap,
            });
        }
    }

    let mut start_m = 0.0;
    Ok(idx
        .into_iter()
        .zip(dirs)
        .map(|(segment, direction)| {
            let length_m = net.segment(segment).length_m;
            let leg = Leg {
                segment,
                direction,
                length_m,
                start_m,
            };
            start_m += length_m;
            leg
        })
        .collect())
}

/// Where the robot is on a route leg.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub leg: usize,
    /// Segment position.
    pub s_m: f64,
    pub pos: Vec2,
    /// Compass heading of travel.
    pub heading_deg: f64,
}

pub fn leg_at(legs: &[Leg], progress: f64) -> usize {
    legs.partition_point(|l| l.end_m() <= progress).min(legs.len() - 1)
}

pub fn pose_at(net: &SidewalkNetwork, legs: &[Leg], progress: f64, lateral_offset: f64) -> Pose {
    let li = leg_at(legs, progress);
    let leg = &legs[li];
    let seg = net.segment(leg.segment);
    let p = (progress - leg.start_m).clamp(0.0, leg.length_m);
    let s_m = leg.s_of(p);
    let (d, tangent_sign) = match leg.direction {
        Direction::Forward => (lateral_offset, 1.0),
        Direction::Reverse => (-lateral_offset, -1.0),
    };
    let tangent = seg.geometry().tangent_at(seg.to_planar_s(s_m)).scale(tangent_sign);
    Pose {
        leg: li,
        s_m,
        pos: seg.point_at(s_m, d),
        heading_deg: bearing_deg(tangent),
    }
}

/// A halt in route coordinates.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RouteHalt {
    pub at_m: f64,
    pub duration_s: f64,
}

/// Robot state sampled on a uniform clock starting at `t0`.
#[derive(Debug, Clone)]
pub struct Motion {
    pub t0: f64,
    pub dt: f64,
    pub progress: Vec<f64>,
    pub speed: Vec<f64>,
    /// (start, end) of each executed halt.
    pub halts: Vec<(f64, f64)>,
}

impl Motion {
    pub fn t_end(&self) -> f64 {
        self.t0 + (self.progress.len() - 1) as f64 * self.dt
    }

    fn lerp(&self, xs: &[f64], t: f64) -> f64 {
        let u = ((t - self.t0) / self.dt).clamp(0.0, (xs.len() - 1) as f64);
        let i = (u.floor() as usize).min(xs.len() - 2);
        let w = u - i as f64;
        xs[i] + w * (xs[i + 1] - xs[i])
    }

    pub fn progress_at(&self, t: f64) -> f64 {
        self.lerp(&self.progress, t)
    }

    pub fn speed_at(&self, t: f64) -> f64 {
        self.lerp(&self.speed, t)
    }

    /// First time the route progress reaches `p`.
    pub fn time_at(&self, p: f64) -> f64 {
        let i = self.progress.partition_point(|&x| x < p);
        if i == 0 {
            return self.t0;
        }
        if i >= self.progress.len() {
            return self.t_end();
        }
        let (a, b) = (self.progress[i - 1], self.progress[i]);
        let w = if b > a { (p - a) / (b - a) } else { 0.0 };
        self.t0 + (i as f64 - 1.0 + w) * self.dt
    }
}

/// Integrates the speed controller over a route of length `total_m`.
/// Position is the trapezoid integral of the emitted speed.
pub fn drive(robot: &RobotSpec, total_m: f64, halts: &[RouteHalt], t0: f64, dt: f64) -> Motion {
    let cruise = robot.cruise_speed();
    let idle_steps = if robot.constant_speed { 0 } else { (robot.idle_s / dt).round() as usize };
    let mut progress = Vec::new();
    let mut speed = Vec::new();
    let mut executed = Vec::new();

    let mut p = 0.0;
    let mut v = if robot.constant_speed { cruise } else { 0.0 };
    for _ in 0..idle_steps {
        progress.push(p);
        speed.push(v);
    }
    let mut next_halt = 0;
    let mut wait_left = 0.0;
    let mut halt_start = 0.0;
    loop {
        let t = t0 + progress.len() as f64 * dt;
        progress.push(p);
        speed.push(v);
        if wait_left > 0.0 {
            wait_left -= dt;
            if wait_left <= 1e-9 {
                wait_left = 0.0;
                executed.push((halt_start, t + dt));
                next_halt += 1;
            }
            continue;
        }
        let remaining = total_m - p;
        if remaining <= ARRIVE_EPS_M || (robot.constant_speed && remaining <= v * dt) {
            break;
        }

        let mut target = cruise;
        if let Some(h) = halts.get(next_halt) {
            let gap = h.at_m - p;
            if gap <= ARRIVE_EPS_M {
                // Stopped at the halt; the next samples hold zero speed.
                v = 0.0;
                *speed.last_mut().unwrap() = 0.0;
                wait_left = h.duration_s;
                halt_start = t;
                if wait_left <= 0.0 {
                    next_halt += 1;
                }
                continue;
            }
            // Plan with some margin below the braking limit so the discrete
            // controller can follow the curve down to the stop.
            target = target.min((2.0 * 0.9 * robot.halt_accel_mps2 * gap).sqrt());
        }
        if !robot.constant_speed {
            target = target.min((2.0 * 0.9 * robot.accel_mps2 * remaining).sqrt());
        }
        let up = if v < LAUNCH_SPEED_MPS {
            robot.halt_accel_mps2
        } else {
            robot.accel_mps2
        };
        let v_new = target.clamp(v - robot.halt_accel_mps2 * dt, v + up * dt).max(0.0);
        let step = 0.5 * (v + v_new) * dt;
        p = (p + step).min(total_m);
        v = v_new;
    }
    if !robot.constant_speed {
        *speed.last_mut().unwrap() = 0.0;
        for _ in 0..idle_steps {
            progress.push(p);
            speed.push(0.0);
        }
    }
    Motion {
        t0,
        dt,
        progress,
        speed,
        halts: executed,
    }
}

pub fn route_halts(legs: &[Leg], robot: &RobotSpec) -> Result<Vec<RouteHalt>, SimError> {
    let mut out = Vec::with_capacity(robot.halts.len());
    for h in &robot.halts {
        let leg = legs.get(h.leg).ok_or_else(|| {
            SimError::Invalid(format!("halt references leg {} of a {}-leg route", h.leg, legs.len()))
        })?;
        if !(0.0..=leg.length_m).contains(&h.at_m) || !(h.duration_s >= 0.0) {
            return Err(SimError::Invalid(format!(
                "halt at {} m for {} s lies outside leg {}",
                h.at_m, h.duration_s, h.leg
            )));
        }
        out.push(RouteHalt {
            at_m: leg.start_m + h.at_m,
            duration_s: h.duration_s,
        });
    }
    out.sort_by(|a, b| a.at_m.total_cmp(&b.at_m));
    Ok(out)
}
