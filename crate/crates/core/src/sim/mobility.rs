//! Random-waypoint mobility with closed-form leg interpolation.
//!
//! Each node repeats: pick a uniform point in the area, move toward it
//! in a straight line at a speed drawn uniformly from `(0, v_max]`,
//! pause on arrival, repeat. Position between events is a pure function
//! of time, so the kernel only schedules one event per leg (the
//! arrival) and interpolates everything else.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::time::SimTime;

/// A point in the simulation area, meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn dist(self, other: Point) -> f64 {
        ((self.x - other.x).powi(2) + (self.y - other.y).powi(2)).sqrt()
    }
}

/// One straight-line movement: at `depart` the node leaves `from`, at
/// `arrive` it reaches `to`, and it sits still outside that window.
#[derive(Debug, Clone)]
struct Leg {
    from: Point,
    to: Point,
    depart: SimTime,
    arrive: SimTime,
}

#[derive(Debug, Clone)]
pub struct MobilityModel {
    area: (f64, f64),
    v_max: f64,
    pause: SimTime,
    rng: ChaCha8Rng,
    leg: Leg,
}

impl MobilityModel {
    /// Node starting at a uniform random position.
    pub fn new(area: (f64, f64), v_max: f64, pause: SimTime, mut rng: ChaCha8Rng) -> Self {
        let start = Point {
            x: rng.gen::<f64>() * area.0,
            y: rng.gen::<f64>() * area.1,
        };
        Self::new_at(start, area, v_max, pause, rng)
    }

    /// Node pinned to a chosen starting position (scripted topologies).
    pub fn new_at(
        start: Point,
        area: (f64, f64),
        v_max: f64,
        pause: SimTime,
        mut rng: ChaCha8Rng,
    ) -> Self {
        let leg = if v_max <= 0.0 {
            // Static node: a degenerate leg it never leaves.
            Leg {
                from: start,
                to: start,
                depart: SimTime::ZERO,
                arrive: SimTime::ZERO,
            }
        } else {
            let (to, speed) = draw_destination(&mut rng, area, v_max);
            let travel = SimTime::from_secs_f64(start.dist(to) / speed);
            Leg {
                from: start,
                to,
                depart: SimTime::ZERO,
                arrive: travel,
            }
        };
        MobilityModel {
            area,
            v_max,
            pause,
            rng,
            leg,
        }
    }

    /// Where the node is at `now`. Pure interpolation; never leaves the
    /// area rectangle.
    pub fn position_at(&self, now: SimTime) -> Point {
        let leg = &self.leg;
        let pos = if now <= leg.depart || leg.arrive <= leg.depart {
            leg.from
        } else if now >= leg.arrive {
            leg.to
        } else {
            let f = (now - leg.depart).as_secs_f64() / (leg.arrive - leg.depart).as_secs_f64();
            Point {
                x: leg.from.x + f * (leg.to.x - leg.from.x),
                y: leg.from.y + f * (leg.to.y - leg.from.y),
            }
        };
        assert!(
            pos.x >= -1e-6
                && pos.x <= self.area.0 + 1e-6
                && pos.y >= -1e-6
                && pos.y <= self.area.1 + 1e-6,
            "position {pos:?} escaped area {:?}",
            self.area
        );
        pos
    }

    /// When the current leg ends, or None for a static node.
    pub fn next_arrival(&self) -> Option<SimTime> {
        if self.v_max <= 0.0 {
            None
        } else {
            Some(self.leg.arrive)
        }
    }

    /// Handle the arrival at the current waypoint: pause, then start the
    /// next leg with a fresh waypoint and speed.
    pub fn advance(&mut self, now: SimTime) {
        debug_assert_eq!(now, self.leg.arrive, "advance called off-schedule");
        let from = self.leg.to;
        let (to, speed) = draw_destination(&mut self.rng, self.area, self.v_max);
        let depart = now + self.pause;
        let travel = SimTime::from_secs_f64(from.dist(to) / speed);
        self.leg = Leg {
            from,
            to,
            depart,
            arrive: depart + travel,
        };
    }

    /// Current leg endpoints and timing, for inspection in tests.
    pub fn leg(&self) -> (Point, Point, SimTime, SimTime) {
        (
            self.leg.from,
            self.leg.to,
            self.leg.depart,
            self.leg.arrive,
        )
    }
}

/// Fresh waypoint plus a speed uniform in `(0, v_max]` — zero excluded,
/// so a moving node can never freeze mid-area.
fn draw_destination(rng: &mut ChaCha8Rng, area: (f64, f64), v_max: f64) -> (Point, f64) {
    let to = Point {
        x: rng.gen::<f64>() * area.0,
        y: rng.gen::<f64>() * area.1,
    };
    let speed = v_max * (1.0 - rng.gen::<f64>());
    (to, speed)
}
