//! Intelligent Driver Model car-following, MOBIL lane changing and the
//! per-lane integrator shared by the engine and the ring-road harness.

use serde::{Deserialize, Serialize};

pub const VEHICLE_LENGTH: f64 = 5.0;
/// Hard floor on any IDM deceleration, m/s².
pub const EMERGENCY_DECEL: f64 = -8.0;
/// Gap substituted when a follower reports a non-positive gap.
const MIN_GAP: f64 = 0.01;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IdmParams {
    /// Safe time headway T, s.
    pub time_headway: f64,
    /// Jam distance s0, m.
    pub min_gap: f64,
    /// Maximum acceleration, m/s².
    pub max_accel: f64,
    /// Comfortable deceleration b, m/s².
    pub comfort_decel: f64,
    /// Acceleration exponent δ.
    pub exponent: f64,
}

impl Default for IdmParams {
    fn default() -> Self {
        Self {
            time_headway: 1.5,
            min_gap: 2.0,
            max_accel: 2.0,
            comfort_decel: 3.0,
            exponent: 4.0,
        }
    }
}

impl IdmParams {
    /// Desired dynamic gap s*(v, Δv).
    pub fn desired_gap(&self, speed: f64, closing_speed: f64) -> f64 {
        let dynamic = speed * self.time_headway
            + speed * closing_speed / (2.0 * (self.max_accel * self.comfort_decel).sqrt());
        self.min_gap + dynamic.max(0.0)
    }

    /// Gap at which a platoon at `speed` is in equilibrium (zero acceleration).
    pub fn equilibrium_gap(&self, speed: f64, desired_speed: f64) -> f64 {
        (self.min_gap + speed * self.time_headway)
            / (1.0 - (speed / desired_speed).powf(self.exponent)).sqrt()
    }
}

/// IDM acceleration for a vehicle at `speed` with desired speed
/// `desired_speed`, bumper-to-bumper `gap` to its leader (`f64::INFINITY`
/// on a free road) and `closing_speed` = own speed minus leader speed.
pub fn idm_acceleration(speed: f64, desired_speed: f64, gap: f64, closing_speed: f64, p: &IdmParams) -> f64 {
    let free = 1.0 - (speed / desired_speed).powf(p.exponent);
    let interaction = if gap.is_infinite() {
        0.0
    } else {
        let s = if gap > 0.0 { gap } else { MIN_GAP };
        (p.desired_gap(speed, closing_speed) / s).powi(2)
    };
    (p.max_accel * (free - interaction)).max(EMERGENCY_DECEL)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MobilParams {
    pub politeness: f64,
    /// Switching threshold Δa_th, m/s².
    pub threshold: f64,
    /// Maximum deceleration imposed on the new follower, m/s².
    pub safe_decel: f64,
}

impl Default for MobilParams {
    fn default() -> Self {
        Self {
            politeness: 0.3,
            threshold: 0.2,
            safe_decel: 4.0,
        }
    }
}

/// The six accelerations MOBIL weighs; `*_after` are with the change applied.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct LaneChangeContext {
    pub own: f64,
    pub own_after: f64,
    pub new_follower: f64,
    pub new_follower_after: f64,
    pub old_follower: f64,
    pub old_follower_after: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LaneDecision {
    Stay,
    Change,
}

pub fn mobil_decide(ctx: &LaneChangeContext, p: &MobilParams) -> LaneDecision {
    if ctx.new_follower_after < -p.safe_decel {
        return LaneDecision::Stay;
    }
    let own_gain = ctx.own_after - ctx.own;
    let others_gain = (ctx.new_follower_after - ctx.new_follower) + (ctx.old_follower_after - ctx.old_follower);
    if own_gain + p.politeness * others_gain > p.threshold {
        LaneDecision::Change
    } else {
        LaneDecision::Stay
    }
}

/// One vehicle in a lane. Lanes are ordered front (largest offset) first.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Car {
    pub id: usize,
    pub offset: f64,
    pub speed: f64,
    pub desired_speed: f64,
}

/// Bumper-to-bumper gap between a leader at `leader_offset` and a follower.
#[inline]
pub fn gap(leader_offset: f64, follower_offset: f64) -> f64 {
    leader_offset - follower_offset - VEHICLE_LENGTH
}

/// What the front vehicle of a lane reacts to.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Obstacle {
    Free,
    /// A leader (or stop line, with speed 0) whose rear is at `position`.
    At { position: f64, speed: f64 },
}

/// Accelerations for every car of a lane from the current state.
pub fn lane_accelerations(cars: &[Car], front: Obstacle, p: &IdmParams, out: &mut Vec<f64>) {
    out.clear();
    for (i, car) in cars.iter().enumerate() {
        let a = if i == 0 {
            match front {
                Obstacle::Free => idm_acceleration(car.speed, car.desired_speed, f64::INFINITY, 0.0, p),
                Obstacle::At { position, speed } => {
                    idm_acceleration(car.speed, car.desired_speed, position - car.offset, car.speed - speed, p)
                }
            }
        } else {
            let leader = &cars[i - 1];
            idm_acceleration(
                car.speed,
                car.desired_speed,
                gap(leader.offset, car.offset),
                car.speed - leader.speed,
                p,
            )
        };
        out.push(a);
    }
}

/// Semi-implicit Euler update: v <- max(0, v + a dt), x <- x + v dt.
pub fn integrate(cars: &mut [Car], accels: &[f64], dt: f64) {
    for (car, a) in cars.iter_mut().zip(accels) {
        car.speed = (car.speed + a * dt).max(0.0);
        car.offset += car.speed * dt;
    }
}

/// Pulls followers back so that every gap is non-negative. The front car
/// is checked against `front_limit` (a position its front may not pass).
pub fn project_gaps(cars: &mut [Car], front_limit: Option<f64>) {
    if let (Some(limit), Some(first)) = (front_limit, cars.first_mut()) {
        if first.offset > limit {
            first.offset = limit;
            first.speed = 0.0;
        }
    }
    for i in 1..cars.len() {
        let leader = cars[i - 1];
        let car = &mut cars[i];
        if gap(leader.offset, car.offset) < 0.0 {
            car.offset = leader.offset - VEHICLE_LENGTH;
            car.speed = car.speed.min(leader.speed);
        }
    }
}

/// Single-lane closed ring, used for soak tests and flow-density sweeps.
#[derive(Debug, Clone)]
pub struct RingRoad {
    pub circumference: f64,
    /// Front first; offsets are unwrapped (they grow without bound).
    pub cars: Vec<Car>,
    pub params: IdmParams,
    accels: Vec<f64>,
}

impl RingRoad {
    /// `n` cars evenly spaced and at rest.
    pub fn uniform(circumference: f64, n: usize, desired_speed: f64, params: IdmParams) -> Self {
        let spacing = circumference / n as f64;
        let cars = (0..n)
            .map(|i| Car {
                id: i,
                offset: circumference - spacing * i as f64,
                speed: 0.0,
                desired_speed,
            })
            .collect();
        Self {
            circumference,
            cars,
            params,
            accels: Vec::new(),
        }
    }

    /// Position of the rear of the last car as seen by the first, one lap ahead.
    fn wrapped_leader(&self) -> (f64, f64) {
        let last = self.cars[self.cars.len() - 1];
        (last.offset + self.circumference, last.speed)
    }

    pub fn gaps(&self) -> Vec<f64> {
        let n = self.cars.len();
        let mut out = Vec::with_capacity(n);
        if n == 0 {
            return out;
        }
        let (lead, _) = self.wrapped_leader();
        out.push(gap(lead, self.cars[0].offset));
        for i in 1..n {
            out.push(gap(self.cars[i - 1].offset, self.cars[i].offset));
        }
        out
    }

    /// Advances by `dt`; `perturb(car_index, accel)` may override accelerations.
    pub fn step(&mut self, dt: f64, mut perturb: impl FnMut(usize, f64) -> f64) {
        if self.cars.is_empty() {
            return;
        }
        let (lead, lead_speed) = self.wrapped_leader();
        let front = Obstacle::At {
            position: lead - VEHICLE_LENGTH,
            speed: lead_speed,
        };
        let mut accels = std::mem::take(&mut self.accels);
        lane_accelerations(&self.cars, front, &self.params, &mut accels);
        for (i, a) in accels.iter_mut().enumerate() {
            *a = perturb(i, *a).max(EMERGENCY_DECEL);
        }
        integrate(&mut self.cars, &accels, dt);
        self.accels = accels;
        // the front car may not run into the (already moved) last car; a
        // projection can wrap around the ring, so repeat until settled
        for _ in 0..=self.cars.len() {
            let (lead, _) = self.wrapped_leader();
            let limit = lead - VEHICLE_LENGTH;
            project_gaps(&mut self.cars, Some(limit));
            let (lead, _) = self.wrapped_leader();
            if gap(lead, self.cars[0].offset) >= 0.0 {
                break;
            }
        }
    }

    pub fn mean_speed(&self) -> f64 {
        self.cars.iter().map(|c| c.speed).sum::<f64>() / self.cars.len().max(1) as f64
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn idm_standstill_at_jam_gap() {
        let p = IdmParams::default();
        assert_eq!(idm_acceleration(0.0, 30.0, 2.0, 0.0, &p), 0.0);
    }

    #[test]
    fn idm_free_road() {
        let p = IdmParams::default();
        assert_eq!(idm_acceleration(15.0, 30.0, f64::INFINITY, 0.0, &p), 1.875);
        assert_eq!(idm_acceleration(30.0, 30.0, f64::INFINITY, 0.0, &p), 0.0);
    }

    #[test]
    fn idm_emergency_clamp() {
        let p = IdmParams::default();
        assert_eq!(idm_acceleration(30.0, 30.0, 0.5, 30.0, &p), EMERGENCY_DECEL);
        assert_eq!(idm_acceleration(10.0, 30.0, -3.0, 0.0, &p), EMERGENCY_DECEL);
    }

    #[test]
    fn equilibrium_gap_gives_zero_accel() {
        let p = IdmParams::default();
        let s = p.equilibrium_gap(12.0, 20.0);
        assert!(idm_acceleration(12.0, 20.0, s, 0.0, &p).abs() < 1e-12);
    }

    #[test]
    fn mobil_examples() {
        let p = MobilParams::default();
        assert_eq!(mobil_decide(&LaneChangeContext::default(), &p), LaneDecision::Stay);
        let ctx = LaneChangeContext {
            own: 0.2,
            own_after: 1.5,
            ..Default::default()
        };
        assert_eq!(mobil_decide(&ctx, &p), LaneDecision::Change);
        let veto = LaneChangeContext {
            new_follower_after: -5.0,
            ..ctx
        };
        assert_eq!(mobil_decide(&veto, &p), LaneDecision::Stay);
    }

    #[test]
    fn politeness_weighs_imposed_braking() {
        let p = MobilParams::default();
        // own gain 1.0, new follower loses 3.0: 1.0 + 0.3 * -3.0 = 0.1 < 0.2
        let ctx = LaneChangeContext {
            own: 0.0,
            own_after: 1.0,
            new_follower: 0.0,
            new_follower_after: -3.0,
            ..Default::default()
        };
        assert_eq!(mobil_decide(&ctx, &p), LaneDecision::Stay);
    }

    #[test]
    fn projection_restores_order() {
        let mut cars = vec![
            Car { id: 0, offset: 100.0, speed: 5.0, desired_speed: 10.0 },
            Car { id: 1, offset: 98.0, speed: 9.0, desired_speed: 10.0 },
            Car { id: 2, offset: 94.0, speed: 9.0, desired_speed: 10.0 },
        ];
        project_gaps(&mut cars, Some(99.0));
        assert_eq!(cars[0].offset, 99.0);
        assert_eq!(cars[0].speed, 0.0);
        assert_eq!(cars[1].offset, 94.0);
        assert_eq!(cars[2].offset, 89.0);
        for w in cars.windows(2) {
            assert!(gap(w[0].offset, w[1].offset) >= 0.0);
        }
    }

    #[test]
    fn ring_stays_collision_free() {
        let mut ring = RingRoad::uniform(500.0, 40, 15.0, IdmParams::default());
        for _ in 0..2000 {
            ring.step(0.5, |_, a| a);
            assert!(ring.gaps().iter().all(|&g| g >= 0.0));
        }
        assert!(ring.mean_speed() > 0.0);
    }
}
