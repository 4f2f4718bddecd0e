//! Initial trajectories seeding the alternating optimization.
//!
//! Two constructions are provided. The *circular* initial trajectory flies
//! one loop around the area center through the charging base; it is simple
//! and kinematically gentle but biased toward users near the ring. The
//! *designed* initial trajectory visits every user in counterclockwise
//! angular order around the center and returns to the base, giving all
//! users a close pass at the cost of possibly violating the speed,
//! acceleration, or energy limits — those violations are tolerated here and
//! repaired by the first trajectory-optimization step.
//!
//! Both constructors first lay down position samples and then derive
//! velocities and accelerations so that the two kinematic recursions hold
//! exactly; the recursions leave a single free degree of freedom, which is
//! chosen to minimize total squared acceleration.

use crate::model::{Scenario, SystemParams, Trajectory, Vec2};
use thiserror::Error;

/// Which construction to use.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitKind {
    Circular,
    Designed,
}

/// Geometry of the initial trajectory.
#[derive(Debug, Clone)]
pub struct InitConfig {
    pub kind: InitKind,
    /// Center of the loop and origin of the angular user ordering (m).
    pub center: Vec2,
    /// Circle radius for the circular construction (m).
    pub radius: f64,
}

impl InitConfig {
    /// Default geometry: loop centered in the area with radius a quarter of
    /// the side length, so the ring splits the area roughly evenly.
    pub fn new(kind: InitKind, scenario: &Scenario) -> Self {
        let half = scenario.area_size_m / 2.0;
        InitConfig { kind, center: Vec2::new(half, half), radius: scenario.area_size_m / 4.0 }
    }

    pub fn build(
        &self,
        params: &SystemParams,
        scenario: &Scenario,
    ) -> Result<Trajectory, InitError> {
        match self.kind {
            InitKind::Circular => circular_init(self, params, scenario),
            InitKind::Designed => Ok(designed_init(scenario, self, params)),
        }
    }
}

#[derive(Debug, Error)]
pub enum InitError {
    #[error(
        "circular loop needs speed {required:.2} m/s, outside [{v_min}, {v_max}] (radius {radius} m, {n} slots)"
    )]
    SpeedOutOfRange { required: f64, v_min: f64, v_max: f64, radius: f64, n: usize },
}

/// Launch velocity of the circular loop at the base position: tangential,
/// counterclockwise, with the discrete loop speed (2r/δt)·tan(π/N).
///
/// Useful for choosing a scenario's start velocity consistent with the
/// circular initialization.
pub fn launch_velocity(center: Vec2, base: Vec2, num_slots: usize, slot_s: f64) -> Vec2 {
    let rel = base - center;
    let r = rel.norm();
    let u = if r > 0.0 { rel * (1.0 / r) } else { Vec2::new(1.0, 0.0) };
    let speed = (2.0 * r.max(1.0) / slot_s) * (std::f64::consts::PI / num_slots as f64).tan();
    Vec2::new(-u.y, u.x) * speed
}

/// One counterclockwise loop of radius `config.radius` about
/// `config.center`, starting at the circle point nearest the charging base
/// (exactly the base when the base lies on the circle, as in the default
/// geometry).
pub fn circular_init(
    config: &InitConfig,
    params: &SystemParams,
    scenario: &Scenario,
) -> Result<Trajectory, InitError> {
    let n = params.num_slots;
    let r = config.radius;
    let required = 2.0 * std::f64::consts::PI * r / (n as f64 * params.slot_s);
    if required < params.v_min || required > params.v_max {
        return Err(InitError::SpeedOutOfRange {
            required,
            v_min: params.v_min,
            v_max: params.v_max,
            radius: r,
            n,
        });
    }
    let rel = scenario.base_pos - config.center;
    let phi0 = if rel.norm_sq() > 0.0 { rel.y.atan2(rel.x) } else { 0.0 };
    let mut s = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let phi = phi0 + 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        s.push(config.center + Vec2::new(phi.cos(), phi.sin()) * r);
    }
    s[n] = s[0];
    Ok(from_positions(&s, params.slot_s))
}

/// Visiting order of the users: ascending angle θ ∈ (0, 2π] about `center`
/// (counterclockwise), ties broken by ascending radius. A user exactly at
/// the center has no angle; it is assigned θ = 0 and therefore visited
/// first.
pub fn polar_order(scenario: &Scenario, center: Vec2) -> Vec<usize> {
    let mut keyed: Vec<(f64, f64, usize)> = scenario
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| {
            let rel = u.pos - center;
            let r = rel.norm();
            let theta = if r == 0.0 {
                0.0
            } else {
                let t = rel.y.atan2(rel.x);
                if t <= 0.0 {
                    t + 2.0 * std::f64::consts::PI
                } else {
                    t
                }
            };
            (theta, r, i)
        })
        .collect();
    keyed.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)).then(a.2.cmp(&b.2)));
    keyed.into_iter().map(|(_, _, i)| i).collect()
}

/// Total length of the designed path: base → users in polar order → base.
pub fn designed_path_length(scenario: &Scenario, center: Vec2) -> f64 {
    let order = polar_order(scenario, center);
    let mut prev = scenario.base_pos;
    let mut d = 0.0;
    for &i in &order {
        d += (scenario.users[i].pos - prev).norm();
        prev = scenario.users[i].pos;
    }
    d + (scenario.base_pos - prev).norm()
}

/// The designed initial trajectory: the piecewise-linear tour of all users
/// resampled at a constant arc-length interval d_sum/N. The result may
/// violate the speed, acceleration, or energy limits; it is emitted as-is.
pub fn designed_init(scenario: &Scenario, config: &InitConfig, params: &SystemParams) -> Trajectory {
    let n = params.num_slots;
    let order = polar_order(scenario, config.center);
    let mut waypoints = Vec::with_capacity(order.len() + 2);
    waypoints.push(scenario.base_pos);
    waypoints.extend(order.iter().map(|&i| scenario.users[i].pos));
    waypoints.push(scenario.base_pos);

    let mut cum = vec![0.0];
    for w in waypoints.windows(2) {
        cum.push(cum.last().unwrap() + (w[1] - w[0]).norm());
    }
    let d_sum = *cum.last().unwrap();

    let mut s = Vec::with_capacity(n + 1);
    if d_sum <= 0.0 {
        s.resize(n + 1, scenario.base_pos);
    } else {
        let mut seg = 0usize;
        for k in 0..=n {
            let target = d_sum * k as f64 / n as f64;
            while seg + 2 < cum.len() && cum[seg + 1] <= target {
                seg += 1;
            }
            let len = cum[seg + 1] - cum[seg];
            let t = if len > 0.0 { (target - cum[seg]) / len } else { 0.0 };
            s.push(waypoints[seg] + (waypoints[seg + 1] - waypoints[seg]) * t.clamp(0.0, 1.0));
        }
        s[n] = scenario.base_pos;
    }
    from_positions(&s, params.slot_s)
}

/// Fit velocities and accelerations to given position samples so that both
/// kinematic recursions hold exactly.
///
/// Writing Δ[k] = (s[k+1] − s[k])/δt, the recursions force
/// a[k+1] = 2(Δ[k+1] − Δ[k])/δt − a[k], leaving a[0] free; the general
/// solution is a particular sequence plus (−1)^k times the free part. The
/// free part is chosen to minimize Σ‖a[k]‖², which suppresses the
/// slot-to-slot alternation the recurrence would otherwise admit (and
/// recovers the uniform centripetal solution exactly on a circle sampled
/// with an even slot count).
fn from_positions(s: &[Vec2], dt: f64) -> Trajectory {
    let n = s.len() - 1;
    let delta: Vec<Vec2> = (0..n).map(|k| (s[k + 1] - s[k]) * (1.0 / dt)).collect();
    // Particular solution with p[0] = 0.
    let mut p = vec![Vec2::ZERO; n];
    for k in 1..n {
        p[k] = (delta[k] - delta[k - 1]) * (2.0 / dt) - p[k - 1];
    }
    let mut alt_sum = Vec2::ZERO;
    for (k, pk) in p.iter().enumerate() {
        let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
        alt_sum = alt_sum + *pk * sign;
    }
    let h = alt_sum * (-1.0 / n as f64);
    let a: Vec<Vec2> = p
        .into_iter()
        .enumerate()
        .map(|(k, pk)| if k % 2 == 0 { pk + h } else { pk - h })
        .collect();
    let v0 = delta[0] - a[0] * (0.5 * dt);
    Trajectory::from_accels(s[0], v0, a, dt)
}
