//! System model: geometry, link budget, propulsion energy, and constraint
//! checking for a fixed-wing aerial base station serving ground users.
//!
//! Conventions used throughout the workspace:
//!
//! * All quantities are SI (meters, seconds, watts, joules, bits, hertz)
//!   unless a field name says otherwise.
//! * A mission of `num_slots` = N slots discretizes the horizon T into steps
//!   of `slot_s` = δt. A trajectory stores N+1 position/velocity samples
//!   `s[0..=N]`, `v[0..=N]` and N accelerations `a[0..N]`, where `a[k]` acts
//!   over the interval between samples k and k+1.
//! * Communication slot `k ∈ 0..N` is evaluated at the *end-of-interval*
//!   position `s[k+1]`; its energy pairs `v[k+1]` with `a[k]`.
//! * The channel gain at reference distance is `beta0` (linear), receiver
//!   noise power is `noise_w`; only their ratio `zeta0 = beta0 / noise_w`
//!   enters the SNR.

use serde::{Deserialize, Serialize};
use thiserror::Error;

// --------------------------------------------------------------------------
// small 2-d vector

/// Plain 2-d vector over f64. Kept deliberately minimal; no external linear
/// algebra is needed at this scale.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Vec2 {
    pub x: f64,
    pub y: f64,
}

impl Vec2 {
    pub const ZERO: Vec2 = Vec2 { x: 0.0, y: 0.0 };

    pub fn new(x: f64, y: f64) -> Self {
        Vec2 { x, y }
    }

    pub fn dot(self, o: Vec2) -> f64 {
        self.x * o.x + self.y * o.y
    }

    pub fn norm_sq(self) -> f64 {
        self.dot(self)
    }

    pub fn norm(self) -> f64 {
        self.norm_sq().sqrt()
    }
}

impl std::ops::Add for Vec2 {
    type Output = Vec2;
    fn add(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x + o.x, self.y + o.y)
    }
}

impl std::ops::Sub for Vec2 {
    type Output = Vec2;
    fn sub(self, o: Vec2) -> Vec2 {
        Vec2::new(self.x - o.x, self.y - o.y)
    }
}

impl std::ops::Mul<f64> for Vec2 {
    type Output = Vec2;
    fn mul(self, k: f64) -> Vec2 {
        Vec2::new(self.x * k, self.y * k)
    }
}

impl std::ops::Neg for Vec2 {
    type Output = Vec2;
    fn neg(self) -> Vec2 {
        Vec2::new(-self.x, -self.y)
    }
}

// --------------------------------------------------------------------------
// parameters

/// How per-slot throughput is accumulated into delivered bits.
///
/// `Physical` multiplies the instantaneous rate by the slot length δt, so a
/// slot at rate R bit/s delivers R·δt bits. `PaperLiteral` accumulates the
/// rate itself (one slot at rate R counts R bits), a convention that appears
/// in parts of the UAV literature; it scales every delivered-bit figure by
/// 1/δt but leaves the optimization structure untouched.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateConvention {
    Physical,
    PaperLiteral,
}

impl Default for RateConvention {
    fn default() -> Self {
        RateConvention::Physical
    }
}

/// Distance model used when evaluating link rates.
///
/// `Nominal` uses the horizontal distance to the given user position.
/// `WorstCase` pads the horizontal distance by `d_th_m` before computing the
/// SNR, which lower-bounds the rate of any true user within `d_th_m` of the
/// given (estimated) position. Constructing a worst-case model with zero
/// padding yields `Nominal` exactly.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RateModel {
    Nominal,
    WorstCase { d_th_m: f64 },
}

impl RateModel {
    /// Worst-case model with padding `d_th_m`; collapses to `Nominal` when
    /// the padding is zero so the two code paths are bit-identical.
    pub fn worst_case(d_th_m: f64) -> Self {
        if d_th_m == 0.0 {
            RateModel::Nominal
        } else {
            RateModel::WorstCase { d_th_m }
        }
    }

    /// Effective squared horizontal distance between a trajectory sample and
    /// a user position under this model.
    pub fn effective_horiz_sq(self, s: Vec2, w: Vec2) -> f64 {
        match self {
            RateModel::Nominal => (s - w).norm_sq(),
            RateModel::WorstCase { d_th_m } => {
                let d = (s - w).norm() + d_th_m;
                d * d
            }
        }
    }
}

/// Physical and mission parameters.
///
/// Defaults (via [`SystemParams::defaults`]) reproduce a common fixed-wing
/// measurement setup: 1 MHz bandwidth, 100 m altitude, 10 mW transmit power,
/// -50 dB reference channel gain, -110 dBm noise, 0.5 s slots, speed range
/// 3..80 m/s, acceleration cap 6 m/s², propulsion constants c1 = 9.26e-4 and
/// c2 = 2250.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SystemParams {
    /// Flight altitude H above the ground plane (m).
    pub altitude_m: f64,
    /// Channel bandwidth B (Hz).
    pub bandwidth_hz: f64,
    /// Transmit power P (W).
    pub tx_power_w: f64,
    /// Reference channel power gain at 1 m, linear (-50 dB → 1e-5).
    pub beta0: f64,
    /// Receiver noise power σ² (W); -110 dBm → 1e-14 W.
    pub noise_w: f64,
    /// Slot length δt (s).
    pub slot_s: f64,
    /// Number of slots N in the mission.
    pub num_slots: usize,
    /// Maximum speed (m/s).
    pub v_max: f64,
    /// Minimum (stall) speed (m/s); fixed-wing craft cannot hover.
    pub v_min: f64,
    /// Maximum acceleration magnitude (m/s²).
    pub a_max: f64,
    /// Parasitic-drag propulsion constant c1 (W s³/m³).
    pub c1: f64,
    /// Induced-drag propulsion constant c2 (W m/s).
    pub c2: f64,
    /// Gravitational acceleration g (m/s²).
    pub gravity: f64,
    /// Propulsion energy budget for the mission (J).
    pub energy_budget_j: f64,
    /// Bit-accounting convention.
    pub rate_convention: RateConvention,
}

impl SystemParams {
    /// Standard parameter set for a mission of `horizon_s` seconds and the
    /// given propulsion energy budget.
    pub fn defaults(horizon_s: f64, energy_budget_j: f64) -> Self {
        let slot_s = 0.5;
        SystemParams {
            altitude_m: 100.0,
            bandwidth_hz: 1e6,
            tx_power_w: 0.01,
            beta0: 1e-5,
            noise_w: 1e-14,
            slot_s,
            num_slots: (horizon_s / slot_s).round() as usize,
            v_max: 80.0,
            v_min: 3.0,
            a_max: 6.0,
            c1: 9.26e-4,
            c2: 2250.0,
            gravity: 9.8,
            energy_budget_j,
            rate_convention: RateConvention::Physical,
        }
    }

    /// Mission horizon T = N·δt (s).
    pub fn horizon_s(&self) -> f64 {
        self.num_slots as f64 * self.slot_s
    }

    /// Reference SNR ratio ζ0 = β0/σ² (1/W·... dimensionless once multiplied
    /// by transmit power over squared distance).
    pub fn zeta0(&self) -> f64 {
        self.beta0 / self.noise_w
    }

    /// Basic sanity checks on the parameter set itself.
    pub fn check(&self) -> Result<(), ModelError> {
        let pos = [
            ("altitude_m", self.altitude_m),
            ("bandwidth_hz", self.bandwidth_hz),
            ("tx_power_w", self.tx_power_w),
            ("beta0", self.beta0),
            ("noise_w", self.noise_w),
            ("slot_s", self.slot_s),
            ("v_max", self.v_max),
            ("v_min", self.v_min),
            ("a_max", self.a_max),
            ("c1", self.c1),
            ("c2", self.c2),
            ("gravity", self.gravity),
        ];
        for (name, v) in pos {
            if !(v > 0.0) || !v.is_finite() {
                return Err(ModelError::BadParam { name, value: v });
            }
        }
        if self.num_slots == 0 {
            return Err(ModelError::BadParam { name: "num_slots", value: 0.0 });
        }
        if self.v_min >= self.v_max {
            return Err(ModelError::BadParam { name: "v_min", value: self.v_min });
        }
        if !(self.energy_budget_j > 0.0) {
            return Err(ModelError::BadParam { name: "energy_budget_j", value: self.energy_budget_j });
        }
        Ok(())
    }
}

// --------------------------------------------------------------------------
// scenario

/// A ground user: horizontal position and demanded payload.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UserSpec {
    pub pos: Vec2,
    pub demand_bits: f64,
}

/// A service area instance: square side, start/end point and start velocity
/// of the aircraft, and the ground users to serve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Scenario {
    /// Side length of the square service area (m); users lie in [0, L]².
    pub area_size_m: f64,
    /// Common start and end position of the flight (m).
    pub base_pos: Vec2,
    /// Initial velocity at the start position (m/s).
    pub base_vel: Vec2,
    pub users: Vec<UserSpec>,
}

impl Scenario {
    pub fn num_users(&self) -> usize {
        self.users.len()
    }

    pub fn check(&self) -> Result<(), ModelError> {
        if !(self.area_size_m > 0.0) {
            return Err(ModelError::BadParam { name: "area_size_m", value: self.area_size_m });
        }
        for (i, u) in self.users.iter().enumerate() {
            if !(u.demand_bits > 0.0) || !u.demand_bits.is_finite() {
                return Err(ModelError::BadDemand { user: i, value: u.demand_bits });
            }
        }
        Ok(())
    }
}

// --------------------------------------------------------------------------
// trajectory and schedule

/// Discretized flight path. `s` and `v` have `num_slots()+1` samples, `a`
/// has `num_slots()`. The two kinematic recursions
///
/// ```text
/// v[k+1] = v[k] + a[k]·δt
/// s[k+1] = s[k] + v[k]·δt + ½·a[k]·δt²
/// ```
///
/// are expected to hold exactly; [`Trajectory::from_accels`] constructs a
/// trajectory that satisfies them by evaluating exactly these expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub s: Vec<Vec2>,
    pub v: Vec<Vec2>,
    pub a: Vec<Vec2>,
}

impl Trajectory {
    /// Integrate accelerations from an initial state. The result satisfies
    /// the kinematic recursions to the last bit by construction.
    pub fn from_accels(s0: Vec2, v0: Vec2, a: Vec<Vec2>, dt: f64) -> Self {
        let n = a.len();
        let mut s = Vec::with_capacity(n + 1);
        let mut v = Vec::with_capacity(n + 1);
        s.push(s0);
        v.push(v0);
        for k in 0..n {
            let vk = v[k];
            let sk = s[k];
            v.push(vk + a[k] * dt);
            s.push(sk + vk * dt + a[k] * (0.5 * dt * dt));
        }
        Trajectory { s, v, a }
    }

    pub fn num_slots(&self) -> usize {
        self.a.len()
    }

    /// Position at which communication slot `k` (0-based) is evaluated.
    pub fn slot_pos(&self, k: usize) -> Vec2 {
        self.s[k + 1]
    }

    /// Shape consistency: |s| = |v| = |a|+1 and at least one slot.
    pub fn check_shape(&self) -> Result<(), ModelError> {
        let n = self.a.len();
        if n == 0 || self.s.len() != n + 1 || self.v.len() != n + 1 {
            return Err(ModelError::BadShape {
                what: "trajectory",
                detail: format!("|s|={}, |v|={}, |a|={}", self.s.len(), self.v.len(), n),
            });
        }
        Ok(())
    }
}

/// Slot assignment matrix α: `alpha(i, k)` is true when user `i` transmits
/// in slot `k`. Stored densely so that malformed (non-exclusive) schedules
/// can be represented and reported by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    num_users: usize,
    num_slots: usize,
    /// Set entries as (user, slot) pairs; kept sorted for determinism.
    assigned: Vec<(u32, u32)>,
}

impl Schedule {
    pub fn empty(num_users: usize, num_slots: usize) -> Self {
        Schedule { num_users, num_slots, assigned: Vec::new() }
    }

    /// Build from a per-slot assignment (`None` = idle slot).
    pub fn from_assignment(num_users: usize, slots: &[Option<usize>]) -> Self {
        let mut sched = Schedule::empty(num_users, slots.len());
        for (k, &u) in slots.iter().enumerate() {
            if let Some(u) = u {
                sched.assign(u, k);
            }
        }
        sched
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    pub fn assign(&mut self, user: usize, slot: usize) {
        assert!(user < self.num_users && slot < self.num_slots, "assignment out of range");
        let e = (user as u32, slot as u32);
        if let Err(at) = self.assigned.binary_search(&e) {
            self.assigned.insert(at, e);
        }
    }

    pub fn alpha(&self, user: usize, slot: usize) -> bool {
        self.assigned.binary_search(&(user as u32, slot as u32)).is_ok()
    }

    /// Iterator over (user, slot) pairs that are set.
    pub fn entries(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.assigned.iter().map(|&(u, k)| (u as usize, k as usize))
    }

    /// Users assigned to a given slot (more than one only in malformed input).
    pub fn users_in_slot(&self, slot: usize) -> Vec<usize> {
        self.entries().filter(|&(_, k)| k == slot).map(|(u, _)| u).collect()
    }

    /// Per-slot view; the first user found wins if the schedule is
    /// (erroneously) non-exclusive.
    pub fn assignment(&self) -> Vec<Option<usize>> {
        let mut out = vec![None; self.num_slots];
        for (u, k) in self.entries() {
            out[k].get_or_insert(u);
        }
        out
    }

    pub fn slots_of(&self, user: usize) -> Vec<usize> {
        self.entries().filter(|&(u, _)| u == user).map(|(_, k)| k).collect()
    }
}

// --------------------------------------------------------------------------
// link budget

/// Total (3-d) squared distance between a trajectory sample and a user,
/// under the given rate model: H² + effective horizontal distance².
pub fn sq_distance(params: &SystemParams, model: RateModel, s: Vec2, w: Vec2) -> f64 {
    params.altitude_m * params.altitude_m + model.effective_horiz_sq(s, w)
}

/// Straight-line distance (m) from aircraft at horizontal position `s` to
/// the user at `w`.
pub fn distance(params: &SystemParams, s: Vec2, w: Vec2) -> f64 {
    sq_distance(params, RateModel::Nominal, s, w).sqrt()
}

/// Received SNR γ = P·ζ0 / (H² + d²) for squared horizontal distance `horiz_sq`.
pub fn snr_at_sq(params: &SystemParams, horiz_sq: f64) -> f64 {
    params.tx_power_w * params.zeta0()
        / (params.altitude_m * params.altitude_m + horiz_sq)
}

/// SNR seen by a user at `w` from aircraft position `s`.
pub fn snr(params: &SystemParams, model: RateModel, s: Vec2, w: Vec2) -> f64 {
    snr_at_sq(params, model.effective_horiz_sq(s, w))
}

/// Bits credited for one slot spent at squared horizontal distance
/// `horiz_sq`: B·δt·log2(1+γ) under the physical convention, B·log2(1+γ)
/// under the literal one.
pub fn bits_per_slot_at_sq(params: &SystemParams, horiz_sq: f64) -> f64 {
    let spectral = (1.0 + snr_at_sq(params, horiz_sq)).log2();
    match params.rate_convention {
        RateConvention::Physical => params.bandwidth_hz * params.slot_s * spectral,
        RateConvention::PaperLiteral => params.bandwidth_hz * spectral,
    }
}

/// Bits credited for one slot from aircraft position `s` to user `w`.
pub fn bits_per_slot(params: &SystemParams, model: RateModel, s: Vec2, w: Vec2) -> f64 {
    bits_per_slot_at_sq(params, model.effective_horiz_sq(s, w))
}

/// Total bits delivered to one user over the mission under a schedule.
pub fn total_bits(
    params: &SystemParams,
    model: RateModel,
    traj: &Trajectory,
    sched: &Schedule,
    user_pos: Vec2,
    user: usize,
) -> f64 {
    sched
        .entries()
        .filter(|&(u, _)| u == user)
        .map(|(_, k)| bits_per_slot(params, model, traj.slot_pos(k), user_pos))
        .sum()
}

/// Which users receive their full demand, and how many.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverageResult {
    pub covered: Vec<bool>,
    pub delivered_bits: Vec<f64>,
}

impl CoverageResult {
    pub fn count(&self) -> usize {
        self.covered.iter().filter(|&&c| c).count()
    }
}

/// Evaluate coverage of a (trajectory, schedule) pair against user demands.
pub fn coverage(
    params: &SystemParams,
    model: RateModel,
    traj: &Trajectory,
    sched: &Schedule,
    scenario: &Scenario,
) -> CoverageResult {
    let delivered: Vec<f64> = scenario
        .users
        .iter()
        .enumerate()
        .map(|(i, u)| total_bits(params, model, traj, sched, u.pos, i))
        .collect();
    let covered = delivered
        .iter()
        .zip(&scenario.users)
        .map(|(&d, u)| d >= u.demand_bits)
        .collect();
    CoverageResult { covered, delivered_bits: delivered }
}

// --------------------------------------------------------------------------
// propulsion

/// Instantaneous propulsion power for a fixed-wing craft at velocity `v`
/// undergoing acceleration `a`:
///
/// ```text
/// P = c1·‖v‖³ + (c2/‖v‖)·(1 + ‖a‖²/g²)
/// ```
///
/// Errors at zero speed, where the induced-drag term diverges.
pub fn propulsion_power(params: &SystemParams, v: Vec2, a: Vec2) -> Result<f64, ModelError> {
    let speed = v.norm();
    if speed == 0.0 {
        return Err(ModelError::ZeroSpeed);
    }
    let g2 = params.gravity * params.gravity;
    Ok(params.c1 * speed * speed * speed + params.c2 / speed * (1.0 + a.norm_sq() / g2))
}

/// Mission propulsion energy: Σ P(v[k+1], a[k])·δt over slots k = 0..N.
/// The velocity at the end of an interval is paired with the acceleration
/// that produced it.
pub fn total_energy(params: &SystemParams, traj: &Trajectory) -> Result<f64, ModelError> {
    traj.check_shape()?;
    let mut e = 0.0;
    for k in 0..traj.num_slots() {
        e += propulsion_power(params, traj.v[k + 1], traj.a[k])? * params.slot_s;
    }
    Ok(e)
}

// --------------------------------------------------------------------------
// validation

/// Absolute tolerance on kinematic recursion and boundary residuals (m, m/s).
pub const TOL_KINEMATICS: f64 = 1e-6;
/// Absolute tolerance on speed and acceleration limit violations (m/s, m/s²).
pub const TOL_LIMITS: f64 = 1e-6;
/// Relative tolerance on the energy budget.
pub const TOL_ENERGY_REL: f64 = 1e-6;

/// One constraint violation found by [`validate`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Violation {
    /// ‖s[k+1] − s[k] − v[k]·δt − ½a[k]δt²‖ exceeds tolerance.
    PositionRecursion { slot: usize, residual_m: f64 },
    /// ‖v[k+1] − v[k] − a[k]·δt‖ exceeds tolerance.
    VelocityRecursion { slot: usize, residual_mps: f64 },
    /// Start position differs from the scenario base.
    StartPosition { residual_m: f64 },
    /// Final position does not return to the base.
    EndPosition { residual_m: f64 },
    /// Start velocity differs from the scenario's initial velocity.
    StartVelocity { residual_mps: f64 },
    SpeedAbove { slot: usize, speed_mps: f64 },
    SpeedBelow { slot: usize, speed_mps: f64 },
    AccelAbove { slot: usize, accel_mps2: f64 },
    /// More than one user assigned to a slot.
    SlotExclusivity { slot: usize, users: Vec<usize> },
    /// Propulsion energy exceeds the budget (relative tolerance).
    EnergyBudget { used_j: f64, budget_j: f64 },
}

/// Result of checking a (trajectory, schedule) pair against the mission
/// constraints. An empty `violations` list means the pair is feasible at the
/// documented tolerances. Demand satisfaction is deliberately *not* checked
/// here — that is coverage, the objective, not a constraint.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Check kinematic recursions, boundary conditions, speed/acceleration
/// limits, slot exclusivity, and the energy budget. Shape errors (wrong
/// vector lengths, schedule size mismatch) are hard errors; numeric
/// violations are collected in the report.
pub fn validate(
    params: &SystemParams,
    scenario: &Scenario,
    traj: &Trajectory,
    sched: &Schedule,
) -> Result<ValidationReport, ModelError> {
    params.check()?;
    scenario.check()?;
    traj.check_shape()?;
    let n = traj.num_slots();
    if n != params.num_slots {
        return Err(ModelError::BadShape {
            what: "trajectory",
            detail: format!("{} slots, params say {}", n, params.num_slots),
        });
    }
    if sched.num_slots() != n || sched.num_users() != scenario.num_users() {
        return Err(ModelError::BadShape {
            what: "schedule",
            detail: format!(
                "{}x{}, expected {}x{}",
                sched.num_users(),
                sched.num_slots(),
                scenario.num_users(),
                n
            ),
        });
    }

    let dt = params.slot_s;
    let mut v = Vec::new();

    for k in 0..n {
        let rp = (traj.s[k + 1] - traj.s[k] - traj.v[k] * dt - traj.a[k] * (0.5 * dt * dt)).norm();
        if rp > TOL_KINEMATICS {
            v.push(Violation::PositionRecursion { slot: k, residual_m: rp });
        }
        let rv = (traj.v[k + 1] - traj.v[k] - traj.a[k] * dt).norm();
        if rv > TOL_KINEMATICS {
            v.push(Violation::VelocityRecursion { slot: k, residual_mps: rv });
        }
        if traj.a[k].norm() > params.a_max + TOL_LIMITS {
            v.push(Violation::AccelAbove { slot: k, accel_mps2: traj.a[k].norm() });
        }
    }

    let r0 = (traj.s[0] - scenario.base_pos).norm();
    if r0 > TOL_KINEMATICS {
        v.push(Violation::StartPosition { residual_m: r0 });
    }
    let rn = (traj.s[n] - scenario.base_pos).norm();
    if rn > TOL_KINEMATICS {
        v.push(Violation::EndPosition { residual_m: rn });
    }
    let rv0 = (traj.v[0] - scenario.base_vel).norm();
    if rv0 > TOL_KINEMATICS {
        v.push(Violation::StartVelocity { residual_mps: rv0 });
    }

    // Speed limits apply to every sample of the flight, including the start.
    for (k, vel) in traj.v.iter().enumerate() {
        let sp = vel.norm();
        if sp > params.v_max + TOL_LIMITS {
            v.push(Violation::SpeedAbove { slot: k, speed_mps: sp });
        }
        if sp < params.v_min - TOL_LIMITS {
            v.push(Violation::SpeedBelow { slot: k, speed_mps: sp });
        }
    }

    for k in 0..n {
        let users = sched.users_in_slot(k);
        if users.len() > 1 {
            v.push(Violation::SlotExclusivity { slot: k, users });
        }
    }

    // Energy is only evaluable when no sample is at exactly zero speed; a
    // zero-speed sample is already reported as a SpeedBelow violation.
    if let Ok(e) = total_energy(params, traj) {
        if e > params.energy_budget_j * (1.0 + TOL_ENERGY_REL) {
            v.push(Violation::EnergyBudget { used_j: e, budget_j: params.energy_budget_j });
        }
    }

    Ok(ValidationReport { violations: v })
}

// --------------------------------------------------------------------------
// errors

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("propulsion power undefined at zero speed")]
    ZeroSpeed,
    #[error("parameter {name} has invalid value {value}")]
    BadParam { name: &'static str, value: f64 },
    #[error("user {user} has invalid demand {value}")]
    BadDemand { user: usize, value: f64 },
    #[error("malformed {what}: {detail}")]
    BadShape { what: &'static str, detail: String },
}

// --------------------------------------------------------------------------

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, rel: f64) -> bool {
        (a - b).abs() <= rel * b.abs().max(1.0)
    }

    fn params() -> SystemParams {
        SystemParams::defaults(100.0, 1.5e4)
    }

    #[test]
    fn reference_snr_ratio() {
        // -50 dB gain over -110 dBm noise: 1e-5 / 1e-14 = 1e9.
        assert!(close(params().zeta0(), 1e9, 1e-12));
    }

    #[test]
    fn snr_directly_overhead() {
        // P·ζ0/H² = 0.01·1e9/1e4 = 1000 (30 dB).
        let p = params();
        let g = snr(&p, RateModel::Nominal, Vec2::ZERO, Vec2::ZERO);
        assert!(close(g, 1000.0, 1e-12), "snr {g}");
    }

    #[test]
    fn bits_per_slot_overhead_both_conventions() {
        let mut p = params();
        let b = bits_per_slot(&p, RateModel::Nominal, Vec2::ZERO, Vec2::ZERO);
        // 1e6 · 0.5 · log2(1001) ≈ 4.9836e6 bits.
        assert!(close(b, 0.5e6 * 1001f64.log2(), 1e-12));
        assert!(close(b, 4.9836e6, 1e-4), "physical bits {b}");
        p.rate_convention = RateConvention::PaperLiteral;
        let b = bits_per_slot(&p, RateModel::Nominal, Vec2::ZERO, Vec2::ZERO);
        assert!(close(b, 9.9672e6, 1e-4), "literal bits {b}");
    }

    #[test]
    fn bits_decrease_with_distance() {
        let p = params();
        let w = Vec2::ZERO;
        let mut last = f64::INFINITY;
        for d in [0.0, 10.0, 100.0, 500.0, 1500.0, 5000.0] {
            let b = bits_per_slot(&p, RateModel::Nominal, Vec2::new(d, 0.0), w);
            assert!(b < last, "not strictly decreasing at {d}");
            assert!(b > 0.0);
            last = b;
        }
    }

    #[test]
    fn worst_case_model_pads_distance() {
        let p = params();
        let s = Vec2::new(30.0, 40.0); // 50 m from origin
        let wc = RateModel::worst_case(30.0);
        assert_eq!(wc.effective_horiz_sq(s, Vec2::ZERO), 80.0 * 80.0);
        // Zero padding degenerates to the nominal model (exactly).
        assert_eq!(RateModel::worst_case(0.0), RateModel::Nominal);
        assert!(bits_per_slot(&p, wc, s, Vec2::ZERO) < bits_per_slot(&p, RateModel::Nominal, s, Vec2::ZERO));
    }

    #[test]
    fn propulsion_power_spot_values() {
        let p = params();
        // Steady flight: c1·v³ + c2/v.
        let p30 = propulsion_power(&p, Vec2::new(30.0, 0.0), Vec2::ZERO).unwrap();
        assert!(close(p30, 100.002, 1e-9), "{p30}");
        let p80 = propulsion_power(&p, Vec2::new(0.0, 80.0), Vec2::ZERO).unwrap();
        assert!(close(p80, 502.237, 1e-9), "{p80}");
        let p3 = propulsion_power(&p, Vec2::new(3.0, 0.0), Vec2::ZERO).unwrap();
        assert!(close(p3, 750.025002, 1e-9), "{p3}");
        // Acceleration multiplies the induced term by (1 + ‖a‖²/g²).
        let pa = propulsion_power(&p, Vec2::new(30.0, 0.0), Vec2::new(0.0, 9.8)).unwrap();
        assert!(close(pa, 25.002 + 75.0 * 2.0, 1e-9), "{pa}");
        assert!(matches!(
            propulsion_power(&p, Vec2::ZERO, Vec2::ZERO),
            Err(ModelError::ZeroSpeed)
        ));
    }

    #[test]
    fn steady_power_minimum_near_30() {
        // Grid search brackets the analytic argmin (c2/(3c1))^(1/4) ≈ 30.0.
        let p = params();
        let mut best = (f64::INFINITY, 0.0);
        let mut v = p.v_min;
        while v <= p.v_max {
            let pow = propulsion_power(&p, Vec2::new(v, 0.0), Vec2::ZERO).unwrap();
            if pow < best.0 {
                best = (pow, v);
            }
            v += 0.01;
        }
        let analytic = (p.c2 / (3.0 * p.c1)).powf(0.25);
        assert!((best.1 - analytic).abs() < 0.1, "grid {} vs analytic {}", best.1, analytic);
        assert!((analytic - 30.0).abs() < 0.1);
    }

    #[test]
    fn energy_pairs_end_velocity_with_interval_accel() {
        let p = params();
        let v0 = Vec2::new(10.0, 0.0);
        let a = vec![Vec2::new(2.0, 0.0), Vec2::new(-1.0, 0.0)];
        let traj = Trajectory::from_accels(Vec2::ZERO, v0, a.clone(), p.slot_s);
        let e = total_energy(&p, &traj).unwrap();
        let manual = (propulsion_power(&p, traj.v[1], a[0]).unwrap()
            + propulsion_power(&p, traj.v[2], a[1]).unwrap())
            * p.slot_s;
        assert_eq!(e, manual);
    }

    #[test]
    fn from_accels_recursions_exact() {
        let dt = 0.5;
        let a: Vec<Vec2> = (0..40)
            .map(|k| Vec2::new((k as f64 * 0.37).sin(), (k as f64 * 0.73).cos()))
            .collect();
        let t = Trajectory::from_accels(Vec2::new(5.0, -3.0), Vec2::new(7.0, 1.0), a, dt);
        for k in 0..t.num_slots() {
            let rp = (t.s[k + 1] - t.s[k] - t.v[k] * dt - t.a[k] * (0.5 * dt * dt)).norm();
            let rv = (t.v[k + 1] - t.v[k] - t.a[k] * dt).norm();
            // Exact up to re-association rounding, far inside the 1e-6
            // tolerance the validator enforces.
            assert!(rp < 1e-9, "position residual {rp}");
            assert!(rv < 1e-9, "velocity residual {rv}");
        }
    }

    fn tiny_scenario(n_users: usize) -> Scenario {
        Scenario {
            area_size_m: 1500.0,
            base_pos: Vec2::new(1125.0, 750.0),
            base_vel: Vec2::new(0.0, 20.0),
            users: (0..n_users)
                .map(|i| UserSpec { pos: Vec2::new(100.0 * i as f64, 200.0), demand_bits: 1e6 })
                .collect(),
        }
    }

    #[test]
    fn validate_flags_exclusivity_and_endpoint() {
        let mut p = params();
        p.num_slots = 4;
        p.energy_budget_j = 1e6;
        let sc = tiny_scenario(2);
        // Straight-line flight at constant velocity: recursions hold but the
        // end position misses the base.
        let traj = Trajectory::from_accels(sc.base_pos, sc.base_vel, vec![Vec2::ZERO; 4], p.slot_s);
        let mut sched = Schedule::empty(2, 4);
        sched.assign(0, 1);
        sched.assign(1, 1);
        let rep = validate(&p, &sc, &traj, &sched).unwrap();
        assert!(rep
            .violations
            .iter()
            .any(|v| matches!(v, Violation::SlotExclusivity { slot: 1, .. })));
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::EndPosition { .. })));
        // And no recursion complaints.
        assert!(!rep
            .violations
            .iter()
            .any(|v| matches!(v, Violation::PositionRecursion { .. } | Violation::VelocityRecursion { .. })));
    }

    #[test]
    fn validate_flags_energy_and_speed() {
        let mut p = params();
        p.num_slots = 4;
        p.energy_budget_j = 10.0; // absurdly small
        let sc = tiny_scenario(1);
        let traj = Trajectory::from_accels(sc.base_pos, Vec2::new(0.0, 90.0), vec![Vec2::ZERO; 4], p.slot_s);
        let sched = Schedule::empty(1, 4);
        let rep = validate(&p, &sc, &traj, &sched).unwrap();
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::EnergyBudget { .. })));
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::SpeedAbove { .. })));
        assert!(rep.violations.iter().any(|v| matches!(v, Violation::StartVelocity { .. })));
    }

    #[test]
    fn schedule_round_trip() {
        let sched = Schedule::from_assignment(3, &[Some(2), None, Some(0), Some(2)]);
        assert_eq!(sched.assignment(), vec![Some(2), None, Some(0), Some(2)]);
        assert_eq!(sched.slots_of(2), vec![0, 3]);
        assert!(sched.alpha(0, 2) && !sched.alpha(0, 1));
        let js = serde_json::to_string(&sched).unwrap();
        let back: Schedule = serde_json::from_str(&js).unwrap();
        assert_eq!(back, sched);
    }

    #[test]
    fn total_bits_sums_assigned_slots() {
        let p = params();
        let sc = tiny_scenario(1);
        let traj = Trajectory::from_accels(sc.base_pos, Vec2::new(10.0, 0.0), vec![Vec2::ZERO; 3], p.slot_s);
        let mut sched = Schedule::empty(1, 3);
        sched.assign(0, 0);
        sched.assign(0, 2);
        let w = sc.users[0].pos;
        let want = bits_per_slot(&p, RateModel::Nominal, traj.slot_pos(0), w)
            + bits_per_slot(&p, RateModel::Nominal, traj.slot_pos(2), w);
        let got = total_bits(&p, RateModel::Nominal, &traj, &sched, w, 0);
        assert_eq!(got, want);
    }
}
