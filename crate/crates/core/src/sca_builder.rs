//! Compiler from the trajectory subproblem to canonical conic form.
//!
//! With the schedule held fixed, the trajectory step maximizes the minimum
//! rate margin over the covered users subject to kinematics, speed and
//! acceleration limits, and the energy budget. Two constructs make the
//! problem convex around an expansion point (the previous iterate):
//!
//! * the per-slot rate is replaced by its first-order Taylor lower bound in
//!   the squared horizontal distance — the rate is convex in that argument,
//!   so the tangent is a global lower bound, tight at the expansion point;
//! * the speed floor ‖v‖ ≥ v_min is routed through a slack τ with
//!   τ² ≤ ψ_lb(v), where ψ_lb is the tangent of ‖v‖² at the expansion
//!   point; the same τ serves as the denominator of the propulsion model's
//!   1/‖v‖ term, so the energy constraint is conservatively correct.
//!
//! Everything compiles to linear equalities over nonnegative, second-order,
//! and rotated second-order cone variables. The builder also produces the
//! expansion point's own coordinates in program space (the *anchor*), which
//! the driver asserts feasible at every iteration — that tightness is what
//! makes the alternating scheme monotone.
//!
//! Hard limits are tightened by a hair (`LIMIT_GUARD`, unnoticeable at
//! reporting precision) so trajectories extracted from finite-accuracy
//! solutions stay strictly inside the true limits.

use crate::model::{
    RateConvention, RateModel, Scenario, Schedule, SystemParams, Trajectory, Vec2,
};
use aircover_conic::{Cone, ConicProgram, ProgramBuilder};
use thiserror::Error;

/// Margin subtracted from the speed/acceleration caps (and added to the
/// speed floor) inside the compiled program, in m/s and m/s².
pub const LIMIT_GUARD: f64 = 1e-3;
/// Relative shrink of the energy budget inside the compiled program.
pub const ENERGY_GUARD_REL: f64 = 1e-7;

const SQRT2: f64 = std::f64::consts::SQRT_2;

/// Expansion point of the convexification: the previous iterate's positions
/// and velocities (N+1 samples each).
#[derive(Debug, Clone)]
pub struct LocalPoint {
    pub s: Vec<Vec2>,
    pub v: Vec<Vec2>,
}

impl LocalPoint {
    pub fn of(traj: &Trajectory) -> Self {
        LocalPoint { s: traj.s.clone(), v: traj.v.clone() }
    }

    fn accel(&self, dt: f64, k: usize) -> Vec2 {
        (self.v[k + 1] - self.v[k]) * (1.0 / dt)
    }

    /// Expansion velocity for the speed-floor tangent: clipped into the
    /// admissible speed band, since outside it the tangent either
    /// degenerates (near zero speed, where the propulsion model is also
    /// singular) or demands speeds the caps forbid. The bound stays valid
    /// for any expansion point; feasible iterates are returned unchanged.
    fn tangent_v(&self, n: usize, v_min: f64, v_max: f64) -> Vec2 {
        let v = self.v[n];
        let sp = v.norm();
        if sp >= v_min && sp <= v_max {
            v
        } else if sp > 0.0 {
            v * (sp.clamp(v_min, v_max) / sp)
        } else {
            Vec2::new(v_min, 0.0)
        }
    }
}

/// Tangent coefficients of the rate in the squared (effective) horizontal
/// distance, per user and slot: rate(x) ≥ factor·(b − a·(x − x_l)).
#[derive(Debug, Clone)]
pub struct RateBoundCoeffs {
    /// Negated slope −d rate/d x at the expansion point, bits/symbol per m².
    pub a: Vec<Vec<f64>>,
    /// Rate value at the expansion point, bits/symbol.
    pub b: Vec<Vec<f64>>,
}

/// Bits delivered per unit of the log term: bandwidth times slot length
/// under the physical convention, bare bandwidth under the literal one.
pub fn bits_factor(params: &SystemParams) -> f64 {
    match params.rate_convention {
        RateConvention::Physical => params.bandwidth_hz * params.slot_s,
        RateConvention::PaperLiteral => params.bandwidth_hz,
    }
}

/// Evaluate the tangent coefficients of every (user, slot) pair at the
/// expansion point. `x_l` is the squared horizontal distance — padded by
/// the uncertainty radius under the worst-case rate model.
pub fn rate_bound_coeffs(
    local: &LocalPoint,
    scenario: &Scenario,
    params: &SystemParams,
    model: RateModel,
) -> RateBoundCoeffs {
    let n = local.s.len() - 1;
    let gamma_num = params.zeta0() * params.tx_power_w;
    let h2 = params.altitude_m * params.altitude_m;
    let log2e = std::f64::consts::LOG2_E;
    let mut a = vec![vec![0.0; n]; scenario.num_users()];
    let mut b = vec![vec![0.0; n]; scenario.num_users()];
    for (i, u) in scenario.users.iter().enumerate() {
        for k in 0..n {
            let x_l = model.effective_horiz_sq(local.s[k + 1], u.pos);
            a[i][k] = log2e * gamma_num / ((h2 + x_l) * (h2 + x_l + gamma_num));
            b[i][k] = (1.0 + gamma_num / (h2 + x_l)).log2();
        }
    }
    RateBoundCoeffs { a, b }
}

/// Taylor lower bound on the bits delivered to `user` by its assigned
/// slots when the aircraft flies `s_seq`. Equals the exact delivered bits
/// when `s_seq` is the expansion point.
#[allow(clippy::too_many_arguments)]
pub fn rate_lower_bound(
    params: &SystemParams,
    model: RateModel,
    scenario: &Scenario,
    local: &LocalPoint,
    coeffs: &RateBoundCoeffs,
    schedule: &Schedule,
    s_seq: &[Vec2],
    user: usize,
) -> f64 {
    let f = bits_factor(params);
    let w = scenario.users[user].pos;
    schedule
        .slots_of(user)
        .iter()
        .map(|&k| {
            let x = model.effective_horiz_sq(s_seq[k + 1], w);
            let x_l = model.effective_horiz_sq(local.s[k + 1], w);
            f * (coeffs.b[user][k] - coeffs.a[user][k] * (x - x_l))
        })
        .sum()
}

/// Tangent of the squared speed at `v_l`: ψ_lb(v) = ‖v_l‖² + 2v_l·(v−v_l),
/// a global lower bound on ‖v‖² with equality at v = v_l.
pub fn speed_lower_bound(v: Vec2, v_l: Vec2) -> f64 {
    v_l.norm_sq() + 2.0 * v_l.dot(v - v_l)
}

/// Objective of the compiled subproblem.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Objective {
    /// Maximize the minimum over covered users of (rate bound − demand).
    /// Serves both the nominal step (margin as a strict-interior
    /// regularizer) and the excess-data maximization (margin as the
    /// objective proper).
    MaxMinMargin,
    /// Minimize propulsion energy; the natural objective when no rate
    /// constraints are present (cheapest feasible loop).
    MinEnergy,
}

/// Everything the compiler needs to emit one trajectory subproblem.
#[derive(Debug)]
pub struct SubproblemSpec<'a> {
    pub schedule: &'a Schedule,
    /// Users whose coverage flag is fixed to one; each gets a rate row over
    /// its scheduled slots.
    pub candidate_set: &'a [usize],
    pub local: &'a LocalPoint,
    pub rate_model: RateModel,
    pub objective: Objective,
    /// Emit the energy budget row. Disabled only for the feasibility
    /// verdict probe (solving for the cheapest loop regardless of budget).
    pub include_energy_cap: bool,
}

#[derive(Debug, Error)]
pub enum BuildError {
    #[error("inconsistent dimensions: {0}")]
    Dims(String),
}

/// A compiled subproblem: the conic program plus the bookkeeping needed to
/// read a trajectory back out of a solution vector.
#[derive(Debug, Clone)]
pub struct BuiltSubproblem {
    pub program: ConicProgram,
    n: usize,
    /// Per-variable physical scale (solution is scaled · this).
    scale: Vec<f64>,
    /// The expansion point in (scaled) program coordinates.
    anchor: Vec<f64>,
    /// x-column of v[n] for n = 1..=N (y is the next column).
    v_cols: Vec<usize>,
    margin_col: Option<usize>,
    margin_scale: f64,
}

impl BuiltSubproblem {
    /// The expansion point mapped into program coordinates. Feasible (to
    /// solver tolerance) whenever the expansion trajectory satisfies the
    /// guarded limits — the driver asserts this each iteration.
    pub fn anchor(&self) -> &[f64] {
        &self.anchor
    }

    /// Anchor feasibility at tolerance `tol` (scaled units).
    pub fn anchor_is_feasible(&self, tol: f64) -> bool {
        self.program.eq_residual(&self.anchor) <= tol && self.program.in_cones(&self.anchor, tol)
    }

    /// Minimum rate margin (bits) at a solution, when the objective had a
    /// margin variable.
    pub fn margin_bits(&self, x: &[f64]) -> Option<f64> {
        self.margin_col.map(|c| x[c] * self.margin_scale)
    }

    /// Reassemble a trajectory from a solution vector.
    ///
    /// Accelerations are derived from the solved velocities so the velocity
    /// recursion holds exactly; positions are re-integrated, and the
    /// residual endpoint drift (solver tolerance, millimeters) is absorbed
    /// by a minimum-norm acceleration correction, so the result passes the
    /// kinematic validator exactly.
    pub fn extract_trajectory(
        &self,
        x: &[f64],
        params: &SystemParams,
        scenario: &Scenario,
    ) -> Trajectory {
        let n = self.n;
        let dt = params.slot_s;
        let mut v = Vec::with_capacity(n + 1);
        v.push(scenario.base_vel);
        for i in 0..n {
            let c = self.v_cols[i];
            v.push(Vec2::new(x[c] * self.scale[c], x[c + 1] * self.scale[c + 1]));
        }
        let mut a: Vec<Vec2> = (0..n).map(|k| (v[k + 1] - v[k]) * (1.0 / dt)).collect();

        // Endpoint repair: distribute the integration drift over the
        // accelerations with weights proportional to their influence on
        // the final position (N−k−½), the minimum-norm correction.
        let trial = Trajectory::from_accels(scenario.base_pos, scenario.base_vel, a.clone(), dt);
        let drift = trial.s[n] - scenario.base_pos;
        let denom: f64 = (0..n).map(|k| (n - k) as f64 - 0.5).map(|w| w * w).sum::<f64>() * dt * dt;
        if denom > 0.0 {
            let mu = drift * (1.0 / denom);
            for (k, ak) in a.iter_mut().enumerate() {
                *ak = *ak - mu * ((n - k) as f64 - 0.5);
            }
        }
        Trajectory::from_accels(scenario.base_pos, scenario.base_vel, a, dt)
    }
}

// --------------------------------------------------------------------------
// scaled program assembly

/// Thin wrapper over the conic builder that records a physical scale and an
/// anchor value for every variable, applies column scaling to rows, and
/// normalizes each row by its largest coefficient.
struct Sb {
    b: ProgramBuilder,
    scale: Vec<f64>,
    anchor: Vec<f64>,
}

impl Sb {
    fn new() -> Self {
        Sb { b: ProgramBuilder::new(), scale: Vec::new(), anchor: Vec::new() }
    }

    /// Register free variables; `sa` is (scale, anchor value in physical
    /// units) per component. Returns the first column.
    fn free(&mut self, sa: &[(f64, f64)]) -> usize {
        let c = self.b.free_vars(sa.len());
        for &(s, a) in sa {
            self.scale.push(s);
            self.anchor.push(a / s);
        }
        c
    }

    /// Register one cone span. Component scales must be conic-consistent:
    /// scaled membership must be equivalent to physical membership.
    fn cone(&mut self, cone: Cone, sa: &[(f64, f64)]) -> usize {
        match cone {
            Cone::NonNeg(d) => debug_assert_eq!(d, sa.len()),
            Cone::Soc(d) => {
                debug_assert_eq!(d, sa.len());
                debug_assert!(sa.iter().all(|&(s, _)| rel_eq(s, sa[0].0)));
            }
            Cone::Rsoc(d) => {
                debug_assert_eq!(d, sa.len());
                debug_assert!(rel_eq(sa[0].0 * sa[1].0, sa[2].0 * sa[2].0));
                debug_assert!(sa.iter().skip(2).all(|&(s, _)| rel_eq(s, sa[2].0)));
            }
        }
        let c = self.b.cone_vars(cone);
        for &(s, a) in sa {
            self.scale.push(s);
            self.anchor.push(a / s);
        }
        c
    }

    /// Equality row in physical units.
    fn eq(&mut self, terms: &[(usize, f64)], rhs: f64) {
        let mut scaled: Vec<(usize, f64)> =
            terms.iter().map(|&(c, w)| (c, w * self.scale[c])).collect();
        let mx = scaled.iter().fold(0.0f64, |m, &(_, w)| m.max(w.abs()));
        debug_assert!(mx > 0.0, "degenerate row");
        for t in scaled.iter_mut() {
            t.1 /= mx;
        }
        self.b.eq(&scaled, rhs / mx);
    }

    /// Objective term in physical units.
    fn obj(&mut self, col: usize, w: f64) {
        self.b.obj(col, w * self.scale[col]);
    }
}

fn rel_eq(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-9 * a.abs().max(b.abs()).max(1.0)
}

/// Compile the trajectory subproblem around `spec.local`.
pub fn build_subproblem(
    spec: &SubproblemSpec,
    scenario: &Scenario,
    params: &SystemParams,
) -> Result<BuiltSubproblem, BuildError> {
    let n = params.num_slots;
    if spec.local.s.len() != n + 1 || spec.local.v.len() != n + 1 {
        return Err(BuildError::Dims(format!(
            "expansion point has {} position samples, expected {}",
            spec.local.s.len(),
            n + 1
        )));
    }
    if spec.schedule.num_slots() != n || spec.schedule.num_users() != scenario.num_users() {
        return Err(BuildError::Dims("schedule shape does not match scenario".into()));
    }
    if spec.candidate_set.iter().any(|&i| i >= scenario.num_users()) {
        return Err(BuildError::Dims("candidate user out of range".into()));
    }

    let dt = params.slot_s;
    let g = params.gravity;
    let v_cap = params.v_max - LIMIT_GUARD;
    let v_floor = params.v_min + LIMIT_GUARD;
    let a_cap = params.a_max - LIMIT_GUARD;
    let e_cap = params.energy_budget_j * (1.0 - ENERGY_GUARD_REL);

    // Physical scales per quantity kind.
    let ks = scenario.area_size_m;
    let kv = params.v_max;
    let ka = params.a_max;
    let kw = kv * kv; // squared speeds: w, p
    let ku = kv * kv * kv; // cubed speed epigraph u
    let kq = 1.0 / kv; // inverse-speed epigraph q
    let kd = ks * ks; // squared distances
    let kbits = spec
        .candidate_set
        .iter()
        .map(|&i| scenario.users[i].demand_bits)
        .fold(1.0f64, f64::max);

    let local = spec.local;
    let a_l: Vec<Vec2> = (0..n).map(|k| local.accel(dt, k)).collect();

    let mut sb = Sb::new();

    // Positions s[0..=N] and accelerations a[0..N-1] as free variables.
    let s0c = sb.free(&[(ks, local.s[0].x), (ks, local.s[0].y)]);
    let s_cols: Vec<usize> = std::iter::once(s0c)
        .chain((1..=n).map(|i| sb.free(&[(ks, local.s[i].x), (ks, local.s[i].y)])))
        .collect();
    let v0c = sb.free(&[(kv, scenario.base_vel.x), (kv, scenario.base_vel.y)]);
    let a_cols: Vec<usize> =
        (0..n).map(|k| sb.free(&[(ka, a_l[k].x), (ka, a_l[k].y)])).collect();

    // Per-sample cone chains for n = 1..=N. Velocities live inside their
    // second-order cone spans.
    let mut v_cols = Vec::with_capacity(n);
    let mut u_cols = Vec::with_capacity(n);
    let mut q_cols = Vec::with_capacity(n);
    for i in 1..=n {
        let vl = local.v[i];
        let tl = vl.norm();
        let vt = local.tangent_v(i, params.v_min, params.v_max);
        let psi_l = speed_lower_bound(vl, vt);
        let tau_l = tl.max(v_floor);
        let al = a_l[i - 1];
        let ql = (1.0 + al.norm_sq() / (g * g)) / tau_l;

        // t ≥ ‖v‖, t ≤ v_cap.
        let vc = sb.cone(Cone::Soc(3), &[(kv, tl), (kv, vl.x), (kv, vl.y)]);
        v_cols.push(vc + 1);
        let cap = sb.cone(Cone::NonNeg(1), &[(kv, v_cap - tl)]);
        sb.eq(&[(vc, 1.0), (cap, 1.0)], v_cap);

        // w ≥ t² (h pinned to ½), then u·t ≥ w² via 2·u·t ≥ (√2·w)².
        let wc = sb.cone(Cone::Rsoc(3), &[(kw, tl * tl), (1.0, 0.5), (kv, tl)]);
        sb.eq(&[(wc + 1, 1.0)], 0.5);
        sb.eq(&[(wc + 2, 1.0), (vc, -1.0)], 0.0);
        let uc = sb.cone(
            Cone::Rsoc(3),
            &[(ku, tl * tl * tl), (kv, tl), (kw, SQRT2 * tl * tl)],
        );
        u_cols.push(uc);
        sb.eq(&[(uc + 1, 1.0), (vc, -1.0)], 0.0);
        sb.eq(&[(uc + 2, 1.0), (wc, -SQRT2)], 0.0);

        // q·τ ≥ 1 + ‖a‖²/g² via 2·q·τ ≥ ‖(√2, √2·a/g)‖². τ lives here.
        let qc = sb.cone(
            Cone::Rsoc(5),
            &[
                (kq, ql),
                (kv, tau_l),
                (1.0, SQRT2),
                (1.0, SQRT2 * al.x / g),
                (1.0, SQRT2 * al.y / g),
            ],
        );
        q_cols.push(qc);
        let tau = qc + 1;
        sb.eq(&[(qc + 2, 1.0)], SQRT2);
        sb.eq(&[(qc + 3, 1.0), (a_cols[i - 1], -SQRT2 / g)], 0.0);
        sb.eq(&[(qc + 4, 1.0), (a_cols[i - 1] + 1, -SQRT2 / g)], 0.0);

        // τ² ≤ ψ_lb(v) (p carries the tangent), τ ≥ v_floor.
        let pc = sb.cone(Cone::Rsoc(3), &[(kw, psi_l), (1.0, 0.5), (kv, tau_l)]);
        sb.eq(
            &[(pc, 1.0), (v_cols[i - 1], -2.0 * vt.x), (v_cols[i - 1] + 1, -2.0 * vt.y)],
            -vt.norm_sq(),
        );
        sb.eq(&[(pc + 1, 1.0)], 0.5);
        sb.eq(&[(pc + 2, 1.0), (tau, -1.0)], 0.0);
        let nu = sb.cone(Cone::NonNeg(1), &[(kv, tau_l - v_floor)]);
        sb.eq(&[(tau, 1.0), (nu, -1.0)], v_floor);

        // ‖a‖ ≤ a_cap.
        let ac = sb.cone(
            Cone::Soc(3),
            &[(ka, al.norm().min(a_cap)), (ka, al.x), (ka, al.y)],
        );
        sb.eq(&[(ac + 1, 1.0), (a_cols[i - 1], -1.0)], 0.0);
        sb.eq(&[(ac + 2, 1.0), (a_cols[i - 1] + 1, -1.0)], 0.0);
        let acap = sb.cone(Cone::NonNeg(1), &[(ka, a_cap - al.norm().min(a_cap))]);
        sb.eq(&[(ac, 1.0), (acap, 1.0)], a_cap);

        // Kinematic recursions for interval k = i−1.
        let vprev = if i == 1 { v0c } else { v_cols[i - 2] };
        let (sc, sp) = (s_cols[i], s_cols[i - 1]);
        let acol = a_cols[i - 1];
        for d in 0..2 {
            sb.eq(
                &[(v_cols[i - 1] + d, 1.0), (vprev + d, -1.0), (acol + d, -dt)],
                0.0,
            );
            sb.eq(
                &[
                    (sc + d, 1.0),
                    (sp + d, -1.0),
                    (vprev + d, -dt),
                    (acol + d, -0.5 * dt * dt),
                ],
                0.0,
            );
        }
    }

    // Boundary conditions: closed loop, pinned start velocity.
    for d in 0..2 {
        let base = if d == 0 { scenario.base_pos.x } else { scenario.base_pos.y };
        let bv = if d == 0 { scenario.base_vel.x } else { scenario.base_vel.y };
        sb.eq(&[(s_cols[0] + d, 1.0)], base);
        sb.eq(&[(s_cols[n] + d, 1.0)], base);
        sb.eq(&[(v0c + d, 1.0)], bv);
    }

    // Rate rows over the candidate set.
    let coeffs = rate_bound_coeffs(local, scenario, params, spec.rate_model);
    let f = bits_factor(params);
    let anchors_margin: Vec<f64> = spec
        .candidate_set
        .iter()
        .map(|&i| {
            let bits: f64 =
                spec.schedule.slots_of(i).iter().map(|&k| f * coeffs.b[i][k]).sum();
            bits - scenario.users[i].demand_bits
        })
        .collect();
    let anchor_margin = anchors_margin.iter().copied().fold(f64::INFINITY, f64::min);

    let margin_col = if spec.objective == Objective::MaxMinMargin && !spec.candidate_set.is_empty()
    {
        Some(sb.free(&[(kbits, anchor_margin)]))
    } else {
        None
    };

    for (ci, &i) in spec.candidate_set.iter().enumerate() {
        let w = scenario.users[i].pos;
        let slots = spec.schedule.slots_of(i);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(slots.len() + 2);
        let mut rhs = -scenario.users[i].demand_bits;
        for &k in &slots {
            let sp = s_cols[k + 1];
            let (sl, al_coef, bl) = (local.s[k + 1], coeffs.a[i][k], coeffs.b[i][k]);
            let x_l = spec.rate_model.effective_horiz_sq(sl, w);
            // Epigraph of the (effective) squared distance for this slot.
            let dist_col = match spec.rate_model {
                RateModel::Nominal => {
                    let dl = sl - w;
                    let dc = sb.cone(
                        Cone::Rsoc(4),
                        &[(kd, x_l), (1.0, 0.5), (ks, dl.x), (ks, dl.y)],
                    );
                    sb.eq(&[(dc + 1, 1.0)], 0.5);
                    sb.eq(&[(dc + 2, 1.0), (sp, -1.0)], -w.x);
                    sb.eq(&[(dc + 3, 1.0), (sp + 1, -1.0)], -w.y);
                    dc
                }
                RateModel::WorstCase { d_th_m } => {
                    // e ≥ ‖s−w̃‖, z ≥ (e + d_th)² through f = e + d_th.
                    let dl = sl - w;
                    let el = dl.norm();
                    let ec =
                        sb.cone(Cone::Soc(3), &[(ks, el), (ks, dl.x), (ks, dl.y)]);
                    sb.eq(&[(ec + 1, 1.0), (sp, -1.0)], -w.x);
                    sb.eq(&[(ec + 2, 1.0), (sp + 1, -1.0)], -w.y);
                    let fl = el + d_th_m;
                    let zc = sb.cone(Cone::Rsoc(3), &[(kd, fl * fl), (1.0, 0.5), (ks, fl)]);
                    sb.eq(&[(zc + 1, 1.0)], 0.5);
                    sb.eq(&[(zc + 2, 1.0), (ec, -1.0)], d_th_m);
                    zc
                }
            };
            row.push((dist_col, f * al_coef));
            rhs += f * (bl + al_coef * x_l);
        }
        let surplus = sb.cone(Cone::NonNeg(1), &[(kbits, anchors_margin[ci] - anchor_margin)]);
        row.push((surplus, 1.0));
        if let Some(mc) = margin_col {
            row.push((mc, 1.0));
        }
        sb.eq(&row, rhs);
    }

    // Energy budget: Σ (c1·u + c2·q)·δt ≤ budget.
    if spec.include_energy_cap {
        let anchor_energy: f64 = (1..=n)
            .map(|i| {
                let tl = local.v[i].norm();
                let tau_l = tl.max(v_floor);
                let al = a_l[i - 1];
                (params.c1 * tl * tl * tl
                    + params.c2 * (1.0 + al.norm_sq() / (g * g)) / tau_l)
                    * dt
            })
            .sum();
        let es = sb.cone(Cone::NonNeg(1), &[(e_cap, e_cap - anchor_energy)]);
        let mut row: Vec<(usize, f64)> = Vec::with_capacity(2 * n + 1);
        for i in 0..n {
            row.push((u_cols[i], params.c1 * dt));
            row.push((q_cols[i], params.c2 * dt));
        }
        row.push((es, 1.0));
        sb.eq(&row, e_cap);
    }

    match spec.objective {
        Objective::MaxMinMargin => {
            if let Some(mc) = margin_col {
                sb.obj(mc, -1.0 / kbits);
            }
        }
        Objective::MinEnergy => {
            let esc = params.energy_budget_j.max(1.0);
            for i in 0..n {
                sb.obj(u_cols[i], params.c1 * dt / esc);
                sb.obj(q_cols[i], params.c2 * dt / esc);
            }
        }
    }

    let program = sb.b.finish();
    debug_assert!(program.check().is_ok());
    Ok(BuiltSubproblem {
        program,
        n,
        scale: sb.scale,
        anchor: sb.anchor,
        v_cols,
        margin_col,
        margin_scale: kbits,
    })
}
