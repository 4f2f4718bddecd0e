//! Robustness to imperfect user location information.
//!
//! Reported user positions carry a bounded Gaussian error: per user, a
//! zero-mean isotropic Gaussian offset rejected-and-resampled until its norm
//! is within the hard bound `d_th` (by default three standard deviations),
//! so the boundedness assumption the guarantees rest on holds by
//! construction.
//!
//! Two counter-measures are provided:
//!
//! * **worst case** — the alternating optimization runs unchanged but every
//!   horizontal distance is padded by `d_th` before the rate is evaluated.
//!   By the triangle inequality the true distance never exceeds the padded
//!   one, so every user covered under the padded rates stays covered under
//!   any admissible error realization.
//! * **minimum-excess maximization** — a refinement pass on the covered set
//!   of a finished nominal run: with the set frozen, alternate an exact
//!   slot reassignment maximizing the minimum excess (delivered − demanded
//!   bits) with a trajectory step whose margin objective is that same
//!   excess. Surplus bits are a buffer: realized rates that fall short of
//!   the estimate eat into the excess before they break coverage.

use crate::bcd_driver::{optimize, BcdOptions, DriverError, IterationRecord, SolveReport};
use crate::model::{self, RateModel, Scenario, Schedule, SystemParams, Trajectory, Vec2};
use crate::sca_builder::{build_subproblem, LocalPoint, Objective, SubproblemSpec};
use crate::schedule_solver::{rate_matrix, subset_feasible, RateMatrix, SchedOptions, SearchBudget, SubsetVerdict};
use aircover_conic::{solve, Status};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::time::Instant;

/// Bounded-Gaussian location error model.
#[derive(Debug, Clone, Copy)]
pub struct UliErrorModel {
    /// Per-axis standard deviation before truncation (m).
    pub sigma_m: f64,
    /// Hard bound on the error norm (m).
    pub d_th_m: f64,
    pub seed: u64,
}

impl UliErrorModel {
    /// Standard model: the bound sits at three standard deviations.
    pub fn new(sigma_m: f64, seed: u64) -> Self {
        UliErrorModel { sigma_m, d_th_m: 3.0 * sigma_m, seed }
    }
}

/// One isotropic Gaussian draw (Box–Muller), rejected until within `d_th`.
fn bounded_error(rng: &mut ChaCha8Rng, sigma: f64, d_th: f64) -> Vec2 {
    if sigma == 0.0 {
        return Vec2::new(0.0, 0.0);
    }
    loop {
        let u1: f64 = rng.gen();
        if u1 <= f64::MIN_POSITIVE {
            continue;
        }
        let r = sigma * (-2.0 * u1.ln()).sqrt();
        let th = 2.0 * std::f64::consts::PI * rng.gen::<f64>();
        let e = Vec2::new(r * th.cos(), r * th.sin());
        if e.norm() <= d_th {
            return e;
        }
    }
}

/// Perturb every user position by a bounded Gaussian error. Returns the
/// scenario as the optimizer will see it (estimated positions) alongside
/// the unchanged ground truth. Deterministic under the model's seed.
pub fn apply_uli_error(scenario: &Scenario, model: &UliErrorModel) -> (Scenario, Scenario) {
    let mut rng = ChaCha8Rng::seed_from_u64(model.seed);
    let mut estimated = scenario.clone();
    for u in estimated.users.iter_mut() {
        u.pos = u.pos + bounded_error(&mut rng, model.sigma_m, model.d_th_m);
    }
    (estimated, scenario.clone())
}

/// Worst-case robust run: the standard alternation under distance padding.
/// `d_th_m = 0` reduces to the nominal optimizer exactly.
pub fn optimize_wc(
    estimated: &Scenario,
    params: &SystemParams,
    init: Trajectory,
    d_th_m: f64,
    options: &BcdOptions,
) -> Result<SolveReport, DriverError> {
    let mut opts = options.clone();
    opts.rate_model = RateModel::worst_case(d_th_m);
    optimize(estimated, params, init, &opts)
}

/// Minimum over `set` of delivered − demanded bits for the given pair.
pub fn min_excess(
    params: &SystemParams,
    traj: &Trajectory,
    sched: &Schedule,
    scenario: &Scenario,
    set: &[usize],
) -> f64 {
    set.iter()
        .map(|&m| {
            model::total_bits(params, RateModel::Nominal, traj, sched, scenario.users[m].pos, m)
                - scenario.users[m].demand_bits
        })
        .fold(f64::INFINITY, f64::min)
}

/// Minimum excess of a schedule over `set`, read off the rate matrix.
fn sched_min_excess(sched: &Schedule, rates: &RateMatrix, demands: &[f64], set: &[usize]) -> f64 {
    set.iter()
        .map(|&m| {
            sched.slots_of(m).iter().map(|&k| rates.r[m][k]).sum::<f64>() - demands[m]
        })
        .fold(f64::INFINITY, f64::min)
}

/// Slot reassignment over the frozen set maximizing the minimum excess:
/// bisection on the excess level, each probe a covering-assignment search
/// with demands raised by the probe level. Idle slots are then fed greedily
/// to the currently tightest member, and the result is kept only if it
/// beats the incumbent, so budget-truncated probes can never regress the
/// excess. The status reports whether every probe was certified.
fn best_min_excess_assignment(
    rates: &RateMatrix,
    demands: &[f64],
    set: &[usize],
    incumbent: &Schedule,
    opts: &SchedOptions,
) -> (Schedule, &'static str) {
    let n = rates.num_slots();
    let mut certified = true;
    let mut probe = |eta: f64| -> Option<Vec<Option<usize>>> {
        let mut d2 = demands.to_vec();
        for &m in set {
            d2[m] = demands[m] + eta;
        }
        let mut budget = SearchBudget {
            deadline: Some(Instant::now() + opts.timeout),
            node_budget: opts.node_budget,
            use_lp_prune: true,
        };
        match subset_feasible(set, rates, &d2, &mut budget) {
            SubsetVerdict::Feasible(a) => Some(a),
            SubsetVerdict::Infeasible => None,
            SubsetVerdict::Unknown => {
                certified = false;
                None
            }
        }
    };
    let mut witness = match probe(0.0) {
        Some(a) => a,
        None => return (incumbent.clone(), "kept"),
    };
    let total_best: f64 = (0..n)
        .map(|k| set.iter().map(|&m| rates.r[m][k]).fold(0.0, f64::max))
        .sum();
    let sum_q: f64 = set.iter().map(|&m| demands[m]).sum();
    let mut lo = 0.0;
    let mut hi = ((total_best - sum_q) / set.len() as f64).max(0.0) + 1.0;
    while hi - lo > 1.0f64.max(1e-9 * hi) {
        let mid = 0.5 * (lo + hi);
        match probe(mid) {
            Some(a) => {
                witness = a;
                lo = mid;
            }
            None => hi = mid,
        }
    }

    // Feed idle slots to the tightest member.
    let mut delivered: Vec<f64> = (0..rates.num_users())
        .map(|u| (0..n).filter(|&k| witness[k] == Some(u)).map(|k| rates.r[u][k]).sum())
        .collect();
    for k in 0..n {
        if witness[k].is_some() {
            continue;
        }
        let tightest = set
            .iter()
            .copied()
            .filter(|&m| rates.r[m][k] > 0.0)
            .min_by(|&a, &b| {
                (delivered[a] - demands[a]).total_cmp(&(delivered[b] - demands[b]))
            });
        if let Some(m) = tightest {
            witness[k] = Some(m);
            delivered[m] += rates.r[m][k];
        }
    }
    let cand = Schedule::from_assignment(rates.num_users(), &witness);
    if sched_min_excess(&cand, rates, demands, set)
        >= sched_min_excess(incumbent, rates, demands, set)
    {
        (cand, if certified { "exact" } else { "bounded" })
    } else {
        (incumbent.clone(), "kept")
    }
}

/// Excess-maximization refinement on a finished run's covered set.
///
/// Alternates the exact reassignment above with a trajectory step whose
/// max-min margin objective is the excess itself, stopping when the
/// fractional improvement drops below `epsilon`.
pub fn optimize_medm(
    scenario: &Scenario,
    params: &SystemParams,
    warm: &SolveReport,
    epsilon: f64,
    options: &BcdOptions,
) -> Result<SolveReport, DriverError> {
    if warm.covered_set.is_empty() {
        return Err(DriverError::EmptyCoveredSet);
    }
    let t0 = Instant::now();
    let set = warm.covered_set.clone();
    let demands: Vec<f64> = scenario.users.iter().map(|u| u.demand_bits).collect();
    let mut traj = warm.final_trajectory.clone();
    let mut sched = warm.final_schedule.clone();
    let mut iterations: Vec<IterationRecord> = Vec::new();
    let mut eta_prev = f64::NEG_INFINITY;
    let mut termination = "max_iters".to_string();

    for iter in 1..=options.max_iters {
        // (i) slot reassignment over the frozen set.
        let rates = rate_matrix(&traj, scenario, params, RateModel::Nominal);
        let (s2, sched_status) =
            best_min_excess_assignment(&rates, &demands, &set, &sched, &options.sched);
        sched = s2;

        // (ii) trajectory step: maximize the same excess around the iterate.
        let local = LocalPoint::of(&traj);
        let built = build_subproblem(
            &SubproblemSpec {
                schedule: &sched,
                candidate_set: &set,
                local: &local,
                rate_model: RateModel::Nominal,
                objective: Objective::MaxMinMargin,
                include_energy_cap: true,
            },
            scenario,
            params,
        )?;
        if iter >= 2 && !built.anchor_is_feasible(1e-4) {
            return Err(DriverError::AnchorInfeasible { iter, tol: 1e-4 });
        }
        let sol = solve(&built.program, &options.conic)?;
        let conic_status = format!("{:?}", sol.status);
        if sol.status == Status::Optimal {
            let cand = built.extract_trajectory(&sol.x, params, scenario);
            // Keep the set covered on real rates (the excess bound is a
            // lower bound, so this only filters numerical edge cases).
            let real = model::coverage(params, RateModel::Nominal, &cand, &sched, scenario);
            if set.iter().all(|&m| real.covered[m]) {
                traj = cand;
            }
        }

        let eta = min_excess(params, &traj, &sched, scenario, &set);
        iterations.push(IterationRecord {
            coverage: set.len(),
            covered_set: set.clone(),
            energy_used_j: model::total_energy(params, &traj).unwrap_or(f64::NAN),
            min_rate_slack_bits: Some(eta),
            sched_status: sched_status.into(),
            conic_status,
        });
        if iter >= 2 && eta - eta_prev < epsilon * eta_prev.abs().max(1.0) {
            termination = "converged".into();
            break;
        }
        eta_prev = eta;
    }

    Ok(SolveReport {
        coverage: set.len(),
        covered_set: set,
        energy_used_j: model::total_energy(params, &traj).unwrap_or(f64::NAN),
        final_trajectory: traj,
        final_schedule: sched,
        iterations,
        wall_ms: t0.elapsed().as_millis() as u64,
        termination,
        infeasible: false,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::init_traj::{launch_velocity, InitConfig, InitKind};
    use crate::model::UserSpec;

    fn ring_scenario(
        horizon_s: f64,
        budget_j: f64,
        users: Vec<UserSpec>,
    ) -> (SystemParams, Scenario) {
        let params = SystemParams::defaults(horizon_s, budget_j);
        let ls = 1500.0;
        let center = Vec2::new(ls / 2.0, ls / 2.0);
        let base = Vec2::new(center.x + ls / 4.0, center.y);
        let base_vel = launch_velocity(center, base, params.num_slots, params.slot_s);
        (params, Scenario { area_size_m: ls, base_pos: base, base_vel, users })
    }

    fn on_ring(theta: f64, demand: f64) -> UserSpec {
        let center = Vec2::new(750.0, 750.0);
        UserSpec {
            pos: center + Vec2::new(375.0 * theta.cos(), 375.0 * theta.sin()),
            demand_bits: demand,
        }
    }

    fn cit(params: &SystemParams, scenario: &Scenario) -> Trajectory {
        InitConfig::new(InitKind::Circular, scenario).build(params, scenario).unwrap()
    }

    #[test]
    fn zero_sigma_is_the_identity_and_errors_stay_bounded() {
        let (_, scenario) = ring_scenario(60.0, 1e4, vec![on_ring(0.3, 1e6), on_ring(2.0, 2e6)]);
        let (est, truth) = apply_uli_error(&scenario, &UliErrorModel::new(0.0, 7));
        assert_eq!(est, truth);

        let model = UliErrorModel::new(10.0, 42);
        let (est1, _) = apply_uli_error(&scenario, &model);
        let (est2, _) = apply_uli_error(&scenario, &model);
        assert_eq!(est1, est2, "same seed must reproduce the same errors");
        for (e, t) in est1.users.iter().zip(&scenario.users) {
            assert!((e.pos - t.pos).norm() <= model.d_th_m + 1e-12);
            assert_eq!(e.demand_bits, t.demand_bits);
        }
    }

    #[test]
    fn truncated_error_spread_matches_the_gaussian_oracle() {
        // 5000 users give 10^4 per-axis samples. Truncating an isotropic
        // Gaussian at three sigma shrinks the per-axis second moment to
        // (1 − (1+u)e^{−u})/(1 − e^{−u}) of sigma², u = 9/2.
        let sigma = 10.0;
        let users: Vec<UserSpec> = (0..5000)
            .map(|i| UserSpec { pos: Vec2::new(i as f64, 0.0), demand_bits: 1.0 })
            .collect();
        let (params, _) = ring_scenario(1.0, 1e4, vec![]);
        let _ = params;
        let scenario = Scenario {
            area_size_m: 1500.0,
            base_pos: Vec2::new(0.0, 0.0),
            base_vel: Vec2::new(10.0, 0.0),
            users,
        };
        let (est, _) = apply_uli_error(&scenario, &UliErrorModel::new(sigma, 99));
        let mut sq = 0.0;
        let mut count = 0usize;
        for (e, t) in est.users.iter().zip(&scenario.users) {
            let d = e.pos - t.pos;
            sq += d.x * d.x + d.y * d.y;
            count += 2;
        }
        let emp = (sq / count as f64).sqrt();
        let u = 4.5f64;
        let oracle = sigma * ((1.0 - (1.0 + u) * (-u).exp()) / (1.0 - (-u).exp())).sqrt();
        assert!((emp - oracle).abs() <= 0.02 * sigma, "{emp} vs oracle {oracle}");
        assert!((emp - sigma).abs() <= 0.05 * sigma, "{emp} vs sigma {sigma}");
    }

    #[test]
    fn zero_threshold_reproduces_the_nominal_run_exactly() {
        let (params, scenario) =
            ring_scenario(60.0, 1e4, vec![on_ring(0.9, 1.2e7), on_ring(3.0, 8e6)]);
        let opts = BcdOptions::default();
        let mut nominal = optimize(&scenario, &params, cit(&params, &scenario), &opts).unwrap();
        let mut wc = optimize_wc(&scenario, &params, cit(&params, &scenario), 0.0, &opts).unwrap();
        nominal.wall_ms = 0;
        wc.wall_ms = 0;
        assert_eq!(
            serde_json::to_string(&nominal).unwrap(),
            serde_json::to_string(&wc).unwrap()
        );
    }

    #[test]
    fn wc_covered_users_survive_every_sampled_error() {
        let (params, estimated) = ring_scenario(
            60.0,
            1e4,
            vec![on_ring(0.9, 1.2e7), on_ring(3.0, 9e6), on_ring(5.0, 7e6)],
        );
        let d_th = 30.0;
        let report =
            optimize_wc(&estimated, &params, cit(&params, &estimated), d_th, &BcdOptions::default())
                .unwrap();
        assert!(!report.covered_set.is_empty(), "nothing covered: {report:?}");

        // Padded rates never exceed nominal ones on the same pair.
        let wc_model = RateModel::worst_case(d_th);
        for &m in &report.covered_set {
            let wc_bits = model::total_bits(
                &params, wc_model, &report.final_trajectory, &report.final_schedule,
                estimated.users[m].pos, m,
            );
            let nom_bits = model::total_bits(
                &params, RateModel::Nominal, &report.final_trajectory, &report.final_schedule,
                estimated.users[m].pos, m,
            );
            assert!(wc_bits <= nom_bits);
        }

        // Any admissible truth keeps every covered user covered — exactly.
        for trial in 0..300u64 {
            let (truth, _) =
                apply_uli_error(&estimated, &UliErrorModel::new(d_th / 3.0, 1000 + trial));
            for &m in &report.covered_set {
                let bits = model::total_bits(
                    &params, RateModel::Nominal, &report.final_trajectory,
                    &report.final_schedule, truth.users[m].pos, m,
                );
                assert!(
                    bits >= estimated.users[m].demand_bits,
                    "user {m} lost coverage under realization {trial}"
                );
            }
        }
    }

    #[test]
    fn medm_single_user_takes_every_useful_slot() {
        let (params, scenario) = ring_scenario(60.0, 1e4, vec![on_ring(0.9, 1e7)]);
        let opts = BcdOptions::default();
        let warm = optimize(&scenario, &params, cit(&params, &scenario), &opts).unwrap();
        assert_eq!(warm.covered_set, vec![0]);
        let refined = optimize_medm(&scenario, &params, &warm, 1e-3, &opts).unwrap();
        refined.check_invariants(&params, &scenario).unwrap();

        let eta = min_excess(
            &params,
            &refined.final_trajectory,
            &refined.final_schedule,
            &scenario,
            &[0],
        );
        let last = refined.iterations.last().unwrap().min_rate_slack_bits.unwrap();
        assert!((eta - last).abs() <= 1e-6 * eta.abs().max(1.0));
        // Every slot carries a positive rate here, so all belong to the user.
        assert_eq!(refined.final_schedule.slots_of(0).len(), params.num_slots);
        let warm_eta = min_excess(
            &params, &warm.final_trajectory, &warm.final_schedule, &scenario, &[0],
        );
        assert!(eta >= warm_eta - 1.0, "{eta} < {warm_eta}");
    }

    #[test]
    fn medm_trace_is_monotone_and_beats_the_warm_start() {
        let (params, scenario) = ring_scenario(
            60.0,
            1e4,
            vec![on_ring(1.2, 1.1e7), on_ring(4.0, 9e6), on_ring(2.2, 6e6)],
        );
        let opts = BcdOptions::default();
        let warm = optimize(&scenario, &params, cit(&params, &scenario), &opts).unwrap();
        assert!(!warm.covered_set.is_empty());
        let refined = optimize_medm(&scenario, &params, &warm, 1e-3, &opts).unwrap();
        refined.check_invariants(&params, &scenario).unwrap();
        let etas: Vec<f64> = refined
            .iterations
            .iter()
            .map(|r| r.min_rate_slack_bits.unwrap())
            .collect();
        for w in etas.windows(2) {
            assert!(
                w[1] >= w[0] - 2.0 - 1e-6 * w[0].abs(),
                "excess regressed: {} then {}",
                w[0],
                w[1]
            );
        }
        let warm_eta = min_excess(
            &params,
            &warm.final_trajectory,
            &warm.final_schedule,
            &scenario,
            &warm.covered_set,
        );
        let final_eta = *etas.last().unwrap();
        assert!(final_eta >= warm_eta - 2.0, "{final_eta} < {warm_eta}");
        assert!(final_eta >= 0.0);
    }
}
