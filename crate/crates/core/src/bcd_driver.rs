//! Alternating-optimization driver.
//!
//! From an initial trajectory, the driver alternates two blocks until the
//! number of covered users stops improving:
//!
//! 1. **schedule step** — with the trajectory fixed, the exact scheduler
//!    picks the largest coverable user set and a slot assignment for it;
//! 2. **trajectory step** — with the schedule fixed, the convexified
//!    subproblem maximizes the minimum rate margin over the covered set
//!    around the current iterate, and the solution becomes the next iterate.
//!
//! Each block can only improve the objective: the previous schedule remains
//! valid for the new trajectory (the margin is a lower bound on real rates),
//! and the previous trajectory is feasible for its own subproblem (the
//! bounds are tight at the expansion point, asserted every iteration), so
//! coverage is non-decreasing along the run. The driver also tracks the
//! best feasible incumbent explicitly, so the reported trace is monotone by
//! construction and a regression would surface as a failed invariant, not a
//! silent drop.
//!
//! The trajectory step may also attempt to *grow* the covered set: spare
//! slot capacity is reassigned to the most nearly covered outsider and the
//! margin objective is asked to close the remaining gap; the grown set is
//! kept only when the conic solution certifies a nonnegative margin and the
//! real rates confirm it.
//!
//! Initial trajectories are allowed to be infeasible (too fast, too sharp,
//! or over budget): iteration 1 tolerates an infeasible expansion point,
//! and if its subproblem proves infeasible the driver falls back to the
//! cheapest closable loop — or reports an energy-infeasibility verdict when
//! even that loop exceeds the budget.

use crate::model::{
    self, CoverageResult, RateModel, Scenario, Schedule, SystemParams, Trajectory, Vec2,
};
use crate::sca_builder::{build_subproblem, LocalPoint, Objective, SubproblemSpec};
use crate::schedule_solver::{rate_matrix, solve_scheduling, RateMatrix, SchedOptions};
use aircover_conic::{solve, Settings, Status};
use serde::{Deserialize, Serialize};
use std::time::Instant;
use thiserror::Error;

/// Driver controls.
#[derive(Debug, Clone)]
pub struct BcdOptions {
    /// Hard cap on alternations (termination is normally by plateau).
    pub max_iters: usize,
    /// Stop after this many consecutive iterations without a coverage
    /// improvement. The alternating scheme's stopping rule is 1; larger
    /// values let integer plateaus ride through.
    pub patience: usize,
    pub sched: SchedOptions,
    pub conic: Settings,
    /// Rate model used throughout (worst-case padding for the robust run).
    pub rate_model: RateModel,
    /// Attempt within-iteration covered-set growth in the trajectory step.
    pub grow_candidates: bool,
}

impl Default for BcdOptions {
    fn default() -> Self {
        BcdOptions {
            max_iters: 40,
            patience: 1,
            sched: SchedOptions::default(),
            conic: Settings::default(),
            rate_model: RateModel::Nominal,
            grow_candidates: true,
        }
    }
}

/// One alternation of the driver, as recorded in the report.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IterationRecord {
    /// Best coverage witnessed by a feasible incumbent up to and including
    /// this iteration's schedule step.
    pub coverage: usize,
    /// The working covered set after this iteration's schedule step.
    pub covered_set: Vec<usize>,
    /// Propulsion energy of the trajectory the schedule step ran on (J).
    pub energy_used_j: f64,
    /// Minimum over the working set of delivered − demanded bits.
    pub min_rate_slack_bits: Option<f64>,
    /// Scheduler outcome: "exact" or "heuristic(gap=g)", with "/timeout"
    /// appended when the deadline cut the search.
    pub sched_status: String,
    /// Conic status of the trajectory step that followed ("skipped" on the
    /// terminating iteration).
    pub conic_status: String,
}

/// Full account of one optimization run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveReport {
    pub iterations: Vec<IterationRecord>,
    pub final_trajectory: Trajectory,
    pub final_schedule: Schedule,
    pub covered_set: Vec<usize>,
    pub coverage: usize,
    pub energy_used_j: f64,
    pub wall_ms: u64,
    /// "plateau", "all_covered", "max_iters", "infeasible_energy: …", or
    /// "subproblem: …".
    pub termination: String,
    /// Set when the scenario admits no loop within the energy budget; the
    /// report then carries the cheapest loop found and zero coverage.
    pub infeasible: bool,
}

impl SolveReport {
    /// Hard invariants every report must satisfy; used by tests and by the
    /// experiment harness when ingesting run files.
    pub fn check_invariants(
        &self,
        params: &SystemParams,
        scenario: &Scenario,
    ) -> Result<(), String> {
        for w in self.iterations.windows(2) {
            if w[1].coverage < w[0].coverage {
                return Err(format!(
                    "coverage regressed: {} then {}",
                    w[0].coverage, w[1].coverage
                ));
            }
        }
        if self.infeasible {
            return Ok(());
        }
        let report =
            model::validate(params, scenario, &self.final_trajectory, &self.final_schedule)
                .map_err(|e| e.to_string())?;
        if !report.is_feasible() {
            return Err(format!("final trajectory invalid: {:?}", report.violations));
        }
        let cov = model::coverage(
            params,
            RateModel::Nominal,
            &self.final_trajectory,
            &self.final_schedule,
            scenario,
        );
        if self.covered_set.iter().any(|&i| !cov.covered[i]) {
            return Err("reported covered set is not covered by the final pair".into());
        }
        let e = model::total_energy(params, &self.final_trajectory).map_err(|e| e.to_string())?;
        if e > params.energy_budget_j * (1.0 + 1e-6) {
            return Err(format!("energy {} exceeds budget {}", e, params.energy_budget_j));
        }
        Ok(())
    }
}

#[derive(Debug, Error)]
pub enum DriverError {
    #[error("model error: {0}")]
    Model(#[from] crate::model::ModelError),
    #[error("subproblem build error: {0}")]
    Build(#[from] crate::sca_builder::BuildError),
    #[error("conic solver error: {0}")]
    Conic(#[from] aircover_conic::SolverError),
    #[error(
        "expansion point infeasible in its own subproblem at iteration {iter} \
         (tolerance {tol}): the convexification lost tightness"
    )]
    AnchorInfeasible { iter: usize, tol: f64 },
    #[error("refinement requires a nonempty covered set")]
    EmptyCoveredSet,
}

/// Mutable state threaded through the alternations.
#[derive(Debug)]
pub struct BcdState<'a> {
    pub scenario: &'a Scenario,
    pub params: &'a SystemParams,
    pub options: &'a BcdOptions,
    /// Current iterate.
    pub traj: Trajectory,
    pub schedule: Schedule,
    pub covered: Vec<usize>,
    pub iterations: Vec<IterationRecord>,
    /// Best feasible (trajectory, schedule, covered set) seen so far.
    best: Option<(Trajectory, Schedule, Vec<usize>)>,
    plateau: usize,
    iter_index: usize,
    termination: Option<String>,
}

impl<'a> BcdState<'a> {
    pub fn new(
        scenario: &'a Scenario,
        params: &'a SystemParams,
        options: &'a BcdOptions,
        init: Trajectory,
    ) -> Self {
        BcdState {
            scenario,
            params,
            options,
            traj: init,
            schedule: Schedule::empty(scenario.num_users(), params.num_slots),
            covered: Vec::new(),
            iterations: Vec::new(),
            best: None,
            plateau: 0,
            iter_index: 0,
            termination: None,
        }
    }

    fn best_coverage(&self) -> usize {
        self.iterations.last().map_or(0, |r| r.coverage)
    }
}

fn sched_status(gap: usize, timed_out: bool) -> String {
    let mut s =
        if gap == 0 { "exact".to_string() } else { format!("heuristic(gap={gap})") };
    if timed_out {
        s.push_str("/timeout");
    }
    s
}

fn covered_users(cov: &CoverageResult) -> Vec<usize> {
    cov.covered
        .iter()
        .enumerate()
        .filter_map(|(i, &c)| if c { Some(i) } else { None })
        .collect()
}

fn min_slack(cov: &CoverageResult, scenario: &Scenario, set: &[usize]) -> Option<f64> {
    set.iter()
        .map(|&i| cov.delivered_bits[i] - scenario.users[i].demand_bits)
        .min_by(f64::total_cmp)
}

/// Reassign spare slot capacity toward `target`: slots move to the target
/// (its best rates first) as long as every donor keeps its full demand on
/// the current rates. Returns the modified schedule if the target gained
/// at least one slot.
fn harvest_slots_for(
    target: usize,
    schedule: &Schedule,
    rates: &RateMatrix,
    demands: &[f64],
) -> Option<Schedule> {
    let n = rates.num_slots();
    let mut assign = schedule.assignment();
    let mut delivered: Vec<f64> = (0..rates.num_users())
        .map(|u| (0..n).filter(|&k| assign[k] == Some(u)).map(|k| rates.r[u][k]).sum())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| rates.r[target][b].total_cmp(&rates.r[target][a]));
    let mut got = 0usize;
    for k in order {
        if rates.r[target][k] <= 0.0 || delivered[target] >= demands[target] {
            break;
        }
        match assign[k] {
            None => {
                assign[k] = Some(target);
                delivered[target] += rates.r[target][k];
                got += 1;
            }
            Some(j) if j != target && delivered[j] - rates.r[j][k] >= demands[j] => {
                delivered[j] -= rates.r[j][k];
                assign[k] = Some(target);
                delivered[target] += rates.r[target][k];
                got += 1;
            }
            _ => {}
        }
    }
    (got > 0).then(|| Schedule::from_assignment(rates.num_users(), &assign))
}

/// One full alternation. Returns `false` once the run has terminated.
pub fn iteration_step(st: &mut BcdState) -> Result<bool, DriverError> {
    let params = st.params;
    let scenario = st.scenario;
    let opts = st.options;
    st.iter_index += 1;

    // ---- schedule step (trajectory fixed) --------------------------------
    let rates = rate_matrix(&st.traj, scenario, params, opts.rate_model);
    let demands: Vec<f64> = scenario.users.iter().map(|u| u.demand_bits).collect();
    let outcome = solve_scheduling(&rates, &demands, &opts.sched);
    let new_cov = outcome.coverage.count();

    // Keep the incumbent schedule only if it still covers its set on the
    // current trajectory and the scheduler found nothing better (the former
    // always holds along the chain, the latter matters in heuristic mode).
    let old_still_covers = !st.covered.is_empty() && {
        let c = model::coverage(params, opts.rate_model, &st.traj, &st.schedule, scenario);
        st.covered.iter().all(|&i| c.covered[i])
    };
    if new_cov >= st.covered.len() || !old_still_covers {
        st.schedule = outcome.schedule;
        st.covered = covered_users(&outcome.coverage);
    }
    let cov_result = model::coverage(params, opts.rate_model, &st.traj, &st.schedule, scenario);

    // Coverage is only witnessed by feasible trajectories; seeds may not be.
    let traj_ok = st.iter_index > 1
        || model::validate(params, scenario, &st.traj, &st.schedule)
            .map(|r| r.is_feasible())
            .unwrap_or(false);
    let prev_best = st.best_coverage();
    let witnessed = if traj_ok { st.covered.len().max(prev_best) } else { prev_best };
    if traj_ok && st.covered.len() >= prev_best {
        st.best = Some((st.traj.clone(), st.schedule.clone(), st.covered.clone()));
    }

    let mut record = IterationRecord {
        coverage: witnessed,
        covered_set: st.covered.clone(),
        energy_used_j: model::total_energy(params, &st.traj).unwrap_or(f64::NAN),
        min_rate_slack_bits: min_slack(&cov_result, scenario, &st.covered),
        sched_status: sched_status(outcome.bound_gap, outcome.timed_out),
        conic_status: "skipped".into(),
    };

    // ---- termination checks ----------------------------------------------
    if witnessed <= prev_best && !st.iterations.is_empty() {
        st.plateau += 1;
    } else {
        st.plateau = 0;
    }
    let all_covered = traj_ok && witnessed == scenario.num_users();
    if st.plateau >= opts.patience || all_covered || st.iter_index >= opts.max_iters {
        st.termination = Some(if all_covered {
            "all_covered".into()
        } else if st.plateau >= opts.patience {
            "plateau".into()
        } else {
            "max_iters".into()
        });
        st.iterations.push(record);
        return Ok(false);
    }

    // ---- trajectory step (schedule fixed) ----------------------------------
    // An invalid seed still anchors the rate bounds at its own positions (the
    // designed geometry is the point of the seed), but its velocities can be
    // wild enough — corner reversals, speeds far past the cap — to make the
    // speed tangents jointly unsatisfiable. The bounds are valid around any
    // expansion point, so substitute a smooth loop's velocity profile.
    let local = if traj_ok {
        LocalPoint::of(&st.traj)
    } else {
        LocalPoint { s: st.traj.s.clone(), v: loop_local(scenario, params).v }
    };
    let built = build_subproblem(
        &SubproblemSpec {
            schedule: &st.schedule,
            candidate_set: &st.covered,
            local: &local,
            rate_model: opts.rate_model,
            objective: if st.covered.is_empty() {
                Objective::MinEnergy
            } else {
                Objective::MaxMinMargin
            },
            include_energy_cap: true,
        },
        scenario,
        params,
    )?;
    // Tightness of the convexification: from the second iteration on, the
    // iterate was extracted from the previous subproblem and must be
    // feasible in the new one.
    if st.iter_index >= 2 && !built.anchor_is_feasible(1e-4) {
        return Err(DriverError::AnchorInfeasible { iter: st.iter_index, tol: 1e-4 });
    }

    let mut accepted: Option<Trajectory> = None;

    // Optional covered-set growth: hand the most nearly covered outsider
    // the spare slot capacity and let the margin objective close its gap.
    if opts.grow_candidates && st.covered.len() < scenario.num_users() {
        let outsider = (0..scenario.num_users())
            .filter(|i| !st.covered.contains(i))
            .max_by(|&a, &b| {
                let key = |u: usize| {
                    let q = demands[u].max(1.0);
                    let total: f64 = rates.r[u].iter().sum();
                    (cov_result.delivered_bits[u] / q, total / q)
                };
                let (ka, kb) = (key(a), key(b));
                ka.0.total_cmp(&kb.0).then(ka.1.total_cmp(&kb.1))
            });
        if let Some(u) = outsider {
            if let Some(grown_sched) = harvest_slots_for(u, &st.schedule, &rates, &demands) {
                let mut grown_set = st.covered.clone();
                grown_set.push(u);
                grown_set.sort_unstable();
                let grown = build_subproblem(
                    &SubproblemSpec {
                        schedule: &grown_sched,
                        candidate_set: &grown_set,
                        local: &local,
                        rate_model: opts.rate_model,
                        objective: Objective::MaxMinMargin,
                        include_energy_cap: true,
                    },
                    scenario,
                    params,
                )?;
                let sol = solve(&grown.program, &opts.conic)?;
                if sol.status == Status::Optimal {
                    let traj = grown.extract_trajectory(&sol.x, params, scenario);
                    let margin = grown.margin_bits(&sol.x).unwrap_or(f64::NEG_INFINITY);
                    if st.covered.is_empty() {
                        // Nothing covered yet: any optimal pull toward the
                        // most promising user is progress; adopt the
                        // trajectory but claim no coverage.
                        record.conic_status = "optimal(seek)".into();
                        accepted = Some(traj);
                    } else if margin >= 0.0 {
                        let real = model::coverage(
                            params, opts.rate_model, &traj, &grown_sched, scenario,
                        );
                        if grown_set.iter().all(|&i| real.covered[i]) {
                            record.conic_status = "optimal(grown)".into();
                            st.schedule = grown_sched;
                            st.covered = grown_set;
                            accepted = Some(traj);
                        }
                    }
                }
            }
        }
    }

    if accepted.is_none() {
        let sol = solve(&built.program, &opts.conic)?;
        if sol.status == Status::Optimal {
            record.conic_status = "optimal".into();
            accepted = Some(built.extract_trajectory(&sol.x, params, scenario));
        } else if st.iter_index == 1 {
            // The seed was beyond repair in one step; restart from the
            // cheapest closable loop or report an energy verdict. The
            // record claims no coverage: an unusable seed witnesses none.
            record.conic_status = format!("{:?}(seed)", sol.status);
            record.coverage = 0;
            record.covered_set.clear();
            record.min_rate_slack_bits = None;
            st.iterations.push(record);
            return seed_recovery(st);
        } else {
            record.conic_status = format!("{:?}", sol.status);
            st.termination = Some(format!("subproblem: {:?}", sol.status));
            st.iterations.push(record);
            return Ok(false);
        }
    }

    if let Some(traj) = accepted {
        // Defensive monotonicity: the new iterate must keep the working set
        // covered on real rates (the lower-bound argument guarantees it);
        // otherwise keep the old trajectory and let the plateau rule wind
        // the run down. Iteration 1 always adopts — the seed may be
        // infeasible, in which case its coverage was never witnessed and
        // the extracted trajectory is the first usable iterate.
        let real = model::coverage(params, opts.rate_model, &traj, &st.schedule, scenario);
        let keeps_set = st.covered.iter().all(|&i| real.covered[i]);
        if st.iter_index == 1 || keeps_set {
            st.traj = traj;
        }
        // A repaired seed witnesses its achievement at the end of the
        // iteration: the adopted trajectory is feasible by construction and
        // the working set is confirmed on real rates, so the record carries
        // that pair rather than the unusable seed's empty claim.
        if !traj_ok && keeps_set {
            let witnessed_now = st.covered.len();
            record.coverage = witnessed_now.max(prev_best);
            record.covered_set = st.covered.clone();
            record.energy_used_j = model::total_energy(params, &st.traj).unwrap_or(f64::NAN);
            record.min_rate_slack_bits = min_slack(&real, scenario, &st.covered);
            if witnessed_now >= prev_best {
                st.best = Some((st.traj.clone(), st.schedule.clone(), st.covered.clone()));
            }
            if witnessed_now == scenario.num_users() {
                st.termination = Some("all_covered".into());
                st.iterations.push(record);
                return Ok(false);
            }
        }
    }
    st.iterations.push(record);
    Ok(true)
}

/// Smooth stand-in expansion point for seeds whose own neighborhood defeats
/// the convexification: one loop around the area center through (or near)
/// the charging base, tangential velocities at a chord speed clipped into
/// the admissible band, turning the same way as the launch velocity.
fn loop_local(scenario: &Scenario, params: &SystemParams) -> LocalPoint {
    let n = params.num_slots;
    let center = Vec2::new(scenario.area_size_m / 2.0, scenario.area_size_m / 2.0);
    let radial = scenario.base_pos - center;
    let radius = if radial.norm() >= 1.0 { radial.norm() } else { scenario.area_size_m / 4.0 };
    let theta0 = if radial.norm() >= 1.0 { radial.y.atan2(radial.x) } else { 0.0 };
    let cross = radial.x * scenario.base_vel.y - radial.y * scenario.base_vel.x;
    let orient = if cross < 0.0 { -1.0 } else { 1.0 };
    let chord = (2.0 * radius / params.slot_s) * (std::f64::consts::PI / n as f64).tan();
    let speed = chord.min(params.v_max - 1e-2).max(params.v_min + 1e-2);
    let mut s = Vec::with_capacity(n + 1);
    let mut v = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let th = theta0 + orient * 2.0 * std::f64::consts::PI * k as f64 / n as f64;
        s.push(center + Vec2::new(radius * th.cos(), radius * th.sin()));
        v.push(Vec2::new(-th.sin(), th.cos()) * (orient * speed));
    }
    LocalPoint { s, v }
}

/// Iteration-1 rescue when the seed's subproblem is infeasible: solve the
/// empty-candidate minimum-energy program (with, then without, the budget
/// row). A loop within budget restarts the alternation; otherwise the
/// cheapest loop's energy is the infeasibility verdict.
fn seed_recovery(st: &mut BcdState) -> Result<bool, DriverError> {
    let params = st.params;
    let scenario = st.scenario;
    // The seed's own neighborhood just proved infeasible; expand around a
    // smooth loop instead (the programs stay sound at any expansion point).
    let local = loop_local(scenario, params);
    let empty_sched = Schedule::empty(scenario.num_users(), params.num_slots);
    for capped in [true, false] {
        let built = build_subproblem(
            &SubproblemSpec {
                schedule: &empty_sched,
                candidate_set: &[],
                local: &local,
                rate_model: st.options.rate_model,
                objective: Objective::MinEnergy,
                include_energy_cap: capped,
            },
            scenario,
            params,
        )?;
        let sol = solve(&built.program, &st.options.conic)?;
        if sol.status != Status::Optimal {
            continue;
        }
        let traj = built.extract_trajectory(&sol.x, params, scenario);
        let energy = model::total_energy(params, &traj).unwrap_or(f64::INFINITY);
        st.traj = traj;
        st.covered.clear();
        st.schedule = empty_sched;
        if energy <= params.energy_budget_j {
            return Ok(true);
        }
        st.termination = Some(format!(
            "infeasible_energy: cheapest loop needs {energy:.1} J, budget {:.1} J",
            params.energy_budget_j
        ));
        return Ok(false);
    }
    st.termination = Some("subproblem: seed recovery failed".into());
    Ok(false)
}

/// Run the full alternation from `init` until plateau or iteration cap.
pub fn optimize(
    scenario: &Scenario,
    params: &SystemParams,
    init: Trajectory,
    options: &BcdOptions,
) -> Result<SolveReport, DriverError> {
    params.check()?;
    scenario.check()?;
    init.check_shape()?;
    let t0 = Instant::now();
    let mut st = BcdState::new(scenario, params, options, init);
    while iteration_step(&mut st)? {}
    let termination = st.termination.unwrap_or_else(|| "max_iters".into());
    let infeasible = termination.starts_with("infeasible");
    let (traj, schedule, covered) = match st.best {
        Some(best) => best,
        None => (st.traj, st.schedule, st.covered),
    };
    Ok(SolveReport {
        coverage: st.iterations.last().map_or(0, |r| r.coverage),
        covered_set: covered,
        energy_used_j: model::total_energy(params, &traj).unwrap_or(f64::NAN),
        final_trajectory: traj,
        final_schedule: schedule,
        iterations: st.iterations,
        wall_ms: t0.elapsed().as_millis() as u64,
        termination,
        infeasible,
    })
}
