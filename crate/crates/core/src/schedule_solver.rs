//! Exact solver for the per-slot scheduling subproblem.
//!
//! With the trajectory held fixed, choosing which user transmits in each
//! slot to maximize the number of fully served users is an integer problem.
//! It is solved exactly by enumerating candidate covered sets in decreasing
//! cardinality (feasibility of a set is downward closed: removing a user
//! only removes constraints) and testing each set with a depth-first slot
//! assignment search. The search carries two sound prunes: a
//! remaining-capacity bound per user, and — when a per-set node budget runs
//! out — a fractional-relaxation feasibility check solved by the conic
//! solver in its linear-programming mode (an infeasible relaxation proves
//! the integer set infeasible).
//!
//! Ties among maximum-coverage sets are broken deterministically in favor
//! of the largest total delivered-minus-demanded slack after idle slots are
//! given to the best-rate covered user.

use crate::model::{
    bits_per_slot, CoverageResult, RateModel, Scenario, Schedule, SystemParams, Trajectory,
};
use aircover_conic::{solve, Cone, ProgramBuilder, Settings, Status};
use std::time::{Duration, Instant};

/// Per-user, per-slot deliverable bits on a fixed trajectory.
#[derive(Debug, Clone)]
pub struct RateMatrix {
    /// `r[i][n]` = bits user `i` receives if scheduled in slot `n`.
    pub r: Vec<Vec<f64>>,
}

impl RateMatrix {
    pub fn num_users(&self) -> usize {
        self.r.len()
    }

    pub fn num_slots(&self) -> usize {
        self.r.first().map_or(0, Vec::len)
    }

    /// Total bits user `i` would get from its assigned slots.
    pub fn delivered(&self, schedule: &Schedule, user: usize) -> f64 {
        schedule.slots_of(user).iter().map(|&n| self.r[user][n]).sum()
    }
}

/// Evaluate the link budget of every (user, slot) pair.
pub fn rate_matrix(
    traj: &Trajectory,
    scenario: &Scenario,
    params: &SystemParams,
    model: RateModel,
) -> RateMatrix {
    let n = traj.num_slots();
    let r = scenario
        .users
        .iter()
        .map(|u| (0..n).map(|k| bits_per_slot(params, model, traj.slot_pos(k), u.pos)).collect())
        .collect();
    RateMatrix { r }
}

/// Search controls for the exact solver.
#[derive(Debug, Clone)]
pub struct SchedOptions {
    /// Exhaustive candidate-set search; `false` stops after the greedy
    /// incumbent (reported gap may then be positive).
    pub exact: bool,
    pub timeout: Duration,
    /// Depth-first nodes to spend on a candidate set before consulting the
    /// fractional relaxation.
    pub node_budget: u64,
}

impl Default for SchedOptions {
    fn default() -> Self {
        SchedOptions { exact: true, timeout: Duration::from_secs(30), node_budget: 1 << 14 }
    }
}

/// Result of a scheduling solve.
#[derive(Debug, Clone)]
pub struct SchedOutcome {
    pub schedule: Schedule,
    pub coverage: CoverageResult,
    /// Difference between the best proved upper bound on coverage and the
    /// returned coverage; 0 means provably optimal.
    pub bound_gap: usize,
    pub timed_out: bool,
}

/// Verdict of a candidate-set feasibility test.
#[derive(Debug, Clone, PartialEq)]
pub enum SubsetVerdict {
    /// A covering assignment: `slot → Some(user)` meeting every demand.
    Feasible(Vec<Option<usize>>),
    Infeasible,
    /// Budget or deadline exhausted before a proof either way.
    Unknown,
}

/// Resource limits shared across one solve call.
#[derive(Debug, Clone)]
pub struct SearchBudget {
    pub deadline: Option<Instant>,
    pub node_budget: u64,
    pub use_lp_prune: bool,
}

impl SearchBudget {
    pub fn unlimited() -> Self {
        SearchBudget { deadline: None, node_budget: u64::MAX, use_lp_prune: false }
    }

    fn expired(&self) -> bool {
        self.deadline.is_some_and(|d| Instant::now() >= d)
    }
}

/// Maximize the number of users whose full demand is delivered.
pub fn solve_scheduling(
    rates: &RateMatrix,
    demands: &[f64],
    options: &SchedOptions,
) -> SchedOutcome {
    let m = rates.num_users();
    assert_eq!(m, demands.len(), "one demand per user");
    let deadline = Instant::now() + options.timeout;

    // Users that cannot be served even with every slot to themselves can
    // never appear in a covered set.
    let universe: Vec<usize> =
        (0..m).filter(|&i| rates.r[i].iter().sum::<f64>() >= demands[i]).collect();

    // Greedy incumbent: cheapest fallback, and the timeout answer. Its set
    // is feasible, so the exact scan below never has to descend past it.
    let greedy = greedy_assignment(rates, demands, &universe);
    let mut best_set: Vec<usize> = covered_of(&greedy, rates, demands);
    let mut best_assign = fill_idle_slots(greedy, rates, &best_set);
    let mut best_slack = total_slack(&best_assign, rates, demands, &best_set);

    let mut upper = universe.len();
    let mut timed_out = false;

    if options.exact {
        let mut k = universe.len();
        'outer: while k >= 1 {
            // Scan the whole cardinality: the first feasible k decides the
            // coverage, and among equal-coverage sets the largest total
            // slack wins.
            let mut found_at_k = false;
            let mut combo = Combinations::new(universe.len(), k);
            while let Some(pick) = combo.next() {
                if Instant::now() >= deadline {
                    timed_out = true;
                    break 'outer;
                }
                let set: Vec<usize> = pick.iter().map(|&j| universe[j]).collect();
                let mut budget = SearchBudget {
                    deadline: Some(deadline),
                    node_budget: options.node_budget,
                    use_lp_prune: true,
                };
                match subset_feasible(&set, rates, demands, &mut budget) {
                    SubsetVerdict::Feasible(assign) => {
                        let assign = fill_idle_slots(assign, rates, &set);
                        let slack = total_slack(&assign, rates, demands, &set);
                        if !found_at_k || slack > best_slack {
                            best_set = set;
                            best_assign = assign;
                            best_slack = slack;
                        }
                        found_at_k = true;
                    }
                    SubsetVerdict::Infeasible => {}
                    SubsetVerdict::Unknown => {
                        timed_out = true;
                        break 'outer;
                    }
                }
            }
            if found_at_k {
                upper = k;
                break;
            }
            // No set of size k is coverable, so none larger is either
            // (feasible sets are downward closed).
            upper = k - 1;
            k -= 1;
        }
    }

    let schedule = Schedule::from_assignment(m, &best_assign);
    let covered: Vec<bool> = (0..m).map(|i| best_set.contains(&i)).collect();
    let delivered: Vec<f64> = (0..m).map(|i| rates.delivered(&schedule, i)).collect();
    SchedOutcome {
        schedule,
        coverage: CoverageResult { covered, delivered_bits: delivered },
        bound_gap: upper.saturating_sub(best_set.len()),
        timed_out,
    }
}

/// Can the slots be split among `set` so every member's demand is met?
///
/// Slots are processed in decreasing best-rate order. At each slot only
/// members with outstanding demand and a positive rate are branched on: if
/// a covering assignment exists with this slot idle, assigning the slot to
/// any needy member keeps it covering, so idle branches are dominated and
/// skipped.
pub fn subset_feasible(
    set: &[usize],
    rates: &RateMatrix,
    demands: &[f64],
    budget: &mut SearchBudget,
) -> SubsetVerdict {
    let n = rates.num_slots();
    if set.is_empty() {
        return SubsetVerdict::Feasible(vec![None; n]);
    }
    for &i in set {
        if rates.r[i].iter().sum::<f64>() < demands[i] {
            return SubsetVerdict::Infeasible;
        }
    }

    // Slot order: decreasing max rate over the set.
    let mut order: Vec<usize> = (0..n).collect();
    let slot_max = |s: usize| set.iter().map(|&i| rates.r[i][s]).fold(0.0f64, f64::max);
    order.sort_by(|&a, &b| slot_max(b).total_cmp(&slot_max(a)).then(a.cmp(&b)));

    // suffix[i][k] = bits member i could still get from slots k.. in order.
    let mm = set.len();
    let mut suffix = vec![vec![0.0f64; n + 1]; mm];
    let mut suffix_any = vec![0.0f64; n + 1];
    for k in (0..n).rev() {
        let mut best = 0.0f64;
        for (j, &i) in set.iter().enumerate() {
            let v = rates.r[i][order[k]];
            suffix[j][k] = suffix[j][k + 1] + v;
            best = best.max(v);
        }
        suffix_any[k] = suffix_any[k + 1] + best;
    }

    let mut rem: Vec<f64> = set.iter().map(|&i| demands[i]).collect();
    let mut assign = vec![None; n];
    let mut nodes: u64 = 0;
    let mut tried_lp = false;

    loop {
        match dfs(
            0,
            set,
            rates,
            &order,
            &suffix,
            &suffix_any,
            &mut rem,
            &mut assign,
            &mut nodes,
            budget,
        ) {
            DfsOutcome::Found => return SubsetVerdict::Feasible(assign),
            DfsOutcome::Exhausted => return SubsetVerdict::Infeasible,
            DfsOutcome::OutOfNodes => {
                if budget.use_lp_prune && !tried_lp {
                    tried_lp = true;
                    match lp_relaxation_feasible(set, rates, demands) {
                        Some(false) => return SubsetVerdict::Infeasible,
                        // Feasible or inconclusive relaxation: keep
                        // searching until the deadline.
                        _ => {
                            budget.node_budget = u64::MAX;
                            continue;
                        }
                    }
                }
                if budget.expired() || budget.node_budget != u64::MAX {
                    return SubsetVerdict::Unknown;
                }
                budget.node_budget = u64::MAX;
            }
            DfsOutcome::Expired => return SubsetVerdict::Unknown,
        }
    }
}

enum DfsOutcome {
    Found,
    Exhausted,
    OutOfNodes,
    Expired,
}

#[allow(clippy::too_many_arguments)]
fn dfs(
    k: usize,
    set: &[usize],
    rates: &RateMatrix,
    order: &[usize],
    suffix: &[Vec<f64>],
    suffix_any: &[f64],
    rem: &mut [f64],
    assign: &mut [Option<usize>],
    nodes: &mut u64,
    budget: &SearchBudget,
) -> DfsOutcome {
    let outstanding: f64 = rem.iter().filter(|v| **v > 0.0).sum();
    if outstanding <= 0.0 {
        return DfsOutcome::Found;
    }
    if k == order.len() {
        return DfsOutcome::Exhausted;
    }
    // Capacity bounds: every member (and the set jointly) must still be
    // able to close its deficit from the remaining slots.
    if outstanding > suffix_any[k] {
        return DfsOutcome::Exhausted;
    }
    for (j, &r) in rem.iter().enumerate() {
        if r > 0.0 && r > suffix[j][k] {
            return DfsOutcome::Exhausted;
        }
    }
    *nodes += 1;
    if *nodes > budget.node_budget {
        return DfsOutcome::OutOfNodes;
    }
    if *nodes % 1024 == 0 && budget.expired() {
        return DfsOutcome::Expired;
    }

    let slot = order[k];
    // Branch over needy members by descending rate in this slot.
    let mut cand: Vec<usize> =
        (0..set.len()).filter(|&j| rem[j] > 0.0 && rates.r[set[j]][slot] > 0.0).collect();
    cand.sort_by(|&a, &b| rates.r[set[b]][slot].total_cmp(&rates.r[set[a]][slot]));
    if cand.is_empty() {
        // No needy member benefits from this slot; it stays idle.
        assign[slot] = None;
        return dfs(k + 1, set, rates, order, suffix, suffix_any, rem, assign, nodes, budget);
    }
    for j in cand {
        let rate = rates.r[set[j]][slot];
        rem[j] -= rate;
        assign[slot] = Some(set[j]);
        match dfs(k + 1, set, rates, order, suffix, suffix_any, rem, assign, nodes, budget) {
            DfsOutcome::Exhausted => {}
            other => return other,
        }
        rem[j] += rate;
        assign[slot] = None;
    }
    DfsOutcome::Exhausted
}

/// Feasibility of the fractional relaxation (slot shares in [0, 1]).
///
/// `Some(false)` is a proof that the integer set is infeasible — the
/// relaxation only enlarges the feasible region. `None` means the solver
/// could not decide (never treated as a refutation).
pub fn lp_relaxation_feasible(set: &[usize], rates: &RateMatrix, demands: &[f64]) -> Option<bool> {
    let n = rates.num_slots();
    let mm = set.len();
    if mm == 0 {
        return Some(true);
    }
    let mut b = ProgramBuilder::new();
    let alpha = b.cone_vars(Cone::NonNeg(mm * n)); // α[j·n + s]
    let slot_slack = b.cone_vars(Cone::NonNeg(n));
    let surplus = b.cone_vars(Cone::NonNeg(mm));
    for s in 0..n {
        let mut row: Vec<(usize, f64)> = (0..mm).map(|j| (alpha + j * n + s, 1.0)).collect();
        row.push((slot_slack + s, 1.0));
        b.eq(&row, 1.0);
    }
    for (j, &i) in set.iter().enumerate() {
        let scale = demands[i].max(rates.r[i].iter().fold(0.0f64, |a, &v| a.max(v))).max(1.0);
        let mut row: Vec<(usize, f64)> = (0..n)
            .filter(|&s| rates.r[i][s] != 0.0)
            .map(|s| (alpha + j * n + s, rates.r[i][s] / scale))
            .collect();
        row.push((surplus + j, -1.0));
        b.eq(&row, demands[i] / scale);
    }
    let prog = b.finish();
    let settings = Settings { tol: 1e-8, max_iter: 100, ..Settings::default() };
    match solve(&prog, &settings) {
        Ok(sol) => match sol.status {
            Status::Optimal => Some(true),
            Status::PrimalInfeasible => Some(false),
            _ => None,
        },
        Err(_) => None,
    }
}

/// Greedy covering: users by ascending demand, each taking its best free
/// slots; kept only if the demand closes.
fn greedy_assignment(rates: &RateMatrix, demands: &[f64], universe: &[usize]) -> Vec<Option<usize>> {
    let n = rates.num_slots();
    let mut assign: Vec<Option<usize>> = vec![None; n];
    let mut by_demand = universe.to_vec();
    by_demand.sort_by(|&a, &b| demands[a].total_cmp(&demands[b]).then(a.cmp(&b)));
    for &i in &by_demand {
        let mut slots: Vec<usize> = (0..n).filter(|&s| assign[s].is_none()).collect();
        slots.sort_by(|&a, &b| rates.r[i][b].total_cmp(&rates.r[i][a]).then(a.cmp(&b)));
        let mut got = 0.0;
        let mut taken = Vec::new();
        for &s in &slots {
            if got >= demands[i] {
                break;
            }
            got += rates.r[i][s];
            taken.push(s);
        }
        if got >= demands[i] {
            for s in taken {
                assign[s] = Some(i);
            }
        }
    }
    assign
}

fn covered_of(assign: &[Option<usize>], rates: &RateMatrix, demands: &[f64]) -> Vec<usize> {
    let m = rates.num_users();
    let mut got = vec![0.0f64; m];
    for (s, a) in assign.iter().enumerate() {
        if let Some(i) = a {
            got[*i] += rates.r[*i][s];
        }
    }
    (0..m).filter(|&i| got[i] >= demands[i]).collect()
}

/// Hand idle slots to the covered user with the best rate there, so the
/// returned schedule carries maximal slack into the trajectory step.
fn fill_idle_slots(
    mut assign: Vec<Option<usize>>,
    rates: &RateMatrix,
    set: &[usize],
) -> Vec<Option<usize>> {
    if set.is_empty() {
        return assign;
    }
    for (s, slot) in assign.iter_mut().enumerate() {
        if slot.is_none() {
            let best = set
                .iter()
                .copied()
                .max_by(|&a, &b| rates.r[a][s].total_cmp(&rates.r[b][s]).then(b.cmp(&a)));
            if let Some(i) = best {
                if rates.r[i][s] > 0.0 {
                    *slot = Some(i);
                }
            }
        }
    }
    assign
}

fn total_slack(
    assign: &[Option<usize>],
    rates: &RateMatrix,
    demands: &[f64],
    set: &[usize],
) -> f64 {
    let mut got = vec![0.0f64; rates.num_users()];
    for (s, a) in assign.iter().enumerate() {
        if let Some(i) = a {
            got[*i] += rates.r[*i][s];
        }
    }
    set.iter().map(|&i| got[i] - demands[i]).sum()
}

/// Lexicographic k-subset enumerator over {0, …, n−1}.
struct Combinations {
    n: usize,
    idx: Vec<usize>,
    started: bool,
    done: bool,
}

impl Combinations {
    fn new(n: usize, k: usize) -> Self {
        Combinations { n, idx: (0..k).collect(), started: false, done: k > n }
    }

    fn next(&mut self) -> Option<&[usize]> {
        if self.done {
            return None;
        }
        if !self.started {
            self.started = true;
            return Some(&self.idx);
        }
        let k = self.idx.len();
        let mut i = k;
        loop {
            if i == 0 {
                self.done = true;
                return None;
            }
            i -= 1;
            if self.idx[i] != i + self.n - k {
                break;
            }
        }
        self.idx[i] += 1;
        for j in i + 1..k {
            self.idx[j] = self.idx[j - 1] + 1;
        }
        Some(&self.idx)
    }
}

/// Exhaustive reference solver: the true maximum coverage by trying every
/// slot assignment. Only sensible for tiny instances; used to validate the
/// search.
pub mod oracle {
    use super::RateMatrix;

    pub fn max_coverage_by_enumeration(rates: &RateMatrix, demands: &[f64]) -> usize {
        let m = rates.num_users();
        let n = rates.num_slots();
        let mut assign = vec![0usize; n]; // 0 = idle, 1..=m = user+1
        let mut best = 0usize;
        loop {
            let mut got = vec![0.0f64; m];
            for (s, &a) in assign.iter().enumerate() {
                if a > 0 {
                    got[a - 1] += rates.r[a - 1][s];
                }
            }
            let covered = (0..m).filter(|&i| got[i] >= demands[i]).count();
            best = best.max(covered);
            // Odometer increment in base m+1.
            let mut s = 0;
            loop {
                if s == n {
                    return best;
                }
                assign[s] += 1;
                if assign[s] <= m {
                    break;
                }
                assign[s] = 0;
                s += 1;
            }
        }
    }
}
