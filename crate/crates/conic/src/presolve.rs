//! Presolve: eliminate variables fixed by singleton equality rows, drop
//! dependent (duplicate) and vacuous rows, and detect trivially inconsistent
//! systems before the interior-point iteration starts.
//!
//! Variables inside second-order / rotated cone spans are never eliminated
//! (their pinning rows stay); fixed free variables vanish, and fixed
//! nonnegative-span components vanish after a sign check. Solutions of the
//! reduced program map back exactly; dual values for dropped rows and
//! eliminated cone components are restored as zeros (best effort — primal
//! exactness is the contract here).

use std::collections::HashMap;

use crate::program::{Cone, ConeSpan, ConicProgram, SparseRow};

/// Relative tolerance for conflicting fixed values and scaled-duplicate
/// detection.
const CONFLICT_RTOL: f64 = 1e-9;
/// Absolute feasibility slack for fixed nonnegative components and vacuous
/// rows (0 = b).
const FEAS_ATOL: f64 = 1e-9;

/// Result of presolving: either a reduced program plus recovery data, or a
/// proof that the original is infeasible.
#[derive(Debug)]
pub enum PresolveOutcome {
    Reduced(Presolved),
    /// Human-readable contradiction, found without a solver iteration.
    Infeasible(String),
}

#[derive(Debug)]
pub struct Presolved {
    pub reduced: ConicProgram,
    /// old var -> new var, `None` when eliminated.
    var_map: Vec<Option<u32>>,
    /// values of eliminated variables, indexed by old var.
    fixed: HashMap<usize, f64>,
    /// old row -> new row, `None` when dropped.
    row_map: Vec<Option<u32>>,
}

impl Presolved {
    /// Lift a reduced-program primal point back to the original variables.
    pub fn restore_x(&self, xr: &[f64]) -> Vec<f64> {
        self.var_map
            .iter()
            .enumerate()
            .map(|(old, m)| match m {
                Some(new) => xr[*new as usize],
                None => self.fixed[&old],
            })
            .collect()
    }

    /// Lift equality duals; dropped rows get 0.
    pub fn restore_y(&self, yr: &[f64]) -> Vec<f64> {
        self.row_map
            .iter()
            .map(|m| m.map(|new| yr[new as usize]).unwrap_or(0.0))
            .collect()
    }

    /// Lift conic duals; eliminated components get 0.
    pub fn restore_z(&self, zr: &[f64]) -> Vec<f64> {
        self.var_map
            .iter()
            .map(|m| m.map(|new| zr[new as usize]).unwrap_or(0.0))
            .collect()
    }
}

/// Which cone, if any, covers each variable, and whether elimination is
/// allowed (free or nonneg components only).
fn cone_kind_per_var(prog: &ConicProgram) -> Vec<Option<Cone>> {
    let mut kind = vec![None; prog.num_vars];
    for s in &prog.cones {
        for v in s.start..s.end() {
            kind[v] = Some(s.cone);
        }
    }
    kind
}

pub fn presolve(prog: &ConicProgram) -> PresolveOutcome {
    let n = prog.num_vars;
    let kind = cone_kind_per_var(prog);
    let eliminable = |v: usize| matches!(kind[v], None | Some(Cone::NonNeg(_)));

    // Working copy of rows with fixed values substituted into the rhs.
    let mut rows: Vec<SparseRow> = prog.rows.clone();
    let mut rhs = prog.rhs.clone();
    let mut row_alive = vec![true; rows.len()];
    let mut fixed: HashMap<usize, f64> = HashMap::new();

    // Column index: rows that still mention each variable.
    let mut col_rows: Vec<Vec<u32>> = vec![Vec::new(); n];
    for (r, row) in rows.iter().enumerate() {
        for &(c, _) in row {
            col_rows[c as usize].push(r as u32);
        }
    }

    // Fixpoint over singleton rows.
    let mut work: Vec<u32> = (0..rows.len() as u32).collect();
    while let Some(r) = work.pop() {
        let r = r as usize;
        if !row_alive[r] {
            continue;
        }
        match rows[r].len() {
            0 => {
                if rhs[r].abs() > FEAS_ATOL {
                    return PresolveOutcome::Infeasible(format!(
                        "row {r} reduced to 0 = {}",
                        rhs[r]
                    ));
                }
                row_alive[r] = false;
            }
            1 => {
                let (c, a) = rows[r][0];
                let c = c as usize;
                if !eliminable(c) {
                    continue; // pinned cone variable; leave the row in place
                }
                let val = rhs[r] / a;
                if let Some(&prev) = fixed.get(&c) {
                    if (prev - val).abs() > CONFLICT_RTOL * prev.abs().max(val.abs()).max(1.0) {
                        return PresolveOutcome::Infeasible(format!(
                            "variable {c} fixed to both {prev} and {val}"
                        ));
                    }
                    row_alive[r] = false;
                    continue;
                }
                if matches!(kind[c], Some(Cone::NonNeg(_))) && val < -FEAS_ATOL {
                    return PresolveOutcome::Infeasible(format!(
                        "nonnegative variable {c} fixed to {val}"
                    ));
                }
                fixed.insert(c, val);
                row_alive[r] = false;
                // Substitute into every other live row mentioning c.
                let mentions = std::mem::take(&mut col_rows[c]);
                for &r2 in &mentions {
                    let r2 = r2 as usize;
                    if !row_alive[r2] || r2 == r {
                        continue;
                    }
                    if let Some(pos) = rows[r2].iter().position(|&(cc, _)| cc as usize == c) {
                        let coeff = rows[r2][pos].1;
                        rows[r2].remove(pos);
                        rhs[r2] -= coeff * val;
                        if rows[r2].len() <= 1 {
                            work.push(r2 as u32);
                        }
                    }
                }
            }
            _ => {}
        }
    }

    // Duplicate / proportional row elimination among live rows, grouped by
    // column support.
    let mut groups: HashMap<Vec<u32>, Vec<usize>> = HashMap::new();
    for (r, row) in rows.iter().enumerate() {
        if row_alive[r] && !row.is_empty() {
            let cols: Vec<u32> = row.iter().map(|&(c, _)| c).collect();
            groups.entry(cols).or_default().push(r);
        }
    }
    for (_, members) in groups {
        for i in 0..members.len() {
            if !row_alive[members[i]] {
                continue;
            }
            for j in i + 1..members.len() {
                let (ri, rj) = (members[i], members[j]);
                if !row_alive[rj] {
                    continue;
                }
                let k = rows[rj][0].1 / rows[ri][0].1;
                let proportional = rows[ri]
                    .iter()
                    .zip(&rows[rj])
                    .all(|(&(_, vi), &(_, vj))| (vi * k - vj).abs() <= CONFLICT_RTOL * vj.abs().max(vi.abs() * k.abs()).max(1e-300));
                if proportional {
                    if (rhs[ri] * k - rhs[rj]).abs()
                        > CONFLICT_RTOL * rhs[rj].abs().max(rhs[ri].abs() * k.abs()).max(1.0)
                    {
                        return PresolveOutcome::Infeasible(format!(
                            "rows {ri} and {rj} are proportional with conflicting right-hand sides"
                        ));
                    }
                    row_alive[rj] = false;
                }
            }
        }
    }

    // Rebuild the reduced program with compacted indices.
    let mut var_map: Vec<Option<u32>> = Vec::with_capacity(n);
    let mut new_n = 0u32;
    for v in 0..n {
        if fixed.contains_key(&v) {
            var_map.push(None);
        } else {
            var_map.push(Some(new_n));
            new_n += 1;
        }
    }

    let mut cones = Vec::new();
    for s in &prog.cones {
        match s.cone {
            Cone::NonNeg(_) => {
                // Surviving components of the span stay contiguous.
                let kept: Vec<u32> =
                    (s.start..s.end()).filter_map(|v| var_map[v]).collect();
                if !kept.is_empty() {
                    cones.push(ConeSpan { start: kept[0] as usize, cone: Cone::NonNeg(kept.len()) });
                }
            }
            c => {
                // Never reduced; only shifted.
                cones.push(ConeSpan { start: var_map[s.start].unwrap() as usize, cone: c });
            }
        }
    }

    let mut new_rows = Vec::new();
    let mut new_rhs = Vec::new();
    let mut row_map = vec![None; rows.len()];
    for (r, row) in rows.iter().enumerate() {
        if !row_alive[r] {
            continue;
        }
        row_map[r] = Some(new_rows.len() as u32);
        new_rows.push(row.iter().map(|&(c, v)| (var_map[c as usize].unwrap(), v)).collect());
        new_rhs.push(rhs[r]);
    }

    let mut objective = vec![0.0; new_n as usize];
    for v in 0..n {
        if let Some(nv) = var_map[v] {
            objective[nv as usize] = prog.objective[v];
        }
    }

    let reduced = ConicProgram { num_vars: new_n as usize, objective, rows: new_rows, rhs: new_rhs, cones };
    PresolveOutcome::Reduced(Presolved { reduced, var_map, fixed, row_map })
}
