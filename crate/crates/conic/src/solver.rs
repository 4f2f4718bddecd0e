//! Homogeneous self-dual interior-point solver.
//!
//! The embedding introduces scalars (τ, κ) alongside the primal/dual triple
//! (x, y, z) and drives the residuals of
//!
//! ```text
//! A x = b τ        A'y + z = c τ        c'x − b'y + κ = 0
//! ```
//!
//! to zero together with the complementarity x∘z = μe, τκ = μ. A solution
//! with τ > 0 unscales to an optimal pair; κ > 0 yields a Farkas-style
//! infeasibility certificate instead, so unsolvable subproblems are *proved*
//! unsolvable rather than timed out.
//!
//! Directions are Mehrotra predictor-corrector steps under Nesterov–Todd
//! scaling. Each iteration factors one quasi-definite KKT matrix
//! `[−(W⁻²+εI), A'; A, δI]` (skyline LDLᵀ, see `linalg`) and performs a few
//! solves, polished by iterative refinement against the unregularized
//! system. Rotated second-order cones are rotated into plain ones up front
//! by the orthogonal map (u,v,w) ↦ ((u+v)/√2, (u−v)/√2, w).

use crate::cones::{soc_prod, soc_solve, Scaling, WorkCone};
use crate::linalg::{KktPattern, SkylineLdl};
use crate::presolve::{presolve, PresolveOutcome};
use crate::program::{Cone, ConicProgram, SparseRow};
use crate::SolverError;

/// Solver options. The defaults suit unit-test-sized programs; large
/// trajectory programs are typically solved at `tol = 1e-6`.
#[derive(Debug, Clone)]
pub struct Settings {
    /// Relative feasibility/gap tolerance.
    pub tol: f64,
    pub max_iter: usize,
    /// Static regularization added to the KKT diagonal.
    pub static_reg: f64,
    /// Iterative-refinement rounds per KKT solve.
    pub refine_steps: usize,
    /// Per-iteration diagnostics on stderr.
    pub verbose: bool,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { tol: 1e-8, max_iter: 100, static_reg: 1e-8, refine_steps: 2, verbose: false }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Optimal,
    /// No x satisfies Ax = b, x ∈ K; (y, z) certifies A'y + z = 0, b'y > 0.
    PrimalInfeasible,
    /// The objective is unbounded below; x certifies Ax = 0, x ∈ K, c'x < 0.
    DualInfeasible,
    MaxIter,
    /// Progress stalled before reaching tolerance.
    Numerical,
}

/// Solver output. For `Optimal` the triple (x, y, z) is the unscaled
/// primal/dual solution; for the two infeasible statuses it carries the
/// normalized certificate ray; for `MaxIter`/`Numerical` it is the best
/// (unscaled) iterate reached.
#[derive(Debug, Clone)]
pub struct Solution {
    pub status: Status,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub z: Vec<f64>,
    /// Objective value c'x; NaN unless status is Optimal/MaxIter/Numerical.
    pub obj: f64,
    pub iters: usize,
    pub detail: String,
}

/// Solve a conic program. Structural errors are returned as `Err`; solvable
/// outcomes (including proved infeasibility) come back as `Ok(Solution)`.
pub fn solve(prog: &ConicProgram, settings: &Settings) -> Result<Solution, SolverError> {
    prog.check()?;
    let (n0, m0) = (prog.num_vars, prog.num_rows());

    let ps = match presolve(prog) {
        PresolveOutcome::Infeasible(reason) => {
            return Ok(Solution {
                status: Status::PrimalInfeasible,
                x: vec![0.0; n0],
                y: vec![0.0; m0],
                z: vec![0.0; n0],
                obj: f64::NAN,
                iters: 0,
                detail: format!("presolve: {reason}"),
            });
        }
        PresolveOutcome::Reduced(ps) => ps,
    };

    if ps.reduced.num_vars == 0 {
        let x = ps.restore_x(&[]);
        let obj = prog.objective_value(&x);
        return Ok(Solution {
            status: Status::Optimal,
            x,
            y: vec![0.0; m0],
            z: vec![0.0; n0],
            obj,
            iters: 0,
            detail: "fully determined in presolve".into(),
        });
    }

    let (work, rsoc_starts) = rotate_rsoc(&ps.reduced);
    let mut raw = ipm(&work, settings);

    // Undo the rotation on primal and dual (the map is orthogonal and
    // self-inverse, and commutes between the cone pair).
    for &p in &rsoc_starts {
        unrotate_pair(&mut raw.x, p);
        unrotate_pair(&mut raw.z, p);
    }

    let x = if raw.status == Status::PrimalInfeasible {
        // The primal part of a certificate is meaningless; don't insert
        // fixed values into it.
        vec![0.0; n0]
    } else {
        ps.restore_x(&raw.x)
    };
    let y = ps.restore_y(&raw.y);
    let z = ps.restore_z(&raw.z);
    let obj = match raw.status {
        Status::Optimal | Status::MaxIter | Status::Numerical => prog.objective_value(&x),
        _ => f64::NAN,
    };
    Ok(Solution { status: raw.status, x, y, z, obj, iters: raw.iters, detail: raw.detail })
}

fn unrotate_pair(v: &mut [f64], p: usize) {
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let (a, b) = (v[p], v[p + 1]);
    v[p] = (a + b) * inv_sqrt2;
    v[p + 1] = (a - b) * inv_sqrt2;
}

/// Rewrite rotated cones as plain second-order cones by the orthogonal
/// change of variables on each span's first two coordinates.
fn rotate_rsoc(prog: &ConicProgram) -> (ConicProgram, Vec<usize>) {
    let starts: Vec<usize> = prog
        .cones
        .iter()
        .filter(|s| matches!(s.cone, Cone::Rsoc(_)))
        .map(|s| s.start)
        .collect();
    if starts.is_empty() {
        return (prog.clone(), starts);
    }
    let mut out = prog.clone();
    for s in out.cones.iter_mut() {
        if let Cone::Rsoc(d) = s.cone {
            s.cone = Cone::Soc(d);
        }
    }
    let inv_sqrt2 = std::f64::consts::FRAC_1_SQRT_2;
    let transform_pair = |row: &mut SparseRow, p: usize| {
        let ca = row.binary_search_by_key(&(p as u32), |e| e.0);
        let cb = row.binary_search_by_key(&(p as u32 + 1), |e| e.0);
        let a = ca.map(|i| row[i].1).unwrap_or(0.0);
        let b = cb.map(|i| row[i].1).unwrap_or(0.0);
        if a == 0.0 && b == 0.0 {
            return;
        }
        let na = (a + b) * inv_sqrt2;
        let nb = (a - b) * inv_sqrt2;
        // Remove existing entries for the pair, then insert nonzero ones.
        if let Ok(i) = cb {
            row.remove(i);
        }
        if let Ok(i) = ca {
            row.remove(i);
        }
        let at = row.partition_point(|e| e.0 < p as u32);
        if nb != 0.0 {
            row.insert(at, (p as u32 + 1, nb));
        }
        if na != 0.0 {
            row.insert(at, (p as u32, na));
        }
    };
    for p in &starts {
        for row in out.rows.iter_mut() {
            transform_pair(row, *p);
        }
        let (a, b) = (out.objective[*p], out.objective[*p + 1]);
        out.objective[*p] = (a + b) * inv_sqrt2;
        out.objective[*p + 1] = (a - b) * inv_sqrt2;
    }
    (out, starts)
}

// --------------------------------------------------------------------------
// the interior-point iteration proper (nonneg + soc cones only)

struct RawSolution {
    status: Status,
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    iters: usize,
    detail: String,
}

struct Workspace<'p> {
    prog: &'p ConicProgram,
    cones: Vec<WorkCone>,
    n: usize,
    m: usize,
    /// Barrier rank Σ rank(cone); μ divisor is rank + 1.
    rank: usize,
    norm_b: f64,
    norm_c: f64,
    pat: KktPattern,
    /// Constant part of the KKT values: A, +δ row diagonal, −ε var diagonal.
    template: Vec<f64>,
    /// Slot index of each per-iteration W⁻² entry, in cone emission order.
    h_slots: Vec<usize>,
    diag_sign: Vec<i8>,
}

impl<'p> Workspace<'p> {
    fn new(prog: &'p ConicProgram, settings: &Settings) -> Workspace<'p> {
        let n = prog.num_vars;
        let m = prog.num_rows();
        let cones: Vec<WorkCone> = prog
            .cones
            .iter()
            .map(|s| match s.cone {
                Cone::NonNeg(d) => WorkCone::NonNeg { start: s.start, dim: d },
                Cone::Soc(d) => WorkCone::Soc { start: s.start, dim: d },
                Cone::Rsoc(_) => unreachable!("rotated before the iteration"),
            })
            .collect();
        let rank = cones.iter().map(|c| c.rank()).sum();

        // KKT structural entries, in a fixed order so slots line up with
        // per-iteration emission: var diag, row diag, A, then cone blocks.
        let dim = n + m;
        let mut entries: Vec<(u32, u32)> = Vec::new();
        for i in 0..n {
            entries.push((i as u32, i as u32));
        }
        for r in 0..m {
            entries.push(((n + r) as u32, (n + r) as u32));
        }
        for (r, row) in prog.rows.iter().enumerate() {
            for &(c, _) in row {
                entries.push(((n + r) as u32, c));
            }
        }
        let h_begin = entries.len();
        for cone in &cones {
            match *cone {
                WorkCone::NonNeg { start, dim } => {
                    for i in 0..dim {
                        entries.push(((start + i) as u32, (start + i) as u32));
                    }
                }
                WorkCone::Soc { start, dim } => {
                    for i in 0..dim {
                        for j in 0..=i {
                            entries.push(((start + i) as u32, (start + j) as u32));
                        }
                    }
                }
            }
        }
        let pat = KktPattern::new(dim, &entries);

        let reg = settings.static_reg;
        let mut template = vec![0.0; pat.storage_len()];
        for i in 0..n {
            template[pat.slots[i]] += -reg;
        }
        for r in 0..m {
            template[pat.slots[n + r]] += reg;
        }
        let mut k = n + m;
        for row in prog.rows.iter() {
            for &(_, v) in row {
                template[pat.slots[k]] += v;
                k += 1;
            }
        }
        let h_slots = pat.slots[h_begin..].to_vec();

        let mut diag_sign = vec![-1i8; dim];
        for s in diag_sign.iter_mut().skip(n) {
            *s = 1;
        }

        let norm_b = prog.rhs.iter().fold(0.0f64, |a, &v| a.max(v.abs()));
        let norm_c = prog.objective.iter().fold(0.0f64, |a, &v| a.max(v.abs()));

        Workspace { prog, cones, n, m, rank, norm_b, norm_c, pat, template, h_slots, diag_sign }
    }

    fn ax(&self, x: &[f64], out: &mut [f64]) {
        for (r, row) in self.prog.rows.iter().enumerate() {
            let mut s = 0.0;
            for &(c, v) in row {
                s += v * x[c as usize];
            }
            out[r] = s;
        }
    }

    fn at_y(&self, y: &[f64], out: &mut [f64]) {
        out.fill(0.0);
        for (r, row) in self.prog.rows.iter().enumerate() {
            let yr = y[r];
            if yr != 0.0 {
                for &(c, v) in row {
                    out[c as usize] += v * yr;
                }
            }
        }
    }

    /// Unregularized KKT product: out = [−H u_x + A'u_y; A u_x] where H is
    /// the block-diagonal of W⁻² on cone spans (zero on free variables).
    fn kkt_mul_true(&self, scalings: &[Scaling], u: &[f64], out: &mut [f64]) {
        let (ux, uy) = u.split_at(self.n);
        {
            let (ox, _) = out.split_at_mut(self.n);
            ox.fill(0.0);
            for (cone, sc) in self.cones.iter().zip(scalings) {
                let (s, d) = (cone.start(), cone.dim());
                sc.apply_w_inv2(&ux[s..s + d], &mut ox[s..s + d]);
            }
            for v in ox.iter_mut() {
                *v = -*v;
            }
        }
        // out_x += A' u_y ; out_y = A u_x.
        for (r, row) in self.prog.rows.iter().enumerate() {
            let yr = uy[r];
            let mut s = 0.0;
            for &(c, v) in row {
                if yr != 0.0 {
                    out[c as usize] += v * yr;
                }
                s += v * ux[c as usize];
            }
            out[self.n + r] = s;
        }
    }

    /// Solve the KKT system against `rhs` with iterative refinement,
    /// writing into `sol`.
    fn kkt_solve(
        &self,
        fac: &SkylineLdl,
        scalings: &[Scaling],
        rhs: &[f64],
        sol: &mut [f64],
        refine: usize,
        scratch: &mut [f64],
        scratch2: &mut [f64],
    ) {
        fac.solve(rhs, sol);
        for _ in 0..refine {
            self.kkt_mul_true(scalings, sol, scratch);
            for i in 0..rhs.len() {
                scratch[i] = rhs[i] - scratch[i];
            }
            fac.solve(scratch, scratch2);
            for i in 0..rhs.len() {
                sol[i] += scratch2[i];
            }
        }
    }
}

/// Per-cone scaled direction data reused between predictor and corrector.
struct Direction {
    dx: Vec<f64>,
    dy: Vec<f64>,
    dz: Vec<f64>,
    dtau: f64,
    dkappa: f64,
}

#[allow(clippy::too_many_arguments)]
fn compute_direction(
    ws: &Workspace,
    fac: &SkylineLdl,
    scalings: &[Scaling],
    settings: &Settings,
    state: &State,
    resid: &Residuals,
    mu: f64,
    sigma: f64,
    // Mehrotra correction: (W⁻¹Δx_aff)∘(WΔz_aff) per cone, and Δτ_aff·Δκ_aff.
    corr: Option<(&[f64], f64)>,
    p2q2: &(Vec<f64>, Vec<f64>, f64),
    bufs: &mut Buffers,
) -> Direction {
    let (n, m) = (ws.n, ws.m);
    let eta = 1.0 - sigma;

    // d_s = σμe − λ∘λ − corr per cone, then d̃ = L(λ)⁻¹ d_s, wd = W⁻¹ d̃.
    let wd = &mut bufs.wd;
    wd.fill(0.0);
    let mut dtk = sigma * mu - state.tau * state.kappa;
    if let Some((_, ctk)) = corr {
        dtk -= ctk;
    }
    for (idx, (cone, sc)) in ws.cones.iter().zip(scalings).enumerate() {
        let (s, d) = (cone.start(), cone.dim());
        let lam = sc.lambda();
        let ds = &mut bufs.ds[s..s + d];
        match cone {
            WorkCone::NonNeg { .. } => {
                for i in 0..d {
                    ds[i] = sigma * mu - lam[i] * lam[i];
                }
                if let Some((cs, _)) = corr {
                    for i in 0..d {
                        ds[i] -= cs[s + i];
                    }
                }
                // d̃ = d_s / λ; wd = W⁻¹ d̃.
                for i in 0..d {
                    ds[i] /= lam[i];
                }
                sc.apply_w_inv(ds, &mut wd[s..s + d]);
            }
            WorkCone::Soc { .. } => {
                // λ∘λ = (λ'λ, 2λ0·λ1).
                ds[0] = sigma * mu - lam.iter().map(|v| v * v).sum::<f64>();
                for i in 1..d {
                    ds[i] = -2.0 * lam[0] * lam[i];
                }
                if let Some((cs, _)) = corr {
                    for i in 0..d {
                        ds[i] -= cs[s + i];
                    }
                }
                let tmp = &mut bufs.tmp_cone[..d];
                soc_solve(lam, ds, tmp);
                sc.apply_w_inv(tmp, &mut wd[s..s + d]);
            }
        }
        let _ = idx;
    }

    // KKT right-hand side [−r̂x; r̂y]:
    //   r̂x = −η·r_d + wd,  r̂y = −η·r_p.
    let rhs = &mut bufs.rhs;
    for i in 0..n {
        rhs[i] = -(-eta * resid.rd[i] + wd[i]);
    }
    for r in 0..m {
        rhs[n + r] = -eta * resid.rp[r];
    }
    let sol = &mut bufs.sol;
    ws.kkt_solve(fac, scalings, rhs, sol, settings.refine_steps, &mut bufs.s1, &mut bufs.s2);

    let (p2, q2, den_const) = p2q2;
    let cdotp1: f64 = ws.prog.objective.iter().zip(&sol[..n]).map(|(c, v)| c * v).sum();
    let bdotq1: f64 = ws.prog.rhs.iter().zip(&sol[n..]).map(|(b, v)| b * v).sum();
    let rg_hat = -eta * resid.rg;
    let den = den_const - state.kappa / state.tau;
    let dtau = (rg_hat - cdotp1 + bdotq1 - dtk / state.tau) / den;

    let mut dx = vec![0.0; n];
    let mut dy = vec![0.0; m];
    for i in 0..n {
        dx[i] = sol[i] + dtau * p2[i];
    }
    for r in 0..m {
        dy[r] = sol[n + r] + dtau * q2[r];
    }

    // Δz = wd − W⁻² Δx on cone spans; zero on free variables.
    let mut dz = vec![0.0; n];
    for (cone, sc) in ws.cones.iter().zip(scalings) {
        let (s, d) = (cone.start(), cone.dim());
        let tmp = &mut bufs.tmp_cone[..d];
        sc.apply_w_inv2(&dx[s..s + d], tmp);
        for i in 0..d {
            dz[s + i] = wd[s + i] - tmp[i];
        }
    }
    let dkappa = (dtk - state.kappa * dtau) / state.tau;

    Direction { dx, dy, dz, dtau, dkappa }
}

struct State {
    x: Vec<f64>,
    y: Vec<f64>,
    z: Vec<f64>,
    tau: f64,
    kappa: f64,
}

struct Residuals {
    rp: Vec<f64>,
    rd: Vec<f64>,
    rg: f64,
}

struct Buffers {
    wd: Vec<f64>,
    ds: Vec<f64>,
    rhs: Vec<f64>,
    sol: Vec<f64>,
    s1: Vec<f64>,
    s2: Vec<f64>,
    tmp_cone: Vec<f64>,
}

fn ipm(prog: &ConicProgram, settings: &Settings) -> RawSolution {
    let ws = Workspace::new(prog, settings);
    let (n, m) = (ws.n, ws.m);
    let dim = n + m;
    let max_cone_dim = ws.cones.iter().map(|c| c.dim()).max().unwrap_or(1);

    let mut state = State {
        x: vec![0.0; n],
        y: vec![0.0; m],
        z: vec![0.0; n],
        tau: 1.0,
        kappa: 1.0,
    };
    for cone in &ws.cones {
        cone.set_identity(&mut state.x);
        cone.set_identity(&mut state.z);
    }

    let mut bufs = Buffers {
        wd: vec![0.0; n],
        ds: vec![0.0; n],
        rhs: vec![0.0; dim],
        sol: vec![0.0; dim],
        s1: vec![0.0; dim],
        s2: vec![0.0; dim],
        tmp_cone: vec![0.0; max_cone_dim],
    };
    let mut kkt_data = vec![0.0; ws.template.len()];
    let mut resid = Residuals { rp: vec![0.0; m], rd: vec![0.0; n], rg: 0.0 };

    let mut best_mu = f64::INFINITY;
    let mut stall = 0usize;
    let mut status = Status::MaxIter;
    let mut detail = String::new();
    let mut iters = 0usize;

    for iter in 0..settings.max_iter {
        iters = iter;
        // Residuals.
        ws.ax(&state.x, &mut resid.rp);
        for r in 0..m {
            resid.rp[r] -= prog.rhs[r] * state.tau;
        }
        ws.at_y(&state.y, &mut resid.rd);
        for i in 0..n {
            resid.rd[i] = -resid.rd[i] - state.z[i] + prog.objective[i] * state.tau;
        }
        let cx: f64 = prog.objective.iter().zip(&state.x).map(|(c, v)| c * v).sum();
        let by: f64 = prog.rhs.iter().zip(&state.y).map(|(b, v)| b * v).sum();
        let xz: f64 = state.x.iter().zip(&state.z).map(|(a, b)| a * b).sum();
        resid.rg = cx - by + state.kappa;
        let mu = (xz + state.tau * state.kappa) / (ws.rank + 1) as f64;

        let tau = state.tau;
        let pres = inf_norm(&resid.rp) / (tau * (1.0 + ws.norm_b));
        let dres = inf_norm(&resid.rd) / (tau * (1.0 + ws.norm_c));
        let pobj = cx / tau;
        let dobj = by / tau;
        let relgap = (pobj - dobj).abs() / pobj.abs().max(dobj.abs()).max(1.0);
        let compl = (xz / (tau * tau)) / pobj.abs().max(dobj.abs()).max(1.0);

        if settings.verbose {
            eprintln!(
                "iter {iter:3}  mu {mu:9.2e}  pres {pres:9.2e}  dres {dres:9.2e}  gap {relgap:9.2e}  tau {tau:9.2e}  kappa {:9.2e}",
                state.kappa
            );
        }

        if pres <= settings.tol && dres <= settings.tol && (relgap <= settings.tol || compl <= settings.tol) {
            status = Status::Optimal;
            break;
        }

        // Infeasibility certificates.
        if by > 0.0 {
            let mut aty = vec![0.0; n];
            ws.at_y(&state.y, &mut aty);
            let mut worst = 0.0f64;
            for i in 0..n {
                worst = worst.max((aty[i] + state.z[i]).abs());
            }
            if worst / by * (1.0 + ws.norm_b) <= settings.tol {
                for v in state.y.iter_mut() {
                    *v /= by;
                }
                for v in state.z.iter_mut() {
                    *v /= by;
                }
                state.x.fill(0.0);
                status = Status::PrimalInfeasible;
                detail = "Farkas certificate: A'y + z = 0, z in K*, b'y = 1".into();
                break;
            }
        }
        if cx < 0.0 {
            let mut axv = vec![0.0; m];
            ws.ax(&state.x, &mut axv);
            let worst = inf_norm(&axv);
            if worst / (-cx) * (1.0 + ws.norm_c) <= settings.tol {
                let s = -1.0 / cx;
                for v in state.x.iter_mut() {
                    *v *= s;
                }
                state.y.fill(0.0);
                state.z.fill(0.0);
                status = Status::DualInfeasible;
                detail = "unboundedness certificate: Ax = 0, x in K, c'x = -1".into();
                break;
            }
        }

        // Stall watch.
        if mu < best_mu * 0.95 {
            best_mu = mu;
            stall = 0;
        } else {
            stall += 1;
            if stall >= 10 {
                status = Status::Numerical;
                detail = format!("stalled at mu = {mu:.3e}");
                break;
            }
        }

        // NT scalings and KKT factorization.
        let scalings: Vec<Scaling> =
            ws.cones.iter().map(|&c| Scaling::compute(c, &state.x, &state.z)).collect();
        kkt_data.copy_from_slice(&ws.template);
        {
            let mut k = 0usize;
            for sc in &scalings {
                sc.w_inv2_lower(|_, _, v| {
                    kkt_data[ws.h_slots[k]] -= v;
                    k += 1;
                });
            }
        }
        let fac = SkylineLdl::factor(&ws.pat, &kkt_data, &ws.diag_sign);

        // Constant-RHS solve for the τ elimination.
        let mut rhs2 = vec![0.0; dim];
        rhs2[..n].copy_from_slice(&prog.objective);
        rhs2[n..].copy_from_slice(&prog.rhs);
        let mut sol2 = vec![0.0; dim];
        ws.kkt_solve(&fac, &scalings, &rhs2, &mut sol2, settings.refine_steps, &mut bufs.s1, &mut bufs.s2);
        let p2: Vec<f64> = sol2[..n].to_vec();
        let q2: Vec<f64> = sol2[n..].to_vec();
        let den_const: f64 = prog.objective.iter().zip(&p2).map(|(c, v)| c * v).sum::<f64>()
            - prog.rhs.iter().zip(&q2).map(|(b, v)| b * v).sum::<f64>();
        let p2q2 = (p2, q2, den_const);

        // Predictor (affine) direction.
        let aff = compute_direction(
            &ws, &fac, &scalings, settings, &state, &resid, mu, 0.0, None, &p2q2, &mut bufs,
        );
        let alpha_aff = step_length(&ws, &state, &aff, 1.0);

        // Centering parameter from the affine trial point.
        let mu_aff = trial_mu(&ws, &state, &aff, alpha_aff);
        let sigma = (mu_aff / mu).clamp(0.0, 1.0).powi(3);

        // Mehrotra correction terms: (W⁻¹Δx_aff)∘(WΔz_aff) per cone.
        let mut corr = vec![0.0; n];
        for (cone, sc) in ws.cones.iter().zip(&scalings) {
            let (s, d) = (cone.start(), cone.dim());
            let mut wx = vec![0.0; d];
            let mut wz = vec![0.0; d];
            sc.apply_w_inv(&aff.dx[s..s + d], &mut wx);
            sc.apply_w(&aff.dz[s..s + d], &mut wz);
            match cone {
                WorkCone::NonNeg { .. } => {
                    for i in 0..d {
                        corr[s + i] = wx[i] * wz[i];
                    }
                }
                WorkCone::Soc { .. } => {
                    soc_prod(&wx, &wz, &mut bufs.tmp_cone[..d]);
                    corr[s..s + d].copy_from_slice(&bufs.tmp_cone[..d]);
                }
            }
        }
        let corr_tk = aff.dtau * aff.dkappa;

        let dir = compute_direction(
            &ws,
            &fac,
            &scalings,
            settings,
            &state,
            &resid,
            mu,
            sigma,
            Some((&corr, corr_tk)),
            &p2q2,
            &mut bufs,
        );
        let alpha = (0.99 * step_length(&ws, &state, &dir, f64::INFINITY)).min(1.0);
        if alpha < 1e-8 {
            status = Status::Numerical;
            detail = format!("step length collapsed at iter {iter}");
            break;
        }

        for i in 0..n {
            state.x[i] += alpha * dir.dx[i];
            state.z[i] += alpha * dir.dz[i];
        }
        for r in 0..m {
            state.y[r] += alpha * dir.dy[r];
        }
        state.tau += alpha * dir.dtau;
        state.kappa += alpha * dir.dkappa;
    }

    if status == Status::MaxIter {
        detail = format!("no convergence in {} iterations", settings.max_iter);
    }

    // Unscale unless we broke out with a certificate (already normalized).
    if matches!(status, Status::Optimal | Status::MaxIter | Status::Numerical) {
        let t = state.tau.max(1e-300);
        for v in state.x.iter_mut() {
            *v /= t;
        }
        for v in state.y.iter_mut() {
            *v /= t;
        }
        for v in state.z.iter_mut() {
            *v /= t;
        }
    }

    RawSolution { status, x: state.x, y: state.y, z: state.z, iters, detail }
}

fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |a, &x| a.max(x.abs()))
}

/// Largest step keeping (x, z, τ, κ) in the interior, capped at `cap`.
fn step_length(ws: &Workspace, state: &State, dir: &Direction, cap: f64) -> f64 {
    let mut alpha = cap;
    for cone in &ws.cones {
        alpha = alpha.min(cone.step_to_boundary(&state.x, &dir.dx));
        alpha = alpha.min(cone.step_to_boundary(&state.z, &dir.dz));
    }
    if dir.dtau < 0.0 {
        alpha = alpha.min(-state.tau / dir.dtau);
    }
    if dir.dkappa < 0.0 {
        alpha = alpha.min(-state.kappa / dir.dkappa);
    }
    alpha
}

fn trial_mu(ws: &Workspace, state: &State, dir: &Direction, alpha: f64) -> f64 {
    let mut xz = 0.0;
    for i in 0..ws.n {
        xz += (state.x[i] + alpha * dir.dx[i]) * (state.z[i] + alpha * dir.dz[i]);
    }
    let t = state.tau + alpha * dir.dtau;
    let k = state.kappa + alpha * dir.dkappa;
    (xz + t * k) / (ws.rank + 1) as f64
}
