//! Cone-local operations for the interior-point core: Nesterov–Todd
//! scalings, Jordan-algebra products, and boundary step lengths.
//!
//! The solver core works with nonnegative orthants and second-order cones
//! only; rotated cones are rotated into plain second-order cones before the
//! iteration starts (see `solver::rotate_rsoc`).
//!
//! For the second-order cone the scaling point is kept in the factored form
//! `W = η·W̄` with `W̄` determined by a unit-hyperbolic vector `w̄`
//! (w̄_0² − ‖w̄_1‖² = 1), so applying `W`, `W⁻¹`, `W²`, `W⁻²` all cost O(d).

/// One cone of the reduced (nonneg/soc) problem, with its variable span.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WorkCone {
    NonNeg { start: usize, dim: usize },
    Soc { start: usize, dim: usize },
}

impl WorkCone {
    pub fn start(self) -> usize {
        match self {
            WorkCone::NonNeg { start, .. } | WorkCone::Soc { start, .. } => start,
        }
    }

    pub fn dim(self) -> usize {
        match self {
            WorkCone::NonNeg { dim, .. } | WorkCone::Soc { dim, .. } => dim,
        }
    }

    /// Contribution to the barrier rank: on the central path x'z = μ·rank.
    pub fn rank(self) -> usize {
        match self {
            WorkCone::NonNeg { dim, .. } => dim,
            WorkCone::Soc { .. } => 1,
        }
    }

    /// Write the cone's identity element into `x[span]`.
    pub fn set_identity(self, x: &mut [f64]) {
        match self {
            WorkCone::NonNeg { start, dim } => x[start..start + dim].fill(1.0),
            WorkCone::Soc { start, dim } => {
                x[start..start + dim].fill(0.0);
                x[start] = 1.0;
            }
        }
    }

    /// Largest `alpha` such that `x + alpha·dx` stays in the (closed) cone,
    /// assuming `x` is strictly interior. Returns `f64::INFINITY` when the
    /// ray never leaves.
    pub fn step_to_boundary(self, x: &[f64], dx: &[f64]) -> f64 {
        match self {
            WorkCone::NonNeg { start, dim } => {
                let mut alpha = f64::INFINITY;
                for i in start..start + dim {
                    if dx[i] < 0.0 {
                        alpha = alpha.min(-x[i] / dx[i]);
                    }
                }
                alpha
            }
            WorkCone::Soc { start, dim } => {
                let (x0, x1) = (&x[start..start + dim]).split_first().unwrap();
                let (d0, d1) = (&dx[start..start + dim]).split_first().unwrap();
                // Boundary crossing solves (x0+αd0)² = ‖x1+αd1‖².
                let a = d0 * d0 - dot(d1, d1);
                let b = 2.0 * (x0 * d0 - dot(x1, d1));
                let c = x0 * x0 - dot(x1, x1); // > 0 strictly inside
                smallest_positive_root(a, b, c)
            }
        }
    }

    /// Signed interior margin (same convention as `program::cone_slack`).
    pub fn margin(self, x: &[f64]) -> f64 {
        match self {
            WorkCone::NonNeg { start, dim } => {
                x[start..start + dim].iter().cloned().fold(f64::INFINITY, f64::min)
            }
            WorkCone::Soc { start, dim } => {
                x[start] - dot(&x[start + 1..start + dim], &x[start + 1..start + dim]).sqrt()
            }
        }
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest positive root of a·α² + b·α + c = 0 with c > 0 (the constraint
/// is satisfied at α = 0); infinity when the quadratic stays positive for
/// all α ≥ 0.
fn smallest_positive_root(a: f64, b: f64, c: f64) -> f64 {
    // Treat near-linear cases separately for stability.
    if a.abs() < 1e-300 {
        if b < 0.0 {
            return -c / b;
        }
        return f64::INFINITY;
    }
    let disc = b * b - 4.0 * a * c;
    if disc < 0.0 {
        // No real crossing: positive everywhere iff a > 0.
        return if a > 0.0 { f64::INFINITY } else { 0.0 };
    }
    let sq = disc.sqrt();
    // Numerically stable pair of roots.
    let q = -0.5 * (b + b.signum() * sq);
    let (mut r1, mut r2) = (q / a, if q != 0.0 { c / q } else { f64::INFINITY });
    if r1 > r2 {
        std::mem::swap(&mut r1, &mut r2);
    }
    if r1 > 0.0 {
        r1
    } else if r2 > 0.0 {
        if a > 0.0 && b >= 0.0 {
            // Both roots behind us or bracketing zero from below.
            f64::INFINITY
        } else {
            r2
        }
    } else {
        f64::INFINITY
    }
}

/// Nesterov–Todd scaling state for one cone.
#[derive(Debug, Clone)]
pub enum Scaling {
    /// Per-component w_i = sqrt(x_i / z_i), λ_i = sqrt(x_i z_i).
    NonNeg { w: Vec<f64>, lambda: Vec<f64> },
    /// η and hyperbolic w̄ as documented at module level; λ = W z.
    Soc { eta: f64, wbar: Vec<f64>, lambda: Vec<f64> },
}

impl Scaling {
    /// Compute the NT scaling for strictly interior x, z.
    pub fn compute(cone: WorkCone, x: &[f64], z: &[f64]) -> Scaling {
        match cone {
            WorkCone::NonNeg { start, dim } => {
                let xs = &x[start..start + dim];
                let zs = &z[start..start + dim];
                let w = xs.iter().zip(zs).map(|(&a, &b)| (a / b).sqrt()).collect();
                let lambda = xs.iter().zip(zs).map(|(&a, &b)| (a * b).sqrt()).collect();
                Scaling::NonNeg { w, lambda }
            }
            WorkCone::Soc { start, dim } => {
                let xs = &x[start..start + dim];
                let zs = &z[start..start + dim];
                let ax = (xs[0] * xs[0] - dot(&xs[1..], &xs[1..])).max(f64::MIN_POSITIVE);
                let az = (zs[0] * zs[0] - dot(&zs[1..], &zs[1..])).max(f64::MIN_POSITIVE);
                let (sax, saz) = (ax.sqrt(), az.sqrt());
                // Normalized points on the unit hyperboloid.
                let gamma = (0.5 * (1.0 + dot(xs, zs) / (sax * saz))).sqrt();
                let mut wbar = vec![0.0; dim];
                let denom = 2.0 * gamma;
                wbar[0] = (xs[0] / sax + zs[0] / saz) / denom;
                for i in 1..dim {
                    wbar[i] = (xs[i] / sax - zs[i] / saz) / denom;
                }
                let eta = (ax / az).powf(0.25);
                let mut s = Scaling::Soc { eta, wbar, lambda: Vec::new() };
                let mut lambda = vec![0.0; dim];
                s.apply_w(zs, &mut lambda);
                if let Scaling::Soc { lambda: l, .. } = &mut s {
                    *l = lambda;
                }
                s
            }
        }
    }

    /// λ = W z = W⁻¹ x, the scaled point.
    pub fn lambda(&self) -> &[f64] {
        match self {
            Scaling::NonNeg { lambda, .. } | Scaling::Soc { lambda, .. } => lambda,
        }
    }

    /// out = W·v (cone-local slices).
    pub fn apply_w(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..w.len() {
                    out[i] = w[i] * v[i];
                }
            }
            Scaling::Soc { eta, wbar, .. } => {
                wbar_apply(wbar, v, out, 1.0);
                for o in out.iter_mut() {
                    *o *= *eta;
                }
            }
        }
    }

    /// out = W⁻¹·v.
    pub fn apply_w_inv(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..w.len() {
                    out[i] = v[i] / w[i];
                }
            }
            Scaling::Soc { eta, wbar, .. } => {
                wbar_apply(wbar, v, out, -1.0);
                for o in out.iter_mut() {
                    *o /= *eta;
                }
            }
        }
    }

    /// out = W⁻²·v, used by iterative refinement.
    pub fn apply_w_inv2(&self, v: &[f64], out: &mut [f64]) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for i in 0..w.len() {
                    out[i] = v[i] / (w[i] * w[i]);
                }
            }
            Scaling::Soc { eta, wbar, .. } => {
                // W⁻² = η⁻²(2·(Jw̄)(Jw̄)' − J).
                let d = wbar.len();
                let mut jdot = wbar[0] * v[0];
                for i in 1..d {
                    jdot -= wbar[i] * v[i];
                }
                out[0] = 2.0 * wbar[0] * jdot - v[0];
                for i in 1..d {
                    out[i] = -2.0 * wbar[i] * jdot + v[i];
                }
                let s = 1.0 / (eta * eta);
                for o in out.iter_mut() {
                    *o *= s;
                }
            }
        }
    }

    /// Dense lower-triangle entries of the KKT block W⁻² for this cone, as
    /// (local_row ≥ local_col, value) triples.
    pub fn w_inv2_lower(&self, mut emit: impl FnMut(usize, usize, f64)) {
        match self {
            Scaling::NonNeg { w, .. } => {
                for (i, wi) in w.iter().enumerate() {
                    emit(i, i, 1.0 / (wi * wi));
                }
            }
            Scaling::Soc { eta, wbar, .. } => {
                // W⁻² = η⁻²(2 v̄ v̄' − J), v̄ = Jw̄.
                let s = 1.0 / (eta * eta);
                let d = wbar.len();
                let vbar = |i: usize| if i == 0 { wbar[0] } else { -wbar[i] };
                for i in 0..d {
                    for j in 0..=i {
                        let mut val = 2.0 * vbar(i) * vbar(j);
                        if i == j {
                            val -= if i == 0 { 1.0 } else { -1.0 };
                        }
                        emit(i, j, s * val);
                    }
                }
            }
        }
    }
}

/// out = W̄^sign · v for the SOC scaling matrix
/// W̄ = [w̄0, w̄1'; w̄1, I + w̄1 w̄1'/(1+w̄0)]; sign −1 flips w̄1.
fn wbar_apply(wbar: &[f64], v: &[f64], out: &mut [f64], sign: f64) {
    let d = wbar.len();
    let w0 = wbar[0];
    let mut w1v = 0.0;
    for i in 1..d {
        w1v += wbar[i] * v[i];
    }
    w1v *= sign;
    out[0] = w0 * v[0] + w1v;
    let coef = v[0] + w1v / (1.0 + w0);
    for i in 1..d {
        out[i] = v[i] + sign * wbar[i] * coef;
    }
}

// --------------------------------------------------------------------------
// Jordan algebra (second-order cone); the nonneg case is componentwise.

/// u∘v for the SOC algebra: (u'v, u0·v1 + v0·u1).
pub fn soc_prod(u: &[f64], v: &[f64], out: &mut [f64]) {
    out[0] = dot(u, v);
    for i in 1..u.len() {
        out[i] = u[0] * v[i] + v[0] * u[i];
    }
}

/// Solve λ∘a = d for a (the "quadratic representation" arrow system).
pub fn soc_solve(lambda: &[f64], d: &[f64], out: &mut [f64]) {
    let l0 = lambda[0];
    let l1d1 = dot(&lambda[1..], &d[1..]);
    let l1sq = dot(&lambda[1..], &lambda[1..]);
    let a0 = (l0 * d[0] - l1d1) / (l0 * l0 - l1sq);
    out[0] = a0;
    for i in 1..lambda.len() {
        out[i] = (d[i] - a0 * lambda[i]) / l0;
    }
}
