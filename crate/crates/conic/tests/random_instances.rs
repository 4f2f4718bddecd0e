//! Randomized end-to-end checks against instances whose solutions are known
//! by construction: optimal pairs built from first-order conditions, primal
//! infeasible programs built around a Farkas certificate, and unbounded
//! programs built around an improving ray.

use aircover_conic::{solve, Cone, ConeSpan, ConicProgram, Settings, Status};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const SQRT_HALF: f64 = std::f64::consts::FRAC_1_SQRT_2;

fn dense_rows(a: &[Vec<f64>]) -> Vec<Vec<(u32, f64)>> {
    a.iter()
        .map(|row| {
            row.iter()
                .enumerate()
                .filter(|(_, v)| **v != 0.0)
                .map(|(j, v)| (j as u32, *v))
                .collect()
        })
        .collect()
}

fn spans_from(kinds: &[Cone], n_free: usize) -> Vec<ConeSpan> {
    let mut start = n_free;
    kinds
        .iter()
        .map(|&cone| {
            let s = ConeSpan { start, cone };
            start += cone.dim();
            s
        })
        .collect()
}

/// Draw a strictly complementary pair (x, z) for one second-order cone of
/// dimension `d`, written into the slices starting at offset 0.
fn soc_pair(rng: &mut ChaCha8Rng, d: usize, x: &mut [f64], z: &mut [f64]) {
    match rng.gen_range(0..3u32) {
        0 => {
            // x interior, z = 0.
            x[0] = rng.gen_range(1.0..2.0);
            for v in x.iter_mut().take(d).skip(1) {
                *v = rng.gen_range(-0.4..0.4);
            }
        }
        1 => {
            // x = 0, z interior.
            z[0] = rng.gen_range(1.0..2.0);
            for v in z.iter_mut().take(d).skip(1) {
                *v = rng.gen_range(-0.4..0.4);
            }
        }
        _ => {
            // Both on the boundary along opposite rays.
            let mut u = vec![0.0; d - 1];
            let mut nr = 0.0f64;
            for v in u.iter_mut() {
                *v = rng.gen_range(-1.0..1.0);
                nr += *v * *v;
            }
            let nr = nr.sqrt().max(1e-6);
            let (t, s) = (rng.gen_range(0.5..2.0), rng.gen_range(0.5..2.0));
            x[0] = t;
            z[0] = s;
            for i in 1..d {
                x[i] = t * u[i - 1] / nr;
                z[i] = -s * u[i - 1] / nr;
            }
        }
    }
}

/// Map a second-order-cone vector to rotated-cone coordinates in place
/// (the transform is orthogonal and self-inverse).
fn to_rotated(v: &mut [f64]) {
    let (a, b) = (v[0], v[1]);
    v[0] = (a + b) * SQRT_HALF;
    v[1] = (a - b) * SQRT_HALF;
}

struct Constructed {
    prog: ConicProgram,
    opt: f64,
}

fn random_optimal_instance(rng: &mut ChaCha8Rng) -> Constructed {
    let n_free = rng.gen_range(0..3usize);
    let num_spans = rng.gen_range(1..5usize);
    let kinds: Vec<Cone> = (0..num_spans)
        .map(|_| match rng.gen_range(0..3u32) {
            0 => Cone::NonNeg(rng.gen_range(1..5)),
            1 => Cone::Soc(rng.gen_range(2..5)),
            _ => Cone::Rsoc(rng.gen_range(3..6)),
        })
        .collect();
    let n = n_free + kinds.iter().map(|c| c.dim()).sum::<usize>();
    let m = rng.gen_range(1..=(n - 1).max(1));

    // Strictly complementary primal/dual pair over the cones.
    let mut xs = vec![0.0; n];
    let mut zs = vec![0.0; n];
    for v in xs.iter_mut().take(n_free) {
        *v = rng.gen_range(-2.0..2.0);
    }
    let mut p = n_free;
    for kind in &kinds {
        let d = kind.dim();
        match kind {
            Cone::NonNeg(_) => {
                for i in 0..d {
                    if rng.gen_bool(0.5) {
                        xs[p + i] = rng.gen_range(0.2..2.0);
                    } else {
                        zs[p + i] = rng.gen_range(0.2..2.0);
                    }
                }
            }
            Cone::Soc(_) => soc_pair(rng, d, &mut xs[p..p + d], &mut zs[p..p + d]),
            Cone::Rsoc(_) => {
                soc_pair(rng, d, &mut xs[p..p + d], &mut zs[p..p + d]);
                to_rotated(&mut xs[p..p + d]);
                to_rotated(&mut zs[p..p + d]);
            }
        }
        p += d;
    }

    // Data consistent with (x*, y*, z*) satisfying the optimality system.
    let mut a = vec![vec![0.0; n]; m];
    for row in a.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    let ys: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let rhs: Vec<f64> = a.iter().map(|row| row.iter().zip(&xs).map(|(r, x)| r * x).sum()).collect();
    let mut obj = zs.clone();
    for (row, y) in a.iter().zip(&ys) {
        for (j, r) in row.iter().enumerate() {
            obj[j] += r * y;
        }
    }
    let opt = obj.iter().zip(&xs).map(|(c, x)| c * x).sum();

    let prog = ConicProgram {
        num_vars: n,
        objective: obj,
        rows: dense_rows(&a),
        rhs,
        cones: spans_from(&kinds, n_free),
    };
    prog.check().unwrap();
    assert!(prog.in_cones(&xs, 1e-12), "constructed point must be conic");
    Constructed { prog, opt }
}

#[test]
fn constructed_optima_are_recovered() {
    let mut rng = ChaCha8Rng::seed_from_u64(20_260_401);
    let settings = Settings::default();
    for k in 0..100 {
        let inst = random_optimal_instance(&mut rng);
        let sol = solve(&inst.prog, &settings).unwrap();
        assert_eq!(sol.status, Status::Optimal, "instance {k}: {}", sol.detail);
        let scale = inst.opt.abs().max(1.0);
        assert!(
            (sol.obj - inst.opt).abs() <= 1e-6 * scale,
            "instance {k}: objective {} vs constructed {}",
            sol.obj,
            inst.opt
        );
        assert!(inst.prog.eq_residual(&sol.x) <= 1e-6, "instance {k}: residual");
        assert!(inst.prog.in_cones(&sol.x, 1e-7), "instance {k}: cone membership");
    }
}

/// Primal infeasible: data built so that y*, z* witness A'y* + z* = 0,
/// z* strictly interior to the dual cone, and b'y* = 1.
fn random_infeasible_instance(rng: &mut ChaCha8Rng) -> ConicProgram {
    let num_spans = rng.gen_range(1..4usize);
    let kinds: Vec<Cone> = (0..num_spans)
        .map(|_| match rng.gen_range(0..3u32) {
            0 => Cone::NonNeg(rng.gen_range(1..5)),
            1 => Cone::Soc(rng.gen_range(2..5)),
            _ => Cone::Rsoc(rng.gen_range(3..6)),
        })
        .collect();
    let n: usize = kinds.iter().map(|c| c.dim()).sum();
    let m = rng.gen_range(2..=(n + 1));

    let mut zs = vec![0.0; n];
    let mut p = 0usize;
    for kind in &kinds {
        let d = kind.dim();
        match kind {
            Cone::NonNeg(_) => {
                for v in zs.iter_mut().skip(p).take(d) {
                    *v = rng.gen_range(0.3..1.5);
                }
            }
            Cone::Soc(_) => {
                zs[p] = rng.gen_range(1.5..2.0);
                for v in zs.iter_mut().skip(p + 1).take(d - 1) {
                    *v = rng.gen_range(-0.3..0.3);
                }
            }
            Cone::Rsoc(_) => {
                zs[p] = rng.gen_range(1.5..2.0);
                for v in zs.iter_mut().skip(p + 1).take(d - 1) {
                    *v = rng.gen_range(-0.3..0.3);
                }
                to_rotated(&mut zs[p..p + d]);
            }
        }
        p += d;
    }

    let mut ys: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let k = ys
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.abs().total_cmp(&b.1.abs()))
        .map(|(i, _)| i)
        .unwrap();
    if ys[k].abs() < 0.5 {
        ys[k] = ys[k].signum().max(0.5) * 1.0;
    }
    let mut a = vec![vec![0.0; n]; m];
    for row in a.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
    }
    // Cancel the residual on row k so that A'y* + z* = 0 exactly.
    for j in 0..n {
        let mut r = zs[j];
        for (row, y) in a.iter().zip(&ys) {
            r += row[j] * y;
        }
        a[k][j] -= r / ys[k];
    }
    // Shift b along y* so that b'y* = 1.
    let mut b: Vec<f64> = (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let byn: f64 = b.iter().zip(&ys).map(|(b, y)| b * y).sum();
    let ynorm: f64 = ys.iter().map(|y| y * y).sum();
    let alpha = (1.0 - byn) / ynorm;
    for (bi, yi) in b.iter_mut().zip(&ys) {
        *bi += alpha * yi;
    }

    let obj: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let prog = ConicProgram {
        num_vars: n,
        objective: obj,
        rows: dense_rows(&a),
        rhs: b,
        cones: spans_from(&kinds, 0),
    };
    prog.check().unwrap();
    prog
}

#[test]
fn infeasible_instances_are_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(99_173);
    let settings = Settings::default();
    for k in 0..25 {
        let prog = random_infeasible_instance(&mut rng);
        let sol = solve(&prog, &settings).unwrap();
        assert_eq!(
            sol.status,
            Status::PrimalInfeasible,
            "instance {k}: got {:?} ({})",
            sol.status,
            sol.detail
        );
    }
}

/// Unbounded: an interior ray d with Ad = 0, c'd = −1 is planted, and b is
/// chosen so the program is feasible.
fn random_unbounded_instance(rng: &mut ChaCha8Rng) -> ConicProgram {
    let num_spans = rng.gen_range(1..4usize);
    let kinds: Vec<Cone> = (0..num_spans)
        .map(|_| match rng.gen_range(0..3u32) {
            0 => Cone::NonNeg(rng.gen_range(1..5)),
            1 => Cone::Soc(rng.gen_range(2..5)),
            _ => Cone::Rsoc(rng.gen_range(3..6)),
        })
        .collect();
    let n: usize = kinds.iter().map(|c| c.dim()).sum();
    let m = rng.gen_range(1..=(n - 1).max(1));

    // Interior points: the ray d and a feasible anchor x0.
    let interior = |rng: &mut ChaCha8Rng| {
        let mut v = vec![0.0; n];
        let mut p = 0usize;
        for kind in &kinds {
            let d = kind.dim();
            match kind {
                Cone::NonNeg(_) => {
                    for x in v.iter_mut().skip(p).take(d) {
                        *x = rng.gen_range(0.5..1.5);
                    }
                }
                Cone::Soc(_) => {
                    v[p] = rng.gen_range(1.8..2.2);
                    for x in v.iter_mut().skip(p + 1).take(d - 1) {
                        *x = rng.gen_range(-0.5..0.5);
                    }
                }
                Cone::Rsoc(_) => {
                    v[p] = rng.gen_range(1.8..2.2);
                    for x in v.iter_mut().skip(p + 1).take(d - 1) {
                        *x = rng.gen_range(-0.5..0.5);
                    }
                    to_rotated(&mut v[p..p + d]);
                }
            }
            p += d;
        }
        v
    };
    let d = interior(rng);
    let x0 = interior(rng);
    let dd: f64 = d.iter().map(|v| v * v).sum();

    let mut a = vec![vec![0.0; n]; m];
    for row in a.iter_mut() {
        for v in row.iter_mut() {
            *v = rng.gen_range(-1.0..1.0);
        }
        let rd: f64 = row.iter().zip(&d).map(|(r, v)| r * v).sum();
        for (v, di) in row.iter_mut().zip(&d) {
            *v -= rd * di / dd;
        }
    }
    let mut c: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let cd: f64 = c.iter().zip(&d).map(|(c, v)| c * v).sum();
    for (v, di) in c.iter_mut().zip(&d) {
        *v -= (cd + 1.0) * di / dd;
    }
    let b: Vec<f64> = a.iter().map(|row| row.iter().zip(&x0).map(|(r, x)| r * x).sum()).collect();

    let prog = ConicProgram {
        num_vars: n,
        objective: c,
        rows: dense_rows(&a),
        rhs: b,
        cones: spans_from(&kinds, 0),
    };
    prog.check().unwrap();
    prog
}

#[test]
fn unbounded_instances_are_certified() {
    let mut rng = ChaCha8Rng::seed_from_u64(4_150_533);
    let settings = Settings::default();
    for k in 0..25 {
        let prog = random_unbounded_instance(&mut rng);
        let sol = solve(&prog, &settings).unwrap();
        assert_eq!(
            sol.status,
            Status::DualInfeasible,
            "instance {k}: got {:?} ({})",
            sol.status,
            sol.detail
        );
        // The returned ray must actually certify: x in K, Ax ≈ 0, c'x < 0.
        assert!(prog.in_cones(&sol.x, 1e-6), "instance {k}: ray not conic");
        let cx: f64 =
            prog.objective.iter().zip(&sol.x).map(|(c, x)| c * x).sum();
        assert!(cx < 0.0, "instance {k}: ray does not improve");
    }
}
