//! Problem representation: linear objective, sparse equality constraints,
//! and cone membership over contiguous variable spans.
//!
//! The canonical form is
//!
//! ```text
//! minimize    c'x
//! subject to  A x = b
//!             x[span_k] ∈ cone_k     for each declared span
//! ```
//!
//! Variables not covered by any span are free. Spans must be disjoint; they
//! need not cover all variables.

use std::collections::HashMap;
use std::fmt::Write as _;

use crate::SolverError;

/// Cone type for one contiguous span of variables.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Cone {
    /// Componentwise nonnegative: x_i ≥ 0.
    NonNeg(usize),
    /// Second-order (Lorentz) cone: x_0 ≥ ‖x_1..‖.
    Soc(usize),
    /// Rotated second-order cone: 2·x_0·x_1 ≥ ‖x_2..‖², x_0, x_1 ≥ 0.
    Rsoc(usize),
}

impl Cone {
    pub fn dim(self) -> usize {
        match self {
            Cone::NonNeg(d) | Cone::Soc(d) | Cone::Rsoc(d) => d,
        }
    }
}

/// A cone applied to variables `start .. start + cone.dim()`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ConeSpan {
    pub start: usize,
    pub cone: Cone,
}

impl ConeSpan {
    pub fn end(&self) -> usize {
        self.start + self.cone.dim()
    }
}

/// One sparse equality row: sorted (column, coefficient) pairs.
pub type SparseRow = Vec<(u32, f64)>;

/// A conic program in the canonical form documented at module level.
#[derive(Debug, Clone, PartialEq)]
pub struct ConicProgram {
    pub num_vars: usize,
    /// Objective coefficients c (minimized), length `num_vars`.
    pub objective: Vec<f64>,
    /// Equality rows of A, each with columns sorted ascending.
    pub rows: Vec<SparseRow>,
    /// Right-hand side b, one entry per row.
    pub rhs: Vec<f64>,
    /// Cone spans, sorted by `start`.
    pub cones: Vec<ConeSpan>,
}

impl ConicProgram {
    /// Empty program over `num_vars` free variables.
    pub fn new(num_vars: usize) -> Self {
        ConicProgram {
            num_vars,
            objective: vec![0.0; num_vars],
            rows: Vec::new(),
            rhs: Vec::new(),
            cones: Vec::new(),
        }
    }

    pub fn num_rows(&self) -> usize {
        self.rows.len()
    }

    /// Structural validation: shapes, finite data, sorted/unique row
    /// columns, disjoint in-range cone spans, minimum cone dimensions.
    pub fn check(&self) -> Result<(), SolverError> {
        let bad = |detail: String| Err(SolverError::BadProgram(detail));
        if self.objective.len() != self.num_vars {
            return bad(format!("objective length {} != num_vars {}", self.objective.len(), self.num_vars));
        }
        if self.rhs.len() != self.rows.len() {
            return bad(format!("rhs length {} != row count {}", self.rhs.len(), self.rows.len()));
        }
        if self.objective.iter().any(|v| !v.is_finite()) || self.rhs.iter().any(|v| !v.is_finite()) {
            return bad("non-finite objective or rhs entry".into());
        }
        for (i, row) in self.rows.iter().enumerate() {
            for k in 0..row.len() {
                let (col, val) = row[k];
                if col as usize >= self.num_vars {
                    return bad(format!("row {i} references column {col} out of range"));
                }
                if !val.is_finite() {
                    return bad(format!("row {i} has non-finite coefficient at column {col}"));
                }
                if k > 0 && row[k - 1].0 >= col {
                    return bad(format!("row {i} columns not strictly ascending"));
                }
            }
        }
        let mut spans = self.cones.clone();
        spans.sort_by_key(|s| s.start);
        let mut prev_end = 0usize;
        for (k, s) in spans.iter().enumerate() {
            let min_dim = match s.cone {
                Cone::NonNeg(_) => 1,
                Cone::Soc(_) => 2,
                Cone::Rsoc(_) => 3,
            };
            if s.cone.dim() < min_dim {
                return bad(format!("cone {k} dimension {} below minimum {min_dim}", s.cone.dim()));
            }
            if k > 0 && s.start < prev_end {
                return bad(format!("cone span starting at {} overlaps previous", s.start));
            }
            if s.end() > self.num_vars {
                return bad(format!("cone span {}..{} out of range", s.start, s.end()));
            }
            prev_end = s.end();
        }
        Ok(())
    }

    /// Membership of `x` in all declared cones, to absolute slack `tol`
    /// (negative slack allowed up to `tol`).
    pub fn in_cones(&self, x: &[f64], tol: f64) -> bool {
        self.cones.iter().all(|s| cone_slack(s.cone, &x[s.start..s.end()]) >= -tol)
    }

    /// Max-norm equality residual ‖Ax − b‖∞.
    pub fn eq_residual(&self, x: &[f64]) -> f64 {
        let mut worst = 0.0f64;
        for (row, &b) in self.rows.iter().zip(&self.rhs) {
            let ax: f64 = row.iter().map(|&(c, v)| v * x[c as usize]).sum();
            worst = worst.max((ax - b).abs());
        }
        worst
    }

    pub fn objective_value(&self, x: &[f64]) -> f64 {
        self.objective.iter().zip(x).map(|(c, v)| c * v).sum()
    }

    // ----------------------------------------------------------------
    // text round trip

    /// Serialize to a line-oriented text form. Floats are written in Rust's
    /// shortest round-trip representation, so `load` reproduces them bit for
    /// bit.
    pub fn dump(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "conic 1");
        let _ = writeln!(out, "vars {}", self.num_vars);
        let mut obj = String::from("min");
        for c in &self.objective {
            let _ = write!(obj, " {}", c);
        }
        let _ = writeln!(out, "{obj}");
        let _ = writeln!(out, "cones {}", self.cones.len());
        for s in &self.cones {
            let name = match s.cone {
                Cone::NonNeg(_) => "nonneg",
                Cone::Soc(_) => "soc",
                Cone::Rsoc(_) => "rsoc",
            };
            let _ = writeln!(out, "{name} {} {}", s.start, s.cone.dim());
        }
        let _ = writeln!(out, "rows {}", self.rows.len());
        for (row, b) in self.rows.iter().zip(&self.rhs) {
            let mut line = format!("{b} :");
            for (c, v) in row {
                let _ = write!(line, " {c}:{v}");
            }
            let _ = writeln!(out, "{line}");
        }
        out
    }

    /// Parse the `dump` format.
    pub fn load(text: &str) -> Result<Self, SolverError> {
        let bad = |d: &str| SolverError::BadProgram(format!("parse: {d}"));
        let mut lines = text.lines().filter(|l| !l.trim().is_empty());
        let mut next = |what: &str| lines.next().ok_or_else(|| bad(&format!("missing {what}")));

        let header = next("header")?;
        if header.trim() != "conic 1" {
            return Err(bad("unknown header"));
        }
        let vars_line = next("vars")?;
        let num_vars: usize = vars_line
            .strip_prefix("vars ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("vars line"))?;
        let obj_line = next("objective")?;
        let obj_body = obj_line.strip_prefix("min").ok_or_else(|| bad("objective line"))?;
        let objective: Vec<f64> = obj_body
            .split_whitespace()
            .map(|t| t.parse::<f64>().map_err(|_| bad("objective value")))
            .collect::<Result<_, _>>()?;
        if objective.len() != num_vars {
            return Err(bad("objective length"));
        }

        let ncones: usize = next("cones")?
            .strip_prefix("cones ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("cones line"))?;
        let mut cones = Vec::with_capacity(ncones);
        for _ in 0..ncones {
            let line = next("cone")?;
            let mut it = line.split_whitespace();
            let kind = it.next().ok_or_else(|| bad("cone kind"))?;
            let start: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("cone start"))?;
            let dim: usize = it.next().and_then(|s| s.parse().ok()).ok_or_else(|| bad("cone dim"))?;
            let cone = match kind {
                "nonneg" => Cone::NonNeg(dim),
                "soc" => Cone::Soc(dim),
                "rsoc" => Cone::Rsoc(dim),
                _ => return Err(bad("cone kind")),
            };
            cones.push(ConeSpan { start, cone });
        }

        let nrows: usize = next("rows")?
            .strip_prefix("rows ")
            .and_then(|s| s.trim().parse().ok())
            .ok_or_else(|| bad("rows line"))?;
        let mut rows = Vec::with_capacity(nrows);
        let mut rhs = Vec::with_capacity(nrows);
        for _ in 0..nrows {
            let line = next("row")?;
            let (b_str, rest) = line.split_once(':').ok_or_else(|| bad("row separator"))?;
            rhs.push(b_str.trim().parse::<f64>().map_err(|_| bad("row rhs"))?);
            let mut row: SparseRow = Vec::new();
            for tok in rest.split_whitespace() {
                let (c, v) = tok.split_once(':').ok_or_else(|| bad("row entry"))?;
                row.push((
                    c.parse::<u32>().map_err(|_| bad("row column"))?,
                    v.parse::<f64>().map_err(|_| bad("row value"))?,
                ));
            }
            rows.push(row);
        }

        let prog = ConicProgram { num_vars, objective, rows, rhs, cones };
        prog.check()?;
        Ok(prog)
    }
}

/// Signed slack of `x` in `cone`: nonnegative iff the point is a member.
/// For NonNeg this is the smallest component; for Soc, x_0 − ‖x_1..‖; for
/// Rsoc, min(x_0, x_1, (2·x_0·x_1 − ‖x_2..‖²) / scale) with a normalizing
/// scale so the quantity stays comparable to a distance.
pub fn cone_slack(cone: Cone, x: &[f64]) -> f64 {
    match cone {
        Cone::NonNeg(_) => x.iter().cloned().fold(f64::INFINITY, f64::min),
        Cone::Soc(_) => x[0] - x[1..].iter().map(|v| v * v).sum::<f64>().sqrt(),
        Cone::Rsoc(_) => {
            let q = 2.0 * x[0] * x[1] - x[2..].iter().map(|v| v * v).sum::<f64>();
            let scale = 1.0f64.max(x[0].abs()).max(x[1].abs());
            x[0].min(x[1]).min(q / (2.0 * scale))
        }
    }
}

/// Helper used while building programs: incrementally allocates variables,
/// cones, and rows, then yields the finished [`ConicProgram`].
#[derive(Debug, Clone)]
pub struct ProgramBuilder {
    num_vars: usize,
    objective: HashMap<usize, f64>,
    rows: Vec<SparseRow>,
    rhs: Vec<f64>,
    cones: Vec<ConeSpan>,
}

impl Default for ProgramBuilder {
    fn default() -> Self {
        Self::new()
    }
}

impl ProgramBuilder {
    pub fn new() -> Self {
        ProgramBuilder {
            num_vars: 0,
            objective: HashMap::new(),
            rows: Vec::new(),
            rhs: Vec::new(),
            cones: Vec::new(),
        }
    }

    /// Allocate `n` new free variables; returns the index of the first.
    pub fn free_vars(&mut self, n: usize) -> usize {
        let start = self.num_vars;
        self.num_vars += n;
        start
    }

    /// Allocate the variables of a new cone span; returns the span start.
    pub fn cone_vars(&mut self, cone: Cone) -> usize {
        let start = self.free_vars(cone.dim());
        self.cones.push(ConeSpan { start, cone });
        start
    }

    /// Add an equality row Σ coeff·x = rhs. Repeated columns are summed.
    pub fn eq(&mut self, entries: &[(usize, f64)], rhs: f64) -> usize {
        let mut row: SparseRow = Vec::with_capacity(entries.len());
        for &(c, v) in entries {
            row.push((c as u32, v));
        }
        row.sort_by_key(|e| e.0);
        row.dedup_by(|later, first| {
            if first.0 == later.0 {
                first.1 += later.1;
                true
            } else {
                false
            }
        });
        row.retain(|&(_, v)| v != 0.0);
        self.rows.push(row);
        self.rhs.push(rhs);
        self.rows.len() - 1
    }

    /// Add `coeff` to the objective coefficient of `var`.
    pub fn obj(&mut self, var: usize, coeff: f64) {
        *self.objective.entry(var).or_insert(0.0) += coeff;
    }

    pub fn num_vars(&self) -> usize {
        self.num_vars
    }

    pub fn finish(self) -> ConicProgram {
        let mut objective = vec![0.0; self.num_vars];
        for (v, c) in self.objective {
            objective[v] = c;
        }
        let mut cones = self.cones;
        cones.sort_by_key(|s| s.start);
        ConicProgram { num_vars: self.num_vars, objective, rows: self.rows, rhs: self.rhs, cones }
    }
}
