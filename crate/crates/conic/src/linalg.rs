//! Symmetric-indefinite KKT factorization on a skyline (profile) layout.
//!
//! The KKT matrices solved here are quasi-definite after static
//! regularization (negative-definite top-left block, positive-definite
//! bottom-right), so an LDLᵀ factorization exists for *any* symmetric
//! permutation and no pivoting is needed. That frees the ordering to chase
//! sparsity alone: a reverse Cuthill–McKee pass keeps the profile of the
//! chain-structured trajectory systems narrow, while the few dense coupling
//! rows (energy budget, per-user rate sums) are detected by degree and
//! pushed to the end of the ordering where they add a thin dense border
//! instead of destroying the band.

/// Sparsity pattern and ordering of one KKT matrix; reused across
/// factorizations with different numeric values.
#[derive(Debug)]
pub struct KktPattern {
    pub dim: usize,
    /// new index -> old index.
    pub perm: Vec<u32>,
    /// old index -> new index.
    pub iperm: Vec<u32>,
    /// Skyline profile: row i (new indexing) stores columns
    /// `col_start[i] ..= i`.
    col_start: Vec<u32>,
    /// Start of each row's storage in `data`; row i occupies
    /// `row_ptr[i] .. row_ptr[i] + (i - col_start[i] + 1)`.
    row_ptr: Vec<usize>,
    /// For each structural entry passed to `new`, the slot in `data` it
    /// scatters to (lower triangle after permutation).
    pub slots: Vec<usize>,
}

impl KktPattern {
    /// Build the ordering and profile from the structural lower-triangle
    /// entries (i, j) of a symmetric matrix. Entries may appear in either
    /// triangle; duplicates are allowed and accumulate on assembly.
    pub fn new(dim: usize, entries: &[(u32, u32)]) -> KktPattern {
        // Adjacency (off-diagonal, deduplicated).
        let mut adj: Vec<Vec<u32>> = vec![Vec::new(); dim];
        for &(i, j) in entries {
            if i != j {
                adj[i as usize].push(j);
                adj[j as usize].push(i);
            }
        }
        let mut total_deg = 0usize;
        for a in adj.iter_mut() {
            a.sort_unstable();
            a.dedup();
            total_deg += a.len();
        }
        let avg_deg = (total_deg as f64 / dim.max(1) as f64).ceil() as usize;
        let dense_threshold = 24.max(4 * avg_deg.max(1));

        let dense: Vec<bool> = adj.iter().map(|a| a.len() >= dense_threshold).collect();

        // Reverse Cuthill–McKee over the non-dense subgraph.
        let mut order: Vec<u32> = Vec::with_capacity(dim);
        let mut visited = dense.clone(); // dense nodes excluded from RCM
        let mut by_degree: Vec<u32> = (0..dim as u32).filter(|&v| !dense[v as usize]).collect();
        by_degree.sort_by_key(|&v| (adj[v as usize].len(), v));
        let mut queue: std::collections::VecDeque<u32> = std::collections::VecDeque::new();
        for &seed in &by_degree {
            if visited[seed as usize] {
                continue;
            }
            visited[seed as usize] = true;
            queue.push_back(seed);
            while let Some(v) = queue.pop_front() {
                order.push(v);
                let mut nbrs: Vec<u32> = adj[v as usize]
                    .iter()
                    .copied()
                    .filter(|&u| !visited[u as usize])
                    .collect();
                nbrs.sort_by_key(|&u| (adj[u as usize].len(), u));
                for u in nbrs {
                    visited[u as usize] = true;
                    queue.push_back(u);
                }
            }
        }
        order.reverse();
        // Dense nodes last, lightest first.
        let mut dense_nodes: Vec<u32> = (0..dim as u32).filter(|&v| dense[v as usize]).collect();
        dense_nodes.sort_by_key(|&v| (adj[v as usize].len(), v));
        order.extend(dense_nodes);
        debug_assert_eq!(order.len(), dim);

        let perm = order;
        let mut iperm = vec![0u32; dim];
        for (new, &old) in perm.iter().enumerate() {
            iperm[old as usize] = new as u32;
        }

        // Profile from the permuted entries.
        let mut col_start: Vec<u32> = (0..dim as u32).collect();
        for &(i, j) in entries {
            let (pi, pj) = (iperm[i as usize], iperm[j as usize]);
            let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
            if c < col_start[r as usize] {
                col_start[r as usize] = c;
            }
        }
        let mut row_ptr = Vec::with_capacity(dim + 1);
        let mut total = 0usize;
        for i in 0..dim {
            row_ptr.push(total);
            total += i - col_start[i] as usize + 1;
        }
        row_ptr.push(total);

        let slots = entries
            .iter()
            .map(|&(i, j)| {
                let (pi, pj) = (iperm[i as usize], iperm[j as usize]);
                let (r, c) = if pi >= pj { (pi, pj) } else { (pj, pi) };
                row_ptr[r as usize] + (c - col_start[r as usize]) as usize
            })
            .collect();

        KktPattern { dim, perm, iperm, col_start, row_ptr, slots }
    }

    pub fn storage_len(&self) -> usize {
        self.row_ptr[self.dim]
    }
}

/// Numeric LDLᵀ factor on a [`KktPattern`].
#[derive(Debug)]
pub struct SkylineLdl<'a> {
    pat: &'a KktPattern,
    /// Strict lower triangle l_ij plus (unused) diagonal slots, skyline.
    ldata: Vec<f64>,
    diag: Vec<f64>,
    /// Number of diagonal entries clamped away from zero or a sign flip.
    pub clamped: usize,
}

impl<'a> SkylineLdl<'a> {
    /// Factor the symmetric matrix whose skyline values are `data`
    /// (layout as in the pattern; modified in place conceptually — a copy
    /// is taken). `diag_sign[i]` is the expected sign (+1/−1) of pivot i in
    /// *old* indexing; pivots drifting across zero are clamped to it.
    pub fn factor(pat: &'a KktPattern, data: &[f64], diag_sign: &[i8]) -> SkylineLdl<'a> {
        assert_eq!(data.len(), pat.storage_len());
        let dim = pat.dim;
        let mut ldata = data.to_vec();
        let mut diag = vec![0.0; dim];
        let mut clamped = 0usize;

        for i in 0..dim {
            let csi = pat.col_start[i] as usize;
            let base_i = pat.row_ptr[i];
            // Phase 1: u_ij = K_ij − Σ_{k<j} u_ik·l_jk, overwriting row i.
            for j in csi..i {
                let csj = pat.col_start[j] as usize;
                let k0 = csi.max(csj);
                let base_j = pat.row_ptr[j];
                let mut s = ldata[base_i + (j - csi)];
                if k0 < j {
                    let ui = &ldata[base_i + (k0 - csi)..base_i + (j - csi)];
                    let lj = &ldata[base_j + (k0 - csj)..base_j + (j - csj)];
                    let mut acc = 0.0;
                    for (a, b) in ui.iter().zip(lj) {
                        acc += a * b;
                    }
                    s -= acc;
                }
                ldata[base_i + (j - csi)] = s;
            }
            // Phase 2: diagonal and normalization u -> l.
            let mut d = ldata[base_i + (i - csi)];
            for j in csi..i {
                let u = ldata[base_i + (j - csi)];
                let l = u / diag[j];
                d -= u * l;
                ldata[base_i + (j - csi)] = l;
            }
            let sign = diag_sign[pat.perm[i] as usize] as f64;
            if d == 0.0 || d.signum() != sign {
                // Quasi-definite systems shouldn't get here; guard anyway so
                // refinement has something to work with.
                d = sign * d.abs().max(1e-14);
                clamped += 1;
            }
            diag[i] = d;
        }
        SkylineLdl { pat, ldata, diag, clamped }
    }

    /// Solve K x = b (old indexing in and out).
    pub fn solve(&self, b: &[f64], x: &mut [f64]) {
        let dim = self.pat.dim;
        let mut y = vec![0.0; dim];
        for i in 0..dim {
            y[i] = b[self.pat.perm[i] as usize];
        }
        // Forward: L y' = y.
        for i in 0..dim {
            let csi = self.pat.col_start[i] as usize;
            let base = self.pat.row_ptr[i];
            let mut s = y[i];
            for j in csi..i {
                s -= self.ldata[base + (j - csi)] * y[j];
            }
            y[i] = s;
        }
        // Diagonal.
        for i in 0..dim {
            y[i] /= self.diag[i];
        }
        // Backward: Lᵀ x = y (scatter row contributions).
        for i in (0..dim).rev() {
            let xi = y[i];
            let csi = self.pat.col_start[i] as usize;
            let base = self.pat.row_ptr[i];
            for j in csi..i {
                y[j] -= self.ldata[base + (j - csi)] * xi;
            }
        }
        for i in 0..dim {
            x[self.pat.perm[i] as usize] = y[i];
        }
    }
}
