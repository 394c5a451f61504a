//! Left-looking LDL^T factorization of symmetric indefinite matrices with
//! 1x1 and 2x2 pivots.
//!
//! Pivots are selected within the fill-reducing order: a column accepts a
//! 1x1 pivot under a relative threshold test against its off-diagonal mass,
//! otherwise a 2x2 pivot paired with the next column is tried (bounded
//! element growth, Duff-Reid style). No dynamic row interchanges, so the
//! factor structure stays deterministic for fixed input.

use super::ordering::min_degree;
use super::{Inertia, SparseError};

pub const DEFAULT_PIVOT_THRESHOLD: f64 = 0.01;
const ZERO_PIVOT_REL: f64 = 1e-14;

/// Ordering, elimination tree and factor nonzero counts for a fixed
/// sparsity pattern. Counts assume 1x1 pivots; accepted 2x2 pivots may
/// merge column patterns and grow the numeric factor slightly.
#[derive(Debug, Clone)]
pub struct Symbolic {
    /// New-to-old permutation from minimum degree.
    pub perm: Vec<usize>,
    /// Old-to-new inverse permutation.
    pub iperm: Vec<usize>,
    /// Elimination tree parent of each permuted column (usize::MAX = root).
    pub parent: Vec<usize>,
    /// Predicted nonzeros per factor column, diagonal included.
    pub col_counts: Vec<usize>,
    /// Total predicted factor nonzeros, diagonal included.
    pub factor_nnz: usize,
}

/// Computes the fill-reducing ordering, elimination tree and column counts
/// for a lower-triangle CSC pattern with structurally present diagonal.
pub fn analyze(dim: usize, colptr: &[usize], rowidx: &[usize]) -> Symbolic {
    let edges = (0..dim).flat_map(|c| {
        rowidx[colptr[c]..colptr[c + 1]]
            .iter()
            .filter_map(move |&r| (r != c).then_some((r, c)))
    });
    let perm = min_degree(dim, edges);
    let mut iperm = vec![0usize; dim];
    for (new, &old) in perm.iter().enumerate() {
        iperm[old] = new;
    }

    // permuted strict-lower row patterns
    let mut rows: Vec<Vec<usize>> = vec![Vec::new(); dim];
    for c in 0..dim {
        for &r in &rowidx[colptr[c]..colptr[c + 1]] {
            if r != c {
                let (pr, pc) = (iperm[r], iperm[c]);
                let (hi, lo) = if pr > pc { (pr, pc) } else { (pc, pr) };
                rows[hi].push(lo);
            }
        }
    }

    // elimination tree and column counts by row-subtree traversal
    let mut parent = vec![usize::MAX; dim];
    let mut count = vec![1usize; dim];
    let mut visited = vec![usize::MAX; dim];
    for k in 0..dim {
        visited[k] = k;
        for &start in &rows[k] {
            let mut j = start;
            while visited[j] != k {
                visited[j] = k;
                count[j] += 1;
                if parent[j] == usize::MAX {
                    parent[j] = k;
                }
                j = parent[j];
            }
        }
    }
    let factor_nnz = count.iter().sum();
    Symbolic { perm, iperm, parent, col_counts: count, factor_nnz }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum PivotKind {
    Single,
    PairFirst,
    PairSecond,
}

/// Numeric LDL^T factor in permuted space.
#[derive(Debug)]
pub struct LdltFactor {
    dim: usize,
    perm: Vec<usize>,
    /// Strictly sub-pivot rows per column, ascending. Columns of a 2x2
    /// pair share an identical row pattern.
    col_rows: Vec<Vec<usize>>,
    col_vals: Vec<Vec<f64>>,
    diag: Vec<f64>,
    /// Off-diagonal of a 2x2 block, stored at the block's first column.
    off: Vec<f64>,
    kind: Vec<PivotKind>,
    pub inertia: Inertia,
}

/// Pivot-aware column order used by the numeric factorization. Computed
/// once per pattern from the first value set, then reused.
#[derive(Debug, Clone)]
pub struct PivotOrder {
    pub perm: Vec<usize>,
    pub iperm: Vec<usize>,
}

const MAX_DEFERRAL_PASSES: usize = 64;

/// Builds the elimination order for the numeric pass: columns whose
/// diagonal is too weak to pass the 1x1 pivot test on its own row are
/// matched to a structurally coupled partner and the pair is kept
/// adjacent, so the restricted 2x2 pivoting finds its partner where it
/// needs one. Minimum degree runs on the pair-condensed graph.
/// `pair_margin` sets which columns count as too weak to stand alone:
/// |diag| <= pair_margin * (largest off-diagonal in the column). The
/// caller escalates it when marginal columns degrade during elimination.
pub fn pivot_order(
    dim: usize,
    colptr: &[usize],
    rowidx: &[usize],
    values: &[f64],
    pair_margin: f64,
) -> PivotOrder {
    // per-column diagonal and largest off-diagonal magnitude (full pattern)
    let mut diag = vec![0.0f64; dim];
    let mut colmax = vec![0.0f64; dim];
    for c in 0..dim {
        for i in colptr[c]..colptr[c + 1] {
            let r = rowidx[i];
            let a = values[i].abs();
            if r == c {
                diag[c] = values[i];
            } else {
                colmax[c] = colmax[c].max(a);
                colmax[r] = colmax[r].max(a);
            }
        }
    }

    // greedy matching of weak-diagonal columns to their strongest neighbor
    let mut mate = vec![usize::MAX; dim];
    let is_null = |k: usize, diag: &[f64], colmax: &[f64]| {
        colmax[k] > 0.0 && diag[k].abs() <= pair_margin * colmax[k]
    };
    // neighbor lists with values, both directions
    let mut adj: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    for c in 0..dim {
        for i in colptr[c]..colptr[c + 1] {
            let r = rowidx[i];
            if r != c && values[i] != 0.0 {
                adj[c].push((r, values[i]));
                adj[r].push((c, values[i]));
            }
        }
    }
    // match columns with the fewest alternatives first so a column whose
    // only partners are popular does not starve
    let mut null_cols: Vec<usize> = (0..dim).filter(|&k| is_null(k, &diag, &colmax)).collect();
    null_cols.sort_by_key(|&k| (adj[k].len(), k));
    for k in null_cols {
        if mate[k] != usize::MAX {
            continue;
        }
        // favor partners that give a well-conditioned 2x2: strong coupling
        // and weak own diagonal (an antidiagonal block is ideal)
        let mut best: Option<(usize, f64)> = None;
        for &(j, v) in &adj[k] {
            if mate[j] != usize::MAX {
                continue;
            }
            let a = v.abs();
            let score = a * a / (diag[j].abs() + a);
            let better = match best {
                None => true,
                Some((bj, bs)) => score > bs || (score == bs && j < bj),
            };
            if better {
                best = Some((j, score));
            }
        }
        if let Some((j, _)) = best {
            mate[k] = j;
            mate[j] = k;
        }
    }

    // condensed graph: one node per column or matched pair
    let mut group_of = vec![usize::MAX; dim];
    let mut groups: Vec<(usize, Option<usize>)> = Vec::new();
    for k in 0..dim {
        if group_of[k] != usize::MAX {
            continue;
        }
        let g = groups.len();
        group_of[k] = g;
        if mate[k] != usize::MAX && mate[k] > k {
            group_of[mate[k]] = g;
            // non-null member first so a plain 1x1 pivot gets first shot
            if is_null(k, &diag, &colmax) && !is_null(mate[k], &diag, &colmax) {
                groups.push((mate[k], Some(k)));
            } else {
                groups.push((k, Some(mate[k])));
            }
        } else {
            groups.push((k, None));
        }
    }
    let mut edges = Vec::new();
    for c in 0..dim {
        for i in colptr[c]..colptr[c + 1] {
            let r = rowidx[i];
            if r != c && group_of[r] != group_of[c] {
                edges.push((group_of[r], group_of[c]));
            }
        }
    }
    let group_order = min_degree(groups.len(), edges.into_iter());

    let mut perm = Vec::with_capacity(dim);
    for g in group_order {
        let (first, second) = groups[g];
        perm.push(first);
        if let Some(s) = second {
            perm.push(s);
        }
    }
    let mut iperm = vec![0usize; dim];
    for (new, &old) in perm.iter().enumerate() {
        iperm[old] = new;
    }
    PivotOrder { perm, iperm }
}

pub fn factorize(
    dim: usize,
    colptr: &[usize],
    rowidx: &[usize],
    values: &[f64],
    order: &PivotOrder,
    pivot_threshold: f64,
) -> Result<LdltFactor, SparseError> {
    let mut order = order.clone();
    let mut deferred: Vec<usize> = Vec::new();
    for pass in 0..MAX_DEFERRAL_PASSES {
        match numeric_pass(dim, colptr, rowidx, values, &order, pivot_threshold) {
            Ok(factor) => return Ok(factor),
            Err(suspects) => {
                if std::env::var_os("GRIDOPT_LDLT_DEBUG").is_some() {
                    eprintln!(
                        "ldlt: pass {pass} deferring {} columns: {:?}",
                        suspects.len(),
                        &suspects[..suspects.len().min(8)]
                    );
                }
                // push every column without an acceptable pivot behind the
                // rest of the order and retry; their Schur pivots gain the
                // eliminated mass of everything they couple to
                let mut progressed = false;
                for c in suspects {
                    if !deferred.contains(&c) {
                        deferred.push(c);
                        progressed = true;
                    }
                }
                if !progressed {
                    // the stuck set is stable; more passes cannot help
                    return Err(SparseError::BreakdownPivot(deferred.pop().unwrap_or(0)));
                }
                order.perm.retain(|c| !deferred.contains(c));
                order.perm.extend(deferred.iter().copied());
                for (new, &old) in order.perm.iter().enumerate() {
                    order.iperm[old] = new;
                }
            }
        }
    }
    Err(SparseError::BreakdownPivot(deferred.pop().unwrap_or(0)))
}

fn numeric_pass(
    dim: usize,
    colptr: &[usize],
    rowidx: &[usize],
    values: &[f64],
    order: &PivotOrder,
    pivot_threshold: f64,
) -> Result<LdltFactor, Vec<usize>> {
    // permuted lower-triangle columns of the input
    let iperm = &order.iperm;
    let mut acol: Vec<Vec<(usize, f64)>> = vec![Vec::new(); dim];
    for c in 0..dim {
        for i in colptr[c]..colptr[c + 1] {
            let r = rowidx[i];
            let (pr, pc) = (iperm[r], iperm[c]);
            let (hi, lo) = if pr >= pc { (pr, pc) } else { (pc, pr) };
            acol[lo].push((hi, values[i]));
        }
    }
    for col in &mut acol {
        col.sort_unstable_by_key(|&(r, _)| r);
    }

    let mut f = Workspace::new(dim, &order.perm, pivot_threshold);
    f.acol = acol;
    f.run()
}

struct Workspace<'a> {
    dim: usize,
    perm: &'a [usize],
    threshold: f64,
    acol: Vec<Vec<(usize, f64)>>,
    /// bucket[i] = factor columns whose next untouched row is i
    bucket: Vec<Vec<usize>>,
    /// cursor[j] = index into col_rows[j] of the next untouched row
    cursor: Vec<usize>,
    col_rows: Vec<Vec<usize>>,
    col_vals: Vec<Vec<f64>>,
    diag: Vec<f64>,
    off: Vec<f64>,
    kind: Vec<PivotKind>,
    /// Off-diagonal magnitude of each Schur column at elimination time.
    lambda: Vec<f64>,
    w: Vec<f64>,
    w2: Vec<f64>,
    mark: Vec<usize>,
    mark2: Vec<usize>,
    stamp: usize,
}

impl<'a> Workspace<'a> {
    fn new(dim: usize, perm: &'a [usize], threshold: f64) -> Self {
        Workspace {
            dim,
            perm,
            threshold,
            acol: Vec::new(),
            bucket: vec![Vec::new(); dim],
            cursor: vec![0; dim],
            col_rows: (0..dim).map(|_| Vec::new()).collect(),
            col_vals: (0..dim).map(|_| Vec::new()).collect(),
            diag: vec![0.0; dim],
            off: vec![0.0; dim],
            kind: vec![PivotKind::Single; dim],
            lambda: vec![0.0; dim],
            w: vec![0.0; dim],
            w2: vec![0.0; dim],
            mark: vec![usize::MAX; dim],
            mark2: vec![usize::MAX; dim],
            stamp: 0,
        }
    }

    /// On failure returns the original indices of every column where no
    /// acceptable pivot exists. Those columns are eliminated anyway (with
    /// harmless placeholder directions) so one pass scouts them all.
    fn run(mut self) -> Result<LdltFactor, Vec<usize>> {
        let dim = self.dim;
        let mut suspects: Vec<usize> = Vec::new();
        let mut k = 0;
        while k < dim {
            let pattern = self.load_column(k);
            let d = self.w[k];
            let lambda = pattern
                .iter()
                .filter(|&&i| i > k)
                .fold(0.0f64, |m, &i| m.max(self.w[i].abs()));

            self.lambda[k] = lambda;
            if lambda == 0.0 || d.abs() >= self.threshold * lambda {
                self.commit_single(k, &pattern);
                k += 1;
                continue;
            }
            let mut paired = false;
            if k + 1 < dim {
                let w_stamp = self.stamp;
                let pattern2 = self.load_column_pair(k + 1);
                let e11 = d;
                let e12 = if self.mark[k + 1] == w_stamp { self.w[k + 1] } else { 0.0 };
                let e22 = self.w2[k + 1];
                let det = e11 * e22 - e12 * e12;
                let lambda_pair = pattern
                    .iter()
                    .filter(|&&i| i > k + 1)
                    .fold(0.0f64, |m, &i| m.max(self.w[i].abs()))
                    .max(
                        pattern2
                            .iter()
                            .filter(|&&i| i > k + 1)
                            .fold(0.0f64, |m, &i| m.max(self.w2[i].abs())),
                    );
                let einv_norm = if det == 0.0 {
                    f64::INFINITY
                } else {
                    (e11.abs().max(e22.abs()) + e12.abs()) / det.abs()
                };
                let acceptable = det != 0.0
                    && (lambda_pair == 0.0 || einv_norm * lambda_pair <= 1.0 / self.threshold);
                if acceptable {
                    self.consume_bucket(k + 1);
                    self.commit_pair(k, &pattern, &pattern2, e11, e12, e22, det);
                    k += 2;
                    paired = true;
                }
            }
            if !paired {
                suspects.push(self.perm[k]);
                self.commit_single_guarded(k, &pattern);
                k += 1;
            }
        }

        if !suspects.is_empty() {
            return Err(suspects);
        }
        // input-column scales in permuted space (lower columns mirrored)
        let mut colscale = vec![0.0f64; dim];
        for (lo, col) in self.acol.iter().enumerate() {
            for &(hi, v) in col {
                colscale[lo] = colscale[lo].max(v.abs());
                colscale[hi] = colscale[hi].max(v.abs());
            }
        }
        let inertia = compute_inertia(&self.diag, &self.off, &self.kind, &self.lambda, &colscale);
        Ok(LdltFactor {
            dim,
            perm: self.perm.to_vec(),
            col_rows: self.col_rows,
            col_vals: self.col_vals,
            diag: self.diag,
            off: self.off,
            kind: self.kind,
            inertia,
        })
    }

    /// Commits a column whose pivot failed the threshold tests; the scout
    /// pass only needs finite downstream values, so a vanishing pivot gets
    /// an empty direction.
    fn commit_single_guarded(&mut self, k: usize, pattern: &[usize]) {
        if self.w[k].abs() < 1e-300 {
            self.w[k] = 0.0;
            let tail: Vec<usize> = pattern.iter().copied().filter(|&i| i > k).collect();
            for &i in &tail {
                self.w[i] = 0.0;
            }
        }
        self.commit_single(k, pattern);
    }

    /// Scatters column k of the permuted input and applies all pending
    /// left-looking updates. Returns the touched rows (unsorted), all >= k.
    fn load_column(&mut self, k: usize) -> Vec<usize> {
        self.stamp += 1;
        let stamp = self.stamp;
        let mut pattern = Vec::new();
        for &(r, v) in &self.acol[k] {
            if self.mark[r] != stamp {
                self.mark[r] = stamp;
                self.w[r] = 0.0;
                pattern.push(r);
            }
            self.w[r] += v;
        }
        if self.mark[k] != stamp {
            self.mark[k] = stamp;
            self.w[k] = 0.0;
            pattern.push(k);
        }

        let surfaced = std::mem::take(&mut self.bucket[k]);
        for &j in &surfaced {
            self.apply_update(j, k, stamp, &mut pattern, false);
            self.advance(j, k);
        }
        pattern
    }

    /// Speculative peek at column k+1 for a 2x2 pivot attempt. Buckets and
    /// cursors stay untouched so a rejected pair leaves the column ready
    /// for its own elimination step; `consume_bucket` finalizes on accept.
    fn load_column_pair(&mut self, k1: usize) -> Vec<usize> {
        self.stamp += 1;
        let stamp = self.stamp;
        let mut pattern = Vec::new();
        {
            let (w2, mark2) = (&mut self.w2, &mut self.mark2);
            for &(r, v) in &self.acol[k1] {
                if mark2[r] != stamp {
                    mark2[r] = stamp;
                    w2[r] = 0.0;
                    pattern.push(r);
                }
                w2[r] += v;
            }
            if mark2[k1] != stamp {
                mark2[k1] = stamp;
                w2[k1] = 0.0;
                pattern.push(k1);
            }
        }
        let surfaced = self.bucket[k1].clone();
        for &j in &surfaced {
            self.apply_update(j, k1, stamp, &mut pattern, true);
        }
        pattern
    }

    fn consume_bucket(&mut self, k1: usize) {
        let surfaced = std::mem::take(&mut self.bucket[k1]);
        for j in surfaced {
            self.advance(j, k1);
        }
    }

    /// Applies the rank-1 (or rank-2 for a pair) update of factor column j
    /// to the working column at step k. `second` selects the w2 workspace.
    fn apply_update(&mut self, j: usize, k: usize, stamp: usize, pattern: &mut Vec<usize>, second: bool) {
        let ptr = self.cursor[j];
        debug_assert_eq!(self.col_rows[j][ptr], k);
        let (coef1, pair) = match self.kind[j] {
            PivotKind::Single => (self.diag[j] * self.col_vals[j][ptr], None),
            PivotKind::PairFirst => {
                let ljk = self.col_vals[j][ptr];
                let mjk = self.col_vals[j + 1][ptr];
                let w1 = self.diag[j] * ljk + self.off[j] * mjk;
                let w2 = self.off[j] * ljk + self.diag[j + 1] * mjk;
                (w1, Some(w2))
            }
            PivotKind::PairSecond => unreachable!("pair-second columns are never bucketed"),
        };
        let rows = &self.col_rows[j][ptr..];
        let vals = &self.col_vals[j][ptr..];
        let (w, mark) = if second {
            (&mut self.w2, &mut self.mark2)
        } else {
            (&mut self.w, &mut self.mark)
        };
        match pair {
            None => {
                for (&r, &l) in rows.iter().zip(vals) {
                    if mark[r] != stamp {
                        mark[r] = stamp;
                        w[r] = 0.0;
                        pattern.push(r);
                    }
                    w[r] -= l * coef1;
                }
            }
            Some(coef2) => {
                let vals2 = &self.col_vals[j + 1][ptr..];
                for ((&r, &l1), &l2) in rows.iter().zip(vals).zip(vals2) {
                    if mark[r] != stamp {
                        mark[r] = stamp;
                        w[r] = 0.0;
                        pattern.push(r);
                    }
                    w[r] -= l1 * coef1 + l2 * coef2;
                }
            }
        }
    }

    /// Moves column j's cursor past row k and re-buckets it.
    fn advance(&mut self, j: usize, k: usize) {
        let mut ptr = self.cursor[j];
        while ptr < self.col_rows[j].len() && self.col_rows[j][ptr] <= k {
            ptr += 1;
        }
        self.cursor[j] = ptr;
        if ptr < self.col_rows[j].len() {
            let next = self.col_rows[j][ptr];
            self.bucket[next].push(j);
        }
    }

    fn commit_single(&mut self, k: usize, pattern: &[usize]) {
        let d = self.w[k];
        self.diag[k] = d;
        self.kind[k] = PivotKind::Single;
        let mut rows: Vec<usize> = pattern.iter().copied().filter(|&i| i > k).collect();
        rows.sort_unstable();
        let vals: Vec<f64> = rows
            .iter()
            .map(|&i| if d != 0.0 { self.w[i] / d } else { 0.0 })
            .collect();
        self.col_rows[k] = rows;
        self.col_vals[k] = vals;
        self.cursor[k] = 0;
        if let Some(&first) = self.col_rows[k].first() {
            self.bucket[first].push(k);
        }
    }

    #[allow(clippy::too_many_arguments)]
    fn commit_pair(
        &mut self,
        k: usize,
        pattern: &[usize],
        pattern2: &[usize],
        e11: f64,
        e12: f64,
        e22: f64,
        det: f64,
    ) {
        self.diag[k] = e11;
        self.off[k] = e12;
        self.diag[k + 1] = e22;
        self.kind[k] = PivotKind::PairFirst;
        self.kind[k + 1] = PivotKind::PairSecond;

        let stamp = self.stamp; // w2 stamp from load_column_pair
        let w_stamp = stamp - 1;
        let mut rows: Vec<usize> = pattern
            .iter()
            .chain(pattern2.iter())
            .copied()
            .filter(|&i| i > k + 1)
            .collect();
        rows.sort_unstable();
        rows.dedup();

        let mut vals1 = Vec::with_capacity(rows.len());
        let mut vals2 = Vec::with_capacity(rows.len());
        for &i in &rows {
            let a = if self.mark[i] == w_stamp { self.w[i] } else { 0.0 };
            let b = if self.mark2[i] == stamp { self.w2[i] } else { 0.0 };
            // [l1, l2] = [a, b] * E^{-1}
            vals1.push((a * e22 - b * e12) / det);
            vals2.push((b * e11 - a * e12) / det);
        }
        self.col_rows[k] = rows.clone();
        self.col_vals[k] = vals1;
        self.col_rows[k + 1] = rows;
        self.col_vals[k + 1] = vals2;
        self.cursor[k] = 0;
        self.cursor[k + 1] = 0;
        if let Some(&first) = self.col_rows[k].first() {
            // the pair is driven from its first column only
            self.bucket[first].push(k);
        }
    }
}

/// Inertia of the block diagonal. A 1x1 pivot that passed the threshold
/// test against nonzero off-diagonal mass is genuinely nonzero no matter
/// how small; only a pivot whose whole Schur column vanished (relative to
/// its input column scale) counts as zero. Accepted 2x2 blocks are
/// nonsingular by construction and classify by determinant and trace.
fn compute_inertia(
    diag: &[f64],
    off: &[f64],
    kind: &[PivotKind],
    lambda: &[f64],
    colscale: &[f64],
) -> Inertia {
    let mut inertia = Inertia { pos: 0, neg: 0, zero: 0 };
    let mut k = 0;
    while k < diag.len() {
        match kind[k] {
            PivotKind::Single => {
                let d = diag[k];
                if lambda[k] == 0.0 && d.abs() <= ZERO_PIVOT_REL * colscale[k] {
                    inertia.zero += 1;
                } else if d > 0.0 {
                    inertia.pos += 1;
                } else if d < 0.0 {
                    inertia.neg += 1;
                } else {
                    inertia.zero += 1;
                }
                k += 1;
            }
            PivotKind::PairFirst => {
                let det = diag[k] * diag[k + 1] - off[k] * off[k];
                if det < 0.0 {
                    inertia.pos += 1;
                    inertia.neg += 1;
                } else if diag[k] + diag[k + 1] > 0.0 {
                    inertia.pos += 2;
                } else {
                    inertia.neg += 2;
                }
                k += 2;
            }
            PivotKind::PairSecond => unreachable!(),
        }
    }
    inertia
}

impl LdltFactor {
    /// Solves `M x = b` through the factor (no refinement).
    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.dim;
        let mut y = vec![0.0; n];
        for k in 0..n {
            y[k] = b[self.perm[k]];
        }
        // forward: L z = Pb
        for k in 0..n {
            let zk = y[k];
            if zk != 0.0 {
                for (&i, &l) in self.col_rows[k].iter().zip(&self.col_vals[k]) {
                    y[i] -= l * zk;
                }
            }
        }
        // block-diagonal solve
        let mut k = 0;
        while k < n {
            match self.kind[k] {
                PivotKind::Single => {
                    y[k] = if self.diag[k] != 0.0 { y[k] / self.diag[k] } else { 0.0 };
                    k += 1;
                }
                PivotKind::PairFirst => {
                    let (a, b2, c) = (self.diag[k], self.off[k], self.diag[k + 1]);
                    let det = a * c - b2 * b2;
                    let (r1, r2) = (y[k], y[k + 1]);
                    y[k] = (c * r1 - b2 * r2) / det;
                    y[k + 1] = (a * r2 - b2 * r1) / det;
                    k += 2;
                }
                PivotKind::PairSecond => unreachable!(),
            }
        }
        // backward: L^T x = z
        for k in (0..n).rev() {
            let mut acc = y[k];
            for (&i, &l) in self.col_rows[k].iter().zip(&self.col_vals[k]) {
                acc -= l * y[i];
            }
            y[k] = acc;
        }
        let mut x = vec![0.0; n];
        for k in 0..n {
            x[self.perm[k]] = y[k];
        }
        x
    }

    pub fn nnz(&self) -> usize {
        self.dim + self.col_rows.iter().map(Vec::len).sum::<usize>()
    }

    pub fn bytes(&self) -> usize {
        let entries: usize = self.col_rows.iter().map(Vec::len).sum();
        entries * (std::mem::size_of::<usize>() + std::mem::size_of::<f64>())
            + self.dim * (3 * std::mem::size_of::<f64>() + 2 * std::mem::size_of::<usize>())
    }
}

#[cfg(test)]
mod tests {
    use super::super::SparseSym;
    use super::*;

    fn factor(dim: usize, entries: &[(usize, usize, f64)]) -> (SparseSym, Inertia) {
        let mut m = SparseSym::from_lower_triplets(dim, entries.iter().copied());
        let inertia = m.factorize().unwrap();
        (m, inertia)
    }

    #[test]
    fn diagonal_signs() {
        let (_, inertia) = factor(3, &[(0, 0, 2.0), (1, 1, -3.0), (2, 2, 4.0)]);
        assert_eq!(inertia, Inertia { pos: 2, neg: 1, zero: 0 });
    }

    #[test]
    fn antidiagonal_needs_2x2() {
        // [[0, 1], [1, 0]]: eigenvalues +-1
        let (_, inertia) = factor(2, &[(1, 0, 1.0)]);
        assert_eq!(inertia, Inertia { pos: 1, neg: 1, zero: 0 });
    }

    #[test]
    fn identity_factor_nnz() {
        let mut m = SparseSym::from_lower_triplets(5, (0..5).map(|i| (i, i, 1.0)));
        assert_eq!(m.analyze().factor_nnz, 5);
        m.factorize().unwrap();
        assert_eq!(m.factor_nnz(), Some(5));
    }

    #[test]
    fn dense_3x3_factor_nnz() {
        let entries = [
            (0usize, 0usize, 4.0),
            (1, 0, 1.0),
            (2, 0, 0.5),
            (1, 1, 3.0),
            (2, 1, 0.25),
            (2, 2, 5.0),
        ];
        let mut m = SparseSym::from_lower_triplets(3, entries.iter().copied());
        assert_eq!(m.analyze().factor_nnz, 6);
    }

    #[test]
    fn arrow_matrix_fill_free() {
        let n = 6;
        let mut entries: Vec<(usize, usize, f64)> = (0..n).map(|i| (i, i, 10.0 + i as f64)).collect();
        entries.extend((0..n - 1).map(|i| (n - 1, i, 1.0)));
        let mut m = SparseSym::from_lower_triplets(n, entries.iter().copied());
        assert_eq!(m.analyze().factor_nnz, 2 * n - 1);
        m.factorize().unwrap();
        assert_eq!(m.factor_nnz(), Some(2 * n - 1));
    }

    #[test]
    fn solve_identity() {
        let (m, _) = factor(3, &[(0, 0, 1.0), (1, 1, 1.0), (2, 2, 1.0)]);
        let x = m.solve(&[1.0, 0.0, 0.0]).unwrap();
        assert_eq!(x, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn solve_zero_rhs() {
        let (m, _) = factor(2, &[(0, 0, 3.0), (1, 0, 1.0), (1, 1, -2.0)]);
        assert_eq!(m.solve(&[0.0, 0.0]).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn saddle_inertia() {
        // [[H, A^T], [A, 0]] with H = diag(1, 2, 3), A = [[1, 1, 0], [0, 1, 1]]
        let entries = [
            (0usize, 0usize, 1.0),
            (1, 1, 2.0),
            (2, 2, 3.0),
            (3, 0, 1.0),
            (3, 1, 1.0),
            (4, 1, 1.0),
            (4, 2, 1.0),
        ];
        let (_, inertia) = factor(5, &entries);
        assert_eq!(inertia, Inertia { pos: 3, neg: 2, zero: 0 });
    }

    #[test]
    fn singular_rank_deficient_counts_zero() {
        // duplicated constraint row: [[1, 0, 1, 1], [0, 1, 1, 1], [1, 1, 0, 0], [1, 1, 0, 0]]
        let entries = [
            (0usize, 0usize, 1.0),
            (1, 1, 1.0),
            (2, 0, 1.0),
            (2, 1, 1.0),
            (3, 0, 1.0),
            (3, 1, 1.0),
        ];
        let mut m = SparseSym::from_lower_triplets(4, entries.iter().copied());
        let inertia = m.factorize().unwrap();
        assert_eq!(inertia.zero, 1);
        assert_eq!(inertia.pos + inertia.neg + inertia.zero, 4);
    }

    #[test]
    fn not_factorized_error() {
        let m = SparseSym::from_lower_triplets(2, [(0, 0, 1.0), (1, 1, 1.0)]);
        assert!(matches!(m.solve(&[1.0, 1.0]), Err(SparseError::NotFactorized)));
    }
}
