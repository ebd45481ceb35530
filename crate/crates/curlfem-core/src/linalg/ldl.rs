//! Multifrontal LDLᵀ factorization for sparse symmetric matrices.
//!
//! Works for real symmetric and complex *symmetric* (not Hermitian) systems:
//! no conjugation is applied anywhere. Pivoting is static (diagonal, in the
//! caller's fill-reducing order) with magnitude perturbation of near-zero
//! pivots; callers run iterative refinement and check the residual.
//!
//! The symbolic analysis (elimination tree, postorder, supernode detection,
//! relaxed amalgamation, row structures) is reusable across matrices with
//! the same sparsity pattern.

use num_complex::{Complex32, Complex64};

/// Field the factorization runs over. Deliberately has no conjugation: the
/// transpose in LDLᵀ is plain, which is what complex-symmetric systems need.
/// The single-precision impls back the memory-saving factorization mode;
/// iterative refinement in the caller restores double-precision residuals.
pub trait Scalar: Copy + std::fmt::Debug + Send + Sync + 'static {
    fn zero() -> Self;
    fn one() -> Self;
    fn add(self, o: Self) -> Self;
    fn sub(self, o: Self) -> Self;
    fn mul(self, o: Self) -> Self;
    fn div(self, o: Self) -> Self;
    fn modulus(self) -> f64;
    fn scale(self, f: f64) -> Self;
}

impl Scalar for f64 {
    #[inline(always)]
    fn zero() -> Self {
        0.0
    }
    #[inline(always)]
    fn one() -> Self {
        1.0
    }
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline(always)]
    fn mul(self, o: Self) -> Self {
        self * o
    }
    #[inline(always)]
    fn div(self, o: Self) -> Self {
        self / o
    }
    #[inline(always)]
    fn modulus(self) -> f64 {
        self.abs()
    }
    #[inline(always)]
    fn scale(self, f: f64) -> Self {
        self * f
    }
}

impl Scalar for f32 {
    #[inline(always)]
    fn zero() -> Self {
        0.0
    }
    #[inline(always)]
    fn one() -> Self {
        1.0
    }
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline(always)]
    fn mul(self, o: Self) -> Self {
        self * o
    }
    #[inline(always)]
    fn div(self, o: Self) -> Self {
        self / o
    }
    #[inline(always)]
    fn modulus(self) -> f64 {
        self.abs() as f64
    }
    #[inline(always)]
    fn scale(self, f: f64) -> Self {
        self * f as f32
    }
}

impl Scalar for Complex64 {
    #[inline(always)]
    fn zero() -> Self {
        Complex64::new(0.0, 0.0)
    }
    #[inline(always)]
    fn one() -> Self {
        Complex64::new(1.0, 0.0)
    }
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline(always)]
    fn mul(self, o: Self) -> Self {
        self * o
    }
    #[inline(always)]
    fn div(self, o: Self) -> Self {
        self / o
    }
    #[inline(always)]
    fn modulus(self) -> f64 {
        self.norm()
    }
    #[inline(always)]
    fn scale(self, f: f64) -> Self {
        self * f
    }
}

impl Scalar for Complex32 {
    #[inline(always)]
    fn zero() -> Self {
        Complex32::new(0.0, 0.0)
    }
    #[inline(always)]
    fn one() -> Self {
        Complex32::new(1.0, 0.0)
    }
    #[inline(always)]
    fn add(self, o: Self) -> Self {
        self + o
    }
    #[inline(always)]
    fn sub(self, o: Self) -> Self {
        self - o
    }
    #[inline(always)]
    fn mul(self, o: Self) -> Self {
        self * o
    }
    #[inline(always)]
    fn div(self, o: Self) -> Self {
        self / o
    }
    #[inline(always)]
    fn modulus(self) -> f64 {
        self.norm() as f64
    }
    #[inline(always)]
    fn scale(self, f: f64) -> Self {
        self * f as f32
    }
}

/// Upper-triangular pattern of a sparse symmetric matrix in CSC form.
/// Diagonal entries must be present.
#[derive(Clone)]
pub struct UpperPattern {
    pub n: usize,
    pub colptr: Vec<usize>,
    pub rowind: Vec<usize>,
}

#[derive(Clone, Copy, Debug)]
pub struct LdlOptions {
    /// Merge adjacent supernodes outright when the combined width is at most
    /// this value.
    pub small_merge_width: usize,
    /// Otherwise merge when the estimated extra fill stays below this
    /// fraction of the merged front size.
    pub relax_fill_ratio: f64,
    /// Pivots with modulus below `pivot_floor * max_diag_modulus` are pushed
    /// to that magnitude, keeping their phase.
    pub pivot_floor: f64,
}

impl Default for LdlOptions {
    fn default() -> Self {
        LdlOptions {
            small_merge_width: 12,
            relax_fill_ratio: 0.12,
            pivot_floor: 1e-13,
        }
    }
}

/// Pattern-level data shared by all factorizations with the same structure.
pub struct LdlSymbolic {
    n: usize,
    /// Fill-reducing permutation composed with the etree postorder;
    /// maps factor index -> original index.
    perm: Vec<usize>,
    /// Supernode boundaries in factor indices, with a sentinel at the end.
    first: Vec<usize>,
    /// Concatenated front row structures (factor indices, ascending; the
    /// first `width` entries are the panel columns themselves).
    rows: Vec<usize>,
    rows_ptr: Vec<usize>,
    /// Children of each supernode in the assembly tree.
    children: Vec<Vec<usize>>,
    /// Column pointers of L (strictly lower part, per factor column).
    lp: Vec<usize>,
    /// Row indices of L, filled at analysis time.
    li: Vec<usize>,
    /// Lower-triangular CSC (diagonal included) of the permuted pattern.
    alow_colptr: Vec<usize>,
    alow_rowind: Vec<usize>,
    /// For each entry of the caller's upper CSC (in input order), the slot
    /// in the lower CSC it lands in.
    scatter: Vec<usize>,
    /// Estimated multiply-add count of one numeric factorization.
    pub flops: f64,
}

pub struct LdlFactorization<T> {
    n: usize,
    perm: Vec<usize>,
    lp: Vec<usize>,
    li: Vec<usize>,
    lx: Vec<T>,
    d: Vec<T>,
    /// Number of pivots that needed magnitude perturbation.
    pub perturbed_pivots: usize,
}

/// Elimination tree of an upper-triangular pattern (Liu's algorithm with
/// path compression).
fn etree(n: usize, colptr: &[usize], rowind: &[usize]) -> Vec<usize> {
    let mut parent = vec![usize::MAX; n];
    let mut ancestor = vec![usize::MAX; n];
    for j in 0..n {
        for e in colptr[j]..colptr[j + 1] {
            let mut i = rowind[e];
            while i < j {
                let next = ancestor[i];
                ancestor[i] = j;
                if next == usize::MAX {
                    parent[i] = j;
                    break;
                }
                i = next;
            }
        }
    }
    parent
}

/// Postorder of a forest. Subtrees come out as contiguous index ranges with
/// the parent last, which the supernode detection relies on.
fn postorder(parent: &[usize]) -> Vec<usize> {
    let n = parent.len();
    let mut head = vec![usize::MAX; n];
    let mut next = vec![usize::MAX; n];
    for j in (0..n).rev() {
        let p = parent[j];
        if p != usize::MAX {
            next[j] = head[p];
            head[p] = j;
        }
    }
    // reverse preorder, then flip: avoids a visited-marker pass
    let mut post = Vec::with_capacity(n);
    let mut stack = Vec::new();
    for root in 0..n {
        if parent[root] != usize::MAX {
            continue;
        }
        stack.push(root);
        while let Some(v) = stack.pop() {
            post.push(v);
            let mut c = head[v];
            while c != usize::MAX {
                stack.push(c);
                c = next[c];
            }
        }
    }
    post.reverse();
    debug_assert_eq!(post.len(), n);
    post
}

/// Column counts of L (including the diagonal) via flagged etree walks.
fn column_counts(n: usize, colptr: &[usize], rowind: &[usize], parent: &[usize]) -> Vec<usize> {
    let mut cc = vec![1usize; n];
    let mut flag = vec![usize::MAX; n];
    for k in 0..n {
        flag[k] = k;
        for e in colptr[k]..colptr[k + 1] {
            let mut i = rowind[e];
            while i < k && flag[i] != k {
                cc[i] += 1;
                flag[i] = k;
                i = parent[i];
            }
        }
    }
    cc
}

/// Greedy left-to-right merge of adjacent supernodes connected in the
/// elimination tree, bounded by an extra-fill estimate. Any contiguous
/// blocking stays numerically exact; merging only trades explicit zeros for
/// denser fronts.
fn amalgamate(first: &[usize], parent: &[usize], cc: &[usize], opt: &LdlOptions) -> Vec<usize> {
    let ns = first.len() - 1;
    let mut out = Vec::with_capacity(ns + 1);
    out.push(first[0]);
    let mut g0 = first[0];
    let mut below_cur = (cc[g0] - (first[1] - g0)) as f64;
    for s in 0..ns {
        let g1 = first[s + 1];
        if s + 1 == ns {
            out.push(g1);
            break;
        }
        let g2 = first[s + 2];
        let wc = (g1 - g0) as f64;
        let wp = (g2 - g1) as f64;
        let below_next = (cc[g1] - (g2 - g1)) as f64;
        let chained = {
            let p = parent[g1 - 1];
            p != usize::MAX && p >= g1 && p < g2
        };
        let below_merged = below_next.max(below_cur - wp);
        let old_cost = wc * (wc / 2.0 + below_cur) + wp * (wp / 2.0 + below_next);
        let new_cost = (wc + wp) * ((wc + wp) / 2.0 + below_merged);
        let small = g2 - g0 <= opt.small_merge_width;
        if chained && (small || new_cost - old_cost <= opt.relax_fill_ratio * new_cost) {
            below_cur = below_merged;
        } else {
            out.push(g1);
            g0 = g1;
            below_cur = below_next;
        }
    }
    out
}

/// Permute an upper pattern by `perm` (new -> old). Returns the permuted
/// upper CSC (rows sorted) plus, when requested, the lower CSC of the same
/// matrix and the map from input entry order to lower-CSC slots.
struct PermutedPattern {
    up_ptr: Vec<usize>,
    up_rows: Vec<usize>,
    lo_ptr: Vec<usize>,
    lo_rows: Vec<usize>,
    scatter: Vec<usize>,
}

fn permute_upper(pattern: &UpperPattern, iperm: &[usize], with_lower: bool) -> PermutedPattern {
    let n = pattern.n;
    let nnz = pattern.colptr[n];
    let mut cnt_up = vec![0usize; n];
    let mut cnt_lo = vec![0usize; n];
    for oldc in 0..n {
        for e in pattern.colptr[oldc]..pattern.colptr[oldc + 1] {
            let oldr = pattern.rowind[e];
            let a = iperm[oldr];
            let b = iperm[oldc];
            let (mn, mx) = if a <= b { (a, b) } else { (b, a) };
            cnt_up[mx] += 1;
            if with_lower {
                cnt_lo[mn] += 1;
            }
        }
    }
    let mut up_ptr = vec![0usize; n + 1];
    let mut lo_ptr = vec![0usize; n + 1];
    for j in 0..n {
        up_ptr[j + 1] = up_ptr[j] + cnt_up[j];
        lo_ptr[j + 1] = lo_ptr[j] + cnt_lo[j];
    }
    let mut up_rows = vec![0usize; nnz];
    let mut up_w = up_ptr.clone();
    let mut lo_rows = vec![0usize; if with_lower { nnz } else { 0 }];
    let mut lo_w = lo_ptr.clone();
    let mut lo_slot_of_input = vec![0usize; if with_lower { nnz } else { 0 }];
    let mut input_idx = 0usize;
    for oldc in 0..n {
        for e in pattern.colptr[oldc]..pattern.colptr[oldc + 1] {
            let oldr = pattern.rowind[e];
            let a = iperm[oldr];
            let b = iperm[oldc];
            let (mn, mx) = if a <= b { (a, b) } else { (b, a) };
            up_rows[up_w[mx]] = mn;
            up_w[mx] += 1;
            if with_lower {
                lo_rows[lo_w[mn]] = mx;
                lo_slot_of_input[input_idx] = lo_w[mn];
                lo_w[mn] += 1;
            }
            input_idx += 1;
        }
    }
    for j in 0..n {
        up_rows[up_ptr[j]..up_ptr[j + 1]].sort_unstable();
    }
    let mut scatter = Vec::new();
    if with_lower {
        // sort lower columns while tracking where each slot moved
        let mut slot_map = vec![0usize; nnz];
        let mut order: Vec<usize> = Vec::new();
        for j in 0..n {
            let base = lo_ptr[j];
            let end = lo_ptr[j + 1];
            order.clear();
            order.extend(base..end);
            order.sort_by_key(|&e| lo_rows[e]);
            let snapshot: Vec<usize> = order.iter().map(|&e| lo_rows[e]).collect();
            for (k, v) in snapshot.into_iter().enumerate() {
                lo_rows[base + k] = v;
            }
            for (k, &e) in order.iter().enumerate() {
                slot_map[e] = base + k;
            }
        }
        scatter = lo_slot_of_input.iter().map(|&e| slot_map[e]).collect();
    }
    PermutedPattern {
        up_ptr,
        up_rows,
        lo_ptr,
        lo_rows,
        scatter,
    }
}

impl LdlSymbolic {
    /// Analyze the pattern under the caller's fill-reducing permutation
    /// (`perm[new] = old`); an elimination-tree postorder is composed in.
    pub fn analyze(pattern: &UpperPattern, perm: &[usize], opt: &LdlOptions) -> LdlSymbolic {
        let n = pattern.n;
        assert_eq!(perm.len(), n);
        let mut iperm = vec![0usize; n];
        for (newi, &old) in perm.iter().enumerate() {
            iperm[old] = newi;
        }

        // pass 1: etree under the caller's ordering, then postorder
        let p1 = permute_upper(pattern, &iperm, false);
        let parent1 = etree(n, &p1.up_ptr, &p1.up_rows);
        let post = postorder(&parent1);
        let perm2: Vec<usize> = post.iter().map(|&j| perm[j]).collect();
        let mut iperm2 = vec![0usize; n];
        for (newi, &old) in perm2.iter().enumerate() {
            iperm2[old] = newi;
        }

        // pass 2: final pattern, lower structure, numeric scatter map
        let p2 = permute_upper(pattern, &iperm2, true);
        let parent = etree(n, &p2.up_ptr, &p2.up_rows);
        let cc = column_counts(n, &p2.up_ptr, &p2.up_rows, &parent);

        // fundamental supernodes
        let mut first = vec![0usize];
        for j in 1..n {
            let fuse = parent[j - 1] == j && cc[j - 1] == cc[j] + 1;
            if !fuse {
                first.push(j);
            }
        }
        first.push(n);
        let first = amalgamate(&first, &parent, &cc, opt);
        let ns = first.len() - 1;
        let mut sn_of = vec![0usize; n];
        for s in 0..ns {
            for j in first[s]..first[s + 1] {
                sn_of[j] = s;
            }
        }

        // front row structures, bottom-up
        let mut rows: Vec<usize> = Vec::new();
        let mut rows_ptr = vec![0usize; ns + 1];
        let mut children: Vec<Vec<usize>> = vec![Vec::new(); ns];
        let mut mark = vec![usize::MAX; n];
        let mut scratch: Vec<usize> = Vec::new();
        for s in 0..ns {
            let (c0, c1) = (first[s], first[s + 1]);
            scratch.clear();
            for j in c0..c1 {
                mark[j] = s;
                scratch.push(j);
            }
            for j in c0..c1 {
                for e in p2.lo_ptr[j]..p2.lo_ptr[j + 1] {
                    let i = p2.lo_rows[e];
                    if mark[i] != s {
                        mark[i] = s;
                        scratch.push(i);
                    }
                }
            }
            for &ch in &children[s] {
                let ch_end = first[ch + 1];
                for t in rows_ptr[ch]..rows_ptr[ch + 1] {
                    let i = rows[t];
                    if i >= ch_end && mark[i] != s {
                        debug_assert!(i >= c0);
                        mark[i] = s;
                        scratch.push(i);
                    }
                }
            }
            scratch.sort_unstable();
            rows_ptr[s + 1] = rows_ptr[s] + scratch.len();
            rows.extend_from_slice(&scratch);
            if let Some(&fb) = scratch.iter().find(|&&i| i >= c1) {
                let p = sn_of[fb];
                debug_assert!(p > s);
                children[p].push(s);
            }
        }

        // layout of L
        let mut lp = vec![0usize; n + 1];
        for s in 0..ns {
            let (c0, c1) = (first[s], first[s + 1]);
            let r = rows_ptr[s + 1] - rows_ptr[s];
            for j in c0..c1 {
                let t = j - c0;
                lp[j + 1] = lp[j] + (r - t - 1);
            }
        }
        let mut li = vec![0usize; lp[n]];
        for s in 0..ns {
            let (c0, c1) = (first[s], first[s + 1]);
            let rs = &rows[rows_ptr[s]..rows_ptr[s + 1]];
            for j in c0..c1 {
                let t = j - c0;
                li[lp[j]..lp[j + 1]].copy_from_slice(&rs[t + 1..]);
            }
        }

        let mut flops = 0.0f64;
        for s in 0..ns {
            let w = (first[s + 1] - first[s]) as f64;
            let r = (rows_ptr[s + 1] - rows_ptr[s]) as f64;
            let c = r - w;
            flops += w * w * r / 2.0 + c * c * w / 2.0;
        }

        LdlSymbolic {
            n,
            perm: perm2,
            first,
            rows,
            rows_ptr,
            children,
            lp,
            li,
            alow_colptr: p2.lo_ptr,
            alow_rowind: p2.lo_rows,
            scatter: p2.scatter,
            flops,
        }
    }

    pub fn nnz_l(&self) -> usize {
        *self.lp.last().unwrap()
    }

    /// Numeric factorization. `upper_values` must be aligned with the
    /// pattern handed to `analyze` (same entry order). Duplicate entries sum.
    pub fn factorize<T: Scalar>(
        &self,
        upper_values: &[T],
        opt: &LdlOptions,
    ) -> LdlFactorization<T> {
        let n = self.n;
        let ns = self.first.len() - 1;
        assert_eq!(upper_values.len(), self.scatter.len());
        let mut ax = vec![T::zero(); self.alow_colptr[n]];
        for (e, &slot) in self.scatter.iter().enumerate() {
            ax[slot] = ax[slot].add(upper_values[e]);
        }
        let mut diag_scale = 0.0f64;
        for j in 0..n {
            let e = self.alow_colptr[j];
            debug_assert_eq!(self.alow_rowind[e], j);
            diag_scale = diag_scale.max(ax[e].modulus());
        }
        if diag_scale == 0.0 {
            diag_scale = 1.0;
        }
        let floor = opt.pivot_floor * diag_scale;

        let mut lx = vec![T::zero(); self.lp[n]];
        let mut d = vec![T::zero(); n];
        let mut perturbed = 0usize;
        let mut pos = vec![usize::MAX; n];
        let mut child_schur: Vec<Option<Vec<T>>> = (0..ns).map(|_| None).collect();
        let mut wblk: Vec<T> = Vec::new();
        let mut lt: Vec<T> = Vec::new();

        for s in 0..ns {
            let (c0, c1) = (self.first[s], self.first[s + 1]);
            let w = c1 - c0;
            let rs = &self.rows[self.rows_ptr[s]..self.rows_ptr[s + 1]];
            let r = rs.len();
            let c = r - w;
            for (k, &i) in rs.iter().enumerate() {
                pos[i] = k;
            }
            let mut panel = vec![T::zero(); r * w];
            let mut schur = vec![T::zero(); c * c];

            for j in c0..c1 {
                let t = j - c0;
                let col = &mut panel[t * r..(t + 1) * r];
                for e in self.alow_colptr[j]..self.alow_colptr[j + 1] {
                    let i = self.alow_rowind[e];
                    let p = pos[i];
                    col[p] = col[p].add(ax[e]);
                }
            }
            for &ch in &self.children[s] {
                let cw = self.first[ch + 1] - self.first[ch];
                let crs = &self.rows[self.rows_ptr[ch]..self.rows_ptr[ch + 1]];
                let below = &crs[cw..];
                let cb = below.len();
                let sc = child_schur[ch].take().expect("children precede parents");
                for cj in 0..cb {
                    let pj = pos[below[cj]];
                    let src = &sc[cj * cb..cj * cb + cb];
                    if pj < w {
                        let col = &mut panel[pj * r..(pj + 1) * r];
                        for ci in cj..cb {
                            let p = pos[below[ci]];
                            col[p] = col[p].add(src[ci]);
                        }
                    } else {
                        let q = pj - w;
                        let col = &mut schur[q * c..(q + 1) * c];
                        for ci in cj..cb {
                            let p = pos[below[ci]] - w;
                            col[p] = col[p].add(src[ci]);
                        }
                    }
                }
            }

            // dense panel factorization; column t is divided by its pivot
            // only after it has updated the rest of the panel
            for t in 0..w {
                let mut pivot = panel[t * r + t];
                if pivot.modulus() < floor {
                    pivot = if pivot.modulus() == 0.0 {
                        T::one().scale(floor)
                    } else {
                        pivot.scale(floor / pivot.modulus())
                    };
                    panel[t * r + t] = pivot;
                    perturbed += 1;
                }
                d[c0 + t] = pivot;
                for u in (t + 1)..w {
                    let coef = panel[t * r + u].div(pivot);
                    if coef.modulus() == 0.0 {
                        continue;
                    }
                    let (head, tail) = panel.split_at_mut(u * r);
                    let src = &head[t * r + u..t * r + r];
                    let dst = &mut tail[u..r];
                    for (dv, sv) in dst.iter_mut().zip(src) {
                        *dv = dv.sub(sv.mul(coef));
                    }
                }
                let inv = T::one().div(pivot);
                for v in &mut panel[t * r + t + 1..(t + 1) * r] {
                    *v = v.mul(inv);
                }
            }

            // schur -= L21 * D * L21^T, tiled so that a row block of the
            // scaled panel stays cache-resident across all target columns
            if c > 0 && w > 0 {
                const TC: usize = 32; // t-chunk (rank of each update sweep)
                const IB: usize = 256; // row tile
                wblk.clear();
                wblk.resize(c * TC, T::zero());
                lt.clear();
                lt.resize(c * TC, T::zero());
                let mut t0 = 0usize;
                while t0 < w {
                    let tc = TC.min(w - t0);
                    // W = L21(:, t-block) * D, column-major c x tc;
                    // Lt = L21(:, t-block)^T stored t-fastest for coef reads
                    for tt in 0..tc {
                        let dt = d[c0 + t0 + tt];
                        let src = &panel[(t0 + tt) * r + w..(t0 + tt) * r + r];
                        let dst = &mut wblk[tt * c..tt * c + c];
                        for (i, (dv, sv)) in dst.iter_mut().zip(src).enumerate() {
                            *dv = sv.mul(dt);
                            lt[i * TC + tt] = *sv;
                        }
                    }
                    let mut i0 = 0usize;
                    while i0 < c {
                        let ib = IB.min(c - i0);
                        // columns j <= last row of the tile need updates here
                        let jmax = i0 + ib;
                        for j in 0..jmax {
                            let ilo = i0.max(j);
                            let col = &mut schur[j * c + ilo..j * c + i0 + ib];
                            let coefs = &lt[j * TC..j * TC + tc];
                            for tt in 0..tc {
                                let coef = coefs[tt];
                                let ws = &wblk[tt * c + ilo..tt * c + i0 + ib];
                                for (cv, wv) in col.iter_mut().zip(ws) {
                                    *cv = cv.sub(wv.mul(coef));
                                }
                            }
                        }
                        i0 += ib;
                    }
                    t0 += tc;
                }
            }

            for t in 0..w {
                let j = c0 + t;
                lx[self.lp[j]..self.lp[j + 1]].copy_from_slice(&panel[t * r + t + 1..(t + 1) * r]);
            }
            for &i in rs {
                pos[i] = usize::MAX;
            }
            child_schur[s] = Some(schur);
        }

        LdlFactorization {
            n,
            perm: self.perm.clone(),
            lp: self.lp.clone(),
            li: self.li.clone(),
            lx,
            d,
            perturbed_pivots: perturbed,
        }
    }
}

impl<T: Scalar> LdlFactorization<T> {
    pub fn nnz_l(&self) -> usize {
        *self.lp.last().unwrap()
    }

    pub fn solve_in_place(&self, b: &mut [T]) {
        let n = self.n;
        assert_eq!(b.len(), n);
        let mut x = vec![T::zero(); n];
        for i in 0..n {
            x[i] = b[self.perm[i]];
        }
        for j in 0..n {
            let xj = x[j];
            if xj.modulus() != 0.0 {
                for e in self.lp[j]..self.lp[j + 1] {
                    x[self.li[e]] = x[self.li[e]].sub(self.lx[e].mul(xj));
                }
            }
        }
        for j in 0..n {
            x[j] = x[j].div(self.d[j]);
        }
        for j in (0..n).rev() {
            let mut s = x[j];
            for e in self.lp[j]..self.lp[j + 1] {
                s = s.sub(self.lx[e].mul(x[self.li[e]]));
            }
            x[j] = s;
        }
        for i in 0..n {
            b[self.perm[i]] = x[i];
        }
    }
}

/// Geometric nested dissection: recursive coordinate bisection with a
/// one-sided vertex-separator cover. `adj` is the full symmetric adjacency
/// (self-loops ignored). Returns perm (new -> old).
pub fn geometric_nd(
    adj_ptr: &[usize],
    adj_ind: &[usize],
    pos: &[[f64; 3]],
    leaf: usize,
) -> Vec<usize> {
    let n = pos.len();
    let mut order = Vec::with_capacity(n);
    let mut verts: Vec<usize> = (0..n).collect();
    let mut side = vec![0u8; n];
    nd_rec(
        &mut verts, adj_ptr, adj_ind, pos, &mut side, &mut order, leaf,
    );
    debug_assert_eq!(order.len(), n);
    order
}

fn nd_rec(
    verts: &mut Vec<usize>,
    ap: &[usize],
    ai: &[usize],
    pos: &[[f64; 3]],
    side: &mut [u8],
    out: &mut Vec<usize>,
    leaf: usize,
) {
    if verts.len() <= leaf {
        out.extend_from_slice(verts);
        return;
    }
    let mut lo = [f64::INFINITY; 3];
    let mut hi = [f64::NEG_INFINITY; 3];
    for &v in verts.iter() {
        for a in 0..3 {
            lo[a] = lo[a].min(pos[v][a]);
            hi[a] = hi[a].max(pos[v][a]);
        }
    }
    let axis = (0..3)
        .max_by(|&a, &b| (hi[a] - lo[a]).partial_cmp(&(hi[b] - lo[b])).unwrap())
        .unwrap();
    let mid = verts.len() / 2;
    verts.select_nth_unstable_by(mid, |&u, &v| {
        pos[u][axis]
            .partial_cmp(&pos[v][axis])
            .unwrap()
            .then(u.cmp(&v))
    });
    // Split by coordinate value, ties to the right: points sharing the
    // median coordinate (a whole grid plane on structured meshes) must land
    // on one side, or the separator cover doubles in thickness. Fall back to
    // the positional split when the tie block would unbalance the halves.
    let cutval = pos[verts[mid]][axis];
    let below = verts.iter().filter(|&&v| pos[v][axis] < cutval).count();
    if below >= verts.len() / 8 && verts.len() - below >= verts.len() / 8 {
        for &v in verts.iter() {
            side[v] = if pos[v][axis] < cutval { 1 } else { 2 };
        }
    } else {
        for (i, &v) in verts.iter().enumerate() {
            side[v] = if i < mid { 1 } else { 2 };
        }
    }
    for &v in verts.iter() {
        if side[v] != 1 {
            continue;
        }
        for e in ap[v]..ap[v + 1] {
            let u = ai[e];
            if side[u] == 2 {
                side[u] = 3;
            }
        }
    }
    let mut left = Vec::new();
    let mut right = Vec::new();
    let mut sep = Vec::new();
    for &v in verts.iter() {
        match side[v] {
            1 => left.push(v),
            2 => right.push(v),
            _ => sep.push(v),
        }
    }
    if left.is_empty() || right.is_empty() {
        out.extend_from_slice(&left);
        out.extend_from_slice(&right);
        out.extend_from_slice(&sep);
        return;
    }
    verts.clear();
    verts.shrink_to_fit();
    nd_rec(&mut left, ap, ai, pos, side, out, leaf);
    nd_rec(&mut right, ap, ai, pos, side, out, leaf);
    out.extend_from_slice(&sep);
}
