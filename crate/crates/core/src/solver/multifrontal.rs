//! Multifrontal sparse LU for slab Jacobians.
//!
//! The node grid is ordered by geometric nested dissection. Each tree node
//! owns a separator (or leaf box) of grid nodes; its frontal matrix is
//! partially factored with dense partial-pivoting LU restricted to the
//! fully-summed rows, and the Schur complement is passed to the parent.

use faer::dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::factor::{lu_in_place, lu_in_place_scratch};
use faer::linalg::matmul::matmul;
use faer::linalg::triangular_solve::{
    solve_lower_triangular_in_place, solve_unit_lower_triangular_in_place, solve_upper_triangular_in_place,
};
use faer::reborrow::{Reborrow, ReborrowMut};
use faer::{Accum, Mat, Par};

use crate::assembly::{SparsityPattern, BLOCK_ROWS};

use super::SolverError;

/// Boxes at or below this many grid nodes become leaves.
const LEAF_NODES: usize = 16;

#[derive(Debug, Clone)]
struct FrontSym {
    /// Grid nodes eliminated in this front.
    own: Vec<usize>,
    /// Grid nodes of ancestors coupled to this subtree.
    border: Vec<usize>,
    children: Vec<usize>,
    /// For each child, positions of its border nodes within this front.
    child_maps: Vec<Vec<u32>>,
}

impl FrontSym {
    fn nf(&self) -> usize {
        4 * self.own.len()
    }

    fn nb(&self) -> usize {
        4 * self.border.len()
    }
}

/// Elimination tree and front structure; depends only on the pattern.
#[derive(Debug, Clone)]
pub struct MultifrontalSymbolic {
    ndof: usize,
    fronts: Vec<FrontSym>,
    factor_bytes: usize,
    peak_bytes: usize,
    flops: f64,
}

#[derive(Clone, Copy)]
struct Span {
    start: usize,
    len: usize,
    periodic: bool,
}

struct Dissector<'a> {
    grid: [usize; 3],
    fronts: &'a mut Vec<FrontSym>,
}

impl Dissector<'_> {
    fn node(&self, c: [usize; 3]) -> usize {
        (c[2] * self.grid[1] + c[1]) * self.grid[0] + c[0]
    }

    fn collect(&self, b: [Span; 3], out: &mut Vec<usize>) {
        for t in 0..b[2].len {
            for y in 0..b[1].len {
                for x in 0..b[0].len {
                    out.push(self.node([
                        (b[0].start + x) % self.grid[0],
                        (b[1].start + y) % self.grid[1],
                        (b[2].start + t) % self.grid[2],
                    ]));
                }
            }
        }
    }

    /// Returns the tree index of the box, or `None` if it is empty.
    fn dissect(&mut self, b: [Span; 3]) -> Option<usize> {
        let size: usize = b.iter().map(|s| s.len).product();
        if size == 0 {
            return None;
        }
        let mut own = Vec::new();
        let mut children = Vec::new();
        // cheapest cut: smallest separator per unit of length removed
        let best = (0..3)
            .filter(|&d| b[d].len >= 3)
            .min_by(|&d1, &d2| {
                let key = |d: usize| {
                    let sep = (size / b[d].len) * if b[d].periodic { 2 } else { 1 };
                    sep as f64 / b[d].len as f64
                };
                key(d1).total_cmp(&key(d2))
            });
        match best {
            Some(d) if size > LEAF_NODES => {
                let Span { start, len, periodic } = b[d];
                let h = len / 2;
                let with = |s: usize, l: usize| {
                    let mut c = b;
                    c[d] = Span { start: s, len: l, periodic: false };
                    c
                };
                if periodic {
                    children.extend(self.dissect(with(start + 1, h - 1)));
                    children.extend(self.dissect(with(start + h + 1, len - h - 1)));
                    self.collect(with(start, 1), &mut own);
                    self.collect(with(start + h, 1), &mut own);
                } else {
                    children.extend(self.dissect(with(start, h)));
                    children.extend(self.dissect(with(start + h + 1, len - h - 1)));
                    self.collect(with(start + h, 1), &mut own);
                }
            }
            _ => self.collect(b, &mut own),
        }
        self.fronts.push(FrontSym { own, border: Vec::new(), children, child_maps: Vec::new() });
        Some(self.fronts.len() - 1)
    }
}

impl MultifrontalSymbolic {
    pub fn new(pattern: &SparsityPattern) -> Self {
        let grid = pattern.grid;
        let nn = grid.iter().product::<usize>();
        assert_eq!(4 * nn, pattern.ndof, "pattern grid does not match its size");
        let mut fronts = Vec::new();
        let root = [
            Span { start: 0, len: grid[0], periodic: grid[0] >= 3 },
            Span { start: 0, len: grid[1], periodic: grid[1] >= 3 },
            Span { start: 0, len: grid[2], periodic: false },
        ];
        Dissector { grid, fronts: &mut fronts }.dissect(root);

        let mut owner = vec![usize::MAX; nn];
        for (s, f) in fronts.iter().enumerate() {
            for &n in &f.own {
                owner[n] = s;
            }
        }
        debug_assert!(owner.iter().all(|&o| o != usize::MAX));

        // border sets, bottom-up; fronts are already in postorder
        let mut mark = vec![usize::MAX; nn];
        for s in 0..fronts.len() {
            let mut border = Vec::new();
            let children = fronts[s].children.clone();
            for &c in &children {
                for &m in &fronts[c].border {
                    if owner[m] > s && mark[m] != s {
                        mark[m] = s;
                        border.push(m);
                    }
                }
            }
            for &n in &fronts[s].own {
                for &m in pattern.node_neighbors(n) {
                    if owner[m] > s && mark[m] != s {
                        mark[m] = s;
                        border.push(m);
                    }
                }
            }
            border.sort_unstable_by_key(|&m| (owner[m], m));
            fronts[s].border = border;
        }

        // child border positions inside the parent front
        let mut local = vec![u32::MAX; nn];
        for s in 0..fronts.len() {
            let f = &fronts[s];
            for (a, &n) in f.own.iter().chain(&f.border).enumerate() {
                local[n] = a as u32;
            }
            let maps: Vec<Vec<u32>> = f
                .children
                .iter()
                .map(|&c| fronts[c].border.iter().map(|&m| local[m]).collect())
                .collect();
            debug_assert!(maps.iter().flatten().all(|&x| x != u32::MAX));
            for &n in f.own.iter().chain(&f.border) {
                local[n] = u32::MAX;
            }
            fronts[s].child_maps = maps;
        }

        let mut factor_bytes = 0usize;
        let mut flops = 0.0;
        let mut peak = 0usize;
        // contribution-block stack size at each point of the postorder walk
        let mut stack: Vec<usize> = Vec::new();
        let mut stack_bytes = 0usize;
        for f in &fronts {
            let (nf, nb) = (f.nf(), f.nb());
            let front = (nf + nb) * (nf + nb) * 8;
            factor_bytes += (nf * nf + 2 * nf * nb) * 8;
            peak = peak.max(factor_bytes + stack_bytes + front);
            for _ in 0..f.children.len() {
                stack_bytes -= stack.pop().expect("child block on stack");
            }
            stack.push(nb * nb * 8);
            stack_bytes += nb * nb * 8;
            let (a, b) = (nf as f64, nb as f64);
            flops += 2.0 / 3.0 * a * a * a + 2.0 * a * a * b + 2.0 * a * b * b;
        }
        MultifrontalSymbolic { ndof: pattern.ndof, fronts, factor_bytes, peak_bytes: peak, flops }
    }

    /// Bytes held by the finished factors.
    pub fn factor_bytes(&self) -> usize {
        self.factor_bytes
    }

    /// Upper estimate of the working set during factorization.
    pub fn peak_bytes(&self) -> usize {
        self.peak_bytes
    }

    pub fn flops(&self) -> f64 {
        self.flops
    }

    pub fn num_fronts(&self) -> usize {
        self.fronts.len()
    }

    pub fn max_front(&self) -> usize {
        self.fronts.iter().map(|f| f.nf() + f.nb()).max().unwrap_or(0)
    }

    /// Numeric factorization of `values` laid out on `pattern`.
    pub fn factor(&self, pattern: &SparsityPattern, values: &[f64]) -> Result<MultifrontalLu, SolverError> {
        assert_eq!(pattern.ndof, self.ndof);
        assert_eq!(values.len(), pattern.nnz());
        let nn = self.ndof / 4;
        let mut local = vec![u32::MAX; nn];
        let mut factors = Vec::with_capacity(self.fronts.len());
        let mut cb_stack: Vec<Mat<f64>> = Vec::new();
        let mut perturbed = 0usize;
        let mut mem = MemBuffer::new(lu_in_place_scratch::<usize, f64>(self.max_front(), self.max_front(), Par::Seq, Default::default()));
        for f in &self.fronts {
            let (nf, nb) = (f.nf(), f.nb());
            let n = nf + nb;
            let n_own = f.own.len();
            for (a, &node) in f.own.iter().chain(&f.border).enumerate() {
                local[node] = a as u32;
            }
            let mut fm = Mat::<f64>::zeros(n, n);
            // columns owned here: every row still present
            for (a, &node) in f.own.iter().enumerate() {
                for q in 0..4 {
                    let col = 4 * node + q;
                    for k in pattern.col_ptr[col]..pattern.col_ptr[col + 1] {
                        let r = pattern.row_idx[k];
                        let lr = local[r / 4];
                        if lr != u32::MAX {
                            fm[(4 * lr as usize + r % 4, 4 * a + q)] += values[k];
                        }
                    }
                }
            }
            // owned rows against border columns
            for (a, &node) in f.own.iter().enumerate() {
                for &m in pattern.node_neighbors(node) {
                    let lm = local[m];
                    if lm == u32::MAX || (lm as usize) < n_own {
                        continue;
                    }
                    let k = pattern.node_neighbors(m).binary_search(&node).expect("symmetric adjacency");
                    for q in 0..4 {
                        for &p in BLOCK_ROWS[q] {
                            fm[(4 * a + p, 4 * lm as usize + q)] += values[pattern.pos(k, m, p, q)];
                        }
                    }
                }
            }
            // extend-add child contribution blocks (last child is on top)
            for (ci, map) in f.child_maps.iter().enumerate().rev() {
                let _ = ci;
                let cb = cb_stack.pop().expect("child contribution block");
                let nbc = cb.nrows();
                for j in 0..nbc {
                    let pj = 4 * map[j / 4] as usize + j % 4;
                    for i in 0..nbc {
                        let pi = 4 * map[i / 4] as usize + i % 4;
                        fm[(pi, pj)] += cb[(i, j)];
                    }
                }
            }
            for &node in f.own.iter().chain(&f.border) {
                local[node] = u32::MAX;
            }

            let mut perm = vec![0usize; nf];
            let mut perm_inv = vec![0usize; nf];
            let a11 = fm.as_ref().submatrix(0, 0, nf, nf).to_owned();
            {
                let (f11, _, _, _) = fm.as_mut().split_at_mut(nf, nf);
                let stack = MemStack::new(&mut mem);
                lu_in_place(f11, &mut perm, &mut perm_inv, Par::Seq, stack, Default::default());
            }
            let scale = (0..nf).map(|i| fm[(i, i)].abs()).fold(0.0f64, f64::max);
            let tiny = (0..nf).any(|i| {
                let d = fm[(i, i)];
                !d.is_finite() || d.abs() <= 1e-14 * scale || d == 0.0
            });
            if tiny {
                // a fully-summed block can be singular even when the matrix is not
                let mut f11 = fm.as_mut().submatrix_mut(0, 0, nf, nf);
                f11.copy_from(&a11);
                perturbed += static_pivot_lu(f11, &mut perm)?;
            }
            drop(a11);
            let (f11, mut f12, mut f21, mut f22) = fm.as_mut().split_at_mut(nf, nf);
            if nb > 0 {
                // rows of F12 follow the pivoting of F11
                let src = f12.to_owned();
                for i in 0..nf {
                    for j in 0..nb {
                        f12[(i, j)] = src[(perm[i], j)];
                    }
                }
                solve_unit_lower_triangular_in_place(f11.rb(), f12.rb_mut(), Par::Seq);
                solve_lower_triangular_in_place(f11.rb().transpose(), f21.rb_mut().transpose_mut(), Par::Seq);
                matmul(f22.rb_mut(), Accum::Add, f21.rb(), f12.rb(), -1.0, Par::Seq);
                cb_stack.push(f22.to_owned());
            } else {
                cb_stack.push(Mat::zeros(0, 0));
            }
            factors.push(FrontFactor {
                lu11: f11.to_owned(),
                perm,
                u12: f12.to_owned(),
                l21: f21.to_owned(),
            });
        }
        Ok(MultifrontalLu { symbolic: self.clone_structure(), factors, perturbed })
    }

    fn clone_structure(&self) -> FrontIndex {
        FrontIndex {
            ndof: self.ndof,
            fronts: self.fronts.iter().map(|f| (f.own.clone(), f.border.clone())).collect(),
        }
    }
}

/// Relative size of a statically perturbed pivot, about `sqrt(eps)`.
pub const STATIC_PIVOT: f64 = 1.5e-8;

/// Dense partial-pivoting LU of `a` in place (`P a = L U`, row `i` of the
/// result is original row `perm[i]`). A pivot column whose best entry is
/// below `STATIC_PIVOT` times the block's largest entry gets that value as
/// pivot instead. Returns the number of perturbed pivots.
fn static_pivot_lu(mut a: faer::MatMut<'_, f64>, perm: &mut [usize]) -> Result<usize, SolverError> {
    let n = a.nrows();
    let mut amax = 0.0f64;
    for j in 0..n {
        for i in 0..n {
            amax = amax.max(a[(i, j)].abs());
        }
    }
    if !amax.is_finite() || amax == 0.0 {
        return Err(SolverError::SingularMatrix);
    }
    let floor = STATIC_PIVOT * amax;
    for (i, p) in perm.iter_mut().enumerate() {
        *p = i;
    }
    let mut count = 0;
    for k in 0..n {
        let (mut best, mut arg) = (0.0f64, k);
        for i in k..n {
            let v = a[(i, k)].abs();
            if v > best {
                best = v;
                arg = i;
            }
        }
        if arg != k {
            for j in 0..n {
                let t = a[(k, j)];
                a[(k, j)] = a[(arg, j)];
                a[(arg, j)] = t;
            }
            perm.swap(k, arg);
        }
        if best < floor {
            a[(k, k)] = if a[(k, k)] < 0.0 { -floor } else { floor };
            count += 1;
        }
        let d = a[(k, k)];
        for i in k + 1..n {
            a[(i, k)] /= d;
        }
        for j in k + 1..n {
            let akj = a[(k, j)];
            if akj == 0.0 {
                continue;
            }
            for i in k + 1..n {
                let l = a[(i, k)];
                a[(i, j)] -= l * akj;
            }
        }
    }
    Ok(count)
}

#[derive(Debug, Clone)]
struct FrontIndex {
    ndof: usize,
    fronts: Vec<(Vec<usize>, Vec<usize>)>,
}

#[derive(Debug, Clone)]
struct FrontFactor {
    lu11: Mat<f64>,
    perm: Vec<usize>,
    u12: Mat<f64>,
    l21: Mat<f64>,
}

/// Numeric factors; solves `A x = b`.
#[derive(Debug, Clone)]
pub struct MultifrontalLu {
    symbolic: FrontIndex,
    factors: Vec<FrontFactor>,
    perturbed: usize,
}

fn gather(x: &[f64], nodes: &[usize], out: &mut Mat<f64>) {
    for (a, &n) in nodes.iter().enumerate() {
        for s in 0..4 {
            out[(4 * a + s, 0)] = x[4 * n + s];
        }
    }
}

impl MultifrontalLu {
    pub fn ndof(&self) -> usize {
        self.symbolic.ndof
    }

    /// Pivots replaced by [`STATIC_PIVOT`]-sized values; solves then need refinement.
    pub fn perturbed_pivots(&self) -> usize {
        self.perturbed
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        assert_eq!(b.len(), self.ndof());
        let mut x = b.to_vec();
        // forward: L y = P b
        for ((own, border), fac) in self.symbolic.fronts.iter().zip(&self.factors) {
            let nf = 4 * own.len();
            let nb = 4 * border.len();
            let mut yf = Mat::<f64>::zeros(nf, 1);
            for i in 0..nf {
                let k = fac.perm[i];
                yf[(i, 0)] = x[4 * own[k / 4] + k % 4];
            }
            solve_unit_lower_triangular_in_place(fac.lu11.as_ref(), yf.as_mut(), Par::Seq);
            for (a, &n) in own.iter().enumerate() {
                for s in 0..4 {
                    x[4 * n + s] = yf[(4 * a + s, 0)];
                }
            }
            if nb > 0 {
                let mut yb = Mat::<f64>::zeros(nb, 1);
                matmul(yb.as_mut(), Accum::Replace, fac.l21.as_ref(), yf.as_ref(), 1.0, Par::Seq);
                for (a, &n) in border.iter().enumerate() {
                    for s in 0..4 {
                        x[4 * n + s] -= yb[(4 * a + s, 0)];
                    }
                }
            }
        }
        // backward: U x = y
        for ((own, border), fac) in self.symbolic.fronts.iter().zip(&self.factors).rev() {
            let nf = 4 * own.len();
            let nb = 4 * border.len();
            let mut yf = Mat::<f64>::zeros(nf, 1);
            gather(&x, own, &mut yf);
            if nb > 0 {
                let mut xb = Mat::<f64>::zeros(nb, 1);
                gather(&x, border, &mut xb);
                matmul(yf.as_mut(), Accum::Add, fac.u12.as_ref(), xb.as_ref(), -1.0, Par::Seq);
            }
            solve_upper_triangular_in_place(fac.lu11.as_ref(), yf.as_mut(), Par::Seq);
            for (a, &n) in own.iter().enumerate() {
                for s in 0..4 {
                    x[4 * n + s] = yf[(4 * a + s, 0)];
                }
            }
        }
        x
    }
}
