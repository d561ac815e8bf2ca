//! Residual and Jacobian of the weak equations over one spacetime slab.
//!
//! Unknowns are interleaved per node as `(phi, u, chi, v)`; residual rows per
//! node hold `(K1, K2, G1, G2)`. Rows on the first time level are replaced by
//! the strong constraint `U - ic`.

use thiserror::Error;

use crate::discretization::basis::shape;
use crate::discretization::quadrature::tensor_rule;
use crate::discretization::{element_matrices, Dims, ElementMatrices, LocalMatrix, MeshSpec};
use crate::initdata::TimeSlice;
use crate::model::{ModelError, ModelParams};

pub const PHI: usize = 0;
pub const U: usize = 1;
pub const CHI: usize = 2;
pub const V: usize = 3;

/// Row slots present in each column slot of a node-pair block.
pub(crate) const BLOCK_ROWS: [&[usize]; 4] = [&[0, 1, 2], &[0, 1], &[0, 2, 3], &[2, 3]];

/// Gauss points per direction for the potential terms.
pub const NONLINEAR_GAUSS_POINTS: usize = 3;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AssemblyError {
    #[error("{what} has length {got}, expected {expected}")]
    SizeMismatch { what: &'static str, expected: usize, got: usize },
    #[error(transparent)]
    Model(#[from] ModelError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Physical,
    /// Subtracts the manufactured-solution forcing from `K1` and `G1`.
    Mms,
}

/// Nodal unknowns over a whole slab, `4 * num_nodes` long.
#[derive(Debug, Clone, PartialEq)]
pub struct SlabState {
    pub values: Vec<f64>,
}

impl SlabState {
    pub fn zeros(mesh: &MeshSpec) -> Self {
        SlabState { values: vec![0.0; mesh.ndof()] }
    }

    #[inline]
    pub fn get(&self, node: usize, slot: usize) -> f64 {
        self.values[4 * node + slot]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    /// Copy of temporal level `it`.
    pub fn level(&self, mesh: &MeshSpec, it: usize) -> TimeSlice {
        let npl = mesh.nodes_per_level();
        let mut s = TimeSlice::zeros(npl);
        for k in 0..npl {
            let b = 4 * (it * npl + k);
            s.phi[k] = self.values[b];
            s.u[k] = self.values[b + 1];
            s.chi[k] = self.values[b + 2];
            s.v[k] = self.values[b + 3];
        }
        s
    }
}

/// Compressed-column pattern of the slab Jacobian.
///
/// Built from node adjacency (nodes sharing an element, with spatial wrap)
/// and the fixed within-block slot mask, so it is structurally symmetric.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparsityPattern {
    pub ndof: usize,
    /// `(nx, ny, nt)` of the node grid; `ny = 1` in 1+1. Space wraps, time does not.
    pub grid: [usize; 3],
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    node_ptr: Vec<usize>,
    node_nbrs: Vec<usize>,
}

impl SparsityPattern {
    pub fn nnz(&self) -> usize {
        self.row_idx.len()
    }

    /// Sorted neighbor nodes of `node`, itself included.
    pub fn node_neighbors(&self, node: usize) -> &[usize] {
        &self.node_nbrs[self.node_ptr[node]..self.node_ptr[node + 1]]
    }

    /// Storage index of `(row, col)`, if structurally present.
    pub fn position(&self, row: usize, col: usize) -> Option<usize> {
        let (rn, p) = (row / 4, row % 4);
        let (cn, q) = (col / 4, col % 4);
        let k = self.node_neighbors(cn).binary_search(&rn).ok()?;
        let pi = BLOCK_ROWS[q].iter().position(|&s| s == p)?;
        Some(self.col_ptr[col] + k * BLOCK_ROWS[q].len() + pi)
    }

    #[inline]
    pub(crate) fn pos(&self, k: usize, col_node: usize, p: usize, q: usize) -> usize {
        let pi = match (q, p) {
            (0, p) | (1, p) => p,
            (2, 0) => 0,
            (2, p) => p - 1,
            (3, p) => p - 2,
            _ => unreachable!(),
        };
        self.col_ptr[4 * col_node + q] + k * BLOCK_ROWS[q].len() + pi
    }
}

pub fn sparsity_pattern(mesh: &MeshSpec) -> SparsityPattern {
    let nn = mesh.num_nodes();
    let npe = mesh.dims.nodes_per_element();
    let mut nbrs: Vec<Vec<usize>> = vec![Vec::new(); nn];
    for e in 0..mesh.num_elements() {
        let nodes = mesh.element_nodes(e);
        for &a in &nodes[..npe] {
            nbrs[a].extend_from_slice(&nodes[..npe]);
        }
    }
    let mut node_ptr = Vec::with_capacity(nn + 1);
    let mut node_nbrs = Vec::new();
    node_ptr.push(0);
    for list in nbrs.iter_mut() {
        list.sort_unstable();
        list.dedup();
        node_nbrs.extend_from_slice(list);
        node_ptr.push(node_nbrs.len());
    }
    let ndof = 4 * nn;
    let mut col_ptr = Vec::with_capacity(ndof + 1);
    let mut row_idx = Vec::new();
    col_ptr.push(0);
    for n in 0..nn {
        for rows in BLOCK_ROWS {
            for &m in &node_nbrs[node_ptr[n]..node_ptr[n + 1]] {
                for &p in rows {
                    row_idx.push(4 * m + p);
                }
            }
            col_ptr.push(row_idx.len());
        }
    }
    SparsityPattern { ndof, grid: [mesh.nx, mesh.ny_eff(), mesh.nt], col_ptr, row_idx, node_ptr, node_nbrs }
}

/// Jacobian values laid out on a [`SparsityPattern`].
#[derive(Debug, Clone, PartialEq)]
pub struct SparseJacobian {
    pub values: Vec<f64>,
}

impl SparseJacobian {
    pub fn get(&self, pattern: &SparsityPattern, row: usize, col: usize) -> f64 {
        pattern.position(row, col).map_or(0.0, |k| self.values[k])
    }

    /// `y = J x`.
    pub fn matvec(&self, pattern: &SparsityPattern, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; pattern.ndof];
        for c in 0..pattern.ndof {
            let xc = x[c];
            for k in pattern.col_ptr[c]..pattern.col_ptr[c + 1] {
                y[pattern.row_idx[k]] += self.values[k] * xc;
            }
        }
        y
    }
}

/// Everything that stays fixed across Newton iterations of one slab.
#[derive(Debug, Clone)]
pub struct SlabProblem {
    pub mesh: MeshSpec,
    pub model: ModelParams,
    pub mode: Mode,
    /// Absolute time at the slab start.
    pub t0: f64,
    pub pattern: SparsityPattern,
    em: ElementMatrices,
    k_phi: LocalMatrix,
    k_chi: LocalMatrix,
    npe: usize,
    /// `shape_q[q * npe + a]`.
    shape_q: Vec<f64>,
    /// Quadrature weight times element volume.
    weight_q: Vec<f64>,
    /// `pair_k[(e * npe + i) * npe + j]`: index of local node `i` among the neighbors of local node `j`.
    pair_k: Vec<u32>,
    /// Assembled `int F Psi` in slots `PHI` and `CHI`, MMS mode only.
    load: Option<Vec<f64>>,
}

impl SlabProblem {
    pub fn new(mesh: &MeshSpec, model: &ModelParams, mode: Mode, t0: f64) -> Result<Self, AssemblyError> {
        let em = element_matrices(mesh.dims, mesh.h_x(), mesh.h_t(), mesh.h_y());
        let space = em.space();
        let k_phi = space.add(&em.mass, model.m_phi * model.m_phi);
        let k_chi = space.add(&em.mass, model.m_chi * model.m_chi);
        let npe = mesh.dims.nodes_per_element();
        let rule = tensor_rule(NONLINEAR_GAUSS_POINTS, mesh.dims == Dims::D2);
        let vol = mesh.h_x() * mesh.h_t() * if mesh.dims == Dims::D2 { mesh.h_y() } else { 1.0 };
        let mut shape_q = Vec::with_capacity(rule.len() * npe);
        for q in &rule {
            for a in 0..npe {
                shape_q.push(shape(mesh.dims, a, q.xi, q.tau, q.zeta));
            }
        }
        let weight_q: Vec<f64> = rule.iter().map(|q| q.weight * vol).collect();
        let pattern = sparsity_pattern(mesh);
        let mut pair_k = Vec::with_capacity(mesh.num_elements() * npe * npe);
        for e in 0..mesh.num_elements() {
            let nodes = mesh.element_nodes(e);
            for i in 0..npe {
                for j in 0..npe {
                    let k = pattern
                        .node_neighbors(nodes[j])
                        .binary_search(&nodes[i])
                        .expect("element nodes are mutual neighbors");
                    pair_k.push(k as u32);
                }
            }
        }
        let mut prob = SlabProblem {
            mesh: *mesh,
            model: *model,
            mode,
            t0,
            pattern,
            em,
            k_phi,
            k_chi,
            npe,
            shape_q,
            weight_q,
            pair_k,
            load: None,
        };
        if mode == Mode::Mms {
            prob.load = Some(prob.forcing_load(&rule)?);
        }
        Ok(prob)
    }

    pub fn ndof(&self) -> usize {
        self.pattern.ndof
    }

    pub fn element_matrices(&self) -> &ElementMatrices {
        &self.em
    }

    fn forcing_load(&self, rule: &[crate::discretization::quadrature::QuadPoint]) -> Result<Vec<f64>, AssemblyError> {
        let mesh = &self.mesh;
        let npe = self.npe;
        let mut load = vec![0.0; mesh.ndof()];
        let (hx, hy, ht) = (mesh.h_x(), mesh.h_y(), mesh.h_t());
        let off = crate::mms::domain_offset(mesh);
        for e in 0..mesh.num_elements() {
            let nodes = mesh.element_nodes(e);
            let (x0, y0, t0) = mesh.element_origin(e);
            for (qi, q) in rule.iter().enumerate() {
                let x = off + x0 + q.xi * hx;
                let y = off + y0 + q.zeta * hy;
                let t = self.t0 + t0 + q.tau * ht;
                let (fp, fc) = crate::mms::forcing_for(&self.model, mesh.dims, x, t, y)?;
                let w = self.weight_q[qi];
                for a in 0..npe {
                    let s = w * self.shape_q[qi * npe + a];
                    load[4 * nodes[a] + PHI] += s * fp;
                    load[4 * nodes[a] + CHI] += s * fc;
                }
            }
        }
        Ok(load)
    }

    fn check_sizes(&self, u: &[f64], ic: &TimeSlice) -> Result<(), AssemblyError> {
        if u.len() != self.ndof() {
            return Err(AssemblyError::SizeMismatch { what: "slab state", expected: self.ndof(), got: u.len() });
        }
        let npl = self.mesh.nodes_per_level();
        for (what, f) in [("ic.phi", &ic.phi), ("ic.u", &ic.u), ("ic.chi", &ic.chi), ("ic.v", &ic.v)] {
            if f.len() != npl {
                return Err(AssemblyError::SizeMismatch { what, expected: npl, got: f.len() });
            }
        }
        Ok(())
    }

    /// Whether local node `a` of an element on the first time row is constrained.
    #[inline]
    fn constrained(&self, first_row: bool, a: usize) -> bool {
        first_row && (a % 4) < 2
    }

    pub fn residual(&self, u: &[f64], ic: &TimeSlice) -> Result<Vec<f64>, AssemblyError> {
        let mut r = vec![0.0; self.ndof()];
        self.residual_into(u, ic, &mut r)?;
        Ok(r)
    }

    pub fn residual_into(&self, u: &[f64], ic: &TimeSlice, r: &mut [f64]) -> Result<(), AssemblyError> {
        self.check_sizes(u, ic)?;
        let mesh = &self.mesh;
        let npe = self.npe;
        let npl = mesh.nodes_per_level();
        let gamma = self.model.gamma();
        let pot = self.model.potential;
        let nonlinear = !pot.is_none();
        let (t, m, kp, kc) = (&self.em.time, &self.em.mass, &self.k_phi, &self.k_chi);
        r.iter_mut().for_each(|x| *x = 0.0);
        let mut loc = [[0.0f64; 4]; 8];
        let mut res = [[0.0f64; 4]; 8];
        for e in 0..mesh.num_elements() {
            let nodes = mesh.element_nodes(e);
            let first_row = e < npl;
            for a in 0..npe {
                let b = 4 * nodes[a];
                loc[a] = [u[b], u[b + 1], u[b + 2], u[b + 3]];
            }
            for i in 0..npe {
                let mut acc = [0.0; 4];
                for j in 0..npe {
                    let (tij, mij) = (t.get(i, j), m.get(i, j));
                    let l = &loc[j];
                    acc[0] += tij * l[U] + kp.get(i, j) * l[PHI];
                    acc[1] += tij * l[PHI] - mij * l[U];
                    acc[2] += tij * l[V] + kc.get(i, j) * l[CHI];
                    acc[3] += tij * l[CHI] - mij * l[V];
                }
                res[i] = acc;
            }
            if nonlinear {
                for (qi, &w) in self.weight_q.iter().enumerate() {
                    let sq = &self.shape_q[qi * npe..(qi + 1) * npe];
                    let (mut pq, mut cq) = (0.0, 0.0);
                    for a in 0..npe {
                        pq += sq[a] * loc[a][PHI];
                        cq += sq[a] * loc[a][CHI];
                    }
                    let (gp, gc) = pot.grad(pq, cq)?;
                    let (fp, fc) = (w * gp, w * gamma * gc);
                    for i in 0..npe {
                        res[i][0] += fp * sq[i];
                        res[i][2] += fc * sq[i];
                    }
                }
            }
            for i in 0..npe {
                if self.constrained(first_row, i) {
                    continue;
                }
                let b = 4 * nodes[i];
                for s in 0..4 {
                    r[b + s] += res[i][s];
                }
            }
        }
        if let Some(load) = &self.load {
            for (ri, li) in r[4 * npl..].iter_mut().zip(&load[4 * npl..]) {
                *ri -= li;
            }
        }
        for k in 0..npl {
            let b = 4 * k;
            r[b] = u[b] - ic.phi[k];
            r[b + 1] = u[b + 1] - ic.u[k];
            r[b + 2] = u[b + 2] - ic.chi[k];
            r[b + 3] = u[b + 3] - ic.v[k];
        }
        Ok(())
    }

    pub fn jacobian(&self, u: &[f64], ic: &TimeSlice) -> Result<SparseJacobian, AssemblyError> {
        let mut j = SparseJacobian { values: vec![0.0; self.pattern.nnz()] };
        self.jacobian_into(u, ic, &mut j)?;
        Ok(j)
    }

    pub fn jacobian_into(&self, u: &[f64], ic: &TimeSlice, jac: &mut SparseJacobian) -> Result<(), AssemblyError> {
        self.check_sizes(u, ic)?;
        let nnz = self.pattern.nnz();
        if jac.values.len() != nnz {
            jac.values.resize(nnz, 0.0);
        }
        let vals = &mut jac.values;
        vals.iter_mut().for_each(|x| *x = 0.0);
        let mesh = &self.mesh;
        let pat = &self.pattern;
        let npe = self.npe;
        let npl = mesh.nodes_per_level();
        let gamma = self.model.gamma();
        let pot = self.model.potential;
        let nonlinear = !pot.is_none();
        let (t, m, kp, kc) = (&self.em.time, &self.em.mass, &self.k_phi, &self.k_chi);
        let mut loc = [[0.0f64; 2]; 8];
        // integrals of H_ab Psi_i Psi_j for (phi_phi, phi_chi, chi_chi)
        let mut hpp = [0.0f64; 64];
        let mut hpc = [0.0f64; 64];
        let mut hcc = [0.0f64; 64];
        for e in 0..mesh.num_elements() {
            let nodes = mesh.element_nodes(e);
            let first_row = e < npl;
            if nonlinear {
                for a in 0..npe {
                    let b = 4 * nodes[a];
                    loc[a] = [u[b + PHI], u[b + CHI]];
                }
                hpp.iter_mut().chain(hpc.iter_mut()).chain(hcc.iter_mut()).for_each(|x| *x = 0.0);
                for (qi, &w) in self.weight_q.iter().enumerate() {
                    let sq = &self.shape_q[qi * npe..(qi + 1) * npe];
                    let (mut pq, mut cq) = (0.0, 0.0);
                    for a in 0..npe {
                        pq += sq[a] * loc[a][0];
                        cq += sq[a] * loc[a][1];
                    }
                    let h = pot.hess(pq, cq)?;
                    for i in 0..npe {
                        let wi = w * sq[i];
                        let (a, b, c) = (wi * h.phi_phi, wi * h.phi_chi, wi * h.chi_chi);
                        for j in 0..npe {
                            hpp[i * 8 + j] += a * sq[j];
                            hpc[i * 8 + j] += b * sq[j];
                            hcc[i * 8 + j] += c * sq[j];
                        }
                    }
                }
            }
            let pk = &self.pair_k[e * npe * npe..(e + 1) * npe * npe];
            for i in 0..npe {
                if self.constrained(first_row, i) {
                    continue;
                }
                for jn in 0..npe {
                    let k = pk[i * npe + jn] as usize;
                    let cn = nodes[jn];
                    let (tij, mij) = (t.get(i, jn), m.get(i, jn));
                    let ij = i * 8 + jn;
                    let (npp, npc, ncc) =
                        if nonlinear { (hpp[ij], hpc[ij], hcc[ij]) } else { (0.0, 0.0, 0.0) };
                    vals[pat.pos(k, cn, 0, PHI)] += kp.get(i, jn) + npp;
                    vals[pat.pos(k, cn, 0, U)] += tij;
                    vals[pat.pos(k, cn, 0, CHI)] += npc;
                    vals[pat.pos(k, cn, 1, PHI)] += tij;
                    vals[pat.pos(k, cn, 1, U)] -= mij;
                    vals[pat.pos(k, cn, 2, PHI)] += gamma * npc;
                    vals[pat.pos(k, cn, 2, CHI)] += kc.get(i, jn) + gamma * ncc;
                    vals[pat.pos(k, cn, 2, V)] += tij;
                    vals[pat.pos(k, cn, 3, CHI)] += tij;
                    vals[pat.pos(k, cn, 3, V)] -= mij;
                }
            }
        }
        for node in 0..npl {
            let k = pat.node_neighbors(node).binary_search(&node).expect("self neighbor");
            for s in 0..4 {
                vals[pat.pos(k, node, s, s)] = 1.0;
            }
        }
        Ok(())
    }
}

/// One-shot residual assembly. Builds a fresh [`SlabProblem`]; prefer that
/// type directly when assembling repeatedly.
pub fn form_residual(
    u: &SlabState,
    mesh: &MeshSpec,
    model: &ModelParams,
    mode: Mode,
    ic: &TimeSlice,
) -> Result<Vec<f64>, AssemblyError> {
    SlabProblem::new(mesh, model, mode, 0.0)?.residual(&u.values, ic)
}

pub fn form_jacobian(
    u: &SlabState,
    mesh: &MeshSpec,
    model: &ModelParams,
    mode: Mode,
    ic: &TimeSlice,
) -> Result<(SparsityPattern, SparseJacobian), AssemblyError> {
    let p = SlabProblem::new(mesh, model, mode, 0.0)?;
    let j = p.jacobian(&u.values, ic)?;
    Ok((p.pattern, j))
}
