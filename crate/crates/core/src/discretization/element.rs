//! Element matrices for the linear terms of the weak form.
//!
//! Rows index the test function, columns the trial function. `time[i][j]`
//! is the integral of `Psi_i * d_t Psi_j`.

use super::basis::{shape, shape_ref_grad};
use super::quadrature::tensor_rule;
use super::Dims;

/// Dense square matrix of size 4 or 8, row-major.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LocalMatrix {
    pub n: usize,
    pub a: [f64; 64],
}

impl LocalMatrix {
    pub fn zeros(n: usize) -> Self {
        assert!(n <= 8);
        LocalMatrix { n, a: [0.0; 64] }
    }

    fn from_rows4(scale: f64, rows: [[f64; 4]; 4]) -> Self {
        let mut m = LocalMatrix::zeros(4);
        for i in 0..4 {
            for j in 0..4 {
                m.a[i * 8 + j] = scale * rows[i][j];
            }
        }
        m
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.a[i * 8 + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.a[i * 8 + j] = v;
    }

    pub fn add(&self, other: &LocalMatrix, s: f64) -> LocalMatrix {
        assert_eq!(self.n, other.n);
        let mut out = *self;
        for (o, b) in out.a.iter_mut().zip(other.a.iter()) {
            *o += s * b;
        }
        out
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n).map(|i| (0..self.n).map(|j| self.get(i, j)).collect()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementMatrices {
    pub dims: Dims,
    pub time: LocalMatrix,
    pub space_x: LocalMatrix,
    /// Present only in 2+1.
    pub space_y: Option<LocalMatrix>,
    pub mass: LocalMatrix,
}

impl ElementMatrices {
    /// Sum of the spatial stiffness matrices.
    pub fn space(&self) -> LocalMatrix {
        match &self.space_y {
            Some(sy) => self.space_x.add(sy, 1.0),
            None => self.space_x,
        }
    }
}

/// Closed forms in 1+1, two-point Gauss quadrature (exact here) in 2+1.
/// `h_y` is ignored in 1+1.
pub fn element_matrices(dims: Dims, h_x: f64, h_t: f64, h_y: f64) -> ElementMatrices {
    match dims {
        Dims::D1 => ElementMatrices {
            dims,
            time: LocalMatrix::from_rows4(
                h_x / 12.0,
                [[-2.0, -1.0, 1.0, 2.0], [-1.0, -2.0, 2.0, 1.0], [-1.0, -2.0, 2.0, 1.0], [-2.0, -1.0, 1.0, 2.0]],
            ),
            space_x: LocalMatrix::from_rows4(
                h_t / (6.0 * h_x),
                [[2.0, -2.0, -1.0, 1.0], [-2.0, 2.0, 1.0, -1.0], [-1.0, 1.0, 2.0, -2.0], [1.0, -1.0, -2.0, 2.0]],
            ),
            space_y: None,
            mass: LocalMatrix::from_rows4(
                h_x * h_t / 36.0,
                [[4.0, 2.0, 1.0, 2.0], [2.0, 4.0, 2.0, 1.0], [1.0, 2.0, 4.0, 2.0], [2.0, 1.0, 2.0, 4.0]],
            ),
        },
        Dims::D2 => {
            let n = 8;
            let vol = h_x * h_t * h_y;
            let mut time = LocalMatrix::zeros(n);
            let mut sx = LocalMatrix::zeros(n);
            let mut sy = LocalMatrix::zeros(n);
            let mut mass = LocalMatrix::zeros(n);
            for q in tensor_rule(2, true) {
                let w = q.weight * vol;
                let vals: Vec<f64> = (0..n).map(|k| shape(dims, k, q.xi, q.tau, q.zeta)).collect();
                let grads: Vec<[f64; 3]> = (0..n).map(|k| shape_ref_grad(dims, k, q.xi, q.tau, q.zeta)).collect();
                for i in 0..n {
                    for j in 0..n {
                        time.a[i * 8 + j] += w * vals[i] * grads[j][1] / h_t;
                        sx.a[i * 8 + j] += w * grads[i][0] * grads[j][0] / (h_x * h_x);
                        sy.a[i * 8 + j] += w * grads[i][2] * grads[j][2] / (h_y * h_y);
                        mass.a[i * 8 + j] += w * vals[i] * vals[j];
                    }
                }
            }
            for m in [&mut sx, &mut sy, &mut mass] {
                for i in 0..n {
                    for j in 0..i {
                        m.a[i * 8 + j] = m.a[j * 8 + i];
                    }
                }
            }
            ElementMatrices { dims, time, space_x: sx, space_y: Some(sy), mass }
        }
    }
}
