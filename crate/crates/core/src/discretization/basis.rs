//! Bilinear (1+1) and trilinear (2+1) nodal basis on the unit cell.

use super::{DiscretizationError, Dims};

/// Reference coordinates of local node `k` (0-based): `(xi, tau, zeta)`.
#[inline]
pub(crate) fn node_ref_coords(k: usize) -> (f64, f64, f64) {
    let m = k % 4;
    let xi = if m == 1 || m == 2 { 1.0 } else { 0.0 };
    let tau = if m >= 2 { 1.0 } else { 0.0 };
    let zeta = if k >= 4 { 1.0 } else { 0.0 };
    (xi, tau, zeta)
}

#[inline]
fn lin(node: f64, s: f64) -> f64 {
    if node == 0.0 {
        1.0 - s
    } else {
        s
    }
}

#[inline]
fn dlin(node: f64) -> f64 {
    if node == 0.0 {
        -1.0
    } else {
        1.0
    }
}

/// Shape function `k` (0-based). In 1+1 `zeta` is ignored.
#[inline]
pub(crate) fn shape(dims: Dims, k: usize, xi: f64, tau: f64, zeta: f64) -> f64 {
    let (a, b, c) = node_ref_coords(k);
    let v = lin(a, xi) * lin(b, tau);
    match dims {
        Dims::D1 => v,
        Dims::D2 => v * lin(c, zeta),
    }
}

/// Reference-coordinate derivatives `(d/dxi, d/dtau, d/dzeta)` of shape `k`.
#[inline]
pub(crate) fn shape_ref_grad(dims: Dims, k: usize, xi: f64, tau: f64, zeta: f64) -> [f64; 3] {
    let (a, b, c) = node_ref_coords(k);
    let (fx, ft) = (lin(a, xi), lin(b, tau));
    match dims {
        Dims::D1 => [dlin(a) * ft, fx * dlin(b), 0.0],
        Dims::D2 => {
            let fz = lin(c, zeta);
            [dlin(a) * ft * fz, fx * dlin(b) * fz, fx * ft * dlin(c)]
        }
    }
}

fn check_index(dims: Dims, i: usize) -> Result<usize, DiscretizationError> {
    let n = dims.nodes_per_element();
    if (1..=n).contains(&i) {
        Ok(i - 1)
    } else {
        Err(DiscretizationError::BasisIndex { index: i, count: n })
    }
}

/// Value of basis function `Psi_i` (1-based) at reference point `(xi, tau[, zeta])`.
pub fn basis_eval(dims: Dims, i: usize, xi: f64, tau: f64, zeta: f64) -> Result<f64, DiscretizationError> {
    Ok(shape(dims, check_index(dims, i)?, xi, tau, zeta))
}

/// Physical gradient of a basis function.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BasisGrad {
    pub dx: f64,
    pub dt: f64,
    /// Zero in 1+1.
    pub dy: f64,
}

/// Physical-coordinate gradient of `Psi_i` (1-based) through `xi = x/h_x`, `tau = t/h_t`, `zeta = y/h_y`.
#[allow(clippy::too_many_arguments)]
pub fn basis_grad(
    dims: Dims,
    i: usize,
    xi: f64,
    tau: f64,
    zeta: f64,
    h_x: f64,
    h_t: f64,
    h_y: f64,
) -> Result<BasisGrad, DiscretizationError> {
    let g = shape_ref_grad(dims, check_index(dims, i)?, xi, tau, zeta);
    Ok(BasisGrad {
        dx: g[0] / h_x,
        dt: g[1] / h_t,
        dy: if dims == Dims::D2 { g[2] / h_y } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn nodal_values() {
        assert_eq!(basis_eval(Dims::D1, 1, 0.0, 0.0, 0.0).unwrap(), 1.0);
        assert_eq!(basis_eval(Dims::D1, 1, 1.0, 1.0, 0.0).unwrap(), 0.0);
        assert_eq!(basis_eval(Dims::D2, 7, 1.0, 1.0, 1.0).unwrap(), 1.0);
        assert!(basis_eval(Dims::D1, 5, 0.0, 0.0, 0.0).is_err());
        assert!(basis_eval(Dims::D2, 0, 0.0, 0.0, 0.0).is_err());
        let s: f64 = (1..=4).map(|i| basis_eval(Dims::D1, i, 0.3, 0.7, 0.0).unwrap()).sum();
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn main_text_formulas() {
        let (xi, tau, zeta) = (0.2, 0.9, 0.35);
        let f1 = [(1.0 - xi) * (1.0 - tau), xi * (1.0 - tau), xi * tau, (1.0 - xi) * tau];
        for (i, f) in f1.iter().enumerate() {
            assert_eq!(basis_eval(Dims::D1, i + 1, xi, tau, 0.0).unwrap(), *f);
            assert!((basis_eval(Dims::D2, i + 1, xi, tau, zeta).unwrap() - f * (1.0 - zeta)).abs() < 1e-15);
            assert!((basis_eval(Dims::D2, i + 5, xi, tau, zeta).unwrap() - f * zeta).abs() < 1e-15);
        }
    }

    #[test]
    fn gradients() {
        let g = basis_grad(Dims::D1, 1, 0.0, 0.0, 0.0, 0.01, 0.02, 1.0).unwrap();
        assert!((g.dx + 100.0).abs() < 1e-12 && (g.dt + 50.0).abs() < 1e-12);
        let g = basis_grad(Dims::D1, 3, 1.0, 1.0, 0.0, 0.5, 0.25, 1.0).unwrap();
        assert_eq!((g.dx, g.dt), (2.0, 4.0));
    }

    #[test]
    fn delta_property_and_partition_of_unity_at_random_points() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for dims in [Dims::D1, Dims::D2] {
            let n = dims.nodes_per_element();
            for j in 0..n {
                let (a, b, c) = node_ref_coords(j);
                for i in 1..=n {
                    let v = basis_eval(dims, i, a, b, c).unwrap();
                    assert_eq!(v, if i - 1 == j { 1.0 } else { 0.0 });
                }
            }
            for _ in 0..1000 {
                let (xi, tau, zeta) = (rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
                let mut s = 0.0;
                let mut gs = [0.0; 3];
                for i in 1..=n {
                    s += basis_eval(dims, i, xi, tau, zeta).unwrap();
                    let g = basis_grad(dims, i, xi, tau, zeta, 0.1, 0.2, 0.3).unwrap();
                    gs[0] += g.dx;
                    gs[1] += g.dt;
                    gs[2] += g.dy;
                }
                assert!((s - 1.0).abs() < 1e-14);
                assert!(gs.iter().all(|g| g.abs() < 1e-12), "{gs:?}");
            }
        }
    }

    #[test]
    fn gradient_matches_finite_difference() {
        let h = 1e-6;
        let (hx, ht, hy) = (0.3, 0.7, 0.45);
        let (xi, tau, zeta) = (0.31, 0.62, 0.17);
        for i in 1..=8 {
            let g = basis_grad(Dims::D2, i, xi, tau, zeta, hx, ht, hy).unwrap();
            let f = |a: f64, b: f64, c: f64| basis_eval(Dims::D2, i, a, b, c).unwrap();
            let dx = (f(xi + h, tau, zeta) - f(xi - h, tau, zeta)) / (2.0 * h * hx);
            let dt = (f(xi, tau + h, zeta) - f(xi, tau - h, zeta)) / (2.0 * h * ht);
            let dy = (f(xi, tau, zeta + h) - f(xi, tau, zeta - h)) / (2.0 * h * hy);
            assert!((g.dx - dx).abs() < 1e-8 && (g.dt - dt).abs() < 1e-8 && (g.dy - dy).abs() < 1e-8);
        }
    }
}
