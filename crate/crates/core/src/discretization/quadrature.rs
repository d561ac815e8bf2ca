/// Gauss-Legendre rule on `[0, 1]`: `(points, weights)`.
pub fn gauss_legendre_unit(n: usize) -> (Vec<f64>, Vec<f64>) {
    match n {
        1 => (vec![0.5], vec![1.0]),
        2 => {
            let d = 0.5 / 3f64.sqrt();
            (vec![0.5 - d, 0.5 + d], vec![0.5, 0.5])
        }
        3 => {
            let d = 0.5 * (0.6f64).sqrt();
            (vec![0.5 - d, 0.5, 0.5 + d], vec![5.0 / 18.0, 4.0 / 9.0, 5.0 / 18.0])
        }
        4 => {
            let a = (3.0 / 7.0 - 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let b = (3.0 / 7.0 + 2.0 / 7.0 * (1.2f64).sqrt()).sqrt();
            let wa = (18.0 + 30f64.sqrt()) / 36.0;
            let wb = (18.0 - 30f64.sqrt()) / 36.0;
            (
                vec![0.5 - 0.5 * b, 0.5 - 0.5 * a, 0.5 + 0.5 * a, 0.5 + 0.5 * b],
                vec![0.5 * wb, 0.5 * wa, 0.5 * wa, 0.5 * wb],
            )
        }
        _ => panic!("gauss_legendre_unit supports 1..=4 points, got {n}"),
    }
}

/// One point of a tensor-product rule on the unit cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadPoint {
    pub xi: f64,
    pub tau: f64,
    pub zeta: f64,
    /// Weight on the unit cell (sums to 1).
    pub weight: f64,
}

/// Tensor-product Gauss rule with `n` points per direction over `(xi, tau[, zeta])`.
pub fn tensor_rule(n: usize, with_zeta: bool) -> Vec<QuadPoint> {
    let (p, w) = gauss_legendre_unit(n);
    let mut out = Vec::new();
    let nz = if with_zeta { n } else { 1 };
    for kz in 0..nz {
        let (zeta, wz) = if with_zeta { (p[kz], w[kz]) } else { (0.0, 1.0) };
        for kt in 0..n {
            for kx in 0..n {
                out.push(QuadPoint { xi: p[kx], tau: p[kt], zeta, weight: w[kx] * w[kt] * wz });
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exact_for_polynomials_up_to_degree_2n_minus_1() {
        for n in 1..=4 {
            let (p, w) = gauss_legendre_unit(n);
            for deg in 0..(2 * n) {
                let q: f64 = p.iter().zip(&w).map(|(x, w)| w * x.powi(deg as i32)).sum();
                assert!((q - 1.0 / (deg as f64 + 1.0)).abs() < 1e-14, "n={n} deg={deg}");
            }
        }
    }

    #[test]
    fn tensor_weights_sum_to_one() {
        for with_zeta in [false, true] {
            let r = tensor_rule(3, with_zeta);
            assert_eq!(r.len(), if with_zeta { 27 } else { 9 });
            let s: f64 = r.iter().map(|q| q.weight).sum();
            assert!((s - 1.0).abs() < 1e-15);
        }
    }
}
