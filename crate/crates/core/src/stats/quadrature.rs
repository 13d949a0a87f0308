//! Gauss-Hermite rules for expectations over standard normal variables.

use crate::error::{Error, Result};

pub const MAX_NODES: usize = 64;

/// Nodes and weights for `E f(Z)`, `Z ~ N(0, 1)`; weights sum to one.
///
/// Roots of the physicists' Hermite polynomial are located by Newton
/// iteration on the orthonormal recurrence, then rescaled by `√2` and `1/√π`.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussHermite {
    pub nodes: Vec<f64>,
    pub weights: Vec<f64>,
}

impl GaussHermite {
    pub fn new(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("quadrature.nodes", "need at least one node"));
        }
        if n > MAX_NODES {
            return Err(Error::CapExceeded {
                what: "quadrature nodes per dimension",
                value: n,
                cap: MAX_NODES,
            });
        }
        let pim4 = std::f64::consts::PI.powf(-0.25);
        let nf = n as f64;
        let m = n.div_ceil(2);
        let mut x = vec![0.0; n];
        let mut w = vec![0.0; n];
        let mut z = 0.0f64;
        for i in 0..m {
            z = match i {
                0 => (2.0 * nf + 1.0).sqrt() - 1.85575 * (2.0 * nf + 1.0).powf(-1.0 / 6.0),
                1 => z - 1.14 * nf.powf(0.426) / z,
                2 => 1.86 * z - 0.86 * x[0],
                3 => 1.91 * z - 0.91 * x[1],
                _ => 2.0 * z - x[i - 2],
            };
            let mut pp = 0.0;
            let mut converged = false;
            for _ in 0..100 {
                let mut p1 = pim4;
                let mut p2 = 0.0;
                for j in 1..=n {
                    let p3 = p2;
                    p2 = p1;
                    let jf = j as f64;
                    p1 = z * (2.0 / jf).sqrt() * p2 - ((jf - 1.0) / jf).sqrt() * p3;
                }
                pp = (2.0 * nf).sqrt() * p2;
                let z1 = z;
                z = z1 - p1 / pp;
                if (z - z1).abs() <= 1e-15 * z.abs().max(1.0) {
                    converged = true;
                    break;
                }
            }
            if !converged {
                return Err(Error::NonFinite("Gauss-Hermite root iteration"));
            }
            x[i] = z;
            x[n - 1 - i] = -z;
            w[i] = 2.0 / (pp * pp);
            w[n - 1 - i] = w[i];
        }
        let sqrt2 = std::f64::consts::SQRT_2;
        let inv_sqrt_pi = 1.0 / std::f64::consts::PI.sqrt();
        // ascending order
        let mut nodes: Vec<f64> = x.iter().rev().map(|v| v * sqrt2).collect();
        let mut weights: Vec<f64> = w.iter().rev().map(|v| v * inv_sqrt_pi).collect();
        if n % 2 == 1 {
            nodes[n / 2] = 0.0;
        }
        // renormalize away the last ulp of drift
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|v| *v /= total);
        nodes.shrink_to_fit();
        Ok(GaussHermite { nodes, weights })
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn expect<F: Fn(f64) -> f64>(&self, f: F) -> f64 {
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(|(&x, &w)| w * f(x))
            .sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn double_factorial(k: u32) -> f64 {
        (1..=k).rev().step_by(2).map(f64::from).product()
    }

    #[test]
    fn integrates_gaussian_moments_exactly() {
        for n in [1usize, 2, 5, 10, 20, 40, 48, 64] {
            let gh = GaussHermite::new(n).unwrap();
            assert_eq!(gh.len(), n);
            assert!((gh.expect(|_| 1.0) - 1.0).abs() < 1e-14);
            // exact up to degree 2n - 1; moments E Z^{2k} = (2k - 1)!!
            for k in 0..n.min(10) as u32 {
                let deg = 2 * k;
                let exact = if deg == 0 {
                    1.0
                } else {
                    double_factorial(deg - 1)
                };
                let got = gh.expect(|x| x.powi(deg as i32));
                assert!(
                    (got - exact).abs() <= 1e-11 * exact,
                    "n={n} deg={deg}: {got} vs {exact}"
                );
                let odd = gh.expect(|x| x.powi(deg as i32 + 1));
                assert!(odd.abs() < 1e-11 * exact.max(1.0));
            }
        }
    }

    #[test]
    fn smooth_expectation() {
        // E cos(Z) = e^{-1/2}
        let gh = GaussHermite::new(40).unwrap();
        assert!((gh.expect(f64::cos) - (-0.5f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_sizes() {
        assert!(GaussHermite::new(0).is_err());
        assert!(matches!(
            GaussHermite::new(65),
            Err(Error::CapExceeded { .. })
        ));
    }
}
