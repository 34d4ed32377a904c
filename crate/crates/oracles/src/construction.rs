//! Brute-force evaluation of the common-shock construction by conditioning
//! on the shock time and integrating numerically.

use nalgebra::{DMatrix, DVector};

use crate::{expm_series, integrate, integrate_to_infinity};

type Matrix = DMatrix<f64>;
type Vector = DVector<f64>;

/// The common-shock construction given by its raw parameters: initial law
/// `alpha`, pre-shock subintensity `t`, shock exit rates `u`, post-shock
/// subintensities `q` and time scales `a`.
pub struct Construction {
    pub alpha: Vector,
    pub t: Matrix,
    pub u: Matrix,
    pub q: [Matrix; 2],
    pub exit: [Vector; 2],
    pub a: [f64; 2],
}

impl Construction {
    pub fn new(alpha: Vector, t: Matrix, u: Matrix, q1: Matrix, q2: Matrix, a1: f64, a2: f64) -> Self {
        let exit = |q: &Matrix| -(q * Vector::from_element(q.ncols(), 1.0));
        Construction {
            alpha,
            t,
            u,
            exit: [exit(&q1), exit(&q2)],
            q: [q1, q2],
            a: [a1, a2],
        }
    }

    pub fn p1(&self) -> usize {
        self.u.ncols()
    }

    /// `alpha e^{Tt} u_k` for every k.
    pub fn shock_defective(&self, t: f64) -> Vector {
        self.u.tr_mul(&expm_series(&(&self.t * t)).tr_mul(&self.alpha))
    }

    /// Residual densities `e_k e^{Q y} q` for every k.
    pub fn residual_pdf(&self, i: usize, y: f64) -> Vector {
        expm_series(&(&self.q[i] * y)) * &self.exit[i]
    }

    /// Residual survival functions `e_k e^{Q y} 1` for every k.
    pub fn residual_sf(&self, i: usize, y: f64) -> Vector {
        expm_series(&(&self.q[i] * y)) * Vector::from_element(self.p1(), 1.0)
    }

    /// Joint density by conditioning on the shock time and integrating it out.
    pub fn joint_pdf(&self, z1: f64, z2: f64) -> f64 {
        let top = (z1 / self.a[0]).min(z2 / self.a[1]);
        if top <= 0.0 {
            return 0.0;
        }
        integrate(
            |t| {
                let g = self.shock_defective(t);
                let f1 = self.residual_pdf(0, z1 - self.a[0] * t);
                let f2 = self.residual_pdf(1, z2 - self.a[1] * t);
                (0..self.p1()).map(|k| g[k] * f1[k] * f2[k]).sum()
            },
            0.0,
            top,
            1e-15,
            1e-13,
        )
    }

    /// Joint distribution function by the same conditioning argument.
    pub fn joint_cdf(&self, z1: f64, z2: f64) -> f64 {
        let top = (z1 / self.a[0]).min(z2 / self.a[1]);
        if top <= 0.0 {
            return 0.0;
        }
        integrate(
            |t| {
                let g = self.shock_defective(t);
                let s1 = self.residual_sf(0, z1 - self.a[0] * t);
                let s2 = self.residual_sf(1, z2 - self.a[1] * t);
                (0..self.p1()).map(|k| g[k] * (1.0 - s1[k]) * (1.0 - s2[k])).sum()
            },
            0.0,
            top,
            1e-15,
            1e-13,
        )
    }

    /// `E[tau^n0 e^{-θ0 tau} 1{tau>y0} · …]` by nested three-dimensional
    /// adaptive quadrature over `(tau, resid1, resid2)`.
    pub fn master_by_quadrature(&self, n: [u32; 3], theta: [f64; 3], y: [f64; 3], rel: f64) -> f64 {
        let p1 = self.p1();
        // Far out a negative tilt overflows while the density underflows;
        // a zero density must stay zero rather than become inf · 0.
        let w = |x: f64, j: usize, v: f64| if v == 0.0 { 0.0 } else { v * x.powi(n[j] as i32) * (-theta[j] * x).exp() };
        integrate_to_infinity(
            |t| {
                let g = self.shock_defective(t).map(|v| w(t, 0, v));
                integrate_to_infinity(
                    |y1| {
                        let f1 = self.residual_pdf(0, y1).map(|v| w(y1, 1, v));
                        let gf: Vec<f64> = (0..p1).map(|k| g[k] * f1[k]).collect();
                        integrate_to_infinity(
                            |y2| {
                                let f2 = self.residual_pdf(1, y2);
                                w(y2, 2, (0..p1).map(|k| gf[k] * f2[k]).sum::<f64>())
                            },
                            y[2],
                            1e-14,
                            rel,
                        )
                    },
                    y[1],
                    1e-14,
                    rel,
                )
            },
            y[0],
            1e-14,
            rel,
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exponential_case_in_closed_form() {
        // tau, resid1, resid2 all Exp(1): f(z1, z2) = e^{-z1-z2} (e^{min} − 1).
        let one = |v: f64| Matrix::from_element(1, 1, v);
        let c = Construction::new(Vector::from_element(1, 1.0), one(-1.0), one(1.0), one(-1.0), one(-1.0), 1.0, 1.0);
        for (z1, z2) in [(0.5, 2.0), (3.0, 1.0)] {
            let want = (-z1 - z2 as f64).exp() * (f64::min(z1, z2).exp() - 1.0);
            assert!((c.joint_pdf(z1, z2) - want).abs() < 1e-13);
        }
        // E[tau resid1 resid2] = 1.
        let m = c.master_by_quadrature([1, 1, 1], [0.0; 3], [0.0; 3], 1e-8);
        assert!((m - 1.0).abs() < 1e-7);
    }
}
