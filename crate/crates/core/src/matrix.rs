//! Dense real-matrix kernels shared by every other module.
//!
//! Everything here is a pure function of its inputs. The matrix exponential
//! is the workhorse: densities, distribution functions and the augmented
//! moment formulas all reduce to exponentials of small block matrices.

use nalgebra::linalg::{Schur, LU};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

pub type Matrix = DMatrix<f64>;
pub type Vector = DVector<f64>;

/// Relative pivot threshold used by [`solve_linear`].
pub const SINGULAR_PIVOT_TOL: f64 = 1e-12;

const THETA: [f64; 5] = [
    1.495585217958292e-2,
    2.539398330063230e-1,
    9.504178996162932e-1,
    2.097847961257068e0,
    5.371920351148152e0,
];

const B3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const B5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const B7: [f64; 8] = [
    17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0,
];
const B9: [f64; 10] = [
    17643225600.0,
    8821612800.0,
    2075673600.0,
    302702400.0,
    30270240.0,
    2162160.0,
    110880.0,
    3960.0,
    90.0,
    1.0,
];
const B13: [f64; 14] = [
    64764752532480000.0,
    32382376266240000.0,
    7771770303897600.0,
    1187353796428800.0,
    129060195264000.0,
    10559470521600.0,
    670442572800.0,
    33522128640.0,
    1323241920.0,
    40840800.0,
    960960.0,
    16380.0,
    182.0,
    1.0,
];

fn require_square(a: &Matrix, what: &str) -> Result<()> {
    if a.nrows() != a.ncols() || a.nrows() == 0 {
        return Err(Error::Dimension(format!(
            "{what} must be square and non-empty, got {}x{}",
            a.nrows(),
            a.ncols()
        )));
    }
    Ok(())
}

/// Maximum absolute column sum.
pub fn norm_one(a: &Matrix) -> f64 {
    a.column_iter()
        .map(|c| c.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Maximum absolute row sum.
pub fn norm_inf(a: &Matrix) -> f64 {
    a.row_iter()
        .map(|r| r.iter().map(|x| x.abs()).sum::<f64>())
        .fold(0.0, f64::max)
}

/// Odd/even parts `(U, V)` of the degree-`b.len()-1` diagonal Padé approximant
/// for orders 3 to 9, evaluated from precomputed even powers.
fn pade_low(a: &Matrix, b: &[f64]) -> (Matrix, Matrix) {
    let n = a.nrows();
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let m = b.len() - 1;
    let mut powers = vec![ident.clone(), a2.clone()];
    while 2 * powers.len() <= m {
        let next = powers.last().unwrap() * &a2;
        powers.push(next);
    }
    let mut u = Matrix::zeros(n, n);
    let mut v = Matrix::zeros(n, n);
    for (j, p) in powers.iter().enumerate() {
        if 2 * j < b.len() {
            v += p * b[2 * j];
        }
        if 2 * j + 1 < b.len() {
            u += p * b[2 * j + 1];
        }
    }
    (a * u, v)
}

fn pade13(a: &Matrix) -> (Matrix, Matrix) {
    let n = a.nrows();
    let b = &B13;
    let ident = Matrix::identity(n, n);
    let a2 = a * a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * b[13] + &a4 * b[11] + &a2 * b[9];
    let u = a * (&a6 * inner_u + &a6 * b[7] + &a4 * b[5] + &a2 * b[3] + &ident * b[1]);
    let inner_v = &a6 * b[12] + &a4 * b[10] + &a2 * b[8];
    let v = &a6 * inner_v + &a6 * b[6] + &a4 * b[4] + &a2 * b[2] + &ident * b[0];
    (u, v)
}

/// Matrix exponential by diagonal Padé approximation with scaling and
/// squaring. Order and scaling are chosen from the 1-norm following Higham's
/// 2005 schedule (orders 3, 5, 7, 9, 13).
pub fn mat_exp(a: &Matrix) -> Result<Matrix> {
    require_square(a, "mat_exp input")?;
    if a.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("mat_exp input has non-finite entries".into()));
    }
    let norm = norm_one(a);
    let (u, v, squarings) = if norm <= THETA[0] {
        let (u, v) = pade_low(a, &B3);
        (u, v, 0)
    } else if norm <= THETA[1] {
        let (u, v) = pade_low(a, &B5);
        (u, v, 0)
    } else if norm <= THETA[2] {
        let (u, v) = pade_low(a, &B7);
        (u, v, 0)
    } else if norm <= THETA[3] {
        let (u, v) = pade_low(a, &B9);
        (u, v, 0)
    } else {
        let s = (norm / THETA[4]).log2().ceil().max(0.0) as i32;
        let scaled = a * 2f64.powi(-s);
        let (u, v) = pade13(&scaled);
        (u, v, s)
    };
    let denom = &v - &u;
    let numer = &v + &u;
    let lu = LU::new(denom);
    let mut r = lu
        .solve(&numer)
        .ok_or_else(|| Error::Numeric("Padé denominator is singular".into()))?;
    for _ in 0..squarings {
        r = &r * &r;
    }
    if r.iter().any(|x| !x.is_finite()) {
        return Err(Error::Numeric("matrix exponential overflowed".into()));
    }
    Ok(r)
}

/// Kronecker product: block `(i, j)` of the result is `a[(i, j)] * b`.
pub fn kron_product(a: &Matrix, b: &Matrix) -> Matrix {
    a.kronecker(b)
}

/// Kronecker product of two column vectors.
pub fn kron_vec(a: &Vector, b: &Vector) -> Vector {
    let mut out = Vector::zeros(a.len() * b.len());
    for (i, x) in a.iter().enumerate() {
        for (j, y) in b.iter().enumerate() {
            out[i * b.len() + j] = x * y;
        }
    }
    out
}

/// Kronecker sum `A ⊗ I + I ⊗ B`.
pub fn kron_sum(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    require_square(a, "kron_sum left operand")?;
    require_square(b, "kron_sum right operand")?;
    let ia = Matrix::identity(a.nrows(), a.nrows());
    let ib = Matrix::identity(b.nrows(), b.nrows());
    Ok(a.kronecker(&ib) + ia.kronecker(b))
}

/// `∫₀ᵘ e^{At} B e^{C(u−t)} dt`, read off the upper-right block of
/// `exp([[A, B], [0, C]]·u)`.
pub fn van_loan_integral(a: &Matrix, b: &Matrix, c: &Matrix, u: f64) -> Result<Matrix> {
    require_square(a, "Van Loan A block")?;
    require_square(c, "Van Loan C block")?;
    let (p, q) = (a.nrows(), c.nrows());
    if b.nrows() != p || b.ncols() != q {
        return Err(Error::Dimension(format!(
            "Van Loan B block must be {p}x{q}, got {}x{}",
            b.nrows(),
            b.ncols()
        )));
    }
    if !(u >= 0.0) || !u.is_finite() {
        return Err(Error::Domain(format!("Van Loan horizon must be finite and nonnegative, got {u}")));
    }
    if u == 0.0 {
        return Ok(Matrix::zeros(p, q));
    }
    Ok(van_loan_block(a, b, c, u)?.view((0, p), (p, q)).into_owned())
}

/// Full exponential of the Van Loan block matrix; callers that also need the
/// diagonal blocks use this directly.
pub(crate) fn van_loan_block(a: &Matrix, b: &Matrix, c: &Matrix, u: f64) -> Result<Matrix> {
    let (p, q) = (a.nrows(), c.nrows());
    let mut block = Matrix::zeros(p + q, p + q);
    block.view_mut((0, 0), (p, p)).copy_from(&(a * u));
    block.view_mut((0, p), (p, q)).copy_from(&(b * u));
    block.view_mut((p, p), (q, q)).copy_from(&(c * u));
    mat_exp(&block)
}

/// Solves `A X = B` by LU with partial pivoting.
///
/// A pivot smaller than `1e-12 · ‖A‖∞` is reported as singular.
pub fn solve_linear(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    require_square(a, "solve_linear coefficient matrix")?;
    if b.nrows() != a.nrows() {
        return Err(Error::Dimension(format!(
            "right-hand side has {} rows, expected {}",
            b.nrows(),
            a.nrows()
        )));
    }
    let lu = factor(a)?;
    lu.solve(b)
        .ok_or_else(|| Error::Numeric("LU solve failed after pivot check".into()))
}

/// Vector right-hand side variant of [`solve_linear`].
pub fn solve_vec(a: &Matrix, b: &Vector) -> Result<Vector> {
    require_square(a, "solve_linear coefficient matrix")?;
    if b.len() != a.nrows() {
        return Err(Error::Dimension(format!(
            "right-hand side has length {}, expected {}",
            b.len(),
            a.nrows()
        )));
    }
    let lu = factor(a)?;
    lu.solve(b)
        .ok_or_else(|| Error::Numeric("LU solve failed after pivot check".into()))
}

/// Solves `x A = b` for a row vector `x` (returned as a column vector).
pub fn solve_row(a: &Matrix, b: &Vector) -> Result<Vector> {
    solve_vec(&a.transpose(), b)
}

fn factor(a: &Matrix) -> Result<LU<f64, nalgebra::Dyn, nalgebra::Dyn>> {
    let threshold = SINGULAR_PIVOT_TOL * norm_inf(a);
    let lu = LU::new(a.clone());
    let u = lu.u();
    for (column, pivot) in u.diagonal().iter().enumerate() {
        if !(pivot.abs() >= threshold) || *pivot == 0.0 {
            return Err(Error::Singular {
                column,
                pivot: *pivot,
                threshold,
            });
        }
    }
    Ok(lu)
}

/// Largest real part over the eigenvalues of `a` (real Schur form via
/// Hessenberg reduction and shifted QR).
pub fn spectral_abscissa(a: &Matrix) -> Result<f64> {
    require_square(a, "spectral_abscissa input")?;
    let scale = norm_inf(a).max(f64::MIN_POSITIVE);
    let schur = Schur::try_new(a.clone(), f64::EPSILON * scale, 10_000)
        .ok_or_else(|| Error::Numeric("QR iteration did not converge".into()))?;
    Ok(schur
        .complex_eigenvalues()
        .iter()
        .map(|z| z.re)
        .fold(f64::NEG_INFINITY, f64::max))
}

/// `M e^{M t} 1`-style helper: returns `e^{A t} v`.
pub fn exp_times(a: &Matrix, t: f64, v: &Vector) -> Result<Vector> {
    Ok(mat_exp(&(a * t))? * v)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    fn max_abs_diff(a: &Matrix, b: &Matrix) -> f64 {
        (a - b).abs().max()
    }

    #[test]
    fn exp_of_zero_is_identity() {
        for n in 1..=8 {
            let e = mat_exp(&Matrix::zeros(n, n)).unwrap();
            assert_eq!(e, Matrix::identity(n, n));
        }
    }

    #[test]
    fn exp_of_diagonal() {
        let a = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -2.0]));
        let e = mat_exp(&a).unwrap();
        assert!(close(e[(0, 0)], (-1f64).exp(), 1e-15));
        assert!(close(e[(1, 1)], (-2f64).exp(), 1e-15));
        assert_eq!(e[(0, 1)], 0.0);
    }

    #[test]
    fn exp_of_stiff_diagonal_entry() {
        let a = Matrix::from_row_slice(2, 2, &[-16088.4190, 168.0, 0.0, -1.9]);
        let e = mat_exp(&(a * 0.5)).unwrap();
        assert!(e.iter().all(|x| x.is_finite() && *x >= -1e-14));
        assert!(close(e[(1, 1)], (-0.95f64).exp(), 1e-12));
    }

    #[test]
    fn exp_rejects_non_square() {
        assert!(matches!(mat_exp(&Matrix::zeros(2, 3)), Err(Error::Dimension(_))));
    }

    #[test]
    fn exp_reports_overflow() {
        let a = Matrix::from_element(2, 2, 500.0);
        assert!(matches!(mat_exp(&a), Err(Error::Numeric(_))));
    }

    #[test]
    fn kron_small_cases() {
        let i2 = Matrix::identity(2, 2);
        let i3 = Matrix::identity(3, 3);
        assert_eq!(kron_product(&i2, &i3), Matrix::identity(6, 6));
        let col = Matrix::from_column_slice(2, 1, &[1.0, 2.0]);
        let s = Matrix::from_element(1, 1, 3.0);
        assert_eq!(kron_product(&col, &s), Matrix::from_column_slice(2, 1, &[3.0, 6.0]));
        let z = Matrix::zeros(1, 1);
        assert_eq!(kron_sum(&z, &z).unwrap(), z);
        let d1 = Matrix::from_element(1, 1, -1.0);
        let d2 = Matrix::from_element(1, 1, -2.0);
        assert_eq!(kron_sum(&d1, &d2).unwrap(), Matrix::from_element(1, 1, -3.0));
        assert!(kron_sum(&Matrix::zeros(1, 2), &d1).is_err());
    }

    #[test]
    fn kron_vec_matches_matrix_product() {
        let a = Vector::from_vec(vec![1.0, -2.0, 0.5]);
        let b = Vector::from_vec(vec![3.0, 4.0]);
        let m = kron_product(
            &Matrix::from_column_slice(3, 1, a.as_slice()),
            &Matrix::from_column_slice(2, 1, b.as_slice()),
        );
        assert_eq!(kron_vec(&a, &b).as_slice(), m.as_slice());
    }

    #[test]
    fn van_loan_zero_horizon_and_scalar_case() {
        let a = Matrix::from_element(1, 1, -1.0);
        let b = Matrix::from_element(1, 1, 1.0);
        assert_eq!(van_loan_integral(&a, &b, &a, 0.0).unwrap(), Matrix::zeros(1, 1));
        let v = van_loan_integral(&a, &b, &a, 1.0).unwrap();
        assert!(close(v[(0, 0)], (-1f64).exp(), 1e-14));
    }

    #[test]
    fn van_loan_dimension_mismatch() {
        let a = Matrix::identity(2, 2);
        let b = Matrix::zeros(3, 2);
        assert!(matches!(van_loan_integral(&a, &b, &a, 1.0), Err(Error::Dimension(_))));
    }

    #[test]
    fn solve_identity_and_diagonal() {
        let b = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 3.0, 4.0]);
        assert_eq!(solve_linear(&Matrix::identity(2, 2), &b).unwrap(), b);
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![2.0, 4.0]));
        let x = solve_vec(&d, &Vector::from_vec(vec![2.0, 4.0])).unwrap();
        assert_eq!(x.as_slice(), &[1.0, 1.0]);
    }

    #[test]
    fn solve_detects_singularity() {
        let a = Matrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 4.0]);
        let err = solve_vec(&a, &Vector::from_vec(vec![1.0, 1.0])).unwrap_err();
        assert!(matches!(err, Error::Singular { .. }));
    }

    #[test]
    fn spectral_abscissa_small_cases() {
        let d = Matrix::from_diagonal(&Vector::from_vec(vec![-1.0, -3.0]));
        assert!(close(spectral_abscissa(&d).unwrap(), -1.0, 1e-12));
        let rot = Matrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        assert!(close(spectral_abscissa(&rot).unwrap(), 0.0, 1e-12));
        let q2 = Matrix::from_row_slice(2, 2, &[-0.5, 0.25, 0.25, -0.5]);
        assert!(close(spectral_abscissa(&q2).unwrap(), -0.25, 1e-12));
    }

    #[test]
    fn exp_of_kron_sum_factorises() {
        let a = Matrix::from_row_slice(2, 2, &[-1.3, 0.4, 0.2, -0.9]);
        let b = Matrix::from_row_slice(2, 2, &[-0.7, 0.6, 0.1, -2.1]);
        let r = 0.7;
        let lhs = mat_exp(&(kron_sum(&a, &b).unwrap() * r)).unwrap();
        let rhs = kron_product(&mat_exp(&(&a * r)).unwrap(), &mat_exp(&(&b * r)).unwrap());
        assert!(max_abs_diff(&lhs, &rhs) <= 1e-10);
    }
}
