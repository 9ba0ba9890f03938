//! Dense complex linear-algebra kernels built on `nalgebra`.

use nalgebra::{Complex, DMatrix, DVector, Schur, SVD};

use crate::error::{Error, Result};

pub type C64 = Complex<f64>;

/// Eigenvalues and unit eigenvectors (columns) of a diagonalizable matrix.
#[derive(Debug, Clone)]
pub struct EigenDecomposition {
    pub values: DVector<C64>,
    pub vectors: DMatrix<C64>,
}

pub fn complexify(m: &DMatrix<f64>) -> DMatrix<C64> {
    m.map(|x| C64::new(x, 0.0))
}

fn iteration_cap(n: usize) -> usize {
    200 * n.max(10)
}

/// All eigenvalues of a real matrix via the real Schur form; complex
/// eigenvalues come out in exact conjugate pairs.
pub fn real_eigenvalues(m: &DMatrix<f64>) -> Result<DVector<C64>> {
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, iteration_cap(n))
        .ok_or_else(|| Error::Numerical(format!("real Schur iteration did not converge ({n}x{n})")))?;
    Ok(schur.complex_eigenvalues())
}

/// Full eigendecomposition through the complex Schur form `A = Q T Qᴴ`,
/// with eigenvectors of `T` obtained by back substitution.
pub fn eigen_decomposition(m: &DMatrix<C64>) -> Result<EigenDecomposition> {
    let n = m.nrows();
    let schur = Schur::try_new(m.clone(), f64::EPSILON, iteration_cap(n))
        .ok_or_else(|| Error::Numerical(format!("complex Schur iteration did not converge ({n}x{n})")))?;
    let (q, t) = schur.unpack();
    let scale = t.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    let small = f64::EPSILON * scale;
    let mut y = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let lambda = t[(k, k)];
        y[(k, k)] = C64::new(1.0, 0.0);
        for j in (0..k).rev() {
            let mut s = C64::new(0.0, 0.0);
            for l in (j + 1)..=k {
                s += t[(j, l)] * y[(l, k)];
            }
            let mut denom = t[(j, j)] - lambda;
            if denom.norm() < small {
                denom = C64::new(small, 0.0);
            }
            y[(j, k)] = -s / denom;
        }
    }
    let mut vectors = q * y;
    for mut col in vectors.column_iter_mut() {
        let norm = col.norm();
        col /= C64::new(norm, 0.0);
    }
    let values = DVector::from_fn(n, |i, _| t[(i, i)]);
    Ok(EigenDecomposition { values, vectors })
}

/// Singular values, largest first.
pub fn singular_values(m: &DMatrix<C64>) -> Result<DVector<f64>> {
    let n = m.nrows().max(m.ncols());
    let svd = SVD::try_new(m.clone(), false, false, f64::EPSILON, iteration_cap(n))
        .ok_or_else(|| Error::Numerical("SVD iteration did not converge".into()))?;
    let mut values = svd.singular_values;
    values.as_mut_slice().sort_by(|a, b| b.total_cmp(a));
    Ok(values)
}

/// 2-norm condition number `σ_max/σ_min` (infinite when singular).
pub fn condition_number(m: &DMatrix<C64>) -> Result<f64> {
    let s = singular_values(m)?;
    let (hi, lo) = (s[0], s[s.len() - 1]);
    Ok(if lo == 0.0 { f64::INFINITY } else { hi / lo })
}

/// Smallest singular value by inverse iteration on `AᴴA`; used only when
/// the dense SVD is too large.
pub fn smallest_singular_value_iterative(m: &DMatrix<C64>, tol: f64, max_iter: usize) -> Result<f64> {
    let n = m.nrows();
    let lu = m.clone().lu();
    let lu_h = m.adjoint().lu();
    let mut x = DVector::from_fn(n, |i, _| C64::new(1.0 + (i % 7) as f64 * 0.1, (i % 3) as f64 * 0.05));
    x /= C64::new(x.norm(), 0.0);
    let mut estimate = f64::NAN;
    for _ in 0..max_iter {
        let w = lu_h
            .solve(&x)
            .ok_or_else(|| Error::Numerical("singular matrix in inverse iteration".into()))?;
        let y = lu
            .solve(&w)
            .ok_or_else(|| Error::Numerical("singular matrix in inverse iteration".into()))?;
        let growth = y.norm();
        if !growth.is_finite() || growth == 0.0 {
            return Err(Error::Numerical("inverse iteration broke down".into()));
        }
        let next = 1.0 / growth.sqrt();
        x = y / C64::new(growth, 0.0);
        if (next - estimate).abs() <= tol * next {
            return Ok(next);
        }
        estimate = next;
    }
    Err(Error::Numerical(format!(
        "inverse iteration for the smallest singular value did not reach {tol:e} in {max_iter} steps"
    )))
}

/// LU solve followed by iterative refinement. Returns the solution and the
/// final relative residual `‖b − Ax‖/‖b‖`.
pub fn solve_refined(a: &DMatrix<C64>, b: &DVector<C64>, sweeps: usize) -> Result<(DVector<C64>, f64)> {
    let lu = a.clone().lu();
    let mut x = lu
        .solve(b)
        .ok_or_else(|| Error::Numerical("LU factorization is singular".into()))?;
    let scale = b.norm();
    if scale == 0.0 {
        return Ok((x, 0.0));
    }
    let mut residual = b - a * &x;
    for _ in 0..sweeps {
        if residual.norm() <= f64::EPSILON * scale {
            break;
        }
        if let Some(dx) = lu.solve(&residual) {
            x += dx;
        }
        residual = b - a * &x;
    }
    Ok((x, residual.norm() / scale))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sample_matrix(n: usize) -> DMatrix<C64> {
        DMatrix::from_fn(n, n, |i, j| {
            let x = ((i * 7 + j * 13) % 17) as f64 / 17.0 - 0.5;
            let y = ((i * 5 + j * 3) % 11) as f64 / 11.0 - 0.5;
            C64::new(x + if i == j { 2.0 } else { 0.0 }, y)
        })
    }

    #[test]
    fn eigenpairs_satisfy_definition() {
        let a = sample_matrix(24);
        let e = eigen_decomposition(&a).unwrap();
        for k in 0..24 {
            let v = e.vectors.column(k);
            let r = &a * v - v * e.values[k];
            assert!(r.norm() < 1e-11, "residual {}", r.norm());
        }
    }

    #[test]
    fn real_schur_pairs_conjugates() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let ev = real_eigenvalues(&a).unwrap();
        assert!((ev[0] - ev[1].conj()).norm() < 1e-15);
        assert!((ev[0].im.abs() - 1.0).abs() < 1e-14);
    }

    #[test]
    fn iterative_sigma_min_agrees_with_svd() {
        let a = sample_matrix(30);
        let dense = singular_values(&a).unwrap();
        let it = smallest_singular_value_iterative(&a, 1e-13, 500).unwrap();
        assert!((it - dense[29]).abs() < 1e-9 * dense[29]);
    }

    #[test]
    fn refined_solve_residual() {
        let a = sample_matrix(20);
        let b = DVector::from_fn(20, |i, _| C64::new(i as f64, 1.0));
        let (x, rel) = solve_refined(&a, &b, 3).unwrap();
        assert!(rel < 1e-14);
        assert!((&a * x - b).norm() < 1e-12);
    }
}
