//! Dense continuous Lyapunov solver `A X + X Aᵀ + Q = 0` (Bartels–Stewart).
//!
//! `A` is reduced to real Schur form `A = U T Uᵀ`; the transformed equation
//! `T Y + Y Tᵀ = -Uᵀ Q U` is swept block by block from the bottom-right
//! corner, each diagonal block pair being a Sylvester system of order ≤ 4.

use nalgebra::linalg::Schur;
use nalgebra::DMatrix;

use crate::error::{invalid, Error, Result};

/// Diagonal blocks of a quasi-upper-triangular matrix as `(start, size)`.
fn schur_blocks(t: &DMatrix<f64>) -> Vec<(usize, usize)> {
    let n = t.nrows();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        let two = i + 1 < n && {
            let sub = t[(i + 1, i)].abs();
            sub > f64::EPSILON * (t[(i, i)].abs() + t[(i + 1, i + 1)].abs())
        };
        if two {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Solves `A X + X Aᵀ + Q = 0` for square `A` and `Q`.
pub fn solve_continuous(a: &DMatrix<f64>, q: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let n = a.nrows();
    if a.ncols() != n || q.shape() != (n, n) {
        return Err(invalid("Lyapunov operands must be square and conformable"));
    }
    if n == 0 {
        return Ok(DMatrix::zeros(0, 0));
    }
    // Rescaling A and Q by the same factor leaves X unchanged.
    let scale = a.amax().max(f64::MIN_POSITIVE);
    let a_s = a / scale;
    let q_s = q / scale;

    let schur = Schur::try_new(a_s, f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("real Schur decomposition did not converge".into()))?;
    let eig = schur.complex_eigenvalues();
    let gap = eig
        .iter()
        .flat_map(|x| eig.iter().map(move |y| (x + y).norm()))
        .fold(f64::INFINITY, f64::min);
    if gap < 1e-13 {
        return Err(Error::Numerical(format!(
            "Lyapunov operator is singular: min |λi + λj| = {:.3e}",
            gap * scale
        )));
    }
    let (u, t) = schur.unpack();
    let c = -(u.transpose() * &q_s * &u);
    let blocks = schur_blocks(&t);
    let mut y = DMatrix::<f64>::zeros(n, n);

    for bi in (0..blocks.len()).rev() {
        let (i0, p) = blocks[bi];
        for bj in (0..blocks.len()).rev() {
            let (j0, r) = blocks[bj];
            let mut rhs = c.view((i0, j0), (p, r)).clone_owned();
            let tail_i = i0 + p;
            if tail_i < n {
                rhs -= t.view((i0, tail_i), (p, n - tail_i)) * y.view((tail_i, j0), (n - tail_i, r));
            }
            let tail_j = j0 + r;
            if tail_j < n {
                rhs -= y.view((i0, tail_j), (p, n - tail_j)) * t.view((j0, tail_j), (r, n - tail_j)).transpose();
            }
            let tii = t.view((i0, i0), (p, p)).clone_owned();
            let tjj = t.view((j0, j0), (r, r)).clone_owned();
            // vec(T_ii Y + Y T_jjᵀ) = (I ⊗ T_ii + T_jj ⊗ I) vec(Y)
            let k = DMatrix::<f64>::identity(r, r).kronecker(&tii) + tjj.kronecker(&DMatrix::<f64>::identity(p, p));
            let rhs_vec = nalgebra::DVector::from_column_slice(rhs.as_slice());
            let sol = k.lu().solve(&rhs_vec).ok_or_else(|| {
                Error::Numerical("singular Sylvester block: A has eigenvalues with λi + λj = 0".into())
            })?;
            y.view_mut((i0, j0), (p, r)).copy_from_slice(sol.as_slice());
        }
    }

    let x = &u * y * u.transpose();
    Ok((&x + x.transpose()) * 0.5)
}

/// `A X + X Aᵀ + Q`.
pub fn residual(a: &DMatrix<f64>, x: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
    a * x + x * a.transpose() + q
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Vectorized oracle: (I ⊗ A + A ⊗ I) vec X = -vec Q.
    fn kronecker_solve(a: &DMatrix<f64>, q: &DMatrix<f64>) -> DMatrix<f64> {
        let n = a.nrows();
        let id = DMatrix::<f64>::identity(n, n);
        let k = id.kronecker(a) + a.kronecker(&id);
        let rhs = -nalgebra::DVector::from_column_slice(q.as_slice());
        let v = k.lu().solve(&rhs).unwrap();
        DMatrix::from_column_slice(n, n, v.as_slice())
    }

    fn random_stable(rng: &mut ChaCha8Rng, n: usize) -> DMatrix<f64> {
        let m = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
        let shift = m.complex_eigenvalues().iter().map(|z| z.re).fold(f64::MIN, f64::max);
        m - DMatrix::identity(n, n) * (shift + rng.random_range(0.05..1.0))
    }

    #[test]
    fn matches_kronecker_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [1, 2, 3, 5, 8, 14] {
            for _ in 0..5 {
                let a = random_stable(&mut rng, n);
                let b = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
                let q = &b * b.transpose();
                let x = solve_continuous(&a, &q).unwrap();
                let oracle = kronecker_solve(&a, &q);
                assert!((&x - &oracle).amax() < 1e-9 * oracle.amax().max(1.0), "n={n}");
                assert!(residual(&a, &x, &q).norm() <= 1e-11 * q.norm().max(1.0));
            }
        }
    }

    #[test]
    fn scalar_case() {
        let a = DMatrix::from_element(1, 1, -2.0);
        let q = DMatrix::from_element(1, 1, 3.0);
        assert!((solve_continuous(&a, &q).unwrap()[(0, 0)] - 0.75).abs() < 1e-15);
    }

    #[test]
    fn singular_operator_is_reported() {
        let a = DMatrix::from_row_slice(2, 2, &[0.0, 1.0, -1.0, 0.0]);
        let q = DMatrix::identity(2, 2);
        assert!(matches!(solve_continuous(&a, &q), Err(Error::Numerical(_))));
    }

    #[test]
    fn rejects_shape_mismatch() {
        assert!(solve_continuous(&DMatrix::zeros(2, 2), &DMatrix::zeros(3, 3)).is_err());
    }
}
