//! Random symplectic transforms and random physical covariance matrices,
//! used by property tests and the acceptance suite.

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Exp1, StandardNormal};

use crate::gaussian::{CovMatrix, ModeLabel};

fn gaussian<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    rng.sample(StandardNormal)
}

/// Haar-ish random passive (orthogonal symplectic) transform on `n` modes.
pub fn random_passive<R: Rng + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let z = DMatrix::from_fn(n, n, |_, _| Complex64::new(gaussian(rng), gaussian(rng)));
    let u = z.qr().q();
    DMatrix::from_fn(2 * n, 2 * n, |r, c| {
        let e = u[(r / 2, c / 2)];
        match (r % 2, c % 2) {
            (0, 0) | (1, 1) => e.re,
            (0, 1) => -e.im,
            _ => e.im,
        }
    })
}

/// Product of passive layers and single-mode squeezers with log-scale
/// `squeeze` standard deviation.
pub fn random_symplectic<R: Rng + ?Sized>(rng: &mut R, n: usize, squeeze: f64) -> DMatrix<f64> {
    let mut s = random_passive(rng, n);
    for _ in 0..2 {
        let mut diag = DMatrix::identity(2 * n, 2 * n);
        for k in 0..n {
            let r = squeeze * gaussian(rng);
            diag[(2 * k, 2 * k)] = r.exp();
            diag[(2 * k + 1, 2 * k + 1)] = (-r).exp();
        }
        s = random_passive(rng, n) * diag * s;
    }
    s
}

/// `S diag(ν) Sᵀ` with `ν - 1/2` exponential of mean `excess`.
pub fn random_physical_cm<R: Rng + ?Sized>(
    rng: &mut R,
    modes: Vec<ModeLabel>,
    squeeze: f64,
    excess: f64,
) -> CovMatrix {
    let n = modes.len();
    let nu: Vec<f64> = (0..n)
        .map(|_| 0.5 + excess * rng.sample::<f64, _>(Exp1))
        .collect();
    let s = random_symplectic(rng, n, squeeze);
    let thermal = CovMatrix::thermal(modes, &nu).expect("valid thermal state");
    thermal.transformed(&s).expect("conformable")
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian::{SymplecticForm, B1, C1, W1};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn samples_are_symplectic_and_physical() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..20 {
            let s = random_symplectic(&mut rng, 3, 0.5);
            assert!(SymplecticForm::new(3).preserved_by(&s, 1e-10));
            let v = random_physical_cm(&mut rng, vec![W1, B1, C1], 0.5, 0.3);
            assert!(v.is_physical());
        }
    }
}
