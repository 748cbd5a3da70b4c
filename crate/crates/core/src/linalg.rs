//! Small dense symmetric-matrix helpers (n ≤ 3).

use nalgebra::{DMatrix, Matrix3, SymmetricEigen};
use rand::RngExt;
use rand_distr::StandardNormal;

/// Symmetric n×n matrix.
pub type SymMat = DMatrix<f64>;

pub fn zeros(n: usize) -> SymMat {
    DMatrix::zeros(n, n)
}

pub fn identity(n: usize) -> SymMat {
    DMatrix::identity(n, n)
}

pub fn symmetrize(m: &SymMat) -> SymMat {
    (m + m.transpose()) * 0.5
}

/// Eigenvalues in ascending order. Closed forms for n ≤ 2 avoid allocation in hot loops.
pub fn eigenvalues(m: &SymMat) -> [f64; 3] {
    let mut out = [0.0; 3];
    let n = m.nrows();
    match n {
        0 => {}
        1 => out[0] = m[(0, 0)],
        2 => {
            let (a, b, d) = (m[(0, 0)], 0.5 * (m[(0, 1)] + m[(1, 0)]), m[(1, 1)]);
            let mean = 0.5 * (a + d);
            let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
            out[0] = mean - rad;
            out[1] = mean + rad;
        }
        3 => {
            let s = Matrix3::from_fn(|i, j| 0.5 * (m[(i, j)] + m[(j, i)]));
            let mut ev = s.symmetric_eigenvalues();
            ev.as_mut_slice().sort_by(|x, y| x.total_cmp(y));
            out.copy_from_slice(ev.as_slice());
        }
        _ => panic!("dimension {n} unsupported"),
    }
    out
}

pub fn min_eigenvalue(m: &SymMat) -> f64 {
    eigenvalues(m)[0]
}

pub fn max_eigenvalue(m: &SymMat) -> f64 {
    eigenvalues(m)[m.nrows().max(1) - 1]
}

/// Spectral norm of a symmetric matrix.
pub fn spectral_norm(m: &SymMat) -> f64 {
    let n = m.nrows();
    if n == 0 {
        return 0.0;
    }
    let ev = eigenvalues(m);
    ev[0].abs().max(ev[n - 1].abs())
}

/// Random orthogonal matrix from the QR factorization of a Gaussian matrix.
pub fn random_orthogonal<R: RngExt + ?Sized>(rng: &mut R, n: usize) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.sample::<f64, _>(StandardNormal));
    g.qr().q()
}

/// Q diag(ev) Qᵀ with Q random orthogonal.
pub fn with_spectrum<R: RngExt + ?Sized>(rng: &mut R, ev: &[f64]) -> SymMat {
    let n = ev.len();
    let q = random_orthogonal(rng, n);
    let d = DMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(ev));
    symmetrize(&(&q * d * q.transpose()))
}

/// Random symmetric matrix with spectral norm at most `radius`.
pub fn random_symmetric<R: RngExt + ?Sized>(rng: &mut R, n: usize, radius: f64) -> SymMat {
    let ev: Vec<f64> = (0..n).map(|_| rng.random_range(-radius..=radius)).collect();
    with_spectrum(rng, &ev)
}

/// Random positive semidefinite matrix with spectral norm at most `radius`.
pub fn random_psd<R: RngExt + ?Sized>(rng: &mut R, n: usize, radius: f64) -> SymMat {
    let ev: Vec<f64> = (0..n).map(|_| rng.random_range(0.0..=radius)).collect();
    with_spectrum(rng, &ev)
}

/// Scale `m` down so that its spectral norm is at most `bound`.
pub fn clamp_norm(m: &SymMat, bound: f64) -> (SymMat, bool) {
    let norm = spectral_norm(m);
    if norm <= bound || !bound.is_finite() {
        (m.clone(), false)
    } else {
        (m * (bound / norm), true)
    }
}

/// Full eigendecomposition for the rare places that need vectors.
pub fn eigen(m: &SymMat) -> SymmetricEigen<f64, nalgebra::Dyn> {
    symmetrize(m).symmetric_eigen()
}

pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn closed_form_eigenvalues_match_nalgebra() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for n in 1..=3 {
            for _ in 0..50 {
                let m = random_symmetric(&mut rng, n, 2.0);
                let mut reference: Vec<f64> = m.clone().symmetric_eigen().eigenvalues.iter().copied().collect();
                reference.sort_by(|a, b| a.total_cmp(b));
                let ev = eigenvalues(&m);
                for i in 0..n {
                    assert!((ev[i] - reference[i]).abs() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn psd_samples_are_psd() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..20 {
            let m = random_psd(&mut rng, 3, 0.5);
            assert!(min_eigenvalue(&m) > -1e-12);
            assert!(spectral_norm(&m) <= 0.5 + 1e-12);
        }
    }

    #[test]
    fn clamp_reduces_norm() {
        let m = identity(2) * 3.0;
        let (c, flagged) = clamp_norm(&m, 1.0);
        assert!(flagged);
        assert!((spectral_norm(&c) - 1.0).abs() < 1e-14);
    }
}
