//! Dense hermitian eigendecomposition helpers.
//!
//! The library-provided symmetric QR iteration can stall on matrices with
//! exactly repeated or zero entries in resonant patterns (rank-one 0/1
//! matrices are a reliable trigger), returning NaN eigenvalues.  Conjugating
//! by a fixed dense unitary leaves the spectrum unchanged and breaks the
//! pattern, so the fallback here retries under a deterministic Fourier-type
//! scramble.

use nalgebra::DMatrix;
use num_complex::Complex64 as C64;

/// Eigenvalues (unsorted) and eigenvector columns of the hermitian part of
/// `mat`.
pub fn hermitian_eigen(mat: &DMatrix<C64>) -> (Vec<f64>, DMatrix<C64>) {
    let h = (mat + mat.adjoint()).scale(0.5);
    let n = h.nrows();
    if n == 0 {
        return (Vec::new(), h);
    }
    let eig = h.clone().symmetric_eigen();
    if eig.eigenvalues.iter().all(|x| x.is_finite()) {
        return (eig.eigenvalues.iter().copied().collect(), eig.eigenvectors);
    }
    for attempt in 1..=2 {
        let q = scrambler(n, attempt);
        let scrambled = &q * &h * q.adjoint();
        let eig = scrambled.symmetric_eigen();
        if eig.eigenvalues.iter().all(|x| x.is_finite()) {
            let vectors = q.adjoint() * eig.eigenvectors;
            return (eig.eigenvalues.iter().copied().collect(), vectors);
        }
    }
    panic!("hermitian eigendecomposition failed to converge after scrambling");
}

/// Ascending eigenvalues of the hermitian part.
pub fn hermitian_eigenvalues(mat: &DMatrix<C64>) -> Vec<f64> {
    let (mut vals, _) = hermitian_eigen(mat);
    vals.sort_by(|a, b| a.partial_cmp(b).expect("finite eigenvalues"));
    vals
}

/// Discrete-Fourier unitary with an `attempt`-dependent diagonal phase ramp.
fn scrambler(n: usize, attempt: u32) -> DMatrix<C64> {
    let norm = 1.0 / (n as f64).sqrt();
    let step = 2.0 * std::f64::consts::PI / n as f64;
    let ramp = 0.37 * attempt as f64;
    DMatrix::from_fn(n, n, |r, c| {
        let angle = step * (r * c % n) as f64 + ramp * r as f64;
        C64::new(angle.cos(), angle.sin()) * norm
    })
}

/// In-place hermitian Cholesky factorization that fails on a non-positive
/// pivot.  (A generic complex-field factorization happily takes square
/// roots of negative pivots, so positivity must be checked explicitly.)
/// Consumes the lower triangle of `a`.
pub fn cholesky_psd_check(a: &mut DMatrix<C64>) -> bool {
    let n = a.nrows();
    for j in 0..n {
        let pivot = a[(j, j)].re;
        if !(pivot > 0.0) {
            return false;
        }
        let root = pivot.sqrt();
        for i in j + 1..n {
            a[(i, j)] /= C64::new(root, 0.0);
        }
        for k in j + 1..n {
            let ljk = a[(k, j)];
            for i in k..n {
                let lij = a[(i, j)];
                a[(i, k)] -= lij * ljk.conj();
            }
        }
    }
    true
}

/// Spectral square root of a PSD matrix (negative round-off eigenvalues are
/// clipped).
pub fn psd_sqrt(mat: &DMatrix<C64>) -> DMatrix<C64> {
    spectral_map(mat, |lam| lam.max(0.0).sqrt())
}

/// Spectral inverse square root on the support of a PSD matrix; eigenvalues
/// below `cutoff` are treated as zero.
pub fn psd_inv_sqrt(mat: &DMatrix<C64>, cutoff: f64) -> DMatrix<C64> {
    spectral_map(mat, |lam| if lam > cutoff { 1.0 / lam.sqrt() } else { 0.0 })
}

fn spectral_map(mat: &DMatrix<C64>, f: impl Fn(f64) -> f64) -> DMatrix<C64> {
    let (vals, vecs) = hermitian_eigen(mat);
    let n = mat.nrows();
    let mut out = DMatrix::<C64>::zeros(n, n);
    for k in 0..n {
        let w = f(vals[k]);
        if w != 0.0 {
            let col = vecs.column(k);
            out += col * col.adjoint() * C64::new(w, 0.0);
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rank_one_zero_one_matrix_gets_finite_eigenvalues() {
        // the structure that stalls the plain QR iteration
        let n = 64;
        let mut v = DMatrix::<C64>::zeros(n, 1);
        for k in [0usize, 9, 18, 27, 36, 45, 54, 63] {
            v[(k, 0)] = C64::new(1.0, 0.0);
        }
        let m = &v * v.adjoint();
        let vals = hermitian_eigenvalues(&m);
        assert!(vals.iter().all(|x| x.is_finite()));
        assert!((vals.last().unwrap() - 8.0).abs() < 1e-9);
        assert!(vals[..n - 1].iter().all(|x| x.abs() < 1e-9));
    }

    #[test]
    fn cholesky_check_accepts_pd_and_rejects_indefinite() {
        let mut pd = DMatrix::<C64>::identity(3, 3) * C64::new(2.0, 0.0);
        pd[(0, 1)] = C64::new(0.3, 0.4);
        pd[(1, 0)] = C64::new(0.3, -0.4);
        assert!(cholesky_psd_check(&mut pd.clone()));
        let mut indef = DMatrix::<C64>::identity(2, 2);
        indef[(1, 1)] = C64::new(-1.0, 0.0);
        assert!(!cholesky_psd_check(&mut indef));
    }

    #[test]
    fn sqrt_squares_back() {
        let n = 6;
        let g = DMatrix::<C64>::from_fn(n, n, |r, c| {
            C64::new((r * 7 + c * 3) as f64 * 0.1 - 1.0, (r as f64 - c as f64) * 0.2)
        });
        let psd = &g * g.adjoint() + DMatrix::<C64>::identity(n, n) * C64::new(0.1, 0.0);
        let root = psd_sqrt(&psd);
        assert!((&root * &root - &psd).norm() < 1e-9);
        let inv_root = psd_inv_sqrt(&psd, 1e-12);
        let should_be_id = &inv_root * &psd * &inv_root;
        assert!((should_be_id - DMatrix::<C64>::identity(n, n)).norm() < 1e-8);
    }
}
