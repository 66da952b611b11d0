//! Small complex linear-algebra helpers on top of `nalgebra`.

use nalgebra::SymmetricEigen;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::{CMatrix, CVector};

/// One circularly-symmetric complex Gaussian sample with unit total variance.
#[inline]
pub fn cn01<R: Rng + ?Sized>(rng: &mut R) -> Complex64 {
    let re: f64 = rng.sample(StandardNormal);
    let im: f64 = rng.sample(StandardNormal);
    Complex64::new(re, im) * std::f64::consts::FRAC_1_SQRT_2
}

/// `rows × cols` matrix of i.i.d. CN(0, `variance`) entries, filled column-major.
pub fn gaussian_matrix<R: Rng + ?Sized>(
    rows: usize,
    cols: usize,
    variance: f64,
    rng: &mut R,
) -> CMatrix {
    let scale = variance.sqrt();
    CMatrix::from_fn(rows, cols, |_, _| cn01(rng) * scale)
}

/// Rotates `v` so its first non-negligible component is real and positive.
pub fn normalize_phase(v: &mut CVector) {
    let peak = v.iter().map(|z| z.norm()).fold(0.0_f64, f64::max);
    if peak == 0.0 {
        return;
    }
    if let Some(z) = v.iter().find(|z| z.norm() > 1e-8 * peak).copied() {
        let rot = z.conj() / z.norm();
        for x in v.iter_mut() {
            *x *= rot;
        }
    }
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
///
/// Returns the eigenvalues and the matching unit eigenvectors as columns,
/// each with the phase convention of [`normalize_phase`].
pub fn hermitian_eigh(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    if n == 2 {
        return hermitian_eigh_2x2(m);
    }
    // Symmetrize against round-off before decomposing.
    let herm = (m + m.adjoint()) * Complex64::new(0.5, 0.0);
    let eig = SymmetricEigen::new(herm);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let mut vectors = CMatrix::zeros(n, n);
    let mut values = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let mut col: CVector = eig.eigenvectors.column(src).into_owned();
        let norm = col.norm();
        col /= Complex64::new(norm, 0.0);
        normalize_phase(&mut col);
        vectors.set_column(dst, &col);
        values.push(eig.eigenvalues[src]);
    }
    (values, vectors)
}

fn hermitian_eigh_2x2(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let a = m[(0, 0)].re;
    let c = m[(1, 1)].re;
    let b = (m[(0, 1)] + m[(1, 0)].conj()) * 0.5;
    let mean = 0.5 * (a + c);
    let half_gap = (0.25 * (a - c) * (a - c) + b.norm_sqr()).sqrt();
    let values = vec![mean - half_gap, mean + half_gap];
    let mut vectors = CMatrix::zeros(2, 2);
    for (j, &lambda) in values.iter().enumerate() {
        // Two candidate null vectors of (M - lambda I); keep the better conditioned one.
        let u = [b, Complex64::new(lambda - a, 0.0)];
        let v = [Complex64::new(lambda - c, 0.0), b.conj()];
        let nu = u[0].norm_sqr() + u[1].norm_sqr();
        let nv = v[0].norm_sqr() + v[1].norm_sqr();
        let (pick, norm) = if nu >= nv { (u, nu) } else { (v, nv) };
        let mut col = if norm > 0.0 {
            CVector::from_column_slice(&[pick[0] / norm.sqrt(), pick[1] / norm.sqrt()])
        } else {
            let mut e = CVector::zeros(2);
            e[j] = Complex64::new(1.0, 0.0);
            e
        };
        normalize_phase(&mut col);
        vectors.set_column(j, &col);
    }
    (values, vectors)
}

/// Orthonormal basis for the `count`-dimensional least-dominant eigenspace.
pub fn smallest_eigenvectors(m: &CMatrix, count: usize) -> CMatrix {
    let (_, vectors) = hermitian_eigh(m);
    vectors.columns(0, count).into_owned()
}

/// Rows `offset..offset+rows` of the unitary `n`-point DFT matrix.
///
/// Distinct row blocks are mutually orthogonal and each block has
/// orthonormal rows, which is all pilot and spreading sequences need.
pub fn dft_rows(n: usize, offset: usize, rows: usize) -> CMatrix {
    let scale = 1.0 / (n as f64).sqrt();
    CMatrix::from_fn(rows, n, |r, t| {
        let k = ((offset + r) * t) % n;
        let phase = -2.0 * std::f64::consts::PI * k as f64 / n as f64;
        Complex64::from_polar(scale, phase)
    })
}

/// Squared Frobenius norm.
pub fn frob_sq(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm_sqr()).sum()
}

/// `‖A* A − I‖_F` for a matrix expected to have orthonormal columns.
pub fn unitarity_defect(a: &CMatrix) -> f64 {
    let gram = a.adjoint() * a;
    let eye = CMatrix::identity(gram.nrows(), gram.ncols());
    frob_sq(&(gram - eye)).sqrt()
}
