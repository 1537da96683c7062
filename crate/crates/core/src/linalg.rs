//! Dense complex linear algebra helpers shared by every module.
//!
//! Matrices are `nalgebra::DMatrix<Complex64>`. nalgebra stores column-major,
//! so `as_slice()` of a density matrix is already its column-stacked vector.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;

use crate::error::{Error, Result};

pub type C64 = Complex64;
pub type CMatrix = DMatrix<Complex64>;
pub type CVector = DVector<Complex64>;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);

pub fn identity(d: usize) -> CMatrix {
    CMatrix::identity(d, d)
}

pub fn kron(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a.kronecker(b)
}

/// Column-stacking vectorization.
pub fn vectorize(m: &CMatrix) -> CVector {
    CVector::from_column_slice(m.as_slice())
}

pub fn unvectorize(v: &CVector, d: usize) -> CMatrix {
    assert_eq!(v.len(), d * d, "vector length is not a square");
    CMatrix::from_column_slice(d, d, v.as_slice())
}

pub fn commutator(a: &CMatrix, b: &CMatrix) -> CMatrix {
    a * b - b * a
}

/// Largest entrywise |m - m†|.
pub fn hermiticity_defect(m: &CMatrix) -> f64 {
    let n = m.nrows();
    let mut worst = 0.0f64;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

pub fn hermitize(m: &CMatrix) -> CMatrix {
    (m + m.adjoint()) * C64::new(0.5, 0.0)
}

pub fn trace(m: &CMatrix) -> C64 {
    m.diagonal().sum()
}

/// Largest absolute entry.
pub fn max_abs(m: &CMatrix) -> f64 {
    m.iter().fold(0.0f64, |acc, z| acc.max(z.norm()))
}

/// Maximum absolute column sum.
pub fn one_norm(m: &CMatrix) -> f64 {
    m.column_iter().map(|c| c.iter().map(|z| z.norm()).sum::<f64>()).fold(0.0, f64::max)
}

/// Spectral norm via the largest singular value.
pub fn operator_norm(m: &CMatrix) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.clone().singular_values().iter().cloned().fold(0.0, f64::max)
}

/// Eigen-decomposition of a Hermitian matrix with ascending eigenvalues.
/// Columns of the returned matrix are the matching orthonormal eigenvectors.
pub fn hermitian_eigen(m: &CMatrix) -> (Vec<f64>, CMatrix) {
    let n = m.nrows();
    let eig = nalgebra::SymmetricEigen::new(hermitize(m));
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    let values = order.iter().map(|&k| eig.eigenvalues[k]).collect();
    let mut vectors = CMatrix::zeros(n, n);
    for (dst, &src) in order.iter().enumerate() {
        vectors.set_column(dst, &eig.eigenvectors.column(src));
    }
    (values, vectors)
}

pub fn hermitian_eigenvalues(m: &CMatrix) -> Vec<f64> {
    let mut v: Vec<f64> = nalgebra::SymmetricEigen::new(hermitize(m)).eigenvalues.iter().cloned().collect();
    v.sort_by(f64::total_cmp);
    v
}

/// Eigenvalues of a general square complex matrix.
pub fn eigenvalues(m: &CMatrix) -> Result<Vec<C64>> {
    if m.nrows() == 1 {
        return Ok(vec![m[(0, 0)]]);
    }
    let schur = nalgebra::Schur::try_new(m.clone(), 1e-15, 10_000)
        .ok_or_else(|| Error::Numerical("Schur decomposition did not converge".into()))?;
    let t = schur.unpack().1;
    Ok(t.diagonal().iter().cloned().collect())
}

/// Right singular vector for the smallest singular value, i.e. the best
/// numerical null vector of `m`. Also returns that singular value.
pub fn null_vector(m: &CMatrix) -> Result<(CVector, f64)> {
    let svd = m.clone().svd(false, true);
    let v_t = svd.v_t.ok_or_else(|| Error::Numerical("SVD failed to produce V".into()))?;
    let (k, &smin) = svd
        .singular_values
        .iter()
        .enumerate()
        .min_by(|a, b| a.1.total_cmp(b.1))
        .ok_or_else(|| Error::Numerical("empty SVD".into()))?;
    let v = v_t.row(k).adjoint();
    Ok((v, smin))
}

const PADE3: [f64; 4] = [120.0, 60.0, 12.0, 1.0];
const PADE5: [f64; 6] = [30240.0, 15120.0, 3360.0, 420.0, 30.0, 1.0];
const PADE7: [f64; 8] = [17297280.0, 8648640.0, 1995840.0, 277200.0, 25200.0, 1512.0, 56.0, 1.0];
const PADE9: [f64; 10] =
    [17643225600.0, 8821612800.0, 2075673600.0, 302702400.0, 30270240.0, 2162160.0, 110880.0, 3960.0, 90.0, 1.0];
const PADE13: [f64; 14] = [
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
// Backward-error bounds for each Padé degree (Higham 2005, double precision).
const THETA: [(usize, f64); 4] =
    [(3, 1.495585217958292e-2), (5, 2.539_398_330_063_23e-1), (7, 9.504178996162932e-1), (9, 2.097847961257068e0)];
const THETA13: f64 = 5.371920351148152;

fn scaled(m: &CMatrix, c: f64) -> CMatrix {
    m * C64::new(c, 0.0)
}

/// Matrix exponential by scaling and squaring with a diagonal Padé approximant.
pub fn expm(a: &CMatrix) -> CMatrix {
    let n = a.nrows();
    assert_eq!(n, a.ncols(), "expm needs a square matrix");
    if n == 0 {
        return CMatrix::zeros(0, 0);
    }
    if n == 1 {
        return CMatrix::from_element(1, 1, a[(0, 0)].exp());
    }
    let norm = one_norm(a);
    if norm == 0.0 {
        return identity(n);
    }
    let eye = identity(n);
    for &(degree, theta) in THETA.iter() {
        if norm <= theta {
            let coeffs: &[f64] = match degree {
                3 => &PADE3,
                5 => &PADE5,
                7 => &PADE7,
                _ => &PADE9,
            };
            return pade_low(a, coeffs, &eye);
        }
    }

    let s = (norm / THETA13).log2().ceil().max(0.0) as i32;
    let a = scaled(a, 0.5f64.powi(s));
    let b = &PADE13;
    let a2 = &a * &a;
    let a4 = &a2 * &a2;
    let a6 = &a4 * &a2;
    let inner_u = &a6 * (scaled(&a6, b[13]) + scaled(&a4, b[11]) + scaled(&a2, b[9]))
        + scaled(&a6, b[7])
        + scaled(&a4, b[5])
        + scaled(&a2, b[3])
        + scaled(&eye, b[1]);
    let u = &a * inner_u;
    let v = &a6 * (scaled(&a6, b[12]) + scaled(&a4, b[10]) + scaled(&a2, b[8]))
        + scaled(&a6, b[6])
        + scaled(&a4, b[4])
        + scaled(&a2, b[2])
        + scaled(&eye, b[0]);
    let mut r = solve_pade(&u, &v);
    for _ in 0..s {
        r = &r * &r;
    }
    r
}

fn pade_low(a: &CMatrix, b: &[f64], eye: &CMatrix) -> CMatrix {
    let a2 = a * a;
    let mut power = eye.clone();
    let mut u_inner = scaled(eye, b[1]);
    let mut v = scaled(eye, b[0]);
    for k in 1..b.len() / 2 {
        power = &power * &a2;
        u_inner += scaled(&power, b[2 * k + 1]);
        v += scaled(&power, b[2 * k]);
    }
    let u = a * u_inner;
    solve_pade(&u, &v)
}

fn solve_pade(u: &CMatrix, v: &CMatrix) -> CMatrix {
    let p = v + u;
    let q = v - u;
    q.lu().solve(&p).expect("Padé denominator is singular")
}

/// Smallest eigenvalue of the Hermitian part.
pub fn min_eigenvalue(m: &CMatrix) -> f64 {
    hermitian_eigenvalues(m).first().cloned().unwrap_or(0.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn taylor_exp(a: &CMatrix, terms: usize) -> CMatrix {
        // Oracle: scale down, Taylor-sum, square back up.
        let s = 8;
        let a = scaled(a, 0.5f64.powi(s));
        let mut term = identity(a.nrows());
        let mut sum = term.clone();
        for k in 1..terms {
            term = &term * &a * C64::new(1.0 / k as f64, 0.0);
            sum += &term;
        }
        for _ in 0..s {
            sum = &sum * &sum;
        }
        sum
    }

    fn sample(n: usize, scale: f64, seed: u64) -> CMatrix {
        let mut state = seed;
        let mut next = || {
            state = state.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
            ((state >> 11) as f64 / (1u64 << 53) as f64) - 0.5
        };
        CMatrix::from_fn(n, n, |_, _| C64::new(next() * scale, next() * scale))
    }

    #[test]
    fn expm_matches_taylor_across_pade_degrees() {
        for (i, scale) in [1e-3, 0.05, 0.4, 1.5, 3.0, 12.0].iter().enumerate() {
            let a = sample(6, *scale, i as u64 + 3);
            let err = max_abs(&(expm(&a) - taylor_exp(&a, 30)));
            let size = max_abs(&taylor_exp(&a, 30));
            assert!(err <= 1e-12 * size.max(1.0), "scale {scale}: err {err}");
        }
    }

    #[test]
    fn expm_of_anti_hermitian_is_unitary() {
        let h = sample(5, 2.0, 11);
        let h = hermitize(&h);
        let u = expm(&(h * C64::new(0.0, -1.0)));
        let defect = max_abs(&(u.adjoint() * &u - identity(5)));
        assert!(defect < 1e-13, "{defect}");
    }

    #[test]
    fn expm_diagonal() {
        let a = CMatrix::from_diagonal(&CVector::from_vec(vec![C64::new(1.0, 0.0), C64::new(-2.0, 0.5)]));
        let e = expm(&a);
        assert!((e[(0, 0)] - C64::new(1.0f64.exp(), 0.0)).norm() < 1e-13);
        assert!((e[(1, 1)] - C64::new(-2.0, 0.5).exp()).norm() < 1e-13);
        assert!(e[(0, 1)].norm() < 1e-15);
    }

    #[test]
    fn vectorization_is_column_stacking() {
        let m = CMatrix::from_fn(3, 3, |i, j| C64::new((i + 10 * j) as f64, 0.0));
        let v = vectorize(&m);
        assert_eq!(v[1], C64::new(1.0, 0.0));
        assert_eq!(v[3], C64::new(10.0, 0.0));
        assert_eq!(unvectorize(&v, 3), m);
    }

    #[test]
    fn kron_vec_identity() {
        // vec(A X B) = (B^T ⊗ A) vec(X)
        let a = sample(3, 1.0, 1);
        let b = sample(3, 1.0, 2);
        let x = sample(3, 1.0, 5);
        let lhs = vectorize(&(&a * &x * &b));
        let rhs = kron(&b.transpose(), &a) * vectorize(&x);
        assert!((lhs - rhs).norm() < 1e-13);
    }

    #[test]
    fn hermitian_eigen_sorted_and_reconstructs() {
        let h = hermitize(&sample(6, 1.0, 9));
        let (vals, vecs) = hermitian_eigen(&h);
        assert!(vals.windows(2).all(|w| w[0] <= w[1]));
        let rebuilt = &vecs
            * CMatrix::from_diagonal(&CVector::from_iterator(6, vals.iter().map(|&e| C64::new(e, 0.0))))
            * vecs.adjoint();
        assert!(max_abs(&(rebuilt - h)) < 1e-12);
    }

    #[test]
    fn null_vector_of_rank_deficient() {
        let m = CMatrix::from_row_slice(2, 2, &[ONE, ONE, ONE, ONE]);
        let (v, s) = null_vector(&m).unwrap();
        assert!(s < 1e-14);
        assert!((v[0] + v[1]).norm() < 1e-12);
    }
}
