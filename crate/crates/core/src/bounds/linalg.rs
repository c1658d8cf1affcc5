//! Symmetric 4×4 eigen-solver used for Fisher matrix inversion.

use crate::scalar::Real;

pub type Mat4<T> = [[T; 4]; 4];

pub fn zeros<T: Real>() -> Mat4<T> {
    [[T::zero(); 4]; 4]
}

/// Eigenvalues and eigenvectors (columns of `vectors`) by cyclic Jacobi.
pub struct SymEigen<T> {
    pub values: [T; 4],
    pub vectors: Mat4<T>,
}

pub fn sym_eigen<T: Real>(m: &Mat4<T>) -> SymEigen<T> {
    let mut a = *m;
    let mut v = zeros::<T>();
    for (i, row) in v.iter_mut().enumerate() {
        row[i] = T::one();
    }
    for _sweep in 0..64 {
        let off: T = (0..4)
            .flat_map(|p| (p + 1..4).map(move |q| (p, q)))
            .map(|(p, q)| a[p][q] * a[p][q])
            .sum();
        let diag: T = (0..4).map(|i| a[i][i] * a[i][i]).sum();
        if off <= T::epsilon() * T::epsilon() * diag || off == T::zero() {
            break;
        }
        for p in 0..4 {
            for q in p + 1..4 {
                if a[p][q] == T::zero() {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (T::lit(2.0) * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + T::one()).sqrt());
                let c = T::one() / (t * t + T::one()).sqrt();
                let s = t * c;
                for k in 0..4 {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..4 {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vkp = row[p];
                    let vkq = row[q];
                    row[p] = c * vkp - s * vkq;
                    row[q] = s * vkp + c * vkq;
                }
            }
        }
    }
    SymEigen {
        values: [a[0][0], a[1][1], a[2][2], a[3][3]],
        vectors: v,
    }
}

/// Inverse of a symmetric positive definite matrix after unit-diagonal
/// scaling. Returns the inverse and the condition number of the scaled
/// matrix; `None` with an infinite condition number when it is not
/// positive definite.
pub fn equilibrated_inverse<T: Real>(m: &Mat4<T>) -> (Option<Mat4<T>>, T) {
    let mut d = [T::zero(); 4];
    for i in 0..4 {
        if !(m[i][i] > T::zero()) || !m[i][i].is_finite() {
            return (None, T::infinity());
        }
        d[i] = T::one() / m[i][i].sqrt();
    }
    let mut s = zeros::<T>();
    for i in 0..4 {
        for j in 0..4 {
            s[i][j] = m[i][j] * d[i] * d[j];
        }
    }
    let eig = sym_eigen(&s);
    let lmax = eig.values.iter().copied().fold(T::neg_infinity(), T::max);
    let lmin = eig.values.iter().copied().fold(T::infinity(), T::min);
    if !(lmin > T::zero()) {
        return (None, T::infinity());
    }
    let cond = lmax / lmin;
    let mut inv = zeros::<T>();
    for i in 0..4 {
        for j in 0..4 {
            let mut acc = T::zero();
            for k in 0..4 {
                acc += eig.vectors[i][k] * eig.vectors[j][k] / eig.values[k];
            }
            inv[i][j] = acc * d[i] * d[j];
        }
    }
    (Some(inv), cond)
}
