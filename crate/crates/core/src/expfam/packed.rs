//! Packed storage for symmetric matrices: upper triangle, row-major.

use nalgebra::DMatrix;

pub fn packed_len(d: usize) -> usize {
    d * (d + 1) / 2
}

/// Offset of entry (i, j), i <= j, in the packed upper triangle.
#[inline]
pub fn packed_index(d: usize, i: usize, j: usize) -> usize {
    debug_assert!(i <= j && j < d);
    i * d - (i * i - i) / 2 + (j - i)
}

pub fn pack(m: &DMatrix<f64>) -> Vec<f64> {
    let d = m.nrows();
    debug_assert_eq!(d, m.ncols());
    let mut out = Vec::with_capacity(packed_len(d));
    for i in 0..d {
        for j in i..d {
            out.push(m[(i, j)]);
        }
    }
    out
}

pub fn unpack(values: &[f64], d: usize) -> DMatrix<f64> {
    debug_assert_eq!(values.len(), packed_len(d));
    let mut m = DMatrix::zeros(d, d);
    let mut idx = 0;
    for i in 0..d {
        for j in i..d {
            m[(i, j)] = values[idx];
            m[(j, i)] = values[idx];
            idx += 1;
        }
    }
    m
}

/// Inner product tr(A B) of two symmetric matrices in packed form:
/// off-diagonal entries count twice.
pub fn packed_tr_dot(a: &[f64], b: &[f64], d: usize) -> f64 {
    debug_assert_eq!(a.len(), packed_len(d));
    debug_assert_eq!(a.len(), b.len());
    let mut sum = 0.0;
    let mut idx = 0;
    for i in 0..d {
        for j in i..d {
            let w = if i == j { 1.0 } else { 2.0 };
            sum += w * a[idx] * b[idx];
            idx += 1;
        }
    }
    sum
}

/// Symmetrizes and floors the eigenvalues of a symmetric matrix at `eig_min`.
pub fn floor_spd(m: &DMatrix<f64>, eig_min: f64) -> DMatrix<f64> {
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let mut vals = eig.eigenvalues;
    for v in vals.iter_mut() {
        if *v < eig_min {
            *v = eig_min;
        }
    }
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pack_unpack_round_trip() {
        let m = DMatrix::from_row_slice(3, 3, &[2.0, 0.5, 0.1, 0.5, 3.0, -0.2, 0.1, -0.2, 1.5]);
        assert_eq!(unpack(&pack(&m), 3), m);
    }

    #[test]
    fn packed_indexing_matches_pack_order() {
        let d = 4;
        let mut m = DMatrix::zeros(d, d);
        let mut c = 0.0;
        for i in 0..d {
            for j in i..d {
                m[(i, j)] = c;
                m[(j, i)] = c;
                c += 1.0;
            }
        }
        let p = pack(&m);
        for i in 0..d {
            for j in i..d {
                assert_eq!(p[packed_index(d, i, j)], m[(i, j)]);
            }
        }
    }

    #[test]
    fn tr_dot_matches_dense_trace() {
        let a = DMatrix::from_row_slice(2, 2, &[1.0, 2.0, 2.0, 5.0]);
        let b = DMatrix::from_row_slice(2, 2, &[3.0, -1.0, -1.0, 0.5]);
        let dense = (&a * &b).trace();
        let packed = packed_tr_dot(&pack(&a), &pack(&b), 2);
        assert!((dense - packed).abs() < 1e-12);
    }

    #[test]
    fn floor_spd_preserves_eigenvectors() {
        // Matrix with eigenvalues (1, -0.1); flooring must only lift the
        // negative one.
        let theta: f64 = 0.6;
        let q = DMatrix::from_row_slice(
            2,
            2,
            &[theta.cos(), -theta.sin(), theta.sin(), theta.cos()],
        );
        let m = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, -0.1])) * q.transpose();
        let fixed = floor_spd(&m, 1e-8);
        let want = &q * DMatrix::from_diagonal(&nalgebra::DVector::from_vec(vec![1.0, 1e-8])) * q.transpose();
        assert!((fixed - want).norm() < 1e-10);
    }
}
