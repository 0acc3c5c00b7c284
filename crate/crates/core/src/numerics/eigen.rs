use super::Matrix;
use crate::error::{contract, Error, Result};

const MAX_SWEEPS: usize = 100;
const REL_OFF_DIAGONAL_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-10;

/// Eigenpairs of a symmetric matrix, eigenvalues descending, eigenvectors
/// stored as orthonormal columns in matching order.
#[derive(Clone, Debug)]
pub struct EigenDecomposition {
    pub eigenvalues: Vec<f64>,
    pub eigenvectors: Matrix,
}

impl EigenDecomposition {
    /// `Q Λ Qᵀ`.
    pub fn reconstruct(&self) -> Matrix {
        let n = self.eigenvalues.len();
        let q = &self.eigenvectors;
        let mut scaled = q.clone();
        for i in 0..n {
            for (j, &lambda) in self.eigenvalues.iter().enumerate() {
                scaled[(i, j)] *= lambda;
            }
        }
        scaled.matmul_transb(q).expect("square factors")
    }
}

fn off_diagonal_norm(a: &Matrix) -> f64 {
    let n = a.rows();
    let mut s = 0.0;
    for i in 0..n {
        for j in 0..n {
            if i != j {
                s += a[(i, j)] * a[(i, j)];
            }
        }
    }
    s.sqrt()
}

/// Cyclic Jacobi eigensolver for symmetric matrices.
///
/// Sweeps over all `(p, q)` pairs in row order, annihilating each
/// off-diagonal entry with a plane rotation, until the off-diagonal
/// Frobenius norm drops below `1e-12·‖A‖_F` or 100 sweeps have run.
pub fn jacobi_eig(sym: &Matrix) -> Result<EigenDecomposition> {
    if !sym.is_square() {
        return Err(contract("jacobi_eig", format!("{:?} not square", sym.shape())));
    }
    let scale = sym.max_abs().max(1.0);
    let asym = sym.asymmetry()?;
    if asym > SYMMETRY_TOL * scale {
        return Err(contract("jacobi_eig", format!("asymmetry {asym:e}")));
    }
    if !sym.is_finite() {
        return Err(contract("jacobi_eig", "non-finite entries"));
    }

    let n = sym.rows();
    // Symmetrize exactly so rotations act on a truly symmetric matrix.
    let mut a = Matrix::from_fn(n, n, |i, j| 0.5 * (sym[(i, j)] + sym[(j, i)]));
    let mut v = Matrix::identity(n);
    let threshold = REL_OFF_DIAGONAL_TOL * a.frobenius_norm();

    let mut off = off_diagonal_norm(&a);
    let mut sweeps = 0;
    while off > threshold {
        if sweeps == MAX_SWEEPS {
            return Err(Error::NoConvergence {
                sweeps,
                off_diagonal: off,
            });
        }
        for p in 0..n {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        sweeps += 1;
        off = off_diagonal_norm(&a);
    }

    let mut order: Vec<usize> = (0..n).collect();
    let diag = a.diagonal();
    order.sort_by(|&i, &j| diag[j].total_cmp(&diag[i]));
    let eigenvalues = order.iter().map(|&i| diag[i]).collect();
    let eigenvectors = Matrix::from_fn(n, n, |r, c| v[(r, order[c])]);
    Ok(EigenDecomposition {
        eigenvalues,
        eigenvectors,
    })
}

fn rotate(a: &mut Matrix, v: &mut Matrix, p: usize, q: usize) {
    let apq = a[(p, q)];
    if apq == 0.0 {
        return;
    }
    let n = a.rows();
    let theta = (a[(q, q)] - a[(p, p)]) / (2.0 * apq);
    let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
    let c = 1.0 / (t * t + 1.0).sqrt();
    let s = t * c;

    for k in 0..n {
        let akp = a[(k, p)];
        let akq = a[(k, q)];
        a[(k, p)] = c * akp - s * akq;
        a[(k, q)] = s * akp + c * akq;
    }
    for k in 0..n {
        let apk = a[(p, k)];
        let aqk = a[(q, k)];
        a[(p, k)] = c * apk - s * aqk;
        a[(q, k)] = s * apk + c * aqk;
    }
    a[(p, q)] = 0.0;
    a[(q, p)] = 0.0;

    for k in 0..n {
        let vkp = v[(k, p)];
        let vkq = v[(k, q)];
        v[(k, p)] = c * vkp - s * vkq;
        v[(k, q)] = s * vkp + c * vkq;
    }
}

/// The `min(rows, cols)` singular values, descending, as square roots of the
/// eigenvalues of the smaller of `aᵀa` and `aaᵀ` (negative round-off clamped
/// to zero).
pub fn singular_values(a: &Matrix) -> Result<Vec<f64>> {
    let gram = if a.rows() < a.cols() {
        a.matmul_transb(a)?
    } else {
        a.matmul_transa(a)?
    };
    let eig = jacobi_eig(&gram)?;
    Ok(eig.eigenvalues.into_iter().map(|l| l.max(0.0).sqrt()).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::numerics::{gaussian_sample, RngStream};

    #[test]
    fn diagonal_input() {
        let e = jacobi_eig(&Matrix::from_diag(&[3.0, 1.0, 2.0])).unwrap();
        assert_eq!(e.eigenvalues, vec![3.0, 2.0, 1.0]);
        // Columns are the axis vectors (0, 2, 1) in that order.
        assert_eq!(e.eigenvectors[(0, 0)].abs(), 1.0);
        assert_eq!(e.eigenvectors[(2, 1)].abs(), 1.0);
        assert_eq!(e.eigenvectors[(1, 2)].abs(), 1.0);
    }

    #[test]
    fn two_by_two() {
        let m = Matrix::from_rows(&[[2.0, 1.0], [1.0, 2.0]]).unwrap();
        let e = jacobi_eig(&m).unwrap();
        assert!((e.eigenvalues[0] - 3.0).abs() < 1e-14);
        assert!((e.eigenvalues[1] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(jacobi_eig(&Matrix::zeros(2, 3)).is_err());
        let m = Matrix::from_rows(&[[1.0, 2.0], [0.0, 1.0]]).unwrap();
        assert!(matches!(jacobi_eig(&m), Err(Error::Contract { .. })));
    }

    #[test]
    fn reconstruction_and_orthonormality() {
        let mut rng = RngStream::new(17);
        let x = gaussian_sample(&mut rng, 12, 12, 1.0).unwrap();
        let sym = x.add(&x.transpose()).unwrap();
        let e = jacobi_eig(&sym).unwrap();
        let err = e.reconstruct().sub(&sym).unwrap().frobenius_norm() / sym.frobenius_norm();
        assert!(err < 1e-8, "reconstruction error {err}");
        let qtq = e.eigenvectors.matmul_transa(&e.eigenvectors).unwrap();
        let dev = qtq.sub(&Matrix::identity(12)).unwrap().max_abs();
        assert!(dev < 1e-10, "orthonormality {dev}");
        let norm = sym.frobenius_norm();
        for (j, &lambda) in e.eigenvalues.iter().enumerate() {
            let v = e.eigenvectors.col_vec(j);
            let kv = sym.matvec(&v).unwrap();
            let res: f64 = kv.iter().zip(&v).map(|(a, b)| (a - lambda * b).powi(2)).sum::<f64>().sqrt();
            assert!(res < 1e-8 * norm);
        }
    }

    #[test]
    fn singular_values_spot_cases() {
        let sv = singular_values(&Matrix::from_diag(&[10.0, 1.0])).unwrap();
        assert!((sv[0] - 10.0).abs() < 1e-12 && (sv[1] - 1.0).abs() < 1e-12);
        assert_eq!(singular_values(&Matrix::zeros(3, 2)).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn singular_values_agree_from_both_gram_sides() {
        let a = gaussian_sample(&mut RngStream::new(4), 6, 4, 1.0).unwrap();
        let right = singular_values(&a).unwrap();
        let left_gram = a.matmul_transb(&a).unwrap();
        let left = jacobi_eig(&left_gram).unwrap().eigenvalues;
        for (i, s) in right.iter().enumerate() {
            assert!((s - left[i].max(0.0).sqrt()).abs() < 1e-8);
        }
        // The extra two eigenvalues of a·aᵀ are zero.
        assert!(left[4].abs() < 1e-10 && left[5].abs() < 1e-10);
        let wide = singular_values(&a.transpose()).unwrap();
        assert_eq!(wide.len(), 4);
        for (x, y) in wide.iter().zip(&right) {
            assert!((x - y).abs() < 1e-10);
        }
    }
}
