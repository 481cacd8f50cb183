use num_complex::Complex64;

use super::LinalgError;

/// Dense complex matrix, row major. Pointwise evaluations of Laurent
/// matrices land here before spectral work.
#[derive(Clone, Debug, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl CMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, Complex64::new(1.0, 0.0));
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: Complex64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj());
            }
        }
        out
    }

    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows, "cmatrix product shape");
        let mut out = Self::zero(self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..self.cols {
                    acc += self.get(r, k) * rhs.get(k, c);
                }
                out.set(r, c, acc);
            }
        }
        out
    }

    pub fn sub(&self, rhs: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn frobenius(&self) -> f64 {
        self.data.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// Sum of diagonal entries.
    pub fn trace(&self) -> Complex64 {
        assert_eq!(self.rows, self.cols);
        (0..self.rows).map(|i| self.get(i, i)).sum()
    }
}

/// Spectral data of a Hermitian matrix.
#[derive(Clone, Debug)]
pub struct Eigen {
    /// Eigenvalues in ascending order.
    pub values: Vec<f64>,
    /// Unitary whose columns are the matching eigenvectors.
    pub vectors: CMatrix,
    pub converged: bool,
    pub sweeps: usize,
}

const MAX_SWEEPS: usize = 30;
const OFF_DIAG_TOL: f64 = 1e-14;

/// Eigenvalues and eigenvectors of a Hermitian matrix by cyclic Jacobi
/// rotations. The input is symmetrized first; convergence means the
/// off-diagonal Frobenius norm has fallen below `1e-14 * ||H||`. The sizes
/// in this crate are tiny, which is exactly where Jacobi shines.
pub fn hermitian_eigen(h: &CMatrix) -> Eigen {
    assert_eq!(h.rows(), h.cols(), "hermitian_eigen wants a square matrix");
    let n = h.rows();
    // Symmetrize: a = (h + h*) / 2, with real diagonal.
    let mut a = CMatrix::zero(n, n);
    for r in 0..n {
        for c in 0..n {
            let v = (h.get(r, c) + h.get(c, r).conj()) * 0.5;
            a.set(r, c, if r == c { Complex64::new(v.re, 0.0) } else { v });
        }
    }
    let scale = a.frobenius();
    let mut v = CMatrix::identity(n);
    let mut converged = scale == 0.0 || n == 1;
    let mut sweeps = 0;
    while !converged && sweeps < MAX_SWEEPS {
        sweeps += 1;
        for p in 0..n - 1 {
            for q in p + 1..n {
                rotate(&mut a, &mut v, p, q);
            }
        }
        converged = off_diagonal(&a) <= OFF_DIAG_TOL * scale;
    }
    let mut order: Vec<usize> = (0..n).collect();
    let diag: Vec<f64> = (0..n).map(|i| a.get(i, i).re).collect();
    order.sort_by(|&i, &j| diag[i].partial_cmp(&diag[j]).unwrap());
    let values: Vec<f64> = order.iter().map(|&i| diag[i]).collect();
    let mut vectors = CMatrix::zero(n, n);
    for (new_col, &old_col) in order.iter().enumerate() {
        for r in 0..n {
            vectors.set(r, new_col, v.get(r, old_col));
        }
    }
    Eigen {
        values,
        vectors,
        converged,
        sweeps,
    }
}

fn off_diagonal(a: &CMatrix) -> f64 {
    let n = a.rows();
    let mut sum = 0.0;
    for r in 0..n {
        for c in 0..n {
            if r != c {
                sum += a.get(r, c).norm_sqr();
            }
        }
    }
    sum.sqrt()
}

/// One two-sided rotation zeroing the (p, q) entry of the Hermitian
/// iterate `a`, accumulated into `v`.
fn rotate(a: &mut CMatrix, v: &mut CMatrix, p: usize, q: usize) {
    let apq = a.get(p, q);
    let g = apq.norm();
    if g == 0.0 {
        return;
    }
    let e = apq / g; // unit phase of the pivot entry
    let app = a.get(p, p).re;
    let aqq = a.get(q, q).re;
    let tau = (aqq - app) / (2.0 * g);
    let t = if tau >= 0.0 {
        1.0 / (tau + (1.0 + tau * tau).sqrt())
    } else {
        -1.0 / (-tau + (1.0 + tau * tau).sqrt())
    };
    let c = 1.0 / (1.0 + t * t).sqrt();
    let s = t * c;
    let n = a.rows();
    // Columns p and q of A and eigenvector accumulator: right-multiply by J
    // with J[p][p]=c, J[p][q]=s e, J[q][p]=-s conj(e), J[q][q]=c.
    for k in 0..n {
        let akp = a.get(k, p);
        let akq = a.get(k, q);
        a.set(k, p, akp * c - akq * (s * e.conj()));
        a.set(k, q, akp * (s * e) + akq * c);
        let vkp = v.get(k, p);
        let vkq = v.get(k, q);
        v.set(k, p, vkp * c - vkq * (s * e.conj()));
        v.set(k, q, vkp * (s * e) + vkq * c);
    }
    // Rows p and q: left-multiply by J*.
    for k in 0..n {
        let apk = a.get(p, k);
        let aqk = a.get(q, k);
        a.set(p, k, apk * c - aqk * (s * e));
        a.set(q, k, apk * (s * e.conj()) + aqk * c);
    }
    // Clean the pivot and keep the diagonal exactly real.
    a.set(p, q, Complex64::new(0.0, 0.0));
    a.set(q, p, Complex64::new(0.0, 0.0));
    let dpp = a.get(p, p).re;
    let dqq = a.get(q, q).re;
    a.set(p, p, Complex64::new(dpp, 0.0));
    a.set(q, q, Complex64::new(dqq, 0.0));
}

const SINGULAR_REL_TOL: f64 = 1e-12;

/// Inverse of the Gram matrix `M* M` of a tall matrix `M` (rows >= cols),
/// through the eigendecomposition. Returns the inverse together with the
/// condition number `lambda_max / lambda_min` of the Gram matrix.
pub fn gram_inverse(m: &CMatrix) -> Result<(CMatrix, f64), LinalgError> {
    if m.rows() < m.cols() {
        return Err(LinalgError::ShapeMismatch(format!(
            "gram_inverse wants rows >= cols, got {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    let h = m.adjoint().mul(m);
    let eig = hermitian_eigen(&h);
    let n = h.rows();
    let lambda_min = eig.values[0];
    let lambda_max = eig.values[n - 1];
    if lambda_min <= SINGULAR_REL_TOL * lambda_max || lambda_max <= 0.0 {
        return Err(LinalgError::Singular {
            lambda_min,
            lambda_max,
        });
    }
    // V diag(1/lambda) V*
    let mut scaled = CMatrix::zero(n, n);
    for r in 0..n {
        for c in 0..n {
            scaled.set(r, c, eig.vectors.get(r, c) / eig.values[c]);
        }
    }
    let inv = scaled.mul(&eig.vectors.adjoint());
    Ok((inv, lambda_max / lambda_min))
}
