use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex64;

use super::dense::CMatrix;
use super::LinalgError;

/// Coefficients whose magnitude drops below this after arithmetic are pruned.
pub const COEFF_PRUNE: f64 = 1e-15;

/// Finite Laurent series `sum_d c_d z^d` evaluated on the unit circle.
///
/// Coefficients are kept in a sorted map keyed by degree, so iteration order
/// (and hence every residual and serialization downstream) is deterministic.
#[derive(Clone, Default, PartialEq)]
pub struct LaurentPoly {
    coeffs: BTreeMap<i64, Complex64>,
}

impl LaurentPoly {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn one() -> Self {
        Self::monomial(0, Complex64::new(1.0, 0.0))
    }

    pub fn constant(c: Complex64) -> Self {
        Self::monomial(0, c)
    }

    /// The single term `c z^degree`.
    pub fn monomial(degree: i64, c: Complex64) -> Self {
        let mut coeffs = BTreeMap::new();
        if c.norm() >= COEFF_PRUNE {
            coeffs.insert(degree, c);
        }
        Self { coeffs }
    }

    pub fn from_pairs<I: IntoIterator<Item = (i64, Complex64)>>(pairs: I) -> Self {
        let mut out = Self::default();
        for (d, c) in pairs {
            let entry = out.coeffs.entry(d).or_insert(Complex64::new(0.0, 0.0));
            *entry += c;
        }
        out.prune();
        out
    }

    fn prune(&mut self) {
        self.coeffs.retain(|_, c| c.norm() >= COEFF_PRUNE);
    }

    pub fn coeff(&self, degree: i64) -> Complex64 {
        self.coeffs
            .get(&degree)
            .copied()
            .unwrap_or(Complex64::new(0.0, 0.0))
    }

    /// Sorted (degree, coefficient) view.
    pub fn terms(&self) -> impl Iterator<Item = (i64, Complex64)> + '_ {
        self.coeffs.iter().map(|(&d, &c)| (d, c))
    }

    pub fn is_zero(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// Inclusive degree span, `None` for the zero polynomial.
    pub fn degree_range(&self) -> Option<(i64, i64)> {
        let lo = self.coeffs.keys().next()?;
        let hi = self.coeffs.keys().next_back()?;
        Some((*lo, *hi))
    }

    pub fn max_coeff(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    /// `int_0^1 |P|^2 dxi`, exactly, by circle-Parseval.
    pub fn l2_norm_sq(&self) -> f64 {
        self.coeffs.values().map(|c| c.norm_sqr()).sum()
    }

    /// Degree shift: `P(z) -> z^k P(z)`, i.e. multiplication by `e^{2pi i k xi}`.
    pub fn shift(&self, k: i64) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(&d, &c)| (d + k, c)).collect(),
        }
    }

    /// Conjugation on the circle: `P -> conj(P(e^{2pi i xi}))`, i.e.
    /// `c_d -> conj(c_{-d})`. This is the entrywise adjoint used to form
    /// products like `Psi* Psi`.
    pub fn conj_reflect(&self) -> Self {
        Self {
            coeffs: self.coeffs.iter().map(|(&d, &c)| (-d, c.conj())).collect(),
        }
    }

    pub fn scale(&self, c: Complex64) -> Self {
        let mut out = Self {
            coeffs: self.coeffs.iter().map(|(&d, &a)| (d, a * c)).collect(),
        };
        out.prune();
        out
    }

    pub fn scale_re(&self, x: f64) -> Self {
        self.scale(Complex64::new(x, 0.0))
    }

    /// Value at `z = e^{2pi i xi}`.
    pub fn eval(&self, xi: f64) -> Complex64 {
        self.coeffs
            .iter()
            .map(|(&d, &c)| c * Complex64::from_polar(1.0, TAU * d as f64 * xi))
            .sum()
    }

    /// Largest coefficient magnitude of `self - other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let degrees: std::collections::BTreeSet<i64> = self
            .coeffs
            .keys()
            .chain(other.coeffs.keys())
            .copied()
            .collect();
        degrees
            .into_iter()
            .map(|d| (self.coeff(d) - other.coeff(d)).norm())
            .fold(0.0, f64::max)
    }
}

impl fmt::Debug for LaurentPoly {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_zero() {
            return write!(f, "0");
        }
        let mut first = true;
        for (d, c) in self.terms() {
            if !first {
                write!(f, " + ")?;
            }
            first = false;
            write!(f, "({:.4}{:+.4}i)z^{}", c.re, c.im, d)?;
        }
        Ok(())
    }
}

impl Add for &LaurentPoly {
    type Output = LaurentPoly;
    fn add(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (&d, &c) in &rhs.coeffs {
            *out.coeffs.entry(d).or_insert(Complex64::new(0.0, 0.0)) += c;
        }
        out.prune();
        out
    }
}

impl Sub for &LaurentPoly {
    type Output = LaurentPoly;
    fn sub(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut out = self.clone();
        for (&d, &c) in &rhs.coeffs {
            *out.coeffs.entry(d).or_insert(Complex64::new(0.0, 0.0)) -= c;
        }
        out.prune();
        out
    }
}

impl Mul for &LaurentPoly {
    type Output = LaurentPoly;
    fn mul(self, rhs: &LaurentPoly) -> LaurentPoly {
        let mut coeffs: BTreeMap<i64, Complex64> = BTreeMap::new();
        for (&d1, &c1) in &self.coeffs {
            for (&d2, &c2) in &rhs.coeffs {
                *coeffs.entry(d1 + d2).or_insert(Complex64::new(0.0, 0.0)) += c1 * c2;
            }
        }
        let mut out = LaurentPoly { coeffs };
        out.prune();
        out
    }
}

impl Neg for &LaurentPoly {
    type Output = LaurentPoly;
    fn neg(self) -> LaurentPoly {
        LaurentPoly {
            coeffs: self.coeffs.iter().map(|(&d, &c)| (d, -c)).collect(),
        }
    }
}

/// Rectangular matrix with Laurent-polynomial entries, row major.
#[derive(Clone, Debug, PartialEq)]
pub struct LaurentMatrix {
    rows: usize,
    cols: usize,
    entries: Vec<LaurentPoly>,
}

impl LaurentMatrix {
    pub fn zero(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            entries: vec![LaurentPoly::zero(); rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zero(n, n);
        for i in 0..n {
            m.set(i, i, LaurentPoly::one());
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, r: usize, c: usize) -> &LaurentPoly {
        &self.entries[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, p: LaurentPoly) {
        self.entries[r * self.cols + c] = p;
    }

    /// Adjoint on the circle: transpose with conjugate-reflected entries.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(c, r, self.get(r, c).conj_reflect());
            }
        }
        out
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.scale(c)).collect(),
        }
    }

    /// Multiply every entry by `z^k`.
    pub fn shift(&self, k: i64) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            entries: self.entries.iter().map(|p| p.shift(k)).collect(),
        }
    }

    pub fn max_coeff(&self) -> f64 {
        self.entries.iter().map(|p| p.max_coeff()).fold(0.0, f64::max)
    }

    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        self.entries
            .iter()
            .zip(&other.entries)
            .map(|(a, b)| a.max_abs_diff(b))
            .fold(0.0, f64::max)
    }

    /// Pointwise value at `z = e^{2pi i xi}`.
    pub fn eval(&self, xi: f64) -> CMatrix {
        let mut out = CMatrix::zero(self.rows, self.cols);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.set(r, c, self.get(r, c).eval(xi));
            }
        }
        out
    }

    /// Deviation from the identity as a Laurent identity: the largest
    /// coefficient magnitude of `self - I`.
    pub fn identity_defect(&self) -> f64 {
        assert_eq!(self.rows, self.cols);
        let mut defect = 0.0f64;
        for r in 0..self.rows {
            for c in 0..self.cols {
                let expected = if r == c {
                    LaurentPoly::one()
                } else {
                    LaurentPoly::zero()
                };
                defect = defect.max(self.get(r, c).max_abs_diff(&expected));
            }
        }
        defect
    }
}

impl Mul for &LaurentMatrix {
    type Output = LaurentMatrix;
    fn mul(self, rhs: &LaurentMatrix) -> LaurentMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "laurent matrix product: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = LaurentMatrix::zero(self.rows, rhs.cols);
        for r in 0..self.rows {
            for c in 0..rhs.cols {
                let mut acc = LaurentPoly::zero();
                for k in 0..self.cols {
                    acc = &acc + &(self.get(r, k) * rhs.get(k, c));
                }
                out.set(r, c, acc);
            }
        }
        out
    }
}

impl Sub for &LaurentMatrix {
    type Output = LaurentMatrix;
    fn sub(self, rhs: &LaurentMatrix) -> LaurentMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols));
        LaurentMatrix {
            rows: self.rows,
            cols: self.cols,
            entries: self
                .entries
                .iter()
                .zip(&rhs.entries)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

const DET_MAX: usize = 6;

/// Exact determinant of a square Laurent matrix by cofactor expansion.
///
/// A nonzero trigonometric polynomial vanishes only on a null set of `xi`, so
/// the result decides "singular for a.e. `xi`" exactly: the determinant is
/// identically zero iff all coefficients vanish. Capped at 6x6 (720 terms);
/// larger inputs should fall back to sampled rank tests.
pub fn laurent_det(m: &LaurentMatrix) -> Result<LaurentPoly, LinalgError> {
    if m.rows() != m.cols() {
        return Err(LinalgError::ShapeMismatch(format!(
            "determinant of {}x{}",
            m.rows(),
            m.cols()
        )));
    }
    if m.rows() > DET_MAX {
        return Err(LinalgError::TooLarge {
            size: m.rows(),
            max: DET_MAX,
        });
    }
    Ok(det_rec(m, &(0..m.rows()).collect::<Vec<_>>(), 0))
}

fn det_rec(m: &LaurentMatrix, cols: &[usize], row: usize) -> LaurentPoly {
    if cols.len() == 1 {
        return m.get(row, cols[0]).clone();
    }
    let mut acc = LaurentPoly::zero();
    for (k, &c) in cols.iter().enumerate() {
        let entry = m.get(row, c);
        if entry.is_zero() {
            continue;
        }
        let rest: Vec<usize> = cols
            .iter()
            .copied()
            .filter(|&other| other != c)
            .collect();
        let minor = det_rec(m, &rest, row + 1);
        let term = entry * &minor;
        acc = if k % 2 == 0 { &acc + &term } else { &acc - &term };
    }
    acc
}
