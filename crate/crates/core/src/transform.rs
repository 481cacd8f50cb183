//! The per-cell Laurent transform of a step signal, its vectorization, and
//! the transform matrix of a window.
//!
//! For a step function the transform
//! `Theta f(x, xi) = sum_l beta^{l/2} f(beta^l x) e^{-2pi i l xi}`
//! is constant in `x` on every grid cell and a finite Laurent polynomial in
//! `z = e^{2pi i xi}`, so it is stored exactly: cell `i` carries the series
//! with coefficient `beta^{l/2} v_{i + pq l N}` at degree `-l`. The map is
//! unitary onto `L^2([1, beta) x [0, 1))`, and a window `psi` is completely
//! described by the `q x p` matrix
//! `Psi_{r,s}(x, xi) = a^{r/2} b^{s/2} Theta psi(a^r b^s x, xi)`
//! on the fundamental cell `[1, delta)`, which is what [`TransformMatrix`]
//! stores. Multiplying by `e^{2pi i j xi}` is a degree shift and the
//! substitution `xi -> xi + m` is the identity on integer-degree Laurent
//! data, so the structural identities of the transform hold here to rounding
//! error and are exposed as explicit checkers.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{lq_matrix, rp_matrix, um_matrix, MDParams};
use crate::linalg::{LaurentMatrix, LaurentPoly};
use crate::signal::{GeoGrid, StepFunction};

#[derive(Debug, Error)]
pub enum TransformError {
    #[error("transform matrix data misaligned: {0}")]
    GridMisaligned(String),
}

fn floor_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn ceil_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b) + if a.rem_euclid(b) != 0 { 1 } else { 0 }
}

/// The Laurent series of `Theta f` on grid cell `cell` (any integer index):
/// coefficient `beta^{l/2} f_{cell + pq l N}` at degree `-l`.
pub fn theta_cell(f: &StepFunction, cell: i64) -> LaurentPoly {
    let params = f.params();
    let period = (params.p() * params.q() * f.n()) as i64;
    let l_lo = ceil_div(f.i_min() - cell, period);
    let l_hi = floor_div(f.i_max() - 1 - cell, period);
    let pq = (params.p() * params.q()) as f64;
    let mut terms = Vec::new();
    for l in l_lo..=l_hi {
        let v = f.value(cell + l * period);
        if v.norm_sqr() > 0.0 {
            let amp = params.delta_pow(pq * l as f64 / 2.0);
            terms.push((-l, v * amp));
        }
    }
    LaurentPoly::from_pairs(terms)
}

/// `Theta f` over one `beta`-annulus: cells `0..pqN` covering `[1, beta)`.
#[derive(Debug, Clone)]
pub struct ThetaField {
    params: MDParams,
    n: u32,
    cells: Vec<LaurentPoly>,
}

impl ThetaField {
    pub fn params(&self) -> &MDParams {
        &self.params
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn cells(&self) -> &[LaurentPoly] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &LaurentPoly {
        &self.cells[i]
    }

    /// `||Theta f||^2` over `[1, beta) x [0, 1)`, via circle-Parseval per
    /// cell. Equals `||f||^2` since the transform is unitary.
    pub fn norm_sq(&self) -> f64 {
        let grid = GeoGrid::new(self.params, self.n, 0, self.cells.len() as i64);
        self.cells
            .iter()
            .enumerate()
            .map(|(i, p)| grid.width(i as i64) * p.l2_norm_sq())
            .sum()
    }
}

pub fn theta(f: &StepFunction) -> ThetaField {
    let params = *f.params();
    let count = (params.p() * params.q() * f.n()) as i64;
    ThetaField {
        params,
        n: f.n(),
        cells: (0..count).map(|i| theta_cell(f, i)).collect(),
    }
}

/// Inverse of [`theta`]: exact coefficient extraction,
/// `f(beta^l x_i) = beta^{-l/2} (coefficient of z^{-l} in cell i)`.
pub fn theta_inverse(field: &ThetaField) -> StepFunction {
    let params = field.params;
    let period = field.cells.len() as i64;
    let pq = (params.p() * params.q()) as f64;
    let mut entries: Vec<(i64, Complex64)> = Vec::new();
    for (i, poly) in field.cells.iter().enumerate() {
        for (d, c) in poly.terms() {
            let l = -d;
            let amp = params.delta_pow(-pq * l as f64 / 2.0);
            entries.push((i as i64 + l * period, c * amp));
        }
    }
    build_step(params, field.n, entries)
}

fn build_step(params: MDParams, n: u32, entries: Vec<(i64, Complex64)>) -> StepFunction {
    if entries.is_empty() {
        return StepFunction::zero(params, n);
    }
    let lo = entries.iter().map(|&(i, _)| i).min().unwrap();
    let hi = entries.iter().map(|&(i, _)| i).max().unwrap() + 1;
    let mut values = vec![Complex64::new(0.0, 0.0); (hi - lo) as usize];
    for (i, v) in entries {
        // Target indices are distinct by the residue bijection; accumulation
        // keeps the builder correct for any caller regardless.
        values[(i - lo) as usize] += v;
    }
    StepFunction::new(params, n, lo, values)
}

/// The vectorization `Gamma f(x, .)_s = b^{s/2} Theta f(b^s x, .)` for
/// `s in N_p`, stored on the `qN` cells covering `[1, b)`.
#[derive(Debug, Clone)]
pub struct GammaField {
    params: MDParams,
    n: u32,
    /// `cells[i][s]`, `i` over `[1, b)`, `s` over `N_p`.
    cells: Vec<Vec<LaurentPoly>>,
}

impl GammaField {
    pub fn params(&self) -> &MDParams {
        &self.params
    }

    pub fn cells(&self) -> &[Vec<LaurentPoly>] {
        &self.cells
    }

    pub fn component(&self, i: usize, s: usize) -> &LaurentPoly {
        &self.cells[i][s]
    }

    /// `||Gamma f||^2` over `[1, b) x [0, 1)` with values in `C^p`.
    pub fn norm_sq(&self) -> f64 {
        let grid = GeoGrid::new(self.params, self.n, 0, self.cells.len() as i64);
        self.cells
            .iter()
            .enumerate()
            .map(|(i, comps)| {
                grid.width(i as i64) * comps.iter().map(|p| p.l2_norm_sq()).sum::<f64>()
            })
            .sum()
    }
}

pub fn gamma(f: &StepFunction) -> GammaField {
    let params = *f.params();
    let n = f.n();
    let qn = (params.q() * n) as i64;
    let cells = (0..qn)
        .map(|i| {
            (0..params.p())
                .map(|s| {
                    let amp = params.delta_pow((params.q() * s) as f64 / 2.0);
                    theta_cell(f, i + (params.q() * s * n) as i64).scale_re(amp)
                })
                .collect()
        })
        .collect();
    GammaField { params, n, cells }
}

/// The `q x p` transform matrix of a window on the fundamental domain
/// `[1, delta)`, one Laurent matrix per grid cell, along with the window it
/// came from (values outside the fundamental domain are re-derived from the
/// window on demand).
#[derive(Debug, Clone)]
pub struct TransformMatrix {
    params: MDParams,
    n: u32,
    cells: Vec<LaurentMatrix>,
    window: StepFunction,
}

impl TransformMatrix {
    pub fn params(&self) -> &MDParams {
        &self.params
    }

    pub fn n(&self) -> u32 {
        self.n
    }

    /// Matrices on the fundamental cells `0..N`.
    pub fn cells(&self) -> &[LaurentMatrix] {
        &self.cells
    }

    pub fn cell(&self, i: usize) -> &LaurentMatrix {
        &self.cells[i]
    }

    pub fn window(&self) -> &StepFunction {
        &self.window
    }

    /// The matrix on an arbitrary grid cell (equivalently, on
    /// `delta^{cell/N} [1, delta^{1/N})`), computed from the window data by
    /// re-indexing. Ground truth for the recurrence checkers and for sweeps
    /// over `[1, b)`.
    pub fn at_cell(&self, cell: i64) -> LaurentMatrix {
        matrix_at_cell(&self.window, self.n, cell)
    }
}

fn matrix_at_cell(psi: &StepFunction, n: u32, cell: i64) -> LaurentMatrix {
    let params = *psi.params();
    let (p, q) = (params.p(), params.q());
    let mut m = LaurentMatrix::zero(q as usize, p as usize);
    for r in 0..q {
        for s in 0..p {
            let shift = (p * r + q * s) as i64;
            let amp = params.delta_pow(shift as f64 / 2.0); // a^{r/2} b^{s/2}
            m.set(
                r as usize,
                s as usize,
                theta_cell(psi, cell + shift * n as i64).scale_re(amp),
            );
        }
    }
    m
}

/// Assemble the transform matrix of a window over `[1, delta)`.
pub fn transform_matrix(psi: &StepFunction) -> TransformMatrix {
    let params = *psi.params();
    let n = psi.n();
    let cells = (0..n as i64)
        .map(|i| matrix_at_cell(psi, n, i))
        .collect();
    TransformMatrix {
        params,
        n,
        cells,
        window: psi.clone(),
    }
}

/// The unique window with the given matrix data on `[1, delta)`:
/// `psi(beta^j a^r b^s x_i) = beta^{-j/2} a^{-r/2} b^{-s/2} c`, where `c` is
/// the coefficient of `z^{-j}` in entry `(r, s)` of cell `i`. Well defined
/// because `(r, s) -> pr + qs mod pq` is a bijection, so every target cell
/// is written exactly once. The cell range of the result grows as needed.
pub fn window_from_matrix(
    params: MDParams,
    n: u32,
    cells: &[LaurentMatrix],
) -> Result<StepFunction, TransformError> {
    if n == 0 || cells.len() != n as usize {
        return Err(TransformError::GridMisaligned(format!(
            "expected N = {} cell matrices, got {}",
            n,
            cells.len()
        )));
    }
    let (p, q) = (params.p(), params.q());
    for (i, m) in cells.iter().enumerate() {
        if m.rows() != q as usize || m.cols() != p as usize {
            return Err(TransformError::GridMisaligned(format!(
                "cell {} has shape {}x{}, expected {}x{}",
                i,
                m.rows(),
                m.cols(),
                q,
                p
            )));
        }
    }
    let pq = (p * q) as i64;
    let mut entries: Vec<(i64, Complex64)> = Vec::new();
    for (i, m) in cells.iter().enumerate() {
        for r in 0..q as i64 {
            for s in 0..p as i64 {
                for (d, c) in m.get(r as usize, s as usize).terms() {
                    let j = -d;
                    let t = pq * j + p as i64 * r + q as i64 * s;
                    let amp = params.delta_pow(-(t as f64) / 2.0);
                    entries.push((t * n as i64 + i as i64, c * amp));
                }
            }
        }
    }
    Ok(build_step(params, n, entries))
}

/// Construct a [`TransformMatrix`] from raw per-cell data by recovering the
/// window first; the stored matrices are then re-derived from the window so
/// that both views agree exactly.
pub fn transform_matrix_from_cells(
    params: MDParams,
    n: u32,
    cells: &[LaurentMatrix],
) -> Result<TransformMatrix, TransformError> {
    let window = window_from_matrix(params, n, cells)?;
    Ok(transform_matrix(&window))
}

/// Residual of the quasi-periodicity
/// `Theta f(beta^j x, xi + m) = beta^{-j/2} e^{2pi i j xi} Theta f(x, xi)`
/// over one annulus of base cells, relative to the largest coefficient
/// magnitude entering the comparison (floored at 1). The substitution
/// `xi -> xi + m` is the identity on Laurent data, so `m` does not enter the
/// arithmetic; it is kept to document which instance of the identity was
/// checked.
pub fn check_quasi_periodicity(f: &StepFunction, j: i64, _m: i64) -> f64 {
    let params = f.params();
    let period = (params.p() * params.q() * f.n()) as i64;
    let amp = params.delta_pow(-((params.p() * params.q()) as f64) * j as f64 / 2.0);
    let mut diff = 0.0f64;
    let mut scale = 1.0f64;
    for i in 0..period {
        let lhs = theta_cell(f, i + j * period);
        let rhs = theta_cell(f, i).shift(j).scale_re(amp);
        scale = scale.max(lhs.max_coeff());
        diff = diff.max(lhs.max_abs_diff(&rhs));
    }
    diff / scale
}

/// Residuals of the structural recurrences of the transform matrix, each
/// relative to the largest coefficient magnitude involved (floored at 1).
#[derive(Debug, Clone)]
pub struct RecurrenceReport {
    /// Residual of `Psi(a^{lq+m} x, xi) = a^{-(lq+m)/2} z^l U_m(xi) Psi(x, xi)`
    /// per checked `(l, m)`.
    pub u_residuals: Vec<(i64, u32, f64)>,
    /// Residual of `Psi(delta x, xi) = delta^{-1/2} L_q(xi) Psi(x, xi) R_p(xi)`;
    /// `None` when `p = 1` or `q = 1` (the factorization needs both orders
    /// above 1).
    pub delta_step: Option<f64>,
}

impl RecurrenceReport {
    pub fn max_residual(&self) -> f64 {
        self.u_residuals
            .iter()
            .map(|&(_, _, r)| r)
            .chain(self.delta_step)
            .fold(0.0, f64::max)
    }
}

/// Check the dilation recurrences of a transform matrix against the window
/// data, for `l in {-1, 0, 1}` and every shift class `m in N_q`.
pub fn check_recurrences(psi: &TransformMatrix) -> RecurrenceReport {
    let params = psi.params();
    let (p, q) = (params.p(), params.q());
    let n = psi.n() as i64;
    let mut u_residuals = Vec::new();
    for l in [-1i64, 0, 1] {
        for m in 0..q {
            let u = um_matrix(q, m).expect("m < q");
            let exponent = l * q as i64 + m as i64;
            let amp = params.delta_pow(-(p as i64 * exponent) as f64 / 2.0);
            let mut diff = 0.0f64;
            let mut scale = 1.0f64;
            for i in 0..n {
                let lhs = psi.at_cell(i + p as i64 * exponent * n);
                let rhs = (&u * psi.cell(i as usize)).shift(l).scale(Complex64::new(amp, 0.0));
                scale = scale.max(lhs.max_coeff());
                diff = diff.max(lhs.max_abs_diff(&rhs));
            }
            u_residuals.push((l, m, diff / scale));
        }
    }
    let delta_step = if p > 1 && q > 1 {
        let l = lq_matrix(p, q).expect("p, q > 1");
        let r = rp_matrix(p, q).expect("p, q > 1");
        let amp = Complex64::new(params.delta_pow(-0.5), 0.0);
        let mut diff = 0.0f64;
        let mut scale = 1.0f64;
        for i in 0..n {
            let lhs = psi.at_cell(i + n);
            let rhs = (&(&l * psi.cell(i as usize)) * &r).scale(amp);
            scale = scale.max(lhs.max_coeff());
            diff = diff.max(lhs.max_abs_diff(&rhs));
        }
        Some(diff / scale)
    } else {
        None
    };
    RecurrenceReport {
        u_residuals,
        delta_step,
    }
}

/// Pointwise `Theta f(x, xi)` by direct series evaluation.
pub fn theta_point(f: &StepFunction, x: f64, xi: f64) -> Complex64 {
    let params = f.params();
    let base = f.grid().cell_of(x);
    let period = (params.p() * params.q() * f.n()) as i64;
    let pq = (params.p() * params.q()) as f64;
    let l_lo = ceil_div(f.i_min() - base, period);
    let l_hi = floor_div(f.i_max() - 1 - base, period);
    let mut acc = Complex64::new(0.0, 0.0);
    for l in l_lo..=l_hi {
        let v = f.value(base + l * period);
        if v.norm_sqr() > 0.0 {
            let amp = params.delta_pow(pq * l as f64 / 2.0);
            acc += v * amp * Complex64::from_polar(1.0, -std::f64::consts::TAU * l as f64 * xi);
        }
    }
    acc
}

/// Pointwise `Gamma f(x, xi)` as a `p`-vector.
pub fn gamma_point(f: &StepFunction, x: f64, xi: f64) -> Vec<Complex64> {
    let params = f.params();
    (0..params.p())
        .map(|s| {
            let amp = params.delta_pow((params.q() * s) as f64 / 2.0);
            let bs = params.delta_pow((params.q() * s) as f64);
            theta_point(f, bs * x, xi) * amp
        })
        .collect()
}

/// Serialized parameters: `delta` as a decimal string.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamsRepr {
    pub delta: String,
    pub p: u32,
    pub q: u32,
}

impl ParamsRepr {
    pub fn from_params(p: &MDParams) -> Self {
        Self {
            delta: format!("{}", p.delta()),
            p: p.p(),
            q: p.q(),
        }
    }

    pub fn to_params(&self) -> Result<MDParams, TransformError> {
        let delta: f64 = self
            .delta
            .parse()
            .map_err(|e| TransformError::GridMisaligned(format!("delta {:?}: {e}", self.delta)))?;
        MDParams::new(delta, self.p, self.q)
            .map_err(|e| TransformError::GridMisaligned(e.to_string()))
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiEntryRepr {
    pub r: u32,
    pub s: u32,
    /// `[degree, re, im]` triples sorted by degree.
    pub coeffs: Vec<(i64, f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiCellRepr {
    pub cell: i64,
    pub entries: Vec<PsiEntryRepr>,
}

/// On-disk form of a transform matrix.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PsiFile {
    pub params: ParamsRepr,
    #[serde(rename = "N")]
    pub n: u32,
    pub cells: Vec<PsiCellRepr>,
}

impl PsiFile {
    pub fn from_matrix(m: &TransformMatrix) -> Self {
        let cells = m
            .cells()
            .iter()
            .enumerate()
            .map(|(i, cell)| {
                let mut entries = Vec::new();
                for r in 0..cell.rows() {
                    for s in 0..cell.cols() {
                        let poly = cell.get(r, s);
                        if poly.is_zero() {
                            continue;
                        }
                        entries.push(PsiEntryRepr {
                            r: r as u32,
                            s: s as u32,
                            coeffs: poly.terms().map(|(d, c)| (d, c.re, c.im)).collect(),
                        });
                    }
                }
                PsiCellRepr {
                    cell: i as i64,
                    entries,
                }
            })
            .collect();
        Self {
            params: ParamsRepr::from_params(m.params()),
            n: m.n(),
            cells,
        }
    }

    /// Decode into raw per-cell matrices.
    pub fn to_cells(&self) -> Result<(MDParams, u32, Vec<LaurentMatrix>), TransformError> {
        let params = self.params.to_params()?;
        if self.n == 0 || self.cells.len() != self.n as usize {
            return Err(TransformError::GridMisaligned(format!(
                "expected N = {} cells, got {}",
                self.n,
                self.cells.len()
            )));
        }
        let (p, q) = (params.p() as usize, params.q() as usize);
        let mut cells = vec![LaurentMatrix::zero(q, p); self.n as usize];
        for repr in &self.cells {
            if repr.cell < 0 || repr.cell >= self.n as i64 {
                return Err(TransformError::GridMisaligned(format!(
                    "cell index {} outside 0..{}",
                    repr.cell, self.n
                )));
            }
            let target = &mut cells[repr.cell as usize];
            for entry in &repr.entries {
                if entry.r as usize >= q || entry.s as usize >= p {
                    return Err(TransformError::GridMisaligned(format!(
                        "entry ({}, {}) outside {}x{}",
                        entry.r, entry.s, q, p
                    )));
                }
                let poly = LaurentPoly::from_pairs(
                    entry
                        .coeffs
                        .iter()
                        .map(|&(d, re, im)| (d, Complex64::new(re, im))),
                );
                target.set(entry.r as usize, entry.s as usize, poly);
            }
        }
        Ok((params, self.n, cells))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::signal::random_window;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn params(delta: f64, p: u32, q: u32) -> MDParams {
        MDParams::new(delta, p, q).unwrap()
    }

    #[test]
    fn theta_of_base_indicator_is_one() {
        let pr = params(2.0, 2, 3);
        let n = 1;
        let pqn = (pr.p() * pr.q() * n) as i64;
        let f = StepFunction::indicator(pr, n, 0, pqn); // chi_[1, beta)
        let field = theta(&f);
        for cell in field.cells() {
            assert!(cell.max_abs_diff(&LaurentPoly::one()) < 1e-15);
        }
    }

    #[test]
    fn theta_of_shifted_indicator_is_scaled_monomial() {
        let pr = params(2.0, 1, 1);
        let n = 2;
        let pqn = n as i64;
        let f = StepFunction::indicator(pr, n, pqn, 2 * pqn); // chi_[beta, beta^2)
        let field = theta(&f);
        let expected = LaurentPoly::monomial(-1, Complex64::new(pr.beta().sqrt(), 0.0));
        for cell in field.cells() {
            assert!(cell.max_abs_diff(&expected) < 1e-15);
        }
    }

    #[test]
    fn theta_is_unitary_on_random_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for (delta, p, q, n) in [(2.0, 1, 1, 3), (2.0, 1, 2, 2), (2.0, 2, 3, 1), (1.5, 3, 4, 1)] {
            let pr = params(delta, p, q);
            let span = (p * q * n) as i64;
            let f = random_window(pr, n, -span, 2 * span, &mut rng);
            let norm = f.norm_sq();
            let field = theta(&f);
            assert!((field.norm_sq() - norm).abs() <= 1e-12 * norm);
            let gam = gamma(&f);
            assert!((gam.norm_sq() - norm).abs() <= 1e-12 * norm);
        }
    }

    #[test]
    fn theta_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let pr = params(2.0, 2, 3);
        let f = random_window(pr, 2, -7, 20, &mut rng);
        let back = theta_inverse(&theta(&f));
        assert!(back.max_abs_diff(&f) < 1e-13);

        // Constant field of ones is the base indicator.
        let n = 1;
        let field = ThetaField {
            params: pr,
            n,
            cells: vec![LaurentPoly::one(); (pr.p() * pr.q() * n) as usize],
        };
        let f = theta_inverse(&field);
        let expected = StepFunction::indicator(pr, n, 0, (pr.p() * pr.q() * n) as i64);
        assert!(f.max_abs_diff(&expected) == 0.0);
    }

    #[test]
    fn gamma_reduces_to_theta_when_p_is_one() {
        let pr = params(2.0, 1, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let f = random_window(pr, 2, -2, 6, &mut rng);
        let g = gamma(&f);
        let t = theta(&f);
        for (i, comps) in g.cells().iter().enumerate() {
            assert_eq!(comps.len(), 1);
            assert!(comps[0].max_abs_diff(t.cell(i)) == 0.0);
        }
    }

    #[test]
    fn gamma_component_vanishes_off_support() {
        // delta = 2, p = 2, q = 3: component s = 1 of chi_[1, 2) vanishes on [1, b).
        let pr = params(2.0, 2, 3);
        let f = StepFunction::indicator(pr, 1, 0, 1);
        let g = gamma(&f);
        for comps in g.cells() {
            assert!(comps[1].is_zero());
        }
    }

    #[test]
    fn transform_matrix_trivial_cases() {
        // p = q = 1, chi_[1, a): constant 1.
        let pr = params(2.0, 1, 1);
        let f = StepFunction::indicator(pr, 1, 0, 1);
        let m = transform_matrix(&f);
        assert_eq!((m.cell(0).rows(), m.cell(0).cols()), (1, 1));
        assert!(m.cell(0).get(0, 0).max_abs_diff(&LaurentPoly::one()) < 1e-15);

        // p = 1, q = 2, chi_[1, a): column (1, 0).
        let pr = params(2.0, 1, 2);
        let f = StepFunction::indicator(pr, 2, 0, 2);
        let m = transform_matrix(&f);
        for cell in m.cells() {
            assert!(cell.get(0, 0).max_abs_diff(&LaurentPoly::one()) < 1e-15);
            assert!(cell.get(1, 0).is_zero());
        }
    }

    #[test]
    fn window_round_trips_through_matrix() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for (delta, p, q, n) in [(2.0, 1, 1, 2), (2.0, 1, 2, 2), (2.0, 2, 3, 1), (1.5, 3, 4, 1)] {
            let pr = params(delta, p, q);
            let span = (p * q * n) as i64;
            let psi = random_window(pr, n, -span - 1, span + 3, &mut rng);
            let m = transform_matrix(&psi);
            let back = window_from_matrix(pr, n, m.cells()).unwrap();
            assert!(back.max_abs_diff(&psi) < 1e-13, "({delta},{p},{q})");
        }
    }

    #[test]
    fn matrix_round_trips_through_window() {
        // Arbitrary cell data, not derived from any window beforehand.
        let pr = params(2.0, 2, 3);
        let mut cell = LaurentMatrix::zero(3, 2);
        cell.set(0, 0, LaurentPoly::from_pairs(vec![(0, Complex64::new(0.7, -0.2)), (2, Complex64::new(-0.4, 0.1))]));
        cell.set(1, 1, LaurentPoly::monomial(-1, Complex64::new(0.3, 0.9)));
        cell.set(2, 0, LaurentPoly::monomial(1, Complex64::new(-1.1, 0.5)));
        let m = transform_matrix_from_cells(pr, 1, &[cell.clone()]).unwrap();
        assert!(m.cell(0).max_abs_diff(&cell) < 1e-13);
    }

    #[test]
    fn window_from_matrix_validates_shape() {
        let pr = params(2.0, 2, 3);
        let bad = vec![LaurentMatrix::zero(2, 2)];
        assert!(matches!(
            window_from_matrix(pr, 1, &bad),
            Err(TransformError::GridMisaligned(_))
        ));
        let wrong_count = vec![LaurentMatrix::zero(3, 2); 2];
        assert!(window_from_matrix(pr, 1, &wrong_count).is_err());
    }

    #[test]
    fn quasi_periodicity_residuals() {
        let pr = params(2.0, 2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let f = random_window(pr, 2, -5, 17, &mut rng);
        assert_eq!(check_quasi_periodicity(&f, 0, 0), 0.0);
        for (j, m) in [(1i64, 5i64), (-2, 1), (3, -4)] {
            let r = check_quasi_periodicity(&f, j, m);
            assert!(r < 1e-13, "j={j}, m={m}: residual {r}");
        }
    }

    #[test]
    fn recurrences_hold_for_random_windows() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        let pr = params(2.0, 2, 3);
        let psi = random_window(pr, 1, -6, 13, &mut rng);
        let m = transform_matrix(&psi);
        let report = check_recurrences(&m);
        assert!(report.delta_step.is_some());
        assert!(report.max_residual() < 1e-12, "{report:?}");

        // Degenerate orders skip the two-sided factorization.
        let pr = params(2.0, 1, 2);
        let psi = random_window(pr, 2, -2, 6, &mut rng);
        let report = check_recurrences(&transform_matrix(&psi));
        assert!(report.delta_step.is_none());
        assert!(report.max_residual() < 1e-12);
    }

    #[test]
    fn extension_offsets() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let pr = params(2.0, 2, 3);
        let n = 2u32;
        let psi = random_window(pr, n, -6, 14, &mut rng);
        let m = transform_matrix(&psi);
        // Offset 0 reproduces the stored cells.
        for i in 0..n as i64 {
            assert!(m.at_cell(i).max_abs_diff(m.cell(i as usize)) == 0.0);
        }
        // One full beta: quasi-periodicity z beta^{-1/2} Psi.
        let pqn = (pr.p() * pr.q() * n) as i64;
        let amp = Complex64::new(pr.delta_pow(-((pr.p() * pr.q()) as f64) / 2.0), 0.0);
        for i in 0..n as i64 {
            let lhs = m.at_cell(i + pqn);
            let rhs = m.cell(i as usize).shift(1).scale(amp);
            assert!(lhs.max_abs_diff(&rhs) < 1e-12);
        }
    }

    #[test]
    fn pointwise_and_cell_views_agree() {
        let mut rng = ChaCha8Rng::seed_from_u64(41);
        let pr = params(2.0, 2, 3);
        let f = random_window(pr, 2, -4, 11, &mut rng);
        let field = theta(&f);
        for (i, xi) in [(0usize, 0.17), (3, 0.62), (7, 0.91)] {
            let x = f.grid().point(i as i64) * 1.0001; // stay inside the cell
            let direct = theta_point(&f, x, xi);
            let stored = field.cell(i).eval(xi);
            assert!((direct - stored).norm() < 1e-12);
        }
    }

    #[test]
    fn psi_file_round_trip() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let pr = params(2.0, 2, 3);
        let psi = random_window(pr, 1, -3, 9, &mut rng);
        let m = transform_matrix(&psi);
        let file = PsiFile::from_matrix(&m);
        let json = serde_json::to_string(&file).unwrap();
        let back: PsiFile = serde_json::from_str(&json).unwrap();
        let (params2, n2, cells) = back.to_cells().unwrap();
        assert_eq!(&params2, m.params());
        assert_eq!(n2, m.n());
        for (a, b) in cells.iter().zip(m.cells()) {
            assert!(a.max_abs_diff(b) < 1e-15);
        }
    }
}
