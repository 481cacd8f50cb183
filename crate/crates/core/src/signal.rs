//! Piecewise-constant signals on a geometric grid over the half line.
//!
//! Cell `i` is the interval `[delta^{i/N}, delta^{(i+1)/N})`, so the grid is
//! uniform in `log_delta x` with `N` cells per factor of `delta`. Because
//! `a`, `b` and `beta` are integer powers of `delta`, dilating by any of them
//! is an exact integer index shift, every `b`-annulus boundary lies on a cell
//! boundary, and the modulation functions integrate against cells in closed
//! form. That is what lets the rest of the crate test analytic identities at
//! rounding-error sharpness.
//!
//! The modulation family is `Lambda_m(x) = (b-1)^{-1/2} e^{2pi i m x/(b-1)}`
//! on `[1, b)`, extended to all of the half line by `b`-dilation periodicity
//! `Lambda_m(b x) = Lambda_m(x)`; it is an orthonormal basis of `L^2[1, b)`.

use std::f64::consts::TAU;

use num_complex::Complex64;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::MDParams;
use crate::linalg::CMatrix;

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("window file: {0}")]
    BadFile(String),
    #[error("grids disagree: {0}")]
    GridMismatch(String),
}

/// Index range of cells on the geometric grid: cells `i_min..i_max`, each
/// `[delta^{i/N}, delta^{(i+1)/N})`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeoGrid {
    params: MDParams,
    n: u32,
    i_min: i64,
    i_max: i64,
}

impl GeoGrid {
    pub fn new(params: MDParams, n: u32, i_min: i64, i_max: i64) -> Self {
        assert!(n >= 1, "grid needs at least one cell per delta factor");
        assert!(i_min < i_max, "grid range must be nonempty");
        Self {
            params,
            n,
            i_min,
            i_max,
        }
    }

    pub fn params(&self) -> &MDParams {
        &self.params
    }

    /// Cells per factor of `delta`.
    pub fn n(&self) -> u32 {
        self.n
    }

    pub fn i_min(&self) -> i64 {
        self.i_min
    }

    pub fn i_max(&self) -> i64 {
        self.i_max
    }

    pub fn len(&self) -> usize {
        (self.i_max - self.i_min) as usize
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Left endpoint `delta^{i/N}` of cell `i`.
    pub fn point(&self, i: i64) -> f64 {
        self.params.delta_pow(i as f64 / self.n as f64)
    }

    pub fn width(&self, i: i64) -> f64 {
        self.point(i + 1) - self.point(i)
    }

    /// Index of the `b`-annulus `[b^k, b^{k+1})` containing cell `i`.
    pub fn annulus_of(&self, i: i64) -> i64 {
        i.div_euclid((self.params.q() * self.n) as i64)
    }

    /// Cell containing `x > 0`. Intended for sample points away from cell
    /// boundaries; boundary values may land on either side by rounding.
    pub fn cell_of(&self, x: f64) -> i64 {
        (x.ln() / self.params.delta().ln() * self.n as f64).floor() as i64
    }

    /// Closed-form `int_{cell i} conj(Lambda_m(x)) dx`.
    ///
    /// With `u = x b^{-k}` mapping the cell into the base annulus `[1, b)`
    /// the integrand is `(b-1)^{-1/2} e^{-i theta u}` with
    /// `theta = 2 pi m / (b - 1)`, so the antiderivative is elementary; the
    /// `m = 0` branch avoids the removable singularity.
    pub fn lambda_integral(&self, m: i64, i: i64) -> Complex64 {
        let b = self.params.b();
        let qn = (self.params.q() * self.n) as i64;
        let k = i.div_euclid(qn);
        let i0 = i.rem_euclid(qn);
        let u0 = self.params.delta_pow(i0 as f64 / self.n as f64);
        let u1 = self.params.delta_pow((i0 + 1) as f64 / self.n as f64);
        let bk = self.params.delta_pow((self.params.q() as i64 * k) as f64);
        let root = (b - 1.0).sqrt();
        if m == 0 {
            return Complex64::new(bk * (u1 - u0) / root, 0.0);
        }
        let theta = TAU * m as f64 / (b - 1.0);
        let num = Complex64::from_polar(1.0, -theta * u1) - Complex64::from_polar(1.0, -theta * u0);
        let denom = Complex64::new(0.0, -theta);
        num / denom * (bk / root)
    }

    /// Pointwise `Lambda_m(x)`.
    pub fn lambda_eval(&self, m: i64, x: f64) -> Complex64 {
        let b = self.params.b();
        let k = (x.ln() / b.ln()).floor();
        let u = x * b.powf(-k);
        Complex64::from_polar(1.0 / (b - 1.0).sqrt(), TAU * m as f64 * u / (b - 1.0))
    }
}

/// A compactly supported function `f = sum_i v_i chi_{cell i}` in
/// `L^2(R_+)`; the concrete model for windows and signals.
#[derive(Debug, Clone, PartialEq)]
pub struct StepFunction {
    grid: GeoGrid,
    values: Vec<Complex64>,
}

impl StepFunction {
    pub fn new(params: MDParams, n: u32, i_min: i64, values: Vec<Complex64>) -> Self {
        assert!(!values.is_empty(), "step function needs at least one cell");
        let i_max = i_min + values.len() as i64;
        Self {
            grid: GeoGrid::new(params, n, i_min, i_max),
            values,
        }
    }

    /// Characteristic function of `[delta^{i_min/N}, delta^{i_max/N})`.
    pub fn indicator(params: MDParams, n: u32, i_min: i64, i_max: i64) -> Self {
        assert!(i_min < i_max);
        Self::new(
            params,
            n,
            i_min,
            vec![Complex64::new(1.0, 0.0); (i_max - i_min) as usize],
        )
    }

    pub fn zero(params: MDParams, n: u32) -> Self {
        Self::new(params, n, 0, vec![Complex64::new(0.0, 0.0); n as usize])
    }

    pub fn grid(&self) -> &GeoGrid {
        &self.grid
    }

    pub fn params(&self) -> &MDParams {
        self.grid.params()
    }

    pub fn n(&self) -> u32 {
        self.grid.n()
    }

    pub fn i_min(&self) -> i64 {
        self.grid.i_min()
    }

    pub fn i_max(&self) -> i64 {
        self.grid.i_max()
    }

    pub fn values(&self) -> &[Complex64] {
        &self.values
    }

    /// Value on cell `i`; zero outside the stored range.
    pub fn value(&self, i: i64) -> Complex64 {
        if i < self.i_min() || i >= self.i_max() {
            Complex64::new(0.0, 0.0)
        } else {
            self.values[(i - self.i_min()) as usize]
        }
    }

    /// Pointwise value at `x > 0`.
    pub fn eval(&self, x: f64) -> Complex64 {
        self.value(self.grid.cell_of(x))
    }

    pub fn norm_sq(&self) -> f64 {
        self.values
            .iter()
            .enumerate()
            .map(|(k, v)| v.norm_sqr() * self.grid.width(self.i_min() + k as i64))
            .sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&self, c: Complex64) -> Self {
        Self {
            grid: self.grid,
            values: self.values.iter().map(|v| v * c).collect(),
        }
    }

    /// Same function on the grid with `factor * N` cells per `delta`:
    /// values replicate, so the function is unchanged pointwise.
    pub fn refine(&self, factor: u32) -> Self {
        assert!(factor >= 1);
        if factor == 1 {
            return self.clone();
        }
        let f = factor as i64;
        let mut values = Vec::with_capacity(self.values.len() * factor as usize);
        for v in &self.values {
            values.extend(std::iter::repeat_n(*v, factor as usize));
        }
        Self::new(
            *self.params(),
            self.n() * factor,
            self.i_min() * f,
            values,
        )
    }

    /// The unitary dilation `delta^{k/2} f(delta^k x)`: an index shift by
    /// `-kN` plus amplitude scale, hence an exact norm isometry.
    pub fn dilate(&self, k: i64) -> Self {
        let shift = k * self.n() as i64;
        let amp = self.params().delta_pow(k as f64 / 2.0);
        Self::new(
            *self.params(),
            self.n(),
            self.i_min() - shift,
            self.values.iter().map(|v| v * amp).collect(),
        )
    }

    /// Dilation by `a^j = delta^{pj}`.
    pub fn dilate_a(&self, j: i64) -> Self {
        self.dilate(j * self.params().p() as i64)
    }

    fn assert_compatible(&self, other: &Self) {
        assert_eq!(
            self.params(),
            other.params(),
            "step functions live on different parameter sets"
        );
    }

    /// Refine both operands onto the least common grid.
    pub fn harmonize(&self, other: &Self) -> (Self, Self) {
        self.assert_compatible(other);
        let n1 = self.n();
        let n2 = other.n();
        let l = lcm(n1, n2);
        (self.refine(l / n1), other.refine(l / n2))
    }

    /// `<f, g> = int f conj(g)`, exact for step data on a common grid.
    pub fn inner_product(&self, other: &Self) -> Complex64 {
        let (f, g) = self.harmonize(other);
        let lo = f.i_min().max(g.i_min());
        let hi = f.i_max().min(g.i_max());
        let mut acc = Complex64::new(0.0, 0.0);
        for i in lo..hi {
            acc += f.value(i) * g.value(i).conj() * f.grid.width(i);
        }
        acc
    }

    /// `f - g` on the common grid over the union of supports.
    pub fn sub(&self, other: &Self) -> Self {
        let (f, g) = self.harmonize(other);
        let lo = f.i_min().min(g.i_min());
        let hi = f.i_max().max(g.i_max());
        let values = (lo..hi).map(|i| f.value(i) - g.value(i)).collect();
        Self::new(*f.params(), f.n(), lo, values)
    }

    /// Largest cell-value difference against another step function.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        let (f, g) = self.harmonize(other);
        let lo = f.i_min().min(g.i_min());
        let hi = f.i_max().max(g.i_max());
        (lo..hi)
            .map(|i| (f.value(i) - g.value(i)).norm())
            .fold(0.0, f64::max)
    }
}

fn lcm(a: u32, b: u32) -> u32 {
    a / crate::lattice::gcd(a, b) * b
}

/// `<f, Lambda_m D_{a^j} psi>`: exact, because `f` and the dilated window are
/// cellwise constant while `Lambda_m` integrates in closed form per cell.
pub fn md_inner(f: &StepFunction, psi: &StepFunction, m: i64, j: i64) -> Complex64 {
    let (f, psi) = f.harmonize(psi);
    let g = psi.dilate_a(j);
    let lo = f.i_min().max(g.i_min());
    let hi = f.i_max().min(g.i_max());
    let mut acc = Complex64::new(0.0, 0.0);
    for i in lo..hi {
        let weight = f.value(i) * g.value(i).conj();
        if weight.norm_sqr() > 0.0 {
            acc += weight * f.grid.lambda_integral(m, i);
        }
    }
    acc
}

/// Gram matrix `<Lambda_m, Lambda_m'>` over `[1, b)` for `|m|, |m'| <= m_max`,
/// assembled from the closed-form cell integrals. Should be the identity.
pub fn lambda_gram(params: MDParams, n: u32, m_max: i64) -> CMatrix {
    let qn = (params.q() * n) as i64;
    let grid = GeoGrid::new(params, n, 0, qn);
    let side = (2 * m_max + 1) as usize;
    let mut gram = CMatrix::zero(side, side);
    let scale = 1.0 / (params.b() - 1.0).sqrt();
    for (row, m) in (-m_max..=m_max).enumerate() {
        for (col, mp) in (-m_max..=m_max).enumerate() {
            // Lambda_m conj(Lambda_m') = (b-1)^{-1/2} Lambda_{m-m'}, so the
            // entry is the conjugated full-range integral of conj(Lambda_{m-m'}).
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..qn {
                acc += grid.lambda_integral(m - mp, i);
            }
            gram.set(row, col, acc.conj() * scale);
        }
    }
    gram
}

/// Seeded random window: independent values uniform on the complex unit disk
/// over the cells `i_min..i_max`.
pub fn random_window<R: Rng>(
    params: MDParams,
    n: u32,
    i_min: i64,
    i_max: i64,
    rng: &mut R,
) -> StepFunction {
    assert!(i_min < i_max);
    let values = (0..(i_max - i_min))
        .map(|_| unit_disk(rng))
        .collect();
    StepFunction::new(params, n, i_min, values)
}

pub fn unit_disk<R: Rng>(rng: &mut R) -> Complex64 {
    loop {
        let re: f64 = rng.random::<f64>() * 2.0 - 1.0;
        let im: f64 = rng.random::<f64>() * 2.0 - 1.0;
        if re * re + im * im <= 1.0 {
            return Complex64::new(re, im);
        }
    }
}

/// On-disk window/signal format: `delta` as a decimal string parsed to the
/// nearest binary double, cell values as `[re, im]` pairs ordered by cell
/// index.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WindowFile {
    pub delta: String,
    pub p: u32,
    pub q: u32,
    #[serde(rename = "N")]
    pub n: u32,
    pub i_min: i64,
    pub values: Vec<[f64; 2]>,
}

impl WindowFile {
    pub fn from_step(f: &StepFunction) -> Self {
        Self {
            delta: format!("{}", f.params().delta()),
            p: f.params().p(),
            q: f.params().q(),
            n: f.n(),
            i_min: f.i_min(),
            values: f.values().iter().map(|v| [v.re, v.im]).collect(),
        }
    }

    pub fn to_step(&self) -> Result<StepFunction, SignalError> {
        let delta: f64 = self
            .delta
            .parse()
            .map_err(|e| SignalError::BadFile(format!("delta {:?}: {e}", self.delta)))?;
        let params = MDParams::new(delta, self.p, self.q)
            .map_err(|e| SignalError::BadFile(e.to_string()))?;
        if self.n == 0 {
            return Err(SignalError::BadFile("N must be positive".into()));
        }
        if self.values.is_empty() {
            return Err(SignalError::BadFile("values must be nonempty".into()));
        }
        Ok(StepFunction::new(
            params,
            self.n,
            self.i_min,
            self.values
                .iter()
                .map(|&[re, im]| Complex64::new(re, im))
                .collect(),
        ))
    }
}
