//! Frame-theoretic verdicts for dilation-and-modulation systems
//! `{Lambda_m D_{a^j} psi}`: completeness, frame bounds, window synthesis,
//! the density dichotomy, coefficient analysis and duality.
//!
//! Everything reduces to the `q x p` transform matrix `Psi` of the window on
//! the fundamental cell `[1, delta) x [0, 1)`:
//!
//! * the system is complete iff `Psi` has rank `p` almost everywhere, which
//!   for step windows is decided exactly by whether `det(Psi* Psi)` is the
//!   zero Laurent polynomial on any grid cell;
//! * it is a frame with bounds `A`, `B` iff
//!   `delta^{q-1} A <= Psi* Psi <= B` on the fundamental cell, so the best
//!   bounds come from the eigenvalue extrema of `Psi* Psi`;
//! * prescribing `Psi = U [diag(lambda_s); 0] V` with unitary `U`, `V`
//!   synthesizes every complete system and every frame, and such windows
//!   exist iff `p <= q`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lattice::{gcd, LatticeError, MDParams};
use crate::linalg::{
    gram_inverse, hermitian_eigen, laurent_det, CMatrix, LaurentMatrix, LaurentPoly, LinalgError,
};
use crate::signal::{md_inner, GeoGrid, StepFunction};
use crate::transform::{
    transform_matrix, window_from_matrix, ParamsRepr, TransformError, TransformMatrix,
};

/// Relative floor below which the smallest eigenvalue counts as zero.
pub const FRAME_REL_THRESHOLD: f64 = 1e-10;
/// Relative tolerance of the exact zero-determinant test.
pub const DET_ZERO_REL_TOL: f64 = 1e-12;
/// Stopping tolerance of the sample-doubling refinement.
pub const REFINE_REL_TOL: f64 = 1e-6;
/// Hard cap on `xi` samples per cell.
pub const XI_SAMPLES_CAP: u32 = 4096;
/// Caps of the dual-window adaptation.
pub const DUAL_XI_CAP: u32 = 8192;
pub const DUAL_TRUNC_CAP: i64 = 64;
/// Reconstruction residual the dual-window adaptation aims for.
pub const DUAL_RESIDUAL_TARGET: f64 = 1e-8;
/// Cap of the adaptive modulation range in coefficient analysis.
pub const M_MAX_CAP: i64 = 1 << 14;

#[derive(Debug, Error)]
pub enum FrameError {
    #[error("unitarity violated in factor {factor} at cell {cell}: defect {defect:.3e}")]
    UnitarityViolated {
        cell: usize,
        factor: char,
        defect: f64,
    },
    #[error("density violated: p = {p} > q = {q} admits no complete system")]
    DensityViolated { p: u32, q: u32 },
    #[error("window does not generate a frame")]
    NotAFrame,
    #[error("dual truncation did not converge: residual {residual:.3e} at K = {k}, J = {j}")]
    TruncationNotConverged { residual: f64, k: u32, j: i64 },
    #[error("synthesis data: {0}")]
    BadSpec(String),
    #[error(transparent)]
    Transform(#[from] TransformError),
    #[error(transparent)]
    Lattice(#[from] LatticeError),
}

fn ceil_div(a: i64, b: i64) -> i64 {
    a.div_euclid(b) + if a.rem_euclid(b) != 0 { 1 } else { 0 }
}

fn thread_count(work: usize) -> usize {
    let hw = std::thread::available_parallelism()
        .map(|n| n.get())
        .unwrap_or(1);
    let cap = std::env::var("MDFRAME_THREADS")
        .ok()
        .and_then(|s| s.parse::<usize>().ok())
        .filter(|&n| n > 0)
        .unwrap_or(hw);
    cap.min(work.max(1))
}

/// `Psi* Psi` of one cell as an exact Laurent matrix.
fn gram_poly(cell: &LaurentMatrix) -> LaurentMatrix {
    &cell.adjoint() * cell
}

/// How a completeness decision was reached.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum RankMethod {
    /// `p > q`: rank is structurally below `p` everywhere.
    StructuralDensity,
    /// Zero test on the exact determinant of `Psi* Psi`.
    ExactDeterminant,
    /// Sampled singular-value test (used when `p` exceeds the exact cap).
    SampledRank,
}

#[derive(Debug, Clone, Serialize)]
pub struct CompletenessReport {
    pub complete: bool,
    /// Fundamental cells on which the rank drops almost everywhere.
    pub failure_cells: Vec<i64>,
    pub method: RankMethod,
}

/// Exact completeness test: the system is complete iff no fundamental cell
/// carries an identically singular `Psi* Psi`. Falls back to a sampled rank
/// test for `p > 6`.
pub fn completeness(psi: &TransformMatrix) -> CompletenessReport {
    let params = psi.params();
    let (p, q) = (params.p(), params.q());
    if p > q {
        return CompletenessReport {
            complete: false,
            failure_cells: (0..psi.n() as i64).collect(),
            method: RankMethod::StructuralDensity,
        };
    }
    if p <= 6 {
        let mut failure_cells = Vec::new();
        for (i, cell) in psi.cells().iter().enumerate() {
            let gram = gram_poly(cell);
            let det = laurent_det(&gram).expect("p <= 6");
            let scale = gram.max_coeff().powi(p as i32);
            if det.max_coeff() <= DET_ZERO_REL_TOL * scale {
                failure_cells.push(i as i64);
            }
        }
        CompletenessReport {
            complete: failure_cells.is_empty(),
            failure_cells,
            method: RankMethod::ExactDeterminant,
        }
    } else {
        completeness_sampled(psi, 256)
    }
}

/// Sampled-rank completeness: a cell passes if some sample exhibits a
/// smallest eigenvalue of `Psi* Psi` above `1e-10` of the largest. (A
/// singular-value formulation would square that ratio to `1e-20`, below the
/// rounding floor of the eigensolver; the eigenvalue-relative threshold
/// matches the frame cutoff and stays meaningful numerically.) Kept public
/// as the cross-check and as the route for large `p`.
pub fn completeness_sampled(psi: &TransformMatrix, k: u32) -> CompletenessReport {
    let params = psi.params();
    if params.p() > params.q() {
        return CompletenessReport {
            complete: false,
            failure_cells: (0..psi.n() as i64).collect(),
            method: RankMethod::StructuralDensity,
        };
    }
    let mut failure_cells = Vec::new();
    for (i, cell) in psi.cells().iter().enumerate() {
        let gram = gram_poly(cell);
        let mut full_rank_seen = false;
        for t in 0..k {
            let eig = hermitian_eigen(&gram.eval(t as f64 / k as f64));
            let lo = eig.values[0];
            let hi = eig.values[eig.values.len() - 1];
            if hi > 0.0 && lo > FRAME_REL_THRESHOLD * hi {
                full_rank_seen = true;
                break;
            }
        }
        if !full_rank_seen {
            failure_cells.push(i as i64);
        }
    }
    CompletenessReport {
        complete: failure_cells.is_empty(),
        failure_cells,
        method: RankMethod::SampledRank,
    }
}

/// One refinement stage of the eigenvalue sweep.
#[derive(Debug, Clone, Copy, Serialize)]
pub struct RefineStep {
    pub k: u32,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

/// Eigenvalue rows of one cell: `(xi, ascending eigenvalues)`.
#[derive(Debug, Clone)]
pub struct CellProfile {
    pub cell: i64,
    pub rows: Vec<(f64, Vec<f64>)>,
}

/// Eigenvalue extrema of `Psi* Psi` over the fundamental domain, with the
/// refinement history and the final per-cell profiles.
#[derive(Debug, Clone)]
pub struct SpectralReport {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub k_final: u32,
    pub converged: bool,
    pub history: Vec<RefineStep>,
    pub profiles: Vec<CellProfile>,
}

#[derive(Debug, Clone)]
pub struct FrameAnalysis {
    pub report: SpectralReport,
    pub a_est: f64,
    pub b_est: f64,
    pub frame: bool,
}

struct SweepResult {
    profiles: Vec<CellProfile>,
    lambda_min: f64,
    lambda_max: f64,
    eig_ok: bool,
}

/// Eigenvalues of `Psi* Psi` on every cell at `k` uniform `xi` samples.
fn sweep(grams: &[LaurentMatrix], k: u32) -> SweepResult {
    let workers = thread_count(grams.len());
    let chunk = grams.len().div_ceil(workers);
    let mut pieces: Vec<(usize, Vec<CellProfile>, f64, f64, bool)> = Vec::new();
    std::thread::scope(|scope| {
        let mut handles = Vec::new();
        for (w, block) in grams.chunks(chunk).enumerate() {
            handles.push(scope.spawn(move || {
                let mut profiles = Vec::with_capacity(block.len());
                let mut lo = f64::INFINITY;
                let mut hi = f64::NEG_INFINITY;
                let mut ok = true;
                for (offset, gram) in block.iter().enumerate() {
                    let mut rows = Vec::with_capacity(k as usize);
                    for t in 0..k {
                        let xi = t as f64 / k as f64;
                        let eig = hermitian_eigen(&gram.eval(xi));
                        ok &= eig.converged;
                        lo = lo.min(eig.values[0]);
                        hi = hi.max(eig.values[eig.values.len() - 1]);
                        rows.push((xi, eig.values));
                    }
                    profiles.push(CellProfile {
                        cell: (w * chunk + offset) as i64,
                        rows,
                    });
                }
                (w, profiles, lo, hi, ok)
            }));
        }
        for handle in handles {
            pieces.push(handle.join().expect("sweep worker"));
        }
    });
    pieces.sort_by_key(|&(w, ..)| w);
    let mut profiles = Vec::with_capacity(grams.len());
    let mut lambda_min = f64::INFINITY;
    let mut lambda_max = f64::NEG_INFINITY;
    let mut eig_ok = true;
    for (_, mut block, lo, hi, ok) in pieces {
        profiles.append(&mut block);
        lambda_min = lambda_min.min(lo);
        lambda_max = lambda_max.max(hi);
        eig_ok &= ok;
    }
    SweepResult {
        profiles,
        lambda_min,
        lambda_max,
        eig_ok,
    }
}

/// Best frame bounds by sample-doubling over the fundamental domain.
///
/// The sample grids are nested, so the bracket `[lambda_min, lambda_max]`
/// widens monotonically; refinement stops once both ends move by less than
/// `1e-6` relative (the cap `K = 4096` is flagged as non-converged). The
/// estimates follow the two-sided condition on `[1, a^{1/p})`:
/// `A = delta^{-(q-1)} lambda_min` and `B = lambda_max`.
pub fn frame_bounds(psi: &TransformMatrix, k_start: u32) -> FrameAnalysis {
    assert!(
        k_start >= 16 && k_start.is_power_of_two(),
        "xi sample count must be a power of two >= 16"
    );
    let grams: Vec<LaurentMatrix> = psi.cells().iter().map(gram_poly).collect();
    let mut k = k_start.min(XI_SAMPLES_CAP);
    let mut history = Vec::new();
    let mut last = sweep(&grams, k);
    history.push(RefineStep {
        k,
        lambda_min: last.lambda_min,
        lambda_max: last.lambda_max,
    });
    let mut converged = false;
    while !converged && k < XI_SAMPLES_CAP {
        let next_k = k * 2;
        let next = sweep(&grams, next_k);
        let d_min = (next.lambda_min - last.lambda_min).abs();
        let d_max = (next.lambda_max - last.lambda_max).abs();
        let floor = next.lambda_max.abs() * 1e-12;
        converged = d_min <= REFINE_REL_TOL * next.lambda_min.abs() + floor
            && d_max <= REFINE_REL_TOL * next.lambda_max.abs() + floor;
        k = next_k;
        last = next;
        history.push(RefineStep {
            k,
            lambda_min: last.lambda_min,
            lambda_max: last.lambda_max,
        });
    }
    // A single stage can only happen at the cap; treat a flat doubling as
    // converged even at the cap.
    let report = SpectralReport {
        lambda_min: last.lambda_min,
        lambda_max: last.lambda_max,
        k_final: k,
        converged: converged && last.eig_ok,
        history,
        profiles: last.profiles,
    };
    let frame = report.lambda_min > FRAME_REL_THRESHOLD * report.lambda_max
        && report.lambda_max > 0.0;
    let a_est = report.lambda_min / psi.params().bound_gap();
    let b_est = report.lambda_max;
    FrameAnalysis {
        report,
        a_est,
        b_est,
        frame,
    }
}

/// Consistency of the spectral extrema across `[1, b)`: on the slice
/// `delta^l [1, delta)` the spectrum of `Psi* Psi` is exactly `delta^{-l}`
/// times the spectrum on `[1, delta)`, so the extrema over `[1, b)` are
/// `min = delta^{-(q-1)} min_0` and `max = max_0`. Returns the largest
/// relative deviation from that pattern at `k` samples per cell.
pub fn bounds_consistency(psi: &TransformMatrix, k: u32) -> f64 {
    let params = psi.params();
    let n = psi.n() as i64;
    let q = params.q();
    let base: Vec<LaurentMatrix> = psi.cells().iter().map(gram_poly).collect();
    let base_sweep = sweep(&base, k);
    let scale = base_sweep.lambda_max.abs().max(f64::MIN_POSITIVE);
    let mut residual = 0.0f64;
    for l in 0..q as i64 {
        let slice: Vec<LaurentMatrix> = (l * n..(l + 1) * n)
            .map(|i| gram_poly(&psi.at_cell(i)))
            .collect();
        let got = sweep(&slice, k);
        let factor = params.delta_pow(-l as f64);
        residual = residual.max((got.lambda_min - factor * base_sweep.lambda_min).abs() / scale);
        residual = residual.max((got.lambda_max - factor * base_sweep.lambda_max).abs() / scale);
    }
    residual
}

/// Full verdict for a window.
#[derive(Debug, Clone, Serialize)]
pub struct FrameVerdict {
    pub density_ok: bool,
    pub complete: bool,
    pub frame: bool,
    pub a_est: f64,
    pub b_est: f64,
    pub bound_gap: f64,
    pub tight_possible: bool,
    pub failure_cells: Vec<i64>,
    pub k_final: u32,
    pub converged: bool,
}

/// Combine the completeness and frame-bound analyses into one verdict.
pub fn analyze(psi: &TransformMatrix, k_start: u32) -> (FrameVerdict, SpectralReport) {
    let params = psi.params();
    let comp = completeness(psi);
    let fb = frame_bounds(psi, k_start);
    let verdict = FrameVerdict {
        density_ok: params.p() <= params.q(),
        complete: comp.complete,
        frame: fb.frame && comp.complete,
        a_est: fb.a_est,
        b_est: fb.b_est,
        bound_gap: params.bound_gap(),
        tight_possible: params.tight_possible(),
        failure_cells: comp.failure_cells,
        k_final: fb.report.k_final,
        converged: fb.report.converged,
    };
    (verdict, fb.report)
}

/// Report of the forced bound gap `B >= delta^{q-1} A`.
#[derive(Debug, Clone, Serialize)]
pub struct TightnessReport {
    pub satisfied: bool,
    pub ratio: f64,
    pub gap_bound: f64,
    pub tight_possible: bool,
}

pub fn tightness_check(verdict: &FrameVerdict, params: &MDParams) -> TightnessReport {
    let gap_bound = params.bound_gap();
    TightnessReport {
        satisfied: verdict.b_est >= gap_bound * verdict.a_est - 1e-8,
        ratio: if verdict.a_est > 0.0 {
            verdict.b_est / verdict.a_est
        } else {
            f64::INFINITY
        },
        gap_bound,
        tight_possible: params.tight_possible(),
    }
}

/// Frames or complete systems exist for the parameters iff `p <= q`
/// (equivalently `log_b a <= 1`); no window can evade the dichotomy.
pub fn density_verdict(p: u32, q: u32) -> Result<bool, LatticeError> {
    if p == 0 || q == 0 || gcd(p, q) != 1 {
        return Err(LatticeError::NonCoprime { p, q });
    }
    Ok(p <= q)
}

/// Prescription `Psi = U [diag(lambda_s); 0] V` per fundamental cell.
#[derive(Debug, Clone)]
pub struct SynthesisSpec {
    pub params: MDParams,
    pub n: u32,
    /// `lambdas[cell][s]` for `s in N_p`.
    pub lambdas: Vec<Vec<LaurentPoly>>,
    /// Optional `q x q` unitary per cell (identity when absent).
    pub u: Option<Vec<LaurentMatrix>>,
    /// Optional `p x p` unitary per cell (identity when absent).
    pub v: Option<Vec<LaurentMatrix>>,
}

/// Verdict implied by the synthesis data alone, before any window exists:
/// complete iff every `lambda_s` is a nonzero polynomial on every cell;
/// frame iff `|lambda_s|` stays away from zero, with the bound estimates
/// read off the sampled extrema of `|lambda_s|^2`.
#[derive(Debug, Clone, Serialize)]
pub struct SynthesisPrediction {
    pub complete: bool,
    pub frame: bool,
    pub a_pred: f64,
    pub b_pred: f64,
}

const UNITARY_TOL: f64 = 1e-12;

impl SynthesisSpec {
    /// Diagonal-only prescription `lambda_s = 1`: the canonical witness
    /// window for the existence half of the density theorem.
    pub fn unit(params: MDParams, n: u32) -> Self {
        Self {
            params,
            n,
            lambdas: vec![vec![LaurentPoly::one(); params.p() as usize]; n as usize],
            u: None,
            v: None,
        }
    }

    pub fn validate(&self) -> Result<(), FrameError> {
        let (p, q) = (self.params.p(), self.params.q());
        if p > q {
            return Err(FrameError::DensityViolated { p, q });
        }
        if self.n == 0 || self.lambdas.len() != self.n as usize {
            return Err(FrameError::BadSpec(format!(
                "expected {} lambda cells, got {}",
                self.n,
                self.lambdas.len()
            )));
        }
        for (i, row) in self.lambdas.iter().enumerate() {
            if row.len() != p as usize {
                return Err(FrameError::BadSpec(format!(
                    "cell {}: expected {} diagonal entries, got {}",
                    i,
                    p,
                    row.len()
                )));
            }
        }
        for (name, factor, dim) in [('U', &self.u, q as usize), ('V', &self.v, p as usize)] {
            if let Some(cells) = factor {
                if cells.len() != self.n as usize {
                    return Err(FrameError::BadSpec(format!(
                        "factor {name}: expected {} cells, got {}",
                        self.n,
                        cells.len()
                    )));
                }
                for (i, m) in cells.iter().enumerate() {
                    if m.rows() != dim || m.cols() != dim {
                        return Err(FrameError::BadSpec(format!(
                            "factor {name} cell {i}: expected {dim}x{dim}, got {}x{}",
                            m.rows(),
                            m.cols()
                        )));
                    }
                    let defect = (&m.adjoint() * m).identity_defect();
                    if defect > UNITARY_TOL {
                        return Err(FrameError::UnitarityViolated {
                            cell: i,
                            factor: name,
                            defect,
                        });
                    }
                }
            }
        }
        Ok(())
    }

    /// Verdict predicted from the diagonal data alone.
    pub fn predict(&self, k: u32) -> SynthesisPrediction {
        let mut complete = true;
        let mut lo = f64::INFINITY;
        let mut hi = 0.0f64;
        for row in &self.lambdas {
            for lambda in row {
                complete &= !lambda.is_zero();
                for t in 0..k {
                    let v = lambda.eval(t as f64 / k as f64).norm();
                    lo = lo.min(v);
                    hi = hi.max(v);
                }
            }
        }
        let frame = hi > 0.0 && lo > FRAME_REL_THRESHOLD.sqrt() * hi;
        SynthesisPrediction {
            complete,
            frame,
            a_pred: lo * lo / self.params.bound_gap(),
            b_pred: hi * hi,
        }
    }
}

/// Realize the prescription: build `Psi` cellwise, recover the window, and
/// return both. All completeness/frame behavior of the result is governed
/// by the diagonal entries (see [`SynthesisSpec::predict`]).
pub fn synthesize(spec: &SynthesisSpec) -> Result<(StepFunction, TransformMatrix), FrameError> {
    spec.validate()?;
    let (p, q) = (spec.params.p() as usize, spec.params.q() as usize);
    let mut cells = Vec::with_capacity(spec.n as usize);
    for i in 0..spec.n as usize {
        let mut core = LaurentMatrix::zero(q, p);
        for s in 0..p {
            core.set(s, s, spec.lambdas[i][s].clone());
        }
        let with_u = match &spec.u {
            Some(u) => &u[i] * &core,
            None => core,
        };
        let full = match &spec.v {
            Some(v) => &with_u * &v[i],
            None => with_u,
        };
        cells.push(full);
    }
    let window = window_from_matrix(spec.params, spec.n, &cells)?;
    let matrix = transform_matrix(&window);
    Ok((window, matrix))
}

/// One analyzed coefficient `<f, Lambda_m D_{a^j} psi>` computed two ways.
#[derive(Debug, Clone)]
pub struct CoeffRow {
    pub m: i64,
    pub j: i64,
    /// Time-domain route: closed-form cell sums.
    pub time: Complex64,
    /// Transform-domain route: Laurent degree extraction against the
    /// orthonormal family `e_{m,j}`.
    pub transform: Complex64,
    pub discrepancy: f64,
}

#[derive(Debug, Clone)]
pub struct CoefficientAnalysis {
    pub rows: Vec<CoeffRow>,
    /// `sum |c|^2` over the computed range, time-domain route.
    pub truncated_sum: f64,
    /// `int ||conj(Psi) Gamma f||^2` over `[1, b) x [0, 1)`: the exact value
    /// of the full coefficient sum, no truncation.
    pub exact_total: f64,
    pub relative_gap: f64,
    pub m_max: i64,
    pub converged: bool,
    pub max_discrepancy: f64,
}

/// Coefficient table of `f` against the system of `psi`, cross-validated.
///
/// The time-domain route evaluates each `<f, Lambda_m D_{a^j} psi>` by exact
/// cell sums. The transform-domain route expands `(conj(Psi) Gamma f)_r` in
/// the orthonormal family `Lambda_m(x) e^{2pi i j xi}`: the `xi` dependence
/// picks a Laurent degree, the `x` dependence a closed-form cell integral.
/// The exact total of all squared coefficients comes from circle-Parseval,
/// so the truncated sum can be driven to within `tol` of it by doubling the
/// modulation range (capped at `2^14`, reported via `converged`).
pub fn analysis_coefficients(
    f: &StepFunction,
    psi: &StepFunction,
    m_start: i64,
    tol: f64,
) -> CoefficientAnalysis {
    let (f, psi) = f.harmonize(psi);
    let params = *f.params();
    let (p, q, n) = (params.p(), params.q(), f.n());
    let qn = (q * n) as i64;
    let grid = GeoGrid::new(params, n, 0, qn);

    // g_r per [1, b) cell: (conj(Psi) Gamma f)_r as exact Laurent data.
    let mut g: Vec<Vec<LaurentPoly>> = Vec::with_capacity(q as usize);
    for r in 0..q {
        let mut per_cell = Vec::with_capacity(qn as usize);
        for i in 0..qn {
            let mut acc = LaurentPoly::zero();
            for s in 0..p {
                let shift = (p * r + q * s) as i64;
                let psi_amp = params.delta_pow(shift as f64 / 2.0);
                let psi_entry =
                    crate::transform::theta_cell(&psi, i + shift * n as i64).scale_re(psi_amp);
                let f_amp = params.delta_pow((q * s) as f64 / 2.0);
                let f_entry =
                    crate::transform::theta_cell(&f, i + (q * s * n) as i64).scale_re(f_amp);
                acc = &acc + &(&psi_entry.conj_reflect() * &f_entry);
            }
            per_cell.push(acc);
        }
        g.push(per_cell);
    }

    let exact_total: f64 = g
        .iter()
        .map(|per_cell| {
            per_cell
                .iter()
                .enumerate()
                .map(|(i, poly)| grid.width(i as i64) * poly.l2_norm_sq())
                .sum::<f64>()
        })
        .sum();

    // Dilation range: support overlap of f with the dilates of psi, extended
    // by the degrees present in the transform data.
    let pn = (p * n) as i64;
    let mut j_lo = (psi.i_min() - f.i_max()).div_euclid(pn) + 1;
    let mut j_hi = ceil_div(psi.i_max() - f.i_min(), pn) - 1;
    for (r, per_cell) in g.iter().enumerate() {
        for poly in per_cell {
            if let Some((lo, hi)) = poly.degree_range() {
                j_lo = j_lo.min(lo * q as i64 + r as i64);
                j_hi = j_hi.max(hi * q as i64 + r as i64);
            }
        }
    }
    if j_lo > j_hi {
        // Disjoint supports: nothing to sum.
        return CoefficientAnalysis {
            rows: Vec::new(),
            truncated_sum: 0.0,
            exact_total,
            relative_gap: 0.0,
            m_max: m_start,
            converged: true,
            max_discrepancy: 0.0,
        };
    }

    let transform_route = |m: i64, j_total: i64| -> Complex64 {
        let r = j_total.rem_euclid(q as i64);
        let degree = j_total.div_euclid(q as i64);
        let per_cell = &g[r as usize];
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..qn {
            let c = per_cell[i as usize].coeff(degree);
            if c.norm_sqr() > 0.0 {
                acc += c * grid.lambda_integral(m, i);
            }
        }
        acc
    };

    let mut rows: Vec<CoeffRow> = Vec::new();
    let mut truncated_sum = 0.0f64;
    let mut max_discrepancy = 0.0f64;
    let band = |m: i64, rows: &mut Vec<CoeffRow>, truncated: &mut f64, disc: &mut f64| {
        for j in j_lo..=j_hi {
            let time = md_inner(&f, &psi, m, j);
            let transform = transform_route(m, j);
            *truncated += time.norm_sqr();
            *disc = disc.max((time - transform).norm());
            rows.push(CoeffRow {
                m,
                j,
                time,
                transform,
                discrepancy: (time - transform).norm(),
            });
        }
    };

    let mut m_max = m_start.clamp(1, M_MAX_CAP);
    for m in -m_max..=m_max {
        band(m, &mut rows, &mut truncated_sum, &mut max_discrepancy);
    }
    let gap = |truncated: f64| {
        if exact_total <= f64::MIN_POSITIVE {
            0.0
        } else {
            (exact_total - truncated) / exact_total
        }
    };
    let mut relative_gap = gap(truncated_sum);
    let mut converged = relative_gap.abs() <= tol;
    while !converged && m_max < M_MAX_CAP {
        let new_m_max = (m_max * 2).min(M_MAX_CAP);
        for m in (m_max + 1)..=new_m_max {
            band(m, &mut rows, &mut truncated_sum, &mut max_discrepancy);
            band(-m, &mut rows, &mut truncated_sum, &mut max_discrepancy);
        }
        m_max = new_m_max;
        relative_gap = gap(truncated_sum);
        converged = relative_gap.abs() <= tol;
    }
    rows.sort_by_key(|row| (row.m, row.j));
    CoefficientAnalysis {
        rows,
        truncated_sum,
        exact_total,
        relative_gap,
        m_max,
        converged,
        max_discrepancy,
    }
}

/// A computed dual window with the settings that produced it.
#[derive(Debug, Clone)]
pub struct DualWindow {
    pub window: StepFunction,
    pub k: u32,
    pub j: i64,
    /// Probe reconstruction residual achieved during adaptation.
    pub residual: f64,
    /// Worst Gram condition number seen across samples.
    pub condition: f64,
}

/// One pass of the dual construction at fixed sampling `k` and Laurent
/// truncation `j_trunc`: evaluate `Psi (Psi* Psi)^{-1}` pointwise on each
/// fundamental cell, recover Laurent coefficients of every entry by discrete
/// Fourier extraction, and invert the matrix-to-window map.
pub fn dual_window_once(
    psi: &TransformMatrix,
    k: u32,
    j_trunc: i64,
) -> Result<(StepFunction, f64), FrameError> {
    let params = *psi.params();
    let (p, q) = (params.p() as usize, params.q() as usize);
    let mut condition = 1.0f64;
    let mut cells = Vec::with_capacity(psi.n() as usize);
    for cell in psi.cells() {
        // Samples of the pointwise pseudo-inverse.
        let mut samples: Vec<CMatrix> = Vec::with_capacity(k as usize);
        for t in 0..k {
            let m = cell.eval(t as f64 / k as f64);
            let (gram_inv, kappa) = gram_inverse(&m).map_err(|e| match e {
                LinalgError::Singular { .. } => FrameError::NotAFrame,
                other => FrameError::BadSpec(other.to_string()),
            })?;
            condition = condition.max(kappa);
            samples.push(m.mul(&gram_inv));
        }
        let mut dual_cell = LaurentMatrix::zero(q, p);
        for r in 0..q {
            for s in 0..p {
                let mut pairs = Vec::new();
                for d in -j_trunc..=j_trunc {
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (t, sample) in samples.iter().enumerate() {
                        let angle = -std::f64::consts::TAU * d as f64 * t as f64 / k as f64;
                        acc += sample.get(r, s) * Complex64::from_polar(1.0, angle);
                    }
                    pairs.push((d, acc / k as f64));
                }
                dual_cell.set(r, s, LaurentPoly::from_pairs(pairs));
            }
        }
        cells.push(dual_cell);
    }
    let window = window_from_matrix(params, psi.n(), &cells)?;
    Ok((window, condition))
}

const DUAL_PROBE_M_MAX: i64 = 64;

/// Adaptive dual construction: double the sample count and the Laurent
/// truncation until reconstructing the window through its own system drops
/// below `1e-8`, or the caps `K = 8192`, `J = 64` are reached.
pub fn dual_window(psi: &TransformMatrix, k_start: u32, j_start: i64) -> Result<DualWindow, FrameError> {
    let fb = frame_bounds(psi, 256);
    if !fb.frame {
        return Err(FrameError::NotAFrame);
    }
    let probe = psi.window();
    let mut k = k_start.clamp(16, DUAL_XI_CAP);
    let mut j = j_start.clamp(1, DUAL_TRUNC_CAP);
    loop {
        let (window, condition) = dual_window_once(psi, k, j)?;
        let rec = reconstruct(probe, probe, &window, DUAL_PROBE_M_MAX);
        if rec.residual < DUAL_RESIDUAL_TARGET {
            return Ok(DualWindow {
                window,
                k,
                j,
                residual: rec.residual,
                condition,
            });
        }
        if k >= DUAL_XI_CAP && j >= DUAL_TRUNC_CAP {
            return Err(FrameError::TruncationNotConverged {
                residual: rec.residual,
                k,
                j,
            });
        }
        k = (k * 2).min(DUAL_XI_CAP);
        j = (j * 2).min(DUAL_TRUNC_CAP);
    }
}

#[derive(Debug, Clone)]
pub struct Reconstruction {
    pub f_hat: StepFunction,
    pub residual: f64,
}

/// Assemble `sum_{m,j} <f, Lambda_m D_{a^j} psi> Lambda_m D_{a^j} psi_dual`
/// over the finite dilation range and `|m| <= m_max`, projected back onto the
/// step grid cellwise through the closed-form modulation integrals. Reports
/// `||f_hat - f|| / ||f||`.
pub fn reconstruct(
    f: &StepFunction,
    psi: &StepFunction,
    psi_dual: &StepFunction,
    m_max: i64,
) -> Reconstruction {
    let (f, psi) = f.harmonize(psi);
    let (f, psi_dual) = f.harmonize(psi_dual);
    let psi = psi.refine(f.n() / psi.n());
    let params = *f.params();
    let n = f.n();
    let pn = (params.p() * n) as i64;
    let j_lo = (psi.i_min() - f.i_max()).div_euclid(pn) + 1;
    let j_hi = ceil_div(psi.i_max() - f.i_min(), pn) - 1;
    let mut lo = i64::MAX;
    let mut hi = i64::MIN;
    let mut accum: std::collections::BTreeMap<i64, Complex64> = std::collections::BTreeMap::new();
    for j in j_lo..=j_hi {
        let dual_dilate = psi_dual.dilate_a(j);
        for m in -m_max..=m_max {
            let c = md_inner(&f, &psi, m, j);
            if c.norm_sqr() == 0.0 {
                continue;
            }
            for i in dual_dilate.i_min()..dual_dilate.i_max() {
                let v = dual_dilate.value(i);
                if v.norm_sqr() == 0.0 {
                    continue;
                }
                let w = f.grid().width(i);
                let lambda_avg = f.grid().lambda_integral(m, i).conj() / w;
                *accum.entry(i).or_insert(Complex64::new(0.0, 0.0)) += c * v * lambda_avg;
                lo = lo.min(i);
                hi = hi.max(i + 1);
            }
        }
    }
    let f_hat = if accum.is_empty() {
        StepFunction::zero(params, n)
    } else {
        let mut values = vec![Complex64::new(0.0, 0.0); (hi - lo) as usize];
        for (i, v) in accum {
            values[(i - lo) as usize] = v;
        }
        StepFunction::new(params, n, lo, values)
    };
    let err = f_hat.sub(&f).norm();
    let scale = f.norm();
    Reconstruction {
        f_hat,
        residual: if scale > 0.0 { err / scale } else { err },
    }
}

/// Gram matrix of the system elements `Lambda_m D_{a^j} psi` over
/// `|m| <= m_max`, `|j| <= j_max`, via the closed-form pairwise integrals.
/// Rows and columns are indexed `(m, j)` with `m` outer.
pub fn md_system_gram(psi: &StepFunction, m_max: i64, j_max: i64) -> CMatrix {
    let params = *psi.params();
    let b = params.b();
    let scale = 1.0 / (b - 1.0).sqrt();
    let m_count = (2 * m_max + 1) as usize;
    let j_count = (2 * j_max + 1) as usize;
    let side = m_count * j_count;
    let mut gram = CMatrix::zero(side, side);
    let flat = |m: i64, j: i64| ((m + m_max) as usize) * j_count + (j + j_max) as usize;
    for m in -m_max..=m_max {
        for j in -j_max..=j_max {
            let lhs = psi.dilate_a(j);
            for mp in -m_max..=m_max {
                for jp in -j_max..=j_max {
                    let rhs = psi.dilate_a(jp);
                    let lo = lhs.i_min().max(rhs.i_min());
                    let hi = lhs.i_max().min(rhs.i_max());
                    let mut acc = Complex64::new(0.0, 0.0);
                    for i in lo..hi {
                        let h = lhs.value(i) * rhs.value(i).conj();
                        if h.norm_sqr() > 0.0 {
                            // Lambda_m conj(Lambda_m') = (b-1)^{-1/2} Lambda_{m-m'}.
                            acc += h * lhs.grid().lambda_integral(m - mp, i).conj();
                        }
                    }
                    gram.set(flat(m, j), flat(mp, jp), acc * scale);
                }
            }
        }
    }
    gram
}

/// File form of a synthesis prescription.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaEntryRepr {
    pub s: u32,
    pub coeffs: Vec<(i64, f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LambdaCellRepr {
    pub cell: i64,
    pub entries: Vec<LambdaEntryRepr>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixEntryRepr {
    pub r: u32,
    pub c: u32,
    pub coeffs: Vec<(i64, f64, f64)>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MatrixCellRepr {
    pub cell: i64,
    pub entries: Vec<MatrixEntryRepr>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SynthesisSpecFile {
    pub delta: String,
    pub p: u32,
    pub q: u32,
    #[serde(rename = "N")]
    pub n: u32,
    pub lambdas: Vec<LambdaCellRepr>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub u: Option<Vec<MatrixCellRepr>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub v: Option<Vec<MatrixCellRepr>>,
}

impl SynthesisSpecFile {
    pub fn from_spec(spec: &SynthesisSpec) -> Self {
        let poly_repr = |poly: &LaurentPoly| poly.terms().map(|(d, c)| (d, c.re, c.im)).collect();
        let matrix_repr = |cells: &Vec<LaurentMatrix>| {
            cells
                .iter()
                .enumerate()
                .map(|(i, m)| MatrixCellRepr {
                    cell: i as i64,
                    entries: (0..m.rows())
                        .flat_map(|r| (0..m.cols()).map(move |c| (r, c)))
                        .filter(|&(r, c)| !m.get(r, c).is_zero())
                        .map(|(r, c)| MatrixEntryRepr {
                            r: r as u32,
                            c: c as u32,
                            coeffs: poly_repr(m.get(r, c)),
                        })
                        .collect(),
                })
                .collect()
        };
        Self {
            delta: format!("{}", spec.params.delta()),
            p: spec.params.p(),
            q: spec.params.q(),
            n: spec.n,
            lambdas: spec
                .lambdas
                .iter()
                .enumerate()
                .map(|(i, row)| LambdaCellRepr {
                    cell: i as i64,
                    entries: row
                        .iter()
                        .enumerate()
                        .map(|(s, poly)| LambdaEntryRepr {
                            s: s as u32,
                            coeffs: poly_repr(poly),
                        })
                        .collect(),
                })
                .collect(),
            u: spec.u.as_ref().map(matrix_repr),
            v: spec.v.as_ref().map(matrix_repr),
        }
    }

    pub fn to_spec(&self) -> Result<SynthesisSpec, FrameError> {
        let repr = ParamsRepr {
            delta: self.delta.clone(),
            p: self.p,
            q: self.q,
        };
        let params = repr.to_params()?;
        if self.n == 0 {
            return Err(FrameError::BadSpec("N must be positive".into()));
        }
        let (p, q) = (params.p() as usize, params.q() as usize);
        let poly_from = |coeffs: &Vec<(i64, f64, f64)>| {
            LaurentPoly::from_pairs(coeffs.iter().map(|&(d, re, im)| (d, Complex64::new(re, im))))
        };
        let mut lambdas = vec![vec![LaurentPoly::zero(); p]; self.n as usize];
        for cell in &self.lambdas {
            if cell.cell < 0 || cell.cell >= self.n as i64 {
                return Err(FrameError::BadSpec(format!(
                    "lambda cell {} outside 0..{}",
                    cell.cell, self.n
                )));
            }
            for entry in &cell.entries {
                if entry.s as usize >= p {
                    return Err(FrameError::BadSpec(format!(
                        "lambda index s = {} outside N_p",
                        entry.s
                    )));
                }
                lambdas[cell.cell as usize][entry.s as usize] = poly_from(&entry.coeffs);
            }
        }
        let matrix_from = |cells: &Vec<MatrixCellRepr>, dim: usize, name: char| {
            let mut out = vec![LaurentMatrix::zero(dim, dim); self.n as usize];
            for cell in cells {
                if cell.cell < 0 || cell.cell >= self.n as i64 {
                    return Err(FrameError::BadSpec(format!(
                        "{name} cell {} outside 0..{}",
                        cell.cell, self.n
                    )));
                }
                for entry in &cell.entries {
                    if entry.r as usize >= dim || entry.c as usize >= dim {
                        return Err(FrameError::BadSpec(format!(
                            "{name} entry ({}, {}) outside {dim}x{dim}",
                            entry.r, entry.c
                        )));
                    }
                    out[cell.cell as usize].set(
                        entry.r as usize,
                        entry.c as usize,
                        poly_from(&entry.coeffs),
                    );
                }
            }
            Ok(out)
        };
        let u = match &self.u {
            Some(cells) => Some(matrix_from(cells, q, 'U')?),
            None => None,
        };
        let v = match &self.v {
            Some(cells) => Some(matrix_from(cells, p, 'V')?),
            None => None,
        };
        Ok(SynthesisSpec {
            params,
            n: self.n,
            lambdas,
            u,
            v,
        })
    }
}
