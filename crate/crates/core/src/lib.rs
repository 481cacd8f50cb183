//! Dilation-and-modulation frame analysis on the half line.
//!
//! The half line `(0, infinity)` carries no translations, so time-frequency
//! systems there are built multiplicatively: a window `psi` is dilated by
//! powers of `a` and multiplied by `b`-dilation-periodic exponentials
//! `Lambda_m`. This crate makes that theory computational for rational
//! `log_b a = p/q`:
//!
//! * [`lattice`] — exact parameter arithmetic: the `(delta, p, q)`
//!   parameterization, the Bezout pair, the residue bijection and integer
//!   tiling certificate, and the structural shift unitaries;
//! * [`linalg`] — Laurent polynomials on the unit circle and small dense
//!   Hermitian eigenproblems;
//! * [`signal`] — step functions on the `delta`-geometric grid with exact
//!   dilations, inner products, and closed-form modulation integrals;
//! * [`transform`] — the unitary per-cell Laurent transform, its inverse,
//!   the `q x p` transform matrix of a window, and checkers for the
//!   quasi-periodicity and recurrence identities;
//! * [`frames`] — completeness and frame verdicts, bound estimation, window
//!   synthesis from diagonal data, the density dichotomy `p <= q`,
//!   cross-validated coefficient analysis, and dual-window reconstruction.

pub mod frames;
pub mod lattice;
pub mod linalg;
pub mod signal;
pub mod transform;

pub use frames::{
    analysis_coefficients, analyze, bounds_consistency, completeness, completeness_sampled,
    density_verdict, dual_window, dual_window_once, frame_bounds, md_system_gram, reconstruct,
    synthesize, tightness_check, CoefficientAnalysis, CompletenessReport, DualWindow,
    FrameAnalysis, FrameError, FrameVerdict, RankMethod, Reconstruction, SpectralReport,
    SynthesisPrediction, SynthesisSpec, SynthesisSpecFile, TightnessReport,
};
pub use lattice::{
    gcd, lq_matrix, partition_certificate, rp_matrix, structural_matrix, um_matrix, unique_bezout,
    BezoutPair, LatticeError, MDParams, ResidueMap, StructuralKind, TileInterval, MAX_ORDER,
};
pub use linalg::{
    gram_inverse, hermitian_eigen, laurent_det, CMatrix, Eigen, LaurentMatrix, LaurentPoly,
    LinalgError,
};
pub use signal::{
    lambda_gram, md_inner, random_window, GeoGrid, SignalError, StepFunction, WindowFile,
};
pub use transform::{
    check_quasi_periodicity, check_recurrences, gamma, gamma_point, theta, theta_cell,
    theta_inverse, theta_point, transform_matrix, transform_matrix_from_cells,
    window_from_matrix, GammaField, ParamsRepr, PsiFile, RecurrenceReport, ThetaField,
    TransformError, TransformMatrix,
};

/// num-complex re-export so downstream crates agree on the scalar type.
pub use num_complex::Complex64;
