use std::hint::black_box;

use criterion::{criterion_group, criterion_main, Criterion};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use mdframe_core::*;

fn random_poly<R: Rng>(rng: &mut R, max_deg: i64) -> LaurentPoly {
    LaurentPoly::from_pairs((-max_deg..=max_deg).map(|d| {
        (
            d,
            Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5),
        )
    }))
}

fn random_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize, max_deg: i64) -> LaurentMatrix {
    let mut m = LaurentMatrix::zero(rows, cols);
    for r in 0..rows {
        for c in 0..cols {
            m.set(r, c, random_poly(rng, max_deg));
        }
    }
    m
}

fn bench_laurent_product(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(1);
    let a = random_matrix(&mut rng, 4, 4, 8);
    let b = random_matrix(&mut rng, 4, 4, 8);
    c.bench_function("laurent_matrix_product_4x4_deg8", |bencher| {
        bencher.iter(|| black_box(&a) * black_box(&b))
    });
}

fn bench_hermitian_eigen(c: &mut Criterion) {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let n = 8;
    let mut h = CMatrix::zero(n, n);
    for r in 0..n {
        for col in r..n {
            let v = Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            if r == col {
                h.set(r, col, Complex64::new(v.re, 0.0));
            } else {
                h.set(r, col, v);
                h.set(col, r, v.conj());
            }
        }
    }
    c.bench_function("hermitian_eigen_8x8", |bencher| {
        bencher.iter(|| hermitian_eigen(black_box(&h)))
    });
}

fn bench_transform_assembly(c: &mut Criterion) {
    let params = MDParams::new(2.0, 2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let window = random_window(params, 8, -48, 96, &mut rng);
    c.bench_function("transform_matrix_2_3_n8", |bencher| {
        bencher.iter(|| transform_matrix(black_box(&window)))
    });
}

fn bench_frame_bounds(c: &mut Criterion) {
    let params = MDParams::new(2.0, 2, 3).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let window = random_window(params, 4, -24, 48, &mut rng);
    let matrix = transform_matrix(&window);
    c.bench_function("frame_bounds_2_3_n4_k256", |bencher| {
        bencher.iter(|| frame_bounds(black_box(&matrix), 256))
    });
}

criterion_group!(
    benches,
    bench_laurent_product,
    bench_hermitian_eigen,
    bench_transform_assembly,
    bench_frame_bounds
);
criterion_main!(benches);
