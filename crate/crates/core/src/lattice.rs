//! Arithmetic of the dilation-and-modulation lattice.
//!
//! Systems are parameterized by a scale `delta > 1` and coprime positive
//! integers `p`, `q`: the dilation step is `a = delta^p`, the modulation
//! period is governed by `b = delta^q`, and `beta = delta^{pq} = a^q = b^p`.
//! Feeding `(delta, p, q)` instead of `(a, b)` keeps `log_b a = p / q` exact
//! and turns every dilation in the system into an integer power of `delta`,
//! so the combinatorics below can be checked in integer arithmetic.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::linalg::{LaurentMatrix, LaurentPoly};

/// Validation cap keeping transform matrices desk-scale.
pub const MAX_ORDER: u32 = 64;

#[derive(Debug, Error, PartialEq)]
pub enum LatticeError {
    #[error("p = {p} and q = {q} must be coprime")]
    NonCoprime { p: u32, q: u32 },
    #[error("scale factor delta must exceed 1, got {delta}")]
    ScaleOutOfRange { delta: f64 },
    #[error("p = {p}, q = {q} exceed the supported order cap {MAX_ORDER}")]
    OrderTooLarge { p: u32, q: u32 },
    #[error("construction needs p > 1 and q > 1, got p = {p}, q = {q}")]
    DegenerateSetup { p: u32, q: u32 },
    #[error("shift index {m} outside 0..{q}")]
    IndexOutOfRange { m: u32, q: u32 },
}

/// The `(delta, p, q)` parameterization with its cached derived constants.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MDParams {
    delta: f64,
    p: u32,
    q: u32,
    a: f64,
    b: f64,
    beta: f64,
    bound_gap: f64,
}

pub fn gcd(mut a: u32, mut b: u32) -> u32 {
    while b != 0 {
        let t = b;
        b = a % b;
        a = t;
    }
    a
}

impl MDParams {
    pub fn new(delta: f64, p: u32, q: u32) -> Result<Self, LatticeError> {
        if delta <= 1.0 || !delta.is_finite() {
            return Err(LatticeError::ScaleOutOfRange { delta });
        }
        if p == 0 || q == 0 || p > MAX_ORDER || q > MAX_ORDER {
            return Err(LatticeError::OrderTooLarge { p, q });
        }
        if gcd(p, q) != 1 {
            return Err(LatticeError::NonCoprime { p, q });
        }
        Ok(Self {
            delta,
            p,
            q,
            a: delta.powi(p as i32),
            b: delta.powi(q as i32),
            beta: delta.powi((p * q) as i32),
            bound_gap: delta.powi(q as i32 - 1),
        })
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// Dilation base `a = delta^p`.
    pub fn a(&self) -> f64 {
        self.a
    }

    /// Modulation base `b = delta^q`.
    pub fn b(&self) -> f64 {
        self.b
    }

    /// `beta = delta^{pq} = a^q = b^p`.
    pub fn beta(&self) -> f64 {
        self.beta
    }

    /// `a^{(q-1)/p} = delta^{q-1}`: the forced ratio between upper and lower
    /// frame bounds of any frame produced by these parameters.
    pub fn bound_gap(&self) -> f64 {
        self.bound_gap
    }

    /// `delta^exp`, the one code path for all fractional scale factors.
    pub fn delta_pow(&self, exp: f64) -> f64 {
        self.delta.powf(exp)
    }

    /// Tight frames force `a = b`, i.e. `p = q = 1`.
    pub fn tight_possible(&self) -> bool {
        self.p == 1 && self.q == 1
    }
}

/// The unique pair `(r', s')` with `p r' + q s' = p q + 1`,
/// `r'` in `[1, q-1]`, `s'` in `[1, p-1]`. Exists exactly when both orders
/// exceed 1; it fixes the block split of the structural matrices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BezoutPair {
    pub r_prime: u32,
    pub s_prime: u32,
}

pub fn unique_bezout(p: u32, q: u32) -> Result<BezoutPair, LatticeError> {
    if gcd(p, q) != 1 {
        return Err(LatticeError::NonCoprime { p, q });
    }
    if p <= 1 || q <= 1 {
        return Err(LatticeError::DegenerateSetup { p, q });
    }
    // p r' = 1 (mod q) has one solution in [1, q-1]; s' follows exactly.
    for r in 1..q {
        let lhs = p as u64 * r as u64;
        if lhs % q as u64 == 1 {
            let s = (p as u64 * q as u64 + 1 - lhs) / q as u64;
            debug_assert!(s >= 1 && s < p as u64);
            return Ok(BezoutPair {
                r_prime: r,
                s_prime: s as u32,
            });
        }
    }
    unreachable!("coprime p, q > 1 always admit the Bezout pair")
}

/// The bijection `(r, s) in N_q x N_p  ->  (p r + q s) mod pq` together with
/// its inverse. It is the combinatorial reason a window is determined by its
/// transform matrix on one fundamental cell.
#[derive(Debug, Clone)]
pub struct ResidueMap {
    p: u32,
    q: u32,
    forward: Vec<u32>,
    inverse: Vec<(u32, u32)>,
}

impl ResidueMap {
    pub fn new(p: u32, q: u32) -> Result<Self, LatticeError> {
        if gcd(p, q) != 1 {
            return Err(LatticeError::NonCoprime { p, q });
        }
        let pq = (p * q) as usize;
        let mut forward = vec![0u32; pq];
        let mut inverse = vec![(u32::MAX, u32::MAX); pq];
        for r in 0..q {
            for s in 0..p {
                let t = (p * r + q * s) % (p * q);
                forward[(r * p + s) as usize] = t;
                debug_assert_eq!(inverse[t as usize], (u32::MAX, u32::MAX));
                inverse[t as usize] = (r, s);
            }
        }
        Ok(Self {
            p,
            q,
            forward,
            inverse,
        })
    }

    pub fn p(&self) -> u32 {
        self.p
    }

    pub fn q(&self) -> u32 {
        self.q
    }

    /// `(p r + q s) mod pq` for `r in N_q`, `s in N_p`.
    pub fn to_residue(&self, r: u32, s: u32) -> u32 {
        self.forward[(r * self.p + s) as usize]
    }

    pub fn from_residue(&self, t: u32) -> (u32, u32) {
        self.inverse[t as usize]
    }

    /// Splits an arbitrary integer as `t = pq j + p r + q s` with
    /// `(r, s) in N_q x N_p`; the decomposition is unique.
    pub fn split(&self, t: i64) -> (i64, u32, u32) {
        let pq = (self.p * self.q) as i64;
        let residue = t.rem_euclid(pq) as u32;
        let (r, s) = self.from_residue(residue);
        let j = (t - (self.p * r + self.q * s) as i64).div_euclid(pq);
        debug_assert_eq!(pq * j + (self.p * r + self.q * s) as i64, t);
        (j, r, s)
    }
}

/// One tile `[numer/denom, (numer+1)/denom)` of the unit interval, claimed by
/// the cell indexed `(r, s)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TileInterval {
    pub numer: u32,
    pub denom: u32,
    pub r: u32,
    pub s: u32,
}

/// Exact certificate that the `pq` intervals `(r/q + s/p + [0, 1/pq)) mod 1`
/// tile `[0, 1)`: integer arithmetic only, no tolerance. This is the
/// logarithmic image of the fact that the cells `a^r b^s [1, delta)` cover
/// one `beta`-annulus without overlap up to `beta`-dilations.
pub fn partition_certificate(p: u32, q: u32) -> Result<Vec<TileInterval>, LatticeError> {
    let map = ResidueMap::new(p, q)?;
    let pq = p * q;
    let mut tiles = Vec::with_capacity(pq as usize);
    for t in 0..pq {
        let (r, s) = map.from_residue(t);
        tiles.push(TileInterval {
            numer: t,
            denom: pq,
            r,
            s,
        });
    }
    // Each residue appears exactly once, so the tiles are pairwise disjoint
    // and their measures sum to pq * (1/pq) = 1. ResidueMap::new already
    // guarantees this; assert the sorted-cover shape anyway.
    debug_assert!(tiles.iter().enumerate().all(|(k, t)| t.numer as usize == k));
    Ok(tiles)
}

/// Which structural matrix to build.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StructuralKind {
    Lq,
    Rp,
    Um(u32),
}

/// Block cyclic-shift unitaries tied to the lattice. With `(r', s')` the
/// Bezout pair: `L_q = [[0, I_{q-r'}], [z I_{r'}, 0]]`,
/// `R_p = [[0, I_{s'}], [z^{-1} I_{p-s'}, 0]]`, and for `m in N_q`
/// `U_m = [[0, I_{q-m}], [z I_m, 0]]`. Each satisfies `M* M = I` as an exact
/// Laurent identity.
pub fn structural_matrix(p: u32, q: u32, kind: StructuralKind) -> Result<LaurentMatrix, LatticeError> {
    match kind {
        StructuralKind::Lq => {
            let pair = unique_bezout(p, q)?;
            Ok(up_shift(q, pair.r_prime, 1))
        }
        StructuralKind::Rp => {
            let pair = unique_bezout(p, q)?;
            Ok(up_shift(p, p - pair.s_prime, -1))
        }
        StructuralKind::Um(m) => {
            if m >= q {
                return Err(LatticeError::IndexOutOfRange { m, q });
            }
            Ok(up_shift(q, m, 1))
        }
    }
}

pub fn lq_matrix(p: u32, q: u32) -> Result<LaurentMatrix, LatticeError> {
    structural_matrix(p, q, StructuralKind::Lq)
}

pub fn rp_matrix(p: u32, q: u32) -> Result<LaurentMatrix, LatticeError> {
    structural_matrix(p, q, StructuralKind::Rp)
}

pub fn um_matrix(q: u32, m: u32) -> Result<LaurentMatrix, LatticeError> {
    structural_matrix(1, q, StructuralKind::Um(m))
}

/// `[[0, I_{n-k}], [z^pow I_k, 0]]`: identity block in the top-right,
/// `z^pow` block in the bottom-left.
fn up_shift(n: u32, k: u32, pow: i64) -> LaurentMatrix {
    let n = n as usize;
    let k = k as usize;
    let mut m = LaurentMatrix::zero(n, n);
    for i in 0..n - k {
        m.set(i, i + k, LaurentPoly::one());
    }
    for i in 0..k {
        m.set(n - k + i, i, LaurentPoly::monomial(pow, Complex64::new(1.0, 0.0)));
    }
    m
}
