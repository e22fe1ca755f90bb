//! GF(2^m) arithmetic.
//!
//! Field elements are polynomials over GF(2) modulo a fixed irreducible
//! modulus of degree `m`. This backs the inner-product two-source extractor,
//! the multiplicative linear seeded extractors, and the somewhere-condenser.
//!
//! Moduli are verified irreducible at construction: by literal trial division
//! for small degrees and by Rabin's deterministic irreducibility test above
//! that (the two are cross-checked in tests). Default moduli are the
//! lexicographically smallest irreducibles per degree — documented, searched
//! deterministically, and cached — with a fixed table of known sparse
//! irreducibles for the large degrees where a search would be wasteful.
//!
//! Multiplication is shift-and-add over word-packed coefficient vectors,
//! which is ample at desk scale.

use once_cell::sync::Lazy;
use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};
use std::collections::HashMap;
use std::sync::{Arc, Mutex};

use crate::bitlin::{BitMatrix, BitVector};
use crate::Error;

/// Degree cutoff below which irreducibility is checked by literal trial
/// division (all candidate divisors up to degree m/2).
const TRIAL_DIVISION_MAX_M: usize = 24;

/// Known sparse irreducibles for degrees where searching the smallest one
/// would be slow. Entries are verified by Rabin's test at construction.
const SPARSE_IRREDUCIBLES: &[(usize, &[usize])] = &[
    (512, &[512, 8, 5, 2, 0]),
    (1024, &[1024, 19, 6, 1, 0]),
];

// ---------------------------------------------------------------------------
// Word-level polynomial arithmetic over GF(2). Polynomials are coefficient
// words, bit i = coefficient of x^i.

fn pdeg(p: &[u64]) -> Option<usize> {
    for (w, &word) in p.iter().enumerate().rev() {
        if word != 0 {
            return Some(w * 64 + (63 - word.leading_zeros() as usize));
        }
    }
    None
}

fn pget(p: &[u64], i: usize) -> bool {
    p.get(i / 64).is_some_and(|w| w >> (i % 64) & 1 == 1)
}

fn pxor(a: &mut Vec<u64>, b: &[u64], shift: usize) {
    // a ^= b << shift
    let (ws, bs) = (shift / 64, shift % 64);
    let need = b.len() + ws + 1;
    if a.len() < need {
        a.resize(need, 0);
    }
    for (i, &w) in b.iter().enumerate() {
        a[i + ws] ^= w << bs;
        if bs != 0 {
            a[i + ws + 1] ^= w >> (64 - bs);
        }
    }
}

fn pmul(a: &[u64], b: &[u64]) -> Vec<u64> {
    let (da, db) = (pdeg(a), pdeg(b));
    let (Some(da), Some(db)) = (da, db) else {
        return vec![0];
    };
    let mut out = vec![0u64; (da + db) / 64 + 2];
    for i in 0..=da {
        if pget(a, i) {
            pxor(&mut out, b, i);
        }
    }
    out
}

/// Reduces `a` modulo `f` in place-ish; returns the remainder.
fn pmod(a: &[u64], f: &[u64]) -> Vec<u64> {
    let df = pdeg(f).expect("zero modulus");
    let mut r = a.to_vec();
    while let Some(dr) = pdeg(&r) {
        if dr < df {
            break;
        }
        pxor(&mut r, f, dr - df);
    }
    r.truncate(df / 64 + 1);
    r.resize(df / 64 + 1, 0);
    r
}

fn pgcd(a: &[u64], b: &[u64]) -> Vec<u64> {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    loop {
        if pdeg(&b).is_none() {
            return a;
        }
        let r = pmod(&a, &b);
        a = b;
        b = r;
    }
}

/// Computes x^(2^k) mod f by k successive squarings.
fn x_pow_pow2_mod(k: usize, f: &[u64]) -> Vec<u64> {
    let mut t = vec![2u64]; // the polynomial x
    for _ in 0..k {
        t = pmod(&pmul(&t, &t), f);
    }
    t
}

fn is_irreducible_rabin(f: &[u64]) -> bool {
    let Some(m) = pdeg(f) else { return false };
    if m == 0 {
        return false;
    }
    // x^(2^m) == x mod f
    let mut t = x_pow_pow2_mod(m, f);
    let x_red = pmod(&[2u64], f);
    pxor(&mut t, &x_red, 0);
    if pdeg(&t).is_some() {
        return false;
    }
    // For every prime p | m: gcd(x^(2^(m/p)) - x, f) == 1
    let mut rem = m;
    let mut p = 2;
    let mut primes = Vec::new();
    while p * p <= rem {
        if rem % p == 0 {
            primes.push(p);
            while rem % p == 0 {
                rem /= p;
            }
        }
        p += 1;
    }
    if rem > 1 {
        primes.push(rem);
    }
    for p in primes {
        let mut t = x_pow_pow2_mod(m / p, f);
        pxor(&mut t, &x_red, 0);
        let g = pgcd(f, &t);
        if pdeg(&g) != Some(0) {
            return false;
        }
    }
    true
}

fn is_irreducible_trial_division(f: &[u64]) -> bool {
    let Some(m) = pdeg(f) else { return false };
    if m == 0 {
        return false;
    }
    debug_assert!(m <= TRIAL_DIVISION_MAX_M);
    // Divide by every monic polynomial of degree 1..=m/2.
    for d in 1..=m / 2 {
        for low in 0..(1u64 << d) {
            let cand = [low | (1u64 << d)];
            if pdeg(&pmod(f, &cand)).is_none() {
                return false;
            }
        }
    }
    true
}

/// Irreducibility over GF(2): literal trial division at small degree,
/// Rabin's deterministic test above.
#[must_use]
pub fn is_irreducible(f: &[u64]) -> bool {
    match pdeg(f) {
        Some(m) if m <= TRIAL_DIVISION_MAX_M => is_irreducible_trial_division(f),
        Some(_) => is_irreducible_rabin(f),
        None => false,
    }
}

// ---------------------------------------------------------------------------

/// A GF(2^m) field description: degree plus irreducible modulus.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(try_from = "FieldSpecWire", into = "FieldSpecWire")]
pub struct FieldSpec {
    m: usize,
    /// Modulus coefficients, bit i = coefficient of x^i; degree exactly m.
    /// Shared so that cloning a spec (which every element carries) is cheap.
    modulus: Arc<Vec<u64>>,
}

/// Serialized form: `{m, modulus-hex}` with the modulus as an (m+1)-bit vector.
#[derive(Serialize, Deserialize)]
struct FieldSpecWire {
    m: usize,
    modulus: String,
}

impl TryFrom<FieldSpecWire> for FieldSpec {
    type Error = Error;
    fn try_from(w: FieldSpecWire) -> Result<Self, Error> {
        let v = BitVector::from_hex(&w.modulus)?;
        if v.len() != w.m + 1 {
            return Err(Error::InvalidParameter(format!(
                "modulus must have {} bits, got {}",
                w.m + 1,
                v.len()
            )));
        }
        FieldSpec::new(w.m, v.words().to_vec())
    }
}

impl From<FieldSpec> for FieldSpecWire {
    fn from(s: FieldSpec) -> Self {
        let mut v = BitVector::zeros(s.m + 1);
        for i in 0..=s.m {
            v.set(i, pget(&s.modulus, i));
        }
        FieldSpecWire {
            m: s.m,
            modulus: v.to_hex(),
        }
    }
}

static DEFAULT_SPECS: Lazy<Mutex<HashMap<usize, FieldSpec>>> =
    Lazy::new(|| Mutex::new(HashMap::new()));

/// Lock-free cache for the small degrees the hot extraction paths use.
const SMALL_DEFAULT_MAX: usize = 128;
static SMALL_DEFAULTS: [std::sync::OnceLock<FieldSpec>; SMALL_DEFAULT_MAX + 1] =
    [const { std::sync::OnceLock::new() }; SMALL_DEFAULT_MAX + 1];

/// Word-cached default moduli for the fast path: entry m holds the default
/// degree-m modulus as a u128 (bit i = coefficient of x^i).
static SMALL_MODULI: [std::sync::OnceLock<u128>; 65] =
    [const { std::sync::OnceLock::new() }; 65];

fn small_modulus(m: usize) -> u128 {
    *SMALL_MODULI[m].get_or_init(|| {
        let spec = FieldSpec::default_for(m);
        spec.modulus[0] as u128 | (spec.modulus.get(1).copied().unwrap_or(0) as u128) << 64
    })
}

fn clmul(x: u64, y: u64) -> u128 {
    // Iterate over the operand with fewer set bits.
    let (a, mut b) = if x.count_ones() <= y.count_ones() {
        (y as u128, x)
    } else {
        (x as u128, y)
    };
    let mut prod: u128 = 0;
    while b != 0 {
        prod ^= a << b.trailing_zeros();
        b &= b - 1;
    }
    prod
}

/// Carryless multiply of two degree-< m polynomials followed by reduction by
/// the default degree-m modulus, entirely in machine words. Fast path for the
/// hot extraction loops; agrees with [`fmul`] on the default field (tested).
#[must_use]
pub fn mul_reduce_default(x: u64, y: u64, m: usize) -> u64 {
    debug_assert!(m >= 1 && m <= 64);
    let f = small_modulus(m);
    let f_low = f ^ (1u128 << m); // the modulus minus its leading term; sparse
    let mut prod = clmul(x, y);
    // Fold the high part down: x^m == f_low (mod f). Each fold multiplies the
    // overflow by the sparse tail, so this converges in a couple of steps.
    let mask = (1u128 << m) - 1;
    while prod >> m != 0 {
        let hi = prod >> m;
        prod &= mask;
        // hi has degree < m (after the first fold, much less), f_low too, so
        // the 64-bit carryless multiply suffices for m <= 64.
        prod ^= clmul(hi as u64, f_low as u64);
    }
    prod as u64
}

impl FieldSpec {
    /// Builds a field spec, verifying irreducibility of the modulus.
    pub fn new(m: usize, modulus: Vec<u64>) -> Result<Self, Error> {
        if m == 0 {
            return Err(Error::InvalidParameter("field degree must be >= 1".into()));
        }
        if pdeg(&modulus) != Some(m) {
            return Err(Error::InvalidParameter(format!(
                "modulus degree must be exactly {m}"
            )));
        }
        if !is_irreducible(&modulus) {
            return Err(Error::NotIrreducible(format!("degree-{m} modulus")));
        }
        Ok(FieldSpec { m, modulus: Arc::new(modulus) })
    }

    /// The default field of degree `m`: lexicographically smallest irreducible
    /// modulus (searched deterministically and cached), or a documented sparse
    /// irreducible for large degrees.
    #[must_use]
    pub fn default_for(m: usize) -> FieldSpec {
        assert!(m >= 1, "field degree must be >= 1");
        if m <= SMALL_DEFAULT_MAX {
            return SMALL_DEFAULTS[m]
                .get_or_init(|| FieldSpec::search_default(m))
                .clone();
        }
        FieldSpec::search_default(m)
    }

    fn search_default(m: usize) -> FieldSpec {
        if let Some(spec) = DEFAULT_SPECS.lock().unwrap().get(&m) {
            return spec.clone();
        }
        let spec = if let Some((_, exps)) = SPARSE_IRREDUCIBLES.iter().find(|(d, _)| *d == m) {
            let mut f = vec![0u64; m / 64 + 1];
            for &e in *exps {
                f[e / 64] ^= 1u64 << (e % 64);
            }
            FieldSpec::new(m, f).expect("tabled modulus must be irreducible")
        } else {
            let words = m / 64 + 1;
            let mut low: u64 = 1;
            loop {
                let mut f = vec![0u64; words];
                f[0] = low;
                f[m / 64] |= 1u64 << (m % 64);
                if is_irreducible(&f) {
                    break FieldSpec { m, modulus: Arc::new(f) };
                }
                low += 2; // constant term must stay 1
                assert!(m >= 64 || low < (1 << m), "no irreducible found");
            }
        };
        DEFAULT_SPECS
            .lock()
            .unwrap()
            .insert(m, spec.clone());
        spec
    }

    /// Field degree in bits.
    #[must_use]
    pub fn m(&self) -> usize {
        self.m
    }

    /// The zero element.
    #[must_use]
    pub fn zero(&self) -> FieldElem {
        FieldElem {
            spec: self.clone(),
            coeffs: smallvec![0; self.m.div_ceil(64)],
        }
    }

    /// The multiplicative identity.
    #[must_use]
    pub fn one(&self) -> FieldElem {
        let mut e = self.zero();
        e.coeffs[0] = 1;
        e
    }

    /// Embeds a bit vector of length <= m into the field (low coefficients).
    pub fn embed(&self, bits: &BitVector) -> Result<FieldElem, Error> {
        if bits.len() > self.m {
            return Err(Error::LengthMismatch {
                expected: self.m,
                got: bits.len(),
            });
        }
        let mut e = self.zero();
        for (i, &w) in bits.words().iter().enumerate() {
            e.coeffs[i] = w;
        }
        Ok(e)
    }

    /// Embeds the low bits of an integer.
    #[must_use]
    pub fn embed_u64(&self, v: u64) -> FieldElem {
        let mut e = self.zero();
        e.coeffs[0] = if self.m >= 64 { v } else { v & ((1u64 << self.m) - 1) };
        e
    }
}

/// An element of GF(2^m): coefficient vector of length m over GF(2).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct FieldElem {
    spec: FieldSpec,
    coeffs: SmallVec<[u64; 1]>,
}

impl FieldElem {
    /// Owning field spec.
    #[must_use]
    pub fn spec(&self) -> &FieldSpec {
        &self.spec
    }

    /// True for the zero element.
    #[must_use]
    pub fn is_zero(&self) -> bool {
        self.coeffs.iter().all(|&w| w == 0)
    }

    /// Coefficients as a bit vector of length m.
    #[must_use]
    pub fn to_bits(&self) -> BitVector {
        let mut v = BitVector::zeros(self.spec.m);
        for i in 0..self.spec.m {
            if pget(&self.coeffs, i) {
                v.set(i, true);
            }
        }
        v
    }

    /// The first `out_bits` coefficients (truncation).
    #[must_use]
    pub fn truncate(&self, out_bits: usize) -> BitVector {
        assert!(out_bits <= self.spec.m);
        if out_bits <= 64 {
            let mask = if out_bits == 64 { u64::MAX } else { (1u64 << out_bits) - 1 };
            return BitVector::from_u64(self.coeffs[0] & mask, out_bits);
        }
        let mut v = BitVector::zeros(out_bits);
        for i in 0..out_bits {
            if pget(&self.coeffs, i) {
                v.set(i, true);
            }
        }
        v
    }
}

/// Field multiplication: polynomial product reduced by the modulus.
pub fn fmul(a: &FieldElem, b: &FieldElem) -> Result<FieldElem, Error> {
    if a.spec != b.spec {
        return Err(Error::FieldMismatch);
    }
    let m = a.spec.m;
    if m <= 64 {
        // Single-word fast path: carryless multiply into 128 bits, then
        // reduce by the (at most 65-bit) modulus. Allocation-free.
        let x = a.coeffs[0] as u128;
        let mut y = b.coeffs[0];
        let mut prod: u128 = 0;
        while y != 0 {
            prod ^= x << y.trailing_zeros();
            y &= y - 1;
        }
        let f = a.spec.modulus[0] as u128
            | (a.spec.modulus.get(1).copied().unwrap_or(0) as u128) << 64;
        while prod >> m != 0 {
            let d = 127 - prod.leading_zeros() as usize;
            prod ^= f << (d - m);
        }
        return Ok(FieldElem {
            spec: a.spec.clone(),
            coeffs: smallvec![prod as u64],
        });
    }
    let r = pmod(&pmul(&a.coeffs, &b.coeffs), &a.spec.modulus);
    let mut coeffs: SmallVec<[u64; 1]> = r.into();
    coeffs.resize(m.div_ceil(64), 0);
    Ok(FieldElem {
        spec: a.spec.clone(),
        coeffs,
    })
}

/// Field addition (XOR of coefficients).
pub fn fadd(a: &FieldElem, b: &FieldElem) -> Result<FieldElem, Error> {
    if a.spec != b.spec {
        return Err(Error::FieldMismatch);
    }
    let mut coeffs = a.coeffs.clone();
    for (c, w) in coeffs.iter_mut().zip(&b.coeffs) {
        *c ^= w;
    }
    Ok(FieldElem {
        spec: a.spec.clone(),
        coeffs,
    })
}

/// Multiplicative inverse by the extended Euclidean algorithm.
pub fn finv(a: &FieldElem) -> Result<FieldElem, Error> {
    if a.is_zero() {
        return Err(Error::ZeroInverse);
    }
    // Extended Euclid on (modulus, a): maintain t-coefficients only.
    let mut r0: Vec<u64> = a.spec.modulus.to_vec();
    let mut r1: Vec<u64> = a.coeffs.to_vec();
    let mut t0: Vec<u64> = vec![0];
    let mut t1: Vec<u64> = vec![1];
    while pdeg(&r1).is_some() {
        // Division step: r0 = q*r1 + r
        let d1 = pdeg(&r1).unwrap();
        let mut r = r0.clone();
        let mut q: Vec<u64> = vec![0; r0.len()];
        while let Some(dr) = pdeg(&r) {
            if dr < d1 {
                break;
            }
            let shift = dr - d1;
            pxor(&mut r, &r1, shift);
            if q.len() <= shift / 64 {
                q.resize(shift / 64 + 1, 0);
            }
            q[shift / 64] ^= 1u64 << (shift % 64);
        }
        let t = {
            // t0 - q*t1 (same as XOR of t0 with q*t1 over GF(2))
            let mut t = pmul(&q, &t1);
            pxor(&mut t, &t0, 0);
            t
        };
        r0 = r1;
        r1 = r;
        t0 = t1;
        t1 = t;
    }
    debug_assert_eq!(pdeg(&r0), Some(0), "gcd with irreducible modulus must be 1");
    let mut coeffs: SmallVec<[u64; 1]> = pmod(&t0, &a.spec.modulus).into();
    coeffs.resize(a.spec.m.div_ceil(64), 0);
    Ok(FieldElem {
        spec: a.spec.clone(),
        coeffs,
    })
}

/// The `out_bits x m` GF(2) matrix of the map `x -> truncate(fmul(a, x))`.
///
/// For nonzero `a` the full multiplication map is invertible, so the
/// truncated matrix has rank exactly `out_bits`; for `a = 0` it is the zero
/// matrix.
pub fn as_linear_map(a: &FieldElem, out_bits: usize) -> Result<BitMatrix, Error> {
    let m = a.spec.m;
    if out_bits < 1 || out_bits > m {
        return Err(Error::InvalidParameter(format!(
            "out_bits must be in 1..={m}, got {out_bits}"
        )));
    }
    if m <= 64 {
        // Column i is truncate(a * x^i); iterate t <- t*x mod f in words.
        let f = a.spec.modulus[0] as u128
            | (a.spec.modulus.get(1).copied().unwrap_or(0) as u128) << 64;
        let mut mat = BitMatrix::zeros(out_bits, m);
        let mut t = a.coeffs[0] as u128;
        for i in 0..m {
            for j in 0..out_bits {
                if t >> j & 1 == 1 {
                    mat.set(j, i, true);
                }
            }
            t <<= 1;
            if t >> m != 0 {
                t ^= f;
            }
        }
        return Ok(mat);
    }
    // Column i is truncate(a * x^i); build incrementally via t <- t*x mod f.
    let mut cols: Vec<BitVector> = Vec::with_capacity(m);
    let mut t = a.coeffs.to_vec();
    for _ in 0..m {
        let mut col = BitVector::zeros(out_bits);
        for j in 0..out_bits {
            if pget(&t, j) {
                col.set(j, true);
            }
        }
        cols.push(col);
        // t *= x, reduce once if the top coefficient spills.
        let mut shifted = vec![0u64; t.len() + 1];
        pxor(&mut shifted, &t, 1);
        t = pmod(&shifted, &a.spec.modulus);
        t.resize(m.div_ceil(64), 0);
    }
    let mut mat = BitMatrix::zeros(out_bits, m);
    for (i, col) in cols.iter().enumerate() {
        for j in 0..out_bits {
            if col.get(j) {
                mat.set(j, i, true);
            }
        }
    }
    Ok(mat)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn gf(m: usize) -> FieldSpec {
        FieldSpec::default_for(m)
    }

    #[test]
    fn gf8_mul_by_hand() {
        // GF(2^3), modulus x^3+x+1 (the lexicographically smallest, 0b1011):
        // x * x^2 = x^3 = x + 1.
        let f = gf(3);
        let x = f.embed_u64(0b010);
        let x2 = f.embed_u64(0b100);
        let prod = fmul(&x, &x2).unwrap();
        assert_eq!(prod.to_bits().to_u64(), 0b011);
        // a * 1 = a
        let a = f.embed_u64(0b101);
        assert_eq!(fmul(&a, &f.one()).unwrap(), a);
    }

    #[test]
    fn gf8_inverse_exhaustive_with_euclid_oracle() {
        let f = gf(8);
        for v in 1u64..256 {
            let a = f.embed_u64(v);
            let inv = finv(&a).unwrap();
            assert_eq!(fmul(&a, &inv).unwrap(), f.one(), "a = {v:#x}");
        }
        assert!(finv(&f.zero()).is_err());
    }

    #[test]
    fn gf3_inverse_by_hand() {
        // x^{-1} = x^2 + 1 since x(x^2+1) = x^3 + x = 1 mod x^3+x+1.
        let f = gf(3);
        let inv = finv(&f.embed_u64(0b010)).unwrap();
        assert_eq!(inv.to_bits().to_u64(), 0b101);
        assert_eq!(finv(&f.one()).unwrap(), f.one());
    }

    #[test]
    fn gf16_inverse_random() {
        let f = gf(16);
        let mut rng = ChaCha12Rng::seed_from_u64(5);
        for _ in 0..10_000 {
            let v = rng.gen_range(1u64..1 << 16);
            let a = f.embed_u64(v);
            assert_eq!(fmul(&a, &finv(&a).unwrap()).unwrap(), f.one());
        }
    }

    #[test]
    fn field_axioms_exhaustive_small() {
        // All triples for m <= 4.
        for m in 1..=4usize {
            let f = gf(m);
            let n = 1u64 << m;
            for a in 0..n {
                let ea = f.embed_u64(a);
                for b in 0..n {
                    let eb = f.embed_u64(b);
                    assert_eq!(fmul(&ea, &eb).unwrap(), fmul(&eb, &ea).unwrap());
                    for c in 0..n {
                        let ec = f.embed_u64(c);
                        let lhs = fmul(&fmul(&ea, &eb).unwrap(), &ec).unwrap();
                        let rhs = fmul(&ea, &fmul(&eb, &ec).unwrap()).unwrap();
                        assert_eq!(lhs, rhs);
                        let dist_l = fmul(&ea, &fadd(&eb, &ec).unwrap()).unwrap();
                        let dist_r =
                            fadd(&fmul(&ea, &eb).unwrap(), &fmul(&ea, &ec).unwrap()).unwrap();
                        assert_eq!(dist_l, dist_r);
                    }
                }
            }
        }
    }

    #[test]
    fn field_axioms_random_large() {
        let f = gf(48);
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        for _ in 0..100_000 {
            let a = f.embed_u64(rng.gen_range(0..1u64 << 48));
            let b = f.embed_u64(rng.gen_range(0..1u64 << 48));
            let c = f.embed_u64(rng.gen_range(0..1u64 << 48));
            let lhs = fmul(&fmul(&a, &b).unwrap(), &c).unwrap();
            let rhs = fmul(&a, &fmul(&b, &c).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
    }

    #[test]
    fn linear_map_identity_and_zero() {
        let f = gf(6);
        let id = as_linear_map(&f.one(), 6).unwrap();
        assert_eq!(id, BitMatrix::identity(6));
        let z = as_linear_map(&f.zero(), 6).unwrap();
        assert_eq!(z.rank(), 0);
    }

    #[test]
    fn linear_map_full_rank_exhaustive_gf256() {
        let f = gf(8);
        for v in 1u64..256 {
            let m = as_linear_map(&f.embed_u64(v), 3).unwrap();
            assert_eq!(m.rank(), 3, "a = {v:#x}");
        }
    }

    #[test]
    fn linear_map_matches_fmul() {
        let f = gf(12);
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..200 {
            let a = f.embed_u64(rng.gen_range(0..1 << 12));
            let x = BitVector::random(12, &mut rng);
            let m = as_linear_map(&a, 7).unwrap();
            let via_matrix = m.mul_vec(&x).unwrap();
            let via_field = fmul(&a, &f.embed(&x).unwrap()).unwrap().truncate(7);
            assert_eq!(via_matrix, via_field);
        }
    }

    #[test]
    fn truncated_map_surjective_by_enumeration() {
        // Image of x -> truncate(a x) over all x has size 2^out_bits.
        let f = gf(10);
        let a = f.embed_u64(0x2b7);
        let m = as_linear_map(&a, 4).unwrap();
        let mut image = std::collections::HashSet::new();
        for x in 0u64..1 << 10 {
            image.insert(m.mul_vec(&BitVector::from_u64(x, 10)).unwrap());
        }
        assert_eq!(image.len(), 16);
    }

    #[test]
    fn irreducibility_checks_agree() {
        // Trial division and Rabin agree on every degree <= 12 polynomial
        // sample and on the known small irreducibles.
        let mut rng = ChaCha12Rng::seed_from_u64(77);
        for _ in 0..2000 {
            let m = rng.gen_range(1usize..=12);
            let f = [rng.gen_range(0..1u64 << m) | (1u64 << m)];
            assert_eq!(
                is_irreducible_trial_division(&f),
                is_irreducible_rabin(&f),
                "f = {:#x}",
                f[0]
            );
        }
        assert!(is_irreducible(&[0b111])); // x^2+x+1
        assert!(!is_irreducible(&[0b101])); // x^2+1 = (x+1)^2
        assert!(is_irreducible(&[0b1011])); // x^3+x+1
    }

    #[test]
    fn default_moduli_are_irreducible_including_sparse_table() {
        for m in [1, 2, 3, 8, 16, 20, 31, 48, 64] {
            let _ = FieldSpec::default_for(m); // panics if search fails
        }
        let big = FieldSpec::default_for(512);
        let a = big.embed_u64(0xdead_beef);
        assert_eq!(fmul(&a, &finv(&a).unwrap()).unwrap(), big.one());
    }

    #[test]
    fn spec_mismatch_rejected() {
        let a = gf(4).embed_u64(3);
        let b = gf(5).embed_u64(3);
        assert!(fmul(&a, &b).is_err());
    }

    #[test]
    fn serde_round_trip() {
        let f = gf(16);
        let json = serde_json::to_string(&f).unwrap();
        let back: FieldSpec = serde_json::from_str(&json).unwrap();
        assert_eq!(f, back);
    }
}
