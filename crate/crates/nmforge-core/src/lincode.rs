//! Linear error-correcting codes over GF(2).
//!
//! Provides the generic linear-code container used by the advice generator
//! (a constant-rate, constant-distance code `E`) and the dual-BCH
//! construction used by the invertible extractor. BCH codes are built the
//! classical way: generator polynomial over GF(2^s) with consecutive roots
//! alpha^1 .. alpha^(2 t_b - 1), cyclotomic cosets computed on the fly; the
//! dual code's generator is the reciprocal of the check polynomial.
//!
//! The property the invertible extractor leans on is the dual-distance
//! guarantee: the BCH designed distance `2 t_b` means any `<= 2 t_b - 1`
//! columns of the dual generator are linearly independent; in particular any
//! `t_b`-sized coordinate subset of dual codeword positions is linearly
//! unconstrained.
//!
//! Messages are encoded as `gen^T . msg` (rows of `gen` are basis codewords);
//! no decoding is provided — nothing here ever decodes `E`.

use serde::{Deserialize, Serialize};

use crate::bitlin::{BitMatrix, BitVector};
use crate::field2m::{fmul, FieldElem, FieldSpec};
use crate::Error;

/// Primitive polynomials per degree s (so that the class of x generates the
/// multiplicative group of GF(2^s)), used for BCH root fields. Documented
/// constants; primitivity is asserted at construction.
const PRIMITIVE_POLYS: &[(usize, u64)] = &[
    (2, 0b111),
    (3, 0b1011),
    (4, 0b10011),
    (5, 0b100101),
    (6, 0b1000011),
    (7, 0b10000011),
    (8, 0b100011101),
    (9, 0b1000010001),
    (10, 0b10000001001),
    (11, 0b100000000101),
    (12, 0b1000001010011),
];

/// A linear code: generator matrix plus claimed rate/distance bookkeeping.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct LinearCodeSpec {
    /// Block length (codeword bits).
    pub n_out: usize,
    /// Message length (rows of the generator).
    pub k_in: usize,
    /// Generator matrix, `k_in x n_out`; rows are basis codewords.
    pub gen: BitMatrix,
    /// Claimed rate `k_in / n_out`.
    pub rate: f64,
    /// Claimed relative minimum distance (may be a conservative bound).
    pub rel_distance: f64,
}

impl LinearCodeSpec {
    /// Builds a code from an explicit generator, verifying full row rank.
    pub fn from_generator(gen: BitMatrix, rel_distance: f64) -> Result<Self, Error> {
        let (k_in, n_out) = (gen.nrows(), gen.ncols());
        if gen.rank() != k_in {
            return Err(Error::InvalidParameter(
                "generator matrix must have full row rank".into(),
            ));
        }
        Ok(LinearCodeSpec {
            n_out,
            k_in,
            rate: k_in as f64 / n_out as f64,
            rel_distance,
            gen,
        })
    }

    /// Encodes a `k_in`-bit message to an `n_out`-bit codeword: `msg . gen`.
    pub fn encode(&self, msg: &BitVector) -> Result<BitVector, Error> {
        if msg.len() != self.k_in {
            return Err(Error::LengthMismatch {
                expected: self.k_in,
                got: msg.len(),
            });
        }
        let mut cw = BitVector::zeros(self.n_out);
        for i in 0..self.k_in {
            if msg.get(i) {
                cw.xor_assign(self.gen.row(i));
            }
        }
        Ok(cw)
    }

    /// Codeword bit `p` as a linear functional of the message: column `p` of
    /// the generator, i.e. the length-`k_in` vector `r` with
    /// `encode(msg)[p] = <r, msg>`.
    #[must_use]
    pub fn position_row(&self, p: usize) -> BitVector {
        let mut r = BitVector::zeros(self.k_in);
        for i in 0..self.k_in {
            if self.gen.get(i, p) {
                r.set(i, true);
            }
        }
        r
    }

    /// Exhaustive minimum nonzero codeword weight; requires `k_in <= 20`.
    #[must_use]
    pub fn min_distance_exhaustive(&self) -> usize {
        assert!(self.k_in <= 20, "message space too large to enumerate");
        let mut best = self.n_out;
        for m in 1u64..(1u64 << self.k_in) {
            let w = self
                .encode(&BitVector::from_u64(m, self.k_in))
                .unwrap()
                .count_ones() as usize;
            best = best.min(w);
        }
        best
    }
}

/// Ordered projection of a codeword onto sampled positions (duplicates kept).
pub fn project(cw: &BitVector, idx: &[usize]) -> Result<BitVector, Error> {
    cw.select(idx)
}

/// Cyclotomic coset of `i` modulo `n` (n = 2^s - 1): `{i, 2i, 4i, ...}`.
fn cyclotomic_coset(i: usize, n: usize) -> Vec<usize> {
    let mut coset = vec![i % n];
    let mut cur = (2 * i) % n;
    while cur != i % n {
        coset.push(cur);
        cur = (2 * cur) % n;
    }
    coset
}

/// Builds the dual of the BCH code of length `n_b = 2^s - 1` with designed
/// distance `2 t_b` (roots alpha^1 .. alpha^(2 t_b - 1)).
///
/// The returned generator has `sum of coset sizes` rows — `t_b * s` when all
/// the odd cosets are full-sized and disjoint — and satisfies the
/// dual-distance property described in the module docs.
pub fn build_dual_bch(n_b: usize, t_b: usize) -> Result<LinearCodeSpec, Error> {
    let s = (n_b + 1).trailing_zeros() as usize;
    if n_b < 3 || n_b + 1 != 1 << s {
        return Err(Error::InvalidParameter(format!(
            "n_b must be 2^s - 1, got {n_b}"
        )));
    }
    if t_b == 0 || t_b * s > n_b {
        return Err(Error::InvalidParameter(format!(
            "t_b = {t_b} out of range for n_b = {n_b}"
        )));
    }
    let &(_, poly) = PRIMITIVE_POLYS
        .iter()
        .find(|(deg, _)| *deg == s)
        .ok_or_else(|| Error::InvalidParameter(format!("no primitive polynomial for s = {s}")))?;
    let field = FieldSpec::new(s, vec![poly])?;
    let alpha = field.embed_u64(2); // the class of x
    assert!(
        {
            // Primitivity: the order of alpha is exactly n_b.
            let mut t = field.one();
            let mut order = 0usize;
            loop {
                t = fmul(&t, &alpha).unwrap();
                order += 1;
                if t == field.one() {
                    break;
                }
            }
            order == n_b
        },
        "tabled polynomial for s = {s} is not primitive"
    );

    // Union of cyclotomic cosets of the designed roots 1 .. 2 t_b - 1.
    let mut root_exps: Vec<usize> = Vec::new();
    for i in 1..=(2 * t_b - 1) {
        for e in cyclotomic_coset(i, n_b) {
            if !root_exps.contains(&e) {
                root_exps.push(e);
            }
        }
    }
    root_exps.sort_unstable();

    // Generator polynomial g(X) = prod (X - alpha^e) over GF(2^s); its
    // coefficients land in GF(2).
    let mut alphas: Vec<FieldElem> = Vec::with_capacity(n_b);
    let mut t = field.one();
    for _ in 0..n_b {
        alphas.push(t.clone());
        t = fmul(&t, &alpha).unwrap();
    }
    let mut g: Vec<FieldElem> = vec![field.one()]; // coefficients, low degree first
    for &e in &root_exps {
        let root = &alphas[e];
        // g <- g * (X + root)
        let mut next = vec![field.zero(); g.len() + 1];
        for (i, c) in g.iter().enumerate() {
            next[i + 1] = crate::field2m::fadd(&next[i + 1], c).unwrap();
            let scaled = fmul(c, root).unwrap();
            next[i] = crate::field2m::fadd(&next[i], &scaled).unwrap();
        }
        g = next;
    }
    let deg_g = g.len() - 1;
    let mut g_bits = BitVector::zeros(deg_g + 1);
    for (i, c) in g.iter().enumerate() {
        let bits = c.to_bits();
        assert!(
            (1..s).all(|j| !bits.get(j)),
            "generator polynomial coefficient escaped GF(2)"
        );
        g_bits.set(i, bits.get(0));
    }

    // Check polynomial h(X) = (X^n_b + 1) / g(X) by long division over GF(2).
    let mut rem = BitVector::zeros(n_b + 1);
    rem.set(0, true);
    rem.set(n_b, true);
    let deg_h = n_b - deg_g;
    let mut h = BitVector::zeros(deg_h + 1);
    for sh in (0..=deg_h).rev() {
        if rem.get(deg_g + sh) {
            h.set(sh, true);
            for i in 0..=deg_g {
                if g_bits.get(i) {
                    rem.set(i + sh, rem.get(i + sh) ^ true);
                }
            }
        }
    }
    assert!(rem.is_zero(), "g(X) must divide X^n_b + 1");

    // Dual generator polynomial: reciprocal of h(X). Rows are its cyclic
    // shifts; the dual dimension is deg g.
    let mut hrev = BitVector::zeros(deg_h + 1);
    for i in 0..=deg_h {
        hrev.set(i, h.get(deg_h - i));
    }
    let k_dual = deg_g;
    let mut gen = BitMatrix::zeros(k_dual, n_b);
    for r in 0..k_dual {
        for i in 0..=deg_h {
            if hrev.get(i) {
                gen.set(r, (i + r) % n_b, true);
            }
        }
    }
    debug_assert_eq!(gen.rank(), k_dual);

    // Claimed relative distance from the standard dual-BCH bound
    // (n_b/2 - t_b sqrt(n_b)) / n_b, clamped at 0 for desk-scale parameters.
    let claimed = (n_b as f64 / 2.0 - t_b as f64 * (n_b as f64).sqrt()) / n_b as f64;
    LinearCodeSpec::from_generator(gen, claimed.max(0.0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn zero_message_zero_codeword_and_linearity() {
        let code = build_dual_bch(15, 2).unwrap();
        assert!(code.encode(&BitVector::zeros(code.k_in)).unwrap().is_zero());
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        for _ in 0..1000 {
            let a = BitVector::random(code.k_in, &mut rng);
            let b = BitVector::random(code.k_in, &mut rng);
            let lhs = code.encode(&a.xor(&b).unwrap()).unwrap();
            let rhs = code.encode(&a).unwrap().xor(&code.encode(&b).unwrap()).unwrap();
            assert_eq!(lhs, rhs);
        }
        assert!(code.encode(&BitVector::zeros(3)).is_err());
    }

    #[test]
    fn simplex_code_from_dual_hamming() {
        // Dual of the [15,11,3] Hamming/BCH code (t_b = 1) is the [15,4,8]
        // simplex code: every nonzero codeword has weight exactly 8.
        let code = build_dual_bch(15, 1).unwrap();
        assert_eq!((code.n_out, code.k_in), (15, 4));
        for m in 1u64..16 {
            let w = code.encode(&BitVector::from_u64(m, 4)).unwrap().count_ones();
            assert_eq!(w, 8, "message {m:#x}");
        }
    }

    #[test]
    fn dual_bch_15_2_dimensions_and_distance() {
        // Dual of the [15,7,5] BCH code: a [15,8] code with min distance >= 4.
        let code = build_dual_bch(15, 2).unwrap();
        assert_eq!((code.n_out, code.k_in), (15, 8));
        assert!(code.min_distance_exhaustive() >= 4);
    }

    #[test]
    fn dual_distance_column_independence_exhaustive() {
        // Any t_b columns of the dual generator have rank t_b (all subsets).
        for t_b in 1..=2usize {
            let code = build_dual_bch(15, t_b).unwrap();
            let mut idx: Vec<usize> = (0..t_b).collect();
            loop {
                let sub = code.gen.select_cols(&idx).unwrap();
                assert_eq!(sub.rank(), t_b, "columns {idx:?}");
                // next combination
                let mut i = t_b;
                loop {
                    if i == 0 {
                        return;
                    }
                    i -= 1;
                    if idx[i] + (t_b - i) < 15 {
                        idx[i] += 1;
                        for j in i + 1..t_b {
                            idx[j] = idx[j - 1] + 1;
                        }
                        break;
                    }
                    if i == 0 {
                        return;
                    }
                }
            }
        }
    }

    #[test]
    fn dual_distance_column_independence_randomized_31() {
        // For n_b = 31, t_b = 4 (designed distance 8): any <= 7 columns of
        // the dual generator are independent; sample random subsets.
        let code = build_dual_bch(31, 4).unwrap();
        assert_eq!((code.n_out, code.k_in), (31, 20));
        let mut rng = ChaCha12Rng::seed_from_u64(4);
        for _ in 0..10_000 {
            let size = rng.gen_range(1..=7usize);
            let mut idx = Vec::new();
            while idx.len() < size {
                let c = rng.gen_range(0..31);
                if !idx.contains(&c) {
                    idx.push(c);
                }
            }
            let sub = code.gen.select_cols(&idx).unwrap();
            assert_eq!(sub.rank(), size, "columns {idx:?}");
        }
    }

    #[test]
    fn dual_bch_255_8_has_dimension_64() {
        let code = build_dual_bch(255, 8).unwrap();
        assert_eq!((code.n_out, code.k_in), (255, 64));
    }

    #[test]
    fn projection_cases() {
        let cw = BitVector::from_bits(&[true, false, true, true, false]);
        let all: Vec<usize> = (0..5).collect();
        assert_eq!(project(&cw, &all).unwrap(), cw);
        assert!(project(&cw, &[]).unwrap().is_empty());
        let p = project(&cw, &[1, 3, 4]).unwrap();
        assert_eq!(p, BitVector::from_bits(&[false, true, false]));
        assert!(project(&cw, &[9]).is_err());
    }

    #[test]
    fn position_row_matches_encode() {
        let code = build_dual_bch(15, 2).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(8);
        for _ in 0..200 {
            let msg = BitVector::random(code.k_in, &mut rng);
            let cw = code.encode(&msg).unwrap();
            for p in 0..code.n_out {
                assert_eq!(cw.get(p), code.position_row(p).dot(&msg));
            }
        }
    }

    #[test]
    fn invalid_parameters_rejected() {
        assert!(build_dual_bch(16, 1).is_err());
        assert!(build_dual_bch(15, 0).is_err());
        assert!(build_dual_bch(15, 5).is_err());
    }
}
