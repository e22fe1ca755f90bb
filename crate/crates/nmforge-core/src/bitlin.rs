//! GF(2) bit-vector and bit-matrix algebra.
//!
//! This is the substrate for every linear map, code, and pre-image sampler in
//! the crate: bit strings with XOR addition, row-major GF(2) matrices with
//! Gaussian elimination, affine solution spaces with exactly-uniform sampling,
//! and permutations of bit positions.
//!
//! Conventions fixed once here and used everywhere:
//!
//! * Bit index 0 is the least significant / leftmost bit of the canonical
//!   string; slices and concatenations follow this single order.
//! * Gaussian elimination always picks the lowest-index pivot, so reduced
//!   bases (and therefore [`AffineSpace`] offsets/bases) are deterministic.
//! * An inconsistent linear system yields a distinguishable "no solution"
//!   value ([`Option::None`]), never a panic: callers have legitimate
//!   fallback paths.
//!
//! The text form of a vector is `"len:hex"` with the most significant nibble
//! first (e.g. `"20:0f0f3"`), so non-byte-aligned lengths round-trip exactly.

use rand::Rng;
use serde::{Deserialize, Serialize};
use smallvec::{smallvec, SmallVec};
use std::fmt;

use crate::Error;

const WORD_BITS: usize = 64;

fn words_for(len: usize) -> usize {
    len.div_ceil(WORD_BITS)
}

/// A bit string over GF(2). Index 0 is the least significant bit.
#[derive(Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct BitVector {
    len: usize,
    // Inline storage for the common (<= 64-bit) case keeps the hot extractor
    // loops allocation-free.
    words: SmallVec<[u64; 1]>,
}

impl BitVector {
    /// The all-zero vector of the given length.
    #[must_use]
    pub fn zeros(len: usize) -> Self {
        BitVector {
            len,
            words: smallvec![0; words_for(len)],
        }
    }

    /// Builds a vector from the low `len` bits of `value`. Panics if `value`
    /// has bits at or above position `len`.
    #[must_use]
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(
            len >= 64 || value < (1u64 << len),
            "value {value:#x} does not fit in {len} bits"
        );
        let mut v = BitVector::zeros(len);
        if len > 0 {
            v.words[0] = value;
        }
        v
    }

    /// Builds a vector from explicit bits, index 0 first.
    #[must_use]
    pub fn from_bits(bits: &[bool]) -> Self {
        let mut v = BitVector::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            v.set(i, b);
        }
        v
    }

    /// Number of bits.
    #[must_use]
    pub fn len(&self) -> usize {
        self.len
    }

    /// True when the vector has zero length.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// True when every bit is zero.
    #[must_use]
    pub fn is_zero(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    /// Bit at position `i`.
    #[must_use]
    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        (self.words[i / WORD_BITS] >> (i % WORD_BITS)) & 1 == 1
    }

    /// Sets bit `i` to `b`.
    pub fn set(&mut self, i: usize, b: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let (w, o) = (i / WORD_BITS, i % WORD_BITS);
        if b {
            self.words[w] |= 1u64 << o;
        } else {
            self.words[w] &= !(1u64 << o);
        }
    }

    /// The vector as an integer; requires `len <= 64`.
    #[must_use]
    pub fn to_u64(&self) -> u64 {
        assert!(self.len <= 64, "vector too long for u64");
        self.words.first().copied().unwrap_or(0)
    }

    /// Raw words, least significant first.
    #[must_use]
    pub fn words(&self) -> &[u64] {
        &self.words
    }

    /// Bitwise XOR; both vectors must have equal length.
    pub fn xor(&self, other: &BitVector) -> Result<BitVector, Error> {
        if self.len != other.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                got: other.len,
            });
        }
        let mut out = self.clone();
        out.xor_assign(other);
        Ok(out)
    }

    /// In-place XOR with an equal-length vector. Panics on length mismatch
    /// (internal fast path; use [`BitVector::xor`] at API boundaries).
    pub fn xor_assign(&mut self, other: &BitVector) {
        assert_eq!(self.len, other.len, "xor length mismatch");
        for (a, b) in self.words.iter_mut().zip(&other.words) {
            *a ^= b;
        }
    }

    /// Number of set bits.
    #[must_use]
    pub fn count_ones(&self) -> u32 {
        self.words.iter().map(|w| w.count_ones()).sum()
    }

    /// The length-`len` prefix (bits 0..len) in canonical order.
    pub fn prefix(&self, len: usize) -> Result<BitVector, Error> {
        if len > self.len {
            return Err(Error::LengthMismatch {
                expected: self.len,
                got: len,
            });
        }
        let mut out = BitVector::zeros(len);
        for w in 0..out.words.len() {
            out.words[w] = self.words[w];
        }
        out.mask_top();
        Ok(out)
    }

    /// Concatenation: `self` occupies bits `0..self.len`, `other` follows.
    #[must_use]
    pub fn concat(&self, other: &BitVector) -> BitVector {
        let mut out = BitVector::zeros(self.len + other.len);
        out.words[..self.words.len()].copy_from_slice(&self.words);
        for i in 0..other.len {
            if other.get(i) {
                out.set(self.len + i, true);
            }
        }
        out
    }

    /// Contiguous bit range `start..start + len` in canonical order.
    pub fn bit_range(&self, start: usize, len: usize) -> Result<BitVector, Error> {
        if start + len > self.len {
            return Err(Error::IndexOutOfRange {
                index: start + len,
                range: self.len,
            });
        }
        let mut out = BitVector::zeros(len);
        let (ws, bs) = (start / WORD_BITS, start % WORD_BITS);
        for i in 0..out.words.len() {
            let lo = self.words.get(ws + i).copied().unwrap_or(0) >> bs;
            let hi = if bs == 0 {
                0
            } else {
                self.words.get(ws + i + 1).copied().unwrap_or(0) << (WORD_BITS - bs)
            };
            out.words[i] = lo | hi;
        }
        out.mask_top();
        Ok(out)
    }

    /// Ordered subsequence at the given positions (duplicates permitted).
    pub fn select(&self, idx: &[usize]) -> Result<BitVector, Error> {
        let mut out = BitVector::zeros(idx.len());
        for (o, &i) in idx.iter().enumerate() {
            if i >= self.len {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    range: self.len,
                });
            }
            out.set(o, self.get(i));
        }
        Ok(out)
    }

    /// Inner product over GF(2).
    #[must_use]
    pub fn dot(&self, other: &BitVector) -> bool {
        assert_eq!(self.len, other.len, "dot length mismatch");
        let mut acc = 0u64;
        for (a, b) in self.words.iter().zip(&other.words) {
            acc ^= a & b;
        }
        acc.count_ones() % 2 == 1
    }

    /// Iterator over bits, index 0 first.
    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    /// Uniformly random vector of the given length.
    #[must_use]
    pub fn random<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        let mut v = BitVector::zeros(len);
        for w in v.words.iter_mut() {
            *w = rng.gen();
        }
        v.mask_top();
        v
    }

    fn mask_top(&mut self) {
        let rem = self.len % WORD_BITS;
        if rem != 0 {
            if let Some(last) = self.words.last_mut() {
                *last &= (1u64 << rem) - 1;
            }
        }
    }

    /// Canonical `"len:hex"` text form, most significant nibble first.
    #[must_use]
    pub fn to_hex(&self) -> String {
        let nibbles = self.len.div_ceil(4);
        let mut s = String::with_capacity(nibbles + 8);
        for n in (0..nibbles).rev() {
            let mut val = 0u8;
            for b in 0..4 {
                let i = n * 4 + b;
                if i < self.len && self.get(i) {
                    val |= 1 << b;
                }
            }
            s.push(char::from_digit(u32::from(val), 16).unwrap());
        }
        format!("{}:{}", self.len, s)
    }

    /// Parses the `"len:hex"` text form produced by [`BitVector::to_hex`].
    pub fn from_hex(text: &str) -> Result<BitVector, Error> {
        let (len_s, hex) = text
            .split_once(':')
            .ok_or_else(|| Error::Parse(format!("missing ':' in vector {text:?}")))?;
        let len: usize = len_s
            .parse()
            .map_err(|_| Error::Parse(format!("bad length prefix in {text:?}")))?;
        let nibbles = len.div_ceil(4);
        if hex.len() != nibbles {
            return Err(Error::Parse(format!(
                "expected {nibbles} hex digits for {len} bits, got {}",
                hex.len()
            )));
        }
        let mut v = BitVector::zeros(len);
        for (pos, c) in hex.chars().rev().enumerate() {
            let val = c
                .to_digit(16)
                .ok_or_else(|| Error::Parse(format!("bad hex digit {c:?} in {text:?}")))?;
            for b in 0..4 {
                let i = pos * 4 + b;
                if val >> b & 1 == 1 {
                    if i >= len {
                        return Err(Error::Parse(format!(
                            "hex value has bits beyond declared length in {text:?}"
                        )));
                    }
                    v.set(i, true);
                }
            }
        }
        Ok(v)
    }
}

impl fmt::Debug for BitVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitVector({})", self.to_hex())
    }
}

impl Serialize for BitVector {
    fn serialize<S: serde::Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&self.to_hex())
    }
}

impl<'de> Deserialize<'de> for BitVector {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let text = String::deserialize(d)?;
        BitVector::from_hex(&text).map_err(serde::de::Error::custom)
    }
}

/// A dense GF(2) matrix stored as one [`BitVector`] per row.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct BitMatrix {
    rows: Vec<BitVector>,
    cols: usize,
}

impl BitMatrix {
    /// All-zero matrix.
    #[must_use]
    pub fn zeros(rows: usize, cols: usize) -> Self {
        BitMatrix {
            rows: vec![BitVector::zeros(cols); rows],
            cols,
        }
    }

    /// Identity matrix.
    #[must_use]
    pub fn identity(n: usize) -> Self {
        let mut m = BitMatrix::zeros(n, n);
        for i in 0..n {
            m.rows[i].set(i, true);
        }
        m
    }

    /// Builds a matrix from rows; every row must have length `cols`.
    pub fn from_rows(rows: Vec<BitVector>, cols: usize) -> Result<Self, Error> {
        for r in &rows {
            if r.len() != cols {
                return Err(Error::LengthMismatch {
                    expected: cols,
                    got: r.len(),
                });
            }
        }
        Ok(BitMatrix { rows, cols })
    }

    /// Row count.
    #[must_use]
    pub fn nrows(&self) -> usize {
        self.rows.len()
    }

    /// Column count.
    #[must_use]
    pub fn ncols(&self) -> usize {
        self.cols
    }

    /// Row `i` as a vector.
    #[must_use]
    pub fn row(&self, i: usize) -> &BitVector {
        &self.rows[i]
    }

    /// All rows.
    #[must_use]
    pub fn rows(&self) -> &[BitVector] {
        &self.rows
    }

    /// Entry at (r, c).
    #[must_use]
    pub fn get(&self, r: usize, c: usize) -> bool {
        self.rows[r].get(c)
    }

    /// Sets entry (r, c).
    pub fn set(&mut self, r: usize, c: usize, b: bool) {
        self.rows[r].set(c, b);
    }

    /// Matrix-vector product `M v`.
    pub fn mul_vec(&self, v: &BitVector) -> Result<BitVector, Error> {
        if v.len() != self.cols {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                got: v.len(),
            });
        }
        let mut out = BitVector::zeros(self.rows.len());
        for (i, row) in self.rows.iter().enumerate() {
            out.set(i, row.dot(v));
        }
        Ok(out)
    }

    /// Transpose.
    #[must_use]
    pub fn transpose(&self) -> BitMatrix {
        let mut t = BitMatrix::zeros(self.cols, self.rows.len());
        for (r, row) in self.rows.iter().enumerate() {
            for c in 0..self.cols {
                if row.get(c) {
                    t.rows[c].set(r, true);
                }
            }
        }
        t
    }

    /// Vertical stack: `self` on top of `other` (same column count).
    pub fn vstack(&self, other: &BitMatrix) -> Result<BitMatrix, Error> {
        if self.cols != other.cols {
            return Err(Error::LengthMismatch {
                expected: self.cols,
                got: other.cols,
            });
        }
        let mut rows = self.rows.clone();
        rows.extend(other.rows.iter().cloned());
        Ok(BitMatrix { rows, cols: self.cols })
    }

    /// Matrix restricted to the given columns, in order.
    pub fn select_cols(&self, idx: &[usize]) -> Result<BitMatrix, Error> {
        let mut rows = Vec::with_capacity(self.rows.len());
        for r in &self.rows {
            rows.push(r.select(idx)?);
        }
        Ok(BitMatrix { rows, cols: idx.len() })
    }

    /// Rank over GF(2), by Gaussian elimination with lowest-index pivots.
    #[must_use]
    pub fn rank(&self) -> usize {
        let mut work: Vec<BitVector> = self.rows.clone();
        let mut rank = 0;
        for col in 0..self.cols {
            let Some(pivot) = (rank..work.len()).find(|&r| work[r].get(col)) else {
                continue;
            };
            work.swap(rank, pivot);
            let pivot_row = work[rank].clone();
            for (r, row) in work.iter_mut().enumerate() {
                if r != rank && row.get(col) {
                    row.xor_assign(&pivot_row);
                }
            }
            rank += 1;
            if rank == work.len() {
                break;
            }
        }
        rank
    }
}

/// An affine subspace of `{0,1}^ambient_len`: `offset + span(basis)` with a
/// linearly independent basis, so the space has exactly `2^dim` members.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct AffineSpace {
    offset: BitVector,
    basis: Vec<BitVector>,
    ambient_len: usize,
}

impl AffineSpace {
    /// Builds a space after re-reducing the basis to an independent set.
    #[must_use]
    pub fn new(offset: BitVector, basis: Vec<BitVector>) -> Self {
        let ambient_len = offset.len();
        let reduced = reduce_basis(basis);
        AffineSpace {
            offset,
            basis: reduced,
            ambient_len,
        }
    }

    /// The single-point space `{offset}`.
    #[must_use]
    pub fn point(offset: BitVector) -> Self {
        let ambient_len = offset.len();
        AffineSpace {
            offset,
            basis: Vec::new(),
            ambient_len,
        }
    }

    /// Dimension (log2 of the member count).
    #[must_use]
    pub fn dim(&self) -> usize {
        self.basis.len()
    }

    /// Ambient length in bits.
    #[must_use]
    pub fn ambient_len(&self) -> usize {
        self.ambient_len
    }

    /// Canonical offset point.
    #[must_use]
    pub fn offset(&self) -> &BitVector {
        &self.offset
    }

    /// Independent basis of the direction space.
    #[must_use]
    pub fn basis(&self) -> &[BitVector] {
        &self.basis
    }

    /// Membership test: `v - offset` must lie in the span of the basis.
    #[must_use]
    pub fn contains(&self, v: &BitVector) -> bool {
        if v.len() != self.ambient_len {
            return false;
        }
        let mut diff = v.clone();
        diff.xor_assign(&self.offset);
        // Reduce diff against the (row-reduced) basis.
        let mut rows = self.basis.clone();
        rows.push(diff);
        reduce_basis(rows).len() == self.basis.len()
    }

    /// Exactly uniform sample: `offset + sum c_i basis_i` with `c` uniform.
    #[must_use]
    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> BitVector {
        let mut out = self.offset.clone();
        for b in &self.basis {
            if rng.gen::<bool>() {
                out.xor_assign(b);
            }
        }
        out
    }

    /// Enumerates every member. Panics if `dim > 26` (guard against
    /// accidental exponential blow-ups; enumeration is a desk-scale oracle).
    #[must_use]
    pub fn enumerate(&self) -> Vec<BitVector> {
        assert!(self.dim() <= 26, "affine space too large to enumerate");
        let mut out = Vec::with_capacity(1 << self.dim());
        for mask in 0u64..(1u64 << self.dim()) {
            let mut v = self.offset.clone();
            for (i, b) in self.basis.iter().enumerate() {
                if mask >> i & 1 == 1 {
                    v.xor_assign(b);
                }
            }
            out.push(v);
        }
        out
    }
}

/// Row-reduces a set of vectors to an independent basis (deterministic:
/// lowest-index pivots, rows kept in reduced echelon form).
fn reduce_basis(rows: Vec<BitVector>) -> Vec<BitVector> {
    let mut basis: Vec<BitVector> = Vec::new();
    for mut v in rows {
        for b in &basis {
            let pivot = (0..b.len()).find(|&i| b.get(i)).unwrap();
            if v.get(pivot) {
                v.xor_assign(b);
            }
        }
        if !v.is_zero() {
            // Back-reduce existing rows against the new one for a canonical form.
            let pivot = (0..v.len()).find(|&i| v.get(i)).unwrap();
            for b in basis.iter_mut() {
                if b.get(pivot) {
                    b.xor_assign(&v);
                }
            }
            basis.push(v);
            basis.sort_by_key(|b| (0..b.len()).find(|&i| b.get(i)).unwrap());
        }
    }
    basis
}

/// Solves `M x = y` over GF(2).
///
/// Returns the full solution set as an [`AffineSpace`] (offset plus null-space
/// basis), or `None` when the system is inconsistent. "No solution" is a
/// value, not an error: callers have in-band fallback paths.
pub fn solve_affine(m: &BitMatrix, y: &BitVector) -> Result<Option<AffineSpace>, Error> {
    if m.nrows() != y.len() {
        return Err(Error::LengthMismatch {
            expected: m.nrows(),
            got: y.len(),
        });
    }
    let ncols = m.ncols();
    // Augmented rows: [row | rhs bit].
    let mut rows: Vec<(BitVector, bool)> = m
        .rows()
        .iter()
        .enumerate()
        .map(|(i, r)| (r.clone(), y.get(i)))
        .collect();

    let mut pivot_cols: Vec<usize> = Vec::new();
    let mut rank = 0usize;
    for col in 0..ncols {
        let Some(p) = (rank..rows.len()).find(|&r| rows[r].0.get(col)) else {
            continue;
        };
        rows.swap(rank, p);
        let (pr, pb) = rows[rank].clone();
        for (r, (row, b)) in rows.iter_mut().enumerate() {
            if r != rank && row.get(col) {
                row.xor_assign(&pr);
                *b ^= pb;
            }
        }
        pivot_cols.push(col);
        rank += 1;
        if rank == rows.len() {
            break;
        }
    }
    // Inconsistency: a zero row with a nonzero rhs.
    for (row, b) in rows.iter().skip(rank) {
        debug_assert!(row.is_zero());
        if *b {
            return Ok(None);
        }
    }
    // Particular solution: free columns 0, pivot columns take the rhs.
    let mut offset = BitVector::zeros(ncols);
    for (i, &pc) in pivot_cols.iter().enumerate() {
        offset.set(pc, rows[i].1);
    }
    // Null-space basis: one vector per free column.
    let pivot_set: std::collections::HashSet<usize> = pivot_cols.iter().copied().collect();
    let mut basis = Vec::new();
    for free in 0..ncols {
        if pivot_set.contains(&free) {
            continue;
        }
        let mut v = BitVector::zeros(ncols);
        v.set(free, true);
        for (i, &pc) in pivot_cols.iter().enumerate() {
            if rows[i].0.get(free) {
                v.set(pc, true);
            }
        }
        basis.push(v);
    }
    Ok(Some(AffineSpace::new(offset, basis)))
}

/// A permutation of `[n]`, with the convention `out[map[i]] = v[i]`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Permutation {
    map: Vec<usize>,
}

impl Permutation {
    /// Identity permutation on `[n]`.
    #[must_use]
    pub fn identity(n: usize) -> Self {
        Permutation {
            map: (0..n).collect(),
        }
    }

    /// Builds a permutation, rejecting non-bijective maps.
    pub fn from_map(map: Vec<usize>) -> Result<Self, Error> {
        let n = map.len();
        let mut seen = vec![false; n];
        for &i in &map {
            if i >= n || seen[i] {
                return Err(Error::InvalidPermutation);
            }
            seen[i] = true;
        }
        Ok(Permutation { map })
    }

    /// Uniformly random permutation of `[n]` (Fisher-Yates).
    #[must_use]
    pub fn random<R: Rng + ?Sized>(n: usize, rng: &mut R) -> Self {
        let mut map: Vec<usize> = (0..n).collect();
        for i in (1..n).rev() {
            let j = rng.gen_range(0..=i);
            map.swap(i, j);
        }
        Permutation { map }
    }

    /// Domain size.
    #[must_use]
    pub fn len(&self) -> usize {
        self.map.len()
    }

    /// True for the empty permutation.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Image of index `i`.
    #[must_use]
    pub fn image(&self, i: usize) -> usize {
        self.map[i]
    }

    /// Applies the permutation: `out[map[i]] = v[i]`.
    pub fn apply(&self, v: &BitVector) -> Result<BitVector, Error> {
        if v.len() != self.map.len() {
            return Err(Error::LengthMismatch {
                expected: self.map.len(),
                got: v.len(),
            });
        }
        let mut out = BitVector::zeros(v.len());
        for (i, &j) in self.map.iter().enumerate() {
            if v.get(i) {
                out.set(j, true);
            }
        }
        Ok(out)
    }

    /// The inverse permutation.
    #[must_use]
    pub fn invert(&self) -> Permutation {
        let mut inv = vec![0usize; self.map.len()];
        for (i, &j) in self.map.iter().enumerate() {
            inv[j] = i;
        }
        Permutation { map: inv }
    }
}

/// Interleaves `x` and `y` as `(x . y)_pi`: the concatenation `x . y` pushed
/// through the permutation.
pub fn interleave(x: &BitVector, y: &BitVector, pi: &Permutation) -> Result<BitVector, Error> {
    pi.apply(&x.concat(y))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    #[test]
    fn xor_basics() {
        let a = BitVector::from_u64(0b0101, 4); // canonical string 1010
        let b = BitVector::from_u64(0b0110, 4);
        assert_eq!(a.xor(&b).unwrap(), BitVector::from_u64(0b0011, 4));
        assert!(a.xor(&a).unwrap().is_zero());
        assert_eq!(a.xor(&BitVector::zeros(4)).unwrap(), a);
        assert!(a.xor(&BitVector::zeros(3)).is_err());
    }

    #[test]
    fn hex_round_trip() {
        let v = BitVector::from_hex("20:0f0f3").unwrap();
        assert_eq!(v.len(), 20);
        assert_eq!(v.to_hex(), "20:0f0f3");
        // Non-nibble-aligned length round-trips bit-exactly.
        let w = BitVector::from_bits(&[true, false, true, true, false, true]);
        assert_eq!(BitVector::from_hex(&w.to_hex()).unwrap(), w);
        assert!(BitVector::from_hex("4:ff").is_err());
        assert!(BitVector::from_hex("junk").is_err());
        // Declared length too small for the value.
        assert!(BitVector::from_hex("3:f").is_err());
    }

    #[test]
    fn rank_trivial_cases() {
        assert_eq!(BitMatrix::identity(4).rank(), 4);
        assert_eq!(BitMatrix::zeros(3, 5).rank(), 0);
        let mut m = BitMatrix::zeros(4, 4);
        m.set(0, 1, true);
        m.set(0, 3, true);
        m.set(2, 1, true);
        m.set(2, 3, true); // duplicate nonzero row
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn rank_agrees_with_transpose() {
        let mut rng = ChaCha12Rng::seed_from_u64(7);
        for _ in 0..50 {
            let rows = rng.gen_range(1..10);
            let cols = rng.gen_range(1..10);
            let m = BitMatrix::from_rows(
                (0..rows).map(|_| BitVector::random(cols, &mut rng)).collect(),
                cols,
            )
            .unwrap();
            assert_eq!(m.rank(), m.transpose().rank());
        }
    }

    #[test]
    fn solve_affine_trivial() {
        let id = BitMatrix::identity(3);
        let y = BitVector::from_u64(0b101, 3);
        let s = solve_affine(&id, &y).unwrap().unwrap();
        assert_eq!(s.dim(), 0);
        assert_eq!(*s.offset(), y);

        let z = BitMatrix::zeros(3, 3);
        let s = solve_affine(&z, &BitVector::zeros(3)).unwrap().unwrap();
        assert_eq!(s.dim(), 3);
        assert!(solve_affine(&z, &y).unwrap().is_none());
    }

    #[test]
    fn solve_affine_matches_enumeration_oracle() {
        // Random 6x10 rank-6 matrix: every consistent system has a dim-4
        // solution space; cross-check by enumerating all 2^10 inputs.
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let m = loop {
            let cand = BitMatrix::from_rows(
                (0..6).map(|_| BitVector::random(10, &mut rng)).collect(),
                10,
            )
            .unwrap();
            if cand.rank() == 6 {
                break cand;
            }
        };
        let y = BitVector::random(6, &mut rng);
        let space = solve_affine(&m, &y).unwrap().unwrap();
        assert_eq!(space.dim(), 4);
        let brute: Vec<BitVector> = (0u64..1 << 10)
            .map(|v| BitVector::from_u64(v, 10))
            .filter(|x| m.mul_vec(x).unwrap() == y)
            .collect();
        assert_eq!(brute.len(), 1 << space.dim());
        for x in &brute {
            assert!(space.contains(x));
        }
        let mut members = space.enumerate();
        members.sort();
        assert_eq!(members, brute);
    }

    #[test]
    fn sample_affine_uniform_and_member() {
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let space = AffineSpace::new(
            BitVector::from_u64(0b1001, 4),
            vec![BitVector::from_u64(0b0110, 4), BitVector::from_u64(0b1000, 4)],
        );
        assert_eq!(space.dim(), 2);
        let members = space.enumerate();
        let mut counts = std::collections::HashMap::new();
        let trials = 400_000usize;
        for _ in 0..trials {
            let s = space.sample(&mut rng);
            assert!(space.contains(&s));
            *counts.entry(s).or_insert(0usize) += 1;
        }
        for m in &members {
            let freq = *counts.get(m).unwrap() as f64 / trials as f64;
            assert!((freq - 0.25).abs() < 0.01, "freq {freq} for {m:?}");
        }
    }

    #[test]
    fn point_space_always_offset() {
        let mut rng = ChaCha12Rng::seed_from_u64(0);
        let p = AffineSpace::point(BitVector::from_u64(0b11, 2));
        for _ in 0..10 {
            assert_eq!(p.sample(&mut rng), BitVector::from_u64(0b11, 2));
        }
    }

    #[test]
    fn permutation_definition_case() {
        // p maps positions (0,1,2) -> (1,2,0); v = canonical string 110,
        // i.e. bits v[0]=1, v[1]=1, v[2]=0. out[p(i)] = v[i] gives 011.
        let p = Permutation::from_map(vec![1, 2, 0]).unwrap();
        let v = BitVector::from_bits(&[true, true, false]);
        let out = p.apply(&v).unwrap();
        assert_eq!(out, BitVector::from_bits(&[false, true, true]));
        assert!(Permutation::from_map(vec![0, 0, 1]).is_err());
    }

    #[test]
    fn permutation_inverse_law() {
        let mut rng = ChaCha12Rng::seed_from_u64(11);
        for _ in 0..1000 {
            let n = rng.gen_range(1..24);
            let p = Permutation::random(n, &mut rng);
            let v = BitVector::random(n, &mut rng);
            let round = p.invert().apply(&p.apply(&v).unwrap()).unwrap();
            assert_eq!(round, v);
        }
        let idp = Permutation::identity(8);
        let v = BitVector::random(8, &mut rng);
        assert_eq!(idp.apply(&v).unwrap(), v);
    }

    proptest! {
        #[test]
        fn xor_laws(a in 0u64..1<<16, b in 0u64..1<<16, c in 0u64..1<<16) {
            let (a, b, c) = (
                BitVector::from_u64(a, 16),
                BitVector::from_u64(b, 16),
                BitVector::from_u64(c, 16),
            );
            let ab_c = a.xor(&b).unwrap().xor(&c).unwrap();
            let a_bc = a.xor(&b.xor(&c).unwrap()).unwrap();
            prop_assert_eq!(ab_c, a_bc);
            prop_assert_eq!(a.xor(&b).unwrap(), b.xor(&a).unwrap());
            prop_assert!(a.xor(&a).unwrap().is_zero());
        }

        #[test]
        fn solve_affine_solutions_verify(seed in 0u64..500) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let rows = rng.gen_range(1usize..8);
            let cols = rng.gen_range(1usize..12);
            let m = BitMatrix::from_rows(
                (0..rows).map(|_| BitVector::random(cols, &mut rng)).collect(),
                cols,
            ).unwrap();
            let y = BitVector::random(rows, &mut rng);
            if let Some(space) = solve_affine(&m, &y).unwrap() {
                for v in space.enumerate().into_iter().take(64) {
                    prop_assert_eq!(m.mul_vec(&v).unwrap(), y.clone());
                }
                prop_assert_eq!(space.dim(), cols - m.rank());
            }
        }

        #[test]
        fn matrix_vector_linearity(seed in 0u64..200) {
            let mut rng = ChaCha12Rng::seed_from_u64(seed);
            let m = BitMatrix::from_rows(
                (0..6).map(|_| BitVector::random(9, &mut rng)).collect(), 9,
            ).unwrap();
            let a = BitVector::random(9, &mut rng);
            let b = BitVector::random(9, &mut rng);
            let lhs = m.mul_vec(&a.xor(&b).unwrap()).unwrap();
            let rhs = m.mul_vec(&a).unwrap().xor(&m.mul_vec(&b).unwrap()).unwrap();
            prop_assert_eq!(lhs, rhs);
        }
    }
}
