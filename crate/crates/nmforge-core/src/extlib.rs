//! Seeded-extractor primitives: strong hashing extractors, linear
//! multiplicative extractors (with a fixed-rank invertible variant),
//! extractor-based samplers, the inner-product two-source extractor, and an
//! iterated-product somewhere-condenser.
//!
//! These are desk-scale substitutes for the asymptotic constructions the main
//! algorithms consume, honoring the same interface contracts:
//!
//! * `strong-hash`: a universal-hash (leftover-hash) extractor
//!   `h_s(x) = truncate(embed(x) * embed(s)) + spread(s)` over GF(2^w),
//!   `w = max(n_in, m_out, d)`. The seed-dependent XOR constant preserves
//!   universality and strongness (it is a per-seed output bijection) and
//!   removes the `x = 0` degeneracy so samplers built on it can be
//!   collision-free across seeds. Error bound `2^-((k-m)/2)` by the leftover
//!   hash lemma whenever `m_out <= k_min <= n_in`.
//! * `linear-multiplicative`: `x -> truncate(embed(x) * embed(seed))`, linear
//!   in `x` for every fixed seed. The zero seed gives the zero map.
//! * `fixed-rank-invertible`: the same map with field width exactly `n_in`,
//!   so every nonzero seed induces a rank-`m_out` matrix and all pre-images
//!   are affine spaces of dimension `n_in - m_out`. The zero seed is rejected
//!   here; callers map seed 0 to 1 at their boundary.
//!
//! The extractor-as-sampler converts extractor outputs into index multisets,
//! reducing out-of-range values modulo the range.

use serde::{Deserialize, Serialize};

use crate::bitlin::{solve_affine, AffineSpace, BitMatrix, BitVector};
use crate::field2m::{as_linear_map, fadd, fmul, FieldSpec};
use crate::Error;

/// Which of the three substitute constructions a spec denotes.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    /// Universal-hash strong seeded extractor (leftover-hash bound).
    StrongHash,
    /// GF(2)-linear in x for each seed; zero seed allowed (zero map).
    LinearMultiplicative,
    /// Linear with rank exactly `m_out` for every nonzero seed.
    FixedRankInvertible,
}

/// A seeded extractor instance. `eps` is derived, not stored.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SeededExtractorSpec {
    pub kind: ExtractorKind,
    /// Source bits.
    pub n_in: usize,
    /// Seed bits.
    pub d: usize,
    /// Output bits.
    pub m_out: usize,
    /// Min-entropy threshold the instance is declared for.
    pub k_min: usize,
}

impl SeededExtractorSpec {
    /// Builds and shape-checks a spec.
    pub fn new(
        kind: ExtractorKind,
        n_in: usize,
        d: usize,
        m_out: usize,
        k_min: usize,
    ) -> Result<Self, Error> {
        let spec = SeededExtractorSpec {
            kind,
            n_in,
            d,
            m_out,
            k_min,
        };
        spec.validate()?;
        Ok(spec)
    }

    /// Hard shape requirements; theorem-grade entropy bookkeeping is soft
    /// (see [`SeededExtractorSpec::certified`]).
    pub fn validate(&self) -> Result<(), Error> {
        if self.m_out == 0 || self.d == 0 {
            return Err(Error::InvalidParameter(
                "extractor needs m_out >= 1 and d >= 1".into(),
            ));
        }
        if self.kind == ExtractorKind::FixedRankInvertible {
            if self.n_in == 0 {
                return Err(Error::InvalidParameter(
                    "fixed-rank extractor needs n_in >= 1".into(),
                ));
            }
            if self.m_out > self.n_in || self.d > self.n_in {
                return Err(Error::InvalidParameter(format!(
                    "fixed-rank extractor needs m_out <= n_in and d <= n_in, got m_out = {}, d = {}, n_in = {}",
                    self.m_out, self.d, self.n_in
                )));
            }
        }
        Ok(())
    }

    /// Whether the leftover-hash entropy bookkeeping applies
    /// (`m_out <= k_min <= n_in`). Degenerate desk-scale instances — e.g.
    /// samplers stretching a tiny slice to a large index space — are legal
    /// but uncertified, and [`SeededExtractorSpec::eps`] reports 1.
    #[must_use]
    pub fn certified(&self) -> bool {
        self.m_out <= self.k_min && self.k_min <= self.n_in
    }

    /// Leftover-hash error bound `2^-((k_min - m_out)/2)` when certified.
    #[must_use]
    pub fn eps(&self) -> f64 {
        if self.certified() {
            2f64.powf(-((self.k_min - self.m_out) as f64) / 2.0)
        } else {
            1.0
        }
    }

    /// Field width the construction works in.
    #[must_use]
    pub fn field_width(&self) -> usize {
        match self.kind {
            ExtractorKind::FixedRankInvertible => self.n_in,
            _ => self.n_in.max(self.m_out).max(self.d).max(1),
        }
    }

    /// Number of seeds.
    #[must_use]
    pub fn seed_count(&self) -> usize {
        1usize << self.d
    }
}

fn check_len(name: &str, v: &BitVector, want: usize) -> Result<(), Error> {
    if v.len() != want {
        return Err(Error::InvalidParameter(format!(
            "{name} must have {want} bits, got {}",
            v.len()
        )));
    }
    Ok(())
}

/// Folds the seed into `m_out` bits: bit `i` of the seed XORs into output
/// bit `m_out - 1 - (i mod m_out)`. The reversal keeps the constant from
/// coinciding with the truncated product when `x` embeds to the field one
/// (low seed bits land in high output positions instead of reproducing the
/// seed verbatim), which would otherwise collapse samplers on tiny inputs.
fn spread(seed: &BitVector, m_out: usize) -> BitVector {
    let mut out = BitVector::zeros(m_out);
    for i in 0..seed.len() {
        if seed.get(i) {
            let p = m_out - 1 - (i % m_out);
            out.set(p, out.get(p) ^ true);
        }
    }
    out
}

/// Strong seeded extraction via universal hashing (see module docs).
pub fn ext_strong(
    spec: &SeededExtractorSpec,
    x: &BitVector,
    seed: &BitVector,
) -> Result<BitVector, Error> {
    if spec.kind != ExtractorKind::StrongHash {
        return Err(Error::InvalidParameter(
            "ext_strong requires a strong-hash spec".into(),
        ));
    }
    check_len("x", x, spec.n_in)?;
    check_len("seed", seed, spec.d)?;
    let fw = spec.field_width();
    if fw <= 64 {
        let r = crate::field2m::mul_reduce_default(x.to_u64(), seed.to_u64(), fw);
        let mask = if spec.m_out == 64 { u64::MAX } else { (1u64 << spec.m_out) - 1 };
        let mut out = BitVector::from_u64(r & mask, spec.m_out);
        out.xor_assign(&spread(seed, spec.m_out));
        return Ok(out);
    }
    let f = FieldSpec::default_for(fw);
    let prod = fmul(&f.embed(x)?, &f.embed(seed)?)?;
    let mut out = prod.truncate(spec.m_out);
    out.xor_assign(&spread(seed, spec.m_out));
    Ok(out)
}

/// Linear seeded extraction: `truncate(embed(x) * embed(seed))`.
///
/// Linear in `x` for every fixed seed. In fixed-rank mode the zero seed is
/// rejected; in plain linear-multiplicative mode it yields the zero map.
pub fn lext_linear(
    spec: &SeededExtractorSpec,
    x: &BitVector,
    seed: &BitVector,
) -> Result<BitVector, Error> {
    if spec.kind == ExtractorKind::StrongHash {
        return Err(Error::InvalidParameter(
            "lext_linear requires a linear spec".into(),
        ));
    }
    check_len("x", x, spec.n_in)?;
    check_len("seed", seed, spec.d)?;
    if spec.kind == ExtractorKind::FixedRankInvertible && seed.is_zero() {
        return Err(Error::ZeroSeed);
    }
    let fw = spec.field_width();
    if fw <= 64 {
        let r = crate::field2m::mul_reduce_default(x.to_u64(), seed.to_u64(), fw);
        let mask = if spec.m_out == 64 { u64::MAX } else { (1u64 << spec.m_out) - 1 };
        return Ok(BitVector::from_u64(r & mask, spec.m_out));
    }
    let f = FieldSpec::default_for(fw);
    let prod = fmul(&f.embed(x)?, &f.embed(seed)?)?;
    Ok(prod.truncate(spec.m_out))
}

/// The `m_out x n_in` matrix of `x -> lext_linear(spec, x, seed)`.
pub fn lext_matrix(spec: &SeededExtractorSpec, seed: &BitVector) -> Result<BitMatrix, Error> {
    if spec.kind == ExtractorKind::StrongHash {
        return Err(Error::InvalidParameter(
            "lext_matrix requires a linear spec".into(),
        ));
    }
    check_len("seed", seed, spec.d)?;
    if spec.kind == ExtractorKind::FixedRankInvertible && seed.is_zero() {
        return Err(Error::ZeroSeed);
    }
    let f = FieldSpec::default_for(spec.field_width());
    let full = as_linear_map(&f.embed(seed)?, spec.m_out)?;
    // Keep only the columns corresponding to actual input bits.
    let cols: Vec<usize> = (0..spec.n_in).collect();
    full.select_cols(&cols)
}

/// Full pre-image of `y` under `lext_linear(spec, ., seed)` in fixed-rank
/// mode: an affine space of dimension `n_in - m_out`, independent of seed
/// and target.
pub fn lext_preimage(
    spec: &SeededExtractorSpec,
    seed: &BitVector,
    y: &BitVector,
) -> Result<AffineSpace, Error> {
    if spec.kind != ExtractorKind::FixedRankInvertible {
        return Err(Error::InvalidParameter(
            "lext_preimage requires a fixed-rank-invertible spec".into(),
        ));
    }
    check_len("y", y, spec.m_out)?;
    let m = lext_matrix(spec, seed)?;
    let space = solve_affine(&m, y)?
        .expect("fixed-rank map is surjective, every target has pre-images");
    debug_assert_eq!(space.dim(), spec.n_in - spec.m_out);
    Ok(space)
}

/// An ordered index multiset into `[range]` (duplicates permitted, matching
/// the sampler's multiset semantics).
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SampleIndexSet {
    pub indices: Vec<usize>,
    pub range: usize,
}

impl SampleIndexSet {
    /// Distinct indices in ascending order.
    #[must_use]
    pub fn distinct(&self) -> Vec<usize> {
        let mut d = self.indices.clone();
        d.sort_unstable();
        d.dedup();
        d
    }
}

/// Extractor-as-sampler: evaluates the extractor on `x` at every seed in
/// seed order; out-of-range outputs are reduced modulo the range.
pub fn samp(spec: &SeededExtractorSpec, x: &BitVector, range: usize) -> Result<SampleIndexSet, Error> {
    if range == 0 {
        return Err(Error::InvalidParameter("sampler range must be >= 1".into()));
    }
    if spec.m_out != (usize::BITS - (range - 1).leading_zeros()).max(1) as usize {
        return Err(Error::InvalidParameter(format!(
            "sampler spec m_out = {} does not match ceil(log2 {range})",
            spec.m_out
        )));
    }
    let mut indices = Vec::with_capacity(spec.seed_count());
    for s in 0..spec.seed_count() {
        let seed = BitVector::from_u64(s as u64, spec.d);
        let out = ext_strong(spec, x, &seed)?;
        indices.push((out.to_u64() as usize) % range);
    }
    Ok(SampleIndexSet { indices, range })
}

/// Inner product of two `r`-vectors over GF(2^m): `sum_i x_i * y_i`.
pub fn ip_extract(
    x: &BitVector,
    y: &BitVector,
    field: &FieldSpec,
    r: usize,
) -> Result<BitVector, Error> {
    let m = field.m();
    if x.len() != r * m || y.len() != r * m {
        return Err(Error::LengthMismatch {
            expected: r * m,
            got: if x.len() != r * m { x.len() } else { y.len() },
        });
    }
    let mut acc = field.zero();
    for i in 0..r {
        let idx: Vec<usize> = (i * m..(i + 1) * m).collect();
        let xi = field.embed(&x.select(&idx)?)?;
        let yi = field.embed(&y.select(&idx)?)?;
        acc = fadd(&acc, &fmul(&xi, &yi)?)?;
    }
    Ok(acc.to_bits())
}

/// Iterated-product somewhere-condenser parameters.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CondenserSpec {
    /// Input bits; must be divisible by `2^iterations`.
    pub n_in: usize,
    /// Basic steps; the row count is `3^iterations`.
    pub iterations: usize,
}

impl CondenserSpec {
    /// Builds and checks a condenser spec.
    pub fn new(n_in: usize, iterations: usize) -> Result<Self, Error> {
        if iterations == 0 || n_in % (1 << iterations) != 0 || n_in >> iterations == 0 {
            return Err(Error::InvalidParameter(format!(
                "condenser needs n_in divisible by 2^iterations with nonzero rows, got n_in = {n_in}, iterations = {iterations}"
            )));
        }
        Ok(CondenserSpec { n_in, iterations })
    }

    /// Number of candidate rows, `3^iterations`.
    #[must_use]
    pub fn row_count(&self) -> usize {
        3usize.pow(self.iterations as u32)
    }

    /// Row length `n_in / 2^iterations`.
    #[must_use]
    pub fn ell(&self) -> usize {
        self.n_in >> self.iterations
    }
}

/// One row of the somewhere-condenser output.
///
/// The basic step splits the input into field halves `(a, b)` and emits the
/// candidate rows `{a, b, a*b}` over GF(2^(len/2)); iterating applies the
/// step to the row selected by the next base-3 digit of the row index
/// (most significant digit first, so rows are in lexicographic order).
pub fn condense(x: &BitVector, row: usize, spec: &CondenserSpec) -> Result<BitVector, Error> {
    check_len("x", x, spec.n_in)?;
    if row >= spec.row_count() {
        return Err(Error::IndexOutOfRange {
            index: row,
            range: spec.row_count(),
        });
    }
    let mut cur = x.clone();
    for k in (0..spec.iterations).rev() {
        let digit = (row / 3usize.pow(k as u32)) % 3;
        let half = cur.len() / 2;
        let a = cur.prefix(half)?;
        let b = cur.select(&(half..cur.len()).collect::<Vec<_>>())?;
        cur = match digit {
            0 => a,
            1 => b,
            _ => {
                let f = FieldSpec::default_for(half);
                fmul(&f.embed(&a)?, &f.embed(&b)?)?.to_bits()
            }
        };
    }
    Ok(cur)
}

/// A rectangular matrix of candidate rows, at least one of which is
/// (near-)uniform or high-rate in context.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SomewhereRandomMatrix {
    rows: Vec<BitVector>,
}

impl SomewhereRandomMatrix {
    /// Builds the matrix, enforcing rectangularity.
    pub fn new(rows: Vec<BitVector>) -> Result<Self, Error> {
        if let Some(first) = rows.first() {
            let len = first.len();
            for r in &rows {
                if r.len() != len {
                    return Err(Error::LengthMismatch {
                        expected: len,
                        got: r.len(),
                    });
                }
            }
        }
        Ok(SomewhereRandomMatrix { rows })
    }

    /// Rows in order.
    #[must_use]
    pub fn rows(&self) -> &[BitVector] {
        &self.rows
    }

    /// XOR of all rows (the matrices here are never empty).
    #[must_use]
    pub fn xor_rows(&self) -> BitVector {
        let mut acc = self.rows[0].clone();
        for r in &self.rows[1..] {
            acc.xor_assign(r);
        }
        acc
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;
    use std::collections::HashMap;

    fn strong(n_in: usize, d: usize, m_out: usize, k_min: usize) -> SeededExtractorSpec {
        SeededExtractorSpec::new(ExtractorKind::StrongHash, n_in, d, m_out, k_min).unwrap()
    }

    /// Exact joint TV of (Ext(X, S), S) from uniform x uniform, X flat on the
    /// given support, seeds enumerated.
    fn joint_tv_strong(spec: &SeededExtractorSpec, support: &[BitVector]) -> f64 {
        let d_count = spec.seed_count();
        let mut counts: HashMap<(u64, u64), usize> = HashMap::new();
        for x in support {
            for s in 0..d_count {
                let seed = BitVector::from_u64(s as u64, spec.d);
                let out = ext_strong(spec, x, &seed).unwrap();
                *counts.entry((out.to_u64(), s as u64)).or_insert(0) += 1;
            }
        }
        let total = (support.len() * d_count) as f64;
        let uniform = 1.0 / ((1u64 << spec.m_out) as f64 * d_count as f64);
        let mut tv = 0.0;
        for m in 0..(1u64 << spec.m_out) {
            for s in 0..d_count as u64 {
                let p = counts.get(&(m, s)).copied().unwrap_or(0) as f64 / total;
                tv += (p - uniform).abs();
            }
        }
        tv / 2.0
    }

    #[test]
    fn leftover_hash_bound_uniform_source() {
        // x uniform over {0,1}^10, k = 10, m = 2: joint TV <= 2^-4.
        let spec = strong(10, 10, 2, 10);
        let support: Vec<BitVector> = (0u64..1 << 10).map(|v| BitVector::from_u64(v, 10)).collect();
        let tv = joint_tv_strong(&spec, &support);
        assert!(tv <= 2f64.powi(-4), "tv = {tv}");
    }

    #[test]
    fn leftover_hash_bound_affine_flat_source() {
        // Flat source on a dim-8 affine subspace of {0,1}^12, m = 3:
        // joint TV <= 2^-2.5.
        let mut rng = ChaCha12Rng::seed_from_u64(13);
        let space = AffineSpace::new(
            BitVector::random(12, &mut rng),
            (0..8).map(|_| BitVector::random(12, &mut rng)).collect(),
        );
        assert_eq!(space.dim(), 8);
        let spec = strong(12, 12, 3, 8);
        let tv = joint_tv_strong(&spec, &space.enumerate());
        assert!(tv <= 2f64.powf(-2.5), "tv = {tv}");
    }

    #[test]
    fn ext_strong_deterministic() {
        let spec = strong(8, 8, 3, 8);
        let x = BitVector::from_u64(0xa5, 8);
        let s = BitVector::from_u64(0x3c, 8);
        assert_eq!(
            ext_strong(&spec, &x, &s).unwrap(),
            ext_strong(&spec, &x, &s).unwrap()
        );
        assert!(ext_strong(&spec, &BitVector::zeros(7), &s).is_err());
    }

    #[test]
    fn lext_linearity_and_identity() {
        let spec =
            SeededExtractorSpec::new(ExtractorKind::LinearMultiplicative, 10, 10, 10, 10).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(21);
        for _ in 0..1000 {
            let a = BitVector::random(10, &mut rng);
            let b = BitVector::random(10, &mut rng);
            let s = BitVector::random(10, &mut rng);
            let lhs = lext_linear(&spec, &a.xor(&b).unwrap(), &s).unwrap();
            let rhs = lext_linear(&spec, &a, &s)
                .unwrap()
                .xor(&lext_linear(&spec, &b, &s).unwrap())
                .unwrap();
            assert_eq!(lhs, rhs);
        }
        // Seed = field one, m_out = n_in: the identity map.
        let one = BitVector::from_u64(1, 10);
        let x = BitVector::random(10, &mut rng);
        assert_eq!(lext_linear(&spec, &x, &one).unwrap(), x);
    }

    #[test]
    fn lext_matrix_matches_direct_evaluation() {
        let spec =
            SeededExtractorSpec::new(ExtractorKind::LinearMultiplicative, 6, 4, 9, 6).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(2);
        for _ in 0..100 {
            let x = BitVector::random(6, &mut rng);
            let s = BitVector::random(4, &mut rng);
            let via_matrix = lext_matrix(&spec, &s).unwrap().mul_vec(&x).unwrap();
            assert_eq!(via_matrix, lext_linear(&spec, &x, &s).unwrap());
        }
    }

    #[test]
    fn rao_affine_source_property() {
        // For a linear seeded extractor on an affine source, each seed's
        // output is exactly uniform or far from it; the fraction of
        // non-uniform seeds is at most twice the measured strong error.
        let mut rng = ChaCha12Rng::seed_from_u64(31);
        let space = AffineSpace::new(
            BitVector::random(10, &mut rng),
            (0..6).map(|_| BitVector::random(10, &mut rng)).collect(),
        );
        assert_eq!(space.dim(), 6);
        let spec =
            SeededExtractorSpec::new(ExtractorKind::LinearMultiplicative, 10, 10, 4, 6).unwrap();
        let support = space.enumerate();
        let mut bad = 0usize;
        let mut tv_sum = 0.0;
        for s in 0..1u64 << 10 {
            let seed = BitVector::from_u64(s, 10);
            let mut counts: HashMap<u64, usize> = HashMap::new();
            for x in &support {
                *counts
                    .entry(lext_linear(&spec, x, &seed).unwrap().to_u64())
                    .or_insert(0) += 1;
            }
            let uniform = support.len() as f64 / 16.0;
            let tv: f64 = (0..16u64)
                .map(|m| {
                    (counts.get(&m).copied().unwrap_or(0) as f64 - uniform).abs()
                        / support.len() as f64
                })
                .sum::<f64>()
                / 2.0;
            tv_sum += tv;
            if tv > 0.0 {
                bad += 1;
            }
        }
        let frac = bad as f64 / 1024.0;
        let measured_eps = tv_sum / 1024.0;
        assert!(
            frac <= 2.0 * measured_eps + 1e-12,
            "frac = {frac}, 2 eps = {}",
            2.0 * measured_eps
        );
    }

    #[test]
    fn fixed_rank_exhaustive_and_preimage_round_trip() {
        let spec =
            SeededExtractorSpec::new(ExtractorKind::FixedRankInvertible, 10, 10, 3, 10).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(6);
        for s in 1u64..1 << 10 {
            let seed = BitVector::from_u64(s, 10);
            let m = lext_matrix(&spec, &seed).unwrap();
            assert_eq!(m.rank(), 3, "seed {s:#x}");
            let y = BitVector::random(3, &mut rng);
            let pre = lext_preimage(&spec, &seed, &y).unwrap();
            assert_eq!(pre.dim(), 7);
            let sample = pre.sample(&mut rng);
            assert_eq!(lext_linear(&spec, &sample, &seed).unwrap(), y);
        }
        assert!(lext_linear(&spec, &BitVector::zeros(10), &BitVector::zeros(10)).is_err());
    }

    #[test]
    fn fixed_rank_full_output_is_bijective() {
        let spec =
            SeededExtractorSpec::new(ExtractorKind::FixedRankInvertible, 6, 6, 6, 6).unwrap();
        let seed = BitVector::from_u64(0x2b, 6);
        let y = BitVector::from_u64(0b10110, 6).prefix(6).unwrap();
        let pre = lext_preimage(&spec, &seed, &y).unwrap();
        assert_eq!(pre.dim(), 0);
        assert_eq!(lext_linear(&spec, pre.offset(), &seed).unwrap(), y);
    }

    #[test]
    fn samp_full_range_and_bijective_case() {
        // D = range and Ext(x, .) bijective: every index exactly once.
        // Seeds vary while x is fixed; with spread(s) folded in, x = 0 hits
        // every index once.
        let spec = strong(4, 4, 4, 4);
        let set = samp(&spec, &BitVector::zeros(4), 16).unwrap();
        assert_eq!(set.distinct().len(), 16);
        // R = full range: |Samp(x) ∩ R| = D exactly, for any x.
        let mut rng = ChaCha12Rng::seed_from_u64(3);
        let x = BitVector::random(4, &mut rng);
        let set = samp(&spec, &x, 16).unwrap();
        assert_eq!(set.indices.len(), 16);
        assert!(set.indices.iter().all(|&i| i < 16));
    }

    #[test]
    fn samp_deviation_bound_full_enumeration() {
        // Thm-style bad-set bound: n_in = 12, k = 8, m = 4, random R with
        // mu_R = 1/2: the number of x deviating by more than eps*D is < 2^k.
        let spec = strong(12, 6, 4, 8);
        let eps = spec.eps(); // 2^-2
        let d_count = spec.seed_count() as f64;
        let mut rng = ChaCha12Rng::seed_from_u64(99);
        for _ in 0..3 {
            let mut r_set = std::collections::HashSet::new();
            while r_set.len() < 8 {
                r_set.insert(rng.gen_range(0usize..16));
            }
            let mut bad = 0usize;
            for xv in 0u64..1 << 12 {
                let set = samp(&spec, &BitVector::from_u64(xv, 12), 16).unwrap();
                let hits = set.indices.iter().filter(|i| r_set.contains(i)).count() as f64;
                if (hits - 0.5 * d_count).abs() > eps * d_count {
                    bad += 1;
                }
            }
            assert!(bad < 1 << 8, "bad = {bad}");
        }
    }

    #[test]
    fn ip_basics() {
        let f1 = FieldSpec::default_for(1);
        // r = 2 over GF(2): IP((1,0),(1,1)) = 1.
        let x = BitVector::from_bits(&[true, false]);
        let y = BitVector::from_bits(&[true, true]);
        assert_eq!(ip_extract(&x, &y, &f1, 2).unwrap().to_u64(), 1);
        // y = 0 -> 0.
        let f2 = FieldSpec::default_for(2);
        let x = BitVector::from_u64(0b1011, 4);
        assert!(ip_extract(&x, &BitVector::zeros(4), &f2, 2).unwrap().is_zero());
        assert!(ip_extract(&x, &BitVector::zeros(3), &f2, 2).is_err());
    }

    #[test]
    fn ip_exact_error_bound_flat_sources() {
        // n = 8 (r = 4, m = 2), flat sources with k1 = k2 = 7: exact joint TV
        // of (IP, X) from (U, X) is at most 2^-((7+7-8-2)/2) = 1/4.
        let field = FieldSpec::default_for(2);
        let mut rng = ChaCha12Rng::seed_from_u64(1234);
        let mut pick_support = || {
            let mut all: Vec<u64> = (0..256).collect();
            for i in (1..all.len()).rev() {
                let j = rng.gen_range(0..=i);
                all.swap(i, j);
            }
            all.truncate(128);
            all
        };
        let xs = pick_support();
        let ys = pick_support();
        // counts[x][ip]
        let mut tv = 0.0;
        for &xv in &xs {
            let x = BitVector::from_u64(xv, 8);
            let mut counts = [0usize; 4];
            for &yv in &ys {
                let y = BitVector::from_u64(yv, 8);
                counts[ip_extract(&x, &y, &field, 4).unwrap().to_u64() as usize] += 1;
            }
            let px = 1.0 / xs.len() as f64;
            for c in counts {
                let joint = px * c as f64 / ys.len() as f64;
                tv += (joint - px * 0.25).abs();
            }
        }
        tv /= 2.0;
        assert!(tv <= 0.25, "tv = {tv}");
    }

    #[test]
    fn condense_shapes_and_annihilation() {
        let spec = CondenserSpec::new(16, 1).unwrap();
        assert_eq!(spec.row_count(), 3);
        assert_eq!(spec.ell(), 8);
        let mut x = BitVector::zeros(16);
        for i in 8..16 {
            x.set(i, true);
        }
        // First half zero: the product row is zero.
        assert!(condense(&x, 2, &spec).unwrap().is_zero());
        let mut rng = ChaCha12Rng::seed_from_u64(17);
        let x = BitVector::random(16, &mut rng);
        for row in 0..3 {
            assert_eq!(condense(&x, row, &spec).unwrap().len(), 8);
        }
        assert!(condense(&x, 3, &spec).is_err());
        // Two iterations: 9 rows of 4 bits.
        let spec2 = CondenserSpec::new(16, 2).unwrap();
        for row in 0..9 {
            assert_eq!(condense(&x, row, &spec2).unwrap().len(), 4);
        }
    }

    #[test]
    fn condense_improves_rate_somewhere() {
        // For random flat sources of rate 0.5 on 16 bits, one iteration: at
        // least one row's exact min-entropy rate is >= 0.6.
        let spec = CondenserSpec::new(16, 1).unwrap();
        let mut rng = ChaCha12Rng::seed_from_u64(55);
        for trial in 0..200 {
            let mut support = std::collections::HashSet::new();
            while support.len() < 256 {
                support.insert(rng.gen_range(0u64..1 << 16));
            }
            let best_rate = (0..3)
                .map(|row| {
                    let mut counts: HashMap<u64, usize> = HashMap::new();
                    for &xv in &support {
                        let out = condense(&BitVector::from_u64(xv, 16), row, &spec).unwrap();
                        *counts.entry(out.to_u64()).or_insert(0) += 1;
                    }
                    let pmax =
                        *counts.values().max().unwrap() as f64 / support.len() as f64;
                    -pmax.log2() / 8.0
                })
                .fold(0.0f64, f64::max);
            assert!(best_rate >= 0.6, "trial {trial}: best rate {best_rate}");
        }
    }

    #[test]
    fn somewhere_random_matrix_shape() {
        let rows = vec![BitVector::zeros(4), BitVector::from_u64(0b1010, 4)];
        let m = SomewhereRandomMatrix::new(rows).unwrap();
        assert_eq!(m.xor_rows().to_u64(), 0b1010);
        assert!(
            SomewhereRandomMatrix::new(vec![BitVector::zeros(4), BitVector::zeros(3)]).is_err()
        );
    }
}
