//! The main seedless non-malleable extractor constructions.
//!
//! Everything here is driven by a [`ParamProfile`]: an explicit, serialized
//! table of every length, sampler size, extractor instance, and correlation
//! breaker the algorithms consume. Profiles turn asymptotic parameter
//! settings into concrete desk-scale numbers; the shipped `toy20` profile is
//! small enough that every verification oracle can enumerate its full input
//! space.
//!
//! The pipeline, per input `z` of `2n` bits:
//!
//! 1. An advice generator derives a short string `w` from slices of `z`,
//!    sampled positions of `z`, sampled positions of a dual-BCH encoding of
//!    `z`, and linear extractions of `z` — designed so that tampering
//!    changes `w` with high probability.
//! 2. An advice-correlation-breaker wrapper derives a somewhere-random
//!    matrix from `z`, runs the correlation breaker once per row with advice
//!    `w ∘ row-index`, and XORs the rows.
//! 3. The invertible variant re-arranges the same ingredients so that the
//!    final output is a fixed-rank linear extraction of a reserved slice,
//!    making every output fiber an affine space that the pre-image sampler
//!    can hit uniformly — this yields the encoder of the derived
//!    non-malleable code.
//! 4. An interleaved-source extractor follows the same wrapper shape with a
//!    somewhere-condenser in place of the advice generator.

use std::collections::BTreeMap;

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::acb::{acb, AcbParams};
use crate::bitlin::{solve_affine, BitMatrix, BitVector, Permutation};
use crate::extlib::{
    condense, lext_linear, lext_matrix, lext_preimage, samp, CondenserSpec, ExtractorKind,
    SampleIndexSet, SeededExtractorSpec,
};
use crate::lincode::{build_dual_bch, LinearCodeSpec};
use crate::Error;

/// Bounded retry budget for the pre-image sampler's rejection loop.
const SAMPLE_RETRIES: usize = 256;

/// Length-`l` prefix of `z` in canonical bit order.
pub fn slice(z: &BitVector, l: usize) -> Result<BitVector, Error> {
    z.prefix(l)
}

/// Bits needed to encode row indices `0..count`.
#[must_use]
pub fn index_bits(count: usize) -> usize {
    (usize::BITS - (count.max(2) - 1).leading_zeros()) as usize
}

/// Maps the all-zero seed to one at the extractor call boundary.
fn seed_or_one(mut s: BitVector) -> BitVector {
    if s.is_zero() {
        s.set(0, true);
    }
    s
}

/// Seed value `i + 1` in `d` bits, so distinct rows never share a seed even
/// after zero-seed remapping (`2^d > rows` is validated at profile load).
fn row_seed(i: usize, d: usize) -> BitVector {
    BitVector::from_u64(i as u64 + 1, d)
}

/// Incremental GF(2) row basis for greedy independence selection.
struct RowBasis {
    rows: Vec<BitVector>,
}

impl RowBasis {
    fn new() -> Self {
        RowBasis { rows: Vec::new() }
    }

    /// Reduces `row` against the basis; if a nonzero remainder survives,
    /// absorbs it and reports `true` (rank increased).
    fn insert(&mut self, row: &BitVector) -> bool {
        let mut r = row.clone();
        for b in &self.rows {
            let lead = b.iter().position(|x| x);
            if let Some(p) = lead {
                if r.get(p) {
                    r.xor_assign(b);
                }
            }
        }
        if r.is_zero() {
            false
        } else {
            self.rows.push(r);
            true
        }
    }
}

/// A sampler instance: an extractor spec plus the index range it targets.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct SampParams {
    pub spec: SeededExtractorSpec,
    pub range: usize,
}

impl SampParams {
    /// Number of indices produced per input.
    #[must_use]
    pub fn count(&self) -> usize {
        self.spec.seed_count()
    }

    /// Evaluates the sampler.
    pub fn sample(&self, x: &BitVector) -> Result<SampleIndexSet, Error> {
        samp(&self.spec, x, self.range)
    }

    fn validate(&self, label: &str, n_in: usize) -> Result<(), Error> {
        self.spec.validate()?;
        if self.spec.kind != ExtractorKind::StrongHash {
            return Err(Error::InvalidParameter(format!(
                "{label}: samplers use strong-hash extractors"
            )));
        }
        if self.spec.n_in != n_in {
            return Err(Error::InvalidParameter(format!(
                "{label}: sampler input must be {n_in} bits, spec says {}",
                self.spec.n_in
            )));
        }
        if self.range == 0 {
            return Err(Error::InvalidParameter(format!("{label}: empty range")));
        }
        let want = (usize::BITS - (self.range - 1).leading_zeros()).max(1) as usize;
        if self.spec.m_out != want {
            return Err(Error::InvalidParameter(format!(
                "{label}: sampler m_out = {} but range {} needs {want}",
                self.spec.m_out, self.range
            )));
        }
        Ok(())
    }
}

/// Parameters of one interleaved-source extractor instance (used both as the
/// top-level extractor and as the small core inside the advice pipelines).
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct IlextParams {
    /// Input bits.
    pub n_in: usize,
    /// Output bits.
    pub m_out: usize,
    /// Prefix slice fed to the condenser.
    pub n1: usize,
    pub condenser: CondenserSpec,
    /// Row extractor: input `z`, seed = condenser row.
    pub lext1: SeededExtractorSpec,
    pub acb: AcbParams,
    /// Output extractor: input `z`, seed = XOR of breaker rows.
    pub lext2: SeededExtractorSpec,
}

impl IlextParams {
    /// Number of candidate rows.
    #[must_use]
    pub fn rows(&self) -> usize {
        self.condenser.row_count()
    }

    fn validate(&self, label: &str) -> Result<(), Error> {
        let err = |msg: String| Err(Error::InvalidParameter(format!("{label}: {msg}")));
        if self.n1 > self.n_in {
            return err(format!("condenser slice {} exceeds input {}", self.n1, self.n_in));
        }
        if self.condenser.n_in != self.n1 {
            return err("condenser input must equal the slice length".into());
        }
        CondenserSpec::new(self.condenser.n_in, self.condenser.iterations)?;
        self.lext1.validate()?;
        self.lext2.validate()?;
        self.acb.validate()?;
        if self.lext1.n_in != self.n_in || self.lext2.n_in != self.n_in {
            return err("row/output extractors read the full input".into());
        }
        if self.lext1.d != self.condenser.ell() {
            return err("row extractor seed must match condenser row length".into());
        }
        if self.lext1.m_out != self.acb.n1 {
            return err("row extractor output must match breaker row width".into());
        }
        if self.acb.n != self.n_in {
            return err("breaker helper must be the full input".into());
        }
        if self.acb.h != index_bits(self.rows()) {
            return err(format!(
                "breaker advice must be {} index bits",
                index_bits(self.rows())
            ));
        }
        if self.lext2.d != self.acb.n2 {
            return err("output extractor seed must match breaker output".into());
        }
        if self.lext2.m_out != self.m_out {
            return err("output extractor must emit m_out bits".into());
        }
        Ok(())
    }
}

/// Evaluates one interleaved-source extractor instance.
pub fn ilext_eval(p: &IlextParams, z: &BitVector) -> Result<BitVector, Error> {
    if z.len() != p.n_in {
        return Err(Error::LengthMismatch {
            expected: p.n_in,
            got: z.len(),
        });
    }
    let z1 = z.prefix(p.n1)?;
    let h = index_bits(p.rows());
    let mut acc = BitVector::zeros(p.acb.n2);
    for i in 0..p.rows() {
        let v = condense(&z1, i, &p.condenser)?;
        let r = lext_linear(&p.lext1, z, &seed_or_one(v))?;
        let s = acb(&p.acb, &r, z, &BitVector::from_u64(i as u64, h))?;
        acc.xor_assign(&s);
    }
    lext_linear(&p.lext2, z, &seed_or_one(acc))
}

/// Advice-generator parameters.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct AdvParams {
    /// First prefix slice length.
    pub n1: usize,
    /// Second slice length.
    pub n2: usize,
    /// Samples codeword positions.
    pub samp_code: SampParams,
    /// Samples input positions.
    pub samp_z: SampParams,
    /// Extracts a seed from the sampled input positions.
    pub core: IlextParams,
    /// Final linear extraction of the full input.
    pub lext0: SeededExtractorSpec,
}

impl AdvParams {
    /// Total advice length (sum of bundle component lengths).
    #[must_use]
    pub fn advice_len(&self) -> usize {
        self.n1 + self.n2 + self.samp_z.count() + self.samp_code.count() + self.lext0.m_out
    }
}

/// Correlation-breaker wrapper parameters.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct WrapParams {
    /// Prefix slice that seeds the row generator.
    pub n_slice: usize,
    /// Row count.
    pub rows: usize,
    /// Row generator: input = slice, seed = row index.
    pub lext1: SeededExtractorSpec,
    /// Row extractor: input = full z, seed = generated row.
    pub lext2: SeededExtractorSpec,
    pub acb: AcbParams,
}

/// Invertible-extractor parameters.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct InvParams {
    /// The six-way prefix split of the input; entries may be zero.
    pub split: Vec<usize>,
    /// Residual-slack parameter; the selected codeword-position set has
    /// `samp1.count() - sqrt(n0)` elements.
    pub n0: usize,
    /// Samples codeword positions from the first slice.
    pub samp1: SampParams,
    /// Samples positions of the tail slice.
    pub samp2: SampParams,
    /// Samples positions of the tail slice outside the second sample.
    pub samp3: SampParams,
    /// Samples positions of the remaining tail.
    pub samp4: SampParams,
    /// Extracts a seed from the second-sample projection.
    pub core: IlextParams,
    /// Linear extraction of the full input (advice component and the linear
    /// constraint the pre-image sampler accounts for).
    pub lext0: SeededExtractorSpec,
    /// Row generator over the fifth slice.
    pub lext1: SeededExtractorSpec,
    /// Row extractor over the third-sample projection.
    pub lext2: SeededExtractorSpec,
    /// Output extractor: fixed-rank over the fourth-sample projection.
    pub lext3: SeededExtractorSpec,
    /// Breaker row count.
    pub rows: usize,
    pub acb: AcbParams,
}

impl InvParams {
    /// Selected codeword-position count.
    #[must_use]
    pub fn t1bar_len(&self) -> usize {
        self.samp1.count() - isqrt_exact(self.n0).unwrap_or(0)
    }

    /// Advice length fed to the breaker (before the row index).
    #[must_use]
    pub fn advice_len(&self) -> usize {
        self.split[0] + self.split[1] + self.samp2.count() + self.t1bar_len() + self.lext0.m_out
    }

    /// Residual free bits of the tail slice.
    #[must_use]
    pub fn z8_len(&self) -> usize {
        self.split[5] - self.samp2.count() - self.samp3.count() - self.samp4.count()
    }
}

fn isqrt_exact(n: usize) -> Option<usize> {
    let r = (n as f64).sqrt().round() as usize;
    (r * r == n).then_some(r)
}

/// Code parameters: a dual-BCH code over `n_b = 2^s - 1` positions.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct CodeParams {
    pub n_b: usize,
    pub t_b: usize,
}

/// A complete parameter profile. All asymptotic quantities appear here as
/// explicit numbers; `validate` enforces every shape constraint the
/// algorithms rely on.
#[derive(Clone, PartialEq, Debug, Serialize, Deserialize)]
pub struct ParamProfile {
    pub name: String,
    /// Half block length; inputs have `2n` bits.
    pub n: usize,
    /// Output bits.
    pub m: usize,
    /// Explicit floor for the tail slice of the invertible split.
    pub min_n6: usize,
    pub code: CodeParams,
    /// Named numeric constants carried for reporting.
    #[serde(default)]
    pub constants: BTreeMap<String, f64>,
    pub adv: AdvParams,
    pub wrap: WrapParams,
    pub inv: InvParams,
    pub ilext: IlextParams,
}

impl ParamProfile {
    /// Parses a profile from JSON and validates it.
    pub fn from_json(s: &str) -> Result<Self, Error> {
        let p: ParamProfile = serde_json::from_str(s)?;
        p.validate()?;
        Ok(p)
    }

    /// Loads one of the shipped profiles by name.
    pub fn builtin(name: &str) -> Result<Self, Error> {
        let src = match name {
            "toy20" => include_str!("../../../profiles/toy20.json"),
            "small64" => include_str!("../../../profiles/small64.json"),
            "demo1k" => include_str!("../../../profiles/demo1k.json"),
            _ => return Err(Error::ProfileNotFound(name.to_string())),
        };
        Self::from_json(src)
    }

    /// Full shape validation; every inequality the pipeline relies on.
    pub fn validate(&self) -> Result<(), Error> {
        let two_n = 2 * self.n;
        let err = |msg: String| Err(Error::InvalidParameter(msg));
        if self.m == 0 || self.n == 0 {
            return err("profile needs n >= 1 and m >= 1".into());
        }

        // Advice generator.
        let a = &self.adv;
        if a.n1 + a.n2 > two_n {
            return err("advice slices exceed the input".into());
        }
        a.samp_code.validate("adv.samp_code", a.n1)?;
        a.samp_z.validate("adv.samp_z", a.n2)?;
        if a.samp_code.range != self.code.n_b {
            return err("adv.samp_code must target codeword positions".into());
        }
        if a.samp_z.range != two_n {
            return err("adv.samp_z must target input positions".into());
        }
        a.core.validate("adv.core")?;
        if a.core.n_in != a.samp_z.count() {
            return err("adv.core input must match the sampled projection".into());
        }
        a.lext0.validate()?;
        if a.lext0.n_in != two_n || a.lext0.d != a.core.m_out {
            return err("adv.lext0 reads the full input seeded by the core output".into());
        }

        // Wrapper.
        let w = &self.wrap;
        if w.n_slice > two_n {
            return err("wrap.n_slice exceeds the input".into());
        }
        if w.rows == 0 {
            return err("wrap needs at least one row".into());
        }
        w.lext1.validate()?;
        w.lext2.validate()?;
        w.acb.validate()?;
        if w.lext1.n_in != w.n_slice || (1usize << w.lext1.d) <= w.rows {
            return err("wrap.lext1 must read the slice with 2^d > rows".into());
        }
        if w.lext1.m_out != w.lext2.d || w.lext2.n_in != two_n {
            return err("wrap.lext2 reads the full input seeded by wrap.lext1".into());
        }
        if w.lext2.m_out != w.acb.n1 || w.acb.n != two_n {
            return err("wrap breaker rows come from wrap.lext2 over the full input".into());
        }
        if w.acb.n2 != self.m {
            return err("wrap breaker output must be m bits".into());
        }
        if w.acb.h != a.advice_len() + index_bits(w.rows) {
            return err(format!(
                "wrap breaker advice must be {} + {} bits",
                a.advice_len(),
                index_bits(w.rows)
            ));
        }

        // Invertible variant.
        let v = &self.inv;
        if v.split.len() != 6 {
            return err("inv.split must have six entries".into());
        }
        if v.split.iter().sum::<usize>() != two_n {
            return err("inv.split must sum to 2n".into());
        }
        let n6 = v.split[5];
        if n6 < self.min_n6 {
            return err(format!("inv tail slice {} below floor {}", n6, self.min_n6));
        }
        v.samp1.validate("inv.samp1", v.split[0])?;
        v.samp2.validate("inv.samp2", v.split[1])?;
        v.samp3.validate("inv.samp3", v.split[2])?;
        v.samp4.validate("inv.samp4", v.split[3])?;
        if v.samp1.range != self.code.n_b {
            return err("inv.samp1 must target codeword positions".into());
        }
        if v.samp2.range != n6 {
            return err("inv.samp2 must target the tail slice".into());
        }
        if v.samp3.range != n6 - v.samp2.count() {
            return err("inv.samp3 must target the tail outside the second sample".into());
        }
        if v.samp4.range != n6 - v.samp2.count() - v.samp3.count() {
            return err("inv.samp4 must target the remaining tail".into());
        }
        if v.z8_len() == 0 {
            return err("inv leaves no residual free bits".into());
        }
        let sqrt_n0 = isqrt_exact(v.n0)
            .ok_or_else(|| Error::InvalidParameter("inv.n0 must be a perfect square".into()))?;
        if sqrt_n0 >= v.samp1.count() {
            return err("inv.samp1 must sample more positions than sqrt(n0)".into());
        }
        v.core.validate("inv.core")?;
        if v.core.n_in != v.samp2.count() {
            return err("inv.core input must match the second-sample projection".into());
        }
        v.lext0.validate()?;
        if v.lext0.n_in != two_n || v.lext0.d != v.core.m_out || v.lext0.m_out != v.n0 {
            return err("inv.lext0 reads the full input, core-seeded, emitting n0 bits".into());
        }
        v.lext1.validate()?;
        v.lext2.validate()?;
        v.lext3.validate()?;
        v.acb.validate()?;
        if v.rows == 0 {
            return err("inv needs at least one breaker row".into());
        }
        if v.lext1.n_in != v.split[4] || (1usize << v.lext1.d) <= v.rows {
            return err("inv.lext1 must read the fifth slice with 2^d > rows".into());
        }
        if v.lext1.m_out != v.lext2.d || v.lext2.n_in != v.samp3.count() {
            return err("inv.lext2 reads the third-sample projection seeded by inv.lext1".into());
        }
        if v.lext2.m_out != v.acb.n1 || v.acb.n != v.samp3.count() {
            return err("inv breaker rows come from inv.lext2 over the projection".into());
        }
        if v.acb.h != v.advice_len() + index_bits(v.rows) {
            return err(format!(
                "inv breaker advice must be {} + {} bits",
                v.advice_len(),
                index_bits(v.rows)
            ));
        }
        if v.lext3.kind != ExtractorKind::FixedRankInvertible {
            return err("inv.lext3 must be fixed-rank-invertible".into());
        }
        if v.lext3.n_in != v.samp4.count() || v.lext3.d != v.acb.n2 || v.lext3.m_out != self.m {
            return err("inv.lext3 maps the fourth-sample projection to m bits".into());
        }

        // Top-level interleaved extractor.
        self.ilext.validate("ilext")?;
        if self.ilext.n_in != two_n || self.ilext.m_out != self.m {
            return err("ilext must map 2n bits to m bits".into());
        }
        Ok(())
    }
}

/// A validated profile plus the precomputed code it uses.
#[derive(Clone, Debug)]
pub struct CompiledProfile {
    pub profile: ParamProfile,
    pub code: LinearCodeSpec,
}

impl CompiledProfile {
    /// Validates the profile and builds the code generator.
    pub fn new(profile: ParamProfile) -> Result<Self, Error> {
        profile.validate()?;
        let full = build_dual_bch(profile.code.n_b, profile.code.t_b)?;
        let two_n = 2 * profile.n;
        if full.k_in < two_n {
            return Err(Error::InvalidParameter(format!(
                "code dimension {} below 2n = {two_n}",
                full.k_in
            )));
        }
        // Oversized codes are cut down to the first 2n generator rows: a
        // subcode inherits linearity, full row rank, and the distance floor.
        let cut = if full.k_in == two_n {
            full
        } else {
            let rows: Vec<BitVector> = (0..two_n).map(|i| full.gen.row(i).clone()).collect();
            LinearCodeSpec::from_generator(
                BitMatrix::from_rows(rows, full.n_out)?,
                full.rel_distance,
            )?
        };
        // Re-express the encoder in a mixed message basis: left-multiply the
        // generator by the (invertible) matrix of multiplication by a fixed
        // nonzero field constant. The code — the row space — is unchanged,
        // and column-independence properties are basis-invariant, but the
        // natural cyclic-shift basis leaves low codeword positions supported
        // only on low message bits, which starves the residual-column rank
        // selection; the dense basis spreads every position's support.
        let f = crate::field2m::FieldSpec::default_for(two_n);
        let mut c = BitVector::zeros(two_n);
        for i in 0..two_n {
            // Aperiodic-ish support touching both bit parities.
            if i % 3 != 1 {
                c.set(i, true);
            }
        }
        let a = crate::field2m::as_linear_map(&f.embed(&c)?, two_n)?;
        let mixed: Vec<BitVector> = (0..two_n)
            .map(|i| {
                let mut row = BitVector::zeros(cut.n_out);
                for j in 0..two_n {
                    if a.get(i, j) {
                        row.xor_assign(cut.gen.row(j));
                    }
                }
                row
            })
            .collect();
        let code = LinearCodeSpec::from_generator(
            BitMatrix::from_rows(mixed, cut.n_out)?,
            cut.rel_distance,
        )?;
        Ok(CompiledProfile { profile, code })
    }

    /// Loads and compiles a shipped profile.
    pub fn builtin(name: &str) -> Result<Self, Error> {
        Self::new(ParamProfile::builtin(name)?)
    }

    /// Input block length `2n`.
    #[must_use]
    pub fn block_len(&self) -> usize {
        2 * self.profile.n
    }
}

/// The advice bundle produced by the advice generator.
#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct AdviceBundle {
    pub z1: BitVector,
    pub z2: BitVector,
    pub z3: BitVector,
    pub w1: BitVector,
    pub w2: BitVector,
}

impl AdviceBundle {
    /// Concatenation in the fixed order `z1 ∘ z2 ∘ z3 ∘ w1 ∘ w2`.
    #[must_use]
    pub fn flatten(&self) -> BitVector {
        self.z1
            .concat(&self.z2)
            .concat(&self.z3)
            .concat(&self.w1)
            .concat(&self.w2)
    }
}

/// A `2n`-bit input, optionally carrying the interleaving it was built from.
#[derive(Clone, Debug)]
pub struct InterleavedInput {
    pub z: BitVector,
    pub provenance: Option<(BitVector, BitVector, Permutation)>,
}

impl InterleavedInput {
    /// Wraps an opaque input.
    #[must_use]
    pub fn opaque(z: BitVector) -> Self {
        InterleavedInput {
            z,
            provenance: None,
        }
    }

    /// Builds the interleaving of `x` and `y` under `pi`, recording the parts.
    pub fn interleaved(x: &BitVector, y: &BitVector, pi: &Permutation) -> Result<Self, Error> {
        let z = crate::bitlin::interleave(x, y, pi)?;
        Ok(InterleavedInput {
            z,
            provenance: Some((x.clone(), y.clone(), pi.clone())),
        })
    }
}

/// Runs the advice generator.
pub fn adv_gen(comp: &CompiledProfile, z: &BitVector) -> Result<AdviceBundle, Error> {
    let two_n = comp.block_len();
    if z.len() != two_n {
        return Err(Error::LengthMismatch {
            expected: two_n,
            got: z.len(),
        });
    }
    let a = &comp.profile.adv;
    let z1 = z.prefix(a.n1)?;
    let z2 = z.select(&(a.n1..a.n1 + a.n2).collect::<Vec<_>>())?;
    let s_set = a.samp_code.sample(&z1)?;
    let t_set = a.samp_z.sample(&z2)?;
    let z3 = z.select(&t_set.indices)?;
    let r = ilext_eval(&a.core, &z3)?;
    let e = comp.code.encode(z)?;
    let w1 = e.select(&s_set.indices)?;
    let w2 = lext_linear(&a.lext0, z, &seed_or_one(r))?;
    Ok(AdviceBundle { z1, z2, z3, w1, w2 })
}

/// Runs the correlation-breaker wrapper on input `z` with advice `w`.
pub fn acb_wrap(comp: &CompiledProfile, z: &BitVector, w: &BitVector) -> Result<BitVector, Error> {
    let two_n = comp.block_len();
    if z.len() != two_n {
        return Err(Error::LengthMismatch {
            expected: two_n,
            got: z.len(),
        });
    }
    let p = &comp.profile.wrap;
    if w.len() != comp.profile.adv.advice_len() {
        return Err(Error::LengthMismatch {
            expected: comp.profile.adv.advice_len(),
            got: w.len(),
        });
    }
    let z1 = z.prefix(p.n_slice)?;
    let ib = index_bits(p.rows);
    let mut acc = BitVector::zeros(p.acb.n2);
    for i in 0..p.rows {
        let v = lext_linear(&p.lext1, &z1, &row_seed(i, p.lext1.d))?;
        let r = lext_linear(&p.lext2, z, &seed_or_one(v))?;
        let advice = w.concat(&BitVector::from_u64(i as u64, ib));
        acc.xor_assign(&acb(&p.acb, &r, z, &advice)?);
    }
    Ok(acc)
}

/// The non-malleable extractor: wrapper applied to the generated advice.
pub fn ilnm(comp: &CompiledProfile, z: &BitVector) -> Result<BitVector, Error> {
    let w = adv_gen(comp, z)?.flatten();
    acb_wrap(comp, z, &w)
}

/// Position bookkeeping for the invertible variant: where each projection of
/// the tail slice lives, in global input-column terms.
struct InvLayout {
    /// Global columns of the second-sample projection, in seed order.
    t2_global: Vec<usize>,
    /// Global columns of the third-sample projection, in seed order.
    zbar6_global: Vec<usize>,
    /// Global columns of the fourth-sample projection, in seed order.
    zbar7_global: Vec<usize>,
    /// Remaining free tail columns, ascending.
    z8_global: Vec<usize>,
}

fn distinct(indices: &[usize]) -> bool {
    let mut seen = indices.to_vec();
    seen.sort_unstable();
    seen.windows(2).all(|w| w[0] != w[1])
}

/// Computes the layout; `None` when any sampler repeats a position (the
/// in-band fallback regime).
fn inv_layout(
    v: &InvParams,
    offset6: usize,
    t2: &SampleIndexSet,
    t3: &SampleIndexSet,
    t4: &SampleIndexSet,
) -> Option<InvLayout> {
    if !distinct(&t2.indices) || !distinct(&t3.indices) || !distinct(&t4.indices) {
        return None;
    }
    let n6 = v.split[5];
    let t2_global: Vec<usize> = t2.indices.iter().map(|&p| offset6 + p).collect();
    let mut taken = vec![false; n6];
    for &p in &t2.indices {
        taken[p] = true;
    }
    let o2: Vec<usize> = (0..n6).filter(|&p| !taken[p]).collect();
    let zbar6_global: Vec<usize> = t3.indices.iter().map(|&i| offset6 + o2[i]).collect();
    for &i in &t3.indices {
        taken[o2[i]] = true;
    }
    let o3: Vec<usize> = (0..n6).filter(|&p| !taken[p]).collect();
    let zbar7_global: Vec<usize> = t4.indices.iter().map(|&i| offset6 + o3[i]).collect();
    for &i in &t4.indices {
        taken[o3[i]] = true;
    }
    let z8_global: Vec<usize> = (0..n6).filter(|&p| !taken[p]).map(|p| offset6 + p).collect();
    Some(InvLayout {
        t2_global,
        zbar6_global,
        zbar7_global,
        z8_global,
    })
}

/// Greedy selection of codeword positions whose constraint rows, restricted
/// to the residual free columns, are jointly independent with the nonzero
/// restricted rows of `m0`. Scans candidates largest-position-first.
/// Returns `None` when the quota cannot be met.
fn select_t1bar(
    comp: &CompiledProfile,
    t1: &SampleIndexSet,
    m0: &BitMatrix,
    z8_cols: &[usize],
) -> Option<Vec<usize>> {
    let v = &comp.profile.inv;
    let quota = v.t1bar_len();
    let mut basis = RowBasis::new();
    for i in 0..m0.nrows() {
        let restricted = m0.row(i).select(z8_cols).expect("columns in range");
        if !restricted.is_zero() && !basis.insert(&restricted) {
            // Dependent nonzero constraint row: the residual system cannot
            // be full rank for any selection.
            return None;
        }
    }
    let mut candidates: Vec<usize> = t1.indices.to_vec();
    candidates.sort_unstable();
    candidates.dedup();
    candidates.reverse();
    let mut chosen = Vec::with_capacity(quota);
    for p in candidates {
        if chosen.len() == quota {
            break;
        }
        let row = comp.code.position_row(p);
        let restricted = row.select(z8_cols).expect("columns in range");
        if basis.insert(&restricted) {
            chosen.push(p);
        }
    }
    (chosen.len() == quota).then_some(chosen)
}

/// The invertible non-malleable extractor. Total: inputs in the fallback
/// regime (repeated sampler positions or an unmeetable rank quota) map to
/// the all-zero output in-band.
pub fn ilnm_inv(comp: &CompiledProfile, z: &BitVector) -> Result<BitVector, Error> {
    match ilnm_inv_parts(comp, z)? {
        Some((_, out)) => Ok(out),
        None => Ok(BitVector::zeros(comp.profile.m)),
    }
}

/// The conditioning tuple behind the fiber-structure invariant: the
/// concatenation of every variable the extractor fixes before the final
/// linear extraction (the advice string `w`, the sampler slices, and the
/// correlation-breaker helper). Conditioned on this tuple, the pre-image of
/// any output is an affine space of profile-constant dimension. Returns
/// `None` for inputs in the fallback regime.
pub fn ilnm_inv_fixing(comp: &CompiledProfile, z: &BitVector) -> Result<Option<BitVector>, Error> {
    Ok(ilnm_inv_parts(comp, z)?.map(|(fixing, _)| fixing))
}

/// Shared body: computes the fixing tuple and the output, or `None` in the
/// fallback regime.
fn ilnm_inv_parts(
    comp: &CompiledProfile,
    z: &BitVector,
) -> Result<Option<(BitVector, BitVector)>, Error> {
    let two_n = comp.block_len();
    if z.len() != two_n {
        return Err(Error::LengthMismatch {
            expected: two_n,
            got: z.len(),
        });
    }
    let v = &comp.profile.inv;
    // Split boundaries.
    let mut off = [0usize; 7];
    for i in 0..6 {
        off[i + 1] = off[i] + v.split[i];
    }
    let part = |i: usize| z.select(&(off[i]..off[i + 1]).collect::<Vec<_>>());
    let (z1, z2, z3, z4, z5) = (part(0)?, part(1)?, part(2)?, part(3)?, part(4)?);

    let t1 = v.samp1.sample(&z1)?;
    let t2 = v.samp2.sample(&z2)?;
    let t3 = v.samp3.sample(&z3)?;
    let t4 = v.samp4.sample(&z4)?;
    let Some(layout) = inv_layout(v, off[5], &t2, &t3, &t4) else {
        return Ok(None);
    };

    let zbar2 = z.select(&layout.t2_global)?;
    let z2p = ilext_eval(&v.core, &zbar2)?;
    let lext0_seed = seed_or_one(z2p);
    let z2pp = lext_linear(&v.lext0, z, &lext0_seed)?;
    let m0 = lext_matrix(&v.lext0, &lext0_seed)?;

    let Some(t1bar) = select_t1bar(comp, &t1, &m0, &layout.z8_global) else {
        return Ok(None);
    };
    let e = comp.code.encode(z)?;
    let e_t1bar = e.select(&t1bar)?;
    let w = z1
        .concat(&z2)
        .concat(&zbar2)
        .concat(&e_t1bar)
        .concat(&z2pp);

    let zbar6 = z.select(&layout.zbar6_global)?;
    let ib = index_bits(v.rows);
    let mut acc = BitVector::zeros(v.acb.n2);
    for i in 0..v.rows {
        let vi = lext_linear(&v.lext1, &z5, &row_seed(i, v.lext1.d))?;
        let ri = lext_linear(&v.lext2, &zbar6, &seed_or_one(vi))?;
        let advice = w.concat(&BitVector::from_u64(i as u64, ib));
        acc.xor_assign(&acb(&v.acb, &ri, &zbar6, &advice)?);
    }
    let zbar7 = z.select(&layout.zbar7_global)?;
    let out = lext_linear(&v.lext3, &zbar7, &seed_or_one(acc))?;
    // The fixing: w already carries z1, z2, zbar2, e_t1bar and z2''; z3/z4
    // determine the layout, z5 the row seeds, zbar6 the helper.
    let fixing = w.concat(&z3).concat(&z4).concat(&z5).concat(&zbar6);
    Ok(Some((fixing, out)))
}

/// Samples a uniform pre-image of `g` under [`ilnm_inv`]: the encoder of the
/// derived code. Rejection-samples the advice-side fixings, solves the
/// residual linear system for the free tail bits, and verifies the round
/// trip before returning.
pub fn ilnm_sample_preimage<R: RngCore>(
    comp: &CompiledProfile,
    g: &BitVector,
    rng: &mut R,
) -> Result<BitVector, Error> {
    let v = &comp.profile.inv;
    let two_n = comp.block_len();
    if g.len() != comp.profile.m {
        return Err(Error::LengthMismatch {
            expected: comp.profile.m,
            got: g.len(),
        });
    }
    let mut off = [0usize; 7];
    for i in 0..6 {
        off[i + 1] = off[i] + v.split[i];
    }
    let ib = index_bits(v.rows);

    for _ in 0..SAMPLE_RETRIES {
        // Step 1: head slices and their sampled index sets.
        let head = BitVector::random(off[5], rng);
        let part = |i: usize| head.select(&(off[i]..off[i + 1]).collect::<Vec<_>>());
        let (z1, z2, z3, z4, z5) = (part(0)?, part(1)?, part(2)?, part(3)?, part(4)?);
        let t1 = v.samp1.sample(&z1)?;
        let t2 = v.samp2.sample(&z2)?;
        let t3 = v.samp3.sample(&z3)?;
        let t4 = v.samp4.sample(&z4)?;
        let Some(layout) = inv_layout(v, off[5], &t2, &t3, &t4) else {
            continue;
        };

        // Step 2: the second-sample projection and the derived seed.
        let zbar2 = BitVector::random(v.samp2.count(), rng);
        let z2p = ilext_eval(&v.core, &zbar2)?;
        let lext0_seed = seed_or_one(z2p);
        let m0 = lext_matrix(&v.lext0, &lext0_seed)?;

        // Step 3: the linear-extraction advice component.
        let z2pp = BitVector::random(v.n0, rng);

        // Step 4: the rank-quota selection.
        let Some(t1bar) = select_t1bar(comp, &t1, &m0, &layout.z8_global) else {
            continue;
        };

        // Step 5: the sampled codeword projection.
        let e_t1bar = BitVector::random(t1bar.len(), rng);

        // Step 6: breaker rows and the reserved projection's pre-image.
        let w = z1
            .concat(&z2)
            .concat(&zbar2)
            .concat(&e_t1bar)
            .concat(&z2pp);
        let zbar6 = BitVector::random(v.samp3.count(), rng);
        let mut acc = BitVector::zeros(v.acb.n2);
        for i in 0..v.rows {
            let vi = lext_linear(&v.lext1, &z5, &row_seed(i, v.lext1.d))?;
            let ri = lext_linear(&v.lext2, &zbar6, &seed_or_one(vi))?;
            let advice = w.concat(&BitVector::from_u64(i as u64, ib));
            acc.xor_assign(&acb(&v.acb, &ri, &zbar6, &advice)?);
        }
        let zbar7 = lext_preimage(&v.lext3, &seed_or_one(acc), g)?.sample(rng);

        // Step 7: residual linear system over the free tail bits.
        let mut z_known = BitVector::zeros(two_n);
        for i in 0..off[5] {
            z_known.set(i, head.get(i));
        }
        let place = |zv: &mut BitVector, cols: &[usize], bits: &BitVector| {
            for (j, &c) in cols.iter().enumerate() {
                zv.set(c, bits.get(j));
            }
        };
        place(&mut z_known, &layout.t2_global, &zbar2);
        place(&mut z_known, &layout.zbar6_global, &zbar6);
        place(&mut z_known, &layout.zbar7_global, &zbar7);

        let mut rows: Vec<BitVector> = Vec::with_capacity(v.n0 + t1bar.len());
        let mut rhs = BitVector::zeros(v.n0 + t1bar.len());
        for i in 0..m0.nrows() {
            rows.push(m0.row(i).clone());
            rhs.set(i, z2pp.get(i));
        }
        for (j, &p) in t1bar.iter().enumerate() {
            rows.push(comp.code.position_row(p));
            rhs.set(v.n0 + j, e_t1bar.get(j));
        }
        let full = BitMatrix::from_rows(rows, two_n)?;
        // Move the known part to the right-hand side.
        let rhs_adj = rhs.xor(&full.mul_vec(&z_known)?)?;
        let restricted = full.select_cols(&layout.z8_global)?;
        let Some(space) = solve_affine(&restricted, &rhs_adj)? else {
            continue; // Inconsistent fixing: reject and resample.
        };
        let z8 = space.sample(rng);

        let mut z = z_known;
        place(&mut z, &layout.z8_global, &z8);
        // Round-trip soundness, asserted on every sample.
        if &ilnm_inv(comp, &z)? != g {
            continue;
        }
        return Ok(z);
    }
    Err(Error::EncodeFailure(SAMPLE_RETRIES))
}

/// The top-level interleaved-source extractor.
pub fn ilext(comp: &CompiledProfile, z: &BitVector) -> Result<BitVector, Error> {
    ilext_eval(&comp.profile.ilext, z)
}

/// The bounded-communication two-source non-malleable extractor: the
/// invertible extractor on `x ∘ y` (identity interleaving). The reduction
/// for communication-bounded tampering fixes transcripts first and then
/// defers to this extractor; reports record the substitution.
pub fn comm_nmext(
    comp: &CompiledProfile,
    x: &BitVector,
    y: &BitVector,
) -> Result<BitVector, Error> {
    if x.len() != comp.profile.n || y.len() != comp.profile.n {
        return Err(Error::LengthMismatch {
            expected: comp.profile.n,
            got: if x.len() != comp.profile.n {
                x.len()
            } else {
                y.len()
            },
        });
    }
    ilnm_inv(comp, &x.concat(y))
}
