//! Adversary families, the canonical non-malleability simulator, and exact /
//! Monte-Carlo statistical oracles.
//!
//! This module turns the definitions into executable measurements:
//!
//! * [`TamperSpec`] describes one adversary from the implemented families
//!   (split-state, interleaved split-state, linear-composed, explicit sum
//!   form, bounded-communication protocol) as data, serializable to JSON.
//! * [`DistributionTable`] holds an exact probability mass function with an
//!   optional integer-count backing so the floating path can be validated
//!   against exact rationals on small domains.
//! * [`canonical_simulator`] and [`nm_experiment`] implement the standard
//!   simulator (same-star iff the tampered codeword equals the original)
//!   and the non-malleability experiment: the maximum over messages of the
//!   total-variation distance between the real tampered decoding and the
//!   simulator's distribution with same-star replaced by the message.
//!
//! Exact mode enumerates codewords up to a configurable cap; Monte Carlo
//! mode samples, reporting bias-corrected estimates with analytic standard
//! errors so exact/MC agreement is itself testable.

use rand::RngCore;
use serde::{Deserialize, Serialize};

use crate::bitlin::{BitMatrix, BitVector, Permutation};
use crate::nmcode::CodewordScheme;
use crate::Error;

/// Default enumeration cap: exact mode refuses domains above `2^24`.
pub const DEFAULT_ENUM_CAP_BITS: usize = 24;

/// Dense function tables are capped at this many input bits.
const TABLE_MAX_BITS: usize = 16;

// ---------------------------------------------------------------------------
// Boolean-function programs.

/// A function on bit strings: a dense table for small inputs or a small
/// program (mask / permutation / affine map / composition) above that.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "kebab-case")]
pub enum BitFn {
    /// The identity on `n` bits.
    Identity { n: usize },
    /// Ignores the `n_in`-bit input and returns `out`.
    Constant { n_in: usize, out: BitVector },
    /// XOR with a fixed mask (input length = mask length).
    XorMask { mask: BitVector },
    /// Bit-position permutation.
    Permute { perm: Permutation },
    /// Affine map `x -> matrix * x + offset` (matrix may be rectangular).
    Affine { matrix: BitMatrix, offset: BitVector },
    /// Dense table: `outputs[x]` for every `x` in `[2^n_in]`.
    Table { n_in: usize, outputs: Vec<BitVector> },
    /// Left-to-right composition of steps.
    Compose { steps: Vec<BitFn> },
}

impl BitFn {
    /// Input length in bits.
    #[must_use]
    pub fn n_in(&self) -> usize {
        match self {
            BitFn::Identity { n } => *n,
            BitFn::Constant { n_in, .. } | BitFn::Table { n_in, .. } => *n_in,
            BitFn::XorMask { mask } => mask.len(),
            BitFn::Permute { perm } => perm.len(),
            BitFn::Affine { matrix, .. } => matrix.ncols(),
            BitFn::Compose { steps } => steps.first().map_or(0, BitFn::n_in),
        }
    }

    /// Output length in bits.
    #[must_use]
    pub fn n_out(&self) -> usize {
        match self {
            BitFn::Identity { n } => *n,
            BitFn::Constant { out, .. } => out.len(),
            BitFn::XorMask { mask } => mask.len(),
            BitFn::Permute { perm } => perm.len(),
            BitFn::Affine { matrix, .. } => matrix.nrows(),
            BitFn::Table { outputs, .. } => outputs.first().map_or(0, BitVector::len),
            BitFn::Compose { steps } => steps.last().map_or(0, BitFn::n_out),
        }
    }

    /// Structural validation: table sizes, composition chaining, dense cap.
    pub fn validate(&self) -> Result<(), Error> {
        match self {
            BitFn::Identity { .. }
            | BitFn::Constant { .. }
            | BitFn::XorMask { .. }
            | BitFn::Permute { .. } => Ok(()),
            BitFn::Affine { matrix, offset } => {
                if matrix.nrows() != offset.len() {
                    return Err(Error::LengthMismatch {
                        expected: matrix.nrows(),
                        got: offset.len(),
                    });
                }
                Ok(())
            }
            BitFn::Table { n_in, outputs } => {
                if *n_in > TABLE_MAX_BITS {
                    return Err(Error::InvalidParameter(format!(
                        "dense table capped at {TABLE_MAX_BITS} input bits, got {n_in}"
                    )));
                }
                if outputs.len() != 1 << n_in {
                    return Err(Error::InvalidParameter(format!(
                        "table needs {} outputs, got {}",
                        1usize << n_in,
                        outputs.len()
                    )));
                }
                let out_len = outputs[0].len();
                if outputs.iter().any(|o| o.len() != out_len) {
                    return Err(Error::InvalidParameter(
                        "table outputs must share one length".into(),
                    ));
                }
                Ok(())
            }
            BitFn::Compose { steps } => {
                if steps.is_empty() {
                    return Err(Error::InvalidParameter(
                        "composition needs at least one step".into(),
                    ));
                }
                for w in steps.windows(2) {
                    if w[0].n_out() != w[1].n_in() {
                        return Err(Error::LengthMismatch {
                            expected: w[0].n_out(),
                            got: w[1].n_in(),
                        });
                    }
                }
                steps.iter().try_for_each(BitFn::validate)
            }
        }
    }

    /// Evaluates the function.
    pub fn eval(&self, x: &BitVector) -> Result<BitVector, Error> {
        if x.len() != self.n_in() {
            return Err(Error::LengthMismatch {
                expected: self.n_in(),
                got: x.len(),
            });
        }
        match self {
            BitFn::Identity { .. } => Ok(x.clone()),
            BitFn::Constant { out, .. } => Ok(out.clone()),
            BitFn::XorMask { mask } => x.xor(mask),
            BitFn::Permute { perm } => perm.apply(x),
            BitFn::Affine { matrix, offset } => matrix.mul_vec(x)?.xor(offset),
            BitFn::Table { outputs, .. } => Ok(outputs[x.to_u64() as usize].clone()),
            BitFn::Compose { steps } => {
                let mut v = x.clone();
                for s in steps {
                    v = s.eval(&v)?;
                }
                Ok(v)
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Tampering adversaries.

/// Which party sends a protocol message.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Party {
    A,
    B,
}

/// One protocol round: the sender computes its message from its own input
/// concatenated with the transcript so far.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CommRound {
    pub sender: Party,
    pub bits: usize,
    pub msg: BitFn,
}

/// One adversary from an implemented tampering family, as data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "kebab-case")]
pub enum TamperSpec {
    /// Codeword halves tampered independently: `c = x . y -> f(x) . g(y)`.
    SplitState { f: BitFn, g: BitFn },
    /// Interleaved split-state: the halves are mixed by a fixed permutation,
    /// `c = (x . y)_pi -> (f(x) . g(y))_pi`.
    Interleaved {
        f: BitFn,
        g: BitFn,
        pi: Permutation,
    },
    /// A global linear map applied after interleaved split-state tampering.
    LinearComposed {
        h: BitMatrix,
        inner: Box<TamperSpec>,
    },
    /// Explicit sum form: `c' = ((f1(x)+g1(y)) . (f2(x)+g2(y)))_pi`.
    SumForm {
        f1: BitFn,
        f2: BitFn,
        g1: BitFn,
        g2: BitFn,
        pi: Permutation,
    },
    /// Bounded-communication split-state: the parties exchange at most `t`
    /// bits each over `rounds`, then tamper their halves given the
    /// transcript.
    CommProtocol {
        rounds: Vec<CommRound>,
        t: usize,
        final_f: BitFn,
        final_g: BitFn,
    },
}

impl TamperSpec {
    /// A short stable family name for reports.
    #[must_use]
    pub fn family(&self) -> &'static str {
        match self {
            TamperSpec::SplitState { .. } => "split-state",
            TamperSpec::Interleaved { .. } => "interleaved",
            TamperSpec::LinearComposed { .. } => "linear-composed",
            TamperSpec::SumForm { .. } => "sum-form",
            TamperSpec::CommProtocol { .. } => "comm-protocol",
        }
    }

    /// Validates the spec against a block length `2n`.
    pub fn validate(&self, block: usize) -> Result<(), Error> {
        if block % 2 != 0 {
            return Err(Error::InvalidParameter(
                "block length must be even for split-state families".into(),
            ));
        }
        let n = block / 2;
        let check = |f: &BitFn, n_in: usize, n_out: usize| -> Result<(), Error> {
            f.validate()?;
            if f.n_in() != n_in || f.n_out() != n_out {
                return Err(Error::InvalidParameter(format!(
                    "function shape {}->{} does not match required {}->{}",
                    f.n_in(),
                    f.n_out(),
                    n_in,
                    n_out
                )));
            }
            Ok(())
        };
        match self {
            TamperSpec::SplitState { f, g } => {
                check(f, n, n)?;
                check(g, n, n)
            }
            TamperSpec::Interleaved { f, g, pi } => {
                check(f, n, n)?;
                check(g, n, n)?;
                if pi.len() != block {
                    return Err(Error::LengthMismatch {
                        expected: block,
                        got: pi.len(),
                    });
                }
                Ok(())
            }
            TamperSpec::LinearComposed { h, inner } => {
                if h.nrows() != block || h.ncols() != block {
                    return Err(Error::InvalidParameter(format!(
                        "linear map must be {block}x{block}, got {}x{}",
                        h.nrows(),
                        h.ncols()
                    )));
                }
                if !matches!(**inner, TamperSpec::Interleaved { .. }) {
                    return Err(Error::InvalidParameter(
                        "linear-composed inner spec must be interleaved".into(),
                    ));
                }
                inner.validate(block)
            }
            TamperSpec::SumForm { f1, f2, g1, g2, pi } => {
                check(f1, n, n)?;
                check(f2, n, n)?;
                check(g1, n, n)?;
                check(g2, n, n)?;
                if pi.len() != block {
                    return Err(Error::LengthMismatch {
                        expected: block,
                        got: pi.len(),
                    });
                }
                Ok(())
            }
            TamperSpec::CommProtocol {
                rounds,
                t,
                final_f,
                final_g,
            } => {
                let mut sent = [0usize; 2];
                let mut transcript_len = 0usize;
                for r in rounds {
                    r.msg.validate()?;
                    if r.msg.n_in() != n + transcript_len || r.msg.n_out() != r.bits {
                        return Err(Error::InvalidParameter(format!(
                            "round function shape {}->{} does not match required {}->{}",
                            r.msg.n_in(),
                            r.msg.n_out(),
                            n + transcript_len,
                            r.bits
                        )));
                    }
                    sent[matches!(r.sender, Party::B) as usize] += r.bits;
                    transcript_len += r.bits;
                }
                if sent[0] > *t || sent[1] > *t {
                    return Err(Error::InvalidParameter(format!(
                        "communication budget exceeded: sent {sent:?} with t = {t}"
                    )));
                }
                check(final_f, n + transcript_len, n)?;
                check(final_g, n + transcript_len, n)
            }
        }
    }

    /// Applies the tampering to a codeword.
    pub fn apply(&self, c: &BitVector) -> Result<BitVector, Error> {
        let block = c.len();
        let n = block / 2;
        match self {
            TamperSpec::SplitState { f, g } => {
                let x = c.prefix(n)?;
                let y = c.bit_range(n, n)?;
                Ok(f.eval(&x)?.concat(&g.eval(&y)?))
            }
            TamperSpec::Interleaved { f, g, pi } => {
                let xy = pi.invert().apply(c)?;
                let x = xy.prefix(n)?;
                let y = xy.bit_range(n, n)?;
                pi.apply(&f.eval(&x)?.concat(&g.eval(&y)?))
            }
            TamperSpec::LinearComposed { h, inner } => h.mul_vec(&inner.apply(c)?),
            TamperSpec::SumForm { f1, f2, g1, g2, pi } => {
                let xy = pi.invert().apply(c)?;
                let x = xy.prefix(n)?;
                let y = xy.bit_range(n, n)?;
                let left = f1.eval(&x)?.xor(&g1.eval(&y)?)?;
                let right = f2.eval(&x)?.xor(&g2.eval(&y)?)?;
                pi.apply(&left.concat(&right))
            }
            TamperSpec::CommProtocol {
                rounds,
                t,
                final_f,
                final_g,
            } => {
                let x = c.prefix(n)?;
                let y = c.bit_range(n, n)?;
                let (x2, y2, _) = run_protocol(rounds, *t, final_f, final_g, &x, &y)?;
                Ok(x2.concat(&y2))
            }
        }
    }
}

/// Runs a bounded-communication protocol: alternating evaluation of round
/// functions threading the transcript, then the final tampering functions on
/// (own input, full transcript). The per-party budget is asserted.
pub fn run_protocol(
    rounds: &[CommRound],
    t: usize,
    final_f: &BitFn,
    final_g: &BitFn,
    x: &BitVector,
    y: &BitVector,
) -> Result<(BitVector, BitVector, BitVector), Error> {
    let mut transcript = BitVector::zeros(0);
    let mut sent = [0usize; 2];
    for r in rounds {
        let own = match r.sender {
            Party::A => x,
            Party::B => y,
        };
        let msg = r.msg.eval(&own.concat(&transcript))?;
        sent[matches!(r.sender, Party::B) as usize] += msg.len();
        assert!(
            sent[0] <= t && sent[1] <= t,
            "communication budget violated at runtime"
        );
        transcript = transcript.concat(&msg);
    }
    let x2 = final_f.eval(&x.concat(&transcript))?;
    let y2 = final_g.eval(&y.concat(&transcript))?;
    Ok((x2, y2, transcript))
}

/// Decomposes a linear-composed adversary into the explicit sum form: with
/// `c = (x . y)_pi` and `c' = h((f(x) . g(y))_pi)`, linearity of `h` splits
/// the tampered codeword into an x-only and a y-only contribution, giving
/// `c' = ((f1(x)+g1(y)) . (f2(x)+g2(y)))_pi` with `f1 = top(A f)`,
/// `f2 = bottom(A f)` for the linear map `A = P^-1 h P E_top` (and likewise
/// for the g-side with `E_bottom`).
pub fn decompose_linear_composed(spec: &TamperSpec, block: usize) -> Result<TamperSpec, Error> {
    let TamperSpec::LinearComposed { h, inner } = spec else {
        return Err(Error::InvalidParameter(
            "decomposition requires a linear-composed spec".into(),
        ));
    };
    let TamperSpec::Interleaved { f, g, pi } = &**inner else {
        return Err(Error::InvalidParameter(
            "linear-composed inner spec must be interleaved".into(),
        ));
    };
    spec.validate(block)?;
    let n = block / 2;
    let pinv = pi.invert();
    // Column j of the x-side map: embed e_j in the top half, interleave,
    // apply h, de-interleave. Split into top (first output half) and bottom.
    let mut cols_top = Vec::with_capacity(n);
    let mut cols_bot = Vec::with_capacity(n);
    let mut gcols_top = Vec::with_capacity(n);
    let mut gcols_bot = Vec::with_capacity(n);
    for j in 0..n {
        let mut e = BitVector::zeros(n);
        e.set(j, true);
        let zero = BitVector::zeros(n);
        let top = pinv.apply(&h.mul_vec(&pi.apply(&e.concat(&zero))?)?)?;
        cols_top.push(top.prefix(n)?);
        cols_bot.push(top.bit_range(n, n)?);
        let bot = pinv.apply(&h.mul_vec(&pi.apply(&zero.concat(&e))?)?)?;
        gcols_top.push(bot.prefix(n)?);
        gcols_bot.push(bot.bit_range(n, n)?);
    }
    let from_cols = |cols: &[BitVector]| -> Result<BitMatrix, Error> {
        let mut m = BitMatrix::zeros(n, n);
        for (j, col) in cols.iter().enumerate() {
            for i in 0..n {
                if col.get(i) {
                    m.set(i, j, true);
                }
            }
        }
        Ok(m)
    };
    let affine = |m: BitMatrix| BitFn::Affine {
        matrix: m,
        offset: BitVector::zeros(n),
    };
    let wrap = |base: &BitFn, m: BitMatrix| BitFn::Compose {
        steps: vec![base.clone(), affine(m)],
    };
    Ok(TamperSpec::SumForm {
        f1: wrap(f, from_cols(&cols_top)?),
        f2: wrap(f, from_cols(&cols_bot)?),
        g1: wrap(g, from_cols(&gcols_top)?),
        g2: wrap(g, from_cols(&gcols_bot)?),
        pi: pi.clone(),
    })
}

// ---------------------------------------------------------------------------
// Distribution tables.

/// Exact integer backing of a pmf: `counts[i] / denom`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExactPmf {
    pub counts: Vec<u64>,
    pub denom: u64,
}

/// A probability mass function over an enumerable domain. Probabilities are
/// double precision summed with Kahan compensation; when built from counts
/// on a domain of at most `2^16` outcomes the exact integer form is kept and
/// used to compute distances as exact rationals.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DistributionTable {
    pmf: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    exact: Option<ExactPmf>,
}

/// Kahan-compensated sum.
fn kahan_sum<I: IntoIterator<Item = f64>>(xs: I) -> f64 {
    let mut sum = 0.0;
    let mut comp = 0.0;
    for x in xs {
        let y = x - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
    }
    sum
}

/// Tolerance on the pmf normalization: `2^-40`.
const PMF_TOLERANCE: f64 = 1.0 / (1u64 << 40) as f64;

impl DistributionTable {
    /// Builds a table from outcome counts; exact rationals are retained for
    /// domains of at most `2^16` outcomes.
    pub fn from_counts(counts: &[u64]) -> Result<Self, Error> {
        let denom: u64 = counts.iter().sum();
        if denom == 0 {
            return Err(Error::InvalidParameter(
                "distribution needs at least one observation".into(),
            ));
        }
        let pmf: Vec<f64> = counts.iter().map(|&c| c as f64 / denom as f64).collect();
        let exact = (counts.len() <= 1 << 16).then(|| ExactPmf {
            counts: counts.to_vec(),
            denom,
        });
        Ok(DistributionTable { pmf, exact })
    }

    /// Builds a table from explicit probabilities; must sum to 1 within
    /// `2^-40` (Kahan-compensated) and be non-negative.
    pub fn from_pmf(pmf: Vec<f64>) -> Result<Self, Error> {
        if pmf.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
            return Err(Error::InvalidParameter(
                "probabilities must lie in [0, 1]".into(),
            ));
        }
        let total = kahan_sum(pmf.iter().copied());
        if (total - 1.0).abs() > PMF_TOLERANCE {
            return Err(Error::InvalidParameter(format!(
                "pmf sums to {total}, outside 1 +/- 2^-40"
            )));
        }
        Ok(DistributionTable { pmf, exact: None })
    }

    /// Domain size.
    #[must_use]
    pub fn len(&self) -> usize {
        self.pmf.len()
    }

    /// True when the domain is empty.
    #[must_use]
    pub fn is_empty(&self) -> bool {
        self.pmf.is_empty()
    }

    /// Probability of outcome `i`.
    #[must_use]
    pub fn p(&self, i: usize) -> f64 {
        self.pmf[i]
    }

    /// The probabilities.
    #[must_use]
    pub fn pmf(&self) -> &[f64] {
        &self.pmf
    }

    /// The exact integer backing, when present.
    #[must_use]
    pub fn exact(&self) -> Option<&ExactPmf> {
        self.exact.as_ref()
    }

    /// Marginal over the first factor of a product domain `A x B` laid out
    /// as `index = a * b_size + b`.
    pub fn marginal_a(&self, b_size: usize) -> Result<DistributionTable, Error> {
        if b_size == 0 || self.pmf.len() % b_size != 0 {
            return Err(Error::InvalidParameter(
                "domain is not a product of the stated shape".into(),
            ));
        }
        let a_size = self.pmf.len() / b_size;
        if let Some(e) = &self.exact {
            let mut counts = vec![0u64; a_size];
            for (i, &c) in e.counts.iter().enumerate() {
                counts[i / b_size] += c;
            }
            return DistributionTable::from_counts(&counts);
        }
        let pmf: Vec<f64> = (0..a_size)
            .map(|a| kahan_sum(self.pmf[a * b_size..(a + 1) * b_size].iter().copied()))
            .collect();
        DistributionTable::from_pmf(pmf)
    }

    /// Marginal over the second factor of a product domain.
    pub fn marginal_b(&self, b_size: usize) -> Result<DistributionTable, Error> {
        if b_size == 0 || self.pmf.len() % b_size != 0 {
            return Err(Error::InvalidParameter(
                "domain is not a product of the stated shape".into(),
            ));
        }
        if let Some(e) = &self.exact {
            let mut counts = vec![0u64; b_size];
            for (i, &c) in e.counts.iter().enumerate() {
                counts[i % b_size] += c;
            }
            return DistributionTable::from_counts(&counts);
        }
        let pmf: Vec<f64> = (0..b_size)
            .map(|b| kahan_sum(self.pmf.iter().skip(b).step_by(b_size).copied()))
            .collect();
        DistributionTable::from_pmf(pmf)
    }
}

/// Total-variation distance: half the l1 distance between the pmfs. Computed
/// as an exact rational when both tables carry integer backings, otherwise
/// with Kahan-compensated doubles.
pub fn tv_distance(p: &DistributionTable, q: &DistributionTable) -> Result<f64, Error> {
    if p.len() != q.len() {
        return Err(Error::LengthMismatch {
            expected: p.len(),
            got: q.len(),
        });
    }
    if let (Some(ep), Some(eq)) = (&p.exact, &q.exact) {
        // |c_i/dp - d_i/dq| = |c_i*dq - d_i*dp| / (dp*dq), summed in u128.
        let (dp, dq) = (u128::from(ep.denom), u128::from(eq.denom));
        let mut num: u128 = 0;
        for (&c, &d) in ep.counts.iter().zip(&eq.counts) {
            let a = u128::from(c) * dq;
            let b = u128::from(d) * dp;
            num += a.abs_diff(b);
        }
        return Ok(num as f64 / (2.0 * (dp * dq) as f64));
    }
    Ok(kahan_sum(
        p.pmf.iter().zip(&q.pmf).map(|(&a, &b)| (a - b).abs()),
    ) / 2.0)
}

// ---------------------------------------------------------------------------
// Exact joint enumeration.

/// An enumerable source: uniform on the full cube or flat (uniform) on an
/// explicit support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case")]
pub enum SourceSpec {
    Uniform { bits: usize },
    Flat { bits: usize, support: Vec<BitVector> },
}

impl SourceSpec {
    /// Number of equally weighted atoms.
    #[must_use]
    pub fn size(&self) -> usize {
        match self {
            SourceSpec::Uniform { bits } => 1usize << bits,
            SourceSpec::Flat { support, .. } => support.len(),
        }
    }

    /// Input width in bits.
    #[must_use]
    pub fn bits(&self) -> usize {
        match self {
            SourceSpec::Uniform { bits } | SourceSpec::Flat { bits, .. } => *bits,
        }
    }

    fn for_each(&self, mut visit: impl FnMut(&BitVector) -> Result<(), Error>) -> Result<(), Error> {
        match self {
            SourceSpec::Uniform { bits } => {
                for v in 0u64..1 << bits {
                    visit(&BitVector::from_u64(v, *bits))?;
                }
                Ok(())
            }
            SourceSpec::Flat { support, .. } => support.iter().try_for_each(visit),
        }
    }
}

/// Exact joint distribution of `(f(z), g(z))` over an enumerable source,
/// laid out as `index = f * 2^b_bits + g`. Refuses sources larger than the
/// cap with an explicit error directing to Monte Carlo mode.
pub fn exact_joint(
    source: &SourceSpec,
    a_bits: usize,
    b_bits: usize,
    mut f: impl FnMut(&BitVector) -> Result<BitVector, Error>,
    mut g: impl FnMut(&BitVector) -> Result<BitVector, Error>,
    cap_bits: usize,
) -> Result<DistributionTable, Error> {
    let size = source.size();
    if size > 1usize << cap_bits {
        return Err(Error::EnumerationCap {
            domain_bits: size.next_power_of_two().trailing_zeros() as usize,
            cap_bits,
        });
    }
    let mut counts = vec![0u64; 1 << (a_bits + b_bits)];
    source.for_each(|z| {
        let a = f(z)?;
        let b = g(z)?;
        debug_assert!(a.len() == a_bits && b.len() == b_bits);
        counts[((a.to_u64() as usize) << b_bits) | b.to_u64() as usize] += 1;
        Ok(())
    })?;
    DistributionTable::from_counts(&counts)
}

// ---------------------------------------------------------------------------
// Monte Carlo total-variation estimation.

/// A Monte Carlo TV estimate with its analytic standard error.
#[derive(Clone, Copy, Debug, Serialize, Deserialize)]
pub struct McTv {
    pub estimate: f64,
    pub std_error: f64,
}

/// Per-cell bias of `|d|` as an estimator of the true difference magnitude:
/// with `d ~ N(mu, s^2)`, `E|d| - mu = s sqrt(2/pi) exp(-mu^2/2s^2)
/// + mu (erf(mu / (s sqrt 2)) - 1)`. The true `mu` is plugged in via the
/// moment estimate `mu_hat = sqrt(max(d^2 - s^2, 0))` (since
/// `E[d^2] = mu^2 + s^2`), so the correction adapts: it is the full null
/// term `s sqrt(2/pi)` when the observed difference is pure noise and
/// vanishes when the difference dominates the noise. A flat null-term
/// subtraction would bias the estimate low by `sum s_i sqrt(2/pi) / 2` on
/// genuinely different distributions, which at battery sample sizes exceeds
/// three standard errors.
fn abs_bias(d: f64, s: f64) -> f64 {
    if s <= 0.0 {
        return 0.0;
    }
    let mu = (d * d - s * s).max(0.0).sqrt();
    let t = mu / s;
    s * (2.0 / std::f64::consts::PI).sqrt() * (-0.5 * t * t).exp()
        + mu * (statrs::function::erf::erf(t / std::f64::consts::SQRT_2) - 1.0)
}

/// Bias-corrected TV estimate of an empirical distribution (counts over `N`
/// trials) against an exact reference: `|p_hat_i - q_i|` minus the adaptive
/// per-cell noise bias (see [`abs_bias`]), halved and clamped at zero. The
/// standard error conservatively ignores the (negative) multinomial
/// covariance: `SE = sqrt(sum s_i^2) / 2` with `s_i^2 = q_i (1 - q_i) / N`.
pub fn tv_mc_vs_exact(counts: &[u64], reference: &DistributionTable) -> Result<McTv, Error> {
    if counts.len() != reference.len() {
        return Err(Error::LengthMismatch {
            expected: reference.len(),
            got: counts.len(),
        });
    }
    let n: u64 = counts.iter().sum();
    if n == 0 {
        return Err(Error::InvalidParameter("no trials".into()));
    }
    let nf = n as f64;
    let mut terms = Vec::with_capacity(counts.len());
    let mut vars = Vec::with_capacity(counts.len());
    for (&c, &q) in counts.iter().zip(reference.pmf()) {
        let p_hat = c as f64 / nf;
        let s2 = q * (1.0 - q) / nf;
        let d = (p_hat - q).abs();
        terms.push(d - abs_bias(d, s2.sqrt()));
        vars.push(s2);
    }
    let estimate = (kahan_sum(terms) / 2.0).max(0.0);
    let std_error = kahan_sum(vars).sqrt() / 2.0;
    Ok(McTv {
        estimate,
        std_error,
    })
}

/// Bias-corrected TV estimate between two empirical distributions with `N1`
/// and `N2` trials; the per-cell null scale pools both variances.
pub fn tv_mc_pair(counts_p: &[u64], counts_q: &[u64]) -> Result<McTv, Error> {
    if counts_p.len() != counts_q.len() {
        return Err(Error::LengthMismatch {
            expected: counts_p.len(),
            got: counts_q.len(),
        });
    }
    let n1: u64 = counts_p.iter().sum();
    let n2: u64 = counts_q.iter().sum();
    if n1 == 0 || n2 == 0 {
        return Err(Error::InvalidParameter("no trials".into()));
    }
    let (n1f, n2f) = (n1 as f64, n2 as f64);
    let mut terms = Vec::with_capacity(counts_p.len());
    let mut vars = Vec::with_capacity(counts_p.len());
    for (&a, &b) in counts_p.iter().zip(counts_q) {
        let p = a as f64 / n1f;
        let q = b as f64 / n2f;
        // Pooled estimate of the common probability under the null.
        let m = (a + b) as f64 / (n1f + n2f);
        let s2 = m * (1.0 - m) * (1.0 / n1f + 1.0 / n2f);
        let d = (p - q).abs();
        terms.push(d - abs_bias(d, s2.sqrt()));
        vars.push(s2);
    }
    let estimate = (kahan_sum(terms) / 2.0).max(0.0);
    let std_error = kahan_sum(vars).sqrt() / 2.0;
    Ok(McTv {
        estimate,
        std_error,
    })
}

// ---------------------------------------------------------------------------
// Canonical simulator and the non-malleability experiment.

/// Measurement mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Exact,
    MonteCarlo,
}

/// The simulator's distribution over messages plus the same-star mass.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SimulatorEstimate {
    /// pmf over the `2^k` messages (excluding the same-star outcome).
    pub message_pmf: Vec<f64>,
    /// Mass on the distinguished same-star outcome.
    pub same_star_mass: f64,
}

/// Machine-readable outcome of a non-malleability experiment.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub profile: String,
    pub adversary: String,
    pub mode: Mode,
    pub trials: u64,
    pub estimated_error: f64,
    /// Standard error of the estimate in Monte Carlo mode.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error_std: Option<f64>,
    /// Per-message TV distances, message index order.
    pub per_message_error: Vec<f64>,
    pub simulator: SimulatorEstimate,
    pub seed: u64,
    pub wall_time_ms: u64,
}

/// The canonical simulator table over `messages + same-star` (same-star is
/// the last index): draw a uniform codeword `c`, tamper to `c'`; emit
/// same-star iff `c' = c`, else `decode(c')`.
pub fn canonical_simulator<R: RngCore>(
    scheme: &CodewordScheme,
    spec: &TamperSpec,
    mode: Mode,
    trials: u64,
    cap_bits: usize,
    rng: &mut R,
) -> Result<DistributionTable, Error> {
    let counts = simulator_counts(scheme, spec, mode, trials, cap_bits, rng)?;
    DistributionTable::from_counts(&counts)
}

fn simulator_counts<R: RngCore>(
    scheme: &CodewordScheme,
    spec: &TamperSpec,
    mode: Mode,
    trials: u64,
    cap_bits: usize,
    rng: &mut R,
) -> Result<Vec<u64>, Error> {
    spec.validate(scheme.block())?;
    let k = scheme.k();
    let block = scheme.block();
    let same_star = 1usize << k;
    let mut counts = vec![0u64; same_star + 1];
    let mut tally = |c: &BitVector| -> Result<(), Error> {
        let c2 = spec.apply(c)?;
        if &c2 == c {
            counts[same_star] += 1;
        } else {
            counts[scheme.decode(&c2)?.message.to_u64() as usize] += 1;
        }
        Ok(())
    };
    match mode {
        Mode::Exact => {
            if block > cap_bits {
                return Err(Error::EnumerationCap {
                    domain_bits: block,
                    cap_bits,
                });
            }
            for cv in 0u64..1 << block {
                tally(&BitVector::from_u64(cv, block))?;
            }
        }
        Mode::MonteCarlo => {
            for _ in 0..trials {
                tally(&BitVector::random(block, rng))?;
            }
        }
    }
    Ok(counts)
}

/// `copy(D, s)`: the simulator table with the same-star mass moved onto the
/// message `s`, as counts over the `2^k` messages.
fn copy_counts(sim_counts: &[u64], s: usize) -> Vec<u64> {
    let k_size = sim_counts.len() - 1;
    let mut out = sim_counts[..k_size].to_vec();
    out[s] += sim_counts[k_size];
    out
}

/// Runs the non-malleability experiment: for each message `s`, the TV
/// distance between `decode(tamper(encode(s)))` and the canonical simulator
/// with same-star replaced by `s`; reports the maximum over messages.
///
/// Exact mode enumerates every codeword once, bucketing real outcomes by the
/// decoded fiber; Monte Carlo mode uses `trials` tampered encodes per
/// message against a `trials`-sample simulator estimate, with bias-corrected
/// TV estimates and analytic standard errors.
pub fn nm_experiment<R: RngCore>(
    scheme: &CodewordScheme,
    spec: &TamperSpec,
    adversary_id: &str,
    mode: Mode,
    trials: u64,
    cap_bits: usize,
    seed: u64,
    rng: &mut R,
) -> Result<ExperimentReport, Error> {
    let start = std::time::Instant::now();
    spec.validate(scheme.block())?;
    let k = scheme.k();
    let block = scheme.block();
    let k_size = 1usize << k;

    let (per_message_error, error_std, sim_counts, trials_used) = match mode {
        Mode::Exact => {
            if block > cap_bits {
                return Err(Error::EnumerationCap {
                    domain_bits: block,
                    cap_bits,
                });
            }
            // One pass: bucket (decode(c), decode(tamper(c))) and the
            // simulator outcomes simultaneously.
            let mut real = vec![vec![0u64; k_size]; k_size];
            let mut sim = vec![0u64; k_size + 1];
            for cv in 0u64..1 << block {
                let c = BitVector::from_u64(cv, block);
                let s = scheme.decode(&c)?.message.to_u64() as usize;
                let c2 = spec.apply(&c)?;
                let m2 = scheme.decode(&c2)?.message.to_u64() as usize;
                real[s][m2] += 1;
                if c2 == c {
                    sim[k_size] += 1;
                } else {
                    sim[m2] += 1;
                }
            }
            let mut errs = Vec::with_capacity(k_size);
            for (s, row) in real.iter().enumerate() {
                let real_s = DistributionTable::from_counts(row)?;
                let copy_s = DistributionTable::from_counts(&copy_counts(&sim, s))?;
                errs.push(tv_distance(&real_s, &copy_s)?);
            }
            (errs, None, sim, 1u64 << block)
        }
        Mode::MonteCarlo => {
            let sim = simulator_counts(scheme, spec, Mode::MonteCarlo, trials, cap_bits, rng)?;
            let mut errs = Vec::with_capacity(k_size);
            let mut worst_se = 0.0f64;
            let mut worst = 0.0f64;
            for s in 0..k_size {
                let msg = BitVector::from_u64(s as u64, k);
                let mut real = vec![0u64; k_size];
                for _ in 0..trials {
                    let c = scheme.encode(&msg, rng)?;
                    let c2 = spec.apply(&c)?;
                    real[scheme.decode(&c2)?.message.to_u64() as usize] += 1;
                }
                let est = tv_mc_pair(&real, &copy_counts(&sim, s))?;
                if est.estimate >= worst {
                    worst = est.estimate;
                    worst_se = est.std_error;
                }
                errs.push(est.estimate);
            }
            (errs, Some(worst_se), sim, trials)
        }
    };

    let sim_total: u64 = sim_counts.iter().sum();
    let estimated_error = per_message_error.iter().copied().fold(0.0, f64::max);
    Ok(ExperimentReport {
        profile: scheme.profile().profile.name.clone(),
        adversary: adversary_id.to_string(),
        mode,
        trials: trials_used,
        estimated_error,
        error_std,
        per_message_error,
        simulator: SimulatorEstimate {
            message_pmf: sim_counts[..k_size]
                .iter()
                .map(|&c| c as f64 / sim_total as f64)
                .collect(),
            same_star_mass: sim_counts[k_size] as f64 / sim_total as f64,
        },
        seed,
        wall_time_ms: start.elapsed().as_millis() as u64,
    })
}
