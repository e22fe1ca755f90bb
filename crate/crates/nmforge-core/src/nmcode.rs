//! The non-malleable code induced by the invertible extractor.
//!
//! The scheme is the standard extractor-to-code construction: the decoder is
//! the extractor itself, and the encoder samples a uniform pre-image of the
//! message from the extractor's fiber. Perfect correctness is by
//! construction (every returned codeword is round-trip verified), and the
//! non-malleability of the code is inherited from the extractor and measured
//! by the harness in [`crate::tamperlab`].
//!
//! The decoder is total: every `2n`-bit string decodes to some `k`-bit
//! message (fallback-regime inputs decode to the all-zero message in-band).
//! The distinguished same-star symbol never appears here; it belongs to the
//! simulator semantics in [`crate::tamperlab`].

use rand::RngCore;

use crate::bitlin::BitVector;
use crate::nmx::{ilnm_inv, ilnm_sample_preimage, CompiledProfile};
use crate::Error;

/// A coding scheme tied to one compiled parameter profile: `k`-bit messages,
/// `2n`-bit codewords.
pub struct CodewordScheme {
    comp: CompiledProfile,
}

/// A decoded payload: always a full `k`-bit message (the decoder is total).
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct DecodedMessage {
    /// The `k`-bit message.
    pub message: BitVector,
}

impl CodewordScheme {
    /// Builds the scheme over a compiled profile.
    #[must_use]
    pub fn new(comp: CompiledProfile) -> Self {
        CodewordScheme { comp }
    }

    /// Builds the scheme from a builtin profile name.
    pub fn builtin(name: &str) -> Result<Self, Error> {
        Ok(CodewordScheme::new(CompiledProfile::builtin(name)?))
    }

    /// The compiled profile backing the scheme.
    #[must_use]
    pub fn profile(&self) -> &CompiledProfile {
        &self.comp
    }

    /// Message length in bits.
    #[must_use]
    pub fn k(&self) -> usize {
        self.comp.profile.m
    }

    /// Codeword (block) length in bits.
    #[must_use]
    pub fn block(&self) -> usize {
        self.comp.block_len()
    }

    /// The exact rate `k / block`.
    #[must_use]
    pub fn rate(&self) -> f64 {
        self.k() as f64 / self.block() as f64
    }

    /// Encodes `s` by sampling a uniform pre-image of it under the decoder.
    /// Deterministic given the randomness stream. Fails explicitly when the
    /// pre-image sampler exhausts its retries (a misconfigured profile).
    pub fn encode<R: RngCore>(&self, s: &BitVector, rng: &mut R) -> Result<BitVector, Error> {
        ilnm_sample_preimage(&self.comp, s, rng)
    }

    /// Decodes a codeword by evaluating the extractor. Total: never fails on
    /// a correctly sized input.
    pub fn decode(&self, c: &BitVector) -> Result<DecodedMessage, Error> {
        Ok(DecodedMessage {
            message: ilnm_inv(&self.comp, c)?,
        })
    }
}
