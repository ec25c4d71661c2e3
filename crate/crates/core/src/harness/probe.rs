//! Impersonation probes: forgery attempts by an adversary who holds the
//! public parameters, every announced public key, and a log of observed
//! honest traffic — but no secret material.
//!
//! Each probe builds `attempts` forged messages under one strategy and
//! returns how many pass verification. Forgeries are generated
//! sequentially from the caller's RNG (reproducible), then verified in
//! parallel when the `parallel` feature is on.

use rand::{Rng, RngCore};
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::protocol::SystemParams;
use crate::signing::{verify, PublicKeyDirectory, SignedMessage};
use crate::zq::ZqVec;

/// How the adversary fabricates each attempt.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ForgeryStrategy {
    /// Keep an observed message but replace σ with a uniform vector.
    RandomSigma,
    /// Keep an observed (σ, R) but swap in a fresh payload.
    ReplayedSigma,
    /// Mix two observed messages: σ' = σ_i + c·σ_j, R' = R_i + c·R_j,
    /// leaving the hashes computed over unmixed fields.
    LinearCombination,
}

/// Runs `attempts` forgeries and counts how many verify.
///
/// `observed` must be non-empty honest traffic; the pseudonyms involved
/// must be announced in `directory`.
pub fn impersonation_probe(
    params: &SystemParams,
    directory: &PublicKeyDirectory,
    observed: &[SignedMessage],
    strategy: ForgeryStrategy,
    attempts: usize,
    rng: &mut dyn RngCore,
) -> usize {
    if attempts == 0 || observed.is_empty() {
        return 0;
    }
    let forgeries: Vec<SignedMessage> = (0..attempts)
        .map(|i| forge(params, observed, strategy, i, rng))
        .collect();

    let accepted = |msg: &SignedMessage| -> bool {
        directory
            .lookup(&msg.pid)
            .map(|pk| verify(msg, pk, params).unwrap_or(false))
            .unwrap_or(false)
    };

    #[cfg(feature = "parallel")]
    {
        forgeries.par_iter().filter(|m| accepted(m)).count()
    }
    #[cfg(not(feature = "parallel"))]
    {
        forgeries.iter().filter(|m| accepted(m)).count()
    }
}

fn forge(
    params: &SystemParams,
    observed: &[SignedMessage],
    strategy: ForgeryStrategy,
    seq: usize,
    rng: &mut dyn RngCore,
) -> SignedMessage {
    let base = &observed[rng.gen_range(0..observed.len())];
    match strategy {
        ForgeryStrategy::RandomSigma => SignedMessage {
            sigma: ZqVec::sample_uniform(params.q(), params.m(), rng),
            ..base.clone()
        },
        ForgeryStrategy::ReplayedSigma => {
            let mut payload = base.payload.clone();
            payload.extend_from_slice(format!(" forged {seq}").as_bytes());
            SignedMessage {
                payload,
                ..base.clone()
            }
        }
        ForgeryStrategy::LinearCombination => {
            let other = &observed[rng.gen_range(0..observed.len())];
            let c = params.q().sample_nonzero(rng);
            let sigma = base
                .sigma
                .add(&other.sigma.scale(c))
                .expect("observed messages share dimensions");
            let r_pub = base
                .r_pub
                .add(&other.r_pub.scale(c))
                .expect("observed messages share dimensions");
            SignedMessage {
                sigma,
                r_pub,
                ..base.clone()
            }
        }
    }
}
