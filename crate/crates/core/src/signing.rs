//! Signature generation, single verification, and batch verification.
//!
//! A signature is `(σ, R)` with `R = r^T A` for a fresh nonce `r` and
//! `σ = sk + δ·r`, where `δ` is the per-message challenge. Verification
//! checks the single identity
//!
//! ```text
//! σ^T A == pk + γ·master_pub + δ·R
//! ```
//!
//! Batch verification draws fresh nonzero coefficients `b_i` and checks
//! one aggregated identity, so `N` messages cost one row-vector/matrix
//! product instead of `N`. A zero coefficient would silently drop an
//! item's contribution, so coefficients are sampled from `[1, q)`; a
//! single invalid item then survives with probability at most `1/(q-1)`.
//!
//! Verification is pure. With the `parallel` feature (default), the
//! per-item work of batch aggregation and multi-message verification runs
//! on a rayon pool; the `*_seq` variants are the sequential fallback and
//! always produce identical results, since every reduction is exact
//! mod-q arithmetic.

use std::collections::HashMap;

use rand::RngCore;
#[cfg(feature = "parallel")]
use rayon::prelude::*;

use crate::error::{SigningError, ZqError};
use crate::hashing::{h2, h3};
use crate::protocol::{PseudoId, SystemParams, VehicleCredential};
use crate::zq::{ZqRowVec, ZqVec};

/// A broadcast signature: the response vector and the nonce commitment.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Signature {
    pub sigma: ZqVec,
    pub r_pub: ZqRowVec,
}

/// The full broadcast tuple `(P_ID, T, R, σ, payload)`.
///
/// The signer's public key is not part of the tuple; verifiers resolve it
/// from a [`PublicKeyDirectory`] populated by announcements. That keeps
/// the wire fixed portion at its minimum size.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SignedMessage {
    pub pid: PseudoId,
    pub r_pub: ZqRowVec,
    pub sigma: ZqVec,
    pub payload: Vec<u8>,
}

/// Verifier-side map from announced pseudonyms to public keys.
#[derive(Debug, Clone, Default)]
pub struct PublicKeyDirectory {
    map: HashMap<PseudoId, ZqRowVec>,
}

impl PublicKeyDirectory {
    pub fn new() -> Self {
        Self::default()
    }

    /// Records a broadcast announcement `pid -> pk`.
    pub fn announce(&mut self, pid: PseudoId, pk: ZqRowVec) {
        self.map.insert(pid, pk);
    }

    pub fn lookup(&self, pid: &PseudoId) -> Option<&ZqRowVec> {
        self.map.get(pid)
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PseudoId, &ZqRowVec)> {
        self.map.iter()
    }
}

/// Signs a payload with a fresh nonce.
///
/// Panics if the credential does not match the parameters; credentials
/// produced by the key lifecycle against the same parameters always do.
pub fn sign(
    cred: &VehicleCredential,
    payload: &[u8],
    params: &SystemParams,
    rng: &mut dyn RngCore,
) -> Signature {
    let r = ZqVec::sample_uniform(params.q(), params.m(), rng);
    sign_with_nonce(cred, payload, params, r)
}

/// Deterministic-nonce core of [`sign`]; crate-visible so tests can force
/// degenerate nonces.
pub(crate) fn sign_with_nonce(
    cred: &VehicleCredential,
    payload: &[u8],
    params: &SystemParams,
    r: ZqVec,
) -> Signature {
    let r_pub = r
        .row_mul(params.matrix())
        .expect("credential matches params");
    let delta = h3(&r_pub, &cred.pid.pid, payload, cred.pid.t, params.hash())
        .expect("credential matches params");
    let sigma = cred
        .sk
        .add(&r.scale(delta))
        .expect("credential matches params");
    Signature { sigma, r_pub }
}

/// Signs and assembles the broadcast tuple in one step.
pub fn sign_message(
    cred: &VehicleCredential,
    payload: &[u8],
    params: &SystemParams,
    rng: &mut dyn RngCore,
) -> SignedMessage {
    let sig = sign(cred, payload, params, rng);
    SignedMessage {
        pid: cred.pid.clone(),
        r_pub: sig.r_pub,
        sigma: sig.sigma,
        payload: payload.to_vec(),
    }
}

fn dim_err(expected: usize, got: usize) -> SigningError {
    SigningError::Dimension(ZqError::Dimension { expected, got })
}

/// Shape/modulus validation shared by every verification path.
fn check_shape(
    msg: &SignedMessage,
    pk: &ZqRowVec,
    params: &SystemParams,
) -> Result<(), SigningError> {
    if msg.pid.pid.len() != params.l() {
        return Err(dim_err(params.l(), msg.pid.pid.len()));
    }
    if msg.sigma.len() != params.m() {
        return Err(dim_err(params.m(), msg.sigma.len()));
    }
    if msg.r_pub.len() != params.n() {
        return Err(dim_err(params.n(), msg.r_pub.len()));
    }
    if pk.len() != params.n() {
        return Err(dim_err(params.n(), pk.len()));
    }
    for modulus in [msg.sigma.modulus(), msg.r_pub.modulus(), pk.modulus()] {
        if modulus != params.q() {
            return Err(SigningError::Dimension(ZqError::Modulus {
                left: modulus.get(),
                right: params.q().get(),
            }));
        }
    }
    Ok(())
}

/// Evaluates the verification identity on a shape-checked message.
fn holds(msg: &SignedMessage, pk: &ZqRowVec, params: &SystemParams) -> bool {
    let gamma = h2(pk, msg.pid.t, params.hash()).expect("shape checked");
    let delta = h3(
        &msg.r_pub,
        &msg.pid.pid,
        &msg.payload,
        msg.pid.t,
        params.hash(),
    )
    .expect("shape checked");
    let lhs = msg.sigma.row_mul(params.matrix()).expect("shape checked");
    let rhs = pk
        .add(&params.master_pub().scale(gamma))
        .and_then(|v| v.add(&msg.r_pub.scale(delta)))
        .expect("shape checked");
    lhs == rhs
}

/// Single verification: true iff `σ^T A == pk + γ·master_pub + δ·R`.
pub fn verify(
    msg: &SignedMessage,
    pk: &ZqRowVec,
    params: &SystemParams,
) -> Result<bool, SigningError> {
    check_shape(msg, pk, params)?;
    Ok(holds(msg, pk, params))
}

fn resolve<'a>(
    items: &'a [SignedMessage],
    directory: &'a PublicKeyDirectory,
    params: &SystemParams,
) -> Result<Vec<(&'a SignedMessage, &'a ZqRowVec)>, SigningError> {
    items
        .iter()
        .map(|msg| {
            let pk = directory
                .lookup(&msg.pid)
                .ok_or(SigningError::UnknownPseudonym)?;
            check_shape(msg, pk, params)?;
            Ok((msg, pk))
        })
        .collect()
}

/// Verifies every message individually, sequentially.
pub fn verify_all_seq(
    items: &[SignedMessage],
    directory: &PublicKeyDirectory,
    params: &SystemParams,
) -> Result<bool, SigningError> {
    let resolved = resolve(items, directory, params)?;
    Ok(resolved.iter().all(|(msg, pk)| holds(msg, pk, params)))
}

/// Verifies every message individually, fanning out across the rayon
/// pool.
#[cfg(feature = "parallel")]
pub fn verify_all_par(
    items: &[SignedMessage],
    directory: &PublicKeyDirectory,
    params: &SystemParams,
) -> Result<bool, SigningError> {
    let resolved = resolve(items, directory, params)?;
    Ok(resolved.par_iter().all(|(msg, pk)| holds(msg, pk, params)))
}

/// Below this many items, pool dispatch costs more than it saves.
#[cfg(feature = "parallel")]
const PARALLEL_BATCH_THRESHOLD: usize = 32;
#[cfg(feature = "parallel")]
const PARALLEL_VERIFY_THRESHOLD: usize = 4;

/// Verifies every message individually; parallel when the feature is on
/// and the set is large enough that pool dispatch pays for itself.
pub fn verify_all(
    items: &[SignedMessage],
    directory: &PublicKeyDirectory,
    params: &SystemParams,
) -> Result<bool, SigningError> {
    #[cfg(feature = "parallel")]
    {
        if items.len() >= PARALLEL_VERIFY_THRESHOLD {
            return verify_all_par(items, directory, params);
        }
    }
    verify_all_seq(items, directory, params)
}

/// A batch of messages with their fresh verification coefficients.
///
/// Coefficients are drawn per call and stay private to the job; reusing
/// or revealing them would void the random-coefficient argument.
#[derive(Debug)]
pub struct BatchJob<'a> {
    items: &'a [SignedMessage],
    coeffs: Vec<u32>,
}

/// Running aggregate of the four batch terms. Mod-q addition is exact,
/// associative, and commutative, so partial aggregates may be built and
/// merged in any order (or across threads) with identical results.
struct Aggregate {
    sigma: ZqVec,
    pk: ZqRowVec,
    gamma: u32,
    challenge_r: ZqRowVec,
}

impl Aggregate {
    fn zero(params: &SystemParams) -> Self {
        Self {
            sigma: ZqVec::zero(params.q(), params.m()),
            pk: ZqRowVec::zero(params.q(), params.n()),
            gamma: 0,
            challenge_r: ZqRowVec::zero(params.q(), params.n()),
        }
    }

    /// Folds one item's terms into the running sums in place.
    fn absorb(mut self, msg: &SignedMessage, pk: &ZqRowVec, b: u32, params: &SystemParams) -> Self {
        let q = params.q();
        let gamma = h2(pk, msg.pid.t, params.hash()).expect("shape checked");
        let delta = h3(
            &msg.r_pub,
            &msg.pid.pid,
            &msg.payload,
            msg.pid.t,
            params.hash(),
        )
        .expect("shape checked");
        self.sigma
            .add_scaled_assign(b, &msg.sigma)
            .expect("shape checked");
        self.pk.add_scaled_assign(b, pk).expect("shape checked");
        self.gamma = q.reduce_u64(u64::from(self.gamma) + u64::from(gamma) * u64::from(b));
        self.challenge_r
            .add_scaled_assign(q.reduce_u64(u64::from(delta) * u64::from(b)), &msg.r_pub)
            .expect("shape checked");
        self
    }

    fn merge(mut self, other: Self, params: &SystemParams) -> Self {
        self.sigma.add_assign(&other.sigma).expect("same dims");
        self.pk.add_assign(&other.pk).expect("same dims");
        self.gamma = params
            .q()
            .reduce_u64(u64::from(self.gamma) + u64::from(other.gamma));
        self.challenge_r
            .add_assign(&other.challenge_r)
            .expect("same dims");
        self
    }
}

impl<'a> BatchJob<'a> {
    /// Draws one fresh coefficient in `[1, q)` per item.
    ///
    /// Sampling happens sequentially from the caller's RNG before any
    /// parallel work, so a seeded run is reproducible regardless of
    /// thread schedule.
    pub fn assemble(
        items: &'a [SignedMessage],
        params: &SystemParams,
        rng: &mut dyn RngCore,
    ) -> Result<Self, SigningError> {
        if items.is_empty() {
            return Err(SigningError::EmptyBatch);
        }
        let coeffs = items
            .iter()
            .map(|_| params.q().sample_nonzero(rng))
            .collect();
        Ok(Self { items, coeffs })
    }

    /// Test hook: a job with caller-chosen coefficients.
    #[cfg(test)]
    pub(crate) fn with_coeffs(items: &'a [SignedMessage], coeffs: Vec<u32>) -> Self {
        assert_eq!(items.len(), coeffs.len());
        Self { items, coeffs }
    }

    pub fn len(&self) -> usize {
        self.items.len()
    }

    pub fn is_empty(&self) -> bool {
        self.items.is_empty()
    }

    fn finish(&self, agg: Aggregate, params: &SystemParams) -> bool {
        let lhs = agg.sigma.row_mul(params.matrix()).expect("shape checked");
        let rhs = agg
            .pk
            .add(&params.master_pub().scale(agg.gamma))
            .and_then(|v| v.add(&agg.challenge_r))
            .expect("shape checked");
        lhs == rhs
    }

    /// Sequential aggregated check.
    pub fn check_seq(
        &self,
        directory: &PublicKeyDirectory,
        params: &SystemParams,
    ) -> Result<bool, SigningError> {
        let resolved = resolve(self.items, directory, params)?;
        let agg = resolved
            .iter()
            .zip(&self.coeffs)
            .fold(Aggregate::zero(params), |acc, ((msg, pk), &b)| {
                acc.absorb(msg, pk, b, params)
            });
        Ok(self.finish(agg, params))
    }

    /// Parallel aggregated check: each worker folds its span of items
    /// into a private aggregate, and the few per-thread aggregates are
    /// merged by exact mod-q addition. Spans are kept coarse — per-item
    /// work is a few microseconds, so fine splitting would cost more in
    /// stealing and merging than it buys.
    #[cfg(feature = "parallel")]
    pub fn check_par(
        &self,
        directory: &PublicKeyDirectory,
        params: &SystemParams,
    ) -> Result<bool, SigningError> {
        let resolved = resolve(self.items, directory, params)?;
        let agg = resolved
            .par_iter()
            .zip(self.coeffs.par_iter())
            .with_min_len(16)
            .fold(
                || Aggregate::zero(params),
                |acc, ((msg, pk), &b)| acc.absorb(msg, pk, b, params),
            )
            .reduce(
                || Aggregate::zero(params),
                |acc, part| acc.merge(part, params),
            );
        Ok(self.finish(agg, params))
    }

    /// Aggregated check; parallel when the feature is on and the batch
    /// is large enough that pool dispatch pays for itself.
    pub fn check(
        &self,
        directory: &PublicKeyDirectory,
        params: &SystemParams,
    ) -> Result<bool, SigningError> {
        #[cfg(feature = "parallel")]
        {
            if self.items.len() >= PARALLEL_BATCH_THRESHOLD {
                return self.check_par(directory, params);
            }
        }
        self.check_seq(directory, params)
    }
}

/// Batch verification with fresh coefficients; parallel when the feature
/// is on.
pub fn batch_verify(
    items: &[SignedMessage],
    directory: &PublicKeyDirectory,
    params: &SystemParams,
    rng: &mut dyn RngCore,
) -> Result<bool, SigningError> {
    BatchJob::assemble(items, params, rng)?.check(directory, params)
}

/// Sequential batch verification with fresh coefficients.
pub fn batch_verify_seq(
    items: &[SignedMessage],
    directory: &PublicKeyDirectory,
    params: &SystemParams,
    rng: &mut dyn RngCore,
) -> Result<bool, SigningError> {
    BatchJob::assemble(items, params, rng)?.check_seq(directory, params)
}
