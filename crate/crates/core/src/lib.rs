//! Certificateless conditional privacy-preserving authentication for
//! VANET beacons over Z_q lattice arithmetic.
//!
//! The crate implements the full QS-CL-CPPA protocol:
//!
//! * [`zq`] — exact modular vector/matrix arithmetic, the substrate for
//!   every phase;
//! * [`hashing`] — the three domain-separated hash oracles with a
//!   canonical, cross-implementation input encoding;
//! * [`protocol`] — the key lifecycle: system setup, pseudo-identity
//!   issuance, partial-key issuance, full-key derivation, and conditional
//!   tracing by the trusted authority;
//! * [`signing`] — signature generation, single verification, and
//!   coefficient-randomized batch verification;
//! * [`codec`] — the bit-exact broadcast wire format (762-byte fixed
//!   portion at the 123-bit parameter set);
//! * [`store`] — binary key-store containers used by the CLI;
//! * [`harness`] — a deterministic in-memory simulation of TA, RSU, and
//!   vehicle actors with scripted attack scenarios and a timing bench.
//!
//! With the default `parallel` feature, batch aggregation and
//! multi-message verification fan out over a rayon pool; disabling the
//! feature falls back to equivalent sequential code paths. Results are
//! identical either way because every reduction is exact mod-q
//! arithmetic.
//!
//! # Example
//!
//! ```
//! use rand::SeedableRng;
//! use rand_chacha::ChaCha20Rng;
//! use qs_cl_cppa::{
//!     batch_verify, derive_keys, pid_request, setup, sign, verify, BitString,
//!     Profile, PublicKeyDirectory, SignedMessage, Timestamp, TrustedAuthority,
//! };
//!
//! let mut rng = ChaCha20Rng::seed_from_u64(7);
//! let (params, master) = setup(Profile::Toy, &mut rng);
//! let mut ta = TrustedAuthority::new(params.clone(), master);
//!
//! // registration over the secure channel
//! let (a, pk1) = pid_request(&params, &mut rng);
//! let rid = BitString::random(params.l(), &mut rng);
//! let pid = ta.pid_issue(&pk1, &rid, Timestamp(1000))?;
//! let partial = ta.psk_issue(&pk1, &pid, &mut rng)?;
//! let cred = derive_keys(&params, pid, a, pk1, partial)?;
//!
//! // broadcast and verify
//! let mut directory = PublicKeyDirectory::new();
//! directory.announce(cred.pid.clone(), cred.pk.clone());
//! let sig = sign(&cred, b"road hazard ahead", &params, &mut rng);
//! let msg = SignedMessage {
//!     pid: cred.pid.clone(),
//!     r_pub: sig.r_pub,
//!     sigma: sig.sigma,
//!     payload: b"road hazard ahead".to_vec(),
//! };
//! assert!(verify(&msg, &cred.pk, &params)?);
//! assert!(batch_verify(&[msg], &directory, &params, &mut rng)?);
//!
//! // only the authority can recover the real identity
//! assert_eq!(ta.trace(&cred.pid)?, rid);
//! # Ok::<(), Box<dyn std::error::Error>>(())
//! ```

#![forbid(unsafe_code)]

pub mod bits;
pub mod codec;
pub mod error;
pub mod harness;
pub mod hashing;
pub mod protocol;
pub mod signing;
pub mod store;
pub mod zq;

/// Seconds since the epoch as an unsigned 32-bit value.
///
/// This is the protocol's only notion of time: pseudonyms carry the epoch
/// timestamp they were issued at, and it is hashed into both challenges.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Timestamp(pub u32);

pub use bits::BitString;
pub use error::{CodecError, ProtocolError, ScenarioError, SigningError, ZqError};
pub use hashing::{HashConfig, XofAlgorithm};
pub use protocol::{
    derive_keys, pid_request, setup, validate_psk, MasterSecret, PartialSecretKey, Profile,
    PseudoId, RegistrationRecord, SystemParams, TrustedAuthority, VehicleCredential,
};
pub use signing::{
    batch_verify, sign, verify, BatchJob, PublicKeyDirectory, Signature, SignedMessage,
};
pub use zq::{Modulus, ZqMatrix, ZqRowVec, ZqVec};
