//! Key lifecycle: system setup, pseudo-identity issuance, partial-key
//! issuance, full-key derivation, and conditional tracing.
//!
//! The trusted authority owns the master secret `d` and a registration
//! table; vehicles hold a self-chosen secret and the TA-issued partial
//! key. The certificateless split means neither side alone knows the full
//! signing key: `sk = psk + a` combines the TA's contribution with the
//! vehicle's own, so there is no key escrow, and `d` itself never leaves
//! the authority.
//!
//! Registration is linearizable: all mutating operations take `&mut self`
//! on [`TrustedAuthority`], so concurrent issuance must be serialized by
//! the caller. Everything issued is immutable afterwards.

use std::collections::{HashMap, HashSet};

use rand::RngCore;

use crate::bits::BitString;
use crate::error::{CodecError, ProtocolError};
use crate::hashing::{h1, h2, HashConfig, XofAlgorithm};
use crate::zq::{Modulus, ZqMatrix, ZqRowVec, ZqVec};
use crate::Timestamp;

/// Named parameter sets.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    /// 123-bit security level: q=101, n=100, m=666, l=700.
    Paper123,
    /// Tiny profile for tests and golden files: q=7, n=3, m=5, l=9.
    Toy,
}

impl Profile {
    pub fn dims(self) -> (u32, usize, usize, usize) {
        match self {
            // (q, m, n, l)
            Profile::Paper123 => (101, 666, 100, 700),
            Profile::Toy => (7, 5, 3, 9),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Profile::Paper123 => "paper123",
            Profile::Toy => "toy",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s.to_ascii_lowercase().as_str() {
            "paper123" => Some(Profile::Paper123),
            "toy" => Some(Profile::Toy),
            _ => None,
        }
    }
}

/// Public parameters distributed to every actor:
/// `{q, m, n, A, master_pub, hash config}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SystemParams {
    q: Modulus,
    matrix: ZqMatrix,
    master_pub: ZqRowVec,
    hash: HashConfig,
}

impl SystemParams {
    pub fn new(matrix: ZqMatrix, master_pub: ZqRowVec, hash: HashConfig) -> Self {
        assert_eq!(matrix.modulus(), hash.q, "modulus mismatch in params");
        assert_eq!(master_pub.modulus(), hash.q);
        assert_eq!(master_pub.len(), matrix.cols());
        Self {
            q: hash.q,
            matrix,
            master_pub,
            hash,
        }
    }

    pub fn q(&self) -> Modulus {
        self.q
    }

    /// Key-vector dimension `m` (rows of the public matrix).
    pub fn m(&self) -> usize {
        self.matrix.rows()
    }

    /// Public-row dimension `n` (columns of the public matrix).
    pub fn n(&self) -> usize {
        self.matrix.cols()
    }

    /// Pseudonym/identity bit length `l`.
    pub fn l(&self) -> usize {
        self.hash.l
    }

    pub fn matrix(&self) -> &ZqMatrix {
        &self.matrix
    }

    pub fn master_pub(&self) -> &ZqRowVec {
        &self.master_pub
    }

    pub fn hash(&self) -> &HashConfig {
        &self.hash
    }

    /// Binary form: version, q, m, n, hash id, l, then the matrix
    /// row-major and the master public row, one `elem_bytes(q)` chunk per
    /// element. This is the cross-implementation parameter exchange
    /// format.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::new();
        out.push(PARAMS_VERSION);
        out.extend_from_slice(&(self.q.get() as u16).to_be_bytes());
        out.extend_from_slice(&(self.m() as u32).to_be_bytes());
        out.extend_from_slice(&(self.n() as u32).to_be_bytes());
        let id = self.hash.xof.id().as_bytes();
        out.push(id.len() as u8);
        out.extend_from_slice(id);
        out.extend_from_slice(&(self.hash.l as u32).to_be_bytes());
        let w = self.q.elem_bytes();
        for &e in self.matrix.elems() {
            out.extend_from_slice(&e.to_be_bytes()[4 - w..]);
        }
        out.extend_from_slice(&self.master_pub.to_bytes());
        out
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self, CodecError> {
        let mut cur = Cursor::new(bytes);
        if cur.u8()? != PARAMS_VERSION {
            return Err(CodecError::BadHeader);
        }
        let q = Modulus::new(u32::from(cur.u16()?))?;
        let m = cur.u32()? as usize;
        let n = cur.u32()? as usize;
        let id_len = cur.u8()? as usize;
        let id =
            String::from_utf8(cur.take(id_len)?.to_vec()).map_err(|_| CodecError::BadHeader)?;
        let xof = XofAlgorithm::from_id(&id)?;
        let l = cur.u32()? as usize;
        if m == 0 || n == 0 || l == 0 {
            return Err(CodecError::BadHeader);
        }
        let matrix = cur.matrix(q, m, n)?;
        let master_pub = cur.row(q, n)?;
        cur.finish()?;
        Ok(Self::new(matrix, master_pub, HashConfig::new(xof, l, q)))
    }
}

const PARAMS_VERSION: u8 = 1;

/// Byte cursor shared by the binary parameter and store formats.
pub(crate) struct Cursor<'a> {
    bytes: &'a [u8],
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(bytes: &'a [u8]) -> Self {
        Self { bytes }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8], CodecError> {
        if self.bytes.len() < n {
            return Err(CodecError::Truncated);
        }
        let (head, rest) = self.bytes.split_at(n);
        self.bytes = rest;
        Ok(head)
    }

    pub(crate) fn u8(&mut self) -> Result<u8, CodecError> {
        Ok(self.take(1)?[0])
    }

    pub(crate) fn u16(&mut self) -> Result<u16, CodecError> {
        Ok(u16::from_be_bytes(self.take(2)?.try_into().unwrap()))
    }

    pub(crate) fn u32(&mut self) -> Result<u32, CodecError> {
        Ok(u32::from_be_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn elems(&mut self, q: Modulus, count: usize) -> Result<Vec<u32>, CodecError> {
        let w = q.elem_bytes();
        let total = count.checked_mul(w).ok_or(CodecError::Truncated)?;
        let raw = self.take(total)?;
        let mut out = Vec::with_capacity(count);
        for chunk in raw.chunks_exact(w) {
            let mut v = 0u32;
            for &b in chunk {
                v = v << 8 | u32::from(b);
            }
            if v >= q.get() {
                return Err(CodecError::MalformedElement);
            }
            out.push(v);
        }
        Ok(out)
    }

    pub(crate) fn vec(&mut self, q: Modulus, len: usize) -> Result<ZqVec, CodecError> {
        Ok(ZqVec::from_elems(q, self.elems(q, len)?))
    }

    pub(crate) fn row(&mut self, q: Modulus, len: usize) -> Result<ZqRowVec, CodecError> {
        Ok(ZqRowVec::from_elems(q, self.elems(q, len)?))
    }

    fn matrix(&mut self, q: Modulus, rows: usize, cols: usize) -> Result<ZqMatrix, CodecError> {
        let count = rows.checked_mul(cols).ok_or(CodecError::Truncated)?;
        let elems = self.elems(q, count)?;
        let rows_vec: Vec<Vec<u32>> = elems.chunks(cols).map(<[u32]>::to_vec).collect();
        Ok(ZqMatrix::from_rows(q, &rows_vec))
    }

    pub(crate) fn bits(&mut self, len: usize) -> Result<BitString, CodecError> {
        let raw = self.take(len.div_ceil(8))?;
        Ok(BitString::from_bytes(len, raw))
    }

    pub(crate) fn finish(&self) -> Result<(), CodecError> {
        if self.bytes.is_empty() {
            Ok(())
        } else {
            Err(CodecError::TrailingBytes)
        }
    }
}

/// The TA's master secret vector `d ∈ Z_q^m`.
///
/// Held only by the trusted authority; no broadcast structure ever
/// contains it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MasterSecret(ZqVec);

impl MasterSecret {
    pub fn from_vec(d: ZqVec) -> Self {
        Self(d)
    }

    pub fn as_vec(&self) -> &ZqVec {
        &self.0
    }
}

/// A pseudonym: the masked identity bits plus the epoch timestamp the TA
/// issued them at.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct PseudoId {
    pub pid: BitString,
    pub t: Timestamp,
}

/// TA-side record of one registration: enough to de-anonymize later.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegistrationRecord {
    pub self_pub: ZqRowVec,
    pub pid: PseudoId,
    pub rid: BitString,
}

/// TA-issued partial key: `psk = x + γ·d` and its public image `X = x^T A`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PartialSecretKey {
    pub psk: ZqVec,
    pub x_pub: ZqRowVec,
}

/// The full certificateless key bundle a vehicle signs with.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VehicleCredential {
    pub pid: PseudoId,
    /// Self-chosen secret `a`; never shared with the TA.
    pub self_secret: ZqVec,
    /// `pk¹ = a^T A`, registered with the TA.
    pub self_pub: ZqRowVec,
    pub partial: PartialSecretKey,
    /// Full secret key `sk = psk + a`.
    pub sk: ZqVec,
    /// Full public key `pk = pk¹ + X`, announced to verifiers.
    pub pk: ZqRowVec,
}

/// System setup: samples the public matrix, the master secret, and its
/// public row `master_pub = d^T A`.
///
/// Sampling order is fixed (matrix row-major, then `d`) so a seeded RNG
/// reproduces identical parameters everywhere.
pub fn setup(profile: Profile, rng: &mut dyn RngCore) -> (SystemParams, MasterSecret) {
    let (qv, m, n, l) = profile.dims();
    let q = Modulus::new(qv).expect("profile modulus is prime");
    let matrix = ZqMatrix::sample_uniform(q, m, n, rng);
    let d = ZqVec::sample_uniform(q, m, rng);
    let master_pub = d.row_mul(&matrix).expect("dimensions fixed by profile");
    let hash = HashConfig::new(XofAlgorithm::Shake256, l, q);
    (SystemParams::new(matrix, master_pub, hash), MasterSecret(d))
}

/// Vehicle side of pseudonym generation: a fresh self-secret and its
/// public image `pk¹ = a^T A`, sent to the TA over the secure channel.
pub fn pid_request(params: &SystemParams, rng: &mut dyn RngCore) -> (ZqVec, ZqRowVec) {
    let a = ZqVec::sample_uniform(params.q(), params.m(), rng);
    let pk1 = a.row_mul(params.matrix()).expect("params are consistent");
    (a, pk1)
}

/// Recovers the masked identity: `pid ⊕ H1(pk¹, d, t)`.
///
/// XOR is an involution, so the same computation both masks (issue) and
/// unmasks (trace).
pub fn unmask_identity(
    self_pub: &ZqRowVec,
    pid_bits: &BitString,
    t: Timestamp,
    master: &MasterSecret,
    params: &SystemParams,
) -> Result<BitString, ProtocolError> {
    let mask = h1(self_pub, master.as_vec(), t, params.hash())?;
    Ok(pid_bits.xor(&mask))
}

/// Vehicle-side soundness check on an issued partial key:
/// `psk^T A == X + γ·master_pub` with `γ = H2(pk¹ + X, t)`.
///
/// In the certificateless trust model the vehicle must not accept a
/// partial key on faith; a single perturbed element makes this identity
/// fail except on measure-zero degenerate rows of the matrix.
pub fn validate_psk(
    params: &SystemParams,
    self_pub: &ZqRowVec,
    partial: &PartialSecretKey,
    pid: &PseudoId,
) -> bool {
    let check = || -> Result<bool, ProtocolError> {
        let pk = self_pub.add(&partial.x_pub)?;
        let gamma = h2(&pk, pid.t, params.hash())?;
        let lhs = partial.psk.row_mul(params.matrix())?;
        let rhs = partial.x_pub.add(&params.master_pub().scale(gamma))?;
        Ok(lhs == rhs)
    };
    check().unwrap_or(false)
}

/// Full-key derivation: `sk = psk + a`, `pk = pk¹ + X`.
///
/// Refuses to build a credential from a partial key that fails the
/// soundness check.
pub fn derive_keys(
    params: &SystemParams,
    pid: PseudoId,
    self_secret: ZqVec,
    self_pub: ZqRowVec,
    partial: PartialSecretKey,
) -> Result<VehicleCredential, ProtocolError> {
    if !validate_psk(params, &self_pub, &partial, &pid) {
        return Err(ProtocolError::InvalidPartialKey);
    }
    let sk = partial.psk.add(&self_secret)?;
    let pk = self_pub.add(&partial.x_pub)?;
    Ok(VehicleCredential {
        pid,
        self_secret,
        self_pub,
        partial,
        sk,
        pk,
    })
}

/// The trusted authority: master secret plus the registration table.
#[derive(Debug, Clone)]
pub struct TrustedAuthority {
    params: SystemParams,
    master: MasterSecret,
    registrations: Vec<RegistrationRecord>,
    issued: HashSet<(Vec<u8>, Vec<u8>, u32)>,
    by_pid: HashMap<(Vec<u8>, u32), usize>,
}

impl TrustedAuthority {
    pub fn new(params: SystemParams, master: MasterSecret) -> Self {
        Self {
            params,
            master,
            registrations: Vec::new(),
            issued: HashSet::new(),
            by_pid: HashMap::new(),
        }
    }

    /// Rebuilds an authority from persisted state (key-store loading).
    pub fn from_records(
        params: SystemParams,
        master: MasterSecret,
        records: Vec<RegistrationRecord>,
    ) -> Self {
        let mut ta = Self::new(params, master);
        for rec in records {
            ta.index_record(rec);
        }
        ta
    }

    fn index_record(&mut self, rec: RegistrationRecord) {
        let idx = self.registrations.len();
        self.issued.insert((
            rec.self_pub.to_bytes(),
            rec.rid.as_bytes().to_vec(),
            rec.pid.t.0,
        ));
        self.by_pid
            .insert((rec.pid.pid.as_bytes().to_vec(), rec.pid.t.0), idx);
        self.registrations.push(rec);
    }

    pub fn params(&self) -> &SystemParams {
        &self.params
    }

    pub fn master(&self) -> &MasterSecret {
        &self.master
    }

    pub fn registrations(&self) -> &[RegistrationRecord] {
        &self.registrations
    }

    /// Pseudonym issuance: `pid = rid ⊕ H1(pk¹, d, now)`, then the record
    /// is appended to the registration table.
    pub fn pid_issue(
        &mut self,
        self_pub: &ZqRowVec,
        rid: &BitString,
        now: Timestamp,
    ) -> Result<PseudoId, ProtocolError> {
        if rid.len() != self.params.l() {
            return Err(ProtocolError::BadRealIdLength {
                expected: self.params.l(),
                got: rid.len(),
            });
        }
        let key = (self_pub.to_bytes(), rid.as_bytes().to_vec(), now.0);
        if self.issued.contains(&key) {
            return Err(ProtocolError::DuplicateRegistration);
        }
        let pid_bits = unmask_identity(self_pub, rid, now, &self.master, &self.params)?;
        let pid = PseudoId {
            pid: pid_bits,
            t: now,
        };
        self.index_record(RegistrationRecord {
            self_pub: self_pub.clone(),
            pid: pid.clone(),
            rid: rid.clone(),
        });
        Ok(pid)
    }

    /// Partial-key issuance for a registered `(pk¹, pid)` pair:
    /// `X = x^T A`, `γ = H2(pk¹ + X, t)`, `psk = x + γ·d`.
    pub fn psk_issue(
        &self,
        self_pub: &ZqRowVec,
        pid: &PseudoId,
        rng: &mut dyn RngCore,
    ) -> Result<PartialSecretKey, ProtocolError> {
        let idx = self
            .by_pid
            .get(&(pid.pid.as_bytes().to_vec(), pid.t.0))
            .copied()
            .ok_or(ProtocolError::UnregisteredVehicle)?;
        if &self.registrations[idx].self_pub != self_pub {
            return Err(ProtocolError::UnregisteredVehicle);
        }
        let x = ZqVec::sample_uniform(self.params.q(), self.params.m(), rng);
        self.issue_partial_with_nonce(self_pub, pid, x)
    }

    /// Deterministic-nonce variant backing `psk_issue`; exposed within the
    /// crate so tests can force degenerate nonces.
    pub(crate) fn issue_partial_with_nonce(
        &self,
        self_pub: &ZqRowVec,
        pid: &PseudoId,
        x: ZqVec,
    ) -> Result<PartialSecretKey, ProtocolError> {
        let x_pub = x.row_mul(self.params.matrix())?;
        let pk = self_pub.add(&x_pub)?;
        let gamma = h2(&pk, pid.t, self.params.hash())?;
        let psk = x.add(&self.master.as_vec().scale(gamma))?;
        Ok(PartialSecretKey { psk, x_pub })
    }

    /// Conditional traceability: recovers the registered real identity
    /// behind a pseudonym, or fails if no record matches.
    pub fn trace(&self, pid: &PseudoId) -> Result<BitString, ProtocolError> {
        let idx = self
            .by_pid
            .get(&(pid.pid.as_bytes().to_vec(), pid.t.0))
            .copied()
            .ok_or(ProtocolError::UnknownPseudonym)?;
        let rec = &self.registrations[idx];
        unmask_identity(&rec.self_pub, &pid.pid, pid.t, &self.master, &self.params)
    }
}
