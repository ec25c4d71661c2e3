//! Versioned binary containers for keys and announcements.
//!
//! Every file starts with the magic `QSCL`, a format version, and a kind
//! byte. TA stores carry the master secret and the registration table;
//! vehicle stores carry the credential material accumulated so far and
//! never the master secret; directory files carry `(pid, pk)`
//! announcements for verifiers.

use crate::error::CodecError;
use crate::protocol::{
    Cursor, MasterSecret, PartialSecretKey, PseudoId, RegistrationRecord, SystemParams,
    TrustedAuthority, VehicleCredential,
};
use crate::signing::PublicKeyDirectory;
use crate::zq::{ZqRowVec, ZqVec};
use crate::Timestamp;

pub const MAGIC: &[u8; 4] = b"QSCL";
pub const VERSION: u8 = 1;

/// Container kinds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Kind {
    Params = 0x01,
    TaStore = 0x02,
    VehicleStore = 0x03,
    Directory = 0x04,
}

impl Kind {
    fn from_byte(b: u8) -> Result<Self, CodecError> {
        match b {
            0x01 => Ok(Kind::Params),
            0x02 => Ok(Kind::TaStore),
            0x03 => Ok(Kind::VehicleStore),
            0x04 => Ok(Kind::Directory),
            other => Err(CodecError::WrongKind(other)),
        }
    }
}

fn header(kind: Kind) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.push(VERSION);
    out.push(kind as u8);
    out
}

fn open(bytes: &[u8], want: Kind) -> Result<&[u8], CodecError> {
    if bytes.len() < 6 || &bytes[..4] != MAGIC || bytes[4] != VERSION {
        return Err(CodecError::BadHeader);
    }
    let kind = Kind::from_byte(bytes[5])?;
    if kind != want {
        return Err(CodecError::WrongKind(kind as u8));
    }
    Ok(&bytes[6..])
}

/// Peeks at a container's kind without decoding it.
pub fn kind_of(bytes: &[u8]) -> Result<Kind, CodecError> {
    if bytes.len() < 6 || &bytes[..4] != MAGIC || bytes[4] != VERSION {
        return Err(CodecError::BadHeader);
    }
    Kind::from_byte(bytes[5])
}

fn put_params(out: &mut Vec<u8>, params: &SystemParams) {
    let body = params.to_bytes();
    out.extend_from_slice(&(body.len() as u32).to_be_bytes());
    out.extend_from_slice(&body);
}

fn get_params(cur: &mut Cursor) -> Result<SystemParams, CodecError> {
    let len = cur.u32()? as usize;
    SystemParams::from_bytes(cur.take(len)?)
}

fn put_bits(out: &mut Vec<u8>, bits: &crate::bits::BitString) {
    out.extend_from_slice(bits.as_bytes());
}

/// Parameters-only container, distributed to verifiers.
pub fn save_params(params: &SystemParams) -> Vec<u8> {
    let mut out = header(Kind::Params);
    put_params(&mut out, params);
    out
}

pub fn load_params(bytes: &[u8]) -> Result<SystemParams, CodecError> {
    let mut cur = Cursor::new(open(bytes, Kind::Params)?);
    let params = get_params(&mut cur)?;
    cur.finish()?;
    Ok(params)
}

/// TA store: parameters, master secret, and the registration table.
pub fn save_ta(ta: &TrustedAuthority) -> Vec<u8> {
    let params = ta.params();
    let mut out = header(Kind::TaStore);
    put_params(&mut out, params);
    out.extend_from_slice(&ta.master().as_vec().to_bytes());
    let records = ta.registrations();
    out.extend_from_slice(&(records.len() as u32).to_be_bytes());
    for rec in records {
        out.extend_from_slice(&rec.self_pub.to_bytes());
        put_bits(&mut out, &rec.pid.pid);
        out.extend_from_slice(&rec.pid.t.0.to_be_bytes());
        put_bits(&mut out, &rec.rid);
    }
    out
}

pub fn load_ta(bytes: &[u8]) -> Result<TrustedAuthority, CodecError> {
    let mut cur = Cursor::new(open(bytes, Kind::TaStore)?);
    let params = get_params(&mut cur)?;
    let (q, m, n, l) = (params.q(), params.m(), params.n(), params.l());
    let master = MasterSecret::from_vec(cur.vec(q, m)?);
    let count = cur.u32()? as usize;
    let mut records = Vec::with_capacity(count);
    for _ in 0..count {
        let self_pub = cur.row(q, n)?;
        let pid_bits = cur.bits(l)?;
        let t = Timestamp(cur.u32()?);
        let rid = cur.bits(l)?;
        records.push(RegistrationRecord {
            self_pub,
            pid: PseudoId { pid: pid_bits, t },
            rid,
        });
    }
    cur.finish()?;
    Ok(TrustedAuthority::from_records(params, master, records))
}

/// Vehicle-side key material, staged as the lifecycle progresses.
///
/// A vehicle store never contains the master secret; the TA store never
/// contains a vehicle's self-secret or full key.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct VehicleStore {
    pub params: SystemParams,
    pub stage: VehicleStage,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum VehicleStage {
    /// After pseudonym issuance: self-secret, its public image, and the
    /// pseudonym.
    Registered {
        pid: PseudoId,
        self_secret: ZqVec,
        self_pub: ZqRowVec,
    },
    /// After partial-key issuance.
    Issued {
        pid: PseudoId,
        self_secret: ZqVec,
        self_pub: ZqRowVec,
        partial: PartialSecretKey,
    },
    /// After full-key derivation: ready to sign.
    Complete(VehicleCredential),
}

impl VehicleStage {
    fn tag(&self) -> u8 {
        match self {
            VehicleStage::Registered { .. } => 1,
            VehicleStage::Issued { .. } => 2,
            VehicleStage::Complete(_) => 3,
        }
    }
}

pub fn save_vehicle(store: &VehicleStore) -> Vec<u8> {
    let mut out = header(Kind::VehicleStore);
    put_params(&mut out, &store.params);
    out.push(store.stage.tag());
    let put_common = |out: &mut Vec<u8>, pid: &PseudoId, a: &ZqVec, pk1: &ZqRowVec| {
        put_bits(out, &pid.pid);
        out.extend_from_slice(&pid.t.0.to_be_bytes());
        out.extend_from_slice(&a.to_bytes());
        out.extend_from_slice(&pk1.to_bytes());
    };
    match &store.stage {
        VehicleStage::Registered {
            pid,
            self_secret,
            self_pub,
        } => put_common(&mut out, pid, self_secret, self_pub),
        VehicleStage::Issued {
            pid,
            self_secret,
            self_pub,
            partial,
        } => {
            put_common(&mut out, pid, self_secret, self_pub);
            out.extend_from_slice(&partial.psk.to_bytes());
            out.extend_from_slice(&partial.x_pub.to_bytes());
        }
        VehicleStage::Complete(cred) => {
            put_common(&mut out, &cred.pid, &cred.self_secret, &cred.self_pub);
            out.extend_from_slice(&cred.partial.psk.to_bytes());
            out.extend_from_slice(&cred.partial.x_pub.to_bytes());
            out.extend_from_slice(&cred.sk.to_bytes());
            out.extend_from_slice(&cred.pk.to_bytes());
        }
    }
    out
}

pub fn load_vehicle(bytes: &[u8]) -> Result<VehicleStore, CodecError> {
    let mut cur = Cursor::new(open(bytes, Kind::VehicleStore)?);
    let params = get_params(&mut cur)?;
    let (q, m, n, l) = (params.q(), params.m(), params.n(), params.l());
    let tag = cur.u8()?;
    let pid_bits = cur.bits(l)?;
    let t = Timestamp(cur.u32()?);
    let pid = PseudoId { pid: pid_bits, t };
    let self_secret = cur.vec(q, m)?;
    let self_pub = cur.row(q, n)?;
    let stage = match tag {
        1 => VehicleStage::Registered {
            pid,
            self_secret,
            self_pub,
        },
        2 => {
            let partial = PartialSecretKey {
                psk: cur.vec(q, m)?,
                x_pub: cur.row(q, n)?,
            };
            VehicleStage::Issued {
                pid,
                self_secret,
                self_pub,
                partial,
            }
        }
        3 => {
            let partial = PartialSecretKey {
                psk: cur.vec(q, m)?,
                x_pub: cur.row(q, n)?,
            };
            let sk = cur.vec(q, m)?;
            let pk = cur.row(q, n)?;
            VehicleStage::Complete(VehicleCredential {
                pid,
                self_secret,
                self_pub,
                partial,
                sk,
                pk,
            })
        }
        other => return Err(CodecError::WrongKind(other)),
    };
    cur.finish()?;
    Ok(VehicleStore { params, stage })
}

/// Directory container: announced `(pid, pk)` pairs, sorted so the bytes
/// are canonical.
pub fn save_directory(directory: &PublicKeyDirectory, params: &SystemParams) -> Vec<u8> {
    let mut entries: Vec<(&PseudoId, &ZqRowVec)> = directory.iter().collect();
    entries.sort_by(|a, b| (a.0.pid.as_bytes(), a.0.t.0).cmp(&(b.0.pid.as_bytes(), b.0.t.0)));
    let mut out = header(Kind::Directory);
    put_params(&mut out, params);
    out.extend_from_slice(&(entries.len() as u32).to_be_bytes());
    for (pid, pk) in entries {
        put_bits(&mut out, &pid.pid);
        out.extend_from_slice(&pid.t.0.to_be_bytes());
        out.extend_from_slice(&pk.to_bytes());
    }
    out
}

pub fn load_directory(bytes: &[u8]) -> Result<(SystemParams, PublicKeyDirectory), CodecError> {
    let mut cur = Cursor::new(open(bytes, Kind::Directory)?);
    let params = get_params(&mut cur)?;
    let (q, n, l) = (params.q(), params.n(), params.l());
    let count = cur.u32()? as usize;
    let mut dir = PublicKeyDirectory::new();
    for _ in 0..count {
        let pid_bits = cur.bits(l)?;
        let t = Timestamp(cur.u32()?);
        let pk = cur.row(q, n)?;
        dir.announce(PseudoId { pid: pid_bits, t }, pk);
    }
    cur.finish()?;
    Ok((params, dir))
}

/// True iff `needle` occurs as a contiguous byte pattern in `haystack`.
///
/// Used by the structural confinement checks: serialized non-TA state
/// must not contain the master secret's byte pattern, and TA state must
/// not contain any vehicle's self-secret or full key.
pub fn contains_pattern(haystack: &[u8], needle: &[u8]) -> bool {
    if needle.is_empty() || haystack.len() < needle.len() {
        return false;
    }
    haystack.windows(needle.len()).any(|w| w == needle)
}
