//! Server-side storage of partial-password secrets.
//!
//! Three backends share one enroll/verify surface:
//!
//! * [`StorageBackend::Plaintext`] keeps the characters verbatim.
//! * [`StorageBackend::HashPerCombination`] keeps one salted digest for every
//!   `m`-subset of positions, `C(n, m)` digests in all. The digest preimage is
//!   `salt ‖ positions ‖ characters`, one octet per position in ascending
//!   order, characters UTF-8 encoded in the same order.
//! * [`StorageBackend::EncryptedWithKeyService`] keeps an AES-256-GCM
//!   ciphertext whose key lives only inside a [`KeyService`]. The service
//!   decrypts the full password on every check, so a compromised service
//!   process sees whole passwords; [`KeyService::plaintext_decryptions`]
//!   counts those events.
//!
//! Records serialize to a self-describing JSON document ([`RECORD_VERSION`]).

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Mutex;

use aes_gcm::aead::{Aead, KeyInit, Payload};
use aes_gcm::{Aes256Gcm, Key, Nonce};
use num_bigint::BigUint;
use num_traits::ToPrimitive;
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256, Sha512};
use subtle::ConstantTimeEq;

use crate::attack_model::{SamplingScenario, SchemeParams};
use crate::combinatorics::binom;
use crate::error::StoreError;
use crate::protocol_sim::{all_challenges, Alphabet, Challenge, Password, Response, Verdict};

pub const RECORD_VERSION: u32 = 1;
pub const SALT_BYTES: usize = 16;
pub const NONCE_BYTES: usize = 12;
pub const TAG_BYTES: usize = 16;
/// Refuse to pre-hash more combinations than this per user.
pub const MAX_COMBINATIONS: u64 = 1 << 20;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StorageBackend {
    Plaintext,
    HashPerCombination,
    EncryptedWithKeyService,
}

impl StorageBackend {
    pub const ALL: [StorageBackend; 3] = [
        Self::Plaintext,
        Self::HashPerCombination,
        Self::EncryptedWithKeyService,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Self::Plaintext => "plaintext",
            Self::HashPerCombination => "hash-per-combination",
            Self::EncryptedWithKeyService => "encrypted-with-key-service",
        }
    }
}

impl fmt::Display for StorageBackend {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for StorageBackend {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "plaintext" => Ok(Self::Plaintext),
            "hash-per-combination" | "hash" => Ok(Self::HashPerCombination),
            "encrypted-with-key-service" | "encrypted" => Ok(Self::EncryptedWithKeyService),
            other => Err(format!("unknown backend {other:?}")),
        }
    }
}

/// Named digest functions available to hash-per-combination records.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum DigestAlgorithm {
    #[default]
    #[serde(rename = "sha256")]
    Sha256,
    #[serde(rename = "sha512")]
    Sha512,
}

impl DigestAlgorithm {
    pub fn from_name(name: &str) -> Result<Self, StoreError> {
        match name.to_ascii_lowercase().as_str() {
            "sha256" | "sha-256" => Ok(Self::Sha256),
            "sha512" | "sha-512" => Ok(Self::Sha512),
            _ => Err(StoreError::UnknownDigest(name.to_string())),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Sha256 => "sha256",
            Self::Sha512 => "sha512",
        }
    }

    pub fn bits(self) -> u64 {
        match self {
            Self::Sha256 => 256,
            Self::Sha512 => 512,
        }
    }

    fn digest(self, parts: &[&[u8]]) -> Vec<u8> {
        fn run<D: Digest>(parts: &[&[u8]]) -> Vec<u8> {
            let mut h = D::new();
            for p in parts {
                h.update(p);
            }
            h.finalize().to_vec()
        }
        match self {
            Self::Sha256 => run::<Sha256>(parts),
            Self::Sha512 => run::<Sha512>(parts),
        }
    }
}

/// Ciphertext of a whole password plus the id of the key that sealed it.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SealedPassword {
    pub key_id: String,
    pub nonce: Vec<u8>,
    pub ciphertext: Vec<u8>,
}

/// In-process stand-in for a hardware security module.
///
/// Keys never leave the service; callers only seal passwords and ask
/// whether characters match.
pub struct KeyService {
    keys: Mutex<HashMap<String, [u8; 32]>>,
    active: String,
    decryptions: AtomicU64,
}

impl fmt::Debug for KeyService {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("KeyService")
            .field("active", &self.active)
            .field("decryptions", &self.plaintext_decryptions())
            .finish_non_exhaustive()
    }
}

#[derive(Serialize, Deserialize)]
struct KeyServiceState {
    active: String,
    keys: Vec<(String, String)>,
}

impl KeyService {
    /// A service holding one freshly generated key.
    pub fn generate<R: RngCore + ?Sized>(rng: &mut R) -> Self {
        let mut key = [0u8; 32];
        rng.fill_bytes(&mut key);
        let mut id = [0u8; 8];
        rng.fill_bytes(&mut id);
        let active = format!("key-{}", hex::encode(id));
        Self {
            keys: Mutex::new(HashMap::from([(active.clone(), key)])),
            active,
            decryptions: AtomicU64::new(0),
        }
    }

    pub fn active_key_id(&self) -> &str {
        &self.active
    }

    /// Number of times a full password was decrypted inside the service.
    pub fn plaintext_decryptions(&self) -> u64 {
        self.decryptions.load(Ordering::Relaxed)
    }

    fn cipher(&self, key_id: &str) -> Result<Aes256Gcm, StoreError> {
        let keys = self.keys.lock().expect("key service lock poisoned");
        let key = keys
            .get(key_id)
            .ok_or_else(|| StoreError::UnknownKey(key_id.to_string()))?;
        Ok(Aes256Gcm::new(Key::<Aes256Gcm>::from_slice(key)))
    }

    pub fn enroll<R: RngCore + ?Sized>(
        &self,
        password: &Password,
        params: SchemeParams,
        rng: &mut R,
    ) -> Result<SealedPassword, StoreError> {
        let mut nonce = [0u8; NONCE_BYTES];
        rng.fill_bytes(&mut nonce);
        let msg = password.as_string();
        let aad = associated_data(params);
        let ciphertext = self
            .cipher(&self.active)?
            .encrypt(
                Nonce::from_slice(&nonce),
                Payload {
                    msg: msg.as_bytes(),
                    aad: &aad,
                },
            )
            .map_err(|_| StoreError::Integrity("encryption failed".into()))?;
        Ok(SealedPassword {
            key_id: self.active.clone(),
            nonce: nonce.to_vec(),
            ciphertext,
        })
    }

    /// Decrypts inside the service and compares the challenged characters.
    pub fn check(
        &self,
        sealed: &SealedPassword,
        params: SchemeParams,
        challenge: &Challenge,
        response: &Response,
    ) -> Result<bool, StoreError> {
        if sealed.nonce.len() != NONCE_BYTES {
            return Err(StoreError::Integrity("bad nonce length".into()));
        }
        let aad = associated_data(params);
        let plain = self
            .cipher(&sealed.key_id)?
            .decrypt(
                Nonce::from_slice(&sealed.nonce),
                Payload {
                    msg: &sealed.ciphertext,
                    aad: &aad,
                },
            )
            .map_err(|_| StoreError::Integrity("ciphertext failed authentication".into()))?;
        self.decryptions.fetch_add(1, Ordering::Relaxed);
        let text = String::from_utf8(plain)
            .map_err(|_| StoreError::Integrity("decrypted password is not UTF-8".into()))?;
        let chars: Vec<char> = text.chars().collect();
        if chars.len() != params.n() {
            return Err(StoreError::Integrity("decrypted length mismatch".into()));
        }
        let expected: String = challenge.positions().iter().map(|&p| chars[p]).collect();
        let given: String = response.chars().iter().collect();
        Ok(ct_eq_str(&expected, &given))
    }

    /// Writes the service's key material to its own state file. This models
    /// the device's internal storage; records never carry keys.
    pub fn save_state(&self) -> String {
        let keys = self.keys.lock().expect("key service lock poisoned");
        let mut pairs: Vec<(String, String)> =
            keys.iter().map(|(k, v)| (k.clone(), hex::encode(v))).collect();
        pairs.sort();
        let state = KeyServiceState {
            active: self.active.clone(),
            keys: pairs,
        };
        serde_json::to_string_pretty(&state).expect("state serializes") + "\n"
    }

    pub fn load_state(text: &str) -> Result<Self, StoreError> {
        let state: KeyServiceState =
            serde_json::from_str(text).map_err(|e| StoreError::Format(e.to_string()))?;
        let mut keys = HashMap::new();
        for (id, hex_key) in state.keys {
            let bytes = hex::decode(&hex_key).map_err(|e| StoreError::Format(e.to_string()))?;
            let key: [u8; 32] = bytes
                .try_into()
                .map_err(|_| StoreError::Format("key must be 32 bytes".into()))?;
            keys.insert(id, key);
        }
        if !keys.contains_key(&state.active) {
            return Err(StoreError::UnknownKey(state.active));
        }
        Ok(Self {
            keys: Mutex::new(keys),
            active: state.active,
            decryptions: AtomicU64::new(0),
        })
    }
}

fn associated_data(params: SchemeParams) -> Vec<u8> {
    format!("ppass-record-v{RECORD_VERSION};n={};m={}", params.n(), params.m()).into_bytes()
}

fn ct_eq_str(a: &str, b: &str) -> bool {
    // Lengths are public (both equal m characters for a well-formed response).
    a.len() == b.len() && bool::from(a.as_bytes().ct_eq(b.as_bytes()))
}

/// One pre-hashed combination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DigestEntry {
    pub positions: Vec<usize>,
    pub digest: Vec<u8>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RecordPayload {
    Plaintext(String),
    Digests {
        algorithm: DigestAlgorithm,
        salt: Vec<u8>,
        entries: Vec<DigestEntry>,
    },
    Sealed(SealedPassword),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CredentialRecord {
    pub params: SchemeParams,
    pub alphabet: Alphabet,
    pub payload: RecordPayload,
}

impl CredentialRecord {
    pub fn backend(&self) -> StorageBackend {
        match self.payload {
            RecordPayload::Plaintext(_) => StorageBackend::Plaintext,
            RecordPayload::Digests { .. } => StorageBackend::HashPerCombination,
            RecordPayload::Sealed(_) => StorageBackend::EncryptedWithKeyService,
        }
    }

    pub fn salt(&self) -> Option<&[u8]> {
        match &self.payload {
            RecordPayload::Digests { salt, .. } => Some(salt),
            _ => None,
        }
    }

    pub fn digest_entries(&self) -> &[DigestEntry] {
        match &self.payload {
            RecordPayload::Digests { entries, .. } => entries,
            _ => &[],
        }
    }

    /// Bits held in the digest table (zero for other backends).
    pub fn digest_payload_bits(&self) -> u64 {
        self.digest_entries()
            .iter()
            .map(|e| e.digest.len() as u64 * 8)
            .sum()
    }

    pub fn to_document(&self) -> String {
        let doc = RecordDocument::from(self);
        serde_json::to_string_pretty(&doc).expect("record serializes") + "\n"
    }

    pub fn from_document(text: &str) -> Result<Self, StoreError> {
        let doc: RecordDocument =
            serde_json::from_str(text).map_err(|e| StoreError::Format(e.to_string()))?;
        let record = Self::try_from(doc)?;
        record.check_integrity()?;
        Ok(record)
    }

    fn check_integrity(&self) -> Result<(), StoreError> {
        let (n, m) = (self.params.n(), self.params.m());
        match &self.payload {
            RecordPayload::Plaintext(text) => {
                if text.chars().count() != n {
                    return Err(StoreError::Integrity("plaintext length differs from n".into()));
                }
            }
            RecordPayload::Digests {
                algorithm,
                salt,
                entries,
            } => {
                if salt.is_empty() {
                    return Err(StoreError::Integrity("missing salt".into()));
                }
                if BigUint::from(entries.len()) != binom(n as u64, m as u64) {
                    return Err(StoreError::Integrity(format!(
                        "{} digest entries, expected C({n},{m})",
                        entries.len()
                    )));
                }
                let width = (algorithm.bits() / 8) as usize;
                for (e, w) in entries.iter().zip(entries.iter().skip(1)) {
                    if e.positions >= w.positions {
                        return Err(StoreError::Integrity("entries out of order".into()));
                    }
                }
                for e in entries {
                    if e.digest.len() != width
                        || e.positions.len() != m
                        || e.positions.iter().any(|&p| p >= n)
                        || e.positions.windows(2).any(|w| w[0] >= w[1])
                    {
                        return Err(StoreError::Integrity("malformed digest entry".into()));
                    }
                }
            }
            RecordPayload::Sealed(s) => {
                if s.nonce.len() != NONCE_BYTES || s.ciphertext.len() < TAG_BYTES {
                    return Err(StoreError::Integrity("malformed ciphertext".into()));
                }
            }
        }
        Ok(())
    }
}

/// On-disk shape of a [`CredentialRecord`].
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RecordDocument {
    version: u32,
    backend: StorageBackend,
    n: usize,
    m: usize,
    alphabet: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    digest: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    salt: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    entries: Option<Vec<EntryDocument>>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    plaintext: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    key_id: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    nonce: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    ciphertext: Option<String>,
}

#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct EntryDocument {
    positions: Vec<usize>,
    digest: String,
}

impl From<&CredentialRecord> for RecordDocument {
    fn from(r: &CredentialRecord) -> Self {
        let mut doc = RecordDocument {
            version: RECORD_VERSION,
            backend: r.backend(),
            n: r.params.n(),
            m: r.params.m(),
            alphabet: r.alphabet.to_string(),
            digest: None,
            salt: None,
            entries: None,
            plaintext: None,
            key_id: None,
            nonce: None,
            ciphertext: None,
        };
        match &r.payload {
            RecordPayload::Plaintext(text) => doc.plaintext = Some(text.clone()),
            RecordPayload::Digests {
                algorithm,
                salt,
                entries,
            } => {
                doc.digest = Some(algorithm.name().to_string());
                doc.salt = Some(hex::encode(salt));
                doc.entries = Some(
                    entries
                        .iter()
                        .map(|e| EntryDocument {
                            positions: e.positions.clone(),
                            digest: hex::encode(&e.digest),
                        })
                        .collect(),
                );
            }
            RecordPayload::Sealed(s) => {
                doc.key_id = Some(s.key_id.clone());
                doc.nonce = Some(hex::encode(&s.nonce));
                doc.ciphertext = Some(hex::encode(&s.ciphertext));
            }
        }
        doc
    }
}

impl TryFrom<RecordDocument> for CredentialRecord {
    type Error = StoreError;

    fn try_from(doc: RecordDocument) -> Result<Self, StoreError> {
        if doc.version != RECORD_VERSION {
            return Err(StoreError::Format(format!("unsupported version {}", doc.version)));
        }
        let missing = |f: &str| StoreError::Format(format!("missing field {f:?}"));
        let unhex = |s: &str| hex::decode(s).map_err(|e| StoreError::Format(e.to_string()));
        let params = SchemeParams::new(doc.n, doc.m).map_err(|e| StoreError::Format(e.to_string()))?;
        let alphabet = Alphabet::new(doc.alphabet.chars())?;
        let payload = match doc.backend {
            StorageBackend::Plaintext => {
                RecordPayload::Plaintext(doc.plaintext.ok_or_else(|| missing("plaintext"))?)
            }
            StorageBackend::HashPerCombination => RecordPayload::Digests {
                algorithm: DigestAlgorithm::from_name(&doc.digest.ok_or_else(|| missing("digest"))?)?,
                salt: unhex(&doc.salt.ok_or_else(|| missing("salt"))?)?,
                entries: doc
                    .entries
                    .ok_or_else(|| missing("entries"))?
                    .into_iter()
                    .map(|e| {
                        Ok(DigestEntry {
                            positions: e.positions,
                            digest: unhex(&e.digest)?,
                        })
                    })
                    .collect::<Result<_, StoreError>>()?,
            },
            StorageBackend::EncryptedWithKeyService => RecordPayload::Sealed(SealedPassword {
                key_id: doc.key_id.ok_or_else(|| missing("key_id"))?,
                nonce: unhex(&doc.nonce.ok_or_else(|| missing("nonce"))?)?,
                ciphertext: unhex(&doc.ciphertext.ok_or_else(|| missing("ciphertext"))?)?,
            }),
        };
        Ok(CredentialRecord {
            params,
            alphabet,
            payload,
        })
    }
}

/// Enrollment and verification front end over all three backends.
#[derive(Debug, Clone, Copy, Default)]
pub struct CredentialStore<'k> {
    digest: DigestAlgorithm,
    key_service: Option<&'k KeyService>,
}

impl<'k> CredentialStore<'k> {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_digest(mut self, digest: DigestAlgorithm) -> Self {
        self.digest = digest;
        self
    }

    pub fn with_key_service(mut self, service: &'k KeyService) -> Self {
        self.key_service = Some(service);
        self
    }

    pub fn enroll<R: RngCore + ?Sized>(
        &self,
        password: &Password,
        params: SchemeParams,
        backend: StorageBackend,
        rng: &mut R,
    ) -> Result<CredentialRecord, StoreError> {
        if password.len() != params.n() {
            return Err(StoreError::PasswordLength {
                expected: params.n(),
                got: password.len(),
            });
        }
        let payload = match backend {
            StorageBackend::Plaintext => RecordPayload::Plaintext(password.as_string()),
            StorageBackend::HashPerCombination => {
                if params.n() > 256 {
                    return Err(StoreError::PositionEncoding(params.n()));
                }
                let count = binom(params.n() as u64, params.m() as u64);
                if count > BigUint::from(MAX_COMBINATIONS) {
                    return Err(StoreError::TooManyCombinations(count.to_string()));
                }
                let mut salt = vec![0u8; SALT_BYTES];
                rng.fill_bytes(&mut salt);
                let entries = all_challenges(SamplingScenario::WithoutReplacement, params)
                    .into_iter()
                    .map(|c| {
                        let chars: Vec<char> =
                            c.positions().iter().map(|&p| password.chars()[p]).collect();
                        DigestEntry {
                            digest: combination_digest(self.digest, &salt, c.positions(), &chars),
                            positions: c.positions().to_vec(),
                        }
                    })
                    .collect();
                RecordPayload::Digests {
                    algorithm: self.digest,
                    salt,
                    entries,
                }
            }
            StorageBackend::EncryptedWithKeyService => {
                let service = self.key_service.ok_or(StoreError::MissingKeyService)?;
                RecordPayload::Sealed(service.enroll(password, params, rng)?)
            }
        };
        Ok(CredentialRecord {
            params,
            alphabet: password.alphabet().clone(),
            payload,
        })
    }

    pub fn verify(
        &self,
        record: &CredentialRecord,
        challenge: &Challenge,
        response: &Response,
    ) -> Result<Verdict, StoreError> {
        let (n, m) = (record.params.n(), record.params.m());
        if challenge.len() != m || challenge.positions().iter().any(|&p| p >= n) {
            return Err(StoreError::ChallengeShape(format!(
                "expected {m} positions below {n}"
            )));
        }
        if response.len() != challenge.len() {
            return Err(crate::error::ProtocolError::LengthMismatch {
                challenge: challenge.len(),
                response: response.len(),
            }
            .into());
        }
        let ok = match &record.payload {
            RecordPayload::Plaintext(text) => {
                let chars: Vec<char> = text.chars().collect();
                if chars.len() != n {
                    return Err(StoreError::Integrity("plaintext length differs from n".into()));
                }
                let expected: String = challenge.positions().iter().map(|&p| chars[p]).collect();
                let given: String = response.chars().iter().collect();
                ct_eq_str(&expected, &given)
            }
            RecordPayload::Digests {
                algorithm,
                salt,
                entries,
            } => {
                if challenge.has_repeats() {
                    return Err(StoreError::UnsupportedChallenge);
                }
                let entry = entries
                    .binary_search_by(|e| e.positions.as_slice().cmp(challenge.positions()))
                    .map(|i| &entries[i])
                    .map_err(|_| StoreError::Integrity("no digest for challenged positions".into()))?;
                let probe = combination_digest(*algorithm, salt, challenge.positions(), response.chars());
                probe.len() == entry.digest.len() && bool::from(probe.ct_eq(&entry.digest))
            }
            RecordPayload::Sealed(sealed) => {
                let service = self.key_service.ok_or(StoreError::MissingKeyService)?;
                service.check(sealed, record.params, challenge, response)?
            }
        };
        Ok(Verdict::from_bool(ok))
    }
}

fn combination_digest(
    algorithm: DigestAlgorithm,
    salt: &[u8],
    positions: &[usize],
    chars: &[char],
) -> Vec<u8> {
    let encoded: Vec<u8> = positions.iter().map(|&p| p as u8).collect();
    let text: String = chars.iter().collect();
    algorithm.digest(&[salt, &encoded, text.as_bytes()])
}

/// Bits a backend needs per user.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StorageCost {
    /// Secret-bearing bits: characters, digest table or ciphertext body.
    pub payload_bits: BigUint,
    /// Salt, nonce and authentication tag.
    pub overhead_bits: u64,
}

impl StorageCost {
    pub fn total_bits(&self) -> BigUint {
        &self.payload_bits + self.overhead_bits
    }

    pub fn payload_bits_u64(&self) -> Option<u64> {
        self.payload_bits.to_u64()
    }
}

/// Per-user storage for `backend`; the hash-per-combination payload is
/// `digest_bits × C(n, m)`.
pub fn storage_cost(
    params: SchemeParams,
    backend: StorageBackend,
    digest_bits: u64,
    alphabet: &Alphabet,
) -> StorageCost {
    let n = params.n() as u64;
    match backend {
        StorageBackend::Plaintext => {
            let per_char = (alphabet.len() as f64).log2().ceil().max(0.0) as u64;
            StorageCost {
                payload_bits: BigUint::from(n * per_char),
                overhead_bits: 0,
            }
        }
        StorageBackend::HashPerCombination => StorageCost {
            payload_bits: binom(n, params.m() as u64) * digest_bits,
            overhead_bits: SALT_BYTES as u64 * 8,
        },
        StorageBackend::EncryptedWithKeyService => {
            let widest = alphabet
                .symbols()
                .iter()
                .map(|c| c.len_utf8() as u64)
                .max()
                .unwrap_or(1);
            StorageCost {
                payload_bits: BigUint::from(n * widest * 8),
                overhead_bits: (NONCE_BYTES + TAG_BYTES) as u64 * 8,
            }
        }
    }
}
