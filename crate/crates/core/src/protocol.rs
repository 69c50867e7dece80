//! Protocol vocabulary shared by all four schemes: public parameters, the
//! server secret, identity policy, the one-way function `f`, the secret
//! redirect function `Red`, and the login-request wire format.

use std::fmt;
use std::str::FromStr;

use hmac::{Hmac, Mac};
use num_bigint::BigUint;
use num_traits::{Num, One, Zero};
use rand::RngCore;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::ProtocolError;
use crate::modmath::{self, hex, Prime};
use crate::rng::SeededRng;

pub const DEFAULT_DELTA_T_S: u64 = 60;
pub const MIN_RED_KEY_LEN: usize = 16;
pub const STRICT_ID_DIGITS: usize = 12;

/// Hash backing the one-way function `f`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum HashId {
    #[serde(rename = "sha2-256")]
    Sha2_256,
}

impl HashId {
    pub fn digest(self, data: &[u8]) -> Vec<u8> {
        match self {
            HashId::Sha2_256 => Sha256::digest(data).to_vec(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum IdPolicy {
    /// Exactly 12 decimal digits with a valid Luhn check digit.
    Strict,
    /// Any decimal string whose residue mod p lies in `[2, p-2]`.
    Permissive,
}

impl FromStr for IdPolicy {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "strict" => Ok(IdPolicy::Strict),
            "permissive" => Ok(IdPolicy::Permissive),
            other => Err(ProtocolError::InvalidParams(format!("unknown id policy {other:?}"))),
        }
    }
}

/// Public system parameters. The JSON form is the config file format:
/// `{ "p": hex, "hash": "sha2-256", "delta_t_s": int, "id_policy": "strict"|"permissive" }`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawParams", deny_unknown_fields)]
pub struct SystemParams {
    pub p: Prime,
    pub hash: HashId,
    pub delta_t_s: u64,
    pub id_policy: IdPolicy,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawParams {
    p: Prime,
    hash: HashId,
    delta_t_s: u64,
    id_policy: IdPolicy,
}

impl TryFrom<RawParams> for SystemParams {
    type Error = ProtocolError;

    fn try_from(raw: RawParams) -> Result<Self, Self::Error> {
        SystemParams::new(raw.p, raw.hash, raw.delta_t_s, raw.id_policy)
    }
}

impl SystemParams {
    pub fn new(p: Prime, hash: HashId, delta_t_s: u64, id_policy: IdPolicy) -> Result<Self, ProtocolError> {
        if delta_t_s == 0 {
            return Err(ProtocolError::InvalidParams("delta_t_s must be positive".into()));
        }
        Ok(SystemParams { p, hash, delta_t_s, id_policy })
    }

    /// SHA-256, 60 s window.
    pub fn with_defaults(p: Prime, id_policy: IdPolicy) -> Self {
        SystemParams { p, hash: HashId::Sha2_256, delta_t_s: DEFAULT_DELTA_T_S, id_policy }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("params serialize")
    }

    pub fn from_json(s: &str) -> Result<Self, ProtocolError> {
        serde_json::from_str(s).map_err(|e| ProtocolError::InvalidParams(e.to_string()))
    }
}

/// The server's secret exponent `x_s` and the key of `Red`.
///
/// Deliberately implements neither `Serialize` nor a revealing `Debug`;
/// the only way out is [`ServerSecret::to_secret_file`].
#[derive(Clone, PartialEq, Eq)]
pub struct ServerSecret {
    x_s: BigUint,
    red_key: Vec<u8>,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct SecretFile {
    #[serde(with = "hex")]
    x_s: BigUint,
    red_key: String,
}

impl ServerSecret {
    pub fn new(x_s: BigUint, red_key: Vec<u8>, params: &SystemParams) -> Result<Self, ProtocolError> {
        if !params.p.in_range(&x_s, 2, 2) {
            return Err(ProtocolError::InvalidParams("x_s must lie in [2, p-2]".into()));
        }
        if red_key.len() < MIN_RED_KEY_LEN {
            return Err(ProtocolError::InvalidParams(format!(
                "red_key must be at least {MIN_RED_KEY_LEN} bytes"
            )));
        }
        Ok(ServerSecret { x_s, red_key })
    }

    pub fn generate(params: &SystemParams, rng: &mut SeededRng) -> Self {
        let x_s = modmath::sample_in(&params.p, 2, 2, rng);
        let mut red_key = vec![0u8; 32];
        rng.fill_bytes(&mut red_key);
        ServerSecret { x_s, red_key }
    }

    pub fn x_s(&self) -> &BigUint {
        &self.x_s
    }

    /// Demo-grade secret file: plain JSON, no encryption.
    pub fn to_secret_file(&self) -> String {
        let file = SecretFile {
            x_s: self.x_s.clone(),
            red_key: self.red_key.iter().map(|b| format!("{b:02x}")).collect(),
        };
        serde_json::to_string_pretty(&file).expect("secret serialize")
    }

    pub fn from_secret_file(s: &str, params: &SystemParams) -> Result<Self, ProtocolError> {
        let file: SecretFile =
            serde_json::from_str(s).map_err(|e| ProtocolError::InvalidParams(e.to_string()))?;
        let key = &file.red_key;
        if !key.len().is_multiple_of(2) || !key.bytes().all(|b| b.is_ascii_hexdigit()) {
            return Err(ProtocolError::InvalidParams("red_key must be hex bytes".into()));
        }
        let red_key = (0..key.len())
            .step_by(2)
            .map(|i| u8::from_str_radix(&key[i..i + 2], 16).expect("validated hex"))
            .collect();
        ServerSecret::new(file.x_s, red_key, params)
    }
}

impl fmt::Debug for ServerSecret {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ServerSecret").finish_non_exhaustive()
    }
}

/// A user identity: the typed decimal string and its residue mod p.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Identity {
    raw: String,
    numeric: BigUint,
}

impl Identity {
    /// Any nonempty decimal string; policy is checked separately.
    pub fn new(raw: &str, p: &Prime) -> Result<Self, ProtocolError> {
        if raw.is_empty() || !raw.bytes().all(|b| b.is_ascii_digit()) {
            return Err(ProtocolError::BadIdentityFormat(raw.to_string()));
        }
        let value = BigUint::from_str_radix(raw, 10).expect("validated digits");
        Ok(Identity { raw: raw.to_string(), numeric: value % p.value() })
    }

    /// The canonical decimal spelling of a residue, as an attacker would key it in.
    pub fn from_numeric(n: &BigUint, p: &Prime) -> Self {
        Identity { raw: n.to_str_radix(10), numeric: n % p.value() }
    }

    pub fn raw(&self) -> &str {
        &self.raw
    }

    pub fn numeric(&self) -> &BigUint {
        &self.numeric
    }

    /// Residue is 0, 1 or p-1, which would make `PW = ID^x_s` trivial.
    pub fn is_degenerate(&self, p: &Prime) -> bool {
        self.numeric.is_zero() || self.numeric.is_one() || self.numeric == p.group_order()
    }
}

impl fmt::Display for Identity {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.raw)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Timestamp(pub u64);

impl Timestamp {
    pub fn plus(self, secs: u64) -> Timestamp {
        Timestamp(self.0.saturating_add(secs))
    }

    pub fn offset(self, secs: i64) -> Timestamp {
        Timestamp(self.0.saturating_add_signed(secs))
    }
}

impl fmt::Display for Timestamp {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SchemeTag {
    #[serde(rename = "hwang-li")]
    HwangLi,
    #[serde(rename = "slh")]
    Slh,
    #[serde(rename = "awasthi-lal")]
    AwasthiLal,
    #[serde(rename = "improved")]
    Improved,
}

impl SchemeTag {
    pub const ALL: [SchemeTag; 4] =
        [SchemeTag::HwangLi, SchemeTag::Slh, SchemeTag::AwasthiLal, SchemeTag::Improved];

    pub fn as_str(self) -> &'static str {
        match self {
            SchemeTag::HwangLi => "hwang-li",
            SchemeTag::Slh => "slh",
            SchemeTag::AwasthiLal => "awasthi-lal",
            SchemeTag::Improved => "improved",
        }
    }

    /// Whether the server issues a shadow identity `SID = Red(ID)`.
    pub fn uses_red(self) -> bool {
        !matches!(self, SchemeTag::HwangLi)
    }

    /// Whether the wire's identity field carries the SID instead of the ID.
    pub fn sends_sid(self) -> bool {
        matches!(self, SchemeTag::Slh)
    }
}

impl fmt::Display for SchemeTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for SchemeTag {
    type Err = ProtocolError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        SchemeTag::ALL
            .into_iter()
            .find(|t| t.as_str() == s)
            .ok_or_else(|| ProtocolError::InvalidParams(format!("unknown scheme {s:?}")))
    }
}

/// The identity field of a login request: a typed ID, or a shadow identity
/// for SLH.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum ClaimedId {
    Id(String),
    Sid(BigUint),
}

/// `L_R = (claimed, C1, C2, T)`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LoginRequest {
    pub scheme: SchemeTag,
    pub claimed: ClaimedId,
    pub c1: BigUint,
    pub c2: BigUint,
    pub t: Timestamp,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct WireRequest {
    scheme: SchemeTag,
    id: String,
    c1: String,
    c2: String,
    t: String,
}

/// Canonical JSON: keys `scheme, id, c1, c2, t` in that order, no
/// whitespace; integers in lowercase hex; a typed ID is sent as its
/// decimal string.
pub fn serialize_request(req: &LoginRequest) -> Vec<u8> {
    let id = match &req.claimed {
        ClaimedId::Id(raw) => raw.clone(),
        ClaimedId::Sid(sid) => hex::encode(sid),
    };
    let wire = WireRequest {
        scheme: req.scheme,
        id,
        c1: hex::encode(&req.c1),
        c2: hex::encode(&req.c2),
        t: format!("{:x}", req.t.0),
    };
    serde_json::to_vec(&wire).expect("request serialize")
}

pub fn deserialize_request(bytes: &[u8]) -> Result<LoginRequest, ProtocolError> {
    let malformed = |m: String| ProtocolError::MalformedRequest(m);
    let wire: WireRequest = serde_json::from_slice(bytes).map_err(|e| malformed(e.to_string()))?;
    let int = |field: &str, s: &str| hex::decode(s).map_err(|e| malformed(format!("{field}: {e}")));
    let claimed = if wire.scheme.sends_sid() {
        ClaimedId::Sid(int("id", &wire.id)?)
    } else {
        if wire.id.is_empty() || !wire.id.bytes().all(|b| b.is_ascii_digit()) {
            return Err(malformed(format!("id: not a decimal identity: {:?}", wire.id)));
        }
        ClaimedId::Id(wire.id)
    };
    let t = int("t", &wire.t)?;
    let t = u64::try_from(t).map_err(|_| malformed("t: exceeds 64 bits".into()))?;
    Ok(LoginRequest {
        scheme: wire.scheme,
        claimed,
        c1: int("c1", &wire.c1)?,
        c2: int("c2", &wire.c2)?,
        t: Timestamp(t),
    })
}

/// Exponent `t = f(T xor PW) mod (p - 1)`.
///
/// Both operands are laid out big-endian in `ceil(bitlen(p)/8)` bytes; `T`
/// occupies the low 8 bytes (truncated to the width when p is narrower than
/// 64 bits).
pub fn t_exponent(t: Timestamp, pw: &BigUint, params: &SystemParams) -> BigUint {
    t_exponent_with(t, pw, &params.p, params.hash)
}

pub fn t_exponent_with(t: Timestamp, pw: &BigUint, p: &Prime, hash: HashId) -> BigUint {
    debug_assert!(pw < p.value());
    let width = p.byte_width();
    let mut buf = vec![0u8; width];
    let pw_bytes = pw.to_bytes_be();
    buf[width - pw_bytes.len()..].copy_from_slice(&pw_bytes);
    let t_bytes = t.0.to_be_bytes();
    let n = t_bytes.len().min(width);
    for (dst, src) in buf[width - n..].iter_mut().zip(&t_bytes[8 - n..]) {
        *dst ^= src;
    }
    BigUint::from_bytes_be(&hash.digest(&buf)) % p.group_order()
}

/// `SID = Red(ID)`: HMAC-SHA256 under the server's key over the raw ID
/// bytes, mapped into `[2, p-2]`.
pub fn red(secret: &ServerSecret, id: &Identity, params: &SystemParams) -> Result<BigUint, ProtocolError> {
    if !check_id_format(id, params) {
        return Err(ProtocolError::BadIdentityFormat(id.raw.clone()));
    }
    let mut mac = Hmac::<Sha256>::new_from_slice(&secret.red_key).expect("hmac accepts any key length");
    mac.update(id.raw.as_bytes());
    let digest = BigUint::from_bytes_be(&mac.finalize().into_bytes());
    Ok(digest % (params.p.value() - 3u32) + 2u32)
}

/// STRICT: 12 digits, Luhn-valid. PERMISSIVE: residue in `[2, p-2]`.
pub fn check_id_format(id: &Identity, params: &SystemParams) -> bool {
    match params.id_policy {
        IdPolicy::Strict => id.raw.len() == STRICT_ID_DIGITS && luhn_valid(&id.raw),
        IdPolicy::Permissive => params.p.in_range(&id.numeric, 2, 2),
    }
}

/// Format check on an untrusted string, which may not even be decimal.
pub fn check_raw_id_format(raw: &str, params: &SystemParams) -> bool {
    Identity::new(raw, &params.p).is_ok_and(|id| check_id_format(&id, params))
}

/// Shadow identities are server-generated residues; the only format rule
/// is the `Red` range `[2, p-2]`.
pub fn check_sid_format(sid: &BigUint, params: &SystemParams) -> bool {
    params.p.in_range(sid, 2, 2)
}

pub fn luhn_valid(digits: &str) -> bool {
    if digits.is_empty() || !digits.bytes().all(|b| b.is_ascii_digit()) {
        return false;
    }
    let sum: u32 = digits
        .bytes()
        .rev()
        .enumerate()
        .map(|(i, b)| {
            let d = u32::from(b - b'0');
            if i % 2 == 1 {
                let dd = d * 2;
                if dd > 9 { dd - 9 } else { dd }
            } else {
                d
            }
        })
        .sum();
    sum.is_multiple_of(10)
}

/// Appends the Luhn check digit to an 11-digit body.
pub fn with_luhn_digit(body: &str) -> String {
    (0..10)
        .map(|c| format!("{body}{c}"))
        .find(|s| luhn_valid(s))
        .expect("exactly one check digit satisfies Luhn")
}

/// True when `0 <= t_c - t <= delta_t`; future-dated requests fail.
pub fn check_freshness(t: Timestamp, t_c: Timestamp, params: &SystemParams) -> bool {
    t_c >= t && t_c.0 - t.0 <= params.delta_t_s
}
