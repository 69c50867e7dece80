//! The four remote-user authentication schemes behind one interface.
//!
//! | scheme        | base `B`     | user keys in     | wire identity |
//! |---------------|--------------|------------------|---------------|
//! | `hwang-li`    | `ID`         | `ID, PW`         | `ID`          |
//! | `slh`         | `SID`        | `SID, PW`        | `SID`         |
//! | `awasthi-lal` | `SID`        | `ID, PW`         | `ID`          |
//! | `improved`    | `SID`        | `SID ‖ ID, PW`   | `ID`          |
//!
//! In every scheme `PW = B^x_s mod p`, the card sends
//! `C1 = B^r`, `C2 = B^f(T xor PW) · PW^r`, and the server accepts iff
//! `C2 = C1^x_s · B^f(T xor PW)`.
//!
//! Awasthi-Lal's card needs `SID` to form `C1` but is never given it, so
//! its login phase always fails with [`SchemeError::MissingSid`].

use num_bigint::BigUint;
use serde::{Deserialize, Serialize};

use crate::error::{ProtocolError, SchemeError};
use crate::modmath::{self, hex, mod_inv, mod_pow, Prime};
use crate::protocol::{
    check_freshness, check_id_format, check_sid_format, red, t_exponent, t_exponent_with, ClaimedId,
    HashId, Identity, LoginRequest, SchemeTag, ServerSecret, SystemParams, Timestamp,
};
use crate::rng::SeededRng;

/// What the server hands the user at registration.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Credential {
    pub scheme: SchemeTag,
    pub id: Identity,
    /// Present for SLH and the improved scheme. Awasthi-Lal computes a SID
    /// server-side but the card-side credential carries none.
    pub sid: Option<BigUint>,
    pub pw: BigUint,
}

#[derive(Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct CredentialFile {
    scheme: SchemeTag,
    id: String,
    #[serde(with = "hex::option")]
    sid: Option<BigUint>,
    #[serde(with = "hex")]
    pw: BigUint,
}

impl Credential {
    pub fn to_json(&self) -> String {
        let file = CredentialFile {
            scheme: self.scheme,
            id: self.id.raw().to_string(),
            sid: self.sid.clone(),
            pw: self.pw.clone(),
        };
        serde_json::to_string_pretty(&file).expect("credential serialize")
    }

    pub fn from_json(s: &str, p: &Prime) -> Result<Self, ProtocolError> {
        let file: CredentialFile =
            serde_json::from_str(s).map_err(|e| ProtocolError::InvalidParams(e.to_string()))?;
        Ok(Credential { scheme: file.scheme, id: Identity::new(&file.id, p)?, sid: file.sid, pw: file.pw })
    }

    /// What the user physically types into the card reader for this scheme.
    pub fn card_input(&self) -> Result<CardInput, SchemeError> {
        let pw = self.pw.clone();
        Ok(match self.scheme {
            SchemeTag::HwangLi => CardInput::HwangLi { id: self.id.clone(), pw },
            SchemeTag::Slh => CardInput::Slh { sid: self.sid.clone().ok_or(SchemeError::MissingSid)?, pw },
            SchemeTag::AwasthiLal => CardInput::AwasthiLal { id: self.id.clone(), pw },
            SchemeTag::Improved => CardInput::Improved {
                sid: self.sid.clone().ok_or(SchemeError::MissingSid)?,
                id: self.id.clone(),
                pw,
            },
        })
    }
}

/// The card holds only public parameters; there is no field from which
/// `PW`, `x_s` or the `Red` key could be recovered.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SmartCard {
    pub scheme: SchemeTag,
    pub hash: HashId,
    pub p: Prime,
}

impl SmartCard {
    pub fn issue(scheme: SchemeTag, params: &SystemParams) -> Self {
        SmartCard { scheme, hash: params.hash, p: params.p.clone() }
    }
}

/// The card-reader inputs for one login, per scheme.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum CardInput {
    HwangLi { id: Identity, pw: BigUint },
    Slh { sid: BigUint, pw: BigUint },
    AwasthiLal { id: Identity, pw: BigUint },
    Improved { sid: BigUint, id: Identity, pw: BigUint },
}

impl CardInput {
    pub fn scheme(&self) -> SchemeTag {
        match self {
            CardInput::HwangLi { .. } => SchemeTag::HwangLi,
            CardInput::Slh { .. } => SchemeTag::Slh,
            CardInput::AwasthiLal { .. } => SchemeTag::AwasthiLal,
            CardInput::Improved { .. } => SchemeTag::Improved,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum Verdict {
    Accept,
    Reject,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum RejectReason {
    Ok,
    BadIdFormat,
    StaleTimestamp,
    EquationMismatch,
}

/// `verdict == Accept` iff `reason == Ok`; the constructors are the only
/// way to build one.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
pub struct VerifyResult {
    verdict: Verdict,
    reason: RejectReason,
}

impl VerifyResult {
    pub const ACCEPT: VerifyResult = VerifyResult { verdict: Verdict::Accept, reason: RejectReason::Ok };

    pub fn reject(reason: RejectReason) -> Self {
        assert!(reason != RejectReason::Ok);
        VerifyResult { verdict: Verdict::Reject, reason }
    }

    pub fn verdict(&self) -> Verdict {
        self.verdict
    }

    pub fn reason(&self) -> RejectReason {
        self.reason
    }

    pub fn accepted(&self) -> bool {
        self.verdict == Verdict::Accept
    }
}

/// Server-side registration over the (trusted, in-process) secure channel.
pub fn register(
    secret: &ServerSecret,
    params: &SystemParams,
    id: &Identity,
    scheme: SchemeTag,
) -> Result<(Credential, SmartCard), SchemeError> {
    if !check_id_format(id, params) {
        return Err(ProtocolError::BadIdentityFormat(id.raw().to_string()).into());
    }
    if id.is_degenerate(&params.p) {
        return Err(ProtocolError::DegenerateIdentity(id.raw().to_string()).into());
    }
    let (base, sid) = if scheme.uses_red() {
        let sid = red(secret, id, params)?;
        (sid.clone(), Some(sid))
    } else {
        (id.numeric().clone(), None)
    };
    let pw = mod_pow(&base, secret.x_s(), &params.p);
    let sid = match scheme {
        SchemeTag::AwasthiLal => None,
        _ => sid,
    };
    let cred = Credential { scheme, id: id.clone(), sid, pw };
    Ok((cred, SmartCard::issue(scheme, params)))
}

/// Card-side login: draws `r` and builds `(claimed, C1, C2, T)`.
pub fn make_login(
    card: &SmartCard,
    keyed: &CardInput,
    t: Timestamp,
    rng: &mut SeededRng,
) -> Result<LoginRequest, SchemeError> {
    let (base, pw, claimed) = login_inputs(card, keyed)?;
    let r = modmath::sample_exponent(&card.p, rng);
    Ok(build_login(card, base, pw, claimed, t, &r))
}

/// Validates the keyed inputs and picks the base, password and wire identity.
fn login_inputs<'a>(
    card: &SmartCard,
    keyed: &'a CardInput,
) -> Result<(&'a BigUint, &'a BigUint, ClaimedId), SchemeError> {
    if keyed.scheme() != card.scheme {
        return Err(SchemeError::InputMismatch {
            card: card.scheme.to_string(),
            keyed: keyed.scheme().to_string(),
        });
    }
    let (base, pw, claimed) = match keyed {
        CardInput::HwangLi { id, pw } => (id.numeric(), pw, ClaimedId::Id(id.raw().to_string())),
        CardInput::Slh { sid, pw } => (sid, pw, ClaimedId::Sid(sid.clone())),
        // Step 2 needs C1 = SID^r; the card has no SID and the user typed only (ID, PW).
        CardInput::AwasthiLal { .. } => return Err(SchemeError::MissingSid),
        CardInput::Improved { sid, id, pw } => (sid, pw, ClaimedId::Id(id.raw().to_string())),
    };
    if base >= card.p.value() {
        let shown = match &claimed {
            ClaimedId::Id(raw) => raw.clone(),
            ClaimedId::Sid(sid) => hex::encode(sid),
        };
        return Err(ProtocolError::BadIdentityFormat(shown).into());
    }
    if !card.p.in_range(pw, 1, 1) {
        return Err(SchemeError::PasswordOutOfRange);
    }
    Ok((base, pw, claimed))
}

fn build_login(
    card: &SmartCard,
    base: &BigUint,
    pw: &BigUint,
    claimed: ClaimedId,
    t: Timestamp,
    r: &BigUint,
) -> LoginRequest {
    let p = &card.p;
    let c1 = mod_pow(base, r, p);
    let texp = t_exponent_with(t, pw, p, card.hash);
    let m = mod_pow(base, &texp, p);
    let c2 = m * mod_pow(pw, r, p) % p.value();
    LoginRequest { scheme: card.scheme, claimed, c1, c2, t }
}

/// Server-side authentication: format, freshness, then the verification
/// equation in multiplication form.
pub fn verify(secret: &ServerSecret, params: &SystemParams, req: &LoginRequest, t_c: Timestamp) -> VerifyResult {
    let Some(base) = recover_base(secret, params, req) else {
        return VerifyResult::reject(RejectReason::BadIdFormat);
    };
    if !check_freshness(req.t, t_c, params) {
        return VerifyResult::reject(RejectReason::StaleTimestamp);
    }
    if multiplication_form_holds(secret, params, &base, req) {
        VerifyResult::ACCEPT
    } else {
        VerifyResult::reject(RejectReason::EquationMismatch)
    }
}

/// Checks the wire identity and derives the base `B`. `None` means the
/// identity failed the format check.
fn recover_base(secret: &ServerSecret, params: &SystemParams, req: &LoginRequest) -> Option<BigUint> {
    match (&req.claimed, req.scheme) {
        // SID arrives on the wire and Red cannot be inverted, so it is taken as is.
        (ClaimedId::Sid(sid), SchemeTag::Slh) => check_sid_format(sid, params).then(|| sid.clone()),
        (ClaimedId::Id(raw), scheme) if !scheme.sends_sid() => {
            let id = Identity::new(raw, &params.p).ok()?;
            if !check_id_format(&id, params) || id.is_degenerate(&params.p) {
                return None;
            }
            if scheme.uses_red() {
                red(secret, &id, params).ok()
            } else {
                Some(id.numeric().clone())
            }
        }
        _ => None,
    }
}

/// `C2 == C1^x_s · B^f(T xor PW) mod p`, with `PW = B^x_s`.
pub fn multiplication_form_holds(
    secret: &ServerSecret,
    params: &SystemParams,
    base: &BigUint,
    req: &LoginRequest,
) -> bool {
    let p = &params.p;
    if &req.c1 >= p.value() || &req.c2 >= p.value() || base >= p.value() {
        return false;
    }
    let pw = mod_pow(base, secret.x_s(), p);
    let texp = t_exponent(req.t, &pw, params);
    let rhs = mod_pow(&req.c1, secret.x_s(), p) * mod_pow(base, &texp, p) % p.value();
    req.c2 == rhs
}

/// `C2 · (C1^x_s)^-1 == B^f(T xor PW) mod p`, the Hwang-Li formulation.
pub fn inverse_form_holds(secret: &ServerSecret, params: &SystemParams, base: &BigUint, req: &LoginRequest) -> bool {
    let p = &params.p;
    if &req.c1 >= p.value() || &req.c2 >= p.value() || base >= p.value() {
        return false;
    }
    let Ok(inv) = mod_inv(&mod_pow(&req.c1, secret.x_s(), p), p) else {
        return false;
    };
    let pw = mod_pow(base, secret.x_s(), p);
    let texp = t_exponent(req.t, &pw, params);
    &req.c2 * inv % p.value() == mod_pow(base, &texp, p)
}

/// One random honest instance for the equation harness: a base in
/// `[2, p-2]`, its password, and a login built with a random `r` and `T`.
pub fn random_instance(
    secret: &ServerSecret,
    params: &SystemParams,
    rng: &mut SeededRng,
) -> (BigUint, LoginRequest) {
    use rand::Rng;
    let base = modmath::sample_in(&params.p, 2, 2, rng);
    let pw = mod_pow(&base, secret.x_s(), &params.p);
    let card = SmartCard::issue(SchemeTag::Slh, params);
    let r = modmath::sample_exponent(&params.p, rng);
    let t = Timestamp(rng.gen_range(0..1u64 << 40));
    let req = build_login(&card, &base, &pw, ClaimedId::Sid(base.clone()), t, &r);
    (base, req)
}

/// Property harness: over `trials` random `(B, r, T)`, both verification
/// forms must accept.
pub fn verify_equation_identity(
    params: &SystemParams,
    secret: &ServerSecret,
    trials: usize,
    rng: &mut SeededRng,
) -> bool {
    equation_identity_with(params, secret, trials, rng, |_| {})
}

fn equation_identity_with(
    params: &SystemParams,
    secret: &ServerSecret,
    trials: usize,
    rng: &mut SeededRng,
    tamper: impl Fn(&mut LoginRequest),
) -> bool {
    (0..trials).all(|_| {
        let (base, mut req) = random_instance(secret, params, rng);
        tamper(&mut req);
        let mul = multiplication_form_holds(secret, params, &base, &req);
        let inv = inverse_form_holds(secret, params, &base, &req);
        mul && inv
    })
}

/// Server handle for callers that may register users but never see the secret.
pub trait Registrar {
    fn params(&self) -> &SystemParams;
    fn register(&self, id: &Identity, scheme: SchemeTag) -> Result<Credential, SchemeError>;
}

/// An authentication server: parameters plus the secret.
#[derive(Debug, Clone)]
pub struct Server {
    params: SystemParams,
    secret: ServerSecret,
}

impl Server {
    pub fn new(params: SystemParams, secret: ServerSecret) -> Self {
        Server { params, secret }
    }

    pub fn secret(&self) -> &ServerSecret {
        &self.secret
    }

    pub fn verify(&self, req: &LoginRequest, t_c: Timestamp) -> VerifyResult {
        verify(&self.secret, &self.params, req, t_c)
    }
}

impl Registrar for Server {
    fn params(&self) -> &SystemParams {
        &self.params
    }

    fn register(&self, id: &Identity, scheme: SchemeTag) -> Result<Credential, SchemeError> {
        register(&self.secret, &self.params, id, scheme).map(|(cred, _)| cred)
    }
}
