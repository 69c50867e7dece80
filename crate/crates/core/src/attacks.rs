//! The published attacks, as executable forgeries.
//!
//! All four forgeries exploit the same homomorphism: if `PW = B^x_s` then
//! `PW^k = (B^k)^x_s` and `PW_1 · PW_2 = (B_1 · B_2)^x_s`, so a legitimate
//! user can mint new x_s-consistent `(B, PW)` pairs without knowing `x_s`.
//! The masquerade attack goes the other way: register `ID_A^k` and take
//! the k-th root of the password that comes back.
//!
//! Against the improved scheme every forgery still yields a consistent
//! `(SID, PW)` pair, but the wire carries `ID` and the server re-derives
//! `SID = Red(ID)` with a keyed function the attacker cannot invert.

use std::fmt;
use std::str::FromStr;

use num_bigint::BigUint;
use num_integer::Integer;
use num_traits::One;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{AttackError, ModMathError};
use crate::modmath::{self, exp_inv, mod_pow, Prime};
use crate::protocol::{
    check_id_format, with_luhn_digit, IdPolicy, Identity, LoginRequest, SchemeTag, ServerSecret, SystemParams,
    Timestamp,
};
use crate::rng::{substream, SeededRng};
use crate::schemes::{make_login, CardInput, Credential, Registrar, Server, SmartCard, VerifyResult};

/// Start of the virtual clock used by attack attempts.
pub const ATTACK_EPOCH: Timestamp = Timestamp(1_700_000_000);

/// Victims pooled for the coalition forgery.
pub const COALITION_SIZE: usize = 3;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AttackTag {
    /// Square an (ID, PW) pair.
    #[serde(rename = "chan-cheng")]
    ChanCheng,
    /// Raise an (ID, PW) pair to an arbitrary k.
    #[serde(rename = "chang-hwang")]
    ChangHwang,
    /// Multiply the pairs of a coalition.
    #[serde(rename = "group")]
    Group,
    /// Register `ID_A^k` and take the k-th root of its password.
    #[serde(rename = "masquerade")]
    Masquerade,
    /// Chang-Hwang over shadow identities.
    #[serde(rename = "leung")]
    Leung,
}

impl AttackTag {
    pub const ALL: [AttackTag; 5] =
        [AttackTag::ChanCheng, AttackTag::ChangHwang, AttackTag::Group, AttackTag::Masquerade, AttackTag::Leung];

    pub fn as_str(self) -> &'static str {
        match self {
            AttackTag::ChanCheng => "chan-cheng",
            AttackTag::ChangHwang => "chang-hwang",
            AttackTag::Group => "group",
            AttackTag::Masquerade => "masquerade",
            AttackTag::Leung => "leung",
        }
    }

    /// Leung's attack is stated over shadow identities, so it has no target
    /// in Hwang-Li.
    pub fn applies_to(self, scheme: SchemeTag) -> bool {
        !(self == AttackTag::Leung && !scheme.uses_red())
    }
}

impl fmt::Display for AttackTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for AttackTag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        AttackTag::ALL
            .into_iter()
            .find(|a| a.as_str() == s)
            .ok_or_else(|| format!("unknown attack {s:?}"))
    }
}

/// A forged `(ID or SID, PW)` pair.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ForgedPair {
    #[serde(with = "modmath::hex")]
    pub claimed: BigUint,
    #[serde(with = "modmath::hex")]
    pub pw: BigUint,
    pub provenance: AttackTag,
}

pub fn chan_cheng_forge(id_a: &BigUint, pw_a: &BigUint, p: &Prime) -> ForgedPair {
    ForgedPair {
        claimed: id_a * id_a % p.value(),
        pw: pw_a * pw_a % p.value(),
        provenance: AttackTag::ChanCheng,
    }
}

pub fn chang_hwang_forge(id_a: &BigUint, pw_a: &BigUint, k: &BigUint, p: &Prime) -> ForgedPair {
    ForgedPair { claimed: mod_pow(id_a, k, p), pw: mod_pow(pw_a, k, p), provenance: AttackTag::ChangHwang }
}

pub fn group_forge(pairs: &[(BigUint, BigUint)], p: &Prime) -> Result<ForgedPair, AttackError> {
    if pairs.is_empty() {
        return Err(AttackError::EmptyCoalition);
    }
    let (claimed, pw) = pairs.iter().fold((BigUint::one(), BigUint::one()), |(c, w), (id, pw)| {
        (c * id % p.value(), w * pw % p.value())
    });
    Ok(ForgedPair { claimed, pw, provenance: AttackTag::Group })
}

pub fn leung_forge(sid_a: &BigUint, pw_a: &BigUint, k: &BigUint, p: &Prime) -> ForgedPair {
    ForgedPair { claimed: mod_pow(sid_a, k, p), pw: mod_pow(pw_a, k, p), provenance: AttackTag::Leung }
}

/// Everything the masquerader learns from one derived registration.
#[derive(Debug, Clone)]
pub struct MasqueradeMaterial {
    pub id_b: Identity,
    pub issued: Credential,
    /// `k^-1 mod (p-1)`
    pub k_inv: BigUint,
    /// `PW_B^(k^-1)`: the victim's password whenever `PW` is a power of the raw ID.
    pub recovered_pw: BigUint,
}

/// Registers `ID_B = ID_A^k` and takes the k-th root of `PW_B`.
///
/// Exponent inversion is mod `p-1`, so `k` must be coprime to `p-1`; the
/// condition `gcd(k, p) = 1` is vacuous for a prime `p` and does not
/// suffice. The recovery `PW_A = PW_B^(k^-1)` is the k-th root of `PW_B`.
pub fn masquerade_material(
    id_a: &Identity,
    k: &BigUint,
    reg: &dyn Registrar,
    scheme: SchemeTag,
) -> Result<MasqueradeMaterial, AttackError> {
    let p = &reg.params().p;
    let k_inv = exp_inv(k, &p.group_order()).map_err(|e| match e {
        ModMathError::NotCoprime => AttackError::NotCoprime,
        other => AttackError::RegistrationRefused(other.to_string()),
    })?;
    let id_b = Identity::from_numeric(&mod_pow(id_a.numeric(), k, p), p);
    let issued = reg.register(&id_b, scheme).map_err(|e| AttackError::RegistrationRefused(e.to_string()))?;
    let recovered_pw = mod_pow(&issued.pw, &k_inv, p);
    Ok(MasqueradeMaterial { id_b, issued, k_inv, recovered_pw })
}

/// The password the masquerader believes belongs to `id_a`.
pub fn slh_masquerade(
    id_a: &Identity,
    k: &BigUint,
    reg: &dyn Registrar,
    scheme: SchemeTag,
) -> Result<BigUint, AttackError> {
    masquerade_material(id_a, k, reg, scheme).map(|m| m.recovered_pw)
}

/// A fresh identity satisfying the active policy and not degenerate.
pub fn random_identity(params: &SystemParams, rng: &mut SeededRng) -> Identity {
    loop {
        let id = match params.id_policy {
            IdPolicy::Strict => {
                let body = rng.gen_range(10_000_000_000u64..100_000_000_000);
                Identity::new(&with_luhn_digit(&body.to_string()), &params.p).expect("digits")
            }
            IdPolicy::Permissive => Identity::from_numeric(&modmath::sample_in(&params.p, 2, 2, rng), &params.p),
        };
        if check_id_format(&id, params) && !id.is_degenerate(&params.p) {
            return id;
        }
    }
}

/// Which cells the published analysis says are breakable.
pub fn expected_success(attack: AttackTag, scheme: SchemeTag, policy: IdPolicy) -> bool {
    match scheme {
        // Forged IDs are arbitrary residues; STRICT formatting filters nearly all of them.
        SchemeTag::HwangLi => policy == IdPolicy::Permissive,
        // Shadow identities travel on the wire and are not re-derived.
        SchemeTag::Slh => attack != AttackTag::Masquerade,
        SchemeTag::AwasthiLal | SchemeTag::Improved => false,
    }
}

/// Trace of one attack attempt, detailed enough for a transcript.
#[derive(Debug, Clone)]
pub struct Attempt {
    pub victims: Vec<Credential>,
    pub forged: Option<ForgedPair>,
    pub request: Option<LoginRequest>,
    pub sent_at: Timestamp,
    pub verdict: Option<VerifyResult>,
    /// Whether the forged identity still satisfies the identity policy
    /// (only meaningful for forgeries over raw IDs).
    pub format_survived: Option<bool>,
    pub note: String,
}

impl Attempt {
    pub fn accepted(&self) -> bool {
        self.verdict.is_some_and(|v| v.accepted())
    }
}

fn victim(server: &Server, scheme: SchemeTag, rng: &mut SeededRng) -> Credential {
    let id = random_identity(server.params(), rng);
    server.register(&id, scheme).expect("policy-conforming identity registers")
}

/// The base the user holds: the ID for Hwang-Li, the SID elsewhere.
fn held_base(cred: &Credential) -> Option<BigUint> {
    match cred.scheme {
        SchemeTag::HwangLi => Some(cred.id.numeric().clone()),
        _ => cred.sid.clone(),
    }
}

fn coprime_exponent(p: &Prime, rng: &mut SeededRng) -> BigUint {
    let n = p.group_order();
    loop {
        let k = modmath::sample_exponent(p, rng);
        if k.gcd(&n).is_one() && k > BigUint::one() {
            return k;
        }
    }
}

/// One attack attempt against `scheme`, with honest timestamps: the forged
/// login is sent at `t` and arrives one second later.
pub fn attempt_attack(
    attack: AttackTag,
    scheme: SchemeTag,
    server: &Server,
    t: Timestamp,
    rng: &mut SeededRng,
) -> Result<Attempt, AttackError> {
    if !attack.applies_to(scheme) {
        return Err(AttackError::UnsupportedCombination {
            attack: attack.to_string(),
            scheme: scheme.to_string(),
        });
    }
    let params = server.params().clone();
    let p = &params.p;
    let mut attempt = Attempt {
        victims: Vec::new(),
        forged: None,
        request: None,
        sent_at: t,
        verdict: None,
        format_survived: None,
        note: String::new(),
    };

    let keyed = if attack == AttackTag::Masquerade {
        let target = victim(server, scheme, rng);
        let k = coprime_exponent(p, rng);
        attempt.victims.push(target.clone());
        let material = match masquerade_material(&target.id, &k, server, scheme) {
            Ok(m) => m,
            Err(e) => {
                attempt.note = e.to_string();
                return Ok(attempt);
            }
        };
        attempt.forged = Some(ForgedPair {
            claimed: target.id.numeric().clone(),
            pw: material.recovered_pw.clone(),
            provenance: attack,
        });
        let pw = material.recovered_pw;
        match scheme {
            SchemeTag::HwangLi => CardInput::HwangLi { id: target.id, pw },
            // the victim's SID is visible on the SLH wire
            SchemeTag::Slh => CardInput::Slh { sid: target.sid.expect("slh issues sid"), pw },
            SchemeTag::AwasthiLal => CardInput::AwasthiLal { id: target.id, pw },
            SchemeTag::Improved => {
                let sid_b = material.issued.sid.expect("improved issues sid");
                CardInput::Improved { sid: mod_pow(&sid_b, &material.k_inv, p), id: target.id, pw }
            }
        }
    } else {
        let n = if attack == AttackTag::Group { COALITION_SIZE } else { 1 };
        attempt.victims = (0..n).map(|_| victim(server, scheme, rng)).collect();
        let first = &attempt.victims[0];
        let Some(base) = held_base(first) else {
            // Awasthi-Lal hands out no SID, so the attacker keys in her own (ID, PW).
            let card = SmartCard::issue(scheme, &params);
            let keyed = first.card_input().expect("credential input");
            attempt.note = match make_login(&card, &keyed, t, rng) {
                Err(e) => format!("login phase cannot run: {e}"),
                Ok(_) => unreachable!("awasthi-lal login has no SID"),
            };
            return Ok(attempt);
        };
        let forged = match attack {
            AttackTag::ChanCheng => chan_cheng_forge(&base, &first.pw, p),
            AttackTag::ChangHwang => chang_hwang_forge(&base, &first.pw, &modmath::sample_in(p, 2, 2, rng), p),
            AttackTag::Leung => leung_forge(&base, &first.pw, &modmath::sample_in(p, 2, 2, rng), p),
            AttackTag::Group => {
                let pairs: Vec<_> = attempt
                    .victims
                    .iter()
                    .map(|v| (held_base(v).expect("sid issued"), v.pw.clone()))
                    .collect();
                group_forge(&pairs, p)?
            }
            AttackTag::Masquerade => unreachable!(),
        };
        attempt.forged = Some(forged.clone());
        match scheme {
            SchemeTag::HwangLi => {
                let id = Identity::from_numeric(&forged.claimed, p);
                attempt.format_survived = Some(check_id_format(&id, &params) && !id.is_degenerate(p));
                CardInput::HwangLi { id, pw: forged.pw }
            }
            SchemeTag::Slh => CardInput::Slh { sid: forged.claimed, pw: forged.pw },
            SchemeTag::Improved => {
                // The wire needs an ID with Red(ID) = forged SID; guess one.
                let id = random_identity(&params, rng);
                CardInput::Improved { sid: forged.claimed, id, pw: forged.pw }
            }
            SchemeTag::AwasthiLal => unreachable!("handled above"),
        }
    };

    let card = SmartCard::issue(scheme, &params);
    match make_login(&card, &keyed, t, rng) {
        Ok(req) => {
            attempt.verdict = Some(server.verify(&req, t.plus(1)));
            attempt.request = Some(req);
        }
        Err(e) => attempt.note = format!("login phase cannot run: {e}"),
    }
    Ok(attempt)
}

/// One cell of the attack matrix.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttackOutcome {
    pub attack: AttackTag,
    pub scheme: SchemeTag,
    /// True iff at least one forged login was accepted.
    pub succeeded: bool,
    pub attempts: u64,
    pub accepts: u64,
    pub expected: bool,
    pub detail: String,
}

impl AttackOutcome {
    pub fn as_expected(&self) -> bool {
        self.succeeded == self.expected
    }
}

/// Random stream for one matrix cell; a forgery scenario under the same
/// seed replays the cell's first attempt.
pub fn cell_rng(seed: u64, attack: AttackTag, scheme: SchemeTag) -> SeededRng {
    substream(seed, &format!("attack/{attack}/{scheme}"))
}

/// Runs `trials` attempts of every applicable attack against every listed
/// scheme. Cells run on worker threads, each on its own substream.
pub fn run_attack_matrix(
    params: &SystemParams,
    secret: &ServerSecret,
    schemes: &[SchemeTag],
    trials: u64,
    seed: u64,
) -> Vec<AttackOutcome> {
    assert!(trials >= 1, "attack matrix needs at least one trial");
    let server = Server::new(params.clone(), secret.clone());
    let cells: Vec<(AttackTag, SchemeTag)> = schemes
        .iter()
        .flat_map(|&s| AttackTag::ALL.into_iter().filter(move |a| a.applies_to(s)).map(move |a| (a, s)))
        .collect();
    std::thread::scope(|scope| {
        let handles: Vec<_> = cells
            .iter()
            .map(|&(attack, scheme)| {
                let server = &server;
                scope.spawn(move || run_cell(attack, scheme, server, trials, seed))
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("matrix cell panicked")).collect()
    })
}

fn run_cell(attack: AttackTag, scheme: SchemeTag, server: &Server, trials: u64, seed: u64) -> AttackOutcome {
    let mut rng = cell_rng(seed, attack, scheme);
    let mut accepts = 0;
    let mut survived = 0;
    let mut survival_samples = 0;
    let mut first_note = None;
    for i in 0..trials {
        let attempt = attempt_attack(attack, scheme, server, ATTACK_EPOCH.plus(i), &mut rng)
            .expect("cell is applicable");
        if attempt.accepted() {
            accepts += 1;
        }
        if let Some(ok) = attempt.format_survived {
            survival_samples += 1;
            survived += u64::from(ok);
        }
        if first_note.is_none() && !attempt.note.is_empty() {
            first_note = Some(attempt.note);
        }
    }
    let mut detail = format!("{accepts}/{trials} forged logins accepted");
    if survival_samples > 0 {
        let rate = survived as f64 / survival_samples as f64;
        detail.push_str(&format!("; forged-ID format survival {survived}/{survival_samples} ({rate:.4})"));
    }
    if let Some(note) = first_note {
        detail.push_str(&format!("; {note}"));
    }
    AttackOutcome {
        attack,
        scheme,
        succeeded: accepts > 0,
        attempts: trials,
        accepts,
        expected: expected_success(attack, scheme, server.params().id_policy),
        detail,
    }
}

/// Aligned text rendering of the matrix.
pub fn render_table(outcomes: &[AttackOutcome]) -> String {
    let mut out = format!(
        "{:<12} {:<12} {:<10} {:<10} {:>9}  {}\n",
        "attack", "scheme", "succeeded", "expected", "accepts", "detail"
    );
    for o in outcomes {
        let mark = if o.as_expected() { "" } else { "  <-- DEVIATION" };
        out.push_str(&format!(
            "{:<12} {:<12} {:<10} {:<10} {:>9}  {}{}\n",
            o.attack.as_str(),
            o.scheme.as_str(),
            o.succeeded,
            o.expected,
            format!("{}/{}", o.accepts, o.attempts),
            o.detail,
            mark
        ));
    }
    out
}
