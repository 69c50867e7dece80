//! Deterministic protocol simulator.
//!
//! A scenario wires together a user with a card, the authentication server,
//! an optional eavesdropper and a virtual clock, and records what happens as
//! a [`Transcript`]. There are no wall-clock reads; `(scenario, seed,
//! config)` fixes the transcript byte for byte.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::attacks::{attempt_attack, cell_rng, random_identity, AttackTag, ATTACK_EPOCH};
use crate::error::{SchemeError, SimError};
use crate::modmath::hex;
use crate::protocol::{serialize_request, LoginRequest, SchemeTag, ServerSecret, SystemParams, Timestamp};
use crate::rng::substream;
use crate::schemes::{make_login, Credential, Registrar, Server, SmartCard, VerifyResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Register,
    LoginSent,
    LoginVerdict,
    /// The card could not build a login request at all.
    LoginAborted,
    EavesdropCapture,
    ReplaySent,
    ForgeryPrepared,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Event {
    pub seq: u64,
    pub time: u64,
    pub kind: EventKind,
    pub payload: Value,
}

/// Ordered event log. Sequence numbers are dense from 0 and sim-time never
/// decreases.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Transcript {
    events: Vec<Event>,
}

impl Transcript {
    pub fn events(&self) -> &[Event] {
        &self.events
    }

    fn push(&mut self, time: Timestamp, kind: EventKind, payload: Value) {
        if let Some(last) = self.events.last() {
            assert!(time.0 >= last.time, "sim-time went backwards");
        }
        self.events.push(Event { seq: self.events.len() as u64, time: time.0, kind, payload });
    }

    pub fn count(&self, kind: EventKind) -> usize {
        self.events.iter().filter(|e| e.kind == kind).count()
    }

    /// Verdicts in the order they were issued.
    pub fn verdicts(&self) -> Vec<VerifyResult> {
        self.events
            .iter()
            .filter(|e| e.kind == EventKind::LoginVerdict)
            .map(|e| verdict_from_payload(&e.payload))
            .collect()
    }

    pub fn last_verdict(&self) -> Option<VerifyResult> {
        self.verdicts().pop()
    }

    /// One JSON object per line: `{"seq","time","kind","payload"}`.
    pub fn to_jsonl(&self) -> String {
        self.events
            .iter()
            .map(|e| serde_json::to_string(e).expect("event serialize") + "\n")
            .collect()
    }

    pub fn from_jsonl(s: &str) -> Result<Self, SimError> {
        let mut t = Transcript::default();
        for line in s.lines().filter(|l| !l.trim().is_empty()) {
            let ev: Event =
                serde_json::from_str(line).map_err(|e| SimError::MalformedTranscript(e.to_string()))?;
            let expected_seq = t.events.len() as u64;
            let prev_time = t.events.last().map_or(0, |e| e.time);
            if ev.seq != expected_seq || ev.time < prev_time {
                return Err(SimError::MalformedTranscript(format!("event {} out of order", ev.seq)));
            }
            t.events.push(ev);
        }
        Ok(t)
    }
}

fn verdict_from_payload(v: &Value) -> VerifyResult {
    let reason = serde_json::from_value(v["reason"].clone()).expect("verdict payload has a reason");
    match v["verdict"].as_str() {
        Some("ACCEPT") => VerifyResult::ACCEPT,
        _ => VerifyResult::reject(reason),
    }
}

fn request_payload(req: &LoginRequest) -> Value {
    serde_json::from_slice(&serialize_request(req)).expect("canonical request is JSON")
}

fn verdict_payload(v: VerifyResult, replay: bool) -> Value {
    json!({ "verdict": v.verdict(), "reason": v.reason(), "replay": replay })
}

fn register_payload(cred: &Credential) -> Value {
    json!({ "scheme": cred.scheme, "id": cred.id.raw(), "sid_issued": cred.sid.is_some() })
}

/// Virtual clock. `now` is the server's view; the card reads `now + skew_s`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimClock {
    now: Timestamp,
    pub skew_s: i64,
}

impl SimClock {
    pub fn new(start: Timestamp, skew_s: i64) -> Self {
        SimClock { now: start, skew_s }
    }

    pub fn now(&self) -> Timestamp {
        self.now
    }

    pub fn card_time(&self) -> Timestamp {
        self.now.offset(self.skew_s)
    }

    pub fn advance(&mut self, secs: u64) {
        self.now = self.now.plus(secs);
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SimConfig {
    pub start: Timestamp,
    pub transit_delay_s: u64,
    pub skew_s: i64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { start: ATTACK_EPOCH, transit_delay_s: 1, skew_s: 0 }
    }
}

/// Register a fresh user, log in, verify after the transit delay.
pub fn scenario_legit_session(
    scheme: SchemeTag,
    params: &SystemParams,
    secret: &ServerSecret,
    seed: u64,
    config: &SimConfig,
) -> Result<Transcript, SimError> {
    if scheme == SchemeTag::AwasthiLal {
        return Err(SimError::Unsupported(
            "awasthi-lal has no runnable login phase; use the awasthi-lal-flaw scenario".into(),
        ));
    }
    let server = Server::new(params.clone(), secret.clone());
    let mut clock = SimClock::new(config.start, config.skew_s);
    let mut transcript = Transcript::default();
    let (cred, card) = enroll(&server, scheme, seed, clock.now(), &mut transcript)?;

    let mut card_rng = substream(seed, "card");
    let req = make_login(&card, &cred.card_input()?, clock.card_time(), &mut card_rng)?;
    transcript.push(clock.now(), EventKind::LoginSent, request_payload(&req));
    clock.advance(config.transit_delay_s);
    let verdict = server.verify(&req, clock.now());
    transcript.push(clock.now(), EventKind::LoginVerdict, verdict_payload(verdict, false));
    Ok(transcript)
}

fn enroll(
    server: &Server,
    scheme: SchemeTag,
    seed: u64,
    now: Timestamp,
    transcript: &mut Transcript,
) -> Result<(Credential, SmartCard), SchemeError> {
    let id = random_identity(server.params(), &mut substream(seed, "user"));
    let cred = server.register(&id, scheme)?;
    transcript.push(now, EventKind::Register, register_payload(&cred));
    Ok((cred, SmartCard::issue(scheme, server.params())))
}

/// An eavesdropper copies an honest login off the wire and replays it
/// `delay_s` seconds after its timestamp. Only the freshness window stands
/// in the way: the schemes keep no nonce or replay cache.
pub fn scenario_replay(
    scheme: SchemeTag,
    params: &SystemParams,
    secret: &ServerSecret,
    delay_s: u64,
    seed: u64,
    config: &SimConfig,
) -> Result<Transcript, SimError> {
    if scheme == SchemeTag::AwasthiLal {
        return Err(SimError::Unsupported("awasthi-lal produces no login request to capture".into()));
    }
    let server = Server::new(params.clone(), secret.clone());
    let clock = SimClock::new(config.start, config.skew_s);
    let mut transcript = Transcript::default();
    let (cred, card) = enroll(&server, scheme, seed, clock.now(), &mut transcript)?;

    let mut card_rng = substream(seed, "card");
    let req = make_login(&card, &cred.card_input()?, clock.card_time(), &mut card_rng)?;
    let sent = clock.now();
    transcript.push(sent, EventKind::LoginSent, request_payload(&req));
    transcript.push(sent, EventKind::EavesdropCapture, request_payload(&req));

    let honest_at = sent.plus(config.transit_delay_s);
    let replay_at = sent.plus(delay_s);
    let honest = |t: &mut Transcript| {
        let v = server.verify(&req, honest_at);
        t.push(honest_at, EventKind::LoginVerdict, verdict_payload(v, false));
    };
    let replay = |t: &mut Transcript| {
        t.push(replay_at, EventKind::ReplaySent, request_payload(&req));
        let v = server.verify(&req, replay_at);
        t.push(replay_at, EventKind::LoginVerdict, verdict_payload(v, true));
    };
    if replay_at < honest_at {
        replay(&mut transcript);
        honest(&mut transcript);
    } else {
        honest(&mut transcript);
        replay(&mut transcript);
    }
    Ok(transcript)
}

/// Awasthi-Lal: registration works, the card cannot form `C1 = SID^r`.
pub fn scenario_awasthi_lal_flaw(
    params: &SystemParams,
    secret: &ServerSecret,
    seed: u64,
    config: &SimConfig,
) -> Result<Transcript, SimError> {
    let server = Server::new(params.clone(), secret.clone());
    let clock = SimClock::new(config.start, config.skew_s);
    let mut transcript = Transcript::default();
    let (cred, card) = enroll(&server, SchemeTag::AwasthiLal, seed, clock.now(), &mut transcript)?;
    let mut card_rng = substream(seed, "card");
    match make_login(&card, &cred.card_input()?, clock.card_time(), &mut card_rng) {
        Err(SchemeError::MissingSid) => {
            transcript.push(
                clock.now(),
                EventKind::LoginAborted,
                json!({
                    "scheme": SchemeTag::AwasthiLal,
                    "error": "MissingSID",
                    "message": SchemeError::MissingSid.to_string(),
                }),
            );
            Ok(transcript)
        }
        Err(e) => Err(e.into()),
        Ok(_) => unreachable!("awasthi-lal login cannot succeed"),
    }
}

/// One attack attempt, identical to the first trial of the matching
/// attack-matrix cell under the same seed.
pub fn scenario_forgery(
    attack: AttackTag,
    scheme: SchemeTag,
    params: &SystemParams,
    secret: &ServerSecret,
    seed: u64,
) -> Result<Transcript, SimError> {
    let server = Server::new(params.clone(), secret.clone());
    let mut rng = cell_rng(seed, attack, scheme);
    let attempt = attempt_attack(attack, scheme, &server, ATTACK_EPOCH, &mut rng)?;

    let mut transcript = Transcript::default();
    let t = attempt.sent_at;
    for victim in &attempt.victims {
        transcript.push(t, EventKind::Register, register_payload(victim));
    }
    if let Some(forged) = &attempt.forged {
        let mut payload = json!({
            "attack": attack,
            "scheme": scheme,
            "claimed": hex::encode(&forged.claimed),
            "pw": hex::encode(&forged.pw),
        });
        if let Some(ok) = attempt.format_survived {
            payload["format_survived"] = json!(ok);
        }
        transcript.push(t, EventKind::ForgeryPrepared, payload);
    }
    match (&attempt.request, attempt.verdict) {
        (Some(req), Some(verdict)) => {
            transcript.push(t, EventKind::LoginSent, request_payload(req));
            transcript.push(t.plus(1), EventKind::LoginVerdict, verdict_payload(verdict, false));
        }
        _ => transcript.push(t, EventKind::LoginAborted, json!({ "scheme": scheme, "message": attempt.note })),
    }
    Ok(transcript)
}
