//! `authlab` command-line front end.
//!
//! Exit codes: 0 success/ACCEPT, 1 I/O failure, 2 usage or malformed input,
//! 3 REJECT, 4 scheme flaw (Awasthi-Lal login), 5 attack-matrix deviation.

use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use authlab::attacks::{render_table, run_attack_matrix, AttackTag};
use authlab::modmath::gen_prime;
use authlab::protocol::{deserialize_request, serialize_request, HashId, DEFAULT_DELTA_T_S};
use authlab::rng::substream;
use authlab::schemes::{make_login, register, verify, SmartCard};
use authlab::simulator::{self, SimConfig, Transcript};
use authlab::{
    Credential, IdPolicy, Identity, SchemeError, SchemeTag, ServerSecret, SystemParams, Timestamp,
};
use clap::{Parser, Subcommand, ValueEnum};

/// Seed used when neither `--seed` nor `AUTHLAB_SEED` is given.
const DEFAULT_SEED: u64 = 2004;

/// Key size for parameters derived on the fly by `attack-matrix`.
const DEFAULT_BITS: u64 = 64;

const DEFAULT_TIME: u64 = 1_700_000_000;

#[derive(Parser)]
#[command(name = "authlab", version, about = "Smart-card remote user authentication laboratory")]
struct Cli {
    /// Master seed; every actor draws from a named substream of it.
    #[arg(long, global = true, env = "AUTHLAB_SEED", default_value_t = DEFAULT_SEED)]
    seed: u64,

    #[arg(long, global = true, value_enum, default_value_t = Output::Table)]
    output: Output,

    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Output {
    Json,
    Table,
}

#[derive(Clone, Copy, ValueEnum)]
enum Policy {
    Strict,
    Permissive,
}

impl From<Policy> for IdPolicy {
    fn from(p: Policy) -> Self {
        match p {
            Policy::Strict => IdPolicy::Strict,
            Policy::Permissive => IdPolicy::Permissive,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ScenarioKind {
    Legit,
    Replay,
    AwasthiLalFlaw,
    Forgery,
}

#[derive(Subcommand)]
enum Command {
    /// Generate public parameters and a server secret.
    Keygen {
        #[arg(long, default_value_t = DEFAULT_BITS)]
        bits: u64,
        /// Directory receiving params.json and secret.json.
        #[arg(long)]
        out: PathBuf,
        #[arg(long = "delta-t", default_value_t = DEFAULT_DELTA_T_S)]
        delta_t: u64,
        #[arg(long = "id-policy", value_enum, default_value_t = Policy::Permissive)]
        id_policy: Policy,
    },
    /// Register an identity and print the issued credential.
    Register {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        secret: PathBuf,
        #[arg(long, value_parser = parse_scheme)]
        scheme: SchemeTag,
        #[arg(long)]
        id: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Build a login request from a credential, as the smart card would.
    Login {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, value_parser = parse_scheme)]
        scheme: SchemeTag,
        #[arg(long)]
        credential: PathBuf,
        /// Card clock, seconds since epoch.
        #[arg(long, default_value_t = DEFAULT_TIME)]
        time: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check a login request; exit 0 on ACCEPT, 3 on REJECT.
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        secret: PathBuf,
        #[arg(long)]
        request: PathBuf,
        /// Server clock; defaults to the request's own timestamp.
        #[arg(long)]
        now: Option<u64>,
    },
    /// Run a simulator scenario and emit its JSON-lines transcript.
    Scenario {
        #[arg(value_enum)]
        kind: ScenarioKind,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        secret: PathBuf,
        #[arg(long, value_parser = parse_scheme, default_value = "improved")]
        scheme: SchemeTag,
        #[arg(long, value_parser = parse_attack, default_value = "chan-cheng")]
        attack: AttackTag,
        /// Replay delay after the honest timestamp.
        #[arg(long, default_value_t = 0)]
        delay: u64,
        /// Card clock offset from the server clock.
        #[arg(long, default_value_t = 0, allow_hyphen_values = true)]
        skew: i64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run every attack against every scheme; exit 5 if the outcome deviates
    /// from the expected vulnerable/secure pattern.
    AttackMatrix {
        /// Without --config, 64-bit permissive parameters are derived from the seed.
        #[arg(long)]
        config: Option<PathBuf>,
        /// Without --secret, a server secret is derived from the seed.
        #[arg(long)]
        secret: Option<PathBuf>,
        #[arg(long, default_value_t = 1000)]
        trials: u64,
    },
}

fn parse_scheme(s: &str) -> Result<SchemeTag, String> {
    s.parse().map_err(|e: authlab::ProtocolError| e.to_string())
}

fn parse_attack(s: &str) -> Result<AttackTag, String> {
    s.parse()
}

enum CliError {
    Io(String),
    Usage(String),
    Reject,
    Flaw(String),
    Deviation,
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Io(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Reject => 3,
            CliError::Flaw(_) => 4,
            CliError::Deviation => 5,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Io(m) => write!(f, "i/o error: {m}"),
            CliError::Usage(m) => write!(f, "error: {m}"),
            CliError::Reject => write!(f, "login request rejected"),
            CliError::Flaw(m) => write!(f, "{m}"),
            CliError::Deviation => write!(f, "attack matrix deviates from the expected pattern"),
        }
    }
}

fn usage(e: impl fmt::Display) -> CliError {
    CliError::Usage(e.to_string())
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn emit(out: Option<&Path>, content: &str) -> Result<(), CliError> {
    match out {
        Some(path) => fs::write(path, content).map_err(|e| CliError::Io(format!("{}: {e}", path.display()))),
        None => {
            print!("{content}");
            Ok(())
        }
    }
}

fn load_params(path: &Path) -> Result<SystemParams, CliError> {
    SystemParams::from_json(&read(path)?).map_err(usage)
}

fn load_secret(path: &Path, params: &SystemParams) -> Result<ServerSecret, CliError> {
    ServerSecret::from_secret_file(&read(path)?, params).map_err(usage)
}

const AWASTHI_LAL_FLAW: &str = "awasthi-lal: the login phase cannot run. The card must compute C1 = SID^r mod p, \
but SID is neither stored on the card (which holds only f and p) nor keyed in by the user, who enters only ID and PW.";

/// Parameters and secret derived from the seed, as `keygen` would produce them.
fn derive_keys(seed: u64, bits: u64, delta_t: u64, policy: IdPolicy) -> Result<(SystemParams, ServerSecret), CliError> {
    let p = gen_prime(bits, &mut substream(seed, "keygen/prime")).map_err(usage)?;
    let params = SystemParams::new(p, HashId::Sha2_256, delta_t, policy).map_err(usage)?;
    let secret = ServerSecret::generate(&params, &mut substream(seed, "keygen/secret"));
    Ok((params, secret))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let seed = cli.seed;
    match cli.command {
        Command::Keygen { bits, out, delta_t, id_policy } => {
            if bits < 16 {
                return Err(usage("--bits must be at least 16"));
            }
            let (params, secret) = derive_keys(seed, bits, delta_t, id_policy.into())?;
            fs::create_dir_all(&out).map_err(|e| CliError::Io(format!("{}: {e}", out.display())))?;
            emit(Some(&out.join("params.json")), &(params.to_json() + "\n"))?;
            emit(Some(&out.join("secret.json")), &(secret.to_secret_file() + "\n"))?;
            eprintln!(
                "wrote {0}/params.json and {0}/secret.json (demo-grade: the secret file is unencrypted)",
                out.display()
            );
            Ok(())
        }
        Command::Register { config, secret, scheme, id, out } => {
            let params = load_params(&config)?;
            let secret = load_secret(&secret, &params)?;
            let id = Identity::new(&id, &params.p).map_err(usage)?;
            let (cred, _card) = register(&secret, &params, &id, scheme).map_err(usage)?;
            emit(out.as_deref(), &(cred.to_json() + "\n"))
        }
        Command::Login { config, scheme, credential, time, out } => {
            let params = load_params(&config)?;
            let cred = Credential::from_json(&read(&credential)?, &params.p).map_err(usage)?;
            let card = SmartCard::issue(scheme, &params);
            let keyed = cred.card_input().map_err(usage)?;
            let mut rng = substream(seed, "card");
            match make_login(&card, &keyed, Timestamp(time), &mut rng) {
                Ok(req) => {
                    let bytes = serialize_request(&req);
                    emit(out.as_deref(), &(String::from_utf8(bytes).expect("utf-8 json") + "\n"))
                }
                Err(SchemeError::MissingSid) => Err(CliError::Flaw(AWASTHI_LAL_FLAW.into())),
                Err(e) => Err(usage(e)),
            }
        }
        Command::Verify { config, secret, request, now } => {
            let params = load_params(&config)?;
            let secret = load_secret(&secret, &params)?;
            let req = deserialize_request(read(&request)?.trim_end().as_bytes()).map_err(usage)?;
            let now = now.map_or(req.t, Timestamp);
            let result = verify(&secret, &params, &req, now);
            match cli.output {
                Output::Json => println!("{}", serde_json::to_string(&result).expect("verdict json")),
                Output::Table => {
                    let json = serde_json::to_value(result).expect("verdict json");
                    println!("{} ({})", json["verdict"].as_str().unwrap_or("?"), json["reason"].as_str().unwrap_or("?"));
                }
            }
            if result.accepted() { Ok(()) } else { Err(CliError::Reject) }
        }
        Command::Scenario { kind, config, secret, scheme, attack, delay, skew, out } => {
            let params = load_params(&config)?;
            let secret = load_secret(&secret, &params)?;
            let cfg = SimConfig { skew_s: skew, ..SimConfig::default() };
            let transcript = match kind {
                ScenarioKind::Legit => simulator::scenario_legit_session(scheme, &params, &secret, seed, &cfg),
                ScenarioKind::Replay => simulator::scenario_replay(scheme, &params, &secret, delay, seed, &cfg),
                ScenarioKind::AwasthiLalFlaw => simulator::scenario_awasthi_lal_flaw(&params, &secret, seed, &cfg),
                ScenarioKind::Forgery => simulator::scenario_forgery(attack, scheme, &params, &secret, seed),
            }
            .map_err(usage)?;
            emit(out.as_deref(), &transcript.to_jsonl())?;
            scenario_exit(&transcript)
        }
        Command::AttackMatrix { config, secret, trials } => {
            if trials == 0 {
                return Err(usage("--trials must be at least 1"));
            }
            let (params, secret) = match (config, secret) {
                (Some(c), Some(s)) => {
                    let params = load_params(&c)?;
                    let secret = load_secret(&s, &params)?;
                    (params, secret)
                }
                (Some(c), None) => {
                    let params = load_params(&c)?;
                    let secret = ServerSecret::generate(&params, &mut substream(seed, "keygen/secret"));
                    (params, secret)
                }
                (None, Some(_)) => return Err(usage("--secret requires --config")),
                (None, None) => derive_keys(seed, DEFAULT_BITS, DEFAULT_DELTA_T_S, IdPolicy::Permissive)?,
            };
            let outcomes = run_attack_matrix(&params, &secret, &SchemeTag::ALL, trials, seed);
            match cli.output {
                Output::Json => println!("{}", serde_json::to_string_pretty(&outcomes).expect("matrix json")),
                Output::Table => print!("{}", render_table(&outcomes)),
            }
            if outcomes.iter().all(|o| o.as_expected()) { Ok(()) } else { Err(CliError::Deviation) }
        }
    }
}

/// Final verdict decides the exit code; a transcript that ends without one
/// records a login that could not be built.
fn scenario_exit(t: &Transcript) -> Result<(), CliError> {
    use authlab::simulator::EventKind;
    match t.events().last() {
        Some(e) if e.kind == EventKind::LoginAborted => {
            let msg = e.payload["message"].as_str().unwrap_or("login aborted");
            Err(CliError::Flaw(format!("login phase did not run: {msg}")))
        }
        _ => match t.last_verdict() {
            Some(v) if v.accepted() => Ok(()),
            _ => Err(CliError::Reject),
        },
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            if !matches!(e, CliError::Reject | CliError::Deviation) {
                eprintln!("{e}");
            }
            ExitCode::from(e.code())
        }
    }
}
