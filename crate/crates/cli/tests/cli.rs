use std::path::Path;
use std::process::{Command, Output};

fn authlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_authlab"))
        .args(args)
        .env_remove("AUTHLAB_SEED")
        .output()
        .expect("run authlab")
}

fn path(dir: &Path, name: &str) -> String {
    dir.join(name).to_str().unwrap().to_string()
}

fn keygen(dir: &Path, extra: &[&str]) {
    let out = path(dir, "");
    let mut args = vec!["--seed", "9", "keygen", "--bits", "64", "--out", &out];
    args.extend_from_slice(extra);
    assert_eq!(authlab(&args).status.code(), Some(0));
}

#[test]
fn keygen_is_reproducible_and_keeps_the_key_out_of_params() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    keygen(a.path(), &[]);
    keygen(b.path(), &[]);
    for f in ["params.json", "secret.json"] {
        assert_eq!(std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
    }
    let params = std::fs::read_to_string(a.path().join("params.json")).unwrap();
    let secret: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(a.path().join("secret.json")).unwrap()).unwrap();
    assert!(!params.contains("red_key"));
    assert!(!params.contains(secret["red_key"].as_str().unwrap()));
    let loaded = authlab::SystemParams::from_json(&params).unwrap();
    assert_eq!(loaded.p.bits(), 64);

    assert_eq!(authlab(&["keygen", "--bits", "8", "--out", &path(a.path(), "x")]).status.code(), Some(2));
}

#[test]
fn improved_register_login_verify_chain() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    keygen(d, &[]);
    let (cfg, sec) = (path(d, "params.json"), path(d, "secret.json"));
    let (cred, req) = (path(d, "cred.json"), path(d, "req.json"));

    let reg = authlab(&["register", "--config", &cfg, "--secret", &sec, "--scheme", "improved", "--id", "271828", "--out", &cred]);
    assert_eq!(reg.status.code(), Some(0));
    let login = authlab(&["login", "--config", &cfg, "--scheme", "improved", "--credential", &cred, "--time", "5000", "--out", &req]);
    assert_eq!(login.status.code(), Some(0));
    let verify = |extra: &[&str]| {
        let mut args = vec!["verify", "--config", &cfg, "--secret", &sec, "--request", &req];
        args.extend_from_slice(extra);
        authlab(&args)
    };
    let ok = verify(&["--now", "5001"]);
    assert_eq!(ok.status.code(), Some(0));
    assert_eq!(String::from_utf8_lossy(&ok.stdout).trim(), "ACCEPT (OK)");
    assert_eq!(verify(&["--now", "5061"]).status.code(), Some(3));

    // doctor c2
    let text = std::fs::read_to_string(&req).unwrap();
    let mut wire: serde_json::Value = serde_json::from_str(&text).unwrap();
    let c2 = wire["c2"].as_str().unwrap().to_string();
    let last = c2.chars().last().unwrap();
    let flipped = if last == '0' { '1' } else { '0' };
    wire["c2"] = serde_json::json!(format!("{}{}", &c2[..c2.len() - 1], flipped));
    std::fs::write(&req, serde_json::to_string(&wire).unwrap()).unwrap();
    let doctored = verify(&["--output", "json"]);
    assert_eq!(doctored.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&doctored.stdout).contains("EQUATION_MISMATCH"));

    std::fs::write(&req, &text[..text.len() / 2]).unwrap();
    assert_eq!(verify(&[]).status.code(), Some(2));
}

#[test]
fn awasthi_lal_login_exits_with_flaw_code() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    keygen(d, &[]);
    let (cfg, sec, cred) = (path(d, "params.json"), path(d, "secret.json"), path(d, "al.json"));
    let reg = authlab(&["register", "--config", &cfg, "--secret", &sec, "--scheme", "awasthi-lal", "--id", "4242", "--out", &cred]);
    assert_eq!(reg.status.code(), Some(0));
    let credential: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&cred).unwrap()).unwrap();
    assert!(credential["sid"].is_null());
    let login = authlab(&["login", "--config", &cfg, "--scheme", "awasthi-lal", "--credential", &cred]);
    assert_eq!(login.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&login.stderr).contains("SID is neither stored on the card"));

    let flaw = authlab(&["scenario", "awasthi-lal-flaw", "--config", &cfg, "--secret", &sec]);
    assert_eq!(flaw.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&flaw.stdout).contains("LOGIN_ABORTED"));
}

#[test]
fn usage_errors_exit_two() {
    assert_eq!(authlab(&["attack-matrix", "--trials", "0"]).status.code(), Some(2));
    assert_eq!(authlab(&["attack-matrix", "--output", "xml"]).status.code(), Some(2));
    assert_eq!(authlab(&["register", "--scheme", "kerberos"]).status.code(), Some(2));
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.json"), "{\"p\":\"19\"}").unwrap();
    let cfg = path(dir.path(), "bad.json");
    assert_eq!(
        authlab(&["register", "--config", &cfg, "--secret", &cfg, "--scheme", "slh", "--id", "5"]).status.code(),
        Some(2)
    );
    let missing = path(dir.path(), "nope.json");
    assert_eq!(
        authlab(&["register", "--config", &missing, "--secret", &missing, "--scheme", "slh", "--id", "5"]).status.code(),
        Some(1)
    );
}

#[test]
fn matrix_renders_table_and_json_and_honours_env_seed() {
    let table = authlab(&["attack-matrix", "--trials", "5"]);
    assert_eq!(table.status.code(), Some(0));
    let text = String::from_utf8_lossy(&table.stdout);
    assert!(text.starts_with("attack"));
    assert_eq!(text.lines().count(), 20);

    let json = authlab(&["attack-matrix", "--trials", "5", "--output", "json", "--seed", "7"]);
    let cells: serde_json::Value = serde_json::from_slice(&json.stdout).unwrap();
    assert_eq!(cells.as_array().unwrap().len(), 19);

    let via_env = Command::new(env!("CARGO_BIN_EXE_authlab"))
        .args(["attack-matrix", "--trials", "5", "--output", "json"])
        .env("AUTHLAB_SEED", "7")
        .output()
        .unwrap();
    assert_eq!(via_env.stdout, json.stdout);
}

#[test]
fn strict_policy_matrix_still_matches_expectations() {
    let dir = tempfile::tempdir().unwrap();
    keygen(dir.path(), &["--id-policy", "strict"]);
    let cfg = path(dir.path(), "params.json");
    let out = authlab(&["attack-matrix", "--config", &cfg, "--trials", "20", "--output", "json"]);
    assert_eq!(out.status.code(), Some(0));
    let cells: Vec<serde_json::Value> = serde_json::from_slice(&out.stdout).unwrap();
    let cc = cells.iter().find(|c| c["attack"] == "chan-cheng" && c["scheme"] == "hwang-li").unwrap();
    assert_eq!(cc["succeeded"], false);
    assert!(cc["detail"].as_str().unwrap().contains("format survival"));
}

#[test]
fn forgery_scenario_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    keygen(dir.path(), &[]);
    let (cfg, sec) = (path(dir.path(), "params.json"), path(dir.path(), "secret.json"));
    let run = |attack: &str, scheme: &str| {
        authlab(&["scenario", "forgery", "--attack", attack, "--scheme", scheme, "--config", &cfg, "--secret", &sec])
            .status
            .code()
    };
    assert_eq!(run("chan-cheng", "hwang-li"), Some(0));
    assert_eq!(run("leung", "slh"), Some(0));
    assert_eq!(run("leung", "improved"), Some(3));
    assert_eq!(run("leung", "hwang-li"), Some(2));
}
