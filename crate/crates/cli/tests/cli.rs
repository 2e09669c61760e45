use std::io::{BufRead, BufReader};
use std::path::{Path, PathBuf};
use std::process::{Child, Command, Output, Stdio};

use qgp_pqc::sig_keygen;
use tempfile::TempDir;

fn qgp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_qgp")).args(args).output().unwrap()
}

fn code(out: &Output) -> i32 {
    out.status.code().unwrap()
}

fn stdout(out: &Output) -> String {
    String::from_utf8_lossy(&out.stdout).into_owned()
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn p(dir: &TempDir, name: &str) -> String {
    dir.path().join(name).to_str().unwrap().to_owned()
}

fn fixture(name: &str) -> String {
    Path::new(env!("CARGO_MANIFEST_DIR"))
        .join("../core/tests/fixtures/scenarios")
        .join(name)
        .to_str()
        .unwrap()
        .to_owned()
}

/// Signing and KEM key pairs plus one distilled session key.
fn setup() -> TempDir {
    let dir = TempDir::new().unwrap();
    let sig = qgp(&["keygen", "--scheme", "dilithium3", "--seed", &"11".repeat(32), "--out", &p(&dir, "sig")]);
    assert_eq!(code(&sig), 0, "{}", stderr(&sig));
    let kem = qgp(&["keygen", "--scheme", "kyber768", "--seed", &"22".repeat(32), "--out", &p(&dir, "kem")]);
    assert_eq!(code(&kem), 0, "{}", stderr(&kem));
    let qkd = qgp(&["qkd", "simulate", "--pulses", "20000", "--noise", "0.01", "--seed", "2", "--key-out", &p(&dir, "sk")]);
    assert_eq!(code(&qkd), 0, "{}", stderr(&qkd));
    std::fs::write(dir.path().join("msg"), b"attack at dawn").unwrap();
    dir
}

#[test]
fn shor_reports_period_and_factors() {
    let out = qgp(&["shor", "--n", "15", "--t", "8", "--seed", "1"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("period 4"));
    assert!(stdout(&out).contains("factors 3,5"));

    let dir = TempDir::new().unwrap();
    let (a, b) = (p(&dir, "a.csv"), p(&dir, "b.csv"));
    for path in [&a, &b] {
        let out = qgp(&["shor", "--n", "15", "--x", "7", "--t", "8", "--seed", "3", "--hist", path]);
        assert_eq!(code(&out), 0);
    }
    let hist = std::fs::read_to_string(&a).unwrap();
    assert_eq!(hist, std::fs::read_to_string(&b).unwrap());
    let rows: Vec<&str> = hist.lines().collect();
    assert_eq!(rows[0], "z,probability");
    assert_eq!(rows.len(), 257);
    assert_eq!(rows[1 + 64], "64,0.250000000000");
    assert_eq!(rows[1 + 65], "65,0.000000000000");

    let out = qgp(&["shor", "--n", "21", "--seed", "4"]);
    assert_eq!(code(&out), 0);
    assert!(stdout(&out).contains("factors 3,7"));
}

#[test]
fn shor_rejects_invalid_moduli() {
    for n in ["13", "9", "16"] {
        assert_eq!(code(&qgp(&["shor", "--n", n, "--seed", "1"])), 3);
    }
}

#[test]
fn full_intercept_raises_alarm() {
    let dir = TempDir::new().unwrap();
    let csv = p(&dir, "out.csv");
    let out = qgp(&["qkd", "simulate", "--pulses", "100000", "--noise", "0", "--eve", "1.0", "--seed", "1", "--csv", &csv]);
    assert_eq!(code(&out), 2);
    let text = std::fs::read_to_string(&csv).unwrap();
    assert_eq!(text, stdout(&out));
    let row: Vec<&str> = text.lines().nth(1).unwrap().split(',').collect();
    let qber: f64 = row[1].parse().unwrap();
    assert!((qber - 0.25).abs() < 0.01, "{qber}");
    assert_eq!(row[4], "true");
}

#[test]
fn qkd_runs_are_reproducible() {
    let args = ["qkd", "simulate", "--pulses", "20000", "--noise", "0.03", "--loss", "0.2", "--rounds", "3", "--seed", "9"];
    let (a, b) = (qgp(&args), qgp(&args));
    assert_eq!(code(&a), 0, "{}", stderr(&a));
    assert_eq!(a.stdout, b.stdout);
    assert_eq!(stdout(&a).lines().count(), 4);
    assert_eq!(code(&qgp(&["qkd", "simulate", "--pulses", "100", "--noise", "1.5", "--seed", "1"])), 3);
}

#[test]
fn keygen_is_deterministic_and_matches_the_library() {
    let dir = TempDir::new().unwrap();
    let seed = "0123456789abcdef".repeat(4);
    for out in ["k1", "k2"] {
        assert_eq!(code(&qgp(&["keygen", "--scheme", "dilithium3", "--seed", &seed, "--out", &p(&dir, out)])), 0);
    }
    let pair = sig_keygen(&hex::decode(&seed).unwrap().try_into().unwrap());
    for out in ["k1", "k2"] {
        assert_eq!(std::fs::read(p(&dir, out)).unwrap(), pair.secret_key);
        assert_eq!(std::fs::read(p(&dir, &format!("{out}.pub"))).unwrap(), pair.public_key);
    }
    assert_eq!(code(&qgp(&["keygen", "--scheme", "kyber768", "--seed", &seed, "--out", &p(&dir, "kem")])), 0);
    assert_eq!(std::fs::metadata(p(&dir, "kem")).unwrap().len(), 2400);
    assert_eq!(std::fs::metadata(p(&dir, "kem.pub")).unwrap().len(), 1184);

    assert_eq!(code(&qgp(&["keygen", "--scheme", "kyber768", "--seed", "abcd", "--out", &p(&dir, "x")])), 3);
    assert_eq!(code(&qgp(&["keygen", "--scheme", "rsa", "--seed", &seed, "--out", &p(&dir, "x")])), 3);
}

#[test]
fn seal_open_roundtrip_for_each_layer_combination() {
    let dir = setup();
    let layer_args: [&[&str]; 3] = [
        &["--session-key", &p(&dir, "sk")],
        &["--kem-pub", &p(&dir, "kem.pub")],
        &["--session-key", &p(&dir, "sk"), "--kem-pub", &p(&dir, "kem.pub")],
    ];
    let (msg, sig, sig_pub, sk, kem) = (p(&dir, "msg"), p(&dir, "sig"), p(&dir, "sig.pub"), p(&dir, "sk"), p(&dir, "kem"));
    for (i, extra) in layer_args.iter().enumerate() {
        let env = p(&dir, &format!("env{i}"));
        let mut args = vec!["seal", "--in", &msg, "--out", &env, "--sign-key", &sig, "--seed", "5"];
        args.extend_from_slice(extra);
        assert_eq!(code(&qgp(&args)), 0);
        let first = std::fs::read(&env).unwrap();
        assert_eq!(code(&qgp(&args)), 0);
        assert_eq!(std::fs::read(&env).unwrap(), first, "seeded seal must be reproducible");

        let out = qgp(&["open", "--in", &env, "--verify-key", &sig_pub, "--session-key", &sk, "--kem-key", &kem]);
        assert_eq!(code(&out), 0, "{}", stderr(&out));
        assert_eq!(out.stdout, b"attack at dawn");
    }
    let bare = qgp(&["seal", "--in", &p(&dir, "msg"), "--out", &p(&dir, "e"), "--sign-key", &p(&dir, "sig"), "--seed", "1"]);
    assert_eq!(code(&bare), 3);
}

#[test]
fn open_names_the_failure() {
    let dir = setup();
    let env = p(&dir, "env");
    let seal = qgp(&[
        "seal", "--in", &p(&dir, "msg"), "--out", &env, "--sign-key", &p(&dir, "sig"),
        "--kem-pub", &p(&dir, "kem.pub"), "--session-key", &p(&dir, "sk"), "--seed", "7",
    ]);
    assert_eq!(code(&seal), 0);
    let good = std::fs::read(&env).unwrap();
    let open_with = |verify: &str| {
        qgp(&[
            "open", "--in", &env, "--verify-key", verify, "--kem-key", &p(&dir, "kem"),
            "--session-key", &p(&dir, "sk"), "--out", &p(&dir, "plain"),
        ])
    };

    let mut tampered = good.clone();
    let last = tampered.len() - 1;
    tampered[last] ^= 0x01;
    std::fs::write(&env, &tampered).unwrap();
    let out = open_with(&p(&dir, "sig.pub"));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("OuterAuthFail"), "{}", stderr(&out));

    tampered = good.clone();
    tampered[0] = b'X';
    std::fs::write(&env, &tampered).unwrap();
    let out = open_with(&p(&dir, "sig.pub"));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("BadMagic"));

    std::fs::write(&env, &good).unwrap();
    assert_eq!(code(&qgp(&["keygen", "--scheme", "dilithium3", "--seed", &"33".repeat(32), "--out", &p(&dir, "other")])), 0);
    let out = open_with(&p(&dir, "other.pub"));
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("SignatureInvalid"));
    assert!(!dir.path().join("plain").exists());

    let out = open_with(&p(&dir, "sig.pub"));
    assert_eq!(code(&out), 0);
    assert_eq!(std::fs::read(p(&dir, "plain")).unwrap(), b"attack at dawn");
}

struct Daemon(Child, String);

impl Drop for Daemon {
    fn drop(&mut self) {
        let _ = self.0.kill();
        let _ = self.0.wait();
    }
}

fn keyd(extra: &[&str]) -> Daemon {
    let mut child = Command::new(env!("CARGO_BIN_EXE_qgp"))
        .args(["keyd", "--listen", "127.0.0.1:0"])
        .args(extra)
        .stdout(Stdio::piped())
        .stderr(Stdio::null())
        .spawn()
        .unwrap();
    let mut line = String::new();
    BufReader::new(child.stdout.take().unwrap()).read_line(&mut line).unwrap();
    let addr = line.trim().strip_prefix("listening on ").expect("address line").to_owned();
    Daemon(child, addr)
}

#[test]
fn key_service_supplies_one_time_session_keys() {
    let dir = setup();
    let daemon = keyd(&["--prefill-rounds", "2", "--pulses", "20000", "--noise", "0.01", "--seed", "3"]);
    let env = p(&dir, "env");
    let seal = qgp(&[
        "seal", "--in", &p(&dir, "msg"), "--out", &env, "--sign-key", &p(&dir, "sig"),
        "--key-service", &daemon.1, "--seed", "1",
    ]);
    assert_eq!(code(&seal), 0, "{}", stderr(&seal));
    assert!(stdout(&seal).starts_with("key_id "));

    let open = |party: &str| {
        qgp(&["open", "--in", &env, "--verify-key", &p(&dir, "sig.pub"), "--key-service", &daemon.1, "--party", party])
    };
    let out = open("mallory");
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("UNAUTHORIZED_PEER"), "{}", stderr(&out));
    let out = open("bob");
    assert_eq!(code(&out), 0, "{}", stderr(&out));
    assert_eq!(out.stdout, b"attack at dawn");
    let out = open("bob");
    assert_eq!(code(&out), 1);
    assert!(stderr(&out).contains("ALREADY_CONSUMED"), "{}", stderr(&out));
}

#[test]
fn key_service_refuses_under_alarm() {
    let dir = setup();
    let daemon = keyd(&["--session-key", &p(&dir, "sk"), "--prefill-rounds", "1", "--eve", "1.0", "--seed", "1"]);
    let out = qgp(&[
        "seal", "--in", &p(&dir, "msg"), "--out", &p(&dir, "env"), "--sign-key", &p(&dir, "sig"),
        "--key-service", &daemon.1, "--seed", "1",
    ]);
    assert_eq!(code(&out), 2);
    assert!(stderr(&out).contains("ALARM_ACTIVE"));
    assert!(!dir.path().join("env").exists());
}

#[test]
fn scenario_exit_codes_and_reproducible_reports() {
    let dir = TempDir::new().unwrap();
    let run = |name: &str, report: &str| qgp(&["scenario", "--spec", &fixture(name), "--report", &p(&dir, report)]);
    assert_eq!(code(&run("clean_both_layers.json", "a.json")), 0);
    assert_eq!(code(&run("clean_both_layers.json", "b.json")), 0);
    let report = std::fs::read(p(&dir, "a.json")).unwrap();
    assert_eq!(report, std::fs::read(p(&dir, "b.json")).unwrap());
    let json: serde_json::Value = serde_json::from_slice(&report).unwrap();
    assert_eq!(json["alarm_triggered"], false);

    assert_eq!(code(&run("eve_full_intercept.json", "eve.json")), 2);
    assert_eq!(code(&run("tamper_first_message.json", "tamper.json")), 1);
    assert_eq!(code(&run("replay_both_layers.json", "replay.json")), 1);

    std::fs::write(dir.path().join("bad.json"), "{\"seed\": 1}").unwrap();
    let out = qgp(&["scenario", "--spec", &p(&dir, "bad.json"), "--report", &p(&dir, "r.json")]);
    assert_eq!(code(&out), 3);
}

#[test]
fn usage_errors_exit_three() {
    let out = qgp(&["bogus"]);
    assert_eq!(code(&out), 3);
    assert!(stderr(&out).contains("Usage"));
    assert_eq!(code(&qgp(&[])), 3);
    assert_eq!(code(&qgp(&["shor", "--n", "15"])), 3);
    assert_eq!(code(&qgp(&["shor", "--n", "15", "--seed", "1", "--frobnicate"])), 3);
    let missing: PathBuf = std::env::temp_dir().join("qgp-definitely-missing");
    let out = qgp(&["open", "--in", missing.to_str().unwrap(), "--verify-key", missing.to_str().unwrap()]);
    assert_eq!(code(&out), 3);
    let both = qgp(&["open", "--in", "a", "--verify-key", "b", "--session-key", "c", "--key-service", "d"]);
    assert_eq!(code(&both), 3);
    assert_eq!(code(&qgp(&["--help"])), 0);
}
