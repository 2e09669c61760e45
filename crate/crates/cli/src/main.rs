//! `qgp`: operator front end for the testbed.
//!
//! Exit codes: 0 success, 1 authentication or verification failure,
//! 2 alarm or abort, 3 usage or input error.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::{Arc, Mutex};

use clap::{Parser, Subcommand, ValueEnum};
use qgp_core::bits::unpack_msb;
use qgp_core::codec::{open, seal, LayerFlags, OpenError, OpenKeys, ReplayRegistry, SealContext};
use qgp_core::keyservice::{ClientError, ErrorCode, KeyPool, KeyServer, KeyServiceClient};
use qgp_core::netsim::{run_scenario, ScenarioSpec, SESSION_KEY_BITS};
use qgp_core::qkd::{csv_row, run_exchange_report, ChannelParams, EveMode, SessionKeyMaterial, CSV_HEADER};
use qgp_core::shor::{
    gcd, order_finding_distribution, recover_period, smallest_coprime_base, split_from_period, validate_modulus,
    function_register_bits, histogram_csv, OrderFindingConfig,
};
use qgp_pqc::{kem_keygen, sig_keygen, HashAlgorithm};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;
use sha3::digest::{ExtendableOutput, Update, XofReader};
use sha3::Shake256;

#[derive(Parser)]
#[command(name = "qgp", version, about = "Quantum-safe messaging testbed")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Derive a key pair from a 32-byte seed; writes <out> and <out>.pub.
    Keygen {
        #[arg(long, value_enum)]
        scheme: Scheme,
        /// 64 hex digits.
        #[arg(long)]
        seed: String,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quantum key distribution rounds.
    Qkd {
        #[command(subcommand)]
        command: QkdCommand,
    },
    /// Serve the key pool over TCP until killed.
    Keyd {
        #[arg(long)]
        listen: String,
        /// QKD rounds run before serving; each success is split into 256-bit keys.
        #[arg(long, default_value_t = 0)]
        prefill_rounds: usize,
        #[arg(long, default_value_t = 20_000)]
        pulses: usize,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Session key files (key_id || key bytes) to ingest.
        #[arg(long)]
        session_key: Vec<PathBuf>,
    },
    /// Sign, compress and encrypt a message into an envelope.
    Seal {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        sign_key: PathBuf,
        /// Adds the Kyber768 layer.
        #[arg(long)]
        kem_pub: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
        /// Name presented to the key service.
        #[arg(long, default_value = "alice")]
        party: String,
        /// Party the fetched key is reserved for.
        #[arg(long, default_value = "bob")]
        peer: String,
        #[arg(long, value_enum, default_value_t = Hash::Sha3)]
        hash: Hash,
        #[arg(long)]
        seed: u64,
    },
    /// Verify and decrypt an envelope; the message goes to --out or stdout.
    Open {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        verify_key: PathBuf,
        #[arg(long)]
        kem_key: Option<PathBuf>,
        #[command(flatten)]
        session: SessionArgs,
        #[arg(long, default_value = "bob")]
        party: String,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a network scenario and write its report.
    Scenario {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Factor N by simulated order finding.
    Shor {
        #[arg(long)]
        n: u64,
        /// Defaults to the smallest base coprime to N.
        #[arg(long)]
        x: Option<u64>,
        /// Argument register width; defaults to twice the function register.
        #[arg(long)]
        t: Option<u32>,
        /// Defaults to t (exact QFT).
        #[arg(long)]
        qft_cutoff: Option<u32>,
        /// Measurements drawn before giving up.
        #[arg(long, default_value_t = 5)]
        samples: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        hist: Option<PathBuf>,
    },
}

#[derive(Subcommand)]
enum QkdCommand {
    /// Run BB84 exchanges and log one CSV row per round.
    Simulate {
        #[arg(long)]
        pulses: usize,
        #[command(flatten)]
        channel: ChannelArgs,
        #[arg(long, default_value_t = 1)]
        rounds: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Writes the first distilled key as key_id || key bytes.
        #[arg(long)]
        key_out: Option<PathBuf>,
    },
}

#[derive(clap::Args)]
struct ChannelArgs {
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 0.0)]
    loss: f64,
    /// Intercept-resend probability.
    #[arg(long, default_value_t = 0.0)]
    eve: f64,
    #[arg(long, default_value_t = 0.11)]
    threshold: f64,
}

impl ChannelArgs {
    fn params(&self) -> ChannelParams {
        ChannelParams {
            noise_flip_prob: self.noise,
            loss_prob: self.loss,
            eve_mode: if self.eve > 0.0 {
                EveMode::InterceptResend {
                    intercept_prob: self.eve,
                }
            } else {
                EveMode::None
            },
        }
    }
}

#[derive(clap::Args)]
#[group(multiple = false)]
struct SessionArgs {
    /// Key service address; adds the QKD layer.
    #[arg(long)]
    key_service: Option<String>,
    /// Session key file (key_id || key bytes); adds the QKD layer.
    #[arg(long)]
    session_key: Option<PathBuf>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Scheme {
    Dilithium3,
    Kyber768,
}

#[derive(Clone, Copy, ValueEnum)]
enum Hash {
    Sha3,
    Sha2,
}

enum Failure {
    Auth(String),
    Abort(String),
    Usage(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Auth(_) => 1,
            Failure::Abort(_) => 2,
            Failure::Usage(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Auth(m) | Failure::Abort(m) | Failure::Usage(m) => m,
        }
    }
}

type Outcome = Result<(), Failure>;

fn usage(msg: impl Into<String>) -> Failure {
    Failure::Usage(msg.into())
}

fn read(path: &Path) -> Result<Vec<u8>, Failure> {
    fs::read(path).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Outcome {
    fs::write(path, bytes).map_err(|e| usage(format!("{}: {e}", path.display())))
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn session_key_file(m: &SessionKeyMaterial) -> Vec<u8> {
    let mut out = m.key_id.to_vec();
    out.extend(m.key_bytes());
    out
}

fn read_session_key(path: &Path) -> Result<SessionKeyMaterial, Failure> {
    let bytes = read(path)?;
    if bytes.len() <= 16 {
        return Err(usage(format!("{}: session key file too short", path.display())));
    }
    Ok(SessionKeyMaterial {
        key_id: bytes[..16].try_into().expect("16 bytes"),
        key_bits: unpack_msb(&bytes[16..], (bytes.len() - 16) * 8),
        qber: 0.0,
        leaked_bits: 0,
    })
}

fn service_failure(e: ClientError) -> Failure {
    match e {
        ClientError::Service(ErrorCode::AlarmActive | ErrorCode::InsufficientKey) => {
            Failure::Abort(format!("key service: {e}"))
        }
        ClientError::Service(_) => Failure::Auth(format!("key service: {e}")),
        _ => usage(e.to_string()),
    }
}

fn keygen(scheme: Scheme, seed: &str, out: &Path) -> Outcome {
    let seed: [u8; 32] = hex::decode(seed)
        .ok()
        .and_then(|s| s.try_into().ok())
        .ok_or_else(|| usage("--seed must be 64 hex digits"))?;
    let (secret, public) = match scheme {
        Scheme::Dilithium3 => {
            let k = sig_keygen(&seed);
            (k.secret_key, k.public_key)
        }
        Scheme::Kyber768 => {
            let mut expanded = [0u8; 64];
            let mut xof = Shake256::default();
            xof.update(&seed);
            xof.finalize_xof().read(&mut expanded);
            let k = kem_keygen(&expanded);
            (k.secret_key, k.public_key)
        }
    };
    write(out, &secret)?;
    write(&with_suffix(out, ".pub"), &public)
}

fn qkd_simulate(
    pulses: usize,
    channel: &ChannelArgs,
    rounds: usize,
    seed: u64,
    csv: Option<&Path>,
    key_out: Option<&Path>,
) -> Outcome {
    let params = channel.params();
    params.validate().map_err(|e| usage(e.to_string()))?;
    if !(channel.threshold > 0.0 && channel.threshold < 0.5) {
        return Err(usage("--threshold must lie in (0, 0.5)"));
    }
    let mut log = format!("{CSV_HEADER}\n");
    let mut aborted = 0;
    let mut key = None;
    for round in 0..rounds {
        let report = run_exchange_report(pulses, &params, channel.threshold, seed.wrapping_add(round as u64));
        log.push_str(&csv_row(round, &report));
        log.push('\n');
        match report.outcome {
            Ok(k) => {
                key.get_or_insert(k);
            }
            Err(_) => aborted += 1,
        }
    }
    print!("{log}");
    if let Some(path) = csv {
        write(path, log.as_bytes())?;
    }
    if let (Some(path), Some(k)) = (key_out, &key) {
        write(path, &session_key_file(k))?;
    }
    if aborted > 0 {
        return Err(Failure::Abort(format!("{aborted} of {rounds} rounds aborted")));
    }
    Ok(())
}

fn keyd(listen: &str, rounds: usize, pulses: usize, channel: &ChannelArgs, seed: u64, files: &[PathBuf]) -> Outcome {
    let params = channel.params();
    params.validate().map_err(|e| usage(e.to_string()))?;
    let mut pool = KeyPool::new();
    for path in files {
        pool.ingest(read_session_key(path)?).map_err(|e| usage(e.to_string()))?;
    }
    for round in 0..rounds {
        let report = run_exchange_report(pulses, &params, channel.threshold, seed.wrapping_add(round as u64));
        eprintln!("{}", csv_row(round, &report));
        match report.outcome {
            Ok(k) => {
                for chunk in k.split(SESSION_KEY_BITS) {
                    pool.ingest(chunk).map_err(|e| usage(e.to_string()))?;
                }
            }
            Err(_) if report.alarm() => pool.raise_alarm(report.qber.unwrap_or(0.5)),
            Err(_) => {}
        }
    }
    let server = KeyServer::spawn(listen, Arc::new(Mutex::new(pool))).map_err(|e| usage(format!("{listen}: {e}")))?;
    println!("listening on {}", server.local_addr());
    let _ = std::io::stdout().flush();
    server.join();
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn seal_cmd(
    input: &Path,
    out: &Path,
    sign_key: &Path,
    kem_pub: Option<&Path>,
    session: &SessionArgs,
    party: &str,
    peer: &str,
    hash: Hash,
    seed: u64,
) -> Outcome {
    let message = read(input)?;
    let signer = read(sign_key)?;
    let kem_public = kem_pub.map(read).transpose()?;
    let session_key = match (&session.key_service, &session.session_key) {
        (Some(addr), _) => {
            let mut client = KeyServiceClient::connect(addr.as_str()).map_err(service_failure)?;
            let k = client.get_key(party, peer, SESSION_KEY_BITS).map_err(service_failure)?;
            Some(SessionKeyMaterial {
                key_id: k.key_id,
                key_bits: unpack_msb(&k.key, k.size_bits),
                qber: 0.0,
                leaked_bits: 0,
            })
        }
        (None, Some(path)) => Some(read_session_key(path)?),
        (None, None) => None,
    };
    let layers = LayerFlags {
        qkd: session_key.is_some(),
        kyber: kem_public.is_some(),
    };
    if !layers.qkd && !layers.kyber {
        return Err(usage("need --kem-pub, --session-key or --key-service"));
    }
    let ctx = SealContext {
        signer: &signer,
        session_key: session_key.as_ref(),
        recipient_kem_public: kem_public.as_deref(),
        hash_algorithm: match hash {
            Hash::Sha3 => HashAlgorithm::Sha3_256,
            Hash::Sha2 => HashAlgorithm::Sha2_256,
        },
    };
    let envelope =
        seal(&message, &ctx, layers, &mut ChaCha20Rng::seed_from_u64(seed)).map_err(|e| usage(e.to_string()))?;
    write(out, &envelope)?;
    if let Some(k) = &session_key {
        println!("key_id {}", k.key_id_hex());
    }
    Ok(())
}

fn open_cmd(
    input: &Path,
    verify_key: &Path,
    kem_key: Option<&Path>,
    session: &SessionArgs,
    party: &str,
    out: Option<&Path>,
) -> Outcome {
    let envelope = read(input)?;
    let verify = read(verify_key)?;
    let kem_secret = kem_key.map(read).transpose()?;
    let keys = OpenKeys {
        kem_secret: kem_secret.as_deref(),
        verify_key: &verify,
    };
    let mut service_error = None;
    let result = match (&session.key_service, &session.session_key) {
        (Some(addr), _) => {
            let mut client = KeyServiceClient::connect(addr.as_str()).map_err(service_failure)?;
            let mut lookup = |id: &[u8; 16]| match client.get_key_by_id(party, id) {
                Ok(k) => Some(k.key),
                Err(e) => {
                    service_error = Some(e);
                    None
                }
            };
            open(&envelope, &keys, &mut lookup, &mut ReplayRegistry::new())
        }
        (None, Some(path)) => {
            let k = read_session_key(path)?;
            let bytes = k.key_bytes();
            let mut lookup = |id: &[u8; 16]| (*id == k.key_id).then(|| bytes.clone());
            open(&envelope, &keys, &mut lookup, &mut ReplayRegistry::new())
        }
        (None, None) => open(&envelope, &keys, &mut |_: &[u8; 16]| None, &mut ReplayRegistry::new()),
    };
    match result {
        Ok(message) => match out {
            Some(path) => write(path, &message),
            None => std::io::stdout().write_all(&message).map_err(|e| usage(e.to_string())),
        },
        Err(OpenError::UnknownKeyId) if service_error.is_some() => {
            Err(service_failure(service_error.expect("checked")))
        }
        Err(e) => Err(Failure::Auth(format!("open failed: {e:?}"))),
    }
}

fn scenario(spec: &Path, report_path: &Path) -> Outcome {
    let text = fs::read_to_string(spec).map_err(|e| usage(format!("{}: {e}", spec.display())))?;
    let spec = ScenarioSpec::from_json(&text).map_err(|e| usage(e.to_string()))?;
    let report = run_scenario(&spec).map_err(|e| usage(e.to_string()))?;
    write(report_path, report.to_json().as_bytes())?;
    let delivered = report.per_message.iter().filter(|m| m.delivered).count();
    println!(
        "qber {} alarm {} delivered {delivered}/{}",
        report.qber.map(|q| format!("{q:.4}")).unwrap_or_else(|| "n/a".into()),
        report.alarm_triggered,
        report.per_message.len()
    );
    for event in &report.detection_events {
        println!("{event}");
    }
    if report.alarm_triggered {
        Err(Failure::Abort("QBER alarm".into()))
    } else if delivered < report.per_message.len() {
        Err(Failure::Auth(format!("{} message(s) rejected", report.per_message.len() - delivered)))
    } else {
        Ok(())
    }
}

#[allow(clippy::too_many_arguments)]
fn shor(
    n: u64,
    x: Option<u64>,
    t: Option<u32>,
    cutoff: Option<u32>,
    samples: usize,
    seed: u64,
    hist: Option<&Path>,
) -> Outcome {
    validate_modulus(n).map_err(|e| usage(e.to_string()))?;
    let x = x.or_else(|| smallest_coprime_base(n)).expect("composite N has a coprime base");
    let g = gcd(x, n);
    if g > 1 {
        println!("gcd({x}, {n}) = {g}");
        println!("factors {},{}", g.min(n / g), g.max(n / g));
        return Ok(());
    }
    let t = t.unwrap_or(2 * function_register_bits(n));
    let cfg = OrderFindingConfig::new(n, x, t).map_err(|e| usage(e.to_string()))?;
    let dist = order_finding_distribution(&cfg, cutoff.unwrap_or(t)).map_err(|e| usage(e.to_string()))?;
    if let Some(path) = hist {
        write(path, histogram_csv(&dist).as_bytes())?;
    }
    let Some(r) = recover_period(&dist, &cfg, seed, samples) else {
        return Err(Failure::Abort(format!("no period recovered from {samples} samples")));
    };
    println!("period {r}");
    match split_from_period(n, x, r) {
        Some((p, q)) => {
            println!("factors {p},{q}");
            Ok(())
        }
        None => Err(Failure::Abort(format!("period {r} of base {x} does not split {n}"))),
    }
}

fn run(cli: Cli) -> Outcome {
    match cli.command {
        Command::Keygen { scheme, seed, out } => keygen(scheme, &seed, &out),
        Command::Qkd {
            command:
                QkdCommand::Simulate {
                    pulses,
                    channel,
                    rounds,
                    seed,
                    csv,
                    key_out,
                },
        } => qkd_simulate(pulses, &channel, rounds, seed, csv.as_deref(), key_out.as_deref()),
        Command::Keyd {
            listen,
            prefill_rounds,
            pulses,
            channel,
            seed,
            session_key,
        } => keyd(&listen, prefill_rounds, pulses, &channel, seed, &session_key),
        Command::Seal {
            input,
            out,
            sign_key,
            kem_pub,
            session,
            party,
            peer,
            hash,
            seed,
        } => seal_cmd(&input, &out, &sign_key, kem_pub.as_deref(), &session, &party, &peer, hash, seed),
        Command::Open {
            input,
            verify_key,
            kem_key,
            session,
            party,
            out,
        } => open_cmd(&input, &verify_key, kem_key.as_deref(), &session, &party, out.as_deref()),
        Command::Scenario { spec, report } => scenario(&spec, &report),
        Command::Shor {
            n,
            x,
            t,
            qft_cutoff,
            samples,
            seed,
            hist,
        } => shor(n, x, t, qft_cutoff, samples, seed, hist.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(3);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("qgp: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
