//! Operator CLI for the certificateless VANET authentication scheme:
//! parameter/key generation, the registration lifecycle, sign/verify/
//! batch-verify, conditional tracing, scenario simulation, and timing
//! benchmarks.
//!
//! Exit codes: 0 success (verify/batch-verify: accept), 1 verification
//! rejected, 2 usage or I/O errors. Verdict lines on stdout are stable
//! strings.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use qs_cl_cppa::bits::BitString;
use qs_cl_cppa::codec;
use qs_cl_cppa::harness::{run_bench, run_scenario, BenchConfig, ScenarioConfig};
use qs_cl_cppa::protocol::{
    derive_keys, pid_request, setup, Profile, SystemParams, TrustedAuthority,
};
use qs_cl_cppa::signing::{batch_verify, sign_message, verify, PublicKeyDirectory};
use qs_cl_cppa::store::{
    kind_of, load_directory, load_params, load_ta, load_vehicle, save_directory, save_params,
    save_ta, save_vehicle, Kind, VehicleStage, VehicleStore,
};
use qs_cl_cppa::Timestamp;

#[derive(Parser)]
#[command(
    name = "qs-cl-cppa",
    version,
    about = "Certificateless privacy-preserving beacon authentication for VANETs"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate system parameters and the TA key store.
    Setup {
        /// Parameter set: paper123 or toy.
        #[arg(long, default_value = "paper123")]
        profile: String,
        /// Seed for reproducible generation; omit for OS entropy.
        #[arg(long)]
        seed: Option<u64>,
        /// TA store output path.
        #[arg(long)]
        out: PathBuf,
        /// Also write a parameters-only file for verifiers.
        #[arg(long)]
        params_out: Option<PathBuf>,
    },
    /// Register a vehicle: request and issue a pseudonym.
    Register {
        /// TA store (updated in place with the new registration).
        #[arg(long)]
        keys: PathBuf,
        /// Real identity as hex (l bits, zero-padded); random if omitted.
        #[arg(long)]
        rid: Option<String>,
        /// Epoch timestamp in seconds; defaults to system time.
        #[arg(long)]
        time: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        /// Vehicle store output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Issue the TA's partial secret key to a registered vehicle.
    IssuePsk {
        /// TA store.
        #[arg(long)]
        keys: PathBuf,
        /// Vehicle store (updated in place).
        #[arg(long)]
        vehicle: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Validate the partial key and derive the full key pair.
    DeriveKeys {
        /// Vehicle store (updated in place).
        #[arg(long)]
        vehicle: PathBuf,
        /// Append the (pid, pk) announcement to this directory file.
        #[arg(long)]
        announce: Option<PathBuf>,
    },
    /// Sign a payload file into a broadcast message file.
    Sign {
        /// Vehicle store with a complete credential.
        #[arg(long)]
        vehicle: PathBuf,
        /// Payload file.
        #[arg(long = "in")]
        input: PathBuf,
        /// Message file output path.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Verify one message file. Prints ACCEPT or REJECT: <reason>.
    Verify {
        /// Parameters file (params container; TA store also accepted).
        #[arg(long)]
        params: Option<PathBuf>,
        /// Directory file with announced public keys.
        #[arg(long)]
        directory: PathBuf,
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Verify several message files with one aggregated check.
    BatchVerify {
        #[arg(long)]
        params: Option<PathBuf>,
        #[arg(long)]
        directory: PathBuf,
        /// Comma-separated message files.
        #[arg(long = "in", value_delimiter = ',', required = true)]
        input: Vec<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Recover the real identity behind a message's pseudonym (TA only).
    Trace {
        /// TA store.
        #[arg(long)]
        keys: PathBuf,
        /// Message file.
        #[arg(long = "in")]
        input: PathBuf,
    },
    /// Run a scripted simulation scenario and print its report.
    Simulate {
        /// Scenario script (TOML).
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Also write the report to a file.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Measure sign/verify/batch-verify timings and emit CSV.
    Bench {
        #[arg(long, default_value = "paper123")]
        profile: String,
        /// Comma-separated batch sizes.
        #[arg(long, value_delimiter = ',', default_value = "50,100,150,200,250,300")]
        batches: Vec<usize>,
        /// Timing repetitions per phase.
        #[arg(long, default_value_t = 25)]
        reps: usize,
        #[arg(long)]
        seed: Option<u64>,
        /// CSV output path; stdout if omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.cmd) {
        Ok(code) => code,
        Err(err) => {
            eprintln!("error: {err:#}");
            ExitCode::from(2)
        }
    }
}

fn rng_from(seed: Option<u64>) -> ChaCha20Rng {
    match seed {
        Some(s) => ChaCha20Rng::seed_from_u64(s),
        None => ChaCha20Rng::from_entropy(),
    }
}

fn parse_profile(name: &str) -> Result<Profile> {
    Profile::from_name(name)
        .ok_or_else(|| anyhow!("unknown profile {name:?} (expected paper123 or toy)"))
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).with_context(|| format!("reading {}", path.display()))
}

fn write(path: &Path, bytes: &[u8]) -> Result<()> {
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

/// Accepts a params container or a TA store as the parameter source.
fn params_from_file(path: &Path) -> Result<SystemParams> {
    let bytes = read(path)?;
    match kind_of(&bytes)? {
        Kind::Params => Ok(load_params(&bytes)?),
        Kind::TaStore => Ok(load_ta(&bytes)?.params().clone()),
        other => bail!("{} holds {:?}, not parameters", path.display(), other),
    }
}

fn load_verifier_state(
    params_path: &Option<PathBuf>,
    directory_path: &Path,
) -> Result<(SystemParams, PublicKeyDirectory)> {
    let (dir_params, directory) = load_directory(&read(directory_path)?)?;
    let params = match params_path {
        Some(path) => {
            let params = params_from_file(path)?;
            if params != dir_params {
                bail!("parameters file does not match the directory's parameters");
            }
            params
        }
        None => dir_params,
    };
    Ok((params, directory))
}

fn now_secs() -> u32 {
    std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs() as u32)
        .unwrap_or(0)
}

fn run(cmd: Cmd) -> Result<ExitCode> {
    match cmd {
        Cmd::Setup {
            profile,
            seed,
            out,
            params_out,
        } => {
            let profile = parse_profile(&profile)?;
            let mut rng = rng_from(seed);
            let (params, master) = setup(profile, &mut rng);
            let ta = TrustedAuthority::new(params.clone(), master);
            write(&out, &save_ta(&ta))?;
            if let Some(path) = params_out {
                write(&path, &save_params(&params))?;
            }
            println!(
                "setup {} q={} m={} n={} l={} -> {}",
                profile.name(),
                params.q().get(),
                params.m(),
                params.n(),
                params.l(),
                out.display()
            );
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Register {
            keys,
            rid,
            time,
            seed,
            out,
        } => {
            let mut ta = load_ta(&read(&keys)?)?;
            let params = ta.params().clone();
            let mut rng = rng_from(seed);
            let rid = match rid {
                Some(hex_str) => {
                    let bytes = hex::decode(hex_str.trim()).context("decoding --rid hex")?;
                    if bytes.len() != params.l().div_ceil(8) {
                        bail!(
                            "--rid must be {} bytes of hex for l = {} bits",
                            params.l().div_ceil(8),
                            params.l()
                        );
                    }
                    BitString::from_bytes(params.l(), &bytes)
                }
                None => BitString::random(params.l(), &mut rng),
            };
            let now = Timestamp(time.unwrap_or_else(now_secs));
            let (a, pk1) = pid_request(&params, &mut rng);
            let pid = ta.pid_issue(&pk1, &rid, now)?;
            write(&keys, &save_ta(&ta))?;
            let store = VehicleStore {
                params,
                stage: VehicleStage::Registered {
                    pid: pid.clone(),
                    self_secret: a,
                    self_pub: pk1,
                },
            };
            write(&out, &save_vehicle(&store))?;
            println!("registered pid={} t={}", pid.pid.to_hex(), pid.t.0);
            Ok(ExitCode::SUCCESS)
        }

        Cmd::IssuePsk {
            keys,
            vehicle,
            seed,
        } => {
            let ta = load_ta(&read(&keys)?)?;
            let store = load_vehicle(&read(&vehicle)?)?;
            let VehicleStage::Registered {
                pid,
                self_secret,
                self_pub,
            } = store.stage
            else {
                bail!("vehicle store already has a partial key");
            };
            if store.params != *ta.params() {
                bail!("vehicle and TA stores disagree on parameters");
            }
            let mut rng = rng_from(seed);
            let partial = ta.psk_issue(&self_pub, &pid, &mut rng)?;
            let updated = VehicleStore {
                params: store.params,
                stage: VehicleStage::Issued {
                    pid,
                    self_secret,
                    self_pub,
                    partial,
                },
            };
            write(&vehicle, &save_vehicle(&updated))?;
            println!("partial key issued");
            Ok(ExitCode::SUCCESS)
        }

        Cmd::DeriveKeys { vehicle, announce } => {
            let store = load_vehicle(&read(&vehicle)?)?;
            let VehicleStage::Issued {
                pid,
                self_secret,
                self_pub,
                partial,
            } = store.stage
            else {
                bail!("vehicle store needs a partial key first (run issue-psk)");
            };
            let cred = derive_keys(&store.params, pid, self_secret, self_pub, partial)?;
            if let Some(path) = &announce {
                let mut directory = if path.exists() {
                    let (dir_params, dir) = load_directory(&read(path)?)?;
                    if dir_params != store.params {
                        bail!("directory parameters do not match the vehicle's");
                    }
                    dir
                } else {
                    PublicKeyDirectory::new()
                };
                directory.announce(cred.pid.clone(), cred.pk.clone());
                write(path, &save_directory(&directory, &store.params))?;
            }
            println!(
                "derived keys pid={} t={}",
                cred.pid.pid.to_hex(),
                cred.pid.t.0
            );
            let updated = VehicleStore {
                params: store.params,
                stage: VehicleStage::Complete(cred),
            };
            write(&vehicle, &save_vehicle(&updated))?;
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Sign {
            vehicle,
            input,
            out,
            seed,
        } => {
            let store = load_vehicle(&read(&vehicle)?)?;
            let VehicleStage::Complete(cred) = &store.stage else {
                bail!("vehicle store has no complete credential (run derive-keys)");
            };
            let payload = read(&input)?;
            let mut rng = rng_from(seed);
            let msg = sign_message(cred, &payload, &store.params, &mut rng);
            write(&out, &codec::encode_file(&msg, &store.params)?)?;
            println!(
                "signed {} payload bytes, wire fixed portion {} bytes",
                payload.len(),
                codec::wire_fixed_len(&store.params)
            );
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Verify {
            params,
            directory,
            input,
        } => {
            let (params, directory) = load_verifier_state(&params, &directory)?;
            let msg = codec::decode_file(&read(&input)?, &params)?;
            let Some(pk) = directory.lookup(&msg.pid) else {
                println!("REJECT: UnknownPseudonym");
                return Ok(ExitCode::from(1));
            };
            if verify(&msg, pk, &params)? {
                println!("ACCEPT");
                Ok(ExitCode::SUCCESS)
            } else {
                println!("REJECT: BadSignature");
                Ok(ExitCode::from(1))
            }
        }

        Cmd::BatchVerify {
            params,
            directory,
            input,
            seed,
        } => {
            let (params, directory) = load_verifier_state(&params, &directory)?;
            let items = input
                .iter()
                .map(|path| Ok(codec::decode_file(&read(path)?, &params)?))
                .collect::<Result<Vec<_>>>()?;
            let mut rng = rng_from(seed);
            match batch_verify(&items, &directory, &params, &mut rng) {
                Ok(true) => {
                    println!("ACCEPT");
                    Ok(ExitCode::SUCCESS)
                }
                Ok(false) => {
                    println!("REJECT: BadSignature");
                    Ok(ExitCode::from(1))
                }
                Err(qs_cl_cppa::SigningError::UnknownPseudonym) => {
                    println!("REJECT: UnknownPseudonym");
                    Ok(ExitCode::from(1))
                }
                Err(e) => Err(e.into()),
            }
        }

        Cmd::Trace { keys, input } => {
            let ta = load_ta(&read(&keys)?)?;
            let msg = codec::decode_file(&read(&input)?, ta.params())?;
            let rid = ta.trace(&msg.pid)?;
            println!("rid={}", rid.to_hex());
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Simulate {
            scenario,
            seed,
            out,
        } => {
            let text = fs::read_to_string(&scenario)
                .with_context(|| format!("reading {}", scenario.display()))?;
            let config = ScenarioConfig::from_toml(&text)?;
            let report = run_scenario(&config, seed)?;
            let rendered = report.render();
            if let Some(path) = out {
                write(&path, rendered.as_bytes())?;
            }
            print!("{rendered}");
            Ok(ExitCode::SUCCESS)
        }

        Cmd::Bench {
            profile,
            batches,
            reps,
            seed,
            out,
        } => {
            let config = BenchConfig {
                profile: parse_profile(&profile)?,
                batch_sizes: batches,
                repetitions: reps,
            };
            let report = run_bench(&config, seed.unwrap_or(0));
            let csv = report.to_csv();
            match out {
                Some(path) => write(&path, csv.as_bytes())?,
                None => print!("{csv}"),
            }
            Ok(ExitCode::SUCCESS)
        }
    }
}
