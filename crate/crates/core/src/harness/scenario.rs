//! Scripted, deterministic simulation of TA, RSU, and vehicle actors.
//!
//! A scenario is a TOML script: a profile, an actor roster, policy knobs,
//! and a timeline of steps. The driver is single-threaded; actors are
//! stepped in declaration order, all randomness flows from one seeded
//! RNG, and the report renders with fixed field order — so identical
//! `(script, seed)` pairs produce byte-identical reports.
//!
//! Registration and partial-key issuance run over an in-process trusted
//! call standing in for the protocol's secure channel. The broadcast
//! channel applies an optional per-delivery drop probability and carries
//! the adversary's modify/replay injections.

use std::collections::{BTreeMap, HashSet, VecDeque};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha20Rng;
use serde::Deserialize;

use crate::bits::BitString;
use crate::codec;
use crate::error::ScenarioError;
use crate::protocol::{
    derive_keys, pid_request, setup, Profile, TrustedAuthority, VehicleCredential,
};
use crate::signing::{sign_message, verify, PublicKeyDirectory};
use crate::Timestamp;

/// Monotone simulation clock in whole seconds.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimClock {
    now: u32,
}

impl SimClock {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn now(&self) -> Timestamp {
        Timestamp(self.now)
    }

    pub fn advance_to(&mut self, at: u32) -> Result<(), ScenarioError> {
        if at < self.now {
            return Err(ScenarioError::ClockBackwards { at, now: self.now });
        }
        self.now = at;
        Ok(())
    }
}

/// Beacon acceptance policy at the verifier.
#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
pub struct FreshnessPolicy {
    /// Maximum age in seconds of the pseudonym-epoch timestamp.
    #[serde(default = "default_max_age")]
    pub max_age: u32,
    /// How many accepted (pid, t, R) triples the duplicate window keeps.
    #[serde(default = "default_replay_window")]
    pub replay_window: usize,
}

fn default_max_age() -> u32 {
    300
}

fn default_replay_window() -> usize {
    4096
}

impl Default for FreshnessPolicy {
    fn default() -> Self {
        Self {
            max_age: default_max_age(),
            replay_window: default_replay_window(),
        }
    }
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq, Default)]
pub struct ChannelConfig {
    /// Per-delivery loss probability on the broadcast channel.
    #[serde(default)]
    pub drop_prob: f64,
}

/// One timeline step.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct StepConfig {
    pub at: u32,
    pub action: Action,
    /// Beacons per vehicle, tampered deliveries, or replayed captures.
    #[serde(default)]
    pub count: Option<usize>,
    /// Restrict the step to one vehicle index; all vehicles otherwise.
    #[serde(default)]
    pub vehicle: Option<usize>,
}

#[derive(Debug, Clone, Copy, Deserialize, PartialEq)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// Run the full key lifecycle and announce public keys. Re-running
    /// rotates the targeted vehicles onto fresh pseudonym epochs.
    Register,
    /// Each targeted vehicle broadcasts `count` signed beacons.
    Beacon,
    /// The adversary intercepts `count` fresh beacons and flips one
    /// payload byte in transit.
    Modify,
    /// The adversary re-delivers `count` previously accepted envelopes.
    Replay,
}

/// Declarative scenario script.
#[derive(Debug, Clone, Deserialize, PartialEq)]
pub struct ScenarioConfig {
    pub profile: String,
    pub vehicles: usize,
    #[serde(default)]
    pub policy: FreshnessPolicy,
    #[serde(default)]
    pub channel: ChannelConfig,
    #[serde(default)]
    pub steps: Vec<StepConfig>,
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self, ScenarioError> {
        let config: ScenarioConfig =
            toml::from_str(text).map_err(|e| ScenarioError::Parse(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    fn validate(&self) -> Result<(), ScenarioError> {
        if Profile::from_name(&self.profile).is_none() {
            return Err(ScenarioError::Parse(format!(
                "unknown profile {:?}",
                self.profile
            )));
        }
        if self.vehicles == 0 {
            return Err(ScenarioError::Parse("vehicles must be positive".into()));
        }
        if self.policy.max_age == 0 {
            return Err(ScenarioError::Parse("max_age must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.channel.drop_prob) {
            return Err(ScenarioError::Parse(
                "drop_prob must be within [0, 1]".into(),
            ));
        }
        for step in &self.steps {
            if let Some(v) = step.vehicle {
                if v >= self.vehicles {
                    return Err(ScenarioError::UnknownActor(v));
                }
            }
        }
        Ok(())
    }
}

/// Why a delivery was rejected.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum RejectReason {
    Malformed,
    Stale,
    Duplicate,
    UnknownPseudonym,
    BadSignature,
}

impl RejectReason {
    pub const ALL: [RejectReason; 5] = [
        RejectReason::Malformed,
        RejectReason::Stale,
        RejectReason::Duplicate,
        RejectReason::UnknownPseudonym,
        RejectReason::BadSignature,
    ];

    pub fn code(self) -> &'static str {
        match self {
            RejectReason::Malformed => "Malformed",
            RejectReason::Stale => "Stale",
            RejectReason::Duplicate => "Duplicate",
            RejectReason::UnknownPseudonym => "UnknownPseudonym",
            RejectReason::BadSignature => "BadSignature",
        }
    }
}

/// Vehicle actor: real identity and the current credential epoch.
pub struct VehicleActor {
    pub rid: BitString,
    pub cred: Option<VehicleCredential>,
}

/// RSU actor: pseudonym directory, inbox, and a bounded duplicate window.
///
/// The window keys on the entire envelope, which subsumes the
/// `(pid, t, R)` triple: a replayed capture is byte-identical and always
/// matches, while honest beacons never do — even at the toy profile,
/// where the commitment space is small enough for honest `R` collisions.
pub struct RsuActor {
    pub directory: PublicKeyDirectory,
    pub inbox: VecDeque<Vec<u8>>,
    policy: FreshnessPolicy,
    window: VecDeque<Vec<u8>>,
    window_set: HashSet<Vec<u8>>,
}

impl RsuActor {
    pub fn new(policy: FreshnessPolicy) -> Self {
        Self {
            directory: PublicKeyDirectory::new(),
            inbox: VecDeque::new(),
            policy,
            window: VecDeque::new(),
            window_set: HashSet::new(),
        }
    }

    fn remember(&mut self, key: Vec<u8>) {
        if self.window_set.insert(key.clone()) {
            self.window.push_back(key);
            while self.window.len() > self.policy.replay_window {
                if let Some(old) = self.window.pop_front() {
                    self.window_set.remove(&old);
                }
            }
        }
    }

    /// Verifies one delivery: staleness, then the duplicate window, then
    /// the signature identity.
    pub fn accept(
        &mut self,
        bytes: &[u8],
        now: Timestamp,
        params: &crate::protocol::SystemParams,
    ) -> Result<(), RejectReason> {
        let msg = codec::decode(bytes, params).map_err(|_| RejectReason::Malformed)?;
        let age = now.0.saturating_sub(msg.pid.t.0);
        if age > self.policy.max_age {
            return Err(RejectReason::Stale);
        }
        let key = bytes.to_vec();
        if self.window_set.contains(&key) {
            return Err(RejectReason::Duplicate);
        }
        let pk = self
            .directory
            .lookup(&msg.pid)
            .ok_or(RejectReason::UnknownPseudonym)?;
        match verify(&msg, pk, params) {
            Ok(true) => {
                self.remember(key);
                Ok(())
            }
            Ok(false) => Err(RejectReason::BadSignature),
            Err(_) => Err(RejectReason::Malformed),
        }
    }
}

/// Deterministic run summary; [`SimReport::render`] is the byte-stable
/// report form.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SimReport {
    pub profile: String,
    pub seed: u64,
    pub sent: u64,
    pub injected: u64,
    pub dropped: u64,
    pub accepted: u64,
    pub rejected: BTreeMap<&'static str, u64>,
    pub steps: Vec<String>,
}

impl SimReport {
    pub fn render(&self) -> String {
        let mut out = String::new();
        out.push_str(&format!("profile = {}\n", self.profile));
        out.push_str(&format!("seed = {}\n", self.seed));
        out.push_str(&format!("sent = {}\n", self.sent));
        out.push_str(&format!("injected = {}\n", self.injected));
        out.push_str(&format!("dropped = {}\n", self.dropped));
        out.push_str(&format!("accepted = {}\n", self.accepted));
        for reason in RejectReason::ALL {
            let count = self.rejected.get(reason.code()).copied().unwrap_or(0);
            out.push_str(&format!("rejected.{} = {}\n", reason.code(), count));
        }
        for line in &self.steps {
            out.push_str(&format!("step {line}\n"));
        }
        out
    }
}

struct Sim {
    params: crate::protocol::SystemParams,
    ta: TrustedAuthority,
    vehicles: Vec<VehicleActor>,
    rsu: RsuActor,
    clock: SimClock,
    channel: ChannelConfig,
    rng: ChaCha20Rng,
    /// Adversary's capture log of accepted envelopes.
    captured: Vec<Vec<u8>>,
    report: SimReport,
}

impl Sim {
    fn targets(&self, step: &StepConfig) -> Vec<usize> {
        match step.vehicle {
            Some(v) => vec![v],
            None => (0..self.vehicles.len()).collect(),
        }
    }

    fn register(&mut self, step: &StepConfig) -> Result<(), ScenarioError> {
        let now = self.clock.now();
        let mut registered = 0;
        for idx in self.targets(step) {
            let rid = self.vehicles[idx].rid.clone();
            let (a, pk1) = pid_request(&self.params, &mut self.rng);
            let pid = self
                .ta
                .pid_issue(&pk1, &rid, now)
                .map_err(|e| ScenarioError::Parse(format!("registration failed: {e}")))?;
            let partial = self
                .ta
                .psk_issue(&pk1, &pid, &mut self.rng)
                .map_err(|e| ScenarioError::Parse(format!("issuance failed: {e}")))?;
            let cred = derive_keys(&self.params, pid, a, pk1, partial)
                .map_err(|e| ScenarioError::Parse(format!("derivation failed: {e}")))?;
            self.rsu
                .directory
                .announce(cred.pid.clone(), cred.pk.clone());
            self.vehicles[idx].cred = Some(cred);
            registered += 1;
        }
        self.report
            .steps
            .push(format!("at={} register n={registered}", now.0));
        Ok(())
    }

    /// Pushes one envelope through the lossy channel into the RSU inbox,
    /// then lets the RSU drain its inbox.
    fn deliver(&mut self, bytes: Vec<u8>) {
        if self.channel.drop_prob > 0.0 && self.rng.gen::<f64>() < self.channel.drop_prob {
            self.report.dropped += 1;
            return;
        }
        self.rsu.inbox.push_back(bytes);
        let now = self.clock.now();
        while let Some(envelope) = self.rsu.inbox.pop_front() {
            match self.rsu.accept(&envelope, now, &self.params) {
                Ok(()) => {
                    self.report.accepted += 1;
                    self.captured.push(envelope);
                }
                Err(reason) => {
                    *self.report.rejected.entry(reason.code()).or_insert(0) += 1;
                }
            }
        }
    }

    fn beacon(&mut self, step: &StepConfig) -> Result<(), ScenarioError> {
        let count = step.count.unwrap_or(1);
        let now = self.clock.now();
        let mut sent = 0;
        for idx in self.targets(step) {
            let Some(cred) = self.vehicles[idx].cred.clone() else {
                return Err(ScenarioError::Parse(format!(
                    "vehicle {idx} beacons before registration"
                )));
            };
            for seq in 0..count {
                let mut payload = format!("beacon v{idx} t{} n{seq} ", now.0).into_bytes();
                let mut entropy = [0u8; 8];
                self.rng.fill_bytes(&mut entropy);
                payload.extend_from_slice(&entropy);
                let msg = sign_message(&cred, &payload, &self.params, &mut self.rng);
                let bytes = codec::encode(&msg, &self.params)
                    .map_err(|e| ScenarioError::Parse(format!("encode failed: {e}")))?;
                self.report.sent += 1;
                sent += 1;
                self.deliver(bytes);
            }
        }
        self.report
            .steps
            .push(format!("at={} beacon n={sent}", now.0));
        Ok(())
    }

    /// In-transit payload tampering: each targeted beacon has one payload
    /// bit flipped between signer and verifier.
    fn modify(&mut self, step: &StepConfig) -> Result<(), ScenarioError> {
        let count = step.count.unwrap_or(1);
        let now = self.clock.now();
        let payload_offset = codec::wire_fixed_len(&self.params) + 2;
        let targets = self.targets(step);
        let mut injected = 0;
        for seq in 0..count {
            let idx = targets[seq % targets.len()];
            let Some(cred) = self.vehicles[idx].cred.clone() else {
                return Err(ScenarioError::Parse(format!(
                    "vehicle {idx} targeted before registration"
                )));
            };
            let payload = format!("victim v{idx} t{} n{seq} padding", now.0).into_bytes();
            let msg = sign_message(&cred, &payload, &self.params, &mut self.rng);
            let mut bytes = codec::encode(&msg, &self.params)
                .map_err(|e| ScenarioError::Parse(format!("encode failed: {e}")))?;
            self.report.sent += 1;
            let at = payload_offset + (self.rng.gen::<usize>() % payload.len());
            bytes[at] ^= 1 << (self.rng.gen::<u32>() % 8);
            self.report.injected += 1;
            injected += 1;
            self.deliver(bytes);
        }
        self.report
            .steps
            .push(format!("at={} modify n={injected}", now.0));
        Ok(())
    }

    /// Re-delivery of previously accepted envelopes from the capture log.
    fn replay(&mut self, step: &StepConfig) -> Result<(), ScenarioError> {
        let count = step.count.unwrap_or(1);
        let now = self.clock.now();
        if self.captured.is_empty() {
            return Err(ScenarioError::Parse(
                "replay step before any accepted traffic".into(),
            ));
        }
        let mut injected = 0;
        for seq in 0..count {
            let envelope = self.captured[seq % self.captured.len()].clone();
            self.report.injected += 1;
            injected += 1;
            self.deliver(envelope);
        }
        self.report
            .steps
            .push(format!("at={} replay n={injected}", now.0));
        Ok(())
    }
}

/// Runs a scenario to completion; deterministic for a fixed seed.
pub fn run_scenario(config: &ScenarioConfig, seed: u64) -> Result<SimReport, ScenarioError> {
    config.validate()?;
    let profile = Profile::from_name(&config.profile).expect("validated profile name");
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (params, master) = setup(profile, &mut rng);
    let ta = TrustedAuthority::new(params.clone(), master);
    let vehicles = (0..config.vehicles)
        .map(|_| VehicleActor {
            rid: BitString::random(params.l(), &mut rng),
            cred: None,
        })
        .collect();

    let mut sim = Sim {
        ta,
        vehicles,
        rsu: RsuActor::new(config.policy),
        clock: SimClock::new(),
        channel: config.channel,
        rng,
        captured: Vec::new(),
        report: SimReport {
            profile: config.profile.clone(),
            seed,
            sent: 0,
            injected: 0,
            dropped: 0,
            accepted: 0,
            rejected: BTreeMap::new(),
            steps: Vec::new(),
        },
        params,
    };

    let mut steps = config.steps.clone();
    steps.sort_by_key(|s| s.at);
    for step in &steps {
        sim.clock.advance_to(step.at)?;
        match step.action {
            Action::Register => sim.register(step)?,
            Action::Beacon => sim.beacon(step)?,
            Action::Modify => sim.modify(step)?,
            Action::Replay => sim.replay(step)?,
        }
    }
    Ok(sim.report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::store;

    fn honest_script() -> ScenarioConfig {
        ScenarioConfig::from_toml(
            r#"
            profile = "toy"
            vehicles = 10

            [[steps]]
            at = 0
            action = "register"

            [[steps]]
            at = 5
            action = "beacon"
            count = 20
            "#,
        )
        .unwrap()
    }

    #[test]
    fn honest_scenario_accepts_everything() {
        for seed in [1u64, 2, 99] {
            let report = run_scenario(&honest_script(), seed).unwrap();
            assert_eq!(report.sent, 200);
            assert_eq!(report.accepted, 200);
            assert!(report.rejected.values().all(|&v| v == 0));
        }
    }

    #[test]
    fn identical_script_and_seed_render_identically() {
        let script = honest_script();
        let a = run_scenario(&script, 7).unwrap().render();
        let b = run_scenario(&script, 7).unwrap().render();
        assert_eq!(a, b);
        let c = run_scenario(&script, 8).unwrap().render();
        assert_ne!(a, c, "different seeds should differ somewhere");
    }

    #[test]
    fn modification_attack_is_rejected_as_bad_signature() {
        // Needs the full profile for the 1/(q-1) ≈ 1% false-accept bound.
        let script = ScenarioConfig::from_toml(
            r#"
            profile = "paper123"
            vehicles = 2

            [[steps]]
            at = 0
            action = "register"

            [[steps]]
            at = 1
            action = "modify"
            count = 100
            "#,
        )
        .unwrap();
        let report = run_scenario(&script, 3).unwrap();
        assert_eq!(report.injected, 100);
        let bad = report.rejected.get("BadSignature").copied().unwrap_or(0);
        assert!(bad >= 95, "only {bad}/100 tampered beacons rejected");
        assert_eq!(report.accepted + bad, 100);
    }

    #[test]
    fn replay_within_window_is_duplicate_after_age_is_stale() {
        let script = ScenarioConfig::from_toml(
            r#"
            profile = "toy"
            vehicles = 1

            [policy]
            max_age = 300
            replay_window = 4096

            [[steps]]
            at = 0
            action = "register"

            [[steps]]
            at = 5
            action = "beacon"
            count = 3

            [[steps]]
            at = 10
            action = "replay"
            count = 3

            [[steps]]
            at = 400
            action = "replay"
            count = 3
            "#,
        )
        .unwrap();
        let report = run_scenario(&script, 11).unwrap();
        assert_eq!(report.accepted, 3);
        assert_eq!(report.rejected.get("Duplicate"), Some(&3));
        assert_eq!(report.rejected.get("Stale"), Some(&3));
    }

    #[test]
    fn rekeying_unlinks_pseudonym_epochs() {
        // One vehicle, two registrations at different timestamps: the
        // pseudonyms differ and so does every varying envelope field.
        let mut rng = ChaCha20Rng::seed_from_u64(21);
        let (params, master) = setup(Profile::Toy, &mut rng);
        let mut ta = TrustedAuthority::new(params.clone(), master);
        let rid = BitString::random(params.l(), &mut rng);

        let issue = |ta: &mut TrustedAuthority, t: u32, rng: &mut ChaCha20Rng| {
            let (a, pk1) = pid_request(&params, rng);
            let pid = ta.pid_issue(&pk1, &rid, Timestamp(t)).unwrap();
            let partial = ta.psk_issue(&pk1, &pid, rng).unwrap();
            derive_keys(&params, pid, a, pk1, partial).unwrap()
        };
        let cred1 = issue(&mut ta, 100, &mut rng);
        let cred2 = issue(&mut ta, 200, &mut rng);
        assert_ne!(cred1.pid.pid, cred2.pid.pid);

        let payload = b"same payload";
        let m1 = sign_message(&cred1, payload, &params, &mut rng);
        let m2 = sign_message(&cred2, payload, &params, &mut rng);
        assert_ne!(m1.pid.pid, m2.pid.pid);
        assert_ne!(m1.pid.t, m2.pid.t);
        assert_ne!(m1.r_pub, m2.r_pub);
        assert_ne!(m1.sigma, m2.sigma);

        // both pseudonyms trace back to the same real identity
        assert_eq!(ta.trace(&cred1.pid).unwrap(), rid);
        assert_eq!(ta.trace(&cred2.pid).unwrap(), rid);
    }

    #[test]
    fn master_secret_absent_from_non_ta_actor_state() {
        let mut rng = ChaCha20Rng::seed_from_u64(31);
        let (params, master) = setup(Profile::Toy, &mut rng);
        let mut ta = TrustedAuthority::new(params.clone(), master);
        let d_bytes = ta.master().as_vec().to_bytes();

        let mut rsu = RsuActor::new(FreshnessPolicy::default());
        for _ in 0..5 {
            let (a, pk1) = pid_request(&params, &mut rng);
            let rid = BitString::random(params.l(), &mut rng);
            let pid = ta.pid_issue(&pk1, &rid, Timestamp(0)).unwrap();
            let partial = ta.psk_issue(&pk1, &pid, &mut rng).unwrap();
            let cred = derive_keys(&params, pid, a, pk1, partial).unwrap();
            rsu.directory.announce(cred.pid.clone(), cred.pk.clone());

            let vehicle_bytes = store::save_vehicle(&store::VehicleStore {
                params: params.clone(),
                stage: store::VehicleStage::Complete(cred),
            });
            assert!(!store::contains_pattern(&vehicle_bytes, &d_bytes));
        }
        let rsu_bytes = store::save_directory(&rsu.directory, &params);
        assert!(!store::contains_pattern(&rsu_bytes, &d_bytes));
    }

    #[test]
    fn scripts_reject_bad_input() {
        assert!(matches!(
            ScenarioConfig::from_toml("profile = \"toy\""),
            Err(ScenarioError::Parse(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml(
                "profile = \"nope\"\nvehicles = 1\n[[steps]]\nat = 0\naction = \"register\""
            ),
            Err(ScenarioError::Parse(_))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml(
                "profile = \"toy\"\nvehicles = 2\n[[steps]]\nat = 0\naction = \"beacon\"\nvehicle = 5"
            ),
            Err(ScenarioError::UnknownActor(5))
        ));
        assert!(matches!(
            ScenarioConfig::from_toml("profile = \"toy\"\nvehicles = 1\n[policy]\nmax_age = 0"),
            Err(ScenarioError::Parse(_))
        ));
        // beacon before registration is a script error
        let script = ScenarioConfig::from_toml(
            "profile = \"toy\"\nvehicles = 1\n[[steps]]\nat = 0\naction = \"beacon\"",
        )
        .unwrap();
        assert!(run_scenario(&script, 1).is_err());
    }

    #[test]
    fn lossy_channel_counts_drops() {
        let script = ScenarioConfig::from_toml(
            r#"
            profile = "toy"
            vehicles = 4

            [channel]
            drop_prob = 0.5

            [[steps]]
            at = 0
            action = "register"

            [[steps]]
            at = 1
            action = "beacon"
            count = 50
            "#,
        )
        .unwrap();
        let report = run_scenario(&script, 13).unwrap();
        assert_eq!(report.sent, 200);
        assert_eq!(report.accepted + report.dropped, 200);
        assert!(report.dropped > 50 && report.dropped < 150);
    }
}
