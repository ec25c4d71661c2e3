//! Wall-clock cost measurement for the signing and verification phases.
//!
//! Reports medians with p10/p90 envelopes per phase, fits the affine
//! model `batch_cost(N) ≈ a + b·N` over the configured batch sizes, and
//! renders CSV with one row per (phase, N). Measurements run on the
//! sequential code paths so the batch-vs-single comparison reflects the
//! algorithmic saving (one aggregated matrix product instead of N), not
//! the thread count.
//!
//! Absolute milliseconds are hardware-specific; the stable claims are the
//! affine growth of the batch phase and its per-item advantage over
//! repeated single verification.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha20Rng;

use crate::bits::BitString;
use crate::codec;
use crate::protocol::{derive_keys, pid_request, setup, Profile, TrustedAuthority};
use crate::signing::{sign_message, verify, BatchJob, PublicKeyDirectory, SignedMessage};
use crate::Timestamp;

/// What to measure.
#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub profile: Profile,
    pub batch_sizes: Vec<usize>,
    pub repetitions: usize,
}

impl Default for BenchConfig {
    fn default() -> Self {
        Self {
            profile: Profile::Paper123,
            batch_sizes: vec![50, 100, 150, 200, 250, 300],
            repetitions: 25,
        }
    }
}

/// One measured phase at one batch size.
#[derive(Debug, Clone, PartialEq)]
pub struct BenchRow {
    pub phase: &'static str,
    pub n: usize,
    pub median_ms: f64,
    pub p10_ms: f64,
    pub p90_ms: f64,
}

/// Ordinary least-squares fit of `cost ≈ intercept + slope·N`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearFit {
    pub intercept_ms: f64,
    pub slope_ms: f64,
    pub r_squared: f64,
}

/// Fits `y ≈ a + b·x` and reports R²; needs two distinct x values.
pub fn linear_fit(points: &[(f64, f64)]) -> Option<LinearFit> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mean_x = points.iter().map(|p| p.0).sum::<f64>() / n;
    let mean_y = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mean_x).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mean_x) * (p.1 - mean_y)).sum();
    let slope = sxy / sxx;
    let intercept = mean_y - slope * mean_x;
    let ss_res: f64 = points
        .iter()
        .map(|p| (p.1 - (intercept + slope * p.0)).powi(2))
        .sum();
    let ss_tot: f64 = points.iter().map(|p| (p.1 - mean_y).powi(2)).sum();
    let r_squared = if ss_tot == 0.0 {
        1.0
    } else {
        1.0 - ss_res / ss_tot
    };
    Some(LinearFit {
        intercept_ms: intercept,
        slope_ms: slope,
        r_squared,
    })
}

/// Full measurement output.
#[derive(Debug, Clone)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub batch_fit: Option<LinearFit>,
    /// Packed broadcast tuple size for the profile.
    pub wire_fixed_bytes: usize,
    /// The same tuple with the file format tag.
    pub wire_file_bytes: usize,
}

impl BenchReport {
    /// CSV with columns `phase,N,median_ms,p10_ms,p90_ms`, followed by
    /// comment lines carrying the wire sizes and the affine fit.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("phase,N,median_ms,p10_ms,p90_ms\n");
        for row in &self.rows {
            out.push_str(&format!(
                "{},{},{:.6},{:.6},{:.6}\n",
                row.phase, row.n, row.median_ms, row.p10_ms, row.p90_ms
            ));
        }
        out.push_str(&format!("# wire_fixed_bytes={}\n", self.wire_fixed_bytes));
        out.push_str(&format!("# wire_file_bytes={}\n", self.wire_file_bytes));
        if let Some(fit) = &self.batch_fit {
            out.push_str(&format!(
                "# batch_fit intercept_ms={:.6} slope_ms={:.6} r_squared={:.6}\n",
                fit.intercept_ms, fit.slope_ms, fit.r_squared
            ));
        }
        out
    }

    pub fn row(&self, phase: &str, n: usize) -> Option<&BenchRow> {
        self.rows.iter().find(|r| r.phase == phase && r.n == n)
    }
}

fn percentile(sorted: &[f64], p: f64) -> f64 {
    debug_assert!(!sorted.is_empty());
    let idx = ((sorted.len() - 1) as f64 * p).round() as usize;
    sorted[idx]
}

fn stats(phase: &'static str, n: usize, mut samples: Vec<f64>) -> BenchRow {
    samples.sort_by(f64::total_cmp);
    BenchRow {
        phase,
        n,
        median_ms: percentile(&samples, 0.5),
        p10_ms: percentile(&samples, 0.1),
        p90_ms: percentile(&samples, 0.9),
    }
}

fn ms(start: Instant) -> f64 {
    start.elapsed().as_secs_f64() * 1e3
}

/// Runs the measurement: per repetition, one signing, one single
/// verification, and one batch verification per configured size.
pub fn run_bench(config: &BenchConfig, seed: u64) -> BenchReport {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    let (params, master) = setup(config.profile, &mut rng);
    let wire_fixed_bytes = codec::wire_fixed_len(&params);
    let report_sizes = |rows, batch_fit| BenchReport {
        rows,
        batch_fit,
        wire_fixed_bytes,
        wire_file_bytes: wire_fixed_bytes + 1,
    };
    if config.repetitions == 0 {
        return report_sizes(Vec::new(), None);
    }

    let mut ta = TrustedAuthority::new(params.clone(), master);
    let mut directory = PublicKeyDirectory::new();
    let mut creds = Vec::new();
    for i in 0..8 {
        let (a, pk1) = pid_request(&params, &mut rng);
        let rid = BitString::random(params.l(), &mut rng);
        let pid = ta.pid_issue(&pk1, &rid, Timestamp(i)).unwrap();
        let partial = ta.psk_issue(&pk1, &pid, &mut rng).unwrap();
        let cred = derive_keys(&params, pid, a, pk1, partial).unwrap();
        directory.announce(cred.pid.clone(), cred.pk.clone());
        creds.push(cred);
    }

    let max_batch = config.batch_sizes.iter().copied().max().unwrap_or(0);
    let pool: Vec<SignedMessage> = (0..max_batch.max(1))
        .map(|i| {
            let cred = &creds[i % creds.len()];
            sign_message(cred, format!("beacon {i}").as_bytes(), &params, &mut rng)
        })
        .collect();

    let mut sign_samples = Vec::with_capacity(config.repetitions);
    let mut verify_samples = Vec::with_capacity(config.repetitions);
    let mut batch_samples: Vec<Vec<f64>> = config.batch_sizes.iter().map(|_| Vec::new()).collect();

    for rep in 0..config.repetitions {
        let cred = &creds[rep % creds.len()];
        let payload = format!("timing beacon {rep}").into_bytes();
        let start = Instant::now();
        let msg = sign_message(cred, &payload, &params, &mut rng);
        sign_samples.push(ms(start));

        let start = Instant::now();
        let ok = verify(&msg, &cred.pk, &params).unwrap();
        verify_samples.push(ms(start));
        assert!(ok, "honest timing message failed verification");

        for (slot, &n) in config.batch_sizes.iter().enumerate() {
            let items = &pool[..n.min(pool.len())];
            let start = Instant::now();
            let ok = BatchJob::assemble(items, &params, &mut rng)
                .and_then(|job| job.check_seq(&directory, &params))
                .unwrap();
            batch_samples[slot].push(ms(start));
            assert!(ok, "honest timing batch failed verification");
        }
    }

    let mut rows = vec![
        stats("sign", 1, sign_samples),
        stats("verify", 1, verify_samples),
    ];
    for (slot, &n) in config.batch_sizes.iter().enumerate() {
        rows.push(stats(
            "batch_verify",
            n,
            std::mem::take(&mut batch_samples[slot]),
        ));
    }

    let points: Vec<(f64, f64)> = rows
        .iter()
        .filter(|r| r.phase == "batch_verify")
        .map(|r| (r.n as f64, r.median_ms))
        .collect();
    let batch_fit = linear_fit(&points);
    report_sizes(rows, batch_fit)
}
