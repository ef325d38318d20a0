//! Experiment orchestration: seeded parallel trials, CSV output,
//! distributional comparison, and checkpointing.
//!
//! Determinism contract: (master seed, config) fixes every output byte.
//! Trials draw their seeds with `mix_seed(master, index)` and results are
//! collected by index, so the worker count — set explicitly or through the
//! EROSIM_WORKERS environment variable — never changes the output.

use crate::rng::mix_seed;
use crate::state::{EngineError, ErosionState};
use crate::stats::ks_statistic;
use rayon::prelude::*;
use sha2::{Digest, Sha256};
use std::io::Write;
use std::path::Path;
use thiserror::Error;

pub const CHECKPOINT_HEADER: &str = "EROSIM-CKPT v1";

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error("io: {0}")]
    Io(#[from] std::io::Error),
    #[error("engine: {0}")]
    Engine(#[from] EngineError),
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("checkpoint checksum mismatch")]
    Checksum,
    #[error("checkpoint payload: {0}")]
    Payload(#[from] serde_json::Error),
}

/// Thread pool honoring an explicit worker count, else EROSIM_WORKERS, else
/// the rayon default.
pub fn worker_pool(explicit: Option<usize>) -> rayon::ThreadPool {
    let workers = explicit
        .or_else(|| {
            std::env::var("EROSIM_WORKERS")
                .ok()
                .and_then(|v| v.parse().ok())
        })
        .unwrap_or(0);
    rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .expect("thread pool")
}

/// Runs independent seeded trials on `pool`, collecting results in trial
/// order.
pub fn run_trials<T, F>(pool: &rayon::ThreadPool, trials: u64, master_seed: u64, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(u64, u64) -> T + Sync,
{
    pool.install(|| {
        (0..trials)
            .into_par_iter()
            .map(|trial| f(trial, mix_seed(master_seed, trial)))
            .collect()
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Exact,
    Fast,
}

impl std::fmt::Display for Mode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Mode::Exact => "exact",
            Mode::Fast => "fast",
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Budget {
    Particles(u64),
    Microsteps(u64),
}

#[derive(Clone, Debug)]
pub struct ExperimentConfig {
    pub budget: Budget,
    pub trials: u64,
    pub master_seed: u64,
    pub mode: Mode,
    /// How many outermost runs per side to report.
    pub runs: usize,
}

/// One trial's summary: schema matches the CSV emitted by `write_report`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct ReportRow {
    pub trial: u64,
    pub seed: u64,
    pub particles: u64,
    pub microsteps: u64,
    pub s_east: u32,
    pub s_west: u32,
    pub east_runs: Vec<u32>,
    pub west_runs: Vec<u32>,
    pub martingale: i64,
}

pub fn run_experiment(
    pool: &rayon::ThreadPool,
    config: &ExperimentConfig,
) -> Result<Vec<ReportRow>, EngineError> {
    let rows = run_trials(pool, config.trials, config.master_seed, |trial, seed| {
        let mut state = ErosionState::new(seed);
        let res = match (config.mode, config.budget) {
            (Mode::Exact, Budget::Particles(n)) => state.run_until_particles(n),
            (Mode::Exact, Budget::Microsteps(t)) => state.run_until_microsteps(t),
            (Mode::Fast, Budget::Particles(n)) => state.run_fast_particles(n),
            (Mode::Fast, Budget::Microsteps(t)) => {
                // fast settles overshoot t; stop at the first settle past it
                loop {
                    match state.fast_settle() {
                        Ok(_) if state.microsteps() < t => continue,
                        other => break other.map(|_| ()),
                    }
                }
            }
        };
        res.map(|()| {
            let view = state.coloring().run_lengths(config.runs);
            ReportRow {
                trial,
                seed,
                particles: state.particles(),
                microsteps: state.microsteps(),
                s_east: state.coloring().support_east(),
                s_west: state.coloring().support_west(),
                east_runs: view.east,
                west_runs: view.west,
                martingale: state.martingale(),
            }
        })
    });
    rows.into_iter().collect()
}

/// CSV with a leading `#` comment carrying the config and seed.
pub fn write_report(
    path: &Path,
    config: &ExperimentConfig,
    rows: &[ReportRow],
) -> Result<(), HarnessError> {
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    let budget = match config.budget {
        Budget::Particles(n) => format!("particles={n}"),
        Budget::Microsteps(t) => format!("microsteps={t}"),
    };
    writeln!(
        out,
        "# erosim {budget} trials={} seed={} mode={} runs={}",
        config.trials, config.master_seed, config.mode, config.runs
    )?;
    write!(out, "trial,seed,n,t,s_e,s_w")?;
    for i in 1..=config.runs {
        write!(out, ",e{i},w{i}")?;
    }
    writeln!(out, ",m,s_scaled")?;
    for r in rows {
        write!(
            out,
            "{},{},{},{},{},{}",
            r.trial, r.seed, r.particles, r.microsteps, r.s_east, r.s_west
        )?;
        for i in 0..config.runs {
            write!(
                out,
                ",{},{}",
                r.east_runs.get(i).copied().unwrap_or(0),
                r.west_runs.get(i).copied().unwrap_or(0)
            )?;
        }
        // s_scaled = S(n)/n^{1/4}, the column the `compare` subcommand pairs
        // with the oracle's scaled_support by default
        let s_scaled =
            f64::from(r.s_east + r.s_west) / (r.particles as f64).powf(0.25);
        writeln!(out, ",{},{s_scaled:.8}", r.martingale)?;
    }
    Ok(())
}

/// KS comparison of an empirical sample against oracle samples, with the
/// oracle's split-half distance as the same-distribution baseline.
#[derive(Clone, Copy, Debug)]
pub struct Comparison {
    pub d: f64,
    pub n_empirical: usize,
    pub n_oracle: usize,
    /// 5% two-sample fluctuation band for the split halves.
    pub baseline_band: f64,
    pub split_half_d: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub fn compare_to_limit(empirical: &[f64], oracle: &[f64], tolerance: f64) -> Comparison {
    let d = ks_statistic(empirical, oracle);
    let half = oracle.len() / 2;
    let split_half_d = ks_statistic(&oracle[..half], &oracle[half..]);
    Comparison {
        d,
        n_empirical: empirical.len(),
        n_oracle: oracle.len(),
        baseline_band: 1.36 * (2.0 / half as f64).sqrt(),
        split_half_d,
        tolerance,
        pass: d <= tolerance,
    }
}

// --- checkpointing ------------------------------------------------------
//
// Layout: header line, sha256 hex of the payload line, JSON payload line.

pub fn checkpoint(state: &ErosionState, path: &Path) -> Result<(), HarnessError> {
    let payload = serde_json::to_string(state)?;
    let digest = hex::encode(Sha256::digest(payload.as_bytes()));
    let mut out = std::io::BufWriter::new(std::fs::File::create(path)?);
    writeln!(out, "{CHECKPOINT_HEADER}")?;
    writeln!(out, "{digest}")?;
    writeln!(out, "{payload}")?;
    Ok(())
}

pub fn resume(path: &Path) -> Result<ErosionState, HarnessError> {
    let text = std::fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines
        .next()
        .ok_or_else(|| HarnessError::Format("empty file".into()))?;
    if header != CHECKPOINT_HEADER {
        return Err(HarnessError::Format(format!("bad header {header:?}")));
    }
    let digest = lines
        .next()
        .ok_or_else(|| HarnessError::Format("missing checksum".into()))?;
    let payload = lines
        .next()
        .ok_or_else(|| HarnessError::Format("missing payload".into()))?;
    if hex::encode(Sha256::digest(payload.as_bytes())) != digest {
        return Err(HarnessError::Checksum);
    }
    Ok(serde_json::from_str(payload)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tmp(name: &str) -> std::path::PathBuf {
        let dir = std::env::temp_dir().join(format!("erosim-harness-{}", std::process::id()));
        std::fs::create_dir_all(&dir).unwrap();
        dir.join(name)
    }

    #[test]
    fn experiment_is_deterministic_across_worker_counts() {
        let config = ExperimentConfig {
            budget: Budget::Particles(500),
            trials: 16,
            master_seed: 42,
            mode: Mode::Exact,
            runs: 2,
        };
        let one = worker_pool(Some(1));
        let four = worker_pool(Some(4));
        let a = run_experiment(&one, &config).unwrap();
        let b = run_experiment(&four, &config).unwrap();
        assert_eq!(a, b);

        let pa = tmp("report-a.csv");
        let pb = tmp("report-b.csv");
        write_report(&pa, &config, &a).unwrap();
        write_report(&pb, &config, &b).unwrap();
        assert_eq!(std::fs::read(&pa).unwrap(), std::fs::read(&pb).unwrap());
        let text = std::fs::read_to_string(&pa).unwrap();
        assert!(text.starts_with("# erosim particles=500 trials=16 seed=42 mode=exact"));
        assert_eq!(text.lines().count(), 2 + 16);
    }

    #[test]
    fn fast_mode_rows_have_consistent_totals() {
        let pool = worker_pool(Some(2));
        let config = ExperimentConfig {
            budget: Budget::Particles(2_000),
            trials: 8,
            master_seed: 7,
            mode: Mode::Fast,
            runs: 1,
        };
        let rows = run_experiment(&pool, &config).unwrap();
        for r in &rows {
            assert_eq!(r.particles, 2_000);
            assert!(r.s_east + r.s_west <= 2_000);
            assert!(r.microsteps >= r.particles);
        }
    }

    #[test]
    fn checkpoint_resume_continues_bit_identically() {
        let mut full = ErosionState::new(99);
        full.run_until_particles(20_000).unwrap();

        let mut half = ErosionState::new(99);
        half.run_until_particles(10_000).unwrap();
        let path = tmp("state.ckpt");
        checkpoint(&half, &path).unwrap();
        let mut resumed = resume(&path).unwrap();
        resumed.run_until_particles(20_000).unwrap();

        assert_eq!(resumed.coloring(), full.coloring());
        assert_eq!(resumed.microsteps(), full.microsteps());
        assert_eq!(resumed.martingale(), full.martingale());
    }

    #[test]
    fn corrupted_checkpoints_are_rejected() {
        let mut s = ErosionState::new(1);
        s.run_until_particles(100).unwrap();
        let path = tmp("corrupt.ckpt");
        checkpoint(&s, &path).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.starts_with("EROSIM-CKPT v1\n"));

        // truncated payload
        std::fs::write(&path, &text[..text.len() - 10]).unwrap();
        assert!(matches!(resume(&path), Err(HarnessError::Checksum)));

        // bad header
        std::fs::write(&path, text.replace("v1", "v9")).unwrap();
        assert!(matches!(resume(&path), Err(HarnessError::Format(_))));

        // flipped payload byte
        let flipped = text.replacen("\"particles\":100", "\"particles\":101", 1);
        assert_ne!(flipped, text);
        std::fs::write(&path, flipped).unwrap();
        assert!(matches!(resume(&path), Err(HarnessError::Checksum)));
    }

    #[test]
    fn comparison_reports_split_half_baseline() {
        // pseudo-shuffled uniform grid so the split halves share support
        let oracle: Vec<f64> = (0..2_000).map(|i| ((i * 997) % 2_000) as f64 / 2_000.0).collect();
        let emp: Vec<f64> = (0..500).map(|i| (i as f64) / 500.0).collect();
        let c = compare_to_limit(&emp, &oracle, 0.05);
        assert!(c.pass && c.d < 0.01);
        assert!(c.split_half_d > 0.0 && c.baseline_band > 0.0);
        assert_eq!((c.n_empirical, c.n_oracle), (500, 2_000));
    }
}
