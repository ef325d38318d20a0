//! Command-line front end: seeded experiments, constants tables, oracle
//! sampling, variants, distribution comparison, checkpoint handling, and the
//! acceptance suite. All randomness flows from --seed; the worker count
//! (EROSIM_WORKERS) never changes results.

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use erosim::acceptance::AcceptanceContext;
use erosim::constants;
use erosim::harness::{
    self, checkpoint, compare_to_limit, resume, run_experiment, worker_pool, Budget,
    ExperimentConfig, Mode,
};
use erosim::killed::estimate_ratio;
use erosim::oracle::sample_limit;
use erosim::state::ErosionState;
use erosim::variants::{run_variant_line, run_zd, Antagonism, ColorRule, Schedule};
use std::io::Write;
use std::path::PathBuf;

#[derive(Parser)]
#[command(name = "erosim", about = "competitive erosion simulator and experiment harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct BudgetArgs {
    /// Stop each trial after this many settled particles.
    #[arg(long, conflicts_with = "microsteps")]
    particles: Option<u64>,
    /// Stop each trial after this many microsteps.
    #[arg(long)]
    microsteps: Option<u64>,
}

impl BudgetArgs {
    fn budget(&self) -> Result<Budget> {
        match (self.particles, self.microsteps) {
            (Some(n), None) => Ok(Budget::Particles(n)),
            (None, Some(t)) => Ok(Budget::Microsteps(t)),
            _ => bail!("exactly one of --particles or --microsteps is required"),
        }
    }
}

fn parse_mode(s: &str) -> Result<Mode, String> {
    match s {
        "exact" => Ok(Mode::Exact),
        "fast" => Ok(Mode::Fast),
        _ => Err("mode must be exact or fast".into()),
    }
}

#[derive(Subcommand)]
enum Command {
    /// Run erosion trials and report per-trial summaries as CSV.
    Simulate {
        #[command(flatten)]
        budget: BudgetArgs,
        #[arg(long, default_value_t = 1)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value = "exact", value_parser = parse_mode)]
        mode: Mode,
        /// Outermost runs per side to include in the report.
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// With a single trial: write a checkpoint every this many particles
        /// (to <out>.ckpt, or state.ckpt).
        #[arg(long)]
        checkpoint_every: Option<u64>,
    },
    /// Killed-process trials on [-L, L]: means of R and Q and their ratio.
    Killed {
        #[arg(long = "L", default_value_t = 1)]
        l: u32,
        #[arg(long, default_value_t = 100_000)]
        trials: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// The w table and the constants alpha and C, as CSV.
    Constants {
        /// Largest k in the table.
        #[arg(long, default_value_t = 30)]
        kmax: usize,
    },
    /// Sample the limit-law functionals, as CSV.
    Oracle {
        #[arg(long, default_value_t = 1_000)]
        trials: u64,
        /// Steps per discretized path.
        #[arg(long, default_value_t = 1_000_000)]
        steps: usize,
        /// Number of extrema gaps beyond the first (samples X_1..X_{k+1}).
        #[arg(long, default_value_t = 3)]
        runs: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run a model variant on the line or on Z^d.
    Variant {
        #[arg(long, default_value_t = 2)]
        colors: u8,
        /// alternating | iid | periodic:0,1,2,...
        #[arg(long, default_value = "alternating")]
        schedule: String,
        /// mutual | cyclic
        #[arg(long, default_value = "mutual")]
        antagonism: String,
        #[arg(long)]
        allow_origin: bool,
        /// Run on Z^d instead of the line (2 or 3); two alternating colors.
        #[arg(long)]
        lattice: Option<usize>,
        #[arg(long, default_value_t = 10_000)]
        particles: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Line: site,color CSV. Lattice: x,y,colorIndex CSV of the z=0 slice.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Two-sample KS comparison of a CSV column against an oracle CSV column.
    Compare {
        empirical: PathBuf,
        oracle: PathBuf,
        /// Column names as empirical:oracle.
        #[arg(long, default_value = "s_scaled:scaled_support")]
        columns: String,
        #[arg(long, default_value_t = 0.05)]
        tolerance: f64,
    },
    /// Run the acceptance suite (or a named sub-suite).
    Acceptance {
        /// combinatorial | timescale | limit-law | killed | variants | all
        #[arg(long, default_value = "all")]
        suite: String,
        #[arg(long, default_value_t = 0xE805_1041)]
        seed: u64,
    },
    /// Checkpoint/resume self-test: interrupted run must match uninterrupted.
    CheckpointTest {
        #[arg(long, default_value_t = 100_000)]
        particles: u64,
        #[arg(long, default_value_t = 50_000)]
        checkpoint_every: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
}

fn main() -> Result<()> {
    match Cli::parse().command {
        Command::Simulate {
            budget,
            trials,
            seed,
            mode,
            runs,
            out,
            checkpoint_every,
        } => simulate(budget.budget()?, trials, seed, mode, runs, out, checkpoint_every),
        Command::Killed { l, trials, seed } => {
            let est = estimate_ratio(l, trials, seed);
            println!("# erosim killed L={l} trials={trials} seed={seed}");
            println!("l,trials,mean_r,se_r,mean_q,se_q,ratio");
            println!(
                "{l},{trials},{:.6},{:.6},{:.6},{:.6},{:.8}",
                est.mean_r, est.se_r, est.mean_q, est.se_q, est.ratio
            );
            Ok(())
        }
        Command::Constants { kmax } => constants_table(kmax),
        Command::Oracle {
            trials,
            steps,
            runs,
            seed,
            out,
        } => oracle_csv(trials, steps, runs, seed, out),
        Command::Variant {
            colors,
            schedule,
            antagonism,
            allow_origin,
            lattice,
            particles,
            seed,
            out,
        } => variant(
            colors,
            &schedule,
            &antagonism,
            allow_origin,
            lattice,
            particles,
            seed,
            out,
        ),
        Command::Compare {
            empirical,
            oracle,
            columns,
            tolerance,
        } => compare(&empirical, &oracle, &columns, tolerance),
        Command::Acceptance { suite, seed } => {
            let ctx = AcceptanceContext::new(seed);
            let results = ctx
                .run_suite(&suite)
                .with_context(|| format!("unknown suite {suite:?}"))?;
            let mut all_pass = true;
            for r in &results {
                println!("{r}");
                all_pass &= r.pass;
            }
            if !all_pass {
                bail!("acceptance failures");
            }
            Ok(())
        }
        Command::CheckpointTest {
            particles,
            checkpoint_every,
            seed,
        } => checkpoint_test(particles, checkpoint_every, seed),
    }
}

fn simulate(
    budget: Budget,
    trials: u64,
    seed: u64,
    mode: Mode,
    runs: usize,
    out: Option<PathBuf>,
    checkpoint_every: Option<u64>,
) -> Result<()> {
    let config = ExperimentConfig {
        budget,
        trials,
        master_seed: seed,
        mode,
        runs,
    };
    if let Some(every) = checkpoint_every {
        if trials != 1 || mode != Mode::Exact {
            bail!("--checkpoint-every requires a single exact-mode trial");
        }
        let Budget::Particles(n) = budget else {
            bail!("--checkpoint-every requires --particles");
        };
        let path = out
            .clone()
            .map(|p| p.with_extension("ckpt"))
            .unwrap_or_else(|| PathBuf::from("state.ckpt"));
        let mut state = ErosionState::new(erosim::rng::mix_seed(seed, 0));
        let mut next = every.min(n);
        loop {
            state.run_until_particles(next)?;
            checkpoint(&state, &path)?;
            if next == n {
                break;
            }
            next = (next + every).min(n);
        }
        eprintln!("checkpointed every {every} particles to {}", path.display());
    }
    let pool = worker_pool(None);
    let rows = run_experiment(&pool, &config)?;
    match out {
        Some(path) => harness::write_report(&path, &config, &rows)?,
        None => {
            let tmp = std::env::temp_dir().join("erosim-report.csv");
            harness::write_report(&tmp, &config, &rows)?;
            print!("{}", std::fs::read_to_string(&tmp)?);
        }
    }
    Ok(())
}

fn constants_table(kmax: usize) -> Result<()> {
    let table = constants::constants_table(kmax, 1e-10);
    println!("# erosim constants kmax={kmax}");
    println!("k,w_k,w_k_over_k3,series_partial_sum");
    for k in 0..=kmax {
        let over = if k == 0 {
            String::new()
        } else {
            format!(
                "{:.9}",
                constants::rational_to_f64(&table.w[k]) / (k as f64).powi(3)
            )
        };
        println!("{k},{},{over},{}", table.w[k], table.series[k]);
    }
    println!("# alpha = {:.12} +- {:.2e}", table.alpha, table.alpha_error);
    println!("# C = {:.12} +- {:.2e}", table.c, table.c_error);
    Ok(())
}

fn oracle_csv(trials: u64, steps: usize, runs: usize, seed: u64, out: Option<PathBuf>) -> Result<()> {
    let pool = worker_pool(None);
    let samples = pool.install(|| sample_limit(trials, steps, runs, seed));
    let mut text = String::new();
    text.push_str(&format!(
        "# erosim oracle trials={trials} steps={steps} runs={runs} seed={seed}\n"
    ));
    text.push_str("trial");
    for i in 1..=runs + 1 {
        text.push_str(&format!(",x{i}"));
    }
    text.push_str(",event,tie,scaled_support");
    for i in 1..=runs {
        text.push_str(&format!(",scaled_run{i}"));
    }
    text.push('\n');
    for (i, s) in samples.iter().enumerate() {
        text.push_str(&format!("{i}"));
        for x in &s.x {
            text.push_str(&format!(",{x:.8}"));
        }
        text.push_str(&format!(
            ",{},{},{:.8}",
            if s.carrier_is_second { "A" } else { "A'" },
            u8::from(s.tie),
            s.scaled_support()
        ));
        for i in 1..=runs {
            text.push_str(&format!(",{:.8}", s.scaled_run(i)));
        }
        text.push('\n');
    }
    match out {
        Some(path) => std::fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn variant(
    colors: u8,
    schedule: &str,
    antagonism: &str,
    allow_origin: bool,
    lattice: Option<usize>,
    particles: u64,
    seed: u64,
    out: Option<PathBuf>,
) -> Result<()> {
    if let Some(d) = lattice {
        let (coloring, stats) = run_zd(d, particles, seed)?;
        println!("# erosim variant lattice d={d} particles={particles} seed={seed}");
        println!("n,colored");
        for (n, c) in &stats.checkpoints {
            println!("{n},{c}");
        }
        if let Some(path) = out {
            let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
            writeln!(f, "# erosim variant slice d={d} particles={particles} seed={seed}")?;
            writeln!(f, "x,y,colorIndex")?;
            let mut sites: Vec<_> = coloring.sites().filter(|(p, _)| p[2] == 0).collect();
            sites.sort_by_key(|(p, _)| *p);
            for (p, c) in sites {
                writeln!(f, "{},{},{}", p[0], p[1], u8::from(c == erosim::Color::Red))?;
            }
        }
        return Ok(());
    }
    let schedule = match schedule {
        "alternating" => Schedule::Alternating,
        "iid" => Schedule::IidUniform,
        s if s.starts_with("periodic:") => Schedule::Periodic(
            s["periodic:".len()..]
                .split(',')
                .map(|t| t.parse::<u8>().context("bad pattern entry"))
                .collect::<Result<_>>()?,
        ),
        other => bail!("unknown schedule {other:?}"),
    };
    let antagonism = match antagonism {
        "mutual" => Antagonism::Mutual,
        "cyclic" => Antagonism::Cyclic,
        other => bail!("unknown antagonism {other:?}"),
    };
    let rule = ColorRule {
        colors,
        schedule,
        antagonism,
        allow_origin,
    };
    let (coloring, stats) = run_variant_line(&rule, particles, seed);
    println!("# erosim variant line colors={colors} particles={particles} seed={seed}");
    println!("n,colored");
    for (n, c) in &stats.checkpoints {
        println!("{n},{c}");
    }
    if let Some(path) = out {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(f, "# erosim variant line colors={colors} particles={particles} seed={seed}")?;
        writeln!(f, "site,colorIndex")?;
        for (site, c) in coloring.sites() {
            writeln!(f, "{site},{c}")?;
        }
    }
    Ok(())
}

fn read_column(path: &PathBuf, column: &str) -> Result<Vec<f64>> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading {}", path.display()))?;
    let mut lines = text.lines().filter(|l| !l.starts_with('#'));
    let header = lines.next().context("missing header")?;
    let idx = header
        .split(',')
        .position(|h| h == column)
        .with_context(|| format!("no column {column:?} in {}", path.display()))?;
    lines
        .map(|l| {
            l.split(',')
                .nth(idx)
                .with_context(|| format!("short row {l:?}"))?
                .parse::<f64>()
                .with_context(|| format!("bad value in {l:?}"))
        })
        .collect()
}

fn compare(empirical: &PathBuf, oracle: &PathBuf, columns: &str, tolerance: f64) -> Result<()> {
    let (col_e, col_o) = columns
        .split_once(':')
        .context("--columns must be empirical:oracle")?;
    let emp = read_column(empirical, col_e)?;
    let ora = read_column(oracle, col_o)?;
    let c = compare_to_limit(&emp, &ora, tolerance);
    println!(
        "ks={:.5} n_empirical={} n_oracle={} split_half={:.5} band={:.5} tolerance={} verdict={}",
        c.d,
        c.n_empirical,
        c.n_oracle,
        c.split_half_d,
        c.baseline_band,
        c.tolerance,
        if c.pass { "PASS" } else { "FAIL" }
    );
    if !c.pass {
        bail!("KS distance above tolerance");
    }
    Ok(())
}

fn checkpoint_test(particles: u64, every: u64, seed: u64) -> Result<()> {
    let dir = std::env::temp_dir();
    let path = dir.join(format!("erosim-ckpt-test-{}.ckpt", std::process::id()));
    let mut reference = ErosionState::new(seed);
    reference.run_until_particles(particles)?;

    let mut state = ErosionState::new(seed);
    let mut next = every.min(particles);
    loop {
        state.run_until_particles(next)?;
        checkpoint(&state, &path)?;
        state = resume(&path)?;
        if next == particles {
            break;
        }
        next = (next + every).min(particles);
    }
    std::fs::remove_file(&path).ok();
    if state.coloring() != reference.coloring()
        || state.microsteps() != reference.microsteps()
        || state.martingale() != reference.martingale()
    {
        bail!("resumed run diverged from the uninterrupted run");
    }
    println!(
        "checkpoint round trip OK: {} particles, {} microsteps, resumed every {} particles",
        particles,
        state.microsteps(),
        every
    );
    Ok(())
}
