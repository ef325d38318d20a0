//! The microstep-level simulator.
//!
//! State advances one lattice move at a time in exact mode, or one whole
//! particle at a time in fast mode, where the settle site is drawn from the
//! gambler's-ruin law and the elapsed time is accounted at its expectation.
//! Fast mode is exact in distribution for the configuration but biased for
//! durations, so timescale experiments must use exact mode.
//!
//! Alongside the coloring the engine maintains the signed potential
//! M^t = Σ x·1(x blue) − Σ x·1(x red) + 2·(signed position of the active
//! particle), which moves by ±2 per microstep and additionally jumps toward
//! zero by k+1 when the (k+1)-st site on a side is explored.

use crate::coloring::{Color, SettleKind, Side, SiteColoring};
use crate::goodness::GoodnessCounters;
use crate::layers::LayerStack;
use crate::rng::BitSource;
use crate::trajectory::Trajectory;
use rand::Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Hard cap on the microstep counter; experiments signal instead of wrapping.
pub const MICROSTEP_BUDGET: u64 = 1 << 62;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum EngineError {
    #[error("microstep budget of 2^62 exhausted")]
    Overflow,
    #[error("fast settle requires a freshly emitted particle at the origin")]
    MidWalk,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ActiveParticle {
    pub position: i64,
    pub color: Color,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum MicrostepEvent {
    Moved(i64),
    SettledConversion(i64),
    SettledExploration(i64),
    /// Emitted events are reported only through the sink interface; plain
    /// `microstep` folds the re-emission into the settle event.
    Emitted(Color),
}

/// Which support configuration an exploration left behind.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum ExplorationKind {
    /// Support was balanced (k, k) and became asymmetric. |M| immediately
    /// before the jump is (k+1)(k+2).
    FromBalanced,
    /// Support was asymmetric {k, k+1} and became balanced (k+1, k+1).
    /// |M| immediately before the jump is (k+2)² − 1.
    FromUnbalanced,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct ExplorationRecord {
    pub kind: ExplorationKind,
    /// Smaller of the two supports immediately before the exploration.
    pub k: u32,
    /// 1-based index of the particle that explored.
    pub particle_index: u64,
    /// Microstep at which the exploration happened (1-based count).
    pub microstep_index: u64,
    /// M immediately before the post-exploration jump.
    pub martingale_before: i64,
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Default)]
pub struct StateOptions {
    /// Maintain the layer stack online.
    pub layers: bool,
    /// Track L-good microstep counters (implies `layers`, used to attribute
    /// a zero-length adjacent run to a side).
    pub goodness: bool,
    /// Keep a record of every exploration event.
    pub log_explorations: bool,
    /// Re-check the combinatorial invariants after every settle, collecting
    /// violations instead of panicking.
    pub validate: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ErosionState {
    coloring: SiteColoring,
    active: ActiveParticle,
    /// Cached stopping boundaries (west < 0 < east) for the active particle.
    bounds: (i64, i64),
    particles: u64,
    microsteps: u64,
    martingale: i64,
    red_sites: u64,
    blue_sites: u64,
    bits: BitSource,
    layers: Option<LayerStack>,
    goodness: Option<GoodnessCounters>,
    /// Goodness label of the active particle, set at emission.
    label: (Side, u32),
    emitted_at: u64,
    log_explorations: bool,
    exploration_log: Vec<ExplorationRecord>,
    validate: bool,
    violations: Vec<String>,
    violation_count: u64,
}

impl ErosionState {
    /// Empty configuration, first (blue) particle emitted at the origin.
    pub fn new(seed: u64) -> Self {
        Self::with_options(seed, StateOptions::default())
    }

    pub fn with_options(seed: u64, opts: StateOptions) -> Self {
        let mut state = ErosionState {
            coloring: SiteColoring::new(),
            // emit() below flips to the opposite color, making the first
            // emitted particle blue.
            active: ActiveParticle {
                position: 0,
                color: Color::Red,
            },
            bounds: (-1, 1),
            particles: 0,
            microsteps: 0,
            martingale: 0,
            red_sites: 0,
            blue_sites: 0,
            bits: BitSource::new(seed),
            layers: (opts.layers || opts.goodness).then(LayerStack::new),
            goodness: opts.goodness.then(GoodnessCounters::new),
            label: (Side::East, 1),
            emitted_at: 0,
            log_explorations: opts.log_explorations,
            exploration_log: Vec::new(),
            validate: opts.validate,
            violations: Vec::new(),
            violation_count: 0,
        };
        state.emit();
        state
    }

    /// Starts mid-process from an explicit configuration; `first_color` is the
    /// color of the next emitted particle. Round parity is aligned with the
    /// requested color, so the parity invariants relate to this start, not to
    /// an empty one.
    pub fn with_configuration(coloring: SiteColoring, first_color: Color, seed: u64) -> Self {
        let mut state = ErosionState {
            martingale: coloring.signed_position_sum(),
            red_sites: coloring.count_color(Color::Red),
            blue_sites: coloring.count_color(Color::Blue),
            particles: 0,
            coloring,
            active: ActiveParticle {
                position: 0,
                color: first_color,
            },
            bounds: (-1, 1),
            microsteps: 0,
            bits: BitSource::new(seed),
            layers: None,
            goodness: None,
            label: (Side::East, 1),
            emitted_at: 0,
            log_explorations: false,
            exploration_log: Vec::new(),
            validate: false,
            violations: Vec::new(),
            violation_count: 0,
        };
        state.bounds = state.coloring.stopping_boundaries(first_color);
        state
    }

    // --- accessors -------------------------------------------------------

    pub fn particles(&self) -> u64 {
        self.particles
    }

    pub fn microsteps(&self) -> u64 {
        self.microsteps
    }

    pub fn martingale(&self) -> i64 {
        self.martingale
    }

    pub fn active(&self) -> ActiveParticle {
        self.active
    }

    pub fn coloring(&self) -> &SiteColoring {
        &self.coloring
    }

    pub fn layer_stack(&self) -> Option<&LayerStack> {
        self.layers.as_ref()
    }

    pub fn goodness(&self) -> Option<&GoodnessCounters> {
        self.goodness.as_ref()
    }

    pub fn exploration_log(&self) -> &[ExplorationRecord] {
        &self.exploration_log
    }

    pub fn red_count(&self) -> u64 {
        self.red_sites
    }

    pub fn blue_count(&self) -> u64 {
        self.blue_sites
    }

    /// (S_W, S_E).
    pub fn supports_at(&self) -> (u32, u32) {
        (self.coloring.support_west(), self.coloring.support_east())
    }

    /// Invariant violations collected so far (only populated with
    /// `StateOptions::validate`); capped, see `violation_count` for the total.
    pub fn violations(&self) -> &[String] {
        &self.violations
    }

    pub fn violation_count(&self) -> u64 {
        self.violation_count
    }

    /// M recomputed from scratch; oracle for the incremental field.
    pub fn martingale_value(&self) -> i64 {
        self.coloring.signed_position_sum() + 2 * self.active.color.sign() * self.active.position
    }

    // --- dynamics --------------------------------------------------------

    /// One exact lattice move of the active particle. On a settle the next
    /// particle is emitted before returning, so the post-call state always
    /// has an active particle at a non-stopping position.
    #[inline]
    pub fn microstep(&mut self) -> Result<MicrostepEvent, EngineError> {
        self.microstep_full().map(|(_, ev, _)| ev)
    }

    #[inline(always)]
    fn microstep_full(
        &mut self,
    ) -> Result<(i64, MicrostepEvent, Option<ExplorationKind>), EngineError> {
        if self.microsteps >= MICROSTEP_BUDGET {
            return Err(EngineError::Overflow);
        }
        let step = self.bits.step();
        self.microsteps += 1;
        let pos = self.active.position + step;
        self.active.position = pos;
        self.martingale += 2 * self.active.color.sign() * step;
        if pos == self.bounds.0 || pos == self.bounds.1 {
            let (ev, expl) = self.settle(pos);
            Ok((step, ev, expl))
        } else {
            Ok((step, MicrostepEvent::Moved(pos), None))
        }
    }

    /// Settles the whole active particle in one draw: east boundary with
    /// probability |a|/(|a|+b), west otherwise, advancing t by the exact
    /// expected duration |a|·b (an integer, so no remainder accrues). The
    /// final configuration is exact in distribution; durations are not.
    pub fn fast_settle(&mut self) -> Result<MicrostepEvent, EngineError> {
        if self.active.position != 0 {
            return Err(EngineError::MidWalk);
        }
        let (a, b) = self.bounds;
        let west = (-a) as u64;
        let east = b as u64;
        let duration = west * east;
        if self.microsteps + duration > MICROSTEP_BUDGET {
            return Err(EngineError::Overflow);
        }
        let site = if self.bits.rng_mut().random_range(0..west + east) < west {
            b
        } else {
            a
        };
        self.microsteps += duration;
        // Bring M to the value it would have just before this settle step.
        self.martingale += 2 * self.active.color.sign() * site;
        self.active.position = site;
        Ok(self.settle(site).0)
    }

    pub fn run_until_particles(&mut self, n: u64) -> Result<(), EngineError> {
        while self.particles < n {
            self.microstep_full()?;
        }
        Ok(())
    }

    pub fn run_until_microsteps(&mut self, t: u64) -> Result<(), EngineError> {
        while self.microsteps < t {
            self.microstep_full()?;
        }
        Ok(())
    }

    pub fn run_fast_particles(&mut self, n: u64) -> Result<(), EngineError> {
        while self.particles < n {
            self.fast_settle()?;
        }
        Ok(())
    }

    /// Exact run feeding every event (including emissions) to a sink.
    pub fn run_with_sink<F: FnMut(u64, MicrostepEvent)>(
        &mut self,
        microsteps: u64,
        mut sink: F,
    ) -> Result<(), EngineError> {
        let target = self.microsteps + microsteps;
        while self.microsteps < target {
            let (_, ev, _) = self.microstep_full()?;
            sink(self.microsteps, ev);
            if !matches!(ev, MicrostepEvent::Moved(_)) {
                sink(self.microsteps, MicrostepEvent::Emitted(self.active.color));
            }
        }
        Ok(())
    }

    /// Exact run recording the ±2 increments of M and the exploration marks.
    pub fn run_recorded(&mut self, t: u64, trajectory: &mut Trajectory) -> Result<(), EngineError> {
        while self.microsteps < t {
            let color = self.active.color;
            let (step, _, expl) = self.microstep_full()?;
            trajectory.push_increment((step > 0) == (color == Color::Blue));
            if let Some(kind) = expl {
                trajectory.mark(kind);
            }
        }
        Ok(())
    }

    fn settle(&mut self, site: i64) -> (MicrostepEvent, Option<ExplorationKind>) {
        let walker = self.active.color;
        let side = if site > 0 { Side::East } else { Side::West };
        let se0 = self.coloring.support_east();
        let sw0 = self.coloring.support_west();
        let kind = self.coloring.apply_settle(site, walker);
        let mut explored = None;
        let event = match kind {
            SettleKind::Exploration => {
                let m_before = self.martingale;
                self.martingale -= walker.sign() * site;
                match walker {
                    Color::Blue => self.blue_sites += 1,
                    Color::Red => self.red_sites += 1,
                }
                let ekind = if se0 == sw0 {
                    ExplorationKind::FromBalanced
                } else {
                    ExplorationKind::FromUnbalanced
                };
                let k = se0.min(sw0);
                if self.log_explorations {
                    self.exploration_log.push(ExplorationRecord {
                        kind: ekind,
                        k,
                        particle_index: self.particles + 1,
                        microstep_index: self.microsteps,
                        martingale_before: m_before,
                    });
                }
                if let Some(stack) = &mut self.layers {
                    stack.record_exploration(
                        side,
                        walker,
                        self.coloring.support_east(),
                        self.coloring.support_west(),
                    );
                }
                if self.validate {
                    self.validate_exploration(ekind, k, m_before);
                }
                explored = Some(ekind);
                MicrostepEvent::SettledExploration(site)
            }
            SettleKind::Conversion => {
                match walker {
                    Color::Blue => {
                        self.blue_sites += 1;
                        self.red_sites -= 1;
                    }
                    Color::Red => {
                        self.red_sites += 1;
                        self.blue_sites -= 1;
                    }
                }
                if let Some(stack) = &mut self.layers {
                    stack.record_conversion(side, walker);
                }
                MicrostepEvent::SettledConversion(site)
            }
        };
        if self.goodness.is_some() {
            let (lside, level) = self.label;
            let duration = self.microsteps - self.emitted_at;
            self.goodness.as_mut().unwrap().record(lside, level, duration);
        }
        self.particles += 1;
        if self.validate {
            self.validate_settle();
        }
        self.emit();
        (event, explored)
    }

    fn emit(&mut self) {
        // Colors strictly alternate, so the next particle is the opposite of
        // the one that just settled (still held in `active`).
        let color = self.active.color.opposite();
        self.active = ActiveParticle { position: 0, color };
        self.bounds = self.coloring.stopping_boundaries(color);
        self.emitted_at = self.microsteps;
        if self.goodness.is_some() {
            self.label = self.goodness_label(color);
        }
    }

    /// (side, L) of the particle about to walk: L - 1 is the length of the
    /// adjacent run of the particle's own color. When neither adjacent site
    /// has the walker's color the run has length zero and its side is read
    /// off the zero-length slot of the innermost layer.
    fn goodness_label(&self, color: Color) -> (Side, u32) {
        if let Some((len, c)) = self.coloring.innermost(Side::East) {
            if c == color {
                return (Side::East, len + 1);
            }
        }
        if let Some((len, c)) = self.coloring.innermost(Side::West) {
            if c == color {
                return (Side::West, len + 1);
            }
        }
        if let Some(layer) = self.layers.as_ref().and_then(|s| s.innermost()) {
            if layer.color(Side::East) == color && layer.east == 0 {
                return (Side::East, 1);
            }
            if layer.color(Side::West) == color && layer.west == 0 {
                return (Side::West, 1);
            }
        }
        (Side::East, 1)
    }

    // --- validation ------------------------------------------------------

    fn report(&mut self, msg: String) {
        self.violation_count += 1;
        if self.violations.len() < 64 {
            self.violations.push(msg);
        }
    }

    fn validate_exploration(&mut self, kind: ExplorationKind, k: u32, m_before: i64) {
        if !self.coloring.monochromatic_opposite() {
            self.report(format!(
                "exploration at n={} without monochromatic opposite sides",
                self.particles + 1
            ));
        }
        let expected = match kind {
            ExplorationKind::FromBalanced => i64::from(k + 1) * i64::from(k + 2),
            ExplorationKind::FromUnbalanced => i64::from(k + 2) * i64::from(k + 2) - 1,
        };
        if m_before.abs() != expected {
            self.report(format!(
                "exploration at n={}: |M|={} expected {} ({kind:?}, k={k})",
                self.particles + 1,
                m_before.abs(),
                expected
            ));
        }
    }

    /// Called between a settle and the next emission: at this instant M equals
    /// the signed site sum alone.
    fn validate_settle(&mut self) {
        let n = self.particles;
        if let Err(e) = self.coloring.check_structure() {
            self.report(format!("n={n}: {e}"));
        }
        let (sw, se) = (self.coloring.support_west(), self.coloring.support_east());
        if se.abs_diff(sw) > 1 {
            self.report(format!("n={n}: |S_E - S_W| = {}", se.abs_diff(sw)));
        }
        let (r, b) = (self.red_sites, self.blue_sites);
        if r.abs_diff(b) > 2 {
            self.report(format!("n={n}: |R - B| = {}", r.abs_diff(b)));
        }
        if n % 2 == 1 && b < r {
            self.report(format!("n={n}: B - R = -{} after an odd round", r - b));
        }
        if n % 2 == 0 && r < b {
            self.report(format!("n={n}: R - B = -{} after an even round", b - r));
        }
        if r != self.coloring.count_color(Color::Red)
            || b != self.coloring.count_color(Color::Blue)
        {
            self.report(format!("n={n}: cached color counts diverge from coloring"));
        }
        if self.martingale != self.coloring.signed_position_sum() {
            self.report(format!(
                "n={n}: incremental M = {} but recomputed M = {}",
                self.martingale,
                self.coloring.signed_position_sum()
            ));
        }
        if let Some(stack) = &self.layers {
            if let Err(e) = stack.validate(&self.coloring) {
                self.report(format!("n={n}: layer stack: {e}"));
            }
        }
    }

    /// Re-checks the externally visible invariants of the current state.
    pub fn check_invariants(&self) -> Result<(), String> {
        self.coloring.check_structure()?;
        if self.martingale != self.martingale_value() {
            return Err(format!(
                "incremental M = {} but recomputed M = {}",
                self.martingale,
                self.martingale_value()
            ));
        }
        let (sw, se) = self.supports_at();
        if se.abs_diff(sw) > 1 {
            return Err(format!("|S_E - S_W| = {}", se.abs_diff(sw)));
        }
        if self.red_sites.abs_diff(self.blue_sites) > 2 {
            return Err(format!(
                "|R - B| = {}",
                self.red_sites.abs_diff(self.blue_sites)
            ));
        }
        if self.microsteps < self.particles {
            return Err("t < n".into());
        }
        if let Some(stack) = &self.layers {
            stack.validate(&self.coloring)?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::Color::{Blue, Red};
    use crate::rng::mix_seed;

    #[test]
    fn fresh_state_is_empty() {
        let s = ErosionState::new(42);
        assert_eq!(s.supports_at(), (0, 0));
        assert_eq!(s.martingale(), 0);
        assert_eq!(s.martingale_value(), 0);
        assert_eq!(s.particles(), 0);
        assert_eq!(s.microsteps(), 0);
        assert_eq!(s.active().color, Blue);
    }

    #[test]
    fn equal_seeds_give_identical_trajectories() {
        let mut a = ErosionState::new(9);
        let mut b = ErosionState::new(9);
        a.run_until_particles(500).unwrap();
        b.run_until_particles(500).unwrap();
        assert_eq!(a.coloring(), b.coloring());
        assert_eq!(a.microsteps(), b.microsteps());
        assert_eq!(a.martingale(), b.martingale());
    }

    #[test]
    fn first_particle_settles_in_one_step() {
        for seed in 0..20u64 {
            let mut s = ErosionState::new(seed);
            s.run_until_particles(1).unwrap();
            assert_eq!(s.microsteps(), 1);
            assert_eq!(s.coloring().support(), 1);
            // after the exploration jump and re-emission, |M| = 1
            assert_eq!(s.martingale().abs(), 1);
            assert_eq!(s.martingale(), s.martingale_value());
            assert_eq!(s.active().color, Red);
        }
    }

    /// Hand enumeration of the two-particle histories: the first (blue)
    /// particle explores one site; the second (red) particle has boundaries
    /// (-1, +1) and with probability 1/2 converts the blue site (S = 1) or
    /// explores the other side (S = 2).
    #[test]
    fn second_particle_law_by_enumeration() {
        let mut ones = 0u32;
        let mut twos = 0u32;
        let trials = 40_000u64;
        for seed in 0..trials {
            let mut s = ErosionState::new(mix_seed(0xE0, seed));
            s.run_until_particles(2).unwrap();
            match s.coloring().support() {
                1 => ones += 1,
                2 => twos += 1,
                other => panic!("S(2) = {other}"),
            }
            if s.coloring().support() == 2 {
                // one site on each side, never a stack of two
                let (sw, se) = s.supports_at();
                assert_eq!((sw, se), (1, 1));
            }
        }
        // both outcomes occur with probability 1/2; 5 sigma band
        let half = trials as f64 / 2.0;
        let sd = (trials as f64 * 0.25).sqrt();
        assert!((f64::from(ones) - half).abs() < 5.0 * sd, "ones = {ones}");
        assert!((f64::from(twos) - half).abs() < 5.0 * sd, "twos = {twos}");
    }

    #[test]
    fn martingale_direct_evaluation_examples() {
        let c = SiteColoring::from_sites(&[Blue, Blue], &[Red, Red]);
        let s = ErosionState::with_configuration(c, Blue, 0);
        // (1+2) + (1+2) + 0 = 6 = k(k+1) with k = 2
        assert_eq!(s.martingale_value(), 6);
        assert_eq!(s.martingale(), 6);

        let s = ErosionState::with_configuration(SiteColoring::new(), Blue, 0);
        assert_eq!(s.martingale_value(), 0);

        let c = SiteColoring::from_sites(&[Blue], &[]);
        let s = ErosionState::with_configuration(c, Red, 0);
        // site term alone is 1; the active particle at the origin adds 0
        assert_eq!(s.coloring().signed_position_sum(), 1);
    }

    #[test]
    fn stopping_rule_examples() {
        // east=[B], west=[R], red walker: the blue site stops it immediately
        // on the east, but it passes through its own red site going west.
        let c = SiteColoring::from_sites(&[Blue], &[Red]);
        let mut s = ErosionState::with_configuration(c, Red, 0);
        assert_eq!(s.coloring().stopping_boundaries(Red), (-2, 1));
        // force steps until it settles; whichever side, R - B becomes 2 or 0
        while s.particles() == 0 {
            s.microstep().unwrap();
        }
        assert!(s.red_count() == 2 || (s.red_count() == 1 && s.blue_count() == 1));

        // own-color sites do not stop the walker
        let c = SiteColoring::from_sites(&[Blue, Blue], &[Red]);
        let s = ErosionState::with_configuration(c, Blue, 0);
        assert_eq!(s.coloring().stopping_boundaries(Blue), (-1, 3));
    }

    #[test]
    fn invariants_hold_over_small_runs() {
        for seed in 0..10u64 {
            let mut s = ErosionState::with_options(
                seed,
                StateOptions {
                    layers: true,
                    goodness: true,
                    log_explorations: true,
                    validate: true,
                },
            );
            s.run_until_particles(2_000).unwrap();
            assert_eq!(s.violations(), &[] as &[String], "seed {seed}");
            s.check_invariants().unwrap();
            assert_eq!(s.goodness().unwrap().total(), s.microsteps());
        }
    }

    #[test]
    fn exploration_log_martingale_levels() {
        let mut s = ErosionState::with_options(
            3,
            StateOptions {
                log_explorations: true,
                ..StateOptions::default()
            },
        );
        s.run_until_particles(5_000).unwrap();
        for (i, rec) in s.exploration_log().iter().enumerate() {
            let expected = match rec.kind {
                ExplorationKind::FromBalanced => {
                    assert_eq!(i % 2, 0, "balanced explorations are the even ones");
                    assert_eq!(u64::from(rec.k), i as u64 / 2);
                    i64::from(rec.k + 1) * i64::from(rec.k + 2)
                }
                ExplorationKind::FromUnbalanced => {
                    assert_eq!(i % 2, 1);
                    assert_eq!(u64::from(rec.k), (i as u64 - 1) / 2);
                    i64::from(rec.k + 2) * i64::from(rec.k + 2) - 1
                }
            };
            assert_eq!(rec.martingale_before.abs(), expected);
        }
    }

    /// Mean durations of the two segment families: explorations alternate
    /// balanced/unbalanced, and the stretch ending in the k-th balanced
    /// exploration has mean length (k+1)³, while the following stretch has
    /// mean (k+1)²(k+2).
    #[test]
    fn segment_durations_match_ruin_expectations() {
        let ks = [0usize, 1, 2, 3, 5];
        let needed = 2 * ks.iter().max().unwrap() + 2; // log entries used per trial
        let trials = 4_000u64;
        let mut sums = vec![[0.0f64; 2]; ks.len()];
        let mut sqs = vec![[0.0f64; 2]; ks.len()];
        for trial in 0..trials {
            let mut s = ErosionState::with_options(
                mix_seed(0x5E9, trial),
                StateOptions {
                    log_explorations: true,
                    ..StateOptions::default()
                },
            );
            // Run each trial until every segment of interest has completed;
            // stopping at a fixed particle budget instead would condition on
            // "many explorations happened quickly" and bias the durations down.
            while s.exploration_log().len() < needed {
                s.microstep().unwrap();
            }
            let log = s.exploration_log();
            for (i, &k) in ks.iter().enumerate() {
                let to_balanced = 2 * k; // log index ending segment E_k
                let start = if to_balanced == 0 {
                    0
                } else {
                    log[to_balanced - 1].microstep_index
                };
                let d1 = (log[to_balanced].microstep_index - start) as f64;
                let d2 =
                    (log[to_balanced + 1].microstep_index - log[to_balanced].microstep_index) as f64;
                sums[i][0] += d1;
                sums[i][1] += d2;
                sqs[i][0] += d1 * d1;
                sqs[i][1] += d2 * d2;
            }
        }
        for (i, &k) in ks.iter().enumerate() {
            let kk = k as f64;
            let expect = [(kk + 1.0).powi(3), (kk + 1.0).powi(2) * (kk + 2.0)];
            for j in 0..2 {
                let n = trials as f64;
                let mean = sums[i][j] / n;
                let var = (sqs[i][j] / n - mean * mean).max(0.0);
                let se = (var / n).sqrt();
                assert!(
                    (mean - expect[j]).abs() <= 3.0 * se + 1e-9,
                    "k={k} segment {j}: mean {mean}, expected {} ± 3×{se}",
                    expect[j]
                );
            }
        }
    }

    #[test]
    fn fast_settle_requires_fresh_particle() {
        let mut s = ErosionState::new(0);
        // walk one step without settling: impossible from a fresh state since
        // boundaries are (-1, 1); instead settle once and step mid-walk later.
        s.run_until_particles(3).unwrap();
        // step until the active particle is off the origin but unsettled
        loop {
            if let MicrostepEvent::Moved(p) = s.microstep().unwrap() {
                if p != 0 {
                    break;
                }
            }
        }
        assert_eq!(s.fast_settle(), Err(EngineError::MidWalk));
    }

    #[test]
    fn fast_settle_symmetric_one_step() {
        // a = -1, b = +1: each side probability 1/2, expected duration 1.
        let mut east = 0u32;
        let trials = 20_000;
        for seed in 0..trials {
            let mut s = ErosionState::new(mix_seed(0xFA57, seed));
            s.fast_settle().unwrap();
            assert_eq!(s.microsteps(), 1);
            if s.coloring().support_east() == 1 {
                east += 1;
            }
        }
        let sd = (trials as f64 * 0.25).sqrt();
        assert!((f64::from(east) - trials as f64 / 2.0).abs() < 5.0 * sd);
    }

    #[test]
    fn fast_settle_ruin_frequencies() {
        // boundaries (-3, +2): settles east with probability 3/5.
        let base = SiteColoring::from_sites(&[Blue], &[Red, Red]);
        // blue walker: east stop at 2? east innermost is blue run of length 1
        // -> boundary 2; west run red -> boundary -1. Use red walker instead:
        // east blue -> 1, west red len 2 -> -3. That gives (a, b) = (-3, +1).
        let mut east = 0u64;
        let trials = 200_000u64;
        for seed in 0..trials {
            let mut s =
                ErosionState::with_configuration(base.clone(), Red, mix_seed(0xBEEF, seed));
            assert_eq!(s.coloring().stopping_boundaries(Red), (-3, 1));
            s.fast_settle().unwrap();
            assert_eq!(s.microsteps(), 3);
            if s.coloring().color_at(1) == Some(Red) {
                east += 1;
            }
        }
        // P(east) = |a|/(|a|+b) = 3/4
        let p = 0.75f64;
        let sd = (trials as f64 * p * (1.0 - p)).sqrt();
        assert!((east as f64 - trials as f64 * p).abs() < 4.0 * sd);
    }

    /// Fast mode and exact mode agree in distribution on the final coloring:
    /// two-sample KS on S(n) and E(n, 1) at n = 10^4.
    #[test]
    fn fast_mode_matches_exact_mode_distributions() {
        let trials = 10_000u64;
        let n = 10_000u64;
        let collect = |fast: bool, master: u64| -> (Vec<f64>, Vec<f64>) {
            let mut support = Vec::with_capacity(trials as usize);
            let mut e1 = Vec::with_capacity(trials as usize);
            for trial in 0..trials {
                let mut s = ErosionState::new(mix_seed(master, trial));
                if fast {
                    s.run_fast_particles(n).unwrap();
                } else {
                    s.run_until_particles(n).unwrap();
                }
                support.push(f64::from(s.coloring().support()));
                let view = s.coloring().run_lengths(1);
                e1.push(f64::from(view.east.first().copied().unwrap_or(0)));
            }
            (support, e1)
        };
        let (s_exact, e_exact) = collect(false, 0x0A);
        let (s_fast, e_fast) = collect(true, 0x0B);
        let d_s = crate::stats::ks_statistic(&s_exact, &s_fast);
        let d_e = crate::stats::ks_statistic(&e_exact, &e_fast);
        assert!(d_s < 0.03, "KS on S(n): {d_s}");
        assert!(d_e < 0.03, "KS on E(n,1): {d_e}");
    }

    #[test]
    fn overflow_guard_reports() {
        let mut s = ErosionState::new(0);
        // Exhausting 2^62 steps is impossible in a test; instead fabricate a
        // state just under the budget via serialization surgery.
        s.run_until_particles(10).unwrap();
        let mut v = serde_json::to_value(&s).unwrap();
        v["microsteps"] = serde_json::json!(MICROSTEP_BUDGET);
        let mut s: ErosionState = serde_json::from_value(v).unwrap();
        assert_eq!(s.microstep(), Err(EngineError::Overflow));
    }
}
