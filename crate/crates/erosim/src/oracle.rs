//! Sampling the limit-law functionals by discretization.
//!
//! Two independent ±1 walks of m steps stand in for the Brownian pair (𝓑, 𝓑').
//! The hitting functional is the largest integer level a whose first-passage
//! times by the two reflected walks sum to at most m; 𝒳_1 is that level over
//! √m. The carrier is the path whose |value| maximum over its complementary
//! window equals the level exactly (the other path overshoots it);
//! sign-normalizing it so the value at its hit is +𝒳_1, the
//! alternating minima 𝓜_j and maxima 𝒰_j of the remaining stretch give
//! 𝒳_2 = 𝒳_1 − 𝓜_1, 𝒳_3 = 𝒰_1 − 𝓜_1, 𝒳_4 = 𝒰_1 − 𝓜_2, …
//!
//! Everything is exact integer arithmetic until the final 1/√m scaling:
//! levels are scanned without interpolation, and extremum times take the
//! earliest attainment, matching the almost-surely unique continuum times.

use crate::constants::C_CONST;
use crate::rng::{mix_seed, BitSource};
use rayon::prelude::*;

/// One ±1 (or, via `from_values`, any integer) path with its running maxima
/// of |value| and first-passage times per integer level.
#[derive(Clone, Debug, Default)]
pub struct WalkScan {
    /// values[i] after i steps; values[0] = 0.
    pub values: Vec<i32>,
    /// runmax[i] = max |values[0..=i]|.
    pub runmax: Vec<i32>,
    /// hit[a] = first i with |values[i]| ≥ a; hit[0] = 0.
    pub hit: Vec<u32>,
}

impl WalkScan {
    /// Fills the scan with m fair ±1 steps drawn from `bits`.
    pub fn fill(&mut self, m: usize, bits: &mut BitSource) {
        self.values.clear();
        self.values.push(0);
        let mut v = 0i32;
        for _ in 0..m {
            v += bits.step() as i32;
            self.values.push(v);
        }
        self.index();
    }

    pub fn from_values(values: Vec<i32>) -> Self {
        assert_eq!(values.first(), Some(&0));
        let mut scan = WalkScan {
            values,
            ..WalkScan::default()
        };
        scan.index();
        scan
    }

    fn index(&mut self) {
        self.runmax.clear();
        self.hit.clear();
        self.hit.push(0);
        let mut max = 0i32;
        for (i, &v) in self.values.iter().enumerate() {
            let a = v.abs();
            while a > max {
                max += 1;
                self.hit.push(i as u32);
            }
            self.runmax.push(max);
        }
    }

    pub fn steps(&self) -> usize {
        self.values.len() - 1
    }

    pub fn max_abs(&self) -> i32 {
        *self.runmax.last().unwrap()
    }
}

/// Largest integer level a with hit_f(a) + hit_g(a) ≤ m, plus both
/// first-passage times. Returns (0, 0, 0) when no positive level qualifies.
pub fn hitting_functional(f: &WalkScan, g: &WalkScan) -> (i32, u32, u32) {
    let m = f.steps();
    assert_eq!(m, g.steps());
    let amax = f.max_abs().min(g.max_abs());
    for a in (1..=amax).rev() {
        let (tf, tg) = (f.hit[a as usize], g.hit[a as usize]);
        if u64::from(tf) + u64::from(tg) <= m as u64 {
            return (a, tf, tg);
        }
    }
    (0, 0, 0)
}

#[derive(Clone, Debug, PartialEq)]
pub struct LimitSample {
    /// 𝒳_1 .. 𝒳_{k+1}, scaled by 1/√m.
    pub x: Vec<f64>,
    /// True when the second path carries the extrema (the first path's
    /// hitting time is the binding constraint).
    pub carrier_is_second: bool,
    /// First-passage times of the binding level by the two paths, as
    /// fractions of the horizon.
    pub t_first: f64,
    pub t_second: f64,
    /// Discrete-ambiguity flag: carrier undecided at lattice resolution, or
    /// the extremum gaps fail to decrease strictly.
    pub tie: bool,
    /// No positive level was feasible (only possible at tiny m).
    pub degenerate: bool,
}

impl LimitSample {
    /// C·√𝒳_1 — the limit of S(n)/n^{1/4}.
    pub fn scaled_support(&self) -> f64 {
        C_CONST * self.x[0].sqrt()
    }

    /// (C/2)(√𝒳_1 − √(𝒳_2/2)) for i = 1, then
    /// (C/2)(√(𝒳_i/2) − √(𝒳_{i+1}/2)) — the limit of E(n, i)/n^{1/4}.
    pub fn scaled_run(&self, i: usize) -> f64 {
        assert!(i >= 1 && i < self.x.len());
        let lead = if i == 1 {
            self.x[0].sqrt()
        } else {
            (self.x[i - 1] / 2.0).sqrt()
        };
        C_CONST / 2.0 * (lead - (self.x[i] / 2.0).sqrt())
    }

    /// √(2𝒳_1) — the limit of S_E^t/t^{1/4}.
    pub fn microstep_support(&self) -> f64 {
        (2.0 * self.x[0]).sqrt()
    }
}

/// Reusable per-thread buffers for `sample_limit`.
#[derive(Default)]
pub struct Scratch {
    f: WalkScan,
    g: WalkScan,
    sufmin: Vec<i32>,
    sufmax: Vec<i32>,
}

/// Evaluates one sampled pair of scans into a LimitSample with levels
/// 𝒳_1..𝒳_{k+1}.
pub fn alternating_extrema(
    f: &WalkScan,
    g: &WalkScan,
    k: usize,
    scratch: &mut Scratch,
) -> LimitSample {
    let m = f.steps();
    let scale = 1.0 / (m as f64).sqrt();
    let (x1, tf, tg) = hitting_functional(f, g);
    if x1 == 0 {
        return LimitSample {
            x: vec![0.0; k + 1],
            carrier_is_second: false,
            t_first: 0.0,
            t_second: 0.0,
            tie: true,
            degenerate: true,
        };
    }
    // Window ends: the carrier's window is cut by the other path's hit time.
    let w_for_g = m - tf as usize;
    let w_for_f = m - tg as usize;
    // Both paths reach the level inside their windows (that is what makes the
    // level feasible), but almost surely exactly one of them never goes
    // beyond it: that path's window maximum is the level itself, and it
    // carries the extremum sequence. The other path overshoots.
    let rf = f.runmax[w_for_f];
    let rg = g.runmax[w_for_g];
    debug_assert!(rf >= x1 && rg >= x1);
    let mut tie = false;
    let carrier_is_second = match (rf == x1, rg == x1) {
        (true, false) => false,
        (false, true) => true,
        _ => {
            // both exactly at the level, or both past it: lattice ambiguity
            tie = true;
            if rf != rg {
                rg < rf
            } else {
                g.hit[x1 as usize] < f.hit[x1 as usize]
            }
        }
    };
    let (p, w) = if carrier_is_second {
        (g, w_for_g)
    } else {
        (f, w_for_f)
    };
    let u0 = p.hit[x1 as usize] as usize;
    let (levels, strict) = extrema_levels(&p.values, u0, w.max(u0), x1, k + 1, scratch);
    LimitSample {
        x: levels.iter().map(|&l| f64::from(l) * scale).collect(),
        carrier_is_second,
        t_first: f64::from(tf) / m as f64,
        t_second: f64::from(tg) / m as f64,
        tie: tie || !strict,
        degenerate: false,
    }
}

/// Alternating extrema gaps of `values` on [u0, w], sign-normalized so the
/// value at u0 reads +x1. Returns (𝒳_1..𝒳_count, strictly-decreasing flag);
/// strictness is checked from 𝒳_2 on (𝒳_1 ≥ 𝒳_2 is not a continuum
/// guarantee: the carrier may cross zero inside its window).
fn extrema_levels(
    values: &[i32],
    u0: usize,
    w: usize,
    x1: i32,
    count: usize,
    scratch: &mut Scratch,
) -> (Vec<i32>, bool) {
    let sign = if values[u0] < 0 { -1 } else { 1 };
    debug_assert_eq!(sign * values[u0], x1);
    let q = |i: usize| sign * values[i];
    // suffix extrema of q over [u0, w], stored at index i - u0
    let n = w - u0 + 1;
    scratch.sufmin.clear();
    scratch.sufmax.clear();
    scratch.sufmin.resize(n, 0);
    scratch.sufmax.resize(n, 0);
    let (mut lo, mut hi) = (q(w), q(w));
    for i in (u0..=w).rev() {
        lo = lo.min(q(i));
        hi = hi.max(q(i));
        scratch.sufmin[i - u0] = lo;
        scratch.sufmax[i - u0] = hi;
    }
    let mut x = Vec::with_capacity(count);
    x.push(x1);
    let mut at = u0;
    let mut u_prev = x1; // 𝒰_0 = 𝒳_1
    while x.len() < count {
        // 𝓜_j on [at, w], earliest attainment
        let m_j = scratch.sufmin[at - u0];
        while q(at) != m_j {
            at += 1;
        }
        x.push(u_prev - m_j);
        if x.len() == count {
            break;
        }
        // 𝒰_j on [argmin, w], earliest attainment
        let u_j = scratch.sufmax[at - u0];
        while q(at) != u_j {
            at += 1;
        }
        x.push(u_j - m_j);
        u_prev = u_j;
    }
    let strict = x.windows(2).skip(1).all(|p| p[0] > p[1]);
    (x, strict)
}

/// Independent limit-law samples; trial i uses the seed stream
/// mix_seed(master_seed, i), paths drawn back to back.
pub fn sample_limit(trials: u64, m: usize, k: usize, master_seed: u64) -> Vec<LimitSample> {
    (0..trials)
        .into_par_iter()
        .map_init(Scratch::default, |scratch, trial| {
            let mut bits = BitSource::new(mix_seed(master_seed, trial));
            let mut f = std::mem::take(&mut scratch.f);
            let mut g = std::mem::take(&mut scratch.g);
            f.fill(m, &mut bits);
            g.fill(m, &mut bits);
            let sample = alternating_extrema(&f, &g, k, scratch);
            scratch.f = f;
            scratch.g = g;
            sample
        })
        .collect()
}
