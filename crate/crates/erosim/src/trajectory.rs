//! Recorded M-increment trajectories, their binary format, and the
//! decomposition of the M path into its two interleaved excursion families.
//!
//! A trajectory stores one bit per microstep — whether M moved up by 2 — plus
//! a sparse list of exploration marks. Increments are packed eight to a byte,
//! least significant bit first.
//!
//! The path of M alternates between two kinds of stretches: those ending in a
//! balanced exploration (E segments) and those ending in an unbalanced one
//! (F segments). Gluing all E segments together, flipping signs where needed,
//! yields a single continuous path whose k-th junction sits exactly at
//! ±(k+1)(k+2); gluing the F segments needs an additional per-segment
//! translation because the junction magnitudes disagree by one, so its k-th
//! junction sits within k+1 of ±((k+2)² − 1). The per-segment transforms are
//! recorded so the original trajectory can be rebuilt bit for bit.

use crate::state::ExplorationKind;
use serde::{Deserialize, Serialize};
use thiserror::Error;

const MAGIC: &[u8; 8] = b"EROTRAJ1";

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TrajectoryError {
    #[error("bad magic header")]
    BadMagic,
    #[error("truncated trajectory data")]
    Truncated,
    #[error("unknown exploration kind tag {0}")]
    BadKind(u8),
    #[error("mark at {mark} out of bounds (len {len}) or out of order")]
    BadMark { mark: u64, len: u64 },
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DecomposeError {
    #[error("exploration {index}: |M| = {got}, expected {expected}")]
    BoundaryMismatch { index: usize, got: i64, expected: i64 },
}

/// ±1 (in units of 2) increments of M with exploration marks.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct Trajectory {
    bytes: Vec<u8>,
    len: u64,
    /// (0-based microstep index of the increment that triggered it, kind),
    /// strictly increasing in the index.
    marks: Vec<(u64, ExplorationKind)>,
}

impl Trajectory {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> u64 {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn marks(&self) -> &[(u64, ExplorationKind)] {
        &self.marks
    }

    #[inline]
    pub fn push_increment(&mut self, up: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        if up {
            *self.bytes.last_mut().unwrap() |= 1 << (self.len % 8);
        }
        self.len += 1;
    }

    /// Marks the increment pushed last as an exploration.
    pub fn mark(&mut self, kind: ExplorationKind) {
        debug_assert!(self.len > 0);
        self.marks.push((self.len - 1, kind));
    }

    #[inline]
    pub fn get(&self, i: u64) -> bool {
        self.bytes[(i / 8) as usize] >> (i % 8) & 1 == 1
    }

    /// M increment (±2) at microstep `i`.
    #[inline]
    pub fn increment(&self, i: u64) -> i64 {
        if self.get(i) {
            2
        } else {
            -2
        }
    }

    // --- binary format ---------------------------------------------------
    //
    // magic "EROTRAJ1" | len u64 LE | ceil(len/8) packed bytes |
    // mark count u64 LE | marks: (index u64 LE, kind byte 0/1)

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = Vec::with_capacity(24 + self.bytes.len() + 9 * self.marks.len());
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&self.len.to_le_bytes());
        out.extend_from_slice(&self.bytes);
        out.extend_from_slice(&(self.marks.len() as u64).to_le_bytes());
        for &(idx, kind) in &self.marks {
            out.extend_from_slice(&idx.to_le_bytes());
            out.push(match kind {
                ExplorationKind::FromBalanced => 0,
                ExplorationKind::FromUnbalanced => 1,
            });
        }
        out
    }

    pub fn from_bytes(data: &[u8]) -> Result<Self, TrajectoryError> {
        let mut at = 0usize;
        let take = |at: &mut usize, n: usize| -> Result<&[u8], TrajectoryError> {
            let slice = data
                .get(*at..*at + n)
                .ok_or(TrajectoryError::Truncated)?;
            *at += n;
            Ok(slice)
        };
        if take(&mut at, 8)? != MAGIC {
            return Err(TrajectoryError::BadMagic);
        }
        let len = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
        let nbytes = len.div_ceil(8) as usize;
        let bytes = take(&mut at, nbytes)?.to_vec();
        let nmarks = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
        let mut marks = Vec::with_capacity(nmarks.min(1 << 20) as usize);
        let mut prev: Option<u64> = None;
        for _ in 0..nmarks {
            let idx = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap());
            let kind = match take(&mut at, 1)?[0] {
                0 => ExplorationKind::FromBalanced,
                1 => ExplorationKind::FromUnbalanced,
                other => return Err(TrajectoryError::BadKind(other)),
            };
            if idx >= len || prev.is_some_and(|p| idx <= p) {
                return Err(TrajectoryError::BadMark { mark: idx, len });
            }
            prev = Some(idx);
            marks.push((idx, kind));
        }
        // trailing bits of the last packed byte must be zero
        if len % 8 != 0 {
            if let Some(&last) = bytes.last() {
                if last >> (len % 8) != 0 {
                    return Err(TrajectoryError::Truncated);
                }
            }
        }
        Ok(Trajectory { bytes, len, marks })
    }

    pub fn decompose(&self) -> Result<Excursions, DecomposeError> {
        Excursions::from_trajectory(self)
    }
}

/// One glued segment: whether its raw increments were sign-flipped and the
/// constant added after flipping (always zero for the E path).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Segment {
    pub flipped: bool,
    pub shift: i64,
    pub len: u64,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Excursions {
    /// Values of the glued E path after each of its increments (start is 0).
    pub path_e: Vec<i64>,
    pub path_f: Vec<i64>,
    pub segments_e: Vec<Segment>,
    pub segments_f: Vec<Segment>,
    /// Glued path value at the end of each completed segment; the k-th E
    /// boundary is exactly ±(k+1)(k+2).
    pub boundaries_e: Vec<i64>,
    pub boundaries_f: Vec<i64>,
    /// Whether the trailing unfinished segment belongs to the E path.
    pub tail_in_e: bool,
}

impl Excursions {
    fn from_trajectory(traj: &Trajectory) -> Result<Self, DecomposeError> {
        let mut out = Excursions {
            path_e: Vec::new(),
            path_f: Vec::new(),
            segments_e: Vec::new(),
            segments_f: Vec::new(),
            boundaries_e: Vec::new(),
            boundaries_f: Vec::new(),
            tail_in_e: traj.marks().len() % 2 == 0,
        };
        let mut m: i64 = 0; // raw M value
        let mut seg_start_m = 0i64; // raw M at the start of the open segment
        let mut start = 0u64; // first increment index of the open segment
        let mut next_mark = 0usize;
        let mut i = 0u64;
        while i < traj.len() {
            m += traj.increment(i);
            let marked = traj
                .marks()
                .get(next_mark)
                .is_some_and(|&(idx, _)| idx == i);
            if marked {
                let (_, kind) = traj.marks()[next_mark];
                let e_index = next_mark; // 0-based exploration index
                let k = (e_index / 2) as i64;
                let (expected_pre, post_abs) = match kind {
                    ExplorationKind::FromBalanced => ((k + 1) * (k + 2), (k + 1) * (k + 1)),
                    ExplorationKind::FromUnbalanced => ((k + 2) * (k + 2) - 1, (k + 1) * (k + 2)),
                };
                if m.abs() != expected_pre {
                    return Err(DecomposeError::BoundaryMismatch {
                        index: e_index,
                        got: m,
                        expected: expected_pre,
                    });
                }
                out.append_segment(traj, start, i + 1, seg_start_m, e_index % 2 == 0, true);
                // the exploration jump toward zero, keeping the sign
                m = m.signum() * post_abs;
                seg_start_m = m;
                start = i + 1;
                next_mark += 1;
            }
            i += 1;
        }
        if start < traj.len() {
            out.append_segment(traj, start, traj.len(), seg_start_m, out.tail_in_e, false);
        }
        Ok(out)
    }

    /// Glues raw increments `[start, end)` onto one of the two paths;
    /// `raw_start` is the raw M value just before increment `start`.
    fn append_segment(
        &mut self,
        traj: &Trajectory,
        start: u64,
        end: u64,
        raw_start: i64,
        into_e: bool,
        completed: bool,
    ) {
        let (path, segments) = if into_e {
            (&mut self.path_e, &mut self.segments_e)
        } else {
            (&mut self.path_f, &mut self.segments_f)
        };
        let glued_end = path.last().copied().unwrap_or(0);
        let flipped = match (raw_start.signum(), glued_end.signum()) {
            (0, _) | (_, 0) => false,
            (a, b) => a != b,
        };
        let sign = if flipped { -1 } else { 1 };
        let shift = glued_end - sign * raw_start;
        let mut v = glued_end;
        for i in start..end {
            v += sign * traj.increment(i);
            path.push(v);
        }
        segments.push(Segment {
            flipped,
            shift,
            len: end - start,
        });
        if completed {
            if into_e {
                self.boundaries_e.push(v);
            } else {
                self.boundaries_f.push(v);
            }
        }
    }

    /// Inverse of `decompose`: rebuilds the trajectory bit for bit.
    pub fn reconstruct(&self) -> Trajectory {
        let mut traj = Trajectory::new();
        let mut at_e = 0usize; // consumed increments of path_e
        let mut at_f = 0usize;
        let total = self.segments_e.len() + self.segments_f.len();
        for s in 0..total {
            // original order alternates E, F, E, F, ...
            let (seg, path, at) = if s % 2 == 0 {
                let seg = self.segments_e[s / 2];
                (seg, &self.path_e, &mut at_e)
            } else {
                let seg = self.segments_f[s / 2];
                (seg, &self.path_f, &mut at_f)
            };
            let mut prev = if *at == 0 { 0 } else { path[*at - 1] };
            for _ in 0..seg.len {
                let v = path[*at];
                let d = v - prev;
                debug_assert!(d == 2 || d == -2);
                traj.push_increment((d > 0) != seg.flipped);
                prev = v;
                *at += 1;
            }
            // completed segments end with a mark
            let is_tail = s == total - 1
                && ((s % 2 == 0) == self.tail_in_e)
                && self.boundary_count(s % 2 == 0) < self.segment_count(s % 2 == 0);
            if !is_tail {
                traj.mark(if s % 2 == 0 {
                    ExplorationKind::FromBalanced
                } else {
                    ExplorationKind::FromUnbalanced
                });
            }
        }
        traj
    }

    fn boundary_count(&self, e: bool) -> usize {
        if e {
            self.boundaries_e.len()
        } else {
            self.boundaries_f.len()
        }
    }

    fn segment_count(&self, e: bool) -> usize {
        if e {
            self.segments_e.len()
        } else {
            self.segments_f.len()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::mix_seed;
    use crate::state::ErosionState;

    fn recorded(seed: u64, t: u64) -> Trajectory {
        let mut s = ErosionState::new(seed);
        let mut traj = Trajectory::new();
        s.run_recorded(t, &mut traj).unwrap();
        traj
    }

    #[test]
    fn bits_pack_lsb_first() {
        let mut t = Trajectory::new();
        for up in [true, false, true, true, false, false, false, true, true] {
            t.push_increment(up);
        }
        assert_eq!(t.len(), 9);
        assert!(t.get(0) && !t.get(1) && t.get(8));
        let bytes = t.to_bytes();
        // magic + len + data starts at offset 16
        assert_eq!(bytes[16], 0b1000_1101);
        assert_eq!(bytes[17], 0b0000_0001);
    }

    #[test]
    fn binary_round_trip() {
        for seed in 0..5u64 {
            let t = recorded(mix_seed(0x7A, seed), 20_000);
            assert!(!t.marks().is_empty());
            let back = Trajectory::from_bytes(&t.to_bytes()).unwrap();
            assert_eq!(t, back);
        }
    }

    #[test]
    fn malformed_inputs_are_rejected() {
        let t = recorded(1, 1000);
        let bytes = t.to_bytes();
        assert_eq!(
            Trajectory::from_bytes(&bytes[1..]),
            Err(TrajectoryError::BadMagic)
        );
        assert_eq!(
            Trajectory::from_bytes(&bytes[..bytes.len() - 1]),
            Err(TrajectoryError::Truncated)
        );
        let mut bad = bytes.clone();
        let kind_at = bad.len() - 1; // kind byte of the last mark
        bad[kind_at] = 7;
        assert_eq!(Trajectory::from_bytes(&bad), Err(TrajectoryError::BadKind(7)));
    }

    #[test]
    fn recorded_marks_match_engine_log() {
        use crate::state::StateOptions;
        let mut s = ErosionState::with_options(
            11,
            StateOptions {
                log_explorations: true,
                ..StateOptions::default()
            },
        );
        let mut traj = Trajectory::new();
        s.run_recorded(50_000, &mut traj).unwrap();
        let log = s.exploration_log();
        assert_eq!(traj.marks().len(), log.len());
        for (&(idx, kind), rec) in traj.marks().iter().zip(log) {
            assert_eq!(idx + 1, rec.microstep_index);
            assert_eq!(kind, rec.kind);
        }
    }

    #[test]
    fn decomposition_boundaries_are_exact() {
        for seed in 0..10u64 {
            let t = recorded(mix_seed(0xDE, seed), 100_000);
            let ex = t.decompose().unwrap();
            for (k, &b) in ex.boundaries_e.iter().enumerate() {
                let k = k as i64;
                assert_eq!(b.abs(), (k + 1) * (k + 2), "E boundary {k}");
            }
            for (k, &b) in ex.boundaries_f.iter().enumerate() {
                let k = k as i64;
                let target = (k + 2) * (k + 2) - 1;
                assert!(
                    (b.abs() - target).abs() <= k + 1,
                    "F boundary {k}: {b} vs {target}"
                );
            }
            // every increment of both glued paths is ±2
            for path in [&ex.path_e, &ex.path_f] {
                let mut prev = 0i64;
                for &v in path.iter() {
                    assert_eq!((v - prev).abs(), 2);
                    prev = v;
                }
            }
        }
    }

    #[test]
    fn decomposition_round_trips() {
        for seed in 0..10u64 {
            let t = recorded(mix_seed(0xF0, seed), 60_000);
            let ex = t.decompose().unwrap();
            assert_eq!(ex.reconstruct(), t, "seed {seed}");
        }
    }

    #[test]
    fn tampered_marks_fail_decomposition() {
        let mut t = recorded(2, 10_000);
        // corrupt the kind of the first mark
        let kind = &mut t.marks[0].1;
        *kind = match *kind {
            ExplorationKind::FromBalanced => ExplorationKind::FromUnbalanced,
            ExplorationKind::FromUnbalanced => ExplorationKind::FromBalanced,
        };
        assert!(matches!(
            t.decompose(),
            Err(DecomposeError::BoundaryMismatch { .. })
        ));
    }
}
