//! Run-length-encoded two-sided color configuration around the origin.
//!
//! The colored region is always a pair of contiguous intervals `[1, S_E]` and
//! `[-S_W, -1]`; the origin itself is never colored. Each side is stored as a
//! deque of maximal monochromatic runs, innermost run first, so every settle
//! touches only the ends: O(1) amortized per particle even at n = 10^7.

use serde::{Deserialize, Serialize};
use std::collections::VecDeque;

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Color {
    Red,
    Blue,
}

impl Color {
    pub fn opposite(self) -> Color {
        match self {
            Color::Red => Color::Blue,
            Color::Blue => Color::Red,
        }
    }

    /// Sign of a colored site's contribution to the potential M:
    /// blue counts positive, red negative.
    #[inline(always)]
    pub fn sign(self) -> i64 {
        match self {
            Color::Blue => 1,
            Color::Red => -1,
        }
    }

    pub fn letter(self) -> char {
        match self {
            Color::Red => 'R',
            Color::Blue => 'B',
        }
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Run {
    pub color: Color,
    pub len: u32,
}

/// What a settle did to the configuration.
#[derive(Clone, Copy, PartialEq, Eq, Debug)]
pub enum SettleKind {
    /// Recolored a previously opposite-colored site.
    Conversion,
    /// Claimed a previously uncolored site, enlarging the support.
    Exploration,
}

/// Which side of the origin a site or run lies on.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub enum Side {
    East,
    West,
}

/// Monochromatic run lengths read outermost-first, with their suffix sums.
#[derive(Clone, PartialEq, Eq, Debug)]
pub struct RunLengthView {
    /// East run lengths `E(1), E(2), ...`, outermost first.
    pub east: Vec<u32>,
    /// West run lengths `W(1), W(2), ...`, outermost first.
    pub west: Vec<u32>,
    pub east_colors: Vec<Color>,
    pub west_colors: Vec<Color>,
    pub s_east: u32,
    pub s_west: u32,
}

#[derive(Clone, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct SiteColoring {
    /// Runs on `[1, S_E]`, innermost (site 1) first.
    east: VecDeque<Run>,
    /// Runs on `[-S_W, -1]`, innermost (site -1) first.
    west: VecDeque<Run>,
    s_east: u32,
    s_west: u32,
}

impl Default for SiteColoring {
    fn default() -> Self {
        Self::new()
    }
}

impl SiteColoring {
    pub fn new() -> Self {
        SiteColoring {
            east: VecDeque::new(),
            west: VecDeque::new(),
            s_east: 0,
            s_west: 0,
        }
    }

    /// Builds a coloring from explicit site lists; `east[i]` colors site
    /// `i + 1` and `west[i]` colors site `-(i + 1)`. Test convenience.
    pub fn from_sites(east: &[Color], west: &[Color]) -> Self {
        fn pack(sites: &[Color]) -> VecDeque<Run> {
            let mut runs: VecDeque<Run> = VecDeque::new();
            for &c in sites {
                match runs.back_mut() {
                    Some(r) if r.color == c => r.len += 1,
                    _ => runs.push_back(Run { color: c, len: 1 }),
                }
            }
            runs
        }
        SiteColoring {
            east: pack(east),
            west: pack(west),
            s_east: east.len() as u32,
            s_west: west.len() as u32,
        }
    }

    #[inline(always)]
    pub fn support_east(&self) -> u32 {
        self.s_east
    }

    #[inline(always)]
    pub fn support_west(&self) -> u32 {
        self.s_west
    }

    pub fn support(&self) -> u32 {
        self.s_east + self.s_west
    }

    /// Innermost run (length, color) on a side, if the side is colored.
    pub fn innermost(&self, side: Side) -> Option<(u32, Color)> {
        let runs = match side {
            Side::East => &self.east,
            Side::West => &self.west,
        };
        runs.front().map(|r| (r.len, r.color))
    }

    pub fn color_at(&self, site: i64) -> Option<Color> {
        let (runs, d) = if site > 0 {
            (&self.east, site as u64)
        } else if site < 0 {
            (&self.west, (-site) as u64)
        } else {
            return None;
        };
        let mut covered = 0u64;
        for r in runs {
            covered += u64::from(r.len);
            if d <= covered {
                return Some(r.color);
            }
        }
        None
    }

    /// Nearest stopping sites for a walker: the first site on each side that
    /// is uncolored or oppositely colored. The origin never stops a walker.
    #[inline]
    pub fn stopping_boundaries(&self, walker: Color) -> (i64, i64) {
        let east = match self.east.front() {
            Some(r) if r.color == walker => i64::from(r.len) + 1,
            _ => 1,
        };
        let west = match self.west.front() {
            Some(r) if r.color == walker => -(i64::from(r.len) + 1),
            _ => -1,
        };
        (west, east)
    }

    /// Applies a settle at `site` (which must be a stopping site for `color`)
    /// and reports whether it converted an existing site or explored a new one.
    pub fn apply_settle(&mut self, site: i64, color: Color) -> SettleKind {
        debug_assert!(site != 0);
        if site > 0 {
            Self::settle_side(&mut self.east, &mut self.s_east, site as u32, color)
        } else {
            Self::settle_side(&mut self.west, &mut self.s_west, (-site) as u32, color)
        }
    }

    fn settle_side(runs: &mut VecDeque<Run>, support: &mut u32, d: u32, color: Color) -> SettleKind {
        if d == *support + 1 {
            // Exploration just past the support; any existing outermost run is
            // of the walker's color (the walker traversed the whole side).
            match runs.back_mut() {
                Some(r) if r.color == color => r.len += 1,
                _ => runs.push_back(Run { color, len: 1 }),
            }
            *support += 1;
            return SettleKind::Exploration;
        }
        if d == 1 {
            // Conversion of the innermost site of an opposite-colored run.
            let front = runs.front_mut().expect("conversion inside colored region");
            debug_assert!(front.color != color);
            front.len -= 1;
            if front.len == 0 {
                runs.pop_front();
                // Two-color alternation: the run underneath is walker-colored.
                match runs.front_mut() {
                    Some(r) => r.len += 1,
                    None => runs.push_front(Run { color, len: 1 }),
                }
            } else {
                runs.push_front(Run { color, len: 1 });
            }
            return SettleKind::Conversion;
        }
        // Conversion just past the innermost run, which the walker traversed:
        // the first site of the second run flips.
        debug_assert_eq!(runs.front().map(|r| (r.color, r.len + 1)), Some((color, d)));
        runs.front_mut().unwrap().len += 1;
        let second = &mut runs[1];
        second.len -= 1;
        if second.len == 0 {
            runs.remove(1);
            if runs.len() > 1 {
                // Former third run has the walker's color: merge into front.
                let absorbed = runs.remove(1).unwrap();
                debug_assert_eq!(absorbed.color, color);
                runs.front_mut().unwrap().len += absorbed.len;
            }
        }
        SettleKind::Conversion
    }

    /// First `k` runs per side (fewer if fewer exist), outermost first.
    pub fn run_lengths(&self, k: usize) -> RunLengthView {
        fn take(runs: &VecDeque<Run>, k: usize) -> (Vec<u32>, Vec<Color>) {
            let lens = runs.iter().rev().take(k).map(|r| r.len).collect();
            let colors = runs.iter().rev().take(k).map(|r| r.color).collect();
            (lens, colors)
        }
        let (east, east_colors) = take(&self.east, k);
        let (west, west_colors) = take(&self.west, k);
        RunLengthView {
            east,
            west,
            east_colors,
            west_colors,
            s_east: self.s_east,
            s_west: self.s_west,
        }
    }

    pub fn run_count(&self, side: Side) -> usize {
        match side {
            Side::East => self.east.len(),
            Side::West => self.west.len(),
        }
    }

    /// All runs on a side, innermost first.
    pub fn runs(&self, side: Side) -> impl Iterator<Item = Run> + '_ {
        match side {
            Side::East => self.east.iter().copied(),
            Side::West => self.west.iter().copied(),
        }
    }

    /// True when each side is a single run (or empty) and, if both are
    /// nonempty, their colors differ.
    pub fn monochromatic_opposite(&self) -> bool {
        if self.east.len() > 1 || self.west.len() > 1 {
            return false;
        }
        match (self.east.front(), self.west.front()) {
            (Some(e), Some(w)) => e.color != w.color,
            _ => true,
        }
    }

    /// Σ x over blue sites minus Σ x over red sites (the site part of M).
    pub fn signed_position_sum(&self) -> i64 {
        fn side_sum(runs: &VecDeque<Run>) -> i64 {
            let mut start = 1i64;
            let mut total = 0i64;
            for r in runs {
                let len = i64::from(r.len);
                // sum of start .. start+len-1
                let block = (2 * start + len - 1) * len / 2;
                total += r.color.sign() * block;
                start += len;
            }
            total
        }
        side_sum(&self.east) - side_sum(&self.west)
    }

    pub fn count_color(&self, color: Color) -> u64 {
        self.east
            .iter()
            .chain(self.west.iter())
            .filter(|r| r.color == color)
            .map(|r| u64::from(r.len))
            .sum()
    }

    /// Structural well-formedness: adjacent runs alternate colors and the
    /// cached supports match the run lengths.
    pub fn check_structure(&self) -> Result<(), String> {
        for (side, runs, support) in [
            ("east", &self.east, self.s_east),
            ("west", &self.west, self.s_west),
        ] {
            let total: u32 = runs.iter().map(|r| r.len).sum();
            if total != support {
                return Err(format!("{side}: cached support {support} != run total {total}"));
            }
            for r in runs {
                if r.len == 0 {
                    return Err(format!("{side}: empty run"));
                }
            }
            for pair in runs.iter().zip(runs.iter().skip(1)) {
                if pair.0.color == pair.1.color {
                    return Err(format!("{side}: adjacent runs share a color"));
                }
            }
        }
        Ok(())
    }
}
