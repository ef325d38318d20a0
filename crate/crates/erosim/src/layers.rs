//! Online maintenance of the layer decomposition.
//!
//! The configuration can be read as layers deposited one on top of another:
//! the outermost layer is the matched pair of maximal monochromatic stretches
//! laid down up to the last step at which each side was a single run, the next
//! layer is what grew on top of it, and so on. Layer lengths are exactly the
//! modified run lengths: the plain run lengths with zero-length entries
//! allowed on one side.
//!
//! The stack is updated in O(1) per settle instead of being recomputed from
//! history; a slow replaying oracle in the tests checks the two agree.

use crate::coloring::{Color, Side, SiteColoring};
use serde::{Deserialize, Serialize};

/// One layer: east and west modified run lengths plus the east color.
/// The west half of a layer always has the opposite color.
#[derive(Clone, Copy, PartialEq, Eq, Debug, Serialize, Deserialize)]
pub struct Layer {
    pub east: u32,
    pub west: u32,
    pub east_color: Color,
}

impl Layer {
    pub fn len(self, side: Side) -> u32 {
        match side {
            Side::East => self.east,
            Side::West => self.west,
        }
    }

    pub fn color(self, side: Side) -> Color {
        match side {
            Side::East => self.east_color,
            Side::West => self.east_color.opposite(),
        }
    }

    fn len_mut(&mut self, side: Side) -> &mut u32 {
        match side {
            Side::East => &mut self.east,
            Side::West => &mut self.west,
        }
    }
}

/// Layers outermost-first. Index `j` holds the modified run lengths
/// `E_m(j+1), W_m(j+1)`.
#[derive(Clone, PartialEq, Eq, Debug, Default, Serialize, Deserialize)]
pub struct LayerStack {
    layers: Vec<Layer>,
}

impl LayerStack {
    pub fn new() -> Self {
        LayerStack { layers: Vec::new() }
    }

    pub fn layers(&self) -> &[Layer] {
        &self.layers
    }

    pub fn is_empty(&self) -> bool {
        self.layers.is_empty()
    }

    /// Innermost layer, if any.
    pub fn innermost(&self) -> Option<Layer> {
        self.layers.last().copied()
    }

    /// An exploration means the walker traversed a monochromatic side and both
    /// sides collapse into a single layer covering the whole support.
    pub fn record_exploration(&mut self, side: Side, walker: Color, s_east: u32, s_west: u32) {
        let east_color = match side {
            Side::East => walker,
            Side::West => walker.opposite(),
        };
        self.layers.clear();
        self.layers.push(Layer {
            east: s_east,
            west: s_west,
            east_color,
        });
    }

    /// A conversion moves one unit of length on `side` from the innermost
    /// opposite-colored layer to the walker-colored layer directly beneath it
    /// (created on demand). Layers emptied on both sides are removed and their
    /// neighbors, which then share colors, merge.
    pub fn record_conversion(&mut self, side: Side, walker: Color) {
        let innermost = self
            .layers
            .iter()
            .rposition(|l| l.len(side) > 0)
            .expect("conversion on a side with colored sites");
        let victim;
        let gainer;
        if self.layers[innermost].color(side) == walker {
            // The walker ate through its own innermost run into the layer
            // outward of it.
            gainer = innermost;
            victim = innermost - 1;
        } else {
            victim = innermost;
            gainer = innermost + 1;
            if gainer == self.layers.len() {
                let east_color = match side {
                    Side::East => walker,
                    Side::West => walker.opposite(),
                };
                self.layers.push(Layer {
                    east: 0,
                    west: 0,
                    east_color,
                });
            }
        }
        debug_assert_eq!(self.layers[gainer].color(side), walker);
        debug_assert!(self.layers[victim].len(side) > 0);
        debug_assert!(self.layers[victim].color(side) != walker);
        *self.layers[gainer].len_mut(side) += 1;
        *self.layers[victim].len_mut(side) -= 1;
        if self.layers[victim].east == 0 && self.layers[victim].west == 0 {
            self.layers.remove(victim);
            if victim > 0 && victim < self.layers.len() {
                // The two layers around the removed one alternate back to the
                // same color pair; fold the inner into the outer.
                let inner = self.layers.remove(victim);
                debug_assert_eq!(inner.east_color, self.layers[victim - 1].east_color);
                self.layers[victim - 1].east += inner.east;
                self.layers[victim - 1].west += inner.west;
            }
        }
    }

    /// Cumulative layer length `L(j)` (1-based) on a side: the modified run
    /// lengths summed from layer `j` inward. `L(1)` is the full support.
    pub fn cumulative(&self, side: Side, j: usize) -> u64 {
        self.layers
            .iter()
            .skip(j - 1)
            .map(|l| u64::from(l.len(side)))
            .sum()
    }

    /// Largest |E_m(j) - W_m(j)| over the stack.
    pub fn max_side_difference(&self) -> u32 {
        self.layers
            .iter()
            .map(|l| l.east.abs_diff(l.west))
            .max()
            .unwrap_or(0)
    }

    /// Full invariant check against the configuration the stack shadows.
    pub fn validate(&self, coloring: &SiteColoring) -> Result<(), String> {
        for (j, pair) in self.layers.iter().zip(self.layers.iter().skip(1)).enumerate() {
            if pair.0.east_color == pair.1.east_color {
                return Err(format!("layers {} and {} share a color", j + 1, j + 2));
            }
        }
        for (j, l) in self.layers.iter().enumerate() {
            if l.east == 0 && l.west == 0 {
                return Err(format!("layer {} empty on both sides", j + 1));
            }
            if l.east.abs_diff(l.west) > 2 {
                return Err(format!(
                    "layer {}: |E_m - W_m| = {} > 2",
                    j + 1,
                    l.east.abs_diff(l.west)
                ));
            }
        }
        for j in 1..=self.layers.len() {
            let le = self.cumulative(Side::East, j);
            let lw = self.cumulative(Side::West, j);
            if le.abs_diff(lw) > 1 {
                return Err(format!("cumulative layers at {j}: |L_E - L_W| = {}", le.abs_diff(lw)));
            }
        }
        // The modified runs refine the plain runs: when a layer is eaten down
        // to zero on one side only, the same-colored layers around it stay
        // distinct in the stack but are spatially adjacent, so merging
        // consecutive same-color nonzero entries must recover the plain runs
        // exactly, in order and with matching colors.
        for side in [Side::East, Side::West] {
            let mut from_stack: Vec<(u32, Color)> = Vec::new();
            for l in self.layers.iter().filter(|l| l.len(side) > 0) {
                match from_stack.last_mut() {
                    Some((len, c)) if *c == l.color(side) => *len += l.len(side),
                    _ => from_stack.push((l.len(side), l.color(side))),
                }
            }
            let view = coloring.run_lengths(usize::MAX);
            let (lens, colors) = match side {
                Side::East => (&view.east, &view.east_colors),
                Side::West => (&view.west, &view.west_colors),
            };
            let plain: Vec<(u32, Color)> =
                lens.iter().copied().zip(colors.iter().copied()).collect();
            if from_stack != plain {
                return Err(format!(
                    "{side:?}: modified runs {from_stack:?} != plain runs {plain:?}"
                ));
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::coloring::Color::{Blue, Red};
    use crate::state::{ErosionState, StateOptions};

    #[test]
    fn exploration_extends_to_single_layer() {
        let mut stack = LayerStack::new();
        stack.record_exploration(Side::East, Blue, 3, 3);
        // a further exploration east keeps one layer, now longer
        stack.record_exploration(Side::East, Blue, 4, 3);
        assert_eq!(
            stack.layers(),
            &[Layer {
                east: 4,
                west: 3,
                east_color: Blue
            }]
        );
    }

    #[test]
    fn first_overwrite_starts_second_layer() {
        let mut stack = LayerStack::new();
        stack.record_exploration(Side::East, Blue, 2, 2);
        stack.record_conversion(Side::East, Red);
        assert_eq!(
            stack.layers(),
            &[
                Layer {
                    east: 1,
                    west: 2,
                    east_color: Blue
                },
                Layer {
                    east: 1,
                    west: 0,
                    east_color: Red
                }
            ]
        );
    }

    #[test]
    fn layer_eaten_through_merges_back_to_one() {
        // Hand-traced: blue layer (2,2), then red converts east twice and west
        // twice; layer 1 is gone and the stack is a single red-east layer.
        let mut stack = LayerStack::new();
        stack.record_exploration(Side::East, Blue, 2, 2);
        stack.record_conversion(Side::East, Red);
        stack.record_conversion(Side::West, Blue);
        stack.record_conversion(Side::East, Red);
        stack.record_conversion(Side::West, Blue);
        assert_eq!(
            stack.layers(),
            &[Layer {
                east: 2,
                west: 2,
                east_color: Red
            }]
        );
    }

    /// Replays a settle history and computes the layer stack directly from its
    /// recursive definition. The first layer is the configuration at the last
    /// step when each side was at most one run and the sides (where present)
    /// were oppositely colored; the settles after that step are an independent
    /// copy of the process growing on top of the first layer, and its stack
    /// gives the inner layers. The first layer's own lengths are whatever the
    /// inner layers have not claimed, so a layer partly eaten from inside
    /// shrinks and a fully eaten one disappears.
    ///
    /// The opposite-color requirement on the base step matters: a state like
    /// east = [B], west = [B] has one run per side, but those runs belong to
    /// different layers and only the history says which is the older one.
    fn oracle_stack(history: &[(i64, Color)]) -> Vec<Layer> {
        if history.is_empty() {
            return Vec::new();
        }
        let mut configs = Vec::with_capacity(history.len());
        let mut c = SiteColoring::new();
        for &(site, color) in history {
            c.apply_settle(site, color);
            configs.push(c.clone());
        }
        let m1 = (1..=configs.len())
            .rev()
            .find(|&k| {
                let cfg = &configs[k - 1];
                cfg.run_count(Side::East) <= 1
                    && cfg.run_count(Side::West) <= 1
                    && match (cfg.innermost(Side::East), cfg.innermost(Side::West)) {
                        (Some((_, ce)), Some((_, cw))) => ce != cw,
                        _ => true,
                    }
            })
            .expect("the first settle is a valid single-run state");
        let cfg = &configs[m1 - 1];
        let east_color = match (cfg.innermost(Side::East), cfg.innermost(Side::West)) {
            (Some((_, c)), _) => c,
            (None, Some((_, c))) => c.opposite(),
            (None, None) => unreachable!("some side is colored after a settle"),
        };
        let inner = oracle_stack(&history[m1..]);
        let inner_se: u32 = inner.iter().map(|l| l.east).sum();
        let inner_sw: u32 = inner.iter().map(|l| l.west).sum();
        let mut stack = vec![Layer {
            east: cfg.support_east() - inner_se,
            west: cfg.support_west() - inner_sw,
            east_color,
        }];
        stack.extend(inner);
        // A layer fully eaten from inside disappears, and the layers around
        // it, which then share colors, merge into one.
        let mut out: Vec<Layer> = Vec::new();
        for l in stack {
            if l.east == 0 && l.west == 0 {
                continue;
            }
            match out.last_mut() {
                Some(p) if p.east_color == l.east_color => {
                    p.east += l.east;
                    p.west += l.west;
                }
                _ => out.push(l),
            }
        }
        out
    }

    #[test]
    fn online_stack_matches_replay_oracle() {
        for seed in 0..25u64 {
            let mut state = ErosionState::with_options(
                seed,
                StateOptions {
                    layers: true,
                    ..StateOptions::default()
                },
            );
            let mut history: Vec<(i64, Color)> = Vec::new();
            for n in 1..=250u64 {
                let before = history.len();
                while history.len() == before {
                    use crate::state::MicrostepEvent as E;
                    let color = state.active().color;
                    match state.microstep().unwrap() {
                        E::Moved(_) => {}
                        E::SettledConversion(s) | E::SettledExploration(s) => {
                            history.push((s, color))
                        }
                        E::Emitted(_) => unreachable!(),
                    }
                }
                let expected = oracle_stack(&history);
                assert_eq!(
                    state.layer_stack().unwrap().layers(),
                    expected.as_slice(),
                    "seed {seed}, particle {n}"
                );
                state
                    .layer_stack()
                    .unwrap()
                    .validate(state.coloring())
                    .unwrap();
            }
        }
    }
}
