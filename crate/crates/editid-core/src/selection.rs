//! Five-slot layer selections: mapping picks, shift picks, and the
//! strategies that coerce pick lists of other lengths to five slots.
//!
//! Selection strings use the table notation `[4,8,-,-,-]` (brackets
//! optional), `-` marking a zeroed slot.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Slot count is fixed at five; this is the core cardinality constraint.
pub const SLOT_COUNT: usize = 5;

/// The encoder layers the mapping networks were tuned against, slot by slot.
pub const ORIGINAL_MAPPING_LAYERS: [usize; SLOT_COUNT] = [4, 8, 12, 16, 20];

/// The shipped default pick combination.
pub const DEFAULT_PICKS: [usize; SLOT_COUNT] = [4, 14, 16, 18, 20];

#[derive(Debug, Error, PartialEq)]
pub enum SelectionError {
    #[error("pick list is empty")]
    EmptyPicks,
    #[error("layer indices are 1-based; got 0")]
    ZeroIndex,
    #[error("{count} picks require a shift strategy")]
    StrategyRequired { count: usize },
    #[error("strategy {strategy} does not apply to {count} picks")]
    StrategyMismatch {
        strategy: ShiftStrategy,
        count: usize,
    },
    #[error("strategy given for an exact 5-pick list")]
    StrategyUnexpected,
    #[error("selection string must have 5 slots, got {0}")]
    BadSlotCount(usize),
    #[error("cannot parse slot entry '{0}'")]
    BadSlotEntry(String),
}

/// How a raw pick list whose length is not five becomes five slots.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ShiftStrategy {
    /// Fewer than five picks: missing slots are zero.
    Padding,
    /// Fewer than five picks: missing slots interpolate in layer-index space.
    Interpolate,
    /// More than five picks: contiguous group means.
    Average,
    /// More than five picks: contiguous group elementwise max.
    Max,
}

impl fmt::Display for ShiftStrategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ShiftStrategy::Padding => "padding",
            ShiftStrategy::Interpolate => "interpolate",
            ShiftStrategy::Average => "average",
            ShiftStrategy::Max => "max",
        };
        f.write_str(s)
    }
}

impl FromStr for ShiftStrategy {
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "padding" => Ok(ShiftStrategy::Padding),
            "interpolate" => Ok(ShiftStrategy::Interpolate),
            "average" => Ok(ShiftStrategy::Average),
            "max" => Ok(ShiftStrategy::Max),
            other => Err(SelectionError::BadSlotEntry(other.to_string())),
        }
    }
}

/// One slot of a selection.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotPick {
    /// A 1-based encoder layer index.
    Layer(usize),
    /// Explicitly zeroed.
    Zero,
    /// Filled later by a shift strategy (interpolate/average/max).
    Synthesized,
}

/// An ordered five-slot pick list partitioned into mapping and shift sets.
///
/// A slot belongs to the mapping set when it carries the layer its mapping
/// network was tuned against ([`ORIGINAL_MAPPING_LAYERS`]); every other
/// non-zero slot is a shift.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LayerSelection {
    slots: [SlotPick; SLOT_COUNT],
    map_slots: Vec<usize>,
    shift_slots: Vec<usize>,
}

impl LayerSelection {
    pub fn from_slots(slots: [SlotPick; SLOT_COUNT]) -> Result<Self, SelectionError> {
        let mut map_slots = Vec::new();
        let mut shift_slots = Vec::new();
        for (i, slot) in slots.iter().enumerate() {
            match slot {
                SlotPick::Layer(0) => return Err(SelectionError::ZeroIndex),
                SlotPick::Layer(l) if *l == ORIGINAL_MAPPING_LAYERS[i] => map_slots.push(i),
                SlotPick::Layer(_) | SlotPick::Synthesized => shift_slots.push(i),
                SlotPick::Zero => {}
            }
        }
        Ok(Self {
            slots,
            map_slots,
            shift_slots,
        })
    }

    pub fn slots(&self) -> &[SlotPick; SLOT_COUNT] {
        &self.slots
    }

    /// Slot positions carrying original mapping features (L_map).
    pub fn map_slots(&self) -> &[usize] {
        &self.map_slots
    }

    /// Slot positions carrying shift or synthesized features (L_shift).
    pub fn shift_slots(&self) -> &[usize] {
        &self.shift_slots
    }

    pub fn default_selection() -> Self {
        build_selection(&DEFAULT_PICKS, None).expect("default picks are valid")
    }
}

impl fmt::Display for LayerSelection {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self
            .slots
            .iter()
            .map(|s| match s {
                SlotPick::Layer(l) => l.to_string(),
                SlotPick::Zero => "-".to_string(),
                SlotPick::Synthesized => "*".to_string(),
            })
            .collect();
        write!(f, "[{}]", parts.join(","))
    }
}

impl FromStr for LayerSelection {
    /// Parses the table notation: `[4,8,-,-,-]` or `4,14,16,18,20`.
    type Err = SelectionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let trimmed = s.trim().trim_start_matches('[').trim_end_matches(']');
        let entries: Vec<&str> = trimmed.split(',').map(str::trim).collect();
        if entries.len() != SLOT_COUNT {
            return Err(SelectionError::BadSlotCount(entries.len()));
        }
        let mut slots = [SlotPick::Zero; SLOT_COUNT];
        for (i, entry) in entries.iter().enumerate() {
            slots[i] = if *entry == "-" {
                SlotPick::Zero
            } else {
                let layer: usize = entry
                    .parse()
                    .map_err(|_| SelectionError::BadSlotEntry(entry.to_string()))?;
                if layer == 0 {
                    // 0 is an accepted alias for a zeroed slot
                    SlotPick::Zero
                } else {
                    SlotPick::Layer(layer)
                }
            };
        }
        Self::from_slots(slots)
    }
}

/// The fractional layer indices a strategy materializes: five evenly spaced
/// points over the picks' index range.
pub fn interpolation_grid(picks: &[usize]) -> [f64; SLOT_COUNT] {
    let min = *picks.iter().min().expect("picks nonempty") as f64;
    let max = *picks.iter().max().expect("picks nonempty") as f64;
    let mut grid = [0.0; SLOT_COUNT];
    for (i, g) in grid.iter_mut().enumerate() {
        *g = min + (max - min) * i as f64 / (SLOT_COUNT - 1) as f64;
    }
    grid
}

/// Build a five-slot selection from a raw pick list, applying the strategy
/// when the list is not exactly five long (Eq-9 style cardinality).
pub fn build_selection(
    raw_picks: &[usize],
    strategy: Option<ShiftStrategy>,
) -> Result<LayerSelection, SelectionError> {
    if raw_picks.is_empty() {
        return Err(SelectionError::EmptyPicks);
    }
    if raw_picks.contains(&0) {
        return Err(SelectionError::ZeroIndex);
    }
    let count = raw_picks.len();
    match (count.cmp(&SLOT_COUNT), strategy) {
        (std::cmp::Ordering::Equal, None) => {
            let mut slots = [SlotPick::Zero; SLOT_COUNT];
            for (i, &p) in raw_picks.iter().enumerate() {
                slots[i] = SlotPick::Layer(p);
            }
            LayerSelection::from_slots(slots)
        }
        (std::cmp::Ordering::Equal, Some(_)) => Err(SelectionError::StrategyUnexpected),
        (_, None) => Err(SelectionError::StrategyRequired { count }),
        (std::cmp::Ordering::Less, Some(ShiftStrategy::Padding)) => {
            let mut slots = [SlotPick::Zero; SLOT_COUNT];
            for (i, &p) in raw_picks.iter().enumerate() {
                slots[i] = SlotPick::Layer(p);
            }
            LayerSelection::from_slots(slots)
        }
        (std::cmp::Ordering::Less, Some(ShiftStrategy::Interpolate)) => {
            let grid = interpolation_grid(raw_picks);
            let mut slots = [SlotPick::Synthesized; SLOT_COUNT];
            for (i, &g) in grid.iter().enumerate() {
                let rounded = g.round();
                if (g - rounded).abs() < 1e-9 && raw_picks.contains(&(rounded as usize)) {
                    slots[i] = SlotPick::Layer(rounded as usize);
                }
            }
            LayerSelection::from_slots(slots)
        }
        (std::cmp::Ordering::Greater, Some(s @ (ShiftStrategy::Average | ShiftStrategy::Max))) => {
            let _ = s;
            LayerSelection::from_slots([SlotPick::Synthesized; SLOT_COUNT])
        }
        (_, Some(strategy)) => Err(SelectionError::StrategyMismatch { strategy, count }),
    }
}

/// Contiguous near-equal partition of `n` items into [`SLOT_COUNT`] groups:
/// group `i` covers indices `[i*n/5, (i+1)*n/5)`.
pub fn contiguous_groups(n: usize) -> [(usize, usize); SLOT_COUNT] {
    let mut out = [(0, 0); SLOT_COUNT];
    for (i, slot) in out.iter_mut().enumerate() {
        *slot = (i * n / SLOT_COUNT, (i + 1) * n / SLOT_COUNT);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shipped_default_passes_through() {
        let sel = build_selection(&[4, 14, 16, 18, 20], None).unwrap();
        assert_eq!(sel.to_string(), "[4,14,16,18,20]");
        // slots 1 (layer 4) and 5 (layer 20) sit at their tuned positions
        assert_eq!(sel.map_slots(), &[0, 4]);
        assert_eq!(sel.shift_slots(), &[1, 2, 3]);
    }

    #[test]
    fn padding_fills_zero_slots() {
        let sel = build_selection(&[4, 8], Some(ShiftStrategy::Padding)).unwrap();
        assert_eq!(sel.to_string(), "[4,8,-,-,-]");
        assert_eq!(sel.map_slots(), &[0, 1]);
        assert!(sel.shift_slots().is_empty());
    }

    #[test]
    fn missing_strategy_is_an_error() {
        assert_eq!(
            build_selection(&[4, 8, 12], None).unwrap_err(),
            SelectionError::StrategyRequired { count: 3 }
        );
    }

    #[test]
    fn strategy_length_mismatches_rejected() {
        assert!(matches!(
            build_selection(&[1, 2, 3, 4, 5, 6], Some(ShiftStrategy::Padding)),
            Err(SelectionError::StrategyMismatch { .. })
        ));
        assert!(matches!(
            build_selection(&[1, 2], Some(ShiftStrategy::Average)),
            Err(SelectionError::StrategyMismatch { .. })
        ));
        assert!(matches!(
            build_selection(&[1, 2, 3, 4, 5], Some(ShiftStrategy::Padding)),
            Err(SelectionError::StrategyUnexpected)
        ));
    }

    #[test]
    fn interpolate_marks_synthesized_slots() {
        let sel = build_selection(&[4, 8], Some(ShiftStrategy::Interpolate)).unwrap();
        assert_eq!(
            sel.slots(),
            &[
                SlotPick::Layer(4),
                SlotPick::Synthesized,
                SlotPick::Synthesized,
                SlotPick::Synthesized,
                SlotPick::Layer(8),
            ]
        );
    }

    #[test]
    fn oversized_lists_collapse_to_synthesized() {
        let sel = build_selection(&[2, 4, 6, 8, 10, 12], Some(ShiftStrategy::Max)).unwrap();
        assert!(sel.slots().iter().all(|s| *s == SlotPick::Synthesized));
    }

    #[test]
    fn parse_table_notation() {
        let sel: LayerSelection = "[4,16,16,18,20]".parse().unwrap();
        assert_eq!(sel.slots()[1], SlotPick::Layer(16));
        assert_eq!(sel.slots()[2], SlotPick::Layer(16));
        let padded: LayerSelection = "4,-,-,-,-".parse().unwrap();
        assert_eq!(padded.slots()[1], SlotPick::Zero);
        assert!("4,8".parse::<LayerSelection>().is_err());
        assert!("a,b,c,d,e".parse::<LayerSelection>().is_err());
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(500))]
        #[test]
        fn five_slot_cardinality_holds_for_all_accepted_inputs(
            picks in proptest::collection::vec(1usize..=23, 1..=9),
            strategy_idx in 0usize..5,
        ) {
            let strategy = [
                None,
                Some(ShiftStrategy::Padding),
                Some(ShiftStrategy::Interpolate),
                Some(ShiftStrategy::Average),
                Some(ShiftStrategy::Max),
            ][strategy_idx];
            let compatible = match (picks.len().cmp(&SLOT_COUNT), strategy) {
                (std::cmp::Ordering::Equal, None) => true,
                (std::cmp::Ordering::Less,
                    Some(ShiftStrategy::Padding | ShiftStrategy::Interpolate)) => true,
                (std::cmp::Ordering::Greater,
                    Some(ShiftStrategy::Average | ShiftStrategy::Max)) => true,
                _ => false,
            };
            match build_selection(&picks, strategy) {
                Ok(sel) => {
                    proptest::prop_assert!(compatible);
                    proptest::prop_assert_eq!(sel.slots().len(), SLOT_COUNT);
                    let zero_count = sel
                        .slots()
                        .iter()
                        .filter(|s| matches!(s, SlotPick::Zero))
                        .count();
                    proptest::prop_assert_eq!(
                        sel.map_slots().len() + sel.shift_slots().len() + zero_count,
                        SLOT_COUNT
                    );
                }
                Err(_) => proptest::prop_assert!(!compatible),
            }
        }
    }

    #[test]
    fn groups_are_contiguous_and_cover() {
        for n in 6..=9 {
            let groups = contiguous_groups(n);
            assert_eq!(groups[0].0, 0);
            assert_eq!(groups[SLOT_COUNT - 1].1, n);
            for w in groups.windows(2) {
                assert_eq!(w[0].1, w[1].0);
                assert!(w[0].1 > w[0].0);
            }
        }
    }
}
