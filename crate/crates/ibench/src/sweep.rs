//! Ablation sweeps: one full run per layer-selection or fusion/reweight
//! variant, sharing seeds so rows are directly comparable.

use std::path::PathBuf;

use anyhow::{Context, Result};

use editid_core::selection::LayerSelection;

use crate::config::{Config, FusionSection, ReweightSection};
use crate::report::{write_sweep_renderings, AggregateRow};
use crate::runner::{run_with_suite, RunOutput};
use crate::suite::Suite;

/// A finished sweep: one aggregate row per variant plus notices.
#[derive(Debug)]
pub struct SweepOutput {
    pub rows: Vec<AggregateRow>,
    pub baseline: AggregateRow,
    pub notices: Vec<String>,
    pub sweep_dir: PathBuf,
}

fn run_variant(config: &Config, suite: &Suite, label: &str) -> Result<AggregateRow> {
    let output: RunOutput = run_with_suite(config, suite)
        .with_context(|| format!("sweep variant '{label}' failed"))?;
    Ok(AggregateRow::from_report(label, &output.report))
}

/// Run the config once per selection string. Duplicates are dropped with a
/// notice; all variants share the global seed. The baseline row (for the
/// tradeoff curve) is the config's own unmodified selection.
pub fn sweep_selections(config: &Config, selections: &[String]) -> Result<SweepOutput> {
    anyhow::ensure!(!selections.is_empty(), "selection list is empty");
    let suite = Suite::toy(config)?;

    let mut notices = Vec::new();
    let mut seen = Vec::new();
    let mut parsed: Vec<LayerSelection> = Vec::new();
    for raw in selections {
        let selection: LayerSelection = raw
            .parse()
            .map_err(|e| anyhow::anyhow!("selection '{raw}': {e}"))?;
        let canonical = selection.to_string();
        if seen.contains(&canonical) {
            notices.push(format!("duplicate selection {canonical} dropped"));
            continue;
        }
        seen.push(canonical);
        parsed.push(selection);
    }

    let baseline = run_variant(config, &suite, "baseline")?;

    let mut rows = Vec::with_capacity(parsed.len());
    for selection in &parsed {
        let canonical = selection.to_string();
        let mut variant = config.clone();
        variant.feature_branch.selection = Some(canonical.clone());
        rows.push(run_variant(&variant, &suite, &canonical)?);
    }

    let sweep_dir = config.output_dir.join("sweeps").join("selections");
    write_sweep_renderings(&sweep_dir, &rows, &baseline)?;
    Ok(SweepOutput {
        rows,
        baseline,
        notices,
        sweep_dir,
    })
}

/// One fusion/reweight combination to sweep.
#[derive(Debug, Clone)]
pub struct FusionCombo {
    pub fusion: FusionSection,
    pub reweight: ReweightSection,
}

impl FusionCombo {
    pub fn label(&self) -> String {
        format!("{}+{}", self.fusion.kind, self.reweight.kind)
    }
}

/// The six standard fusion methods over the default reweight.
pub fn default_fusion_combos() -> Vec<FusionCombo> {
    let reweight = ReweightSection::default();
    [
        FusionSection {
            kind: "weight".into(),
            w1: Some(0.5),
            w2: Some(0.5),
            ..FusionSection::default()
        },
        FusionSection {
            kind: "dropout".into(),
            drop_rate: Some(0.1),
            ..FusionSection::default()
        },
        FusionSection {
            kind: "concat".into(),
            ..FusionSection::default()
        },
        FusionSection {
            kind: "sum".into(),
            ..FusionSection::default()
        },
        FusionSection {
            kind: "multiply".into(),
            ..FusionSection::default()
        },
        FusionSection {
            kind: "max".into(),
            ..FusionSection::default()
        },
    ]
    .into_iter()
    .map(|fusion| FusionCombo {
        fusion,
        reweight: reweight.clone(),
    })
    .collect()
}

/// Run the config once per fusion/reweight combination.
pub fn sweep_fusion(config: &Config, combos: &[FusionCombo]) -> Result<SweepOutput> {
    anyhow::ensure!(!combos.is_empty(), "fusion combo list is empty");
    let suite = Suite::toy(config)?;
    // invalid combos (e.g. weight without weights) fail before any run
    for combo in combos {
        combo
            .fusion
            .method()
            .map_err(|e| anyhow::anyhow!("combo '{}': {e}", combo.label()))?;
    }
    let baseline = run_variant(config, &suite, "baseline")?;
    let mut rows = Vec::with_capacity(combos.len());
    for combo in combos {
        let mut variant = config.clone();
        variant.integration.fusion = combo.fusion.clone();
        variant.integration.reweight = combo.reweight.clone();
        rows.push(run_variant(&variant, &suite, &combo.label())?);
    }
    let sweep_dir = config.output_dir.join("sweeps").join("fusion");
    write_sweep_renderings(&sweep_dir, &rows, &baseline)?;
    Ok(SweepOutput {
        rows,
        baseline,
        notices: Vec::new(),
        sweep_dir,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn selection_strings_canonicalize() {
        // zero may appear at any slot position as an alias for "-"
        let sel: LayerSelection = "[0,12,-,-,-]".parse().unwrap();
        assert_eq!(sel.to_string(), "[-,12,-,-,-]");
        let full: LayerSelection = "[4,14,16,18,20]".parse().unwrap();
        assert_eq!(full.to_string(), "[4,14,16,18,20]");
    }

    #[test]
    fn default_combos_cover_all_six_methods() {
        let combos = default_fusion_combos();
        assert_eq!(combos.len(), 6);
        let kinds: Vec<&str> = combos.iter().map(|c| c.fusion.kind.as_str()).collect();
        assert_eq!(kinds, ["weight", "dropout", "concat", "sum", "multiply", "max"]);
        for combo in &combos {
            combo.fusion.method().unwrap();
        }
    }
}
