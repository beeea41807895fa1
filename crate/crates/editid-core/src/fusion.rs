//! Feature fusion: shift-strategy materialization, the three-layer ID
//! embedding network, the five per-slot mapping networks, and the
//! single-query attention that produces the edit feature.
//!
//! The toy networks are seeded affine stacks with SiLU gating between
//! layers; real adapters may substitute their own weights behind the same
//! shapes.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::EmbeddingVector;
use crate::extract::{
    select_slots, ExtractError, GlobalFeature, LayerFeatureSet, LocalFeatureStack, Slot,
    SlotProvenance,
};
use crate::rng;
use crate::selection::{
    build_selection, contiguous_groups, interpolation_grid, LayerSelection, SelectionError,
    ShiftStrategy, SLOT_COUNT,
};

#[derive(Debug, Error)]
pub enum FusionError {
    #[error("selection does not match (raw_picks, strategy): {0}")]
    SelectionMismatch(String),
    #[error(transparent)]
    Selection(#[from] SelectionError),
    #[error(transparent)]
    Extract(#[from] ExtractError),
    #[error("input dim {found} does not match network input {expected}")]
    DimMismatch { expected: usize, found: usize },
    #[error("non-finite value in fusion attention")]
    NonFinite,
}

/// The fused ID embedding (theta_ID output).
#[derive(Debug, Clone, PartialEq)]
pub struct IdEmbedding(pub EmbeddingVector);

/// Five slot-aligned mapped features, one per mapping network.
#[derive(Debug, Clone, PartialEq)]
pub struct MappedStack {
    rows: [Vec<f64>; SLOT_COUNT],
}

impl MappedStack {
    pub fn new(rows: [Vec<f64>; SLOT_COUNT]) -> Self {
        Self { rows }
    }

    pub fn rows(&self) -> &[Vec<f64>; SLOT_COUNT] {
        &self.rows
    }

    pub fn dim(&self) -> usize {
        self.rows[0].len()
    }
}

/// The fused, editability-carrying ID feature.
#[derive(Debug, Clone, PartialEq)]
pub struct EditFeature(pub EmbeddingVector);

/// Seeds and widths for the ID embedding network and the five mapping
/// networks (all three affine layers with SiLU gates between 1-2 and 2-3).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionNetworkSpec {
    /// d_g, the global concat dimension.
    pub global_dim: usize,
    /// d_l, the per-layer local feature dimension.
    pub local_dim: usize,
    pub hidden_dim: usize,
    /// d_id, the output dimension of every network.
    pub id_dim: usize,
    pub seed: u64,
}

impl Default for FusionNetworkSpec {
    fn default() -> Self {
        Self {
            global_dim: 32,
            local_dim: 16,
            hidden_dim: 32,
            id_dim: 32,
            seed: 0,
        }
    }
}

fn silu(x: f64) -> f64 {
    x / (1.0 + (-x).exp())
}

/// One affine layer: row-major `out_dim x in_dim` weights plus bias.
#[derive(Debug, Clone)]
pub struct AffineLayer {
    pub weights: Vec<f64>,
    pub bias: Vec<f64>,
    pub in_dim: usize,
    pub out_dim: usize,
}

impl AffineLayer {
    fn seeded(seed: u64, in_dim: usize, out_dim: usize) -> Self {
        let scale = 1.0 / (in_dim as f64).sqrt();
        let weights = rng::gaussian_matrix(rng::mix(seed, "w"), out_dim, in_dim)
            .into_iter()
            .map(|v| v * scale)
            .collect();
        let bias = rng::gaussian_vector(rng::mix(seed, "b"), out_dim)
            .into_iter()
            .map(|v| v * 0.1)
            .collect();
        Self {
            weights,
            bias,
            in_dim,
            out_dim,
        }
    }

    pub fn forward(&self, x: &[f64]) -> Vec<f64> {
        (0..self.out_dim)
            .map(|r| {
                self.bias[r]
                    + (0..self.in_dim)
                        .map(|c| self.weights[r * self.in_dim + c] * x[c])
                        .sum::<f64>()
            })
            .collect()
    }
}

/// Three affine layers with SiLU between 1-2 and 2-3.
#[derive(Debug, Clone)]
pub struct AffineNetwork {
    pub layers: [AffineLayer; 3],
}

impl AffineNetwork {
    fn seeded(seed: u64, in_dim: usize, hidden: usize, out_dim: usize) -> Self {
        Self {
            layers: [
                AffineLayer::seeded(rng::mix_index(seed, "layer", 0), in_dim, hidden),
                AffineLayer::seeded(rng::mix_index(seed, "layer", 1), hidden, hidden),
                AffineLayer::seeded(rng::mix_index(seed, "layer", 2), hidden, out_dim),
            ],
        }
    }

    pub fn in_dim(&self) -> usize {
        self.layers[0].in_dim
    }

    pub fn forward(&self, x: &[f64]) -> Result<Vec<f64>, FusionError> {
        if x.len() != self.in_dim() {
            return Err(FusionError::DimMismatch {
                expected: self.in_dim(),
                found: x.len(),
            });
        }
        let h1: Vec<f64> = self.layers[0].forward(x).into_iter().map(silu).collect();
        let h2: Vec<f64> = self.layers[1].forward(&h1).into_iter().map(silu).collect();
        Ok(self.layers[2].forward(&h2))
    }
}

/// The ID embedding network theta_ID for a spec.
pub fn id_network(spec: &FusionNetworkSpec) -> AffineNetwork {
    AffineNetwork::seeded(
        rng::mix(spec.seed, "id-net"),
        spec.global_dim,
        spec.hidden_dim,
        spec.id_dim,
    )
}

/// The slot-indexed mapping network (0-based slot).
pub fn mapping_network(spec: &FusionNetworkSpec, slot: usize) -> AffineNetwork {
    AffineNetwork::seeded(
        rng::mix_index(spec.seed, "map-net", slot),
        spec.local_dim,
        spec.hidden_dim,
        spec.id_dim,
    )
}

fn lerp(a: &[f64], b: &[f64], t: f64) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| (1.0 - t) * x + t * y).collect()
}

/// Materialize a five-slot stack from a selection, filling synthesized slots
/// per the strategy: interpolation in layer-index space for short lists,
/// contiguous group mean/max for long ones.
pub fn materialize_slots(
    layers: &LayerFeatureSet,
    selection: &LayerSelection,
    strategy: Option<ShiftStrategy>,
    raw_picks: &[usize],
) -> Result<LocalFeatureStack, FusionError> {
    let rebuilt = build_selection(raw_picks, strategy)?;
    if &rebuilt != selection {
        return Err(FusionError::SelectionMismatch(format!(
            "expected {rebuilt}, got {selection}"
        )));
    }
    match strategy {
        None | Some(ShiftStrategy::Padding) => Ok(select_slots(layers, selection)?),
        Some(ShiftStrategy::Interpolate) => {
            let mut sorted = raw_picks.to_vec();
            sorted.sort_unstable();
            for &p in &sorted {
                layers.layer(p)?; // range check up front
            }
            let grid = interpolation_grid(raw_picks);
            let mut slots: Vec<Slot> = Vec::with_capacity(SLOT_COUNT);
            for (i, &f) in grid.iter().enumerate() {
                let lo = *sorted
                    .iter()
                    .filter(|&&p| (p as f64) <= f + 1e-9)
                    .max()
                    .unwrap_or(&sorted[0]);
                let hi = *sorted
                    .iter()
                    .filter(|&&p| (p as f64) >= f - 1e-9)
                    .min()
                    .unwrap_or(sorted.last().unwrap());
                let values = if hi == lo {
                    layers.layer(lo)?.to_vec()
                } else {
                    let t = (f - lo as f64) / (hi as f64 - lo as f64);
                    lerp(layers.layer(lo)?, layers.layer(hi)?, t)
                };
                let provenance = match selection.slots()[i] {
                    crate::selection::SlotPick::Layer(l) => SlotProvenance::Layer(l),
                    _ => SlotProvenance::Synthesized,
                };
                slots.push(Slot { provenance, values });
            }
            Ok(LocalFeatureStack::new(
                slots.try_into().expect("five slots"),
            ))
        }
        Some(ShiftStrategy::Average) | Some(ShiftStrategy::Max) => {
            let is_max = strategy == Some(ShiftStrategy::Max);
            let dim = layers.dim();
            let groups = contiguous_groups(raw_picks.len());
            let mut slots: Vec<Slot> = Vec::with_capacity(SLOT_COUNT);
            for (start, end) in groups {
                let mut acc = if is_max {
                    vec![f64::NEG_INFINITY; dim]
                } else {
                    vec![0.0; dim]
                };
                for &pick in &raw_picks[start..end] {
                    let feat = layers.layer(pick)?;
                    for (a, &v) in acc.iter_mut().zip(feat) {
                        if is_max {
                            *a = a.max(v);
                        } else {
                            *a += v;
                        }
                    }
                }
                if !is_max {
                    for a in acc.iter_mut() {
                        *a /= (end - start) as f64;
                    }
                }
                slots.push(Slot {
                    provenance: SlotProvenance::Synthesized,
                    values: acc,
                });
            }
            Ok(LocalFeatureStack::new(
                slots.try_into().expect("five slots"),
            ))
        }
    }
}

/// theta_ID: the global feature through the three-layer ID embedding net.
pub fn embed_id(
    global: &GlobalFeature,
    spec: &FusionNetworkSpec,
) -> Result<IdEmbedding, FusionError> {
    let net = id_network(spec);
    let out = net.forward(&global.concat().values)?;
    Ok(IdEmbedding(EmbeddingVector::new(out)))
}

/// Each slot through its own mapping network; zero slots still pass through
/// (biases apply).
pub fn map_slots(
    stack: &LocalFeatureStack,
    spec: &FusionNetworkSpec,
) -> Result<MappedStack, FusionError> {
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(SLOT_COUNT);
    for (i, slot) in stack.slots().iter().enumerate() {
        let net = mapping_network(spec, i);
        rows.push(net.forward(&slot.values)?);
    }
    Ok(MappedStack::new(rows.try_into().expect("five rows")))
}

/// Softmax weights of the single-query attention in [`fuse`].
pub fn fusion_weights(id: &IdEmbedding, mapped: &MappedStack) -> Result<[f64; SLOT_COUNT], FusionError> {
    let d = id.0.dim();
    if mapped.dim() != d {
        return Err(FusionError::DimMismatch {
            expected: d,
            found: mapped.dim(),
        });
    }
    let scale = 1.0 / (d as f64).sqrt();
    let mut scores = [0.0; SLOT_COUNT];
    for (i, row) in mapped.rows().iter().enumerate() {
        scores[i] = id.0.values.iter().zip(row).map(|(q, k)| q * k).sum::<f64>() * scale;
    }
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for s in scores.iter_mut() {
        *s = (*s - max).exp();
        sum += *s;
    }
    for s in scores.iter_mut() {
        *s /= sum;
        if !s.is_finite() {
            return Err(FusionError::NonFinite);
        }
    }
    Ok(scores)
}

/// Single-query scaled dot-product attention: query = the ID embedding,
/// keys = values = the five mapped slots. The output is the softmax-convex
/// combination of the mapped slot values.
pub fn fuse(id: &IdEmbedding, mapped: &MappedStack) -> Result<EditFeature, FusionError> {
    let weights = fusion_weights(id, mapped)?;
    let d = mapped.dim();
    let mut out = vec![0.0; d];
    for (w, row) in weights.iter().zip(mapped.rows()) {
        for (o, &v) in out.iter_mut().zip(row) {
            *o += w * v;
        }
    }
    if out.iter().any(|v| !v.is_finite()) {
        return Err(FusionError::NonFinite);
    }
    Ok(EditFeature(EmbeddingVector::new(out)))
}
