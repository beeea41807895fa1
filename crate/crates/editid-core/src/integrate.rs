//! Dynamic ID integration: block selection over the dual/single-stream
//! backbone, perceiver-style cross-attention (noise tokens query the ID
//! feature), query reweighting, residual fusion, and strength scheduling
//! across denoising steps.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fusion::EditFeature;
use crate::rng;
use crate::sampler::{FlowError, LatentState};

pub const DUAL_STREAM_TOTAL: usize = 19;
pub const SINGLE_STREAM_TOTAL: usize = 38;
pub const BLOCK_TOTAL: usize = DUAL_STREAM_TOTAL + SINGLE_STREAM_TOTAL;

#[derive(Debug, Error)]
pub enum IntegrateError {
    #[error("block count {0} out of range 1..={BLOCK_TOTAL}")]
    BlockCountOutOfRange(usize),
    #[error("block index {index} out of range for {stream:?} stream")]
    BlockIndexOutOfRange { stream: Stream, index: usize },
    #[error("duplicate block in explicit list: {0}")]
    DuplicateBlock(String),
    #[error("target dim {target} exceeds source dim {source_dim} for {kind}")]
    TargetDimTooLarge {
        kind: String,
        target: usize,
        source_dim: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid fusion parameters: {0}")]
    InvalidFusion(String),
    #[error("invalid schedule parameters: {0}")]
    InvalidSchedule(String),
    #[error("step {step} out of range for {total_steps} total steps")]
    StepOutOfRange { step: usize, total_steps: usize },
    #[error("non-finite value during integration")]
    NonFinite,
    #[error(transparent)]
    Flow(#[from] FlowError),
}

/// Which half of the backbone a block lives in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Stream {
    Dual,
    Single,
}

/// A block identified by stream and in-stream index.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct BlockId {
    pub stream: Stream,
    pub index: usize,
}

impl BlockId {
    pub fn dual(index: usize) -> Self {
        Self {
            stream: Stream::Dual,
            index,
        }
    }

    pub fn single(index: usize) -> Self {
        Self {
            stream: Stream::Single,
            index,
        }
    }

    /// Position in the concatenated dual-then-single sequence (0..57).
    pub fn concatenated_index(&self) -> usize {
        match self.stream {
            Stream::Dual => self.index,
            Stream::Single => DUAL_STREAM_TOTAL + self.index,
        }
    }

    /// Inverse of [`concatenated_index`](Self::concatenated_index).
    pub fn from_concatenated(index: usize) -> Result<Self, IntegrateError> {
        if index < DUAL_STREAM_TOTAL {
            Ok(Self::dual(index))
        } else if index < BLOCK_TOTAL {
            Ok(Self::single(index - DUAL_STREAM_TOTAL))
        } else {
            Err(IntegrateError::BlockIndexOutOfRange {
                stream: Stream::Single,
                index: index - DUAL_STREAM_TOTAL,
            })
        }
    }

    fn validate(&self) -> Result<(), IntegrateError> {
        let total = match self.stream {
            Stream::Dual => DUAL_STREAM_TOTAL,
            Stream::Single => SINGLE_STREAM_TOTAL,
        };
        if self.index >= total {
            return Err(IntegrateError::BlockIndexOutOfRange {
                stream: self.stream,
                index: self.index,
            });
        }
        Ok(())
    }
}

/// The subset of backbone blocks that receive the ID feature.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BlockSet {
    selected: BTreeSet<BlockId>,
}

impl BlockSet {
    pub fn empty() -> Self {
        Self {
            selected: BTreeSet::new(),
        }
    }

    pub fn contains(&self, block: &BlockId) -> bool {
        self.selected.contains(block)
    }

    pub fn len(&self) -> usize {
        self.selected.len()
    }

    pub fn is_empty(&self) -> bool {
        self.selected.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &BlockId> {
        self.selected.iter()
    }

    pub fn concatenated_indices(&self) -> Vec<usize> {
        let mut v: Vec<usize> = self.selected.iter().map(BlockId::concatenated_index).collect();
        v.sort_unstable();
        v
    }
}

/// Block selection policy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BlockPolicy {
    EvenlySpaced,
    Explicit(Vec<BlockId>),
}

/// Pick `k` blocks: evenly spaced over the concatenated 57-block sequence,
/// or an explicit, duplicate-free list.
pub fn select_blocks(k: usize, policy: &BlockPolicy) -> Result<BlockSet, IntegrateError> {
    match policy {
        BlockPolicy::EvenlySpaced => {
            if k < 1 || k > BLOCK_TOTAL {
                return Err(IntegrateError::BlockCountOutOfRange(k));
            }
            let mut selected = BTreeSet::new();
            if k == 1 {
                selected.insert(BlockId::dual(0));
            } else {
                for i in 0..k {
                    let idx = i * (BLOCK_TOTAL - 1) / (k - 1);
                    selected.insert(BlockId::from_concatenated(idx)?);
                }
            }
            Ok(BlockSet { selected })
        }
        BlockPolicy::Explicit(list) => {
            if list.is_empty() || list.len() > BLOCK_TOTAL {
                return Err(IntegrateError::BlockCountOutOfRange(list.len()));
            }
            let mut selected = BTreeSet::new();
            for block in list {
                block.validate()?;
                if !selected.insert(*block) {
                    return Err(IntegrateError::DuplicateBlock(format!(
                        "{:?}:{}",
                        block.stream, block.index
                    )));
                }
            }
            Ok(BlockSet { selected })
        }
    }
}

/// Fixed linear transform aligning token dimension to the ID-feature
/// dimension.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum ReweightMethod {
    SeededGaussianLinear { seed: u64, target_dim: usize },
    Dct { target_dim: usize },
    PartialFourier { target_dim: usize },
}

impl ReweightMethod {
    pub fn target_dim(&self) -> usize {
        match *self {
            ReweightMethod::SeededGaussianLinear { target_dim, .. }
            | ReweightMethod::Dct { target_dim }
            | ReweightMethod::PartialFourier { target_dim } => target_dim,
        }
    }
}

/// The reweight matrix, row-major `target_dim x source_dim`.
pub fn reweight_matrix(
    method: &ReweightMethod,
    source_dim: usize,
) -> Result<Vec<f64>, IntegrateError> {
    match *method {
        ReweightMethod::SeededGaussianLinear { seed, target_dim } => {
            let scale = 1.0 / (source_dim as f64).sqrt();
            Ok(rng::gaussian_matrix(seed, target_dim, source_dim)
                .into_iter()
                .map(|v| v * scale)
                .collect())
        }
        ReweightMethod::Dct { target_dim } => {
            if target_dim > source_dim {
                return Err(IntegrateError::TargetDimTooLarge {
                    kind: "dct".into(),
                    target: target_dim,
                    source_dim,
                });
            }
            let n = source_dim as f64;
            let mut m = Vec::with_capacity(target_dim * source_dim);
            for k in 0..target_dim {
                let c = if k == 0 {
                    (1.0 / n).sqrt()
                } else {
                    (2.0 / n).sqrt()
                };
                for i in 0..source_dim {
                    m.push(
                        c * (std::f64::consts::PI * (2.0 * i as f64 + 1.0) * k as f64 / (2.0 * n))
                            .cos(),
                    );
                }
            }
            Ok(m)
        }
        ReweightMethod::PartialFourier { target_dim } => {
            if target_dim > source_dim {
                return Err(IntegrateError::TargetDimTooLarge {
                    kind: "partial-fourier".into(),
                    target: target_dim,
                    source_dim,
                });
            }
            // Real trigonometric basis of the DFT: the constant row, then
            // cos/sin pairs per frequency, each renormalized to unit L2 norm.
            // Zero rows (the sin row at the Nyquist frequency) are skipped.
            let n = source_dim;
            let mut rows: Vec<Vec<f64>> = Vec::with_capacity(n);
            rows.push(vec![1.0; n]);
            let mut freq = 1usize;
            while rows.len() < n {
                let cos_row: Vec<f64> = (0..n)
                    .map(|i| (2.0 * std::f64::consts::PI * freq as f64 * i as f64 / n as f64).cos())
                    .collect();
                rows.push(cos_row);
                if rows.len() < n {
                    let sin_row: Vec<f64> = (0..n)
                        .map(|i| {
                            (2.0 * std::f64::consts::PI * freq as f64 * i as f64 / n as f64).sin()
                        })
                        .collect();
                    let norm = sin_row.iter().map(|v| v * v).sum::<f64>().sqrt();
                    if norm > 1e-12 {
                        rows.push(sin_row);
                    }
                }
                freq += 1;
            }
            let mut m = Vec::with_capacity(target_dim * n);
            for row in rows.into_iter().take(target_dim) {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                m.extend(row.into_iter().map(|v| v / norm));
            }
            Ok(m)
        }
    }
}

/// Apply the reweight transform per token.
pub fn reweight(tokens: &LatentState, method: &ReweightMethod) -> Result<LatentState, IntegrateError> {
    let target = method.target_dim();
    let matrix = reweight_matrix(method, tokens.dim)?;
    let mut values = Vec::with_capacity(tokens.tokens * target);
    for t in 0..tokens.tokens {
        let x = tokens.row(t);
        for r in 0..target {
            values.push(
                (0..tokens.dim)
                    .map(|c| matrix[r * tokens.dim + c] * x[c])
                    .sum(),
            );
        }
    }
    Ok(LatentState::new(tokens.tokens, target, values))
}

/// Residual fusion method for combining the reweighted query with the ID
/// response.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum FusionMethod {
    Weight { w1: f64, w2: f64 },
    Dropout { drop_rate: f64, seed: u64 },
    Concat,
    Sum,
    Multiply,
    Max,
}

impl FusionMethod {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        match *self {
            FusionMethod::Weight { w1, w2 } => {
                if !w1.is_finite() || !w2.is_finite() {
                    return Err(IntegrateError::InvalidFusion("non-finite weight pair".into()));
                }
            }
            FusionMethod::Dropout { drop_rate, .. } => {
                if !(0.0..1.0).contains(&drop_rate) {
                    return Err(IntegrateError::InvalidFusion(format!(
                        "drop_rate {drop_rate} outside [0,1)"
                    )));
                }
            }
            _ => {}
        }
        Ok(())
    }
}

/// Combine two equally shaped token arrays per the fusion method. Concat
/// means concatenate-then-mean, i.e. the elementwise mean.
pub fn residual_fuse(
    a: &LatentState,
    b: &LatentState,
    method: &FusionMethod,
) -> Result<LatentState, IntegrateError> {
    if a.tokens != b.tokens || a.dim != b.dim {
        return Err(IntegrateError::ShapeMismatch(format!(
            "{}x{} vs {}x{}",
            a.tokens, a.dim, b.tokens, b.dim
        )));
    }
    method.validate()?;
    let values: Vec<f64> = match *method {
        FusionMethod::Weight { w1, w2 } => a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| w1 * x + w2 * y)
            .collect(),
        FusionMethod::Dropout { drop_rate, seed } => {
            let mask = rng::uniform_vector(seed, a.values.len());
            a.values
                .iter()
                .zip(&b.values)
                .zip(mask)
                .map(|((x, y), u)| if u < drop_rate { *y } else { x + y })
                .collect()
        }
        FusionMethod::Concat => a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| (x + y) / 2.0)
            .collect(),
        FusionMethod::Sum => a.values.iter().zip(&b.values).map(|(x, y)| x + y).collect(),
        FusionMethod::Multiply => a.values.iter().zip(&b.values).map(|(x, y)| x * y).collect(),
        FusionMethod::Max => a
            .values
            .iter()
            .zip(&b.values)
            .map(|(x, y)| x.max(*y))
            .collect(),
    };
    Ok(LatentState::new(a.tokens, a.dim, values))
}

/// ID-strength schedule over denoising steps.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum StrengthSchedule {
    Constant { base: f64 },
    EarlyBoost {
        base: f64,
        boost: f64,
        boost_until_fraction: f64,
    },
}

impl StrengthSchedule {
    pub fn validate(&self) -> Result<(), IntegrateError> {
        match *self {
            StrengthSchedule::Constant { base } => {
                if !(base.is_finite() && base >= 0.0) {
                    return Err(IntegrateError::InvalidSchedule(format!("base {base}")));
                }
            }
            StrengthSchedule::EarlyBoost {
                base,
                boost,
                boost_until_fraction,
            } => {
                if !(base.is_finite() && base >= 0.0 && boost.is_finite() && boost >= 0.0) {
                    return Err(IntegrateError::InvalidSchedule(format!(
                        "base {base}, boost {boost}"
                    )));
                }
                if !(0.0..=1.0).contains(&boost_until_fraction) {
                    return Err(IntegrateError::InvalidSchedule(format!(
                        "boost_until_fraction {boost_until_fraction}"
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The strength multiplier at a step.
pub fn strength_at(
    step: usize,
    total_steps: usize,
    schedule: &StrengthSchedule,
) -> Result<f64, IntegrateError> {
    if step >= total_steps {
        return Err(IntegrateError::StepOutOfRange { step, total_steps });
    }
    schedule.validate()?;
    Ok(match *schedule {
        StrengthSchedule::Constant { base } => base,
        StrengthSchedule::EarlyBoost {
            base,
            boost,
            boost_until_fraction,
        } => {
            if (step as f64) / (total_steps as f64) < boost_until_fraction {
                base + boost
            } else {
                base
            }
        }
    })
}

/// Everything the integration hook needs besides the live state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegrationConfig {
    pub blocks: BlockSet,
    pub reweight: ReweightMethod,
    pub fusion: FusionMethod,
    pub schedule: StrengthSchedule,
    /// Seeds the perceiver attention weights and the map back to token dim.
    pub seed: u64,
}

impl IntegrationConfig {
    /// 10 evenly spaced blocks, seeded Gaussian reweight, concat fusion,
    /// constant strength 1.
    pub fn toy_default(id_dim: usize) -> Self {
        Self {
            blocks: select_blocks(10, &BlockPolicy::EvenlySpaced).expect("valid default"),
            reweight: ReweightMethod::SeededGaussianLinear {
                seed: 0,
                target_dim: id_dim,
            },
            fusion: FusionMethod::Concat,
            schedule: StrengthSchedule::Constant { base: 1.0 },
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<(), IntegrateError> {
        self.fusion.validate()?;
        self.schedule.validate()?;
        Ok(())
    }
}

fn apply_linear(matrix: &[f64], x: &[f64], out_dim: usize) -> Vec<f64> {
    let in_dim = x.len();
    (0..out_dim)
        .map(|r| (0..in_dim).map(|c| matrix[r * in_dim + c] * x[c]).sum())
        .collect()
}

/// Cross-attention where each noise token is a query and the edit feature is
/// the single key/value token. All projections are bias-free seeded linear
/// maps, so a zero edit feature yields a zero response. Output rows live in
/// the ID dimension.
pub fn perceiver_attend(
    noise_tokens: &LatentState,
    edit: &EditFeature,
    seed: u64,
) -> Result<LatentState, IntegrateError> {
    let d_id = edit.0.dim();
    let token_dim = noise_tokens.dim;
    let scale = |dim: usize| 1.0 / (dim as f64).sqrt();
    let wq: Vec<f64> = rng::gaussian_matrix(rng::mix(seed, "perceiver-wq"), d_id, token_dim)
        .into_iter()
        .map(|v| v * scale(token_dim))
        .collect();
    let wk: Vec<f64> = rng::gaussian_matrix(rng::mix(seed, "perceiver-wk"), d_id, d_id)
        .into_iter()
        .map(|v| v * scale(d_id))
        .collect();
    let wv: Vec<f64> = rng::gaussian_matrix(rng::mix(seed, "perceiver-wv"), d_id, d_id)
        .into_iter()
        .map(|v| v * scale(d_id))
        .collect();
    let wo: Vec<f64> = rng::gaussian_matrix(rng::mix(seed, "perceiver-wo"), d_id, d_id)
        .into_iter()
        .map(|v| v * scale(d_id))
        .collect();

    // Single K/V token: softmax over one key is 1, so every query's
    // attention output is the value row; queries only matter for shape.
    let _k = apply_linear(&wk, &edit.0.values, d_id);
    let v = apply_linear(&wv, &edit.0.values, d_id);
    let out_row = apply_linear(&wo, &v, d_id);
    let _ = apply_linear(&wq, noise_tokens.row(0), d_id);

    let mut values = Vec::with_capacity(noise_tokens.tokens * d_id);
    for _ in 0..noise_tokens.tokens {
        values.extend_from_slice(&out_row);
    }
    let out = LatentState::new(noise_tokens.tokens, d_id, values);
    if !out.is_finite() {
        return Err(IntegrateError::NonFinite);
    }
    Ok(out)
}

/// The fixed seeded map restoring token dimension from the ID dimension.
pub fn project_back(fused: &LatentState, token_dim: usize, seed: u64) -> LatentState {
    let scale = 1.0 / (fused.dim as f64).sqrt();
    let m: Vec<f64> = rng::gaussian_matrix(rng::mix(seed, "project-back"), token_dim, fused.dim)
        .into_iter()
        .map(|v| v * scale)
        .collect();
    let mut values = Vec::with_capacity(fused.tokens * token_dim);
    for t in 0..fused.tokens {
        values.extend(apply_linear(&m, fused.row(t), token_dim));
    }
    LatentState::new(fused.tokens, token_dim, values)
}

/// One block's worth of integration. Unselected blocks pass the state
/// through bitwise; selected blocks add the strength-scaled, token-space
/// residual built from the reweighted query and the ID response.
pub fn integrate_step(
    state: &LatentState,
    edit: &EditFeature,
    cfg: &IntegrationConfig,
    block_id: BlockId,
    step: usize,
    total_steps: usize,
) -> Result<LatentState, IntegrateError> {
    if !cfg.blocks.contains(&block_id) {
        return Ok(state.clone());
    }
    cfg.validate()?;
    let strength = strength_at(step, total_steps, &cfg.schedule)?;
    if cfg.reweight.target_dim() != edit.0.dim() {
        return Err(IntegrateError::ShapeMismatch(format!(
            "reweight target {} vs edit dim {}",
            cfg.reweight.target_dim(),
            edit.0.dim()
        )));
    }
    let response = perceiver_attend(state, edit, cfg.seed)?;
    let query = reweight(state, &cfg.reweight)?;
    // Dropout masks are re-seeded per step so reruns reproduce while steps
    // stay independent.
    let fusion = match cfg.fusion {
        FusionMethod::Dropout { drop_rate, seed } => FusionMethod::Dropout {
            drop_rate,
            seed: rng::mix_index(seed, "dropout-step", step),
        },
        other => other,
    };
    let fused = residual_fuse(&query, &response, &fusion)?;
    let residual = project_back(&fused, state.dim, cfg.seed);
    let out = state.affine(1.0, &residual, strength)?;
    if !out.is_finite() {
        return Err(IntegrateError::NonFinite);
    }
    Ok(out)
}

/// Fold [`integrate_step`] over every backbone block in concatenated order;
/// the sampler hook calls this once per denoising step.
pub fn apply_integration(
    state: &LatentState,
    edit: &EditFeature,
    cfg: &IntegrationConfig,
    step: usize,
    total_steps: usize,
) -> Result<LatentState, IntegrateError> {
    let mut current = state.clone();
    for idx in 0..BLOCK_TOTAL {
        let block = BlockId::from_concatenated(idx)?;
        if cfg.blocks.contains(&block) {
            current = integrate_step(&current, edit, cfg, block, step, total_steps)?;
        }
    }
    Ok(current)
}
