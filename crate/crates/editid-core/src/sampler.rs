//! Flow-matching generation math with an Euler ODE sampler and a toy
//! attention vector field.
//!
//! Integration runs t: 0 -> 1 with fixed step 1/steps. Hooks are the single
//! extension point for ID injection: the sampler itself knows nothing about
//! IDs. The linear interpolation path drives sampling; the cosine noise
//! schedule is exposed for the forward process only.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, Generate};
use crate::image::ImageBuffer;
use crate::rng;

/// Default sampling step count.
pub const DEFAULT_STEPS: usize = 20;

#[derive(Debug, Error)]
pub enum FlowError {
    #[error("time {0} outside [0, 1]")]
    TimeOutOfRange(f64),
    #[error("latent shape mismatch: {a_tokens}x{a_dim} vs {b_tokens}x{b_dim}")]
    ShapeMismatch {
        a_tokens: usize,
        a_dim: usize,
        b_tokens: usize,
        b_dim: usize,
    },
    #[error("head count {heads} does not divide dim {dim}")]
    HeadsDontDivide { heads: usize, dim: usize },
    #[error("condition dim {cond_dim} does not match spec {expected}")]
    CondDimMismatch { cond_dim: usize, expected: usize },
    #[error("latent dim {dim} does not match spec {expected}")]
    LatentDimMismatch { dim: usize, expected: usize },
    #[error("steps must be >= 1")]
    InvalidSteps,
    #[error("non-finite state at step {step}")]
    Divergence { step: usize },
    #[error("hook failed at step {step}: {message}")]
    Hook { step: usize, message: String },
}

/// A tokens x dim real array, the state carried through sampling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LatentState {
    pub tokens: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl LatentState {
    pub fn new(tokens: usize, dim: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), tokens * dim, "latent buffer length");
        Self {
            tokens,
            dim,
            values,
        }
    }

    pub fn zeros(tokens: usize, dim: usize) -> Self {
        Self::new(tokens, dim, vec![0.0; tokens * dim])
    }

    pub fn seeded_normal(tokens: usize, dim: usize, seed: u64) -> Self {
        Self::new(tokens, dim, rng::gaussian_vector(seed, tokens * dim))
    }

    pub fn row(&self, token: usize) -> &[f64] {
        &self.values[token * self.dim..(token + 1) * self.dim]
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    fn check_shape(&self, other: &Self) -> Result<(), FlowError> {
        if self.tokens != other.tokens || self.dim != other.dim {
            return Err(FlowError::ShapeMismatch {
                a_tokens: self.tokens,
                a_dim: self.dim,
                b_tokens: other.tokens,
                b_dim: other.dim,
            });
        }
        Ok(())
    }

    /// a*self + b*other, elementwise.
    pub fn affine(&self, a: f64, other: &Self, b: f64) -> Result<Self, FlowError> {
        self.check_shape(other)?;
        let values = self
            .values
            .iter()
            .zip(&other.values)
            .map(|(x, y)| a * x + b * y)
            .collect();
        Ok(Self::new(self.tokens, self.dim, values))
    }
}

/// A point in normalized sampling time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimePoint(f64);

impl TimePoint {
    pub fn new(t: f64) -> Result<Self, FlowError> {
        if !t.is_finite() || !(0.0..=1.0).contains(&t) {
            return Err(FlowError::TimeOutOfRange(t));
        }
        Ok(Self(t))
    }

    pub fn value(self) -> f64 {
        self.0
    }
}

/// Cosine noise-schedule coefficients; alpha + sigma = 1 by the
/// cos^2 + sin^2 identity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleValue {
    pub alpha: f64,
    pub sigma: f64,
}

/// Conditioning token sequence (prompt embedding).
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionEmbedding {
    pub tokens: usize,
    pub dim: usize,
    pub values: Vec<f64>,
}

impl ConditionEmbedding {
    pub fn new(tokens: usize, dim: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), tokens * dim, "condition buffer length");
        Self {
            tokens,
            dim,
            values,
        }
    }

    pub fn single(values: Vec<f64>) -> Self {
        let dim = values.len();
        Self::new(1, dim, values)
    }

    pub fn row(&self, token: usize) -> &[f64] {
        &self.values[token * self.dim..(token + 1) * self.dim]
    }
}

/// Seeds and shape of the toy attention vector field.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct VectorFieldSpec {
    pub dim: usize,
    pub cond_dim: usize,
    pub heads: usize,
    pub seed: u64,
}

impl VectorFieldSpec {
    pub fn validate(&self) -> Result<(), FlowError> {
        if self.heads == 0 || self.dim % self.heads != 0 {
            return Err(FlowError::HeadsDontDivide {
                heads: self.heads,
                dim: self.dim,
            });
        }
        Ok(())
    }
}

/// alpha = cos^2(pi t / 2), sigma = sin^2(pi t / 2).
pub fn noise_schedule(t: TimePoint) -> ScheduleValue {
    let half = std::f64::consts::FRAC_PI_2 * t.value();
    let c = half.cos();
    let s = half.sin();
    ScheduleValue {
        alpha: c * c,
        sigma: s * s,
    }
}

/// Reparameterized forward sample: alpha_t * x0 + sigma_t * noise.
pub fn forward_diffuse(
    x0: &LatentState,
    t: TimePoint,
    noise: &LatentState,
) -> Result<LatentState, FlowError> {
    let sv = noise_schedule(t);
    x0.affine(sv.alpha, noise, sv.sigma)
}

/// Linear interpolation path (1 - t) * x0 + t * x1.
pub fn interpolate_path(
    x0: &LatentState,
    x1: &LatentState,
    t: TimePoint,
) -> Result<LatentState, FlowError> {
    x0.affine(1.0 - t.value(), x1, t.value())
}

/// Flow-matching regression target x1 - x0 (test oracle only, never trained).
pub fn fm_residual(x0: &LatentState, x1: &LatentState) -> Result<LatentState, FlowError> {
    x1.affine(1.0, x0, -1.0)
}

fn softmax_in_place(row: &mut [f64]) {
    let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut sum = 0.0;
    for v in row.iter_mut() {
        *v = (*v - max).exp();
        sum += *v;
    }
    for v in row.iter_mut() {
        *v /= sum;
    }
}

/// y = x * m where x is rows x inner and m is inner x cols (row-major).
fn matmul(x: &[f64], rows: usize, inner: usize, m: &[f64], cols: usize) -> Vec<f64> {
    let mut out = vec![0.0; rows * cols];
    for r in 0..rows {
        for k in 0..inner {
            let xv = x[r * inner + k];
            if xv == 0.0 {
                continue;
            }
            for c in 0..cols {
                out[r * cols + c] += xv * m[k * cols + c];
            }
        }
    }
    out
}

/// Proj(Attn(Q, K, V)) with Q = x W_Q, K = c W_K, V = c W_V; multi-head
/// softmax attention scaled by 1/sqrt(head_dim).
pub fn attention_vector_field(
    spec: &VectorFieldSpec,
    x: &LatentState,
    _t: TimePoint,
    c: &ConditionEmbedding,
) -> Result<LatentState, FlowError> {
    spec.validate()?;
    if x.dim != spec.dim {
        return Err(FlowError::LatentDimMismatch {
            dim: x.dim,
            expected: spec.dim,
        });
    }
    if c.dim != spec.cond_dim {
        return Err(FlowError::CondDimMismatch {
            cond_dim: c.dim,
            expected: spec.cond_dim,
        });
    }
    let d = spec.dim;
    let wq = rng::gaussian_matrix(rng::mix(spec.seed, "wq"), d, d);
    let wk = rng::gaussian_matrix(rng::mix(spec.seed, "wk"), spec.cond_dim, d);
    let wv = rng::gaussian_matrix(rng::mix(spec.seed, "wv"), spec.cond_dim, d);
    let wp = rng::gaussian_matrix(rng::mix(spec.seed, "proj"), d, d);

    let q = matmul(&x.values, x.tokens, d, &wq, d);
    let k = matmul(&c.values, c.tokens, c.dim, &wk, d);
    let v = matmul(&c.values, c.tokens, c.dim, &wv, d);

    let head_dim = d / spec.heads;
    let scale = 1.0 / (head_dim as f64).sqrt();
    let mut attended = vec![0.0; x.tokens * d];
    for h in 0..spec.heads {
        let off = h * head_dim;
        for qi in 0..x.tokens {
            let mut scores: Vec<f64> = (0..c.tokens)
                .map(|ki| {
                    (0..head_dim)
                        .map(|j| q[qi * d + off + j] * k[ki * d + off + j])
                        .sum::<f64>()
                        * scale
                })
                .collect();
            softmax_in_place(&mut scores);
            for (ki, w) in scores.iter().enumerate() {
                for j in 0..head_dim {
                    attended[qi * d + off + j] += w * v[ki * d + off + j];
                }
            }
        }
    }
    let out = matmul(&attended, x.tokens, d, &wp, d);
    Ok(LatentState::new(x.tokens, d, out))
}

/// Per-step hook: receives (step index, state after the Euler update) and may
/// replace the state.
pub type StepHook<'a> = &'a (dyn Fn(usize, LatentState) -> Result<LatentState, FlowError> + Sync);

/// Fixed-step explicit Euler over t in [0, 1].
pub fn euler_integrate<F>(
    field: F,
    x_init: &LatentState,
    steps: usize,
    hooks: &[StepHook<'_>],
) -> Result<LatentState, FlowError>
where
    F: Fn(&LatentState, TimePoint) -> Result<LatentState, FlowError>,
{
    if steps == 0 {
        return Err(FlowError::InvalidSteps);
    }
    let dt = 1.0 / steps as f64;
    let mut state = x_init.clone();
    for step in 0..steps {
        let t = TimePoint::new(step as f64 * dt)?;
        let velocity = field(&state, t)?;
        state = state.affine(1.0, &velocity, dt)?;
        for hook in hooks {
            state = hook(step, state)?;
        }
        if !state.is_finite() {
            return Err(FlowError::Divergence { step });
        }
    }
    Ok(state)
}

/// Toy latent geometry used by [`toy_generate`].
pub const TOY_LATENT_TOKENS: usize = 8;
/// Decoded toy image side length.
pub const TOY_IMAGE_SIDE: usize = 16;

/// Desk-scale stand-in for the full generator: seeds the initial latent,
/// integrates the toy attention field under the prompt condition, then
/// decodes through a fixed seeded linear map clamped to [0, 1].
pub fn toy_generate(
    spec: &VectorFieldSpec,
    prompt_embedding: &ConditionEmbedding,
    seed: u64,
    steps: usize,
    hooks: &[StepHook<'_>],
) -> Result<ImageBuffer, FlowError> {
    spec.validate()?;
    let x_init = LatentState::seeded_normal(
        TOY_LATENT_TOKENS,
        spec.dim,
        rng::mix(seed, "latent-init"),
    );
    let field = |x: &LatentState, t: TimePoint| attention_vector_field(spec, x, t, prompt_embedding);
    let final_state = euler_integrate(field, &x_init, steps, hooks)?;
    Ok(decode_latent(spec.seed, &final_state))
}

/// Fixed seeded linear decode of a latent into a TOY_IMAGE_SIDE square image.
pub fn decode_latent(spec_seed: u64, state: &LatentState) -> ImageBuffer {
    let n = state.values.len();
    let out_len = TOY_IMAGE_SIDE * TOY_IMAGE_SIDE * 3;
    let raw = rng::project(rng::mix(spec_seed, "decode"), &state.values, out_len);
    let scale = 0.25 / (n as f64).sqrt();
    let pixels: Vec<f64> = raw
        .iter()
        .map(|v| (0.5 + v * scale).clamp(0.0, 1.0))
        .collect();
    ImageBuffer::new(TOY_IMAGE_SIDE, TOY_IMAGE_SIDE, pixels).expect("decoded image is valid")
}

/// Registry-facing generator wrapping [`toy_generate`] with no hooks.
#[derive(Debug, Clone)]
pub struct ToyGenerator {
    pub spec: VectorFieldSpec,
}

impl Generate for ToyGenerator {
    fn generate(
        &self,
        prompt_embedding: &[f64],
        seed: u64,
        steps: usize,
    ) -> Result<ImageBuffer, BackendError> {
        let cond = ConditionEmbedding::single(prompt_embedding.to_vec());
        toy_generate(&self.spec, &cond, seed, steps, &[])
            .map_err(|e| BackendError::Failure(e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(v: f64) -> TimePoint {
        TimePoint::new(v).unwrap()
    }

    #[test]
    fn schedule_endpoints() {
        let s0 = noise_schedule(t(0.0));
        assert_eq!((s0.alpha, s0.sigma), (1.0, 0.0));
        let s1 = noise_schedule(t(1.0));
        assert!(s1.alpha.abs() < 1e-30);
        assert!((s1.sigma - 1.0).abs() < 1e-12);
        let sh = noise_schedule(t(0.5));
        assert!((sh.alpha - 0.5).abs() < 1e-12);
        assert!((sh.sigma - 0.5).abs() < 1e-12);
    }

    #[test]
    fn time_out_of_range_rejected() {
        assert!(TimePoint::new(-0.1).is_err());
        assert!(TimePoint::new(1.1).is_err());
        assert!(TimePoint::new(f64::NAN).is_err());
    }

    #[test]
    fn forward_diffuse_endpoints_and_convexity() {
        let x0 = LatentState::seeded_normal(3, 4, 1);
        let noise = LatentState::seeded_normal(3, 4, 2);
        assert_eq!(forward_diffuse(&x0, t(0.0), &noise).unwrap(), x0);
        let at1 = forward_diffuse(&x0, t(1.0), &noise).unwrap();
        for (a, b) in at1.values.iter().zip(&noise.values) {
            assert!((a - b).abs() < 1e-12);
        }
        // x0 == noise -> x0 for all t
        for tv in [0.1, 0.3, 0.77] {
            let same = forward_diffuse(&x0, t(tv), &x0).unwrap();
            for (a, b) in same.values.iter().zip(&x0.values) {
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn interpolate_path_examples() {
        let x0 = LatentState::zeros(2, 2);
        let x1 = LatentState::new(2, 2, vec![4.0; 4]);
        let mid = interpolate_path(&x0, &x1, t(0.25)).unwrap();
        assert_eq!(mid.values, vec![1.0; 4]);
        assert_eq!(interpolate_path(&x0, &x1, t(0.0)).unwrap(), x0);
        assert_eq!(interpolate_path(&x0, &x1, t(1.0)).unwrap(), x1);
    }

    #[test]
    fn fm_residual_matches_direct_subtraction() {
        let x0 = LatentState::seeded_normal(4, 5, 10);
        let x1 = LatentState::seeded_normal(4, 5, 11);
        let r = fm_residual(&x0, &x1).unwrap();
        for i in 0..r.values.len() {
            assert_eq!(r.values[i], x1.values[i] - x0.values[i]);
        }
        let zero = fm_residual(&x0, &x0).unwrap();
        assert!(zero.values.iter().all(|&v| v == 0.0));
        let from_zero = fm_residual(&LatentState::zeros(4, 5), &x1).unwrap();
        assert_eq!(from_zero.values, x1.values);
    }

    #[test]
    fn shape_mismatch_rejected() {
        let a = LatentState::zeros(2, 3);
        let b = LatentState::zeros(3, 2);
        assert!(matches!(
            fm_residual(&a, &b),
            Err(FlowError::ShapeMismatch { .. })
        ));
    }

    fn brute_force_attention(
        spec: &VectorFieldSpec,
        x: &LatentState,
        c: &ConditionEmbedding,
    ) -> Vec<f64> {
        // O(n^2) single-loop reference, independent of the implementation path
        let d = spec.dim;
        let wq = rng::gaussian_matrix(rng::mix(spec.seed, "wq"), d, d);
        let wk = rng::gaussian_matrix(rng::mix(spec.seed, "wk"), spec.cond_dim, d);
        let wv = rng::gaussian_matrix(rng::mix(spec.seed, "wv"), spec.cond_dim, d);
        let wp = rng::gaussian_matrix(rng::mix(spec.seed, "proj"), d, d);
        let head_dim = d / spec.heads;
        let mut attended = vec![0.0; x.tokens * d];
        for qi in 0..x.tokens {
            let q: Vec<f64> = (0..d)
                .map(|j| (0..d).map(|i| x.values[qi * d + i] * wq[i * d + j]).sum())
                .collect();
            for h in 0..spec.heads {
                let mut weights = Vec::new();
                for ki in 0..c.tokens {
                    let kvec: Vec<f64> = (0..d)
                        .map(|j| {
                            (0..c.dim)
                                .map(|i| c.values[ki * c.dim + i] * wk[i * d + j])
                                .sum()
                        })
                        .collect();
                    let s: f64 = (0..head_dim)
                        .map(|j| q[h * head_dim + j] * kvec[h * head_dim + j])
                        .sum::<f64>()
                        / (head_dim as f64).sqrt();
                    weights.push(s);
                }
                softmax_in_place(&mut weights);
                for (ki, w) in weights.iter().enumerate() {
                    for j in 0..head_dim {
                        let vj: f64 = (0..c.dim)
                            .map(|i| c.values[ki * c.dim + i] * wv[i * d + h * head_dim + j])
                            .sum();
                        attended[qi * d + h * head_dim + j] += w * vj;
                    }
                }
            }
        }
        matmul(&attended, x.tokens, d, &wp, d)
    }

    #[test]
    fn attention_matches_brute_force() {
        let spec = VectorFieldSpec {
            dim: 8,
            cond_dim: 6,
            heads: 2,
            seed: 99,
        };
        let x = LatentState::seeded_normal(3, 8, 5);
        let c = ConditionEmbedding::new(4, 6, rng::gaussian_vector(6, 24));
        let got = attention_vector_field(&spec, &x, t(0.3), &c).unwrap();
        let want = brute_force_attention(&spec, &x, &c);
        for (a, b) in got.values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn single_condition_token_attends_with_weight_one() {
        let spec = VectorFieldSpec {
            dim: 8,
            cond_dim: 6,
            heads: 2,
            seed: 7,
        };
        let x = LatentState::seeded_normal(4, 8, 3);
        let c = ConditionEmbedding::single(rng::gaussian_vector(8, 6));
        let out = attention_vector_field(&spec, &x, t(0.0), &c).unwrap();
        // every query row equals the (identical) value row through Proj
        for token in 1..out.tokens {
            for j in 0..out.dim {
                assert!((out.row(0)[j] - out.row(token)[j]).abs() < 1e-12);
            }
        }
        // duplicating the single token changes nothing
        let mut dv = c.values.clone();
        dv.extend_from_slice(&c.values);
        let c2 = ConditionEmbedding::new(2, 6, dv);
        let out2 = attention_vector_field(&spec, &x, t(0.0), &c2).unwrap();
        for (a, b) in out.values.iter().zip(&out2.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn attention_invariant_to_condition_permutation() {
        let spec = VectorFieldSpec {
            dim: 8,
            cond_dim: 4,
            heads: 2,
            seed: 13,
        };
        let x = LatentState::seeded_normal(2, 8, 21);
        let c = ConditionEmbedding::new(4, 4, rng::gaussian_vector(22, 16));
        let base = attention_vector_field(&spec, &x, t(0.5), &c).unwrap();
        // reverse-token permutation
        let mut permuted = Vec::new();
        for token in (0..4).rev() {
            permuted.extend_from_slice(c.row(token));
        }
        let cp = ConditionEmbedding::new(4, 4, permuted);
        let perm = attention_vector_field(&spec, &x, t(0.5), &cp).unwrap();
        for (a, b) in base.values.iter().zip(&perm.values) {
            assert!((a - b).abs() < 1e-10);
        }
    }

    #[test]
    fn heads_must_divide_dim() {
        let spec = VectorFieldSpec {
            dim: 8,
            cond_dim: 4,
            heads: 3,
            seed: 0,
        };
        let x = LatentState::zeros(1, 8);
        let c = ConditionEmbedding::single(vec![0.0; 4]);
        assert!(matches!(
            attention_vector_field(&spec, &x, t(0.0), &c),
            Err(FlowError::HeadsDontDivide { .. })
        ));
    }

    #[test]
    fn euler_constant_field_is_exact() {
        let x0 = LatentState::seeded_normal(2, 3, 1);
        let v = LatentState::seeded_normal(2, 3, 2);
        for steps in [1, 7, 20] {
            let out = euler_integrate(|_, _| Ok(v.clone()), &x0, steps, &[]).unwrap();
            for i in 0..out.values.len() {
                assert!((out.values[i] - (x0.values[i] + v.values[i])).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn euler_exponential_field_converges() {
        let x0 = LatentState::new(1, 1, vec![1.0]);
        let analytic = std::f64::consts::E;
        let mut last_err = f64::INFINITY;
        for steps in [5usize, 10, 20, 40, 80, 160] {
            let out = euler_integrate(|x, _| Ok(x.clone()), &x0, steps, &[]).unwrap();
            let expected = (1.0 + 1.0 / steps as f64).powi(steps as i32);
            assert!((out.values[0] - expected).abs() < 1e-9);
            let err = (out.values[0] - analytic).abs();
            assert!(err < last_err, "error not shrinking at steps={steps}");
            last_err = err;
        }
    }

    #[test]
    fn euler_reports_divergence_step() {
        let x0 = LatentState::new(1, 1, vec![1.0]);
        let field = |x: &LatentState, _: TimePoint| {
            Ok(LatentState::new(1, 1, vec![if x.values[0] > 2.0 { f64::NAN } else { x.values[0] * 30.0 }]))
        };
        let err = euler_integrate(field, &x0, 10, &[]).unwrap_err();
        assert!(matches!(err, FlowError::Divergence { .. }));
    }

    #[test]
    fn hooks_can_replace_state() {
        let x0 = LatentState::zeros(1, 2);
        let hook: StepHook<'_> =
            &|_step, s: LatentState| Ok(LatentState::new(s.tokens, s.dim, vec![1.0; 2]));
        let out = euler_integrate(|_, _| Ok(LatentState::zeros(1, 2)), &x0, 3, &[hook]).unwrap();
        assert_eq!(out.values, vec![1.0; 2]);
    }

    #[test]
    fn toy_generate_is_deterministic() {
        let spec = VectorFieldSpec {
            dim: 32,
            cond_dim: 16,
            heads: 4,
            seed: 3,
        };
        let cond = ConditionEmbedding::single(rng::gaussian_vector(5, 16));
        let a = toy_generate(&spec, &cond, 42, DEFAULT_STEPS, &[]).unwrap();
        let b = toy_generate(&spec, &cond, 42, DEFAULT_STEPS, &[]).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn different_prompts_give_different_images() {
        let spec = VectorFieldSpec {
            dim: 32,
            cond_dim: 16,
            heads: 4,
            seed: 3,
        };
        let c1 = ConditionEmbedding::single(rng::gaussian_vector(5, 16));
        let c2 = ConditionEmbedding::single(rng::gaussian_vector(6, 16));
        let a = toy_generate(&spec, &c1, 42, DEFAULT_STEPS, &[]).unwrap();
        let b = toy_generate(&spec, &c2, 42, DEFAULT_STEPS, &[]).unwrap();
        let dist: f64 = a
            .values()
            .iter()
            .zip(b.values())
            .map(|(x, y)| (x - y).powi(2))
            .sum();
        assert!(dist > 0.0);
    }
}
