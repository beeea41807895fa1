//! Deterministic toy backends.
//!
//! Each one is a pure function of (inputs, seed): the image is mean-pooled
//! to an 8x8 grayscale grid and pushed through fixed seeded Gaussian
//! projections. They carry no semantics beyond determinism and
//! distinguishability, which is all the desk-scale pipeline and metric
//! tests need.

use crate::backends::{
    BackendError, ClassifyExpression, EmbedImage, EmbedText, EstimatePose, ExpressionLabel,
    FaceDetect, FaceDetection, LayeredEncode, PoseAngles, ScoreImage,
};
use crate::image::ImageBuffer;
use crate::rng;

/// Landmark positions as (x, y) fractions of the detection box, matching the
/// canonical alignment template: left eye, right eye, nose, mouth corners.
pub const LANDMARK_FRACTIONS: [[f64; 2]; 5] = [
    [0.31, 0.35],
    [0.69, 0.35],
    [0.50, 0.55],
    [0.35, 0.75],
    [0.65, 0.75],
];

/// Fixed-rule detector: the face box is the centered square of side
/// min(H, W)/2, landmarks at [`LANDMARK_FRACTIONS`] inside it.
#[derive(Debug, Default, Clone)]
pub struct ToyFaceDetector;

impl FaceDetect for ToyFaceDetector {
    fn detect(&self, image: &ImageBuffer) -> Result<Option<FaceDetection>, BackendError> {
        let side = (image.height().min(image.width()) as f64) / 2.0;
        let top = (image.height() as f64 - side) / 2.0;
        let left = (image.width() as f64 - side) / 2.0;
        let mut landmarks = [[0.0; 2]; 5];
        for (i, [fx, fy]) in LANDMARK_FRACTIONS.iter().enumerate() {
            landmarks[i] = [left + fx * side, top + fy * side];
        }
        Ok(Some(FaceDetection {
            top,
            left,
            height: side,
            width: side,
            landmarks,
        }))
    }
}

/// A detector that never finds a face, for fault injection.
#[derive(Debug, Default, Clone)]
pub struct NeverDetects;

impl FaceDetect for NeverDetects {
    fn detect(&self, _image: &ImageBuffer) -> Result<Option<FaceDetection>, BackendError> {
        Ok(None)
    }
}

/// Seeded random projection of the 8x8 grayscale downsample, one projection
/// per layer with the layer index folded into the seed.
pub fn toy_layered_encode(
    image: &ImageBuffer,
    layer_count: usize,
    dim: usize,
    seed: u64,
) -> Result<Vec<Vec<f64>>, BackendError> {
    if layer_count < 1 || dim < 1 {
        return Err(BackendError::InvalidInput(
            "layer_count and dim must be >= 1".into(),
        ));
    }
    let ds = image.gray_downsample_8x8();
    Ok((1..=layer_count)
        .map(|layer| rng::project(rng::mix_index(seed, "layer", layer), &ds, dim))
        .collect())
}

#[derive(Debug, Clone)]
pub struct ToyLayeredEncoder {
    layer_count: usize,
    dim: usize,
    seed: u64,
}

impl ToyLayeredEncoder {
    pub fn new(layer_count: usize, dim: usize, seed: u64) -> Self {
        Self {
            layer_count,
            dim,
            seed,
        }
    }
}

impl LayeredEncode for ToyLayeredEncoder {
    fn layer_features(&self, image: &ImageBuffer) -> Result<Vec<Vec<f64>>, BackendError> {
        toy_layered_encode(image, self.layer_count, self.dim, self.seed)
    }

    fn cls(&self, image: &ImageBuffer) -> Result<Vec<f64>, BackendError> {
        let ds = image.gray_downsample_8x8();
        Ok(rng::project(rng::mix(self.seed, "cls"), &ds, self.dim))
    }

    fn layer_count(&self) -> usize {
        self.layer_count
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Debug, Clone)]
pub struct ToyFaceEmbedder {
    dim: usize,
    seed: u64,
}

impl ToyFaceEmbedder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }
}

impl EmbedImage for ToyFaceEmbedder {
    fn embed(&self, image: &ImageBuffer) -> Result<Vec<f64>, BackendError> {
        let ds = image.gray_downsample_8x8();
        Ok(rng::project(rng::mix(self.seed, "face-embed"), &ds, self.dim))
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Generic image encoder (CLIP-image / DINO / InceptionV3 stand-ins share
/// this shape under different seeds).
#[derive(Debug, Clone)]
pub struct ToyImageEncoder {
    dim: usize,
    seed: u64,
}

impl ToyImageEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }
}

impl EmbedImage for ToyImageEncoder {
    fn embed(&self, image: &ImageBuffer) -> Result<Vec<f64>, BackendError> {
        let ds = image.gray_downsample_8x8();
        Ok(rng::project(rng::mix(self.seed, "image-embed"), &ds, self.dim))
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

/// Text encoder: byte histogram of the prompt through a seeded projection.
#[derive(Debug, Clone)]
pub struct ToyTextEncoder {
    dim: usize,
    seed: u64,
}

impl ToyTextEncoder {
    pub fn new(dim: usize, seed: u64) -> Self {
        Self { dim, seed }
    }
}

impl EmbedText for ToyTextEncoder {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError> {
        let mut hist = [0.0f64; 256];
        for b in text.bytes() {
            hist[b as usize] += 1.0;
        }
        let total = text.len().max(1) as f64;
        for h in hist.iter_mut() {
            *h /= total;
        }
        Ok(rng::project(rng::mix(self.seed, "text-embed"), &hist, self.dim))
    }

    fn dim(&self) -> usize {
        self.dim
    }
}

#[derive(Debug, Clone)]
pub struct ToyHeadPose {
    seed: u64,
}

impl ToyHeadPose {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl EstimatePose for ToyHeadPose {
    fn pose(&self, image: &ImageBuffer) -> Result<PoseAngles, BackendError> {
        let ds = image.gray_downsample_8x8();
        let p = rng::project(rng::mix(self.seed, "pose"), &ds, 3);
        Ok(PoseAngles {
            yaw: 90.0 * p[0].tanh(),
            pitch: 60.0 * p[1].tanh(),
            roll: 45.0 * p[2].tanh(),
        })
    }
}

#[derive(Debug, Clone)]
pub struct ToyExpressionClassifier {
    seed: u64,
}

impl ToyExpressionClassifier {
    pub fn new(seed: u64) -> Self {
        Self { seed }
    }
}

impl ClassifyExpression for ToyExpressionClassifier {
    fn classify(&self, image: &ImageBuffer) -> Result<ExpressionLabel, BackendError> {
        let ds = image.gray_downsample_8x8();
        let logits = rng::project(rng::mix(self.seed, "expression"), &ds, 7);
        let argmax = logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).expect("finite logits"))
            .map(|(i, _)| i)
            .unwrap_or(6);
        Ok(ExpressionLabel::ALL[argmax])
    }
}

/// Scorer squashing a seeded projection into `[0, max_score]` via a
/// logistic; `max_score` is 10 for the aesthetic stand-in and 100 for the
/// quality stand-in.
#[derive(Debug, Clone)]
pub struct ToyScorer {
    seed: u64,
    max_score: f64,
}

impl ToyScorer {
    pub fn new(seed: u64, max_score: f64) -> Self {
        Self { seed, max_score }
    }
}

impl ScoreImage for ToyScorer {
    fn score(&self, image: &ImageBuffer) -> Result<f64, BackendError> {
        let ds = image.gray_downsample_8x8();
        let raw = rng::project(rng::mix(self.seed, "score"), &ds, 1)[0];
        Ok(self.max_score / (1.0 + (-raw).exp()))
    }

    fn max_score(&self) -> f64 {
        self.max_score
    }
}
