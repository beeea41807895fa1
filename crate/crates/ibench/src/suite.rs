//! The backend suite a run resolves against. Toy backends are registered
//! into the shared registry under fixed names and then resolved back out,
//! so swapping in real adapters only means registering different
//! implementations under the same names.

use std::sync::Arc;

use anyhow::Result;

use editid_core::backends::toy::{
    ToyExpressionClassifier, ToyFaceDetector, ToyFaceEmbedder, ToyHeadPose, ToyImageEncoder,
    ToyLayeredEncoder, ToyScorer, ToyTextEncoder,
};
use editid_core::backends::{
    BackendDescriptor, BackendImpl, BackendKind, ClassifyExpression, EmbedImage, EmbedText,
    EstimatePose, FaceDetect, LayeredEncode, Registry, ScoreImage,
};
use editid_core::rng;

use crate::config::Config;

/// Encoder layer count of the toy layered encoder.
pub const TOY_LAYER_COUNT: usize = 23;
/// Feature dim used by the statistics extractor feeding the distribution
/// metric (kept small so desk-scale covariances stay cheap).
pub const STAT_DIM: usize = 4;

/// Resolved handles for every backend family a run touches.
pub struct Suite {
    pub detector: Arc<dyn FaceDetect>,
    pub face_embedder: Arc<dyn EmbedImage>,
    pub layered_encoder: Arc<dyn LayeredEncode>,
    pub text_encoder: Arc<dyn EmbedText>,
    pub clip_image: Arc<dyn EmbedImage>,
    pub fine_image: Arc<dyn EmbedImage>,
    pub stat_extractor: Arc<dyn EmbedImage>,
    pub head_pose: Arc<dyn EstimatePose>,
    pub expression: Arc<dyn ClassifyExpression>,
    pub aesthetic: Arc<dyn ScoreImage>,
    pub quality: Arc<dyn ScoreImage>,
    pub descriptors: Vec<BackendDescriptor>,
}

impl Suite {
    /// Register the deterministic toy backends (seeds derived from the
    /// config's backend root seed) and resolve them.
    pub fn toy(config: &Config) -> Result<Self> {
        let root = config.backends.seed;
        let local_dim = config.feature_branch.local_dim;
        let cond_dim = config.sampler.cond_dim;
        let registry = Registry::new();

        let seed = |tag: &str| rng::mix(root, tag);

        registry.register(
            BackendDescriptor::new(BackendKind::FaceDetector, "toy-detector")
                .with_output("landmarks", 5),
            BackendImpl::FaceDetector(Arc::new(ToyFaceDetector)),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::FaceEmbedder, "toy-face-embedder")
                .with_output("embedding", local_dim)
                .with_seed(seed("face")),
            BackendImpl::FaceEmbedder(Arc::new(ToyFaceEmbedder::new(local_dim, seed("face")))),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::LayeredImageEncoder, "toy-layered-encoder")
                .with_output("layer", local_dim)
                .with_output("cls", local_dim)
                .with_layer_count(TOY_LAYER_COUNT)
                .with_seed(seed("layered")),
            BackendImpl::LayeredEncoder(Arc::new(ToyLayeredEncoder::new(
                TOY_LAYER_COUNT,
                local_dim,
                seed("layered"),
            ))),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::TextEncoder, "toy-text-encoder")
                .with_output("embedding", cond_dim)
                .with_seed(seed("text")),
            BackendImpl::TextEncoder(Arc::new(ToyTextEncoder::new(cond_dim, seed("text")))),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::GenericImageEncoder, "toy-image-encoder")
                .with_output("embedding", cond_dim)
                .with_seed(seed("clip-image")),
            BackendImpl::ImageEncoder(Arc::new(ToyImageEncoder::new(cond_dim, seed("clip-image")))),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::FineImageEncoder, "toy-fine-encoder")
                .with_output("embedding", local_dim)
                .with_seed(seed("fine")),
            BackendImpl::ImageEncoder(Arc::new(ToyImageEncoder::new(local_dim, seed("fine")))),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::StatisticFeatureExtractor, "toy-stat-extractor")
                .with_output("embedding", STAT_DIM)
                .with_seed(seed("stat")),
            BackendImpl::ImageEncoder(Arc::new(ToyImageEncoder::new(STAT_DIM, seed("stat")))),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::HeadPose, "toy-head-pose")
                .with_output("angles", 3)
                .with_seed(seed("pose")),
            BackendImpl::HeadPose(Arc::new(ToyHeadPose::new(seed("pose")))),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::ExpressionClassifier, "toy-expression")
                .with_output("classes", 7)
                .with_seed(seed("expression")),
            BackendImpl::Expression(Arc::new(ToyExpressionClassifier::new(seed("expression")))),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::AestheticScorer, "toy-aesthetic")
                .with_output("score", 1)
                .with_seed(seed("aesthetic")),
            BackendImpl::Scorer(Arc::new(ToyScorer::new(seed("aesthetic"), 10.0))),
        )?;
        registry.register(
            BackendDescriptor::new(BackendKind::QualityScorer, "toy-quality")
                .with_output("score", 1)
                .with_seed(seed("quality")),
            BackendImpl::Scorer(Arc::new(ToyScorer::new(seed("quality"), 100.0))),
        )?;

        let descriptors = registry.descriptors();
        Ok(Self {
            detector: registry
                .resolve(BackendKind::FaceDetector, "toy-detector")?
                .as_face_detector()?
                .clone(),
            face_embedder: registry
                .resolve(BackendKind::FaceEmbedder, "toy-face-embedder")?
                .as_image_embedder()?
                .clone(),
            layered_encoder: registry
                .resolve(BackendKind::LayeredImageEncoder, "toy-layered-encoder")?
                .as_layered_encoder()?
                .clone(),
            text_encoder: registry
                .resolve(BackendKind::TextEncoder, "toy-text-encoder")?
                .as_text_encoder()?
                .clone(),
            clip_image: registry
                .resolve(BackendKind::GenericImageEncoder, "toy-image-encoder")?
                .as_image_embedder()?
                .clone(),
            fine_image: registry
                .resolve(BackendKind::FineImageEncoder, "toy-fine-encoder")?
                .as_image_embedder()?
                .clone(),
            stat_extractor: registry
                .resolve(BackendKind::StatisticFeatureExtractor, "toy-stat-extractor")?
                .as_image_embedder()?
                .clone(),
            head_pose: registry
                .resolve(BackendKind::HeadPose, "toy-head-pose")?
                .as_head_pose()?
                .clone(),
            expression: registry
                .resolve(BackendKind::ExpressionClassifier, "toy-expression")?
                .as_expression()?
                .clone(),
            aesthetic: registry
                .resolve(BackendKind::AestheticScorer, "toy-aesthetic")?
                .as_scorer()?
                .clone(),
            quality: registry
                .resolve(BackendKind::QualityScorer, "toy-quality")?
                .as_scorer()?
                .clone(),
            descriptors,
        })
    }
}
