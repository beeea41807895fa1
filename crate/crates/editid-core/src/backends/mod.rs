//! Pluggable model backends behind a (kind, name) registry.
//!
//! Every pretrained model the pipeline touches — detectors, encoders,
//! scorers, the generator — sits behind one of the traits below. The crate
//! ships deterministic toy implementations (see [`toy`]) so the full
//! pipeline and every metric run without weights; real-model adapters are
//! out-of-tree plugins that conform to the same [`BackendDescriptor`]
//! contract.

pub mod toy;

use std::collections::BTreeMap;
use std::collections::HashMap;
use std::fmt;
use std::sync::{Arc, RwLock};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::image::ImageBuffer;

#[derive(Debug, Error)]
pub enum BackendError {
    #[error("no {kind} backend named '{name}'; registered: [{}]", registered.join(", "))]
    NotFound {
        kind: BackendKind,
        name: String,
        registered: Vec<String>,
    },
    #[error("implementation does not match descriptor kind {0}")]
    KindMismatch(BackendKind),
    #[error("descriptor for {kind} missing required output dim '{output}'")]
    MissingOutputDim { kind: BackendKind, output: String },
    #[error("layered encoder must declare layer_count >= 5, got {0}")]
    BadLayerCount(usize),
    #[error("descriptor output_dims must be nonempty")]
    EmptyOutputDims,
    #[error("backend '{name}' is not a {expected} backend")]
    WrongAccessor { name: String, expected: &'static str },
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("backend failure: {0}")]
    Failure(String),
}

/// The backend families named by the pipeline and the metric suite.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum BackendKind {
    FaceDetector,
    FaceEmbedder,
    LayeredImageEncoder,
    TextEncoder,
    GenericImageEncoder,
    FineImageEncoder,
    HeadPose,
    LandmarkDetector,
    ExpressionClassifier,
    StatisticFeatureExtractor,
    AestheticScorer,
    QualityScorer,
    Generator,
}

impl fmt::Display for BackendKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            BackendKind::FaceDetector => "face-detector",
            BackendKind::FaceEmbedder => "face-embedder",
            BackendKind::LayeredImageEncoder => "layered-image-encoder",
            BackendKind::TextEncoder => "text-encoder",
            BackendKind::GenericImageEncoder => "generic-image-encoder",
            BackendKind::FineImageEncoder => "fine-image-encoder",
            BackendKind::HeadPose => "head-pose",
            BackendKind::LandmarkDetector => "landmark-detector",
            BackendKind::ExpressionClassifier => "expression-classifier",
            BackendKind::StatisticFeatureExtractor => "statistic-feature-extractor",
            BackendKind::AestheticScorer => "aesthetic-scorer",
            BackendKind::QualityScorer => "quality-scorer",
            BackendKind::Generator => "generator",
        };
        f.write_str(s)
    }
}

/// Static description of a registered backend.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BackendDescriptor {
    pub kind: BackendKind,
    pub name: String,
    /// Output name -> dimension, e.g. {"embedding": 16}.
    pub output_dims: BTreeMap<String, usize>,
    /// Layered encoders only.
    pub layer_count: Option<usize>,
    pub deterministic: bool,
    pub seed: Option<u64>,
}

impl BackendDescriptor {
    pub fn new(kind: BackendKind, name: impl Into<String>) -> Self {
        Self {
            kind,
            name: name.into(),
            output_dims: BTreeMap::new(),
            layer_count: None,
            deterministic: true,
            seed: None,
        }
    }

    pub fn with_output(mut self, output: &str, dim: usize) -> Self {
        self.output_dims.insert(output.to_string(), dim);
        self
    }

    pub fn with_layer_count(mut self, n: usize) -> Self {
        self.layer_count = Some(n);
        self
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    fn validate(&self) -> Result<(), BackendError> {
        if self.output_dims.is_empty() {
            return Err(BackendError::EmptyOutputDims);
        }
        for required in required_outputs(self.kind) {
            if !self.output_dims.contains_key(*required) {
                return Err(BackendError::MissingOutputDim {
                    kind: self.kind,
                    output: required.to_string(),
                });
            }
        }
        if self.kind == BackendKind::LayeredImageEncoder {
            match self.layer_count {
                Some(n) if n >= 5 => {}
                Some(n) => return Err(BackendError::BadLayerCount(n)),
                None => return Err(BackendError::BadLayerCount(0)),
            }
        }
        Ok(())
    }
}

fn required_outputs(kind: BackendKind) -> &'static [&'static str] {
    match kind {
        BackendKind::FaceDetector | BackendKind::LandmarkDetector => &["landmarks"],
        BackendKind::FaceEmbedder
        | BackendKind::TextEncoder
        | BackendKind::GenericImageEncoder
        | BackendKind::FineImageEncoder
        | BackendKind::StatisticFeatureExtractor => &["embedding"],
        BackendKind::LayeredImageEncoder => &["layer", "cls"],
        BackendKind::HeadPose => &["angles"],
        BackendKind::ExpressionClassifier => &["classes"],
        BackendKind::AestheticScorer | BackendKind::QualityScorer => &["score"],
        BackendKind::Generator => &["image"],
    }
}

/// A generic embedding carrier with a derived L2 norm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmbeddingVector {
    pub values: Vec<f64>,
}

impl EmbeddingVector {
    pub fn new(values: Vec<f64>) -> Self {
        Self { values }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn l2_norm(&self) -> f64 {
        self.values.iter().map(|v| v * v).sum::<f64>().sqrt()
    }
}

/// A detected face: axis-aligned box plus five landmarks in image pixel
/// coordinates, ordered left eye, right eye, nose, left mouth, right mouth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FaceDetection {
    pub top: f64,
    pub left: f64,
    pub height: f64,
    pub width: f64,
    /// (x, y) pixel coordinates.
    pub landmarks: [[f64; 2]; 5],
}

/// Head orientation in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PoseAngles {
    pub yaw: f64,
    pub pitch: f64,
    pub roll: f64,
}

/// The seven expression classes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ExpressionLabel {
    Angry,
    Disgust,
    Fear,
    Happy,
    Sad,
    Surprise,
    Neutral,
}

impl ExpressionLabel {
    pub const ALL: [ExpressionLabel; 7] = [
        ExpressionLabel::Angry,
        ExpressionLabel::Disgust,
        ExpressionLabel::Fear,
        ExpressionLabel::Happy,
        ExpressionLabel::Sad,
        ExpressionLabel::Surprise,
        ExpressionLabel::Neutral,
    ];
}

// ---------------------------------------------------------------------------
// Backend traits
// ---------------------------------------------------------------------------

/// Face (and landmark) detection. `Ok(None)` — no face found — is a
/// first-class outcome every caller must handle.
pub trait FaceDetect: Send + Sync {
    fn detect(&self, image: &ImageBuffer) -> Result<Option<FaceDetection>, BackendError>;
}

pub trait EmbedImage: Send + Sync {
    fn embed(&self, image: &ImageBuffer) -> Result<Vec<f64>, BackendError>;
    fn dim(&self) -> usize;
}

pub trait EmbedText: Send + Sync {
    fn embed_text(&self, text: &str) -> Result<Vec<f64>, BackendError>;
    fn dim(&self) -> usize;
}

/// Multi-layer image encoder (the EvaCLIP stand-in). `layer_features`
/// returns one spatially pooled vector per layer, 1-based layer 1 first;
/// real adapters are expected to pool their token grids by spatial mean
/// (CLS excluded) before returning.
pub trait LayeredEncode: Send + Sync {
    fn layer_features(&self, image: &ImageBuffer) -> Result<Vec<Vec<f64>>, BackendError>;
    /// Final-layer CLS summary feature.
    fn cls(&self, image: &ImageBuffer) -> Result<Vec<f64>, BackendError>;
    fn layer_count(&self) -> usize;
    fn dim(&self) -> usize;
}

pub trait EstimatePose: Send + Sync {
    fn pose(&self, image: &ImageBuffer) -> Result<PoseAngles, BackendError>;
}

pub trait ClassifyExpression: Send + Sync {
    fn classify(&self, image: &ImageBuffer) -> Result<ExpressionLabel, BackendError>;
}

pub trait ScoreImage: Send + Sync {
    fn score(&self, image: &ImageBuffer) -> Result<f64, BackendError>;
    /// Native scale maximum (10 for the aesthetic predictor, 100 for MUSIQ).
    fn max_score(&self) -> f64;
}

/// Whole-image generator from a pre-embedded prompt.
pub trait Generate: Send + Sync {
    fn generate(
        &self,
        prompt_embedding: &[f64],
        seed: u64,
        steps: usize,
    ) -> Result<ImageBuffer, BackendError>;
}

/// The implementation side of a registration, tagged by family.
#[derive(Clone)]
pub enum BackendImpl {
    FaceDetector(Arc<dyn FaceDetect>),
    FaceEmbedder(Arc<dyn EmbedImage>),
    LayeredEncoder(Arc<dyn LayeredEncode>),
    TextEncoder(Arc<dyn EmbedText>),
    ImageEncoder(Arc<dyn EmbedImage>),
    HeadPose(Arc<dyn EstimatePose>),
    Expression(Arc<dyn ClassifyExpression>),
    Scorer(Arc<dyn ScoreImage>),
    Generator(Arc<dyn Generate>),
}

impl BackendImpl {
    fn matches(&self, kind: BackendKind) -> bool {
        matches!(
            (self, kind),
            (BackendImpl::FaceDetector(_), BackendKind::FaceDetector)
                | (BackendImpl::FaceDetector(_), BackendKind::LandmarkDetector)
                | (BackendImpl::FaceEmbedder(_), BackendKind::FaceEmbedder)
                | (BackendImpl::LayeredEncoder(_), BackendKind::LayeredImageEncoder)
                | (BackendImpl::TextEncoder(_), BackendKind::TextEncoder)
                | (BackendImpl::ImageEncoder(_), BackendKind::GenericImageEncoder)
                | (BackendImpl::ImageEncoder(_), BackendKind::FineImageEncoder)
                | (BackendImpl::ImageEncoder(_), BackendKind::StatisticFeatureExtractor)
                | (BackendImpl::HeadPose(_), BackendKind::HeadPose)
                | (BackendImpl::Expression(_), BackendKind::ExpressionClassifier)
                | (BackendImpl::Scorer(_), BackendKind::AestheticScorer)
                | (BackendImpl::Scorer(_), BackendKind::QualityScorer)
                | (BackendImpl::Generator(_), BackendKind::Generator)
        )
    }
}

impl fmt::Debug for BackendImpl {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let family = match self {
            BackendImpl::FaceDetector(_) => "FaceDetector",
            BackendImpl::FaceEmbedder(_) => "FaceEmbedder",
            BackendImpl::LayeredEncoder(_) => "LayeredEncoder",
            BackendImpl::TextEncoder(_) => "TextEncoder",
            BackendImpl::ImageEncoder(_) => "ImageEncoder",
            BackendImpl::HeadPose(_) => "HeadPose",
            BackendImpl::Expression(_) => "Expression",
            BackendImpl::Scorer(_) => "Scorer",
            BackendImpl::Generator(_) => "Generator",
        };
        write!(f, "BackendImpl::{family}")
    }
}

/// A live registration: descriptor plus implementation.
#[derive(Debug)]
pub struct Registered {
    pub descriptor: BackendDescriptor,
    pub implementation: BackendImpl,
}

pub type Handle = Arc<Registered>;

impl Registered {
    pub fn as_face_detector(&self) -> Result<&Arc<dyn FaceDetect>, BackendError> {
        match &self.implementation {
            BackendImpl::FaceDetector(d) => Ok(d),
            _ => Err(self.wrong("face detector")),
        }
    }

    pub fn as_image_embedder(&self) -> Result<&Arc<dyn EmbedImage>, BackendError> {
        match &self.implementation {
            BackendImpl::FaceEmbedder(e) | BackendImpl::ImageEncoder(e) => Ok(e),
            _ => Err(self.wrong("image embedder")),
        }
    }

    pub fn as_layered_encoder(&self) -> Result<&Arc<dyn LayeredEncode>, BackendError> {
        match &self.implementation {
            BackendImpl::LayeredEncoder(e) => Ok(e),
            _ => Err(self.wrong("layered encoder")),
        }
    }

    pub fn as_text_encoder(&self) -> Result<&Arc<dyn EmbedText>, BackendError> {
        match &self.implementation {
            BackendImpl::TextEncoder(e) => Ok(e),
            _ => Err(self.wrong("text encoder")),
        }
    }

    pub fn as_head_pose(&self) -> Result<&Arc<dyn EstimatePose>, BackendError> {
        match &self.implementation {
            BackendImpl::HeadPose(e) => Ok(e),
            _ => Err(self.wrong("head pose estimator")),
        }
    }

    pub fn as_expression(&self) -> Result<&Arc<dyn ClassifyExpression>, BackendError> {
        match &self.implementation {
            BackendImpl::Expression(e) => Ok(e),
            _ => Err(self.wrong("expression classifier")),
        }
    }

    pub fn as_scorer(&self) -> Result<&Arc<dyn ScoreImage>, BackendError> {
        match &self.implementation {
            BackendImpl::Scorer(s) => Ok(s),
            _ => Err(self.wrong("scorer")),
        }
    }

    pub fn as_generator(&self) -> Result<&Arc<dyn Generate>, BackendError> {
        match &self.implementation {
            BackendImpl::Generator(g) => Ok(g),
            _ => Err(self.wrong("generator")),
        }
    }

    fn wrong(&self, expected: &'static str) -> BackendError {
        BackendError::WrongAccessor {
            name: self.descriptor.name.clone(),
            expected,
        }
    }
}

/// Read-mostly registry; registration replaces atomically with respect to
/// resolution.
#[derive(Default)]
pub struct Registry {
    inner: RwLock<HashMap<(BackendKind, String), Handle>>,
}

impl Registry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Register (or atomically replace) a backend under (kind, name).
    pub fn register(
        &self,
        descriptor: BackendDescriptor,
        implementation: BackendImpl,
    ) -> Result<Handle, BackendError> {
        descriptor.validate()?;
        if !implementation.matches(descriptor.kind) {
            return Err(BackendError::KindMismatch(descriptor.kind));
        }
        let key = (descriptor.kind, descriptor.name.clone());
        let handle = Arc::new(Registered {
            descriptor,
            implementation,
        });
        let mut map = self.inner.write().expect("registry lock poisoned");
        map.insert(key, Arc::clone(&handle));
        Ok(handle)
    }

    pub fn resolve(&self, kind: BackendKind, name: &str) -> Result<Handle, BackendError> {
        let map = self.inner.read().expect("registry lock poisoned");
        map.get(&(kind, name.to_string())).cloned().ok_or_else(|| {
            let mut registered: Vec<String> = map
                .keys()
                .filter(|(k, _)| *k == kind)
                .map(|(_, n)| n.clone())
                .collect();
            registered.sort();
            BackendError::NotFound {
                kind,
                name: name.to_string(),
                registered,
            }
        })
    }

    pub fn descriptors(&self) -> Vec<BackendDescriptor> {
        let map = self.inner.read().expect("registry lock poisoned");
        let mut out: Vec<BackendDescriptor> =
            map.values().map(|h| h.descriptor.clone()).collect();
        out.sort_by(|a, b| (a.kind, &a.name).cmp(&(b.kind, &b.name)));
        out
    }
}
