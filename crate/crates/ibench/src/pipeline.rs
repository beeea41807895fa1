//! Per-case execution: build the edit feature from the ID image, generate
//! the paired images (same seed with and without the ID branch), and score
//! the configured metrics.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use editid_core::backends::ExpressionLabel;
use editid_core::extract::{
    detect_align_segment, extract_all_layers, extract_global, select_slots, AblationMask,
    ExtractError,
};
use editid_core::fusion::{embed_id, fuse, map_slots, materialize_slots, EditFeature};
use editid_core::image::ImageBuffer;
use editid_core::integrate::apply_integration;
use editid_core::metrics::{
    self, LandmarkNorm, MetricError,
};
use editid_core::sampler::{toy_generate, ConditionEmbedding, FlowError, StepHook};
use editid_core::selection::build_selection;

use crate::config::Config;
use crate::data::EvalCase;
use crate::suite::Suite;

/// A flat metric record: value, the backend's raw score when one exists,
/// and an error code when the metric degraded to null.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricValue {
    pub value: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub raw: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error_code: Option<String>,
}

impl MetricValue {
    pub fn ok(value: f64) -> Self {
        Self {
            value: Some(value),
            raw: None,
            error_code: None,
        }
    }

    pub fn with_raw(value: f64, raw: f64) -> Self {
        Self {
            value: Some(value),
            raw: Some(raw),
            error_code: None,
        }
    }

    pub fn null(code: impl Into<String>) -> Self {
        Self {
            value: None,
            raw: None,
            error_code: Some(code.into()),
        }
    }
}

/// Stable error codes for per-case nulls.
pub fn error_code(err: &MetricError) -> String {
    match err {
        MetricError::UndefinedSimilarity => "undefined-similarity".into(),
        MetricError::FaceNotFound { which } => format!("face-not-found:{}", which.replace(' ', "-")),
        MetricError::DimMismatch { .. } => "dim-mismatch".into(),
        MetricError::DegenerateLandmarks => "degenerate-landmarks".into(),
        MetricError::EmptyList => "empty-list".into(),
        MetricError::TooFewSamples { .. } => "too-few-samples".into(),
        MetricError::Backend(_) => "backend-failure".into(),
        MetricError::Image(_) => "image-error".into(),
    }
}

/// Generated images for one case.
#[derive(Debug, Clone)]
pub struct CaseArtifacts {
    pub image_without_id: ImageBuffer,
    pub image_with_id: ImageBuffer,
    /// Set when the feature branch could not be built (e.g. no face in the
    /// ID image); generation then fell back to the plain sampler.
    pub branch_error: Option<String>,
}

/// Build the edit feature for an ID image through the full feature branch.
pub fn build_edit_feature(
    suite: &Suite,
    config: &Config,
    id_image: &ImageBuffer,
) -> Result<EditFeature, anyhow::Error> {
    let crop = detect_align_segment(id_image, suite.detector.as_ref())?;
    let mask = AblationMask::none();
    let global = extract_global(
        &crop,
        suite.face_embedder.as_ref(),
        suite.layered_encoder.as_ref(),
        &mask,
    )?;
    let layers = extract_all_layers(&crop, suite.layered_encoder.as_ref())?;
    let stack = match config.feature_branch.layer_selection()? {
        // an explicit selection string places layers and zeros verbatim
        Some(selection) => select_slots(&layers, &selection)?,
        None => {
            let picks = &config.feature_branch.picks;
            let strategy = config.feature_branch.shift_strategy()?;
            let selection = build_selection(picks, strategy)?;
            materialize_slots(&layers, &selection, strategy, picks)?
        }
    };
    let spec = config.feature_branch.network_spec();
    let id_embedding = embed_id(&global, &spec)?;
    let mapped = map_slots(&stack, &spec)?;
    Ok(fuse(&id_embedding, &mapped)?)
}

fn is_no_face(err: &anyhow::Error) -> bool {
    matches!(err.downcast_ref::<ExtractError>(), Some(ExtractError::NoFaceFound))
}

/// Generate both images for a case. The with-ID image shares the seed and
/// initial noise with the without-ID image so the paired metrics isolate
/// the effect of the ID branch.
pub fn generate_case(
    suite: &Suite,
    config: &Config,
    case: &EvalCase,
    id_image: &ImageBuffer,
) -> Result<CaseArtifacts, anyhow::Error> {
    let spec = config.sampler.vector_field_spec();
    let steps = config.sampler.steps;
    let cond = ConditionEmbedding::single(suite.text_encoder.embed_text(&case.prompt)?);

    let image_without_id = toy_generate(&spec, &cond, case.seed, steps, &[])?;

    let (edit, branch_error) = match build_edit_feature(suite, config, id_image) {
        Ok(edit) => (Some(edit), None),
        Err(err) if is_no_face(&err) => (None, Some("face-not-found:id-image".to_string())),
        Err(err) => return Err(err),
    };

    let image_with_id = match &edit {
        Some(edit) => {
            let integration = config
                .integration
                .integration_config(config.feature_branch.id_dim)?;
            let hook = |step: usize, state| {
                apply_integration(&state, edit, &integration, step, steps)
                    .map_err(|e| FlowError::Hook {
                        step,
                        message: e.to_string(),
                    })
            };
            let hooks: [StepHook<'_>; 1] = [&hook];
            toy_generate(&spec, &cond, case.seed, steps, &hooks)?
        }
        None => image_without_id.clone(),
    };

    Ok(CaseArtifacts {
        image_without_id,
        image_with_id,
        branch_error,
    })
}

/// Everything scored for one case: the flat metric map plus the raw
/// ingredients of the aggregate-level metrics.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CaseEvaluation {
    pub metrics: BTreeMap<String, MetricValue>,
    pub expressions: Option<(ExpressionLabel, ExpressionLabel)>,
    pub stat_features_with: Option<Vec<f64>>,
    pub stat_features_without: Option<Vec<f64>>,
}

fn record<T, F>(
    metrics: &mut BTreeMap<String, MetricValue>,
    enabled: bool,
    name: &str,
    compute: F,
    to_value: fn(T) -> MetricValue,
) where
    F: FnOnce() -> Result<T, MetricError>,
{
    if !enabled {
        return;
    }
    let entry = match compute() {
        Ok(v) => to_value(v),
        Err(e) => MetricValue::null(error_code(&e)),
    };
    metrics.insert(name.to_string(), entry);
}

/// Score every enabled metric for one case.
pub fn score_case(
    suite: &Suite,
    config: &Config,
    case: &EvalCase,
    id_image: &ImageBuffer,
    artifacts: &CaseArtifacts,
) -> Result<CaseEvaluation, anyhow::Error> {
    let m = &config.metrics;
    let norm: LandmarkNorm = m.norm()?;
    let with_id = &artifacts.image_with_id;
    let without_id = &artifacts.image_without_id;
    let mut out = BTreeMap::new();

    record(
        &mut out,
        m.is_enabled("aesthetic"),
        "aesthetic",
        || metrics::aesthetic(with_id, suite.aesthetic.as_ref()),
        |s| MetricValue::with_raw(s.value, s.raw),
    );
    record(
        &mut out,
        m.is_enabled("imaging_quality"),
        "imaging_quality",
        || metrics::imaging_quality(with_id, suite.quality.as_ref()),
        |s| MetricValue::with_raw(s.value, s.raw),
    );
    if m.is_enabled("posediv_yaw") || m.is_enabled("posediv_pitch") || m.is_enabled("posediv_roll")
    {
        match metrics::posediv(id_image, with_id, suite.detector.as_ref(), suite.head_pose.as_ref())
        {
            Ok(angles) => {
                for (name, v) in [
                    ("posediv_yaw", angles.yaw),
                    ("posediv_pitch", angles.pitch),
                    ("posediv_roll", angles.roll),
                ] {
                    if m.is_enabled(name) {
                        out.insert(name.to_string(), MetricValue::ok(v));
                    }
                }
            }
            Err(e) => {
                let code = error_code(&e);
                for name in ["posediv_yaw", "posediv_pitch", "posediv_roll"] {
                    if m.is_enabled(name) {
                        out.insert(name.to_string(), MetricValue::null(code.clone()));
                    }
                }
            }
        }
    }
    record(
        &mut out,
        m.is_enabled("landmarkdiff"),
        "landmarkdiff",
        || metrics::landmarkdiff(id_image, with_id, suite.detector.as_ref(), norm),
        MetricValue::ok,
    );
    record(
        &mut out,
        m.is_enabled("facesim"),
        "facesim",
        || metrics::facesim(id_image, with_id, suite.detector.as_ref(), suite.face_embedder.as_ref()),
        MetricValue::ok,
    );
    record(
        &mut out,
        m.is_enabled("clipi"),
        "clipi",
        || metrics::clip_i(with_id, without_id, suite.clip_image.as_ref()),
        MetricValue::ok,
    );
    record(
        &mut out,
        m.is_enabled("clipt"),
        "clipt",
        || {
            metrics::clip_t(
                &case.prompt,
                with_id,
                suite.text_encoder.as_ref(),
                suite.clip_image.as_ref(),
            )
        },
        MetricValue::ok,
    );
    record(
        &mut out,
        m.is_enabled("dino"),
        "dino",
        || metrics::dino_sim(id_image, with_id, suite.fine_image.as_ref()),
        MetricValue::ok,
    );
    record(
        &mut out,
        m.is_enabled("fgis"),
        "fgis",
        || metrics::fgis(id_image, with_id, suite.detector.as_ref(), suite.fine_image.as_ref()),
        MetricValue::ok,
    );

    // expression pair for the change-rate metric; per-case value is the
    // 0/1 change indicator so the aggregate is the plain mean
    let mut expressions = None;
    if m.is_enabled("exprdiv") {
        let classify = |image: &ImageBuffer, which: &'static str| {
            let det = suite
                .detector
                .detect(image)?
                .ok_or(MetricError::FaceNotFound { which })?;
            let crop = image.crop(
                det.top.max(0.0).round() as usize,
                det.left.max(0.0).round() as usize,
                det.height.round() as usize,
                det.width.round() as usize,
            )?;
            Ok::<ExpressionLabel, MetricError>(suite.expression.classify(&crop)?)
        };
        match (classify(id_image, "id image"), classify(with_id, "generated image")) {
            (Ok(a), Ok(b)) => {
                expressions = Some((a, b));
                out.insert(
                    "exprdiv".to_string(),
                    MetricValue::ok(if a == b { 0.0 } else { 1.0 }),
                );
            }
            (Err(e), _) | (_, Err(e)) => {
                out.insert("exprdiv".to_string(), MetricValue::null(error_code(&e)));
            }
        }
    }

    let (stat_with, stat_without) = if m.is_enabled("fid") {
        (
            Some(suite.stat_extractor.embed(with_id)?),
            Some(suite.stat_extractor.embed(without_id)?),
        )
    } else {
        (None, None)
    };

    Ok(CaseEvaluation {
        metrics: out,
        expressions,
        stat_features_with: stat_with,
        stat_features_without: stat_without,
    })
}
