//! Character feature extraction: detection + alignment, global feature
//! assembly (face embedding concatenated with the encoder CLS feature),
//! all-layer local features, slot selection, and ablation masks.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::backends::{BackendError, EmbedImage, EmbeddingVector, FaceDetect, FaceDetection, LayeredEncode};
use crate::image::{ImageBuffer, ImageError};
use crate::selection::{LayerSelection, SlotPick, SLOT_COUNT};

/// Canonical 5-point alignment template as (x, y) fractions of the crop:
/// left eye, right eye, nose, mouth corners. Inter-eye distance is 38% of
/// the crop width.
pub const CANONICAL_TEMPLATE: [[f64; 2]; 5] = [
    [0.31, 0.35],
    [0.69, 0.35],
    [0.50, 0.55],
    [0.35, 0.75],
    [0.65, 0.75],
];

#[derive(Debug, Error)]
pub enum ExtractError {
    #[error("no face found in image")]
    NoFaceFound,
    #[error("{what} returned dim {found}, descriptor declares {expected}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },
    #[error("layer index {index} outside [1, {layer_count}]")]
    LayerIndexOutOfRange { index: usize, layer_count: usize },
    #[error("slot {slot} is strategy-synthesized; materialize it through the fusion module")]
    UnmaterializedSlot { slot: usize },
    #[error("ablation mask slot {0} outside 1..=5")]
    BadMaskSlot(usize),
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// An aligned face crop with its five landmarks in crop coordinates.
#[derive(Debug, Clone)]
pub struct FaceCrop {
    pub image: ImageBuffer,
    /// Detection box in source-image coordinates.
    pub detection: FaceDetection,
    /// Landmarks after alignment, (x, y) in crop coordinates.
    pub landmarks: [[f64; 2]; 5],
    pub aligned: bool,
    /// True only when a segmentation backend refined the crop; the toy
    /// pipeline has none, so the aligned box crop is used as-is.
    pub segmented: bool,
}

/// Eq-6-shaped global feature: the concatenation is exactly
/// `[face_part; cls_part]`.
#[derive(Debug, Clone, PartialEq)]
pub struct GlobalFeature {
    pub face_part: EmbeddingVector,
    pub cls_part: EmbeddingVector,
}

impl GlobalFeature {
    pub fn concat(&self) -> EmbeddingVector {
        let mut values = self.face_part.values.clone();
        values.extend_from_slice(&self.cls_part.values);
        EmbeddingVector::new(values)
    }

    pub fn dim(&self) -> usize {
        self.face_part.dim() + self.cls_part.dim()
    }
}

/// Every encoder layer's pooled feature, 1-based layer 1 first.
#[derive(Debug, Clone, PartialEq)]
pub struct LayerFeatureSet {
    per_layer: Vec<Vec<f64>>,
}

impl LayerFeatureSet {
    pub fn new(per_layer: Vec<Vec<f64>>) -> Self {
        Self { per_layer }
    }

    pub fn layer_count(&self) -> usize {
        self.per_layer.len()
    }

    pub fn dim(&self) -> usize {
        self.per_layer.first().map_or(0, Vec::len)
    }

    /// 1-based access.
    pub fn layer(&self, index: usize) -> Result<&[f64], ExtractError> {
        if index == 0 || index > self.per_layer.len() {
            return Err(ExtractError::LayerIndexOutOfRange {
                index,
                layer_count: self.per_layer.len(),
            });
        }
        Ok(&self.per_layer[index - 1])
    }
}

/// Where a stack slot's contents came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotProvenance {
    Layer(usize),
    Zero,
    Synthesized,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Slot {
    pub provenance: SlotProvenance,
    pub values: Vec<f64>,
}

impl Slot {
    pub fn zero(dim: usize) -> Self {
        Self {
            provenance: SlotProvenance::Zero,
            values: vec![0.0; dim],
        }
    }
}

/// Exactly five slots of local features, each a layer pick, an explicit
/// zero, or a strategy-synthesized vector.
#[derive(Debug, Clone, PartialEq)]
pub struct LocalFeatureStack {
    slots: [Slot; SLOT_COUNT],
}

impl LocalFeatureStack {
    pub fn new(slots: [Slot; SLOT_COUNT]) -> Self {
        Self { slots }
    }

    pub fn slots(&self) -> &[Slot; SLOT_COUNT] {
        &self.slots
    }

    pub fn dim(&self) -> usize {
        self.slots[0].values.len()
    }
}

/// Which feature groups an ablation run zeroes (the grayed-out boxes of the
/// feature-importance figures).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct AblationMask {
    pub zero_face: bool,
    pub zero_cls: bool,
    pub zero_local: bool,
    /// 1-based slot positions to zero.
    #[serde(default)]
    pub zero_slots: BTreeSet<usize>,
}

impl AblationMask {
    pub fn none() -> Self {
        Self::default()
    }

    pub fn validate(&self) -> Result<(), ExtractError> {
        for &s in &self.zero_slots {
            if !(1..=SLOT_COUNT).contains(&s) {
                return Err(ExtractError::BadMaskSlot(s));
            }
        }
        Ok(())
    }

    /// Mask union; ablations compose.
    pub fn union(&self, other: &Self) -> Self {
        Self {
            zero_face: self.zero_face || other.zero_face,
            zero_cls: self.zero_cls || other.zero_cls,
            zero_local: self.zero_local || other.zero_local,
            zero_slots: self.zero_slots.union(&other.zero_slots).copied().collect(),
        }
    }

    /// True when the whole character branch is zeroed and generation
    /// degrades to the plain sampler.
    pub fn disables_branch(&self) -> bool {
        self.zero_face
            && self.zero_cls
            && (self.zero_local || self.zero_slots.len() == SLOT_COUNT)
    }
}

/// Solve the 2-point similarity transform (rotation + uniform scale +
/// translation) mapping `src` onto `dst`, as complex coefficients (a, b)
/// with p -> a*p + b.
fn similarity_from_eyes(src: [[f64; 2]; 2], dst: [[f64; 2]; 2]) -> ((f64, f64), (f64, f64)) {
    let (s1, s2) = (src[0], src[1]);
    let (d1, d2) = (dst[0], dst[1]);
    let sv = (s2[0] - s1[0], s2[1] - s1[1]);
    let dv = (d2[0] - d1[0], d2[1] - d1[1]);
    let denom = sv.0 * sv.0 + sv.1 * sv.1;
    // a = dv / sv in complex arithmetic
    let a = (
        (dv.0 * sv.0 + dv.1 * sv.1) / denom,
        (dv.1 * sv.0 - dv.0 * sv.1) / denom,
    );
    // b = d1 - a * s1
    let b = (
        d1[0] - (a.0 * s1[0] - a.1 * s1[1]),
        d1[1] - (a.1 * s1[0] + a.0 * s1[1]),
    );
    (a, b)
}

fn apply_similarity(a: (f64, f64), b: (f64, f64), p: [f64; 2]) -> [f64; 2] {
    [
        a.0 * p[0] - a.1 * p[1] + b.0,
        a.1 * p[0] + a.0 * p[1] + b.1,
    ]
}

fn invert_similarity(a: (f64, f64), b: (f64, f64), q: [f64; 2]) -> [f64; 2] {
    let num = (q[0] - b.0, q[1] - b.1);
    let denom = a.0 * a.0 + a.1 * a.1;
    [
        (num.0 * a.0 + num.1 * a.1) / denom,
        (num.1 * a.0 - num.0 * a.1) / denom,
    ]
}

/// Detect, crop, and align a face to the canonical template. No-face is a
/// recoverable error the caller decides on. Segmentation backends are not
/// shipped, so `segmented` is always false and the aligned box crop is used.
pub fn detect_align_segment(
    image: &ImageBuffer,
    detector: &dyn FaceDetect,
) -> Result<FaceCrop, ExtractError> {
    let detection = detector.detect(image)?.ok_or(ExtractError::NoFaceFound)?;
    let top = detection.top.round().max(0.0) as usize;
    let left = detection.left.round().max(0.0) as usize;
    let crop_h = detection.height.round() as usize;
    let crop_w = detection.width.round() as usize;
    let crop = image.crop(top, left, crop_h.max(8), crop_w.max(8))?;

    // landmarks in crop coordinates
    let mut local = [[0.0; 2]; 5];
    for (i, lm) in detection.landmarks.iter().enumerate() {
        local[i] = [lm[0] - left as f64, lm[1] - top as f64];
    }
    let template: Vec<[f64; 2]> = CANONICAL_TEMPLATE
        .iter()
        .map(|[fx, fy]| [fx * crop.width() as f64, fy * crop.height() as f64])
        .collect();
    let (a, b) = similarity_from_eyes([local[0], local[1]], [template[0], template[1]]);

    // warp by inverse mapping with bilinear sampling
    let mut values = Vec::with_capacity(crop.height() * crop.width() * 3);
    for y in 0..crop.height() {
        for x in 0..crop.width() {
            let src = invert_similarity(a, b, [x as f64, y as f64]);
            let px = crop.sample_pixel(src[1], src[0]);
            values.extend_from_slice(&px);
        }
    }
    let aligned_image = ImageBuffer::new(crop.height(), crop.width(), values)?;
    let mut landmarks = [[0.0; 2]; 5];
    for (i, lm) in local.iter().enumerate() {
        landmarks[i] = apply_similarity(a, b, *lm);
    }
    Ok(FaceCrop {
        image: aligned_image,
        detection,
        landmarks,
        aligned: true,
        segmented: false,
    })
}

/// Assemble the global feature: face embedding first, CLS feature second,
/// each zeroed under the corresponding mask flag.
pub fn extract_global(
    crop: &FaceCrop,
    face_embedder: &dyn EmbedImage,
    layered_encoder: &dyn LayeredEncode,
    mask: &AblationMask,
) -> Result<GlobalFeature, ExtractError> {
    mask.validate()?;
    let face = face_embedder.embed(&crop.image)?;
    if face.len() != face_embedder.dim() {
        return Err(ExtractError::DimensionMismatch {
            what: "face embedder",
            expected: face_embedder.dim(),
            found: face.len(),
        });
    }
    let cls = layered_encoder.cls(&crop.image)?;
    if cls.len() != layered_encoder.dim() {
        return Err(ExtractError::DimensionMismatch {
            what: "layered encoder CLS",
            expected: layered_encoder.dim(),
            found: cls.len(),
        });
    }
    let face_part = if mask.zero_face {
        vec![0.0; face.len()]
    } else {
        face
    };
    let cls_part = if mask.zero_cls { vec![0.0; cls.len()] } else { cls };
    Ok(GlobalFeature {
        face_part: EmbeddingVector::new(face_part),
        cls_part: EmbeddingVector::new(cls_part),
    })
}

/// Pooled features for every encoder layer.
pub fn extract_all_layers(
    crop: &FaceCrop,
    layered_encoder: &dyn LayeredEncode,
) -> Result<LayerFeatureSet, ExtractError> {
    let layers = layered_encoder.layer_features(&crop.image)?;
    if layers.len() != layered_encoder.layer_count() {
        return Err(ExtractError::DimensionMismatch {
            what: "layered encoder",
            expected: layered_encoder.layer_count(),
            found: layers.len(),
        });
    }
    Ok(LayerFeatureSet::new(layers))
}

/// Project the selection onto the layer set; a pure projection, slot `i`
/// depends only on `layers[selection[i]]`. Duplicate picks copy values.
pub fn select_slots(
    layers: &LayerFeatureSet,
    selection: &LayerSelection,
) -> Result<LocalFeatureStack, ExtractError> {
    let dim = layers.dim();
    let mut slots: Vec<Slot> = Vec::with_capacity(SLOT_COUNT);
    for (i, pick) in selection.slots().iter().enumerate() {
        slots.push(match pick {
            SlotPick::Layer(l) => Slot {
                provenance: SlotProvenance::Layer(*l),
                values: layers.layer(*l)?.to_vec(),
            },
            SlotPick::Zero => Slot::zero(dim),
            SlotPick::Synthesized => return Err(ExtractError::UnmaterializedSlot { slot: i + 1 }),
        });
    }
    Ok(LocalFeatureStack::new(
        slots.try_into().expect("exactly five slots"),
    ))
}

/// Replace the masked slots with explicit zeros; everything else untouched.
pub fn apply_ablation(
    stack: &LocalFeatureStack,
    mask: &AblationMask,
) -> Result<LocalFeatureStack, ExtractError> {
    mask.validate()?;
    let dim = stack.dim();
    let mut slots = stack.slots().clone();
    for (i, slot) in slots.iter_mut().enumerate() {
        if mask.zero_local || mask.zero_slots.contains(&(i + 1)) {
            *slot = Slot::zero(dim);
        }
    }
    Ok(LocalFeatureStack::new(slots))
}
