//! The eleven benchmark metrics as pure, backend-parameterized scoring
//! functions over (id image, generated image with ID, generated image
//! without ID, prompt) tuples.

use nalgebra::{DMatrix, DVector};
use thiserror::Error;

use crate::backends::{
    BackendError, EmbedImage, EmbedText, EstimatePose, ExpressionLabel, FaceDetect, FaceDetection,
    PoseAngles, ScoreImage,
};
use crate::image::{ImageBuffer, ImageError};

/// Ridge added to covariance matrices when they are ill-conditioned at
/// small sample counts.
pub const FID_EPSILON: f64 = 1e-6;

#[derive(Debug, Error)]
pub enum MetricError {
    #[error("undefined similarity: zero-norm input")]
    UndefinedSimilarity,
    #[error("no face found in {which}")]
    FaceNotFound { which: &'static str },
    #[error("embedding dims differ: {a} vs {b}")]
    DimMismatch { a: usize, b: usize },
    #[error("degenerate landmark set: all five points coincide")]
    DegenerateLandmarks,
    #[error("empty label list")]
    EmptyList,
    #[error("need at least {need} samples, got {got}")]
    TooFewSamples { need: usize, got: usize },
    #[error(transparent)]
    Backend(#[from] BackendError),
    #[error(transparent)]
    Image(#[from] ImageError),
}

/// Cosine similarity; zero-norm inputs are undefined rather than 0.
pub fn cosine(u: &[f64], v: &[f64]) -> Result<f64, MetricError> {
    if u.len() != v.len() {
        return Err(MetricError::DimMismatch {
            a: u.len(),
            b: v.len(),
        });
    }
    let nu: f64 = u.iter().map(|x| x * x).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(MetricError::UndefinedSimilarity);
    }
    Ok(u.iter().zip(v).map(|(a, b)| a * b).sum::<f64>() / (nu * nv))
}

fn detect_in(
    image: &ImageBuffer,
    detector: &dyn FaceDetect,
    which: &'static str,
) -> Result<FaceDetection, MetricError> {
    detector
        .detect(image)?
        .ok_or(MetricError::FaceNotFound { which })
}

fn crop_to(image: &ImageBuffer, det: &FaceDetection) -> Result<ImageBuffer, MetricError> {
    Ok(image.crop(
        det.top.max(0.0).round() as usize,
        det.left.max(0.0).round() as usize,
        det.height.round() as usize,
        det.width.round() as usize,
    )?)
}

/// Cosine similarity of face embeddings from detected crops.
pub fn facesim(
    id_image: &ImageBuffer,
    gen_image: &ImageBuffer,
    detector: &dyn FaceDetect,
    face_embedder: &dyn EmbedImage,
) -> Result<f64, MetricError> {
    let id_crop = crop_to(id_image, &detect_in(id_image, detector, "id image")?)?;
    let gen_crop = crop_to(gen_image, &detect_in(gen_image, detector, "generated image")?)?;
    cosine(&face_embedder.embed(&id_crop)?, &face_embedder.embed(&gen_crop)?)
}

/// Cosine similarity between the prompt encoding and the image encoding.
pub fn clip_t(
    prompt: &str,
    gen_image: &ImageBuffer,
    text_encoder: &dyn EmbedText,
    image_encoder: &dyn EmbedImage,
) -> Result<f64, MetricError> {
    cosine(
        &text_encoder.embed_text(prompt)?,
        &image_encoder.embed(gen_image)?,
    )
}

/// Cosine similarity of image encodings with and without the ID branch.
pub fn clip_i(
    image_with_id: &ImageBuffer,
    image_without_id: &ImageBuffer,
    image_encoder: &dyn EmbedImage,
) -> Result<f64, MetricError> {
    cosine(
        &image_encoder.embed(image_with_id)?,
        &image_encoder.embed(image_without_id)?,
    )
}

/// Cosine similarity of fine-grained image encodings of the full frames.
pub fn dino_sim(
    id_image: &ImageBuffer,
    gen_image: &ImageBuffer,
    fine_image_encoder: &dyn EmbedImage,
) -> Result<f64, MetricError> {
    cosine(
        &fine_image_encoder.embed(id_image)?,
        &fine_image_encoder.embed(gen_image)?,
    )
}

/// Cosine similarity of fine-grained encodings restricted to the detected
/// facial crops.
pub fn fgis(
    id_image: &ImageBuffer,
    gen_image: &ImageBuffer,
    detector: &dyn FaceDetect,
    fine_image_encoder: &dyn EmbedImage,
) -> Result<f64, MetricError> {
    let id_crop = crop_to(id_image, &detect_in(id_image, detector, "id image")?)?;
    let gen_crop = crop_to(gen_image, &detect_in(gen_image, detector, "generated image")?)?;
    cosine(
        &fine_image_encoder.embed(&id_crop)?,
        &fine_image_encoder.embed(&gen_crop)?,
    )
}

/// Absolute per-axis pose angle differences.
pub fn pose_abs_diff(a: &PoseAngles, b: &PoseAngles) -> PoseAngles {
    PoseAngles {
        yaw: (a.yaw - b.yaw).abs(),
        pitch: (a.pitch - b.pitch).abs(),
        roll: (a.roll - b.roll).abs(),
    }
}

/// Absolute yaw/pitch/roll differences between the two faces' poses.
pub fn posediv(
    id_image: &ImageBuffer,
    gen_image: &ImageBuffer,
    detector: &dyn FaceDetect,
    head_pose: &dyn EstimatePose,
) -> Result<PoseAngles, MetricError> {
    let id_crop = crop_to(id_image, &detect_in(id_image, detector, "id image")?)?;
    let gen_crop = crop_to(gen_image, &detect_in(gen_image, detector, "generated image")?)?;
    Ok(pose_abs_diff(
        &head_pose.pose(&id_crop)?,
        &head_pose.pose(&gen_crop)?,
    ))
}

/// Denominator choice for landmark normalization.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LandmarkNorm {
    /// Each set divides by its own bounding-rectangle diagonal (default).
    #[default]
    OwnDiagonal,
    /// Both sets divide by the larger of the two diagonals.
    SharedMaxDiagonal,
}

fn diagonal(points: &[[f64; 2]; 5]) -> f64 {
    let (mut min_x, mut max_x) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut min_y, mut max_y) = (f64::INFINITY, f64::NEG_INFINITY);
    for [x, y] in points {
        min_x = min_x.min(*x);
        max_x = max_x.max(*x);
        min_y = min_y.min(*y);
        max_y = max_y.max(*y);
    }
    ((max_x - min_x).powi(2) + (max_y - min_y).powi(2)).sqrt()
}

fn normalize_points(points: &[[f64; 2]; 5], denom: f64) -> [[f64; 2]; 5] {
    let cx = points.iter().map(|p| p[0]).sum::<f64>() / 5.0;
    let cy = points.iter().map(|p| p[1]).sum::<f64>() / 5.0;
    let mut out = [[0.0; 2]; 5];
    for (o, p) in out.iter_mut().zip(points) {
        *o = [(p[0] - cx) / denom, (p[1] - cy) / denom];
    }
    out
}

/// Mean Euclidean distance between two centered, diagonal-normalized
/// five-point landmark sets.
pub fn landmark_distance(
    a: &[[f64; 2]; 5],
    b: &[[f64; 2]; 5],
    norm: LandmarkNorm,
) -> Result<f64, MetricError> {
    let da = diagonal(a);
    let db = diagonal(b);
    if da <= 0.0 || db <= 0.0 {
        return Err(MetricError::DegenerateLandmarks);
    }
    let (denom_a, denom_b) = match norm {
        LandmarkNorm::OwnDiagonal => (da, db),
        LandmarkNorm::SharedMaxDiagonal => {
            let m = da.max(db);
            (m, m)
        }
    };
    let na = normalize_points(a, denom_a);
    let nb = normalize_points(b, denom_b);
    Ok(na
        .iter()
        .zip(&nb)
        .map(|(p, q)| ((p[0] - q[0]).powi(2) + (p[1] - q[1]).powi(2)).sqrt())
        .sum::<f64>()
        / 5.0)
}

/// Landmark difference between the two faces, using detected landmarks.
pub fn landmarkdiff(
    id_image: &ImageBuffer,
    gen_image: &ImageBuffer,
    detector: &dyn FaceDetect,
    norm: LandmarkNorm,
) -> Result<f64, MetricError> {
    let a = detect_in(id_image, detector, "id image")?.landmarks;
    let b = detect_in(gen_image, detector, "generated image")?.landmarks;
    landmark_distance(&a, &b, norm)
}

/// Fraction of label pairs that changed.
pub fn exprdiv(pairs: &[(ExpressionLabel, ExpressionLabel)]) -> Result<f64, MetricError> {
    if pairs.is_empty() {
        return Err(MetricError::EmptyList);
    }
    let changed = pairs.iter().filter(|(a, b)| a != b).count();
    Ok(changed as f64 / pairs.len() as f64)
}

/// Sample mean and unbiased covariance of a feature set.
#[derive(Debug, Clone)]
pub struct GaussianStats {
    pub mean: DVector<f64>,
    pub cov: DMatrix<f64>,
    pub count: usize,
}

impl GaussianStats {
    pub fn from_samples(features: &[Vec<f64>]) -> Result<Self, MetricError> {
        if features.len() < 2 {
            return Err(MetricError::TooFewSamples {
                need: 2,
                got: features.len(),
            });
        }
        let dim = features[0].len();
        for f in features {
            if f.len() != dim {
                return Err(MetricError::DimMismatch { a: dim, b: f.len() });
            }
        }
        let n = features.len() as f64;
        let mut mean = DVector::zeros(dim);
        for f in features {
            mean += DVector::from_column_slice(f);
        }
        mean /= n;
        let mut cov = DMatrix::zeros(dim, dim);
        for f in features {
            let d = DVector::from_column_slice(f) - &mean;
            cov += &d * d.transpose();
        }
        cov /= n - 1.0;
        Ok(Self {
            mean,
            cov,
            count: features.len(),
        })
    }
}

fn symmetric_sqrt(m: &DMatrix<f64>) -> DMatrix<f64> {
    // symmetrize before eigendecomposition to kill accumulated asymmetry
    let sym = (m + m.transpose()) * 0.5;
    let eig = sym.symmetric_eigen();
    let sqrt_vals = DMatrix::from_diagonal(&eig.eigenvalues.map(|v| v.max(0.0).sqrt()));
    &eig.eigenvectors * sqrt_vals * eig.eigenvectors.transpose()
}

/// Fréchet distance plus whether ridge regularization kicked in.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FidResult {
    pub value: f64,
    pub regularized: bool,
    pub epsilon: f64,
}

/// Fréchet distance between the Gaussian fits of two feature sets, with
/// negative eigenvalues of the cross term clamped at zero and an epsilon
/// ridge applied to ill-conditioned covariances.
pub fn fid(features_a: &[Vec<f64>], features_b: &[Vec<f64>]) -> Result<FidResult, MetricError> {
    let a = GaussianStats::from_samples(features_a)?;
    let b = GaussianStats::from_samples(features_b)?;
    if a.mean.len() != b.mean.len() {
        return Err(MetricError::DimMismatch {
            a: a.mean.len(),
            b: b.mean.len(),
        });
    }
    let dim = a.mean.len();
    let min_eig = |m: &DMatrix<f64>| {
        let sym = (m + m.transpose()) * 0.5;
        sym.symmetric_eigen()
            .eigenvalues
            .iter()
            .cloned()
            .fold(f64::INFINITY, f64::min)
    };
    let regularized = min_eig(&a.cov) < FID_EPSILON || min_eig(&b.cov) < FID_EPSILON;
    let ridge = DMatrix::identity(dim, dim) * FID_EPSILON;
    let (cov_a, cov_b) = if regularized {
        (&a.cov + &ridge, &b.cov + &ridge)
    } else {
        (a.cov.clone(), b.cov.clone())
    };
    let diff = &a.mean - &b.mean;
    let sqrt_a = symmetric_sqrt(&cov_a);
    let cross = symmetric_sqrt(&(&sqrt_a * &cov_b * &sqrt_a));
    let value = diff.dot(&diff) + cov_a.trace() + cov_b.trace() - 2.0 * cross.trace();
    Ok(FidResult {
        value: value.max(0.0),
        regularized,
        epsilon: FID_EPSILON,
    })
}

/// A score normalized to [0, 1] along with the backend's raw value.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizedScore {
    pub value: f64,
    pub raw: f64,
}

fn normalized(image: &ImageBuffer, backend: &dyn ScoreImage) -> Result<NormalizedScore, MetricError> {
    let raw = backend.score(image)?;
    Ok(NormalizedScore {
        value: raw / backend.max_score(),
        raw,
    })
}

/// Aesthetic score on a 0-1 scale (native scale 0-10).
pub fn aesthetic(
    gen_image: &ImageBuffer,
    backend: &dyn ScoreImage,
) -> Result<NormalizedScore, MetricError> {
    normalized(gen_image, backend)
}

/// Imaging quality on a 0-1 scale (native scale 0-100).
pub fn imaging_quality(
    gen_image: &ImageBuffer,
    backend: &dyn ScoreImage,
) -> Result<NormalizedScore, MetricError> {
    normalized(gen_image, backend)
}
