//! Acceptance suite: twelve numbered criteria covering the sampler math,
//! the feature branch, the integration module, the metrics, and the
//! end-to-end harness. Each test prints a single pass line on success; a
//! failed assertion is the fail line.

use std::collections::BTreeSet;
use std::sync::Arc;

use editid_core::backends::toy::ToyFaceDetector;
use editid_core::backends::{BackendError, ExpressionLabel, FaceDetect, FaceDetection};
use editid_core::fusion::{fuse, fusion_weights, IdEmbedding, MappedStack};
use editid_core::backends::EmbeddingVector;
use editid_core::image::{synthetic_portrait, ImageBuffer};
use editid_core::integrate::{
    apply_integration, reweight_matrix, residual_fuse, BlockSet, FusionMethod,
    IntegrationConfig, ReweightMethod, StrengthSchedule,
};
use editid_core::metrics::{
    self, exprdiv, fid, landmark_distance, LandmarkNorm,
};
use editid_core::rng;
use editid_core::sampler::{
    attention_vector_field, euler_integrate, noise_schedule, toy_generate, ConditionEmbedding,
    LatentState, TimePoint, VectorFieldSpec,
};
use editid_core::selection::{build_selection, ShiftStrategy, SLOT_COUNT};

use ibench::config::{Config, DatasetSection, PairingSection, PromptSection, ALL_METRICS, METRIC_HEADERS};
use ibench::report::tradeoff_curve;
use ibench::runner::{report_hash, run_with_suite};
use ibench::suite::Suite;
use ibench::sweep::sweep_selections;

fn pass(n: usize, name: &str) {
    println!("acceptance {n:02} {name}: pass");
}

// ---------------------------------------------------------------------------
// 1. Noise-schedule identity
// ---------------------------------------------------------------------------

#[test]
fn criterion_01_schedule_identity() {
    let ts = rng::uniform_vector(101, 1000);
    for t in ts {
        let sv = noise_schedule(TimePoint::new(t).unwrap());
        assert!(
            (sv.alpha + sv.sigma - 1.0).abs() < 1e-12,
            "alpha+sigma broke at t={t}"
        );
    }
    let s0 = noise_schedule(TimePoint::new(0.0).unwrap());
    assert_eq!((s0.alpha, s0.sigma), (1.0, 0.0));
    let s1 = noise_schedule(TimePoint::new(1.0).unwrap());
    assert!(s1.alpha.abs() < 1e-30 && (s1.sigma - 1.0).abs() < 1e-12);
    pass(1, "schedule-identity");
}

// ---------------------------------------------------------------------------
// 2. Euler solver correctness
// ---------------------------------------------------------------------------

#[test]
fn criterion_02_euler_correctness() {
    // constant field: x(1) = x0 + v exactly, any step count
    let x0 = LatentState::seeded_normal(3, 4, 21);
    let v = LatentState::seeded_normal(3, 4, 22);
    for steps in [1usize, 5, 20, 160] {
        let out = euler_integrate(|_, _| Ok(v.clone()), &x0, steps, &[]).unwrap();
        for i in 0..out.values.len() {
            assert!((out.values[i] - (x0.values[i] + v.values[i])).abs() < 1e-9);
        }
    }
    // linear field f(x) = x: error against e shrinks monotonically
    let x0 = LatentState::new(1, 1, vec![1.0]);
    let mut last_err = f64::INFINITY;
    for steps in [5usize, 10, 20, 40, 80, 160] {
        let out = euler_integrate(|x, _| Ok(x.clone()), &x0, steps, &[]).unwrap();
        let err = (out.values[0] - std::f64::consts::E).abs();
        assert!(err < last_err, "error grew at steps={steps}");
        last_err = err;
    }
    pass(2, "euler-correctness");
}

// ---------------------------------------------------------------------------
// 3. Five-slot cardinality over random pick lists
// ---------------------------------------------------------------------------

#[test]
fn criterion_03_five_slot_cardinality() {
    let strategies = [
        None,
        Some(ShiftStrategy::Padding),
        Some(ShiftStrategy::Interpolate),
        Some(ShiftStrategy::Average),
        Some(ShiftStrategy::Max),
    ];
    let draws = rng::uniform_vector(303, 500 * 11);
    let mut accepted = 0usize;
    let mut rejected = 0usize;
    for case in 0..500 {
        let base = case * 11;
        let len = 1 + (draws[base] * 9.0) as usize; // 1..=9
        let picks: Vec<usize> = (0..len)
            .map(|i| 1 + (draws[base + 1 + i] * 23.0) as usize) // 1..=23
            .collect();
        let strategy = strategies[(draws[base + 10] * 5.0) as usize % 5];
        let compatible = match (picks.len().cmp(&SLOT_COUNT), strategy) {
            (std::cmp::Ordering::Equal, None) => true,
            (std::cmp::Ordering::Less, Some(ShiftStrategy::Padding | ShiftStrategy::Interpolate)) => true,
            (std::cmp::Ordering::Greater, Some(ShiftStrategy::Average | ShiftStrategy::Max)) => true,
            _ => false,
        };
        match build_selection(&picks, strategy) {
            Ok(sel) => {
                assert!(compatible, "incompatible input accepted: {picks:?} {strategy:?}");
                assert_eq!(sel.slots().len(), SLOT_COUNT);
                accepted += 1;
            }
            Err(_) => {
                assert!(!compatible, "compatible input rejected: {picks:?} {strategy:?}");
                rejected += 1;
            }
        }
    }
    assert!(accepted > 0 && rejected > 0, "degenerate sampling");
    pass(3, "five-slot-cardinality");
}

// ---------------------------------------------------------------------------
// 4. Residual fusion algebraic identities
// ---------------------------------------------------------------------------

#[test]
fn criterion_04_fusion_algebra() {
    let shapes = rng::uniform_vector(404, 200);
    for case in 0..100 {
        let tokens = 1 + (shapes[2 * case] * 6.0) as usize;
        let dim = 1 + (shapes[2 * case + 1] * 16.0) as usize;
        let a = LatentState::seeded_normal(tokens, dim, 1000 + case as u64);
        let zero = LatentState::zeros(tokens, dim);
        let ones = LatentState::new(tokens, dim, vec![1.0; tokens * dim]);
        let close = |x: &LatentState, y: &LatentState| {
            x.values
                .iter()
                .zip(&y.values)
                .all(|(p, q)| (p - q).abs() < 1e-6)
        };
        assert!(close(&residual_fuse(&a, &zero, &FusionMethod::Sum).unwrap(), &a));
        assert!(close(&residual_fuse(&a, &ones, &FusionMethod::Multiply).unwrap(), &a));
        assert!(close(&residual_fuse(&a, &a, &FusionMethod::Concat).unwrap(), &a));
        assert!(close(&residual_fuse(&a, &a, &FusionMethod::Max).unwrap(), &a));
        assert!(close(
            &residual_fuse(&a, &zero, &FusionMethod::Weight { w1: 1.0, w2: 0.0 }).unwrap(),
            &a
        ));
    }
    pass(4, "fusion-algebra");
}

// ---------------------------------------------------------------------------
// 5. Reweight transform properties
// ---------------------------------------------------------------------------

#[test]
fn criterion_05_reweight_transforms() {
    for source in [2usize, 3, 5, 8, 16, 32, 64] {
        for target in [1usize, source / 2, source] {
            if target == 0 || target > source {
                continue;
            }
            for method in [
                ReweightMethod::Dct { target_dim: target },
                ReweightMethod::PartialFourier { target_dim: target },
            ] {
                let m = reweight_matrix(&method, source).unwrap();
                // rows orthonormal: M M^T = I within 1e-9
                for r in 0..target {
                    for s in 0..target {
                        let dot: f64 = (0..source)
                            .map(|c| m[r * source + c] * m[s * source + c])
                            .sum();
                        let expect = if r == s { 1.0 } else { 0.0 };
                        assert!(
                            (dot - expect).abs() < 1e-9,
                            "{method:?} src={source} rows {r},{s}: {dot}"
                        );
                    }
                }
            }
        }
    }
    let g = ReweightMethod::SeededGaussianLinear { seed: 7, target_dim: 8 };
    assert_eq!(reweight_matrix(&g, 16).unwrap(), reweight_matrix(&g, 16).unwrap());
    pass(5, "reweight-transforms");
}

// ---------------------------------------------------------------------------
// 6. Attention oracles
// ---------------------------------------------------------------------------

fn naive_attention(
    spec: &VectorFieldSpec,
    x: &LatentState,
    c: &ConditionEmbedding,
) -> Vec<f64> {
    let d = spec.dim;
    let wq = rng::gaussian_matrix(rng::mix(spec.seed, "wq"), d, d);
    let wk = rng::gaussian_matrix(rng::mix(spec.seed, "wk"), spec.cond_dim, d);
    let wv = rng::gaussian_matrix(rng::mix(spec.seed, "wv"), spec.cond_dim, d);
    let wp = rng::gaussian_matrix(rng::mix(spec.seed, "proj"), d, d);
    let head_dim = d / spec.heads;
    let mul = |x: &[f64], rows: usize, inner: usize, m: &[f64], cols: usize| -> Vec<f64> {
        let mut out = vec![0.0; rows * cols];
        for r in 0..rows {
            for c2 in 0..cols {
                out[r * cols + c2] = (0..inner).map(|k| x[r * inner + k] * m[k * cols + c2]).sum();
            }
        }
        out
    };
    let q = mul(&x.values, x.tokens, d, &wq, d);
    let k = mul(&c.values, c.tokens, c.dim, &wk, d);
    let v = mul(&c.values, c.tokens, c.dim, &wv, d);
    let mut attended = vec![0.0; x.tokens * d];
    for h in 0..spec.heads {
        for qi in 0..x.tokens {
            let scores: Vec<f64> = (0..c.tokens)
                .map(|ki| {
                    (0..head_dim)
                        .map(|j| q[qi * d + h * head_dim + j] * k[ki * d + h * head_dim + j])
                        .sum::<f64>()
                        / (head_dim as f64).sqrt()
                })
                .collect();
            let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
            let sum: f64 = exps.iter().sum();
            for (ki, e) in exps.iter().enumerate() {
                for j in 0..head_dim {
                    attended[qi * d + h * head_dim + j] += e / sum * v[ki * d + h * head_dim + j];
                }
            }
        }
    }
    mul(&attended, x.tokens, d, &wp, d)
}

#[test]
fn criterion_06_attention_oracles() {
    // toy vector field against an independent naive computation
    let spec = VectorFieldSpec { dim: 8, cond_dim: 6, heads: 2, seed: 606 };
    for tokens in 1..=5usize {
        let x = LatentState::seeded_normal(tokens, 8, 50 + tokens as u64);
        let c = ConditionEmbedding::new(tokens, 6, rng::gaussian_vector(60 + tokens as u64, tokens * 6));
        let got = attention_vector_field(&spec, &x, TimePoint::new(0.5).unwrap(), &c).unwrap();
        let want = naive_attention(&spec, &x, &c);
        for (a, b) in got.values.iter().zip(&want) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }
    // single-query fuse against the same naive softmax combination
    let d = 6;
    let id = IdEmbedding(EmbeddingVector::new(rng::gaussian_vector(71, d)));
    let rows: [Vec<f64>; SLOT_COUNT] =
        std::array::from_fn(|i| rng::gaussian_vector(80 + i as u64, d));
    let mapped = MappedStack::new(rows.clone());
    let weights = fusion_weights(&id, &mapped).unwrap();
    let wsum: f64 = weights.iter().sum();
    assert!((wsum - 1.0).abs() < 1e-10, "weights sum {wsum}");
    let scores: Vec<f64> = rows
        .iter()
        .map(|row| {
            id.0.values.iter().zip(row).map(|(q, k)| q * k).sum::<f64>() / (d as f64).sqrt()
        })
        .collect();
    let max = scores.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = scores.iter().map(|s| (s - max).exp()).collect();
    let sum: f64 = exps.iter().sum();
    let fused = fuse(&id, &mapped).unwrap();
    for j in 0..d {
        let want: f64 = rows.iter().zip(&exps).map(|(row, e)| e / sum * row[j]).sum();
        assert!((fused.0.values[j] - want).abs() < 1e-10);
    }
    pass(6, "attention-oracles");
}

// ---------------------------------------------------------------------------
// 7. Training-free layering
// ---------------------------------------------------------------------------

#[test]
fn criterion_07_training_free_layering() {
    let config = Config::default();
    let suite = Suite::toy(&config).unwrap();
    let spec = config.sampler.vector_field_spec();
    let steps = config.sampler.steps;
    let prompt = "a person on a bridge";
    let cond = ConditionEmbedding::single(suite.text_encoder.embed_text(prompt).unwrap());
    let seed = 7_070;
    let plain = toy_generate(&spec, &cond, seed, steps, &[]).unwrap();

    // empty block set: hook installed but every block passes through
    let id_image = synthetic_portrait(9, 32, 32);
    let edit = ibench::pipeline::build_edit_feature(&suite, &config, &id_image).unwrap();
    let empty = IntegrationConfig {
        blocks: BlockSet::empty(),
        ..IntegrationConfig::toy_default(config.feature_branch.id_dim)
    };
    let hook = |step: usize, state: LatentState| {
        apply_integration(&state, &edit, &empty, step, steps).map_err(|e| {
            editid_core::sampler::FlowError::Hook { step, message: e.to_string() }
        })
    };
    let hooks: [editid_core::sampler::StepHook<'_>; 1] = [&hook];
    let gated = toy_generate(&spec, &cond, seed, steps, &hooks).unwrap();
    assert_eq!(gated, plain, "empty block set must be bitwise pass-through");

    // strength zero: selected blocks add a zero-scaled residual
    let zero_strength = IntegrationConfig {
        schedule: StrengthSchedule::Constant { base: 0.0 },
        ..IntegrationConfig::toy_default(config.feature_branch.id_dim)
    };
    let state = LatentState::seeded_normal(8, spec.dim, 77);
    let out = apply_integration(&state, &edit, &zero_strength, 0, steps).unwrap();
    for (a, b) in out.values.iter().zip(&state.values) {
        assert!((a - b).abs() < 1e-12);
    }
    pass(7, "training-free-layering");
}

// ---------------------------------------------------------------------------
// 8. Distribution-distance oracle
// ---------------------------------------------------------------------------

#[test]
fn criterion_08_fid_oracle() {
    let set: Vec<Vec<f64>> = (0..64).map(|i| rng::gaussian_vector(800 + i, 4)).collect();
    let same = fid(&set, &set).unwrap();
    assert!(same.value.abs() < 1e-6, "identical sets gave {}", same.value);

    // two unit-covariance Gaussians, mean shift 1.5 per axis -> distance^2 = 9
    let n = 10_000;
    let shift = 1.5;
    let a: Vec<Vec<f64>> = (0..n).map(|i| rng::gaussian_vector(900_000 + i, 4)).collect();
    let b: Vec<Vec<f64>> = (0..n)
        .map(|i| {
            rng::gaussian_vector(990_000 + i, 4)
                .into_iter()
                .map(|v| v + shift)
                .collect()
        })
        .collect();
    let result = fid(&a, &b).unwrap();
    let oracle = 4.0 * shift * shift;
    assert!(
        (result.value - oracle).abs() < 0.02 * oracle,
        "fid {} vs oracle {oracle}",
        result.value
    );
    pass(8, "fid-oracle");
}

// ---------------------------------------------------------------------------
// 9. Metric fixed points
// ---------------------------------------------------------------------------

#[test]
fn criterion_09_metric_fixed_points() {
    let config = Config::default();
    let suite = Suite::toy(&config).unwrap();
    let img = synthetic_portrait(99, 32, 32);

    let one = |v: f64, name: &str| assert!((v - 1.0).abs() < 1e-12, "{name} = {v}");
    one(
        metrics::facesim(&img, &img, suite.detector.as_ref(), suite.face_embedder.as_ref()).unwrap(),
        "facesim",
    );
    one(metrics::clip_i(&img, &img, suite.clip_image.as_ref()).unwrap(), "clip_i");
    one(metrics::dino_sim(&img, &img, suite.fine_image.as_ref()).unwrap(), "dino");
    one(
        metrics::fgis(&img, &img, suite.detector.as_ref(), suite.fine_image.as_ref()).unwrap(),
        "fgis",
    );
    // clip_t fixed point: image embedding aligned with itself
    let emb = suite.clip_image.embed(&img).unwrap();
    one(metrics::cosine(&emb, &emb).unwrap(), "clip_t-cosine");

    let angles = metrics::posediv(&img, &img, suite.detector.as_ref(), suite.head_pose.as_ref()).unwrap();
    assert_eq!((angles.yaw, angles.pitch, angles.roll), (0.0, 0.0, 0.0));

    assert_eq!(
        metrics::landmarkdiff(&img, &img, suite.detector.as_ref(), LandmarkNorm::OwnDiagonal).unwrap(),
        0.0
    );
    // similarity transform (scale + translate) keeps the distance at zero
    let pts = [[1.0, 2.0], [4.0, 2.5], [2.5, 4.0], [1.5, 6.0], [4.0, 6.5]];
    let moved: [[f64; 2]; 5] = std::array::from_fn(|i| [pts[i][0] * 3.0 + 10.0, pts[i][1] * 3.0 - 4.0]);
    let d = landmark_distance(&pts, &moved, LandmarkNorm::OwnDiagonal).unwrap();
    assert!(d.abs() < 1e-12, "similarity transform moved landmarks: {d}");

    // exact rational change fractions
    use ExpressionLabel::{Happy, Neutral, Sad};
    let pairs: Vec<_> = (0..8)
        .map(|i| if i < 2 { (Happy, Sad) } else { (Neutral, Neutral) })
        .collect();
    assert_eq!(exprdiv(&pairs).unwrap(), 0.25);
    let pairs: Vec<_> = (0..1000)
        .map(|i| if i < 554 { (Happy, Sad) } else { (Happy, Happy) })
        .collect();
    assert_eq!(exprdiv(&pairs).unwrap(), 0.554);
    pass(9, "metric-fixed-points");
}

// ---------------------------------------------------------------------------
// 10. End-to-end determinism and fault isolation
// ---------------------------------------------------------------------------

/// Detector that reports no face for the one marker-sized image.
struct MarkerFault;

impl FaceDetect for MarkerFault {
    fn detect(&self, image: &ImageBuffer) -> Result<Option<FaceDetection>, BackendError> {
        if image.width() == 40 {
            return Ok(None);
        }
        ToyFaceDetector.detect(image)
    }
}

fn small_run_config(root: &std::path::Path) -> Config {
    let image_dir = root.join("images");
    std::fs::create_dir_all(&image_dir).unwrap();
    for (i, side) in [(0usize, 32usize), (1, 32), (2, 40)] {
        let img = synthetic_portrait(i as u64 + 1, side, side);
        let text = serde_json::to_string(&img).unwrap();
        std::fs::write(image_dir.join(format!("img{i}.json")), text).unwrap();
    }
    let prompt_file = root.join("prompts.txt");
    std::fs::write(&prompt_file, "a [person] at a lighthouse\na quiet reading room\n").unwrap();
    let mut config = Config::default();
    config.seed = 11;
    config.output_dir = root.join("out");
    config.datasets = vec![DatasetSection {
        name: "toy".into(),
        image_dir,
        expected_count: Some(3),
    }];
    config.prompts = vec![PromptSection {
        name: "two".into(),
        file: prompt_file,
        expected_count: Some(2),
    }];
    config.pairing = vec![PairingSection {
        dataset: "toy".into(),
        prompts: "two".into(),
    }];
    config
}

#[test]
fn criterion_10_end_to_end_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let config = small_run_config(tmp.path());
    let suite = Suite::toy(&config).unwrap();

    let first = run_with_suite(&config, &suite).unwrap();
    assert_eq!(first.report.cases.len(), 6);
    for case in &first.report.cases {
        assert!(case.branch_error.is_none(), "{}: {:?}", case.case_id, case.branch_error);
        assert_eq!(case.metrics.len(), 12);
        for (name, v) in &case.metrics {
            assert!(v.value.is_some(), "{} {name} null: {:?}", case.case_id, v.error_code);
        }
    }
    assert!(first.report.aggregates.get("fid").is_some_and(Option::is_some));
    for count in first.report.null_counts.values() {
        assert_eq!(*count, 0);
    }

    // rerun: canonical report bytes identical
    let report_bytes = std::fs::read(first.run_dir.join("report.json")).unwrap();
    let second = run_with_suite(&config, &suite).unwrap();
    let rerun_bytes = std::fs::read(second.run_dir.join("report.json")).unwrap();
    assert_eq!(report_bytes, rerun_bytes, "rerun changed the canonical report");
    assert_eq!(report_hash(&first.report).unwrap(), report_hash(&second.report).unwrap());

    // fault injection: the 40px marker image loses its face
    let mut faulty = Suite::toy(&config).unwrap();
    faulty.detector = Arc::new(MarkerFault);
    let mut fault_config = config.clone();
    fault_config.output_dir = tmp.path().join("out-fault");
    let fault = run_with_suite(&fault_config, &faulty).unwrap();
    let face_bound: BTreeSet<&str> =
        ["facesim", "posediv_yaw", "posediv_pitch", "posediv_roll", "landmarkdiff", "exprdiv", "fgis"]
            .into_iter()
            .collect();
    for case in &fault.report.cases {
        if case.image_name == "img2.json" {
            assert_eq!(case.branch_error.as_deref(), Some("face-not-found:id-image"));
            for (name, v) in &case.metrics {
                if face_bound.contains(name.as_str()) {
                    assert!(v.value.is_none(), "{name} should be null for the marker image");
                    assert!(v.error_code.as_deref().unwrap().starts_with("face-not-found"));
                } else {
                    assert!(v.value.is_some(), "{name} should survive the fault");
                }
            }
        } else {
            assert!(case.branch_error.is_none());
            for (name, v) in &case.metrics {
                assert!(v.value.is_some(), "{name} null on unaffected case");
            }
        }
    }
    pass(10, "end-to-end-determinism");
}

// ---------------------------------------------------------------------------
// 11. Sweep shape and tradeoff contract
// ---------------------------------------------------------------------------

#[test]
fn criterion_11_sweep_shape() {
    let tmp = tempfile::tempdir().unwrap();
    let mut config = small_run_config(tmp.path());
    config.workers = 2;
    let selections: Vec<String> = [
        "[4,-,-,-,-]",
        "[4,8,-,-,-]",
        "[4,12,-,-,-]",
        "[4,16,-,-,-]",
        "[0,12,-,-,-]",
        "[0,16,-,-,-]",
    ]
    .iter()
    .map(|s| s.to_string())
    .collect();
    let output = sweep_selections(&config, &selections).unwrap();
    assert_eq!(output.rows.len(), 6);
    assert!(output.notices.is_empty());
    let labels: Vec<&str> = output.rows.iter().map(|r| r.label.as_str()).collect();
    assert_eq!(
        labels,
        ["[4,-,-,-,-]", "[4,8,-,-,-]", "[4,12,-,-,-]", "[4,16,-,-,-]", "[-,12,-,-,-]", "[-,16,-,-,-]"]
    );
    // each row exposes the ablation table's column set
    for row in &output.rows {
        for metric in ["facesim", "clipt", "posediv_yaw", "posediv_pitch", "posediv_roll", "landmarkdiff", "exprdiv"] {
            assert!(row.get(metric).is_some(), "{}: {metric} missing", row.label);
        }
    }
    // one tradeoff tuple per selection
    let curve = tradeoff_curve(&output.rows, &output.baseline);
    assert_eq!(curve.len(), 6);
    for point in &curve {
        assert!(point.delta_facesim.is_some());
        assert!(point.delta_posediv_yaw.is_some());
        assert!(point.delta_posediv_pitch.is_some());
        assert!(point.delta_posediv_roll.is_some());
    }
    assert!(output.sweep_dir.join("sweep.csv").is_file());
    assert!(output.sweep_dir.join("tradeoff.csv").is_file());
    pass(11, "sweep-shape");
}

// ---------------------------------------------------------------------------
// 12. Reference-report column contract
// ---------------------------------------------------------------------------

/// Published reference aggregates for the default configuration on real
/// backends (documented targets only; desk-scale toy backends cannot and
/// should not reproduce them): Facesim 0.714, Posediv 11.81/6.722/10.60,
/// Landmarkdiff 0.082, Exprdiv 0.554, ClipT 0.249, ClipI 0.769.
const REFERENCE_COLUMNS: [(&str, f64); 9] = [
    ("facesim", 0.714),
    ("posediv_yaw", 11.81),
    ("posediv_pitch", 6.722),
    ("posediv_roll", 10.60),
    ("landmarkdiff", 0.082),
    ("exprdiv", 0.554),
    ("clipt", 0.249),
    ("clipi", 0.769),
    ("fid", f64::NAN), // reported column; no published reference value here
];

#[test]
fn criterion_12_reference_columns() {
    for (column, _) in REFERENCE_COLUMNS {
        assert!(ALL_METRICS.contains(&column), "missing report column {column}");
    }
    // headers pair off with metric keys in the fixed report order
    assert_eq!(ALL_METRICS.len(), METRIC_HEADERS.len());
    let expected_headers = [
        "FID",
        "Aesthetic",
        "Image Quality",
        "Posediv(yaw)",
        "Posediv(pitch)",
        "Posediv(roll)",
        "Landmarkdiff",
        "Exprdiv",
        "Facesim",
        "ClipI",
        "ClipT",
        "Dino",
        "Fgis",
    ];
    assert_eq!(METRIC_HEADERS, expected_headers);
    // the reference values above stay documented, not asserted: desk-scale
    // toy backends are not expected to reach them
    pass(12, "reference-columns");
}
