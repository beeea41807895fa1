//! Synthetic fixture data: procedurally drawn portrait datasets and prompt
//! files, plus a ready-to-run config pointing at them. All content is
//! seeded, so regenerating fixtures yields byte-identical files.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};

use editid_core::image::{synthetic_portrait, ImageBuffer};
use editid_core::rng;

use crate::canonical::write_canonical;

/// The three fixture dataset groups and their full-size image counts.
pub const GROUPS: [(&str, usize); 3] = [("unsplash", 49), ("chineseid", 100), ("generateid", 100)];

/// Image count per group in the small (default) fixture set.
pub const SMALL_GROUP_SIZE: usize = 3;

/// Fixture images are small and quantized so the files stay compact.
pub const IMAGE_SIZE: usize = 32;

/// Options controlling fixture generation.
#[derive(Debug, Clone, Copy)]
pub struct FixtureOptions {
    /// Generate the full-size groups (49/100/100) instead of 3 images each.
    pub full: bool,
    pub seed: u64,
}

impl Default for FixtureOptions {
    fn default() -> Self {
        Self {
            full: false,
            seed: 0,
        }
    }
}

/// Where everything was written.
#[derive(Debug)]
pub struct FixtureManifest {
    pub root: PathBuf,
    pub dataset_dirs: Vec<(String, PathBuf, usize)>,
    pub prompt_files: Vec<(String, PathBuf, usize)>,
    pub config_file: PathBuf,
}

fn quantize(image: &ImageBuffer) -> ImageBuffer {
    let values = image
        .values()
        .iter()
        .map(|v| (v * 1.0e4).round() / 1.0e4)
        .collect();
    ImageBuffer::new(image.height(), image.width(), values)
        .expect("quantization preserves validity")
}

fn write_group(dir: &Path, group: &str, count: usize, seed: u64) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    for i in 0..count {
        let image_seed = rng::mix_index(rng::mix(seed, group), "fixture-image", i);
        let image = quantize(&synthetic_portrait(image_seed, IMAGE_SIZE, IMAGE_SIZE));
        let path = dir.join(format!("{group}_{i:03}.json"));
        write_canonical(&path, &image).with_context(|| format!("writing {}", path.display()))?;
    }
    Ok(())
}

const SUBJECTS: [&str; 10] = [
    "an astronaut",
    "a chef",
    "a violinist",
    "a firefighter",
    "a painter",
    "a cyclist",
    "a gardener",
    "a pilot",
    "a teacher",
    "a photographer",
];

const SCENES: [&str; 10] = [
    "on a sunlit rooftop",
    "in a rainy alley",
    "beside a mountain lake",
    "in a crowded market",
    "under neon signs",
    "in a quiet library",
    "on a windswept beach",
    "inside a greenhouse",
    "at a train station",
    "in a snowy forest",
];

const STYLES: [&str; 5] = [
    "soft studio lighting",
    "golden hour glow",
    "high-contrast monochrome",
    "watercolor texture",
    "cinematic depth of field",
];

/// Compose `count` prompts; roughly half use the `[person]` placeholder.
fn prompt_lines(set: &str, count: usize) -> String {
    let mut out = String::new();
    writeln!(out, "# fixture prompt set: {set}").unwrap();
    writeln!(out, "# one prompt per line; [person] is replaced at run time").unwrap();
    for i in 0..count {
        let subject = if i % 2 == 0 {
            "a [person]".to_string()
        } else {
            SUBJECTS[i % SUBJECTS.len()].to_string()
        };
        let scene = SCENES[(i * 3 + 1) % SCENES.len()];
        let style = STYLES[(i * 7 + 2) % STYLES.len()];
        match set {
            "short" => writeln!(out, "Portrait of {subject} {scene}").unwrap(),
            "editable-long" => writeln!(
                out,
                "Portrait of {subject} {scene}, {style}, looking slightly off camera"
            )
            .unwrap(),
            _ => writeln!(
                out,
                "A detailed photo of {subject} {scene}, {style}, prompt {num}",
                num = i + 1
            )
            .unwrap(),
        }
    }
    out
}

/// The prompt sets and their line counts.
pub const PROMPT_SETS: [(&str, usize); 3] = [("short", 20), ("editable-long", 41), ("manual", 80)];

fn write_config(
    path: &Path,
    seed: u64,
    datasets: &[(String, PathBuf, usize)],
    prompts: &[(String, PathBuf, usize)],
) -> Result<()> {
    let mut text = String::new();
    writeln!(text, "seed = {seed}").unwrap();
    writeln!(text, "output_dir = \"out\"").unwrap();
    for (name, dir, count) in datasets {
        writeln!(text).unwrap();
        writeln!(text, "[[datasets]]").unwrap();
        writeln!(text, "name = \"{name}\"").unwrap();
        writeln!(
            text,
            "image_dir = \"{}\"",
            dir.file_name().map(|f| format!("datasets/{}", f.to_string_lossy())).unwrap_or_default()
        )
        .unwrap();
        writeln!(text, "expected_count = {count}").unwrap();
    }
    for (name, file, count) in prompts {
        writeln!(text).unwrap();
        writeln!(text, "[[prompts]]").unwrap();
        writeln!(text, "name = \"{name}\"").unwrap();
        writeln!(
            text,
            "file = \"{}\"",
            file.file_name().map(|f| format!("prompts/{}", f.to_string_lossy())).unwrap_or_default()
        )
        .unwrap();
        writeln!(text, "expected_count = {count}").unwrap();
    }
    writeln!(text).unwrap();
    writeln!(text, "[[pairing]]").unwrap();
    writeln!(text, "dataset = \"{}\"", datasets[0].0).unwrap();
    writeln!(text, "prompts = \"{}\"", prompts[0].0).unwrap();
    std::fs::write(path, text)?;
    Ok(())
}

/// Generate the full fixture tree under `root`:
/// `datasets/<group>/*.json`, `prompts/<set>.txt`, and `config.toml`.
pub fn generate_fixtures(root: &Path, options: FixtureOptions) -> Result<FixtureManifest> {
    std::fs::create_dir_all(root)?;
    let mut dataset_dirs = Vec::new();
    for (group, full_count) in GROUPS {
        let count = if options.full {
            full_count
        } else {
            SMALL_GROUP_SIZE
        };
        let dir = root.join("datasets").join(group);
        write_group(&dir, group, count, options.seed)?;
        dataset_dirs.push((group.to_string(), dir, count));
    }
    let prompt_dir = root.join("prompts");
    std::fs::create_dir_all(&prompt_dir)?;
    let mut prompt_files = Vec::new();
    for (set, count) in PROMPT_SETS {
        let path = prompt_dir.join(format!("{set}.txt"));
        std::fs::write(&path, prompt_lines(set, count))?;
        prompt_files.push((set.to_string(), path, count));
    }
    let config_file = root.join("config.toml");
    write_config(&config_file, options.seed, &dataset_dirs, &prompt_files)?;
    Ok(FixtureManifest {
        root: root.to_path_buf(),
        dataset_dirs,
        prompt_files,
        config_file,
    })
}
