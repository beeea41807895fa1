//! Dataset groups, prompt sets, gender substitution, and case pairing.
//!
//! Images are stored as JSON-encoded buffers; prompt files are plain text,
//! one prompt per line, `#` starting a comment line. The `[person]`
//! placeholder marks gendered prompts.

use std::collections::BTreeMap;

use sha2::{Digest, Sha256};
use thiserror::Error;

use editid_core::image::ImageBuffer;

use crate::config::{DatasetSection, PairingSection, PromptSection};

/// The gendered placeholder token in prompt templates.
pub const PERSON_PLACEHOLDER: &str = "[person]";

#[derive(Debug, Error)]
pub enum DataError {
    #[error("dataset dir {0} does not exist")]
    MissingDir(String),
    #[error("dataset dir {0} has no images")]
    EmptyDataset(String),
    #[error("cannot read {path}: {message}")]
    Unreadable { path: String, message: String },
    #[error("prompt set '{0}' is empty")]
    EmptyPromptSet(String),
    #[error("pairing references unknown {what} '{name}'")]
    DanglingReference { what: &'static str, name: String },
    #[error("prompt {id} is marked gendered but has no {PERSON_PLACEHOLDER} placeholder")]
    MissingPlaceholder { id: usize },
}

/// One loaded ID image.
#[derive(Debug, Clone)]
pub struct LoadedImage {
    pub name: String,
    pub image: ImageBuffer,
}

/// A loaded dataset group plus any non-fatal warnings.
#[derive(Debug)]
pub struct LoadedGroup {
    pub name: String,
    pub images: Vec<LoadedImage>,
    pub warnings: Vec<String>,
}

/// Load a dataset directory: lexicographically sorted, counts validated
/// when declared (mismatch warns, does not fail).
pub fn load_group(section: &DatasetSection) -> Result<LoadedGroup, DataError> {
    let dir = &section.image_dir;
    if !dir.is_dir() {
        return Err(DataError::MissingDir(dir.display().to_string()));
    }
    let mut names: Vec<String> = std::fs::read_dir(dir)
        .map_err(|e| DataError::Unreadable {
            path: dir.display().to_string(),
            message: e.to_string(),
        })?
        .filter_map(|entry| entry.ok())
        .filter(|entry| entry.path().extension().is_some_and(|e| e == "json"))
        .map(|entry| entry.file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    if names.is_empty() {
        return Err(DataError::EmptyDataset(dir.display().to_string()));
    }
    let mut images = Vec::with_capacity(names.len());
    for name in names {
        let path = dir.join(&name);
        let text = std::fs::read_to_string(&path).map_err(|e| DataError::Unreadable {
            path: path.display().to_string(),
            message: e.to_string(),
        })?;
        let image: ImageBuffer =
            serde_json::from_str(&text).map_err(|e| DataError::Unreadable {
                path: path.display().to_string(),
                message: e.to_string(),
            })?;
        images.push(LoadedImage { name, image });
    }
    let mut warnings = Vec::new();
    if let Some(expected) = section.expected_count {
        if images.len() != expected {
            warnings.push(format!(
                "dataset '{}' declares {} images but {} were found ({} missing)",
                section.name,
                expected,
                images.len(),
                expected.saturating_sub(images.len())
            ));
        }
    }
    Ok(LoadedGroup {
        name: section.name.clone(),
        images,
        warnings,
    })
}

/// One prompt template.
#[derive(Debug, Clone, PartialEq)]
pub struct PromptRecord {
    /// 1-based position among non-comment lines.
    pub id: usize,
    pub text: String,
    pub gendered: bool,
}

/// A loaded prompt set plus warnings.
#[derive(Debug)]
pub struct LoadedPrompts {
    pub name: String,
    pub records: Vec<PromptRecord>,
    pub warnings: Vec<String>,
}

pub fn load_prompts(section: &PromptSection) -> Result<LoadedPrompts, DataError> {
    let text = std::fs::read_to_string(&section.file).map_err(|e| DataError::Unreadable {
        path: section.file.display().to_string(),
        message: e.to_string(),
    })?;
    let records = parse_prompts(&text);
    if records.is_empty() {
        return Err(DataError::EmptyPromptSet(section.name.clone()));
    }
    let mut warnings = Vec::new();
    if let Some(expected) = section.expected_count {
        if records.len() != expected {
            warnings.push(format!(
                "prompt set '{}' declares {} prompts but {} were found",
                section.name,
                expected,
                records.len()
            ));
        }
    }
    Ok(LoadedPrompts {
        name: section.name.clone(),
        records,
        warnings,
    })
}

/// Parse prompt text: one prompt per line, `#` comment lines and blank
/// lines skipped, ids 1-based over kept lines.
pub fn parse_prompts(text: &str) -> Vec<PromptRecord> {
    text.lines()
        .map(str::trim)
        .filter(|line| !line.is_empty() && !line.starts_with('#'))
        .enumerate()
        .map(|(i, line)| PromptRecord {
            id: i + 1,
            text: line.to_string(),
            gendered: line.contains(PERSON_PLACEHOLDER),
        })
        .collect()
}

/// Gender resolved for an ID image (no toy backend estimates it, so runs
/// default to `Unknown`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Gender {
    Man,
    Woman,
    Unknown,
}

/// Replace the `[person]` placeholder: man/woman when detected, the neutral
/// word otherwise. Non-gendered records pass through unchanged.
pub fn substitute_gender(record: &PromptRecord, gender: Gender) -> Result<String, DataError> {
    if !record.gendered {
        return Ok(record.text.clone());
    }
    if !record.text.contains(PERSON_PLACEHOLDER) {
        return Err(DataError::MissingPlaceholder { id: record.id });
    }
    let word = match gender {
        Gender::Man => "man",
        Gender::Woman => "woman",
        Gender::Unknown => "person",
    };
    Ok(record.text.replace(PERSON_PLACEHOLDER, word))
}

/// One evaluation case: an ID image paired with a concrete prompt.
#[derive(Debug, Clone)]
pub struct EvalCase {
    pub dataset: String,
    pub image_name: String,
    pub prompt_set: String,
    pub prompt_id: usize,
    pub prompt: String,
    pub seed: u64,
}

impl EvalCase {
    pub fn case_id(&self) -> String {
        format!(
            "{}/{}/{}/{}",
            self.dataset, self.image_name, self.prompt_set, self.prompt_id
        )
    }
}

/// Stable per-case seed: first 8 bytes of SHA-256 over (global seed, image
/// name, prompt id), independent of execution order.
pub fn case_seed(global_seed: u64, image_name: &str, prompt_id: usize) -> u64 {
    let mut hasher = Sha256::new();
    hasher.update(global_seed.to_le_bytes());
    hasher.update(image_name.as_bytes());
    hasher.update((prompt_id as u64).to_le_bytes());
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("8 bytes"))
}

/// Cross product of each pairing's images and prompts, in pairing order.
pub fn pair(
    groups: &BTreeMap<String, LoadedGroup>,
    prompt_sets: &BTreeMap<String, LoadedPrompts>,
    pairing: &[PairingSection],
    global_seed: u64,
) -> Result<Vec<EvalCase>, DataError> {
    let mut cases = Vec::new();
    for p in pairing {
        let group = groups.get(&p.dataset).ok_or(DataError::DanglingReference {
            what: "dataset",
            name: p.dataset.clone(),
        })?;
        let prompts = prompt_sets
            .get(&p.prompts)
            .ok_or(DataError::DanglingReference {
                what: "prompt set",
                name: p.prompts.clone(),
            })?;
        if prompts.records.is_empty() {
            return Err(DataError::EmptyPromptSet(p.prompts.clone()));
        }
        for image in &group.images {
            for record in &prompts.records {
                let prompt = substitute_gender(record, Gender::Unknown)?;
                cases.push(EvalCase {
                    dataset: group.name.clone(),
                    image_name: image.name.clone(),
                    prompt_set: prompts.name.clone(),
                    prompt_id: record.id,
                    prompt,
                    seed: case_seed(global_seed, &image.name, record.id),
                });
            }
        }
    }
    Ok(cases)
}
