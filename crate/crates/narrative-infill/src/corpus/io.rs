//! Corpus file I/O.
//!
//! Corpus files are UTF-8 JSON-lines, one object per narrative:
//!
//! ```json
//! {"id": "r1", "category": "recipes",
//!  "steps": [{"text": "Heat the oil.", "feature": [0.1, 0.2]},
//!            {"text": "Add onions.", "feature_file": "r1_step2.nif"}]}
//! ```
//!
//! Each step carries its feature vector either inline (`feature`) or as
//! a path (`feature_file`, resolved relative to the corpus file's
//! directory) to a binary file: magic bytes `NIF1`, an unsigned 32-bit
//! little-endian dimension, then that many 32-bit little-endian IEEE-754
//! floats.

use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

use super::{FeatureSource, Narrative, Step};

const FEATURE_MAGIC: &[u8; 4] = b"NIF1";

#[derive(Serialize, Deserialize)]
struct RawNarrative {
    id: String,
    category: String,
    steps: Vec<RawStep>,
}

#[derive(Serialize, Deserialize)]
struct RawStep {
    text: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    feature: Option<Vec<f64>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    feature_file: Option<String>,
}

/// Load a JSON-lines corpus, resolving referenced feature files and
/// checking the per-narrative and corpus-wide feature dimension
/// invariants. Narratives come back in file order.
pub fn load_corpus(path: &Path) -> Result<Vec<Narrative>> {
    let file = fs::File::open(path)
        .map_err(|e| Error::invalid(format!("cannot open corpus {}: {e}", path.display())))?;
    let base = path.parent().unwrap_or_else(|| Path::new("."));
    let mut corpus: Vec<Narrative> = Vec::new();
    for (idx, line) in BufReader::new(file).lines().enumerate() {
        let line_no = idx + 1;
        let line = line.map_err(|e| Error::MalformedRecord {
            line: line_no,
            message: format!("unreadable line: {e}"),
        })?;
        if line.trim().is_empty() {
            continue;
        }
        let raw: RawNarrative = serde_json::from_str(&line)
            .map_err(|e| Error::MalformedRecord { line: line_no, message: e.to_string() })?;
        let mut steps = Vec::with_capacity(raw.steps.len());
        for (k, step) in raw.steps.into_iter().enumerate() {
            let (feature, source) = match (step.feature, step.feature_file) {
                (Some(v), None) => (v, FeatureSource::Inline),
                (None, Some(rel)) => {
                    let fpath = base.join(&rel);
                    let v = read_feature_file(&fpath).map_err(|e| Error::Narrative {
                        id: raw.id.clone(),
                        message: format!("step {k}: feature file {rel}: {e}"),
                    })?;
                    (v, FeatureSource::File)
                }
                (Some(_), Some(_)) => {
                    return Err(Error::MalformedRecord {
                        line: line_no,
                        message: format!(
                            "step {k} has both \"feature\" and \"feature_file\""
                        ),
                    })
                }
                (None, None) => {
                    return Err(Error::MalformedRecord {
                        line: line_no,
                        message: format!(
                            "step {k} has neither \"feature\" nor \"feature_file\""
                        ),
                    })
                }
            };
            steps.push(Step::new(step.text, feature, source));
        }
        let narrative = Narrative { id: raw.id, category: raw.category, steps };
        narrative.validate()?;
        if let Some(first) = corpus.first() {
            if narrative.feature_dim() != first.feature_dim() {
                let message = format!(
                    "feature dimension {} differs from corpus dimension {} (narrative {})",
                    narrative.feature_dim(),
                    first.feature_dim(),
                    first.id
                );
                return Err(Error::Narrative { id: narrative.id, message });
            }
        }
        corpus.push(narrative);
    }
    Ok(corpus)
}

/// Write a corpus as JSON-lines with inline features.
pub fn write_corpus(path: &Path, corpus: &[Narrative]) -> Result<()> {
    let mut out = fs::File::create(path)?;
    for n in corpus {
        let raw = RawNarrative {
            id: n.id.clone(),
            category: n.category.clone(),
            steps: n
                .steps
                .iter()
                .map(|s| RawStep {
                    text: s.text.clone(),
                    feature: Some(s.feature.clone()),
                    feature_file: None,
                })
                .collect(),
        };
        serde_json::to_writer(&mut out, &raw)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Read one binary feature vector (see module docs for the layout).
pub fn read_feature_file(path: &Path) -> Result<Vec<f64>> {
    let data = fs::read(path).map_err(Error::Io)?;
    if data.len() < 8 || &data[..4] != FEATURE_MAGIC {
        return Err(Error::invalid("not a NIF1 feature file"));
    }
    let dim = u32::from_le_bytes(data[4..8].try_into().unwrap()) as usize;
    let expect = 8 + dim * 4;
    if data.len() != expect {
        return Err(Error::invalid(format!(
            "feature file holds {} bytes, dimension {} wants {}",
            data.len(),
            dim,
            expect
        )));
    }
    Ok(data[8..]
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()) as f64)
        .collect())
}

/// Write one binary feature vector (values quantized to f32).
pub fn write_feature_file(path: &Path, feature: &[f64]) -> Result<()> {
    let mut out = Vec::with_capacity(8 + feature.len() * 4);
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&(feature.len() as u32).to_le_bytes());
    for &v in feature {
        out.extend_from_slice(&(v as f32).to_le_bytes());
    }
    fs::write(path, out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn write_lines(dir: &Path, lines: &[&str]) -> std::path::PathBuf {
        let path = dir.join("corpus.jsonl");
        fs::write(&path, lines.join("\n")).unwrap();
        path
    }

    #[test]
    fn two_records_load_in_file_order() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            dir.path(),
            &[
                r#"{"id":"a","category":"recipes","steps":[{"text":"Heat oil.","feature":[1.0,2.0]}]}"#,
                r#"{"id":"b","category":"recipes","steps":[{"text":"Add salt.","feature":[3.0,4.0]}]}"#,
            ],
        );
        let corpus = load_corpus(&path).unwrap();
        assert_eq!(corpus.len(), 2);
        assert_eq!(corpus[0].id, "a");
        assert_eq!(corpus[1].id, "b");
        assert_eq!(corpus[0].steps[0].tokens, vec!["heat", "oil", "."]);
        assert_eq!(corpus[0].steps[0].feature_source, FeatureSource::Inline);
    }

    #[test]
    fn five_steps_of_inline_dim_four() {
        let dir = tempfile::tempdir().unwrap();
        let steps: Vec<String> = (0..5)
            .map(|i| format!(r#"{{"text":"step {i}","feature":[0.0,1.0,2.0,{i}.0]}}"#))
            .collect();
        let line = format!(r#"{{"id":"n","category":"recipes","steps":[{}]}}"#, steps.join(","));
        let path = write_lines(dir.path(), &[&line]);
        let corpus = load_corpus(&path).unwrap();
        assert_eq!(corpus[0].n_steps(), 5);
        assert_eq!(corpus[0].feature_dim(), 4);
    }

    #[test]
    fn malformed_json_names_the_line() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            dir.path(),
            &[
                r#"{"id":"a","category":"c","steps":[{"text":"x","feature":[1.0]}]}"#,
                r#"{"id":"b", this is not json"#,
            ],
        );
        let err = load_corpus(&path).unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
    }

    #[test]
    fn missing_feature_file_names_the_narrative() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            dir.path(),
            &[r#"{"id":"broken","category":"c","steps":[{"text":"x","feature_file":"absent.nif"}]}"#],
        );
        let err = load_corpus(&path).unwrap_err();
        assert!(err.to_string().contains("broken"), "{err}");
    }

    #[test]
    fn referenced_feature_files_resolve_relative_to_the_corpus() {
        let dir = tempfile::tempdir().unwrap();
        write_feature_file(&dir.path().join("s0.nif"), &[0.5, -1.5, 2.0]).unwrap();
        let path = write_lines(
            dir.path(),
            &[r#"{"id":"n","category":"c","steps":[{"text":"x","feature_file":"s0.nif"}]}"#],
        );
        let corpus = load_corpus(&path).unwrap();
        assert_eq!(corpus[0].steps[0].feature, vec![0.5, -1.5, 2.0]);
        assert_eq!(corpus[0].steps[0].feature_source, FeatureSource::File);
    }

    #[test]
    fn dimension_mismatch_inside_a_narrative_names_it() {
        let dir = tempfile::tempdir().unwrap();
        let path = write_lines(
            dir.path(),
            &[r#"{"id":"mix","category":"c","steps":[{"text":"a","feature":[1.0]},{"text":"b","feature":[1.0,2.0]}]}"#],
        );
        let err = load_corpus(&path).unwrap_err();
        assert!(err.to_string().contains("mix"), "{err}");
    }

    #[test]
    fn corpus_round_trips_through_write_and_load() {
        let dir = tempfile::tempdir().unwrap();
        let corpus = vec![Narrative {
            id: "r".into(),
            category: "recipes".into(),
            steps: vec![
                Step::new("Chop the garlic.", vec![0.25, 0.5], FeatureSource::Synthetic),
                Step::new("Fry it!", vec![-1.0, 4.0], FeatureSource::Synthetic),
            ],
        }];
        let path = dir.path().join("out.jsonl");
        write_corpus(&path, &corpus).unwrap();
        let back = load_corpus(&path).unwrap();
        assert_eq!(back[0].id, "r");
        assert_eq!(back[0].steps[1].feature, vec![-1.0, 4.0]);
        assert_eq!(back[0].steps[1].tokens, vec!["fry", "it", "!"]);
    }

    #[test]
    fn feature_file_round_trips_at_f32_precision() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("v.nif");
        let v = vec![0.1, -2.75, 1e-3];
        write_feature_file(&path, &v).unwrap();
        let back = read_feature_file(&path).unwrap();
        for (a, b) in v.iter().zip(&back) {
            assert_eq!(*a as f32 as f64, *b);
        }
    }

    #[test]
    fn truncated_feature_file_is_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("bad.nif");
        let mut bytes = b"NIF1".to_vec();
        bytes.extend_from_slice(&3u32.to_le_bytes());
        bytes.extend_from_slice(&1.0f32.to_le_bytes()); // one float, dimension says three
        fs::write(&path, bytes).unwrap();
        assert!(read_feature_file(&path).is_err());
    }
}
