//! JSON Lines and JSON file helpers for corpus artifacts.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use super::{DialogueRecord, Fold, TrainingExample};
use crate::error::{Error, Result};

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let record = serde_json::from_str(&line).map_err(|e| {
            Error::validation(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?;
        out.push(record);
    }
    Ok(out)
}

/// Reads `corpus.jsonl`, validating every dialogue.
pub fn read_corpus(path: &Path) -> Result<Vec<DialogueRecord>> {
    let corpus: Vec<DialogueRecord> = read_jsonl(path)?;
    for d in &corpus {
        d.validate()?;
    }
    Ok(corpus)
}

pub fn write_corpus(path: &Path, corpus: &[DialogueRecord]) -> Result<()> {
    write_jsonl(path, corpus)
}

pub fn read_examples(path: &Path) -> Result<Vec<TrainingExample>> {
    read_jsonl(path)
}

pub fn write_examples(path: &Path, examples: &[TrainingExample]) -> Result<()> {
    write_jsonl(path, examples)
}

pub fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let reader = BufReader::new(File::open(path)?);
    serde_json::from_reader(reader)
        .map_err(|e| Error::validation(format!("{}: {e}", path.display())))
}

pub fn write_folds(path: &Path, folds: &[Fold]) -> Result<()> {
    write_json(path, folds)
}

pub fn read_folds(path: &Path) -> Result<Vec<Fold>> {
    read_json(path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::{synth_corpus, SynthConfig};

    #[test]
    fn corpus_file_uses_declared_field_names() {
        let cfg = SynthConfig {
            pairs: 4,
            utterances_per_dialogue: 6,
            ..SynthConfig::default()
        };
        let corpus = synth_corpus(&cfg, 5).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        write_corpus(&path, &corpus).unwrap();
        let text = std::fs::read_to_string(&path).unwrap();
        assert_eq!(text.lines().count(), 4);
        let first: serde_json::Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
        for key in ["pair_id", "profile_X", "profile_Y", "utterances", "events_X", "events_Y"] {
            assert!(first.get(key).is_some(), "missing {key}");
        }
        assert_eq!(read_corpus(&path).unwrap(), corpus);
    }

    #[test]
    fn invalid_record_is_rejected_at_load() {
        let cfg = SynthConfig {
            pairs: 4,
            utterances_per_dialogue: 6,
            ..SynthConfig::default()
        };
        let mut corpus = synth_corpus(&cfg, 5).unwrap();
        corpus[0].utterances[0].text = "  ".into();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        write_corpus(&path, &corpus).unwrap();
        assert!(read_corpus(&path).unwrap_err().is_validation());
    }
}
