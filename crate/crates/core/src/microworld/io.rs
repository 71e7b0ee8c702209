//! Line-delimited JSON dataset files. Every record carries a mandatory
//! `schema_version` field next to its payload.

use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{CaptionedExample, Corpus, QAExample, Scene};
use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

pub const SCENES_FILE: &str = "scenes.jsonl";
pub const CAPTIONS_FILE: &str = "captions.jsonl";
pub const QA_FILE: &str = "qa.jsonl";

#[derive(Serialize, Deserialize)]
struct Record<T> {
    schema_version: u32,
    #[serde(flatten)]
    payload: T,
}

pub fn write_jsonl<T: Serialize>(path: &Path, records: &[T]) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    for payload in records {
        let line = serde_json::to_string(&Record {
            schema_version: SCHEMA_VERSION,
            payload,
        })?;
        writeln!(w, "{line}").map_err(|e| Error::io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn read_jsonl<T: DeserializeOwned>(path: &Path) -> Result<Vec<T>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = Vec::new();
    for (i, line) in BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let parse_err = |detail: String| Error::Parse {
            path: path.display().to_string(),
            line: i + 1,
            detail,
        };
        let rec: Record<T> = serde_json::from_str(&line).map_err(|e| parse_err(e.to_string()))?;
        if rec.schema_version != SCHEMA_VERSION {
            return Err(parse_err(format!(
                "schema_version {} (expected {SCHEMA_VERSION})",
                rec.schema_version
            )));
        }
        out.push(rec.payload);
    }
    Ok(out)
}

pub fn write_corpus(dir: &Path, corpus: &Corpus) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    write_jsonl(&dir.join(SCENES_FILE), &corpus.scenes)?;
    write_jsonl(&dir.join(CAPTIONS_FILE), &corpus.captions)?;
    write_jsonl(&dir.join(QA_FILE), &corpus.qa)
}

pub fn read_corpus(dir: &Path) -> Result<Corpus> {
    Ok(Corpus {
        scenes: read_jsonl::<Scene>(&dir.join(SCENES_FILE))?,
        captions: read_jsonl::<CaptionedExample>(&dir.join(CAPTIONS_FILE))?,
        qa: read_jsonl::<QAExample>(&dir.join(QA_FILE))?,
    })
}
