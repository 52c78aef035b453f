//! File formats: JSON-lines corpora, reports, and atomic writes.

use std::collections::BTreeMap;
use std::fs;
use std::io::{BufRead, BufReader, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::DataInput;

/// Writes `bytes` to a sibling temporary file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path
        .parent()
        .filter(|p| !p.as_os_str().is_empty())
        .unwrap_or(Path::new("."));
    let name = path
        .file_name()
        .ok_or_else(|| Error::Config(format!("not a file path: {}", path.display())))?;
    let tmp = dir.join(format!(".{}.tmp{}", name.to_string_lossy(), std::process::id()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path).map_err(|e| {
        let _ = fs::remove_file(&tmp);
        Error::Io(e)
    })
}

/// Splits punctuation off word edges so that text and values share one
/// whitespace token granularity. Inner punctuation (`family-friendly`,
/// `£20-25`, `4.5`) is kept.
pub fn normalize_text(text: &str) -> String {
    const EDGE: &[char] = &['.', ',', '!', '?', ';', ':', '(', ')', '"'];
    let mut out: Vec<&str> = Vec::new();
    for word in text.split_whitespace() {
        let mut w = word;
        let mut lead = Vec::new();
        while let Some(c) = w.chars().next().filter(|c| EDGE.contains(c)) {
            lead.push(&w[..c.len_utf8()]);
            w = &w[c.len_utf8()..];
        }
        let mut trail = Vec::new();
        while let Some(c) = w.chars().last().filter(|c| EDGE.contains(c)) {
            trail.push(&w[w.len() - c.len_utf8()..]);
            w = &w[..w.len() - c.len_utf8()];
        }
        out.extend(lead);
        if !w.is_empty() {
            out.push(w);
        }
        out.extend(trail.into_iter().rev());
    }
    out.join(" ")
}

/// One corpus line.
#[derive(Clone, Debug, PartialEq)]
pub struct Record {
    pub data: DataInput,
    /// Reference text, already normalized.
    pub text: Option<String>,
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    id: String,
    data: BTreeMap<String, Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    text: Option<String>,
}

/// Parses one corpus line; `line` is 1-based, used in errors.
pub fn parse_record(text: &str, line: usize) -> Result<Record> {
    let raw: RawRecord = serde_json::from_str(text).map_err(|e| Error::MalformedCorpus {
        line,
        reason: e.to_string(),
    })?;
    let entries = raw
        .data
        .into_iter()
        .map(|(f, vs)| (f, vs.iter().map(|v| normalize_text(v)).collect()))
        .collect();
    let data = DataInput::new(raw.id, entries).map_err(|e| Error::MalformedCorpus {
        line,
        reason: e.to_string(),
    })?;
    Ok(Record {
        data,
        text: raw.text.map(|t| normalize_text(&t)),
    })
}

/// Reads a JSON-lines corpus. Blank lines are skipped.
pub fn read_corpus(path: &Path) -> Result<Vec<Record>> {
    let reader = BufReader::new(fs::File::open(path)?);
    let mut records = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        records.push(parse_record(&line, i + 1)?);
    }
    Ok(records)
}

pub fn record_to_json(record: &Record) -> Result<String> {
    Ok(serde_json::to_string(&RawRecord {
        id: record.data.id().to_owned(),
        data: record.data.entries().clone(),
        text: record.text.clone(),
    })?)
}

/// Serializes each item as one JSON line.
pub fn to_jsonl<T: Serialize>(items: impl IntoIterator<Item = T>) -> Result<String> {
    let mut out = String::new();
    for item in items {
        out.push_str(&serde_json::to_string(&item)?);
        out.push('\n');
    }
    Ok(out)
}

/// Template id to constituent spans `[start, end)`.
pub type SpanSidecar = BTreeMap<String, Vec<(usize, usize)>>;

pub fn read_span_sidecar(path: &Path) -> Result<SpanSidecar> {
    Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn punctuation_is_split_from_word_edges() {
        assert_eq!(normalize_text("Aromi, a café."), "Aromi , a café .");
        assert_eq!(normalize_text("(family-friendly) £20-25"), "( family-friendly ) £20-25");
        assert_eq!(normalize_text("rated 4.5!"), "rated 4.5 !");
        assert_eq!(normalize_text("  "), "");
    }

    #[test]
    fn malformed_lines_report_their_number() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("corpus.jsonl");
        fs::write(
            &path,
            "{\"id\":\"a\",\"data\":{\"name\":[\"A\"]}}\n\n{\"id\":\"b\",\"data\":{\"name\":[]}}\n",
        )
        .unwrap();
        match read_corpus(&path) {
            Err(Error::MalformedCorpus { line, .. }) => assert_eq!(line, 3),
            other => panic!("unexpected {other:?}"),
        }
        fs::write(
            &path,
            "{\"id\":\"a\",\"data\":{\"name\":[\"A.\"]},\"text\":\"A is good.\"}\n",
        )
        .unwrap();
        let records = read_corpus(&path).unwrap();
        assert_eq!(records[0].text.as_deref(), Some("A is good ."));
        assert_eq!(records[0].data.values("name").unwrap(), ["A ."]);
    }

    #[test]
    fn atomic_write_replaces_content() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("out.json");
        write_atomic(&path, b"one").unwrap();
        write_atomic(&path, b"two").unwrap();
        assert_eq!(fs::read_to_string(&path).unwrap(), "two");
        assert_eq!(fs::read_dir(dir.path()).unwrap().count(), 1);
    }
}
