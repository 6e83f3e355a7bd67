use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{ClassId, Dataset, LabelMap, LabeledSentence, SplitSpec, Splits};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DataFormat {
    Csv,
    Jsonl,
}

impl DataFormat {
    /// Guesses the format from a file extension.
    pub fn from_path(path: &Path) -> Option<Self> {
        match path.extension()?.to_str()?.to_ascii_lowercase().as_str() {
            "csv" => Some(Self::Csv),
            "jsonl" | "ndjson" => Some(Self::Jsonl),
            _ => None,
        }
    }
}

/// Corpus line format shared by datasets, synthesized sets and pools.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JsonlRecord {
    pub text: String,
    pub label: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub provenance: Option<String>,
}

/// Loads a labeled corpus. When `labels` is given, records must use those
/// class names; otherwise ids are assigned in first-appearance order.
pub fn load_dataset(path: &Path, format: DataFormat, labels: Option<LabelMap>) -> Result<Dataset> {
    let file = File::open(path)?;
    read_dataset(file, format, &path.display().to_string(), labels)
}

pub fn read_dataset<R: Read>(
    reader: R,
    format: DataFormat,
    source_name: &str,
    labels: Option<LabelMap>,
) -> Result<Dataset> {
    let fixed = labels.is_some();
    let mut builder = Builder {
        source_name,
        labels: labels.unwrap_or_default(),
        fixed,
        items: Vec::new(),
    };
    match format {
        DataFormat::Csv => read_csv(reader, &mut builder)?,
        DataFormat::Jsonl => read_jsonl(reader, &mut builder)?,
    }
    if builder.items.is_empty() {
        return Err(Error::EmptyDataset(source_name.to_owned()));
    }
    Dataset::new(builder.labels, builder.items)
}

struct Builder<'a> {
    source_name: &'a str,
    labels: LabelMap,
    fixed: bool,
    items: Vec<LabeledSentence>,
}

impl Builder<'_> {
    fn err(&self, line: usize, message: impl Into<String>) -> Error {
        Error::Record {
            source_name: self.source_name.to_owned(),
            line,
            message: message.into(),
        }
    }

    fn push(&mut self, line: usize, text: Option<&str>, label: Option<&str>) -> Result<()> {
        let text = match text {
            Some(t) if !t.trim().is_empty() => t,
            Some(_) => return Err(self.err(line, "empty `text`")),
            None => return Err(self.err(line, "missing `text`")),
        };
        let label = match label {
            Some(l) if !l.trim().is_empty() => l,
            Some(_) => return Err(self.err(line, "empty `label`")),
            None => return Err(self.err(line, "missing `label`")),
        };
        let id: ClassId = if self.fixed {
            self.labels
                .id_of(label)
                .ok_or_else(|| self.err(line, format!("unknown label `{label}`")))?
        } else {
            self.labels
                .intern(label)
                .map_err(|e| self.err(line, e.to_string()))?
        };
        let sentence = LabeledSentence::new(text, id)
            .map_err(|_| self.err(line, "text has no tokens"))?;
        self.items.push(sentence);
        Ok(())
    }
}

fn read_csv<R: Read>(reader: R, b: &mut Builder<'_>) -> Result<()> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    let col = |name: &str| headers.iter().position(|h| h.trim() == name);
    let (text_col, label_col) = match (col("text"), col("label")) {
        (Some(t), Some(l)) => (t, l),
        _ => return Err(b.err(1, "header must contain `text` and `label` columns")),
    };
    for record in rdr.records() {
        let record = record?;
        let line = record.position().map_or(0, |p| p.line() as usize);
        b.push(line, record.get(text_col), record.get(label_col))?;
    }
    Ok(())
}

fn read_jsonl<R: Read>(reader: R, b: &mut Builder<'_>) -> Result<()> {
    for (i, line) in BufReader::new(reader).lines().enumerate() {
        let line_no = i + 1;
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let value: serde_json::Value = serde_json::from_str(&line)
            .map_err(|e| b.err(line_no, format!("invalid JSON: {e}")))?;
        let field = |k: &str| value.get(k).and_then(|v| v.as_str());
        if !value.is_object() {
            return Err(b.err(line_no, "expected a JSON object"));
        }
        b.push(line_no, field("text"), field("label"))?;
    }
    Ok(())
}

/// Writes `d` as JSONL, tagging each line with `provenance` when given.
pub fn write_jsonl(path: &Path, d: &Dataset, provenance: Option<&str>) -> Result<()> {
    write_jsonl_parts(path, &[(d, provenance)])
}

/// Writes several datasets into one JSONL file, each part with its own tag.
pub fn write_jsonl_parts(path: &Path, parts: &[(&Dataset, Option<&str>)]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for (d, provenance) in parts {
        for s in d.items() {
            let rec = JsonlRecord {
                text: s.text.clone(),
                label: d.labels().name(s.label).unwrap_or_default().to_owned(),
                provenance: provenance.map(str::to_owned),
            };
            serde_json::to_writer(&mut w, &rec)?;
            w.write_all(b"\n")?;
        }
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SplitManifest {
    pub seed: u64,
    pub ratios: [f64; 3],
    pub labels: LabelMap,
    pub files: [String; 3],
    pub counts: [usize; 3],
    #[serde(default)]
    pub warnings: Vec<String>,
}

impl SplitManifest {
    pub const FILE_NAME: &'static str = "manifest.json";

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_reader(BufReader::new(File::open(path)?))?)
    }
}

/// Writes `train.jsonl`, `validation.jsonl`, `test.jsonl` and
/// `manifest.json` into `dir`.
pub fn write_splits(dir: &Path, splits: &Splits, spec: &SplitSpec) -> Result<SplitManifest> {
    fs::create_dir_all(dir)?;
    let files = ["train.jsonl", "validation.jsonl", "test.jsonl"].map(String::from);
    let parts = [&splits.train, &splits.validation, &splits.test];
    for (name, part) in files.iter().zip(parts) {
        write_jsonl(&dir.join(name), part, None)?;
    }
    let manifest = SplitManifest {
        seed: spec.seed,
        ratios: spec.ratios,
        labels: splits.train.labels().clone(),
        files,
        counts: parts.map(Dataset::len),
        warnings: splits.warnings.clone(),
    };
    let mut w = BufWriter::new(File::create(dir.join(SplitManifest::FILE_NAME))?);
    serde_json::to_writer_pretty(&mut w, &manifest)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(manifest)
}
