//! Annotation labels and the labels TSV shared by curation and annotation.

use std::fmt;
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::util::{escape_field, unescape_field};

pub const LABELS_HEADER: &str = "lemma\tconcept_id\tfinal_label";

/// 0 wrong mapping, 1 correct mapping, 2 not a symptom.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(try_from = "u8", into = "u8")]
pub enum Label {
    Incorrect,
    Correct,
    NotSymptom,
}

impl TryFrom<u8> for Label {
    type Error = String;
    fn try_from(v: u8) -> Result<Self, String> {
        match v {
            0 => Ok(Label::Incorrect),
            1 => Ok(Label::Correct),
            2 => Ok(Label::NotSymptom),
            other => Err(format!("label must be 0, 1 or 2, got {other}")),
        }
    }
}

impl From<Label> for u8 {
    fn from(l: Label) -> u8 {
        match l {
            Label::Incorrect => 0,
            Label::Correct => 1,
            Label::NotSymptom => 2,
        }
    }
}

impl fmt::Display for Label {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", u8::from(*self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct LabeledPair {
    pub lemma: String,
    pub concept_id: String,
    pub label: Label,
}

impl LabeledPair {
    pub fn new(lemma: &str, concept_id: &str, label: Label) -> Self {
        Self {
            lemma: lemma.to_string(),
            concept_id: concept_id.to_string(),
            label,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum LabelsError {
    #[error("i/o error: {0}")]
    Io(#[from] io::Error),
    #[error("labels line {line}: {message}")]
    Parse { line: usize, message: String },
}

pub fn write_labels<W: Write>(mut w: W, pairs: &[LabeledPair]) -> io::Result<()> {
    writeln!(w, "{LABELS_HEADER}")?;
    for p in pairs {
        writeln!(w, "{}\t{}\t{}", escape_field(&p.lemma), escape_field(&p.concept_id), p.label)?;
    }
    w.flush()
}

pub fn read_labels<R: BufRead>(r: R) -> Result<Vec<LabeledPair>, LabelsError> {
    let mut out = Vec::new();
    for (i, line) in r.lines().enumerate() {
        let line = line?;
        let line = line.trim_end_matches('\r');
        if (i == 0 && line == LABELS_HEADER) || line.trim().is_empty() {
            continue;
        }
        let bad = |message: String| LabelsError::Parse { line: i + 1, message };
        let cells: Vec<&str> = line.split('\t').collect();
        if cells.len() != 3 {
            return Err(bad("expected lemma, concept_id, final_label".into()));
        }
        let label = cells[2].trim().parse::<u8>().map_err(|e| bad(e.to_string())).and_then(|v| Label::try_from(v).map_err(bad))?;
        out.push(LabeledPair {
            lemma: unescape_field(cells[0]),
            concept_id: unescape_field(cells[1]),
            label,
        });
    }
    Ok(out)
}
