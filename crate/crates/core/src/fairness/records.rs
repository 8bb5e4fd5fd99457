use std::collections::{BTreeSet, HashSet};
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const PREDICTION_HEADER: [&str; 8] =
    ["example_id", "group", "group_leaning", "gold", "pred", "score", "model_id", "seed"];

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Leaning {
    Left,
    Right,
    /// The source or target has no partisan leaning.
    #[serde(rename = "NONE")]
    Neutral,
}

impl Leaning {
    pub fn tag(self) -> &'static str {
        match self {
            Leaning::Left => "LEFT",
            Leaning::Right => "RIGHT",
            Leaning::Neutral => "NONE",
        }
    }
}

/// One downstream prediction, tagged with the group it concerns.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub example_id: String,
    pub group: String,
    pub group_leaning: Option<Leaning>,
    pub gold: String,
    pub pred: String,
    /// Confidence in `pred`.
    pub score: Option<f64>,
    pub model_id: String,
    pub seed: u64,
}

impl PredictionRecord {
    pub fn is_correct(&self) -> bool {
        self.gold == self.pred
    }
}

#[derive(Debug, Error)]
pub enum RecordError {
    #[error("{path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("prediction CSV: {0}")]
    Csv(#[from] csv::Error),
    #[error("prediction CSV header must be {expected:?}, found {found:?}")]
    BadHeader { expected: String, found: String },
    #[error("duplicate prediction for example {example_id:?}, model {model_id:?}, seed {seed}")]
    DuplicateKey { example_id: String, model_id: String, seed: u64 },
    #[error("row {row}: label {label:?} is not in the label set")]
    UnknownLabel { row: usize, label: String },
    #[error("row {row}: score {score} is outside [0, 1]")]
    BadScore { row: usize, score: f64 },
}

/// Checks key uniqueness, score range and labels. When `labels` is `None`
/// the label set is the set of gold labels, so a prediction naming a class
/// that never occurs as gold is rejected.
pub fn validate_predictions(
    records: &[PredictionRecord],
    labels: Option<&BTreeSet<String>>,
) -> Result<(), RecordError> {
    let inferred: BTreeSet<String>;
    let labels = match labels {
        Some(l) => l,
        None => {
            inferred = records.iter().map(|r| r.gold.clone()).collect();
            &inferred
        }
    };
    let mut seen = HashSet::new();
    for (i, r) in records.iter().enumerate() {
        // 1-based, counting the header as row 1
        let row = i + 2;
        if let Some(score) = r.score {
            if !(0.0..=1.0).contains(&score) {
                return Err(RecordError::BadScore { row, score });
            }
        }
        for label in [&r.gold, &r.pred] {
            if !labels.contains(label) {
                return Err(RecordError::UnknownLabel { row, label: label.clone() });
            }
        }
        if !seen.insert((r.example_id.as_str(), r.model_id.as_str(), r.seed)) {
            return Err(RecordError::DuplicateKey {
                example_id: r.example_id.clone(),
                model_id: r.model_id.clone(),
                seed: r.seed,
            });
        }
    }
    Ok(())
}

pub fn read_predictions<R: Read>(
    reader: R,
    labels: Option<&BTreeSet<String>>,
) -> Result<Vec<PredictionRecord>, RecordError> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if header != PREDICTION_HEADER {
        return Err(RecordError::BadHeader { expected: PREDICTION_HEADER.join(","), found: header.join(",") });
    }
    let records = rdr.deserialize().collect::<Result<Vec<PredictionRecord>, _>>()?;
    validate_predictions(&records, labels)?;
    Ok(records)
}

pub fn load_predictions(
    path: impl AsRef<Path>,
    labels: Option<&BTreeSet<String>>,
) -> Result<Vec<PredictionRecord>, RecordError> {
    let path = path.as_ref();
    let file =
        std::fs::File::open(path).map_err(|source| RecordError::Io { path: path.display().to_string(), source })?;
    read_predictions(file, labels)
}

pub fn write_predictions<W: Write>(writer: W, records: &[PredictionRecord]) -> Result<(), RecordError> {
    let mut wtr = csv::WriterBuilder::new().has_headers(false).from_writer(writer);
    wtr.write_record(PREDICTION_HEADER)?;
    for r in records {
        wtr.serialize(r)?;
    }
    wtr.flush().map_err(|source| RecordError::Io { path: "<writer>".into(), source })?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = "example_id,group,group_leaning,gold,pred,score,model_id,seed\n";

    #[test]
    fn reads_well_formed_rows() {
        let csv = format!(
            "{HEADER}e1,BLACK,NONE,hate,hate,0.9,roberta,1\ne2,CNN,LEFT,fake,real,,roberta,1\ne3,WOMEN,,real,fake,0.55,roberta,1\n"
        );
        let recs = read_predictions(csv.as_bytes(), None).unwrap();
        assert_eq!(recs.len(), 3);
        assert_eq!(recs[0].group_leaning, Some(Leaning::Neutral));
        assert_eq!(recs[1].score, None);
        assert_eq!(recs[2].group_leaning, None);
        assert_eq!(recs[1].group_leaning, Some(Leaning::Left));
    }

    #[test]
    fn rejects_bad_rows() {
        let csv = format!("{HEADER}e1,A,,hate,hate,1.2,m,1\n");
        assert!(matches!(read_predictions(csv.as_bytes(), None), Err(RecordError::BadScore { row: 2, .. })));

        let csv = format!("{HEADER}e1,A,,hate,hate,0.5,m,1\ne1,B,,hate,hate,0.5,m,1\n");
        assert!(matches!(read_predictions(csv.as_bytes(), None), Err(RecordError::DuplicateKey { .. })));
        // same example under another seed is fine
        let csv = format!("{HEADER}e1,A,,hate,hate,0.5,m,1\ne1,B,,hate,hate,0.5,m,2\n");
        assert!(read_predictions(csv.as_bytes(), None).is_ok());

        let csv = format!("{HEADER}e1,A,,hate,spam,0.5,m,1\n");
        assert!(matches!(read_predictions(csv.as_bytes(), None), Err(RecordError::UnknownLabel { .. })));

        let labels: BTreeSet<String> = ["hate".to_string(), "ok".to_string()].into();
        let csv = format!("{HEADER}e1,A,,hate,ok,0.5,m,1\n");
        assert!(read_predictions(csv.as_bytes(), Some(&labels)).is_ok());

        let csv = "id,group\n1,A\n";
        assert!(matches!(read_predictions(csv.as_bytes(), None), Err(RecordError::BadHeader { .. })));
    }

    #[test]
    fn write_then_read_round_trips() {
        let csv = format!("{HEADER}e1,\"Group, with comma\",RIGHT,hate,hate,0.125,m,3\ne2,B,,ok,hate,,m,3\n");
        let recs = read_predictions(csv.as_bytes(), None).unwrap();
        let mut out = Vec::new();
        write_predictions(&mut out, &recs).unwrap();
        assert_eq!(read_predictions(out.as_slice(), None).unwrap(), recs);
    }
}
