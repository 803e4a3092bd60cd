//! CSV layout: `subject,day,seq,<feature names...>,label`.
//!
//! Numeric features use the shortest decimal form that round-trips, so
//! `load_csv(write_csv(ds)) == ds` exactly. Categorical features are their
//! integer codes; labels are the literals `-1` and `1`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::dataset::{Dataset, Record};
use super::schema::{Class, FeatureKind, FeatureSchema, FeatureValue, SubjectId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// An unlabeled row, as accepted for prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureRow<T> {
    pub subject: SubjectId,
    pub day: u64,
    pub seq: u64,
    pub features: Vec<FeatureValue<T>>,
    pub label: Option<Class>,
}

pub fn header(schema: &FeatureSchema) -> Vec<String> {
    let mut h = vec!["subject".to_owned(), "day".to_owned(), "seq".to_owned()];
    h.extend(schema.names().map(str::to_owned));
    h.push("label".to_owned());
    h
}

pub fn load_csv<T: Scalar>(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Dataset<T>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file, schema)
}

pub fn read_csv<T: Scalar, R: Read>(reader: R, schema: &FeatureSchema) -> Result<Dataset<T>> {
    let rows = read_rows(reader, schema, true)?;
    let records = rows
        .into_iter()
        .map(|r| Record {
            subject: r.subject,
            day: r.day,
            seq: r.seq,
            features: r.features,
            label: r.label.expect("label column is required"),
        })
        .collect();
    Dataset::new(schema.clone(), records)
}

/// Reads rows whose `label` column may be absent. Used for prediction input.
pub fn load_feature_rows<T: Scalar>(path: impl AsRef<Path>, schema: &FeatureSchema) -> Result<Vec<FeatureRow<T>>> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    read_rows(file, schema, false)
}

fn read_rows<T: Scalar, R: Read>(reader: R, schema: &FeatureSchema, require_label: bool) -> Result<Vec<FeatureRow<T>>> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let expected = header(schema);
    let found: Vec<String> = rdr.headers()?.iter().map(|s| s.trim().to_owned()).collect();
    let has_label = if found == expected {
        true
    } else if !require_label && found[..] == expected[..expected.len() - 1] {
        false
    } else {
        return Err(Error::Parse {
            row: 0,
            message: format!(
                "header mismatch: expected `{}`, found `{}`",
                expected.join(","),
                found.join(",")
            ),
        });
    };
    let n_cols = if has_label { expected.len() } else { expected.len() - 1 };

    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let row = i + 1;
        let rec = rec?;
        let perr = |message: String| Error::Parse { row, message };
        if rec.len() != n_cols {
            return Err(perr(format!("expected {n_cols} fields, found {}", rec.len())));
        }
        let subject = rec[0].trim();
        if subject.is_empty() {
            return Err(perr("empty subject id".into()));
        }
        let day: u64 = rec[1]
            .trim()
            .parse()
            .map_err(|_| perr(format!("day `{}` is not a non-negative integer", &rec[1])))?;
        let seq: u64 = rec[2]
            .trim()
            .parse()
            .map_err(|_| perr(format!("seq `{}` is not a non-negative integer", &rec[2])))?;
        let mut features = Vec::with_capacity(schema.len());
        for (j, f) in schema.features().iter().enumerate() {
            let raw = rec[3 + j].trim();
            let v = match f.kind {
                FeatureKind::Numeric => {
                    let x: T = raw
                        .parse()
                        .map_err(|_| perr(format!("feature `{}`: `{raw}` is not numeric", f.name)))?;
                    if !x.is_finite() {
                        return Err(perr(format!("feature `{}`: `{raw}` is not finite", f.name)));
                    }
                    FeatureValue::Numeric(x)
                }
                FeatureKind::Categorical { arity } => {
                    let c: u32 = raw
                        .parse()
                        .map_err(|_| perr(format!("feature `{}`: `{raw}` is not a category code", f.name)))?;
                    if c >= arity {
                        return Err(perr(format!("feature `{}`: code {c} out of range 0..{arity}", f.name)));
                    }
                    FeatureValue::Categorical(c)
                }
            };
            features.push(v);
        }
        let label = if has_label {
            let raw = rec[n_cols - 1].trim();
            let label = match raw {
                "-1" => Class::Negative,
                "1" | "+1" => Class::Positive,
                other => return Err(perr(format!("label `{other}` is not -1 or 1"))),
            };
            Some(label)
        } else {
            None
        };
        out.push(FeatureRow {
            subject: SubjectId(subject.to_owned()),
            day,
            seq,
            features,
            label,
        });
    }
    Ok(out)
}

/// Writes `ds` to `path`, replacing any existing file.
pub fn write_csv<T: Scalar>(ds: &Dataset<T>, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(ds, file)?;
    Ok(())
}

pub fn write_csv_to<T: Scalar, W: Write>(ds: &Dataset<T>, writer: W) -> Result<()> {
    let mut w = csv::WriterBuilder::new().from_writer(writer);
    w.write_record(header(ds.schema()))?;
    let mut fields: Vec<String> = Vec::with_capacity(ds.schema().len() + 4);
    for r in ds.records() {
        fields.clear();
        fields.push(r.subject.0.clone());
        fields.push(r.day.to_string());
        fields.push(r.seq.to_string());
        for v in &r.features {
            fields.push(match v {
                FeatureValue::Numeric(x) => x.to_string(),
                FeatureValue::Categorical(c) => c.to_string(),
            });
        }
        fields.push(r.label.to_string());
        w.write_record(&fields)?;
    }
    w.flush().map_err(|e| Error::io("<csv writer>", e))?;
    Ok(())
}

pub fn to_csv_string<T: Scalar>(ds: &Dataset<T>) -> String {
    let mut buf = Vec::new();
    write_csv_to(ds, &mut buf).expect("writing to memory cannot fail");
    String::from_utf8(buf).expect("csv output is UTF-8")
}
