use std::collections::HashSet;

use indexmap::IndexMap;

use super::schema::{Class, FeatureSchema, FeatureValue, SubjectId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// One EMA observation.
#[derive(Debug, Clone, PartialEq)]
pub struct Record<T> {
    pub subject: SubjectId,
    pub day: u64,
    /// Within-day order; only relative order matters.
    pub seq: u64,
    pub features: Vec<FeatureValue<T>>,
    pub label: Class,
}

/// Immutable collection of records sharing one schema.
///
/// `(subject, day, seq)` keys are unique. Subjects are indexed in order of
/// first appearance, which fixes every subject-level iteration order.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset<T> {
    schema: FeatureSchema,
    records: Vec<Record<T>>,
    subject_index: IndexMap<SubjectId, Vec<usize>>,
}

impl<T: Scalar> Dataset<T> {
    pub fn new(schema: FeatureSchema, records: Vec<Record<T>>) -> Result<Self> {
        let mut keys = HashSet::with_capacity(records.len());
        let mut subject_index: IndexMap<SubjectId, Vec<usize>> = IndexMap::new();
        for (i, r) in records.iter().enumerate() {
            schema
                .check(&r.features)
                .map_err(|m| Error::usage(format!("record {i}: {m}")))?;
            if !keys.insert((&r.subject, r.day, r.seq)) {
                return Err(Error::Integrity(format!(
                    "duplicate (subject, day, seq) = ({}, {}, {})",
                    r.subject, r.day, r.seq
                )));
            }
            subject_index.entry(r.subject.clone()).or_default().push(i);
        }
        Ok(Dataset {
            schema,
            records,
            subject_index,
        })
    }

    pub fn empty(schema: FeatureSchema) -> Self {
        Dataset {
            schema,
            records: Vec::new(),
            subject_index: IndexMap::new(),
        }
    }

    pub fn schema(&self) -> &FeatureSchema {
        &self.schema
    }

    pub fn records(&self) -> &[Record<T>] {
        &self.records
    }

    pub fn record(&self, i: usize) -> &Record<T> {
        &self.records[i]
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Number of distinct subjects (P).
    pub fn n_subjects(&self) -> usize {
        self.subject_index.len()
    }

    pub fn subjects(&self) -> impl ExactSizeIterator<Item = &SubjectId> {
        self.subject_index.keys()
    }

    /// Record positions of one subject, in dataset order.
    pub fn subject_records(&self, s: &SubjectId) -> Option<&[usize]> {
        self.subject_index.get(s).map(Vec::as_slice)
    }

    pub fn subject_index(&self) -> &IndexMap<SubjectId, Vec<usize>> {
        &self.subject_index
    }

    pub fn count_class(&self, c: Class) -> usize {
        self.records.iter().filter(|r| r.label == c).count()
    }

    /// Records of the given subjects, in original order.
    pub fn filter_subjects(&self, keep: &HashSet<&SubjectId>) -> Dataset<T> {
        let records: Vec<_> = self
            .records
            .iter()
            .filter(|r| keep.contains(&r.subject))
            .cloned()
            .collect();
        Dataset::new(self.schema.clone(), records).expect("subset of a valid dataset is valid")
    }

    pub fn into_records(self) -> Vec<Record<T>> {
        self.records
    }
}

/// A multiset of rows drawn from a dataset. Learners train on samples so
/// that bootstrap draws never copy records.
#[derive(Debug, Clone)]
pub struct Sample<'a, T> {
    data: &'a Dataset<T>,
    rows: Vec<usize>,
}

impl<'a, T: Scalar> Sample<'a, T> {
    pub fn full(data: &'a Dataset<T>) -> Self {
        Sample {
            data,
            rows: (0..data.len()).collect(),
        }
    }

    pub fn new(data: &'a Dataset<T>, rows: Vec<usize>) -> Result<Self> {
        if let Some(&bad) = rows.iter().find(|&&r| r >= data.len()) {
            return Err(Error::usage(format!(
                "row {bad} out of range for dataset of {} records",
                data.len()
            )));
        }
        Ok(Sample { data, rows })
    }

    pub fn data(&self) -> &'a Dataset<T> {
        self.data
    }

    pub fn schema(&self) -> &'a FeatureSchema {
        self.data.schema()
    }

    pub fn rows(&self) -> &[usize] {
        &self.rows
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// The `i`-th member of the sample.
    #[inline]
    pub fn get(&self, i: usize) -> &'a Record<T> {
        &self.data.records[self.rows[i]]
    }

    pub fn iter(&self) -> impl ExactSizeIterator<Item = &'a Record<T>> + '_ {
        self.rows.iter().map(move |&r| &self.data.records[r])
    }

    pub fn labels(&self) -> Vec<Class> {
        self.iter().map(|r| r.label).collect()
    }
}
