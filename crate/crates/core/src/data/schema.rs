use std::collections::HashSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum FeatureKind {
    /// Dense integer codes `0..arity`.
    Categorical {
        arity: u32,
    },
    Numeric,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Feature {
    pub name: String,
    #[serde(flatten)]
    pub kind: FeatureKind,
}

impl Feature {
    pub fn numeric(name: impl Into<String>) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Numeric,
        }
    }

    pub fn categorical(name: impl Into<String>, arity: u32) -> Self {
        Feature {
            name: name.into(),
            kind: FeatureKind::Categorical { arity },
        }
    }
}

/// Ordered, named feature list. Names are unique, categorical arities are
/// at least two and the list is never empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FeatureSchema {
    features: Vec<Feature>,
}

/// Column names reserved by the CSV layout.
pub(crate) const RESERVED_COLUMNS: [&str; 4] = ["subject", "day", "seq", "label"];

impl FeatureSchema {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::usage("feature schema must not be empty"));
        }
        let mut seen = HashSet::new();
        for f in &features {
            if !seen.insert(f.name.as_str()) {
                return Err(Error::usage(format!("duplicate feature name `{}`", f.name)));
            }
            if RESERVED_COLUMNS.contains(&f.name.as_str()) {
                return Err(Error::usage(format!("feature name `{}` is reserved", f.name)));
            }
            if f.name.is_empty() || f.name.contains(',') {
                return Err(Error::usage(format!("invalid feature name `{}`", f.name)));
            }
            if let FeatureKind::Categorical { arity } = f.kind {
                if arity < 2 {
                    return Err(Error::usage(format!(
                        "categorical feature `{}` has arity {arity}, need at least 2",
                        f.name
                    )));
                }
            }
        }
        Ok(FeatureSchema { features })
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    pub fn len(&self) -> usize {
        self.features.len()
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }

    pub fn kind(&self, j: usize) -> FeatureKind {
        self.features[j].kind
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.features.iter().map(|f| f.name.as_str())
    }

    /// Checks that `values` conforms to the schema. On failure the message
    /// names the offending feature.
    pub fn check<T: Scalar>(&self, values: &[FeatureValue<T>]) -> std::result::Result<(), String> {
        if values.len() != self.features.len() {
            return Err(format!(
                "expected {} feature values, found {}",
                self.features.len(),
                values.len()
            ));
        }
        for (f, v) in self.features.iter().zip(values) {
            match (f.kind, v) {
                (FeatureKind::Numeric, FeatureValue::Numeric(x)) => {
                    if !x.is_finite() {
                        return Err(format!("feature `{}` is not finite", f.name));
                    }
                }
                (FeatureKind::Categorical { arity }, FeatureValue::Categorical(c)) => {
                    if *c >= arity {
                        return Err(format!("feature `{}` code {c} out of range 0..{arity}", f.name));
                    }
                }
                _ => return Err(format!("feature `{}` has the wrong kind", f.name)),
            }
        }
        Ok(())
    }
}

impl<'de> Deserialize<'de> for FeatureSchema {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        #[derive(Deserialize)]
        struct Raw {
            features: Vec<Feature>,
        }
        let raw = Raw::deserialize(d)?;
        FeatureSchema::new(raw.features).map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum FeatureValue<T> {
    Categorical(u32),
    Numeric(T),
}

impl<T: Scalar> FeatureValue<T> {
    pub fn as_numeric(&self) -> Option<T> {
        match *self {
            FeatureValue::Numeric(x) => Some(x),
            FeatureValue::Categorical(_) => None,
        }
    }

    pub fn as_code(&self) -> Option<u32> {
        match *self {
            FeatureValue::Categorical(c) => Some(c),
            FeatureValue::Numeric(_) => None,
        }
    }
}

/// Binary class label, written `-1` / `1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "i8", try_from = "i8")]
pub enum Class {
    Negative,
    Positive,
}

impl Class {
    #[inline]
    pub fn sign<T: Scalar>(self) -> T {
        match self {
            Class::Negative => -T::one(),
            Class::Positive => T::one(),
        }
    }

    /// `sign(F)` with `sign(0) = +1`.
    #[inline]
    pub fn from_score<T: Scalar>(f: T) -> Class {
        if f >= T::zero() {
            Class::Positive
        } else {
            Class::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Class::Positive
    }
}

impl From<Class> for i8 {
    fn from(c: Class) -> i8 {
        match c {
            Class::Negative => -1,
            Class::Positive => 1,
        }
    }
}

impl TryFrom<i8> for Class {
    type Error = String;

    fn try_from(v: i8) -> std::result::Result<Self, String> {
        match v {
            -1 => Ok(Class::Negative),
            1 => Ok(Class::Positive),
            other => Err(format!("label must be -1 or 1, found {other}")),
        }
    }
}

impl fmt::Display for Class {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", i8::from(*self))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct SubjectId(pub String);

impl SubjectId {
    pub fn as_str(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for SubjectId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<&str> for SubjectId {
    fn from(s: &str) -> Self {
        SubjectId(s.to_owned())
    }
}

impl From<String> for SubjectId {
    fn from(s: String) -> Self {
        SubjectId(s)
    }
}
