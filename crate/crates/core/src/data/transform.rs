use std::collections::HashMap;

use super::dataset::{Dataset, Record};
use super::schema::SubjectId;
use crate::scalar::Scalar;

/// Early-prediction conversion: each record takes the label of the next
/// record (by `seq`) of the same subject on the same day. The last record
/// of every (subject, day) group is dropped, so the output has
/// `Σ max(0, group_size - 1)` records, in the input order of their sources.
pub fn to_early_prediction<T: Scalar>(ds: &Dataset<T>) -> Dataset<T> {
    let succ = successors(ds);
    let records = ds
        .records()
        .iter()
        .zip(&succ)
        .filter_map(|(r, next)| {
            next.map(|k| Record {
                label: ds.record(k).label,
                ..r.clone()
            })
        })
        .collect();
    Dataset::new(ds.schema().clone(), records).expect("transform preserves dataset invariants")
}

/// For every record, the position of its same-(subject, day) successor.
pub fn successors<T: Scalar>(ds: &Dataset<T>) -> Vec<Option<usize>> {
    let mut groups: HashMap<(&SubjectId, u64), Vec<usize>> = HashMap::new();
    for (i, r) in ds.records().iter().enumerate() {
        groups.entry((&r.subject, r.day)).or_default().push(i);
    }
    let mut succ = vec![None; ds.len()];
    for members in groups.values_mut() {
        members.sort_by_key(|&i| ds.record(i).seq);
        for w in members.windows(2) {
            succ[w[0]] = Some(w[1]);
        }
    }
    succ
}

/// `Σ over (subject, day) groups of max(0, group_size - 1)`.
pub fn early_prediction_count<T: Scalar>(ds: &Dataset<T>) -> usize {
    let mut sizes: HashMap<(&SubjectId, u64), usize> = HashMap::new();
    for r in ds.records() {
        *sizes.entry((&r.subject, r.day)).or_default() += 1;
    }
    sizes.values().map(|&n| n.saturating_sub(1)).sum()
}
