use std::collections::HashMap;

use bbt_core::data::{
    early_prediction_count, read_csv, to_csv_string, to_early_prediction, Class, Feature, FeatureSchema, FeatureValue,
    Record,
};
use bbt_core::Dataset;
use proptest::prelude::*;

fn schema() -> FeatureSchema {
    FeatureSchema::new(vec![Feature::numeric("x"), Feature::categorical("c", 4)]).unwrap()
}

/// Records with small subject/day ranges so groups collide, and seqs
/// unique within (subject, day) but in arbitrary order.
fn dataset() -> impl Strategy<Value = Dataset> {
    prop::collection::vec((0u8..4, 0u64..3, 0u64..40, -1e6f64..1e6, 0u32..4, any::<bool>()), 0..60).prop_map(|rows| {
        let mut seen = std::collections::HashSet::new();
        let records = rows
            .into_iter()
            .filter(|(s, d, q, ..)| seen.insert((*s, *d, *q)))
            .map(|(s, day, seq, x, c, pos)| Record {
                subject: format!("p{s}").into(),
                day,
                seq,
                features: vec![FeatureValue::Numeric(x), FeatureValue::Categorical(c)],
                label: if pos { Class::Positive } else { Class::Negative },
            })
            .collect();
        Dataset::new(schema(), records).unwrap()
    })
}

proptest! {
    #[test]
    fn early_prediction_count_and_pairing(ds in dataset()) {
        let out = to_early_prediction(&ds);
        let mut groups: HashMap<(String, u64), usize> = HashMap::new();
        for r in ds.records() {
            *groups.entry((r.subject.0.clone(), r.day)).or_default() += 1;
        }
        let expected: usize = groups.values().map(|&g| g.saturating_sub(1)).sum();
        prop_assert_eq!(out.len(), expected);
        prop_assert_eq!(early_prediction_count(&ds), expected);

        for r in out.records() {
            // The label must come from the next seq of the same subject and day.
            let next = ds
                .records()
                .iter()
                .filter(|o| o.subject == r.subject && o.day == r.day && o.seq > r.seq)
                .min_by_key(|o| o.seq)
                .expect("converted record has a same-day successor");
            prop_assert_eq!(r.label, next.label);
            let src = ds
                .records()
                .iter()
                .find(|o| o.subject == r.subject && o.day == r.day && o.seq == r.seq)
                .unwrap();
            prop_assert_eq!(&r.features, &src.features);
        }
    }

    #[test]
    fn csv_round_trip_is_exact(ds in dataset()) {
        let text = to_csv_string(&ds);
        let back: Dataset = read_csv(text.as_bytes(), ds.schema()).unwrap();
        prop_assert_eq!(back.records(), ds.records());
    }

    #[test]
    fn f32_csv_round_trip_is_exact(xs in prop::collection::vec(any::<f32>().prop_filter("finite", |x| x.is_finite()), 1..20)) {
        let schema = FeatureSchema::new(vec![Feature::numeric("x")]).unwrap();
        let records = xs
            .iter()
            .enumerate()
            .map(|(i, &x)| Record {
                subject: "a".into(),
                day: 0,
                seq: i as u64,
                features: vec![FeatureValue::Numeric(x)],
                label: Class::Positive,
            })
            .collect();
        let ds = bbt_core::data::Dataset::new(schema.clone(), records).unwrap();
        let back: bbt_core::Dataset32 = read_csv(to_csv_string(&ds).as_bytes(), &schema).unwrap();
        prop_assert_eq!(back.records(), ds.records());
    }
}

#[test]
fn transform_keeps_subjects_and_days_apart() {
    let mk = |s: &str, day, seq, label| Record {
        subject: s.into(),
        day,
        seq,
        features: vec![FeatureValue::Numeric(seq as f64), FeatureValue::Categorical(0)],
        label,
    };
    use Class::*;
    let ds = Dataset::new(
        schema(),
        vec![
            mk("a", 0, 0, Negative),
            mk("a", 1, 0, Positive),
            mk("b", 0, 1, Positive),
            mk("a", 0, 5, Positive),
        ],
    )
    .unwrap();
    let out = to_early_prediction(&ds);
    assert_eq!(out.len(), 1);
    let r = &out.records()[0];
    assert_eq!((r.subject.as_str(), r.day, r.seq, r.label), ("a", 0, 0, Positive));
}
