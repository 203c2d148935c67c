use std::collections::BTreeMap;

use fairaudit_core::data::{
    aggregate_sentences, load_predictions_from_reader, select_backward, window_note, write_predictions, DataError,
    FileFormat, PredictionRecord, Split, ATTRIBUTES,
};
use proptest::prelude::*;

fn split_strategy() -> impl Strategy<Value = Split> {
    prop_oneof![Just(Split::Train), Just(Split::Validation), Just(Split::Test)]
}

// Values the loader keeps verbatim: no surrounding whitespace, never empty.
fn value_strategy() -> impl Strategy<Value = String> {
    "[A-Za-z0-9][A-Za-z0-9 ,\"'.-]{0,10}[A-Za-z0-9]"
}

fn record_strategy(i: usize) -> impl Strategy<Value = PredictionRecord> {
    (
        value_strategy(),
        0u32..50,
        value_strategy(),
        split_strategy(),
        0.0f64..=1.0,
        0u8..=1,
        proptest::collection::vec(value_strategy(), ATTRIBUTES.len()),
    )
        .prop_map(
            move |(note_id, subsequence_index, task_id, split, probability, label, values)| PredictionRecord {
                patient_id: format!("p{i}"),
                note_id,
                subsequence_index,
                task_id,
                split,
                probability,
                label,
                attributes: ATTRIBUTES.iter().map(|a| a.to_string()).zip(values).collect(),
            },
        )
}

fn records_strategy() -> impl Strategy<Value = Vec<PredictionRecord>> {
    (0usize..20).prop_flat_map(|n| (0..n).map(record_strategy).collect::<Vec<_>>())
}

proptest! {
    #[test]
    fn csv_and_jsonl_round_trip(records in records_strategy()) {
        for format in [FileFormat::Csv, FileFormat::Jsonl] {
            let mut buf = Vec::new();
            write_predictions(&mut buf, &records, format, &["generated".to_string()]).unwrap();
            let back = load_predictions_from_reader(buf.as_slice(), format).unwrap();
            prop_assert_eq!(&back, &records);
        }
    }
}

#[test]
fn split_leak_names_the_row() {
    let text = "patient_id,note_id,subsequence_index,task_id,split,probability,label\n\
                p1,n1,0,t,train,0.5,1\n\
                p1,n2,0,t,test,0.5,1\n";
    match load_predictions_from_reader(text.as_bytes(), FileFormat::Csv) {
        Err(DataError::SplitLeak { patient_id, row, .. }) => {
            assert_eq!(patient_id, "p1");
            assert_eq!(row, 2);
        }
        other => panic!("expected a split leak, got {other:?}"),
    }
}

#[test]
fn missing_attributes_become_unknown() {
    let text = "patient_id,note_id,subsequence_index,task_id,split,probability,label,gender\n\
                p1,n1,0,t,test,0.25,0,\n";
    let records = load_predictions_from_reader(text.as_bytes(), FileFormat::Csv).unwrap();
    assert_eq!(records[0].attribute("gender"), Some("UNKNOWN"));
    assert_eq!(records[0].attribute("insurance"), Some("UNKNOWN"));
}

#[test]
fn bad_probability_is_reported() {
    let text = "patient_id,note_id,subsequence_index,task_id,split,probability,label\np1,n1,0,t,test,1.5,0\n";
    let err = load_predictions_from_reader(text.as_bytes(), FileFormat::Csv).unwrap_err();
    assert!(matches!(err, DataError::MalformedRow { row: 1, ref field, .. } if field == "probability"));
}

/// Brute-force characterisation of greedy aggregation: every group but the
/// last reaches `min`, and would not have without its final sentence.
fn check_aggregation(lengths: &[usize], min: usize) -> Result<(), TestCaseError> {
    let mut next = 0usize;
    let sentences: Vec<Vec<usize>> = lengths
        .iter()
        .map(|&l| {
            let s: Vec<usize> = (next..next + l).collect();
            next += l;
            s
        })
        .collect();
    let groups = aggregate_sentences(&sentences, min);
    let flat: Vec<usize> = groups.iter().flatten().copied().collect();
    prop_assert_eq!(flat, (0..next).collect::<Vec<_>>());

    let starts: BTreeMap<usize, usize> = {
        let mut m = BTreeMap::new();
        let mut pos = 0;
        for (i, s) in sentences.iter().enumerate() {
            m.insert(pos, i);
            pos += s.len();
        }
        m
    };
    let mut pos = 0;
    for (g, group) in groups.iter().enumerate() {
        // Groups begin on sentence boundaries.
        prop_assert!(starts.contains_key(&pos));
        let last = g + 1 == groups.len();
        if !last {
            prop_assert!(group.len() >= min);
            let end = pos + group.len();
            let last_start = starts.range(..end).next_back().map(|(&s, _)| s).unwrap();
            prop_assert!(last_start - pos < min, "group kept growing after reaching the minimum");
        }
        pos += group.len();
    }
    Ok(())
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn aggregation_is_greedy(lengths in proptest::collection::vec(1usize..12, 0..20), min in 1usize..30) {
        check_aggregation(&lengths, min)?;
    }

    #[test]
    fn windows_match_reference(len in 0usize..200, window in 1usize..40, stride_frac in 0.0f64..1.0, max in 1usize..12) {
        let stride = 1 + ((window - 1) as f64 * stride_frac) as usize;
        let tokens: Vec<usize> = (0..len).collect();
        let got: Vec<(usize, usize)> = window_note(&tokens, window, stride, max)
            .iter()
            .map(|w| (w[0], w.len()))
            .collect();
        let mut expected = Vec::new();
        let mut s = 0;
        while s < len && expected.len() < max {
            let e = (s + window).min(len);
            expected.push((s, e - s));
            if e == len {
                break;
            }
            s += stride;
        }
        prop_assert_eq!(got, expected);
    }

    #[test]
    fn backward_selection_keeps_the_tail(n in 0usize..60, limit in 1usize..80) {
        let items: Vec<usize> = (0..n).collect();
        let kept = select_backward(&items, limit);
        prop_assert_eq!(kept.len(), n.min(limit));
        prop_assert!(kept.iter().copied().eq(n - kept.len()..n));
    }
}
