//! Note preparation: PHI span re-encoding, sentence aggregation, windowing and
//! backward subsequence selection.

use std::borrow::Cow;
use std::sync::LazyLock;

use regex::{Captures, Regex};

static PHI_SPAN: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\[\*\*(.*?)\*\*\]").unwrap());
static DATE: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^\d+-\d+-\d+$").unwrap());
static NAME: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bName\b").unwrap());
static LOCATION: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\b(Hospital|Location)\b").unwrap());
static CONTACT: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"\bTelephone\b").unwrap());
static NUMERIC: LazyLock<Regex> = LazyLock::new(|| Regex::new(r"^[0-9][0-9\s]*$").unwrap());

fn sentinel(span: &str) -> &'static str {
    let span = span.trim();
    if DATE.is_match(span) {
        "[DEID_DATE]"
    } else if NAME.is_match(span) {
        "[DEID_NAME]"
    } else if LOCATION.is_match(span) {
        "[DEID_LOC]"
    } else if CONTACT.is_match(span) || NUMERIC.is_match(span) {
        "[DEID_CONTACT]"
    } else {
        "[DEID_OTHER]"
    }
}

/// Replace every `[** ... **]` deidentification span with a typed sentinel token.
///
/// Keywords (`Name`, `Hospital`, `Location`, `Telephone`) must appear as whole
/// words, so `Hospital1 23` falls through to `[DEID_OTHER]`.
pub fn normalize_phi(text: &str) -> Cow<'_, str> {
    PHI_SPAN.replace_all(text, |caps: &Captures| sentinel(&caps[1]))
}

/// Greedily merge consecutive sentences until each group holds at least
/// `min_tokens` tokens. The final group may be shorter. Sentences are never split.
pub fn aggregate_sentences<T: Clone>(sentences: &[Vec<T>], min_tokens: usize) -> Vec<Vec<T>> {
    assert!(min_tokens >= 1, "min_tokens must be at least 1");
    let mut out = Vec::new();
    let mut current: Vec<T> = Vec::new();
    for sentence in sentences {
        current.extend_from_slice(sentence);
        if current.len() >= min_tokens {
            out.push(std::mem::take(&mut current));
        }
    }
    if !current.is_empty() {
        out.push(current);
    }
    out
}

/// Split a token sequence into windows starting at `0, stride, 2*stride, ...`.
///
/// Stops once a window reaches the end of the input or `max_windows` windows
/// have been produced. The last window is truncated, never padded.
pub fn window_note<T>(tokens: &[T], window: usize, stride: usize, max_windows: usize) -> Vec<&[T]> {
    assert!(window >= 1, "window must be at least 1");
    assert!((1..=window).contains(&stride), "stride must lie in 1..=window");
    assert!(max_windows >= 1, "max_windows must be at least 1");

    let mut out = Vec::new();
    let mut start = 0;
    while start < tokens.len() && out.len() < max_windows {
        let end = (start + window).min(tokens.len());
        out.push(&tokens[start..end]);
        if end == tokens.len() {
            break;
        }
        start += stride;
    }
    out
}

/// Keep the chronologically last `limit` subsequences, in their original order.
pub fn select_backward<T>(subsequences: &[T], limit: usize) -> &[T] {
    assert!(limit >= 1, "limit must be at least 1");
    let keep = limit.min(subsequences.len());
    &subsequences[subsequences.len() - keep..]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn tokens(n: usize) -> Vec<usize> {
        (0..n).collect()
    }

    fn sentences(lengths: &[usize]) -> Vec<Vec<usize>> {
        let mut next = 0;
        lengths
            .iter()
            .map(|&len| {
                let s = (next..next + len).collect();
                next += len;
                s
            })
            .collect()
    }

    #[test]
    fn phi_date() {
        assert_eq!(normalize_phi("seen on [**2126-9-19**]"), "seen on [DEID_DATE]");
    }

    #[test]
    fn phi_no_spans_unchanged() {
        let text = "pt resting comfortably, vss";
        assert!(matches!(normalize_phi(text), Cow::Borrowed(_)));
        assert_eq!(normalize_phi(text), text);
    }

    #[test]
    fn phi_mixed_spans() {
        assert_eq!(
            normalize_phi("[**Hospital1 23**] and [**2126-9-19**]"),
            "[DEID_OTHER] and [DEID_DATE]"
        );
    }

    #[test]
    fn phi_taxonomy() {
        assert_eq!(normalize_phi("[**Last Name (un) **]"), "[DEID_NAME]");
        assert_eq!(normalize_phi("[**Hospital 1234**]"), "[DEID_LOC]");
        assert_eq!(normalize_phi("[**Location (un) 55**]"), "[DEID_LOC]");
        assert_eq!(normalize_phi("[**Telephone/Fax (1) 3**]"), "[DEID_CONTACT]");
        assert_eq!(normalize_phi("[**4982**]"), "[DEID_CONTACT]");
        assert_eq!(normalize_phi("[**MD Number(3) 1**]"), "[DEID_OTHER]");
    }

    #[test]
    fn phi_idempotent() {
        let once = normalize_phi("a [**2126-9-19**] b [**Known lastname 9**] c").into_owned();
        assert_eq!(normalize_phi(&once), once);
    }

    #[test]
    fn aggregate_greedy() {
        let groups = aggregate_sentences(&sentences(&[5, 8, 9, 30]), 20);
        let lens: Vec<_> = groups.iter().map(Vec::len).collect();
        assert_eq!(lens, [22, 30]);
    }

    #[test]
    fn aggregate_single_long_sentence() {
        let groups = aggregate_sentences(&sentences(&[25]), 20);
        assert_eq!(groups, sentences(&[25]));
    }

    #[test]
    fn aggregate_short_tail() {
        let groups = aggregate_sentences(&sentences(&[3, 4]), 20);
        let lens: Vec<_> = groups.iter().map(Vec::len).collect();
        assert_eq!(lens, [7]);
    }

    #[test]
    fn aggregate_empty() {
        assert!(aggregate_sentences::<usize>(&[], 20).is_empty());
    }

    #[test]
    fn windows_exact_multiple() {
        let t = tokens(1024);
        let w = window_note(&t, 512, 512, 10);
        assert_eq!(w.len(), 2);
        assert!(w.iter().all(|s| s.len() == 512));
    }

    #[test]
    fn windows_short_note() {
        let t = tokens(100);
        let w = window_note(&t, 512, 512, 10);
        assert_eq!(w.len(), 1);
        assert_eq!(w[0].len(), 100);
    }

    #[test]
    fn windows_capped() {
        let t = tokens(10_000);
        let w = window_note(&t, 512, 512, 10);
        assert_eq!(w.len(), 10);
        assert_eq!(*w.last().unwrap().last().unwrap(), 5119);
    }

    #[test]
    fn windows_overlapping_stop_at_end() {
        let t = tokens(600);
        let w = window_note(&t, 512, 256, 10);
        assert_eq!(w.len(), 2);
        assert_eq!(w[1], &t[256..600]);
    }

    #[test]
    fn backward_selection() {
        let x: Vec<_> = (0..40).collect();
        assert_eq!(select_backward(&x, 30), &x[10..]);
        let y: Vec<_> = (0..5).collect();
        assert_eq!(select_backward(&y, 30), &y[..]);
        assert_eq!(select_backward(&x, 1), &[39]);
    }
}
