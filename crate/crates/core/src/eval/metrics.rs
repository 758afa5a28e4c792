use crate::error::{Error, Result};

/// Unit-cost edit distance (insert, delete, substitute), two-row DP.
pub fn edit_distance<T: PartialEq>(a: &[T], b: &[T]) -> usize {
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, x) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, y) in b.iter().enumerate() {
            let sub = prev[j] + usize::from(x != y);
            cur[j + 1] = sub.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Character-level Levenshtein distance.
pub fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    edit_distance(&a, &b)
}

fn check<S: AsRef<str>>(refs: &[S], hyps: &[S]) -> Result<()> {
    if refs.len() != hyps.len() {
        return Err(Error::InvalidArgument {
            op: "metrics",
            msg: format!("{} references but {} hypotheses", refs.len(), hyps.len()),
        });
    }
    match refs.iter().position(|r| r.as_ref().is_empty()) {
        Some(i) => Err(Error::EmptyReference(i)),
        None => Ok(()),
    }
}

/// Sum of values in ascending order, so the result does not depend on the
/// order in which examples were evaluated.
pub(crate) fn ordered_sum(mut values: Vec<f64>) -> f64 {
    values.sort_by(f64::total_cmp);
    values.into_iter().sum()
}

/// Per-example normalized accuracy `1 − d / max(|ref|, |hyp|)`.
pub fn example_la(reference: &str, hypothesis: &str) -> f64 {
    let longest = reference.chars().count().max(hypothesis.chars().count());
    if longest == 0 {
        return 1.0;
    }
    1.0 - levenshtein(reference, hypothesis) as f64 / longest as f64
}

/// Mean normalized Levenshtein accuracy.
pub fn la<S: AsRef<str>>(refs: &[S], hyps: &[S]) -> Result<f64> {
    check(refs, hyps)?;
    if refs.is_empty() {
        return Ok(1.0);
    }
    let per = refs.iter().zip(hyps).map(|(r, h)| example_la(r.as_ref(), h.as_ref())).collect();
    Ok(ordered_sum(per) / refs.len() as f64)
}

/// Summed character edit distance over summed reference length.
pub fn cer<S: AsRef<str>>(refs: &[S], hyps: &[S]) -> Result<f64> {
    check(refs, hyps)?;
    let d: usize = refs.iter().zip(hyps).map(|(r, h)| levenshtein(r.as_ref(), h.as_ref())).sum();
    let n: usize = refs.iter().map(|r| r.as_ref().chars().count()).sum();
    Ok(if n == 0 { 0.0 } else { d as f64 / n as f64 })
}

pub fn word_distance(reference: &str, hypothesis: &str) -> (usize, usize) {
    let r: Vec<&str> = reference.split_whitespace().collect();
    let h: Vec<&str> = hypothesis.split_whitespace().collect();
    (edit_distance(&r, &h), r.len())
}

/// Word error rate over whitespace-split tokens.
pub fn wer<S: AsRef<str>>(refs: &[S], hyps: &[S]) -> Result<f64> {
    check(refs, hyps)?;
    let (d, n) = refs
        .iter()
        .zip(hyps)
        .map(|(r, h)| word_distance(r.as_ref(), h.as_ref()))
        .fold((0, 0), |(d, n), (a, b)| (d + a, n + b));
    Ok(if n == 0 { 0.0 } else { d as f64 / n as f64 })
}

#[cfg(test)]
mod tests {
    use super::*;

    /// Exhaustive recursion straight from the definition.
    fn oracle(a: &[u8], b: &[u8]) -> usize {
        match (a.split_first(), b.split_first()) {
            (None, _) => b.len(),
            (_, None) => a.len(),
            (Some((x, ra)), Some((y, rb))) => {
                let sub = oracle(ra, rb) + usize::from(x != y);
                sub.min(oracle(ra, b) + 1).min(oracle(a, rb) + 1)
            }
        }
    }

    fn strings(max_len: usize) -> Vec<Vec<u8>> {
        let mut out = vec![vec![]];
        let mut frontier = vec![vec![]];
        for _ in 0..max_len {
            frontier = frontier
                .iter()
                .flat_map(|s: &Vec<u8>| b"abc".iter().map(move |&c| [s.as_slice(), &[c]].concat()))
                .collect();
            out.extend(frontier.iter().cloned());
        }
        out
    }

    #[test]
    fn matches_recursion_on_short_strings() {
        let all = strings(3);
        for a in &all {
            for b in &all {
                assert_eq!(edit_distance(a, b), oracle(a, b));
            }
        }
    }

    #[test]
    fn examples() {
        assert_eq!(levenshtein("kitten", "sitting"), 3);
        assert_eq!(levenshtein("same", "same"), 0);
        assert_eq!(levenshtein("", "abc"), 3);
        assert_eq!(levenshtein("été", "ete"), 2);
    }

    #[test]
    fn metric_examples() {
        let refs = ["ab", "hello world"];
        assert_eq!(la(&refs, &refs).unwrap(), 1.0);
        assert_eq!(cer(&refs, &refs).unwrap(), 0.0);
        assert_eq!(wer(&refs, &refs).unwrap(), 0.0);
        assert_eq!(la(&["ab"], &[""]).unwrap(), 0.0);
        assert_eq!(cer(&["ab"], &[""]).unwrap(), 1.0);
        assert_eq!(wer(&["the cat sat"], &["the bat sat"]).unwrap(), 1.0 / 3.0);
        assert!(matches!(la(&["", "x"], &["a", "x"]), Err(Error::EmptyReference(0))));
        assert!(cer(&["a"], &[]).is_err());
    }

    #[test]
    fn la_is_one_only_for_exact_matches() {
        assert!(la(&["abc"], &["abd"]).unwrap() < 1.0);
        assert!(la(&["abc"], &["abcabc"]).unwrap() >= 0.0);
    }
}
