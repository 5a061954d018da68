/// Length of the longest common subsequence (row-by-row dynamic programming).
pub fn lcs_len<T: PartialEq>(p: &[T], q: &[T]) -> usize {
    if p.is_empty() || q.is_empty() {
        return 0;
    }
    let mut prev = vec![0usize; q.len() + 1];
    let mut cur = vec![0usize; q.len() + 1];
    for a in p {
        for (j, b) in q.iter().enumerate() {
            cur[j + 1] = if a == b { prev[j] + 1 } else { prev[j + 1].max(cur[j]) };
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[q.len()]
}

/// `|LCS(p, q)| / max(|p|, |q|)`, or 0 when either sequence is empty.
pub fn lcs_similarity<T: PartialEq>(p: &[T], q: &[T]) -> f64 {
    let longest = p.len().max(q.len());
    if p.is_empty() || q.is_empty() {
        return 0.0;
    }
    lcs_len(p, q) as f64 / longest as f64
}

/// `lcs_similarity(p, q) >= threshold`, decided in integers so that 3/4
/// against 0.75 is exact.
pub fn similar<T: PartialEq>(p: &[T], q: &[T], threshold: f64) -> bool {
    if p.is_empty() || q.is_empty() {
        return false;
    }
    let longest = p.len().max(q.len());
    (lcs_len(p, q) as f64) >= threshold * longest as f64
}
