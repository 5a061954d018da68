//! Brute-force reference implementations used to cross-check the library.
#![allow(dead_code)]

use repetition_core::rules::{Key, Mode, RepetitionLabel, SymmetryKind, TranspositionKind};

/// Every subsequence of `s`, by bitmask.
fn subsequences<T: Copy>(s: &[T]) -> Vec<Vec<T>> {
    (0u32..1 << s.len())
        .map(|mask| s.iter().enumerate().filter(|(i, _)| mask & (1 << i) != 0).map(|(_, &x)| x).collect())
        .collect()
}

fn is_subsequence<T: PartialEq>(needle: &[T], hay: &[T]) -> bool {
    let mut it = hay.iter();
    needle.iter().all(|n| it.any(|h| h == n))
}

/// Longest common subsequence length by enumerating the subsequences of `p`.
pub fn lcs(p: &[i8], q: &[i8]) -> usize {
    subsequences(p)
        .into_iter()
        .filter(|s| is_subsequence(s, q))
        .map(|s| s.len())
        .max()
        .unwrap_or(0)
}

/// Share a common subsequence of at least three quarters of the longer one.
pub fn similar(p: &[i8], q: &[i8]) -> bool {
    if p.is_empty() || q.is_empty() {
        return false;
    }
    4 * lcs(p, q) >= 3 * p.len().max(q.len())
}

/// +1 up, -1 down, 0 same.
pub fn directions(m: &[u8]) -> Vec<i8> {
    m.windows(2).map(|w| (w[1] as i16 - w[0] as i16).signum() as i8).collect()
}

fn in_scale(p: u8, key: &Key) -> bool {
    let steps: &[u8] = match key.mode {
        Mode::Major => &[0, 2, 4, 5, 7, 9, 11],
        Mode::Minor => &[0, 2, 3, 5, 7, 8, 10],
    };
    steps.contains(&((p + 12 - key.tonic) % 12))
}

/// Signed number of scale steps from `a` to `b`, counting scale tones.
fn scale_steps(a: u8, b: u8, key: &Key) -> i32 {
    let (lo, hi, sign) = if a <= b { (a, b, 1) } else { (b, a, -1) };
    sign * ((lo + 1)..=hi).filter(|&p| in_scale(p, key)).count() as i32
}

fn constant<T: Copy + PartialEq>(v: &[T]) -> Option<T> {
    let first = *v.first()?;
    v.iter().all(|&x| x == first).then_some(first)
}

/// Reference classification of two monophonic melodies.
pub fn classify(a: &[u8], b: &[u8], key: &Key) -> RepetitionLabel {
    if a == b {
        return RepetitionLabel::Strict;
    }
    if a.len() == b.len() {
        let shifts: Vec<i32> = a.iter().zip(b).map(|(&x, &y)| y as i32 - x as i32).collect();
        if let Some(t) = constant(&shifts).filter(|&t| t != 0) {
            return RepetitionLabel::Transpositional(repetition_core::rules::Transposition {
                kind: TranspositionKind::Chromatic,
                offset: t,
            });
        }
        if a.iter().chain(b).all(|&p| in_scale(p, key)) {
            let steps: Vec<i32> = a.iter().zip(b).map(|(&x, &y)| scale_steps(x, y, key)).collect();
            if let Some(t) = constant(&steps).filter(|&t| t != 0) {
                return RepetitionLabel::Transpositional(repetition_core::rules::Transposition {
                    kind: TranspositionKind::Diatonic,
                    offset: t,
                });
            }
        }
    }
    let pa: Vec<i8> = a.iter().map(|&p| p as i8).collect();
    let pb: Vec<i8> = b.iter().map(|&p| p as i8).collect();
    if similar(&pa, &pb) {
        return RepetitionLabel::Subsequential;
    }
    let da = directions(a);
    let db = directions(b);
    let homo = similar(&da, &db);
    let horizontal: Vec<i8> = da.iter().map(|d| -d).collect();
    let vertical: Vec<i8> = da.iter().rev().copied().collect();
    let rotational: Vec<i8> = vertical.iter().map(|d| -d).collect();
    let sym = [
        (SymmetryKind::Horizontal, horizontal),
        (SymmetryKind::Vertical, vertical),
        (SymmetryKind::Rotational, rotational),
    ]
    .into_iter()
    .find(|(_, d)| similar(d, &db))
    .map(|(k, _)| k);
    match (homo, sym) {
        (true, Some(k)) => RepetitionLabel::Ambiguous(k),
        (true, None) => RepetitionLabel::Homodirectional,
        (false, Some(k)) => RepetitionLabel::Symmetric(k),
        (false, None) => RepetitionLabel::None,
    }
}

/// Reconstruction weights of one column: `gamma * (1 + share of equal values)`.
pub fn column_weights(column: &[i64], gamma: f64) -> Vec<f64> {
    column
        .iter()
        .map(|v| {
            let same = column.iter().filter(|w| *w == v).count();
            gamma * (1.0 + same as f64 / column.len() as f64)
        })
        .collect()
}
