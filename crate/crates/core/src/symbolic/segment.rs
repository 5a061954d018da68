use std::collections::BTreeMap;

use super::note::{Motif, Note, NoteSequence};
use crate::error::{Error, Result};

/// Split a (quantized) sequence into one [`Motif`] per non-empty 4/4 bar.
///
/// Notes crossing a barline are cut at the barline; every piece keeps its
/// pitch and velocity. Empty bars are skipped, so `bar_index` may have gaps.
pub fn segment_bars(seq: &NoteSequence) -> Vec<Motif> {
    let bar = seq.bar_ticks();
    let mut bars: BTreeMap<u64, Vec<Note>> = BTreeMap::new();
    for n in seq.notes() {
        let mut start = n.onset;
        let end = n.end();
        while start < end {
            let index = start / bar;
            let bar_end = (index + 1) * bar;
            let piece_end = end.min(bar_end);
            bars.entry(index).or_default().push(Note::new(
                n.pitch,
                start - index * bar,
                piece_end - start,
                n.velocity,
            ));
            start = piece_end;
        }
    }
    bars.into_iter()
        .map(|(index, notes)| Motif::new(index as usize, seq.ticks_per_quarter, notes))
        .collect()
}

/// Skyline melody: the highest pitch among the notes starting at each
/// distinct onset, in onset order.
pub fn extract_melody(m: &Motif) -> Result<Vec<u8>> {
    if m.is_empty() {
        return Err(Error::EmptyMotif);
    }
    Ok(skyline(m.notes()))
}

pub(crate) fn skyline(notes: &[Note]) -> Vec<u8> {
    let mut top: BTreeMap<u64, u8> = BTreeMap::new();
    for n in notes {
        let e = top.entry(n.onset).or_insert(n.pitch);
        *e = (*e).max(n.pitch);
    }
    top.into_values().collect()
}
