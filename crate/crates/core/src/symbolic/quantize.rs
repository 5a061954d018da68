use super::note::{Note, NoteSequence, TempoEvent};
use super::vocab::Vocabulary;

/// Snap onsets and durations to the sixteenth-note grid.
///
/// Onsets go to the nearest grid line (halfway rounds up), durations to the
/// nearest whole number of slots with a minimum of one slot, and velocities to
/// the representative value of their velocity bin. A resolution that is not a
/// multiple of four is rescaled by four first so the grid lands on whole
/// ticks. Notes that collapse onto the same (pitch, onset) are merged, keeping
/// the longest.
pub fn quantize(seq: &NoteSequence) -> NoteSequence {
    let scale: u64 = if seq.ticks_per_quarter % 4 == 0 { 1 } else { 4 };
    let tpq = seq.ticks_per_quarter as u64 * scale;
    let slot = tpq / 4;

    let snap = |ticks: u64| (ticks * scale + slot / 2) / slot;

    let mut notes: Vec<Note> = seq
        .notes()
        .iter()
        .map(|n| {
            let onset = snap(n.onset) * slot;
            let duration = snap(n.duration).max(1) * slot;
            Note::new(n.pitch, onset, duration, Vocabulary::snap_velocity(n.velocity))
        })
        .collect();
    notes.sort_by(|a, b| (a.onset, a.pitch, std::cmp::Reverse(a.duration)).cmp(&(b.onset, b.pitch, std::cmp::Reverse(b.duration))));
    notes.dedup_by(|later, kept| later.onset == kept.onset && later.pitch == kept.pitch);

    let tempos = seq
        .tempo_events
        .iter()
        .map(|t| TempoEvent {
            tick: t.tick * scale,
            bpm: t.bpm,
        })
        .collect();
    NoteSequence::new(notes, tpq as u32, tempos)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(onset: u64, duration: u64) -> Note {
        let seq = NoteSequence::new(vec![Note::new(60, onset, duration, 80)], 480, vec![]);
        quantize(&seq).notes()[0]
    }

    #[test]
    fn onset_rounds_to_nearest_slot() {
        assert_eq!(one(7, 120).onset, 0);
        assert_eq!(one(100, 120).onset, 120);
        assert_eq!(one(59, 120).onset, 0);
        assert_eq!(one(60, 120).onset, 120);
    }

    #[test]
    fn short_note_clamped_to_one_slot() {
        assert_eq!(one(0, 10).duration, 120);
        assert_eq!(one(0, 250).duration, 240);
    }

    #[test]
    fn odd_resolution_is_rescaled() {
        let seq = NoteSequence::new(vec![Note::new(60, 25, 50, 80)], 25, vec![]);
        let q = quantize(&seq);
        assert_eq!(q.ticks_per_quarter, 100);
        assert_eq!(q.notes()[0].onset, 100);
        assert_eq!(q.notes()[0].duration, 200);
    }

    #[test]
    fn collapsed_duplicates_merge() {
        let seq = NoteSequence::new(vec![Note::new(60, 0, 120, 80), Note::new(60, 5, 480, 80)], 480, vec![]);
        let q = quantize(&seq);
        assert_eq!(q.len(), 1);
        assert_eq!(q.notes()[0].duration, 480);
    }
}
