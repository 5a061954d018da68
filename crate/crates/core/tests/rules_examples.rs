use repetition_core::rules::{
    classify, development, lcs_similarity, Direction, Key, RepetitionLabel, SymmetryKind, Transposition, TranspositionKind,
};
use repetition_core::symbolic::Motif;

const C4: u8 = 60;
const D4: u8 = 62;
const EB4: u8 = 63;
const E4: u8 = 64;
const F4: u8 = 65;
const G4: u8 = 67;
const AB4: u8 = 68;
const A4: u8 = 69;

fn m(p: &[u8]) -> Motif {
    Motif::from_pitches(p)
}

fn fate() -> Motif {
    m(&[G4, G4, G4, EB4])
}

#[test]
fn fate_motif_relations() {
    let c_minor = Key::minor(0);
    assert_eq!(
        classify(&fate(), &m(&[F4, F4, F4, D4]), &c_minor).unwrap(),
        RepetitionLabel::Transpositional(Transposition {
            kind: TranspositionKind::Diatonic,
            offset: -1
        })
    );
    assert_eq!(lcs_similarity(&[G4, G4, G4, EB4], &[G4, G4, G4, D4]), 0.75);
    assert_eq!(classify(&fate(), &m(&[G4, G4, G4, D4]), &c_minor).unwrap(), RepetitionLabel::Subsequential);
    assert_eq!(classify(&fate(), &m(&[AB4, AB4, AB4, G4]), &c_minor).unwrap(), RepetitionLabel::Homodirectional);
}

#[test]
fn symmetry_variants_of_e_d_e_g() {
    let a = m(&[E4, D4, E4, G4]);
    assert_eq!(development(&[E4, D4, E4, G4]).0, vec![Direction::Down, Direction::Up, Direction::Up]);
    let key = Key::major(0);
    let cases = [
        ([E4, F4, E4, C4], SymmetryKind::Horizontal),
        ([E4, F4, G4, F4], SymmetryKind::Vertical),
        ([E4, D4, C4, A4], SymmetryKind::Rotational),
    ];
    for (b, kind) in cases {
        assert_eq!(classify(&a, &m(&b), &key).unwrap(), RepetitionLabel::Symmetric(kind), "{b:?}");
    }
}

#[test]
fn both_homodirectional_and_symmetric_is_ambiguous() {
    let label = classify(&m(&[C4, D4, E4]), &m(&[C4, E4, G4]), &Key::major(0)).unwrap();
    assert_eq!(label, RepetitionLabel::Ambiguous(SymmetryKind::Vertical));
    assert_eq!(label.repetition_type(), None);
}

#[test]
fn relation_is_symmetric_in_its_arguments() {
    let key = Key::minor(0);
    let pairs = [
        (vec![G4, G4, G4, EB4], vec![F4, F4, F4, D4]),
        (vec![E4, D4, E4, G4], vec![E4, F4, E4, C4]),
        (vec![C4, D4, E4, F4], vec![C4, D4, E4, G4]),
    ];
    for (a, b) in pairs {
        let ab = classify(&m(&a), &m(&b), &key).unwrap();
        let ba = classify(&m(&b), &m(&a), &key).unwrap();
        assert_eq!(ab.name(), ba.name());
        if let (RepetitionLabel::Transpositional(x), RepetitionLabel::Transpositional(y)) = (ab, ba) {
            assert_eq!(x.offset, -y.offset);
        }
    }
}
