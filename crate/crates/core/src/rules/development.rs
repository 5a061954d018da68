use serde::{Deserialize, Serialize};

/// Melodic direction between consecutive notes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Direction {
    Up,
    Down,
    Same,
}

impl Direction {
    pub fn negate(self) -> Self {
        match self {
            Direction::Up => Direction::Down,
            Direction::Down => Direction::Up,
            Direction::Same => Direction::Same,
        }
    }
}

/// Directions between consecutive melody notes; one shorter than the melody.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub struct DevSequence(pub Vec<Direction>);

impl DevSequence {
    pub fn directions(&self) -> &[Direction] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// Mirror about a horizontal axis.
    pub fn negated(&self) -> Self {
        Self(self.0.iter().map(|d| d.negate()).collect())
    }

    /// Mirror about a vertical axis (retrograde).
    pub fn reversed(&self) -> Self {
        Self(self.0.iter().rev().copied().collect())
    }
}

pub fn development(melody: &[u8]) -> DevSequence {
    DevSequence(
        melody
            .windows(2)
            .map(|w| match w[1].cmp(&w[0]) {
                std::cmp::Ordering::Greater => Direction::Up,
                std::cmp::Ordering::Less => Direction::Down,
                std::cmp::Ordering::Equal => Direction::Same,
            })
            .collect(),
    )
}
