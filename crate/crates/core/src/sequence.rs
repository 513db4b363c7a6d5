use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Ordered permutation of events: `order[position] = feature index`.
#[derive(Clone, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct EventSequence {
    order: Vec<usize>,
}

impl EventSequence {
    pub fn new(order: Vec<usize>) -> Result<Self> {
        let mut seen = vec![false; order.len()];
        for &f in &order {
            if f >= order.len() || seen[f] {
                return Err(Error::Argument(format!(
                    "event order {order:?} is not a permutation of 0..{}",
                    order.len()
                )));
            }
            seen[f] = true;
        }
        Ok(EventSequence { order })
    }

    pub fn identity(n: usize) -> Self {
        EventSequence {
            order: (0..n).collect(),
        }
    }

    pub fn order(&self) -> &[usize] {
        &self.order
    }

    pub fn len(&self) -> usize {
        self.order.len()
    }

    pub fn is_empty(&self) -> bool {
        self.order.is_empty()
    }

    /// `positions()[feature]` is the 0-based position of that feature's event.
    pub fn positions(&self) -> Vec<usize> {
        let mut pos = vec![0; self.order.len()];
        for (p, &f) in self.order.iter().enumerate() {
            pos[f] = p;
        }
        pos
    }

    pub fn position_of(&self, feature: usize) -> usize {
        self.order
            .iter()
            .position(|&f| f == feature)
            .expect("feature belongs to the sequence")
    }

    /// Removes `feature` and re-inserts it at `position`, shifting the others.
    pub fn with_event_moved(&self, feature: usize, position: usize) -> EventSequence {
        let mut order = self.order.clone();
        let from = self.position_of(feature);
        order.remove(from);
        order.insert(position, feature);
        EventSequence { order }
    }
}

impl TryFrom<Vec<usize>> for EventSequence {
    type Error = Error;

    fn try_from(order: Vec<usize>) -> Result<Self> {
        EventSequence::new(order)
    }
}

impl From<EventSequence> for Vec<usize> {
    fn from(s: EventSequence) -> Self {
        s.order
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_non_permutations() {
        assert!(EventSequence::new(vec![0, 0, 1]).is_err());
        assert!(EventSequence::new(vec![0, 3, 1]).is_err());
        assert!(EventSequence::new(vec![2, 0, 1]).is_ok());
    }

    #[test]
    fn move_event_shifts_others() {
        let s = EventSequence::new(vec![0, 1, 2, 3]).unwrap();
        assert_eq!(s.with_event_moved(0, 2).order(), &[1, 2, 0, 3]);
        assert_eq!(s.with_event_moved(3, 0).order(), &[3, 0, 1, 2]);
        assert_eq!(s.with_event_moved(2, 2), s);
        assert_eq!(s.with_event_moved(3, 0).positions(), vec![1, 2, 3, 0]);
    }
}
