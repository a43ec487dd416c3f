//! FIFO sequence replay with proportional prioritized sampling.

use crate::error::{Error, Result};
use crate::sequence::TransitionSequence;
use rand::Rng;

/// `eta * max|delta| + (1 - eta) * mean|delta|`
pub fn sequence_priority(td_errors: &[f64], eta: f64) -> Result<f64> {
    if td_errors.is_empty() {
        return Err(Error::Schema("priority of a sequence without valid steps".into()));
    }
    let (mut max, mut sum) = (0.0f64, 0.0);
    for d in td_errors {
        let a = d.abs();
        max = max.max(a);
        sum += a;
    }
    Ok(eta * max + (1.0 - eta) * sum / td_errors.len() as f64)
}

/// Binary sum tree over a fixed number of leaves.
#[derive(Debug, Clone)]
struct SumTree {
    leaves: usize,
    nodes: Vec<f64>,
}

impl SumTree {
    fn new(capacity: usize) -> Self {
        let leaves = capacity.next_power_of_two();
        Self { leaves, nodes: vec![0.0; 2 * leaves] }
    }

    fn total(&self) -> f64 {
        self.nodes[1]
    }

    fn get(&self, slot: usize) -> f64 {
        self.nodes[self.leaves + slot]
    }

    fn set(&mut self, slot: usize, value: f64) {
        let mut i = self.leaves + slot;
        self.nodes[i] = value;
        while i > 1 {
            i /= 2;
            self.nodes[i] = self.nodes[2 * i] + self.nodes[2 * i + 1];
        }
    }

    /// Leaf whose cumulative interval contains `mass`; zero-weight leaves are never returned.
    fn find(&self, mut mass: f64) -> usize {
        let mut i = 1;
        while i < self.leaves {
            let left = 2 * i;
            if mass < self.nodes[left] || self.nodes[left + 1] <= 0.0 {
                i = left;
            } else {
                mass -= self.nodes[left];
                i = left + 1;
            }
        }
        let mut slot = i - self.leaves;
        // rounding can land on an empty leaf; walk to the nearest positive one
        if self.get(slot) <= 0.0 {
            slot = (0..self.leaves).rev().find(|&s| self.get(s) > 0.0).unwrap_or(slot);
        }
        slot
    }
}

#[derive(Debug, Clone)]
struct Entry {
    id: u64,
    sequence: TransitionSequence,
}

/// Ring buffer of sequences. Ids increase with insertion order and eviction
/// always removes the smallest live id.
#[derive(Debug, Clone)]
pub struct SequenceReplay {
    capacity: usize,
    min_size: usize,
    slots: Vec<Option<Entry>>,
    tree: SumTree,
    next_id: u64,
}

/// One sampled sequence with the id used to write its priority back.
#[derive(Debug, Clone)]
pub struct SampledSequence {
    pub id: u64,
    pub sequence: TransitionSequence,
}

impl SequenceReplay {
    pub fn new(capacity: usize, min_size: usize) -> Result<Self> {
        if capacity == 0 || min_size == 0 || min_size > capacity {
            return Err(Error::Config(format!("replay needs 0 < min size <= capacity, got {min_size} and {capacity}")));
        }
        Ok(Self { capacity, min_size, slots: vec![None; capacity], tree: SumTree::new(capacity), next_id: 0 })
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn len(&self) -> usize {
        self.next_id.min(self.capacity as u64) as usize
    }

    pub fn is_empty(&self) -> bool {
        self.next_id == 0
    }

    pub fn is_ready(&self) -> bool {
        self.len() >= self.min_size
    }

    pub fn total_inserted(&self) -> u64 {
        self.next_id
    }

    /// Stores a sequence with its current priority, evicting the oldest when full.
    pub fn insert(&mut self, sequence: TransitionSequence) -> Result<u64> {
        sequence.validate()?;
        if !(sequence.priority >= 0.0) || !sequence.priority.is_finite() {
            return Err(Error::Domain(format!("priority must be finite and non-negative, got {}", sequence.priority)));
        }
        let id = self.next_id;
        let slot = (id % self.capacity as u64) as usize;
        self.tree.set(slot, sequence.priority);
        self.slots[slot] = Some(Entry { id, sequence });
        self.next_id += 1;
        Ok(id)
    }

    fn slot_of(&self, id: u64) -> Option<usize> {
        let slot = (id % self.capacity as u64) as usize;
        match &self.slots[slot] {
            Some(e) if e.id == id => Some(slot),
            _ => None,
        }
    }

    pub fn contains(&self, id: u64) -> bool {
        self.slot_of(id).is_some()
    }

    pub fn get(&self, id: u64) -> Option<&TransitionSequence> {
        self.slot_of(id).and_then(|s| self.slots[s].as_ref()).map(|e| &e.sequence)
    }

    pub fn priority(&self, id: u64) -> Option<f64> {
        self.slot_of(id).map(|s| self.tree.get(s))
    }

    /// Overwrites the priority of a live sequence. Returns `false` when it was evicted.
    pub fn update_priority(&mut self, id: u64, priority: f64) -> Result<bool> {
        if !(priority >= 0.0) || !priority.is_finite() {
            return Err(Error::Domain(format!("priority must be finite and non-negative, got {priority}")));
        }
        match self.slot_of(id) {
            Some(slot) => {
                self.tree.set(slot, priority);
                if let Some(e) = self.slots[slot].as_mut() {
                    e.sequence.priority = priority;
                }
                Ok(true)
            }
            None => Ok(false),
        }
    }

    /// Ids of live sequences, oldest first.
    pub fn ids(&self) -> Vec<u64> {
        let first = self.next_id.saturating_sub(self.capacity as u64);
        (first..self.next_id).collect()
    }

    /// `batch_size` draws with replacement, each proportional to priority.
    /// All-zero priorities fall back to uniform draws.
    pub fn sample(&self, batch_size: usize, rng: &mut impl Rng) -> Result<Vec<SampledSequence>> {
        if !self.is_ready() {
            return Err(Error::NotReady { stored: self.len(), required: self.min_size });
        }
        let total = self.tree.total();
        let live = self.len();
        let mut out = Vec::with_capacity(batch_size);
        for _ in 0..batch_size {
            let slot = if total > 0.0 {
                self.tree.find(rng.gen::<f64>() * total)
            } else {
                rng.gen_range(0..live)
            };
            let entry = self.slots[slot].as_ref().ok_or_else(|| Error::Internal("sampled an empty replay slot".into()))?;
            out.push(SampledSequence { id: entry.id, sequence: entry.sequence.clone() });
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sequence::Transition;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn seq(tag: usize, priority: f64) -> TransitionSequence {
        let mut s = TransitionSequence::new(vec![Transition::simple(tag, 0, 1.0, 0.0, tag + 1)]);
        s.priority = priority;
        s
    }

    #[test]
    fn priority_examples() {
        assert!((sequence_priority(&[1.0, 1.0, 1.0], 0.9).unwrap() - 1.0).abs() < 1e-15);
        assert!((sequence_priority(&[0.0, 0.0, 10.0], 0.9).unwrap() - (9.0 + 1.0 / 3.0)).abs() < 1e-12);
        assert_eq!(sequence_priority(&[0.0; 4], 0.9).unwrap(), 0.0);
        assert!((sequence_priority(&[-2.0], 0.5).unwrap() - 2.0).abs() < 1e-15);
        assert!(sequence_priority(&[], 0.9).is_err());
    }

    #[test]
    fn not_ready_until_min_size() {
        let mut r = SequenceReplay::new(10, 3).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        r.insert(seq(0, 1.0)).unwrap();
        assert!(matches!(r.sample(1, &mut rng), Err(Error::NotReady { stored: 1, required: 3 })));
        r.insert(seq(1, 1.0)).unwrap();
        r.insert(seq(2, 1.0)).unwrap();
        assert_eq!(r.sample(4, &mut rng).unwrap().len(), 4);
    }

    #[test]
    fn fifo_eviction() {
        let mut r = SequenceReplay::new(5, 1).unwrap();
        for i in 0..8 {
            r.insert(seq(i, 1.0)).unwrap();
        }
        assert_eq!(r.len(), 5);
        for id in 0..3 {
            assert!(!r.contains(id));
        }
        assert_eq!(r.ids(), vec![3, 4, 5, 6, 7]);
        assert!(!r.update_priority(0, 2.0).unwrap());
        assert!(r.update_priority(7, 2.0).unwrap());
        assert_eq!(r.priority(7), Some(2.0));
    }

    #[test]
    fn proportional_frequencies() {
        let mut r = SequenceReplay::new(4, 1).unwrap();
        r.insert(seq(0, 3.0)).unwrap();
        r.insert(seq(1, 1.0)).unwrap();
        r.insert(seq(2, 0.0)).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let draws = 100_000;
        let batch = r.sample(draws, &mut rng).unwrap();
        let first = batch.iter().filter(|s| s.id == 0).count() as f64;
        assert!(batch.iter().all(|s| s.id != 2));
        let sigma = (draws as f64 * 0.75 * 0.25).sqrt();
        assert!((first - 0.75 * draws as f64).abs() <= 3.0 * sigma);
    }

    #[test]
    fn rejects_broken_sequences() {
        let mut r = SequenceReplay::new(4, 1).unwrap();
        let broken = TransitionSequence::new(vec![Transition::simple(0, 0, 1.0, 0.0, 1), Transition::simple(4, 0, 1.0, 0.0, 5)]);
        assert!(r.insert(broken).is_err());
        assert!(r.insert(seq(0, f64::NAN)).is_err());
        assert!(SequenceReplay::new(2, 3).is_err());
    }

    proptest! {
        #[test]
        fn zero_priority_is_never_drawn(priorities in proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..10.0], 1..40), seed in any::<u64>()) {
            prop_assume!(priorities.iter().any(|&p| p > 0.0));
            let mut r = SequenceReplay::new(64, 1).unwrap();
            for (i, &p) in priorities.iter().enumerate() {
                r.insert(seq(i, p)).unwrap();
            }
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            for s in r.sample(200, &mut rng).unwrap() {
                prop_assert!(priorities[s.id as usize] > 0.0);
            }
        }
    }
}
