use std::cmp::Ordering;
use std::collections::BinaryHeap;

/// Candidate keyed on `(depth, id)`; smaller is nearer.
#[derive(Clone, Copy, Debug)]
pub struct Candidate<T> {
    pub z: f64,
    pub id: u32,
    pub payload: T,
}

impl<T> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl<T> Eq for Candidate<T> {}

impl<T> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.z.total_cmp(&other.z).then(self.id.cmp(&other.id))
    }
}

/// Bounded max-heap retaining the `k` nearest candidates.
pub struct TopK<T> {
    k: usize,
    heap: BinaryHeap<Candidate<T>>,
}

impl<T> TopK<T> {
    pub fn new(k: usize) -> Self {
        Self {
            k,
            heap: BinaryHeap::with_capacity(k + 1),
        }
    }

    #[inline]
    pub fn push(&mut self, c: Candidate<T>) {
        if self.heap.len() < self.k {
            self.heap.push(c);
        } else if let Some(mut top) = self.heap.peek_mut() {
            if c < *top {
                *top = c;
            }
        }
    }

    /// Would a candidate at this key be kept?
    #[inline]
    pub fn admits(&self, z: f64, id: u32) -> bool {
        if self.heap.len() < self.k {
            return true;
        }
        match self.heap.peek() {
            Some(top) => z.total_cmp(&top.z).then(id.cmp(&top.id)) == Ordering::Less,
            None => true,
        }
    }

    /// Ascending by `(z, id)`.
    pub fn into_sorted(self) -> Vec<Candidate<T>> {
        self.heap.into_sorted_vec()
    }
}
