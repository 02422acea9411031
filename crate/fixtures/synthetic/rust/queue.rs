//! Bounded FIFO queue.
use std::collections::VecDeque;
use std::fmt;

pub struct Bounded<T> {
    items: VecDeque<T>,
    cap: usize,
}

impl<T> Bounded<T> {
    pub fn new(cap: usize) -> Self {
        Self { items: VecDeque::new(), cap }
    }

    /// Returns the item back when full.
    pub fn push(&mut self, item: T) -> Result<(), T> {
        if self.items.len() == self.cap {
            return Err(item);
        }
        self.items.push_back(item);
        Ok(())
    }

    pub fn pop(&mut self) -> Option<T> {
        self.items.pop_front()
    }
}

impl<T> fmt::Debug for Bounded<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        // contents are not printed
        write!(f, "Bounded({}/{})", self.items.len(), self.cap)
    }
}
