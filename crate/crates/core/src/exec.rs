//! Pluggable fan-out for independent work items.
//!
//! The core crate only ships [`Sequential`]; thread-pool executors live in the
//! std companion. Every caller merges results by item index, so output never
//! depends on the executor.

use alloc::vec::Vec;

pub trait Executor: Sync {
    /// Applies `f` to each item and returns the results in input order.
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Sequential;

impl Executor for Sequential {
    fn map<T, R, F>(&self, items: &[T], f: F) -> Vec<R>
    where
        T: Sync,
        R: Send,
        F: Fn(&T) -> R + Sync + Send,
    {
        items.iter().map(f).collect()
    }
}
