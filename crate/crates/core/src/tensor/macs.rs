//! Multiply-accumulate instrumentation.
//!
//! Every kernel reports the MACs it executes to a thread-local counter that is
//! only live inside [`count`]. Counting is attributed to the calling thread, so
//! measure single-threaded calls.

use std::cell::Cell;

thread_local! {
    static ACTIVE: Cell<Option<u64>> = const { Cell::new(None) };
}

/// Called by kernels with the number of MACs they just performed.
#[inline]
pub fn record(macs: u64) {
    ACTIVE.with(|a| {
        if let Some(n) = a.get() {
            a.set(Some(n + macs));
        }
    });
}

/// Runs `f` and returns its result along with the MACs executed on this thread.
/// Nested calls see only their own MACs; the outer scope still receives them.
pub fn count<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let outer = ACTIVE.with(|a| a.replace(Some(0)));
    let out = f();
    let inner = ACTIVE.with(|a| a.replace(outer)).unwrap_or(0);
    if outer.is_some() {
        record(inner);
    }
    (out, inner)
}
