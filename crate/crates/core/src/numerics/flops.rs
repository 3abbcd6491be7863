//! Thread-local counter of floating-point work done by the contraction
//! kernels (matmul, dense, conv2d). A multiply-add counts as 2 operations;
//! elementwise work is not counted. Only forward kernels record.

use std::cell::Cell;

thread_local! {
    static COUNTER: Cell<u64> = const { Cell::new(0) };
}

pub(crate) fn record(ops: u64) {
    COUNTER.with(|c| c.set(c.get() + ops));
}

/// Runs `f` and returns its result with the operations it recorded on this
/// thread.
pub fn count<R>(f: impl FnOnce() -> R) -> (R, u64) {
    let before = COUNTER.with(Cell::get);
    let out = f();
    let after = COUNTER.with(Cell::get);
    (out, after - before)
}
