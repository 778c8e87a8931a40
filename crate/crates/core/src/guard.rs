//! Size guardrails for dense coefficient storage.

use std::sync::atomic::{AtomicUsize, Ordering};

use crate::error::{Error, Result};

pub const DEFAULT_MAX_ORDER: usize = 8;
pub const MAX_DIM_B: usize = 3;
/// Largest number of complex entries a single coefficient tensor may hold.
pub const MAX_TENSOR_ENTRIES: usize = 1 << 22;
/// The word-expansion oracles enumerate 2^N letter patterns.
pub const MAX_ORACLE_ORDER: usize = 10;

static MAX_ORDER: AtomicUsize = AtomicUsize::new(DEFAULT_MAX_ORDER);

pub fn max_order() -> usize {
    MAX_ORDER.load(Ordering::Relaxed)
}

/// Overrides the truncation-order guardrail (the CLI wires this to `OVFREE_MAX_ORDER`).
pub fn set_max_order(n: usize) {
    MAX_ORDER.store(n.max(1), Ordering::Relaxed);
}

pub fn check_shape(d_b: usize, d_d: usize, order: usize) -> Result<()> {
    if d_b == 0 || d_d == 0 {
        return Err(Error::Dimension("dimensions must be positive".into()));
    }
    if d_b > MAX_DIM_B {
        return Err(Error::Resource(format!(
            "d_B = {d_b} exceeds the guardrail d_B <= {MAX_DIM_B}"
        )));
    }
    if order > max_order() {
        return Err(Error::Resource(format!(
            "order {order} exceeds the guardrail N <= {} (set OVFREE_MAX_ORDER to raise it)",
            max_order()
        )));
    }
    let entries = (d_b * d_b)
        .checked_pow(order as u32)
        .and_then(|x| x.checked_mul(d_d * d_d));
    match entries {
        Some(e) if e <= MAX_TENSOR_ENTRIES => Ok(()),
        _ => Err(Error::Resource(format!(
            "order-{order} coefficient tensor over d_B = {d_b}, d_D = {d_d} exceeds {MAX_TENSOR_ENTRIES} entries"
        ))),
    }
}
