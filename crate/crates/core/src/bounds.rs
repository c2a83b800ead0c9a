//! Integer forms of the logarithmic budget thresholds.
//!
//! Thresholds are signed because they go negative for tiny `n`; a negative
//! cap admits no budget at all.

/// `⌈log2 m⌉` for `m >= 1`.
pub fn ceil_log2(m: usize) -> usize {
    assert!(m >= 1, "ceil_log2 of zero");
    (usize::BITS - (m - 1).leading_zeros()) as usize
}

/// `⌈0.5 · log2 n⌉`, i.e. the least `e` with `4^e >= n`.
pub fn ceil_half_log2(n: usize) -> usize {
    ceil_log2(n).div_ceil(2)
}

/// Chain collisions (and chainpush) need a budget strictly below this.
pub fn chain_budget_bound(n: usize) -> i64 {
    ceil_log2(n + 1) as i64 - 2
}

/// Largest budget for which a crossing collision is promised.
pub fn crossing_budget_cap(n: usize) -> i64 {
    n as i64 - ceil_half_log2(n) as i64 - 2
}

/// Largest budget for which a pinned collision is guaranteed.
pub fn pinned_budget_cap(n: usize) -> i64 {
    n as i64 - 3
}

/// Largest per-player budget accepted by the uniform (max-cost) attack.
pub fn uniform_budget_cap(n: usize) -> i64 {
    crossing_budget_cap(n) - 1
}

pub(crate) fn fits(budget: usize, cap: i64) -> bool {
    (budget as i64) <= cap
}
