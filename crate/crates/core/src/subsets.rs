//! Enumeration of fixed-size index subsets in lexicographic order, split
//! into rank ranges for parallel evaluation.

use rayon::prelude::*;

use crate::error::{Error, Result};

/// Largest number of subsets any exhaustive routine will visit.
pub const ENUMERATION_BUDGET: u128 = 2_000_000;

/// Subsets handed to one parallel task.
const CHUNK: u128 = 2048;

/// `C(n, k)`, saturating at `u128::MAX`.
pub fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut acc: u128 = 1;
    for i in 0..k {
        // acc * (n - i) / (i + 1) stays exact because acc is C(n, i).
        acc = match acc.checked_mul((n - i) as u128) {
            Some(v) => v / (i as u128 + 1),
            None => return u128::MAX,
        };
    }
    acc
}

/// `sum_{k <= k_max} C(n, k)`, saturating.
pub fn count_up_to(n: usize, k_max: usize) -> u128 {
    (0..=k_max.min(n)).fold(0u128, |acc, k| acc.saturating_add(binomial(n, k)))
}

pub fn check_budget(count: u128, hint: &'static str) -> Result<()> {
    if count > ENUMERATION_BUDGET {
        Err(Error::Budget {
            count,
            limit: ENUMERATION_BUDGET,
            hint,
        })
    } else {
        Ok(())
    }
}

/// The `rank`-th `k`-subset of `0..n` in lexicographic order.
pub fn unrank(n: usize, k: usize, mut rank: u128) -> Vec<usize> {
    let mut out = Vec::with_capacity(k);
    let mut next = 0;
    for slot in 0..k {
        let remaining = k - slot - 1;
        loop {
            let with_next = binomial(n - next - 1, remaining);
            if rank < with_next {
                out.push(next);
                next += 1;
                break;
            }
            rank -= with_next;
            next += 1;
        }
    }
    out
}

/// Advances `combo` to the next `k`-subset of `0..n`; false when exhausted.
pub fn advance(combo: &mut [usize], n: usize) -> bool {
    let k = combo.len();
    let mut i = k;
    while i > 0 {
        i -= 1;
        if combo[i] < n - k + i {
            combo[i] += 1;
            for j in i + 1..k {
                combo[j] = combo[j - 1] + 1;
            }
            return true;
        }
    }
    false
}

/// Visits every `k`-subset of `0..n` in parallel chunks. `visit` walks
/// one chunk's subsets in lexicographic order and returns one value per
/// chunk; the values come back in chunk order, so reducing them
/// sequentially reproduces a single-threaded scan.
pub fn par_chunks<T, F>(n: usize, k: usize, visit: F) -> Vec<T>
where
    T: Send,
    F: Fn(&mut SubsetWalker) -> T + Sync,
{
    let total = binomial(n, k);
    let starts: Vec<u128> = (0..total.div_ceil(CHUNK)).map(|c| c * CHUNK).collect();
    starts
        .par_iter()
        .map(|&start| {
            let mut walker = SubsetWalker {
                combo: unrank(n, k, start),
                n,
                left: CHUNK.min(total - start) as usize,
                primed: false,
            };
            visit(&mut walker)
        })
        .collect()
}

/// Cursor over a contiguous range of `k`-subsets.
pub struct SubsetWalker {
    combo: Vec<usize>,
    n: usize,
    left: usize,
    primed: bool,
}

impl SubsetWalker {
    #[allow(clippy::should_implement_trait)]
    pub fn next(&mut self) -> Option<&[usize]> {
        if self.left == 0 {
            return None;
        }
        if self.primed && !advance(&mut self.combo, self.n) {
            return None;
        }
        self.primed = true;
        self.left -= 1;
        Some(&self.combo)
    }
}
