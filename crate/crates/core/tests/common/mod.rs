//! Brute-force reference implementation for alignment counts, independent
//! of the library's dynamic programming: iterative-deepening search over
//! edit scripts with an exact cost budget. Used to cross-check align_slices
//! on exhaustive and randomized inputs.

use codemix::metrics::EditCounts;

/// Fewest deletions over all scripts aligning r[i..] to h[j..] with at most
/// `budget` unit-cost edits, or None when no such script exists. Matches
/// are free; no memoization, so every script is genuinely enumerated.
fn fewest_deletions<T: PartialEq>(r: &[T], h: &[T], i: usize, j: usize, budget: usize) -> Option<usize> {
    let rem_r = r.len() - i;
    let rem_h = h.len() - j;
    if rem_r.abs_diff(rem_h) > budget {
        return None;
    }
    if rem_r == 0 && rem_h == 0 {
        return Some(0);
    }
    let mut best: Option<usize> = None;
    let mut consider = |candidate: Option<usize>| {
        if let Some(d) = candidate {
            best = Some(best.map_or(d, |b| b.min(d)));
        }
    };
    if rem_r > 0 && rem_h > 0 && r[i] == h[j] {
        consider(fewest_deletions(r, h, i + 1, j + 1, budget));
    }
    if budget > 0 {
        if rem_r > 0 && rem_h > 0 {
            consider(fewest_deletions(r, h, i + 1, j + 1, budget - 1));
        }
        if rem_r > 0 {
            consider(fewest_deletions(r, h, i + 1, j, budget - 1).map(|d| d + 1));
        }
        if rem_h > 0 {
            consider(fewest_deletions(r, h, i, j + 1, budget - 1));
        }
    }
    best
}

/// Reference edit counts: minimal total cost first, fewest deletions among
/// minimal-cost scripts second. S, I, and C follow from (total, deletions)
/// and the two lengths.
pub fn oracle_counts<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> EditCounts {
    let (n, m) = (reference.len(), hypothesis.len());
    for total in 0..=(n + m) {
        if let Some(deletions) = fewest_deletions(reference, hypothesis, 0, 0, total) {
            // every script satisfies I - D = m - n
            let insertions = (deletions + m) - n;
            let substitutions = total - deletions - insertions;
            return EditCounts {
                substitutions,
                insertions,
                deletions,
                reference_len: n,
                correct: n - substitutions - deletions,
            };
        }
    }
    unreachable!("deleting everything and inserting everything always fits the budget");
}

#[cfg(test)]
mod tests {
    use super::*;

    fn counts(s: usize, i: usize, d: usize, n: usize) -> EditCounts {
        EditCounts {
            substitutions: s,
            insertions: i,
            deletions: d,
            reference_len: n,
            correct: n - s - d,
        }
    }

    #[test]
    fn oracle_handles_hand_checkable_cases() {
        assert_eq!(oracle_counts::<u8>(&[], &[]), counts(0, 0, 0, 0));
        assert_eq!(oracle_counts(&[1, 2, 3], &[1, 2, 3]), counts(0, 0, 0, 3));
        assert_eq!(oracle_counts(&[1, 2, 3], &[1, 3]), counts(0, 0, 1, 3));
        assert_eq!(oracle_counts(&[1, 3], &[1, 2, 3]), counts(0, 1, 0, 2));
        assert_eq!(oracle_counts(&[1, 2], &[3, 4]), counts(2, 0, 0, 2));
        // rotation: minimal cost 2 is delete+insert, never two subs
        assert_eq!(oracle_counts(&[1, 2, 3], &[2, 3, 1]), counts(0, 1, 1, 3));
    }
}
