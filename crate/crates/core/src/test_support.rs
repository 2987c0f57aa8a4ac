//! Exhaustive-enumeration helpers and independent oracles for test suites.
//!
//! Enabled by the `test-util` feature; not part of the production surface.

use std::collections::BTreeMap;

/// All ordered set partitions of `ids` (every way to arrange them into
/// ordered, nonempty, disjoint tiers). Count grows as the Fubini numbers:
/// 3, 13, 75, 541, 4683 for K = 2..6.
pub fn enumerate_tier_partitions(ids: &[u32]) -> Vec<Vec<Vec<u32>>> {
    if ids.is_empty() {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut prefix = Vec::new();
    recurse(ids, &mut prefix, &mut out);
    out
}

fn recurse(remaining: &[u32], prefix: &mut Vec<Vec<u32>>, out: &mut Vec<Vec<Vec<u32>>>) {
    if remaining.is_empty() {
        out.push(prefix.clone());
        return;
    }
    let n = remaining.len();
    // nonempty subsets of `remaining` as the next tier
    for mask in 1u32..(1 << n) {
        let tier: Vec<u32> =
            (0..n).filter(|i| mask & (1 << i) != 0).map(|i| remaining[i]).collect();
        let rest: Vec<u32> =
            (0..n).filter(|i| mask & (1 << i) == 0).map(|i| remaining[i]).collect();
        prefix.push(tier);
        recurse(&rest, prefix, out);
        prefix.pop();
    }
}

/// Independent pairwise win-rate oracle: for every ordered pair of distinct
/// ranked rollouts, score 1 for a win (strictly better tier), 0.5 for a tie,
/// 0 for a loss, then divide each rollout's points by K - 1.
pub fn pairwise_win_rate(tiers: &[Vec<u32>]) -> BTreeMap<u32, f64> {
    let mut tier_of = BTreeMap::new();
    for (t, tier) in tiers.iter().enumerate() {
        for &id in tier {
            tier_of.insert(id, t);
        }
    }
    let k = tier_of.len();
    let mut out = BTreeMap::new();
    for (&i, &ti) in &tier_of {
        let mut points = 0.0;
        for (&j, &tj) in &tier_of {
            if i == j {
                continue;
            }
            if ti < tj {
                points += 1.0;
            } else if ti == tj {
                points += 0.5;
            }
        }
        out.insert(i, points / (k as f64 - 1.0));
    }
    out
}
