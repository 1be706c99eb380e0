//! Placement control: virtual budget queues, placement weights, and the
//! per-node 0/1 knapsack that picks each slot's cache contents.
//!
//! # Tie handling
//! All weight comparisons are plain f64 comparisons. The backtracking walk
//! tests the inclusion branch first with exact equality on recomputed
//! branch values, which is reliable because every DP cell was stored as
//! one of exactly those two candidate values. Ties therefore resolve
//! deterministically toward inclusion of the higher-index item.

use crate::config::ValidConfig;

/// Virtual queue recursion: drain up to `budget`, then add this slot's
/// cost. Never negative.
#[inline]
pub fn update_queue(q: f64, budget: f64, cost: f64) -> f64 {
    (q - budget).max(0.0) + cost
}

/// Placement weight of one file at one node: size times the
/// reward-versus-backlog score `V * estimate - alpha * queue`.
#[inline]
pub fn placement_weight(size: u32, estimate: f64, queue: f64, v_param: f64, alpha: f64) -> f64 {
    f64::from(size) * (v_param * estimate - alpha * queue)
}

/// Weights for every (node, file) pair plus the per-node candidate lists
/// (files with non-negative weight, ascending file index). Files with
/// negative weight are never cached by the solver.
#[derive(Debug, Clone)]
pub struct WeightTable {
    pub n_files: usize,
    /// Row-major node-by-file weights.
    pub weights: Vec<f64>,
    /// Per node: files with weight >= 0 in ascending index order.
    pub candidates: Vec<Vec<usize>>,
}

pub fn compute_weights(estimates: &[f64], queues: &[f64], cfg: &ValidConfig) -> WeightTable {
    let (n_nodes, n_files) = (cfg.n_nodes(), cfg.n_files());
    assert_eq!(estimates.len(), n_nodes * n_files);
    assert_eq!(queues.len(), n_nodes);
    let mut weights = Vec::with_capacity(n_nodes * n_files);
    let mut candidates = Vec::with_capacity(n_nodes);
    for node in 0..n_nodes {
        let mut f1 = Vec::new();
        for file in 0..n_files {
            let w = placement_weight(
                cfg.size(file),
                estimates[node * n_files + file],
                queues[node],
                cfg.v_param(),
                cfg.alpha(),
            );
            if w >= 0.0 {
                f1.push(file);
            }
            weights.push(w);
        }
        candidates.push(f1);
    }
    WeightTable { n_files, weights, candidates }
}

impl WeightTable {
    pub fn row(&self, node: usize) -> &[f64] {
        &self.weights[node * self.n_files..(node + 1) * self.n_files]
    }
}

/// Dense 0/1-knapsack value table, row-major (items + 1) x (capacity + 1).
#[derive(Debug, Clone)]
pub struct DpTable {
    pub items: usize,
    pub cap: usize,
    v: Vec<f64>,
}

impl DpTable {
    /// Optimal value over the first `i` items with residual capacity `m`.
    #[inline]
    pub fn value(&self, i: usize, m: usize) -> f64 {
        self.v[i * (self.cap + 1) + m]
    }

    pub fn optimum(&self) -> f64 {
        self.value(self.items, self.cap)
    }
}

/// Builds the knapsack table for non-negative item weights:
/// `v(i, m) = v(i-1, m)` when item `i` does not fit, otherwise
/// `max{v(i-1, m), v(i-1, m - size_i) + weight_i}`.
pub fn knapsack_dp(weights: &[f64], sizes: &[u32], capacity: u32) -> DpTable {
    assert_eq!(weights.len(), sizes.len());
    let items = weights.len();
    let cap = capacity as usize;
    let width = cap + 1;
    let mut v = vec![0.0f64; (items + 1) * width];
    for i in 1..=items {
        let size = sizes[i - 1] as usize;
        let weight = weights[i - 1];
        debug_assert!(weight >= 0.0, "knapsack items must have non-negative weight");
        let (prev, cur) = v.split_at_mut(i * width);
        let prev = &prev[(i - 1) * width..];
        for m in 0..width {
            cur[m] = if size > m {
                prev[m]
            } else {
                let take = prev[m - size] + weight;
                let skip = prev[m];
                if take > skip {
                    take
                } else {
                    skip
                }
            };
        }
    }
    DpTable { items, cap, v }
}

/// Walks the table back to a selection achieving the optimum, testing the
/// inclusion branch first at every step.
pub fn backtrack_placement(dp: &DpTable, weights: &[f64], sizes: &[u32]) -> Vec<bool> {
    let mut selected = vec![false; dp.items];
    let mut m = dp.cap;
    for i in (1..=dp.items).rev() {
        let size = sizes[i - 1] as usize;
        let here = dp.value(i, m);
        if m >= size && here == dp.value(i - 1, m - size) + weights[i - 1] {
            selected[i - 1] = true;
            m -= size;
        } else {
            assert!(
                here == dp.value(i - 1, m),
                "knapsack backtrack matched neither branch at item {i}"
            );
        }
    }
    selected
}

/// One node's placement solution.
#[derive(Debug, Clone, PartialEq)]
pub struct RowSolution {
    /// Per-file cached flags.
    pub selected: Vec<bool>,
    /// Total weight of the selection (equals the DP optimum exactly).
    pub objective: f64,
}

/// Solves one node's placement for arbitrary-sign weights: files with
/// negative weight are excluded up front, the rest go through the
/// knapsack.
pub fn solve_placement_row(weights: &[f64], sizes: &[u32], capacity: u32) -> RowSolution {
    assert_eq!(weights.len(), sizes.len());
    let eligible: Vec<usize> = (0..weights.len()).filter(|&f| weights[f] >= 0.0).collect();
    let w1: Vec<f64> = eligible.iter().map(|&f| weights[f]).collect();
    let s1: Vec<u32> = eligible.iter().map(|&f| sizes[f]).collect();
    let dp = knapsack_dp(&w1, &s1, capacity);
    let picks = backtrack_placement(&dp, &w1, &s1);
    let mut selected = vec![false; weights.len()];
    let mut objective = 0.0;
    for (j, &take) in picks.iter().enumerate() {
        if take {
            selected[eligible[j]] = true;
            objective += w1[j];
        }
    }
    // The sum above accumulates in the same ascending order the DP used,
    // so a mismatch can only mean a backtracking bug.
    assert!(
        objective == dp.optimum(),
        "reconstructed placement value {objective} != dp optimum {}",
        dp.optimum()
    );
    RowSolution { selected, objective }
}

/// Full placement step for one node at one slot: score every file by its
/// current estimate against the node's queue, then solve the knapsack.
pub fn set_cache_placement(
    node: usize,
    estimates_row: &[f64],
    queue: f64,
    cfg: &ValidConfig,
) -> RowSolution {
    let weights: Vec<f64> = (0..cfg.n_files())
        .map(|f| {
            placement_weight(cfg.size(f), estimates_row[f], queue, cfg.v_param(), cfg.alpha())
        })
        .collect();
    solve_placement_row(&weights, cfg.sizes(), cfg.capacity(node))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use proptest::prelude::*;

    #[test]
    fn queue_update_cases() {
        assert_eq!(update_queue(5.0, 8.0, 10.0), 10.0);
        assert_eq!(update_queue(20.0, 8.0, 8.0), 20.0);
        assert_eq!(update_queue(0.0, 8.0, 0.0), 0.0);
    }

    #[test]
    fn weight_formula_case() {
        assert_eq!(placement_weight(4, 2.0, 30.0, 50.0, 1.0), 280.0);
    }

    #[test]
    fn zero_weight_is_a_candidate() {
        let cfg = presets::tiny_config().validate().unwrap().config;
        // estimate 3, queue 30, V=10, alpha=1 -> score exactly 0.
        let estimates = vec![3.0; 8];
        let queues = vec![30.0, 5.0];
        let table = compute_weights(&estimates, &queues, &cfg);
        assert_eq!(table.row(0), &[0.0, 0.0, 0.0, 0.0]);
        assert_eq!(table.candidates[0], vec![0, 1, 2, 3]);
        // Node 1 scores positive: 1*(30-5)=25 etc.
        assert_eq!(table.row(1), &[25.0, 50.0, 100.0, 200.0]);
    }

    #[test]
    fn knapsack_known_optimum() {
        let weights = [3.0, 5.0, 6.0, 10.0];
        let sizes = [1, 2, 4, 8];
        let dp = knapsack_dp(&weights, &sizes, 8);
        assert_eq!(dp.optimum(), 14.0);
        let picks = backtrack_placement(&dp, &weights, &sizes);
        assert_eq!(picks, vec![true, true, true, false]);
    }

    #[test]
    fn knapsack_zero_capacity_selects_nothing() {
        let sol = solve_placement_row(&[5.0, 2.0], &[1, 1], 0);
        assert_eq!(sol.selected, vec![false, false]);
        assert_eq!(sol.objective, 0.0);
    }

    #[test]
    fn oversized_item_never_selected() {
        let sol = solve_placement_row(&[100.0, 1.0], &[9, 2], 8);
        assert_eq!(sol.selected, vec![false, true]);
    }

    #[test]
    fn equal_items_tie_selects_higher_index() {
        // Two identical items, room for one: the inclusion branch is
        // tested first at the last item.
        let sol = solve_placement_row(&[7.0, 7.0], &[4, 4], 5);
        assert_eq!(sol.selected, vec![false, true]);
        assert_eq!(sol.objective, 7.0);
    }

    #[test]
    fn negative_weights_are_excluded() {
        let sol = solve_placement_row(&[-1.0, 4.0, -0.5, 3.0], &[2, 2, 2, 2], 8);
        assert_eq!(sol.selected, vec![false, true, false, true]);
        assert_eq!(sol.objective, 7.0);
    }

    #[test]
    fn placement_step_respects_capacity_and_queue() {
        let cfg = presets::tiny_config().validate().unwrap().config;
        // Queue zero: everything attractive; capacity 6 of [1,2,4,8].
        let sol = set_cache_placement(0, &[1.0, 1.0, 1.0, 1.0], 0.0, &cfg);
        let used: u32 = sol
            .selected
            .iter()
            .zip(cfg.sizes())
            .filter(|(&x, _)| x)
            .map(|(_, &l)| l)
            .sum();
        assert!(used <= 6);
        // Huge queue: every weight negative, nothing cached.
        let sol = set_cache_placement(0, &[1.0, 1.0, 1.0, 1.0], 1e6, &cfg);
        assert!(sol.selected.iter().all(|&x| !x));
        assert_eq!(sol.objective, 0.0);
    }

    /// Exhaustive reference: best subset by total weight under the
    /// capacity, summing weights in ascending index order exactly like
    /// the DP does.
    fn brute_best(weights: &[f64], sizes: &[u32], cap: u32) -> f64 {
        let n = weights.len();
        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let mut load = 0u64;
            let mut value = 0.0;
            for i in 0..n {
                if mask & (1 << i) != 0 {
                    load += u64::from(sizes[i]);
                    value += weights[i];
                }
            }
            if load <= u64::from(cap) && value > best {
                best = value;
            }
        }
        best
    }

    proptest! {
        // DP value matches exhaustive search bit for bit on non-negative
        // weights (both sum selections in ascending index order).
        #[test]
        fn dp_matches_brute_force(
            items in proptest::collection::vec((0.0f64..100.0, 1u32..=8), 0..10),
            cap in 0u32..=30,
        ) {
            let weights: Vec<f64> = items.iter().map(|&(w, _)| w).collect();
            let sizes: Vec<u32> = items.iter().map(|&(_, s)| s).collect();
            let sol = solve_placement_row(&weights, &sizes, cap);
            prop_assert_eq!(sol.objective, brute_best(&weights, &sizes, cap));
            let used: u64 = sizes.iter().zip(&sol.selected).filter(|(_, &x)| x).map(|(&s, _)| u64::from(s)).sum();
            prop_assert!(used <= u64::from(cap));
        }

        // Scaling all weights by a positive power of two (exact in
        // floating point) leaves the selected set unchanged.
        #[test]
        fn selection_invariant_under_weight_scaling(
            items in proptest::collection::vec((0.0f64..100.0, 1u32..=8), 1..10),
            cap in 1u32..=30,
            exp in -3i32..=8,
        ) {
            let weights: Vec<f64> = items.iter().map(|&(w, _)| w).collect();
            let sizes: Vec<u32> = items.iter().map(|&(_, s)| s).collect();
            let scale = 2.0f64.powi(exp);
            let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
            let a = solve_placement_row(&weights, &sizes, cap);
            let b = solve_placement_row(&scaled, &sizes, cap);
            prop_assert_eq!(a.selected, b.selected);
        }
    }

    #[test]
    fn selection_invariant_under_arbitrary_scaling_samples() {
        // Non-power-of-two factors on a few fixed instances.
        let weights = [3.0, 5.0, 6.0, 10.0, 0.25];
        let sizes = [1, 2, 4, 8, 3];
        let base = solve_placement_row(&weights, &sizes, 9);
        for scale in [3.0, 0.1, 7.25, 1e6] {
            let scaled: Vec<f64> = weights.iter().map(|w| w * scale).collect();
            let sol = solve_placement_row(&scaled, &sizes, 9);
            assert_eq!(sol.selected, base.selected, "scale {scale}");
        }
    }
}
