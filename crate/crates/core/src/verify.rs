//! Randomized self-checks runnable from the command line.
//!
//! Each suite stresses one load-bearing computation against an
//! independent reference implementation on freshly drawn instances.
//! These run in release builds on demand, complementing the unit tests:
//! a user who doubts an installation can re-derive the core guarantees
//! locally in about a second.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::solve_placement_row;
use crate::learning::{hucb1_estimate, ucbt_estimate, ArmStats};
use crate::oracle::{enumerate_feasible, lagrangian_r_star, optimal_mixture};

/// Outcome of one suite.
#[derive(Debug, Clone)]
pub struct CheckReport {
    pub name: &'static str,
    pub cases: u32,
    /// Descriptions of failing cases, capped; empty means the suite passed.
    pub failures: Vec<String>,
}

impl CheckReport {
    pub fn passed(&self) -> bool {
        self.failures.is_empty()
    }

    fn fail(&mut self, msg: String) {
        // A handful of concrete counterexamples is enough to debug with.
        if self.failures.len() < 5 {
            self.failures.push(msg);
        }
    }
}

fn suite_rng(seed: u64, suite: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // Suite streams live far away from the simulation streams.
    rng.set_stream(100 + suite);
    rng
}

/// Knapsack solver versus an exhaustive subset scan.
///
/// Both sides accumulate objective values over ascending file indices,
/// so agreement is required bit for bit, not approximately.
pub fn check_knapsack(seed: u64, cases: u32) -> CheckReport {
    let mut report = CheckReport { name: "knapsack-vs-subset-scan", cases, failures: vec![] };
    let mut rng = suite_rng(seed, 0);
    for case in 0..cases {
        let n = rng.gen_range(0..=12usize);
        let sizes: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=9)).collect();
        let capacity: u32 = rng.gen_range(0..=30);
        let weights: Vec<f64> = (0..n).map(|_| rng.gen_range(-50.0..200.0)).collect();

        let sol = solve_placement_row(&weights, &sizes, capacity);

        let mut best = 0.0f64;
        for mask in 0u32..(1 << n) {
            let mut load = 0u64;
            let mut value = 0.0f64;
            for f in 0..n {
                if mask & (1 << f) != 0 {
                    load += u64::from(sizes[f]);
                    value += weights[f];
                }
            }
            if load <= u64::from(capacity) && value > best {
                best = value;
            }
        }

        let load: u64 = sol
            .selected
            .iter()
            .zip(&sizes)
            .filter(|(&s, _)| s)
            .map(|(_, &l)| u64::from(l))
            .sum();
        if sol.objective != best {
            report.fail(format!(
                "case {case}: solver objective {} != scan optimum {best} \
                 (sizes {sizes:?}, capacity {capacity}, weights {weights:?})",
                sol.objective
            ));
        } else if load > u64::from(capacity) {
            report.fail(format!("case {case}: selection overflows capacity ({load} > {capacity})"));
        }
    }
    report
}

/// Benchmark mixture solver versus the multiplier-sweep solver on random
/// single-node instances small enough to enumerate.
pub fn check_oracle(seed: u64, cases: u32) -> CheckReport {
    let mut report = CheckReport { name: "mixture-vs-multiplier-sweep", cases, failures: vec![] };
    let mut rng = suite_rng(seed, 1);
    for case in 0..cases {
        let n = rng.gen_range(1..=8usize);
        let sizes: Vec<u32> = (0..n).map(|_| rng.gen_range(1..=8)).collect();
        let means: Vec<f64> = (0..n).map(|_| rng.gen_range(0.0..4.0)).collect();
        let capacity: u32 = rng.gen_range(0..=20);
        let alpha = [0.5, 1.0, 2.0][rng.gen_range(0..3)];
        let budget = rng.gen_range(0.0..=(alpha * f64::from(capacity) * 1.2 + 1.0));

        let catalog = enumerate_feasible(&sizes, &means, capacity, alpha).expect("n <= 8");
        let mix = optimal_mixture(&catalog, budget);
        let swept = lagrangian_r_star(&sizes, &means, capacity, alpha, budget, 1e-9)
            .expect("sweep converges on enumerable instances");

        let scale = 1.0 + mix.value.abs();
        if (mix.value - swept).abs() > 1e-7 * scale {
            report.fail(format!(
                "case {case}: mixture {} vs sweep {swept} \
                 (sizes {sizes:?}, means {means:?}, capacity {capacity}, \
                  alpha {alpha}, budget {budget})",
                mix.value
            ));
            continue;
        }

        // The mixture must itself be a certificate: probabilities on
        // feasible sets summing to one, expected cost within budget.
        let mut prob = 0.0;
        let mut cost = 0.0;
        for &(mask, p) in &mix.support {
            prob += p;
            let mut load = 0u64;
            for f in 0..n {
                if mask & (1 << f) != 0 {
                    load += u64::from(sizes[f]);
                }
            }
            if load > u64::from(capacity) {
                report.fail(format!("case {case}: support mask {mask:#b} overflows capacity"));
            }
            cost += p * alpha * load as f64;
        }
        if (prob - 1.0).abs() > 1e-12 {
            report.fail(format!("case {case}: support probabilities sum to {prob}"));
        }
        if cost > budget + 1e-9 {
            report.fail(format!("case {case}: mixture expected cost {cost} exceeds budget {budget}"));
        }
    }
    report
}

/// Historical observations must be interchangeable with online ones:
/// an arm seeded with a batch gives the same estimates as an arm that
/// observed the batch live, at matching slot counts.
pub fn check_history_equivalence(seed: u64, cases: u32) -> CheckReport {
    let mut report =
        CheckReport { name: "history-online-interchangeability", cases, failures: vec![] };
    let mut rng = suite_rng(seed, 2);
    for case in 0..cases {
        let k_n = rng.gen_range(1..=10u64);
        let obs: Vec<u64> = (0..rng.gen_range(1..=40usize))
            .map(|_| rng.gen_range(0..=k_n))
            .collect();
        let t = rng.gen_range(1..=10_000u64);

        let count = obs.len() as u64;
        let sum: u64 = obs.iter().sum();
        let sum_sq: u64 = obs.iter().map(|&d| d * d).sum();
        let seeded = ArmStats::from_history(count, sum, sum_sq);

        let mut live = ArmStats::default();
        for &d in &obs {
            live.update(d as u32, true);
        }

        let k = k_n as f64;
        let pairs = [
            ("hucb1", hucb1_estimate(&seeded, t, k), hucb1_estimate(&live, t, k)),
            ("ucbt", ucbt_estimate(&seeded, t, k), ucbt_estimate(&live, t, k)),
        ];
        for (what, a, b) in pairs {
            if a != b {
                report.fail(format!(
                    "case {case}: {what} differs between seeded ({a}) and live ({b}) \
                     for obs {obs:?} at t={t}"
                ));
            }
        }
    }
    report
}

/// Runs every suite with the given base seed.
pub fn run_all(seed: u64) -> Vec<CheckReport> {
    vec![
        check_knapsack(seed, 400),
        check_oracle(seed, 300),
        check_history_equivalence(seed, 500),
    ]
}
