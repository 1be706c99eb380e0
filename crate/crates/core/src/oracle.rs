//! Best stationary benchmark: the highest expected per-slot reward any
//! randomized placement can earn while keeping each node's expected
//! storage cost within its budget.
//!
//! Per node this is a tiny linear program over the feasible placements
//! (probability mix, one expected-cost constraint), whose optimum lies on
//! the upper concave envelope of the feasible (cost, reward) points and
//! needs at most two support placements. Two independent solvers are
//! provided: exact enumeration of the feasible sets (catalogs up to
//! [`MAX_ENUM_FILES`] files) and a multiplier sweep that never
//! materializes the catalog. They must agree to high precision; the test
//! suites hold them to 1e-9.

use crate::config::ValidConfig;
use crate::control::solve_placement_row;
use crate::demand::PopularityModel;

/// Catalog-size ceiling for exact enumeration.
pub const MAX_ENUM_FILES: usize = 22;

#[derive(Debug, thiserror::Error)]
pub enum OracleError {
    #[error("feasible-set enumeration supports at most {MAX_ENUM_FILES} files (got {0}); use the multiplier sweep")]
    TooManyFiles(usize),
    #[error("multiplier sweep did not converge within {iters} iterations (bracket [{lo}, {hi}], value {value})")]
    NoConvergence { iters: u32, lo: f64, hi: f64, value: f64 },
}

/// One capacity-feasible placement of a single node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeasiblePoint {
    /// Bitmask over file indices (bit f set = file f cached).
    pub mask: u32,
    /// Expected storage cost (unit cost times total size).
    pub cost: f64,
    /// Expected reward (sum of size times mean demand over cached files).
    pub reward: f64,
}

/// Enumerates every subset of the catalog that fits in `capacity`,
/// including the empty set, with its expected cost and reward.
pub fn enumerate_feasible(
    sizes: &[u32],
    means: &[f64],
    capacity: u32,
    alpha: f64,
) -> Result<Vec<FeasiblePoint>, OracleError> {
    assert_eq!(sizes.len(), means.len());
    if sizes.len() > MAX_ENUM_FILES {
        return Err(OracleError::TooManyFiles(sizes.len()));
    }
    let mut out = Vec::new();
    // Depth-first over file indices; every visited state is feasible.
    fn walk(
        f: usize,
        mask: u32,
        load: u64,
        reward: f64,
        sizes: &[u32],
        means: &[f64],
        cap: u64,
        alpha: f64,
        out: &mut Vec<FeasiblePoint>,
    ) {
        if f == sizes.len() {
            out.push(FeasiblePoint { mask, cost: alpha * load as f64, reward });
            return;
        }
        walk(f + 1, mask, load, reward, sizes, means, cap, alpha, out);
        let l = u64::from(sizes[f]);
        if load + l <= cap {
            walk(
                f + 1,
                mask | (1 << f),
                load + l,
                reward + f64::from(sizes[f]) * means[f],
                sizes,
                means,
                cap,
                alpha,
                out,
            );
        }
    }
    walk(0, 0, 0, 0.0, sizes, means, u64::from(capacity), alpha, &mut out);
    Ok(out)
}

/// Optimal randomized placement for one node under an expected-cost cap.
#[derive(Debug, Clone, PartialEq)]
pub struct Mixture {
    /// Expected reward of the optimal mix.
    pub value: f64,
    /// Support placements with probabilities; at most two entries
    /// summing to 1.
    pub support: Vec<(u32, f64)>,
}

/// Indices of the vertices of the upper concave envelope of `(cost,
/// reward)` points, restricted to the Pareto frontier (strictly
/// increasing cost and reward), in ascending cost order.
fn upper_envelope(points: &[(f64, f64)]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..points.len()).collect();
    order.sort_by(|&a, &b| {
        points[a]
            .0
            .partial_cmp(&points[b].0)
            .unwrap()
            .then(points[b].1.partial_cmp(&points[a].1).unwrap())
    });
    // Pareto sweep: keep only points that strictly improve the reward.
    let mut frontier: Vec<usize> = Vec::new();
    for i in order {
        let dominated = frontier
            .last()
            .is_some_and(|&j| points[i].1 <= points[j].1);
        if !dominated {
            frontier.push(i);
        }
    }
    // Monotone-chain upper hull over the frontier.
    let mut hull: Vec<usize> = Vec::new();
    for i in frontier {
        while hull.len() >= 2 {
            let a = points[hull[hull.len() - 2]];
            let b = points[hull[hull.len() - 1]];
            let c = points[i];
            // Pop b when it is on or below the chord a-c.
            let cross = (b.0 - a.0) * (c.1 - a.1) - (b.1 - a.1) * (c.0 - a.0);
            if cross >= 0.0 {
                hull.pop();
            } else {
                break;
            }
        }
        hull.push(i);
    }
    hull
}

/// Envelope value at `budget` for raw (cost, reward) points.
fn envelope_value_at(points: &[(f64, f64)], budget: f64) -> f64 {
    let hull = upper_envelope(points);
    match locate(points, &hull, budget) {
        Located::Vertex(i) => points[i].1,
        Located::Segment(i, j, q) => (1.0 - q) * points[i].1 + q * points[j].1,
    }
}

enum Located {
    Vertex(usize),
    /// Between hull vertices i and j with interpolation weight q on j.
    Segment(usize, usize, f64),
}

fn locate(points: &[(f64, f64)], hull: &[usize], budget: f64) -> Located {
    assert!(!hull.is_empty(), "hull always contains the empty placement");
    let last = *hull.last().unwrap();
    if budget >= points[last].0 {
        return Located::Vertex(last);
    }
    // budget < max hull cost; the first vertex has cost 0 <= budget.
    let mut k = 0;
    while points[hull[k + 1]].0 <= budget {
        k += 1;
    }
    let (i, j) = (hull[k], hull[k + 1]);
    if points[i].0 == budget {
        return Located::Vertex(i);
    }
    let q = (budget - points[i].0) / (points[j].0 - points[i].0);
    Located::Segment(i, j, q)
}

/// Solves the one-node mixture program over an enumerated catalog.
pub fn optimal_mixture(catalog: &[FeasiblePoint], budget: f64) -> Mixture {
    assert!(budget >= 0.0);
    let pts: Vec<(f64, f64)> = catalog.iter().map(|p| (p.cost, p.reward)).collect();
    let hull = upper_envelope(&pts);
    match locate(&pts, &hull, budget) {
        Located::Vertex(i) => Mixture {
            value: catalog[i].reward,
            support: vec![(catalog[i].mask, 1.0)],
        },
        Located::Segment(i, j, q) => Mixture {
            value: (1.0 - q) * catalog[i].reward + q * catalog[j].reward,
            support: vec![(catalog[i].mask, 1.0 - q), (catalog[j].mask, q)],
        },
    }
}

/// Multiplier-sweep solver for one node. Trades cost against reward via a
/// penalty `lambda`: each sweep step solves a capacity knapsack with item
/// values `size * (mean - lambda * alpha)` (negative-value items dropped),
/// yielding one envelope point. Bisection on `lambda` brackets the budget
/// until the envelope value at the budget is stable within `tol`.
pub fn lagrangian_r_star(
    sizes: &[u32],
    means: &[f64],
    capacity: u32,
    alpha: f64,
    budget: f64,
    tol: f64,
) -> Result<f64, OracleError> {
    assert!(budget >= 0.0 && alpha > 0.0);
    let solve_at = |lambda: f64| -> (f64, f64) {
        let weights: Vec<f64> = sizes
            .iter()
            .zip(means)
            .map(|(&l, &d)| f64::from(l) * (d - lambda * alpha))
            .collect();
        let sol = solve_placement_row(&weights, sizes, capacity);
        let (mut cost, mut reward) = (0.0, 0.0);
        for (f, &take) in sol.selected.iter().enumerate() {
            if take {
                cost += alpha * f64::from(sizes[f]);
                reward += f64::from(sizes[f]) * means[f];
            }
        }
        (cost, reward)
    };

    let mut points: Vec<(f64, f64)> = vec![(0.0, 0.0)];
    let unconstrained = solve_at(0.0);
    if unconstrained.0 <= budget {
        // The budget never binds; the capacity optimum stands.
        return Ok(unconstrained.1);
    }
    points.push(unconstrained);
    let mut lo = 0.0f64;
    let hi0 = means.iter().copied().fold(0.0f64, f64::max) / alpha + 1.0;
    let mut hi = hi0;
    points.push(solve_at(hi));

    let mut value = envelope_value_at(&points, budget);
    const MAX_ITERS: u32 = 200;
    for _ in 0..MAX_ITERS {
        let mid = 0.5 * (lo + hi);
        let p = solve_at(mid);
        if p.0 > budget {
            lo = mid;
        } else {
            hi = mid;
        }
        points.push(p);
        let next = envelope_value_at(&points, budget);
        let stable = (next - value).abs() < tol;
        value = next;
        if stable && (hi - lo) <= 1e-9 * (1.0 + hi0) {
            return Ok(value);
        }
    }
    Err(OracleError::NoConvergence { iters: MAX_ITERS, lo, hi, value })
}

/// Per-node benchmark result.
#[derive(Debug, Clone)]
pub struct NodeOracle {
    pub value: f64,
    /// Present when the enumeration path ran (catalog small enough);
    /// the sampling policy used in tests needs it.
    pub mixture: Option<Mixture>,
}

/// Full-system benchmark: sum of the per-node optima.
#[derive(Debug, Clone)]
pub struct RStar {
    pub total: f64,
    pub nodes: Vec<NodeOracle>,
}

/// Solves one node, choosing the path by catalog size.
pub fn r_star_node(
    sizes: &[u32],
    means: &[f64],
    capacity: u32,
    alpha: f64,
    budget: f64,
) -> Result<NodeOracle, OracleError> {
    if sizes.len() <= MAX_ENUM_FILES {
        let catalog = enumerate_feasible(sizes, means, capacity, alpha)?;
        let mix = optimal_mixture(&catalog, budget);
        Ok(NodeOracle { value: mix.value, mixture: Some(mix) })
    } else {
        let value = lagrangian_r_star(sizes, means, capacity, alpha, budget, 1e-9)?;
        Ok(NodeOracle { value, mixture: None })
    }
}

/// Benchmark for a whole configured system against its true means.
pub fn r_star(cfg: &ValidConfig, model: &PopularityModel) -> Result<RStar, OracleError> {
    let mut nodes = Vec::with_capacity(cfg.n_nodes());
    let mut total = 0.0;
    for node in 0..cfg.n_nodes() {
        let res = r_star_node(
            cfg.sizes(),
            model.true_means_row(node),
            cfg.capacity(node),
            cfg.alpha(),
            cfg.budget(node),
        )?;
        total += res.value;
        nodes.push(res);
    }
    Ok(RStar { total, nodes })
}
