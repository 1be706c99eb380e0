//! Placement policies.
//!
//! Every policy follows the same two-phase slot protocol: `decide` fixes
//! the placement before demands are revealed, `observe` consumes the
//! realized demand and returns the slot's reward and cost accounting.
//! Proactive policies (the bandit family) change their placement only in
//! `decide`; the reactive caches never change it in `decide` and instead
//! mutate the resident set request by request inside `observe`.
//!
//! # Reward and cost accounting
//! Proactive: reward is size times demand summed over cached files; cost
//! is the storage cost of the decided placement. Reactive: each request
//! is processed atomically in event order (ascending user id), a request
//! counts as a hit only if the file is resident at that moment, and the
//! cost is measured on the end-of-slot resident set.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{EstimatorKind, PolicyKind, ValidConfig};
use crate::control::{placement_weight, set_cache_placement, solve_placement_row, update_queue};
use crate::demand::HistorySet;
use crate::learning::{hucb1_estimate, mean_estimate, ucbt_estimate, StatsTable};
use crate::oracle::RStar;
use crate::types::{Placement, SlotDemand, SlotOutcome};

#[derive(Debug, thiserror::Error)]
pub enum PolicyError {
    #[error("oracle-mixture policy requires enumerated mixtures for every node")]
    MixtureUnavailable,
}

/// Reward/cost accounting for a placement held fixed over one slot.
pub fn proactive_outcome(
    placement: &Placement,
    demand: &SlotDemand,
    cfg: &ValidConfig,
) -> SlotOutcome {
    let mut reward = vec![0.0; cfg.n_nodes()];
    let mut cost = vec![0.0; cfg.n_nodes()];
    for node in 0..cfg.n_nodes() {
        let mut r = 0.0;
        let mut used = 0u64;
        for file in 0..cfg.n_files() {
            if placement.get(node, file) {
                r += f64::from(cfg.size(file)) * f64::from(demand.matrix.get(node, file));
                used += u64::from(cfg.size(file));
            }
        }
        reward[node] = r;
        cost[node] = cfg.alpha() * used as f64;
    }
    SlotOutcome { reward, cost }
}

/// Queue-regulated bandit placement with a pluggable demand estimator.
pub struct CphblPolicy {
    estimator: EstimatorKind,
    epsilon: f64,
    stats: StatsTable,
    queues: Vec<f64>,
    placement: Placement,
    rng: ChaCha8Rng,
    /// Number of explore-branch decisions taken so far (one possible per
    /// node per slot).
    pub explore_draws: u64,
    estimates: Vec<f64>,
}

impl CphblPolicy {
    pub fn new(
        cfg: &ValidConfig,
        history: &HistorySet,
        estimator: EstimatorKind,
        epsilon: f64,
        rng: ChaCha8Rng,
    ) -> Self {
        CphblPolicy {
            estimator,
            epsilon,
            stats: StatsTable::from_history(history, cfg.n_nodes(), cfg.n_files()),
            queues: vec![0.0; cfg.n_nodes()],
            placement: Placement::empty(cfg.n_nodes(), cfg.n_files()),
            rng,
            explore_draws: 0,
            estimates: vec![0.0; cfg.n_nodes() * cfg.n_files()],
        }
    }

    fn estimate(&self, node: usize, file: usize, t: u64, k_n: f64) -> f64 {
        let arm = self.stats.arm(node, file);
        match self.estimator {
            EstimatorKind::Hucb1 => hucb1_estimate(arm, t, k_n),
            EstimatorKind::Ucbt => ucbt_estimate(arm, t, k_n),
            EstimatorKind::Mean => mean_estimate(arm, k_n),
        }
    }

    fn decide(&mut self, t: u64, cfg: &ValidConfig) -> &Placement {
        let n_files = cfg.n_files();
        for node in 0..cfg.n_nodes() {
            let k_n = cfg.k_n(node) as f64;
            for file in 0..n_files {
                self.estimates[node * n_files + file] = self.estimate(node, file, t, k_n);
            }
            let row = &self.estimates[node * n_files..(node + 1) * n_files];
            // Per node: one branch draw (only when exploration is on),
            // then any selection draws. Draw order is part of the
            // deterministic contract.
            let explore = self.epsilon > 0.0 && self.rng.gen::<f64>() < self.epsilon;
            if explore {
                self.explore_draws += 1;
                let selected = explore_row(row, self.queues[node], node, cfg, &mut self.rng);
                self.placement.set_row(node, &selected);
            } else {
                let sol = set_cache_placement(node, row, self.queues[node], cfg);
                self.placement.set_row(node, &sol.selected);
            }
        }
        &self.placement
    }

    fn observe(&mut self, demand: &SlotDemand, cfg: &ValidConfig) -> SlotOutcome {
        let outcome = proactive_outcome(&self.placement, demand, cfg);
        for node in 0..cfg.n_nodes() {
            self.queues[node] =
                update_queue(self.queues[node], cfg.budget(node), outcome.cost[node]);
        }
        self.stats.update_slot(&demand.matrix, &self.placement);
        outcome
    }
}

/// Exploration branch: fill the cache by drawing uniformly, without
/// replacement, among the still-fitting candidate files (those whose
/// placement weight is non-negative) until none fits.
fn explore_row(
    estimates: &[f64],
    queue: f64,
    node: usize,
    cfg: &ValidConfig,
    rng: &mut ChaCha8Rng,
) -> Vec<bool> {
    let mut pool: Vec<usize> = (0..cfg.n_files())
        .filter(|&f| {
            placement_weight(cfg.size(f), estimates[f], queue, cfg.v_param(), cfg.alpha()) >= 0.0
        })
        .collect();
    let mut row = vec![false; cfg.n_files()];
    let mut remaining = cfg.capacity(node);
    loop {
        pool.retain(|&f| cfg.size(f) <= remaining);
        if pool.is_empty() {
            return row;
        }
        let pick = pool.swap_remove(rng.gen_range(0..pool.len()));
        row[pick] = true;
        remaining -= cfg.size(pick);
    }
}

/// Capacity-only bandit: optimistic estimates from online observations
/// alone, objective size times estimate, no queue and no budget.
pub struct McucbPolicy {
    stats: StatsTable,
    placement: Placement,
    weights: Vec<f64>,
}

impl McucbPolicy {
    pub fn new(cfg: &ValidConfig) -> Self {
        McucbPolicy {
            stats: StatsTable::empty(cfg.n_nodes(), cfg.n_files()),
            placement: Placement::empty(cfg.n_nodes(), cfg.n_files()),
            weights: vec![0.0; cfg.n_files()],
        }
    }

    fn decide(&mut self, t: u64, cfg: &ValidConfig) -> &Placement {
        for node in 0..cfg.n_nodes() {
            let k_n = cfg.k_n(node) as f64;
            for file in 0..cfg.n_files() {
                let est = hucb1_estimate(self.stats.arm(node, file), t, k_n);
                self.weights[file] = f64::from(cfg.size(file)) * est;
            }
            let sol = solve_placement_row(&self.weights, cfg.sizes(), cfg.capacity(node));
            self.placement.set_row(node, &sol.selected);
        }
        &self.placement
    }

    fn observe(&mut self, demand: &SlotDemand, cfg: &ValidConfig) -> SlotOutcome {
        let outcome = proactive_outcome(&self.placement, demand, cfg);
        self.stats.update_slot(&demand.matrix, &self.placement);
        outcome
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum ReactiveMode {
    Lfu,
    Lru,
}

/// Classic reactive cache (LFU or LRU eviction) driven by the per-user
/// request stream.
///
/// On a miss the file is admitted only if it can fit in the cache at all;
/// admission evicts by the policy's priority until there is room.
/// LFU priority: fewest requests since the file last entered the cache
/// (the admitting request counts as the first), ties broken toward the
/// smaller file index. LRU priority: least recent (slot, event order)
/// touch, where admission stamps the admitting request.
pub struct ReactivePolicy {
    mode: ReactiveMode,
    placement: Placement,
    /// LFU: request count. LRU: last-touch stamp. Valid only while the
    /// file is resident.
    meta: Vec<u64>,
    free: Vec<u32>,
    stamp_base: u64,
}

impl ReactivePolicy {
    pub fn new(cfg: &ValidConfig, mode: PolicyKind) -> Self {
        let mode = match mode {
            PolicyKind::Lfu => ReactiveMode::Lfu,
            PolicyKind::Lru => ReactiveMode::Lru,
            _ => unreachable!("reactive policy constructed for a non-reactive kind"),
        };
        ReactivePolicy {
            mode,
            placement: Placement::empty(cfg.n_nodes(), cfg.n_files()),
            meta: vec![0; cfg.n_nodes() * cfg.n_files()],
            free: (0..cfg.n_nodes()).map(|n| cfg.capacity(n)).collect(),
            stamp_base: cfg.n_users() as u64 + 1,
        }
    }

    fn observe(&mut self, t: u64, demand: &SlotDemand, cfg: &ValidConfig) -> SlotOutcome {
        let n_files = cfg.n_files();
        let mut reward = vec![0.0; cfg.n_nodes()];
        for (order, ev) in demand.events.iter().enumerate() {
            let (node, file) = (ev.node, ev.file);
            let idx = node * n_files + file;
            let stamp = t * self.stamp_base + order as u64 + 1;
            if self.placement.get(node, file) {
                reward[node] += f64::from(cfg.size(file));
                self.meta[idx] = match self.mode {
                    ReactiveMode::Lfu => self.meta[idx] + 1,
                    ReactiveMode::Lru => stamp,
                };
            } else if cfg.size(file) <= cfg.capacity(node) {
                while self.free[node] < cfg.size(file) {
                    let victim = self.eviction_victim(node, n_files);
                    self.placement.set(node, victim, false);
                    self.free[node] += cfg.size(victim);
                    self.meta[node * n_files + victim] = 0;
                }
                self.placement.set(node, file, true);
                self.free[node] -= cfg.size(file);
                self.meta[idx] = match self.mode {
                    ReactiveMode::Lfu => 1,
                    ReactiveMode::Lru => stamp,
                };
            }
        }
        let cost = (0..cfg.n_nodes())
            .map(|n| cfg.alpha() * self.placement.used_capacity(n, cfg.sizes()) as f64)
            .collect();
        SlotOutcome { reward, cost }
    }

    /// Lowest-priority resident file of `node` (ascending index scan, so
    /// equal priorities resolve toward the smaller file index).
    fn eviction_victim(&self, node: usize, n_files: usize) -> usize {
        let mut best: Option<(u64, usize)> = None;
        for file in 0..n_files {
            if self.placement.get(node, file) {
                let key = self.meta[node * n_files + file];
                if best.is_none_or(|(k, _)| key < k) {
                    best = Some((key, file));
                }
            }
        }
        best.expect("eviction requested from an empty cache").1
    }

    /// Metadata must exist exactly for resident files (test support).
    pub fn metadata_consistent(&self) -> bool {
        self.meta
            .iter()
            .enumerate()
            .all(|(i, &m)| {
                let (node, file) = (i / self.placement.files(), i % self.placement.files());
                self.placement.get(node, file) || m == 0
            })
    }
}

/// Caches nothing, ever. Zero reward, zero cost; the regret of this
/// policy equals the oracle benchmark exactly.
pub struct NoopPolicy {
    placement: Placement,
}

/// Draws each node's placement independently every slot from the
/// precomputed optimal mixture. Needs the enumerated oracle; test use.
pub struct MixturePolicy {
    /// Per node: (cumulative probability, placement row).
    support: Vec<Vec<(f64, Vec<bool>)>>,
    placement: Placement,
    rng: ChaCha8Rng,
}

impl MixturePolicy {
    pub fn new(cfg: &ValidConfig, oracle: &RStar, rng: ChaCha8Rng) -> Result<Self, PolicyError> {
        let mut support = Vec::with_capacity(cfg.n_nodes());
        for node in oracle.nodes.iter() {
            let mix = node.mixture.as_ref().ok_or(PolicyError::MixtureUnavailable)?;
            let mut acc = 0.0;
            let rows = mix
                .support
                .iter()
                .map(|&(mask, p)| {
                    acc += p;
                    let row = (0..cfg.n_files()).map(|f| mask & (1 << f) != 0).collect();
                    (acc, row)
                })
                .collect();
            support.push(rows);
        }
        Ok(MixturePolicy {
            support,
            placement: Placement::empty(cfg.n_nodes(), cfg.n_files()),
            rng,
        })
    }
}

/// Any placement policy, dispatched by configuration.
pub enum Policy {
    Cphbl(CphblPolicy),
    Mcucb(McucbPolicy),
    Reactive(ReactivePolicy),
    Noop(NoopPolicy),
    Mixture(MixturePolicy),
}

impl Policy {
    /// Builds the configured policy. `oracle` is consulted only by the
    /// mixture policy.
    pub fn new(
        cfg: &ValidConfig,
        history: &HistorySet,
        oracle: Option<&RStar>,
        rng: ChaCha8Rng,
    ) -> Result<Self, PolicyError> {
        let spec = cfg.policy();
        Ok(match spec.kind {
            PolicyKind::Cphbl => {
                Policy::Cphbl(CphblPolicy::new(cfg, history, spec.estimator, spec.epsilon, rng))
            }
            PolicyKind::Mcucb => Policy::Mcucb(McucbPolicy::new(cfg)),
            PolicyKind::Lfu | PolicyKind::Lru => {
                Policy::Reactive(ReactivePolicy::new(cfg, spec.kind))
            }
            PolicyKind::Noop => Policy::Noop(NoopPolicy {
                placement: Placement::empty(cfg.n_nodes(), cfg.n_files()),
            }),
            PolicyKind::OracleMixture => {
                let oracle = oracle.expect("mixture policy needs the oracle result");
                Policy::Mixture(MixturePolicy::new(cfg, oracle, rng)?)
            }
        })
    }

    /// Fixes the placement for slot `t` before demand is revealed.
    pub fn decide(&mut self, t: u64, cfg: &ValidConfig) -> &Placement {
        match self {
            Policy::Cphbl(p) => p.decide(t, cfg),
            Policy::Mcucb(p) => p.decide(t, cfg),
            Policy::Reactive(p) => &p.placement,
            Policy::Noop(p) => &p.placement,
            Policy::Mixture(p) => {
                for node in 0..cfg.n_nodes() {
                    let u: f64 = p.rng.gen();
                    let rows = &p.support[node];
                    let row = rows
                        .iter()
                        .find(|(acc, _)| u < *acc)
                        .map(|(_, row)| row)
                        .unwrap_or(&rows.last().expect("support is non-empty").1);
                    p.placement.set_row(node, row);
                }
                &p.placement
            }
        }
    }

    /// Consumes slot `t`'s demand; returns the slot accounting.
    pub fn observe(&mut self, t: u64, demand: &SlotDemand, cfg: &ValidConfig) -> SlotOutcome {
        match self {
            Policy::Cphbl(p) => p.observe(demand, cfg),
            Policy::Mcucb(p) => p.observe(demand, cfg),
            Policy::Reactive(p) => p.observe(t, demand, cfg),
            Policy::Noop(_) => SlotOutcome {
                reward: vec![0.0; cfg.n_nodes()],
                cost: vec![0.0; cfg.n_nodes()],
            },
            Policy::Mixture(p) => proactive_outcome(&p.placement, demand, cfg),
        }
    }

    /// Budget-queue backlog, for policies that maintain one.
    pub fn queues(&self) -> Option<&[f64]> {
        match self {
            Policy::Cphbl(p) => Some(&p.queues),
            _ => None,
        }
    }

    pub fn placement(&self) -> &Placement {
        match self {
            Policy::Cphbl(p) => &p.placement,
            Policy::Mcucb(p) => &p.placement,
            Policy::Reactive(p) => &p.placement,
            Policy::Noop(p) => &p.placement,
            Policy::Mixture(p) => &p.placement,
        }
    }
}
