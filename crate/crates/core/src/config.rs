//! System configuration: the full description of one simulated deployment.
//!
//! A configuration is authored as a TOML file (see `docs/config.md` at the
//! repository root) and parsed into [`SystemConfig`]. Nothing downstream
//! accepts a raw `SystemConfig`; callers must run [`SystemConfig::validate`]
//! first, which checks every structural rule, collects *all* violations
//! into one error, and returns an immutable [`ValidConfig`] with derived
//! lookups resolved. Unknown keys anywhere in the file are a hard parse
//! error.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

/// Raw configuration exactly as authored. Field layout mirrors the TOML
/// sections one to one so that serialize/parse round-trips are identity.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    pub schema_version: u32,
    pub system: SystemSection,
    /// One entry per edge node, in node-index order.
    pub node: Vec<NodeSpec>,
    pub demand: DemandSpec,
    pub history: HistorySpec,
    pub control: ControlSpec,
    pub run: RunSpec,
    pub policy: PolicySpec,
    pub seeds: Seeds,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemSection {
    /// Total number of users across all nodes.
    pub num_users: usize,
    /// Size of each file in storage units; index is the file id.
    pub file_sizes: Vec<u32>,
    /// Cost per stored unit per slot.
    pub unit_storage_cost: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NodeSpec {
    /// User ids served by this node. The node lists must partition
    /// `0..num_users`.
    pub users: Vec<usize>,
    /// Cache capacity in storage units.
    pub capacity: u32,
    /// Long-run average storage cost budget per slot.
    pub budget: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DemandSpec {
    pub zipf: SkewSpec,
}

/// Per-user Zipf skew exponents: either explicit per-user values or a range
/// from which one value per user is drawn at model setup.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum SkewSpec {
    Range([f64; 2]),
    Values(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HistorySpec {
    pub counts: HistoryCounts,
}

/// Number of pre-run demand observations available per (node, file) pair.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "snake_case")]
pub enum HistoryCounts {
    Uniform(u64),
    /// One row per node, one entry per file.
    Rows(Vec<Vec<u64>>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ControlSpec {
    /// Reward-versus-backlog tradeoff weight. Larger values favor reward.
    pub v_param: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunSpec {
    /// Number of slots to simulate.
    pub horizon: u64,
    /// Emit one metrics checkpoint every this many slots.
    #[serde(default = "default_stride")]
    pub checkpoint_stride: u64,
}

fn default_stride() -> u64 {
    1000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PolicyKind {
    /// Queue-regulated bandit placement (the main algorithm).
    Cphbl,
    /// Bandit placement that ignores the budget (capacity-only objective).
    Mcucb,
    /// Reactive least-frequently-used cache.
    Lfu,
    /// Reactive least-recently-used cache.
    Lru,
    /// Caches nothing. Reference point for tests.
    Noop,
    /// Samples the precomputed optimal placement mixture each slot.
    /// Requires knowledge of the true demand means; meant for tests.
    OracleMixture,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EstimatorKind {
    /// Confidence-bonus estimate blending history with online counts.
    Hucb1,
    /// Variance-adaptive confidence bonus.
    Ucbt,
    /// Plain empirical mean (used by the epsilon-greedy variant).
    Mean,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PolicySpec {
    pub kind: PolicyKind,
    #[serde(default = "default_estimator")]
    pub estimator: EstimatorKind,
    /// Exploration probability; only valid with `estimator = "mean"`.
    #[serde(default)]
    pub epsilon: f64,
}

fn default_estimator() -> EstimatorKind {
    EstimatorKind::Hucb1
}

/// Seeds of the independent randomness streams. Streams stay independent
/// even if two seeds coincide (see the `rng` module).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Seeds {
    pub demand: u64,
    pub history: u64,
    pub policy: u64,
}

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid configuration:\n  {}", .0.join("\n  "))]
    Invalid(Vec<String>),
    #[error("config io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Result of a successful validation: the config plus non-fatal warnings.
#[derive(Debug, Clone)]
pub struct Validated {
    pub config: ValidConfig,
    pub warnings: Vec<String>,
}

/// A structurally valid, immutable configuration with derived lookups.
#[derive(Debug, Clone)]
pub struct ValidConfig {
    cfg: SystemConfig,
    /// user id -> node id.
    user_node: Vec<usize>,
    /// Resolved history counts, flat node-by-file.
    history: Vec<u64>,
    /// Sum of all file sizes.
    catalog_size: u64,
}

impl SystemConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))
    }

    pub fn load(path: &std::path::Path) -> Result<Self, ConfigError> {
        Self::from_toml_str(&std::fs::read_to_string(path)?)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every structural rule. Returns all violations at once, or the
    /// immutable validated form plus any non-fatal warnings.
    pub fn validate(self) -> Result<Validated, ConfigError> {
        let mut errs = Vec::new();
        let mut warnings = Vec::new();
        let cfg = &self;

        if cfg.schema_version != 1 {
            errs.push(format!("unsupported schema_version {} (expected 1)", cfg.schema_version));
        }
        if cfg.system.num_users == 0 {
            errs.push("num_users must be at least 1".into());
        }
        if cfg.system.file_sizes.is_empty() {
            errs.push("file_sizes must list at least one file".into());
        }
        for (f, &l) in cfg.system.file_sizes.iter().enumerate() {
            if l == 0 {
                errs.push(format!("file_sizes[{f}] must be a positive integer"));
            }
        }
        let alpha = cfg.system.unit_storage_cost;
        if !(alpha.is_finite() && alpha > 0.0) {
            errs.push("unit_storage_cost must be a positive finite number".into());
        }
        if cfg.node.is_empty() {
            errs.push("at least one [[node]] section is required".into());
        }
        let catalog_size: u64 = cfg.system.file_sizes.iter().map(|&l| u64::from(l)).sum();

        let mut user_node = vec![usize::MAX; cfg.system.num_users];
        for (n, node) in cfg.node.iter().enumerate() {
            if node.capacity == 0 {
                errs.push(format!("node {n}: capacity must be a positive integer"));
            }
            if !cfg.system.file_sizes.is_empty() && u64::from(node.capacity) >= catalog_size {
                errs.push(format!("node {n}: capacity must be strictly less than catalog size"));
            }
            if !(node.budget.is_finite() && node.budget > 0.0) {
                errs.push(format!("node {n}: budget must be a positive finite number"));
            } else if alpha.is_finite() && alpha > 0.0 {
                let full_cost = alpha * f64::from(node.capacity);
                if node.budget > full_cost {
                    errs.push(format!(
                        "node {n}: budget must not exceed unit_storage_cost * capacity ({full_cost})"
                    ));
                } else if node.budget == full_cost {
                    warnings.push(format!(
                        "node {n}: budget equals the cost of a full cache; the budget constraint can never bind"
                    ));
                }
                if (node.budget * 1048576.0).fract() != 0.0 {
                    warnings.push(format!(
                        "node {n}: budget {} is not exactly representable in binary; \
                         queue arithmetic will carry rounding at the last bit",
                        node.budget
                    ));
                }
            }
            for &u in &node.users {
                if u >= cfg.system.num_users {
                    errs.push(format!("node {n}: user id {u} is out of range (num_users = {})", cfg.system.num_users));
                } else if user_node[u] != usize::MAX {
                    errs.push(format!("user {u} appears under more than one node: user sets must be disjoint"));
                } else {
                    user_node[u] = n;
                }
            }
        }
        let uncovered: Vec<usize> =
            (0..cfg.system.num_users).filter(|&u| user_node[u] == usize::MAX).collect();
        if !uncovered.is_empty() && cfg.system.num_users > 0 {
            errs.push(format!("user sets must cover every user; missing {uncovered:?}"));
        }

        match &cfg.demand.zipf {
            SkewSpec::Range([lo, hi]) => {
                if !(lo.is_finite() && hi.is_finite() && *lo >= 0.0 && lo <= hi) {
                    errs.push(format!("zipf range [{lo}, {hi}] must satisfy 0 <= lo <= hi"));
                }
            }
            SkewSpec::Values(v) => {
                if v.len() != cfg.system.num_users {
                    errs.push(format!(
                        "zipf values must list one skew per user ({} given, {} users)",
                        v.len(),
                        cfg.system.num_users
                    ));
                }
                for (u, &s) in v.iter().enumerate() {
                    if !(s.is_finite() && s >= 0.0) {
                        errs.push(format!("zipf values[{u}] must be a finite non-negative number"));
                    }
                }
            }
        }

        if let HistoryCounts::Rows(rows) = &cfg.history.counts {
            if rows.len() != cfg.node.len() {
                errs.push(format!(
                    "history rows must have one row per node ({} given, {} nodes)",
                    rows.len(),
                    cfg.node.len()
                ));
            }
            for (n, row) in rows.iter().enumerate() {
                if row.len() != cfg.system.file_sizes.len() {
                    errs.push(format!(
                        "history rows[{n}] must have one entry per file ({} given, {} files)",
                        row.len(),
                        cfg.system.file_sizes.len()
                    ));
                }
            }
        }

        if !(cfg.control.v_param.is_finite() && cfg.control.v_param > 0.0) {
            errs.push("v_param must be a positive finite number".into());
        }
        if cfg.run.horizon == 0 {
            errs.push("horizon must be at least 1".into());
        }
        if cfg.run.checkpoint_stride == 0 {
            errs.push("checkpoint_stride must be at least 1".into());
        }

        let eps = cfg.policy.epsilon;
        if !(eps.is_finite() && (0.0..=1.0).contains(&eps)) {
            errs.push("policy epsilon must lie in [0, 1]".into());
        } else if eps > 0.0 && cfg.policy.estimator != EstimatorKind::Mean {
            errs.push("policy epsilon requires estimator = \"mean\"".into());
        }

        if !errs.is_empty() {
            return Err(ConfigError::Invalid(errs));
        }

        let n_nodes = self.node.len();
        let n_files = self.system.file_sizes.len();
        let history = match &self.history.counts {
            HistoryCounts::Uniform(h) => vec![*h; n_nodes * n_files],
            HistoryCounts::Rows(rows) => rows.iter().flatten().copied().collect(),
        };
        Ok(Validated {
            config: ValidConfig { cfg: self, user_node, history, catalog_size },
            warnings,
        })
    }
}

impl ValidConfig {
    pub fn raw(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn n_nodes(&self) -> usize {
        self.cfg.node.len()
    }

    pub fn n_files(&self) -> usize {
        self.cfg.system.file_sizes.len()
    }

    pub fn n_users(&self) -> usize {
        self.cfg.system.num_users
    }

    pub fn sizes(&self) -> &[u32] {
        &self.cfg.system.file_sizes
    }

    pub fn size(&self, file: usize) -> u32 {
        self.cfg.system.file_sizes[file]
    }

    pub fn catalog_size(&self) -> u64 {
        self.catalog_size
    }

    pub fn alpha(&self) -> f64 {
        self.cfg.system.unit_storage_cost
    }

    pub fn capacity(&self, node: usize) -> u32 {
        self.cfg.node[node].capacity
    }

    pub fn budget(&self, node: usize) -> f64 {
        self.cfg.node[node].budget
    }

    pub fn users(&self, node: usize) -> &[usize] {
        &self.cfg.node[node].users
    }

    /// Number of users served by `node`.
    pub fn k_n(&self, node: usize) -> usize {
        self.cfg.node[node].users.len()
    }

    pub fn node_of_user(&self, user: usize) -> usize {
        self.user_node[user]
    }

    pub fn v_param(&self) -> f64 {
        self.cfg.control.v_param
    }

    pub fn horizon(&self) -> u64 {
        self.cfg.run.horizon
    }

    pub fn stride(&self) -> u64 {
        self.cfg.run.checkpoint_stride
    }

    pub fn policy(&self) -> &PolicySpec {
        &self.cfg.policy
    }

    pub fn seeds(&self) -> Seeds {
        self.cfg.seeds
    }

    pub fn zipf(&self) -> &SkewSpec {
        &self.cfg.demand.zipf
    }

    /// Pre-run observation count for one (node, file) pair.
    pub fn history_count(&self, node: usize, file: usize) -> u64 {
        self.history[node * self.n_files() + file]
    }

    /// Smallest history count over all (node, file) pairs.
    pub fn h_min(&self) -> u64 {
        self.history.iter().copied().min().unwrap_or(0)
    }

    /// Short stable identifier: prefix of the SHA-256 digest of the
    /// canonical TOML serialization.
    pub fn hash(&self) -> String {
        let digest = Sha256::digest(self.cfg.to_toml_string().as_bytes());
        let mut out = String::with_capacity(16);
        for b in &digest[..8] {
            out.push_str(&format!("{b:02x}"));
        }
        out
    }

    /// Clones the raw config for derived-run construction (sweeps).
    pub fn to_raw(&self) -> SystemConfig {
        self.cfg.clone()
    }
}
