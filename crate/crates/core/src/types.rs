//! Shared value types passed between the demand source, policies, and the
//! simulation driver.

/// Binary cache placement: which files each node holds during a slot.
///
/// Stored as a flat row-major node-by-file matrix of booleans.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Placement {
    nodes: usize,
    files: usize,
    bits: Vec<bool>,
}

impl Placement {
    /// All-empty placement (nothing cached anywhere).
    pub fn empty(nodes: usize, files: usize) -> Self {
        Placement { nodes, files, bits: vec![false; nodes * files] }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn files(&self) -> usize {
        self.files
    }

    #[inline]
    pub fn get(&self, node: usize, file: usize) -> bool {
        self.bits[node * self.files + file]
    }

    #[inline]
    pub fn set(&mut self, node: usize, file: usize, cached: bool) {
        self.bits[node * self.files + file] = cached;
    }

    /// Replaces one node's row.
    pub fn set_row(&mut self, node: usize, row: &[bool]) {
        assert_eq!(row.len(), self.files);
        self.bits[node * self.files..(node + 1) * self.files].copy_from_slice(row);
    }

    pub fn row(&self, node: usize) -> &[bool] {
        &self.bits[node * self.files..(node + 1) * self.files]
    }

    /// Total size of the files cached at `node`, given per-file sizes.
    pub fn used_capacity(&self, node: usize, sizes: &[u32]) -> u64 {
        self.row(node)
            .iter()
            .zip(sizes)
            .filter(|(&x, _)| x)
            .map(|(_, &l)| u64::from(l))
            .sum()
    }
}

/// Aggregated demand for one slot: how many users of each node requested
/// each file. Row sums equal the node's user count because every user
/// requests exactly one file per slot.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DemandMatrix {
    nodes: usize,
    files: usize,
    counts: Vec<u32>,
}

impl DemandMatrix {
    pub fn zero(nodes: usize, files: usize) -> Self {
        DemandMatrix { nodes, files, counts: vec![0; nodes * files] }
    }

    pub fn nodes(&self) -> usize {
        self.nodes
    }

    pub fn files(&self) -> usize {
        self.files
    }

    #[inline]
    pub fn get(&self, node: usize, file: usize) -> u32 {
        self.counts[node * self.files + file]
    }

    #[inline]
    pub fn add(&mut self, node: usize, file: usize, count: u32) {
        self.counts[node * self.files + file] += count;
    }

    pub fn row(&self, node: usize) -> &[u32] {
        &self.counts[node * self.files..(node + 1) * self.files]
    }

    pub fn row_sum(&self, node: usize) -> u64 {
        self.row(node).iter().map(|&c| u64::from(c)).sum()
    }
}

/// One user request within a slot, in processing order.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RequestEvent {
    pub node: usize,
    pub file: usize,
}

/// Full demand realization for one slot: the ordered per-user request
/// events plus their aggregation. Proactive policies only consume the
/// matrix; reactive caches replay the events in order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SlotDemand {
    pub matrix: DemandMatrix,
    pub events: Vec<RequestEvent>,
}

/// Per-slot accounting produced by a policy's observe step.
#[derive(Debug, Clone, PartialEq)]
pub struct SlotOutcome {
    /// Cache-hit reward collected at each node (size-weighted hits).
    pub reward: Vec<f64>,
    /// Storage cost incurred at each node.
    pub cost: Vec<f64>,
}

impl SlotOutcome {
    pub fn total_reward(&self) -> f64 {
        self.reward.iter().sum()
    }

    pub fn total_cost(&self) -> f64 {
        self.cost.iter().sum()
    }
}
