//! Ready-made configurations used by tests, benches, and the docs.

use crate::config::*;

/// Desk-scale reference system: 4 edge nodes with 5 users each, a 20-file
/// catalog with sizes cycling through {1, 2, 4, 8} (75 units total),
/// capacity 16 and budget 8 per node, per-user Zipf skews drawn from
/// [0.56, 1.2], 1000 historical observations per (node, file) pair, and a
/// 200k-slot horizon.
pub fn desk_config() -> SystemConfig {
    let nodes = (0..4)
        .map(|n| NodeSpec {
            users: (n * 5..(n + 1) * 5).collect(),
            capacity: 16,
            budget: 8.0,
        })
        .collect();
    SystemConfig {
        schema_version: 1,
        system: SystemSection {
            num_users: 20,
            file_sizes: (0..20).map(|f| 1u32 << (f % 4)).collect(),
            unit_storage_cost: 1.0,
        },
        node: nodes,
        demand: DemandSpec { zipf: SkewSpec::Range([0.56, 1.2]) },
        history: HistorySpec { counts: HistoryCounts::Uniform(1000) },
        control: ControlSpec { v_param: 50.0 },
        run: RunSpec { horizon: 200_000, checkpoint_stride: 1000 },
        policy: PolicySpec {
            kind: PolicyKind::Cphbl,
            estimator: EstimatorKind::Hucb1,
            epsilon: 0.0,
        },
        seeds: Seeds { demand: 1, history: 2, policy: 3 },
    }
}

/// Two-node toy system, handy for fast unit tests: 3 + 2 users, 4 files of
/// sizes 1/2/4/8 (15 units), capacity 6, budget 3.
pub fn tiny_config() -> SystemConfig {
    SystemConfig {
        schema_version: 1,
        system: SystemSection {
            num_users: 5,
            file_sizes: vec![1, 2, 4, 8],
            unit_storage_cost: 1.0,
        },
        node: vec![
            NodeSpec { users: vec![0, 1, 2], capacity: 6, budget: 3.0 },
            NodeSpec { users: vec![3, 4], capacity: 6, budget: 3.0 },
        ],
        demand: DemandSpec { zipf: SkewSpec::Values(vec![1.0; 5]) },
        history: HistorySpec { counts: HistoryCounts::Uniform(0) },
        control: ControlSpec { v_param: 10.0 },
        run: RunSpec { horizon: 1000, checkpoint_stride: 100 },
        policy: PolicySpec {
            kind: PolicyKind::Cphbl,
            estimator: EstimatorKind::Hucb1,
            epsilon: 0.0,
        },
        seeds: Seeds { demand: 11, history: 12, policy: 13 },
    }
}
