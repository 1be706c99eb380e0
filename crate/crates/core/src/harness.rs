//! Simulation harness: the slot loop, metric checkpoints, theoretical
//! reference curves, parameter sweeps, and CSV emission.
//!
//! # Slot protocol
//! One slot runs in a fixed order: the policy decides a placement from
//! information through the previous slot, the demand for the slot is
//! drawn (or replayed from a trace), the policy observes it, and the
//! statistics move forward. Decisions therefore never see the demand
//! they are scored against.
//!
//! # Determinism
//! Everything downstream of (config, seeds) is deterministic, and the
//! CSV writers emit no wall-clock or host information, so a rerun of the
//! same config produces byte-identical files.

use std::io::{self, BufRead, Write};
use std::path::PathBuf;

use crate::config::{ConfigError, HistoryCounts, PolicyKind, Seeds, SystemConfig, ValidConfig};
use crate::demand::{
    generate_history, DemandError, DemandSource, PopularityModel, TraceSource, TraceWriter,
};
use crate::oracle::{r_star, OracleError};
use crate::policies::{Policy, PolicyError};
use crate::rng::{stream, StreamId};
use crate::types::{DemandMatrix, SlotDemand};

/// First column of every emitted CSV row; bump on any schema change.
pub const CSV_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum SimError {
    #[error(transparent)]
    Demand(#[from] DemandError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Policy(#[from] PolicyError),
    #[error("slot {slot}: node {node} placement uses {used} units, capacity {capacity}")]
    CapacityViolation { slot: u64, node: usize, used: u64, capacity: u32 },
    #[error("slot {slot}: node {node} queue went to {got}, recursion gives {want}")]
    QueueViolation { slot: u64, node: usize, got: f64, want: f64 },
    #[error("demand trace holds {have} slots but the run needs {need}")]
    TraceTooShort { have: u64, need: u64 },
    #[error("i/o: {0}")]
    Io(#[from] io::Error),
}

/// Running-average metrics after `slot` completed slots.
#[derive(Debug, Clone, PartialEq)]
pub struct Checkpoint {
    /// Number of completed slots (1-based).
    pub slot: u64,
    /// Realized reward per slot, averaged over all completed slots.
    pub total_reward_avg: f64,
    /// Benchmark value minus the expected per-slot reward of the decided
    /// placements (expectation over demand given the true means).
    pub regret_expected: f64,
    /// Benchmark value minus the realized per-slot reward average.
    pub regret_realized: f64,
    /// Per-node running average storage cost.
    pub cost_avg: Vec<f64>,
    /// Per-node budget-queue backlog after the slot (zero for policies
    /// without a queue).
    pub queue: Vec<f64>,
    /// Per-node running average of the backlog each decision saw.
    pub queue_avg: Vec<f64>,
}

/// Complete result of one simulation run.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub config_hash: String,
    pub seeds: Seeds,
    /// Optimal time-average reward of the stationary benchmark.
    pub r_star: f64,
    pub checkpoints: Vec<Checkpoint>,
}

impl RunRecord {
    pub fn terminal(&self) -> Option<&Checkpoint> {
        self.checkpoints.last()
    }
}

#[derive(Debug, Default)]
pub struct RunOptions {
    /// Write the demand actually used to this CSV path.
    pub export_trace: Option<PathBuf>,
    /// Replay demand from this CSV path instead of sampling.
    pub import_trace: Option<PathBuf>,
}

/// Runs one simulation to the configured horizon.
pub fn run_simulation(cfg: &ValidConfig, opts: &RunOptions) -> Result<RunRecord, SimError> {
    let model = PopularityModel::from_config(cfg)?;
    let oracle = r_star(cfg, &model)?;
    let history = generate_history(&model, cfg, &mut stream(cfg.seeds().history, StreamId::History));
    let mut policy = Policy::new(cfg, &history, Some(&oracle), stream(cfg.seeds().policy, StreamId::Policy))?;

    let horizon = cfg.horizon();
    let mut source = match &opts.import_trace {
        Some(path) => {
            let reader = io::BufReader::new(std::fs::File::open(path)?);
            let trace = TraceSource::load(reader, cfg)?;
            if (trace.len() as u64) < horizon {
                return Err(SimError::TraceTooShort { have: trace.len() as u64, need: horizon });
            }
            DemandSource::Trace(trace)
        }
        None => DemandSource::Generated {
            model: &model,
            rng: stream(cfg.seeds().demand, StreamId::SlotDemand),
        },
    };
    let mut trace_out = match &opts.export_trace {
        Some(path) => Some(TraceWriter::new(io::BufWriter::new(std::fs::File::create(path)?))?),
        None => None,
    };

    let (n_nodes, n_files) = (cfg.n_nodes(), cfg.n_files());
    let mut demand = SlotDemand { matrix: DemandMatrix::zero(n_nodes, n_files), events: Vec::new() };
    let mut realized_sum = 0.0f64;
    let mut expected_sum = 0.0f64;
    let mut cost_sum = vec![0.0f64; n_nodes];
    let mut queue_sum = vec![0.0f64; n_nodes];
    let mut prev_queues = vec![0.0f64; n_nodes];
    let mut checkpoints = Vec::new();

    for t in 0..horizon {
        let placement = policy.decide(t, cfg);
        for node in 0..n_nodes {
            let used = placement.used_capacity(node, cfg.sizes());
            if used > u64::from(cfg.capacity(node)) {
                return Err(SimError::CapacityViolation {
                    slot: t,
                    node,
                    used,
                    capacity: cfg.capacity(node),
                });
            }
            let means = model.true_means_row(node);
            for file in 0..n_files {
                if placement.get(node, file) {
                    expected_sum += f64::from(cfg.size(file)) * means[file];
                }
            }
        }
        // Backlog as seen by this slot's decision (decide mutates no
        // queue state, so this still reads the decide-time values).
        if let Some(queues) = policy.queues() {
            for node in 0..n_nodes {
                queue_sum[node] += queues[node];
            }
        }

        source.next_slot_into(&mut demand);
        if let Some(w) = trace_out.as_mut() {
            w.write_slot(t, &demand.matrix)?;
        }

        let outcome = policy.observe(t, &demand, cfg);
        realized_sum += outcome.total_reward();
        for node in 0..n_nodes {
            cost_sum[node] += outcome.cost[node];
        }
        if let Some(queues) = policy.queues() {
            for node in 0..n_nodes {
                let want = crate::control::update_queue(
                    prev_queues[node],
                    cfg.budget(node),
                    outcome.cost[node],
                );
                let got = queues[node];
                if got != want || got < 0.0 {
                    return Err(SimError::QueueViolation { slot: t, node, got, want });
                }
                prev_queues[node] = got;
            }
        }

        let completed = t + 1;
        if completed % cfg.stride() == 0 || completed == horizon {
            let inv = 1.0 / completed as f64;
            checkpoints.push(Checkpoint {
                slot: completed,
                total_reward_avg: realized_sum * inv,
                regret_expected: oracle.total - expected_sum * inv,
                regret_realized: oracle.total - realized_sum * inv,
                cost_avg: cost_sum.iter().map(|c| c * inv).collect(),
                queue: policy.queues().map(<[f64]>::to_vec).unwrap_or_else(|| vec![0.0; n_nodes]),
                queue_avg: queue_sum.iter().map(|q| q * inv).collect(),
            });
        }
    }
    if let Some(w) = trace_out {
        w.finish()?;
    }

    Ok(RunRecord {
        config_hash: cfg.hash(),
        seeds: cfg.seeds(),
        r_star: oracle.total,
        checkpoints,
    })
}

/// Constants of the theoretical performance curves, derived from the
/// system parameters only.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundParams {
    /// Half the sum over nodes of squared budget plus squared storage
    /// cost ceiling.
    pub b_const: f64,
    /// Coefficient of the exploration term.
    pub gamma: f64,
    /// Sum over nodes of user count times capacity.
    pub sum_km: f64,
}

pub fn bound_params(cfg: &ValidConfig) -> BoundParams {
    let total_size: f64 = cfg.catalog_size() as f64;
    let mut b_const = 0.0;
    let mut gamma = 0.0;
    let mut sum_km = 0.0;
    for node in 0..cfg.n_nodes() {
        let m = f64::from(cfg.capacity(node));
        let b = cfg.budget(node);
        let k = cfg.k_n(node) as f64;
        b_const += (b * b + cfg.alpha() * cfg.alpha() * m * m) / 2.0;
        gamma += k * (6.0 * m * total_size).sqrt();
        sum_km += k * m;
    }
    BoundParams { b_const, gamma: 2.0 * gamma, sum_km }
}

/// Regret guarantee after `t` slots with tradeoff weight `v` and at least
/// `h_min` historical observations per pair. Requires `t >= 1`.
pub fn bound_at(p: &BoundParams, t: u64, v: f64, h_min: u64) -> f64 {
    assert!(t >= 1, "the bound is defined from the first completed slot");
    let tf = t as f64;
    p.b_const / v + 4.0 * p.sum_km / tf + p.gamma * (tf.ln() / (tf + h_min as f64)).sqrt()
}

/// Numerator of the backlog guarantee: the queue sum per slot is bounded
/// by this quantity divided by the slack of the budget, so backlog grows
/// linearly in `v`.
pub fn queue_bound_numerator(p: &BoundParams, v: f64) -> f64 {
    p.b_const + v * 2.0 * p.sum_km
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepAxis {
    V,
    Horizon,
    HMin,
    Budget,
    Policy,
}

impl SweepAxis {
    pub fn parse(s: &str) -> Option<Self> {
        Some(match s {
            "v" => SweepAxis::V,
            "horizon" => SweepAxis::Horizon,
            "h-min" | "h_min" => SweepAxis::HMin,
            "budget" => SweepAxis::Budget,
            "policy" => SweepAxis::Policy,
            _ => return None,
        })
    }

    pub fn label(&self) -> &'static str {
        match self {
            SweepAxis::V => "v",
            SweepAxis::Horizon => "horizon",
            SweepAxis::HMin => "h_min",
            SweepAxis::Budget => "budget",
            SweepAxis::Policy => "policy",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum SweepError {
    #[error("axis {axis}: bad value {value:?}: {reason}")]
    BadValue { axis: &'static str, value: String, reason: String },
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

/// Returns a copy of `base` with one swept parameter replaced.
pub fn apply_axis_value(
    base: &SystemConfig,
    axis: SweepAxis,
    value: &str,
) -> Result<SystemConfig, SweepError> {
    let bad = |reason: &str| SweepError::BadValue {
        axis: axis.label(),
        value: value.to_string(),
        reason: reason.to_string(),
    };
    let mut cfg = base.clone();
    match axis {
        SweepAxis::V => {
            let v: f64 = value.parse().map_err(|_| bad("expected a number"))?;
            if !(v > 0.0) {
                return Err(bad("must be positive"));
            }
            cfg.control.v_param = v;
        }
        SweepAxis::Horizon => {
            let t: u64 = value.parse().map_err(|_| bad("expected a non-negative integer"))?;
            if t == 0 {
                return Err(bad("must be at least 1"));
            }
            cfg.run.horizon = t;
        }
        SweepAxis::HMin => {
            let h: u64 = value.parse().map_err(|_| bad("expected a non-negative integer"))?;
            cfg.history.counts = HistoryCounts::Uniform(h);
        }
        SweepAxis::Budget => {
            let b: f64 = value.parse().map_err(|_| bad("expected a number"))?;
            if !(b > 0.0) {
                return Err(bad("must be positive"));
            }
            for node in &mut cfg.node {
                node.budget = b;
            }
        }
        SweepAxis::Policy => {
            cfg.policy.kind = match value {
                "cphbl" => PolicyKind::Cphbl,
                "mcucb" => PolicyKind::Mcucb,
                "lfu" => PolicyKind::Lfu,
                "lru" => PolicyKind::Lru,
                "noop" => PolicyKind::Noop,
                "oracle-mixture" => PolicyKind::OracleMixture,
                _ => return Err(bad("expected one of cphbl, mcucb, lfu, lru, noop, oracle-mixture")),
            };
        }
    }
    Ok(cfg)
}

/// One completed run inside a sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub axis: &'static str,
    pub value: String,
    pub seed_index: u64,
    pub seeds: Seeds,
    pub config_hash: String,
    pub r_star: f64,
    pub terminal: Checkpoint,
    pub b_const: f64,
    pub gamma: f64,
    pub bound_terminal: f64,
}

/// Runs the full grid: every axis value crossed with `n_seeds` seed
/// offsets. Seed offset `i` shifts all three stream seeds by `i`, so
/// runs with the same offset see identical demand randomness across axis
/// values (paired comparisons). Rows come out in (value, seed) order.
pub fn sweep(
    base: &SystemConfig,
    axis: SweepAxis,
    values: &[String],
    n_seeds: u64,
) -> Result<Vec<SweepRow>, SweepError> {
    let mut rows = Vec::with_capacity(values.len() * n_seeds as usize);
    for value in values {
        let swept = apply_axis_value(base, axis, value)?;
        for i in 0..n_seeds {
            let mut cfg = swept.clone();
            cfg.seeds.demand = base.seeds.demand + i;
            cfg.seeds.history = base.seeds.history + i;
            cfg.seeds.policy = base.seeds.policy + i;
            let valid = cfg.validate()?.config;
            let record = run_simulation(&valid, &RunOptions::default())?;
            let params = bound_params(&valid);
            let terminal = record
                .terminal()
                .expect("swept horizons are at least 1 slot")
                .clone();
            rows.push(SweepRow {
                axis: axis.label(),
                value: value.clone(),
                seed_index: i,
                seeds: valid.seeds(),
                config_hash: record.config_hash.clone(),
                r_star: record.r_star,
                bound_terminal: bound_at(&params, terminal.slot, valid.v_param(), valid.h_min()),
                b_const: params.b_const,
                gamma: params.gamma,
                terminal,
            });
        }
    }
    Ok(rows)
}

/// Per-checkpoint time series of one run.
///
/// Columns: `schema_version, slot, total_reward_avg, regret_expected,
/// regret_realized, cost_avg_node_<i>.., queue_node_<i>..,
/// queue_avg_node_<i>..` with nodes numbered from 1.
pub fn write_series_csv<W: Write>(
    w: &mut W,
    n_nodes: usize,
    record: &RunRecord,
) -> io::Result<()> {
    write!(w, "schema_version,slot,total_reward_avg,regret_expected,regret_realized")?;
    for n in 1..=n_nodes {
        write!(w, ",cost_avg_node_{n}")?;
    }
    for n in 1..=n_nodes {
        write!(w, ",queue_node_{n}")?;
    }
    for n in 1..=n_nodes {
        write!(w, ",queue_avg_node_{n}")?;
    }
    writeln!(w)?;
    for cp in &record.checkpoints {
        write!(
            w,
            "{CSV_SCHEMA_VERSION},{},{},{},{}",
            cp.slot, cp.total_reward_avg, cp.regret_expected, cp.regret_realized
        )?;
        for c in &cp.cost_avg {
            write!(w, ",{c}")?;
        }
        for q in &cp.queue {
            write!(w, ",{q}")?;
        }
        for q in &cp.queue_avg {
            write!(w, ",{q}")?;
        }
        writeln!(w)?;
    }
    Ok(())
}

/// Terminal metrics of every run in a sweep, one row per run.
pub fn write_summary_csv<W: Write>(w: &mut W, n_nodes: usize, rows: &[SweepRow]) -> io::Result<()> {
    write!(
        w,
        "schema_version,axis,value,seed_index,seed_demand,seed_history,seed_policy,\
         config_hash,r_star,slot,total_reward_avg,regret_expected,regret_realized"
    )?;
    for n in 1..=n_nodes {
        write!(w, ",cost_avg_node_{n}")?;
    }
    for n in 1..=n_nodes {
        write!(w, ",queue_node_{n}")?;
    }
    for n in 1..=n_nodes {
        write!(w, ",queue_avg_node_{n}")?;
    }
    writeln!(w, ",b_const,gamma,bound_terminal")?;
    for row in rows {
        let t = &row.terminal;
        write!(
            w,
            "{CSV_SCHEMA_VERSION},{},{},{},{},{},{},{},{},{},{},{},{}",
            row.axis,
            row.value,
            row.seed_index,
            row.seeds.demand,
            row.seeds.history,
            row.seeds.policy,
            row.config_hash,
            row.r_star,
            t.slot,
            t.total_reward_avg,
            t.regret_expected,
            t.regret_realized
        )?;
        for c in &t.cost_avg {
            write!(w, ",{c}")?;
        }
        for q in &t.queue {
            write!(w, ",{q}")?;
        }
        for q in &t.queue_avg {
            write!(w, ",{q}")?;
        }
        writeln!(w, ",{},{},{}", row.b_const, row.gamma, row.bound_terminal)?;
    }
    Ok(())
}

/// Reads the `slot` and `regret_expected` columns back from a series CSV
/// (sweep plots and tests).
pub fn read_series_regret<R: BufRead>(reader: R) -> Result<Vec<(u64, f64)>, DemandError> {
    let mut out = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if lineno == 0 {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        let parse_err = |msg: String| DemandError::Format { line: lineno + 1, msg };
        if fields.len() < 4 {
            return Err(parse_err("expected at least 4 columns".into()));
        }
        let slot = fields[1].parse().map_err(|e| parse_err(format!("bad slot: {e}")))?;
        let regret = fields[3].parse().map_err(|e| parse_err(format!("bad regret: {e}")))?;
        out.push((slot, regret));
    }
    Ok(out)
}
