//! Demand generation.
//!
//! # Model
//! Every user requests exactly one file per slot, drawn from that user's
//! Zipf popularity distribution over the catalog (rank = file index, so
//! file 0 is the most popular for every user; users differ only in skew).
//! The per-(node, file) demand `D[n][f]` is the number of users of node
//! `n` who requested `f`, so each node's row always sums to its user
//! count.
//!
//! # Determinism
//! All draws come from named ChaCha8 streams (see the `rng` module). Slot
//! sampling iterates users in ascending id order, one uniform draw per
//! user, so a trace is fully determined by (config, demand seed). History
//! draws come from a separate stream: changing the history seed never
//! perturbs the demand trace.

use std::io::{BufRead, Write};

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::config::{SkewSpec, ValidConfig};
use crate::rng::{stream, StreamId};
use crate::types::{DemandMatrix, RequestEvent, SlotDemand};

#[derive(Debug, thiserror::Error)]
pub enum DemandError {
    #[error("zipf pmf requires at least one file")]
    EmptyCatalog,
    #[error("zipf skew must be a finite non-negative number (got {0})")]
    BadSkew(f64),
    #[error("trace io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("trace format error at line {line}: {msg}")]
    Format { line: usize, msg: String },
    #[error("trace does not match the configuration: {0}")]
    Mismatch(String),
}

/// Zipf probability mass function over `n_files` ranks:
/// `p[f]` proportional to `(f + 1)^-skew`, normalized to sum to 1.
pub fn zipf_pmf(skew: f64, n_files: usize) -> Result<Vec<f64>, DemandError> {
    if n_files == 0 {
        return Err(DemandError::EmptyCatalog);
    }
    if !(skew.is_finite() && skew >= 0.0) {
        return Err(DemandError::BadSkew(skew));
    }
    let mut pmf: Vec<f64> = (1..=n_files).map(|r| (r as f64).powf(-skew)).collect();
    let total: f64 = pmf.iter().sum();
    for p in &mut pmf {
        *p /= total;
    }
    Ok(pmf)
}

/// Resolved popularity structure: per-user pmfs plus the derived per-(node,
/// file) true mean demands.
#[derive(Debug, Clone)]
pub struct PopularityModel {
    n_nodes: usize,
    n_files: usize,
    /// user id -> node id.
    user_node: Vec<usize>,
    /// Per-user skew actually in effect.
    skews: Vec<f64>,
    /// Per-user pmf, row-major user-by-file.
    pmf: Vec<f64>,
    /// Per-user cumulative pmf for inverse-transform sampling.
    cdf: Vec<f64>,
    /// True mean demand per (node, file), row-major.
    means: Vec<f64>,
}

impl PopularityModel {
    /// Builds the model. When the config gives a skew range, one skew per
    /// user is drawn uniformly from it on the model-setup stream of the
    /// demand seed (ascending user order, one draw per user).
    pub fn from_config(cfg: &ValidConfig) -> Result<Self, DemandError> {
        let skews: Vec<f64> = match cfg.zipf() {
            SkewSpec::Values(v) => v.clone(),
            SkewSpec::Range([lo, hi]) => {
                let mut rng = stream(cfg.seeds().demand, StreamId::ModelSetup);
                (0..cfg.n_users()).map(|_| rng.gen_range(*lo..=*hi)).collect()
            }
        };
        Self::from_parts(cfg, skews)
    }

    fn from_parts(cfg: &ValidConfig, skews: Vec<f64>) -> Result<Self, DemandError> {
        let (n_nodes, n_files, n_users) = (cfg.n_nodes(), cfg.n_files(), cfg.n_users());
        let mut pmf = Vec::with_capacity(n_users * n_files);
        let mut cdf = Vec::with_capacity(n_users * n_files);
        let mut means = vec![0.0; n_nodes * n_files];
        let mut user_node = Vec::with_capacity(n_users);
        for user in 0..n_users {
            let node = cfg.node_of_user(user);
            user_node.push(node);
            let row = zipf_pmf(skews[user], n_files)?;
            let mut acc = 0.0;
            for (f, &p) in row.iter().enumerate() {
                debug_assert!(p > 0.0);
                means[node * n_files + f] += p;
                acc += p;
                cdf.push(acc);
            }
            pmf.extend_from_slice(&row);
        }
        Ok(PopularityModel { n_nodes, n_files, user_node, skews, pmf, cdf, means })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn n_files(&self) -> usize {
        self.n_files
    }

    pub fn n_users(&self) -> usize {
        self.user_node.len()
    }

    pub fn skews(&self) -> &[f64] {
        &self.skews
    }

    pub fn user_pmf(&self, user: usize) -> &[f64] {
        &self.pmf[user * self.n_files..(user + 1) * self.n_files]
    }

    /// Expected demand for (node, file): the sum of that node's user
    /// probabilities for the file.
    pub fn true_mean(&self, node: usize, file: usize) -> f64 {
        self.means[node * self.n_files + file]
    }

    pub fn true_means_row(&self, node: usize) -> &[f64] {
        &self.means[node * self.n_files..(node + 1) * self.n_files]
    }

    /// One categorical draw for `user`.
    fn draw_file(&self, user: usize, rng: &mut ChaCha8Rng) -> usize {
        let cdf = &self.cdf[user * self.n_files..(user + 1) * self.n_files];
        let u: f64 = rng.gen();
        // partition_point returns the count of entries <= u, i.e. the first
        // rank whose cumulative mass exceeds u. Guard against fp round-up
        // of the final cumulative sum.
        cdf.partition_point(|&c| c <= u).min(self.n_files - 1)
    }

    /// Samples one slot into `out`, reusing its buffers.
    pub fn sample_slot_into(&self, rng: &mut ChaCha8Rng, out: &mut SlotDemand) {
        out.matrix = DemandMatrix::zero(self.n_nodes, self.n_files);
        out.events.clear();
        for user in 0..self.n_users() {
            let node = self.user_node[user];
            let file = self.draw_file(user, rng);
            out.matrix.add(node, file, 1);
            out.events.push(RequestEvent { node, file });
        }
    }

    /// Samples one slot (allocating form).
    pub fn sample_slot(&self, rng: &mut ChaCha8Rng) -> SlotDemand {
        let mut out = SlotDemand {
            matrix: DemandMatrix::zero(self.n_nodes, self.n_files),
            events: Vec::with_capacity(self.n_users()),
        };
        self.sample_slot_into(rng, &mut out);
        out
    }

    /// Samples one slot and returns only the aggregated counts.
    pub fn sample_slot_demands(&self, rng: &mut ChaCha8Rng) -> DemandMatrix {
        self.sample_slot(rng).matrix
    }
}

/// Pre-run observations per (node, file): how many virtual slots were
/// observed and the sum / sum of squares of the demand counts seen.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HistorySet {
    n_nodes: usize,
    n_files: usize,
    count: Vec<u64>,
    sum: Vec<u64>,
    sum_sq: Vec<u64>,
}

impl HistorySet {
    pub fn empty(n_nodes: usize, n_files: usize) -> Self {
        HistorySet {
            n_nodes,
            n_files,
            count: vec![0; n_nodes * n_files],
            sum: vec![0; n_nodes * n_files],
            sum_sq: vec![0; n_nodes * n_files],
        }
    }

    #[inline]
    fn idx(&self, node: usize, file: usize) -> usize {
        node * self.n_files + file
    }

    pub fn count(&self, node: usize, file: usize) -> u64 {
        self.count[self.idx(node, file)]
    }

    pub fn sum(&self, node: usize, file: usize) -> u64 {
        self.sum[self.idx(node, file)]
    }

    pub fn sum_sq(&self, node: usize, file: usize) -> u64 {
        self.sum_sq[self.idx(node, file)]
    }

    /// Directly sets one cell (test construction).
    pub fn set(&mut self, node: usize, file: usize, count: u64, sum: u64, sum_sq: u64) {
        let i = self.idx(node, file);
        self.count[i] = count;
        self.sum[i] = sum;
        self.sum_sq[i] = sum_sq;
    }
}

/// Draws the configured number of historical observations for every
/// (node, file) pair. Each observation replays one virtual slot for that
/// node's users through the same categorical mechanism as live sampling
/// and records how many requested the file in question.
///
/// Draw order is (node asc, file asc, observation asc, user asc), so the
/// result is a pure function of (config, model, history seed).
pub fn generate_history(
    model: &PopularityModel,
    cfg: &ValidConfig,
    rng: &mut ChaCha8Rng,
) -> HistorySet {
    let mut set = HistorySet::empty(model.n_nodes(), model.n_files());
    for node in 0..model.n_nodes() {
        for file in 0..model.n_files() {
            let h = cfg.history_count(node, file);
            let (mut sum, mut sum_sq) = (0u64, 0u64);
            for _ in 0..h {
                let mut d = 0u64;
                for &user in cfg.users(node) {
                    if model.draw_file(user, rng) == file {
                        d += 1;
                    }
                }
                sum += d;
                sum_sq += d * d;
            }
            set.set(node, file, h, sum, sum_sq);
        }
    }
    set
}

/// Anything that can produce the next slot's demand.
pub enum DemandSource<'a> {
    Generated { model: &'a PopularityModel, rng: ChaCha8Rng },
    Trace(TraceSource),
}

impl DemandSource<'_> {
    pub fn next_slot_into(&mut self, out: &mut SlotDemand) {
        match self {
            DemandSource::Generated { model, rng } => model.sample_slot_into(rng, out),
            DemandSource::Trace(t) => t.next_slot_into(out),
        }
    }
}

/// Streaming writer for the demand-trace CSV (`slot,node,file,count`, one
/// row per nonzero count).
pub struct TraceWriter<W: Write> {
    w: W,
}

impl<W: Write> TraceWriter<W> {
    pub fn new(mut w: W) -> Result<Self, DemandError> {
        writeln!(w, "slot,node,file,count")?;
        Ok(TraceWriter { w })
    }

    pub fn write_slot(&mut self, slot: u64, matrix: &DemandMatrix) -> Result<(), DemandError> {
        for node in 0..matrix.nodes() {
            for (file, &c) in matrix.row(node).iter().enumerate() {
                if c > 0 {
                    writeln!(self.w, "{slot},{node},{file},{c}")?;
                }
            }
        }
        Ok(())
    }

    pub fn finish(mut self) -> Result<(), DemandError> {
        self.w.flush()?;
        Ok(())
    }
}

/// Fully loaded demand trace that replaces the generator.
///
/// Replay order of the per-user request events is canonical: ascending
/// (node, file) with each count expanded in place. That order matters only
/// to the reactive caches; aggregate counts are identical to the original
/// trace.
pub struct TraceSource {
    slots: Vec<DemandMatrix>,
    events: Vec<Vec<RequestEvent>>,
    next: usize,
}

impl TraceSource {
    /// Parses and cross-checks a trace against the config: indices must be
    /// in range and every node's per-slot total must equal its user count.
    pub fn load<R: BufRead>(reader: R, cfg: &ValidConfig) -> Result<Self, DemandError> {
        let (n_nodes, n_files) = (cfg.n_nodes(), cfg.n_files());
        let mut slots: Vec<DemandMatrix> = Vec::new();
        for (lineno, line) in reader.lines().enumerate() {
            let line = line?;
            let line = line.trim();
            if lineno == 0 {
                if line != "slot,node,file,count" {
                    return Err(DemandError::Format {
                        line: 1,
                        msg: format!("expected header slot,node,file,count; got {line:?}"),
                    });
                }
                continue;
            }
            if line.is_empty() {
                continue;
            }
            let mut parts = line.split(',');
            let mut field = |name: &str| -> Result<u64, DemandError> {
                parts
                    .next()
                    .ok_or_else(|| DemandError::Format {
                        line: lineno + 1,
                        msg: format!("missing field {name}"),
                    })?
                    .parse::<u64>()
                    .map_err(|e| DemandError::Format {
                        line: lineno + 1,
                        msg: format!("bad {name}: {e}"),
                    })
            };
            let slot = field("slot")? as usize;
            let node = field("node")? as usize;
            let file = field("file")? as usize;
            let count = field("count")? as u32;
            if node >= n_nodes || file >= n_files {
                return Err(DemandError::Format {
                    line: lineno + 1,
                    msg: format!("node {node} / file {file} out of range"),
                });
            }
            while slots.len() <= slot {
                slots.push(DemandMatrix::zero(n_nodes, n_files));
            }
            slots[slot].add(node, file, count);
        }
        for (slot, m) in slots.iter().enumerate() {
            for node in 0..n_nodes {
                let got = m.row_sum(node);
                let want = cfg.k_n(node) as u64;
                if got != want {
                    return Err(DemandError::Mismatch(format!(
                        "slot {slot} node {node}: total demand {got} != user count {want}"
                    )));
                }
            }
        }
        let events = slots
            .iter()
            .map(|m| {
                let mut ev = Vec::new();
                for node in 0..n_nodes {
                    for (file, &c) in m.row(node).iter().enumerate() {
                        for _ in 0..c {
                            ev.push(RequestEvent { node, file });
                        }
                    }
                }
                ev
            })
            .collect();
        Ok(TraceSource { slots, events, next: 0 })
    }

    pub fn len(&self) -> usize {
        self.slots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.slots.is_empty()
    }

    fn next_slot_into(&mut self, out: &mut SlotDemand) {
        assert!(self.next < self.slots.len(), "trace exhausted");
        out.matrix = self.slots[self.next].clone();
        out.events.clear();
        out.events.extend_from_slice(&self.events[self.next]);
        self.next += 1;
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::presets;
    use crate::rng::{stream, StreamId};

    fn valid(cfg: crate::config::SystemConfig) -> ValidConfig {
        cfg.validate().unwrap().config
    }

    #[test]
    fn zipf_uniform_when_skew_zero() {
        let pmf = zipf_pmf(0.0, 5).unwrap();
        for &p in &pmf {
            assert!((p - 0.2).abs() < 1e-15);
        }
    }

    #[test]
    fn zipf_exact_rationals_at_skew_one() {
        let pmf = zipf_pmf(1.0, 4).unwrap();
        let expected = [12.0 / 25.0, 6.0 / 25.0, 4.0 / 25.0, 3.0 / 25.0];
        for (p, e) in pmf.iter().zip(expected) {
            assert!((p - e).abs() < 1e-12, "{p} vs {e}");
        }
    }

    // Reference values computed with 40-digit arbitrary-precision
    // arithmetic, frozen here.
    #[test]
    fn zipf_high_precision_reference() {
        let pmf = zipf_pmf(0.56, 20).unwrap();
        let expected = [
            0.14585055117182471,
            0.09893074444016276,
            0.07883519968891806,
            0.06710493801257225,
            0.05922224576577972,
            0.05347408652659380,
            0.04905159934332505,
            0.04551742465048164,
            0.04261203444250125,
            0.04017057744351317,
            0.03808273853211703,
            0.03627158859414419,
            0.03468165369446153,
            0.03327180596869207,
            0.03201083255058237,
            0.03087456762755837,
            0.02984397576840958,
            0.02890383516302322,
            0.02804181101736834,
            0.02724778959797090,
        ];
        for (f, (&p, &e)) in pmf.iter().zip(expected.iter()).enumerate() {
            assert!((p - e).abs() < 1e-12, "rank {f}: {p} vs {e}");
        }
        let total: f64 = pmf.iter().sum();
        assert!((total - 1.0).abs() < 1e-12);
    }

    #[test]
    fn zipf_rejects_bad_input() {
        assert!(zipf_pmf(1.0, 0).is_err());
        assert!(zipf_pmf(-0.5, 4).is_err());
        assert!(zipf_pmf(f64::NAN, 4).is_err());
    }

    #[test]
    fn model_means_sum_to_user_counts() {
        let cfg = valid(presets::desk_config());
        let model = PopularityModel::from_config(&cfg).unwrap();
        for node in 0..cfg.n_nodes() {
            let total: f64 = model.true_means_row(node).iter().sum();
            assert!((total - cfg.k_n(node) as f64).abs() < 1e-9, "node {node}: {total}");
        }
        for user in 0..cfg.n_users() {
            let s = model.skews()[user];
            assert!((0.56..=1.2).contains(&s), "skew {s} outside configured range");
        }
    }

    #[test]
    fn one_request_per_user_per_slot() {
        let cfg = valid(presets::desk_config());
        let model = PopularityModel::from_config(&cfg).unwrap();
        let mut rng = stream(cfg.seeds().demand, StreamId::SlotDemand);
        for _ in 0..100 {
            let slot = model.sample_slot(&mut rng);
            let total: u64 = (0..cfg.n_nodes()).map(|n| slot.matrix.row_sum(n)).sum();
            assert_eq!(total, cfg.n_users() as u64);
            assert_eq!(slot.events.len(), cfg.n_users());
            for n in 0..cfg.n_nodes() {
                assert_eq!(slot.matrix.row_sum(n), cfg.k_n(n) as u64);
            }
        }
    }

    // Long-run empirical means track the model means within 3 standard
    // errors on a fixed seed (20 users on one node, uniform popularity).
    #[test]
    fn empirical_means_match_model() {
        let mut raw = presets::desk_config();
        raw.node = vec![crate::config::NodeSpec {
            users: (0..20).collect(),
            capacity: 16,
            budget: 8.0,
        }];
        raw.demand.zipf = SkewSpec::Values(vec![0.0; 20]);
        let cfg = valid(raw);
        let model = PopularityModel::from_config(&cfg).unwrap();
        let mut rng = stream(424242, StreamId::SlotDemand);
        let slots = 100_000u64;
        let mut sums = vec![0u64; 20];
        let mut slot = SlotDemand {
            matrix: DemandMatrix::zero(1, 20),
            events: Vec::new(),
        };
        for _ in 0..slots {
            model.sample_slot_into(&mut rng, &mut slot);
            for (f, &c) in slot.matrix.row(0).iter().enumerate() {
                sums[f] += u64::from(c);
            }
        }
        let p = 1.0 / 20.0;
        let var = 20.0 * p * (1.0 - p);
        let se = (var / slots as f64).sqrt();
        for (f, &s) in sums.iter().enumerate() {
            let mean = s as f64 / slots as f64;
            assert!((mean - 1.0).abs() <= 3.0 * se, "file {f}: mean {mean}, se {se}");
        }
    }

    // Moving a user between nodes must not change which files anyone
    // draws; only the aggregation differs.
    #[test]
    fn partition_does_not_affect_file_draws() {
        let base = valid(presets::desk_config());
        let mut moved_raw = presets::desk_config();
        let u = moved_raw.node[0].users.pop().unwrap();
        moved_raw.node[3].users.push(u);
        let moved = valid(moved_raw);

        let model_a = PopularityModel::from_config(&base).unwrap();
        let model_b = PopularityModel::from_config(&moved).unwrap();
        assert_eq!(model_a.skews(), model_b.skews());

        let mut rng_a = stream(base.seeds().demand, StreamId::SlotDemand);
        let mut rng_b = stream(moved.seeds().demand, StreamId::SlotDemand);
        for _ in 0..50 {
            let sa = model_a.sample_slot(&mut rng_a);
            let sb = model_b.sample_slot(&mut rng_b);
            let files_a: Vec<usize> = sa.events.iter().map(|e| e.file).collect();
            let files_b: Vec<usize> = sb.events.iter().map(|e| e.file).collect();
            assert_eq!(files_a, files_b);
        }
    }

    #[test]
    fn history_is_deterministic_and_seed_isolated() {
        let cfg = valid(presets::tiny_config());
        let model = PopularityModel::from_config(&cfg).unwrap();
        let mut raw = presets::tiny_config();
        raw.history.counts = crate::config::HistoryCounts::Uniform(50);
        let cfg50 = valid(raw);

        let h1 = generate_history(&model, &cfg50, &mut stream(7, StreamId::History));
        let h2 = generate_history(&model, &cfg50, &mut stream(7, StreamId::History));
        assert_eq!(h1, h2);
        let h3 = generate_history(&model, &cfg50, &mut stream(8, StreamId::History));
        assert_ne!(h1, h3);

        for node in 0..cfg50.n_nodes() {
            for file in 0..cfg50.n_files() {
                assert_eq!(h1.count(node, file), 50);
                let k = cfg50.k_n(node) as u64;
                assert!(h1.sum(node, file) <= 50 * k);
                // Squares dominate sums for integer observations.
                assert!(h1.sum_sq(node, file) >= h1.sum(node, file));
            }
        }
    }

    #[test]
    fn zero_history_yields_empty_set() {
        let cfg = valid(presets::tiny_config());
        let model = PopularityModel::from_config(&cfg).unwrap();
        let h = generate_history(&model, &cfg, &mut stream(7, StreamId::History));
        assert_eq!(h, HistorySet::empty(2, 4));
    }

    // History means concentrate near the true means (moderate sample,
    // fixed seed).
    #[test]
    fn history_means_track_true_means() {
        let mut raw = presets::desk_config();
        raw.history.counts = crate::config::HistoryCounts::Uniform(4000);
        let cfg = valid(raw);
        let model = PopularityModel::from_config(&cfg).unwrap();
        let h = generate_history(&model, &cfg, &mut stream(5, StreamId::History));
        for node in 0..cfg.n_nodes() {
            for file in 0..cfg.n_files() {
                let mean = h.sum(node, file) as f64 / h.count(node, file) as f64;
                let d = model.true_mean(node, file);
                let k = cfg.k_n(node) as f64;
                // Poisson-binomial variance is at most k/4.
                let se = (k / 4.0 / 4000.0f64).sqrt();
                assert!(
                    (mean - d).abs() <= 4.0 * se,
                    "node {node} file {file}: {mean} vs {d}"
                );
            }
        }
    }

    #[test]
    fn trace_round_trip_and_validation() {
        let cfg = valid(presets::tiny_config());
        let model = PopularityModel::from_config(&cfg).unwrap();
        let mut rng = stream(cfg.seeds().demand, StreamId::SlotDemand);
        let slots: Vec<SlotDemand> = (0..10).map(|_| model.sample_slot(&mut rng)).collect();

        let mut buf = Vec::new();
        let mut w = TraceWriter::new(&mut buf).unwrap();
        for (i, s) in slots.iter().enumerate() {
            w.write_slot(i as u64, &s.matrix).unwrap();
        }
        w.finish().unwrap();

        let mut src = TraceSource::load(std::io::Cursor::new(&buf), &cfg).unwrap();
        assert_eq!(src.len(), 10);
        let mut out = SlotDemand { matrix: DemandMatrix::zero(2, 4), events: Vec::new() };
        for s in &slots {
            src.next_slot_into(&mut out);
            assert_eq!(out.matrix, s.matrix);
            // Canonical replay order: ascending (node, file).
            let mut sorted = out.events.clone();
            sorted.sort_by_key(|e| (e.node, e.file));
            assert_eq!(out.events, sorted);
        }

        // A corrupted total is rejected.
        let text = String::from_utf8(buf).unwrap();
        let broken = text.replacen(",1\n", ",2\n", 1);
        assert!(TraceSource::load(std::io::Cursor::new(broken.as_bytes()), &cfg).is_err());
    }
}
