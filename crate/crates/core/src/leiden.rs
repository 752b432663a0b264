//! Leiden community detection for the CPM and modularity objectives.
//!
//! Each pass runs queue-based local moving, refines every community from
//! singletons (merging only well-connected pieces), then aggregates the
//! refined communities while carrying the unrefined partition upward.
//!
//! Both objectives share one gain formula, `w(v, C) − γ·a_v·A_C·s`, where
//! for CPM `a` is the original node count and `s = 1`, and for modularity `a`
//! is the weighted degree and `s = 1/2m`. Gains stay in edge-weight units;
//! `quality` reports modularity on its usual scale.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{invalid, Error, Result};
use crate::graph::{Graph, Partition};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ObjectiveKind {
    Modularity,
    Cpm,
}

impl fmt::Display for ObjectiveKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ObjectiveKind::Modularity => "modularity",
            ObjectiveKind::Cpm => "cpm",
        })
    }
}

impl FromStr for ObjectiveKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "modularity" => Ok(ObjectiveKind::Modularity),
            "cpm" => Ok(ObjectiveKind::Cpm),
            other => invalid(format!("unknown objective {other:?} (expected modularity or cpm)")),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QualityObjective {
    pub kind: ObjectiveKind,
    /// CPM resolution, or the modularity resolution (1 gives standard Q).
    pub gamma: f64,
}

impl QualityObjective {
    pub fn modularity() -> Self {
        Self {
            kind: ObjectiveKind::Modularity,
            gamma: 1.0,
        }
    }

    pub fn cpm(gamma: f64) -> Self {
        Self {
            kind: ObjectiveKind::Cpm,
            gamma,
        }
    }

    fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0) || !self.gamma.is_finite() {
            return invalid(format!("resolution must be positive, got {}", self.gamma));
        }
        Ok(())
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LeidenConfig {
    pub objective: QualityObjective,
    /// Randomness of refinement merges.
    pub theta: f64,
    pub seed: u64,
    /// Aggregation levels per pass.
    pub max_levels: usize,
    /// Full passes, each restarting from the previous result, until one
    /// leaves the partition unchanged.
    pub max_passes: usize,
}

impl LeidenConfig {
    pub fn new(objective: QualityObjective, seed: u64) -> Self {
        Self {
            objective,
            theta: 0.01,
            seed,
            max_levels: 100,
            max_passes: 10,
        }
    }
}

#[derive(Clone, Debug)]
pub struct LeidenResult {
    pub partition: Partition,
    pub quality: f64,
    pub passes: usize,
    /// Aggregation levels visited in the final pass.
    pub levels: usize,
}

/// Result of collapsing refined communities into nodes.
#[derive(Clone, Debug)]
pub struct AggregateGraph {
    /// Edges between distinct aggregate nodes, weighted by the summed edge
    /// weight between their members.
    pub graph: Graph,
    /// Edge weight inside each aggregate node.
    pub self_weights: Vec<f64>,
    pub node_sizes: Vec<usize>,
    /// Original nodes making up each aggregate node.
    pub members: Vec<Vec<usize>>,
}

const GAIN_EPS: f64 = 1e-10;

struct Level {
    adj: Vec<Vec<(usize, f64)>>,
    self_w: Vec<f64>,
    size: Vec<f64>,
    strength: Vec<f64>,
    total: f64,
}

impl Level {
    fn from_graph(g: &Graph) -> Self {
        let n = g.num_nodes();
        let adj = (0..n)
            .map(|u| g.neighbors(u).iter().copied().zip(g.neighbor_weights(u).iter().copied()).collect())
            .collect();
        Self {
            adj,
            self_w: vec![0.0; n],
            size: vec![1.0; n],
            strength: (0..n).map(|u| g.weighted_degree(u)).collect(),
            total: g.total_weight(),
        }
    }

    fn n(&self) -> usize {
        self.adj.len()
    }
}

#[derive(Clone, Copy)]
struct Gain {
    gamma: f64,
    scale: f64,
    cpm: bool,
}

impl Gain {
    fn new(level: &Level, obj: &QualityObjective) -> Self {
        let cpm = obj.kind == ObjectiveKind::Cpm;
        Self {
            gamma: obj.gamma,
            scale: if cpm { 1.0 } else { 1.0 / (2.0 * level.total) },
            cpm,
        }
    }

    fn weight(&self, level: &Level, v: usize) -> f64 {
        if self.cpm {
            level.size[v]
        } else {
            level.strength[v]
        }
    }

    fn penalty(&self, a: f64, b: f64) -> f64 {
        self.gamma * a * b * self.scale
    }

    /// Objective in edge-weight units for a membership over `level`.
    fn quality(&self, level: &Level, memb: &[usize]) -> f64 {
        let k = memb.iter().max().map_or(0, |m| m + 1);
        let mut internal = vec![0.0; k];
        let mut weight = vec![0.0; k];
        let mut sq = vec![0.0; k];
        for v in 0..level.n() {
            let c = memb[v];
            internal[c] += level.self_w[v];
            let a = self.weight(level, v);
            weight[c] += a;
            sq[c] += a * a;
            for &(u, w) in &level.adj[v] {
                if u > v && memb[u] == c {
                    internal[c] += w;
                }
            }
        }
        (0..k)
            .map(|c| {
                let pairs = if self.cpm {
                    // Σ over unordered pairs of distinct original nodes.
                    (weight[c] * weight[c] - weight[c]) / 2.0
                } else {
                    weight[c] * weight[c] / 2.0
                };
                internal[c] - self.penalty(1.0, pairs)
            })
            .sum()
    }
}

fn renumber(memb: &mut [usize]) -> usize {
    let mut map = vec![usize::MAX; memb.len().max(memb.iter().max().map_or(0, |m| m + 1))];
    let mut next = 0;
    for c in memb.iter_mut() {
        if map[*c] == usize::MAX {
            map[*c] = next;
            next += 1;
        }
        *c = map[*c];
    }
    next
}

/// Scratch accumulator for edge weight from one node into each community.
struct Accum {
    w: Vec<f64>,
    touched: Vec<usize>,
    seen: Vec<bool>,
}

impl Accum {
    fn new(n: usize) -> Self {
        Self {
            w: vec![0.0; n],
            touched: Vec::new(),
            seen: vec![false; n],
        }
    }

    fn add(&mut self, c: usize, w: f64) {
        if !self.seen[c] {
            self.seen[c] = true;
            self.touched.push(c);
        }
        self.w[c] += w;
    }

    fn clear(&mut self) {
        for &c in &self.touched {
            self.w[c] = 0.0;
            self.seen[c] = false;
        }
        self.touched.clear();
    }
}

/// Queue-based local moving; returns whether any node changed community.
fn move_nodes(level: &Level, memb: &mut [usize], gain: Gain, rng: &mut ChaCha8Rng) -> bool {
    let n = level.n();
    renumber(memb);
    let mut comm_w = vec![0.0; n];
    let mut count = vec![0usize; n];
    for v in 0..n {
        comm_w[memb[v]] += gain.weight(level, v);
        count[memb[v]] += 1;
    }
    let mut empty: Vec<usize> = (0..n).rev().filter(|&c| count[c] == 0).collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut queue: VecDeque<usize> = order.into();
    let mut queued = vec![true; n];
    let mut acc = Accum::new(n);
    let mut changed = false;

    while let Some(v) = queue.pop_front() {
        queued[v] = false;
        let own = memb[v];
        let a = gain.weight(level, v);
        comm_w[own] -= a;
        count[own] -= 1;
        for &(u, w) in &level.adj[v] {
            acc.add(memb[u], w);
        }
        let mut best = own;
        let mut best_gain = acc.w[own] - gain.penalty(a, comm_w[own]);
        acc.touched.sort_unstable();
        for &c in &acc.touched {
            if c == own {
                continue;
            }
            let g = acc.w[c] - gain.penalty(a, comm_w[c]);
            if g > best_gain + GAIN_EPS {
                best = c;
                best_gain = g;
            }
        }
        if best_gain < -GAIN_EPS && count[own] > 0 {
            if let Some(&c) = empty.last() {
                best = c;
            }
        }
        acc.clear();
        if best != own {
            if empty.last() == Some(&best) {
                empty.pop();
            }
            if count[own] == 0 {
                empty.push(own);
            }
            memb[v] = best;
            changed = true;
            for &(u, _) in &level.adj[v] {
                if !queued[u] && memb[u] != best {
                    queued[u] = true;
                    queue.push_back(u);
                }
            }
        }
        comm_w[memb[v]] += a;
        count[memb[v]] += 1;
    }
    renumber(memb);
    changed
}

/// Refines each community of `memb` from singletons; the result refines `memb`.
fn refine_level(level: &Level, memb: &[usize], gain: Gain, theta: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let n = level.n();
    let k = memb.iter().max().map_or(0, |m| m + 1);
    let mut refined: Vec<usize> = (0..n).collect();
    let mut rw: Vec<f64> = (0..n).map(|v| gain.weight(level, v)).collect();
    let mut rcount = vec![1usize; n];
    let mut pw = vec![0.0; k];
    for v in 0..n {
        pw[memb[v]] += rw[v];
    }
    // Edge weight from each refined community to the rest of its parent.
    let mut cut: Vec<f64> = (0..n)
        .map(|v| level.adj[v].iter().filter(|e| memb[e.0] == memb[v]).map(|e| e.1).sum())
        .collect();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(rng);
    let mut acc = Accum::new(n);
    let mut cands: Vec<(usize, f64)> = Vec::new();

    for v in order {
        let own = refined[v];
        if rcount[own] != 1 {
            continue;
        }
        let c = memb[v];
        let a = rw[own];
        if cut[own] < gain.penalty(a, pw[c] - a) - GAIN_EPS {
            continue;
        }
        for &(u, w) in &level.adj[v] {
            if memb[u] == c {
                acc.add(refined[u], w);
            }
        }
        acc.touched.sort_unstable();
        cands.clear();
        cands.push((own, 0.0));
        for &t in &acc.touched {
            if t == own || cut[t] < gain.penalty(rw[t], pw[c] - rw[t]) - GAIN_EPS {
                continue;
            }
            let g = acc.w[t] - gain.penalty(a, rw[t]);
            if g >= 0.0 {
                cands.push((t, g));
            }
        }
        let target = if cands.len() == 1 {
            own
        } else {
            let top = cands.iter().map(|x| x.1).fold(f64::NEG_INFINITY, f64::max);
            let weights: Vec<f64> = cands.iter().map(|x| ((x.1 - top) / theta).exp()).collect();
            let mut r = rng.random::<f64>() * weights.iter().sum::<f64>();
            let mut pick = cands[cands.len() - 1].0;
            for (cand, w) in cands.iter().zip(&weights) {
                if r < *w {
                    pick = cand.0;
                    break;
                }
                r -= w;
            }
            pick
        };
        if target != own {
            cut[target] += cut[own] - 2.0 * acc.w[target];
            rw[target] += a;
            rcount[target] += 1;
            rcount[own] = 0;
            refined[v] = target;
        }
        acc.clear();
    }
    refined
}

/// Collapses `refined` (renumbered in place) into a new level; returns it
/// with the carried partition.
fn aggregate_level(level: &Level, refined: &mut [usize], memb: &[usize]) -> (Level, Vec<usize>) {
    let r = renumber(refined);
    let mut size = vec![0.0; r];
    let mut self_w = vec![0.0; r];
    let mut strength = vec![0.0; r];
    let mut carried = vec![0; r];
    let mut pairs: Vec<(usize, usize, f64)> = Vec::new();
    for v in 0..level.n() {
        let rv = refined[v];
        size[rv] += level.size[v];
        self_w[rv] += level.self_w[v];
        strength[rv] += level.strength[v];
        carried[rv] = memb[v];
        for &(u, w) in &level.adj[v] {
            if u > v {
                let ru = refined[u];
                if ru == rv {
                    self_w[rv] += w;
                } else {
                    pairs.push((ru.min(rv), ru.max(rv), w));
                }
            }
        }
    }
    pairs.sort_unstable_by(|x, y| (x.0, x.1).cmp(&(y.0, y.1)));
    let mut adj = vec![Vec::new(); r];
    let mut i = 0;
    while i < pairs.len() {
        let (a, b) = (pairs[i].0, pairs[i].1);
        let mut w = 0.0;
        while i < pairs.len() && pairs[i].0 == a && pairs[i].1 == b {
            w += pairs[i].2;
            i += 1;
        }
        adj[a].push((b, w));
        adj[b].push((a, w));
    }
    let next = Level {
        adj,
        self_w,
        size,
        strength,
        total: level.total,
    };
    (next, carried)
}

/// Splits every community into its connected pieces; never lowers either
/// objective since no internal edge is lost.
fn split_disconnected(g: &Graph, labels: &[usize]) -> Partition {
    let n = g.num_nodes();
    let mut out = vec![usize::MAX; n];
    let mut next = 0;
    let mut stack = Vec::new();
    for s in 0..n {
        if out[s] != usize::MAX {
            continue;
        }
        out[s] = next;
        stack.push(s);
        while let Some(v) = stack.pop() {
            for &u in g.neighbors(v) {
                if out[u] == usize::MAX && labels[u] == labels[v] {
                    out[u] = next;
                    stack.push(u);
                }
            }
        }
        next += 1;
    }
    Partition::from_labels(&out)
}

fn check_partition(g: &Graph, p: &Partition) -> Result<()> {
    if p.num_nodes() != g.num_nodes() {
        return invalid(format!("partition covers {} nodes, graph has {}", p.num_nodes(), g.num_nodes()));
    }
    Ok(())
}

/// Objective value of `p`; modularity is reported on the usual `[−½, 1]` scale.
pub fn quality(g: &Graph, p: &Partition, obj: &QualityObjective) -> Result<f64> {
    check_partition(g, p)?;
    obj.validate()?;
    let level = Level::from_graph(g);
    if obj.kind == ObjectiveKind::Modularity {
        if level.total <= 0.0 {
            return invalid("modularity is undefined on an edgeless graph");
        }
        return Ok(Gain::new(&level, obj).quality(&level, p.assignment()) / level.total);
    }
    Ok(Gain::new(&level, obj).quality(&level, p.assignment()))
}

/// One round of queue-based local moving starting from `p`.
pub fn local_move(g: &Graph, p: &Partition, obj: &QualityObjective, seed: u64) -> Result<Partition> {
    check_partition(g, p)?;
    obj.validate()?;
    let level = Level::from_graph(g);
    if level.total <= 0.0 {
        return Ok(p.clone());
    }
    let mut memb = p.assignment().to_vec();
    move_nodes(&level, &mut memb, Gain::new(&level, obj), &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Partition::from_labels(&memb))
}

/// Refinement of `p`: singletons merged only within communities of `p`.
pub fn refine(g: &Graph, p: &Partition, obj: &QualityObjective, theta: f64, seed: u64) -> Result<Partition> {
    check_partition(g, p)?;
    obj.validate()?;
    if !(theta > 0.0) {
        return invalid(format!("theta must be positive, got {theta}"));
    }
    let level = Level::from_graph(g);
    if level.total <= 0.0 {
        return Ok(Partition::singletons(g.num_nodes()));
    }
    let refined = refine_level(&level, p.assignment(), Gain::new(&level, obj), theta, &mut ChaCha8Rng::seed_from_u64(seed));
    Ok(Partition::from_labels(&refined))
}

/// Aggregate network of `refined`, plus the partition of its nodes induced by `p`.
pub fn aggregate(g: &Graph, refined: &Partition, p: &Partition) -> Result<(AggregateGraph, Partition)> {
    check_partition(g, refined)?;
    check_partition(g, p)?;
    if !refined.refines(p) {
        return invalid("refined partition does not refine the coarse partition");
    }
    let level = Level::from_graph(g);
    let mut labels = refined.assignment().to_vec();
    let (next, carried) = aggregate_level(&level, &mut labels, p.assignment());
    let r = next.n();
    let mut members = vec![Vec::new(); r];
    for (v, &c) in labels.iter().enumerate() {
        members[c].push(v);
    }
    let edges: Vec<(usize, usize, f64)> = (0..r)
        .flat_map(|a| next.adj[a].iter().filter(move |e| e.0 > a).map(move |e| (a, e.0, e.1)))
        .collect();
    let agg = AggregateGraph {
        graph: Graph::build(&edges, r)?,
        self_weights: next.self_w,
        node_sizes: next.size.iter().map(|&s| s as usize).collect(),
        members,
    };
    Ok((agg, Partition::from_labels(&carried)))
}

pub fn leiden(g: &Graph, cfg: &LeidenConfig) -> Result<LeidenResult> {
    cfg.objective.validate()?;
    if !(cfg.theta > 0.0) {
        return invalid(format!("theta must be positive, got {}", cfg.theta));
    }
    let n = g.num_nodes();
    let base = Level::from_graph(g);
    if base.total <= 0.0 {
        if cfg.objective.kind == ObjectiveKind::Modularity {
            return invalid("modularity is undefined on an edgeless graph");
        }
        return Ok(LeidenResult {
            partition: Partition::singletons(n),
            quality: 0.0,
            passes: 0,
            levels: 0,
        });
    }
    let gain = Gain::new(&base, &cfg.objective);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut flat: Vec<usize> = (0..n).collect();
    let mut passes = 0;
    let mut levels = 0;

    while passes < cfg.max_passes {
        passes += 1;
        let (next, lv) = leiden_pass(&base, &flat, gain, cfg, &mut rng);
        levels = lv;
        let next = split_disconnected(g, &next);
        let unchanged = next.same_clustering(&Partition::from_labels(&flat));
        flat = next.assignment().to_vec();
        if unchanged {
            break;
        }
    }

    let partition = Partition::from_labels(&flat);
    let quality = quality(g, &partition, &cfg.objective)?;
    Ok(LeidenResult {
        partition,
        quality,
        passes,
        levels,
    })
}

/// One multi-level pass starting from `start`; returns flat labels.
fn leiden_pass(base: &Level, start: &[usize], gain: Gain, cfg: &LeidenConfig, rng: &mut ChaCha8Rng) -> (Vec<usize>, usize) {
    let n = base.n();
    let mut owned: Option<Level> = None;
    let mut memb = start.to_vec();
    let mut node_of: Vec<usize> = (0..n).collect();
    let mut levels = 0;
    while levels < cfg.max_levels {
        levels += 1;
        let level = owned.as_ref().unwrap_or(base);
        let before = if cfg!(debug_assertions) { gain.quality(level, &memb) } else { 0.0 };
        move_nodes(level, &mut memb, gain, rng);
        debug_assert!(gain.quality(level, &memb) >= before - 1e-7 * (1.0 + before.abs()));
        let comms = memb.iter().max().map_or(0, |m| m + 1);
        if comms == level.n() {
            break;
        }
        let mut refined = refine_level(level, &memb, gain, cfg.theta, rng);
        let (next, carried) = aggregate_level(level, &mut refined, &memb);
        if next.n() == level.n() {
            break;
        }
        debug_assert!((gain.quality(&next, &carried) - gain.quality(level, &memb)).abs() < 1e-6 * (1.0 + before.abs()));
        for x in node_of.iter_mut() {
            *x = refined[*x];
        }
        memb = carried;
        owned = Some(next);
    }
    (node_of.iter().map(|&x| memb[x]).collect(), levels)
}
