//! Synthetic dynamic graphs with planted community trajectories.
//!
//! SYN-FIX keeps four communities and moves a few members each step.
//! SYN-VAR grows four new communities out of the original four, then
//! replays its first half backwards. The Green family starts from an
//! LFR-style planted partition and applies one kind of event per step.
//!
//! Every generator rewires only the nodes touched by a change; all other
//! edges carry over unchanged.

use std::collections::BTreeSet;

use rand::seq::{IndexedRandom, SliceRandom};
use rand::Rng as _;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{DynamicGraph, Snapshot};
use crate::partition::{Partition, BACKGROUND};
use crate::seed::{self, tag, Rng};

const SNAPSHOTS: usize = 10;

/// Adjacency under construction. Ordered sets keep iteration, and therefore
/// output, deterministic.
struct Wiring {
    adj: Vec<BTreeSet<usize>>,
}

impl Wiring {
    fn new(n: usize) -> Self {
        Wiring { adj: vec![BTreeSet::new(); n] }
    }

    fn add(&mut self, a: usize, b: usize) -> bool {
        if a == b || self.adj[a].contains(&b) {
            return false;
        }
        self.adj[a].insert(b);
        self.adj[b].insert(a);
        true
    }

    fn isolate(&mut self, a: usize) {
        for b in std::mem::take(&mut self.adj[a]) {
            self.adj[b].remove(&a);
        }
    }

    fn snapshot(&self, timestamp: usize) -> Result<Snapshot> {
        let edges = self
            .adj
            .iter()
            .enumerate()
            .flat_map(|(a, nb)| nb.range(a + 1..).map(move |&b| (a, b, 1.0)));
        Snapshot::from_edges(self.adj.len(), timestamp, edges)
    }
}

/// Bernoulli edges between every pair touching `nodes`, with probability
/// `p_in` inside a community and `p_out` across.
fn bernoulli_rewire(w: &mut Wiring, labels: &[u32], nodes: &[usize], p_in: f64, p_out: f64, rng: &mut Rng) {
    let mut touched = vec![false; labels.len()];
    for &a in nodes {
        w.isolate(a);
        touched[a] = true;
    }
    for &a in nodes {
        for b in 0..labels.len() {
            // Pairs of two touched nodes are drawn once, from the lower id.
            if b == a || (touched[b] && b < a) {
                continue;
            }
            let p = if labels[a] == labels[b] { p_in } else { p_out };
            if rng.random::<f64>() < p {
                w.add(a, b);
            }
        }
    }
}

fn planted_sizes(sizes: &[usize]) -> Vec<u32> {
    sizes.iter().enumerate().flat_map(|(c, &s)| std::iter::repeat_n(c as u32, s)).collect()
}

/// Intra-community probability shared by SYN-FIX and SYN-VAR.
pub const SYN_P_IN: f64 = 0.25;
/// Inter-community probability shared by SYN-FIX and SYN-VAR.
pub const SYN_P_OUT: f64 = 0.01;

/// 128 nodes in four communities of 32 over ten snapshots. From the second
/// snapshot on, three current members of each community move to another
/// community.
pub fn gen_syn_fix(seed: u64) -> Result<DynamicGraph> {
    let n = 128;
    let mut rng = seed::rng(seed, tag::GENERATOR, 0);
    let mut labels = planted_sizes(&[32; 4]);
    let mut w = Wiring::new(n);
    let all: Vec<usize> = (0..n).collect();
    bernoulli_rewire(&mut w, &labels, &all, SYN_P_IN, SYN_P_OUT, &mut rng);
    let mut snapshots = vec![w.snapshot(1)?];
    let mut truth = vec![Partition::new(labels.clone())];
    for t in 2..=SNAPSHOTS {
        let mut movers = Vec::with_capacity(12);
        for c in 0..4u32 {
            let members: Vec<usize> = (0..n).filter(|&a| labels[a] == c).collect();
            movers.extend(members.choose_multiple(&mut rng, 3).copied());
        }
        for &a in &movers {
            let target = (labels[a] + rng.random_range(1..4)) % 4;
            labels[a] = target;
        }
        movers.sort_unstable();
        bernoulli_rewire(&mut w, &labels, &movers, SYN_P_IN, SYN_P_OUT, &mut rng);
        snapshots.push(w.snapshot(t)?);
        truth.push(Partition::new(labels.clone()));
    }
    DynamicGraph::new(snapshots)?.with_labels(truth)
}

/// SYN-VAR at its native size: 256 nodes in four communities of 64.
pub fn gen_syn_var(seed: u64) -> Result<DynamicGraph> {
    gen_syn_var_scaled(seed, 1)
}

/// SYN-VAR with every community `scale` times larger and edge probabilities
/// divided by `scale`, which keeps expected degrees fixed. Snapshots 2–5
/// each pull `8·scale` current members out of every original community into
/// a new community; snapshots 6–10 repeat snapshots 5–1.
pub fn gen_syn_var_scaled(seed: u64, scale: usize) -> Result<DynamicGraph> {
    if scale == 0 {
        return Err(Error::InfeasibleParams("scale must be at least 1".into()));
    }
    let n = 256 * scale;
    let (p_in, p_out) = (SYN_P_IN / scale as f64, SYN_P_OUT / scale as f64);
    let mut rng = seed::rng(seed, tag::GENERATOR, 1);
    let mut labels = planted_sizes(&[64 * scale; 4]);
    let mut w = Wiring::new(n);
    let all: Vec<usize> = (0..n).collect();
    bernoulli_rewire(&mut w, &labels, &all, p_in, p_out, &mut rng);
    let mut snapshots = vec![w.snapshot(1)?];
    let mut truth = vec![Partition::new(labels.clone())];
    for t in 2..=5 {
        let new_label = 4 + (t - 2) as u32;
        let mut movers = Vec::with_capacity(32 * scale);
        for c in 0..4u32 {
            let members: Vec<usize> = (0..n).filter(|&a| labels[a] == c).collect();
            movers.extend(members.choose_multiple(&mut rng, 8 * scale).copied());
        }
        for &a in &movers {
            labels[a] = new_label;
        }
        movers.sort_unstable();
        bernoulli_rewire(&mut w, &labels, &movers, p_in, p_out, &mut rng);
        snapshots.push(w.snapshot(t)?);
        truth.push(Partition::new(labels.clone()));
    }
    for t in 6..=SNAPSHOTS {
        let source = SNAPSHOTS + 1 - t;
        snapshots.push(snapshots[source - 1].clone().with_timestamp(t));
        truth.push(truth[source - 1].clone());
    }
    DynamicGraph::new(snapshots)?.with_labels(truth)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum GreenEvent {
    BirthDeath,
    Expansion,
    Hide,
    MergeSplit,
}

impl GreenEvent {
    pub const ALL: [GreenEvent; 4] = [GreenEvent::BirthDeath, GreenEvent::Expansion, GreenEvent::Hide, GreenEvent::MergeSplit];

    pub fn name(self) -> &'static str {
        match self {
            GreenEvent::BirthDeath => "birth-death",
            GreenEvent::Expansion => "expansion",
            GreenEvent::Hide => "hide",
            GreenEvent::MergeSplit => "merge-split",
        }
    }

    /// Share of communities an event touches per transition.
    fn share(self) -> f64 {
        match self {
            GreenEvent::BirthDeath => 0.05,
            GreenEvent::Expansion | GreenEvent::Hide => 0.10,
            GreenEvent::MergeSplit => 0.20,
        }
    }

    /// Number of communities touched when `k` exist.
    pub fn affected_count(self, k: usize) -> usize {
        (self.share() * k as f64 - 1e-9).ceil().max(1.0) as usize
    }
}

impl std::str::FromStr for GreenEvent {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        GreenEvent::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::InvalidConfig(format!("unknown event `{s}`")))
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GreenParams {
    pub n: usize,
    pub tau: usize,
    pub avg_degree: f64,
    pub max_degree: usize,
    /// Inclusive range the initial community count is drawn from.
    pub community_count_range: (usize, usize),
    /// Fraction of each node's edges leaving its community.
    pub mixing: f64,
    pub event: GreenEvent,
    pub seed: u64,
}

impl GreenParams {
    /// Desk-scale defaults: 1000 nodes, 10 snapshots, 10 communities,
    /// mixing 0.2.
    pub fn new(event: GreenEvent, seed: u64) -> Self {
        GreenParams { n: 1000, tau: 10, avg_degree: 20.0, max_degree: 50, community_count_range: (10, 10), mixing: 0.2, event, seed }
    }

    fn validate(&self) -> Result<()> {
        let (lo, hi) = self.community_count_range;
        let fail = |m: String| Err(Error::InfeasibleParams(m));
        if self.tau == 0 {
            return fail("need at least one snapshot".into());
        }
        if lo < 2 || lo > hi {
            return fail(format!("community count range {lo}..={hi} must be nonempty and start at 2 or more"));
        }
        if hi > self.n / 2 {
            return fail(format!("{hi} communities cannot fit {} nodes", self.n));
        }
        if !(self.mixing > 0.0 && self.mixing < 1.0) {
            return fail(format!("mixing {} outside (0, 1)", self.mixing));
        }
        if !(self.avg_degree >= 1.0 && self.avg_degree <= self.max_degree as f64 && self.max_degree < self.n) {
            return fail(format!(
                "degrees need 1 ≤ avg ({}) ≤ max ({}) ≤ n − 1 ({})",
                self.avg_degree,
                self.max_degree,
                self.n.saturating_sub(1)
            ));
        }
        Ok(())
    }
}

/// Mean of the continuous power law `∝ d⁻²` on `[a, b]`.
fn power_law_mean(a: f64, b: f64) -> f64 {
    if (b - a).abs() < 1e-12 {
        return a;
    }
    a * b * (b / a).ln() / (b - a)
}

/// Degree sequence from a truncated `d⁻²` law on `[d_min, max]`, with
/// `d_min` chosen so the mean matches `avg`.
fn draw_degrees(p: &GreenParams, rng: &mut Rng) -> Result<Vec<usize>> {
    let b = p.max_degree as f64;
    if power_law_mean(1.0, b) > p.avg_degree {
        return Err(Error::InfeasibleParams(format!(
            "average degree {} is below the smallest reachable mean {:.2} for max degree {}",
            p.avg_degree,
            power_law_mean(1.0, b),
            p.max_degree
        )));
    }
    let (mut lo, mut hi) = (1.0, b);
    for _ in 0..100 {
        let mid = 0.5 * (lo + hi);
        if power_law_mean(mid, b) < p.avg_degree {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let a = 0.5 * (lo + hi);
    // Inverse CDF of the d⁻² law: d = 1 / (1/a − u (1/a − 1/b)).
    Ok((0..p.n)
        .map(|_| {
            let u: f64 = rng.random();
            let d = 1.0 / (1.0 / a - u * (1.0 / a - 1.0 / b));
            (d.round() as usize).clamp(1, p.max_degree)
        })
        .collect())
}

/// Pairs up stubs at random, re-shuffling rejected ones for a few rounds.
fn match_stubs(w: &mut Wiring, mut stubs: Vec<usize>, accept: impl Fn(usize, usize) -> bool, rng: &mut Rng) {
    for _ in 0..10 {
        if stubs.len() < 2 {
            return;
        }
        stubs.shuffle(rng);
        let mut left = Vec::new();
        for pair in stubs.chunks(2) {
            if let [a, b] = *pair {
                if !(accept(a, b) && w.add(a, b)) {
                    left.extend([a, b]);
                }
            }
        }
        stubs = left;
    }
}

struct GreenState {
    /// Underlying community of every node; hiding only changes labels.
    membership: Vec<u32>,
    degree: Vec<usize>,
    /// Size of each community when it first appeared.
    original: Vec<usize>,
    hidden: BTreeSet<u32>,
    mixing: f64,
}

impl GreenState {
    fn communities(&self) -> Vec<(u32, Vec<usize>)> {
        Partition::new(self.membership.clone()).clusters()
    }

    fn fresh_label(&mut self, size: usize) -> u32 {
        self.original.push(size);
        (self.original.len() - 1) as u32
    }

    fn intra_target(&self, a: usize) -> usize {
        ((1.0 - self.mixing) * self.degree[a] as f64).round() as usize
    }

    fn labels(&self) -> Partition {
        Partition::new(
            self.membership
                .iter()
                .map(|c| if self.hidden.contains(c) { BACKGROUND } else { *c })
                .collect(),
        )
    }

    /// Initial wiring: configuration-model stubs inside each community,
    /// then across communities.
    fn wire_all(&self, w: &mut Wiring, rng: &mut Rng) {
        for (_, members) in self.communities() {
            let stubs: Vec<usize> = members
                .iter()
                .flat_map(|&a| std::iter::repeat_n(a, self.intra_target(a).min(members.len() - 1)))
                .collect();
            match_stubs(w, stubs, |_, _| true, rng);
        }
        let stubs: Vec<usize> = (0..self.membership.len())
            .flat_map(|a| std::iter::repeat_n(a, self.degree[a].saturating_sub(self.intra_target(a))))
            .collect();
        let m = &self.membership;
        match_stubs(w, stubs, |a, b| m[a] != m[b], rng);
    }

    /// Drops every edge of `nodes` and redraws them: hidden nodes attach
    /// uniformly at random, the rest follow the planted intra/inter split.
    fn rewire(&self, w: &mut Wiring, nodes: &BTreeSet<usize>, rng: &mut Rng) {
        let n = self.membership.len();
        for &a in nodes {
            w.isolate(a);
        }
        let members: Vec<(u32, Vec<usize>)> = self.communities();
        let lookup: std::collections::HashMap<u32, &Vec<usize>> = members.iter().map(|(c, m)| (*c, m)).collect();
        for &a in nodes {
            let c = self.membership[a];
            let have = w.adj[a].len();
            if self.hidden.contains(&c) {
                let mut need = self.degree[a].saturating_sub(have);
                let mut tries = 0;
                while need > 0 && tries < 50 * self.degree[a] {
                    tries += 1;
                    if w.add(a, rng.random_range(0..n)) {
                        need -= 1;
                    }
                }
                continue;
            }
            let own = lookup[&c];
            let have_in = w.adj[a].iter().filter(|&&b| self.membership[b] == c).count();
            let mut need_in = self.intra_target(a).min(own.len() - 1).saturating_sub(have_in);
            let mut need_out = self.degree[a].saturating_sub(self.intra_target(a)).saturating_sub(have - have_in);
            let mut tries = 0;
            while need_in > 0 && tries < 50 * self.degree[a] {
                tries += 1;
                if w.add(a, *own.choose(rng).expect("nonempty community")) {
                    need_in -= 1;
                }
            }
            tries = 0;
            while need_out > 0 && tries < 50 * self.degree[a] {
                tries += 1;
                let b = rng.random_range(0..n);
                if self.membership[b] != c && w.add(a, b) {
                    need_out -= 1;
                }
            }
        }
    }
}

/// Moves `count` random nodes taken from communities other than `keep`
/// (largest first) to `target`, never emptying a community.
fn pull_members(state: &mut GreenState, target: u32, count: usize, keep: &[u32], rng: &mut Rng) -> Vec<usize> {
    let mut pool: Vec<usize> = (0..state.membership.len()).filter(|&a| !keep.contains(&state.membership[a])).collect();
    pool.shuffle(rng);
    let mut sizes = std::collections::HashMap::new();
    for &c in &state.membership {
        *sizes.entry(c).or_insert(0usize) += 1;
    }
    let mut moved = Vec::new();
    for a in pool {
        if moved.len() == count {
            break;
        }
        let c = state.membership[a];
        if sizes[&c] > 2 {
            *sizes.get_mut(&c).unwrap() -= 1;
            state.membership[a] = target;
            moved.push(a);
        }
    }
    moved
}

/// Sends every node in `nodes` to a random community from `targets`.
fn scatter(state: &mut GreenState, nodes: &[usize], targets: &[u32], rng: &mut Rng) {
    for &a in nodes {
        state.membership[a] = *targets.choose(rng).expect("at least one target community");
    }
}

/// Applies one transition and returns the nodes whose edges must be redrawn.
fn apply_event(state: &mut GreenState, event: GreenEvent, step: usize, rng: &mut Rng) -> BTreeSet<usize> {
    let comms = state.communities();
    let k = comms.len();
    let count = event.affected_count(k);
    let ids: Vec<u32> = comms.iter().map(|(c, _)| *c).collect();
    let mut chosen: Vec<u32> = ids.choose_multiple(rng, count.min(k)).copied().collect();
    chosen.sort_unstable();
    let before = state.membership.clone();
    let mut affected = BTreeSet::new();
    match event {
        GreenEvent::BirthDeath => {
            let survivors: Vec<u32> = ids.iter().copied().filter(|c| !chosen.contains(c)).collect();
            let n = state.membership.len();
            for &dead in &chosen {
                let members: Vec<usize> = (0..n).filter(|&a| state.membership[a] == dead).collect();
                scatter(state, &members, &survivors, rng);
            }
            let size = n / k;
            for _ in 0..chosen.len() {
                let born = state.fresh_label(size);
                pull_members(state, born, size, &[born], rng);
            }
        }
        GreenEvent::Expansion => {
            let n = state.membership.len();
            for &c in &chosen {
                let members: Vec<usize> = (0..n).filter(|&a| state.membership[a] == c).collect();
                let delta = state.original[c as usize] / 2;
                if members.len() > state.original[c as usize] {
                    // Contract back by half of the original size.
                    let mut leaving = members.clone();
                    leaving.shuffle(rng);
                    leaving.truncate(delta.min(members.len().saturating_sub(2)));
                    let others: Vec<u32> = ids.iter().copied().filter(|&o| o != c).collect();
                    scatter(state, &leaving, &others, rng);
                } else {
                    pull_members(state, c, delta, &chosen, rng);
                }
            }
        }
        GreenEvent::Hide => {
            let previously = std::mem::take(&mut state.hidden);
            state.hidden = chosen.iter().copied().collect();
            for (c, members) in &comms {
                if previously.contains(c) || state.hidden.contains(c) {
                    affected.extend(members.iter().copied());
                }
            }
        }
        GreenEvent::MergeSplit => {
            if step.is_multiple_of(2) {
                let pairs = (chosen.len() / 2).max(1);
                let mut order = ids.clone();
                order.shuffle(rng);
                for pair in order.chunks(2).take(pairs) {
                    if let [a, b] = *pair {
                        let size = comms.iter().filter(|(c, _)| *c == a || *c == b).map(|(_, m)| m.len()).sum();
                        let merged = state.fresh_label(size);
                        for m in state.membership.iter_mut().filter(|m| **m == a || **m == b) {
                            *m = merged;
                        }
                    }
                }
            } else {
                let splits = chosen.len().div_ceil(2);
                let mut by_size = comms.clone();
                by_size.sort_by(|x, y| y.1.len().cmp(&x.1.len()).then(x.0.cmp(&y.0)));
                for (_, members) in by_size.into_iter().take(splits) {
                    let mut members = members;
                    members.shuffle(rng);
                    let half = members.len() / 2;
                    let (first, second) = (state.fresh_label(half), state.fresh_label(members.len() - half));
                    for (i, &a) in members.iter().enumerate() {
                        state.membership[a] = if i < half { first } else { second };
                    }
                }
            }
        }
    }
    for (a, (old, new)) in before.iter().zip(&state.membership).enumerate() {
        if old != new {
            affected.insert(a);
        }
    }
    // A merged or split community needs all its members rewired.
    if event == GreenEvent::MergeSplit {
        let changed: BTreeSet<u32> = affected.iter().map(|&a| state.membership[a]).collect();
        affected.extend((0..state.membership.len()).filter(|&a| changed.contains(&state.membership[a])));
    }
    affected
}

/// LFR-style planted partition followed by `τ − 1` transitions of one event
/// type.
pub fn gen_green(params: &GreenParams) -> Result<DynamicGraph> {
    params.validate()?;
    let mut rng = seed::rng(params.seed, tag::GENERATOR, 2);
    let n = params.n;
    let (lo, hi) = params.community_count_range;
    let k = rng.random_range(lo..=hi);
    let degree = draw_degrees(params, &mut rng)?;
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut membership = vec![0u32; n];
    for (i, &a) in order.iter().enumerate() {
        membership[a] = (i * k / n) as u32;
    }
    let sizes: Vec<usize> = (0..k).map(|c| membership.iter().filter(|&&m| m == c as u32).count()).collect();
    let smallest = *sizes.iter().min().unwrap();
    let widest = ((1.0 - params.mixing) * params.max_degree as f64).round() as usize;
    if widest >= smallest {
        return Err(Error::InfeasibleParams(format!(
            "intra-community degree {widest} does not fit a community of {smallest} nodes"
        )));
    }
    let mut state = GreenState { membership, degree, original: sizes, hidden: BTreeSet::new(), mixing: params.mixing };
    let mut w = Wiring::new(n);
    state.wire_all(&mut w, &mut rng);
    let mut snapshots = vec![w.snapshot(1)?];
    let mut truth = vec![state.labels()];
    for t in 2..=params.tau {
        let affected = apply_event(&mut state, params.event, t, &mut rng);
        state.rewire(&mut w, &affected, &mut rng);
        snapshots.push(w.snapshot(t)?);
        truth.push(state.labels());
    }
    DynamicGraph::new(snapshots)?.with_labels(truth)
}
