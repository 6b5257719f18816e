//! Network composition and communication: static topologies with flooding
//! delays, Bernoulli open-network evolution, random pairing, and delay /
//! possession tracking.

use std::collections::{BTreeMap, BTreeSet, VecDeque};

use rand::seq::SliceRandom;
use rand::Rng;

use crate::dual::GradientId;
use crate::error::{Error, Result};

/// Per-step composition snapshot: active set and round links (graph edges
/// or the round's pairing).
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub t: u32,
    pub active: BTreeSet<u32>,
    pub links: BTreeSet<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum StaticTopology {
    Grid { rows: usize, cols: usize },
    Path { n: usize },
    Complete { n: usize },
    Custom { n: usize, edges: Vec<(u32, u32)> },
}

impl StaticTopology {
    pub fn n(&self) -> usize {
        match self {
            StaticTopology::Grid { rows, cols } => rows * cols,
            StaticTopology::Path { n } | StaticTopology::Complete { n } => *n,
            StaticTopology::Custom { n, .. } => *n,
        }
    }

    pub fn edges(&self) -> Vec<(u32, u32)> {
        match self {
            StaticTopology::Grid { rows, cols } => grid_edges(*rows, *cols),
            StaticTopology::Path { n } => (0..n.saturating_sub(1))
                .map(|i| (i as u32, i as u32 + 1))
                .collect(),
            StaticTopology::Complete { n } => {
                let mut e = Vec::new();
                for i in 0..*n {
                    for j in i + 1..*n {
                        e.push((i as u32, j as u32));
                    }
                }
                e
            }
            StaticTopology::Custom { edges, .. } => edges.clone(),
        }
    }
}

/// 4-neighborhood lattice, ids in row-major order.
pub fn grid_edges(rows: usize, cols: usize) -> Vec<(u32, u32)> {
    let mut edges = Vec::new();
    let id = |r: usize, c: usize| (r * cols + c) as u32;
    for r in 0..rows {
        for c in 0..cols {
            if c + 1 < cols {
                edges.push((id(r, c), id(r, c + 1)));
            }
            if r + 1 < rows {
                edges.push((id(r, c), id(r + 1, c)));
            }
        }
    }
    edges
}

/// Exact diameter via BFS from every active node; errors on a
/// disconnected graph (the delay bound would be undefined).
pub fn graph_diameter(active: &BTreeSet<u32>, edges: &[(u32, u32)]) -> Result<u32> {
    if active.is_empty() {
        return Err(Error::Disconnected);
    }
    let mut adj: BTreeMap<u32, Vec<u32>> = active.iter().map(|&a| (a, Vec::new())).collect();
    for &(u, v) in edges {
        if active.contains(&u) && active.contains(&v) {
            adj.get_mut(&u).unwrap().push(v);
            adj.get_mut(&v).unwrap().push(u);
        }
    }
    let mut diameter = 0u32;
    for &src in active {
        let mut dist: BTreeMap<u32, u32> = BTreeMap::new();
        dist.insert(src, 0);
        let mut queue = VecDeque::from([src]);
        while let Some(u) = queue.pop_front() {
            let du = dist[&u];
            for &v in &adj[&u] {
                if !dist.contains_key(&v) {
                    dist.insert(v, du + 1);
                    queue.push_back(v);
                }
            }
        }
        if dist.len() != active.len() {
            return Err(Error::Disconnected);
        }
        diameter = diameter.max(*dist.values().max().unwrap());
    }
    Ok(diameter)
}

/// Bernoulli evolution model: every `k_period` rounds each agent of the
/// universe flips its activation status with probability `p`.
#[derive(Debug, Clone, PartialEq)]
pub struct OpenEvolution {
    pub k_period: u32,
    pub p: f64,
    pub initial_active_fraction: f64,
    pub universe: usize,
}

impl Default for OpenEvolution {
    fn default() -> Self {
        OpenEvolution {
            k_period: 20,
            p: 0.05,
            initial_active_fraction: 0.5,
            universe: 64,
        }
    }
}

impl OpenEvolution {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.p) {
            return Err(Error::Config(format!("p = {} outside [0,1]", self.p)));
        }
        if self.k_period < 1 {
            return Err(Error::Config("K must be >= 1".into()));
        }
        if !(0.0..=1.0).contains(&self.initial_active_fraction)
            || self.initial_active_fraction == 0.0
        {
            return Err(Error::Config("initial_active_fraction must be in (0,1]".into()));
        }
        Ok(())
    }

    /// Initial composition: a uniform subset of the stated size.
    pub fn initial_active<R: Rng>(&self, rng: &mut R) -> BTreeSet<u32> {
        let count = ((self.universe as f64) * self.initial_active_fraction).round() as usize;
        let mut ids: Vec<u32> = (0..self.universe as u32).collect();
        ids.shuffle(rng);
        ids.into_iter().take(count.max(1).min(self.universe)).collect()
    }
}

#[derive(Debug, Clone)]
pub struct EvolveOutcome {
    pub new_active: BTreeSet<u32>,
    pub arrivals: BTreeSet<u32>,
    pub departures: BTreeSet<u32>,
}

/// Status flips at the end of round `t` when (t+1) mod K == 0; otherwise
/// the composition is unchanged.
pub fn evolve<R: Rng>(
    active: &BTreeSet<u32>,
    t: u32,
    model: &OpenEvolution,
    rng: &mut R,
) -> EvolveOutcome {
    if (t + 1) % model.k_period != 0 {
        return EvolveOutcome {
            new_active: active.clone(),
            arrivals: BTreeSet::new(),
            departures: BTreeSet::new(),
        };
    }
    let mut new_active = active.clone();
    let mut arrivals = BTreeSet::new();
    let mut departures = BTreeSet::new();
    for agent in 0..model.universe as u32 {
        let flip = rng.gen::<f64>() < model.p;
        if flip {
            if active.contains(&agent) {
                new_active.remove(&agent);
                departures.insert(agent);
            } else {
                new_active.insert(agent);
                arrivals.insert(agent);
            }
        }
    }
    EvolveOutcome {
        new_active,
        arrivals,
        departures,
    }
}

#[derive(Debug, Clone)]
pub struct Pairing {
    pub pairs: Vec<(u32, u32)>,
    pub unpaired: Option<u32>,
}

/// Uniform random matching: shuffle the active agents and pair them off;
/// with an odd count the last one sits the round out.
pub fn pair_active<R: Rng>(active: &BTreeSet<u32>, rng: &mut R) -> Pairing {
    let mut ids: Vec<u32> = active.iter().copied().collect();
    ids.shuffle(rng);
    let mut pairs = Vec::with_capacity(ids.len() / 2);
    let mut it = ids.chunks_exact(2);
    for c in &mut it {
        pairs.push((c[0], c[1]));
    }
    Pairing {
        pairs,
        unpaired: it.remainder().first().copied(),
    }
}

/// ceil(n_max * period / (connectivity - churn)) + period; the delay bound
/// for a k-vertex-connected schedule with bounded churn.
pub fn example1_delay_bound(n_max: u64, period: u64, connectivity: u64, churn: u64) -> Result<u64> {
    if churn >= connectivity {
        return Err(Error::ChurnTooLarge {
            churn,
            connectivity,
        });
    }
    if period < 1 {
        return Err(Error::Config("period must be >= 1".into()));
    }
    let den = connectivity - churn;
    Ok((n_max * period).div_ceil(den) + period)
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayViolation {
    pub id: GradientId,
    pub agent: u32,
    pub t: u32,
}

/// Simulator-side possession tracking: which active agents hold each
/// record. Doubles as the at-most-once delivery filter. Records held by
/// every active agent are moved to a saturated set so memory stays
/// proportional to the in-flight window.
#[derive(Debug, Clone, Default)]
pub struct DelayTracker {
    saturated: BTreeSet<GradientId>,
    open: BTreeMap<GradientId, BTreeSet<u32>>,
    lost: BTreeSet<GradientId>,
    pub max_observed_delay: u32,
    /// Arrivals that found no survivor to copy from.
    pub empty_init_warnings: u64,
}

impl DelayTracker {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn record_created(&mut self, id: GradientId) {
        self.open.insert(id, BTreeSet::from([id.agent]));
    }

    pub fn holds(&self, id: GradientId, agent: u32) -> bool {
        self.saturated.contains(&id)
            || self.open.get(&id).is_some_and(|s| s.contains(&agent))
    }

    pub fn deliver(&mut self, id: GradientId, agent: u32, t: u32) {
        debug_assert!(!self.holds(id, agent), "duplicate delivery");
        self.max_observed_delay = self.max_observed_delay.max(t - id.time);
        self.open.entry(id).or_default().insert(agent);
    }

    /// A newcomer copied `from`'s full ledger: it now holds everything
    /// `from` holds (saturated records included by construction).
    pub fn copy_holder(&mut self, from: u32, to: u32) {
        for holders in self.open.values_mut() {
            if holders.contains(&from) {
                holders.insert(to);
            }
        }
    }

    /// Move fully-spread records out of the per-record maps.
    pub fn compress(&mut self, active: &BTreeSet<u32>) {
        let done: Vec<GradientId> = self
            .open
            .iter()
            .filter(|(_, holders)| active.iter().all(|a| holders.contains(a)))
            .map(|(id, _)| *id)
            .collect();
        for id in done {
            self.open.remove(&id);
            self.saturated.insert(id);
        }
    }

    /// Remove departed agents from possession sets; a record whose set
    /// empties is lost. If nobody survived, everything is lost.
    pub fn apply_departures(
        &mut self,
        departures: &BTreeSet<u32>,
        survivors_exist: bool,
    ) -> Vec<GradientId> {
        let mut newly_lost = Vec::new();
        if !survivors_exist {
            newly_lost.extend(self.open.keys().copied());
            newly_lost.extend(self.saturated.iter().copied());
            self.open.clear();
            self.saturated.clear();
        } else {
            let mut emptied = Vec::new();
            for (id, holders) in &mut self.open {
                for d in departures {
                    holders.remove(d);
                }
                if holders.is_empty() {
                    emptied.push(*id);
                }
            }
            for id in emptied {
                self.open.remove(&id);
                newly_lost.push(id);
            }
        }
        self.lost.extend(newly_lost.iter().copied());
        newly_lost
    }

    /// Flag records past the delay bound that some active agent still
    /// lacks. Violations are reported, never thrown, so runs exceeding
    /// tau can be studied.
    pub fn check_delays(&self, t: u32, tau: u32, active: &BTreeSet<u32>) -> Vec<DelayViolation> {
        let mut out = Vec::new();
        for (id, holders) in &self.open {
            if t as u64 > id.time as u64 + tau as u64 {
                for &a in active {
                    if !holders.contains(&a) {
                        out.push(DelayViolation { id: *id, agent: a, t });
                    }
                }
            }
        }
        out
    }

    pub fn lost(&self) -> &BTreeSet<GradientId> {
        &self.lost
    }

    pub fn lost_count(&self) -> u64 {
        self.lost.len() as u64
    }
}
