//! Algorithm executors: dual-averaging over static (flooding) and open
//! (random pairing) networks, plus decentralized gradient-descent
//! baselines with Metropolis mixing (static) and pairwise averaging
//! (open). A run is single-threaded and fully determined by its config
//! and seed; replications across seeds may run in parallel.

use std::collections::{BTreeMap, BTreeSet};

use rand::Rng;

use crate::dual::{
    predict, FeasibleSet, GradientId, GradientLedger, GradientRecord, LearningRateSchedule,
    LedgerMode, LrContext,
};
use crate::error::{Error, Result};
use crate::lad::{lad_subgradient, LocalDataset};
use crate::network::{
    evolve, graph_diameter, pair_active, DelayTracker, OpenEvolution, Pairing, StaticTopology,
};
use crate::rng;
use crate::vecs;

/// One agent's live state.
#[derive(Debug, Clone)]
pub struct AgentRuntime {
    pub id: u32,
    pub ledger: GradientLedger,
    pub x: Vec<f64>,
    pub active: bool,
}

/// Everything an observer may want to see at the end of a round.
pub struct StepView<'a> {
    /// 0-based round index.
    pub t: u32,
    pub active: &'a BTreeSet<u32>,
    pub iterates: &'a BTreeMap<u32, Vec<f64>>,
    /// Learning rate applied this round (None if agent-dependent).
    pub eta: Option<f64>,
    /// n_1..n_{t+1}, current round included.
    pub n_history: &'a [u64],
    /// max_i ||x_i - z_t|| against the virtual iterate (constant-rate runs).
    pub consensus_gap: Option<f64>,
    pub virtual_iterate: Option<&'a [f64]>,
    pub max_delay: u32,
    pub lost: &'a BTreeSet<GradientId>,
    pub delay_violations: usize,
    pub composition_changed: bool,
    pub arrivals: u32,
    pub departures: u32,
    pub empty_init_warnings: u64,
}

/// Effective learning rate mapping: a subgradient reaches all n agents in
/// dual averaging but is averaged out in DGD, so the per-record rate is
/// gamma_eff / n on a static network and 2 gamma_eff / n on an open one
/// (on average n/2 agents are active).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RateMode {
    Static,
    Open,
}

pub fn effective_rate(gamma_eff: f64, n: usize, mode: RateMode) -> f64 {
    assert!(gamma_eff > 0.0 && n >= 1);
    match mode {
        RateMode::Static => gamma_eff / n as f64,
        RateMode::Open => 2.0 * gamma_eff / n as f64,
    }
}

/// Symmetric doubly stochastic mixing matrix with off-diagonal entries
/// 1/(max(deg_i, deg_j) + 1).
#[derive(Debug, Clone)]
pub struct MixingMatrix {
    pub ids: Vec<u32>,
    pub w: Vec<Vec<f64>>,
}

pub fn metropolis(active: &BTreeSet<u32>, edges: &[(u32, u32)]) -> MixingMatrix {
    let ids: Vec<u32> = active.iter().copied().collect();
    let index: BTreeMap<u32, usize> = ids.iter().enumerate().map(|(i, &a)| (a, i)).collect();
    let n = ids.len();
    let mut deg = vec![0usize; n];
    let mut pairs = Vec::new();
    for &(u, v) in edges {
        if let (Some(&i), Some(&j)) = (index.get(&u), index.get(&v)) {
            deg[i] += 1;
            deg[j] += 1;
            pairs.push((i, j));
        }
    }
    let mut w = vec![vec![0.0; n]; n];
    for (i, j) in pairs {
        let val = 1.0 / (deg[i].max(deg[j]) + 1) as f64;
        w[i][j] = val;
        w[j][i] = val;
    }
    for i in 0..n {
        let off: f64 = w[i].iter().sum();
        w[i][i] = 1.0 - off;
    }
    MixingMatrix { ids, w }
}

/// The all-information iterate: project(x1 - eta * sum of every gradient
/// computed before step t), including gradients later lost to the network.
pub fn virtual_iterate(
    history: &[GradientRecord],
    t: u32,
    eta: f64,
    x1: &[f64],
    set: &FeasibleSet,
) -> Result<Vec<f64>> {
    let mut z = x1.to_vec();
    let mut sorted: Vec<&GradientRecord> = history.iter().filter(|r| r.id.time < t).collect();
    sorted.sort_by_key(|r| r.id);
    for r in sorted {
        vecs::axpy(&mut z, -eta, &r.vector);
    }
    set.project(&z)
}

/// Incremental virtual-iterate tracker used inside the runners.
struct VirtualTracker {
    dual_sum: Vec<f64>,
    eta: f64,
}

impl VirtualTracker {
    fn new(dim: usize, eta: f64) -> Self {
        VirtualTracker {
            dual_sum: vec![0.0; dim],
            eta,
        }
    }

    fn current(&self, x1: &[f64], set: &FeasibleSet) -> Result<Vec<f64>> {
        let mut z = x1.to_vec();
        vecs::axpy(&mut z, -self.eta, &self.dual_sum);
        set.project(&z)
    }

    fn absorb(&mut self, g: &[f64]) {
        vecs::add_assign(&mut self.dual_sum, g);
    }
}

#[derive(Debug, Clone)]
pub struct StaticDaeronConfig {
    pub topology: StaticTopology,
    /// Per-record learning rate (constant eta).
    pub gamma: f64,
    pub horizon: u32,
    pub x1: Vec<f64>,
    pub set: FeasibleSet,
    pub ledger_mode: LedgerMode,
    pub track_virtual: bool,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub max_delay: u32,
    pub lost_records: u64,
    pub delay_violations: usize,
    pub empty_init_warnings: u64,
    pub diameter: Option<u32>,
}

/// Dual averaging with flooding on a static connected topology.
/// Communication overlaps computation: a gradient computed at step s
/// reaches an agent at distance k at step s + k.
pub fn run_daeron_static<F>(
    problem: &[LocalDataset],
    cfg: &StaticDaeronConfig,
    mut on_step: F,
) -> Result<RunSummary>
where
    F: FnMut(&StepView) -> Result<()>,
{
    let n = cfg.topology.n();
    if n == 0 || problem.len() < n {
        return Err(Error::Config("topology larger than the problem".into()));
    }
    let active: BTreeSet<u32> = (0..n as u32).collect();
    let edges = cfg.topology.edges();
    let diameter = graph_diameter(&active, &edges)?;
    let d = cfg.x1.len();

    let mut adj: Vec<Vec<u32>> = vec![Vec::new(); n];
    for &(u, v) in &edges {
        adj[u as usize].push(v);
        adj[v as usize].push(u);
    }

    let mut ledgers: Vec<GradientLedger> =
        (0..n).map(|_| GradientLedger::new(d, cfg.ledger_mode)).collect();
    let mut tracker = DelayTracker::new();
    let mut frontier: Vec<Vec<GradientRecord>> = vec![Vec::new(); n];
    let mut virt = cfg
        .track_virtual
        .then(|| VirtualTracker::new(d, cfg.gamma));
    let mut n_history: Vec<u64> = Vec::with_capacity(cfg.horizon as usize);
    let mut violations_total = 0usize;

    for t in 0..cfg.horizon {
        n_history.push(n as u64);
        let z = match &virt {
            Some(v) => Some(v.current(&cfg.x1, &cfg.set)?),
            None => None,
        };

        let mut iterates: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        for i in 0..n {
            let x = predict(&cfg.x1, cfg.gamma, &ledgers[i], &cfg.set)?;
            iterates.insert(i as u32, x);
        }
        let consensus_gap = z
            .as_ref()
            .map(|z| iterates.values().map(|x| vecs::dist(x, z)).fold(0.0, f64::max));

        let mut new_frontier: Vec<Vec<GradientRecord>> = vec![Vec::new(); n];
        for i in 0..n {
            let g = lad_subgradient(&problem[i], &iterates[&(i as u32)]);
            if let Some(v) = &mut virt {
                v.absorb(&g);
            }
            let rec = GradientRecord::new(i as u32, t, g);
            tracker.record_created(rec.id);
            ledgers[i].insert(&rec)?;
            new_frontier[i].push(rec);
        }

        // one flooding hop: forward everything acquired last step
        for i in 0..n {
            for &j in &adj[i] {
                for rec in &frontier[i] {
                    if !tracker.holds(rec.id, j) {
                        ledgers[j as usize].insert(rec)?;
                        tracker.deliver(rec.id, j, t);
                        new_frontier[j as usize].push(rec.clone());
                    }
                }
            }
        }
        for l in &mut ledgers {
            l.advance_time(t);
        }
        tracker.compress(&active);
        let violations = tracker.check_delays(t, diameter, &active);
        violations_total += violations.len();

        on_step(&StepView {
            t,
            active: &active,
            iterates: &iterates,
            eta: Some(cfg.gamma),
            n_history: &n_history,
            consensus_gap,
            virtual_iterate: z.as_deref(),
            max_delay: tracker.max_observed_delay,
            lost: tracker.lost(),
            delay_violations: violations.len(),
            composition_changed: false,
            arrivals: 0,
            departures: 0,
            empty_init_warnings: 0,
        })?;

        frontier = new_frontier;
    }
    Ok(RunSummary {
        max_delay: tracker.max_observed_delay,
        lost_records: tracker.lost_count(),
        delay_violations: violations_total,
        empty_init_warnings: 0,
        diameter: Some(diameter),
    })
}

/// DGD baseline on a static topology: x <- W x - gamma_eff * g, with the
/// subgradient evaluated at the pre-mix iterate.
pub fn run_dgd_static<F>(
    problem: &[LocalDataset],
    topology: &StaticTopology,
    gamma_eff: f64,
    horizon: u32,
    x1: &[f64],
    mut on_step: F,
) -> Result<RunSummary>
where
    F: FnMut(&StepView) -> Result<()>,
{
    let n = topology.n();
    if n == 0 || problem.len() < n {
        return Err(Error::Config("topology larger than the problem".into()));
    }
    let active: BTreeSet<u32> = (0..n as u32).collect();
    let edges = topology.edges();
    let diameter = graph_diameter(&active, &edges)?;
    let mix = metropolis(&active, &edges);
    let mut xs: Vec<Vec<f64>> = vec![x1.to_vec(); n];
    let mut n_history = Vec::with_capacity(horizon as usize);
    let empty = BTreeSet::new();

    for t in 0..horizon {
        n_history.push(n as u64);
        let iterates: BTreeMap<u32, Vec<f64>> =
            (0..n as u32).map(|i| (i, xs[i as usize].clone())).collect();
        on_step(&StepView {
            t,
            active: &active,
            iterates: &iterates,
            eta: Some(gamma_eff),
            n_history: &n_history,
            consensus_gap: None,
            virtual_iterate: None,
            max_delay: 0,
            lost: &empty,
            delay_violations: 0,
            composition_changed: false,
            arrivals: 0,
            departures: 0,
            empty_init_warnings: 0,
        })?;

        let grads: Vec<Vec<f64>> = (0..n)
            .map(|i| lad_subgradient(&problem[i], &xs[i]))
            .collect();
        xs = dgd_static_step(&xs, &mix, gamma_eff, &grads);
    }
    Ok(RunSummary {
        max_delay: 0,
        lost_records: 0,
        delay_violations: 0,
        empty_init_warnings: 0,
        diameter: Some(diameter),
    })
}

/// x_i <- sum_j W_ij x_j - gamma_eff * g_i.
pub fn dgd_static_step(
    xs: &[Vec<f64>],
    mix: &MixingMatrix,
    gamma_eff: f64,
    grads: &[Vec<f64>],
) -> Vec<Vec<f64>> {
    let n = xs.len();
    let d = xs[0].len();
    let mut next = vec![vec![0.0; d]; n];
    for i in 0..n {
        for j in 0..n {
            if mix.w[i][j] != 0.0 {
                vecs::axpy(&mut next[i], mix.w[i][j], &xs[j]);
            }
        }
        vecs::axpy(&mut next[i], -gamma_eff, &grads[i]);
    }
    next
}

/// Paired agents move to their average minus a step along their own
/// subgradient; unpaired agents take a plain subgradient step.
pub fn dgd_open_step(
    xs: &BTreeMap<u32, Vec<f64>>,
    pairing: &Pairing,
    gamma_eff: f64,
    grads: &BTreeMap<u32, Vec<f64>>,
) -> BTreeMap<u32, Vec<f64>> {
    let mut next = xs.clone();
    for &(a, b) in &pairing.pairs {
        let mut mid = xs[&a].clone();
        vecs::add_assign(&mut mid, &xs[&b]);
        for v in &mut mid {
            *v *= 0.5;
        }
        let mut xa = mid.clone();
        vecs::axpy(&mut xa, -gamma_eff, &grads[&a]);
        let mut xb = mid;
        vecs::axpy(&mut xb, -gamma_eff, &grads[&b]);
        next.insert(a, xa);
        next.insert(b, xb);
    }
    if let Some(u) = pairing.unpaired {
        let mut xu = xs[&u].clone();
        vecs::axpy(&mut xu, -gamma_eff, &grads[&u]);
        next.insert(u, xu);
    }
    next
}

/// How agents pick their learning rate in an open run.
#[derive(Debug, Clone)]
pub enum RateSpec {
    /// One constant per-record rate.
    Constant(f64),
    Schedule(LearningRateSchedule),
}

#[derive(Debug, Clone)]
pub struct OpenDaeronConfig {
    pub evolution: OpenEvolution,
    pub rate: RateSpec,
    pub horizon: u32,
    pub x1: Vec<f64>,
    pub set: FeasibleSet,
    pub ledger_mode: LedgerMode,
    /// Asserted delay bound; drives the delay check.
    pub tau: u32,
    pub track_virtual: bool,
    /// Keep the per-delivery log used by the cardinality-order check.
    pub log_deliveries: bool,
}

/// One delivery, with the ledger cardinalities needed by the
/// in-order-cardinality diagnostic.
#[derive(Debug, Clone)]
pub struct DeliveryEvent {
    pub id: GradientId,
    pub receiver: u32,
    pub t: u32,
    /// card(S_j^s) of the sender when it computed the gradient.
    pub sender_card_at_creation: u64,
    /// card(S_i^t) of the receiver at the end of the round.
    pub receiver_card_after: u64,
}

#[derive(Debug, Default)]
pub struct OpenRunLog {
    pub deliveries: Vec<DeliveryEvent>,
}

fn choose_survivor<R: Rng>(survivors: &BTreeSet<u32>, rng: &mut R) -> Option<u32> {
    if survivors.is_empty() {
        return None;
    }
    let idx = rng.gen_range(0..survivors.len());
    survivors.iter().nth(idx).copied()
}

/// Uniform survivor choice for a newly arrived agent (empty result means
/// the arriving agent starts from scratch and a warning is counted).
pub fn arrival_init<R: Rng>(
    survivors: &BTreeSet<u32>,
    states: &BTreeMap<u32, GradientLedger>,
    rng: &mut R,
) -> Option<(u32, GradientLedger)> {
    choose_survivor(survivors, rng).map(|s| (s, states[&s].clone()))
}

/// Dual averaging over an open network with random pairwise gossip.
/// Paired agents exchange their pre-round ledgers; the partner's
/// same-round gradient is not received until a later exchange.
pub fn run_daeron_open<F>(
    problem: &[LocalDataset],
    cfg: &OpenDaeronConfig,
    seed: u64,
    mut on_step: F,
) -> Result<(RunSummary, OpenRunLog)>
where
    F: FnMut(&StepView) -> Result<()>,
{
    cfg.evolution.validate()?;
    let universe = cfg.evolution.universe;
    if problem.len() < universe {
        return Err(Error::Config("universe larger than the problem".into()));
    }
    let d = cfg.x1.len();
    let mut evo_rng = rng::stream(seed, rng::STREAM_EVOLUTION);
    let mut pair_rng = rng::stream(seed, rng::STREAM_PAIRING);

    let mut active = cfg.evolution.initial_active(&mut evo_rng);
    let mut ledgers: BTreeMap<u32, GradientLedger> = active
        .iter()
        .map(|&i| (i, GradientLedger::new(d, cfg.ledger_mode)))
        .collect();
    let mut tracker = DelayTracker::new();
    let constant_eta = match &cfg.rate {
        RateSpec::Constant(g) => Some(*g),
        RateSpec::Schedule(s) => match s {
            LearningRateSchedule::ConstantTheorem1 { .. } => {
                Some(s.value(&LrContext::default())?)
            }
            _ => None,
        },
    };
    let mut virt = match (cfg.track_virtual, constant_eta) {
        (true, Some(eta)) => Some(VirtualTracker::new(d, eta)),
        _ => None,
    };
    let mut creation_cards: BTreeMap<GradientId, u64> = BTreeMap::new();
    let mut log = OpenRunLog::default();
    let mut n_history: Vec<u64> = Vec::with_capacity(cfg.horizon as usize);
    let mut violations_total = 0usize;

    for t in 0..cfg.horizon {
        let mut composition_changed = false;
        let mut n_arrived = 0u32;
        let mut n_departed = 0u32;
        if t > 0 {
            let out = evolve(&active, t - 1, &cfg.evolution, &mut evo_rng);
            if !out.arrivals.is_empty() || !out.departures.is_empty() {
                composition_changed = true;
                n_arrived = out.arrivals.len() as u32;
                n_departed = out.departures.len() as u32;
                let survivors: BTreeSet<u32> =
                    active.intersection(&out.new_active).copied().collect();
                tracker.apply_departures(&out.departures, !survivors.is_empty());
                for dep in &out.departures {
                    ledgers.remove(dep);
                }
                for &arr in &out.arrivals {
                    match arrival_init(&survivors, &ledgers, &mut evo_rng) {
                        Some((src, ledger)) => {
                            tracker.copy_holder(src, arr);
                            ledgers.insert(arr, ledger);
                        }
                        None => {
                            tracker.empty_init_warnings += 1;
                            ledgers.insert(arr, GradientLedger::new(d, cfg.ledger_mode));
                        }
                    }
                }
                active = out.new_active;
            }
        }

        n_history.push(active.len() as u64);
        let z = match &virt {
            Some(v) => Some(v.current(&cfg.x1, &cfg.set)?),
            None => None,
        };

        if active.is_empty() {
            // vacuous round: no predictions, no updates
            let iterates = BTreeMap::new();
            on_step(&StepView {
                t,
                active: &active,
                iterates: &iterates,
                eta: constant_eta,
                n_history: &n_history,
                consensus_gap: None,
                virtual_iterate: z.as_deref(),
                max_delay: tracker.max_observed_delay,
                lost: tracker.lost(),
                delay_violations: 0,
                composition_changed,
                arrivals: n_arrived,
                departures: n_departed,
                empty_init_warnings: tracker.empty_init_warnings,
            })?;
            continue;
        }

        let pairing = pair_active(&active, &mut pair_rng);

        let mut iterates: BTreeMap<u32, Vec<f64>> = BTreeMap::new();
        let mut grads: BTreeMap<u32, GradientRecord> = BTreeMap::new();
        for &i in &active {
            let ledger = &ledgers[&i];
            let eta = match &cfg.rate {
                RateSpec::Constant(g) => *g,
                RateSpec::Schedule(s) => s.value(&LrContext {
                    t: Some(t as u64 + 1),
                    card: Some(ledger.card()),
                    n_history: Some(&n_history),
                })?,
            };
            let x = predict(&cfg.x1, eta, ledger, &cfg.set)?;
            let g = lad_subgradient(&problem[i as usize], &x);
            let rec = GradientRecord::new(i, t, g);
            creation_cards.insert(rec.id, ledger.card());
            iterates.insert(i, x);
            grads.insert(i, rec);
        }
        let consensus_gap = z
            .as_ref()
            .map(|z| iterates.values().map(|x| vecs::dist(x, z)).fold(0.0, f64::max));

        // pre-round views, snapshotted before any same-round insertion
        let mut views: BTreeMap<u32, Vec<GradientRecord>> = BTreeMap::new();
        for &(a, b) in &pairing.pairs {
            views.insert(a, ledgers[&a].transmittable());
            views.insert(b, ledgers[&b].transmittable());
        }

        for &i in &active {
            let rec = &grads[&i];
            tracker.record_created(rec.id);
            ledgers.get_mut(&i).unwrap().insert(rec)?;
            if let Some(v) = &mut virt {
                v.absorb(&rec.vector);
            }
        }

        let mut ordered_pairs = pairing.pairs.clone();
        ordered_pairs.sort_unstable();
        for (a, b) in ordered_pairs {
            for (dst, src) in [(a, b), (b, a)] {
                for rec in &views[&src] {
                    if !tracker.holds(rec.id, dst) {
                        ledgers.get_mut(&dst).unwrap().insert(rec)?;
                        tracker.deliver(rec.id, dst, t);
                        if cfg.log_deliveries {
                            log.deliveries.push(DeliveryEvent {
                                id: rec.id,
                                receiver: dst,
                                t,
                                sender_card_at_creation: creation_cards
                                    .get(&rec.id)
                                    .copied()
                                    .unwrap_or(0),
                                receiver_card_after: 0, // filled below
                            });
                        }
                    }
                }
            }
        }
        if cfg.log_deliveries {
            for ev in log.deliveries.iter_mut().rev() {
                if ev.t != t {
                    break;
                }
                ev.receiver_card_after = ledgers[&ev.receiver].card();
            }
        }

        for ledger in ledgers.values_mut() {
            ledger.advance_time(t);
        }
        tracker.compress(&active);
        let violations = tracker.check_delays(t, cfg.tau, &active);
        violations_total += violations.len();

        on_step(&StepView {
            t,
            active: &active,
            iterates: &iterates,
            eta: constant_eta,
            n_history: &n_history,
            consensus_gap,
            virtual_iterate: z.as_deref(),
            max_delay: tracker.max_observed_delay,
            lost: tracker.lost(),
            delay_violations: violations.len(),
            composition_changed,
            arrivals: n_arrived,
            departures: n_departed,
            empty_init_warnings: tracker.empty_init_warnings,
        })?;
    }
    Ok((
        RunSummary {
            max_delay: tracker.max_observed_delay,
            lost_records: tracker.lost_count(),
            delay_violations: violations_total,
            empty_init_warnings: tracker.empty_init_warnings,
            diameter: None,
        },
        log,
    ))
}

#[derive(Debug, Clone)]
pub struct OpenDgdConfig {
    pub evolution: OpenEvolution,
    pub gamma_eff: f64,
    pub horizon: u32,
    pub x1: Vec<f64>,
}

/// Primal baseline on the open network: paired agents move to their
/// average minus a step along their own subgradient (evaluated at the
/// pre-average iterate); unpaired agents take a plain subgradient step.
pub fn run_dgd_open<F>(
    problem: &[LocalDataset],
    cfg: &OpenDgdConfig,
    seed: u64,
    mut on_step: F,
) -> Result<RunSummary>
where
    F: FnMut(&StepView) -> Result<()>,
{
    cfg.evolution.validate()?;
    let universe = cfg.evolution.universe;
    if problem.len() < universe {
        return Err(Error::Config("universe larger than the problem".into()));
    }
    let mut evo_rng = rng::stream(seed, rng::STREAM_EVOLUTION);
    let mut pair_rng = rng::stream(seed, rng::STREAM_PAIRING);

    let mut active = cfg.evolution.initial_active(&mut evo_rng);
    let mut xs: BTreeMap<u32, Vec<f64>> =
        active.iter().map(|&i| (i, cfg.x1.clone())).collect();
    let mut n_history: Vec<u64> = Vec::with_capacity(cfg.horizon as usize);
    let mut warnings = 0u64;
    let empty = BTreeSet::new();

    for t in 0..cfg.horizon {
        let mut composition_changed = false;
        let mut n_arrived = 0u32;
        let mut n_departed = 0u32;
        if t > 0 {
            let out = evolve(&active, t - 1, &cfg.evolution, &mut evo_rng);
            if !out.arrivals.is_empty() || !out.departures.is_empty() {
                composition_changed = true;
                n_arrived = out.arrivals.len() as u32;
                n_departed = out.departures.len() as u32;
                let survivors: BTreeSet<u32> =
                    active.intersection(&out.new_active).copied().collect();
                for dep in &out.departures {
                    xs.remove(dep);
                }
                for &arr in &out.arrivals {
                    match choose_survivor(&survivors, &mut evo_rng) {
                        Some(s) => {
                            let x = xs[&s].clone();
                            xs.insert(arr, x);
                        }
                        None => {
                            warnings += 1;
                            xs.insert(arr, cfg.x1.clone());
                        }
                    }
                }
                active = out.new_active;
            }
        }
        n_history.push(active.len() as u64);

        if active.is_empty() {
            on_step(&StepView {
                t,
                active: &active,
                iterates: &BTreeMap::new(),
                eta: Some(cfg.gamma_eff),
                n_history: &n_history,
                consensus_gap: None,
                virtual_iterate: None,
                max_delay: 0,
                lost: &empty,
                delay_violations: 0,
                composition_changed,
                arrivals: n_arrived,
                departures: n_departed,
                empty_init_warnings: warnings,
            })?;
            continue;
        }

        let pairing = pair_active(&active, &mut pair_rng);
        on_step(&StepView {
            t,
            active: &active,
            iterates: &xs,
            eta: Some(cfg.gamma_eff),
            n_history: &n_history,
            consensus_gap: None,
            virtual_iterate: None,
            max_delay: 0,
            lost: &empty,
            delay_violations: 0,
            composition_changed,
            arrivals: n_arrived,
            departures: n_departed,
            empty_init_warnings: warnings,
        })?;

        let grads: BTreeMap<u32, Vec<f64>> = active
            .iter()
            .map(|&i| (i, lad_subgradient(&problem[i as usize], &xs[&i])))
            .collect();
        xs = dgd_open_step(&xs, &pairing, cfg.gamma_eff, &grads);
    }
    Ok(RunSummary {
        max_delay: 0,
        lost_records: 0,
        delay_violations: 0,
        empty_init_warnings: warnings,
        diameter: None,
    })
}
