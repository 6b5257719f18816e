//! Dual-averaging building blocks: the gradient ledger, feasible-set
//! projection, the prediction rule, and the learning-rate schedules.
//!
//! Every agent keeps a ledger of (agent, time)-indexed subgradients and
//! predicts by projecting `x1 - eta * sum(ledger)` onto the feasible set.
//! Ledger merging is a grow-only set union on the index set, so merges are
//! commutative, associative and idempotent as long as each record reaches
//! each agent at most once (the simulator enforces at-most-once delivery;
//! compact ledgers cannot detect duplicates older than their buffer).

use std::collections::BTreeMap;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::vecs;

/// Index of one subgradient: which agent computed it and at which step.
///
/// Ordered lexicographically by time then agent.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct GradientId {
    pub time: u32,
    pub agent: u32,
}

impl GradientId {
    pub fn new(agent: u32, time: u32) -> Self {
        GradientId { time, agent }
    }
}

/// One subgradient together with its index. The vector is shared so that
/// a record held by many ledgers is stored once.
#[derive(Debug, Clone)]
pub struct GradientRecord {
    pub id: GradientId,
    pub vector: Arc<[f64]>,
}

impl GradientRecord {
    pub fn new(agent: u32, time: u32, vector: Vec<f64>) -> Self {
        GradientRecord {
            id: GradientId::new(agent, time),
            vector: vector.into(),
        }
    }
}

/// Storage strategy for the ledger.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedgerMode {
    /// Keep every record. Supports exact duplicate suppression and
    /// sorted re-summation.
    Full,
    /// Keep only the running sum plus the records of the last `horizon`
    /// steps (needed to forward them to future partners).
    Compact { horizon: u32 },
    /// Per-origin-agent cumulative sums (one row per agent of a closed
    /// network). Only valid for closed-network runs.
    AgentSums,
}

#[derive(Debug, Clone)]
enum State {
    Full {
        records: BTreeMap<GradientId, Arc<[f64]>>,
    },
    Compact {
        horizon: u32,
        now: u32,
        recent: Vec<GradientRecord>,
    },
    AgentSums {
        rows: BTreeMap<u32, (u32, Vec<f64>)>,
    },
}

/// The set S_i of subgradients an agent has computed or received, with the
/// running sum maintained incrementally in insertion order.
#[derive(Debug, Clone)]
pub struct GradientLedger {
    dim: usize,
    count: u64,
    sum: Vec<f64>,
    state: State,
}

impl GradientLedger {
    pub fn new(dim: usize, mode: LedgerMode) -> Self {
        let state = match mode {
            LedgerMode::Full => State::Full {
                records: BTreeMap::new(),
            },
            LedgerMode::Compact { horizon } => State::Compact {
                horizon,
                now: 0,
                recent: Vec::new(),
            },
            LedgerMode::AgentSums => State::AgentSums {
                rows: BTreeMap::new(),
            },
        };
        GradientLedger {
            dim,
            count: 0,
            sum: vec![0.0; dim],
            state,
        }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Number of distinct records absorbed (card of the index set).
    pub fn card(&self) -> u64 {
        self.count
    }

    /// Running sum in insertion order.
    pub fn sum(&self) -> &[f64] {
        &self.sum
    }

    /// Insert one record. Returns `Ok(true)` if the id-set grew,
    /// `Ok(false)` for a full-mode duplicate (no-op). A duplicate that a
    /// compact ledger can still detect is a protocol bug and is rejected.
    pub fn insert(&mut self, rec: &GradientRecord) -> Result<bool> {
        if rec.vector.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                got: rec.vector.len(),
            });
        }
        match &mut self.state {
            State::Full { records } => {
                if records.contains_key(&rec.id) {
                    return Ok(false);
                }
                records.insert(rec.id, rec.vector.clone());
            }
            State::Compact { recent, .. } => {
                if recent.iter().any(|r| r.id == rec.id) {
                    return Err(Error::DuplicateRecord(rec.id));
                }
                recent.push(rec.clone());
            }
            State::AgentSums { rows } => {
                // u32::MAX marks a row that has not absorbed anything yet;
                // per-origin records must arrive in time order.
                let dim = rec.vector.len();
                let (last, sum_row) = rows
                    .entry(rec.id.agent)
                    .or_insert_with(|| (u32::MAX, vec![0.0; dim]));
                if *last != u32::MAX && *last >= rec.id.time {
                    return Err(Error::DuplicateRecord(rec.id));
                }
                *last = rec.id.time;
                vecs::add_assign(sum_row, &rec.vector);
            }
        }
        vecs::add_assign(&mut self.sum, &rec.vector);
        self.count += 1;
        Ok(true)
    }

    /// Absorb a partner's transmittable view (grow-only union).
    pub fn merge(&mut self, view: &[GradientRecord]) -> Result<()> {
        for rec in view {
            self.insert(rec)?;
        }
        Ok(())
    }

    /// Advance the compact buffer clock to `t`, evicting records with
    /// `time <= t - horizon`. No-op for the other modes.
    pub fn advance_time(&mut self, t: u32) {
        if let State::Compact {
            horizon,
            now,
            recent,
        } = &mut self.state
        {
            *now = t;
            let h = *horizon as u64;
            recent.retain(|r| r.id.time as u64 + h > t as u64);
        }
    }

    /// Records this ledger can transmit to a partner, sorted by id.
    /// Full mode: everything. Compact mode: the recent buffer.
    pub fn transmittable(&self) -> Vec<GradientRecord> {
        match &self.state {
            State::Full { records } => records
                .iter()
                .map(|(id, v)| GradientRecord {
                    id: *id,
                    vector: v.clone(),
                })
                .collect(),
            State::Compact { recent, .. } => {
                let mut v = recent.clone();
                v.sort_by_key(|r| r.id);
                v
            }
            State::AgentSums { .. } => Vec::new(),
        }
    }

    /// Recompute the sum in GradientId order (full mode only); used when
    /// comparing storage modes so the comparison is order-independent.
    pub fn sorted_sum(&self) -> Option<Vec<f64>> {
        match &self.state {
            State::Full { records } => {
                let mut s = vec![0.0; self.dim];
                for v in records.values() {
                    vecs::add_assign(&mut s, v);
                }
                Some(s)
            }
            _ => None,
        }
    }

    pub fn contains(&self, id: GradientId) -> Option<bool> {
        match &self.state {
            State::Full { records } => Some(records.contains_key(&id)),
            _ => None,
        }
    }
}

/// Shared constraint set; closed and convex in every variant.
#[derive(Debug, Clone, PartialEq)]
pub enum FeasibleSet {
    Unconstrained,
    Ball { center: Vec<f64>, radius: f64 },
    Box { lo: Vec<f64>, hi: Vec<f64> },
}

impl FeasibleSet {
    fn check_dim(&self, point: &[f64]) -> Result<()> {
        let expected = match self {
            FeasibleSet::Unconstrained => return Ok(()),
            FeasibleSet::Ball { center, .. } => center.len(),
            FeasibleSet::Box { lo, .. } => lo.len(),
        };
        if point.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                got: point.len(),
            });
        }
        Ok(())
    }

    /// Euclidean projection onto the set.
    pub fn project(&self, point: &[f64]) -> Result<Vec<f64>> {
        self.check_dim(point)?;
        Ok(match self {
            FeasibleSet::Unconstrained => point.to_vec(),
            FeasibleSet::Ball { center, radius } => {
                let diff = vecs::sub(point, center);
                let n = vecs::norm(&diff);
                if n <= *radius {
                    point.to_vec()
                } else {
                    let mut out = center.clone();
                    vecs::axpy(&mut out, radius / n, &diff);
                    out
                }
            }
            FeasibleSet::Box { lo, hi } => point
                .iter()
                .zip(lo.iter().zip(hi))
                .map(|(p, (l, h))| p.clamp(*l, *h))
                .collect(),
        })
    }

    pub fn contains(&self, point: &[f64], tol: f64) -> bool {
        match self {
            FeasibleSet::Unconstrained => true,
            FeasibleSet::Ball { center, radius } => vecs::dist(point, center) <= radius + tol,
            FeasibleSet::Box { lo, hi } => point
                .iter()
                .zip(lo.iter().zip(hi))
                .all(|(p, (l, h))| *p >= l - tol && *p <= h + tol),
        }
    }
}

/// Dual-averaging prediction: project(x1 - eta * sum(ledger)).
pub fn predict(
    x1: &[f64],
    eta: f64,
    ledger: &GradientLedger,
    set: &FeasibleSet,
) -> Result<Vec<f64>> {
    assert!(eta > 0.0, "learning rate must be positive");
    let mut z = x1.to_vec();
    vecs::axpy(&mut z, -eta, ledger.sum());
    set.project(&z)
}

/// Learning-rate schedules. `tau` is the delay bound; every variant is
/// positive and non-increasing in its clock argument.
#[derive(Debug, Clone, PartialEq)]
pub enum LearningRateSchedule {
    /// eta = r0 / (n_rms * G * sqrt((3 tau + 1) T)), fixed over the run.
    ConstantTheorem1 {
        r0: f64,
        n_rms: f64,
        g: f64,
        tau: u32,
        horizon: u64,
    },
    /// eta_t = r0 / sqrt((3 tau + 1) * sum_{s<=t} n_s^2); n_t known to all.
    KnownSquares { r0: f64, tau: u32 },
    /// eta_t = r0 / (n_max * sqrt((3 tau + 1) t)); needs a global clock.
    GlobalClock { r0: f64, n_max: u64, tau: u32 },
    /// eta = r0 / (G * sqrt((5 tau + 3) (card(S) + (tau + 1) n_max) n_max));
    /// oblivious to both t and the network size history.
    Cardinality {
        r0: f64,
        g: f64,
        tau: u32,
        n_max: u64,
    },
}

/// Whatever a schedule variant may need at evaluation time.
#[derive(Debug, Clone, Copy, Default)]
pub struct LrContext<'a> {
    /// Global step index, starting at 1.
    pub t: Option<u64>,
    /// card(S_i^t) of the evaluating agent.
    pub card: Option<u64>,
    /// n_1..n_t (inclusive of the current step).
    pub n_history: Option<&'a [u64]>,
}

impl LearningRateSchedule {
    pub fn is_constant(&self) -> bool {
        matches!(self, LearningRateSchedule::ConstantTheorem1 { .. })
    }

    pub fn value(&self, ctx: &LrContext) -> Result<f64> {
        let v = match self {
            LearningRateSchedule::ConstantTheorem1 {
                r0,
                n_rms,
                g,
                tau,
                horizon,
            } => r0 / (n_rms * g * ((3 * *tau as u64 + 1) as f64 * *horizon as f64).sqrt()),
            LearningRateSchedule::KnownSquares { r0, tau } => {
                let hist = ctx.n_history.ok_or_else(|| {
                    Error::Config("KnownSquares schedule needs the n_t history".into())
                })?;
                let sum_sq: f64 = hist.iter().map(|&n| (n * n) as f64).sum();
                if sum_sq == 0.0 {
                    return Err(Error::Config(
                        "KnownSquares schedule needs a nonzero n_t history".into(),
                    ));
                }
                r0 / ((3 * *tau as u64 + 1) as f64 * sum_sq).sqrt()
            }
            LearningRateSchedule::GlobalClock { r0, n_max, tau } => {
                let t = ctx
                    .t
                    .filter(|t| *t >= 1)
                    .ok_or_else(|| Error::Config("GlobalClock schedule needs t >= 1".into()))?;
                r0 / (*n_max as f64 * ((3 * *tau as u64 + 1) as f64 * t as f64).sqrt())
            }
            LearningRateSchedule::Cardinality { r0, g, tau, n_max } => {
                let card = ctx
                    .card
                    .ok_or_else(|| Error::Config("Cardinality schedule needs card(S)".into()))?;
                let tau = *tau as u64;
                r0 / (g
                    * ((5 * tau + 3) as f64
                        * (card + (tau + 1) * n_max) as f64
                        * *n_max as f64)
                        .sqrt())
            }
        };
        debug_assert!(v > 0.0);
        Ok(v)
    }
}
