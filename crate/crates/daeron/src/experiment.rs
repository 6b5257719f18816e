//! Experiment driver: turns a parsed `ExperimentConfig` into a full run
//! (data generation, rate resolution, simulation, metrics collection)
//! and writes the reproducibility artifacts. Also hosts the sweep and
//! the invariant-verification suite used by `daeron verify`.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use crate::config::{AlgorithmName, ExperimentConfig, NetworkSection, ScheduleName};
use crate::dual::{FeasibleSet, LearningRateSchedule, LrContext};
use crate::error::{Error, Result};
use crate::lad::{self, SyntheticData};
use crate::metrics::{self, CollectorConfig, MetricsCollector, MetricsLog};
use crate::network::{graph_diameter, OpenEvolution};
use crate::oracle::{self, OracleParams, Optimum, WeightedObjective};
use crate::runners::{
    self, DeliveryEvent, OpenDaeronConfig, OpenDgdConfig, RateMode, RateSpec, RunSummary,
    StaticDaeronConfig, StepView,
};
use crate::vecs;

/// One row of the network-evolution trace. `n_cum` counts active-agent
/// steps so far with lost records excluded, matching the metrics CSV.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct EvolutionRow {
    pub t: u64,
    pub n_t: u64,
    pub n_cum: u64,
    pub arrivals: u32,
    pub departures: u32,
    pub max_delay: u32,
    pub lost_records: u64,
}

pub const EVOLUTION_HEADER: &str = "t,n_t,N_t,arrivals,departures,max_delay,lost_records";

#[derive(Debug)]
pub struct ExperimentOutcome {
    pub metrics: MetricsLog,
    pub evolution: Vec<EvolutionRow>,
    pub summary: RunSummary,
    pub deliveries: Vec<DeliveryEvent>,
    pub g_bound: f64,
    pub radius: f64,
    pub tau: u32,
    /// The constant per-record rate, when the schedule has one.
    pub eta_constant: Option<f64>,
    pub data: SyntheticData,
}

/// Subgradient-norm bound G over the whole problem.
pub fn problem_g_bound(data: &SyntheticData) -> Result<f64> {
    let mut g = 0.0f64;
    for ds in &data.datasets {
        g = g.max(lad::lipschitz_bound(ds)?);
    }
    Ok(g)
}

fn objectives(data: &SyntheticData) -> Vec<WeightedObjective<'_>> {
    data.datasets
        .iter()
        .map(|ds| WeightedObjective { weight: 1.0, data: ds })
        .collect()
}

/// Solve the full-population reference problem once. Used for the r0 = dist0^2
/// auto-initialization of the adaptive schedules and by `daeron oracle`.
pub fn full_population_optimum(
    data: &SyntheticData,
    set: &FeasibleSet,
    cfg: &ExperimentConfig,
) -> Result<Optimum> {
    let objs = objectives(data);
    let params = OracleParams {
        tol: cfg.run.oracle_tol,
        budget: cfg.run.oracle_budget,
        radius_hint: 0.0,
        x0: None,
    };
    oracle::reference_optimum(&objs, set, &params)
}

/// Resolve tau: an explicit setting wins, otherwise the graph diameter on
/// static topologies and 2K on open networks.
pub fn resolve_tau(cfg: &ExperimentConfig) -> Result<u32> {
    if cfg.algorithm.tau > 0 {
        return Ok(cfg.algorithm.tau);
    }
    match &cfg.network {
        NetworkSection::Static { topology } => {
            let active: BTreeSet<u32> = (0..topology.n() as u32).collect();
            graph_diameter(&active, &topology.edges())
        }
        NetworkSection::Open { k_period, .. } => Ok(2 * k_period),
    }
}

fn resolve_r0(
    cfg: &ExperimentConfig,
    data: &SyntheticData,
    set: &FeasibleSet,
) -> Result<f64> {
    if cfg.algorithm.r0 > 0.0 {
        return Ok(cfg.algorithm.r0);
    }
    let opt = full_population_optimum(data, set, cfg)?;
    let dist0 = vecs::norm(&opt.x_star); // x1 is the origin
    Ok((dist0 * dist0).max(f64::MIN_POSITIVE))
}

fn resolve_rate(
    cfg: &ExperimentConfig,
    data: &SyntheticData,
    set: &FeasibleSet,
    g_bound: f64,
    tau: u32,
) -> Result<RateSpec> {
    let n = cfg.problem.n;
    let open = matches!(cfg.network, NetworkSection::Open { .. });
    let spec = match cfg.algorithm.schedule {
        ScheduleName::Effective => {
            let mode = if open { RateMode::Open } else { RateMode::Static };
            RateSpec::Constant(runners::effective_rate(cfg.algorithm.gamma_eff, n, mode))
        }
        ScheduleName::Theorem1 => {
            if open {
                return Err(Error::Config(
                    "the theorem-1 constant rate needs the composition history in \
                     advance; use known_squares, global_clock or cardinality on \
                     open networks"
                        .into(),
                ));
            }
            RateSpec::Schedule(LearningRateSchedule::ConstantTheorem1 {
                r0: resolve_r0(cfg, data, set)?,
                n_rms: n as f64,
                g: g_bound,
                tau,
                horizon: cfg.run.horizon as u64,
            })
        }
        ScheduleName::KnownSquares => RateSpec::Schedule(LearningRateSchedule::KnownSquares {
            r0: resolve_r0(cfg, data, set)?,
            tau,
        }),
        ScheduleName::GlobalClock => RateSpec::Schedule(LearningRateSchedule::GlobalClock {
            r0: resolve_r0(cfg, data, set)?,
            n_max: n as u64,
            tau,
        }),
        ScheduleName::Cardinality => RateSpec::Schedule(LearningRateSchedule::Cardinality {
            r0: resolve_r0(cfg, data, set)?,
            g: g_bound,
            tau,
            n_max: n as u64,
        }),
    };
    Ok(spec)
}

fn constant_of(rate: &RateSpec) -> Option<f64> {
    match rate {
        RateSpec::Constant(g) => Some(*g),
        RateSpec::Schedule(s) if s.is_constant() => s.value(&LrContext::default()).ok(),
        RateSpec::Schedule(_) => None,
    }
}

/// Run the configured experiment. `extra` sees every step view after the
/// metrics collector does; `log_deliveries` keeps the per-delivery log
/// (open DAERON runs only).
pub fn execute<F>(
    cfg: &ExperimentConfig,
    log_deliveries: bool,
    mut extra: F,
) -> Result<ExperimentOutcome>
where
    F: FnMut(&StepView) -> Result<()>,
{
    let data = lad::generate_synthetic(&cfg.problem, cfg.run.seed)?;
    let g_bound = problem_g_bound(&data)?;
    let auto_r = oracle::auto_radius(&objectives(&data), cfg.problem.d);
    let set = cfg.feasible_set(auto_r);
    let radius = match &set {
        FeasibleSet::Ball { radius, .. } => *radius,
        _ => auto_r,
    };
    let tau = resolve_tau(cfg)?;
    let rate = resolve_rate(cfg, &data, &set, g_bound, tau)?;
    let eta_constant = constant_of(&rate);
    let x1 = vec![0.0; cfg.problem.d];

    let mut collector = MetricsCollector::new(
        &data.datasets,
        set.clone(),
        CollectorConfig {
            checkpoint_every: cfg.effective_checkpoint_every(),
            inst_every_step: cfg.run.track_inst_every_step,
            track_run_loss: cfg.run.track_run_loss,
            track_avg_run: cfg.run.track_avg_run,
            track_bound: cfg.run.track_bound,
            g_bound,
            tau,
            x1: x1.clone(),
            oracle: OracleParams {
                tol: cfg.run.oracle_tol,
                budget: cfg.run.oracle_budget,
                radius_hint: radius,
                x0: None,
            },
        },
    );
    let mut evolution: Vec<EvolutionRow> = Vec::new();
    let mut n_sum = 0u64;
    let mut observe = |view: &StepView| -> Result<()> {
        collector.observe(view)?;
        n_sum += view.active.len() as u64;
        evolution.push(EvolutionRow {
            t: view.t as u64 + 1,
            n_t: view.active.len() as u64,
            n_cum: n_sum - view.lost.len() as u64,
            arrivals: view.arrivals,
            departures: view.departures,
            max_delay: view.max_delay,
            lost_records: view.lost.len() as u64,
        });
        extra(view)
    };

    let mut deliveries = Vec::new();
    let summary = match (&cfg.network, cfg.algorithm.name) {
        (NetworkSection::Static { topology }, AlgorithmName::Daeron) => {
            let gamma = constant_of(&rate).ok_or_else(|| {
                Error::Config(
                    "static runs need a constant rate; pick the effective or \
                     theorem1 schedule"
                        .into(),
                )
            })?;
            runners::run_daeron_static(
                &data.datasets,
                &StaticDaeronConfig {
                    topology: topology.clone(),
                    gamma,
                    horizon: cfg.run.horizon,
                    x1: x1.clone(),
                    set: set.clone(),
                    ledger_mode: cfg.ledger_mode(tau),
                    track_virtual: cfg.run.track_virtual,
                },
                &mut observe,
            )?
        }
        (NetworkSection::Static { topology }, AlgorithmName::Dgd) => runners::run_dgd_static(
            &data.datasets,
            topology,
            cfg.algorithm.gamma_eff,
            cfg.run.horizon,
            &x1,
            &mut observe,
        )?,
        (
            NetworkSection::Open {
                k_period,
                p,
                initial_active_fraction,
            },
            AlgorithmName::Daeron,
        ) => {
            let evo = OpenEvolution {
                k_period: *k_period,
                p: *p,
                initial_active_fraction: *initial_active_fraction,
                universe: cfg.problem.n,
            };
            let (summary, log) = runners::run_daeron_open(
                &data.datasets,
                &OpenDaeronConfig {
                    evolution: evo,
                    rate,
                    horizon: cfg.run.horizon,
                    x1: x1.clone(),
                    set: set.clone(),
                    ledger_mode: cfg.ledger_mode(tau),
                    tau,
                    track_virtual: cfg.run.track_virtual,
                    log_deliveries,
                },
                cfg.run.seed,
                &mut observe,
            )?;
            deliveries = log.deliveries;
            summary
        }
        (
            NetworkSection::Open {
                k_period,
                p,
                initial_active_fraction,
            },
            AlgorithmName::Dgd,
        ) => runners::run_dgd_open(
            &data.datasets,
            &OpenDgdConfig {
                evolution: OpenEvolution {
                    k_period: *k_period,
                    p: *p,
                    initial_active_fraction: *initial_active_fraction,
                    universe: cfg.problem.n,
                },
                gamma_eff: cfg.algorithm.gamma_eff,
                horizon: cfg.run.horizon,
                x1: x1.clone(),
            },
            cfg.run.seed,
            &mut observe,
        )?,
    };

    let metrics = collector.finish();
    Ok(ExperimentOutcome {
        metrics,
        evolution,
        summary,
        deliveries,
        g_bound,
        radius,
        tau,
        eta_constant,
        data,
    })
}

fn write_evolution_csv(rows: &[EvolutionRow], path: &Path) -> Result<()> {
    let mut s = String::from(EVOLUTION_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!(
            "{},{},{},{},{},{},{}\n",
            r.t, r.n_t, r.n_cum, r.arrivals, r.departures, r.max_delay, r.lost_records
        ));
    }
    fs::write(path, s)?;
    Ok(())
}

/// One-line human summary of a finished run.
pub fn summary_line(cfg: &ExperimentConfig, out: &ExperimentOutcome) -> String {
    let last = out.metrics.rows.last();
    let fin = |get: fn(&metrics::MetricsRow) -> f64| {
        out.metrics
            .rows
            .iter()
            .rev()
            .map(get)
            .find(|v| v.is_finite())
            .map(|v| format!("{v:.6}"))
            .unwrap_or_else(|| "-".into())
    };
    format!(
        "T={} N_T={} tau={} lost={} max_delay={} warnings={} inst_gap={} run_loss={}",
        cfg.run.horizon,
        last.map(|r| r.n_cum).unwrap_or(0),
        out.tau,
        out.summary.lost_records,
        out.summary.max_delay,
        out.summary.empty_init_warnings,
        fin(|r| r.inst_gap),
        fin(|r| r.run_loss),
    )
}

/// Execute and write the artifact set: metrics.csv, evolution.csv,
/// dataset.txt, config.ini.
pub fn run_experiment(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ExperimentOutcome> {
    fs::create_dir_all(out_dir)?;
    let outcome = execute(cfg, false, |_| Ok(()))?;
    let mut buf = Vec::new();
    outcome.metrics.write_csv(&mut buf)?;
    fs::write(out_dir.join("metrics.csv"), buf)?;
    write_evolution_csv(&outcome.evolution, &out_dir.join("evolution.csv"))?;
    fs::write(out_dir.join("dataset.txt"), lad::dump_datasets(&outcome.data))?;
    fs::write(out_dir.join("config.ini"), cfg.emit())?;
    Ok(outcome)
}

// ---------------------------------------------------------------------------
// sweep

/// Run the gamma' grid, `seeds.len()` runs per point, one thread per grid
/// point. Per point a seed-averaged metrics CSV (nan-aware column means)
/// lands in `out_dir`.
pub fn run_sweep(
    base: &ExperimentConfig,
    gammas: &[f64],
    seeds: &[u64],
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if gammas.is_empty() || seeds.is_empty() {
        return Err(Error::Config("sweep needs at least one rate and one seed".into()));
    }
    fs::create_dir_all(out_dir)?;
    let mut paths = Vec::new();
    let results: Vec<Result<MetricsLog>> = std::thread::scope(|scope| {
        let handles: Vec<_> = gammas
            .iter()
            .map(|&g| {
                scope.spawn(move || -> Result<MetricsLog> {
                    let mut logs = Vec::new();
                    for &seed in seeds {
                        let mut cfg = base.clone();
                        cfg.algorithm.gamma_eff = g;
                        cfg.run.seed = seed;
                        logs.push(execute(&cfg, false, |_| Ok(()))?.metrics);
                    }
                    average_logs(&logs)
                })
            })
            .collect();
        handles.into_iter().map(|h| h.join().expect("sweep thread panicked")).collect()
    });
    for (&g, res) in gammas.iter().zip(results) {
        let log = res?;
        let path = out_dir.join(format!("sweep_gamma_{g}.csv"));
        let mut buf = Vec::new();
        log.write_csv(&mut buf)?;
        fs::write(&path, buf)?;
        paths.push(path);
    }
    Ok(paths)
}

fn nan_mean(vals: impl Iterator<Item = f64>) -> f64 {
    let (mut s, mut k) = (0.0, 0usize);
    for v in vals {
        if v.is_finite() {
            s += v;
            k += 1;
        }
    }
    if k == 0 {
        f64::NAN
    } else {
        s / k as f64
    }
}

/// Column-wise mean of per-seed logs; rows are aligned by index and must
/// share the `t` column (same horizon and checkpoint cadence).
fn average_logs(logs: &[MetricsLog]) -> Result<MetricsLog> {
    let first = logs.first().ok_or(Error::EmptyHistory)?;
    let rows = first.rows.len();
    if logs.iter().any(|l| l.rows.len() != rows) {
        return Err(Error::Schema("sweep logs have mismatched row counts".into()));
    }
    let mut out = MetricsLog::default();
    for i in 0..rows {
        let t = first.rows[i].t;
        if logs.iter().any(|l| l.rows[i].t != t) {
            return Err(Error::Schema("sweep logs have mismatched checkpoints".into()));
        }
        let m = |get: fn(&metrics::MetricsRow) -> f64| nan_mean(logs.iter().map(|l| get(&l.rows[i])));
        let mu = |get: fn(&metrics::MetricsRow) -> u64| {
            (logs.iter().map(|l| get(&l.rows[i]) as f64).sum::<f64>() / logs.len() as f64).round()
                as u64
        };
        out.rows.push(metrics::MetricsRow {
            t,
            n_t: mu(|r| r.n_t),
            n_cum: mu(|r| r.n_cum),
            inst_gap: m(|r| r.inst_gap),
            run_loss: m(|r| r.run_loss),
            avg_run_loss: m(|r| r.avg_run_loss),
            consensus_gap: m(|r| r.consensus_gap),
            bound: m(|r| r.bound),
            lost_records: mu(|r| r.lost_records),
            eta: m(|r| r.eta),
        });
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// verify

#[derive(Debug, Default)]
pub struct VerifyReport {
    /// Human-readable pass lines, one per check.
    pub passed: Vec<String>,
    /// Invariant violations; non-empty means exit code 2.
    pub violations: Vec<String>,
}

impl VerifyReport {
    pub fn ok(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Invariant suite over one configured run: deterministic replay, delay
/// bounds, the consensus-gap cap, and theorem-bound domination where the
/// run tracks it. Cardinality-order violations in the delivery log are
/// reported but do not fail the suite (arrival copies can reorder them
/// legitimately).
pub fn verify(cfg: &ExperimentConfig) -> Result<VerifyReport> {
    let mut report = VerifyReport::default();
    let mut cfg = cfg.clone();
    cfg.run.track_virtual = true;

    let g_probe = problem_g_bound(&lad::generate_synthetic(&cfg.problem, cfg.run.seed)?)?;
    let mut consensus_bad = 0usize;
    let mut consensus_checked = 0usize;
    let outcome = execute(&cfg, true, |view| {
        if let (Some(gap), Some(eta)) = (view.consensus_gap, view.eta) {
            // The cap assumes no lost mass and real ledger initializations.
            if view.lost.is_empty() && view.empty_init_warnings == 0 {
                let t = view.t as usize;
                let lo = t.saturating_sub(cfg.effective_tau().max(1) as usize);
                let window: u64 = view.n_history[lo..t].iter().sum();
                let cap = eta * g_probe * window as f64;
                consensus_checked += 1;
                if gap > cap + 1e-9 {
                    consensus_bad += 1;
                }
            }
        }
        Ok(())
    })?;

    // deterministic replay
    let replay = execute(&cfg, true, |_| Ok(()))?;
    let csv_of = |log: &MetricsLog| -> Result<Vec<u8>> {
        let mut b = Vec::new();
        log.write_csv(&mut b)?;
        Ok(b)
    };
    if csv_of(&outcome.metrics)? == csv_of(&replay.metrics)?
        && outcome.evolution == replay.evolution
    {
        report.passed.push("determinism: replay reproduces both CSVs".into());
    } else {
        report.violations.push("determinism: replay diverged".into());
    }

    if outcome.summary.delay_violations == 0 {
        report.passed.push(format!(
            "delays: max observed {} within tau = {}",
            outcome.summary.max_delay, outcome.tau
        ));
    } else {
        report.violations.push(format!(
            "delays: {} deliveries beyond the asserted bound tau = {}",
            outcome.summary.delay_violations, outcome.tau
        ));
    }

    if consensus_checked > 0 {
        if consensus_bad == 0 {
            report.passed.push(format!(
                "consensus: gap within eta*G*window at all {consensus_checked} checked steps"
            ));
        } else {
            report.violations.push(format!(
                "consensus: cap exceeded at {consensus_bad} of {consensus_checked} steps"
            ));
        }
    }

    let dominated: Vec<&metrics::MetricsRow> = outcome
        .metrics
        .rows
        .iter()
        .filter(|r| r.run_loss.is_finite() && r.bound.is_finite())
        .collect();
    if !dominated.is_empty() {
        let slack = 2.0 * cfg.run.oracle_tol;
        let bad = dominated
            .iter()
            .filter(|r| r.run_loss > r.bound + slack)
            .count();
        if bad == 0 {
            report.passed.push(format!(
                "bound: running loss dominated at all {} checkpoints",
                dominated.len()
            ));
        } else {
            report.violations.push(format!(
                "bound: running loss above the theorem bound at {bad} of {} checkpoints",
                dominated.len()
            ));
        }
    }

    if !outcome.deliveries.is_empty() {
        let v = metrics::check_card_order(&outcome.deliveries);
        report.passed.push(format!(
            "card-order: {} of {} deliveries out of cardinality order (informational)",
            v.len(),
            outcome.deliveries.len()
        ));
    }

    Ok(report)
}
