//! Experiment configuration: a line-oriented `key = value` format with
//! `[section]` headers and `#` comments. Unknown keys are rejected and
//! every error carries its line number. Defaults reproduce the reference
//! open-network experiment (n=64, m=200, d=20, K=20, p=0.05, gamma'=0.005).

use std::fmt::Write as _;

use crate::dual::{FeasibleSet, LedgerMode};
use crate::error::{Error, Result};
use crate::lad::SyntheticSpec;
use crate::network::StaticTopology;

#[derive(Debug, Clone, PartialEq)]
pub enum NetworkSection {
    Static {
        topology: StaticTopology,
    },
    Open {
        k_period: u32,
        p: f64,
        initial_active_fraction: f64,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AlgorithmName {
    Daeron,
    Dgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleName {
    /// Constant per-record rate derived from gamma_eff.
    Effective,
    Theorem1,
    KnownSquares,
    GlobalClock,
    Cardinality,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AlgorithmSection {
    pub name: AlgorithmName,
    pub schedule: ScheduleName,
    /// Effective rate gamma' (per-record rate is gamma'/n or 2 gamma'/n).
    pub gamma_eff: f64,
    /// r0 for the adaptive schedules; 0 = auto (dist0^2 for Theorem1).
    pub r0: f64,
    pub ledger_mode: LedgerModeName,
    /// Compact-mode buffer horizon; 0 = auto (tau + 1).
    pub compact_horizon: u32,
    /// Ball radius of the feasible set; 0 = auto from the data scale.
    pub radius: f64,
    /// Asserted delay bound; 0 = auto (diameter static, 2*K open).
    pub tau: u32,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LedgerModeName {
    Full,
    Compact,
    AgentSums,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunSection {
    pub horizon: u32,
    pub seed: u64,
    /// 0 = auto: max(1, T/500).
    pub checkpoint_every: u32,
    pub oracle_budget: usize,
    pub oracle_tol: f64,
    pub track_inst_every_step: bool,
    pub track_avg_run: bool,
    pub track_run_loss: bool,
    pub track_bound: bool,
    pub track_virtual: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub problem: SyntheticSpec,
    pub network: NetworkSection,
    pub algorithm: AlgorithmSection,
    pub run: RunSection,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            problem: SyntheticSpec::default(),
            network: NetworkSection::Open {
                k_period: 20,
                p: 0.05,
                initial_active_fraction: 0.5,
            },
            algorithm: AlgorithmSection {
                name: AlgorithmName::Daeron,
                schedule: ScheduleName::Effective,
                gamma_eff: 0.005,
                r0: 0.0,
                ledger_mode: LedgerModeName::Compact,
                compact_horizon: 0,
                radius: 0.0,
                tau: 0,
            },
            run: RunSection {
                horizon: 2000,
                seed: 0,
                checkpoint_every: 0,
                oracle_budget: 200_000,
                oracle_tol: 1e-3,
                track_inst_every_step: false,
                track_avg_run: false,
                track_run_loss: true,
                track_bound: false,
                track_virtual: false,
            },
        }
    }
}

impl ExperimentConfig {
    pub fn effective_checkpoint_every(&self) -> u32 {
        if self.run.checkpoint_every > 0 {
            self.run.checkpoint_every
        } else {
            1.max(self.run.horizon / 500)
        }
    }

    pub fn effective_tau(&self) -> u32 {
        if self.algorithm.tau > 0 {
            return self.algorithm.tau;
        }
        match &self.network {
            NetworkSection::Static { .. } => 0, // resolved to the diameter later
            NetworkSection::Open { k_period, .. } => 2 * k_period,
        }
    }

    pub fn ledger_mode(&self, tau: u32) -> LedgerMode {
        match self.algorithm.ledger_mode {
            LedgerModeName::Full => LedgerMode::Full,
            LedgerModeName::AgentSums => LedgerMode::AgentSums,
            LedgerModeName::Compact => {
                let h = if self.algorithm.compact_horizon > 0 {
                    self.algorithm.compact_horizon
                } else {
                    tau + 1
                };
                LedgerMode::Compact { horizon: h }
            }
        }
    }

    pub fn feasible_set(&self, auto_radius: f64) -> FeasibleSet {
        let r = if self.algorithm.radius > 0.0 {
            self.algorithm.radius
        } else {
            auto_radius
        };
        FeasibleSet::Ball {
            center: vec![0.0; self.problem.d],
            radius: r,
        }
    }

    /// Serialize; `parse_config(emit())` round-trips exactly.
    pub fn emit(&self) -> String {
        let mut s = String::new();
        let p = &self.problem;
        let _ = writeln!(s, "[problem]");
        let _ = writeln!(s, "n = {}", p.n);
        let _ = writeln!(s, "m = {}", p.m);
        let _ = writeln!(s, "d = {}", p.d);
        let _ = writeln!(s, "theta_half_width = {}", p.theta_half_width);
        let _ = writeln!(s, "local_noise_sd = {}", p.local_noise_sd);
        let _ = writeln!(s, "obs_noise_sd = {}", p.obs_noise_sd);
        let _ = writeln!(s, "corrupt_max = {}", p.corrupt_max);
        let _ = writeln!(s, "corrupt_sd = {}", p.corrupt_sd);
        let _ = writeln!(s, "\n[network]");
        match &self.network {
            NetworkSection::Static { topology } => {
                let _ = writeln!(s, "kind = static");
                match topology {
                    StaticTopology::Grid { rows, cols } => {
                        let _ = writeln!(s, "topology = grid");
                        let _ = writeln!(s, "rows = {rows}");
                        let _ = writeln!(s, "cols = {cols}");
                    }
                    StaticTopology::Path { n } => {
                        let _ = writeln!(s, "topology = path");
                        let _ = writeln!(s, "nodes = {n}");
                    }
                    StaticTopology::Complete { n } => {
                        let _ = writeln!(s, "topology = complete");
                        let _ = writeln!(s, "nodes = {n}");
                    }
                    StaticTopology::Custom { .. } => unreachable!("not emitted"),
                }
            }
            NetworkSection::Open {
                k_period,
                p,
                initial_active_fraction,
            } => {
                let _ = writeln!(s, "kind = open");
                let _ = writeln!(s, "k = {k_period}");
                let _ = writeln!(s, "p = {p}");
                let _ = writeln!(s, "initial_active_fraction = {initial_active_fraction}");
            }
        }
        let a = &self.algorithm;
        let _ = writeln!(s, "\n[algorithm]");
        let _ = writeln!(
            s,
            "name = {}",
            match a.name {
                AlgorithmName::Daeron => "daeron",
                AlgorithmName::Dgd => "dgd",
            }
        );
        let _ = writeln!(
            s,
            "schedule = {}",
            match a.schedule {
                ScheduleName::Effective => "effective",
                ScheduleName::Theorem1 => "theorem1",
                ScheduleName::KnownSquares => "known-squares",
                ScheduleName::GlobalClock => "global-clock",
                ScheduleName::Cardinality => "cardinality",
            }
        );
        let _ = writeln!(s, "gamma_eff = {}", a.gamma_eff);
        let _ = writeln!(s, "r0 = {}", a.r0);
        let _ = writeln!(
            s,
            "ledger = {}",
            match a.ledger_mode {
                LedgerModeName::Full => "full",
                LedgerModeName::Compact => "compact",
                LedgerModeName::AgentSums => "agent-sums",
            }
        );
        let _ = writeln!(s, "compact_horizon = {}", a.compact_horizon);
        let _ = writeln!(s, "radius = {}", a.radius);
        let _ = writeln!(s, "tau = {}", a.tau);
        let r = &self.run;
        let _ = writeln!(s, "\n[run]");
        let _ = writeln!(s, "horizon = {}", r.horizon);
        let _ = writeln!(s, "seed = {}", r.seed);
        let _ = writeln!(s, "checkpoint_every = {}", r.checkpoint_every);
        let _ = writeln!(s, "oracle_budget = {}", r.oracle_budget);
        let _ = writeln!(s, "oracle_tol = {}", r.oracle_tol);
        let _ = writeln!(s, "track_inst_every_step = {}", r.track_inst_every_step);
        let _ = writeln!(s, "track_avg_run = {}", r.track_avg_run);
        let _ = writeln!(s, "track_run_loss = {}", r.track_run_loss);
        let _ = writeln!(s, "track_bound = {}", r.track_bound);
        let _ = writeln!(s, "track_virtual = {}", r.track_virtual);
        s
    }
}

fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::ConfigParse {
        line,
        message: msg.into(),
    }
}

struct RawTopology {
    kind: Option<String>,
    topology: Option<String>,
    rows: usize,
    cols: usize,
    nodes: usize,
    k: u32,
    p: f64,
    frac: f64,
    p_line: usize,
}

pub fn parse_config(text: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    let mut raw = RawTopology {
        kind: None,
        topology: None,
        rows: 8,
        cols: 8,
        nodes: 64,
        k: 20,
        p: 0.05,
        frac: 0.5,
        p_line: 0,
    };
    let mut section = String::new();

    for (idx, line_raw) in text.lines().enumerate() {
        let lineno = idx + 1;
        let line = match line_raw.find('#') {
            Some(pos) => &line_raw[..pos],
            None => line_raw,
        }
        .trim();
        if line.is_empty() {
            continue;
        }
        if let Some(name) = line.strip_prefix('[') {
            let name = name
                .strip_suffix(']')
                .ok_or_else(|| parse_err(lineno, "unterminated section header"))?;
            match name {
                "problem" | "network" | "algorithm" | "run" => section = name.to_string(),
                other => return Err(parse_err(lineno, format!("unknown section [{other}]"))),
            }
            continue;
        }
        let (key, value) = line
            .split_once('=')
            .ok_or_else(|| parse_err(lineno, "expected `key = value`"))?;
        let (key, value) = (key.trim(), value.trim());
        if section.is_empty() {
            return Err(parse_err(lineno, format!("key `{key}` outside any section")));
        }

        macro_rules! num {
            ($ty:ty) => {
                value.parse::<$ty>().map_err(|_| {
                    parse_err(
                        lineno,
                        format!("[{section}].{key}: cannot parse `{value}`"),
                    )
                })?
            };
        }
        let flag = || -> Result<bool> {
            match value {
                "true" | "1" | "yes" => Ok(true),
                "false" | "0" | "no" => Ok(false),
                _ => Err(parse_err(
                    lineno,
                    format!("[{section}].{key}: expected a boolean, got `{value}`"),
                )),
            }
        };

        match (section.as_str(), key) {
            ("problem", "n") => cfg.problem.n = num!(usize),
            ("problem", "m") => cfg.problem.m = num!(usize),
            ("problem", "d") => cfg.problem.d = num!(usize),
            ("problem", "theta_half_width") => cfg.problem.theta_half_width = num!(f64),
            ("problem", "local_noise_sd") => cfg.problem.local_noise_sd = num!(f64),
            ("problem", "obs_noise_sd") => cfg.problem.obs_noise_sd = num!(f64),
            ("problem", "corrupt_max") => cfg.problem.corrupt_max = num!(usize),
            ("problem", "corrupt_sd") => cfg.problem.corrupt_sd = num!(f64),
            ("network", "kind") => raw.kind = Some(value.to_string()),
            ("network", "topology") => raw.topology = Some(value.to_string()),
            ("network", "rows") => raw.rows = num!(usize),
            ("network", "cols") => raw.cols = num!(usize),
            ("network", "nodes") => raw.nodes = num!(usize),
            ("network", "k") => raw.k = num!(u32),
            ("network", "p") => {
                raw.p = num!(f64);
                raw.p_line = lineno;
            }
            ("network", "initial_active_fraction") => raw.frac = num!(f64),
            ("algorithm", "name") => {
                cfg.algorithm.name = match value {
                    "daeron" => AlgorithmName::Daeron,
                    "dgd" => AlgorithmName::Dgd,
                    _ => {
                        return Err(parse_err(
                            lineno,
                            format!("[algorithm].name: unknown algorithm `{value}`"),
                        ))
                    }
                }
            }
            ("algorithm", "schedule") => {
                cfg.algorithm.schedule = match value {
                    "effective" => ScheduleName::Effective,
                    "theorem1" => ScheduleName::Theorem1,
                    "known-squares" => ScheduleName::KnownSquares,
                    "global-clock" => ScheduleName::GlobalClock,
                    "cardinality" => ScheduleName::Cardinality,
                    _ => {
                        return Err(parse_err(
                            lineno,
                            format!("[algorithm].schedule: unknown schedule `{value}`"),
                        ))
                    }
                }
            }
            ("algorithm", "gamma_eff") => cfg.algorithm.gamma_eff = num!(f64),
            ("algorithm", "r0") => cfg.algorithm.r0 = num!(f64),
            ("algorithm", "ledger") => {
                cfg.algorithm.ledger_mode = match value {
                    "full" => LedgerModeName::Full,
                    "compact" => LedgerModeName::Compact,
                    "agent-sums" => LedgerModeName::AgentSums,
                    _ => {
                        return Err(parse_err(
                            lineno,
                            format!("[algorithm].ledger: unknown ledger mode `{value}`"),
                        ))
                    }
                }
            }
            ("algorithm", "compact_horizon") => cfg.algorithm.compact_horizon = num!(u32),
            ("algorithm", "radius") => cfg.algorithm.radius = num!(f64),
            ("algorithm", "tau") => cfg.algorithm.tau = num!(u32),
            ("run", "horizon") => cfg.run.horizon = num!(u32),
            ("run", "seed") => cfg.run.seed = num!(u64),
            ("run", "checkpoint_every") => cfg.run.checkpoint_every = num!(u32),
            ("run", "oracle_budget") => cfg.run.oracle_budget = num!(usize),
            ("run", "oracle_tol") => cfg.run.oracle_tol = num!(f64),
            ("run", "track_inst_every_step") => cfg.run.track_inst_every_step = flag()?,
            ("run", "track_avg_run") => cfg.run.track_avg_run = flag()?,
            ("run", "track_run_loss") => cfg.run.track_run_loss = flag()?,
            ("run", "track_bound") => cfg.run.track_bound = flag()?,
            ("run", "track_virtual") => cfg.run.track_virtual = flag()?,
            (_, key) => {
                return Err(parse_err(
                    lineno,
                    format!("unknown key `{key}` in section [{section}]"),
                ))
            }
        }
    }

    // assemble the network section
    let kind = raw.kind.as_deref().unwrap_or("open");
    cfg.network = match kind {
        "open" => {
            if !(0.0..=1.0).contains(&raw.p) {
                return Err(parse_err(
                    raw.p_line,
                    format!("[network].p: must be in [0, 1], got {}", raw.p),
                ));
            }
            NetworkSection::Open {
                k_period: raw.k,
                p: raw.p,
                initial_active_fraction: raw.frac,
            }
        }
        "static" => {
            let topology = match raw.topology.as_deref().unwrap_or("grid") {
                "grid" => StaticTopology::Grid {
                    rows: raw.rows,
                    cols: raw.cols,
                },
                "path" => StaticTopology::Path { n: raw.nodes },
                "complete" => StaticTopology::Complete { n: raw.nodes },
                other => {
                    return Err(Error::Config(format!(
                        "[network].topology: unknown topology `{other}`"
                    )))
                }
            };
            NetworkSection::Static { topology }
        }
        other => {
            return Err(Error::Config(format!(
                "[network].kind: expected `static` or `open`, got `{other}`"
            )))
        }
    };
    validate(&cfg)?;
    Ok(cfg)
}

fn validate(cfg: &ExperimentConfig) -> Result<()> {
    let err = |m: String| Err(Error::Config(m));
    if cfg.problem.n == 0 || cfg.problem.m == 0 || cfg.problem.d == 0 {
        return err("[problem]: n, m, d must be positive".into());
    }
    if cfg.problem.corrupt_max > cfg.problem.m {
        return err(format!(
            "[problem].corrupt_max: {} exceeds m = {}",
            cfg.problem.corrupt_max, cfg.problem.m
        ));
    }
    match &cfg.network {
        NetworkSection::Static { topology } => {
            if topology.n() == 0 {
                return err("[network]: empty topology".into());
            }
            if topology.n() != cfg.problem.n {
                return err(format!(
                    "[network]: topology has {} nodes but [problem].n = {}",
                    topology.n(),
                    cfg.problem.n
                ));
            }
        }
        NetworkSection::Open {
            k_period,
            initial_active_fraction,
            ..
        } => {
            if *k_period == 0 {
                return err("[network].k: must be positive".into());
            }
            if !(0.0..=1.0).contains(initial_active_fraction) {
                return err(format!(
                    "[network].initial_active_fraction: must be in [0, 1], got {initial_active_fraction}"
                ));
            }
        }
    }
    if cfg.algorithm.gamma_eff <= 0.0 {
        return err("[algorithm].gamma_eff: must be positive".into());
    }
    if cfg.algorithm.name == AlgorithmName::Dgd
        && cfg.algorithm.schedule != ScheduleName::Effective
    {
        return err("[algorithm]: dgd only supports the effective-rate schedule".into());
    }
    if cfg.run.horizon == 0 {
        return err("[run].horizon: must be positive".into());
    }
    if cfg.run.oracle_tol <= 0.0 {
        return err("[run].oracle_tol: must be positive".into());
    }
    Ok(())
}

/// Named experiment recipes.
pub const PRESETS: &[&str] = &[
    "static-daeron",
    "static-dgd",
    "open-daeron",
    "open-dgd",
    "closed-bound-check",
];

pub fn preset(name: &str) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::default();
    match name {
        // static 8x8 grid comparison at gamma' = 0.005
        "static-daeron" | "static-dgd" => {
            cfg.network = NetworkSection::Static {
                topology: StaticTopology::Grid { rows: 8, cols: 8 },
            };
            cfg.run.horizon = 5000;
            cfg.run.track_run_loss = false;
            if name == "static-dgd" {
                cfg.algorithm.name = AlgorithmName::Dgd;
            }
        }
        // open network, half of 64 agents initially active
        "open-daeron" | "open-dgd" => {
            cfg.run.track_inst_every_step = true;
            cfg.run.track_avg_run = true;
            if name == "open-dgd" {
                cfg.algorithm.name = AlgorithmName::Dgd;
            }
        }
        // small closed network where the Theorem-1 bound must dominate
        "closed-bound-check" => {
            cfg.problem.n = 9;
            cfg.problem.d = 5;
            cfg.problem.m = 50;
            cfg.problem.corrupt_max = 30;
            cfg.network = NetworkSection::Static {
                topology: StaticTopology::Grid { rows: 3, cols: 3 },
            };
            cfg.algorithm.schedule = ScheduleName::Theorem1;
            cfg.algorithm.ledger_mode = LedgerModeName::Full;
            cfg.run.horizon = 4000;
            cfg.run.track_bound = true;
            cfg.run.track_virtual = true;
        }
        other => {
            return Err(Error::Config(format!(
                "unknown preset `{other}` (available: {})",
                PRESETS.join(", ")
            )))
        }
    }
    Ok(cfg)
}
