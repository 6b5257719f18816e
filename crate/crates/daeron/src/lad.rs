//! Decentralized least-absolute-deviation regression benchmark: synthetic
//! data generation, objective and subgradient evaluation, and a Lipschitz
//! constant estimate.

use std::fmt::Write as _;

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng;
use crate::vecs;

#[derive(Debug, Clone, PartialEq)]
pub struct LadSample {
    pub a: Vec<f64>,
    pub b: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LocalDataset {
    pub agent: u32,
    pub samples: Vec<LadSample>,
    /// Per-sample corruption flags (step 4 of the generator).
    pub corrupted: Vec<bool>,
}

impl LocalDataset {
    pub fn dim(&self) -> usize {
        self.samples.first().map_or(0, |s| s.a.len())
    }

    pub fn corrupted_count(&self) -> usize {
        self.corrupted.iter().filter(|c| **c).count()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticSpec {
    pub n: usize,
    pub m: usize,
    pub d: usize,
    pub theta_half_width: f64,
    pub local_noise_sd: f64,
    pub obs_noise_sd: f64,
    pub corrupt_max: usize,
    pub corrupt_sd: f64,
}

impl Default for SyntheticSpec {
    fn default() -> Self {
        SyntheticSpec {
            n: 64,
            m: 200,
            d: 20,
            theta_half_width: 5.0,
            local_noise_sd: 1.0,
            obs_noise_sd: 1.0,
            corrupt_max: 120,
            corrupt_sd: 10.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub theta: Vec<f64>,
    pub theta_locals: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub datasets: Vec<LocalDataset>,
    pub truth: GroundTruth,
    pub seed: u64,
}

/// Four-step generator: uniform ground truth on the box, Gaussian local
/// perturbations, Gaussian features with noisy responses, then a random
/// number of responses per agent replaced by pure-noise draws.
pub fn generate_synthetic(spec: &SyntheticSpec, seed: u64) -> Result<SyntheticData> {
    if spec.corrupt_max > spec.m {
        return Err(Error::Config(format!(
            "corrupt_max ({}) exceeds samples per agent ({})",
            spec.corrupt_max, spec.m
        )));
    }
    if spec.theta_half_width <= 0.0 || spec.local_noise_sd < 0.0 || spec.obs_noise_sd < 0.0 {
        return Err(Error::Config("invalid noise parameters".into()));
    }
    let mut data_rng = rng::stream(seed, rng::STREAM_DATA);
    let mut corrupt_rng = rng::stream(seed, rng::STREAM_CORRUPTION);

    let w = spec.theta_half_width;
    let theta: Vec<f64> = (0..spec.d).map(|_| data_rng.gen_range(-w..=w)).collect();

    let mut theta_locals = Vec::with_capacity(spec.n);
    let mut datasets = Vec::with_capacity(spec.n);
    for agent in 0..spec.n {
        let theta_i: Vec<f64> = theta
            .iter()
            .map(|t| t + spec.local_noise_sd * rng::standard_normal(&mut data_rng))
            .collect();
        let mut samples = Vec::with_capacity(spec.m);
        for _ in 0..spec.m {
            let a: Vec<f64> = (0..spec.d)
                .map(|_| rng::standard_normal(&mut data_rng))
                .collect();
            let b = vecs::dot(&a, &theta_i) + spec.obs_noise_sd * rng::standard_normal(&mut data_rng);
            samples.push(LadSample { a, b });
        }
        let mut corrupted = vec![false; spec.m];
        if spec.corrupt_max > 0 {
            let count = corrupt_rng.gen_range(0..=spec.corrupt_max);
            // partial Fisher-Yates for a without-replacement index sample
            let mut idx: Vec<usize> = (0..spec.m).collect();
            for k in 0..count {
                let j = corrupt_rng.gen_range(k..spec.m);
                idx.swap(k, j);
            }
            for &i in &idx[..count] {
                samples[i].b = spec.corrupt_sd * rng::standard_normal(&mut corrupt_rng);
                corrupted[i] = true;
            }
        }
        theta_locals.push(theta_i);
        datasets.push(LocalDataset {
            agent: agent as u32,
            samples,
            corrupted,
        });
    }
    Ok(SyntheticData {
        datasets,
        truth: GroundTruth {
            theta,
            theta_locals,
        },
        seed,
    })
}

/// (1/m) * sum_j |a_j . x - b_j|
pub fn lad_value(ds: &LocalDataset, x: &[f64]) -> f64 {
    let m = ds.samples.len() as f64;
    ds.samples
        .iter()
        .map(|s| (vecs::dot(&s.a, x) - s.b).abs())
        .sum::<f64>()
        / m
}

/// Minimal-norm subgradient: (1/m) * sum_j sign(a_j . x - b_j) a_j with
/// sign(0) = 0.
pub fn lad_subgradient(ds: &LocalDataset, x: &[f64]) -> Vec<f64> {
    let d = ds.dim();
    let m = ds.samples.len() as f64;
    let mut g = vec![0.0; d];
    for s in &ds.samples {
        let r = vecs::dot(&s.a, x) - s.b;
        if r > 0.0 {
            vecs::add_assign(&mut g, &s.a);
        } else if r < 0.0 {
            vecs::axpy(&mut g, -1.0, &s.a);
        }
    }
    for v in &mut g {
        *v /= m;
    }
    g
}

/// (1/m) * sum_j ||a_j||, a valid Lipschitz constant for `lad_value`.
pub fn lipschitz_bound(ds: &LocalDataset) -> Result<f64> {
    if ds.samples.is_empty() {
        return Err(Error::EmptyDataset);
    }
    let m = ds.samples.len() as f64;
    Ok(ds.samples.iter().map(|s| vecs::norm(&s.a)).sum::<f64>() / m)
}

fn fmt_f64(x: f64) -> String {
    format!("{:.16e}", x)
}

/// Line-oriented dataset dump; decimal floats with 17 significant digits
/// so the round-trip is bit-exact.
pub fn dump_datasets(data: &SyntheticData) -> String {
    let n = data.datasets.len();
    let m = data.datasets.first().map_or(0, |d| d.samples.len());
    let d = data.datasets.first().map_or(0, |d| d.dim());
    let mut out = String::new();
    writeln!(out, "# lad d={} n={} m={} seed={}", d, n, m, data.seed).unwrap();
    for ds in &data.datasets {
        for (i, s) in ds.samples.iter().enumerate() {
            write!(out, "{} {}", ds.agent, i).unwrap();
            for a in &s.a {
                write!(out, " {}", fmt_f64(*a)).unwrap();
            }
            writeln!(
                out,
                " {} {}",
                fmt_f64(s.b),
                if ds.corrupted[i] { 1 } else { 0 }
            )
            .unwrap();
        }
    }
    out
}

/// Parse a dump produced by [`dump_datasets`]. The ground truth is not part
/// of the format; the returned truth vectors are empty.
pub fn load_datasets(text: &str) -> Result<SyntheticData> {
    let mut lines = text.lines().enumerate();
    let (_, header) = lines
        .next()
        .ok_or_else(|| Error::Schema("empty dataset file".into()))?;
    let mut d = 0usize;
    let mut n = 0usize;
    let mut m = 0usize;
    let mut seed = 0u64;
    if !header.starts_with("# lad") {
        return Err(Error::Schema("missing '# lad' header".into()));
    }
    for tok in header.trim_start_matches("# lad").split_whitespace() {
        let (k, v) = tok
            .split_once('=')
            .ok_or_else(|| Error::Schema(format!("bad header token '{}'", tok)))?;
        match k {
            "d" => d = v.parse().map_err(|_| Error::Schema("bad d".into()))?,
            "n" => n = v.parse().map_err(|_| Error::Schema("bad n".into()))?,
            "m" => m = v.parse().map_err(|_| Error::Schema("bad m".into()))?,
            "seed" => seed = v.parse().map_err(|_| Error::Schema("bad seed".into()))?,
            _ => return Err(Error::Schema(format!("unknown header key '{}'", k))),
        }
    }
    let mut datasets: Vec<LocalDataset> = (0..n)
        .map(|agent| LocalDataset {
            agent: agent as u32,
            samples: Vec::with_capacity(m),
            corrupted: Vec::with_capacity(m),
        })
        .collect();
    for (lineno, line) in lines {
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let toks: Vec<&str> = line.split_whitespace().collect();
        if toks.len() != d + 4 {
            return Err(Error::ConfigParse {
                line: lineno + 1,
                message: format!("expected {} fields, got {}", d + 4, toks.len()),
            });
        }
        let agent: usize = toks[0].parse().map_err(|_| Error::ConfigParse {
            line: lineno + 1,
            message: "bad agent id".into(),
        })?;
        let parse = |s: &str| -> Result<f64> {
            s.parse().map_err(|_| Error::ConfigParse {
                line: lineno + 1,
                message: format!("bad float '{}'", s),
            })
        };
        let a: Vec<f64> = toks[2..2 + d].iter().map(|s| parse(s)).collect::<Result<_>>()?;
        let b = parse(toks[2 + d])?;
        let flag = toks[3 + d] == "1";
        let ds = datasets.get_mut(agent).ok_or_else(|| Error::ConfigParse {
            line: lineno + 1,
            message: format!("agent id {} out of range", agent),
        })?;
        ds.samples.push(LadSample { a, b });
        ds.corrupted.push(flag);
    }
    Ok(SyntheticData {
        datasets,
        truth: GroundTruth {
            theta: Vec::new(),
            theta_locals: Vec::new(),
        },
        seed,
    })
}
