//! Reference optimum for weighted LAD objectives: a long-run centralized
//! projected subgradient method with iterate averaging, cross-checked in
//! one dimension by golden-section search.

use crate::dual::FeasibleSet;
use crate::error::{Error, Result};
use crate::lad::{self, LocalDataset};
use crate::vecs;

#[derive(Debug, Clone, Copy)]
pub struct WeightedObjective<'a> {
    pub weight: f64,
    pub data: &'a LocalDataset,
}

#[derive(Debug, Clone)]
pub struct Optimum {
    pub x_star: Vec<f64>,
    pub f_star: f64,
}

#[derive(Debug, Clone)]
pub struct OracleParams {
    pub tol: f64,
    pub budget: usize,
    /// Scale of the distance from the start to the optimum; 0.0 means
    /// estimate it from the data.
    pub radius_hint: f64,
    pub x0: Option<Vec<f64>>,
}

impl Default for OracleParams {
    fn default() -> Self {
        OracleParams {
            tol: 1e-3,
            budget: 200_000,
            radius_hint: 0.0,
            x0: None,
        }
    }
}

fn weighted_value(objs: &[WeightedObjective], total_w: f64, x: &[f64]) -> f64 {
    objs.iter()
        .map(|o| o.weight * lad_value_of(o.data, x))
        .sum::<f64>()
        / total_w
}

fn lad_value_of(ds: &LocalDataset, x: &[f64]) -> f64 {
    lad::lad_value(ds, x)
}

fn weighted_subgradient(objs: &[WeightedObjective], total_w: f64, x: &[f64], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for o in objs {
        let g = lad::lad_subgradient(o.data, x);
        vecs::axpy(out, o.weight / total_w, &g);
    }
}

pub fn auto_radius(objs: &[WeightedObjective], d: usize) -> f64 {
    let mut sum_b = 0.0;
    let mut sum_a = 0.0;
    let mut count = 0usize;
    for o in objs {
        for s in &o.data.samples {
            sum_b += s.b.abs();
            sum_a += vecs::norm(&s.a);
            count += 1;
        }
    }
    if count == 0 || sum_a == 0.0 {
        return 1.0;
    }
    (2.0 * (sum_b / sum_a) * (d as f64).sqrt()).max(1.0)
}

/// Approximate minimizer of the weight-normalized sum of LAD objectives
/// over `set`, with a stabilization check between the last two averaged
/// checkpoints. For d = 1 the value is cross-checked by golden-section
/// search and the two routes must agree within `tol`.
pub fn reference_optimum(
    objs: &[WeightedObjective],
    set: &FeasibleSet,
    params: &OracleParams,
) -> Result<Optimum> {
    if objs.is_empty() {
        return Err(Error::Config("oracle needs at least one objective".into()));
    }
    let total_w: f64 = objs.iter().map(|o| o.weight).sum();
    if total_w <= 0.0 || objs.iter().any(|o| o.weight < 0.0) {
        return Err(Error::Config(
            "oracle weights must be nonnegative and not all zero".into(),
        ));
    }
    let d = objs[0].data.dim();
    let g_bound: f64 = objs
        .iter()
        .map(|o| {
            Ok(o.weight / total_w * lad::lipschitz_bound(o.data)?)
        })
        .sum::<Result<f64>>()?;
    if g_bound == 0.0 {
        // all-zero features: every feasible point is optimal
        let x = set.project(&vec![0.0; d])?;
        let f = weighted_value(objs, total_w, &x);
        return Ok(Optimum { x_star: x, f_star: f });
    }

    let radius = if params.radius_hint > 0.0 {
        params.radius_hint
    } else {
        auto_radius(objs, d)
    };
    let c = radius / g_bound;

    let mut x = match &params.x0 {
        Some(x0) => set.project(x0)?,
        None => set.project(&vec![0.0; d])?,
    };
    let mut g = vec![0.0; d];

    // checkpoint = window average over budget/10 iterations
    let window = (params.budget / 10).max(1);
    let mut win_sum = vec![0.0; d];
    let mut win_len = 0usize;
    let mut best: Option<Optimum> = None;
    let mut last_two = [f64::NAN, f64::NAN];

    for k in 1..=params.budget {
        weighted_subgradient(objs, total_w, &x, &mut g);
        let eta = c / (k as f64).sqrt();
        vecs::axpy(&mut x, -eta, &g);
        x = set.project(&x)?;
        vecs::add_assign(&mut win_sum, &x);
        win_len += 1;
        if win_len == window || k == params.budget {
            let avg: Vec<f64> = win_sum.iter().map(|v| v / win_len as f64).collect();
            let f = weighted_value(objs, total_w, &avg);
            if best.as_ref().map_or(true, |b| f < b.f_star) {
                best = Some(Optimum {
                    x_star: avg,
                    f_star: f,
                });
            }
            last_two = [last_two[1], f];
            win_sum.iter_mut().for_each(|v| *v = 0.0);
            win_len = 0;
        }
    }
    let best = best.expect("at least one checkpoint");
    if !last_two[0].is_nan() && (last_two[0] - last_two[1]).abs() > params.tol {
        return Err(Error::OraclePrecision(format!(
            "last averaged checkpoints differ by {:.3e} > tol {:.1e}",
            (last_two[0] - last_two[1]).abs(),
            params.tol
        )));
    }

    if d == 1 {
        let gold = golden_section_1d(objs, total_w, set, radius)?;
        if (gold.f_star - best.f_star).abs() > params.tol {
            return Err(Error::OraclePrecision(format!(
                "1-d cross-check: golden-section {:.6e} vs subgradient {:.6e}",
                gold.f_star, best.f_star
            )));
        }
    }
    Ok(best)
}

/// Exact-to-precision minimizer of a 1-d convex function over an interval,
/// used as the independent route for the d = 1 cross-check.
pub fn golden_section_1d(
    objs: &[WeightedObjective],
    total_w: f64,
    set: &FeasibleSet,
    radius0: f64,
) -> Result<Optimum> {
    let f = |x: f64| weighted_value(objs, total_w, &[x]);
    let sub = |x: f64| {
        let mut g = [0.0];
        weighted_subgradient(objs, total_w, &[x], &mut g);
        g[0]
    };
    // grow a bracket until the subgradient changes sign
    let mut r = radius0.max(1.0);
    for _ in 0..60 {
        if sub(-r) <= 0.0 && sub(r) >= 0.0 {
            break;
        }
        r *= 2.0;
    }
    let (mut lo, mut hi) = (-r, r);
    // intersect with the feasible set
    match set {
        FeasibleSet::Unconstrained => {}
        FeasibleSet::Ball { center, radius } => {
            lo = lo.max(center[0] - radius);
            hi = hi.min(center[0] + radius);
        }
        FeasibleSet::Box { lo: l, hi: h } => {
            lo = lo.max(l[0]);
            hi = hi.min(h[0]);
        }
    }
    let phi = (5f64.sqrt() - 1.0) / 2.0;
    let mut a = lo;
    let mut b = hi;
    let mut x1 = b - phi * (b - a);
    let mut x2 = a + phi * (b - a);
    let mut f1 = f(x1);
    let mut f2 = f(x2);
    for _ in 0..200 {
        if (b - a).abs() < 1e-12 * (1.0 + a.abs() + b.abs()) {
            break;
        }
        if f1 <= f2 {
            b = x2;
            x2 = x1;
            f2 = f1;
            x1 = b - phi * (b - a);
            f1 = f(x1);
        } else {
            a = x1;
            x1 = x2;
            f1 = f2;
            x2 = a + phi * (b - a);
            f2 = f(x2);
        }
    }
    let xm = 0.5 * (a + b);
    Ok(Optimum {
        x_star: vec![xm],
        f_star: f(xm),
    })
}
