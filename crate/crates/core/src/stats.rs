//! Variance studies, stochastic-gradient covariance metrics and log-binning.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::drm::Problem;
use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::net::{self, NetworkParameters};
use crate::numeric::{fit_slope, mean, pairwise_sum, sample_variance, standard_error};
use crate::quadrature::{GlobalRule, RuleId};
use crate::rng::{purpose, stream, substream};

/// Asymptotic variance exponent `−1 − (2p + 2)/d`, or `−1` for Monte Carlo.
pub fn reference_exponent(rule: RuleId, dim: usize) -> f64 {
    match rule.order() {
        None => -1.0,
        Some(p) => -1.0 - (2.0 * p as f64 + 2.0) / dim as f64,
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct VarianceRecord {
    pub rule: RuleId,
    pub dim: usize,
    /// Cells per axis, or the point count for Monte Carlo.
    pub n: usize,
    /// Total quadrature points per draw.
    pub points: usize,
    pub repetitions: usize,
    pub mean: f64,
    pub standard_error: f64,
    pub sample_variance: f64,
    pub reference_exponent: f64,
}

/// Draw `repetitions` independent global quadrature values. Repetition `i`
/// uses its own sub-stream, so the result is independent of thread count.
pub fn sample_values<F>(global: &GlobalRule, f: F, repetitions: usize, seed: u64) -> Result<Vec<f64>>
where
    F: Fn(&Point) -> f64 + Sync,
{
    (0..repetitions)
        .into_par_iter()
        .map(|i| {
            let mut rng = substream(seed, purpose::REPETITIONS + i as u64);
            global.integrate(&f, &mut rng)
        })
        .collect()
}

pub fn estimate_variance<F>(global: &GlobalRule, f: F, repetitions: usize, seed: u64) -> Result<VarianceRecord>
where
    F: Fn(&Point) -> f64 + Sync,
{
    if repetitions < 2 {
        return Err(Error::invalid("need at least two repetitions"));
    }
    let values = sample_values(global, f, repetitions, seed)?;
    let rule = global.rule.id();
    let dim = global.rule.dim();
    Ok(VarianceRecord {
        rule,
        dim,
        n: if rule == RuleId::Mc {
            global.points()
        } else {
            global.mesh.n()
        },
        points: global.points(),
        repetitions,
        mean: mean(&values),
        standard_error: standard_error(&values),
        sample_variance: sample_variance(&values),
        reference_exponent: reference_exponent(rule, dim),
    })
}

/// [`estimate_variance`] on the loss density at the exact solution.
pub fn estimate_loss_variance(global: &GlobalRule, repetitions: usize, seed: u64) -> Result<VarianceRecord> {
    let problem = Problem::new(global.rule.dim())?;
    estimate_variance(global, |x| problem.loss_density(x), repetitions, seed)
}

#[derive(Clone, Debug, Serialize)]
pub struct VarianceStudy {
    pub rule: RuleId,
    pub dim: usize,
    pub records: Vec<VarianceRecord>,
    /// Least-squares slope of `log var` against `log N` over the largest-N half.
    pub fitted_slope: f64,
    pub reference_exponent: f64,
    pub warnings: Vec<String>,
}

/// Resolutions of a variance study.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum Grid {
    /// Cells per axis (points for Monte Carlo).
    Cells(Vec<usize>),
    /// Point budgets; each picks the finest mesh that fits.
    Points(Vec<usize>),
}

impl Grid {
    fn len(&self) -> usize {
        match self {
            Grid::Cells(v) | Grid::Points(v) => v.len(),
        }
    }

    fn rules(&self, rule: RuleId, dim: usize) -> Result<Vec<GlobalRule>> {
        match self {
            Grid::Cells(ns) => ns.iter().map(|&n| GlobalRule::new(rule, dim, n)).collect(),
            Grid::Points(ns) => ns
                .iter()
                .map(|&n| GlobalRule::with_point_budget(rule, dim, n))
                .collect(),
        }
    }
}

/// Variance of the global rule at each resolution of `grid`.
pub fn variance_scaling_study<F>(
    rule: RuleId,
    dim: usize,
    grid: &Grid,
    repetitions: usize,
    seed: u64,
    f: F,
) -> Result<VarianceStudy>
where
    F: Fn(&Point) -> f64 + Sync,
{
    if grid.len() < 3 {
        return Err(Error::invalid("a study needs at least three resolutions"));
    }
    let mut records = Vec::with_capacity(grid.len());
    for (i, global) in grid.rules(rule, dim)?.iter().enumerate() {
        records.push(estimate_variance(global, &f, repetitions, seed.wrapping_add(i as u64))?);
    }
    let lo = records.iter().map(|r| r.points).min().unwrap();
    let hi = records.iter().map(|r| r.points).max().unwrap();
    if (hi as f64) < 10.0 * lo as f64 {
        return Err(Error::invalid(format!(
            "point counts {lo}..{hi} span less than a decade"
        )));
    }
    let (fitted_slope, warnings) = fit_largest_half(&records);
    Ok(VarianceStudy {
        rule,
        dim,
        records,
        fitted_slope,
        reference_exponent: reference_exponent(rule, dim),
        warnings,
    })
}

/// Slope over the largest-N half of the records with positive variance.
pub fn fit_largest_half(records: &[VarianceRecord]) -> (f64, Vec<String>) {
    let mut warnings = Vec::new();
    let mut usable: Vec<&VarianceRecord> = Vec::new();
    for r in records {
        if r.sample_variance > 0.0 && r.sample_variance.is_finite() {
            usable.push(r);
        } else {
            warnings.push(format!("excluded N={} with variance {}", r.points, r.sample_variance));
        }
    }
    usable.sort_by_key(|r| r.points);
    let half = &usable[usable.len() / 2..];
    if half.len() < 2 {
        warnings.push("fewer than two usable points for the slope fit".into());
        return (f64::NAN, warnings);
    }
    let x: Vec<f64> = half.iter().map(|r| (r.points as f64).ln()).collect();
    let y: Vec<f64> = half.iter().map(|r| r.sample_variance.ln()).collect();
    (fit_slope(&x, &y), warnings)
}

/// CSV with columns `rule,d,N,repetitions,variance,slope_ref,slope_fit`.
pub fn studies_to_csv(studies: &[VarianceStudy]) -> String {
    let mut out = String::from("rule,d,N,repetitions,variance,slope_ref,slope_fit\n");
    for s in studies {
        for r in &s.records {
            writeln!(
                out,
                "{},{},{},{},{},{},{}",
                r.rule, r.dim, r.points, r.repetitions, r.sample_variance, s.reference_exponent, s.fitted_slope
            )
            .unwrap();
        }
    }
    out
}

pub const POWER_ITERATION_CAP: usize = 200;
pub const POWER_ITERATION_TOLERANCE: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct CovarianceMetrics {
    #[serde(rename = "S")]
    pub sample_count: usize,
    pub trace: f64,
    pub lambda_max: f64,
    pub loss_variance: f64,
    /// False when power iteration hit its cap; `lambda_max` is then the best estimate.
    pub converged: bool,
}

/// Trace and largest eigenvalue of the `(S − 1)`-normalised covariance of
/// `samples`, without forming the `P × P` matrix.
pub fn covariance_metrics_from_samples(samples: &[Vec<f64>], losses: &[f64], seed: u64) -> Result<CovarianceMetrics> {
    let s = samples.len();
    if s < 2 {
        return Err(Error::invalid("need at least two samples"));
    }
    let p = samples[0].len();
    if samples.iter().any(|g| g.len() != p) {
        return Err(Error::invalid("samples have inconsistent lengths"));
    }
    let norm = 1.0 / (s - 1) as f64;
    let mut centre = vec![0.0; p];
    for g in samples {
        for (c, v) in centre.iter_mut().zip(g) {
            *c += v;
        }
    }
    for c in &mut centre {
        *c /= s as f64;
    }
    let centred: Vec<Vec<f64>> = samples
        .iter()
        .map(|g| g.iter().zip(&centre).map(|(a, b)| a - b).collect())
        .collect();
    let trace = norm * pairwise_sum(&centred.iter().map(|g| dot(g, g)).collect::<Vec<_>>());

    let apply = |v: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; p];
        for g in &centred {
            let a = dot(g, v) * norm;
            for (o, x) in out.iter_mut().zip(g) {
                *o += a * x;
            }
        }
        out
    };

    let mut rng = stream(seed);
    let mut v: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
    let n0 = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= n0);
    let mut lambda = 0.0;
    let mut converged = false;
    for _ in 0..POWER_ITERATION_CAP {
        let w = apply(&v);
        let next = dot(&v, &w);
        let wn = dot(&w, &w).sqrt();
        if wn == 0.0 {
            lambda = 0.0;
            converged = true;
            break;
        }
        v = w.iter().map(|x| x / wn).collect();
        let done = (next - lambda).abs() <= POWER_ITERATION_TOLERANCE * next.abs();
        lambda = next;
        if done {
            converged = true;
            break;
        }
    }
    Ok(CovarianceMetrics {
        sample_count: s,
        trace,
        lambda_max: lambda.min(trace).max(0.0),
        loss_variance: sample_variance(losses),
        converged,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Covariance of `S` stochastic loss gradients at fixed parameters.
pub fn gradient_covariance_metrics(
    params: &NetworkParameters,
    global: &GlobalRule,
    samples: usize,
    seed: u64,
) -> Result<CovarianceMetrics> {
    if samples < 10 {
        return Err(Error::invalid("need at least 10 gradient samples"));
    }
    let problem = Problem::new(params.dim())?;
    if global.rule.dim() != params.dim() {
        return Err(Error::invalid("rule and network dimensions differ"));
    }
    let mut rng = substream(seed, purpose::TRAIN);
    let mut grads = Vec::with_capacity(samples);
    let mut losses = Vec::with_capacity(samples);
    for _ in 0..samples {
        let q = global.sample(&mut rng)?;
        let (loss, grad) = net::grad_wrt_parameters(params, &q.nodes, &q.weights, |x| problem.forcing(x))?;
        grads.push(grad);
        losses.push(loss);
    }
    covariance_metrics_from_samples(&grads, &losses, seed)
}

pub const DEFAULT_LOG_BASE: f64 = 1.25;

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LogBin {
    pub index: i32,
    /// `β^{i + ½}`.
    pub centre: f64,
    pub mean: f64,
    pub count: usize,
}

/// Means over `[βⁱ, β^{i+1})`. Points with `k < 1` have no bin and are dropped.
pub fn log_bin(series: &[(usize, f64)], base: f64) -> Result<Vec<LogBin>> {
    if base <= 1.0 || !base.is_finite() {
        return Err(Error::invalid(format!("log-bin base must exceed 1, got {base}")));
    }
    let mut bins: BTreeMap<i32, Vec<f64>> = BTreeMap::new();
    for &(k, v) in series {
        if k == 0 {
            continue;
        }
        let kf = k as f64;
        let mut i = (kf.ln() / base.ln()).floor() as i32;
        // guard against rounding at exact powers
        while base.powi(i + 1) <= kf {
            i += 1;
        }
        while base.powi(i) > kf {
            i -= 1;
        }
        bins.entry(i).or_default().push(v);
    }
    Ok(bins
        .into_iter()
        .map(|(i, vals)| LogBin {
            index: i,
            centre: base.powf(i as f64 + 0.5),
            mean: mean(&vals),
            count: vals.len(),
        })
        .collect())
}
