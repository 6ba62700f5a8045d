//! Deep Ritz training for `Δu = f` on `[0,1]^d` with homogeneous Dirichlet data.
//!
//! The loss is `L(u) = ∫ ½|∇u|² + f u`, minimised by the manufactured solution
//! `u*(x) = 10(|x − x₀|² − 1/16) ∏ sin(πxᵢ)` when `f = Δu*`. Its minimum value is
//! `−½‖∇u*‖²`, and `L(u) − L(u*) = ½‖∇(u − u*)‖²` for every admissible `u`.

use std::f64::consts::PI;
use std::fmt::Write as _;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;
use crate::net::{self, NetworkParameters};
use crate::numeric::tensor_gauss;
use crate::quadrature::{GlobalRule, QuadratureSample, RuleId};
use crate::rng::{purpose, substream};

/// Manufactured Poisson problem on `[0,1]^d`, centred at `x₀ = (½, …, ½)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Problem {
    dim: usize,
}

impl Problem {
    pub fn new(dim: usize) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not in 1..=3")));
        }
        Ok(Problem { dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Returns `(g, s, s_i)` with `g = |x − x₀|² − 1/16`, `s = ∏ sin(πxⱼ)` and
    /// `s_i = π cos(πxᵢ) ∏_{j≠i} sin(πxⱼ)`.
    fn factors(&self, x: &Point) -> (f64, f64, [f64; 3]) {
        let d = self.dim;
        let mut g = -1.0 / 16.0;
        let mut sines = [1.0; 3];
        let mut cosines = [0.0; 3];
        for i in 0..d {
            g += (x[i] - 0.5) * (x[i] - 0.5);
            sines[i] = (PI * x[i]).sin();
            cosines[i] = PI * (PI * x[i]).cos();
        }
        let s = sines[0] * sines[1] * sines[2];
        let mut ds = [0.0; 3];
        for i in 0..d {
            let mut p = cosines[i];
            for j in 0..d {
                if j != i {
                    p *= sines[j];
                }
            }
            ds[i] = p;
        }
        (g, s, ds)
    }

    pub fn exact_solution(&self, x: &Point) -> f64 {
        let (g, s, _) = self.factors(x);
        10.0 * g * s
    }

    pub fn exact_gradient(&self, x: &Point) -> [f64; 3] {
        let (g, s, ds) = self.factors(x);
        let mut out = [0.0; 3];
        for i in 0..self.dim {
            out[i] = 10.0 * (2.0 * (x[i] - 0.5) * s + g * ds[i]);
        }
        out
    }

    /// `f = Δu* = 10(Δg·s + 2∇g·∇s + g·Δs)` with `Δg = 2d`, `Δs = −dπ²s`.
    pub fn forcing(&self, x: &Point) -> f64 {
        let d = self.dim;
        let (g, s, ds) = self.factors(x);
        let mut cross = 0.0;
        for i in 0..d {
            cross += 2.0 * (x[i] - 0.5) * ds[i];
        }
        10.0 * (2.0 * d as f64 * s + 2.0 * cross - d as f64 * PI * PI * g * s)
    }

    /// Loss density `½|∇u*|² + f u*` at the exact solution.
    pub fn loss_density(&self, x: &Point) -> f64 {
        let g = self.exact_gradient(x);
        0.5 * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) + self.forcing(x) * self.exact_solution(x)
    }

    /// `∫ ½|∇u|² + f u` for a function given by its value and gradient,
    /// on a composite tensor Gauss rule with `cells` cells of `order` points
    /// per axis.
    pub fn continuum_loss<F>(&self, u: F, cells: usize, order: usize) -> f64
    where
        F: Fn(&Point) -> (f64, [f64; 3]),
    {
        let (nodes, weights) = tensor_gauss(self.dim, cells, order);
        let terms: Vec<f64> = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| {
                let (v, g) = u(x);
                w * (0.5 * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]) + self.forcing(x) * v)
            })
            .collect();
        crate::numeric::pairwise_sum(&terms)
    }

    /// `−½‖∇u*‖²` on a composite tensor Gauss rule.
    pub fn loss_minimum_with(&self, cells: usize, order: usize) -> f64 {
        let (nodes, weights) = tensor_gauss(self.dim, cells, order);
        let terms: Vec<f64> = nodes
            .iter()
            .zip(&weights)
            .map(|(x, w)| {
                let g = self.exact_gradient(x);
                w * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2])
            })
            .collect();
        -0.5 * crate::numeric::pairwise_sum(&terms)
    }

    /// Cached `−½‖∇u*‖²` using 5-point Gauss on 400 / 40² / 16³ cells.
    pub fn exact_loss_minimum(&self) -> f64 {
        static CACHE: [OnceLock<f64>; 3] = [OnceLock::new(), OnceLock::new(), OnceLock::new()];
        let cells = [400, 40, 16][self.dim - 1];
        *CACHE[self.dim - 1].get_or_init(|| self.loss_minimum_with(cells, 5))
    }
}

/// Learning rate and momentum parameters at one iteration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ScheduleValues {
    pub gamma: f64,
    pub beta1: f64,
    pub beta2: f64,
}

/// Constant rate `γ₀` up to `√k_max`, then `c/(b + k)` reaching `γ_f` at `k_max`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Schedule {
    k_max: usize,
    gamma0: f64,
    gamma_f: f64,
    b: f64,
    c: f64,
}

impl Schedule {
    pub fn new(k_max: usize, gamma0: f64, gamma_f: f64) -> Result<Self> {
        if k_max < 4 {
            return Err(Error::invalid(format!("k_max must be at least 4, got {k_max}")));
        }
        if !(gamma0 > 0.0 && gamma_f > 0.0 && gamma_f < gamma0 && gamma0.is_finite()) {
            return Err(Error::invalid(format!(
                "need 0 < gamma_f < gamma0, got gamma0={gamma0}, gamma_f={gamma_f}"
            )));
        }
        let ratio = gamma_f / gamma0;
        let km = k_max as f64;
        let sq = km.sqrt();
        let b = (-ratio * km + sq) / (-1.0 + ratio);
        let c = gamma0 * ((sq - km) * ratio) / (-1.0 + ratio);
        Ok(Schedule {
            k_max,
            gamma0,
            gamma_f,
            b,
            c,
        })
    }

    pub fn k_max(&self) -> usize {
        self.k_max
    }

    pub fn gamma_f(&self) -> f64 {
        self.gamma_f
    }

    pub fn coefficients(&self) -> (f64, f64) {
        (self.b, self.c)
    }

    pub fn at(&self, k: usize) -> Result<ScheduleValues> {
        if k > self.k_max {
            return Err(Error::invalid(format!("iteration {k} beyond k_max {}", self.k_max)));
        }
        let kf = k as f64;
        let gamma = if kf < (self.k_max as f64).sqrt() {
            self.gamma0
        } else {
            self.c / (self.b + kf)
        };
        let ratio = gamma / self.gamma0;
        Ok(ScheduleValues {
            gamma,
            beta1: 1.0 - 0.9 * ratio,
            beta2: 1.0 - 0.1 * ratio,
        })
    }
}

/// Free-function form of [`Schedule::at`].
pub fn schedule(k: usize, k_max: usize, gamma0: f64, gamma_f: f64) -> Result<ScheduleValues> {
    Schedule::new(k_max, gamma0, gamma_f)?.at(k)
}

pub const DEFAULT_GAMMA0: f64 = 1e-2;
pub const DEFAULT_GAMMA_F: f64 = 1e-4;
pub const DEFAULT_EPSILON: f64 = 1e-2;

/// Moment estimates of the Adam variant.
#[derive(Clone, Debug, PartialEq)]
pub struct OptimiserState {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub r1: f64,
    pub r2: f64,
    pub k: usize,
}

impl OptimiserState {
    pub fn new(parameters: usize) -> Self {
        OptimiserState {
            m: vec![0.0; parameters],
            v: vec![0.0; parameters],
            r1: 0.0,
            r2: 0.0,
            k: 0,
        }
    }
}

/// One Adam step with explicit bias-correction accumulators `r¹`, `r²`.
/// A non-finite gradient leaves both state and parameters untouched.
pub fn adam_step(
    state: &mut OptimiserState,
    params: &mut [f64],
    grad: &[f64],
    s: &ScheduleValues,
    epsilon: f64,
) -> Result<()> {
    if params.len() != grad.len() || state.m.len() != grad.len() {
        return Err(Error::invalid(format!(
            "shape mismatch: {} parameters, {} gradient entries, {} state entries",
            params.len(),
            grad.len(),
            state.m.len()
        )));
    }
    if let Some(i) = grad.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFinite {
            value: grad[i],
            node: vec![i as f64],
        });
    }
    let (b1, b2) = (s.beta1, s.beta2);
    state.r1 = b1 * state.r1 + (1.0 - b1);
    state.r2 = b2 * state.r2 + (1.0 - b2);
    for i in 0..params.len() {
        let g = grad[i];
        state.m[i] = b1 * state.m[i] + (1.0 - b1) * g;
        state.v[i] = b2 * state.v[i] + (1.0 - b2) * g * g;
        let m_hat = state.m[i] / state.r1;
        let v_hat = state.v[i] / state.r2;
        params[i] -= s.gamma * m_hat / (epsilon + v_hat.sqrt());
    }
    state.k += 1;
    Ok(())
}

/// Deterministic H¹-seminorm error on a fixed tensor two-point Gauss grid:
/// 500 cells in 1D, 50² in 2D, 20³ in 3D.
#[derive(Clone, Debug)]
pub struct H1Evaluator {
    nodes: Vec<Point>,
    weights: Vec<f64>,
    reference: Vec<[f64; 3]>,
    reference_norm2: f64,
}

impl H1Evaluator {
    pub fn new(problem: &Problem) -> Self {
        let cells = [500, 50, 20][problem.dim() - 1];
        Self::with_grid(problem, cells)
    }

    pub fn with_grid(problem: &Problem, cells: usize) -> Self {
        let (nodes, weights) = tensor_gauss(problem.dim(), cells, 2);
        let reference: Vec<[f64; 3]> = nodes.iter().map(|x| problem.exact_gradient(x)).collect();
        let terms: Vec<f64> = reference
            .iter()
            .zip(&weights)
            .map(|(g, w)| w * (g[0] * g[0] + g[1] * g[1] + g[2] * g[2]))
            .collect();
        H1Evaluator {
            nodes,
            weights,
            reference,
            reference_norm2: crate::numeric::pairwise_sum(&terms),
        }
    }

    /// `100 · ‖∇u − ∇u*‖ / ‖∇u*‖` for the network.
    pub fn relative_error(&self, params: &NetworkParameters) -> f64 {
        let evals = net::evaluate_batch(params, &self.nodes);
        self.error_from_gradients(evals.iter().map(|e| e.grad_u))
    }

    /// Same metric for an arbitrary gradient field.
    pub fn relative_error_of<F: Fn(&Point) -> [f64; 3]>(&self, grad: F) -> f64 {
        self.error_from_gradients(self.nodes.iter().map(grad))
    }

    fn error_from_gradients<I: Iterator<Item = [f64; 3]>>(&self, grads: I) -> f64 {
        let terms: Vec<f64> = grads
            .zip(&self.reference)
            .zip(&self.weights)
            .map(|((g, r), w)| {
                let e = [g[0] - r[0], g[1] - r[1], g[2] - r[2]];
                w * (e[0] * e[0] + e[1] * e[1] + e[2] * e[2])
            })
            .collect();
        100.0 * (crate::numeric::pairwise_sum(&terms) / self.reference_norm2).sqrt()
    }
}

/// Convenience wrapper building a fresh evaluator.
pub fn h1_relative_error(problem: &Problem, params: &NetworkParameters) -> f64 {
    H1Evaluator::new(problem).relative_error(params)
}

/// Where the training nodes come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NodeSource {
    /// A fresh global draw of `rule` on `n` cells per axis (`n` points for MC)
    /// every iteration.
    Stochastic { rule: RuleId, n: usize },
    /// Fixed midpoints of `count` uniform cells per axis, equal weights.
    Midpoints { count: usize },
}

impl NodeSource {
    pub fn label(&self) -> String {
        match self {
            NodeSource::Stochastic { rule, n } => format!("{rule}-n{n}"),
            NodeSource::Midpoints { count } => format!("midpoints-{count}"),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub dim: usize,
    pub source: NodeSource,
    pub iterations: usize,
    pub seed: u64,
    pub eval_stride: usize,
    pub gamma0: f64,
    pub gamma_f: f64,
    pub epsilon: f64,
    /// Abort once `|loss|` exceeds this.
    pub divergence_threshold: f64,
    /// Pre-sample this many radial base points instead of rejection sampling.
    pub radial_database: Option<usize>,
}

impl TrainConfig {
    pub fn new(dim: usize, source: NodeSource, iterations: usize, seed: u64) -> Self {
        TrainConfig {
            dim,
            source,
            iterations,
            seed,
            eval_stride: 10,
            gamma0: DEFAULT_GAMMA0,
            gamma_f: DEFAULT_GAMMA_F,
            epsilon: DEFAULT_EPSILON,
            divergence_threshold: 1e6,
            radial_database: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TraceRecord {
    pub k: usize,
    pub loss: f64,
    pub gamma: f64,
    pub h1_error_pct: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(tag = "status", rename_all = "lowercase")]
pub enum TrainStatus {
    Completed,
    Diverged {
        iteration: usize,
        loss: f64,
        reason: String,
    },
}

#[derive(Clone, Debug, Serialize)]
pub struct TrainingTrace {
    pub config: TrainConfig,
    /// Quadrature points per iteration.
    pub points: usize,
    pub records: Vec<TraceRecord>,
    pub status: TrainStatus,
    /// H¹ error of the parameters after the last completed step.
    pub final_h1_error_pct: f64,
    pub exact_loss_minimum: f64,
}

impl TrainingTrace {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("k,loss,gamma,h1_error_pct\n");
        for r in &self.records {
            let h1 = r.h1_error_pct.map(|v| v.to_string()).unwrap_or_default();
            writeln!(out, "{},{},{},{}", r.k, r.loss, r.gamma, h1).unwrap();
        }
        out
    }

    pub fn losses(&self) -> Vec<(usize, f64)> {
        self.records.iter().map(|r| (r.k, r.loss)).collect()
    }

    pub fn h1_errors(&self) -> Vec<(usize, f64)> {
        self.records
            .iter()
            .filter_map(|r| r.h1_error_pct.map(|e| (r.k, e)))
            .collect()
    }
}

pub struct TrainOutcome {
    pub trace: TrainingTrace,
    pub params: NetworkParameters,
}

enum Nodes {
    Stochastic(GlobalRule),
    Fixed(QuadratureSample),
}

fn midpoint_sample(dim: usize, count: usize) -> QuadratureSample {
    let total = count.pow(dim as u32);
    let h = 1.0 / count as f64;
    let mut s = QuadratureSample::default();
    for idx in 0..total {
        let mut p = [0.0; 3];
        let mut rest = idx;
        for c in p.iter_mut().take(dim) {
            *c = (rest % count) as f64 * h + 0.5 * h;
            rest /= count;
        }
        s.nodes.push(p);
        s.weights.push(1.0 / total as f64);
    }
    s
}

/// Train from the seed-derived initial parameters.
pub fn train(config: &TrainConfig) -> Result<TrainOutcome> {
    let mut init_rng = substream(config.seed, purpose::INIT);
    let params = NetworkParameters::for_dim(config.dim, &mut init_rng)?;
    train_from(config, params)
}

/// Train starting at `params`. Divergence stops the loop early and is
/// reported through [`TrainingTrace::status`] with the records so far.
pub fn train_from(config: &TrainConfig, mut params: NetworkParameters) -> Result<TrainOutcome> {
    let problem = Problem::new(config.dim)?;
    if params.dim() != config.dim {
        return Err(Error::invalid("parameter dimension does not match the config"));
    }
    if config.iterations == 0 || config.eval_stride == 0 {
        return Err(Error::invalid("iterations and eval_stride must be positive"));
    }
    let schedule = Schedule::new(config.iterations, config.gamma0, config.gamma_f)?;
    let nodes = match &config.source {
        NodeSource::Stochastic { rule, n } => {
            let mut g = GlobalRule::new(*rule, config.dim, *n)?;
            if let Some(size) = config.radial_database {
                let mut db_rng = substream(config.seed, purpose::DATABASE);
                g.rule = g.rule.with_database(size, &mut db_rng)?;
            }
            Nodes::Stochastic(g)
        }
        NodeSource::Midpoints { count } => {
            if *count == 0 {
                return Err(Error::invalid("midpoint count must be positive"));
            }
            Nodes::Fixed(midpoint_sample(config.dim, *count))
        }
    };
    let points = match &nodes {
        Nodes::Stochastic(g) => g.points(),
        Nodes::Fixed(s) => s.len(),
    };
    let h1 = H1Evaluator::new(&problem);
    let mut rng = substream(config.seed, purpose::TRAIN);
    let mut state = OptimiserState::new(params.parameter_count());
    let mut records = Vec::with_capacity(config.iterations);
    let mut status = TrainStatus::Completed;
    let forcing = |x: &Point| problem.forcing(x);

    for k in 0..config.iterations {
        let drawn;
        let sample = match &nodes {
            Nodes::Stochastic(g) => {
                drawn = g.sample(&mut rng)?;
                &drawn
            }
            Nodes::Fixed(s) => s,
        };
        let s = schedule.at(k)?;
        let (loss, grad) = match net::grad_wrt_parameters(&params, &sample.nodes, &sample.weights, forcing) {
            Ok(v) => v,
            Err(Error::NonFinite { value, .. }) => {
                status = TrainStatus::Diverged {
                    iteration: k,
                    loss: value,
                    reason: "non-finite loss".into(),
                };
                break;
            }
            Err(e) => return Err(e),
        };
        if loss.abs() > config.divergence_threshold {
            status = TrainStatus::Diverged {
                iteration: k,
                loss,
                reason: format!("|loss| exceeded {}", config.divergence_threshold),
            };
            break;
        }
        let h1_error_pct = if k % config.eval_stride == 0 || k + 1 == config.iterations {
            Some(h1.relative_error(&params))
        } else {
            None
        };
        records.push(TraceRecord {
            k,
            loss,
            gamma: s.gamma,
            h1_error_pct,
        });
        if let Err(e) = adam_step(&mut state, params.values_mut(), &grad, &s, config.epsilon) {
            status = TrainStatus::Diverged {
                iteration: k,
                loss,
                reason: e.to_string(),
            };
            break;
        }
    }

    let final_h1_error_pct = h1.relative_error(&params);
    Ok(TrainOutcome {
        trace: TrainingTrace {
            config: config.clone(),
            points,
            records,
            status,
            final_h1_error_pct,
            exact_loss_minimum: problem.exact_loss_minimum(),
        },
        params,
    })
}
