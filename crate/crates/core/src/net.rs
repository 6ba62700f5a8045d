//! The trial network `u(x; θ) = ũ(x; θ) · c_d ∏ xᵢ(1 − xᵢ)` with a tanh MLP `ũ`.
//!
//! Each hidden unit carries its value together with its spatial tangent
//! (`∂/∂x`, a `d`-vector), so `∇ₓu` is exact. Parameter gradients of
//! `Σⱼ wⱼ (½|∇u(xⱼ)|² + f(xⱼ) u(xⱼ))` are obtained by reverse accumulation
//! through both the value and tangent channels.

use std::fs;
use std::io::Write;
use std::path::Path;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::Point;

pub const HIDDEN_WIDTH: usize = 30;
pub const HIDDEN_LAYERS: usize = 3;

/// Nodes per parallel work unit. Partial sums are combined in chunk order, so
/// results do not depend on the number of threads.
const CHUNK: usize = 256;

const BINARY_MAGIC: &[u8; 4] = b"SQNP";

/// Layer widths `d → 30 → 30 → 30 → 1`.
pub fn layer_sizes(dim: usize) -> Vec<usize> {
    let mut sizes = vec![dim];
    sizes.extend([HIDDEN_WIDTH; HIDDEN_LAYERS]);
    sizes.push(1);
    sizes
}

/// Scale making `‖∇(c_d ∏ xᵢ(1 − xᵢ))‖_{L²([0,1]^d)} = 1`.
///
/// With `q(x) = x(1 − x)`, `∫q'² = 1/3` and `∫q² = 1/30`, so the squared norm
/// of the unscaled cutoff is `(d/3)(1/30)^{d−1}`.
pub fn cutoff_constant(dim: usize) -> f64 {
    let norm2 = dim as f64 / 3.0 * (1.0f64 / 30.0).powi(dim as i32 - 1);
    1.0 / norm2.sqrt()
}

/// Cutoff value and spatial gradient at `x`.
pub fn cutoff(dim: usize, x: &Point) -> (f64, [f64; 3]) {
    let c = cutoff_constant(dim);
    let mut q = [1.0; 3];
    let mut dq = [0.0; 3];
    for i in 0..dim {
        q[i] = x[i] * (1.0 - x[i]);
        dq[i] = 1.0 - 2.0 * x[i];
    }
    let value = c * q[0] * q[1] * q[2];
    let mut grad = [0.0; 3];
    for i in 0..dim {
        let mut g = c * dq[i];
        for j in 0..dim {
            if j != i {
                g *= q[j];
            }
        }
        grad[i] = g;
    }
    (value, grad)
}

/// Flat parameter vector with its layer shape. Layer `l` stores its weight
/// matrix row-major (`out × in`) followed by its bias.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NetworkParameters {
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

impl NetworkParameters {
    pub fn zeros(layer_sizes: Vec<usize>) -> Result<Self> {
        if layer_sizes.len() < 2 || layer_sizes[0] == 0 || layer_sizes[0] > 3 || *layer_sizes.last().unwrap() != 1 {
            return Err(Error::invalid(format!("unsupported layer sizes {layer_sizes:?}")));
        }
        if layer_sizes.contains(&0) {
            return Err(Error::invalid("layer widths must be positive"));
        }
        let count = layer_sizes.windows(2).map(|w| w[1] * (w[0] + 1)).sum();
        Ok(NetworkParameters {
            layer_sizes,
            values: vec![0.0; count],
        })
    }

    /// Glorot-uniform weights (`±√(6/(fan_in + fan_out))`), zero biases.
    pub fn init<R: Rng + ?Sized>(layer_sizes: Vec<usize>, rng: &mut R) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes)?;
        let mut offset = 0;
        for l in 0..p.layer_count() {
            let (n_in, n_out) = (p.layer_sizes[l], p.layer_sizes[l + 1]);
            let bound = (6.0 / (n_in + n_out) as f64).sqrt();
            for v in &mut p.values[offset..offset + n_in * n_out] {
                *v = rng.random_range(-bound..bound);
            }
            offset += n_out * (n_in + 1);
        }
        Ok(p)
    }

    /// The standard `d → 30 → 30 → 30 → 1` network.
    pub fn for_dim<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not in 1..=3")));
        }
        Self::init(layer_sizes(dim), rng)
    }

    pub fn from_values(layer_sizes: Vec<usize>, values: Vec<f64>) -> Result<Self> {
        let mut p = Self::zeros(layer_sizes)?;
        if values.len() != p.values.len() {
            return Err(Error::invalid(format!(
                "expected {} parameters, got {}",
                p.values.len(),
                values.len()
            )));
        }
        p.values = values;
        Ok(p)
    }

    pub fn dim(&self) -> usize {
        self.layer_sizes[0]
    }

    pub fn layer_sizes(&self) -> &[usize] {
        &self.layer_sizes
    }

    pub fn parameter_count(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    fn layer_count(&self) -> usize {
        self.layer_sizes.len() - 1
    }

    /// Offset of layer `l`'s weights; its bias follows `out × in` entries later.
    fn layer_offset(&self, l: usize) -> usize {
        self.layer_sizes[..=l].windows(2).map(|w| w[1] * (w[0] + 1)).sum()
    }

    /// Zero the output layer (u ≡ 0).
    pub fn zero_output_layer(&mut self) {
        let l = self.layer_count() - 1;
        let start = self.layer_offset(l);
        for v in &mut self.values[start..] {
            *v = 0.0;
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let bytes = if is_json(path) {
            serde_json::to_vec(&ParameterFile::from(self)).expect("parameters serialise")
        } else {
            let mut buf = Vec::with_capacity(16 + 8 * self.values.len());
            buf.extend_from_slice(BINARY_MAGIC);
            buf.extend_from_slice(&(self.layer_sizes.len() as u32).to_le_bytes());
            for &n in &self.layer_sizes {
                buf.extend_from_slice(&(n as u32).to_le_bytes());
            }
            for v in &self.values {
                buf.extend_from_slice(&v.to_le_bytes());
            }
            buf
        };
        let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
        file.write_all(&bytes).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let bad = |reason: &str| Error::Format {
            path: path.to_path_buf(),
            reason: reason.to_string(),
        };
        if is_json(path) {
            let file: ParameterFile = serde_json::from_slice(&bytes).map_err(|e| bad(&e.to_string()))?;
            let p = Self::from_values(file.layer_sizes, file.values)?;
            if p.dim() != file.dim {
                return Err(bad("dim does not match layer sizes"));
            }
            return Ok(p);
        }
        if bytes.len() < 8 || &bytes[..4] != BINARY_MAGIC {
            return Err(bad("missing header"));
        }
        let read_u32 =
            |at: usize| -> Option<u32> { bytes.get(at..at + 4).map(|b| u32::from_le_bytes(b.try_into().unwrap())) };
        let layers = read_u32(4).ok_or_else(|| bad("truncated header"))? as usize;
        let mut sizes = Vec::with_capacity(layers);
        for i in 0..layers {
            sizes.push(read_u32(8 + 4 * i).ok_or_else(|| bad("truncated header"))? as usize);
        }
        let body = &bytes[8 + 4 * layers..];
        if body.len() % 8 != 0 {
            return Err(bad("truncated body"));
        }
        let values = body
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Self::from_values(sizes, values)
    }
}

fn is_json(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "json")
}

#[derive(Serialize, Deserialize)]
struct ParameterFile {
    dim: usize,
    layer_sizes: Vec<usize>,
    values: Vec<f64>,
}

impl From<&NetworkParameters> for ParameterFile {
    fn from(p: &NetworkParameters) -> Self {
        ParameterFile {
            dim: p.dim(),
            layer_sizes: p.layer_sizes.clone(),
            values: p.values.clone(),
        }
    }
}

/// Network value and spatial gradient at a point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PointEvaluation {
    pub u: f64,
    pub grad_u: [f64; 3],
}

/// Per-layer buffers for one forward/backward pass.
struct Workspace {
    dim: usize,
    /// Input to each linear layer.
    acts: Vec<Vec<f64>>,
    /// Spatial tangent of each layer input, `width × dim` row-major.
    tangents: Vec<Vec<f64>>,
    /// Pre-activation tangents of hidden layers.
    pre_tangents: Vec<Vec<f64>>,
    // backward scratch
    g_act: Vec<f64>,
    g_tan: Vec<f64>,
    g_pre: Vec<f64>,
    g_pre_tan: Vec<f64>,
}

impl Workspace {
    fn new(params: &NetworkParameters) -> Self {
        let d = params.dim();
        let sizes = params.layer_sizes();
        let widest = *sizes.iter().max().unwrap();
        Workspace {
            dim: d,
            acts: sizes[..sizes.len() - 1].iter().map(|&n| vec![0.0; n]).collect(),
            tangents: sizes[..sizes.len() - 1].iter().map(|&n| vec![0.0; n * d]).collect(),
            pre_tangents: sizes[1..sizes.len() - 1].iter().map(|&n| vec![0.0; n * d]).collect(),
            g_act: vec![0.0; widest],
            g_tan: vec![0.0; widest * d],
            g_pre: vec![0.0; widest],
            g_pre_tan: vec![0.0; widest * d],
        }
    }

    /// Returns `(ũ, ∇ₓũ)`.
    fn forward(&mut self, params: &NetworkParameters, x: &Point) -> (f64, [f64; 3]) {
        let d = self.dim;
        let sizes = params.layer_sizes();
        let layers = sizes.len() - 1;
        let theta = params.values();
        self.acts[0].copy_from_slice(&x[..d]);
        for (i, t) in self.tangents[0].iter_mut().enumerate() {
            *t = if i / d == i % d { 1.0 } else { 0.0 };
        }
        let mut offset = 0;
        for l in 0..layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let w = &theta[offset..offset + n_in * n_out];
            let b = &theta[offset + n_in * n_out..offset + n_out * (n_in + 1)];
            offset += n_out * (n_in + 1);
            if l + 1 == layers {
                let a = &self.acts[l];
                let t = &self.tangents[l];
                let mut out = b[0];
                let mut grad = [0.0; 3];
                for i in 0..n_in {
                    out += w[i] * a[i];
                    for k in 0..d {
                        grad[k] += w[i] * t[i * d + k];
                    }
                }
                return (out, grad);
            }
            let (head, tail) = self.acts.split_at_mut(l + 1);
            let (a_in, a_out) = (&head[l], &mut tail[0]);
            let (thead, ttail) = self.tangents.split_at_mut(l + 1);
            let (t_in, t_out) = (&thead[l], &mut ttail[0]);
            let pre_t = &mut self.pre_tangents[l];
            for j in 0..n_out {
                let row = &w[j * n_in..(j + 1) * n_in];
                let mut z = b[j];
                let mut dz = [0.0; 3];
                for i in 0..n_in {
                    z += row[i] * a_in[i];
                    for k in 0..d {
                        dz[k] += row[i] * t_in[i * d + k];
                    }
                }
                let a = z.tanh();
                let s = 1.0 - a * a;
                a_out[j] = a;
                for k in 0..d {
                    pre_t[j * d + k] = dz[k];
                    t_out[j * d + k] = s * dz[k];
                }
            }
        }
        unreachable!("network has an output layer")
    }

    /// Accumulate `∂ℓ/∂θ` into `grad` given seeds `∂ℓ/∂ũ` and `∂ℓ/∂(∇ₓũ)`.
    fn backward(&mut self, params: &NetworkParameters, seed_u: f64, seed_grad: &[f64; 3], grad: &mut [f64]) {
        let d = self.dim;
        let sizes = params.layer_sizes();
        let layers = sizes.len() - 1;
        let theta = params.values();

        self.g_pre[0] = seed_u;
        self.g_pre_tan[..d].copy_from_slice(&seed_grad[..d]);

        for l in (0..layers).rev() {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let offset = params.layer_offset(l);
            let a = &self.acts[l];
            let t = &self.tangents[l];
            {
                let (gw, gb) = grad[offset..offset + n_out * (n_in + 1)].split_at_mut(n_in * n_out);
                for j in 0..n_out {
                    let gz = self.g_pre[j];
                    let gdz = &self.g_pre_tan[j * d..(j + 1) * d];
                    gb[j] += gz;
                    let row = &mut gw[j * n_in..(j + 1) * n_in];
                    for i in 0..n_in {
                        let mut g = gz * a[i];
                        for k in 0..d {
                            g += gdz[k] * t[i * d + k];
                        }
                        row[i] += g;
                    }
                }
            }
            if l == 0 {
                break;
            }
            // propagate to the previous layer's outputs
            let w = &theta[offset..offset + n_in * n_out];
            self.g_act[..n_in].fill(0.0);
            self.g_tan[..n_in * d].fill(0.0);
            for j in 0..n_out {
                let gz = self.g_pre[j];
                let row = &w[j * n_in..(j + 1) * n_in];
                for i in 0..n_in {
                    self.g_act[i] += row[i] * gz;
                    for k in 0..d {
                        self.g_tan[i * d + k] += row[i] * self.g_pre_tan[j * d + k];
                    }
                }
            }
            // through a = tanh(z), ∂a = s ∂z with s = 1 − a²
            let pre_t = &self.pre_tangents[l - 1];
            for i in 0..n_in {
                let ai = a[i];
                let s = 1.0 - ai * ai;
                let mut gs = 0.0;
                for k in 0..d {
                    let gt = self.g_tan[i * d + k];
                    gs += gt * pre_t[i * d + k];
                    self.g_pre_tan[i * d + k] = s * gt;
                }
                self.g_pre[i] = (self.g_act[i] - 2.0 * ai * gs) * s;
            }
        }
    }
}

/// `u(x; θ)` and `∇ₓu(x; θ)`.
pub fn evaluate(params: &NetworkParameters, x: &Point) -> PointEvaluation {
    let mut ws = Workspace::new(params);
    evaluate_with(&mut ws, params, x)
}

fn evaluate_with(ws: &mut Workspace, params: &NetworkParameters, x: &Point) -> PointEvaluation {
    let d = params.dim();
    let (nn, dnn) = ws.forward(params, x);
    let (phi, dphi) = cutoff(d, x);
    let mut grad_u = [0.0; 3];
    for k in 0..d {
        grad_u[k] = dnn[k] * phi + nn * dphi[k];
    }
    PointEvaluation { u: nn * phi, grad_u }
}

/// Evaluate at many points.
pub fn evaluate_batch(params: &NetworkParameters, xs: &[Point]) -> Vec<PointEvaluation> {
    xs.par_chunks(CHUNK)
        .flat_map_iter(|chunk| {
            let mut ws = Workspace::new(params);
            chunk
                .iter()
                .map(move |x| evaluate_with(&mut ws, params, x))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Loss `Σⱼ wⱼ (½|∇u(xⱼ)|² + f(xⱼ) u(xⱼ))` and its exact parameter gradient.
pub fn grad_wrt_parameters<F>(
    params: &NetworkParameters,
    nodes: &[Point],
    weights: &[f64],
    forcing: F,
) -> Result<(f64, Vec<f64>)>
where
    F: Fn(&Point) -> f64 + Sync,
{
    if nodes.is_empty() || nodes.len() != weights.len() {
        return Err(Error::invalid(format!(
            "need matching non-empty nodes and weights, got {} and {}",
            nodes.len(),
            weights.len()
        )));
    }
    let run_chunk = |(chunk_nodes, chunk_weights): (&[Point], &[f64])| -> Result<(f64, Vec<f64>)> {
        let mut ws = Workspace::new(params);
        let mut grad = vec![0.0; params.parameter_count()];
        let mut loss = 0.0;
        for (x, &w) in chunk_nodes.iter().zip(chunk_weights) {
            loss += accumulate_node(&mut ws, params, x, w, forcing(x), &mut grad)?;
        }
        Ok((loss, grad))
    };

    let pieces: Vec<Result<(f64, Vec<f64>)>> = if nodes.len() <= CHUNK {
        vec![run_chunk((nodes, weights))]
    } else {
        nodes
            .par_chunks(CHUNK)
            .zip(weights.par_chunks(CHUNK))
            .map(run_chunk)
            .collect()
    };
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.parameter_count()];
    for piece in pieces {
        let (l, g) = piece?;
        loss += l;
        for (a, b) in grad.iter_mut().zip(&g) {
            *a += b;
        }
    }
    Ok((loss, grad))
}

fn accumulate_node(
    ws: &mut Workspace,
    params: &NetworkParameters,
    x: &Point,
    w: f64,
    f: f64,
    grad: &mut [f64],
) -> Result<f64> {
    let d = params.dim();
    let (nn, dnn) = ws.forward(params, x);
    let (phi, dphi) = cutoff(d, x);
    let mut grad_u = [0.0; 3];
    for k in 0..d {
        grad_u[k] = dnn[k] * phi + nn * dphi[k];
    }
    let u = nn * phi;
    let energy = 0.5 * (grad_u[0] * grad_u[0] + grad_u[1] * grad_u[1] + grad_u[2] * grad_u[2]) + f * u;
    let loss = w * energy;
    if !loss.is_finite() {
        return Err(Error::NonFinite {
            value: loss,
            node: x[..d].to_vec(),
        });
    }
    if w == 0.0 {
        return Ok(0.0);
    }
    // ℓ = w(½|∇u|² + f u), ∇u = ∇ũ φ + ũ ∇φ, u = ũ φ
    let mut seed_u = w * f * phi;
    let mut seed_grad = [0.0; 3];
    for k in 0..d {
        let g = w * grad_u[k];
        seed_u += g * dphi[k];
        seed_grad[k] = g * phi;
    }
    ws.backward(params, seed_u, &seed_grad, grad);
    Ok(loss)
}
