//! Stochastic quadrature rules on master elements and their assembly into
//! global rules over a mesh.
//!
//! A [`Rule`] draws one [`QuadratureSample`] on its master element per call.
//! A global rule draws an independent sample for every mesh element and sums
//! the pushed-forward element contributions.

mod bias;
pub mod exactness;
pub mod symmetry;

use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{
    build_uniform_mesh, mat_vec, sample_uniform_cube, sample_uniform_simplex, AffineMap, MasterElement, Mesh,
    MeshFamily, Point,
};
use crate::numeric::pairwise_sum;

pub use bias::{bias_weight_on_mesh, bias_weight_w0};
pub use symmetry::tet_rotation_group;

const SQRT3: f64 = 1.732_050_807_568_877_2;

/// Default cap on rejection attempts per radial draw.
pub const DEFAULT_MAX_ATTEMPTS: usize = 10_000;

/// Stable rule identifiers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RuleId {
    Mc,
    P0,
    P1,
    P3,
    P1b,
    P1tri,
    P2tri,
    P1tet,
    P2tet,
}

impl RuleId {
    pub const ALL: [RuleId; 9] = [
        RuleId::Mc,
        RuleId::P0,
        RuleId::P1,
        RuleId::P3,
        RuleId::P1b,
        RuleId::P1tri,
        RuleId::P2tri,
        RuleId::P1tet,
        RuleId::P2tet,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            RuleId::Mc => "mc",
            RuleId::P0 => "p0",
            RuleId::P1 => "p1",
            RuleId::P3 => "p3",
            RuleId::P1b => "p1b",
            RuleId::P1tri => "p1tri",
            RuleId::P2tri => "p2tri",
            RuleId::P1tet => "p1tet",
            RuleId::P2tet => "p2tet",
        }
    }

    /// Polynomial order; `None` for Monte Carlo.
    pub fn order(&self) -> Option<u32> {
        match self {
            RuleId::Mc => None,
            RuleId::P0 => Some(0),
            RuleId::P1 | RuleId::P1b | RuleId::P1tri | RuleId::P1tet => Some(1),
            RuleId::P2tri | RuleId::P2tet => Some(2),
            RuleId::P3 => Some(3),
        }
    }

    pub fn unbiased(&self) -> bool {
        !matches!(self, RuleId::P1b)
    }

    pub fn supports_dim(&self, dim: usize) -> bool {
        match self {
            RuleId::Mc | RuleId::P0 | RuleId::P1 | RuleId::P3 => (1..=3).contains(&dim),
            RuleId::P1b => dim == 1,
            RuleId::P1tri | RuleId::P2tri => dim == 2,
            RuleId::P1tet | RuleId::P2tet => dim == 3,
        }
    }

    /// Rules defined in dimension `dim`.
    pub fn for_dim(dim: usize) -> Vec<RuleId> {
        RuleId::ALL.into_iter().filter(|r| r.supports_dim(dim)).collect()
    }
}

impl fmt::Display for RuleId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RuleId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        RuleId::ALL
            .into_iter()
            .find(|r| r.as_str() == s.to_ascii_lowercase())
            .ok_or_else(|| Error::invalid(format!("unknown rule id {s:?}")))
    }
}

/// How the radially weighted order-two rules draw their base point.
#[derive(Clone, Debug)]
pub enum RadialSampling {
    /// Direct rejection from the enclosing ball, capped at `max_attempts`.
    Rejection { max_attempts: usize },
    /// Uniform lookup into a pre-sampled pool.
    Database(Arc<Vec<Point>>),
}

impl Default for RadialSampling {
    fn default() -> Self {
        RadialSampling::Rejection {
            max_attempts: DEFAULT_MAX_ATTEMPTS,
        }
    }
}

/// Descriptor of a master-element rule.
#[derive(Clone, Debug)]
pub struct Rule {
    id: RuleId,
    dim: usize,
    points_per_element: usize,
    master: MasterElement,
    radial: RadialSampling,
}

/// One random draw of nodes and weights on a master element.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct QuadratureSample {
    pub nodes: Vec<Point>,
    pub weights: Vec<f64>,
}

impl QuadratureSample {
    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn clear(&mut self) {
        self.nodes.clear();
        self.weights.clear();
    }

    fn push(&mut self, x: Point, w: f64) {
        self.nodes.push(x);
        self.weights.push(w);
    }

    /// `Σ f(xⱼ) wⱼ` on the master element.
    pub fn apply<F: Fn(&Point) -> f64>(&self, f: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(x, w)| f(x) * w).sum()
    }
}

impl Rule {
    /// Rule `id` in dimension `dim`. Monte Carlo uses one point per element;
    /// see [`Rule::monte_carlo`] for an `N`-point rule.
    pub fn new(id: RuleId, dim: usize) -> Result<Self> {
        if !id.supports_dim(dim) {
            return Err(Error::invalid(format!("rule {id} is not defined in {dim}D")));
        }
        let master = match id {
            RuleId::Mc | RuleId::P0 => MasterElement::UnitCube { dim },
            RuleId::P1 | RuleId::P3 | RuleId::P1b => MasterElement::SymmetricCube { dim },
            RuleId::P1tri | RuleId::P2tri => MasterElement::Triangle,
            RuleId::P1tet | RuleId::P2tet => MasterElement::Tetrahedron,
        };
        let points_per_element = match (id, dim) {
            (RuleId::Mc | RuleId::P0, _) => 1,
            (RuleId::P1 | RuleId::P1b, _) => 2,
            (RuleId::P3, 1) => 3,
            (RuleId::P3, 2) => 5,
            (RuleId::P3, _) => 15,
            (RuleId::P1tri, _) => 3,
            (RuleId::P2tri | RuleId::P1tet, _) => 4,
            (RuleId::P2tet, _) => 13,
        };
        Ok(Rule {
            id,
            dim,
            points_per_element,
            master,
            radial: RadialSampling::default(),
        })
    }

    /// Vanilla Monte Carlo with `points` i.i.d. uniform nodes on `[0,1]^d`.
    pub fn monte_carlo(dim: usize, points: usize) -> Result<Self> {
        if points == 0 {
            return Err(Error::invalid("Monte Carlo needs at least one point"));
        }
        let mut rule = Rule::new(RuleId::Mc, dim)?;
        rule.points_per_element = points;
        Ok(rule)
    }

    /// Replace the radial sampler with a pool of `size` pre-drawn points.
    /// No effect on rules without a radial sampler.
    pub fn with_database<R: Rng + ?Sized>(mut self, size: usize, rng: &mut R) -> Result<Self> {
        if !self.uses_radial_sampling() {
            return Ok(self);
        }
        if size == 0 {
            return Err(Error::invalid("database size must be positive"));
        }
        let cap = self.max_attempts();
        let mut pool = Vec::with_capacity(size);
        for _ in 0..size {
            pool.push(radial_rejection_sample(&self.master, rng, cap)?.0);
        }
        self.radial = RadialSampling::Database(Arc::new(pool));
        Ok(self)
    }

    pub fn with_max_attempts(mut self, max_attempts: usize) -> Self {
        if let RadialSampling::Rejection { .. } = self.radial {
            self.radial = RadialSampling::Rejection { max_attempts };
        }
        self
    }

    fn max_attempts(&self) -> usize {
        match self.radial {
            RadialSampling::Rejection { max_attempts } => max_attempts,
            RadialSampling::Database(_) => DEFAULT_MAX_ATTEMPTS,
        }
    }

    pub fn id(&self) -> RuleId {
        self.id
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn points_per_element(&self) -> usize {
        self.points_per_element
    }

    pub fn master(&self) -> &MasterElement {
        &self.master
    }

    pub fn order(&self) -> Option<u32> {
        self.id.order()
    }

    pub fn unbiased(&self) -> bool {
        self.id.unbiased()
    }

    pub fn radial_sampling(&self) -> &RadialSampling {
        &self.radial
    }

    pub fn uses_radial_sampling(&self) -> bool {
        matches!(self.id, RuleId::P2tri | RuleId::P2tet)
    }

    /// Mesh family this rule integrates over.
    pub fn mesh_family(&self) -> MeshFamily {
        match (self.id, self.dim) {
            (RuleId::Mc, d) => MeshFamily::Single { dim: d },
            (RuleId::P1tri | RuleId::P2tri, _) => MeshFamily::Triangle,
            (RuleId::P1tet | RuleId::P2tet, _) => MeshFamily::Tetrahedron,
            (_, 1) => MeshFamily::Interval,
            (_, 2) => MeshFamily::Square,
            _ => MeshFamily::Cube,
        }
    }

    /// Draw one sample on the master element.
    pub fn sample_master<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<QuadratureSample> {
        let mut out = QuadratureSample::default();
        self.sample_into(rng, &mut out)?;
        Ok(out)
    }

    /// Append one master sample to `out`.
    pub fn sample_into<R: Rng + ?Sized>(&self, rng: &mut R, out: &mut QuadratureSample) -> Result<()> {
        let d = self.dim;
        match self.id {
            RuleId::Mc => {
                let w = 1.0 / self.points_per_element as f64;
                for _ in 0..self.points_per_element {
                    out.push(sample_uniform_cube(&self.master, rng), w);
                }
            }
            RuleId::P0 => out.push(sample_uniform_cube(&self.master, rng), 1.0),
            RuleId::P1 => {
                let x = sample_uniform_cube(&self.master, rng);
                let w = 2f64.powi(d as i32 - 1);
                out.push(x, w);
                out.push(neg(&x), w);
            }
            RuleId::P3 => match d {
                1 => {
                    for (x, w) in p3_line(rng) {
                        out.push([x, 0.0, 0.0], w);
                    }
                }
                2 => {
                    for (x, w) in p3_plane(rng) {
                        out.push([x[0], x[1], 0.0], w);
                    }
                }
                _ => {
                    let line = p3_line(rng);
                    let plane = p3_plane(rng);
                    for (x, wx) in line {
                        for (yz, wyz) in &plane {
                            out.push([x, yz[0], yz[1]], wx * wyz);
                        }
                    }
                }
            },
            RuleId::P1b => {
                let x1 = rng.random::<f64>();
                let x2 = -open_unit(rng);
                let gap = x2 - x1;
                out.push([x1, 0.0, 0.0], 2.0 * x2 / gap);
                out.push([x2, 0.0, 0.0], -2.0 * x1 / gap);
            }
            RuleId::P1tri => {
                let x = sample_uniform_simplex(&self.master, rng);
                let w = SQRT3 / 4.0;
                for r in symmetry::triangle_rotations() {
                    out.push(mat_vec(r, &x), w);
                }
            }
            RuleId::P2tri => {
                let x = self.radial_point(rng)?;
                let w1 = SQRT3 / (16.0 * norm2(&x));
                for r in symmetry::triangle_rotations() {
                    out.push(mat_vec(r, &x), w1);
                }
                out.push([0.0; 3], self.master.volume() - 3.0 * w1);
            }
            RuleId::P1tet => {
                let x = sample_uniform_simplex(&self.master, rng);
                for r in symmetry::tet_r0_powers() {
                    out.push(mat_vec(r, &x), 2.0 / 3.0);
                }
            }
            RuleId::P2tet => {
                let x = self.radial_point(rng)?;
                let w1 = 2.0 / (15.0 * norm2(&x));
                for r in tet_rotation_group() {
                    out.push(mat_vec(r, &x), w1);
                }
                out.push([0.0; 3], 8.0 / 3.0 - 12.0 * w1);
            }
        }
        Ok(())
    }

    fn radial_point<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<Point> {
        match &self.radial {
            RadialSampling::Rejection { max_attempts } => {
                radial_rejection_sample(&self.master, rng, *max_attempts).map(|(x, _)| x)
            }
            RadialSampling::Database(pool) => Ok(pool[rng.random_range(0..pool.len())]),
        }
    }
}

/// Uniform in `(0, 1]`.
#[inline]
fn open_unit<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    1.0 - rng.random::<f64>()
}

#[inline]
fn neg(x: &Point) -> Point {
    [-x[0], -x[1], -x[2]]
}

#[inline]
fn norm2(x: &Point) -> f64 {
    x[0] * x[0] + x[1] * x[1] + x[2] * x[2]
}

/// Three-point order-three rule on `[-1,1]` with `x₁ ~ 3x²` on `(0,1]`.
fn p3_line<R: Rng + ?Sized>(rng: &mut R) -> [(f64, f64); 3] {
    let x1 = open_unit(rng).cbrt();
    let w = 1.0 / (3.0 * x1 * x1);
    [(x1, w), (0.0, 2.0 - 2.0 * w), (-x1, w)]
}

/// Five-point order-three rule on `[-1,1]²` with `(x₁, y₁) ~ (3/2)(x² + y²)`
/// on `(0,1]²`, drawn as an equal mixture of `3x²·1` and `1·3y²`.
fn p3_plane<R: Rng + ?Sized>(rng: &mut R) -> [([f64; 2], f64); 5] {
    let a = open_unit(rng).cbrt();
    let b = open_unit(rng);
    let (x, y) = if rng.random::<bool>() { (a, b) } else { (b, a) };
    let w = 2.0 / (3.0 * (x * x + y * y));
    [
        ([x, y], w),
        ([-y, x], w),
        ([y, -x], w),
        ([-x, -y], w),
        ([0.0, 0.0], 4.0 - 4.0 * w),
    ]
}

/// Draw from the density `∝ |x|²` restricted to a simplex master by
/// rejection from the circumscribed ball. Returns the point and the number of
/// proposals used.
pub fn radial_rejection_sample<R: Rng + ?Sized>(
    master: &MasterElement,
    rng: &mut R,
    max_attempts: usize,
) -> Result<(Point, usize)> {
    let (name, exponent, radius) = match master {
        MasterElement::Triangle => ("p2tri", 0.25, 1.0),
        MasterElement::Tetrahedron => ("p2tet", 0.2, SQRT3),
        _ => return Err(Error::invalid("radial sampling needs a simplex master")),
    };
    for attempt in 1..=max_attempts {
        let r = radius * open_unit(rng).powf(exponent);
        let x = match master {
            MasterElement::Triangle => {
                let t = std::f64::consts::TAU * rng.random::<f64>();
                [r * t.cos(), r * t.sin(), 0.0]
            }
            _ => {
                let z = 2.0 * rng.random::<f64>() - 1.0;
                let t = std::f64::consts::TAU * rng.random::<f64>();
                let s = (1.0 - z * z).max(0.0).sqrt();
                [r * s * t.cos(), r * s * t.sin(), r * z]
            }
        };
        if master.contains(&x, 0.0) {
            return Ok((x, attempt));
        }
    }
    Err(Error::ResourceExhausted {
        rule: name,
        attempts: max_attempts,
    })
}

/// `Qₙ(f) = Σⱼ f(yₙ + Aₙxⱼ) wⱼ det(Aₙ)`.
pub fn integrate_element<F: Fn(&Point) -> f64>(sample: &QuadratureSample, map: &AffineMap, f: F) -> Result<f64> {
    let mut acc = 0.0;
    for (x, w) in sample.nodes.iter().zip(&sample.weights) {
        let y = map.map_point(x);
        let v = f(&y);
        if !v.is_finite() {
            return Err(Error::NonFinite {
                value: v,
                node: y[..map.dim()].to_vec(),
            });
        }
        acc += v * w;
    }
    Ok(acc * map.det())
}

/// One independent master sample per element, summed pairwise over elements.
pub fn integrate_global<F, R>(rule: &Rule, mesh: &Mesh, f: F, rng: &mut R) -> Result<f64>
where
    F: Fn(&Point) -> f64,
    R: Rng + ?Sized,
{
    check_compatible(rule, mesh)?;
    let mut sample = QuadratureSample::default();
    let mut contributions = Vec::with_capacity(mesh.len());
    for map in mesh.elements() {
        sample.clear();
        rule.sample_into(rng, &mut sample)?;
        contributions.push(integrate_element(&sample, map, &f)?);
    }
    Ok(pairwise_sum(&contributions))
}

/// Physical nodes `yₙ + Aₙxⱼ` and weights `wⱼ det(Aₙ)` of one global draw.
/// Consumes the random stream exactly like [`integrate_global`].
pub fn sample_global<R: Rng + ?Sized>(rule: &Rule, mesh: &Mesh, rng: &mut R) -> Result<QuadratureSample> {
    check_compatible(rule, mesh)?;
    let mut sample = QuadratureSample::default();
    let mut out = QuadratureSample {
        nodes: Vec::with_capacity(mesh.len() * rule.points_per_element()),
        weights: Vec::with_capacity(mesh.len() * rule.points_per_element()),
    };
    for map in mesh.elements() {
        sample.clear();
        rule.sample_into(rng, &mut sample)?;
        for (x, w) in sample.nodes.iter().zip(&sample.weights) {
            out.push(map.map_point(x), w * map.det());
        }
    }
    Ok(out)
}

fn check_compatible(rule: &Rule, mesh: &Mesh) -> Result<()> {
    if rule.master() != mesh.master() {
        return Err(Error::invalid(format!(
            "rule {} lives on {} but the mesh uses {}",
            rule.id(),
            rule.master().name(),
            mesh.master().name()
        )));
    }
    Ok(())
}

/// Vanilla Monte Carlo on `[0,1]^d` with `n` i.i.d. uniform nodes.
pub fn mc_integrate<F, R>(f: F, dim: usize, n: usize, rng: &mut R) -> Result<f64>
where
    F: Fn(&Point) -> f64,
    R: Rng + ?Sized,
{
    let rule = Rule::monte_carlo(dim, n)?;
    let mesh = build_uniform_mesh(MeshFamily::Single { dim }, 1, *rule.master())?;
    integrate_global(&rule, &mesh, f, rng)
}

/// A rule paired with the uniform mesh it is applied on.
#[derive(Clone, Debug)]
pub struct GlobalRule {
    pub rule: Rule,
    pub mesh: Mesh,
}

impl GlobalRule {
    /// `n` is the number of cells per axis, or the number of points for
    /// Monte Carlo.
    pub fn new(id: RuleId, dim: usize, n: usize) -> Result<Self> {
        let rule = if id == RuleId::Mc {
            Rule::monte_carlo(dim, n)?
        } else {
            Rule::new(id, dim)?
        };
        let mesh_n = if id == RuleId::Mc { 1 } else { n };
        let mesh = build_uniform_mesh(rule.mesh_family(), mesh_n, *rule.master())?;
        Ok(GlobalRule { rule, mesh })
    }

    /// Largest resolution whose point count does not exceed `points`.
    pub fn with_point_budget(id: RuleId, dim: usize, points: usize) -> Result<Self> {
        if id == RuleId::Mc {
            return GlobalRule::new(id, dim, points);
        }
        let per_cell = Rule::new(id, dim)?.points_per_element() * Rule::new(id, dim)?.mesh_family().elements_per_cell();
        let mut n = 1;
        while (n + 1usize).pow(dim as u32) * per_cell <= points {
            n += 1;
        }
        GlobalRule::new(id, dim, n)
    }

    pub fn points(&self) -> usize {
        self.rule.points_per_element() * self.mesh.len()
    }

    pub fn integrate<F, R>(&self, f: F, rng: &mut R) -> Result<f64>
    where
        F: Fn(&Point) -> f64,
        R: Rng + ?Sized,
    {
        integrate_global(&self.rule, &self.mesh, f, rng)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<QuadratureSample> {
        sample_global(&self.rule, &self.mesh, rng)
    }
}
