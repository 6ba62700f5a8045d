//! Random-polynomial exactness checks.
//!
//! Reference integrals come from deterministic routes that do not touch the
//! stochastic rules: closed-form monomial integrals over cubes, and a
//! collapsed (Duffy) tensor Gauss–Legendre rule over simplices, which is exact
//! for polynomials of the degrees used here.

use rand::Rng;
use serde::Serialize;

use crate::error::Result;
use crate::geometry::{MasterElement, Point};
use crate::numeric::gauss_legendre;

use super::{GlobalRule, Rule};

/// Relative tolerance: `|Q − I| ≤ tol · (1 + |I|)`.
pub const EXACTNESS_TOLERANCE: f64 = 1e-10;

/// Sum of `coeff · x^a y^b z^c` terms.
#[derive(Clone, Debug, PartialEq)]
pub struct Polynomial {
    dim: usize,
    terms: Vec<([u32; 3], f64)>,
}

impl Polynomial {
    /// All monomials of total degree `≤ degree` with coefficients `U[-1, 1]`.
    pub fn random<R: Rng + ?Sized>(dim: usize, degree: u32, rng: &mut R) -> Self {
        let terms = monomials(dim, degree)
            .into_iter()
            .map(|e| (e, rng.random_range(-1.0..1.0)))
            .collect();
        Polynomial { dim, terms }
    }

    pub fn from_terms(dim: usize, terms: Vec<([u32; 3], f64)>) -> Self {
        Polynomial { dim, terms }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn eval(&self, x: &Point) -> f64 {
        self.terms
            .iter()
            .map(|(e, c)| c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32))
            .sum()
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|(e, _)| e.iter().sum()).max().unwrap_or(0)
    }

    /// Exact integral over the box `[lo, hi]^d`.
    pub fn integral_over_cube(&self, lo: f64, hi: f64) -> f64 {
        let line = |k: u32| (hi.powi(k as i32 + 1) - lo.powi(k as i32 + 1)) / (k as f64 + 1.0);
        self.terms
            .iter()
            .map(|(e, c)| c * (0..self.dim).map(|i| line(e[i])).product::<f64>())
            .sum()
    }

    /// Exact integral over a master element.
    pub fn integral_over(&self, master: &MasterElement) -> f64 {
        match master.cube_bounds() {
            Some((lo, hi)) => self.integral_over_cube(lo, hi),
            None => simplex_integral(master, self.degree(), |x| self.eval(x)),
        }
    }
}

fn monomials(dim: usize, degree: u32) -> Vec<[u32; 3]> {
    let mut out = Vec::new();
    let max_y = if dim >= 2 { degree } else { 0 };
    let max_z = if dim >= 3 { degree } else { 0 };
    for a in 0..=degree {
        for b in 0..=max_y {
            for c in 0..=max_z {
                if a + b + c <= degree {
                    out.push([a, b, c]);
                }
            }
        }
    }
    out
}

/// Collapsed tensor Gauss–Legendre integration over a simplex master, exact
/// for polynomial integrands of total degree `≤ degree`.
fn simplex_integral<F: Fn(&Point) -> f64>(master: &MasterElement, degree: u32, f: F) -> f64 {
    let d = master.dim();
    let v = master.vertices();
    let m = (degree as usize + d) / 2 + 2;
    let (gx, gw) = gauss_legendre(m);
    let gx: Vec<f64> = gx.iter().map(|x| 0.5 * (x + 1.0)).collect();
    let gw: Vec<f64> = gw.iter().map(|w| 0.5 * w).collect();

    // |det| of the edge matrix times the standard simplex integral
    let mut edges = crate::geometry::IDENTITY;
    for i in 1..=d {
        for r in 0..d {
            edges[r][i - 1] = v[i][r] - v[0][r];
        }
    }
    let jac = crate::geometry::mat_det(&edges).abs();
    let point = |lam: &[f64]| -> Point {
        let mut x = v[0];
        for (i, l) in lam.iter().enumerate() {
            for r in 0..d {
                x[r] += l * (v[i + 1][r] - v[0][r]);
            }
        }
        x
    };

    let mut acc = 0.0;
    match d {
        2 => {
            for (u, wu) in gx.iter().zip(&gw) {
                for (s, ws) in gx.iter().zip(&gw) {
                    let lam = [*u, (1.0 - u) * s];
                    acc += wu * ws * (1.0 - u) * f(&point(&lam));
                }
            }
        }
        _ => {
            for (u, wu) in gx.iter().zip(&gw) {
                for (s, ws) in gx.iter().zip(&gw) {
                    for (t, wt) in gx.iter().zip(&gw) {
                        let lam = [*u, (1.0 - u) * s, (1.0 - u) * (1.0 - s) * t];
                        acc += wu * ws * wt * (1.0 - u) * (1.0 - u) * (1.0 - s) * f(&point(&lam));
                    }
                }
            }
        }
    }
    acc * jac
}

/// Outcome of one exactness suite at a fixed polynomial degree.
#[derive(Clone, Debug, Serialize)]
pub struct DegreeCheck {
    pub degree: u32,
    pub trials: usize,
    pub max_abs_error_master: f64,
    pub max_abs_error_global: f64,
    pub passed: bool,
}

/// Master and global exactness for `trials` random polynomials of degree
/// `degree`, the global check on a uniform mesh with `mesh_n` cells per axis.
pub fn check_degree<R: Rng + ?Sized>(
    rule: &Rule,
    degree: u32,
    trials: usize,
    mesh_n: usize,
    rng: &mut R,
) -> Result<DegreeCheck> {
    let master = *rule.master();
    let global = GlobalRule::new(rule.id(), rule.dim(), mesh_n)?;
    let global = GlobalRule {
        rule: rule.clone(),
        mesh: global.mesh,
    };
    let mut max_master = 0.0f64;
    let mut max_global = 0.0f64;
    let mut passed = true;
    for _ in 0..trials {
        let poly = Polynomial::random(rule.dim(), degree, rng);

        let exact = poly.integral_over(&master);
        let q = rule.sample_master(rng)?.apply(|x| poly.eval(x));
        let err = (q - exact).abs();
        max_master = max_master.max(err);
        passed &= err <= EXACTNESS_TOLERANCE * (1.0 + exact.abs());

        let exact = poly.integral_over_cube(0.0, 1.0);
        let q = global.integrate(|x| poly.eval(x), rng)?;
        let err = (q - exact).abs();
        max_global = max_global.max(err);
        passed &= err <= EXACTNESS_TOLERANCE * (1.0 + exact.abs());
    }
    Ok(DegreeCheck {
        degree,
        trials,
        max_abs_error_master: max_master,
        max_abs_error_global: max_global,
        passed,
    })
}

/// Largest deviation `|Σw − |master||` over `draws` samples.
pub fn weight_sum_deviation<R: Rng + ?Sized>(rule: &Rule, draws: usize, rng: &mut R) -> Result<f64> {
    let vol = rule.master().volume();
    let mut worst = 0.0f64;
    for _ in 0..draws {
        let s = rule.sample_master(rng)?;
        worst = worst.max((s.weights.iter().sum::<f64>() - vol).abs());
    }
    Ok(worst)
}

/// Full report written by the `exactness` command.
#[derive(Clone, Debug, Serialize)]
pub struct ExactnessReport {
    pub rule: String,
    pub dim: usize,
    pub order: Option<u32>,
    /// Checks at every degree up to the rule's order; all must pass.
    pub checks: Vec<DegreeCheck>,
    /// Degree `order + 1`, informational only.
    pub probe: Option<DegreeCheck>,
    pub max_weight_sum_deviation: f64,
    pub passed: bool,
}

pub fn exactness_report<R: Rng + ?Sized>(rule: &Rule, trials: usize, rng: &mut R) -> Result<ExactnessReport> {
    const MESH_N: usize = 3;
    let mut checks = Vec::new();
    let mut probe = None;
    if let Some(order) = rule.order() {
        for degree in 0..=order {
            checks.push(check_degree(rule, degree, trials, MESH_N, rng)?);
        }
        probe = Some(check_degree(rule, order + 1, trials, MESH_N, rng)?);
    }
    let dev = weight_sum_deviation(rule, trials, rng)?;
    let passed = checks.iter().all(|c| c.passed) && dev <= 1e-12 * rule.master().volume().max(1.0);
    Ok(ExactnessReport {
        rule: rule.id().to_string(),
        dim: rule.dim(),
        order: rule.order(),
        checks,
        probe,
        max_weight_sum_deviation: dev,
        passed,
    })
}
