//! Effective weight density of the biased two-point rule.

use crate::geometry::{Mesh, Point};

/// `W₀(x) = 2 + 2|x| ln(|x| / (1 + |x|))` on `[-1, 1]`, with `W₀(0) = 2`.
///
/// The biased rule's expectation on the master interval is `∫ f W₀`.
pub fn bias_weight_w0(x: f64) -> f64 {
    let a = x.abs();
    if a == 0.0 {
        return 2.0;
    }
    2.0 + 2.0 * a * (a / (1.0 + a)).ln()
}

/// `W_h` on a 1D mesh: `W₀` evaluated at the master coordinate of `x`.
/// Returns `None` if `x` is outside the mesh or the mesh is not 1D.
pub fn bias_weight_on_mesh(mesh: &Mesh, x: f64) -> Option<f64> {
    if mesh.dim() != 1 {
        return None;
    }
    let p: Point = [x, 0.0, 0.0];
    let idx = *mesh.locate(&p, 1e-14).first()?;
    let xi = mesh.elements()[idx].inverse_point(&p)[0];
    Some(bias_weight_w0(xi.clamp(-1.0, 1.0)))
}
