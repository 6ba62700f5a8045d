//! Master elements, affine element maps and uniform partitions of `[0,1]^d`.
//!
//! Points are stored as `[f64; 3]` regardless of dimension; coordinates past
//! the active dimension are kept at zero. Affine maps embed their `d×d` matrix
//! in a `3×3` block with the identity on the unused diagonal, so determinants
//! and inverses can share one code path.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub type Point = [f64; 3];
pub type Mat3 = [[f64; 3]; 3];

pub const IDENTITY: Mat3 = [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]];

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

/// Vertices of the equilateral reference triangle, inscribed in the unit circle.
pub const TRIANGLE_VERTICES: [Point; 3] = [[0.0, 1.0, 0.0], [-HALF_SQRT3, -0.5, 0.0], [HALF_SQRT3, -0.5, 0.0]];

/// Vertices of the reference tetrahedron (alternate corners of `[-1,1]^3`).
pub const TETRAHEDRON_VERTICES: [Point; 4] = [[1.0, 1.0, 1.0], [-1.0, -1.0, 1.0], [-1.0, 1.0, -1.0], [1.0, -1.0, -1.0]];

/// Reference domain on which one random quadrature sample is defined.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MasterElement {
    /// `[0,1]^d`.
    UnitCube { dim: usize },
    /// `[-1,1]^d`.
    SymmetricCube { dim: usize },
    /// Equilateral triangle with vertices [`TRIANGLE_VERTICES`].
    Triangle,
    /// Tetrahedron with vertices [`TETRAHEDRON_VERTICES`].
    Tetrahedron,
}

impl MasterElement {
    pub fn dim(&self) -> usize {
        match *self {
            MasterElement::UnitCube { dim } | MasterElement::SymmetricCube { dim } => dim,
            MasterElement::Triangle => 2,
            MasterElement::Tetrahedron => 3,
        }
    }

    pub fn volume(&self) -> f64 {
        match *self {
            MasterElement::UnitCube { .. } => 1.0,
            MasterElement::SymmetricCube { dim } => 2f64.powi(dim as i32),
            MasterElement::Triangle => 3.0 * HALF_SQRT3 / 2.0,
            MasterElement::Tetrahedron => 8.0 / 3.0,
        }
    }

    /// Simplex vertices; empty for cubes.
    pub fn vertices(&self) -> &'static [Point] {
        match self {
            MasterElement::Triangle => &TRIANGLE_VERTICES,
            MasterElement::Tetrahedron => &TETRAHEDRON_VERTICES,
            _ => &[],
        }
    }

    pub fn is_simplex(&self) -> bool {
        matches!(self, MasterElement::Triangle | MasterElement::Tetrahedron)
    }

    /// Bounds `(lo, hi)` of a cube master.
    pub fn cube_bounds(&self) -> Option<(f64, f64)> {
        match self {
            MasterElement::UnitCube { .. } => Some((0.0, 1.0)),
            MasterElement::SymmetricCube { .. } => Some((-1.0, 1.0)),
            _ => None,
        }
    }

    /// Whether `x` lies in the closed element, up to `tol`.
    pub fn contains(&self, x: &Point, tol: f64) -> bool {
        if let Some((lo, hi)) = self.cube_bounds() {
            return x[..self.dim()].iter().all(|&c| c >= lo - tol && c <= hi + tol);
        }
        barycentric(self, x).iter().take(self.dim() + 1).all(|&l| l >= -tol)
    }

    pub fn name(&self) -> String {
        match *self {
            MasterElement::UnitCube { dim } => format!("unit_cube_{dim}d"),
            MasterElement::SymmetricCube { dim } => format!("symmetric_cube_{dim}d"),
            MasterElement::Triangle => "ref_triangle".into(),
            MasterElement::Tetrahedron => "ref_tetrahedron".into(),
        }
    }
}

/// Barycentric coordinates of `x` with respect to a simplex master.
/// Only the first `dim + 1` entries are meaningful.
pub fn barycentric(master: &MasterElement, x: &Point) -> [f64; 4] {
    let v = master.vertices();
    let d = master.dim();
    let mut edges = IDENTITY;
    for (i, vi) in v.iter().enumerate().skip(1) {
        for r in 0..d {
            edges[r][i - 1] = vi[r] - v[0][r];
        }
    }
    let inv = mat_inverse(&edges);
    let rel = sub(x, &v[0]);
    let lam = mat_vec(&inv, &rel);
    let mut out = [0.0; 4];
    let mut rest = 1.0;
    for i in 0..d {
        out[i + 1] = lam[i];
        rest -= lam[i];
    }
    out[0] = rest;
    out
}

/// `x ↦ A x + y` with `det A > 0`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AffineMap {
    dim: usize,
    a: Mat3,
    offset: Point,
    det: f64,
}

impl AffineMap {
    /// `a` must carry the identity outside its leading `dim×dim` block.
    pub fn new(dim: usize, a: Mat3, offset: Point) -> Result<Self> {
        if !(1..=3).contains(&dim) {
            return Err(Error::invalid(format!("dimension {dim} not in 1..=3")));
        }
        let det = mat_det(&a);
        if det <= 0.0 || !det.is_finite() {
            return Err(Error::invalid(format!("affine map determinant {det} is not positive")));
        }
        Ok(AffineMap { dim, a, offset, det })
    }

    pub fn identity(dim: usize) -> Self {
        AffineMap {
            dim,
            a: IDENTITY,
            offset: [0.0; 3],
            det: 1.0,
        }
    }

    /// Uniform scaling by `s` followed by a shift.
    pub fn scaled(dim: usize, s: f64, offset: Point) -> Result<Self> {
        let mut a = IDENTITY;
        for (i, row) in a.iter_mut().enumerate().take(dim) {
            row[i] = s;
        }
        Self::new(dim, a, offset)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn matrix(&self) -> &Mat3 {
        &self.a
    }

    pub fn offset(&self) -> &Point {
        &self.offset
    }

    pub fn det(&self) -> f64 {
        self.det
    }

    #[inline]
    pub fn map_point(&self, x: &Point) -> Point {
        let mut out = self.offset;
        for (r, o) in out.iter_mut().enumerate().take(self.dim) {
            for c in 0..self.dim {
                *o += self.a[r][c] * x[c];
            }
        }
        out
    }

    /// Preimage of `x` in master coordinates.
    pub fn inverse_point(&self, x: &Point) -> Point {
        let inv = mat_inverse(&self.a);
        let mut rel = sub(x, &self.offset);
        for c in rel.iter_mut().skip(self.dim) {
            *c = 0.0;
        }
        let mut out = mat_vec(&inv, &rel);
        for c in out.iter_mut().skip(self.dim) {
            *c = 0.0;
        }
        out
    }

    /// `‖A‖_F · ‖A⁻¹‖_F` over the active block.
    pub fn condition_number(&self) -> f64 {
        let inv = mat_inverse(&self.a);
        frobenius(&self.a, self.dim) * frobenius(&inv, self.dim)
    }
}

/// Partition families of `[0,1]^d`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MeshFamily {
    Interval,
    Square,
    Cube,
    Triangle,
    Tetrahedron,
    /// The whole unit cube as one element (used by vanilla Monte Carlo).
    Single {
        dim: usize,
    },
}

impl MeshFamily {
    pub fn dim(&self) -> usize {
        match *self {
            MeshFamily::Interval => 1,
            MeshFamily::Square | MeshFamily::Triangle => 2,
            MeshFamily::Cube | MeshFamily::Tetrahedron => 3,
            MeshFamily::Single { dim } => dim,
        }
    }

    /// Elements produced per grid cell.
    pub fn elements_per_cell(&self) -> usize {
        match self {
            MeshFamily::Triangle => 2,
            MeshFamily::Tetrahedron => 5,
            _ => 1,
        }
    }
}

/// Diagonal used to split each square cell into two triangles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Diagonal {
    /// From the top-left corner to the bottom-right corner of every cell.
    AntiDiagonal,
}

/// A list of affine images of one master element partitioning `[0,1]^d`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Mesh {
    master: MasterElement,
    family: MeshFamily,
    n: usize,
    elements: Vec<AffineMap>,
    diagonal: Option<Diagonal>,
}

impl Mesh {
    pub fn master(&self) -> &MasterElement {
        &self.master
    }

    pub fn family(&self) -> MeshFamily {
        self.family
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn dim(&self) -> usize {
        self.master.dim()
    }

    pub fn elements(&self) -> &[AffineMap] {
        &self.elements
    }

    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn diagonal(&self) -> Option<Diagonal> {
        self.diagonal
    }

    /// Σ det(Aₙ)·|master|; equals one for a partition of the unit cube.
    pub fn total_volume(&self) -> f64 {
        let vols: Vec<f64> = self.elements.iter().map(|e| e.det() * self.master.volume()).collect();
        crate::numeric::pairwise_sum(&vols)
    }

    /// Indices of elements whose closure contains `x`.
    pub fn locate(&self, x: &Point, tol: f64) -> Vec<usize> {
        self.elements
            .iter()
            .enumerate()
            .filter(|(_, e)| self.master.contains(&e.inverse_point(x), tol))
            .map(|(i, _)| i)
            .collect()
    }

    pub fn max_condition_number(&self) -> f64 {
        self.elements
            .iter()
            .map(AffineMap::condition_number)
            .fold(0.0, f64::max)
    }

    pub fn summary(&self) -> MeshSummary {
        let (det_min, det_max) = self.elements.iter().fold((f64::INFINITY, 0.0f64), |(lo, hi), e| {
            (lo.min(e.det()), hi.max(e.det()))
        });
        MeshSummary {
            family: self.family,
            master: self.master.name(),
            n: self.n,
            elements: self.elements.len(),
            det_min,
            det_max,
            diagonal: self.diagonal,
        }
    }
}

/// Compact JSON-serialisable description of a mesh.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeshSummary {
    pub family: MeshFamily,
    pub master: String,
    pub n: usize,
    pub elements: usize,
    pub det_min: f64,
    pub det_max: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub diagonal: Option<Diagonal>,
}

/// Uniform partition of `[0,1]^d` with `n` cells per axis.
///
/// Intervals, squares and cubes give `n^d` elements, triangles `2n²` and
/// tetrahedra `5n³`. `Single` requires `n = 1` and a unit-cube master.
pub fn build_uniform_mesh(family: MeshFamily, n: usize, master: MasterElement) -> Result<Mesh> {
    if n == 0 {
        return Err(Error::invalid("mesh resolution must be at least 1"));
    }
    let dim = family.dim();
    if !(1..=3).contains(&dim) || master.dim() != dim {
        return Err(Error::invalid(format!(
            "{family:?} mesh is {dim}-dimensional but master {} is {}-dimensional",
            master.name(),
            master.dim()
        )));
    }
    let compatible = match family {
        MeshFamily::Interval | MeshFamily::Square | MeshFamily::Cube => master.cube_bounds().is_some(),
        MeshFamily::Single { .. } => matches!(master, MasterElement::UnitCube { .. }) && n == 1,
        MeshFamily::Triangle => master == MasterElement::Triangle,
        MeshFamily::Tetrahedron => master == MasterElement::Tetrahedron,
    };
    if !compatible {
        return Err(Error::invalid(format!(
            "master {} cannot build a {family:?} mesh with n = {n}",
            master.name()
        )));
    }

    let h = 1.0 / n as f64;
    let mut elements = Vec::with_capacity(n.pow(dim as u32) * family.elements_per_cell());
    for cell in grid_cells(n, dim) {
        let corner: Point = [cell[0] as f64 * h, cell[1] as f64 * h, cell[2] as f64 * h];
        match family {
            MeshFamily::Triangle => {
                for tri in split_square(&corner, h) {
                    elements.push(simplex_map(&master, &tri)?);
                }
            }
            MeshFamily::Tetrahedron => {
                for tet in split_cube(&corner, h) {
                    elements.push(simplex_map(&master, &tet)?);
                }
            }
            _ => {
                let (lo, hi) = master.cube_bounds().expect("checked above");
                let s = h / (hi - lo);
                let mut offset = [0.0; 3];
                for i in 0..dim {
                    offset[i] = corner[i] - s * lo;
                }
                elements.push(AffineMap::scaled(dim, s, offset)?);
            }
        }
    }
    Ok(Mesh {
        master,
        family,
        n,
        elements,
        diagonal: (family == MeshFamily::Triangle).then_some(Diagonal::AntiDiagonal),
    })
}

fn grid_cells(n: usize, dim: usize) -> impl Iterator<Item = [usize; 3]> {
    let ny = if dim >= 2 { n } else { 1 };
    let nz = if dim >= 3 { n } else { 1 };
    (0..nz).flat_map(move |k| (0..ny).flat_map(move |j| (0..n).map(move |i| [i, j, k])))
}

fn split_square(corner: &Point, h: f64) -> [Vec<Point>; 2] {
    let [x, y, _] = *corner;
    [
        vec![[x, y, 0.0], [x + h, y, 0.0], [x, y + h, 0.0]],
        vec![[x + h, y + h, 0.0], [x, y + h, 0.0], [x + h, y, 0.0]],
    ]
}

/// Corners of the reference partition of `[0,1]^3`: a central tetrahedron on
/// `p₁..p₄` and four corner tetrahedra obtained by replacing one `pᵢ` with its
/// complement.
const CUBE_SPLIT_VERTICES: [Point; 4] = [[1.0, 1.0, 1.0], [0.0, 0.0, 1.0], [0.0, 1.0, 0.0], [1.0, 0.0, 0.0]];

fn split_cube(corner: &Point, h: f64) -> Vec<Vec<Point>> {
    let place = |p: &Point| -> Point { [corner[0] + h * p[0], corner[1] + h * p[1], corner[2] + h * p[2]] };
    let complement = |p: &Point| -> Point { [1.0 - p[0], 1.0 - p[1], 1.0 - p[2]] };
    let mut out = Vec::with_capacity(5);
    out.push(CUBE_SPLIT_VERTICES.iter().map(place).collect());
    for swap in 0..4 {
        out.push(
            CUBE_SPLIT_VERTICES
                .iter()
                .enumerate()
                .map(|(i, p)| if i == swap { place(&complement(p)) } else { place(p) })
                .collect(),
        );
    }
    out
}

/// Affine map sending the master simplex onto `target`, reordering two target
/// vertices when needed so the determinant is positive.
pub fn simplex_map(master: &MasterElement, target: &[Point]) -> Result<AffineMap> {
    let v = master.vertices();
    let d = master.dim();
    if v.len() != d + 1 || target.len() != d + 1 {
        return Err(Error::invalid("simplex map needs d + 1 vertices"));
    }
    let mut t: Vec<Point> = target.to_vec();
    let mut a = affine_from_vertices(v, &t, d);
    if mat_det(&a) < 0.0 {
        t.swap(1, 2);
        a = affine_from_vertices(v, &t, d);
    }
    let av0 = mat_vec(&a, &v[0]);
    let mut offset = [0.0; 3];
    for i in 0..d {
        offset[i] = t[0][i] - av0[i];
    }
    AffineMap::new(d, a, offset)
}

fn affine_from_vertices(v: &[Point], t: &[Point], d: usize) -> Mat3 {
    let mut ev = IDENTITY;
    let mut et = IDENTITY;
    for i in 1..=d {
        for r in 0..d {
            ev[r][i - 1] = v[i][r] - v[0][r];
            et[r][i - 1] = t[i][r] - t[0][r];
        }
    }
    mat_mul(&et, &mat_inverse(&ev))
}

/// Barycentric combination of sorted uniforms `a₁ ≤ … ≤ a_d`:
/// `a₁v₁ + (a₂−a₁)v₂ + … + (1−a_d)v_{d+1}`.
pub fn simplex_from_sorted(master: &MasterElement, sorted: &[f64]) -> Point {
    let v = master.vertices();
    let d = master.dim();
    debug_assert_eq!(sorted.len(), d);
    let mut out = [0.0; 3];
    let mut prev = 0.0;
    for i in 0..=d {
        let next = if i < d { sorted[i] } else { 1.0 };
        let lam = next - prev;
        for r in 0..d {
            out[r] += lam * v[i][r];
        }
        prev = next;
    }
    out
}

/// Uniform draw from a simplex master.
///
/// # Panics
/// If `master` is not a simplex.
pub fn sample_uniform_simplex<R: Rng + ?Sized>(master: &MasterElement, rng: &mut R) -> Point {
    assert!(master.is_simplex(), "{} is not a simplex", master.name());
    let d = master.dim();
    let mut a = [0.0; 3];
    for ai in a.iter_mut().take(d) {
        *ai = rng.random::<f64>();
    }
    a[..d].sort_by(f64::total_cmp);
    simplex_from_sorted(master, &a[..d])
}

/// Uniform draw from a cube master.
pub fn sample_uniform_cube<R: Rng + ?Sized>(master: &MasterElement, rng: &mut R) -> Point {
    let (lo, hi) = master.cube_bounds().expect("cube master");
    let mut out = [0.0; 3];
    for c in out.iter_mut().take(master.dim()) {
        *c = lo + (hi - lo) * rng.random::<f64>();
    }
    out
}

// --- 3×3 helpers -----------------------------------------------------------

pub fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|k| a[i][k] * b[k][j]).sum();
        }
    }
    out
}

#[inline]
pub fn mat_vec(a: &Mat3, x: &Point) -> Point {
    [
        a[0][0] * x[0] + a[0][1] * x[1] + a[0][2] * x[2],
        a[1][0] * x[0] + a[1][1] * x[1] + a[1][2] * x[2],
        a[2][0] * x[0] + a[2][1] * x[1] + a[2][2] * x[2],
    ]
}

pub fn mat_det(a: &Mat3) -> f64 {
    a[0][0] * (a[1][1] * a[2][2] - a[1][2] * a[2][1]) - a[0][1] * (a[1][0] * a[2][2] - a[1][2] * a[2][0])
        + a[0][2] * (a[1][0] * a[2][1] - a[1][1] * a[2][0])
}

pub fn mat_inverse(a: &Mat3) -> Mat3 {
    let det = mat_det(a);
    let mut inv = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            // cofactor of (j, i)
            let (r0, r1) = others(j);
            let (c0, c1) = others(i);
            let minor = a[r0][c0] * a[r1][c1] - a[r0][c1] * a[r1][c0];
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            inv[i][j] = sign * minor / det;
        }
    }
    inv
}

fn others(i: usize) -> (usize, usize) {
    match i {
        0 => (1, 2),
        1 => (0, 2),
        _ => (0, 1),
    }
}

fn frobenius(a: &Mat3, dim: usize) -> f64 {
    let mut s = 0.0;
    for row in a.iter().take(dim) {
        for v in row.iter().take(dim) {
            s += v * v;
        }
    }
    s.sqrt()
}

#[inline]
fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn sym(dim: usize) -> MasterElement {
        MasterElement::SymmetricCube { dim }
    }

    #[test]
    fn master_volumes() {
        assert!((MasterElement::Triangle.volume() - 3.0 * 3f64.sqrt() / 4.0).abs() < 1e-15);
        assert_eq!(MasterElement::Tetrahedron.volume(), 8.0 / 3.0);
        assert_eq!(sym(3).volume(), 8.0);
        assert!((HALF_SQRT3 - 3f64.sqrt() / 2.0).abs() < 1e-16);
    }

    #[test]
    fn tetrahedron_mesh_volumes() {
        let mesh = build_uniform_mesh(MeshFamily::Tetrahedron, 1, MasterElement::Tetrahedron).unwrap();
        assert_eq!(mesh.len(), 5);
        let vols: Vec<f64> = mesh.elements().iter().map(|e| e.det() * 8.0 / 3.0).collect();
        assert!((vols[0] - 1.0 / 3.0).abs() < 1e-14);
        for v in &vols[1..] {
            assert!((v - 1.0 / 6.0).abs() < 1e-14);
        }
    }

    #[test]
    fn interval_mesh_on_symmetric_master() {
        let mesh = build_uniform_mesh(MeshFamily::Interval, 4, sym(1)).unwrap();
        assert_eq!(mesh.len(), 4);
        for e in mesh.elements() {
            assert!((e.det() - 0.125).abs() < 1e-16);
        }
        assert!((mesh.total_volume() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn triangle_mesh_count_and_volume() {
        let mesh = build_uniform_mesh(MeshFamily::Triangle, 3, MasterElement::Triangle).unwrap();
        assert_eq!(mesh.len(), 18);
        // summation oracle over element vertex images
        let total: f64 = mesh
            .elements()
            .iter()
            .map(|e| {
                let p: Vec<Point> = TRIANGLE_VERTICES.iter().map(|v| e.map_point(v)).collect();
                0.5 * ((p[1][0] - p[0][0]) * (p[2][1] - p[0][1]) - (p[2][0] - p[0][0]) * (p[1][1] - p[0][1]))
            })
            .sum();
        assert!((total - 1.0).abs() < 1e-12);
        assert!((mesh.total_volume() - 1.0).abs() < 1e-12);
        assert_eq!(mesh.diagonal(), Some(Diagonal::AntiDiagonal));
    }

    #[test]
    fn every_family_partitions_the_unit_cube() {
        let cases = [
            (MeshFamily::Interval, MasterElement::UnitCube { dim: 1 }),
            (MeshFamily::Interval, sym(1)),
            (MeshFamily::Square, MasterElement::UnitCube { dim: 2 }),
            (MeshFamily::Square, sym(2)),
            (MeshFamily::Cube, sym(3)),
            (MeshFamily::Triangle, MasterElement::Triangle),
            (MeshFamily::Tetrahedron, MasterElement::Tetrahedron),
        ];
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for (family, master) in cases {
            let mut conds = Vec::new();
            for n in 1..=4 {
                let mesh = build_uniform_mesh(family, n, master).unwrap();
                assert!((mesh.total_volume() - 1.0).abs() < 1e-12, "{family:?} n={n}");
                conds.push(mesh.max_condition_number());
                for _ in 0..200 {
                    let mut x = [0.0; 3];
                    for c in x.iter_mut().take(family.dim()) {
                        *c = rng.random::<f64>();
                    }
                    assert_eq!(mesh.locate(&x, 1e-12).len(), 1, "{family:?} n={n} x={x:?}");
                }
            }
            for c in &conds {
                assert!((c - conds[0]).abs() < 1e-9 * conds[0], "{family:?}: {conds:?}");
            }
        }
    }

    #[test]
    fn mismatched_inputs_are_rejected() {
        assert!(build_uniform_mesh(MeshFamily::Interval, 0, sym(1)).is_err());
        assert!(build_uniform_mesh(MeshFamily::Square, 2, sym(1)).is_err());
        assert!(build_uniform_mesh(MeshFamily::Triangle, 2, sym(2)).is_err());
        assert!(build_uniform_mesh(MeshFamily::Single { dim: 2 }, 2, MasterElement::UnitCube { dim: 2 }).is_err());
    }

    #[test]
    fn map_point_examples() {
        let id = AffineMap::identity(2);
        assert_eq!(id.map_point(&[0.3, 0.7, 0.0]), [0.3, 0.7, 0.0]);
        let half = AffineMap::scaled(1, 0.5, [0.5, 0.0, 0.0]).unwrap();
        assert_eq!(half.map_point(&[1.0, 0.0, 0.0])[0], 1.0);
    }

    #[test]
    fn map_point_matches_naive_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100 {
            let mut a = IDENTITY;
            for row in a.iter_mut() {
                for v in row.iter_mut() {
                    *v = rng.random_range(-1.0..1.0);
                }
            }
            if mat_det(&a) <= 0.0 {
                a.swap(0, 1);
            }
            let y = [rng.random(), rng.random(), rng.random()];
            let x = [rng.random(), rng.random(), rng.random()];
            let m = AffineMap::new(3, a, y).unwrap();
            let got = m.map_point(&x);
            for r in 0..3 {
                let mut want = y[r];
                for c in 0..3 {
                    want += a[r][c] * x[c];
                }
                assert!((got[r] - want).abs() < 1e-14);
            }
            let back = m.inverse_point(&got);
            for r in 0..3 {
                assert!((back[r] - x[r]).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn sorted_uniform_boundary_hits_vertex() {
        let p = simplex_from_sorted(&MasterElement::Triangle, &[0.0, 1.0]);
        assert_eq!(p, TRIANGLE_VERTICES[1]);
    }

    #[test]
    fn simplex_samples_stay_inside() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for m in [MasterElement::Triangle, MasterElement::Tetrahedron] {
            for _ in 0..10_000 {
                let x = sample_uniform_simplex(&m, &mut rng);
                assert!(m.contains(&x, 1e-12));
            }
        }
    }

    #[test]
    fn mesh_summary_serialises() {
        let mesh = build_uniform_mesh(MeshFamily::Triangle, 2, MasterElement::Triangle).unwrap();
        let json = serde_json::to_value(mesh.summary()).unwrap();
        assert_eq!(json["elements"], 8);
        assert_eq!(json["family"], "triangle");
        assert_eq!(json["diagonal"], "anti_diagonal");
    }
}
