//! Symmetry groups of the simplex master elements.

use std::sync::OnceLock;

use crate::geometry::{mat_mul, Mat3, IDENTITY};

const HALF_SQRT3: f64 = 0.866_025_403_784_438_6;

/// Rotation by 2π/3 about the origin, embedded in 3×3.
pub const TRIANGLE_ROTATION: Mat3 = [[-0.5, -HALF_SQRT3, 0.0], [HALF_SQRT3, -0.5, 0.0], [0.0, 0.0, 1.0]];

/// Order-four symmetry of the reference tetrahedron with `I + R₀ + R₀² + R₀³ = 0`.
pub const TET_R0: Mat3 = [[0.0, 0.0, -1.0], [0.0, -1.0, 0.0], [1.0, 0.0, 0.0]];

/// Cyclic permutation of the axes.
pub const TET_R1: Mat3 = [[0.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 0.0]];

/// Half turn about the y axis.
pub const TET_R2: Mat3 = [[-1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, -1.0]];

/// `{I, R, R²}` for the triangle.
pub fn triangle_rotations() -> &'static [Mat3; 3] {
    static GROUP: OnceLock<[Mat3; 3]> = OnceLock::new();
    GROUP.get_or_init(|| {
        let r2 = mat_mul(&TRIANGLE_ROTATION, &TRIANGLE_ROTATION);
        [IDENTITY, TRIANGLE_ROTATION, r2]
    })
}

/// `{I, R₀, R₀², R₀³}`.
pub fn tet_r0_powers() -> &'static [Mat3; 4] {
    static GROUP: OnceLock<[Mat3; 4]> = OnceLock::new();
    GROUP.get_or_init(|| {
        let r2 = mat_mul(&TET_R0, &TET_R0);
        let r3 = mat_mul(&r2, &TET_R0);
        [IDENTITY, TET_R0, r2, r3]
    })
}

/// The twelve proper rotations mapping the reference tetrahedron onto itself,
/// in the order `I, R₁, R₁², R₂, R₁R₂, R₂R₁, R₁²R₂, R₂R₁², R₁R₂R₁², R₁²R₂R₁,
/// R₂R₁R₂, R₂R₁²R₂`.
pub fn tet_rotation_group() -> &'static [Mat3; 12] {
    static GROUP: OnceLock<[Mat3; 12]> = OnceLock::new();
    GROUP.get_or_init(|| {
        let r1 = TET_R1;
        let r2 = TET_R2;
        let r1s = mat_mul(&r1, &r1);
        let m = |a: &Mat3, b: &Mat3| mat_mul(a, b);
        [
            IDENTITY,
            r1,
            r1s,
            r2,
            m(&r1, &r2),
            m(&r2, &r1),
            m(&r1s, &r2),
            m(&r2, &r1s),
            m(&m(&r1, &r2), &r1s),
            m(&m(&r1s, &r2), &r1),
            m(&m(&r2, &r1), &r2),
            m(&m(&r2, &r1s), &r2),
        ]
    })
}
