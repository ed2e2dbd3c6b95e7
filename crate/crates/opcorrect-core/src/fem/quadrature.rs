//! Symmetric triangle quadrature rules in barycentric coordinates.
//!
//! Weights sum to one; multiply by the triangle area. The six-point rule is
//! exact to degree 4, which covers every assembled term of the forward model
//! (the cubic reaction term against a P1 test function is degree 4). The
//! three-point midpoint rule is exact to degree 2 and is used only for the
//! mass matrix.

/// Edge-midpoint rule, degree 2.
pub const MIDPOINT_3: [([f64; 3], f64); 3] = [
    ([0.5, 0.5, 0.0], 1.0 / 3.0),
    ([0.0, 0.5, 0.5], 1.0 / 3.0),
    ([0.5, 0.0, 0.5], 1.0 / 3.0),
];

const D4_A: f64 = 0.445_948_490_915_965;
const D4_B: f64 = 0.091_576_213_509_771;
const D4_WA: f64 = 0.223_381_589_678_011;
const D4_WB: f64 = 0.109_951_743_655_322;

/// Six-point rule, degree 4.
pub const DEGREE4_6: [([f64; 3], f64); 6] = [
    ([1.0 - 2.0 * D4_A, D4_A, D4_A], D4_WA),
    ([D4_A, 1.0 - 2.0 * D4_A, D4_A], D4_WA),
    ([D4_A, D4_A, 1.0 - 2.0 * D4_A], D4_WA),
    ([1.0 - 2.0 * D4_B, D4_B, D4_B], D4_WB),
    ([D4_B, 1.0 - 2.0 * D4_B, D4_B], D4_WB),
    ([D4_B, D4_B, 1.0 - 2.0 * D4_B], D4_WB),
];

/// Value of a P1 function with vertex values `v` at barycentric point `bary`.
#[inline]
pub fn interpolate(v: [f64; 3], bary: [f64; 3]) -> f64 {
    v[0] * bary[0] + v[1] * bary[1] + v[2] * bary[2]
}
