//! The tolerance ladder. Construction checks are exact up to rounding,
//! downstream identities are tested one notch looser, discretization
//! statements carry their own bounds.

use serde::{Deserialize, Serialize};

/// Algebraic construction checks (Jacobi, antisymmetry, invariance).
pub const CONSTRUCTION: f64 = 1e-12;
/// Property tests on composed operations.
pub const PROPERTY: f64 = 1e-10;
/// Exact rearrangements (summation by parts, decompositions).
pub const EXACT: f64 = 1e-13;
/// Relative rank threshold for rank-revealing factorizations.
pub const RANK: f64 = 1e-10;
/// Compatibility threshold separating a Gauss-law obstruction from solver noise.
pub const COMPAT: f64 = 1e-9;

/// Overridable tolerance table. Defaults follow the constants above.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    pub version: u32,
    pub construction: f64,
    pub exact: f64,
    pub property: f64,
    pub decomposition: f64,
    pub flow: f64,
    pub hodge: f64,
    pub solver: f64,
    pub compat: f64,
    pub rank: f64,
    pub angle: f64,
    pub reduced: f64,
    pub jacobi: f64,
    pub brst: f64,
    pub ultralocal: f64,
    pub square_abelian: f64,
    pub square_flow: f64,
    pub extension: f64,
    pub slope_target: f64,
    pub slope_window: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Tolerances {
            version: 1,
            construction: CONSTRUCTION,
            exact: EXACT,
            property: PROPERTY,
            decomposition: 1e-13,
            flow: 1e-12,
            hodge: 1e-10,
            solver: 1e-10,
            compat: COMPAT,
            rank: RANK,
            angle: 1e-8,
            reduced: 1e-8,
            jacobi: 1e-11,
            brst: 1e-12,
            ultralocal: 1e-12,
            square_abelian: 1e-8,
            square_flow: 1e-6,
            extension: 1e-10,
            slope_target: 2.0,
            slope_window: 0.3,
        }
    }
}
