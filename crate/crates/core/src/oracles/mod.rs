//! Closed-form reference solutions and gas-dynamics relations.

mod expansion;
mod oblique;
mod reference;
mod smooth;

pub use expansion::{inverse_nu, prandtl_meyer_nu, ExpansionCase, WallCurve, WedgeGeometry};
pub use oblique::{
    oblique_shock_relations, post_shock_state, verify_rankine_hugoniot, ObliqueShockCase,
    ObliqueShockRelations, RhResidual, VelocityOrdering,
};
pub use reference::{
    export_reference_field, load_reference_field, FieldFormat, Provenance, ReferenceField,
    ReferenceGrid, Units,
};
pub use smooth::{smooth_density_gradient, smooth_exact, SmoothWave, SMOOTH_U, SMOOTH_V};

use crate::physics::PrimitiveState;

/// Anything that can report the exact state at a point.
pub trait Oracle: Sync {
    /// State at (x, y, t); steady oracles ignore `t`.
    fn state(&self, p: [f64; 3]) -> crate::Result<PrimitiveState>;

    /// Closed-form density gradient, when one exists.
    fn density_gradient(&self, _p: [f64; 3]) -> Option<[f64; 2]> {
        None
    }

    /// Side of a known discontinuity (`-1`, `0` or `1`); `0` everywhere for
    /// continuous fields.
    fn side(&self, _p: [f64; 3]) -> i8 {
        0
    }
}
