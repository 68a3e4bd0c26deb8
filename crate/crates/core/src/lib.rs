//! Fracture energy minimization for gradient-polyconvex bodies with
//! varifold-represented cracks.
//!
//! The library discretizes and minimizes an energy of the form
//!
//! ```text
//! F(y, V) = ∫ W(∇y, ∇[cof ∇y], ∇[det ∇y]) dx
//!         + a_bar μ_V + a1 ∫ ‖A‖^p_bar dV + a2 ‖∂V‖
//! ```
//!
//! over piecewise-affine deformations `y` of a tetrahedral body (with
//! mesh cutting for crack-induced jumps) and discrete curvature
//! 2-varifolds `V` supported on triangulated crack surfaces. Energy
//! comparison over a finite family of candidate crack configurations
//! selects between cracked and crack-free states under Dirichlet data.

// index loops here mirror tensor component formulas; iterator
// rewrites would obscure them
#![allow(clippy::needless_range_loop)]

pub mod admissibility;
pub mod config;
pub mod energy;
pub mod error;
pub mod io;
pub mod mesh;
pub mod meshgen;
pub mod minimizer;
pub mod report;
pub mod state;
pub mod tensor;
pub mod varifold;

pub use energy::{DensityFamily, DensitySpec, EnergyParams};
pub use error::Error;
pub use mesh::BodyMesh;
pub use state::DeformationState;
pub use varifold::DiscreteVarifold;
