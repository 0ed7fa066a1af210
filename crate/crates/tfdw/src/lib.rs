//! Numerical laboratory for the Thomas-Fermi-Dirac-von Weizsacker (TFDW)
//! variational problem
//!
//! ```text
//! E_V(u) = c_TF |u|^{10/3} - c_D |u|^{8/3} + c_W |grad u|^2 + V |u|^2
//!          + (1/2) double-int |u(x)|^2 |u(y)|^2 / |x - y|
//!   I_V(m) = inf { E_V(u) : mass(u) = m }
//! ```
//!
//! with all integrals over R^3. The crate evaluates the energy, minimizes
//! it under the mass constraint, and measures the structures that govern
//! existence versus escape of minimizers: binding inequalities, lower
//! bounds, localization estimates, system radii, dilation identities, and
//! small-mass asymptotics.
//!
//! The pipeline reads bottom to top:
//!
//! * [`radial`] and [`cartesian`] hold the two discretizations: a
//!   spherically symmetric profile on a logarithmic (or linear) radial
//!   grid, and a cell-centered periodic-box field with free-space
//!   Coulomb convolution for molecular geometries.
//! * [`functional`] evaluates the five-term energy breakdown, the
//!   Euler-Lagrange gradient, and the closed-form constants of the
//!   supporting inequalities.
//! * [`minimize`] runs the mass-constrained projected descent, plus the
//!   dilation identities and the interpolation-quotient optimizer.
//! * [`diagnostics`] measures localization: IMS defects, annulus
//!   estimates, the half-mass radius, split points, concentration and
//!   escape indicators.
//! * [`curves`] sweeps masses into energy curves and evaluates binding
//!   residuals, attraction gaps, and the small-mass slope comparison.
//! * [`io`] owns the artifact formats: atomic writes, config hashes, and
//!   state files.
//!
//! # Example
//!
//! Relax a unit-mass state in a hydrogenic potential and inspect the
//! energy split:
//!
//! ```
//! use tfdw::functional::{Constants, PotentialSpec};
//! use tfdw::minimize::{minimize_mass_constrained, SolveConfig};
//! use tfdw::radial::RadialGridSpec;
//!
//! let cfg = SolveConfig {
//!     tol: 1e-6,
//!     radial_grid: RadialGridSpec::logarithmic(1e-4, 30.0, 500),
//!     ..SolveConfig::new(0.5)
//! };
//! let result = minimize_mass_constrained(
//!     &PotentialSpec::Atomic { z: 1.0 },
//!     &cfg,
//!     &Constants::unit(),
//! )?;
//! assert!(result.converged);
//! assert!(result.breakdown.total < 0.0);
//! assert!((result.u.mass() - 0.5).abs() < 1e-8);
//! # Ok::<(), tfdw::Error>(())
//! ```

mod banded;
pub mod cartesian;
pub mod curves;
pub mod diagnostics;
pub mod error;
pub mod functional;
pub mod io;
pub mod minimize;
pub mod radial;

pub use error::{Error, Result};

use cartesian::Field3;
use radial::RadialFunction;

/// A candidate state in either discretization. Most operations accept a
/// `State` and dispatch on the representation; construct one from a
/// [`RadialFunction`] or a [`Field3`] directly or via `From`.
#[derive(Debug, Clone)]
pub enum State {
    Radial(RadialFunction),
    Box3(Field3),
}

impl State {
    /// Quadrature mass `int |u|^2`.
    pub fn mass(&self) -> f64 {
        match self {
            State::Radial(u) => u.mass(),
            State::Box3(u) => u.mass(),
        }
    }

    /// Raw kinetic integral `int |grad u|^2`, no coupling factor.
    pub fn kinetic_density(&self) -> f64 {
        match self {
            State::Radial(u) => u.kinetic_density(),
            State::Box3(u) => u.kinetic_density(),
        }
    }

    pub fn as_radial(&self) -> Option<&RadialFunction> {
        match self {
            State::Radial(u) => Some(u),
            State::Box3(_) => None,
        }
    }

    pub fn as_box3(&self) -> Option<&Field3> {
        match self {
            State::Radial(_) => None,
            State::Box3(u) => Some(u),
        }
    }
}

impl From<RadialFunction> for State {
    fn from(u: RadialFunction) -> Self {
        State::Radial(u)
    }
}

impl From<Field3> for State {
    fn from(f: Field3) -> Self {
        State::Box3(f)
    }
}
