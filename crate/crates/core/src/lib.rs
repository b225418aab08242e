//! Numerical core: radial and toroidal semilinear elliptic solvers, exact
//! integral identities of the linearized theory, eigenvalue-band models and
//! spectral-flow counting.

pub mod bands;
pub mod diskmodel;
pub mod fiducial;
pub mod grid;
pub mod normalize;
pub mod quadrature;
pub(crate) mod radial;
pub mod report;
pub mod surface;
pub mod xi;
